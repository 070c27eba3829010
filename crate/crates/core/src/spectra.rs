//! Singular value decomposition, hard-threshold rank selection, spectral
//! energy profiles and column scaling.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};

const MAX_SWEEPS: usize = 80;
const ROTATION_TOL: f64 = 1e-15;

/// Thin SVD `M = U diag(σ) Vᵀ` with `q = min(m, n)` columns in `U` and `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub left_vectors: Matrix,
    pub singular_values: Vec<f64>,
    pub right_vectors: Matrix,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.singular_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singular_values.is_empty()
    }

    /// Keeps the top `b` triplets.
    pub fn truncated(&self, b: usize) -> SpectralDecomposition {
        let b = b.min(self.len());
        SpectralDecomposition {
            left_vectors: self.left_vectors.leading_columns(b),
            singular_values: self.singular_values[..b].to_vec(),
            right_vectors: self.right_vectors.leading_columns(b),
        }
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.left_vectors.clone();
        for i in 0..us.rows() {
            for (v, s) in us.row_mut(i).iter_mut().zip(&self.singular_values) {
                *v *= s;
            }
        }
        us.matmul(&self.right_vectors.transpose())
    }
}

/// SVD by one-sided (Hestenes) Jacobi rotations.
///
/// Singular values come out nonincreasing. Left vectors belonging to zero
/// singular values are completed to an orthonormal set.
pub fn svd(matrix: &Matrix) -> Result<SpectralDecomposition> {
    if !matrix.is_finite() {
        return Err(Error::NonFinite);
    }
    let (m, n) = (matrix.rows(), matrix.cols());
    if m == 0 || n == 0 {
        return Err(Error::EmptySpectrum);
    }
    if m < n {
        let t = jacobi_tall(&matrix.transpose())?;
        return Ok(SpectralDecomposition {
            left_vectors: t.right_vectors,
            singular_values: t.singular_values,
            right_vectors: t.left_vectors,
        });
    }
    jacobi_tall(matrix)
}

fn jacobi_tall(a: &Matrix) -> Result<SpectralDecomposition> {
    let (m, n) = (a.rows(), a.cols());
    // Column-major working copies.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || libm::fabs(gamma) <= ROTATION_TOL * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = libm::copysign(1.0, zeta) / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<(f64, usize)> = cols.iter().enumerate().map(|(j, c)| (norm(c), j)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut singular_values = Vec::with_capacity(n);
    let mut v_cols = Vec::with_capacity(n);
    for &(s, j) in &order {
        // Roundoff-level columns that lost orthogonality are replaced by a completion.
        let u = if s > 0.0 {
            let mut u: Vec<f64> = cols[j].iter().map(|x| x / s).collect();
            reorthogonalize(&mut u, &u_cols);
            let nu = norm(&u);
            if nu > 0.5 {
                u.iter_mut().for_each(|x| *x /= nu);
                Some(u)
            } else {
                None
            }
        } else {
            None
        };
        let u = u.unwrap_or_else(|| complete_basis(&u_cols, m));
        u_cols.push(u);
        singular_values.push(s);
        v_cols.push(v[j].clone());
    }
    Ok(SpectralDecomposition {
        left_vectors: Matrix::from_columns(m, &u_cols),
        singular_values,
        right_vectors: Matrix::from_columns(n, &v_cols),
    })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

fn reorthogonalize(u: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(u, b);
            u.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
}

fn complete_basis(basis: &[Vec<f64>], m: usize) -> Vec<f64> {
    let mut best: Option<Vec<f64>> = None;
    let mut best_norm = 0.0;
    for k in 0..m {
        let mut e = vec![0.0; m];
        e[k] = 1.0;
        reorthogonalize(&mut e, basis);
        let ne = norm(&e);
        if ne > best_norm {
            best_norm = ne;
            best = Some(e);
        }
        if ne > 0.7 {
            break;
        }
    }
    let mut e = best.expect("basis smaller than dimension");
    e.iter_mut().for_each(|x| *x /= best_norm);
    e
}

/// How many singular triplets a regression keeps.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RankMode {
    /// Median-based optimal hard threshold for an unknown noise level.
    #[default]
    Universal,
    Fixed(usize),
    /// Smallest rank whose cumulative energy reaches the fraction.
    Energy(f64),
}

/// ω(β) ≈ 0.56β³ − 0.95β² + 1.82β + 1.43, the cubic fit of the optimal
/// median-scaled threshold coefficient for aspect ratio β ≤ 1.
pub fn universal_threshold_coefficient(beta: f64) -> f64 {
    0.56 * beta * beta * beta - 0.95 * beta * beta + 1.82 * beta + 1.43
}

fn median(sorted_desc: &[f64]) -> f64 {
    let n = sorted_desc.len();
    if n % 2 == 1 {
        sorted_desc[n / 2]
    } else {
        0.5 * (sorted_desc[n / 2 - 1] + sorted_desc[n / 2])
    }
}

/// Rank to keep for a spectrum of an `m × n` matrix; always in `1..=min(m, n)`.
///
/// In universal mode, values at roundoff level (below `1e-12·σ₁`) are never
/// counted, so an exactly low-rank matrix does not pick up numerical noise.
pub fn select_rank(singular_values: &[f64], m: usize, n: usize, mode: RankMode) -> Result<usize> {
    if singular_values.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    if m == 0 || n == 0 {
        return Err(Error::InvalidConfig("matrix dimensions must be positive".into()));
    }
    let cap = m.min(n).min(singular_values.len());
    let b = match mode {
        RankMode::Fixed(b) => b,
        RankMode::Universal => {
            let beta = m.min(n) as f64 / m.max(n) as f64;
            let tau = universal_threshold_coefficient(beta) * median(singular_values);
            let floor = singular_values[0] * 1e-12;
            singular_values.iter().take_while(|&&s| s > tau && s > floor).count()
        }
        RankMode::Energy(fraction) => {
            let total: f64 = singular_values.iter().map(|s| s * s).sum();
            if total == 0.0 {
                1
            } else {
                let mut acc = 0.0;
                let mut b = singular_values.len();
                for (k, s) in singular_values.iter().enumerate() {
                    acc += s * s;
                    if acc / total >= fraction {
                        b = k + 1;
                        break;
                    }
                }
                b
            }
        }
    };
    Ok(b.clamp(1, cap))
}

/// Cumulative fractions Σ_{ℓ≤k} σ_ℓ² / Σ σ_ℓ² for `k = 1..=top_k`.
pub fn spectral_energy_profile(matrix: &Matrix, top_k: usize) -> Result<Vec<f64>> {
    let q = matrix.rows().min(matrix.cols());
    if top_k > q {
        return Err(Error::IndexOutOfRange {
            what: "top_k",
            index: top_k,
            size: q,
        });
    }
    let dec = svd(matrix)?;
    energy_from_singular_values(&dec.singular_values, top_k)
}

pub fn energy_from_singular_values(singular_values: &[f64], top_k: usize) -> Result<Vec<f64>> {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let mut acc = 0.0;
    Ok(singular_values
        .iter()
        .take(top_k)
        .map(|s| {
            acc += s * s;
            (acc / total).min(1.0)
        })
        .collect())
}

/// Per-column affine map `x ↦ (x − center) / scale`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ColumnScaling {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    /// Columns whose spread was below `1e-12`; they keep scale 1.
    pub degenerate: Vec<bool>,
}

impl ColumnScaling {
    pub fn identity(n: usize) -> Self {
        ColumnScaling {
            center: vec![0.0; n],
            scale: vec![1.0; n],
            degenerate: vec![false; n],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(v, (c, s))| (v - c) / s)
            .collect()
    }

    pub fn apply_matrix(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for i in 0..out.rows() {
            let r = self.apply(m.row(i));
            out.row_mut(i).copy_from_slice(&r);
        }
        out
    }

    /// Maps a standardized vector back to the original units.
    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(v, (c, s))| v * s + c)
            .collect()
    }
}

const DEGENERATE_SCALE: f64 = 1e-12;

/// Centers each column and divides by its population standard deviation.
pub fn standardize_columns(matrix: &Matrix) -> (Matrix, ColumnScaling) {
    let (m, n) = (matrix.rows(), matrix.cols());
    let mut rec = ColumnScaling::identity(n);
    for j in 0..n {
        let col = matrix.column(j);
        let mu = col.iter().sum::<f64>() / m as f64;
        let var = col.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / m as f64;
        let sd = libm::sqrt(var);
        rec.center[j] = mu;
        if sd < DEGENERATE_SCALE {
            rec.degenerate[j] = true;
        } else {
            rec.scale[j] = sd;
        }
    }
    (rec.apply_matrix(matrix), rec)
}

/// Divides each column by its root mean square, without centering.
///
/// Rescaling columns leaves every linear relation between rows intact, so
/// donor weights fitted on the scaled matrix apply to raw outcomes.
pub fn scale_columns(matrix: &Matrix) -> (Matrix, ColumnScaling) {
    let (m, n) = (matrix.rows(), matrix.cols());
    let mut rec = ColumnScaling::identity(n);
    for j in 0..n {
        let col = matrix.column(j);
        let rms = norm(&col) / libm::sqrt(m as f64);
        if rms < DEGENERATE_SCALE {
            rec.degenerate[j] = true;
        } else {
            rec.scale[j] = rms;
        }
    }
    (rec.apply_matrix(matrix), rec)
}
