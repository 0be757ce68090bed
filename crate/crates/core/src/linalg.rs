//! Symmetric positive-definite state with a maintained inverse, Mahalanobis
//! geometry and the closed-form slab projection.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{self, dot};
use crate::{Error, Result};

/// Number of Sherman-Morrison updates between full re-inversions.
pub const REFRESH_INTERVAL: usize = 1024;

const RESIDUAL_LIMIT: f64 = 1e-6;
const DEGENERATE_DIRECTION: f64 = 1e-12;

/// `M` (row-major, `dim x dim`) together with `M^{-1}`.
///
/// `M` starts at `scale * I` and only ever grows by weighted outer products,
/// so its eigenvalues stay at or above `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdState {
    dim: usize,
    m: Vec<f64>,
    m_inv: Vec<f64>,
    updates_since_refresh: usize,
}

impl SpdState {
    pub fn new(dim: usize, scale: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1"));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter("initial scale must be positive"));
        }
        let mut m = vec![0.0; dim * dim];
        let mut m_inv = vec![0.0; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = scale;
            m_inv[i * dim + i] = 1.0 / scale;
        }
        Ok(Self {
            dim,
            m,
            m_inv,
            updates_since_refresh: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major `M`.
    pub fn matrix(&self) -> &[f64] {
        &self.m
    }

    /// Row-major `M^{-1}`.
    pub fn inverse(&self) -> &[f64] {
        &self.m_inv
    }

    pub fn updates_since_refresh(&self) -> usize {
        self.updates_since_refresh
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(())
    }

    /// `M <- M + weight * x x^T`, with `M^{-1}` updated by Sherman-Morrison.
    ///
    /// A zero weight leaves the state untouched. Every
    /// [`REFRESH_INTERVAL`] effective updates the inverse is recomputed from
    /// `M` by Cholesky factorization.
    pub fn rank_one_update(&mut self, x: &[f64], weight: f64) -> Result<()> {
        self.check_dim(x)?;
        if !weight.is_finite() || !math::all_finite(x) {
            return Err(Error::NonFinite);
        }
        if weight < 0.0 {
            return Err(Error::InvalidParameter("update weight must be non-negative"));
        }
        if weight == 0.0 {
            return Ok(());
        }
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                self.m[i * d + j] += weight * x[i] * x[j];
            }
        }
        let v = self.inv_mul(x);
        let denom = 1.0 + weight * dot(x, &v);
        let coef = weight / denom;
        for i in 0..d {
            for j in 0..d {
                self.m_inv[i * d + j] -= coef * v[i] * v[j];
            }
        }
        // symmetrize
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = 0.5 * (self.m_inv[i * d + j] + self.m_inv[j * d + i]);
                self.m_inv[i * d + j] = avg;
                self.m_inv[j * d + i] = avg;
            }
        }
        self.updates_since_refresh += 1;
        if self.updates_since_refresh >= REFRESH_INTERVAL {
            self.refresh()?;
        }
        Ok(())
    }

    /// Recomputes `M^{-1}` from `M` and checks `|M M^{-1} - I|_max <= 1e-6`.
    pub fn refresh(&mut self) -> Result<()> {
        self.m_inv = invert_spd(&self.m, self.dim)?;
        self.updates_since_refresh = 0;
        if self.inverse_residual() > RESIDUAL_LIMIT {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(())
    }

    /// `max |M M^{-1} - I|` over all entries.
    pub fn inverse_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let s: f64 = (0..d).map(|k| self.m[i * d + k] * self.m_inv[k * d + j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    /// `M^{-1} x`.
    pub fn inv_mul(&self, x: &[f64]) -> Vec<f64> {
        self.m_inv.chunks_exact(self.dim).map(|row| dot(row, x)).collect()
    }

    /// `x^T M^{-1} x`.
    pub fn inv_quad(&self, x: &[f64]) -> f64 {
        dot(x, &self.inv_mul(x))
    }

    /// `(u - w)^T M (u - w)`.
    pub fn mahalanobis_sq(&self, u: &[f64], w: &[f64]) -> Result<f64> {
        self.check_dim(u)?;
        self.check_dim(w)?;
        let diff: Vec<f64> = u.iter().zip(w).map(|(a, b)| a - b).collect();
        let d = self.dim;
        let q: f64 = (0..d).map(|i| diff[i] * dot(&self.m[i * d..(i + 1) * d], &diff)).sum();
        Ok(q.max(0.0))
    }

    /// Projection of `w` onto the slab `{v : |v^T x| <= cap}` in the
    /// Mahalanobis distance induced by `M`.
    pub fn slab_project(&self, w: &[f64], x: &[f64], cap: f64) -> Result<Vec<f64>> {
        self.check_dim(w)?;
        self.check_dim(x)?;
        if !(cap.is_finite() && cap > 0.0) {
            return Err(Error::InvalidParameter("slab cap must be positive"));
        }
        let margin = dot(w, x);
        if margin.abs() <= cap {
            return Ok(w.to_vec());
        }
        let direction = self.inv_mul(x);
        let q = dot(x, &direction);
        if q <= DEGENERATE_DIRECTION {
            return Err(Error::SingularDirection(q));
        }
        let target = if margin > cap { cap } else { -cap };
        let step = (margin - target) / q;
        Ok(w.iter().zip(&direction).map(|(wi, di)| wi - step * di).collect())
    }
}

/// Inverse of a symmetric positive-definite matrix by Cholesky factorization.
pub fn invert_spd(m: &[f64], dim: usize) -> Result<Vec<f64>> {
    if m.len() != dim * dim {
        return Err(Error::DimensionMismatch {
            expected: dim * dim,
            found: m.len(),
        });
    }
    let d = dim;
    // lower-triangular factor L with M = L L^T
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = m[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::NotPositiveDefinite);
                }
                l[i * d + i] = math::sqrt(s);
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    // L^{-1} by forward substitution
    let mut l_inv = vec![0.0; d * d];
    for col in 0..d {
        for i in col..d {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                s -= l[i * d + k] * l_inv[k * d + col];
            }
            l_inv[i * d + col] = s / l[i * d + i];
        }
    }
    // M^{-1} = L^{-T} L^{-1}
    let mut inv = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (i..d).map(|k| l_inv[k * d + i] * l_inv[k * d + j]).sum();
            inv[i * d + j] = s;
            inv[j * d + i] = s;
        }
    }
    Ok(inv)
}
