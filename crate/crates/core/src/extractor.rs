//! Recovery of the linear isometry behind an ε-isometry via the doubling
//! limit `Ux = lim 2^-n f(2^n x)`.
//!
//! Stopping is decided a priori. Every ε-isometry with `f(0) = 0` satisfies
//! `|f(z) - Uz| <= sqrt(6 eps |z| + eps^2)`; at `z = 2^n x`, divided by `2^n`,
//! this gives
//!
//! ```text
//! |2^-n f(2^n x) - Ux| <= sqrt(6 eps |x| / 2^n + eps^2 / 4^n)
//! ```
//!
//! so the first `n` where the right side drops below `tol` is provably
//! accurate, no successive-difference heuristics involved.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gallery::Map;
use crate::rng::{self, substream};
use crate::space::{nearest_isometry, Matrix, Vector};

pub const MIN_TOL: f64 = 1e-10;
pub const MAX_DOUBLINGS: u32 = 60;
/// `2^n |x|` above this is refused; squares of such norms stay finite.
pub const SAFE_MAGNITUDE: f64 = 1e150;
pub const LINEARITY_CHECKS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub tol: f64,
    pub n_max: u32,
    /// Seed for the linearity cross-check points.
    #[serde(default)]
    pub seed: u64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            tol: 1e-6,
            n_max: MAX_DOUBLINGS,
            seed: 0,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol >= MIN_TOL && self.tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("tol must be >= {MIN_TOL}, got {}", self.tol)));
        }
        if self.n_max > MAX_DOUBLINGS {
            return Err(Error::InvalidConfig(format!(
                "n_max must be <= {MAX_DOUBLINGS}, got {}",
                self.n_max
            )));
        }
        Ok(())
    }
}

/// `sqrt(6 eps r / 2^n + eps^2 / 4^n)`.
pub fn a_priori_bound(epsilon: f64, r: f64, n: u32) -> f64 {
    let p = (-(n as f64)).exp2();
    (6.0 * epsilon * r * p + epsilon * epsilon * p * p).sqrt()
}

/// `2^-n f(2^n x)`.
pub fn doubling_iterate(map: &Map, x: &Vector, n: u32) -> Result<Vector> {
    let scale = (n as f64).exp2();
    let scaled = x.norm() * scale;
    if scaled > SAFE_MAGNITUDE {
        return Err(Error::Overflow { n, scaled });
    }
    Ok(map.eval(&x.scale(scale))?.scale(1.0 / scale))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointExtraction {
    pub value: Vector,
    pub n_used: u32,
    /// A-priori accuracy at `n_used`; 0 for exactly linear maps.
    pub bound: f64,
    pub converged: bool,
}

pub fn extract_at(map: &Map, x: &Vector, cfg: &ExtractionConfig) -> Result<PointExtraction> {
    cfg.validate()?;
    if x.dim() != map.dim_in() {
        return Err(Error::DimensionMismatch {
            expected: map.dim_in(),
            got: x.dim(),
        });
    }
    let r = x.norm();
    if r == 0.0 {
        return Ok(PointExtraction {
            value: Vector::zeros(map.dim_out()),
            n_used: 0,
            bound: 0.0,
            converged: true,
        });
    }
    // a linear map is its own limit
    let eps = if map.is_exactly_linear() { 0.0 } else { map.epsilon() };
    let mut n = 0;
    while a_priori_bound(eps, r, n) > cfg.tol && n < cfg.n_max {
        n += 1;
    }
    let bound = a_priori_bound(eps, r, n);
    Ok(PointExtraction {
        value: doubling_iterate(map, x, n)?,
        n_used: n,
        bound,
        converged: bound <= cfg.tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub raw_u: Matrix,
    pub u: Matrix,
    pub per_column_n: Vec<u32>,
    pub per_column_bound: Vec<f64>,
    pub ortho_deviation: f64,
    pub max_linearity_error: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsometryFrame {
    pub u: Matrix,
    pub p: Matrix,
    pub t: Matrix,
}

impl IsometryFrame {
    /// Frame of an exact isometry: `P = U U^T`, `T = U^T`.
    pub fn from_isometry(u: Matrix) -> Result<IsometryFrame> {
        if !u.has_orthonormal_columns() {
            return Err(Error::InvalidConfig(format!(
                "frame needs orthonormal columns (deviation {:e})",
                u.ortho_deviation()
            )));
        }
        let t = u.transpose();
        let p = u.matmul(&t)?;
        Ok(IsometryFrame { u, p, t })
    }

    pub fn identities(&self) -> FrameIdentities {
        let k = self.p.rows();
        let m = self.u.cols();
        let i_k = Matrix::identity(k);
        let complement = i_k.sub(&self.p).expect("square");
        FrameIdentities {
            p_idempotence: self.p.matmul(&self.p).and_then(|pp| pp.sub(&self.p)).expect("square").max_abs(),
            p_symmetry: self.p.sub(&self.p.transpose()).expect("square").max_abs(),
            tu_identity: self
                .t
                .matmul(&self.u)
                .and_then(|tu| tu.sub(&Matrix::identity(m)))
                .expect("shapes")
                .max_abs(),
            t_kills_complement: self.t.matmul(&complement).expect("shapes").max_abs(),
            t_operator_norm: self.t.operator_norm(),
        }
    }
}

/// Residuals of the frame identities `P^2 = P`, `P^T = P`, `TU = I`,
/// `T(I - P) = 0` and the operator norm of `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameIdentities {
    pub p_idempotence: f64,
    pub p_symmetry: f64,
    pub tu_identity: f64,
    pub t_kills_complement: f64,
    pub t_operator_norm: f64,
}

impl FrameIdentities {
    pub fn hold(&self, tol: f64, norm_tol: f64) -> bool {
        self.p_idempotence <= tol
            && self.p_symmetry <= tol
            && self.tu_identity <= tol
            && self.t_kills_complement <= tol
            && (self.t_operator_norm - 1.0).abs() <= norm_tol
    }
}

pub fn assemble_frame(map: &Map, cfg: &ExtractionConfig) -> Result<(ExtractionResult, IsometryFrame)> {
    cfg.validate()?;
    let (m, k) = (map.dim_in(), map.dim_out());
    if m > k {
        return Err(Error::InvalidConfig(format!("dim_in {m} > dim_out {k}")));
    }
    let columns: Vec<PointExtraction> = (0..m)
        .into_par_iter()
        .map(|i| extract_at(map, &Vector::basis(i, m), cfg))
        .collect::<Result<_>>()?;
    let raw_u = Matrix::from_columns(&columns.iter().map(|c| c.value.clone()).collect::<Vec<_>>())?;
    let ortho_deviation = raw_u.ortho_deviation();
    let column_bound = columns.iter().fold(0.0_f64, |a, c| a.max(c.bound));
    let effective_tol = cfg.tol.max(column_bound);
    if ortho_deviation > 100.0 * effective_tol {
        return Err(Error::ExtractionInconsistent(format!(
            "limit columns deviate from orthonormal by {ortho_deviation:e} (> 100 * {effective_tol:e})"
        )));
    }
    let u = nearest_isometry(&raw_u).map_err(|e| {
        Error::ExtractionInconsistent(format!("limit matrix has no polar factor: {e}"))
    })?;

    let mut rng = substream(cfg.seed, "linearity");
    let probes: Vec<Vector> = (0..LINEARITY_CHECKS)
        .map(|_| {
            let radius: f64 = rand::Rng::random_range(&mut rng, 0.1..10.0);
            rng::unit_vector(&mut rng, m).scale(radius)
        })
        .collect();
    let errors: Vec<(f64, f64)> = probes
        .par_iter()
        .map(|x| {
            let at = extract_at(map, x, cfg)?;
            let err = at.value.distance(&u.mul_vec(x)?)?;
            let lin_tol = 2.0 * effective_tol.max(at.bound) * (1.0 + x.norm());
            Ok((err, lin_tol))
        })
        .collect::<Result<_>>()?;
    let mut max_linearity_error = 0.0_f64;
    for (err, lin_tol) in &errors {
        if err > lin_tol {
            return Err(Error::ExtractionInconsistent(format!(
                "linearity cross-check failed: error {err:e} > {lin_tol:e}"
            )));
        }
        max_linearity_error = max_linearity_error.max(*err);
    }

    let frame = IsometryFrame::from_isometry(u.clone())?;
    let result = ExtractionResult {
        raw_u,
        u,
        per_column_n: columns.iter().map(|c| c.n_used).collect(),
        per_column_bound: columns.iter().map(|c| c.bound).collect(),
        ortho_deviation,
        max_linearity_error,
        converged: columns.iter().all(|c| c.converged),
    };
    Ok((result, frame))
}
