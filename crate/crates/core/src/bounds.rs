//! Residual bounds for an ε-isometry `f` against its extracted frame, and
//! executable versions of the inequalities behind them.
//!
//! For every `x`:
//!
//! * `|P f(x) - Ux| <= 2 eps`
//! * `|(I - P) f(x)| <= sqrt(6 eps |x| + eps^2)`
//! * `|T f(x) - x| <= 2 eps`
//!
//! The second bound comes from a family of estimates indexed by an integer
//! `k` with `k r > eps` (`r = |x|`): any `y` with `|y| <= r + eps` and
//! `|y - f(kx)| <= (k - 1) r + eps` satisfies
//! `|y - f(kx)/k|^2 <= 6 eps r (1 - 1/k) + eps^2 (1 - 1/k + 1/k^2)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::IsometryFrame;
use crate::gallery::{grid_points, Map, SamplerConfig};
use crate::rng::{self, substream, StreamRng};
use crate::space::Vector;

/// Additive slack on every margin and membership test.
pub const MARGIN_TOL: f64 = 1e-9;
pub const MAX_REJECTION_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    pub x: Vector,
    pub r: f64,
    pub h_norm: f64,
    pub k_norm: f64,
    pub t_resid: f64,
    pub full_resid: f64,
    pub bound2_margin: f64,
    pub bound3_margin: f64,
    pub bound4_margin: f64,
}

impl ResidualSample {
    pub fn bound4_value(epsilon: f64, r: f64) -> f64 {
        (6.0 * epsilon * r + epsilon * epsilon).sqrt()
    }

    /// Recomputes the three margins from the stored norms.
    pub fn recompute_margins(&self, epsilon: f64) -> (f64, f64, f64) {
        (
            2.0 * epsilon - self.t_resid,
            2.0 * epsilon - self.h_norm,
            Self::bound4_value(epsilon, self.r) - self.k_norm,
        )
    }
}

fn check_frame(map: &Map, frame: &IsometryFrame) -> Result<()> {
    if frame.u.cols() != map.dim_in() || frame.u.rows() != map.dim_out() {
        return Err(Error::DimensionMismatch {
            expected: map.dim_out() * map.dim_in(),
            got: frame.u.rows() * frame.u.cols(),
        });
    }
    Ok(())
}

pub fn residual_at(map: &Map, frame: &IsometryFrame, x: &Vector) -> Result<ResidualSample> {
    check_frame(map, frame)?;
    let eps = map.epsilon();
    let fx = map.eval(x)?;
    let ux = frame.u.mul_vec(x)?;
    let pfx = frame.p.mul_vec(&fx)?;
    let h = pfx.sub(&ux)?;
    let k = fx.sub(&pfx)?;
    let tf = frame.t.mul_vec(&fx)?;
    let r = x.norm();
    let h_norm = h.norm();
    let k_norm = k.norm();
    let t_resid = tf.distance(x)?;
    Ok(ResidualSample {
        x: x.clone(),
        r,
        h_norm,
        k_norm,
        t_resid,
        full_resid: fx.distance(&ux)?,
        bound2_margin: 2.0 * eps - t_resid,
        bound3_margin: 2.0 * eps - h_norm,
        bound4_margin: ResidualSample::bound4_value(eps, r) - k_norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub epsilon: f64,
    pub samples: Vec<ResidualSample>,
    pub min_margin2: f64,
    pub min_margin3: f64,
    pub min_margin4: f64,
    pub worst_x2: Vector,
    pub worst_x3: Vector,
    pub worst_x4: Vector,
    pub all_pass: bool,
}

fn argmin_by(samples: &[ResidualSample], key: impl Fn(&ResidualSample) -> f64) -> (f64, Vector) {
    let mut best = (f64::INFINITY, samples[0].x.clone());
    for s in samples {
        let v = key(s);
        if v < best.0 {
            best = (v, s.x.clone());
        }
    }
    best
}

/// Points checked by [`verify_bounds`]: the deterministic grid followed by
/// `samples` uniform points in the ball.
pub fn bound_sample_points(map: &Map, sampler: &SamplerConfig) -> Result<Vec<Vector>> {
    sampler.validate()?;
    let mut points = grid_points(map, sampler.radius);
    let mut rng = substream(sampler.seed, "bounds");
    points.extend((0..sampler.samples).map(|_| rng::point_in_ball(&mut rng, map.dim_in(), sampler.radius)));
    Ok(points)
}

pub fn verify_bounds(map: &Map, frame: &IsometryFrame, sampler: &SamplerConfig) -> Result<BoundReport> {
    check_frame(map, frame)?;
    let points = bound_sample_points(map, sampler)?;
    let samples: Vec<ResidualSample> = points
        .par_iter()
        .map(|x| residual_at(map, frame, x))
        .collect::<Result<_>>()?;
    let (min_margin2, worst_x2) = argmin_by(&samples, |s| s.bound2_margin);
    let (min_margin3, worst_x3) = argmin_by(&samples, |s| s.bound3_margin);
    let (min_margin4, worst_x4) = argmin_by(&samples, |s| s.bound4_margin);
    let all_pass = [min_margin2, min_margin3, min_margin4]
        .iter()
        .all(|m| *m >= -MARGIN_TOL);
    Ok(BoundReport {
        epsilon: map.epsilon(),
        samples,
        min_margin2,
        min_margin3,
        min_margin4,
        worst_x2,
        worst_x3,
        worst_x4,
        all_pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallMembership {
    pub in_b1: bool,
    pub in_b2: bool,
    /// `r + eps - |f(x)|`
    pub slack_b1: f64,
    /// `(k - 1) r + eps - |f(x) - f(kx)|`
    pub slack_b2: f64,
}

fn check_proof_inputs(map: &Map, x: &Vector, k: u64) -> Result<f64> {
    if x.dim() != map.dim_in() {
        return Err(Error::DimensionMismatch {
            expected: map.dim_in(),
            got: x.dim(),
        });
    }
    let r = x.norm();
    if r == 0.0 {
        return Err(Error::Precondition("x must be nonzero".into()));
    }
    if k == 0 {
        return Err(Error::Precondition("k must be a positive integer".into()));
    }
    Ok(r)
}

/// Whether `f(x)` lies in `B1 = {|y| <= r + eps}` and
/// `B2 = {|y - f(kx)| <= (k - 1) r + eps}`.
pub fn ball_membership(map: &Map, x: &Vector, k: u64) -> Result<BallMembership> {
    let r = check_proof_inputs(map, x, k)?;
    let eps = map.epsilon();
    let fx = map.eval(x)?;
    let fkx = map.eval(&x.scale(k as f64))?;
    let slack_b1 = r + eps - fx.norm();
    let slack_b2 = (k - 1) as f64 * r + eps - fx.distance(&fkx)?;
    Ok(BallMembership {
        in_b1: slack_b1 >= -MARGIN_TOL,
        in_b2: slack_b2 >= -MARGIN_TOL,
        slack_b1,
        slack_b2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MidpointCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `6 eps r (1 - 1/k) + eps^2 (1 - 1/k + 1/k^2)`.
pub fn k_bound(epsilon: f64, r: f64, k: u64) -> f64 {
    let inv = 1.0 / k as f64;
    6.0 * epsilon * r * (1.0 - inv) + epsilon * epsilon * (1.0 - inv + inv * inv)
}

/// Checks `|y - f(kx)/k|^2 <= k_bound` for `y` in `B1 ∩ B2`.
pub fn midpoint_inequality(map: &Map, x: &Vector, k: u64, y: &Vector) -> Result<MidpointCheck> {
    let r = check_proof_inputs(map, x, k)?;
    if y.dim() != map.dim_out() {
        return Err(Error::DimensionMismatch {
            expected: map.dim_out(),
            got: y.dim(),
        });
    }
    let eps = map.epsilon();
    if k as f64 * r - eps <= 0.0 {
        return Err(Error::Precondition(format!(
            "k r - eps > 0 fails: k = {k}, r = {r}, eps = {eps}"
        )));
    }
    let fkx = map.eval(&x.scale(k as f64))?;
    if y.norm() > r + eps + MARGIN_TOL {
        return Err(Error::Precondition(format!(
            "y not in B1: |y| = {} > r + eps = {}",
            y.norm(),
            r + eps
        )));
    }
    let d2 = y.distance(&fkx)?;
    let radius2 = (k - 1) as f64 * r + eps;
    if d2 > radius2 + MARGIN_TOL {
        return Err(Error::Precondition(format!(
            "y not in B2: |y - f(kx)| = {d2} > (k - 1) r + eps = {radius2}"
        )));
    }
    let centre = fkx.scale(1.0 / k as f64);
    let lhs = y.distance(&centre)?.powi(2);
    let rhs = k_bound(eps, r, k);
    Ok(MidpointCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + MARGIN_TOL,
    })
}

/// Rejection sample from the bounding box of `B1`, accepting points inside
/// `B1 ∩ B2`. `None` once the attempt cap is hit.
pub fn sample_in_balls(
    map: &Map,
    x: &Vector,
    k: u64,
    rng: &mut StreamRng,
    max_attempts: usize,
) -> Result<Option<Vector>> {
    let r = check_proof_inputs(map, x, k)?;
    let eps = map.epsilon();
    let fkx = map.eval(&x.scale(k as f64))?;
    let half = r + eps;
    let radius2 = (k - 1) as f64 * r + eps;
    for _ in 0..max_attempts {
        let y = Vector::raw(
            (0..map.dim_out())
                .map(|_| rng.random_range(-half..=half))
                .collect(),
        );
        if y.norm() <= half && y.distance(&fkx)? <= radius2 {
            return Ok(Some(y));
        }
    }
    Ok(None)
}

/// `|f((x + y)/2) - (f(x) + f(y))/2|`; zero for exact isometries.
pub fn midpoint_defect(map: &Map, x: &Vector, y: &Vector) -> Result<f64> {
    let mid = x.add(y)?.scale(0.5);
    let avg = map.eval(x)?.add(&map.eval(y)?)?.scale(0.5);
    map.eval(&mid)?.distance(&avg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::{assemble_frame, ExtractionConfig};
    use crate::gallery::{make_bounded_perturb, MapSpec};
    use crate::space::Matrix;
    use approx::assert_abs_diff_eq;

    fn t(v: f64) -> Vector {
        Vector::new(vec![v]).unwrap()
    }

    fn axis_frame() -> IsometryFrame {
        IsometryFrame::from_isometry(Matrix::new(2, 1, vec![1.0, 0.0]).unwrap()).unwrap()
    }

    fn sampler(samples: usize, radius: f64, seed: u64) -> SamplerConfig {
        SamplerConfig { samples, radius, seed }
    }

    #[test]
    fn exact_isometry_has_zero_residuals() {
        let mut rng = substream(1, "t");
        let u = rng::orthonormal_matrix(&mut rng, 4, 2);
        let map = Map::new(MapSpec::exact_isometry(&u, 0.05)).unwrap();
        let frame = IsometryFrame::from_isometry(u).unwrap();
        for _ in 0..10 {
            let x = rng::point_in_ball(&mut rng, 2, 5.0);
            let s = residual_at(&map, &frame, &x).unwrap();
            assert!(s.h_norm < 1e-14 && s.k_norm < 1e-14 && s.t_resid < 1e-14);
        }
        let rep = verify_bounds(&map, &frame, &sampler(200, 10.0, 1)).unwrap();
        assert!(rep.all_pass);
        // bound values themselves: 2 eps and sqrt(eps^2) = eps at x = 0
        assert_abs_diff_eq!(rep.min_margin2, 0.1, epsilon = 1e-13);
        assert_abs_diff_eq!(rep.min_margin3, 0.1, epsilon = 1e-13);
        assert_abs_diff_eq!(rep.min_margin4, 0.05, epsilon = 1e-13);
    }

    #[test]
    fn graph_sqrt_residual_at_one() {
        let map = Map::new(MapSpec::graph_sqrt(0.1)).unwrap();
        let s = residual_at(&map, &axis_frame(), &t(1.0)).unwrap();
        assert_eq!(s.h_norm, 0.0);
        assert_abs_diff_eq!(s.k_norm, 0.2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(ResidualSample::bound4_value(0.1, 1.0), 0.61f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.bound4_margin, 0.3338, epsilon = 1e-4);
    }

    #[test]
    fn point_perturb_residual_at_delta() {
        let map = Map::new(MapSpec::point_perturb(0.1, 0.01)).unwrap();
        let s = residual_at(&map, &axis_frame(), &t(0.01)).unwrap();
        assert_eq!(s.k_norm, 0.1);
        assert_abs_diff_eq!(ResidualSample::bound4_value(0.1, 0.01), 0.016f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(0.016f64.sqrt(), 0.1265, epsilon = 1e-4);
    }

    #[test]
    fn residual_decomposition_invariants() {
        let mut rng = substream(2, "t");
        let u = rng::orthonormal_matrix(&mut rng, 5, 3);
        let map = Map::new(make_bounded_perturb(&u, 0.4, 2).unwrap()).unwrap();
        let (_, frame) = assemble_frame(&map, &ExtractionConfig::default()).unwrap();
        for _ in 0..100 {
            let x = rng::point_in_ball(&mut rng, 3, 50.0);
            let s = residual_at(&map, &frame, &x).unwrap();
            let lhs = s.full_resid.powi(2);
            let rhs = s.h_norm.powi(2) + s.k_norm.powi(2);
            assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1e-300) + 1e-15);
            assert!((s.t_resid - s.h_norm).abs() <= 1e-9 * (1.0 + s.h_norm));
        }
    }

    #[test]
    fn bounded_perturb_margin3_at_least_eps() {
        let map = Map::new(make_bounded_perturb(&Matrix::identity(2), 0.2, 4).unwrap()).unwrap();
        let (_, frame) = assemble_frame(&map, &ExtractionConfig::default()).unwrap();
        let rep = verify_bounds(&map, &frame, &sampler(1000, 100.0, 2)).unwrap();
        assert!(rep.all_pass);
        assert!(rep.min_margin3 >= 0.2 - 1e-6, "{}", rep.min_margin3);
    }

    #[test]
    fn graph_sqrt_verify_bounds() {
        let map = Map::new(MapSpec::graph_sqrt(0.1)).unwrap();
        let (_, frame) = assemble_frame(&map, &ExtractionConfig::default()).unwrap();
        let rep = verify_bounds(&map, &frame, &sampler(1000, 100.0, 5)).unwrap();
        assert!(rep.all_pass, "{} {} {}", rep.min_margin2, rep.min_margin3, rep.min_margin4);
    }

    #[test]
    fn ball_membership_examples() {
        let mut rng = substream(3, "t");
        let u = rng::orthonormal_matrix(&mut rng, 3, 2);
        let exact = Map::new(MapSpec::exact_isometry(&u, 0.1)).unwrap();
        let b = ball_membership(&exact, &Vector::new(vec![0.3, 0.4]).unwrap(), 3).unwrap();
        assert!(b.in_b1 && b.in_b2);
        assert_abs_diff_eq!(b.slack_b1, 0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(b.slack_b2, 0.1, epsilon = 1e-14);

        let sqrt_map = Map::new(MapSpec::graph_sqrt(0.1)).unwrap();
        let b = ball_membership(&sqrt_map, &t(1.0), 4).unwrap();
        // oracle: |f(1)| = sqrt(1.2), |f(1) - f(4)| = sqrt(9 + (sqrt 0.8 - sqrt 0.2)^2)
        assert_abs_diff_eq!(b.slack_b1, 1.1 - 1.2f64.sqrt(), epsilon = 1e-15);
        let d = (9.0 + (0.8f64.sqrt() - 0.2f64.sqrt()).powi(2)).sqrt();
        assert_abs_diff_eq!(b.slack_b2, 3.1 - d, epsilon = 1e-14);
        assert!(b.in_b1 && b.in_b2);

        let pp = Map::new(MapSpec::point_perturb(0.1, 0.5)).unwrap();
        let b = ball_membership(&pp, &t(0.5), 2).unwrap();
        // oracle: |f(delta)| = sqrt(0.25 + 0.01), |f(delta) - f(1)| = sqrt(0.25 + 0.01)
        assert_abs_diff_eq!(b.slack_b1, 0.6 - 0.26f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(b.slack_b2, 0.6 - 0.26f64.sqrt(), epsilon = 1e-15);
        assert!(b.in_b1 && b.in_b2);
        assert!(ball_membership(&pp, &t(0.0), 2).is_err());
    }

    #[test]
    fn midpoint_inequality_hand_values() {
        let map = Map::new(MapSpec::graph_sqrt(0.1)).unwrap();
        let y = map.eval(&t(1.0)).unwrap();
        let c = midpoint_inequality(&map, &t(1.0), 4, &y).unwrap();
        // (sqrt(0.8)/4 - sqrt(0.2))^2 = 0.05; 0.6 * 0.75 + 0.01 * 0.8125 = 0.458125
        assert_abs_diff_eq!(c.lhs, 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(c.rhs, 0.458125, epsilon = 1e-15);
        assert!(c.holds);
    }

    #[test]
    fn midpoint_inequality_preconditions() {
        let map = Map::new(MapSpec::graph_sqrt(0.1)).unwrap();
        let y = map.eval(&t(0.05)).unwrap();
        let e = midpoint_inequality(&map, &t(0.05), 1, &y).unwrap_err();
        assert!(matches!(&e, Error::Precondition(m) if m.contains("k r - eps")), "{e}");
        let far = Vector::new(vec![5.0, 0.0]).unwrap();
        let e = midpoint_inequality(&map, &t(1.0), 4, &far).unwrap_err();
        assert!(matches!(&e, Error::Precondition(m) if m.contains("B1")), "{e}");
        let off = Vector::new(vec![-1.0, 0.0]).unwrap();
        let e = midpoint_inequality(&map, &t(1.0), 4, &off).unwrap_err();
        assert!(matches!(&e, Error::Precondition(m) if m.contains("B2")), "{e}");
    }

    #[test]
    fn exact_isometry_midpoint_lhs_zero() {
        let map = Map::new(MapSpec::exact_isometry(&Matrix::identity(2), 0.1)).unwrap();
        let x = Vector::new(vec![0.6, 0.8]).unwrap();
        let c = midpoint_inequality(&map, &x, 8, &map.eval(&x).unwrap()).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert!(c.holds);
    }

    #[test]
    fn sampled_points_in_lens_satisfy_inequality() {
        let map = Map::new(MapSpec::graph_sqrt(0.1)).unwrap();
        let mut rng = substream(9, "lens");
        let x = t(1.0);
        let mut checked = 0;
        for k in [2u64, 4, 8] {
            for _ in 0..200 {
                let Some(y) = sample_in_balls(&map, &x, k, &mut rng, MAX_REJECTION_ATTEMPTS).unwrap() else {
                    continue;
                };
                assert!(midpoint_inequality(&map, &x, k, &y).unwrap().holds);
                // push onto the boundary of B1 when that stays inside B2
                let edge = y.scale(1.1 / y.norm());
                if let Ok(c) = midpoint_inequality(&map, &x, k, &edge) {
                    assert!(c.holds);
                }
                checked += 1;
            }
        }
        assert!(checked > 300);
    }

    #[test]
    fn monotone_tightening() {
        let map = Map::new(MapSpec::graph_sqrt(0.1)).unwrap();
        let x = t(1.0);
        let y = map.eval(&x).unwrap();
        let mut prev = 0.0;
        for n in 1..=20 {
            let c = midpoint_inequality(&map, &x, 1 << n, &y).unwrap();
            assert!(c.holds);
            assert!(c.rhs > prev);
            prev = c.rhs;
        }
        assert!((0.61 - prev) < 1e-5);
        let last = midpoint_inequality(&map, &x, 1 << 20, &y).unwrap();
        // full residual against U = (1, 0) is sqrt(0.2)
        assert_abs_diff_eq!(last.lhs, 0.2, epsilon = 1e-3);
    }

    #[test]
    fn midpoint_defect_values() {
        let map = Map::new(MapSpec::graph_sqrt(0.1)).unwrap();
        let d = midpoint_defect(&map, &t(0.0), &t(4.0)).unwrap();
        assert_abs_diff_eq!(d, (0.4f64.sqrt() - 0.8f64.sqrt() / 2.0).abs(), epsilon = 1e-15);
        assert_abs_diff_eq!(d, 0.1852, epsilon = 1e-4);
        assert_eq!(midpoint_defect(&map, &t(3.0), &t(3.0)).unwrap(), 0.0);
        let exact = Map::new(MapSpec::exact_isometry(&Matrix::identity(3), 0.1)).unwrap();
        let a = Vector::new(vec![1.0, 2.0, 3.0]).unwrap();
        let b = Vector::new(vec![-0.5, 4.0, 1.0]).unwrap();
        assert!(midpoint_defect(&exact, &a, &b).unwrap() < 1e-15);
    }
}
