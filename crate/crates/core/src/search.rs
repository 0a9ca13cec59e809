//! Adversarial search for the growth constant `A` in
//! `|(I - P) f(x)| <= sqrt(A |x| + eps^2)`.
//!
//! Known: `A = 6 eps` always suffices, and the square-root graph map needs
//! `A >= 2 eps`. The search explores concave, nondecreasing, piecewise-linear
//! graph maps `t -> (t, g(t))` and reports the largest certified growth
//! rate it finds. The output is a numerical lower bound on the sharp
//! constant, never a proof of sharpness.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::residual_at;
use crate::error::{Error, Result};
use crate::extractor::{assemble_frame, ExtractionConfig, IsometryFrame};
use crate::gallery::{certify, Admissibility, Family, GraphProfile, Map, MapSpec, SamplerConfig};
use crate::rng::indexed_substream;
use crate::space::Vector;

pub const MIN_KNOTS: usize = 2;
pub const MAX_KNOTS: usize = 256;
/// Radial resolution of the growth-rate probe (per grid type).
pub const GROWTH_GRID: usize = 256;
pub const DECAY_ROUNDS: usize = 8;
pub const STEP_DECAY: f64 = 0.5;
pub const INITIAL_STEP: f64 = 0.25;
pub const CANDIDATE_TOL: f64 = 1e-6;
pub const CANDIDATE_CERT_PAIRS: usize = 2000;
pub const RESULT_LABEL: &str = "numerical lower bound on the sharp growth constant A (not a proof)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub epsilon: f64,
    pub knot_count: usize,
    pub t_max: f64,
    /// Coordinate sweeps per step-size round.
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Start restart 0 from the interpolant of `sqrt(2 eps t)`.
    #[serde(default = "default_true")]
    pub sqrt_seed: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            epsilon: 0.1,
            knot_count: 8,
            t_max: 1e4,
            iterations: 4,
            restarts: 4,
            seed: 0,
            sqrt_seed: true,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(crate::gallery::MIN_EPSILON..=crate::gallery::MAX_EPSILON).contains(&self.epsilon) {
            return bad(format!("epsilon {} out of range", self.epsilon));
        }
        if !(MIN_KNOTS..=MAX_KNOTS).contains(&self.knot_count) {
            return bad(format!("knot_count must lie in [{MIN_KNOTS}, {MAX_KNOTS}]"));
        }
        if !(self.t_max >= 100.0 * self.epsilon && self.t_max.is_finite()) {
            return bad(format!("t_max must be >= 100 eps, got {}", self.t_max));
        }
        if self.restarts == 0 {
            return bad("restarts must be >= 1".into());
        }
        Ok(())
    }

    /// Knot positions `t_max (j / (K - 1))^2`, denser near the origin where
    /// `sqrt` bends.
    pub fn knots(&self) -> Vec<f64> {
        let last = (self.knot_count - 1) as f64;
        (0..self.knot_count)
            .map(|j| {
                if j + 1 == self.knot_count {
                    self.t_max
                } else {
                    self.t_max * (j as f64 / last).powi(2)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    pub rate: f64,
    pub witness: Vector,
}

fn growth_probes(map: &Map, t_max: f64) -> Vec<Vector> {
    let m = map.dim_in();
    let mut radii: Vec<f64> = (0..GROWTH_GRID)
        .map(|j| t_max * 10f64.powf(-6.0 * (1.0 - j as f64 / (GROWTH_GRID - 1) as f64)))
        .chain((1..=GROWTH_GRID).map(|j| t_max * j as f64 / GROWTH_GRID as f64))
        .collect();
    radii.push(t_max);
    let mut probes = Vec::with_capacity(2 * m * radii.len());
    for i in 0..m {
        for sign in [1.0, -1.0] {
            let dir = Vector::basis(i, m).scale(sign);
            probes.extend(radii.iter().map(|r| dir.scale(*r)));
        }
    }
    probes.extend(
        map.critical_points()
            .into_iter()
            .filter(|p| p.norm() > 0.0 && p.norm() <= t_max),
    );
    probes
}

/// Smallest `A` making `sqrt(A |x| + eps^2)` dominate the observed
/// orthogonal residual over the probe set, with its attaining point.
pub fn growth_estimate(map: &Map, frame: &IsometryFrame, t_max: f64) -> Result<GrowthEstimate> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidConfig(format!("t_max must be > 0, got {t_max}")));
    }
    let eps2 = map.epsilon().powi(2);
    let probes = growth_probes(map, t_max);
    let rates: Vec<f64> = probes
        .par_iter()
        .map(|x| {
            let s = residual_at(map, frame, x)?;
            Ok(((s.k_norm * s.k_norm - eps2) / s.r).max(0.0))
        })
        .collect::<Result<_>>()?;
    let mut best = GrowthEstimate {
        rate: 0.0,
        witness: probes[0].clone(),
    };
    for (x, rate) in probes.iter().zip(rates) {
        if rate > best.rate {
            best = GrowthEstimate { rate, witness: x.clone() };
        }
    }
    Ok(best)
}

pub fn growth_rate(map: &Map, frame: &IsometryFrame, t_max: f64) -> Result<f64> {
    Ok(growth_estimate(map, frame, t_max)?.rate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub a_hat: f64,
    pub witness_params: Vec<f64>,
    pub witness_t: f64,
    pub certified_witness: bool,
    pub history: Vec<(usize, f64)>,
    pub restart: usize,
    pub evaluations: usize,
    pub label: String,
}

impl SearchResult {
    pub fn witness_spec(&self, epsilon: f64) -> MapSpec {
        MapSpec {
            params: self.witness_params.clone(),
            ..MapSpec::graph_family(epsilon, &[0.0], &[0.0])
        }
    }
}

#[derive(Debug, Clone)]
struct Scored {
    a_hat: f64,
    witness_t: f64,
    params: Vec<f64>,
}

/// Certification and scoring of one graph-family parameter vector, as used
/// for every search candidate. `Ok(None)` means the candidate is inadmissible.
pub fn score_graph_params(cfg: &SearchConfig, params: &[f64]) -> Result<Option<(f64, f64)>> {
    Ok(score_params(cfg, params).map(|s| (s.a_hat, s.witness_t)))
}

fn score_params(cfg: &SearchConfig, params: &[f64]) -> Option<Scored> {
    let spec = MapSpec {
        family: Family::GraphFamily,
        params: params.to_vec(),
        ..MapSpec::graph_family(cfg.epsilon, &[0.0], &[0.0])
    };
    let map = Map::new(spec).ok()?;
    if map.analytic_admissibility() != Admissibility::Proven {
        return None;
    }
    let sampler = SamplerConfig {
        samples: CANDIDATE_CERT_PAIRS,
        radius: 2.0 * cfg.t_max,
        seed: cfg.seed,
    };
    if !certify(&map, &sampler).ok()?.certified {
        return None;
    }
    let extraction = ExtractionConfig {
        tol: CANDIDATE_TOL,
        seed: cfg.seed,
        ..Default::default()
    };
    let (_, frame) = assemble_frame(&map, &extraction).ok()?;
    let est = growth_estimate(&map, &frame, cfg.t_max).ok()?;
    Some(Scored {
        a_hat: est.rate,
        witness_t: est.witness[0],
        params: params.to_vec(),
    })
}

fn score_values(cfg: &SearchConfig, knots: &[f64], values: &[f64]) -> Option<Scored> {
    let profile = GraphProfile::interpolating(knots, values).ok()?;
    score_params(cfg, &profile.params())
}

struct RestartOutcome {
    best: Option<Scored>,
    history: Vec<(usize, f64)>,
    evaluations: usize,
}

fn initial_values(cfg: &SearchConfig, knots: &[f64], restart: usize) -> Vec<f64> {
    let eps = cfg.epsilon;
    if restart == 0 && cfg.sqrt_seed {
        return knots.iter().map(|t| (2.0 * eps * t).sqrt()).collect();
    }
    let mut rng = indexed_substream(cfg.seed, "search", restart as u64);
    let power: f64 = rng.random_range(0.5..=1.0);
    let fill: f64 = rng.random_range(0.3..0.9);
    let top = fill * (2.0 * eps * cfg.t_max + eps * eps).sqrt();
    knots.iter().map(|t| top * (t / cfg.t_max).powf(power)).collect()
}

fn run_restart(cfg: &SearchConfig, restart: usize) -> RestartOutcome {
    let knots = cfg.knots();
    let eps = cfg.epsilon;
    let mut values = initial_values(cfg, &knots, restart);
    let mut evaluations = 1;
    let mut best = score_values(cfg, &knots, &values);
    let mut history = Vec::new();
    if let Some(b) = &best {
        history.push((0, b.a_hat));
    }
    let scales: Vec<f64> = knots.iter().map(|t| (2.0 * eps * t + eps * eps).sqrt()).collect();
    let mut step = INITIAL_STEP;
    let mut sweep = 0;
    for _round in 0..DECAY_ROUNDS {
        for _ in 0..cfg.iterations {
            sweep += 1;
            // v_0 = g(0) = 0 stays fixed
            for j in 1..knots.len() {
                let h = step * scales[j];
                let mut improved: Option<(f64, Scored)> = None;
                for delta in [h, -h] {
                    let mut trial = values.clone();
                    trial[j] += delta;
                    if trial[j] < 0.0 {
                        continue;
                    }
                    evaluations += 1;
                    let Some(s) = score_values(cfg, &knots, &trial) else {
                        continue;
                    };
                    let current = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.a_hat);
                    let incumbent = improved.as_ref().map_or(current, |(_, b)| b.a_hat);
                    if s.a_hat > incumbent {
                        improved = Some((delta, s));
                    }
                }
                if let Some((delta, s)) = improved {
                    values[j] += delta;
                    best = Some(s);
                }
            }
            if let Some(b) = &best {
                history.push((sweep, b.a_hat));
            }
        }
        step *= STEP_DECAY;
    }
    RestartOutcome {
        best,
        history,
        evaluations,
    }
}

pub fn search_sharp_a(cfg: &SearchConfig) -> Result<SearchResult> {
    cfg.validate()?;
    let outcomes: Vec<RestartOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(cfg, r))
        .collect();
    let evaluations = outcomes.iter().map(|o| o.evaluations).sum();
    let mut winner: Option<(usize, &RestartOutcome, &Scored)> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if let Some(s) = &o.best {
            // strict comparison keeps the lowest restart index on ties
            if winner.is_none_or(|(_, _, w)| s.a_hat > w.a_hat) {
                winner = Some((i, o, s));
            }
        }
    }
    let (restart, outcome, best) = winner.ok_or(Error::NoCertifiedCandidate)?;
    Ok(SearchResult {
        a_hat: best.a_hat,
        witness_params: best.params.clone(),
        witness_t: best.witness_t,
        certified_witness: true,
        history: outcome.history.clone(),
        restart,
        evaluations,
        label: RESULT_LABEL.to_string(),
    })
}
