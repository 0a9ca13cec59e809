//! Registry of concrete ε-isometry families and sampling-based certification.
//!
//! A [`MapSpec`] is the serializable description (family name, ε, dimensions
//! and a flat parameter array). [`Map`] is the validated, ready-to-evaluate
//! form; every operation downstream of parsing takes a `Map`.
//!
//! Parameter layouts (`params`, all row-major):
//!
//! | family            | dims        | params |
//! |-------------------|-------------|--------|
//! | `exact_isometry`  | m -> k      | `U` (k*m entries, orthonormal columns) |
//! | `graph_sqrt`      | 1 -> 2      | none |
//! | `point_perturb`   | 1 -> 2      | `[delta]`, delta > 0 |
//! | `bounded_perturb` | m -> k      | `U`, amplitude, term count J, then J x `[weight, freq (m), dir (k)]` |
//! | `graph_family`    | 1 -> 2      | K knots (first is 0, increasing) then K slopes (nonnegative, nonincreasing) |
//!
//! Optional `pre` (m*m) and `post` (k*k) orthogonal matrices conjugate the
//! base map: `x -> post * f(pre * x)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, substream};
use crate::space::{Matrix, Vector};

pub const MIN_EPSILON: f64 = 1e-4;
pub const MAX_EPSILON: f64 = 1e3;
pub const MAX_DIM: usize = 64;
pub const MAX_GRAPH_KNOTS: usize = 256;
pub const MAX_PERTURB_TERMS: usize = 64;
/// Below this many random pairs a certification report is flagged.
pub const LOW_COVERAGE_PAIRS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ExactIsometry,
    GraphSqrt,
    PointPerturb,
    BoundedPerturb,
    GraphFamily,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::ExactIsometry,
        Family::GraphSqrt,
        Family::PointPerturb,
        Family::BoundedPerturb,
        Family::GraphFamily,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::ExactIsometry => "exact_isometry",
            Family::GraphSqrt => "graph_sqrt",
            Family::PointPerturb => "point_perturb",
            Family::BoundedPerturb => "bounded_perturb",
            Family::GraphFamily => "graph_family",
        }
    }

    pub fn parameter_doc(self) -> &'static str {
        match self {
            Family::ExactIsometry => {
                "m -> k, k >= m. params: U as k*m row-major entries with orthonormal columns. f(x) = Ux."
            }
            Family::GraphSqrt => {
                "1 -> 2. params: none. f(t) = (t, sqrt(2 eps t)) for t >= 0, (t, 0) for t < 0."
            }
            Family::PointPerturb => {
                "1 -> 2. params: [delta], delta > 0. f(t) = (t, 0) except f(delta) = (delta, eps)."
            }
            Family::BoundedPerturb => {
                "m -> k, k >= m. params: U (k*m), amplitude a <= eps/2, term count J, then J blocks \
                 [weight, freq (m), dir (k)] with sum |weight|*|dir| <= 1. \
                 f(x) = Ux + a * sum weight_j sin(<freq_j, x>) dir_j."
            }
            Family::GraphFamily => {
                "1 -> 2. params: K knots (0 = t_0 < t_1 < ...) then K slopes (s_0 >= s_1 >= ... >= 0). \
                 g is piecewise linear with slope s_i on [t_i, t_{i+1}) and g(0) = 0. \
                 f(t) = (t, g(t)) for t >= 0, (t, 0) for t < 0."
            }
        }
    }
}

/// Serializable description of a concrete ε-isometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub family: Family,
    pub epsilon: f64,
    pub dim_in: usize,
    pub dim_out: usize,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post: Option<Vec<f64>>,
}

impl MapSpec {
    pub fn exact_isometry(u: &Matrix, epsilon: f64) -> MapSpec {
        MapSpec {
            family: Family::ExactIsometry,
            epsilon,
            dim_in: u.cols(),
            dim_out: u.rows(),
            params: u.data().to_vec(),
            pre: None,
            post: None,
        }
    }

    pub fn graph_sqrt(epsilon: f64) -> MapSpec {
        MapSpec {
            family: Family::GraphSqrt,
            epsilon,
            dim_in: 1,
            dim_out: 2,
            params: vec![],
            pre: None,
            post: None,
        }
    }

    pub fn point_perturb(epsilon: f64, delta: f64) -> MapSpec {
        MapSpec {
            family: Family::PointPerturb,
            epsilon,
            dim_in: 1,
            dim_out: 2,
            params: vec![delta],
            pre: None,
            post: None,
        }
    }

    pub fn graph_family(epsilon: f64, knots: &[f64], slopes: &[f64]) -> MapSpec {
        MapSpec {
            family: Family::GraphFamily,
            epsilon,
            dim_in: 1,
            dim_out: 2,
            params: knots.iter().chain(slopes).copied().collect(),
            pre: None,
            post: None,
        }
    }

    /// `x -> r * f(q * x)` for orthogonal `q` (domain) and `r` (codomain).
    pub fn conjugated(&self, q: &Matrix, r: &Matrix) -> Result<MapSpec> {
        let map = Map::new(self.clone())?;
        let pre = match &map.pre {
            Some(p) => p.matmul(q)?,
            None => q.clone(),
        };
        let post = match &map.post {
            Some(p) => r.matmul(p)?,
            None => r.clone(),
        };
        let spec = MapSpec {
            pre: Some(pre.data().to_vec()),
            post: Some(post.data().to_vec()),
            ..self.clone()
        };
        Map::new(spec.clone())?;
        Ok(spec)
    }

    pub fn from_toml_str(s: &str) -> Result<MapSpec> {
        let spec: MapSpec = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Map::new(spec.clone())?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("map spec serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
struct PerturbTerm {
    weight: f64,
    freq: Vector,
    dir: Vector,
}

#[derive(Debug, Clone, PartialEq)]
struct BoundedField {
    u: Matrix,
    amplitude: f64,
    terms: Vec<PerturbTerm>,
}

impl BoundedField {
    fn eval(&self, x: &Vector) -> Vector {
        let mut out = self.u.mul_vec(x).expect("validated dims").into_vec();
        for term in &self.terms {
            let phase = crate::space::dot(term.freq.as_slice(), x.as_slice());
            let c = self.amplitude * term.weight * phase.sin();
            out.iter_mut()
                .zip(term.dir.as_slice())
                .for_each(|(o, d)| *o += c * d);
        }
        Vector::raw(out)
    }

    /// Upper bound on `sup |eta|`.
    fn sup_bound(&self) -> f64 {
        self.amplitude
            * self
                .terms
                .iter()
                .map(|t| t.weight.abs() * t.dir.norm())
                .sum::<f64>()
    }
}

/// Nonnegative, nondecreasing, concave piecewise-linear profile with `g(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphProfile {
    knots: Vec<f64>,
    slopes: Vec<f64>,
    values: Vec<f64>,
}

impl GraphProfile {
    pub fn from_params(params: &[f64]) -> Result<GraphProfile> {
        let bad = |m: String| Error::InvalidSpec(format!("graph_family: {m}"));
        if params.len() < 2 || !params.len().is_multiple_of(2) {
            return Err(bad(format!(
                "params must hold K knots then K slopes (even length >= 2), got {}",
                params.len()
            )));
        }
        let k = params.len() / 2;
        if k > MAX_GRAPH_KNOTS {
            return Err(bad(format!("at most {MAX_GRAPH_KNOTS} knots, got {k}")));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(bad("non-finite parameter".into()));
        }
        let (knots, slopes) = params.split_at(k);
        if knots[0] != 0.0 {
            return Err(bad(format!("first knot must be 0 (g(0) = 0), got {}", knots[0])));
        }
        if let Some(i) = (1..k).find(|&i| knots[i] <= knots[i - 1]) {
            return Err(bad(format!("knots must be strictly increasing (knot {i})")));
        }
        if let Some(i) = (0..k).find(|&i| slopes[i] < 0.0) {
            return Err(bad(format!("nondecreasing: slope {i} is negative")));
        }
        if let Some(i) = (1..k).find(|&i| slopes[i] > slopes[i - 1]) {
            return Err(bad(format!("concave: slope {i} exceeds slope {}", i - 1)));
        }
        let mut values = Vec::with_capacity(k);
        values.push(0.0);
        for i in 1..k {
            values.push(values[i - 1] + slopes[i - 1] * (knots[i] - knots[i - 1]));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad("profile values overflow".into()));
        }
        Ok(GraphProfile {
            knots: knots.to_vec(),
            slopes: slopes.to_vec(),
            values,
        })
    }

    /// Profile through `(knots[i], values[i])`, flat after the last knot.
    pub fn interpolating(knots: &[f64], values: &[f64]) -> Result<GraphProfile> {
        if knots.len() != values.len() || knots.is_empty() {
            return Err(Error::InvalidSpec(
                "graph_family: knots and values must have equal nonzero length".into(),
            ));
        }
        let mut slopes: Vec<f64> = knots
            .windows(2)
            .zip(values.windows(2))
            .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
            .collect();
        slopes.push(0.0);
        let params: Vec<f64> = knots.iter().chain(&slopes).copied().collect();
        GraphProfile::from_params(&params)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn params(&self) -> Vec<f64> {
        self.knots.iter().chain(&self.slopes).copied().collect()
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let i = self.knots.partition_point(|&k| k <= t) - 1;
        self.values[i] + self.slopes[i] * (t - self.knots[i])
    }

    /// Worst excess of `g(t)^2` over `2 eps t + eps^2`, the exact ε-isometry
    /// condition for concave nondecreasing profiles.
    ///
    /// For such `g` the largest distortion over pairs is attained with one
    /// end at the origin, where it equals `sqrt(t^2 + g(t)^2) - t`; that is
    /// at most ε iff `g(t)^2 <= 2 eps t + eps^2`. The right side is concave,
    /// so checking knots suffices on bounded pieces; the final ray must be
    /// flat.
    pub fn admissibility(&self, epsilon: f64) -> std::result::Result<(), String> {
        let last = *self.slopes.last().expect("nonempty");
        if last > 0.0 {
            return Err(format!(
                "final slope {last} > 0: g grows linearly and the distortion |f(t) - f(0)| - t is unbounded"
            ));
        }
        for (t, g) in self.knots.iter().zip(&self.values) {
            let cap = 2.0 * epsilon * t + epsilon * epsilon;
            if g * g > cap {
                return Err(format!(
                    "g({t}) = {g} exceeds sqrt(2 eps t + eps^2) = {}",
                    cap.sqrt()
                ));
            }
        }
        Ok(())
    }
}

/// `(t, g(t))` for `t >= 0` and `(t, 0)` otherwise.
pub fn graph_family_eval(params: &[f64], t: f64) -> Result<Vector> {
    if !t.is_finite() {
        return Err(Error::NonFinite("t"));
    }
    let profile = GraphProfile::from_params(params)?;
    Ok(Vector::raw(vec![t, profile.value(t)]))
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Exact(Matrix),
    GraphSqrt,
    PointPerturb { delta: f64 },
    Bounded(BoundedField),
    Graph(GraphProfile),
}

/// Outcome of a family's closed-form ε-isometry check.
#[derive(Debug, Clone, PartialEq)]
pub enum Admissibility {
    Proven,
    Violated(String),
}

/// Validated, evaluable map.
#[derive(Debug, Clone, PartialEq)]
pub struct Map {
    spec: MapSpec,
    kind: Kind,
    pre: Option<Matrix>,
    post: Option<Matrix>,
}

fn orthogonal(data: &[f64], n: usize, what: &str) -> Result<Matrix> {
    let m = Matrix::new(n, n, data.to_vec())
        .map_err(|e| Error::InvalidSpec(format!("{what}: {e}")))?;
    if !m.has_orthonormal_columns() {
        return Err(Error::InvalidSpec(format!("{what} is not orthogonal")));
    }
    Ok(m)
}

fn isometry(data: &[f64], rows: usize, cols: usize) -> Result<Matrix> {
    let u = Matrix::new(rows, cols, data.to_vec())
        .map_err(|e| Error::InvalidSpec(format!("U: {e}")))?;
    if !u.has_orthonormal_columns() {
        return Err(Error::InvalidSpec(format!(
            "U does not have orthonormal columns (deviation {:e})",
            u.ortho_deviation()
        )));
    }
    Ok(u)
}

impl Map {
    pub fn new(spec: MapSpec) -> Result<Map> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if !(MIN_EPSILON..=MAX_EPSILON).contains(&spec.epsilon) {
            return bad(format!(
                "epsilon {} outside [{MIN_EPSILON}, {MAX_EPSILON}]",
                spec.epsilon
            ));
        }
        let (m, k) = (spec.dim_in, spec.dim_out);
        if !(1..=MAX_DIM).contains(&m) || !(1..=MAX_DIM).contains(&k) {
            return bad(format!("dimensions must lie in 1..={MAX_DIM}, got {m} -> {k}"));
        }
        if k < m {
            return bad(format!("dim_out {k} < dim_in {m}: no isometry exists"));
        }
        if spec.params.iter().any(|p| !p.is_finite()) {
            return bad("non-finite parameter".into());
        }
        let planar = |family: &str| {
            if (m, k) != (1, 2) {
                Err(Error::InvalidSpec(format!("{family} maps 1 -> 2, got {m} -> {k}")))
            } else {
                Ok(())
            }
        };
        let kind = match spec.family {
            Family::ExactIsometry => {
                if spec.params.len() != m * k {
                    return bad(format!("exact_isometry needs {} params, got {}", m * k, spec.params.len()));
                }
                Kind::Exact(isometry(&spec.params, k, m)?)
            }
            Family::GraphSqrt => {
                planar("graph_sqrt")?;
                if !spec.params.is_empty() {
                    return bad("graph_sqrt takes no params".into());
                }
                Kind::GraphSqrt
            }
            Family::PointPerturb => {
                planar("point_perturb")?;
                match spec.params[..] {
                    [delta] if delta > 0.0 => Kind::PointPerturb { delta },
                    _ => return bad("point_perturb needs params = [delta] with delta > 0".into()),
                }
            }
            Family::BoundedPerturb => Kind::Bounded(parse_bounded(&spec.params, m, k, spec.epsilon)?),
            Family::GraphFamily => {
                planar("graph_family")?;
                Kind::Graph(GraphProfile::from_params(&spec.params)?)
            }
        };
        let pre = spec.pre.as_deref().map(|d| orthogonal(d, m, "pre")).transpose()?;
        let post = spec.post.as_deref().map(|d| orthogonal(d, k, "post")).transpose()?;
        Ok(Map { spec, kind, pre, post })
    }

    pub fn spec(&self) -> &MapSpec {
        &self.spec
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }

    pub fn epsilon(&self) -> f64 {
        self.spec.epsilon
    }

    pub fn dim_in(&self) -> usize {
        self.spec.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.spec.dim_out
    }

    /// True when the map is exactly linear, so the doubling sequence is
    /// constant from `n = 0`.
    pub fn is_exactly_linear(&self) -> bool {
        matches!(self.kind, Kind::Exact(_))
    }

    /// The graph profile for `graph_family` maps.
    pub fn graph_profile(&self) -> Option<&GraphProfile> {
        match &self.kind {
            Kind::Graph(p) => Some(p),
            _ => None,
        }
    }

    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        if x.dim() != self.dim_in() {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in(),
                got: x.dim(),
            });
        }
        let y = match &self.pre {
            Some(q) => q.mul_vec(x)?,
            None => x.clone(),
        };
        let z = self.eval_base(&y);
        match &self.post {
            Some(r) => r.mul_vec(&z),
            None => Ok(z),
        }
    }

    fn eval_base(&self, x: &Vector) -> Vector {
        match &self.kind {
            Kind::Exact(u) => u.mul_vec(x).expect("validated dims"),
            Kind::GraphSqrt => {
                let t = x[0];
                let lift = if t > 0.0 {
                    (2.0 * self.epsilon() * t).sqrt()
                } else {
                    0.0
                };
                Vector::raw(vec![t, lift])
            }
            Kind::PointPerturb { delta } => {
                let t = x[0];
                let lift = if t == *delta { self.epsilon() } else { 0.0 };
                Vector::raw(vec![t, lift])
            }
            Kind::Bounded(field) => field.eval(x),
            Kind::Graph(profile) => Vector::raw(vec![x[0], profile.value(x[0])]),
        }
    }

    /// Points where the family's distortion is concentrated, in domain
    /// coordinates (after undoing `pre`).
    pub fn critical_points(&self) -> Vec<Vector> {
        let base: Vec<Vector> = match &self.kind {
            Kind::PointPerturb { delta } => vec![Vector::raw(vec![*delta])],
            Kind::Graph(p) => p.knots()[1..].iter().map(|t| Vector::raw(vec![*t])).collect(),
            _ => vec![],
        };
        match &self.pre {
            Some(q) => {
                let qt = q.transpose();
                base.iter().map(|y| qt.mul_vec(y).expect("dims")).collect()
            }
            None => base,
        }
    }

    /// Closed-form ε-isometry check. Orthogonal conjugation does not change
    /// distortion, so the base family decides.
    pub fn analytic_admissibility(&self) -> Admissibility {
        match &self.kind {
            Kind::Exact(_) | Kind::GraphSqrt | Kind::PointPerturb { .. } => Admissibility::Proven,
            Kind::Bounded(field) => {
                let s = field.sup_bound();
                if 2.0 * s <= self.epsilon() {
                    Admissibility::Proven
                } else {
                    Admissibility::Violated(format!("2 sup|eta| = {} > eps", 2.0 * s))
                }
            }
            Kind::Graph(p) => match p.admissibility(self.epsilon()) {
                Ok(()) => Admissibility::Proven,
                Err(m) => Admissibility::Violated(m),
            },
        }
    }
}

fn parse_bounded(params: &[f64], m: usize, k: usize, epsilon: f64) -> Result<BoundedField> {
    let bad = |msg: String| Error::InvalidSpec(format!("bounded_perturb: {msg}"));
    let head = m * k;
    if params.len() < head + 2 {
        return Err(bad(format!(
            "need U ({head} entries), amplitude and term count, got {} params",
            params.len()
        )));
    }
    let u = isometry(&params[..head], k, m)?;
    let amplitude = params[head];
    let count = params[head + 1];
    if !(0.0..=epsilon / 2.0).contains(&amplitude) {
        return Err(bad(format!("amplitude {amplitude} outside [0, eps/2]")));
    }
    if count.fract() != 0.0 || !(0.0..=MAX_PERTURB_TERMS as f64).contains(&count) {
        return Err(bad(format!("term count must be an integer in 0..={MAX_PERTURB_TERMS}")));
    }
    let count = count as usize;
    let block = 1 + m + k;
    let rest = &params[head + 2..];
    if rest.len() != count * block {
        return Err(bad(format!(
            "expected {count} term blocks of {block} values, got {} values",
            rest.len()
        )));
    }
    let terms: Vec<PerturbTerm> = rest
        .chunks_exact(block)
        .map(|c| PerturbTerm {
            weight: c[0],
            freq: Vector::raw(c[1..1 + m].to_vec()),
            dir: Vector::raw(c[1 + m..].to_vec()),
        })
        .collect();
    let field = BoundedField { u, amplitude, terms };
    let total: f64 = field
        .terms
        .iter()
        .map(|t| t.weight.abs() * t.dir.norm())
        .sum();
    if total > 1.0 {
        return Err(bad(format!("sum |weight| * |dir| = {total} exceeds 1")));
    }
    Ok(field)
}

const PERTURB_TERMS: usize = 3;

/// `f(x) = Ux + eta(x)` with a smooth field `eta(0) = 0`, `sup |eta| <= eta_scale / 2`,
/// hence an `eta_scale`-isometry. The returned map's ε is `eta_scale`, raised to
/// [`MIN_EPSILON`] when smaller.
pub fn make_bounded_perturb(u: &Matrix, eta_scale: f64, seed: u64) -> Result<MapSpec> {
    if !(eta_scale > 0.0 && eta_scale <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "eta_scale must lie in (0, 1], got {eta_scale}"
        )));
    }
    let (k, m) = (u.rows(), u.cols());
    isometry(u.data(), k, m)?;
    let mut rng = substream(seed, "bounded_perturb");
    let mut raw_weights = Vec::with_capacity(PERTURB_TERMS);
    let mut blocks = Vec::with_capacity(PERTURB_TERMS);
    for _ in 0..PERTURB_TERMS {
        let w: f64 = rand::Rng::random_range(&mut rng, 0.2..1.0);
        let freq_scale: f64 = rand::Rng::random_range(&mut rng, 0.5..2.0);
        let freq = rng::unit_vector(&mut rng, m).scale(freq_scale);
        let dir = rng::unit_vector(&mut rng, k);
        raw_weights.push(w);
        blocks.push((freq, dir));
    }
    let total: f64 = raw_weights.iter().sum();
    let mut params = u.data().to_vec();
    params.push(eta_scale / 2.0);
    params.push(PERTURB_TERMS as f64);
    for (w, (freq, dir)) in raw_weights.iter().zip(&blocks) {
        // shrink by 1e-12 so rounding in the unit-norm dirs cannot push the sum past 1
        params.push(w / total * (1.0 - 1e-12));
        params.extend_from_slice(freq.as_slice());
        params.extend_from_slice(dir.as_slice());
    }
    let spec = MapSpec {
        family: Family::BoundedPerturb,
        epsilon: eta_scale.max(MIN_EPSILON),
        dim_in: m,
        dim_out: k,
        params,
        pre: None,
        post: None,
    };
    Map::new(spec.clone())?;
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub samples: usize,
    pub radius: f64,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidConfig("sample count must be >= 1".into()));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidConfig(format!("radius must be > 0, got {}", self.radius)));
        }
        Ok(())
    }
}

/// Deterministic probe points: the origin, `±R e_i`, and the family's
/// critical points.
pub fn grid_points(map: &Map, radius: f64) -> Vec<Vector> {
    let m = map.dim_in();
    let mut pts = vec![Vector::zeros(m)];
    for i in 0..m {
        pts.push(Vector::basis(i, m).scale(radius));
        pts.push(Vector::basis(i, m).scale(-radius));
    }
    pts.extend(map.critical_points());
    pts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub samples_checked: usize,
    pub max_violation: f64,
    pub worst_pair: (Vector, Vector),
    pub certified: bool,
    pub low_coverage: bool,
}

pub fn distortion(map: &Map, x: &Vector, y: &Vector) -> Result<f64> {
    let fx = map.eval(x)?;
    let fy = map.eval(y)?;
    Ok((fx.distance(&fy)? - x.distance(y)?).abs())
}

/// Sampled check of `| |f(x) - f(y)| - |x - y| | <= eps`. A `certified`
/// report means no violation was found, not a proof.
pub fn certify(map: &Map, sampler: &SamplerConfig) -> Result<CertReport> {
    sampler.validate()?;
    let m = map.dim_in();
    let grid = grid_points(map, sampler.radius);
    let mut pairs: Vec<(Vector, Vector)> = Vec::new();
    for i in 0..grid.len() {
        for j in i + 1..grid.len() {
            pairs.push((grid[i].clone(), grid[j].clone()));
        }
    }
    let mut rng = substream(sampler.seed, "certify");
    for _ in 0..sampler.samples {
        let x = rng::point_in_ball(&mut rng, m, sampler.radius);
        let y = rng::point_in_ball(&mut rng, m, sampler.radius);
        pairs.push((x, y));
    }
    let violations: Vec<f64> = pairs
        .par_iter()
        .map(|(x, y)| distortion(map, x, y))
        .collect::<Result<_>>()?;
    let (worst, max_violation) = violations
        .iter()
        .enumerate()
        .fold((0, 0.0_f64), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    Ok(CertReport {
        samples_checked: pairs.len(),
        max_violation,
        worst_pair: pairs.swap_remove(worst),
        certified: max_violation <= map.epsilon(),
        low_coverage: sampler.samples < LOW_COVERAGE_PAIRS,
    })
}
