//! Adversarial risk, the local-oscillation functional `G_A`, and α-trimmed
//! randomized smoothing.
//!
//! The adversary may move a test input anywhere inside `B(x, r)` intersected
//! with the input domain. The inner supremum is approximated from below by a
//! finite probe set that always contains the unperturbed center:
//!
//! * [`ProbeStrategy::Grid1d`]: center, the (clipped) interval endpoints,
//!   then dyadic midpoints level by level;
//! * [`ProbeStrategy::BallSample`]: center, 32 boundary points at radius `r`
//!   (coordinate axes first), then seeded uniform samples from the ball.
//!
//! Both sequences are prefixes of one fixed stream, so raising
//! `probe_count` only ever adds probes and the estimated supremum can only
//! grow.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::predictor::Predictor;
use crate::seed;
use crate::spectral::cell_centers;
use crate::stats::mean_and_se;

/// Number of boundary probes used by [`ProbeStrategy::BallSample`].
pub const BOUNDARY_PROBES: usize = 32;
pub const DEFAULT_GRID_PROBES: usize = 64;
/// Center + 32 boundary + 64 interior.
pub const DEFAULT_BALL_PROBES: usize = 1 + BOUNDARY_PROBES + 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeStrategy {
    Grid1d,
    BallSample,
}

/// Input domain the adversary is confined to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Domain {
    #[default]
    UnitCube,
    /// Unit sphere in the ambient space; balls are Euclidean balls
    /// intersected with the sphere.
    Sphere,
}

/// How the supremum over `B(x, r)` is probed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallScheme {
    pub radius: f64,
    pub probe_count: usize,
    pub strategy: ProbeStrategy,
    pub seed: u64,
    pub domain: Domain,
}

impl BallScheme {
    pub fn new(radius: f64, probe_count: usize, strategy: ProbeStrategy, seed: u64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(domain(format!("radius must be finite and >= 0, got {radius}")));
        }
        if probe_count < 1 {
            return Err(domain("probe_count must be >= 1"));
        }
        Ok(Self {
            radius,
            probe_count,
            strategy,
            seed,
            domain: Domain::UnitCube,
        })
    }

    /// Defaults: a 64-point grid in one dimension, 97 ball probes otherwise.
    pub fn for_dimension(d: usize, radius: f64, seed: u64) -> Result<Self> {
        if d == 1 {
            Self::new(radius, DEFAULT_GRID_PROBES, ProbeStrategy::Grid1d, seed)
        } else {
            Self::new(radius, DEFAULT_BALL_PROBES, ProbeStrategy::BallSample, seed)
        }
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_probe_count(mut self, probe_count: usize) -> Self {
        self.probe_count = probe_count.max(1);
        self
    }

    /// Probe points around `x`; `stream` separates the random streams of
    /// different test points.
    pub fn probes(&self, x: &[f64], stream: u64) -> Result<Vec<Vec<f64>>> {
        if self.radius == 0.0 {
            return Ok(vec![x.to_vec()]);
        }
        match (self.strategy, self.domain) {
            (ProbeStrategy::Grid1d, Domain::UnitCube) => {
                if x.len() != 1 {
                    return Err(Error::Shape(format!(
                        "grid probes need one-dimensional inputs, got dimension {}",
                        x.len()
                    )));
                }
                Ok(grid_probes(x[0], self.radius, self.probe_count)
                    .into_iter()
                    .map(|v| vec![v])
                    .collect())
            }
            (ProbeStrategy::Grid1d, Domain::Sphere) => {
                Err(domain("grid probes are only defined on the unit interval"))
            }
            (ProbeStrategy::BallSample, Domain::UnitCube) => {
                Ok(cube_ball_probes(x, self.radius, self.probe_count, seed::mix(self.seed, stream)))
            }
            (ProbeStrategy::BallSample, Domain::Sphere) => {
                if x.len() < 2 {
                    return Err(domain("sphere probes need ambient dimension >= 2"));
                }
                Ok(sphere_probes(x, self.radius, self.probe_count, seed::mix(self.seed, stream)))
            }
        }
    }
}

fn grid_probes(c: f64, r: f64, count: usize) -> Vec<f64> {
    let lo = (c - r).max(0.0);
    let hi = (c + r).min(1.0);
    let mut out = vec![c];
    if hi <= lo {
        return out;
    }
    out.push(lo);
    out.push(hi);
    let mut level = 1u32;
    while out.len() < count && level < 40 {
        let m = 1u64 << level;
        for j in (1..m).step_by(2) {
            out.push(lo + (hi - lo) * j as f64 / m as f64);
        }
        level += 1;
    }
    out.truncate(count);
    out
}

fn random_unit(rng: &mut seed::Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

fn cube_ball_probes(x: &[f64], r: f64, count: usize, stream_seed: u64) -> Vec<Vec<f64>> {
    let d = x.len();
    let mut rng = seed::rng(stream_seed);
    let clamp = |p: Vec<f64>| -> Vec<f64> { p.into_iter().map(|v| v.clamp(0.0, 1.0)).collect() };
    let mut out = vec![x.to_vec()];
    let mut boundary = 0;
    // axis directions first
    'axes: for axis in 0..d {
        for sign in [1.0, -1.0] {
            if boundary == BOUNDARY_PROBES || out.len() == count {
                break 'axes;
            }
            let mut p = x.to_vec();
            p[axis] += sign * r;
            out.push(clamp(p));
            boundary += 1;
        }
    }
    while boundary < BOUNDARY_PROBES && out.len() < count {
        let u = random_unit(&mut rng, d);
        out.push(clamp(x.iter().zip(&u).map(|(a, b)| a + r * b).collect()));
        boundary += 1;
    }
    while out.len() < count {
        let u = random_unit(&mut rng, d);
        let rho = r * rng.gen::<f64>().powf(1.0 / d as f64);
        out.push(clamp(x.iter().zip(&u).map(|(a, b)| a + rho * b).collect()));
    }
    out
}

/// Point on the sphere at chord distance `rho` from `x` in tangent direction.
fn sphere_step(x: &[f64], rho: f64, rng: &mut seed::Rng) -> Vec<f64> {
    let d = x.len();
    let tangent = loop {
        let g = random_unit(rng, d);
        let dot: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
        let t: Vec<f64> = g.iter().zip(x).map(|(a, b)| a - dot * b).collect();
        let norm = t.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-9 {
            break t.into_iter().map(|a| a / norm).collect::<Vec<_>>();
        }
    };
    let theta = 2.0 * (rho / 2.0).min(1.0).asin();
    x.iter()
        .zip(&tangent)
        .map(|(a, u)| theta.cos() * a + theta.sin() * u)
        .collect()
}

fn sphere_probes(x: &[f64], r: f64, count: usize, stream_seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(stream_seed);
    let cap_dim = (x.len() - 1) as f64;
    let mut out = vec![x.to_vec()];
    while out.len() < count.min(1 + BOUNDARY_PROBES) {
        out.push(sphere_step(x, r, &mut rng));
    }
    while out.len() < count {
        let rho = r * rng.gen::<f64>().powf(1.0 / cap_dim);
        out.push(sphere_step(x, rho, &mut rng));
    }
    out
}

/// Mean adversarial loss with its Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub test_points: usize,
    pub seed: u64,
}

/// Probe points for a batch of test centers, flattened so that one batched
/// evaluation of a predictor covers every probe.
#[derive(Debug, Clone)]
pub struct ProbeSet {
    points: Array2<f64>,
    offsets: Vec<usize>,
    references: Vec<f64>,
    seed: u64,
}

impl ProbeSet {
    /// `anchors`, when given, are extra candidate perturbations (typically the
    /// training inputs); those inside a ball are added to its probes.
    pub fn build(
        centers: ArrayView2<f64>,
        references: &[f64],
        scheme: &BallScheme,
        anchors: Option<ArrayView2<f64>>,
    ) -> Result<Self> {
        if centers.nrows() != references.len() {
            return Err(Error::Shape(format!(
                "{} centers but {} reference values",
                centers.nrows(),
                references.len()
            )));
        }
        let d = centers.ncols();
        if let Some(a) = anchors {
            if a.ncols() != d {
                return Err(Error::Shape("anchor dimension differs from centers".into()));
            }
        }
        let r2 = scheme.radius * scheme.radius;
        let per_center: Vec<Vec<Vec<f64>>> = centers
            .axis_iter(Axis(0))
            .into_par_iter()
            .enumerate()
            .map(|(i, c)| {
                let c = c.to_vec();
                let mut probes = scheme.probes(&c, i as u64)?;
                if let Some(a) = anchors {
                    for row in a.axis_iter(Axis(0)) {
                        let dist2: f64 = row.iter().zip(&c).map(|(p, q)| (p - q) * (p - q)).sum();
                        if dist2 <= r2 {
                            probes.push(row.to_vec());
                        }
                    }
                }
                Ok(probes)
            })
            .collect::<Result<_>>()?;

        let mut offsets = Vec::with_capacity(per_center.len() + 1);
        offsets.push(0);
        let total: usize = per_center.iter().map(Vec::len).sum();
        let mut points = Array2::<f64>::zeros((total, d));
        let mut k = 0;
        for probes in &per_center {
            for p in probes {
                points.row_mut(k).assign(&ArrayView1::from(p.as_slice()));
                k += 1;
            }
            offsets.push(k);
        }
        Ok(Self {
            points,
            offsets,
            references: references.to_vec(),
            seed: scheme.seed,
        })
    }

    /// Number of test centers.
    pub fn len(&self) -> usize {
        self.references.len()
    }

    pub fn is_empty(&self) -> bool {
        self.references.is_empty()
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn references(&self) -> &[f64] {
        &self.references
    }

    fn groups<'a>(&'a self, values: &'a [f64]) -> impl Iterator<Item = &'a [f64]> + 'a {
        self.offsets.windows(2).map(move |w| &values[w[0]..w[1]])
    }

    /// `max_probe |f(x') - yref|` per center.
    pub fn sup_gaps(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.points.nrows(), "one value per probe expected");
        self.groups(values)
            .zip(&self.references)
            .map(|(g, y)| g.iter().map(|v| (v - y).abs()).fold(0.0, f64::max))
            .collect()
    }

    /// `max_probe f - min_probe f` per center.
    pub fn oscillations(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.points.nrows(), "one value per probe expected");
        self.groups(values)
            .map(|g| {
                let (lo, hi) = g
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                hi - lo
            })
            .collect()
    }

    /// `max_probe |f(x') - f(x)|` per center; the center is the first probe.
    pub fn local_variations(&self, values: &[f64]) -> Vec<f64> {
        self.groups(values)
            .map(|g| g.iter().map(|v| (v - g[0]).abs()).fold(0.0, f64::max))
            .collect()
    }

    pub fn risk(&self, values: &[f64]) -> RiskEstimate {
        let losses: Vec<f64> = self.sup_gaps(values).into_iter().map(|g| g * g).collect();
        let (mean, std_error) = mean_and_se(&losses);
        RiskEstimate {
            mean,
            std_error,
            test_points: losses.len(),
            seed: self.seed,
        }
    }

    pub fn evaluate(&self, f: &dyn Predictor) -> Vec<f64> {
        f.predict_many(self.points.view()).to_vec()
    }
}

/// Lower approximation of `sup_{x' ∈ B(x,r)} |f(x') - yref|`.
pub fn local_sup_gap(f: &dyn Predictor, x: &[f64], yref: f64, scheme: &BallScheme) -> Result<f64> {
    let probes = scheme.probes(x, 0)?;
    Ok(probes
        .iter()
        .map(|p| (f.predict(p) - yref).abs())
        .fold(0.0, f64::max))
}

/// Ground truth evaluated at the test inputs.
pub type TruthFn<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// Where test points and their reference values come from.
pub enum TestSet<'a> {
    /// Fresh uniform draws on `[0,1]^dim`.
    Uniform { dim: usize, seed: u64, truth: TruthFn<'a> },
    /// Fixed inputs with a known regression function.
    Points { x: ArrayView2<'a, f64>, truth: TruthFn<'a> },
    /// Held-out inputs with observed responses (unknown regression function;
    /// the noise variance inflates the risk level).
    HeldOut { x: ArrayView2<'a, f64>, y: ArrayView1<'a, f64> },
}

impl TestSet<'_> {
    pub fn draw(&self, m: usize) -> Result<(Array2<f64>, Vec<f64>)> {
        match self {
            TestSet::Uniform { dim, seed, truth } => {
                let mut rng = seed::rng(*seed);
                let x = Array2::from_shape_simple_fn((m, *dim), || rng.gen::<f64>());
                let y = x.rows().into_iter().map(|r| truth(&r.to_vec())).collect();
                Ok((x, y))
            }
            TestSet::Points { x, truth } => {
                if x.nrows() < m {
                    return Err(Error::InsufficientData {
                        needed: m,
                        available: x.nrows(),
                    });
                }
                let x = x.slice(ndarray::s![..m, ..]).to_owned();
                let y = x.rows().into_iter().map(|r| truth(&r.to_vec())).collect();
                Ok((x, y))
            }
            TestSet::HeldOut { x, y } => {
                if x.nrows() < m || y.len() < m {
                    return Err(Error::InsufficientData {
                        needed: m,
                        available: x.nrows().min(y.len()),
                    });
                }
                Ok((
                    x.slice(ndarray::s![..m, ..]).to_owned(),
                    y.iter().take(m).copied().collect(),
                ))
            }
        }
    }
}

/// Monte-Carlo estimate of `E sup_{x' ∈ B(X,r)} |f̂(x') - f*(X)|²` over `m`
/// test points.
pub fn adversarial_risk(
    fhat: &dyn Predictor,
    test: &TestSet,
    scheme: &BallScheme,
    m: usize,
) -> Result<RiskEstimate> {
    adversarial_risk_anchored(fhat, test, scheme, m, None)
}

/// [`adversarial_risk`] with extra candidate perturbations (see
/// [`ProbeSet::build`]).
pub fn adversarial_risk_anchored(
    fhat: &dyn Predictor,
    test: &TestSet,
    scheme: &BallScheme,
    m: usize,
    anchors: Option<ArrayView2<f64>>,
) -> Result<RiskEstimate> {
    if m < 2 {
        return Err(domain("adversarial risk needs at least two test points"));
    }
    let (x, y) = test.draw(m)?;
    let probes = ProbeSet::build(x.view(), &y, scheme, anchors)?;
    Ok(probes.risk(&probes.evaluate(fhat)))
}

/// `G_A(f) = ½ (∫ [sup_B f - inf_B f]² dx)^{1/2}` by midpoint quadrature on a
/// `grid_res^d` cell-centered grid, with the default probes per cell.
pub fn ga_functional(f: &dyn Predictor, r: f64, grid_res: usize) -> Result<f64> {
    let scheme = BallScheme::for_dimension(f.dim(), r, 0)?;
    ga_functional_with(f, &scheme, grid_res)
}

pub fn ga_functional_with(f: &dyn Predictor, scheme: &BallScheme, grid_res: usize) -> Result<f64> {
    ga_functional_anchored(f, scheme, grid_res, None)
}

/// [`ga_functional_with`] with extra candidate perturbations (see
/// [`ProbeSet::build`]).
pub fn ga_functional_anchored(
    f: &dyn Predictor,
    scheme: &BallScheme,
    grid_res: usize,
    anchors: Option<ArrayView2<f64>>,
) -> Result<f64> {
    if grid_res < 2 {
        return Err(domain("grid_res must be >= 2"));
    }
    let centers = cell_centers(f.dim(), grid_res);
    let zeros = vec![0.0; centers.nrows()];
    let probes = ProbeSet::build(centers.view(), &zeros, scheme, anchors)?;
    let osc = probes.oscillations(&probes.evaluate(f));
    let mean_sq = osc.iter().map(|o| o * o).sum::<f64>() / osc.len() as f64;
    Ok(0.5 * mean_sq.sqrt())
}

/// α-trimmed randomized smoothing of a base predictor.
#[derive(Debug, Clone)]
pub struct SmoothedPredictor<P> {
    pub base: P,
    pub noise_std: f64,
    pub trim: f64,
    pub samples: usize,
    pub seed: u64,
    pub domain: Domain,
}

impl<P: Predictor> SmoothedPredictor<P> {
    pub fn new(base: P, noise_std: f64, trim: f64, samples: usize, seed: u64) -> Result<Self> {
        if !(noise_std > 0.0) {
            return Err(domain("smoothing noise_std must be > 0"));
        }
        if !(0.0..0.5).contains(&trim) {
            return Err(domain(format!("trim rate must lie in [0, 0.5), got {trim}")));
        }
        if samples < 1 || samples < 2 * trimmed_per_tail(trim, samples) + 1 {
            return Err(domain("trimming would discard every sample"));
        }
        Ok(Self {
            base,
            noise_std,
            trim,
            samples,
            seed,
            domain: Domain::UnitCube,
        })
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    fn perturbed(&self, x: &[f64]) -> Array2<f64> {
        let d = x.len();
        let mut rng = seed::rng(seed::mix_point(self.seed, x));
        let mut pts = Array2::<f64>::zeros((self.samples, d));
        for mut row in pts.axis_iter_mut(Axis(0)) {
            for (j, v) in row.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *v = x[j] + self.noise_std * z;
            }
            match self.domain {
                Domain::UnitCube => row.mapv_inplace(|v| v.clamp(0.0, 1.0)),
                Domain::Sphere => {
                    let norm = row.dot(&row).sqrt();
                    if norm > 0.0 {
                        row.mapv_inplace(|v| v / norm);
                    }
                }
            }
        }
        pts
    }

    /// Trimmed mean of the base predictor over Gaussian perturbations of `x`;
    /// deterministic in `(seed, x)`.
    pub fn smooth_predict(&self, x: &[f64]) -> f64 {
        let values = self.base.predict_many(self.perturbed(x).view());
        trimmed_mean(values.to_vec(), self.trim)
    }
}

fn trimmed_per_tail(trim: f64, samples: usize) -> usize {
    (trim * samples as f64).floor() as usize
}

/// Sort, drop `⌊α S⌋` values from each tail, and average the rest.
pub fn trimmed_mean(mut values: Vec<f64>, trim: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = trimmed_per_tail(trim, values.len());
    let kept = &values[k..values.len() - k];
    kept.iter().sum::<f64>() / kept.len() as f64
}

impl<P: Predictor> Predictor for SmoothedPredictor<P> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn predict(&self, x: &[f64]) -> f64 {
        self.smooth_predict(x)
    }

    fn predict_many(&self, points: ArrayView2<f64>) -> Array1<f64> {
        let vals: Vec<f64> = points
            .axis_iter(Axis(0))
            .into_par_iter()
            .map(|r| self.smooth_predict(&r.to_vec()))
            .collect();
        Array1::from(vals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::FnPredictor;

    fn identity() -> FnPredictor<impl Fn(&[f64]) -> f64 + Sync> {
        FnPredictor::new(1, |x: &[f64]| x[0])
    }

    #[test]
    fn grid_probes_are_nested_and_clipped() {
        let a = grid_probes(0.05, 0.1, 16);
        let b = grid_probes(0.05, 0.1, 32);
        assert_eq!(a.len(), 16);
        assert_eq!(&b[..16], &a[..]);
        assert_eq!(a[0], 0.05);
        assert_eq!(a[1], 0.0);
        assert!((a[2] - 0.15).abs() < 1e-15);
        assert!(a.iter().all(|v| (0.0..=0.15 + 1e-15).contains(v)));
    }

    #[test]
    fn zero_radius_gap_is_pointwise_error() {
        let f = identity();
        let s = BallScheme::new(0.0, 64, ProbeStrategy::Grid1d, 0).unwrap();
        assert_eq!(local_sup_gap(&f, &[0.3], 0.1, &s).unwrap(), (0.3f64 - 0.1).abs());
    }

    #[test]
    fn constant_function_has_no_gap() {
        let f = FnPredictor::new(2, |_: &[f64]| 1.5);
        let s = BallScheme::for_dimension(2, 0.2, 3).unwrap();
        assert_eq!(local_sup_gap(&f, &[0.5, 0.5], 1.5, &s).unwrap(), 0.0);
        assert_eq!(ga_functional(&f, 0.2, 8).unwrap(), 0.0);
    }

    #[test]
    fn identity_gap_on_interval() {
        let s = BallScheme::new(0.1, 257, ProbeStrategy::Grid1d, 0).unwrap();
        let g = local_sup_gap(&identity(), &[0.5], 0.0, &s).unwrap();
        assert!((g - 0.6).abs() < 1e-12);
    }

    #[test]
    fn ball_probes_stay_in_ball_and_cube() {
        let s = BallScheme::for_dimension(3, 0.3, 11).unwrap();
        let x = [0.1, 0.5, 0.95];
        let probes = s.probes(&x, 4).unwrap();
        assert_eq!(probes.len(), DEFAULT_BALL_PROBES);
        assert_eq!(probes[0], x.to_vec());
        for p in &probes {
            let d2: f64 = p.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
            assert!(d2.sqrt() <= 0.3 + 1e-12);
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let longer = s.with_probe_count(200).probes(&x, 4).unwrap();
        assert_eq!(&longer[..DEFAULT_BALL_PROBES], &probes[..]);
    }

    #[test]
    fn sphere_probes_stay_on_cap() {
        let s = BallScheme::new(0.2, 50, ProbeStrategy::BallSample, 2)
            .unwrap()
            .with_domain(Domain::Sphere);
        let x = [0.6, 0.0, 0.8];
        for p in s.probes(&x, 0).unwrap() {
            let norm: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            let d: f64 = p.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(d <= 0.2 + 1e-12);
        }
    }

    #[test]
    fn risk_of_truth_at_zero_radius_vanishes() {
        let f = identity();
        let truth = |x: &[f64]| x[0];
        let test = TestSet::Uniform { dim: 1, seed: 5, truth: &truth };
        let s = BallScheme::new(0.0, 64, ProbeStrategy::Grid1d, 0).unwrap();
        let est = adversarial_risk(&f, &test, &s, 100).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn identity_risk_matches_closed_form() {
        // ∫_0^0.9 (x + 0.1)² dx + 0.1
        let exact: f64 = (1.0 - 0.001) / 3.0 + 0.1;
        assert!((exact - 0.43300).abs() < 1e-5);
        let truth = |_: &[f64]| 0.0;
        let test = TestSet::Uniform { dim: 1, seed: 17, truth: &truth };
        let s = BallScheme::new(0.1, 64, ProbeStrategy::Grid1d, 0).unwrap();
        let est = adversarial_risk(&identity(), &test, &s, 4000).unwrap();
        assert!((est.mean - exact).abs() <= 3.0 * est.std_error);
    }

    #[test]
    fn insufficient_points() {
        let x = Array2::<f64>::zeros((3, 1));
        let truth = |_: &[f64]| 0.0;
        let test = TestSet::Points { x: x.view(), truth: &truth };
        let s = BallScheme::for_dimension(1, 0.1, 0).unwrap();
        assert!(matches!(
            adversarial_risk(&identity(), &test, &s, 10),
            Err(Error::InsufficientData { needed: 10, available: 3 })
        ));
        assert!(adversarial_risk(&identity(), &test, &s, 1).is_err());
    }

    #[test]
    fn ga_of_identity() {
        // ½ sqrt(2 ∫_0^0.1 (x + 0.1)² dx + 0.8 · 0.04)
        let oracle = 0.5 * (2.0 * (0.008 - 0.001) / 3.0 + 0.8 * 0.04f64).sqrt();
        assert!((oracle - 0.09574).abs() < 1e-5);
        let ga = ga_functional(&identity(), 0.1, 2000).unwrap();
        assert!((ga - oracle).abs() < 1e-5);
        assert_eq!(ga_functional(&identity(), 0.0, 100).unwrap(), 0.0);
    }

    #[test]
    fn smoothing_edge_cases() {
        let c = FnPredictor::new(1, |_: &[f64]| 2.5);
        let sp = SmoothedPredictor::new(c, 0.1, 0.35, 200, 1).unwrap();
        assert!((sp.smooth_predict(&[0.3]) - 2.5).abs() < 1e-12);

        let sp = SmoothedPredictor::new(identity(), 1e-9, 0.0, 50, 1).unwrap();
        assert!((sp.smooth_predict(&[0.42]) - 0.42).abs() < 1e-6);

        let sp = SmoothedPredictor::new(identity(), 0.1, 0.2, 64, 9).unwrap();
        assert_eq!(sp.smooth_predict(&[0.5]), sp.smooth_predict(&[0.5]));

        assert!(SmoothedPredictor::new(identity(), 0.1, 0.5, 10, 0).is_err());
        assert!(SmoothedPredictor::new(identity(), 0.0, 0.1, 10, 0).is_err());
    }

    #[test]
    fn heavy_trimming_keeps_middle_three() {
        let values: Vec<f64> = (0..101).map(|i| i as f64).collect();
        // 49 dropped per tail leaves 49, 50, 51
        assert_eq!(trimmed_mean(values, 0.49), 50.0);
        let skewed: Vec<f64> = (0..101).map(|i| if i < 50 { 0.0 } else { i as f64 }).collect();
        assert!((trimmed_mean(skewed, 0.49) - (0.0 + 50.0 + 51.0) / 3.0).abs() < 1e-12);
    }
}
