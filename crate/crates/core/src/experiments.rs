//! Seeded drivers for the desk-scale experiments. Each function computes one
//! cell (one seed, one sample size, ...) so callers can parallelize and
//! aggregate as they like.

use ndarray::{Array1, Array2};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::adversarial::{
    ga_functional_anchored, BallScheme, ProbeSet, ProbeStrategy, RiskEstimate, SmoothedPredictor, TestSet,
    DEFAULT_GRID_PROBES,
};
use crate::data::{gen_synthetic, Dataset};
use crate::error::{domain, Result};
use crate::flow::{optimal_stop_time, FlowPredictor, SpectralFilter};
use crate::kernels::{kernel_eval, KernelSpec};
use crate::lowerbound::{calibrate_bs, BaseFunctionSpec, BaseKind};
use crate::predictor::Predictor;
use crate::seed;
use crate::spectral::{cell_centers, sobolev_norm, GridFunction};
use crate::stats::median;
use crate::theory::{separation_eigen_stats, SeparationStats};
use crate::widenet::{empirical_ntk, init_mirrored};

/// Stream indices separating the independent draws of one experiment seed.
const TEST_STREAM: u64 = 1;
const PROBE_STREAM: u64 = 2;

/// Probe scheme used by the experiments: a 64-point grid in one dimension,
/// the default ball probes otherwise, on the data's domain.
pub fn default_scheme(data: &Dataset, r: f64, seed: u64) -> Result<BallScheme> {
    Ok(BallScheme::for_dimension(data.dim(), r, seed::mix(seed, PROBE_STREAM))?.with_domain(data.domain()))
}

/// Probes around `m` test points. With `anchored`, training inputs inside a
/// ball are probed too.
pub fn risk_probes(
    data: &Dataset,
    test: &TestSet,
    m: usize,
    scheme: &BallScheme,
    anchored: bool,
) -> Result<ProbeSet> {
    let (x, refs) = test.draw(m)?;
    ProbeSet::build(x.view(), &refs, scheme, anchored.then(|| data.x.view()))
}

/// Test source for synthetic data: fresh uniform draws scored against `f*`.
pub fn synthetic_test_set(data: &Dataset, seed: u64) -> Result<TestSet<'_>> {
    let truth = data
        .truth
        .as_ref()
        .ok_or_else(|| domain("synthetic test points need a known regression function"))?;
    Ok(TestSet::Uniform {
        dim: data.dim(),
        seed: seed::mix(seed, TEST_STREAM),
        truth: truth.as_fn(),
    })
}

/// Adversarial risk along flow time (and at the interpolant), all filters
/// sharing one kernel matrix between probes and design.
#[derive(Debug, Clone)]
pub struct RiskCurve {
    pub times: Vec<f64>,
    pub risks: Vec<RiskEstimate>,
    pub interpolant: Option<RiskEstimate>,
}

impl RiskCurve {
    pub fn min_risk(&self) -> Option<(f64, RiskEstimate)> {
        self.times
            .iter()
            .zip(&self.risks)
            .min_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
            .map(|(t, r)| (*t, *r))
    }
}

pub fn flow_risk_curve(
    flow: &FlowPredictor,
    probes: &ProbeSet,
    times: &[f64],
    with_interpolant: bool,
) -> Result<RiskCurve> {
    let cross = flow.cross(probes.points());
    let risk_for = |filter: SpectralFilter| -> Result<RiskEstimate> {
        let values = cross.dot(&flow.weights(filter)?);
        Ok(probes.risk(values.as_slice().expect("contiguous")))
    };
    let risks = times
        .par_iter()
        .map(|&t| risk_for(SpectralFilter::Flow(t)))
        .collect::<Result<Vec<_>>>()?;
    let interpolant = if with_interpolant {
        Some(risk_for(SpectralFilter::Interpolant)?)
    } else {
        None
    };
    Ok(RiskCurve {
        times: times.to_vec(),
        risks,
        interpolant,
    })
}

/// Risk-versus-time curve for 1D synthetic data with an NTK flow, on `times`
/// or the flow's default grid.
pub fn synthetic_flow_curve(
    n: usize,
    sigma: f64,
    depth: usize,
    r: f64,
    test_points: usize,
    times: Option<&[f64]>,
    seed: u64,
) -> Result<RiskCurve> {
    let data = gen_synthetic(n, 1, sigma, seed)?;
    let flow = FlowPredictor::new(KernelSpec::ntk(depth)?, data.x.view(), data.y.view())?;
    let test = synthetic_test_set(&data, seed)?;
    let probes = risk_probes(&data, &test, test_points, &default_scheme(&data, r, seed)?, true)?;
    match times {
        Some(times) => flow_risk_curve(&flow, &probes, times, true),
        None => flow_risk_curve(&flow, &probes, &flow.default_time_grid()?, true),
    }
}

/// `∫ (f − f*)²` by midpoint quadrature on `res^d` cells.
pub fn l2_risk(f: &dyn Predictor, truth: &(dyn Fn(&[f64]) -> f64 + Sync), res: usize) -> f64 {
    let grid = cell_centers(f.dim(), res);
    let pred = f.predict_many(grid.view());
    let ss: f64 = grid
        .rows()
        .into_iter()
        .zip(pred.iter())
        .map(|(x, p)| (p - truth(&x.to_vec())).powi(2))
        .sum();
    ss / grid.nrows() as f64
}

/// `L²` risk on 1D synthetic data of the flow stopped at `n^{2/(2s+1)}`.
pub fn early_stopped_l2_risk(spec: &KernelSpec, s: f64, n: usize, sigma: f64, seed: u64) -> Result<f64> {
    let data = gen_synthetic(n, 1, sigma, seed)?;
    let flow = FlowPredictor::new(*spec, data.x.view(), data.y.view())?;
    let t = optimal_stop_time(n, s, 1)?;
    let f = flow.at(SpectralFilter::Flow(t))?;
    Ok(l2_risk(&f, data.truth.as_ref().expect("synthetic").as_fn(), 4096))
}

/// Estimated `G_A(f̂_∞)²` of the interpolant at radius `n^{-1/2}` on 1D
/// synthetic data, with training inputs as extra probes.
pub fn interpolant_ga_sq(spec: &KernelSpec, n: usize, sigma: f64, grid_res: usize, seed: u64) -> Result<f64> {
    let data = gen_synthetic(n, 1, sigma, seed)?;
    let f = FlowPredictor::new(*spec, data.x.view(), data.y.view())?.at(SpectralFilter::Interpolant)?;
    let r = (n as f64).powf(-0.5);
    let scheme = BallScheme::new(r, DEFAULT_GRID_PROBES, ProbeStrategy::Grid1d, 0)?;
    let ga = ga_functional_anchored(&f, &scheme, grid_res, Some(data.x.view()))?;
    Ok(ga * ga)
}

/// Separation statistics for `designs` uniform designs of size `n` in `[0,1]^d`.
pub fn separation_sample(spec: &KernelSpec, n: usize, d: usize, designs: usize, seed: u64) -> Result<Vec<SeparationStats>> {
    (0..designs)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng(seed::mix(seed, i as u64));
            let x = Array2::from_shape_simple_fn((n, d), || rng.gen::<f64>());
            separation_eigen_stats(spec, x.view())
        })
        .collect()
}

/// `(L² risk, adversarial risk)` of the spiky-kernel interpolant on 1D
/// synthetic data; the adversary may also move onto training inputs.
pub fn spiky_contrast(n: usize, sigma: f64, r: f64, test_points: usize, seed: u64) -> Result<(f64, RiskEstimate)> {
    let data = gen_synthetic(n, 1, sigma, seed)?;
    let flow = FlowPredictor::new(KernelSpec::spiky(n, 1)?, data.x.view(), data.y.view())?;
    let f = flow.at(SpectralFilter::Interpolant)?;
    let l2 = l2_risk(&f, data.truth.as_ref().expect("synthetic").as_fn(), 4096);
    let test = synthetic_test_set(&data, seed)?;
    let probes = risk_probes(&data, &test, test_points, &default_scheme(&data, r, seed)?, true)?;
    Ok((l2, probes.risk(&probes.evaluate(&f))))
}

/// Random 1D grid function with `‖g‖_{H^s} = 1` and cosine coefficients
/// `z_k (1 + ξ_k²)^{-s/2} / (1 + k)` for `k < band`.
pub fn random_sobolev_sample(resolution: usize, s: f64, band: usize, seed: u64) -> Result<GridFunction> {
    if band == 0 || band > resolution {
        return Err(domain("band must lie in 1..=resolution"));
    }
    let mut rng = seed::rng(seed);
    let coefficients: Vec<f64> = (0..resolution)
        .map(|k| {
            if k < band {
                let xi = std::f64::consts::PI * k as f64;
                let z: f64 = rng.sample(StandardNormal);
                z * (1.0 + xi * xi).powf(-s / 2.0) / (1.0 + k as f64)
            } else {
                0.0
            }
        })
        .collect();
    let g = GridFunction::from_coefficients(1, resolution, coefficients)?;
    let norm = sobolev_norm(&g, s)?;
    Ok(g.scaled(1.0 / norm))
}

/// On-grid local-variation energies of `samples` unit-`H^s` functions,
/// averaged per radius.
pub fn modulus_energies(s: f64, radii: &[f64], resolution: usize, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let per_sample = (0..samples)
        .into_par_iter()
        .map(|i| {
            let g = random_sobolev_sample(resolution, s, resolution / 2, seed::mix(seed, i as u64))?;
            radii.iter().map(|&r| g.local_variation_energy(r)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..radii.len())
        .map(|j| per_sample.iter().map(|e| e[j]).sum::<f64>() / samples as f64)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundPoint {
    pub r: f64,
    pub amplitude: f64,
    pub ga: f64,
    /// `ga / r^{min(1,s)}`.
    pub ratio: f64,
}

/// `G_A` of the calibrated rough base function at each radius.
pub fn lowerbound_curve(s: f64, radii: &[f64], norm_budget: f64, grid_res: usize) -> Result<Vec<LowerBoundPoint>> {
    radii
        .par_iter()
        .map(|&r| {
            let cal = calibrate_bs(BaseKind::Rough, s, r, norm_budget, 4096)?;
            let f = BaseFunctionSpec::new(BaseKind::Rough, s, r, cal.amplitude)?;
            let scheme = BallScheme::new(r, DEFAULT_GRID_PROBES, ProbeStrategy::Grid1d, 0)?;
            let ga = crate::adversarial::ga_functional_with(&f, &scheme, grid_res)?;
            Ok(LowerBoundPoint {
                r,
                amplitude: cal.amplitude,
                ga,
                ratio: ga / r.powf(s.min(1.0)),
            })
        })
        .collect()
}

/// Median `|K_0(x,x') − K^NT(x,x')|` over `pairs` uniform 1D input pairs,
/// each pair scored on its own mirrored initialization of the given width.
pub fn ntk_init_gap(width: usize, depth: usize, pairs: usize, seed: u64) -> Result<f64> {
    let spec = KernelSpec::ntk(depth)?;
    let mut rng = seed::rng(seed);
    let inputs: Vec<(f64, f64)> = (0..pairs).map(|_| (rng.gen(), rng.gen())).collect();
    let gaps = inputs
        .par_iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let net = init_mirrored(1, &vec![width; depth], seed::mix(seed::mix(seed, width as u64), i as u64))?;
            Ok((empirical_ntk(&net, &[a], &[b]) - kernel_eval(&spec, &[a], &[b])?).abs())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(median(&gaps))
}

/// `(plain, smoothed)` adversarial risks of the NTK interpolant on 1D
/// synthetic data.
#[allow(clippy::too_many_arguments)]
pub fn smoothing_contrast(
    n: usize,
    sigma: f64,
    r: f64,
    trim: f64,
    noise_std: f64,
    samples: usize,
    test_points: usize,
    seed: u64,
) -> Result<(RiskEstimate, RiskEstimate)> {
    let data = gen_synthetic(n, 1, sigma, seed)?;
    let f = FlowPredictor::new(KernelSpec::ntk(2)?, data.x.view(), data.y.view())?.at(SpectralFilter::Interpolant)?;
    let test = synthetic_test_set(&data, seed)?;
    let probes = risk_probes(&data, &test, test_points, &default_scheme(&data, r, seed)?, true)?;
    let plain = probes.risk(&probes.evaluate(&f));
    let smoothed = SmoothedPredictor::new(&f, noise_std, trim, samples, seed)?;
    let smooth = probes.risk(&probes.evaluate(&smoothed));
    Ok((plain, smooth))
}

/// Maximum absolute training residual of the exact interpolant.
pub fn interpolation_residual(data: &Dataset, spec: &KernelSpec) -> Result<f64> {
    let f = FlowPredictor::new(*spec, data.x.view(), data.y.view())?.at(SpectralFilter::Interpolant)?;
    let fitted: Array1<f64> = f.predict_many(data.x.view());
    Ok(fitted.iter().zip(data.y.iter()).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

