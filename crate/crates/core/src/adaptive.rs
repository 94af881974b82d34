//! Projected-and-truncated kernel ridge regression and the Lepski-adaptive
//! estimator.
//!
//! Ridge regression is parametrized by `v = 1/λ`: the fitted coefficients are
//! `(K + (n/v) I)^{-1} Y`. All proportionality constants in the `λ ≍ ...`
//! rules are 1.

use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::adversarial::Domain;
use crate::data::Dataset;
use crate::error::{domain, Error, Result};
use crate::flow::{FlowPredictor, KernelPredictor, SpectralFilter};
use crate::kernels::{gram, KernelSpec};
use crate::predictor::Predictor;
use crate::seed;
use crate::spectral::{cell_centers, frequency_truncate, project_sobolev_ball, GridFunction};

/// Grid resolution per axis used before spectral surgery.
pub fn default_resolution(d: usize) -> usize {
    match d {
        1 => 1024,
        2 | 3 => 64,
        _ => 16,
    }
}

fn ceil_snapped(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r
    } else {
        x.ceil()
    }
}

/// Geometric grid `v_i = 2^{i-1} n^{2 s_max/(2 s_max + d)}`, `i = 1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct LepskiGrid {
    pub n: usize,
    pub d: usize,
    pub s_min: f64,
    pub s_max: f64,
    pub values: Vec<f64>,
}

impl LepskiGrid {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Right-hand side of the balancing condition at grid index `j`.
    pub fn threshold(&self, j: usize, scale: f64) -> f64 {
        let n = self.n as f64;
        let ln = n.ln();
        scale * ln * ln * self.values[j].powf(self.d as f64 / (4.0 * self.s_max)) / n.sqrt()
    }
}

pub fn lepski_grid(n: usize, d: usize, s_min: f64, s_max: f64) -> Result<LepskiGrid> {
    if n == 0 || d == 0 {
        return Err(domain("Lepski grid needs n >= 1 and d >= 1"));
    }
    if !(s_max > d as f64 / 2.0) {
        return Err(domain(format!("s_max = {s_max} must exceed d/2 = {}", d as f64 / 2.0)));
    }
    if !(s_min > 0.0 && s_min <= s_max) {
        return Err(domain(format!("need 0 < s_min <= s_max, got s_min = {s_min}")));
    }
    let df = d as f64;
    let nf = n as f64;
    let lo = 2.0 * s_max / (2.0 * s_max + df);
    let hi = 2.0 * s_max / (2.0 * s_min + df);
    let k = ceil_snapped((hi - lo) * nf.log2()).max(0.0) as usize + 1;
    let v1 = nf.powf(lo);
    Ok(LepskiGrid {
        n,
        d,
        s_min,
        s_max,
        values: (0..k).map(|i| v1 * 2f64.powi(i as i32)).collect(),
    })
}

/// Kernel whose RKHS is norm-equivalent to `H^s` on `[0,1]^d`, with the order
/// actually realized: exponential for `s = (d+1)/2`, otherwise Matérn with
/// the smallest half-integer `ν ≥ s − d/2` (unit lengthscale).
pub fn sobolev_kernel(s: f64, d: usize) -> Result<(KernelSpec, f64)> {
    let half_d = d as f64 / 2.0;
    if !(s > half_d) {
        return Err(domain(format!("an RKHS of order s = {s} needs s > d/2 = {half_d}")));
    }
    if (s - (half_d + 0.5)).abs() < 1e-12 {
        return Ok((KernelSpec::Exponential, s));
    }
    let nu = ceil_snapped(s - half_d - 0.5) + 0.5;
    Ok((KernelSpec::matern(nu, 1.0)?, nu + half_d))
}

/// Ridge fits for every `v` in a Lepski grid over one eigendecomposition.
#[derive(Debug, Clone)]
pub struct KrrFamily {
    pub flow: FlowPredictor,
    pub grid: LepskiGrid,
    pub members: Vec<KernelPredictor>,
    pub domain: Domain,
}

pub fn fit_krr_family(data: &Dataset, grid: &LepskiGrid, kernel: &KernelSpec) -> Result<KrrFamily> {
    if grid.is_empty() {
        return Err(domain("empty Lepski grid"));
    }
    let flow = FlowPredictor::new(kernel.clone(), data.x.view(), data.y.view())?;
    let members = grid
        .values
        .iter()
        .map(|&v| flow.at(SpectralFilter::Ridge(v)))
        .collect::<Result<_>>()?;
    Ok(KrrFamily {
        flow,
        grid: grid.clone(),
        members,
        domain: data.domain(),
    })
}

/// How `L²` distances between family members are integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quadrature {
    /// Cell-centered grid with `resolution^d` nodes (cube data only).
    Grid { resolution: usize },
    /// Uniform draws on the data domain.
    MonteCarlo { points: usize, seed: u64 },
}

impl Quadrature {
    pub fn default_for(d: usize) -> Self {
        if d == 1 {
            Quadrature::Grid { resolution: 1024 }
        } else {
            Quadrature::MonteCarlo { points: 4096, seed: 0 }
        }
    }

    fn nodes(&self, d: usize, dom: Domain) -> Result<Array2<f64>> {
        match (*self, dom) {
            (Quadrature::Grid { resolution }, Domain::UnitCube) => Ok(cell_centers(d, resolution)),
            (Quadrature::Grid { .. }, Domain::Sphere) => {
                Err(domain("grid quadrature is defined on the cube; use Monte-Carlo on the sphere"))
            }
            (Quadrature::MonteCarlo { points, seed }, dom) => {
                let mut rng = seed::rng(seed);
                let mut x = Array2::<f64>::zeros((points, d));
                for mut row in x.axis_iter_mut(Axis(0)) {
                    match dom {
                        Domain::UnitCube => row.mapv_inplace(|_| rng.gen::<f64>()),
                        Domain::Sphere => {
                            row.mapv_inplace(|_| rng.sample(StandardNormal));
                            let norm = row.dot(&row).sqrt();
                            row /= norm;
                        }
                    }
                }
                Ok(x)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LepskiSelection {
    pub index: usize,
    pub v: f64,
    /// Only the last grid value qualified, and only vacuously.
    pub fallback: bool,
    /// Pairwise `L²` distances between family members.
    pub distances: Array2<f64>,
}

/// Smallest `v_i` with `‖f̂_{v_i} − f̂_{v_j}‖ ≤ scale · log²(n) v_j^{d/(4 s_max)} / √n`
/// for every `j > i`; the larger `v_j` sets the scale of each comparison.
pub fn lepski_select(family: &KrrFamily, quadrature: Quadrature, threshold_scale: f64) -> Result<LepskiSelection> {
    if !(threshold_scale > 0.0) {
        return Err(domain("threshold scale must be > 0"));
    }
    let k = family.members.len();
    let nodes = quadrature.nodes(family.grid.d, family.domain)?;
    let values: Vec<Array1<f64>> = family
        .members
        .par_iter()
        .map(|m| m.predict_many(nodes.view()))
        .collect();
    let mut distances = Array2::<f64>::zeros((k, k));
    for i in 0..k {
        for j in (i + 1)..k {
            let diff = &values[i] - &values[j];
            let d = (diff.dot(&diff) / nodes.nrows() as f64).sqrt();
            distances[[i, j]] = d;
            distances[[j, i]] = d;
        }
    }
    let index = (0..k)
        .find(|&i| ((i + 1)..k).all(|j| distances[[i, j]] <= family.grid.threshold(j, threshold_scale)))
        .unwrap_or(k - 1);
    Ok(LepskiSelection {
        index,
        v: family.grid.values[index],
        fallback: k > 1 && index == k - 1,
        distances,
    })
}

#[derive(Debug, Clone)]
pub struct AdaptiveResult {
    pub grid: LepskiGrid,
    pub selection: LepskiSelection,
    pub pre_truncation: KernelPredictor,
    pub truncated: GridFunction,
    /// False when the grid was too coarse to resolve the truncation radius.
    pub resolved: bool,
    /// `local_variation_energy(truncated, r) + ‖truncated‖_{L²}`.
    pub gate_statistic: f64,
    pub gated: bool,
    /// Either `truncated` or the zero function.
    pub output: GridFunction,
}

/// Lepski-selected ridge fit, sampled on the grid, frequency-truncated at
/// radius `r` and replaced by 0 unless the gate statistic is `≤ ln n`.
pub fn adaptive_estimate(
    data: &Dataset,
    r: f64,
    s_min: f64,
    s_max: f64,
    grid_res: usize,
) -> Result<AdaptiveResult> {
    adaptive_estimate_with(data, r, s_min, s_max, grid_res, Quadrature::default_for(data.dim()), 1.0)
}

pub fn adaptive_estimate_with(
    data: &Dataset,
    r: f64,
    s_min: f64,
    s_max: f64,
    grid_res: usize,
    quadrature: Quadrature,
    threshold_scale: f64,
) -> Result<AdaptiveResult> {
    if data.n() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            available: data.n(),
        });
    }
    if data.on_sphere {
        return Err(domain("spectral post-processing needs inputs in the unit cube"));
    }
    if !(r >= 0.0) {
        return Err(domain("radius must be >= 0"));
    }
    let grid = lepski_grid(data.n(), data.dim(), s_min, s_max)?;
    let (kernel, _) = sobolev_kernel(s_max, data.dim())?;
    let family = fit_krr_family(data, &grid, &kernel)?;
    let selection = lepski_select(&family, quadrature, threshold_scale)?;
    let pre_truncation = family.members[selection.index].clone();
    let sampled = GridFunction::sample(&pre_truncation, grid_res)?;
    let (truncated, resolved) = if r > 0.0 {
        let t = frequency_truncate(&sampled, r)?;
        (t.function, t.resolved)
    } else {
        (sampled, true)
    };
    let gate_statistic = truncated.local_variation_energy(r)? + truncated.l2_norm();
    let gated = gate_statistic > (data.n() as f64).ln();
    let output = if gated {
        GridFunction::zeros(data.dim(), grid_res)?
    } else {
        truncated.clone()
    };
    Ok(AdaptiveResult {
        grid,
        selection,
        pre_truncation,
        truncated,
        resolved,
        gate_statistic,
        gated,
        output,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtCase {
    /// `s > d/2`: ridge in `H^s`, then projection.
    Smooth,
    /// `s ≤ d/2`: ridge in `H^d`, projection, then truncation.
    Rough,
}

#[derive(Debug, Clone)]
pub struct PtKrrResult {
    pub case: PtCase,
    pub kernel: KernelSpec,
    /// Sobolev order of the kernel's RKHS.
    pub kernel_order: f64,
    pub v: f64,
    pub fit: KernelPredictor,
    pub output: GridFunction,
    pub resolved: bool,
}

/// PT-KRR onto the ball `{‖f‖_{H^s} ≤ L}`.
pub fn pt_krr_estimate(data: &Dataset, s: f64, radius: f64, r: f64, grid_res: usize) -> Result<PtKrrResult> {
    if !(s > 0.0) || !(radius > 0.0) {
        return Err(domain("PT-KRR needs s > 0 and L > 0"));
    }
    if data.on_sphere {
        return Err(domain("spectral post-processing needs inputs in the unit cube"));
    }
    let d = data.dim() as f64;
    let n = data.n() as f64;
    let case = if s > d / 2.0 { PtCase::Smooth } else { PtCase::Rough };
    let (kernel, kernel_order, v) = match case {
        PtCase::Smooth => {
            let (k, order) = sobolev_kernel(s, data.dim())?;
            (k, order, n.powf(2.0 * s / (2.0 * s + d)))
        }
        PtCase::Rough => {
            let (k, order) = sobolev_kernel(d, data.dim())?;
            (k, order, n.powf(2.0 * d / (2.0 * s + d)))
        }
    };
    let g = Arc::new(gram(&kernel, data.x.view())?);
    let flow = FlowPredictor::from_gram(kernel.clone(), g, data.y.view())?;
    let fit = flow.at(SpectralFilter::Ridge(v))?;
    let projected = project_sobolev_ball(&GridFunction::sample(&fit, grid_res)?, s, radius)?;
    let (output, resolved) = match case {
        PtCase::Smooth => (projected, true),
        PtCase::Rough => {
            if !(r > 0.0) {
                return Err(domain("the rough case needs a truncation radius r > 0"));
            }
            let t = frequency_truncate(&projected, r)?;
            (t.function, t.resolved)
        }
    };
    Ok(PtKrrResult {
        case,
        kernel,
        kernel_order,
        v,
        fit,
        output,
        resolved,
    })
}
