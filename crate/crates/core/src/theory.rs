//! Monte-Carlo and exact checks of the quantitative lemmas: separation versus
//! smallest Gram eigenvalue, the exponential-moment bound on the minimum
//! separation, Gaussian ranges and local conditional ranges.
//!
//! The minimum separation is always the raw minimum pairwise distance (no
//! factor ½); constants absorb the difference.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::data::Dataset;
use crate::error::{domain, Error, Result};
use crate::flow::{FlowPredictor, SpectralFilter};
use crate::kernels::{gram, KernelSpec};
use crate::predictor::Predictor;
use crate::seed;
use crate::spectral::cell_centers;
use crate::stats::mean_and_se;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separation {
    pub value: f64,
    pub pair: (usize, usize),
    /// Two rows coincide.
    pub degenerate: bool,
}

/// `q_X = min_{i<j} ‖X_i − X_j‖₂` by exhaustive scan.
pub fn min_separation(x: ArrayView2<f64>) -> Result<Separation> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, available: n });
    }
    let (value2, pair) = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            let mut best = (f64::INFINITY, (i, i));
            for j in (i + 1)..n {
                let d2: f64 = xi.iter().zip(x.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 < best.0 {
                    best = (d2, (i, j));
                }
            }
            best
        })
        .reduce(|| (f64::INFINITY, (0, 0)), |a, b| if b.0 < a.0 { b } else { a });
    Ok(Separation {
        value: value2.sqrt(),
        pair,
        degenerate: value2 == 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationStats {
    pub q_x: f64,
    /// Smallest eigenvalue of the Gram matrix before any jitter.
    pub lambda_min: f64,
    pub ratio: f64,
}

pub fn separation_eigen_stats(spec: &KernelSpec, x: ArrayView2<f64>) -> Result<SeparationStats> {
    let sep = min_separation(x)?;
    if sep.degenerate {
        return Err(Error::Degenerate(format!(
            "rows {} and {} coincide",
            sep.pair.0, sep.pair.1
        )));
    }
    let g = gram(spec, x)?;
    let lambda_min = g.lambda_min() - g.jitter;
    Ok(SeparationStats {
        q_x: sep.value,
        lambda_min,
        ratio: lambda_min / sep.value,
    })
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    std::f64::consts::PI.powf(h) / gamma(h + 1.0)
}

/// `(V_d Γ(d+1) / 2) · n² / t^d`, an upper bound on `E exp(−t q_X)` for `n`
/// uniform points in `[0,1]^d`.
pub fn exp_moment_bound(n: usize, t: f64, d: usize) -> Result<f64> {
    if !(t > 0.0) || d == 0 {
        return Err(domain("exp_moment_bound needs t > 0 and d >= 1"));
    }
    let nf = n as f64;
    Ok(unit_ball_volume(d) * gamma(d as f64 + 1.0) / 2.0 * nf * nf / t.powi(d as i32))
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

fn monte_carlo(trials: usize, seed: u64, trial: impl Fn(&mut seed::Rng) -> f64 + Sync) -> McEstimate {
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| trial(&mut seed::rng(seed::mix(seed, i as u64))))
        .collect();
    let (mean, std_error) = mean_and_se(&values);
    McEstimate { mean, std_error, trials }
}

/// Monte-Carlo estimate of `E exp(−t q_X)` over uniform designs.
pub fn exp_moment_mc(n: usize, t: f64, d: usize, trials: usize, seed: u64) -> Result<McEstimate> {
    if !(t > 0.0) || d == 0 || n < 2 {
        return Err(domain("exp_moment_mc needs t > 0, d >= 1 and n >= 2"));
    }
    if trials < 100 {
        return Err(domain("exp_moment_mc needs at least 100 trials"));
    }
    Ok(monte_carlo(trials, seed, |rng| {
        let x = Array2::from_shape_simple_fn((n, d), || rng.gen::<f64>());
        let q = min_separation(x.view()).map(|s| s.value).unwrap_or(0.0);
        (-t * q).exp()
    }))
}

/// Monte-Carlo estimate of `E[(max Z − min Z − 2C)₊²]` for `k` i.i.d.
/// `N(0, σ²)` draws.
pub fn gaussian_range_mc(k: usize, sigma: f64, c: f64, trials: usize, seed: u64) -> Result<McEstimate> {
    if k < 2 {
        return Err(domain("gaussian_range_mc needs k >= 2"));
    }
    if !(sigma >= 0.0) || !(c >= 0.0) {
        return Err(domain("sigma and C must be >= 0"));
    }
    if trials < 1000 {
        return Err(domain("gaussian_range_mc needs at least 1000 trials"));
    }
    Ok(monte_carlo(trials, seed, |rng| {
        let (lo, hi) = (0..k).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), _| {
            let z: f64 = rng.sample(StandardNormal);
            (lo.min(sigma * z), hi.max(sigma * z))
        });
        (hi - lo - 2.0 * c).max(0.0).powi(2)
    }))
}

/// `N(x) = #{i : X_i ∈ B(x,r)}` and `V(x) = (max ξ − min ξ − 2C)₊²` over the
/// noise proxies in the ball (`0` when `N(x) < 2`). Exact residuals are used
/// when the truth is known, raw responses otherwise.
pub fn local_range_stats(data: &Dataset, x: &[f64], r: f64, c: f64) -> Result<(usize, f64)> {
    if !(r >= 0.0) {
        return Err(domain("radius must be >= 0"));
    }
    if x.len() != data.dim() {
        return Err(Error::Shape("query dimension differs from the data".into()));
    }
    let proxies = data.residuals().unwrap_or_else(|| data.y.clone());
    let mut count = 0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (row, p) in data.x.axis_iter(Axis(0)).zip(proxies.iter()) {
        let d2: f64 = row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 <= r * r {
            count += 1;
            lo = lo.min(*p);
            hi = hi.max(*p);
        }
    }
    let v = if count < 2 { 0.0 } else { (hi - lo - 2.0 * c).max(0.0).powi(2) };
    Ok((count, v))
}

/// `max_grid |f̂_t − f̂_∞|` on `grid_points` cell centers of `[0,1]`.
pub fn finite_time_gap(flow: &FlowPredictor, t: f64, grid_points: usize) -> Result<f64> {
    if flow.points().ncols() != 1 {
        return Err(Error::Shape("finite_time_gap evaluates on a 1D grid".into()));
    }
    let grid = cell_centers(1, grid_points);
    let ft = flow.at(SpectralFilter::Flow(t))?.predict_many(grid.view());
    let finf = flow.at(SpectralFilter::Interpolant)?.predict_many(grid.view());
    Ok(ft.iter().zip(finf.iter()).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}
