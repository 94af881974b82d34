//! Cosine-basis Fourier machinery on cell-centered grids over `[0,1]^d`.
//!
//! Grid values live at `x_j = (j + ½)/G` per axis. Coefficients are taken
//! in the orthonormal basis `Π_axes c_k cos(π k x)` (`c_0 = 1`, `c_k = √2`),
//! which is the Fourier basis of the even reflection of `f` to `[0,2]^d`.
//! Frequency index `k` corresponds to `ξ = π k`, and the normalization makes
//! `Σ a_k² = (1/G^d) Σ_j f(x_j)²` (the grid `L²` norm squared).

use std::io::{BufRead, Write};

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustdct::DctPlanner;

use crate::adversarial::{BallScheme, ProbeSet};
use crate::error::{domain, Error, Result};
use crate::predictor::Predictor;
use crate::seed;

/// Maximum number of bisection/bracketing steps in [`project_sobolev_ball`].
pub const PROJECTION_MAX_ITER: usize = 200;

/// Cell centers of the `res^d` grid in row-major order (last axis fastest).
pub fn cell_centers(d: usize, res: usize) -> Array2<f64> {
    let total = res.pow(d as u32);
    let mut out = Array2::<f64>::zeros((total, d));
    for (idx, mut row) in out.rows_mut().into_iter().enumerate() {
        let mut rem = idx;
        for axis in (0..d).rev() {
            row[axis] = ((rem % res) as f64 + 0.5) / res as f64;
            rem /= res;
        }
    }
    out
}

fn multi_index(mut idx: usize, d: usize, res: usize, out: &mut [usize]) {
    for axis in (0..d).rev() {
        out[axis] = idx % res;
        idx /= res;
    }
}

/// Apply `op` to every axis-aligned line of a row-major `res^d` array.
fn for_each_line(values: &mut [f64], d: usize, res: usize, mut op: impl FnMut(&mut [f64])) {
    let mut line = vec![0.0; res];
    for axis in 0..d {
        let stride = res.pow((d - 1 - axis) as u32);
        let outer = res.pow(axis as u32);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * res * stride + inner;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = values[base + j * stride];
                }
                op(&mut line);
                for (j, v) in line.iter().enumerate() {
                    values[base + j * stride] = *v;
                }
            }
        }
    }
}

fn forward_transform(values: &[f64], d: usize, res: usize) -> Vec<f64> {
    let dct = DctPlanner::new().plan_dct2(res);
    let n = res as f64;
    let mut out = values.to_vec();
    for_each_line(&mut out, d, res, |line| {
        dct.process_dct2(line);
        line[0] /= n;
        let c = std::f64::consts::SQRT_2 / n;
        line[1..].iter_mut().for_each(|v| *v *= c);
    });
    out
}

fn inverse_transform(coefficients: &[f64], d: usize, res: usize) -> Vec<f64> {
    let dct = DctPlanner::new().plan_dct3(res);
    let mut out = coefficients.to_vec();
    for_each_line(&mut out, d, res, |line| {
        line[0] *= 2.0;
        line[1..].iter_mut().for_each(|v| *v *= std::f64::consts::SQRT_2);
        dct.process_dct3(line);
    });
    out
}

/// Samples of a function on the `G^d` cell-centered grid together with its
/// cosine coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    dim: usize,
    resolution: usize,
    values: Vec<f64>,
    coefficients: Vec<f64>,
}

impl GridFunction {
    fn check_shape(dim: usize, resolution: usize, len: usize) -> Result<()> {
        if dim == 0 || resolution < 2 {
            return Err(domain("grid functions need dimension >= 1 and resolution >= 2"));
        }
        if dim > 5 {
            return Err(domain("spectral grids are limited to dimension <= 5"));
        }
        let expected = resolution.pow(dim as u32);
        if len != expected {
            return Err(Error::Shape(format!(
                "expected {expected} grid values for resolution {resolution} in dimension {dim}, got {len}"
            )));
        }
        Ok(())
    }

    pub fn from_values(dim: usize, resolution: usize, values: Vec<f64>) -> Result<Self> {
        Self::check_shape(dim, resolution, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(domain("grid values must be finite"));
        }
        let coefficients = forward_transform(&values, dim, resolution);
        Ok(Self {
            dim,
            resolution,
            values,
            coefficients,
        })
    }

    pub fn from_coefficients(dim: usize, resolution: usize, coefficients: Vec<f64>) -> Result<Self> {
        Self::check_shape(dim, resolution, coefficients.len())?;
        if coefficients.iter().any(|v| !v.is_finite()) {
            return Err(domain("coefficients must be finite"));
        }
        let values = inverse_transform(&coefficients, dim, resolution);
        Ok(Self {
            dim,
            resolution,
            values,
            coefficients,
        })
    }

    /// Evaluate `f` at the cell centers.
    pub fn sample(f: &dyn Predictor, resolution: usize) -> Result<Self> {
        let centers = cell_centers(f.dim(), resolution);
        Self::from_values(f.dim(), resolution, f.predict_many(centers.view()).to_vec())
    }

    pub fn zeros(dim: usize, resolution: usize) -> Result<Self> {
        Self::from_values(dim, resolution, vec![0.0; resolution.pow(dim as u32)])
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `‖ξ‖²` for the coefficient at flat index `idx`.
    pub fn frequency_norm_sq(&self, idx: usize) -> f64 {
        let mut k = [0usize; 5];
        multi_index(idx, self.dim, self.resolution, &mut k[..self.dim]);
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        k[..self.dim].iter().map(|&ki| pi2 * (ki * ki) as f64).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.len() as f64).sqrt()
    }

    pub fn l2_distance(&self, other: &GridFunction) -> Result<f64> {
        self.same_grid(other)?;
        let ss: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok((ss / self.len() as f64).sqrt())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> GridFunction {
        GridFunction {
            dim: self.dim,
            resolution: self.resolution,
            values: self.values.iter().map(|v| v * factor).collect(),
            coefficients: self.coefficients.iter().map(|v| v * factor).collect(),
        }
    }

    fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.dim != other.dim || self.resolution != other.resolution {
            return Err(Error::Shape("grid functions live on different grids".into()));
        }
        Ok(())
    }

    /// Max-norm gap between the stored values and the inverse transform of
    /// the stored coefficients.
    pub fn roundtrip_error(&self) -> f64 {
        inverse_transform(&self.coefficients, self.dim, self.resolution)
            .iter()
            .zip(&self.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn map_coefficients(&self, mut op: impl FnMut(usize, f64) -> f64) -> GridFunction {
        let coefficients: Vec<f64> = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, &c)| op(i, c))
            .collect();
        GridFunction {
            dim: self.dim,
            resolution: self.resolution,
            values: inverse_transform(&coefficients, self.dim, self.resolution),
            coefficients,
        }
    }

    /// `∫ sup_{x' ∈ B(x,r)} |f(x') - f(x)|² dx` with both the integral and
    /// the supremum restricted to grid nodes. Nested in `r` by construction.
    pub fn local_variation_energy(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(domain("radius must be >= 0"));
        }
        let g = self.resolution as i64;
        let reach = (r * self.resolution as f64).floor() as i64;
        let offsets = ball_offsets(self.dim, reach, r * self.resolution as f64);
        let total: f64 = (0..self.len())
            .into_par_iter()
            .map(|idx| {
                let mut k = [0usize; 5];
                multi_index(idx, self.dim, self.resolution, &mut k[..self.dim]);
                let here = self.values[idx];
                let mut worst = 0.0f64;
                'off: for off in &offsets {
                    let mut flat = 0i64;
                    for axis in 0..self.dim {
                        let c = k[axis] as i64 + off[axis];
                        if c < 0 || c >= g {
                            continue 'off;
                        }
                        flat = flat * g + c;
                    }
                    worst = worst.max((self.values[flat as usize] - here).abs());
                }
                worst * worst
            })
            .sum();
        Ok(total / self.len() as f64)
    }

    /// CSV with a `# dimension=.. resolution=..` line then `index,value`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "# dimension={} resolution={}", self.dim, self.resolution)?;
        writeln!(w, "index,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{i},{v:e}")?;
        }
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut dim = None;
        let mut resolution = None;
        let mut values = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let parse_err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            if let Some(meta) = line.strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("dimension", v)) => dim = v.parse().ok(),
                        Some(("resolution", v)) => resolution = v.parse().ok(),
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() || line == "index,value" {
                continue;
            }
            let (idx, value) = line
                .split_once(',')
                .ok_or_else(|| parse_err(format!("expected `index,value`, got `{line}`")))?;
            let idx: usize = idx.parse().map_err(|_| parse_err(format!("bad index `{idx}`")))?;
            if idx != values.len() {
                return Err(parse_err(format!("index {idx} out of order")));
            }
            values.push(value.parse::<f64>().map_err(|_| parse_err(format!("bad value `{value}`")))?);
        }
        match (dim, resolution) {
            (Some(d), Some(g)) => Self::from_values(d, g, values),
            _ => Err(Error::Parse {
                line: 1,
                message: "missing `# dimension=.. resolution=..` header".into(),
            }),
        }
    }
}

fn ball_offsets(d: usize, reach: i64, radius_cells: f64) -> Vec<[i64; 5]> {
    let mut out = Vec::new();
    let side = (2 * reach + 1) as usize;
    let limit = radius_cells * radius_cells + 1e-9;
    for idx in 0..side.pow(d as u32) {
        let mut k = [0usize; 5];
        multi_index(idx, d, side, &mut k[..d]);
        let mut off = [0i64; 5];
        let mut n2 = 0.0;
        for axis in 0..d {
            off[axis] = k[axis] as i64 - reach;
            n2 += (off[axis] * off[axis]) as f64;
        }
        if n2 <= limit {
            out.push(off);
        }
    }
    out
}

/// Multilinear interpolation between cell centers, constant beyond the
/// outermost centers.
impl Predictor for GridFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, x: &[f64]) -> f64 {
        let g = self.resolution;
        let mut base = [0usize; 5];
        let mut frac = [0.0f64; 5];
        for axis in 0..self.dim {
            let u = (x[axis] * g as f64 - 0.5).clamp(0.0, (g - 1) as f64);
            let i0 = (u.floor() as usize).min(g - 2);
            base[axis] = i0;
            frac[axis] = u - i0 as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << self.dim) {
            let mut weight = 1.0;
            let mut flat = 0usize;
            for axis in 0..self.dim {
                let bit = (corner >> (self.dim - 1 - axis)) & 1;
                weight *= if bit == 1 { frac[axis] } else { 1.0 - frac[axis] };
                flat = flat * g + base[axis] + bit;
            }
            if weight != 0.0 {
                acc += weight * self.values[flat];
            }
        }
        acc
    }
}

fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

fn smooth_step(t: f64) -> f64 {
    let a = bump(t);
    let b = bump(1.0 - t);
    a / (a + b)
}

/// Radial profile of the smooth cutoff: 1 on `[0, ½]`, 0 on `[1, ∞)`.
pub fn cutoff_profile(norm: f64) -> f64 {
    1.0 - smooth_step((4.0 * norm * norm - 1.0) / 3.0)
}

pub fn cutoff_chi(x: &[f64]) -> f64 {
    cutoff_profile(x.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Output of [`frequency_truncate`].
#[derive(Debug, Clone)]
pub struct Truncation {
    pub function: GridFunction,
    /// False when the grid cannot represent frequencies up to `1/r`; the
    /// input is then returned unchanged.
    pub resolved: bool,
}

/// Multiply every coefficient by `χ(r ξ)`.
pub fn frequency_truncate(f: &GridFunction, r: f64) -> Result<Truncation> {
    if !(r > 0.0) {
        return Err(domain(format!("truncation radius must be > 0, got {r}")));
    }
    if std::f64::consts::PI * f.resolution as f64 <= 1.0 / r {
        return Ok(Truncation {
            function: f.clone(),
            resolved: false,
        });
    }
    let function = f.map_coefficients(|i, c| c * cutoff_profile(r * f.frequency_norm_sq(i).sqrt()));
    Ok(Truncation {
        function,
        resolved: true,
    })
}

fn sobolev_weight(f: &GridFunction, idx: usize, s: f64) -> f64 {
    (1.0 + f.frequency_norm_sq(idx)).powf(s)
}

/// `(Σ (1 + ‖ξ‖²)^s a_k²)^{1/2}`.
pub fn sobolev_norm(f: &GridFunction, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(domain(format!("Sobolev order must be >= 0, got {s}")));
    }
    Ok(f.coefficients
        .iter()
        .enumerate()
        .map(|(i, a)| sobolev_weight(f, i, s) * a * a)
        .sum::<f64>()
        .sqrt())
}

/// `L²` projection onto `{g : ‖g‖_{H^s} ≤ L}`: `c_k = a_k / (1 + μ w_k)`
/// with `μ ≥ 0` the smallest multiplier meeting the constraint.
pub fn project_sobolev_ball(f: &GridFunction, s: f64, radius: f64) -> Result<GridFunction> {
    if !(radius > 0.0) {
        return Err(domain(format!("ball radius must be > 0, got {radius}")));
    }
    let norm = sobolev_norm(f, s)?;
    if norm <= radius * (1.0 + 1e-12) {
        return Ok(f.clone());
    }
    let weights: Vec<f64> = (0..f.len()).map(|i| sobolev_weight(f, i, s)).collect();
    let norm_at = |mu: f64| -> f64 {
        f.coefficients
            .iter()
            .zip(&weights)
            .map(|(a, w)| {
                let c = a / (1.0 + mu * w);
                w * c * c
            })
            .sum::<f64>()
            .sqrt()
    };
    let mut lo = 0.0;
    let mut hi = 1.0 / weights.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut iter = 0;
    while norm_at(hi) > radius {
        lo = hi;
        hi *= 2.0;
        iter += 1;
        if iter >= PROJECTION_MAX_ITER || !hi.is_finite() {
            return Err(Error::Convergence("could not bracket the projection multiplier".into()));
        }
    }
    while iter < PROJECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if norm_at(mid) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
        if radius - norm_at(hi) <= 1e-10 * radius {
            break;
        }
        iter += 1;
    }
    if iter >= PROJECTION_MAX_ITER {
        return Err(Error::Convergence("projection bisection did not converge".into()));
    }
    Ok(f.map_coefficients(|i, c| c / (1.0 + hi * weights[i])))
}

/// Double-integral Slobodeckij seminorm `(∬ |f(x)-f(y)|² / |x-y|^{1+2s})^{1/2}`
/// by midpoint quadrature on a `gq × gq` grid with pairs closer than
/// `2/gq` dropped. Underestimates the true seminorm.
pub fn slobodeckij_seminorm_1d(f: &(dyn Fn(f64) -> f64 + Sync), s: f64, gq: usize) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(domain(format!("Slobodeckij order must lie in (0,1), got {s}")));
    }
    if gq < 16 {
        return Err(domain("quadrature grid must have at least 16 points"));
    }
    let h = 1.0 / gq as f64;
    let vals: Vec<f64> = (0..gq).map(|i| f((i as f64 + 0.5) * h)).collect();
    let expo = 1.0 + 2.0 * s;
    let kernel: Vec<f64> = (0..gq).map(|k| (k as f64 * h).powf(-expo)).collect();
    let total: f64 = (0..gq)
        .into_par_iter()
        .map(|i| {
            ((i + 2)..gq)
                .map(|j| {
                    let diff = vals[i] - vals[j];
                    diff * diff * kernel[j - i]
                })
                .sum::<f64>()
        })
        .sum();
    Ok((2.0 * total * h * h).sqrt())
}

/// `∫ sup_{x' ∈ B(x,r)} |f(x') - f(x)|² dx` by midpoint quadrature with the
/// default ball probes (see [`BallScheme::for_dimension`]).
pub fn local_variation_energy(f: &dyn Predictor, r: f64, grid_res: usize) -> Result<f64> {
    if grid_res < 2 {
        return Err(domain("grid_res must be >= 2"));
    }
    let scheme = BallScheme::for_dimension(f.dim(), r, 0)?;
    let centers = cell_centers(f.dim(), grid_res);
    let zeros = vec![0.0; centers.nrows()];
    let probes = ProbeSet::build(centers.view(), &zeros, &scheme, None)?;
    let var = probes.local_variations(&probes.evaluate(f));
    Ok(var.iter().map(|v| v * v).sum::<f64>() / var.len() as f64)
}

/// Random function with standard normal cosine coefficients on
/// `max_k(k_axis) < band`, zero elsewhere.
pub fn random_band_limited(dim: usize, resolution: usize, band: usize, seed: u64) -> Result<GridFunction> {
    if band == 0 || band > resolution {
        return Err(domain("band must lie in 1..=resolution"));
    }
    let mut rng = seed::rng(seed);
    let mut coefficients = vec![0.0; resolution.pow(dim as u32)];
    let mut k = [0usize; 5];
    for (i, c) in coefficients.iter_mut().enumerate() {
        multi_index(i, dim, resolution, &mut k[..dim]);
        if k[..dim].iter().all(|&ki| ki < band) {
            *c = rng.sample(StandardNormal);
        }
    }
    GridFunction::from_coefficients(dim, resolution, coefficients)
}
