//! Kernel functions and Gram matrices.
//!
//! Four families are supported:
//!
//! * the limiting neural tangent kernel of a deep ReLU network with bias,
//!   built from the arc-cosine kernels [`arc_cosine_k0`] and [`arc_cosine_k1`];
//! * the exponential (Laplace) kernel `exp(-|x - x'|)`;
//! * half-integer Matérn kernels, used to realise a prescribed Sobolev RKHS;
//! * the "spiky" composite kernel: NTK plus a vanishing, ever narrower
//!   exponential bump, whose interpolant is L2-consistent yet fragile.
//!
//! [`gram`] assembles the kernel matrix on a design and eigendecomposes it
//! once; every predictor in [`crate::flow`] is a spectral filter of that
//! decomposition.

use std::f64::consts::PI;

use faer::Side;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{domain, Error, Result};

/// Slack allowed on `|u| <= 1` before the arc-cosine kernels refuse an input.
pub const ARC_COSINE_TOLERANCE: f64 = 1e-12;

/// Relative tolerance of the PSD check: `λ_min >= -PSD_TOLERANCE * λ_max`.
pub const PSD_TOLERANCE: f64 = 1e-8;

const JITTER_BASE: f64 = 1e-10;
const JITTER_ESCALATIONS: u32 = 6;

/// A kernel family together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// Limiting NTK of a ReLU network with `depth` hidden layers.
    Ntk { depth: usize },
    /// `exp(-|x - x'|)`.
    Exponential,
    /// Matérn kernel of half-integer order `nu`.
    Matern { nu: f64, lengthscale: f64 },
    /// `K_NTK + n^{-1/5} exp(-|x - x'| n^{3/d})`. `sample_size` is decoupled
    /// from the actual design size so that bandwidth ablations are possible.
    Spiky {
        sample_size: usize,
        dimension: usize,
        depth: usize,
    },
}

impl KernelSpec {
    pub fn ntk(depth: usize) -> Result<Self> {
        let k = KernelSpec::Ntk { depth };
        k.validate()?;
        Ok(k)
    }

    pub fn matern(nu: f64, lengthscale: f64) -> Result<Self> {
        let k = KernelSpec::Matern { nu, lengthscale };
        k.validate()?;
        Ok(k)
    }

    /// Spiky kernel over a depth-2 NTK.
    pub fn spiky(sample_size: usize, dimension: usize) -> Result<Self> {
        let k = KernelSpec::Spiky {
            sample_size,
            dimension,
            depth: 2,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Ntk { depth } if depth < 1 => Err(domain("NTK depth must be >= 1")),
            KernelSpec::Matern { nu, lengthscale } => {
                if !(lengthscale > 0.0 && lengthscale.is_finite()) {
                    return Err(domain("Matérn lengthscale must be positive"));
                }
                matern_order(nu).map(|_| ())
            }
            KernelSpec::Spiky {
                sample_size,
                dimension,
                depth,
            } => {
                if sample_size < 1 || dimension < 1 || depth < 1 {
                    Err(domain(
                        "spiky kernel needs sample_size, dimension and depth >= 1",
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Smoothness index `s` such that the RKHS on `[0,1]^d` is norm-equivalent
    /// to `H^s`. `None` for the spiky kernel, whose RKHS depends on `n`.
    pub fn sobolev_order(&self, d: usize) -> Option<f64> {
        match *self {
            KernelSpec::Ntk { .. } | KernelSpec::Exponential => Some((d as f64 + 1.0) / 2.0),
            KernelSpec::Matern { nu, .. } => Some(nu + d as f64 / 2.0),
            KernelSpec::Spiky { .. } => None,
        }
    }

    /// Evaluate the kernel; `x` and `x2` must have equal length.
    pub fn eval(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        if x.len() != x2.len() {
            return Err(Error::Shape(format!(
                "kernel inputs have dimensions {} and {}",
                x.len(),
                x2.len()
            )));
        }
        Ok(self.eval_unchecked(x, x2))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], x2: &[f64]) -> f64 {
        match *self {
            KernelSpec::Ntk { depth } => ntk(depth, x, x2),
            KernelSpec::Exponential => (-euclidean(x, x2)).exp(),
            KernelSpec::Matern { nu, lengthscale } => {
                // validated at construction
                let p = matern_order(nu).unwrap_or(0);
                matern_half_integer(p, euclidean(x, x2) / lengthscale)
            }
            KernelSpec::Spiky {
                sample_size,
                dimension,
                depth,
            } => {
                let n = sample_size as f64;
                let d = dimension as f64;
                let bump = n.powf(-0.2) * (-euclidean(x, x2) * n.powf(3.0 / d)).exp();
                ntk(depth, x, x2) + bump
            }
        }
    }
}

/// Free-function form of [`KernelSpec::eval`].
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], x2: &[f64]) -> Result<f64> {
    spec.eval(x, x2)
}

fn check_unit_interval(u: f64) -> Result<f64> {
    if !(u.abs() <= 1.0 + ARC_COSINE_TOLERANCE) {
        return Err(domain(format!("arc-cosine argument {u} outside [-1, 1]")));
    }
    Ok(u.clamp(-1.0, 1.0))
}

/// `κ0(u) = (π - arccos u) / π`.
pub fn arc_cosine_k0(u: f64) -> Result<f64> {
    check_unit_interval(u).map(k0)
}

/// `κ1(u) = (sqrt(1 - u²) + u (π - arccos u)) / π`.
pub fn arc_cosine_k1(u: f64) -> Result<f64> {
    check_unit_interval(u).map(k1)
}

#[inline]
fn k0(u: f64) -> f64 {
    (PI - u.acos()) / PI
}

#[inline]
fn k1(u: f64) -> f64 {
    ((1.0 - u * u).max(0.0).sqrt() + u * (PI - u.acos())) / PI
}

fn ntk(depth: usize, x: &[f64], x2: &[f64]) -> f64 {
    // augmented inputs (x, 1)
    let nx = (x.iter().map(|v| v * v).sum::<f64>() + 1.0).sqrt();
    let ny = (x2.iter().map(|v| v * v).sum::<f64>() + 1.0).sqrt();
    // angle from the chord of the unit vectors; arccos(ū) loses half the
    // digits near ū = 1
    let chord2 = x
        .iter()
        .zip(x2)
        .map(|(a, b)| (a / nx - b / ny).powi(2))
        .sum::<f64>()
        + (1.0 / nx - 1.0 / ny).powi(2);
    let theta0 = 2.0 * (0.5 * chord2.sqrt()).min(1.0).asin();

    // angles θ_h with cos θ_h = κ1^{(h)}(ū), h = 0..=depth
    let mut theta = Vec::with_capacity(depth + 1);
    theta.push(theta0);
    for h in 0..depth {
        theta.push(k1_angle(theta[h]).clamp(-1.0, 1.0).acos());
    }
    // Σ_h κ1^{(h)} Π_{k=h}^{depth-1} κ0(κ1^{(k)}), accumulated from the top down
    let mut prod = 1.0;
    let mut sum = theta[depth].cos();
    for h in (0..depth).rev() {
        prod *= (PI - theta[h]) / PI;
        sum += theta[h].cos() * prod;
    }
    nx * ny * sum + 1.0
}

#[inline]
fn k1_angle(theta: f64) -> f64 {
    (theta.sin() + theta.cos() * (PI - theta)) / PI
}

fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// `nu = p + 1/2` with `p >= 0`; returns `p`.
fn matern_order(nu: f64) -> Result<usize> {
    let twice = 2.0 * nu;
    let rounded = twice.round();
    if !(nu > 0.0) || (twice - rounded).abs() > 1e-12 || rounded as i64 % 2 != 1 {
        return Err(domain(format!(
            "Matérn order must be a positive half-integer, got {nu}"
        )));
    }
    Ok(((rounded as i64 - 1) / 2) as usize)
}

/// Closed form for `nu = p + 1/2` at scaled distance `rho = |x - x'| / ℓ`.
fn matern_half_integer(p: usize, rho: f64) -> f64 {
    let nu = p as f64 + 0.5;
    let z = (2.0 * nu).sqrt() * rho;
    let mut poly = 0.0;
    for i in 0..=p {
        let coef = factorial(p + i) / (factorial(i) * factorial(p - i));
        poly += coef * (2.0 * z).powi((p - i) as i32);
    }
    (-z).exp() * factorial(p) / factorial(2 * p) * poly
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Kernel matrix between the rows of `a` and the rows of `b`.
pub fn cross_matrix(spec: &KernelSpec, a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    assert_eq!(a.ncols(), b.ncols(), "cross_matrix: dimension mismatch");
    let b_rows: Vec<Vec<f64>> = b.axis_iter(Axis(0)).map(|r| r.to_vec()).collect();
    let mut out = Array2::<f64>::zeros((a.nrows(), b.nrows()));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(a.axis_iter(Axis(0)))
        .for_each(|(mut row, xa)| {
            let xa = xa.to_vec();
            for (j, xb) in b_rows.iter().enumerate() {
                row[j] = spec.eval_unchecked(&xa, xb);
            }
        });
    out
}

/// Symmetric kernel matrix on a design together with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct GramEigen {
    pub points: Array2<f64>,
    /// Raw kernel matrix (without jitter).
    pub matrix: Array2<f64>,
    /// Eigenvalues of `matrix + jitter * I`, ascending.
    pub eigenvalues: Array1<f64>,
    /// Orthonormal eigenvectors stored as columns.
    pub eigenvectors: Array2<f64>,
    pub jitter: f64,
}

impl GramEigen {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.len() - 1]
    }

    /// `max |matrix + jitter I - V diag(λ) Vᵀ|`.
    pub fn reconstruction_error(&self) -> f64 {
        let v = &self.eigenvectors;
        let scaled = v * &self.eigenvalues.view().insert_axis(Axis(0));
        let rebuilt = scaled.dot(&v.t());
        let n = self.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = self.matrix[[i, j]] + if i == j { self.jitter } else { 0.0 };
                worst = worst.max((target - rebuilt[[i, j]]).abs());
            }
        }
        worst
    }

    /// `max |VᵀV - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.eigenvectors.t().dot(&self.eigenvectors);
        g.indexed_iter()
            .map(|((i, j), v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }
}

fn passes_psd(min: f64, max: f64) -> bool {
    min >= -PSD_TOLERANCE * max.abs()
}

/// Build and eigendecompose the Gram matrix of `spec` on the rows of `x`.
///
/// If the raw spectrum fails the relative PSD tolerance, a diagonal jitter of
/// `1e-10 * trace / n` is added and escalated tenfold (at most six times)
/// until it passes. The jitter is recorded in the result.
pub fn gram(spec: &KernelSpec, x: ArrayView2<f64>) -> Result<GramEigen> {
    spec.validate()?;
    let n = x.nrows();
    if n == 0 {
        return Err(domain("gram matrix needs at least one point"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(domain("design contains non-finite coordinates"));
    }
    let mut matrix = cross_matrix(spec, x, x);
    // enforce exact symmetry
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (matrix[[i, j]] + matrix[[j, i]]);
            matrix[[i, j]] = avg;
            matrix[[j, i]] = avg;
        }
    }

    let (mut eigenvalues, eigenvectors) = symmetric_eigen(&matrix);
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate(format!(
            "eigendecomposition produced non-finite values; {}",
            describe_closest_pair(x)
        )));
    }
    let (min, max) = (eigenvalues[0], eigenvalues[n - 1]);
    let mut jitter = 0.0;
    if !passes_psd(min, max) {
        let trace: f64 = matrix.diag().sum();
        let mut candidate = JITTER_BASE * trace / n as f64;
        let mut accepted = None;
        for _ in 0..=JITTER_ESCALATIONS {
            if passes_psd(min + candidate, max + candidate) {
                accepted = Some(candidate);
                break;
            }
            candidate *= 10.0;
        }
        jitter = accepted.ok_or_else(|| {
            Error::Degenerate(format!(
                "kernel matrix not PSD after maximal jitter (λ_min = {min:e}, λ_max = {max:e}); {}",
                describe_closest_pair(x)
            ))
        })?;
        eigenvalues.mapv_inplace(|v| v + jitter);
    }

    Ok(GramEigen {
        points: x.to_owned(),
        matrix,
        eigenvalues,
        eigenvectors,
        jitter,
    })
}

/// Ascending eigenvalues and column eigenvectors of a symmetric matrix.
pub(crate) fn symmetric_eigen(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| a[[i, j]]);
    let eig = m.selfadjoint_eigendecomposition(Side::Lower);
    let s = eig.s().column_vector();
    let u = eig.u();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s.read(i).total_cmp(&s.read(j)));
    let values = Array1::from_iter(order.iter().map(|&i| s.read(i)));
    let vectors = Array2::from_shape_fn((n, n), |(i, k)| u.read(i, order[k]));
    (values, vectors)
}

fn describe_closest_pair(x: ArrayView2<f64>) -> String {
    let n = x.nrows();
    let mut best = (f64::INFINITY, 0, 0);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(&x.row(i).to_vec(), &x.row(j).to_vec());
            if d < best.0 {
                best = (d, i, j);
            }
        }
    }
    if n < 2 {
        return "single-point design".into();
    }
    format!(
        "closest pair is points {} and {} at distance {:e}",
        best.1, best.2, best.0
    )
}
