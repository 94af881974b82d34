//! Closed-form kernel predictors along gradient-flow time.
//!
//! With Gram eigenpairs `(λ_i, v_i)` every predictor here has the form
//!
//! ```text
//! f(x) = Σ_i h(λ_i) (v_iᵀ K_x) (v_iᵀ Y)
//! ```
//!
//! for a spectral filter `h`:
//!
//! | predictor            | `h(λ)`                      |
//! |----------------------|-----------------------------|
//! | gradient flow at `t` | `(1 - exp(-t λ / n)) / λ`   |
//! | min-norm interpolant | `1 / λ`                     |
//! | ridge with `v`       | `1 / (λ + n / v)`           |
//!
//! One eigendecomposition serves every `t` and `v`.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{domain, Error, Result};
use crate::kernels::{cross_matrix, gram, GramEigen, KernelSpec};
use crate::predictor::Predictor;

const CROSS_BLOCK_ENTRIES: usize = 1 << 22;

/// Which spectral filter to apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralFilter {
    /// Gradient flow stopped at time `t >= 0`.
    Flow(f64),
    /// The `t → ∞` limit, realised exactly.
    Interpolant,
    /// Kernel ridge regression with inverse penalty `v > 0`.
    Ridge(f64),
}

impl SpectralFilter {
    fn validate(&self) -> Result<()> {
        match *self {
            SpectralFilter::Flow(t) if !(t >= 0.0) => {
                Err(domain(format!("flow time must be >= 0, got {t}")))
            }
            SpectralFilter::Ridge(v) if !(v > 0.0) => {
                Err(domain(format!("ridge parameter v must be > 0, got {v}")))
            }
            _ => Ok(()),
        }
    }

    fn needs_positive_spectrum(&self) -> bool {
        !matches!(self, SpectralFilter::Ridge(_))
    }

    fn gain(&self, lambda: f64, n: f64) -> f64 {
        match *self {
            SpectralFilter::Flow(t) => -(-t * lambda / n).exp_m1() / lambda,
            SpectralFilter::Interpolant => 1.0 / lambda,
            SpectralFilter::Ridge(v) => 1.0 / (lambda + n / v),
        }
    }
}

/// Training data plus the shared eigendecomposition of its Gram matrix.
#[derive(Debug, Clone)]
pub struct FlowPredictor {
    spec: KernelSpec,
    gram: Arc<GramEigen>,
    y: Array1<f64>,
    /// `Vᵀ Y`
    projected: Array1<f64>,
}

impl FlowPredictor {
    pub fn new(spec: KernelSpec, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Self> {
        let g = gram(&spec, x)?;
        Self::from_gram(spec, Arc::new(g), y)
    }

    pub fn from_gram(spec: KernelSpec, gram: Arc<GramEigen>, y: ArrayView1<f64>) -> Result<Self> {
        if y.len() != gram.len() {
            return Err(Error::Shape(format!(
                "{} responses for {} design points",
                y.len(),
                gram.len()
            )));
        }
        let projected = gram.eigenvectors.t().dot(&y);
        Ok(Self {
            spec,
            gram,
            y: y.to_owned(),
            projected,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn gram(&self) -> &Arc<GramEigen> {
        &self.gram
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.gram.points
    }

    pub fn responses(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Dual coefficients `α` such that the filtered predictor is `K_xᵀ α`.
    pub fn weights(&self, filter: SpectralFilter) -> Result<Array1<f64>> {
        filter.validate()?;
        if filter.needs_positive_spectrum() && !(self.gram.lambda_min() > 0.0) {
            return Err(Error::Degenerate(format!(
                "smallest Gram eigenvalue {:e} is not positive (jitter {:e})",
                self.gram.lambda_min(),
                self.gram.jitter
            )));
        }
        let n = self.n() as f64;
        let scaled = Array1::from_iter(
            self.gram
                .eigenvalues
                .iter()
                .zip(self.projected.iter())
                .map(|(&l, &p)| filter.gain(l, n) * p),
        );
        Ok(self.gram.eigenvectors.dot(&scaled))
    }

    /// A self-contained predictor for one filter.
    pub fn at(&self, filter: SpectralFilter) -> Result<KernelPredictor> {
        Ok(KernelPredictor {
            spec: self.spec,
            points: self.gram.points.clone(),
            weights: self.weights(filter)?,
        })
    }

    pub fn kernel_row(&self, x: &[f64]) -> Result<Array1<f64>> {
        if x.len() != self.gram.dim() {
            return Err(Error::Shape(format!(
                "query has dimension {}, training inputs have {}",
                x.len(),
                self.gram.dim()
            )));
        }
        Ok(self
            .gram
            .points
            .rows()
            .into_iter()
            .map(|r| self.spec.eval_unchecked(x, r.as_slice().unwrap_or(&r.to_vec())))
            .collect())
    }

    /// Kernel matrix between query rows and the training design; reusable
    /// across any number of filters.
    pub fn cross(&self, queries: ArrayView2<f64>) -> Array2<f64> {
        cross_matrix(&self.spec, queries, self.gram.points.view())
    }

    fn predict_with(&self, filter: SpectralFilter, x: &[f64]) -> Result<f64> {
        let w = self.weights(filter)?;
        Ok(self.kernel_row(x)?.dot(&w))
    }

    pub fn flow_predict(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.predict_with(SpectralFilter::Flow(t), x)
    }

    pub fn interpolant_predict(&self, x: &[f64]) -> Result<f64> {
        self.predict_with(SpectralFilter::Interpolant, x)
    }

    pub fn krr_predict(&self, v: f64, x: &[f64]) -> Result<f64> {
        self.predict_with(SpectralFilter::Ridge(v), x)
    }

    /// `‖f(X) - Y‖₂` on the training design.
    pub fn training_residual(&self, filter: SpectralFilter) -> Result<f64> {
        let w = self.weights(filter)?;
        let fitted = self.gram.matrix.dot(&w);
        Ok((&fitted - &self.y).mapv(|v| v * v).sum().sqrt())
    }

    /// Default geometric time grid `t0 g^k`, stopping at the first value
    /// `>= 1e3 n / λ_min`.
    pub fn default_time_grid(&self) -> Result<Vec<f64>> {
        let lmin = self.gram.lambda_min();
        if !(lmin > 0.0) {
            return Err(Error::Degenerate(format!(
                "cannot size a time grid with λ_min = {lmin:e}"
            )));
        }
        geometric_time_grid(1e-2, 1.5, 1e3 * self.n() as f64 / lmin)
    }
}

/// `t0, t0 g, t0 g², …` up to and including the first value `>= t_end`.
pub fn geometric_time_grid(t0: f64, growth: f64, t_end: f64) -> Result<Vec<f64>> {
    if !(t0 > 0.0) || !(growth > 1.0) || !t_end.is_finite() {
        return Err(domain("time grid needs t0 > 0, growth > 1, finite end"));
    }
    let mut grid = vec![t0];
    while *grid.last().unwrap() < t_end {
        let next = grid.last().unwrap() * growth;
        grid.push(next);
    }
    Ok(grid)
}

/// Early-stopping time `n^{(d+1)/(2s+d)}`.
pub fn optimal_stop_time(n: usize, s: f64, d: usize) -> Result<f64> {
    if n < 1 || d < 1 {
        return Err(domain("optimal_stop_time needs n >= 1 and d >= 1"));
    }
    let d = d as f64;
    if !(s > d / 2.0) {
        return Err(domain(format!(
            "smoothness s = {s} must exceed d/2 = {} so that f* is bounded",
            d / 2.0
        )));
    }
    Ok((n as f64).powf((d + 1.0) / (2.0 * s + d)))
}

/// Kernel expansion `x ↦ Σ_i α_i k(x, x_i)`.
#[derive(Debug, Clone)]
pub struct KernelPredictor {
    pub spec: KernelSpec,
    pub points: Array2<f64>,
    pub weights: Array1<f64>,
}

impl Predictor for KernelPredictor {
    fn dim(&self) -> usize {
        self.points.ncols()
    }

    fn predict(&self, x: &[f64]) -> f64 {
        self.points
            .rows()
            .into_iter()
            .zip(self.weights.iter())
            .map(|(r, w)| w * self.spec.eval_unchecked(x, r.as_slice().unwrap_or(&r.to_vec())))
            .sum()
    }

    fn predict_many(&self, queries: ArrayView2<f64>) -> Array1<f64> {
        // Cross-matrix blocks stay near 32 MB.
        let rows = (CROSS_BLOCK_ENTRIES / self.points.nrows().max(1)).max(1);
        let mut out = Array1::zeros(queries.nrows());
        for (block, mut dst) in queries
            .axis_chunks_iter(Axis(0), rows)
            .zip(out.axis_chunks_iter_mut(Axis(0), rows))
        {
            dst.assign(&cross_matrix(&self.spec, block, self.points.view()).dot(&self.weights));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample_design(n: usize) -> (Array2<f64>, Array1<f64>) {
        let x = Array2::from_shape_fn((n, 1), |(i, _)| (i as f64 + 0.5) / n as f64);
        let y = Array1::from_shape_fn(n, |i| ((i * 7919) % 13) as f64 / 6.0 - 1.0);
        (x, y)
    }

    #[test]
    fn time_zero_is_zero() {
        let (x, y) = sample_design(6);
        let p = FlowPredictor::new(KernelSpec::ntk(2).unwrap(), x.view(), y.view()).unwrap();
        for q in [0.0, 0.13, 0.77, 1.0] {
            assert_eq!(p.flow_predict(0.0, &[q]).unwrap(), 0.0);
        }
    }

    #[test]
    fn scalar_closed_forms() {
        let k = KernelSpec::ntk(2).unwrap();
        let (x1, y1) = (0.3, 1.7);
        let p = FlowPredictor::new(k, array![[x1]].view(), array![y1].view()).unwrap();
        let k11 = k.eval(&[x1], &[x1]).unwrap();
        let t = 0.37;
        let flow = p.flow_predict(t, &[x1]).unwrap();
        assert!((flow - (1.0 - (-t * k11).exp()) * y1).abs() < 1e-12);

        let kx = k.eval(&[0.8], &[x1]).unwrap();
        let interp = p.interpolant_predict(&[0.8]).unwrap();
        assert!((interp - kx * y1 / k11).abs() < 1e-12);

        let v = 2.5;
        let krr = p.krr_predict(v, &[0.8]).unwrap();
        assert!((krr - kx * y1 / (k11 + 1.0 / v)).abs() < 1e-12);
    }

    #[test]
    fn long_time_reaches_training_targets() {
        let (x, y) = sample_design(8);
        let p = FlowPredictor::new(KernelSpec::Exponential, x.view(), y.view()).unwrap();
        for i in 0..8 {
            let xi = [x[[i, 0]]];
            assert!((p.flow_predict(1e12, &xi).unwrap() - y[i]).abs() < 1e-6);
            assert!((p.interpolant_predict(&xi).unwrap() - y[i]).abs() < 1e-6 * (1.0 + y[i].abs()));
        }
    }

    #[test]
    fn interpolant_and_ridge_match_dense_solves() {
        let (x, y) = sample_design(8);
        let spec = KernelSpec::Exponential;
        let p = FlowPredictor::new(spec, x.view(), y.view()).unwrap();
        let k = cross_matrix(&spec, x.view(), x.view());
        let alpha_interp = gauss_solve(k.clone(), y.clone());
        let mut ridge = k.clone();
        for i in 0..8 {
            ridge[[i, i]] += 8.0 / 1.0;
        }
        let alpha_ridge = gauss_solve(ridge, y.clone());
        for q in [0.05, 0.31, 0.5, 0.93] {
            let kx = Array1::from_iter((0..8).map(|i| spec.eval(&[q], &[x[[i, 0]]]).unwrap()));
            assert!((p.interpolant_predict(&[q]).unwrap() - kx.dot(&alpha_interp)).abs() < 1e-8);
            assert!((p.krr_predict(1.0, &[q]).unwrap() - kx.dot(&alpha_ridge)).abs() < 1e-8);
        }
    }

    #[test]
    fn ridge_limits() {
        let (x, y) = sample_design(8);
        let p = FlowPredictor::new(KernelSpec::Exponential, x.view(), y.view()).unwrap();
        let q = [0.44];
        let interp = p.interpolant_predict(&q).unwrap();
        assert!((p.krr_predict(1e15, &q).unwrap() - interp).abs() < 1e-6);
        assert!(p.krr_predict(1e-12, &q).unwrap().abs() < 1e-9);
        assert!(matches!(p.krr_predict(0.0, &q), Err(Error::Domain(_))));
        assert!(matches!(p.flow_predict(-1.0, &q), Err(Error::Domain(_))));
    }

    #[test]
    fn stop_time_examples() {
        assert!((optimal_stop_time(1000, 1.0, 1).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(optimal_stop_time(1, 3.7, 4).unwrap(), 1.0);
        let t = optimal_stop_time(256, 3.0, 5).unwrap();
        assert!((t - 256f64.powf(6.0 / 11.0)).abs() < 1e-12);
        assert!((t - 20.6).abs() < 0.05);
        assert!(matches!(optimal_stop_time(10, 0.5, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn geometric_grid_reaches_end() {
        let g = geometric_time_grid(1e-2, 1.5, 10.0).unwrap();
        assert_eq!(g[0], 1e-2);
        assert!(*g.last().unwrap() >= 10.0);
        assert!(g[g.len() - 2] < 10.0);
    }

    #[test]
    fn degenerate_design_is_reported() {
        let x = array![[0.5], [0.5]];
        let y = array![1.0, -1.0];
        let p = FlowPredictor::new(KernelSpec::Exponential, x.view(), y.view()).unwrap();
        assert!(matches!(p.interpolant_predict(&[0.1]), Err(Error::Degenerate(_))));
        // ridge does not need an invertible Gram matrix
        assert!(p.krr_predict(1.0, &[0.1]).is_ok());
    }

    fn gauss_solve(mut a: Array2<f64>, mut b: Array1<f64>) -> Array1<f64> {
        let n = b.len();
        for c in 0..n {
            let piv = (c..n).max_by(|&i, &j| a[[i, c]].abs().total_cmp(&a[[j, c]].abs())).unwrap();
            for k in 0..n {
                a.swap([c, k], [piv, k]);
            }
            b.swap(c, piv);
            for r in (c + 1)..n {
                let f = a[[r, c]] / a[[c, c]];
                for k in c..n {
                    a[[r, k]] -= f * a[[c, k]];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = Array1::zeros(n);
        for r in (0..n).rev() {
            let s: f64 = ((r + 1)..n).map(|k| a[[r, k]] * x[k]).sum();
            x[r] = (b[r] - s) / a[[r, r]];
        }
        x
    }
}
