use ndarray::{Array1, ArrayView2, Axis};
use rayon::prelude::*;

/// A real-valued function on `R^d` that can be probed pointwise.
///
/// Estimators, ground-truth functions and grid functions all implement this,
/// so the risk functionals never care where the values come from.
pub trait Predictor: Sync {
    /// Input dimension.
    fn dim(&self) -> usize;

    fn predict(&self, x: &[f64]) -> f64;

    /// Evaluate at every row of `points`. Implementors with a cheaper batch
    /// path (kernel predictors) override this.
    fn predict_many(&self, points: ArrayView2<f64>) -> Array1<f64> {
        let vals: Vec<f64> = points
            .axis_iter(Axis(0))
            .into_par_iter()
            .map(|row| match row.as_slice() {
                Some(s) => self.predict(s),
                None => self.predict(&row.to_vec()),
            })
            .collect();
        Array1::from(vals)
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn predict(&self, x: &[f64]) -> f64 {
        (**self).predict(x)
    }
    fn predict_many(&self, points: ArrayView2<f64>) -> Array1<f64> {
        (**self).predict_many(points)
    }
}

/// Adapter turning a closure into a [`Predictor`].
pub struct FnPredictor<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnPredictor<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for FnPredictor<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn predict(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// The identically-zero function.
#[derive(Debug, Clone, Copy)]
pub struct Zero {
    pub dim: usize,
}

impl Predictor for Zero {
    fn dim(&self) -> usize {
        self.dim
    }
    fn predict(&self, _x: &[f64]) -> f64 {
        0.0
    }
}
