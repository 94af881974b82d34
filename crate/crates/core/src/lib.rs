//! Adversarial risk of kernel and wide-network regression estimators.
//!
//! The crate is organized around a single [`Predictor`] trait. Everything that
//! produces predictions (kernel gradient-flow predictors, smoothed wrappers,
//! grid functions, finite-width networks, ground-truth functions) implements
//! it, and the risk functionals in [`adversarial`] consume it.
//!
//! * [`kernels`]: NTK, exponential, Matérn and spiky kernels; Gram
//!   eigendecomposition.
//! * [`flow`]: gradient-flow, interpolant and ridge predictors as spectral
//!   filters over one eigendecomposition.
//! * [`adversarial`]: `R_A`, `G_A` and α-trimmed randomized smoothing.
//! * [`spectral`]: cosine-basis Sobolev norms, projections and truncation.
//! * [`adaptive`]: PT-KRR and the Lepski-adaptive estimator.
//! * [`lowerbound`]: least-favorable base functions.
//! * [`theory`]: separation, exponential-moment and range estimates.
//! * [`widenet`]: mirrored finite-width ReLU networks.
//! * [`data`]: synthetic generators and the diabetes loader.

pub mod adaptive;
pub mod adversarial;
pub mod data;
pub mod error;
pub mod experiments;
pub mod flow;
pub mod kernels;
pub mod lowerbound;
pub mod predictor;
pub mod seed;
pub mod spectral;
pub mod stats;
pub mod theory;
pub mod widenet;

pub use adversarial::{adversarial_risk, ga_functional, BallScheme, RiskEstimate, SmoothedPredictor, TestSet};

pub use error::{Error, Result};
pub use flow::{FlowPredictor, KernelPredictor, SpectralFilter};
pub use kernels::{gram, GramEigen, KernelSpec};
pub use predictor::{FnPredictor, Predictor};
pub use spectral::GridFunction;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/flow.md")]
    mod flow {}
    #[doc = include_str!("../../../book/src/adversarial.md")]
    mod adversarial {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/adaptive.md")]
    mod adaptive {}
    #[doc = include_str!("../../../book/src/widenet.md")]
    mod widenet {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
