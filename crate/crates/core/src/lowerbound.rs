//! Least-favorable base functions for the adversarial minimax lower bound
//! and numerical certification of their Sobolev-ball membership.
//!
//! Rough case (`0 < s ≤ 1`): `f0` tiles `K = ⌊1/(8r)⌋` rescaled copies of
//! `φ0` along the first coordinate. Smooth case (`s ≥ 1`): `g0` is a single
//! `C^∞` bump supported in `[2r, 1 − 2r]`.

use crate::error::{domain, Error, Result};
use crate::predictor::Predictor;
use crate::spectral::{slobodeckij_seminorm_1d, sobolev_norm, GridFunction};

/// Safety divisor applied to the (downward-biased) Slobodeckij estimate.
pub const SLOBODECKIJ_SAFETY: f64 = 0.9;
pub const DEFAULT_QUADRATURE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseKind {
    /// Tiled `φ0` profile, `0 < s ≤ 1`.
    Rough,
    /// Smooth bump, `s ≥ 1`.
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseFunctionSpec {
    pub kind: BaseKind,
    pub s: f64,
    pub r: f64,
    /// `B_s`.
    pub amplitude: f64,
    /// Input dimension; the function depends on the first coordinate only.
    pub dim: usize,
}

impl BaseFunctionSpec {
    pub fn new(kind: BaseKind, s: f64, r: f64, amplitude: f64) -> Result<Self> {
        let spec = Self {
            kind,
            s,
            r,
            amplitude,
            dim: 1,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim.max(1);
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r < 1.0 / 16.0) {
            return Err(domain(format!("r must lie in (0, 1/16), got {}", self.r)));
        }
        if !(self.amplitude > 0.0) {
            return Err(domain("amplitude B_s must be > 0"));
        }
        match self.kind {
            BaseKind::Rough if !(self.s > 0.0 && self.s <= 1.0) => {
                Err(domain(format!("rough base functions need 0 < s <= 1, got {}", self.s)))
            }
            BaseKind::Smooth if !(self.s >= 1.0) => {
                Err(domain(format!("smooth base functions need s >= 1, got {}", self.s)))
            }
            _ => Ok(()),
        }
    }

    /// `K = ⌊1/(8r)⌋`.
    pub fn tiles(&self) -> usize {
        (1.0 / (8.0 * self.r)).floor() as usize
    }

    /// `a_k = 8kr`.
    pub fn anchor(&self, k: usize) -> f64 {
        8.0 * k as f64 * self.r
    }

    pub fn eval(&self, x1: f64) -> f64 {
        match self.kind {
            BaseKind::Rough => f0_eval(x1, self),
            BaseKind::Smooth => g0_eval(x1, self),
        }
    }
}

impl Predictor for BaseFunctionSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, x: &[f64]) -> f64 {
        self.eval(x[0])
    }
}

/// `0, (x−¼)^s, (¼)^s, (1−x)^s` on the four quarters of `[0,1]`.
pub fn phi0(x: f64, s: f64) -> f64 {
    if x < 0.25 {
        0.0
    } else if x < 0.5 {
        (x - 0.25).powf(s)
    } else if x < 0.75 {
        0.25f64.powf(s)
    } else if x <= 1.0 {
        (1.0 - x).max(0.0).powf(s)
    } else {
        0.0
    }
}

/// `B_s (8r)^s φ0((x₁ − a_{k−1})/(8r))` on tile `k`, zero beyond `a_K`.
pub fn f0_eval(x1: f64, spec: &BaseFunctionSpec) -> f64 {
    let width = 8.0 * spec.r;
    if x1 < 0.0 || x1 >= spec.anchor(spec.tiles()) {
        return 0.0;
    }
    let k = (x1 / width).floor();
    let local = (x1 - k * width) / width;
    spec.amplitude * width.powf(spec.s) * phi0(local.clamp(0.0, 1.0), spec.s)
}

/// `exp(−1/(1 − (x−1)²))` on `[0,2]`, zero elsewhere.
pub fn psi0(x: f64) -> f64 {
    let q = 1.0 - (x - 1.0) * (x - 1.0);
    if (0.0..=2.0).contains(&x) && q > 0.0 {
        (-1.0 / q).exp()
    } else {
        0.0
    }
}

/// `B_s ψ0` stretched so that its support `[0,2]` covers `[2r, 1−2r]`.
pub fn g0_eval(x1: f64, spec: &BaseFunctionSpec) -> f64 {
    let lo = 2.0 * spec.r;
    let hi = 1.0 - 2.0 * spec.r;
    if x1 < lo || x1 >= hi {
        return 0.0;
    }
    spec.amplitude * psi0(2.0 * (x1 - lo) / (hi - lo))
}

/// `‖φ0‖²_{L²} = (¼)^{2s+1} (1 + 2/(2s+1))`.
pub fn phi0_l2_sq(s: f64) -> f64 {
    0.25f64.powf(2.0 * s + 1.0) * (1.0 + 2.0 / (2.0 * s + 1.0))
}

/// `K (8r)^{1+2s} B_s² ‖φ0‖²`, the exact `L²` mass of the tiling.
pub fn tiling_l2_sq(spec: &BaseFunctionSpec) -> f64 {
    let w = 8.0 * spec.r;
    spec.tiles() as f64 * w.powf(1.0 + 2.0 * spec.s) * spec.amplitude.powi(2) * phi0_l2_sq(spec.s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMethod {
    /// `L²` plus the Slobodeckij double integral (divided by the safety factor).
    Slobodeckij,
    /// `L²` plus finite-difference `∫ f'²`.
    H1Grid,
    /// Cosine-basis `H^s` norm of the grid samples.
    Spectral,
}

pub fn norm_method(s: f64) -> NormMethod {
    if s < 1.0 {
        NormMethod::Slobodeckij
    } else if s == 1.0 {
        NormMethod::H1Grid
    } else {
        NormMethod::Spectral
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub method: NormMethod,
    pub l2: f64,
    /// Seminorm part (zero for the spectral route, which is a full norm).
    pub seminorm: f64,
    /// Calibrated `H^s` norm estimate.
    pub total: f64,
}

/// Estimate `‖f‖_{H^s}` of the base function on a `gq`-point grid.
pub fn norm_estimate(spec: &BaseFunctionSpec, gq: usize) -> Result<NormEstimate> {
    spec.validate()?;
    if gq < 16 {
        return Err(domain("quadrature grid must have at least 16 points"));
    }
    let h = 1.0 / gq as f64;
    let vals: Vec<f64> = (0..gq).map(|i| spec.eval((i as f64 + 0.5) * h)).collect();
    let l2 = (vals.iter().map(|v| v * v).sum::<f64>() * h).sqrt();
    let method = norm_method(spec.s);
    let (seminorm, total) = match method {
        NormMethod::Slobodeckij => {
            let f = |x: f64| spec.eval(x);
            let semi = slobodeckij_seminorm_1d(&f, spec.s, gq)?;
            (semi, (l2 * l2 + semi * semi / SLOBODECKIJ_SAFETY).sqrt())
        }
        NormMethod::H1Grid => {
            let grad2: f64 = vals.windows(2).map(|w| ((w[1] - w[0]) / h).powi(2)).sum::<f64>() * h;
            (grad2.sqrt(), (l2 * l2 + grad2).sqrt())
        }
        NormMethod::Spectral => {
            let g = GridFunction::from_values(1, gq, vals)?;
            (0.0, sobolev_norm(&g, spec.s)?)
        }
    };
    Ok(NormEstimate {
        method,
        l2,
        seminorm,
        total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// Amplitude whose estimated norm equals the budget.
    pub amplitude: f64,
    /// Estimated norm at unit amplitude.
    pub unit_norm: f64,
    pub method: NormMethod,
    pub quadrature: usize,
}

/// Amplitude `B_s` such that the estimated `H^s` norm equals `norm_budget`.
/// Every estimate is linear in the amplitude, so one evaluation at `B_s = 1`
/// suffices; a half-resolution evaluation guards against unresolved
/// quadrature.
pub fn calibrate_bs(kind: BaseKind, s: f64, r: f64, norm_budget: f64, gq: usize) -> Result<Calibration> {
    if !(norm_budget > 0.0) {
        return Err(domain("norm budget must be > 0"));
    }
    let unit = BaseFunctionSpec::new(kind, s, r, 1.0)?;
    let fine = norm_estimate(&unit, gq)?.total;
    let coarse = norm_estimate(&unit, gq / 2)?.total;
    if !fine.is_finite() || fine <= 0.0 {
        return Err(Error::Calibration(format!("norm estimate is {fine} at s = {s}, r = {r}")));
    }
    if (fine - coarse).abs() > 0.25 * fine {
        return Err(Error::Calibration(format!(
            "quadrature unresolved at s = {s}, r = {r}: {coarse} at {} points vs {fine} at {gq}",
            gq / 2
        )));
    }
    Ok(Calibration {
        amplitude: norm_budget / fine,
        unit_norm: fine,
        method: norm_method(s),
        quadrature: gq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rough(s: f64, r: f64, b: f64) -> BaseFunctionSpec {
        BaseFunctionSpec::new(BaseKind::Rough, s, r, b).unwrap()
    }

    #[test]
    fn phi0_examples() {
        assert_eq!(phi0(0.1, 0.5), 0.0);
        assert!((phi0(0.6, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(phi0(1.0, 0.5), 0.0);
        for i in 0..=1000 {
            let v = phi0(i as f64 / 1000.0, 0.7);
            assert!((0.0..=0.25f64.powf(0.7) + 1e-15).contains(&v));
        }
        // continuity at the breakpoints
        for b in [0.25, 0.5, 0.75] {
            assert!((phi0(b - 1e-12, 0.3) - phi0(b, 0.3)).abs() < 1e-3);
        }
    }

    #[test]
    fn f0_examples() {
        let sp = rough(0.7, 0.03, 2.0);
        assert_eq!(sp.tiles(), 4);
        assert_eq!(f0_eval(sp.anchor(4) + 0.01, &sp), 0.0);
        let plateau = 2.0 * (8.0 * 0.03f64).powf(0.7) * 0.25f64.powf(0.7);
        assert!((f0_eval(sp.anchor(1) + 4.8 * 0.03, &sp) - plateau).abs() < 1e-12);
        for i in 0..50 {
            let x = i as f64 * 0.0031;
            if x + 0.24 < sp.anchor(4) {
                assert!((f0_eval(x, &sp) - f0_eval(x + 0.24, &sp)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn psi0_and_g0_examples() {
        assert!((psi0(1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(psi0(0.0), 0.0);
        assert_eq!(psi0(2.0), 0.0);
        let sp = BaseFunctionSpec::new(BaseKind::Smooth, 2.0, 0.05, 1.0).unwrap();
        assert_eq!(g0_eval(0.05, &sp), 0.0);
        assert_eq!(g0_eval(0.95, &sp), 0.0);
        assert!((g0_eval(0.5, &sp) - (-1.0f64).exp()).abs() < 1e-15);
        assert!(g0_eval(0.4, &sp) < g0_eval(0.5, &sp));
    }

    #[test]
    fn spec_validation() {
        assert!(BaseFunctionSpec::new(BaseKind::Rough, 0.7, 1.0 / 16.0, 1.0).is_err());
        assert!(BaseFunctionSpec::new(BaseKind::Rough, 1.5, 0.01, 1.0).is_err());
        assert!(BaseFunctionSpec::new(BaseKind::Smooth, 0.5, 0.01, 1.0).is_err());
        assert!(BaseFunctionSpec::new(BaseKind::Rough, 0.7, 0.01, 0.0).is_err());
    }

    #[test]
    fn tiling_mass_matches_quadrature() {
        for r in [0.005, 0.01, 0.03] {
            let sp = rough(0.7, r, 1.3);
            let est = norm_estimate(&sp, 16384).unwrap();
            let exact = tiling_l2_sq(&sp);
            assert!((est.l2 * est.l2 - exact).abs() / exact < 0.01, "r={r}");
        }
    }

    #[test]
    fn amplitude_linearity() {
        for kind_s in [(BaseKind::Rough, 0.7), (BaseKind::Rough, 1.0), (BaseKind::Smooth, 1.5)] {
            let a = BaseFunctionSpec::new(kind_s.0, kind_s.1, 0.02, 1.0).unwrap();
            let b = a.with_amplitude(3.7);
            let na = norm_estimate(&a, 1024).unwrap();
            let nb = norm_estimate(&b, 1024).unwrap();
            for (x, y) in [(na.l2, nb.l2), (na.seminorm, nb.seminorm), (na.total, nb.total)] {
                assert!((3.7 * x - y).abs() <= 1e-10 * y.max(1e-300));
            }
        }
    }

    #[test]
    fn calibration_scales_with_budget() {
        let a = calibrate_bs(BaseKind::Rough, 0.7, 0.02, 1.0, 2048).unwrap();
        let b = calibrate_bs(BaseKind::Rough, 0.7, 0.02, 2.0, 2048).unwrap();
        assert!((b.amplitude / a.amplitude - 2.0).abs() < 1e-12);
        assert_eq!(a.method, NormMethod::Slobodeckij);
    }

    #[test]
    fn calibrated_norms_hold_under_refinement() {
        for r in [0.01, 0.05] {
            let cal = calibrate_bs(BaseKind::Rough, 0.7, r, 1.0, 4096).unwrap();
            let sp = rough(0.7, r, cal.amplitude);
            let fine = norm_estimate(&sp, 8192).unwrap();
            // the refined estimate includes more of the excluded diagonal
            let raw = (fine.l2 * fine.l2 + fine.seminorm * fine.seminorm).sqrt();
            assert!(raw <= 1.0, "r={r}: {raw}");
        }
    }

    #[test]
    fn smooth_amplitude_stable_across_r() {
        let amps: Vec<f64> = [0.002, 0.01, 0.03, 0.06]
            .iter()
            .map(|&r| calibrate_bs(BaseKind::Smooth, 2.0, r, 1.0, 4096).unwrap().amplitude)
            .collect();
        let (lo, hi) = amps.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &a| (lo.min(a), hi.max(a)));
        assert!(hi / lo <= 2.0, "{amps:?}");
    }
}
