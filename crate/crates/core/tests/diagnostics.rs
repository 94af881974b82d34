use advrisk::data::gen_synthetic;
use advrisk::experiments::{lowerbound_curve, modulus_energies, separation_sample};
use advrisk::flow::{FlowPredictor, SpectralFilter};
use advrisk::kernels::KernelSpec;
use advrisk::spectral::{frequency_truncate, sobolev_norm, GridFunction};
use advrisk::stats::{linear_fit, log_log_slope};
use advrisk::theory::{finite_time_gap, gaussian_range_mc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn spread(v: &[f64]) -> f64 {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(0.0, f64::max);
    hi / lo
}

#[test]
fn modulus_energy_has_one_constant_across_radii() {
    let radii: Vec<f64> = (4..=8).map(|k| 2f64.powi(-k)).collect();
    for s in [0.7, 1.0, 1.5] {
        let e = modulus_energies(s, &radii, 1024, 10, 21).unwrap();
        let c = radii
            .iter()
            .zip(&e)
            .map(|(r, e)| e / r.powf(2.0 * s.min(1.0)))
            .fold(0.0, f64::max);
        assert!(c <= 50.0, "s={s}: C={c}");
        assert!(log_log_slope(&radii, &e) >= 2.0 * s.min(1.0) - 0.3);
    }
}

/// Unit-`H^s` sample whose weighted coefficients decay like
/// `k^{-1/2} / log(k+1)`, about as rough as `H^s` allows.
fn critical_sample(res: usize, s: f64, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef: Vec<f64> = (0..res)
        .map(|k| {
            let xi = std::f64::consts::PI * k as f64;
            let z: f64 = rng.sample(StandardNormal);
            let kf = k as f64 + 1.0;
            z * (1.0 + xi * xi).powf(-s / 2.0) / (kf.sqrt() * (kf + 1.0).ln())
        })
        .collect();
    let g = GridFunction::from_coefficients(1, res, coef).unwrap();
    let norm = sobolev_norm(&g, s).unwrap();
    g.scaled(1.0 / norm)
}

#[test]
fn truncated_function_variation_bound() {
    let radii = [0.01, 0.02, 0.05, 0.1];
    for s in [0.7, 1.0] {
        let big_r = 2.0;
        let samples: Vec<GridFunction> = (0..20).map(|i| critical_sample(1024, s, 33 + i).scaled(big_r)).collect();
        assert!((sobolev_norm(&samples[0], s).unwrap() - big_r).abs() < 1e-9);
        let c: Vec<f64> = radii
            .iter()
            .map(|&r| {
                let mean_energy = samples
                    .iter()
                    .map(|f| {
                        let g = frequency_truncate(f, r).unwrap();
                        assert!(g.resolved);
                        g.function.local_variation_energy(r).unwrap()
                    })
                    .sum::<f64>()
                    / samples.len() as f64;
                mean_energy / (big_r * big_r * r.powf(2.0 * s.min(1.0)))
            })
            .collect();
        // measured spread: x1.13 at s=0.7, x1.86 at s=1
        assert!(spread(&c) <= 4.0, "s={s}: {c:?}");
    }
}

#[test]
fn lower_bound_oscillation_scales_like_r_to_the_s() {
    for s in [0.7, 1.0] {
        let pts = lowerbound_curve(s, &[0.005, 0.01, 0.02, 0.05], 1.0, 4000).unwrap();
        let ratios: Vec<f64> = pts.iter().map(|p| p.ratio).collect();
        assert!(ratios.iter().all(|&c| c > 0.0));
        assert!(spread(&ratios) <= 3.0, "s={s}: {ratios:?}");
    }
}

#[test]
fn ntk_eigenvalue_tracks_separation() {
    let stats = separation_sample(&KernelSpec::ntk(2).unwrap(), 50, 1, 100, 5).unwrap();
    let lq: Vec<f64> = stats.iter().map(|s| s.q_x.ln()).collect();
    let ll: Vec<f64> = stats.iter().map(|s| s.lambda_min.ln()).collect();
    let (slope, _) = linear_fit(&lq, &ll);
    assert!((slope - 1.0).abs() <= 0.2, "slope {slope}");
}

#[test]
fn gaussian_range_grows_with_sample_count() {
    let est: Vec<_> = [2usize, 8, 32, 128]
        .iter()
        .map(|&k| gaussian_range_mc(k, 1.0, 0.5, 4000, 17).unwrap())
        .collect();
    for w in est.windows(2) {
        assert!(w[1].mean + 3.0 * w[1].std_error >= w[0].mean - 3.0 * w[0].std_error);
    }
}

#[test]
fn flow_reaches_interpolant() {
    let data = gen_synthetic(40, 1, 0.3, 9).unwrap();
    let flow = FlowPredictor::new(KernelSpec::ntk(2).unwrap(), data.x.view(), data.y.view()).unwrap();
    let gaps: Vec<f64> = [1e1, 1e3, 1e5, 1e9]
        .iter()
        .map(|&t| finite_time_gap(&flow, t, 256).unwrap())
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] <= w[0]), "{gaps:?}");
    assert!(gaps[3] < 1e-6);
}

#[test]
fn ridge_and_flow_residuals_are_comparable() {
    for seed in 0..10u64 {
        let data = gen_synthetic(30, 1, 0.3, seed).unwrap();
        let flow = FlowPredictor::new(KernelSpec::ntk(2).unwrap(), data.x.view(), data.y.view()).unwrap();
        for t in [1.0, 10.0, 100.0] {
            let a = flow.training_residual(SpectralFilter::Flow(t)).unwrap();
            let b = flow.training_residual(SpectralFilter::Ridge(t)).unwrap();
            assert!(a / b <= 3.0 && b / a <= 3.0, "seed {seed}, t {t}: {a} vs {b}");
        }
    }
}
