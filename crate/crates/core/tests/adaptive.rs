use advrisk::adaptive::{
    adaptive_estimate, fit_krr_family, lepski_grid, lepski_select, pt_krr_estimate, sobolev_kernel, Quadrature,
};
use advrisk::adversarial::{adversarial_risk, BallScheme, ProbeStrategy};
use advrisk::data::gen_synthetic;
use advrisk::experiments::l2_risk;
use advrisk::flow::{FlowPredictor, SpectralFilter};
use advrisk::stats::log_log_slope;
use rayon::prelude::*;

#[test]
fn lepski_lands_near_the_oracle_scale() {
    let n = 512;
    let target = (n as f64).powf(2.0 / 3.0);
    let hits = (0..20u64)
        .into_par_iter()
        .filter(|&seed| {
            let data = gen_synthetic(n, 1, 0.3, seed).unwrap();
            let grid = lepski_grid(n, 1, 0.5, 1.0).unwrap();
            let (kernel, _) = sobolev_kernel(1.0, 1).unwrap();
            let family = fit_krr_family(&data, &grid, &kernel).unwrap();
            let sel = lepski_select(&family, Quadrature::Grid { resolution: 1024 }, 1.0).unwrap();
            sel.v / target <= 4.0 && target / sel.v <= 4.0
        })
        .count();
    // measured: 20 of 20
    assert!(hits >= 14, "{hits} of 20 runs within x4");
}

#[test]
fn adaptive_estimate_competes_with_oracle_ridge() {
    let n = 512;
    let r = 0.02;
    let data = gen_synthetic(n, 1, 0.3, 5).unwrap();
    let test = advrisk::experiments::synthetic_test_set(&data, 5).unwrap();
    let scheme = BallScheme::new(r, 64, ProbeStrategy::Grid1d, 0).unwrap();
    let adaptive = adaptive_estimate(&data, r, 0.5, 1.0, 1024).unwrap();
    let risk = adversarial_risk(&adaptive.output, &test, &scheme, 400).unwrap().mean;

    let (kernel, _) = sobolev_kernel(1.0, 1).unwrap();
    let flow = FlowPredictor::new(kernel, data.x.view(), data.y.view()).unwrap();
    let oracle = (0..24)
        .map(|k| 2f64.powf(k as f64 / 2.0))
        .map(|v| {
            let f = flow.at(SpectralFilter::Ridge(v)).unwrap();
            adversarial_risk(&f, &test, &scheme, 400).unwrap().mean
        })
        .fold(f64::INFINITY, f64::min);
    // measured: 0.0356 vs 0.0132
    assert!(risk <= 10.0 * oracle, "adaptive {risk} vs oracle {oracle}");
}

#[test]
fn pt_krr_l2_rate() {
    let ns: Vec<usize> = (6..=10).map(|k| 1usize << k).collect();
    let risks: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let per_seed: Vec<f64> = (0..20u64)
                .into_par_iter()
                .map(|seed| {
                    let data = gen_synthetic(n, 1, 0.3, seed).unwrap();
                    let fit = pt_krr_estimate(&data, 1.0, 10.0, 0.0, 1024).unwrap();
                    l2_risk(&fit.output, data.truth.as_ref().unwrap().as_fn(), 1024)
                })
                .collect();
            per_seed.iter().sum::<f64>() / per_seed.len() as f64
        })
        .collect();
    let nf: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = log_log_slope(&nf, &risks);
    // measured: -0.688
    assert!((slope + 2.0 / 3.0).abs() <= 0.15, "slope {slope}, risks {risks:?}");
}
