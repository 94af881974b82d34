use advrisk::data::gen_synthetic;
use advrisk::flow::FlowPredictor;
use advrisk::kernels::KernelSpec;
use advrisk::spectral::cell_centers;
use advrisk::stats::median;
use advrisk::widenet::{init_mirrored, ntk_deviation, train_full_batch_gd, train_recording};
use rayon::prelude::*;

#[test]
fn wide_net_loss_is_monotone_for_small_steps() {
    let data = gen_synthetic(10, 1, 0.3, 4).unwrap();
    let p = init_mirrored(1, &[4096], 4).unwrap();
    for lr in [1e-2, 5e-3, 1e-3] {
        let trace = train_recording(&p, &data, lr, &(0..=300).collect::<Vec<_>>(), false).unwrap();
        assert!(!trace.diverged);
        let losses: Vec<f64> = trace.records.iter().map(|r| r.loss).collect();
        assert!(losses.windows(2).all(|w| w[1] <= w[0]), "lr {lr}");
        assert!(losses.last().unwrap() < &losses[0]);
    }
}

fn terminal_gap(width: usize, seed: u64) -> f64 {
    let data = gen_synthetic(10, 1, 0.3, seed).unwrap();
    let flow = FlowPredictor::new(KernelSpec::ntk(1).unwrap(), data.x.view(), data.y.view()).unwrap();
    let p = init_mirrored(1, &[width], seed).unwrap();
    let trace = train_full_batch_gd(&p, &data, 1e-2, 1000).unwrap();
    let grid = cell_centers(1, 64);
    ntk_deviation(&trace, &flow, grid.view()).unwrap().last().unwrap().1
}

#[test]
fn kernel_regime_tightens_with_width() {
    let medians: Vec<f64> = [256usize, 1024, 4096]
        .iter()
        .map(|&m| {
            let gaps: Vec<f64> = (0..5u64).into_par_iter().map(|s| terminal_gap(m, s)).collect();
            median(&gaps)
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[1] <= w[0]), "{medians:?}");
}

#[test]
fn deviation_curve_is_stable_under_step_refinement() {
    let data = gen_synthetic(10, 1, 0.3, 8).unwrap();
    let flow = FlowPredictor::new(KernelSpec::ntk(1).unwrap(), data.x.view(), data.y.view()).unwrap();
    let p = init_mirrored(1, &[1024], 8).unwrap();
    let grid = cell_centers(1, 64);
    let coarse_steps: Vec<usize> = (0..=10).map(|k| 100 * k).collect();
    let fine_steps: Vec<usize> = coarse_steps.iter().map(|s| 2 * s).collect();
    let coarse = train_recording(&p, &data, 2e-2, &coarse_steps, true).unwrap();
    let fine = train_recording(&p, &data, 1e-2, &fine_steps, true).unwrap();
    let a = ntk_deviation(&coarse, &flow, grid.view()).unwrap();
    let b = ntk_deviation(&fine, &flow, grid.view()).unwrap();
    for ((ta, ga), (tb, gb)) in a.iter().zip(&b).skip(1) {
        assert!((ta - tb).abs() < 1e-12);
        assert!(ga / gb <= 2.0 && gb / ga <= 2.0, "t={ta}: {ga} vs {gb}");
    }
}
