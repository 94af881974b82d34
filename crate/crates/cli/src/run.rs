//! One runner per subcommand. Cells (seed, n, r, ...) run in parallel; rows
//! from successful cells are kept even when another cell fails.

use advrisk::adaptive::{fit_krr_family, lepski_grid, lepski_select, pt_krr_estimate, sobolev_kernel, Quadrature};
use advrisk::adversarial::{BallScheme, ProbeSet, SmoothedPredictor, TestSet};
use advrisk::data::{gen_synthetic, load_diabetes, split, Dataset};
use advrisk::experiments::{
    early_stopped_l2_risk, flow_risk_curve, interpolant_ga_sq, l2_risk, lowerbound_curve, separation_sample,
};
use advrisk::flow::{geometric_time_grid, optimal_stop_time, FlowPredictor, SpectralFilter};
use advrisk::kernels::gram;
use advrisk::seed;
use advrisk::spectral::cell_centers;
use advrisk::stats::{linear_fit, log_log_slope, mean_and_se, pearson};
use advrisk::theory::{exp_moment_bound, exp_moment_mc, finite_time_gap, gaussian_range_mc, min_separation};
use advrisk::widenet::{init_mirrored, ntk_deviation, train_full_batch_gd};
use ndarray::{Array1, Array2};
use rand::Rng as _;
use rayon::prelude::*;

use crate::config::{Experiment, Settings};
use crate::output::{Curve, Row};
use crate::CliError;

pub struct RunOutput {
    pub curves: Vec<Curve>,
    /// Human-readable fit summaries, printed to stdout.
    pub summary: Vec<String>,
    /// First failing cell, if any; curves then hold the rows that did finish.
    pub error: Option<CliError>,
}

impl RunOutput {
    fn new(curves: Vec<Curve>, summary: Vec<String>, error: Option<CliError>) -> Self {
        RunOutput { curves, summary, error }
    }
}

type CellResult<T> = Result<T, CliError>;

/// Run `f` over `cells` in parallel, splitting successes from the first error.
fn run_cells<C: Sync, T: Send>(cells: &[C], f: impl Fn(&C) -> CellResult<T> + Sync + Send) -> (Vec<T>, Option<CliError>) {
    let results: Vec<CellResult<T>> = cells.par_iter().map(f).collect();
    let mut ok = Vec::new();
    let mut err = None;
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                if err.is_none() {
                    err = Some(e);
                }
            }
        }
    }
    (ok, err)
}

fn grid_of<A: Copy, B: Copy>(a: &[A], b: &[B]) -> Vec<(A, B)> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).collect()
}

fn require_1d(s: &Settings) -> Result<(), CliError> {
    if s.d != 1 {
        return Err(CliError::Config(format!("`{}` is defined for d = 1 only", s.experiment)));
    }
    Ok(())
}

pub fn run(experiment: Experiment, s: &Settings) -> Result<RunOutput, CliError> {
    match experiment {
        Experiment::KernelCheck => kernel_check(s),
        Experiment::FlowSweep => flow_sweep(s),
        Experiment::InterpolantDivergence => interpolant_divergence(s),
        Experiment::RateSweep => rate_sweep(s),
        Experiment::Lepski => lepski(s),
        Experiment::PtKrr => pt_krr(s),
        Experiment::Smooth => smooth(s),
        Experiment::Lowerbound => lowerbound(s),
        Experiment::TheorySuite => theory_suite(s),
        Experiment::Widenet => widenet(s),
    }
}

fn uniform_design(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = seed::rng(seed);
    Array2::from_shape_simple_fn((n, d), || rng.gen::<f64>())
}

fn kernel_check(s: &Settings) -> Result<RunOutput, CliError> {
    let cells = grid_of(&s.n, &s.seeds);
    let (rows, err) = run_cells(&cells, |&(n, sd)| {
        let spec = s.kernel_spec(n, s.d)?;
        let x = uniform_design(n, s.d, sd);
        let g = gram(&spec, x.view())?;
        let asym = g
            .matrix
            .indexed_iter()
            .fold(0.0f64, |m, ((i, j), v)| m.max((v - g.matrix[[j, i]]).abs()));
        let q = min_separation(x.view())?;
        Ok((
            Row { n: Some(n), risk_mean: g.lambda_min() - g.jitter, seed: sd, ..Default::default() },
            Row { n: Some(n), risk_mean: q.value, seed: sd, ..Default::default() },
            asym,
        ))
    });
    let worst = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let mut lam = Curve::new("kernel_lambda_min", "smallest Gram eigenvalue before jitter")
        .note(format!("kernel: {}", s.kernel));
    let mut sep = Curve::new("kernel_separation", "minimum pairwise distance q_X of the design");
    for (a, b, _) in rows {
        lam.rows.push(a);
        sep.rows.push(b);
    }
    let summary = vec![format!("max |K - K^T| = {worst:e}")];
    Ok(RunOutput::new(vec![lam, sep], summary, err))
}

/// Training data plus a test source for one (n, seed) cell.
struct Problem {
    train: Dataset,
    held_out: Option<(Array2<f64>, Array1<f64>)>,
}

impl Problem {
    fn build(s: &Settings, real: Option<&Dataset>, n: usize, sd: u64) -> CellResult<Problem> {
        match real {
            None => Ok(Problem { train: gen_synthetic(n, s.d, s.sigma, sd)?, held_out: None }),
            Some(data) => {
                let (train, test) = split(data, s.test_fraction, sd)?;
                Ok(Problem { train, held_out: Some((test.x, test.y)) })
            }
        }
    }

    fn test_set(&self, sd: u64) -> CellResult<(TestSet<'_>, usize)> {
        match &self.held_out {
            Some((x, y)) => Ok((TestSet::HeldOut { x: x.view(), y: y.view() }, x.nrows())),
            None => Ok((advrisk::experiments::synthetic_test_set(&self.train, sd)?, usize::MAX)),
        }
    }

    fn probes(&self, s: &Settings, r: f64, sd: u64) -> CellResult<ProbeSet> {
        let (test, avail) = self.test_set(sd)?;
        let mut scheme = BallScheme::for_dimension(self.train.dim(), r, seed::mix(sd, 2))?.with_domain(self.train.domain());
        if s.probes > 0 {
            scheme = scheme.with_probe_count(s.probes);
        }
        let (x, refs) = test.draw(s.test_points.min(avail))?;
        Ok(ProbeSet::build(x.view(), &refs, &scheme, s.anchors.then(|| self.train.x.view()))?)
    }
}

fn real_data(s: &Settings) -> Result<Option<Dataset>, CliError> {
    if s.dataset == "synthetic" {
        Ok(None)
    } else {
        Ok(Some(load_diabetes(&s.dataset)?))
    }
}

fn flow_sweep(s: &Settings) -> Result<RunOutput, CliError> {
    let real = real_data(s)?;
    let times = geometric_time_grid(s.t0, s.growth, s.t_end)?;
    let ns = if real.is_some() { vec![0] } else { s.n.clone() };
    let cells = grid_of(&ns, &s.seeds);
    let (rows, err) = run_cells(&cells, |&(n, sd)| {
        let p = Problem::build(s, real.as_ref(), n, sd)?;
        let n_train = p.train.n();
        let flow = FlowPredictor::new(s.kernel_spec(n_train, p.train.dim())?, p.train.x.view(), p.train.y.view())?;
        let mut out = Vec::new();
        for &r in &s.radii {
            let probes = p.probes(s, r, sd)?;
            let curve = flow_risk_curve(&flow, &probes, &times, true)?;
            let at = |t: f64, est: advrisk::RiskEstimate| Row {
                n: Some(n_train),
                r: Some(r),
                t: Some(t),
                risk_mean: est.mean,
                risk_se: Some(est.std_error),
                seed: sd,
                ..Default::default()
            };
            out.extend(curve.times.iter().zip(&curve.risks).map(|(&t, &e)| at(t, e)));
            out.push(at(f64::INFINITY, curve.interpolant.expect("requested")));
        }
        Ok(out)
    });
    let mut curve = Curve::new("flow_sweep", "adversarial risk along gradient-flow time")
        .note("t = inf rows are the minimum-norm interpolant")
        .note(format!("kernel: {}; dataset: {}", s.kernel, s.dataset));
    curve.rows = rows.into_iter().flatten().collect();
    let mut summary = Vec::new();
    for &r in &s.radii {
        let sel: Vec<&Row> = curve.rows.iter().filter(|w| w.r == Some(r)).collect();
        let mean_at = |pred: &dyn Fn(f64) -> bool| {
            let v: Vec<f64> = sel.iter().filter(|w| pred(w.t.unwrap())).map(|w| w.risk_mean).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        let best = times
            .iter()
            .filter_map(|&t| mean_at(&|x| x == t).map(|m| (t, m)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let (Some((t, m)), Some(inf)) = (best, mean_at(&|x| x.is_infinite())) {
            summary.push(format!("r={r}: min mean risk {m:.4} at t={t:.3e}; interpolant {inf:.4}"));
        }
    }
    Ok(RunOutput::new(vec![curve], summary, err))
}

fn interpolant_divergence(s: &Settings) -> Result<RunOutput, CliError> {
    require_1d(s)?;
    let cells = grid_of(&s.n, &s.seeds);
    let (rows, err) = run_cells(&cells, |&(n, sd)| {
        let spec = s.kernel_spec(n, s.d)?;
        let g = interpolant_ga_sq(&spec, n, s.sigma, s.grid_res, sd)?;
        Ok(Row { n: Some(n), r: Some((n as f64).powf(-0.5)), risk_mean: g, seed: sd, ..Default::default() })
    });
    let mut curve = Curve::new("interpolant_divergence", "estimated G_A^2 of the interpolant at r = n^(-1/2)")
        .note(format!("kernel: {}", s.kernel));
    curve.rows = rows;
    let mut summary = Vec::new();
    let (x, y) = per_n_means(&curve.rows, &s.n);
    if x.len() >= 2 {
        let lx: Vec<f64> = x.iter().map(|n| (n * n.powf(-0.5)).ln()).collect();
        summary.push(format!(
            "G_A^2 vs log(n r_n): slope {:.4}, correlation {:.3}",
            linear_fit(&lx, &y).0,
            pearson(&lx, &y)
        ));
    } else {
        curve = curve.note("fit skipped: fewer than two sample sizes");
    }
    Ok(RunOutput::new(vec![curve], summary, err))
}

fn per_n_means(rows: &[Row], ns: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for &n in ns {
        let v: Vec<f64> = rows.iter().filter(|r| r.n == Some(n)).map(|r| r.risk_mean).collect();
        if !v.is_empty() {
            x.push(n as f64);
            y.push(v.iter().sum::<f64>() / v.len() as f64);
        }
    }
    (x, y)
}

fn slope_summary(curve: &mut Curve, ns: &[usize], label: &str) -> Vec<String> {
    let (x, y) = per_n_means(&curve.rows, ns);
    if x.len() >= 2 {
        vec![format!("{label}: log-log slope {:.3} over n = {:?}", log_log_slope(&x, &y), ns)]
    } else {
        curve.notes.push("fit skipped: fewer than two sample sizes".into());
        Vec::new()
    }
}

fn rate_sweep(s: &Settings) -> Result<RunOutput, CliError> {
    require_1d(s)?;
    let cells = grid_of(&s.n, &s.seeds);
    let (rows, err) = run_cells(&cells, |&(n, sd)| {
        let spec = s.kernel_spec(n, s.d)?;
        let risk = early_stopped_l2_risk(&spec, s.s, n, s.sigma, sd)?;
        Ok(Row { n: Some(n), t: Some(optimal_stop_time(n, s.s, 1)?), risk_mean: risk, seed: sd, ..Default::default() })
    });
    let mut curve = Curve::new("rate_sweep", "L2 risk of the flow stopped at t* = n^(2/(2s+1))")
        .note(format!("kernel: {}; s = {}", s.kernel, s.s));
    curve.rows = rows;
    let summary = slope_summary(&mut curve, &s.n, "L2 risk at t*");
    Ok(RunOutput::new(vec![curve], summary, err))
}

fn lepski(s: &Settings) -> Result<RunOutput, CliError> {
    require_1d(s)?;
    let cells = grid_of(&s.n, &s.seeds);
    let (rows, err) = run_cells(&cells, |&(n, sd)| {
        let data = gen_synthetic(n, 1, s.sigma, sd)?;
        let grid = lepski_grid(n, 1, s.s_min, s.s_max)?;
        let (kernel, _) = sobolev_kernel(s.s_max, 1)?;
        let family = fit_krr_family(&data, &grid, &kernel)?;
        let sel = lepski_select(&family, Quadrature::Grid { resolution: s.grid_res }, s.threshold_scale)?;
        let risk = l2_risk(&family.members[sel.index], data.truth.as_ref().expect("synthetic").as_fn(), s.grid_res);
        Ok((Row { n: Some(n), v: Some(sel.v), risk_mean: risk, seed: sd, ..Default::default() }, sel.fallback))
    });
    let fallbacks = rows.iter().filter(|r| r.1).count();
    let mut curve = Curve::new("lepski", "L2 risk of the Lepski-selected ridge fit")
        .note(format!("s_min = {}, s_max = {}, threshold scale = {}", s.s_min, s.s_max, s.threshold_scale));
    curve.rows = rows.into_iter().map(|r| r.0).collect();
    let mut summary = slope_summary(&mut curve, &s.n, "selected-fit L2 risk");
    summary.push(format!("{fallbacks} of {} runs fell back to the largest v", curve.rows.len()));
    Ok(RunOutput::new(vec![curve], summary, err))
}

fn pt_krr(s: &Settings) -> Result<RunOutput, CliError> {
    require_1d(s)?;
    let cells: Vec<(usize, f64, u64)> = grid_of(&s.n, &s.radii)
        .into_iter()
        .flat_map(|(n, r)| s.seeds.iter().map(move |&sd| (n, r, sd)))
        .collect();
    let (rows, err) = run_cells(&cells, |&(n, r, sd)| {
        let data = gen_synthetic(n, 1, s.sigma, sd)?;
        let fit = pt_krr_estimate(&data, s.s, s.ball_radius, r, s.grid_res)?;
        let risk = l2_risk(&fit.output, data.truth.as_ref().expect("synthetic").as_fn(), s.grid_res);
        Ok(Row { n: Some(n), r: Some(r), v: Some(fit.v), risk_mean: risk, seed: sd, ..Default::default() })
    });
    let mut curve = Curve::new("pt_krr", "L2 risk of the projected (and truncated) ridge estimate")
        .note(format!("s = {}, ball radius = {}", s.s, s.ball_radius));
    curve.rows = rows;
    let summary = slope_summary(&mut curve, &s.n, "PT-KRR L2 risk");
    Ok(RunOutput::new(vec![curve], summary, err))
}

fn smooth(s: &Settings) -> Result<RunOutput, CliError> {
    let real = real_data(s)?;
    let ns = if real.is_some() { vec![0] } else { s.n.clone() };
    let cells: Vec<(usize, f64, u64)> = grid_of(&ns, &s.radii)
        .into_iter()
        .flat_map(|(n, r)| s.seeds.iter().map(move |&sd| (n, r, sd)))
        .collect();
    let (rows, err) = run_cells(&cells, |&(n, r, sd)| {
        let p = Problem::build(s, real.as_ref(), n, sd)?;
        let n_train = p.train.n();
        let f = FlowPredictor::new(s.kernel_spec(n_train, p.train.dim())?, p.train.x.view(), p.train.y.view())?
            .at(SpectralFilter::Interpolant)?;
        let probes = p.probes(s, r, sd)?;
        let plain = probes.risk(&probes.evaluate(&f));
        let smoothed = SmoothedPredictor::new(&f, s.smoothing_std, s.trim, s.samples, sd)?.with_domain(p.train.domain());
        let smooth = probes.risk(&probes.evaluate(&smoothed));
        let row = |e: advrisk::RiskEstimate| Row {
            n: Some(n_train),
            r: Some(r),
            risk_mean: e.mean,
            risk_se: Some(e.std_error),
            seed: sd,
            ..Default::default()
        };
        Ok((row(plain), row(smooth)))
    });
    let mut base = Curve::new("smooth_base", "adversarial risk of the interpolant");
    let mut sm = Curve::new("smooth_trimmed", "adversarial risk of the trimmed smoothed interpolant").note(format!(
        "noise std = {}, trim = {}, samples = {}",
        s.smoothing_std, s.trim, s.samples
    ));
    for (a, b) in rows {
        base.rows.push(a);
        sm.rows.push(b);
    }
    let mean = |c: &Curve| c.rows.iter().map(|r| r.risk_mean).sum::<f64>() / c.rows.len().max(1) as f64;
    let summary = vec![format!("mean risk: interpolant {:.4}, smoothed {:.4}", mean(&base), mean(&sm))];
    Ok(RunOutput::new(vec![base, sm], summary, err))
}

fn lowerbound(s: &Settings) -> Result<RunOutput, CliError> {
    let pts = lowerbound_curve(s.s, &s.radii, s.ball_radius, s.grid_res)?;
    let sd = s.seeds[0];
    let mut ga = Curve::new("lowerbound_ga", "G_A of the calibrated base function")
        .note(format!("s = {}, norm budget = {}", s.s, s.ball_radius));
    let mut ratio = Curve::new("lowerbound_ratio", "G_A / r^min(1,s)");
    let mut amp = Curve::new("lowerbound_amplitude", "calibrated amplitude");
    for p in &pts {
        ga.rows.push(Row { r: Some(p.r), risk_mean: p.ga, seed: sd, ..Default::default() });
        ratio.rows.push(Row { r: Some(p.r), risk_mean: p.ratio, seed: sd, ..Default::default() });
        amp.rows.push(Row { r: Some(p.r), risk_mean: p.amplitude, seed: sd, ..Default::default() });
    }
    let lo = pts.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.ratio).fold(0.0, f64::max);
    let summary = vec![format!("G_A / r^min(1,s) in [{lo:.4}, {hi:.4}], spread x{:.2}", hi / lo)];
    Ok(RunOutput::new(vec![ga, ratio, amp], summary, None))
}

fn theory_suite(s: &Settings) -> Result<RunOutput, CliError> {
    let sd = s.seeds[0];
    let times = [1e2, 1e3, 1e4];
    let cells = grid_of(&s.n, &times);
    let (mc, err1) = run_cells(&cells, |&(n, t)| {
        let e = exp_moment_mc(n, t, s.d, s.trials, seed::mix(sd, n as u64))?;
        let b = exp_moment_bound(n, t, s.d)?;
        Ok((
            Row { n: Some(n), t: Some(t), risk_mean: e.mean, risk_se: Some(e.std_error), seed: sd, ..Default::default() },
            Row { n: Some(n), t: Some(t), risk_mean: b, seed: sd, ..Default::default() },
        ))
    });
    let mut mc_curve = Curve::new("theory_exp_moment_mc", "Monte-Carlo E exp(-t q_X)");
    let mut bound_curve = Curve::new("theory_exp_moment_bound", "closed-form bound on E exp(-t q_X)");
    let mut summary = Vec::new();
    for (a, b) in mc {
        summary.push(format!(
            "n={} t={:e}: MC {:.4} {} bound {:.4}",
            a.n.unwrap(),
            a.t.unwrap(),
            a.risk_mean,
            if a.risk_mean <= b.risk_mean { "<=" } else { ">" },
            b.risk_mean
        ));
        mc_curve.rows.push(a);
        bound_curve.rows.push(b);
    }

    let mut sep = Curve::new("theory_separation", "smallest Gram eigenvalue / q_X per design (seed = design index)")
        .note(format!("kernel: {}", s.kernel));
    let mut err2 = None;
    for &n in &s.n {
        match s.kernel_spec(n, s.d).and_then(|spec| Ok(separation_sample(&spec, n.max(2), s.d, 100, sd)?)) {
            Ok(stats) => {
                let lq: Vec<f64> = stats.iter().map(|x| x.q_x.ln()).collect();
                let ll: Vec<f64> = stats.iter().map(|x| x.lambda_min.ln()).collect();
                summary.push(format!("n={n}: log lambda_min vs log q_X slope {:.3}", linear_fit(&lq, &ll).0));
                sep.rows.extend(stats.iter().enumerate().map(|(i, x)| Row {
                    n: Some(n),
                    risk_mean: x.ratio,
                    seed: i as u64,
                    ..Default::default()
                }));
            }
            Err(e) => {
                err2.get_or_insert(e);
            }
        }
    }

    let ks = [2usize, 8, 32, 128, 512];
    let (ranges, err3) = run_cells(&ks, |&k| {
        let e = gaussian_range_mc(k, s.sigma.max(f64::MIN_POSITIVE), 0.0, s.trials.max(1000), seed::mix(sd, k as u64))?;
        Ok(Row { n: Some(k), risk_mean: e.mean, risk_se: Some(e.std_error), seed: sd, ..Default::default() })
    });
    let mut range = Curve::new("theory_gaussian_range", "E (max Z - min Z)^2 over k draws (n = k)");
    range.rows = ranges;

    let mut gap = Curve::new("theory_finite_time_gap", "max over a 1D grid of |f_t - f_inf|");
    let mut err4 = None;
    if s.d == 1 {
        let cells = grid_of(&s.n, &s.seeds);
        let (rows, e) = run_cells(&cells, |&(n, sd)| {
            let data = gen_synthetic(n.max(2), 1, s.sigma, sd)?;
            let flow = FlowPredictor::new(s.kernel_spec(n, s.d)?, data.x.view(), data.y.view())?;
            geometric_time_grid(1.0, 10.0, 1e8)?
                .into_iter()
                .map(|t| {
                    Ok(Row {
                        n: Some(n),
                        t: Some(t),
                        risk_mean: finite_time_gap(&flow, t, s.grid_res)?,
                        seed: sd,
                        ..Default::default()
                    })
                })
                .collect::<CellResult<Vec<_>>>()
        });
        gap.rows = rows.into_iter().flatten().collect();
        err4 = e;
    }
    let err = err1.or(err2).or(err3).or(err4);
    Ok(RunOutput::new(vec![mc_curve, bound_curve, sep, range, gap], summary, err))
}

fn widenet(s: &Settings) -> Result<RunOutput, CliError> {
    let n = s.n[0];
    let cells = grid_of(&s.widths, &s.seeds);
    let (rows, err) = run_cells(&cells, |&(m, sd)| {
        let data = gen_synthetic(n, s.d, s.sigma, sd)?;
        let flow = FlowPredictor::new(advrisk::KernelSpec::ntk(s.depth)?, data.x.view(), data.y.view())?;
        let net = init_mirrored(s.d, &vec![m; s.depth], seed::mix(sd, m as u64))?;
        let trace = train_full_batch_gd(&net, &data, s.lr, s.steps)?;
        let eval = if s.d == 1 {
            cell_centers(1, s.grid_res.min(256))
        } else {
            uniform_design(256, s.d, seed::mix(sd, 7))
        };
        let dev = ntk_deviation(&trace, &flow, eval.view())?;
        let gaps: Vec<Row> = dev
            .into_iter()
            .map(|(t, g)| Row { n: Some(m), t: Some(t), risk_mean: g, seed: sd, ..Default::default() })
            .collect();
        let losses: Vec<Row> = trace
            .records
            .iter()
            .map(|r| Row { n: Some(m), t: Some(r.time), risk_mean: r.loss, seed: sd, ..Default::default() })
            .collect();
        Ok((gaps, losses, trace.diverged))
    });
    let mut gap = Curve::new("widenet_ntk_gap", "sup over the grid of |kernel flow - network| (n column = width)")
        .note(format!("training size {n}; depth {}; lr {}; steps {}", s.depth, s.lr, s.steps));
    let mut loss = Curve::new("widenet_loss", "training loss (n column = width)");
    let mut diverged = 0;
    for (g, l, d) in rows {
        gap.rows.extend(g);
        loss.rows.extend(l);
        diverged += usize::from(d);
    }
    let mut summary = Vec::new();
    for &m in &s.widths {
        let last: Vec<f64> = s
            .seeds
            .iter()
            .filter_map(|&sd| {
                gap.rows
                    .iter()
                    .filter(|r| r.n == Some(m) && r.seed == sd)
                    .max_by(|a, b| a.t.unwrap().total_cmp(&b.t.unwrap()))
                    .map(|r| r.risk_mean)
            })
            .collect();
        if !last.is_empty() {
            let (mean, se) = mean_and_se(&last);
            summary.push(format!("width {m}: terminal gap {mean:.4} (se {se:.4})"));
        }
    }
    if diverged > 0 {
        summary.push(format!("{diverged} runs diverged; their traces stop at the last finite loss"));
    }
    Ok(RunOutput::new(vec![gap, loss], summary, err))
}
