//! Finite-width mirrored ReLU networks trained by full-batch gradient descent.
//!
//! Each parity `p ∈ {1,2}` is a depth-`L` network
//!
//! ```text
//! α¹ = √(2/m₁) σ(A x + b⁰),   αˡ = √(2/m_l) σ(Wˡ αˡ⁻¹),   g = w·αᴸ + b
//! ```
//!
//! and the output is `f = (√2/2)(g¹ − g²)`. Parity 2 starts as a bitwise copy
//! of parity 1, so `f ≡ 0` at initialization.
//!
//! Parameters are stored flat: parity 1 then parity 2, each laid out as `A`
//! (row-major `m₁ × d`), `b⁰`, `W²..Wᴸ` (row-major `m_l × m_{l−1}`), `w`, `b`.

use ndarray::{Array1, ArrayView2, Axis};
use rand_distr::StandardNormal;
use rand::Rng as _;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{domain, Error, Result};
use crate::flow::{FlowPredictor, SpectralFilter};
use crate::predictor::Predictor;
use crate::seed;

const SNAPSHOT_MAGIC: &[u8; 8] = b"ADVNET01";

#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    d: usize,
    widths: Vec<usize>,
    seed: u64,
    theta: Vec<f64>,
}

/// Offsets of each block inside one parity.
#[derive(Debug, Clone)]
struct Layout {
    a: usize,
    b0: usize,
    hidden: Vec<usize>,
    w_out: usize,
    b_out: usize,
    per_parity: usize,
}

fn layout(d: usize, widths: &[usize]) -> Layout {
    let m1 = widths[0];
    let a = 0;
    let b0 = m1 * d;
    let mut next = b0 + m1;
    let mut hidden = Vec::with_capacity(widths.len() - 1);
    for l in 1..widths.len() {
        hidden.push(next);
        next += widths[l] * widths[l - 1];
    }
    let w_out = next;
    let b_out = w_out + widths[widths.len() - 1];
    Layout {
        a,
        b0,
        hidden,
        w_out,
        b_out,
        per_parity: b_out + 1,
    }
}

/// Check `max width ≤ c_width · min width`.
pub fn check_width_ratio(widths: &[usize], c_width: f64) -> Result<()> {
    let lo = widths.iter().copied().min().unwrap_or(0) as f64;
    let hi = widths.iter().copied().max().unwrap_or(0) as f64;
    if hi > c_width * lo {
        return Err(domain(format!(
            "width ratio {} exceeds the configured bound {c_width}",
            hi / lo
        )));
    }
    Ok(())
}

/// Parity-1 entries i.i.d. `N(0,1)` from the seeded stream; parity 2 is a copy.
pub fn init_mirrored(d: usize, widths: &[usize], seed: u64) -> Result<NetParams> {
    if d == 0 || widths.is_empty() || widths.contains(&0) {
        return Err(domain("network needs d >= 1 and at least one positive width"));
    }
    let lay = layout(d, widths);
    let mut rng = seed::rng(seed);
    let mut theta = Vec::with_capacity(2 * lay.per_parity);
    theta.extend((0..lay.per_parity).map(|_| rng.sample::<f64, _>(StandardNormal)));
    theta.extend_from_within(..lay.per_parity);
    Ok(NetParams {
        d,
        widths: widths.to_vec(),
        seed,
        theta,
    })
}

/// Forward pass of one parity, keeping pre-activations for backprop.
struct Tape {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    g: f64,
}

impl NetParams {
    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params_per_parity(&self) -> usize {
        self.theta.len() / 2
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn parity(&self, p: usize) -> &[f64] {
        let n = self.params_per_parity();
        &self.theta[p * n..(p + 1) * n]
    }

    pub fn parity_mut(&mut self, p: usize) -> &mut [f64] {
        let n = self.params_per_parity();
        &mut self.theta[p * n..(p + 1) * n]
    }

    fn tape(&self, theta: &[f64], lay: &Layout, x: &[f64]) -> Tape {
        let m1 = self.widths[0];
        let mut pre = Vec::with_capacity(self.depth());
        let mut post = Vec::with_capacity(self.depth());
        let z1: Vec<f64> = (0..m1)
            .map(|i| {
                let row = &theta[lay.a + i * self.d..lay.a + (i + 1) * self.d];
                row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + theta[lay.b0 + i]
            })
            .collect();
        let c = (2.0 / m1 as f64).sqrt();
        post.push(z1.iter().map(|z| c * z.max(0.0)).collect::<Vec<_>>());
        pre.push(z1);
        for l in 1..self.depth() {
            let (m, prev) = (self.widths[l], self.widths[l - 1]);
            let base = lay.hidden[l - 1];
            let input = &post[l - 1];
            let z: Vec<f64> = (0..m)
                .map(|i| {
                    theta[base + i * prev..base + (i + 1) * prev]
                        .iter()
                        .zip(input)
                        .map(|(w, v)| w * v)
                        .sum()
                })
                .collect();
            let c = (2.0 / m as f64).sqrt();
            post.push(z.iter().map(|v| c * v.max(0.0)).collect());
            pre.push(z);
        }
        let last = &post[self.depth() - 1];
        let g = theta[lay.w_out..lay.b_out]
            .iter()
            .zip(last)
            .map(|(w, a)| w * a)
            .sum::<f64>()
            + theta[lay.b_out];
        Tape { pre, post, g }
    }

    /// Accumulate `scale · ∂g/∂θ` of one parity into `out`.
    fn backprop(&self, theta: &[f64], lay: &Layout, x: &[f64], tape: &Tape, scale: f64, out: &mut [f64]) {
        let depth = self.depth();
        out[lay.b_out] += scale;
        for (o, a) in out[lay.w_out..lay.b_out].iter_mut().zip(&tape.post[depth - 1]) {
            *o += scale * a;
        }
        let mut delta: Vec<f64> = theta[lay.w_out..lay.b_out].iter().map(|w| scale * w).collect();
        for l in (0..depth).rev() {
            let m = self.widths[l];
            let c = (2.0 / m as f64).sqrt();
            let e: Vec<f64> = delta
                .iter()
                .zip(&tape.pre[l])
                .map(|(d, z)| if *z > 0.0 { d * c } else { 0.0 })
                .collect();
            if l == 0 {
                for (i, ei) in e.iter().enumerate() {
                    if *ei == 0.0 {
                        continue;
                    }
                    for (j, xj) in x.iter().enumerate() {
                        out[lay.a + i * self.d + j] += ei * xj;
                    }
                    out[lay.b0 + i] += ei;
                }
            } else {
                let prev = self.widths[l - 1];
                let base = lay.hidden[l - 1];
                let input = &tape.post[l - 1];
                let mut next = vec![0.0; prev];
                for (i, ei) in e.iter().enumerate() {
                    if *ei == 0.0 {
                        continue;
                    }
                    let row = base + i * prev;
                    for j in 0..prev {
                        out[row + j] += ei * input[j];
                        next[j] += theta[row + j] * ei;
                    }
                }
                delta = next;
            }
        }
    }

    fn lay(&self) -> Layout {
        layout(self.d, &self.widths)
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let lay = self.lay();
        let g1 = self.tape(self.parity(0), &lay, x).g;
        let g2 = self.tape(self.parity(1), &lay, x).g;
        std::f64::consts::FRAC_1_SQRT_2 * (g1 - g2)
    }

    /// `∇_θ f(x; θ)` in the flat parameter order.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.theta.len()];
        self.accumulate_gradient(x, 1.0, &mut out);
        out
    }

    fn accumulate_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        let lay = self.lay();
        let n = self.params_per_parity();
        let s = std::f64::consts::FRAC_1_SQRT_2 * scale;
        let (o1, o2) = out.split_at_mut(n);
        let t1 = self.tape(self.parity(0), &lay, x);
        self.backprop(self.parity(0), &lay, x, &t1, s, o1);
        let t2 = self.tape(self.parity(1), &lay, x);
        self.backprop(self.parity(1), &lay, x, &t2, -s, o2);
    }

    /// `(1/2n) Σ (f(x_i) − y_i)²`.
    pub fn loss(&self, x: ArrayView2<f64>, y: &[f64]) -> f64 {
        let pred = self.predict_many(x);
        pred.iter().zip(y).map(|(f, y)| (f - y).powi(2)).sum::<f64>() / (2.0 * y.len() as f64)
    }

    /// `∇_θ` of [`NetParams::loss`].
    pub fn loss_gradient(&self, x: ArrayView2<f64>, y: &[f64]) -> Vec<f64> {
        let n = y.len() as f64;
        let len = self.theta.len();
        x.axis_iter(Axis(0))
            .into_par_iter()
            .zip(y.par_iter())
            .fold(
                || vec![0.0; len],
                |mut acc, (row, yi)| {
                    let xi = row.to_vec();
                    let resid = self.forward(&xi) - yi;
                    self.accumulate_gradient(&xi, resid / n, &mut acc);
                    acc
                },
            )
            .reduce(
                || vec![0.0; len],
                |mut a, b| {
                    a.iter_mut().zip(&b).for_each(|(u, v)| *u += v);
                    a
                },
            )
    }

    /// Little-endian snapshot: magic `ADVNET01`, `u32` depth, `u32` input
    /// dimension, `u64` seed, `u32` per width, `u64` parameter count, then
    /// the `f64` parameters.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 4 * self.widths.len() + 8 * self.theta.len());
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&(self.depth() as u32).to_le_bytes());
        out.extend_from_slice(&(self.d as u32).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for w in &self.widths {
            out.extend_from_slice(&(*w as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.theta.len() as u64).to_le_bytes());
        for v in &self.theta {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        fn bad(msg: &str) -> Error {
            Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, format!("network snapshot: {msg}")))
        }
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
            pos += n;
            Ok(s)
        };
        if take(8)? != SNAPSHOT_MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes")) as usize;
        let u64_at = |s: &[u8]| u64::from_le_bytes(s.try_into().expect("8 bytes"));
        let depth = u32_at(take(4)?);
        let d = u32_at(take(4)?);
        let seed = u64_at(take(8)?);
        let widths = (0..depth).map(|_| take(4).map(u32_at)).collect::<Result<Vec<_>>>()?;
        let count = u64_at(take(8)?) as usize;
        if depth == 0 || d == 0 || widths.contains(&0) || count != 2 * layout(d, &widths).per_parity {
            return Err(bad("header does not match the parameter count"));
        }
        let theta = (0..count)
            .map(|_| take(8).map(|s| f64::from_le_bytes(s.try_into().expect("8 bytes"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(NetParams { d, widths, seed, theta })
    }
}

impl Predictor for NetParams {
    fn dim(&self) -> usize {
        self.d
    }

    fn predict(&self, x: &[f64]) -> f64 {
        self.forward(x)
    }
}

/// `f(x; θ)`.
pub fn net_forward(p: &NetParams, x: &[f64]) -> f64 {
    p.forward(x)
}

/// `⟨∇_θ f(x), ∇_θ f(x')⟩`.
pub fn empirical_ntk(p: &NetParams, x: &[f64], x2: &[f64]) -> f64 {
    let a = p.gradient(x);
    let b = p.gradient(x2);
    a.iter().zip(&b).map(|(u, v)| u * v).sum()
}

/// Order-sensitive hash of a design and its responses.
pub fn data_fingerprint(x: ArrayView2<f64>, y: &[f64]) -> u64 {
    let mut h = seed::mix(x.nrows() as u64, x.ncols() as u64);
    for v in x.iter().chain(y.iter()) {
        h = seed::mix(h, v.to_bits());
    }
    h
}

#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub step: usize,
    /// Flow time `lr · step`.
    pub time: f64,
    pub loss: f64,
    pub snapshot: Option<NetParams>,
}

#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub learning_rate: f64,
    pub records: Vec<TraceRecord>,
    /// Training stopped early on a non-finite loss; records end at the last
    /// finite step.
    pub diverged: bool,
    pub final_params: NetParams,
    pub fingerprint: u64,
}

/// `0..=10` then roughly `per_decade` log-spaced steps per decade up to
/// `steps`, always including `steps`.
pub fn log_spaced_steps(steps: usize, per_decade: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..=steps.min(10)).collect();
    let mut k = 1.0;
    let factor = 10f64.powf(1.0 / per_decade.max(1) as f64);
    loop {
        k *= factor;
        let s = (10.0 * k).round() as usize;
        if s >= steps {
            break;
        }
        if out.last().is_some_and(|&l| s > l) {
            out.push(s);
        }
    }
    if out.last() != Some(&steps) {
        out.push(steps);
    }
    out
}

/// Explicit-Euler gradient descent `θ ← θ − lr ∇L`, recording at log-spaced
/// steps with parameter snapshots.
pub fn train_full_batch_gd(p: &NetParams, data: &Dataset, lr: f64, steps: usize) -> Result<TrainTrace> {
    train_recording(p, data, lr, &log_spaced_steps(steps, 8), true)
}

/// Gradient descent recording exactly at `record_steps` (sorted ascending).
pub fn train_recording(
    p: &NetParams,
    data: &Dataset,
    lr: f64,
    record_steps: &[usize],
    snapshots: bool,
) -> Result<TrainTrace> {
    if !(lr >= 0.0) || !lr.is_finite() {
        return Err(domain(format!("learning rate must be finite and >= 0, got {lr}")));
    }
    if data.dim() != p.d {
        return Err(Error::Shape("network input dimension differs from the data".into()));
    }
    if record_steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(domain("record steps must be strictly increasing"));
    }
    let y = data.y.to_vec();
    let x = data.x.view();
    let mut params = p.clone();
    let mut records = Vec::with_capacity(record_steps.len());
    let last = record_steps.last().copied().unwrap_or(0);
    let mut next = 0;
    let mut diverged = false;
    for step in 0..=last {
        if next < record_steps.len() && record_steps[next] == step {
            let loss = params.loss(x, &y);
            if !loss.is_finite() {
                diverged = true;
                break;
            }
            records.push(TraceRecord {
                step,
                time: lr * step as f64,
                loss,
                snapshot: snapshots.then(|| params.clone()),
            });
            next += 1;
        }
        if step == last {
            break;
        }
        let grad = params.loss_gradient(x, &y);
        if grad.iter().any(|g| !g.is_finite()) {
            diverged = true;
            break;
        }
        params.theta.iter_mut().zip(&grad).for_each(|(t, g)| *t -= lr * g);
    }
    Ok(TrainTrace {
        learning_rate: lr,
        records,
        diverged,
        final_params: params,
        fingerprint: data_fingerprint(x, &y),
    })
}

/// `sup_grid |f̂_t^{NTK} − f̂_t^{NN}|` at every snapshot time of the trace.
pub fn ntk_deviation(trace: &TrainTrace, flow: &FlowPredictor, eval_grid: ArrayView2<f64>) -> Result<Vec<(f64, f64)>> {
    let fp = data_fingerprint(flow.points().view(), flow.responses().as_slice().expect("contiguous"));
    if fp != trace.fingerprint {
        return Err(Error::Config("the trace and the flow predictor were built on different data".into()));
    }
    trace
        .records
        .iter()
        .filter_map(|rec| rec.snapshot.as_ref().map(|s| (rec.time, s)))
        .map(|(t, net)| {
            let kernel: Array1<f64> = flow.at(SpectralFilter::Flow(t))?.predict_many(eval_grid);
            let nn = net.predict_many(eval_grid);
            let gap = kernel.iter().zip(nn.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            Ok((t, gap))
        })
        .collect()
}
