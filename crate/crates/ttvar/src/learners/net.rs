//! Flat-parameter neural networks (MLP, LSTM, GRU) with analytic
//! gradients and an Adam trainer.
//!
//! Parameters live in a single `Vec<f64>` so gradient checking against
//! central finite differences is a direct elementwise comparison.

use nalgebra::DMatrix;

use crate::error::{Result, TtvarError};
use crate::rng::Rng;

/// Architecture description. Inputs arrive as one flattened row per
/// sample, newest lag first; the recurrent shapes reinterpret that row
/// as `steps` blocks of `input` values and consume them oldest first.
#[derive(Debug, Clone, PartialEq)]
pub enum NetShape {
    /// dims = [input, hidden..., output], tanh hidden, linear output.
    Mlp { dims: Vec<usize> },
    Lstm { input: usize, hidden: usize, output: usize, steps: usize },
    Gru { input: usize, hidden: usize, output: usize, steps: usize },
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl NetShape {
    pub fn param_len(&self) -> usize {
        match self {
            NetShape::Mlp { dims } => dims
                .windows(2)
                .map(|w| w[1] * w[0] + w[1])
                .sum(),
            NetShape::Lstm { input, hidden, output, .. } => {
                4 * (hidden * input + hidden * hidden + hidden) + output * hidden + output
            }
            NetShape::Gru { input, hidden, output, .. } => {
                3 * (hidden * input + hidden * hidden + hidden) + output * hidden + output
            }
        }
    }

    pub fn input_len(&self) -> usize {
        match self {
            NetShape::Mlp { dims } => dims[0],
            NetShape::Lstm { input, steps, .. } | NetShape::Gru { input, steps, .. } => {
                input * steps
            }
        }
    }

    pub fn output_len(&self) -> usize {
        match self {
            NetShape::Mlp { dims } => *dims.last().expect("nonempty dims"),
            NetShape::Lstm { output, .. } | NetShape::Gru { output, .. } => *output,
        }
    }

    /// Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization.
    /// The LSTM forget-gate bias is set to 1.0 afterwards.
    pub fn init(&self, rng: &mut Rng) -> Vec<f64> {
        let mut theta = vec![0.0; self.param_len()];
        match self {
            NetShape::Mlp { dims } => {
                let mut off = 0;
                for w in dims.windows(2) {
                    let (fan_in, fan_out) = (w[0], w[1]);
                    let r = 1.0 / (fan_in as f64).sqrt();
                    for v in &mut theta[off..off + fan_out * fan_in + fan_out] {
                        *v = rng.uniform_range(-r, r);
                    }
                    off += fan_out * fan_in + fan_out;
                }
            }
            NetShape::Lstm { input, hidden, output, .. }
            | NetShape::Gru { input, hidden, output, .. } => {
                let gates = if matches!(self, NetShape::Lstm { .. }) { 4 } else { 3 };
                let (k, h) = (*input, *hidden);
                let rw = 1.0 / (k as f64).sqrt();
                let ru = 1.0 / (h as f64).sqrt();
                let mut off = 0;
                for _ in 0..gates {
                    for v in &mut theta[off..off + h * k] {
                        *v = rng.uniform_range(-rw, rw);
                    }
                    off += h * k;
                    for v in &mut theta[off..off + h * h + h] {
                        *v = rng.uniform_range(-ru, ru);
                    }
                    off += h * h + h;
                }
                let ry = 1.0 / (h as f64).sqrt();
                for v in &mut theta[off..off + output * h + output] {
                    *v = rng.uniform_range(-ry, ry);
                }
                if let NetShape::Lstm { .. } = self {
                    // Forget gate is the second gate block; its bias sits
                    // after W_f and U_f.
                    let block = h * k + h * h + h;
                    let bias_off = block + h * k + h * h;
                    for v in &mut theta[bias_off..bias_off + h] {
                        *v = 1.0;
                    }
                }
            }
        }
        theta
    }

    pub fn forward(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
        assert_eq!(theta.len(), self.param_len());
        assert_eq!(x.len(), self.input_len());
        match self {
            NetShape::Mlp { dims } => {
                let mut a = x.to_vec();
                let mut off = 0;
                for (l, w) in dims.windows(2).enumerate() {
                    let (nin, nout) = (w[0], w[1]);
                    let last = l == dims.len() - 2;
                    let mut z = vec![0.0; nout];
                    for i in 0..nout {
                        let mut s = theta[off + nout * nin + i];
                        for j in 0..nin {
                            s += theta[off + i * nin + j] * a[j];
                        }
                        z[i] = if last { s } else { s.tanh() };
                    }
                    off += nout * nin + nout;
                    a = z;
                }
                a
            }
            NetShape::Lstm { .. } | NetShape::Gru { .. } => {
                self.recurrent_forward(theta, x).0
            }
        }
    }

    /// Run the recurrent net over the sequence, returning the output and
    /// the per-step intermediate values needed for BPTT.
    fn recurrent_forward(&self, theta: &[f64], x: &[f64]) -> (Vec<f64>, RnnTrace) {
        match self {
            NetShape::Lstm { input, hidden, output, steps } => {
                let (k, h, steps) = (*input, *hidden, *steps);
                let block = h * k + h * h + h;
                let gate = |g: usize| GateView::new(g * block, k, h);
                let (wi, wf, wg, wo) = (gate(0), gate(1), gate(2), gate(3));
                let y_off = 4 * block;
                let mut trace = RnnTrace::new(steps);
                let mut hs = vec![0.0; h];
                let mut cs = vec![0.0; h];
                for s in 0..steps {
                    // Step s consumes lag q-s: the oldest block is last.
                    let xt = &x[(steps - 1 - s) * k..(steps - s) * k];
                    let i: Vec<f64> = (0..h).map(|r| sigmoid(wi.act(theta, r, xt, &hs))).collect();
                    let f: Vec<f64> = (0..h).map(|r| sigmoid(wf.act(theta, r, xt, &hs))).collect();
                    let g: Vec<f64> = (0..h).map(|r| wg.act(theta, r, xt, &hs).tanh()).collect();
                    let o: Vec<f64> = (0..h).map(|r| sigmoid(wo.act(theta, r, xt, &hs))).collect();
                    let c_new: Vec<f64> =
                        (0..h).map(|r| f[r] * cs[r] + i[r] * g[r]).collect();
                    let h_new: Vec<f64> = (0..h).map(|r| o[r] * c_new[r].tanh()).collect();
                    trace.push(vec![
                        xt.to_vec(),
                        hs.clone(),
                        cs.clone(),
                        i,
                        f,
                        g,
                        o,
                        c_new.clone(),
                    ]);
                    hs = h_new;
                    cs = c_new;
                }
                let mut y = vec![0.0; *output];
                for r in 0..*output {
                    let mut s = theta[y_off + output * h + r];
                    for j in 0..h {
                        s += theta[y_off + r * h + j] * hs[j];
                    }
                    y[r] = s;
                }
                trace.final_hidden = hs;
                (y, trace)
            }
            NetShape::Gru { input, hidden, output, steps } => {
                let (k, h, steps) = (*input, *hidden, *steps);
                let block = h * k + h * h + h;
                let gate = |g: usize| GateView::new(g * block, k, h);
                let (wz, wr, wh) = (gate(0), gate(1), gate(2));
                let y_off = 3 * block;
                let mut trace = RnnTrace::new(steps);
                let mut hs = vec![0.0; h];
                for s in 0..steps {
                    let xt = &x[(steps - 1 - s) * k..(steps - s) * k];
                    let z: Vec<f64> = (0..h).map(|r| sigmoid(wz.act(theta, r, xt, &hs))).collect();
                    let rg: Vec<f64> = (0..h).map(|r| sigmoid(wr.act(theta, r, xt, &hs))).collect();
                    let rh: Vec<f64> = (0..h).map(|r| rg[r] * hs[r]).collect();
                    let hc: Vec<f64> = (0..h).map(|r| wh.act(theta, r, xt, &rh).tanh()).collect();
                    let h_new: Vec<f64> =
                        (0..h).map(|r| (1.0 - z[r]) * hs[r] + z[r] * hc[r]).collect();
                    trace.push(vec![xt.to_vec(), hs.clone(), z, rg, rh, hc]);
                    hs = h_new;
                }
                let mut y = vec![0.0; *output];
                for r in 0..*output {
                    let mut s = theta[y_off + output * h + r];
                    for j in 0..h {
                        s += theta[y_off + r * h + j] * hs[j];
                    }
                    y[r] = s;
                }
                trace.final_hidden = hs;
                (y, trace)
            }
            NetShape::Mlp { .. } => unreachable!("recurrent_forward on MLP"),
        }
    }

    /// Mean-squared-error loss over the given row range and its gradient
    /// with respect to every parameter. Loss is averaged over rows and
    /// output components.
    pub fn loss_and_grad(
        &self,
        theta: &[f64],
        inputs: &DMatrix<f64>,
        targets: &DMatrix<f64>,
        rows: std::ops::Range<usize>,
    ) -> (f64, Vec<f64>) {
        let n = rows.len();
        let out = self.output_len();
        let norm = 1.0 / (n * out) as f64;
        let mut grad = vec![0.0; self.param_len()];
        let mut loss = 0.0;
        let mut x = vec![0.0; self.input_len()];
        for row in rows {
            for j in 0..self.input_len() {
                x[j] = inputs[(row, j)];
            }
            match self {
                NetShape::Mlp { dims } => {
                    // Forward with stored activations.
                    let mut acts: Vec<Vec<f64>> = vec![x.clone()];
                    let mut off = 0;
                    for (l, w) in dims.windows(2).enumerate() {
                        let (nin, nout) = (w[0], w[1]);
                        let last = l == dims.len() - 2;
                        let prev = acts.last().expect("activation").clone();
                        let mut z = vec![0.0; nout];
                        for i in 0..nout {
                            let mut s = theta[off + nout * nin + i];
                            for j in 0..nin {
                                s += theta[off + i * nin + j] * prev[j];
                            }
                            z[i] = if last { s } else { s.tanh() };
                        }
                        off += nout * nin + nout;
                        acts.push(z);
                    }
                    let y = acts.last().expect("output");
                    let mut delta: Vec<f64> = (0..out)
                        .map(|i| {
                            let e = y[i] - targets[(row, i)];
                            loss += norm * e * e;
                            2.0 * norm * e
                        })
                        .collect();
                    // Backward.
                    for l in (0..dims.len() - 1).rev() {
                        let (nin, nout) = (dims[l], dims[l + 1]);
                        off -= nout * nin + nout;
                        let prev = &acts[l];
                        let mut dprev = vec![0.0; nin];
                        for i in 0..nout {
                            let d = delta[i];
                            grad[off + nout * nin + i] += d;
                            for j in 0..nin {
                                grad[off + i * nin + j] += d * prev[j];
                                dprev[j] += d * theta[off + i * nin + j];
                            }
                        }
                        if l > 0 {
                            for j in 0..nin {
                                dprev[j] *= 1.0 - prev[j] * prev[j];
                            }
                        }
                        delta = dprev;
                    }
                }
                NetShape::Lstm { input, hidden, output, steps } => {
                    let (k, h, steps, out_dim) = (*input, *hidden, *steps, *output);
                    let (y, trace) = self.recurrent_forward(theta, &x);
                    let block = h * k + h * h + h;
                    let y_off = 4 * block;
                    let mut dy = vec![0.0; out_dim];
                    for i in 0..out_dim {
                        let e = y[i] - targets[(row, i)];
                        loss += norm * e * e;
                        dy[i] = 2.0 * norm * e;
                    }
                    let hs = &trace.final_hidden;
                    let mut dh = vec![0.0; h];
                    for i in 0..out_dim {
                        grad[y_off + out_dim * h + i] += dy[i];
                        for j in 0..h {
                            grad[y_off + i * h + j] += dy[i] * hs[j];
                            dh[j] += dy[i] * theta[y_off + i * h + j];
                        }
                    }
                    let mut dc = vec![0.0; h];
                    for s in (0..steps).rev() {
                        let step = &trace.steps[s];
                        let (xt, h_prev, c_prev, ig, fg, gg, og, c_new) = (
                            &step[0], &step[1], &step[2], &step[3], &step[4], &step[5],
                            &step[6], &step[7],
                        );
                        let mut dh_prev = vec![0.0; h];
                        let mut dc_prev = vec![0.0; h];
                        for r in 0..h {
                            let tc = c_new[r].tanh();
                            let dcr = dc[r] + dh[r] * og[r] * (1.0 - tc * tc);
                            let da_o = dh[r] * tc * og[r] * (1.0 - og[r]);
                            let da_i = dcr * gg[r] * ig[r] * (1.0 - ig[r]);
                            let da_f = dcr * c_prev[r] * fg[r] * (1.0 - fg[r]);
                            let da_g = dcr * ig[r] * (1.0 - gg[r] * gg[r]);
                            dc_prev[r] = dcr * fg[r];
                            for (g_idx, da) in
                                [(0, da_i), (1, da_f), (2, da_g), (3, da_o)]
                            {
                                let base = g_idx * block;
                                for j in 0..k {
                                    grad[base + r * k + j] += da * xt[j];
                                }
                                for j in 0..h {
                                    grad[base + h * k + r * h + j] += da * h_prev[j];
                                    dh_prev[j] += da * theta[base + h * k + r * h + j];
                                }
                                grad[base + h * k + h * h + r] += da;
                            }
                        }
                        dh = dh_prev;
                        dc = dc_prev;
                    }
                }
                NetShape::Gru { input, hidden, output, steps } => {
                    let (k, h, steps, out_dim) = (*input, *hidden, *steps, *output);
                    let (y, trace) = self.recurrent_forward(theta, &x);
                    let block = h * k + h * h + h;
                    let y_off = 3 * block;
                    let mut dy = vec![0.0; out_dim];
                    for i in 0..out_dim {
                        let e = y[i] - targets[(row, i)];
                        loss += norm * e * e;
                        dy[i] = 2.0 * norm * e;
                    }
                    let hs = &trace.final_hidden;
                    let mut dh = vec![0.0; h];
                    for i in 0..out_dim {
                        grad[y_off + out_dim * h + i] += dy[i];
                        for j in 0..h {
                            grad[y_off + i * h + j] += dy[i] * hs[j];
                            dh[j] += dy[i] * theta[y_off + i * h + j];
                        }
                    }
                    for s in (0..steps).rev() {
                        let step = &trace.steps[s];
                        let (xt, h_prev, z, rg, rh, hc) =
                            (&step[0], &step[1], &step[2], &step[3], &step[4], &step[5]);
                        let mut dh_prev = vec![0.0; h];
                        let mut drh = vec![0.0; h];
                        for r in 0..h {
                            let dz = dh[r] * (hc[r] - h_prev[r]);
                            let dhc = dh[r] * z[r];
                            dh_prev[r] += dh[r] * (1.0 - z[r]);
                            let da_z = dz * z[r] * (1.0 - z[r]);
                            let da_h = dhc * (1.0 - hc[r] * hc[r]);
                            // Candidate gate (block 2) uses r .* h_prev.
                            let base = 2 * block;
                            for j in 0..k {
                                grad[base + r * k + j] += da_h * xt[j];
                            }
                            for j in 0..h {
                                grad[base + h * k + r * h + j] += da_h * rh[j];
                                drh[j] += da_h * theta[base + h * k + r * h + j];
                            }
                            grad[base + h * k + h * h + r] += da_h;
                            // Update gate (block 0).
                            let base = 0;
                            for j in 0..k {
                                grad[base + r * k + j] += da_z * xt[j];
                            }
                            for j in 0..h {
                                grad[base + h * k + r * h + j] += da_z * h_prev[j];
                                dh_prev[j] += da_z * theta[base + h * k + r * h + j];
                            }
                            grad[base + h * k + h * h + r] += da_z;
                        }
                        for r in 0..h {
                            let dr = drh[r] * h_prev[r];
                            dh_prev[r] += drh[r] * rg[r];
                            let da_r = dr * rg[r] * (1.0 - rg[r]);
                            let base = block;
                            for j in 0..k {
                                grad[base + r * k + j] += da_r * xt[j];
                            }
                            for j in 0..h {
                                grad[base + h * k + r * h + j] += da_r * h_prev[j];
                                dh_prev[j] += da_r * theta[base + h * k + r * h + j];
                            }
                            grad[base + h * k + h * h + r] += da_r;
                        }
                        dh = dh_prev;
                    }
                }
            }
        }
        (loss, grad)
    }
}

/// One gate's parameter block: W (h x k), U (h x h), b (h), stored
/// contiguously at `off`.
struct GateView {
    off: usize,
    k: usize,
    h: usize,
}

impl GateView {
    fn new(off: usize, k: usize, h: usize) -> Self {
        GateView { off, k, h }
    }

    /// Pre-activation of row `r`: (W x)_r + (U h)_r + b_r.
    fn act(&self, theta: &[f64], r: usize, x: &[f64], h: &[f64]) -> f64 {
        let mut s = theta[self.off + self.h * self.k + self.h * self.h + r];
        for j in 0..self.k {
            s += theta[self.off + r * self.k + j] * x[j];
        }
        for j in 0..self.h {
            s += theta[self.off + self.h * self.k + r * self.h + j] * h[j];
        }
        s
    }
}

struct RnnTrace {
    steps: Vec<Vec<Vec<f64>>>,
    final_hidden: Vec<f64>,
}

impl RnnTrace {
    fn new(steps: usize) -> Self {
        RnnTrace { steps: Vec::with_capacity(steps), final_hidden: Vec::new() }
    }

    fn push(&mut self, step: Vec<Vec<f64>>) {
        self.steps.push(step);
    }
}

/// Per-epoch (train loss, validation loss) pairs plus the epoch whose
/// parameters were kept.
#[derive(Debug, Clone, Default)]
pub struct TrainingLog {
    pub epochs: Vec<(f64, f64)>,
    pub best_epoch: usize,
}

/// Full-batch Adam with chronological validation split and early
/// stopping; returns the best-validation parameters.
pub fn train_adam(
    shape: &NetShape,
    inputs: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    learning_rate: f64,
    epochs: usize,
    patience: usize,
    validation_fraction: f64,
    rng: &mut Rng,
) -> Result<(Vec<f64>, TrainingLog)> {
    let n = inputs.nrows();
    let n_val = ((n as f64) * validation_fraction).floor() as usize;
    let n_train = n - n_val;
    if n_train == 0 {
        return Err(TtvarError::invalid("no training rows after validation split"));
    }
    let mut theta = shape.init(rng);
    let mut log = TrainingLog::default();
    if epochs == 0 {
        return Ok((theta, log));
    }
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut best = theta.clone();
    let mut best_val = f64::INFINITY;
    let mut since_best = 0usize;
    for epoch in 0..epochs {
        let (train_loss, grad) = shape.loss_and_grad(&theta, inputs, targets, 0..n_train);
        if !train_loss.is_finite() {
            return Err(TtvarError::numerical(format!(
                "non-finite training loss at epoch {epoch}"
            )));
        }
        let t = (epoch + 1) as f64;
        for i in 0..theta.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
            v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
            let mh = m[i] / (1.0 - b1.powf(t));
            let vh = v[i] / (1.0 - b2.powf(t));
            theta[i] -= learning_rate * mh / (vh.sqrt() + eps);
        }
        let val_loss = if n_val > 0 {
            eval_loss(shape, &theta, inputs, targets, n_train..n)
        } else {
            eval_loss(shape, &theta, inputs, targets, 0..n_train)
        };
        if !val_loss.is_finite() {
            return Err(TtvarError::numerical(format!(
                "non-finite validation loss at epoch {epoch}"
            )));
        }
        log.epochs.push((train_loss, val_loss));
        if val_loss < best_val {
            best_val = val_loss;
            best.copy_from_slice(&theta);
            log.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > patience {
                break;
            }
        }
    }
    Ok((best, log))
}

pub fn eval_loss(
    shape: &NetShape,
    theta: &[f64],
    inputs: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    rows: std::ops::Range<usize>,
) -> f64 {
    let out = shape.output_len();
    let norm = 1.0 / (rows.len() * out) as f64;
    let mut x = vec![0.0; shape.input_len()];
    let mut loss = 0.0;
    for row in rows {
        for j in 0..shape.input_len() {
            x[j] = inputs[(row, j)];
        }
        let y = shape.forward(theta, &x);
        for i in 0..out {
            let e = y[i] - targets[(row, i)];
            loss += norm * e * e;
        }
    }
    loss
}
