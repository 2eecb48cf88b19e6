//! Forward and backward passes for one example.
//!
//! Activations are row-major `(time, channels)` matrices. Convolutions are
//! lowered to matrix products over an im2col buffer.

use rand::Rng as _;

use super::descriptor::{
    channel_layer_names, same_len, same_pad_left, Activation, ArchitectureDescriptor, ChannelLayer,
    JoinedLayer,
};
use super::weights::ModelWeights;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::signal::{ChannelRole, Epoch};

/// Inverted-dropout rates used in training mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutRates {
    /// After every channel-pipe convolution.
    pub conv: f64,
    /// After the hidden dense layers.
    pub dense: f64,
    /// Also apply `dense` after the joined 2-D convolution.
    pub after_conv2d: bool,
}

impl DropoutRates {
    pub const NONE: Self = Self {
        conv: 0.0,
        dense: 0.0,
        after_conv2d: false,
    };
}

/// `c = beta * c + a · b` for an `m×k` view `a` and a `k×n` view `b`, given
/// as (row stride, column stride). `c` is dense row-major `m×n`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k > 0);
    assert!((m - 1) * rsa + (k - 1) * csa < a.len());
    assert!((k - 1) * rsb + (n - 1) * csb < b.len());
    assert!(m * n <= c.len());
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Debug, Clone)]
enum ChanOp {
    Scale { t: usize },
    Conv {
        t: usize,
        width: usize,
        cin: usize,
        filters: usize,
        len: usize,
        pad: usize,
    },
    Pool {
        width: usize,
        stride: usize,
        channels: usize,
        len_in: usize,
        len_out: usize,
        pad: usize,
    },
}

#[derive(Debug, Clone)]
enum JoinOp {
    Conv2d {
        t: usize,
        h: usize,
        w: usize,
        cin: usize,
        filters: usize,
        hin: usize,
        win: usize,
        hout: usize,
        wout: usize,
    },
    Dense {
        t: usize,
        n_in: usize,
        units: usize,
        softmax: bool,
    },
}

/// Index arithmetic resolved once from a descriptor.
#[derive(Debug, Clone)]
pub(crate) struct Plan {
    input_len: usize,
    roles: Vec<ChannelRole>,
    channel_group: Vec<usize>,
    group_offset: Vec<usize>,
    channel: Vec<ChanOp>,
    channel_names: Vec<String>,
    joined: Vec<JoinOp>,
    out_len: usize,
    out_ch: usize,
    n_classes: usize,
}

impl Plan {
    pub(crate) fn new(d: &ArchitectureDescriptor) -> Result<Self> {
        let report = d.infer_shapes()?;
        let mut channel = Vec::new();
        let (mut len, mut ch, mut t) = (d.input_len, 1usize, 0usize);
        for layer in &d.channel_pipe {
            match *layer {
                ChannelLayer::Scale { .. } => {
                    channel.push(ChanOp::Scale { t });
                    t += 1;
                }
                ChannelLayer::Conv1d { width, filters } => {
                    channel.push(ChanOp::Conv {
                        t,
                        width,
                        cin: ch,
                        filters,
                        len,
                        pad: same_pad_left(len, width, 1),
                    });
                    t += 2;
                    ch = filters;
                }
                ChannelLayer::MaxPool1d { width, stride } => {
                    let len_out = same_len(len, stride);
                    channel.push(ChanOp::Pool {
                        width,
                        stride,
                        channels: ch,
                        len_in: len,
                        len_out,
                        pad: same_pad_left(len, width, stride),
                    });
                    len = len_out;
                }
            }
        }
        let per_group = t;
        let group_offset: Vec<usize> = (0..d.param_groups.len()).map(|g| g * per_group).collect();
        let mut t = per_group * d.param_groups.len();
        let mut shape = report.joined_input.0.clone();
        let mut joined = Vec::new();
        for layer in &d.joined_pipe {
            match *layer {
                JoinedLayer::Conv2d { height, width, filters } => {
                    let (hout, wout) = (shape[0] - height + 1, shape[1] - width + 1);
                    joined.push(JoinOp::Conv2d {
                        t,
                        h: height,
                        w: width,
                        cin: shape[2],
                        filters,
                        hin: shape[0],
                        win: shape[1],
                        hout,
                        wout,
                    });
                    shape = vec![hout, wout, filters];
                }
                JoinedLayer::Dense { units, activation } => {
                    joined.push(JoinOp::Dense {
                        t,
                        n_in: shape.iter().product(),
                        units,
                        softmax: activation == Activation::Softmax,
                    });
                    shape = vec![units];
                }
            }
            t += 2;
        }
        Ok(Self {
            input_len: d.input_len,
            roles: d.channel_roles.clone(),
            channel_group: d.channel_groups()?,
            group_offset,
            channel,
            channel_names: channel_layer_names(&d.channel_pipe),
            joined,
            out_len: len,
            out_ch: ch,
            n_classes: d.n_classes(),
        })
    }

    pub(crate) fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// The epoch's channels as raw sample slices, after checking roles and length.
    pub(crate) fn inputs<'a>(&self, epoch: &'a Epoch) -> Result<Vec<&'a [f64]>> {
        if epoch.roles() != self.roles.as_slice() {
            return Err(Error::shape(
                "input",
                format!("expected channels {:?}, got {:?}", self.roles, epoch.roles()),
            ));
        }
        if epoch.len() != self.input_len {
            return Err(Error::shape(
                self.channel_names.first().cloned().unwrap_or_else(|| "input".into()),
                format!("expected {} samples per channel, got {}", self.input_len, epoch.len()),
            ));
        }
        Ok(epoch.channels().iter().map(|c| c.samples()).collect())
    }
}

struct Dropper<'a> {
    rng: &'a mut Rng,
    rates: DropoutRates,
}

impl Dropper<'_> {
    fn mask(&mut self, n: usize, p: f64) -> Option<Vec<f64>> {
        if p <= 0.0 {
            return None;
        }
        let keep = 1.0 / (1.0 - p);
        Some(
            (0..n)
                .map(|_| if self.rng.random::<f64>() >= p { keep } else { 0.0 })
                .collect(),
        )
    }
}

enum ChanRecord {
    Scale { x: Vec<f64> },
    Conv {
        col: Vec<f64>,
        y: Vec<f64>,
        mask: Option<Vec<f64>>,
    },
    Pool { arg: Vec<usize> },
}

enum JoinRecord {
    Conv2d {
        col: Vec<f64>,
        y: Vec<f64>,
        mask: Option<Vec<f64>>,
    },
    Dense {
        x: Vec<f64>,
        y: Vec<f64>,
        mask: Option<Vec<f64>>,
    },
}

pub(crate) struct Trace {
    channels: Vec<Vec<ChanRecord>>,
    joined: Vec<JoinRecord>,
    pub(crate) logits: Vec<f64>,
    pub(crate) probs: Vec<f64>,
}

fn relu(y: &mut [f64]) {
    for v in y {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn apply_mask(y: &[f64], mask: &Option<Vec<f64>>) -> Vec<f64> {
    match mask {
        Some(m) => y.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => y.to_vec(),
    }
}

/// Gradient through dropout and ReLU, in place.
fn back_relu(g: &mut [f64], y: &[f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        g.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
    }
    g.iter_mut().zip(y).for_each(|(a, &v)| {
        if v <= 0.0 {
            *a = 0.0
        }
    });
}

fn add_bias_rows(y: &mut [f64], bias: &[f64]) {
    for row in y.chunks_exact_mut(bias.len()) {
        row.copy_from_slice(bias);
    }
}

fn column_sums(g: &[f64], n: usize, out: &mut [f64]) {
    for row in g.chunks_exact(n) {
        out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy of `label` under softmax(logits), via log-sum-exp.
pub(crate) fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

fn im2col_1d(x: &[f64], len: usize, cin: usize, width: usize, pad: usize) -> Vec<f64> {
    let row = width * cin;
    let mut col = vec![0.0; len * row];
    for t in 0..len {
        for k in 0..width {
            let src = t + k;
            if src < pad || src - pad >= len {
                continue;
            }
            let s = (src - pad) * cin;
            col[t * row + k * cin..t * row + (k + 1) * cin].copy_from_slice(&x[s..s + cin]);
        }
    }
    col
}

fn col2im_1d(dcol: &[f64], len: usize, cin: usize, width: usize, pad: usize) -> Vec<f64> {
    let row = width * cin;
    let mut dx = vec![0.0; len * cin];
    for t in 0..len {
        for k in 0..width {
            let src = t + k;
            if src < pad || src - pad >= len {
                continue;
            }
            let s = (src - pad) * cin;
            let d = &dcol[t * row + k * cin..t * row + (k + 1) * cin];
            dx[s..s + cin].iter_mut().zip(d).for_each(|(a, b)| *a += b);
        }
    }
    dx
}

#[allow(clippy::too_many_arguments)]
fn im2col_2d(x: &[f64], win: usize, cin: usize, h: usize, w: usize, hout: usize, wout: usize) -> Vec<f64> {
    let row = h * w * cin;
    let mut col = vec![0.0; hout * wout * row];
    for i in 0..hout {
        for j in 0..wout {
            let r = (i * wout + j) * row;
            for a in 0..h {
                let s = ((i + a) * win + j) * cin;
                let d = r + a * w * cin;
                col[d..d + w * cin].copy_from_slice(&x[s..s + w * cin]);
            }
        }
    }
    col
}

#[allow(clippy::too_many_arguments)]
fn col2im_2d(
    dcol: &[f64],
    hin: usize,
    win: usize,
    cin: usize,
    h: usize,
    w: usize,
    hout: usize,
    wout: usize,
) -> Vec<f64> {
    let row = h * w * cin;
    let mut dx = vec![0.0; hin * win * cin];
    for i in 0..hout {
        for j in 0..wout {
            let r = (i * wout + j) * row;
            for a in 0..h {
                let s = ((i + a) * win + j) * cin;
                let d = r + a * w * cin;
                dx[s..s + w * cin]
                    .iter_mut()
                    .zip(&dcol[d..d + w * cin])
                    .for_each(|(p, q)| *p += q);
            }
        }
    }
    dx
}

fn channel_forward(
    plan: &Plan,
    w: &ModelWeights,
    off: usize,
    x: &[f64],
    drop: &mut Option<Dropper<'_>>,
) -> (Vec<f64>, Vec<ChanRecord>) {
    let tensors = w.tensors();
    let mut cur = x.to_vec();
    let mut records = Vec::with_capacity(plan.channel.len());
    for op in &plan.channel {
        match *op {
            ChanOp::Scale { t } => {
                let s = tensors[off + t].data[0];
                let y = cur.iter().map(|v| v * s).collect();
                records.push(ChanRecord::Scale { x: std::mem::replace(&mut cur, y) });
            }
            ChanOp::Conv {
                t,
                width,
                cin,
                filters,
                len,
                pad,
            } => {
                let col = im2col_1d(&cur, len, cin, width, pad);
                let mut y = vec![0.0; len * filters];
                add_bias_rows(&mut y, &tensors[off + t + 1].data);
                let k = width * cin;
                gemm(len, k, filters, &col, (k, 1), &tensors[off + t].data, (filters, 1), 1.0, &mut y);
                relu(&mut y);
                let mask = drop.as_mut().and_then(|d| {
                    let p = d.rates.conv;
                    d.mask(y.len(), p)
                });
                cur = apply_mask(&y, &mask);
                records.push(ChanRecord::Conv { col, y, mask });
            }
            ChanOp::Pool {
                width,
                stride,
                channels,
                len_in,
                len_out,
                pad,
            } => {
                let mut out = vec![0.0; len_out * channels];
                let mut arg = vec![0usize; len_out * channels];
                for o in 0..len_out {
                    let start = (o * stride).saturating_sub(pad);
                    let end = (o * stride + width).saturating_sub(pad).min(len_in);
                    for c in 0..channels {
                        let mut best = start * channels + c;
                        for t in start + 1..end {
                            if cur[t * channels + c] > cur[best] {
                                best = t * channels + c;
                            }
                        }
                        out[o * channels + c] = cur[best];
                        arg[o * channels + c] = best;
                    }
                }
                cur = out;
                records.push(ChanRecord::Pool { arg });
            }
        }
    }
    (cur, records)
}

pub(crate) fn forward(
    plan: &Plan,
    w: &ModelWeights,
    inputs: &[&[f64]],
    rng: Option<(&mut Rng, DropoutRates)>,
) -> Trace {
    let mut drop = rng.map(|(rng, rates)| Dropper { rng, rates });
    let n_in = inputs.len();
    let f = plan.out_ch;
    let mut z = vec![0.0; plan.out_len * n_in * f];
    let mut channels = Vec::with_capacity(n_in);
    for (ch, x) in inputs.iter().enumerate() {
        let off = plan.group_offset[plan.channel_group[ch]];
        let (out, rec) = channel_forward(plan, w, off, x, &mut drop);
        for t in 0..plan.out_len {
            z[(t * n_in + ch) * f..(t * n_in + ch + 1) * f].copy_from_slice(&out[t * f..(t + 1) * f]);
        }
        channels.push(rec);
    }

    let tensors = w.tensors();
    let mut cur = z;
    let mut joined = Vec::with_capacity(plan.joined.len());
    let mut logits = Vec::new();
    for op in &plan.joined {
        match *op {
            JoinOp::Conv2d {
                t,
                h,
                w: kw,
                cin,
                filters,
                win,
                hout,
                wout,
                ..
            } => {
                let col = im2col_2d(&cur, win, cin, h, kw, hout, wout);
                let rows = hout * wout;
                let k = h * kw * cin;
                let mut y = vec![0.0; rows * filters];
                add_bias_rows(&mut y, &tensors[t + 1].data);
                gemm(rows, k, filters, &col, (k, 1), &tensors[t].data, (filters, 1), 1.0, &mut y);
                relu(&mut y);
                let mask = drop.as_mut().and_then(|d| {
                    if d.rates.after_conv2d {
                        let p = d.rates.dense;
                        d.mask(y.len(), p)
                    } else {
                        None
                    }
                });
                cur = apply_mask(&y, &mask);
                joined.push(JoinRecord::Conv2d { col, y, mask });
            }
            JoinOp::Dense { t, n_in, units, softmax } => {
                let mut y = tensors[t + 1].data.clone();
                gemm(1, n_in, units, &cur, (n_in, 1), &tensors[t].data, (units, 1), 1.0, &mut y);
                if softmax {
                    logits = y.clone();
                    joined.push(JoinRecord::Dense {
                        x: std::mem::take(&mut cur),
                        y,
                        mask: None,
                    });
                } else {
                    relu(&mut y);
                    let mask = drop.as_mut().and_then(|d| {
                        let p = d.rates.dense;
                        d.mask(y.len(), p)
                    });
                    let next = apply_mask(&y, &mask);
                    joined.push(JoinRecord::Dense {
                        x: std::mem::replace(&mut cur, next),
                        y,
                        mask,
                    });
                }
            }
        }
    }
    let probs = softmax(&logits);
    Trace {
        channels,
        joined,
        logits,
        probs,
    }
}

/// Gradient buffers shaped like the weights.
pub(crate) fn zero_grads(w: &ModelWeights) -> Vec<Vec<f64>> {
    w.tensors().iter().map(|t| vec![0.0; t.data.len()]).collect()
}

/// Adds d(cross-entropy)/d(weights) for one example to `grads`; returns the loss.
pub(crate) fn backward(plan: &Plan, w: &ModelWeights, trace: &Trace, label: usize, grads: &mut [Vec<f64>]) -> f64 {
    let tensors = w.tensors();
    let loss = cross_entropy(&trace.logits, label);
    let mut g: Vec<f64> = trace.probs.clone();
    g[label] -= 1.0;

    for (op, rec) in plan.joined.iter().zip(&trace.joined).rev() {
        match (op, rec) {
            (&JoinOp::Dense { t, n_in, units, softmax }, JoinRecord::Dense { x, y, mask }) => {
                if !softmax {
                    back_relu(&mut g, y, mask);
                }
                gemm(n_in, 1, units, x, (1, 1), &g, (units, 1), 1.0, &mut grads[t]);
                grads[t + 1].iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                let mut dx = vec![0.0; n_in];
                gemm(n_in, units, 1, &tensors[t].data, (units, 1), &g, (1, 1), 0.0, &mut dx);
                g = dx;
            }
            (
                &JoinOp::Conv2d {
                    t,
                    h,
                    w: kw,
                    cin,
                    filters,
                    hin,
                    win,
                    hout,
                    wout,
                },
                JoinRecord::Conv2d { col, y, mask },
            ) => {
                back_relu(&mut g, y, mask);
                let rows = hout * wout;
                let k = h * kw * cin;
                gemm(k, rows, filters, col, (1, k), &g, (filters, 1), 1.0, &mut grads[t]);
                column_sums(&g, filters, &mut grads[t + 1]);
                let mut dcol = vec![0.0; rows * k];
                gemm(rows, filters, k, &g, (filters, 1), &tensors[t].data, (1, filters), 0.0, &mut dcol);
                g = col2im_2d(&dcol, hin, win, cin, h, kw, hout, wout);
            }
            _ => unreachable!("trace and plan disagree"),
        }
    }

    let n_in = trace.channels.len();
    let f = plan.out_ch;
    for (ch, records) in trace.channels.iter().enumerate() {
        let off = plan.group_offset[plan.channel_group[ch]];
        let mut gc = vec![0.0; plan.out_len * f];
        for t in 0..plan.out_len {
            gc[t * f..(t + 1) * f].copy_from_slice(&g[(t * n_in + ch) * f..(t * n_in + ch + 1) * f]);
        }
        for (op, rec) in plan.channel.iter().zip(records).rev() {
            match (op, rec) {
                (&ChanOp::Scale { t }, ChanRecord::Scale { x }) => {
                    grads[off + t][0] += x.iter().zip(&gc).map(|(a, b)| a * b).sum::<f64>();
                }
                (
                    &ChanOp::Conv {
                        t,
                        width,
                        cin,
                        filters,
                        len,
                        pad,
                    },
                    ChanRecord::Conv { col, y, mask },
                ) => {
                    back_relu(&mut gc, y, mask);
                    let k = width * cin;
                    gemm(k, len, filters, col, (1, k), &gc, (filters, 1), 1.0, &mut grads[off + t]);
                    column_sums(&gc, filters, &mut grads[off + t + 1]);
                    let mut dcol = vec![0.0; len * k];
                    gemm(len, filters, k, &gc, (filters, 1), &tensors[off + t].data, (1, filters), 0.0, &mut dcol);
                    gc = col2im_1d(&dcol, len, cin, width, pad);
                }
                (
                    &ChanOp::Pool {
                        channels, len_in, ..
                    },
                    ChanRecord::Pool { arg },
                ) => {
                    let mut dx = vec![0.0; len_in * channels];
                    for (i, &a) in arg.iter().enumerate() {
                        dx[a] += gc[i];
                    }
                    gc = dx;
                }
                _ => unreachable!("trace and plan disagree"),
            }
        }
    }
    loss
}
