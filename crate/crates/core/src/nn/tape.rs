//! Define-by-run reverse-mode tape.
//!
//! Every operation appends a node holding its value; nodes are created in
//! topological order, so the backward pass is a single reverse sweep.

use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Row range `[start, end)` on the feature (height) axis normalised as one group.
pub type Band = (usize, usize);

/// Batch moments of one normalisation call, laid out `[channel][group]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    /// Elements per group (for the unbiased running-variance update).
    pub counts: Vec<usize>,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        pad: (usize, usize),
    },
    Dense {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    GroupNorm {
        x: Var,
        bands: Vec<Band>,
        inv_std: Vec<f64>,
    },
    FixedNorm {
        x: Var,
        bands: Vec<Band>,
        scale: Vec<f64>,
    },
    GroupAffine {
        x: Var,
        gamma: Var,
        beta: Var,
        bands: Vec<Band>,
    },
    Silu(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MeanAxis {
        x: Var,
        axis: usize,
    },
    Concat {
        a: Var,
        b: Var,
        axis: usize,
    },
    Reshape(Var),
    Sum(Var),
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    leaf_grads: Vec<Option<Tensor>>,
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Broadcast strides of `shape` against `out` (0 on broadcast axes).
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let s = strides(shape);
    shape
        .iter()
        .zip(out)
        .zip(s)
        .map(|((&d, &o), st)| if d == o { st } else { 0 })
        .collect()
}

/// Calls `f(out_index, a_index, b_index)` over every element of `out`.
fn for_each_broadcast(out: &[usize], sa: &[usize], sb: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let rank = out.len();
    let total: usize = out.iter().product();
    let mut idx = vec![0usize; rank];
    let (mut ia, mut ib) = (0usize, 0usize);
    for o in 0..total {
        f(o, ia, ib);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            ia += sa[ax];
            ib += sb[ax];
            if idx[ax] < out[ax] {
                break;
            }
            ia -= sa[ax] * out[ax];
            ib -= sb[ax] * out[ax];
            idx[ax] = 0;
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Valid output range `[lo, hi)` along one axis for kernel offset `k`.
fn conv_range(k: usize, pad: usize, input: usize, output: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(k);
    let hi = (input + pad).saturating_sub(k).min(output);
    (lo, hi.max(lo))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.leaf_grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Binds a parameter; gradients flow back into `params` on [`Tape::backward`].
    pub fn param(&mut self, params: &ParamStore, id: ParamId) -> Var {
        let p = params.get(id);
        self.push(p.value.clone(), Op::Param(id), p.trainable)
    }

    /// Accumulated gradient of a leaf created with `requires_grad`.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.leaf_grads[v.0].as_ref()
    }

    /// 2-D cross-correlation, stride 1, zero padding `(pad_h, pad_w)`.
    /// `x` is `N×C×H×W`, `w` is `O×C×kh×kw`, `b` is `O`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, pad: (usize, usize)) -> Result<Var> {
        let (n, c, h, wd) = self.value(x).dims4()?;
        let (o, cw, kh, kw) = self.value(w).dims4()?;
        if c != cw {
            return Err(Error::Shape(format!("conv input has {c} channels, kernel expects {cw}")));
        }
        if let Some(b) = b {
            if self.shape(b) != [o] {
                return Err(Error::Shape(format!("conv bias shape {:?}, expected [{o}]", self.shape(b))));
            }
        }
        let (ph, pw) = pad;
        if h + 2 * ph < kh || wd + 2 * pw < kw {
            return Err(Error::Shape("conv kernel larger than padded input".into()));
        }
        let (ho, wo) = (h + 2 * ph - kh + 1, wd + 2 * pw - kw + 1);
        let xs = self.value(x).data();
        let ws = self.value(w).data();
        let mut out = vec![0.0; n * o * ho * wo];
        for ni in 0..n {
            for oi in 0..o {
                let plane = &mut out[(ni * o + oi) * ho * wo..(ni * o + oi + 1) * ho * wo];
                if let Some(b) = b {
                    let bv = self.nodes[b.0].value.data()[oi];
                    plane.iter_mut().for_each(|v| *v = bv);
                }
                for ci in 0..c {
                    let xin = &xs[(ni * c + ci) * h * wd..(ni * c + ci + 1) * h * wd];
                    for ki in 0..kh {
                        let (i0, i1) = conv_range(ki, ph, h, ho);
                        for kj in 0..kw {
                            let (j0, j1) = conv_range(kj, pw, wd, wo);
                            let wv = ws[((oi * c + ci) * kh + ki) * kw + kj];
                            for i in i0..i1 {
                                let xi = i + ki - ph;
                                let xrow = &xin[xi * wd + j0 + kj - pw..xi * wd + j1 + kj - pw];
                                let yrow = &mut plane[i * wo + j0..i * wo + j1];
                                for (y, xv) in yrow.iter_mut().zip(xrow) {
                                    *y += wv * xv;
                                }
                            }
                        }
                    }
                }
            }
        }
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        let value = Tensor::new(vec![n, o, ho, wo], out)?;
        Ok(self.push(value, Op::Conv2d { x, w, b, pad }, rg))
    }

    /// Affine map on the flattened trailing dims: `x (N×F) · wᵀ (F×O) + b`.
    pub fn dense(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let xv = self.value(x);
        let n = xv.shape()[0];
        let f = xv.numel() / n.max(1);
        let (o, fw) = match self.shape(w) {
            [o, fw] => (*o, *fw),
            s => return Err(Error::Shape(format!("dense weight must be rank 2, got {s:?}"))),
        };
        if f != fw {
            return Err(Error::Shape(format!("dense input has {f} features, weight expects {fw}")));
        }
        let xs = self.value(x).data();
        let ws = self.value(w).data();
        let mut out = vec![0.0; n * o];
        for ni in 0..n {
            let xr = &xs[ni * f..(ni + 1) * f];
            for oi in 0..o {
                let wr = &ws[oi * f..(oi + 1) * f];
                let mut acc: f64 = xr.iter().zip(wr).map(|(a, b)| a * b).sum();
                if let Some(b) = b {
                    acc += self.nodes[b.0].value.data()[oi];
                }
                out[ni * o + oi] = acc;
            }
        }
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        Ok(self.push(Tensor::new(vec![n, o], out)?, Op::Dense { x, w, b }, rg))
    }

    fn check_bands(&self, x: Var, bands: &[Band]) -> Result<(usize, usize, usize, usize)> {
        let dims = self.value(x).dims4()?;
        if bands.is_empty() {
            return Err(Error::InvalidArgument("normalisation needs at least one band".into()));
        }
        if let Some(b) = bands.iter().find(|(s, e)| s >= e || *e > dims.2) {
            return Err(Error::Shape(format!("band {b:?} invalid for height {}", dims.2)));
        }
        Ok(dims)
    }

    /// Standardises each `(channel, band)` group over `(batch, band rows, width)`
    /// using the batch's own (biased) moments.
    pub fn group_norm(&mut self, x: Var, bands: &[Band], eps: f64) -> Result<(Var, GroupStats)> {
        let (n, c, h, w) = self.check_bands(x, bands)?;
        let g = bands.len();
        let xs = self.value(x).data();
        let mut out = vec![0.0; xs.len()];
        let mut stats = GroupStats {
            mean: vec![0.0; c * g],
            var: vec![0.0; c * g],
            counts: vec![0; c * g],
        };
        let mut inv_std = vec![0.0; c * g];
        for ci in 0..c {
            for (gi, &(s, e)) in bands.iter().enumerate() {
                let m = n * (e - s) * w;
                let mut sum = 0.0;
                for ni in 0..n {
                    let base = (ni * c + ci) * h * w;
                    sum += xs[base + s * w..base + e * w].iter().sum::<f64>();
                }
                let mean = sum / m as f64;
                let mut ss = 0.0;
                for ni in 0..n {
                    let base = (ni * c + ci) * h * w;
                    ss += xs[base + s * w..base + e * w]
                        .iter()
                        .map(|v| (v - mean) * (v - mean))
                        .sum::<f64>();
                }
                let var = ss / m as f64;
                let is = 1.0 / (var + eps).sqrt();
                for ni in 0..n {
                    let base = (ni * c + ci) * h * w;
                    for k in base + s * w..base + e * w {
                        out[k] = (xs[k] - mean) * is;
                    }
                }
                let gidx = ci * g + gi;
                stats.mean[gidx] = mean;
                stats.var[gidx] = var;
                stats.counts[gidx] = m;
                inv_std[gidx] = is;
            }
        }
        let rg = self.rg(x);
        let v = self.push(
            Tensor::new(vec![n, c, h, w], out)?,
            Op::GroupNorm {
                x,
                bands: bands.to_vec(),
                inv_std,
            },
            rg,
        );
        Ok((v, stats))
    }

    /// `(x - mean[c,g]) / sqrt(var[c,g] + eps)` with fixed statistics.
    pub fn fixed_norm(&mut self, x: Var, bands: &[Band], mean: &[f64], var: &[f64], eps: f64) -> Result<Var> {
        let (n, c, h, w) = self.check_bands(x, bands)?;
        let g = bands.len();
        if mean.len() != c * g || var.len() != c * g {
            return Err(Error::Shape("running statistics do not match channels × groups".into()));
        }
        let scale: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let xs = self.value(x).data();
        let mut out = vec![0.0; xs.len()];
        for ni in 0..n {
            for ci in 0..c {
                let base = (ni * c + ci) * h * w;
                for (gi, &(s, e)) in bands.iter().enumerate() {
                    let (m, sc) = (mean[ci * g + gi], scale[ci * g + gi]);
                    for k in base + s * w..base + e * w {
                        out[k] = (xs[k] - m) * sc;
                    }
                }
            }
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::new(vec![n, c, h, w], out)?,
            Op::FixedNorm {
                x,
                bands: bands.to_vec(),
                scale,
            },
            rg,
        ))
    }

    /// Per-`(channel, band)` scale and shift; `gamma`, `beta` are `C×G`.
    pub fn group_affine(&mut self, x: Var, gamma: Var, beta: Var, bands: &[Band]) -> Result<Var> {
        let (n, c, h, w) = self.check_bands(x, bands)?;
        let g = bands.len();
        if self.shape(gamma) != [c, g] || self.shape(beta) != [c, g] {
            return Err(Error::Shape(format!(
                "affine parameters must be [{c}, {g}], got {:?} and {:?}",
                self.shape(gamma),
                self.shape(beta)
            )));
        }
        let xs = self.value(x).data();
        let gs = self.value(gamma).data();
        let bs = self.value(beta).data();
        let mut out = xs.to_vec();
        for ni in 0..n {
            for ci in 0..c {
                let base = (ni * c + ci) * h * w;
                for (gi, &(s, e)) in bands.iter().enumerate() {
                    let (ga, be) = (gs[ci * g + gi], bs[ci * g + gi]);
                    for v in &mut out[base + s * w..base + e * w] {
                        *v = ga * *v + be;
                    }
                }
            }
        }
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        Ok(self.push(
            Tensor::new(vec![n, c, h, w], out)?,
            Op::GroupAffine {
                x,
                gamma,
                beta,
                bands: bands.to_vec(),
            },
            rg,
        ))
    }

    pub fn silu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let data = v.data().iter().map(|&z| z * sigmoid(z)).collect();
        let value = Tensor::new(v.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(x);
        self.push(value, Op::Silu(x), rg)
    }

    /// Elementwise sum with broadcasting over size-1 axes of equal-rank operands.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != sb.len() {
            return Err(Error::Shape(format!("cannot broadcast {sa:?} with {sb:?}")));
        }
        let mut out_shape = Vec::with_capacity(sa.len());
        for (&x, &y) in sa.iter().zip(&sb) {
            out_shape.push(match (x, y) {
                (x, y) if x == y => x,
                (1, y) => y,
                (x, 1) => x,
                _ => return Err(Error::Shape(format!("cannot broadcast {sa:?} with {sb:?}"))),
            });
        }
        let ta = broadcast_strides(&sa, &out_shape);
        let tb = broadcast_strides(&sb, &out_shape);
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; out_shape.iter().product()];
        for_each_broadcast(&out_shape, &ta, &tb, |o, i, j| out[o] = da[i] + db[j]);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(out_shape, out)?, Op::Add(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "mul needs equal shapes, got {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let v = self.value(x);
        let value = Tensor::new(v.shape().to_vec(), v.data().iter().map(|z| z * s).collect())
            .expect("same shape");
        let rg = self.rg(x);
        self.push(value, Op::Scale(x, s), rg)
    }

    /// Arithmetic mean over `axis`, keeping it with size 1.
    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::Shape(format!("axis {axis} out of range for {shape:?}")));
        }
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let xs = self.value(x).data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..len {
                let src = &xs[(o * len + k) * inner..(o * len + k + 1) * inner];
                for (d, s) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        let inv = 1.0 / len as f64;
        out.iter_mut().for_each(|v| *v *= inv);
        let mut oshape = shape;
        oshape[axis] = 1;
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(oshape, out)?, Op::MeanAxis { x, axis }, rg))
    }

    pub fn concat(&mut self, a: Var, b: Var, axis: usize) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let compatible = sa.len() == sb.len()
            && axis < sa.len()
            && sa.iter().zip(&sb).enumerate().all(|(i, (x, y))| i == axis || x == y);
        if !compatible {
            return Err(Error::Shape(format!("cannot concat {sa:?} and {sb:?} on axis {axis}")));
        }
        let outer: usize = sa[..axis].iter().product();
        let (ia, ib) = (
            sa[axis..].iter().product::<usize>(),
            sb[axis..].iter().product::<usize>(),
        );
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(da.len() + db.len());
        for o in 0..outer {
            out.extend_from_slice(&da[o * ia..(o + 1) * ia]);
            out.extend_from_slice(&db[o * ib..(o + 1) * ib]);
        }
        let mut shape = sa;
        shape[axis] += sb[axis];
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(shape, out)?, Op::Concat { a, b, axis }, rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshaped(shape)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    /// Mean negative log-softmax of the labelled class, via log-sum-exp.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (n, k) = match self.shape(logits) {
            [n, k] => (*n, *k),
            s => return Err(Error::Shape(format!("logits must be N×K, got {s:?}"))),
        };
        if n == 0 || labels.is_empty() {
            return Err(Error::InvalidArgument("cross entropy on an empty batch".into()));
        }
        if labels.len() != n {
            return Err(Error::Shape(format!("{n} logits rows but {} labels", labels.len())));
        }
        if k < 2 {
            return Err(Error::InvalidArgument("cross entropy needs at least 2 classes".into()));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidArgument(format!("label {l} out of range for {k} classes")));
        }
        let zs = self.value(logits).data();
        let mut probs = vec![0.0; n * k];
        let mut loss = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let row = &zs[i * k..(i + 1) * k];
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let se: f64 = row.iter().map(|z| (z - m).exp()).sum();
            let lse = m + se.ln();
            loss += lse - row[y];
            for (p, z) in probs[i * k..(i + 1) * k].iter_mut().zip(row) {
                *p = (z - lse).exp();
            }
        }
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(loss / n as f64),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    ///
    /// Leaf gradients accumulate on the tape and parameter gradients in
    /// `params`; repeated calls add to both.
    pub fn backward(&mut self, loss: Var, params: &mut ParamStore) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar root, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.shape(loss), 1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            self.propagate(i, g, &mut grads, params)?;
        }
        Ok(())
    }

    fn propagate(
        &mut self,
        i: usize,
        g: Tensor,
        grads: &mut [Option<Tensor>],
        params: &mut ParamStore,
    ) -> Result<()> {
        let nodes = &self.nodes;
        let acc = |grads: &mut [Option<Tensor>], v: Var, t: Tensor| {
            if !nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(e) => e.add_assign(&t),
                slot => *slot = Some(t),
            }
        };
        let gd = g.data();
        match &nodes[i].op {
            Op::Leaf => match &mut self.leaf_grads[i] {
                Some(e) => e.add_assign(&g),
                slot => *slot = Some(g),
            },
            Op::Param(id) => params.accumulate(*id, &g),
            Op::Conv2d { x, w, b, pad } => {
                let xv = &nodes[x.0].value;
                let wv = &nodes[w.0].value;
                let (n, c, h, wd) = xv.dims4()?;
                let (o, _, kh, kw) = wv.dims4()?;
                let (ph, pw) = *pad;
                let (ho, wo) = (h + 2 * ph - kh + 1, wd + 2 * pw - kw + 1);
                let (xs, ws) = (xv.data(), wv.data());
                let want_x = nodes[x.0].requires_grad;
                let want_w = nodes[w.0].requires_grad;
                let mut dx = vec![0.0; if want_x { xs.len() } else { 0 }];
                let mut dw = vec![0.0; if want_w { ws.len() } else { 0 }];
                for ni in 0..n {
                    for oi in 0..o {
                        let gplane = &gd[(ni * o + oi) * ho * wo..(ni * o + oi + 1) * ho * wo];
                        for ci in 0..c {
                            let xoff = (ni * c + ci) * h * wd;
                            for ki in 0..kh {
                                let (i0, i1) = conv_range(ki, ph, h, ho);
                                for kj in 0..kw {
                                    let (j0, j1) = conv_range(kj, pw, wd, wo);
                                    let widx = ((oi * c + ci) * kh + ki) * kw + kj;
                                    let wval = ws[widx];
                                    let mut wacc = 0.0;
                                    for ii in i0..i1 {
                                        let xi = ii + ki - ph;
                                        let gs = &gplane[ii * wo + j0..ii * wo + j1];
                                        let xr = xoff + xi * wd + j0 + kj - pw;
                                        if want_w {
                                            wacc += gs
                                                .iter()
                                                .zip(&xs[xr..xr + (j1 - j0)])
                                                .map(|(a, b)| a * b)
                                                .sum::<f64>();
                                        }
                                        if want_x {
                                            for (d, gv) in dx[xr..xr + (j1 - j0)].iter_mut().zip(gs) {
                                                *d += wval * gv;
                                            }
                                        }
                                    }
                                    if want_w {
                                        dw[widx] += wacc;
                                    }
                                }
                            }
                        }
                    }
                }
                if want_x {
                    acc(grads, *x, Tensor::new(xv.shape().to_vec(), dx)?);
                }
                if want_w {
                    acc(grads, *w, Tensor::new(wv.shape().to_vec(), dw)?);
                }
                if let Some(b) = b {
                    let mut db = vec![0.0; o];
                    for (k, v) in gd.iter().enumerate() {
                        db[(k / (ho * wo)) % o] += v;
                    }
                    acc(grads, *b, Tensor::new(vec![o], db)?);
                }
            }
            Op::Dense { x, w, b } => {
                let xv = &nodes[x.0].value;
                let wv = &nodes[w.0].value;
                let n = xv.shape()[0];
                let f = xv.numel() / n.max(1);
                let o = wv.shape()[0];
                let (xs, ws) = (xv.data(), wv.data());
                let mut dx = vec![0.0; xs.len()];
                let mut dw = vec![0.0; ws.len()];
                for ni in 0..n {
                    for oi in 0..o {
                        let gv = gd[ni * o + oi];
                        for fi in 0..f {
                            dx[ni * f + fi] += gv * ws[oi * f + fi];
                            dw[oi * f + fi] += gv * xs[ni * f + fi];
                        }
                    }
                }
                acc(grads, *x, Tensor::new(xv.shape().to_vec(), dx)?);
                acc(grads, *w, Tensor::new(wv.shape().to_vec(), dw)?);
                if let Some(b) = b {
                    let mut db = vec![0.0; o];
                    for ni in 0..n {
                        for oi in 0..o {
                            db[oi] += gd[ni * o + oi];
                        }
                    }
                    acc(grads, *b, Tensor::new(vec![o], db)?);
                }
            }
            Op::GroupNorm { x, bands, inv_std } => {
                let y = nodes[i].value.data();
                let (n, c, h, w) = nodes[x.0].value.dims4()?;
                let g = bands.len();
                let mut dx = vec![0.0; y.len()];
                for ci in 0..c {
                    for (gi, &(s, e)) in bands.iter().enumerate() {
                        let m = (n * (e - s) * w) as f64;
                        let is = inv_std[ci * g + gi];
                        let (mut sg, mut sgy) = (0.0, 0.0);
                        for ni in 0..n {
                            let base = (ni * c + ci) * h * w;
                            for k in base + s * w..base + e * w {
                                sg += gd[k];
                                sgy += gd[k] * y[k];
                            }
                        }
                        for ni in 0..n {
                            let base = (ni * c + ci) * h * w;
                            for k in base + s * w..base + e * w {
                                dx[k] = is / m * (m * gd[k] - sg - y[k] * sgy);
                            }
                        }
                    }
                }
                acc(grads, *x, Tensor::new(vec![n, c, h, w], dx)?);
            }
            Op::FixedNorm { x, bands, scale } => {
                let (n, c, h, w) = nodes[x.0].value.dims4()?;
                let g = bands.len();
                let mut dx = vec![0.0; gd.len()];
                for ni in 0..n {
                    for ci in 0..c {
                        let base = (ni * c + ci) * h * w;
                        for (gi, &(s, e)) in bands.iter().enumerate() {
                            let sc = scale[ci * g + gi];
                            for k in base + s * w..base + e * w {
                                dx[k] = gd[k] * sc;
                            }
                        }
                    }
                }
                acc(grads, *x, Tensor::new(vec![n, c, h, w], dx)?);
            }
            Op::GroupAffine { x, gamma, beta, bands } => {
                let xv = &nodes[x.0].value;
                let (n, c, h, w) = xv.dims4()?;
                let g = bands.len();
                let xs = xv.data();
                let gs = nodes[gamma.0].value.data();
                let mut dx = gd.to_vec();
                let mut dg = vec![0.0; c * g];
                let mut db = vec![0.0; c * g];
                for ni in 0..n {
                    for ci in 0..c {
                        let base = (ni * c + ci) * h * w;
                        for (gi, &(s, e)) in bands.iter().enumerate() {
                            let gidx = ci * g + gi;
                            for k in base + s * w..base + e * w {
                                dg[gidx] += gd[k] * xs[k];
                                db[gidx] += gd[k];
                                dx[k] = gd[k] * gs[gidx];
                            }
                        }
                    }
                }
                acc(grads, *x, Tensor::new(vec![n, c, h, w], dx)?);
                acc(grads, *gamma, Tensor::new(vec![c, g], dg)?);
                acc(grads, *beta, Tensor::new(vec![c, g], db)?);
            }
            Op::Silu(x) => {
                let xv = &nodes[x.0].value;
                let dx = xv
                    .data()
                    .iter()
                    .zip(gd)
                    .map(|(&z, gv)| {
                        let s = sigmoid(z);
                        gv * s * (1.0 + z * (1.0 - s))
                    })
                    .collect();
                acc(grads, *x, Tensor::new(xv.shape().to_vec(), dx)?);
            }
            Op::Add(a, b) => {
                let out = nodes[i].value.shape().to_vec();
                for v in [*a, *b] {
                    let s = nodes[v.0].value.shape().to_vec();
                    if s == out {
                        acc(grads, v, g.clone());
                    } else {
                        let st = broadcast_strides(&s, &out);
                        let mut d = vec![0.0; s.iter().product()];
                        for_each_broadcast(&out, &st, &st, |o, j, _| d[j] += gd[o]);
                        acc(grads, v, Tensor::new(s, d)?);
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                let da = gd.iter().zip(bv.data()).map(|(g, y)| g * y).collect();
                let db = gd.iter().zip(av.data()).map(|(g, x)| g * x).collect();
                acc(grads, *a, Tensor::new(av.shape().to_vec(), da)?);
                acc(grads, *b, Tensor::new(bv.shape().to_vec(), db)?);
            }
            Op::Scale(x, s) => {
                let d = gd.iter().map(|v| v * s).collect();
                acc(grads, *x, Tensor::new(g.shape().to_vec(), d)?);
            }
            Op::MeanAxis { x, axis } => {
                let shape = nodes[x.0].value.shape().to_vec();
                let outer: usize = shape[..*axis].iter().product();
                let len = shape[*axis];
                let inner: usize = shape[axis + 1..].iter().product();
                let inv = 1.0 / len as f64;
                let mut d = vec![0.0; outer * len * inner];
                for o in 0..outer {
                    for k in 0..len {
                        let dst = &mut d[(o * len + k) * inner..(o * len + k + 1) * inner];
                        for (dv, gv) in dst.iter_mut().zip(&gd[o * inner..(o + 1) * inner]) {
                            *dv = gv * inv;
                        }
                    }
                }
                acc(grads, *x, Tensor::new(shape, d)?);
            }
            Op::Concat { a, b, axis } => {
                let sa = nodes[a.0].value.shape().to_vec();
                let sb = nodes[b.0].value.shape().to_vec();
                let outer: usize = sa[..*axis].iter().product();
                let ia: usize = sa[*axis..].iter().product();
                let ib: usize = sb[*axis..].iter().product();
                let mut da = Vec::with_capacity(outer * ia);
                let mut db = Vec::with_capacity(outer * ib);
                for o in 0..outer {
                    let base = o * (ia + ib);
                    da.extend_from_slice(&gd[base..base + ia]);
                    db.extend_from_slice(&gd[base + ia..base + ia + ib]);
                }
                acc(grads, *a, Tensor::new(sa, da)?);
                acc(grads, *b, Tensor::new(sb, db)?);
            }
            Op::Reshape(x) => {
                let s = nodes[x.0].value.shape().to_vec();
                acc(grads, *x, g.reshaped(&s)?);
            }
            Op::Sum(x) => {
                let s = nodes[x.0].value.shape();
                acc(grads, *x, Tensor::full(s, gd[0]));
            }
            Op::CrossEntropy { logits, labels, probs } => {
                let s = nodes[logits.0].value.shape().to_vec();
                let (n, k) = (s[0], s[1]);
                let scale = gd[0] / n as f64;
                let mut d: Vec<f64> = probs.iter().map(|p| p * scale).collect();
                for (r, &y) in labels.iter().enumerate() {
                    d[r * k + y] -= scale;
                }
                acc(grads, *logits, Tensor::new(s, d)?);
            }
        }
        Ok(())
    }
}
