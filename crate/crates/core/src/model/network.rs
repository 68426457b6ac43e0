//! Forward pass and hand-derived reverse pass.
//!
//! Activations use a node-time-major layout: a block input is a
//! `(N*T) x C` matrix whose row `n*T + t` holds the channels of node `n`
//! at segment `t`. Reshaped to `N x (T*C)` the same buffer is the operand
//! of the graph operators, so channel mixing, graph propagation and the
//! temporal convolution (via im2col) are all single matrix products.

use ndarray::{s, Array1, Array2, ArrayView2, ArrayView3, Axis};
use rand::{Rng, RngCore};

use super::{AttentionCombine, BlockParams, Hyper, ModelParams};
use crate::error::{Error, Result};
use crate::graph::ChebBasis;

/// Dropout behaviour of a forward pass. Anything but `Off` is train mode
/// and records an [`Activation`] cache.
pub enum Dropout<'a> {
    /// Eval mode: no dropout, no cache.
    Off,
    /// Train mode with freshly sampled masks.
    Sample(&'a mut dyn RngCore),
    /// Train mode with given masks (already scaled by `1/(1-rate)`),
    /// one `(N*T) x C_out` matrix per block.
    Fixed(&'a [Array2<f64>]),
}

pub struct ForwardOutput {
    pub logits: Array1<f64>,
    pub cache: Option<Activation>,
}

/// Intermediates of one train-mode forward pass.
#[derive(Debug, Clone)]
pub struct Activation {
    blocks: Vec<BlockCache>,
    pooled: Array1<f64>,
    n: usize,
    t: usize,
}

impl Activation {
    /// Dropout masks used in this pass.
    pub fn masks(&self) -> Vec<Array2<f64>> {
        self.blocks.iter().map(|b| b.mask.clone()).collect()
    }

    /// Spatial attention matrices, one per block.
    pub fn spatial_attention(&self) -> Vec<&Array2<f64>> {
        self.blocks.iter().map(|b| &b.s_soft).collect()
    }

    /// Temporal attention matrices, one per block.
    pub fn temporal_attention(&self) -> Vec<&Array2<f64>> {
        self.blocks.iter().map(|b| &b.e_soft).collect()
    }

    /// Block outputs after dropout, `(N*T) x C`.
    pub fn block_output(&self, block: usize) -> Array2<f64> {
        let b = &self.blocks[block];
        b.u.mapv(relu) * &b.mask
    }
}

#[derive(Debug, Clone)]
struct BlockCache {
    x: Array2<f64>,
    ta_a: Array2<f64>,
    ta_l: Array2<f64>,
    ta_r: Array2<f64>,
    ta_g: Array2<f64>,
    e_soft: Array2<f64>,
    x_hat: Array2<f64>,
    sa_a: Array2<f64>,
    sa_l: Array2<f64>,
    sa_r: Array2<f64>,
    sa_h: Array2<f64>,
    s_soft: Array2<f64>,
    ops: Vec<Array2<f64>>,
    zcat: Array2<f64>,
    y: Array2<f64>,
    col: Array2<f64>,
    u: Array2<f64>,
    mask: Array2<f64>,
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

fn step(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else {
        0.0
    }
}

pub(crate) fn softmax_rows(m: &Array2<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Gradient w.r.t. the pre-softmax matrix given the softmax output `s`
/// and the gradient `ds` w.r.t. it.
fn softmax_rows_backward(s: &Array2<f64>, ds: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(s.raw_dim());
    for ((srow, drow), mut orow) in s.rows().into_iter().zip(ds.rows()).zip(out.rows_mut()) {
        let dot: f64 = srow.iter().zip(drow.iter()).map(|(a, b)| a * b).sum();
        for ((o, &sv), &dv) in orow.iter_mut().zip(srow.iter()).zip(drow.iter()) {
            *o = sv * (dv - dot);
        }
    }
    out
}

fn node_rows(x: &Array2<f64>, node: usize, t: usize) -> ArrayView2<'_, f64> {
    x.slice(s![node * t..(node + 1) * t, ..])
}

/// `N x C x T` features to the `(N*T) x C` activation layout.
pub(crate) fn to_rows(values: ArrayView3<f64>) -> Array2<f64> {
    let (n, c, t) = values.dim();
    Array2::from_shape_fn((n * t, c), |(r, ch)| values[[r / t, ch, r % t]])
}

/// Inverse of [`to_rows`].
pub(crate) fn from_rows(x: &Array2<f64>, n: usize, t: usize) -> ndarray::Array3<f64> {
    let c = x.ncols();
    ndarray::Array3::from_shape_fn((n, c, t), |(node, ch, seg)| x[[node * t + seg, ch]])
}

/// Temporal attention `E'` (`T x T`) and its intermediates.
pub(crate) fn temporal_attention_rows(
    x: &Array2<f64>,
    p: &BlockParams,
    n: usize,
    t: usize,
) -> (Array2<f64>, [Array2<f64>; 4]) {
    let c = x.ncols();
    let mut a = Array2::zeros((t, c));
    for node in 0..n {
        a.scaled_add(p.m1[node], &node_rows(x, node, t));
    }
    let l = a.dot(&p.m2);
    let r = x
        .dot(&p.m3)
        .into_shape_with_order((n, t))
        .expect("contiguous");
    let pre = l.dot(&r) + &p.b_q;
    let g = pre.mapv(sigmoid);
    let e_soft = softmax_rows(&(&p.v_e * &g));
    (e_soft, [a, l, r, g])
}

/// `X^_{n,:,t} = sum_s E'_{t,s} X_{n,:,s}`.
pub(crate) fn temporal_mix(x: &Array2<f64>, e_soft: &Array2<f64>, n: usize, t: usize) -> Array2<f64> {
    let mut out = Array2::zeros(x.raw_dim());
    for node in 0..n {
        out.slice_mut(s![node * t..(node + 1) * t, ..])
            .assign(&e_soft.dot(&node_rows(x, node, t)));
    }
    out
}

/// Spatial attention `S'` (`N x N`) and its intermediates.
pub(crate) fn spatial_attention_rows(
    x: &Array2<f64>,
    p: &BlockParams,
    n: usize,
    t: usize,
) -> (Array2<f64>, [Array2<f64>; 4]) {
    let c = x.ncols();
    let mut a = Array2::zeros((n, c));
    for node in 0..n {
        a.row_mut(node).assign(&p.w1.dot(&node_rows(x, node, t)));
    }
    let l = a.dot(&p.w2);
    let r = x
        .dot(&p.w3)
        .into_shape_with_order((n, t))
        .expect("contiguous");
    let pre = l.dot(&r.t()) + &p.b_p;
    let h = pre.mapv(sigmoid);
    let s_soft = softmax_rows(&(&p.v_p * &h));
    (s_soft, [a, l, r, h])
}

/// Graph operators for each Chebyshev order under `combine`.
pub(crate) fn graph_operators(
    basis: &ChebBasis,
    s_soft: &Array2<f64>,
    combine: AttentionCombine,
) -> Vec<Array2<f64>> {
    match combine {
        AttentionCombine::Product => basis.terms.iter().map(|tp| tp * s_soft).collect(),
        AttentionCombine::Substitute => {
            let k = basis.order();
            let n = s_soft.nrows();
            let mut ops = vec![Array2::eye(n)];
            if k >= 2 {
                ops.push(s_soft.clone());
            }
            for p in 2..k {
                let next = s_soft.dot(&ops[p - 1]) * 2.0 - &ops[p - 2];
                ops.push(next);
            }
            ops
        }
    }
}

/// `[A_0 X | A_1 X | ...]` in row layout, `(N*T) x (K*C)`.
pub(crate) fn propagate(x: &Array2<f64>, ops: &[Array2<f64>], n: usize, t: usize) -> Array2<f64> {
    let c = x.ncols();
    let wide = x.view().into_shape_with_order((n, t * c)).expect("contiguous");
    let mut zcat = Array2::zeros((n * t, ops.len() * c));
    for (p, op) in ops.iter().enumerate() {
        let z = op.dot(&wide).into_shape_with_order((n * t, c)).expect("contiguous");
        zcat.slice_mut(s![.., p * c..(p + 1) * c]).assign(&z);
    }
    zcat
}

/// Zero-padded im2col along time: row `n*T + t`, column block `k` holds
/// the input at segment `t + k - (K_t - 1)/2`.
fn im2col(r: &Array2<f64>, n: usize, t: usize, kt: usize) -> Array2<f64> {
    let c = r.ncols();
    let half = (kt - 1) / 2;
    let mut col = Array2::zeros((n * t, kt * c));
    for node in 0..n {
        for seg in 0..t {
            for k in 0..kt {
                let src = seg as isize + k as isize - half as isize;
                if src >= 0 && (src as usize) < t {
                    col.slice_mut(s![node * t + seg, k * c..(k + 1) * c])
                        .assign(&r.row(node * t + src as usize));
                }
            }
        }
    }
    col
}

fn col2im(dcol: &Array2<f64>, n: usize, t: usize, kt: usize, c: usize) -> Array2<f64> {
    let half = (kt - 1) / 2;
    let mut dr = Array2::zeros((n * t, c));
    for node in 0..n {
        for seg in 0..t {
            for k in 0..kt {
                let src = seg as isize + k as isize - half as isize;
                if src >= 0 && (src as usize) < t {
                    let mut dst = dr.row_mut(node * t + src as usize);
                    dst += &dcol.slice(s![node * t + seg, k * c..(k + 1) * c]);
                }
            }
        }
    }
    dr
}

/// `phi[o, c, k]` as a `(K_t*C) x C_out` matrix matching [`im2col`].
pub(crate) fn kernel_matrix(phi: &ndarray::Array3<f64>) -> Array2<f64> {
    let (c_out, c_in, kt) = phi.dim();
    Array2::from_shape_fn((kt * c_in, c_out), |(row, o)| phi[[o, row % c_in, row / c_in]])
}

/// Temporal convolution without the activation: `(N*T) x C_out`.
pub(crate) fn temporal_conv_rows(
    r: &Array2<f64>,
    phi: &ndarray::Array3<f64>,
    n: usize,
    t: usize,
) -> (Array2<f64>, Array2<f64>) {
    let kt = phi.dim().2;
    let col = im2col(r, n, t, kt);
    let u = col.dot(&kernel_matrix(phi));
    (u, col)
}

fn theta_matrix(theta: &ndarray::Array3<f64>) -> ArrayView2<'_, f64> {
    let (k, ci, co) = theta.dim();
    theta
        .view()
        .into_shape_with_order((k * ci, co))
        .expect("contiguous")
}

fn sample_mask(rng: &mut dyn RngCore, shape: (usize, usize), rate: f64) -> Array2<f64> {
    if rate == 0.0 {
        return Array2::ones(shape);
    }
    let keep = 1.0 / (1.0 - rate);
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < rate { 0.0 } else { keep })
}

fn block_forward(
    x: Array2<f64>,
    p: &BlockParams,
    basis: &ChebBasis,
    hyper: &Hyper,
    mask: Option<Array2<f64>>,
) -> (Array2<f64>, BlockCache) {
    let (n, t) = (hyper.n_nodes, hyper.n_segments);
    let (e_soft, [ta_a, ta_l, ta_r, ta_g]) = temporal_attention_rows(&x, p, n, t);
    let x_hat = temporal_mix(&x, &e_soft, n, t);
    let (s_soft, [sa_a, sa_l, sa_r, sa_h]) = spatial_attention_rows(&x_hat, p, n, t);
    let ops = graph_operators(basis, &s_soft, hyper.combine);
    let zcat = propagate(&x_hat, &ops, n, t);
    let y = zcat.dot(&theta_matrix(&p.theta));
    let (u, col) = temporal_conv_rows(&y.mapv(relu), &p.phi, n, t);
    let mask = mask.unwrap_or_else(|| Array2::ones(u.raw_dim()));
    let out = u.mapv(relu) * &mask;
    let cache = BlockCache {
        x,
        ta_a,
        ta_l,
        ta_r,
        ta_g,
        e_soft,
        x_hat,
        sa_a,
        sa_l,
        sa_r,
        sa_h,
        s_soft,
        ops,
        zcat,
        y,
        col,
        u,
        mask,
    };
    (out, cache)
}

fn check_dims(
    features: ArrayView3<f64>,
    params: &ModelParams,
    hyper: &Hyper,
    basis: &ChebBasis,
) -> Result<()> {
    let (n, f, t) = features.dim();
    if (n, f, t) != (hyper.n_nodes, hyper.in_channels, hyper.n_segments) {
        return Err(Error::Shape(format!(
            "features are {n}x{f}x{t}, model expects {}x{}x{}",
            hyper.n_nodes, hyper.in_channels, hyper.n_segments
        )));
    }
    if basis.n() != n || basis.order() != hyper.cheb_order {
        return Err(Error::Shape(format!(
            "basis has {} nodes and order {}, model expects {n} and {}",
            basis.n(),
            basis.order(),
            hyper.cheb_order
        )));
    }
    if params.blocks.len() != hyper.n_blocks
        || params.blocks.first().map(|b| b.c_in()) != Some(f)
        || params.head_w.dim() != (hyper.n_classes, hyper.width)
    {
        return Err(Error::Shape("parameters do not match the hyperparameters".into()));
    }
    Ok(())
}

/// Logits for one `N x F x T` feature tensor. Train mode (any `dropout`
/// other than `Off`) also returns the cache needed by [`backward`].
pub fn forward(
    features: ArrayView3<f64>,
    params: &ModelParams,
    hyper: &Hyper,
    basis: &ChebBasis,
    mut dropout: Dropout<'_>,
) -> Result<ForwardOutput> {
    check_dims(features, params, hyper, basis)?;
    if let Dropout::Fixed(masks) = &dropout {
        if masks.len() != params.blocks.len() {
            return Err(Error::Shape(format!(
                "{} dropout masks for {} blocks",
                masks.len(),
                params.blocks.len()
            )));
        }
    }
    let (n, t) = (hyper.n_nodes, hyper.n_segments);
    let train = !matches!(dropout, Dropout::Off);
    let mut x = to_rows(features);
    let mut caches = Vec::with_capacity(params.blocks.len());
    for (i, p) in params.blocks.iter().enumerate() {
        let shape = (n * t, p.c_out());
        let mask = match &mut dropout {
            Dropout::Off => None,
            Dropout::Sample(rng) => Some(sample_mask(&mut **rng, shape, hyper.dropout)),
            Dropout::Fixed(masks) => {
                if masks[i].dim() != shape {
                    return Err(Error::Shape(format!("dropout mask {i} has the wrong shape")));
                }
                Some(masks[i].clone())
            }
        };
        let (out, cache) = block_forward(x, p, basis, hyper, mask);
        x = out;
        if train {
            caches.push(cache);
        }
    }
    let pooled = x.mean_axis(Axis(0)).expect("non-empty activations");
    let logits = params.head_w.dot(&pooled) + &params.head_b;
    let cache = train.then_some(Activation {
        blocks: caches,
        pooled,
        n,
        t,
    });
    Ok(ForwardOutput { logits, cache })
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

fn block_backward(
    c: &BlockCache,
    p: &BlockParams,
    g: &mut BlockParams,
    basis: &ChebBasis,
    hyper: &Hyper,
    d_out: Array2<f64>,
    n: usize,
    t: usize,
) -> Array2<f64> {
    let c_in = c.x.ncols();
    let kt = p.phi.dim().2;
    let k = c.ops.len();

    // dropout and output ReLU
    let du = d_out * &c.mask * &c.u.mapv(step);

    // temporal convolution
    let wphi = kernel_matrix(&p.phi);
    let dw = c.col.t().dot(&du);
    let c_mid = p.c_out();
    for ((row, o), v) in dw.indexed_iter() {
        g.phi[[o, row % c_mid, row / c_mid]] += v;
    }
    let dcol = du.dot(&wphi.t());
    let dr = col2im(&dcol, n, t, kt, c_mid);
    let dy = dr * &c.y.mapv(step);

    // channel mixing
    let dtheta = c.zcat.t().dot(&dy);
    let (kk, ci, co) = g.theta.dim();
    g.theta += &dtheta.into_shape_with_order((kk, ci, co)).expect("contiguous");
    let dz = dy.dot(&theta_matrix(&p.theta).t());

    // graph propagation
    let xh_wide = c
        .x_hat
        .view()
        .into_shape_with_order((n, t * c_in))
        .expect("contiguous");
    let mut dxh = Array2::<f64>::zeros((n, t * c_in));
    let mut dops = Vec::with_capacity(k);
    for (pi, op) in c.ops.iter().enumerate() {
        let dz_p = dz
            .slice(s![.., pi * c_in..(pi + 1) * c_in])
            .to_owned()
            .into_shape_with_order((n, t * c_in))
            .expect("contiguous");
        dops.push(dz_p.dot(&xh_wide.t()));
        dxh += &op.t().dot(&dz_p);
    }
    let mut dxh = dxh.into_shape_with_order((n * t, c_in)).expect("contiguous");

    let ds_soft = match hyper.combine {
        AttentionCombine::Product => {
            let mut acc = Array2::<f64>::zeros((n, n));
            for (dop, tp) in dops.iter().zip(&basis.terms) {
                acc += &(dop * tp);
            }
            acc
        }
        AttentionCombine::Substitute => {
            let mut acc = Array2::<f64>::zeros((n, n));
            let mut gp = dops;
            for pi in (2..k).rev() {
                let cur = gp[pi].clone();
                acc += &(cur.dot(&c.ops[pi - 1].t()) * 2.0);
                gp[pi - 1] += &(c.s_soft.t().dot(&cur) * 2.0);
                gp[pi - 2] -= &cur;
            }
            if k >= 2 {
                acc += &gp[1];
            }
            acc
        }
    };

    // spatial attention
    let ds = softmax_rows_backward(&c.s_soft, &ds_soft);
    g.v_p += &(&ds * &c.sa_h);
    let dq = &ds * &p.v_p * &c.sa_h.mapv(|h| h * (1.0 - h));
    g.b_p += &dq;
    let dsl = dq.dot(&c.sa_r);
    let dsr = dq.t().dot(&c.sa_l);
    g.w2 += &c.sa_a.t().dot(&dsl);
    let dsa = dsl.dot(&p.w2.t());
    for node in 0..n {
        let xn = node_rows(&c.x_hat, node, t);
        let dsa_row = dsa.row(node).to_owned();
        g.w1 += &xn.dot(&dsa_row);
        dxh.slice_mut(s![node * t..(node + 1) * t, ..])
            .scaled_add(1.0, &outer(&p.w1, &dsa_row));
    }
    let dsr_flat = dsr.into_shape_with_order(n * t).expect("contiguous");
    g.w3 += &c.x_hat.t().dot(&dsr_flat);
    dxh += &outer(&dsr_flat, &p.w3);

    // temporal mixing
    let mut de_soft = Array2::<f64>::zeros((t, t));
    let mut dx = Array2::<f64>::zeros((n * t, c_in));
    for node in 0..n {
        let xn = node_rows(&c.x, node, t);
        let dxhn = node_rows(&dxh, node, t);
        de_soft += &dxhn.dot(&xn.t());
        dx.slice_mut(s![node * t..(node + 1) * t, ..])
            .assign(&c.e_soft.t().dot(&dxhn));
    }

    // temporal attention
    let de = softmax_rows_backward(&c.e_soft, &de_soft);
    g.v_e += &(&de * &c.ta_g);
    let dpre = &de * &p.v_e * &c.ta_g.mapv(|v| v * (1.0 - v));
    g.b_q += &dpre;
    let dl = dpre.dot(&c.ta_r.t());
    let dr_att = c.ta_l.t().dot(&dpre);
    g.m2 += &c.ta_a.t().dot(&dl);
    let da = dl.dot(&p.m2.t());
    for node in 0..n {
        let xn = node_rows(&c.x, node, t);
        g.m1[node] += (&xn * &da).sum();
        dx.slice_mut(s![node * t..(node + 1) * t, ..])
            .scaled_add(p.m1[node], &da);
    }
    let dr_flat = dr_att.into_shape_with_order(n * t).expect("contiguous");
    g.m3 += &c.x.t().dot(&dr_flat);
    dx += &outer(&dr_flat, &p.m3);
    dx
}

/// Exact parameter gradients of a scalar loss given `d loss / d logits`.
pub fn backward(
    cache: Option<&Activation>,
    params: &ModelParams,
    hyper: &Hyper,
    basis: &ChebBasis,
    d_logits: &Array1<f64>,
) -> Result<ModelParams> {
    let cache = cache.ok_or(Error::MissingCache)?;
    if d_logits.len() != params.head_b.len() {
        return Err(Error::Shape(format!(
            "upstream gradient has {} entries for {} classes",
            d_logits.len(),
            params.head_b.len()
        )));
    }
    let mut grads = params.zeros_like();
    grads.head_w = outer(d_logits, &cache.pooled);
    grads.head_b = d_logits.clone();
    let d_pooled = params.head_w.t().dot(d_logits);
    let (n, t) = (cache.n, cache.t);
    let rows = (n * t) as f64;
    let mut d = Array2::from_shape_fn((n * t, d_pooled.len()), |(_, ch)| d_pooled[ch] / rows);
    for (i, (c, p)) in cache.blocks.iter().zip(&params.blocks).enumerate().rev() {
        d = block_backward(c, p, &mut grads.blocks[i], basis, hyper, d, n, t);
    }
    Ok(grads)
}
