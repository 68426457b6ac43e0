//! Single-layer operations on `N x C x T` tensors.

use ndarray::{Array2, Array3, ArrayView3};

use super::network::{
    from_rows, graph_operators, propagate, spatial_attention_rows, temporal_attention_rows,
    temporal_conv_rows, temporal_mix, to_rows,
};
use super::{AttentionCombine, BlockParams};
use crate::error::{Error, Result};
use crate::graph::ChebBasis;

fn check_attention(x: ArrayView3<f64>, p: &BlockParams) -> Result<()> {
    let (n, c, t) = x.dim();
    let ok = p.v_p.dim() == (n, n)
        && p.b_p.dim() == (n, n)
        && p.w1.len() == t
        && p.w2.dim() == (c, t)
        && p.w3.len() == c
        && p.v_e.dim() == (t, t)
        && p.b_q.dim() == (t, t)
        && p.m1.len() == n
        && p.m2.dim() == (c, n)
        && p.m3.len() == c;
    if ok {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "attention parameters do not fit a {n}x{c}x{t} input"
        )))
    }
}

/// Row-stochastic `N x N` spatial attention.
pub fn spatial_attention(x: ArrayView3<f64>, p: &BlockParams) -> Result<Array2<f64>> {
    check_attention(x, p)?;
    let (n, _, t) = x.dim();
    Ok(spatial_attention_rows(&to_rows(x), p, n, t).0)
}

/// Row-stochastic `T x T` temporal attention.
pub fn temporal_attention(x: ArrayView3<f64>, p: &BlockParams) -> Result<Array2<f64>> {
    check_attention(x, p)?;
    let (n, _, t) = x.dim();
    Ok(temporal_attention_rows(&to_rows(x), p, n, t).0)
}

/// Mixes time slices: `out[:, :, t] = sum_s e[t, s] x[:, :, s]`.
pub fn apply_temporal_attention(x: ArrayView3<f64>, e: &Array2<f64>) -> Result<Array3<f64>> {
    let (n, _, t) = x.dim();
    if e.dim() != (t, t) {
        return Err(Error::Shape(format!("temporal attention must be {t}x{t}")));
    }
    Ok(from_rows(&temporal_mix(&to_rows(x), e, n, t), n, t))
}

/// Attention-gated Chebyshev graph convolution, `theta: K x C_in x C_out`.
pub fn cheb_graph_conv(
    x: ArrayView3<f64>,
    basis: &ChebBasis,
    s_att: &Array2<f64>,
    theta: &Array3<f64>,
    combine: AttentionCombine,
) -> Result<Array3<f64>> {
    let (n, c, t) = x.dim();
    let (k, ci, co) = theta.dim();
    if basis.order() != k || basis.n() != n || ci != c || s_att.dim() != (n, n) {
        return Err(Error::Shape(format!(
            "graph conv: input {n}x{c}x{t}, basis order {} on {} nodes, theta {k}x{ci}x{co}",
            basis.order(),
            basis.n()
        )));
    }
    let ops = graph_operators(basis, s_att, combine);
    let zcat = propagate(&to_rows(x), &ops, n, t);
    let w = theta
        .view()
        .into_shape_with_order((k * ci, co))
        .expect("contiguous");
    Ok(from_rows(&zcat.dot(&w), n, t))
}

/// Same-padded temporal convolution followed by ReLU,
/// `phi: C_out x C_in x K_t`.
pub fn temporal_conv(y: ArrayView3<f64>, phi: &Array3<f64>) -> Result<Array3<f64>> {
    let (n, c, t) = y.dim();
    let (_, ci, kt) = phi.dim();
    if kt % 2 == 0 {
        return Err(Error::InvalidArgument(format!("temporal kernel must be odd, got {kt}")));
    }
    if ci != c {
        return Err(Error::Shape(format!("kernel expects {ci} channels, input has {c}")));
    }
    let (u, _) = temporal_conv_rows(&to_rows(y), phi, n, t);
    Ok(from_rows(&u.mapv(|v| v.max(0.0)), n, t))
}
