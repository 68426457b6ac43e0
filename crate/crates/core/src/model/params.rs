use ndarray::{Array1, Array2, Array3, Dimension};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Hyper;
use crate::error::{Error, Result};

/// Learnable tensors of one attention + graph-conv + temporal-conv block.
///
/// Index contracts (input `X` is `nodes x C x T`):
/// * spatial: `S = v_p . sigmoid((X w1) w2 (w3 X)^T + b_p)`, with
///   `X w1: N x C`, `w2: C x T`, `w3 X: N x T`
/// * temporal: `E = v_e . sigmoid((X^T m1) m2 (m3 X) + b_q)`, with
///   `X^T m1: T x C`, `m2: C x N`, `m3 X: N x T`
/// * graph conv `theta: K x C_in x C_out`, temporal kernel
///   `phi: C_out x C_out x K_t`
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub v_p: Array2<f64>,
    pub b_p: Array2<f64>,
    pub w1: Array1<f64>,
    pub w2: Array2<f64>,
    pub w3: Array1<f64>,
    pub v_e: Array2<f64>,
    pub b_q: Array2<f64>,
    pub m1: Array1<f64>,
    pub m2: Array2<f64>,
    pub m3: Array1<f64>,
    pub theta: Array3<f64>,
    pub phi: Array3<f64>,
}

pub const BLOCK_TENSOR_NAMES: [&str; 12] = [
    "v_p", "b_p", "w1", "w2", "w3", "v_e", "b_q", "m1", "m2", "m3", "theta", "phi",
];

impl BlockParams {
    pub fn zeros(n: usize, t: usize, c_in: usize, c_out: usize, k: usize, kt: usize) -> Self {
        Self {
            v_p: Array2::zeros((n, n)),
            b_p: Array2::zeros((n, n)),
            w1: Array1::zeros(t),
            w2: Array2::zeros((c_in, t)),
            w3: Array1::zeros(c_in),
            v_e: Array2::zeros((t, t)),
            b_q: Array2::zeros((t, t)),
            m1: Array1::zeros(n),
            m2: Array2::zeros((c_in, n)),
            m3: Array1::zeros(c_in),
            theta: Array3::zeros((k, c_in, c_out)),
            phi: Array3::zeros((c_out, c_out, kt)),
        }
    }

    pub fn c_in(&self) -> usize {
        self.w3.len()
    }

    pub fn c_out(&self) -> usize {
        self.phi.dim().0
    }

    fn shapes(&self) -> Vec<Vec<usize>> {
        vec![
            self.v_p.shape().to_vec(),
            self.b_p.shape().to_vec(),
            self.w1.shape().to_vec(),
            self.w2.shape().to_vec(),
            self.w3.shape().to_vec(),
            self.v_e.shape().to_vec(),
            self.b_q.shape().to_vec(),
            self.m1.shape().to_vec(),
            self.m2.shape().to_vec(),
            self.m3.shape().to_vec(),
            self.theta.shape().to_vec(),
            self.phi.shape().to_vec(),
        ]
    }

    fn slices(&self) -> Vec<&[f64]> {
        vec![
            slice(&self.v_p),
            slice(&self.b_p),
            slice(&self.w1),
            slice(&self.w2),
            slice(&self.w3),
            slice(&self.v_e),
            slice(&self.b_q),
            slice(&self.m1),
            slice(&self.m2),
            slice(&self.m3),
            slice(&self.theta),
            slice(&self.phi),
        ]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            slice_mut(&mut self.v_p),
            slice_mut(&mut self.b_p),
            slice_mut(&mut self.w1),
            slice_mut(&mut self.w2),
            slice_mut(&mut self.w3),
            slice_mut(&mut self.v_e),
            slice_mut(&mut self.b_q),
            slice_mut(&mut self.m1),
            slice_mut(&mut self.m2),
            slice_mut(&mut self.m3),
            slice_mut(&mut self.theta),
            slice_mut(&mut self.phi),
        ]
    }
}

fn slice<D: Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("parameter tensors are contiguous")
}

fn slice_mut<D: Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut().expect("parameter tensors are contiguous")
}

/// All learnable tensors. Gradients and optimizer moments use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub blocks: Vec<BlockParams>,
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
}

impl ModelParams {
    pub fn zeros(hyper: &Hyper) -> Self {
        let plan = hyper.channel_plan();
        let blocks = plan
            .windows(2)
            .map(|w| {
                BlockParams::zeros(
                    hyper.n_nodes,
                    hyper.n_segments,
                    w[0],
                    w[1],
                    hyper.cheb_order,
                    hyper.temporal_kernel,
                )
            })
            .collect();
        Self {
            blocks,
            head_w: Array2::zeros((hyper.n_classes, *plan.last().expect("non-empty plan"))),
            head_b: Array1::zeros(hyper.n_classes),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    pub fn fill(&mut self, value: f64) {
        for s in self.tensors_mut() {
            s.fill(value);
        }
    }

    /// Tensors in a fixed order: per block in [`BLOCK_TENSOR_NAMES`] order,
    /// then the head weight and bias.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.blocks.iter().flat_map(|b| b.slices()).collect();
        out.push(slice(&self.head_w));
        out.push(slice(&self.head_b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self
            .blocks
            .iter_mut()
            .flat_map(|b| b.slices_mut())
            .collect();
        out.push(slice_mut(&mut self.head_w));
        out.push(slice_mut(&mut self.head_b));
        out
    }

    /// `(name, shape)` in [`Self::tensors`] order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            for (name, shape) in BLOCK_TENSOR_NAMES.iter().zip(b.shapes()) {
                out.push((format!("block{i}.{name}"), shape));
            }
        }
        out.push(("head.w".into(), self.head_w.shape().to_vec()));
        out.push(("head.b".into(), self.head_b.shape().to_vec()));
        out
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|s| s.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) -> Result<()> {
        let src = other.tensors();
        let mut dst = self.tensors_mut();
        if src.len() != dst.len() || src.iter().zip(dst.iter()).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::Shape("parameter sets have different layouts".into()));
        }
        for (d, s) in dst.iter_mut().zip(src) {
            for (x, y) in d.iter_mut().zip(s) {
                *x += scale * y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for s in self.tensors_mut() {
            s.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Deterministic initialization for `seed`.
    ///
    /// Every weight tensor is drawn uniformly from `[-b, b]` with `b`
    /// scaled by its fan-in; attention and head biases start at zero.
    /// The Chebyshev coefficients carry an extra factor `N`: each
    /// attention-gated operator `T_p . S'` has row mass of order `1/N`
    /// under near-uniform attention.
    pub fn init(hyper: &Hyper, seed: u64) -> Result<Self> {
        hyper.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Self::zeros(hyper);
        let n = hyper.n_nodes as f64;
        let t = hyper.n_segments as f64;
        let k = hyper.cheb_order as f64;
        let kt = hyper.temporal_kernel as f64;
        for b in params.blocks.iter_mut() {
            let c_in = b.c_in() as f64;
            let c_out = b.c_out() as f64;
            uniform(&mut rng, &mut b.v_p, 1.0 / n.sqrt());
            uniform(&mut rng, &mut b.w1, 1.0 / t.sqrt());
            uniform(&mut rng, &mut b.w2, 1.0 / c_in.sqrt());
            uniform(&mut rng, &mut b.w3, 1.0 / c_in.sqrt());
            uniform(&mut rng, &mut b.v_e, 1.0 / t.sqrt());
            uniform(&mut rng, &mut b.m1, 1.0 / n.sqrt());
            uniform(&mut rng, &mut b.m2, 1.0 / c_in.sqrt());
            uniform(&mut rng, &mut b.m3, 1.0 / c_in.sqrt());
            uniform(&mut rng, &mut b.theta, n * (6.0 / (k * c_in)).sqrt());
            uniform(&mut rng, &mut b.phi, (6.0 / (c_out * kt)).sqrt());
        }
        let c_last = params.head_w.ncols() as f64;
        uniform(&mut rng, &mut params.head_w, 1.0 / c_last.sqrt());
        Ok(params)
    }
}

fn uniform<D: Dimension>(rng: &mut ChaCha8Rng, a: &mut ndarray::Array<f64, D>, bound: f64) {
    for v in a.iter_mut() {
        *v = rng.random_range(-bound..bound);
    }
}
