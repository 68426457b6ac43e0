//! The attention-gated spatial-temporal graph convolution network.
//!
//! Each block applies temporal attention (mixing time segments),
//! spatial attention (gating the graph operators), Chebyshev graph
//! convolution, ReLU, a channel-mixing temporal convolution with ReLU, and
//! dropout in training mode. A global average pool over nodes and time
//! feeds a dense classifier.

mod checkpoint;
mod network;
pub mod ops;
mod params;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use network::{backward, forward, Activation, Dropout, ForwardOutput};
pub use params::{BlockParams, ModelParams, BLOCK_TENSOR_NAMES};

use crate::error::{Error, Result};

/// How the spatial attention matrix enters the graph convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttentionCombine {
    /// `T_p(L~) . S'` elementwise for every Chebyshev order.
    #[default]
    Product,
    /// `T_p(S')`: the attention matrix replaces the scaled Laplacian as
    /// the polynomial argument.
    Substitute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyper {
    pub n_nodes: usize,
    pub n_segments: usize,
    pub in_channels: usize,
    pub n_blocks: usize,
    /// Output channels of every block.
    pub width: usize,
    pub cheb_order: usize,
    pub temporal_kernel: usize,
    pub dropout: f64,
    pub n_classes: usize,
    pub combine: AttentionCombine,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            n_nodes: 22,
            n_segments: 9,
            in_channels: 22,
            n_blocks: 4,
            width: 64,
            cheb_order: 3,
            temporal_kernel: 3,
            dropout: 0.5,
            n_classes: 4,
            combine: AttentionCombine::Product,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_blocks == 0 {
            return bad("n_blocks must be >= 1".into());
        }
        if self.cheb_order == 0 {
            return bad("cheb_order must be >= 1".into());
        }
        if self.temporal_kernel % 2 == 0 {
            return bad(format!("temporal kernel must be odd, got {}", self.temporal_kernel));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.n_nodes < 2 || self.n_segments == 0 || self.in_channels == 0 || self.width == 0 {
            return bad("node, segment and channel counts must be positive (>= 2 nodes)".into());
        }
        if self.n_classes < 2 {
            return bad("need at least 2 classes".into());
        }
        Ok(())
    }

    /// Channels entering each block followed by the final width.
    pub fn channel_plan(&self) -> Vec<usize> {
        std::iter::once(self.in_channels)
            .chain(std::iter::repeat_n(self.width, self.n_blocks))
            .collect()
    }

    /// Multiply-adds of one forward pass (matrix products only).
    pub fn forward_macs(&self) -> u64 {
        let n = self.n_nodes as u64;
        let t = self.n_segments as u64;
        let k = self.cheb_order as u64;
        let kt = self.temporal_kernel as u64;
        let plan = self.channel_plan();
        let blocks: u64 = plan
            .windows(2)
            .map(|w| {
                let (ci, co) = (w[0] as u64, w[1] as u64);
                let temporal_attn = 2 * n * t * ci + t * ci * n + n * t * t + n * t * t * ci;
                let spatial_attn = 2 * n * t * ci + n * ci * t + n * n * t;
                let graph = k * n * n * t * ci + n * t * k * ci * co;
                let conv = n * t * kt * co * co;
                temporal_attn + spatial_attn + graph + conv
            })
            .sum();
        blocks + self.width as u64 * self.n_classes as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan() {
        let h = Hyper::default();
        assert_eq!(h.channel_plan(), vec![22, 64, 64, 64, 64]);
        h.validate().unwrap();
    }

    #[test]
    fn validation() {
        let mut h = Hyper::default();
        h.temporal_kernel = 4;
        assert!(h.validate().is_err());
        let mut h = Hyper::default();
        h.dropout = 1.0;
        assert!(h.validate().is_err());
        let mut h = Hyper::default();
        h.n_blocks = 0;
        assert!(h.validate().is_err());
    }

    #[test]
    fn cost_grows_with_depth() {
        let costs: Vec<u64> = (1..=8)
            .map(|d| Hyper { n_blocks: d, ..Hyper::default() }.forward_macs())
            .collect();
        assert!(costs.windows(2).all(|w| w[1] > w[0]));
    }
}
