//! Weighted regression tree on a sorted one-dimensional grid.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::check_knots;

const MAX_DEPTH: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CartNode {
    /// `x <= threshold` goes left.
    Split {
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CartFit {
    nodes: Vec<CartNode>,
}

impl CartFit {
    pub(crate) fn from_nodes(nodes: Vec<CartNode>) -> Result<Self> {
        let n = nodes.len();
        let ok = n > 0
            && nodes.iter().enumerate().all(|(i, node)| match node {
                CartNode::Split { left, right, .. } => *left > i && *right > i && *left < n && *right < n,
                CartNode::Leaf { .. } => true,
            });
        if !ok {
            return Err(crate::Error::InvalidInput("malformed regression tree".into()));
        }
        Ok(Self { nodes })
    }

    /// Nodes in pre-order; index 0 is the root.
    pub fn nodes(&self) -> &[CartNode] {
        &self.nodes
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, CartNode::Leaf { .. }))
            .count()
    }

    /// Threshold of the root split, if the tree has one.
    pub fn root_threshold(&self) -> Option<f64> {
        match self.nodes[0] {
            CartNode::Split { threshold, .. } => Some(threshold),
            CartNode::Leaf { .. } => None,
        }
    }

    pub fn predict(&self, x: f64) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                CartNode::Leaf { value } => return value,
                CartNode::Split {
                    threshold,
                    left,
                    right,
                } => i = if x <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CartFitter {
    knots: Arc<[f64]>,
    minsplit: usize,
}

struct Sums {
    w: Vec<f64>,
    wg: Vec<f64>,
}

impl Sums {
    fn range(&self, lo: usize, hi: usize) -> (f64, f64) {
        (self.w[hi] - self.w[lo], self.wg[hi] - self.wg[lo])
    }
}

impl CartFitter {
    pub(crate) fn new(knots: Arc<[f64]>, minsplit: usize) -> Result<Self> {
        check_knots(&knots)?;
        Ok(Self { knots, minsplit })
    }

    pub(crate) fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub(crate) fn n(&self) -> usize {
        self.knots.len()
    }

    pub(crate) fn fit(&self, w: &[f64], g: &[f64]) -> CartFit {
        let mut sums = Sums {
            w: Vec::with_capacity(w.len() + 1),
            wg: Vec::with_capacity(w.len() + 1),
        };
        sums.w.push(0.0);
        sums.wg.push(0.0);
        for (wi, gi) in w.iter().zip(g) {
            sums.w.push(sums.w.last().unwrap() + wi);
            sums.wg.push(sums.wg.last().unwrap() + wi * gi);
        }
        let mut nodes = Vec::new();
        self.grow(0, self.n(), 0, w, g, &sums, &mut nodes);
        CartFit { nodes }
    }

    #[allow(clippy::too_many_arguments)]
    fn grow(
        &self,
        lo: usize,
        hi: usize,
        depth: usize,
        w: &[f64],
        g: &[f64],
        sums: &Sums,
        nodes: &mut Vec<CartNode>,
    ) -> usize {
        let idx = nodes.len();
        let (sw, swg) = sums.range(lo, hi);
        let mean = swg / sw;
        nodes.push(CartNode::Leaf { value: mean });
        if hi - lo < self.minsplit.max(2) || depth >= MAX_DEPTH {
            return idx;
        }
        let Some(cut) = best_split(lo, hi, w, g, sums) else {
            return idx;
        };
        let threshold = 0.5 * (self.knots[cut - 1] + self.knots[cut]);
        let left = self.grow(lo, cut, depth + 1, w, g, sums, nodes);
        let right = self.grow(cut, hi, depth + 1, w, g, sums, nodes);
        nodes[idx] = CartNode::Split {
            threshold,
            left,
            right,
        };
        idx
    }
}

/// Leftmost cut position `k` (left = lo..k) with the largest strictly
/// positive reduction in weighted squared error.
fn best_split(lo: usize, hi: usize, w: &[f64], g: &[f64], sums: &Sums) -> Option<usize> {
    let (sw, swg) = sums.range(lo, hi);
    let mean = swg / sw;
    let sse: f64 = (lo..hi).map(|i| w[i] * (g[i] - mean).powi(2)).sum();
    let energy: f64 = (lo..hi).map(|i| w[i] * g[i] * g[i]).sum();
    // responses equal up to rounding
    if !(sse > 1e-14 * energy) {
        return None;
    }
    let base = swg * swg / sw;
    let mut best: Option<(usize, f64)> = None;
    for k in lo + 1..hi {
        let (lw, lwg) = sums.range(lo, k);
        let (rw, rwg) = sums.range(k, hi);
        let gain = lwg * lwg / lw + rwg * rwg / rw - base;
        if best.is_none_or(|(_, b)| gain > b) {
            best = Some((k, gain));
        }
    }
    best.filter(|&(_, gain)| gain > 1e-12 * sse).map(|(k, _)| k)
}
