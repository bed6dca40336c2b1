//! 1-D node layouts and nearest-neighbour stencil maps.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A strictly increasing set of collocation nodes spanning a closed interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSet {
    coords: Vec<f64>,
    interval: (f64, f64),
    /// Mean spacing (b - a)/(N - 1); the h used in the discrete L2 norm.
    spacing_h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Uniform,
    Explicit(Vec<f64>),
}

pub fn build_nodes(a: f64, b: f64, n: usize, layout: Layout) -> Result<NodeSet> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::BadInterval(a, b));
    }
    if n < 4 {
        return Err(Error::TooFewNodes(n));
    }
    let coords = match layout {
        Layout::Uniform => {
            let h = (b - a) / (n - 1) as f64;
            let mut c: Vec<f64> = (0..n).map(|i| a + h * i as f64).collect();
            // pin the right endpoint exactly; accumulated rounding must not
            // leave coords[N-1] != b
            c[n - 1] = b;
            c
        }
        Layout::Explicit(c) => {
            if c.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: c.len() });
            }
            if c[0] != a || c[n - 1] != b {
                return Err(Error::EndpointMismatch);
            }
            c
        }
    };
    for (i, &x) in coords.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFiniteNode(i));
        }
    }
    for i in 1..n {
        if coords[i] <= coords[i - 1] {
            return Err(Error::NonIncreasingNodes(i));
        }
    }
    Ok(NodeSet { coords, interval: (a, b), spacing_h: (b - a) / (n - 1) as f64 })
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn x(&self, i: usize) -> f64 {
        self.coords[i]
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn spacing_h(&self) -> f64 {
        self.spacing_h
    }

    /// Index of the node closest to x (ties resolve to the smaller index).
    /// x must lie inside the interval.
    pub fn nearest_node(&self, x: f64) -> Result<usize> {
        let (a, b) = self.interval;
        if !(x.is_finite() && x >= a && x <= b) {
            return Err(Error::ProbeOutsideDomain(x));
        }
        let mut best = 0usize;
        let mut best_d = (x - self.coords[0]).abs();
        for (i, &c) in self.coords.iter().enumerate().skip(1) {
            let d = (x - c).abs();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        Ok(best)
    }
}

/// For every node, the indices of its n nearest neighbours (itself included),
/// stored sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilMap {
    size: usize,
    neighbors: Vec<Vec<usize>>,
}

impl StencilMap {
    pub fn stencil_size(&self) -> usize {
        self.size
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

/// Production stencil construction: n nearest neighbours per node, 4 <= n <= N.
pub fn build_stencils(nodes: &NodeSet, n: usize) -> Result<StencilMap> {
    build_stencils_with_min(nodes, n, 4)
}

/// Relaxed lower bound (n >= 2) for test oracles that exercise small
/// classical stencils; production code goes through `build_stencils`.
pub fn build_stencils_relaxed(nodes: &NodeSet, n: usize) -> Result<StencilMap> {
    build_stencils_with_min(nodes, n, 2)
}

fn build_stencils_with_min(nodes: &NodeSet, n: usize, min: usize) -> Result<StencilMap> {
    let n_nodes = nodes.len();
    if n < min || n > n_nodes {
        return Err(Error::BadStencilSize { n, n_nodes, min });
    }
    let x = nodes.coords();
    let neighbors = (0..n_nodes)
        .map(|i| {
            // nodes are sorted, so the n nearest form a contiguous window
            // around i; grow it one side at a time, preferring the smaller
            // index on exact distance ties
            let (mut lo, mut hi) = (i, i);
            while hi - lo + 1 < n {
                let dl = if lo > 0 { x[i] - x[lo - 1] } else { f64::INFINITY };
                let dr = if hi + 1 < n_nodes { x[hi + 1] - x[i] } else { f64::INFINITY };
                if dl <= dr {
                    lo -= 1;
                } else {
                    hi += 1;
                }
            }
            (lo..=hi).collect()
        })
        .collect();
    Ok(StencilMap { size: n, neighbors })
}
