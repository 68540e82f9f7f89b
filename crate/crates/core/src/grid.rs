//! Tensor-product quadrature grids.

use crate::error::{Error, Result};
use crate::model::{AxisBounds, ModelSpec, StatePoint};

/// Nodes and trapezoid weights along one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    bounds: AxisBounds,
}

impl Axis {
    pub fn uniform(bounds: AxisBounds, count: usize) -> Result<Self> {
        if count < 3 {
            return Err(Error::domain(format!("need at least 3 nodes per axis, got {count}")));
        }
        if !(bounds.lo.is_finite() && bounds.hi.is_finite() && bounds.hi > bounds.lo) {
            return Err(Error::domain(format!(
                "axis bounds must be finite with lo < hi, got [{}, {}]",
                bounds.lo, bounds.hi
            )));
        }
        let h = (bounds.hi - bounds.lo) / (count - 1) as f64;
        let mut nodes: Vec<f64> = (0..count).map(|i| bounds.lo + h * i as f64).collect();
        nodes[count - 1] = bounds.hi;
        let mut weights = vec![h; count];
        weights[0] = 0.5 * h;
        weights[count - 1] = 0.5 * h;
        Ok(Self { nodes, weights, bounds })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bounds(&self) -> AxisBounds {
        self.bounds
    }

    fn nearest(&self, v: f64) -> usize {
        let n = self.nodes.len();
        let h = (self.bounds.hi - self.bounds.lo) / (n - 1) as f64;
        let i = ((v - self.bounds.lo) / h).round();
        i.clamp(0.0, (n - 1) as f64) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Layout {
    Tensor(Vec<Axis>),
    /// States of a finite chain with unit weights.
    Discrete(usize),
}

/// Quadrature grid over a truncated state space. Flat node indices run over
/// the tensor product with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    layout: Layout,
}

impl Grid {
    /// Uniform tensor grid covering `span_sigmas` stationary standard
    /// deviations per unbounded axis and the exact support of bounded axes.
    /// Finite chains get the identity grid of their states.
    pub fn for_model(model: &ModelSpec, nodes_per_dim: usize, span_sigmas: f64) -> Result<Self> {
        if let ModelSpec::FiniteChain(chain) = model {
            return Ok(Self::discrete(chain.n_states()));
        }
        if !(span_sigmas > 0.0 && span_sigmas.is_finite()) {
            return Err(Error::domain(format!(
                "span_sigmas must be positive, got {span_sigmas}"
            )));
        }
        let bounds = model.grid_bounds(span_sigmas).ok_or_else(|| {
            Error::domain(format!(
                "{} has no stationary scale; supply explicit grid bounds",
                model.name()
            ))
        })?;
        Self::tensor(&bounds, nodes_per_dim)
    }

    /// Uniform tensor grid on caller-supplied bounds.
    pub fn tensor(bounds: &[AxisBounds], nodes_per_dim: usize) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > 3 {
            return Err(Error::domain("grid dimension must be 1..=3"));
        }
        let axes = bounds
            .iter()
            .map(|b| Axis::uniform(*b, nodes_per_dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layout: Layout::Tensor(axes),
        })
    }

    pub fn discrete(n_states: usize) -> Self {
        Self {
            layout: Layout::Discrete(n_states),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.layout, Layout::Discrete(_))
    }

    pub fn dim(&self) -> usize {
        match &self.layout {
            Layout::Tensor(axes) => axes.len(),
            Layout::Discrete(_) => 1,
        }
    }

    pub fn axes(&self) -> &[Axis] {
        match &self.layout {
            Layout::Tensor(axes) => axes,
            Layout::Discrete(_) => &[],
        }
    }

    pub fn len(&self) -> usize {
        match &self.layout {
            Layout::Tensor(axes) => axes.iter().map(|a| a.nodes.len()).product(),
            Layout::Discrete(n) => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn multi_index(&self, mut flat: usize, axes: &[Axis]) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for (d, axis) in axes.iter().enumerate().rev() {
            let n = axis.nodes.len();
            idx[d] = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn node(&self, flat: usize) -> StatePoint {
        match &self.layout {
            Layout::Discrete(_) => StatePoint::index(flat),
            Layout::Tensor(axes) => {
                let idx = self.multi_index(flat, axes);
                let mut coords = [0.0; 3];
                for (d, axis) in axes.iter().enumerate() {
                    coords[d] = axis.nodes[idx[d]];
                }
                StatePoint::from_array(coords, axes.len())
            }
        }
    }

    pub fn weight(&self, flat: usize) -> f64 {
        match &self.layout {
            Layout::Discrete(_) => 1.0,
            Layout::Tensor(axes) => {
                let idx = self.multi_index(flat, axes);
                axes.iter().enumerate().map(|(d, a)| a.weights[idx[d]]).product()
            }
        }
    }

    pub fn nodes(&self) -> Vec<StatePoint> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Volume of the truncation box (state count for discrete grids).
    pub fn volume(&self) -> f64 {
        match &self.layout {
            Layout::Discrete(n) => *n as f64,
            Layout::Tensor(axes) => axes.iter().map(|a| a.bounds.hi - a.bounds.lo).product(),
        }
    }

    /// Flat index of the node nearest to `x` (coordinates clamped to the box).
    pub fn nearest_index(&self, x: &StatePoint) -> usize {
        match &self.layout {
            Layout::Discrete(n) => x.as_index().min(n - 1),
            Layout::Tensor(axes) => axes
                .iter()
                .enumerate()
                .fold(0, |flat, (d, axis)| flat * axis.nodes.len() + axis.nearest(x[d])),
        }
    }
}
