use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on `[−L, L]` with an odd node count, so `y = 0` is a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    nodes: usize,
}

impl Grid {
    pub fn new(half_width: f64, nodes: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::domain(format!(
                "grid half-width L must be positive, got {half_width}"
            )));
        }
        if nodes < 3 || nodes % 2 == 0 {
            return Err(Error::domain(format!(
                "grid node count n must be odd and at least 3, got {nodes}"
            )));
        }
        Ok(Self { half_width, nodes })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.nodes - 1) as f64
    }

    /// Node `i`; the end nodes are exactly `∓L`.
    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        if i == self.nodes - 1 {
            self.half_width
        } else {
            -self.half_width + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.y(i)).collect()
    }

    /// Index of the node `y = 0`.
    pub fn center(&self) -> usize {
        self.nodes / 2
    }

    /// Index of the node nearest to `y`, clamped to the grid.
    pub fn nearest(&self, y: f64) -> usize {
        let k = ((y + self.half_width) / self.spacing()).round();
        k.clamp(0.0, (self.nodes - 1) as f64) as usize
    }
}

/// `make_grid(L, n)`.
pub fn make_grid(half_width: f64, nodes: usize) -> Result<Grid> {
    Grid::new(half_width, nodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(make_grid(1.0, 3).unwrap().nodes(), vec![-1.0, 0.0, 1.0]);
        let g = make_grid(10.0, 4001).unwrap();
        assert!((g.spacing() - 0.005).abs() < 1e-15);
        assert_eq!(g.y(0), -10.0);
        assert_eq!(g.y(4000), 10.0);
        assert_eq!(g.y(g.center()), 0.0);
        assert!(matches!(make_grid(10.0, 4000), Err(Error::Domain(_))));
        assert!(make_grid(0.0, 5).is_err());
        assert!(make_grid(1.0, 1).is_err());
    }

    #[test]
    fn nodes_strictly_increase() {
        let g = make_grid(3.7, 101).unwrap();
        let y = g.nodes();
        assert!(y.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.nearest(0.01), g.center());
    }
}
