//! Symmetric sampling lattice `[-L, L]` used for both kernel variables.

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    extent: f64,
    step: f64,
    #[serde(skip)]
    points: Vec<f64>,
}

impl Grid {
    /// Points `(i - n/2) h`, `i = 0..=n`, with `n = round(2L / h)`.
    pub fn new(extent: f64, step: f64) -> Option<Self> {
        if !(extent > 0.0 && step > 0.0 && extent.is_finite() && step.is_finite()) {
            return None;
        }
        let n = (2.0 * extent / step).round() as usize;
        if n < 2 {
            return None;
        }
        let half = n as f64 / 2.0;
        let points = (0..=n).map(|i| (i as f64 - half) * step).collect();
        Some(Self { extent, step, points })
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Trapezoid weights on the lattice.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                if i == 0 || i == n - 1 {
                    self.step / 2.0
                } else {
                    self.step
                }
            })
            .collect()
    }

    /// Indices whose point lies in the outer `fraction` of the extent.
    pub fn is_boundary(&self, index: usize, fraction: f64) -> bool {
        self.points[index].abs() >= self.points[self.points.len() - 1] * (1.0 - fraction) - 1e-12
    }

    pub fn same_lattice(&self, other: &Grid) -> bool {
        self.points.len() == other.points.len() && self.step == other.step
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_grid_has_481_points() {
        let g = Grid::new(12.0, 0.05).unwrap();
        assert_eq!(g.len(), 481);
        assert_eq!(g.points()[240], 0.0);
        assert!((g.points()[0] + 12.0).abs() < 1e-12);
        let total: f64 = g.weights().iter().sum();
        assert!((total - 24.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_grids_are_rejected() {
        assert!(Grid::new(0.0, 0.1).is_none());
        assert!(Grid::new(1.0, -0.1).is_none());
        assert!(Grid::new(1.0, 5.0).is_none());
    }

    #[test]
    fn boundary_ring() {
        let g = Grid::new(10.0, 0.5).unwrap();
        assert!(g.is_boundary(0, 0.05));
        assert!(!g.is_boundary(20, 0.05));
    }
}
