use std::sync::Arc;

use crate::{Error, Result};

/// Strictly increasing list of at least two state values.
///
/// Cloning is cheap; clones share storage.
#[derive(Debug, Clone)]
pub struct Grid {
    points: Arc<[f64]>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::GridTooShort(points.len()));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite {
                z: i as f64,
                value: points[i],
            });
        }
        if let Some(i) = points.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::GridNotIncreasing(i + 1));
        }
        Ok(Self {
            points: points.into(),
        })
    }

    /// `m` equally spaced points from `lo` to `hi` inclusive.
    ///
    /// Point `i` is `lo + (hi - lo) * i / (m - 1)`, so grids whose interval
    /// counts divide one another share their common points bit for bit.
    pub fn uniform(lo: f64, hi: f64, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::GridTooShort(m));
        }
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::invalid(
                "grid",
                format!("need lo < hi, got [{lo}, {hi}]"),
            ));
        }
        let span = hi - lo;
        let steps = (m - 1) as f64;
        let mut points: Vec<f64> = (0..m).map(|i| lo + span * i as f64 / steps).collect();
        points[m - 1] = hi;
        Self::new(points)
    }

    /// Inserts `factor - 1` equally spaced points into every interval.
    /// Every parent point is kept exactly.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::invalid("factor", "must be at least 1"));
        }
        let mut points = Vec::with_capacity((self.len() - 1) * factor + 1);
        for w in self.points.windows(2) {
            points.push(w[0]);
            let width = w[1] - w[0];
            for j in 1..factor {
                points.push(w[0] + width * j as f64 / factor as f64);
            }
        }
        points.push(self.last());
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Whether every point of `coarse` is also a point of `self`.
    pub fn contains_grid(&self, coarse: &Grid) -> bool {
        coarse
            .points
            .iter()
            .all(|p| self.points.binary_search_by(|q| q.total_cmp(p)).is_ok())
    }

    /// Index of the point equal to `z`, if any.
    pub fn index_of(&self, z: f64) -> Option<usize> {
        self.points.binary_search_by(|q| q.total_cmp(&z)).ok()
    }

    pub(crate) fn same_knots(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.points, &other.points) || self.points[..] == other.points[..]
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.same_knots(other)
    }
}
