use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid `t_start = t_0 < t_1 < ... < t_steps = t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, steps: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) {
            return Err(Error::InvalidInput("grid end points must be finite".into()));
        }
        if t_end <= t_start {
            return Err(Error::InvalidInput(format!(
                "grid needs t_end > t_start, got [{t_start}, {t_end}]"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidInput("grid needs at least one step".into()));
        }
        Ok(Self {
            t_start,
            t_end,
            steps,
        })
    }

    /// Grid with spacing `dt`; the window length must be an integer multiple of `dt`.
    pub fn with_dt(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidInput(format!(
                "dt must be positive, got {dt}"
            )));
        }
        let ratio = (t_end - t_start) / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "window [{t_start}, {t_end}] is not a multiple of dt = {dt}"
            )));
        }
        Self::new(t_start, t_end, steps as usize)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.t_end
        } else {
            self.t_start + i as f64 * self.dt()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|i| self.time(i))
    }

    /// Index of the grid node at time `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t_start) / self.dt();
        let i = x.round();
        if (x - i).abs() > 1e-6 || i < 0.0 || i > self.steps as f64 {
            None
        } else {
            Some(i as usize)
        }
    }

    /// Index of the lattice `{k * dt : k integer}` node at `t_start`.
    pub(crate) fn lattice_start(&self) -> i64 {
        (self.t_start / self.dt()).round() as i64
    }

    pub(crate) fn same_spacing(&self, other: &TimeGrid) -> bool {
        (self.dt() - other.dt()).abs() <= 1e-9 * self.dt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_windows() {
        assert!(TimeGrid::new(1.0, 1.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::with_dt(0.0, 1.0, 0.3).is_err());
        assert!(TimeGrid::with_dt(0.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn uniform_spacing() {
        let g = TimeGrid::with_dt(-2.0, 2.0, 0.01).unwrap();
        assert_eq!(g.steps(), 400);
        assert!((g.dt() - 0.01).abs() < 1e-15);
        assert_eq!(g.time(400), 2.0);
        assert_eq!(g.index_of(0.0), Some(200));
        assert_eq!(g.index_of(0.005), None);
        assert_eq!(g.lattice_start(), -200);
    }
}
