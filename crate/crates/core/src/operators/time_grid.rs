use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// How the step `Delta(z)` of the path-adapted time grid is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DeltaPolicy {
    Constant(f64),
    /// `max(floor * safety, t*(z) / n_max)`.
    Floor { floor: f64, safety: f64, n_max: usize },
}

impl DeltaPolicy {
    pub fn raw_delta(&self, tstar: f64) -> f64 {
        match *self {
            DeltaPolicy::Constant(d) => d,
            DeltaPolicy::Floor { floor, safety, n_max } => (floor * safety).max(tstar / n_max.max(1) as f64),
        }
    }
}

/// `sqrt((c4 a + c5 b) / c3)`, the smallest admissible step for distortions `a`, `b`.
pub fn delta_floor(c3: f64, c4: f64, c5: f64, a: f64, b: f64) -> f64 {
    if c3 <= 0.0 {
        return 0.0;
    }
    ((c4 * a + c5 * b) / c3).sqrt()
}

/// Uniform grid `{0, Delta, ..., n Delta}` with `n Delta <= t* - Delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    /// Effective step: the requested one, or `t*` for the degenerate grid `{0}`.
    pub delta: f64,
    pub points: Vec<f64>,
    /// Set when the requested step reached `t*` and only `{0}` remains.
    pub degenerate: bool,
}

pub fn build_time_grid(tstar: f64, policy: &DeltaPolicy) -> Result<TimeGrid> {
    if !(tstar > 0.0 && tstar.is_finite()) {
        return Err(domain(format!("time grid needs a positive finite exit time, got {tstar}")));
    }
    let delta = policy.raw_delta(tstar);
    if !(delta > 0.0) {
        return Err(domain(format!("time step must be positive, got {delta}")));
    }
    if delta >= tstar {
        return Ok(TimeGrid { delta: tstar, points: vec![0.0], degenerate: true });
    }
    let mut n = ((tstar / delta).floor() as usize).saturating_sub(1);
    while n > 0 && n as f64 * delta > tstar - delta {
        n -= 1;
    }
    Ok(TimeGrid { delta, points: (0..=n).map(|i| i as f64 * delta).collect(), degenerate: false })
}
