//! Quantized operators: conditional expectations over one layer-to-layer
//! transition of a [`QuantizedChain`].
//!
//! Everything that does not depend on the value functions (grid times, `F`
//! on the grid and at `t*`, successors sorted by inter-jump time) is
//! precomputed once per cell and reused by every backward pass.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_time_grid, DeltaPolicy, Operators, TimeGrid};
use crate::error::{config, domain, Result};
use crate::quantizer::QuantizedChain;

/// Decision attached to a cell by the wedge `min_t J ∧ K`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Action {
    /// Let the process run until its next jump.
    Continue,
    /// Intervene after `time` units unless a jump happens first.
    Intervene { time: f64 },
}

/// Precomputed data of one source cell `z` of layer `n`.
#[derive(Clone, Debug)]
pub struct CellOperator {
    pub z: Vec<f64>,
    pub tstar: f64,
    pub grid: TimeGrid,
    /// `F(z, t_i)` on the grid.
    pub f_grid: Vec<f64>,
    pub f_tstar: f64,
    /// `exp(-alpha t_i)`.
    pub disc_grid: Vec<f64>,
    /// `phi(z, t_i)`.
    pub flow_grid: Vec<Vec<f64>>,
    /// Successor cells of layer `n + 1`, sorted by their time coordinate.
    pub succ_col: Vec<u32>,
    pub succ_prob: Vec<f64>,
    pub succ_s: Vec<f64>,
    /// `exp(-alpha s_j)`.
    pub succ_disc: Vec<f64>,
    /// Number of successors with `s_j < t_i ∧ t*(z)`, per grid time.
    pub split: Vec<usize>,
    /// `sum of P(z -> j)` over successors with `s_j >= t_i ∧ t*(z)`.
    pub tail_mass: Vec<f64>,
}

impl CellOperator {
    pub fn build(ops: &Operators<'_>, z: &[f64], succ: &[(u32, f64, f64)], policy: &DeltaPolicy) -> Result<Self> {
        let alpha = ops.alpha();
        let tstar = ops.tstar(z);
        let grid = build_time_grid(tstar, policy)?;
        let f_int = |y: &[f64]| ops.cost.running_cost(y);
        let mut f_grid = Vec::with_capacity(grid.points.len());
        let (mut acc, mut last) = (0.0, 0.0);
        for &t in &grid.points {
            acc += ops.integrate_along(z, last, t, &f_int);
            last = t;
            f_grid.push(acc);
        }
        let f_tstar = acc + ops.integrate_along(z, last, tstar, &f_int);

        let mut order: Vec<usize> = (0..succ.len()).collect();
        order.sort_by(|&a, &b| succ[a].2.total_cmp(&succ[b].2).then(succ[a].0.cmp(&succ[b].0)));
        let succ_col: Vec<u32> = order.iter().map(|&k| succ[k].0).collect();
        let succ_prob: Vec<f64> = order.iter().map(|&k| succ[k].1).collect();
        let succ_s: Vec<f64> = order.iter().map(|&k| succ[k].2).collect();
        let succ_disc = succ_s.iter().map(|&s| (-alpha * s).exp()).collect();

        let mut split = Vec::with_capacity(grid.points.len());
        let mut tail_mass = Vec::with_capacity(grid.points.len());
        for &t in &grid.points {
            let cut = t.min(tstar);
            let m = succ_s.partition_point(|&s| s < cut);
            split.push(m);
            tail_mass.push(succ_prob[m..].iter().sum());
        }
        Ok(CellOperator {
            z: z.to_vec(),
            tstar,
            disc_grid: grid.points.iter().map(|&t| (-alpha * t.min(tstar)).exp()).collect(),
            flow_grid: grid.points.iter().map(|&t| ops.model.flow(z, t.min(tstar))).collect(),
            grid,
            f_grid,
            f_tstar,
            succ_col,
            succ_prob,
            succ_s,
            succ_disc,
            split,
            tail_mass,
        })
    }

    fn expected_w(&self, w_next: &[f64], upto: usize) -> f64 {
        (0..upto).map(|j| self.succ_prob[j] * self.succ_disc[j] * w_next[self.succ_col[j] as usize]).sum()
    }
}

/// `K^w(z) = F(z, t*(z)) + sum_j P(z -> j) exp(-alpha s_j) w(z_j)`.
pub fn qop_k(cell: &CellOperator, w_next: &[f64]) -> f64 {
    cell.f_tstar + cell.expected_w(w_next, cell.succ_col.len())
}

/// Quantized `J(v, w)(z, t)` for a time `t` of the cell's grid.
pub fn qop_j(cell: &CellOperator, v: &dyn Fn(&[f64]) -> f64, w_next: &[f64], t: f64) -> Result<f64> {
    let i = cell
        .grid
        .points
        .iter()
        .position(|&g| g == t)
        .ok_or_else(|| domain(format!("time {t} is not a point of the cell's grid")))?;
    Ok(j_at(cell, v, i, cell.expected_w(w_next, cell.split[i])))
}

fn j_at(cell: &CellOperator, v: &dyn Fn(&[f64]) -> f64, i: usize, jumped: f64) -> f64 {
    cell.f_grid[i] + jumped + cell.disc_grid[i] * v(&cell.flow_grid[i]) * cell.tail_mass[i]
}

/// `min_{t in G(z)} J(v, w)(z, t) ∧ K w(z)` with the minimizing decision.
/// Ties between grid times go to the earliest; `K` wins only when strictly smaller.
pub fn qop_l_d(cell: &CellOperator, v: &dyn Fn(&[f64]) -> f64, w_next: &[f64]) -> (f64, Action) {
    let mut best = (f64::INFINITY, Action::Continue);
    let mut jumped = 0.0;
    let mut done = 0;
    for i in 0..cell.grid.points.len() {
        // Grid times increase, so the jumped part is extended in place.
        let m = cell.split[i];
        if m < done {
            jumped = cell.expected_w(w_next, m);
            done = m;
        }
        while done < m {
            let j = done;
            jumped += cell.succ_prob[j] * cell.succ_disc[j] * w_next[cell.succ_col[j] as usize];
            done += 1;
        }
        let val = j_at(cell, v, i, jumped);
        if val < best.0 {
            best = (val, Action::Intervene { time: cell.grid.points[i] });
        }
    }
    let k = qop_k(cell, w_next);
    if k < best.0 {
        best = (k, Action::Continue);
    }
    best
}

/// All cells of layer `n` with their transitions to layer `n + 1`.
#[derive(Clone, Debug)]
pub struct LayerOperator {
    pub layer: usize,
    pub cells: Vec<CellOperator>,
}

impl LayerOperator {
    pub fn build(ops: &Operators<'_>, chain: &QuantizedChain, n: usize, policy: &DeltaPolicy) -> Result<Self> {
        if n >= chain.horizon() {
            return Err(config(format!("no transition out of layer {n} in a chain of horizon {}", chain.horizon())));
        }
        let layer = &chain.layers[n];
        let next = &chain.layers[n + 1];
        let trans = &chain.transitions[n];
        let cells = (0..layer.len())
            .into_par_iter()
            .map(|i| {
                let (cols, probs) = trans.row(i);
                let succ: Vec<(u32, f64, f64)> =
                    cols.iter().zip(probs).map(|(&j, &p)| (j, p, next.s[j as usize])).collect();
                CellOperator::build(ops, layer.point_z(i), &succ, policy)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LayerOperator { layer: n, cells })
    }

    /// Applies `L^d(v, w)` to every cell; `v` is evaluated on the flow.
    pub fn apply(&self, v: &(dyn Fn(&[f64]) -> f64 + Sync), w_next: &[f64]) -> (Vec<f64>, Vec<Action>) {
        self.cells.par_iter().map(|c| qop_l_d(c, v, w_next)).unzip()
    }
}
