//! Backward recursions: the triangular scheme giving `v~_k` on the control
//! set, then the main scheme from the starting point.

use serde::{Deserialize, Serialize};

use crate::bounds::{chain_floors, control_sqrt_constants, main_sqrt_constants, SqrtConstants};
use crate::error::{config, Result};
use crate::operators::{Action, DeltaPolicy, LayerOperator, Operators};
use crate::quantizer::{QuantizedChain, StartSpec};

/// How the time step of each layer is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DeltaMode {
    Constant(f64),
    /// Per-layer step `max(safety * floor_n, t*(z) / n_max)` where `floor_n`
    /// is the smallest step allowed by the error bound on that layer.
    BudgetFloor { safety: f64, n_max: usize },
}

impl Default for DeltaMode {
    fn default() -> Self {
        DeltaMode::BudgetFloor { safety: 1.01, n_max: 200 }
    }
}

/// Per-layer policies of a chain for a given constant block.
pub fn layer_policies(chain: &QuantizedChain, sq: &SqrtConstants, mode: DeltaMode) -> Vec<DeltaPolicy> {
    match mode {
        DeltaMode::Constant(d) => vec![DeltaPolicy::Constant(d); chain.horizon()],
        DeltaMode::BudgetFloor { safety, n_max } => chain_floors(chain, sq)
            .into_iter()
            .map(|floor| DeltaPolicy::Floor { floor, safety, n_max })
            .collect(),
    }
}

/// Control chains: one chain started uniformly on the control set, or one
/// chain per control point.
#[derive(Clone, Copy)]
pub enum ControlChains<'a> {
    Pooled(&'a QuantizedChain),
    PerPoint(&'a [QuantizedChain]),
}

impl<'a> ControlChains<'a> {
    fn list(&self) -> &'a [QuantizedChain] {
        match *self {
            ControlChains::Pooled(c) => std::slice::from_ref(c),
            ControlChains::PerPoint(cs) => cs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlValues {
    pub horizon: usize,
    /// `values[k][i] = v~_k(y^i)` for `k = 1..=N`; `values[0]` holds the same
    /// recursion carried one layer further when the chains are long enough,
    /// and is empty otherwise.
    pub values: Vec<Vec<f64>>,
    /// Per chain, per layer step policies.
    pub policies: Vec<Vec<DeltaPolicy>>,
}

impl ControlValues {
    pub fn has_extended(&self) -> bool {
        !self.values[0].is_empty()
    }
}

fn g_on_layer(ops: &Operators<'_>, chain: &QuantizedChain, n: usize) -> Vec<f64> {
    let layer = &chain.layers[n];
    (0..layer.len()).map(|j| ops.cost.terminal_g(layer.point_z(j))).collect()
}

/// Triangular backward recursion for `v~_k`, `k = N-1, ..., 1`.
pub fn solve_control_values(
    ops: &Operators<'_>,
    chains: ControlChains<'_>,
    horizon: usize,
    mode: DeltaMode,
) -> Result<ControlValues> {
    let controls = ops.cost.control_set();
    let u = controls.len();
    if u == 0 {
        return Err(config("empty control set"));
    }
    let list = chains.list();
    match chains {
        ControlChains::Pooled(c) => {
            if !matches!(&c.start, StartSpec::UniformOverControls(y) if y.as_slice() == controls) {
                return Err(config("pooled chain was not started on this control set"));
            }
        }
        ControlChains::PerPoint(cs) => {
            if cs.len() != u {
                return Err(config(format!("{} per-point chains for {u} control points", cs.len())));
            }
            for (c, y) in cs.iter().zip(controls) {
                if !matches!(&c.start, StartSpec::Fixed(x) if x == y) {
                    return Err(config("per-point chains must start at the control points in order"));
                }
            }
        }
    }
    let needed = horizon.saturating_sub(1);
    if list.iter().any(|c| c.horizon() < needed) {
        return Err(config(format!("control chains need at least {needed} transitions")));
    }
    let extended = horizon > 0 && list.iter().all(|c| c.horizon() >= horizon);
    let depth = if extended { horizon } else { needed };

    let sq = control_sqrt_constants(ops.model.constants());
    let policies: Vec<Vec<DeltaPolicy>> = list.iter().map(|c| layer_policies(c, &sq, mode)).collect();
    let layer_ops: Vec<Vec<LayerOperator>> = list
        .iter()
        .zip(&policies)
        .map(|(c, pol)| (0..depth).map(|n| LayerOperator::build(ops, c, n, &pol[n])).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    let g_u: Vec<f64> = controls.iter().map(|y| ops.cost.terminal_g(y)).collect();
    let mut values = vec![Vec::new(); horizon + 1];
    values[horizon] = g_u;
    let k_min = if extended { 0 } else { 1 };
    for k in (k_min..horizon).rev() {
        let mut row = vec![0.0; u];
        for (ci, chain) in list.iter().enumerate() {
            let top = horizon - k;
            let mut w = g_on_layer(ops, chain, top);
            for n in (1..=top).rev() {
                let next = &values[k + n];
                let v = |x: &[f64]| ops.m_unchecked(next, x).0;
                w = layer_ops[ci][n - 1].apply(&v, &w).0;
            }
            match chains {
                ControlChains::Pooled(_) => row = w,
                ControlChains::PerPoint(_) => row[ci] = w[0],
            }
        }
        values[k] = row;
    }
    Ok(ControlValues { horizon, values, policies })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MainSolution {
    pub horizon: usize,
    pub v0: f64,
    /// `tables[n][j] = v^_n` at cell `j` of layer `n`.
    pub tables: Vec<Vec<f64>>,
    /// Decision per cell of layers `0..N`.
    pub actions: Vec<Vec<Action>>,
    /// Restart point chosen at the intervention time, when intervening.
    pub restart: Vec<Vec<Option<usize>>>,
    pub policies: Vec<DeltaPolicy>,
    /// Largest `v^_n(z) - g(z)` over every table entry.
    pub max_excess_over_g: f64,
}

/// Main backward recursion `v^_{k-1} = L^d_k(M v~_k, v^_k)` from `v^_N = g`.
pub fn solve_main(
    ops: &Operators<'_>,
    chain: &QuantizedChain,
    control: &ControlValues,
    horizon: usize,
    mode: DeltaMode,
) -> Result<MainSolution> {
    if !matches!(chain.start, StartSpec::Fixed(_)) {
        return Err(config("the main chain must start from a fixed point"));
    }
    if chain.horizon() < horizon {
        return Err(config(format!("main chain has {} transitions, horizon is {horizon}", chain.horizon())));
    }
    if control.horizon != horizon || (1..=horizon).any(|k| control.values[k].len() != ops.cost.control_set().len())
    {
        return Err(config("control values do not cover horizons 1..=N"));
    }
    let policies = layer_policies(chain, &main_sqrt_constants(ops.model.constants()), mode);
    let mut tables = vec![Vec::new(); horizon + 1];
    let mut actions = vec![Vec::new(); horizon];
    let mut restart = vec![Vec::new(); horizon];
    tables[horizon] = g_on_layer(ops, chain, horizon);
    for k in (1..=horizon).rev() {
        let op = LayerOperator::build(ops, chain, k - 1, &policies[k - 1])?;
        let vt = &control.values[k];
        let v = |x: &[f64]| ops.m_unchecked(vt, x).0;
        let (vals, acts) = op.apply(&v, &tables[k]);
        restart[k - 1] = acts
            .iter()
            .zip(&op.cells)
            .map(|(a, c)| match a {
                Action::Intervene { time } => Some(ops.m_unchecked(vt, &ops.model.flow(&c.z, *time)).1),
                Action::Continue => None,
            })
            .collect();
        tables[k - 1] = vals;
        actions[k - 1] = acts;
    }
    let mut excess = f64::NEG_INFINITY;
    for (n, t) in tables.iter().enumerate() {
        let layer = &chain.layers[n];
        for (j, &v) in t.iter().enumerate() {
            excess = excess.max(v - ops.cost.terminal_g(layer.point_z(j)));
        }
    }
    Ok(MainSolution { horizon, v0: tables[0][0], tables, actions, restart, policies, max_excess_over_g: excess })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub horizons: Vec<usize>,
    pub v0: Vec<f64>,
    /// `|v^_0(N_i) - v^_0(N_{i-1})|`, starting at the second horizon.
    pub diffs: Vec<f64>,
    /// First horizon whose difference to its predecessor is below the tolerance.
    pub converged_at: Option<usize>,
}

/// Solves for each horizon with the prefixes of two long chains.
pub fn horizon_sweep(
    ops: &Operators<'_>,
    main: &QuantizedChain,
    control: &QuantizedChain,
    horizons: &[usize],
    tol: f64,
    mode: DeltaMode,
) -> Result<SweepReport> {
    if horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(config("horizons must be strictly increasing"));
    }
    let mut v0 = Vec::with_capacity(horizons.len());
    for &n in horizons {
        let m = main.truncate(n)?;
        let c = control.truncate(n.min(control.horizon()))?;
        let cv = solve_control_values(ops, ControlChains::Pooled(&c), n, mode)?;
        v0.push(solve_main(ops, &m, &cv, n, mode)?.v0);
    }
    let diffs: Vec<f64> = v0.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let converged_at = diffs.iter().position(|&d| d < tol).map(|i| horizons[i + 1]);
    Ok(SweepReport { horizons: horizons.to_vec(), v0, diffs, converged_at })
}
