//! A priori error budget of the quantized scheme.
//!
//! The Lipschitz ledger of the iterates `v_N = g, v_{n} = Lv_{n+1}` is
//! propagated first; the per-layer bounds of the control-grid triangle and of
//! the main recursion are then chained from the last layer back to the root.

use serde::{Deserialize, Serialize};

use crate::model::{ConstantsLedger, PdmpModel};
use crate::operators::{build_time_grid, delta_floor, DeltaPolicy};
use crate::quantizer::QuantizedChain;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseConstants {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
}

pub fn base_constants(l: &ConstantsLedger) -> BaseConstants {
    let a = l.alpha;
    BaseConstants {
        e1: l.c_tstar * l.l_lambda_1 + (l.c_lambda + a) * l.l_tstar,
        e2: l.c_lambda * l.l_tstar + l.l_lambda_1 * (1.0 + l.c_lambda * l.c_tstar) / a,
        e3: l.l_f_1 / a + l.c_f * (l.c_tstar * l.l_lambda_1 / a + l.l_tstar),
    }
}

/// Bounds of one value function: Lipschitz constants in space (`l1`), along
/// the flow (`l2`), of the boundary map (`lstar`), global (`l`), and sup (`c`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEntry {
    pub l1: f64,
    pub l2: f64,
    pub lstar: f64,
    pub l: f64,
    pub c: f64,
    pub saturated: bool,
}

impl LipschitzEntry {
    pub fn constant(c: f64) -> Self {
        LipschitzEntry { c, ..Default::default() }
    }

    fn saturate(mut self) -> Self {
        for x in [&mut self.l1, &mut self.l2, &mut self.lstar, &mut self.l, &mut self.c] {
            if !x.is_finite() {
                *x = f64::INFINITY;
                self.saturated = true;
            }
        }
        self
    }
}

/// One application of the single-step operator to a function with ledger `w`.
pub fn lipschitz_step(l: &ConstantsLedger, e: &BaseConstants, w: &LipschitzEntry) -> LipschitzEntry {
    let a = l.alpha;
    let ex = ((a + l.c_lambda) * l.c_tstar).exp();
    let jump_or_cost = (l.l_c_1 + l.l_c_2 * l.l_tstar + l.c_c * e.e1).max(l.l_q * w.lstar);
    let l1 = ex
        * (l.l_lambda_1 * l.c_tstar * (l.c_c + l.c_f / a)
            + jump_or_cost
            + 2.0 * e.e3
            + 2.0 * l.l_q * l.c_lambda / a * w.l1
            + (e.e1 + 2.0 * e.e2 + l.l_lambda_1 * l.c_tstar * (1.0 + l.c_lambda / a)) * w.c);
    let l2 = ex
        * (3.0 * l.c_f
            + l.l_c_2
            + 2.0 * l.c_c * (l.c_lambda + a)
            + l.c_f * l.c_lambda / a
            + w.c * (4.0 * l.c_lambda + l.c_lambda * l.c_lambda / a + a));
    let lstar = l1 + l2 * l.l_tstar;
    let lg = (e.e1 + e.e2) * w.c + l.l_q * l.c_lambda / a * w.l1 + e.e3 + jump_or_cost;
    // K w is a convex combination of C_f / alpha and C_w, and L w <= K w.
    let c = (l.c_f / a).max(w.c);
    LipschitzEntry { l1, l2, lstar, l: lg, c, saturated: w.saturated }.saturate()
}

/// Ledgers of `v_0, ..., v_N` with `v_N = g`.
pub fn lipschitz_iterate(l: &ConstantsLedger, g: &LipschitzEntry, n: usize) -> Vec<LipschitzEntry> {
    let e = base_constants(l);
    let mut out = vec![*g; n + 1];
    for i in (0..n).rev() {
        out[i] = lipschitz_step(l, &e, &out[i + 1]);
    }
    out
}

/// The three distortion-only constants of a layer bound (`d^3..d^5` or `D^3..D^5`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqrtConstants {
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

impl SqrtConstants {
    pub fn floor(&self, a_n: f64, b_next: f64) -> f64 {
        delta_floor(self.c3, self.c4, self.c5, a_n, b_next)
    }

    fn sqrt_term(&self, a_n: f64, b_next: f64) -> f64 {
        2.0 * (self.c3 * (self.c4 * a_n + self.c5 * b_next)).sqrt()
    }
}

pub fn control_sqrt_constants(l: &ConstantsLedger) -> SqrtConstants {
    let k = 2.0 * l.c_f / l.alpha + l.c_c;
    SqrtConstants { c3: k * l.c_lambda, c4: l.c_f * (1.0 + l.l_tstar) / l.alpha + l.c_c * l.l_tstar, c5: 2.0 * k }
}

pub fn main_sqrt_constants(l: &ConstantsLedger) -> SqrtConstants {
    let k = 2.0 * l.c_f / l.alpha + l.c_c;
    SqrtConstants { c3: k * l.c_lambda, c4: 2.0 * l.l_tstar * k, c5: 2.0 * k }
}

/// `d^1_{k,n}` from the ledgers of `v_{k+n}` and `v_{k+n+1}`.
pub fn control_d1(l: &ConstantsLedger, e: &BaseConstants, v_here: &LipschitzEntry, v_next: &LipschitzEntry) -> f64 {
    let a = l.alpha;
    (l.l_q * v_next.lstar + 2.0 * e.e3).max(l.c_c * (e.e1 + a * l.l_tstar) + 2.0 * (l.l_c_1 + l.l_c_2 * l.l_tstar))
        + v_here.l
        + l.l_q * v_next.l1 * l.c_lambda / a
        + l.c_f / a * (e.e1 + e.e2)
}

/// `D^1_n` from the ledgers of `v_n` and `v_{n+1}`.
pub fn main_d1(l: &ConstantsLedger, e: &BaseConstants, v_here: &LipschitzEntry, v_next: &LipschitzEntry) -> f64 {
    let a = l.alpha;
    v_here.l
        + l.l_q * v_next.l1 * l.c_lambda / a
        + l.c_f / a * (e.e1 + e.e2)
        + (l.l_q * v_next.lstar + 2.0 * e.e3).max(
            2.0 * (l.l_c_1 + l.l_c_2 * l.l_tstar) + l.c_c * e.e1 + a * l.l_tstar * (l.c_f / a + l.c_c),
        )
}

/// `d^2_{k,n}` and `D^2_n` share one form in the sup bound of the next iterate.
pub fn d2(l: &ConstantsLedger, v_next: &LipschitzEntry) -> f64 {
    l.c_f + v_next.c * l.c_lambda + l.l_c_2 + (l.c_c + v_next.c) * (l.c_lambda + l.alpha)
}

/// Distortion and time-step inputs of one layer bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerInputs {
    /// `||Z_n - Z^_n||_p`
    pub a_n: f64,
    /// `||Z_{n+1} - Z^_{n+1}||_p`
    pub a_next: f64,
    /// `||S_{n+1} - S^_{n+1}||_p`
    pub b_next: f64,
    /// `||Delta(Z^_n)||_p`
    pub delta_bar: f64,
    /// Smallest step used on the layer; must exceed the floor for the bound to hold.
    pub min_delta: f64,
    pub prev_value_error: f64,
    pub prev_control_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerBound {
    pub value: f64,
    pub c1: f64,
    pub c2: f64,
    pub floor: f64,
    /// The step condition `floor < min Delta(z)` holds on the layer.
    pub valid: bool,
}

pub fn layer_bound_control(
    l: &ConstantsLedger,
    e: &BaseConstants,
    v_here: &LipschitzEntry,
    v_next: &LipschitzEntry,
    x: &LayerInputs,
) -> LayerBound {
    let sq = control_sqrt_constants(l);
    let c1 = control_d1(l, e, v_here, v_next);
    let c2 = d2(l, v_next);
    let value = x.prev_value_error
        + x.prev_control_error
        + c1 * x.a_n
        + 2.0 * v_next.l * x.a_next
        + l.c_f * x.b_next
        + c2 * x.delta_bar
        + sq.sqrt_term(x.a_n, x.b_next);
    let floor = sq.floor(x.a_n, x.b_next);
    LayerBound { value: finite_or_inf(value), c1, c2, floor, valid: floor < x.min_delta }
}

pub fn layer_bound_main(
    l: &ConstantsLedger,
    e: &BaseConstants,
    v_here: &LipschitzEntry,
    v_next: &LipschitzEntry,
    x: &LayerInputs,
) -> LayerBound {
    let sq = main_sqrt_constants(l);
    let c1 = main_d1(l, e, v_here, v_next);
    let c2 = d2(l, v_next);
    let value = x.prev_value_error
        + x.prev_control_error
        + c1 * x.a_n
        + 3.0 * v_next.l * x.a_next
        + 2.0 * l.c_f * x.b_next
        + c2 * x.delta_bar
        + sq.sqrt_term(x.a_n, x.b_next);
    let floor = sq.floor(x.a_n, x.b_next);
    LayerBound { value: finite_or_inf(value), c1, c2, floor, valid: floor < x.min_delta }
}

fn finite_or_inf(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        f64::INFINITY
    }
}

/// Per-layer distortion and step statistics of one chain under given policies.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `||Delta(Z^_n)||_p` for layers with a time grid (all but the last).
    pub delta_bar: Vec<f64>,
    pub min_delta: Vec<f64>,
    pub degenerate_cells: Vec<usize>,
}

/// Reads distortions off the chain and evaluates the effective steps of every
/// cell. `policies[n]` applies to layer `n`.
pub fn chain_stats(chain: &QuantizedChain, model: &dyn PdmpModel, policies: &[DeltaPolicy]) -> ChainStats {
    let n_grids = chain.horizon();
    let mut stats = ChainStats { a: chain.distortion_z.clone(), b: chain.distortion_s.clone(), ..Default::default() };
    for n in 0..n_grids {
        let layer = &chain.layers[n];
        let (mut acc, mut min_d, mut degenerate) = (0.0, f64::INFINITY, 0);
        for j in 0..layer.len() {
            let tstar = model.exit_time(layer.point_z(j));
            // A cell sitting on the boundary has nothing to discretize.
            let (d, deg) = match build_time_grid(tstar, &policies[n]) {
                Ok(g) => (g.delta, g.degenerate),
                Err(_) => (0.0, true),
            };
            acc += layer.weights[j] * d.powf(chain.p);
            min_d = min_d.min(d);
            degenerate += deg as usize;
        }
        stats.delta_bar.push(acc.powf(1.0 / chain.p));
        stats.min_delta.push(min_d);
        stats.degenerate_cells.push(degenerate);
    }
    stats
}

/// Per-layer step floors `sqrt((c4 a_n + c5 b_{n+1}) / c3)` of a chain.
pub fn chain_floors(chain: &QuantizedChain, sq: &SqrtConstants) -> Vec<f64> {
    (0..chain.horizon()).map(|n| sq.floor(chain.distortion_z[n], chain.distortion_s[n + 1])).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetCell {
    pub k: usize,
    pub n: usize,
    pub bound: LayerBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub horizon: usize,
    pub p: f64,
    pub base: BaseConstants,
    pub ledger: Vec<LipschitzEntry>,
    pub control_sqrt: SqrtConstants,
    pub main_sqrt: SqrtConstants,
    /// Multiplier turning the pooled-start L_p error into a pointwise one.
    pub control_factor: f64,
    pub control_cells: Vec<BudgetCell>,
    /// `max_y |v_k(y) - v~_k(y)|` bounds, indexed by `k = 0..=N` (entries 0 and N are 0).
    pub control_errors: Vec<f64>,
    pub main_layers: Vec<BudgetCell>,
    pub total: f64,
    pub saturated: bool,
    pub floor_violations: usize,
}

/// Inputs to [`iterate_budget`].
pub struct BudgetInputs<'a> {
    pub ledger: &'a ConstantsLedger,
    pub g: LipschitzEntry,
    pub horizon: usize,
    pub p: f64,
    /// One entry for a pooled control chain, or one per control point.
    pub control: &'a [ChainStats],
    pub control_factor: f64,
    pub main: &'a ChainStats,
}

/// Chains the layer bounds over the control triangle and the main recursion.
pub fn iterate_budget(inp: &BudgetInputs<'_>) -> ErrorBudget {
    let l = inp.ledger;
    let n_h = inp.horizon;
    let e = base_constants(l);
    let led = lipschitz_iterate(l, &inp.g, n_h);
    let mut control_errors = vec![0.0; n_h + 1];
    let mut control_cells = Vec::new();
    let mut floor_violations = 0;
    for k in (1..n_h).rev() {
        let mut worst: f64 = 0.0;
        for stats in inp.control {
            let mut err = inp.g.l * stats.a[n_h - k];
            for n in (0..n_h - k).rev() {
                let x = LayerInputs {
                    a_n: stats.a[n],
                    a_next: stats.a[n + 1],
                    b_next: stats.b[n + 1],
                    delta_bar: stats.delta_bar[n],
                    min_delta: stats.min_delta[n],
                    prev_value_error: err,
                    prev_control_error: control_errors[k + n + 1],
                };
                let b = layer_bound_control(l, &e, &led[k + n], &led[k + n + 1], &x);
                floor_violations += !b.valid as usize;
                err = b.value;
                if inp.control.len() == 1 {
                    control_cells.push(BudgetCell { k, n, bound: b });
                }
            }
            worst = worst.max(err);
        }
        control_errors[k] = finite_or_inf(inp.control_factor * worst);
    }
    let mut main_layers = Vec::with_capacity(n_h);
    let mut err = inp.g.l * inp.main.a[n_h];
    for n in (0..n_h).rev() {
        let m = inp.main;
        let x = LayerInputs {
            a_n: m.a[n],
            a_next: m.a[n + 1],
            b_next: m.b[n + 1],
            delta_bar: m.delta_bar[n],
            min_delta: m.min_delta[n],
            prev_value_error: err,
            prev_control_error: control_errors[n + 1],
        };
        let b = layer_bound_main(l, &e, &led[n], &led[n + 1], &x);
        floor_violations += !b.valid as usize;
        err = b.value;
        main_layers.push(BudgetCell { k: 0, n, bound: b });
    }
    ErrorBudget {
        horizon: n_h,
        p: inp.p,
        base: e,
        saturated: led.iter().any(|x| x.saturated) || !err.is_finite(),
        ledger: led,
        control_sqrt: control_sqrt_constants(l),
        main_sqrt: main_sqrt_constants(l),
        control_factor: inp.control_factor,
        control_cells,
        control_errors,
        main_layers,
        total: err,
        floor_violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{benchmark_model, PdmpModel};

    fn ledger() -> ConstantsLedger {
        benchmark_model().0.constants().clone()
    }

    #[test]
    fn benchmark_base_constants() {
        let e = base_constants(&ledger());
        assert_eq!((e.e1, e.e2, e.e3), (8.0, 9.0, 3.0));
    }

    #[test]
    fn base_constants_without_jumps() {
        let mut l = ledger();
        l.c_lambda = 0.0;
        l.l_lambda_1 = 0.0;
        l.l_tstar = 0.0;
        let e = base_constants(&l);
        assert_eq!((e.e1, e.e2), (0.0, 0.0));
        assert_eq!(e.e3, l.l_f_1 / l.alpha);
        let mut l2 = ledger();
        l2.alpha *= 2.0;
        let first = |l: &ConstantsLedger| l.l_f_1 / l.alpha;
        assert_eq!(first(&l2), first(&ledger()) / 2.0);
    }

    #[test]
    fn sqrt_constants_by_hand() {
        let l = ledger();
        let c = control_sqrt_constants(&l);
        assert!((c.c3 - 3.24).abs() < 1e-14 && (c.c4 - 1.08).abs() < 1e-14 && (c.c5 - 2.16).abs() < 1e-14);
        let m = main_sqrt_constants(&l);
        assert!((m.c3 - 3.24).abs() < 1e-14 && (m.c4 - 2.16).abs() < 1e-14 && (m.c5 - 2.16).abs() < 1e-14);
        assert_eq!(m.c4, m.c5);
    }

    #[test]
    fn one_step_flow_constant_by_hand() {
        // e^5 {3 + 0 + 2*0.08*5 + 1.5 + 0.5 (12 + 4.5 + 2)}
        let l = ledger();
        let led = lipschitz_iterate(&l, &LipschitzEntry::constant(0.5), 1);
        let expect = 5f64.exp() * (3.0 + 0.8 + 1.5 + 0.5 * 18.5);
        assert!((led[0].l2 - expect).abs() < 1e-10 * expect);
        assert_eq!(led[1], LipschitzEntry::constant(0.5));
    }

    #[test]
    fn zero_inputs_give_zero_bound() {
        let l = ledger();
        let e = base_constants(&l);
        let v = LipschitzEntry::constant(0.5);
        let x = LayerInputs { min_delta: 1.0, ..Default::default() };
        assert_eq!(layer_bound_control(&l, &e, &v, &v, &x).value, 0.0);
        assert_eq!(layer_bound_main(&l, &e, &v, &v, &x).value, 0.0);
    }

    #[test]
    fn saturation_is_flagged() {
        let mut l = ledger();
        l.c_tstar = 200.0;
        let led = lipschitz_iterate(&l, &LipschitzEntry::constant(0.5), 3);
        assert!(led[0].saturated);
        assert_eq!(led[0].l1, f64::INFINITY);
    }
}
