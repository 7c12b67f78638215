//! Dynamic-programming operators along the flow and their quantized versions.
//!
//! With `e(x, s) = exp(-alpha s - Lambda(x, s))` and `t' = t ∧ t*(x)`:
//! `F(x,t) = ∫_0^t' e f(phi)`, `Hv(x,t) = e(x,t') v(phi(x,t'))`,
//! `Iw(x,t) = ∫_0^t' e lambda Qw(phi)`, `J = F + Hv + Iw`,
//! `Kw(x) = F(x,t*) + HQw(x,t*) + Iw(x,t*)` and `Mphi(x) = min_i c(x,y^i) + phi_i`.

mod quantized;
mod time_grid;

pub use quantized::{qop_j, qop_k, qop_l_d, Action, CellOperator, LayerOperator};
pub use time_grid::{build_time_grid, delta_floor, DeltaPolicy, TimeGrid};

use crate::error::{config, Result};
use crate::model::{lambda_integral_unchecked, CostModel, PdmpModel};
use crate::quadrature;

/// Borrowed model, cost and quadrature tolerance shared by every operator.
#[derive(Clone, Copy)]
pub struct Operators<'a> {
    pub model: &'a dyn PdmpModel,
    pub cost: &'a dyn CostModel,
    pub tol: f64,
}

impl<'a> Operators<'a> {
    pub fn new(model: &'a dyn PdmpModel, cost: &'a dyn CostModel) -> Self {
        Operators { model, cost, tol: quadrature::DEFAULT_TOL }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.cost.discount()
    }

    pub fn tstar(&self, x: &[f64]) -> f64 {
        self.model.exit_time(x)
    }

    fn clip(&self, x: &[f64], t: f64) -> f64 {
        t.max(0.0).min(self.tstar(x))
    }

    /// `exp(-alpha s - Lambda(x, s))` for `0 <= s <= t*(x)`.
    pub fn discount(&self, x: &[f64], s: f64) -> f64 {
        (-self.alpha() * s - lambda_integral_unchecked(self.model, x, s, self.tol)).exp()
    }

    /// `∫_a^b e(x,s) h(phi(x,s)) ds` with `0 <= a <= b <= t*(x)`.
    pub fn integrate_along(&self, x: &[f64], a: f64, b: f64, h: &dyn Fn(&[f64]) -> f64) -> f64 {
        quadrature::integrate(|s| self.discount(x, s) * h(&self.model.flow(x, s)), a, b, self.tol)
    }

    pub fn op_f(&self, x: &[f64], t: f64) -> f64 {
        let t = self.clip(x, t);
        self.integrate_along(x, 0.0, t, &|y| self.cost.running_cost(y))
    }

    pub fn op_h(&self, v: &dyn Fn(&[f64]) -> f64, x: &[f64], t: f64) -> f64 {
        let t = self.clip(x, t);
        self.discount(x, t) * v(&self.model.flow(x, t))
    }

    /// `Qw(y)`.
    pub fn op_q(&self, w: &dyn Fn(&[f64]) -> f64, y: &[f64]) -> f64 {
        self.model.kernel_expect(y, w)
    }

    pub fn op_i(&self, w: &dyn Fn(&[f64]) -> f64, x: &[f64], t: f64) -> f64 {
        let t = self.clip(x, t);
        if self.model.kernel_is_state_independent() {
            let qw = self.op_q(w, x);
            self.integrate_along(x, 0.0, t, &|y| self.model.jump_rate(y) * qw)
        } else {
            self.integrate_along(x, 0.0, t, &|y| self.model.jump_rate(y) * self.op_q(w, y))
        }
    }

    pub fn op_j(&self, v: &dyn Fn(&[f64]) -> f64, w: &dyn Fn(&[f64]) -> f64, x: &[f64], t: f64) -> f64 {
        self.op_f(x, t) + self.op_h(v, x, t) + self.op_i(w, x, t)
    }

    pub fn op_k(&self, w: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> f64 {
        let ts = self.tstar(x);
        let qw_boundary = |y: &[f64]| self.op_q(w, y);
        self.op_f(x, ts) + self.op_h(&qw_boundary, x, ts) + self.op_i(w, x, ts)
    }

    /// `min_i c(x, y^i) + phi_values[i]` and its smallest minimizing index.
    pub fn op_m(&self, phi_values: &[f64], x: &[f64]) -> Result<(f64, usize)> {
        let controls = self.cost.control_set();
        if controls.is_empty() {
            return Err(config("empty control set"));
        }
        if controls.len() != phi_values.len() {
            return Err(config(format!("{} control values for {} control points", phi_values.len(), controls.len())));
        }
        Ok(self.m_unchecked(phi_values, x))
    }

    pub(crate) fn m_unchecked(&self, phi_values: &[f64], x: &[f64]) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (i, (y, &phi)) in self.cost.control_set().iter().zip(phi_values).enumerate() {
            let val = self.cost.intervention_cost(x, y) + phi;
            if val < best.0 {
                best = (val, i);
            }
        }
        best
    }

    /// `alpha ∫_0^{t*} e(x,s) ds`; with `H1(x,t*) + I1(x,t*)` it sums to one.
    pub fn discounted_mass(&self, x: &[f64]) -> f64 {
        self.alpha() * self.integrate_along(x, 0.0, self.tstar(x), &|_| 1.0)
    }

    /// `(inf over mesh of J(v,w)(x,.)) ∧ Kw(x)` with `J` sampled at `mesh`.
    pub fn op_l_mesh(&self, v: &dyn Fn(&[f64]) -> f64, w: &dyn Fn(&[f64]) -> f64, x: &[f64], mesh: &[f64]) -> f64 {
        let prof = self.profile(v, w, x, mesh);
        prof.j.iter().copied().fold(prof.k, f64::min)
    }

    /// `L^d(v,w)(x) = min_{t in G(x)} J(v,w)(x,t) ∧ Kw(x)`.
    pub fn op_l_d(&self, v: &dyn Fn(&[f64]) -> f64, w: &dyn Fn(&[f64]) -> f64, x: &[f64], grid: &TimeGrid) -> f64 {
        self.op_l_mesh(v, w, x, &grid.points)
    }

    /// One step of the single-jump-or-intervention operator at `x`:
    /// `L(Mw|_U, w)(x)` with the time infimum taken over `mesh`.
    pub fn op_script_l(&self, w: &dyn Fn(&[f64]) -> f64, x: &[f64], mesh: &[f64]) -> f64 {
        let on_controls: Vec<f64> = self.cost.control_set().iter().map(|y| w(y)).collect();
        let mv = |y: &[f64]| self.m_unchecked(&on_controls, y).0;
        self.op_l_mesh(&mv, w, x, mesh)
    }

    /// `F`, `Iw` and `J(v,w)` on an increasing mesh of times, plus `Kw(x)`,
    /// accumulating the integrals panel by panel.
    pub fn profile(&self, v: &dyn Fn(&[f64]) -> f64, w: &dyn Fn(&[f64]) -> f64, x: &[f64], mesh: &[f64]) -> Profile {
        let ts = self.tstar(x);
        let state_free = self.model.kernel_is_state_independent();
        let qw_const = if state_free { self.op_q(w, x) } else { 0.0 };
        let f_int = |y: &[f64]| self.cost.running_cost(y);
        let i_int = |y: &[f64]| self.model.jump_rate(y) * if state_free { qw_const } else { self.op_q(w, y) };
        let (mut f_acc, mut i_acc, mut last) = (0.0, 0.0, 0.0);
        let mut out = Profile { f: Vec::with_capacity(mesh.len()), i: Vec::with_capacity(mesh.len()), j: Vec::with_capacity(mesh.len()), k: 0.0 };
        for &t in mesh {
            let t = t.max(0.0).min(ts);
            if t > last {
                f_acc += self.integrate_along(x, last, t, &f_int);
                i_acc += self.integrate_along(x, last, t, &i_int);
                last = t;
            }
            out.f.push(f_acc);
            out.i.push(i_acc);
            out.j.push(f_acc + i_acc + self.discount(x, t) * v(&self.model.flow(x, t)));
        }
        if ts > last {
            f_acc += self.integrate_along(x, last, ts, &f_int);
            i_acc += self.integrate_along(x, last, ts, &i_int);
        }
        let qw_boundary = |y: &[f64]| self.op_q(w, y);
        out.k = f_acc + i_acc + self.discount(x, ts) * qw_boundary(&self.model.flow(x, ts));
        out
    }
}

/// Operator values along a time mesh from one state.
#[derive(Clone, Debug)]
pub struct Profile {
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub j: Vec<f64>,
    pub k: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{benchmark_model, RateSpec, TransportSpec};

    fn simpson(h: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let dx = (b - a) / n as f64;
        let mut acc = h(a) + h(b);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * h(a + i as f64 * dx);
        }
        acc * dx / 3.0
    }

    // Closed-form survival of the benchmark: exp(-2s - 3(xs + s^2/2)).
    fn bench_e(x: f64, s: f64) -> f64 {
        (-2.0 * s - 3.0 * (x * s + 0.5 * s * s)).exp()
    }

    #[test]
    fn zero_time_values() {
        let (m, c) = benchmark_model();
        let ops = Operators::new(&m, &c);
        assert_eq!(ops.op_f(&[0.3], 0.0), 0.0);
        assert_eq!(ops.op_i(&|_| 1.0, &[0.3], 0.0), 0.0);
        assert_eq!(ops.op_h(&|y| y[0] * 2.0, &[0.3], 0.0), 0.6);
    }

    #[test]
    fn f_constant_cost_no_jumps() {
        let spec = TransportSpec { rate: RateSpec::Constant(0.0), f_slope: 0.0, f_intercept: 0.7, ..TransportSpec::benchmark() };
        let (m, c) = spec.build();
        let ops = Operators::new(&m, &c).with_tol(1e-12);
        for &(x, t) in &[(0.0, 0.4), (0.5, 2.0), (0.9, 0.05)] {
            let tt = f64::min(t, 1.0 - x);
            let exact = 0.7 * (1.0 - (-2.0 * tt).exp()) / 2.0;
            assert!((ops.op_f(&[x], t) - exact).abs() < 1e-12);
            assert!((ops.op_h(&|_| 1.0, &[x], t) - (-2.0 * tt).exp()).abs() < 1e-14);
            assert_eq!(ops.op_i(&|_| 1.0, &[x], t), 0.0);
        }
    }

    #[test]
    fn benchmark_against_simpson() {
        let (m, c) = benchmark_model();
        let ops = Operators::new(&m, &c).with_tol(1e-11);
        let f_ref = simpson(|s| bench_e(0.0, s) * (1.0 - s), 0.0, 1.0, 1_000_000);
        assert!((ops.op_f(&[0.0], 1.0) - f_ref).abs() < 1e-8);
        assert!((ops.op_h(&|_| 1.0, &[0.0], 5.0) - (-3.5f64).exp()).abs() < 1e-14);
        // J(v, w)(0, 0.5) with v(y) = y and w = 0.5
        let j_ref = simpson(|s| bench_e(0.0, s) * ((1.0 - s) + 3.0 * s * 0.5), 0.0, 0.5, 1_000_000)
            + bench_e(0.0, 0.5) * 0.5;
        let j = ops.op_j(&|y| y[0], &|_| 0.5, &[0.0], 0.5);
        assert!((j - j_ref).abs() < 1e-8, "{j} {j_ref}");
    }

    #[test]
    fn k_with_constant_terminal_is_below_it() {
        let (m, c) = benchmark_model();
        let ops = Operators::new(&m, &c);
        for i in 0..20 {
            let x = i as f64 / 20.0;
            assert!(ops.op_k(&|_| 0.5, &[x]) <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn m_examples() {
        let (m, c) = TransportSpec { controls: vec![0.1, 0.2, 0.3], ..TransportSpec::benchmark() }.build();
        let ops = Operators::new(&m, &c);
        let (v, i) = ops.op_m(&[0.3, 0.1, 0.4], &[0.5]).unwrap();
        assert!((v - 0.18).abs() < 1e-15);
        assert_eq!(i, 1);
        let (v, i) = ops.op_m(&[0.2, 0.2, 0.2], &[0.5]).unwrap();
        assert!((v - 0.28).abs() < 1e-15);
        assert_eq!(i, 0);
        assert!(ops.op_m(&[0.2], &[0.5]).is_err());
    }

    #[test]
    fn profile_agrees_with_pointwise() {
        let (m, c) = benchmark_model();
        let ops = Operators::new(&m, &c).with_tol(1e-12);
        let v = |y: &[f64]| 0.3 + 0.1 * y[0];
        let w = |y: &[f64]| 0.2 + y[0] * y[0];
        let mesh: Vec<f64> = (0..9).map(|i| i as f64 * 0.1).collect();
        let prof = ops.profile(&v, &w, &[0.15], &mesh);
        for (i, &t) in mesh.iter().enumerate() {
            assert!((prof.j[i] - ops.op_j(&v, &w, &[0.15], t)).abs() < 1e-11);
        }
        assert!((prof.k - ops.op_k(&w, &[0.15])).abs() < 1e-11);
    }
}
