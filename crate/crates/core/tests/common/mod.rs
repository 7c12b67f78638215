//! Measurements shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use pdmp_impulse::model::{benchmark_model, lambda_integral, LinearCost, PdmpModel, TransportModel};
use pdmp_impulse::operators::{build_time_grid, DeltaPolicy, Operators};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `a0 + a1 sin(a2 x)` with `a0 >= |a1|`, so nonnegative.
#[derive(Clone, Copy, Debug)]
pub struct Wave {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Wave {
    pub fn random(rng: &mut impl Rng) -> Self {
        let a1: f64 = rng.gen_range(-0.3..0.3);
        Wave { a0: a1.abs() + rng.gen_range(0.0..0.5), a1, a2: rng.gen_range(0.5..6.0) }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.a0 + self.a1 * (self.a2 * x[0]).sin()
    }

    pub fn sup(&self) -> f64 {
        self.a0 + self.a1.abs()
    }

    /// Lipschitz constant of `t -> self(x + speed t)`.
    pub fn flow_lipschitz(&self, speed: f64) -> f64 {
        self.a1.abs() * self.a2 * speed
    }
}

pub fn bench() -> (TransportModel, LinearCost) {
    benchmark_model()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Worst absolute deviation over `n` random `(x, t, u)` of the shift identities
/// `F(phi(x,t),u) = e^{at+Lambda(x,t)} (F(x,t+u) - F(x,t))`, the analogous one
/// for `I`, and `Hv(phi(x,t),u) = e^{at+Lambda(x,t)} Hv(x,t+u)`.
pub fn semigroup_worst(n: usize, seed: u64) -> f64 {
    let (model, cost) = bench();
    let ops = Operators::new(&model, &cost).with_tol(1e-13);
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let x = [r.gen_range(0.0..0.999)];
        let ts = model.exit_time(&x);
        let t = r.gen_range(0.0..ts);
        let u = r.gen_range(0.0..1.2 * ts);
        let (v, w) = (Wave::random(&mut r), Wave::random(&mut r));
        let (v, w) = (|y: &[f64]| v.eval(y), |y: &[f64]| w.eval(y));
        let y = model.flow(&x, t);
        let scale = (cost_alpha() * t + lambda_integral(&model, &x, t).unwrap()).exp();
        let f = ops.op_f(&y, u) - scale * (ops.op_f(&x, t + u) - ops.op_f(&x, t));
        let i = ops.op_i(&w, &y, u) - scale * (ops.op_i(&w, &x, t + u) - ops.op_i(&w, &x, t));
        let h = ops.op_h(&v, &y, u) - scale * ops.op_h(&v, &x, t + u);
        worst = worst.max(f.abs()).max(i.abs()).max(h.abs());
    }
    worst
}

fn cost_alpha() -> f64 {
    bench().0.constants().alpha
}

/// Worst deviation of `L(v,w)(phi(x,t)) = e^{at+Lambda(x,t)} [inf_{s>=t} J(x,s) ∧ Kw(x) - F(x,t) - Iw(x,t)]`,
/// both infima on the same mesh of step `t*(x) / steps` shifted by `t`.
pub fn l_shift_worst(n: usize, steps: usize, seed: u64) -> f64 {
    let (model, cost) = bench();
    let ops = Operators::new(&model, &cost).with_tol(1e-13);
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let x = [r.gen_range(0.0..0.99)];
        let ts = model.exit_time(&x);
        let h = ts / steps as f64;
        let m0 = r.gen_range(0..steps - 1);
        let t = m0 as f64 * h;
        let (v, w) = (Wave::random(&mut r), Wave::random(&mut r));
        let (v, w) = (|y: &[f64]| v.eval(y), |y: &[f64]| w.eval(y));
        let y = model.flow(&x, t);
        let mut lhs_mesh: Vec<f64> = (0..steps - m0).map(|m| m as f64 * h).collect();
        lhs_mesh.push(model.exit_time(&y));
        let mut rhs_mesh: Vec<f64> = (m0..steps).map(|m| m as f64 * h).collect();
        rhs_mesh.push(ts);
        let lhs = ops.op_l_mesh(&v, &w, &y, &lhs_mesh);
        let prof = ops.profile(&v, &w, &x, &rhs_mesh);
        let inf = prof.j.iter().copied().fold(prof.k, f64::min);
        let scale = (cost_alpha() * t + lambda_integral(&model, &x, t).unwrap()).exp();
        let rhs = scale * (inf - prof.f[0] - prof.i[0]);
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

/// `C_f + C_w C_lambda + [v]_2 + C_v (C_lambda + alpha)`.
fn time_constant(model: &TransportModel, v: &Wave, w: &Wave) -> f64 {
    let l = model.constants();
    l.c_f + w.sup() * l.c_lambda + v.flow_lipschitz(model.spec().speed) + v.sup() * (l.c_lambda + l.alpha)
}

/// Violations of `|J(x,t) - J(x,u)| <= C |t - u|` over `n` random draws, and
/// the largest ratio of the two sides.
pub fn time_regularity(n: usize, seed: u64) -> (usize, f64) {
    let (model, cost) = bench();
    let ops = Operators::new(&model, &cost).with_tol(1e-13);
    let mut r = rng(seed);
    let (mut bad, mut ratio) = (0, 0.0f64);
    for _ in 0..n {
        let x = [r.gen_range(0.0..0.999)];
        let ts = model.exit_time(&x);
        let t = r.gen_range(0.0..ts);
        let u = if r.gen_bool(0.5) { r.gen_range(0.0..ts) } else { (t + r.gen_range(-1e-3..1e-3)).clamp(0.0, ts) };
        let (vw, ww) = (Wave::random(&mut r), Wave::random(&mut r));
        let (v, w) = (|y: &[f64]| vw.eval(y), |y: &[f64]| ww.eval(y));
        let lhs = (ops.op_j(&v, &w, &x, t) - ops.op_j(&v, &w, &x, u)).abs();
        let rhs = time_constant(&model, &vw, &ww) * (t - u).abs();
        if lhs > rhs + 1e-11 {
            bad += 1;
        }
        if rhs > 0.0 {
            ratio = ratio.max(lhs / rhs);
        }
    }
    (bad, ratio)
}

/// Violations of `|L(v,w)(x) - L^d(v,w)(x)| <= C Delta(x)` with `L` on a mesh
/// 100 times finer than the grid, and the largest ratio of the two sides.
pub fn discretization(n: usize, seed: u64) -> (usize, f64) {
    let (model, cost) = bench();
    let ops = Operators::new(&model, &cost).with_tol(1e-12);
    let mut r = rng(seed);
    let (mut bad, mut ratio) = (0, 0.0f64);
    for _ in 0..n {
        let x = [r.gen_range(0.0..0.999)];
        let ts = model.exit_time(&x);
        let delta = r.gen_range(0.005..0.25);
        let grid = build_time_grid(ts, &DeltaPolicy::Constant(delta)).unwrap();
        let (vw, ww) = (Wave::random(&mut r), Wave::random(&mut r));
        let (v, w) = (|y: &[f64]| vw.eval(y), |y: &[f64]| ww.eval(y));
        let fine = grid.delta / 100.0;
        let mut mesh: Vec<f64> = (0..).map(|m| m as f64 * fine).take_while(|&t| t < ts).collect();
        mesh.push(ts);
        let l_ref = ops.op_l_mesh(&v, &w, &x, &mesh);
        let l_d = ops.op_l_d(&v, &w, &x, &grid);
        let lhs = (l_ref - l_d).abs();
        let rhs = time_constant(&model, &vw, &ww) * grid.delta;
        if lhs > rhs + 1e-10 {
            bad += 1;
        }
        ratio = ratio.max(lhs / rhs);
    }
    (bad, ratio)
}
