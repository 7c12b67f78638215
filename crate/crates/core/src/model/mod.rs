//! PDMP and cost abstractions, the constants ledger, and exact simulation of
//! the embedded chain of post-jump locations and inter-jump times.

mod transport;

pub use transport::{benchmark_model, uniform_controls, KernelSpec, LinearCost, RateSpec, TransportModel, TransportSpec};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature;

/// Relative slack allowed when a time argument sits on the exit time.
const T_SLACK: f64 = 1e-12;

/// Bounds and Lipschitz constants of the model and cost data.
///
/// Subscript 1 is the Lipschitz constant in space, 2 along the flow, and
/// `star` the constant of the boundary map `x -> w(phi(x, t*(x)))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub c_lambda: f64,
    pub l_lambda_1: f64,
    pub c_tstar: f64,
    pub l_tstar: f64,
    pub c_f: f64,
    pub l_f_1: f64,
    pub l_f_2: f64,
    pub l_f_star: f64,
    pub c_0: f64,
    pub c_c: f64,
    pub l_c_1: f64,
    pub l_c_2: f64,
    pub l_c_star: f64,
    pub alpha: f64,
    pub l_q: f64,
}

impl ConstantsLedger {
    fn entries(&self) -> [(&'static str, f64); 15] {
        [
            ("C_lambda", self.c_lambda),
            ("L_lambda_1", self.l_lambda_1),
            ("C_tstar", self.c_tstar),
            ("L_tstar", self.l_tstar),
            ("C_f", self.c_f),
            ("L_f_1", self.l_f_1),
            ("L_f_2", self.l_f_2),
            ("L_f_star", self.l_f_star),
            ("c_0", self.c_0),
            ("C_c", self.c_c),
            ("L_c_1", self.l_c_1),
            ("L_c_2", self.l_c_2),
            ("L_c_star", self.l_c_star),
            ("alpha", self.alpha),
            ("L_Q", self.l_q),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.entries() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::Config(format!("ledger entry {name} = {value} must be finite and nonnegative")));
            }
        }
        if self.alpha <= 0.0 {
            return Err(Error::Config("discount alpha must be positive".into()));
        }
        if !(self.c_0 > 0.0 && self.c_0 <= self.c_c) {
            return Err(Error::Config(format!(
                "intervention cost bounds need 0 < c_0 <= C_c, got c_0 = {}, C_c = {}",
                self.c_0, self.c_c
            )));
        }
        Ok(())
    }
}

/// Local characteristics of a PDMP on a subset of R^d.
pub trait PdmpModel: Send + Sync {
    fn state_dim(&self) -> usize;

    /// Deterministic flow `phi(x, t)`.
    fn flow(&self, x: &[f64], t: f64) -> Vec<f64>;

    fn jump_rate(&self, x: &[f64]) -> f64;

    /// Time for the flow started at `x` to hit the boundary.
    fn exit_time(&self, x: &[f64]) -> f64;

    /// One draw from the post-jump kernel `Q(x, .)`.
    fn sample_kernel(&self, x: &[f64], rng: &mut dyn RngCore) -> Vec<f64>;

    /// `Qw(x)`, computed exactly or by quadrature over the kernel's support.
    fn kernel_expect(&self, x: &[f64], w: &dyn Fn(&[f64]) -> f64) -> f64;

    /// True when `Q(x, .)` is the same law for every `x`, so `Qw` can be
    /// evaluated once per function instead of once per state.
    fn kernel_is_state_independent(&self) -> bool {
        false
    }

    fn constants(&self) -> &ConstantsLedger;

    /// Closed form of `Lambda(x, t)` when the model knows one.
    fn lambda_integral_exact(&self, _x: &[f64], _t: f64) -> Option<f64> {
        None
    }

    /// Closed-form solution `s` of `Lambda(x, s) = e` on `[0, t*(x)]`, when available.
    fn lambda_inverse_exact(&self, _x: &[f64], _e: f64) -> Option<f64> {
        None
    }
}

/// Running cost, intervention cost and control set of the impulse problem.
pub trait CostModel: Send + Sync {
    fn running_cost(&self, x: &[f64]) -> f64;

    fn intervention_cost(&self, x: &[f64], y: &[f64]) -> f64;

    /// Ordered control set `U = {y^1, ..., y^u}`.
    fn control_set(&self) -> &[Vec<f64>];

    fn discount(&self) -> f64;

    /// Initializing function of the backward recursions.
    fn terminal_g(&self, x: &[f64]) -> f64;
}

/// One realization of the embedded chain `(Z_n, S_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainPath {
    pub z: Vec<Vec<f64>>,
    pub s: Vec<f64>,
    pub hit_boundary: Vec<bool>,
}

impl ChainPath {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

fn check_time(model: &dyn PdmpModel, x: &[f64], t: f64) -> Result<f64> {
    let ts = model.exit_time(x);
    if !(t >= 0.0) || t > ts * (1.0 + T_SLACK) + T_SLACK {
        return Err(domain(format!("time {t} outside [0, t*(x) = {ts}]")));
    }
    Ok(t.min(ts))
}

/// `Lambda(x, t)`, the integrated jump rate along the flow.
pub fn lambda_integral(model: &dyn PdmpModel, x: &[f64], t: f64) -> Result<f64> {
    let t = check_time(model, x, t)?;
    Ok(lambda_integral_unchecked(model, x, t, quadrature::DEFAULT_TOL))
}

pub(crate) fn lambda_integral_unchecked(model: &dyn PdmpModel, x: &[f64], t: f64, tol: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if let Some(v) = model.lambda_integral_exact(x, t) {
        return v;
    }
    quadrature::integrate(|s| model.jump_rate(&model.flow(x, s)), 0.0, t, tol)
}

/// Samples the first jump time from `x` by inverse transform.
///
/// Returns `(s, forced)` where `forced` means the flow reached the boundary
/// before a random jump occurred.
pub fn sample_first_jump(model: &dyn PdmpModel, x: &[f64], rng: &mut dyn RngCore) -> (f64, bool) {
    let ts = model.exit_time(x);
    // 1 - U lies in (0, 1], so the exponential level is finite.
    let u: f64 = 1.0 - rng.gen::<f64>();
    let level = -u.ln();
    let total = lambda_integral_unchecked(model, x, ts, quadrature::DEFAULT_TOL);
    if level >= total {
        return (ts, true);
    }
    if let Some(s) = model.lambda_inverse_exact(x, level) {
        return (s.clamp(0.0, ts), false);
    }
    (invert_lambda(model, x, level, ts), false)
}

/// Solves `Lambda(x, s) = level` on `[0, ts]` by safeguarded Newton steps.
fn invert_lambda(model: &dyn PdmpModel, x: &[f64], level: f64, ts: f64) -> f64 {
    const S_TOL: f64 = 1e-10;
    let (mut lo, mut hi) = (0.0, ts);
    let mut s = 0.5 * ts;
    for _ in 0..200 {
        let g = lambda_integral_unchecked(model, x, s, 1e-12) - level;
        if g > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let rate = model.jump_rate(&model.flow(x, s));
        let mut next = if rate > 0.0 { s - g / rate } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - s).abs() < S_TOL || hi - lo < S_TOL {
            return next;
        }
        s = next;
    }
    s
}

/// Simulates `Z_0 .. Z_N` and `S_0 .. S_N` started from `(x0, 0)`.
pub fn sample_chain(model: &dyn PdmpModel, x0: &[f64], n_jumps: usize, rng: &mut dyn RngCore) -> ChainPath {
    let mut path = ChainPath {
        z: Vec::with_capacity(n_jumps + 1),
        s: Vec::with_capacity(n_jumps + 1),
        hit_boundary: Vec::with_capacity(n_jumps + 1),
    };
    path.z.push(x0.to_vec());
    path.s.push(0.0);
    path.hit_boundary.push(false);
    for n in 0..n_jumps {
        let (s, forced) = sample_first_jump(model, &path.z[n], rng);
        let pre = model.flow(&path.z[n], s);
        let next = model.sample_kernel(&pre, rng);
        path.z.push(next);
        path.s.push(s);
        path.hit_boundary.push(forced);
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn no_jump_model() -> TransportModel {
        TransportSpec {
            rate: RateSpec::Constant(0.0),
            ..TransportSpec::benchmark()
        }
        .build()
        .0
    }

    #[test]
    fn lambda_rejects_times_past_exit() {
        let (m, _) = benchmark_model();
        assert!(matches!(lambda_integral(&m, &[0.5], 0.6), Err(Error::Domain(_))));
        assert!(matches!(lambda_integral(&m, &[0.5], -0.1), Err(Error::Domain(_))));
        assert_eq!(lambda_integral(&m, &[0.5], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn lambda_benchmark_values() {
        let (m, _) = benchmark_model();
        // antiderivative of 3 (x + s) on [0, t]
        let anti = |x: f64, t: f64| 3.0 * (x * t + 0.5 * t * t);
        assert!((lambda_integral(&m, &[0.0], 1.0).unwrap() - anti(0.0, 1.0)).abs() < 1e-14);
        assert!((lambda_integral(&m, &[0.5], 0.5).unwrap() - anti(0.5, 0.5)).abs() < 1e-14);
        let quad = quadrature::integrate(|s| 3.0 * (0.2 + s), 0.0, 0.7, 1e-13);
        assert!((lambda_integral(&m, &[0.2], 0.7).unwrap() - quad).abs() < 1e-12);
    }

    #[test]
    fn newton_inversion_matches_closed_form() {
        let (m, _) = benchmark_model();
        for &(x, e) in &[(0.0, 0.3), (0.4, 0.01), (0.1, 1.2)] {
            let exact = m.lambda_inverse_exact(&[x], e).unwrap();
            let numeric = invert_lambda(&m, &[x], e, m.exit_time(&[x]));
            assert!((exact - numeric).abs() < 1e-9, "{x} {e}: {exact} vs {numeric}");
        }
    }

    #[test]
    fn no_jump_model_always_forced() {
        let m = no_jump_model();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (s, forced) = sample_first_jump(&m, &[0.3], &mut rng);
            assert!(forced);
            assert_eq!(s, m.exit_time(&[0.3]));
        }
    }

    #[test]
    fn empty_chain_path() {
        let (m, _) = benchmark_model();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = sample_chain(&m, &[0.25], 0, &mut rng);
        assert_eq!(p.z, vec![vec![0.25]]);
        assert_eq!(p.s, vec![0.0]);
        assert_eq!(p.hit_boundary, vec![false]);
    }

    #[test]
    fn ledger_validation() {
        let (m, _) = benchmark_model();
        assert!(m.constants().validate().is_ok());
        let mut bad = m.constants().clone();
        bad.c_0 = 0.2;
        assert!(bad.validate().is_err());
        bad = m.constants().clone();
        bad.alpha = 0.0;
        assert!(bad.validate().is_err());
        bad = m.constants().clone();
        bad.l_q = f64::NAN;
        assert!(bad.validate().is_err());
    }
}
