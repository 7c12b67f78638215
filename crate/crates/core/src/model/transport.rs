//! One-dimensional transport PDMPs: constant-speed drift towards a right
//! boundary, with affine or constant jump rates and state-independent kernels.
//! The reference benchmark is a member of this family.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{ConstantsLedger, CostModel, PdmpModel};
use crate::error::{config, Result};
use crate::quadrature;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RateSpec {
    /// `lambda(x) = beta * x`
    Linear { beta: f64 },
    Constant(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum KernelSpec {
    Uniform { lo: f64, hi: f64 },
    Dirac(f64),
}

/// Parameters of a transport model on `E = [0, boundary)` together with an
/// affine running cost `f(x) = f_intercept - f_slope * x` and intervention
/// cost `c(x, y) = c0 + kappa * |x - y|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportSpec {
    pub speed: f64,
    pub boundary: f64,
    pub rate: RateSpec,
    pub kernel: KernelSpec,
    pub f_intercept: f64,
    pub f_slope: f64,
    pub c0: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub controls: Vec<f64>,
    /// Constant initializing function; `None` means `C_f / alpha`.
    pub g: Option<f64>,
    pub quad_tol: f64,
}

impl TransportSpec {
    /// The reference instance: `v = 1`, `beta = 3`, uniform jumps on `[0, 1/2]`,
    /// `f(x) = 1 - x`, `c = 0.08`, `alpha = 2` and 50 control points.
    pub fn benchmark() -> Self {
        TransportSpec {
            speed: 1.0,
            boundary: 1.0,
            rate: RateSpec::Linear { beta: 3.0 },
            kernel: KernelSpec::Uniform { lo: 0.0, hi: 0.5 },
            f_intercept: 1.0,
            f_slope: 1.0,
            c0: 0.08,
            kappa: 0.0,
            alpha: 2.0,
            controls: uniform_controls(50, 1.0),
            g: None,
            quad_tol: quadrature::DEFAULT_TOL,
        }
    }

    pub fn ledger(&self) -> ConstantsLedger {
        let b = self.boundary;
        let (c_lambda, l_lambda_1) = match self.rate {
            RateSpec::Linear { beta } => (beta * b, beta),
            RateSpec::Constant(l) => (l, 0.0),
        };
        let f_end = self.f_intercept - self.f_slope * b;
        ConstantsLedger {
            c_lambda,
            l_lambda_1,
            c_tstar: b / self.speed,
            l_tstar: 1.0 / self.speed,
            c_f: self.f_intercept.max(f_end),
            l_f_1: self.f_slope.abs(),
            l_f_2: self.f_slope.abs() * self.speed,
            // phi(x, t*(x)) is the boundary point for every x.
            l_f_star: 0.0,
            c_0: self.c0,
            c_c: self.c0 + self.kappa * b,
            l_c_1: self.kappa,
            l_c_2: self.kappa * self.speed,
            l_c_star: 0.0,
            alpha: self.alpha,
            // Q(x, .) does not depend on x.
            l_q: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(config("speed v must be positive"));
        }
        if !(self.boundary > 0.0 && self.boundary.is_finite()) {
            return Err(config("boundary must be positive"));
        }
        match self.rate {
            RateSpec::Linear { beta } if !(beta >= 0.0 && beta.is_finite()) => {
                return Err(config("beta must be nonnegative"))
            }
            RateSpec::Constant(l) if !(l >= 0.0 && l.is_finite()) => {
                return Err(config("constant jump rate must be nonnegative"))
            }
            _ => {}
        }
        match self.kernel {
            KernelSpec::Uniform { lo, hi } if !(0.0 <= lo && lo < hi && hi < self.boundary) => {
                return Err(config("uniform kernel support must satisfy 0 <= lo < hi < boundary"))
            }
            KernelSpec::Dirac(p) if !(0.0 <= p && p < self.boundary) => {
                return Err(config("dirac kernel point must lie in [0, boundary)"))
            }
            _ => {}
        }
        if self.f_intercept.min(self.f_intercept - self.f_slope * self.boundary) < 0.0 {
            return Err(config("running cost must be nonnegative on the state space"));
        }
        if self.kappa < 0.0 {
            return Err(config("kappa must be nonnegative"));
        }
        if self.controls.is_empty() {
            return Err(config("control set is empty"));
        }
        if self.controls.iter().any(|&y| !(0.0 <= y && y < self.boundary)) {
            return Err(config("control points must lie in [0, boundary)"));
        }
        if !(self.quad_tol > 0.0) {
            return Err(config("quadrature tolerance must be positive"));
        }
        self.ledger().validate()
    }

    pub fn build(&self) -> (TransportModel, LinearCost) {
        let ledger = self.ledger();
        let g = self.g.unwrap_or(ledger.c_f / ledger.alpha);
        let model = TransportModel { spec: self.clone(), ledger: ledger.clone() };
        let cost = LinearCost {
            intercept: self.f_intercept,
            slope: self.f_slope,
            c0: self.c0,
            kappa: self.kappa,
            alpha: self.alpha,
            controls: self.controls.iter().map(|&y| vec![y]).collect(),
            g,
        };
        (model, cost)
    }
}

/// `{k * boundary / u : 0 <= k < u}`.
pub fn uniform_controls(u: usize, boundary: f64) -> Vec<f64> {
    (0..u).map(|k| k as f64 * boundary / u as f64).collect()
}

/// The reference benchmark pair.
pub fn benchmark_model() -> (TransportModel, LinearCost) {
    TransportSpec::benchmark().build()
}

#[derive(Clone, Debug)]
pub struct TransportModel {
    spec: TransportSpec,
    ledger: ConstantsLedger,
}

impl TransportModel {
    pub fn spec(&self) -> &TransportSpec {
        &self.spec
    }
}

impl PdmpModel for TransportModel {
    fn state_dim(&self) -> usize {
        1
    }

    fn flow(&self, x: &[f64], t: f64) -> Vec<f64> {
        vec![x[0] + self.spec.speed * t]
    }

    fn jump_rate(&self, x: &[f64]) -> f64 {
        match self.spec.rate {
            RateSpec::Linear { beta } => beta * x[0],
            RateSpec::Constant(l) => l,
        }
    }

    fn exit_time(&self, x: &[f64]) -> f64 {
        ((self.spec.boundary - x[0]) / self.spec.speed).max(0.0)
    }

    fn sample_kernel(&self, _x: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        match self.spec.kernel {
            KernelSpec::Uniform { lo, hi } => vec![lo + (hi - lo) * rng.gen::<f64>()],
            KernelSpec::Dirac(p) => vec![p],
        }
    }

    fn kernel_expect(&self, _x: &[f64], w: &dyn Fn(&[f64]) -> f64) -> f64 {
        match self.spec.kernel {
            KernelSpec::Uniform { lo, hi } => {
                let tol = self.spec.quad_tol * (hi - lo);
                quadrature::integrate(|z| w(&[z]), lo, hi, tol) / (hi - lo)
            }
            KernelSpec::Dirac(p) => w(&[p]),
        }
    }

    fn kernel_is_state_independent(&self) -> bool {
        true
    }

    fn constants(&self) -> &ConstantsLedger {
        &self.ledger
    }

    fn lambda_integral_exact(&self, x: &[f64], t: f64) -> Option<f64> {
        Some(match self.spec.rate {
            RateSpec::Linear { beta } => beta * (x[0] * t + 0.5 * self.spec.speed * t * t),
            RateSpec::Constant(l) => l * t,
        })
    }

    fn lambda_inverse_exact(&self, x: &[f64], e: f64) -> Option<f64> {
        if e <= 0.0 {
            return Some(0.0);
        }
        match self.spec.rate {
            RateSpec::Linear { beta } if beta > 0.0 => {
                // Root of (beta v / 2) s^2 + beta x s - e in the cancellation-free form.
                let x0 = x[0];
                let disc = (x0 * x0 + 2.0 * self.spec.speed * e / beta).sqrt();
                Some(2.0 * e / (beta * (x0 + disc)))
            }
            RateSpec::Constant(l) if l > 0.0 => Some(e / l),
            _ => None,
        }
    }
}

/// Affine running cost and distance-based intervention cost on the line.
#[derive(Clone, Debug)]
pub struct LinearCost {
    intercept: f64,
    slope: f64,
    c0: f64,
    kappa: f64,
    alpha: f64,
    controls: Vec<Vec<f64>>,
    g: f64,
}

impl LinearCost {
    pub fn g_constant(&self) -> f64 {
        self.g
    }
}

impl CostModel for LinearCost {
    fn running_cost(&self, x: &[f64]) -> f64 {
        self.intercept - self.slope * x[0]
    }

    fn intervention_cost(&self, x: &[f64], y: &[f64]) -> f64 {
        self.c0 + self.kappa * (x[0] - y[0]).abs()
    }

    fn control_set(&self) -> &[Vec<f64>] {
        &self.controls
    }

    fn discount(&self) -> f64 {
        self.alpha
    }

    fn terminal_g(&self, _x: &[f64]) -> f64 {
        self.g
    }
}
