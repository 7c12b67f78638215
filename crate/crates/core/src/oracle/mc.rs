use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::model::{sample_chain, sample_first_jump, CostModel, PdmpModel};
use crate::quadrature;

const CHUNK: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// Upper bound on the mass discarded by stopping at the horizon.
    pub truncation_bound: f64,
    pub n_sims: u64,
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Mean and standard error from per-chunk `(sum, sum of squares)` reduced in chunk order.
fn reduce(parts: Vec<(f64, f64)>, n: u64) -> (f64, f64) {
    let (mut s, mut q) = (0.0, 0.0);
    for (a, b) in parts {
        s += a;
        q += b;
    }
    let n = n as f64;
    let mean = s / n;
    let var = if n > 1.0 { ((q - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}

/// Discounted running cost of the uncontrolled process, `E_x[∫_0^T e^{-alpha s} f(X_s) ds]`.
pub fn mc_no_impulse_cost(
    model: &dyn PdmpModel,
    cost: &dyn CostModel,
    x0: &[f64],
    n_sims: u64,
    horizon: f64,
    seed: u64,
) -> Result<McEstimate> {
    if !(horizon > 0.0) {
        return Err(config("simulation horizon must be positive"));
    }
    if n_sims == 0 {
        return Err(config("need at least one simulation"));
    }
    let alpha = cost.discount();
    let tol = 1e-10;
    let parts: Vec<(f64, f64)> = (0..n_sims.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let (mut s, mut q) = (0.0, 0.0);
            for _ in c * CHUNK..((c + 1) * CHUNK).min(n_sims) {
                let mut x = x0.to_vec();
                let (mut t, mut acc) = (0.0, 0.0);
                while t < horizon {
                    let (jump, _) = sample_first_jump(model, &x, &mut rng);
                    let seg = jump.min(horizon - t);
                    acc += (-alpha * t).exp()
                        * quadrature::integrate(
                            |r| (-alpha * r).exp() * cost.running_cost(&model.flow(&x, r)),
                            0.0,
                            seg,
                            tol,
                        );
                    t += jump;
                    if t >= horizon {
                        break;
                    }
                    x = model.sample_kernel(&model.flow(&x, jump), &mut rng);
                }
                s += acc;
                q += acc * acc;
            }
            (s, q)
        })
        .collect();
    let (estimate, std_error) = reduce(parts, n_sims);
    let c_f = model.constants().c_f;
    Ok(McEstimate { estimate, std_error, truncation_bound: c_f * (-alpha * horizon).exp() / alpha, n_sims })
}

/// `E[exp(-alpha T_N)]` with `T_N` the time of the `N`-th jump.
pub fn mc_discount_at_jump(
    model: &dyn PdmpModel,
    alpha: f64,
    x0: &[f64],
    n_jumps: usize,
    n_sims: u64,
    seed: u64,
) -> Result<McEstimate> {
    if n_sims == 0 {
        return Err(config("need at least one simulation"));
    }
    let parts: Vec<(f64, f64)> = (0..n_sims.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let (mut s, mut q) = (0.0, 0.0);
            for _ in c * CHUNK..((c + 1) * CHUNK).min(n_sims) {
                let path = sample_chain(model, x0, n_jumps, &mut rng);
                let d = (-alpha * path.s.iter().sum::<f64>()).exp();
                s += d;
                q += d * d;
            }
            (s, q)
        })
        .collect();
    let (estimate, std_error) = reduce(parts, n_sims);
    Ok(McEstimate { estimate, std_error, truncation_bound: 0.0, n_sims })
}
