//! Exhaustive evaluation of both backward recursions on tiny chains.
//!
//! Deliberately self-contained: the toy model (constant jump rate, affine
//! running cost, transport flow) has a closed-form `F`, the time grids are
//! rebuilt from their definition, and every conditional expectation is a
//! plain sum over outcomes. Nothing here calls the operator or solver code.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{KernelSpec, RateSpec, TransportSpec};
use crate::quantizer::{LayerGrid, QuantizedChain, StartSpec, Transition};

pub const MAX_CELLS: usize = 4;
pub const MAX_HORIZON: usize = 3;

/// Layers of `(z, s)` cells with dense transition matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyChain {
    pub cells: Vec<Vec<(f64, f64)>>,
    pub weights: Vec<Vec<f64>>,
    /// `trans[n][i][j] = P(cell i of layer n -> cell j of layer n + 1)`.
    pub trans: Vec<Vec<Vec<f64>>>,
}

/// A transport model on `[0, boundary)` with constant jump rate, affine cost
/// `f(x) = f_a - f_b x`, intervention cost `c0 + kappa |x - y|`, a constant
/// terminal `g`, a constant time step, and quantized main and control chains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyInstance {
    pub speed: f64,
    pub boundary: f64,
    pub rate: f64,
    pub f_a: f64,
    pub f_b: f64,
    pub c0: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub controls: Vec<f64>,
    pub g: f64,
    pub delta: f64,
    pub horizon: usize,
    /// Starts at the single cell `(x0, 0)`.
    pub main: ToyChain,
    /// Layer 0 is the control set.
    pub control: ToyChain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub v0: f64,
    /// `tilde[k][i]` for `k = 1..=N`; `tilde[0]` is empty.
    pub tilde: Vec<Vec<f64>>,
}

impl ToyInstance {
    fn tstar(&self, z: f64) -> f64 {
        (self.boundary - z) / self.speed
    }

    /// `∫_0^{t ∧ t*} exp(-(alpha + rate) s) (f_a - f_b (z + v s)) ds` in closed form.
    pub fn f_closed(&self, z: f64, t: f64) -> f64 {
        let tt = t.min(self.tstar(z));
        if tt <= 0.0 {
            return 0.0;
        }
        let r = self.alpha + self.rate;
        let e = (-r * tt).exp();
        let m0 = (1.0 - e) / r;
        let m1 = (1.0 - e * (1.0 + r * tt)) / (r * r);
        (self.f_a - self.f_b * z) * m0 - self.f_b * self.speed * m1
    }

    /// Definition of the path-adapted grid, written out directly.
    pub fn grid(&self, z: f64) -> Vec<f64> {
        let ts = self.tstar(z);
        if self.delta >= ts {
            return vec![0.0];
        }
        let count = (ts / self.delta).floor() as i64 - 1;
        let mut n = count.max(0);
        while n > 0 && n as f64 * self.delta > ts - self.delta {
            n -= 1;
        }
        (0..=n).map(|i| i as f64 * self.delta).collect()
    }

    fn m(&self, tilde: &[f64], x: f64) -> f64 {
        let mut best = f64::INFINITY;
        for (i, &y) in self.controls.iter().enumerate() {
            let c = self.c0 + self.kappa * (x - y).abs();
            if c + tilde[i] < best {
                best = c + tilde[i];
            }
        }
        best
    }

    /// `min_t J ∧ K` at cell `i` of layer `n`, enumerating every successor.
    fn step(&self, chain: &ToyChain, n: usize, i: usize, tilde: &[f64], w_next: &[f64]) -> f64 {
        let (z, _) = chain.cells[n][i];
        let ts = self.tstar(z);
        let row = &chain.trans[n][i];
        let mut k = self.f_closed(z, ts);
        for (j, &p) in row.iter().enumerate() {
            let s = chain.cells[n + 1][j].1;
            k += p * (-self.alpha * s).exp() * w_next[j];
        }
        let mut best = f64::INFINITY;
        for t in self.grid(z) {
            let tt = t.min(ts);
            let restart = (-self.alpha * tt).exp() * self.m(tilde, z + self.speed * tt);
            let mut j_val = self.f_closed(z, t);
            for (j, &p) in row.iter().enumerate() {
                let s = chain.cells[n + 1][j].1;
                j_val += if s < tt { p * (-self.alpha * s).exp() * w_next[j] } else { p * restart };
            }
            if j_val < best {
                best = j_val;
            }
        }
        if k < best {
            k
        } else {
            best
        }
    }

    fn check_size(&self) -> Result<()> {
        let too_big = |c: &ToyChain| c.cells.iter().any(|l| l.len() > MAX_CELLS);
        if self.horizon > MAX_HORIZON || too_big(&self.main) || too_big(&self.control) {
            return Err(Error::TooLarge(format!(
                "at most {MAX_CELLS} cells per layer and horizon {MAX_HORIZON}"
            )));
        }
        if self.main.cells.len() < self.horizon + 1 || self.control.cells.len() < self.horizon {
            return Err(Error::Config("toy chains are shorter than the horizon".into()));
        }
        Ok(())
    }

    /// The same model expressed for the production code path.
    pub fn transport_spec(&self, quad_tol: f64) -> TransportSpec {
        TransportSpec {
            speed: self.speed,
            boundary: self.boundary,
            rate: RateSpec::Constant(self.rate),
            kernel: KernelSpec::Uniform { lo: 0.0, hi: 0.5 * self.boundary },
            f_intercept: self.f_a,
            f_slope: self.f_b,
            c0: self.c0,
            kappa: self.kappa,
            alpha: self.alpha,
            controls: self.controls.clone(),
            g: Some(self.g),
            quad_tol,
        }
    }

    /// `(main, pooled control)` chains in the production format.
    pub fn chains(&self) -> (QuantizedChain, QuantizedChain) {
        let main = to_chain(&self.main, StartSpec::Fixed(vec![self.main.cells[0][0].0]));
        let start = StartSpec::UniformOverControls(self.controls.iter().map(|&y| vec![y]).collect());
        (main, to_chain(&self.control, start))
    }

    /// Random instance with at most `max_cells` cells per layer.
    pub fn random(rng: &mut dyn RngCore, horizon: usize, max_cells: usize) -> Self {
        let boundary = 1.0;
        let speed = 0.5 + rng.gen::<f64>();
        let u = 1 + rng.gen_range(0..max_cells);
        let mut controls: Vec<f64> = (0..u).map(|_| 0.9 * rng.gen::<f64>()).collect();
        controls.sort_by(f64::total_cmp);
        controls.dedup();
        let f_b = rng.gen::<f64>();
        let x0 = 0.9 * rng.gen::<f64>();
        let mut inst = ToyInstance {
            speed,
            boundary,
            rate: 3.0 * rng.gen::<f64>(),
            f_a: f_b + rng.gen::<f64>(),
            f_b,
            c0: 0.01 + 0.2 * rng.gen::<f64>(),
            kappa: 0.3 * rng.gen::<f64>(),
            alpha: 0.5 + 2.0 * rng.gen::<f64>(),
            g: 0.0,
            delta: 0.05 + 0.4 * rng.gen::<f64>(),
            horizon,
            main: random_chain(rng, vec![(x0, 0.0)], horizon, max_cells, speed),
            control: random_chain(rng, controls.iter().map(|&y| (y, 0.0)).collect(), horizon, max_cells, speed),
            controls,
        };
        inst.g = inst.f_a / inst.alpha;
        inst
    }
}

fn random_chain(
    rng: &mut dyn RngCore,
    first: Vec<(f64, f64)>,
    horizon: usize,
    max_cells: usize,
    speed: f64,
) -> ToyChain {
    let mut cells = vec![first];
    for _ in 0..horizon {
        let k = 1 + rng.gen_range(0..max_cells);
        let mut layer: Vec<(f64, f64)> = Vec::with_capacity(k);
        while layer.len() < k {
            let z = 0.95 * rng.gen::<f64>();
            let s = (0.02 + rng.gen::<f64>()) / speed;
            if !layer.iter().any(|&(a, b)| a == z && b == s) {
                layer.push((z, s));
            }
        }
        cells.push(layer);
    }
    let weights = cells.iter().map(|l| normalized(rng, l.len())).collect();
    let trans = (0..horizon).map(|n| (0..cells[n].len()).map(|_| normalized(rng, cells[n + 1].len())).collect()).collect();
    ToyChain { cells, weights, trans }
}

fn to_chain(toy: &ToyChain, start: StartSpec) -> QuantizedChain {
    let layers = toy
        .cells
        .iter()
        .zip(&toy.weights)
        .enumerate()
        .map(|(n, (cells, w))| {
            let (z, s) = cells.iter().copied().unzip();
            LayerGrid::new(n, 1, z, s, w.clone(), vec![1.0, 1.0])
        })
        .collect();
    let n = toy.cells.len();
    QuantizedChain {
        p: 2.0,
        start,
        layers,
        transitions: toy.trans.iter().map(|t| Transition::from_dense(t)).collect(),
        distortion_z: vec![0.0; n],
        distortion_s: vec![0.0; n],
        warnings: Vec::new(),
    }
}

fn normalized(rng: &mut dyn RngCore, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| 0.05 + rng.gen::<f64>()).collect();
    let s: f64 = v.iter().sum();
    for x in &mut v {
        *x /= s;
    }
    let resid = 1.0 - v.iter().sum::<f64>();
    v[0] += resid;
    v
}

/// Runs the control-grid triangle and the main recursion by enumeration.
pub fn brute_force_recursion(inst: &ToyInstance) -> Result<BruteForceResult> {
    inst.check_size()?;
    let n_h = inst.horizon;
    let u = inst.controls.len();
    let mut tilde: Vec<Vec<f64>> = vec![Vec::new(); n_h + 1];
    tilde[n_h] = vec![inst.g; u];
    for k in (1..n_h).rev() {
        let top = n_h - k;
        let mut w = vec![inst.g; inst.control.cells[top].len()];
        for n in (1..=top).rev() {
            let layer = n - 1;
            w = (0..inst.control.cells[layer].len())
                .map(|i| inst.step(&inst.control, layer, i, &tilde[k + n], &w))
                .collect();
        }
        tilde[k] = w;
    }
    if n_h == 0 {
        return Ok(BruteForceResult { v0: inst.g, tilde });
    }
    let mut v = vec![inst.g; inst.main.cells[n_h].len()];
    for k in (1..=n_h).rev() {
        v = (0..inst.main.cells[k - 1].len()).map(|i| inst.step(&inst.main, k - 1, i, &tilde[k], &v)).collect();
    }
    Ok(BruteForceResult { v0: v[0], tilde })
}

/// The main recursion with interventions disabled: `v_{k-1} = K v_k`.
pub fn brute_force_pure_k(inst: &ToyInstance, chain: &ToyChain, top: usize) -> Vec<f64> {
    let mut w = vec![inst.g; chain.cells[top].len()];
    for n in (0..top).rev() {
        w = (0..chain.cells[n].len())
            .map(|i| {
                let (z, _) = chain.cells[n][i];
                let mut k = inst.f_closed(z, inst.tstar(z));
                for (j, &p) in chain.trans[n][i].iter().enumerate() {
                    k += p * (-inst.alpha * chain.cells[n + 1][j].1).exp() * w[j];
                }
                k
            })
            .collect();
    }
    w
}
