//! Flat `key = value` run configuration.
//!
//! ```text
//! # benchmark, three grid sizes
//! v = 1
//! beta = 3
//! c0 = 0.08
//! alpha = 2
//! u = 50
//! x0 = 0
//! N = 5
//! layer_sizes = 100
//! seed = 7
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config, Result};
use crate::model::{uniform_controls, KernelSpec, RateSpec, TransportSpec};
use crate::quadrature;
use crate::quantizer::{LearningRate, TrainOptions};
use crate::solver::DeltaMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartMode {
    /// One chain started uniformly on the control set.
    Pooled,
    /// One chain per control point.
    PerPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: TransportSpec,
    pub x0: f64,
    pub horizon: usize,
    /// Sizes of layers `1..=N`.
    pub layer_sizes: Vec<usize>,
    pub seed: u64,
    pub p: f64,
    pub train_paths: u64,
    pub est_paths: u64,
    pub pilot_paths: u64,
    pub delta: DeltaMode,
    pub start: StartMode,
    pub mc_sims: u64,
    pub mc_horizon: f64,
    pub sweep_sizes: Vec<usize>,
    pub sweep_horizons: Vec<usize>,
}

const KEYS: &[&str] = &[
    "v", "boundary", "beta", "lambda", "kernel_lo", "kernel_hi", "f_intercept", "f_slope", "c0", "kappa",
    "alpha", "u", "x0", "N", "layer_sizes", "seed", "p", "train_paths", "est_paths", "pilot_paths", "delta",
    "safety", "n_max", "start", "mc_sims", "mc_horizon", "quad_tol", "sweep_sizes", "sweep_horizons",
];

impl Default for RunConfig {
    /// The benchmark at `N = 5`, 100 cells per layer.
    fn default() -> Self {
        let model = TransportSpec::benchmark();
        RunConfig {
            mc_horizon: 10.0 / model.alpha,
            model,
            x0: 0.0,
            horizon: 5,
            layer_sizes: vec![100; 5],
            seed: 1,
            p: 2.0,
            train_paths: 1_000_000,
            est_paths: 1_000_000,
            pilot_paths: 20_000,
            delta: DeltaMode::default(),
            start: StartMode::Pooled,
            mc_sims: 100_000,
            sweep_sizes: vec![50, 100, 500],
            sweep_horizons: vec![5, 10, 15],
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| config(format!("{key}: cannot parse {v:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|x| parse_num(key, x.trim())).collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config(format!("line {}: expected key = value", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(config(format!("line {}: unknown key {k:?}", lineno + 1)));
            }
            if kv.insert(k, v).is_some() {
                return Err(config(format!("line {}: duplicate key {k:?}", lineno + 1)));
            }
        }
        let mut c = RunConfig::default();
        let m = &mut c.model;
        let get = |k: &str| kv.get(k).copied();
        if let Some(v) = get("v") {
            m.speed = parse_num("v", v)?;
        }
        if let Some(v) = get("boundary") {
            m.boundary = parse_num("boundary", v)?;
        }
        match (get("beta"), get("lambda")) {
            (Some(_), Some(_)) => return Err(config("beta and lambda are mutually exclusive")),
            (Some(v), None) => m.rate = RateSpec::Linear { beta: parse_num("beta", v)? },
            (None, Some(v)) => m.rate = RateSpec::Constant(parse_num("lambda", v)?),
            (None, None) => {}
        }
        if get("kernel_lo").is_some() || get("kernel_hi").is_some() {
            let (lo, hi) = match m.kernel {
                KernelSpec::Uniform { lo, hi } => (lo, hi),
                KernelSpec::Dirac(p) => (p, p),
            };
            let lo = get("kernel_lo").map(|v| parse_num("kernel_lo", v)).transpose()?.unwrap_or(lo);
            let hi = get("kernel_hi").map(|v| parse_num("kernel_hi", v)).transpose()?.unwrap_or(hi);
            m.kernel = if lo == hi { KernelSpec::Dirac(lo) } else { KernelSpec::Uniform { lo, hi } };
        }
        if let Some(v) = get("f_intercept") {
            m.f_intercept = parse_num("f_intercept", v)?;
        }
        if let Some(v) = get("f_slope") {
            m.f_slope = parse_num("f_slope", v)?;
        }
        if let Some(v) = get("c0") {
            m.c0 = parse_num("c0", v)?;
        }
        if let Some(v) = get("kappa") {
            m.kappa = parse_num("kappa", v)?;
        }
        if let Some(v) = get("alpha") {
            m.alpha = parse_num("alpha", v)?;
        }
        let u: usize = get("u").map(|v| parse_num("u", v)).transpose()?.unwrap_or(m.controls.len());
        m.controls = uniform_controls(u, m.boundary);
        m.quad_tol = get("quad_tol").map(|v| parse_num("quad_tol", v)).transpose()?.unwrap_or(quadrature::DEFAULT_TOL);
        c.mc_horizon = 10.0 / m.alpha;

        if let Some(v) = get("x0") {
            c.x0 = parse_num("x0", v)?;
        }
        if let Some(v) = get("N") {
            c.horizon = parse_num("N", v)?;
        }
        let sizes: Vec<usize> = match get("layer_sizes") {
            Some(v) => parse_list("layer_sizes", v)?,
            None => vec![c.layer_sizes[0]],
        };
        c.layer_sizes = broadcast_sizes(&sizes, c.horizon)?;
        if let Some(v) = get("seed") {
            c.seed = parse_num("seed", v)?;
        }
        if let Some(v) = get("p") {
            c.p = parse_num("p", v)?;
        }
        if let Some(v) = get("train_paths") {
            c.train_paths = parse_num("train_paths", v)?;
        }
        if let Some(v) = get("est_paths") {
            c.est_paths = parse_num("est_paths", v)?;
        }
        if let Some(v) = get("pilot_paths") {
            c.pilot_paths = parse_num("pilot_paths", v)?;
        }
        let (mut safety, mut n_max) = match c.delta {
            DeltaMode::BudgetFloor { safety, n_max } => (safety, n_max),
            DeltaMode::Constant(_) => unreachable!(),
        };
        if let Some(v) = get("safety") {
            safety = parse_num("safety", v)?;
        }
        if let Some(v) = get("n_max") {
            n_max = parse_num("n_max", v)?;
        }
        c.delta = match get("delta") {
            None | Some("budget") => DeltaMode::BudgetFloor { safety, n_max },
            Some(v) => DeltaMode::Constant(parse_num("delta", v)?),
        };
        c.start = match get("start") {
            None | Some("pooled") => StartMode::Pooled,
            Some("per-point") => StartMode::PerPoint,
            Some(v) => return Err(config(format!("start: expected pooled or per-point, got {v:?}"))),
        };
        if let Some(v) = get("mc_sims") {
            c.mc_sims = parse_num("mc_sims", v)?;
        }
        if let Some(v) = get("mc_horizon") {
            c.mc_horizon = parse_num("mc_horizon", v)?;
        }
        if let Some(v) = get("sweep_sizes") {
            c.sweep_sizes = parse_list("sweep_sizes", v)?;
        }
        if let Some(v) = get("sweep_horizons") {
            c.sweep_horizons = parse_list("sweep_horizons", v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(0.0 <= self.x0 && self.x0 < self.model.boundary) {
            return Err(config("x0 must lie in [0, boundary)"));
        }
        if self.layer_sizes.len() != self.horizon || self.layer_sizes.iter().any(|&k| k == 0) {
            return Err(config("layer_sizes must hold N positive entries"));
        }
        if !(self.p >= 1.0) {
            return Err(config("p must be at least 1"));
        }
        if self.train_paths == 0 || self.est_paths == 0 {
            return Err(config("path counts must be positive"));
        }
        match self.delta {
            DeltaMode::Constant(d) if !(d > 0.0) => return Err(config("delta must be positive")),
            DeltaMode::BudgetFloor { safety, n_max } if !(safety >= 1.0) || n_max == 0 => {
                return Err(config("safety must be at least 1 and n_max positive"))
            }
            _ => {}
        }
        if !(self.mc_horizon > 0.0) {
            return Err(config("mc_horizon must be positive"));
        }
        if self.sweep_sizes.iter().any(|&k| k == 0) {
            return Err(config("sweep sizes must be positive"));
        }
        if self.sweep_horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config("sweep horizons must be strictly increasing"));
        }
        Ok(())
    }

    pub fn train_options(&self, seed: u64) -> TrainOptions {
        TrainOptions {
            p: self.p,
            n_train: self.train_paths,
            n_est: self.est_paths,
            n_pilot: self.pilot_paths,
            lr: LearningRate::default(),
            seed,
        }
    }

    pub fn set_layer_sizes(&mut self, sizes: &[usize]) -> Result<()> {
        self.layer_sizes = broadcast_sizes(sizes, self.horizon)?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// One size applies to every layer; otherwise exactly `horizon` sizes.
pub fn broadcast_sizes(sizes: &[usize], horizon: usize) -> Result<Vec<usize>> {
    match sizes.len() {
        1 => Ok(vec![sizes[0]; horizon]),
        n if n == horizon => Ok(sizes.to_vec()),
        n => Err(config(format!("{n} layer sizes for horizon {horizon}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_the_benchmark() {
        let c = RunConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.model.controls.len(), 50);
    }

    #[test]
    fn keys_are_applied() {
        let c = RunConfig::parse("v = 2\nbeta=1.5\nc0 = 0.1 # comment\nu=10\nN=3\nlayer_sizes=4,5,6\nseed=9\ndelta=0.05")
            .unwrap();
        assert_eq!(c.model.speed, 2.0);
        assert_eq!(c.model.rate, RateSpec::Linear { beta: 1.5 });
        assert_eq!(c.model.controls.len(), 10);
        assert_eq!(c.layer_sizes, vec![4, 5, 6]);
        assert_eq!(c.delta, DeltaMode::Constant(0.05));
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn bad_input_is_rejected() {
        for text in ["bogus = 1", "v = 1\nv = 2", "N = 3\nlayer_sizes = 1,2", "v = abc", "start = both", "no equals"] {
            assert!(RunConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
