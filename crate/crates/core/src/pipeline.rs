//! End-to-end runs on transport models: training, solving, budgeting,
//! validation and the data files behind each command.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    chain_stats, control_sqrt_constants, iterate_budget, main_sqrt_constants, BudgetInputs, ErrorBudget,
    LipschitzEntry,
};
use crate::config::{RunConfig, StartMode};
use crate::error::{config, Result};
use crate::model::{sample_first_jump, LinearCost, PdmpModel, TransportModel};
use crate::operators::{Action, Operators};
use crate::oracle::{brute_force_recursion, mc_discount_at_jump, mc_no_impulse_cost, ToyInstance};
use crate::quantizer::{load_chain, save_chain, train_clvq, ChainSampler, QuantizedChain, StartSpec};
use crate::solver::{layer_policies, solve_control_values, solve_main, ControlChains, ControlValues, MainSolution};

/// Main chain from `x0` plus the control chain(s).
#[derive(Clone, Debug, PartialEq)]
pub struct Chains {
    pub main: QuantizedChain,
    /// A single pooled chain, or one chain per control point.
    pub control: Vec<QuantizedChain>,
    pub pooled: bool,
}

impl Chains {
    pub fn control_chains(&self) -> ControlChains<'_> {
        if self.pooled {
            ControlChains::Pooled(&self.control[0])
        } else {
            ControlChains::PerPoint(&self.control)
        }
    }

    pub fn truncate(&self, n: usize) -> Result<Chains> {
        Ok(Chains {
            main: self.main.truncate(n)?,
            control: self.control.iter().map(|c| c.truncate(n.min(c.horizon()))).collect::<Result<_>>()?,
            pooled: self.pooled,
        })
    }

    /// Writes `main.grid` and `control.grid` (or `control_<i>.grid`) into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        save_chain(&self.main, dir.join("main.grid"))?;
        if self.pooled {
            save_chain(&self.control[0], dir.join("control.grid"))?;
        } else {
            for (i, c) in self.control.iter().enumerate() {
                save_chain(c, dir.join(format!("control_{i}.grid")))?;
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Chains> {
        let main_path = dir.join("main.grid");
        if !main_path.exists() {
            return Err(config(format!("no grid files in {}", dir.display())));
        }
        let main = load_chain(main_path)?;
        let pooled_path = dir.join("control.grid");
        if pooled_path.exists() {
            return Ok(Chains { main, control: vec![load_chain(pooled_path)?], pooled: true });
        }
        let mut control = Vec::new();
        while let Some(p) = Some(dir.join(format!("control_{}.grid", control.len()))).filter(|p| p.exists()) {
            control.push(load_chain(p)?);
        }
        if control.is_empty() {
            return Err(config(format!("no control grid in {}", dir.display())));
        }
        Ok(Chains { main, control, pooled: false })
    }
}

/// Seeds of the main chain and of each control chain, all derived from one seed.
fn chain_seed(seed: u64, slot: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(slot)
}

/// Trains chains with `sizes[n - 1]` cells on layer `n`, `n = 1..=sizes.len()`.
pub fn train_chains(cfg: &RunConfig, model: &TransportModel, sizes: &[usize]) -> Result<Chains> {
    let mut full = vec![1];
    full.extend_from_slice(sizes);
    let controls: Vec<Vec<f64>> = cfg.model.controls.iter().map(|&y| vec![y]).collect();
    let main = train_clvq(
        &ChainSampler::new(model, StartSpec::Fixed(vec![cfg.x0])),
        &full,
        &cfg.train_options(chain_seed(cfg.seed, 0)),
    )?;
    let (control, pooled) = match cfg.start {
        StartMode::Pooled => {
            let sampler = ChainSampler::new(model, StartSpec::UniformOverControls(controls));
            (vec![train_clvq(&sampler, &full, &cfg.train_options(chain_seed(cfg.seed, 1)))?], true)
        }
        StartMode::PerPoint => {
            let chains = controls
                .into_iter()
                .enumerate()
                .map(|(i, y)| {
                    let sampler = ChainSampler::new(model, StartSpec::Fixed(y));
                    train_clvq(&sampler, &full, &cfg.train_options(chain_seed(cfg.seed, 2 + i as u64)))
                })
                .collect::<Result<_>>()?;
            (chains, false)
        }
    };
    Ok(Chains { main, control, pooled })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub control_seconds: f64,
    pub main_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub config_hash: String,
    pub seed: u64,
    #[serde(rename = "N")]
    pub horizon: usize,
    /// Cells per layer of the main chain.
    #[serde(rename = "K")]
    pub layer_sizes: Vec<usize>,
    pub v0: f64,
    pub tables: Vec<Vec<f64>>,
    pub actions: Vec<Vec<Action>>,
    pub restart: Vec<Vec<Option<usize>>>,
    pub max_excess_over_g: f64,
    pub controls: Vec<f64>,
    /// `control_values[k][i]`, as in [`ControlValues::values`].
    pub control_values: Vec<Vec<f64>>,
    pub timings: Timings,
}

pub struct Solved {
    pub control: ControlValues,
    pub main: MainSolution,
    pub report: SolveReport,
}

/// Solves at horizon `n` with the prefixes of `chains`.
pub fn solve(cfg: &RunConfig, model: &TransportModel, cost: &LinearCost, chains: &Chains, n: usize) -> Result<Solved> {
    let ops = Operators::new(model, cost).with_tol(cfg.model.quad_tol);
    let ch = chains.truncate(n)?;
    let t0 = Instant::now();
    let control = solve_control_values(&ops, ch.control_chains(), n, cfg.delta)?;
    let t1 = Instant::now();
    let main = solve_main(&ops, &ch.main, &control, n, cfg.delta)?;
    let t2 = Instant::now();
    let report = SolveReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        horizon: n,
        layer_sizes: ch.main.layer_sizes(),
        v0: main.v0,
        tables: main.tables.clone(),
        actions: main.actions.clone(),
        restart: main.restart.clone(),
        max_excess_over_g: main.max_excess_over_g,
        controls: cfg.model.controls.clone(),
        control_values: control.values.clone(),
        timings: Timings {
            control_seconds: (t1 - t0).as_secs_f64(),
            main_seconds: (t2 - t1).as_secs_f64(),
        },
    };
    Ok(Solved { control, main, report })
}

/// Theoretical bound on `||v_0(Z_0) - v^_0(Z^_0)||_p` at horizon `n`.
pub fn budget(cfg: &RunConfig, model: &TransportModel, cost: &LinearCost, chains: &Chains, n: usize) -> Result<ErrorBudget> {
    let ch = chains.truncate(n)?;
    let ledger = model.constants();
    let main_pol = layer_policies(&ch.main, &main_sqrt_constants(ledger), cfg.delta);
    let main = chain_stats(&ch.main, model, &main_pol);
    let csq = control_sqrt_constants(ledger);
    let control: Vec<_> = ch
        .control
        .iter()
        .map(|c| chain_stats(c, model, &layer_policies(c, &csq, cfg.delta)))
        .collect();
    let factor = if ch.pooled { (cfg.model.controls.len() as f64).powf(1.0 / cfg.p) } else { 1.0 };
    Ok(iterate_budget(&BudgetInputs {
        ledger,
        g: LipschitzEntry::constant(cost.g_constant()),
        horizon: n,
        p: cfg.p,
        control: &control,
        control_factor: factor,
        main: &main,
    }))
}

/// First line of every text output.
pub fn header(cfg: &RunConfig) -> String {
    format!("# config_hash={} seed={}\n", cfg.hash(), cfg.seed)
}

/// `y, v1, v0` over the control set; `v0` is the extended value when available.
pub fn values_csv(cfg: &RunConfig, control: &ControlValues) -> String {
    let mut out = header(cfg);
    out.push_str("y,v1,v0\n");
    let n = control.horizon;
    for (i, y) in cfg.model.controls.iter().enumerate() {
        let v1 = control.values.get(1).and_then(|r| r.get(i)).copied();
        let v1 = if n == 0 { Some(cfg.model.g.unwrap_or(cfg.model.ledger().c_f / cfg.model.alpha)) } else { v1 };
        let v0 = control.values[0].get(i);
        let cell = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        let _ = writeln!(out, "{y:.17e},{},{}", cell(v1), cell(v0.copied()));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    #[serde(rename = "N")]
    pub horizon: usize,
    #[serde(rename = "K")]
    pub size: usize,
    pub total: f64,
    pub floor_violations: usize,
    pub saturated: bool,
}

pub fn budget_csv(cfg: &RunConfig, rows: &[BudgetRow]) -> String {
    let mut out = header(cfg);
    out.push_str("N,K,total,floor_violations,saturated\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{:.6e},{},{}", r.horizon, r.size, r.total, r.floor_violations, r.saturated);
    }
    out
}

/// Points `(t, X(t))` of one trajectory: each segment contributes its start,
/// `per_segment` interior points and its left limit at the jump.
pub fn simulate_trajectory(
    model: &dyn PdmpModel,
    x0: &[f64],
    n_jumps: usize,
    per_segment: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(f64, Vec<f64>)> {
    let mut out = Vec::new();
    let (mut t, mut x) = (0.0, x0.to_vec());
    for _ in 0..n_jumps {
        let (s, _) = sample_first_jump(model, &x, rng);
        for i in 0..=per_segment + 1 {
            let h = s * i as f64 / (per_segment + 1) as f64;
            out.push((t + h, model.flow(&x, h)));
        }
        let pre = model.flow(&x, s);
        x = model.sample_kernel(&pre, rng);
        t += s;
    }
    out.push((t, x));
    out
}

pub fn trajectories_csv(cfg: &RunConfig, model: &dyn PdmpModel, n_paths: usize, n_jumps: usize) -> String {
    let mut out = header(cfg);
    out.push_str("path,t,x\n");
    for path in 0..n_paths {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(path as u64);
        for (t, x) in simulate_trajectory(model, &[cfg.x0], n_jumps, 20, &mut rng) {
            let _ = writeln!(out, "{path},{t:.17e},{:.17e}", x[0]);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// `v^_0 <= h_MC + 3 sigma + truncation + C_g E[e^{-alpha T_N}] + tol`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McCheck {
    pub v0: f64,
    pub h_mc: f64,
    pub h_std_error: f64,
    pub truncation: f64,
    pub discount_at_n: f64,
    pub rhs: f64,
    pub pass: bool,
}

pub fn mc_check(cfg: &RunConfig, model: &TransportModel, cost: &LinearCost, v0: f64, n: usize, tol: f64) -> Result<McCheck> {
    let x0 = [cfg.x0];
    let h = mc_no_impulse_cost(model, cost, &x0, cfg.mc_sims, cfg.mc_horizon, chain_seed(cfg.seed, 1 << 40))?;
    let d = mc_discount_at_jump(model, cfg.model.alpha, &x0, n, cfg.mc_sims, chain_seed(cfg.seed, 1 << 41))?;
    let rhs = h.estimate + 3.0 * h.std_error + h.truncation_bound + cost.g_constant() * d.estimate + tol;
    let g_max = cost.g_constant();
    Ok(McCheck {
        v0,
        h_mc: h.estimate,
        h_std_error: h.std_error,
        truncation: h.truncation_bound,
        discount_at_n: d.estimate,
        rhs,
        pass: (0.0..=g_max).contains(&v0) && v0 <= rhs,
    })
}

/// Solver against the enumeration oracle on random toy instances.
pub fn oracle_check(n_cases: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..n_cases {
        let inst = ToyInstance::random(&mut rng, 1 + case % 3, 4);
        let bf = brute_force_recursion(&inst)?;
        let (model, cost) = inst.transport_spec(1e-13).build();
        let ops = Operators::new(&model, &cost).with_tol(1e-13);
        let (main, control) = inst.chains();
        let mode = crate::solver::DeltaMode::Constant(inst.delta);
        let cv = solve_control_values(&ops, ControlChains::Pooled(&control), inst.horizon, mode)?;
        let v0 = solve_main(&ops, &main, &cv, inst.horizon, mode)?.v0;
        worst = worst.max((v0 - bf.v0).abs() / bf.v0.abs().max(1e-300));
    }
    Ok(Check {
        name: "solver_vs_enumeration".into(),
        pass: worst <= 1e-12,
        detail: format!("{n_cases} toy instances, worst relative difference {worst:.3e}"),
    })
}

/// `H 1 + I 1 + alpha * int e^{-alpha s - Lambda} = 1` at random states.
pub fn survival_check(model: &TransportModel, cost: &LinearCost, n_states: usize, seed: u64, tol: f64) -> Check {
    use rand::Rng;
    let ops = Operators::new(model, cost).with_tol(1e-12);
    let one = |_: &[f64]| 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let b = model.spec().boundary;
    for _ in 0..n_states {
        let x = [b * rng.gen::<f64>()];
        let ts = ops.tstar(&x);
        let lhs = ops.op_h(&one, &x, ts) + ops.op_i(&one, &x, ts) + ops.discounted_mass(&x);
        worst = worst.max((lhs - 1.0).abs());
    }
    Check {
        name: "survival_identity".into(),
        pass: worst <= tol,
        detail: format!("{n_states} states, worst deviation {worst:.3e}"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config_hash: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Model-level checks; with chains, also the Monte Carlo bound on `v^_0`.
pub fn validate(cfg: &RunConfig, chains: Option<&Chains>) -> Result<ValidationReport> {
    let (model, cost) = cfg.model.build();
    let mut checks = vec![oracle_check(20, cfg.seed)?, survival_check(&model, &cost, 200, cfg.seed, 1e-7)];
    let h = mc_no_impulse_cost(&model, &cost, &[cfg.x0], cfg.mc_sims, cfg.mc_horizon, chain_seed(cfg.seed, 1 << 40))?;
    let g = cost.g_constant();
    // g >= h is needed for the scheme to decrease; only a statistical check is possible.
    checks.push(Check {
        name: "g_dominates_no_impulse_cost".into(),
        pass: g + 3.0 * h.std_error + h.truncation_bound >= h.estimate,
        detail: format!("g = {g}, h_MC(x0) = {:.6} +- {:.2e}", h.estimate, h.std_error),
    });
    if let Some(ch) = chains {
        let n = cfg.horizon.min(ch.main.horizon());
        let v0 = solve(cfg, &model, &cost, ch, n)?.main.v0;
        let m = mc_check(cfg, &model, &cost, v0, n, 0.02)?;
        checks.push(Check {
            name: "monte_carlo_upper_bound".into(),
            pass: m.pass,
            detail: format!("N = {n}: v0 = {:.6} <= {:.6}", m.v0, m.rhs),
        });
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(ValidationReport { config_hash: cfg.hash(), seed: cfg.seed, checks, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub config_hash: String,
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub horizons: Vec<usize>,
    /// `v0[size][horizon]`.
    pub v0: Vec<Vec<f64>>,
    pub budget: Vec<BudgetRow>,
    pub files: Vec<PathBuf>,
}

/// Trains one chain pair per grid size at the longest horizon and writes,
/// for every `(K, N)`, the value curve CSV and the solve report, plus the
/// budget table and grid files.
pub fn run_benchmark(cfg: &RunConfig, out: &Path) -> Result<BenchmarkSummary> {
    let (model, cost) = cfg.model.build();
    let n_max = *cfg.sweep_horizons.last().ok_or_else(|| config("no sweep horizons"))?;
    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let mut v0 = Vec::new();
    let mut rows = Vec::new();
    for &k in &cfg.sweep_sizes {
        let chains = train_chains(cfg, &model, &vec![k; n_max])?;
        let grid_dir = out.join(format!("grids_K{k}"));
        chains.save(&grid_dir)?;
        files.push(grid_dir);
        let mut per_n = Vec::new();
        for &n in &cfg.sweep_horizons {
            let s = solve(cfg, &model, &cost, &chains, n)?;
            let csv = out.join(format!("values_K{k}_N{n}.csv"));
            fs::write(&csv, values_csv(cfg, &s.control))?;
            let json = out.join(format!("solve_K{k}_N{n}.json"));
            fs::write(&json, serde_json::to_string_pretty(&s.report)?)?;
            files.extend([csv, json]);
            per_n.push(s.main.v0);
            let b = budget(cfg, &model, &cost, &chains, n)?;
            rows.push(BudgetRow {
                horizon: n,
                size: k,
                total: b.total,
                floor_violations: b.floor_violations,
                saturated: b.saturated,
            });
        }
        v0.push(per_n);
    }
    rows.sort_by_key(|r| (r.horizon, r.size));
    let bcsv = out.join("budget.csv");
    fs::write(&bcsv, budget_csv(cfg, &rows))?;
    files.push(bcsv);
    let summary = BenchmarkSummary {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        sizes: cfg.sweep_sizes.clone(),
        horizons: cfg.sweep_horizons.clone(),
        v0,
        budget: rows,
        files,
    };
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}
