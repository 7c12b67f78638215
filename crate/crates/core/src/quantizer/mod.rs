//! Marginal quantization of the embedded chain `(Z_n, S_n)`.
//!
//! Each layer is quantized separately by competitive learning (CLVQ), then a
//! fresh batch of paths gives cell weights, layer-to-layer transition
//! probabilities and the L_p distortions of both components.

mod io;
mod project;

pub use io::{load_chain, save_chain, to_json, FORMAT_VERSION};
pub use project::{project, Projector};

use std::collections::HashMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::model::{sample_chain, ChainPath, PdmpModel};

/// Starting law of the chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum StartSpec {
    Fixed(Vec<f64>),
    /// `Z_0` uniform on the listed control points.
    UniformOverControls(Vec<Vec<f64>>),
}

/// Quantization grid of one layer, stored unscaled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerGrid {
    pub index: usize,
    pub dim: usize,
    /// Flattened `z` coordinates, `dim` per cell.
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    pub weights: Vec<f64>,
    /// Per-component divisor applied before distances are taken (`z` components, then `s`).
    pub scale: Vec<f64>,
}

impl LayerGrid {
    pub fn new(index: usize, dim: usize, z: Vec<f64>, s: Vec<f64>, weights: Vec<f64>, scale: Vec<f64>) -> Self {
        debug_assert_eq!(z.len(), s.len() * dim);
        debug_assert_eq!(s.len(), weights.len());
        debug_assert_eq!(scale.len(), dim + 1);
        LayerGrid { index, dim, z, s, weights, scale }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn point_z(&self, j: usize) -> &[f64] {
        &self.z[j * self.dim..(j + 1) * self.dim]
    }
}

/// Sparse row-stochastic matrix from the cells of layer `n` to those of `n + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub probs: Vec<f64>,
}

impl Transition {
    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.probs[a..b])
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let mut t = Transition { row_ptr: vec![0], cols: Vec::new(), probs: Vec::new() };
        for row in rows {
            for (j, &p) in row.iter().enumerate() {
                if p != 0.0 {
                    t.cols.push(j as u32);
                    t.probs.push(p);
                }
            }
            t.row_ptr.push(t.cols.len());
        }
        t
    }

    pub fn to_dense(&self, n_cols: usize) -> Vec<Vec<f64>> {
        (0..self.n_rows())
            .map(|i| {
                let mut row = vec![0.0; n_cols];
                let (c, p) = self.row(i);
                for (&j, &q) in c.iter().zip(p) {
                    row[j as usize] += q;
                }
                row
            })
            .collect()
    }
}

/// Quantized approximation of `(Z_n, S_n)` for `n = 0..=N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizedChain {
    pub p: f64,
    pub start: StartSpec,
    pub layers: Vec<LayerGrid>,
    pub transitions: Vec<Transition>,
    pub distortion_z: Vec<f64>,
    pub distortion_s: Vec<f64>,
    pub warnings: Vec<String>,
}

impl QuantizedChain {
    /// Horizon `N` (number of layers minus one).
    pub fn horizon(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(LayerGrid::len).collect()
    }

    pub fn is_pooled(&self) -> bool {
        matches!(self.start, StartSpec::UniformOverControls(_))
    }

    /// The first `n + 1` layers. Marginal grids do not depend on the horizon,
    /// so a long chain serves every shorter one.
    pub fn truncate(&self, n: usize) -> Result<QuantizedChain> {
        if n > self.horizon() {
            return Err(config(format!("cannot truncate a chain of horizon {} to {n}", self.horizon())));
        }
        Ok(QuantizedChain {
            p: self.p,
            start: self.start.clone(),
            layers: self.layers[..=n].to_vec(),
            transitions: self.transitions[..n].to_vec(),
            distortion_z: self.distortion_z[..=n].to_vec(),
            distortion_s: self.distortion_s[..=n].to_vec(),
            warnings: self.warnings.clone(),
        })
    }

    /// Checks the structural invariants; used after loading and in tests.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(config(m));
        if self.layers.is_empty() {
            return bad("chain has no layers".into());
        }
        if self.transitions.len() + 1 != self.layers.len()
            || self.distortion_z.len() != self.layers.len()
            || self.distortion_s.len() != self.layers.len()
        {
            return bad("layer, transition and distortion counts disagree".into());
        }
        for (n, layer) in self.layers.iter().enumerate() {
            if layer.is_empty() {
                return bad(format!("layer {n} is empty"));
            }
            let total: f64 = layer.weights.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return bad(format!("layer {n} weights sum to {total}"));
            }
            if layer.s.iter().any(|&s| !(s >= 0.0)) {
                return bad(format!("layer {n} has a negative time coordinate"));
            }
        }
        for (n, t) in self.transitions.iter().enumerate() {
            if t.n_rows() != self.layers[n].len() {
                return bad(format!("transition {n} has {} rows for {} cells", t.n_rows(), self.layers[n].len()));
            }
            let next = self.layers[n + 1].len() as u32;
            for i in 0..t.n_rows() {
                let (c, p) = t.row(i);
                if c.iter().any(|&j| j >= next) {
                    return bad(format!("transition {n} row {i} points past layer {}", n + 1));
                }
                let total: f64 = p.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("transition {n} row {i} sums to {total}"));
                }
            }
        }
        Ok(())
    }
}

/// Draws paths of the embedded chain from a start specification.
pub struct ChainSampler<'a> {
    pub model: &'a dyn PdmpModel,
    pub start: StartSpec,
}

impl<'a> ChainSampler<'a> {
    pub fn new(model: &'a dyn PdmpModel, start: StartSpec) -> Self {
        ChainSampler { model, start }
    }

    /// Path number `index`. A pooled start allocates the control points in
    /// turn, which keeps `Z_0` exactly uniform on the control set.
    pub fn sample(&self, index: u64, n_jumps: usize, rng: &mut dyn RngCore) -> ChainPath {
        let x0 = match &self.start {
            StartSpec::Fixed(x) => x.as_slice(),
            StartSpec::UniformOverControls(u) => u[(index % u.len() as u64) as usize].as_slice(),
        };
        sample_chain(self.model, x0, n_jumps, rng)
    }
}

/// Step size `a / (b + t)` of the competitive learning updates, with
/// `a = a_per_cell * K` and `b = b_per_cell * K` for a layer of `K` cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningRate {
    pub a_per_cell: f64,
    pub b_per_cell: f64,
}

impl Default for LearningRate {
    fn default() -> Self {
        LearningRate { a_per_cell: 1.0, b_per_cell: 100.0 }
    }
}

impl LearningRate {
    pub fn step(&self, k: usize, t: u64) -> f64 {
        let k = k as f64;
        (self.a_per_cell * k / (self.b_per_cell * k + t as f64)).min(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub p: f64,
    pub n_train: u64,
    pub n_est: u64,
    pub n_pilot: u64,
    pub lr: LearningRate,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { p: 2.0, n_train: 1_000_000, n_est: 1_000_000, n_pilot: 20_000, lr: LearningRate::default(), seed: 0 }
    }
}

const EST_CHUNK: u64 = 8192;
const STREAM_PILOT: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_EST: u64 = 1 << 20;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Trains grids of the requested sizes and estimates weights, transitions and distortions.
///
/// `layer_sizes[n]` is the size of layer `n`; entry 0 is ignored because the
/// first layer is known exactly (a single point or the control set).
pub fn train_clvq(sampler: &ChainSampler<'_>, layer_sizes: &[usize], opts: &TrainOptions) -> Result<QuantizedChain> {
    if layer_sizes.is_empty() {
        return Err(config("need at least one layer"));
    }
    if layer_sizes[1..].iter().any(|&k| k == 0) {
        return Err(config("layer sizes must be positive"));
    }
    if !(opts.p >= 1.0) {
        return Err(config("norm order p must be at least 1"));
    }
    let n_layers = layer_sizes.len();
    if opts.n_train < n_layers as u64 {
        return Err(config("n_train must be at least the number of layers"));
    }
    let dim = sampler.model.state_dim();
    let n_jumps = n_layers - 1;

    // Pilot batch: scales, degeneracy detection and i.i.d. initialization.
    let k_max = layer_sizes[1..].iter().copied().max().unwrap_or(1) as u64;
    let n_pilot = opts.n_pilot.max(k_max);
    let mut rng = stream_rng(opts.seed, STREAM_PILOT);
    let pilot: Vec<ChainPath> = (0..n_pilot).map(|i| sampler.sample(i, n_jumps, &mut rng)).collect();

    let mut layers = Vec::with_capacity(n_layers);
    let mut trainable = vec![false; n_layers];
    layers.push(first_layer(&sampler.start, dim));
    for n in 1..n_layers {
        let scale = pilot_scale(&pilot, n, dim);
        let first = (&pilot[0].z[n], pilot[0].s[n]);
        let degenerate = pilot.iter().all(|p| p.z[n] == *first.0 && p.s[n] == first.1);
        let k = if degenerate { 1 } else { layer_sizes[n] };
        let mut z = Vec::with_capacity(k * dim);
        let mut s = Vec::with_capacity(k);
        for path in pilot.iter().take(k) {
            z.extend_from_slice(&path.z[n]);
            s.push(path.s[n]);
        }
        trainable[n] = !degenerate;
        layers.push(LayerGrid::new(n, dim, z, s, vec![1.0 / k as f64; k], scale));
    }
    drop(pilot);

    let mut rng = stream_rng(opts.seed, STREAM_TRAIN);
    let mut projectors: Vec<Option<Projector>> =
        layers.iter().enumerate().map(|(n, l)| trainable[n].then(|| Projector::new(l, opts.p))).collect();
    for t in 0..opts.n_train {
        let path = sampler.sample(t, n_jumps, &mut rng);
        for n in 1..n_layers {
            let Some(proj) = projectors[n].as_mut() else { continue };
            let layer = &mut layers[n];
            let j = proj.nearest(layer, &path.z[n], path.s[n]);
            let gamma = opts.lr.step(layer.len(), t);
            for d in 0..dim {
                let c = &mut layer.z[j * dim + d];
                *c += gamma * (path.z[n][d] - *c);
            }
            layer.s[j] += gamma * (path.s[n] - layer.s[j]);
            proj.update(layer, j);
        }
    }

    estimate_transitions(sampler, layers, opts.p, opts.n_est, opts.seed)
}

fn first_layer(start: &StartSpec, dim: usize) -> LayerGrid {
    match start {
        StartSpec::Fixed(x) => LayerGrid::new(0, dim, x.clone(), vec![0.0], vec![1.0], vec![1.0; dim + 1]),
        StartSpec::UniformOverControls(u) => {
            let z: Vec<f64> = u.iter().flatten().copied().collect();
            let k = u.len();
            let mut scale = vec![1.0; dim + 1];
            for (d, sc) in scale.iter_mut().enumerate().take(dim) {
                *sc = std_or_one(u.iter().map(|y| y[d]));
            }
            LayerGrid::new(0, dim, z, vec![0.0; k], vec![1.0 / k as f64; k], scale)
        }
    }
}

fn std_or_one(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (mut n, mut sum, mut sq) = (0.0, 0.0, 0.0);
    for v in values {
        n += 1.0;
        sum += v;
        sq += v * v;
    }
    if n < 2.0 {
        return 1.0;
    }
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0);
    let sd = var.sqrt();
    if sd > 1e-12 {
        sd
    } else {
        1.0
    }
}

fn pilot_scale(pilot: &[ChainPath], n: usize, dim: usize) -> Vec<f64> {
    let mut scale: Vec<f64> = (0..dim).map(|d| std_or_one(pilot.iter().map(|p| p.z[n][d]))).collect();
    scale.push(std_or_one(pilot.iter().map(|p| p.s[n])));
    scale
}

#[derive(Default)]
struct Tally {
    cells: Vec<Vec<u64>>,
    pairs: Vec<HashMap<(u32, u32), u64>>,
    err_z: Vec<f64>,
    err_s: Vec<f64>,
}

/// Projects a fresh batch of `n_samples` paths onto fixed grids and turns the
/// counts into weights, transition rows and distortions. Cells that receive
/// no sample are dropped.
pub fn estimate_transitions(
    sampler: &ChainSampler<'_>,
    mut layers: Vec<LayerGrid>,
    p: f64,
    n_samples: u64,
    seed: u64,
) -> Result<QuantizedChain> {
    if layers.iter().any(LayerGrid::is_empty) {
        return Err(config("cannot estimate transitions on an empty grid"));
    }
    let n_layers = layers.len();
    let n_jumps = n_layers - 1;
    let mut warnings = Vec::new();
    if let StartSpec::UniformOverControls(u) = &sampler.start {
        if n_samples < u.len() as u64 {
            return Err(config("estimation batch smaller than the control set"));
        }
    }
    if n_samples < layers.iter().map(|l| l.len() as u64).max().unwrap_or(0) {
        warnings.push(format!("estimation batch of {n_samples} paths is smaller than the largest layer"));
    }
    let projectors: Vec<Projector> = layers.iter().map(|l| Projector::new(l, p)).collect();
    let n_chunks = n_samples.div_ceil(EST_CHUNK);
    let tallies: Vec<Tally> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, STREAM_EST + c);
            let mut tally = Tally {
                cells: layers.iter().map(|l| vec![0; l.len()]).collect(),
                pairs: vec![HashMap::new(); n_jumps],
                err_z: vec![0.0; n_layers],
                err_s: vec![0.0; n_layers],
            };
            let lo = c * EST_CHUNK;
            let hi = (lo + EST_CHUNK).min(n_samples);
            let mut idx = vec![0u32; n_layers];
            for i in lo..hi {
                let path = sampler.sample(i, n_jumps, &mut rng);
                for n in 0..n_layers {
                    let layer = &layers[n];
                    let j = projectors[n].nearest(layer, &path.z[n], path.s[n]);
                    idx[n] = j as u32;
                    tally.cells[n][j] += 1;
                    let dz: f64 =
                        path.z[n].iter().zip(layer.point_z(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    tally.err_z[n] += dz.powf(p);
                    tally.err_s[n] += (path.s[n] - layer.s[j]).abs().powf(p);
                }
                for n in 0..n_jumps {
                    *tally.pairs[n].entry((idx[n], idx[n + 1])).or_insert(0) += 1;
                }
            }
            tally
        })
        .collect();

    // In-order reduction keeps floating-point sums independent of scheduling.
    let mut cells: Vec<Vec<u64>> = layers.iter().map(|l| vec![0; l.len()]).collect();
    let mut pairs: Vec<HashMap<(u32, u32), u64>> = vec![HashMap::new(); n_jumps];
    let mut err_z = vec![0.0; n_layers];
    let mut err_s = vec![0.0; n_layers];
    for t in tallies {
        for n in 0..n_layers {
            for (a, b) in cells[n].iter_mut().zip(&t.cells[n]) {
                *a += b;
            }
            err_z[n] += t.err_z[n];
            err_s[n] += t.err_s[n];
        }
        for (acc, part) in pairs.iter_mut().zip(t.pairs) {
            for (k, v) in part {
                *acc.entry(k).or_insert(0) += v;
            }
        }
    }
    let total = n_samples as f64;
    let distortion_z: Vec<f64> = err_z.iter().map(|e| (e / total).powf(1.0 / p)).collect();
    let distortion_s: Vec<f64> = err_s.iter().map(|e| (e / total).powf(1.0 / p)).collect();

    // Drop dead cells; the first layer is exact and always kept.
    let mut remap: Vec<Vec<Option<u32>>> = Vec::with_capacity(n_layers);
    for (n, layer) in layers.iter_mut().enumerate() {
        let keep: Vec<bool> = if n == 0 { vec![true; layer.len()] } else { cells[n].iter().map(|&c| c > 0).collect() };
        let dropped = keep.iter().filter(|k| !**k).count();
        if dropped > 0 {
            warnings.push(format!("layer {n}: dropped {dropped} empty cells"));
        }
        let mut map = vec![None; layer.len()];
        let mut next = 0u32;
        let (mut z, mut s, mut w) = (Vec::new(), Vec::new(), Vec::new());
        for j in 0..layer.len() {
            if keep[j] {
                map[j] = Some(next);
                next += 1;
                z.extend_from_slice(layer.point_z(j));
                s.push(layer.s[j]);
                w.push(cells[n][j] as f64 / total);
            }
        }
        if n == 0 {
            // Known law: a point mass or the uniform law on the controls.
            let k = w.len();
            w = vec![1.0 / k as f64; k];
        }
        normalize(&mut w);
        layer.z = z;
        layer.s = s;
        layer.weights = w;
        remap.push(map);
    }

    let mut transitions = Vec::with_capacity(n_jumps);
    for n in 0..n_jumps {
        let rows = layers[n].len();
        let mut entries: Vec<((u32, u32), u64)> = pairs[n]
            .iter()
            .filter_map(|(&(i, j), &c)| Some(((remap[n][i as usize]?, remap[n + 1][j as usize]?), c)))
            .collect();
        entries.sort_unstable();
        let mut t = Transition { row_ptr: vec![0; rows + 1], cols: Vec::new(), probs: Vec::new() };
        let mut cursor = 0;
        for i in 0..rows as u32 {
            let start = t.cols.len();
            let mut row_total = 0u64;
            while cursor < entries.len() && entries[cursor].0 .0 == i {
                let ((_, j), c) = entries[cursor];
                t.cols.push(j);
                t.probs.push(c as f64);
                row_total += c;
                cursor += 1;
            }
            if row_total == 0 {
                warnings.push(format!("layer {n}: cell {i} has no observed successor, using a uniform row"));
                let next = layers[n + 1].len();
                t.cols.extend(0..next as u32);
                t.probs.extend(std::iter::repeat(1.0).take(next));
            }
            normalize(&mut t.probs[start..]);
            t.row_ptr[i as usize + 1] = t.cols.len();
        }
        transitions.push(t);
    }

    let chain = QuantizedChain { p, start: sampler.start.clone(), layers, transitions, distortion_z, distortion_s, warnings };
    chain.check()?;
    Ok(chain)
}

/// Scales to unit sum, then folds the rounding residue into the largest entry
/// so the sum is 1 to within one ulp.
fn normalize(w: &mut [f64]) {
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return;
    }
    for x in w.iter_mut() {
        *x /= total;
    }
    let resid = 1.0 - w.iter().sum::<f64>();
    if let Some(m) = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b]).then(b.cmp(&a))) {
        w[m] += resid;
    }
}

/// Empirical L_p distance between fresh samples and their projections, with
/// the per-sample values so a caller can attach a standard error.
pub fn validation_distortion(
    sampler: &ChainSampler<'_>,
    chain: &QuantizedChain,
    n_samples: u64,
    seed: u64,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n_jumps = chain.horizon();
    let projectors: Vec<Projector> = chain.layers.iter().map(|l| Projector::new(l, chain.p)).collect();
    let mut rng = stream_rng(seed, 0);
    let mut out: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); n_jumps + 1];
    for i in 0..n_samples {
        let path = sampler.sample(i, n_jumps, &mut rng);
        for (n, layer) in chain.layers.iter().enumerate() {
            let j = projectors[n].nearest(layer, &path.z[n], path.s[n]);
            let dz: f64 = path.z[n].iter().zip(layer.point_z(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            out[n].0.push(dz.powf(chain.p));
            out[n].1.push((path.s[n] - layer.s[j]).abs().powf(chain.p));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{benchmark_model, KernelSpec, RateSpec, TransportSpec};

    fn small_opts(seed: u64) -> TrainOptions {
        TrainOptions { n_train: 20_000, n_est: 20_000, n_pilot: 2_000, seed, ..TrainOptions::default() }
    }

    #[test]
    fn deterministic_chain_has_zero_distortion() {
        let spec = TransportSpec {
            rate: RateSpec::Constant(0.0),
            kernel: KernelSpec::Dirac(0.25),
            ..TransportSpec::benchmark()
        };
        let (m, _) = spec.build();
        let sampler = ChainSampler::new(&m, StartSpec::Fixed(vec![0.0]));
        let chain = train_clvq(&sampler, &[1, 5, 5, 5], &small_opts(3)).unwrap();
        assert_eq!(chain.layer_sizes(), vec![1, 1, 1, 1]);
        for n in 0..4 {
            assert_eq!(chain.distortion_z[n], 0.0);
            assert_eq!(chain.distortion_s[n], 0.0);
        }
        for t in &chain.transitions {
            assert_eq!(t.to_dense(1), vec![vec![1.0]]);
        }
    }

    #[test]
    fn single_cell_layer_has_unit_weight() {
        let (m, _) = benchmark_model();
        let sampler = ChainSampler::new(&m, StartSpec::Fixed(vec![0.0]));
        let chain = train_clvq(&sampler, &[1, 1, 4], &small_opts(4)).unwrap();
        assert_eq!(chain.layers[1].weights, vec![1.0]);
        assert_eq!(chain.layers[0].z, vec![0.0]);
        assert_eq!(chain.layers[0].s, vec![0.0]);
    }

    #[test]
    fn pooled_first_layer_is_control_set() {
        let (m, c) = benchmark_model();
        use crate::model::CostModel;
        let sampler = ChainSampler::new(&m, StartSpec::UniformOverControls(c.control_set().to_vec()));
        let chain = train_clvq(&sampler, &[0, 20, 20], &small_opts(5)).unwrap();
        assert_eq!(chain.layers[0].len(), 50);
        assert_eq!(chain.layers[0].z[7], 7.0 / 50.0);
        assert!(chain.layers[0].weights.iter().all(|&w| (w - 0.02).abs() < 1e-15));
        assert_eq!(chain.distortion_z[0], 0.0);
    }

    #[test]
    fn successors_lie_in_kernel_support() {
        let (m, _) = benchmark_model();
        let sampler = ChainSampler::new(&m, StartSpec::Fixed(vec![0.0]));
        let chain = train_clvq(&sampler, &[1, 30, 30, 30], &small_opts(6)).unwrap();
        for layer in &chain.layers[1..] {
            assert!(layer.z.iter().all(|&z| (0.0..=0.5).contains(&z)));
        }
        chain.check().unwrap();
    }

    #[test]
    fn truncate_keeps_prefix() {
        let (m, _) = benchmark_model();
        let sampler = ChainSampler::new(&m, StartSpec::Fixed(vec![0.0]));
        let chain = train_clvq(&sampler, &[1, 10, 10, 10], &small_opts(7)).unwrap();
        let short = chain.truncate(1).unwrap();
        assert_eq!(short.horizon(), 1);
        assert_eq!(short.layers[1], chain.layers[1]);
        assert!(chain.truncate(4).is_err());
    }

    #[test]
    fn normalize_sums_to_one() {
        let mut w = vec![1.0, 3.0, 7.0, 11.0, 13.0];
        normalize(&mut w);
        assert!((w.iter().sum::<f64>() - 1.0).abs() <= f64::EPSILON);
    }
}
