use super::LayerGrid;
use crate::error::{config, Result};

/// Scaled `p`-th power distance between a query and cell `j`.
#[inline]
pub(crate) fn distance_p(layer: &LayerGrid, j: usize, z: &[f64], s: f64, p: f64) -> f64 {
    let dim = layer.dim;
    let mut acc = 0.0;
    if p == 2.0 {
        for d in 0..dim {
            let e = (z[d] - layer.z[j * dim + d]) / layer.scale[d];
            acc += e * e;
        }
        let e = (s - layer.s[j]) / layer.scale[dim];
        acc + e * e
    } else {
        for d in 0..dim {
            acc += ((z[d] - layer.z[j * dim + d]) / layer.scale[d]).abs().powf(p);
        }
        acc + ((s - layer.s[j]) / layer.scale[dim]).abs().powf(p)
    }
}

/// Nearest cell of `grid` to `(z, s)`; ties go to the smallest index.
pub fn project(z: &[f64], s: f64, grid: &LayerGrid, p: f64) -> Result<usize> {
    if grid.is_empty() {
        return Err(config("projection onto an empty grid"));
    }
    let mut best = (f64::INFINITY, 0);
    for j in 0..grid.len() {
        let d = distance_p(grid, j, z, s, p);
        if d < best.0 {
            best = (d, j);
        }
    }
    Ok(best.1)
}

/// Exact nearest-neighbour index over one layer.
///
/// Cells are kept sorted along their first scaled coordinate; a query scans
/// outward from its own position and stops once the coordinate gap alone
/// exceeds the best distance found. Answers coincide with [`project`].
#[derive(Clone, Debug)]
pub struct Projector {
    p: f64,
    keys: Vec<f64>,
    ids: Vec<u32>,
    pos: Vec<u32>,
}

impl Projector {
    pub fn new(layer: &LayerGrid, p: f64) -> Self {
        let mut order: Vec<u32> = (0..layer.len() as u32).collect();
        let key = |j: usize| layer.z[j * layer.dim] / layer.scale[0];
        order.sort_by(|&a, &b| key(a as usize).total_cmp(&key(b as usize)).then(a.cmp(&b)));
        let keys = order.iter().map(|&j| key(j as usize)).collect();
        let mut pos = vec![0; layer.len()];
        for (i, &j) in order.iter().enumerate() {
            pos[j as usize] = i as u32;
        }
        Projector { p, keys, ids: order, pos }
    }

    /// Restores the ordering after cell `j` of `layer` moved.
    pub fn update(&mut self, layer: &LayerGrid, j: usize) {
        let key = layer.z[j * layer.dim] / layer.scale[0];
        let mut i = self.pos[j] as usize;
        self.keys[i] = key;
        while i > 0 && self.keys[i - 1] > key {
            self.swap(i - 1, i);
            i -= 1;
        }
        while i + 1 < self.keys.len() && self.keys[i + 1] < key {
            self.swap(i, i + 1);
            i += 1;
        }
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.keys.swap(a, b);
        self.ids.swap(a, b);
        self.pos[self.ids[a] as usize] = a as u32;
        self.pos[self.ids[b] as usize] = b as u32;
    }

    pub fn nearest(&self, layer: &LayerGrid, z: &[f64], s: f64) -> usize {
        let q = z[0] / layer.scale[0];
        let start = self.keys.partition_point(|&k| k < q);
        let mut best_d = f64::INFINITY;
        let mut best_j = usize::MAX;
        let consider = |i: usize, best_d: &mut f64, best_j: &mut usize| -> bool {
            let gap = (self.keys[i] - q).abs();
            let gap_p = if self.p == 2.0 { gap * gap } else { gap.powf(self.p) };
            // The slack absorbs rounding between scaled keys and scaled differences.
            if gap_p > *best_d * (1.0 + 1e-9) + 1e-300 {
                return false;
            }
            let j = self.ids[i] as usize;
            let d = distance_p(layer, j, z, s, self.p);
            if d < *best_d || (d == *best_d && j < *best_j) {
                *best_d = d;
                *best_j = j;
            }
            true
        };
        for i in start..self.keys.len() {
            if !consider(i, &mut best_d, &mut best_j) {
                break;
            }
        }
        for i in (0..start).rev() {
            if !consider(i, &mut best_d, &mut best_j) {
                break;
            }
        }
        best_j
    }
}
