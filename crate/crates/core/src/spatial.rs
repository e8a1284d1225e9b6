//! Grid bucketing shared by the covering, separation and regularity code.

use std::collections::HashMap;

/// Key of an axis-aligned grid cell. Indices are packed into a `u128` when the
/// occupied index range allows it, otherwise kept as a boxed slice.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum CellKey {
    Packed(u128),
    Wide(Box<[i64]>),
}

#[derive(Clone, Debug)]
pub(crate) struct CellKeyer {
    dim: usize,
    rho: f64,
    base: Vec<i64>,
    bits: u32,
    packed: bool,
}

#[inline]
pub(crate) fn cell_index(x: f64, rho: f64) -> i64 {
    (x / rho).floor() as i64
}

impl CellKeyer {
    /// Keyer for the `rho`-grid anchored at the origin, sized to the given
    /// coordinates plus one cell of slack in every direction.
    pub fn new(coords: &[f64], dim: usize, rho: f64) -> Self {
        let mut lo = vec![i64::MAX; dim];
        let mut hi = vec![i64::MIN; dim];
        for x in coords.chunks_exact(dim) {
            for j in 0..dim {
                let c = cell_index(x[j], rho);
                lo[j] = lo[j].min(c);
                hi[j] = hi[j].max(c);
            }
        }
        if coords.is_empty() {
            lo.fill(0);
            hi.fill(0);
        }
        let bits = (128 / dim as u32).min(63);
        let packed = lo
            .iter()
            .zip(&hi)
            .all(|(l, h)| ((h - l) as u128 + 3) < (1u128 << bits));
        CellKeyer {
            dim,
            rho,
            base: lo.iter().map(|l| l - 1).collect(),
            bits,
            packed,
        }
    }

    pub fn index_into(&self, x: &[f64], out: &mut [i64]) {
        for j in 0..self.dim {
            out[j] = cell_index(x[j], self.rho);
        }
    }

    /// Key of a cell index vector lying within one cell of the sized range.
    pub fn key(&self, idx: &[i64]) -> CellKey {
        if self.packed {
            let mut k: u128 = 0;
            for j in 0..self.dim {
                k = (k << self.bits) | (idx[j] - self.base[j]) as u128;
            }
            CellKey::Packed(k)
        } else {
            CellKey::Wide(idx.into())
        }
    }

    pub fn key_of(&self, x: &[f64]) -> CellKey {
        let mut idx = vec![0i64; self.dim];
        self.index_into(x, &mut idx);
        self.key(&idx)
    }
}

/// Elements grouped by occupied grid cell, cells in key order.
pub(crate) struct CellGroups {
    /// element indices, grouped by cell
    pub order: Vec<usize>,
    /// `cell_starts[c]..cell_starts[c + 1]` indexes `order`
    pub cell_starts: Vec<usize>,
    /// flat `dim`-stride index vector of each cell
    pub cell_index: Vec<i64>,
}

impl CellGroups {
    pub fn build(coords: &[f64], dim: usize, rho: f64) -> Self {
        let keyer = CellKeyer::new(coords, dim, rho);
        let n = coords.len() / dim;
        let mut keyed: Vec<(CellKey, usize)> = coords
            .chunks_exact(dim)
            .enumerate()
            .map(|(i, x)| (keyer.key_of(x), i))
            .collect();
        keyed.sort_unstable();
        let mut order = Vec::with_capacity(n);
        let mut cell_starts = Vec::new();
        let mut cell_index = Vec::new();
        let mut idx = vec![0i64; dim];
        for (pos, (key, i)) in keyed.iter().enumerate() {
            if pos == 0 || *key != keyed[pos - 1].0 {
                cell_starts.push(pos);
                keyer.index_into(&coords[i * dim..(i + 1) * dim], &mut idx);
                cell_index.extend_from_slice(&idx);
            }
            order.push(*i);
        }
        cell_starts.push(n);
        CellGroups {
            order,
            cell_starts,
            cell_index,
        }
    }

    pub fn cell_count(&self) -> usize {
        self.cell_starts.len() - 1
    }
}

/// Number of distinct occupied cells of the origin-anchored `rho`-grid.
pub(crate) fn occupied_cells(coords: &[f64], dim: usize, rho: f64) -> usize {
    if coords.is_empty() {
        return 0;
    }
    let keyer = CellKeyer::new(coords, dim, rho);
    let mut keys: Vec<CellKey> = coords.chunks_exact(dim).map(|x| keyer.key_of(x)).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Minimum of `metric(i, j)` over pairs, where `embed` maps elements into
/// `R^D` with `metric(i, j) >= |embed_i - embed_j|`. Pairs closer than the
/// grid pitch always land in adjacent cells, so the pitch is grown until the
/// best pair found is within it.
pub(crate) fn min_pair_distance<F>(embed: &[f64], dim: usize, start_pitch: f64, metric: F) -> f64
where
    F: Fn(usize, usize) -> f64,
{
    let n = embed.len() / dim;
    if n < 2 {
        return f64::INFINITY;
    }
    if n <= 2000 {
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                best = best.min(metric(i, j));
            }
        }
        return best;
    }
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for x in embed.chunks_exact(dim) {
        for j in 0..dim {
            lo[j] = lo[j].min(x[j]);
            hi[j] = hi[j].max(x[j]);
        }
    }
    let diag = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| (h - l) * (h - l))
        .sum::<f64>()
        .sqrt();
    let mut pitch = start_pitch.max(f64::MIN_POSITIVE);
    loop {
        let keyer = CellKeyer::new(embed, dim, pitch);
        let mut buckets: HashMap<CellKey, Vec<usize>> = HashMap::new();
        for (i, x) in embed.chunks_exact(dim).enumerate() {
            buckets.entry(keyer.key_of(x)).or_default().push(i);
        }
        let mut best = f64::INFINITY;
        let mut idx = vec![0i64; dim];
        let mut nb = vec![0i64; dim];
        let offsets = 3usize.pow(dim as u32);
        for (i, x) in embed.chunks_exact(dim).enumerate() {
            keyer.index_into(x, &mut idx);
            for code in 0..offsets {
                let mut c = code;
                for j in 0..dim {
                    nb[j] = idx[j] + (c % 3) as i64 - 1;
                    c /= 3;
                }
                if let Some(list) = buckets.get(&keyer.key(&nb)) {
                    for &j in list {
                        if j > i {
                            best = best.min(metric(i, j));
                        }
                    }
                }
            }
        }
        if best <= pitch || pitch >= diag {
            return best;
        }
        pitch *= 4.0;
    }
}
