//! Covering numbers, separation, and `(δ, s, C)` regularity constants.
//!
//! Covering numbers are counted as occupied cells of the origin-anchored grid
//! of the requested pitch. Point families live in their ambient coordinates;
//! hyperplane families are measured in code coordinates `(a_d, a_1, …, a_{d-1})`
//! with the maximum metric unless [`BallMetric::Affine`] is requested.
//!
//! Test balls are centred at family members only and use dyadic radii
//! `δ, 2δ, 4δ, …, 1`. Any ball meeting the family sits inside a ball of twice
//! the radius centred at a member, so the reported constant may undershoot the
//! true supremum by at most a factor `2^s`; the reports do not correct for it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::family::{Family, FamilyKind};
use crate::geometry::{self, code_embed};
use crate::spatial::{self, cell_index, CellGroups};
use crate::{Error, Result};

/// Metric used for regularity balls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallMetric {
    /// Euclidean balls on point coordinates.
    Euclidean,
    /// Maximum-metric balls (cubes) on hyperplane code coordinates.
    CodeMax,
    /// Exact affine-metric balls on hyperplanes; quadratic cost.
    Affine,
}

impl BallMetric {
    pub fn default_for(kind: FamilyKind) -> Self {
        match kind {
            FamilyKind::Points => BallMetric::Euclidean,
            FamilyKind::Hyperplanes => BallMetric::CodeMax,
        }
    }

    fn check(self, kind: FamilyKind) -> Result<()> {
        match (self, kind) {
            (BallMetric::Euclidean, FamilyKind::Points) => Ok(()),
            (BallMetric::CodeMax | BallMetric::Affine, FamilyKind::Hyperplanes) => Ok(()),
            _ => Err(Error::KindMismatch(format!(
                "metric {self:?} does not apply to a {kind} family"
            ))),
        }
    }
}

/// Coordinates in which covering numbers are taken: ambient for points,
/// code coordinates for hyperplanes.
fn covering_coords(family: &Family) -> Vec<f64> {
    match family.kind() {
        FamilyKind::Points => family.as_flat().to_vec(),
        FamilyKind::Hyperplanes => {
            let mut out = Vec::with_capacity(family.as_flat().len());
            for c in family.iter() {
                code_embed(c, &mut out);
            }
            out
        }
    }
}

/// Occupied cells of the `rho`-grid; 0 for an empty family.
pub fn covering_number(family: &Family, rho: f64) -> Result<usize> {
    if !(rho > 0.0) {
        return Err(Error::invalid(format!(
            "covering pitch must be positive, got {rho}"
        )));
    }
    Ok(spatial::occupied_cells(
        &covering_coords(family),
        family.dim(),
        rho,
    ))
}

/// Minimum pairwise distance: Euclidean for points, `d_A` for hyperplanes.
/// `+∞` for fewer than two elements.
pub fn min_separation(family: &Family) -> f64 {
    let d = family.dim();
    match family.kind() {
        FamilyKind::Points => {
            let data = family.as_flat();
            spatial::min_pair_distance(data, d, family.delta(), |i, j| {
                let (a, b) = (family.element(i), family.element(j));
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
        }
        FamilyKind::Hyperplanes => {
            // (unit normal, normalised intercept) in R^{d+1}; d_A dominates
            // the Euclidean distance of this embedding
            let mut embed = Vec::with_capacity(family.len() * (d + 1));
            for c in family.iter() {
                let (n, h) = geometry::normalized(c);
                embed.extend_from_slice(&n);
                embed.push(h);
            }
            let e = &embed;
            spatial::min_pair_distance(e, d + 1, family.delta(), |i, j| {
                let (a, b) = (
                    &e[i * (d + 1)..(i + 1) * (d + 1)],
                    &e[j * (d + 1)..(j + 1) * (d + 1)],
                );
                let normal_gap = a[..d]
                    .iter()
                    .zip(&b[..d])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                normal_gap + (a[d] - b[d]).abs()
            })
        }
    }
}

/// Dyadic radii `δ, 2δ, …` up to 1, with 1 appended when not hit exactly.
pub fn dyadic_scales(delta: f64) -> Vec<f64> {
    let mut scales = Vec::new();
    let mut r = delta;
    while r <= 1.0 {
        scales.push(r);
        r *= 2.0;
    }
    if scales.last().is_some_and(|&last| last < 1.0) {
        scales.push(1.0);
    }
    scales
}

/// Largest `|E ∩ B(x, r)|_δ` over member centres `x`, at one radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleMax {
    pub r: f64,
    pub max_count: usize,
    pub center: usize,
}

/// Scale-by-scale maxima of ball covering counts. Independent of the exponent,
/// so one profile serves every regularity query on the family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallProfile {
    pub metric: BallMetric,
    pub delta: f64,
    /// `|E|_δ`
    pub covering: usize,
    pub scales: Vec<ScaleMax>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `C r^s |E|_δ`
    Regularity,
    /// `C (r/δ)^s`
    KatzTao,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRatio {
    pub r: f64,
    pub count: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub metric: BallMetric,
    pub normalization: Normalization,
    pub s: f64,
    pub c_star: f64,
    pub worst_scale: f64,
    pub worst_center: usize,
    pub covering: usize,
    pub per_scale: Vec<ScaleRatio>,
}

impl BallProfile {
    pub fn report(&self, s: f64, normalization: Normalization) -> RegularityReport {
        let per_scale: Vec<ScaleRatio> = self
            .scales
            .iter()
            .map(|m| {
                let denom = match normalization {
                    Normalization::Regularity => m.r.powf(s) * self.covering as f64,
                    Normalization::KatzTao => (m.r / self.delta).powf(s),
                };
                ScaleRatio {
                    r: m.r,
                    count: m.max_count,
                    ratio: m.max_count as f64 / denom,
                }
            })
            .collect();
        let (worst, c_star) =
            per_scale
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, sr)| {
                    if sr.ratio > bv {
                        (i, sr.ratio)
                    } else {
                        (bi, bv)
                    }
                });
        RegularityReport {
            metric: self.metric,
            normalization,
            s,
            c_star,
            worst_scale: self.scales[worst].r,
            worst_center: self.scales[worst].center,
            covering: self.covering,
            per_scale,
        }
    }

    pub fn c_star(&self, s: f64) -> f64 {
        self.report(s, Normalization::Regularity).c_star
    }

    /// Largest `s ∈ [0, d]` with `c_star(s) <= c_max`, by bisection to 1e-3.
    pub fn best_dimension(&self, dim: usize, c_max: f64) -> Result<f64> {
        if !(c_max >= 1.0) {
            return Err(Error::invalid(format!("c_max must be >= 1, got {c_max}")));
        }
        let top = dim as f64;
        if self.c_star(0.0) > c_max {
            return Ok(0.0);
        }
        if self.c_star(top) <= c_max {
            return Ok(top);
        }
        let (mut lo, mut hi) = (0.0, top);
        while hi - lo > 1e-3 {
            let mid = 0.5 * (lo + hi);
            if self.c_star(mid) <= c_max {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

pub fn ball_profile(family: &Family, metric: BallMetric) -> Result<BallProfile> {
    metric.check(family.kind())?;
    if family.is_empty() {
        return Err(Error::invalid("regularity of an empty family"));
    }
    let d = family.dim();
    let delta = family.delta();
    let coords = covering_coords(family);
    let groups = CellGroups::build(&coords, d, delta);
    let covering = groups.cell_count();
    let radii = dyadic_scales(delta);
    let scales = match metric {
        BallMetric::Euclidean | BallMetric::CodeMax => {
            let norm = if metric == BallMetric::Euclidean {
                Norm::Euclidean
            } else {
                Norm::Max
            };
            let store = CellStore::build(&coords, d, &groups);
            let dense = DenseCells::build(&groups, d, delta);
            let tree = match dense {
                Some(_) => None,
                None => Some(CellTree::build(&store)),
            };
            let exact = |x: &[f64], r: f64| match (&dense, &tree) {
                (Some(table), _) => table.count(&store, x, r, norm, false),
                (None, Some(tree)) => tree.count(&store, x, r, norm),
                (None, None) => unreachable!(),
            };
            let rows = |x: &[f64], r: f64| {
                dense
                    .as_ref()
                    .map_or(usize::MAX, |table| table.count(&store, x, r, norm, true))
            };
            let refine: Option<&(dyn Fn(&[f64], f64) -> usize + Sync)> =
                dense.as_ref().map(|_| &rows as _);
            radii
                .par_iter()
                .map(|&r| max_ball_count(&coords, d, r, covering, &exact, refine, dense.as_ref()))
                .collect()
        }
        BallMetric::Affine => affine_profile(family, &groups, &radii),
    };
    Ok(BallProfile {
        metric,
        delta,
        covering,
        scales,
    })
}

fn check_exponent(family: &Family, s: f64) -> Result<()> {
    if !(0.0..=family.dim() as f64).contains(&s) {
        return Err(Error::invalid(format!(
            "exponent s = {s} outside [0, {}]",
            family.dim()
        )));
    }
    Ok(())
}

/// `max |E ∩ B|_δ / (r^s |E|_δ)` over member-centred balls at dyadic radii,
/// in the default metric for the family kind.
pub fn regularity_constant(family: &Family, s: f64) -> Result<RegularityReport> {
    regularity_constant_with(family, s, BallMetric::default_for(family.kind()))
}

pub fn regularity_constant_with(
    family: &Family,
    s: f64,
    metric: BallMetric,
) -> Result<RegularityReport> {
    check_exponent(family, s)?;
    Ok(ball_profile(family, metric)?.report(s, Normalization::Regularity))
}

/// As [`regularity_constant`] with denominator `(r/δ)^s`.
pub fn katz_tao_constant(family: &Family, s: f64) -> Result<RegularityReport> {
    check_exponent(family, s)?;
    Ok(
        ball_profile(family, BallMetric::default_for(family.kind()))?
            .report(s, Normalization::KatzTao),
    )
}

pub fn best_dimension(family: &Family, c_max: f64) -> Result<f64> {
    ball_profile(family, BallMetric::default_for(family.kind()))?
        .best_dimension(family.dim(), c_max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Norm {
    Euclidean,
    Max,
}

const LEAF_CELLS: usize = 8;

/// Members grouped by occupied cell, with the bounding box of each cell's
/// members. Box tests agree exactly with the per-member test because rounded
/// subtraction, squaring and summation are monotone.
struct CellStore {
    dim: usize,
    coords: Vec<f64>,
    cell_range: Vec<(u32, u32)>,
    /// per cell: lo then hi corner
    cell_box: Vec<f64>,
}

impl CellStore {
    fn build(coords: &[f64], dim: usize, groups: &CellGroups) -> Self {
        let cells = groups.cell_count();
        let mut grouped = Vec::with_capacity(coords.len());
        let mut cell_range = Vec::with_capacity(cells);
        let mut cell_box = Vec::with_capacity(2 * dim * cells);
        for c in 0..cells {
            let start = grouped.len() / dim;
            let mut lo = vec![f64::INFINITY; dim];
            let mut hi = vec![f64::NEG_INFINITY; dim];
            for &e in &groups.order[groups.cell_starts[c]..groups.cell_starts[c + 1]] {
                let x = &coords[e * dim..(e + 1) * dim];
                for j in 0..dim {
                    lo[j] = lo[j].min(x[j]);
                    hi[j] = hi[j].max(x[j]);
                }
                grouped.extend_from_slice(x);
            }
            cell_range.push((start as u32, (grouped.len() / dim) as u32));
            cell_box.extend_from_slice(&lo);
            cell_box.extend_from_slice(&hi);
        }
        CellStore {
            dim,
            coords: grouped,
            cell_range,
            cell_box,
        }
    }

    fn cell_box(&self, c: usize) -> &[f64] {
        &self.cell_box[2 * self.dim * c..2 * self.dim * (c + 1)]
    }

    /// Whether cell `c` holds a member within `bound` (squared for Euclidean).
    #[inline]
    fn hits(&self, c: usize, x: &[f64], bound: f64, norm: Norm) -> bool {
        let dim = self.dim;
        let (near, far) = box_extent(x, self.cell_box(c), dim, norm);
        if near > bound {
            return false;
        }
        if far <= bound {
            return true;
        }
        let (s, e) = self.cell_range[c];
        (s as usize..e as usize)
            .any(|k| point_extent(x, &self.coords[k * dim..(k + 1) * dim], norm) <= bound)
    }
}

#[inline]
fn norm_bound(r: f64, norm: Norm) -> f64 {
    match norm {
        Norm::Euclidean => r * r,
        Norm::Max => r,
    }
}

/// k-d tree over occupied cells, used when the dense table would be too large.
struct CellTree {
    perm: Vec<u32>,
    nodes: Vec<Node>,
    node_box: Vec<f64>,
}

struct Node {
    cells: (u32, u32),
    children: Option<(u32, u32)>,
}

impl CellTree {
    fn build(store: &CellStore) -> Self {
        let mut perm: Vec<u32> = (0..store.cell_range.len() as u32).collect();
        let mut nodes = Vec::new();
        let mut node_box = Vec::new();
        if !perm.is_empty() {
            build_node(
                &mut perm,
                0,
                &store.cell_box,
                store.dim,
                &mut nodes,
                &mut node_box,
            );
        }
        CellTree {
            perm,
            nodes,
            node_box,
        }
    }

    /// Number of cells holding a member within closed distance `r` of `x`.
    fn count(&self, store: &CellStore, x: &[f64], r: f64, norm: Norm) -> usize {
        let dim = store.dim;
        let bound = norm_bound(r, norm);
        let mut total = 0usize;
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            let bx = &self.node_box[2 * dim * id as usize..2 * dim * (id as usize + 1)];
            let (near, far) = box_extent(x, bx, dim, norm);
            if near > bound {
                continue;
            }
            if far <= bound {
                total += (node.cells.1 - node.cells.0) as usize;
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => {
                    total += self.perm[node.cells.0 as usize..node.cells.1 as usize]
                        .iter()
                        .filter(|&&c| store.hits(c as usize, x, bound, norm))
                        .count();
                }
            }
        }
        total
    }
}

fn build_node(
    perm: &mut [u32],
    offset: usize,
    boxes: &[f64],
    dim: usize,
    nodes: &mut Vec<Node>,
    node_box: &mut Vec<f64>,
) -> u32 {
    let mut bx = vec![f64::INFINITY; 2 * dim];
    bx[dim..].fill(f64::NEG_INFINITY);
    for &c in perm.iter() {
        let cb = &boxes[2 * dim * c as usize..2 * dim * (c as usize + 1)];
        for j in 0..dim {
            bx[j] = bx[j].min(cb[j]);
            bx[dim + j] = bx[dim + j].max(cb[dim + j]);
        }
    }
    let id = nodes.len() as u32;
    nodes.push(Node {
        cells: (offset as u32, (offset + perm.len()) as u32),
        children: None,
    });
    node_box.extend_from_slice(&bx);
    if perm.len() > LEAF_CELLS {
        let axis = (0..dim)
            .max_by(|&a, &b| (bx[dim + a] - bx[a]).total_cmp(&(bx[dim + b] - bx[b])))
            .unwrap();
        let mid = perm.len() / 2;
        let key = |c: &u32| {
            let cb = &boxes[2 * dim * *c as usize..];
            cb[axis] + cb[dim + axis]
        };
        perm.select_nth_unstable_by(mid, |a, b| key(a).total_cmp(&key(b)));
        let (left, right) = perm.split_at_mut(mid);
        let l = build_node(left, offset, boxes, dim, nodes, node_box);
        let r = build_node(right, offset + mid, boxes, dim, nodes, node_box);
        nodes[id as usize].children = Some((l, r));
    }
    id
}

/// Nearest and farthest extent of a box from `x`: squared distances for the
/// Euclidean norm, plain distances for the maximum norm.
#[inline]
fn box_extent(x: &[f64], bx: &[f64], dim: usize, norm: Norm) -> (f64, f64) {
    let mut near = 0.0;
    let mut far = 0.0;
    for j in 0..dim {
        let (n, f) = interval_extent(x[j], bx[j], bx[dim + j]);
        match norm {
            Norm::Euclidean => {
                near += n * n;
                far += f * f;
            }
            Norm::Max => {
                near = f64::max(near, n);
                far = f64::max(far, f);
            }
        }
    }
    (near, far)
}

#[inline]
fn interval_extent(x: f64, lo: f64, hi: f64) -> (f64, f64) {
    let n = if x < lo {
        lo - x
    } else if x > hi {
        x - hi
    } else {
        0.0
    };
    (n, (x - lo).abs().max((x - hi).abs()))
}

#[inline]
fn point_extent(x: &[f64], y: &[f64], norm: Norm) -> f64 {
    match norm {
        Norm::Euclidean => {
            let mut acc = 0.0;
            for (a, b) in x.iter().zip(y) {
                let t = (a - b).abs();
                acc += t * t;
            }
            acc
        }
        Norm::Max => x
            .iter()
            .zip(y)
            .fold(0.0, |acc, (a, b)| f64::max(acc, (a - b).abs())),
    }
}

const DENSE_LIMIT: usize = 1 << 22;
const EMPTY: u32 = u32::MAX;
// fixed-size index buffers below
const MAX_DENSE_DIM: usize = 16;

/// Dense occupancy table over the bounding index box of the occupied cells.
///
/// Full prefix sums give an O(2^d) cube bound for ordering centres; prefix
/// sums along the last axis let an exact count take whole runs of cells deep
/// inside the ball at once, leaving only the ends of each run to be tested.
struct DenseCells {
    dim: usize,
    delta: f64,
    lo: Vec<i64>,
    extent: Vec<i64>,
    strides: Vec<usize>,
    cube: Vec<u32>,
    row: Vec<u32>,
    cell_id: Vec<u32>,
}

impl DenseCells {
    fn build(groups: &CellGroups, dim: usize, delta: f64) -> Option<Self> {
        if dim > MAX_DENSE_DIM {
            return None;
        }
        let cells = groups.cell_count();
        let mut lo = vec![i64::MAX; dim];
        let mut hi = vec![i64::MIN; dim];
        for c in 0..cells {
            for j in 0..dim {
                let v = groups.cell_index[c * dim + j];
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        let extent: Vec<i64> = lo.iter().zip(&hi).map(|(l, h)| h - l + 1).collect();
        let mut total: usize = 1;
        for &e in &extent {
            total = total.checked_mul(usize::try_from(e).ok()?)?;
            if total > DENSE_LIMIT {
                return None;
            }
        }
        let mut strides = vec![1usize; dim];
        for j in (0..dim - 1).rev() {
            strides[j] = strides[j + 1] * extent[j + 1] as usize;
        }
        let mut cell_id = vec![EMPTY; total];
        for c in 0..cells {
            let pos: usize = (0..dim)
                .map(|j| (groups.cell_index[c * dim + j] - lo[j]) as usize * strides[j])
                .sum();
            cell_id[pos] = c as u32;
        }
        let mut cube: Vec<u32> = cell_id.iter().map(|&c| (c != EMPTY) as u32).collect();
        let mut row = Vec::new();
        for j in (0..dim).rev() {
            let stride = strides[j];
            let len = extent[j] as usize;
            for pos in 0..total {
                if (pos / stride) % len > 0 {
                    cube[pos] += cube[pos - stride];
                }
            }
            if j == dim - 1 {
                row = cube.clone();
            }
        }
        Some(DenseCells {
            dim,
            delta,
            lo,
            extent,
            strides,
            cube,
            row,
            cell_id,
        })
    }

    /// Occupied cells whose index lies within one cell of the cube `[x − r, x + r]`.
    fn upper(&self, x: &[f64], r: f64) -> usize {
        let dim = self.dim;
        let mut a = [0i64; MAX_DENSE_DIM];
        let mut b = [0i64; MAX_DENSE_DIM];
        for j in 0..dim {
            let l = (cell_index(x[j] - r, self.delta) - 1 - self.lo[j]).max(0);
            let h = (cell_index(x[j] + r, self.delta) + 1 - self.lo[j]).min(self.extent[j] - 1);
            if l > h {
                return 0;
            }
            a[j] = l;
            b[j] = h;
        }
        let mut sum: i64 = 0;
        'corners: for mask in 0..(1usize << dim) {
            let mut pos = 0usize;
            let mut neg = false;
            for j in 0..dim {
                let idx = if mask >> j & 1 == 1 {
                    neg = !neg;
                    a[j] - 1
                } else {
                    b[j]
                };
                if idx < 0 {
                    continue 'corners;
                }
                pos += idx as usize * self.strides[j];
            }
            let v = self.cube[pos] as i64;
            sum += if neg { -v } else { v };
        }
        sum as usize
    }

    /// Exact number of cells holding a member within closed distance `r` of
    /// `x`, or with `upper_only` an upper bound that skips the per-cell tests.
    fn count(&self, store: &CellStore, x: &[f64], r: f64, norm: Norm, upper_only: bool) -> usize {
        let dim = self.dim;
        let last = dim - 1;
        let delta = self.delta;
        // members sit in their cell up to rounding of the cell index
        let slack = delta * 1e-6;
        let bound = norm_bound(r, norm);
        let outer = bound * (1.0 + 1e-9);
        let inner = bound * (1.0 - 1e-9);

        let mut a = [0i64; MAX_DENSE_DIM];
        let mut b = [0i64; MAX_DENSE_DIM];
        for j in 0..last {
            a[j] = (cell_index(x[j] - r, delta) - 1 - self.lo[j]).max(0);
            b[j] = (cell_index(x[j] + r, delta) + 1 - self.lo[j]).min(self.extent[j] - 1);
            if a[j] > b[j] {
                return 0;
            }
        }
        let mut idx = a;
        let xl = x[last];
        let lo_last = self.lo[last];
        let top = self.extent[last] - 1;
        let mut total = 0usize;
        loop {
            let mut near = 0.0;
            let mut far = 0.0;
            let mut base = 0usize;
            for j in 0..last {
                let k = (idx[j] + self.lo[j]) as f64;
                let (n, f) = interval_extent(x[j], k * delta - slack, (k + 1.0) * delta + slack);
                match norm {
                    Norm::Euclidean => {
                        near += n * n;
                        far += f * f;
                    }
                    Norm::Max => {
                        near = f64::max(near, n);
                        far = f64::max(far, f);
                    }
                }
                base += idx[j] as usize * self.strides[j];
            }
            if near <= outer {
                let h_out = match norm {
                    Norm::Euclidean => (outer - near).sqrt(),
                    Norm::Max => r * (1.0 + 1e-9),
                };
                // cells whose slack-widened extent along the row meets
                // [xl - h_out, xl + h_out]
                let ka = (((xl - h_out - slack) / delta).ceil() as i64 - 1 - lo_last).max(0);
                let kb = (cell_index(xl + h_out + slack, delta) - lo_last).min(top);
                if upper_only {
                    if ka <= kb {
                        let before = if ka > 0 {
                            self.row[base + ka as usize - 1]
                        } else {
                            0
                        };
                        total += (self.row[base + kb as usize] - before) as usize;
                    }
                } else {
                    let h_in = match norm {
                        Norm::Euclidean if far <= inner => Some((inner - far).sqrt()),
                        Norm::Max if far <= inner => Some(inner),
                        _ => None,
                    };
                    let (ia, ib) = match h_in {
                        // cells whose slack-widened extent lies inside
                        // [xl - h_in, xl + h_in]
                        Some(h) => (
                            (((xl - h + slack) / delta).ceil() as i64 - lo_last).max(ka),
                            (cell_index(xl + h - slack, delta) - 1 - lo_last).min(kb),
                        ),
                        None => (kb + 1, kb),
                    };
                    let mut probe = |k: i64| {
                        let c = self.cell_id[base + k as usize];
                        if c != EMPTY && store.hits(c as usize, x, bound, norm) {
                            total += 1;
                        }
                    };
                    if ia <= ib {
                        for k in ka..ia {
                            probe(k);
                        }
                        for k in ib + 1..=kb {
                            probe(k);
                        }
                        let before = if ia > 0 {
                            self.row[base + ia as usize - 1]
                        } else {
                            0
                        };
                        total += (self.row[base + ib as usize] - before) as usize;
                    } else {
                        for k in ka..=kb {
                            probe(k);
                        }
                    }
                }
            }
            let mut j = last;
            loop {
                if j == 0 {
                    return total;
                }
                j -= 1;
                if idx[j] < b[j] {
                    idx[j] += 1;
                    break;
                }
                idx[j] = a[j];
            }
        }
    }
}

/// Branch and bound over centres: evaluate in decreasing upper-bound order and
/// stop once no remaining bound can beat the best count. Ties are taken
/// nearest the middle of the family first, then by index.
fn max_ball_count(
    coords: &[f64],
    dim: usize,
    r: f64,
    covering: usize,
    exact: &(dyn Fn(&[f64], f64) -> usize + Sync),
    refine: Option<&(dyn Fn(&[f64], f64) -> usize + Sync)>,
    bound: Option<&DenseCells>,
) -> ScaleMax {
    let n = coords.len() / dim;
    let centre = |i: usize| &coords[i * dim..(i + 1) * dim];
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for x in coords.chunks_exact(dim) {
        for j in 0..dim {
            lo[j] = lo[j].min(x[j]);
            hi[j] = hi[j].max(x[j]);
        }
    }
    let mid: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
    let mut order: Vec<(usize, f64, usize)> = (0..n)
        .map(|i| {
            let ub = bound.map_or(covering, |b| b.upper(centre(i), r));
            (ub, point_extent(centre(i), &mid, Norm::Euclidean), i)
        })
        .collect();
    order.sort_unstable_by(|x, y| y.0.cmp(&x.0).then(x.1.total_cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut best = 0usize;
    let mut best_centre = order[0].2;
    for &(ub, _, i) in &order {
        if ub <= best {
            break;
        }
        if refine.is_some_and(|f| f(centre(i), r) <= best) {
            continue;
        }
        let c = exact(centre(i), r);
        if c > best {
            best = c;
            best_centre = i;
            if best == covering {
                break;
            }
        }
    }
    ScaleMax {
        r,
        max_count: best,
        center: best_centre,
    }
}

/// Exact `d_A` balls: for each centre, the nearest member of every cell,
/// then a sorted sweep over the radii.
fn affine_profile(family: &Family, groups: &CellGroups, radii: &[f64]) -> Vec<ScaleMax> {
    let n = family.len();
    let mut cell_of = vec![0usize; n];
    for c in 0..groups.cell_count() {
        for &e in &groups.order[groups.cell_starts[c]..groups.cell_starts[c + 1]] {
            cell_of[e] = c;
        }
    }
    let normalized: Vec<(Vec<f64>, f64)> = family.iter().map(geometry::normalized).collect();
    let per_centre: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut nearest = vec![f64::INFINITY; groups.cell_count()];
            let (ni, hi) = &normalized[i];
            for j in 0..n {
                let dist = if i == j {
                    0.0
                } else {
                    let (nj, hj) = &normalized[j];
                    geometry::affine_metric_normalized(ni, *hi, nj, *hj)
                };
                let slot = &mut nearest[cell_of[j]];
                *slot = slot.min(dist);
            }
            nearest.sort_unstable_by(f64::total_cmp);
            radii
                .iter()
                .map(|&r| nearest.partition_point(|&v| v <= r))
                .collect()
        })
        .collect();
    radii
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let (center, max_count) =
                per_centre
                    .iter()
                    .enumerate()
                    .fold((0, 0), |(bi, bc), (i, counts)| {
                        if counts[k] > bc {
                            (i, counts[k])
                        } else {
                            (bi, bc)
                        }
                    });
            ScaleMax {
                r,
                max_count,
                center,
            }
        })
        .collect()
}
