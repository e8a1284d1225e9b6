//! Accelerated counter: a k-d tree over the points, descended once per plane.
//!
//! A node is discarded when `|Ψ|` provably exceeds the slab threshold on its
//! bounding box, and taken whole when `|Ψ|` provably stays below it. Both
//! tests carry a relative margin far above rounding error, so they only fire
//! where the shared per-point predicate would agree; everything else falls
//! through to that predicate.

use rayon::prelude::*;

use crate::family::Family;
use crate::geometry::{psi, PredicateMode, Slab};
use crate::Result;

use super::{check_inputs, IncidenceReport};

const LEAF_SIZE: usize = 16;
const MARGIN: f64 = 1e-9;

struct PointIndex {
    dim: usize,
    /// coordinates in tree order
    coords: Vec<f64>,
    /// tree position → original index
    perm: Vec<usize>,
    nodes: Vec<Node>,
    /// per node: box centre then half-widths
    boxes: Vec<f64>,
}

struct Node {
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

impl PointIndex {
    fn build(points: &Family) -> Self {
        let dim = points.dim();
        let mut perm: Vec<usize> = (0..points.len()).collect();
        let mut index = PointIndex {
            dim,
            coords: Vec::new(),
            perm: Vec::new(),
            nodes: Vec::new(),
            boxes: Vec::new(),
        };
        if !perm.is_empty() {
            index.split(points, &mut perm, 0);
        }
        index.coords = perm
            .iter()
            .flat_map(|&i| points.element(i).iter().copied())
            .collect();
        index.perm = perm;
        index
    }

    fn split(&mut self, points: &Family, perm: &mut [usize], offset: usize) -> usize {
        let dim = self.dim;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &i in perm.iter() {
            for (j, &x) in points.element(i).iter().enumerate() {
                lo[j] = lo[j].min(x);
                hi[j] = hi[j].max(x);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            start: offset,
            end: offset + perm.len(),
            children: None,
        });
        self.boxes.extend((0..dim).map(|j| 0.5 * (lo[j] + hi[j])));
        self.boxes.extend((0..dim).map(|j| 0.5 * (hi[j] - lo[j])));
        if perm.len() > LEAF_SIZE {
            let axis = (0..dim)
                .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
                .unwrap();
            let mid = perm.len() / 2;
            perm.select_nth_unstable_by(mid, |&a, &b| {
                points.element(a)[axis].total_cmp(&points.element(b)[axis])
            });
            let (left, right) = perm.split_at_mut(mid);
            let l = self.split(points, left, offset);
            let r = self.split(points, right, offset + mid);
            self.nodes[id].children = Some((l, r));
        }
        id
    }

    /// Incidences of one plane; accepted tree ranges are marked in `diff`.
    fn query(&self, slab: &Slab<'_>, diff: &mut [i64]) -> u64 {
        if self.nodes.is_empty() {
            return 0;
        }
        let dim = self.dim;
        let coeffs = slab.coeffs;
        let thr = slab.psi_threshold();
        let mut count = 0u64;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let bx = &self.boxes[2 * dim * id..2 * dim * (id + 1)];
            let (centre, half) = bx.split_at(dim);
            let mut spread = half[dim - 1];
            for j in 0..dim - 1 {
                spread += coeffs[j].abs() * half[j];
            }
            let at_centre = psi(coeffs, centre).abs();
            let margin = MARGIN * (1.0 + at_centre + spread + thr);
            if at_centre - spread > thr + margin {
                continue;
            }
            if at_centre + spread < thr - margin {
                count += (node.end - node.start) as u64;
                diff[node.start] += 1;
                diff[node.end] -= 1;
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => {
                    for k in node.start..node.end {
                        if slab.contains(&self.coords[k * dim..(k + 1) * dim]) {
                            count += 1;
                            diff[k] += 1;
                            diff[k + 1] -= 1;
                        }
                    }
                }
            }
        }
        count
    }
}

/// Same report as [`super::count_incidences_oracle`], computed on the current
/// rayon pool. Results do not depend on the number of workers.
pub fn count_incidences_fast(
    points: &Family,
    planes: &Family,
    cdelta: f64,
    mode: PredicateMode,
) -> Result<IncidenceReport> {
    check_inputs(points, planes, cdelta)?;
    let index = PointIndex::build(points);
    let n = points.len();
    let m = planes.len();
    let chunks = (rayon::current_num_threads() * 4).max(1);
    let chunk_len = m.div_ceil(chunks).max(1);
    let coeffs: Vec<&[f64]> = planes.iter().collect();

    let partials: Vec<(Vec<u64>, Vec<i64>)> = coeffs
        .par_chunks(chunk_len)
        .map(|chunk| {
            let mut diff = vec![0i64; n + 1];
            let counts = chunk
                .iter()
                .map(|c| index.query(&Slab::new(c, cdelta, mode), &mut diff))
                .collect();
            (counts, diff)
        })
        .collect();

    let mut per_plane = Vec::with_capacity(m);
    let mut diff = vec![0i64; n + 1];
    for (counts, part) in partials {
        per_plane.extend(counts);
        for (a, b) in diff.iter_mut().zip(part) {
            *a += b;
        }
    }
    let mut per_point = vec![0u64; n];
    let mut running = 0i64;
    for k in 0..n {
        running += diff[k];
        per_point[index.perm[k]] = running as u64;
    }
    IncidenceReport::assemble(points, planes, cdelta, mode, &per_plane, &per_point)
}
