//! Box covers of `π1(δ) ∩ π2(δ) ∩ B(0,1)` for two hyperplanes at affine
//! distance `w > δ`, and a sampling check of the result.
//!
//! The cover is built in an orthonormal frame adapted to the pair: the unit
//! normal `e_n` of `π1`, the fold direction `e_f` (the part of the second
//! normal orthogonal to the first), and `d - 2` directions parallel to the
//! fold line. In frame coordinates `(α, β, z)` the intersection satisfies
//! `|α + h1| ≤ δ` and `|cos θ · α + sin θ · β + h2| ≤ δ`, so `β` is confined
//! to an interval of length about `4δ / sin θ`. That interval is tiled at pitch
//! `δ/w`, the `z` directions at pitch `δ`, and tiles outside the unit ball are
//! dropped.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{self, Hyperplane, PredicateMode, Slab};
use crate::{Error, Result};

/// Constant in the published box-count bound `K · δ^{-(d-2)}`.
pub const COUNT_CONSTANT: f64 = 64.0;

const TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverBox {
    pub center: Vec<f64>,
    /// orthonormal, one per ambient dimension
    pub axes: Vec<Vec<f64>>,
    pub half_lengths: Vec<f64>,
    /// index of the axis with half-length `δ/(2w)`
    pub fold_axis: usize,
}

impl CoverBox {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.axes.iter().zip(&self.half_lengths).all(|(axis, &h)| {
            let proj: f64 = axis
                .iter()
                .zip(x.iter().zip(&self.center))
                .map(|(a, (xi, ci))| a * (xi - ci))
                .sum();
            proj.abs() <= h * (1.0 + TOL) + 1e-12
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxCover {
    pub boxes: Vec<CoverBox>,
    /// `d_A` between the two planes
    pub w: f64,
    pub delta: f64,
    pub count_bound: f64,
}

impl BoxCover {
    /// Copy with every half-length multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> BoxCover {
        let mut out = self.clone();
        for b in &mut out.boxes {
            for h in &mut b.half_lengths {
                *h *= factor;
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis starting with `first` (unit) and the normalised part of
/// `second` orthogonal to it, when that part is not negligible.
fn adapted_frame(first: &[f64], second: &[f64]) -> (Vec<Vec<f64>>, f64) {
    let d = first.len();
    let mut basis = vec![first.to_vec()];
    let mut rem = second.to_vec();
    let c = dot(second, first);
    for (r, f) in rem.iter_mut().zip(first) {
        *r -= c * f;
    }
    let sin = geometry::euclidean_norm(&rem);
    if sin > 1e-12 {
        basis.push(rem.iter().map(|r| r / sin).collect());
    }
    let residual = |v: &[f64], basis: &[Vec<f64>]| {
        let mut r = v.to_vec();
        for _ in 0..2 {
            for b in basis {
                let p = dot(&r, b);
                for (ri, bi) in r.iter_mut().zip(b) {
                    *ri -= p * bi;
                }
            }
        }
        r
    };
    while basis.len() < d {
        let best = (0..d)
            .map(|k| {
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                residual(&e, &basis)
            })
            .max_by(|a, b| {
                geometry::euclidean_norm(a).total_cmp(&geometry::euclidean_norm(b))
            })
            .unwrap();
        let n = geometry::euclidean_norm(&best);
        basis.push(best.iter().map(|x| x / n).collect());
    }
    (basis, if sin > 1e-12 { sin } else { 0.0 })
}

fn min_abs(lo: f64, hi: f64) -> f64 {
    if lo <= 0.0 && hi >= 0.0 {
        0.0
    } else {
        lo.abs().min(hi.abs())
    }
}

fn check_pair(p1: &Hyperplane, p2: &Hyperplane, delta: f64) -> Result<f64> {
    if p1.dim() != p2.dim() {
        return Err(Error::DimensionMismatch {
            expected: p1.dim(),
            found: p2.dim(),
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    for p in [p1, p2] {
        if p.origin_distance() > 1.0 {
            return Err(Error::invalid("hyperplane misses the unit ball"));
        }
    }
    let w = geometry::affine_metric(p1, p2)?;
    if w <= delta {
        return Err(Error::ScalesMerge { w, delta });
    }
    Ok(w)
}

pub fn slab_intersection_cover(p1: &Hyperplane, p2: &Hyperplane, delta: f64) -> Result<BoxCover> {
    let w = check_pair(p1, p2, delta)?;
    let d = p1.dim();
    let (n1, h1) = geometry::normalized(p1.coeffs());
    let (n2, h2) = geometry::normalized(p2.coeffs());
    let (frame, sin) = adapted_frame(&n1, &n2);
    let cos = dot(&n1, &n2);
    let count_bound = COUNT_CONSTANT * delta.powi(-(d as i32 - 2));
    let empty = BoxCover {
        boxes: Vec::new(),
        w,
        delta,
        count_bound,
    };

    let mut a0 = (-h1 - delta).max(-1.0);
    let mut a1 = (-h1 + delta).min(1.0);
    let (b0, b1) = if sin > 0.0 {
        let lo = |a: f64| (-h2 - delta - cos * a) / sin;
        let hi = |a: f64| (-h2 + delta - cos * a) / sin;
        (
            lo(a0).min(lo(a1)).max(-1.0),
            hi(a0).max(hi(a1)).min(1.0),
        )
    } else {
        // parallel slabs: the second one only narrows α
        let (l, h) = ((-h2 - delta) / cos, (-h2 + delta) / cos);
        a0 = a0.max(l.min(h));
        a1 = a1.min(l.max(h));
        (-1.0, 1.0)
    };
    if a0 > a1 || b0 > b1 {
        return Ok(empty);
    }

    let alpha_c = 0.5 * (a0 + a1);
    let alpha_h = 0.5 * (a1 - a0);
    let alpha_min = min_abs(a0, a1);
    let pitch = delta / w;
    let n_fold = (((b1 - b0) / pitch) - 1e-9).ceil().max(1.0) as usize;
    let z_dims = d - 2;
    let n_z = (2.0 / delta - 1e-9).ceil() as i64;

    let mut boxes = Vec::new();
    let mut z_idx = vec![0i64; z_dims];
    for k in 0..n_fold {
        let lo = b0 + k as f64 * pitch;
        let beta_min = min_abs(lo, lo + pitch);
        let r2 = 1.0 - alpha_min * alpha_min - beta_min * beta_min;
        if r2 < -1e-12 {
            continue;
        }
        let beta_c = lo + 0.5 * pitch;
        let mut emit = |z: &[i64]| {
            let mut center: Vec<f64> = (0..d)
                .map(|j| alpha_c * frame[0][j] + beta_c * frame[1][j])
                .collect();
            for (m, &zi) in z.iter().enumerate() {
                let zc = -1.0 + (zi as f64 + 0.5) * delta;
                for (c, e) in center.iter_mut().zip(&frame[2 + m]) {
                    *c += zc * e;
                }
            }
            let mut half_lengths = vec![alpha_h, 0.5 * pitch];
            half_lengths.extend(std::iter::repeat(0.5 * delta).take(z_dims));
            boxes.push(CoverBox {
                center,
                axes: frame.clone(),
                half_lengths,
                fold_axis: 1,
            });
        };
        enumerate_z(&mut z_idx, 0, r2 + 1e-12, n_z, delta, &mut emit);
    }
    Ok(BoxCover {
        boxes,
        w,
        delta,
        count_bound,
    })
}

/// Visits every tile `[-1 + iδ, -1 + (i+1)δ]^{d-2}` whose nearest point to the
/// origin lies within squared radius `budget`.
fn enumerate_z(
    idx: &mut Vec<i64>,
    axis: usize,
    budget: f64,
    n_z: i64,
    delta: f64,
    emit: &mut impl FnMut(&[i64]),
) {
    if axis == idx.len() {
        emit(idx);
        return;
    }
    for i in 0..n_z {
        let lo = -1.0 + i as f64 * delta;
        let m = min_abs(lo, lo + delta);
        let rest = budget - m * m;
        if rest < 0.0 {
            continue;
        }
        idx[axis] = i;
        enumerate_z(idx, axis + 1, rest, n_z, delta, emit);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverCheck {
    pub samples: usize,
    pub covered: usize,
    /// `covered / samples`, 1 when no sample was drawn
    pub fraction: f64,
    pub n_misses: usize,
    /// first uncovered samples, at most [`MAX_REPORTED_MISSES`]
    pub misses: Vec<Vec<f64>>,
    /// no point of the intersection was found
    pub vacuous: bool,
    pub draws: u64,
}

pub const MAX_REPORTED_MISSES: usize = 100;
const CHUNK: usize = 1024;
const DRAWS_PER_SAMPLE: usize = 1000;

/// Grid lookup for covers whose boxes share one frame; otherwise a linear scan.
struct BoxIndex<'a> {
    cover: &'a BoxCover,
    frame: Option<(Vec<Vec<f64>>, Vec<f64>, HashMap<Vec<i64>, Vec<usize>>)>,
}

impl<'a> BoxIndex<'a> {
    fn new(cover: &'a BoxCover) -> Self {
        let Some(first) = cover.boxes.first() else {
            return BoxIndex { cover, frame: None };
        };
        if cover.boxes.iter().any(|b| b.axes != first.axes) {
            return BoxIndex { cover, frame: None };
        }
        let axes = first.axes.clone();
        let d = axes.len();
        let cell: Vec<f64> = (0..d)
            .map(|k| {
                cover
                    .boxes
                    .iter()
                    .map(|b| 2.0 * b.half_lengths[k])
                    .fold(1e-12, f64::max)
            })
            .collect();
        let mut map: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, b) in cover.boxes.iter().enumerate() {
            let ranges: Vec<(i64, i64)> = (0..d)
                .map(|k| {
                    let c = dot(&axes[k], &b.center);
                    let h = b.half_lengths[k] * (1.0 + TOL) + 1e-12;
                    (
                        ((c - h) / cell[k]).floor() as i64,
                        ((c + h) / cell[k]).floor() as i64,
                    )
                })
                .collect();
            let mut key: Vec<i64> = ranges.iter().map(|r| r.0).collect();
            loop {
                map.entry(key.clone()).or_default().push(i);
                let mut k = 0;
                while k < d {
                    if key[k] < ranges[k].1 {
                        key[k] += 1;
                        break;
                    }
                    key[k] = ranges[k].0;
                    k += 1;
                }
                if k == d {
                    break;
                }
            }
        }
        BoxIndex {
            cover,
            frame: Some((axes, cell, map)),
        }
    }

    fn covers(&self, x: &[f64]) -> bool {
        match &self.frame {
            None => self.cover.boxes.iter().any(|b| b.contains(x)),
            Some((axes, cell, map)) => {
                let key: Vec<i64> = axes
                    .iter()
                    .zip(cell)
                    .map(|(a, c)| (dot(a, x) / c).floor() as i64)
                    .collect();
                map.get(&key)
                    .is_some_and(|ids| ids.iter().any(|&i| self.cover.boxes[i].contains(x)))
            }
        }
    }
}

/// Orthonormal basis of the complement of the unit vector `n`: the first
/// `d - 1` columns of the Householder reflection taking `e_d` to `n`.
fn complement_basis(n: &[f64]) -> Vec<Vec<f64>> {
    let d = n.len();
    let mut v = n.iter().map(|x| -x).collect::<Vec<_>>();
    v[d - 1] += 1.0;
    let vv = dot(&v, &v);
    (0..d - 1)
        .map(|j| {
            let mut col = vec![0.0; d];
            col[j] = 1.0;
            if vv > 1e-30 {
                let f = 2.0 * v[j] / vv;
                for (c, vi) in col.iter_mut().zip(&v) {
                    *c -= f * vi;
                }
            }
            col
        })
        .collect()
}

/// Uniform proposals on `π1(δ) ∩ π2(δ) ∩ [-1,1]`-boxes, built from
/// Householder complements rather than the cover's frame.
struct Proposal {
    n1: Vec<f64>,
    h1: f64,
    /// unit fold direction, `sin θ`, `cos θ` and `h2`; `None` for nearly parallel planes
    fold: Option<(Vec<f64>, f64, f64, f64)>,
    /// remaining directions, each drawn uniformly in `[-1, 1]`
    free: Vec<Vec<f64>>,
}

impl Proposal {
    fn new(n1: Vec<f64>, h1: f64, n2: &[f64], h2: f64, delta: f64) -> Self {
        let d = n1.len();
        let q = complement_basis(&n1);
        let g: Vec<f64> = q.iter().map(|col| dot(col, n2)).collect();
        let sin = geometry::euclidean_norm(&g);
        let lift = |y: &[f64]| -> Vec<f64> {
            (0..d).map(|j| y.iter().zip(&q).map(|(yk, col)| yk * col[j]).sum()).collect()
        };
        if sin > delta {
            let unit: Vec<f64> = g.iter().map(|x| x / sin).collect();
            let free = complement_basis(&unit).iter().map(|y| lift(y)).collect();
            Proposal {
                fold: Some((lift(&unit), sin, dot(&n1, n2), h2)),
                n1,
                h1,
                free,
            }
        } else {
            Proposal {
                n1,
                h1,
                fold: None,
                free: q,
            }
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, delta: f64, x: &mut [f64]) {
        let alpha = -self.h1 + delta * rng.gen_range(-1.0..=1.0);
        x.iter_mut().zip(&self.n1).for_each(|(xi, ni)| *xi = alpha * ni);
        if let Some((dir, sin, cos, h2)) = &self.fold {
            // the second slab is an interval of fixed length in β for every α
            let beta = (-h2 - cos * alpha + delta * rng.gen_range(-1.0..=1.0)) / sin;
            x.iter_mut().zip(dir).for_each(|(xi, di)| *xi += beta * di);
        }
        for b in &self.free {
            let y: f64 = rng.gen_range(-1.0..=1.0);
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += y * bi);
        }
    }
}

/// Samples the intersection uniformly and reports how much of it the cover
/// contains. Proposals are uniform on the intersection of the two slabs
/// within a bounding box; they are kept when both slab predicates hold and
/// `|x| ≤ 1`.
pub fn verify_cover(
    p1: &Hyperplane,
    p2: &Hyperplane,
    delta: f64,
    cover: &BoxCover,
    n_samples: usize,
    seed: u64,
) -> Result<CoverCheck> {
    check_pair(p1, p2, delta)?;
    if let Some(b) = cover.boxes.iter().find(|b| b.center.len() != p1.dim()) {
        return Err(Error::DimensionMismatch {
            expected: p1.dim(),
            found: b.center.len(),
        });
    }
    let d = p1.dim();
    let (n1, h1) = geometry::normalized(p1.coeffs());
    let (n2, h2) = geometry::normalized(p2.coeffs());
    let proposal = Proposal::new(n1, h1, &n2, h2, delta);
    let s1 = Slab::new(p1.coeffs(), delta, PredicateMode::Euclidean);
    let s2 = Slab::new(p2.coeffs(), delta, PredicateMode::Euclidean);
    let index = BoxIndex::new(cover);

    let chunks = n_samples.div_ceil(CHUNK);
    let results: Vec<(usize, usize, u64, Vec<Vec<f64>>, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let quota = CHUNK.min(n_samples - c * CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let (mut got, mut covered, mut draws, mut n_miss) = (0usize, 0usize, 0u64, 0usize);
            let mut misses = Vec::new();
            let mut x = vec![0.0; d];
            while got < quota && draws < (quota * DRAWS_PER_SAMPLE) as u64 {
                draws += 1;
                proposal.draw(&mut rng, delta, &mut x);
                if geometry::euclidean_norm(&x) > 1.0 || !s1.contains(&x) || !s2.contains(&x) {
                    continue;
                }
                got += 1;
                if index.covers(&x) {
                    covered += 1;
                } else {
                    n_miss += 1;
                    if misses.len() < MAX_REPORTED_MISSES {
                        misses.push(x.clone());
                    }
                }
            }
            (got, covered, draws, misses, n_miss)
        })
        .collect();

    let mut check = CoverCheck {
        samples: 0,
        covered: 0,
        fraction: 1.0,
        n_misses: 0,
        misses: Vec::new(),
        vacuous: false,
        draws: 0,
    };
    for (got, covered, draws, misses, n_miss) in results {
        check.samples += got;
        check.covered += covered;
        check.draws += draws;
        check.n_misses += n_miss;
        let room = MAX_REPORTED_MISSES - check.misses.len();
        check.misses.extend(misses.into_iter().take(room));
    }
    if check.samples == 0 {
        check.vacuous = true;
    } else {
        check.fraction = check.covered as f64 / check.samples as f64;
    }
    Ok(check)
}
