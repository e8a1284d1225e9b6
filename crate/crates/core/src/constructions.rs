//! Sharpness families and auxiliary test families.
//!
//! All grid constructions use dyadic `δ = 2^{-k}` and dyadic spacings, so every
//! coordinate is exactly representable and predicate evaluations on these
//! families involve no representation error.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::family::{Family, FamilyKind};
use crate::geometry;
use crate::{Error, Result};

/// `k` with `δ = 2^{-k}`, or an error when `δ` is not a power of two.
pub fn dyadic_level(delta: f64) -> Result<u32> {
    if delta > 0.0 && delta < 1.0 {
        let k = -delta.log2();
        if k.fract() == 0.0 && 2f64.powi(-(k as i32)) == delta {
            return Ok(k as u32);
        }
    }
    Err(Error::invalid(format!(
        "delta must be a power of two in (0, 1), got {delta}"
    )))
}

/// `2^{-⌈k·e⌉}`: the dyadic spacing closest to `δ^e` from below.
fn dyadic_spacing(k: u32, exponent: f64) -> f64 {
    let e = (k as f64 * exponent - 1e-9).ceil().max(0.0);
    2f64.powi(-(e as i32))
}

/// `{0, σ, 2σ, …} ∩ [lo, 1]` for `lo ∈ {0, -1}`.
fn lattice(spacing: f64, symmetric: bool) -> Vec<f64> {
    let m = (1.0 / spacing + 1e-9).floor() as i64;
    let start = if symmetric { -m } else { 0 };
    (start..=m).map(|i| i as f64 * spacing).collect()
}

/// Planar sharpness pair: points `(i σ_p, j δ) ∈ [0,1]²` with `σ_p ≈ δ^{s-1}`,
/// and lines `x2 = m x1 + c` with `m ∈ σ_t Z ∩ [0,1]`, `σ_t ≈ δ^{t-1}`, and
/// `c ∈ δ Z ∩ [-1,1]`. Spacings are rounded down to powers of two.
pub fn construct_sharp_2d(s: f64, t: f64, delta: f64) -> Result<(Family, Family)> {
    if !(1.0..=2.0).contains(&s) || !(1.0..=2.0).contains(&t) {
        return Err(Error::invalid(format!(
            "sharp construction needs 1 <= s, t <= 2, got s = {s}, t = {t}"
        )));
    }
    let k = dyadic_level(delta)?;
    if k < 4 {
        return Err(Error::invalid(format!(
            "sharp construction needs delta <= 2^-4, got {delta}"
        )));
    }
    let xs = lattice(dyadic_spacing(k, s - 1.0), false);
    let ys = lattice(delta, false);
    let points: Vec<f64> = xs
        .iter()
        .flat_map(|&x| ys.iter().flat_map(move |&y| [x, y]))
        .collect();
    let slopes = lattice(dyadic_spacing(k, t - 1.0), false);
    let intercepts = lattice(delta, true);
    let lines: Vec<f64> = slopes
        .iter()
        .flat_map(|&m| intercepts.iter().flat_map(move |&c| [m, c]))
        .collect();
    Ok((
        Family::points(2, delta, points)?.with_meta(s, CLAIMED_CONSTANT),
        Family::hyperplanes(2, delta, lines)?.with_meta(t, CLAIMED_CONSTANT),
    ))
}

/// Regularity constant recorded as metadata on constructed families.
pub const CLAIMED_CONSTANT: f64 = 32.0;

/// Layers used by [`lift_to_dim`]: `2δ Z ∩ [0, 1]`.
pub fn layer_heights(delta: f64) -> Vec<f64> {
    lattice(2.0 * delta, false)
}

/// Lifts a planar pair to `R^d`: each point `(p1, p2)` is copied to
/// `(p1, h_1, …, h_{d-2}, p2)` for every choice of layer heights, and each line
/// `x2 = a x1 + e` becomes `x_d = a x_1 + 0 x_2 + … + 0 x_{d-1} + e`.
pub fn lift_to_dim(p2: &Family, t2: &Family, d: usize, delta: f64) -> Result<(Family, Family)> {
    if d < 3 {
        return Err(Error::invalid(format!("lift needs d >= 3, got {d}")));
    }
    p2.expect_kind(FamilyKind::Points, "planar point family")?;
    t2.expect_kind(FamilyKind::Hyperplanes, "planar line family")?;
    if p2.dim() != 2 || t2.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: if p2.dim() != 2 { p2.dim() } else { t2.dim() },
        });
    }
    if p2.delta() != delta || t2.delta() != delta {
        return Err(Error::invalid(
            "lift scale differs from the planar families",
        ));
    }
    let heights = layer_heights(delta);
    let extra = d - 2;
    let layers = heights.len().pow(extra as u32);
    let mut points = Vec::with_capacity(p2.len() * layers * d);
    let mut idx = vec![0usize; extra];
    for p in p2.iter() {
        idx.fill(0);
        for _ in 0..layers {
            points.push(p[0]);
            points.extend(idx.iter().map(|&i| heights[i]));
            points.push(p[1]);
            for slot in idx.iter_mut().rev() {
                *slot += 1;
                if *slot < heights.len() {
                    break;
                }
                *slot = 0;
            }
        }
    }
    let mut planes = Vec::with_capacity(t2.len() * d);
    for l in t2.iter() {
        planes.push(l[0]);
        planes.extend(std::iter::repeat(0.0).take(extra));
        planes.push(l[1]);
    }
    let mut pf = Family::points(d, delta, points)?;
    let mut tf = Family::hyperplanes(d, delta, planes)?;
    pf.meta = p2.meta;
    tf.meta = t2.meta;
    Ok((pf, tf))
}

/// Parameters of the sharpness construction in `R^d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionSpec {
    pub d: usize,
    pub delta: f64,
    pub s: f64,
    pub t: f64,
}

impl ConstructionSpec {
    pub fn build(&self) -> Result<(Family, Family)> {
        let (p, t) = construct_sharp_2d(self.s, self.t, self.delta)?;
        match self.d {
            2 => Ok((p, t)),
            d if d >= 3 => lift_to_dim(&p, &t, d, self.delta),
            d => Err(Error::invalid(format!("dimension must be >= 2, got {d}"))),
        }
    }
}

/// Product grid `∏_i (σ_i Z ∩ [0, 1])`.
pub fn construct_grid(d: usize, delta: f64, spacings: &[f64]) -> Result<Family> {
    if spacings.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: spacings.len(),
        });
    }
    if let Some(bad) = spacings.iter().find(|&&sp| !(sp >= delta && sp <= 1.0)) {
        return Err(Error::invalid(format!(
            "grid spacing {bad} outside [delta, 1] with delta = {delta}"
        )));
    }
    let axes: Vec<Vec<f64>> = spacings.iter().map(|&sp| lattice(sp, false)).collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut data = Vec::with_capacity(total * d);
    for mut k in 0..total {
        let start = data.len();
        data.resize(start + d, 0.0);
        for j in (0..d).rev() {
            data[start + j] = axes[j][k % axes[j].len()];
            k /= axes[j].len();
        }
    }
    Family::points(d, delta, data)
}

/// Seeded rejection sampling of a δ-separated family of size `n`: points
/// uniform in `B(0,1)`, or planes with slopes uniform in `[-1,1]` and an
/// intercept keeping the plane within distance 1 of the origin.
pub fn construct_random(
    kind: FamilyKind,
    d: usize,
    delta: f64,
    n: usize,
    seed: u64,
) -> Result<Family> {
    if d < 2 {
        return Err(Error::invalid(format!("dimension must be >= 2, got {d}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = 1000 * n.max(1);
    let data = match kind {
        FamilyKind::Points => random_points(&mut rng, d, delta, n, budget),
        FamilyKind::Hyperplanes => random_planes(&mut rng, d, delta, n, budget),
    };
    match data {
        Some(data) => Family::from_flat(kind, d, delta, data),
        None => Err(Error::Infeasible(format!(
            "could not place {n} delta-separated {kind} in {budget} attempts"
        ))),
    }
}

fn random_points(
    rng: &mut ChaCha8Rng,
    d: usize,
    delta: f64,
    n: usize,
    budget: usize,
) -> Option<Vec<f64>> {
    let mut data: Vec<f64> = Vec::with_capacity(n * d);
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    let mut x = vec![0.0; d];
    let mut attempts = 0;
    while data.len() < n * d {
        if attempts == budget {
            return None;
        }
        attempts += 1;
        for v in x.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        if geometry::euclidean_norm(&x) > 1.0 {
            continue;
        }
        let cell: Vec<i64> = x.iter().map(|v| (v / delta).floor() as i64).collect();
        let mut nb = cell.clone();
        let close = (0..3usize.pow(d as u32)).any(|code| {
            let mut c = code;
            for j in 0..d {
                nb[j] = cell[j] + (c % 3) as i64 - 1;
                c /= 3;
            }
            grid.get(&nb).is_some_and(|list| {
                list.iter().any(|&i| {
                    let y = &data[i * d..(i + 1) * d];
                    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                    d2.sqrt() < delta
                })
            })
        });
        if close {
            continue;
        }
        grid.entry(cell).or_default().push(data.len() / d);
        data.extend_from_slice(&x);
    }
    Some(data)
}

fn random_planes(
    rng: &mut ChaCha8Rng,
    d: usize,
    delta: f64,
    n: usize,
    budget: usize,
) -> Option<Vec<f64>> {
    let mut data: Vec<f64> = Vec::with_capacity(n * d);
    let mut normalized: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n);
    let mut c = vec![0.0; d];
    let mut attempts = 0;
    while normalized.len() < n {
        if attempts == budget {
            return None;
        }
        attempts += 1;
        for v in c[..d - 1].iter_mut() {
            *v = rng.gen_range(-1.0..=1.0);
        }
        let norm = geometry::normal_norm(&c);
        c[d - 1] = rng.gen_range(-norm..=norm);
        if geometry::validate_plane_coeffs(&c).is_err() {
            continue;
        }
        let (nc, hc) = geometry::normalized(&c);
        let close = normalized
            .iter()
            .any(|(n2, h2)| geometry::affine_metric_normalized(&nc, hc, n2, *h2) < delta);
        if close {
            continue;
        }
        normalized.push((nc, hc));
        data.extend_from_slice(&c);
    }
    Some(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularity::{best_dimension, min_separation};

    #[test]
    fn dyadic_levels() {
        assert_eq!(dyadic_level(0.25).unwrap(), 2);
        assert_eq!(dyadic_level(2f64.powi(-10)).unwrap(), 10);
        assert!(dyadic_level(0.3).is_err());
        assert!(dyadic_level(1.0).is_err());
    }

    #[test]
    fn sharp_sizes() {
        let (p, t) = construct_sharp_2d(1.75, 1.75, 2f64.powi(-8)).unwrap();
        assert_eq!(p.len(), 65 * 257);
        assert_eq!(t.len(), 65 * 513);
        let (p, t) = construct_sharp_2d(1.75, 1.75, 2f64.powi(-6)).unwrap();
        assert_eq!(p.len(), 33 * 65);
        assert_eq!(t.len(), 33 * 129);
        let (p, _) = construct_sharp_2d(2.0, 1.0, 2f64.powi(-5)).unwrap();
        assert_eq!(p.len(), 33 * 33);
        assert!(construct_sharp_2d(0.5, 1.5, 2f64.powi(-6)).is_err());
        assert!(construct_sharp_2d(1.5, 1.5, 2f64.powi(-3)).is_err());
        assert!(construct_sharp_2d(1.5, 1.5, 0.01).is_err());
    }

    #[test]
    fn lift_multiplies_points_and_keeps_planes() {
        let delta = 2f64.powi(-5);
        let (p2, t2) = construct_sharp_2d(1.5, 1.5, delta).unwrap();
        let (p, t) = lift_to_dim(&p2, &t2, 3, delta).unwrap();
        assert_eq!(t.len(), t2.len());
        assert_eq!(p.len(), p2.len() * 17);
        let (p4, t4) = lift_to_dim(&p2, &t2, 4, delta).unwrap();
        assert_eq!(p4.len(), p2.len() * 17 * 17);
        assert_eq!(t4.element(0).len(), 4);
        assert_eq!(&t4.element(3)[1..3], &[0.0, 0.0]);
        assert!(lift_to_dim(&p2, &t2, 2, delta).is_err());
        assert_eq!(p.element(1), &[0.0, 2.0 * delta, 0.0]);
    }

    #[test]
    fn coordinates_are_dyadic() {
        let delta = 2f64.powi(-6);
        let (p, t) = ConstructionSpec {
            d: 3,
            delta,
            s: 1.6,
            t: 1.3,
        }
        .build()
        .unwrap();
        let scale = 2f64.powi(6);
        for x in p.as_flat().iter().chain(t.as_flat()) {
            assert_eq!((x * scale).fract(), 0.0);
        }
    }

    #[test]
    fn grid_examples() {
        let delta = 2f64.powi(-4);
        assert_eq!(construct_grid(2, delta, &[1.0, 1.0]).unwrap().len(), 4);
        assert_eq!(
            construct_grid(2, delta, &[delta, delta]).unwrap().len(),
            17 * 17
        );
        assert_eq!(
            construct_grid(3, delta, &[0.25, delta, 0.5]).unwrap().len(),
            5 * 17 * 3
        );
        assert!(construct_grid(2, delta, &[delta / 2.0, 1.0]).is_err());
        assert!(construct_grid(2, delta, &[1.0]).is_err());
    }

    #[test]
    fn grid_dimension_follows_spacings() {
        let delta = 2f64.powi(-8);
        let full = construct_grid(2, delta, &[delta, delta]).unwrap();
        assert!(best_dimension(&full, 4.0).unwrap() >= 1.9);
        let half = construct_grid(2, delta, &[delta.sqrt(), delta]).unwrap();
        let dim = best_dimension(&half, 4.0).unwrap();
        assert!((dim - 1.5).abs() <= 0.1, "{dim}");
    }

    #[test]
    fn random_families() {
        let one = construct_random(FamilyKind::Points, 3, 0.5, 1, 7).unwrap();
        assert_eq!(one.len(), 1);
        let a = construct_random(FamilyKind::Points, 2, 2f64.powi(-8), 1000, 3).unwrap();
        let b = construct_random(FamilyKind::Points, 2, 2f64.powi(-8), 1000, 3).unwrap();
        assert_eq!(a, b);
        assert!(min_separation(&a) >= 2f64.powi(-8));
        assert!(a.max_norm() <= 1.0);
        let planes = construct_random(FamilyKind::Hyperplanes, 3, 0.05, 300, 1).unwrap();
        assert!(min_separation(&planes) >= 0.05);
        assert!(matches!(
            construct_random(FamilyKind::Points, 2, 0.9, 50, 0),
            Err(Error::Infeasible(_))
        ));
    }
}
