//! Counting `I_{Cδ}(P, Π) = #{(p, π) : p ∈ π(Cδ)}` and dyadic annuli of planes.
//!
//! Both counters evaluate membership through the same slab expression, so the
//! accelerated counter reproduces the oracle exactly, histograms included.

mod annulus;
mod fast;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::family::{Family, FamilyKind};
use crate::geometry::{PredicateMode, Slab};
use crate::{Error, Result};

pub use annulus::{
    annulus_growth_check, annulus_partition, AnnulusPartition, GrowthCheck, GrowthRow,
};
pub use fast::count_incidences_fast;

/// Sparse histogram: value → multiplicity. Serialises as `[[value, multiplicity], …]`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<(u64, u64)>", from = "Vec<(u64, u64)>")]
pub struct Histogram(pub BTreeMap<u64, u64>);

impl Histogram {
    pub fn from_values(values: impl IntoIterator<Item = u64>) -> Self {
        let mut map = BTreeMap::new();
        for v in values {
            *map.entry(v).or_insert(0) += 1;
        }
        Histogram(map)
    }

    /// `Σ value · multiplicity`
    pub fn mass(&self) -> u64 {
        self.0.iter().map(|(v, m)| v * m).sum()
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }
}

impl From<Histogram> for Vec<(u64, u64)> {
    fn from(h: Histogram) -> Self {
        h.0.into_iter().collect()
    }
}

impl From<Vec<(u64, u64)>> for Histogram {
    fn from(v: Vec<(u64, u64)>) -> Self {
        Histogram(v.into_iter().collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncidenceReport {
    pub count: u64,
    pub cdelta: f64,
    pub mode: PredicateMode,
    pub delta: f64,
    pub n_points: usize,
    pub n_planes: usize,
    /// `count / (δ |P| |Π|)`, 0 when either family is empty
    pub ratio: f64,
    /// distribution of `|{p : p ∈ π(Cδ)}|` over planes
    pub per_plane: Histogram,
    /// distribution of `|I(p)|` over points
    pub per_point: Histogram,
}

impl IncidenceReport {
    pub(crate) fn assemble(
        points: &Family,
        planes: &Family,
        cdelta: f64,
        mode: PredicateMode,
        per_plane: &[u64],
        per_point: &[u64],
    ) -> Result<Self> {
        let count: u64 = per_plane.iter().sum();
        let delta = points.delta();
        let bound = bounds::main_bound(delta, points.len(), planes.len())?
            .value
            .unwrap_or(0.0);
        Ok(IncidenceReport {
            count,
            cdelta,
            mode,
            delta,
            n_points: points.len(),
            n_planes: planes.len(),
            ratio: if bound > 0.0 {
                count as f64 / bound
            } else {
                0.0
            },
            per_plane: Histogram::from_values(per_plane.iter().copied()),
            per_point: Histogram::from_values(per_point.iter().copied()),
        })
    }
}

pub(crate) fn check_inputs(points: &Family, planes: &Family, cdelta: f64) -> Result<()> {
    points.expect_kind(FamilyKind::Points, "first family")?;
    planes.expect_kind(FamilyKind::Hyperplanes, "second family")?;
    if points.dim() != planes.dim() {
        return Err(Error::DimensionMismatch {
            expected: points.dim(),
            found: planes.dim(),
        });
    }
    if points.delta() != planes.delta() {
        return Err(Error::invalid(format!(
            "families carry different scales: {} and {}",
            points.delta(),
            planes.delta()
        )));
    }
    if !(cdelta > 0.0 && cdelta.is_finite()) {
        return Err(Error::invalid(format!(
            "cdelta must be positive, got {cdelta}"
        )));
    }
    Ok(())
}

/// Exact double loop over `P × Π`.
pub fn count_incidences_oracle(
    points: &Family,
    planes: &Family,
    cdelta: f64,
    mode: PredicateMode,
) -> Result<IncidenceReport> {
    check_inputs(points, planes, cdelta)?;
    let mut per_plane = vec![0u64; planes.len()];
    let mut per_point = vec![0u64; points.len()];
    for (k, coeffs) in planes.iter().enumerate() {
        let slab = Slab::new(coeffs, cdelta, mode);
        for (i, x) in points.iter().enumerate() {
            if slab.contains(x) {
                per_plane[k] += 1;
                per_point[i] += 1;
            }
        }
    }
    IncidenceReport::assemble(points, planes, cdelta, mode, &per_plane, &per_point)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(super) fn grid_points(delta: f64) -> Family {
        let m = (1.0 / delta).round() as usize;
        let data = (0..=m)
            .flat_map(|i| (0..=m).flat_map(move |j| [i as f64 * delta, j as f64 * delta]))
            .collect();
        Family::points(2, delta, data).unwrap()
    }

    pub(super) fn horizontal_lines(delta: f64) -> Family {
        let m = (1.0 / delta).round() as usize;
        let data = (0..=m).flat_map(|j| [0.0, j as f64 * delta]).collect();
        Family::hyperplanes(2, delta, data).unwrap()
    }

    #[test]
    fn trivial_counts() {
        let p = Family::points(2, 0.125, vec![0.5, 0.0]).unwrap();
        let pl = Family::hyperplanes(2, 0.125, vec![0.0, 0.0]).unwrap();
        let r = count_incidences_oracle(&p, &pl, 0.125, PredicateMode::Euclidean).unwrap();
        assert_eq!(r.count, 1);
        let far = Family::points(2, 0.125, vec![0.5, 0.25]).unwrap();
        let r = count_incidences_oracle(&far, &pl, 0.125, PredicateMode::Euclidean).unwrap();
        assert_eq!(r.count, 0);
        assert_eq!(r.per_point.0.get(&0), Some(&1));
    }

    #[test]
    fn grid_against_horizontal_lines() {
        // each interior line holds three rows of 17 points, the two edge lines two rows
        let delta = 1.0 / 16.0;
        let r = count_incidences_oracle(
            &grid_points(delta),
            &horizontal_lines(delta),
            delta,
            PredicateMode::Euclidean,
        )
        .unwrap();
        assert_eq!(r.count, 15 * 3 * 17 + 2 * 2 * 17);
        assert_eq!(r.count, r.per_plane.mass());
        assert_eq!(r.count, r.per_point.mass());
        assert_eq!(r.per_plane.total(), 17);
        assert_eq!(r.per_point.total(), 289);
        assert_eq!(r.ratio, r.count as f64 / (delta * 289.0 * 17.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = Family::points(2, 0.125, vec![0.5, 0.0]).unwrap();
        let pl = Family::hyperplanes(2, 0.125, vec![0.0, 0.0]).unwrap();
        assert!(count_incidences_oracle(&p, &p, 0.1, PredicateMode::Psi).is_err());
        assert!(count_incidences_oracle(&pl, &pl, 0.1, PredicateMode::Psi).is_err());
        assert!(count_incidences_oracle(&p, &pl, 0.0, PredicateMode::Psi).is_err());
        let p3 = Family::points(3, 0.125, vec![0.5, 0.0, 0.0]).unwrap();
        assert!(count_incidences_oracle(&p3, &pl, 0.1, PredicateMode::Psi).is_err());
        let other = Family::hyperplanes(2, 0.25, vec![0.0, 0.0]).unwrap();
        assert!(count_incidences_oracle(&p, &other, 0.1, PredicateMode::Psi).is_err());
    }

    #[test]
    fn empty_planes_give_zero() {
        let p = Family::points(2, 0.125, vec![0.5, 0.0]).unwrap();
        let none = Family::hyperplanes(2, 0.125, vec![]).unwrap();
        let r = count_incidences_oracle(&p, &none, 0.1, PredicateMode::Euclidean).unwrap();
        assert_eq!((r.count, r.ratio), (0, 0.0));
    }

    #[test]
    fn histogram_serialises_as_pairs() {
        let h = Histogram::from_values([3, 1, 3]);
        let json = serde_json::to_string(&h).unwrap();
        assert_eq!(json, "[[1,1],[3,2]]");
        let back: Histogram = serde_json::from_str(&json).unwrap();
        assert_eq!(back, h);
    }
}
