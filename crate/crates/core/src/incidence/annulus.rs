use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::family::{Family, FamilyKind};
use crate::geometry::{self, Hyperplane};
use crate::{Error, Result};

/// Planes of a family grouped by `d_A` distance from a centre plane.
///
/// Bucket 0 holds distances below `δ`; bucket `i >= 1` holds `[2^{i-1}δ, 2^iδ)`.
/// Planes with the centre's exact coefficients are left out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusPartition {
    pub center: Vec<f64>,
    pub delta: f64,
    pub buckets: BTreeMap<u32, Vec<usize>>,
    /// index of the centre within the family, when it is a member
    pub excluded: Option<usize>,
}

impl AnnulusPartition {
    pub fn bucket_of(distance: f64, delta: f64) -> u32 {
        if distance < delta {
            return 0;
        }
        let mut i = 1;
        let mut upper = 2.0 * delta;
        while distance >= upper {
            i += 1;
            upper *= 2.0;
        }
        i
    }

    pub fn len(&self) -> usize {
        self.buckets.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn annulus_partition(planes: &Family, center: &Hyperplane) -> Result<AnnulusPartition> {
    planes.expect_kind(FamilyKind::Hyperplanes, "annulus family")?;
    if center.dim() != planes.dim() {
        return Err(Error::DimensionMismatch {
            expected: planes.dim(),
            found: center.dim(),
        });
    }
    let delta = planes.delta();
    let (nc, hc) = geometry::normalized(center.coeffs());
    let mut buckets: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    let mut excluded = None;
    for (k, coeffs) in planes.iter().enumerate() {
        if coeffs == center.coeffs() {
            excluded = Some(k);
            continue;
        }
        let (n, h) = geometry::normalized(coeffs);
        let dist = geometry::affine_metric_normalized(&nc, hc, &n, h);
        buckets
            .entry(AnnulusPartition::bucket_of(dist, delta))
            .or_default()
            .push(k);
    }
    Ok(AnnulusPartition {
        center: center.coeffs().to_vec(),
        delta,
        buckets,
        excluded,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub i: u32,
    pub size: usize,
    /// `size / ((2^i δ)^t |Π|)`
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheck {
    /// largest ratio over the buckets, 0 when there are none
    pub k: f64,
    pub table: Vec<GrowthRow>,
}

/// Compares annulus sizes with the `(2^i δ)^t |Π|` growth of a `t`-regular family.
pub fn annulus_growth_check(planes: &Family, center: &Hyperplane, t: f64) -> Result<GrowthCheck> {
    let part = annulus_partition(planes, center)?;
    let total = planes.len() as f64;
    let table: Vec<GrowthRow> = part
        .buckets
        .iter()
        .map(|(&i, members)| GrowthRow {
            i,
            size: members.len(),
            ratio: members.len() as f64 / ((2f64.powi(i as i32) * part.delta).powf(t) * total),
        })
        .collect();
    let k = table.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(GrowthCheck { k, table })
}
