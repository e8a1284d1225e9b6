//! δ-annotated families of points or hyperplanes, stored as flat coordinate buffers.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{self, Hyperplane, Point};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Points,
    Hyperplanes,
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::Points => f.write_str("points"),
            FamilyKind::Hyperplanes => f.write_str("hyperplanes"),
        }
    }
}

/// Claimed `(s, C)` regularity, carried as metadata only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityClaim {
    pub s: f64,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Family {
    kind: FamilyKind,
    dim: usize,
    delta: f64,
    data: Vec<f64>,
    pub meta: Option<RegularityClaim>,
}

impl Family {
    /// Builds a family from a flat buffer of `len * dim` coordinates.
    ///
    /// Checks: `dim >= 2`, `delta in (0, 1)`, finite entries, pairwise distinct
    /// elements, and for hyperplanes the slope cap and unit-ball intersection.
    pub fn from_flat(kind: FamilyKind, dim: usize, delta: f64, data: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid(format!("dimension must be >= 2, got {dim}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        if data.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "coordinate buffer of length {} is not a multiple of dim {dim}",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("family contains a non-finite coordinate"));
        }
        if kind == FamilyKind::Hyperplanes {
            for (i, c) in data.chunks_exact(dim).enumerate() {
                geometry::validate_plane_coeffs(c)
                    .map_err(|e| Error::invalid(format!("element {i}: {e}")))?;
            }
        }
        let mut seen = HashSet::with_capacity(data.len() / dim);
        for (i, c) in data.chunks_exact(dim).enumerate() {
            // +0.0 and -0.0 are the same element
            let key: Vec<u64> = c.iter().map(|x| (x + 0.0).to_bits()).collect();
            if !seen.insert(key) {
                return Err(Error::invalid(format!("element {i} is a duplicate")));
            }
        }
        Ok(Family {
            kind,
            dim,
            delta,
            data,
            meta: None,
        })
    }

    pub fn points(dim: usize, delta: f64, data: Vec<f64>) -> Result<Self> {
        Self::from_flat(FamilyKind::Points, dim, delta, data)
    }

    pub fn hyperplanes(dim: usize, delta: f64, data: Vec<f64>) -> Result<Self> {
        Self::from_flat(FamilyKind::Hyperplanes, dim, delta, data)
    }

    pub fn from_points(delta: f64, points: &[Point]) -> Result<Self> {
        let dim = points.first().map_or(2, Point::dim);
        let mut data = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            data.extend_from_slice(p.coords());
        }
        Self::points(dim, delta, data)
    }

    pub fn from_hyperplanes(delta: f64, planes: &[Hyperplane]) -> Result<Self> {
        let dim = planes.first().map_or(2, Hyperplane::dim);
        let mut data = Vec::with_capacity(planes.len() * dim);
        for p in planes {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            data.extend_from_slice(p.coeffs());
        }
        Self::hyperplanes(dim, delta, data)
    }

    pub fn with_meta(mut self, s: f64, c: f64) -> Self {
        self.meta = Some(RegularityClaim { s, c });
        self
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn element(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn point(&self, i: usize) -> Point {
        Point::new(self.element(i).to_vec()).expect("family elements are valid")
    }

    pub fn hyperplane(&self, i: usize) -> Hyperplane {
        Hyperplane::new(self.element(i).to_vec()).expect("family elements are valid")
    }

    /// Largest Euclidean norm over the elements (points) or coefficient vectors.
    pub fn max_norm(&self) -> f64 {
        self.iter()
            .map(geometry::euclidean_norm)
            .fold(0.0, f64::max)
    }

    /// Dual point family of a hyperplane family: the coefficient vectors as points.
    pub fn dual(&self) -> Result<Family> {
        if self.kind != FamilyKind::Hyperplanes {
            return Err(Error::KindMismatch(
                "dual requires a hyperplane family".into(),
            ));
        }
        Ok(Family {
            kind: FamilyKind::Points,
            dim: self.dim,
            delta: self.delta,
            data: self.data.clone(),
            meta: self.meta,
        })
    }

    pub(crate) fn expect_kind(&self, kind: FamilyKind, role: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::KindMismatch(format!(
                "{role} must be a {kind} family, got {}",
                self.kind
            )));
        }
        Ok(())
    }
}
