//! Points and non-vertical hyperplanes in `R^d`.
//!
//! A [`Hyperplane`] with coefficients `(a_1, …, a_d)` is the set
//! `{x : x_d = a_1 x_1 + … + a_{d-1} x_{d-1} + a_d}`. Its normal is
//! `u = (a_1, …, a_{d-1}, -1)` and `Ψ(x, a) = a·x' − x_d + a_d` is the signed
//! defining function, so the Euclidean distance from `x` is `|Ψ| / |u|`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Upper bound on `|a_i|`, `i < d`, for hyperplanes admitted into families.
pub const MAX_SLOPE: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_vector(&coords, "point")?;
        Ok(Point(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        euclidean_norm(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane(Vec<f64>);

impl Hyperplane {
    /// Accepts any finite coefficient vector of length `d >= 2`. Family
    /// membership additionally requires [`Hyperplane::validate_member`].
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        check_vector(&coeffs, "hyperplane")?;
        Ok(Hyperplane(coeffs))
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn slopes(&self) -> &[f64] {
        &self.0[..self.0.len() - 1]
    }

    pub fn intercept(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// `u = (a_1, …, a_{d-1}, -1)`.
    pub fn normal(&self) -> Vec<f64> {
        let mut u = self.slopes().to_vec();
        u.push(-1.0);
        u
    }

    pub fn normal_norm(&self) -> f64 {
        normal_norm(&self.0)
    }

    /// Distance from the origin, `|a_d| / |u|`.
    pub fn origin_distance(&self) -> f64 {
        self.intercept().abs() / self.normal_norm()
    }

    /// Slope cap and unit-ball intersection, required of family members.
    pub fn validate_member(&self) -> Result<()> {
        validate_plane_coeffs(&self.0)
    }
}

pub(crate) fn validate_plane_coeffs(coeffs: &[f64]) -> Result<()> {
    let d = coeffs.len();
    if let Some(a) = coeffs[..d - 1].iter().find(|a| a.abs() > MAX_SLOPE) {
        return Err(Error::invalid(format!(
            "hyperplane slope {a} exceeds the cap {MAX_SLOPE}"
        )));
    }
    let dist = coeffs[d - 1].abs() / normal_norm(coeffs);
    if dist > 1.0 {
        return Err(Error::invalid(format!(
            "hyperplane misses the unit ball (origin distance {dist})"
        )));
    }
    Ok(())
}

fn check_vector(v: &[f64], what: &str) -> Result<()> {
    if v.len() < 2 {
        return Err(Error::invalid(format!(
            "{what} must have dimension >= 2, got {}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{what} has a non-finite entry")));
    }
    Ok(())
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub(crate) fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `|u|` for a coefficient slice. Every caller goes through this so that the
/// oracle and accelerated counters see bit-identical normalisations.
#[inline]
pub(crate) fn normal_norm(coeffs: &[f64]) -> f64 {
    let d = coeffs.len();
    let mut acc = 1.0;
    for a in &coeffs[..d - 1] {
        acc += a * a;
    }
    acc.sqrt()
}

/// `Ψ(x, a) = a_1 x_1 + … + a_{d-1} x_{d-1} − x_d + a_d`.
#[inline]
pub(crate) fn psi(coeffs: &[f64], x: &[f64]) -> f64 {
    let d = coeffs.len();
    let mut acc = 0.0;
    for i in 0..d - 1 {
        acc += coeffs[i] * x[i];
    }
    acc - x[d - 1] + coeffs[d - 1]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredicateMode {
    /// Euclidean distance to the plane is at most `Cδ`.
    #[default]
    Euclidean,
    /// `|Ψ(x, a)| <= Cδ`, i.e. vertical distance.
    Psi,
}

impl fmt::Display for PredicateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredicateMode::Euclidean => f.write_str("euclidean"),
            PredicateMode::Psi => f.write_str("psi"),
        }
    }
}

impl FromStr for PredicateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(PredicateMode::Euclidean),
            "psi" => Ok(PredicateMode::Psi),
            other => Err(Error::invalid(format!(
                "unknown predicate mode {other:?} (expected euclidean or psi)"
            ))),
        }
    }
}

/// A hyperplane with its normalisation cached, ready for repeated slab tests.
#[derive(Clone, Debug)]
pub(crate) struct Slab<'a> {
    pub coeffs: &'a [f64],
    pub norm: f64,
    pub cdelta: f64,
    pub mode: PredicateMode,
}

impl<'a> Slab<'a> {
    pub fn new(coeffs: &'a [f64], cdelta: f64, mode: PredicateMode) -> Self {
        Slab {
            coeffs,
            norm: normal_norm(coeffs),
            cdelta,
            mode,
        }
    }

    /// The single incidence expression shared by every counter.
    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        let v = psi(self.coeffs, x).abs();
        match self.mode {
            PredicateMode::Euclidean => v / self.norm <= self.cdelta,
            PredicateMode::Psi => v <= self.cdelta,
        }
    }

    /// Threshold on `|Ψ|` equivalent to the predicate, in exact arithmetic.
    pub fn psi_threshold(&self) -> f64 {
        match self.mode {
            PredicateMode::Euclidean => self.cdelta * self.norm,
            PredicateMode::Psi => self.cdelta,
        }
    }
}

pub fn point_plane_distance(p: &Point, plane: &Hyperplane) -> Result<f64> {
    check_dims(plane.dim(), p.dim())?;
    Ok(psi(plane.coeffs(), p.coords()).abs() / plane.normal_norm())
}

/// Whether `p` lies in the closed `cdelta`-neighbourhood of `plane`.
pub fn incidence_predicate(
    p: &Point,
    plane: &Hyperplane,
    cdelta: f64,
    mode: PredicateMode,
) -> Result<bool> {
    check_dims(plane.dim(), p.dim())?;
    if !(cdelta > 0.0) {
        return Err(Error::invalid(format!(
            "cdelta must be positive, got {cdelta}"
        )));
    }
    Ok(Slab::new(plane.coeffs(), cdelta, mode).contains(p.coords()))
}

/// Unit normal `u/|u|` and normalised intercept `a_d/|u|`.
pub(crate) fn normalized(coeffs: &[f64]) -> (Vec<f64>, f64) {
    let d = coeffs.len();
    let n = normal_norm(coeffs);
    let mut unit: Vec<f64> = coeffs[..d - 1].iter().map(|a| a / n).collect();
    unit.push(-1.0 / n);
    (unit, coeffs[d - 1] / n)
}

pub(crate) fn affine_metric_raw(c1: &[f64], c2: &[f64]) -> f64 {
    let (n1, h1) = normalized(c1);
    let (n2, h2) = normalized(c2);
    affine_metric_normalized(&n1, h1, &n2, h2)
}

/// `d_A` from outputs of [`normalized`].
#[inline]
pub(crate) fn affine_metric_normalized(n1: &[f64], h1: f64, n2: &[f64], h2: f64) -> f64 {
    let normal_gap = n1
        .iter()
        .zip(n2)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    normal_gap + (h1 - h2).abs()
}

/// `d_A(π1, π2) = |u/|u| − v/|v|| + |a_d/|u| − b_d/|v||`.
pub fn affine_metric(p1: &Hyperplane, p2: &Hyperplane) -> Result<f64> {
    check_dims(p1.dim(), p2.dim())?;
    if p1 == p2 {
        return Ok(0.0);
    }
    Ok(affine_metric_raw(p1.coeffs(), p2.coeffs()))
}

/// Code-space coordinates: vertical intercept and slopes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodePoint {
    pub vertical_intercept: f64,
    pub slopes: Vec<f64>,
}

impl CodePoint {
    /// `(a0, b_1, …, b_{d-1})` as a flat vector.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.slopes.len() + 1);
        v.push(self.vertical_intercept);
        v.extend_from_slice(&self.slopes);
        v
    }
}

pub fn code_coordinates(plane: &Hyperplane) -> CodePoint {
    CodePoint {
        vertical_intercept: plane.intercept(),
        slopes: plane.slopes().to_vec(),
    }
}

/// Writes `(a_d, a_1, …, a_{d-1})` into `out`.
pub(crate) fn code_embed(coeffs: &[f64], out: &mut Vec<f64>) {
    let d = coeffs.len();
    out.push(coeffs[d - 1]);
    out.extend_from_slice(&coeffs[..d - 1]);
}

/// Maximum metric on code space.
pub fn code_metric(c1: &CodePoint, c2: &CodePoint) -> Result<f64> {
    check_dims(c1.slopes.len(), c2.slopes.len())?;
    let slope_gap = c1
        .slopes
        .iter()
        .zip(&c2.slopes)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(slope_gap.max((c1.vertical_intercept - c2.vertical_intercept).abs()))
}

pub fn dual_point(plane: &Hyperplane) -> Point {
    Point(plane.0.clone())
}

/// Exact inverse of [`dual_point`].
pub fn dual_plane(x: &Point) -> Hyperplane {
    Hyperplane(x.0.clone())
}

/// Bordered mixed Hessian of `Ψ(x, a) = a·x' − x_d + a_d`:
///
/// ```text
/// | 0        ∇_x Ψ        |
/// | −∇_a Ψ   ∂²Ψ/∂a_j∂x_i |
/// ```
pub fn phong_stein_matrix(x: &Point, a: &Point) -> Result<Vec<Vec<f64>>> {
    check_dims(x.dim(), a.dim())?;
    let d = x.dim();
    let mut m = vec![vec![0.0; d + 1]; d + 1];
    for i in 0..d - 1 {
        m[0][i + 1] = a.0[i];
        m[i + 1][0] = -x.0[i];
        m[i + 1][i + 1] = 1.0;
    }
    m[0][d] = -1.0;
    m[d][0] = -1.0;
    Ok(m)
}

pub fn phong_stein_determinant(x: &Point, a: &Point) -> Result<f64> {
    Ok(determinant(phong_stein_matrix(x, a)?))
}

/// Gaussian elimination with partial pivoting.
pub(crate) fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor != 0.0 {
                for k in col..n {
                    m[row][k] -= factor * m[col][k];
                }
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    fn pl(v: &[f64]) -> Hyperplane {
        Hyperplane::new(v.to_vec()).unwrap()
    }

    /// Distance via an explicit orthogonal projection onto the plane.
    fn projection_distance(p: &[f64], coeffs: &[f64]) -> f64 {
        let d = p.len();
        // point on the plane above the origin, and the unit normal
        let mut base = vec![0.0; d];
        base[d - 1] = coeffs[d - 1];
        let mut n: Vec<f64> = coeffs[..d - 1].to_vec();
        n.push(-1.0);
        let len = n.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = p.iter().zip(&base).map(|(a, b)| a - b).collect();
        let along: f64 = diff.iter().zip(&n).map(|(a, b)| a * b).sum::<f64>() / len;
        let proj: Vec<f64> = diff
            .iter()
            .zip(&n)
            .map(|(x, ni)| x - along * ni / len)
            .collect();
        diff.iter()
            .zip(&proj)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(
            point_plane_distance(&pt(&[0.5, 0.0]), &pl(&[0.0, 0.0])).unwrap(),
            0.0
        );
        let d = point_plane_distance(&pt(&[0.0, 1.0]), &pl(&[1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(
            d,
            projection_distance(&[0.0, 1.0], &[1.0, 0.0]),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(d, 0.70711, epsilon = 1e-5);
        let d3 = point_plane_distance(&pt(&[0.1, 0.4, 0.2]), &pl(&[0.0, 0.0, 0.2])).unwrap();
        assert_eq!(d3, 0.0);
    }

    #[test]
    fn distance_matches_projection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let d = rng.gen_range(2..=5);
            let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let got = point_plane_distance(&pt(&p), &pl(&c)).unwrap();
            assert_abs_diff_eq!(got, projection_distance(&p, &c), epsilon = 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let err = point_plane_distance(&pt(&[0.0, 0.0, 0.0]), &pl(&[0.0, 0.0])).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                found: 3
            }
        ));
        assert!(affine_metric(&pl(&[0.0, 0.0]), &pl(&[0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn predicate_modes_diverge() {
        let cd = 0.01;
        let on = pt(&[0.3, 0.3]);
        for mode in [PredicateMode::Euclidean, PredicateMode::Psi] {
            assert!(incidence_predicate(&on, &pl(&[1.0, 0.0]), cd, mode).unwrap());
        }
        let above = pt(&[0.0, 2.0 * cd]);
        assert!(
            !incidence_predicate(&above, &pl(&[0.0, 0.0]), cd, PredicateMode::Euclidean).unwrap()
        );

        let diag = pl(&[1.0, 0.0]);
        let p12 = pt(&[0.0, 1.2 * cd]);
        assert!(!incidence_predicate(&p12, &diag, cd, PredicateMode::Psi).unwrap());
        assert!(incidence_predicate(&p12, &diag, cd, PredicateMode::Euclidean).unwrap());
        let p15 = pt(&[0.0, 1.5 * cd]);
        assert!(!incidence_predicate(&p15, &diag, cd, PredicateMode::Psi).unwrap());
        assert!(!incidence_predicate(&p15, &diag, cd, PredicateMode::Euclidean).unwrap());
    }

    #[test]
    fn predicate_boundary_is_inclusive() {
        // dyadic data: distance exactly 1/16
        let plane = pl(&[0.0, 0.25]);
        let p = pt(&[0.5, 0.3125]);
        assert!(incidence_predicate(&p, &plane, 0.0625, PredicateMode::Euclidean).unwrap());
        assert!(incidence_predicate(&p, &plane, 0.0625, PredicateMode::Psi).unwrap());
        assert!(incidence_predicate(&p, &plane, 0.0, PredicateMode::Psi).is_err());
    }

    #[test]
    fn affine_metric_examples() {
        let a = pl(&[0.3, -0.2, 0.1]);
        assert_eq!(affine_metric(&a, &a).unwrap(), 0.0);
        let h = 0.37;
        let v = affine_metric(&pl(&[0.0, 0.0, 0.0]), &pl(&[0.0, 0.0, h])).unwrap();
        assert_abs_diff_eq!(v, h, epsilon = 1e-15);
        let v2 = affine_metric(&pl(&[0.0, 0.0]), &pl(&[1.0, 0.0])).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(v2, (0.5 + (1.0 - s) * (1.0 - s)).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(v2, 0.76537, epsilon = 1e-5);
    }

    #[test]
    fn code_coordinates_examples() {
        let c = code_coordinates(&pl(&[2.0, 3.0]));
        assert_eq!(c.vertical_intercept, 3.0);
        assert_eq!(c.slopes, vec![2.0]);
        assert_eq!(code_metric(&c, &c).unwrap(), 0.0);
        let c1 = CodePoint {
            vertical_intercept: 0.0,
            slopes: vec![0.0],
        };
        let c2 = CodePoint {
            vertical_intercept: 0.5,
            slopes: vec![0.2],
        };
        assert_eq!(code_metric(&c1, &c2).unwrap(), 0.5);
    }

    #[test]
    fn duality_examples() {
        let x = pt(&[0.3, -0.1, 0.05]);
        assert_eq!(dual_point(&dual_plane(&x)), x);
        assert_eq!(dual_point(&pl(&[2.0, 3.0])).coords(), &[2.0, 3.0]);
        assert_eq!(dual_point(&pl(&[0.0, 0.0])).coords(), &[0.0, 0.0]);
    }

    #[test]
    fn member_validation() {
        assert!(pl(&[0.5, 0.9]).validate_member().is_ok());
        assert!(pl(&[10.5, 0.0]).validate_member().is_err());
        // origin distance 2/sqrt(2) > 1
        assert!(pl(&[1.0, 2.0]).validate_member().is_err());
        assert!(Hyperplane::new(vec![f64::INFINITY, 0.0]).is_err());
        assert!(Point::new(vec![1.0]).is_err());
    }

    /// Fraction-free (Bareiss) elimination over i128.
    fn bareiss(mut m: Vec<Vec<i128>>) -> i128 {
        let n = m.len();
        let mut sign = 1;
        let mut prev = 1i128;
        for k in 0..n - 1 {
            if m[k][k] == 0 {
                let Some(swap) = (k + 1..n).find(|&i| m[i][k] != 0) else {
                    return 0;
                };
                m.swap(k, swap);
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
                }
            }
            prev = m[k][k];
        }
        sign * m[n - 1][n - 1]
    }

    #[test]
    fn phong_stein_matches_exact_oracle_at_integer_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 2..=6 {
            for _ in 0..20 {
                let x: Vec<i64> = (0..d).map(|_| rng.gen_range(-9..=9)).collect();
                let a: Vec<i64> = (0..d).map(|_| rng.gen_range(-9..=9)).collect();
                let xf = pt(&x.iter().map(|&v| v as f64).collect::<Vec<_>>());
                let af = pt(&a.iter().map(|&v| v as f64).collect::<Vec<_>>());
                let m = phong_stein_matrix(&xf, &af).unwrap();
                let exact = bareiss(
                    m.iter()
                        .map(|row| row.iter().map(|&v| v as i128).collect())
                        .collect(),
                );
                assert_eq!(exact, -1, "d = {d}");
                assert_abs_diff_eq!(
                    phong_stein_determinant(&xf, &af).unwrap(),
                    exact as f64,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn phong_stein_unit_modulus_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for d in 2..=6 {
            for _ in 0..100 {
                let x = pt(&(0..d).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
                let a = pt(&(0..d).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
                let det = phong_stein_determinant(&x, &a).unwrap();
                assert_abs_diff_eq!(det.abs(), 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn determinant_of_known_matrices() {
        assert_eq!(determinant(vec![vec![2.0, 0.0], vec![0.0, 3.0]]), 6.0);
        assert_eq!(determinant(vec![vec![0.0, 1.0], vec![1.0, 0.0]]), -1.0);
        assert_eq!(determinant(vec![vec![1.0, 2.0], vec![2.0, 4.0]]), 0.0);
    }
}
