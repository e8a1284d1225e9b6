//! Closed-form incidence bounds of the form `|P|^a |Π|^b δ^e`.
//!
//! Every evaluator returns its exponents; values are filled in by
//! [`BoundValue::instantiate`] once `δ`, `|P|` and `|Π|` are known. The `ε`
//! losses are explicit parameters and are folded into `delta_exponent`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub name: String,
    pub delta_exponent: f64,
    pub point_count_exponent: f64,
    pub plane_count_exponent: f64,
    pub epsilon: f64,
    pub value: Option<f64>,
    pub regime: String,
}

impl BoundValue {
    fn new(name: &str, delta_exponent: f64, regime: impl Into<String>) -> Self {
        BoundValue {
            name: name.to_string(),
            delta_exponent,
            point_count_exponent: 1.0,
            plane_count_exponent: 1.0,
            epsilon: 0.0,
            value: None,
            regime: regime.into(),
        }
    }

    /// `|P|^a |Π|^b δ^e`. Zero counts give zero for positive count exponents.
    pub fn evaluate(&self, delta: f64, n_points: usize, n_planes: usize) -> f64 {
        (n_points as f64).powf(self.point_count_exponent)
            * (n_planes as f64).powf(self.plane_count_exponent)
            * delta.powf(self.delta_exponent)
    }

    pub fn instantiate(mut self, delta: f64, n_points: usize, n_planes: usize) -> Self {
        self.value = Some(self.evaluate(delta, n_points, n_planes));
        self
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

/// Planar point–tube exponent: `I ≲ |P||T| δ^e`, taking the first case that
/// applies in the order (1) `st/(s+t)`, (2) `st/(1+s)`, (3) `st/(1+t)`,
/// (4) `κ(s+t−1)` with `κ = min(1/2, 1/(s+t−1))`.
pub fn thm2d_exponent(s: f64, t: f64) -> Result<BoundValue> {
    if !(0.0..=2.0).contains(&s) || !(0.0..=2.0).contains(&t) {
        return Err(Error::invalid(format!(
            "planar exponents need 0 <= s, t <= 2, got s = {s}, t = {t}"
        )));
    }
    let (e, regime) = if (1.0 >= t && t >= s) || (1.0 >= s && s >= t) {
        let e = if s + t == 0.0 { 0.0 } else { s * t / (s + t) };
        (e, "case 1: s, t <= 1, exponent st/(s+t)".to_string())
    } else if t >= 1.0 && 1.0 >= s && s >= t - 1.0 {
        (
            s * t / (1.0 + s),
            "case 2: t >= 1 >= s >= t-1, exponent st/(1+s)".to_string(),
        )
    } else if s >= 1.0 && 1.0 >= t && t >= s - 1.0 {
        (
            s * t / (1.0 + t),
            "case 3: s >= 1 >= t >= s-1, exponent st/(1+t)".to_string(),
        )
    } else if t > 1.0 && s > 1.0 {
        let kappa = f64::min(0.5, 1.0 / (s + t - 1.0));
        (
            kappa * (s + t - 1.0),
            format!("case 4: s, t > 1, kappa = {kappa}, exponent kappa(s+t-1)"),
        )
    } else {
        return Err(Error::Infeasible(format!(
            "no case applies to s = {s}, t = {t}"
        )));
    };
    Ok(BoundValue::new("planar", e, regime))
}

/// `δ |P| |Π|`, the sharp bound for `s, t > (d+1)/2`.
pub fn main_bound(delta: f64, n_points: usize, n_planes: usize) -> Result<BoundValue> {
    check_delta(delta)?;
    Ok(BoundValue::new("main", 1.0, "s, t > (d+1)/2").instantiate(delta, n_points, n_planes))
}

/// `f(t) = 1/2` for `t >= 1`, `t/(1+t)` below.
pub fn f_of_t(t: f64) -> f64 {
    if t >= 1.0 {
        0.5
    } else {
        t / (1.0 + t)
    }
}

/// Cauchy–Schwarz bound `|P||Π| δ^{f(t)(s−d+2) − ε}`; needs `s − d + 2 > 0`.
pub fn cs_bound_exponent(s: f64, t: f64, d: usize, epsilon: f64) -> Result<BoundValue> {
    if !(epsilon >= 0.0) {
        return Err(Error::invalid(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    let gap = s - d as f64 + 2.0;
    if !(gap > 0.0) {
        return Err(Error::AssumptionViolated {
            assumption: "s-d+2 > 0".into(),
        });
    }
    let mut b = BoundValue::new(
        "cauchy_schwarz",
        f_of_t(t) * gap - epsilon,
        format!("f(t) = {}, s-d+2 = {gap}", f_of_t(t)),
    );
    b.epsilon = epsilon;
    Ok(b)
}

/// Bound for merely δ-separated plane sets:
/// `δ^{(d−1)(s+1−d)/(2d−1−s)} |P| |Π|^{(d−1)/(2d−1−s)}`, for `s > 1`.
pub fn dov_bound(
    delta: f64,
    s: f64,
    d: usize,
    n_points: usize,
    n_planes: usize,
) -> Result<BoundValue> {
    check_delta(delta)?;
    if !(s > 1.0) {
        return Err(Error::AssumptionViolated {
            assumption: "s > 1".into(),
        });
    }
    let d = d as f64;
    let denom = 2.0 * d - 1.0 - s;
    if !(denom > 0.0) {
        return Err(Error::AssumptionViolated {
            assumption: "2d-1-s > 0".into(),
        });
    }
    let mut b = BoundValue::new(
        "separated_planes",
        (d - 1.0) * (s + 1.0 - d) / denom,
        "s > 1, delta-separated planes",
    );
    b.plane_count_exponent = (d - 1.0) / denom;
    Ok(b.instantiate(delta, n_points, n_planes))
}

/// Plane-count window `δ^{-t} ≲ |Π| ≤ δ^{upper_exponent}` where the
/// Cauchy–Schwarz bound beats the separated-planes bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRange {
    pub m: f64,
    pub m_prime: f64,
    /// `|Π| ≳ δ^{lower_exponent}`, i.e. `-t`
    pub lower_exponent: f64,
    pub upper_exponent: f64,
    /// the sufficient condition as stated: `2t <= s+1 < d` for `t >= 1`,
    /// `d-2 < s < d-1` for `t < 1`
    pub nonempty_stated: bool,
    /// `δ^{-t} <= δ^{upper_exponent}` for small δ
    pub nonempty_numeric: bool,
}

pub fn comparison_range(s: f64, t: f64, d: usize) -> Result<ComparisonRange> {
    let d = d as f64;
    let denom = 2.0 * d - 1.0 - s;
    if !(denom > 0.0) {
        return Err(Error::AssumptionViolated {
            assumption: "2d-1-s > 0".into(),
        });
    }
    if !(d > s) {
        return Err(Error::AssumptionViolated {
            assumption: "d > s".into(),
        });
    }
    let m = (d - 1.0) * (s + 1.0 - d) / denom - (s - d + 2.0) / 2.0;
    let m_prime = m - (t / (t + 1.0) - 0.5) * (s - d + 2.0);
    let active = if t >= 1.0 { m } else { m_prime };
    let upper_exponent = active * denom / (d - s);
    let nonempty_stated = if t >= 1.0 {
        2.0 * t <= s + 1.0 && s + 1.0 < d
    } else {
        d - 2.0 < s && s < d - 1.0
    };
    Ok(ComparisonRange {
        m,
        m_prime,
        lower_exponent: -t,
        upper_exponent,
        nonempty_stated,
        nonempty_numeric: upper_exponent <= -t,
    })
}
