//! Experiment configuration, single runs and δ-sweeps with JSON reports.
//!
//! A run builds or loads a point family and a hyperplane family, optionally
//! checks separation and regularity, counts incidences and annotates the count
//! with every bound whose assumptions hold. Numeric results depend only on the
//! configuration; wall-clock timings are kept in their own section so reports
//! can be compared without them.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundValue};
use crate::constructions::{construct_random, dyadic_level, ConstructionSpec};
use crate::family::{Family, FamilyKind, RegularityClaim};
use crate::geometry::PredicateMode;
use crate::incidence::{count_incidences_fast, count_incidences_oracle, IncidenceReport};
use crate::io::read_family;
use crate::regularity::{self, RegularityReport};
use crate::{Error, Result};

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    /// sharpness construction in dimension `dim` from `s`, `t`, `delta`
    Sharp,
    /// seeded random δ-separated families
    Random { n_points: usize, n_planes: usize },
    /// family files; `dim` and `delta` are taken from their headers
    Files { points: PathBuf, planes: PathBuf },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Counter {
    Oracle,
    #[default]
    Fast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    /// require `min_separation >= separation_factor · δ` for both families
    pub separation: bool,
    pub separation_factor: f64,
    /// require `c_star <= c_max` (points at exponent `s`, planes at `t`)
    pub regularity: bool,
    pub c_max: f64,
    /// require the incidence ratio to lie in `[lo, hi]`
    pub ratio_window: Option<(f64, f64)>,
}

impl Default for Checks {
    fn default() -> Self {
        Checks {
            separation: false,
            separation_factor: 0.5,
            regularity: false,
            c_max: 32.0,
            ratio_window: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub delta: f64,
    pub s: f64,
    pub t: f64,
    /// slab half-width is `c · δ`
    pub c: f64,
    pub mode: PredicateMode,
    pub seed: u64,
    pub source: Source,
    /// rayon threads; `None` uses the global pool
    pub workers: Option<usize>,
    pub counter: Counter,
    pub checks: Checks,
    /// ε loss in the Cauchy–Schwarz bound
    pub epsilon: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dim: 2,
            delta: 2f64.powi(-6),
            s: 1.75,
            t: 1.75,
            c: 1.0,
            mode: PredicateMode::Euclidean,
            seed: 0,
            source: Source::Sharp,
            workers: None,
            counter: Counter::Fast,
            checks: Checks::default(),
            epsilon: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub kind: FamilyKind,
    pub dim: usize,
    pub delta: f64,
    pub size: usize,
    /// largest Euclidean norm of an element (coefficient vector for planes)
    pub max_norm: f64,
    pub claim: Option<RegularityClaim>,
    pub min_separation: Option<f64>,
    pub regularity: Option<RegularityReport>,
}

impl FamilySummary {
    fn basic(f: &Family) -> Self {
        FamilySummary {
            kind: f.kind(),
            dim: f.dim(),
            delta: f.delta(),
            size: f.len(),
            max_norm: f.max_norm(),
            claim: f.meta,
            min_separation: None,
            regularity: None,
        }
    }
}

/// One evaluated bound, or the assumption that prevented evaluating it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundAnnotation {
    pub name: String,
    pub bound: Option<BoundValue>,
    /// incidence count divided by the bound value
    pub ratio: Option<f64>,
    pub violated: Option<String>,
}

impl BoundAnnotation {
    fn from_result(name: &str, result: Result<BoundValue>, count: u64) -> Result<Self> {
        match result {
            Ok(b) => {
                let ratio = b.value.filter(|&v| v > 0.0).map(|v| count as f64 / v);
                Ok(BoundAnnotation {
                    name: name.to_string(),
                    bound: Some(b),
                    ratio,
                    violated: None,
                })
            }
            Err(e @ (Error::AssumptionViolated { .. } | Error::Infeasible(_))) => {
                Ok(BoundAnnotation {
                    name: name.to_string(),
                    bound: None,
                    ratio: None,
                    violated: Some(e.to_string()),
                })
            }
            Err(e) => Err(e),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub build_s: f64,
    pub checks_s: f64,
    pub count_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub config: ExperimentConfig,
    pub points: FamilySummary,
    pub planes: FamilySummary,
    pub incidences: IncidenceReport,
    /// `incidences.count / (δ |P| |Π|)`
    pub ratio: f64,
    pub bounds: Vec<BoundAnnotation>,
    pub checks: Vec<CheckOutcome>,
    pub timings: Timings,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialise")
    }

    /// JSON of everything except the timings.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("reports serialise");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timings");
        }
        serde_json::to_string_pretty(&v).expect("reports serialise")
    }
}

/// Builds or loads the two families named by the configuration.
pub fn load_families(config: &ExperimentConfig) -> Result<(Family, Family)> {
    match &config.source {
        Source::Sharp => {
            dyadic_level(config.delta)?;
            ConstructionSpec {
                d: config.dim,
                delta: config.delta,
                s: config.s,
                t: config.t,
            }
            .build()
        }
        Source::Random { n_points, n_planes } => Ok((
            construct_random(FamilyKind::Points, config.dim, config.delta, *n_points, config.seed)?,
            construct_random(
                FamilyKind::Hyperplanes,
                config.dim,
                config.delta,
                *n_planes,
                config.seed.wrapping_add(1),
            )?,
        )),
        Source::Files { points, planes } => {
            let p = read_family(points)?;
            let t = read_family(planes)?;
            p.expect_kind(FamilyKind::Points, "points file")?;
            t.expect_kind(FamilyKind::Hyperplanes, "hyperplanes file")?;
            Ok((p, t))
        }
    }
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::invalid("workers must be positive")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn validate(config: &ExperimentConfig) -> Result<()> {
    if !(config.c > 0.0 && config.c.is_finite()) {
        return Err(Error::invalid(format!("C must be positive, got {}", config.c)));
    }
    if !(config.epsilon >= 0.0) {
        return Err(Error::invalid(format!(
            "epsilon must be >= 0, got {}",
            config.epsilon
        )));
    }
    Ok(())
}

/// Separation and regularity checks, filling in the summaries.
fn run_checks(
    config: &ExperimentConfig,
    families: [(&Family, f64, &mut FamilySummary); 2],
) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for (family, exponent, summary) in families {
        let kind = family.kind();
        if config.checks.separation {
            let sep = regularity::min_separation(family);
            let need = config.checks.separation_factor * family.delta();
            summary.min_separation = Some(sep);
            out.push(CheckOutcome {
                name: format!("{kind}_separation"),
                passed: sep >= need,
                detail: format!("min separation {sep} against required {need}"),
            });
        }
        if config.checks.regularity {
            let rep = regularity::regularity_constant(family, exponent)?;
            out.push(CheckOutcome {
                name: format!("{kind}_regularity"),
                passed: rep.c_star <= config.checks.c_max,
                detail: format!(
                    "c_star {} at s = {exponent} against c_max {}",
                    rep.c_star, config.checks.c_max
                ),
            });
            summary.regularity = Some(rep);
        }
    }
    Ok(out)
}

fn annotate_bounds(
    config: &ExperimentConfig,
    points: &Family,
    planes: &Family,
    count: u64,
) -> Result<Vec<BoundAnnotation>> {
    let (delta, np, nt, d) = (points.delta(), points.len(), planes.len(), points.dim());
    let mut out = vec![BoundAnnotation::from_result(
        "main",
        bounds::main_bound(delta, np, nt),
        count,
    )?];
    if d == 2 {
        out.push(BoundAnnotation::from_result(
            "planar",
            bounds::thm2d_exponent(config.s, config.t).map(|b| b.instantiate(delta, np, nt)),
            count,
        )?);
    }
    out.push(BoundAnnotation::from_result(
        "cauchy_schwarz",
        bounds::cs_bound_exponent(config.s, config.t, d, config.epsilon)
            .map(|b| b.instantiate(delta, np, nt)),
        count,
    )?);
    out.push(BoundAnnotation::from_result(
        "separated_planes",
        bounds::dov_bound(delta, config.s, d, np, nt),
        count,
    )?);
    Ok(out)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    validate(config)?;
    with_pool(config.workers, || run_in_pool(config))?
}

fn run_in_pool(config: &ExperimentConfig) -> Result<Report> {
    let start = Instant::now();
    let (points, planes) = load_families(config)?;
    let mut config = config.clone();
    config.dim = points.dim();
    config.delta = points.delta();
    let build_s = start.elapsed().as_secs_f64();

    let mut ps = FamilySummary::basic(&points);
    let mut ts = FamilySummary::basic(&planes);
    let t0 = Instant::now();
    let checks = run_checks(
        &config,
        [(&points, config.s, &mut ps), (&planes, config.t, &mut ts)],
    )?;
    let checks_s = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let cdelta = config.c * config.delta;
    let incidences = match config.counter {
        Counter::Oracle => count_incidences_oracle(&points, &planes, cdelta, config.mode)?,
        Counter::Fast => count_incidences_fast(&points, &planes, cdelta, config.mode)?,
    };
    let count_s = t0.elapsed().as_secs_f64();

    let mut checks = checks;
    if let Some((lo, hi)) = config.checks.ratio_window {
        checks.push(CheckOutcome {
            name: "ratio_window".into(),
            passed: incidences.ratio >= lo && incidences.ratio <= hi,
            detail: format!("ratio {} against [{lo}, {hi}]", incidences.ratio),
        });
    }
    let bounds = annotate_bounds(&config, &points, &planes, incidences.count)?;
    Ok(Report {
        version: VERSION.to_string(),
        ratio: incidences.ratio,
        config,
        points: ps,
        planes: ts,
        incidences,
        bounds,
        checks,
        timings: Timings {
            build_s,
            checks_s,
            count_s,
            total_s: start.elapsed().as_secs_f64(),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub delta: f64,
    pub report: Option<Report>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub n_points: usize,
    pub n_planes: usize,
    pub count: u64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub version: String,
    pub entries: Vec<SweepEntry>,
    /// one row per successful entry, in input order
    pub summary: Vec<SweepRow>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.report.as_ref().is_some_and(Report::passed))
    }

    pub fn max_ratio(&self) -> Option<f64> {
        self.summary.iter().map(|r| r.ratio).reduce(f64::max)
    }

    pub fn min_ratio(&self) -> Option<f64> {
        self.summary.iter().map(|r| r.ratio).reduce(f64::min)
    }
}

/// Runs `config` once per δ. A failing δ is recorded and the sweep moves on.
pub fn sweep(config: &ExperimentConfig, deltas: &[f64]) -> SweepReport {
    let mut entries = Vec::with_capacity(deltas.len());
    let mut summary = Vec::new();
    for &delta in deltas {
        let cfg = ExperimentConfig {
            delta,
            ..config.clone()
        };
        match run_experiment(&cfg) {
            Ok(report) => {
                summary.push(SweepRow {
                    delta,
                    n_points: report.incidences.n_points,
                    n_planes: report.incidences.n_planes,
                    count: report.incidences.count,
                    ratio: report.ratio,
                });
                entries.push(SweepEntry {
                    delta,
                    report: Some(report),
                    error: None,
                });
            }
            Err(e) => entries.push(SweepEntry {
                delta,
                report: None,
                error: Some(e.to_string()),
            }),
        }
    }
    SweepReport {
        version: VERSION.to_string(),
        entries,
        summary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::write_family;

    #[test]
    fn sharp_planar_run_is_within_window() {
        let config = ExperimentConfig {
            delta: 2f64.powi(-8),
            checks: Checks {
                ratio_window: Some((1.0 / 16.0, 16.0)),
                ..Checks::default()
            },
            ..ExperimentConfig::default()
        };
        let r = run_experiment(&config).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert_eq!(r.ratio, r.incidences.ratio);
        let main = &r.bounds[0];
        assert_eq!(main.name, "main");
        let v = main.bound.as_ref().unwrap().value.unwrap();
        assert_eq!(r.ratio, r.incidences.count as f64 / v);
    }

    #[test]
    fn reports_are_deterministic_across_workers() {
        let base = ExperimentConfig {
            dim: 3,
            delta: 2f64.powi(-5),
            seed: 7,
            checks: Checks {
                separation: true,
                regularity: true,
                ..Checks::default()
            },
            ..ExperimentConfig::default()
        };
        let a = run_experiment(&ExperimentConfig {
            workers: Some(1),
            ..base.clone()
        })
        .unwrap();
        let b = run_experiment(&ExperimentConfig {
            workers: Some(3),
            ..base.clone()
        })
        .unwrap();
        assert_eq!(a.incidences, b.incidences);
        assert_eq!(a.points, b.points);
        assert_eq!(a.bounds, b.bounds);
        let again = run_experiment(&ExperimentConfig {
            workers: Some(1),
            ..base
        })
        .unwrap();
        assert_eq!(a.deterministic_json(), again.deterministic_json());
        assert!(!a.deterministic_json().contains("total_s"));
    }

    #[test]
    fn violated_assumption_is_marked() {
        let config = ExperimentConfig {
            dim: 3,
            delta: 0.125,
            s: 0.5,
            source: Source::Random {
                n_points: 20,
                n_planes: 20,
            },
            ..ExperimentConfig::default()
        };
        let r = run_experiment(&config).unwrap();
        let cs = r.bounds.iter().find(|b| b.name == "cauchy_schwarz").unwrap();
        assert!(cs.bound.is_none());
        assert_eq!(cs.violated.as_deref(), Some("assumption s-d+2 > 0 violated"));
        let dov = r.bounds.iter().find(|b| b.name == "separated_planes").unwrap();
        assert_eq!(dov.violated.as_deref(), Some("assumption s > 1 violated"));
    }

    #[test]
    fn files_source_takes_header_values() {
        let dir = tempfile::tempdir().unwrap();
        let (p, t) = ConstructionSpec {
            d: 2,
            delta: 2f64.powi(-5),
            s: 1.5,
            t: 1.5,
        }
        .build()
        .unwrap();
        let (pp, tp) = (dir.path().join("p.txt"), dir.path().join("t.txt"));
        write_family(&p, &pp).unwrap();
        write_family(&t, &tp).unwrap();
        let from_files = run_experiment(&ExperimentConfig {
            dim: 9,
            delta: 0.5,
            s: 1.5,
            t: 1.5,
            source: Source::Files {
                points: pp,
                planes: tp,
            },
            ..ExperimentConfig::default()
        })
        .unwrap();
        let built = run_experiment(&ExperimentConfig {
            delta: 2f64.powi(-5),
            s: 1.5,
            t: 1.5,
            ..ExperimentConfig::default()
        })
        .unwrap();
        assert_eq!(from_files.config.dim, 2);
        assert_eq!(from_files.incidences, built.incidences);
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        let config = ExperimentConfig {
            dim: 3,
            ..ExperimentConfig::default()
        };
        let rep = sweep(&config, &[2f64.powi(-5), 0.3, 2f64.powi(-6)]);
        assert_eq!(rep.entries.len(), 3);
        assert!(rep.entries[1].error.is_some());
        assert_eq!(rep.summary.len(), 2);
        for (row, entry) in rep.summary.iter().zip([&rep.entries[0], &rep.entries[2]]) {
            assert_eq!(row.ratio, entry.report.as_ref().unwrap().ratio);
        }
        assert!(sweep(&config, &[]).summary.is_empty());
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = ExperimentConfig {
            source: Source::Random {
                n_points: 3,
                n_planes: 4,
            },
            workers: Some(2),
            ..ExperimentConfig::default()
        };
        let json = serde_json::to_string(&config).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), config);
    }
}
