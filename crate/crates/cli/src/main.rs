use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use discretized_incidence::bounds;
use discretized_incidence::harness::{
    self, Checks, Counter, ExperimentConfig, Source, VERSION,
};
use discretized_incidence::io::write_family;
use discretized_incidence::slab_cover::{slab_intersection_cover, verify_cover};
use discretized_incidence::{Hyperplane, PredicateMode};

#[derive(Parser)]
#[command(name = "dincidence", version, about = "Discretized point-hyperplane incidence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0.015625)]
    delta: f64,
    #[arg(long, default_value_t = 1.75)]
    s: f64,
    #[arg(long, default_value_t = 1.75)]
    t: f64,
    /// slab half-width multiplier C, the slab being C·delta
    #[arg(long = "cdelta", visible_alias = "c", default_value_t = 1.0)]
    cdelta: f64,
    #[arg(long, value_enum, default_value_t = Mode::Euclidean)]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// worker threads (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// output file (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct SourceArgs {
    /// points file; requires --planes
    #[arg(long, requires = "planes")]
    points: Option<PathBuf>,
    /// hyperplanes file; requires --points
    #[arg(long, requires = "points")]
    planes: Option<PathBuf>,
    /// use seeded random families of this many points (requires --random-planes)
    #[arg(long, requires = "random_planes", conflicts_with = "points")]
    random_points: Option<usize>,
    #[arg(long, requires = "random_points")]
    random_planes: Option<usize>,
}

impl SourceArgs {
    fn source(&self) -> Source {
        match (&self.points, &self.planes, self.random_points, self.random_planes) {
            (Some(p), Some(t), _, _) => Source::Files {
                points: p.clone(),
                planes: t.clone(),
            },
            (_, _, Some(n_points), Some(n_planes)) => Source::Random { n_points, n_planes },
            _ => Source::Sharp,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum Mode {
    Euclidean,
    Psi,
}

#[derive(Copy, Clone, ValueEnum)]
enum CounterArg {
    Oracle,
    Fast,
}

#[derive(Subcommand)]
enum Command {
    /// Build the sharpness construction (or random families) and write both files
    Construct {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Check separation and regularity of both families
    Check {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 32.0)]
        c_max: f64,
        /// required separation as a multiple of delta
        #[arg(long, default_value_t = 0.5)]
        sep_factor: f64,
    },
    /// Count C·delta-incidences and annotate with the bounds
    Count {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, value_enum, default_value_t = CounterArg::Fast)]
        counter: CounterArg,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// fail unless the ratio is at least this
        #[arg(long)]
        ratio_min: Option<f64>,
        /// fail unless the ratio is at most this
        #[arg(long)]
        ratio_max: Option<f64>,
    },
    /// Evaluate the bound formulas for given sizes
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_points: usize,
        #[arg(long)]
        n_planes: usize,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
    },
    /// Cover the intersection of two slabs by boxes and check it by sampling
    Cover {
        #[command(flatten)]
        common: Common,
        /// coefficients a_1,…,a_d of the first plane
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        plane1: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        plane2: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// leave the box list out of the output
        #[arg(long)]
        no_boxes: bool,
    },
    /// Run the count over several scales
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: SourceArgs,
        /// comma-separated list of deltas
        #[arg(long, value_delimiter = ',', required = true)]
        deltas: Vec<f64>,
        #[arg(long, value_enum, default_value_t = CounterArg::Fast)]
        counter: CounterArg,
        #[arg(long)]
        ratio_min: Option<f64>,
        #[arg(long)]
        ratio_max: Option<f64>,
    },
}

fn config(common: &Common, source: &SourceArgs) -> ExperimentConfig {
    ExperimentConfig {
        dim: common.dim,
        delta: common.delta,
        s: common.s,
        t: common.t,
        c: common.cdelta,
        mode: match common.mode {
            Mode::Euclidean => PredicateMode::Euclidean,
            Mode::Psi => PredicateMode::Psi,
        },
        seed: common.seed,
        source: source.source(),
        workers: common.workers,
        ..ExperimentConfig::default()
    }
}

fn counter(c: CounterArg) -> Counter {
    match c {
        CounterArg::Oracle => Counter::Oracle,
        CounterArg::Fast => Counter::Fast,
    }
}

fn window(lo: Option<f64>, hi: Option<f64>) -> Option<(f64, f64)> {
    match (lo, hi) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, format!("{text}\n"))
            .with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn bound_json<T: serde::Serialize>(r: discretized_incidence::Result<T>) -> serde_json::Value {
    match r {
        Ok(v) => json!({ "value": v }),
        Err(e) => json!({ "violated": e.to_string() }),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Construct { common, source } => {
            let Some(dir) = common.out.clone() else {
                bail!("construct needs --out <directory>");
            };
            let (p, t) = harness::load_families(&config(&common, &source))?;
            fs::create_dir_all(&dir)?;
            let (pp, tp) = (dir.join("points.txt"), dir.join("planes.txt"));
            write_family(&p, &pp)?;
            write_family(&t, &tp)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "version": VERSION,
                    "points": { "path": pp, "size": p.len(), "claim": p.meta },
                    "planes": { "path": tp, "size": t.len(), "claim": t.meta },
                }))?
            );
            Ok(true)
        }
        Command::Check {
            common,
            source,
            c_max,
            sep_factor,
        } => {
            let mut cfg = config(&common, &source);
            cfg.checks = Checks {
                separation: true,
                separation_factor: sep_factor,
                regularity: true,
                c_max,
                ratio_window: None,
            };
            let report = harness::run_experiment(&cfg)?;
            emit(&common.out, &report.to_json())?;
            for c in &report.checks {
                eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(report.passed())
        }
        Command::Count {
            common,
            source,
            counter: c,
            epsilon,
            ratio_min,
            ratio_max,
        } => {
            let mut cfg = config(&common, &source);
            cfg.counter = counter(c);
            cfg.epsilon = epsilon;
            cfg.checks.ratio_window = window(ratio_min, ratio_max);
            let report = harness::run_experiment(&cfg)?;
            emit(&common.out, &report.to_json())?;
            Ok(report.passed())
        }
        Command::Bounds {
            common,
            n_points,
            n_planes,
            epsilon,
        } => {
            let (d, delta, s, t) = (common.dim, common.delta, common.s, common.t);
            let value = json!({
                "version": VERSION,
                "dim": d, "delta": delta, "s": s, "t": t,
                "n_points": n_points, "n_planes": n_planes,
                "f_t": bounds::f_of_t(t),
                "main": bound_json(bounds::main_bound(delta, n_points, n_planes)),
                "planar": bound_json(
                    bounds::thm2d_exponent(s, t).map(|b| b.instantiate(delta, n_points, n_planes))
                ),
                "cauchy_schwarz": bound_json(
                    bounds::cs_bound_exponent(s, t, d, epsilon)
                        .map(|b| b.instantiate(delta, n_points, n_planes))
                ),
                "separated_planes": bound_json(bounds::dov_bound(delta, s, d, n_points, n_planes)),
                "comparison_range": bound_json(bounds::comparison_range(s, t, d)),
            });
            emit(&common.out, &serde_json::to_string_pretty(&value)?)?;
            Ok(true)
        }
        Command::Cover {
            common,
            plane1,
            plane2,
            samples,
            no_boxes,
        } => {
            let p1 = Hyperplane::new(plane1)?;
            let p2 = Hyperplane::new(plane2)?;
            let run = || -> discretized_incidence::Result<_> {
                let cover = slab_intersection_cover(&p1, &p2, common.delta)?;
                let check = verify_cover(&p1, &p2, common.delta, &cover, samples, common.seed)?;
                Ok((cover, check))
            };
            let (cover, check) = match common.workers {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()?
                    .install(run)?,
                None => run()?,
            };
            let passed = check.fraction == 1.0 && cover.boxes.len() as f64 <= cover.count_bound;
            let value = json!({
                "version": VERSION,
                "w": cover.w,
                "delta": cover.delta,
                "box_count": cover.boxes.len(),
                "count_bound": cover.count_bound,
                "verification": check,
                "boxes": if no_boxes { serde_json::Value::Null } else { serde_json::to_value(&cover.boxes)? },
            });
            emit(&common.out, &serde_json::to_string_pretty(&value)?)?;
            Ok(passed)
        }
        Command::Sweep {
            common,
            source,
            deltas,
            counter: c,
            ratio_min,
            ratio_max,
        } => {
            let mut cfg = config(&common, &source);
            cfg.counter = counter(c);
            cfg.checks.ratio_window = window(ratio_min, ratio_max);
            let report = harness::sweep(&cfg, &deltas);
            emit(&common.out, &serde_json::to_string_pretty(&report)?)?;
            for e in &report.entries {
                match (&e.report, &e.error) {
                    (Some(r), _) => eprintln!(
                        "delta {}: |P| {} |Pi| {} I {} ratio {}",
                        e.delta, r.incidences.n_points, r.incidences.n_planes, r.incidences.count, r.ratio
                    ),
                    (None, Some(err)) => eprintln!("delta {}: error: {err}", e.delta),
                    (None, None) => {}
                }
            }
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
