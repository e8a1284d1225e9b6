//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use discretized_incidence::bounds::{comparison_range, dov_bound, f_of_t, thm2d_exponent};
use discretized_incidence::constructions::{
    construct_grid, construct_random, construct_sharp_2d, lift_to_dim, ConstructionSpec,
};
use discretized_incidence::geometry::{affine_metric, phong_stein_determinant};
use discretized_incidence::harness::{sweep, Counter, ExperimentConfig};
use discretized_incidence::incidence::{
    annulus_growth_check, annulus_partition, count_incidences_fast, count_incidences_oracle,
};
use discretized_incidence::regularity::{best_dimension, regularity_constant};
use discretized_incidence::slab_cover::{slab_intersection_cover, verify_cover};
use discretized_incidence::{Family, FamilyKind, Hyperplane, Point, PredicateMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_plane(rng: &mut ChaCha8Rng, d: usize) -> Hyperplane {
    let mut a: Vec<f64> = (0..d - 1).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let norm = (1.0 + a.iter().map(|x| x * x).sum::<f64>()).sqrt();
    a.push(rng.gen_range(-1.0..=1.0) * norm);
    Hyperplane::new(a).unwrap()
}

fn ac1() -> Outcome {
    let delta = 2f64.powi(-8);
    let (p, t) = construct_sharp_2d(1.75, 1.75, delta).map_err(|e| e.to_string())?;
    let r = count_incidences_oracle(&p, &t, delta, PredicateMode::Euclidean)
        .map_err(|e| e.to_string())?;
    ensure(
        (1.0 / 16.0..=16.0).contains(&r.ratio),
        format!("|P| = {}, |T| = {}, I = {}, ratio = {:.4}", p.len(), t.len(), r.count, r.ratio),
    )
}

fn ac2() -> Outcome {
    let delta = 2f64.powi(-6);
    let (p2, t2) = construct_sharp_2d(1.75, 1.75, delta).map_err(|e| e.to_string())?;
    let (p, t) = lift_to_dim(&p2, &t2, 3, delta).map_err(|e| e.to_string())?;
    let r = count_incidences_oracle(&p, &t, delta, PredicateMode::Euclidean)
        .map_err(|e| e.to_string())?;
    let layers = (1.0 / (2.0 * delta)).floor() as usize + 1;
    ensure(
        (1.0 / 32.0..=32.0).contains(&r.ratio)
            && t.len() == t2.len()
            && p.len() == p2.len() * layers,
        format!(
            "|P| = {} = {} x {layers}, |Pi| = {} = |T2|, I = {}, ratio = {:.4}",
            p.len(),
            p2.len(),
            t.len(),
            r.count,
            r.ratio
        ),
    )
}

fn ac3() -> Outcome {
    let config = ExperimentConfig {
        dim: 3,
        s: 1.75,
        t: 1.75,
        counter: Counter::Fast,
        ..ExperimentConfig::default()
    };
    let deltas: Vec<f64> = (5..=8).map(|k| 2f64.powi(-k)).collect();
    let rep = sweep(&config, &deltas);
    if let Some(e) = rep.entries.iter().find_map(|e| e.error.clone()) {
        return Err(e);
    }
    let (max, min) = (rep.max_ratio().unwrap(), rep.min_ratio().unwrap());
    let ratios: Vec<String> = rep.summary.iter().map(|r| format!("{:.4}", r.ratio)).collect();
    ensure(
        max <= 64.0 && max / min <= 16.0,
        format!("ratios [{}], max/min = {:.4}", ratios.join(", "), max / min),
    )
}

fn ac4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pools: Vec<_> = [1, 2, 8]
        .into_iter()
        .map(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap())
        .collect();
    let mut comparisons = 0;
    for i in 0..50u64 {
        let d = 2 + (i % 3) as usize;
        let np = rng.gen_range(1..=500);
        let nt = rng.gen_range(1..=500);
        let delta = 0.02;
        let p = construct_random(FamilyKind::Points, d, delta, np, 1000 + i)
            .map_err(|e| e.to_string())?;
        let t = construct_random(FamilyKind::Hyperplanes, d, delta, nt, 2000 + i)
            .map_err(|e| e.to_string())?;
        let c = [0.5, 1.0, 2.0, 5.0][(i % 4) as usize];
        for mode in [PredicateMode::Euclidean, PredicateMode::Psi] {
            let want = count_incidences_oracle(&p, &t, c * delta, mode).unwrap();
            for pool in &pools {
                let got = pool.install(|| count_incidences_fast(&p, &t, c * delta, mode).unwrap());
                if got != want {
                    return Err(format!(
                        "instance {i} ({mode}, {} workers): fast {} vs oracle {}",
                        pool.current_num_threads(),
                        got.count,
                        want.count
                    ));
                }
                comparisons += 1;
            }
        }
    }
    Ok(format!("{comparisons} reports identical, histograms included"))
}

fn ac5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = f64::INFINITY;
    for _ in 0..10_000 {
        let d = rng.gen_range(2..=5);
        let (a, b) = (random_plane(&mut rng, d), random_plane(&mut rng, d));
        let da = affine_metric(&a, &b).unwrap();
        if da == 0.0 {
            continue;
        }
        let euclid = a
            .coeffs()
            .iter()
            .zip(b.coeffs())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        worst = worst.min(euclid / da);
    }
    let delta = 2f64.powi(-6);
    let t = 1.75;
    let (_, planes) = ConstructionSpec { d: 3, delta, s: t, t }
        .build()
        .map_err(|e| e.to_string())?;
    let own = regularity_constant(&planes, t).unwrap().c_star;
    let dual = regularity_constant(&planes.dual().unwrap(), t).unwrap().c_star;
    ensure(
        worst >= 1.0 / 5f64.sqrt() - 1e-9 && dual <= 20.0 * own,
        format!(
            "min Euclid/d_A = {worst:.4} (>= {:.4}); dual c* = {dual:.4}, plane c* = {own:.4}",
            1.0 / 5f64.sqrt()
        ),
    )
}

fn ac6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for d in 2..=5 {
        for _ in 0..100 {
            let x = Point::new((0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect()).unwrap();
            let a = Point::new((0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect()).unwrap();
            let det = phong_stein_determinant(&x, &a).map_err(|e| e.to_string())?;
            worst = worst.max((det.abs() - 1.0).abs());
        }
    }
    ensure(worst <= 1e-9, format!("max ||det| - 1| = {worst:.2e} over 400 points"))
}

fn ac7() -> Outcome {
    let delta = 2f64.powi(-8);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut pairs, mut max_boxes, mut min_w, mut max_w) = (0, 0usize, f64::INFINITY, 0f64);
    let mut attempts = 0;
    while pairs < 20 {
        attempts += 1;
        if attempts > 10_000 {
            return Err("could not draw 20 plane pairs with w in [4 delta, 1/8]".into());
        }
        // both planes pass through a common point near the origin, so the fold
        // line crosses the ball well inside and the intersection is not a sliver
        let x0: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.3..=0.3)).collect();
        let through = |slopes: Vec<f64>| {
            let mut c = slopes.clone();
            c.push(x0[2] - slopes[0] * x0[0] - slopes[1] * x0[1]);
            Hyperplane::new(c).unwrap()
        };
        let a: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let step = rng.gen_range(2.0 * delta..0.25);
        let b: Vec<f64> = a.iter().map(|x| x + step * rng.gen_range(-1.0..=1.0)).collect();
        let (p1, p2) = (through(a), through(b));
        let w = affine_metric(&p1, &p2).unwrap();
        if !(4.0 * delta..=0.125).contains(&w) {
            continue;
        }
        let cover = slab_intersection_cover(&p1, &p2, delta).map_err(|e| e.to_string())?;
        let seed = 70 + pairs as u64;
        let check = verify_cover(&p1, &p2, delta, &cover, 10_000, seed).unwrap();
        if check.vacuous {
            continue;
        }
        if check.fraction != 1.0 || check.samples != 10_000 {
            return Err(format!(
                "pair {pairs}: w = {w}, {} of {} samples covered",
                check.covered, check.samples
            ));
        }
        if cover.boxes.len() as f64 > 64.0 / delta {
            return Err(format!("pair {pairs}: {} boxes", cover.boxes.len()));
        }
        let control = verify_cover(&p1, &p2, delta, &cover.scaled(0.5), 10_000, seed).unwrap();
        if control.n_misses == 0 {
            return Err(format!("pair {pairs}: shrunken cover reported no misses"));
        }
        max_boxes = max_boxes.max(cover.boxes.len());
        min_w = min_w.min(w);
        max_w = max_w.max(w);
        pairs += 1;
    }
    Ok(format!(
        "20 pairs, w in [{min_w:.4}, {max_w:.4}], all 10^4 samples covered, max {max_boxes} boxes (bound {}), shrunken covers miss",
        64.0 / delta
    ))
}

fn ac8() -> Outcome {
    let delta = 2f64.powi(-6);
    let mut parts = Vec::new();
    let mut ok = true;
    for d in 2..=3 {
        let grid = construct_grid(d, delta, &vec![delta; d]).map_err(|e| e.to_string())?;
        let c = regularity_constant(&grid, d as f64).unwrap().c_star;
        ok &= c <= 4f64.powi(d as i32);
        parts.push(format!("grid d={d}: c* = {c:.3}"));
    }
    let fine = 2f64.powi(-10);
    let data: Vec<f64> = (0..=1024).flat_map(|i| [i as f64 * fine, 0.0]).collect();
    let segment = Family::points(2, fine, data).unwrap();
    let c = regularity_constant(&segment, 2.0).unwrap().c_star;
    let dim = best_dimension(&segment, 4.0).unwrap();
    ok &= c >= 0.25 / fine && (0.9..=1.1).contains(&dim);
    parts.push(format!("segment: c*(2) = {c:.1}, best dimension (C = 4) = {dim:.4}"));
    ensure(ok, parts.join("; "))
}

fn ac9() -> Outcome {
    let mut ok = f_of_t(1.0) == 0.5 && (f_of_t(1.0 - 1e-13) - 0.5).abs() <= 1e-12;
    let a = thm2d_exponent(1.0, 1.0).unwrap().delta_exponent;
    let b = thm2d_exponent(2.0, 2.0).unwrap().delta_exponent;
    ok &= a == 0.5 && b == 1.0;
    let dov = dov_bound(0.01, 2.0, 3, 10, 10).unwrap();
    ok &= (dov.plane_count_exponent - 2.0 / 3.0).abs() <= 1e-12;
    let range = comparison_range(1.5, 1.0, 3).unwrap();
    ok &= range.nonempty_stated;
    ensure(
        ok,
        format!(
            "f(1) = {}, planar(1,1) = {a}, planar(2,2) = {b}, separated-planes exponent = {:.6}, range nonempty = {}",
            f_of_t(1.0),
            dov.plane_count_exponent,
            range.nonempty_stated
        ),
    )
}

fn ac10() -> Outcome {
    let delta = 2f64.powi(-6);
    let t = 1.75;
    let (_, planes) = ConstructionSpec { d: 3, delta, s: t, t }
        .build()
        .map_err(|e| e.to_string())?;
    let c_star = regularity_constant(&planes, t).unwrap().c_star;
    let mut k_max: f64 = 0.0;
    for i in 0..planes.len() {
        let center = planes.hyperplane(i);
        let part = annulus_partition(&planes, &center).unwrap();
        let mut seen = vec![false; planes.len()];
        for &j in part.buckets.values().flatten().chain(part.excluded.iter()) {
            if std::mem::replace(&mut seen[j], true) {
                return Err(format!("centre {i}: plane {j} in two buckets"));
            }
        }
        if seen.iter().any(|s| !s) || part.excluded != Some(i) {
            return Err(format!("centre {i}: buckets do not cover the family"));
        }
        k_max = k_max.max(annulus_growth_check(&planes, &center, t).unwrap().k);
    }
    ensure(
        k_max <= 10.0 * c_star,
        format!(
            "{} centres partitioned exactly; max K = {k_max:.4}, c* = {c_star:.4}",
            planes.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("AC1 sharpness d=2", ac1),
        ("AC2 sharpness d=3 lift", ac2),
        ("AC3 boundedness sweep", ac3),
        ("AC4 oracle equivalence", ac4),
        ("AC5 duality", ac5),
        ("AC6 rotational curvature", ac6),
        ("AC7 slab cover", ac7),
        ("AC8 regularity calibration", ac8),
        ("AC9 bound evaluators", ac9),
        ("AC10 annulus decomposition", ac10),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1} s): {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
