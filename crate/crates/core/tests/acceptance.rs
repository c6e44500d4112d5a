//! Acceptance run: one line per criterion, non-zero exit if any fails.
//!
//! `cargo test --test acceptance`

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use ot_stereo::disparity::{
    compression, disparity_map, disparity_profile, estimate_phi, ColumnInterval,
    DEFAULT_PLATEAU_TOLERANCE,
};
use ot_stereo::error::Error;
use ot_stereo::exact::{brute_force_plan, exact_cost, is_monotone, monotone_plan};
use ot_stereo::matrix::Matrix;
use ot_stereo::scene::{depth_from_disparity, reconstruct, render_pair, CameraRig, View};
use ot_stereo::sinkhorn::{
    hilbert_distance, hilbert_distance_log, project_cols, project_rows, shifted_sinkhorn,
    transport_cost, EpsilonSchedule, GibbsKernel, SinkhornConfig, SinkhornIteration, TransportPlan,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ac1_exact_recovery() -> Outcome {
    let started = Instant::now();
    let rig = CameraRig::default();
    let cfg = config(0.1, 10_000, 0.0);
    let (mut good, mut total) = (0, 0);
    let mut worst = 1.0f64;
    for seed in 0..20 {
        let scene = random_non_occluded(seed, 120, 100, &rig);
        let pair = render_pair(&scene, &rig).map_err(|e| e.to_string())?;
        check(pair.non_occluded, || format!("scene {seed} occludes"))?;
        let map = disparity_map(&pair.left, &pair.right, &cfg).map_err(|e| e.to_string())?;
        let (g, t) = agreement(&map, &pair.truth, 0.5);
        worst = worst.min(g as f64 / t as f64);
        good += g;
        total += t;
    }
    let elapsed = started.elapsed().as_secs_f64();
    let fraction = good as f64 / total as f64;
    let detail = format!(
        "{good}/{total} pixels within 0.5 px ({:.4}%), worst scene {:.4}%, {elapsed:.1} s",
        100.0 * fraction,
        100.0 * worst
    );
    check(fraction >= 0.99, || detail.clone())?;
    check(elapsed < 60.0, || format!("too slow: {detail}"))?;
    Ok(detail)
}

fn ac2_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let steps = 6u32;
    let mut worst_brute = 0.0f64;
    for _ in 0..200 {
        let mut quantized = || {
            let cut1 = rng.gen_range(0..=steps);
            let cut2 = rng.gen_range(cut1..=steps);
            [cut1, cut2 - cut1, steps - cut2]
                .map(|k| k as f64 / steps as f64)
                .to_vec()
        };
        let (a, b) = (quantized(), quantized());
        let mono = monotone_plan(&a, &b).map_err(|e| e.to_string())?;
        let brute = brute_force_plan(&a, &b, steps).map_err(|e| e.to_string())?;
        worst_brute = worst_brute.max((mono.cost - brute.cost).abs());
    }
    check(worst_brute <= 1e-12, || {
        format!("monotone vs brute force differ by {worst_brute:e}")
    })?;

    let cfg = SinkhornConfig {
        epsilon: 0.03,
        max_iterations: 200_000,
        stop_tolerance: 1e-13,
        log_domain: true,
    };
    let schedule = EpsilonSchedule::new(8, 0.03).map_err(|e| e.to_string())?;
    let mut worst_entropic = 0.0f64;
    for _ in 0..50 {
        let a = random_probability(&mut rng, 8);
        let b = random_probability(&mut rng, 8);
        let (plan, _, _) = schedule.solve(&a, &b, &cfg).map_err(|e| e.to_string())?;
        let exact = exact_cost(&a, &b).map_err(|e| e.to_string())?;
        worst_entropic = worst_entropic.max((transport_cost(plan.entries()) - exact).abs());
    }
    check(worst_entropic <= 1e-3, || {
        format!("entropic cost off by {worst_entropic:e}")
    })?;
    Ok(format!(
        "brute force gap {worst_brute:e} over 200, entropic gap {worst_entropic:.3e} over 50"
    ))
}

fn ac3_convergence_rate() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let window = 60;
    let floor = 1e-9;
    let mut worst_u = 0.0f64;
    let mut worst_f = 0.0f64;
    let mut ratios = 0;
    for case in 0..60 {
        let d = rng.gen_range(2..=12);
        let log_eta = rng.gen_range(0.5..7.0);
        let eps = 2.0 * ((d - 1) as f64).powi(2) / log_eta;
        let kernel = GibbsKernel::new(d, eps).map_err(|e| e.to_string())?;
        let l2 = kernel.lambda().powi(2);
        check(l2 <= 0.9, || format!("case {case}: lambda^2 = {l2}"))?;
        let a = random_probability(&mut rng, d);
        let b = random_probability(&mut rng, d);

        let mut reference =
            SinkhornIteration::new(&a, &b, &kernel, true).map_err(|e| e.to_string())?;
        for _ in 0..10 * window {
            reference.step().map_err(|e| e.to_string())?;
        }
        let u_ref = reference.log_u().to_vec();
        let f_ref = disparity_profile(&reference.odd_plan(), 0);

        let mut it = SinkhornIteration::new(&a, &b, &kernel, true).map_err(|e| e.to_string())?;
        let mut eu = Vec::new();
        let mut ef = Vec::new();
        for _ in 0..window {
            it.step().map_err(|e| e.to_string())?;
            eu.push(hilbert_distance_log(it.log_u(), &u_ref).map_err(|e| e.to_string())?);
            let f = disparity_profile(&it.odd_plan(), 0);
            ef.push(
                (0..d)
                    .filter_map(|i| Some((f.get(i)? - f_ref.get(i)?).abs()))
                    .fold(0.0, f64::max),
            );
        }
        // eu[k - 1] is the error after iteration k.
        for k in 2..window {
            for (series, worst) in [(&eu, &mut worst_u), (&ef, &mut worst_f)] {
                if series[k - 1] > floor && series[k] > floor {
                    let r = series[k] / series[k - 1];
                    ratios += 1;
                    *worst = worst.max(r - l2);
                }
            }
        }
    }
    let detail = format!(
        "{ratios} ratios; max(ratio - lambda^2): u {worst_u:.4}, f {worst_f:.4} (bound 0.05)"
    );
    check(worst_u <= 0.05 && worst_f <= 0.05, || detail.clone())?;
    Ok(detail)
}

fn ac4_shifted_structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = [0.0f64; 4];
    for &m0 in &[1.05, 1.5, 2.0] {
        for _ in 0..10 {
            let d = rng.gen_range(3..=12);
            let eps = rng.gen_range(0.5..5.0);
            let kernel = GibbsKernel::new(d, eps).map_err(|e| e.to_string())?;
            let nu1 = random_probability(&mut rng, d);
            let nu0: Vec<f64> = random_probability(&mut rng, d)
                .into_iter()
                .map(|x| x * m0)
                .collect();
            let cfg = SinkhornConfig {
                epsilon: eps,
                max_iterations: 100_000,
                stop_tolerance: 1e-14,
                log_domain: true,
            };
            let limits = shifted_sinkhorn(&nu0, &nu1, &kernel, &cfg).map_err(|e| e.to_string())?;
            let (even, odd) = (&limits.even_limit, &limits.odd_limit);
            worst[0] = worst[0].max(even.col_violation(&nu1));
            worst[1] = worst[1].max(odd.row_violation(&nu0));
            worst[2] = worst[2].max(odd.entries().max_abs_diff(&even.entries().scale(m0)));
            let (fe, fo) = (disparity_profile(even, 0), disparity_profile(odd, 0));
            for i in 0..d {
                match (fe.get(i), fo.get(i)) {
                    (Some(x), Some(y)) => worst[3] = worst[3].max((x - y).abs()),
                    (None, None) => {}
                    _ => return Err(format!("profiles disagree on support at column {i}")),
                }
            }
        }
    }
    let detail = format!(
        "even cols {:.1e}, odd rows {:.1e}, odd - m0 even {:.1e}, profiles {:.1e}",
        worst[0], worst[1], worst[2], worst[3]
    );
    check(
        worst[..3].iter().all(|&w| w <= 1e-8) && worst[3] <= 1e-10,
        || detail.clone(),
    )?;
    Ok(detail)
}

fn ac5_occlusion_recovery() -> Outcome {
    let rig = CameraRig::default();
    let pair = render_pair(&occluding_scene(&rig), &rig).map_err(|e| e.to_string())?;
    let y = OCCLUSION_ROW;
    let truth: Vec<ColumnInterval> = pair
        .hidden
        .iter()
        .filter(|h| h.y == y && h.view == View::Left)
        .map(|h| ColumnInterval {
            start: h.start,
            end: h.end,
        })
        .collect();
    check(truth == vec![ColumnInterval { start: 31, end: 33 }], || {
        format!("generator hides {truth:?}")
    })?;
    let m0: f64 = pair.left.row(y).iter().sum();
    let m1: f64 = pair.right.row(y).iter().sum();
    let phi_true = m1 / m0;

    let cfg = config(0.1, 100_000, 0.0);
    let map = disparity_map(&pair.left, &pair.right, &cfg).map_err(|e| e.to_string())?;
    let report = map
        .reports
        .iter()
        .find(|r| r.y == y)
        .ok_or("no report at the test row")?;
    let leftmost = report.object_shifts.first().ok_or("no object processed")?;
    check(leftmost.start == 10 && leftmost.shift == 9, || {
        format!("leftmost object {leftmost:?}")
    })?;
    check(report.intervals == truth, || {
        format!("recovered {:?}, truth {truth:?}", report.intervals)
    })?;
    let phi = report.phi_estimate.ok_or("no compression plateau")?;
    check((phi - phi_true).abs() <= 5e-3, || {
        format!("phi estimate {phi} vs {phi_true}")
    })?;
    Ok(format!(
        "shift {}, hidden {}..={}, plateau {:.5}, phi {phi:.5} vs {phi_true:.5}",
        leftmost.shift,
        report.intervals[0].start,
        report.intervals[0].end,
        report.compression_plateau.unwrap_or(f64::NAN)
    ))
}

fn ac6_compression_formula() -> Outcome {
    let n = 20;
    let mut notes = Vec::new();
    for &phi in &[0.5, 0.8, 0.95] {
        // Unit mass per column on the object, reduced by phi on the left.
        let filled = (phi * n as f64).round() as usize;
        let left = vec![phi; n];
        let right: Vec<f64> = (0..n).map(|j| if j < filled { 1.0 } else { 0.0 }).collect();
        let plan = monotone_plan(&left, &right)
            .map_err(|e| e.to_string())?
            .plan;
        let f = disparity_profile(&plan, 0);
        for c in 0..n {
            let i = (c + 1) as f64;
            let expected = if (phi * (i - 1.0)).floor() < (phi * i).floor() {
                (1.0 - 1.0 / phi) * (phi * i).floor()
            } else {
                (phi * i).ceil() - i
            };
            let got = f.get(c).ok_or("undefined column")?;
            check((got - expected).abs() <= 1e-9, || {
                format!("phi {phi}: f({}) = {got}, closed form {expected}", c + 1)
            })?;
        }
        let delta = compression(&f);
        let plateau = 1.0 - 1.0 / phi;
        let mut repeats = 0;
        for w in delta.windows(2) {
            if let (Some(a), Some(b)) = (w[0], w[1]) {
                if (a - b).abs() <= 1e-9 {
                    repeats += 1;
                    check((a - plateau).abs() <= 1e-6, || {
                        format!("phi {phi}: repeated value {a}, expected {plateau}")
                    })?;
                }
            }
        }
        match estimate_phi(&delta, DEFAULT_PLATEAU_TOLERANCE) {
            Ok(est) => {
                check((est - phi).abs() <= 1e-6, || {
                    format!("phi {phi}: estimate {est}")
                })?;
                notes.push(format!("{phi}: {repeats} repeats, estimate {est:.6}"));
            }
            Err(Error::NoPlateau) if repeats == 0 => {
                notes.push(format!("{phi}: no repeats, closed form only"))
            }
            Err(e) => return Err(format!("phi {phi}: {e}")),
        }
    }
    Ok(notes.join("; "))
}

fn ac7_depth() -> Outcome {
    let rig = CameraRig::default();
    let z = depth_from_disparity(9.0, &rig).map_err(|e| e.to_string())?;
    check((z - 5000.0 / 9.0).abs() <= 1e-9, || format!("depth {z}"))?;

    let scene = random_non_occluded(7, 120, 100, &rig);
    let pair = render_pair(&scene, &rig).map_err(|e| e.to_string())?;
    let map = disparity_map(&pair.left, &pair.right, &config(0.1, 10_000, 0.0))
        .map_err(|e| e.to_string())?;
    let cloud = reconstruct(&map, &rig, &pair.right).map_err(|e| e.to_string())?;
    let visible = pair.truth.defined_count();
    check(cloud.len() >= visible * 99 / 100, || {
        format!("{} points for {visible} visible pixels", cloud.len())
    })?;
    let mut worst = 0.0f64;
    for p in &cloud.points {
        let (x, y) = (p.x as usize, p.y as usize);
        let Some(s) = pair.truth.get(x, y) else {
            return Err(format!("point at background ({x}, {y})"));
        };
        let object = scene
            .objects
            .iter()
            .find(|o| rig.pixel_shift(o.depth) as f64 == s)
            .ok_or("no object")?;
        // Within one pixel of disparity of the generator's depth.
        let px = (rig.disparity(p.z) - rig.disparity(object.depth)).abs();
        worst = worst.max(px);
    }
    check(worst <= 1.0, || {
        format!("depth off by {worst} px of disparity")
    })?;
    Ok(format!(
        "z(9) = {z:.6}; {} points, worst disparity gap {worst:.3} px",
        cloud.len()
    ))
}

fn ac8_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = [0usize; 4];

    for _ in 0..500 {
        let d = rng.gen_range(1..=10);
        let m = Matrix::from_fn(d, d, |_, _| rng.gen_range(0.01..1.0));
        let target = random_probability(&mut rng, d);
        let rows = project_rows(&m, &target).map_err(|e| e.to_string())?;
        let cols = project_cols(&m, &target).map_err(|e| e.to_string())?;
        if rows.row_violation(&target) > 1e-12 || cols.col_violation(&target) > 1e-12 {
            violations[0] += 1;
        }
    }

    for _ in 0..1000 {
        let d = rng.gen_range(2..=12);
        let kernel = GibbsKernel::new(d, rng.gen_range(0.5..50.0)).map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.01..10.0)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.gen_range(0.01..10.0)).collect();
        let apply = |v: &[f64]| {
            (0..d)
                .map(|i| (0..d).map(|j| kernel.get(i, j) * v[j]).sum())
                .collect::<Vec<f64>>()
        };
        let before = hilbert_distance(&x, &y).map_err(|e| e.to_string())?;
        let after = hilbert_distance(&apply(&x), &apply(&y)).map_err(|e| e.to_string())?;
        if after > kernel.lambda() * before + 1e-12 {
            violations[1] += 1;
        }
    }

    for _ in 0..500 {
        let d = rng.gen_range(1..=10);
        let m = Matrix::from_fn(d, d, |_, _| {
            if rng.gen_bool(0.3) {
                0.0
            } else {
                rng.gen_range(0.0..1.0)
            }
        });
        let plan = TransportPlan::new(m);
        let scale = rng.gen_range(0.01..100.0);
        let (a, b) = (
            disparity_profile(&plan, 0),
            disparity_profile(&plan.scaled(scale), 0),
        );
        let same = (0..d).all(|i| match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) => (x - y).abs() <= 1e-12,
            (None, None) => true,
            _ => false,
        });
        if !same {
            violations[2] += 1;
        }
    }

    for _ in 0..500 {
        let d = rng.gen_range(1..=12);
        let a = random_probability(&mut rng, d);
        let b = random_probability(&mut rng, d);
        let plan = monotone_plan(&a, &b).map_err(|e| e.to_string())?.plan;
        if !is_monotone(plan.entries()) {
            violations[3] += 1;
        }
    }
    let detail = format!(
        "violations: projections {}, contraction {}, scale invariance {}, monotone {}",
        violations[0], violations[1], violations[2], violations[3]
    );
    check(violations.iter().all(|&v| v == 0), || detail.clone())?;
    Ok(detail)
}

fn main() {
    let criteria: [Criterion; 8] = [
        (
            "AC1 exact recovery on non-occluded cartoons",
            ac1_exact_recovery,
        ),
        ("AC2 oracle equivalence", ac2_oracle_equivalence),
        ("AC3 convergence rate", ac3_convergence_rate),
        ("AC4 shifted projection structure", ac4_shifted_structure),
        ("AC5 occlusion recovery", ac5_occlusion_recovery),
        (
            "AC6 compression coefficient formula",
            ac6_compression_formula,
        ),
        ("AC7 depth reconstruction", ac7_depth),
        ("AC8 invariant suites", ac8_invariants),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
