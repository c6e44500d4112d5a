#![allow(dead_code)]

use ot_stereo::disparity::{DisparityConfig, DisparityMap};
use ot_stereo::scene::{CameraRig, CartoonScene, Shape};
use ot_stereo::sinkhorn::SinkhornConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LEVELS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

pub fn depth_for_shift(rig: &CameraRig, s: i64) -> f64 {
    rig.focal * rig.baseline / (rig.beta * s as f64)
}

/// Random scene whose objects keep their left-to-right order and stay at
/// least one column apart in both views.
pub fn random_non_occluded(seed: u64, d: usize, h: usize, rig: &CameraRig) -> CartoonScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(2..=4);
        let mut scene = CartoonScene::new(d, h);
        let mut next_left = rng.gen_range(0..8);
        let mut prev: Option<(usize, i64)> = None;
        let mut ok = true;
        for k in 0..n {
            let s: i64 = rng.gen_range(3..=12);
            let w = rng.gen_range(8..=20);
            let mut a = next_left;
            if let Some((b_prev, s_prev)) = prev {
                a = a.max(b_prev + 2 + (s_prev - s).max(0) as usize);
            }
            let b = a + w - 1;
            if b as i64 + s >= d as i64 {
                ok = k >= 2;
                break;
            }
            let y0 = rng.gen_range(0..h / 2);
            let y1 = rng.gen_range(y0 + h / 5..h);
            let shape = if seed.is_multiple_of(2) && k == 1 {
                let rx = (w as f64 - 1.0) / 2.0;
                let ry = ((y1 - y0) as f64 / 2.0).min(12.0);
                Shape::Ellipse {
                    cx: a as f64 + rx,
                    cy: (y0 + y1) as f64 / 2.0,
                    rx,
                    ry,
                }
            } else {
                Shape::Rect {
                    x0: a,
                    x1: b,
                    y0,
                    y1,
                }
            };
            let intensity = LEVELS[rng.gen_range(0..LEVELS.len())];
            scene = scene.with(shape, depth_for_shift(rig, s), intensity);
            prev = Some((b, s));
            next_left = b + rng.gen_range(2..10);
        }
        if ok && scene.objects.len() >= 2 {
            return scene;
        }
    }
}

pub const OCCLUSION_ROW: usize = 30;

/// Four objects: a near one on the left overlaps the start of its neighbour
/// in the right view. On the test row the left mass is 36 and the right
/// mass 34.2.
pub fn occluding_scene(rig: &CameraRig) -> CartoonScene {
    CartoonScene::new(120, 60)
        .with(
            Shape::Rect {
                x0: 10,
                x1: 29,
                y0: 10,
                y1: 50,
            },
            depth_for_shift(rig, 9),
            0.8,
        )
        .with(
            Shape::Rect {
                x0: 31,
                x1: 50,
                y0: 0,
                y1: 59,
            },
            depth_for_shift(rig, 5),
            0.6,
        )
        .with(
            Shape::Rect {
                x0: 60,
                x1: 69,
                y0: 20,
                y1: 40,
            },
            depth_for_shift(rig, 4),
            0.4,
        )
        .with(
            Shape::Rect {
                x0: 80,
                x1: 89,
                y0: 15,
                y1: 45,
            },
            depth_for_shift(rig, 7),
            0.4,
        )
}

pub fn config(epsilon: f64, niter: usize, stop_tolerance: f64) -> DisparityConfig {
    DisparityConfig {
        sinkhorn: SinkhornConfig {
            epsilon,
            max_iterations: niter,
            stop_tolerance,
            log_domain: true,
        },
        ..DisparityConfig::default()
    }
}

/// Pixels where the truth is defined, and how many of them `map` gets
/// within `tol`.
pub fn agreement(map: &DisparityMap, truth: &DisparityMap, tol: f64) -> (usize, usize) {
    let mut total = 0;
    let mut good = 0;
    for y in 0..truth.height {
        for x in 0..truth.width {
            if let Some(t) = truth.get(x, y) {
                total += 1;
                if map.get(x, y).is_some_and(|f| (f - t).abs() <= tol) {
                    good += 1;
                }
            }
        }
    }
    (good, total)
}

pub fn random_probability(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}
