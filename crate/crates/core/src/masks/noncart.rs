//! Radial and spiral trajectories rasterized onto the Cartesian grid.
//!
//! Radial masks are `N` straight spokes through the DC cell; spiral masks
//! are `N` Archimedean arms starting at DC. The trajectory count is found by
//! bisection so the mask hits the target acceleration. Spirals additionally
//! fine-tune the arm pitch when a whole number of arms cannot land inside the
//! tolerance.

use std::f64::consts::{PI, TAU};

use rand::Rng;

use super::{calibrate_count, check_calibrated, SchemeParams, MAX_BISECTIONS};
use crate::error::Result;
use crate::grid::GridShape;
use crate::rng::{self, streams};

/// Golden-angle increment for radial spokes, `pi * (sqrt(5) - 1) / 2`.
pub const RADIAL_GOLDEN_ANGLE: f64 = PI * 0.618_033_988_749_894_8;

fn mark(shape: GridShape, bits: &mut [bool], i: f64, j: f64) -> bool {
    let (ri, rj) = (i.round() as isize, j.round() as isize);
    if shape.contains(ri, rj) {
        bits[shape.index(ri as usize, rj as usize)] = true;
        true
    } else {
        false
    }
}

fn count(bits: &[bool]) -> usize {
    bits.iter().filter(|&&b| b).count()
}

fn accel_of(shape: GridShape, bits: &[bool]) -> f64 {
    shape.len() as f64 / count(bits).max(1) as f64
}

/// Fractional rotation drawn from the seed, in `[0, 1)`.
fn seeded_jitter(seed: u64) -> f64 {
    rng::stream(seed, streams::MASK_OFFSET).random()
}

fn spoke_rotation(params: &SchemeParams, spokes: usize) -> f64 {
    match params.offset {
        Some(o) => (o as f64 * RADIAL_GOLDEN_ANGLE).rem_euclid(PI),
        None => seeded_jitter(params.seed) * PI / spokes as f64,
    }
}

/// Rasterizes `spokes` center-crossing lines at angles `pi * j / spokes + rotation`.
pub(crate) fn radial_with_count(shape: GridShape, params: &SchemeParams, spokes: usize) -> Vec<bool> {
    let mut bits = vec![false; shape.len()];
    let (cx, cy) = shape.center();
    let (cx, cy) = (cx as f64, cy as f64);
    let rotation = spoke_rotation(params, spokes);
    for s in 0..spokes {
        let theta = PI * s as f64 / spokes as f64 + rotation;
        let (dx, dy) = (theta.cos(), theta.sin());
        // unit step along the dominant axis
        let major = dx.abs().max(dy.abs());
        let (sx, sy) = (dx / major, dy / major);
        mark(shape, &mut bits, cx, cy);
        for sign in [1.0, -1.0] {
            let mut t = 1.0;
            while mark(shape, &mut bits, cx + sign * t * sx, cy + sign * t * sy) {
                t += 1.0;
            }
        }
    }
    bits
}

/// Radial spokes calibrated to the target acceleration.
pub fn radial_sim(shape: GridShape, params: &SchemeParams) -> Result<Vec<bool>> {
    let target = params.accel.accel;
    let max_spokes = 2 * (shape.n_x() + shape.n_y());
    let (spokes, achieved) = calibrate_count(target, max_spokes, |n| {
        Ok(accel_of(shape, &radial_with_count(shape, params, n)))
    })?;
    let range = (
        accel_of(shape, &radial_with_count(shape, params, max_spokes)),
        accel_of(shape, &radial_with_count(shape, params, 1)),
    );
    check_calibrated(target, achieved, params.accel.tolerance, range)?;
    Ok(radial_with_count(shape, params, spokes))
}

/// Default arm pitch: one full turn per half of the smaller grid side.
fn default_pitch(shape: GridShape) -> f64 {
    shape.n_x().min(shape.n_y()) as f64 / 2.0 / TAU
}

/// Rasterizes `arms` Archimedean arms `rho = pitch * phi` with arc-length
/// steps of at most half a cell.
fn spiral_with(shape: GridShape, params: &SchemeParams, arms: usize, pitch: f64) -> Vec<bool> {
    let mut bits = vec![false; shape.len()];
    let (cx, cy) = shape.center();
    let (cx, cy) = (cx as f64, cy as f64);
    let reach = (shape.n_x() as f64).hypot(shape.n_y() as f64) / 2.0 + 1.0;
    let offset = params.offset.unwrap_or(0) as f64 + seeded_jitter(params.seed);
    for a in 0..arms {
        let base = TAU * (a as f64 + offset) / arms as f64;
        let mut phi = 0.0f64;
        loop {
            let rho = pitch * phi;
            if rho > reach {
                break;
            }
            let angle = phi + base;
            mark(shape, &mut bits, cx + rho * angle.cos(), cy + rho * angle.sin());
            phi += 0.5 / rho.hypot(pitch);
        }
    }
    bits
}

/// Spiral arms calibrated to the target acceleration.
pub fn spiral_sim(shape: GridShape, params: &SchemeParams) -> Result<Vec<bool>> {
    let target = params.accel.accel;
    let tol = params.accel.tolerance;
    let pitch = default_pitch(shape);
    let max_arms = 2 * (shape.n_x() + shape.n_y());
    let (arms, achieved) = calibrate_count(target, max_arms, |n| {
        Ok(accel_of(shape, &spiral_with(shape, params, n, pitch)))
    })?;
    let rel = |a: f64| (a - target).abs() / target;
    if rel(achieved) <= tol / 2.0 {
        return Ok(spiral_with(shape, params, arms, pitch));
    }
    // A tighter pitch lengthens every arm and lowers the acceleration.
    let mut best = (achieved, pitch);
    let (mut lo, mut hi) = if achieved > target {
        (pitch / 4.0, pitch)
    } else {
        (pitch, pitch * 4.0)
    };
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let a = accel_of(shape, &spiral_with(shape, params, arms, mid));
        if rel(a) < rel(best.0) {
            best = (a, mid);
        }
        if rel(best.0) <= tol / 4.0 {
            break;
        }
        if a > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let range = (
        accel_of(shape, &spiral_with(shape, params, max_arms, pitch)),
        accel_of(shape, &spiral_with(shape, params, 1, pitch)),
    );
    check_calibrated(target, best.0, tol, range)?;
    Ok(spiral_with(shape, params, arms, best.1))
}
