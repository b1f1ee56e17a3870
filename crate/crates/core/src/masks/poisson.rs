//! Variable-density Poisson-disk sampling on the Cartesian lattice.
//!
//! Bridson's dart throwing with a radius-dependent exclusion distance
//! `d(r) = d0 * (1 + s * r)`. Candidates are snapped to lattice cells before
//! the distance test, so the spacing bound holds exactly for the emitted
//! cells. The slope `s` is found by bisection against the target
//! acceleration.

use std::f64::consts::TAU;

use rand::Rng;

use super::{acs_disk_bits, check_calibrated, SchemeParams, MAX_BISECTIONS};
use crate::error::{Error, Result};
use crate::grid::{radius_unchecked, GridShape};
use crate::rng::{self, streams};

/// Base spacing in cells. With `d0 = 1` the zero-slope pattern can fill
/// every cell, which keeps low accelerations reachable.
pub const BASE_SPACING: f64 = 1.0;
/// Candidate draws per active point before it is retired.
const ATTEMPTS: usize = 30;

/// A calibrated VDPD pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct VdpdLayout {
    /// All sampled cells, ACS included.
    pub bits: Vec<bool>,
    /// Cells placed by dart throwing (outside the ACS disk).
    pub darts: Vec<bool>,
    pub acs: Vec<bool>,
    pub slope: f64,
    pub base_spacing: f64,
}

/// Local exclusion distance at cell `(i, j)`.
pub fn exclusion_distance(shape: GridShape, base: f64, slope: f64, i: f64, j: f64) -> f64 {
    base * (1.0 + slope * radius_unchecked(shape, i, j))
}

fn dart_throw(shape: GridShape, acs: &[bool], slope: f64, seed: u64) -> Vec<bool> {
    let (n_x, n_y) = (shape.n_x() as isize, shape.n_y() as isize);
    let mut darts = vec![false; shape.len()];
    let mut rng = rng::stream(seed, streams::MASK);
    let dist = |i: isize, j: isize| exclusion_distance(shape, BASE_SPACING, slope, i as f64, j as f64);

    let free: Vec<usize> = (0..shape.len()).filter(|&k| !acs[k]).collect();
    if free.is_empty() {
        return darts;
    }
    let first = free[rng.random_range(0..free.len())];
    let mut active = vec![((first / shape.n_y()) as isize, (first % shape.n_y()) as isize)];
    darts[first] = true;

    while !active.is_empty() {
        let pick = rng.random_range(0..active.len());
        let (pi, pj) = active[pick];
        let d_p = dist(pi, pj);
        let mut placed = false;
        for _ in 0..ATTEMPTS {
            let rho = d_p * (1.0 + rng.random::<f64>());
            let theta = TAU * rng.random::<f64>();
            let qi = (pi as f64 + rho * theta.cos()).round() as isize;
            let qj = (pj as f64 + rho * theta.sin()).round() as isize;
            if qi < 0 || qj < 0 || qi >= n_x || qj >= n_y {
                continue;
            }
            let q = shape.index(qi as usize, qj as usize);
            if acs[q] || darts[q] {
                continue;
            }
            let d_q = dist(qi, qj);
            // any conflicting sample lies within d_q of q
            let reach = d_q.floor() as isize;
            let mut ok = true;
            'scan: for ei in (qi - reach).max(0)..=(qi + reach).min(n_x - 1) {
                for ej in (qj - reach).max(0)..=(qj + reach).min(n_y - 1) {
                    if !darts[shape.index(ei as usize, ej as usize)] {
                        continue;
                    }
                    let gap = ((ei - qi) as f64).hypot((ej - qj) as f64);
                    if gap < d_q.min(dist(ei, ej)) {
                        ok = false;
                        break 'scan;
                    }
                }
            }
            if ok {
                darts[q] = true;
                active.push((qi, qj));
                placed = true;
                break;
            }
        }
        if !placed {
            active.swap_remove(pick);
        }
    }
    darts
}

fn union(acs: &[bool], darts: &[bool]) -> Vec<bool> {
    acs.iter().zip(darts).map(|(&a, &d)| a || d).collect()
}

fn accel_of(shape: GridShape, bits: &[bool]) -> f64 {
    shape.len() as f64 / bits.iter().filter(|&&b| b).count().max(1) as f64
}

/// Variable-density Poisson-disk mask calibrated to the target acceleration.
pub fn vdpd(shape: GridShape, params: &SchemeParams) -> Result<VdpdLayout> {
    let target = params.accel.accel;
    let tol = params.accel.tolerance;
    let acs = acs_disk_bits(shape, params.accel.r_acs);
    let layout = |slope: f64| {
        let darts = dart_throw(shape, &acs, slope, params.seed);
        let bits = union(&acs, &darts);
        let accel = accel_of(shape, &bits);
        (accel, VdpdLayout {
            bits,
            darts,
            acs: acs.clone(),
            slope,
            base_spacing: BASE_SPACING,
        })
    };

    let (a_lo, at_zero) = layout(0.0);
    if a_lo >= target {
        check_calibrated(target, a_lo, tol, (a_lo, a_lo))?;
        return Ok(at_zero);
    }
    // acceleration with only the ACS disk is the ceiling
    let ceiling = accel_of(shape, &acs);
    if ceiling < target * (1.0 - tol) {
        return Err(Error::Calibration {
            target,
            lo: a_lo,
            hi: ceiling,
        });
    }

    let mut best = (a_lo, at_zero);
    let rel = |a: f64| (a - target).abs() / target;
    let (mut lo, mut hi) = (0.0f64, 0.01f64);
    let mut steps = 0;
    loop {
        let (a, l) = layout(hi);
        steps += 1;
        if rel(a) < rel(best.0) {
            best = (a, l);
        }
        if a >= target || steps >= MAX_BISECTIONS / 2 {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    while steps < MAX_BISECTIONS && rel(best.0) > tol / 4.0 {
        let mid = 0.5 * (lo + hi);
        let (a, l) = layout(mid);
        steps += 1;
        if rel(a) < rel(best.0) {
            best = (a, l);
        }
        if a < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    check_calibrated(target, best.0, tol, (a_lo, ceiling))?;
    Ok(best.1)
}
