use rand::Rng;

use super::{acs_columns, columns_to_bits, SchemeParams};
use crate::error::{Error, Result};
use crate::grid::GridShape;
use crate::rng::{self, streams};

/// Spacing candidates are scanned on a 1/16-line lattice.
const SPACING_STEPS_PER_LINE: usize = 16;

fn target_lines(shape: GridShape, params: &SchemeParams) -> f64 {
    shape.n_y() as f64 / params.accel.accel
}

fn check_feasible(shape: GridShape, params: &SchemeParams, acs: &[bool]) -> Result<usize> {
    let acs_count = acs.iter().filter(|&&c| c).count();
    let lines = target_lines(shape, params);
    if lines + 1e-9 < acs_count as f64 {
        return Err(Error::InfeasibleAcceleration {
            accel: params.accel.accel,
            lines,
            acs: acs_count,
        });
    }
    Ok(acs_count)
}

/// Lines drawn independently with probability `(n_y/R - L) / (n_y - L)`
/// over all columns, then united with the ACS band.
pub fn random_rectilinear(shape: GridShape, params: &SchemeParams) -> Result<Vec<bool>> {
    let mut cols = acs_columns(shape, params.accel.r_acs)?;
    let acs_count = check_feasible(shape, params, &cols)?;
    let n_y = shape.n_y();
    let p = if acs_count == n_y {
        1.0
    } else {
        ((target_lines(shape, params) - acs_count as f64) / (n_y - acs_count) as f64).clamp(0.0, 1.0)
    };
    let mut rng = rng::stream(params.seed, streams::MASK);
    for c in cols.iter_mut() {
        let u: f64 = rng.random();
        *c |= u < p;
    }
    Ok(columns_to_bits(shape, &cols))
}

/// Column indices `round(offset + k * spacing)` inside the grid.
fn progression(n_y: usize, spacing: f64, offset: usize) -> impl Iterator<Item = usize> {
    (0..)
        .map(move |k| (offset as f64 + k as f64 * spacing).round() as usize)
        .take_while(move |&j| j < n_y)
}

/// Integer start offsets admissible for a spacing: `0 <= o < spacing`.
fn offset_count(spacing: f64) -> usize {
    (spacing.ceil() as usize).max(1)
}

fn spacing_candidates(n_y: usize) -> impl Iterator<Item = f64> {
    (0..=SPACING_STEPS_PER_LINE * (n_y - 1))
        .map(|k| 1.0 + k as f64 / SPACING_STEPS_PER_LINE as f64)
}

fn union_count(acs: &[bool], lines: impl Iterator<Item = usize>) -> usize {
    let mut cols = acs.to_vec();
    lines.for_each(|j| cols[j] = true);
    cols.iter().filter(|&&c| c).count()
}

/// Picks the spacing whose line count (with ACS) is closest to `n_y / R`,
/// preferring the smaller spacing on ties. `offset_for` chooses the start
/// line for a given spacing.
fn best_spacing<F>(shape: GridShape, params: &SchemeParams, acs: &[bool], mut offset_for: F) -> (f64, usize)
where
    F: FnMut(f64) -> usize,
{
    let n_y = shape.n_y();
    let target = target_lines(shape, params);
    let mut best: Option<(f64, f64, usize)> = None;
    for spacing in spacing_candidates(n_y) {
        let offset = offset_for(spacing);
        let count = union_count(acs, progression(n_y, spacing, offset));
        let err = (count as f64 - target).abs();
        if best.is_none_or(|(e, _, _)| err < e - 1e-12) {
            best = Some((err, spacing, offset));
        }
    }
    let (_, spacing, offset) = best.expect("at least one spacing candidate");
    (spacing, offset)
}

fn finish(shape: GridShape, mut acs: Vec<bool>, spacing: f64, offset: usize) -> Vec<bool> {
    progression(shape.n_y(), spacing, offset).for_each(|j| acs[j] = true);
    columns_to_bits(shape, &acs)
}

/// Lines on an arithmetic progression with a random start offset, united
/// with the ACS band.
pub fn equispaced_rectilinear(shape: GridShape, params: &SchemeParams) -> Result<Vec<bool>> {
    let acs = acs_columns(shape, params.accel.r_acs)?;
    check_feasible(shape, params, &acs)?;
    let u: f64 = rng::stream(params.seed, streams::MASK_OFFSET).random();
    let pinned = params.offset;
    let (spacing, offset) = best_spacing(shape, params, &acs, |spacing| {
        let m = offset_count(spacing);
        match pinned {
            Some(o) => o.rem_euclid(m as i64) as usize,
            None => ((u * spacing).floor() as usize).min(m - 1),
        }
    });
    Ok(finish(shape, acs, spacing, offset))
}

/// `|S ∪ mirror(S)|` with `mirror(k) = n_y - 1 - k`.
fn mirrored_union(n_y: usize, spacing: f64, offset: usize) -> usize {
    let mut seen = vec![false; n_y];
    for j in progression(n_y, spacing, offset) {
        seen[j] = true;
        seen[n_y - 1 - j] = true;
    }
    seen.iter().filter(|&&s| s).count()
}

/// Start offsets that maximize the union of the line set with its mirror.
pub(crate) fn interleaving_offsets(n_y: usize, spacing: f64) -> Vec<usize> {
    let m = offset_count(spacing);
    let scores: Vec<usize> = (0..m).map(|o| mirrored_union(n_y, spacing, o)).collect();
    let top = *scores.iter().max().expect("at least one offset");
    (0..m).filter(|&o| scores[o] == top).collect()
}

/// Equispaced lines whose offset interleaves the pattern with its
/// conjugate mirror instead of letting the two coincide.
pub fn equispaced_plus_rectilinear(shape: GridShape, params: &SchemeParams) -> Result<Vec<bool>> {
    let acs = acs_columns(shape, params.accel.r_acs)?;
    check_feasible(shape, params, &acs)?;
    let u: f64 = rng::stream(params.seed, streams::MASK_OFFSET).random();
    let n_y = shape.n_y();
    let (spacing, offset) = best_spacing(shape, params, &acs, |spacing| {
        let ties = interleaving_offsets(n_y, spacing);
        ties[((u * ties.len() as f64) as usize).min(ties.len() - 1)]
    });
    Ok(finish(shape, acs, spacing, offset))
}
