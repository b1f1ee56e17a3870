//! Retrospective Cartesian subsampling masks.
//!
//! Four line-by-line (rectilinear) schemes keep or drop whole phase-encode
//! columns and carry a band of centered ACS lines. VDPD and Gaussian 2D
//! sample individual cells around a fully sampled centered ACS disk. Radial
//! and spiral patterns rasterize center-crossing trajectories and take the
//! largest fully sampled centered disk as their ACS region.
//!
//! Every generator is a pure function of `(shape, params)`.

mod gaussian;
mod noncart;
mod poisson;
mod rect;

use crate::error::{Error, Result};
use crate::grid::{
    radius_unchecked, AccelerationSpec, AcsRegion, GridShape, SamplingMask, Scheme,
};

pub use gaussian::{gaussian_1d, gaussian_2d};
pub use noncart::{radial_sim, spiral_sim};
pub use poisson::{vdpd, VdpdLayout};
pub use rect::{equispaced_plus_rectilinear, equispaced_rectilinear, random_rectilinear};

/// Cap on rejection-sampling draws before giving up.
pub const MAX_DRAWS: usize = 1_000_000;
/// Cap on bisection steps for acceleration calibration.
pub const MAX_BISECTIONS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub scheme: Scheme,
    pub accel: AccelerationSpec,
    pub seed: u64,
    /// Pins the equispaced start line, or the rotation offset of the
    /// radial and spiral patterns. Drawn from the seed when absent.
    pub offset: Option<i64>,
}

impl SchemeParams {
    pub fn new(scheme: Scheme, accel: AccelerationSpec, seed: u64) -> Self {
        SchemeParams {
            scheme,
            accel,
            seed,
            offset: None,
        }
    }

    pub fn with_offset(mut self, offset: i64) -> Self {
        self.offset = Some(offset);
        self
    }
}

/// Start and length of the centered ACS line band.
pub(crate) fn acs_line_range(shape: GridShape, r_acs: f64) -> Result<(usize, usize)> {
    if !(r_acs > 0.0 && r_acs < 1.0) {
        return Err(Error::param(format!("ACS fraction must lie in (0, 1), got {r_acs}")));
    }
    let n_y = shape.n_y();
    let count = (r_acs * n_y as f64).round() as usize;
    if count == 0 {
        return Err(Error::DegenerateAcs { r_acs, n_y });
    }
    Ok(((n_y - count) / 2, count))
}

/// The centered band of `round(r_acs * n_y)` fully sampled phase-encode lines.
pub fn acs_lines(shape: GridShape, r_acs: f64) -> Result<SamplingMask> {
    let (start, count) = acs_line_range(shape, r_acs)?;
    let region = AcsRegion::lines(shape, start, count)?;
    SamplingMask::from_bits(shape, region.bits().to_vec())?.with_acs(region)
}

/// Radius of the centered ACS disk covering fraction `r_acs` of the grid area.
pub fn acs_disk_radius(shape: GridShape, r_acs: f64) -> f64 {
    (shape.len() as f64 * r_acs / std::f64::consts::PI).sqrt()
}

/// Expands per-column flags into a full row-major mask.
pub(crate) fn columns_to_bits(shape: GridShape, columns: &[bool]) -> Vec<bool> {
    let mut bits = Vec::with_capacity(shape.len());
    for _ in 0..shape.n_x() {
        bits.extend_from_slice(columns);
    }
    bits
}

pub(crate) fn acs_columns(shape: GridShape, r_acs: f64) -> Result<Vec<bool>> {
    let mut cols = vec![false; shape.n_y()];
    if r_acs > 0.0 {
        let (start, count) = acs_line_range(shape, r_acs)?;
        cols[start..start + count].iter_mut().for_each(|c| *c = true);
    }
    Ok(cols)
}

pub(crate) fn acs_disk_bits(shape: GridShape, r_acs: f64) -> Vec<bool> {
    if r_acs > 0.0 {
        AcsRegion::disk(shape, acs_disk_radius(shape, r_acs))
            .map(|r| r.bits().to_vec())
            .unwrap_or_else(|_| vec![false; shape.len()])
    } else {
        vec![false; shape.len()]
    }
}

fn relative_error(accel: f64, target: f64) -> f64 {
    (accel - target).abs() / target
}

/// Finds the integer trajectory count whose mask acceleration is closest to
/// the target. `accel_of(count)` must decrease (noisily) with `count`.
pub(crate) fn calibrate_count<F>(target: f64, max_count: usize, mut accel_of: F) -> Result<(usize, f64)>
where
    F: FnMut(usize) -> Result<f64>,
{
    let mut cache = std::collections::BTreeMap::new();
    let mut eval = |c: usize| -> Result<f64> {
        if let Some(&v) = cache.get(&c) {
            return Ok(v);
        }
        let v = accel_of(c)?;
        cache.insert(c, v);
        Ok(v)
    };
    let (mut lo, mut hi) = (1usize, max_count.max(1));
    // smallest count with accel <= target
    let mut steps = 0;
    while hi - lo > 1 && steps < MAX_BISECTIONS {
        let mid = lo + (hi - lo) / 2;
        if eval(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
        steps += 1;
    }
    let mut best = (hi, eval(hi)?);
    for c in [lo.saturating_sub(1), lo, hi + 1] {
        if c == 0 || c > max_count {
            continue;
        }
        let f = eval(c)?;
        if relative_error(f, target) < relative_error(best.1, target) {
            best = (c, f);
        }
    }
    Ok(best)
}

pub(crate) fn check_calibrated(target: f64, achieved: f64, tolerance: f64, range: (f64, f64)) -> Result<()> {
    if relative_error(achieved, target) <= tolerance {
        Ok(())
    } else {
        Err(Error::Calibration {
            target,
            lo: range.0,
            hi: range.1,
        })
    }
}

/// Largest centered disk whose cells are all sampled.
///
/// Cells outside the grid count as unsampled. The region holds every cell
/// strictly closer to the center than the nearest unsampled lattice point;
/// its recorded radius is the largest cell radius inside it. A mask whose
/// center cell is unset yields a degenerate, empty region.
pub fn largest_sampled_disk(mask: &SamplingMask) -> Result<AcsRegion> {
    let shape = mask.shape();
    if mask.count() == 0 {
        return Err(Error::EmptyMask);
    }
    let (cx, cy) = shape.center();
    if !mask.get(cx, cy) {
        return Ok(AcsRegion::degenerate(shape));
    }
    let mut nearest_unset = [cx + 1, shape.n_x() - cx, cy + 1, shape.n_y() - cy]
        .into_iter()
        .min()
        .expect("four candidates") as f64;
    for i in 0..shape.n_x() {
        for j in 0..shape.n_y() {
            if !mask.get(i, j) {
                nearest_unset = nearest_unset.min(radius_unchecked(shape, i as f64, j as f64));
            }
        }
    }
    let mut radius = 0.0f64;
    for i in 0..shape.n_x() {
        for j in 0..shape.n_y() {
            let r = radius_unchecked(shape, i as f64, j as f64);
            if r < nearest_unset {
                radius = radius.max(r);
            }
        }
    }
    AcsRegion::disk(shape, radius)
}

/// Generates the mask for `params.scheme` and attaches its ACS submask.
pub fn generate(shape: GridShape, params: &SchemeParams) -> Result<SamplingMask> {
    let accel = params.accel.accel;
    if accel > shape.len() as f64 {
        return Err(Error::param(format!(
            "acceleration {accel} exceeds the {} cells of the grid",
            shape.len()
        )));
    }
    let r_acs = params.accel.r_acs;
    let (bits, acs) = match params.scheme {
        Scheme::RandomRect
        | Scheme::EquispacedRect
        | Scheme::EquispacedPlusRect
        | Scheme::Gaussian1D => {
            let bits = match params.scheme {
                Scheme::RandomRect => random_rectilinear(shape, params)?,
                Scheme::EquispacedRect => equispaced_rectilinear(shape, params)?,
                Scheme::EquispacedPlusRect => equispaced_plus_rectilinear(shape, params)?,
                _ => gaussian_1d(shape, params)?,
            };
            let acs = if r_acs > 0.0 {
                let (start, count) = acs_line_range(shape, r_acs)?;
                Some(AcsRegion::lines(shape, start, count)?)
            } else {
                None
            };
            (bits, acs)
        }
        Scheme::Vdpd | Scheme::Gaussian2D => {
            let bits = if params.scheme == Scheme::Vdpd {
                vdpd(shape, params)?.bits
            } else {
                gaussian_2d(shape, params)?
            };
            let acs = if r_acs > 0.0 {
                Some(AcsRegion::disk(shape, acs_disk_radius(shape, r_acs))?)
            } else {
                None
            };
            (bits, acs)
        }
        Scheme::Radial | Scheme::Spiral => {
            let bits = if params.scheme == Scheme::Radial {
                radial_sim(shape, params)?
            } else {
                spiral_sim(shape, params)?
            };
            let probe = SamplingMask::from_bits(shape, bits.clone())?;
            let acs = largest_sampled_disk(&probe)?;
            (bits, Some(acs))
        }
    };
    let mask = SamplingMask::from_bits(shape, bits)?.with_metadata(
        Some(params.scheme),
        accel,
        params.seed,
    );
    match acs {
        Some(region) => mask.with_acs(region),
        None => Ok(mask),
    }
}
