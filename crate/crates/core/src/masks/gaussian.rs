use rand_distr::{Distribution, Normal};

use super::{acs_columns, acs_disk_bits, columns_to_bits, SchemeParams, MAX_DRAWS};
use crate::error::{Error, Result};
use crate::grid::GridShape;
use crate::rng::{self, streams};

/// Standard deviation `4 * sqrt(mu)` for a normal centered at `mu`.
pub(crate) fn spread(mu: f64) -> f64 {
    4.0 * mu.sqrt()
}

/// Phase-encode lines drawn from `N(n_y/2, (4 sqrt(n_y/2))^2)` with
/// rejection of out-of-range and repeated lines, until `round(n_y/R)` lines
/// (ACS included) are set.
pub fn gaussian_1d(shape: GridShape, params: &SchemeParams) -> Result<Vec<bool>> {
    let n_y = shape.n_y();
    let mut cols = acs_columns(shape, params.accel.r_acs)?;
    let mut set = cols.iter().filter(|&&c| c).count();
    let target = (n_y as f64 / params.accel.accel).round() as usize;
    if target < set {
        return Err(Error::InfeasibleAcceleration {
            accel: params.accel.accel,
            lines: n_y as f64 / params.accel.accel,
            acs: set,
        });
    }
    let mu = n_y as f64 / 2.0;
    let normal = Normal::new(mu, spread(mu)).expect("positive spread");
    let mut rng = rng::stream(params.seed, streams::MASK);
    let mut draws = 0;
    while set < target {
        if draws == MAX_DRAWS {
            return Err(Error::SamplingStall { draws, set, target });
        }
        draws += 1;
        let j = normal.sample(&mut rng).round();
        if j < 0.0 || j >= n_y as f64 {
            continue;
        }
        let j = j as usize;
        if !cols[j] {
            cols[j] = true;
            set += 1;
        }
    }
    Ok(columns_to_bits(shape, &cols))
}

/// Cells drawn from a bivariate normal centered at `(n_x/2, n_y/2)` with
/// per-axis standard deviations `4 sqrt(n_x/2)` and `4 sqrt(n_y/2)`, on top
/// of a fully sampled centered ACS disk, until `round(n/R)` cells are set.
pub fn gaussian_2d(shape: GridShape, params: &SchemeParams) -> Result<Vec<bool>> {
    let mut bits = acs_disk_bits(shape, params.accel.r_acs);
    let mut set = bits.iter().filter(|&&b| b).count();
    let target = (shape.len() as f64 / params.accel.accel).round() as usize;
    if target < set {
        return Err(Error::InfeasibleAcceleration {
            accel: params.accel.accel,
            lines: shape.len() as f64 / params.accel.accel,
            acs: set,
        });
    }
    let (mx, my) = (shape.n_x() as f64 / 2.0, shape.n_y() as f64 / 2.0);
    let rows = Normal::new(mx, spread(mx)).expect("positive spread");
    let cols = Normal::new(my, spread(my)).expect("positive spread");
    let mut rng = rng::stream(params.seed, streams::MASK);
    let mut draws = 0;
    while set < target {
        if draws == MAX_DRAWS {
            return Err(Error::SamplingStall { draws, set, target });
        }
        draws += 1;
        let i = rows.sample(&mut rng).round();
        let j = cols.sample(&mut rng).round();
        if !shape.contains(i as isize, j as isize) || i < 0.0 || j < 0.0 {
            continue;
        }
        let idx = shape.index(i as usize, j as usize);
        if !bits[idx] {
            bits[idx] = true;
            set += 1;
        }
    }
    Ok(bits)
}
