//! Image quality metrics on real-valued magnitude images.
//!
//! `u` is always the reference and `v` the prediction.

use crate::error::{Error, Result};
use crate::grid::RealImage;

/// Side of the square SSIM window.
pub const SSIM_WINDOW: usize = 7;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// SSIM, pSNR and NMSE for one reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRecord {
    pub ssim: f64,
    /// `f64::INFINITY` when the images are identical.
    pub psnr_db: f64,
    pub nmse: f64,
}

impl MetricRecord {
    pub fn evaluate(reference: &RealImage, prediction: &RealImage) -> Result<Self> {
        Ok(MetricRecord {
            ssim: ssim(reference, prediction)?,
            psnr_db: psnr(reference, prediction)?,
            nmse: nmse(reference, prediction)?,
        })
    }

    /// SSIM as reported in result tables (x100).
    pub fn reported_ssim(&self) -> f64 {
        self.ssim * 100.0
    }

    /// NMSE as reported in result tables (x1000).
    pub fn reported_nmse(&self) -> f64 {
        self.nmse * 1000.0
    }
}

fn check_pair(u: &RealImage, v: &RealImage) -> Result<()> {
    u.shape().check_same(&v.shape(), "metric inputs")
}

/// Inclusive-exclusive 2D prefix sums with a zero border row and column.
fn prefix_sums(n_x: usize, n_y: usize, f: impl Fn(usize) -> f64) -> Vec<f64> {
    let w = n_y + 1;
    let mut table = vec![0.0; (n_x + 1) * w];
    for i in 0..n_x {
        let mut row = 0.0;
        for j in 0..n_y {
            row += f(i * n_y + j);
            table[(i + 1) * w + j + 1] = table[i * w + j + 1] + row;
        }
    }
    table
}

fn window_sum(table: &[f64], n_y: usize, i: usize, j: usize, k: usize) -> f64 {
    let w = n_y + 1;
    table[(i + k) * w + j + k] - table[i * w + j + k] - table[(i + k) * w + j] + table[i * w + j]
}

/// Mean SSIM over every fully contained 7x7 window, uniform weights.
///
/// The stabilizing constants are `(0.01 L)^2` and `(0.03 L)^2` with `L` the
/// dynamic range of the reference (`L = 1` for a constant reference). Window
/// variances and covariance use the unbiased `N - 1` normalization.
pub fn ssim(u: &RealImage, v: &RealImage) -> Result<f64> {
    check_pair(u, v)?;
    let s = u.shape();
    let (n_x, n_y) = (s.n_x(), s.n_y());
    let k = SSIM_WINDOW;
    if n_x < k || n_y < k {
        return Err(Error::param(format!("SSIM needs at least a {k}x{k} image, got {s}")));
    }
    let mut range = u.max() - u.min();
    if range == 0.0 {
        range = 1.0;
    }
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let (ud, vd) = (u.data(), v.data());
    let su = prefix_sums(n_x, n_y, |i| ud[i]);
    let sv = prefix_sums(n_x, n_y, |i| vd[i]);
    let suu = prefix_sums(n_x, n_y, |i| ud[i] * ud[i]);
    let svv = prefix_sums(n_x, n_y, |i| vd[i] * vd[i]);
    let suv = prefix_sums(n_x, n_y, |i| ud[i] * vd[i]);
    let np = (k * k) as f64;
    let cov_norm = np / (np - 1.0);
    let mut total = 0.0;
    let mut windows = 0usize;
    for i in 0..=n_x - k {
        for j in 0..=n_y - k {
            let mu_u = window_sum(&su, n_y, i, j, k) / np;
            let mu_v = window_sum(&sv, n_y, i, j, k) / np;
            let var_u = cov_norm * (window_sum(&suu, n_y, i, j, k) / np - mu_u * mu_u);
            let var_v = cov_norm * (window_sum(&svv, n_y, i, j, k) / np - mu_v * mu_v);
            let cov = cov_norm * (window_sum(&suv, n_y, i, j, k) / np - mu_u * mu_v);
            total += ((2.0 * mu_u * mu_v + c1) * (2.0 * cov + c2))
                / ((mu_u * mu_u + mu_v * mu_v + c1) * (var_u + var_v + c2));
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

fn squared_error(u: &RealImage, v: &RealImage) -> f64 {
    u.data()
        .iter()
        .zip(v.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// `20 log10(max(u) / sqrt(MSE))`; infinite for identical images.
pub fn psnr(u: &RealImage, v: &RealImage) -> Result<f64> {
    check_pair(u, v)?;
    let peak = u.max();
    if !(peak > 0.0) {
        return Err(Error::Domain(format!("pSNR needs a positive reference peak, got {peak}")));
    }
    let mse = squared_error(u, v) / u.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (peak / mse.sqrt()).log10())
}

/// `||u - v||^2 / ||u||^2`.
pub fn nmse(u: &RealImage, v: &RealImage) -> Result<f64> {
    check_pair(u, v)?;
    let energy: f64 = u.data().iter().map(|a| a * a).sum();
    if energy == 0.0 {
        return Err(Error::Domain("NMSE reference is zero".into()));
    }
    Ok(squared_error(u, v) / energy)
}

/// `||u - v||_1 + (1 - SSIM(u, v))`.
pub fn combined_loss(reference: &RealImage, prediction: &RealImage) -> Result<f64> {
    check_pair(reference, prediction)?;
    let l1: f64 = reference
        .data()
        .iter()
        .zip(prediction.data())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(l1 + 1.0 - ssim(reference, prediction)?)
}
