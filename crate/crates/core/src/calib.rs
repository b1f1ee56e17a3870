//! Coil-sensitivity estimation from the autocalibration region.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{coil_power, CoilStack, MultiCoilKSpace, SamplingMask, SensitivityMaps};
use crate::operators::{ifft2c_in_place, rss};

/// Pixels whose ACS root-sum-of-squares falls below this fraction of the
/// maximum are treated as background and get zero sensitivity.
pub const RSS_THRESHOLD: f64 = 1e-9;

/// Zeroes k-space outside the mask's ACS submask on every coil.
pub fn extract_acs(ksp: &MultiCoilKSpace, mask: &SamplingMask) -> Result<MultiCoilKSpace> {
    ksp.shape().check_same(&mask.shape(), "extract_acs")?;
    let acs = mask.acs().ok_or(Error::MissingAcs)?;
    let mut out = ksp.clone();
    for plane in out.planes_mut() {
        for (z, &keep) in plane.iter_mut().zip(acs.bits()) {
            if !keep {
                *z = Complex64::default();
            }
        }
    }
    Ok(out)
}

/// Sensitivity maps `x_acs^k / RSS(x_acs)` from the ACS-restricted data.
pub fn estimate_sensitivities(ksp: &MultiCoilKSpace, mask: &SamplingMask) -> Result<SensitivityMaps> {
    let acs = mask.acs().ok_or(Error::MissingAcs)?;
    if acs.count() == 0 {
        return Err(Error::Estimation("ACS region is empty".into()));
    }
    let mut coil_imgs = extract_acs(ksp, mask)?;
    let shape = coil_imgs.shape();
    coil_imgs.planes_mut().for_each(|p| ifft2c_in_place(shape, p));
    let combined = rss(&coil_imgs);
    let peak = combined.max();
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::Estimation("ACS signal is zero".into()));
    }
    let floor = RSS_THRESHOLD * peak;
    for plane in coil_imgs.planes_mut() {
        for (z, &r) in plane.iter_mut().zip(combined.data()) {
            *z = if r < floor { Complex64::default() } else { *z / r };
        }
    }
    Ok(SensitivityMaps::new(coil_imgs))
}

/// Result of per-pixel coil-vector normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub maps: SensitivityMaps,
    /// Row-major indices of pixels whose coil vector was zero.
    pub zero_pixels: Vec<usize>,
}

/// Divides each pixel's coil vector by its l2 norm.
pub fn normalize(maps: &SensitivityMaps) -> Result<Normalized> {
    let power = coil_power(maps.stack());
    if power.iter().all(|&p| p == 0.0) {
        return Err(Error::Domain("sensitivity maps are zero everywhere".into()));
    }
    let zero_pixels: Vec<usize> = power
        .iter()
        .enumerate()
        .filter(|(_, &p)| p == 0.0)
        .map(|(k, _)| k)
        .collect();
    let mut stack: CoilStack = maps.stack().clone();
    for plane in stack.planes_mut() {
        for (z, &p) in plane.iter_mut().zip(&power) {
            if p > 0.0 {
                *z /= p.sqrt();
            }
        }
    }
    Ok(Normalized {
        maps: SensitivityMaps::new(stack),
        zero_pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{AcsRegion, ComplexImage, GridShape};
    use crate::operators::{expand, fft2c_coils, reduce};
    use crate::rng;
    use rand::Rng as _;

    fn shape(a: usize, b: usize) -> GridShape {
        GridShape::new(a, b).unwrap()
    }

    fn random_stack(n_c: usize, s: GridShape, seed: u64) -> CoilStack {
        let mut r = rng::stream(seed, 77);
        let data = (0..n_c * s.len())
            .map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
            .collect();
        CoilStack::from_vec(n_c, s, data).unwrap()
    }

    fn full_acs(s: GridShape) -> SamplingMask {
        SamplingMask::full(s)
            .with_acs(AcsRegion::disk(s, 1e9).unwrap())
            .unwrap()
    }

    #[test]
    fn extract_identity_and_missing() {
        let s = shape(8, 8);
        let k = random_stack(2, s, 1);
        assert_eq!(extract_acs(&k, &full_acs(s)).unwrap(), k);
        assert!(matches!(
            extract_acs(&k, &SamplingMask::full(s)),
            Err(Error::MissingAcs)
        ));
    }

    #[test]
    fn extract_degenerate_is_zero() {
        let s = shape(8, 8);
        let k = random_stack(2, s, 2);
        let m = SamplingMask::full(s).with_acs(AcsRegion::degenerate(s)).unwrap();
        let out = extract_acs(&k, &m).unwrap();
        assert_eq!(out.norm(), 0.0);
        assert!(m.acs().unwrap().is_degenerate());
    }

    #[test]
    fn extract_counts_line_band() {
        let s = shape(12, 32);
        let k = random_stack(3, s, 3);
        let m = SamplingMask::full(s)
            .with_acs(AcsRegion::lines(s, 13, 5).unwrap())
            .unwrap();
        let out = extract_acs(&k, &m).unwrap();
        for plane in out.planes() {
            assert_eq!(plane.iter().filter(|z| z.norm() > 0.0).count(), 5 * 12);
        }
    }

    #[test]
    fn single_coil_gives_phase() {
        let s = shape(8, 8);
        let img = random_stack(1, s, 4);
        let ksp = fft2c_coils(&img);
        let maps = estimate_sensitivities(&ksp, &full_acs(s)).unwrap();
        for (m, x) in maps.plane(0).iter().zip(img.plane(0)) {
            assert!((m.norm() - 1.0).abs() < 1e-12);
            assert!((m - x / x.norm()).norm() < 1e-10);
        }
    }

    #[test]
    fn two_coil_constants() {
        // coil images c1 * x and c2 * x give S^k = c_k / sqrt(|c1|^2 + |c2|^2)
        let s = shape(8, 8);
        let x = random_stack(1, s, 5).plane_image(0);
        let (c1, c2) = (Complex64::new(0.6, -0.3), Complex64::new(-0.2, 1.1));
        let planes = vec![
            ComplexImage::from_vec(s, x.data().iter().map(|v| c1 * v).collect()).unwrap(),
            ComplexImage::from_vec(s, x.data().iter().map(|v| c2 * v).collect()).unwrap(),
        ];
        let ksp = fft2c_coils(&CoilStack::from_planes(planes).unwrap());
        let maps = estimate_sensitivities(&ksp, &full_acs(s)).unwrap();
        let norm = (c1.norm_sqr() + c2.norm_sqr()).sqrt();
        for idx in 0..s.len() {
            let phase = x.data()[idx] / x.data()[idx].norm();
            assert!((maps.plane(0)[idx] - c1 / norm * phase).norm() < 1e-10);
            assert!((maps.plane(1)[idx] - c2 / norm * phase).norm() < 1e-10);
        }
        assert!(maps.power().iter().all(|p| (p - 1.0).abs() < 1e-6));
    }

    #[test]
    fn estimate_errors() {
        let s = shape(8, 8);
        let zero = CoilStack::zeros(2, s).unwrap();
        assert!(matches!(
            estimate_sensitivities(&zero, &full_acs(s)),
            Err(Error::Estimation(_))
        ));
        let k = random_stack(2, s, 6);
        let m = SamplingMask::full(s).with_acs(AcsRegion::degenerate(s)).unwrap();
        assert!(matches!(estimate_sensitivities(&k, &m), Err(Error::Estimation(_))));
    }

    #[test]
    fn normalize_properties() {
        let s = shape(6, 7);
        let raw = SensitivityMaps::new(random_stack(4, s, 7));
        let once = normalize(&raw).unwrap().maps;
        assert!(once.is_normalized());
        for p in once.power() {
            assert!((p - 1.0).abs() < 1e-12);
        }
        let twice = normalize(&once).unwrap().maps;
        for (a, b) in once.stack().data().iter().zip(twice.stack().data()) {
            assert!((a - b).norm() < 1e-12);
        }
        let mut scaled = raw.stack().clone();
        scaled.scale(7.0);
        let from_scaled = normalize(&SensitivityMaps::new(scaled)).unwrap().maps;
        for (a, b) in once.stack().data().iter().zip(from_scaled.stack().data()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn normalize_reports_zero_pixels() {
        let s = shape(4, 4);
        let mut stack = random_stack(2, s, 8);
        for k in 0..2 {
            stack.plane_mut(k)[5] = Complex64::default();
        }
        let out = normalize(&SensitivityMaps::new(stack)).unwrap();
        assert_eq!(out.zero_pixels, vec![5]);
        assert!(out.maps.is_normalized());
        assert!(normalize(&SensitivityMaps::new(CoilStack::zeros(2, s).unwrap())).is_err());
    }

    #[test]
    fn reduce_expand_roundtrip_with_estimates() {
        let s = shape(16, 16);
        let img = random_stack(3, s, 9);
        let maps = estimate_sensitivities(&fft2c_coils(&img), &full_acs(s)).unwrap();
        let x = random_stack(1, s, 10).plane_image(0);
        let back = reduce(&expand(&x, &maps).unwrap(), &maps).unwrap();
        for (a, b) in back.data().iter().zip(x.data()) {
            assert!((a - b).norm() < 1e-10);
        }
    }
}
