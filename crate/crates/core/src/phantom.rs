//! Synthetic ground truth: ellipse phantoms, ring coil arrays and noisy
//! multi-coil acquisition.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex64;

use crate::calib::normalize;
use crate::error::{Error, Result};
use crate::grid::{CoilStack, ComplexImage, GridShape, MultiCoilKSpace, RealImage, SensitivityMaps};
use crate::operators::{expand, fft2c_in_place};
use crate::rng::{self, streams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    /// The ten-ellipse head phantom with modified (high-contrast) intensities.
    EllipseStandard,
    /// Seeded random ellipses inside a head-like outline.
    RandomEllipses { n_ellipses: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomSpec {
    pub shape: GridShape,
    pub kind: PhantomKind,
    pub seed: u64,
}

/// One additive ellipse in normalized `[-1, 1]^2` coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub intensity: f64,
    /// Semi-axis along x (columns).
    pub a: f64,
    /// Semi-axis along y (rows, pointing up).
    pub b: f64,
    pub x0: f64,
    pub y0: f64,
    /// Rotation in degrees, counter-clockwise.
    pub phi_deg: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.phi_deg.to_radians().sin_cos();
        let (dx, dy) = (x - self.x0, y - self.y0);
        let xr = dx * c + dy * s;
        let yr = -dx * s + dy * c;
        (xr / self.a).powi(2) + (yr / self.b).powi(2) <= 1.0
    }
}

/// The ten ellipses of the standard head phantom.
pub const HEAD_ELLIPSES: [Ellipse; 10] = [
    Ellipse { intensity: 1.0, a: 0.69, b: 0.92, x0: 0.0, y0: 0.0, phi_deg: 0.0 },
    Ellipse { intensity: -0.8, a: 0.6624, b: 0.874, x0: 0.0, y0: -0.0184, phi_deg: 0.0 },
    Ellipse { intensity: -0.2, a: 0.11, b: 0.31, x0: 0.22, y0: 0.0, phi_deg: -18.0 },
    Ellipse { intensity: -0.2, a: 0.16, b: 0.41, x0: -0.22, y0: 0.0, phi_deg: 18.0 },
    Ellipse { intensity: 0.1, a: 0.21, b: 0.25, x0: 0.0, y0: 0.35, phi_deg: 0.0 },
    Ellipse { intensity: 0.1, a: 0.046, b: 0.046, x0: 0.0, y0: 0.1, phi_deg: 0.0 },
    Ellipse { intensity: 0.1, a: 0.046, b: 0.046, x0: 0.0, y0: -0.1, phi_deg: 0.0 },
    Ellipse { intensity: 0.1, a: 0.046, b: 0.023, x0: -0.08, y0: -0.605, phi_deg: 0.0 },
    Ellipse { intensity: 0.1, a: 0.023, b: 0.023, x0: 0.0, y0: -0.606, phi_deg: 0.0 },
    Ellipse { intensity: 0.1, a: 0.023, b: 0.046, x0: 0.06, y0: -0.605, phi_deg: 0.0 },
];

/// Normalized coordinates of the center of cell `(i, j)`.
pub fn cell_coordinates(shape: GridShape, i: usize, j: usize) -> (f64, f64) {
    let x = (2.0 * j as f64 + 1.0 - shape.n_y() as f64) / shape.n_y() as f64;
    let y = (shape.n_x() as f64 - 2.0 * i as f64 - 1.0) / shape.n_x() as f64;
    (x, y)
}

pub fn random_ellipses(n_ellipses: usize, seed: u64) -> Vec<Ellipse> {
    let mut r = rng::stream(seed, streams::PHANTOM);
    let mut out = Vec::with_capacity(n_ellipses.max(1));
    out.push(Ellipse {
        intensity: r.random_range(0.7..1.0),
        a: r.random_range(0.6..0.85),
        b: r.random_range(0.7..0.92),
        x0: r.random_range(-0.05..0.05),
        y0: r.random_range(-0.05..0.05),
        phi_deg: r.random_range(-15.0..15.0),
    });
    for _ in 1..n_ellipses {
        let rho = 0.45 * r.random::<f64>().sqrt();
        let theta = TAU * r.random::<f64>();
        out.push(Ellipse {
            intensity: r.random_range(-0.4..0.4),
            a: r.random_range(0.04..0.25),
            b: r.random_range(0.04..0.25),
            x0: rho * theta.cos(),
            y0: rho * theta.sin(),
            phi_deg: r.random_range(0.0..180.0),
        });
    }
    out
}

/// Rasterizes additive ellipses, clipping the sum to `[0, 1]`.
pub fn render_ellipses(shape: GridShape, ellipses: &[Ellipse]) -> RealImage {
    let mut img = RealImage::zeros(shape);
    for i in 0..shape.n_x() {
        for j in 0..shape.n_y() {
            let (x, y) = cell_coordinates(shape, i, j);
            let v: f64 = ellipses
                .iter()
                .filter(|e| e.contains(x, y))
                .map(|e| e.intensity)
                .sum();
            img.data_mut()[shape.index(i, j)] = v.clamp(0.0, 1.0);
        }
    }
    img
}

pub fn make_phantom(spec: &PhantomSpec) -> RealImage {
    match spec.kind {
        PhantomKind::EllipseStandard => render_ellipses(spec.shape, &HEAD_ELLIPSES),
        PhantomKind::RandomEllipses { n_ellipses } => {
            render_ellipses(spec.shape, &random_ellipses(n_ellipses, spec.seed))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoilArraySpec {
    pub n_c: usize,
    /// Gaussian bump standard deviation as a fraction of `min(n_x, n_y)`.
    pub width: f64,
    pub seed: u64,
}

impl CoilArraySpec {
    pub const DEFAULT_WIDTH: f64 = 0.35;

    pub fn new(n_c: usize, seed: u64) -> Self {
        CoilArraySpec {
            n_c,
            width: Self::DEFAULT_WIDTH,
            seed,
        }
    }
}

/// Grid position of coil `k`'s anchor on the ring of radius `min(n_x, n_y) / 2`.
pub fn coil_anchor(shape: GridShape, n_c: usize, k: usize) -> (f64, f64) {
    let (cx, cy) = shape.center();
    let ring = 0.5 * shape.n_x().min(shape.n_y()) as f64;
    let theta = TAU * k as f64 / n_c as f64;
    (cx as f64 - ring * theta.cos(), cy as f64 + ring * theta.sin())
}

/// Unnormalized complex Gaussian bumps with a smooth linear phase each.
pub fn coil_profiles(spec: &CoilArraySpec, shape: GridShape) -> Result<CoilStack> {
    if spec.n_c == 0 {
        return Err(Error::param("coil count must be at least 1"));
    }
    if !(spec.width > 0.0) {
        return Err(Error::param(format!("coil width must be positive, got {}", spec.width)));
    }
    let side = shape.n_x().min(shape.n_y()) as f64;
    let sigma = spec.width * side;
    let (cx, cy) = shape.center();
    let mut r = rng::stream(spec.seed, streams::COILS);
    let mut stack = CoilStack::zeros(spec.n_c, shape)?;
    for k in 0..spec.n_c {
        let (ai, aj) = coil_anchor(shape, spec.n_c, k);
        let phase0 = TAU * r.random::<f64>();
        let direction = TAU * r.random::<f64>();
        // at most half a turn of phase across the grid
        let slope = PI / side * r.random::<f64>();
        let plane = stack.plane_mut(k);
        for i in 0..shape.n_x() {
            for j in 0..shape.n_y() {
                let d2 = (i as f64 - ai).powi(2) + (j as f64 - aj).powi(2);
                let mag = (-d2 / (2.0 * sigma * sigma)).exp();
                let along = (i as f64 - cx as f64) * direction.cos() + (j as f64 - cy as f64) * direction.sin();
                plane[shape.index(i, j)] = Complex64::from_polar(mag, phase0 + slope * along);
            }
        }
    }
    Ok(stack)
}

/// Normalized ring-array sensitivity maps.
pub fn make_coils(spec: &CoilArraySpec, shape: GridShape) -> Result<SensitivityMaps> {
    let raw = SensitivityMaps::new(coil_profiles(spec, shape)?);
    Ok(normalize(&raw)?.maps)
}

/// `y^k = F(S^k x) + e^k` with complex Gaussian noise of standard deviation
/// `noise_sigma` on both the real and imaginary parts.
pub fn simulate_acquisition(
    img: &ComplexImage,
    maps: &SensitivityMaps,
    noise_sigma: f64,
    seed: u64,
) -> Result<MultiCoilKSpace> {
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::param(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    let mut ksp = expand(img, maps)?;
    let shape = ksp.shape();
    ksp.planes_mut().for_each(|p| fft2c_in_place(shape, p));
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("finite sigma");
        let mut r = rng::stream(seed, streams::NOISE);
        for z in ksp.data_mut() {
            *z += Complex64::new(normal.sample(&mut r), normal.sample(&mut r));
        }
    }
    Ok(ksp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{fft2c, ifft2c_coils, rss};

    fn shape(a: usize, b: usize) -> GridShape {
        GridShape::new(a, b).unwrap()
    }

    #[test]
    fn phantoms_in_unit_range_and_seeded() {
        let s = shape(64, 64);
        let std = make_phantom(&PhantomSpec { shape: s, kind: PhantomKind::EllipseStandard, seed: 0 });
        assert!(std.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(std.max(), 1.0);
        let spec = PhantomSpec { shape: s, kind: PhantomKind::RandomEllipses { n_ellipses: 8 }, seed: 5 };
        let a = make_phantom(&spec);
        assert!(a.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(a, make_phantom(&spec));
        assert_ne!(a, make_phantom(&PhantomSpec { seed: 6, ..spec }));
    }

    #[test]
    fn standard_phantom_matches_membership_oracle() {
        // independent evaluation via the implicit ellipse equation in
        // pixel units
        let s = shape(64, 64);
        let img = make_phantom(&PhantomSpec { shape: s, kind: PhantomKind::EllipseStandard, seed: 0 });
        for i in 0..64 {
            for j in 0..64 {
                let x = (j as f64 + 0.5) / 32.0 - 1.0;
                let y = 1.0 - (i as f64 + 0.5) / 32.0;
                let mut v = 0.0;
                for e in HEAD_ELLIPSES {
                    let t = e.phi_deg * PI / 180.0;
                    let u = ((x - e.x0) * t.cos() + (y - e.y0) * t.sin()) / e.a;
                    let w = ((y - e.y0) * t.cos() - (x - e.x0) * t.sin()) / e.b;
                    if u * u + w * w <= 1.0 {
                        v += e.intensity;
                    }
                }
                let v: f64 = v;
                assert!((img.get(i, j) - v.clamp(0.0, 1.0)).abs() < 1e-12, "({i}, {j})");
            }
        }
    }

    #[test]
    fn coils_are_normalized() {
        let s = shape(40, 48);
        for n_c in [1, 4, 8] {
            let maps = make_coils(&CoilArraySpec::new(n_c, 3), s).unwrap();
            assert!(maps.is_normalized());
            assert!(maps.power().iter().all(|p| (p - 1.0).abs() < 1e-6));
        }
        let single = make_coils(&CoilArraySpec::new(1, 3), s).unwrap();
        assert!(single.plane(0).iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn coil_peaks_near_anchors() {
        // argmax oracle on the raw bump magnitudes
        let s = shape(64, 64);
        let raw = coil_profiles(&CoilArraySpec::new(8, 1), s).unwrap();
        for k in 0..8 {
            let (idx, _) = raw
                .plane(k)
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
                .unwrap();
            let (pi, pj) = ((idx / 64) as f64, (idx % 64) as f64);
            let (ai, aj) = coil_anchor(s, 8, k);
            let (ai, aj) = (ai.clamp(0.0, 63.0), aj.clamp(0.0, 63.0));
            assert!((pi - ai).hypot(pj - aj) <= 2.0, "coil {k}: peak ({pi},{pj}) anchor ({ai},{aj})");
        }
    }

    #[test]
    fn noiseless_single_coil_is_fft() {
        let s = shape(16, 16);
        let img = ComplexImage::from_real(&make_phantom(&PhantomSpec {
            shape: s,
            kind: PhantomKind::EllipseStandard,
            seed: 0,
        }));
        let ones = SensitivityMaps::new(
            CoilStack::from_vec(1, s, vec![Complex64::new(1.0, 0.0); 256]).unwrap(),
        );
        let ksp = simulate_acquisition(&img, &ones, 0.0, 1).unwrap();
        assert_eq!(ksp.plane(0), fft2c(&img).data());
        assert!(simulate_acquisition(&img, &ones, -1.0, 1).is_err());
    }

    #[test]
    fn noiseless_rss_recovers_magnitude() {
        let s = shape(32, 32);
        let truth = make_phantom(&PhantomSpec { shape: s, kind: PhantomKind::EllipseStandard, seed: 0 });
        let maps = make_coils(&CoilArraySpec::new(4, 2), s).unwrap();
        let ksp = simulate_acquisition(&ComplexImage::from_real(&truth), &maps, 0.0, 0).unwrap();
        let rec = rss(&ifft2c_coils(&ksp));
        for (a, b) in rec.data().iter().zip(truth.data()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn noise_standard_deviation() {
        // sample-std oracle over 64x64x4 complex entries
        let s = shape(64, 64);
        let maps = make_coils(&CoilArraySpec::new(4, 2), s).unwrap();
        let sigma = 0.3;
        let ksp = simulate_acquisition(&ComplexImage::zeros(s), &maps, sigma, 9).unwrap();
        let vals: Vec<f64> = ksp.data().iter().flat_map(|z| [z.re, z.im]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        assert!((var.sqrt() / sigma - 1.0).abs() <= 0.05);
        let again = simulate_acquisition(&ComplexImage::zeros(s), &maps, sigma, 9).unwrap();
        assert_eq!(ksp, again);
    }
}
