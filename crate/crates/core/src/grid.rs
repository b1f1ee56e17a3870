//! Domain types shared by every stage of the pipeline.
//!
//! All planar data is stored row-major: cell `(i, j)` lives at `i * n_y + j`,
//! where `i` indexes rows (frequency-encode) and `j` indexes columns
//! (phase-encode). Coil stacks are coil-major: plane `k` occupies
//! `k * n .. (k + 1) * n`.

use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridShape {
    n_x: usize,
    n_y: usize,
}

impl GridShape {
    pub fn new(n_x: usize, n_y: usize) -> Result<Self> {
        if n_x < 2 || n_y < 2 {
            return Err(Error::param(format!(
                "grid must be at least 2x2, got {n_x}x{n_y}"
            )));
        }
        Ok(GridShape { n_x, n_y })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn transposed(&self) -> Self {
        GridShape {
            n_x: self.n_y,
            n_y: self.n_x,
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_y + j
    }

    /// Integer DC position `(n_x / 2, n_y / 2)` used by the centered FFT.
    pub fn center(&self) -> (usize, usize) {
        (self.n_x / 2, self.n_y / 2)
    }

    pub fn contains(&self, i: isize, j: isize) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.n_x && (j as usize) < self.n_y
    }

    pub(crate) fn check_same(&self, other: &GridShape, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::shape(format!("{what}: {self} vs {other}")));
        }
        Ok(())
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.n_x, self.n_y)
    }
}

impl FromStr for GridShape {
    type Err = Error;

    /// Parses `HxW`, e.g. `128x96`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::param(format!("shape `{s}` is not of the form HxW")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::param(format!("bad shape dimension `{v}`")))
        };
        GridShape::new(parse(a)?, parse(b)?)
    }
}

/// Distance from cell `(i, j)` to the DC cell of the centered grid.
pub fn kspace_radius(shape: GridShape, i: usize, j: usize) -> Result<f64> {
    if i >= shape.n_x || j >= shape.n_y {
        return Err(Error::IndexOutOfRange {
            i,
            j,
            n_x: shape.n_x,
            n_y: shape.n_y,
        });
    }
    Ok(radius_unchecked(shape, i as f64, j as f64))
}

#[inline]
pub(crate) fn radius_unchecked(shape: GridShape, i: f64, j: f64) -> f64 {
    let (cx, cy) = shape.center();
    (i - cx as f64).hypot(j - cy as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    shape: GridShape,
    data: Vec<Complex64>,
}

impl ComplexImage {
    pub fn zeros(shape: GridShape) -> Self {
        ComplexImage {
            shape,
            data: vec![Complex64::new(0.0, 0.0); shape.len()],
        }
    }

    pub fn from_vec(shape: GridShape, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::shape(format!(
                "{} values for a {shape} image",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("image contains non-finite values".into()));
        }
        Ok(ComplexImage { shape, data })
    }

    pub fn from_real(img: &RealImage) -> Self {
        ComplexImage {
            shape: img.shape,
            data: img.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub(crate) fn from_raw(shape: GridShape, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), shape.len());
        ComplexImage { shape, data }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[self.shape.index(i, j)]
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Hermitian inner product `sum conj(self) * other`.
    pub fn dot(&self, other: &ComplexImage) -> Complex64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn abs(&self) -> RealImage {
        RealImage {
            shape: self.shape,
            data: self.data.iter().map(|z| z.norm()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    shape: GridShape,
    data: Vec<f64>,
}

impl RealImage {
    pub fn zeros(shape: GridShape) -> Self {
        RealImage {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    pub fn from_vec(shape: GridShape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::shape(format!(
                "{} values for a {shape} image",
                data.len()
            )));
        }
        Ok(RealImage { shape, data })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.shape.index(i, j)]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, factor: f64) -> RealImage {
        RealImage {
            shape: self.shape,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }
}

/// A stack of `n_c` complex planes: multi-coil k-space or coil images.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilStack {
    n_c: usize,
    shape: GridShape,
    data: Vec<Complex64>,
}

/// Acquired multi-channel frequency-domain measurements.
pub type MultiCoilKSpace = CoilStack;

impl CoilStack {
    pub fn zeros(n_c: usize, shape: GridShape) -> Result<Self> {
        if n_c == 0 {
            return Err(Error::param("coil count must be at least 1"));
        }
        Ok(CoilStack {
            n_c,
            shape,
            data: vec![Complex64::new(0.0, 0.0); n_c * shape.len()],
        })
    }

    pub fn from_vec(n_c: usize, shape: GridShape, data: Vec<Complex64>) -> Result<Self> {
        if n_c == 0 {
            return Err(Error::param("coil count must be at least 1"));
        }
        if data.len() != n_c * shape.len() {
            return Err(Error::shape(format!(
                "{} values for {n_c} coils of {shape}",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("coil data contains non-finite values".into()));
        }
        Ok(CoilStack { n_c, shape, data })
    }

    pub fn from_planes(planes: Vec<ComplexImage>) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::param("coil count must be at least 1"))?;
        let shape = first.shape;
        let n_c = planes.len();
        let mut data = Vec::with_capacity(n_c * shape.len());
        for p in planes {
            shape.check_same(&p.shape, "coil plane")?;
            data.extend(p.data);
        }
        Ok(CoilStack { n_c, shape, data })
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn plane(&self, k: usize) -> &[Complex64] {
        let n = self.shape.len();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn plane_mut(&mut self, k: usize) -> &mut [Complex64] {
        let n = self.shape.len();
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn planes(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks_exact(self.shape.len())
    }

    pub fn planes_mut(&mut self) -> impl Iterator<Item = &mut [Complex64]> {
        let n = self.shape.len();
        self.data.chunks_exact_mut(n)
    }

    pub fn plane_image(&self, k: usize) -> ComplexImage {
        ComplexImage::from_raw(self.shape, self.plane(k).to_vec())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &CoilStack) -> Complex64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|z| *z *= factor);
    }

    pub(crate) fn check_compatible(&self, other: &CoilStack, what: &str) -> Result<()> {
        self.shape.check_same(&other.shape, what)?;
        if self.n_c != other.n_c {
            return Err(Error::shape(format!(
                "{what}: {} vs {} coils",
                self.n_c, other.n_c
            )));
        }
        Ok(())
    }
}

/// Per-coil complex spatial sensitivity profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMaps {
    stack: CoilStack,
    normalized: bool,
}

impl SensitivityMaps {
    /// Wraps a coil stack; the normalized flag is derived from the data.
    pub fn new(stack: CoilStack) -> Self {
        let normalized = is_normalized(&stack, 1e-6);
        SensitivityMaps { stack, normalized }
    }

    pub fn stack(&self) -> &CoilStack {
        &self.stack
    }

    pub fn into_stack(self) -> CoilStack {
        self.stack
    }

    pub fn n_c(&self) -> usize {
        self.stack.n_c
    }

    pub fn shape(&self) -> GridShape {
        self.stack.shape
    }

    pub fn plane(&self, k: usize) -> &[Complex64] {
        self.stack.plane(k)
    }

    /// True when every pixel's coil vector has unit norm or is exactly zero.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Per-pixel `sum_k |S^k|^2`.
    pub fn power(&self) -> Vec<f64> {
        coil_power(&self.stack)
    }
}

pub(crate) fn coil_power(stack: &CoilStack) -> Vec<f64> {
    let mut acc = vec![0.0; stack.shape.len()];
    for plane in stack.planes() {
        for (a, z) in acc.iter_mut().zip(plane) {
            *a += z.norm_sqr();
        }
    }
    acc
}

fn is_normalized(stack: &CoilStack, tol: f64) -> bool {
    coil_power(stack)
        .iter()
        .all(|&p| p == 0.0 || (p - 1.0).abs() <= tol)
}

/// The eight retrospective subsampling schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    RandomRect,
    EquispacedRect,
    EquispacedPlusRect,
    Gaussian1D,
    Vdpd,
    Gaussian2D,
    Radial,
    Spiral,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::RandomRect,
        Scheme::EquispacedRect,
        Scheme::EquispacedPlusRect,
        Scheme::Gaussian1D,
        Scheme::Vdpd,
        Scheme::Gaussian2D,
        Scheme::Radial,
        Scheme::Spiral,
    ];

    /// Line-by-line schemes that keep or drop whole phase-encode lines.
    pub fn is_rectilinear(self) -> bool {
        matches!(
            self,
            Scheme::RandomRect
                | Scheme::EquispacedRect
                | Scheme::EquispacedPlusRect
                | Scheme::Gaussian1D
        )
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Scheme> {
        Scheme::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::param(format!("unknown scheme code {code}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::RandomRect => "random",
            Scheme::EquispacedRect => "equispaced",
            Scheme::EquispacedPlusRect => "equispaced_plus",
            Scheme::Gaussian1D => "gaussian_1d",
            Scheme::Vdpd => "vdpd",
            Scheme::Gaussian2D => "gaussian_2d",
            Scheme::Radial => "radial",
            Scheme::Spiral => "spiral",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '+'], "_");
        let scheme = match key.as_str() {
            "random" | "random_rect" => Scheme::RandomRect,
            "equispaced" | "equispaced_rect" => Scheme::EquispacedRect,
            "equispaced_plus" | "equispaced_" | "equispaced_plus_rect" => {
                Scheme::EquispacedPlusRect
            }
            "gaussian_1d" | "gaussian1d" => Scheme::Gaussian1D,
            "vdpd" | "poisson" => Scheme::Vdpd,
            "gaussian_2d" | "gaussian2d" => Scheme::Gaussian2D,
            "radial" => Scheme::Radial,
            "spiral" => Scheme::Spiral,
            _ => return Err(Error::param(format!("unknown scheme `{s}`"))),
        };
        Ok(scheme)
    }
}

/// How the ACS region of a mask was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AcsGeometry {
    /// `count` full phase-encode lines starting at column `start`.
    Lines { start: usize, count: usize },
    /// All cells with `kspace_radius <= radius`.
    Disk { radius: f64 },
    /// Center cell unsampled: the region is empty.
    Degenerate,
}

/// The fully sampled autocalibration submask `U_ACS`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcsRegion {
    geometry: AcsGeometry,
    bits: Vec<bool>,
}

impl AcsRegion {
    pub fn lines(shape: GridShape, start: usize, count: usize) -> Result<Self> {
        if count == 0 || start + count > shape.n_y {
            return Err(Error::param(format!(
                "ACS lines {start}..{} outside {} columns",
                start + count,
                shape.n_y
            )));
        }
        let mut bits = vec![false; shape.len()];
        for i in 0..shape.n_x {
            for j in start..start + count {
                bits[shape.index(i, j)] = true;
            }
        }
        Ok(AcsRegion {
            geometry: AcsGeometry::Lines { start, count },
            bits,
        })
    }

    pub fn disk(shape: GridShape, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::param(format!("bad ACS disk radius {radius}")));
        }
        let mut bits = vec![false; shape.len()];
        for i in 0..shape.n_x {
            for j in 0..shape.n_y {
                bits[shape.index(i, j)] = radius_unchecked(shape, i as f64, j as f64) <= radius;
            }
        }
        Ok(AcsRegion {
            geometry: AcsGeometry::Disk { radius },
            bits,
        })
    }

    pub fn degenerate(shape: GridShape) -> Self {
        AcsRegion {
            geometry: AcsGeometry::Degenerate,
            bits: vec![false; shape.len()],
        }
    }

    pub fn geometry(&self) -> AcsGeometry {
        self.geometry
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self.geometry, AcsGeometry::Degenerate)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// A binary Cartesian sampling mask (the diagonal operator `U`).
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    shape: GridShape,
    bits: Vec<bool>,
    scheme: Option<Scheme>,
    accel_target: f64,
    seed: u64,
    acs: Option<AcsRegion>,
}

impl SamplingMask {
    /// A hand-built mask with no scheme metadata.
    pub fn from_bits(shape: GridShape, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != shape.len() {
            return Err(Error::shape(format!(
                "{} mask cells for a {shape} grid",
                bits.len()
            )));
        }
        let set = bits.iter().filter(|&&b| b).count().max(1);
        Ok(SamplingMask {
            shape,
            bits,
            scheme: None,
            accel_target: shape.len() as f64 / set as f64,
            seed: 0,
            acs: None,
        })
    }

    pub fn full(shape: GridShape) -> Self {
        SamplingMask {
            shape,
            bits: vec![true; shape.len()],
            scheme: None,
            accel_target: 1.0,
            seed: 0,
            acs: None,
        }
    }

    pub fn with_metadata(mut self, scheme: Option<Scheme>, accel_target: f64, seed: u64) -> Self {
        self.scheme = scheme;
        self.accel_target = accel_target;
        self.seed = seed;
        self
    }

    /// Attaches an ACS submask; it must be contained in the sampled cells.
    pub fn with_acs(mut self, acs: AcsRegion) -> Result<Self> {
        if acs.bits.len() != self.bits.len() {
            return Err(Error::shape("ACS region size differs from mask"));
        }
        if acs.bits.iter().zip(&self.bits).any(|(&a, &b)| a && !b) {
            return Err(Error::param("ACS region is not contained in the mask"));
        }
        self.acs = Some(acs);
        Ok(self)
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[self.shape.index(i, j)]
    }

    pub fn scheme(&self) -> Option<Scheme> {
        self.scheme
    }

    pub fn accel_target(&self) -> f64 {
        self.accel_target
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn acs(&self) -> Option<&AcsRegion> {
        self.acs.as_ref()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Mask and shape transposed together; ACS metadata is dropped.
    pub fn transposed(&self) -> SamplingMask {
        let t = self.shape.transposed();
        let mut bits = vec![false; t.len()];
        for i in 0..self.shape.n_x {
            for j in 0..self.shape.n_y {
                bits[t.index(j, i)] = self.bits[self.shape.index(i, j)];
            }
        }
        SamplingMask {
            shape: t,
            bits,
            scheme: self.scheme,
            accel_target: self.accel_target,
            seed: self.seed,
            acs: None,
        }
    }

    /// `n / |U|`, the achieved acceleration factor.
    pub fn achieved_acceleration(&self) -> Result<f64> {
        achieved_acceleration(self)
    }
}

pub fn achieved_acceleration(mask: &SamplingMask) -> Result<f64> {
    match mask.count() {
        0 => Err(Error::EmptyMask),
        set => Ok(mask.shape.len() as f64 / set as f64),
    }
}

/// Target acceleration `R`, ACS fraction and relative tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelerationSpec {
    pub accel: f64,
    pub r_acs: f64,
    pub tolerance: f64,
}

impl AccelerationSpec {
    pub const DEFAULT_TOLERANCE: f64 = 0.10;

    pub fn new(accel: f64, r_acs: f64) -> Result<Self> {
        Self::with_tolerance(accel, r_acs, Self::DEFAULT_TOLERANCE)
    }

    /// `r_acs = 0` disables the ACS region.
    pub fn with_tolerance(accel: f64, r_acs: f64, tolerance: f64) -> Result<Self> {
        if !(accel >= 1.0) || !accel.is_finite() {
            return Err(Error::param(format!("acceleration must be >= 1, got {accel}")));
        }
        if !(0.0..1.0).contains(&r_acs) {
            return Err(Error::param(format!("ACS fraction must lie in [0, 1), got {r_acs}")));
        }
        if !(tolerance > 0.0) {
            return Err(Error::param(format!("tolerance must be positive, got {tolerance}")));
        }
        Ok(AccelerationSpec {
            accel,
            r_acs,
            tolerance,
        })
    }

    /// Standard ACS fraction paired with `R = 2, 4, 8`.
    pub fn default_acs_fraction(accel: f64) -> f64 {
        if accel <= 2.0 {
            0.16
        } else if accel <= 4.0 {
            0.08
        } else {
            0.04
        }
    }
}
