//! Centered orthonormal Fourier transforms and the multi-coil operator
//! algebra `A = U F E_S`, `A* = R_S F^-1 U`.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{CoilStack, ComplexImage, GridShape, MultiCoilKSpace, RealImage, SamplingMask, SensitivityMaps};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

/// Unnormalized in-place 2D DFT of a row-major plane.
fn dft2_in_place(shape: GridShape, buf: &mut [Complex64], direction: FftDirection) {
    let (n_x, n_y) = (shape.n_x(), shape.n_y());
    let rows = plan(n_y, direction);
    let mut scratch = vec![Complex64::default(); rows.get_inplace_scratch_len()];
    for row in buf.chunks_exact_mut(n_y) {
        rows.process_with_scratch(row, &mut scratch);
    }
    let cols = plan(n_x, direction);
    scratch.resize(cols.get_inplace_scratch_len(), Complex64::default());
    let mut column = vec![Complex64::default(); n_x];
    for j in 0..n_y {
        for (i, c) in column.iter_mut().enumerate() {
            *c = buf[i * n_y + j];
        }
        cols.process_with_scratch(&mut column, &mut scratch);
        for (i, c) in column.iter().enumerate() {
            buf[i * n_y + j] = *c;
        }
    }
}

/// Circular shift moving index `k` to `(k + shift) mod n` along both axes.
fn roll(shape: GridShape, buf: &mut [Complex64], sx: usize, sy: usize) {
    let (n_x, n_y) = (shape.n_x(), shape.n_y());
    let src = buf.to_vec();
    for i in 0..n_x {
        let di = (i + sx) % n_x;
        for j in 0..n_y {
            buf[di * n_y + (j + sy) % n_y] = src[i * n_y + j];
        }
    }
}

/// Centered, orthonormal forward transform of one plane, in place.
pub(crate) fn fft2c_in_place(shape: GridShape, buf: &mut [Complex64]) {
    transform_centered(shape, buf, FftDirection::Forward)
}

pub(crate) fn ifft2c_in_place(shape: GridShape, buf: &mut [Complex64]) {
    transform_centered(shape, buf, FftDirection::Inverse)
}

fn transform_centered(shape: GridShape, buf: &mut [Complex64], direction: FftDirection) {
    let (n_x, n_y) = (shape.n_x(), shape.n_y());
    // ifftshift: DC from n/2 to 0
    roll(shape, buf, n_x - n_x / 2, n_y - n_y / 2);
    dft2_in_place(shape, buf, direction);
    // fftshift: DC from 0 to n/2
    roll(shape, buf, n_x / 2, n_y / 2);
    let scale = 1.0 / (shape.len() as f64).sqrt();
    buf.iter_mut().for_each(|z| *z *= scale);
}

/// Centered orthonormal 2D DFT with DC at `(n_x / 2, n_y / 2)`.
pub fn fft2c(img: &ComplexImage) -> ComplexImage {
    let mut data = img.data().to_vec();
    fft2c_in_place(img.shape(), &mut data);
    ComplexImage::from_raw(img.shape(), data)
}

/// Exact inverse of [`fft2c`].
pub fn ifft2c(ksp: &ComplexImage) -> ComplexImage {
    let mut data = ksp.data().to_vec();
    ifft2c_in_place(ksp.shape(), &mut data);
    ComplexImage::from_raw(ksp.shape(), data)
}

pub fn fft2c_coils(stack: &CoilStack) -> CoilStack {
    let mut out = stack.clone();
    let shape = stack.shape();
    out.planes_mut().for_each(|p| fft2c_in_place(shape, p));
    out
}

pub fn ifft2c_coils(stack: &CoilStack) -> CoilStack {
    let mut out = stack.clone();
    let shape = stack.shape();
    out.planes_mut().for_each(|p| ifft2c_in_place(shape, p));
    out
}

/// `E_S`: coil images `S^k * img`.
pub fn expand(img: &ComplexImage, maps: &SensitivityMaps) -> Result<CoilStack> {
    img.shape().check_same(&maps.shape(), "expand")?;
    let mut out = CoilStack::zeros(maps.n_c(), img.shape())?;
    for (k, plane) in out.planes_mut().enumerate() {
        for ((o, s), x) in plane.iter_mut().zip(maps.plane(k)).zip(img.data()) {
            *o = s * x;
        }
    }
    Ok(out)
}

/// `R_S`: `sum_k conj(S^k) * z^k`.
pub fn reduce(coil_imgs: &CoilStack, maps: &SensitivityMaps) -> Result<ComplexImage> {
    coil_imgs.check_compatible(maps.stack(), "reduce")?;
    let mut out = vec![Complex64::default(); coil_imgs.shape().len()];
    for (k, plane) in coil_imgs.planes().enumerate() {
        for ((o, z), s) in out.iter_mut().zip(plane).zip(maps.plane(k)) {
            *o += s.conj() * z;
        }
    }
    Ok(ComplexImage::from_raw(coil_imgs.shape(), out))
}

/// Zeroes every unsampled entry, identically on all coils.
pub fn apply_mask(ksp: &MultiCoilKSpace, mask: &SamplingMask) -> Result<MultiCoilKSpace> {
    let mut out = ksp.clone();
    apply_mask_in_place(&mut out, mask)?;
    Ok(out)
}

pub(crate) fn apply_mask_in_place(ksp: &mut MultiCoilKSpace, mask: &SamplingMask) -> Result<()> {
    ksp.shape().check_same(&mask.shape(), "apply_mask")?;
    for plane in ksp.planes_mut() {
        for (z, &b) in plane.iter_mut().zip(mask.bits()) {
            if !b {
                *z = Complex64::default();
            }
        }
    }
    Ok(())
}

/// Multi-coil forward model `A_{U,S} = U F E_S`.
#[derive(Debug, Clone)]
pub struct ForwardOperator {
    mask: SamplingMask,
    maps: SensitivityMaps,
}

impl ForwardOperator {
    pub fn new(mask: SamplingMask, maps: SensitivityMaps) -> Result<Self> {
        mask.shape().check_same(&maps.shape(), "forward operator")?;
        if !maps.is_normalized() {
            return Err(Error::param("sensitivity maps must be normalized"));
        }
        Ok(ForwardOperator { mask, maps })
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn maps(&self) -> &SensitivityMaps {
        &self.maps
    }

    pub fn shape(&self) -> GridShape {
        self.mask.shape()
    }

    pub fn forward(&self, img: &ComplexImage) -> Result<MultiCoilKSpace> {
        let mut out = expand(img, &self.maps)?;
        let shape = out.shape();
        out.planes_mut().for_each(|p| fft2c_in_place(shape, p));
        apply_mask_in_place(&mut out, &self.mask)?;
        Ok(out)
    }

    pub fn adjoint(&self, ksp: &MultiCoilKSpace) -> Result<ComplexImage> {
        let mut tmp = apply_mask(ksp, &self.mask)?;
        let shape = tmp.shape();
        tmp.planes_mut().for_each(|p| ifft2c_in_place(shape, p));
        reduce(&tmp, &self.maps)
    }

    /// `A*A x`, the normal operator.
    pub fn normal(&self, img: &ComplexImage) -> Result<ComplexImage> {
        self.adjoint(&self.forward(img)?)
    }
}

pub fn forward(op: &ForwardOperator, img: &ComplexImage) -> Result<MultiCoilKSpace> {
    op.forward(img)
}

pub fn adjoint(op: &ForwardOperator, ksp: &MultiCoilKSpace) -> Result<ComplexImage> {
    op.adjoint(ksp)
}

/// Root-sum-of-squares coil combination.
pub fn rss(coil_imgs: &CoilStack) -> RealImage {
    let power = crate::grid::coil_power(coil_imgs);
    let data = power.into_iter().map(f64::sqrt).collect();
    RealImage::from_vec(coil_imgs.shape(), data).expect("power has one entry per cell")
}

/// Magnitude of the sensitivity-weighted combination `|R_S(z)|`.
pub fn sense_combine(coil_imgs: &CoilStack, maps: &SensitivityMaps) -> Result<RealImage> {
    Ok(reduce(coil_imgs, maps)?.abs())
}
