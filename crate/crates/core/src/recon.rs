//! Classical reconstructions: zero-filled, unrolled gradient descent and
//! CG-SENSE.
//!
//! Iterative solvers rescale the measured k-space so that the largest
//! zero-filled coil-image magnitude is 1, solve, then undo the scaling.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{ComplexImage, MultiCoilKSpace, RealImage, SamplingMask, SensitivityMaps};
use crate::operators::{expand, fft2c_in_place, ifft2c_coils, reduce, rss, sense_combine, ForwardOperator};

/// Coil combination for zero-filled reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    Rss,
    Sense,
}

/// Per-coil inverse transform followed by RSS or SENSE combination.
pub fn zero_filled(ksp: &MultiCoilKSpace, combine: Combine, maps: Option<&SensitivityMaps>) -> Result<RealImage> {
    let coil_imgs = ifft2c_coils(ksp);
    match (combine, maps) {
        (Combine::Rss, _) => Ok(rss(&coil_imgs)),
        (Combine::Sense, Some(m)) => sense_combine(&coil_imgs, m),
        (Combine::Sense, None) => Err(Error::param("SENSE combination needs sensitivity maps")),
    }
}

/// One k-space update `y_t - alpha * U(y_t - y~) + F E_S(w)`.
///
/// `correction` carries the regularizer image `w` and the maps used to
/// expand it; `None` means a zero correction.
pub fn dc_step(
    y_t: &MultiCoilKSpace,
    y_tilde: &MultiCoilKSpace,
    mask: &SamplingMask,
    alpha: f64,
    correction: Option<(&ComplexImage, &SensitivityMaps)>,
) -> Result<MultiCoilKSpace> {
    y_t.check_compatible(y_tilde, "dc_step")?;
    y_t.shape().check_same(&mask.shape(), "dc_step mask")?;
    let mut out = y_t.clone();
    let bits = mask.bits();
    let n = bits.len();
    for ((o, y), (idx, t)) in out
        .data_mut()
        .iter_mut()
        .zip(y_t.data())
        .zip(y_tilde.data().iter().enumerate())
    {
        if bits[idx % n] {
            *o = y - alpha * (y - t);
        }
    }
    if let Some((w, maps)) = correction {
        let mut extra = expand(w, maps)?;
        extra.check_compatible(y_t, "dc_step correction")?;
        let shape = extra.shape();
        extra.planes_mut().for_each(|p| fft2c_in_place(shape, p));
        for (o, e) in out.data_mut().iter_mut().zip(extra.data()) {
            *o += e;
        }
    }
    Ok(out)
}

/// Image-to-image correction `H(w)` added at every unrolled step.
pub trait Regularizer: Send + Sync + fmt::Debug {
    fn correction(&self, w: &ComplexImage) -> ComplexImage;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroMap;

impl Regularizer for ZeroMap {
    fn correction(&self, w: &ComplexImage) -> ComplexImage {
        ComplexImage::zeros(w.shape())
    }
}

/// `H(w) = shrink(w) - w`: magnitude soft-thresholding with the phase kept.
#[derive(Debug, Clone, Copy)]
pub struct SoftThreshold {
    pub threshold: f64,
}

impl Regularizer for SoftThreshold {
    fn correction(&self, w: &ComplexImage) -> ComplexImage {
        let data = w
            .data()
            .iter()
            .map(|z| {
                let m = z.norm();
                if m <= self.threshold {
                    -z
                } else {
                    -z * (self.threshold / m)
                }
            })
            .collect();
        ComplexImage::from_raw(w.shape(), data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Image,
    KSpace,
}

#[derive(Debug, Clone)]
pub struct UnrolledConfig {
    pub alphas: Vec<f64>,
    pub regularizer: Arc<dyn Regularizer>,
    pub domain: Domain,
}

impl UnrolledConfig {
    pub const DEFAULT_STEPS: usize = 8;

    /// `steps` iterations with unit step sizes and no regularizer.
    pub fn new(steps: usize, domain: Domain) -> Result<Self> {
        let cfg = UnrolledConfig {
            alphas: vec![1.0; steps],
            regularizer: Arc::new(ZeroMap),
            domain,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_alphas(mut self, alphas: Vec<f64>) -> Result<Self> {
        self.alphas = alphas;
        self.validate()?;
        Ok(self)
    }

    pub fn with_regularizer(mut self, h: Arc<dyn Regularizer>) -> Self {
        self.regularizer = h;
        self
    }

    pub fn steps(&self) -> usize {
        self.alphas.len()
    }

    fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(Error::param("unrolled reconstruction needs at least one step"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::param(format!("step sizes must be finite and positive, got {a}")));
        }
        Ok(())
    }
}

/// Iterates whose norm exceeds this multiple of the starting norm abort.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Largest zero-filled coil-image magnitude; 1 for all-zero data.
fn data_scale(ksp: &MultiCoilKSpace) -> f64 {
    let peak = ifft2c_coils(ksp).data().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak > 0.0 && peak.is_finite() {
        peak
    } else {
        1.0
    }
}

fn scaled(ksp: &MultiCoilKSpace, factor: f64) -> MultiCoilKSpace {
    let mut out = ksp.clone();
    out.scale(factor);
    out
}

fn check_divergence(step: usize, norm: f64, start: f64) -> Result<()> {
    let limit = DIVERGENCE_FACTOR * start;
    if !norm.is_finite() || norm > limit {
        return Err(Error::Divergence { step, norm, limit });
    }
    Ok(())
}

/// Unrolled gradient descent in the image or k-space domain.
pub fn unrolled_recon(
    ksp: &MultiCoilKSpace,
    mask: &SamplingMask,
    maps: &SensitivityMaps,
    cfg: &UnrolledConfig,
) -> Result<RealImage> {
    cfg.validate()?;
    let op = ForwardOperator::new(mask.clone(), maps.clone())?;
    let scale = data_scale(ksp);
    let y_tilde = scaled(ksp, 1.0 / scale);
    let h = &cfg.regularizer;
    let img = match cfg.domain {
        Domain::Image => {
            let mut w = op.adjoint(&y_tilde)?;
            let start = w.norm();
            for (t, &alpha) in cfg.alphas.iter().enumerate() {
                let residual = {
                    let mut r = op.forward(&w)?;
                    for (a, b) in r.data_mut().iter_mut().zip(y_tilde.data()) {
                        *a -= b;
                    }
                    r
                };
                let grad = op.adjoint(&residual)?;
                let corr = h.correction(&w);
                for ((x, g), c) in w.data_mut().iter_mut().zip(grad.data()).zip(corr.data()) {
                    *x += c - alpha * g;
                }
                check_divergence(t + 1, w.norm(), start)?;
            }
            w
        }
        Domain::KSpace => {
            let mut y = y_tilde.clone();
            let start = y.norm();
            for (t, &alpha) in cfg.alphas.iter().enumerate() {
                let w = reduce(&ifft2c_coils(&y), maps)?;
                let corr = h.correction(&w);
                y = dc_step(&y, &y_tilde, mask, alpha, Some((&corr, maps)))?;
                check_divergence(t + 1, y.norm(), start)?;
            }
            reduce(&ifft2c_coils(&y), maps)?
        }
    };
    Ok(img.abs().scaled(scale))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgConfig {
    pub lambda: f64,
    pub max_iters: usize,
    pub rtol: f64,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig {
            lambda: 1e-4,
            max_iters: 50,
            rtol: 1e-6,
        }
    }
}

impl CgConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::param(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters must be positive"));
        }
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err(Error::param(format!("rtol must be in (0, 1), got {}", self.rtol)));
        }
        Ok(())
    }
}

/// Full CG-SENSE result, in the caller's data scale.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: ComplexImage,
    pub iterations: usize,
    /// `||b - M w_i||` for `i = 0..=iterations`, in the normalized scale.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

/// Solves `(A*A + lambda I) w = A* y~` from `w = 0`.
///
/// Uses the conjugate-residual form of the conjugate-gradient family: the
/// same Krylov iterates are searched but each step minimizes `||r||`, so the
/// residual history never increases.
pub fn cg_sense_solve(
    ksp: &MultiCoilKSpace,
    mask: &SamplingMask,
    maps: &SensitivityMaps,
    cfg: &CgConfig,
) -> Result<CgOutcome> {
    cfg.validate()?;
    let op = ForwardOperator::new(mask.clone(), maps.clone())?;
    let scale = data_scale(ksp);
    let b = op.adjoint(&scaled(ksp, 1.0 / scale))?;
    let shape = b.shape();
    let apply = |x: &ComplexImage| -> Result<ComplexImage> {
        let mut out = op.normal(x)?;
        for (o, v) in out.data_mut().iter_mut().zip(x.data()) {
            *o += cfg.lambda * v;
        }
        Ok(out)
    };
    let numerical = |iterations: usize, msg: String| Error::Numerical { iterations, msg };

    let mut w = ComplexImage::zeros(shape);
    let mut r = b.clone();
    let b_norm = r.norm();
    let mut residuals = vec![b_norm];
    let mut iterations = 0;
    let mut converged = b_norm == 0.0;
    if !converged {
        let mut mr = apply(&r)?;
        let mut p = r.clone();
        let mut mp = mr.clone();
        let mut rmr = r.dot(&mr).re;
        while !converged && iterations < cfg.max_iters {
            let mp_sq = mp.dot(&mp).re;
            if !(mp_sq.is_finite() && mp_sq > 0.0) {
                return Err(numerical(iterations, format!("degenerate search direction ({mp_sq})")));
            }
            let step = rmr / mp_sq;
            for (x, d) in w.data_mut().iter_mut().zip(p.data()) {
                *x += step * d;
            }
            for (x, d) in r.data_mut().iter_mut().zip(mp.data()) {
                *x -= step * d;
            }
            iterations += 1;
            let r_norm = r.norm();
            if !r_norm.is_finite() {
                return Err(numerical(iterations, "non-finite residual".into()));
            }
            residuals.push(r_norm);
            converged = r_norm <= cfg.rtol * b_norm;
            if converged || iterations == cfg.max_iters {
                break;
            }
            mr = apply(&r)?;
            let rmr_next = r.dot(&mr).re;
            let beta = rmr_next / rmr;
            rmr = rmr_next;
            for (d, x) in p.data_mut().iter_mut().zip(r.data()) {
                *d = x + beta * *d;
            }
            for (d, x) in mp.data_mut().iter_mut().zip(mr.data()) {
                *d = x + beta * *d;
            }
        }
    }
    let data = w.data().iter().map(|z| z * scale).collect();
    Ok(CgOutcome {
        solution: ComplexImage::from_raw(shape, data),
        iterations,
        residuals,
        converged,
    })
}

/// Magnitude of the CG-SENSE solution.
pub fn cg_sense(ksp: &MultiCoilKSpace, mask: &SamplingMask, maps: &SensitivityMaps, cfg: &CgConfig) -> Result<RealImage> {
    Ok(cg_sense_solve(ksp, mask, maps, cfg)?.solution.abs())
}

/// Reconstruction method selector used by the bench and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ZeroFilledRss,
    ZeroFilledSense,
    Unrolled,
    CgSense,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ZeroFilledRss => "zf-rss",
            Method::ZeroFilledSense => "zf-sense",
            Method::Unrolled => "unrolled",
            Method::CgSense => "cg-sense",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "zf-rss" | "zero-filled" | "rss" => Ok(Method::ZeroFilledRss),
            "zf-sense" | "sense" => Ok(Method::ZeroFilledSense),
            "unrolled" => Ok(Method::Unrolled),
            "cg-sense" | "cg" => Ok(Method::CgSense),
            other => Err(Error::param(format!("unknown reconstruction method '{other}'"))),
        }
    }
}

/// Runs `method` with default settings.
pub fn reconstruct(
    method: Method,
    ksp: &MultiCoilKSpace,
    mask: &SamplingMask,
    maps: &SensitivityMaps,
) -> Result<RealImage> {
    match method {
        Method::ZeroFilledRss => zero_filled(ksp, Combine::Rss, None),
        Method::ZeroFilledSense => zero_filled(ksp, Combine::Sense, Some(maps)),
        Method::Unrolled => unrolled_recon(
            ksp,
            mask,
            maps,
            &UnrolledConfig::new(UnrolledConfig::DEFAULT_STEPS, Domain::Image)?,
        ),
        Method::CgSense => cg_sense(ksp, mask, maps, &CgConfig::default()),
    }
}
