//! Scheme sweep: phantom cases x schemes x accelerations, scored against the
//! fully sampled RSS image.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::calib::estimate_sensitivities;
use crate::error::{Error, Result};
use crate::grid::{AccelerationSpec, ComplexImage, GridShape, RealImage, SamplingMask, Scheme};
use crate::io::{self, CsvRecord};
use crate::masks::{generate, SchemeParams};
use crate::metrics::MetricRecord;
use crate::operators::{apply_mask, ifft2c_coils, rss};
use crate::phantom::{make_coils, make_phantom, simulate_acquisition, CoilArraySpec, PhantomKind, PhantomSpec};
use crate::recon::{cg_sense, unrolled_recon, zero_filled, CgConfig, Combine, Domain, Method, UnrolledConfig};
use crate::rng::derive_seed;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "KSBENCH_WORKERS";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub schemes: Vec<Scheme>,
    pub accels: Vec<f64>,
    /// ACS fraction for each entry of `accels`.
    pub acs_fractions: Vec<f64>,
    pub cases: usize,
    pub method: Method,
    pub seed: u64,
    pub shape: GridShape,
    pub coils: usize,
    pub noise_sigma: f64,
    /// Ellipses per random phantom.
    pub ellipses: usize,
    pub cg: CgConfig,
    pub unrolled_steps: usize,
    pub out_dir: Option<PathBuf>,
    /// `None` defers to `KSBENCH_WORKERS`, then the available parallelism.
    pub workers: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            schemes: Scheme::ALL.to_vec(),
            accels: vec![2.0, 4.0, 8.0],
            acs_fractions: vec![0.16, 0.08, 0.04],
            cases: 4,
            method: Method::CgSense,
            seed: 0,
            shape: GridShape::new(64, 64).expect("valid default shape"),
            coils: 8,
            noise_sigma: 0.0,
            ellipses: 10,
            cg: CgConfig::default(),
            unrolled_steps: UnrolledConfig::DEFAULT_STEPS,
            out_dir: None,
            workers: None,
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::param(format!("bad entry '{s}' for {key}")))
        })
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::param(format!("bad value '{value}' for {key}")))
}

impl BenchConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        match key.as_str() {
            "schemes" => {
                self.schemes = if value.trim() == "all" {
                    Scheme::ALL.to_vec()
                } else {
                    value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::parse)
                        .collect::<Result<_>>()?
                }
            }
            "accels" | "accel" => self.accels = parse_list(&key, value)?,
            "acs_fractions" | "acs_frac" => self.acs_fractions = parse_list(&key, value)?,
            "cases" => self.cases = parse_one(&key, value)?,
            "method" => self.method = value.parse()?,
            "seed" => self.seed = parse_one(&key, value)?,
            "shape" => self.shape = value.trim().parse()?,
            "coils" => self.coils = parse_one(&key, value)?,
            "noise" | "noise_sigma" => self.noise_sigma = parse_one(&key, value)?,
            "ellipses" => self.ellipses = parse_one(&key, value)?,
            "lambda" | "cg_lambda" => self.cg.lambda = parse_one(&key, value)?,
            "cg_iters" | "max_iters" => self.cg.max_iters = parse_one(&key, value)?,
            "cg_rtol" | "rtol" => self.cg.rtol = parse_one(&key, value)?,
            "unrolled_steps" | "steps" => self.unrolled_steps = parse_one(&key, value)?,
            "out" | "out_dir" => self.out_dir = Some(PathBuf::from(value.trim())),
            "workers" => self.workers = Some(parse_one(&key, value)?),
            other => return Err(Error::param(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = BenchConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::param(format!("config line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.acs_fractions.len() != self.accels.len() {
            return Err(Error::param(format!(
                "{} ACS fractions for {} accelerations",
                self.acs_fractions.len(),
                self.accels.len()
            )));
        }
        if self.schemes.is_empty() || self.accels.is_empty() || self.cases == 0 {
            return Err(Error::param("bench grid is empty"));
        }
        if self.coils == 0 {
            return Err(Error::param("coil count must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(Error::param("worker count must be at least 1"));
        }
        for (&r, &f) in self.accels.iter().zip(&self.acs_fractions) {
            AccelerationSpec::new(r, f)?;
        }
        Ok(())
    }

    fn worker_count(&self) -> Result<usize> {
        if let Some(w) = self.workers {
            return Ok(w);
        }
        match std::env::var(WORKERS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(w) if w > 0 => Ok(w),
                _ => Err(Error::param(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
            },
            Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }
}

/// One (case, scheme, acceleration) cell of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub case: usize,
    pub scheme: Scheme,
    pub accel: f64,
    pub acs_fraction: f64,
}

impl Cell {
    pub fn mask_file_name(&self) -> String {
        format!("case{:03}_{}_R{}.msk", self.case, self.scheme.name(), self.accel)
    }
}

/// Fully sampled simulated data for one phantom case.
#[derive(Debug, Clone)]
pub struct CaseData {
    pub kspace: crate::grid::MultiCoilKSpace,
    /// RSS of the fully sampled coil images.
    pub reference: RealImage,
}

pub fn simulate_case(cfg: &BenchConfig, case: usize) -> Result<CaseData> {
    let base = derive_seed(cfg.seed, &[case as u64]);
    let phantom = make_phantom(&PhantomSpec {
        shape: cfg.shape,
        kind: PhantomKind::RandomEllipses {
            n_ellipses: cfg.ellipses,
        },
        seed: derive_seed(base, &[0]),
    });
    let coils = CoilArraySpec::new(cfg.coils, derive_seed(base, &[1]));
    let maps = make_coils(&coils, cfg.shape)?;
    let kspace = simulate_acquisition(
        &ComplexImage::from_real(&phantom),
        &maps,
        cfg.noise_sigma,
        derive_seed(base, &[2]),
    )?;
    let reference = rss(&ifft2c_coils(&kspace));
    Ok(CaseData { kspace, reference })
}

fn cell_mask(cfg: &BenchConfig, cell: &Cell) -> Result<SamplingMask> {
    let seed = derive_seed(cfg.seed, &[cell.case as u64, 1000 + cell.scheme.code() as u64, cell.accel.to_bits()]);
    let spec = AccelerationSpec::new(cell.accel, cell.acs_fraction)?;
    generate(cfg.shape, &SchemeParams::new(cell.scheme, spec, seed))
}

fn reconstruct_cell(cfg: &BenchConfig, data: &CaseData, mask: &SamplingMask) -> Result<MetricRecord> {
    let sub = apply_mask(&data.kspace, mask)?;
    let maps = estimate_sensitivities(&sub, mask)?;
    let img = match cfg.method {
        Method::ZeroFilledRss => zero_filled(&sub, Combine::Rss, None)?,
        Method::ZeroFilledSense => zero_filled(&sub, Combine::Sense, Some(&maps))?,
        Method::Unrolled => unrolled_recon(&sub, mask, &maps, &UnrolledConfig::new(cfg.unrolled_steps, Domain::Image)?)?,
        Method::CgSense => cg_sense(&sub, mask, &maps, &cfg.cg)?,
    };
    MetricRecord::evaluate(&data.reference, &img)
}

/// Outcome of one cell; failed cells keep their error message.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub mask: Option<SamplingMask>,
    pub metrics: std::result::Result<MetricRecord, String>,
}

pub fn run_cell(cfg: &BenchConfig, data: &Result<CaseData>, cell: Cell) -> CellResult {
    let data = match data {
        Ok(d) => d,
        Err(e) => {
            return CellResult {
                cell,
                mask: None,
                metrics: Err(e.to_string()),
            }
        }
    };
    let mask = match cell_mask(cfg, &cell) {
        Ok(m) => m,
        Err(e) => {
            return CellResult {
                cell,
                mask: None,
                metrics: Err(e.to_string()),
            }
        }
    };
    let metrics = reconstruct_cell(cfg, data, &mask).map_err(|e| e.to_string());
    CellResult {
        cell,
        mask: Some(mask),
        metrics,
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    /// Sorted by case, then scheme order, then acceleration order.
    pub results: Vec<CellResult>,
}

impl BenchReport {
    pub fn records(&self) -> Vec<CsvRecord> {
        self.results
            .iter()
            .map(|r| CsvRecord {
                case: r.cell.case,
                scheme: r.cell.scheme.name().to_string(),
                accel: r.cell.accel,
                metrics: r.metrics.as_ref().ok().copied(),
            })
            .collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = (&Cell, &str)> {
        self.results
            .iter()
            .filter_map(|r| r.metrics.as_ref().err().map(|e| (&r.cell, e.as_str())))
    }

    /// Mean SSIM per (scheme, acceleration) over successful cells.
    pub fn mean_ssim(&self) -> BTreeMap<(u8, u64), f64> {
        let mut acc: BTreeMap<(u8, u64), (f64, usize)> = BTreeMap::new();
        for r in &self.results {
            if let Ok(m) = &r.metrics {
                let e = acc.entry((r.cell.scheme.code(), r.cell.accel.to_bits())).or_default();
                e.0 += m.ssim;
                e.1 += 1;
            }
        }
        acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }

    /// Mean SSIM of `scheme` at `accel`, if any cell succeeded.
    pub fn scheme_mean(&self, scheme: Scheme, accel: f64) -> Option<f64> {
        self.mean_ssim().get(&(scheme.code(), accel.to_bits())).copied()
    }

    pub fn csv(&self) -> String {
        io::format_metrics_csv(&self.records())
    }
}

/// Runs the sweep, writing `metrics.csv` and `masks/*.msk` when an output
/// directory is configured.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let workers = cfg.worker_count()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::param(format!("cannot start worker pool: {e}")))?;

    let results = pool.install(|| {
        let cases: Vec<Result<CaseData>> = (0..cfg.cases).into_par_iter().map(|c| simulate_case(cfg, c)).collect();
        let cells: Vec<Cell> = (0..cfg.cases)
            .flat_map(|case| {
                cfg.schemes.iter().flat_map(move |&scheme| {
                    cfg.accels
                        .iter()
                        .zip(&cfg.acs_fractions)
                        .map(move |(&accel, &acs_fraction)| Cell { case, scheme, accel, acs_fraction })
                })
            })
            .collect();
        cells
            .into_par_iter()
            .map(|cell| run_cell(cfg, &cases[cell.case], cell))
            .collect::<Vec<_>>()
    });
    let report = BenchReport { results };

    if let Some(dir) = &cfg.out_dir {
        let masks = dir.join("masks");
        fs::create_dir_all(&masks)?;
        for r in &report.results {
            if let Some(m) = &r.mask {
                io::write_mask(masks.join(r.cell.mask_file_name()), m)?;
            }
        }
        io::write_metrics_csv(dir.join("metrics.csv"), &report.records())?;
    }
    Ok(report)
}
