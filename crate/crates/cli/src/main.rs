use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ksbench::bench::{run_bench, BenchConfig};
use ksbench::calib::estimate_sensitivities;
use ksbench::io::{self, CsvRecord, Dtype};
use ksbench::masks::{generate, SchemeParams};
use ksbench::metrics::MetricRecord;
use ksbench::operators::apply_mask;
use ksbench::phantom::{make_coils, make_phantom, simulate_acquisition, CoilArraySpec, PhantomKind, PhantomSpec};
use ksbench::recon::{cg_sense, unrolled_recon, zero_filled, CgConfig, Combine, Domain, Method, UnrolledConfig};
use ksbench::{AccelerationSpec, ComplexImage, Error, GridShape, Result, Scheme};

#[derive(Parser)]
#[command(name = "ksbench", version, about = "Retrospective k-space subsampling and reconstruction bench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sampling mask tools.
    Mask {
        #[command(subcommand)]
        action: MaskCommand,
    },
    /// Zero the unsampled entries of a k-space volume.
    Subsample(SubsampleArgs),
    /// Estimate coil sensitivities from the ACS region of subsampled data.
    EstimateSens(EstimateArgs),
    /// Reconstruct a magnitude image from subsampled k-space.
    Recon(ReconArgs),
    /// Score a reconstruction against a reference image.
    Eval(EvalArgs),
    /// Simulate a multi-coil acquisition of a phantom.
    Phantom(PhantomArgs),
    /// Run the scheme sweep and write metrics.csv plus the masks.
    Bench(BenchArgs),
}

#[derive(Subcommand)]
enum MaskCommand {
    /// Generate a sampling mask.
    Gen(MaskGenArgs),
}

#[derive(Args)]
struct MaskGenArgs {
    #[arg(long)]
    scheme: Scheme,
    #[arg(long)]
    accel: f64,
    /// ACS fraction; defaults to 0.16, 0.08 or 0.04 for R = 2, 4, 8.
    #[arg(long = "acs-frac")]
    acs_frac: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "64x64")]
    shape: GridShape,
    /// Integer pattern offset (equispaced start, radial/spiral rotation).
    #[arg(long, allow_hyphen_values = true)]
    offset: Option<i64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write a PGM preview.
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Args)]
struct SubsampleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Subsampled k-space (KSR).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconArgs {
    /// Subsampled k-space (KSR).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// Sensitivity maps (KSR); estimated from the ACS when omitted.
    #[arg(long)]
    maps: Option<PathBuf>,
    #[arg(long, default_value = "cg-sense")]
    method: Method,
    #[arg(long, default_value_t = CgConfig::default().lambda)]
    lambda: f64,
    #[arg(long, default_value_t = CgConfig::default().max_iters)]
    iters: usize,
    #[arg(long, default_value_t = UnrolledConfig::DEFAULT_STEPS)]
    steps: usize,
    #[arg(long, value_enum, default_value_t = DomainArg::Image)]
    domain: DomainArg,
    /// Output image (single-coil KSR).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Image,
    Kspace,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth image (single-coil KSR).
    #[arg(long)]
    reference: PathBuf,
    /// Reconstructed image (single-coil KSR).
    #[arg(long)]
    input: PathBuf,
    /// Write the scores as a one-row metrics CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "-")]
    label: String,
    #[arg(long, default_value_t = 0.0)]
    accel: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhantomKindArg {
    Standard,
    Random,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long, value_enum, default_value_t = PhantomKindArg::Standard)]
    kind: PhantomKindArg,
    #[arg(long, default_value_t = 10)]
    ellipses: usize,
    #[arg(long, default_value = "64x64")]
    shape: GridShape,
    #[arg(long, default_value_t = 8)]
    coils: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Fully sampled multi-coil k-space (KSR).
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth magnitude image (single-coil KSR).
    #[arg(long)]
    image: Option<PathBuf>,
    /// True sensitivity maps (KSR).
    #[arg(long)]
    maps: Option<PathBuf>,
    /// Store the k-space payload as 32-bit floats.
    #[arg(long)]
    f32: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Key-value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated scheme names, or "all".
    #[arg(long)]
    scheme: Option<String>,
    /// Comma-separated acceleration factors.
    #[arg(long)]
    accel: Option<String>,
    /// Comma-separated ACS fractions, one per acceleration.
    #[arg(long = "acs-frac")]
    acs_frac: Option<String>,
    #[arg(long)]
    cases: Option<usize>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shape: Option<String>,
    #[arg(long)]
    coils: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn mask_gen(a: MaskGenArgs) -> Result<()> {
    let r_acs = a.acs_frac.unwrap_or_else(|| AccelerationSpec::default_acs_fraction(a.accel));
    let mut params = SchemeParams::new(a.scheme, AccelerationSpec::new(a.accel, r_acs)?, a.seed);
    if let Some(o) = a.offset {
        params = params.with_offset(o);
    }
    let mask = generate(a.shape, &params)?;
    io::write_mask(&a.out, &mask)?;
    if let Some(p) = &a.pgm {
        io::write_mask_pgm(p, &mask)?;
    }
    println!(
        "{} {} R_target={} R_achieved={:.4} sampled={}",
        a.scheme,
        a.shape,
        a.accel,
        mask.achieved_acceleration()?,
        mask.count()
    );
    Ok(())
}

fn subsample(a: SubsampleArgs) -> Result<()> {
    let ksp = io::read_ksr(&a.input)?;
    let mask = io::read_mask(&a.mask)?;
    io::write_ksr(&a.out, &apply_mask(&ksp, &mask)?, Dtype::Complex64)
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let ksp = io::read_ksr(&a.input)?;
    let mask = io::read_mask(&a.mask)?;
    io::write_maps(&a.out, &estimate_sensitivities(&ksp, &mask)?)
}

fn recon(a: ReconArgs) -> Result<()> {
    let ksp = io::read_ksr(&a.input)?;
    let mask = io::read_mask(&a.mask)?;
    let maps = match &a.maps {
        Some(p) => io::read_maps(p)?,
        None => estimate_sensitivities(&ksp, &mask)?,
    };
    let img = match a.method {
        Method::ZeroFilledRss => zero_filled(&ksp, Combine::Rss, None)?,
        Method::ZeroFilledSense => zero_filled(&ksp, Combine::Sense, Some(&maps))?,
        Method::Unrolled => {
            let domain = match a.domain {
                DomainArg::Image => Domain::Image,
                DomainArg::Kspace => Domain::KSpace,
            };
            unrolled_recon(&ksp, &mask, &maps, &UnrolledConfig::new(a.steps, domain)?)?
        }
        Method::CgSense => {
            let cfg = CgConfig {
                lambda: a.lambda,
                max_iters: a.iters,
                ..CgConfig::default()
            };
            cg_sense(&ksp, &mask, &maps, &cfg)?
        }
    };
    io::write_image(&a.out, &img)?;
    if let Some(p) = &a.pgm {
        io::write_image_pgm(p, &img)?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let reference = io::read_image(&a.reference)?;
    let prediction = io::read_image(&a.input)?;
    let m = MetricRecord::evaluate(&reference, &prediction)?;
    println!("ssim={:.6} psnr={:.4} nmse={:.6e}", m.ssim, m.psnr_db, m.nmse);
    if let Some(p) = &a.out {
        let row = CsvRecord {
            case: 0,
            scheme: a.label,
            accel: a.accel,
            metrics: Some(m),
        };
        io::write_metrics_csv(p, &[row])?;
    }
    Ok(())
}

fn phantom(a: PhantomArgs) -> Result<()> {
    let kind = match a.kind {
        PhantomKindArg::Standard => PhantomKind::EllipseStandard,
        PhantomKindArg::Random => PhantomKind::RandomEllipses { n_ellipses: a.ellipses },
    };
    let truth = make_phantom(&PhantomSpec {
        shape: a.shape,
        kind,
        seed: a.seed,
    });
    let maps = make_coils(&CoilArraySpec::new(a.coils, a.seed), a.shape)?;
    let ksp = simulate_acquisition(&ComplexImage::from_real(&truth), &maps, a.noise, a.seed)?;
    let dtype = if a.f32 { Dtype::Complex32 } else { Dtype::Complex64 };
    io::write_ksr(&a.out, &ksp, dtype)?;
    if let Some(p) = &a.image {
        io::write_image(p, &truth)?;
    }
    if let Some(p) = &a.maps {
        io::write_maps(p, &maps)?;
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => BenchConfig::load(p)?,
        None => BenchConfig::default(),
    };
    let overrides = [
        ("schemes", a.scheme),
        ("accels", a.accel),
        ("acs_fractions", a.acs_frac),
        ("cases", a.cases.map(|v| v.to_string())),
        ("method", a.method),
        ("seed", a.seed.map(|v| v.to_string())),
        ("shape", a.shape),
        ("coils", a.coils.map(|v| v.to_string())),
        ("noise", a.noise.map(|v| v.to_string())),
        ("workers", a.workers.map(|v| v.to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    if let Some(out) = a.out {
        cfg.out_dir = Some(out);
    }
    if cfg.out_dir.is_none() {
        return Err(Error::Parameter("bench needs an output directory (--out or out = ...)".into()));
    }
    let report = run_bench(&cfg)?;
    for (cell, err) in report.failures() {
        eprintln!(
            "failed: case {} {} R={}: {err}",
            cell.case, cell.scheme, cell.accel
        );
    }
    for &scheme in &cfg.schemes {
        let means: Vec<String> = cfg
            .accels
            .iter()
            .map(|&r| match report.scheme_mean(scheme, r) {
                Some(v) => format!("R={r}:{v:.4}"),
                None => format!("R={r}:nan"),
            })
            .collect();
        println!("{:<16} {}", scheme.name(), means.join(" "));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mask {
            action: MaskCommand::Gen(a),
        } => mask_gen(a),
        Command::Subsample(a) => subsample(a),
        Command::EstimateSens(a) => estimate(a),
        Command::Recon(a) => recon(a),
        Command::Eval(a) => eval(a),
        Command::Phantom(a) => phantom(a),
        Command::Bench(a) => bench(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
