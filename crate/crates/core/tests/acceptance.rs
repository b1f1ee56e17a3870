//! Acceptance suite. Each test checks one criterion and writes a single
//! `criterion NN [PASS|FAIL]` line to stderr (visible without --nocapture).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng as _;

use ksbench::bench::{run_bench, BenchConfig, BenchReport};
use ksbench::calib::{estimate_sensitivities, normalize};
use ksbench::io::{self, Dtype};
use ksbench::masks::{generate, vdpd, SchemeParams};
use ksbench::metrics::{nmse, psnr, ssim};
use ksbench::operators::{expand, reduce, ForwardOperator};
use ksbench::phantom::{make_coils, make_phantom, simulate_acquisition, CoilArraySpec, PhantomKind, PhantomSpec};
use ksbench::recon::{cg_sense, dc_step, unrolled_recon, CgConfig, Domain, Method, UnrolledConfig};
use ksbench::rng::{self, Rng};
use ksbench::{
    kspace_radius, AccelerationSpec, AcsRegion, CoilStack, Complex64, ComplexImage, Error, GridShape, RealImage,
    SamplingMask, Scheme, SensitivityMaps,
};

fn report(id: u32, title: &str, pass: bool, detail: String) {
    let line = format!(
        "criterion {id:02} [{}] {title}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = writeln!(std::io::stderr(), "{line}");
    assert!(pass, "{line}");
}

fn shape(a: usize, b: usize) -> GridShape {
    GridShape::new(a, b).unwrap()
}

fn cnum(r: &mut Rng) -> Complex64 {
    Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
}

fn random_image(s: GridShape, r: &mut Rng) -> ComplexImage {
    ComplexImage::from_vec(s, (0..s.len()).map(|_| cnum(r)).collect()).unwrap()
}

fn random_stack(n_c: usize, s: GridShape, r: &mut Rng) -> CoilStack {
    CoilStack::from_vec(n_c, s, (0..n_c * s.len()).map(|_| cnum(r)).collect()).unwrap()
}

fn random_maps(n_c: usize, s: GridShape, r: &mut Rng) -> SensitivityMaps {
    normalize(&SensitivityMaps::new(random_stack(n_c, s, r))).unwrap().maps
}

fn random_mask(s: GridShape, r: &mut Rng) -> SamplingMask {
    let p: f64 = r.random_range(0.05..0.95);
    SamplingMask::from_bits(s, (0..s.len()).map(|_| r.random::<f64>() < p).collect()).unwrap()
}

fn rel_diff(a: &ComplexImage, b: &ComplexImage) -> f64 {
    let d: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm_sqr()).sum();
    d.sqrt() / b.norm()
}

#[test]
fn criterion_01_adjoint_dot_test() {
    let start = Instant::now();
    let mut r = rng::stream(101, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let s = shape(r.random_range(2..=64), r.random_range(2..=64));
        let n_c = r.random_range(1..=8);
        let op = ForwardOperator::new(random_mask(s, &mut r), random_maps(n_c, s, &mut r)).unwrap();
        let x = random_image(s, &mut r);
        let y = random_stack(n_c, s, &mut r);
        let lhs = op.forward(&x).unwrap().dot(&y);
        let rhs = x.dot(&op.adjoint(&y).unwrap());
        worst = worst.max((lhs - rhs).norm() / (x.norm() * y.norm()));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "adjoint dot-test",
        worst <= 1e-10 && secs < 10.0,
        format!("100 instances, worst relative gap {worst:.2e} (<= 1e-10), {secs:.2}s (< 10s)"),
    );
}

#[test]
fn criterion_02_operator_algebra() {
    let mut r = rng::stream(202, 0);
    let (mut worst_re, mut worst_af) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let s = shape(r.random_range(2..=64), r.random_range(2..=64));
        let maps = random_maps(r.random_range(1..=8), s, &mut r);
        let x = random_image(s, &mut r);
        worst_re = worst_re.max(rel_diff(&reduce(&expand(&x, &maps).unwrap(), &maps).unwrap(), &x));
        let op = ForwardOperator::new(SamplingMask::full(s), maps).unwrap();
        worst_af = worst_af.max(rel_diff(&op.normal(&x).unwrap(), &x));
    }
    report(
        2,
        "operator algebra",
        worst_re <= 1e-10 && worst_af <= 1e-10,
        format!("50 cases, reduce.expand {worst_re:.2e}, adjoint.forward {worst_af:.2e} (<= 1e-10)"),
    );
}

const STANDARD_ACCELS: [(f64, f64); 3] = [(2.0, 0.16), (4.0, 0.08), (8.0, 0.04)];

fn tolerance(scheme: Scheme, accel: f64) -> f64 {
    if scheme.is_rectilinear() && accel == 8.0 {
        0.15
    } else {
        0.10
    }
}

/// Smallest gap between dart cells relative to the local exclusion bound.
fn vdpd_spacing_ratio(s: GridShape, accel: f64, r_acs: f64, seed: u64) -> f64 {
    let spec = AccelerationSpec::new(accel, r_acs).unwrap();
    let layout = vdpd(s, &SchemeParams::new(Scheme::Vdpd, spec, seed)).unwrap();
    let pts: Vec<(usize, usize, f64)> = (0..s.n_x())
        .flat_map(|i| (0..s.n_y()).map(move |j| (i, j)))
        .filter(|&(i, j)| layout.darts[s.index(i, j)])
        .map(|(i, j)| (i, j, kspace_radius(s, i, j).unwrap()))
        .collect();
    let mut worst = f64::INFINITY;
    for (a, p) in pts.iter().enumerate() {
        for q in &pts[a + 1..] {
            let gap = (p.0 as f64 - q.0 as f64).hypot(p.1 as f64 - q.1 as f64);
            let bound = layout.base_spacing * (1.0 + layout.slope * p.2.min(q.2));
            worst = worst.min(gap / bound);
        }
    }
    worst
}

#[test]
fn criterion_03_mask_acceleration() {
    let mut failures = Vec::new();
    let mut checked = 0;
    let mut worst = 0.0f64;
    for s in [shape(64, 64), shape(128, 96)] {
        for scheme in Scheme::ALL {
            for (accel, r_acs) in STANDARD_ACCELS {
                let spec = AccelerationSpec::new(accel, r_acs).unwrap();
                let tol = tolerance(scheme, accel);
                let achieved = if scheme == Scheme::RandomRect {
                    // per-mask line counts are binomial; the contract is on
                    // the expected sampled fraction
                    let seeds = 200;
                    let p = SchemeParams::new(scheme, spec, 0);
                    if generate(s, &p).unwrap() != generate(s, &p).unwrap() {
                        failures.push(format!("{scheme} {s} R={accel}: not deterministic"));
                    }
                    let total: usize = (0..seeds)
                        .map(|seed| generate(s, &SchemeParams::new(scheme, spec, seed)).unwrap().count())
                        .sum();
                    s.len() as f64 * seeds as f64 / total as f64
                } else {
                    let mut acc = Vec::new();
                    for seed in [1u64, 2, 3] {
                        let p = SchemeParams::new(scheme, spec, seed);
                        let m = match generate(s, &p) {
                            Ok(m) => m,
                            Err(e) => {
                                failures.push(format!("{scheme} {s} R={accel} seed {seed}: {e}"));
                                continue;
                            }
                        };
                        if generate(s, &p).unwrap() != m {
                            failures.push(format!("{scheme} {s} R={accel}: not deterministic"));
                        }
                        acc.push(m.achieved_acceleration().unwrap());
                    }
                    acc.into_iter()
                        .max_by(|a, b| ((a - accel).abs()).total_cmp(&(b - accel).abs()))
                        .unwrap_or(f64::NAN)
                };
                checked += 1;
                let rel = (achieved - accel).abs() / accel;
                worst = worst.max(rel / tol);
                if !(rel <= tol) {
                    failures.push(format!("{scheme} {s} R={accel}: achieved {achieved:.3} (tol {tol})"));
                }
            }
        }
    }
    let mut spacing = f64::INFINITY;
    for s in [shape(64, 64), shape(128, 96)] {
        for (accel, r_acs) in STANDARD_ACCELS {
            spacing = spacing.min(vdpd_spacing_ratio(s, accel, r_acs, 1));
        }
    }
    if spacing < 0.95 {
        failures.push(format!("VDPD spacing ratio {spacing:.3} < 0.95"));
    }
    report(
        3,
        "mask acceleration",
        failures.is_empty(),
        format!(
            "{checked} (scheme, shape, R) cells, worst error {:.0}% of tolerance, VDPD min gap/bound {spacing:.3}{}",
            worst * 100.0,
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    );
}

fn brute_ssim(u: &RealImage, v: &RealImage) -> f64 {
    let s = u.shape();
    let range = u.max() - u.min();
    let range = if range == 0.0 { 1.0 } else { range };
    let (c1, c2) = ((0.01 * range).powi(2), (0.03 * range).powi(2));
    let (mut total, mut windows) = (0.0, 0);
    for i in 0..=s.n_x() - 7 {
        for j in 0..=s.n_y() - 7 {
            let cells: Vec<(f64, f64)> = (0..49).map(|k| (u.get(i + k / 7, j + k % 7), v.get(i + k / 7, j + k % 7))).collect();
            let mu = cells.iter().map(|c| c.0).sum::<f64>() / 49.0;
            let mv = cells.iter().map(|c| c.1).sum::<f64>() / 49.0;
            let (mut vu, mut vv, mut cov) = (0.0, 0.0, 0.0);
            for (a, b) in &cells {
                vu += (a - mu) * (a - mu);
                vv += (b - mv) * (b - mv);
                cov += (a - mu) * (b - mv);
            }
            let (vu, vv, cov) = (vu / 48.0, vv / 48.0, cov / 48.0);
            total += (2.0 * mu * mv + c1) * (2.0 * cov + c2) / ((mu * mu + mv * mv + c1) * (vu + vv + c2));
            windows += 1;
        }
    }
    total / windows as f64
}

fn brute_psnr(u: &[f64], v: &[f64]) -> f64 {
    let mut peak = f64::MIN;
    let mut se = 0.0;
    for k in 0..u.len() {
        peak = peak.max(u[k]);
        se += (u[k] - v[k]).powi(2);
    }
    10.0 * (peak * peak / (se / u.len() as f64)).log10()
}

fn brute_nmse(u: &[f64], v: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..u.len() {
        num += (u[k] - v[k]).powi(2);
        den += u[k] * u[k];
    }
    num / den
}

#[test]
fn criterion_04_metric_oracles() {
    let mut r = rng::stream(404, 0);
    let s = shape(16, 16);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let u = RealImage::from_vec(s, (0..256).map(|_| r.random::<f64>()).collect()).unwrap();
        let v = RealImage::from_vec(s, (0..256).map(|_| r.random::<f64>()).collect()).unwrap();
        worst = worst
            .max((ssim(&u, &v).unwrap() - brute_ssim(&u, &v)).abs())
            .max((psnr(&u, &v).unwrap() - brute_psnr(u.data(), v.data())).abs())
            .max((nmse(&u, &v).unwrap() - brute_nmse(u.data(), v.data())).abs());
    }
    // [1, 1] vs [0.5, 1.5], tiled onto the smallest valid 2x2 grid
    let u = RealImage::from_vec(shape(2, 2), vec![1.0; 4]).unwrap();
    let v = RealImage::from_vec(shape(2, 2), vec![0.5, 1.5, 0.5, 1.5]).unwrap();
    let hand = psnr(&u, &v).unwrap();
    let zero = nmse(&u, &RealImage::zeros(u.shape())).unwrap();
    let pass = worst <= 1e-9 && (hand - 6.0206).abs() < 5e-5 && zero == 1.0;
    report(
        4,
        "metric oracles",
        pass,
        format!("50 pairs, worst deviation {worst:.2e}; psnr hand value {hand:.4} dB; nmse(u, 0) = {zero}"),
    );
}

#[test]
fn criterion_05_calibration() {
    let s = shape(64, 64);
    let truth = make_phantom(&PhantomSpec { shape: s, kind: PhantomKind::EllipseStandard, seed: 0 });
    let maps = make_coils(&CoilArraySpec::new(8, 5), s).unwrap();
    let x = ComplexImage::from_real(&truth);
    let ksp = simulate_acquisition(&x, &maps, 0.0, 0).unwrap();
    let mask = SamplingMask::full(s).with_acs(AcsRegion::lines(s, 0, s.n_y()).unwrap()).unwrap();
    let est = estimate_sensitivities(&ksp, &mask).unwrap();
    let power = est.power();
    let mut worst_power = 0.0f64;
    let mut support = 0;
    for (p, &t) in power.iter().zip(truth.data()) {
        if t > 0.0 {
            worst_power = worst_power.max((p - 1.0).abs());
            support += 1;
        }
    }
    let back = reduce(&expand(&x, &est).unwrap(), &est).unwrap().abs();
    let err = nmse(&truth, &back).unwrap();
    report(
        5,
        "calibration",
        worst_power <= 1e-6 && err <= 1e-6,
        format!("sum|S|^2 deviation {worst_power:.2e} over {support} object pixels; round-trip NMSE {err:.2e}"),
    );
}

#[test]
fn criterion_06_reconstruction_oracles() {
    let s = shape(64, 64);
    let truth = make_phantom(&PhantomSpec { shape: s, kind: PhantomKind::EllipseStandard, seed: 0 });
    let maps = make_coils(&CoilArraySpec::new(8, 6), s).unwrap();
    let full = simulate_acquisition(&ComplexImage::from_real(&truth), &maps, 0.0, 0).unwrap();
    let all = SamplingMask::full(s);

    let cg = cg_sense(&full, &all, &maps, &CgConfig { lambda: 0.0, max_iters: 20, rtol: 1e-12 }).unwrap();
    let cg_err = nmse(&truth, &cg).unwrap();

    let mut r = rng::stream(606, 0);
    let mask = generate(s, &SchemeParams::new(Scheme::Vdpd, AccelerationSpec::new(4.0, 0.08).unwrap(), 1)).unwrap();
    let y = random_stack(8, s, &mut r);
    let t = random_stack(8, s, &mut r);
    let once = dc_step(&y, &t, &mask, 1.0, None).unwrap();
    let twice = dc_step(&once, &t, &mask, 1.0, None).unwrap();
    let idempotent = once == twice;

    let mut unrolled_err = 0.0f64;
    for domain in [Domain::Image, Domain::KSpace] {
        let cfg = UnrolledConfig::new(8, domain).unwrap();
        let out = unrolled_recon(&full, &all, &maps, &cfg).unwrap();
        unrolled_err = unrolled_err.max(nmse(&truth, &out).unwrap());
    }
    report(
        6,
        "reconstruction oracles",
        cg_err <= 1e-8 && idempotent && unrolled_err <= 1e-10,
        format!("cg NMSE {cg_err:.2e} (<= 1e-8); dc_step idempotent: {idempotent}; unrolled NMSE {unrolled_err:.2e} (<= 1e-10)"),
    );
}

const NON_RECT: [Scheme; 4] = [Scheme::Vdpd, Scheme::Gaussian2D, Scheme::Radial, Scheme::Spiral];
const RECT: [Scheme; 4] = [Scheme::RandomRect, Scheme::EquispacedRect, Scheme::EquispacedPlusRect, Scheme::Gaussian1D];

fn suite_config(workers: usize) -> BenchConfig {
    BenchConfig {
        cases: 16,
        method: Method::CgSense,
        seed: 2024,
        workers: Some(workers),
        ..BenchConfig::default()
    }
}

fn group_mean(report: &BenchReport, schemes: &[Scheme], accel: f64) -> f64 {
    schemes.iter().map(|&s| report.scheme_mean(s, accel).unwrap_or(f64::NAN)).sum::<f64>() / schemes.len() as f64
}

fn artifact_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = fs::remove_dir_all(&dir);
    dir
}

#[test]
fn criterion_07_non_rectilinear_advantage() {
    let dir = artifact_dir("r8_suite");
    let cfg = BenchConfig {
        accels: vec![8.0],
        acs_fractions: vec![0.04],
        out_dir: Some(dir.clone()),
        ..suite_config(1)
    };
    let start = Instant::now();
    let rep = run_bench(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let csv = fs::read_to_string(dir.join("metrics.csv")).unwrap();
    let rows = csv.lines().count() - 1;
    let failed = rep.failures().count();
    let non_rect = group_mean(&rep, &NON_RECT, 8.0);
    let rect = group_mean(&rep, &RECT, 8.0);
    let margin = non_rect - rect;
    report(
        7,
        "non-rectilinear advantage at R=8",
        margin >= 0.01 && rows == 128 && failed == 0 && secs < 300.0,
        format!(
            "mean SSIM non-rect {non_rect:.4} vs rect {rect:.4}, margin {margin:.4} (>= 0.01); \
             {rows} CSV rows, {failed} failures, {secs:.1}s single-threaded"
        ),
    );
}

#[test]
fn criterion_08_monotone_degradation() {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let rep = run_bench(&suite_config(workers)).unwrap();
    let mut violations = Vec::new();
    let mut summary = Vec::new();
    for scheme in Scheme::ALL {
        let m: Vec<f64> = [2.0, 4.0, 8.0].iter().map(|&r| rep.scheme_mean(scheme, r).unwrap_or(f64::NAN)).collect();
        if !(m[0] >= m[1] && m[1] >= m[2]) {
            violations.push(format!("{scheme} {m:.4?}"));
        }
        summary.push(format!("{} {:.3}/{:.3}/{:.3}", scheme.name(), m[0], m[1], m[2]));
    }
    report(
        8,
        "monotone degradation",
        violations.is_empty() && rep.failures().count() == 0,
        if violations.is_empty() {
            format!("SSIM at R=2/4/8: {}", summary.join(", "))
        } else {
            format!("violations: {}", violations.join("; "))
        },
    );
}

type Snapshot = Vec<(String, Vec<u8>)>;

fn snapshot(dir: &Path) -> Snapshot {
    let mut files = vec![("metrics.csv".to_string(), fs::read(dir.join("metrics.csv")).unwrap())];
    let mut masks: Vec<(String, Vec<u8>)> = fs::read_dir(dir.join("masks"))
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    masks.sort();
    files.extend(masks);
    files
}

#[test]
fn criterion_09_determinism() {
    let runs: Vec<(usize, Snapshot)> = [(1usize, "w1a"), (1, "w1b"), (4, "w4"), (7, "w7")]
        .into_iter()
        .map(|(workers, name)| {
            let dir = artifact_dir(&format!("determinism_{name}"));
            let cfg = BenchConfig {
                cases: 2,
                seed: 99,
                shape: shape(48, 40),
                coils: 4,
                workers: Some(workers),
                out_dir: Some(dir.clone()),
                ..BenchConfig::default()
            };
            run_bench(&cfg).unwrap();
            (workers, snapshot(&dir))
        })
        .collect();
    let files = runs[0].1.len();
    let identical = runs.iter().all(|(_, s)| *s == runs[0].1);
    report(
        9,
        "determinism",
        identical && files == 49,
        format!("{files} files (CSV + 48 masks) byte-identical across 4 runs with 1, 1, 4, 7 workers: {identical}"),
    );
}

#[test]
fn criterion_10_format_roundtrips() {
    let mut r = rng::stream(1010, 0);
    let mut problems = Vec::new();
    let s = shape(24, 20);
    let x = random_stack(3, s, &mut r);
    let bytes = io::encode_ksr(&x, Dtype::Complex64);
    let (back, _) = io::decode_ksr(&bytes).unwrap();
    if back != x || io::encode_ksr(&back, Dtype::Complex64) != bytes {
        problems.push("KSR f64 round trip".to_string());
    }
    let mut masks = 0;
    for scheme in Scheme::ALL {
        let m = generate(s, &SchemeParams::new(scheme, AccelerationSpec::new(4.0, 0.08).unwrap(), 3)).unwrap();
        let enc = io::encode_mask(&m);
        let dec = io::decode_mask(&enc).unwrap();
        if dec != m || io::encode_mask(&dec) != enc {
            problems.push(format!("MSK1 round trip {scheme}"));
        }
        masks += 1;
    }

    let mask_bytes = io::encode_mask(&generate(s, &SchemeParams::new(Scheme::Vdpd, AccelerationSpec::new(4.0, 0.08).unwrap(), 3)).unwrap());
    let corrupt = |buf: &[u8], at: usize, val: u8| {
        let mut b = buf.to_vec();
        b[at] = val;
        b
    };
    let ksr_fixtures: Vec<(&str, Vec<u8>)> = vec![
        ("bad magic", corrupt(&bytes, 0, b'Q')),
        ("zero coils", { let mut b = bytes.clone(); b[4..8].copy_from_slice(&0u32.to_le_bytes()); b }),
        ("zero rows", { let mut b = bytes.clone(); b[8..12].copy_from_slice(&0u32.to_le_bytes()); b }),
        ("bad dtype", corrupt(&bytes, 16, 9)),
        ("short header", bytes[..11].to_vec()),
        ("truncated payload", bytes[..bytes.len() - 1].to_vec()),
    ];
    let msk_fixtures: Vec<(&str, Vec<u8>)> = vec![
        ("bad magic", corrupt(&mask_bytes, 2, b'X')),
        ("bad scheme", corrupt(&mask_bytes, 12, 42)),
        ("bad ACS kind", corrupt(&mask_bytes, 37, 7)),
        ("bad cell byte", corrupt(&mask_bytes, io::MSK_HEADER_LEN + 3, 2)),
        ("truncated cells", mask_bytes[..mask_bytes.len() - 10].to_vec()),
    ];
    let documented = |e: &Error| matches!(e, Error::Format { .. } | Error::Truncated { .. }) && e.exit_code() == 3;
    for (name, b) in &ksr_fixtures {
        match io::decode_ksr(b) {
            Err(e) if documented(&e) => {}
            other => problems.push(format!("KSR {name}: {:?}", other.map(|_| ()))),
        }
    }
    for (name, b) in &msk_fixtures {
        match io::decode_mask(b) {
            Err(e) if documented(&e) => {}
            other => problems.push(format!("MSK1 {name}: {:?}", other.map(|_| ()))),
        }
    }
    report(
        10,
        "format round-trips",
        problems.is_empty(),
        format!(
            "KSR and {masks} MSK1 round trips bit-exact, {} corrupted fixtures rejected with exit code 3{}",
            ksr_fixtures.len() + msk_fixtures.len(),
            if problems.is_empty() { String::new() } else { format!("; problems: {}", problems.join("; ")) }
        ),
    );
}
