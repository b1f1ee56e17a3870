//! File formats: KSR1 k-space volumes, MSK1 masks, PGM previews and the
//! metrics CSV. All binary fields are little-endian.
//!
//! ```text
//! KSR1  magic "KSR1" | n_c u32 | n_x u32 | n_y u32 | dtype u8 | payload
//!       payload: coil-major, row-major (re, im) pairs, f32 (dtype 0) or f64 (dtype 1)
//! MSK1  magic "MSK1" | n_x u32 | n_y u32 | scheme u8 (255 = none) | accel f64
//!       | seed u64 | acs_radius f64 | acs_kind u8 | line_start u32
//!       | line_count u32 | n_x * n_y cell bytes (0 or 1)
//! ```

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{AcsGeometry, AcsRegion, CoilStack, GridShape, MultiCoilKSpace, RealImage, SamplingMask, Scheme, SensitivityMaps};
use crate::metrics::MetricRecord;

pub const KSR_MAGIC: &[u8; 4] = b"KSR1";
pub const MSK_MAGIC: &[u8; 4] = b"MSK1";
pub const KSR_HEADER_LEN: usize = 17;
pub const MSK_HEADER_LEN: usize = 46;
const NO_SCHEME: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    Complex32,
    Complex64,
}

impl Dtype {
    pub fn code(self) -> u8 {
        match self {
            Dtype::Complex32 => 0,
            Dtype::Complex64 => 1,
        }
    }

    /// Bytes per complex sample.
    pub fn width(self) -> usize {
        match self {
            Dtype::Complex32 => 8,
            Dtype::Complex64 => 16,
        }
    }

    fn from_code(code: u8, offset: u64) -> Result<Self> {
        match code {
            0 => Ok(Dtype::Complex32),
            1 => Ok(Dtype::Complex64),
            c => Err(Error::Format {
                offset,
                msg: format!("unknown dtype code {c}"),
            }),
        }
    }
}

/// Byte reader that tracks its offset for error reporting.
struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn offset(&self) -> u64 {
        self.pos as u64
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                msg: format!("header ends early: need {n} more bytes, {} left", self.buf.len() - self.pos),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.array::<4>()?;
        if &got != expected {
            return Err(Error::Format {
                offset: 0,
                msg: format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(&got),
                    String::from_utf8_lossy(expected)
                ),
            });
        }
        Ok(())
    }

    /// The rest of the buffer, which must be exactly `expected` bytes long.
    fn payload(&mut self, expected: usize) -> Result<&'a [u8]> {
        let actual = self.buf.len() - self.pos;
        if actual < expected {
            return Err(Error::Truncated { expected: expected as u64, actual: actual as u64 });
        }
        if actual > expected {
            return Err(Error::Format {
                offset: (self.pos + expected) as u64,
                msg: format!("{} trailing bytes after payload", actual - expected),
            });
        }
        self.take(expected)
    }
}

fn dims(r: &mut Reader<'_>) -> Result<GridShape> {
    let at = r.offset();
    let (n_x, n_y) = (r.u32()? as usize, r.u32()? as usize);
    GridShape::new(n_x, n_y).map_err(|e| Error::Format {
        offset: at,
        msg: e.to_string(),
    })
}

pub fn encode_ksr(data: &MultiCoilKSpace, dtype: Dtype) -> Vec<u8> {
    let s = data.shape();
    let mut out = Vec::with_capacity(KSR_HEADER_LEN + data.data().len() * dtype.width());
    out.extend_from_slice(KSR_MAGIC);
    for v in [data.n_c(), s.n_x(), s.n_y()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.push(dtype.code());
    for z in data.data() {
        match dtype {
            Dtype::Complex32 => {
                out.extend_from_slice(&(z.re as f32).to_le_bytes());
                out.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
            Dtype::Complex64 => {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_ksr(buf: &[u8]) -> Result<(MultiCoilKSpace, Dtype)> {
    let mut r = Reader::new(buf);
    r.magic(KSR_MAGIC)?;
    let n_c = r.u32()? as usize;
    if n_c == 0 {
        return Err(Error::Format {
            offset: 4,
            msg: "coil count is zero".into(),
        });
    }
    let shape = dims(&mut r)?;
    let dtype = Dtype::from_code(r.u8()?, r.offset() - 1)?;
    let count = n_c
        .checked_mul(shape.len())
        .filter(|c| c.checked_mul(dtype.width()).is_some())
        .ok_or_else(|| Error::Format {
            offset: 4,
            msg: "dimensions overflow".into(),
        })?;
    let payload = r.payload(count * dtype.width())?;
    let values: Vec<Complex64> = match dtype {
        Dtype::Complex32 => payload
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes(c[..4].try_into().unwrap());
                let im = f32::from_le_bytes(c[4..].try_into().unwrap());
                Complex64::new(re as f64, im as f64)
            })
            .collect(),
        Dtype::Complex64 => payload
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect(),
    };
    Ok((CoilStack::from_vec(n_c, shape, values)?, dtype))
}

pub fn write_ksr(path: impl AsRef<Path>, data: &MultiCoilKSpace, dtype: Dtype) -> Result<()> {
    fs::write(path, encode_ksr(data, dtype))?;
    Ok(())
}

pub fn read_ksr(path: impl AsRef<Path>) -> Result<MultiCoilKSpace> {
    Ok(decode_ksr(&fs::read(path)?)?.0)
}

/// Sensitivity maps share the KSR layout.
pub fn write_maps(path: impl AsRef<Path>, maps: &SensitivityMaps) -> Result<()> {
    write_ksr(path, maps.stack(), Dtype::Complex64)
}

pub fn read_maps(path: impl AsRef<Path>) -> Result<SensitivityMaps> {
    Ok(SensitivityMaps::new(read_ksr(path)?))
}

/// Real images are stored as single-coil KSR with zero imaginary part.
pub fn write_image(path: impl AsRef<Path>, img: &RealImage) -> Result<()> {
    let data = img.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    write_ksr(path, &CoilStack::from_vec(1, img.shape(), data)?, Dtype::Complex64)
}

pub fn read_image(path: impl AsRef<Path>) -> Result<RealImage> {
    let stack = read_ksr(path)?;
    if stack.n_c() != 1 {
        return Err(Error::Format {
            offset: 4,
            msg: format!("expected a single-coil image, found {} coils", stack.n_c()),
        });
    }
    RealImage::from_vec(stack.shape(), stack.data().iter().map(|z| z.re).collect())
}

pub fn encode_mask(mask: &SamplingMask) -> Vec<u8> {
    let s = mask.shape();
    let mut out = Vec::with_capacity(MSK_HEADER_LEN + s.len());
    out.extend_from_slice(MSK_MAGIC);
    out.extend_from_slice(&(s.n_x() as u32).to_le_bytes());
    out.extend_from_slice(&(s.n_y() as u32).to_le_bytes());
    out.push(mask.scheme().map_or(NO_SCHEME, Scheme::code));
    out.extend_from_slice(&mask.accel_target().to_le_bytes());
    out.extend_from_slice(&mask.seed().to_le_bytes());
    let (kind, radius, start, count) = match mask.acs().map(AcsRegion::geometry) {
        None => (0u8, 0.0, 0, 0),
        Some(AcsGeometry::Lines { start, count }) => (1, 0.0, start, count),
        Some(AcsGeometry::Disk { radius }) => (2, radius, 0, 0),
        Some(AcsGeometry::Degenerate) => (3, 0.0, 0, 0),
    };
    out.extend_from_slice(&radius.to_le_bytes());
    out.push(kind);
    out.extend_from_slice(&(start as u32).to_le_bytes());
    out.extend_from_slice(&(count as u32).to_le_bytes());
    out.extend(mask.bits().iter().map(|&b| b as u8));
    out
}

pub fn decode_mask(buf: &[u8]) -> Result<SamplingMask> {
    let mut r = Reader::new(buf);
    r.magic(MSK_MAGIC)?;
    let shape = dims(&mut r)?;
    let scheme_at = r.offset();
    let scheme = match r.u8()? {
        NO_SCHEME => None,
        code => Some(Scheme::from_code(code).map_err(|e| Error::Format {
            offset: scheme_at,
            msg: e.to_string(),
        })?),
    };
    let accel = r.f64()?;
    let seed = r.u64()?;
    let radius = r.f64()?;
    let kind_at = r.offset();
    let kind = r.u8()?;
    let start = r.u32()? as usize;
    let count = r.u32()? as usize;
    let cells_at = r.pos;
    let cells = r.payload(shape.len())?;
    let mut bits = Vec::with_capacity(cells.len());
    for (k, &b) in cells.iter().enumerate() {
        match b {
            0 | 1 => bits.push(b == 1),
            v => {
                return Err(Error::Format {
                    offset: (cells_at + k) as u64,
                    msg: format!("cell byte {v} is not 0 or 1"),
                })
            }
        }
    }
    let mask = SamplingMask::from_bits(shape, bits)?.with_metadata(scheme, accel, seed);
    let bad_acs = |e: Error| Error::Format {
        offset: kind_at,
        msg: format!("invalid ACS record: {e}"),
    };
    let acs = match kind {
        0 => return Ok(mask),
        1 => AcsRegion::lines(shape, start, count).map_err(bad_acs)?,
        2 => AcsRegion::disk(shape, radius).map_err(bad_acs)?,
        3 => AcsRegion::degenerate(shape),
        k => {
            return Err(Error::Format {
                offset: kind_at,
                msg: format!("unknown ACS kind {k}"),
            })
        }
    };
    mask.with_acs(acs).map_err(bad_acs)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &SamplingMask) -> Result<()> {
    fs::write(path, encode_mask(mask))?;
    Ok(())
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<SamplingMask> {
    decode_mask(&fs::read(path)?)
}

fn pgm(shape: GridShape, pixels: impl Iterator<Item = u8>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", shape.n_y(), shape.n_x()).into_bytes();
    out.extend(pixels);
    out
}

/// Binary PGM with sampled cells at 255; rows are frequency-encode lines.
pub fn encode_mask_pgm(mask: &SamplingMask) -> Vec<u8> {
    pgm(mask.shape(), mask.bits().iter().map(|&b| if b { 255 } else { 0 }))
}

pub fn write_mask_pgm(path: impl AsRef<Path>, mask: &SamplingMask) -> Result<()> {
    fs::write(path, encode_mask_pgm(mask))?;
    Ok(())
}

/// Grayscale PGM scaled so the image maximum maps to 255.
pub fn write_image_pgm(path: impl AsRef<Path>, img: &RealImage) -> Result<()> {
    let peak = img.max();
    let scale = if peak > 0.0 { 255.0 / peak } else { 0.0 };
    let bytes = pgm(
        img.shape(),
        img.data().iter().map(|&v| (v * scale).round().clamp(0.0, 255.0) as u8),
    );
    fs::write(path, bytes)?;
    Ok(())
}

pub const CSV_HEADER: &str = "case,scheme,R,ssim,psnr,nmse,reported_ssim,reported_nmse";

/// One metrics row; `metrics` is `None` for a failed cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRecord {
    pub case: usize,
    pub scheme: String,
    pub accel: f64,
    pub metrics: Option<MetricRecord>,
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

pub fn format_metrics_csv(records: &[CsvRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let m = r.metrics.unwrap_or(MetricRecord {
            ssim: f64::NAN,
            psnr_db: f64::NAN,
            nmse: f64::NAN,
        });
        let cols = [
            r.case.to_string(),
            r.scheme.clone(),
            num(r.accel),
            num(m.ssim),
            num(m.psnr_db),
            num(m.nmse),
            num(m.reported_ssim()),
            num(m.reported_nmse()),
        ];
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

pub fn write_metrics_csv(path: impl AsRef<Path>, records: &[CsvRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::param("no metric records to write"));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(format_metrics_csv(records).as_bytes())?;
    Ok(())
}
