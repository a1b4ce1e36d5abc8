//! File formats: 8-bit binary PGM images and plain-text dumps of vectors,
//! observations and measurement models.
//!
//! Text dumps hold one value per line. Real values are written as a single
//! number, complex values as `re,im`. Blank lines and lines starting with
//! `#` are ignored on input. Floats are written with 17 significant digits
//! so a dump/load cycle is exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measurement::{CdpModel, DenseModel, DftShape, MeasurementModel, Observation};
use crate::numerics::{Field, SignalVector};

/// Grayscale image with intensities in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Domain("image must be at least 1×1".into()));
        }
        if pixels.len() != rows * cols {
            return Err(Error::dim("image pixels", rows * cols, pixels.len()));
        }
        Ok(GrayImage { rows, cols, pixels })
    }

    /// Diagonal ramp quantized to 8 bits, so it survives a PGM round trip.
    pub fn synthetic_gradient(rows: usize, cols: usize) -> Result<Self> {
        let span = (rows + cols).saturating_sub(2).max(1) as f64;
        let pixels = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| ((r + c) as f64 / span * 255.0).round() / 255.0))
            .collect();
        Self::new(rows, cols, pixels)
    }

    pub fn to_signal(&self) -> Result<SignalVector> {
        SignalVector::real(self.pixels.iter().copied())
    }
}

fn parse_err(source: &str, offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source.to_string(),
        offset,
        message: message.into(),
    }
}

/// Parses a binary (P5) PGM with maxval ≤ 255.
pub fn parse_pgm(bytes: &[u8], source: &str) -> Result<GrayImage> {
    let mut pos = 0;
    let token = |pos: &mut usize| -> Result<(usize, String)> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(parse_err(source, start, "unexpected end of header"));
        }
        Ok((start, String::from_utf8_lossy(&bytes[start..*pos]).into_owned()))
    };

    let (off, magic) = token(&mut pos)?;
    if magic != "P5" {
        return Err(parse_err(source, off, format!("expected magic P5, found `{magic}`")));
    }
    let number = |pos: &mut usize, what: &str| -> Result<usize> {
        let (off, tok) = token(pos)?;
        tok.parse::<usize>()
            .map_err(|_| parse_err(source, off, format!("invalid {what} `{tok}`")))
    };
    let cols = number(&mut pos, "width")?;
    let rows = number(&mut pos, "height")?;
    let maxval_off = pos;
    let maxval = number(&mut pos, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(parse_err(
            source,
            maxval_off,
            format!("maxval {maxval} unsupported (need 1..=255)"),
        ));
    }
    if rows == 0 || cols == 0 {
        return Err(parse_err(source, off, "zero image dimension"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(parse_err(source, pos, "missing raster separator"));
    }
    pos += 1;
    let need = rows * cols;
    let raster = &bytes[pos..];
    if raster.len() < need {
        return Err(parse_err(
            source,
            bytes.len(),
            format!("raster truncated: need {need} bytes, found {}", raster.len()),
        ));
    }
    let pixels = raster[..need]
        .iter()
        .map(|&v| (v as f64 / maxval as f64).min(1.0))
        .collect();
    GrayImage::new(rows, cols, pixels)
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes, &path.display().to_string())
}

pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.cols, image.rows).into_bytes();
    out.extend(
        image
            .pixels
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    fs::write(path, encode_pgm(image)).map_err(|e| Error::io(path, e))
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_value(field: Field, v: Complex64) -> String {
    match field {
        Field::Real => fmt_f64(v.re),
        Field::Complex => format!("{},{}", fmt_f64(v.re), fmt_f64(v.im)),
    }
}

/// Non-comment lines with their byte offsets.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = 0;
    text.split_inclusive('\n').filter_map(move |raw| {
        let start = offset;
        offset += raw.len();
        let line = raw.trim();
        (!line.is_empty() && !line.starts_with('#')).then_some((start, line))
    })
}

fn parse_scalar(line: &str, offset: usize, source: &str) -> Result<(Complex64, bool)> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| parse_err(source, offset, format!("invalid number `{}`", s.trim())))
    };
    match line.split_once(',') {
        Some((re, im)) => Ok((Complex64::new(num(re)?, num(im)?), true)),
        None => Ok((Complex64::new(num(line)?, 0.0), false)),
    }
}

pub fn format_vector(v: &SignalVector) -> String {
    let mut s = String::new();
    for x in v.as_slice() {
        s.push_str(&fmt_value(v.field(), *x));
        s.push('\n');
    }
    s
}

/// Parses a vector dump; it is complex if any entry is written as `re,im`.
pub fn parse_vector(text: &str, source: &str) -> Result<SignalVector> {
    let mut values = Vec::new();
    let mut complex = false;
    for (off, line) in data_lines(text) {
        let (v, c) = parse_scalar(line, off, source)?;
        complex |= c;
        values.push(v);
    }
    if values.is_empty() {
        return Err(parse_err(source, 0, "empty vector file"));
    }
    SignalVector::new(if complex { Field::Complex } else { Field::Real }, values)
}

pub fn write_vector(path: &Path, v: &SignalVector) -> Result<()> {
    fs::write(path, format_vector(v)).map_err(|e| Error::io(path, e))
}

pub fn read_vector(path: &Path) -> Result<SignalVector> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_vector(&text, &path.display().to_string())
}

pub fn format_observation(obs: &Observation) -> String {
    let mut s = String::new();
    for b in obs.amplitudes() {
        s.push_str(&fmt_f64(*b));
        s.push('\n');
    }
    s
}

pub fn parse_observation(text: &str, source: &str) -> Result<Observation> {
    let mut b = Vec::new();
    for (off, line) in data_lines(text) {
        let (v, complex) = parse_scalar(line, off, source)?;
        if complex {
            return Err(parse_err(source, off, "amplitudes must be real"));
        }
        if v.re < 0.0 {
            return Err(parse_err(source, off, "amplitudes must be nonnegative"));
        }
        b.push(v.re);
    }
    if b.is_empty() {
        return Err(parse_err(source, 0, "empty observation file"));
    }
    Observation::new(b)
}

pub fn write_observation(path: &Path, obs: &Observation) -> Result<()> {
    fs::write(path, format_observation(obs)).map_err(|e| Error::io(path, e))
}

pub fn read_observation(path: &Path) -> Result<Observation> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_observation(&text, &path.display().to_string())
}

/// Model dump. Header line, then entries one per line:
///
/// ```text
/// dense <m> <n> <real|complex>      # m·n entries, row-major, row i = aᵢ'
/// cdp <real|complex> <K> 1d <n>     # K·n mask entries as re,im
/// cdp <real|complex> <K> 2d <rows> <cols>
/// ```
pub fn format_model(model: &MeasurementModel) -> String {
    let mut s = String::new();
    match model {
        MeasurementModel::Dense(d) => {
            let (m, n) = (model.m(), model.n());
            s.push_str(&format!("dense {m} {n} {}\n", model.field()));
            for i in 0..m {
                for j in 0..n {
                    s.push_str(&fmt_value(model.field(), d.entry(i, j)));
                    s.push('\n');
                }
            }
        }
        MeasurementModel::Cdp(c) => {
            let k = c.masks().len();
            match c.shape() {
                DftShape::OneD(n) => s.push_str(&format!("cdp {} {k} 1d {n}\n", model.field())),
                DftShape::TwoD { rows, cols } => {
                    s.push_str(&format!("cdp {} {k} 2d {rows} {cols}\n", model.field()))
                }
            }
            for mask in c.masks() {
                for d in mask {
                    s.push_str(&fmt_value(Field::Complex, *d));
                    s.push('\n');
                }
            }
        }
    }
    s
}

pub fn parse_model(text: &str, source: &str) -> Result<MeasurementModel> {
    let mut lines = data_lines(text);
    let (hoff, header) = lines
        .next()
        .ok_or_else(|| parse_err(source, 0, "empty model file"))?;
    let words: Vec<&str> = header.split_whitespace().collect();
    let int = |w: Option<&&str>, what: &str| -> Result<usize> {
        w.and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(source, hoff, format!("bad or missing {what} in header")))
    };
    let field = |w: Option<&&str>| -> Result<Field> {
        w.ok_or_else(|| parse_err(source, hoff, "missing field in header"))?
            .parse()
            .map_err(|_| parse_err(source, hoff, "field must be real or complex"))
    };
    let (expected, build): (usize, Box<dyn Fn(Vec<Complex64>) -> Result<MeasurementModel>>) =
        match words.first().copied() {
            Some("dense") => {
                let (m, n, f) = (int(words.get(1), "m")?, int(words.get(2), "n")?, field(words.get(3))?);
                (
                    m * n,
                    Box::new(move |v| Ok(MeasurementModel::Dense(DenseModel::from_rows(f, m, n, v)?))),
                )
            }
            Some("cdp") => {
                let f = field(words.get(1))?;
                let k = int(words.get(2), "mask count")?;
                let shape = match words.get(3).copied() {
                    Some("1d") => DftShape::OneD(int(words.get(4), "n")?),
                    Some("2d") => DftShape::TwoD {
                        rows: int(words.get(4), "rows")?,
                        cols: int(words.get(5), "cols")?,
                    },
                    _ => return Err(parse_err(source, hoff, "expected 1d or 2d transform")),
                };
                let n = shape.len();
                (
                    k * n,
                    Box::new(move |v: Vec<Complex64>| {
                        let masks = v.chunks(n.max(1)).map(|c| c.to_vec()).collect();
                        Ok(MeasurementModel::Cdp(CdpModel::new(f, shape, masks)?))
                    }),
                )
            }
            _ => return Err(parse_err(source, hoff, "header must start with dense or cdp")),
        };
    let mut values = Vec::with_capacity(expected);
    let mut last = hoff;
    for (off, line) in lines {
        values.push(parse_scalar(line, off, source)?.0);
        last = off;
    }
    if values.len() != expected {
        return Err(parse_err(
            source,
            last,
            format!("expected {expected} entries, found {}", values.len()),
        ));
    }
    build(values)
}

pub fn write_model(path: &Path, model: &MeasurementModel) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(format_model(model).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<MeasurementModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, &path.display().to_string())
}

/// `key = value` pairs; `#` starts a comment line.
pub fn parse_config(text: &str, source: &str) -> Result<Vec<(String, String)>> {
    data_lines(text)
        .map(|(off, line)| {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(source, off, "expected key = value"))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(parse_err(source, off, "empty key"));
            }
            Ok((key.to_string(), v.trim().to_string()))
        })
        .collect()
}
