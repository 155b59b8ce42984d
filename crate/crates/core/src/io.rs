//! Raster and mask file formats.
//!
//! * CSV: one raster row per line, `,` separated, `.` decimal point. Empty
//!   cells and `nan` mark nodata.
//! * f32 binary: 16-byte header (`b"THERMF32"`, width `u32` LE, height `u32`
//!   LE) followed by `width * height` little-endian `f32` values; NaN marks
//!   nodata.
//! * PGM16 + scale: binary `P5` graymap; temperature = `offset + scale * raw`.
//! * Masks are written as 8-bit `P5` PGM (0 / 255) or CSV (0 / 1).
//!
//! Every writer goes through a temporary file followed by a rename.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, ThermalRaster};

pub const F32_MAGIC: &[u8; 8] = b"THERMF32";
const F32_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RasterFormat {
    Csv,
    F32Binary,
    /// 16-bit graymap with a linear calibration.
    Pgm16 { scale: f64, offset: f64 },
}

impl RasterFormat {
    /// Guesses the format from a file extension (`.csv`, `.f32`/`.bin`).
    /// PGM needs an explicit calibration, so it is never guessed.
    pub fn from_extension(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" | "txt" => Some(RasterFormat::Csv),
            "f32" | "bin" | "raw" => Some(RasterFormat::F32Binary),
            _ => None,
        }
    }
}

impl FromStr for RasterFormat {
    type Err = Error;

    /// Accepts `csv`, `f32`, or `pgm16:<scale>[:<offset>]`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let kind = parts.next().unwrap_or_default().trim().to_ascii_lowercase();
        let number = |p: Option<&str>, what: &str| -> Result<Option<f64>> {
            p.map(|v| {
                v.trim().parse::<f64>().map_err(|_| {
                    Error::Parameter(format!("bad {what} '{v}' in raster format '{s}'"))
                })
            })
            .transpose()
        };
        let format = match kind.as_str() {
            "csv" => RasterFormat::Csv,
            "f32" | "f32-binary" | "bin" => RasterFormat::F32Binary,
            "pgm16" | "pgm" => {
                let scale = number(parts.next(), "scale")?.ok_or_else(|| {
                    Error::Parameter(format!("raster format '{s}' needs pgm16:<scale>[:<offset>]"))
                })?;
                let offset = number(parts.next(), "offset")?.unwrap_or(0.0);
                if !(scale.is_finite() && scale > 0.0) || !offset.is_finite() {
                    return Err(Error::Parameter(format!(
                        "pgm16 scale must be positive and finite in '{s}'"
                    )));
                }
                RasterFormat::Pgm16 { scale, offset }
            }
            _ => return Err(Error::Parameter(format!("unknown raster format '{s}'"))),
        };
        if parts.next().is_some() {
            return Err(Error::Parameter(format!("trailing fields in raster format '{s}'")));
        }
        Ok(format)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskFormat {
    Pgm,
    Csv,
}

impl MaskFormat {
    pub fn from_extension(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "pgm" => Some(MaskFormat::Pgm),
            "csv" | "txt" => Some(MaskFormat::Csv),
            _ => None,
        }
    }
}

impl FromStr for MaskFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pgm" => Ok(MaskFormat::Pgm),
            "csv" => Ok(MaskFormat::Csv),
            other => Err(Error::Parameter(format!("unknown mask format '{other}'"))),
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn load_raster(path: &Path, format: RasterFormat) -> Result<ThermalRaster> {
    let bytes = read(path)?;
    let origin = path.display().to_string();
    match format {
        RasterFormat::Csv => {
            let text = std::str::from_utf8(&bytes)
                .map_err(|_| Error::parse(&origin, "file is not valid UTF-8 text"))?;
            parse_csv_raster(text, &origin)
        }
        RasterFormat::F32Binary => decode_f32(&bytes, &origin),
        RasterFormat::Pgm16 { scale, offset } => {
            let pgm = decode_pgm(&bytes, &origin)?;
            let values = pgm.samples.iter().map(|&s| offset + scale * s as f64).collect();
            ThermalRaster::new(pgm.width, pgm.height, values)
        }
    }
}

pub fn save_raster(raster: &ThermalRaster, path: &Path, format: RasterFormat) -> Result<()> {
    let bytes = match format {
        RasterFormat::Csv => encode_csv_raster(raster).into_bytes(),
        RasterFormat::F32Binary => encode_f32(raster),
        RasterFormat::Pgm16 { scale, offset } => encode_pgm16(raster, scale, offset)?,
    };
    write_atomic(path, &bytes)
}

/// Parses CSV raster text; `origin` names the source in error messages.
pub fn parse_csv_raster(text: &str, origin: &str) -> Result<ThermalRaster> {
    let mut values = Vec::new();
    let mut nodata = Vec::new();
    let mut width = None;
    let mut height = 0;
    let lines: Vec<&str> = text.lines().collect();
    let last = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(0, |i| i + 1);
    for (row_idx, line) in lines[..last].iter().enumerate() {
        let row = row_idx + 1;
        let cells: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                let plural = if cells.len() == 1 { "" } else { "s" };
                return Err(Error::parse(
                    origin,
                    format!("row {row} has {} column{plural}, expected {w}", cells.len()),
                ));
            }
            _ => {}
        }
        for (col_idx, cell) in cells.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                values.push(0.0);
                nodata.push(true);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::parse(
                    origin,
                    format!("row {row}, column {}: cannot parse '{cell}' as a number", col_idx + 1),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    origin,
                    format!("row {row}, column {}: non-finite value '{cell}'", col_idx + 1),
                ));
            }
            values.push(v);
            nodata.push(false);
        }
        height += 1;
    }
    let width = width.ok_or_else(|| Error::parse(origin, "no rows"))?;
    ThermalRaster::with_nodata(width, height, values, Some(nodata))
}

pub fn encode_csv_raster(raster: &ThermalRaster) -> String {
    let mut out = String::with_capacity(raster.len() * 8);
    for y in 0..raster.height() {
        for x in 0..raster.width() {
            if x > 0 {
                out.push(',');
            }
            let i = y * raster.width() + x;
            if raster.is_valid(i) {
                // `{}` prints the shortest string that parses back exactly
                let _ = write!(out, "{}", raster.values()[i]);
            } else {
                out.push_str("nan");
            }
        }
        out.push('\n');
    }
    out
}

fn encode_f32(raster: &ThermalRaster) -> Vec<u8> {
    let mut out = Vec::with_capacity(F32_HEADER_LEN + 4 * raster.len());
    out.extend_from_slice(F32_MAGIC);
    out.extend_from_slice(&(raster.width() as u32).to_le_bytes());
    out.extend_from_slice(&(raster.height() as u32).to_le_bytes());
    for (i, &v) in raster.values().iter().enumerate() {
        let v = if raster.is_valid(i) { v as f32 } else { f32::NAN };
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode_f32(bytes: &[u8], origin: &str) -> Result<ThermalRaster> {
    if bytes.len() < F32_HEADER_LEN || &bytes[..8] != F32_MAGIC {
        return Err(Error::parse(origin, "bad header: missing THERMF32 magic"));
    }
    let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::parse(origin, "bad header: dimensions overflow"))?;
    let body = &bytes[F32_HEADER_LEN..];
    if body.len() != expected {
        return Err(Error::parse(
            origin,
            format!(
                "bad header: {width}x{height} needs {expected} data bytes, found {}",
                body.len()
            ),
        ));
    }
    let mut values = Vec::with_capacity(width * height);
    let mut nodata = Vec::with_capacity(width * height);
    for chunk in body.chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if v.is_nan() {
            values.push(0.0);
            nodata.push(true);
        } else if v.is_infinite() {
            let i = values.len();
            return Err(Error::parse(
                origin,
                format!("row {}, column {}: infinite value", i / width + 1, i % width + 1),
            ));
        } else {
            values.push(v as f64);
            nodata.push(false);
        }
    }
    ThermalRaster::with_nodata(width, height, values, Some(nodata))
}

fn encode_pgm16(raster: &ThermalRaster, scale: f64, offset: f64) -> Result<Vec<u8>> {
    if raster.has_nodata() {
        return Err(Error::Parameter("pgm16 cannot represent nodata pixels".into()));
    }
    let mut out = format!("P5\n{} {}\n65535\n", raster.width(), raster.height()).into_bytes();
    for &v in raster.values() {
        let raw = ((v - offset) / scale).round();
        if !(0.0..=65535.0).contains(&raw) {
            return Err(Error::Parameter(format!(
                "value {v} does not fit pgm16 with scale {scale} and offset {offset}"
            )));
        }
        out.extend_from_slice(&(raw as u16).to_be_bytes());
    }
    Ok(out)
}

struct Pgm {
    width: usize,
    height: usize,
    samples: Vec<u16>,
}

fn decode_pgm(bytes: &[u8], origin: &str) -> Result<Pgm> {
    let mut pos = 0;
    let next_token = |pos: &mut usize| -> Option<String> {
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
        (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = next_token(&mut pos);
    if magic.as_deref() != Some("P5") {
        return Err(Error::parse(origin, "bad header: expected binary PGM magic 'P5'"));
    }
    let mut field = |name: &str| -> Result<usize> {
        next_token(&mut pos)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(origin, format!("bad header: missing or invalid {name}")))
    };
    let width = field("width")?;
    let height = field("height")?;
    let maxval = field("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::parse(origin, format!("bad header: maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let bytes_per = if maxval < 256 { 1 } else { 2 };
    let n = width * height;
    let body = bytes.get(pos..).unwrap_or_default();
    if body.len() < n * bytes_per {
        return Err(Error::parse(
            origin,
            format!("truncated data: expected {} bytes, found {}", n * bytes_per, body.len()),
        ));
    }
    let samples = if bytes_per == 1 {
        body[..n].iter().map(|&b| b as u16).collect()
    } else {
        body[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    Ok(Pgm {
        width,
        height,
        samples,
    })
}

pub fn encode_mask(mask: &BinaryMask, format: MaskFormat) -> Vec<u8> {
    match format {
        MaskFormat::Pgm => {
            let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
            out.extend(mask.bits().iter().map(|&b| if b { 255u8 } else { 0 }));
            out
        }
        MaskFormat::Csv => {
            let mut out = String::with_capacity(mask.bits().len() * 2);
            for row in mask.bits().chunks(mask.width()) {
                let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
            out.into_bytes()
        }
    }
}

pub fn save_mask(mask: &BinaryMask, path: &Path, format: MaskFormat) -> Result<()> {
    write_atomic(path, &encode_mask(mask, format))
}

pub fn load_mask(path: &Path, format: MaskFormat) -> Result<BinaryMask> {
    let bytes = read(path)?;
    let origin = path.display().to_string();
    match format {
        MaskFormat::Pgm => {
            let pgm = decode_pgm(&bytes, &origin)?;
            BinaryMask::new(pgm.width, pgm.height, pgm.samples.iter().map(|&s| s != 0).collect())
        }
        MaskFormat::Csv => {
            let text = std::str::from_utf8(&bytes)
                .map_err(|_| Error::parse(&origin, "file is not valid UTF-8 text"))?;
            let raster = parse_csv_raster(text, &origin)?;
            if raster.has_nodata() {
                return Err(Error::parse(&origin, "mask cells must be 0 or 1"));
            }
            BinaryMask::new(
                raster.width(),
                raster.height(),
                raster.values().iter().map(|&v| v != 0.0).collect(),
            )
        }
    }
}

/// Sibling path with `suffix` appended to the file stem, e.g.
/// `out/mask.pgm` + `.report.txt` -> `out/mask.report.txt`.
pub fn sibling_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    path.with_file_name(format!("{stem}{suffix}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_text_parses_row_major() {
        let r = parse_csv_raster("1.0,2.0\n3.0,4.0", "inline").unwrap();
        assert_eq!((r.width(), r.height()), (2, 2));
        assert_eq!(r.values(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn ragged_csv_names_the_row() {
        let err = parse_csv_raster("1.0,2.0\n3.0", "inline").unwrap_err();
        assert!(
            err.to_string().contains("row 2 has 1 column, expected 2"),
            "{err}"
        );
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let err = parse_csv_raster("1,2\n3,abc\n", "inline").unwrap_err();
        assert!(err.to_string().contains("row 2, column 2"), "{err}");
    }

    #[test]
    fn csv_nodata_cells() {
        let r = parse_csv_raster("1,nan\n,4\n", "inline").unwrap();
        assert_eq!(r.valid_count(), 2);
        assert_eq!(encode_csv_raster(&r), "1,nan\nnan,4\n");
    }

    #[test]
    fn pgm_masks_use_0_and_255() {
        let zero = encode_mask(&BinaryMask::empty(crate::raster::Shape::new(3, 3)), MaskFormat::Pgm);
        let header = b"P5\n3 3\n255\n";
        assert_eq!(&zero[..header.len()], header);
        assert_eq!(&zero[header.len()..], &[0u8; 9]);

        let full = encode_mask(&BinaryMask::full(crate::raster::Shape::new(2, 2)), MaskFormat::Pgm);
        assert_eq!(&full[b"P5\n2 2\n255\n".len()..], &[255u8; 4]);
    }

    #[test]
    fn format_strings() {
        assert_eq!("csv".parse::<RasterFormat>().unwrap(), RasterFormat::Csv);
        assert_eq!(
            "pgm16:0.01:-20".parse::<RasterFormat>().unwrap(),
            RasterFormat::Pgm16 {
                scale: 0.01,
                offset: -20.0
            }
        );
        assert!("pgm16".parse::<RasterFormat>().is_err());
        assert!("tiff".parse::<RasterFormat>().is_err());
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let r = ThermalRaster::filled(3, 3, 1.0).unwrap();
        let mut bytes = encode_f32(&r);
        bytes.pop();
        assert!(decode_f32(&bytes, "x").is_err());
        assert!(decode_f32(b"NOTMAGIC00000000", "x").is_err());
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(
            sibling_path(Path::new("out/mask.pgm"), ".report.txt"),
            PathBuf::from("out/mask.report.txt")
        );
    }
}
