//! Point-cloud files.
//!
//! Binary layout (little-endian): the magic `PCL3`, a `u32` record count,
//! then `count` records of three `f32` values. The text alternative is one
//! `x,y,z` record per line.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::geometry::Point;

pub const MAGIC: &[u8; 4] = b"PCL3";
const HEADER_LEN: usize = 8;
const RECORD_LEN: usize = 12;

#[derive(Debug, Error)]
pub enum CloudError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("missing PCL3 magic")]
    BadMagic,
    #[error("header announces {count} records but {available} payload bytes follow")]
    LengthMismatch { count: u32, available: usize },
    #[error("record {record} has a non-finite coordinate")]
    NonFinite { record: usize },
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("{0} points do not fit a PCL3 header")]
    TooLarge(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloudFormat {
    Pcl3,
    Csv,
}

impl CloudFormat {
    /// `.csv` selects text, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => CloudFormat::Csv,
            _ => CloudFormat::Pcl3,
        }
    }
}

pub fn encode_pcl3(points: &[Point]) -> Result<Vec<u8>, CloudError> {
    let count = u32::try_from(points.len()).map_err(|_| CloudError::TooLarge(points.len()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * points.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    for p in points {
        for v in p.coords() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_pcl3(bytes: &[u8]) -> Result<Vec<Point>, CloudError> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(CloudError::BadMagic);
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let payload = &bytes[HEADER_LEN..];
    if (count as u64) * RECORD_LEN as u64 != payload.len() as u64 {
        return Err(CloudError::LengthMismatch {
            count,
            available: payload.len(),
        });
    }
    payload
        .chunks_exact(RECORD_LEN)
        .enumerate()
        .map(|(record, r)| {
            let f = |o: usize| f32::from_le_bytes(r[o..o + 4].try_into().unwrap());
            Point::new(f(0), f(4), f(8)).map_err(|_| CloudError::NonFinite { record })
        })
        .collect()
}

/// Writes `x,y,z` lines using the shortest representation that reads back
/// to the same `f32`.
pub fn write_csv(mut w: impl Write, points: &[Point]) -> Result<(), CloudError> {
    for p in points {
        writeln!(w, "{},{},{}", p.x(), p.y(), p.z())?;
    }
    w.flush()?;
    Ok(())
}

/// Parses `x,y,z` records. Surrounding whitespace and blank lines are
/// ignored.
pub fn read_csv(bytes: &[u8]) -> Result<Vec<Point>, CloudError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut points = Vec::new();
    for (record_no, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CloudError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(CloudError::Csv {
                line,
                message: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        let mut c = [0f32; 3];
        for (slot, field) in c.iter_mut().zip(rec.iter()) {
            *slot = field.parse().map_err(|_| CloudError::Csv {
                line,
                message: format!("bad number {field:?}"),
            })?;
        }
        let p = Point::try_from(c).map_err(|_| CloudError::NonFinite { record: record_no })?;
        points.push(p);
    }
    Ok(points)
}

/// Detects the format from the leading magic.
pub fn decode(bytes: &[u8]) -> Result<Vec<Point>, CloudError> {
    if bytes.starts_with(MAGIC) {
        decode_pcl3(bytes)
    } else {
        read_csv(bytes)
    }
}

pub fn save(path: &Path, points: &[Point]) -> Result<(), CloudError> {
    match CloudFormat::from_path(path) {
        CloudFormat::Pcl3 => fs::write(path, encode_pcl3(points)?)?,
        CloudFormat::Csv => write_csv(io::BufWriter::new(fs::File::create(path)?), points)?,
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<Point>, CloudError> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(x: f32, y: f32, z: f32) -> Point {
        Point::new(x, y, z).unwrap()
    }

    #[test]
    fn pcl3_layout() {
        let bytes = encode_pcl3(&[pt(1.0, -2.0, 0.5)]).unwrap();
        assert_eq!(&bytes[..4], b"PCL3");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[16..20], &0.5f32.to_le_bytes());
        assert_eq!(bytes.len(), 20);
    }

    #[test]
    fn pcl3_rejects_malformed() {
        assert!(matches!(decode_pcl3(b"PCL"), Err(CloudError::BadMagic)));
        assert!(matches!(decode_pcl3(b"XYZ3\0\0\0\0"), Err(CloudError::BadMagic)));
        let mut bytes = encode_pcl3(&[pt(1.0, 2.0, 3.0)]).unwrap();
        bytes.push(0);
        assert!(matches!(decode_pcl3(&bytes), Err(CloudError::LengthMismatch { .. })));
        let huge = [b'P', b'C', b'L', b'3', 0xff, 0xff, 0xff, 0xff];
        assert!(matches!(decode_pcl3(&huge), Err(CloudError::LengthMismatch { .. })));
        let mut nan = encode_pcl3(&[pt(1.0, 2.0, 3.0)]).unwrap();
        nan[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_pcl3(&nan), Err(CloudError::NonFinite { record: 0 })));
        assert_eq!(decode_pcl3(b"PCL3\0\0\0\0").unwrap(), vec![]);
    }

    #[test]
    fn csv_parsing() {
        let pts = read_csv(b"1,2,3\n\n -0.5 , 4e2,0\n").unwrap();
        assert_eq!(pts, vec![pt(1.0, 2.0, 3.0), pt(-0.5, 400.0, 0.0)]);
        assert!(matches!(read_csv(b"1,2\n"), Err(CloudError::Csv { line: 1, .. })));
        assert!(matches!(
            read_csv(b"1,2,3\n1,x,3\n"),
            Err(CloudError::Csv { line: 2, .. })
        ));
        assert!(matches!(
            read_csv(b"1,inf,3\n"),
            Err(CloudError::NonFinite { record: 0 })
        ));
    }

    #[test]
    fn format_by_extension() {
        assert_eq!(CloudFormat::from_path(Path::new("a.CSV")), CloudFormat::Csv);
        assert_eq!(CloudFormat::from_path(Path::new("a.pcl3")), CloudFormat::Pcl3);
        assert_eq!(CloudFormat::from_path(Path::new("noext")), CloudFormat::Pcl3);
    }

    fn arb_points() -> impl Strategy<Value = Vec<Point>> {
        prop::collection::vec(
            prop::array::uniform3(prop::num::f32::NORMAL | prop::num::f32::ZERO | prop::num::f32::SUBNORMAL),
            0..50,
        )
        .prop_map(|v| v.into_iter().map(|c| Point::try_from(c).unwrap()).collect())
    }

    proptest! {
        #[test]
        fn both_formats_round_trip(points in arb_points()) {
            prop_assert_eq!(decode(&encode_pcl3(&points).unwrap()).unwrap(), points.clone());
            let mut text = Vec::new();
            write_csv(&mut text, &points).unwrap();
            prop_assert_eq!(decode(&text).unwrap(), points);
        }
    }
}
