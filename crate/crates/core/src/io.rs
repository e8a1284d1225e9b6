//! Plain-text family files.
//!
//! ```text
//! #points dim=3 delta=0.015625
//! 0.0 0.25 0.5
//! ```
//!
//! Hyperplane files use the header `#hyperplanes` and one coefficient row
//! `a_1 … a_d` per plane, meaning `x_d = a_1 x_1 + … + a_{d-1} x_{d-1} + a_d`.
//! Values are written with 17 significant digits, so writing and reading back
//! reproduces every coordinate exactly. Blank lines are ignored.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::family::{Family, FamilyKind};
use crate::geometry;
use crate::{Error, Result};

pub fn format_family(family: &Family) -> String {
    let mut out = String::with_capacity(family.as_flat().len() * 25 + 64);
    let _ = writeln!(
        out,
        "#{} dim={} delta={}",
        family.kind(),
        family.dim(),
        family.delta()
    );
    for row in family.iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            // +0.0 keeps negative zero out of the files
            let _ = write!(out, "{:.16e}", v + 0.0);
        }
        out.push('\n');
    }
    out
}

pub fn write_family(family: &Family, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_family(family)).map_err(|e| with_path(e, path))
}

pub fn read_family(path: impl AsRef<Path>) -> Result<Family> {
    let path = path.as_ref();
    parse_family(&fs::read_to_string(path).map_err(|e| with_path(e, path))?)
}

fn with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn parse_header(line: &str) -> Result<(FamilyKind, usize, f64)> {
    let mut tokens = line.split_whitespace();
    let kind = match tokens.next() {
        Some("#points") => FamilyKind::Points,
        Some("#hyperplanes") => FamilyKind::Hyperplanes,
        other => {
            return Err(Error::parse(
                1,
                format!(
                    "expected a '#points' or '#hyperplanes' header, found {:?}",
                    other.unwrap_or("")
                ),
            ))
        }
    };
    let mut dim = None;
    let mut delta = None;
    for tok in tokens {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| Error::parse(1, format!("malformed header field {tok:?}")))?;
        match key {
            "dim" => {
                let d: usize = value
                    .parse()
                    .map_err(|_| Error::parse(1, format!("invalid dim {value:?}")))?;
                if d < 2 {
                    return Err(Error::parse(1, format!("dim must be >= 2, got {d}")));
                }
                dim = Some(d);
            }
            "delta" => {
                let v: f64 = value
                    .parse()
                    .map_err(|_| Error::parse(1, format!("invalid delta {value:?}")))?;
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::parse(1, format!("delta must lie in (0, 1), got {value}")));
                }
                delta = Some(v);
            }
            _ => return Err(Error::parse(1, format!("unknown header field {key:?}"))),
        }
    }
    match (dim, delta) {
        (Some(d), Some(delta)) => Ok((kind, d, delta)),
        (None, _) => Err(Error::parse(1, "header is missing dim")),
        (_, None) => Err(Error::parse(1, "header is missing delta")),
    }
}

pub fn parse_family(text: &str) -> Result<Family> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break l,
            None => return Err(Error::parse(1, "empty file, expected a header")),
        }
    };
    let (kind, dim, delta) = parse_header(header)?;
    let mut data = Vec::new();
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != dim {
            return Err(Error::parse(
                line_no,
                format!("expected {dim} fields, found {}", fields.len()),
            ));
        }
        let start = data.len();
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(line_no, format!("invalid number {f:?}")))?;
            if !v.is_finite() {
                let what = match kind {
                    FamilyKind::Points => "non-finite coordinate".to_string(),
                    FamilyKind::Hyperplanes => {
                        "non-finite coefficient (vertical hyperplanes are not representable)"
                            .to_string()
                    }
                };
                return Err(Error::parse(line_no, what));
            }
            data.push(v);
        }
        let row = &data[start..];
        if kind == FamilyKind::Hyperplanes {
            geometry::validate_plane_coeffs(row)
                .map_err(|e| Error::parse(line_no, e.to_string()))?;
        }
        let key: Vec<u64> = row.iter().map(|x| (x + 0.0).to_bits()).collect();
        if let Some(first) = seen.insert(key, line_no) {
            return Err(Error::parse(
                line_no,
                format!("duplicate of the element on line {first}"),
            ));
        }
    }
    Family::from_flat(kind, dim, delta, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{construct_random, ConstructionSpec};

    fn line_of(err: Error) -> usize {
        match err {
            Error::Parse { line, .. } => line,
            other => panic!("expected a parse error, got {other}"),
        }
    }

    #[test]
    fn round_trips() {
        let (p, t) = ConstructionSpec {
            d: 3,
            delta: 2f64.powi(-5),
            s: 1.5,
            t: 1.5,
        }
        .build()
        .unwrap();
        for f in [p, t] {
            let mut back = parse_family(&format_family(&f)).unwrap();
            back.meta = f.meta;
            assert_eq!(back, f);
        }
        let r = construct_random(FamilyKind::Hyperplanes, 4, 0.1, 50, 9).unwrap();
        assert_eq!(parse_family(&format_family(&r)).unwrap(), r);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.txt");
        let f = construct_random(FamilyKind::Points, 2, 0.01, 40, 2).unwrap();
        write_family(&f, &path).unwrap();
        assert_eq!(read_family(&path).unwrap(), f);
    }

    #[test]
    fn short_row_names_its_line() {
        let text = "#points dim=3 delta=0.125\n0 0 0\n\n0.5 0.5\n";
        let err = parse_family(text).unwrap_err();
        assert_eq!(line_of(err), 4);
    }

    #[test]
    fn header_errors() {
        assert_eq!(line_of(parse_family("#points dim=2 delta=0\n").unwrap_err()), 1);
        assert_eq!(line_of(parse_family("#points dim=2\n").unwrap_err()), 1);
        assert_eq!(line_of(parse_family("#lines dim=2 delta=0.5\n").unwrap_err()), 1);
        assert_eq!(line_of(parse_family("").unwrap_err()), 1);
        assert_eq!(line_of(parse_family("#points dim=2 delta=0.5 extra=1\n").unwrap_err()), 1);
    }

    #[test]
    fn row_errors() {
        let h = "#hyperplanes dim=2 delta=0.125\n";
        assert_eq!(line_of(parse_family(&format!("{h}0 0\ninf 0\n")).unwrap_err()), 3);
        assert_eq!(line_of(parse_family(&format!("{h}0 0\n0 x\n")).unwrap_err()), 3);
        assert_eq!(line_of(parse_family(&format!("{h}11 0\n")).unwrap_err()), 2);
        assert_eq!(line_of(parse_family(&format!("{h}0 0.5\n0 0.5\n")).unwrap_err()), 3);
    }
}
