//! Plain-text file formats.
//!
//! Field file:
//! ```text
//! HOTFIELD v1 order=<l> nx=<nx> ny=<ny>
//! x y c_1 ... c_N        (nx·ny lines, row-major, x fastest)
//! ```
//! Site list: one `x y` pair per line. Signal file: header `order K b s0`,
//! then `x y S_1 ... S_K` per site. Directions file: one `gx gy gz` per line.
//! Blank lines and lines starting with `#` are ignored everywhere except in
//! front of a field header.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::hotensor::{Order, Site, SymmetricHOT, TensorField};
use crate::stfit::SignalRecord;

pub const FIELD_MAGIC: &str = "HOTFIELD";
pub const FIELD_VERSION: &str = "v1";

/// Directions whose norm is this close to one are renormalized on read.
const DIRECTION_RENORMALIZE: f64 = 1e-4;

/// Formats a number with 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Numbered, non-empty, non-comment lines.
fn content_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push((i + 1, trimmed.to_string()));
    }
    Ok(out)
}

fn parse_numbers(path: &Path, line_no: usize, line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::parse(path, line_no, format!("not a number: {tok:?}")))
        })
        .collect()
}

pub fn write_field<W: Write>(out: &mut W, field: &TensorField) -> std::io::Result<()> {
    writeln!(
        out,
        "{FIELD_MAGIC} {FIELD_VERSION} order={} nx={} ny={}",
        field.order(),
        field.nx(),
        field.ny()
    )?;
    for (site, t) in field.sites().iter().zip(field.tensors()) {
        let mut line = format!("{} {}", fmt_num(site[0]), fmt_num(site[1]));
        for c in t.coeffs() {
            line.push(' ');
            line.push_str(&fmt_num(*c));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn field_to_string(field: &TensorField) -> String {
    let mut buf = Vec::new();
    write_field(&mut buf, field).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn write_field_file(path: &Path, field: &TensorField) -> Result<()> {
    let mut w = create(path)?;
    write_field(&mut w, field)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn parse_header(path: &Path, line_no: usize, line: &str) -> Result<(Order, usize, usize)> {
    let bad = |msg: &str| Error::parse(path, line_no, msg.to_string());
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some(FIELD_MAGIC) {
        return Err(bad("missing HOTFIELD header"));
    }
    if tokens.next() != Some(FIELD_VERSION) {
        return Err(bad("unsupported field file version"));
    }
    let (mut order, mut nx, mut ny) = (None, None, None);
    for tok in tokens {
        let (key, value) = tok.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        let value: usize = value.parse().map_err(|_| bad("header value is not an integer"))?;
        match key {
            "order" => order = Some(value),
            "nx" => nx = Some(value),
            "ny" => ny = Some(value),
            _ => return Err(bad("unknown header key")),
        }
    }
    let order = Order::new(order.ok_or_else(|| bad("header lacks order"))?)?;
    Ok((
        order,
        nx.ok_or_else(|| bad("header lacks nx"))?,
        ny.ok_or_else(|| bad("header lacks ny"))?,
    ))
}

pub fn read_field_file(path: &Path) -> Result<TensorField> {
    let lines = content_lines(path)?;
    let (header_no, header) = lines
        .first()
        .ok_or_else(|| Error::parse(path, 1, "empty field file"))?;
    let (order, nx, ny) = parse_header(path, *header_no, header)?;
    let body = &lines[1..];
    if body.len() != nx * ny {
        return Err(Error::parse(
            path,
            *header_no,
            format!("header declares {} sites, found {}", nx * ny, body.len()),
        ));
    }
    let width = 2 + order.n_unique();
    let mut sites = Vec::with_capacity(body.len());
    let mut tensors = Vec::with_capacity(body.len());
    for (no, line) in body {
        let nums = parse_numbers(path, *no, line)?;
        if nums.len() != width {
            return Err(Error::parse(
                path,
                *no,
                format!("expected {width} columns, found {}", nums.len()),
            ));
        }
        sites.push([nums[0], nums[1]]);
        tensors.push(SymmetricHOT::new(order, nums[2..].to_vec())?);
    }
    TensorField::new(order, nx, ny, sites, tensors)
}

fn is_field_file(path: &Path) -> Result<bool> {
    Ok(content_lines(path)?
        .first()
        .is_some_and(|(_, l)| l.starts_with(FIELD_MAGIC)))
}

/// Reads query sites from a site list or from the nodes of a field file.
pub fn read_sites(path: &Path) -> Result<Vec<Site>> {
    if is_field_file(path)? {
        return Ok(read_field_file(path)?.sites().to_vec());
    }
    content_lines(path)?
        .iter()
        .map(|(no, line)| {
            let nums = parse_numbers(path, *no, line)?;
            match nums.as_slice() {
                [x, y] => Ok([*x, *y]),
                _ => Err(Error::parse(path, *no, "expected `x y`")),
            }
        })
        .collect()
}

pub fn write_sites(path: &Path, sites: &[Site]) -> Result<()> {
    let mut w = create(path)?;
    (|| {
        for s in sites {
            writeln!(w, "{} {}", fmt_num(s[0]), fmt_num(s[1]))?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

/// Per-site predictive spread next to a predicted field.
pub fn write_uncertainty(path: &Path, sites: &[Site], sd: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    (|| {
        writeln!(w, "# x y frobenius_sd")?;
        for (s, v) in sites.iter().zip(sd) {
            writeln!(w, "{} {} {}", fmt_num(s[0]), fmt_num(s[1]), fmt_num(*v))?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

pub fn read_directions(path: &Path) -> Result<Vec<Vector3<f64>>> {
    content_lines(path)?
        .iter()
        .map(|(no, line)| {
            let nums = parse_numbers(path, *no, line)?;
            let [x, y, z] = nums.as_slice() else {
                return Err(Error::parse(path, *no, "expected `gx gy gz`"));
            };
            let g = Vector3::new(*x, *y, *z);
            let norm = g.norm();
            if (norm - 1.0).abs() > DIRECTION_RENORMALIZE {
                return Err(Error::NotUnitVector { norm });
            }
            Ok(g / norm)
        })
        .collect()
}

pub fn write_directions(path: &Path, dirs: &[Vector3<f64>]) -> Result<()> {
    let mut w = create(path)?;
    (|| {
        for g in dirs {
            writeln!(w, "{} {} {}", fmt_num(g.x), fmt_num(g.y), fmt_num(g.z))?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

/// Header of a signal file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalHeader {
    pub order: usize,
    pub n_directions: usize,
    pub b: f64,
    pub s0: f64,
}

pub fn read_signal_file(path: &Path) -> Result<(SignalHeader, SignalRecord)> {
    let lines = content_lines(path)?;
    let (hno, hline) = lines
        .first()
        .ok_or_else(|| Error::parse(path, 1, "empty signal file"))?;
    let toks: Vec<&str> = hline.split_whitespace().collect();
    let bad_header = || Error::parse(path, *hno, "expected header `order K b s0`");
    let [order, k, b, s0] = toks.as_slice() else {
        return Err(bad_header());
    };
    let header = SignalHeader {
        order: order.parse().map_err(|_| bad_header())?,
        n_directions: k.parse().map_err(|_| bad_header())?,
        b: b.parse().map_err(|_| bad_header())?,
        s0: s0.parse().map_err(|_| bad_header())?,
    };
    let mut record = SignalRecord {
        sites: Vec::new(),
        signals: Vec::new(),
    };
    for (no, line) in &lines[1..] {
        let nums = parse_numbers(path, *no, line)?;
        if nums.len() != 2 + header.n_directions {
            return Err(Error::parse(
                path,
                *no,
                format!("expected {} columns, found {}", 2 + header.n_directions, nums.len()),
            ));
        }
        record.sites.push([nums[0], nums[1]]);
        record.signals.push(nums[2..].to_vec());
    }
    Ok((header, record))
}

pub fn write_signal_file(path: &Path, header: &SignalHeader, record: &SignalRecord) -> Result<()> {
    let mut w = create(path)?;
    (|| {
        writeln!(
            w,
            "{} {} {} {}",
            header.order, header.n_directions, header.b, header.s0
        )?;
        for (site, s) in record.sites.iter().zip(&record.signals) {
            let mut line = format!("{} {}", fmt_num(site[0]), fmt_num(site[1]));
            for v in s {
                line.push(' ');
                line.push_str(&fmt_num(*v));
            }
            writeln!(w, "{line}")?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}
