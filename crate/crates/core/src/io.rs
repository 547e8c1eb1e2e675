//! Field persistence.
//!
//! Binary layout (little-endian), 64-byte header followed by row-major data:
//!
//! ```text
//! 0..4    magic "QFDF"
//! 4       value kind   0 = real, 1 = complex (re, im interleaved)
//! 5       dims         1 or 2
//! 6       boundary     bit 0: axis 0 periodic, bit 1: axis 1 periodic
//! 7       layout       0 = field, 1 = two-argument matrix over a 1D grid
//! 8..16   u64 n0       16..24  u64 n1 (0 for 1D)
//! 24..32  f64 dx0      32..40  f64 dx1
//! 40..48  f64 x_min0   48..56  f64 x_min1
//! 56..64  f64 time stamp
//! ```
//!
//! The CSV form carries the same header as a `#` comment line followed by
//! `index,x[,y],re,im` rows. Floats are written in shortest round-trip form,
//! so both encodings reproduce every bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{QfdError, Result};
use crate::field::{ComplexField, RealField};
use crate::grid::{Boundary, Grid, Grid1D, Grid2D};

pub const MAGIC: &[u8; 4] = b"QFDF";
pub const HEADER_LEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueKind {
    Real,
    Complex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Field,
    Matrix,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Header {
    pub kind: ValueKind,
    pub layout: Layout,
    pub grid: Grid,
    pub time: f64,
}

impl Header {
    fn value_count(&self) -> usize {
        match self.layout {
            Layout::Field => self.grid.len(),
            Layout::Matrix => self.grid.len() * self.grid.len(),
        }
    }
}

/// Anything a QFDF file can hold.
#[derive(Clone, Debug, PartialEq)]
pub enum Stored {
    Real(RealField),
    Complex(ComplexField),
    /// Dense complex matrix over a 1D grid, row-major `(x, x')`.
    Matrix { grid: Grid1D, values: Vec<Complex64> },
}

impl Stored {
    pub fn into_complex(self) -> Result<ComplexField> {
        match self {
            Stored::Complex(f) => Ok(f),
            other => Err(QfdError::Format {
                path: Default::default(),
                reason: format!("expected complex field, found {:?}", other.kind_name()),
            }),
        }
    }

    pub fn into_real(self) -> Result<RealField> {
        match self {
            Stored::Real(f) => Ok(f),
            other => Err(QfdError::Format {
                path: Default::default(),
                reason: format!("expected real field, found {:?}", other.kind_name()),
            }),
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            Stored::Real(_) => "real",
            Stored::Complex(_) => "complex",
            Stored::Matrix { .. } => "matrix",
        }
    }
}

fn boundary_bits(grid: &Grid) -> u8 {
    let b = |g: &Grid1D| u8::from(g.boundary() == Boundary::Periodic);
    match grid {
        Grid::One(g) => b(g),
        Grid::Two(g) => b(&g.gx) | (b(&g.gy) << 1),
    }
}

fn encode_header(h: &Header) -> [u8; HEADER_LEN] {
    let mut buf = [0u8; HEADER_LEN];
    buf[0..4].copy_from_slice(MAGIC);
    buf[4] = match h.kind {
        ValueKind::Real => 0,
        ValueKind::Complex => 1,
    };
    buf[5] = h.grid.dims() as u8;
    buf[6] = boundary_bits(&h.grid);
    buf[7] = match h.layout {
        Layout::Field => 0,
        Layout::Matrix => 1,
    };
    let (a0, a1) = match h.grid {
        Grid::One(g) => (g, None),
        Grid::Two(g) => (g.gx, Some(g.gy)),
    };
    buf[8..16].copy_from_slice(&(a0.n_points() as u64).to_le_bytes());
    buf[16..24].copy_from_slice(&(a1.map_or(0, |g| g.n_points()) as u64).to_le_bytes());
    buf[24..32].copy_from_slice(&a0.dx().to_le_bytes());
    buf[32..40].copy_from_slice(&a1.map_or(0.0, |g| g.dx()).to_le_bytes());
    buf[40..48].copy_from_slice(&a0.x_min().to_le_bytes());
    buf[48..56].copy_from_slice(&a1.map_or(0.0, |g| g.x_min()).to_le_bytes());
    buf[56..64].copy_from_slice(&h.time.to_le_bytes());
    buf
}

fn format_err(reason: impl Into<String>) -> QfdError {
    QfdError::Format {
        path: Default::default(),
        reason: reason.into(),
    }
}

fn boundary_of(bit: bool) -> Boundary {
    if bit {
        Boundary::Periodic
    } else {
        Boundary::Dirichlet
    }
}

fn build_grid(dims: u8, bits: u8, n: [u64; 2], dx: [f64; 2], x_min: [f64; 2]) -> Result<Grid> {
    let ax0 = Grid1D::new(n[0] as usize, x_min[0], dx[0], boundary_of(bits & 1 != 0))?;
    match dims {
        1 => Ok(Grid::One(ax0)),
        2 => {
            let ax1 = Grid1D::new(n[1] as usize, x_min[1], dx[1], boundary_of(bits & 2 != 0))?;
            Ok(Grid::Two(Grid2D::new(ax0, ax1)))
        }
        d => Err(format_err(format!("unsupported dimensionality {d}"))),
    }
}

fn decode_header(buf: &[u8; HEADER_LEN]) -> Result<Header> {
    if &buf[0..4] != MAGIC {
        return Err(format_err("bad magic"));
    }
    let kind = match buf[4] {
        0 => ValueKind::Real,
        1 => ValueKind::Complex,
        k => return Err(format_err(format!("unknown value kind {k}"))),
    };
    let layout = match buf[7] {
        0 => Layout::Field,
        1 => Layout::Matrix,
        l => return Err(format_err(format!("unknown layout {l}"))),
    };
    let u = |r: std::ops::Range<usize>| u64::from_le_bytes(buf[r].try_into().unwrap());
    let f = |r: std::ops::Range<usize>| f64::from_le_bytes(buf[r].try_into().unwrap());
    let grid = build_grid(
        buf[5],
        buf[6],
        [u(8..16), u(16..24)],
        [f(24..32), f(32..40)],
        [f(40..48), f(48..56)],
    )?;
    if layout == Layout::Matrix && (grid.dims() != 1 || kind != ValueKind::Complex) {
        return Err(format_err("matrix layout requires a complex 1D grid"));
    }
    Ok(Header {
        kind,
        layout,
        grid,
        time: f(56..64),
    })
}

fn write_payload(mut w: impl Write, header: &Header, data: impl Iterator<Item = f64>) -> Result<()> {
    w.write_all(&encode_header(header))?;
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_real(w: impl Write, f: &RealField, time: f64) -> Result<()> {
    let h = Header {
        kind: ValueKind::Real,
        layout: Layout::Field,
        grid: *f.grid(),
        time,
    };
    write_payload(w, &h, f.values().iter().copied())
}

pub fn write_complex(w: impl Write, f: &ComplexField, time: f64) -> Result<()> {
    let h = Header {
        kind: ValueKind::Complex,
        layout: Layout::Field,
        grid: *f.grid(),
        time,
    };
    write_payload(w, &h, f.values().iter().flat_map(|z| [z.re, z.im]))
}

/// Two-argument variant used for reduced density matrices.
pub fn write_matrix(w: impl Write, grid: Grid1D, values: &[Complex64], time: f64) -> Result<()> {
    if values.len() != grid.n_points() * grid.n_points() {
        return Err(QfdError::GridMismatch("matrix size does not match grid".into()));
    }
    let h = Header {
        kind: ValueKind::Complex,
        layout: Layout::Matrix,
        grid: Grid::One(grid),
        time,
    };
    write_payload(w, &h, values.iter().flat_map(|z| [z.re, z.im]))
}

pub fn read(mut r: impl Read) -> Result<(Header, Stored)> {
    let mut hb = [0u8; HEADER_LEN];
    r.read_exact(&mut hb)?;
    let header = decode_header(&hb)?;
    let count = header.value_count();
    let per = if header.kind == ValueKind::Complex { 2 } else { 1 };
    let mut raw = vec![0u8; count * per * 8];
    r.read_exact(&mut raw)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(format_err("trailing bytes after payload"));
    }
    let nums: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let complex = || -> Vec<Complex64> { nums.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect() };
    let stored = match (header.layout, header.kind) {
        (Layout::Field, ValueKind::Real) => Stored::Real(RealField::new(header.grid, nums.clone())?),
        (Layout::Field, ValueKind::Complex) => Stored::Complex(ComplexField::new(header.grid, complex())?),
        (Layout::Matrix, _) => Stored::Matrix {
            grid: header.grid.as_1d()?,
            values: complex(),
        },
    };
    Ok((header, stored))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        QfdError::Format { reason, .. } => QfdError::Format {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}

pub fn read_file(path: impl AsRef<Path>) -> Result<(Header, Stored)> {
    let path = path.as_ref();
    let file = File::open(path)?;
    with_path(path, read(BufReader::new(file)))
}

pub fn write_complex_file(path: impl AsRef<Path>, f: &ComplexField, time: f64) -> Result<()> {
    write_complex(BufWriter::new(File::create(path)?), f, time)
}

pub fn write_real_file(path: impl AsRef<Path>, f: &RealField, time: f64) -> Result<()> {
    write_real(BufWriter::new(File::create(path)?), f, time)
}

// ---------------------------------------------------------------------------
// CSV

fn boundary_name(b: Boundary) -> &'static str {
    match b {
        Boundary::Periodic => "periodic",
        Boundary::Dirichlet => "dirichlet",
    }
}

fn csv_meta(kind: ValueKind, grid: &Grid, time: f64) -> String {
    let (a0, a1) = match grid {
        Grid::One(g) => (*g, None),
        Grid::Two(g) => (g.gx, Some(g.gy)),
    };
    format!(
        "# qfdf kind={} dims={} n0={} n1={} dx0={:e} dx1={:e} x_min0={:e} x_min1={:e} boundary0={} boundary1={} time={:e}",
        if kind == ValueKind::Complex { "complex" } else { "real" },
        grid.dims(),
        a0.n_points(),
        a1.map_or(0, |g| g.n_points()),
        a0.dx(),
        a1.map_or(0.0, |g| g.dx()),
        a0.x_min(),
        a1.map_or(0.0, |g| g.x_min()),
        boundary_name(a0.boundary()),
        a1.map_or("periodic", |g| boundary_name(g.boundary())),
        time,
    )
}

fn write_csv_rows(mut w: impl Write, kind: ValueKind, grid: &Grid, time: f64, values: impl Iterator<Item = (f64, f64)>) -> Result<()> {
    writeln!(w, "{}", csv_meta(kind, grid, time))?;
    match grid {
        Grid::One(g) => {
            writeln!(w, "index,x,re,im")?;
            for (i, (re, im)) in values.enumerate() {
                writeln!(w, "{i},{:e},{re:e},{im:e}", g.x(i))?;
            }
        }
        Grid::Two(g) => {
            writeln!(w, "index,x,y,re,im")?;
            let ny = g.gy.n_points();
            for (k, (re, im)) in values.enumerate() {
                writeln!(w, "{k},{:e},{:e},{re:e},{im:e}", g.gx.x(k / ny), g.gy.x(k % ny))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_real(w: impl Write, f: &RealField, time: f64) -> Result<()> {
    write_csv_rows(w, ValueKind::Real, f.grid(), time, f.values().iter().map(|&v| (v, 0.0)))
}

pub fn write_csv_complex(w: impl Write, f: &ComplexField, time: f64) -> Result<()> {
    write_csv_rows(w, ValueKind::Complex, f.grid(), time, f.values().iter().map(|z| (z.re, z.im)))
}

pub fn read_csv(r: impl Read) -> Result<(Header, Stored)> {
    let mut lines = BufReader::new(r).lines();
    let meta = lines.next().ok_or_else(|| format_err("empty csv"))??;
    let meta = meta
        .strip_prefix("# qfdf ")
        .ok_or_else(|| format_err("missing qfdf meta line"))?;
    let mut get = std::collections::HashMap::new();
    for kv in meta.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| format_err(format!("bad meta entry {kv}")))?;
        get.insert(k, v);
    }
    let field = |k: &str| get.get(k).copied().ok_or_else(|| format_err(format!("missing meta key {k}")));
    let num = |k: &str| -> Result<f64> { field(k)?.parse().map_err(|_| format_err(format!("bad number for {k}"))) };
    let int = |k: &str| -> Result<u64> { field(k)?.parse().map_err(|_| format_err(format!("bad integer for {k}"))) };
    let periodic = |k: &str| -> Result<bool> {
        match field(k)? {
            "periodic" => Ok(true),
            "dirichlet" => Ok(false),
            other => Err(format_err(format!("bad boundary {other}"))),
        }
    };
    let kind = match field("kind")? {
        "real" => ValueKind::Real,
        "complex" => ValueKind::Complex,
        other => return Err(format_err(format!("bad kind {other}"))),
    };
    let dims: u8 = int("dims")? as u8;
    let bits = u8::from(periodic("boundary0")?) | (u8::from(periodic("boundary1")?) << 1);
    let grid = build_grid(
        dims,
        bits,
        [int("n0")?, int("n1")?],
        [num("dx0")?, num("dx1")?],
        [num("x_min0")?, num("x_min1")?],
    )?;
    let time = num("time")?;
    lines.next().ok_or_else(|| format_err("missing column header"))??;
    let mut re = Vec::with_capacity(grid.len());
    let mut im = Vec::with_capacity(grid.len());
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 + grid.dims() {
            return Err(format_err(format!("bad row: {line}")));
        }
        let p = |s: &str| s.parse::<f64>().map_err(|_| format_err(format!("bad number {s}")));
        re.push(p(cols[cols.len() - 2])?);
        im.push(p(cols[cols.len() - 1])?);
    }
    let header = Header {
        kind,
        layout: Layout::Field,
        grid,
        time,
    };
    let stored = match kind {
        ValueKind::Real => Stored::Real(RealField::new(grid, re)?),
        ValueKind::Complex => Stored::Complex(ComplexField::new(
            grid,
            re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect(),
        )?),
    };
    Ok((header, stored))
}
