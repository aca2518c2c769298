//! PGM images and CSV dumps of piecewise constant fields.
//!
//! Pixel `(x, row)` of a `width x height` image is the cell
//! `(x, height - 1 - row)`, so the first image row is the top of the domain.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{LabelSet, P0Field};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    /// `P2`, ASCII samples.
    Ascii,
    /// `P5`, binary samples (big-endian words when `maxval > 255`).
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major from the top row.
    pub pixels: Vec<u16>,
}

impl Pgm {
    /// Gray levels in `[0, 1]` on `mesh`, which must be `width x height`.
    pub fn to_field(&self, mesh: &Mesh) -> Result<P0Field> {
        self.check_mesh(mesh)?;
        let m = self.maxval as f64;
        let vals = (0..mesh.n_cells())
            .map(|c| {
                let [i, j] = mesh.cell_coords(c);
                self.pixels[(self.height - 1 - j) * self.width + i] as f64 / m
            })
            .collect();
        P0Field::new(mesh.clone(), vals)
    }

    /// Quantizes `f` linearly from `[lo, hi]` onto `0..=maxval`, clamping.
    pub fn from_field(f: &P0Field, lo: f64, hi: f64, maxval: u16) -> Self {
        let mesh = f.mesh();
        let (width, height) = (mesh.nx(), mesh.ny());
        let mut pixels = vec![0u16; width * height];
        let span = if hi > lo { hi - lo } else { 1.0 };
        for (c, &v) in f.values().iter().enumerate() {
            let [i, j] = mesh.cell_coords(c);
            let g = ((v - lo) / span * maxval as f64).round().clamp(0.0, maxval as f64);
            pixels[(height - 1 - j) * width + i] = g as u16;
        }
        Self { width, height, maxval, pixels }
    }

    fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if mesh.dim() != 2 || mesh.nx() != self.width || mesh.ny() != self.height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} image on a mesh with {:?} cells per axis",
                self.width,
                self.height,
                mesh.cells_per_axis()
            )));
        }
        Ok(())
    }
}

fn header_tokens<R: BufRead>(r: &mut R, n: usize) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    let mut comment = false;
    while out.len() < n {
        if r.read(&mut byte)? == 0 {
            return Err(Error::Parse("truncated PGM header".into()));
        }
        let ch = byte[0] as char;
        if comment {
            comment = ch != '\n';
            continue;
        }
        if ch == '#' && tok.is_empty() {
            comment = true;
        } else if ch.is_ascii_whitespace() {
            if !tok.is_empty() {
                out.push(std::mem::take(&mut tok));
            }
        } else {
            tok.push(ch);
        }
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("bad PGM {what}: {s:?}")))
}

pub fn read_pgm<R: Read>(reader: R) -> Result<Pgm> {
    let mut r = BufReader::new(reader);
    let head = header_tokens(&mut r, 4)?;
    let binary = match head[0].as_str() {
        "P5" => true,
        "P2" => false,
        m => return Err(Error::Parse(format!("unsupported PGM magic {m:?}"))),
    };
    let width: usize = parse_num(&head[1], "width")?;
    let height: usize = parse_num(&head[2], "height")?;
    let maxval: u16 = parse_num(&head[3], "maxval")?;
    if width == 0 || height == 0 || maxval == 0 {
        return Err(Error::Parse("empty PGM".into()));
    }
    let n = width * height;
    let pixels: Vec<u16> = if binary {
        let wide = maxval > 255;
        let mut buf = vec![0u8; if wide { 2 * n } else { n }];
        r.read_exact(&mut buf).map_err(|_| Error::Parse("truncated PGM raster".into()))?;
        if wide {
            buf.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect()
        } else {
            buf.into_iter().map(u16::from).collect()
        }
    } else {
        let mut rest = String::new();
        r.read_to_string(&mut rest)?;
        let px = rest
            .split_whitespace()
            .take(n)
            .map(|t| parse_num::<u16>(t, "sample"))
            .collect::<Result<Vec<_>>>()?;
        if px.len() != n {
            return Err(Error::Parse(format!("expected {n} samples, found {}", px.len())));
        }
        px
    };
    if let Some(&bad) = pixels.iter().find(|&&p| p > maxval) {
        return Err(Error::Parse(format!("sample {bad} exceeds maxval {maxval}")));
    }
    Ok(Pgm { width, height, maxval, pixels })
}

pub fn write_pgm<W: Write>(img: &Pgm, format: PgmFormat, mut out: W) -> Result<()> {
    match format {
        PgmFormat::Binary => {
            write!(out, "P5\n{} {}\n{}\n", img.width, img.height, img.maxval)?;
            let bytes: Vec<u8> = if img.maxval > 255 {
                img.pixels.iter().flat_map(|p| p.to_be_bytes()).collect()
            } else {
                img.pixels.iter().map(|&p| p as u8).collect()
            };
            out.write_all(&bytes)?;
        }
        PgmFormat::Ascii => {
            writeln!(out, "P2\n{} {}\n{}", img.width, img.height, img.maxval)?;
            for row in img.pixels.chunks(img.width) {
                let line: Vec<String> = row.iter().map(u16::to_string).collect();
                writeln!(out, "{}", line.join(" "))?;
            }
        }
    }
    Ok(())
}

/// Gray level of each label, stored next to a label image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct LabelSidecar {
    maxval: u16,
    labels: Vec<i64>,
    gray: Vec<u16>,
}

fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("labels.json")
}

/// Writes a label-valued field as a PGM with evenly spaced gray levels and a
/// `<name>.labels.json` sidecar with the gray-to-label table.
pub fn write_label_pgm(w: &P0Field, path: &Path, format: PgmFormat) -> Result<()> {
    let labels = w.labels().ok_or_else(|| Error::InvalidInput("label image needs a label-valued field".into()))?;
    let (lo, hi) = (labels.min() as f64, labels.max() as f64);
    let img = Pgm::from_field(w, lo, hi, 255);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let sidecar = LabelSidecar {
        maxval: 255,
        labels: labels.values().to_vec(),
        gray: labels.values().iter().map(|&l| ((l as f64 - lo) / span * 255.0).round() as u16).collect(),
    };
    write_pgm(&img, format, fs::File::create(path)?)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

/// Inverse of [`write_label_pgm`]; every gray level must appear in the sidecar.
pub fn read_label_pgm(path: &Path, mesh: &Mesh) -> Result<P0Field> {
    let img = read_pgm(fs::File::open(path)?)?;
    img.check_mesh(mesh)?;
    let sidecar: LabelSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    if sidecar.labels.len() != sidecar.gray.len() {
        return Err(Error::Parse("label sidecar lists differ in length".into()));
    }
    let mut vals = vec![0i64; mesh.n_cells()];
    for (c, v) in vals.iter_mut().enumerate() {
        let [i, j] = mesh.cell_coords(c);
        let g = img.pixels[(img.height - 1 - j) * img.width + i];
        let k = sidecar
            .gray
            .iter()
            .position(|&x| x == g)
            .ok_or_else(|| Error::Parse(format!("gray level {g} has no label")))?;
        *v = sidecar.labels[k];
    }
    P0Field::from_labels(mesh.clone(), &vals, LabelSet::new(sidecar.labels)?)
}

/// `cell,value` rows in cell index order.
pub fn write_p0_csv<W: Write>(f: &P0Field, mut out: W) -> Result<()> {
    writeln!(out, "cell,value")?;
    for (c, v) in f.values().iter().enumerate() {
        writeln!(out, "{c},{v:?}")?;
    }
    Ok(())
}

pub fn read_p0_csv<R: Read>(reader: R, mesh: &Mesh) -> Result<P0Field> {
    let mut vals = vec![f64::NAN; mesh.n_cells()];
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if k == 0 || line.trim().is_empty() {
            continue;
        }
        let (c, v) = line.split_once(',').ok_or_else(|| Error::Parse(format!("line {}: {line:?}", k + 1)))?;
        let c: usize = parse_num(c.trim(), "cell index")?;
        let v: f64 = parse_num(v.trim(), "value")?;
        *vals.get_mut(c).ok_or(Error::OutOfRange { index: c, len: mesh.n_cells() })? = v;
    }
    if vals.iter().any(|v| v.is_nan()) {
        return Err(Error::Parse("CSV does not cover every cell".into()));
    }
    P0Field::new(mesh.clone(), vals)
}
