//! File formats: binary PGM (P5), raw little-endian grids with JSON sidecars.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, GridSpec, RealGrid};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u16>,
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn parse_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(path, "truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| format_err(path, "non-ASCII header"))?);
    }
    if fields[0] != "P5" {
        return Err(format_err(path, format!("expected magic P5, found {}", fields[0])));
    }
    let num = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>().map_err(|_| format_err(path, format!("bad {what}: {s}")))
    };
    let width = num(fields[1], "width")?;
    let height = num(fields[2], "height")?;
    let maxval = num(fields[3], "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(format_err(path, format!("maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates header and raster
    pos += 1;
    let bpp = if maxval < 256 { 1 } else { 2 };
    let need = width * height * bpp;
    let raster = bytes.get(pos..pos + need).ok_or_else(|| format_err(path, "raster shorter than header claims"))?;
    let pixels = if bpp == 1 {
        raster.iter().map(|&b| b as u16).collect()
    } else {
        raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    };
    Ok(GrayImage {
        width,
        height,
        maxval: maxval as u16,
        pixels,
    })
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes, path)
}

/// 8-bit PGM of `grid`, linearly mapped from [min, max] to [0, 255].
pub fn write_pgm(path: &Path, grid: &RealGrid) -> Result<()> {
    let (lo, hi) = grid
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = grid.spec.n;
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    out.extend(grid.data.iter().map(|&v| (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize)]
struct Sidecar<'a, M: Serialize> {
    format: &'static str,
    n: usize,
    pitch: f64,
    plane: crate::grid::Plane,
    layout: &'static str,
    meta: &'a M,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

fn write_sidecar<M: Serialize>(path: &Path, spec: &GridSpec, format: &'static str, layout: &'static str, meta: &M) -> Result<()> {
    let side = Sidecar {
        format,
        n: spec.n,
        pitch: spec.pitch,
        plane: spec.plane,
        layout,
        meta,
    };
    let p = sidecar_path(path);
    fs::write(&p, serde_json::to_vec_pretty(&side)?).map_err(|e| Error::io(p, e))
}

/// Row-major little-endian f64 samples plus `<path>.json`.
pub fn write_raw_f64<M: Serialize>(path: &Path, grid: &RealGrid, meta: &M) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let bytes: Vec<u8> = grid.data.iter().flat_map(|v| v.to_le_bytes()).collect();
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    write_sidecar(path, &grid.spec, "f64le", "row-major", meta)
}

pub fn read_raw_f64(path: &Path, spec: GridSpec) -> Result<RealGrid> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != spec.len() * 8 {
        return Err(format_err(path, format!("expected {} bytes, found {}", spec.len() * 8, bytes.len())));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(RealGrid { spec, data })
}

/// Debug dump of a complex grid as two f32 planes (real then imaginary).
pub fn write_complex_f32<M: Serialize>(path: &Path, grid: &ComplexGrid, meta: &M) -> Result<()> {
    let mut bytes = Vec::with_capacity(grid.data.len() * 8);
    bytes.extend(grid.data.iter().flat_map(|z| (z.re as f32).to_le_bytes()));
    bytes.extend(grid.data.iter().flat_map(|z| (z.im as f32).to_le_bytes()));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    write_sidecar(path, &grid.spec, "f32le", "real plane then imaginary plane, row-major", meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Plane;

    #[test]
    fn pgm_roundtrip_and_comments() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GridSpec::new(4, 1.0, Plane::Target).unwrap();
        let g = RealGrid::from_fn(spec, |x, y| x + 4.0 * y);
        let p = dir.path().join("a.pgm");
        write_pgm(&p, &g).unwrap();
        let img = read_pgm(&p).unwrap();
        assert_eq!((img.width, img.height, img.maxval), (4, 4, 255));
        assert_eq!(img.pixels[0], 0);
        assert_eq!(img.pixels[15], 255);

        let raw = b"P5 # comment\n2 1\n# another\n255\n\x00\xff";
        let img = parse_pgm(raw, Path::new("x")).unwrap();
        assert_eq!(img.pixels, vec![0, 255]);
        assert!(parse_pgm(b"P2\n1 1\n255\n0", Path::new("x")).is_err());
        assert!(parse_pgm(b"P5\n4 4\n255\n\x00", Path::new("x")).is_err());
    }

    #[test]
    fn raw_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GridSpec::new(8, 0.5, Plane::Detector).unwrap();
        let g = RealGrid::from_fn(spec, |x, y| x * y - 0.25);
        let p = dir.path().join("img.f64");
        write_raw_f64(&p, &g, &serde_json::json!({"frames": 3})).unwrap();
        assert_eq!(read_raw_f64(&p, spec).unwrap(), g);
        let side: serde_json::Value = serde_json::from_slice(&fs::read(sidecar_path(&p)).unwrap()).unwrap();
        assert_eq!(side["meta"]["frames"], 3);
        assert_eq!(side["n"], 8);
    }
}
