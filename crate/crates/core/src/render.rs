//! Escape-time rasters of filled Julia sets with smooth potential shading and ray overlays.

use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DynError, Result};
use crate::polyseq::{SeqCache, SequenceSpec};
use crate::rays::{RayStatus, RayTrace};

pub const DEFAULT_HORIZON: u64 = 512;
/// Radius at which escaped orbits stop for the smooth potential.
const SMOOTH_BAILOUT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub center: Complex64,
    /// Width of the covered region in the plane.
    pub width: f64,
    pub pixels: (usize, usize),
}

impl Viewport {
    pub fn new(center: Complex64, width: f64, pixels: (usize, usize)) -> Result<Self> {
        let v = Viewport { center, width, pixels };
        v.validate()?;
        Ok(v)
    }

    /// Square viewport `[-half, half]^2` around `center`.
    pub fn square(center: Complex64, half: f64, px: usize) -> Result<Self> {
        Self::new(center, 2.0 * half, (px, px))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(DynError::InvalidInput(format!("viewport width must be positive, got {}", self.width)));
        }
        if self.pixels.0 == 0 || self.pixels.1 == 0 {
            return Err(DynError::InvalidInput("viewport needs at least one pixel per axis".into()));
        }
        Ok(())
    }

    pub fn pixel_size(&self) -> f64 {
        self.width / self.pixels.0 as f64
    }

    pub fn height(&self) -> f64 {
        self.pixel_size() * self.pixels.1 as f64
    }

    /// Center of pixel `(col, row)`; row 0 is the top.
    pub fn point(&self, col: usize, row: usize) -> Complex64 {
        let s = self.pixel_size();
        Complex64::new(
            self.center.re - 0.5 * self.width + (col as f64 + 0.5) * s,
            self.center.im + 0.5 * self.height() - (row as f64 + 0.5) * s,
        )
    }

    /// Fractional pixel coordinates of `z`.
    pub fn to_pixel(&self, z: Complex64) -> (f64, f64) {
        let s = self.pixel_size();
        ((z.re - (self.center.re - 0.5 * self.width)) / s, ((self.center.im + 0.5 * self.height()) - z.im) / s)
    }

    pub fn pixel_of(&self, z: Complex64) -> Option<(usize, usize)> {
        let (x, y) = self.to_pixel(z);
        if x >= 0.0 && y >= 0.0 && (x as usize) < self.pixels.0 && (y as usize) < self.pixels.1 {
            Some((x as usize, y as usize))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    /// Escape step and smooth potential estimate.
    Escaped(u64, f64),
    /// Not escaped by the horizon.
    Bounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum Mark {
    None = 0,
    Ray = 1,
    Landing = 2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterMeta {
    pub spec_digest: String,
    pub m: u64,
    pub horizon: u64,
    pub escape_radius: f64,
    pub viewport: Viewport,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub cells: Vec<Cell>,
    pub overlay: Vec<Mark>,
    pub meta: RasterMeta,
}

/// Escape-time raster of `K_m`.
pub fn render_escape(spec: &SequenceSpec, m: u64, viewport: &Viewport, horizon: u64, r0: f64) -> Result<Raster> {
    viewport.validate()?;
    let mut base = SeqCache::new(spec);
    base.ensure(m + horizon + 64)?;
    let (w, h) = viewport.pixels;
    let rows: Vec<Vec<Cell>> = (0..h)
        .into_par_iter()
        .map(|row| (0..w).map(|col| classify(&base, m, viewport.point(col, row), horizon, r0)).collect())
        .collect();
    Ok(Raster {
        cells: rows.into_iter().flatten().collect(),
        overlay: vec![Mark::None; w * h],
        meta: RasterMeta {
            spec_digest: spec.digest(),
            m,
            horizon,
            escape_radius: r0,
            viewport: *viewport,
            notes: Vec::new(),
        },
    })
}

fn classify(cache: &SeqCache, m: u64, z: Complex64, horizon: u64, r0: f64) -> Cell {
    let r2 = r0 * r0;
    let mut w = z;
    let mut log_d = 0.0;
    let mut k = 0;
    while w.norm_sqr() <= r2 {
        if k == horizon {
            return Cell::Bounded;
        }
        k += 1;
        let p = cache.get(m + k);
        log_d += (p.degree() as f64).ln();
        w = p.eval(w);
        if !w.is_finite() {
            return Cell::Escaped(k, f64::NAN);
        }
    }
    let escaped_at = k;
    let mut extra = 0;
    while w.norm() < SMOOTH_BAILOUT && extra < 64 {
        extra += 1;
        let p = cache.get(m + k + 1);
        let next = p.eval(w);
        if !next.is_finite() {
            break;
        }
        k += 1;
        log_d += (p.degree() as f64).ln();
        w = next;
    }
    Cell::Escaped(escaped_at, w.norm().ln() * (-log_d).exp())
}

impl Raster {
    pub fn width(&self) -> usize {
        self.meta.viewport.pixels.0
    }

    pub fn height(&self) -> usize {
        self.meta.viewport.pixels.1
    }

    pub fn cell(&self, col: usize, row: usize) -> Cell {
        self.cells[row * self.width() + col]
    }

    pub fn bounded_count(&self) -> usize {
        self.cells.iter().filter(|c| matches!(c, Cell::Bounded)).count()
    }

    /// Area of the Bounded region.
    pub fn bounded_area(&self) -> f64 {
        let s = self.meta.viewport.pixel_size();
        self.bounded_count() as f64 * s * s
    }

    /// Pixels with a 4-neighbour of the other class.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let (w, h) = (self.width(), self.height());
        let bounded: Vec<bool> = self.cells.iter().map(|c| matches!(c, Cell::Bounded)).collect();
        let mut out = vec![false; w * h];
        for row in 0..h {
            for col in 0..w {
                let b = bounded[row * w + col];
                let differs = |c: usize, r: usize| bounded[r * w + c] != b;
                out[row * w + col] = (col > 0 && differs(col - 1, row))
                    || (col + 1 < w && differs(col + 1, row))
                    || (row > 0 && differs(col, row - 1))
                    || (row + 1 < h && differs(col, row + 1));
            }
        }
        out
    }

    /// Fraction of `points` within `radius` pixels (Chebyshev) of a boundary pixel.
    pub fn boundary_agreement(&self, points: &[Complex64], radius: usize) -> f64 {
        if points.is_empty() {
            return 1.0;
        }
        let mask = self.boundary_mask();
        let (w, h) = (self.width() as i64, self.height() as i64);
        let r = radius as i64;
        let hits = points
            .iter()
            .filter(|p| {
                let (x, y) = self.meta.viewport.to_pixel(**p);
                let (cx, cy) = (x.floor() as i64, y.floor() as i64);
                (cy - r..=cy + r).any(|yy| {
                    (cx - r..=cx + r).any(|xx| xx >= 0 && yy >= 0 && xx < w && yy < h && mask[(yy * w + xx) as usize])
                })
            })
            .count();
        hits as f64 / points.len() as f64
    }

    /// RGB bytes, row-major.
    pub fn rgb(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.cells.len() * 3);
        for (cell, mark) in self.cells.iter().zip(&self.overlay) {
            let px = match mark {
                Mark::Landing => [255, 40, 40],
                Mark::Ray => [40, 220, 255],
                Mark::None => shade(*cell),
            };
            out.extend_from_slice(&px);
        }
        out
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width(), self.height()).into_bytes();
        out.extend(self.rgb());
        out
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width() as u32, self.height() as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc.write_header().map_err(io_err)?;
            writer.write_image_data(&self.rgb()).map_err(io_err)?;
        }
        Ok(out)
    }

    /// Writes `<stem>.ppm`, `<stem>.png` and `<stem>.json` into `dir`.
    pub fn write_all(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(io_err)?;
        let ppm = dir.join(format!("{stem}.ppm"));
        let png = dir.join(format!("{stem}.png"));
        let meta = dir.join(format!("{stem}.json"));
        write_file(&ppm, &self.to_ppm())?;
        write_file(&png, &self.to_png()?)?;
        let text = serde_json::to_string_pretty(&self.meta).map_err(io_err)?;
        write_file(&meta, text.as_bytes())?;
        Ok(vec![ppm, png, meta])
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    f.write_all(bytes).map_err(io_err)
}

fn io_err(e: impl std::fmt::Display) -> DynError {
    DynError::InvalidInput(format!("i/o: {e}"))
}

fn shade(cell: Cell) -> [u8; 3] {
    match cell {
        Cell::Bounded => [0, 0, 0],
        Cell::Escaped(_, g) => {
            if !(g > 0.0) || !g.is_finite() {
                return [255, 255, 255];
            }
            // bands in log potential; brightness falls toward the set
            let s = -g.log2();
            let band = 0.5 + 0.5 * (s * 0.9).cos();
            let depth = (1.0 - (-0.12 * s.max(0.0)).exp()).clamp(0.0, 1.0);
            let v = 1.0 - 0.85 * depth;
            [(255.0 * v * (0.55 + 0.45 * band)) as u8, (255.0 * v * (0.45 + 0.35 * band)) as u8, (255.0 * v) as u8]
        }
    }
}

/// Draws the ray polylines and landing markers into the overlay.
pub fn overlay_rays(mut raster: Raster, traces: &[RayTrace]) -> Result<Raster> {
    for t in traces {
        if t.m != raster.meta.m {
            return Err(DynError::TimeMismatch { trace: t.m, raster: raster.meta.m });
        }
    }
    for t in traces {
        let vp = raster.meta.viewport;
        let mut drawn = false;
        let pts: Vec<Complex64> = t.points.iter().map(|p| p.z).collect();
        for pair in pts.windows(2) {
            drawn |= draw_segment(&mut raster, vp.to_pixel(pair[0]), vp.to_pixel(pair[1]));
        }
        if t.status == RayStatus::Landed {
            if let Some(p) = t.landing {
                drawn |= draw_marker(&mut raster, vp.to_pixel(p));
            }
        }
        if !drawn {
            raster.meta.notes.push(format!("ray {} lies outside the viewport", t.theta));
        }
    }
    Ok(raster)
}

fn put(r: &mut Raster, x: i64, y: i64, mark: Mark) -> bool {
    let (w, h) = (r.width() as i64, r.height() as i64);
    if x < 0 || y < 0 || x >= w || y >= h {
        return false;
    }
    let i = (y * w + x) as usize;
    if r.overlay[i] != Mark::Landing {
        r.overlay[i] = mark;
    }
    true
}

fn draw_segment(r: &mut Raster, a: (f64, f64), b: (f64, f64)) -> bool {
    let lim = 4.0 * (r.width() + r.height()) as f64;
    let outside = |p: (f64, f64)| p.0 < -lim || p.1 < -lim || p.0 > lim || p.1 > lim;
    if outside(a) && outside(b) {
        return false;
    }
    let n = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).clamp(1, 1 << 16);
    let mut any = false;
    for k in 0..=n {
        let s = k as f64 / n as f64;
        let x = a.0 + (b.0 - a.0) * s;
        let y = a.1 + (b.1 - a.1) * s;
        any |= put(r, x.floor() as i64, y.floor() as i64, Mark::Ray);
    }
    any
}

fn draw_marker(r: &mut Raster, c: (f64, f64)) -> bool {
    let (cx, cy) = (c.0.floor() as i64, c.1.floor() as i64);
    let mut any = false;
    for d in -3..=3i64 {
        any |= put(r, cx + d, cy, Mark::Landing);
        any |= put(r, cx, cy + d, Mark::Landing);
    }
    any
}
