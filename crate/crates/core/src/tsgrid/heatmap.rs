//! Light-yellow-to-red heatmaps written as binary PPM.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::matrix::{AveragedTimeSpaceMatrix, DensityMatrix, COLS, DENSITY_SCALE_VPM, ROWS};

pub const LOW_COLOR: [u8; 3] = [255, 255, 224];
pub const HIGH_COLOR: [u8; 3] = [255, 0, 0];

/// Colour of `value` on a linear scale from 0 (light yellow) to `max` (red).
pub fn colormap(value: f64, max: f64) -> [u8; 3] {
    let f = if max > 0.0 { (value / max).clamp(0.0, 1.0) } else { 0.0 };
    let mut rgb = [0u8; 3];
    for k in 0..3 {
        let lo = LOW_COLOR[k] as f64;
        let hi = HIGH_COLOR[k] as f64;
        rgb[k] = (lo + (hi - lo) * f).round() as u8;
    }
    rgb
}

/// RGB pixels, one per cell. Space grows upward (last grid row at the top);
/// time grows to the right.
pub fn heatmap_rgb(cells: &[f64], rows: usize, cols: usize, max: f64) -> Result<Vec<u8>> {
    if cells.len() != rows * cols {
        return Err(Error::Shape(format!("{} cells for a {rows}x{cols} image", cells.len())));
    }
    if let Some(v) = cells.iter().find(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("cannot render non-finite value {v}")));
    }
    let mut out = Vec::with_capacity(rows * cols * 3);
    for y in 0..rows {
        let r = rows - 1 - y;
        for &v in &cells[r * cols..(r + 1) * cols] {
            out.extend_from_slice(&colormap(v, max));
        }
    }
    Ok(out)
}

pub fn ppm_bytes(cells: &[f64], rows: usize, cols: usize, max: f64) -> Result<Vec<u8>> {
    let pixels = heatmap_rgb(cells, rows, cols, max)?;
    let mut out = format!("P6\n{cols} {rows}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    Ok(out)
}

pub fn render_heatmap(cells: &[f64], rows: usize, cols: usize, max: f64, path: &Path) -> Result<()> {
    fs::write(path, ppm_bytes(cells, rows, cols, max)?)?;
    Ok(())
}

/// Grids that can be drawn with their natural colour scale.
pub trait Heatmap {
    fn cells(&self) -> &[f64];
    fn scale_max(&self) -> f64;

    fn render(&self, path: &Path) -> Result<()> {
        render_heatmap(self.cells(), ROWS, COLS, self.scale_max(), path)
    }
}

impl Heatmap for AveragedTimeSpaceMatrix {
    fn cells(&self) -> &[f64] {
        &self.cells
    }

    fn scale_max(&self) -> f64 {
        1.0
    }
}

impl Heatmap for DensityMatrix {
    fn cells(&self) -> &[f64] {
        &self.cells
    }

    fn scale_max(&self) -> f64 {
        DENSITY_SCALE_VPM
    }
}

/// Reads back a P6 image as `(width, height, pixels)`.
pub fn parse_ppm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut fields = Vec::new();
    let mut at = 0;
    while fields.len() < 4 {
        while at < bytes.len() && bytes[at].is_ascii_whitespace() {
            at += 1;
        }
        let start = at;
        while at < bytes.len() && !bytes[at].is_ascii_whitespace() {
            at += 1;
        }
        if start == at {
            return Err(Error::Format("truncated PPM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..at]).into_owned());
    }
    if fields[0] != "P6" || fields[3] != "255" {
        return Err(Error::Format("not an 8-bit P6 image".into()));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|e| Error::Format(format!("bad PPM size: {e}")));
    let (w, h) = (num(&fields[1])?, num(&fields[2])?);
    let pixels = bytes[at + 1..].to_vec();
    if pixels.len() != w * h * 3 {
        return Err(Error::Format("PPM pixel payload has the wrong size".into()));
    }
    Ok((w, h, pixels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tsgrid::GridOrigin;

    fn origin() -> GridOrigin {
        GridOrigin {
            lane: 0,
            segment_origin: 0.0,
            window_start: 0.0,
        }
    }

    #[test]
    fn zero_and_max_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ppm");
        let zero = AveragedTimeSpaceMatrix {
            origin: origin(),
            cells: vec![0.0; ROWS * COLS],
        };
        zero.render(&path).unwrap();
        let (w, h, px) = parse_ppm(&fs::read(&path).unwrap()).unwrap();
        assert_eq!((w, h), (200, 200));
        assert!(px.chunks(3).all(|p| p == LOW_COLOR));

        let full = DensityMatrix {
            origin: origin(),
            cells: vec![DENSITY_SCALE_VPM; ROWS * COLS],
        };
        full.render(&path).unwrap();
        let (_, _, px) = parse_ppm(&fs::read(&path).unwrap()).unwrap();
        assert!(px.chunks(3).all(|p| p == HIGH_COLOR));
    }

    #[test]
    fn space_axis_points_up() {
        let mut cells = vec![0.0; 3 * 2];
        cells[0] = 1.0; // row 0 (lowest space bin), column 0
        let px = heatmap_rgb(&cells, 3, 2, 1.0).unwrap();
        // bottom-left pixel is red
        assert_eq!(&px[(2 * 2) * 3..(2 * 2) * 3 + 3], &HIGH_COLOR);
        assert_eq!(&px[0..3], &LOW_COLOR);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let cells = vec![0.0; 4];
        let err = render_heatmap(&cells, 2, 2, 1.0, Path::new("/nonexistent-dir/x.ppm")).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }
}
