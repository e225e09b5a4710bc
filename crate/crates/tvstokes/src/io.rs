//! Image loading/saving and binary field fixtures.
//!
//! Images are 8- or 16-bit grayscale PNG or PGM, mapped linearly to `[0, 1]`
//! on load; saving clamps to `[0, 1]` and quantizes to 8 bits. The fixture
//! format stores fields losslessly: magic `TVSF`, a channel count byte, the
//! row/column counts as little-endian u32, the mesh width as little-endian
//! f64, then the channel planes as row-major little-endian f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::field::{ScalarField, TensorField2x2, VectorField2};
use crate::grid::GridSpec;

const TVSF_MAGIC: &[u8; 4] = b"TVSF";

/// Loads a grayscale PNG or PGM (or a single-channel `.tvsf` fixture) into
/// intensities in `[0, 1]` with mesh width 1.
pub fn load_image(path: &Path) -> Result<ScalarField> {
    if path.extension().and_then(|e| e.to_str()) == Some("tvsf") {
        let planes = read_tvsf(path)?;
        if planes.len() != 1 {
            return Err(Error::Format(format!(
                "expected single-channel fixture, got {} channels",
                planes.len()
            )));
        }
        return Ok(planes.into_iter().next().unwrap());
    }
    let img = image::open(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::Format("empty image".into()));
    }
    let grid = GridSpec::new(h, w, 1.0)?;
    match img {
        DynamicImage::ImageLuma8(buf) => Ok(ScalarField::from_fn(grid, |i, j| {
            buf.get_pixel(j as u32, i as u32).0[0] as f64 / 255.0
        })),
        DynamicImage::ImageLuma16(buf) => Ok(ScalarField::from_fn(grid, |i, j| {
            buf.get_pixel(j as u32, i as u32).0[0] as f64 / 65535.0
        })),
        other => Err(Error::Format(format!(
            "only 8/16-bit grayscale images are supported, got {:?}",
            other.color()
        ))),
    }
}

/// Saves intensities clamped to `[0, 1]` as an 8-bit grayscale image (PNG or
/// PGM by extension), or losslessly as a `.tvsf` fixture.
pub fn save_image(field: &ScalarField, path: &Path) -> Result<()> {
    if path.extension().and_then(|e| e.to_str()) == Some("tvsf") {
        return write_tvsf(path, &[field]);
    }
    let g = field.grid();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_fn(g.cols as u32, g.rows as u32, |x, y| {
            let v = field.values()[[y as usize, x as usize]].clamp(0.0, 1.0);
            Luma([(v * 255.0).round() as u8])
        });
    buf.save(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Writes channel planes sharing one grid as a `TVSF` fixture.
pub fn write_tvsf(path: &Path, planes: &[&ScalarField]) -> Result<()> {
    if planes.is_empty() || planes.len() > u8::MAX as usize {
        return Err(Error::Format(format!(
            "fixture must have 1..=255 channels, got {}",
            planes.len()
        )));
    }
    let grid = *planes[0].grid();
    for p in planes {
        p.same_shape(planes[0])?;
    }
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    out.write_all(TVSF_MAGIC)?;
    out.write_all(&[planes.len() as u8])?;
    out.write_all(&(grid.rows as u32).to_le_bytes())?;
    out.write_all(&(grid.cols as u32).to_le_bytes())?;
    out.write_all(&grid.h.to_le_bytes())?;
    for p in planes {
        for v in p.values().iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a `TVSF` fixture back into its channel planes.
pub fn read_tvsf(path: &Path) -> Result<Vec<ScalarField>> {
    let file = File::open(path)?;
    let mut input = BufReader::new(file);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != TVSF_MAGIC {
        return Err(Error::Format(format!(
            "{}: not a TVSF fixture",
            path.display()
        )));
    }
    let mut byte = [0u8; 1];
    input.read_exact(&mut byte)?;
    let channels = byte[0] as usize;
    let mut u32buf = [0u8; 4];
    input.read_exact(&mut u32buf)?;
    let rows = u32::from_le_bytes(u32buf) as usize;
    input.read_exact(&mut u32buf)?;
    let cols = u32::from_le_bytes(u32buf) as usize;
    let mut f64buf = [0u8; 8];
    input.read_exact(&mut f64buf)?;
    let h = f64::from_le_bytes(f64buf);
    if channels == 0 || rows == 0 || cols == 0 {
        return Err(Error::Format("degenerate fixture header".into()));
    }
    let grid = GridSpec::new(rows, cols, h)?;
    let mut planes = Vec::with_capacity(channels);
    for _ in 0..channels {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            input.read_exact(&mut f64buf)?;
            data.push(f64::from_le_bytes(f64buf));
        }
        let arr = Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| Error::Format(format!("fixture shape: {e}")))?;
        planes.push(ScalarField::from_values(grid, arr)?);
    }
    Ok(planes)
}

pub fn write_vector_tvsf(path: &Path, v: &VectorField2) -> Result<()> {
    write_tvsf(path, &[v.x(), v.y()])
}

pub fn read_vector_tvsf(path: &Path) -> Result<VectorField2> {
    let planes = read_tvsf(path)?;
    match <[ScalarField; 2]>::try_from(planes) {
        Ok([x, y]) => VectorField2::new(x, y),
        Err(p) => Err(Error::Format(format!(
            "expected 2-channel fixture, got {} channels",
            p.len()
        ))),
    }
}

pub fn write_tensor_tvsf(path: &Path, t: &TensorField2x2) -> Result<()> {
    write_tvsf(
        path,
        &[t.row1().x(), t.row1().y(), t.row2().x(), t.row2().y()],
    )
}

pub fn read_tensor_tvsf(path: &Path) -> Result<TensorField2x2> {
    let planes = read_tvsf(path)?;
    match <[ScalarField; 4]>::try_from(planes) {
        Ok([r1x, r1y, r2x, r2y]) => {
            TensorField2x2::new(VectorField2::new(r1x, r1y)?, VectorField2::new(r2x, r2y)?)
        }
        Err(p) => Err(Error::Format(format!(
            "expected 4-channel fixture, got {} channels",
            p.len()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "tvstokes-io-{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn png_roundtrip_preserves_8bit_values() {
        let dir = tmpdir();
        let g = GridSpec::new(5, 7, 1.0).unwrap();
        let field = ScalarField::from_fn(g, |i, j| ((i * 37 + j * 11) % 256) as f64 / 255.0);
        let path = dir.join("roundtrip.png");
        save_image(&field, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.values(), field.values());
    }

    #[test]
    fn pgm_roundtrip_preserves_8bit_values() {
        let dir = tmpdir();
        let g = GridSpec::new(4, 4, 1.0).unwrap();
        let field = ScalarField::from_fn(g, |i, j| ((i * 64 + j * 16) % 256) as f64 / 255.0);
        let path = dir.join("roundtrip.pgm");
        save_image(&field, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.values(), field.values());
    }

    #[test]
    fn all_black_loads_as_zero_field() {
        let dir = tmpdir();
        let g = GridSpec::new(3, 3, 1.0).unwrap();
        let path = dir.join("black.png");
        save_image(&ScalarField::zeros(g), &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.max_abs(), 0.0);
    }

    #[test]
    fn sixteen_bit_ramp_maxes_at_one() {
        let dir = tmpdir();
        let path = dir.join("ramp16.png");
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_fn(16, 1, |x, _| Luma([(x * 4369) as u16]));
        buf.save(&path).unwrap();
        let field = load_image(&path).unwrap();
        assert!((field.values()[[0, 15]] - 1.0).abs() < 1e-12);
        assert_eq!(field.values()[[0, 0]], 0.0);
    }

    #[test]
    fn color_image_is_rejected() {
        let dir = tmpdir();
        let path = dir.join("color.png");
        let buf: ImageBuffer<image::Rgb<u8>, Vec<u8>> =
            ImageBuffer::from_fn(4, 4, |x, y| image::Rgb([x as u8, y as u8, 0]));
        buf.save(&path).unwrap();
        match load_image(&path) {
            Err(Error::Format(_)) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn tvsf_roundtrip_is_lossless() {
        let dir = tmpdir();
        let g = GridSpec::new(3, 4, 0.5).unwrap();
        let a = ScalarField::from_fn(g, |i, j| (i as f64).powi(2) - 0.3 * j as f64 + 1e-17);
        let b = ScalarField::from_fn(g, |i, j| -(i as f64) * 0.1 + (j as f64) * 7.0);
        let path = dir.join("pair.tvsf");
        write_tvsf(&path, &[&a, &b]).unwrap();
        let planes = read_tvsf(&path).unwrap();
        assert_eq!(planes.len(), 2);
        assert_eq!(planes[0].values(), a.values());
        assert_eq!(planes[1].values(), b.values());
        assert_eq!(planes[0].grid().h, 0.5);
    }

    #[test]
    fn tvsf_rejects_bad_magic() {
        let dir = tmpdir();
        let path = dir.join("bad.tvsf");
        std::fs::write(&path, b"NOPE....").unwrap();
        assert!(matches!(read_tvsf(&path), Err(Error::Format(_))));
    }
}
