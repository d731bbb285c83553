//! Small raster helpers shared by the panorama, stylize and metrics stages.

use std::io::Cursor;
use std::path::Path;

use image::{GrayImage, ImageFormat, Rgb, RgbImage};

/// Bilinear resampling with half-pixel centers and edge clamping.
pub fn resize_bilinear(img: &RgbImage, width: u32, height: u32) -> RgbImage {
    let (sw, sh) = img.dimensions();
    if (sw, sh) == (width, height) {
        return img.clone();
    }
    let sx = f64::from(sw) / f64::from(width);
    let sy = f64::from(sh) / f64::from(height);
    let src = |v: u32, scale: f64, max: u32| -> (u32, u32, f64) {
        let p = ((f64::from(v) + 0.5) * scale - 0.5).clamp(0.0, f64::from(max - 1));
        let i0 = p.floor() as u32;
        let i1 = (i0 + 1).min(max - 1);
        (i0, i1, p - f64::from(i0))
    };
    let cols: Vec<_> = (0..width).map(|x| src(x, sx, sw)).collect();
    RgbImage::from_fn(width, height, |x, y| {
        let (y0, y1, fy) = src(y, sy, sh);
        let (x0, x1, fx) = cols[x as usize];
        let mut out = [0u8; 3];
        for (c, o) in out.iter_mut().enumerate() {
            let p = |xx, yy| f64::from(img.get_pixel(xx, yy)[c]);
            let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
            let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
            *o = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
        }
        Rgb(out)
    })
}

/// Horizontally centered crop to `width` columns.
pub fn center_crop_width(img: &RgbImage, width: u32) -> RgbImage {
    let (w, h) = img.dimensions();
    let width = width.min(w);
    let x0 = (w - width) / 2;
    image::imageops::crop_imm(img, x0, 0, width, h).to_image()
}

pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png).expect("in-memory PNG encoding");
    buf.into_inner()
}

pub fn encode_png_gray16(width: u32, height: u32, values: &[u16]) -> Vec<u8> {
    let img: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
        image::ImageBuffer::from_raw(width, height, values.to_vec()).expect("buffer size matches dims");
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png).expect("in-memory PNG encoding");
    buf.into_inner()
}

pub fn decode_rgb(bytes: &[u8]) -> Result<RgbImage, image::ImageError> {
    Ok(image::load_from_memory(bytes)?.to_rgb8())
}

pub fn decode_gray16(bytes: &[u8]) -> Result<image::ImageBuffer<image::Luma<u16>, Vec<u16>>, image::ImageError> {
    Ok(image::load_from_memory(bytes)?.to_luma16())
}

pub fn load_rgb(path: &Path) -> Result<RgbImage, image::ImageError> {
    Ok(image::open(path)?.to_rgb8())
}

/// Write `bytes` next to `path` and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    std::io::Write::write_all(&mut tmp, bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn gray_from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> u8) -> GrayImage {
    GrayImage::from_fn(width, height, |x, y| image::Luma([f(x, y)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_resize_is_exact() {
        let img = RgbImage::from_fn(7, 5, |x, y| Rgb([x as u8 * 30, y as u8 * 40, 9]));
        assert_eq!(resize_bilinear(&img, 7, 5), img);
    }

    #[test]
    fn constant_stays_constant() {
        let img = RgbImage::from_pixel(6, 3, Rgb([10, 200, 33]));
        let up = resize_bilinear(&img, 24, 12);
        assert!(up.pixels().all(|p| *p == Rgb([10, 200, 33])));
        let down = resize_bilinear(&up, 6, 3);
        assert_eq!(down, img);
    }

    #[test]
    fn upscale_edges_copy_source_edges() {
        let img = RgbImage::from_fn(8, 4, |x, y| Rgb([(x * 31) as u8, (y * 50) as u8, 0]));
        let up = resize_bilinear(&img, 32, 16);
        for y in 0..16 {
            assert_eq!(up.get_pixel(0, y)[0], img.get_pixel(0, 0)[0]);
            assert_eq!(up.get_pixel(31, y)[0], img.get_pixel(7, 0)[0]);
        }
    }

    #[test]
    fn crop_keeps_center() {
        let img = RgbImage::from_fn(19, 6, |x, _| Rgb([x as u8, 0, 0]));
        let c = center_crop_width(&img, 12);
        assert_eq!(c.dimensions(), (12, 6));
        assert_eq!(c.get_pixel(0, 0)[0], 3);
    }

    #[test]
    fn png_round_trip() {
        let img = RgbImage::from_fn(9, 4, |x, y| Rgb([x as u8, y as u8, (x * y) as u8]));
        assert_eq!(decode_rgb(&encode_png(&img)).unwrap(), img);
        let vals: Vec<u16> = (0..12).map(|v| v * 5000).collect();
        assert_eq!(decode_gray16(&encode_png_gray16(4, 3, &vals)).unwrap().into_raw(), vals);
    }
}
