use image::GrayImage;

use super::ssim::gaussian_kernel;
use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyParams {
    pub sigma: f64,
    /// Fractions of the maximum gradient magnitude.
    pub low: f64,
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self { sigma: 1.4, low: 0.1, high: 0.2 }
    }
}

fn blur(img: &GrayImage, sigma: f64) -> Vec<f64> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let radius = (3.0 * sigma).ceil().max(1.0) as i64;
    let k = gaussian_kernel((2 * radius + 1) as usize, sigma);
    let at = |x: i64, y: i64| f64::from(img.as_raw()[(y.clamp(0, h - 1) * w + x.clamp(0, w - 1)) as usize]);
    let mut tmp = vec![0.0; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            tmp[(y * w + x) as usize] = k.iter().enumerate().map(|(i, t)| t * at(x + i as i64 - radius, y)).sum();
        }
    }
    let mut out = vec![0.0; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            out[(y * w + x) as usize] =
                k.iter().enumerate().map(|(i, t)| t * tmp[((y + i as i64 - radius).clamp(0, h - 1) * w + x) as usize]).sum();
        }
    }
    out
}

/// Gaussian smoothing, Sobel gradients, non-maximum suppression along the
/// gradient direction quantized to 4 sectors, and 8-connected hysteresis.
/// Returns a 0/255 edge map.
pub fn canny(img: &GrayImage, params: &CannyParams) -> Result<GrayImage, MetricsError> {
    let CannyParams { sigma, low, high } = *params;
    if !(sigma > 0.0) || !(0.0..1.0).contains(&low) || !(low < high && high <= 1.0) {
        return Err(MetricsError::BadThresholds { low, high });
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut edges = GrayImage::new(img.width(), img.height());
    if w < 3 || h < 3 {
        return Ok(edges);
    }
    let s = blur(img, sigma);
    let at = |x: usize, y: usize| s[y * w + x];
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    let mut mag = vec![0.0; w * h];
    for y in 0..h {
        let (ym, yp) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (xm, xp) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let dx = (at(xp, ym) + 2.0 * at(xp, y) + at(xp, yp)) - (at(xm, ym) + 2.0 * at(xm, y) + at(xm, yp));
            let dy = (at(xm, yp) + 2.0 * at(x, yp) + at(xp, yp)) - (at(xm, ym) + 2.0 * at(x, ym) + at(xp, ym));
            let i = y * w + x;
            gx[i] = dx;
            gy[i] = dy;
            mag[i] = dx.hypot(dy);
        }
    }
    let max = mag.iter().copied().fold(0.0, f64::max);
    if max <= 1e-9 {
        return Ok(edges);
    }

    // thin: keep local maxima along the gradient; ties keep the first pixel
    let mut thin = vec![0.0; w * h];
    let tan22 = std::f64::consts::FRAC_PI_8.tan();
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let m = mag[i];
            if m == 0.0 {
                continue;
            }
            let (ax, ay) = (gx[i].abs(), gy[i].abs());
            let (before, after) = if ay <= ax * tan22 {
                (mag[i - 1], mag[i + 1])
            } else if ax <= ay * tan22 {
                (mag[i - w], mag[i + w])
            } else if (gx[i] > 0.0) == (gy[i] > 0.0) {
                (mag[i - w - 1], mag[i + w + 1])
            } else {
                (mag[i - w + 1], mag[i + w - 1])
            };
            if m > before && m >= after {
                thin[i] = m;
            }
        }
    }

    let (lo, hi) = (low * max, high * max);
    let mut stack: Vec<usize> = (0..w * h).filter(|&i| thin[i] >= hi).collect();
    let out = edges.as_mut();
    for &i in &stack {
        out[i] = 255;
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if out[j] == 0 && thin[j] >= lo && thin[j] > 0.0 {
                    out[j] = 255;
                    stack.push(j);
                }
            }
        }
    }
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::gray_from_fn;
    use std::collections::HashSet;

    fn square() -> GrayImage {
        gray_from_fn(64, 64, |x, y| if (20..44).contains(&x) && (20..44).contains(&y) { 220 } else { 30 })
    }

    fn edge_set(e: &GrayImage) -> HashSet<(i64, i64)> {
        e.enumerate_pixels().filter(|(_, _, p)| p[0] == 255).map(|(x, y, _)| (i64::from(x), i64::from(y))).collect()
    }

    #[test]
    fn constant_image_has_no_edges() {
        let e = canny(&gray_from_fn(32, 32, |_, _| 77), &CannyParams::default()).unwrap();
        assert!(e.pixels().all(|p| p[0] == 0));
    }

    #[test]
    fn output_is_binary() {
        let e = canny(&square(), &CannyParams::default()).unwrap();
        assert!(e.pixels().all(|p| p[0] == 0 || p[0] == 255));
    }

    #[test]
    fn square_gives_thin_connected_ring() {
        let e = canny(&square(), &CannyParams::default()).unwrap();
        let set = edge_set(&e);
        assert!(!set.is_empty());
        // boundary sits between pixels 19|20 and 43|44
        let near = |v: i64| (v - 19).abs().min((v - 20).abs()).min((v - 43).abs()).min((v - 44).abs());
        for &(x, y) in &set {
            let inside_band = (17..=46).contains(&x) && (17..=46).contains(&y);
            assert!(inside_band && (near(x) <= 2 || near(y) <= 2), "stray edge at ({x},{y})");
        }
        // one pixel wide along each straight side
        for t in 26..38 {
            for (lo, hi, vertical) in [(10, 32, true), (32, 54, true), (10, 32, false), (32, 54, false)] {
                let n = (lo..hi).filter(|&s| set.contains(&if vertical { (s, t) } else { (t, s) })).count();
                assert_eq!(n, 1, "side crossing at t={t}");
            }
        }
        // a single 8-connected component
        let start = *set.iter().next().unwrap();
        let mut seen = HashSet::from([start]);
        let mut stack = vec![start];
        while let Some((x, y)) = stack.pop() {
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let n = (x + dx, y + dy);
                    if set.contains(&n) && seen.insert(n) {
                        stack.push(n);
                    }
                }
            }
        }
        assert_eq!(seen.len(), set.len());
    }

    #[test]
    fn raising_low_never_adds_edges() {
        let img = gray_from_fn(64, 48, |x, y| ((x * 7 + y * 13 + (x * y) % 17) % 256) as u8);
        let mut prev: Option<HashSet<(i64, i64)>> = None;
        for low in [0.02, 0.05, 0.1, 0.15, 0.19] {
            let set = edge_set(&canny(&img, &CannyParams { low, ..CannyParams::default() }).unwrap());
            if let Some(p) = &prev {
                assert!(set.is_subset(p));
            }
            prev = Some(set);
        }
    }

    #[test]
    fn thresholds_are_validated() {
        let img = square();
        assert!(canny(&img, &CannyParams { low: 0.3, high: 0.2, sigma: 1.4 }).is_err());
        assert!(canny(&img, &CannyParams { low: 0.1, high: 1.5, sigma: 1.4 }).is_err());
        assert!(canny(&img, &CannyParams { sigma: 0.0, ..CannyParams::default() }).is_err());
    }
}
