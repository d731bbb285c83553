use super::Panorama;
use crate::raster::center_crop_width;

#[derive(Debug, Clone, PartialEq)]
pub enum EquirectCheck {
    Ok,
    /// A 19:6 fallback asset center-cropped to 2:1.
    Cropped {
        panorama: Panorama,
        from: (u32, u32),
        to: (u32, u32),
    },
    Violation {
        width: u32,
        height: u32,
        reason: String,
    },
}

impl EquirectCheck {
    pub fn is_ok(&self) -> bool {
        matches!(self, EquirectCheck::Ok)
    }

    pub fn report(&self) -> String {
        match self {
            EquirectCheck::Ok => "ok".into(),
            EquirectCheck::Cropped { from, to, .. } => {
                format!("cropped {}x{} -> {}x{} (19:6 fallback to 2:1)", from.0, from.1, to.0, to.1)
            }
            EquirectCheck::Violation { width, height, reason } => format!("violation {width}x{height}: {reason}"),
        }
    }
}

fn is_two_to_one(w: u32, h: u32) -> bool {
    (i64::from(w) - 2 * i64::from(h)).abs() <= 1
}

/// 19:6 within one pixel of width.
fn is_nineteen_to_six(w: u32, h: u32) -> bool {
    (6 * i64::from(w) - 19 * i64::from(h)).abs() <= 6
}

pub fn validate_equirectangular(p: &Panorama) -> EquirectCheck {
    let (w, h) = (p.width(), p.height());
    if w == 0 || h == 0 {
        return EquirectCheck::Violation { width: w, height: h, reason: "empty raster".into() };
    }
    if is_two_to_one(w, h) {
        return EquirectCheck::Ok;
    }
    if p.source.is_fallback() && is_nineteen_to_six(w, h) {
        let target = 2 * h;
        let mut panorama = p.clone();
        panorama.pixels = center_crop_width(&p.pixels, target);
        return EquirectCheck::Cropped { panorama, from: (w, h), to: (target, h) };
    }
    let reason = if p.source.is_fallback() { "fallback must be 2:1 or 19:6" } else { "street view must be 2:1 (±1 px)" };
    EquirectCheck::Violation { width: w, height: h, reason: reason.into() }
}
