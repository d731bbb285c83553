use std::fmt::Write as _;
use std::path::Path;

use super::FeedError;
use crate::geo::GeoCoordinate;
use crate::raster::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerKind {
    Public,
    Predicted,
    Fallback,
}

impl MarkerKind {
    pub fn color(self) -> &'static str {
        match self {
            MarkerKind::Public => "red",
            MarkerKind::Predicted => "blue",
            MarkerKind::Fallback => "green",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub at: GeoCoordinate,
    pub kind: MarkerKind,
}

const MAX_SIDE: f64 = 800.0;
/// Minimum padding in degrees, so identical points still get a viewport.
const MIN_PAD: f64 = 0.001;

/// Equirectangular scatter plot: longitude right, latitude up, one scale
/// for both axes, bounds = data box padded by 5% per side.
pub fn render_map(points: &[MapPoint]) -> Result<String, FeedError> {
    if points.is_empty() {
        return Err(FeedError::EmptyInput);
    }
    let fold = |f: fn(&GeoCoordinate) -> f64| {
        points.iter().map(|p| f(&p.at)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (lon0, lon1) = fold(|c| c.lon);
    let (lat0, lat1) = fold(|c| c.lat);
    let pad_lon = ((lon1 - lon0) * 0.05).max(MIN_PAD);
    let pad_lat = ((lat1 - lat0) * 0.05).max(MIN_PAD);
    let (x0, x1, y0, y1) = (lon0 - pad_lon, lon1 + pad_lon, lat0 - pad_lat, lat1 + pad_lat);
    let scale = (MAX_SIDE / (x1 - x0)).min(MAX_SIDE / (y1 - y0));
    let (w, h) = (((x1 - x0) * scale).round().max(1.0), ((y1 - y0) * scale).round().max(1.0));

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for kind in [MarkerKind::Public, MarkerKind::Predicted, MarkerKind::Fallback] {
        let _ = writeln!(svg, r#"<g class="{kind:?}">"#);
        for p in points.iter().filter(|p| p.kind == kind) {
            let cx = (p.at.lon - x0) * scale;
            let cy = (y1 - p.at.lat) * scale;
            let _ = writeln!(svg, r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="3" fill="{}"/>"#, kind.color());
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Public artworks red, predictions blue, predictions that fell back to a
/// sea/forest asset green.
pub fn export_map(public: &[GeoCoordinate], predicted: &[GeoCoordinate], fallback: &[bool], out: &Path) -> Result<(), FeedError> {
    if predicted.len() != fallback.len() {
        return Err(FeedError::Format { what: "map input", reason: "one fallback flag per prediction".into() });
    }
    let points: Vec<MapPoint> = public
        .iter()
        .map(|&at| MapPoint { at, kind: MarkerKind::Public })
        .chain(
            predicted
                .iter()
                .zip(fallback)
                .map(|(&at, &fb)| MapPoint { at, kind: if fb { MarkerKind::Fallback } else { MarkerKind::Predicted } }),
        )
        .collect();
    write_atomic(out, render_map(&points)?.as_bytes())?;
    Ok(())
}
