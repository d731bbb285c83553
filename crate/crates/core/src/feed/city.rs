use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::FeedError;
use crate::geo::GeoCoordinate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedItem {
    pub id: String,
    pub title: String,
    pub artist: String,
    pub coordinate: GeoCoordinate,
    pub method: Option<String>,
    pub source: Option<String>,
    pub art_panorama_url: Option<String>,
}

/// FeatureCollection of the revealed items, in reveal order.
pub fn city_geojson(revealed: &[String], items: &IndexMap<String, FeedItem>) -> Result<Value, FeedError> {
    let features = revealed
        .iter()
        .map(|id| {
            let it = items.get(id).ok_or_else(|| FeedError::StateMismatch(format!("revealed id `{id}` has no feed item")))?;
            Ok(json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [it.coordinate.lon, it.coordinate.lat] },
                "properties": {
                    "id": it.id,
                    "title": it.title,
                    "artist": it.artist,
                    "method": it.method,
                    "source": it.source,
                    "art_panorama_url": it.art_panorama_url,
                }
            }))
        })
        .collect::<Result<Vec<_>, FeedError>>()?;
    Ok(json!({ "type": "FeatureCollection", "features": features }))
}

/// Structural check of a FeatureCollection of Point features; returns the
/// feature count.
pub fn validate_feature_collection(v: &Value) -> Result<usize, String> {
    if v.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err("type must be FeatureCollection".into());
    }
    let features = v.get("features").and_then(Value::as_array).ok_or("features must be an array")?;
    for (i, f) in features.iter().enumerate() {
        if f.get("type").and_then(Value::as_str) != Some("Feature") {
            return Err(format!("feature {i}: type must be Feature"));
        }
        let g = f.get("geometry").ok_or(format!("feature {i}: missing geometry"))?;
        if g.get("type").and_then(Value::as_str) != Some("Point") {
            return Err(format!("feature {i}: geometry must be a Point"));
        }
        let c = g.get("coordinates").and_then(Value::as_array).ok_or(format!("feature {i}: missing coordinates"))?;
        let nums: Vec<f64> = c.iter().filter_map(Value::as_f64).collect();
        if c.len() != 2 || nums.len() != 2 || !(-180.0..=180.0).contains(&nums[0]) || !(-90.0..=90.0).contains(&nums[1]) {
            return Err(format!("feature {i}: coordinates must be [lon, lat]"));
        }
        match f.get("properties") {
            Some(Value::Object(_)) | Some(Value::Null) => {}
            _ => return Err(format!("feature {i}: properties must be an object or null")),
        }
    }
    Ok(features.len())
}
