use std::collections::HashMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::balltree::{BallTree, NeighborSet, DEFAULT_LEAF_SIZE};
use super::forest::{fit_forest, predict_forest, FeatureMatrix, ForestConfig, Target};
use super::scaler::standardize;
use super::triangulate::{softmax_complement_weights, triangulate_centroid, triangulate_weighted, WeightMode};
use super::{GeoCoordinate, GeoError};
use crate::catalog::EmbeddingMap;

/// Number of public neighbors used to triangulate.
pub const NEIGHBORS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Similar,
    SimilarWeighted,
    Forest,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Similar => "similar",
            Method::SimilarWeighted => "similar_weighted",
            Method::Forest => "forest",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "similar" => Ok(Self::Similar),
            "similar_weighted" | "similar-weighted" => Ok(Self::SimilarWeighted),
            "forest" => Ok(Self::Forest),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationPrediction {
    pub artwork_id: String,
    pub coordinate: GeoCoordinate,
    pub method: Method,
    /// Present for similarity methods only.
    pub neighbors: Option<NeighborSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocateOptions {
    pub method: Method,
    pub mode: WeightMode,
    pub leaf_size: usize,
    pub forest: ForestConfig,
}

impl Default for LocateOptions {
    fn default() -> Self {
        Self { method: Method::Similar, mode: WeightMode::default(), leaf_size: DEFAULT_LEAF_SIZE, forest: ForestConfig::default() }
    }
}

fn to_matrix(map: &EmbeddingMap) -> Result<FeatureMatrix, GeoError> {
    let cols = map.values().next().map_or(0, |v| v.dim());
    let mut data = Vec::with_capacity(map.len() * cols);
    for v in map.values() {
        if v.dim() != cols {
            return Err(GeoError::DimMismatch { expected: cols, found: v.dim() });
        }
        data.extend(v.values().iter().map(|&x| f64::from(x)));
    }
    FeatureMatrix::new(map.len(), cols, data)
}

/// Predict a coordinate for every query embedding from the located set.
/// Output order follows `queries`.
pub fn assign_fictional_coordinates(
    queries: &EmbeddingMap,
    located: &EmbeddingMap,
    coords: &HashMap<String, GeoCoordinate>,
    opts: &LocateOptions,
) -> Result<Vec<LocationPrediction>, GeoError> {
    for id in located.keys() {
        if !coords.contains_key(id) {
            return Err(GeoError::MissingCoordinate(id.clone()));
        }
    }
    match opts.method {
        Method::Similar | Method::SimilarWeighted => {
            if located.len() < NEIGHBORS {
                return Err(GeoError::TooFewPublic { needed: NEIGHBORS, found: located.len() });
            }
            let tree = BallTree::build(located, opts.leaf_size)?;
            queries
                .par_iter()
                .map(|(id, q)| {
                    let nb = tree.query(q.values(), NEIGHBORS)?;
                    let tri = [0, 1, 2].map(|j| coords[&nb.ids[j]]);
                    let coordinate = if opts.method == Method::Similar {
                        triangulate_centroid(&tri)
                    } else {
                        let w = softmax_complement_weights([nb.distances[0], nb.distances[1], nb.distances[2]])?;
                        triangulate_weighted(&tri, &w, opts.mode)
                    };
                    Ok(LocationPrediction { artwork_id: id.clone(), coordinate, method: opts.method, neighbors: Some(nb) })
                })
                .collect()
        }
        Method::Forest => {
            if located.is_empty() {
                return Err(GeoError::TooFewPublic { needed: opts.forest.min_samples_split, found: 0 });
            }
            let x_train = to_matrix(located)?;
            let x_query = to_matrix(queries)?;
            if !queries.is_empty() && x_query.cols() != x_train.cols() {
                return Err(GeoError::DimMismatch { expected: x_train.cols(), found: x_query.cols() });
            }
            let x_query = if queries.is_empty() { FeatureMatrix::new(0, x_train.cols(), vec![])? } else { x_query };
            let y: Vec<Target> = located.keys().map(|id| [coords[id].lat, coords[id].lon]).collect();
            let (xt, xq, _) = standardize(&x_train, &x_query)?;
            let model = fit_forest(&xt, &y, &opts.forest)?;
            let pred = predict_forest(&model, &xq)?;
            Ok(queries
                .keys()
                .zip(pred)
                .map(|(id, p)| LocationPrediction {
                    artwork_id: id.clone(),
                    coordinate: GeoCoordinate { lat: p[0], lon: p[1] },
                    method: Method::Forest,
                    neighbors: None,
                })
                .collect())
        }
    }
}

pub const PREDICTION_COLUMNS: [&str; 10] = ["id", "lat", "lon", "method", "n1", "n2", "n3", "d1", "d2", "d3"];

pub fn write_predictions<W: Write>(preds: &[LocationPrediction], out: W) -> Result<(), GeoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PREDICTION_COLUMNS)?;
    for p in preds {
        let mut rec = vec![p.artwork_id.clone(), p.coordinate.lat.to_string(), p.coordinate.lon.to_string(), p.method.as_str().into()];
        match &p.neighbors {
            Some(nb) => {
                for j in 0..NEIGHBORS {
                    rec.push(nb.ids.get(j).cloned().unwrap_or_default());
                }
                for j in 0..NEIGHBORS {
                    rec.push(nb.distances.get(j).map(f64::to_string).unwrap_or_default());
                }
            }
            None => rec.extend(std::iter::repeat_n(String::new(), 2 * NEIGHBORS)),
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions<R: Read>(input: R) -> Result<Vec<LocationPrediction>, GeoError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().map(str::trim).ne(PREDICTION_COLUMNS) {
        return Err(GeoError::Format("prediction header must be id,lat,lon,method,n1,n2,n3,d1,d2,d3".into()));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| GeoError::Format(format!("row {}: {what}", line + 1));
        let f = |i: usize| rec.get(i).unwrap_or("").trim();
        let num = |i: usize| f(i).parse::<f64>().map_err(|_| bad(PREDICTION_COLUMNS[i]));
        let coordinate = GeoCoordinate::new(num(1)?, num(2)?)?;
        let method: Method = f(3).parse().map_err(|e: String| bad(&e))?;
        let neighbors = if method == Method::Forest {
            if (4..10).any(|i| !f(i).is_empty()) {
                return Err(bad("forest rows carry no neighbors"));
            }
            None
        } else {
            let ids = (4..7).map(|i| f(i).to_owned()).collect::<Vec<_>>();
            if ids.iter().any(String::is_empty) {
                return Err(bad("missing neighbor id"));
            }
            let distances = (7..10).map(num).collect::<Result<Vec<_>, _>>()?;
            if distances.iter().any(|d| !d.is_finite() || *d < 0.0) {
                return Err(bad("neighbor distance"));
            }
            Some(NeighborSet { ids, distances })
        };
        out.push(LocationPrediction { artwork_id: f(0).to_owned(), coordinate, method, neighbors });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::EmbeddingVector;

    fn emb(v: &[f32]) -> EmbeddingVector {
        EmbeddingVector::new(v.to_vec()).unwrap()
    }

    fn fixture() -> (EmbeddingMap, HashMap<String, GeoCoordinate>) {
        let mut public = EmbeddingMap::new();
        public.insert("p1".into(), emb(&[0.0, 0.0]));
        public.insert("p2".into(), emb(&[1.0, 0.0]));
        public.insert("p3".into(), emb(&[0.0, 2.0]));
        let coords = [("p1", 60.0, 24.0), ("p2", 60.3, 24.0), ("p3", 60.0, 24.3)]
            .into_iter()
            .map(|(id, a, b)| (id.to_string(), GeoCoordinate::new(a, b).unwrap()))
            .collect();
        (public, coords)
    }

    #[test]
    fn three_public_one_indoor_is_the_centroid() {
        let (public, coords) = fixture();
        let mut indoor = EmbeddingMap::new();
        indoor.insert("i1".into(), emb(&[5.0, 5.0]));
        let p = assign_fictional_coordinates(&indoor, &public, &coords, &LocateOptions::default()).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p[0].coordinate.lat - 60.1).abs() < 1e-12 && (p[0].coordinate.lon - 24.1).abs() < 1e-12);

        let opts = LocateOptions { method: Method::SimilarWeighted, ..Default::default() };
        let w = assign_fictional_coordinates(&indoor, &public, &coords, &opts).unwrap();
        let nb = w[0].neighbors.as_ref().unwrap();
        let weights = softmax_complement_weights([nb.distances[0], nb.distances[1], nb.distances[2]]).unwrap();
        let tri = [0, 1, 2].map(|j| coords[&nb.ids[j]]);
        assert_eq!(w[0].coordinate, triangulate_weighted(&tri, &weights, WeightMode::Normalized));
    }

    #[test]
    fn indoor_equal_to_public_gets_it_first() {
        let (public, coords) = fixture();
        let mut indoor = EmbeddingMap::new();
        indoor.insert("i1".into(), emb(&[1.0, 0.0]));
        let p = assign_fictional_coordinates(&indoor, &public, &coords, &LocateOptions::default()).unwrap();
        let nb = p[0].neighbors.as_ref().unwrap();
        assert_eq!(nb.ids[0], "p2");
        assert_eq!(nb.distances[0], 0.0);
    }

    #[test]
    fn too_few_public_for_similarity() {
        let (mut public, coords) = fixture();
        public.shift_remove("p3");
        let r = assign_fictional_coordinates(&EmbeddingMap::new(), &public, &coords, &LocateOptions::default());
        assert!(matches!(r, Err(GeoError::TooFewPublic { .. })));
    }

    #[test]
    fn forest_predictions_have_no_neighbors() {
        let (public, coords) = fixture();
        let mut indoor = EmbeddingMap::new();
        indoor.insert("i1".into(), emb(&[0.1, 0.1]));
        let opts =
            LocateOptions { method: Method::Forest, forest: ForestConfig { n_estimators: 5, ..Default::default() }, ..Default::default() };
        let p = assign_fictional_coordinates(&indoor, &public, &coords, &opts).unwrap();
        assert!(p[0].neighbors.is_none());
        assert_eq!(p[0].method, Method::Forest);
    }

    #[test]
    fn prediction_csv_round_trip() {
        let (public, coords) = fixture();
        let mut indoor = EmbeddingMap::new();
        indoor.insert("i1".into(), emb(&[0.3, 0.7]));
        indoor.insert("i2".into(), emb(&[0.9, 0.1]));
        let mut preds = assign_fictional_coordinates(&indoor, &public, &coords, &LocateOptions::default()).unwrap();
        preds.push(LocationPrediction {
            artwork_id: "f".into(),
            coordinate: GeoCoordinate::new(60.2, 24.95).unwrap(),
            method: Method::Forest,
            neighbors: None,
        });
        let mut buf = Vec::new();
        write_predictions(&preds, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("id,lat,lon,method,n1,n2,n3,d1,d2,d3\n"));
        assert!(text.lines().last().unwrap().ends_with("forest,,,,,,"));
        assert_eq!(read_predictions(buf.as_slice()).unwrap(), preds);
    }

    #[test]
    fn malformed_prediction_rows() {
        let bad = "id,lat,lon,method,n1,n2,n3,d1,d2,d3\na,95,24,similar,x,y,z,1,2,3\n";
        assert!(read_predictions(bad.as_bytes()).is_err());
        let bad = "id,lat,lon,method,n1,n2,n3,d1,d2,d3\na,60,24,forest,x,,,,,\n";
        assert!(read_predictions(bad.as_bytes()).is_err());
        let bad = "id,lat,lon\n";
        assert!(read_predictions(bad.as_bytes()).is_err());
    }
}
