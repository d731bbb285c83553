//! Acceptance checks 1-10. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; the process fails if any does.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use chrono::{TimeZone, Utc};
use clap::Parser;
use http_body_util::BodyExt;
use image::{GrayImage, Luma};
use indexmap::IndexMap;
use ncity_cli::synth::{synth_collection, SynthSpec};
use ncity_core::catalog::{split_public, EmbeddingMap, EmbeddingVector, SplitSpec};
use ncity_core::feed::{export_map, validate_feature_collection, FeedItem, ManualClock, RevealSchedule, StateStore};
use ncity_core::geo::{
    assign_fictional_coordinates, dispersion, fit_forest, predict_forest, randomized_search, softmax_complement_weights,
    triangulate_centroid, triangulate_weighted, BallTree, FeatureMatrix, ForestConfig, GeoCoordinate, LocateOptions, MaxFeatures, Method,
    ParamSpace, Target, WeightMode,
};
use ncity_core::metrics::{canny, hog, hog_similarity, ssim, CannyParams, SsimParams};
use ncity_core::panorama::{fetch_panorama, select_fallback, FallbackLibrary, FetchPolicy, MockStreetView, PanoramaError, PanoramaSource};
use ncity_core::stylize::{
    generate_art_panorama, read_manifest, DepthMap, GenerationRequest, MockGenerator, StylizeError, DEFAULT_SEAM_TOLERANCE,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tower::ServiceExt;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("kNN oracle equivalence", c1_knn),
        ("triangulation suite", c2_triangulation),
        ("forest correctness", c3_forest),
        ("tuner report shape and argmin", c4_tuner),
        ("similarity vs forest dispersion", c5_dispersion),
        ("SSIM suite", c6_ssim),
        ("Canny/HOG suite", c7_canny_hog),
        ("pipeline determinism, seam and fallback", c8_pipeline),
        ("feed service", c9_feed),
        ("evaluation table", c10_evaluate),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2}: PASS  {name} ({detail}; {secs:.2}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {name}: {why} ({secs:.2}s)", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn cli(args: &[&str]) -> Result<(), String> {
    let cli = ncity_cli::Cli::try_parse_from(std::iter::once("ncity").chain(args.iter().copied())).map_err(|e| e.to_string())?;
    ncity_cli::run(cli).map_err(|e| e.to_string())
}

fn c1_knn() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dim = 1536;
    let vec = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect::<Vec<f32>>();
    let data: EmbeddingMap = (0..500).map(|i| (format!("v{i:03}"), EmbeddingVector::new(vec(&mut rng)).unwrap())).collect();
    let queries: Vec<Vec<f32>> = (0..50).map(|_| vec(&mut rng)).collect();
    let start = Instant::now();
    let tree = BallTree::build(&data, 40).map_err(|e| e.to_string())?;
    let mut answers = Vec::new();
    for q in &queries {
        for k in [1, 3, 5] {
            answers.push(tree.query(q, k).map_err(|e| e.to_string())?);
        }
    }
    let elapsed = start.elapsed();
    let mut idx = 0;
    for q in &queries {
        // exhaustive scan, f64 accumulation, ties by id
        let mut all: Vec<(f64, &str)> = data
            .iter()
            .map(|(id, v)| {
                let d: f64 = v.values().iter().zip(q).map(|(a, b)| (f64::from(*a) - f64::from(*b)).powi(2)).sum();
                (d.sqrt(), id.as_str())
            })
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
        for k in [1, 3, 5] {
            let got = &answers[idx];
            idx += 1;
            let ids: Vec<&str> = all[..k].iter().map(|x| x.1).collect();
            ensure!(got.ids.iter().map(String::as_str).eq(ids.iter().copied()), "k={k}: ids {:?} != {:?}", got.ids, ids);
            for (g, (d, _)) in got.distances.iter().zip(&all[..k]) {
                ensure!(g == d, "k={k}: distance {g} != {d}");
            }
        }
    }
    ensure!(elapsed < Duration::from_secs(2), "took {elapsed:?}");
    Ok(format!("150 queries identical, {:.0} ms", elapsed.as_secs_f64() * 1e3))
}

fn c2_triangulation() -> Outcome {
    fn orient(a: GeoCoordinate, b: GeoCoordinate, p: GeoCoordinate) -> f64 {
        (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon)
    }
    fn inside(t: &[GeoCoordinate; 3], p: GeoCoordinate) -> bool {
        let s = [orient(t[0], t[1], p), orient(t[1], t[2], p), orient(t[2], t[0], p)];
        s.iter().all(|v| *v >= 0.0) || s.iter().all(|v| *v <= 0.0)
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..1000 {
        let t: [GeoCoordinate; 3] =
            std::array::from_fn(|_| GeoCoordinate { lat: 60.0 + rng.random_range(0.0..0.4), lon: 24.7 + rng.random_range(0.0..0.4) });
        let d: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..2.0));
        let w = softmax_complement_weights(d).map_err(|e| e.to_string())?;
        ensure!(inside(&t, triangulate_centroid(&t)), "triple {i}: centroid outside hull");
        ensure!(inside(&t, triangulate_weighted(&t, &w, WeightMode::Normalized)), "triple {i}: weighted point outside hull");
    }
    let w = softmax_complement_weights([0.7; 3]).map_err(|e| e.to_string())?;
    ensure!(w.w.iter().all(|x| (x - 2.0 / 3.0).abs() <= 1e-12), "equal-distance weights {:?}", w.w);
    let t = [GeoCoordinate { lat: 0.0, lon: 0.0 }, GeoCoordinate { lat: 3.0, lon: 0.0 }, GeoCoordinate { lat: 0.0, lon: 3.0 }];
    let p = triangulate_weighted(&t, &w, WeightMode::AsWritten);
    let expect = w.w[1] * 3.0 / 3.0;
    ensure!(p.lat == expect && p.lon == w.w[2] * 3.0 / 3.0, "as_written gave {p:?}");
    ensure!((p.lat - 2.0 / 3.0).abs() < 1e-12 && (p.lon - 2.0 / 3.0).abs() < 1e-12, "worked example gave {p:?}");
    Ok("1000 triples inside hull; as_written (2/3, 2/3)".into())
}

fn c3_forest() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let x = FeatureMatrix::from_rows(&rows).map_err(|e| e.to_string())?;
    let constant = vec![[60.17, 24.94]; 200];
    let model = fit_forest(&x, &constant, &ForestConfig { n_estimators: 10, ..Default::default() }).map_err(|e| e.to_string())?;
    let pred = predict_forest(&model, &x).map_err(|e| e.to_string())?;
    ensure!(pred.iter().all(|p| *p == [60.17, 24.94]), "constant target not reproduced");

    let y: Vec<Target> = rows.iter().map(|r| [r[0] + 0.5 * r[1], r[2] * r[3]]).collect();
    let cfg =
        ForestConfig { n_estimators: 5, bootstrap: false, max_depth: None, max_features: MaxFeatures::All, seed: 9, ..Default::default() };
    let pred = predict_forest(&fit_forest(&x, &y, &cfg).map_err(|e| e.to_string())?, &x).map_err(|e| e.to_string())?;
    let mae = pred.iter().zip(&y).map(|(p, t)| ((p[0] - t[0]).abs() + (p[1] - t[1]).abs()) / 2.0).sum::<f64>() / 200.0;
    ensure!(mae < 1e-9, "training MAE {mae}");

    let boot = ForestConfig { n_estimators: 20, max_features: MaxFeatures::Sqrt, seed: 4, ..Default::default() };
    let a = predict_forest(&fit_forest(&x, &y, &boot).map_err(|e| e.to_string())?, &x).map_err(|e| e.to_string())?;
    let b = predict_forest(&fit_forest(&x, &y, &boot).map_err(|e| e.to_string())?, &x).map_err(|e| e.to_string())?;
    ensure!(a == b, "same seed gave different predictions");
    Ok(format!("training MAE {mae:.1e}"))
}

fn c4_tuner() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rows: Vec<Vec<f64>> = (0..60).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y: Vec<Target> = rows.iter().map(|r| [60.0 + r[0] * 0.1, 24.0 + r[1] * 0.1]).collect();
    let x = FeatureMatrix::from_rows(&rows).map_err(|e| e.to_string())?;
    let space = ParamSpace { n_estimators: vec![5, 10, 20], max_depth: vec![Some(3), Some(6), None], ..ParamSpace::default() };
    let report = randomized_search(&x, &y, &space, 10, 3, 11).map_err(|e| e.to_string())?;
    ensure!(report.rows.len() == 10, "{} rows", report.rows.len());
    ensure!(report.rows.iter().all(|r| r.fold_mae.len() == 3), "a row lacks 3 folds");
    ensure!(report.fits == 30, "{} fits", report.fits);
    let means: Vec<f64> = report.rows.iter().map(|r| r.fold_mae.iter().sum::<f64>() / 3.0).collect();
    let argmin = (0..means.len()).fold(0, |b, i| if means[i] < means[b] { i } else { b });
    ensure!(report.best == argmin, "best {} but recomputed argmin {argmin}", report.best);
    ensure!(report.best_config() == &report.rows[argmin].config, "returned config is not the argmin row's");
    let mut csv = Vec::new();
    report.write_csv(&mut csv).map_err(|e| e.to_string())?;
    let lines = String::from_utf8(csv).map_err(|e| e.to_string())?.lines().count();
    ensure!(lines == 11, "tuning csv has {lines} lines");
    Ok(format!("10 x 3 report, best row {argmin}"))
}

fn c5_dispersion() -> Outcome {
    let start = Instant::now();
    let col = synth_collection(&SynthSpec { public: 300, indoor: 300, seed: 5, ..SynthSpec::default() });
    let split = split_public(&col.catalog, SplitSpec { train_fraction: 0.7, seed: 5 }).map_err(|e| e.to_string())?;
    let emb = &col.catalog.embeddings;
    let located: EmbeddingMap = split.train.iter().map(|id| (id.clone(), emb[id].clone())).collect();
    let coords: HashMap<String, GeoCoordinate> =
        split.train.iter().map(|id| (id.clone(), col.catalog.records[id].coordinate.unwrap())).collect();
    let queries: EmbeddingMap = col.hidden.keys().map(|id| (id.clone(), emb[id].clone())).collect();
    let spread = |method| -> Result<f64, String> {
        let opts = LocateOptions { method, forest: ForestConfig { seed: 5, ..Default::default() }, ..Default::default() };
        let p = assign_fictional_coordinates(&queries, &located, &coords, &opts).map_err(|e| e.to_string())?;
        dispersion(&p.iter().map(|x| x.coordinate).collect::<Vec<_>>()).map_err(|e| e.to_string())
    };
    let (sim, forest) = (spread(Method::Similar)?, spread(Method::Forest)?);
    let elapsed = start.elapsed();
    ensure!(sim >= 2.0 * forest, "similarity {sim:.4} vs forest {forest:.4}");
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("similarity {sim:.4} vs forest {forest:.4}, ratio {:.2}", sim / forest))
}

fn gray(w: u32, h: u32, f: impl Fn(u32, u32) -> u8) -> GrayImage {
    GrayImage::from_fn(w, h, |x, y| Luma([f(x, y)]))
}

fn c6_ssim() -> Outcome {
    let p = SsimParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let base = gray(64, 48, |x, y| ((x * 7 + y * 3) % 200 + 20) as u8);
    let s = ssim(&base, &base, &p).map_err(|e| e.to_string())?;
    ensure!((s - 1.0).abs() <= 1e-9, "ssim(x,x) = {s}");
    let (a, b) = (100.0f64, 140.0f64);
    let c1 = (0.01f64 * 255.0).powi(2);
    let expect = (2.0 * a * b + c1) / (a * a + b * b + c1);
    let got = ssim(&gray(32, 32, |_, _| 100), &gray(32, 32, |_, _| 140), &p).map_err(|e| e.to_string())?;
    ensure!((got - expect).abs() <= 1e-6, "constant pair {got} vs closed form {expect}");
    let noise: Vec<f64> = (0..64 * 48).map(|_| rng.random_range(-1.0..1.0)).collect();
    let noisy = |amp: f64| {
        gray(64, 48, |x, y| (f64::from(base.get_pixel(x, y)[0]) + amp * noise[(y * 64 + x) as usize]).round().clamp(0.0, 255.0) as u8)
    };
    let scores: Vec<f64> = [5.0, 20.0, 60.0].iter().map(|&a| ssim(&base, &noisy(a), &p).unwrap()).collect();
    ensure!(scores[0] > scores[1] && scores[1] > scores[2], "not monotone: {scores:?}");
    let other = noisy(30.0);
    ensure!(ssim(&base, &other, &p).unwrap() == ssim(&other, &base, &p).unwrap(), "asymmetric");
    Ok(format!("noise scores {:.3} > {:.3} > {:.3}", scores[0], scores[1], scores[2]))
}

fn c7_canny_hog() -> Outcome {
    let cp = CannyParams::default();
    let flat = gray(64, 32, |_, _| 90);
    ensure!(canny(&flat, &cp).unwrap().pixels().all(|p| p[0] == 0), "edges on a constant image");
    let d = hog(&flat).map_err(|e| e.to_string())?;
    ensure!(d.values.iter().all(|v| *v == 0.0), "non-zero descriptor on a constant image");
    ensure!(d.values.len() == 64, "64x32 descriptor has {} values", d.values.len());

    // square occupying [20, 44)^2: every edge pixel within one pixel of the
    // boundary, every boundary position covered on each side
    let sq = gray(64, 64, |x, y| if (20..44).contains(&x) && (20..44).contains(&y) { 220 } else { 30 });
    let e = canny(&sq, &cp).map_err(|e| e.to_string())?;
    let on = |x: i64, y: i64| e.get_pixel(x as u32, y as u32)[0] == 255;
    let dist_to_ring = |x: i64, y: i64| {
        let dx = if (19..=44).contains(&y) { (x - 19).abs().min((x - 20).abs()).min((x - 43).abs()).min((x - 44).abs()) } else { 99 };
        let dy = if (19..=44).contains(&x) { (y - 19).abs().min((y - 20).abs()).min((y - 43).abs()).min((y - 44).abs()) } else { 99 };
        dx.min(dy)
    };
    let mut edges = 0;
    for y in 0..64 {
        for x in 0..64 {
            if on(x, y) {
                edges += 1;
                ensure!(dist_to_ring(x, y) <= 1, "stray edge at ({x}, {y})");
            }
        }
    }
    for t in 22..42 {
        ensure!((18..=21).any(|x| on(x, t)) && (42..=45).any(|x| on(x, t)), "vertical side missing at row {t}");
        ensure!((18..=21).any(|y| on(t, y)) && (42..=45).any(|y| on(t, y)), "horizontal side missing at column {t}");
    }

    let stripes = gray(64, 64, |x, _| if (x / 4) % 2 == 0 { 40 } else { 210 });
    let rotated = gray(64, 64, |_, y| if (y / 4) % 2 == 0 { 40 } else { 210 });
    let cross = hog_similarity(&stripes, &rotated).map_err(|e| e.to_string())?;
    let own = hog_similarity(&stripes, &stripes).map_err(|e| e.to_string())?;
    ensure!(cross <= 0.6, "stripes vs rotated stripes {cross}");
    ensure!((own - 1.0).abs() < 1e-12, "self similarity {own}");
    Ok(format!("{edges} ring pixels; rotated stripes {cross:.3}"))
}

const FIXTURE: [&str; 16] = [
    "synth",
    "--public",
    "12",
    "--indoor",
    "20",
    "--dim",
    "8",
    "--box-deg",
    "0.01",
    "--sea-fraction",
    "0.3",
    "--pano-width",
    "64",
    "--out",
    "",
    "",
];

/// Synthetic fixture plus a full mock run; returns the manifest digest.
fn mock_run(dir: &Path) -> Result<String, String> {
    let fx = dir.join("fx");
    let run = dir.join("run");
    let (fx_s, run_s) = (fx.to_str().unwrap(), run.to_str().unwrap());
    let mut synth: Vec<&str> = FIXTURE[..14].to_vec();
    synth.push(fx_s);
    cli(&[&["--seed", "8"], synth.as_slice()].concat())?;
    let common = ["--seed", "8", "--run-dir", run_s, "--jobs", "3"];
    let emb = fx.join("embeddings.emb");
    let cat = fx.join("catalog.csv");
    cli(&[&common[..], &["ingest", "--catalog", cat.to_str().unwrap(), "--embeddings", emb.to_str().unwrap()]].concat())?;
    cli(&[&common[..], &["locate", "--method", "similar-weighted"]].concat())?;
    let (sv, fb) = (fx.join("streetview"), fx.join("fallbacks"));
    cli(&[&common[..], &["fetch", "--mock-dir", sv.to_str().unwrap(), "--fallbacks", fb.to_str().unwrap()]].concat())?;
    cli(&[&common[..], &["stylize", "--upscale", "2"]].concat())?;
    let bytes = std::fs::read(run.join("manifest.jsonl")).map_err(|e| e.to_string())?;
    Ok(ncity_core::seed::sha256_hex(&bytes))
}

fn c8_pipeline() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (da, db) = (mock_run(a.path())?, mock_run(b.path())?);
    ensure!(da == db, "manifest digests differ: {da} vs {db}");
    let entries = read_manifest(&a.path().join("run/manifest.jsonl")).map_err(|e| e.to_string())?;
    ensure!(entries.len() == 20, "{} manifest entries", entries.len());
    for e in &entries {
        for name in ["art", "art_up"] {
            let img = image::open(a.path().join("run").join(&e.asset(name).unwrap().file)).map_err(|e| e.to_string())?.to_rgb8();
            let (w, h) = img.dimensions();
            let diff: u64 = (0..h)
                .flat_map(|y| (0..3).map(move |c| (y, c)))
                .map(|(y, c)| u64::from(img.get_pixel(0, y)[c].abs_diff(img.get_pixel(w - 1, y)[c])))
                .sum();
            let seam = diff as f64 / (255.0 * 3.0 * f64::from(h));
            ensure!(seam <= 2.0 / 255.0, "{} {name}: seam {seam}", e.artwork_id);
        }
    }

    let depth = DepthMap::normalize(64, 32, &(0..64 * 32).map(|i| ((i % 64) as f32 / 63.0) + 0.1).collect::<Vec<_>>())
        .map_err(|e| e.to_string())?;
    let req = GenerationRequest::new("harbour at dusk", depth, 3);
    let here = GeoCoordinate { lat: 60.17, lon: 24.94 };
    match generate_art_panorama(&req, "x", here, &MockGenerator::non_tiling(), DEFAULT_SEAM_TOLERANCE) {
        Err(StylizeError::SeamViolation { found, .. }) => ensure!(found > DEFAULT_SEAM_TOLERANCE, "violation below tolerance"),
        other => return Err(format!("non-tiling backend gave {:?}", other.map(|_| ()))),
    }

    let fx = a.path().join("fx");
    // southern edge of the box: open water, over 300 m from the first street row
    let sea = GeoCoordinate { lat: 60.05 + 0.0001, lon: 24.75 + 0.005 };
    let sv = MockStreetView::from_dir(&fx.join("streetview")).map_err(|e| e.to_string())?;
    ensure!(
        matches!(fetch_panorama(sea, &FetchPolicy::default(), &sv), Err(PanoramaError::FallbackNeeded { .. })),
        "open sea coordinate found a street view panorama"
    );
    let lib = FallbackLibrary::load_dir(&fx.join("fallbacks")).map_err(|e| e.to_string())?;
    let pano = select_fallback(sea, &lib, 8).map_err(|e| e.to_string())?;
    ensure!(pano.source == PanoramaSource::FallbackSea, "fallback source {:?}", pano.source);
    ensure!(pano.width() == 2 * pano.height(), "fallback is {}x{}", pano.width(), pano.height());
    let svg = a.path().join("map.svg");
    export_map(&[here], &[here, sea], &[false, true], &svg).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(&svg).map_err(|e| e.to_string())?;
    ensure!(text.matches(r#"fill="green""#).count() == 1, "sea point is not drawn green");
    Ok(format!("digest {}...; seams within 2/255; sea fallback green", &da[..12]))
}

fn feed_items(n: usize) -> IndexMap<String, FeedItem> {
    (0..n)
        .map(|i| {
            let id = format!("a{i}");
            let item = FeedItem {
                id: id.clone(),
                title: format!("Work {i}"),
                artist: "Anon".into(),
                coordinate: GeoCoordinate { lat: 60.16 + i as f64 * 0.001, lon: 24.93 },
                method: Some("similar".into()),
                source: Some("street_view".into()),
                art_panorama_url: None,
            };
            (id, item)
        })
        .collect()
}

fn open_feed(dir: &Path, clock: Arc<ManualClock>) -> ncity_server::Feed {
    let items = feed_items(8);
    let ids: Vec<String> = items.keys().cloned().collect();
    let t0 = Utc.with_ymd_and_hms(2024, 3, 1, 10, 0, 0).unwrap();
    let schedule = RevealSchedule::new(&ids, 9, chrono::Duration::minutes(30), 1, t0).unwrap();
    ncity_server::Feed::open(items, schedule, StateStore::new(dir.join("state.json")), clock, None).unwrap()
}

fn c9_feed() -> Outcome {
    let t0 = Utc.with_ymd_and_hms(2024, 3, 1, 10, 0, 0).unwrap();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let clock = Arc::new(ManualClock::new(t0));
    let feed = Arc::new(open_feed(dir.path(), clock.clone()));
    clock.advance(chrono::Duration::minutes(90));
    let added = feed.advance().map_err(|e| e.to_string())?;
    ensure!(added == 3, "{added} reveals after three intervals");
    let before = feed.snapshot();
    ensure!(feed.advance().map_err(|e| e.to_string())? == 0 && feed.snapshot() == before, "repeated tick changed state");

    let rt = tokio::runtime::Builder::new_current_thread().build().map_err(|e| e.to_string())?;
    let (status, body) = rt.block_on(async {
        let resp = ncity_server::router(feed.clone()).oneshot(Request::get("/city").body(Body::empty()).unwrap()).await.unwrap();
        (resp.status(), resp.into_body().collect().await.unwrap().to_bytes())
    });
    ensure!(status == StatusCode::OK, "/city returned {status}");
    let v: serde_json::Value = serde_json::from_slice(&body).map_err(|e| e.to_string())?;
    ensure!(validate_feature_collection(&v) == Ok(3), "/city is not a 3-feature collection: {v}");

    drop(feed);
    clock.advance(chrono::Duration::minutes(47));
    let restarted = open_feed(dir.path(), clock.clone()).snapshot();
    let other = tempfile::tempdir().map_err(|e| e.to_string())?;
    let continuous = open_feed(other.path(), Arc::new(ManualClock::new(t0 + chrono::Duration::minutes(137)))).snapshot();
    ensure!(restarted == continuous, "restart diverged from a continuous run");
    Ok(format!("{} revealed after restart", restarted.state.revealed.len()))
}

fn c10_evaluate() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    mock_run(dir.path())?;
    let run = dir.path().join("run");
    cli(&["--seed", "8", "--run-dir", run.to_str().unwrap(), "--jobs", "2", "evaluate"])?;
    let pairs = std::fs::read_to_string(run.join("pairs.csv")).map_err(|e| e.to_string())?;
    let summary = std::fs::read_to_string(run.join("summary.csv")).map_err(|e| e.to_string())?;
    let mut cols: [Vec<f64>; 3] = Default::default();
    for line in pairs.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        ensure!(f.len() == 4, "pairs row `{line}`");
        for (c, v) in cols.iter_mut().zip(&f[1..]) {
            c.push(v.parse().map_err(|_| format!("bad number `{v}`"))?);
        }
    }
    let lines: Vec<&str> = summary.lines().collect();
    ensure!(lines.len() == 4 && lines[0] == "metric,mean,std,min,max", "summary shape: {lines:?}");
    for (line, values) in lines[1..].iter().zip(&cols) {
        let f: Vec<&str> = line.split(',').collect();
        ensure!(f.len() == 5, "summary row `{line}`");
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (got, want) in f[1..].iter().zip([mean, std, min, max]) {
            let got: f64 = got.parse().map_err(|_| format!("bad number `{got}`"))?;
            ensure!((got - want).abs() <= 1e-9, "{}: {got} vs recomputed {want}", f[0]);
        }
    }
    let names: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    ensure!(names == ["SSIM", "SSIM Edges", "HOG (8)"], "metric rows {names:?}");
    Ok(format!("3 metrics x 4 statistics over {} pairs", cols[0].len()))
}
