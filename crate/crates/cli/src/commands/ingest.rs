use std::path::Path;

use ncity_core::catalog::{concat_embedding, decode_embeddings, encode_embeddings, load_catalog, peek_dim, write_catalog, EmbeddingMap};
use ncity_core::raster::write_atomic;
use ncity_core::seed::sha256_hex;
use serde_json::json;

use crate::{CliError, IngestArgs, RunDir, Settings, StageExt};

const STAGE: &str = "ingest";

fn read_table(path: &Path) -> Result<EmbeddingMap, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::stage(STAGE, format!("{}: {e}", path.display())))?;
    let dim = peek_dim(&bytes).map_err(|e| CliError::stage(STAGE, format!("{}: {e}", path.display())))?;
    decode_embeddings(&bytes, dim).map_err(|e| CliError::stage(STAGE, format!("{}: {e}", path.display())))
}

pub fn ingest(s: &Settings, run: &RunDir, a: &IngestArgs) -> Result<(), CliError> {
    let catalog = load_catalog(&a.catalog).map_err(|e| CliError::stage(STAGE, format!("{}: {e}", a.catalog.display())))?;
    let embeddings = match (&a.embeddings, &a.image_embeddings, &a.text_embeddings) {
        (Some(p), None, None) => read_table(p)?,
        (None, Some(img), Some(txt)) => {
            let (img, txt) = (read_table(img)?, read_table(txt)?);
            img.iter()
                .map(|(id, v)| {
                    let t = txt.get(id).ok_or_else(|| CliError::stage(STAGE, format!("no text embedding for `{id}`")))?;
                    Ok((id.clone(), concat_embedding(v, t).stage(STAGE)?))
                })
                .collect::<Result<_, CliError>>()?
        }
        _ => return Err(CliError::Usage("give --embeddings, or both --image-embeddings and --text-embeddings".into())),
    };
    let catalog = catalog.with_embeddings(embeddings).stage(STAGE)?;
    if catalog.records.is_empty() {
        return Err(CliError::stage(STAGE, "catalog has no records"));
    }
    let dim = catalog.embeddings.values().next().map_or(0, |v| v.dim());
    let mut csv = Vec::new();
    write_catalog(&catalog, &mut csv).stage(STAGE)?;
    let emb = encode_embeddings(&catalog.embeddings, dim).stage(STAGE)?;

    let same = std::fs::read(run.catalog()).ok().as_ref() == Some(&csv) && std::fs::read(run.embeddings()).ok().as_ref() == Some(&emb);
    if same {
        println!("ingest: {} already holds this catalog", run.root().display());
        return Ok(());
    }
    if run.catalog().exists() && !a.force {
        return Err(CliError::stage(
            STAGE,
            format!("{} already holds a different catalog; use another --run-id or pass --force", run.root().display()),
        ));
    }
    let summary = json!({
        "records": catalog.records.len(),
        "public": catalog.public_count(),
        "indoor": catalog.indoor_count(),
        "dim": dim,
        "catalog_sha256": sha256_hex(&csv),
        "embeddings_sha256": sha256_hex(&emb),
    });
    if s.dry_run {
        println!("would write catalog.csv, embeddings.emb and ingest.json to {}: {summary}", run.root().display());
        return Ok(());
    }
    write_atomic(&run.catalog(), &csv).stage(STAGE)?;
    write_atomic(&run.embeddings(), &emb).stage(STAGE)?;
    run.write_json(&run.path("ingest.json"), &summary, STAGE)?;
    run.record_stage(&s.run_id, s.seed, STAGE, s.seed, &summary)?;
    println!(
        "ingested {} records ({} public, {} indoor), embedding dim {dim}, into {}",
        catalog.records.len(),
        catalog.public_count(),
        catalog.indoor_count(),
        run.root().display()
    );
    Ok(())
}
