//! Writes the bundled fixture: a synthetic catalog, an evaluation set and a
//! judge cassette answering every judged request in that set.
//!
//! cargo run -p autocut-core --example make_fixture -- <dir>

use std::path::PathBuf;

use autocut_core::catalog::save_catalog;
use autocut_core::evaluation::report::{mss_request, sq_request, vsc_requests};
use autocut_core::evaluation::{Cassette, EvalSet, MusicItem, OrderingSample, ScriptItem, SelectionSample};
use autocut_core::synthetic::{synthetic_catalog, CatalogSpec};
use autocut_core::Catalog;

fn main() -> autocut_core::Result<()> {
    let dir: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "fixture".into()).into();
    let spec = CatalogSpec {
        ads: 12,
        low_relevance_every: Some(6),
        ..CatalogSpec::default()
    };
    let catalog: Catalog = synthetic_catalog(&spec)?;
    save_catalog(&catalog, &dir.join("catalog"))?;

    let mut set = EvalSet::default();
    let tracks = catalog.bgm_tracks();
    for (a, ad) in catalog.records.iter().enumerate() {
        let ids: Vec<String> = ad.clips.iter().map(|c| c.clip_id.clone()).collect();
        // predictions drift from the reference in a fixed pattern
        let mut predicted = ids.clone();
        if a % 3 == 1 {
            predicted.reverse();
        }
        if a % 4 == 2 {
            predicted.pop();
        }
        set.selection.push(SelectionSample {
            predicted: predicted.clone(),
            positives: ids.clone(),
        });
        set.ordering.push(OrderingSample {
            predicted,
            reference: ids,
        });
        let mut generated = ad.script_lines.clone();
        if a % 2 == 0 {
            generated[0] = format!("{} now", generated[0]);
        }
        set.scripts.push(ScriptItem {
            photo_id: ad.photo_id.clone(),
            product: ad.product.clone(),
            generated,
            reference: ad.script_lines.clone(),
            frames: ad.clips.iter().map(|c| c.frame_keys[0].clone()).collect(),
        });
        set.music.push(MusicItem {
            photo_id: ad.photo_id.clone(),
            predicted: tracks[(a + a % 2) % tracks.len()].clone(),
            reference: ad.bgm_id.clone().unwrap_or_default(),
        });
    }
    let text = serde_json::to_string_pretty(&set)? + "\n";
    std::fs::write(dir.join("eval_set.json"), text).map_err(|e| autocut_core::Error::io(&dir, e))?;

    let cassette_path = dir.join("cassette.jsonl");
    let _ = std::fs::remove_file(&cassette_path);
    let cassette = Cassette::open(&cassette_path)?;
    let (vsc, _) = vsc_requests(&set.scripts);
    for (i, r) in vsc.iter().enumerate() {
        // one unparseable reply exercises the exclusion path
        let reply = if i == 3 { "probably relevant".to_string() } else { ((i * 7 % 5).min(2)).to_string() };
        cassette.record(r, &reply)?;
    }
    for (i, item) in set.scripts.iter().enumerate() {
        let (l, s, t) = (18 + i % 10, 25 + i % 12, 15 + i % 9);
        let reply = format!(
            "{{\"language\": {l}, \"selling_points\": {s}, \"timing\": {t}, \"total\": {}, \"justification\": \"fixture\"}}",
            l + s + t
        );
        cassette.record(&sq_request(item), &reply)?;
    }
    for (i, item) in set.music.iter().enumerate() {
        let score = if item.predicted == item.reference { 0.9 } else { 0.25 + 0.05 * (i % 5) as f64 };
        cassette.record(&mss_request(item), &format!("tempo and mood compared\n{score:.2}"))?;
    }
    println!("fixture written to {} ({} judge replies)", dir.display(), cassette.len());
    Ok(())
}
