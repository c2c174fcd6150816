use autocut_core::catalog::{
    dataset_stats, filter_records, load_catalog, save_catalog, AdRecord, ClipRecord, Engagement, FilterConfig,
    LoadOptions, ProductInfo, RelevanceRule,
};
use autocut_core::error::ErrorKind;
use autocut_core::retrieval::{encode_clip_id, encode_frame_id};
use autocut_core::synthetic::{synthetic_catalog, CatalogSpec};
use autocut_core::Catalog;
use proptest::prelude::*;

fn clip(photo: &str, start: u32, duration: u32, score: Option<u8>) -> ClipRecord {
    ClipRecord {
        clip_id: encode_clip_id(photo, start, duration).unwrap(),
        photo_id: photo.into(),
        start_frame: start,
        duration,
        script_line: format!("line at {start}"),
        frame_keys: (start..start + duration).map(|f| encode_frame_id(photo, f).unwrap()).collect(),
        relevance_score: score,
        polarity: None,
    }
}

fn ad(photo: &str, durations: &[u32], score: u8) -> AdRecord {
    let mut start = 0;
    let mut clips = Vec::new();
    for &d in durations {
        clips.push(clip(photo, start, d, Some(score)));
        start += d;
    }
    AdRecord {
        photo_id: photo.into(),
        product: ProductInfo {
            category: "food".into(),
            brand: "Kite".into(),
            name: "crackers".into(),
            selling_points: "crisp".into(),
        },
        script_lines: clips.iter().map(|c| c.script_line.clone()).collect(),
        clips,
        bgm_id: None,
        video_duration: start as f64,
        engagement: Some(Engagement {
            ctr: 0.05,
            like_rate: 0.01,
        }),
        lyrics_or_no_speech: false,
    }
}

#[test]
fn three_ads_with_forty_frames_round_trip() {
    // durations chosen by hand to total 40 frames
    let spec = CatalogSpec {
        ads: 3,
        clips_per_ad: (2, 2),
        clip_seconds: (2, 6),
        seed: 4,
        ..CatalogSpec::default()
    };
    let catalog: Catalog = synthetic_catalog(&spec).unwrap();
    let frames: u32 = catalog.records.iter().flat_map(|r| &r.clips).map(|c| c.duration).sum();
    assert_eq!(catalog.video.rows(), frames as usize);

    let dir = tempfile::tempdir().unwrap();
    save_catalog(&catalog, dir.path()).unwrap();
    let loaded: Catalog = load_catalog(dir.path(), LoadOptions::default()).unwrap();
    assert_eq!(loaded.records.len(), 3);
    assert_eq!(loaded.records, catalog.records, "records");
    assert_eq!(loaded.video, catalog.video, "video");
    assert_eq!(loaded.audio, catalog.audio, "audio");
}

#[test]
fn load_rejects_wrong_dimension_and_missing_files() {
    let catalog: Catalog = synthetic_catalog(&CatalogSpec::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_catalog(&catalog, dir.path()).unwrap();
    let wrong = LoadOptions {
        video_dim: Some(64),
        audio_dim: None,
    };
    let err = load_catalog::<f32>(dir.path(), wrong).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);
    std::fs::remove_file(dir.path().join("video.keys")).unwrap();
    assert!(load_catalog::<f32>(dir.path(), LoadOptions::default()).is_err());
    assert!(load_catalog::<f32>(&dir.path().join("absent"), LoadOptions::default()).is_err());
}

#[test]
fn dangling_references_are_rejected() {
    let catalog: Catalog = synthetic_catalog(&CatalogSpec::default()).unwrap();
    let mut records = catalog.records.clone();
    records[0].bgm_id = Some("bgm999".into());
    let dir = tempfile::tempdir().unwrap();
    save_catalog(&catalog, dir.path()).unwrap();
    autocut_core::catalog::io::write_records(&dir.path().join("catalog.jsonl"), &records).unwrap();
    assert!(load_catalog::<f32>(dir.path(), LoadOptions::default()).is_err());
}

#[test]
fn whitespace_variants_deduplicate_to_one() {
    let a = ad("11", &[3, 3], 5);
    let mut b = ad("12", &[3, 3], 5);
    b.script_lines = a.script_lines.iter().map(|l| format!("  {}\t", l.replace(' ', "   "))).collect();
    b.product = a.product.clone();
    let (kept, report) = filter_records(&[a, b], &FilterConfig::sft()).unwrap();
    assert_eq!(kept.len(), 1);
    assert_eq!(report.rejected.dedup, 1);
}

#[test]
fn each_rule_attributes_its_rejections() {
    let mut speechless = ad("1", &[3], 5);
    speechless.lyrics_or_no_speech = true;
    let long = ad("2", &[60, 60], 5); // exactly 120 s is rejected by the strict bound
    let short_clip = ad("3", &[1, 4], 5);
    let low = ad("4", &[3, 3, 3, 3, 3], 3);
    let mut mostly_good = ad("5", &[3, 3, 3, 3, 3], 5);
    mostly_good.clips[0].relevance_score = Some(2); // 4 of 5 good meets 0.8
    let ok = ad("6", &[4, 5], 4);
    let config = FilterConfig {
        no_speech: true,
        ..FilterConfig::sft()
    };
    let (kept, report) = filter_records(&[speechless, long, short_clip, low, mostly_good, ok], &config).unwrap();
    let ids: Vec<&str> = kept.iter().map(|r| r.photo_id.as_str()).collect();
    assert_eq!(ids, ["5", "6"]);
    let r = &report.rejected;
    assert_eq!((r.no_speech, r.duration, r.clip_length, r.relevance, r.dedup), (1, 1, 1, 1, 0));
}

#[test]
fn relevance_rule_without_scores_is_an_error() {
    let mut a = ad("7", &[3], 5);
    a.clips[0].relevance_score = None;
    let config = FilterConfig {
        relevance: Some(RelevanceRule::default()),
        ..FilterConfig::sft()
    };
    assert!(filter_records(&[a], &config).is_err());
}

#[test]
fn stats_histogram_matches_hand_tally() {
    // clips per video: 2, 3, 5 -> bins [0,2) 0, [2,4) 2, [4,6) 1
    // clip durations: 2,3 | 1,1,1 | 10,10,10,10,10 -> [0,2) 3, [2,5) 2, [5,10) 0, [10,20) 5
    let records = [ad("1", &[2, 3], 5), ad("2", &[1, 1, 1], 5), ad("3", &[10; 5], 5)];
    let stats = dataset_stats(&records);
    let counts = |s: &autocut_core::catalog::stats::Summary| s.histogram.iter().map(|b| b.count).collect::<Vec<_>>();
    assert_eq!(counts(&stats.clips_per_video), [0, 2, 1, 0, 0, 0, 0, 0]);
    assert_eq!(counts(&stats.clip_duration), [3, 2, 0, 5, 0, 0, 0]);
    assert_eq!(stats.clips_per_video.median, 3.0);
    assert_eq!(stats.video_duration.mean, (5.0 + 3.0 + 50.0) / 3.0);
    // "line at 0" is three words
    assert_eq!(stats.clip_text_length.min, 3.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kept_plus_rejected_equals_input(
        specs in prop::collection::vec((prop::collection::vec(1u32..70, 1..6), 1u8..=5, any::<bool>()), 0..20),
        engagement in prop::option::of(0.05f64..1.0),
    ) {
        let records: Vec<AdRecord> = specs
            .iter()
            .enumerate()
            .map(|(i, (d, s, speech))| {
                let mut r = ad(&(100 + i).to_string(), d, *s);
                r.lyrics_or_no_speech = *speech;
                r.engagement = Some(Engagement { ctr: i as f64 * 0.01, like_rate: (20 - i) as f64 * 0.001 });
                r
            })
            .collect();
        let config = FilterConfig { no_speech: true, engagement_top: engagement, ..FilterConfig::sft() };
        let (kept, report) = filter_records(&records, &config).unwrap();
        prop_assert_eq!(report.input_count, records.len());
        prop_assert_eq!(report.kept_count, kept.len());
        prop_assert_eq!(kept.len() + report.rejected.total(), records.len());
    }
}
