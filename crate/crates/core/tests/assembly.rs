use std::collections::BTreeMap;

use autocut_core::assembly::segment::continuity_ranges;
use autocut_core::assembly::{
    assemble_edl, baseline_select, baseline_sort, render_commands, segment_by_continuity, srt_time, subtitles,
    EditMode, Editor, PredictorPlan, RenderNames, Segment, SegmentConfig, SegmentMap, Strategy,
};
use autocut_core::quantizer::{train_quantizer, QuantizerConfig, QuantizerMode};
use autocut_core::retrieval::{IndexMode, IndexSet, MediaId, MediaKind};
use autocut_core::synthetic::{synthetic_catalog, CatalogSpec};
use autocut_core::Catalog;
use proptest::prelude::*;

fn catalog(ads: usize) -> Catalog {
    synthetic_catalog(&CatalogSpec {
        ads,
        ..CatalogSpec::default()
    })
    .unwrap()
}

fn segment(photo: &str, start: usize, end: usize) -> Segment<f32> {
    Segment {
        photo_id: photo.into(),
        start_frame: start,
        end_frame: end,
        fps: 1.0,
        mean_embedding: vec![0.0; 4],
    }
}

fn plan_of(ad: &autocut_core::catalog::AdRecord) -> PredictorPlan {
    PredictorPlan {
        selected: ad.clips.iter().map(|c| c.clip_id.clone()).collect(),
        script: ad.script_lines.clone(),
        bgm_tokens: None,
    }
}

#[test]
fn by_frame_entries_follow_the_clip_bounds() {
    let cat = catalog(3);
    let ad = &cat.records[1];
    let edl = assemble_edl(&plan_of(ad), None, &cat, &SegmentMap::new(), Strategy::ByFrame).unwrap();
    let mut cursor = 0.0;
    for (e, c) in edl.entries.iter().zip(&ad.clips) {
        assert_eq!((e.in_time, e.out_time), (c.start_frame as f64, (c.start_frame + c.duration) as f64));
        assert_eq!(e.subtitle_start, cursor);
        cursor += c.duration as f64;
    }
    assert_eq!(edl.total_duration(), cursor);
}

#[test]
fn by_clip_cuts_the_segment_holding_the_clip_start() {
    let cat = catalog(2);
    let ad = &cat.records[0];
    let clip = &ad.clips[0];
    let start = clip.start_frame as usize;
    // a 9 s segment beginning 2 s before the clip
    let lo = start.saturating_sub(2);
    let mut segments = SegmentMap::new();
    segments.insert(ad.photo_id.clone(), vec![segment(&ad.photo_id, lo, lo + 9)]);
    let plan = PredictorPlan {
        selected: vec![clip.clip_id.clone()],
        script: vec!["one line".into()],
        bgm_tokens: None,
    };
    let edl = assemble_edl(&plan, None, &cat, &segments, Strategy::ByClip).unwrap();
    let e = &edl.entries[0];
    assert_eq!(e.in_time, lo as f64);
    assert_eq!(e.out_time, ((lo + 9) as f64).min(ad.video_duration));
    // no segment holds the start
    segments.insert(ad.photo_id.clone(), vec![segment(&ad.photo_id, start + 1, start + 9)]);
    assert!(assemble_edl(&plan, None, &cat, &segments, Strategy::ByClip).is_err());
}

#[test]
fn plans_and_edls_are_checked() {
    let cat = catalog(2);
    let ad = &cat.records[0];
    let mut plan = plan_of(ad);
    plan.script.pop();
    assert!(assemble_edl(&plan, None, &cat, &SegmentMap::new(), Strategy::ByFrame).is_err());
    let mut plan = plan_of(ad);
    plan.selected[0] = "99990000001".into();
    assert!(assemble_edl(&plan, None, &cat, &SegmentMap::new(), Strategy::ByFrame).is_err());
    let bgm = Some(MediaId::parse(MediaKind::Clip, &ad.clips[0].clip_id).unwrap());
    assert!(assemble_edl(&plan_of(ad), bgm, &cat, &SegmentMap::new(), Strategy::ByFrame).is_err());
    let mut edl = assemble_edl(&plan_of(ad), None, &cat, &SegmentMap::new(), Strategy::ByFrame).unwrap();
    edl.entries[0].out_time = ad.video_duration + 1.0;
    assert!(edl.validate().is_err());
}

#[test]
fn subtitles_and_commands_cover_every_entry() {
    let cat = catalog(2);
    let ad = &cat.records[0];
    let bgm = ad.bgm_id.as_deref().map(|b| MediaId::parse(MediaKind::Audio, b).unwrap());
    let edl = assemble_edl(&plan_of(ad), bgm.clone(), &cat, &SegmentMap::new(), Strategy::ByFrame).unwrap();
    let srt = subtitles(&edl);
    assert!(srt.starts_with("1\n00:00:00,000 --> "));
    assert_eq!(srt.matches(" --> ").count(), ad.clips.len());
    let mut paths = BTreeMap::from([(ad.photo_id.clone(), format!("media/{}.mp4", ad.photo_id))]);
    assert!(render_commands(&edl, &paths, &RenderNames::default()).is_err(), "bgm path missing");
    paths.insert(bgm.unwrap().to_string(), "music/track.m4a".into());
    let cmds = render_commands(&edl, &paths, &RenderNames::default()).unwrap();
    assert_eq!(cmds.lines().count(), ad.clips.len() + 2);
    assert!(cmds.contains(&format!("concat=n={}", ad.clips.len())));
    assert!(cmds.contains("\"music/track.m4a\""));
    assert_eq!(srt_time(59.9995), "00:01:00,000");
    assert_eq!(srt_time(-1.0), "00:00:00,000");
}

#[test]
fn short_blips_merge_into_the_more_similar_neighbour() {
    let cfg = SegmentConfig {
        min_len: 3,
        ..SegmentConfig::default()
    };
    // 12 frames; cut after frame 5 is real, the lone drop at 8 leaves a 2-frame tail
    let mut sims = vec![0.99; 11];
    sims[5] = 0.1;
    sims[9] = 0.2;
    assert_eq!(continuity_ranges(&sims, &cfg), [(0, 6), (6, 12)]);
    // identical frames never split
    let a = [1.0f32, 0.0];
    let frames = vec![&a[..]; 25];
    let segs = segment_by_continuity("5", &frames, &SegmentConfig::default()).unwrap();
    assert_eq!(segs.len(), 1);
    assert_eq!((segs[0].start_frame, segs[0].end_frame), (0, 25));
    assert!(segment_by_continuity::<f32>("5", &[], &SegmentConfig::default()).is_err());
    let bad = SegmentConfig {
        fps: 0.0,
        ..SegmentConfig::default()
    };
    assert!(segment_by_continuity("5", &frames, &bad).is_err());
}

#[test]
fn baselines_break_ties_by_time() {
    let cat = catalog(3);
    let mut clips: Vec<_> = cat.records.iter().flat_map(|r| r.clips.clone()).collect();
    for c in &mut clips {
        c.relevance_score = Some(3);
    }
    clips.reverse();
    let picked = baseline_select(&clips, 2).unwrap();
    // earliest two, in temporal order
    let ids: Vec<&str> = picked.iter().map(|&i| clips[i].clip_id.as_str()).collect();
    assert_eq!(ids, [cat.records[0].clips[0].clip_id.as_str(), cat.records[0].clips[1].clip_id.as_str()]);
    assert!(baseline_select(&clips, clips.len() + 1).is_err());
    let order = baseline_sort(&clips).unwrap();
    assert_eq!(order[0], clips.len() - 1);
    assert!(baseline_sort(&[]).is_err());
}

#[test]
fn editor_output_closes_over_the_catalog() {
    let spec = CatalogSpec {
        ads: 10,
        ..CatalogSpec::default()
    };
    let cat: Catalog = synthetic_catalog(&spec).unwrap();
    let mut v = QuantizerConfig::video().with_mode(QuantizerMode::RawRvq);
    v.input_dim = spec.video_dim;
    v.codebook_dim = spec.video_dim;
    v.codebook_size = 16;
    let mut a = QuantizerConfig::audio().with_mode(QuantizerMode::RawRvq);
    a.input_dim = spec.audio_dim;
    a.codebook_dim = spec.audio_dim;
    a.codebook_size = 8;
    let vq = train_quantizer(&cat.video, &v).unwrap();
    let aq = train_quantizer(cat.audio.as_ref().unwrap(), &a).unwrap();
    let indexes = IndexSet::build(&cat, IndexMode::Flat, 0).unwrap();
    let editor = Editor {
        catalog: &cat,
        indexes: &indexes,
        video_quantizer: &vq,
        audio_quantizer: Some(&aq),
        segment_config: SegmentConfig {
            fps: 1.0,
            min_len: 2,
            ..SegmentConfig::default()
        },
    };
    let all_clips: Vec<&str> = cat.records.iter().flat_map(|r| &r.clips).map(|c| c.clip_id.as_str()).collect();
    for ad in &cat.records {
        for mode in [EditMode::ScriptDriven, EditMode::FootageDriven] {
            for strategy in [Strategy::ByFrame, Strategy::ByClip] {
                let r = editor.edit(&ad.photo_id, mode, strategy).unwrap();
                r.edl.validate().unwrap();
                assert_eq!(r.edl.entries.len(), r.plan.selected.len());
                assert!(r.plan.selected.iter().all(|id| all_clips.contains(&id.as_str())));
                let bgm = r.edl.bgm.as_ref().unwrap();
                assert!(cat.audio_rows(bgm.as_str()).len() > 0);
                if mode == EditMode::ScriptDriven {
                    assert_eq!(r.plan.script.len(), ad.script_lines.len());
                }
            }
        }
    }
    assert!(editor.edit("424242", EditMode::ScriptDriven, Strategy::ByFrame).is_err());
}

proptest! {
    #[test]
    fn ranges_tile_the_sequence(sims in prop::collection::vec(-1.0f64..1.0, 0..80), min_len in 1usize..12) {
        let cfg = SegmentConfig { min_len, ..SegmentConfig::default() };
        let ranges = continuity_ranges(&sims, &cfg);
        let n = sims.len() + 1;
        prop_assert_eq!(ranges[0].0, 0);
        prop_assert_eq!(ranges.last().unwrap().1, n);
        for w in ranges.windows(2) {
            prop_assert_eq!(w[0].1, w[1].0);
        }
        if ranges.len() > 1 {
            prop_assert!(ranges.iter().all(|(s, e)| e - s >= min_len));
        }
    }
}
