//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use autocut_core::assembly::{segment_by_continuity, EditDecisionList, SegmentConfig};
use autocut_core::catalog::{EmbeddingMatrix, Modality};
use autocut_core::evaluation::{cra, csa, line_pairs, wcd, OrderingSample, ScriptPair, SelectionSample};
use autocut_core::quantizer::{straight_through_step, train_quantizer, QuantizerConfig, QuantizerMode};
use autocut_core::retrieval::{
    decode_clip_id, decode_frame_id, encode_clip_id, encode_frame_id, ground_tokens, IndexMode, MediaKind,
    VectorIndex,
};
use autocut_core::synthetic::{clustered_mixture, synthetic_catalog, CatalogSpec, MixtureSpec};
use autocut_core::tokenspace::grammar::parse_human;
use autocut_core::tokenspace::sft::apply_permutation;
use autocut_core::tokenspace::{build_sft_corpus, validate_sample, ParsedAnswer, SftTask, Token, Tokenizer};
use autocut_core::{Catalog, QuantizerModel, QuantizerModel64};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn autocut(args: &[&str], out: &Path) -> Result<String, String> {
    let config = fixtures().join("config.toml");
    let output = Command::new(env!("CARGO_BIN_EXE_autocut"))
        .args(args)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(out)
        .args(["--log-level", "error"])
        // a dead endpoint: any network attempt would fail loudly
        .env("AUTOCUT_JUDGE_ENDPOINT", "http://127.0.0.1:9/unreachable")
        .env_remove("AUTOCUT_JUDGE_TOKEN")
        .output()
        .map_err(|e| e.to_string())?;
    if !output.status.success() {
        return Err(format!(
            "`autocut {}` exited {:?}: {}",
            args.join(" "),
            output.status.code(),
            String::from_utf8_lossy(&output.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&output.stdout).into_owned())
}

fn id_codec() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let started = Instant::now();
    for _ in 0..100_000 {
        let photo = rng.random_range(1u64..10_000_000_000_000).to_string();
        let frame = rng.random_range(0..=9999u32);
        let (start, dur) = (rng.random_range(0..=9999u32), rng.random_range(1..=999u32));
        let f = encode_frame_id(&photo, frame).map_err(|e| e.to_string())?;
        check(decode_frame_id(&f).map_err(|e| e.to_string())? == (photo.clone(), frame), || f.clone())?;
        let c = encode_clip_id(&photo, start, dur).map_err(|e| e.to_string())?;
        check(decode_clip_id(&c).map_err(|e| e.to_string())? == (photo.clone(), start, dur), || c.clone())?;
    }
    let t = started.elapsed();
    check(t < Duration::from_secs(1), || format!("took {t:?}"))?;
    Ok(format!("1e5 frame and clip tuples round-trip in {t:.2?}"))
}

/// Exhaustive per-level nearest codeword in f64, lowest index on ties.
fn oracle_codes(model: &QuantizerModel, x: &[f32]) -> Vec<u16> {
    let d = model.config.codebook_dim;
    let mut residual = x.to_vec();
    let mut codes = Vec::new();
    for level in 0..model.levels() {
        let mut best = (f64::INFINITY, 0usize);
        for k in 0..model.config.codebook_size {
            let c = model.codeword(level, k);
            let dist: f64 = residual.iter().zip(c).map(|(&r, &c)| (r as f64 - c as f64).powi(2)).sum();
            if dist < best.0 {
                best = (dist, k);
            }
        }
        codes.push(best.1 as u16);
        let c = model.codeword(level, best.1);
        for j in 0..d {
            residual[j] -= c[j];
        }
    }
    codes
}

fn raw_config(dim: usize, levels: usize, k: usize) -> QuantizerConfig {
    let mut cfg = QuantizerConfig::video().with_mode(QuantizerMode::RawRvq);
    cfg.input_dim = dim;
    cfg.codebook_dim = dim;
    cfg.levels = levels;
    cfg.codebook_size = k;
    cfg.seed = 3;
    cfg
}

fn oracle_encode() -> Outcome {
    let spec = MixtureSpec {
        rows: 1000,
        dim: 128,
        clusters: 64,
        noise: 0.3,
        seed: 5,
    };
    let (m, _) = clustered_mixture::<f32>(&spec, Modality::Video).map_err(|e| e.to_string())?;
    let model = train_quantizer(&m, &raw_config(128, 8, 256)).map_err(|e| e.to_string())?;
    let fast = model.encode_matrix(&m).map_err(|e| e.to_string())?;
    let mismatches = m
        .iter_rows()
        .zip(&fast)
        .filter(|(x, g)| oracle_codes(&model, x) != g.codes)
        .count();
    check(mismatches == 0, || format!("{mismatches} of 1000 rows differ"))?;
    Ok("1000 x 128 rows, 8 levels: fast encode equals exhaustive search on every row".into())
}

fn quantizer_quality() -> Outcome {
    let spec = MixtureSpec {
        rows: 50_000,
        dim: 128,
        clusters: 256,
        noise: 0.05,
        seed: 11,
    };
    let (m, _) = clustered_mixture::<f32>(&spec, Modality::Video).map_err(|e| e.to_string())?;
    let started = Instant::now();
    let model = train_quantizer(&m, &raw_config(128, 8, 256)).map_err(|e| e.to_string())?;
    let report = model.reconstruction_report(&m).map_err(|e| e.to_string())?;
    let t = started.elapsed();
    let curve = &report.per_level_curve;
    check(curve.windows(2).all(|w| w[1] >= w[0]), || format!("curve not monotone: {curve:?}"))?;
    check(report.mean_cos_sim >= 0.98, || format!("mean cosine {}", report.mean_cos_sim))?;
    check(t < Duration::from_secs(300), || format!("took {t:?}"))?;
    Ok(format!(
        "mean cosine {:.4} (>= 0.98), level-1 {:.4} to level-8 {:.4}, {t:.1?}",
        report.mean_cos_sim,
        curve[0],
        curve[curve.len() - 1]
    ))
}

fn gradient_check() -> Outcome {
    let mut cfg = QuantizerConfig::video();
    cfg.input_dim = 8;
    cfg.codebook_dim = 4;
    cfg.encoder_widths = vec![12];
    cfg.decoder_widths = vec![12];
    cfg.levels = 2;
    cfg.codebook_size = 4;
    cfg.batch_size = 16;
    cfg.max_epochs = 2;
    cfg.seed = 9;
    let (m, _) = clustered_mixture::<f64>(
        &MixtureSpec {
            rows: 32,
            dim: 8,
            clusters: 4,
            noise: 0.2,
            seed: 2,
        },
        Modality::Video,
    )
    .map_err(|e| e.to_string())?;
    let model: QuantizerModel64 = train_quantizer(&m, &cfg).map_err(|e| e.to_string())?;
    let x = Array2::from_shape_vec((m.rows(), 8), m.data().to_vec()).map_err(|e| e.to_string())?;
    // freeze the quantization offset at the current point so the
    // straight-through surrogate is a smooth function of the parameters
    let z0 = model.encoder.forward(x.view());
    let codes = model.quantize_latents(z0.view());
    let mut q0 = Array2::<f64>::zeros(z0.raw_dim());
    for (i, mut row) in q0.rows_mut().into_iter().enumerate() {
        let sum = model.latent_sum(&codes[i * cfg.levels..(i + 1) * cfg.levels], cfg.levels);
        row.assign(&ndarray::ArrayView1::from(&sum));
    }
    let offset = &q0 - &z0;
    let quantize = |z: &Array2<f64>| z + &offset;
    let step = straight_through_step(&model.encoder, &model.decoder, x.view(), quantize);
    let analytic: Vec<f64> = step.encoder.flat().into_iter().chain(step.decoder.flat()).collect();

    let (mut enc, mut dec) = (model.encoder.clone(), model.decoder.clone());
    let (enc0, dec0) = (enc.params_flat(), dec.params_flat());
    let h = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..enc0.len() + dec0.len() {
        let mut eval = |delta: f64| {
            let (mut pe, mut pd) = (enc0.clone(), dec0.clone());
            if i < enc0.len() {
                pe[i] += delta;
            } else {
                pd[i - enc0.len()] += delta;
            }
            enc.set_params_flat(&pe);
            dec.set_params_flat(&pd);
            straight_through_step(&enc, &dec, x.view(), quantize).loss
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    check(worst <= 1e-4, || format!("worst relative error {worst:e}"))?;
    Ok(format!("{} parameters, worst relative error {worst:.2e}", analytic.len()))
}

fn random_matrix(rows: usize, dim: usize, seed: u64) -> EmbeddingMatrix<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f32> = (0..rows * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let keys = (0..rows).map(|i| encode_frame_id("42", i as u32).unwrap()).collect();
    EmbeddingMatrix::new(Modality::Video, dim, data, keys).unwrap()
}

/// Cosine ranking in f64, ties by id text.
fn brute_force(m: &EmbeddingMatrix<f32>, q: &[f32], k: usize) -> Vec<String> {
    let qn = q.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
    let mut scored: Vec<(f64, &str)> = m
        .iter_rows()
        .zip(m.row_keys())
        .map(|(r, key)| {
            let dot: f64 = r.iter().zip(q).map(|(&a, &b)| a as f64 * b as f64).sum();
            let rn = r.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
            (dot / (rn * qn), key.as_str())
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    scored.into_iter().take(k).map(|(_, id)| id.to_string()).collect()
}

fn retrieval() -> Outcome {
    // 10k rows need 5-digit frame numbers, so spread them over photo ids
    let base = random_matrix(10_000, 128, 21);
    let keys: Vec<String> = (0..10_000).map(|i| encode_frame_id(&(100 + i / 5000).to_string(), (i % 5000) as u32).unwrap()).collect();
    let m = EmbeddingMatrix::new(Modality::Video, 128, base.data().to_vec(), keys).map_err(|e| e.to_string())?;
    let flat = VectorIndex::build(&m, MediaKind::Frame, IndexMode::Flat, 1).map_err(|e| e.to_string())?;
    let mut part = VectorIndex::build(&m, MediaKind::Frame, IndexMode::Partitioned { n_lists: Some(64) }, 1)
        .map_err(|e| e.to_string())?;
    part.set_n_probe(part.n_lists());
    let queries = random_matrix(100, 128, 22);
    for q in queries.iter_rows() {
        let oracle = brute_force(&m, q, 10);
        let got = flat.query(q, 10).map_err(|e| e.to_string())?;
        let ids: Vec<String> = got.hits.iter().map(|h| h.id.as_str().to_string()).collect();
        check(ids == oracle, || format!("flat {ids:?} vs oracle {oracle:?}"))?;
        let p = part.query(q, 10).map_err(|e| e.to_string())?;
        check(p.hits == got.hits, || "partitioned with full probing differs from flat".into())?;
    }
    Ok("100 queries on 10k x 128: flat top-1/top-10 equal brute force; full-probe partitioned equals flat".into())
}

fn grounding() -> Outcome {
    let spec = CatalogSpec {
        ads: 25,
        clips_per_ad: (4, 4),
        seed: 31,
        ..CatalogSpec::default()
    };
    let catalog: Catalog = synthetic_catalog(&spec).map_err(|e| e.to_string())?;
    let clips = catalog.clip_matrix().map_err(|e| e.to_string())?;
    check(clips.rows() == 100, || format!("{} clips", clips.rows()))?;
    let mut cfg = raw_config(spec.video_dim, 8, 100);
    cfg.modality = Modality::Video;
    let model = train_quantizer(&clips, &cfg).map_err(|e| e.to_string())?;
    let index = VectorIndex::build(&clips, MediaKind::Clip, IndexMode::Flat, 0).map_err(|e| e.to_string())?;
    let groups = model.encode_matrix(&clips).map_err(|e| e.to_string())?;
    let ids = ground_tokens(&model, &index, &groups).map_err(|e| e.to_string())?;
    let correct = ids.iter().zip(clips.row_keys()).filter(|(g, k)| g.as_str() == k.as_str()).count();
    check(correct == 100, || format!("accuracy {correct}/100"))?;
    Ok("100 clips ground back to their own clip_id, accuracy 1.0".into())
}

fn word_count_oracle(s: &str) -> usize {
    // every CJK codepoint is a word; other text splits on whitespace
    let mut spaced = String::new();
    for c in s.chars() {
        if autocut_core::evaluation::metrics::is_cjk(c) {
            spaced.push(' ');
            spaced.push('X');
            spaced.push(' ');
        } else {
            spaced.push(c);
        }
    }
    spaced.split_whitespace().count()
}

fn metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let pool: Vec<String> = (0..8).map(|i| format!("c{i}")).collect();
    let words = ["go", "fresh", "新", "品", "day", "  ", "光"];
    let sentence = |rng: &mut ChaCha8Rng| -> String {
        (0..rng.random_range(0..8)).map(|_| words[rng.random_range(0..words.len())]).collect::<Vec<_>>().join(if rng.random_bool(0.5) { " " } else { "" })
    };
    for _ in 0..1000 {
        let n = rng.random_range(1..6);
        let sel: Vec<SelectionSample> = (0..n)
            .map(|_| {
                let pick = |rng: &mut ChaCha8Rng| (0..rng.random_range(0..4)).map(|_| pool[rng.random_range(0..8)].clone()).collect::<Vec<_>>();
                SelectionSample {
                    predicted: pick(&mut rng),
                    positives: pick(&mut rng),
                }
            })
            .collect();
        let hits = sel
            .iter()
            .filter(|s| !s.predicted.is_empty() && s.predicted.iter().all(|p| s.positives.contains(p)))
            .count();
        let got = csa(&sel).map_err(|e| e.to_string())?;
        check(got.value == hits as f64 / n as f64, || "csa differs from brute force".into())?;
        check((0.0..=1.0).contains(&got.value), || "csa out of range".into())?;

        let ord: Vec<OrderingSample> = (0..n)
            .map(|_| {
                let reference: Vec<String> = pool[..rng.random_range(1..5)].to_vec();
                let mut predicted = reference.clone();
                if rng.random_bool(0.5) {
                    let (i, j) = (rng.random_range(0..predicted.len()), rng.random_range(0..predicted.len()));
                    predicted.swap(i, j);
                }
                if rng.random_bool(0.2) {
                    predicted.pop();
                }
                OrderingSample { predicted, reference }
            })
            .collect();
        let valid: Vec<&OrderingSample> = ord
            .iter()
            .filter(|s| {
                let (mut a, mut b) = (s.predicted.clone(), s.reference.clone());
                a.sort();
                b.sort();
                a == b
            })
            .collect();
        match cra(&ord) {
            Ok(o) => {
                let exact = valid.iter().filter(|s| s.predicted == s.reference).count();
                check(o.value == exact as f64 / valid.len() as f64, || "cra differs from brute force".into())?;
                check(o.excluded == n - valid.len(), || "cra exclusions differ".into())?;
                check((0.0..=1.0).contains(&o.value), || "cra out of range".into())?;
            }
            Err(_) => check(valid.is_empty(), || "cra failed with valid samples".into())?,
        }

        let generated: Vec<String> = (0..n).map(|_| sentence(&mut rng)).collect();
        let reference: Vec<String> = (0..rng.random_range(1..6)).map(|_| sentence(&mut rng)).collect();
        let pairs = line_pairs(&generated, &reference);
        let w = wcd(&pairs).map_err(|e| e.to_string())?;
        let oracle: Vec<usize> = (0..generated.len().max(reference.len()))
            .map(|i| {
                let g = generated.get(i).map_or(0, |s| word_count_oracle(s));
                let r = reference.get(i).map_or(0, |s| word_count_oracle(s));
                g.abs_diff(r)
            })
            .collect();
        check(w.per_clip == oracle, || format!("wcd {:?} vs {oracle:?}", w.per_clip))?;
        check(w.mean >= 0.0, || "negative wcd".into())?;
        let same: Vec<ScriptPair> = generated
            .iter()
            .map(|g| ScriptPair {
                script_line: g.clone(),
                target_line: g.clone(),
            })
            .collect();
        check(wcd(&same).map_err(|e| e.to_string())?.mean == 0.0, || "identical scripts give nonzero wcd".into())?;
    }
    Ok("csa/cra/wcd equal brute force on 1000 random fixtures; ranges hold; identical scripts give wcd 0".into())
}

fn sft_builders() -> Outcome {
    let spec = CatalogSpec {
        ads: 250,
        seed: 41,
        ..CatalogSpec::default()
    };
    let catalog: Catalog = synthetic_catalog(&spec).map_err(|e| e.to_string())?;
    let video = train_quantizer(&catalog.video, &raw_config(spec.video_dim, 8, 32)).map_err(|e| e.to_string())?;
    let mut acfg = QuantizerConfig::audio().with_mode(QuantizerMode::RawRvq);
    acfg.input_dim = spec.audio_dim;
    acfg.codebook_dim = spec.audio_dim;
    acfg.codebook_size = 8;
    let audio: QuantizerModel = train_quantizer(catalog.audio.as_ref().unwrap(), &acfg).map_err(|e| e.to_string())?;
    let tok = Tokenizer::new(&catalog, &video, Some(&audio)).map_err(|e| e.to_string())?;
    let (samples, skipped) = build_sft_corpus(&tok, &catalog.records, &SftTask::ALL, 7);
    check(skipped.is_empty(), || format!("{} skipped", skipped.len()))?;
    check(samples.len() == 1000, || format!("{} samples", samples.len()))?;
    let vocab = tok.vocab;
    for s in &samples {
        let ad = catalog.record(&s.provenance.photo_id).unwrap();
        let answer = validate_sample(s, &vocab).map_err(|e| e.to_string())?;
        let human = parse_human(s.human(), &vocab).map_err(|e| e.to_string())?;
        match answer {
            ParsedAnswer::Select(picks) => {
                check(picks.len() == ad.clips.len() && human.clips.len() == 2 * picks.len(), || {
                    format!("{}: {} positives among {} candidates", ad.photo_id, picks.len(), human.clips.len())
                })?;
            }
            ParsedAnswer::Sort(perm) => {
                let mut sorted = perm.clone();
                sorted.sort_unstable();
                check(sorted == (0..perm.len()).collect::<Vec<_>>(), || format!("{perm:?} is not a permutation"))?;
                let texts: Vec<String> = human.clips.iter().map(|c| c.text.clone()).collect();
                check(apply_permutation(&texts, &perm) == ad.script_lines, || "sort answer does not restore order".into())?;
            }
            ParsedAnswer::Script(lines) => {
                check(lines.len() == ad.clips.len(), || "script line count differs from clip count".into())?;
            }
            ParsedAnswer::Bgm(_) => {
                let tokens: Vec<usize> = s
                    .assistant()
                    .split_inclusive('>')
                    .map(|t| vocab.parse_surface(t.trim()))
                    .collect::<Result<_, _>>()
                    .map_err(|e| e.to_string())?;
                let audio_only = tokens
                    .iter()
                    .all(|&t| matches!(vocab.parse(t), Ok(Token::Code { modality: Modality::Audio, .. })));
                check(tokens.len() == 8 && audio_only, || format!("bgm answer `{}`", s.assistant()))?;
            }
        }
    }
    Ok("1000 samples: selection 1:1, sorting restores order, script lines = clips, bgm = 8 audio tokens".into())
}

fn segmentation() -> Outcome {
    let dim = 16;
    let mut frames: Vec<Vec<f32>> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for f in 0..80 {
        let mut v = vec![0.0f32; dim];
        v[if f < 40 { 0 } else { 1 }] = 1.0;
        for x in v.iter_mut() {
            *x += rng.random_range(-0.01..0.01);
        }
        frames.push(v);
    }
    let refs: Vec<&[f32]> = frames.iter().map(Vec::as_slice).collect();
    let cfg = SegmentConfig::default();
    let segs = segment_by_continuity("1", &refs, &cfg).map_err(|e| e.to_string())?;
    let spans: Vec<(usize, usize)> = segs.iter().map(|s| (s.start_frame, s.end_frame)).collect();
    check(spans == [(0, 40), (40, 80)], || format!("{spans:?}"))?;
    for trial in 0..500 {
        let n = rng.random_range(1..120);
        let frames: Vec<Vec<f32>> = (0..n).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let refs: Vec<&[f32]> = frames.iter().map(Vec::as_slice).collect();
        let cfg = SegmentConfig {
            min_len: rng.random_range(1..12),
            k_sigma: rng.random_range(0.0..3.0),
            abs_floor: rng.random_range(-1.0..1.0),
            fps: 1.0,
        };
        let segs = segment_by_continuity("1", &refs, &cfg).map_err(|e| e.to_string())?;
        let tiles = segs.first().map(|s| s.start_frame) == Some(0)
            && segs.last().map(|s| s.end_frame) == Some(n)
            && segs.windows(2).all(|w| w[0].end_frame == w[1].start_frame)
            && segs.iter().all(|s| s.end_frame > s.start_frame);
        check(tiles, || format!("trial {trial}: segments do not tile 0..{n}"))?;
    }
    Ok("two plateaus split at frame 40; 500 random sequences tile their frame range".into())
}

fn prepare(out: &Path) -> Result<(), String> {
    autocut(&["train-quantizer", "--modality", "video"], out)?;
    autocut(&["train-quantizer", "--modality", "audio"], out)?;
    autocut(&["index", "build"], out)?;
    Ok(())
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path();
    let started = Instant::now();
    prepare(out)?;
    autocut(&["edit", "--mode", "script-driven", "--photo-id", "7000000"], out)?;
    let t = started.elapsed();
    let text = std::fs::read_to_string(out.join("edits/7000000.edl.json")).map_err(|e| e.to_string())?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let edl: EditDecisionList = serde_json::from_value(value["edl"].clone()).map_err(|e| e.to_string())?;
    edl.validate().map_err(|e| e.to_string())?;
    let sentences = value["plan"]["script"].as_array().map_or(0, Vec::len);
    check(edl.entries.len() == sentences, || format!("{} entries for {sentences} sentences", edl.entries.len()))?;
    let golden = fixtures().join("golden");
    for name in ["7000000.srt", "7000000.render.txt", "7000000.edl.json"] {
        let got = std::fs::read(out.join("edits").join(name)).map_err(|e| e.to_string())?;
        let want = std::fs::read(golden.join(name)).map_err(|e| e.to_string())?;
        check(got == want, || format!("{name} differs from golden"))?;
    }
    check(t < Duration::from_secs(60), || format!("took {t:?}"))?;
    Ok(format!("valid EDL, {sentences} entries = sentences, subtitles and render script match goldens, {t:.1?}"))
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = entry.path();
            if p.is_dir() {
                if p.file_name().is_some_and(|n| n != "logs") {
                    stack.push(p);
                }
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                files.insert(rel, std::fs::read(&p).unwrap_or_default());
            }
        }
    }
    files
}

fn determinism() -> Outcome {
    let stages: &[&[&str]] = &[
        &["ingest"],
        &["filter"],
        &["stats"],
        &["train-quantizer", "--modality", "video"],
        &["train-quantizer", "--modality", "audio"],
        &["encode", "--modality", "video"],
        &["encode", "--modality", "audio"],
        &["index", "build"],
        &["segment"],
        &["build-align"],
        &["build-sft", "--task", "all"],
        &["edit"],
        &["edit", "--mode", "footage-driven", "--strategy", "by-clip"],
        &["evaluate"],
    ];
    let runs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for run in &runs {
        for args in stages {
            autocut(args, run.path())?;
        }
    }
    let (a, b) = (snapshot(runs[0].path()), snapshot(runs[1].path()));
    check(a.keys().eq(b.keys()), || "runs wrote different file sets".into())?;
    let differing: Vec<&String> = a.iter().filter(|(k, v)| b[*k] != **v).map(|(k, _)| k).collect();
    check(differing.is_empty(), || format!("differ: {differing:?}"))?;
    Ok(format!("{} stages run twice, {} artifacts byte-identical", stages.len(), a.len()))
}

fn judge_replay() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cassette = fixtures().join("cassette.jsonl");
    autocut(&["evaluate", "--replay", cassette.to_str().unwrap()], dir.path())?;
    let got = std::fs::read(dir.path().join("report.json")).map_err(|e| e.to_string())?;
    let want = std::fs::read(fixtures().join("golden/report.json")).map_err(|e| e.to_string())?;
    check(got == want, || "report differs from the stored report".into())?;
    Ok("replay against a dead endpoint reproduces the stored report byte for byte".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("id codec round-trip", id_codec),
        ("quantizer oracle equivalence", oracle_encode),
        ("quantizer quality at desk scale", quantizer_quality),
        ("rqvae gradient check", gradient_check),
        ("retrieval correctness", retrieval),
        ("closed-loop grounding", grounding),
        ("metrics", metrics),
        ("sft builders", sft_builders),
        ("segmentation", segmentation),
        ("end-to-end edit", end_to_end),
        ("determinism", determinism),
        ("judge replay", judge_replay),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
