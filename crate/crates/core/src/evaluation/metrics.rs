//! Natively computed metrics: selection accuracy, rank accuracy and word
//! count discrepancy.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result};

/// Ideographs and kana, each counted as one word.
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x309F
        | 0x30A0..=0x30FF
        | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2FA1F)
}

/// Whitespace-delimited runs of non-CJK text count one each; every CJK
/// codepoint counts one and also ends any run in progress.
pub fn word_count(text: &str) -> usize {
    let mut count = 0;
    let mut in_word = false;
    for c in text.chars() {
        if is_cjk(c) {
            count += 1;
            in_word = false;
        } else if c.is_whitespace() {
            in_word = false;
        } else if !in_word {
            count += 1;
            in_word = true;
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSample {
    pub predicted: Vec<String>,
    pub positives: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingSample {
    pub predicted: Vec<String>,
    pub reference: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptPair {
    pub script_line: String,
    pub target_line: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioOutcome {
    pub value: f64,
    pub counted: usize,
    pub excluded: usize,
}

/// Fraction of samples whose nonempty prediction holds only positives.
pub fn csa(samples: &[SelectionSample]) -> Result<RatioOutcome> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("csa needs at least one sample".into()));
    }
    let selected = samples
        .iter()
        .filter(|s| {
            let positives: HashSet<&str> = s.positives.iter().map(String::as_str).collect();
            !s.predicted.is_empty() && s.predicted.iter().all(|p| positives.contains(p.as_str()))
        })
        .count();
    Ok(RatioOutcome {
        value: selected as f64 / samples.len() as f64,
        counted: samples.len(),
        excluded: 0,
    })
}

fn multiset(ids: &[String]) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for id in ids {
        *m.entry(id.as_str()).or_insert(0) += 1;
    }
    m
}

/// Fraction of samples whose predicted order equals the reference exactly.
/// Samples over different id multisets are excluded.
pub fn cra(samples: &[OrderingSample]) -> Result<RatioOutcome> {
    let mut correct = 0usize;
    let mut counted = 0usize;
    let mut excluded = 0usize;
    for (i, s) in samples.iter().enumerate() {
        if multiset(&s.predicted) != multiset(&s.reference) {
            warn!(sample = i, "cra: predicted and reference ids differ; sample excluded");
            excluded += 1;
            continue;
        }
        counted += 1;
        if s.predicted == s.reference {
            correct += 1;
        }
    }
    if counted == 0 {
        return Err(Error::InsufficientData("cra has no valid samples".into()));
    }
    Ok(RatioOutcome {
        value: correct as f64 / counted as f64,
        counted,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WcdOutcome {
    pub mean: f64,
    pub per_clip: Vec<usize>,
}

pub fn wcd(pairs: &[ScriptPair]) -> Result<WcdOutcome> {
    if pairs.is_empty() {
        return Err(Error::InsufficientData("wcd needs at least one pair".into()));
    }
    let per_clip: Vec<usize> = pairs
        .iter()
        .map(|p| word_count(&p.script_line).abs_diff(word_count(&p.target_line)))
        .collect();
    let mean = per_clip.iter().sum::<usize>() as f64 / per_clip.len() as f64;
    Ok(WcdOutcome { mean, per_clip })
}

/// Pairs generated and reference scripts line by line; missing lines pair
/// with the empty string.
pub fn line_pairs(generated: &[String], reference: &[String]) -> Vec<ScriptPair> {
    let n = generated.len().max(reference.len());
    (0..n)
        .map(|i| ScriptPair {
            script_line: generated.get(i).cloned().unwrap_or_default(),
            target_line: reference.get(i).cloned().unwrap_or_default(),
        })
        .collect()
}
