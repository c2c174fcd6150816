//! Evaluation inputs, judged aggregates and the combined metric report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;
use tracing::warn;

use super::judge::{payload, Judge, JudgeRequest, ParseStatus, TemplateId};
use super::metrics::{self, line_pairs, OrderingSample, SelectionSample};
use crate::catalog::ProductInfo;
use crate::error::{Error, Result};

/// One generated script with its reference and the frames its clips open on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptItem {
    pub photo_id: String,
    #[serde(default)]
    pub product: ProductInfo,
    pub generated: Vec<String>,
    pub reference: Vec<String>,
    /// First-frame reference per generated line.
    #[serde(default)]
    pub frames: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MusicItem {
    pub photo_id: String,
    pub predicted: String,
    pub reference: String,
}

/// Everything `evaluate` scores; absent sections leave their metrics unset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSet {
    #[serde(default)]
    pub selection: Vec<SelectionSample>,
    #[serde(default)]
    pub ordering: Vec<OrderingSample>,
    #[serde(default)]
    pub scripts: Vec<ScriptItem>,
    #[serde(default)]
    pub music: Vec<MusicItem>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCount {
    pub counted: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub csa: Option<f64>,
    pub cra: Option<f64>,
    pub vsc: Option<f64>,
    pub sq: Option<f64>,
    pub wcd: Option<f64>,
    pub mss: Option<f64>,
    pub wcd_per_clip: Vec<usize>,
    pub sample_counts: BTreeMap<String, SampleCount>,
}

impl MetricReport {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("csa", self.csa, 1.0),
            ("cra", self.cra, 1.0),
            ("vsc", self.vsc, 2.0),
            ("sq", self.sq, 100.0),
            ("wcd", self.wcd, f64::INFINITY),
            ("mss", self.mss, 1.0),
        ];
        for (name, value, hi) in checks {
            if let Some(v) = value {
                if !(v >= 0.0 && v <= hi) {
                    return Err(Error::out_of_range(name, v, &format!("[0, {hi}]")));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Mean of judged scores over the parseable replies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgedMean {
    pub mean: Option<f64>,
    pub counted: usize,
    pub excluded: usize,
}

/// Sum in sorted order so the mean does not depend on sample order.
fn order_free_mean(scores: &mut [f64]) -> Option<f64> {
    if scores.is_empty() {
        return None;
    }
    scores.sort_by(f64::total_cmp);
    Some(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Replies that fail to parse are excluded and counted; transport failures
/// abort.
pub fn judged_mean(judge: &Judge, requests: &[JudgeRequest]) -> Result<JudgedMean> {
    let mut scores = Vec::with_capacity(requests.len());
    let mut excluded = 0;
    for request in requests {
        let response = judge.judge(request)?;
        match (response.score, &response.status) {
            (Some(s), ParseStatus::Ok) => scores.push(s),
            (_, status) => {
                warn!(template = request.template_id.as_str(), key = %response.key, ?status, "judge reply excluded");
                excluded += 1;
            }
        }
    }
    Ok(JudgedMean {
        counted: scores.len(),
        mean: order_free_mean(&mut scores),
        excluded,
    })
}

pub fn vsc_request(frame: &str, script_line: &str) -> JudgeRequest {
    JudgeRequest::new(
        TemplateId::Vsc,
        payload([("frame", json!(frame)), ("script_line", json!(script_line))]),
    )
}

pub fn relevance_request(frame: &str, script_line: &str) -> JudgeRequest {
    JudgeRequest::new(
        TemplateId::Relevance,
        payload([("frame", json!(frame)), ("script_line", json!(script_line))]),
    )
}

pub fn sq_request(item: &ScriptItem) -> JudgeRequest {
    let gaps = metrics::wcd(&line_pairs(&item.generated, &item.reference))
        .map(|w| w.per_clip)
        .unwrap_or_default();
    let p = &item.product;
    JudgeRequest::new(
        TemplateId::Sq,
        payload([
            ("category", json!(p.category)),
            ("brand", json!(p.brand)),
            ("name", json!(p.name)),
            ("selling_points", json!(p.selling_points)),
            ("reference_script", json!(item.reference)),
            ("generated_script", json!(item.generated)),
            ("line_gaps", json!(gaps)),
        ]),
    )
}

pub fn mss_request(item: &MusicItem) -> JudgeRequest {
    JudgeRequest::new(
        TemplateId::Mss,
        payload([("predicted", json!(item.predicted)), ("reference", json!(item.reference))]),
    )
}

/// Frame/line pairs over all scripts; lines without a frame are skipped and
/// counted.
pub fn vsc_requests(scripts: &[ScriptItem]) -> (Vec<JudgeRequest>, usize) {
    let mut requests = Vec::new();
    let mut unpaired = 0;
    for item in scripts {
        if item.frames.len() != item.generated.len() {
            warn!(photo_id = %item.photo_id, "vsc: frame and line counts differ; extra lines skipped");
        }
        unpaired += item.frames.len().abs_diff(item.generated.len());
        requests.extend(item.frames.iter().zip(&item.generated).map(|(f, l)| vsc_request(f, l)));
    }
    (requests, unpaired)
}

pub fn vsc(judge: &Judge, scripts: &[ScriptItem]) -> Result<JudgedMean> {
    let (requests, unpaired) = vsc_requests(scripts);
    let mut m = judged_mean(judge, &requests)?;
    m.excluded += unpaired;
    Ok(m)
}

pub fn sq(judge: &Judge, scripts: &[ScriptItem]) -> Result<JudgedMean> {
    judged_mean(judge, &scripts.iter().map(sq_request).collect::<Vec<_>>())
}

pub fn mss(judge: &Judge, music: &[MusicItem]) -> Result<JudgedMean> {
    judged_mean(judge, &music.iter().map(mss_request).collect::<Vec<_>>())
}

/// Native metrics always; judged metrics only when a judge is given.
pub fn evaluate(set: &EvalSet, judge: Option<&Judge>) -> Result<MetricReport> {
    let mut counts = BTreeMap::new();
    let mut put = |name: &str, counted, excluded| {
        counts.insert(name.to_string(), SampleCount { counted, excluded });
    };
    let csa = if set.selection.is_empty() {
        None
    } else {
        let o = metrics::csa(&set.selection)?;
        put("csa", o.counted, o.excluded);
        Some(o.value)
    };
    let cra = if set.ordering.is_empty() {
        None
    } else {
        let o = metrics::cra(&set.ordering)?;
        put("cra", o.counted, o.excluded);
        Some(o.value)
    };
    let pairs: Vec<_> = set
        .scripts
        .iter()
        .flat_map(|s| line_pairs(&s.generated, &s.reference))
        .collect();
    let (wcd, wcd_per_clip) = if pairs.is_empty() {
        (None, Vec::new())
    } else {
        let o = metrics::wcd(&pairs)?;
        put("wcd", o.per_clip.len(), 0);
        (Some(o.mean), o.per_clip)
    };
    let (mut vsc_v, mut sq_v, mut mss_v) = (None, None, None);
    if let Some(judge) = judge {
        if !set.scripts.is_empty() {
            let v = vsc(judge, &set.scripts)?;
            put("vsc", v.counted, v.excluded);
            vsc_v = v.mean;
            let s = sq(judge, &set.scripts)?;
            put("sq", s.counted, s.excluded);
            sq_v = s.mean;
        }
        if !set.music.is_empty() {
            let m = mss(judge, &set.music)?;
            put("mss", m.counted, m.excluded);
            mss_v = m.mean;
        }
    }
    let report = MetricReport {
        csa,
        cra,
        vsc: vsc_v,
        sq: sq_v,
        wcd,
        mss: mss_v,
        wcd_per_clip,
        sample_counts: counts,
    };
    report.validate()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::judge::{Cassette, Templates};

    fn script(frames: &[&str], generated: &[&str], reference: &[&str]) -> ScriptItem {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        ScriptItem {
            photo_id: "1".into(),
            product: ProductInfo::default(),
            generated: s(generated),
            reference: s(reference),
            frames: s(frames),
        }
    }

    #[test]
    fn all_twos_average_two_and_bad_replies_are_counted() {
        let item = script(&["f1", "f2", "f3"], &["a", "b", "c"], &["a", "b", "c"]);
        let cassette = Cassette::in_memory();
        cassette.record(&vsc_request("f1", "a"), "2").unwrap();
        cassette.record(&vsc_request("f2", "b"), "2").unwrap();
        cassette.record(&vsc_request("f3", "c"), "2").unwrap();
        let judge = Judge::replay(Templates::bundled(), cassette);
        let m = vsc(&judge, &[item.clone()]).unwrap();
        assert_eq!((m.mean, m.counted, m.excluded), (Some(2.0), 3, 0));

        let cassette = Cassette::in_memory();
        cassette.record(&vsc_request("f1", "a"), "2").unwrap();
        cassette.record(&vsc_request("f2", "b"), "5").unwrap();
        cassette.record(&vsc_request("f3", "c"), "1").unwrap();
        let judge = Judge::replay(Templates::bundled(), cassette);
        let m = vsc(&judge, &[item]).unwrap();
        assert_eq!((m.mean, m.counted, m.excluded), (Some(1.5), 2, 1));
    }

    #[test]
    fn native_only_report() {
        let set = EvalSet {
            selection: vec![SelectionSample {
                predicted: vec!["a".into()],
                positives: vec!["a".into(), "b".into()],
            }],
            scripts: vec![script(&[], &["one two three"], &["one"])],
            ..EvalSet::default()
        };
        let r = evaluate(&set, None).unwrap();
        assert_eq!((r.csa, r.cra, r.wcd, r.vsc), (Some(1.0), None, Some(2.0), None));
        assert_eq!(r.wcd_per_clip, vec![2]);
    }
}
