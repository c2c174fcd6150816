use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracing::warn;

use super::align::Tokenizer;
use super::grammar::{
    render_clip, render_product, render_script_block, validate_turns, ParsedAnswer, ProductFields,
    SftTask, CANDIDATES_HEADER, CLIPS_HEADER,
};
use super::vocab::Vocabulary;
use crate::catalog::{AdRecord, ClipRecord};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const SELECT_SYSTEM: &str = "You edit short advertisement videos. Given the product, its script and a list of candidate clips, pick the clips that belong in this ad. Reply with the zero-based indices of the chosen candidates in ascending order, separated by commas.";
pub const SORT_SYSTEM: &str = "You edit short advertisement videos. The candidate clips of one ad are listed out of order. Reply with the candidate index that belongs at each position of the correct order, separated by commas.";
pub const SCRIPT_SYSTEM: &str = "You write voice-over scripts for short advertisement videos. Given the product and the ordered clips, write one script line per clip, one line each, in clip order.";
pub const BGM_SYSTEM: &str = "You choose background music for short advertisement videos. Given the product, the ordered clips and the script, reply with the audio tokens of a fitting music style.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub from: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub photo_id: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftSample {
    pub system: String,
    pub conversations: Vec<Turn>,
    pub task: SftTask,
    pub provenance: Provenance,
}

impl SftSample {
    fn new(task: SftTask, system: &str, human: String, assistant: String, photo_id: &str, seed: u64) -> Self {
        SftSample {
            system: system.to_string(),
            conversations: vec![
                Turn {
                    from: "human".into(),
                    value: human,
                },
                Turn {
                    from: "assistant".into(),
                    value: assistant,
                },
            ],
            task,
            provenance: Provenance {
                photo_id: photo_id.to_string(),
                seed,
            },
        }
    }

    pub fn human(&self) -> &str {
        &self.conversations[0].value
    }

    pub fn assistant(&self) -> &str {
        &self.conversations[1].value
    }
}

/// Per-ad seed: the first eight bytes of `sha256(global_seed || photo_id)`.
pub fn derive_seed(global_seed: u64, photo_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global_seed.to_le_bytes());
    h.update(photo_id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

fn candidate_line<T: Scalar>(tok: &Tokenizer<T>, i: usize, text: &str, clip: &ClipRecord) -> Result<String> {
    let g = tok.first_frame_group(clip)?;
    Ok(format!("[{i}] {}", render_clip(&tok.vocab, text, std::slice::from_ref(g))?))
}

fn product_line(ad: &AdRecord) -> String {
    render_product(&ProductFields::from(&ad.product))
}

fn clip_text(ad: &AdRecord, i: usize) -> &str {
    ad.script_lines.get(i).unwrap_or(&ad.clips[i].script_line)
}

/// Own clips and as many foreign clips, shuffled; the answer lists where the
/// own clips landed.
pub fn build_selection_sample<T: Scalar>(
    tok: &Tokenizer<T>,
    ad: &AdRecord,
    pool: &[AdRecord],
    seed: u64,
) -> Result<SftSample> {
    let n = ad.clips.len();
    if n == 0 {
        return Err(Error::InsufficientData(format!("ad {} has no clips", ad.photo_id)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let usable = |c: &&ClipRecord| tok.first_frame_group(c).is_ok();
    let foreign = pool.iter().filter(|o| o.photo_id != ad.photo_id);
    let mut same: Vec<(&ClipRecord, &str)> = Vec::new();
    let mut other: Vec<(&ClipRecord, &str)> = Vec::new();
    for o in foreign {
        let bucket = if o.product.category == ad.product.category {
            &mut same
        } else {
            &mut other
        };
        bucket.extend(o.clips.iter().enumerate().filter(|(_, c)| usable(c)).map(|(i, c)| (c, clip_text(o, i))));
    }
    same.shuffle(&mut rng);
    other.shuffle(&mut rng);
    let available = same.len() + other.len();
    if available < n {
        return Err(Error::InsufficientData(format!(
            "ad {} needs {n} negative clips, pool offers {available} (short by {})",
            ad.photo_id,
            n - available
        )));
    }
    let negatives: Vec<(&ClipRecord, &str)> = same.into_iter().chain(other).take(n).collect();
    let positives: Vec<(&ClipRecord, &str)> = ad.clips.iter().enumerate().map(|(i, c)| (c, clip_text(ad, i))).collect();
    let candidates: Vec<(&ClipRecord, &str)> = positives.into_iter().chain(negatives).collect();
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.shuffle(&mut rng);

    let mut human = product_line(ad);
    human.push('\n');
    human.push_str(&render_script_block(&ad.script_lines));
    human.push('\n');
    human.push_str(CANDIDATES_HEADER);
    for (i, &src) in order.iter().enumerate() {
        let (clip, text) = candidates[src];
        human.push('\n');
        human.push_str(&candidate_line(tok, i, text, clip)?);
    }
    let picks: Vec<String> = order
        .iter()
        .enumerate()
        .filter(|(_, &src)| src < n)
        .map(|(i, _)| i.to_string())
        .collect();
    Ok(SftSample::new(SftTask::Select, SELECT_SYSTEM, human, picks.join(","), &ad.photo_id, seed))
}

/// Own clips shuffled; answer `perm[j]` is the candidate index of the `j`-th clip.
pub fn build_sorting_sample<T: Scalar>(tok: &Tokenizer<T>, ad: &AdRecord, seed: u64) -> Result<SftSample> {
    let n = ad.clips.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "ad {} has {n} clips, sorting needs at least 2",
            ad.photo_id
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut human = product_line(ad);
    human.push('\n');
    human.push_str(CANDIDATES_HEADER);
    let mut perm = vec![0usize; n];
    for (i, &src) in order.iter().enumerate() {
        perm[src] = i;
        human.push('\n');
        human.push_str(&candidate_line(tok, i, clip_text(ad, src), &ad.clips[src])?);
    }
    let answer: Vec<String> = perm.iter().map(usize::to_string).collect();
    Ok(SftSample::new(SftTask::Sort, SORT_SYSTEM, human, answer.join(","), &ad.photo_id, seed))
}

fn check_script(ad: &AdRecord) -> Result<()> {
    if ad.script_lines.len() != ad.clips.len() {
        return Err(Error::InvalidInput(format!(
            "ad {} has {} script lines for {} clips",
            ad.photo_id,
            ad.script_lines.len(),
            ad.clips.len()
        )));
    }
    if ad.clips.is_empty() {
        return Err(Error::InsufficientData(format!("ad {} has no clips", ad.photo_id)));
    }
    if ad.script_lines.iter().any(|l| l.contains('\n')) {
        return Err(Error::InvalidInput(format!("ad {} has a multi-line script line", ad.photo_id)));
    }
    Ok(())
}

/// Ordered clip tokens in; the source script out, one line per clip.
pub fn build_script_sample<T: Scalar>(tok: &Tokenizer<T>, ad: &AdRecord, seed: u64) -> Result<SftSample> {
    check_script(ad)?;
    let mut human = product_line(ad);
    human.push('\n');
    human.push_str(CLIPS_HEADER);
    for (i, clip) in ad.clips.iter().enumerate() {
        human.push('\n');
        human.push_str(&candidate_line(tok, i, "", clip)?);
    }
    Ok(SftSample::new(
        SftTask::Script,
        SCRIPT_SYSTEM,
        human,
        ad.script_lines.join("\n"),
        &ad.photo_id,
        seed,
    ))
}

/// Clips and script in; the pooled BGM track's audio tokens out.
pub fn build_bgm_sample<T: Scalar>(tok: &Tokenizer<T>, ad: &AdRecord, seed: u64) -> Result<SftSample> {
    check_script(ad)?;
    let bgm = tok.ad_bgm_group(ad)?;
    let mut human = product_line(ad);
    human.push('\n');
    human.push_str(&render_script_block(&ad.script_lines));
    human.push('\n');
    human.push_str(CLIPS_HEADER);
    for (i, clip) in ad.clips.iter().enumerate() {
        human.push('\n');
        human.push_str(&candidate_line(tok, i, clip_text(ad, i), clip)?);
    }
    let answer = tok.vocab.render_group(bgm)?;
    Ok(SftSample::new(SftTask::Bgm, BGM_SYSTEM, human, answer, &ad.photo_id, seed))
}

pub fn build_sample<T: Scalar>(
    tok: &Tokenizer<T>,
    task: SftTask,
    ad: &AdRecord,
    pool: &[AdRecord],
    global_seed: u64,
) -> Result<SftSample> {
    let seed = derive_seed(global_seed, &ad.photo_id);
    match task {
        SftTask::Select => build_selection_sample(tok, ad, pool, seed),
        SftTask::Sort => build_sorting_sample(tok, ad, seed),
        SftTask::Script => build_script_sample(tok, ad, seed),
        SftTask::Bgm => build_bgm_sample(tok, ad, seed),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedSample {
    pub photo_id: String,
    pub task: SftTask,
    pub reason: String,
}

/// Samples for every ad and task, task-major; ads a task cannot use are skipped.
pub fn build_sft_corpus<T: Scalar>(
    tok: &Tokenizer<T>,
    ads: &[AdRecord],
    tasks: &[SftTask],
    global_seed: u64,
) -> (Vec<SftSample>, Vec<SkippedSample>) {
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for &task in tasks {
        for ad in ads {
            match build_sample(tok, task, ad, ads, global_seed) {
                Ok(s) => samples.push(s),
                Err(e) => {
                    warn!(photo_id = %ad.photo_id, task = task.as_str(), error = %e, "sft sample skipped");
                    skipped.push(SkippedSample {
                        photo_id: ad.photo_id.clone(),
                        task,
                        reason: e.to_string(),
                    });
                }
            }
        }
    }
    (samples, skipped)
}

/// Grammar check of a built sample; returns the parsed answer.
pub fn validate_sample(sample: &SftSample, vocab: &Vocabulary) -> Result<ParsedAnswer> {
    if sample.conversations.len() != 2
        || sample.conversations[0].from != "human"
        || sample.conversations[1].from != "assistant"
    {
        return Err(Error::Format("sample must hold one human and one assistant turn".into()));
    }
    let (_, answer) = validate_turns(sample.task, sample.human(), sample.assistant(), vocab)?;
    Ok(answer)
}

/// Inverse-permutation check: applying a sorting answer to the candidate
/// list yields positions `0..n` in source order.
pub fn apply_permutation<U: Clone>(shuffled: &[U], perm: &[usize]) -> Vec<U> {
    perm.iter().map(|&i| shuffled[i].clone()).collect()
}
