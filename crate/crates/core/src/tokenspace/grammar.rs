//! Surface grammar of alignment and fine-tuning samples, and its validator.
//!
//! ```text
//! alignment = product clip { clip } bgm ;
//! product   = "<product_begin>" "category=" field "|brand=" field "|name=" field
//!             "|selling_points=" field "<product_end>" ;
//! clip      = "<clip_begin>" text vgroup { vgroup } "<clip_end>" ;
//! bgm       = "<bgm_begin>" agroup "<bgm_end>" ;
//! vgroup    = "<v_0_" code ">" ... "<v_" (L-1) "_" code ">" ;
//! agroup    = "<a_0_" code ">" ... "<a_" (L-1) "_" code ">" ;
//! field     = text ;
//! text      = { plain | escape } ;
//! plain     = any char except "\" "<" ">" "|" newline ;
//! escape    = "\\" | "\<" | "\>" | "\|" | "\n" ;
//! ```
//!
//! Fine-tuning human turns are newline-separated:
//!
//! ```text
//! human     = product NL [ "Script:" NL { n ". " text NL } ] header NL { "[" i "] " clip NL } ;
//! header    = "Candidates:" | "Clips:" ;
//! ```
//!
//! Assistant turns: `select` is strictly increasing comma-separated
//! candidate indices, `sort` a comma-separated permutation, `script` one line
//! per clip, `bgm` a single audio group.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::vocab::{Marker, Token, Vocabulary};
use crate::catalog::{Modality, ProductInfo};
use crate::error::{Error, Result};
use crate::quantizer::CodeGroup;

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '<' => out.push_str("\\<"),
            '>' => out.push_str("\\>"),
            '|' => out.push_str("\\|"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Item {
    Text(String),
    Sep,
    Special(String),
}

fn lex(input: &str) -> Result<Vec<Item>> {
    let mut items = Vec::new();
    let mut text = String::new();
    let mut chars = input.chars();
    let flush = |text: &mut String, items: &mut Vec<Item>| {
        if !text.is_empty() {
            items.push(Item::Text(std::mem::take(text)));
        }
    };
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some('n') => text.push('\n'),
                Some(e @ ('\\' | '<' | '>' | '|')) => text.push(e),
                Some(other) => return Err(Error::Format(format!("unknown escape \\{other}"))),
                None => return Err(Error::Format("dangling backslash".into())),
            },
            '<' => {
                flush(&mut text, &mut items);
                let mut tok = String::from("<");
                loop {
                    match chars.next() {
                        Some('>') => break,
                        Some(c @ ('<' | '\n' | '\\')) => {
                            return Err(Error::Format(format!("unexpected {c:?} inside special token")))
                        }
                        Some(c) => tok.push(c),
                        None => return Err(Error::Format("unterminated special token".into())),
                    }
                }
                tok.push('>');
                items.push(Item::Special(tok));
            }
            '|' => {
                flush(&mut text, &mut items);
                items.push(Item::Sep);
            }
            '>' | '\n' => return Err(Error::Format(format!("unescaped {c:?} in text"))),
            c => text.push(c),
        }
    }
    flush(&mut text, &mut items);
    Ok(items)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductFields {
    pub category: String,
    pub brand: String,
    pub name: String,
    pub selling_points: String,
}

impl From<&ProductInfo> for ProductFields {
    fn from(p: &ProductInfo) -> Self {
        ProductFields {
            category: p.category.clone(),
            brand: p.brand.clone(),
            name: p.name.clone(),
            selling_points: p.selling_points.clone(),
        }
    }
}

pub fn render_product(p: &ProductFields) -> String {
    format!(
        "{}category={}|brand={}|name={}|selling_points={}{}",
        Marker::ProductBegin,
        escape(&p.category),
        escape(&p.brand),
        escape(&p.name),
        escape(&p.selling_points),
        Marker::ProductEnd
    )
}

/// Script text followed by the code groups of one clip span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipSpan {
    pub text: String,
    pub groups: Vec<CodeGroup>,
}

pub fn render_clip(vocab: &Vocabulary, text: &str, groups: &[CodeGroup]) -> Result<String> {
    let mut out = String::from(Marker::ClipBegin.surface());
    out.push_str(&escape(text));
    for g in groups {
        out.push_str(&vocab.render_group(g)?);
    }
    out.push_str(Marker::ClipEnd.surface());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedAlignment {
    pub product: ProductFields,
    pub clips: Vec<ClipSpan>,
    pub bgm: CodeGroup,
}

struct Cursor<'a> {
    items: &'a [Item],
    pos: usize,
    vocab: &'a Vocabulary,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Item> {
        self.items.get(self.pos)
    }

    fn done(&self) -> bool {
        self.pos == self.items.len()
    }

    fn expect_marker(&mut self, m: Marker) -> Result<()> {
        match self.peek() {
            Some(Item::Special(s)) if s == m.surface() => {
                self.pos += 1;
                Ok(())
            }
            other => Err(Error::Format(format!("expected {m}, found {other:?}"))),
        }
    }

    fn at_marker(&self, m: Marker) -> bool {
        matches!(self.peek(), Some(Item::Special(s)) if s == m.surface())
    }

    fn text(&mut self) -> String {
        match self.peek() {
            Some(Item::Text(t)) => {
                self.pos += 1;
                t.clone()
            }
            _ => String::new(),
        }
    }

    fn field(&mut self, key: &str, lead_sep: bool) -> Result<String> {
        if lead_sep {
            match self.peek() {
                Some(Item::Sep) => self.pos += 1,
                other => return Err(Error::Format(format!("expected `|` before {key}, found {other:?}"))),
            }
        }
        let t = self.text();
        t.strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| Error::Format(format!("expected field `{key}=`")))
    }

    fn product(&mut self) -> Result<ProductFields> {
        self.expect_marker(Marker::ProductBegin)?;
        let p = ProductFields {
            category: self.field("category", false)?,
            brand: self.field("brand", true)?,
            name: self.field("name", true)?,
            selling_points: self.field("selling_points", true)?,
        };
        self.expect_marker(Marker::ProductEnd)?;
        Ok(p)
    }

    /// Consecutive code tokens of one modality, grouped into whole groups.
    fn groups(&mut self, modality: Modality) -> Result<Vec<CodeGroup>> {
        let levels = self.vocab.levels(modality);
        let mut groups = Vec::new();
        let mut codes = Vec::with_capacity(levels);
        while let Some(Item::Special(s)) = self.peek() {
            if Marker::ALL.iter().any(|m| m.surface() == s) {
                break;
            }
            let id = self.vocab.parse_surface(s)?;
            match self.vocab.parse(id)? {
                Token::Code {
                    modality: m,
                    level,
                    code,
                } if m == modality && level == codes.len() => codes.push(code as u16),
                other => return Err(Error::Format(format!("unexpected token {other:?} in {} group", modality.as_str()))),
            }
            self.pos += 1;
            if codes.len() == levels {
                groups.push(CodeGroup {
                    modality,
                    codes: std::mem::take(&mut codes),
                });
            }
        }
        if !codes.is_empty() {
            return Err(Error::Format(format!("incomplete {} code group", modality.as_str())));
        }
        Ok(groups)
    }

    fn clip(&mut self) -> Result<ClipSpan> {
        self.expect_marker(Marker::ClipBegin)?;
        let text = self.text();
        let groups = self.groups(Modality::Video)?;
        self.expect_marker(Marker::ClipEnd)?;
        Ok(ClipSpan { text, groups })
    }
}

pub fn parse_alignment(text: &str, vocab: &Vocabulary) -> Result<ParsedAlignment> {
    let items = lex(text)?;
    let mut cur = Cursor {
        items: &items,
        pos: 0,
        vocab,
    };
    let product = cur.product()?;
    let mut clips = Vec::new();
    while cur.at_marker(Marker::ClipBegin) {
        let clip = cur.clip()?;
        if clip.groups.is_empty() {
            return Err(Error::Format(format!("clip {} carries no video tokens", clips.len())));
        }
        clips.push(clip);
    }
    if clips.is_empty() {
        return Err(Error::Format("alignment sample has no clips".into()));
    }
    cur.expect_marker(Marker::BgmBegin)?;
    let mut bgm = cur.groups(Modality::Audio)?;
    cur.expect_marker(Marker::BgmEnd)?;
    if bgm.len() != 1 {
        return Err(Error::Format(format!("bgm block holds {} groups, expected 1", bgm.len())));
    }
    if !cur.done() {
        return Err(Error::Format("trailing content after bgm block".into()));
    }
    Ok(ParsedAlignment {
        product,
        clips,
        bgm: bgm.remove(0),
    })
}

fn parse_product_line(line: &str, vocab: &Vocabulary) -> Result<ProductFields> {
    let items = lex(line)?;
    let mut cur = Cursor {
        items: &items,
        pos: 0,
        vocab,
    };
    let p = cur.product()?;
    if !cur.done() {
        return Err(Error::Format("trailing content after product block".into()));
    }
    Ok(p)
}

fn parse_clip_line(line: &str, vocab: &Vocabulary) -> Result<ClipSpan> {
    let items = lex(line)?;
    let mut cur = Cursor {
        items: &items,
        pos: 0,
        vocab,
    };
    let clip = cur.clip()?;
    if !cur.done() {
        return Err(Error::Format("trailing content after clip".into()));
    }
    Ok(clip)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SftTask {
    Select,
    Sort,
    Script,
    Bgm,
}

impl SftTask {
    pub const ALL: [SftTask; 4] = [SftTask::Select, SftTask::Sort, SftTask::Script, SftTask::Bgm];

    pub fn as_str(self) -> &'static str {
        match self {
            SftTask::Select => "select",
            SftTask::Sort => "sort",
            SftTask::Script => "script",
            SftTask::Bgm => "bgm",
        }
    }
}

impl std::str::FromStr for SftTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SftTask::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown sft task `{s}`")))
    }
}

pub const SCRIPT_HEADER: &str = "Script:";
pub const CANDIDATES_HEADER: &str = "Candidates:";
pub const CLIPS_HEADER: &str = "Clips:";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedHuman {
    pub product: ProductFields,
    pub script: Option<Vec<String>>,
    pub header: String,
    pub clips: Vec<ClipSpan>,
}

pub fn render_script_block(lines: &[String]) -> String {
    let mut out = String::from(SCRIPT_HEADER);
    for (i, l) in lines.iter().enumerate() {
        out.push('\n');
        out.push_str(&format!("{}. {}", i + 1, escape(l)));
    }
    out
}

pub fn parse_human(text: &str, vocab: &Vocabulary) -> Result<ParsedHuman> {
    let mut lines = text.split('\n').peekable();
    let product = parse_product_line(lines.next().unwrap_or_default(), vocab)?;
    let mut script = None;
    if lines.peek() == Some(&SCRIPT_HEADER) {
        lines.next();
        let mut s = Vec::new();
        while let Some(line) = lines.peek() {
            let prefix = format!("{}. ", s.len() + 1);
            let Some(rest) = line.strip_prefix(&prefix) else {
                break;
            };
            let items = lex(rest)?;
            let body = match items.as_slice() {
                [] => String::new(),
                [Item::Text(t)] => t.clone(),
                _ => return Err(Error::Format(format!("script line {} is not plain text", s.len() + 1))),
            };
            s.push(body);
            lines.next();
        }
        script = Some(s);
    }
    let header = lines
        .next()
        .filter(|h| *h == CANDIDATES_HEADER || *h == CLIPS_HEADER)
        .ok_or_else(|| Error::Format("missing clip list header".into()))?
        .to_string();
    let mut clips = Vec::new();
    for line in lines {
        let prefix = format!("[{}] ", clips.len());
        let rest = line
            .strip_prefix(&prefix)
            .ok_or_else(|| Error::Format(format!("expected clip line starting with {prefix:?}")))?;
        clips.push(parse_clip_line(rest, vocab)?);
    }
    if clips.is_empty() {
        return Err(Error::Format("human turn lists no clips".into()));
    }
    Ok(ParsedHuman {
        product,
        script,
        header,
        clips,
    })
}

fn parse_index_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|p| {
            if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) || (p.len() > 1 && p.starts_with('0')) {
                return Err(Error::Format(format!("bad index `{p}`")));
            }
            p.parse::<usize>().map_err(|e| Error::Format(e.to_string()))
        })
        .collect()
}

/// Structure recovered from a valid assistant turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedAnswer {
    Select(Vec<usize>),
    Sort(Vec<usize>),
    Script(Vec<String>),
    Bgm(CodeGroup),
}

/// Checks a human/assistant pair against the grammar of `task`.
pub fn validate_turns(task: SftTask, human: &str, assistant: &str, vocab: &Vocabulary) -> Result<(ParsedHuman, ParsedAnswer)> {
    let h = parse_human(human, vocab)?;
    let n = h.clips.len();
    let one_group = |h: &ParsedHuman| -> Result<()> {
        if h.clips.iter().any(|c| c.groups.len() != 1) {
            return Err(Error::Format("each listed clip must carry exactly one video group".into()));
        }
        Ok(())
    };
    let answer = match task {
        SftTask::Select => {
            one_group(&h)?;
            if h.header != CANDIDATES_HEADER || h.script.is_none() {
                return Err(Error::Format("selection prompt needs a script and candidates".into()));
            }
            if n % 2 != 0 {
                return Err(Error::Format(format!("{n} candidates cannot split 1:1")));
            }
            let idx = parse_index_list(assistant)?;
            if idx.windows(2).any(|w| w[0] >= w[1]) || idx.iter().any(|&i| i >= n) {
                return Err(Error::Format("selection indices must be increasing and in range".into()));
            }
            if idx.len() * 2 != n {
                return Err(Error::Format(format!("selected {} of {n} candidates, expected half", idx.len())));
            }
            ParsedAnswer::Select(idx)
        }
        SftTask::Sort => {
            one_group(&h)?;
            if h.header != CANDIDATES_HEADER || n < 2 {
                return Err(Error::Format("sorting prompt needs at least two candidates".into()));
            }
            let perm = parse_index_list(assistant)?;
            let distinct: HashSet<usize> = perm.iter().copied().collect();
            if perm.len() != n || distinct.len() != n || perm.iter().any(|&i| i >= n) {
                return Err(Error::Format("sorting answer is not a permutation of the candidates".into()));
            }
            ParsedAnswer::Sort(perm)
        }
        SftTask::Script => {
            one_group(&h)?;
            if h.header != CLIPS_HEADER || h.clips.iter().any(|c| !c.text.is_empty()) {
                return Err(Error::Format("script prompt lists clips without text".into()));
            }
            let lines: Vec<String> = assistant.split('\n').map(str::to_string).collect();
            if lines.len() != n {
                return Err(Error::Format(format!("{} script lines for {n} clips", lines.len())));
            }
            ParsedAnswer::Script(lines)
        }
        SftTask::Bgm => {
            one_group(&h)?;
            if h.header != CLIPS_HEADER || h.script.as_ref().map(Vec::len) != Some(n) {
                return Err(Error::Format("music prompt needs clips and a matching script".into()));
            }
            let items = lex(assistant)?;
            let mut cur = Cursor {
                items: &items,
                pos: 0,
                vocab,
            };
            let mut groups = cur.groups(Modality::Audio)?;
            if !cur.done() || groups.len() != 1 {
                return Err(Error::Format("music answer must be exactly one audio group".into()));
            }
            ParsedAnswer::Bgm(groups.remove(0))
        }
    };
    Ok((h, answer))
}
