//! Loaders for every external input: the tweet corpus (JSON lines), dependency
//! parses (CoNLL-U), two-column user tables (bot scores, gold stance labels),
//! and the embedding exchange file.
//!
//! Every loader counts what it accepted and what it rejected; a malformed
//! record is skipped and counted, never dropped silently.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stance::Stance;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    #[serde(rename = "id")]
    pub tweet_id: String,
    #[serde(rename = "user")]
    pub user_id: String,
    /// UTC epoch seconds.
    #[serde(rename = "ts")]
    pub timestamp: i64,
    pub text: String,
    #[serde(rename = "rt_user", default)]
    pub retweeted_user: Option<String>,
    pub lang: String,
}

/// Record-level filter applied while reading the corpus.
#[derive(Debug, Clone, Default)]
pub struct CorpusFilter {
    /// Required language code; `None` accepts every language.
    pub lang: Option<String>,
    /// Keywords matched case-insensitively as substrings of the text. Empty
    /// accepts every text.
    pub terms: Vec<String>,
    /// Inclusive `[start, end]` epoch-second interval.
    pub interval: Option<(i64, i64)>,
}

impl CorpusFilter {
    pub fn accepts(&self, tweet: &Tweet) -> bool {
        if let Some(lang) = &self.lang {
            if !tweet.lang.eq_ignore_ascii_case(lang) {
                return false;
            }
        }
        if let Some((start, end)) = self.interval {
            if tweet.timestamp < start || tweet.timestamp > end {
                return false;
            }
        }
        if self.terms.is_empty() {
            return true;
        }
        let text = tweet.text.to_lowercase();
        self.terms
            .iter()
            .any(|term| text.contains(&term.to_lowercase()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStats {
    pub total: usize,
    pub accepted: usize,
    /// Well-formed records excluded by the filter.
    pub filtered: usize,
    /// Records that could not be decoded or violated a record invariant.
    pub malformed: usize,
}

impl LoadStats {
    pub fn rejected(&self) -> usize {
        self.filtered + self.malformed
    }
}

/// Streaming corpus reader. Blank lines are not records.
pub struct CorpusReader<R> {
    lines: std::io::Lines<R>,
    filter: CorpusFilter,
    seen_ids: HashSet<String>,
    stats: LoadStats,
    line_no: usize,
    diagnostics: Vec<String>,
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(reader: R, filter: CorpusFilter) -> Self {
        CorpusReader {
            lines: reader.lines(),
            filter,
            seen_ids: HashSet::new(),
            stats: LoadStats::default(),
            line_no: 0,
            diagnostics: Vec::new(),
        }
    }

    pub fn stats(&self) -> LoadStats {
        self.stats
    }

    /// One message per malformed record, with its line number.
    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    fn malformed(&mut self, message: String) {
        self.stats.malformed += 1;
        self.diagnostics
            .push(format!("line {}: {}", self.line_no, message));
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = std::io::Result<Tweet>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(e)),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            self.stats.total += 1;
            let tweet: Tweet = match serde_json::from_str(&line) {
                Ok(t) => t,
                Err(e) => {
                    self.malformed(e.to_string());
                    continue;
                }
            };
            if tweet.text.trim().is_empty() {
                self.malformed("empty text".into());
                continue;
            }
            if tweet.tweet_id.is_empty() || tweet.user_id.is_empty() {
                self.malformed("empty id or user".into());
                continue;
            }
            if self.seen_ids.contains(&tweet.tweet_id) {
                self.malformed(format!("duplicate tweet id {}", tweet.tweet_id));
                continue;
            }
            if !self.filter.accepts(&tweet) {
                self.stats.filtered += 1;
                continue;
            }
            self.seen_ids.insert(tweet.tweet_id.clone());
            self.stats.accepted += 1;
            return Some(Ok(tweet));
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub tweets: Vec<Tweet>,
    pub stats: LoadStats,
    pub diagnostics: Vec<String>,
}

pub fn load_corpus(path: impl AsRef<Path>, filter: &CorpusFilter) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file), filter).map_err(|e| Error::io(path, e))
}

pub fn read_corpus<R: BufRead>(reader: R, filter: &CorpusFilter) -> std::io::Result<Corpus> {
    let mut reader = CorpusReader::new(reader, filter.clone());
    let tweets = reader.by_ref().collect::<std::io::Result<Vec<_>>>()?;
    let stats = reader.stats();
    for d in reader.diagnostics() {
        log::warn!("corpus: {d}");
    }
    Ok(Corpus {
        tweets,
        stats,
        diagnostics: reader.diagnostics().to_vec(),
    })
}

pub fn write_corpus(path: impl AsRef<Path>, tweets: &[Tweet]) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for t in tweets {
        let line = serde_json::to_string(t).expect("tweet serializes");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Dependency parses

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub feats: String,
    /// 0 marks the root.
    pub head: usize,
    pub deprel: String,
    pub space_after: bool,
}

impl Token {
    /// Value of a morphological feature, e.g. `feat("Number")`.
    pub fn feat(&self, name: &str) -> Option<&str> {
        self.feats.split('|').find_map(|kv| {
            let (k, v) = kv.split_once('=')?;
            (k == name).then_some(v)
        })
    }

    /// Relation without its subtype (`nsubj:pass` → `nsubj`).
    pub fn base_rel(&self) -> &str {
        self.deprel.split(':').next().unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepSentence {
    pub tweet_id: String,
    /// Position of this sentence among the sentences of its tweet.
    pub sent_index: usize,
    pub tokens: Vec<Token>,
}

impl DepSentence {
    pub fn token(&self, index: usize) -> &Token {
        &self.tokens[index - 1]
    }

    pub fn children(&self, head: usize) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(move |t| t.head == head)
    }

    pub fn text(&self) -> String {
        render_tokens(self.tokens.iter())
    }

    pub fn validate(&self) -> std::result::Result<(), ParseRule> {
        let n = self.tokens.len();
        if n == 0 {
            return Err(ParseRule::Empty);
        }
        if self
            .tokens
            .iter()
            .enumerate()
            .any(|(i, t)| t.index != i + 1)
        {
            return Err(ParseRule::NonContiguousIndices);
        }
        if self.tokens.iter().any(|t| t.head > n) {
            return Err(ParseRule::HeadOutOfRange);
        }
        match self.tokens.iter().filter(|t| t.head == 0).count() {
            0 => return Err(ParseRule::NoRoot),
            1 => {}
            _ => return Err(ParseRule::MultipleRoots),
        }
        for t in &self.tokens {
            let mut cur = t.head;
            let mut steps = 0;
            while cur != 0 {
                steps += 1;
                if steps > n {
                    return Err(ParseRule::Cycle);
                }
                cur = self.tokens[cur - 1].head;
            }
        }
        Ok(())
    }
}

/// Joins token forms honouring `SpaceAfter=No`.
pub fn render_tokens<'a>(tokens: impl IntoIterator<Item = &'a Token>) -> String {
    let mut out = String::new();
    let mut pending_space = false;
    for t in tokens {
        if pending_space {
            out.push(' ');
        }
        out.push_str(&t.form);
        pending_space = t.space_after;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParseRule {
    MissingTweetId,
    Malformed,
    Empty,
    NonContiguousIndices,
    HeadOutOfRange,
    NoRoot,
    MultipleRoots,
    Cycle,
}

impl fmt::Display for ParseRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParseRule::MissingTweetId => "missing `# tweet_id` comment",
            ParseRule::Malformed => "malformed token line",
            ParseRule::Empty => "sentence has no tokens",
            ParseRule::NonContiguousIndices => "token indices not contiguous from 1",
            ParseRule::HeadOutOfRange => "head index exceeds token count",
            ParseRule::NoRoot => "no token with head 0",
            ParseRule::MultipleRoots => "more than one token with head 0",
            ParseRule::Cycle => "cyclic head chain",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    /// Line where the rejected block starts.
    pub line: usize,
    pub tweet_id: Option<String>,
    pub rule: ParseRule,
}

#[derive(Debug, Clone, Default)]
pub struct ParseLoad {
    pub sentences: Vec<DepSentence>,
    pub rejected: Vec<ParseDiagnostic>,
}

impl ParseLoad {
    pub fn stats(&self) -> LoadStats {
        LoadStats {
            total: self.sentences.len() + self.rejected.len(),
            accepted: self.sentences.len(),
            filtered: 0,
            malformed: self.rejected.len(),
        }
    }
}

pub fn load_parses(path: impl AsRef<Path>) -> Result<ParseLoad> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_parses(BufReader::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read_parses<R: BufRead>(reader: R) -> std::io::Result<ParseLoad> {
    struct Block {
        start: usize,
        tweet_id: Option<String>,
        lines: Vec<String>,
    }

    let mut load = ParseLoad::default();
    let mut per_tweet: HashMap<String, usize> = HashMap::new();
    let mut block: Option<Block> = None;

    let mut finish = |block: Block, load: &mut ParseLoad| {
        let Some(tweet_id) = block.tweet_id else {
            load.rejected.push(ParseDiagnostic {
                line: block.start,
                tweet_id: None,
                rule: ParseRule::MissingTweetId,
            });
            return;
        };
        let slot = per_tweet.entry(tweet_id.clone()).or_insert(0);
        let sent_index = *slot;
        *slot += 1;
        let reject = |rule| ParseDiagnostic {
            line: block.start,
            tweet_id: Some(tweet_id.clone()),
            rule,
        };
        let mut tokens = Vec::new();
        for line in &block.lines {
            match parse_token_line(line) {
                Ok(Some(t)) => tokens.push(t),
                Ok(None) => {}
                Err(rule) => {
                    load.rejected.push(reject(rule));
                    return;
                }
            }
        }
        let sentence = DepSentence {
            tweet_id: tweet_id.clone(),
            sent_index,
            tokens,
        };
        match sentence.validate() {
            Ok(()) => load.sentences.push(sentence),
            Err(rule) => {
                log::warn!(
                    "parses: block at line {} (tweet {}) rejected: {}",
                    block.start,
                    tweet_id,
                    rule
                );
                load.rejected.push(reject(rule));
            }
        }
    };

    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let trimmed = line.trim_end();
        if trimmed.trim().is_empty() {
            if let Some(b) = block.take() {
                finish(b, &mut load);
            }
            continue;
        }
        let b = block.get_or_insert_with(|| Block {
            start: line_no,
            tweet_id: None,
            lines: Vec::new(),
        });
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "tweet_id" {
                    b.tweet_id = Some(value.trim().to_string());
                }
            }
        } else {
            b.lines.push(trimmed.to_string());
        }
    }
    if let Some(b) = block.take() {
        finish(b, &mut load);
    }
    Ok(load)
}

fn parse_token_line(line: &str) -> std::result::Result<Option<Token>, ParseRule> {
    let mut fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 10 {
        fields = line.split_whitespace().collect();
    }
    if fields.len() != 10 {
        return Err(ParseRule::Malformed);
    }
    // multiword-token ranges and empty nodes carry no syntactic head
    if fields[0].contains('-') || fields[0].contains('.') {
        return Ok(None);
    }
    let index: usize = fields[0].parse().map_err(|_| ParseRule::Malformed)?;
    let head: usize = fields[6].parse().map_err(|_| ParseRule::Malformed)?;
    let space_after = !fields[9].split('|').any(|m| m == "SpaceAfter=No");
    Ok(Some(Token {
        index,
        form: fields[1].to_string(),
        lemma: fields[2].to_string(),
        upos: fields[3].to_string(),
        feats: if fields[5] == "_" {
            String::new()
        } else {
            fields[5].to_string()
        },
        head,
        deprel: fields[7].to_string(),
        space_after,
    }))
}

/// Serializes sentences back to CoNLL-U with `# tweet_id` comments.
pub fn write_parses(mut out: impl Write, sentences: &[DepSentence]) -> std::io::Result<()> {
    for s in sentences {
        writeln!(out, "# tweet_id = {}", s.tweet_id)?;
        for t in &s.tokens {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t_\t{}\t{}\t{}\t_\t{}",
                t.index,
                t.form,
                t.lemma,
                t.upos,
                if t.feats.is_empty() { "_" } else { &t.feats },
                t.head,
                t.deprel,
                if t.space_after { "_" } else { "SpaceAfter=No" }
            )?;
        }
        writeln!(out)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Two-column user tables

/// Reads a `user_id,value` CSV with a header row.
pub fn read_user_table(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rec.len() < 2 {
            return Err(Error::Format {
                path: path.into(),
                line: i + 2,
                message: "expected two columns".into(),
            });
        }
        rows.push((rec[0].to_string(), rec[1].to_string()));
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.into(),
            line,
            message: format!("{other:?}"),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotScore {
    pub user_id: String,
    pub score: f64,
}

pub fn load_bot_scores(path: impl AsRef<Path>) -> Result<Vec<BotScore>> {
    let path = path.as_ref();
    read_user_table(path)?
        .into_iter()
        .enumerate()
        .map(|(i, (user_id, value))| {
            let score: f64 = value.parse().map_err(|_| Error::Format {
                path: path.into(),
                line: i + 2,
                message: format!("bot score `{value}` is not a number"),
            })?;
            if !(0.0..=1.0).contains(&score) {
                return Err(Error::Format {
                    path: path.into(),
                    line: i + 2,
                    message: format!("bot score {score} outside [0,1]"),
                });
            }
            Ok(BotScore { user_id, score })
        })
        .collect()
}

/// Gold stance labels (`believer` / `skeptic`, case-insensitive).
pub fn load_gold_labels(path: impl AsRef<Path>) -> Result<BTreeMap<String, Stance>> {
    let path = path.as_ref();
    read_user_table(path)?
        .into_iter()
        .enumerate()
        .map(|(i, (user, value))| {
            let stance = value.parse::<Stance>().map_err(|_| Error::Format {
                path: path.into(),
                line: i + 2,
                message: format!("unknown stance `{value}`"),
            })?;
            Ok((user, stance))
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BotPartition {
    pub humans: BTreeSet<String>,
    pub bots: BTreeSet<String>,
    pub unscored: BTreeSet<String>,
    /// Users that had more than one score; the maximum was kept.
    pub duplicate_scores: usize,
}

impl BotPartition {
    /// Whether a user takes part in the analysis as a human.
    pub fn is_human(&self, user: &str, unscored_as_human: bool) -> bool {
        self.humans.contains(user) || (unscored_as_human && self.unscored.contains(user))
    }
}

/// Splits `users` by bot score: strictly above `threshold` is a bot.
pub fn partition_bots<'a>(
    users: impl IntoIterator<Item = &'a str>,
    scores: &[BotScore],
    threshold: f64,
) -> Result<BotPartition> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::param("threshold", format!("{threshold} outside [0,1]")));
    }
    let mut best: HashMap<&str, f64> = HashMap::new();
    let mut duplicates = BTreeSet::new();
    for s in scores {
        best.entry(&s.user_id)
            .and_modify(|v| {
                duplicates.insert(s.user_id.as_str());
                *v = v.max(s.score);
            })
            .or_insert(s.score);
    }
    if !duplicates.is_empty() {
        log::warn!(
            "bot scores: {} users scored more than once, keeping the maximum",
            duplicates.len()
        );
    }
    let mut part = BotPartition {
        duplicate_scores: duplicates.len(),
        ..Default::default()
    };
    for user in users {
        match best.get(user) {
            Some(&score) if score > threshold => part.bots.insert(user.to_string()),
            Some(_) => part.humans.insert(user.to_string()),
            None => part.unscored.insert(user.to_string()),
        };
    }
    if !part.unscored.is_empty() {
        log::warn!("bot scores: {} users unscored", part.unscored.len());
    }
    Ok(part)
}

// ---------------------------------------------------------------------------
// Embedding exchange file

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub dim: usize,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl EmbeddingFile {
    pub fn new(dim: usize) -> Self {
        EmbeddingFile {
            dim,
            rows: Vec::new(),
        }
    }

    pub fn index(&self) -> HashMap<&str, &[f64]> {
        self.rows
            .iter()
            .map(|(id, v)| (id.as_str(), v.as_slice()))
            .collect()
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "dim={}", self.dim)?;
        let mut line = String::new();
        for (id, v) in &self.rows {
            line.clear();
            line.push_str(id);
            line.push('\t');
            for (i, x) in v.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                // shortest plain decimal that parses back to the same bits
                line.push_str(&x.to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        self.write(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file), path)
    }

    pub fn read(reader: impl BufRead, path: &Path) -> Result<Self> {
        let fmt_err = |line: usize, message: String| Error::Format {
            path: path.into(),
            line,
            message,
        };
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(l) => l.map_err(|e| Error::io(path, e))?,
            None => return Err(fmt_err(1, "missing `dim=` header".into())),
        };
        let dim: usize = header
            .trim()
            .strip_prefix("dim=")
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| fmt_err(1, format!("bad header `{header}`")))?;
        let mut file = EmbeddingFile::new(dim);
        let mut seen = HashSet::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line_no = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let (id, values) = line
                .split_once('\t')
                .ok_or_else(|| fmt_err(line_no, "expected `id<TAB>values`".into()))?;
            let v = values
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| fmt_err(line_no, e.to_string()))?;
            if v.len() != dim {
                return Err(fmt_err(
                    line_no,
                    format!("vector has {} values, header says {dim}", v.len()),
                ));
            }
            if !seen.insert(id.to_string()) {
                return Err(fmt_err(line_no, format!("duplicate id `{id}`")));
            }
            file.rows.push((id.to_string(), v));
        }
        Ok(file)
    }
}
