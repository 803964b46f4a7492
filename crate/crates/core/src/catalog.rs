//! Subject normalisation, per-stance ranking and focal statement selection.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::stance::Stance;
use crate::svo::BeliefStatement;

/// Sentinel for third-person and other deictic subjects.
pub const DEICTIC: &str = "DEICTIC";
/// Sentinel for subjects that are empty after normalisation.
pub const EMPTY: &str = "EMPTY";

const ARTICLES: [&str; 3] = ["the", "a", "an"];
const DEICTIC_WORDS: [&str; 8] = ["he", "she", "it", "this", "that", "they", "you", "i"];
/// Subjects with at most this many tokens also merge on their space-free form.
pub const MERGE_MAX_TOKENS: usize = 3;

pub fn is_sentinel(s: &str) -> bool {
    s == DEICTIC || s == EMPTY
}

/// Canonical surface form of a subject. Idempotent.
pub fn normalize_subject(raw: &str) -> String {
    if is_sentinel(raw) {
        return raw.to_string();
    }
    let lower = raw.to_lowercase();
    let mut words: Vec<&str> = lower.split_whitespace().collect();
    loop {
        // strip edge punctuation, then a leading article, until stable
        let before = words.clone();
        while let Some(first) = words.first() {
            let t = first.trim_start_matches(|c: char| !c.is_alphanumeric());
            if t.is_empty() {
                words.remove(0);
            } else {
                words[0] = t;
                break;
            }
        }
        while let Some(last) = words.last() {
            let t = last.trim_end_matches(|c: char| !c.is_alphanumeric());
            if t.is_empty() {
                words.pop();
            } else {
                let n = words.len();
                words[n - 1] = t;
                break;
            }
        }
        if words.len() > 1 && ARTICLES.contains(&words[0]) {
            words.remove(0);
        }
        if words == before {
            break;
        }
    }
    match words.as_slice() {
        [] => EMPTY.to_string(),
        [w] if DEICTIC_WORDS.contains(w) => DEICTIC.to_string(),
        _ => words.join(" "),
    }
}

/// Grouping key: aliases applied, short subjects compared without spaces.
pub fn merge_key(canonical: &str, aliases: &BTreeMap<String, String>) -> String {
    let c = aliases.get(canonical).map(String::as_str).unwrap_or(canonical);
    if is_sentinel(c) {
        return c.to_string();
    }
    if c.split(' ').count() <= MERGE_MAX_TOKENS {
        c.replace(' ', "")
    } else {
        c.to_string()
    }
}

/// Normalises the keys and values of a user-supplied alias table.
pub fn normalize_aliases(raw: &BTreeMap<String, String>) -> BTreeMap<String, String> {
    raw.iter()
        .map(|(k, v)| (normalize_subject(k), normalize_subject(v)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectEntry {
    pub canonical: String,
    pub key: String,
    pub variants: BTreeSet<String>,
    pub count_believer: usize,
    pub count_skeptic: usize,
    pub rank_believer: usize,
    pub rank_skeptic: usize,
    pub mean_rank: f64,
}

impl SubjectEntry {
    pub fn count(&self, stance: Stance) -> usize {
        match stance {
            Stance::Believer => self.count_believer,
            Stance::Skeptic => self.count_skeptic,
        }
    }

    pub fn total(&self) -> usize {
        self.count_believer + self.count_skeptic
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    /// Entries ordered by ascending mean rank.
    pub entries: Vec<SubjectEntry>,
    pub aliases: BTreeMap<String, String>,
    /// Statements whose subject normalised to a sentinel.
    pub deictic: usize,
    pub empty: usize,
    /// Statements by users without a stance.
    pub unassigned: usize,
}

impl Catalog {
    pub fn key_of(&self, raw_subject: &str) -> String {
        merge_key(&normalize_subject(raw_subject), &self.aliases)
    }
}

/// Counts subjects per stance and ranks them. Statements whose author has no
/// stance still contribute variants but no counts.
pub fn build_catalog(
    statements: &[BeliefStatement],
    stance_of: impl Fn(&str) -> Option<Stance>,
    aliases: &BTreeMap<String, String>,
) -> Catalog {
    let aliases = normalize_aliases(aliases);
    let mut entries: BTreeMap<String, (BTreeMap<String, usize>, [usize; 2])> = BTreeMap::new();
    let mut cat = Catalog::default();
    for s in statements {
        let canonical = normalize_subject(&s.subject);
        match canonical.as_str() {
            DEICTIC => {
                cat.deictic += 1;
                continue;
            }
            EMPTY => {
                cat.empty += 1;
                continue;
            }
            _ => {}
        }
        let key = merge_key(&canonical, &aliases);
        let (variants, counts) = entries.entry(key).or_default();
        *variants.entry(canonical).or_default() += 1;
        match stance_of(&s.user_id) {
            Some(Stance::Believer) => counts[0] += 1,
            Some(Stance::Skeptic) => counts[1] += 1,
            None => cat.unassigned += 1,
        }
    }
    let unranked = entries
        .into_iter()
        .map(|(key, (variants, counts))| {
            // display form: the most used variant, ties to the smallest
            let canonical = variants
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(v, _)| v.clone())
                .expect("entry has a variant");
            let canonical = aliases.get(&canonical).cloned().unwrap_or(canonical);
            SubjectEntry {
                canonical,
                key,
                variants: variants.into_keys().collect(),
                count_believer: counts[0],
                count_skeptic: counts[1],
                rank_believer: 0,
                rank_skeptic: 0,
                mean_rank: 0.0,
            }
        })
        .collect();
    cat.entries = rank_subjects(unranked);
    cat.aliases = aliases;
    cat
}

/// Ranks within each stance by descending count (ties by canonical form).
/// Subjects never used by a group get rank = number of subjects that group
/// used + 1. Returns entries sorted by ascending mean rank, ties by
/// canonical form.
pub fn rank_subjects(mut entries: Vec<SubjectEntry>) -> Vec<SubjectEntry> {
    for stance in Stance::ALL {
        let mut used: Vec<usize> = (0..entries.len())
            .filter(|&i| entries[i].count(stance) > 0)
            .collect();
        used.sort_by(|&a, &b| {
            entries[b]
                .count(stance)
                .cmp(&entries[a].count(stance))
                .then_with(|| entries[a].canonical.cmp(&entries[b].canonical))
        });
        let absent_rank = used.len() + 1;
        let mut ranks = vec![absent_rank; entries.len()];
        for (r, &i) in used.iter().enumerate() {
            ranks[i] = r + 1;
        }
        for (e, r) in entries.iter_mut().zip(ranks) {
            match stance {
                Stance::Believer => e.rank_believer = r,
                Stance::Skeptic => e.rank_skeptic = r,
            }
        }
    }
    for e in &mut entries {
        e.mean_rank = (e.rank_believer + e.rank_skeptic) as f64 / 2.0;
    }
    entries.sort_by(|a, b| {
        a.mean_rank
            .total_cmp(&b.mean_rank)
            .then_with(|| a.canonical.cmp(&b.canonical))
    });
    entries
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocalSet {
    pub statements: Vec<BeliefStatement>,
    /// Merge keys of the selected subjects.
    pub subjects: Vec<String>,
    pub coverage: usize,
    pub coverage_fraction: f64,
}

/// Statements whose subject is among the `top_k` best mean-ranked subjects.
pub fn focal_set(statements: &[BeliefStatement], catalog: &Catalog, top_k: usize) -> Result<FocalSet> {
    if top_k == 0 {
        return Err(Error::param("top_k", "must be at least 1"));
    }
    if catalog.entries.len() < top_k {
        log::warn!(
            "only {} distinct subjects for top_k = {top_k}; using all",
            catalog.entries.len()
        );
    }
    let subjects: Vec<String> = catalog.entries.iter().take(top_k).map(|e| e.key.clone()).collect();
    let keep: BTreeSet<&str> = subjects.iter().map(String::as_str).collect();
    let selected: Vec<BeliefStatement> = statements
        .iter()
        .filter(|s| keep.contains(catalog.key_of(&s.subject).as_str()))
        .cloned()
        .collect();
    let coverage = selected.len();
    let coverage_fraction = if statements.is_empty() {
        0.0
    } else {
        coverage as f64 / statements.len() as f64
    };
    Ok(FocalSet {
        statements: selected,
        subjects,
        coverage,
        coverage_fraction,
    })
}

/// `(rank, canonical, total count)` by descending total, for inspecting the
/// frequency distribution.
pub fn count_rank_table(catalog: &Catalog) -> Vec<(usize, String, usize)> {
    let mut rows: Vec<(String, usize)> = catalog
        .entries
        .iter()
        .map(|e| (e.canonical.clone(), e.total()))
        .collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows.into_iter()
        .enumerate()
        .map(|(i, (c, n))| (i + 1, c, n))
        .collect()
}

pub fn write_catalog(path: impl AsRef<Path>, catalog: &Catalog) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["canonical", "believer_count", "skeptic_count", "mean_rank"])
        .map_err(|e| csv_err(path, e))?;
    for e in &catalog.entries {
        w.write_record([
            e.canonical.clone(),
            e.count_believer.to_string(),
            e.count_skeptic.to_string(),
            e.mean_rank.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_count_rank(path: impl AsRef<Path>, catalog: &Catalog) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "rank,count").map_err(io)?;
    for (rank, _, count) in count_rank_table(catalog) {
        writeln!(out, "{rank},{count}").map_err(io)?;
    }
    out.flush().map_err(io)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.into(),
        line: 0,
        message: e.to_string(),
    }
}
