//! Subject–verb–object belief statements from Universal Dependencies parses.
//!
//! A clause head is the root, a predicate coordinated with a clause head
//! (`conj`), or a clausal complement (`ccomp`) of one. Each head yields at
//! most one statement:
//!
//! * copular heads (with a `cop` dependent) give `(subject, be, predicate)`
//!   and set `attribute`;
//! * other heads give `(subject, verb lemma, obj)`, falling back to an
//!   `xcomp` complement when there is no direct object;
//! * a coordinated head without its own subject inherits its head's subject;
//! * when a complement clause yields a statement, the embedding clause does
//!   not (the innermost complete statement wins);
//! * interrogative clauses yield nothing.
//!
//! Spans are full dependency subtrees without punctuation; `@` is stripped
//! from mentions but the mention is kept.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{DepSentence, Token, Tweet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefStatement {
    pub statement_id: String,
    pub tweet_id: String,
    pub user_id: String,
    pub timestamp: i64,
    pub subject: String,
    pub verb: String,
    pub object: String,
    pub negated: bool,
    pub attribute: bool,
    /// Token indices (1-based) of the subject span.
    pub subject_tokens: Vec<usize>,
    pub verb_token: usize,
    pub object_tokens: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticCategory {
    NoSubject,
    NoObject,
    Interrogative,
    Fragment,
}

impl DiagnosticCategory {
    pub const ALL: [DiagnosticCategory; 4] = [
        DiagnosticCategory::NoSubject,
        DiagnosticCategory::NoObject,
        DiagnosticCategory::Interrogative,
        DiagnosticCategory::Fragment,
    ];
}

impl fmt::Display for DiagnosticCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiagnosticCategory::NoSubject => "no-subject",
            DiagnosticCategory::NoObject => "no-object",
            DiagnosticCategory::Interrogative => "interrogative",
            DiagnosticCategory::Fragment => "fragment",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub tweet_id: String,
    pub sent_index: usize,
    /// Clause head token, or 0 for a sentence without any clause.
    pub token: usize,
    pub category: DiagnosticCategory,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extraction {
    pub statements: Vec<BeliefStatement>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Extraction {
    pub fn merge(&mut self, other: Extraction) {
        self.statements.extend(other.statements);
        self.diagnostics.extend(other.diagnostics);
    }

    pub fn category_counts(&self) -> BTreeMap<DiagnosticCategory, usize> {
        let mut counts: BTreeMap<_, _> = DiagnosticCategory::ALL.iter().map(|c| (*c, 0)).collect();
        for d in &self.diagnostics {
            *counts.entry(d.category).or_default() += 1;
        }
        counts
    }
}

const NEGATION_LEMMAS: [&str; 4] = ["not", "n't", "never", "no"];

/// Relations whose subtrees belong to another clause or to the clause frame
/// rather than to a copular predicate.
const NON_PREDICATE_RELS: [&str; 15] = [
    "nsubj", "csubj", "cop", "aux", "punct", "cc", "ccomp", "advcl", "parataxis", "mark", "obl:tmod",
    "discourse", "vocative", "expl", "advmod",
];

struct Parse<'a> {
    sentence: &'a DepSentence,
    children: Vec<Vec<usize>>,
}

impl<'a> Parse<'a> {
    fn new(sentence: &'a DepSentence) -> Self {
        let mut children = vec![Vec::new(); sentence.tokens.len() + 1];
        for t in &sentence.tokens {
            children[t.head].push(t.index);
        }
        Parse { sentence, children }
    }

    fn tok(&self, i: usize) -> &'a Token {
        self.sentence.token(i)
    }

    fn kids(&self, i: usize) -> impl Iterator<Item = &'a Token> + '_ {
        self.children[i].iter().map(move |&c| self.sentence.token(c))
    }

    fn child_with(&self, i: usize, rel: &str) -> Option<&'a Token> {
        self.kids(i).find(|t| t.base_rel() == rel)
    }

    fn subject_of(&self, i: usize) -> Option<&'a Token> {
        self.child_with(i, "nsubj")
    }

    fn is_copular(&self, i: usize) -> bool {
        self.child_with(i, "cop").is_some()
    }

    fn is_predicate(&self, i: usize) -> bool {
        let t = self.tok(i);
        matches!(t.upos.as_str(), "VERB" | "AUX") || self.is_copular(i) || self.subject_of(i).is_some()
    }

    /// Subtree of `i`, skipping children accepted by `skip`.
    fn subtree(&self, i: usize, skip: &dyn Fn(&Token) -> bool) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = vec![i];
        while let Some(n) = stack.pop() {
            out.insert(n);
            for c in self.kids(n) {
                if !skip(c) {
                    stack.push(c.index);
                }
            }
        }
        out
    }

    fn span(&self, i: usize) -> BTreeSet<usize> {
        let mut s = self.subtree(i, &|_| false);
        s.retain(|&k| self.tok(k).upos != "PUNCT");
        s
    }

    fn render(&self, span: &BTreeSet<usize>) -> String {
        let mut out = String::new();
        let mut pending_space = false;
        for &k in span {
            let t = self.tok(k);
            let form = t.form.strip_prefix('@').filter(|f| !f.is_empty()).unwrap_or(&t.form);
            if pending_space {
                out.push(' ');
            }
            out.push_str(form);
            pending_space = t.space_after;
        }
        out
    }
}

#[derive(Debug)]
struct Clause {
    head: usize,
    parent: Option<usize>,
    rel: ClauseRel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ClauseRel {
    Root,
    Conj,
    Complement,
}

fn collect_clauses(p: &Parse) -> Vec<Clause> {
    let root = p
        .sentence
        .tokens
        .iter()
        .find(|t| t.head == 0)
        .map(|t| t.index)
        .expect("validated sentence has a root");
    let mut clauses = Vec::new();
    if !p.is_predicate(root) {
        return clauses;
    }
    let mut stack = vec![(root, None, ClauseRel::Root)];
    while let Some((head, parent, rel)) = stack.pop() {
        clauses.push(Clause { head, parent, rel });
        for c in p.kids(head) {
            match c.base_rel() {
                "conj" if p.is_predicate(c.index) => {
                    stack.push((c.index, Some(head), ClauseRel::Conj))
                }
                "ccomp" => stack.push((c.index, Some(head), ClauseRel::Complement)),
                _ => {}
            }
        }
    }
    clauses.sort_by_key(|c| c.head);
    clauses
}

/// Tokens a clause owns: its head's subtree without nested clause subtrees.
fn own_tokens(p: &Parse, head: usize, clause_heads: &BTreeSet<usize>) -> BTreeSet<usize> {
    p.subtree(head, &|t| clause_heads.contains(&t.index) && t.index != head)
}

fn interrogative_clauses(p: &Parse, clauses: &[Clause]) -> BTreeSet<usize> {
    let heads: BTreeSet<usize> = clauses.iter().map(|c| c.head).collect();
    let owner: BTreeMap<usize, usize> = clauses
        .iter()
        .flat_map(|c| own_tokens(p, c.head, &heads).into_iter().map(move |t| (t, c.head)))
        .collect();
    let mut flagged = BTreeSet::new();
    for t in &p.sentence.tokens {
        if t.form != "?" {
            continue;
        }
        // the question mark closes whichever clause owns the preceding word
        let prev = (1..t.index).rev().find(|&k| p.tok(k).upos != "PUNCT");
        if let Some(h) = prev.and_then(|k| owner.get(&k)) {
            flagged.insert(*h);
        }
    }
    for c in clauses {
        if let Some(subj) = p.subject_of(c.head) {
            let inverted = p
                .kids(c.head)
                .any(|k| matches!(k.base_rel(), "aux" | "cop") && k.index < subj.index);
            if inverted {
                flagged.insert(c.head);
            }
        }
    }
    // questions spread along complement links in both directions
    loop {
        let before = flagged.len();
        for c in clauses {
            if c.rel != ClauseRel::Complement {
                continue;
            }
            let parent = c.parent.expect("complement has a parent");
            if flagged.contains(&parent) || flagged.contains(&c.head) {
                flagged.insert(parent);
                flagged.insert(c.head);
            }
        }
        if flagged.len() == before {
            break;
        }
    }
    flagged
}

fn negation_count(p: &Parse, head: usize) -> usize {
    p.kids(head)
        .filter(|k| {
            k.base_rel() == "neg"
                || (k.base_rel() == "advmod"
                    && NEGATION_LEMMAS.contains(&k.lemma.to_lowercase().as_str()))
        })
        .count()
}

enum ClauseOutcome {
    Statement(BeliefStatement),
    Failed(DiagnosticCategory),
}

/// Extracts belief statements from one parsed sentence of `tweet`.
pub fn extract_svo(sentence: &DepSentence, tweet: &Tweet) -> Extraction {
    let p = Parse::new(sentence);
    let clauses = collect_clauses(&p);
    let mut out = Extraction::default();
    let diag = |token, category| Diagnostic {
        tweet_id: sentence.tweet_id.clone(),
        sent_index: sentence.sent_index,
        token,
        category,
    };
    if clauses.is_empty() {
        out.diagnostics.push(diag(0, DiagnosticCategory::Fragment));
        return out;
    }
    let questions = interrogative_clauses(&p, &clauses);
    let heads: BTreeSet<usize> = clauses.iter().map(|c| c.head).collect();

    // innermost first: a complement is always deeper than its parent
    let depth = |mut h: usize| {
        let mut d = 0;
        while let Some(c) = clauses.iter().find(|c| c.head == h) {
            match c.parent {
                Some(parent) => {
                    d += 1;
                    h = parent;
                }
                None => break,
            }
        }
        d
    };
    let mut order: Vec<&Clause> = clauses.iter().collect();
    order.sort_by_key(|c| (std::cmp::Reverse(depth(c.head)), c.head));

    let mut outcomes: BTreeMap<usize, ClauseOutcome> = BTreeMap::new();
    for clause in order {
        let outcome = if questions.contains(&clause.head) {
            ClauseOutcome::Failed(DiagnosticCategory::Interrogative)
        } else {
            let nested_ok = clauses.iter().any(|c| {
                c.parent == Some(clause.head)
                    && c.rel == ClauseRel::Complement
                    && complement_yields(c.head, &clauses, &outcomes)
            });
            if nested_ok {
                continue;
            }
            clause_statement(&p, clause, &clauses, &heads, tweet)
        };
        outcomes.insert(clause.head, outcome);
    }
    for (head, outcome) in outcomes {
        match outcome {
            ClauseOutcome::Statement(s) => out.statements.push(s),
            ClauseOutcome::Failed(cat) => out.diagnostics.push(diag(head, cat)),
        }
    }
    out
}

fn complement_yields(
    head: usize,
    clauses: &[Clause],
    outcomes: &BTreeMap<usize, ClauseOutcome>,
) -> bool {
    match outcomes.get(&head) {
        Some(ClauseOutcome::Statement(_)) => true,
        Some(ClauseOutcome::Failed(_)) => false,
        // suppressed because something deeper yielded
        None => clauses.iter().any(|c| c.parent == Some(head)),
    }
}

fn clause_statement(
    p: &Parse,
    clause: &Clause,
    clauses: &[Clause],
    heads: &BTreeSet<usize>,
    tweet: &Tweet,
) -> ClauseOutcome {
    let head = clause.head;
    let mut subject = p.subject_of(head);
    let mut cur = clause;
    while subject.is_none() && cur.rel == ClauseRel::Conj {
        let parent = cur.parent.expect("conj has a parent");
        subject = p.subject_of(parent);
        match clauses.iter().find(|c| c.head == parent) {
            Some(c) => cur = c,
            None => break,
        }
    }
    let Some(subject) = subject else {
        return ClauseOutcome::Failed(DiagnosticCategory::NoSubject);
    };

    let (verb_token, object_span, attribute) = if let Some(cop) = p.child_with(head, "cop") {
        let span: BTreeSet<usize> = p
            .subtree(head, &|t| {
                t.head == head
                    && (NON_PREDICATE_RELS.contains(&t.base_rel()) || heads.contains(&t.index))
            })
            .into_iter()
            .filter(|&k| p.tok(k).upos != "PUNCT")
            .collect();
        (cop.index, span, true)
    } else if let Some(obj) = p.child_with(head, "obj") {
        (head, p.span(obj.index), false)
    } else if let Some(xcomp) = p.child_with(head, "xcomp") {
        let mut span = p.span(xcomp.index);
        for m in p.kids(xcomp.index).filter(|k| k.base_rel() == "mark") {
            span.remove(&m.index);
        }
        (head, span, false)
    } else {
        return ClauseOutcome::Failed(DiagnosticCategory::NoObject);
    };

    let subject_span = p.span(subject.index);
    let subject_text = p.render(&subject_span);
    let object_text = p.render(&object_span);
    if subject_text.is_empty() {
        return ClauseOutcome::Failed(DiagnosticCategory::NoSubject);
    }
    if object_text.is_empty() {
        return ClauseOutcome::Failed(DiagnosticCategory::NoObject);
    }
    let sentence = p.sentence;
    ClauseOutcome::Statement(BeliefStatement {
        statement_id: format!("{}:{}:{}", sentence.tweet_id, sentence.sent_index, head),
        tweet_id: sentence.tweet_id.clone(),
        user_id: tweet.user_id.clone(),
        timestamp: tweet.timestamp,
        subject: subject_text,
        verb: p.tok(verb_token).lemma.to_lowercase(),
        object: object_text,
        negated: negation_count(p, head) % 2 == 1,
        attribute,
        subject_tokens: subject_span.into_iter().collect(),
        verb_token,
        object_tokens: object_span.into_iter().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Number {
    Sing,
    Plur,
}

fn pronoun_number(t: &Token) -> Option<Number> {
    if t.upos != "PRON" {
        return None;
    }
    match t.form.to_lowercase().as_str() {
        "he" | "she" | "it" => Some(Number::Sing),
        "they" => Some(Number::Plur),
        _ => None,
    }
}

fn noun_number(t: &Token) -> Option<Number> {
    if !matches!(t.upos.as_str(), "NOUN" | "PROPN") {
        return None;
    }
    if matches!(t.base_rel(), "compound" | "flat" | "fixed") {
        return None;
    }
    Some(match t.feat("Number") {
        Some("Plur") => Number::Plur,
        Some(_) => Number::Sing,
        None if t.upos == "NOUN" && t.form.len() > 3 && t.form.ends_with('s') => Number::Plur,
        None => Number::Sing,
    })
}

/// Replaces third-person pronoun subjects by the nearest preceding noun-phrase
/// head (with its compound / flat name parts) from earlier sentences of the
/// same tweet that agrees in number. Unresolvable pronouns stay as they are.
pub fn resolve_pronouns(sentence: &DepSentence, context: &[DepSentence]) -> DepSentence {
    let mut out = sentence.clone();
    for tok in out.tokens.iter_mut() {
        if tok.base_rel() != "nsubj" {
            continue;
        }
        let Some(number) = pronoun_number(tok) else {
            continue;
        };
        let antecedent = context
            .iter()
            .rev()
            .filter(|s| s.tweet_id == sentence.tweet_id)
            .find_map(|s| {
                s.tokens
                    .iter()
                    .rev()
                    .find(|t| noun_number(t) == Some(number))
                    .map(|t| (s, t.index))
            });
        if let Some((s, idx)) = antecedent {
            let p = Parse::new(s);
            let mut span: BTreeSet<usize> = p
                .kids(idx)
                .filter(|k| matches!(k.base_rel(), "compound" | "flat"))
                .flat_map(|k| p.span(k.index))
                .collect();
            span.insert(idx);
            let phrase = p.render(&span);
            tok.lemma = phrase.clone();
            tok.form = phrase;
        }
    }
    out
}

/// Resolves pronouns sentence by sentence and extracts statements for one
/// tweet. `sentences` must be that tweet's sentences in order.
pub fn extract_tweet(sentences: &[DepSentence], tweet: &Tweet) -> Extraction {
    let mut out = Extraction::default();
    for (i, s) in sentences.iter().enumerate() {
        let resolved = resolve_pronouns(s, &sentences[..i]);
        out.merge(extract_svo(&resolved, tweet));
    }
    out
}


/// Writes statements as JSON lines.
pub fn write_statements(mut out: impl Write, statements: &[BeliefStatement]) -> std::io::Result<()> {
    for s in statements {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_statements(path: impl AsRef<Path>, statements: &[BeliefStatement]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_statements(BufWriter::new(file), statements).map_err(|e| Error::io(path, e))
}

pub fn load_statements(path: impl AsRef<Path>) -> Result<Vec<BeliefStatement>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: BeliefStatement = serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(s);
    }
    Ok(out)
}

/// Writes `category,count` rows for every category, zeros included.
pub fn write_diagnostic_counts(
    path: impl AsRef<Path>,
    counts: &BTreeMap<DiagnosticCategory, usize>,
) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "category,count").map_err(io)?;
    for c in DiagnosticCategory::ALL {
        writeln!(out, "{c},{}", counts.get(&c).copied().unwrap_or(0)).map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::read_parses;

    pub(crate) fn tweet(id: &str) -> Tweet {
        Tweet {
            tweet_id: id.into(),
            user_id: "u".into(),
            timestamp: 0,
            text: "x".into(),
            retweeted_user: None,
            lang: "en".into(),
        }
    }

    /// Builds a sentence from `form lemma upos head deprel` rows.
    fn sent(id: &str, rows: &[(&str, &str, &str, usize, &str)]) -> DepSentence {
        let mut conllu = format!("# tweet_id = {id}\n");
        for (i, (form, lemma, upos, head, rel)) in rows.iter().enumerate() {
            let next_is_punct = rows.get(i + 1).is_some_and(|r| r.2 == "PUNCT");
            let misc = if next_is_punct { "SpaceAfter=No" } else { "_" };
            conllu.push_str(&format!(
                "{}\t{form}\t{lemma}\t{upos}\t_\t_\t{head}\t{rel}\t_\t{misc}\n",
                i + 1
            ));
        }
        let mut load = read_parses(conllu.as_bytes()).unwrap();
        assert!(load.rejected.is_empty(), "{:?}", load.rejected);
        load.sentences.remove(0)
    }

    fn triples(ex: &Extraction) -> Vec<(String, String, String, bool, bool)> {
        ex.statements
            .iter()
            .map(|s| (s.subject.clone(), s.verb.clone(), s.object.clone(), s.negated, s.attribute))
            .collect()
    }

    fn t(s: &str, v: &str, o: &str, neg: bool, attr: bool) -> (String, String, String, bool, bool) {
        (s.into(), v.into(), o.into(), neg, attr)
    }

    #[test]
    fn copular_with_negation() {
        let s = sent(
            "n1",
            &[
                ("Climate", "climate", "NOUN", 2, "compound"),
                ("change", "change", "NOUN", 5, "nsubj"),
                ("is", "be", "AUX", 5, "cop"),
                ("not", "not", "PART", 5, "advmod"),
                ("real", "real", "ADJ", 0, "root"),
                (".", ".", "PUNCT", 5, "punct"),
            ],
        );
        let ex = extract_svo(&s, &tweet("n1"));
        assert_eq!(triples(&ex), vec![t("Climate change", "be", "real", true, true)]);
        let st = &ex.statements[0];
        assert_eq!(st.subject_tokens, vec![1, 2]);
        assert_eq!(st.verb_token, 3);
        assert_eq!(st.object_tokens, vec![5]);
    }

    #[test]
    fn double_negation_cancels() {
        let s = sent(
            "n2",
            &[
                ("Climate", "climate", "NOUN", 2, "compound"),
                ("change", "change", "NOUN", 6, "nsubj"),
                ("is", "be", "AUX", 6, "cop"),
                ("n't", "not", "PART", 6, "advmod"),
                ("not", "not", "PART", 6, "advmod"),
                ("unreal", "unreal", "ADJ", 0, "root"),
            ],
        );
        let ex = extract_svo(&s, &tweet("n2"));
        assert_eq!(ex.statements.len(), 1);
        assert!(!ex.statements[0].negated);
    }

    #[test]
    fn question_yields_nothing() {
        let s = sent(
            "q",
            &[
                ("Why", "why", "ADV", 4, "advmod"),
                ("do", "do", "AUX", 4, "aux"),
                ("Democrats", "Democrats", "PROPN", 4, "nsubj"),
                ("continue", "continue", "VERB", 0, "root"),
                ("to", "to", "PART", 6, "mark"),
                ("lie", "lie", "VERB", 4, "xcomp"),
                ("about", "about", "ADP", 9, "case"),
                ("climate", "climate", "NOUN", 9, "compound"),
                ("change", "change", "NOUN", 6, "obl"),
                ("?", "?", "PUNCT", 4, "punct"),
            ],
        );
        let ex = extract_svo(&s, &tweet("q"));
        assert!(ex.statements.is_empty());
        assert_eq!(ex.diagnostics[0].category, DiagnosticCategory::Interrogative);
    }

    #[test]
    fn fragment_and_missing_parts() {
        let frag = sent(
            "f",
            &[
                ("Climate", "climate", "NOUN", 2, "compound"),
                ("change", "change", "NOUN", 0, "root"),
                ("!", "!", "PUNCT", 2, "punct"),
            ],
        );
        let ex = extract_svo(&frag, &tweet("f"));
        assert_eq!(ex.diagnostics[0].category, DiagnosticCategory::Fragment);

        let imperative = sent(
            "i",
            &[
                ("Stop", "stop", "VERB", 0, "root"),
                ("coal", "coal", "NOUN", 1, "obj"),
            ],
        );
        let ex = extract_svo(&imperative, &tweet("i"));
        assert_eq!(ex.diagnostics[0].category, DiagnosticCategory::NoSubject);

        let intransitive = sent(
            "v",
            &[
                ("Biden", "Biden", "PROPN", 2, "nsubj"),
                ("spoke", "speak", "VERB", 0, "root"),
            ],
        );
        let ex = extract_svo(&intransitive, &tweet("v"));
        assert_eq!(ex.diagnostics[0].category, DiagnosticCategory::NoObject);
        assert_eq!(ex.category_counts()[&DiagnosticCategory::NoObject], 1);
    }

    #[test]
    fn coordinated_clauses_share_subject() {
        let s = sent(
            "c",
            &[
                ("Climate", "climate", "NOUN", 2, "compound"),
                ("change", "change", "NOUN", 4, "nsubj"),
                ("is", "be", "AUX", 4, "cop"),
                ("real", "real", "ADJ", 0, "root"),
                ("and", "and", "CCONJ", 6, "cc"),
                ("threatens", "threaten", "VERB", 4, "conj"),
                ("our", "we", "PRON", 8, "nmod:poss"),
                ("future", "future", "NOUN", 6, "obj"),
            ],
        );
        let ex = extract_svo(&s, &tweet("c"));
        assert_eq!(
            triples(&ex),
            vec![
                t("Climate change", "be", "real", false, true),
                t("Climate change", "threaten", "our future", false, false)
            ]
        );
    }

    #[test]
    fn complement_clause_wins() {
        let s = sent(
            "cc",
            &[
                ("Scientists", "scientist", "NOUN", 2, "nsubj"),
                ("say", "say", "VERB", 0, "root"),
                ("that", "that", "SCONJ", 7, "mark"),
                ("climate", "climate", "NOUN", 5, "compound"),
                ("change", "change", "NOUN", 7, "nsubj"),
                ("is", "be", "AUX", 7, "cop"),
                ("real", "real", "ADJ", 2, "ccomp"),
            ],
        );
        let ex = extract_svo(&s, &tweet("cc"));
        assert_eq!(triples(&ex), vec![t("climate change", "be", "real", false, true)]);
        assert!(ex.diagnostics.is_empty());
    }

    #[test]
    fn mentions_keep_text_without_at_sign() {
        let conllu = "# tweet_id = m\n\
1\tThe\tthe\tDET\t_\t_\t2\tdet\t_\t_\n\
2\t@DEC\tDEC\tPROPN\t_\t_\t5\tnmod:poss\t_\tSpaceAfter=No\n\
3\t's\t's\tPART\t_\t_\t2\tcase\t_\t_\n\
4\tJustin\tJustin\tPROPN\t_\t_\t5\tcompound\t_\t_\n\
5\tGood\tGood\tPROPN\t_\t_\t7\tnsubj\t_\t_\n\
6\t@DECGood\tDECGood\tPROPN\t_\t_\t5\tappos\t_\t_\n\
7\tsupports\tsupport\tVERB\t_\t_\t0\troot\t_\t_\n\
8\thydrogen\thydrogen\tNOUN\t_\t_\t7\tobj\t_\t_\n";
        let s = read_parses(conllu.as_bytes()).unwrap().sentences.remove(0);
        let ex = extract_svo(&s, &tweet("m"));
        assert_eq!(ex.statements[0].subject, "The DEC's Justin Good DECGood");
    }

    #[test]
    fn pronoun_resolution() {
        let first = sent(
            "p",
            &[
                ("Biden", "Biden", "PROPN", 2, "nsubj"),
                ("spoke", "speak", "VERB", 0, "root"),
                (".", ".", "PUNCT", 2, "punct"),
            ],
        );
        let mut second = sent(
            "p",
            &[
                ("He", "he", "PRON", 2, "nsubj"),
                ("supports", "support", "VERB", 0, "root"),
                ("climate", "climate", "NOUN", 4, "compound"),
                ("action", "action", "NOUN", 2, "obj"),
            ],
        );
        second.sent_index = 1;
        let resolved = resolve_pronouns(&second, std::slice::from_ref(&first));
        assert_eq!(resolved.tokens[0].form, "Biden");
        let ex = extract_tweet(&[first.clone(), second.clone()], &tweet("p"));
        assert_eq!(
            triples(&ex),
            vec![t("Biden", "support", "climate action", false, false)]
        );
        // no antecedent: unchanged
        assert_eq!(resolve_pronouns(&second, &[]), second);
        // non-pronominal subject: unchanged
        assert_eq!(resolve_pronouns(&first, &[]), first);
    }

    #[test]
    fn plural_pronoun_skips_singular_antecedent() {
        let first = sent(
            "pl",
            &[
                ("The", "the", "DET", 2, "det"),
                ("globalists", "globalist", "NOUN", 3, "nsubj"),
                ("lie", "lie", "VERB", 0, "root"),
                ("about", "about", "ADP", 5, "case"),
                ("Trump", "Trump", "PROPN", 3, "obl"),
            ],
        );
        let second = sent(
            "pl",
            &[
                ("They", "they", "PRON", 2, "nsubj"),
                ("want", "want", "VERB", 0, "root"),
                ("control", "control", "NOUN", 2, "obj"),
            ],
        );
        let resolved = resolve_pronouns(&second, std::slice::from_ref(&first));
        assert_eq!(resolved.tokens[0].form, "globalists");
    }

    use proptest::prelude::*;

    const RELS: [&str; 12] = [
        "nsubj", "obj", "cop", "advmod", "conj", "ccomp", "det", "amod", "xcomp", "punct", "cc", "aux",
    ];
    const UPOS: [&str; 6] = ["NOUN", "VERB", "AUX", "ADJ", "PRON", "PUNCT"];

    /// Random well-formed trees: token i (1-based, i > 1) attaches to an
    /// earlier token, so there are no cycles and token 1 is the root.
    fn arb_sentence() -> impl Strategy<Value = DepSentence> {
        (2usize..14)
            .prop_flat_map(|n| {
                let heads: Vec<_> = (1..n).map(|i| 1..=i).collect();
                let rels = prop::collection::vec(0..RELS.len(), n);
                let upos = prop::collection::vec(0..UPOS.len(), n);
                let lemmas = prop::collection::vec(prop::sample::select(vec!["not", "x", "be", "?"]), n);
                (heads, rels, upos, lemmas)
            })
            .prop_map(|(heads, rels, upos, lemmas)| {
                let n = rels.len();
                let tokens = (1..=n)
                    .map(|i| Token {
                        index: i,
                        form: lemmas[i - 1].to_string(),
                        lemma: lemmas[i - 1].to_string(),
                        upos: UPOS[upos[i - 1]].to_string(),
                        feats: "_".into(),
                        head: if i == 1 { 0 } else { heads[i - 2] },
                        deprel: if i == 1 { "root".into() } else { RELS[rels[i - 1]].into() },
                        space_after: true,
                    })
                    .collect();
                DepSentence {
                    tweet_id: "p".into(),
                    sent_index: 0,
                    tokens,
                }
            })
    }

    proptest! {
        #[test]
        fn statements_are_deterministic_and_in_range(s in arb_sentence()) {
            prop_assert!(s.validate().is_ok());
            let a = extract_svo(&s, &tweet("p"));
            let b = extract_svo(&s, &tweet("p"));
            prop_assert_eq!(&a, &b);
            let n = s.tokens.len();
            for st in &a.statements {
                prop_assert!(!st.subject.is_empty() && !st.object.is_empty());
                let all = st.subject_tokens.iter().chain(&st.object_tokens).chain([&st.verb_token]);
                for &k in all {
                    prop_assert!((1..=n).contains(&k));
                }
                prop_assert_eq!(&st.verb, &s.token(st.verb_token).lemma.to_lowercase());
            }
            if a.statements.is_empty() {
                prop_assert!(!a.diagnostics.is_empty());
            }
        }

        #[test]
        fn negation_follows_parity(extra in 0usize..5) {
            let mut rows = vec![
                ("Coal", "coal", "NOUN", 3usize, "nsubj"),
                ("is", "be", "AUX", 3, "cop"),
                ("bad", "bad", "ADJ", 0, "root"),
            ];
            for _ in 0..extra {
                rows.push(("not", "not", "PART", 3, "advmod"));
            }
            let ex = extract_svo(&sent("neg", &rows), &tweet("neg"));
            prop_assert_eq!(ex.statements[0].negated, extra % 2 == 1);
        }
    }

    #[test]
    fn statements_round_trip_as_json_lines() {
        let s = sent(
            "rt",
            &[
                ("Coal", "coal", "NOUN", 2, "nsubj"),
                ("kills", "kill", "VERB", 0, "root"),
                ("people", "people", "NOUN", 2, "obj"),
            ],
        );
        let ex = extract_svo(&s, &tweet("rt"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        save_statements(&path, &ex.statements).unwrap();
        assert_eq!(load_statements(&path).unwrap(), ex.statements);
        let counts = ex.category_counts();
        write_diagnostic_counts(dir.path().join("d.csv"), &counts).unwrap();
        let text = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
        assert_eq!(text.lines().count(), 5);
    }
}
