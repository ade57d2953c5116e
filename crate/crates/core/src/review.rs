//! Expert review of extracted triples.
//!
//! Each review run lives in its own directory: `items.jsonl` holds the
//! initial item set and is written once, `events.jsonl` is an append-only
//! decision log. State is always the fold of the log over the items, so a
//! restart simply replays. Every event is synced to disk before the
//! decision is acknowledged.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::corpus::{Dataset, Triple};
use crate::extract::ExtractionRun;
use crate::text::normalize;

const EXCERPT_MARGIN: usize = 80;
pub const DEFAULT_PAGE_SIZE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    Pending,
    Accepted,
    Rejected,
    Edited,
}

impl std::str::FromStr for ReviewStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pending" => Ok(ReviewStatus::Pending),
            "accepted" => Ok(ReviewStatus::Accepted),
            "rejected" => Ok(ReviewStatus::Rejected),
            "edited" => Ok(ReviewStatus::Edited),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub id: String,
    pub triple: Triple,
    pub context_excerpt: String,
    pub status: ReviewStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edited_triple: Option<Triple>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decided_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
    Edit { edited_triple: Triple },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionEvent {
    pub seq: u64,
    pub item_id: String,
    #[serde(flatten)]
    pub decision: Decision,
    pub reviewer: String,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("unknown review run `{0}`")]
    UnknownRun(String),
    #[error("unknown item `{item}` in run `{run}`")]
    UnknownItem { run: String, item: String },
    #[error("review run `{0}` already exists")]
    DuplicateRun(String),
    #[error("item `{item}` was already decided ({status:?})")]
    Conflict { item: String, status: ReviewStatus },
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Corrupt {
        path: String,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReviewStats {
    pub total: usize,
    pub pending: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub edited: usize,
    pub decided: usize,
    /// `(accepted + edited) / decided`; absent when nothing is decided.
    pub acceptance_rate: Option<f64>,
}

impl ReviewStats {
    pub fn from_counts(pending: usize, accepted: usize, rejected: usize, edited: usize) -> Self {
        let decided = accepted + rejected + edited;
        ReviewStats {
            total: decided + pending,
            pending,
            accepted,
            rejected,
            edited,
            decided,
            acceptance_rate: (decided > 0).then(|| (accepted + edited) as f64 / decided as f64),
        }
    }
}

/// Items of one run plus the events applied so far.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRunState {
    pub run_id: String,
    pub items: Vec<ReviewItem>,
    pub events: Vec<DecisionEvent>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReviewError + '_ {
    move |source| ReviewError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn check_triple(t: &Triple) -> Result<(), ReviewError> {
    if t.subject.trim().is_empty() || t.object.trim().is_empty() || t.relation.trim().is_empty() {
        return Err(ReviewError::Invalid(
            "edited triple needs subject, object and relation".into(),
        ));
    }
    Ok(())
}

impl ReviewRunState {
    pub fn new(run_id: impl Into<String>, items: Vec<ReviewItem>) -> Self {
        ReviewRunState {
            run_id: run_id.into(),
            items,
            events: Vec::new(),
        }
    }

    pub fn item(&self, id: &str) -> Option<&ReviewItem> {
        self.items.iter().find(|i| i.id == id)
    }

    /// Validate an event against the current state without applying it.
    pub fn check(
        &self,
        item_id: &str,
        decision: &Decision,
        reviewer: &str,
    ) -> Result<(), ReviewError> {
        let item = self.item(item_id).ok_or_else(|| ReviewError::UnknownItem {
            run: self.run_id.clone(),
            item: item_id.to_string(),
        })?;
        if item.status != ReviewStatus::Pending {
            return Err(ReviewError::Conflict {
                item: item_id.to_string(),
                status: item.status,
            });
        }
        if reviewer.trim().is_empty() {
            return Err(ReviewError::Invalid("reviewer is required".into()));
        }
        if let Decision::Edit { edited_triple } = decision {
            check_triple(edited_triple)?;
        }
        Ok(())
    }

    pub fn apply(&mut self, ev: DecisionEvent) -> Result<ReviewItem, ReviewError> {
        self.check(&ev.item_id, &ev.decision, &ev.reviewer)?;
        let item = self
            .items
            .iter_mut()
            .find(|i| i.id == ev.item_id)
            .expect("checked");
        match &ev.decision {
            Decision::Accept => item.status = ReviewStatus::Accepted,
            Decision::Reject => item.status = ReviewStatus::Rejected,
            Decision::Edit { edited_triple } => {
                let mut t = edited_triple.clone();
                if t.source_doc.is_empty() {
                    t.source_doc = item.triple.source_doc.clone();
                }
                item.status = ReviewStatus::Edited;
                item.edited_triple = Some(t);
            }
        }
        item.reviewer = Some(ev.reviewer.clone());
        item.decided_at = Some(ev.at);
        let out = item.clone();
        self.events.push(ev);
        Ok(out)
    }

    /// Fold events over a fresh item set.
    pub fn replay(
        run_id: &str,
        items: Vec<ReviewItem>,
        events: &[DecisionEvent],
    ) -> Result<Self, ReviewError> {
        let mut s = ReviewRunState::new(run_id, items);
        for ev in events {
            s.apply(ev.clone())?;
        }
        Ok(s)
    }

    pub fn stats(&self) -> ReviewStats {
        let n = |st: ReviewStatus| self.items.iter().filter(|i| i.status == st).count();
        ReviewStats::from_counts(
            n(ReviewStatus::Pending),
            n(ReviewStatus::Accepted),
            n(ReviewStatus::Rejected),
            n(ReviewStatus::Edited),
        )
    }

    /// Accepted triples as-is and edited ones in their edited form, by item id.
    pub fn export_accepted(&self) -> Vec<Triple> {
        let mut items: Vec<&ReviewItem> = self.items.iter().collect();
        items.sort_by(|a, b| a.id.cmp(&b.id));
        items
            .into_iter()
            .filter_map(|i| match i.status {
                ReviewStatus::Accepted => Some(i.triple.clone()),
                ReviewStatus::Edited => i.edited_triple.clone(),
                _ => None,
            })
            .collect()
    }
}

/// Text around the first mentions of both endpoints.
pub fn context_excerpt(text: &str, t: &Triple) -> String {
    let chars: Vec<char> = text.chars().collect();
    let lower: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
    // Lowercasing can change length; fall back to the whole text then.
    let find = |needle: &str| -> Option<(usize, usize)> {
        if lower.len() != chars.len() {
            return None;
        }
        let n: Vec<char> = needle.trim().to_lowercase().chars().collect();
        if n.is_empty() || n.len() > lower.len() {
            return None;
        }
        (0..=lower.len() - n.len())
            .find(|&i| lower[i..i + n.len()] == n[..])
            .map(|i| (i, i + n.len()))
    };
    let hits: Vec<(usize, usize)> = [&t.subject, &t.object]
        .iter()
        .filter_map(|s| find(s))
        .collect();
    if hits.is_empty() {
        let end = chars.len().min(2 * EXCERPT_MARGIN);
        let mut s: String = chars[..end].iter().collect();
        if end < chars.len() {
            s.push_str("...");
        }
        return s;
    }
    let lo = hits
        .iter()
        .map(|h| h.0)
        .min()
        .unwrap()
        .saturating_sub(EXCERPT_MARGIN);
    let hi = (hits.iter().map(|h| h.1).max().unwrap() + EXCERPT_MARGIN).min(chars.len());
    let mut s = String::new();
    if lo > 0 {
        s.push_str("...");
    }
    s.extend(&chars[lo..hi]);
    if hi < chars.len() {
        s.push_str("...");
    }
    s
}

/// One pending item per distinct triple (normalized fields), ids in input order.
pub fn review_items(triples: &[Triple], docs: &HashMap<String, String>) -> Vec<ReviewItem> {
    let mut seen = HashSet::new();
    let mut items = Vec::new();
    for t in triples {
        let key = (
            normalize(&t.subject),
            normalize(&t.object),
            normalize(&t.relation),
        );
        if !seen.insert(key) {
            continue;
        }
        let excerpt = docs
            .get(&t.source_doc)
            .map(|text| context_excerpt(text, t))
            .unwrap_or_default();
        items.push(ReviewItem {
            id: format!("item-{:04}", items.len() + 1),
            triple: t.clone(),
            context_excerpt: excerpt,
            status: ReviewStatus::Pending,
            edited_triple: None,
            reviewer: None,
            decided_at: None,
        });
    }
    items
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemPage {
    pub items: Vec<ReviewItem>,
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub stats: ReviewStats,
}

struct RunEntry {
    state: ReviewRunState,
    log: Mutex<File>,
    log_path: PathBuf,
}

/// Durable store of review runs under one directory.
pub struct ReviewStore {
    root: PathBuf,
    runs: RwLock<BTreeMap<String, RunEntry>>,
    clock: Clock,
}

fn valid_run_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Read the event log. A torn final line (no trailing newline and not
/// parseable) is cut off; any other bad line is an error.
fn read_events(path: &Path) -> Result<Vec<DecisionEvent>, ReviewError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let bytes = fs::read(path).map_err(io_err(path))?;
    let text = String::from_utf8_lossy(&bytes);
    let mut events = Vec::new();
    let mut good_len = 0usize;
    let mut offset = 0usize;
    let mut needs_newline = false;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        offset += line.len();
        let complete = line.ends_with('\n');
        if line.trim().is_empty() {
            good_len = offset;
            continue;
        }
        match (
            serde_json::from_str::<DecisionEvent>(line.trim_end()),
            complete,
        ) {
            (Ok(ev), _) => {
                events.push(ev);
                good_len = offset;
                needs_newline = !complete;
            }
            (Err(_), false) => {
                log::warn!("{}: dropping torn final event", path.display());
            }
            (Err(e), true) => {
                return Err(ReviewError::Corrupt {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    if good_len < bytes.len() || needs_newline {
        let mut f = OpenOptions::new()
            .write(true)
            .open(path)
            .map_err(io_err(path))?;
        f.set_len(good_len as u64).map_err(io_err(path))?;
        if needs_newline {
            use std::io::{Seek, SeekFrom};
            f.seek(SeekFrom::End(0)).map_err(io_err(path))?;
            f.write_all(b"\n").map_err(io_err(path))?;
        }
        f.sync_all().map_err(io_err(path))?;
    }
    Ok(events)
}

fn read_items(path: &Path) -> Result<Vec<ReviewItem>, ReviewError> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(
            serde_json::from_str(&line).map_err(|e| ReviewError::Corrupt {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(items)
}

fn open_log(path: &Path) -> Result<File, ReviewError> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))
}

impl ReviewStore {
    /// Open a store, replaying every run found under `root`.
    pub fn open(root: impl Into<PathBuf>, clock: Clock) -> Result<Self, ReviewError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        let mut runs = BTreeMap::new();
        for entry in fs::read_dir(&root).map_err(io_err(&root))? {
            let dir = entry.map_err(io_err(&root))?.path();
            let items_path = dir.join("items.jsonl");
            if !dir.is_dir() || !items_path.exists() {
                continue;
            }
            let run_id = dir.file_name().unwrap().to_string_lossy().to_string();
            let log_path = dir.join("events.jsonl");
            let events = read_events(&log_path)?;
            let state = ReviewRunState::replay(&run_id, read_items(&items_path)?, &events)?;
            let log = Mutex::new(open_log(&log_path)?);
            runs.insert(
                run_id,
                RunEntry {
                    state,
                    log,
                    log_path,
                },
            );
        }
        Ok(ReviewStore {
            root,
            runs: RwLock::new(runs),
            clock,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Create a run from triples. `docs` maps document ids to text for excerpts.
    pub fn create(
        &self,
        run_id: &str,
        triples: &[Triple],
        docs: &HashMap<String, String>,
    ) -> Result<RunSummary, ReviewError> {
        if !valid_run_id(run_id) {
            return Err(ReviewError::Invalid(format!(
                "run id `{run_id}` must be letters, digits, `-`, `_` or `.`"
            )));
        }
        let mut runs = self.runs.write().unwrap();
        let dir = self.root.join(run_id);
        if runs.contains_key(run_id) || dir.exists() {
            return Err(ReviewError::DuplicateRun(run_id.to_string()));
        }
        let items = review_items(triples, docs);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let tmp = dir.join("items.jsonl.tmp");
        let mut body = String::new();
        for it in &items {
            body.push_str(&serde_json::to_string(it).expect("item serializes"));
            body.push('\n');
        }
        {
            let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
            f.write_all(body.as_bytes()).map_err(io_err(&tmp))?;
            f.sync_all().map_err(io_err(&tmp))?;
        }
        let items_path = dir.join("items.jsonl");
        fs::rename(&tmp, &items_path).map_err(io_err(&items_path))?;
        let log_path = dir.join("events.jsonl");
        let log = Mutex::new(open_log(&log_path)?);
        let state = ReviewRunState::new(run_id, items);
        let summary = RunSummary {
            run_id: run_id.to_string(),
            stats: state.stats(),
        };
        runs.insert(
            run_id.to_string(),
            RunEntry {
                state,
                log,
                log_path,
            },
        );
        Ok(summary)
    }

    pub fn list(&self) -> Vec<RunSummary> {
        self.runs
            .read()
            .unwrap()
            .values()
            .map(|r| RunSummary {
                run_id: r.state.run_id.clone(),
                stats: r.state.stats(),
            })
            .collect()
    }

    fn with_run<T>(
        &self,
        run_id: &str,
        f: impl FnOnce(&ReviewRunState) -> T,
    ) -> Result<T, ReviewError> {
        let runs = self.runs.read().unwrap();
        let r = runs
            .get(run_id)
            .ok_or_else(|| ReviewError::UnknownRun(run_id.to_string()))?;
        Ok(f(&r.state))
    }

    pub fn state(&self, run_id: &str) -> Result<ReviewRunState, ReviewError> {
        self.with_run(run_id, Clone::clone)
    }

    /// Items filtered by status, pages numbered from 1.
    pub fn items(
        &self,
        run_id: &str,
        status: Option<ReviewStatus>,
        page: usize,
        page_size: usize,
    ) -> Result<ItemPage, ReviewError> {
        if page == 0 || page_size == 0 {
            return Err(ReviewError::Invalid("page and page size start at 1".into()));
        }
        self.with_run(run_id, |s| {
            let filtered: Vec<&ReviewItem> = s
                .items
                .iter()
                .filter(|i| status.is_none_or(|st| i.status == st))
                .collect();
            ItemPage {
                total: filtered.len(),
                items: filtered
                    .into_iter()
                    .skip((page - 1) * page_size)
                    .take(page_size)
                    .cloned()
                    .collect(),
                page,
                page_size,
            }
        })
    }

    /// Record a decision. The event is on disk before this returns.
    pub fn decide(
        &self,
        run_id: &str,
        item_id: &str,
        decision: Decision,
        reviewer: &str,
    ) -> Result<ReviewItem, ReviewError> {
        let mut runs = self.runs.write().unwrap();
        let entry = runs
            .get_mut(run_id)
            .ok_or_else(|| ReviewError::UnknownRun(run_id.to_string()))?;
        entry.state.check(item_id, &decision, reviewer)?;
        let ev = DecisionEvent {
            seq: entry.state.events.len() as u64 + 1,
            item_id: item_id.to_string(),
            decision,
            reviewer: reviewer.trim().to_string(),
            at: self.clock.now(),
        };
        let line = serde_json::to_string(&ev).expect("event serializes");
        {
            let mut f = entry.log.lock().unwrap();
            writeln!(f, "{line}").map_err(io_err(&entry.log_path))?;
            f.sync_data().map_err(io_err(&entry.log_path))?;
        }
        entry.state.apply(ev)
    }

    pub fn export_accepted(&self, run_id: &str) -> Result<Vec<Triple>, ReviewError> {
        self.with_run(run_id, ReviewRunState::export_accepted)
    }

    pub fn stats(&self, run_id: &str) -> Result<ReviewStats, ReviewError> {
        self.with_run(run_id, ReviewRunState::stats)
    }
}

/// Create a review run from the relation predictions of an extraction run.
/// Context excerpts come from `corpus` when given.
pub fn create_review(
    store: &ReviewStore,
    run_id: &str,
    run: &ExtractionRun,
    corpus: Option<&Dataset>,
) -> Result<RunSummary, ReviewError> {
    let triples: Vec<Triple> = run
        .predictions
        .iter()
        .flat_map(|p| p.triples.iter().cloned())
        .collect();
    if triples.is_empty() && run.header.task != crate::extract::Task::Relations {
        return Err(ReviewError::Invalid(format!(
            "run `{}` has no relation predictions",
            run.header.run_id
        )));
    }
    let docs: HashMap<String, String> = corpus
        .map(|d| {
            d.items
                .iter()
                .map(|i| (i.doc.id.clone(), i.doc.text.clone()))
                .collect()
        })
        .unwrap_or_default();
    store.create(run_id, &triples, &docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triples(n: usize) -> Vec<Triple> {
        (0..n)
            .map(|i| Triple::new(format!("s{i}"), format!("o{i}"), "uses").with_source("d"))
            .collect()
    }

    fn store(dir: &Path) -> ReviewStore {
        ReviewStore::open(dir, Clock::epoch()).unwrap()
    }

    #[test]
    fn create_dedupes_and_rejects_duplicate_ids() {
        let dir = tempfile::tempdir().unwrap();
        let s = store(dir.path());
        let mut t = triples(3);
        t.push(Triple::new("S0", "o0", "Uses"));
        let summary = s.create("r1", &t, &HashMap::new()).unwrap();
        assert_eq!(summary.stats.pending, 3);
        assert!(matches!(
            s.create("r1", &t, &HashMap::new()),
            Err(ReviewError::DuplicateRun(_))
        ));
        assert!(matches!(
            s.create("../x", &t, &HashMap::new()),
            Err(ReviewError::Invalid(_))
        ));
    }

    #[test]
    fn decisions_and_export() {
        let dir = tempfile::tempdir().unwrap();
        let s = store(dir.path());
        s.create("r", &triples(5), &HashMap::new()).unwrap();
        s.decide("r", "item-0001", Decision::Accept, "expert")
            .unwrap();
        s.decide("r", "item-0002", Decision::Accept, "expert")
            .unwrap();
        let edited = Triple::new("s2", "o2", "lacks");
        let it = s
            .decide(
                "r",
                "item-0003",
                Decision::Edit {
                    edited_triple: edited.clone(),
                },
                "expert",
            )
            .unwrap();
        assert_eq!(it.status, ReviewStatus::Edited);
        assert_eq!(it.edited_triple.as_ref().unwrap().relation, "lacks");
        s.decide("r", "item-0004", Decision::Reject, "expert")
            .unwrap();
        assert!(matches!(
            s.decide("r", "item-0001", Decision::Reject, "expert"),
            Err(ReviewError::Conflict { .. })
        ));
        let out = s.export_accepted("r").unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[2].relation, "lacks");
        assert_eq!(out[2].source_doc, "d");
        let st = s.stats("r").unwrap();
        assert_eq!((st.pending, st.decided), (1, 4));
        assert!((st.acceptance_rate.unwrap() - 0.75).abs() < 1e-12);

        // Reopen replays the log.
        let before = s.state("r").unwrap();
        drop(s);
        assert_eq!(store(dir.path()).state("r").unwrap(), before);
    }

    #[test]
    fn rate_examples() {
        let st = ReviewStats::from_counts(0, 93, 7, 0);
        assert!((st.acceptance_rate.unwrap() - 0.93).abs() < 1e-12);
        assert_eq!(ReviewStats::from_counts(4, 0, 0, 0).acceptance_rate, None);
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let s = store(dir.path());
        s.create("r", &triples(2), &HashMap::new()).unwrap();
        s.decide("r", "item-0001", Decision::Accept, "e").unwrap();
        drop(s);
        let log = dir.path().join("r/events.jsonl");
        let mut f = OpenOptions::new().append(true).open(&log).unwrap();
        write!(f, "{{\"seq\":2,\"item_id\":\"item-0002\",\"act").unwrap();
        drop(f);
        let s = store(dir.path());
        assert_eq!(s.stats("r").unwrap().accepted, 1);
        // The log stays appendable after the cut.
        s.decide("r", "item-0002", Decision::Reject, "e").unwrap();
        drop(s);
        assert_eq!(store(dir.path()).stats("r").unwrap().rejected, 1);
    }

    #[test]
    fn unknown_ids() {
        let dir = tempfile::tempdir().unwrap();
        let s = store(dir.path());
        assert!(matches!(s.stats("nope"), Err(ReviewError::UnknownRun(_))));
        s.create("r", &triples(1), &HashMap::new()).unwrap();
        assert!(matches!(
            s.decide("r", "item-9", Decision::Accept, "e"),
            Err(ReviewError::UnknownItem { .. })
        ));
    }

    #[test]
    fn excerpt_covers_both_terms() {
        let text = format!(
            "{}alloy is cast by die casting{}",
            "x".repeat(200),
            "y".repeat(200)
        );
        let e = context_excerpt(&text, &Triple::new("Alloy", "die casting", "processed by"));
        assert!(e.contains("alloy is cast by die casting"));
        assert!(e.starts_with("...") && e.ends_with("..."));
    }
}
