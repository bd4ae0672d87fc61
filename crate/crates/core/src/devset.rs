//! User correctness labels and the metrics board.
//!
//! Positive extractions are registered as they are produced; users mark them
//! correct or incorrect. Labels are kept in an append-only JSON-lines log
//! (one [`DevsetRecord`] per line, later lines win) that doubles as the
//! dev-set export format. The log is compacted when it grows well past the
//! number of live labels.
//!
//! Metrics count winning extractions only: a template's total is the number
//! of extractions it won (its yield).

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidates::{Candidate, Task};
use crate::inference::Extraction;
use crate::pipeline::DocumentAnnotations;
use crate::schema::Schema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Correct,
    Incorrect,
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "correct" | "+" => Ok(Verdict::Correct),
            "incorrect" | "-" => Ok(Verdict::Incorrect),
            _ => Err(format!("unknown verdict {s} (expected correct or incorrect)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserLabel {
    pub extraction_id: String,
    pub verdict: Verdict,
    pub timestamp_ms: u64,
}

/// What a label refers to, stored alongside it so the dev set stands alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionPayload {
    pub task: Task,
    pub premise: String,
    pub candidate: Candidate,
    pub label: String,
    pub score: f64,
    pub template_id: String,
}

impl ExtractionPayload {
    /// `None` for negative extractions, which are not tracked.
    pub fn from_extraction(x: &Extraction, premise: &str) -> Option<Self> {
        Some(ExtractionPayload {
            task: x.task,
            premise: premise.to_string(),
            candidate: x.candidate.clone(),
            label: x.label.clone()?,
            score: x.score,
            template_id: x.winning_template_id.clone()?,
        })
    }
}

/// One line of the label log and of the dev-set file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevsetRecord {
    pub extraction_id: String,
    pub verdict: Verdict,
    pub timestamp_ms: u64,
    pub extraction: ExtractionPayload,
}

#[derive(Debug, Error)]
pub enum DevsetError {
    #[error("unknown extraction {0}")]
    UnknownExtraction(String),
    #[error("dev set line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("label log I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Task,
    Type,
    Template,
}

impl FromStr for Scope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "task" => Ok(Scope::Task),
            "type" => Ok(Scope::Type),
            "template" => Ok(Scope::Template),
            _ => Err(format!("unknown scope {s} (expected task, type or template)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortKey {
    #[default]
    Name,
    Total,
    Correct,
    Incorrect,
    Accuracy,
}

impl FromStr for SortKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "name" => Ok(SortKey::Name),
            "total" => Ok(SortKey::Total),
            "correct" => Ok(SortKey::Correct),
            "incorrect" => Ok(SortKey::Incorrect),
            "accuracy" => Ok(SortKey::Accuracy),
            _ => Err(format!("unknown sort key {s}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    Asc,
    Desc,
}

impl FromStr for SortOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "asc" => Ok(SortOrder::Asc),
            "desc" => Ok(SortOrder::Desc),
            _ => Err(format!("unknown sort order {s} (expected asc or desc)")),
        }
    }
}

/// Row filter and ordering. Name sorts ascending by default, counts and
/// accuracy descending; rows without accuracy always sort last. Ties are
/// broken by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsQuery {
    pub scope: Option<Scope>,
    pub task: Option<Task>,
    pub sort: SortKey,
    pub order: Option<SortOrder>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scope: Scope,
    /// `NER`, `NER/PERSON` or `NER/PERSON/t0`.
    pub name: String,
    pub task: Task,
    pub type_name: Option<String>,
    pub template_id: Option<String>,
    /// Template text, when the schema still has the template.
    pub template_text: Option<String>,
    pub total: usize,
    pub correct: usize,
    pub incorrect: usize,
    /// correct / (correct + incorrect); absent without labels.
    pub accuracy: Option<f64>,
    /// The type or template is not in the current schema.
    pub stale: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImportReport {
    pub imported: usize,
    /// Types referenced by imported labels that the schema does not declare.
    pub stale_types: Vec<String>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

struct LabelLog {
    path: PathBuf,
    file: File,
    lines: usize,
}

impl LabelLog {
    fn append(&mut self, record: &DevsetRecord) -> Result<(), DevsetError> {
        let mut line = serde_json::to_vec(record).expect("record serializes");
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        self.lines += 1;
        Ok(())
    }
}

/// Registered extractions and their current labels.
#[derive(Default)]
pub struct LabelStore {
    extractions: BTreeMap<String, ExtractionPayload>,
    labels: BTreeMap<String, UserLabel>,
    log: Option<LabelLog>,
}

impl std::fmt::Debug for LabelStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LabelStore")
            .field("extractions", &self.extractions.len())
            .field("labels", &self.labels.len())
            .field("log", &self.log.as_ref().map(|l| &l.path))
            .finish()
    }
}

fn parse_records(source: &[u8]) -> Result<Vec<DevsetRecord>, DevsetError> {
    let mut out = Vec::new();
    for (i, line) in source.split(|b| *b == b'\n').enumerate() {
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let record: DevsetRecord = serde_json::from_slice(line).map_err(|e| DevsetError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if record.extraction_id.is_empty() || record.extraction.label.is_empty() {
            return Err(DevsetError::Parse {
                line: i + 1,
                message: "record needs an extraction id and a label".into(),
            });
        }
        out.push(record);
    }
    Ok(out)
}

impl LabelStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a persistent store backed by the log at `path`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, DevsetError> {
        let path = path.as_ref().to_path_buf();
        let mut store = LabelStore::default();
        let mut lines = 0;
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            let mut buf = Vec::new();
            for line in reader.lines() {
                let line = line?;
                buf.extend_from_slice(line.as_bytes());
                buf.push(b'\n');
                lines += 1;
            }
            for r in parse_records(&buf)? {
                store.apply(r);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        store.log = Some(LabelLog { path, file, lines });
        if lines > 2 * store.labels.len() + 64 {
            store.compact()?;
        }
        Ok(store)
    }

    fn apply(&mut self, r: DevsetRecord) {
        self.extractions.insert(r.extraction_id.clone(), r.extraction);
        self.labels.insert(
            r.extraction_id.clone(),
            UserLabel {
                extraction_id: r.extraction_id,
                verdict: r.verdict,
                timestamp_ms: r.timestamp_ms,
            },
        );
    }

    /// Tracks a positive extraction. Negatives are ignored.
    pub fn register(&mut self, extraction: &Extraction, premise: &str) {
        if let Some(p) = ExtractionPayload::from_extraction(extraction, premise) {
            self.extractions.insert(extraction.id.clone(), p);
        }
    }

    pub fn register_document(&mut self, doc: &DocumentAnnotations) {
        for x in doc.extractions() {
            if let Some(premise) = doc.premise(x.candidate.sentence_index) {
                self.register(x, premise);
            }
        }
    }

    pub fn contains(&self, extraction_id: &str) -> bool {
        self.extractions.contains_key(extraction_id)
    }

    pub fn label(&self, extraction_id: &str) -> Option<&UserLabel> {
        self.labels.get(extraction_id)
    }

    pub fn labels(&self) -> impl Iterator<Item = &UserLabel> {
        self.labels.values()
    }

    pub fn extraction_count(&self) -> usize {
        self.extractions.len()
    }

    pub fn record_label(&mut self, extraction_id: &str, verdict: Verdict) -> Result<(), DevsetError> {
        self.record_label_at(extraction_id, verdict, now_ms())
    }

    /// Stores (or overwrites) the verdict for an extraction and appends it
    /// to the log.
    pub fn record_label_at(&mut self, extraction_id: &str, verdict: Verdict, timestamp_ms: u64) -> Result<(), DevsetError> {
        let payload = self
            .extractions
            .get(extraction_id)
            .ok_or_else(|| DevsetError::UnknownExtraction(extraction_id.to_string()))?;
        let record = DevsetRecord {
            extraction_id: extraction_id.to_string(),
            verdict,
            timestamp_ms,
            extraction: payload.clone(),
        };
        if let Some(log) = &mut self.log {
            log.append(&record)?;
        }
        self.apply(record);
        Ok(())
    }

    fn records(&self) -> Vec<DevsetRecord> {
        self.labels
            .values()
            .filter_map(|l| {
                Some(DevsetRecord {
                    extraction_id: l.extraction_id.clone(),
                    verdict: l.verdict,
                    timestamp_ms: l.timestamp_ms,
                    extraction: self.extractions.get(&l.extraction_id)?.clone(),
                })
            })
            .collect()
    }

    /// All current labels as JSON lines, ordered by extraction id.
    pub fn export_devset(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for r in self.records() {
            serde_json::to_writer(&mut out, &r).expect("record serializes");
            out.push(b'\n');
        }
        out
    }

    /// Merges a dev-set file. For an extraction labeled on both sides the
    /// newer label wins. Labels for types the schema does not know are kept
    /// and reported as stale.
    pub fn import_devset(&mut self, source: &[u8], schema: Option<&Schema>) -> Result<ImportReport, DevsetError> {
        let records = parse_records(source)?;
        let mut report = ImportReport::default();
        for r in records {
            if let Some(s) = schema {
                if !s.declares(&r.extraction.label) && !report.stale_types.contains(&r.extraction.label) {
                    report.stale_types.push(r.extraction.label.clone());
                }
            }
            if self
                .labels
                .get(&r.extraction_id)
                .is_some_and(|l| l.timestamp_ms > r.timestamp_ms)
            {
                continue;
            }
            if let Some(log) = &mut self.log {
                log.append(&r)?;
            }
            self.apply(r);
            report.imported += 1;
        }
        Ok(report)
    }

    /// Rewrites the log with one line per current label.
    pub fn compact(&mut self) -> Result<(), DevsetError> {
        let Some(log) = &self.log else {
            return Ok(());
        };
        let path = log.path.clone();
        let tmp = path.with_extension("compact.tmp");
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&self.export_devset())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        let file = OpenOptions::new().append(true).open(&path)?;
        self.log = Some(LabelLog {
            path,
            file,
            lines: self.labels.len(),
        });
        Ok(())
    }

    /// Computes metrics rows from the current labels.
    pub fn metrics(&self, query: &MetricsQuery, schema: Option<&Schema>) -> Vec<MetricsRow> {
        #[derive(Default)]
        struct Tally {
            total: usize,
            correct: usize,
            incorrect: usize,
        }
        type Key = (Task, Option<String>, Option<String>);
        let mut tallies: HashMap<Key, Tally> = HashMap::new();
        for (id, p) in &self.extractions {
            if query.task.is_some_and(|t| t != p.task) {
                continue;
            }
            let verdict = self.labels.get(id).map(|l| l.verdict);
            let keys: [Key; 3] = [
                (p.task, None, None),
                (p.task, Some(p.label.clone()), None),
                (p.task, Some(p.label.clone()), Some(p.template_id.clone())),
            ];
            for k in keys {
                let t = tallies.entry(k).or_default();
                t.total += 1;
                match verdict {
                    Some(Verdict::Correct) => t.correct += 1,
                    Some(Verdict::Incorrect) => t.incorrect += 1,
                    None => {}
                }
            }
        }
        let mut rows: Vec<MetricsRow> = tallies
            .into_iter()
            .map(|((task, ty, tmpl), t)| {
                let scope = match (&ty, &tmpl) {
                    (None, _) => Scope::Task,
                    (Some(_), None) => Scope::Type,
                    (Some(_), Some(_)) => Scope::Template,
                };
                let name = match (&ty, &tmpl) {
                    (None, _) => task.to_string(),
                    (Some(ty), None) => format!("{task}/{ty}"),
                    (Some(ty), Some(tp)) => format!("{task}/{ty}/{tp}"),
                };
                let templates = ty.as_deref().and_then(|ty| schema.and_then(|s| templates_of(s, task, ty)));
                let template_text = tmpl.as_deref().and_then(|id| {
                    templates
                        .and_then(|ts| ts.iter().find(|t| t.id == id))
                        .map(|t| t.text.clone())
                });
                let stale = match (schema, &ty) {
                    (Some(_), Some(_)) => templates.is_none() || (tmpl.is_some() && template_text.is_none()),
                    _ => false,
                };
                let labeled = t.correct + t.incorrect;
                MetricsRow {
                    scope,
                    name,
                    task,
                    type_name: ty,
                    template_id: tmpl,
                    template_text,
                    total: t.total,
                    correct: t.correct,
                    incorrect: t.incorrect,
                    accuracy: (labeled > 0).then(|| t.correct as f64 / labeled as f64),
                    stale,
                }
            })
            .filter(|r| query.scope.is_none_or(|s| s == r.scope))
            .collect();
        sort_rows(&mut rows, query.sort, query.order);
        rows
    }
}

fn templates_of<'a>(schema: &'a Schema, task: Task, name: &str) -> Option<&'a [crate::schema::Template]> {
    match task {
        Task::Ner => schema.entity_type(name).map(|t| t.templates.as_slice()),
        Task::Re => schema.relation_type(name).map(|t| t.templates.as_slice()),
        Task::Ee => schema.event_type(name).map(|t| t.templates.as_slice()),
        // Role names are unique per event only; the payload does not carry
        // the event, so take the first role of that name.
        Task::Eae => schema
            .argument_roles
            .iter()
            .find(|r| r.name == name)
            .map(|r| r.templates.as_slice()),
    }
}

fn sort_rows(rows: &mut [MetricsRow], key: SortKey, order: Option<SortOrder>) {
    let order = order.unwrap_or(match key {
        SortKey::Name => SortOrder::Asc,
        _ => SortOrder::Desc,
    });
    rows.sort_by(|a, b| {
        let primary = match key {
            SortKey::Name => std::cmp::Ordering::Equal,
            SortKey::Total => a.total.cmp(&b.total),
            SortKey::Correct => a.correct.cmp(&b.correct),
            SortKey::Incorrect => a.incorrect.cmp(&b.incorrect),
            SortKey::Accuracy => match (a.accuracy, b.accuracy) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                // Missing accuracy sorts last in either direction.
                (Some(_), None) => return std::cmp::Ordering::Less,
                (None, Some(_)) => return std::cmp::Ordering::Greater,
                (None, None) => std::cmp::Ordering::Equal,
            },
        };
        let primary = match order {
            SortOrder::Asc => primary,
            SortOrder::Desc => primary.reverse(),
        };
        let by_name = if key == SortKey::Name && order == SortOrder::Desc {
            b.name.cmp(&a.name)
        } else {
            a.name.cmp(&b.name)
        };
        primary.then(by_name)
    });
}
