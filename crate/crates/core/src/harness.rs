//! Dataset-level execution-accuracy evaluation: ingest Spider-style
//! JSON-Lines records, evaluate predicted QPL against gold SQL on a
//! per-schema backend, and render reports bucketed by difficulty and by
//! plan length.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::Deserialize;
use serde_json::json;

use crate::ast::QplPlan;
use crate::compile::{execution_match, DatabaseBackend, MatchFailure, SqliteBackend};
use crate::interp::Database;
use crate::parser::parse;
use crate::schema::SchemaCatalog;
use crate::validator::{has_errors, validate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
    Extra,
}

impl Difficulty {
    pub const ALL: [Difficulty; 4] = [
        Difficulty::Easy,
        Difficulty::Medium,
        Difficulty::Hard,
        Difficulty::Extra,
    ];

    /// Display label matching the report row names.
    pub fn label(&self) -> &'static str {
        match self {
            Difficulty::Easy => "Easy",
            Difficulty::Medium => "Medium",
            Difficulty::Hard => "Hard",
            Difficulty::Extra => "Extra Hard",
        }
    }

    pub fn key(&self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
            Difficulty::Extra => "extra",
        }
    }
}

/// One dataset example.
#[derive(Debug, Clone)]
pub struct EvalRecord {
    pub id: String,
    pub db_id: String,
    pub question: String,
    pub gold_sql: String,
    pub gold_qpl: String,
    pub qd: Option<Vec<String>>,
    pub difficulty: Difficulty,
    /// Number of lines of the gold plan.
    pub qpl_length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormatError {
    /// 1-based line number in the JSONL file.
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for FormatError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

pub struct DatasetLoad {
    pub records: Vec<EvalRecord>,
    /// Malformed lines, collected rather than fail-fast.
    pub errors: Vec<FormatError>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    db_id: String,
    question: String,
    /// Gold SQL.
    query: String,
    qpl: String,
    #[serde(default)]
    qd: Option<Vec<String>>,
    difficulty: Difficulty,
}

/// Load a JSON-Lines dataset with fields
/// `{id, db_id, question, query, qpl, qd?, difficulty}`. Records whose
/// gold QPL does not parse are rejected with their line numbers.
pub fn load_dataset(path: impl AsRef<Path>) -> std::io::Result<DatasetLoad> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = match serde_json::from_str(&line) {
            Ok(raw) => raw,
            Err(e) => {
                errors.push(FormatError {
                    line: line_no,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let plan = match parse(&raw.qpl) {
            Ok(plan) => plan,
            Err(e) => {
                errors.push(FormatError {
                    line: line_no,
                    message: format!("gold QPL does not parse: {e}"),
                });
                continue;
            }
        };
        records.push(EvalRecord {
            id: raw.id,
            db_id: raw.db_id,
            question: raw.question,
            gold_sql: raw.query,
            gold_qpl: raw.qpl,
            qd: raw.qd,
            difficulty: raw.difficulty,
            qpl_length: plan.len(),
        });
    }
    Ok(DatasetLoad { records, errors })
}

/// Load JSON-Lines predictions `{id, qpl}`.
pub fn load_predictions(
    path: impl AsRef<Path>,
) -> std::io::Result<(HashMap<String, String>, Vec<FormatError>)> {
    #[derive(Deserialize)]
    struct RawPrediction {
        id: String,
        qpl: String,
    }
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut predictions = HashMap::new();
    let mut errors = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawPrediction>(&line) {
            Ok(raw) => {
                predictions.insert(raw.id, raw.qpl);
            }
            Err(e) => errors.push(FormatError {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    Ok((predictions, errors))
}

/// Why a record did or did not match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cause {
    Match,
    Syntax,
    Semantic,
    Backend,
    Mismatch,
}

impl Cause {
    pub fn key(&self) -> &'static str {
        match self {
            Cause::Match => "match",
            Cause::Syntax => "syntax",
            Cause::Semantic => "semantic",
            Cause::Backend => "backend",
            Cause::Mismatch => "mismatch",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecordOutcome {
    pub id: String,
    pub matched: bool,
    pub cause: Cause,
    pub empty_gold: bool,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Bucket {
    pub matched: usize,
    pub support: usize,
}

impl Bucket {
    pub fn accuracy(&self) -> Option<f64> {
        (self.support > 0).then(|| self.matched as f64 / self.support as f64)
    }
}

/// Length buckets: 1..7 individually, 8 and longer pooled.
pub const LENGTH_BUCKETS: [&str; 8] = ["1", "2", "3", "4", "5", "6", "7", ">=8"];

fn length_bucket(len: usize) -> usize {
    len.clamp(1, 8) - 1
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub outcomes: Vec<RecordOutcome>,
    pub by_difficulty: [Bucket; 4],
    pub by_length: [Bucket; 8],
    pub overall: Bucket,
    pub empty_gold_count: usize,
}

/// Open a loaded backend plus its schema for one `db_id`.
pub type BackendFactoryResult = Result<(Box<dyn DatabaseBackend + Send>, SchemaCatalog), String>;

/// The standard factory over a `<root>/<db_id>/schema.json` + CSV layout.
pub fn dir_backend_factory(root: impl Into<std::path::PathBuf>) -> impl Fn(&str) -> BackendFactoryResult + Sync {
    let root = root.into();
    move |db_id: &str| {
        let db = Database::load_dir(root.join(db_id)).map_err(|e| e.to_string())?;
        let backend = SqliteBackend::with_database(&db).map_err(|e| e.to_string())?;
        Ok((Box::new(backend), db.schema))
    }
}

/// Evaluate predictions against gold queries. Each record parses,
/// validates, compiles, and executes its prediction; failures are
/// per-record outcomes, never process errors. Records run in parallel
/// across `jobs` workers, one backend cache per worker; report order is
/// input order.
pub fn evaluate<F>(
    records: &[EvalRecord],
    predictions: &HashMap<String, String>,
    factory: &F,
    jobs: usize,
) -> EvalReport
where
    F: Fn(&str) -> BackendFactoryResult + Sync,
{
    let jobs = jobs.max(1).min(records.len().max(1));
    let mut outcomes: Vec<Option<RecordOutcome>> = vec![None; records.len()];

    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for worker in 0..jobs {
            let slots: Vec<usize> = (worker..records.len()).step_by(jobs).collect();
            handles.push(scope.spawn(move || {
                let mut cache: HashMap<String, (Box<dyn DatabaseBackend + Send>, SchemaCatalog)> =
                    HashMap::new();
                let mut results = Vec::with_capacity(slots.len());
                for i in slots {
                    let record = &records[i];
                    let text = predictions.get(&record.id).map(|s| s.as_str()).unwrap_or("");
                    results.push((i, eval_one(record, text, &mut cache, factory)));
                }
                results
            }));
        }
        for handle in handles {
            for (i, outcome) in handle.join().expect("worker panicked") {
                outcomes[i] = Some(outcome);
            }
        }
    });

    let outcomes: Vec<RecordOutcome> = outcomes.into_iter().map(|o| o.expect("all slots filled")).collect();
    let mut by_difficulty = [Bucket::default(); 4];
    let mut by_length = [Bucket::default(); 8];
    let mut overall = Bucket::default();
    let mut empty_gold_count = 0;
    for (record, outcome) in records.iter().zip(&outcomes) {
        let d = Difficulty::ALL
            .iter()
            .position(|d| *d == record.difficulty)
            .expect("closed enum");
        let l = length_bucket(record.qpl_length);
        by_difficulty[d].support += 1;
        by_length[l].support += 1;
        overall.support += 1;
        if outcome.matched {
            by_difficulty[d].matched += 1;
            by_length[l].matched += 1;
            overall.matched += 1;
        }
        if outcome.empty_gold {
            empty_gold_count += 1;
        }
    }
    EvalReport {
        outcomes,
        by_difficulty,
        by_length,
        overall,
        empty_gold_count,
    }
}

fn eval_one<F>(
    record: &EvalRecord,
    prediction: &str,
    cache: &mut HashMap<String, (Box<dyn DatabaseBackend + Send>, SchemaCatalog)>,
    factory: &F,
) -> RecordOutcome
where
    F: Fn(&str) -> BackendFactoryResult + Sync,
{
    let fail = |cause: Cause, detail: String| RecordOutcome {
        id: record.id.clone(),
        matched: false,
        cause,
        empty_gold: false,
        detail: Some(detail),
    };
    let plan: QplPlan = match parse(prediction) {
        Ok(plan) => plan,
        Err(e) => return fail(Cause::Syntax, e.to_string()),
    };
    if !cache.contains_key(&record.db_id) {
        match factory(&record.db_id) {
            Ok(entry) => {
                cache.insert(record.db_id.clone(), entry);
            }
            Err(e) => return fail(Cause::Backend, e),
        }
    }
    let (backend, schema) = cache.get_mut(&record.db_id).expect("just inserted");
    let diagnostics = validate(&plan, schema);
    if has_errors(&diagnostics) {
        let detail = diagnostics
            .iter()
            .map(|d| d.to_json())
            .collect::<Vec<_>>()
            .join("\n");
        return fail(Cause::Semantic, detail);
    }
    let outcome = execution_match(&record.gold_sql, &plan, backend.as_mut(), schema);
    let cause = match (&outcome.failure, outcome.matched) {
        (None, true) => Cause::Match,
        (Some(MatchFailure::Mismatch), _) => Cause::Mismatch,
        (Some(MatchFailure::Backend { .. }), _) | (Some(MatchFailure::Compile(_)), _) => {
            Cause::Backend
        }
        (None, false) => Cause::Mismatch,
    };
    RecordOutcome {
        id: record.id.clone(),
        matched: outcome.matched,
        cause,
        empty_gold: outcome.empty_gold,
        detail: outcome.failure.map(|f| format!("{f:?}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
    Markdown,
}

impl ReportFormat {
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "text" | "txt" => Some(ReportFormat::Text),
            "json" => Some(ReportFormat::Json),
            "md" | "markdown" => Some(ReportFormat::Markdown),
            _ => None,
        }
    }
}

fn percent(bucket: &Bucket) -> String {
    match bucket.accuracy() {
        Some(acc) => format!("{:.1}%", acc * 100.0),
        None => "-".to_string(),
    }
}

/// Render a report. Markdown reproduces the difficulty-row and
/// length-row table structures; JSON is machine-stable with sorted keys.
pub fn report_render(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => render_markdown(report),
        ReportFormat::Text => render_text(report),
        ReportFormat::Json => render_json(report),
    }
}

fn cause_counts(report: &EvalReport) -> [(Cause, usize); 5] {
    let mut counts = [
        (Cause::Match, 0),
        (Cause::Syntax, 0),
        (Cause::Semantic, 0),
        (Cause::Backend, 0),
        (Cause::Mismatch, 0),
    ];
    for outcome in &report.outcomes {
        let slot = counts
            .iter_mut()
            .find(|(c, _)| *c == outcome.cause)
            .expect("closed enum");
        slot.1 += 1;
    }
    counts
}

fn render_markdown(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str("## Accuracy by difficulty\n\n");
    out.push_str("| Difficulty | Accuracy | Support |\n|---|---:|---:|\n");
    if report.overall.support > 0 {
        for (difficulty, bucket) in Difficulty::ALL.iter().zip(&report.by_difficulty) {
            out.push_str(&format!(
                "| {} | {} | {} |\n",
                difficulty.label(),
                percent(bucket),
                bucket.support
            ));
        }
        out.push_str(&format!(
            "| Overall | {} | {} |\n",
            percent(&report.overall),
            report.overall.support
        ));
    }
    out.push_str("\n## Accuracy by QPL length\n\n");
    out.push_str("| QPL Length | Accuracy | Support |\n|---|---:|---:|\n");
    if report.overall.support > 0 {
        for (label, bucket) in LENGTH_BUCKETS.iter().zip(&report.by_length) {
            out.push_str(&format!(
                "| {label} | {} | {} |\n",
                percent(bucket),
                bucket.support
            ));
        }
        out.push_str(&format!(
            "| Overall | {} | {} |\n",
            percent(&report.overall),
            report.overall.support
        ));
    }
    out.push_str("\n## Outcomes\n\n");
    let counts = cause_counts(report);
    let summary = counts
        .iter()
        .map(|(cause, n)| format!("{}: {n}", cause.key()))
        .collect::<Vec<_>>()
        .join(", ");
    out.push_str(&format!(
        "{summary}, empty_gold_count: {}\n",
        report.empty_gold_count
    ));
    out
}

fn render_text(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str("Accuracy by difficulty\n");
    for (difficulty, bucket) in Difficulty::ALL.iter().zip(&report.by_difficulty) {
        out.push_str(&format!(
            "  {:<11} {:>7}  (n={})\n",
            difficulty.label(),
            percent(bucket),
            bucket.support
        ));
    }
    out.push_str("Accuracy by QPL length\n");
    for (label, bucket) in LENGTH_BUCKETS.iter().zip(&report.by_length) {
        out.push_str(&format!(
            "  {:<11} {:>7}  (n={})\n",
            label,
            percent(bucket),
            bucket.support
        ));
    }
    out.push_str(&format!(
        "Overall {} (n={}), empty gold results: {}\n",
        percent(&report.overall),
        report.overall.support,
        report.empty_gold_count
    ));
    out
}

fn render_json(report: &EvalReport) -> String {
    let bucket_json = |b: &Bucket| {
        json!({
            "accuracy": b.accuracy(),
            "matched": b.matched,
            "support": b.support,
        })
    };
    let mut by_difficulty = serde_json::Map::new();
    for (difficulty, bucket) in Difficulty::ALL.iter().zip(&report.by_difficulty) {
        by_difficulty.insert(difficulty.key().to_string(), bucket_json(bucket));
    }
    let mut by_length = serde_json::Map::new();
    for (label, bucket) in LENGTH_BUCKETS.iter().zip(&report.by_length) {
        by_length.insert(label.to_string(), bucket_json(bucket));
    }
    let mut causes = serde_json::Map::new();
    for (cause, n) in cause_counts(report) {
        causes.insert(cause.key().to_string(), json!(n));
    }
    let records: Vec<serde_json::Value> = report
        .outcomes
        .iter()
        .map(|o| {
            json!({
                "id": o.id,
                "matched": o.matched,
                "cause": o.cause.key(),
                "empty_gold": o.empty_gold,
            })
        })
        .collect();
    let value = json!({
        "overall": bucket_json(&report.overall),
        "by_difficulty": by_difficulty,
        "by_length": by_length,
        "causes": causes,
        "empty_gold_count": report.empty_gold_count,
        "records": records,
    });
    serde_json::to_string_pretty(&value).expect("report serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_lines(path: &std::path::Path, lines: &[&str]) {
        let mut f = std::fs::File::create(path).unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
    }

    #[test]
    fn dataset_loads_and_rejects_bad_lines() {
        let dir = std::env::temp_dir().join(format!("qpl_ds_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("dataset.jsonl");
        write_lines(
            &path,
            &[
                r##"{"id":"a","db_id":"d","question":"q","query":"SELECT 1","qpl":"#1 = Scan Table [ t ] Output [ x ]","difficulty":"easy"}"##,
                r##"{"id":"b","db_id":"d","question":"q","query":"SELECT 1","difficulty":"easy"}"##,
                r##"{"id":"c","db_id":"d","question":"q","query":"SELECT 1","qpl":"#1 = Scon","difficulty":"hard"}"##,
            ],
        );
        let load = load_dataset(&path).unwrap();
        assert_eq!(load.records.len(), 1);
        assert_eq!(load.records[0].qpl_length, 1);
        assert_eq!(load.errors.len(), 2);
        assert_eq!(load.errors[0].line, 2);
        assert_eq!(load.errors[1].line, 3);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn empty_dataset_loads_empty() {
        let dir = std::env::temp_dir().join(format!("qpl_ds_empty_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("dataset.jsonl");
        std::fs::File::create(&path).unwrap();
        let load = load_dataset(&path).unwrap();
        assert!(load.records.is_empty());
        assert!(load.errors.is_empty());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn empty_report_renders_header_only_tables() {
        let report = EvalReport {
            outcomes: vec![],
            by_difficulty: [Bucket::default(); 4],
            by_length: [Bucket::default(); 8],
            overall: Bucket::default(),
            empty_gold_count: 0,
        };
        let md = report_render(&report, ReportFormat::Markdown);
        assert!(md.contains("| Difficulty | Accuracy | Support |"));
        assert!(!md.contains("| Easy |"));
    }

    #[test]
    fn json_render_round_trips_values() {
        let report = EvalReport {
            outcomes: vec![RecordOutcome {
                id: "a".into(),
                matched: true,
                cause: Cause::Match,
                empty_gold: false,
                detail: None,
            }],
            by_difficulty: [
                Bucket {
                    matched: 1,
                    support: 1,
                },
                Bucket::default(),
                Bucket::default(),
                Bucket::default(),
            ],
            by_length: {
                let mut b = [Bucket::default(); 8];
                b[0] = Bucket {
                    matched: 1,
                    support: 1,
                };
                b
            },
            overall: Bucket {
                matched: 1,
                support: 1,
            },
            empty_gold_count: 0,
        };
        let rendered = report_render(&report, ReportFormat::Json);
        let parsed: serde_json::Value = serde_json::from_str(&rendered).unwrap();
        assert_eq!(parsed["overall"]["accuracy"], 1.0);
        assert_eq!(parsed["by_difficulty"]["easy"]["support"], 1);
        assert_eq!(parsed["causes"]["match"], 1);
        assert_eq!(parsed["records"][0]["id"], "a");
        // Deterministic bytes.
        assert_eq!(rendered, report_render(&report, ReportFormat::Json));
    }

    #[test]
    fn length_bucketing_pools_eight_and_longer() {
        assert_eq!(length_bucket(1), 0);
        assert_eq!(length_bucket(7), 6);
        assert_eq!(length_bucket(8), 7);
        assert_eq!(length_bucket(13), 7);
    }
}
