//! QPL-QD alignment scoring: step-count agreement combined with the IoU of
//! scanned-table sets, the tables on the QD side recovered by fuzzy string
//! matching.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::ast::{OpKind, QplPlan};
use crate::schema::SchemaCatalog;

/// Fuzzy acceptance threshold for table-name mentions.
const FUZZY_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentReport {
    pub qd_steps: usize,
    pub qpl_steps: usize,
    pub qpl_scan_tables: Vec<String>,
    pub qd_scan_tables: Vec<String>,
    pub length_component: f64,
    pub iou: f64,
    pub score: f64,
}

/// Score how well a question decomposition lines up with a plan:
/// `length_component` compares step counts, `iou` compares the sets of
/// scanned tables, and the score is their mean. A score of 1 requires
/// both perfect length agreement and identical scan sets.
pub fn align_qd_qpl(qd: &[String], plan: &QplPlan, schema: &SchemaCatalog) -> AlignmentReport {
    let qd_steps = qd.len();
    let qpl_steps = plan.len();
    let max = qd_steps.max(qpl_steps);
    let length_component = if max == 0 {
        1.0
    } else {
        1.0 - (qd_steps.abs_diff(qpl_steps) as f64) / max as f64
    };

    let qpl_tables: BTreeSet<String> = plan
        .lines()
        .iter()
        .filter(|l| l.node.op == OpKind::Scan)
        .filter_map(|l| l.node.table_name.as_deref())
        .map(|t| t.to_lowercase())
        .collect();

    let mut qd_tables: BTreeSet<String> = BTreeSet::new();
    for step in qd {
        if let Some(table) = extract_scan_table(step, schema) {
            qd_tables.insert(table);
        }
    }

    let union = qpl_tables.union(&qd_tables).count();
    let inter = qpl_tables.intersection(&qd_tables).count();
    let iou = if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    };
    let score = (length_component + iou) / 2.0;
    AlignmentReport {
        qd_steps,
        qpl_steps,
        qpl_scan_tables: qpl_tables.into_iter().collect(),
        qd_scan_tables: qd_tables.into_iter().collect(),
        length_component,
        iou,
        score,
    }
}

/// A QD step mentions a scan when it opens with a scan verb; the table
/// name follows the word "table" in the first clause (`Scan the table
/// country and retrieve ...`).
fn extract_scan_table(step: &str, schema: &SchemaCatalog) -> Option<String> {
    let body = strip_step_marker(step);
    let lower = body.to_lowercase();
    if !lower.trim_start().starts_with("scan") {
        return None;
    }
    let first_clause = cut_first_clause(&lower);
    let words: Vec<&str> = first_clause.split_whitespace().collect();
    let table_pos = words.iter().position(|w| *w == "table" || *w == "tables")?;
    let candidates = (1..=3).filter_map(|n| {
        let chunk = words.get(table_pos + 1..table_pos + 1 + n)?;
        Some(chunk.join(" "))
    });
    let mut best: Option<(f64, String)> = None;
    for candidate in candidates {
        for table in &schema.tables {
            let sim = token_set_ratio(&candidate, &table.name);
            if sim >= FUZZY_THRESHOLD && best.as_ref().is_none_or(|(b, _)| sim > *b) {
                best = Some((sim, table.name.to_lowercase()));
            }
        }
    }
    best.map(|(_, name)| name)
}

fn strip_step_marker(step: &str) -> &str {
    let trimmed = step.trim_start();
    let Some(rest) = trimmed.strip_prefix('#') else {
        return step;
    };
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_digit());
    let rest = rest.trim_start();
    rest.strip_prefix('=').map(|r| r.trim_start()).unwrap_or(step)
}

fn cut_first_clause(text: &str) -> String {
    let mut clause = text;
    for sep in [" and ", " to ", ",", ";"] {
        if let Some(pos) = clause.find(sep) {
            clause = &clause[..pos];
        }
    }
    clause.to_string()
}

/// Normalized token-set similarity: fold case and underscores, compare the
/// shared-token core against each side's full token string, take the best
/// pairwise Levenshtein similarity.
pub(crate) fn token_set_ratio(a: &str, b: &str) -> f64 {
    let tokens = |s: &str| -> BTreeSet<String> {
        s.to_lowercase()
            .replace('_', " ")
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| t.to_string())
            .collect()
    };
    let ta = tokens(a);
    let tb = tokens(b);
    let inter: Vec<&String> = ta.intersection(&tb).collect();
    let only_a: Vec<&String> = ta.difference(&tb).collect();
    let only_b: Vec<&String> = tb.difference(&ta).collect();
    let join = |parts: &[&String]| parts.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" ");
    let core = join(&inter);
    let sa = if only_a.is_empty() {
        core.clone()
    } else {
        format!("{core} {}", join(&only_a)).trim().to_string()
    };
    let sb = if only_b.is_empty() {
        core.clone()
    } else {
        format!("{core} {}", join(&only_b)).trim().to_string()
    };
    [
        similarity(&core, &sa),
        similarity(&core, &sb),
        similarity(&sa, &sb),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

fn similarity(a: &str, b: &str) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let max_len = a.chars().count().max(b.chars().count());
    1.0 - levenshtein(a, b) as f64 / max_len as f64
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = if ca == cb { 0 } else { 1 };
            cur[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
