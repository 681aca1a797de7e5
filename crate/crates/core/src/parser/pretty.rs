//! Canonical rendering of plans: one line per step, `#k = ` prefix,
//! single-space separated clauses, newline-separated lines.

use crate::ast::{OpKind, Predicate, QplNode, QplPlan};

pub fn pretty_print(plan: &QplPlan) -> String {
    plan.lines()
        .iter()
        .map(|line| format!("#{} = {}", line.step.0, render_node(&line.node)))
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_node(node: &QplNode) -> String {
    let mut parts: Vec<String> = vec![node.op.name().to_string()];
    match node.op {
        OpKind::Scan => {
            parts.push(format!(
                "Table [ {} ]",
                node.table_name.as_deref().unwrap_or("?")
            ));
        }
        _ => {
            let inputs = node
                .inputs
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(", ");
            parts.push(format!("[ {inputs} ]"));
        }
    }
    if node.op == OpKind::TopSort {
        if let Some(rows) = node.rows {
            parts.push(format!("Rows [ {rows} ]"));
        }
    }
    if let Some(pred) = &node.predicate {
        parts.push(format!("Predicate [ {} ]", render_predicate(pred)));
    }
    if let Some(group_by) = &node.group_by {
        parts.push(format!("GroupBy [ {} ]", group_by.join(", ")));
    }
    if let Some(order_by) = &node.order_by {
        let keys = order_by
            .iter()
            .map(|(col, dir)| format!("{col} {}", dir.keyword()))
            .collect::<Vec<_>>()
            .join(", ");
        parts.push(format!("OrderBy [ {keys} ]"));
    }
    if let Some(ties) = node.with_ties {
        parts.push(format!("WithTies [ {ties} ]"));
    }
    if let Some(distinct) = node.distinct {
        parts.push(format!("Distinct [ {distinct} ]"));
    }
    let outputs = node
        .output
        .iter()
        .map(|o| o.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    parts.push(format!("Output [ {outputs} ]"));
    parts.join(" ")
}

fn render_predicate(pred: &Predicate) -> String {
    let mut out = pred.first.to_string();
    for (conn, cmp) in &pred.rest {
        out.push(' ');
        out.push_str(conn.keyword());
        out.push(' ');
        out.push_str(&cmp.to_string());
    }
    out
}
