use std::collections::BTreeMap;
use std::fmt::Write;

use foodsim_core::demand::PeMatrix;
use foodsim_core::engine::{haly_key, OutcomeRow, ScenarioOutcome};
use foodsim_core::uncertainty::{McSummary, SensitivityRun};

type CsvResult = Result<String, Box<dyn std::error::Error>>;

fn finish(w: csv::Writer<Vec<u8>>) -> CsvResult {
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn haly_columns(o: &ScenarioOutcome) -> Vec<String> {
    o.conventional.haly.iter().map(|h| haly_key(h.discount_rate)).collect()
}

fn tfee_cell(row: &OutcomeRow) -> String {
    row.revealed_tfee.map_or("-".into(), |t| format!("{t:.2}"))
}

pub fn outcome_table(outcomes: &[ScenarioOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        let _ = writeln!(out, "{}: food price index {:+.2}%, rescale {}", o.policy, o.fpi_change_pct, o.mode);
        let mut head = format!(
            "  {:<14}{:>12}{:>12}{:>12}{:>9}",
            "", "grams/day", "spend %", "energy kJ", "BMI"
        );
        for h in &o.conventional.haly {
            head.push_str(&format!("{:>14}", format!("HALYs {}%", (h.discount_rate * 100.0).round())));
        }
        head.push_str(&format!("{:>8}", "TFEe"));
        let _ = writeln!(out, "{head}");
        for row in [&o.rescaled, &o.conventional] {
            let mut line = format!(
                "  {:<14}{:>12.2}{:>12.2}{:>12.1}{:>9.3}",
                row.label, row.grams_change, row.expenditure_change_pct, row.energy_change_kj, row.bmi_change
            );
            for h in &row.haly {
                line.push_str(&format!("{:>14.0}", h.delta));
            }
            line.push_str(&format!("{:>8}", tfee_cell(row)));
            let _ = writeln!(out, "{line}");
            if !row.floored.is_empty() {
                let _ = writeln!(out, "  {:<14}floored at zero: {}", "", row.floored.join(", "));
            }
        }
        out.push('\n');
    }
    out
}

pub fn outcome_csv(outcomes: &[ScenarioOutcome]) -> CsvResult {
    let mut w = csv::Writer::from_writer(Vec::new());
    let Some(first) = outcomes.first() else {
        return Ok(String::new());
    };
    let nutrients: Vec<&String> = first.conventional.nutrients.keys().collect();
    let mut header: Vec<String> = [
        "policy",
        "arm",
        "fpi_change_pct",
        "expenditure_change_pct",
        "grams_change",
        "energy_change_kj",
        "bmi_change",
    ]
    .map(String::from)
    .to_vec();
    header.extend(nutrients.iter().map(|n| format!("{n}_change")));
    header.extend(haly_columns(first));
    header.push("revealed_tfee".into());
    w.write_record(&header)?;
    for o in outcomes {
        for row in [&o.rescaled, &o.conventional] {
            let mut rec = vec![
                o.policy.clone(),
                row.label.clone(),
                format!("{:.2}", o.fpi_change_pct),
                format!("{:.2}", row.expenditure_change_pct),
                format!("{:.4}", row.grams_change),
                format!("{:.4}", row.energy_change_kj),
                format!("{:.6}", row.bmi_change),
            ];
            rec.extend(nutrients.iter().map(|n| format!("{:.6}", row.nutrients[*n])));
            rec.extend(row.haly.iter().map(|h| format!("{:.2}", h.delta)));
            rec.push(row.revealed_tfee.map_or(String::new(), |t| format!("{t:.6}")));
            w.write_record(&rec)?;
        }
    }
    finish(w)
}

pub fn summary_csv(summaries: &BTreeMap<String, McSummary>) -> CsvResult {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["policy", "metric", "mean", "median", "p2_5", "p97_5"])?;
    for (policy, s) in summaries {
        for (metric, m) in &s.metrics {
            w.write_record([
                policy.clone(),
                metric.clone(),
                m.mean.to_string(),
                m.median.to_string(),
                m.p2_5.to_string(),
                m.p97_5.to_string(),
            ])?;
        }
    }
    finish(w)
}

pub fn sensitivity_table(runs: &[SensitivityRun]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12}{:>8}{:>10}{:>12}{:>12}{:>12}{:>14}",
        "policy", "pct", "value", "spend %", "energy kJ", "BMI", "HALYs"
    );
    for r in runs {
        let row = &r.outcome.rescaled;
        let haly = row.haly.last().map_or(String::from("-"), |h| format!("{:.0}", h.delta));
        let _ = writeln!(
            out,
            "{:<12}{:>8}{:>10.4}{:>12.2}{:>12.1}{:>12.3}{:>14}",
            r.outcome.policy, r.percentile, r.value, row.expenditure_change_pct, row.energy_change_kj, row.bmi_change, haly
        );
    }
    out
}

pub fn sensitivity_csv(runs: &[SensitivityRun]) -> CsvResult {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "policy".to_string(),
        "param".into(),
        "percentile".into(),
        "value".into(),
        "expenditure_change_pct".into(),
        "energy_change_kj".into(),
        "bmi_change".into(),
    ];
    if let Some(r) = runs.first() {
        header.extend(haly_columns(&r.outcome));
    }
    w.write_record(&header)?;
    for r in runs {
        let row = &r.outcome.rescaled;
        let mut rec = vec![
            r.outcome.policy.clone(),
            serde_json::to_value(r.param)?.as_str().unwrap_or_default().to_string(),
            r.percentile.to_string(),
            r.value.to_string(),
            format!("{:.2}", row.expenditure_change_pct),
            format!("{:.4}", row.energy_change_kj),
            format!("{:.6}", row.bmi_change),
        ];
        rec.extend(row.haly.iter().map(|h| format!("{:.2}", h.delta)));
        w.write_record(&rec)?;
    }
    finish(w)
}

pub fn matrix_csv(m: &PeMatrix) -> CsvResult {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["food_id".to_string()];
    header.extend(m.food_ids.iter().cloned());
    w.write_record(&header)?;
    for (id, row) in m.food_ids.iter().zip(&m.values) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    finish(w)
}
