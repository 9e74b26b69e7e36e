use std::fmt::Write as _;

use super::{CoefficientTable, LstmRow, Report, METRIC_DECIMALS};
use crate::factor_models::{ComparisonTable, COEFFICIENT_DECIMALS};
use crate::regression::PValue;

pub const STAR_FOOTNOTE: &str = "Significance: *** p < 0.001, ** p < 0.01, * p < 0.05";

fn coef(v: f64) -> String {
    format!("{v:.COEFFICIENT_DECIMALS$}")
}

fn metric(v: f64) -> String {
    format!("{v:.METRIC_DECIMALS$}")
}

fn p_text(p: PValue) -> String {
    if p.is_below_floor() {
        "<1e-300".to_string()
    } else if p.value() < 1e-3 {
        format!("{:.2e}", p.value())
    } else {
        metric(p.value())
    }
}

fn term_label(term: &str) -> &str {
    match term {
        "const" => "Intercept",
        other => other,
    }
}

fn coefficient_section(out: &mut String, t: &CoefficientTable) {
    writeln!(out, "### {} regression\n", t.model.label()).unwrap();
    writeln!(out, "`{}`\n", t.equation).unwrap();
    out.push_str("| Term | Coefficient | Std. error | t | p-value | |\n");
    out.push_str("|---|---:|---:|---:|---:|---|\n");
    for r in &t.rows {
        writeln!(
            out,
            "| {} | {} | {} | {:.3} | {} | {} |",
            term_label(&r.term),
            coef(r.estimate),
            coef(r.std_error),
            r.t_stat,
            p_text(r.p_value),
            r.stars
        )
        .unwrap();
    }
    writeln!(
        out,
        "\nn = {}, R² = {}, adjusted R² = {}, F = {:.3}, p(F) = {}\n",
        t.n_obs,
        metric(t.r_squared),
        metric(t.adj_r_squared),
        t.f_stat,
        p_text(t.f_p_value)
    )
    .unwrap();
    writeln!(out, "{STAR_FOOTNOTE}\n").unwrap();
}

fn comparison_section(out: &mut String, t: &ComparisonTable) {
    out.push_str("### Model comparison (in-sample)\n\n");
    out.push_str("| Model | R² | P-value | RMSE | MAE |\n");
    out.push_str("|---|---:|---:|---:|---:|\n");
    for r in &t.rows {
        writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            r.model.label(),
            metric(r.r_squared),
            p_text(r.f_p_value),
            metric(r.rmse),
            metric(r.mae)
        )
        .unwrap();
    }
    out.push('\n');
}

fn lstm_section(out: &mut String, row: &LstmRow) {
    writeln!(
        out,
        "### LSTM ({} split: {} windows from {}, trained on {})\n",
        row.split, row.test_samples, row.first_test_month, row.train_samples
    )
    .unwrap();
    out.push_str("| Model | R² | RMSE | MAE |\n");
    out.push_str("|---|---:|---:|---:|\n");
    let r2 = row.r_squared.map_or_else(|| "n/a".to_string(), metric);
    writeln!(out, "| LSTM | {} | {} | {} |\n", r2, metric(row.rmse), metric(row.mae)).unwrap();
}

pub fn render_markdown(report: &Report) -> String {
    let mut out = String::from("# Factor model report\n\n");
    for s in &report.sectors {
        writeln!(out, "## {}\n", s.sector).unwrap();
        for t in &s.coefficients {
            coefficient_section(&mut out, t);
        }
        if let Some(t) = &s.comparison {
            comparison_section(&mut out, t);
        }
        if let Some(row) = &s.lstm {
            lstm_section(&mut out, row);
        }
    }

    let p = &report.provenance;
    out.push_str("## Provenance\n\n");
    writeln!(out, "- tool: {} {}", p.tool, p.version).unwrap();
    writeln!(out, "- months: {} ({} to {})", p.months, p.first_month, p.last_month).unwrap();
    if let Some(seed) = p.seed {
        writeln!(out, "- seed: {seed}").unwrap();
    }
    writeln!(out, "- interpolated cells: {}", p.cells_filled).unwrap();
    writeln!(out, "- outliers replaced: {}", p.outliers_removed.len()).unwrap();
    for o in &p.outliers_removed {
        writeln!(out, "  - {} {}: {}", o.column, o.date, o.value).unwrap();
    }
    out.push_str("\n| Role | Path | Bytes | SHA-256 |\n|---|---|---:|---|\n");
    for i in &p.inputs {
        writeln!(out, "| {} | {} | {} | `{}` |", i.role, i.path, i.bytes, i.sha256).unwrap();
    }
    out.push_str("\nConfiguration:\n\n```json\n");
    out.push_str(&serde_json::to_string_pretty(&p.config).expect("config serializes"));
    out.push_str("\n```\n");
    out
}
