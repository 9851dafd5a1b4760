use std::fmt::Write;

use super::{Metrics, NoiseRow};

/// Fixed-width table with one row per labelled run.
pub fn metrics_table(rows: &[(String, Metrics)]) -> String {
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    writeln!(
        out,
        "{:<width$}  {:>8}  {:>14}  {:>12}  {:>10}",
        "model", "TP rate", "classification", "localization", "loc+repair"
    )
    .unwrap();
    for (label, m) in rows {
        writeln!(
            out,
            "{:<width$}  {:>7.1}%  {:>13.1}%  {:>11.1}%  {:>9.1}%",
            label,
            100.0 * m.true_positive_rate,
            100.0 * m.classification_accuracy,
            100.0 * m.localization_accuracy,
            100.0 * m.loc_repair_accuracy
        )
        .unwrap();
    }
    out
}

pub fn metrics_csv(rows: &[(String, Metrics)]) -> String {
    let mut out = String::from(
        "label,true_positive_rate,classification_accuracy,localization_accuracy,loc_repair_accuracy,total,bug_free,buggy\n",
    );
    for (label, m) in rows {
        writeln!(
            out,
            "{label},{},{},{},{},{},{},{}",
            m.true_positive_rate,
            m.classification_accuracy,
            m.localization_accuracy,
            m.loc_repair_accuracy,
            m.counts.total,
            m.counts.bug_free,
            m.counts.buggy
        )
        .unwrap();
    }
    out
}

pub fn noise_table(title: &str, rows: &[NoiseRow]) -> String {
    let mut out = format!("{title}\n{:>6}  {:>7}  {:>7}  {:>7}\n", "tau", "clean", "noisy", "drop");
    for r in rows {
        writeln!(
            out,
            "{:>6.2}  {:>6.1}%  {:>6.1}%  {:>6.1}%",
            r.tau,
            100.0 * r.clean,
            100.0 * r.noisy,
            100.0 * r.drop
        )
        .unwrap();
    }
    out
}

pub fn noise_csv(rows: &[NoiseRow]) -> String {
    let mut out = String::from("tau,clean,noisy,drop\n");
    for r in rows {
        writeln!(out, "{},{},{},{}", r.tau, r.clean, r.noisy, r.drop).unwrap();
    }
    out
}
