//! Plain-text and CSV renderings of the analysis results.

use std::fmt::Write as _;

use sipsense_core::analysis::{compare_rows, ChiSquareResult, EffectivenessRow, PhaseSummary};

pub struct Report {
    pub rows: Vec<EffectivenessRow>,
    /// (first label, second label, result) for adjacent rows.
    pub comparisons: Vec<(&'static str, &'static str, ChiSquareResult)>,
    pub phases: Option<Vec<PhaseSummary>>,
}

impl Report {
    pub fn new(rows: Vec<EffectivenessRow>, phases: Option<Vec<PhaseSummary>>) -> Self {
        let comparisons = rows
            .windows(2)
            .map(|w| (w[0].label, w[1].label, compare_rows(&w[0], &w[1])))
            .collect();
        Report {
            rows,
            comparisons,
            phases,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max("Intervention".len());
        let _ = writeln!(out, "{:<width$}  {:>7}  {:>9}  {:>13}", "Intervention", "Total", "Effective", "Effectiveness");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>7}  {:>9}  {:>12.2}%",
                r.label, r.total, r.effective, r.pct
            );
        }
        out.push('\n');
        for (a, b, c) in &self.comparisons {
            let _ = writeln!(out, "{a} vs {b}: chi2 = {:.2}, df = {}, {}", c.statistic, c.df, c.p_bucket);
        }
        if let Some(phases) = &self.phases {
            out.push('\n');
            let _ = writeln!(out, "{:<5}  {:<10}  {:<10}  {:>4}  {:>12}", "Phase", "From", "To", "Days", "Mean mL/day");
            for p in phases {
                let (from, to) = match (p.per_day.first(), p.per_day.last()) {
                    (Some(f), Some(l)) => (f.0.to_string(), l.0.to_string()),
                    _ => (String::new(), String::new()),
                };
                let _ = writeln!(
                    out,
                    "{:<5}  {:<10}  {:<10}  {:>4}  {:>12.1}",
                    p.phase.as_str(),
                    from,
                    to,
                    p.days,
                    p.mean_daily_ml
                );
            }
        }
        out
    }

    pub fn effectiveness_csv(&self) -> String {
        let mut out = String::from("kind,total,effective,pct\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{:.2}", r.kind, r.total, r.effective, r.pct);
        }
        out
    }

    pub fn phases_csv(&self) -> Option<String> {
        let phases = self.phases.as_ref()?;
        let mut out = String::from("phase,date,total_ml\n");
        for p in phases {
            for (d, ml) in &p.per_day {
                let _ = writeln!(out, "{},{},{:.1}", p.phase.as_str(), d, ml);
            }
        }
        Some(out)
    }
}
