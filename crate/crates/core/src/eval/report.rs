use std::fs;
use std::path::Path;

use super::EvalSummary;
use crate::compose::Variant;

pub const EVAL_HEADER: &str = "variant,k,seed,n_episodes,success_rate,mean_steps,std";
pub const SWEEP_HEADER: &str = "length,variant,k,seed,n_episodes,success_rate,mean_steps,std";
pub const TABLE_HEADER: &str = "variant,best,mean,std,n_seeds";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRow {
    pub variant: Variant,
    pub k: usize,
    pub seed: u64,
    pub summary: EvalSummary,
}

impl EvalRow {
    pub fn csv(&self) -> String {
        let s = &self.summary;
        format!(
            "{},{},{},{},{},{},{}",
            self.variant, self.k, self.seed, s.n_episodes, s.rate, s.mean_steps, s.std
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub length: usize,
    pub row: EvalRow,
}

/// Per-variant aggregate over seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub variant: Variant,
    pub best: f64,
    pub mean: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub std: f64,
    pub n_seeds: usize,
}

fn write_lines(path: &Path, header: &str, lines: impl Iterator<Item = String>) -> std::io::Result<()> {
    let mut text = String::from(header);
    text.push('\n');
    for l in lines {
        text.push_str(&l);
        text.push('\n');
    }
    fs::write(path, text)
}

pub fn write_eval_csv(path: &Path, rows: &[EvalRow]) -> std::io::Result<()> {
    write_lines(path, EVAL_HEADER, rows.iter().map(EvalRow::csv))
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> std::io::Result<()> {
    write_lines(path, SWEEP_HEADER, rows.iter().map(|r| format!("{},{}", r.length, r.row.csv())))
}

/// Groups rows by variant in first-appearance order.
pub fn summarize_table(rows: &[EvalRow]) -> Vec<TableRow> {
    let mut order: Vec<Variant> = Vec::new();
    for r in rows {
        if !order.contains(&r.variant) {
            order.push(r.variant);
        }
    }
    order
        .into_iter()
        .map(|variant| {
            let rates: Vec<f64> = rows.iter().filter(|r| r.variant == variant).map(|r| r.summary.rate).collect();
            let n = rates.len();
            let mean = rates.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (rates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            TableRow {
                variant,
                best: rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean,
                std,
                n_seeds: n,
            }
        })
        .collect()
}

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut text = format!("{TABLE_HEADER}\n");
    for r in rows {
        text.push_str(&format!("{},{},{},{},{}\n", r.variant, r.best, r.mean, r.std, r.n_seeds));
    }
    text
}

/// Parses a CSV written by [`write_eval_csv`]; errors carry 1-based line numbers.
pub fn parse_eval_csv(text: &str) -> Result<Vec<EvalRow>, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == EVAL_HEADER => {}
        _ => return Err(format!("line 1: expected header {EVAL_HEADER:?}")),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let line = i + 1;
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 7 {
                return Err(format!("line {line}: expected 7 fields, found {}", f.len()));
            }
            let bad = |what: &str| format!("line {line}: bad {what}");
            let n_episodes: usize = f[3].parse().map_err(|_| bad("n_episodes"))?;
            let rate: f64 = f[4].parse().map_err(|_| bad("success_rate"))?;
            Ok(EvalRow {
                variant: f[0].parse().map_err(|e: String| format!("line {line}: {e}"))?,
                k: f[1].parse().map_err(|_| bad("k"))?,
                seed: f[2].parse().map_err(|_| bad("seed"))?,
                summary: EvalSummary {
                    n_episodes,
                    successes: (rate * n_episodes as f64).round() as usize,
                    rate,
                    mean_steps: f[5].parse().map_err(|_| bad("mean_steps"))?,
                    std: f[6].parse().map_err(|_| bad("std"))?,
                    ci95: 1.96 * (rate * (1.0 - rate) / n_episodes.max(1) as f64).sqrt(),
                },
            })
        })
        .collect()
}
