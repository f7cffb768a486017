//! CSV and JSON renderers. Numbers use Rust's shortest round-trip formatting,
//! so identical inputs give identical bytes.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use tensor_mp::mplaw::{MpLaw, MpTableRow};
use tensor_mp::simulation::{Histogram, TrialReport};

use crate::CliError;

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Plain notation for moderate magnitudes, scientific otherwise.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !a.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// `p,theory[,exact,abs_error]`.
pub fn moments_table(theory: &[f64], exact: Option<&[f64]>) -> String {
    let mut csv = match exact {
        Some(_) => Csv::new(&["p", "theory", "exact", "abs_error"]),
        None => Csv::new(&["p", "theory"]),
    };
    for (idx, &t) in theory.iter().enumerate() {
        let mut cells = vec![(idx + 1).to_string(), num(t)];
        if let Some(exact) = exact {
            cells.push(num(exact[idx]));
            cells.push(num((exact[idx] - t).abs()));
        }
        csv.row(&cells);
    }
    csv.into_string()
}

/// Aggregate Monte Carlo moments: `p,theory,mean,std_error,abs_error`.
pub fn simulated_moments(report: &TrialReport) -> String {
    let mut csv = Csv::new(&["p", "theory", "mean", "std_error", "abs_error"]);
    for m in &report.moments {
        csv.row(&[
            m.p.to_string(),
            opt(m.theory),
            num(m.mean),
            opt(m.standard_error),
            opt(m.theory.map(|t| (m.mean - t).abs())),
        ]);
    }
    csv.into_string()
}

pub fn trial_moments(report: &TrialReport) -> String {
    let mut csv = Csv::new(&["trial", "p", "value"]);
    for s in &report.samples {
        for (idx, v) in s.trace_moments.iter().enumerate() {
            csv.row(&[s.trial.to_string(), (idx + 1).to_string(), num(*v)]);
        }
    }
    csv.into_string()
}

fn histogram_rows(csv: &mut Csv, prefix: &[String], h: &Histogram) {
    // The zero atom gets its own degenerate bin [0, 0].
    let mut atom = prefix.to_vec();
    atom.extend([num(0.0), num(0.0), num(h.zero_atom)]);
    csv.row(&atom);
    for (j, mass) in h.mass.iter().enumerate() {
        let mut cells = prefix.to_vec();
        cells.extend([num(h.edges[j]), num(h.edges[j + 1]), num(*mass)]);
        csv.row(&cells);
    }
}

/// Trial-averaged histogram: `bin_left,bin_right,mass`.
pub fn pooled_histogram(report: &TrialReport) -> String {
    let mut csv = Csv::new(&["bin_left", "bin_right", "mass"]);
    histogram_rows(&mut csv, &[], &report.pooled_histogram);
    csv.into_string()
}

pub fn trial_histograms(report: &TrialReport) -> String {
    let mut csv = Csv::new(&["trial", "bin_left", "bin_right", "mass"]);
    for (s, h) in report.samples.iter().zip(&report.histograms) {
        histogram_rows(&mut csv, &[s.trial.to_string()], h);
    }
    csv.into_string()
}

pub fn dense_table(report: &TrialReport) -> Option<String> {
    let dense = report.dense.as_ref()?;
    let mut csv = Csv::new(&["trial", "max_eigenvalue_diff", "max_moment_diff"]);
    for (s, d) in report.samples.iter().zip(dense) {
        csv.row(&[s.trial.to_string(), num(d.max_eigenvalue_diff), num(d.max_moment_diff)]);
    }
    Some(csv.into_string())
}

/// `x,pdf,cdf,atom_mass`; for `c < 1` a leading row carries the atom at zero.
pub fn mplaw_table(law: &MpLaw, rows: &[MpTableRow]) -> String {
    let mut csv = Csv::new(&["x", "pdf", "cdf", "atom_mass"]);
    let grid_has_zero = rows.first().is_some_and(|r| r.x == 0.0);
    if law.atom > 0.0 && !grid_has_zero {
        csv.row(&[num(0.0), num(0.0), num(law.atom), num(law.atom)]);
    }
    for r in rows {
        let atom = if r.x == 0.0 { law.atom } else { 0.0 };
        csv.row(&[num(r.x), num(r.pdf), num(r.cdf), num(atom)]);
    }
    csv.into_string()
}

pub fn simulation_json(config: Value, report: &TrialReport) -> Value {
    let samples: Vec<Value> = report
        .samples
        .iter()
        .map(|s| {
            json!({
                "trial": s.trial,
                "nonzero_eigenvalues": s.nonzero_eigenvalues.len(),
                "zero_multiplicity": s.zero_multiplicity.to_string(),
                "trace_moments": s.trace_moments,
            })
        })
        .collect();
    json!({
        "config": config,
        "dimension": report.samples[0].dimension().to_string(),
        "ratio": report.config.ratio(),
        "moments": report.moments,
        "ks": report.ks,
        "mean_ks": report.mean_ks(),
        "dense": report.dense,
        "trials": samples,
    })
}

pub fn to_pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json serializes");
    s.push('\n');
    s
}

/// Files produced by one command, written together or not at all.
pub struct OutputSet {
    dir: PathBuf,
    stem: String,
    files: Vec<(String, String)>,
}

impl OutputSet {
    pub fn new(dir: &Path, command: &str, digest: &str) -> Self {
        Self {
            dir: dir.to_path_buf(),
            stem: format!("{command}-{digest}"),
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, suffix: &str, contents: String) {
        self.files.push((format!("{}{suffix}", self.stem), contents));
    }

    /// Refuses to overwrite existing files unless `force` is set.
    pub fn write(&self, force: bool) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(&self.dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", self.dir.display())))?;
        let paths: Vec<PathBuf> = self.files.iter().map(|(name, _)| self.dir.join(name)).collect();
        if !force {
            if let Some(existing) = paths.iter().find(|p| p.exists()) {
                return Err(CliError::Usage(format!(
                    "{} already exists; pass --force to overwrite",
                    existing.display()
                )));
            }
        }
        for (path, (_, contents)) in paths.iter().zip(&self.files) {
            std::fs::write(path, contents).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
        }
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(14.0), "14");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(1.1102230246251565e-15), "1.1102230246251565e-15");
        assert_eq!(num(-2.5e-7), "-2.5e-7");
    }

    #[test]
    fn atom_row() {
        let law = MpLaw::new(0.25).unwrap();
        let rows = tensor_mp::mplaw::table(0.25, 0.5, 2.0, 2, 1e-10).unwrap();
        let csv = mplaw_table(&law, &rows);
        assert!(csv.lines().nth(1).unwrap().ends_with(",0.75"));
    }
}
