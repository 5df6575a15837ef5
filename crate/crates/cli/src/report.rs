//! Deterministic plain-text run reports.

use std::fmt::Write;

use sha2::{Digest, Sha256};
use witnesskit::compat::SolverInfo;

enum Row {
    Value { label: String, value: String },
    Check { label: String, pass: bool, detail: String },
}

pub struct RunReport {
    command: String,
    seed: u64,
    inputs: Vec<(String, String)>,
    rows: Vec<Row>,
    solver: Vec<(String, SolverInfo)>,
}

impl RunReport {
    pub fn new(command: String, seed: u64) -> Self {
        Self { command, seed, inputs: Vec::new(), rows: Vec::new(), solver: Vec::new() }
    }

    pub fn input(&mut self, name: &str, bytes: &[u8]) {
        let digest = hex::encode(Sha256::digest(bytes));
        self.inputs.push((name.to_string(), digest[..16].to_string()));
    }

    pub fn value(&mut self, label: impl Into<String>, value: impl Into<String>) {
        self.rows.push(Row::Value { label: label.into(), value: value.into() });
    }

    pub fn num(&mut self, label: impl Into<String>, x: f64) {
        self.value(label, fmt_num(x));
    }

    pub fn check(&mut self, label: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.rows.push(Row::Check { label: label.into(), pass, detail: detail.into() });
    }

    pub fn solver(&mut self, what: impl Into<String>, info: SolverInfo) {
        self.solver.push((what.into(), info));
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| !matches!(r, Row::Check { pass: false, .. }))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "$ {}", self.command);
        let _ = writeln!(out, "seed: {}", self.seed);
        if self.inputs.is_empty() {
            let _ = writeln!(out, "inputs: none");
        }
        for (name, digest) in &self.inputs {
            let _ = writeln!(out, "input: {name} sha256={digest}");
        }
        out.push('\n');
        let width = self
            .rows
            .iter()
            .map(|r| match r {
                Row::Value { label, .. } => label.len(),
                Row::Check { .. } => 0,
            })
            .max()
            .unwrap_or(0);
        for r in &self.rows {
            let _ = match r {
                Row::Value { label, value } => writeln!(out, "{label:<width$}  {value}"),
                Row::Check { label, pass, detail } => {
                    writeln!(out, "{} [{label}] {detail}", if *pass { "PASS" } else { "FAIL" })
                }
            };
        }
        if !self.solver.is_empty() {
            out.push('\n');
            for (what, info) in &self.solver {
                let _ = writeln!(out, "solver {what}: {} iterations, gap {:.2e}", info.iterations, info.gap);
            }
        }
        out
    }
}

/// Fixed-precision scientific format, with a signed zero printed as `0`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    format!("{x:.9e}")
}
