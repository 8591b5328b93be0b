//! Per-point margin records for verified inequalities.

use crate::error::{FinslerError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// Too many points excluded, or the underlying solve did not converge.
    Inconclusive,
    HypothesesNotMet,
    NotApplicable,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
            Status::HypothesesNotMet => "hypotheses-not-met",
            Status::NotApplicable => "not-applicable",
        }
    }
}

/// One evaluated point: `margin = rhs − lhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginRecord {
    pub x: Vec<f64>,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub name: String,
    #[serde(skip)]
    pub records: Vec<MarginRecord>,
    pub evaluated: usize,
    pub excluded: usize,
    pub min_margin: f64,
    pub argmin_x: Vec<f64>,
    pub argmin_t: f64,
    pub tol: f64,
    pub pass: bool,
    pub status: Status,
    pub notes: Vec<String>,
    /// Named scalars echoed with the report (constants, measured sups).
    pub values: BTreeMap<String, f64>,
}

/// Points are excluded beyond this fraction → inconclusive.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.5;

impl MarginReport {
    pub fn new(name: &str, tol: f64) -> Self {
        MarginReport {
            name: name.to_string(),
            records: Vec::new(),
            evaluated: 0,
            excluded: 0,
            min_margin: f64::INFINITY,
            argmin_x: Vec::new(),
            argmin_t: f64::NAN,
            tol,
            pass: false,
            status: Status::Inconclusive,
            notes: Vec::new(),
            values: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, x: &[f64], t: f64, lhs: f64, rhs: f64) {
        self.records.push(MarginRecord { x: x.to_vec(), t, lhs, rhs, margin: rhs - lhs });
    }

    pub fn exclude(&mut self, count: usize) {
        self.excluded += count;
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn value(&mut self, key: &str, v: f64) {
        self.values.insert(key.to_string(), v);
    }

    /// Recompute the summary from the records.
    pub fn finalize(&mut self) -> &mut Self {
        self.evaluated = self.records.len();
        self.min_margin = f64::INFINITY;
        self.argmin_x.clear();
        self.argmin_t = f64::NAN;
        for r in &self.records {
            // NaN margins count as failures
            let m = if r.margin.is_nan() { f64::NEG_INFINITY } else { r.margin };
            if m < self.min_margin || self.argmin_x.is_empty() {
                self.min_margin = m;
                self.argmin_x = r.x.clone();
                self.argmin_t = r.t;
            }
        }
        self.pass = self.evaluated > 0 && self.min_margin >= -self.tol;
        let total = self.evaluated + self.excluded;
        self.status = if self.evaluated == 0 || (total > 0 && self.excluded as f64 > MAX_EXCLUDED_FRACTION * total as f64) {
            Status::Inconclusive
        } else if self.pass {
            Status::Pass
        } else {
            Status::Fail
        };
        self
    }

    pub fn with_status(mut self, s: Status) -> Self {
        self.status = s;
        self
    }

    pub fn exclusion_fraction(&self) -> f64 {
        let total = self.evaluated + self.excluded;
        if total == 0 {
            0.0
        } else {
            self.excluded as f64 / total as f64
        }
    }

    pub fn to_csv(&self) -> String {
        let n = self.records.first().map_or(0, |r| r.x.len());
        let mut s = String::new();
        let head: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        let _ = writeln!(s, "{}{}t,lhs,rhs,margin", head.join(","), if n > 0 { "," } else { "" });
        for r in &self.records {
            for c in &r.x {
                let _ = write!(s, "{c:e},");
            }
            let _ = writeln!(s, "{:e},{:e},{:e},{:e}", r.t, r.lhs, r.rhs, r.margin);
        }
        s
    }

    /// Parse records written by [`MarginReport::to_csv`].
    pub fn records_from_csv(text: &str) -> Result<Vec<MarginRecord>> {
        let mut lines = text.lines();
        let head = lines.next().ok_or_else(|| FinslerError::Config("empty report csv".into()))?;
        let cols = head.split(',').count();
        if cols < 4 {
            return Err(FinslerError::Config("report csv needs t,lhs,rhs,margin columns".into()));
        }
        let n = cols - 4;
        lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                let v: std::result::Result<Vec<f64>, _> = l.split(',').map(|c| c.trim().parse::<f64>()).collect();
                let v = v.map_err(|e| FinslerError::Config(format!("report csv line {}: {e}", i + 2)))?;
                if v.len() != cols {
                    return Err(FinslerError::Config(format!("report csv line {}: expected {cols} fields", i + 2)));
                }
                Ok(MarginRecord { x: v[..n].to_vec(), t: v[n], lhs: v[n + 1], rhs: v[n + 2], margin: v[n + 3] })
            })
            .collect()
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{:<22} {:<18} min margin {:>12.4e}  tol {:.2e}  evaluated {}  excluded {}",
            self.name,
            self.status.as_str(),
            self.min_margin,
            self.tol,
            self.evaluated,
            self.excluded
        )
    }
}
