use std::fmt;
use std::io::Write;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotApplicable => "not-applicable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    B,
    C,
    Strong,
    NormalCone,
}

impl fmt::Display for ReportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportKind::B => "b",
            ReportKind::C => "c",
            ReportKind::Strong => "strong",
            ReportKind::NormalCone => "normal-cone",
        })
    }
}

/// One checked condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub key: String,
    pub value: f64,
    pub tol: f64,
    pub verdict: Verdict,
    /// Informational entries do not affect the overall verdict.
    pub gating: bool,
    /// Global node id (or test-function index for `c_stat_45`) of the worst violation.
    pub worst: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    pub kind: ReportKind,
    pub residuals: Vec<Residual>,
    pub eps_a: f64,
    pub eps_b: f64,
    pub eps_s: f64,
    /// Global node ids.
    pub omega_a: Vec<usize>,
    pub omega_s: Vec<usize>,
    pub omega_b: Vec<usize>,
    pub notes: Vec<String>,
}

impl StationarityReport {
    pub(crate) fn new(kind: ReportKind, eps: (f64, f64, f64)) -> Self {
        StationarityReport {
            kind,
            residuals: Vec::new(),
            eps_a: eps.0,
            eps_b: eps.1,
            eps_s: eps.2,
            omega_a: Vec::new(),
            omega_s: Vec::new(),
            omega_b: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, key: &str, value: f64, tol: f64, worst: Option<usize>) {
        let verdict = if value <= tol { Verdict::Pass } else { Verdict::Fail };
        self.residuals.push(Residual {
            key: key.to_string(),
            value,
            tol,
            verdict,
            gating: true,
            worst,
        });
    }

    pub(crate) fn push_info(&mut self, key: &str, value: f64, tol: f64, worst: Option<usize>) {
        self.push(key, value, tol, worst);
        self.residuals.last_mut().unwrap().gating = false;
    }

    pub(crate) fn push_not_applicable(&mut self, key: &str) {
        self.residuals.push(Residual {
            key: key.to_string(),
            value: f64::NAN,
            tol: f64::NAN,
            verdict: Verdict::NotApplicable,
            gating: true,
            worst: None,
        });
    }

    pub fn get(&self, key: &str) -> Option<&Residual> {
        self.residuals.iter().find(|r| r.key == key)
    }

    pub fn value(&self, key: &str) -> Option<f64> {
        self.get(key).map(|r| r.value)
    }

    pub fn passed(&self) -> bool {
        self.residuals
            .iter()
            .filter(|r| r.gating)
            .all(|r| r.verdict != Verdict::Fail)
    }

    pub fn has_not_applicable(&self) -> bool {
        self.residuals.iter().any(|r| r.verdict == Verdict::NotApplicable)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.residuals
            .iter()
            .filter(|r| r.gating && r.verdict == Verdict::Fail)
            .map(|r| r.key.as_str())
            .collect()
    }

    /// Machine-readable `key value` block.
    pub fn write_kv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "kind {}", self.kind)?;
        writeln!(w, "verdict {}", if self.passed() { "pass" } else { "fail" })?;
        writeln!(w, "eps_a {:?}", self.eps_a)?;
        writeln!(w, "eps_b {:?}", self.eps_b)?;
        writeln!(w, "eps_s {:?}", self.eps_s)?;
        for (name, set) in [("omega_a", &self.omega_a), ("omega_s", &self.omega_s), ("omega_b", &self.omega_b)] {
            write!(w, "{name}")?;
            for i in set.iter() {
                write!(w, " {i}")?;
            }
            writeln!(w)?;
        }
        for r in &self.residuals {
            write!(w, "{} {:?} tol {:?} {}", r.key, r.value, r.tol, r.verdict)?;
            if !r.gating {
                write!(w, " info")?;
            }
            if let Some(i) = r.worst {
                write!(w, " worst {i}")?;
            }
            writeln!(w)?;
        }
        for n in &self.notes {
            writeln!(w, "note {n}")?;
        }
        Ok(())
    }

    /// Human-readable table.
    pub fn write_table(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{} stationarity: {}", self.kind, if self.passed() { "PASS" } else { "FAIL" })?;
        writeln!(w, "{:<22} {:>13} {:>10}  verdict", "condition", "residual", "tol")?;
        for r in &self.residuals {
            let tag = if r.gating { "" } else { " (info)" };
            writeln!(w, "{:<22} {:>13.4e} {:>10.1e}  {}{}", r.key, r.value, r.tol, r.verdict, tag)?;
        }
        writeln!(
            w,
            "|Omega_a| = {}, |Omega_s| = {}, |Omega_b| = {}",
            self.omega_a.len(),
            self.omega_s.len(),
            self.omega_b.len()
        )?;
        for n in &self.notes {
            writeln!(w, "note: {n}")?;
        }
        Ok(())
    }
}
