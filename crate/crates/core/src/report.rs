//! Machine-readable reports: named checks with verdicts, both sides of each
//! comparison, the tolerance and how the value was obtained.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::certify::{ExactCheck, Relation};
use crate::error::Result;
use crate::rational::{decimal_string, fraction_string};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Info,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Info => "INFO",
        })
    }
}

/// How a value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    ClosedForm,
    Quadrature,
    MonteCarlo,
    FiniteDifference,
    Fit,
}

/// One named comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub relation: String,
    pub lhs: String,
    pub rhs: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lhs_exact: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs_exact: Option<String>,
    pub tolerance: String,
    pub provenance: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn pass_fail(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

impl Check {
    /// `lhs = rhs` up to relative tolerance `tol`.
    pub fn close(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64, method: Method) -> Self {
        let err = rel_diff(lhs, rhs);
        Check {
            name: name.into(),
            verdict: pass_fail(err <= tol),
            relation: "=".into(),
            lhs: num(lhs),
            rhs: num(rhs),
            lhs_exact: None,
            rhs_exact: None,
            tolerance: format!("relative {tol:e} (observed {err:e})"),
            provenance: method,
            note: None,
        }
    }

    /// `lhs <= rhs`.
    pub fn at_most(name: impl Into<String>, lhs: f64, rhs: f64, method: Method) -> Self {
        Self::ordered(name, lhs, "<=", rhs, lhs <= rhs, method)
    }

    /// `lhs < rhs`.
    pub fn less(name: impl Into<String>, lhs: f64, rhs: f64, method: Method) -> Self {
        Self::ordered(name, lhs, "<", rhs, lhs < rhs, method)
    }

    /// `lhs > rhs`.
    pub fn greater(name: impl Into<String>, lhs: f64, rhs: f64, method: Method) -> Self {
        Self::ordered(name, lhs, ">", rhs, lhs > rhs, method)
    }

    /// `|lhs - target| <= tol`.
    pub fn within(name: impl Into<String>, lhs: f64, target: f64, tol: f64, method: Method) -> Self {
        let mut c = Self::ordered(name, lhs, "=", target, (lhs - target).abs() <= tol, method);
        c.tolerance = format!("absolute {tol:e}");
        c
    }

    fn ordered(name: impl Into<String>, lhs: f64, rel: &str, rhs: f64, ok: bool, method: Method) -> Self {
        Check {
            name: name.into(),
            verdict: pass_fail(ok && lhs.is_finite() && rhs.is_finite()),
            relation: rel.into(),
            lhs: num(lhs),
            rhs: num(rhs),
            lhs_exact: None,
            rhs_exact: None,
            tolerance: "strict".into(),
            provenance: method,
            note: None,
        }
    }

    /// An exact rational comparison.
    pub fn exact(name: impl Into<String>, c: &ExactCheck) -> Self {
        let relation = match c.relation {
            Relation::Less => "<",
            Relation::Greater => ">",
            Relation::Equal => "=",
            Relation::LessEq => "<=",
        };
        Check {
            name: name.into(),
            verdict: pass_fail(c.holds()),
            relation: relation.into(),
            lhs: decimal_string(&c.lhs, 24),
            rhs: decimal_string(&c.rhs, 24),
            lhs_exact: Some(fraction_string(&c.lhs)),
            rhs_exact: Some(fraction_string(&c.rhs)),
            tolerance: "exact".into(),
            provenance: Method::Exact,
            note: None,
        }
    }

    /// A recorded value that is not asserted.
    pub fn info(name: impl Into<String>, lhs: f64, rhs: f64, method: Method) -> Self {
        Check {
            name: name.into(),
            verdict: Verdict::Info,
            relation: "~".into(),
            lhs: num(lhs),
            rhs: num(rhs),
            lhs_exact: None,
            rhs_exact: None,
            tolerance: "none".into(),
            provenance: method,
            note: None,
        }
    }

    /// A failure raised by the computation itself.
    pub fn error(name: impl Into<String>, message: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            verdict: Verdict::Fail,
            relation: "error".into(),
            lhs: "-".into(),
            rhs: "-".into(),
            lhs_exact: None,
            rhs_exact: None,
            tolerance: "none".into(),
            provenance: Method::Exact,
            note: Some(message.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Demotes a verdict to INFO (used outside the asserted range).
    pub fn informational(mut self) -> Self {
        self.verdict = Verdict::Info;
        self
    }
}

/// A complete report for one command invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub command: String,
    pub version: String,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub parameters: BTreeMap<String, Value>,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
}

/// ISO-8601 timestamp from `SOURCE_DATE_EPOCH` if set, else the clock.
pub fn report_timestamp() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0));
    fixed.unwrap_or_else(Utc::now).to_rfc3339_opts(SecondsFormat::Secs, true)
}

impl CheckReport {
    pub fn new(command: impl Into<String>, seed: Option<u64>) -> Self {
        CheckReport {
            command: command.into(),
            version: TOOL_VERSION.into(),
            timestamp: report_timestamp(),
            seed,
            parameters: BTreeMap::new(),
            verdict: Verdict::Pass,
            checks: Vec::new(),
            data: None,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.parameters.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
        self.verdict = self.aggregate();
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = Check>) {
        for c in checks {
            self.push(c);
        }
    }

    /// PASS iff no check failed.
    pub fn aggregate(&self) -> Verdict {
        if self.checks.iter().any(|c| c.verdict == Verdict::Fail) {
            Verdict::Fail
        } else {
            Verdict::Pass
        }
    }

    pub fn passed(&self) -> bool {
        self.aggregate() == Verdict::Pass
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.verdict == Verdict::Fail)
    }

    pub fn count(&self, v: Verdict) -> usize {
        self.checks.iter().filter(|c| c.verdict == v).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    /// One line per check followed by the aggregate.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!("{:4} {}: {} {} {}", c.verdict, c.name, c.lhs, c.relation, c.rhs));
            if let Some(n) = &c.note {
                out.push_str(&format!(" ({n})"));
            }
            out.push('\n');
        }
        out.push_str(&format!(
            "{}: {} pass, {} fail, {} info\n",
            self.aggregate(),
            self.count(Verdict::Pass),
            self.count(Verdict::Fail),
            self.count(Verdict::Info)
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn aggregate_follows_failures() {
        let mut r = CheckReport::new("demo", Some(3));
        r.push(Check::close("a", 1.0, 1.0 + 1e-12, 1e-10, Method::ClosedForm));
        r.push(Check::info("b", 2.0, 0.0, Method::Fit));
        assert_eq!(r.verdict, Verdict::Pass);
        r.push(Check::less("c", 2.0, 1.0, Method::Exact));
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.failures().count(), 1);
    }

    #[test]
    fn exact_check_serialises_fractions() {
        let c = Check::exact("third", &ExactCheck::new("x", rat(1, 3), Relation::Less, rat(1, 2)));
        assert_eq!(c.verdict, Verdict::Pass);
        assert_eq!(c.lhs_exact.as_deref(), Some("1/3"));
        assert!(c.lhs.starts_with("0.3333"));
    }

    #[test]
    fn json_round_trip() {
        let mut r = CheckReport::new("demo", None);
        r.param("n", 25).param("lambda", 0.02);
        r.push(Check::within("slope", 3.01, 3.0, 0.2, Method::Fit).with_note("mu sweep"));
        let back = CheckReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
