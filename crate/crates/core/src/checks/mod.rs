//! Named verification suites at pinned sizes and seeds.
//!
//! Every suite returns one [`Verdict`] per criterion. A criterion whose
//! computation fails becomes a failing verdict with a NaN value, so a suite
//! never errors once its name is recognised.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{QfdError, Result};

mod coupled;
mod single;

pub const SUITES: [&str; 8] = [
    "conservation",
    "analytic",
    "scale_gauge",
    "equivariance",
    "manybody",
    "reduced",
    "qfdft",
    "vortex",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Above,
}

impl Relation {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::AtMost => value <= threshold,
            Relation::AtLeast => value >= threshold,
            Relation::Above => value > threshold,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Above => ">",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub suite: String,
    pub criterion: String,
    pub value: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub pass: bool,
    /// Set when the measurement itself failed.
    pub error: Option<String>,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}/{}: {:e} {} {:e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.suite,
            self.criterion,
            self.value,
            self.relation.as_str(),
            self.threshold
        )?;
        if let Some(e) = &self.error {
            write!(f, " ({e})")?;
        }
        Ok(())
    }
}

/// Collects the verdicts of one suite.
pub(crate) struct Sheet {
    suite: &'static str,
    rows: Vec<Verdict>,
}

impl Sheet {
    fn new(suite: &'static str) -> Self {
        Self { suite, rows: Vec::new() }
    }

    fn push(&mut self, criterion: &str, relation: Relation, threshold: f64, value: std::result::Result<f64, String>) {
        let (value, error) = match value {
            Ok(v) => (v, None),
            Err(e) => (f64::NAN, Some(e)),
        };
        self.rows.push(Verdict {
            suite: self.suite.to_string(),
            criterion: criterion.to_string(),
            value,
            threshold,
            relation,
            pass: error.is_none() && relation.holds(value, threshold),
            error,
        });
    }

    fn at_most(&mut self, criterion: &str, threshold: f64, value: Result<f64>) {
        self.push(criterion, Relation::AtMost, threshold, value.map_err(|e| e.to_string()));
    }

    fn at_least(&mut self, criterion: &str, threshold: f64, value: Result<f64>) {
        self.push(criterion, Relation::AtLeast, threshold, value.map_err(|e| e.to_string()));
    }

    /// Several criteria measured by one computation.
    fn group<const N: usize>(&mut self, specs: [(&str, Relation, f64); N], values: Result<[f64; N]>) {
        match values {
            Ok(v) => {
                for ((c, r, t), x) in specs.into_iter().zip(v) {
                    self.push(c, r, t, Ok(x));
                }
            }
            Err(e) => {
                let msg = e.to_string();
                for (c, r, t) in specs {
                    self.push(c, r, t, Err(msg.clone()));
                }
            }
        }
    }

    fn finish(self) -> Vec<Verdict> {
        self.rows
    }
}

/// Runs one named suite, or every suite for `all`.
pub fn run(name: &str) -> Result<Vec<Verdict>> {
    if name == "all" {
        return Ok(SUITES.iter().flat_map(|s| run_known(s)).collect());
    }
    if !SUITES.contains(&name) {
        return Err(QfdError::param(
            "suite",
            format!("unknown suite `{name}` (expected one of {}, all)", SUITES.join(", ")),
        ));
    }
    Ok(run_known(name))
}

fn run_known(name: &str) -> Vec<Verdict> {
    match name {
        "conservation" => single::conservation(),
        "analytic" => single::analytic(),
        "scale_gauge" => single::scale_gauge(),
        "equivariance" => single::equivariance(),
        "vortex" => single::vortex(),
        "manybody" => coupled::manybody(),
        "reduced" => coupled::reduced(),
        "qfdft" => coupled::qfdft(),
        _ => unreachable!("suite names are checked by the caller"),
    }
}

pub fn all_pass(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(|v| v.pass)
}

/// `suite,criterion,value,threshold,relation,pass`, values in shortest
/// round-trip exponent form.
pub fn write_verdicts_csv(verdicts: &[Verdict], mut w: impl Write) -> Result<()> {
    writeln!(w, "suite,criterion,value,threshold,relation,pass")?;
    for v in verdicts {
        writeln!(
            w,
            "{},{},{:e},{:e},{},{}",
            v.suite,
            v.criterion,
            v.value,
            v.threshold,
            v.relation.as_str(),
            v.pass
        )?;
    }
    Ok(())
}

fn max_abs_diff_real(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
