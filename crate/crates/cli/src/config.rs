//! JSON problem configuration.
//!
//! ```json
//! {
//!   "a": 0, "b": 9,
//!   "alpha1": 1.5, "alpha2": 1.5,
//!   "f1": "0.01*exp(-t)*(1 + atan(u1) + atan(u2))",
//!   "f2": "0.02*(exp(-t) + sin(u1) + sin(u2))",
//!   "lipschitz": { "L1": 0.01, "L2": 0.01, "L3": 0.02, "L4": 0.02, "M1": 0.0036787944117144234 },
//!   "solver": { "tol": 1e-12, "max_iter": 10000 },
//!   "reference": { "spectral_radius": 0.0223 }
//! }
//! ```
//!
//! `lipschitz`, `solver` and `reference` are optional, as are `M1`/`M2`
//! (computed as `max |f_i(t, 0, 0)|` when absent). Unknown keys are errors.

use std::fs;
use std::path::{Path, PathBuf};

use nabla_bvp::certify::{CertifyError, LipschitzData};
use nabla_bvp::expr::{parse, Expr, ParseError};
use nabla_bvp::system::{CoupledProblem, SystemError};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Json {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}:{line}:{column}: in {field}: {source}")]
    Expr {
        path: PathBuf,
        field: &'static str,
        line: usize,
        column: usize,
        #[source]
        source: ParseError,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub a: i64,
    pub b: i64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub f1: String,
    pub f2: String,
    #[serde(default)]
    pub lipschitz: Option<LipschitzConfig>,
    #[serde(default)]
    pub solver: Option<SolverSection>,
    #[serde(default)]
    pub reference: Option<ReferenceSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzConfig {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "L3")]
    pub l3: f64,
    #[serde(rename = "L4")]
    pub l4: f64,
    #[serde(rename = "M1", default)]
    pub m1: Option<f64>,
    #[serde(rename = "M2", default)]
    pub m2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

/// Externally quoted values to be recorded next to computed ones.
#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    pub spectral_radius: Option<f64>,
}

/// A validated configuration with parsed expressions and a built problem.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub path: PathBuf,
    pub config: ProblemConfig,
    pub f1: Expr,
    pub f2: Expr,
    pub problem: CoupledProblem,
}

impl LoadedProblem {
    pub fn lipschitz_constants(&self) -> Option<[f64; 4]> {
        self.config.lipschitz.map(|l| [l.l1, l.l2, l.l3, l.l4])
    }

    /// Lipschitz data with any missing `M` filled from the problem.
    pub fn lipschitz(&self) -> Result<Option<LipschitzData>, ConfigError> {
        let Some(l) = self.config.lipschitz else {
            return Ok(None);
        };
        let invalid = |message: String| ConfigError::Invalid {
            path: self.path.clone(),
            message,
        };
        let (m1, m2) = match (l.m1, l.m2) {
            (Some(m1), Some(m2)) => (m1, m2),
            (m1, m2) => {
                let (c1, c2) = nabla_bvp::certify::forcing_bounds(&self.problem)
                    .map_err(|e| invalid(format!("computing M1/M2: {e}")))?;
                (m1.unwrap_or(c1), m2.unwrap_or(c2))
            }
        };
        LipschitzData::new([l.l1, l.l2, l.l3, l.l4], m1, m2)
            .map(Some)
            .map_err(|e: CertifyError| invalid(format!("lipschitz: {e}")))
    }

    pub fn tol(&self) -> f64 {
        self.config.solver.and_then(|s| s.tol).unwrap_or(1e-12)
    }

    pub fn max_iter(&self) -> usize {
        self.config
            .solver
            .and_then(|s| s.max_iter)
            .unwrap_or(10_000)
    }
}

pub fn load(path: &Path) -> Result<LoadedProblem, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_str(&text, path)
}

pub fn from_str(text: &str, path: &Path) -> Result<LoadedProblem, ConfigError> {
    let path = path.to_path_buf();
    let config: ProblemConfig = serde_json::from_str(text).map_err(|e| ConfigError::Json {
        path: path.clone(),
        line: e.line(),
        column: e.column(),
        message: strip_position(&e.to_string()),
    })?;
    let invalid = |message: String| ConfigError::Invalid {
        path: path.clone(),
        message,
    };
    if config.b - config.a < 2 {
        return Err(invalid(format!(
            "b - a must be at least 2 (a = {}, b = {})",
            config.a, config.b
        )));
    }
    for (name, alpha) in [("alpha1", config.alpha1), ("alpha2", config.alpha2)] {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(invalid(format!(
                "{name} = {alpha} must lie in the open interval (1, 2)"
            )));
        }
    }
    if let Some(s) = config.solver {
        if let Some(tol) = s.tol {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(invalid(format!("solver.tol = {tol} must be positive")));
            }
        }
        if s.max_iter == Some(0) {
            return Err(invalid("solver.max_iter must be positive".into()));
        }
    }
    if let Some(l) = config.lipschitz {
        let values = [
            ("L1", Some(l.l1)),
            ("L2", Some(l.l2)),
            ("L3", Some(l.l3)),
            ("L4", Some(l.l4)),
            ("M1", l.m1),
            ("M2", l.m2),
        ];
        for (name, v) in values {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(invalid(format!(
                        "lipschitz.{name} = {v} must be finite and nonnegative"
                    )));
                }
            }
        }
    }
    let expr = |field: &'static str, src: &str| {
        parse(src).map_err(|source| {
            let (line, column) = locate(text, field, source.offset());
            ConfigError::Expr {
                path: path.clone(),
                field,
                line,
                column,
                source,
            }
        })
    };
    let f1 = expr("f1", &config.f1)?;
    let f2 = expr("f2", &config.f2)?;
    let problem = CoupledProblem::new(
        config.a,
        config.b,
        config.alpha1,
        config.alpha2,
        f1.clone(),
        f2.clone(),
    )
    .map_err(|e: SystemError| invalid(e.to_string()))?;
    Ok(LoadedProblem {
        path,
        config,
        f1,
        f2,
        problem,
    })
}

fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message.to_string(),
    }
}

/// 1-based line and column of byte `offset` inside the string value of
/// `key`. Falls back to the key itself when the value contains escapes.
fn locate(text: &str, key: &str, offset: usize) -> (usize, usize) {
    let needle = format!("\"{key}\"");
    let Some(k) = text.find(&needle) else {
        return (1, 1);
    };
    let after = k + needle.len();
    let value_start = text[after..]
        .find('"')
        .map(|q| after + q + 1)
        .unwrap_or(after);
    let raw_end = text[value_start..].find('"').map(|e| value_start + e);
    let target = match raw_end {
        Some(end) if !text[value_start..end].contains('\\') => (value_start + offset).min(end),
        _ => k,
    };
    let before = &text[..target];
    let line = before.matches('\n').count() + 1;
    let column = before
        .rfind('\n')
        .map_or(before.chars().count(), |n| before[n + 1..].chars().count())
        + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{
  "a": 0, "b": 9, "alpha1": 1.5, "alpha2": 1.5,
  "f1": "0.01*exp(-t)*(1 + atan(u1) + atan(u2))",
  "f2": "0.02*(exp(-t) + sin(u1) + sin(u2))",
  "lipschitz": {"L1": 0.01, "L2": 0.01, "L3": 0.02, "L4": 0.02}
}"#;

    fn load_str(text: &str) -> Result<LoadedProblem, ConfigError> {
        from_str(text, Path::new("p.json"))
    }

    #[test]
    fn accepts_and_computes_bounds() {
        let p = load_str(GOOD).unwrap();
        let lip = p.lipschitz().unwrap().unwrap();
        assert!((lip.m1 - 0.01 / std::f64::consts::E).abs() < 1e-17);
        assert_eq!(p.tol(), 1e-12);
        assert_eq!(p.max_iter(), 10_000);
    }

    #[test]
    fn json_errors_carry_position() {
        let err = load_str("{\n  \"a\": 0,\n  \"b\": ,\n}").unwrap_err();
        match err {
            ConfigError::Json { line, column, .. } => assert_eq!((line, column), (3, 8)),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = GOOD.replace("\"a\": 0", "\"a\": 0, \"gamma\": 1");
        let msg = load_str(&text).unwrap_err().to_string();
        assert!(msg.contains("unknown field `gamma`"), "{msg}");
    }

    #[test]
    fn alpha_range_message() {
        let text = GOOD.replace("\"alpha1\": 1.5", "\"alpha1\": 2.5");
        let msg = load_str(&text).unwrap_err().to_string();
        assert!(
            msg.contains("alpha1 = 2.5 must lie in the open interval (1, 2)"),
            "{msg}"
        );
    }

    #[test]
    fn short_grid_rejected() {
        let text = GOOD.replace("\"b\": 9", "\"b\": 1");
        assert!(load_str(&text)
            .unwrap_err()
            .to_string()
            .contains("at least 2"));
    }

    #[test]
    fn expression_error_points_into_the_file() {
        let text = GOOD.replace("atan(u2))\"", "atan(w))\"");
        match load_str(&text).unwrap_err() {
            ConfigError::Expr {
                field,
                line,
                column,
                ..
            } => {
                assert_eq!((field, line), ("f1", 3));
                // `w` sits 34 bytes into the expression, which starts at column 10
                assert_eq!(column, 10 + 34);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn negative_constant_rejected() {
        let text = GOOD.replace("\"L3\": 0.02", "\"L3\": -0.02");
        assert!(load_str(&text)
            .unwrap_err()
            .to_string()
            .contains("lipschitz.L3"));
    }
}
