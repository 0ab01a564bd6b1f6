//! JSON problem files.
//!
//! A remote problem carries `k`, `l`, `sigma_x`, `a`, `noise_vars` and
//! `gamma`; a multiterminal problem carries `sigma_y`, `split_sigma_n`,
//! `gamma` and optionally `l`. Matrices are flat row-major arrays.

use serde::{Deserialize, Serialize};

use super::{MultiterminalProblem, RemoteProblem};
use crate::symcore::{Matrix, SymMatrix};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteProblemFile {
    pub k: usize,
    pub l: usize,
    pub sigma_x: Vec<f64>,
    pub a: Vec<f64>,
    pub noise_vars: Vec<f64>,
    pub gamma: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiterminalProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    pub sigma_y: Vec<f64>,
    pub split_sigma_n: Vec<f64>,
    pub gamma: Vec<f64>,
}

#[derive(Clone, Debug)]
pub enum Problem {
    Remote(RemoteProblem),
    Multiterminal(MultiterminalProblem),
}

/// Parse or validation failure, located by line/column or by field name.
#[derive(Clone, Debug, PartialEq)]
pub struct ParseError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.line, self.column, &self.field) {
            (Some(l), Some(c), _) => write!(f, "line {l}, column {c}: {}", self.message),
            (_, _, Some(field)) => write!(f, "field `{field}`: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ParseError {}

fn syntax(e: serde_json::Error) -> ParseError {
    ParseError {
        line: Some(e.line()),
        column: Some(e.column()),
        field: None,
        message: e.to_string(),
    }
}

fn field(name: &str, message: impl Into<String>) -> ParseError {
    ParseError {
        line: None,
        column: None,
        field: Some(name.to_string()),
        message: message.into(),
    }
}

fn square(name: &str, data: &[f64], n: usize) -> Result<Matrix, ParseError> {
    if data.len() != n * n {
        return Err(field(name, format!("expected {} entries, found {}", n * n, data.len())));
    }
    Ok(Matrix::from_row_slice(n, n, data))
}

fn sym(name: &str, data: &[f64], n: usize) -> Result<SymMatrix, ParseError> {
    SymMatrix::new(square(name, data, n)?).map_err(|e| field(name, e.to_string()))
}

pub fn parse_problem(text: &str) -> Result<Problem, ParseError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(syntax)?;
    let obj = value
        .as_object()
        .ok_or_else(|| field("<root>", "expected a JSON object"))?;
    if obj.contains_key("sigma_y") {
        let f: MultiterminalProblemFile = serde_json::from_str(text).map_err(syntax)?;
        f.into_problem().map(Problem::Multiterminal)
    } else {
        let f: RemoteProblemFile = serde_json::from_str(text).map_err(syntax)?;
        f.into_problem().map(Problem::Remote)
    }
}

impl RemoteProblemFile {
    pub fn into_problem(self) -> Result<RemoteProblem, ParseError> {
        let (k, l) = (self.k, self.l);
        if k == 0 || l == 0 {
            return Err(field("k", "dimensions must be positive"));
        }
        let sigma_x = sym("sigma_x", &self.sigma_x, k)?;
        if self.a.len() != l * k {
            return Err(field("a", format!("expected {} entries, found {}", l * k, self.a.len())));
        }
        let a = Matrix::from_row_slice(l, k, &self.a);
        if self.noise_vars.len() != l {
            return Err(field("noise_vars", format!("expected {l} entries, found {}", self.noise_vars.len())));
        }
        let gamma = square("gamma", &self.gamma, k)?;
        RemoteProblem::new(sigma_x, a, self.noise_vars, gamma).map_err(|e| field("<problem>", e.to_string()))
    }

    pub fn from_problem(p: &RemoteProblem) -> Self {
        Self {
            k: p.k(),
            l: p.l(),
            sigma_x: p.sigma_x().to_row_major(),
            a: row_major(p.a()),
            noise_vars: p.noise_vars().to_vec(),
            gamma: row_major(p.gamma()),
        }
    }
}

impl MultiterminalProblemFile {
    pub fn into_problem(self) -> Result<MultiterminalProblem, ParseError> {
        let l = self.split_sigma_n.len();
        if l == 0 {
            return Err(field("split_sigma_n", "must be nonempty"));
        }
        if let Some(given) = self.l {
            if given != l {
                return Err(field("l", format!("declared {given} but split has {l} entries")));
            }
        }
        let sigma_y = sym("sigma_y", &self.sigma_y, l)?;
        let gamma = square("gamma", &self.gamma, l)?;
        MultiterminalProblem::new(sigma_y, self.split_sigma_n, gamma).map_err(|e| field("<problem>", e.to_string()))
    }

    pub fn from_problem(p: &MultiterminalProblem) -> Self {
        Self {
            l: Some(p.l()),
            sigma_y: p.sigma_y().to_row_major(),
            split_sigma_n: p.split().to_vec(),
            gamma: row_major(p.gamma()),
        }
    }
}

pub fn row_major(m: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_remote() {
        let text = r#"{"k":1,"l":2,"sigma_x":[1],"a":[1,1],"noise_vars":[1,1],"gamma":[1]}"#;
        match parse_problem(text).unwrap() {
            Problem::Remote(p) => assert_eq!((p.k(), p.l()), (1, 2)),
            _ => panic!("wrong variant"),
        }
    }

    #[test]
    fn parses_multiterminal() {
        let text = r#"{"sigma_y":[1,0.5,0.5,1],"split_sigma_n":[0.2,0.2],"gamma":[1,0,0,1]}"#;
        assert!(matches!(parse_problem(text).unwrap(), Problem::Multiterminal(_)));
    }

    #[test]
    fn syntax_errors_carry_line() {
        let err = parse_problem("{\n\"k\": 1,\n\"l\": }").unwrap_err();
        assert_eq!(err.line, Some(3));
    }

    #[test]
    fn unknown_and_bad_fields_rejected() {
        let text = r#"{"k":1,"l":1,"sigma_x":[1],"a":[1],"noise_vars":[1],"gamma":[1],"extra":0}"#;
        assert!(parse_problem(text).unwrap_err().line.is_some());
        let text = r#"{"k":1,"l":1,"sigma_x":[1],"a":[1],"noise_vars":[-1],"gamma":[1]}"#;
        assert_eq!(parse_problem(text).unwrap_err().field.as_deref(), Some("<problem>"));
        let text = r#"{"k":2,"l":1,"sigma_x":[1],"a":[1,1],"noise_vars":[1],"gamma":[1,0,0,1]}"#;
        assert_eq!(parse_problem(text).unwrap_err().field.as_deref(), Some("sigma_x"));
    }

    #[test]
    fn round_trip() {
        let text = r#"{"k":1,"l":2,"sigma_x":[1],"a":[1,0.5],"noise_vars":[1,2],"gamma":[1]}"#;
        let Problem::Remote(p) = parse_problem(text).unwrap() else { panic!() };
        let back = serde_json::to_string(&RemoteProblemFile::from_problem(&p)).unwrap();
        let Problem::Remote(q) = parse_problem(&back).unwrap() else { panic!() };
        assert_eq!(q.a(), p.a());
    }
}
