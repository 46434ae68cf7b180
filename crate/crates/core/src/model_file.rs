//! Text model files.
//!
//! ```toml
//! ambient_dim = 1
//! s_primes = [2]
//!
//! [[components]]
//! form = [[1, [1, 0]]]          # x0: list of [coefficient, [e0, ..., en]]
//! weight = "1/2"                # exact: "p/q" or an integer, never a decimal
//!
//! [[components]]
//! form = [[1, [1, 0]], [-2, [0, 1]]]   # x0 - 2*x1
//! weight = "1"
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{parse_weight, DivisorComponent, Form, OrbifoldModel};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    ambient_dim: usize,
    #[serde(default)]
    s_primes: Vec<u64>,
    #[serde(default)]
    components: Vec<RawComponent>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    form: Vec<(i64, Vec<u32>)>,
    weight: String,
}

/// Parse and validate a model file.
pub fn parse_model(text: &str) -> Result<OrbifoldModel> {
    let raw: RawModel = toml::from_str(text).map_err(Error::parse)?;
    let components = raw
        .components
        .into_iter()
        .map(|c| Ok(DivisorComponent::new(Form::new(c.form)?, parse_weight(&c.weight)?)))
        .collect::<Result<Vec<_>>>()?;
    OrbifoldModel::validated(
        raw.ambient_dim,
        components,
        raw.s_primes.into_iter().map(u128::from),
    )
}

pub fn load_model(path: impl AsRef<Path>) -> Result<OrbifoldModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_model(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Render a model back into the file format.
pub fn to_model_text(m: &OrbifoldModel) -> String {
    let mut out = format!("ambient_dim = {}\n", m.ambient_dim());
    let s: Vec<String> = m.s_primes().iter().map(|p| p.to_string()).collect();
    out.push_str(&format!("s_primes = [{}]\n", s.join(", ")));
    for c in m.components() {
        let terms: Vec<String> = c
            .form()
            .terms()
            .iter()
            .map(|t| {
                let e: Vec<String> = t.exponents.iter().map(|e| e.to_string()).collect();
                format!("[{}, [{}]]", t.coeff, e.join(", "))
            })
            .collect();
        out.push_str(&format!(
            "\n[[components]]\nform = [{}]\nweight = \"{}\"\n",
            terms.join(", "),
            c.weight()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const HALVES: &str = r#"
ambient_dim = 1
s_primes = []

[[components]]
form = [[1, [1, 0]]]
weight = "1/2"

[[components]]
form = [[1, [0, 1]]]
weight = "1/2"
"#;

    #[test]
    fn parses_and_round_trips() {
        let m = parse_model(HALVES).unwrap();
        assert_eq!(m.ambient_dim(), 1);
        assert_eq!(m.components().len(), 2);
        assert_eq!(m.components()[1].weight().to_string(), "1/2");
        assert_eq!(parse_model(&to_model_text(&m)).unwrap(), m);
    }

    #[test]
    fn rejects_decimal_weights() {
        let text = HALVES.replace("\"1/2\"", "\"0.5\"");
        assert!(matches!(parse_model(&text), Err(Error::Parse(_))));
        let text = HALVES.replacen("\"1/2\"", "0.5", 1);
        assert!(matches!(parse_model(&text), Err(Error::Parse(_))));
    }

    #[test]
    fn invalid_models_report_violations() {
        let text = HALVES.replace("[[1, [0, 1]]]", "[[2, [1, 0]]]");
        match parse_model(&text) {
            Err(Error::InvalidModel(r)) => assert_eq!(r.violations.len(), 2),
            other => panic!("expected invalid model, got {other:?}"),
        }
        assert!(matches!(
            parse_model("ambient_dim = 1\nbogus = 3\n"),
            Err(Error::Parse(_))
        ));
    }
}
