use std::collections::BTreeMap;

use serde_json::{Number, Value};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DimKind {
    Integer,
    Real,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dim {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: DimKind,
}

/// A box-constrained search space. Configurations are handled internally in
/// the unit hypercube.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpace {
    dims: Vec<Dim>,
}

impl SearchSpace {
    pub fn new(dims: Vec<Dim>) -> Result<Self> {
        for (i, d) in dims.iter().enumerate() {
            if !(d.lower < d.upper) || !d.lower.is_finite() || !d.upper.is_finite() {
                return Err(Error::Config(format!("dimension {} needs lower < upper", d.name)));
            }
            if dims[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::Config(format!("duplicate dimension {}", d.name)));
            }
        }
        Ok(SearchSpace { dims })
    }

    /// The classifier's hyperparameter ranges: six LSTM sizes, two dense
    /// sizes, two dropout rates and the SGD learning rate.
    pub fn classifier() -> Self {
        let int = |name: &str, lower: f64, upper: f64| Dim {
            name: name.into(),
            lower,
            upper,
            kind: DimKind::Integer,
        };
        let real = |name: &str, lower: f64, upper: f64| Dim {
            name: name.into(),
            lower,
            upper,
            kind: DimKind::Real,
        };
        SearchSpace::new(vec![
            int("lstm1", 64.0, 320.0),
            int("lstm2", 64.0, 100.0),
            int("lstm3", 64.0, 320.0),
            int("lstm4", 64.0, 320.0),
            int("lstm5", 64.0, 100.0),
            int("lstm6", 64.0, 320.0),
            int("dense1", 64.0, 320.0),
            int("dense2", 64.0, 100.0),
            real("dropout1", 0.0, 0.9),
            real("dropout2", 0.0, 0.9),
            real("learning_rate", 0.001, 0.5),
        ])
        .expect("static space is valid")
    }

    pub fn dims(&self) -> &[Dim] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn dim(&self, name: &str) -> Option<&Dim> {
        self.dims.iter().find(|d| d.name == name)
    }

    /// Unit-cube point → named values. Integer dimensions round half-up.
    pub fn decode(&self, unit: &[f64]) -> Vec<(String, f64)> {
        self.dims
            .iter()
            .zip(unit)
            .map(|(d, &u)| {
                let u = u.clamp(0.0, 1.0);
                let raw = d.lower + u * (d.upper - d.lower);
                let v = match d.kind {
                    DimKind::Integer => (raw + 0.5).floor().clamp(d.lower, d.upper),
                    DimKind::Real => raw.clamp(d.lower, d.upper),
                };
                (d.name.clone(), v)
            })
            .collect()
    }

    /// Named values (in dimension order) → unit cube.
    pub fn encode(&self, values: &[f64]) -> Vec<f64> {
        self.dims
            .iter()
            .zip(values)
            .map(|(d, &v)| ((v - d.lower) / (d.upper - d.lower)).clamp(0.0, 1.0))
            .collect()
    }

    pub fn check(&self, name: &str, value: f64) -> Result<()> {
        let d = self
            .dim(name)
            .ok_or_else(|| Error::Config(format!("unknown hyperparameter {name:?}")))?;
        if !(value >= d.lower && value <= d.upper) {
            return Err(Error::OutOfBounds {
                name: name.into(),
                value,
                lower: d.lower,
                upper: d.upper,
            });
        }
        if d.kind == DimKind::Integer && value.fract() != 0.0 {
            return Err(Error::Config(format!(
                "hyperparameter {name} must be an integer, got {value}"
            )));
        }
        Ok(())
    }

    /// JSON object of named values, integers written without a fraction.
    pub fn values_to_json(&self, values: &[(String, f64)]) -> Value {
        let mut map = serde_json::Map::new();
        for (name, v) in values {
            let is_int = self.dim(name).map(|d| d.kind == DimKind::Integer).unwrap_or(false);
            let num = if is_int {
                Number::from(*v as i64)
            } else {
                Number::from_f64(*v).unwrap_or_else(|| Number::from(0))
            };
            map.insert(name.clone(), Value::Number(num));
        }
        Value::Object(map)
    }
}

/// Parse a flat named-value config: either a JSON object of scalars or
/// `key = value` lines (blank lines and `#` comments ignored).
pub fn parse_named_values(text: &str) -> Result<BTreeMap<String, String>> {
    let trimmed = text.trim_start();
    let mut out = BTreeMap::new();
    if trimmed.starts_with('{') {
        let v: Value = serde_json::from_str(trimmed)?;
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Config("config JSON must be an object".into()))?;
        for (k, v) in obj {
            let s = match v {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                Value::Bool(b) => b.to_string(),
                other => return Err(Error::Config(format!("config key {k}: unsupported value {other}"))),
            };
            out.insert(k.clone(), s);
        }
        return Ok(out);
    }
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Render named values as `key = value` lines.
pub fn format_named_values(space: &SearchSpace, values: &[(String, f64)]) -> String {
    let mut s = String::new();
    for (name, v) in values {
        let is_int = space.dim(name).map(|d| d.kind == DimKind::Integer).unwrap_or(false);
        if is_int {
            s.push_str(&format!("{name} = {}\n", *v as i64));
        } else {
            s.push_str(&format!("{name} = {v}\n"));
        }
    }
    s
}
