use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::hyperopt::SearchSpace;

/// Architecture and optimizer settings searched by the tuner.
///
/// `lstm[0..3]` size the three stacked bidirectional layers of the arg1
/// encoder and `lstm[3..6]` those of the arg2 encoder; both directions of a
/// layer share its size.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams {
    pub lstm: [usize; 6],
    pub dense1: usize,
    pub dense2: usize,
    pub dropout1: f64,
    pub dropout2: f64,
    pub learning_rate: f64,
}

impl Default for Hyperparams {
    /// Best non-explicit configuration found by a 20-trial search.
    fn default() -> Self {
        Hyperparams {
            lstm: [259, 75, 263, 127, 89, 150],
            dense1: 269,
            dense2: 69,
            dropout1: 0.11,
            dropout2: 0.57,
            learning_rate: 0.1549,
        }
    }
}

impl Hyperparams {
    /// Values in search-space dimension order.
    pub fn to_named(&self) -> Vec<(String, f64)> {
        let mut v: Vec<(String, f64)> = self
            .lstm
            .iter()
            .enumerate()
            .map(|(i, &s)| (format!("lstm{}", i + 1), s as f64))
            .collect();
        v.push(("dense1".into(), self.dense1 as f64));
        v.push(("dense2".into(), self.dense2 as f64));
        v.push(("dropout1".into(), self.dropout1));
        v.push(("dropout2".into(), self.dropout2));
        v.push(("learning_rate".into(), self.learning_rate));
        v
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "lstm1" | "lstm2" | "lstm3" | "lstm4" | "lstm5" | "lstm6" => {
                let i: usize = name[4..].parse().expect("digit");
                self.lstm[i - 1] = value as usize;
            }
            "dense1" => self.dense1 = value as usize,
            "dense2" => self.dense2 = value as usize,
            "dropout1" => self.dropout1 = value,
            "dropout2" => self.dropout2 = value,
            "learning_rate" | "lr" => self.learning_rate = value,
            _ => return Err(Error::Config(format!("unknown hyperparameter {name:?}"))),
        }
        Ok(())
    }

    /// Start from the defaults and apply every named value, checking bounds.
    pub fn from_named<'a, I>(values: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let space = SearchSpace::classifier();
        let mut h = Hyperparams::default();
        for (name, v) in values {
            let canonical = if name == "lr" { "learning_rate" } else { name };
            space.check(canonical, v)?;
            h.set(canonical, v)?;
        }
        Ok(h)
    }

    /// Parse from string-valued config entries; keys not naming a
    /// hyperparameter are returned untouched.
    pub fn from_config(entries: &BTreeMap<String, String>) -> Result<(Self, BTreeMap<String, String>)> {
        let space = SearchSpace::classifier();
        let mut values = Vec::new();
        let mut rest = BTreeMap::new();
        for (k, v) in entries {
            if space.dim(k).is_some() || k == "lr" {
                let x: f64 = v
                    .parse()
                    .map_err(|_| Error::Config(format!("hyperparameter {k}: not a number: {v:?}")))?;
                values.push((k.as_str(), x));
            } else {
                rest.insert(k.clone(), v.clone());
            }
        }
        Ok((Hyperparams::from_named(values)?, rest))
    }

    pub fn validate(&self) -> Result<()> {
        let space = SearchSpace::classifier();
        for (name, v) in self.to_named() {
            space.check(&name, v)?;
        }
        Ok(())
    }

    pub fn arg1_hidden(&self) -> [usize; 3] {
        [self.lstm[0], self.lstm[1], self.lstm[2]]
    }

    pub fn arg2_hidden(&self) -> [usize; 3] {
        [self.lstm[3], self.lstm[4], self.lstm[5]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_in_bounds() {
        let h = Hyperparams::from_named([
            ("lstm1", 259.0),
            ("lstm2", 75.0),
            ("lstm3", 263.0),
            ("lstm4", 127.0),
            ("lstm5", 89.0),
            ("lstm6", 150.0),
            ("dense1", 269.0),
            ("dense2", 69.0),
            ("dropout1", 0.11),
            ("dropout2", 0.57),
            ("learning_rate", 0.1549),
        ])
        .unwrap();
        assert_eq!(h, Hyperparams::default());
        h.validate().unwrap();
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(Hyperparams::from_named([("lstm2", 200.0)]).is_err());
        assert!(Hyperparams::from_named([("dropout1", 0.95)]).is_err());
        assert!(Hyperparams::from_named([("bogus", 1.0)]).is_err());
    }

    #[test]
    fn config_split() {
        let mut m = BTreeMap::new();
        m.insert("lstm1".to_string(), "100".to_string());
        m.insert("seed".to_string(), "3".to_string());
        let (h, rest) = Hyperparams::from_config(&m).unwrap();
        assert_eq!(h.lstm[0], 100);
        assert_eq!(rest["seed"], "3");
    }
}
