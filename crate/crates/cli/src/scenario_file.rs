//! TOML scenario files.
//!
//! ```toml
//! K = 2
//!
//! [population]
//! p_plus = [0.3, 0.2]
//! p_minus = [0.2, 0.3]
//!
//! [base_classifier]
//! C_plus = [[0.8, 0.2], [0.3, 0.7]]
//! C_minus = [[0.8, 0.2], [0.3, 0.7]]
//! # phi_plus / phi_minus are optional
//!
//! [memorization]          # optional for solve and bounds
//! p_D = 0.2
//! q = [0.5, 0.5]
//! q_plus = [0.4, 0.1]
//! ```

use std::fs;
use std::path::Path;

use memfair_core::{BaseClassifier, LabelGroupJoint, MemorizedComposition, Scenario, SquareMatrix};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(rename = "K")]
    pub k: usize,
    pub population: Population,
    pub base_classifier: BaseSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memorization: Option<Memorization>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Population {
    pub p_plus: Vec<f64>,
    pub p_minus: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSection {
    #[serde(rename = "C_plus")]
    pub c_plus: Vec<Vec<f64>>,
    #[serde(rename = "C_minus")]
    pub c_minus: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_plus: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_minus: Option<Vec<f64>>,
}

/// Also the shape in which solver witnesses are reported, so a witness can be
/// pasted back into a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Memorization {
    #[serde(rename = "p_D")]
    pub p_d: f64,
    pub q: Vec<f64>,
    pub q_plus: Vec<f64>,
}

impl From<&MemorizedComposition> for Memorization {
    fn from(m: &MemorizedComposition) -> Self {
        Self {
            p_d: m.mass(),
            q: m.labels().to_vec(),
            q_plus: m.plus().to_vec(),
        }
    }
}

impl Memorization {
    /// The block as it would appear in a scenario file.
    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct Wrap<'a> {
            memorization: &'a Memorization,
        }
        toml::to_string(&Wrap { memorization: self }).expect("plain numeric table")
    }
}

fn shape(what: &str, expected: usize, found: usize) -> CliError {
    CliError::Parse(format!("{what}: expected length {expected} (K), found {found}"))
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: Self = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        file.check_shapes()?;
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        Ok((Self::parse(text)?, bytes))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain numeric tables")
    }

    fn check_shapes(&self) -> Result<(), CliError> {
        let k = self.k;
        let vectors = [
            ("population.p_plus", Some(&self.population.p_plus)),
            ("population.p_minus", Some(&self.population.p_minus)),
            ("base_classifier.phi_plus", self.base_classifier.phi_plus.as_ref()),
            ("base_classifier.phi_minus", self.base_classifier.phi_minus.as_ref()),
            ("memorization.q", self.memorization.as_ref().map(|m| &m.q)),
            ("memorization.q_plus", self.memorization.as_ref().map(|m| &m.q_plus)),
        ];
        for (what, v) in vectors {
            if let Some(v) = v {
                if v.len() != k {
                    return Err(shape(what, k, v.len()));
                }
            }
        }
        for (what, m) in [
            ("base_classifier.C_plus", &self.base_classifier.c_plus),
            ("base_classifier.C_minus", &self.base_classifier.c_minus),
        ] {
            if m.len() != k {
                return Err(shape(what, k, m.len()));
            }
            if let Some(row) = m.iter().find(|r| r.len() != k) {
                return Err(shape(&format!("{what} row"), k, row.len()));
            }
        }
        if self.base_classifier.phi_plus.is_some() != self.base_classifier.phi_minus.is_some() {
            return Err(CliError::Parse(
                "base_classifier: phi_plus and phi_minus must be given together".into(),
            ));
        }
        Ok(())
    }

    pub fn joint(&self, normalize: bool) -> Result<LabelGroupJoint, CliError> {
        let j = LabelGroupJoint::new(self.population.p_plus.clone(), self.population.p_minus.clone())?;
        Ok(if normalize { j.normalized() } else { j })
    }

    pub fn base(&self, normalize: bool) -> Result<BaseClassifier, CliError> {
        let b = &self.base_classifier;
        let mut base = BaseClassifier::new(SquareMatrix::from_rows(&b.c_plus)?, SquareMatrix::from_rows(&b.c_minus)?)?;
        if let (Some(plus), Some(minus)) = (&b.phi_plus, &b.phi_minus) {
            base = base.with_rates(plus.clone(), minus.clone())?;
        }
        Ok(if normalize { base.normalized() } else { base })
    }

    pub fn memo(&self, normalize: bool) -> Result<Option<MemorizedComposition>, CliError> {
        self.memorization
            .as_ref()
            .map(|m| {
                let memo = MemorizedComposition::new(m.p_d, m.q.clone(), m.q_plus.clone())?;
                Ok(if normalize { memo.normalized() } else { memo })
            })
            .transpose()
    }

    pub fn scenario(&self, normalize: bool) -> Result<Scenario, CliError> {
        let memo = self
            .memo(normalize)?
            .ok_or_else(|| CliError::Parse("this command needs a [memorization] section".into()))?;
        Ok(Scenario::new(self.joint(normalize)?, memo, self.base(normalize)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const WORKED: &str = r#"
K = 2

[population]
p_plus = [0.3, 0.2]
p_minus = [0.2, 0.3]

[base_classifier]
C_plus = [[0.8, 0.2], [0.3, 0.7]]
C_minus = [[0.8, 0.2], [0.3, 0.7]]

[memorization]
p_D = 0.2
q = [0.5, 0.5]
q_plus = [0.4, 0.1]
"#;

    #[test]
    fn parses_worked_file() {
        let f = ScenarioFile::parse(WORKED).unwrap();
        assert_eq!(f.k, 2);
        assert_eq!(f.memorization.as_ref().unwrap().q_plus, vec![0.4, 0.1]);
        let s = f.scenario(false).unwrap();
        assert_eq!(s.memo().mass(), 0.2);
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = WORKED.replace("[memorization]", "[memorization]\nextra = 1");
        assert!(matches!(ScenarioFile::parse(&text), Err(CliError::Parse(_))));
        let text = format!("L = 3\n{WORKED}");
        assert!(ScenarioFile::parse(&text).is_err());
    }

    #[test]
    fn rejects_wrong_lengths() {
        let text = WORKED.replace("q = [0.5, 0.5]", "q = [0.5, 0.25, 0.25]");
        let err = ScenarioFile::parse(&text).unwrap_err();
        assert!(err.to_string().contains("memorization.q"));
        let text = WORKED.replace("[0.3, 0.7]]\nC_minus", "[0.3]]\nC_minus");
        assert!(ScenarioFile::parse(&text).is_err());
    }

    #[test]
    fn memorization_is_optional() {
        let text = WORKED.split("[memorization]").next().unwrap();
        let f = ScenarioFile::parse(text).unwrap();
        assert!(f.memorization.is_none());
        assert!(f.scenario(false).is_err());
        assert!(f.joint(false).is_ok());
    }

    #[test]
    fn rates_come_in_pairs() {
        let text = WORKED.replace("[memorization]", "phi_plus = [0.5, 0.5]\n\n[memorization]");
        assert!(ScenarioFile::parse(&text).is_err());
    }

    #[test]
    fn memorization_block_parses_back() {
        let m = Memorization {
            p_d: 0.76,
            q: vec![0.43 / 0.76, 0.33 / 0.76],
            q_plus: vec![0.27 / 0.76, 0.12 / 0.76],
        };
        let text = WORKED.split("[memorization]").next().unwrap().to_string() + &m.to_toml();
        assert_eq!(ScenarioFile::parse(&text).unwrap().memorization, Some(m));
    }

    fn vector(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3f64..1e3, k)
    }

    fn file() -> impl Strategy<Value = ScenarioFile> {
        (2usize..5).prop_flat_map(|k| {
            (
                vector(k),
                vector(k),
                prop::collection::vec(vector(k), k),
                prop::collection::vec(vector(k), k),
                prop::option::of((vector(k), vector(k))),
                prop::option::of((0.0f64..1.0, vector(k), vector(k))),
            )
                .prop_map(move |(pp, pm, cp, cm, phi, memo)| ScenarioFile {
                    k,
                    population: Population { p_plus: pp, p_minus: pm },
                    base_classifier: BaseSection {
                        c_plus: cp,
                        c_minus: cm,
                        phi_plus: phi.as_ref().map(|p| p.0.clone()),
                        phi_minus: phi.map(|p| p.1),
                    },
                    memorization: memo.map(|(p_d, q, q_plus)| Memorization { p_d, q, q_plus }),
                })
        })
    }

    proptest! {
        #[test]
        fn round_trips(f in file()) {
            prop_assert_eq!(ScenarioFile::parse(&f.to_toml()).unwrap(), f);
        }
    }
}
