//! Machine-readable run reports.
//!
//! One JSON document per run. Every float is written with 17 significant
//! digits (`{:.16e}`), which pins the exact `f64` and keeps reports
//! byte-reproducible; non-finite values become `null`.

use std::io;

use serde::ser::Serialize;
use serde::Deserialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

use crate::scenario_file::Memorization;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: CommandEcho,
    /// SHA-256 of the scenario file bytes, hex encoded.
    pub inputs_digest: Option<String>,
    pub results: Option<Results>,
    pub diagnostics: Vec<String>,
    pub exit_status: i32,
}

/// The invocation, minus anything that does not affect the results (the
/// output path).
#[derive(Clone, Debug, PartialEq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandEcho {
    pub name: String,
    pub input: String,
    pub flags: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Results {
    Gaps {
        closed_form: Gaps,
        oracle: Option<Gaps>,
        max_discrepancy: Option<f64>,
    },
    Solve(Solve),
    Bounds(Bounds),
    Simulate(Simulate),
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gaps {
    pub statistical_parity: Vec<f64>,
    pub equal_opportunity: Vec<f64>,
    /// Row `y` (true label), column `ŷ` (prediction).
    pub equalized_odds: Vec<Vec<f64>>,
}

impl From<&memfair_core::GapReport> for Gaps {
    fn from(g: &memfair_core::GapReport) -> Self {
        Self {
            statistical_parity: g.parity.clone(),
            equal_opportunity: g.opportunity.clone(),
            equalized_odds: g.odds.to_rows(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solve {
    pub metric: String,
    pub mode: Option<String>,
    pub requested_p_d: Option<f64>,
    pub feasible: bool,
    pub memorization: Option<Memorization>,
    /// Largest remaining gap of the witness.
    pub residual: Option<f64>,
    /// Statistical parity only: residual with the rates re-derived from the
    /// witness instead of held fixed.
    pub rederived_residual: Option<f64>,
    pub certificate: Option<Vec<f64>>,
    pub odds: Option<OddsDetails>,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OddsDetails {
    pub ratios: Vec<f64>,
    pub ratio_deviation: f64,
    pub proportionality_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Orientation {
    pub sufficient: f64,
    pub coarse_sufficient: Option<f64>,
    pub necessary: f64,
}

impl From<&memfair_core::zero_bias::Orientation> for Orientation {
    fn from(o: &memfair_core::zero_bias::Orientation) -> Self {
        Self {
            sufficient: o.sufficient,
            coarse_sufficient: o.coarse_sufficient,
            necessary: o.necessary,
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub metric: String,
    pub stated: Orientation,
    pub exchanged: Orientation,
    pub sufficient: f64,
    pub necessary: f64,
    pub exact: Option<f64>,
    pub p_d: Option<f64>,
    pub verdict: Option<String>,
    pub exact_verdict: Option<String>,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulate {
    pub samples: u64,
    pub seed: u64,
    pub z: f64,
    pub passed: bool,
    pub entries: Vec<McEntry>,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McEntry {
    pub family: String,
    pub label: usize,
    pub predicted: Option<usize>,
    pub reference: f64,
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
    pub passed: bool,
}

pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON with 17-significant-digit floats.
struct Fixed17<'a>(PrettyFormatter<'a>);

impl Formatter for Fixed17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        if v.is_finite() {
            w.write_all(fmt_f64(v).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, Fixed17(PrettyFormatter::new()));
        self.serialize(&mut ser).expect("reports serialize");
        out.push(b'\n');
        String::from_utf8(out).expect("JSON is UTF-8")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(results: Option<Results>) -> RunReport {
        RunReport {
            schema_version: SCHEMA_VERSION,
            command: CommandEcho {
                name: "gaps".into(),
                input: "s.toml".into(),
                flags: vec![("verify".into(), "true".into())],
            },
            inputs_digest: Some(digest(b"")),
            results,
            diagnostics: vec![],
            exit_status: 0,
        }
    }

    #[test]
    fn floats_have_17_digits() {
        let r = sample(Some(Results::Gaps {
            closed_form: Gaps {
                statistical_parity: vec![0.1, -1.0 / 30.0],
                equal_opportunity: vec![0.0, 0.0],
                equalized_odds: vec![vec![0.0; 2]; 2],
            },
            oracle: None,
            max_discrepancy: None,
        }));
        let text = r.to_json();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("-3.3333333333333333e-2"), "{text}");
        assert_eq!(RunReport::from_json(&text).unwrap(), r);
    }

    #[test]
    fn digest_is_sha256() {
        assert_eq!(digest(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![
            any::<f64>().prop_filter("finite", |v| v.is_finite()),
            -1.0f64..1.0,
            Just(0.0),
            Just(-0.0),
            Just(f64::MIN_POSITIVE),
            Just(5e-324),
        ]
    }

    proptest! {
        #[test]
        fn round_trips(
            values in prop::collection::vec(finite(), 4),
            feasible in any::<bool>(),
            seed in any::<u64>(),
            diag in prop::collection::vec(".{0,12}", 0..3),
        ) {
            let solve = Results::Solve(Solve {
                metric: "sp".into(),
                mode: Some("paper".into()),
                requested_p_d: Some(values[0]),
                feasible,
                memorization: Some(Memorization { p_d: values[1], q: values.clone(), q_plus: values.clone() }),
                residual: Some(values[2]),
                rederived_residual: None,
                certificate: feasible.then(|| values.clone()),
                odds: Some(OddsDetails { ratios: values.clone(), ratio_deviation: values[3], proportionality_deviation: 0.0 }),
            });
            let sim = Results::Simulate(Simulate {
                samples: seed,
                seed,
                z: values[0],
                passed: feasible,
                entries: vec![McEntry {
                    family: "odds".into(),
                    label: 1,
                    predicted: Some(0),
                    reference: values[1],
                    estimate: None,
                    std_error: Some(values[2]),
                    passed: false,
                }],
            });
            let bounds = Results::Bounds(Bounds {
                metric: "eqopp".into(),
                stated: Orientation { sufficient: values[0], coarse_sufficient: Some(values[1]), necessary: values[2] },
                exchanged: Orientation { sufficient: values[3], coarse_sufficient: None, necessary: values[0] },
                sufficient: values[1],
                necessary: values[2],
                exact: Some(values[3]),
                p_d: None,
                verdict: Some("GuaranteedFeasible".into()),
                exact_verdict: None,
            });
            for results in [Some(solve), Some(sim), Some(bounds), None] {
                let mut r = sample(results);
                r.diagnostics = diag.clone();
                let back = RunReport::from_json(&r.to_json()).unwrap();
                prop_assert_eq!(&back, &r);
                prop_assert_eq!(back.to_json(), r.to_json());
            }
        }
    }
}
