use std::fmt::Write as _;

use memfair_core::gaps::{closed_form_gaps, gaps_by_enumeration};
use memfair_core::model::{derive_phi, validate, validate_parts};
use memfair_core::simulate::{mc_verify, GapFamily};
use memfair_core::zero_bias::{
    fixed_rates, opportunity_bounds, parity_bounds, solve_odds_zero, solve_opportunity_zero, solve_parity_zero,
    BoundsReport, SolveMode, ZeroBias, DEFAULT_RATIO_TOL,
};
use memfair_core::{Error, GapReport, Tier};

use crate::args::{BoundsMetric, Cli, Command, Mode, SolveMetric};
use crate::report::{self, fmt_f64, CommandEcho, Gaps, OddsDetails, Results, RunReport, SCHEMA_VERSION};
use crate::scenario_file::{Memorization, ScenarioFile};
use crate::{CliError, EXIT_NEGATIVE, EXIT_OK};

/// Closed form vs. enumeration discrepancy above which `gaps --verify` warns.
pub const VERIFY_TOL: f64 = 1e-10;
/// Equalized odds solutions with a larger remaining gap count as failures.
pub const ODDS_RESIDUAL_TOL: f64 = 1e-8;
/// Rates supplied in the file further than this from the derived ones get a
/// diagnostic.
const RATE_MISMATCH_TOL: f64 = 1e-9;

/// A finished run: the report, and its human-readable rendering.
pub struct Outcome {
    pub report: RunReport,
    pub human: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.report.exit_status
    }
}

struct Done {
    results: Results,
    diagnostics: Vec<String>,
    exit: i32,
    human: String,
}

fn vec_str(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
    format!("[{}]", parts.join(", "))
}

fn opt_str(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), fmt_f64)
}

fn echo(cli: &Cli) -> CommandEcho {
    let flag = |k: &str, v: String| (k.to_string(), v);
    let mut flags = vec![flag("normalize", cli.normalize.to_string())];
    let name = match &cli.command {
        Command::Gaps { verify, .. } => {
            flags.push(flag("verify", verify.to_string()));
            "gaps".to_string()
        }
        Command::Solve { metric, p_d, mode, .. } => {
            flags.push(flag("pd", opt_str(*p_d)));
            flags.push(flag("mode", format!("{mode:?}").to_lowercase()));
            format!("solve {}", format!("{metric:?}").to_lowercase())
        }
        Command::Bounds { metric, p_d, .. } => {
            flags.push(flag("pd", opt_str(*p_d)));
            format!("bounds {}", format!("{metric:?}").to_lowercase())
        }
        Command::Simulate { samples, seed, z, .. } => {
            flags.push(flag("samples", samples.to_string()));
            flags.push(flag("seed", seed.to_string()));
            flags.push(flag("z", fmt_f64(*z)));
            "simulate".to_string()
        }
    };
    CommandEcho {
        name,
        input: cli.command.file().display().to_string(),
        flags,
    }
}

/// Runs one command. Never panics on bad input; every failure ends up in the
/// report's diagnostics with the matching exit status.
pub fn run(cli: &Cli) -> Outcome {
    let command = echo(cli);
    let (file, bytes) = match ScenarioFile::read(cli.command.file()) {
        Ok(read) => read,
        Err(e) => return failure(command, None, e),
    };
    let digest = Some(report::digest(&bytes));
    let done = match &cli.command {
        Command::Gaps { verify, .. } => gaps(&file, cli.normalize, *verify),
        Command::Solve { metric, p_d, mode, .. } => solve(&file, cli.normalize, *metric, *p_d, *mode),
        Command::Bounds { metric, p_d, .. } => bounds(&file, cli.normalize, *metric, *p_d),
        Command::Simulate { samples, seed, z, .. } => simulate(&file, cli.normalize, *samples, *seed, *z),
    };
    match done {
        Ok(d) => Outcome {
            report: RunReport {
                schema_version: SCHEMA_VERSION,
                command,
                inputs_digest: digest,
                results: Some(d.results),
                diagnostics: d.diagnostics,
                exit_status: d.exit,
            },
            human: d.human,
        },
        Err(e) => failure(command, digest, e),
    }
}

fn failure(command: CommandEcho, digest: Option<String>, e: CliError) -> Outcome {
    Outcome {
        report: RunReport {
            schema_version: SCHEMA_VERSION,
            command,
            inputs_digest: digest,
            results: None,
            diagnostics: vec![e.to_string()],
            exit_status: e.exit_code(),
        },
        human: format!("error: {e}\n"),
    }
}

fn render_gaps(out: &mut String, title: &str, g: &GapReport) {
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "  statistical parity: {}", vec_str(&g.parity));
    let _ = writeln!(out, "  equal opportunity:  {}", vec_str(&g.opportunity));
    let _ = writeln!(out, "  equalized odds:");
    for row in g.odds.rows() {
        let _ = writeln!(out, "    {}", vec_str(row));
    }
}

fn gaps(file: &ScenarioFile, normalize: bool, verify: bool) -> Result<Done, CliError> {
    let scenario = file.scenario(normalize)?;
    validate(&scenario, Tier::Consistent).into_result()?;
    let mut diagnostics = Vec::new();
    let rates = derive_phi(scenario.joint(), scenario.memo(), scenario.base())?;
    if let Some(d) = rates.discrepancy.filter(|d| *d > RATE_MISMATCH_TOL) {
        diagnostics.push(format!(
            "supplied prediction rates differ from the confusion-derived ones by up to {}; gaps use the supplied rates",
            fmt_f64(d)
        ));
    }
    let closed = closed_form_gaps(&scenario)?;
    let mut human = String::new();
    render_gaps(&mut human, "gaps (closed form)", &closed);
    let (oracle, discrepancy) = if verify {
        let oracle = gaps_by_enumeration(&scenario)?;
        let d = closed.max_abs_diff(&oracle);
        render_gaps(&mut human, "gaps (enumeration)", &oracle);
        let _ = writeln!(human, "max discrepancy: {}", fmt_f64(d));
        if d > VERIFY_TOL {
            diagnostics.push(format!("closed form and enumeration differ by {}", fmt_f64(d)));
        }
        (Some(Gaps::from(&oracle)), Some(d))
    } else {
        (None, None)
    };
    Ok(Done {
        results: Results::Gaps {
            closed_form: Gaps::from(&closed),
            oracle,
            max_discrepancy: discrepancy,
        },
        diagnostics,
        exit: EXIT_OK,
        human,
    })
}

fn solve_mode(mode: Mode) -> SolveMode {
    match mode {
        Mode::Paper => SolveMode::Paper,
        Mode::Consistent => SolveMode::Consistent,
    }
}

fn empty_solve(metric: &str, mode: Option<Mode>, p_d: Option<f64>) -> report::Solve {
    report::Solve {
        metric: metric.into(),
        mode: mode.map(|m| format!("{m:?}").to_lowercase()),
        requested_p_d: p_d,
        feasible: false,
        memorization: None,
        residual: None,
        rederived_residual: None,
        certificate: None,
        odds: None,
    }
}

fn render_witness(human: &mut String, m: &Memorization, residual: f64) {
    let _ = writeln!(human, "residual gap: {}", fmt_f64(residual));
    let _ = writeln!(human, "witness:\n{}", m.to_toml().trim_end());
}

fn solve(
    file: &ScenarioFile,
    normalize: bool,
    metric: SolveMetric,
    p_d: Option<f64>,
    mode: Mode,
) -> Result<Done, CliError> {
    let joint = file.joint(normalize)?;
    let base = file.base(normalize)?;
    let tier = match metric {
        SolveMetric::Sp => Tier::Basic,
        SolveMetric::Eqopp | SolveMetric::Eqodds => Tier::Strict,
    };
    validate_parts(&joint, None, &base, tier).into_result()?;
    let mut diagnostics = Vec::new();
    let mut human = String::new();
    if metric == SolveMetric::Eqodds {
        if p_d.is_some() {
            diagnostics.push("--pd is ignored for eqodds: the required mass is part of the solution".into());
        }
        let mut out = empty_solve("eqodds", None, None);
        let exit = match solve_odds_zero(&joint, &base, DEFAULT_RATIO_TOL) {
            Ok(s) => {
                let m = Memorization::from(&s.composition);
                out.feasible = s.residual <= ODDS_RESIDUAL_TOL;
                out.residual = Some(s.residual);
                out.odds = Some(OddsDetails {
                    ratios: s.ratios.clone(),
                    ratio_deviation: s.ratio_deviation,
                    proportionality_deviation: s.proportionality_deviation,
                });
                let _ = writeln!(human, "eqodds: required p_D = {}", fmt_f64(s.mass));
                render_witness(&mut human, &m, s.residual);
                out.memorization = Some(m);
                if out.feasible {
                    EXIT_OK
                } else {
                    diagnostics.push(format!(
                        "misprediction rows are not proportional across groups (deviation {}); \
                         the closed-form composition leaves a gap of {}",
                        fmt_f64(s.proportionality_deviation),
                        fmt_f64(s.residual)
                    ));
                    EXIT_NEGATIVE
                }
            }
            Err(e @ (Error::RatioConditionFailed { .. } | Error::SolutionNotProbability { .. })) => {
                let _ = writeln!(human, "eqodds: no zero-gap composition: {e}");
                diagnostics.push(e.to_string());
                EXIT_NEGATIVE
            }
            Err(e) => return Err(e.into()),
        };
        return Ok(Done {
            results: Results::Solve(out),
            diagnostics,
            exit,
            human,
        });
    }

    let p = p_d.ok_or_else(|| CliError::Usage("--pd is required for sp and eqopp".into()))?;
    let name = format!("{metric:?}").to_lowercase();
    let result = match metric {
        SolveMetric::Sp => solve_parity_zero(&joint, &base, p, solve_mode(mode))?,
        _ => solve_opportunity_zero(&joint, &base, p, solve_mode(mode))?,
    };
    let mut out = empty_solve(&name, Some(mode), Some(p));
    let exit = match result {
        ZeroBias::Feasible(w) => {
            let m = Memorization::from(&w.composition);
            let _ = writeln!(human, "{name}: feasible at p_D = {}", fmt_f64(p));
            render_witness(&mut human, &m, w.residual);
            if let Some(r) = w.rederived_residual {
                let _ = writeln!(human, "residual with re-derived rates: {}", fmt_f64(r));
            }
            out.feasible = true;
            out.memorization = Some(m);
            out.residual = Some(w.residual);
            out.rederived_residual = w.rederived_residual;
            EXIT_OK
        }
        ZeroBias::Infeasible { certificate } => {
            let _ = writeln!(human, "{name}: infeasible at p_D = {}", fmt_f64(p));
            let _ = writeln!(human, "certificate: {}", vec_str(&certificate));
            out.certificate = Some(certificate);
            EXIT_NEGATIVE
        }
    };
    Ok(Done {
        results: Results::Solve(out),
        diagnostics,
        exit,
        human,
    })
}

fn bounds(file: &ScenarioFile, normalize: bool, metric: BoundsMetric, p_d: Option<f64>) -> Result<Done, CliError> {
    let joint = file.joint(normalize)?;
    let base = file.base(normalize)?;
    validate_parts(&joint, None, &base, Tier::Basic).into_result()?;
    let (name, r): (&str, BoundsReport) = match metric {
        BoundsMetric::Sp => ("sp", parity_bounds(&joint, &fixed_rates(&joint, &base)?)?),
        BoundsMetric::Eqopp => ("eqopp", opportunity_bounds(&joint, &base)?),
    };
    let mut diagnostics = Vec::new();
    if let Some(exact) = r.exact.filter(|e| *e > r.sufficient() + 1e-12) {
        diagnostics.push(format!(
            "the summed sufficient threshold {} is below the exact threshold {}: \
             masses in between are reported feasible but are not",
            fmt_f64(r.sufficient()),
            fmt_f64(exact)
        ));
    }
    let verdict = p_d.map(|p| format!("{:?}", r.verdict(p)));
    let exact_verdict = p_d.and_then(|p| r.exact_verdict(p)).map(|v| format!("{v:?}"));
    let mut human = String::new();
    let _ = writeln!(human, "{name} bounds on p_D");
    for (label, o) in [("stated", &r.stated), ("exchanged", &r.exchanged)] {
        let _ = writeln!(
            human,
            "  {label:<9}  sufficient {}  necessary {}{}",
            fmt_f64(o.sufficient),
            fmt_f64(o.necessary),
            o.coarse_sufficient.map_or(String::new(), |c| format!("  coarse {}", fmt_f64(c)))
        );
    }
    let _ = writeln!(human, "  sufficient {}  necessary {}", fmt_f64(r.sufficient()), fmt_f64(r.necessary()));
    if let Some(e) = r.exact {
        let _ = writeln!(human, "  exact threshold {}", fmt_f64(e));
    }
    if let (Some(p), Some(v)) = (p_d, &verdict) {
        let _ = writeln!(human, "  verdict at p_D = {}: {v}", fmt_f64(p));
        if let Some(ev) = &exact_verdict {
            let _ = writeln!(human, "  exact verdict: {ev}");
        }
    }
    Ok(Done {
        results: Results::Bounds(report::Bounds {
            metric: name.into(),
            stated: (&r.stated).into(),
            exchanged: (&r.exchanged).into(),
            sufficient: r.sufficient(),
            necessary: r.necessary(),
            exact: r.exact,
            p_d,
            verdict,
            exact_verdict,
        }),
        diagnostics,
        exit: EXIT_OK,
        human,
    })
}

fn simulate(file: &ScenarioFile, normalize: bool, samples: u64, seed: u64, z: f64) -> Result<Done, CliError> {
    let scenario = file.scenario(normalize)?;
    validate(&scenario, Tier::Consistent).into_result()?;
    if !(z.is_finite() && z > 0.0) {
        return Err(CliError::Usage(format!("--z must be positive, got {z}")));
    }
    let (_, mc) = mc_verify(&scenario, samples, seed, z)?;
    let entries: Vec<report::McEntry> = mc
        .entries
        .iter()
        .map(|e| report::McEntry {
            family: match e.family {
                GapFamily::Parity => "statistical_parity",
                GapFamily::Opportunity => "equal_opportunity",
                GapFamily::Odds => "equalized_odds",
            }
            .into(),
            label: e.index.0,
            predicted: (e.family == GapFamily::Odds).then_some(e.index.1),
            reference: e.reference,
            estimate: e.estimate.map(|g| g.value),
            std_error: e.estimate.map(|g| g.std_error),
            passed: e.passed,
        })
        .collect();
    let mut human = String::new();
    let _ = writeln!(human, "simulate: n = {samples}, seed = {seed}, z = {}", fmt_f64(z));
    for e in &entries {
        let index = e.predicted.map_or(format!("{}", e.label), |p| format!("{},{p}", e.label));
        let _ = writeln!(
            human,
            "  {:<18} [{index}]  closed form {}  estimate {} ± {}  {}",
            e.family,
            fmt_f64(e.reference),
            opt_str(e.estimate),
            opt_str(e.std_error),
            if e.passed { "ok" } else { "FAIL" }
        );
    }
    let _ = writeln!(human, "{}", if mc.passed { "pass" } else { "fail" });
    let failed = mc.failures().count();
    let diagnostics = if failed > 0 {
        vec![format!("{failed} of {} entries outside {} standard errors", entries.len(), fmt_f64(z))]
    } else {
        vec![]
    };
    Ok(Done {
        results: Results::Simulate(report::Simulate {
            samples,
            seed,
            z,
            passed: mc.passed,
            entries,
        }),
        diagnostics,
        exit: if mc.passed { EXIT_OK } else { EXIT_NEGATIVE },
        human,
    })
}
