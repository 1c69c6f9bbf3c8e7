//! Report types and orchestration behind the `factorial` command line tool.
//!
//! Everything here is a pure function of its inputs and the seed, so the
//! binary only has to parse flags, read files and write the results.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::assignment::ObservedData;
use crate::bayes::{self, PriorSpec};
use crate::design::ModelMatrix;
use crate::error::{Error, Result};
use crate::harness::{BetaPrior, MethodSummary, StudyConfig};
use crate::neyman::{self, IntervalReport};
use crate::rng::{self, domain};
use crate::sensitivity::{self, GammaStructure};
use crate::stats;

pub const TOOL: &str = "factorial-bayes";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Significant digits kept for floating-point values in JSON output.
pub const JSON_DIGITS: usize = 6;

pub const DEFAULT_DRAWS: usize = 200_000;
pub const DEFAULT_SWEEP_DRAWS: usize = 50_000;

/// Observed data as read from an input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisInput {
    #[serde(rename = "K")]
    pub factors: usize,
    pub n: Vec<u64>,
    pub n_obs: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl AnalysisInput {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let input: Self = serde_json::from_str(text)?;
        input.observed()?;
        Ok(input)
    }

    /// Reads `arm,size,successes` rows (arms numbered from 1, any order, an
    /// optional header row). K is inferred from the arm count.
    pub fn from_csv_str(text: &str, origin: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let mut rows: Vec<(usize, u64, u64)> = Vec::new();
        for (idx, record) in reader.records().enumerate() {
            let record = record?;
            let line = record.position().map_or(idx + 1, |p| p.line() as usize);
            if idx == 0 && record.get(0).is_some_and(|f| f.parse::<usize>().is_err()) {
                continue;
            }
            if record.len() != 3 {
                return Err(parse_err(line, format!("expected arm,size,successes, got {} fields", record.len())));
            }
            let field = |i: usize| -> Result<u64> {
                record[i]
                    .parse::<u64>()
                    .map_err(|e| parse_err(line, format!("bad integer {:?}: {e}", &record[i])))
            };
            rows.push((field(0)? as usize, field(1)?, field(2)?));
        }
        let arms = rows.len();
        if arms < 2 || !arms.is_power_of_two() {
            return Err(parse_err(0, format!("need 2^K arm rows, got {arms}")));
        }
        rows.sort_by_key(|r| r.0);
        if rows.iter().enumerate().any(|(i, r)| r.0 != i + 1) {
            return Err(parse_err(0, format!("arms must be numbered 1..={arms} exactly once")));
        }
        let input = Self {
            factors: arms.trailing_zeros() as usize,
            n: rows.iter().map(|r| r.1).collect(),
            n_obs: rows.iter().map(|r| r.2).collect(),
            label: None,
        };
        input.observed()?;
        Ok(input)
    }

    pub fn observed(&self) -> Result<ObservedData> {
        ObservedData::new(self.factors, self.n.clone(), self.n_obs.clone())
    }
}

/// Which factorial effects to report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EffectSelector {
    All,
    List(Vec<usize>),
}

impl EffectSelector {
    pub fn resolve(&self, design: &ModelMatrix) -> Result<Vec<usize>> {
        let effects = match self {
            EffectSelector::All => (1..design.arms()).collect(),
            EffectSelector::List(v) => v.clone(),
        };
        for &l in &effects {
            design.check_effect(l)?;
        }
        Ok(effects)
    }
}

impl std::str::FromStr for EffectSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "all" {
            return Ok(EffectSelector::All);
        }
        let list = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::invalid(format!("bad effect index {:?}: {e}", t.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        if list.is_empty() {
            return Err(Error::invalid("no effects selected"));
        }
        Ok(EffectSelector::List(list))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOptions {
    pub prior: BetaPrior,
    pub draws: usize,
    pub level: f64,
    pub seed: u64,
    pub effects: EffectSelector,
    pub rho_grid: Option<Vec<f64>>,
    pub sweep_draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rho: f64,
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySummary {
    pub draws: usize,
    pub rows: Vec<SweepRow>,
    /// Widest interval over the sweep.
    pub conservative: IntervalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    pub effect: usize,
    pub neyman: IntervalReport,
    pub bayes_indep: IntervalReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivitySummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tool: String,
    pub version: String,
    pub input: AnalysisInput,
    pub seed: u64,
    pub draws: usize,
    pub level: f64,
    pub prior: BetaPrior,
    pub effects: Vec<EffectReport>,
}

fn prior_for(obs: &ObservedData, prior: BetaPrior) -> Result<PriorSpec> {
    PriorSpec::symmetric(obs.arms(), prior.alpha, prior.beta)
}

fn sweep_rows(report: &sensitivity::SweepReport) -> Vec<SweepRow> {
    report
        .intervals
        .iter()
        .map(|iv| SweepRow {
            rho: iv.rho.unwrap_or(f64::NAN),
            lower: iv.lower,
            upper: iv.upper,
            width: iv.width(),
        })
        .collect()
}

/// Neymanian and independent-Bayes analysis of every selected effect, plus
/// an optional ρ sweep. Effect `l` draws from substream `(seed, l)`.
pub fn analyze(input: &AnalysisInput, opts: &AnalyzeOptions) -> Result<AnalysisReport> {
    let obs = input.observed()?;
    let design = ModelMatrix::new(obs.factors())?;
    let prior = prior_for(&obs, opts.prior)?;
    stats::check_level(opts.level)?;
    let effects = opts
        .effects
        .resolve(&design)?
        .into_iter()
        .map(|l| {
            let neyman = neyman::confidence_interval(&obs, &design, l, opts.level)?;
            let mut rng = rng::substream(opts.seed, &[domain::ANALYZE, l as u64]);
            let mut bayes_indep =
                bayes::credible_interval_indep(&obs, &design, l, &prior, opts.draws, opts.level, &mut rng)?;
            bayes_indep.seed = Some(opts.seed);
            let sensitivity = match &opts.rho_grid {
                None => None,
                Some(grid) => {
                    let sweep = sensitivity::sensitivity_sweep(
                        &obs,
                        &design,
                        l,
                        &prior,
                        grid,
                        opts.sweep_draws,
                        opts.level,
                        opts.seed,
                    )?;
                    Some(SensitivitySummary {
                        draws: opts.sweep_draws,
                        rows: sweep_rows(&sweep),
                        conservative: sweep.widest().clone(),
                    })
                }
            };
            Ok(EffectReport {
                effect: l,
                neyman,
                bayes_indep,
                sensitivity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AnalysisReport {
        tool: TOOL.into(),
        version: VERSION.into(),
        input: input.clone(),
        seed: opts.seed,
        draws: opts.draws,
        level: opts.level,
        prior: opts.prior,
        effects,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityOptions {
    pub prior: BetaPrior,
    pub draws: usize,
    pub level: f64,
    pub seed: u64,
    pub effect: usize,
    pub rho_grid: Vec<f64>,
    /// When set, a single interval under this association matrix replaces the sweep.
    pub gamma: Option<GammaStructure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub tool: String,
    pub version: String,
    pub input: AnalysisInput,
    pub effect: usize,
    pub seed: u64,
    pub draws: usize,
    pub level: f64,
    pub prior: BetaPrior,
    pub grid_points: usize,
    pub conservative: IntervalReport,
}

/// Runs the sweep; returns the per-ρ rows and the summary.
pub fn sensitivity(input: &AnalysisInput, opts: &SensitivityOptions) -> Result<(Vec<SweepRow>, SensitivityReport)> {
    let obs = input.observed()?;
    let design = ModelMatrix::new(obs.factors())?;
    let prior = prior_for(&obs, opts.prior)?;
    let (rows, conservative) = match &opts.gamma {
        Some(gamma) => {
            let iv = sensitivity::credible_interval_gamma(
                &obs,
                &design,
                opts.effect,
                &prior,
                gamma,
                opts.draws,
                opts.level,
                opts.seed,
            )?;
            (Vec::new(), iv)
        }
        None => {
            let sweep = sensitivity::sensitivity_sweep(
                &obs,
                &design,
                opts.effect,
                &prior,
                &opts.rho_grid,
                opts.draws,
                opts.level,
                opts.seed,
            )?;
            (sweep_rows(&sweep), sweep.widest().clone())
        }
    };
    let report = SensitivityReport {
        tool: TOOL.into(),
        version: VERSION.into(),
        input: input.clone(),
        effect: opts.effect,
        seed: opts.seed,
        draws: opts.draws,
        level: opts.level,
        prior: opts.prior,
        grid_points: rows.len(),
        conservative,
    };
    Ok((rows, report))
}

/// `rho,lower,upper,width` at full precision.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rho", "lower", "upper", "width"])?;
    for r in rows {
        w.write_record([
            r.rho.to_string(),
            r.lower.to_string(),
            r.upper.to_string(),
            r.width.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<sweep output>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub tool: String,
    pub version: String,
    pub config: StudyConfig,
    pub cases: usize,
    pub summary: Vec<MethodSummary>,
}

/// Rounds a finite float to `digits` significant digits.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

fn round_floats(value: &mut Value, digits: usize) {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().expect("f64 number"), digits);
            if let Some(r) = serde_json::Number::from_f64(x) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|v| round_floats(v, digits)),
        Value::Object(map) => map.values_mut().for_each(|v| round_floats(v, digits)),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to [`JSON_DIGITS`] significant digits.
pub fn to_report_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_floats(&mut v, JSON_DIGITS);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}
