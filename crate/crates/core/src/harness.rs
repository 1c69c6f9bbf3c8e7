//! Coverage simulations over 2^2 populations given as cell counts.
//!
//! A study takes a list of populations (loaded from a cases file or
//! generated), repeatedly re-randomizes each one, builds the requested
//! intervals for one factorial effect, and records how often they contain the
//! true finite-population effect.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{draw_assignment, observe};
use crate::bayes::{self, binomial, PriorSpec};
use crate::design::ModelMatrix;
use crate::error::{Error, Result};
use crate::neyman::{self, Method};
use crate::population::{CellCounts, PotentialTable};
use crate::rng::{self, domain};

/// Factor count of every simulated population (16 outcome patterns).
pub const STUDY_FACTORS: usize = 2;
pub const STUDY_CELLS: usize = 16;

/// Default Monte Carlo draws per replication for Bayesian intervals.
pub const DEFAULT_DRAWS_PER_REP: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationCase {
    pub id: usize,
    pub counts: CellCounts,
    /// `τ̄_l` for l = 1..J, at index `l - 1`.
    pub effects: Vec<f64>,
}

impl SimulationCase {
    pub fn new(id: usize, counts: CellCounts) -> Result<Self> {
        let table = PotentialTable::from_cell_counts(&counts)?;
        let design = ModelMatrix::new(counts.factors())?;
        let effects = table.estimands(&design)?.tau;
        Ok(Self { id, counts, effects })
    }

    pub fn units(&self) -> u64 {
        self.counts.total()
    }

    pub fn effect(&self, l: usize) -> f64 {
        self.effects[l - 1]
    }
}

/// Multinomial(n, probs) by sequential conditional binomials.
fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut mass: f64 = probs.iter().sum();
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == probs.len() {
            out[k] = remaining;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let x = binomial(remaining, q, rng);
        out[k] = x;
        remaining -= x;
        mass -= p;
    }
    out
}

/// Draws `n_cases` populations: cell probabilities are sixteen iid uniforms
/// normalized to sum to one, and the counts are one multinomial draw of size
/// `units` from them.
pub fn generate_cases<R: Rng + ?Sized>(n_cases: usize, units: u64, rng: &mut R) -> Result<Vec<SimulationCase>> {
    if units == 0 {
        return Err(Error::invalid("cases need at least one unit"));
    }
    let uniform = Uniform::new(0.0f64, 1.0).expect("valid range");
    (1..=n_cases)
        .map(|id| {
            let raw: Vec<f64> = (0..STUDY_CELLS).map(|_| uniform.sample(rng)).collect();
            let total: f64 = raw.iter().sum();
            let probs: Vec<f64> = raw.iter().map(|u| u / total).collect();
            let counts = multinomial(units, &probs, rng);
            SimulationCase::new(id, CellCounts::new(STUDY_FACTORS, counts)?)
        })
        .collect()
}

fn cell_header() -> Vec<String> {
    (0..STUDY_CELLS).map(|w| format!("D{w:04b}")).collect()
}

/// Writes one row of sixteen counts per case, after a header row.
pub fn write_cases_csv<W: Write>(cases: &[SimulationCase], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(cell_header())?;
    for case in cases {
        w.write_record(case.counts.counts().iter().map(u64::to_string))?;
    }
    w.flush().map_err(|e| Error::io("<cases output>", e))?;
    Ok(())
}

/// Parses a cases file: one population per row, sixteen comma-separated
/// counts. A non-numeric first row is taken as a header; blank lines and
/// lines starting with `#` are skipped. Every row must sum to
/// `expected_total`, or to the first row's total when none is given.
pub fn parse_cases<R: Read>(input: R, origin: &Path, expected_total: Option<u64>) -> Result<Vec<SimulationCase>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut cases = Vec::new();
    let mut total = expected_total;
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if idx == 0 && record.get(0).is_some_and(|f| f.parse::<u64>().is_err()) {
            continue;
        }
        if record.len() != STUDY_CELLS {
            return Err(parse_err(
                line,
                format!("expected {STUDY_CELLS} counts, found {}", record.len()),
            ));
        }
        let counts = record
            .iter()
            .map(|f| f.parse::<u64>().map_err(|e| parse_err(line, format!("bad count {f:?}: {e}"))))
            .collect::<Result<Vec<u64>>>()?;
        let sum: u64 = counts.iter().sum();
        match total {
            Some(t) if t != sum => {
                return Err(parse_err(line, format!("row sums to {sum}, expected {t}")));
            }
            None if sum == 0 => return Err(parse_err(line, "row sums to zero".into())),
            None => total = Some(sum),
            _ => {}
        }
        cases.push(SimulationCase::new(cases.len() + 1, CellCounts::new(STUDY_FACTORS, counts)?)?);
    }
    if cases.is_empty() {
        return Err(parse_err(0, "no cases found".into()));
    }
    Ok(cases)
}

pub fn load_fixture_cases(path: &Path, expected_total: Option<u64>) -> Result<Vec<SimulationCase>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_cases(std::io::BufReader::new(file), path, expected_total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub case_id: usize,
    pub method: Method,
    pub replications: usize,
    pub covered: usize,
    pub coverage: f64,
    pub mean_width: f64,
}

/// Settings shared by every case of a coverage experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSettings {
    pub arms: Vec<u64>,
    pub effect: usize,
    pub replications: usize,
    pub level: f64,
    pub methods: Vec<Method>,
    pub draws_per_rep: usize,
    pub prior: PriorSpec,
    pub seed: u64,
}

/// Replication `r` of case `c` draws from substream `(seed, c, r)`.
pub fn coverage_experiment(case: &SimulationCase, settings: &CoverageSettings) -> Result<Vec<CoverageReport>> {
    if settings.replications == 0 {
        return Err(Error::invalid("need at least one replication"));
    }
    if settings.methods.is_empty() {
        return Err(Error::invalid("no methods requested"));
    }
    if let Some(m) = settings.methods.iter().find(|&&m| m == Method::BayesSensitivity) {
        return Err(Error::invalid(format!("coverage studies do not support {m}")));
    }
    let table = PotentialTable::from_cell_counts(&case.counts)?;
    let design = ModelMatrix::new(table.factors())?;
    design.check_effect(settings.effect)?;
    crate::population::check_arm_sizes(&settings.arms, table.arms(), table.units())?;
    let truth = case.effect(settings.effect);

    // (covered, width) per method, per replication
    let per_rep = (0..settings.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::substream(settings.seed, &[domain::COVERAGE, case.id as u64, r as u64]);
            let assignment = draw_assignment(&settings.arms, table.units(), &mut rng)?;
            let obs = observe(&table, &assignment)?;
            settings
                .methods
                .iter()
                .map(|&method| {
                    let iv = match method {
                        Method::Neyman => neyman::confidence_interval(&obs, &design, settings.effect, settings.level)?,
                        Method::BayesIndep => bayes::credible_interval_indep(
                            &obs,
                            &design,
                            settings.effect,
                            &settings.prior,
                            settings.draws_per_rep,
                            settings.level,
                            &mut rng,
                        )?,
                        Method::BayesSensitivity => unreachable!("rejected above"),
                    };
                    Ok((iv.contains(truth), iv.width()))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(settings
        .methods
        .iter()
        .enumerate()
        .map(|(m, &method)| {
            let covered = per_rep.iter().filter(|rep| rep[m].0).count();
            let width_sum: f64 = per_rep.iter().map(|rep| rep[m].1).sum();
            CoverageReport {
                case_id: case.id,
                method,
                replications: settings.replications,
                covered,
                coverage: covered as f64 / settings.replications as f64,
                mean_width: width_sum / settings.replications as f64,
            }
        })
        .collect())
}

/// Where a study's populations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CaseSource {
    /// A cases file; relative paths resolve against the config's directory.
    Path(PathBuf),
    Generate { generate: GeneratorSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_cases: usize,
    pub units: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for BetaPrior {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 1.0 }
    }
}

fn default_level() -> f64 {
    0.95
}

fn default_draws() -> usize {
    DEFAULT_DRAWS_PER_REP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub cases: CaseSource,
    pub arms: Vec<u64>,
    pub effect: usize,
    pub replications: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    pub methods: Vec<Method>,
    pub seed: u64,
    #[serde(default = "default_draws")]
    pub draws_per_rep: usize,
    #[serde(default)]
    pub prior: BetaPrior,
}

impl StudyConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Loads or generates the populations, resolving relative paths against `base_dir`.
    pub fn load_cases(&self, base_dir: &Path) -> Result<Vec<SimulationCase>> {
        match &self.cases {
            CaseSource::Path(p) => {
                let path = if p.is_absolute() { p.clone() } else { base_dir.join(p) };
                load_fixture_cases(&path, None)
            }
            CaseSource::Generate { generate } => {
                let mut rng = rng::substream(generate.seed, &[domain::CASES]);
                generate_cases(generate.n_cases, generate.units, &mut rng)
            }
        }
    }

    pub fn settings(&self) -> Result<CoverageSettings> {
        crate::stats::check_level(self.level)?;
        Ok(CoverageSettings {
            arms: self.arms.clone(),
            effect: self.effect,
            replications: self.replications,
            level: self.level,
            methods: self.methods.clone(),
            draws_per_rep: self.draws_per_rep,
            prior: PriorSpec::symmetric(self.arms.len(), self.prior.alpha, self.prior.beta)?,
            seed: self.seed,
        })
    }
}

/// Aggregate coverage of one method across all cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub cases: usize,
    pub over_threshold: f64,
    pub under_threshold: f64,
    /// Share of cases with coverage strictly above `over_threshold`.
    pub fraction_over: f64,
    /// Share of cases with coverage strictly below `under_threshold`.
    pub fraction_under: f64,
    pub mean_coverage: f64,
    pub mean_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub effect: usize,
    pub level: f64,
    pub replications: usize,
    pub seed: u64,
    pub rows: Vec<CoverageReport>,
    pub summary: Vec<MethodSummary>,
}

/// Over/under-coverage bands sit one percentage point either side of the level.
pub const COVERAGE_BAND: f64 = 0.01;

pub fn run_cases(cases: &[SimulationCase], settings: &CoverageSettings) -> Result<StudyReport> {
    let rows: Vec<CoverageReport> = cases
        .par_iter()
        .map(|case| coverage_experiment(case, settings))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let over = settings.level + COVERAGE_BAND;
    let under = settings.level - COVERAGE_BAND;
    let summary = settings
        .methods
        .iter()
        .map(|&method| {
            let mine: Vec<&CoverageReport> = rows.iter().filter(|r| r.method == method).collect();
            let n = mine.len() as f64;
            MethodSummary {
                method,
                cases: mine.len(),
                over_threshold: over,
                under_threshold: under,
                fraction_over: mine.iter().filter(|r| r.coverage > over).count() as f64 / n,
                fraction_under: mine.iter().filter(|r| r.coverage < under).count() as f64 / n,
                mean_coverage: mine.iter().map(|r| r.coverage).sum::<f64>() / n,
                mean_width: mine.iter().map(|r| r.mean_width).sum::<f64>() / n,
            }
        })
        .collect();

    Ok(StudyReport {
        effect: settings.effect,
        level: settings.level,
        replications: settings.replications,
        seed: settings.seed,
        rows,
        summary,
    })
}

pub fn run_study(config: &StudyConfig, base_dir: &Path) -> Result<StudyReport> {
    let settings = config.settings()?;
    let cases = config.load_cases(base_dir)?;
    run_cases(&cases, &settings)
}

/// `case_id,method,coverage,mean_width`, one row per case and method.
pub fn write_coverage_csv<W: Write>(rows: &[CoverageReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["case_id", "method", "coverage", "mean_width"])?;
    for r in rows {
        w.write_record([
            r.case_id.to_string(),
            r.method.to_string(),
            r.coverage.to_string(),
            r.mean_width.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<coverage output>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CASE_1: [u64; 16] = [33, 12, 0, 63, 18, 93, 63, 118, 53, 41, 44, 71, 67, 58, 58, 8];

    fn settings(methods: Vec<Method>, reps: usize) -> CoverageSettings {
        CoverageSettings {
            arms: vec![200; 4],
            effect: 1,
            replications: reps,
            level: 0.95,
            methods,
            draws_per_rep: 2000,
            prior: PriorSpec::uniform(4),
            seed: 2024,
        }
    }

    #[test]
    fn generated_cases_sum_to_units() {
        let mut r = rng::seeded(1);
        let cases = generate_cases(100, 800, &mut r).unwrap();
        assert_eq!(cases.len(), 100);
        assert!(cases.iter().all(|c| c.units() == 800));
        assert_eq!(cases[0].id, 1);
    }

    #[test]
    fn generated_cells_average_to_flat() {
        // Normalized iid uniforms are exchangeable, so every cell expects N/16.
        let mut r = rng::seeded(2);
        let n_cases = 4000;
        let cases = generate_cases(n_cases, 800, &mut r).unwrap();
        for cell in 0..STUDY_CELLS {
            let xs: Vec<f64> = cases.iter().map(|c| c.counts.counts()[cell] as f64).collect();
            let (mean, var) = crate::stats::mean_var(&xs);
            let se = (var / n_cases as f64).sqrt();
            assert!((mean - 50.0).abs() < 4.0 * se, "cell {cell}: {mean}");
        }
    }

    #[test]
    fn generated_file_is_reproducible() {
        let render = |seed| {
            let cases = generate_cases(10, 800, &mut rng::seeded(seed)).unwrap();
            let mut buf = Vec::new();
            write_cases_csv(&cases, &mut buf).unwrap();
            buf
        };
        assert_eq!(render(5), render(5));
        assert_ne!(render(5), render(6));
        let parsed = parse_cases(render(5).as_slice(), Path::new("mem"), Some(800)).unwrap();
        assert_eq!(parsed.len(), 10);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let text = "1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16\n1,2,3\n";
        match parse_cases(text.as_bytes(), Path::new("x.csv"), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let text = "1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16\n2,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16\n";
        match parse_cases(text.as_bytes(), Path::new("x.csv"), None) {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("sums"));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_cases("".as_bytes(), Path::new("x.csv"), None).is_err());
        assert!(parse_cases("1,x,3,4,5,6,7,8,9,10,11,12,13,14,15,16\n".as_bytes(), Path::new("x"), None).is_err());
    }

    #[test]
    fn identical_units_are_always_covered() {
        let mut counts = [0u64; 16];
        counts[0b0101] = 800;
        let case = SimulationCase::new(1, CellCounts::new(2, counts.to_vec()).unwrap()).unwrap();
        let report = coverage_experiment(&case, &settings(vec![Method::Neyman], 50)).unwrap();
        assert_eq!(report[0].coverage, 1.0);
        assert_eq!(report[0].mean_width, 0.0);
    }

    #[test]
    fn coverage_is_reproducible() {
        let case = SimulationCase::new(1, CellCounts::new(2, CASE_1.to_vec()).unwrap()).unwrap();
        let s = settings(vec![Method::Neyman, Method::BayesIndep], 20);
        let a = coverage_experiment(&case, &s).unwrap();
        let b = coverage_experiment(&case, &s).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| (0.0..=1.0).contains(&r.coverage) && r.covered <= r.replications));
    }

    #[test]
    fn rejects_bad_settings() {
        let case = SimulationCase::new(1, CellCounts::new(2, CASE_1.to_vec()).unwrap()).unwrap();
        assert!(coverage_experiment(&case, &settings(vec![Method::Neyman], 0)).is_err());
        assert!(coverage_experiment(&case, &settings(vec![Method::BayesSensitivity], 1)).is_err());
        let mut s = settings(vec![Method::Neyman], 1);
        s.arms = vec![100; 4];
        assert!(coverage_experiment(&case, &s).is_err());
    }

    #[test]
    fn single_case_study_has_one_row_per_method() {
        let case = SimulationCase::new(1, CellCounts::new(2, CASE_1.to_vec()).unwrap()).unwrap();
        let report = run_cases(&[case], &settings(vec![Method::Neyman, Method::BayesIndep], 5)).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.summary.len(), 2);
        let mut buf = Vec::new();
        write_coverage_csv(&report.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("case_id,method,coverage,mean_width\n1,neyman,"));
    }

    #[test]
    fn config_parsing() {
        let cfg: StudyConfig = serde_json::from_str(
            r#"{"cases":"cases.csv","arms":[200,200,200,200],"effect":1,"replications":500,
                "methods":["neyman","bayes-indep"],"seed":1}"#,
        )
        .unwrap();
        assert_eq!(cfg.cases, CaseSource::Path("cases.csv".into()));
        assert_eq!(cfg.draws_per_rep, DEFAULT_DRAWS_PER_REP);
        assert_eq!(cfg.level, 0.95);
        let cfg: StudyConfig = serde_json::from_str(
            r#"{"cases":{"generate":{"n_cases":3,"units":800,"seed":9}},"arms":[150,150,250,250],
                "effect":1,"replications":2,"methods":["neyman"],"seed":1}"#,
        )
        .unwrap();
        assert_eq!(cfg.load_cases(Path::new(".")).unwrap().len(), 3);
        assert!(serde_json::from_str::<StudyConfig>(r#"{"cases":"a","arms":[],"effect":1,"replications":1,"methods":[],"seed":1,"bogus":1}"#).is_err());
    }
}
