//! Sensitivity analysis over the dependence between potential outcomes.
//!
//! The pairwise joint success probability of arms `j` and `j'` is taken to be
//! `(1 - γ) π_j π_j' + γ min(π_j, π_j')` with `γ ∈ [0, 1)`: γ = 0 is
//! independence, γ → 1 approaches the comonotone coupling. Each unit's
//! missing outcome under arm `j` is imputed conditionally on the one outcome
//! that unit revealed, and the association matrix is either AR(1) in the arm
//! index or supplied by the caller.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::ObservedData;
use crate::bayes::{self, binomial, MarginalPosterior, MarginalProbs, PriorSpec};
use crate::design::ModelMatrix;
use crate::error::{Error, Result};
use crate::neyman::{check_dims, IntervalReport, Method};
use crate::rng::{self, domain, SimRng};
use crate::stats;

/// Drawn marginals are kept at least this far from 0 and 1.
pub const MARGINAL_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GammaKind {
    Ar1 { rho: f64 },
    Custom,
}

/// Symmetric matrix of pairwise associations `γ_{jj'} ∈ [0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaStructure {
    arms: usize,
    // row-major, diagonal unused and stored as 0
    values: Vec<f64>,
    kind: GammaKind,
}

fn check_unit_interval(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && (0.0..1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must lie in [0, 1), got {x}")))
    }
}

impl GammaStructure {
    /// `γ_{jj'} = ρ^{|j - j'|}`.
    pub fn ar1(rho: f64, arms: usize) -> Result<Self> {
        check_unit_interval("rho", rho)?;
        if arms < 2 {
            return Err(Error::invalid("need at least two arms"));
        }
        let mut values = vec![0.0; arms * arms];
        for j in 0..arms {
            for jp in 0..arms {
                if j != jp {
                    values[j * arms + jp] = rho.powi(j.abs_diff(jp) as i32);
                }
            }
        }
        Ok(Self {
            arms,
            values,
            kind: GammaKind::Ar1 { rho },
        })
    }

    /// A caller-supplied matrix; the diagonal is ignored.
    pub fn custom(rows: &[Vec<f64>]) -> Result<Self> {
        let arms = rows.len();
        if arms < 2 {
            return Err(Error::invalid("need at least two arms"));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != arms) {
            return Err(Error::invalid(format!(
                "gamma row {} has {} entries, expected {arms}",
                i + 1,
                rows[i].len()
            )));
        }
        let mut values = vec![0.0; arms * arms];
        for j in 0..arms {
            for jp in 0..arms {
                if j == jp {
                    continue;
                }
                let g = rows[j][jp];
                check_unit_interval(&format!("gamma[{}][{}]", j + 1, jp + 1), g)?;
                if (g - rows[jp][j]).abs() > 1e-12 {
                    return Err(Error::invalid(format!(
                        "gamma is not symmetric at ({}, {})",
                        j + 1,
                        jp + 1
                    )));
                }
                values[j * arms + jp] = g;
            }
        }
        Ok(Self {
            arms,
            values,
            kind: GammaKind::Custom,
        })
    }

    /// Parses a J×J matrix of comma-separated values, one row per line.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .enumerate()
            .filter(|(_, line)| !line.trim().is_empty())
            .map(|(i, line)| {
                line.split(',')
                    .map(|cell| {
                        cell.trim().parse::<f64>().map_err(|e| {
                            Error::invalid(format!("gamma line {}: {:?}: {e}", i + 1, cell.trim()))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::custom(&rows)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn kind(&self) -> GammaKind {
        self.kind
    }

    pub fn get(&self, j: usize, jp: usize) -> f64 {
        self.values[j * self.arms + jp]
    }
}

/// `Pr{Y(z_j') = 1 | Y(z_j) = s}` for s = 1 and s = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalProbs {
    pub given_one: f64,
    pub given_zero: f64,
}

/// Conditional success probabilities of arm `j'` given the outcome under
/// arm `j`, for marginals `pi_j`, `pi_jp` and association `gamma`.
pub fn conditional_probs(pi_j: f64, pi_jp: f64, gamma: f64) -> Result<ConditionalProbs> {
    if !(pi_j > 0.0 && pi_j < 1.0) {
        return Err(Error::invalid(format!(
            "conditioning probability must lie strictly inside (0, 1), got {pi_j}"
        )));
    }
    if !(0.0..=1.0).contains(&pi_jp) {
        return Err(Error::invalid(format!("probability must lie in [0, 1], got {pi_jp}")));
    }
    check_unit_interval("gamma", gamma)?;
    Ok(conditional_unchecked(pi_j, pi_jp, gamma))
}

#[inline]
fn conditional_unchecked(pi_j: f64, pi_jp: f64, gamma: f64) -> ConditionalProbs {
    let base = (1.0 - gamma) * pi_jp;
    ConditionalProbs {
        given_one: base + gamma * (pi_jp / pi_j).min(1.0),
        given_zero: base + gamma * (pi_jp - pi_j).max(0.0) / (1.0 - pi_j),
    }
}

fn clamp_marginal(p: f64) -> f64 {
    p.clamp(MARGINAL_CLAMP, 1.0 - MARGINAL_CLAMP)
}

/// Completed per-arm totals `n_j^obs + C_j`, where `C_j` sums, over every
/// other arm `j'`, binomial imputations for that arm's observed successes
/// and failures.
pub fn impute_totals_sensitivity<R: Rng + ?Sized>(
    obs: &ObservedData,
    pi: &MarginalProbs,
    gamma: &GammaStructure,
    rng: &mut R,
) -> Vec<u64> {
    let pi: Vec<f64> = pi.as_slice().iter().map(|&p| clamp_marginal(p)).collect();
    let sizes = obs.sizes();
    let successes = obs.successes();
    (0..obs.arms())
        .map(|j| {
            let mut missing = 0u64;
            for jp in (0..obs.arms()).filter(|&jp| jp != j) {
                let cond = conditional_unchecked(pi[jp], pi[j], gamma.get(jp, j));
                missing += binomial(successes[jp], cond.given_one, rng);
                missing += binomial(sizes[jp] - successes[jp], cond.given_zero, rng);
            }
            successes[j] + missing
        })
        .collect()
}

fn check_gamma(obs: &ObservedData, gamma: &GammaStructure) -> Result<()> {
    if gamma.arms() != obs.arms() {
        return Err(Error::invalid(format!(
            "gamma covers {} arms, data has {}",
            gamma.arms(),
            obs.arms()
        )));
    }
    Ok(())
}

/// One posterior predictive draw of `τ̄_l` given `π` under association `gamma`.
pub fn draw_effect_sensitivity<R: Rng + ?Sized>(
    obs: &ObservedData,
    design: &ModelMatrix,
    l: usize,
    pi: &MarginalProbs,
    gamma: &GammaStructure,
    rng: &mut R,
) -> Result<f64> {
    check_dims(obs, design)?;
    design.check_effect(l)?;
    check_gamma(obs, gamma)?;
    if pi.as_slice().len() != obs.arms() {
        return Err(Error::invalid("marginal probabilities do not match the arm count"));
    }
    let totals = impute_totals_sensitivity(obs, pi, gamma, rng);
    Ok(bayes::effect_from_totals(design, l, &totals, obs.units()))
}

/// `draws` composed draws: marginals from the Beta posterior, then the
/// conditional imputation.
pub fn sample_effect_sensitivity<R: Rng + ?Sized>(
    obs: &ObservedData,
    design: &ModelMatrix,
    l: usize,
    prior: &PriorSpec,
    gamma: &GammaStructure,
    draws: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_dims(obs, design)?;
    design.check_effect(l)?;
    check_gamma(obs, gamma)?;
    let posterior = MarginalPosterior::new(obs, prior)?;
    let units = obs.units();
    Ok((0..draws)
        .map(|_| {
            let pi = posterior.draw(rng);
            let totals = impute_totals_sensitivity(obs, &pi, gamma, rng);
            bayes::effect_from_totals(design, l, &totals, units)
        })
        .collect())
}

/// Result of a sweep over the AR(1) parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub effect: usize,
    pub level: f64,
    pub draws: usize,
    pub seed: u64,
    pub intervals: Vec<IntervalReport>,
    /// Index into `intervals` of the widest interval (first one on ties).
    pub widest_index: usize,
}

impl SweepReport {
    /// The most conservative interval of the sweep.
    pub fn widest(&self) -> &IntervalReport {
        &self.intervals[self.widest_index]
    }
}

/// Runs the AR(1) sweep. Each grid point `i` draws from its own substream of
/// `seed`, so the report does not depend on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_sweep(
    obs: &ObservedData,
    design: &ModelMatrix,
    l: usize,
    prior: &PriorSpec,
    rho_grid: &[f64],
    draws: usize,
    level: f64,
    seed: u64,
) -> Result<SweepReport> {
    if rho_grid.is_empty() {
        return Err(Error::invalid("the rho grid is empty"));
    }
    for &rho in rho_grid {
        check_unit_interval("rho", rho)?;
    }
    stats::check_level(level)?;
    bayes::check_interval_draws(draws)?;
    check_dims(obs, design)?;
    design.check_effect(l)?;

    let intervals = rho_grid
        .par_iter()
        .enumerate()
        .map(|(i, &rho)| {
            let gamma = GammaStructure::ar1(rho, obs.arms())?;
            let mut rng = rng::substream(seed, &[domain::SWEEP, i as u64]);
            interval_from_draws(obs, design, l, prior, &gamma, draws, level, seed, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut widest_index = 0;
    for (i, iv) in intervals.iter().enumerate() {
        if iv.width() > intervals[widest_index].width() {
            widest_index = i;
        }
    }
    Ok(SweepReport {
        effect: l,
        level,
        draws,
        seed,
        intervals,
        widest_index,
    })
}

#[allow(clippy::too_many_arguments)]
fn interval_from_draws(
    obs: &ObservedData,
    design: &ModelMatrix,
    l: usize,
    prior: &PriorSpec,
    gamma: &GammaStructure,
    draws: usize,
    level: f64,
    seed: u64,
    rng: &mut SimRng,
) -> Result<IntervalReport> {
    let mut samples = sample_effect_sensitivity(obs, design, l, prior, gamma, draws, rng)?;
    let (point, variance) = stats::mean_var(&samples);
    let (lower, upper) = stats::equal_tailed(&mut samples, level)?;
    let rho = match gamma.kind() {
        GammaKind::Ar1 { rho } => Some(rho),
        GammaKind::Custom => None,
    };
    Ok(IntervalReport {
        effect: l,
        method: Method::BayesSensitivity,
        point,
        variance,
        lower,
        upper,
        level,
        mc_draws: Some(draws),
        seed: Some(seed),
        rho,
    })
}

/// Credible interval under a single association structure.
#[allow(clippy::too_many_arguments)]
pub fn credible_interval_gamma(
    obs: &ObservedData,
    design: &ModelMatrix,
    l: usize,
    prior: &PriorSpec,
    gamma: &GammaStructure,
    draws: usize,
    level: f64,
    seed: u64,
) -> Result<IntervalReport> {
    stats::check_level(level)?;
    bayes::check_interval_draws(draws)?;
    let mut rng = rng::substream(seed, &[domain::SWEEP, u64::MAX]);
    interval_from_draws(obs, design, l, prior, gamma, draws, level, seed, &mut rng)
}

/// Default sweep: ρ = 0.00, 0.01, …, 0.99.
pub fn default_rho_grid() -> Vec<f64> {
    (0..100).map(|i| i as f64 / 100.0).collect()
}

/// Parses `start:end:step` (inclusive end), a comma list, or a single value.
pub fn parse_rho_grid(spec: &str) -> Result<Vec<f64>> {
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::invalid(format!("bad rho value {:?}: {e}", s.trim())))
    };
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, end, step] = parts[..] else {
            return Err(Error::invalid(format!("rho range must be start:end:step, got {spec:?}")));
        };
        let (start, end, step) = (num(start)?, num(end)?, num(step)?);
        if step.is_nan() || step <= 0.0 || end < start {
            return Err(Error::invalid(format!("empty or ill-formed rho range {spec:?}")));
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        // snap to 12 decimals so 0.3 * 3 prints as 0.9
        (0..count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect()
    } else {
        spec.split(',').filter(|s| !s.trim().is_empty()).map(num).collect::<Result<_>>()?
    };
    if grid.is_empty() {
        return Err(Error::invalid("the rho grid is empty"));
    }
    for &rho in &grid {
        check_unit_interval("rho", rho)?;
    }
    Ok(grid)
}
