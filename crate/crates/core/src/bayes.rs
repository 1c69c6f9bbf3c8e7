//! Finite-population Bayesian inference under independent potential outcomes.
//!
//! Each arm's success probability gets a conjugate Beta prior. A posterior
//! predictive draw of a factorial effect is made in two steps: draw the arm
//! probabilities from their Beta posteriors, then impute the `N - n_j`
//! missing outcomes of every arm as one binomial count and evaluate the
//! contrast on the completed population totals.

use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::assignment::ObservedData;
use crate::design::ModelMatrix;
use crate::error::{Error, Result};
use crate::neyman::{check_dims, IntervalReport, Method};
use crate::stats;

/// Fewest posterior draws accepted for a credible interval.
pub const MIN_INTERVAL_DRAWS: usize = 1000;

/// Draws are held in memory for the quantiles; cap them at 800 MB.
pub const MAX_INTERVAL_DRAWS: usize = 100_000_000;

pub(crate) fn check_interval_draws(draws: usize) -> Result<()> {
    if draws < MIN_INTERVAL_DRAWS {
        return Err(Error::invalid(format!(
            "at least {MIN_INTERVAL_DRAWS} draws are needed, got {draws}"
        )));
    }
    if draws > MAX_INTERVAL_DRAWS {
        return Err(Error::ResourceLimit(format!(
            "{draws} draws exceed the limit of {MAX_INTERVAL_DRAWS}"
        )));
    }
    Ok(())
}

/// Beta(α_j, β_j) hyperparameters, one pair per arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl PriorSpec {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() || alpha.is_empty() {
            return Err(Error::invalid("prior needs one alpha and one beta per arm"));
        }
        if alpha.iter().chain(&beta).any(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(Error::invalid("prior hyperparameters must be finite and > 0"));
        }
        Ok(Self { alpha, beta })
    }

    /// The same Beta(a, b) prior on every arm.
    pub fn symmetric(arms: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a; arms], vec![b; arms])
    }

    /// Beta(1, 1) on every arm.
    pub fn uniform(arms: usize) -> Self {
        Self {
            alpha: vec![1.0; arms],
            beta: vec![1.0; arms],
        }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    fn check(&self, obs: &ObservedData) -> Result<()> {
        if self.alpha.len() != obs.arms() {
            return Err(Error::invalid(format!(
                "prior covers {} arms, data has {}",
                self.alpha.len(),
                obs.arms()
            )));
        }
        Ok(())
    }

    /// Posterior parameters `(α_j + n_j^obs, β_j + n_j - n_j^obs)`.
    fn posterior(&self, obs: &ObservedData) -> impl Iterator<Item = (f64, f64)> + '_ {
        let sizes = obs.sizes().to_vec();
        let successes = obs.successes().to_vec();
        (0..sizes.len()).map(move |j| {
            (
                self.alpha[j] + successes[j] as f64,
                self.beta[j] + (sizes[j] - successes[j]) as f64,
            )
        })
    }
}

/// Arm success probabilities `π_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalProbs(Vec<f64>);

impl MarginalProbs {
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if pi.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("marginal probabilities must lie in [0, 1]"));
        }
        Ok(Self(pi))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Reusable Beta posteriors for repeated draws on one dataset.
#[derive(Debug, Clone)]
pub struct MarginalPosterior {
    arms: Vec<Beta<f64>>,
}

impl MarginalPosterior {
    pub fn new(obs: &ObservedData, prior: &PriorSpec) -> Result<Self> {
        prior.check(obs)?;
        let arms = prior
            .posterior(obs)
            .map(|(a, b)| Beta::new(a, b).map_err(|e| Error::invalid(format!("beta posterior: {e}"))))
            .collect::<Result<_>>()?;
        Ok(Self { arms })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> MarginalProbs {
        MarginalProbs(self.arms.iter().map(|d| d.sample(rng)).collect())
    }
}

/// One draw of `π` from the conjugate posterior.
pub fn draw_marginals<R: Rng + ?Sized>(
    obs: &ObservedData,
    prior: &PriorSpec,
    rng: &mut R,
) -> Result<MarginalProbs> {
    Ok(MarginalPosterior::new(obs, prior)?.draw(rng))
}

pub(crate) fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("p checked in (0, 1)").sample(rng)
}

/// Completed per-arm success totals `n_j^obs + B_j`, with
/// `B_j ~ Binomial(N - n_j, π_j)` independently.
pub fn impute_totals_indep<R: Rng + ?Sized>(obs: &ObservedData, pi: &MarginalProbs, rng: &mut R) -> Vec<u64> {
    let units = obs.units();
    obs.sizes()
        .iter()
        .zip(obs.successes())
        .zip(&pi.0)
        .map(|((&n, &s), &p)| s + binomial(units - n, p, rng))
        .collect()
}

/// `2^{-(K-1)} N^{-1} Σ_j h_lj T_j` for completed totals `T`.
pub fn effect_from_totals(design: &ModelMatrix, l: usize, totals: &[u64], units: u64) -> f64 {
    let dot: i64 = design
        .column(l)
        .iter()
        .zip(totals)
        .map(|(&h, &t)| i64::from(h) * t as i64)
        .sum();
    design.effect_scale() * dot as f64 / units as f64
}

/// One posterior predictive draw of `τ̄_l` given `π`.
pub fn draw_effect_indep<R: Rng + ?Sized>(
    obs: &ObservedData,
    design: &ModelMatrix,
    l: usize,
    pi: &MarginalProbs,
    rng: &mut R,
) -> Result<f64> {
    check_dims(obs, design)?;
    design.check_effect(l)?;
    if pi.0.len() != obs.arms() {
        return Err(Error::invalid("marginal probabilities do not match the arm count"));
    }
    let totals = impute_totals_indep(obs, pi, rng);
    Ok(effect_from_totals(design, l, &totals, obs.units()))
}

/// `draws` composed posterior predictive draws of `τ̄_l`.
pub fn sample_effect_indep<R: Rng + ?Sized>(
    obs: &ObservedData,
    design: &ModelMatrix,
    l: usize,
    prior: &PriorSpec,
    draws: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_dims(obs, design)?;
    design.check_effect(l)?;
    let posterior = MarginalPosterior::new(obs, prior)?;
    let units = obs.units();
    Ok((0..draws)
        .map(|_| {
            let pi = posterior.draw(rng);
            let totals = impute_totals_indep(obs, &pi, rng);
            effect_from_totals(design, l, &totals, units)
        })
        .collect())
}

/// `n'_j = n_j + α_j + β_j` and `p̂'_j = (n_j^obs + α_j) / n'_j`.
fn shrunk(obs: &ObservedData, prior: &PriorSpec) -> Vec<(f64, f64)> {
    (0..obs.arms())
        .map(|j| {
            let n_prime = obs.sizes()[j] as f64 + prior.alpha[j] + prior.beta[j];
            let p_prime = (obs.successes()[j] as f64 + prior.alpha[j]) / n_prime;
            (n_prime, p_prime)
        })
        .collect()
}

/// Closed-form posterior predictive mean of `τ̄_l`.
pub fn posterior_mean_closed(
    obs: &ObservedData,
    design: &ModelMatrix,
    l: usize,
    prior: &PriorSpec,
) -> Result<f64> {
    check_dims(obs, design)?;
    design.check_effect(l)?;
    prior.check(obs)?;
    let units = obs.units() as f64;
    let completed: Vec<f64> = shrunk(obs, prior)
        .into_iter()
        .enumerate()
        .map(|(j, (_, p_prime))| {
            let n = obs.sizes()[j] as f64;
            (obs.successes()[j] as f64 + (units - n) * p_prime) / units
        })
        .collect();
    Ok(design.contrast(l, &completed))
}

/// Closed-form posterior predictive variance of `τ̄_l`; the same for every effect.
pub fn posterior_variance_closed(obs: &ObservedData, prior: &PriorSpec) -> Result<f64> {
    prior.check(obs)?;
    let units = obs.units() as f64;
    let scale = 2f64.powi(-2 * (obs.factors() as i32 - 1));
    let sum: f64 = shrunk(obs, prior)
        .into_iter()
        .enumerate()
        .map(|(j, (n_prime, p_prime))| {
            let n = obs.sizes()[j] as f64;
            (units - n + n_prime) / units * (1.0 - n / units) * p_prime * (1.0 - p_prime) / (n_prime + 1.0)
        })
        .sum();
    Ok(scale * sum)
}

/// Per-arm terms of the large-sample posterior variance,
/// `2^{-2(K-1)} (1 - n_j/N) p̂_j (1 - p̂_j) / (n_j - 1)`.
pub fn approx_posterior_variance_terms(obs: &ObservedData) -> Vec<f64> {
    let units = obs.units() as f64;
    let scale = 2f64.powi(-2 * (obs.factors() as i32 - 1));
    obs.proportions()
        .iter()
        .zip(obs.sizes())
        .map(|(&p, &n)| scale * (1.0 - n as f64 / units) * p * (1.0 - p) / (n - 1) as f64)
        .collect()
}

/// Large-sample form of the posterior variance (weak priors).
pub fn approx_posterior_variance(obs: &ObservedData) -> f64 {
    approx_posterior_variance_terms(obs).iter().sum()
}

/// Equal-tailed credible interval from composed posterior predictive draws.
///
/// `point` and `variance` carry the closed-form posterior mean and variance;
/// the bounds are sample quantiles of the draws.
pub fn credible_interval_indep<R: Rng + ?Sized>(
    obs: &ObservedData,
    design: &ModelMatrix,
    l: usize,
    prior: &PriorSpec,
    draws: usize,
    level: f64,
    rng: &mut R,
) -> Result<IntervalReport> {
    stats::check_level(level)?;
    check_interval_draws(draws)?;
    let mut samples = sample_effect_indep(obs, design, l, prior, draws, rng)?;
    let (lower, upper) = stats::equal_tailed(&mut samples, level)?;
    Ok(IntervalReport {
        effect: l,
        method: Method::BayesIndep,
        point: posterior_mean_closed(obs, design, l, prior)?,
        variance: posterior_variance_closed(obs, prior)?,
        lower,
        upper,
        level,
        mc_draws: Some(draws),
        seed: None,
        rho: None,
    })
}
