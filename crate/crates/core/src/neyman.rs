//! Randomization-based point estimates, the conservative variance estimator,
//! and Wald confidence intervals.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::assignment::ObservedData;
use crate::design::ModelMatrix;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Neyman,
    BayesIndep,
    BayesSensitivity,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Neyman => "neyman",
            Method::BayesIndep => "bayes-indep",
            Method::BayesSensitivity => "bayes-sensitivity",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neyman" => Ok(Method::Neyman),
            "bayes-indep" => Ok(Method::BayesIndep),
            "bayes-sensitivity" => Ok(Method::BayesSensitivity),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

/// One interval estimate for one factorial effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub effect: usize,
    pub method: Method,
    pub point: f64,
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_draws: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

impl IntervalReport {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// `2^{-(K-1)} h_l' p̂`.
pub fn point_estimate(obs: &ObservedData, design: &ModelMatrix, l: usize) -> Result<f64> {
    check_dims(obs, design)?;
    design.check_effect(l)?;
    Ok(design.contrast(l, &obs.proportions()))
}

/// `2^{-2(K-1)} Σ_j p̂_j (1 - p̂_j) / (n_j - 1)`; the same for every effect.
pub fn variance_estimate(obs: &ObservedData) -> f64 {
    let scale = 2f64.powi(-2 * (obs.factors() as i32 - 1));
    let sum: f64 = obs
        .proportions()
        .iter()
        .zip(obs.sizes())
        .map(|(&p, &n)| p * (1.0 - p) / (n - 1) as f64)
        .sum();
    scale * sum
}

pub fn confidence_interval(
    obs: &ObservedData,
    design: &ModelMatrix,
    l: usize,
    level: f64,
) -> Result<IntervalReport> {
    let z = stats::two_sided_z(level)?;
    let point = point_estimate(obs, design, l)?;
    let variance = variance_estimate(obs);
    let half = z * variance.sqrt();
    Ok(IntervalReport {
        effect: l,
        method: Method::Neyman,
        point,
        variance,
        lower: point - half,
        upper: point + half,
        level,
        mc_draws: None,
        seed: None,
        rho: None,
    })
}

pub(crate) fn check_dims(obs: &ObservedData, design: &ModelMatrix) -> Result<()> {
    if obs.factors() != design.factors() {
        return Err(Error::invalid(format!(
            "observed data has K={} but the model matrix has K={}",
            obs.factors(),
            design.factors()
        )));
    }
    Ok(())
}
