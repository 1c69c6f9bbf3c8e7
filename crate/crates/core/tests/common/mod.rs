#![allow(dead_code)]

use std::path::PathBuf;

use factorial_bayes::assignment::{enumerate_assignments, observe};
use factorial_bayes::neyman;
use factorial_bayes::{ModelMatrix, PotentialTable};
use num_rational::Ratio;
use rand::Rng;

pub type Q = Ratio<i128>;

pub fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets")
}

/// Random K-factor science table with N units; each unit gets its own
/// success probability so arms are correlated in varied ways.
pub fn random_table<R: Rng>(factors: usize, units: usize, rng: &mut R) -> PotentialTable {
    let arms = 1 << factors;
    let rows: Vec<Vec<u8>> = (0..units)
        .map(|_| {
            let p: f64 = rng.random();
            (0..arms).map(|_| u8::from(rng.random::<f64>() < p)).collect()
        })
        .collect();
    PotentialTable::from_rows(factors, &rows).unwrap()
}

fn q(n: i128) -> Q {
    Q::from_integer(n)
}

/// Everything about the randomization distribution of the effect estimator,
/// computed by brute force in exact arithmetic.
pub struct Enumerated {
    pub assignments: usize,
    /// Largest gap between a library point estimate and the rational one.
    pub library_error: f64,
    pub truth: Q,
    pub mean_estimate: Q,
    pub variance: Q,
    pub mean_neyman_variance: Q,
    /// `S²(τ̄_l)` from its definition.
    pub effect_spread: Q,
    /// Sampling variance from per-arm `S_j²` and `S²(τ̄_l)`, both by definition.
    pub formula_variance: Q,
}

pub fn enumerate(table: &PotentialTable, design: &ModelMatrix, sizes: &[u64], l: usize) -> Enumerated {
    let arms = table.arms();
    let units = table.units() as i128;
    let h: Vec<i128> = design.column(l).iter().map(|&x| i128::from(x)).collect();
    let scale = Q::new(1, 1i128 << (design.factors() - 1));
    let y = |i: usize, j: usize| i128::from(table.row(i)[j]);

    let truth = (0..arms)
        .map(|j| q(h[j]) * Q::new((0..table.units()).map(|i| y(i, j)).sum(), units))
        .sum::<Q>()
        * scale;

    let mut estimates = Vec::new();
    let mut neyman_vars = Vec::new();
    let mut library_error = 0f64;
    for a in enumerate_assignments(sizes).unwrap() {
        let mut succ = vec![0i128; arms];
        for (i, &arm) in a.arm_of().iter().enumerate() {
            succ[arm] += y(i, arm);
        }
        let phat: Vec<Q> = (0..arms).map(|j| Q::new(succ[j], sizes[j] as i128)).collect();
        let est = scale * (0..arms).map(|j| q(h[j]) * phat[j]).sum::<Q>();
        let nv = scale
            * scale
            * (0..arms)
                .map(|j| phat[j] * (q(1) - phat[j]) / q(sizes[j] as i128 - 1))
                .sum::<Q>();
        let obs = observe(table, &a).unwrap();
        let lib = neyman::point_estimate(&obs, design, l).unwrap();
        library_error = library_error.max((lib - to_f64(est)).abs());
        estimates.push(est);
        neyman_vars.push(nv);
    }
    let count = q(estimates.len() as i128);
    let mean_estimate = estimates.iter().copied().sum::<Q>() / count;
    let variance = estimates
        .iter()
        .map(|&e| (e - mean_estimate) * (e - mean_estimate))
        .sum::<Q>()
        / count;
    let mean_neyman_variance = neyman_vars.iter().copied().sum::<Q>() / count;

    let spread_of = |vals: &[Q]| {
        let m = vals.iter().copied().sum::<Q>() / q(vals.len() as i128);
        vals.iter().map(|&v| (v - m) * (v - m)).sum::<Q>() / q(vals.len() as i128 - 1)
    };
    let tau: Vec<Q> = (0..table.units())
        .map(|i| scale * (0..arms).map(|j| q(h[j] * y(i, j))).sum::<Q>())
        .collect();
    let effect_spread = spread_of(&tau);
    let arm_spread: Q = (0..arms)
        .map(|j| {
            let col: Vec<Q> = (0..table.units()).map(|i| q(y(i, j))).collect();
            spread_of(&col) / q(sizes[j] as i128)
        })
        .sum();
    let formula_variance = scale * scale * arm_spread - effect_spread / q(units);

    Enumerated {
        assignments: estimates.len(),
        library_error,
        truth,
        mean_estimate,
        variance,
        mean_neyman_variance,
        effect_spread,
        formula_variance,
    }
}

pub fn to_f64(x: Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

pub fn factorial(args: &[&str]) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_factorial"))
        .args(args)
        .env_remove("FACTORIAL_THREADS")
        .output()
        .expect("factorial binary runs")
}

/// Validates `instance` against one of the shipped report schemas.
pub fn validate(schema_file: &str, instance: &serde_json::Value) -> Result<(), String> {
    let text = std::fs::read_to_string(assets().join("schema").join(schema_file)).unwrap();
    let schema: serde_json::Value = serde_json::from_str(&text).unwrap();
    let validator = jsonschema::validator_for(&schema).map_err(|e| e.to_string())?;
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| format!("{}: {e}", e.instance_path())).collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors.join("\n"))
    }
}
