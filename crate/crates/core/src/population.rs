//! The complete finite population of binary potential outcomes.
//!
//! A [`PotentialTable`] holds one row per unit and one column per arm. For
//! K ≤ 2 the same population can be written as [`CellCounts`]: the number of
//! units sharing each of the 2^J possible outcome patterns, with the pattern
//! read as a binary word whose most significant bit is arm 0.

use crate::design::ModelMatrix;
use crate::error::{Error, Result};

/// Largest factor count for which the cell-count form is supported.
pub const MAX_CELL_FACTORS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PotentialTable {
    factors: usize,
    // row-major N x J
    outcomes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellCounts {
    factors: usize,
    counts: Vec<u64>,
}

/// Arm means and factorial effects of a population.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimands {
    /// `p_j`, indexed by arm.
    pub p: Vec<f64>,
    /// `τ̄_l` for l = 1..J, stored at index `l - 1`.
    pub tau: Vec<f64>,
}

impl Estimands {
    pub fn effect(&self, l: usize) -> f64 {
        self.tau[l - 1]
    }
}

impl CellCounts {
    pub fn new(factors: usize, counts: Vec<u64>) -> Result<Self> {
        if factors == 0 || factors > MAX_CELL_FACTORS {
            return Err(Error::Unsupported(format!(
                "cell counts are only defined for 1..={MAX_CELL_FACTORS} factors, got {factors}"
            )));
        }
        let cells = 1usize << (1 << factors);
        if counts.len() != cells {
            return Err(Error::invalid(format!(
                "expected {cells} cell counts for K={factors}, got {}",
                counts.len()
            )));
        }
        Ok(Self { factors, counts })
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn word_bit(arms: usize, word: usize, arm: usize) -> u8 {
    ((word >> (arms - 1 - arm)) & 1) as u8
}

impl PotentialTable {
    /// Builds a table from unit rows; every row must have J = 2^K entries in {0, 1}.
    pub fn from_rows<R: AsRef<[u8]>>(factors: usize, rows: &[R]) -> Result<Self> {
        if factors == 0 || factors > crate::design::MAX_FACTORS {
            return Err(Error::invalid(format!("unsupported factor count {factors}")));
        }
        if rows.is_empty() {
            return Err(Error::invalid("a population needs at least one unit"));
        }
        let arms = 1usize << factors;
        let mut outcomes = Vec::with_capacity(rows.len() * arms);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != arms {
                return Err(Error::invalid(format!(
                    "unit {i} has {} outcomes, expected {arms}",
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|&&y| y > 1) {
                return Err(Error::invalid(format!("unit {i} has non-binary outcome {bad}")));
            }
            outcomes.extend_from_slice(row);
        }
        Ok(Self { factors, outcomes })
    }

    /// Expands cell counts into unit rows, in ascending word order.
    pub fn from_cell_counts(counts: &CellCounts) -> Result<Self> {
        let total = counts.total();
        if total == 0 {
            return Err(Error::invalid("cell counts sum to zero"));
        }
        let arms = 1usize << counts.factors;
        let mut outcomes = Vec::with_capacity(total as usize * arms);
        for (word, &count) in counts.counts.iter().enumerate() {
            for _ in 0..count {
                outcomes.extend((0..arms).map(|arm| word_bit(arms, word, arm)));
            }
        }
        Ok(Self {
            factors: counts.factors,
            outcomes,
        })
    }

    pub fn to_cell_counts(&self) -> Result<CellCounts> {
        if self.factors > MAX_CELL_FACTORS {
            return Err(Error::Unsupported(format!(
                "cell counts need 2^(2^K) cells; K={} is too large",
                self.factors
            )));
        }
        let arms = self.arms();
        let mut counts = vec![0u64; 1 << arms];
        for row in self.rows() {
            let word = row.iter().fold(0usize, |w, &y| (w << 1) | y as usize);
            counts[word] += 1;
        }
        CellCounts::new(self.factors, counts)
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    pub fn arms(&self) -> usize {
        1 << self.factors
    }

    pub fn units(&self) -> usize {
        self.outcomes.len() / self.arms()
    }

    pub fn row(&self, i: usize) -> &[u8] {
        let j = self.arms();
        &self.outcomes[i * j..(i + 1) * j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.outcomes.chunks_exact(self.arms())
    }

    /// `N_j`, the number of units with outcome 1 under arm `j`.
    pub fn arm_successes(&self) -> Vec<u64> {
        let mut n = vec![0u64; self.arms()];
        for row in self.rows() {
            for (acc, &y) in n.iter_mut().zip(row) {
                *acc += u64::from(y);
            }
        }
        n
    }

    /// Arm means `p_j = N_j / N`.
    pub fn arm_means(&self) -> Vec<f64> {
        let n = self.units() as f64;
        self.arm_successes()
            .into_iter()
            .map(|s| s as f64 / n)
            .collect()
    }

    fn check_design(&self, design: &ModelMatrix) -> Result<()> {
        if design.factors() != self.factors {
            return Err(Error::invalid(format!(
                "population has K={} but the model matrix has K={}",
                self.factors,
                design.factors()
            )));
        }
        Ok(())
    }

    pub fn estimands(&self, design: &ModelMatrix) -> Result<Estimands> {
        self.check_design(design)?;
        let p = self.arm_means();
        let tau = (1..self.arms()).map(|l| design.contrast(l, &p)).collect();
        Ok(Estimands { p, tau })
    }

    /// Unit-level effects `τ_il = 2^{-(K-1)} h_l' Y_i`.
    pub fn individual_effects(&self, design: &ModelMatrix, l: usize) -> Result<Vec<f64>> {
        self.check_design(design)?;
        design.check_effect(l)?;
        let h = design.column(l);
        let scale = design.effect_scale();
        Ok(self
            .rows()
            .map(|row| {
                let dot: i64 = h.iter().zip(row).map(|(&h, &y)| i64::from(h) * i64::from(y)).sum();
                scale * dot as f64
            })
            .collect())
    }

    /// `S_j² = N p_j (1 - p_j) / (N - 1)`.
    pub fn arm_variance(&self, arm: usize) -> f64 {
        let n = self.units() as f64;
        if self.units() < 2 {
            return 0.0;
        }
        let p = self.arm_means()[arm];
        n * p * (1.0 - p) / (n - 1.0)
    }

    /// `S_j²` from its definition as a sum of squared deviations.
    pub fn arm_variance_direct(&self, arm: usize) -> f64 {
        let ys: Vec<f64> = self.rows().map(|r| f64::from(r[arm])).collect();
        crate::stats::mean_var(&ys).1
    }

    /// `S²(τ̄_l)`, the variance of the unit-level effects.
    pub fn effect_variance(&self, design: &ModelMatrix, l: usize) -> Result<f64> {
        let effects = self.individual_effects(design, l)?;
        Ok(crate::stats::mean_var(&effects).1)
    }

    /// Randomization variance of the factorial-effect estimator under
    /// complete randomization with arm sizes `sizes`.
    pub fn sampling_variance(&self, design: &ModelMatrix, sizes: &[u64], l: usize) -> Result<f64> {
        self.check_design(design)?;
        design.check_effect(l)?;
        check_arm_sizes(sizes, self.arms(), self.units())?;
        let scale = design.effect_scale();
        let between: f64 = sizes
            .iter()
            .enumerate()
            .map(|(j, &n)| self.arm_variance(j) / n as f64)
            .sum();
        let spread = self.effect_variance(design, l)?;
        Ok(scale * scale * between - spread / self.units() as f64)
    }

    /// `S_{jj'}`, the finite-population covariance of two arms' outcomes.
    pub fn pairwise_covariance(&self, j: usize, jp: usize) -> Result<f64> {
        if j == jp {
            return Err(Error::invalid("pairwise covariance needs two distinct arms"));
        }
        if j >= self.arms() || jp >= self.arms() {
            return Err(Error::invalid("arm index out of range"));
        }
        if self.units() < 2 {
            return Ok(0.0);
        }
        let p = self.arm_means();
        let s: f64 = self
            .rows()
            .map(|r| (f64::from(r[j]) - p[j]) * (f64::from(r[jp]) - p[jp]))
            .sum();
        Ok(s / (self.units() - 1) as f64)
    }
}

pub(crate) fn check_arm_sizes(sizes: &[u64], arms: usize, units: usize) -> Result<()> {
    if sizes.len() != arms {
        return Err(Error::invalid(format!(
            "expected {arms} arm sizes, got {}",
            sizes.len()
        )));
    }
    if let Some(j) = sizes.iter().position(|&n| n < 2) {
        return Err(Error::invalid(format!("arm {j} has fewer than 2 units")));
    }
    let total: u64 = sizes.iter().sum();
    if total != units as u64 {
        return Err(Error::invalid(format!(
            "arm sizes sum to {total}, population has {units} units"
        )));
    }
    Ok(())
}
