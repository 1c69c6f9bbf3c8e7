//! Completely randomized assignment and the observed data it reveals.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::PotentialTable;

/// Upper bound on the number of assignments [`enumerate_assignments`] will walk.
pub const MAX_ENUMERATION: u128 = 10_000_000;

/// Arm label of every unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    arm_of: Vec<usize>,
}

impl Assignment {
    pub fn arm_of(&self) -> &[usize] {
        &self.arm_of
    }

    pub fn arm_sizes(&self, arms: usize) -> Vec<u64> {
        let mut sizes = vec![0u64; arms];
        for &a in &self.arm_of {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Arm sizes and success counts after randomization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedData {
    factors: usize,
    sizes: Vec<u64>,
    successes: Vec<u64>,
}

impl ObservedData {
    pub fn new(factors: usize, sizes: Vec<u64>, successes: Vec<u64>) -> Result<Self> {
        if factors == 0 || factors > crate::design::MAX_FACTORS {
            return Err(Error::invalid(format!("unsupported factor count {factors}")));
        }
        let arms = 1usize << factors;
        if sizes.len() != arms || successes.len() != arms {
            return Err(Error::invalid(format!(
                "K={factors} needs {arms} arm sizes and success counts, got {} and {}",
                sizes.len(),
                successes.len()
            )));
        }
        for (j, (&n, &s)) in sizes.iter().zip(&successes).enumerate() {
            if n < 2 {
                return Err(Error::invalid(format!("arm {} has n={n}; need at least 2", j + 1)));
            }
            if s > n {
                return Err(Error::invalid(format!(
                    "arm {} has {s} successes out of {n} units",
                    j + 1
                )));
            }
        }
        Ok(Self {
            factors,
            sizes,
            successes,
        })
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    pub fn arms(&self) -> usize {
        self.sizes.len()
    }

    /// `n_j`
    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    /// `n_j^obs`
    pub fn successes(&self) -> &[u64] {
        &self.successes
    }

    /// Total number of units N.
    pub fn units(&self) -> u64 {
        self.sizes.iter().sum()
    }

    /// Observed arm proportions `p̂_j`.
    pub fn proportions(&self) -> Vec<f64> {
        self.sizes
            .iter()
            .zip(&self.successes)
            .map(|(&n, &s)| s as f64 / n as f64)
            .collect()
    }
}

fn check_sizes(sizes: &[u64], units: usize) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::invalid("no arms given"));
    }
    if let Some(j) = sizes.iter().position(|&n| n < 2) {
        return Err(Error::invalid(format!("arm {} has fewer than 2 units", j + 1)));
    }
    let total: u64 = sizes.iter().sum();
    if total != units as u64 {
        return Err(Error::invalid(format!(
            "arm sizes sum to {total}, expected {units} units"
        )));
    }
    Ok(())
}

/// Draws a completely randomized assignment: a uniform shuffle of the unit
/// indices, cut into consecutive blocks of the requested sizes.
pub fn draw_assignment<R: Rng + ?Sized>(sizes: &[u64], units: usize, rng: &mut R) -> Result<Assignment> {
    check_sizes(sizes, units)?;
    let mut order: Vec<usize> = (0..units).collect();
    order.shuffle(rng);
    let mut arm_of = vec![0usize; units];
    let mut start = 0usize;
    for (arm, &n) in sizes.iter().enumerate() {
        for &unit in &order[start..start + n as usize] {
            arm_of[unit] = arm;
        }
        start += n as usize;
    }
    Ok(Assignment { arm_of })
}

/// Observed arm sizes and success counts of `table` under `assignment`.
pub fn observe(table: &PotentialTable, assignment: &Assignment) -> Result<ObservedData> {
    if assignment.arm_of.len() != table.units() {
        return Err(Error::invalid(format!(
            "assignment covers {} units, population has {}",
            assignment.arm_of.len(),
            table.units()
        )));
    }
    let arms = table.arms();
    if let Some(&bad) = assignment.arm_of.iter().find(|&&a| a >= arms) {
        return Err(Error::invalid(format!("arm label {bad} out of range")));
    }
    let mut sizes = vec![0u64; arms];
    let mut successes = vec![0u64; arms];
    for (i, &arm) in assignment.arm_of.iter().enumerate() {
        sizes[arm] += 1;
        successes[arm] += u64::from(table.row(i)[arm]);
    }
    ObservedData::new(table.factors(), sizes, successes)
}

/// `N! / Π n_j!`, or `None` on overflow.
pub fn multinomial_coefficient(sizes: &[u64]) -> Option<u128> {
    let mut acc: u128 = 1;
    let mut placed: u128 = 0;
    for &n in sizes {
        // multiply in C(placed + n, n) one factor at a time; each partial
        // product is itself a binomial coefficient, so the division is exact
        for i in 1..=u128::from(n) {
            placed += 1;
            acc = acc.checked_mul(placed)? / i;
        }
    }
    Some(acc)
}

/// Every distinct assignment with the given arm sizes, each exactly once.
///
/// Walks the multiset permutations of the arm labels in lexicographic order.
pub fn enumerate_assignments(sizes: &[u64]) -> Result<AssignmentIter> {
    let units: u64 = sizes.iter().sum();
    check_sizes(sizes, units as usize)?;
    match multinomial_coefficient(sizes) {
        Some(c) if c <= MAX_ENUMERATION => {}
        _ => {
            return Err(Error::ResourceLimit(format!(
                "more than {MAX_ENUMERATION} assignments for arm sizes {sizes:?}"
            )))
        }
    }
    let labels = sizes
        .iter()
        .enumerate()
        .flat_map(|(arm, &n)| std::iter::repeat_n(arm, n as usize))
        .collect();
    Ok(AssignmentIter {
        next: Some(labels),
    })
}

pub struct AssignmentIter {
    next: Option<Vec<usize>>,
}

impl Iterator for AssignmentIter {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if next_permutation(&mut succ) {
            self.next = Some(succ);
        }
        Some(Assignment { arm_of: current })
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = v.iter().rposition(|&x| x > v[i]).expect("pivot has a successor");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}
