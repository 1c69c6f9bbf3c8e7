//! Model matrix of a 2^K factorial design.
//!
//! Column 0 is the all-ones column. Columns 1..=K are the main-effect
//! columns: column `k` starts with `2^(K-k)` entries of -1, then `2^(K-k)`
//! entries of +1, and that block repeats. The remaining columns are the
//! entry-wise products of main-effect columns over every subset of at least
//! two factors, subsets ordered by cardinality and then lexicographically.
//!
//! Row `j` of columns 1..=K is the treatment combination `z_{j+1}`; arms are
//! 0-based throughout this crate.

use crate::error::{Error, Result};

/// Largest supported factor count (J = 1024).
pub const MAX_FACTORS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelMatrix {
    factors: usize,
    // column-major, J columns of length J
    entries: Vec<i8>,
}

impl ModelMatrix {
    pub fn new(factors: usize) -> Result<Self> {
        if !(1..=MAX_FACTORS).contains(&factors) {
            return Err(Error::invalid(format!(
                "factor count must lie in 1..={MAX_FACTORS}, got {factors}"
            )));
        }
        let arms = 1usize << factors;
        let mut entries = Vec::with_capacity(arms * arms);

        entries.extend(std::iter::repeat_n(1i8, arms));
        for k in 1..=factors {
            entries.extend((0..arms).map(|row| main_effect_entry(factors, k, row)));
        }
        for subset in interaction_subsets(factors) {
            entries.extend((0..arms).map(|row| {
                subset
                    .iter()
                    .map(|&k| main_effect_entry(factors, k, row))
                    .product::<i8>()
            }));
        }
        debug_assert_eq!(entries.len(), arms * arms);
        Ok(Self { factors, entries })
    }

    /// Number of factors K.
    pub fn factors(&self) -> usize {
        self.factors
    }

    /// Number of treatment combinations J = 2^K.
    pub fn arms(&self) -> usize {
        1 << self.factors
    }

    /// Column `l` (0..J) as a slice indexed by arm.
    pub fn column(&self, l: usize) -> &[i8] {
        let j = self.arms();
        &self.entries[l * j..(l + 1) * j]
    }

    pub fn entry(&self, row: usize, col: usize) -> i8 {
        self.entries[col * self.arms() + row]
    }

    /// `2^{-(K-1)}`, the scale applied to every contrast.
    pub fn effect_scale(&self) -> f64 {
        2f64.powi(-(self.factors as i32 - 1))
    }

    /// Checks that `l` names a factorial effect (1..J).
    pub fn check_effect(&self, l: usize) -> Result<()> {
        if l == 0 || l >= self.arms() {
            return Err(Error::invalid(format!(
                "effect index must lie in 1..{}, got {l}",
                self.arms()
            )));
        }
        Ok(())
    }

    /// `2^{-(K-1)} h_l' v` for an arm-indexed vector `v`.
    pub fn contrast(&self, l: usize, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.arms());
        let dot: f64 = self
            .column(l)
            .iter()
            .zip(values)
            .map(|(&h, &v)| f64::from(h) * v)
            .sum();
        self.effect_scale() * dot
    }

    /// The J treatment combinations, each a K-vector of ±1.
    pub fn treatment_combinations(&self) -> Vec<Vec<i8>> {
        (0..self.arms())
            .map(|row| (1..=self.factors).map(|k| self.entry(row, k)).collect())
            .collect()
    }

    /// Row-major copy of the matrix, handy for display and tests.
    pub fn rows(&self) -> Vec<Vec<i8>> {
        (0..self.arms())
            .map(|row| (0..self.arms()).map(|col| self.entry(row, col)).collect())
            .collect()
    }
}

fn main_effect_entry(factors: usize, k: usize, row: usize) -> i8 {
    if (row >> (factors - k)) & 1 == 0 {
        -1
    } else {
        1
    }
}

/// Subsets of `{1..=K}` with at least two elements, by cardinality then
/// lexicographic order. Entry `k'-1` defines column `K + k'`.
pub fn interaction_subsets(factors: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for size in 2..=factors {
        let mut combo: Vec<usize> = (1..=size).collect();
        loop {
            out.push(combo.clone());
            // advance to the next size-combination in lexicographic order
            let mut i = size;
            while i > 0 && combo[i - 1] == factors - size + i {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            combo[i - 1] += 1;
            for m in i..size {
                combo[m] = combo[m - 1] + 1;
            }
        }
    }
    out
}
