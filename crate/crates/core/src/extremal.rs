//! Extremal eigenvalue tables over families of disjoint unions of scaled
//! generator copies, and reconstruction of the extremal configurations.
//!
//! The table stores powers `lambda_k^* ^{d/2}` (Dirichlet, minimized) or
//! `mu_k^* ^{d/2}` (Neumann, maximized) at unit volume. Working in the
//! power variable makes the split identity additive: the extremiser at
//! rank `k` is either a whole generator or a disjoint union whose power
//! is exactly `powers[j] + powers[k-j]`, so the table is computed by a
//! dynamic program over split points `1 <= j <= k/2`.
//!
//! Tie rule: the generator wins exact ties and, among splits, the
//! smallest `j` wins. A split displaces the generator only on strict
//! improvement. Box families with rational squared side ratios in d = 2
//! run on exact integer keys so that ties are decided without any
//! tolerance; other inputs run on doubles with a relative tie tolerance.

use crate::error::{Error, Result};
use crate::spectrum::{gcd, lcm, Bc, Spectrum};
use rayon::prelude::*;

/// Relative tolerance used to detect generator/split ties in float mode.
pub const TIE_REL_TOL: f64 = 1e-12;

/// Inner split scans longer than this run as a chunked parallel
/// reduction; chunk boundaries are fixed so results do not depend on the
/// thread count.
const PAR_SPLIT_THRESHOLD: usize = 8192;
const PAR_CHUNK: usize = 4096;

/// Winner record for one rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitRecord {
    /// The whole generator with this index realises the rank.
    Whole { generator: usize },
    /// The extremiser splits into the extremisers of ranks `j` and `k - j`.
    Split { j: usize },
}

/// How ties were decided.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TieMode {
    Exact,
    Float { rel_tol: f64 },
}

/// Per-rank extremal powers plus the split records needed to reconstruct
/// extremal configurations. Index 0 of `powers`/`splits` is padding so
/// that rank `k` lives at index `k`.
#[derive(Debug, Clone)]
pub struct ExtremalTable {
    pub bc: Bc,
    pub dimension: u32,
    pub generator_labels: Vec<String>,
    pub powers: Vec<f64>,
    pub splits: Vec<SplitRecord>,
    /// Integer powers on a common scale, exact mode only.
    pub exact_powers: Option<Vec<u64>>,
    /// `powers[k] = exact_scale * exact_powers[k]` in exact mode.
    pub exact_scale: Option<f64>,
    pub tie_mode: TieMode,
}

impl ExtremalTable {
    pub fn k_max(&self) -> usize {
        self.powers.len() - 1
    }

    pub fn power(&self, k: usize) -> f64 {
        self.powers[k]
    }

    pub fn check_rank(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.k_max() {
            return Err(Error::invalid(format!(
                "rank {k} outside table range 1..={}",
                self.k_max()
            )));
        }
        Ok(())
    }
}

/// One component of a reconstructed extremiser: a generator copy
/// realising rank `rank`, scaled by `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPart {
    pub generator: usize,
    pub rank: usize,
    pub scale: f64,
}

/// Decomposition of the rank-`k` extremiser into scaled generator
/// copies; ranks sum to `k` and scaled volumes sum to 1.
#[derive(Debug, Clone)]
pub struct Partition {
    pub rank: usize,
    pub parts: Vec<PartitionPart>,
}

impl Partition {
    pub fn component_count(&self) -> usize {
        self.parts.len()
    }

    /// Kahan-summed total of `scale^d`; equals 1 up to rounding.
    pub fn total_scaled_volume(&self, dimension: u32) -> f64 {
        let mut sum = 0.0_f64;
        let mut c = 0.0_f64;
        for p in &self.parts {
            let v = p.scale.powi(dimension as i32) - c;
            let t = sum + v;
            c = (t - sum) - v;
            sum = t;
        }
        sum
    }
}

fn power_of_eigenvalue(value: f64, dimension: u32) -> f64 {
    match dimension {
        2 => value,
        4 => value * value,
        d => value.powf(d as f64 / 2.0),
    }
}

/// `x^{1/d}` with the exactly-rounded square root in the planar case.
pub(crate) fn nth_root(x: f64, dimension: u32) -> f64 {
    match dimension {
        2 => x.sqrt(),
        d => x.powf(1.0 / d as f64),
    }
}

/// Length and index-0 preconditions, shared by both arithmetic modes.
fn validate_spectra(spectra: &[Spectrum], bc: Bc, k_max: usize) -> Result<()> {
    let needed = match bc {
        Bc::Dirichlet => k_max,
        Bc::Neumann => k_max + 1,
    };
    for s in spectra {
        if s.len() < needed {
            return Err(Error::invalid(format!(
                "spectrum '{}' has {} values but k_max = {k_max} needs at least {needed}",
                s.generator.label,
                s.len()
            )));
        }
        if bc == Bc::Neumann && s.values[0] != 0.0 {
            return Err(Error::invalid(format!(
                "Neumann spectrum '{}' does not start at 0",
                s.generator.label
            )));
        }
    }
    Ok(())
}

/// Base powers `eigenvalue(k)^{d/2}` per generator, indexed by rank with
/// a padding entry at 0.
fn base_powers(spectra: &[Spectrum], bc: Bc, dimension: u32, k_max: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(spectra.len());
    for s in spectra {
        let value_at = |k: usize| match bc {
            Bc::Dirichlet => s.values[k - 1],
            Bc::Neumann => s.values[k],
        };
        let mut float = Vec::with_capacity(k_max + 1);
        float.push(0.0);
        for k in 1..=k_max {
            float.push(power_of_eigenvalue(value_at(k), dimension));
        }
        out.push(float);
    }
    out
}

/// Try to put all generators on a common exact integer power scale.
/// Possible only in d = 2 (power = eigenvalue) when every spectrum
/// carries exact keys; mixing generators additionally needs rational key
/// scales. Returns the per-generator integer base powers and the common
/// float scale.
fn try_exact_base(
    spectra: &[Spectrum],
    bc: Bc,
    dimension: u32,
    k_max: usize,
) -> Option<(Vec<Vec<u64>>, f64)> {
    if dimension != 2 {
        return None;
    }
    if !spectra.iter().all(|s| s.exact.is_some()) {
        return None;
    }
    let exacts: Vec<_> = spectra.iter().map(|s| s.exact.as_ref().unwrap()).collect();

    let (factors, scale) = if spectra.len() == 1 {
        (vec![1u64], exacts[0].scale)
    } else {
        // Common unit: scales are pi^2 * n_i / d_i; rescale keys by
        // N_i / gcd(N_i) over the common denominator D = lcm(d_i).
        let mut rats = Vec::with_capacity(exacts.len());
        for e in exacts.iter() {
            rats.push(e.scale_rational?);
        }
        let mut common_den = 1u64;
        for &(_, den) in &rats {
            common_den = lcm(common_den, den)?;
        }
        let mut numerators = Vec::with_capacity(rats.len());
        for &(num, den) in &rats {
            numerators.push(num.checked_mul(common_den / den)?);
        }
        let mut g = numerators[0];
        for &n in &numerators[1..] {
            g = gcd(g, n);
        }
        let factors: Vec<u64> = numerators.iter().map(|&n| n / g).collect();
        let scale = std::f64::consts::PI.powi(2) * g as f64 / common_den as f64;
        (factors, scale)
    };

    let mut per_gen = Vec::with_capacity(spectra.len());
    for (&factor, exact) in factors.iter().zip(exacts.iter()) {
        let key_at = |k: usize| match bc {
            Bc::Dirichlet => exact.keys[k - 1],
            Bc::Neumann => exact.keys[k],
        };
        if bc == Bc::Neumann && exact.keys[0] != 0 {
            return None;
        }
        let mut keys = Vec::with_capacity(k_max + 1);
        keys.push(0u64);
        for k in 1..=k_max {
            keys.push(key_at(k).checked_mul(factor)?);
        }
        per_gen.push(keys);
    }
    Some((per_gen, scale))
}

/// Options for table construction.
#[derive(Default)]
pub struct BuildOptions<'a> {
    /// Run on doubles even when exact keys are available.
    pub force_float: bool,
    /// Called with (ranks done, k_max) at roughly 1% granularity.
    pub progress: Option<&'a mut dyn FnMut(usize, usize)>,
}

/// Dirichlet table: `powers[k] = min(best generator, best split)`.
pub fn minimize_dirichlet(spectra: &[Spectrum], k_max: usize) -> Result<ExtremalTable> {
    build_table(spectra, k_max, BuildOptions::default())
}

/// Neumann table: `powers[k] = max(best generator, best split)`.
pub fn maximize_neumann(spectra: &[Spectrum], k_max: usize) -> Result<ExtremalTable> {
    build_table(spectra, k_max, BuildOptions::default())
}

/// Build the extremal table for either boundary condition; the direction
/// of optimization follows the spectra's shared boundary condition.
pub fn build_table(
    spectra: &[Spectrum],
    k_max: usize,
    options: BuildOptions<'_>,
) -> Result<ExtremalTable> {
    if spectra.is_empty() {
        return Err(Error::invalid("at least one generator spectrum is required"));
    }
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    let bc = spectra[0].generator.bc;
    let dimension = spectra[0].generator.dimension;
    for s in spectra {
        if s.generator.bc != bc {
            return Err(Error::invalid("mixed boundary conditions in generator family"));
        }
        if s.generator.dimension != dimension {
            return Err(Error::invalid("mixed dimensions in generator family"));
        }
    }

    validate_spectra(spectra, bc, k_max)?;
    let labels: Vec<String> = spectra.iter().map(|s| s.generator.label.clone()).collect();

    let exact = if options.force_float {
        None
    } else {
        try_exact_base(spectra, bc, dimension, k_max)
    };

    match exact {
        Some((per_gen, scale)) => {
            let (keys, splits) = run_dp_exact(&per_gen, bc, k_max, options.progress);
            let powers: Vec<f64> = keys.iter().map(|&p| scale * p as f64).collect();
            Ok(ExtremalTable {
                bc,
                dimension,
                generator_labels: labels,
                powers,
                splits,
                exact_powers: Some(keys),
                exact_scale: Some(scale),
                tie_mode: TieMode::Exact,
            })
        }
        None => {
            let base = base_powers(spectra, bc, dimension, k_max);
            let floats: Vec<&[f64]> = base.iter().map(|b| b.as_slice()).collect();
            let (powers, splits) = run_dp_float(&floats, bc, k_max, options.progress);
            Ok(ExtremalTable {
                bc,
                dimension,
                generator_labels: labels,
                powers,
                splits,
                exact_powers: None,
                exact_scale: None,
                tie_mode: TieMode::Float { rel_tol: TIE_REL_TOL },
            })
        }
    }
}

/// Best split `(value, j)` under lexicographic (value, j) order; exact
/// comparison, so the result is independent of chunking.
fn best_split_exact(powers: &[u64], k: usize, minimize: bool) -> (u64, usize) {
    let half = k / 2;
    let scan = |range: std::ops::RangeInclusive<usize>| -> (u64, usize) {
        let mut best = (if minimize { u64::MAX } else { 0u64 }, 0usize);
        for j in range {
            let v = powers[j] + powers[k - j];
            let better = if minimize { v < best.0 } else { v > best.0 };
            if better || best.1 == 0 {
                best = (v, j);
            }
        }
        best
    };
    if half >= PAR_SPLIT_THRESHOLD {
        let chunks: Vec<(usize, usize)> = (1..=half)
            .step_by(PAR_CHUNK)
            .map(|lo| (lo, (lo + PAR_CHUNK - 1).min(half)))
            .collect();
        let winners: Vec<(u64, usize)> = chunks
            .par_iter()
            .map(|&(lo, hi)| scan(lo..=hi))
            .collect();
        let mut best = winners[0];
        for &(v, j) in &winners[1..] {
            let better = if minimize { v < best.0 } else { v > best.0 };
            if better {
                best = (v, j);
            }
        }
        best
    } else {
        scan(1..=half)
    }
}

fn best_split_float(powers: &[f64], k: usize, minimize: bool) -> (f64, usize) {
    let half = k / 2;
    let scan = |range: std::ops::RangeInclusive<usize>| -> (f64, usize) {
        let mut best = (if minimize { f64::INFINITY } else { f64::NEG_INFINITY }, 0usize);
        for j in range {
            let v = powers[j] + powers[k - j];
            let better = if minimize { v < best.0 } else { v > best.0 };
            if better || best.1 == 0 {
                best = (v, j);
            }
        }
        best
    };
    if half >= PAR_SPLIT_THRESHOLD {
        let chunks: Vec<(usize, usize)> = (1..=half)
            .step_by(PAR_CHUNK)
            .map(|lo| (lo, (lo + PAR_CHUNK - 1).min(half)))
            .collect();
        let winners: Vec<(f64, usize)> = chunks
            .par_iter()
            .map(|&(lo, hi)| scan(lo..=hi))
            .collect();
        let mut best = winners[0];
        for &(v, j) in &winners[1..] {
            let better = if minimize { v < best.0 } else { v > best.0 };
            if better {
                best = (v, j);
            }
        }
        best
    } else {
        scan(1..=half)
    }
}

fn run_dp_exact(
    per_gen: &[Vec<u64>],
    bc: Bc,
    k_max: usize,
    mut progress: Option<&mut dyn FnMut(usize, usize)>,
) -> (Vec<u64>, Vec<SplitRecord>) {
    let minimize = bc == Bc::Dirichlet;
    let mut powers = vec![0u64; k_max + 1];
    let mut splits = vec![SplitRecord::Whole { generator: 0 }; k_max + 1];
    let step = (k_max / 100).max(1);

    for k in 1..=k_max {
        // Best generator first; the first index wins generator ties.
        let mut gen_val = per_gen[0][k];
        let mut gen_idx = 0usize;
        for (i, g) in per_gen.iter().enumerate().skip(1) {
            let better = if minimize { g[k] < gen_val } else { g[k] > gen_val };
            if better {
                gen_val = g[k];
                gen_idx = i;
            }
        }

        let mut value = gen_val;
        let mut record = SplitRecord::Whole { generator: gen_idx };
        if k >= 2 {
            let (sv, sj) = best_split_exact(&powers, k, minimize);
            // Strict improvement required to displace the generator.
            let displaces = if minimize { sv < gen_val } else { sv > gen_val };
            if displaces {
                value = sv;
                record = SplitRecord::Split { j: sj };
            }
        }
        powers[k] = value;
        splits[k] = record;
        if k % step == 0 {
            if let Some(p) = progress.as_deref_mut() {
                p(k, k_max);
            }
        }
    }
    (powers, splits)
}

fn run_dp_float(
    per_gen: &[&[f64]],
    bc: Bc,
    k_max: usize,
    mut progress: Option<&mut dyn FnMut(usize, usize)>,
) -> (Vec<f64>, Vec<SplitRecord>) {
    let minimize = bc == Bc::Dirichlet;
    let mut powers = vec![0f64; k_max + 1];
    let mut splits = vec![SplitRecord::Whole { generator: 0 }; k_max + 1];
    let step = (k_max / 100).max(1);

    for k in 1..=k_max {
        let mut gen_val = per_gen[0][k];
        let mut gen_idx = 0usize;
        for (i, g) in per_gen.iter().enumerate().skip(1) {
            let better = if minimize { g[k] < gen_val } else { g[k] > gen_val };
            if better {
                gen_val = g[k];
                gen_idx = i;
            }
        }

        let mut value = gen_val;
        let mut record = SplitRecord::Whole { generator: gen_idx };
        if k >= 2 {
            let (sv, sj) = best_split_float(&powers, k, minimize);
            // Values within the relative tie tolerance count as a tie,
            // which the generator wins.
            let displaces = if minimize {
                sv < gen_val * (1.0 - TIE_REL_TOL)
            } else {
                sv > gen_val * (1.0 + TIE_REL_TOL)
            };
            if displaces {
                value = sv;
                record = SplitRecord::Split { j: sj };
            }
        }
        powers[k] = value;
        splits[k] = record;
        if k % step == 0 {
            if let Some(p) = progress.as_deref_mut() {
                p(k, k_max);
            }
        }
    }
    (powers, splits)
}

/// Expand the split records at rank `k` into the full multiset of
/// generator parts with their scale factors
/// `r_q = (powers[j_q] / powers[k])^{1/d}`.
pub fn reconstruct(table: &ExtremalTable, k: usize) -> Result<Partition> {
    table.check_rank(k)?;
    let total = table.powers[k];

    let mut parts = Vec::new();
    let mut stack = vec![k];
    while let Some(rank) = stack.pop() {
        match table.splits[rank] {
            SplitRecord::Whole { generator } => {
                let scale = nth_root(table.powers[rank] / total, table.dimension);
                parts.push(PartitionPart {
                    generator,
                    rank,
                    scale,
                });
            }
            SplitRecord::Split { j } => {
                stack.push(rank - j);
                stack.push(j);
            }
        }
    }
    parts.sort_by(|a, b| {
        b.rank
            .cmp(&a.rank)
            .then(a.generator.cmp(&b.generator))
    });
    Ok(Partition { rank: k, parts })
}
