//! Indicators computed from an extremal table: the set J of ranks
//! realised by a whole generator and its log-density, power ratios
//! against the universal constants, component counts, largest scale
//! factors, additivity and bound audits, Weyl fits, and propagation
//! checks.
//!
//! The trichotomy output is finite-range evidence only. A finite table
//! cannot decide between the three asymptotic behaviours, so the report
//! carries trends and attained minima, never a verdict.

use crate::error::{Error, Result};
use crate::extremal::{reconstruct, ExtremalTable, SplitRecord, TieMode};
use crate::spectrum::{unit_ball_volume, Bc, Spectrum};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

/// Dimension-dependent universal constants in the power variable.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Constants {
    pub dimension: u32,
    /// Volume of the unit d-ball.
    pub omega_d: f64,
    /// `(2 pi)^d / omega_d`: the conjectured two-sided bound on
    /// `powers[k] / k`.
    pub polya_power: f64,
    /// `(d/(d+2))^{d/2} (2 pi)^d / omega_d`: proven Dirichlet lower bound.
    pub bly_power: f64,
    /// `((d+2)/2) (2 pi)^d / omega_d`: proven Neumann upper bound.
    pub kroger_power: f64,
}

impl Constants {
    pub fn new(dimension: u32) -> Self {
        let omega_d = unit_ball_volume(dimension);
        let polya_power = (2.0 * PI).powi(dimension as i32) / omega_d;
        let d = dimension as f64;
        Constants {
            dimension,
            omega_d,
            polya_power,
            bly_power: (d / (d + 2.0)).powf(d / 2.0) * polya_power,
            kroger_power: (d + 2.0) / 2.0 * polya_power,
        }
    }
}

/// Per-rank indicator bundle.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DiagnosticsRow {
    pub k: usize,
    pub power_ratio: f64,
    pub is_generator: bool,
    pub nu: usize,
    pub r_max: f64,
    pub largest_part_rank: usize,
}

/// Ranks whose extremiser is a whole generator, in increasing order.
pub fn generator_ranks(table: &ExtremalTable) -> Vec<usize> {
    (1..=table.k_max())
        .filter(|&k| matches!(table.splits[k], SplitRecord::Whole { .. }))
        .collect()
}

/// Log-density `F_J(x) = log(N_J(x)) / log(x)` of an increasing rank set.
/// Returns 0 when no rank of J lies below x (the log of 0 is left
/// undefined by the definition; 0 keeps plots total).
pub fn log_density(j_set: &[usize], x: f64) -> Result<f64> {
    if x.is_nan() || x <= 1.0 {
        return Err(Error::invalid(format!("log-density needs x > 1, got {x}")));
    }
    let n = j_set.partition_point(|&j| j as f64 <= x);
    if n == 0 {
        return Ok(0.0);
    }
    Ok((n as f64).ln() / x.ln())
}

/// Largest scale factor of the rank-`k` extremiser and the rank of the
/// part attaining it.
pub fn largest_scale(table: &ExtremalTable, k: usize) -> Result<(f64, usize)> {
    table.check_rank(k)?;
    let p = reconstruct(table, k)?;
    // Parts are sorted by decreasing rank, hence decreasing scale.
    let top = &p.parts[0];
    Ok((top.scale, top.rank))
}

/// Component counts for every rank, and their histogram.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ComponentCounts {
    /// `nu[k]` for ranks `1..=k_max`; index 0 is padding.
    pub nu: Vec<usize>,
    pub histogram: BTreeMap<usize, usize>,
    pub max_nu: usize,
}

pub fn component_counts(table: &ExtremalTable) -> ComponentCounts {
    let k_max = table.k_max();
    let mut nu = vec![0usize; k_max + 1];
    let mut histogram = BTreeMap::new();
    let mut max_nu = 0;
    for k in 1..=k_max {
        nu[k] = match table.splits[k] {
            SplitRecord::Whole { .. } => 1,
            SplitRecord::Split { j } => nu[j] + nu[k - j],
        };
        *histogram.entry(nu[k]).or_insert(0) += 1;
        max_nu = max_nu.max(nu[k]);
    }
    ComponentCounts {
        nu,
        histogram,
        max_nu,
    }
}

/// All per-rank rows in one linear pass. The split recursion gives the
/// component count and the largest leaf power without expanding any
/// partition explicitly.
pub fn diagnostics_rows(table: &ExtremalTable) -> Vec<DiagnosticsRow> {
    let k_max = table.k_max();
    let mut nu = vec![0usize; k_max + 1];
    let mut leaf_power = vec![0.0f64; k_max + 1];
    let mut leaf_rank = vec![0usize; k_max + 1];
    let mut rows = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        match table.splits[k] {
            SplitRecord::Whole { .. } => {
                nu[k] = 1;
                leaf_power[k] = table.powers[k];
                leaf_rank[k] = k;
            }
            SplitRecord::Split { j } => {
                nu[k] = nu[j] + nu[k - j];
                // Breaking leaf-power ties toward the larger rank keeps
                // the reported rank deterministic.
                if leaf_power[j] > leaf_power[k - j] {
                    leaf_power[k] = leaf_power[j];
                    leaf_rank[k] = leaf_rank[j];
                } else if leaf_power[j] < leaf_power[k - j] {
                    leaf_power[k] = leaf_power[k - j];
                    leaf_rank[k] = leaf_rank[k - j];
                } else {
                    leaf_power[k] = leaf_power[k - j];
                    leaf_rank[k] = leaf_rank[j].max(leaf_rank[k - j]);
                }
            }
        }
        rows.push(DiagnosticsRow {
            k,
            power_ratio: table.powers[k] / k as f64,
            is_generator: matches!(table.splits[k], SplitRecord::Whole { .. }),
            nu: nu[k],
            r_max: crate::extremal::nth_root(leaf_power[k] / table.powers[k], table.dimension),
            largest_part_rank: leaf_rank[k],
        });
    }
    rows
}

/// Outcome of auditing the universal per-rank bounds. A violation here is
/// a defect signal in the build, not a mathematical finding.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundsAudit {
    pub bc: Bc,
    pub bound: f64,
    pub ranks_checked: usize,
    pub violations: Vec<BoundViolation>,
    pub violation_count: usize,
    /// Smallest margin to the bound, and where it occurs.
    pub min_slack: f64,
    pub min_slack_rank: usize,
    pub max_slack: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundViolation {
    pub k: usize,
    pub ratio: f64,
}

const MAX_REPORTED: usize = 100;

pub fn check_bounds(table: &ExtremalTable) -> BoundsAudit {
    let constants = Constants::new(table.dimension);
    let bound = match table.bc {
        Bc::Dirichlet => constants.bly_power,
        Bc::Neumann => constants.kroger_power,
    };
    let mut violations = Vec::new();
    let mut violation_count = 0usize;
    let mut min_slack = f64::INFINITY;
    let mut min_slack_rank = 1usize;
    let mut max_slack = f64::NEG_INFINITY;
    for k in 1..=table.k_max() {
        let ratio = table.powers[k] / k as f64;
        let slack = match table.bc {
            Bc::Dirichlet => ratio - bound,
            Bc::Neumann => bound - ratio,
        };
        if slack < min_slack {
            min_slack = slack;
            min_slack_rank = k;
        }
        max_slack = max_slack.max(slack);
        if slack < 0.0 {
            violation_count += 1;
            if violations.len() < MAX_REPORTED {
                violations.push(BoundViolation { k, ratio });
            }
        }
    }
    BoundsAudit {
        bc: table.bc,
        bound,
        ranks_checked: table.k_max(),
        violations,
        violation_count,
        min_slack,
        min_slack_rank,
        max_slack,
    }
}

/// Sub/super-additivity audit over rank pairs.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AdditivityReport {
    pub pairs_checked: u64,
    pub exhaustive: bool,
    pub violations: Vec<AdditivityViolation>,
    pub violation_count: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct AdditivityViolation {
    pub j: usize,
    pub k: usize,
    pub split_power: f64,
    pub table_power: f64,
}

/// Threshold below which every pair is checked; above it, pairs are
/// sampled with a seeded generator.
pub const EXHAUSTIVE_PAIR_LIMIT: usize = 2000;
pub const SAMPLED_PAIRS: u64 = 1_000_000;

/// Relative slack allowed in float mode; integer mode is checked exactly.
pub const ADDITIVITY_REL_TOL: f64 = 1e-9;

struct SplitMix64(u64);

impl SplitMix64 {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

pub fn check_additivity(table: &ExtremalTable, seed: u64) -> AdditivityReport {
    let k_max = table.k_max();
    let mut violations = Vec::new();
    let mut violation_count = 0usize;
    let mut pairs_checked = 0u64;

    let mut check_pair = |j: usize, k: usize| {
        let split = table.powers[j] + table.powers[k - j];
        let whole = table.powers[k];
        let violated = match (&table.exact_powers, table.bc) {
            (Some(keys), Bc::Dirichlet) => keys[j] + keys[k - j] < keys[k],
            (Some(keys), Bc::Neumann) => keys[j] + keys[k - j] > keys[k],
            (None, Bc::Dirichlet) => split < whole * (1.0 - ADDITIVITY_REL_TOL),
            (None, Bc::Neumann) => split > whole * (1.0 + ADDITIVITY_REL_TOL),
        };
        if violated {
            violation_count += 1;
            if violations.len() < MAX_REPORTED {
                violations.push(AdditivityViolation {
                    j,
                    k,
                    split_power: split,
                    table_power: whole,
                });
            }
        }
    };

    let exhaustive = k_max <= EXHAUSTIVE_PAIR_LIMIT;
    if exhaustive {
        for k in 2..=k_max {
            for j in 1..=k / 2 {
                check_pair(j, k);
                pairs_checked += 1;
            }
        }
    } else {
        let mut rng = SplitMix64(seed);
        for _ in 0..SAMPLED_PAIRS {
            let k = 2 + rng.below(k_max as u64 - 1) as usize;
            let j = 1 + rng.below((k / 2) as u64) as usize;
            check_pair(j, k);
            pairs_checked += 1;
        }
    }

    AdditivityReport {
        pairs_checked,
        exhaustive,
        violations,
        violation_count,
    }
}

/// Least-squares fit of `eigenvalue^{d/2} ~ c1 k + c2 k^{(d-1)/d}` over a
/// rank range of the generator spectrum.
#[derive(Debug, Clone, serde::Serialize)]
pub struct WeylFit {
    pub c1: f64,
    pub c2: f64,
    /// Relative L2 residual of the fit; large values flag spectra that do
    /// not follow a two-term Weyl shape at all.
    pub residual: f64,
    pub k_lo: usize,
    pub k_hi: usize,
}

/// Residual above which a spectrum is reported as non-Weyl.
pub const WEYL_RESIDUAL_FLAG: f64 = 0.05;

pub fn weyl_fit(spectrum: &Spectrum, k_lo: usize, k_hi: usize) -> Result<WeylFit> {
    if k_lo < 1 || k_hi < k_lo {
        return Err(Error::invalid("empty fit range"));
    }
    if k_hi - k_lo + 1 < 100 {
        return Err(Error::invalid(
            "Weyl fit needs a range of at least 100 ranks",
        ));
    }
    let max_rank = match spectrum.generator.bc {
        Bc::Dirichlet => spectrum.len(),
        Bc::Neumann => spectrum.len().saturating_sub(1),
    };
    if k_hi > max_rank {
        return Err(Error::invalid(format!(
            "fit range ends at {k_hi} but the spectrum only has ranks up to {max_rank}"
        )));
    }
    let d = spectrum.generator.dimension as f64;
    let beta = (d - 1.0) / d;

    let value_at = |k: usize| match spectrum.generator.bc {
        Bc::Dirichlet => spectrum.values[k - 1],
        Bc::Neumann => spectrum.values[k],
    };

    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0f64, 0.0, 0.0, 0.0, 0.0);
    for k in k_lo..=k_hi {
        let f1 = k as f64;
        let f2 = (k as f64).powf(beta);
        let y = value_at(k).powf(d / 2.0);
        s11 += f1 * f1;
        s12 += f1 * f2;
        s22 += f2 * f2;
        b1 += f1 * y;
        b2 += f2 * y;
    }
    let det = s11 * s22 - s12 * s12;
    if det <= f64::EPSILON * s11 * s22 {
        return Err(Error::numerical("degenerate design matrix in Weyl fit"));
    }
    let c1 = (b1 * s22 - b2 * s12) / det;
    let c2 = (s11 * b2 - s12 * b1) / det;

    let (mut rss, mut yss) = (0.0f64, 0.0f64);
    for k in k_lo..=k_hi {
        let f1 = k as f64;
        let f2 = (k as f64).powf(beta);
        let y = value_at(k).powf(d / 2.0);
        rss += (y - c1 * f1 - c2 * f2).powi(2);
        yss += y * y;
    }
    Ok(WeylFit {
        c1,
        c2,
        residual: (rss / yss).sqrt(),
        k_lo,
        k_hi,
    })
}

/// Whether the rank-`k` ratio propagates: `powers[n k] = n powers[k]`,
/// exactly in integer mode and to 1e-12 relative otherwise. This holds
/// for every n whenever `powers[k]/k` attains the infimum over the table.
pub fn propagation_check(table: &ExtremalTable, k: usize, n: usize) -> Result<bool> {
    table.check_rank(k)?;
    if n == 0 {
        return Err(Error::invalid("propagation factor n must be at least 1"));
    }
    let nk = k
        .checked_mul(n)
        .filter(|&nk| nk <= table.k_max())
        .ok_or_else(|| {
            Error::invalid(format!("n*k = {n}*{k} exceeds the table range {}", table.k_max()))
        })?;
    match &table.exact_powers {
        Some(keys) => Ok(keys[nk] == (n as u64) * keys[k]),
        None => {
            let lhs = table.powers[nk];
            let rhs = n as f64 * table.powers[k];
            Ok((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()))
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PropagationSample {
    pub k: usize,
    pub n: usize,
    pub holds: bool,
}

/// Finite-range evidence relating the table to the three possible
/// asymptotic behaviours.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TrichotomyEvidence {
    pub k_max: usize,
    pub j_count: usize,
    pub j_max: Option<usize>,
    /// `F_J` sampled on a geometric grid up to `k_max`.
    pub log_density_curve: Vec<(f64, f64)>,
    pub log_density_at_k_max: f64,
    pub polya_power: f64,
    /// Infimum of `powers[k]/k` over the table and where it is attained.
    pub min_ratio: f64,
    pub min_ratio_over_polya: f64,
    pub ranks_attaining_min: Vec<usize>,
    pub ranks_attaining_min_count: usize,
    pub r_max_at_k_max: f64,
    /// Largest r_max over the top half of the table: values near 1 mean
    /// the generator keeps reappearing as the dominant component.
    pub r_max_top_half_max: f64,
    pub note: String,
}

pub fn trichotomy_report(table: &ExtremalTable) -> TrichotomyEvidence {
    let k_max = table.k_max();
    let constants = Constants::new(table.dimension);
    let j_set = generator_ranks(table);
    let rows = diagnostics_rows(table);

    let mut min_ratio = f64::INFINITY;
    for row in &rows {
        min_ratio = min_ratio.min(row.power_ratio);
    }
    let tol = match table.tie_mode {
        TieMode::Exact => 0.0,
        TieMode::Float { rel_tol } => rel_tol,
    };
    let mut ranks_attaining_min = Vec::new();
    let mut attained_count = 0usize;
    for row in &rows {
        if row.power_ratio <= min_ratio * (1.0 + tol) {
            attained_count += 1;
            if ranks_attaining_min.len() < MAX_REPORTED {
                ranks_attaining_min.push(row.k);
            }
        }
    }

    let mut log_density_curve = Vec::new();
    if k_max >= 2 {
        let points = 64usize;
        for i in 1..=points {
            let x = (k_max as f64).powf(i as f64 / points as f64);
            if x > 1.0 {
                let f = log_density(&j_set, x).unwrap_or(0.0);
                log_density_curve.push((x, f));
            }
        }
    }
    let log_density_at_k_max = if k_max >= 2 {
        log_density(&j_set, k_max as f64).unwrap_or(0.0)
    } else {
        0.0
    };

    let r_max_at_k_max = rows.last().map(|r| r.r_max).unwrap_or(1.0);
    let r_max_top_half_max = rows
        .iter()
        .skip(k_max / 2)
        .map(|r| r.r_max)
        .fold(0.0f64, f64::max);

    TrichotomyEvidence {
        k_max,
        j_count: j_set.len(),
        j_max: j_set.last().copied(),
        log_density_curve,
        log_density_at_k_max,
        polya_power: constants.polya_power,
        min_ratio,
        min_ratio_over_polya: min_ratio / constants.polya_power,
        ranks_attaining_min,
        ranks_attaining_min_count: attained_count,
        r_max_at_k_max,
        r_max_top_half_max,
        note: "finite-range evidence only; no finite table decides the conjecture".into(),
    }
}

/// Everything the diagnose step emits as JSON.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DiagnosticsReport {
    pub constants: Constants,
    pub bc: Bc,
    pub dimension: u32,
    pub k_max: usize,
    pub generators: Vec<String>,
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tie_rel_tol: Option<f64>,
    pub j_set: Vec<usize>,
    pub j_count: usize,
    pub rows: Vec<DiagnosticsRow>,
    pub histogram: BTreeMap<usize, usize>,
    pub bounds_audit: BoundsAudit,
    pub additivity_audit: AdditivityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weyl_fit: Option<WeylFit>,
    pub weyl_non_weyl_flag: Option<bool>,
    pub propagation_samples: Vec<PropagationSample>,
    pub trichotomy_evidence: TrichotomyEvidence,
}

pub fn diagnostics_report(
    table: &ExtremalTable,
    weyl: Option<WeylFit>,
    seed: u64,
) -> DiagnosticsReport {
    let rows = diagnostics_rows(table);
    let j_set = generator_ranks(table);
    let counts = component_counts(table);
    let trichotomy = trichotomy_report(table);

    // Propagation samples at the first rank attaining the running
    // minimum: the ratio there must propagate to every multiple.
    let mut propagation_samples = Vec::new();
    if let Some(&k_star) = trichotomy.ranks_attaining_min.first() {
        let mut n = 2usize;
        while n * k_star <= table.k_max() && propagation_samples.len() < 20 {
            let holds = propagation_check(table, k_star, n).unwrap_or(false);
            propagation_samples.push(PropagationSample { k: k_star, n, holds });
            n += 1;
        }
    }

    let (mode, tie_rel_tol) = match table.tie_mode {
        TieMode::Exact => ("exact".to_string(), None),
        TieMode::Float { rel_tol } => ("float".to_string(), Some(rel_tol)),
    };

    DiagnosticsReport {
        constants: Constants::new(table.dimension),
        bc: table.bc,
        dimension: table.dimension,
        k_max: table.k_max(),
        generators: table.generator_labels.clone(),
        mode,
        tie_rel_tol,
        j_set,
        j_count: trichotomy.j_count,
        rows,
        histogram: counts.histogram,
        bounds_audit: check_bounds(table),
        additivity_audit: check_additivity(table, seed),
        weyl_non_weyl_flag: weyl.as_ref().map(|w| w.residual > WEYL_RESIDUAL_FLAG),
        weyl_fit: weyl,
        propagation_samples,
        trichotomy_evidence: trichotomy,
    }
}

impl DiagnosticsReport {
    pub fn has_audit_violations(&self) -> bool {
        self.bounds_audit.violation_count > 0 || self.additivity_audit.violation_count > 0
    }

    /// Plotting CSV, one row per rank.
    pub fn write_per_k_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,ratio,is_generator,nu,r_max,largest_part_rank")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:.16e},{},{},{:.16e},{}",
                r.k,
                r.power_ratio,
                if r.is_generator { 1 } else { 0 },
                r.nu,
                r.r_max,
                r.largest_part_rank
            )?;
        }
        Ok(())
    }

    pub fn write_log_density_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,log_density")?;
        for (x, f) in &self.trichotomy_evidence.log_density_curve {
            writeln!(w, "{x:.16e},{f:.16e}")?;
        }
        Ok(())
    }

    pub fn write_histogram_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "nu,count")?;
        for (nu, count) in &self.histogram {
            writeln!(w, "{nu},{count}")?;
        }
        Ok(())
    }
}
