//! Complete, sorted eigenvalue sequences of unit-volume generator
//! domains: boxes with rational squared side ratios, the planar disk, and
//! externally supplied lists.
//!
//! Box eigenvalues are enumerated on an integer key lattice so that
//! sorting and downstream equality tests are exact; the key of a mode
//! `(m_1, ..., m_d)` is `sum_i m_i^2 q_i (K / p_i)` with `K = lcm(p_i)`,
//! and the real eigenvalue is `pi^2 * S / K * key` with
//! `S = (prod p_i/q_i)^{1/d}`. Disk eigenvalues come from Bessel zeros
//! and carry no exact keys.

use crate::bessel::{bessel_prime_zeros, bessel_zeros, BesselZeroList};
use crate::error::{Error, Result};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

/// Boundary condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bc {
    Dirichlet,
    Neumann,
}

impl fmt::Display for Bc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bc::Dirichlet => write!(f, "dirichlet"),
            Bc::Neumann => write!(f, "neumann"),
        }
    }
}

impl std::str::FromStr for Bc {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(Bc::Dirichlet),
            "neumann" => Ok(Bc::Neumann),
            other => Err(Error::invalid(format!(
                "unknown boundary condition '{other}' (expected dirichlet or neumann)"
            ))),
        }
    }
}

/// Reduced positive rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::invalid("side ratios must be positive rationals"));
        }
        let g = gcd(num, den);
        Ok(Ratio {
            num: num / g,
            den: den / g,
        })
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

pub(crate) fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn lcm(a: u64, b: u64) -> Option<u64> {
    (a / gcd(a, b)).checked_mul(b)
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorKind {
    /// d-dimensional box; `side_ratios[i]` is the square of the i-th side
    /// ratio, so sides are proportional to `sqrt(p_i / q_i)`.
    Box { side_ratios: Vec<Ratio> },
    /// Planar disk (d = 2 only).
    Disk,
    /// Eigenvalues loaded from a spectrum file.
    Explicit { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub bc: Bc,
    pub dimension: u32,
    pub label: String,
}

impl GeneratorSpec {
    pub fn square(bc: Bc) -> Self {
        GeneratorSpec {
            kind: GeneratorKind::Box {
                side_ratios: vec![Ratio { num: 1, den: 1 }, Ratio { num: 1, den: 1 }],
            },
            bc,
            dimension: 2,
            label: "square".into(),
        }
    }

    /// Planar rectangle with sides in proportion `a : b`.
    pub fn rectangle(a: u64, b: u64, bc: Bc) -> Result<Self> {
        let r1 = Ratio::new(a.checked_mul(a).ok_or_else(too_big)?, 1)?;
        let r2 = Ratio::new(b.checked_mul(b).ok_or_else(too_big)?, 1)?;
        Ok(GeneratorSpec {
            kind: GeneratorKind::Box {
                side_ratios: vec![r1, r2],
            },
            bc,
            dimension: 2,
            label: format!("rect_{a}_{b}"),
        })
    }

    pub fn disk(bc: Bc) -> Self {
        GeneratorSpec {
            kind: GeneratorKind::Disk,
            bc,
            dimension: 2,
            label: "disk".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(Error::invalid("generator dimension must be at least 2"));
        }
        match &self.kind {
            GeneratorKind::Box { side_ratios } => {
                if side_ratios.len() != self.dimension as usize {
                    return Err(Error::invalid(format!(
                        "box needs exactly {} side ratios, got {}",
                        self.dimension,
                        side_ratios.len()
                    )));
                }
            }
            GeneratorKind::Disk => {
                if self.dimension != 2 {
                    return Err(Error::invalid("the disk generator requires d = 2"));
                }
            }
            GeneratorKind::Explicit { path } => {
                if !path.exists() {
                    return Err(Error::invalid(format!(
                        "explicit spectrum file {} does not exist",
                        path.display()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn too_big() -> Error {
    Error::invalid("side ratio overflows the exact key width")
}

/// Exact integer keys attached to a box spectrum.
#[derive(Debug, Clone)]
pub struct ExactKeys {
    /// `value[i] = scale * keys[i]`.
    pub keys: Vec<u64>,
    pub scale: f64,
    /// `scale = pi^2 * num / den` when `S` is rational, which is what
    /// makes multi-generator exact tables possible.
    pub scale_rational: Option<(u64, u64)>,
}

/// Sorted, multiplicity-expanded eigenvalue list of a unit-volume
/// generator, complete below `complete_below`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub generator: GeneratorSpec,
    pub values: Vec<f64>,
    pub exact: Option<ExactKeys>,
    pub complete_below: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Eigenvalue counting function `N(lambda)`, only valid up to the
    /// completeness certificate. The Neumann count includes index 0.
    pub fn counting(&self, lambda: f64) -> Result<usize> {
        if !lambda.is_finite() || lambda > self.complete_below {
            return Err(Error::invalid(format!(
                "counting function queried at {lambda}, above the completeness \
                 certificate {}",
                self.complete_below
            )));
        }
        Ok(self.values.partition_point(|&v| v <= lambda))
    }
}

/// Weyl-law cutoff for a target eigenvalue count at unit volume, with a
/// 1.3 safety margin; the one-term law under-predicts Dirichlet counts.
fn weyl_cutoff(dimension: u32, min_count: usize) -> f64 {
    let wd = unit_ball_volume(dimension);
    (2.0 * PI).powi(2) * (min_count as f64 / wd).powf(2.0 / dimension as f64) * 1.3
}

pub(crate) fn unit_ball_volume(dimension: u32) -> f64 {
    let even = dimension.is_multiple_of(2);
    let mut v = if even { 1.0 } else { 2.0 };
    let mut d = if even { 2 } else { 3 };
    while d <= dimension {
        v *= 2.0 * PI / d as f64;
        d += 2;
    }
    if dimension == 0 {
        1.0
    } else {
        v
    }
}

/// Eigenvalues of the unit-volume box described by `spec`.
///
/// Dirichlet modes have all `m_i >= 1`, Neumann modes all `m_i >= 0`.
/// Enumeration sweeps the key lattice below a Weyl cutoff, doubling the
/// cutoff until at least `min_count` eigenvalues are present.
pub fn box_spectrum(spec: &GeneratorSpec, min_count: usize) -> Result<Spectrum> {
    spec.validate()?;
    let side_ratios = match &spec.kind {
        GeneratorKind::Box { side_ratios } => side_ratios.clone(),
        _ => return Err(Error::invalid("box_spectrum needs a box generator")),
    };
    if min_count == 0 {
        return Err(Error::invalid("eigenvalue count must be at least 1"));
    }
    let d = spec.dimension;

    // K = lcm of the ratio numerators; coefficient of m_i^2 in the key.
    let mut k_lcm = 1u64;
    for r in &side_ratios {
        k_lcm = lcm(k_lcm, r.num).ok_or_else(too_big)?;
    }
    let mut coeffs = Vec::with_capacity(side_ratios.len());
    for r in &side_ratios {
        coeffs.push(r.den.checked_mul(k_lcm / r.num).ok_or_else(too_big)?);
    }

    // S = (prod p_i/q_i)^{1/d}; exact rational when the reduced product
    // numerator and denominator are both perfect d-th powers.
    let mut prod_num = 1u64;
    let mut prod_den = 1u64;
    for r in &side_ratios {
        prod_num = prod_num.checked_mul(r.num).ok_or_else(too_big)?;
        prod_den = prod_den.checked_mul(r.den).ok_or_else(too_big)?;
    }
    let g = gcd(prod_num, prod_den);
    prod_num /= g;
    prod_den /= g;
    let s_float = (prod_num as f64 / prod_den as f64).powf(1.0 / d as f64);
    let scale_rational = match (integer_root(prod_num, d), integer_root(prod_den, d)) {
        (Some(a), Some(b)) => {
            let gg = gcd(a, b.checked_mul(k_lcm).ok_or_else(too_big)?);
            Some((a / gg, b * k_lcm / gg))
        }
        _ => None,
    };
    let scale = PI * PI * s_float / k_lcm as f64;

    let min_mode = match spec.bc {
        Bc::Dirichlet => 1u64,
        Bc::Neumann => 0u64,
    };

    let mut key_cutoff = (weyl_cutoff(d, min_count) / scale).ceil() as u64;
    loop {
        let mut keys = Vec::new();
        sweep_lattice(&coeffs, min_mode, key_cutoff, 0, 0, &mut keys)?;
        if keys.len() >= min_count {
            keys.sort_unstable();
            let values: Vec<f64> = keys.iter().map(|&k| scale * k as f64).collect();
            let complete_below = scale * key_cutoff as f64;
            return Ok(Spectrum {
                generator: spec.clone(),
                values,
                exact: Some(ExactKeys {
                    keys,
                    scale,
                    scale_rational,
                }),
                complete_below,
            });
        }
        key_cutoff = key_cutoff.checked_mul(2).ok_or_else(|| {
            Error::invalid(format!(
                "eigenvalue count {min_count} overflows the exact key width"
            ))
        })?;
    }
}

fn sweep_lattice(
    coeffs: &[u64],
    min_mode: u64,
    cutoff: u64,
    dim: usize,
    partial: u64,
    out: &mut Vec<u64>,
) -> Result<()> {
    if dim == coeffs.len() {
        out.push(partial);
        return Ok(());
    }
    let c = coeffs[dim];
    let mut m = min_mode;
    loop {
        let term = m
            .checked_mul(m)
            .and_then(|mm| mm.checked_mul(c))
            .ok_or_else(too_big)?;
        let next = match partial.checked_add(term) {
            Some(v) if v <= cutoff => v,
            _ => break,
        };
        sweep_lattice(coeffs, min_mode, cutoff, dim + 1, next, out)?;
        m += 1;
    }
    Ok(())
}

/// Integer d-th root when exact.
fn integer_root(n: u64, d: u32) -> Option<u64> {
    if n == 0 {
        return None;
    }
    let guess = (n as f64).powf(1.0 / d as f64).round() as u64;
    (guess.saturating_sub(1)..=guess + 1).find(|&c| c > 0 && c.checked_pow(d) == Some(n))
}

/// Eigenvalues of the unit-area disk (radius `1/sqrt(pi)`).
///
/// Dirichlet eigenvalues are `pi * j_{nu,k}^2`, Neumann eigenvalues `0`
/// plus `pi * (j'_{nu,k})^2`; the multiplicity is 1 for `nu = 0` and 2
/// for `nu >= 1`. Zero lists are requested up to `x_max = sqrt(Lambda/pi)`;
/// orders `nu >= x_max` contribute nothing because the first zero always
/// exceeds `nu`, which is what certifies completeness below `Lambda`.
pub fn disk_spectrum(bc: Bc, min_count: usize) -> Result<Spectrum> {
    if min_count == 0 {
        return Err(Error::invalid("eigenvalue count must be at least 1"));
    }
    let spec = GeneratorSpec::disk(bc);
    let mut cutoff = weyl_cutoff(2, min_count);
    loop {
        let values = disk_values_below(bc, cutoff)?;
        if values.len() >= min_count {
            return Ok(Spectrum {
                generator: spec,
                values,
                exact: None,
                complete_below: cutoff,
            });
        }
        cutoff *= 2.0;
    }
}

fn disk_values_below(bc: Bc, cutoff: f64) -> Result<Vec<f64>> {
    let x_max = (cutoff / PI).sqrt();
    let max_order = x_max.ceil() as u32;

    let lists: Vec<BesselZeroList> = (0..=max_order)
        .into_par_iter()
        .map(|nu| match bc {
            Bc::Dirichlet => bessel_zeros(nu, x_max),
            Bc::Neumann => bessel_prime_zeros(nu, x_max),
        })
        .collect::<Result<_>>()?;

    let mut values = Vec::new();
    if bc == Bc::Neumann {
        values.push(0.0);
    }
    for list in &lists {
        let mult = if list.order == 0 { 1 } else { 2 };
        for &z in list.zeros() {
            let lambda = PI * z * z;
            if lambda <= cutoff {
                for _ in 0..mult {
                    values.push(lambda);
                }
            }
        }
    }
    values.sort_unstable_by(f64::total_cmp);
    Ok(values)
}

/// Zero lists backing a disk spectrum, for the optional debug dump.
pub fn disk_zero_lists(bc: Bc, min_count: usize) -> Result<Vec<BesselZeroList>> {
    let spectrum = disk_spectrum(bc, min_count)?;
    let x_max = (spectrum.complete_below / PI).sqrt();
    (0..=x_max.ceil() as u32)
        .map(|nu| match bc {
            Bc::Dirichlet => bessel_zeros(nu, x_max),
            Bc::Neumann => bessel_prime_zeros(nu, x_max),
        })
        .collect()
}

/// Write a spectrum in the interchange format: a header line followed by
/// one eigenvalue per line at 17 significant digits.
pub fn save_spectrum<W: Write>(spectrum: &Spectrum, mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "# bc={} d={} label={} complete_below={:.16e}",
        spectrum.generator.bc,
        spectrum.generator.dimension,
        spectrum.generator.label,
        spectrum.complete_below
    )?;
    for v in &spectrum.values {
        writeln!(w, "{v:.16e}")?;
    }
    Ok(())
}

pub fn save_spectrum_to(spectrum: &Spectrum, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    save_spectrum(spectrum, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// CSV export, columns `k,eigenvalue`; ranks start at 1 for Dirichlet and
/// at 0 for Neumann.
pub fn save_spectrum_csv<W: Write>(spectrum: &Spectrum, mut w: W) -> std::io::Result<()> {
    writeln!(w, "k,eigenvalue")?;
    let first = match spectrum.generator.bc {
        Bc::Dirichlet => 1usize,
        Bc::Neumann => 0usize,
    };
    for (i, v) in spectrum.values.iter().enumerate() {
        writeln!(w, "{},{:.16e}", first + i, v)?;
    }
    Ok(())
}

/// Load and validate a spectrum file.
///
/// The header line is optional; when it is missing, the boundary
/// condition and dimension must be supplied by the caller and the
/// completeness certificate defaults to the last listed value.
pub fn load_spectrum(path: &Path, fallback: Option<(Bc, u32)>) -> Result<Spectrum> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut bc = None;
    let mut dimension = None;
    let mut label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "explicit".into());
    let mut header_complete_below = None;

    let mut values = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            for token in rest.split_whitespace() {
                let Some((key, value)) = token.split_once('=') else {
                    continue;
                };
                match key {
                    "bc" => bc = Some(value.parse::<Bc>()?),
                    "d" => {
                        dimension = Some(value.parse::<u32>().map_err(|_| {
                            Error::format(path, line_no, format!("bad dimension '{value}'"))
                        })?)
                    }
                    "label" => label = value.to_string(),
                    "complete_below" => {
                        header_complete_below = Some(value.parse::<f64>().map_err(|_| {
                            Error::format(path, line_no, format!("bad complete_below '{value}'"))
                        })?)
                    }
                    _ => {}
                }
            }
            continue;
        }
        let v: f64 = trimmed
            .parse()
            .map_err(|_| Error::format(path, line_no, format!("malformed value '{trimmed}'")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::format(path, line_no, "negative or non-finite eigenvalue"));
        }
        if let Some(&prev) = values.last() {
            if v < prev {
                return Err(Error::format(path, line_no, "nonmonotone at this line"));
            }
        }
        values.push(v);
    }

    if values.is_empty() {
        return Err(Error::format(path, 1, "empty spectrum"));
    }

    let (bc, dimension) = match (bc, dimension, fallback) {
        (Some(b), Some(d), _) => (b, d),
        (Some(b), None, Some((_, d))) => (b, d),
        (None, Some(d), Some((b, _))) => (b, d),
        (None, None, Some((b, d))) => (b, d),
        _ => {
            return Err(Error::format(
                path,
                1,
                "missing bc/d header and no boundary condition supplied",
            ))
        }
    };

    match bc {
        Bc::Dirichlet => {
            if values[0] == 0.0 {
                return Err(Error::format(path, 1, "Dirichlet spectrum contains 0"));
            }
        }
        Bc::Neumann => {
            if values[0] != 0.0 {
                return Err(Error::format(path, 1, "Neumann spectrum must start with 0"));
            }
            if values.len() > 1 && values[1] <= 0.0 {
                return Err(Error::format(
                    path,
                    2,
                    "Neumann spectrum of a connected generator needs values[1] > 0",
                ));
            }
        }
    }

    let last = *values.last().unwrap();
    let complete_below = match header_complete_below {
        Some(cb) if cb >= last => cb,
        Some(cb) => {
            return Err(Error::format(
                path,
                1,
                format!("complete_below={cb} is below the largest listed value {last}"),
            ))
        }
        None => last,
    };

    Ok(Spectrum {
        generator: GeneratorSpec {
            kind: GeneratorKind::Explicit { path: path.to_path_buf() },
            bc,
            dimension,
            label,
        },
        values,
        exact: None,
        complete_below,
    })
}

/// Build a spectrum for any generator kind, loading explicit files and
/// enumerating boxes or the disk as needed.
pub fn build_spectrum(spec: &GeneratorSpec, min_count: usize) -> Result<Spectrum> {
    spec.validate()?;
    match &spec.kind {
        GeneratorKind::Box { .. } => box_spectrum(spec, min_count),
        GeneratorKind::Disk => disk_spectrum(spec.bc, min_count),
        GeneratorKind::Explicit { path } => {
            let mut s = load_spectrum(path, Some((spec.bc, spec.dimension)))?;
            if s.generator.bc != spec.bc || s.generator.dimension != spec.dimension {
                return Err(Error::invalid(format!(
                    "spectrum file {} is bc={} d={}, requested bc={} d={}",
                    path.display(),
                    s.generator.bc,
                    s.generator.dimension,
                    spec.bc,
                    spec.dimension
                )));
            }
            s.generator.label = spec.label.clone();
            Ok(s)
        }
    }
}
