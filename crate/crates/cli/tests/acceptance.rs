//! Acceptance suite. One test per criterion; each prints a PASS line
//! with the measured quantities (visible with `--nocapture`).
//!
//! Heavy artifacts (the rank-66000 tables and the 100k square spectrum)
//! are built once and shared across criteria through `LazyLock`.

use polya_core::bessel::{bessel_prime_zeros, bessel_zeros};
use polya_core::diagnostics::{
    check_additivity, check_bounds, component_counts, generator_ranks, log_density,
    propagation_check, weyl_fit,
};
use polya_core::extremal::{build_table, BuildOptions, ExtremalTable, SplitRecord};
use polya_core::spectrum::{
    box_spectrum, disk_spectrum, Bc, GeneratorKind, GeneratorSpec, Spectrum,
};
use std::f64::consts::PI;
use std::sync::LazyLock;
use std::time::Instant;

const K_FULL: usize = 66_000;

// ---------------------------------------------------------------------
// Exact-integer series oracle for Bessel zeros.
//
// Evaluates the sign of J_nu (or J'_nu) at dyadic rationals x = p / 2^s
// with integer arithmetic only: the ascending series truncated at K
// terms is scaled by 4^{(s+1)K} K! (K+nu)! so every term is an integer,
// and the alternating tail is bounded by twice the first dropped term.
// Zeros are then located by sign scan on the integer grid and bisection,
// fully independent of the evaluation code under test.
// ---------------------------------------------------------------------
mod series_oracle {
    use num_bigint::BigInt;

    #[derive(Clone, Copy, PartialEq)]
    pub enum Kind {
        Function,
        Derivative,
    }

    /// Sign of J_nu(p / 2^s) (or of J'_nu, up to a positive factor).
    /// Panics if the truncation bound cannot certify the sign, which
    /// cannot happen at dyadic points a safe distance from a zero.
    fn sign_at(nu: u32, p: u64, s: u32, kind: Kind) -> i32 {
        if p == 0 {
            // x = 0: J_nu > 0 iff nu = 0; J'_nu(0) sign is +1 for nu = 1,
            // and the derivative series below starts negative for nu = 0.
            return match kind {
                Kind::Function => {
                    if nu == 0 {
                        1
                    } else {
                        0
                    }
                }
                Kind::Derivative => 0,
            };
        }
        let x = p as f64 / (1u64 << s) as f64;
        let terms = x.ceil() as u32 + 60;

        let p_sq = BigInt::from(p) * BigInt::from(p);
        let shift = (2 * (s + 1)) as usize;

        // T_0 = 4^{(s+1)K} * (K!/0!) * ((K+nu)!/nu!), built incrementally.
        let mut t = BigInt::from(1u32);
        for _ in 0..terms {
            t <<= shift;
        }
        for i in 1..=terms {
            t *= i;
        }
        for i in (nu + 1)..=(nu + terms) {
            t *= i;
        }

        let mut sum = BigInt::from(0u32);
        let mut term = t;
        for k in 0..=terms {
            let multiplier = match kind {
                Kind::Function => BigInt::from(1u32),
                Kind::Derivative => BigInt::from(nu as u64 + 2 * k as u64),
            };
            sum += &term * multiplier;
            if k < terms {
                // term_{k+1} = -term_k * p^2 / (4^{s+1} (k+1)(k+1+nu))
                term *= &p_sq;
                term >>= shift;
                term /= BigInt::from((k as u64 + 1) * (k as u64 + 1 + nu as u64));
                term = -term;
            }
        }

        // Alternating tail bound: twice the first dropped term (its ratio
        // to the previous one is far below 1/2 at k = K by construction).
        let mut tail = term.magnitude().clone();
        tail *= p_sq.magnitude();
        tail >>= shift;
        tail /= (terms as u64 + 1) * (terms as u64 + 1 + nu as u64);
        if kind == Kind::Derivative {
            tail *= nu as u64 + 2 * terms as u64 + 2;
        }
        tail <<= 1;

        assert!(
            sum.magnitude() > &tail,
            "oracle sign ambiguous at nu={nu}, p={p}, s={s}"
        );
        match sum.sign() {
            num_bigint::Sign::Minus => -1,
            num_bigint::Sign::NoSign => 0,
            num_bigint::Sign::Plus => 1,
        }
    }

    /// First `count` zeros (of J_nu or J'_nu), each from a bisection to
    /// interval width 2^-36 (~1.5e-11), so the midpoint is within ~8e-12.
    pub fn zeros(nu: u32, kind: Kind, count: usize) -> Vec<f64> {
        let mut found = Vec::with_capacity(count);
        // Every zero exceeds nu, and at x = nu the functions are
        // sign-definite (J'_0 alone vanishes there, at the excluded
        // origin), so the integer scan starts at m = nu.
        let mut m = nu as u64;
        let mut prev_sign = sign_at(nu, m, 0, kind);
        while found.len() < count {
            m += 1;
            let sign = sign_at(nu, m, 0, kind);
            assert!(sign != 0, "oracle hit an exact zero at integer {m}");
            if prev_sign != 0 && sign != prev_sign {
                found.push(bisect(nu, kind, m - 1, m, prev_sign));
            }
            prev_sign = sign;
        }
        found
    }

    fn bisect(nu: u32, kind: Kind, lo_int: u64, hi_int: u64, lo_sign: i32) -> f64 {
        // Dyadic endpoints share the scale 2^s.
        let mut s = 0u32;
        let mut lo = lo_int;
        let mut hi = hi_int;
        for _ in 0..36 {
            s += 1;
            lo <<= 1;
            hi <<= 1;
            let mid = (lo + hi) / 2;
            if sign_at(nu, mid, s, kind) == lo_sign {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) as f64 / 2.0 / (1u64 << s) as f64
    }
}

// ---------------------------------------------------------------------
// Shared fixtures.
// ---------------------------------------------------------------------

struct Tables {
    square_d: ExtremalTable,
    square_n: ExtremalTable,
    rect_d: ExtremalTable,
    disk_d: ExtremalTable,
}

fn table_of(spectrum: Spectrum, k_max: usize) -> ExtremalTable {
    build_table(&[spectrum], k_max, BuildOptions::default()).unwrap()
}

static FULL: LazyLock<Tables> = LazyLock::new(|| {
    let t0 = Instant::now();
    let square_d = table_of(
        box_spectrum(&GeneratorSpec::square(Bc::Dirichlet), K_FULL).unwrap(),
        K_FULL,
    );
    let square_n = table_of(
        box_spectrum(&GeneratorSpec::square(Bc::Neumann), K_FULL + 1).unwrap(),
        K_FULL,
    );
    let rect_d = table_of(
        box_spectrum(
            &GeneratorSpec::rectangle(1, 5, Bc::Dirichlet).unwrap(),
            K_FULL,
        )
        .unwrap(),
        K_FULL,
    );
    let disk_d = table_of(disk_spectrum(Bc::Dirichlet, K_FULL).unwrap(), K_FULL);
    eprintln!("[fixtures] four rank-{K_FULL} tables in {:.1?}", t0.elapsed());
    Tables {
        square_d,
        square_n,
        rect_d,
        disk_d,
    }
});

static SQUARE_2000: LazyLock<(ExtremalTable, ExtremalTable)> = LazyLock::new(|| {
    let d = table_of(
        box_spectrum(&GeneratorSpec::square(Bc::Dirichlet), 2000).unwrap(),
        2000,
    );
    let n = table_of(
        box_spectrum(&GeneratorSpec::square(Bc::Neumann), 2001).unwrap(),
        2000,
    );
    (d, n)
});

static SQUARE_SPECTRUM_100K: LazyLock<Spectrum> =
    LazyLock::new(|| box_spectrum(&GeneratorSpec::square(Bc::Dirichlet), 100_000).unwrap());

fn tiny_lambda1_table(k_max: usize) -> ExtremalTable {
    let mut values = vec![1.0];
    values.extend(std::iter::repeat_n(1e6, k_max));
    let complete_below = 1e6;
    let spectrum = Spectrum {
        generator: GeneratorSpec {
            kind: GeneratorKind::Explicit {
                path: std::path::PathBuf::from("synthetic"),
            },
            bc: Bc::Dirichlet,
            dimension: 2,
            label: "tiny_lambda1".into(),
        },
        values,
        exact: None,
        complete_below,
    };
    table_of(spectrum, k_max)
}

/// Exhaustive extremal power over all integer partitions of `k` with the
/// best generator picked per part.
fn partition_oracle(base: &[f64], k: usize, minimize: bool) -> f64 {
    fn recurse(base: &[f64], remaining: usize, max_part: usize, minimize: bool) -> f64 {
        if remaining == 0 {
            return 0.0;
        }
        let mut best = if minimize {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        for part in 1..=max_part.min(remaining) {
            let total = base[part - 1] + recurse(base, remaining - part, part, minimize);
            best = if minimize {
                best.min(total)
            } else {
                best.max(total)
            };
        }
        best
    }
    recurse(base, k, k, minimize)
}

// ---------------------------------------------------------------------
// Criteria.
// ---------------------------------------------------------------------

#[test]
fn criterion_01_bessel_zeros_match_independent_oracle() {
    use series_oracle::Kind;
    let t0 = Instant::now();

    let cases: [(u32, Kind, usize); 5] = [
        (0, Kind::Function, 20),
        (1, Kind::Function, 20),
        (5, Kind::Function, 20),
        (0, Kind::Derivative, 10),
        (1, Kind::Derivative, 10),
    ];
    let mut worst = 0.0f64;
    for (nu, kind, count) in cases {
        let expected = series_oracle::zeros(nu, kind, count);
        let cutoff = expected.last().unwrap() + 0.5;
        let got = match kind {
            Kind::Function => bessel_zeros(nu, cutoff).unwrap(),
            Kind::Derivative => bessel_prime_zeros(nu, cutoff).unwrap(),
        };
        assert!(
            got.len() >= count,
            "only {} zeros found for nu={nu}",
            got.len()
        );
        for (k, (want, have)) in expected.iter().zip(got.zeros()).enumerate() {
            let err = (want - have).abs();
            worst = worst.max(err);
            assert!(
                err <= 1e-10,
                "zero {} of nu={nu}: oracle {want}, implementation {have}",
                k + 1
            );
        }
    }

    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "criterion 1 took {elapsed:.2?}, limit is 1 s"
    );
    println!(
        "criterion 01: PASS - 80 zeros agree with the integer-series oracle, \
         worst |diff| = {worst:.2e}, runtime {elapsed:.1?}"
    );
}

#[test]
fn criterion_02_dp_equals_exhaustive_partition_enumeration() {
    let t0 = Instant::now();
    let k_max = 18usize;

    let generators: Vec<(&str, Spectrum)> = vec![
        (
            "square D",
            box_spectrum(&GeneratorSpec::square(Bc::Dirichlet), k_max).unwrap(),
        ),
        (
            "square N",
            box_spectrum(&GeneratorSpec::square(Bc::Neumann), k_max + 1).unwrap(),
        ),
        (
            "rect 1:5 D",
            box_spectrum(
                &GeneratorSpec::rectangle(1, 5, Bc::Dirichlet).unwrap(),
                k_max,
            )
            .unwrap(),
        ),
        (
            "rect 1:5 N",
            box_spectrum(
                &GeneratorSpec::rectangle(1, 5, Bc::Neumann).unwrap(),
                k_max + 1,
            )
            .unwrap(),
        ),
        ("disk D", disk_spectrum(Bc::Dirichlet, k_max).unwrap()),
        ("disk N", disk_spectrum(Bc::Neumann, k_max + 1).unwrap()),
    ];

    for (name, spectrum) in generators {
        let bc = spectrum.generator.bc;
        let minimize = bc == Bc::Dirichlet;
        let base: Vec<f64> = (1..=k_max)
            .map(|k| match bc {
                Bc::Dirichlet => spectrum.values[k - 1],
                Bc::Neumann => spectrum.values[k],
            })
            .collect();
        let exact_mode = spectrum.exact.is_some();
        let table = table_of(spectrum, k_max);
        for k in 1..=k_max {
            let want = partition_oracle(&base, k, minimize);
            let got = table.powers[k];
            let rel = ((got - want) / want).abs();
            let tol = if exact_mode { 1e-13 } else { 1e-12 };
            assert!(rel <= tol, "{name} k={k}: dp {got}, oracle {want}");
        }
    }

    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "criterion 2 took {elapsed:.2?}, limit is 10 s"
    );
    println!(
        "criterion 02: PASS - six tables equal exhaustive enumeration for k <= 18, \
         runtime {elapsed:.1?}"
    );
}

#[test]
fn criterion_03_component_counts_stay_bounded_at_full_scale() {
    let tables = &*FULL;
    let square = component_counts(&tables.square_d);
    let disk = component_counts(&tables.disk_d);
    let rect = component_counts(&tables.rect_d);
    println!(
        "criterion 03: measured max components up to rank {K_FULL}: \
         square {} (target <=5), disk {} (target <=5), rect 1:5 {} (target <=3)",
        square.max_nu, disk.max_nu, rect.max_nu
    );
    println!(
        "criterion 03: histograms: square {:?}, disk {:?}, rect {:?}",
        square.histogram, disk.histogram, rect.histogram
    );
    assert!(square.max_nu <= 5, "square max nu = {}", square.max_nu);
    assert!(rect.max_nu <= 3, "rect max nu = {}", rect.max_nu);
    if disk.max_nu > 5 {
        let offenders: Vec<usize> = (1..=K_FULL).filter(|&k| disk.nu[k] > 5).collect();
        panic!(
            "disk max nu = {} at ranks {offenders:?}; the six-component optima at \
             these ranks beat every five-component configuration by ~1e-7 relative \
             (far beyond eigenvalue precision), so the published bound of 5 does \
             not reproduce for the disk",
            disk.max_nu
        );
    }
    println!("criterion 03: PASS");
}

#[test]
fn criterion_04_log_density_exceeds_point_eight() {
    let tables = &*FULL;
    let x = K_FULL as f64;
    let f_square = log_density(&generator_ranks(&tables.square_d), x).unwrap();
    let f_rect = log_density(&generator_ranks(&tables.rect_d), x).unwrap();
    let f_disk = log_density(&generator_ranks(&tables.disk_d), x).unwrap();
    assert!(f_square > 0.8, "square F_J({x}) = {f_square}");
    assert!(f_rect > 0.8, "rect F_J({x}) = {f_rect}");
    assert!(f_disk > 0.8, "disk F_J({x}) = {f_disk}");
    println!(
        "criterion 04: PASS - F_J({K_FULL}): square {f_square:.4}, \
         rect 1:5 {f_rect:.4}, disk {f_disk:.4} (all > 0.8)"
    );
}

#[test]
fn criterion_05_universal_bounds_hold_on_every_table() {
    let tables = &*FULL;
    let (d2000, n2000) = &*SQUARE_2000;
    let audited = [
        ("square D 66k", &tables.square_d),
        ("square N 66k", &tables.square_n),
        ("rect D 66k", &tables.rect_d),
        ("disk D 66k", &tables.disk_d),
        ("square D 2000", d2000),
        ("square N 2000", n2000),
    ];
    let mut worst_slack = f64::INFINITY;
    for (name, table) in audited {
        let audit = check_bounds(table);
        assert_eq!(
            audit.violation_count, 0,
            "{name}: {} bound violations",
            audit.violation_count
        );
        worst_slack = worst_slack.min(audit.min_slack);
    }
    println!(
        "criterion 05: PASS - zero bound violations across six tables, \
         smallest slack {worst_slack:.3e}"
    );
}

#[test]
fn criterion_06_additivity_audits_find_no_violations() {
    let (d2000, n2000) = &*SQUARE_2000;
    let a = check_additivity(d2000, 0);
    let b = check_additivity(n2000, 0);
    assert!(a.exhaustive && b.exhaustive);
    assert_eq!(a.violation_count, 0);
    assert_eq!(b.violation_count, 0);

    let tables = &*FULL;
    let c = check_additivity(&tables.square_d, 12345);
    let d = check_additivity(&tables.square_n, 12345);
    assert!(!c.exhaustive && !d.exhaustive);
    assert!(c.pairs_checked >= 1_000_000);
    assert_eq!(c.violation_count, 0);
    assert_eq!(d.violation_count, 0);
    println!(
        "criterion 06: PASS - exhaustive pairs at k_max=2000 ({} + {}) and \
         {} sampled pairs at k_max={K_FULL}: zero violations",
        a.pairs_checked, b.pairs_checked, c.pairs_checked
    );
}

#[test]
fn criterion_07_dirichlet_ratio_stays_above_polya_and_converges() {
    let table = &FULL.square_d;
    let polya = 4.0 * PI;
    let mut running_min = f64::INFINITY;
    for k in 1..=K_FULL {
        let ratio = table.powers[k] / k as f64;
        assert!(ratio > polya, "ratio {ratio} <= 4 pi at k = {k}");
        running_min = running_min.min(ratio);
    }
    let gap = (running_min - polya) / polya;
    assert!(
        gap < 0.02,
        "running minimum {running_min} is {:.2}% above 4 pi",
        gap * 100.0
    );
    println!(
        "criterion 07: PASS - square Dirichlet ratio > 4 pi everywhere; \
         running min at {K_FULL} is {running_min:.6} = 4 pi + {:.3}%",
        gap * 100.0
    );
}

#[test]
fn criterion_08_neumann_mirror_of_the_ratio_trend() {
    let table = &FULL.square_n;
    let polya = 4.0 * PI;
    let mut running_max = 0.0f64;
    for k in 1..=K_FULL {
        let ratio = table.powers[k] / k as f64;
        assert!(
            ratio <= polya * (1.0 + 1e-9),
            "ratio {ratio} > 4 pi at k = {k}"
        );
        running_max = running_max.max(ratio);
    }
    let gap = (polya - running_max) / polya;
    assert!(
        gap < 0.02,
        "running maximum {running_max} is {:.2}% below 4 pi",
        gap * 100.0
    );
    println!(
        "criterion 08: PASS - square Neumann ratio <= 4 pi everywhere; \
         running max at {K_FULL} is {running_max:.6} = 4 pi - {:.3}%",
        gap * 100.0
    );
}

#[test]
fn criterion_09_weyl_fit_recovers_both_terms() {
    // Independent oracle for the c2 target: brute-force lattice counts
    // N(lambda) = #{(m,n) >= 1 : pi^2 (m^2+n^2) <= lambda} regressed as
    // a*lambda + b*sqrt(lambda); inverting the two-term count gives
    // lambda_k ~ (1/a) k + (-b) a^{-3/2} sqrt(k). With |boundary| = 4
    // the closed forms are 1/a = 4 pi and -b a^{-3/2} = 8 sqrt(pi).
    let lattice_count = |lambda: f64| -> f64 {
        let t = lambda / (PI * PI);
        let m_max = t.sqrt() as u64;
        let mut count = 0u64;
        for m in 1..=m_max {
            let rem = t - (m * m) as f64;
            if rem >= 1.0 {
                count += rem.sqrt() as u64;
            }
        }
        count as f64
    };
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0f64, 0.0, 0.0, 0.0, 0.0);
    let lambda_lo = 4.0 * PI * 1.0e4;
    let lambda_hi = 4.0 * PI * 1.0e5;
    let samples = 160;
    for i in 0..samples {
        let lambda = lambda_lo * (lambda_hi / lambda_lo).powf(i as f64 / (samples - 1) as f64);
        let n = lattice_count(lambda);
        let (f1, f2) = (lambda, lambda.sqrt());
        s11 += f1 * f1;
        s12 += f1 * f2;
        s22 += f2 * f2;
        b1 += f1 * n;
        b2 += f2 * n;
    }
    let det = s11 * s22 - s12 * s12;
    let a = (b1 * s22 - b2 * s12) / det;
    let b = (s11 * b2 - s12 * b1) / det;
    let c1_oracle = 1.0 / a;
    let c2_oracle = -b * a.powf(-1.5);

    // The oracle must itself agree with the closed forms.
    assert!((c1_oracle - 4.0 * PI).abs() / (4.0 * PI) < 0.01);
    let closed_form = 8.0 * PI.sqrt();
    assert!(
        (c2_oracle - closed_form).abs() / closed_form < 0.02,
        "count-regression c2 {c2_oracle} vs closed form {closed_form}"
    );

    let fit = weyl_fit(&SQUARE_SPECTRUM_100K, 10_000, 100_000).unwrap();
    assert!(
        (fit.c1 - 4.0 * PI).abs() / (4.0 * PI) < 0.01,
        "c1 = {} vs 4 pi = {}",
        fit.c1,
        4.0 * PI
    );
    assert!(
        (fit.c2 - c2_oracle).abs() / c2_oracle < 0.05,
        "c2 = {} vs oracle {}",
        fit.c2,
        c2_oracle
    );
    assert!(fit.residual < 0.01);
    println!(
        "criterion 09: PASS - fit over [1e4, 1e5]: c1 = {:.6} (4 pi = {:.6}), \
         c2 = {:.4} (count-derived {:.4}, closed form 8 sqrt(pi) = {:.4})",
        fit.c1,
        4.0 * PI,
        fit.c2,
        c2_oracle,
        closed_form
    );
}

#[test]
fn criterion_10_propagation_property() {
    let tiny = tiny_lambda1_table(K_FULL);
    for n in 1..=K_FULL {
        assert_eq!(
            tiny.powers[n],
            n as f64,
            "synthetic table power at {n} is not exactly n * powers[1]"
        );
        if n >= 2 {
            assert!(matches!(tiny.splits[n], SplitRecord::Split { j: 1 }));
        }
    }
    for n in [2usize, 3, 17, 1000, K_FULL] {
        assert!(propagation_check(&tiny, 1, n).unwrap());
    }

    let square = &FULL.square_d;
    assert!(propagation_check(square, 1, 2).unwrap());
    assert!(!propagation_check(square, 1, 3).unwrap());
    println!(
        "criterion 10: PASS - synthetic spectrum propagates exactly to rank {K_FULL}; \
         square rank 1 does not propagate (n = 3)"
    );
}

#[test]
fn criterion_11_report_runs_are_reproducible() {
    let base = std::env::temp_dir().join("polya_acceptance_determinism");
    let _ = std::fs::remove_dir_all(&base);
    let dirs = [base.join("a"), base.join("b")];
    for dir in &dirs {
        std::fs::create_dir_all(dir).unwrap();
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_polya"))
            .args([
                "report",
                "--generator",
                "square",
                "--bc",
                "dirichlet",
                "--kmax",
                "500",
                "--seed",
                "3",
                "--out",
                dir.to_str().unwrap(),
            ])
            .output()
            .expect("binary runs");
        assert!(out.status.success(), "{out:?}");
    }
    let table_a = std::fs::read(dirs[0].join("square_dirichlet.table.csv")).unwrap();
    let table_b = std::fs::read(dirs[1].join("square_dirichlet.table.csv")).unwrap();
    assert_eq!(table_a, table_b, "split records differ between runs");

    let j_of = |dir: &std::path::Path| -> Vec<u64> {
        let text = std::fs::read_to_string(dir.join("square_dirichlet.diagnostics.json")).unwrap();
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        json["j_set"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .collect()
    };
    assert_eq!(j_of(&dirs[0]), j_of(&dirs[1]), "J sets differ between runs");
    println!(
        "criterion 11: PASS - two report runs produced byte-identical tables \
         and identical J sets"
    );
}
