//! Paired significance testing: two-sided paired Student's t-test with the
//! Holm-Bonferroni step-down correction. The t CDF is evaluated through the
//! regularized incomplete beta function.

use super::EvalError;

// Lanczos approximation, g = 7, 9 coefficients.
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS[0];
        for (i, c) in LANCZOS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + 7.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

// Continued-fraction evaluation (modified Lentz).
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-16;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub(crate) fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * betacf(a, b, x) / a
    } else {
        1.0 - front * betacf(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of a Student t statistic with `df` degrees of freedom:
/// `I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    reg_inc_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Two-sided paired Student's t-test over aligned per-query score vectors.
///
/// Identical vectors (zero mean difference with zero variance) report p = 1.0.
/// Zero variance with a nonzero mean difference is a degenerate sample and is
/// an error.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(EvalError::TooFewObservations(n));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return if mean == 0.0 {
            Ok(1.0)
        } else {
            Err(EvalError::DegeneratePairedSample)
        };
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    Ok(student_t_two_sided_p(t, (n - 1) as f64))
}

/// Holm-Bonferroni step-down correction. Sorts p-values ascending, rejects
/// the i-th smallest while `p_(i) <= alpha / (m - i + 1)` (1-based), stops at
/// the first failure, and maps rejections back to the original order.
pub fn holm_bonferroni(p_values: &[f64], alpha: f64) -> Vec<bool> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].partial_cmp(&p_values[j]).expect("finite p"));
    let mut reject = vec![false; m];
    for (i, &orig) in order.iter().enumerate() {
        if p_values[orig] <= alpha / (m - i) as f64 {
            reject[orig] = true;
        } else {
            break;
        }
    }
    reject
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_one_df_one_is_exactly_half() {
        // Closed form: p = 1 - 2*atan(1)/pi = 0.5.
        let p = student_t_two_sided_p(1.0, 1.0);
        assert!((p - 0.5).abs() < 1e-14, "{p}");
    }

    #[test]
    fn t_table_case_df9() {
        // Classic two-sided 5% critical value for 9 degrees of freedom.
        let p = student_t_two_sided_p(2.262, 9.0);
        assert!((p - 0.050).abs() < 1e-3, "{p}");
    }

    #[test]
    fn t_cdf_matches_high_precision_references() {
        // Reference values computed with 50-digit arithmetic from the
        // regularized incomplete beta definition.
        #[allow(clippy::excessive_precision)]
        let cases: [(f64, f64, f64); 6] = [
            (2.0, 10.0, 0.073388034770740366),
            (0.5, 30.0, 0.62072300488512729),
            (3.5, 4.0, 0.024896163460222752),
            (1.5, 20.0, 0.14923577116925253),
            (2.262, 9.0, 0.05001284550245463),
            (2.262157163, 9.0, 0.049999999983508669),
        ];
        for (t, df, expected) in cases {
            let p = student_t_two_sided_p(t, df);
            assert!(
                (p - expected).abs() < 1e-10,
                "t={t} df={df}: {p} vs {expected}"
            );
        }
    }

    #[test]
    fn t_is_symmetric_in_sign() {
        let p1 = student_t_two_sided_p(1.7, 12.0);
        let p2 = student_t_two_sided_p(-1.7, 12.0);
        assert!((p1 - p2).abs() < 1e-15);
    }

    #[test]
    fn identical_vectors_give_p_one() {
        let a = [0.1, 0.2, 0.3];
        assert_eq!(paired_t_test(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn constant_nonzero_difference_is_degenerate() {
        // Dyadic values so the differences are exactly equal in f64.
        let a = [1.0, 2.0, 3.0];
        let b = [0.5, 1.5, 2.5];
        assert!(matches!(
            paired_t_test(&a, &b),
            Err(EvalError::DegeneratePairedSample)
        ));
    }

    #[test]
    fn paired_test_matches_direct_t_computation() {
        let a = [0.55, 0.61, 0.47, 0.52, 0.66, 0.43];
        let b = [0.50, 0.58, 0.49, 0.47, 0.60, 0.42];
        let p = paired_t_test(&a, &b).unwrap();
        let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let t = mean / (sd / n.sqrt());
        assert!((p - student_t_two_sided_p(t, n - 1.0)).abs() < 1e-15);
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn mismatched_or_short_inputs_error() {
        assert!(paired_t_test(&[1.0], &[1.0, 2.0]).is_err());
        assert!(paired_t_test(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn holm_step_down_hand_cases() {
        // alpha/3 = 0.0167 admits 0.01; alpha/2 = 0.025 rejects 0.03; stop.
        let flags = holm_bonferroni(&[0.01, 0.03, 0.04], 0.05);
        assert_eq!(flags, vec![true, false, false]);
        // All pass: 0.01 <= 0.0167, 0.02 <= 0.025, 0.04 <= 0.05.
        let flags = holm_bonferroni(&[0.01, 0.02, 0.04], 0.05);
        assert_eq!(flags, vec![true, true, true]);
    }

    #[test]
    fn holm_maps_back_to_original_order() {
        let flags = holm_bonferroni(&[0.04, 0.01, 0.03], 0.05);
        assert_eq!(flags, vec![false, true, false]);
    }

    #[test]
    fn holm_between_bonferroni_and_uncorrected() {
        // Deterministic sweep over a small grid of p-vectors.
        let grids = [
            vec![0.001, 0.02, 0.03, 0.2],
            vec![0.05, 0.05, 0.05],
            vec![0.9, 0.01, 0.049, 0.012],
            vec![0.025, 0.026],
        ];
        let alpha = 0.05;
        for p in &grids {
            let m = p.len() as f64;
            let holm = holm_bonferroni(p, alpha);
            for (i, &pi) in p.iter().enumerate() {
                let bonferroni = pi <= alpha / m;
                let uncorrected = pi <= alpha;
                if bonferroni {
                    assert!(holm[i], "holm must reject whenever bonferroni does: {p:?}");
                }
                if holm[i] {
                    assert!(uncorrected, "holm must not reject above alpha: {p:?}");
                }
            }
        }
    }

    #[test]
    fn holm_empty_input() {
        assert!(holm_bonferroni(&[], 0.05).is_empty());
    }
}
