//! Periods of closed 1-forms and their rational approximation.
//!
//! On `T^n` the periods of a closed 1-form over the coordinate cycles are
//! its component means.  To realize the torus as a bundle over the circle
//! the period vector is perturbed to a rational point `k/q`; the scan keeps
//! the perturbation of the integer-class form `q·ω` within the budget, so
//! positivity of the pairing survives the perturbation.

use crate::error::Error;
use crate::form::{KForm, VectorField};
use crate::Result;

/// Largest denominator tried by the rationalization scan.
pub const DEFAULT_Q_MAX: u64 = 1_000_000;

const LOOP_AGREEMENT_TOL: f64 = 1e-8;

/// Rationalized period data: the integer class `k`, the scale `q`, and the
/// constant perturbation `k/q − c` it induces.
#[derive(Clone, Debug)]
pub struct PeriodData {
    /// Periods of the closed form (component means).
    pub c: Vec<f64>,
    /// Integer target class.
    pub k: Vec<i64>,
    /// Positive scale: the class of `q·ω'` is `k`.
    pub q: i64,
    /// Constant 1-form coefficients `k_i/q − c_i`.
    pub perturbation: Vec<f64>,
    /// `sup_p |perturbation(X)|` over the grid.
    pub pairing_sup: f64,
}

/// Periods of a closed 1-form: component means, cross-checked against the
/// line integrals along the coordinate loops through the origin.
pub fn periods(omega: &KForm) -> Result<Vec<f64>> {
    if omega.degree() != 1 {
        return Err(Error::DegreeMismatch { expected: 1, actual: omega.degree() });
    }
    let mut c = Vec::with_capacity(omega.domain().dim());
    for (axis, comp) in omega.components().iter().enumerate() {
        let mean = comp.mean();
        let loop_integral = comp.axis_line_mean(axis);
        if (mean - loop_integral).abs() > LOOP_AGREEMENT_TOL {
            return Err(Error::FormNotClosed { axis, mean, loop_integral });
        }
        c.push(mean);
    }
    Ok(c)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn pairing_sup(perturbation: &[f64], x: &VectorField) -> f64 {
    let mut sup = 0.0f64;
    for p in 0..x.domain().len() {
        let mut v = 0.0;
        for (a, &e) in perturbation.iter().enumerate() {
            v += e * x.component(a).values()[p];
        }
        sup = sup.max(v.abs());
    }
    sup
}

fn candidate(c: &[f64], k: Vec<i64>, q: i64, x: &VectorField, budget: f64) -> Option<PeriodData> {
    // both the class perturbation max_i |k_i − q c_i| and the induced
    // pairing perturbation must stay strictly inside the budget
    let class_dev = k
        .iter()
        .zip(c)
        .map(|(&ki, &ci)| (ki as f64 - q as f64 * ci).abs())
        .fold(0.0f64, f64::max);
    if class_dev >= budget {
        return None;
    }
    let perturbation: Vec<f64> =
        k.iter().zip(c).map(|(&ki, &ci)| ki as f64 / q as f64 - ci).collect();
    let sup = pairing_sup(&perturbation, x);
    if sup >= budget {
        return None;
    }
    Some(PeriodData { c: c.to_vec(), k, q, perturbation, pairing_sup: sup })
}

/// Find the smallest `q` whose rounded class `k = round(q·c)` keeps both the
/// class deviation `max_i |k_i − q c_i|` and the pairing perturbation
/// `sup |(k/q − c)(X)|` strictly inside `budget`.  A class hint (with
/// `q = 1`) overrides the scan when it passes the same budget check.
pub fn rationalize_periods(
    c: &[f64],
    x: &VectorField,
    budget: f64,
    q_max: u64,
    class_hint: Option<&[i64]>,
) -> Result<PeriodData> {
    if let Some(hint) = class_hint {
        if hint.len() == c.len() {
            // smallest q aligning the hinted class with the periods
            for q in 1..=q_max {
                if let Some(pd) = candidate(c, hint.to_vec(), q as i64, x, budget) {
                    return Ok(pd);
                }
            }
        }
    }
    for q in 1..=q_max {
        let k: Vec<i64> = c.iter().map(|&ci| (q as f64 * ci).round() as i64).collect();
        // skip classes reducible to an earlier q
        let kg = k.iter().fold(0u64, |g, &ki| gcd(g, ki.unsigned_abs()));
        if kg != 0 && gcd(kg, q) > 1 {
            continue;
        }
        if k.iter().all(|&ki| ki == 0) {
            continue;
        }
        if let Some(pd) = candidate(c, k, q as i64, x, budget) {
            return Ok(pd);
        }
    }
    Err(Error::NoRationalApproximation { q_max, budget })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::form::KForm;
    use crate::grid::TorusDomain;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::TAU;

    fn t2() -> TorusDomain {
        TorusDomain::t2(64).unwrap()
    }

    #[test]
    fn periods_of_constant_forms() {
        let d = t2();
        let dx = KForm::from_fn(&d, 1, |_, idx| if idx[0] == 0 { 1.0 } else { 0.0 });
        assert_eq!(periods(&dx).unwrap(), vec![1.0, 0.0]);

        let omega = KForm::from_fn(&d, 1, |_, idx| if idx[0] == 0 { 1.0 } else { 0.5 });
        assert_eq!(periods(&omega).unwrap(), vec![1.0, 0.5]);

        let omega2 = KForm::from_fn(&d, 1, |_, idx| if idx[0] == 0 { 1.0 } else { 0.41421 });
        let c = periods(&omega2).unwrap();
        assert_abs_diff_eq!(c[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], 0.41421, epsilon = 1e-12);
    }

    #[test]
    fn periods_include_exact_part_and_reject_nonclosed() {
        let d = t2();
        // closed with exact part: means survive
        let closed = KForm::from_fn(&d, 1, |p, idx| {
            if idx[0] == 0 {
                1.0 + 0.3 * TAU * (TAU * p[0]).cos()
            } else {
                0.25
            }
        });
        let c = periods(&closed).unwrap();
        assert_abs_diff_eq!(c[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(c[1], 0.25, epsilon = 1e-12);

        // mean and loop integral disagree for a y-dependent dx component
        // (the loop through the origin sees 1 + cos(0) = 2, the mean is 1)
        let bad = KForm::from_fn(&d, 1, |p, idx| {
            if idx[0] == 0 {
                1.0 + (TAU * p[1]).cos()
            } else {
                0.0
            }
        });
        assert!(matches!(periods(&bad), Err(Error::FormNotClosed { .. })));
    }

    #[test]
    fn rationalize_exact_rational_periods() {
        let d = t2();
        let x = VectorField::constant(&d, &[1.0, 0.0]).unwrap();
        // budget below 0.5 forces the scan past q = 1 to the exact class
        let pd = rationalize_periods(&[1.0, 0.5], &x, 0.4, 100, None).unwrap();
        assert_eq!(pd.k, vec![2, 1]);
        assert_eq!(pd.q, 2);
        assert!(pd.perturbation.iter().all(|&e| e.abs() < 1e-15));
        assert_abs_diff_eq!(pd.pairing_sup, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rationalize_matches_brute_force_oracle() {
        let d = t2();
        let c = [1.0, 0.41421];
        let x = VectorField::constant(&d, &[1.0, 0.41421]).unwrap();
        let budget = 0.1;

        // oracle: scan q = 1..100 minimizing q subject to the budget
        let mut oracle: Option<(i64, Vec<i64>)> = None;
        'outer: for q in 1..=100i64 {
            let k: Vec<i64> = c.iter().map(|&ci| (q as f64 * ci).round() as i64).collect();
            let dev = k
                .iter()
                .zip(&c)
                .map(|(&ki, &ci)| (ki as f64 - q as f64 * ci).abs())
                .fold(0.0f64, f64::max);
            let pairing =
                (0..2).map(|a| (k[a] as f64 / q as f64 - c[a]) * x.component(a).values()[0]);
            let psup: f64 = pairing.sum::<f64>().abs();
            if dev < budget && psup < budget {
                oracle = Some((q, k));
                break 'outer;
            }
        }
        let (oq, ok) = oracle.expect("oracle finds a class");
        assert_eq!(oq, 5);
        assert_eq!(ok, vec![5, 2]);

        let pd = rationalize_periods(&c, &x, budget, 100, None).unwrap();
        assert_eq!(pd.q, 5);
        assert_eq!(pd.k, vec![5, 2]);
        assert_abs_diff_eq!(pd.perturbation[1], 0.4 - 0.41421, epsilon = 1e-12);
        assert!(pd.pairing_sup < budget);
    }

    #[test]
    fn class_hint_overrides_when_budget_allows() {
        let d = t2();
        let x = crate::form::VectorField::from_fn(&d, |p, axis| {
            if axis == 0 {
                1.0
            } else {
                0.5 + 0.05 * (TAU * p[0]).sin()
            }
        });
        // budget = 0.5 * min pairing of omega = dx + 0.5 dy against X
        let budget = 0.5 * 1.225;
        let pd = rationalize_periods(&[1.0, 0.5], &x, budget, 100, Some(&[1, 0])).unwrap();
        assert_eq!(pd.k, vec![1, 0]);
        assert_eq!(pd.q, 1);
        // hint too far off: falls back to the scan
        let pd2 = rationalize_periods(&[1.0, 0.5], &x, 0.4, 100, Some(&[0, 7])).unwrap();
        assert_eq!(pd2.k, vec![2, 1]);
        assert_eq!(pd2.q, 2);
    }

    #[test]
    fn rationalize_reports_budget_exhaustion() {
        let d = t2();
        let x = VectorField::constant(&d, &[1.0, 0.0]).unwrap();
        let err = rationalize_periods(&[1.0, 0.41421], &x, 1e-9, 50, None);
        assert!(matches!(err, Err(Error::NoRationalApproximation { .. })));
    }
}
