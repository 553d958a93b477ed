//! The section-existence criterion `‖δ_g(i_X Ω)‖_g < m_g(X)²` and the
//! certificates around it: the closed 1-form with positive pairing, the
//! harmonicity check and the transversality (volume-form) check on
//! constructed sections.

use crate::error::Error;

use crate::grid::TrigInterpolant;
use crate::metric::min_speed;
use crate::projection::{hodge_closed_projection, ClosedApproximation};
use crate::scenario::Scenario;
use crate::section::CrossSection;
use crate::Result;

/// Guard-band factor for the strict inequality: PASS requires
/// `margin > CRITERION_GUARD_FACTOR * identity_tol`, absorbing the grid
/// sup/inf discretization bias.
pub const CRITERION_GUARD_FACTOR: f64 = 10.0;

/// Criterion verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Pass => write!(f, "PASS"),
            Verdict::Fail => write!(f, "FAIL"),
        }
    }
}

/// Report of the criterion inequality and the norm-equality chain.
#[derive(Clone, Debug)]
pub struct CriterionReport {
    /// `m_g(X)^2`: squared minimum speed over the grid.
    pub m_squared: f64,
    /// `sup ‖δ_g(i_X Ω)‖_g`.
    pub delta_norm: f64,
    /// `sup ‖d X^♭‖_g`; equals `delta_norm` up to round-off.
    pub d_flat_norm: f64,
    /// `m_squared − delta_norm`.
    pub margin: f64,
    pub verdict: Verdict,
    /// `|delta_norm − d_flat_norm|`.
    pub norm_chain_residual: f64,
}

/// Criterion fields without the scenario-validity precondition.
///
/// Used for diagnostics (e.g. the scaling sensitivity check, which pairs a
/// rescaled generator with the original volume form); the production entry
/// point is [`check_criterion`].
pub fn criterion_fields(s: &Scenario) -> Result<CriterionReport> {
    let canonical = s.canonical_form()?;
    let delta = s.metric.codifferential(&canonical)?;
    let delta_norm = s.metric.sup_norm(&delta)?;
    let theta = s.metric.flat_map(&s.x)?;
    let d_flat_norm = s.metric.sup_norm(&theta.exterior_derivative()?)?;
    let speed = min_speed(&s.metric, &s.x)?;
    let m_squared = speed.min_squared;
    let margin = m_squared - delta_norm;
    let verdict = if margin > CRITERION_GUARD_FACTOR * s.tol.identity_tol {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(CriterionReport {
        m_squared,
        delta_norm,
        d_flat_norm,
        margin,
        verdict,
        norm_chain_residual: (delta_norm - d_flat_norm).abs(),
    })
}

/// Evaluate the sufficient criterion on a validated scenario.
pub fn check_criterion(s: &Scenario) -> Result<CriterionReport> {
    s.ensure_valid()?;
    criterion_fields(s)
}

/// Closed 1-form with everywhere-positive pairing against the flow.
#[derive(Clone, Debug)]
pub struct PositivityCertificate {
    pub closed: ClosedApproximation,
    /// `min_p ω(X)` over the grid.
    pub min_pairing: f64,
    /// `m_g(X)^2 − distance`: the chain lower bound for the pairing.
    pub lower_bound_check: f64,
}

/// Construction failure data: the candidate had no positive pairing.
#[derive(Clone, Debug)]
pub struct ConstructionFailure {
    pub omega_norm: f64,
    pub min_pairing: f64,
    pub point: Vec<usize>,
}

/// Outcome of [`build_closed_one_form`].
#[derive(Clone, Debug)]
pub enum ConstructionOutcome {
    Accepted(PositivityCertificate),
    Rejected(ConstructionFailure),
}

impl ConstructionOutcome {
    pub fn accepted(&self) -> Option<&PositivityCertificate> {
        match self {
            ConstructionOutcome::Accepted(c) => Some(c),
            ConstructionOutcome::Rejected(_) => None,
        }
    }
}

/// Project `X^♭` onto closed 1-forms and test positivity of the pairing.
///
/// Runs regardless of the criterion verdict: the criterion is sufficient,
/// not necessary, so a failed verdict with a successful construction is
/// still a section.
pub fn build_closed_one_form(s: &Scenario) -> Result<ConstructionOutcome> {
    let theta = s.metric.flat_map(&s.x)?;
    let closed = hodge_closed_projection(&theta, &s.metric)?;
    let pairing = closed.omega.pair(&s.x)?;
    let (argmin, min_pairing) = pairing.argmin();
    let speed = min_speed(&s.metric, &s.x)?;
    if min_pairing > s.tol.positivity_margin {
        let lower_bound_check = speed.min_squared - closed.distance;
        Ok(ConstructionOutcome::Accepted(PositivityCertificate {
            closed,
            min_pairing,
            lower_bound_check,
        }))
    } else {
        let omega_norm = s.metric.sup_norm(&closed.omega)?;
        Ok(ConstructionOutcome::Rejected(ConstructionFailure {
            omega_norm,
            min_pairing,
            point: s.domain.unflatten(argmin),
        }))
    }
}

/// Closedness / co-closedness certificate for the canonical form.
#[derive(Clone, Debug)]
pub struct HarmonicityReport {
    /// `sup ‖d(i_X Ω)‖_g`.
    pub d_norm: f64,
    /// `sup ‖δ_g(i_X Ω)‖_g`.
    pub delta_norm: f64,
    pub tolerance: f64,
    /// Both residuals within tolerance: `i_X Ω` is g-harmonic.
    pub harmonic: bool,
}

pub fn harmonicity_certificate(s: &Scenario) -> Result<HarmonicityReport> {
    let canonical = s.canonical_form()?;
    let d_norm = s.metric.sup_norm(&canonical.exterior_derivative()?)?;
    let delta_norm = s.metric.sup_norm(&s.metric.codifferential(&canonical)?)?;
    let tolerance = s.tol.closedness_tol;
    Ok(HarmonicityReport {
        d_norm,
        delta_norm,
        tolerance,
        harmonic: d_norm <= tolerance && delta_norm <= tolerance,
    })
}

/// Transversality certificate: `i_X Ω` restricted to the section's tangent
/// frames must be a volume form, i.e. bounded away from zero with uniform
/// sign.
#[derive(Clone, Debug)]
pub struct HondaReport {
    /// Minimum |i_X Ω(frame)| over the samples (transversality margin).
    pub min_abs: f64,
    pub uniform_sign: bool,
    pub passed: bool,
    pub samples: usize,
}

pub fn honda_check(section: &CrossSection, s: &Scenario) -> Result<HondaReport> {
    if section.samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let n = s.domain.dim();
    let canonical = s.canonical_form()?;
    let interps: Vec<TrigInterpolant> =
        canonical.components().iter().map(TrigInterpolant::new).collect();

    let mut min_abs = f64::INFINITY;
    let mut any_pos = false;
    let mut any_neg = false;
    for sample in &section.samples {
        let comps: Vec<f64> = interps.iter().map(|i| i.eval(&sample.point)).collect();
        let value = match n {
            2 => {
                // 1-form on the single tangent vector
                let t = &sample.frame[0];
                comps[0] * t[0] + comps[1] * t[1]
            }
            _ => {
                // 2-form on the tangent pair: Σ_{i<j} B_ij (u_i v_j − u_j v_i)
                let u = &sample.frame[0];
                let v = &sample.frame[1];
                comps[0] * (u[0] * v[1] - u[1] * v[0])
                    + comps[1] * (u[0] * v[2] - u[2] * v[0])
                    + comps[2] * (u[1] * v[2] - u[2] * v[1])
            }
        };
        min_abs = min_abs.min(value.abs());
        if value > 0.0 {
            any_pos = true;
        }
        if value < 0.0 {
            any_neg = true;
        }
    }
    let uniform_sign = !(any_pos && any_neg) && (any_pos || any_neg);
    Ok(HondaReport {
        min_abs,
        uniform_sign,
        passed: uniform_sign && min_abs > 0.0,
        samples: section.samples.len(),
    })
}
