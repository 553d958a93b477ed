//! Problem instances: a torus, a metric, a non-singular flow generator and
//! an invariant volume form, together with the tolerances used throughout
//! the pipeline.

use std::fmt;

use crate::error::Error;
use crate::form::{KForm, VectorField};
use crate::grid::TorusDomain;
use crate::metric::{min_speed, MetricField};
use crate::Result;

/// Tolerance bundle carried by a scenario.
#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    /// Allowed relative mismatch between `Ω` and the Riemannian volume.
    pub identity_tol: f64,
    /// Allowed sup norm of `d(i_X Ω)` (volume preservation).
    pub closedness_tol: f64,
    /// Required minimum of `ω(X)` for a constructed closed form.
    pub positivity_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { identity_tol: 1e-8, closedness_tol: 1e-8, positivity_margin: 1e-6 }
    }
}

/// One decision-problem instance.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub domain: TorusDomain,
    pub metric: MetricField,
    pub x: VectorField,
    pub omega: KForm,
    pub tol: Tolerances,
}

/// Result of a single validation check.
#[derive(Clone, Debug)]
pub struct ValidationCheck {
    pub name: &'static str,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
}

/// Per-check outcome of [`Scenario::validate`].
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&ValidationCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "  {:<22} {}  residual {:.6e}  (tol {:.1e})",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.residual,
                c.tolerance
            )?;
        }
        Ok(())
    }
}

impl Scenario {
    /// Structural construction; semantic hypotheses are checked by
    /// [`Scenario::validate`].
    pub fn new(
        domain: TorusDomain,
        metric: MetricField,
        x: VectorField,
        omega: KForm,
        tol: Tolerances,
    ) -> Result<Self> {
        if domain.dim() < 2 {
            return Err(Error::BadDimension { actual: domain.dim() });
        }
        if metric.domain() != &domain || x.domain() != &domain || omega.domain() != &domain {
            return Err(Error::DomainMismatch);
        }
        if omega.degree() != domain.dim() {
            return Err(Error::DegreeMismatch { expected: domain.dim(), actual: omega.degree() });
        }
        Ok(Self { domain, metric, x, omega, tol })
    }

    /// The canonical (n-1)-form `i_X Ω` of the flow.
    pub fn canonical_form(&self) -> Result<KForm> {
        self.omega.contract(&self.x)
    }

    /// Check the hypotheses of the section criterion:
    ///
    /// (a) `Ω` is a positive volume form,
    /// (b) `d(i_X Ω) ≈ 0` (the flow preserves `Ω`),
    /// (c) `Ω` equals the Riemannian volume of `g`,
    /// (d) `X` is non-singular.
    pub fn validate(&self) -> ValidationReport {
        let mut checks = Vec::new();

        let omega_min = self.omega.components()[0].min();
        checks.push(ValidationCheck {
            name: "omega_positive",
            passed: omega_min > 0.0,
            residual: omega_min,
            tolerance: 0.0,
        });

        let closedness = self
            .canonical_form()
            .and_then(|c| c.exterior_derivative())
            .and_then(|d| self.metric.sup_norm(&d));
        match closedness {
            Ok(res) => checks.push(ValidationCheck {
                name: "volume_preserved",
                passed: res <= self.tol.closedness_tol,
                residual: res,
                tolerance: self.tol.closedness_tol,
            }),
            Err(_) => checks.push(ValidationCheck {
                name: "volume_preserved",
                passed: false,
                residual: f64::INFINITY,
                tolerance: self.tol.closedness_tol,
            }),
        }

        // pointwise relative difference |Ω − sqrt(det g)| / sqrt(det g)
        let vol = self.metric.volume_form();
        let mut rel = 0.0f64;
        for p in 0..self.domain.len() {
            let w = self.omega.components()[0].values()[p];
            let v = vol.components()[0].values()[p];
            rel = rel.max((w - v).abs() / v);
        }
        checks.push(ValidationCheck {
            name: "volume_is_riemannian",
            passed: rel <= self.tol.identity_tol,
            residual: rel,
            tolerance: self.tol.identity_tol,
        });

        match min_speed(&self.metric, &self.x) {
            Ok(speed) => checks.push(ValidationCheck {
                name: "x_nonsingular",
                passed: speed.min_squared > 0.0,
                residual: speed.min_squared,
                tolerance: 0.0,
            }),
            Err(_) => checks.push(ValidationCheck {
                name: "x_nonsingular",
                passed: false,
                residual: 0.0,
                tolerance: 0.0,
            }),
        }

        ValidationReport { checks }
    }

    /// Validation that fails hard, carrying the report.
    pub fn ensure_valid(&self) -> Result<ValidationReport> {
        let report = self.validate();
        if report.passed() {
            Ok(report)
        } else {
            Err(Error::InvalidScenario { report: report.to_string() })
        }
    }
}

/// Ready-made problem instances used across the test suites.
pub mod fixtures {
    use super::*;
    use crate::grid::ScalarField;
    use std::f64::consts::{PI, TAU};

    /// T^2, flat metric, X = (1, 0), Ω = dx∧dy.
    pub fn fixture_a(resolution: usize) -> Scenario {
        let d = TorusDomain::t2(resolution).expect("valid resolution");
        let g = MetricField::flat(&d);
        let x = VectorField::constant(&d, &[1.0, 0.0]).expect("2 components");
        let omega = g.volume_form();
        Scenario::new(d, g, x, omega, Tolerances::default()).expect("well-formed")
    }

    /// T^2, flat metric, X = (1, 0.5 + 0.05 sin 2πx), Ω = dx∧dy.
    pub fn fixture_b(resolution: usize) -> Scenario {
        let d = TorusDomain::t2(resolution).expect("valid resolution");
        let g = MetricField::flat(&d);
        let x = VectorField::from_fn(&d, |p, axis| {
            if axis == 0 {
                1.0
            } else {
                0.5 + 0.05 * (TAU * p[0]).sin()
            }
        });
        let omega = g.volume_form();
        Scenario::new(d, g, x, omega, Tolerances::default()).expect("well-formed")
    }

    /// T^3, flat metric, X = (cos 2πz, sin 2πz, 0), Ω = dx∧dy∧dz.
    pub fn fixture_c_flat(resolution: usize) -> Scenario {
        let d = TorusDomain::t3(resolution).expect("valid resolution");
        let g = MetricField::flat(&d);
        let x = c_vector_field(&d);
        let omega = g.volume_form();
        Scenario::new(d, g, x, omega, Tolerances::default()).expect("well-formed")
    }

    /// T^3, g = diag(1, 1, 4π²), X = (cos 2πz, sin 2πz, 0), Ω = 2π dx∧dy∧dz.
    ///
    /// The flow is g-unit-speed, so the criterion sits exactly on its
    /// boundary.
    pub fn fixture_c_scaled(resolution: usize) -> Scenario {
        let d = TorusDomain::t3(resolution).expect("valid resolution");
        let g = MetricField::diagonal(
            &d,
            vec![
                ScalarField::constant(&d, 1.0),
                ScalarField::constant(&d, 1.0),
                ScalarField::constant(&d, 4.0 * PI * PI),
            ],
        )
        .expect("SPD diagonal");
        let x = c_vector_field(&d);
        let omega = g.volume_form();
        Scenario::new(d, g, x, omega, Tolerances::default()).expect("well-formed")
    }

    fn c_vector_field(d: &TorusDomain) -> VectorField {
        VectorField::from_fn(d, |p, axis| match axis {
            0 => (TAU * p[2]).cos(),
            1 => (TAU * p[2]).sin(),
            _ => 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::grid::ScalarField;

    #[test]
    fn fixture_a_validates_with_zero_residuals() {
        let s = fixture_a(32);
        let report = s.validate();
        assert!(report.passed(), "{report}");
        assert!(report.check("volume_preserved").unwrap().residual < 1e-13);
        assert!(report.check("volume_is_riemannian").unwrap().residual < 1e-15);
    }

    #[test]
    fn fixture_b_validates_divergence_free() {
        // div X = d_x 1 + d_y (0.5 + 0.05 sin 2 pi x) = 0
        let s = fixture_b(64);
        let report = s.validate();
        assert!(report.passed(), "{report}");
        assert!(report.check("volume_preserved").unwrap().residual < 1e-10);
    }

    #[test]
    fn fixture_c_validates() {
        for s in [fixture_c_flat(16), fixture_c_scaled(16)] {
            let report = s.validate();
            assert!(report.passed(), "{report}");
        }
    }

    #[test]
    fn doubled_volume_fails_riemannian_check() {
        let s = fixture_b(32);
        let doubled = Scenario::new(
            s.domain.clone(),
            s.metric.clone(),
            s.x.clone(),
            s.omega.scaled(2.0),
            s.tol,
        )
        .unwrap();
        let report = doubled.validate();
        assert!(!report.passed());
        let c = report.check("volume_is_riemannian").unwrap();
        assert!(!c.passed);
        assert!((c.residual - 1.0).abs() < 1e-12);
        assert!(doubled.ensure_valid().is_err());
    }

    #[test]
    fn scenario_rejects_wrong_degree_volume() {
        let s = fixture_a(32);
        let bad = KForm::zero(&s.domain, 1);
        assert!(Scenario::new(
            s.domain.clone(),
            s.metric.clone(),
            s.x.clone(),
            bad,
            Tolerances::default()
        )
        .is_err());
    }

    #[test]
    fn scenario_rejects_one_dimensional_domain() {
        let d1 = TorusDomain::t1(16).unwrap();
        let g = MetricField::flat(&d1);
        let x = VectorField::constant(&d1, &[1.0]).unwrap();
        let omega = KForm::from_components(&d1, 1, vec![ScalarField::constant(&d1, 1.0)]).unwrap();
        assert!(Scenario::new(d1, g, x, omega, Tolerances::default()).is_err());
    }
}
