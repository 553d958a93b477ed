//! Suspension (mapping torus) scenarios: given a base diffeomorphism
//! isotopic to the identity and a positive roof function, build a torus
//! flow whose first-return map to `{x = 0}` recovers the base map and whose
//! return times are the roof integrated along orbits.
//!
//! For a rotation base the drift is autonomous: `X = (1/r, α/r)`.  For a
//! sampled displacement `δ` the straightening isotopy `y_0 ↦ y_0 + s(x)δ(y_0)`
//! with the smoothstep `s(x) = x − sin(2πx)/2π` is inverted per grid point;
//! `s'(0) = s'(1) = 0` makes the drift field close up smoothly across the
//! gluing.  In both cases the invariant volume has coefficient
//! `λ = r(y)/det(I + s Dδ)`, which makes `i_X Ω` exactly closed, and the
//! metric is the conformal one with `sqrt(det g) = λ`.

use std::f64::consts::TAU;

use crate::error::Error;
use crate::form::{KForm, VectorField};
use crate::grid::{wrap_unit, ScalarField, TorusDomain, TrigInterpolant};
use crate::metric::MetricField;
use crate::scenario::{Scenario, Tolerances};
use crate::Result;

/// Base diffeomorphism of `T^{n−1}`, isotopic to the identity.
#[derive(Clone, Debug)]
pub enum BaseMap {
    /// Rigid translation by the given vector.
    Rotation(Vec<f64>),
    /// Graph displacement `y ↦ y + δ(y)`, sampled per base axis.
    Displacement(Vec<ScalarField>),
}

impl BaseMap {
    pub fn base_dim(&self) -> usize {
        match self {
            BaseMap::Rotation(v) => v.len(),
            BaseMap::Displacement(fields) => fields.len(),
        }
    }

    /// Apply the base map to a point of `T^{n−1}`.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        match self {
            BaseMap::Rotation(v) => {
                y.iter().zip(v).map(|(&yi, &ai)| wrap_unit(yi + ai)).collect()
            }
            BaseMap::Displacement(fields) => {
                let interps: Vec<TrigInterpolant> =
                    fields.iter().map(TrigInterpolant::new).collect();
                y.iter()
                    .enumerate()
                    .map(|(a, &yi)| wrap_unit(yi + interps[a].eval(y)))
                    .collect()
            }
        }
    }
}

/// Suspension data: base map plus positive roof function on the base torus.
#[derive(Clone, Debug)]
pub struct SuspensionSpec {
    pub base: BaseMap,
    pub roof: ScalarField,
}

fn smoothstep(x: f64) -> (f64, f64) {
    (x - (TAU * x).sin() / TAU, 1.0 - (TAU * x).cos())
}

/// Build the suspended scenario on `T^n` (`n = base dim + 1`, flow along
/// axis 0 with the given resolution).
pub fn suspend(spec: &SuspensionSpec, flow_resolution: usize) -> Result<Scenario> {
    let b = spec.base.base_dim();
    if !(1..=2).contains(&b) {
        return Err(Error::BadBaseDimension { actual: b });
    }
    let base_domain = spec.roof.domain().clone();
    if base_domain.dim() != b {
        return Err(Error::DomainMismatch);
    }
    let roof_min = spec.roof.min();
    if roof_min <= 0.0 {
        return Err(Error::RoofNotPositive { min: roof_min });
    }

    let mut resolution = vec![flow_resolution];
    resolution.extend_from_slice(base_domain.resolution());
    let domain = TorusDomain::new(&resolution)?;
    let n = domain.dim();

    let roof_interp = TrigInterpolant::new(&spec.roof);

    // per result grid point: drift b⃗(x, y), base-map jacobian det J(x, y)
    let len = domain.len();
    let mut drift = vec![vec![0.0f64; len]; b];
    let mut jac = vec![1.0f64; len];

    match &spec.base {
        BaseMap::Rotation(alpha) => {
            for p in 0..len {
                for (a, &al) in alpha.iter().enumerate() {
                    drift[a][p] = al;
                }
            }
        }
        BaseMap::Displacement(fields) => {
            let interps: Vec<TrigInterpolant> =
                fields.iter().map(TrigInterpolant::new).collect();
            for p in 0..len {
                let coords = domain.coords(p);
                let x = coords[0];
                let y = &coords[1..];
                let (s, sp) = smoothstep(x);
                let y0 = invert_isotopy(&interps, y, s)?;
                let mut dmat = [[0.0f64; 2]; 2];
                for (a, interp) in interps.iter().enumerate() {
                    let (v, g) = interp.eval_with_grad(&y0);
                    drift[a][p] = sp * v;
                    for c in 0..b {
                        dmat[a][c] = g[c];
                    }
                }
                let det = match b {
                    1 => 1.0 + s * dmat[0][0],
                    _ => {
                        (1.0 + s * dmat[0][0]) * (1.0 + s * dmat[1][1])
                            - s * dmat[0][1] * s * dmat[1][0]
                    }
                };
                if det <= 1e-10 {
                    return Err(Error::BaseMapNotInvertible { jacobian: det });
                }
                jac[p] = det;
            }
        }
    }

    // λ = r(y) / J; X = (1/r, drift/r); Ω = λ dx∧…; g = λ^{2/n} I
    let mut lambda = vec![0.0f64; len];
    let mut x_comps: Vec<Vec<f64>> = vec![vec![0.0f64; len]; n];
    for p in 0..len {
        let coords = domain.coords(p);
        let r = roof_interp.eval(&coords[1..]);
        lambda[p] = r / jac[p];
        x_comps[0][p] = 1.0 / r;
        for a in 0..b {
            x_comps[1 + a][p] = drift[a][p] / r;
        }
    }

    let x = VectorField::from_components(
        &domain,
        x_comps
            .into_iter()
            .map(|vals| ScalarField::from_values(&domain, vals))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let omega = KForm::from_components(
        &domain,
        n,
        vec![ScalarField::from_values(&domain, lambda.clone())?],
    )?;
    let conformal_power = 2.0 / n as f64;
    let metric = MetricField::diagonal(
        &domain,
        (0..n)
            .map(|_| {
                ScalarField::from_values(
                    &domain,
                    lambda.iter().map(|&l| l.powf(conformal_power)).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?,
    )?;

    let scenario = Scenario::new(domain, metric, x, omega, Tolerances::default())?;
    // a suspension is a scenario only when the base map preserves the base
    // volume; otherwise i_X Ω fails the closedness check
    scenario.ensure_valid()?;
    Ok(scenario)
}

fn invert_isotopy(
    interps: &[TrigInterpolant],
    y: &[f64],
    s: f64,
) -> Result<Vec<f64>> {
    let b = interps.len();
    // initial guess y0 = y − s δ(y)
    let mut y0: Vec<f64> = (0..b).map(|a| y[a] - s * interps[a].eval(y)).collect();
    for _ in 0..60 {
        let mut residual = vec![0.0f64; b];
        let mut dmat = [[0.0f64; 2]; 2];
        for (a, interp) in interps.iter().enumerate() {
            let (v, g) = interp.eval_with_grad(&y0);
            residual[a] = y0[a] + s * v - y[a];
            for c in 0..b {
                dmat[a][c] = if a == c { 1.0 } else { 0.0 } + s * g[c];
            }
        }
        let max_res = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        if max_res < 1e-13 {
            return Ok(y0);
        }
        match b {
            1 => {
                if dmat[0][0].abs() < 1e-10 {
                    return Err(Error::BaseMapNotInvertible { jacobian: dmat[0][0] });
                }
                y0[0] -= residual[0] / dmat[0][0];
            }
            _ => {
                let det = dmat[0][0] * dmat[1][1] - dmat[0][1] * dmat[1][0];
                if det.abs() < 1e-10 {
                    return Err(Error::BaseMapNotInvertible { jacobian: det });
                }
                let dx = (residual[0] * dmat[1][1] - residual[1] * dmat[0][1]) / det;
                let dy = (residual[1] * dmat[0][0] - residual[0] * dmat[1][0]) / det;
                y0[0] -= dx;
                y0[1] -= dy;
            }
        }
    }
    Err(Error::Other("isotopy inversion did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::wrap_half;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rotation_with_unit_roof_is_linear_flow() {
        let base = TorusDomain::t1(64).unwrap();
        let spec = SuspensionSpec {
            base: BaseMap::Rotation(vec![0.41421]),
            roof: ScalarField::constant(&base, 1.0),
        };
        let s = suspend(&spec, 64).unwrap();
        assert!(s.validate().passed(), "{}", s.validate());
        for p in [0usize, 100, 2000] {
            assert_abs_diff_eq!(s.x.component(0).values()[p], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(s.x.component(1).values()[p], 0.41421, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_base_with_roof_two() {
        let base = TorusDomain::t1(32).unwrap();
        let spec = SuspensionSpec {
            base: BaseMap::Rotation(vec![0.0]),
            roof: ScalarField::constant(&base, 2.0),
        };
        let s = suspend(&spec, 32).unwrap();
        assert!(s.validate().passed());
        assert_abs_diff_eq!(s.x.component(0).values()[5], 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(s.x.component(1).values()[5], 0.0, epsilon = 1e-13);
    }

    #[test]
    fn rotation_with_cosine_roof_validates() {
        let base = TorusDomain::t1(128).unwrap();
        let spec = SuspensionSpec {
            base: BaseMap::Rotation(vec![0.25]),
            roof: ScalarField::from_fn(&base, |y| 1.0 + 0.1 * (TAU * y[0]).cos()),
        };
        let s = suspend(&spec, 128).unwrap();
        let report = s.validate();
        assert!(report.passed(), "{report}");
        // Ω coefficient is the roof itself for rotations
        for p in [0usize, 77, 9000] {
            let coords = s.domain.coords(p);
            let expected = 1.0 + 0.1 * (TAU * coords[1]).cos();
            assert_abs_diff_eq!(s.omega.components()[0].values()[p], expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn sampled_shear_round_trips_the_base_map() {
        // volume-preserving base map of T^2: a shear (y, z) ↦ (y + δ(z), z)
        let base = TorusDomain::t2(32).unwrap();
        let delta_y = ScalarField::from_fn(&base, |p| 0.2 + 0.05 * (TAU * p[1]).sin());
        let delta_z = ScalarField::zeros(&base);
        let spec = SuspensionSpec {
            base: BaseMap::Displacement(vec![delta_y.clone(), delta_z]),
            roof: ScalarField::constant(&base, 1.0),
        };
        let s = suspend(&spec, 32).unwrap();
        let report = s.validate();
        assert!(report.passed(), "{report}");

        // integrate the drift ODE across one flow period: recovers the shear
        let integ = crate::section::flow::FlowIntegrator::new(&s.x);
        for (y0, z0) in [(0.0, 0.1), (0.3, 0.55), (0.62, 0.9)] {
            let end = integ.flow_time(&[0.0, y0, z0], 1.0_f64);
            // unit roof: the x-period is exactly 1
            assert_abs_diff_eq!(end[0], 1.0, epsilon = 1e-9);
            let expected = spec.base.apply(&[y0, z0]);
            assert!(
                wrap_half(end[1] - expected[0]).abs() < 1e-7
                    && wrap_half(end[2] - expected[1]).abs() < 1e-7,
                "seed ({y0}, {z0}): got ({}, {}) want {:?}",
                end[1],
                end[2],
                expected
            );
        }
    }

    #[test]
    fn sampled_non_volume_preserving_base_is_rejected() {
        // y ↦ y + 0.2 + 0.05 sin(2πy) distorts Lebesgue measure on the base:
        // no invariant volume of the product form exists, validation fails
        let base = TorusDomain::t1(64).unwrap();
        let delta = ScalarField::from_fn(&base, |y| 0.05 * (TAU * y[0]).sin() + 0.2);
        let spec = SuspensionSpec {
            base: BaseMap::Displacement(vec![delta]),
            roof: ScalarField::constant(&base, 1.0),
        };
        assert!(matches!(suspend(&spec, 64), Err(Error::InvalidScenario { .. })));
    }

    #[test]
    fn sampled_displacement_rejects_folding_maps() {
        let base = TorusDomain::t1(64).unwrap();
        // δ' < −1 somewhere: graph condition violated
        let delta = ScalarField::from_fn(&base, |y| 0.3 * (TAU * y[0]).sin());
        let spec = SuspensionSpec {
            base: BaseMap::Displacement(vec![delta]),
            roof: ScalarField::constant(&base, 1.0),
        };
        assert!(matches!(
            suspend(&spec, 64),
            Err(Error::BaseMapNotInvertible { .. })
        ));
    }

    #[test]
    fn roof_must_be_positive() {
        let base = TorusDomain::t1(32).unwrap();
        let spec = SuspensionSpec {
            base: BaseMap::Rotation(vec![0.1]),
            roof: ScalarField::from_fn(&base, |y| (TAU * y[0]).sin()),
        };
        assert!(matches!(suspend(&spec, 32), Err(Error::RoofNotPositive { .. })));
    }
}
