//! The circle-valued primitive `F(x) = Σ k_i x_i + q f(x) mod 1` and the
//! marching extraction of its level sets.
//!
//! Level sets of `F` realize the integrable transverse plane field
//! explicitly: `dF = q ω'` for the rationalized closed form `ω'`, so a
//! positive pairing `ω'(X) > 0` makes every level set a global cross
//! section with `dF/dt ≥ transversality margin` along the flow.

use crate::error::Error;
use crate::grid::{wrap_half, wrap_unit, ScalarField, TrigInterpolant};
use crate::projection::ClosedApproximation;
use crate::scenario::Scenario;
use crate::section::rational::PeriodData;
use crate::Result;

const NEWTON_TOL: f64 = 1e-11;
const NEWTON_MAX_ITERS: usize = 50;

/// Circle map data `F(x) = Σ k_i x_i + q f(x) mod 1`.
#[derive(Clone, Debug)]
pub struct CircleMap {
    pub k: Vec<i64>,
    pub q: i64,
    /// Mean-zero exact-part potential `f`.
    pub potential: ScalarField,
    /// `min_p dF(X) = min_p q ω'(X)` over the grid.
    pub transversality_margin: f64,
    interp: TrigInterpolant,
}

impl CircleMap {
    /// Build directly from class data; used for externally supplied
    /// primitives (e.g. transversality-failure demos).  The margin is the
    /// grid minimum of `dF(X)` and may be non-positive.
    pub fn from_parts(k: Vec<i64>, q: i64, potential: ScalarField, s: &Scenario) -> Self {
        let interp = TrigInterpolant::new(&potential);
        let mut map =
            Self { k, q, potential, transversality_margin: 0.0, interp };
        map.transversality_margin = map.pairing_min(s).1;
        map
    }

    /// Fractional value `F(x) mod 1` in `[0, 1)`.
    pub fn eval_frac(&self, p: &[f64]) -> f64 {
        let mut v = 0.0;
        for (a, &ki) in self.k.iter().enumerate() {
            v += ki as f64 * p[a];
        }
        v += self.q as f64 * self.interp.eval(p);
        wrap_unit(v)
    }

    /// Gradient `∇F = k + q ∇f` at an arbitrary point.
    pub fn grad(&self, p: &[f64]) -> [f64; 3] {
        let mut g = self.interp.grad(p);
        for slot in g.iter_mut() {
            *slot *= self.q as f64;
        }
        for (a, &ki) in self.k.iter().enumerate() {
            g[a] += ki as f64;
        }
        g
    }

    /// Rate of change of the lift along the flow at a point.
    pub fn rate_along(&self, p: &[f64], velocity: &[f64]) -> f64 {
        let g = self.grad(p);
        g.iter().zip(velocity).map(|(a, b)| a * b).sum()
    }

    /// Grid minimum (argmin, min) of `dF(X)`.
    fn pairing_min(&self, s: &Scenario) -> (usize, f64) {
        let domain = s.domain.clone();
        let n = domain.dim();
        let grads: Vec<ScalarField> = (0..n).map(|a| self.potential.derivative(a)).collect();
        let mut best = (0usize, f64::INFINITY);
        for p in 0..domain.len() {
            let mut v = 0.0;
            for a in 0..n {
                let df = self.k[a] as f64 + self.q as f64 * grads[a].values()[p];
                v += df * s.x.component(a).values()[p];
            }
            if v < best.1 {
                best = (p, v);
            }
        }
        best
    }
}

/// Build the primitive from rationalized periods and the projection's exact
/// potential; re-verifies positivity of `dF(X)` and the consistency
/// `dF = q ω'`.
pub fn circle_map(
    pd: &PeriodData,
    closed: &ClosedApproximation,
    s: &Scenario,
) -> Result<CircleMap> {
    let domain = s.domain.clone();
    let n = domain.dim();

    // dF = q ω' demands ∇f to reproduce the exact part of ω
    let mut consistency = 0.0f64;
    for a in 0..n {
        let grad_a = closed.exact_potential.derivative(a);
        let exact_a = closed.omega.components()[a]
            .sub(&ScalarField::constant(&domain, closed.harmonic_part[a]));
        consistency = consistency.max(grad_a.sub(&exact_a).max_abs());
    }
    if consistency > 1e-9 {
        return Err(Error::Other(format!(
            "primitive potential inconsistent with the closed form: residual {consistency:.3e}"
        )));
    }

    let potential = closed.exact_potential.clone();
    let map = CircleMap::from_parts(pd.k.clone(), pd.q, potential, s);
    if map.transversality_margin <= 0.0 {
        let (argmin, min) = map.pairing_min(s);
        return Err(Error::PositivityViolated {
            min_pairing: min,
            point: domain.unflatten(argmin),
        });
    }
    Ok(map)
}

/// One cross-section sample: a refined level-set point with an orthonormal
/// tangent frame and the achieved `|F − level|` residual.
#[derive(Clone, Debug)]
pub struct SectionSample {
    pub point: Vec<f64>,
    /// `n − 1` tangent vectors orthogonal to `∇F` (Euclidean, unit).
    pub frame: Vec<Vec<f64>>,
    pub f_residual: f64,
}

/// Extracted global cross section `F^{-1}(level)`.
#[derive(Clone, Debug)]
pub struct CrossSection {
    pub map: CircleMap,
    pub level: f64,
    pub samples: Vec<SectionSample>,
    pub transversality_margin: f64,
}

/// Marching extraction of `F^{-1}(level)`: every grid edge crossed by the
/// level set contributes one sample, refined by Newton along `∇F` to
/// `|F − level| ≤ 1e−9`.
pub fn extract_section(map: &CircleMap, level: f64, s: &Scenario) -> Result<CrossSection> {
    let domain = s.domain.clone();
    let n = domain.dim();

    // fractional F at grid nodes
    let mut f_frac = vec![0.0f64; domain.len()];
    for (p, slot) in f_frac.iter_mut().enumerate() {
        *slot = map.eval_frac(&domain.coords(p));
    }

    let mut samples = Vec::new();
    for axis in 0..n {
        let h = domain.spacing(axis);
        for p in 0..domain.len() {
            let mut idx = domain.unflatten(p);
            idx[axis] = (idx[axis] + 1) % domain.resolution()[axis];
            let pn = domain.flatten(&idx);

            let u = wrap_half(f_frac[p] - level);
            let v = u + wrap_half(f_frac[pn] - f_frac[p]);
            // crossings owned by this edge: start node exactly on the level,
            // or a strict interior sign change
            let s_star = if u == 0.0 && v == 0.0 {
                continue; // edge runs inside the level set
            } else if u == 0.0 {
                0.0
            } else if u * v < 0.0 {
                u / (u - v)
            } else {
                continue;
            };

            let mut point = domain.coords(p);
            point[axis] += s_star * h;

            let residual = project_to_level(map, &mut point, level, n)?;
            for slot in point.iter_mut() {
                *slot = wrap_unit(*slot);
            }

            let frame = tangent_frame(map, &point, n);
            samples.push(SectionSample { point, frame, f_residual: residual });
        }
    }

    if samples.is_empty() {
        return Err(Error::EmptyLevelSet { level });
    }
    Ok(CrossSection {
        map: map.clone(),
        level,
        samples,
        transversality_margin: map.transversality_margin,
    })
}

/// Newton refinement along `∇F` to `|F − level| ≤ 1e−9`; returns the
/// achieved residual.
pub(crate) fn project_to_level(
    map: &CircleMap,
    point: &mut [f64],
    level: f64,
    n: usize,
) -> Result<f64> {
    let mut residual = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITERS {
        let r = wrap_half(map.eval_frac(point) - level);
        residual = r.abs();
        if residual <= NEWTON_TOL {
            break;
        }
        let g = map.grad(point);
        let g2: f64 = g.iter().take(n).map(|x| x * x).sum();
        for (a, slot) in point.iter_mut().enumerate().take(n) {
            *slot -= r * g[a] / g2;
        }
    }
    if residual > 1e-9 {
        return Err(Error::Other(format!(
            "level-set refinement stalled at residual {residual:.3e}"
        )));
    }
    Ok(residual)
}

/// Orthonormal tangent frame of the level set at a point, oriented so that
/// `(∇F, frame...)` is positively oriented.
fn tangent_frame(map: &CircleMap, point: &[f64], n: usize) -> Vec<Vec<f64>> {
    let g = map.grad(point);
    if n == 2 {
        let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        vec![vec![-g[1] / norm, g[0] / norm]]
    } else {
        let gn = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        let gu = [g[0] / gn, g[1] / gn, g[2] / gn];
        // least-aligned axis seeds the first tangent
        let mut axis = 0;
        for a in 1..3 {
            if gu[a].abs() < gu[axis].abs() {
                axis = a;
            }
        }
        let mut e = [0.0; 3];
        e[axis] = 1.0;
        let t1 = cross(&e, &gu);
        let t1n = norm3(&t1);
        let t1 = [t1[0] / t1n, t1[1] / t1n, t1[2] / t1n];
        let t2 = cross(&gu, &t1);
        vec![t1.to_vec(), t2.to_vec()]
    }
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criterion::build_closed_one_form;
    use crate::projection::hodge_closed_projection;
    use crate::scenario::fixtures::*;
    use crate::section::rational::{periods, rationalize_periods};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::TAU;

    #[test]
    fn circle_map_fixture_a() {
        let s = fixture_a(64);
        let cert = build_closed_one_form(&s).unwrap();
        let cert = cert.accepted().unwrap();
        let c = periods(&cert.closed.omega).unwrap();
        let pd = rationalize_periods(&c, &s.x, 0.5 * cert.min_pairing, 100, None).unwrap();
        assert_eq!(pd.k, vec![1, 0]);
        assert_eq!(pd.q, 1);
        let map = circle_map(&pd, &cert.closed, &s).unwrap();
        // F(x, y) = x
        assert_abs_diff_eq!(map.eval_frac(&[0.3, 0.9]), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(map.transversality_margin, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn circle_map_fixture_b_with_class_2_1() {
        let s = fixture_b(128);
        let cert = build_closed_one_form(&s).unwrap();
        let cert = cert.accepted().unwrap();
        let c = periods(&cert.closed.omega).unwrap();
        let pd =
            rationalize_periods(&c, &s.x, 0.5 * cert.min_pairing, 100, Some(&[2, 1])).unwrap();
        // hint (2,1) has q = 1 semantics; with c = (1, 0.5) the candidate
        // (2,1)/1 deviates by 0.5 < budget, so it is accepted as-is
        let map = circle_map(&pd, &cert.closed, &s).unwrap();
        // dF/dt = 2 X_1 + X_2 = 2.5 + 0.05 sin(2 pi x) > 0
        let margin = map.transversality_margin;
        assert!(margin > 2.44 && margin < 2.46, "margin {margin}");
        // F = 2x + y mod 1
        assert_abs_diff_eq!(map.eval_frac(&[0.2, 0.3]), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn circle_map_includes_exact_potential() {
        // metric g = diag(1 + 0.1 sin 2 pi x, 1), X = (1, 0):
        // theta = (1 + 0.1 sin 2 pi x) dx has a genuine exact part
        use crate::form::VectorField;
        use crate::grid::{ScalarField, TorusDomain};
        use crate::metric::MetricField;
        use crate::scenario::{Scenario, Tolerances};

        let d = TorusDomain::t2(64).unwrap();
        let g = MetricField::diagonal(
            &d,
            vec![
                ScalarField::from_fn(&d, |p| 1.0 + 0.1 * (TAU * p[0]).sin()),
                ScalarField::constant(&d, 1.0),
            ],
        )
        .unwrap();
        let x = VectorField::constant(&d, &[1.0, 0.0]).unwrap();
        let theta = g.flat_map(&x).unwrap();
        let closed = hodge_closed_projection(&theta, &g).unwrap();
        assert!(closed.exact_potential.max_abs() > 1e-3, "nonzero exact part expected");

        // dF = q omega' to spectral accuracy
        let omega = g.volume_form();
        let s = Scenario::new(d.clone(), g, x, omega, Tolerances::default()).unwrap();
        let c = periods(&closed.omega).unwrap();
        let pd = rationalize_periods(&c, &s.x, 0.45, 100, None).unwrap();
        let map = circle_map(&pd, &closed, &s).unwrap();
        // dF = q ω' with ω' = (1 + 0.1 sin 2πx) dx here
        for p in [[0.15, 0.4], [0.6, 0.1], [0.95, 0.8]] {
            let grad = map.grad(&p);
            let omega_x = 1.0 + 0.1 * (TAU * p[0]).sin();
            let qomega = pd.q as f64 * (omega_x + pd.perturbation[0]);
            assert_abs_diff_eq!(grad[0], qomega, epsilon = 1e-9);
            assert_abs_diff_eq!(grad[1], 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn extract_fixture_a_section_is_x_zero_circle() {
        let s = fixture_a(64);
        let cert = build_closed_one_form(&s).unwrap();
        let cert = cert.accepted().unwrap();
        let c = periods(&cert.closed.omega).unwrap();
        let pd = rationalize_periods(&c, &s.x, 0.5, 100, None).unwrap();
        let map = circle_map(&pd, &cert.closed, &s).unwrap();
        let section = extract_section(&map, 0.0, &s).unwrap();
        assert_eq!(section.samples.len(), 64);
        for sample in &section.samples {
            assert!(sample.point[0].min(1.0 - sample.point[0]) < 1e-10);
            assert!(sample.f_residual <= 1e-9);
            // tangent frame is ± e_y
            assert_abs_diff_eq!(sample.frame[0][0], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(sample.frame[0][1].abs(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn extract_fixture_b_class21_matches_parametric_oracle() {
        let s = fixture_b(128);
        let cert = build_closed_one_form(&s).unwrap();
        let cert = cert.accepted().unwrap();
        let c = periods(&cert.closed.omega).unwrap();
        let pd =
            rationalize_periods(&c, &s.x, 0.5 * cert.min_pairing, 100, Some(&[2, 1])).unwrap();
        let map = circle_map(&pd, &cert.closed, &s).unwrap();
        let section = extract_section(&map, 0.0, &s).unwrap();
        assert!(!section.samples.is_empty());
        for sample in &section.samples {
            // the curve is 2x + y ≡ 0: check y = -2x mod 1
            let expected_y = wrap_unit(-2.0 * sample.point[0]);
            let dev = wrap_half(sample.point[1] - expected_y).abs();
            assert!(dev < 1e-9, "sample off the line: {:?}", sample.point);
        }
    }

    #[test]
    fn extract_externally_supplied_primitive_on_t3() {
        // F = z on fixture C (used by the transversality-failure demo)
        let s = fixture_c_flat(16);
        let map = CircleMap::from_parts(
            vec![0, 0, 1],
            1,
            crate::grid::ScalarField::zeros(&s.domain),
            &s,
        );
        // flow is tangent to the level set: margin 0
        assert_abs_diff_eq!(map.transversality_margin, 0.0, epsilon = 1e-14);
        let section = extract_section(&map, 0.0, &s).unwrap();
        // a 2-torus worth of samples
        assert_eq!(section.samples.len(), 16 * 16);
        for sample in &section.samples {
            assert!(sample.point[2].min(1.0 - sample.point[2]) < 1e-10);
        }
    }

    #[test]
    fn positivity_violation_is_reported() {
        let s = fixture_c_flat(16);
        let theta = s.metric.flat_map(&s.x).unwrap();
        let closed = hodge_closed_projection(&theta, &s.metric).unwrap();
        let pd = PeriodData {
            c: vec![0.0, 0.0, 0.0],
            k: vec![0, 0, 1],
            q: 1,
            perturbation: vec![0.0, 0.0, 1.0],
            pairing_sup: 0.0,
        };
        assert!(matches!(
            circle_map(&pd, &closed, &s),
            Err(Error::PositivityViolated { .. })
        ));
    }
}
