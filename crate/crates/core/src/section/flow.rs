//! Orbit integration and the first-return machinery.
//!
//! The generator is evaluated off-grid through its trigonometric
//! interpolant, so the integrated field is exactly the band-limited model
//! the rest of the pipeline uses.  Returns are detected on the monotone
//! lift of the primitive `F` (one full turn of the circle value) and the
//! event time is resolved by bisection with a Newton polish.

use rand::Rng;

use crate::error::Error;
use crate::form::VectorField;
use crate::grid::{wrap_half, wrap_unit, TrigInterpolant};
use crate::scenario::Scenario;
use crate::section::level::{project_to_level, CircleMap, CrossSection};
use crate::Result;

const BASE_STEP: f64 = 0.01;
const STEP_SPEED_FACTOR: f64 = 0.1;
const LIFT_STEP_CAP: f64 = 0.25;
const EVENT_TIME_TOL: f64 = 1e-13;

/// Fixed-step RK4 integrator over the trigonometric interpolant of `X`.
pub struct FlowIntegrator {
    dim: usize,
    comps: Vec<TrigInterpolant>,
    /// Euclidean sup of the speed over the grid.
    pub sup_speed: f64,
    /// Base step `min(0.01, 0.1 / ‖X‖_sup)`.
    pub step: f64,
}

impl FlowIntegrator {
    pub fn new(x: &VectorField) -> Self {
        let sup_speed = x.euclidean_sup();
        let step = BASE_STEP.min(STEP_SPEED_FACTOR / sup_speed.max(1e-12));
        Self {
            dim: x.domain().dim(),
            comps: x.components().iter().map(TrigInterpolant::new).collect(),
            sup_speed,
            step,
        }
    }

    pub fn velocity(&self, p: &[f64; 3]) -> [f64; 3] {
        let mut v = [0.0; 3];
        for (a, c) in self.comps.iter().enumerate() {
            v[a] = c.eval(&p[..]);
        }
        v
    }

    pub fn rk4_step(&self, p: &[f64; 3], h: f64) -> [f64; 3] {
        let k1 = self.velocity(p);
        let mut q = *p;
        for a in 0..self.dim {
            q[a] = p[a] + 0.5 * h * k1[a];
        }
        let k2 = self.velocity(&q);
        for a in 0..self.dim {
            q[a] = p[a] + 0.5 * h * k2[a];
        }
        let k3 = self.velocity(&q);
        for a in 0..self.dim {
            q[a] = p[a] + h * k3[a];
        }
        let k4 = self.velocity(&q);
        let mut out = *p;
        for a in 0..self.dim {
            out[a] = p[a] + h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        }
        out
    }

    /// Integrate for an exact duration (unwrapped coordinates).
    pub fn flow_time(&self, start: &[f64], t: f64) -> Vec<f64> {
        let mut p = [0.0; 3];
        p[..self.dim].copy_from_slice(start);
        let steps = (t / self.step).floor() as usize;
        for _ in 0..steps {
            p = self.rk4_step(&p, self.step);
        }
        let rest = t - steps as f64 * self.step;
        if rest > 0.0 {
            p = self.rk4_step(&p, rest);
        }
        p[..self.dim].to_vec()
    }
}

/// One first-return solve.
#[derive(Clone, Debug)]
pub struct ReturnResult {
    pub image: Vec<f64>,
    pub tau: f64,
    pub steps: usize,
    /// `|F(image) − level|` after projection.
    pub f_residual: f64,
}

/// Shared state for repeated return solves against one section.
pub(crate) struct ReturnContext<'a> {
    integ: FlowIntegrator,
    map: &'a CircleMap,
    level: f64,
    dim: usize,
    h: f64,
    max_steps: usize,
}

impl<'a> ReturnContext<'a> {
    pub fn new(s: &Scenario, map: &'a CircleMap, level: f64) -> Result<Self> {
        let margin = map.transversality_margin;
        if margin <= 0.0 {
            return Err(Error::MonotonicityLost { rate: margin });
        }
        let integ = FlowIntegrator::new(&s.x);
        // keep the per-step lift increment well inside half a turn
        let mut sup_rate = 0.0f64;
        for p in 0..s.domain.len() {
            let coords = s.domain.coords(p);
            let mut v = [0.0; 3];
            for a in 0..s.domain.dim() {
                v[a] = s.x.component(a).values()[p];
            }
            sup_rate = sup_rate.max(map.rate_along(&coords, &v[..s.domain.dim()]).abs());
        }
        let h = integ.step.min(LIFT_STEP_CAP / sup_rate.max(1e-12));
        let max_steps =
            (10.0 * map.q as f64 / (h * margin)).ceil() as usize;
        Ok(Self { integ, map, level, dim: s.domain.dim(), h, max_steps })
    }

    pub fn run(&self, start: &[f64]) -> Result<ReturnResult> {
        let mut p = [0.0; 3];
        p[..self.dim].copy_from_slice(start);
        let mut prev_frac = self.map.eval_frac(&p[..self.dim]);
        let mut lift = 0.0f64;
        let mut steps = 0usize;
        let mut elapsed = 0.0f64;

        loop {
            if steps > self.max_steps {
                return Err(Error::ReturnBoundExceeded { steps });
            }
            let next = self.integ.rk4_step(&p, self.h);
            let next_frac = self.map.eval_frac(&next[..self.dim]);
            let dl = wrap_half(next_frac - prev_frac);
            if dl <= 0.0 {
                return Err(Error::MonotonicityLost { rate: dl / self.h });
            }
            if lift + dl >= 1.0 {
                let (delta, mut image) = self.locate_event(&p, prev_frac, 1.0 - lift);
                let tau = elapsed + delta;
                let f_residual =
                    project_to_level(self.map, &mut image[..self.dim], self.level, self.dim)?;
                let mut out = image[..self.dim].to_vec();
                for c in out.iter_mut() {
                    *c = wrap_unit(*c);
                }
                return Ok(ReturnResult { image: out, tau, steps, f_residual });
            }
            lift += dl;
            prev_frac = next_frac;
            p = next;
            elapsed += self.h;
            steps += 1;
        }
    }

    /// Bisection plus Newton polish for the event `lift(δ) = target`
    /// within one step from `p`.
    fn locate_event(&self, p: &[f64; 3], prev_frac: f64, target: f64) -> (f64, [f64; 3]) {
        let lift_at = |delta: f64| -> (f64, [f64; 3]) {
            if delta == 0.0 {
                return (0.0, *p);
            }
            let q = self.integ.rk4_step(p, delta);
            (wrap_half(self.map.eval_frac(&q[..self.dim]) - prev_frac), q)
        };
        let mut lo = 0.0f64;
        let mut hi = self.h;
        while hi - lo > EVENT_TIME_TOL {
            let mid = 0.5 * (lo + hi);
            let (l, _) = lift_at(mid);
            if l >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut delta = 0.5 * (lo + hi);
        // Newton polish on the same dense-output curve
        for _ in 0..3 {
            let (l, q) = lift_at(delta);
            let rate = self.map.rate_along(&q[..self.dim], &self.integ.velocity(&q)[..self.dim]);
            if rate <= 0.0 {
                break;
            }
            let next = delta - (l - target) / rate;
            if next.is_finite() && next > 0.0 && next <= self.h {
                delta = next;
            } else {
                break;
            }
        }
        let (_, q) = lift_at(delta);
        (delta, q)
    }
}

/// Follow the orbit of a section point until its first return.
pub fn flow_to_return(
    start: &[f64],
    s: &Scenario,
    map: &CircleMap,
    level: f64,
) -> Result<ReturnResult> {
    ReturnContext::new(s, map, level)?.run(start)
}

/// Aggregate integrator statistics for a batch of returns.
#[derive(Clone, Debug)]
pub struct IntegratorStats {
    pub total_steps: usize,
    pub max_f_residual: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub tau_mean: f64,
}

/// First-return map data over a seed batch.
#[derive(Clone, Debug)]
pub struct PoincareData {
    pub seeds: Vec<Vec<f64>>,
    pub images: Vec<Vec<f64>>,
    pub return_times: Vec<f64>,
    pub stats: IntegratorStats,
}

/// Map `flow_to_return` over the seeds, in order.
pub fn poincare_map(
    seeds: &[Vec<f64>],
    s: &Scenario,
    map: &CircleMap,
    level: f64,
) -> Result<PoincareData> {
    let ctx = ReturnContext::new(s, map, level)?;
    let mut images = Vec::with_capacity(seeds.len());
    let mut taus = Vec::with_capacity(seeds.len());
    let mut total_steps = 0usize;
    let mut max_res = 0.0f64;
    for seed in seeds {
        let r = ctx.run(seed)?;
        total_steps += r.steps;
        max_res = max_res.max(r.f_residual);
        images.push(r.image);
        taus.push(r.tau);
    }
    let tau_min = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let tau_max = taus.iter().copied().fold(0.0f64, f64::max);
    let tau_mean = taus.iter().sum::<f64>() / taus.len().max(1) as f64;
    Ok(PoincareData {
        seeds: seeds.to_vec(),
        images,
        return_times: taus,
        stats: IntegratorStats { total_steps, max_f_residual: max_res, tau_min, tau_max, tau_mean },
    })
}

/// Outcome of the induced-measure invariance check.
#[derive(Clone, Debug)]
pub struct MeasureReport {
    pub max_difference: f64,
    pub arcs: usize,
    pub total_measure: f64,
}

/// For `n = 2`: the density `ρ = i_X Ω` restricted to the section's unit
/// tangent defines a measure on the section curve; the first-return map
/// must preserve it.  Compares arc measures against their image arcs for
/// random arcs.
pub fn invariant_measure_check(
    section: &CrossSection,
    s: &Scenario,
    n_arcs: usize,
    rng: &mut impl Rng,
) -> Result<MeasureReport> {
    if s.domain.dim() != 2 {
        return Err(Error::BadDimension { actual: s.domain.dim() });
    }
    if section.samples.len() < 8 {
        return Err(Error::EmptySampleSet);
    }
    let canonical = s.canonical_form()?;
    let interps: Vec<TrigInterpolant> =
        canonical.components().iter().map(TrigInterpolant::new).collect();
    let map = &section.map;

    let density = |p: &[f64]| -> f64 {
        let g = map.grad(p);
        let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        let t = [-g[1] / norm, g[0] / norm];
        (interps[0].eval(p) * t[0] + interps[1].eval(p) * t[1]).abs()
    };

    // order the sample cloud into a cycle by nearest-neighbor walking;
    // collapse duplicate samples (edge crossings can coincide at grid nodes)
    let pts: Vec<&[f64]> = section.samples.iter().map(|s| s.point.as_slice()).collect();
    let order = {
        let raw = order_cycle(&pts);
        let mut unique: Vec<usize> = Vec::with_capacity(raw.len());
        for idx in raw {
            let dup = unique.iter().any(|&u| {
                let d0 = wrap_half(pts[idx][0] - pts[u][0]);
                let d1 = wrap_half(pts[idx][1] - pts[u][1]);
                d0 * d0 + d1 * d1 < 1e-14
            });
            if !dup {
                unique.push(idx);
            }
        }
        unique
    };
    let m = order.len();

    let seg_measure = |a: &[f64], b: &[f64]| -> f64 {
        let d = [wrap_half(b[0] - a[0]), wrap_half(b[1] - a[1])];
        let ds = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let mid = [a[0] + 0.5 * d[0], a[1] + 0.5 * d[1]];
        ds * (density(a) + 4.0 * density(&mid) + density(b)) / 6.0
    };

    // cumulative measure along the cycle
    let mut cum = vec![0.0f64; m];
    for i in 1..m {
        cum[i] = cum[i - 1] + seg_measure(pts[order[i - 1]], pts[order[i]]);
    }
    let total = cum[m - 1] + seg_measure(pts[order[m - 1]], pts[order[0]]);

    // measure coordinate of an arbitrary point on (or near) the curve
    let coordinate = |p: &[f64]| -> f64 {
        let mut best = (0usize, f64::INFINITY);
        for (rank, &idx) in order.iter().enumerate() {
            let d = [wrap_half(p[0] - pts[idx][0]), wrap_half(p[1] - pts[idx][1])];
            let dist = d[0] * d[0] + d[1] * d[1];
            if dist < best.1 {
                best = (rank, dist);
            }
        }
        let rank = best.0;
        let anchor = pts[order[rank]];
        let next = pts[order[(rank + 1) % m]];
        let dir = [wrap_half(next[0] - anchor[0]), wrap_half(next[1] - anchor[1])];
        let disp = [wrap_half(p[0] - anchor[0]), wrap_half(p[1] - anchor[1])];
        let sign = if disp[0] * dir[0] + disp[1] * dir[1] >= 0.0 { 1.0 } else { -1.0 };
        cum[rank] + sign * seg_measure(anchor, p)
    };

    let ctx = ReturnContext::new(s, map, section.level)?;
    let circular = |x: f64| -> f64 {
        let r = x.rem_euclid(total);
        r.min(total - r)
    };

    let mut max_diff = 0.0f64;
    for _ in 0..n_arcs {
        let i = rng.gen_range(0..m);
        let mut j = rng.gen_range(0..m);
        if i == j {
            j = (j + m / 3 + 1) % m;
        }
        let arc = (cum[j] - cum[i]).rem_euclid(total);
        let im_i = ctx.run(pts[order[i]])?;
        let im_j = ctx.run(pts[order[j]])?;
        let arc_image = (coordinate(&im_j.image) - coordinate(&im_i.image)).rem_euclid(total);
        max_diff = max_diff.max(circular(arc_image - arc));
    }
    Ok(MeasureReport { max_difference: max_diff, arcs: n_arcs, total_measure: total })
}

fn order_cycle(pts: &[&[f64]]) -> Vec<usize> {
    let m = pts.len();
    let mut visited = vec![false; m];
    let mut order = Vec::with_capacity(m);
    let mut current = 0usize;
    visited[0] = true;
    order.push(0);
    for _ in 1..m {
        let mut best = (usize::MAX, f64::INFINITY);
        for (cand, done) in visited.iter().enumerate() {
            if *done {
                continue;
            }
            let mut dist = 0.0;
            for a in 0..pts[0].len() {
                let d = wrap_half(pts[cand][a] - pts[current][a]);
                dist += d * d;
            }
            if dist < best.1 {
                best = (cand, dist);
            }
        }
        current = best.0;
        visited[current] = true;
        order.push(current);
    }
    order
}

/// Spot-check for volume preservation of the integrator: the determinant of
/// the numerical Jacobian of the time-`t` flow map on a seed grid; returns
/// the largest `|det − 1|`.
pub fn time_one_jacobian_deviation(
    s: &Scenario,
    seeds_per_axis: usize,
    t: f64,
) -> Result<f64> {
    let integ = FlowIntegrator::new(&s.x);
    let n = s.domain.dim();
    let eps = 1e-5;
    let mut worst = 0.0f64;
    let seed_count = seeds_per_axis.pow(n as u32);
    for flat in 0..seed_count {
        let mut rest = flat;
        let mut seed = vec![0.0f64; n];
        for slot in seed.iter_mut().rev() {
            *slot = (rest % seeds_per_axis) as f64 / seeds_per_axis as f64;
            rest /= seeds_per_axis;
        }
        let mut jac = vec![vec![0.0f64; n]; n];
        for a in 0..n {
            let mut plus = seed.clone();
            plus[a] += eps;
            let mut minus = seed.clone();
            minus[a] -= eps;
            let fp = integ.flow_time(&plus, t);
            let fm = integ.flow_time(&minus, t);
            for r in 0..n {
                jac[r][a] = (fp[r] - fm[r]) / (2.0 * eps);
            }
        }
        let det = match n {
            2 => jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0],
            _ => {
                jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1])
                    - jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0])
                    + jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0])
            }
        };
        worst = worst.max((det - 1.0).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criterion::build_closed_one_form;
    use crate::scenario::fixtures::*;
    use crate::section::level::{circle_map, extract_section};
    use crate::section::rational::{periods, rationalize_periods};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn pipeline_section(
        s: &Scenario,
        hint: Option<&[i64]>,
    ) -> (CrossSection, crate::projection::ClosedApproximation) {
        let cert = build_closed_one_form(s).unwrap();
        let cert = cert.accepted().expect("construction succeeds");
        let c = periods(&cert.closed.omega).unwrap();
        let budget = 0.5 * cert.min_pairing;
        let pd = rationalize_periods(&c, &s.x, budget, 1_000_000, hint).unwrap();
        let map = circle_map(&pd, &cert.closed, s).unwrap();
        let section = extract_section(&map, 0.0, s).unwrap();
        (section, cert.closed.clone())
    }

    use crate::scenario::Scenario;
    use crate::section::level::CrossSection;

    #[test]
    fn fixture_a_unit_return() {
        let s = fixture_a(64);
        let (section, _) = pipeline_section(&s, None);
        let r = flow_to_return(&[0.0, 0.25], &s, &section.map, 0.0).unwrap();
        assert_abs_diff_eq!(r.tau, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(wrap_half(r.image[1] - 0.25), 0.0, epsilon = 1e-8);
        assert!(r.f_residual <= 1e-9);
    }

    #[test]
    fn linear_flow_rotation_return() {
        // X = (1, 0.41421) with class hint (1,0): exact linear-flow oracle
        use crate::form::VectorField;
        use crate::metric::MetricField;
        use crate::scenario::Tolerances;
        let d = crate::grid::TorusDomain::t2(64).unwrap();
        let g = MetricField::flat(&d);
        let x = VectorField::constant(&d, &[1.0, 0.41421]).unwrap();
        let s = Scenario::new(d, g.clone(), x, g.volume_form(), Tolerances::default()).unwrap();
        let (section, _) = pipeline_section(&s, Some(&[1, 0]));
        for y0 in [0.0, 0.3, 0.77] {
            let r = flow_to_return(&[0.0, y0], &s, &section.map, 0.0).unwrap();
            assert_abs_diff_eq!(r.tau, 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(
                wrap_half(r.image[1] - wrap_unit(y0 + 0.41421)),
                0.0,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn fixture_b_class21_return_matches_scalar_ode_oracle() {
        let s = fixture_b(128);
        let (section, _) = pipeline_section(&s, Some(&[2, 1]));
        let r = flow_to_return(&[0.0, 0.0], &s, &section.map, 0.0).unwrap();
        // along the orbit x(t) = t, the lift is 2.5 t + (0.05/2π)(1 − cos 2πt);
        // solve lift(τ) = 1 by Newton
        let mut tau = 0.4f64;
        for _ in 0..60 {
            let f = 2.5 * tau + (0.05 / TAU) * (1.0 - (TAU * tau).cos()) - 1.0;
            let fp = 2.5 + 0.05 * (TAU * tau).sin();
            tau -= f / fp;
        }
        assert!((r.tau - tau).abs() <= 1e-4, "tau {} vs oracle {}", r.tau, tau);
        assert!((r.tau - tau).abs() <= 1e-8, "integrator should do much better");
    }

    #[test]
    fn poincare_fixture_a_is_identity() {
        let s = fixture_a(64);
        let (section, _) = pipeline_section(&s, None);
        let seeds: Vec<Vec<f64>> = (0..64).map(|j| vec![0.0, j as f64 / 64.0]).collect();
        let pd = poincare_map(&seeds, &s, &section.map, 0.0).unwrap();
        for (seed, (image, tau)) in
            seeds.iter().zip(pd.images.iter().zip(&pd.return_times))
        {
            assert_abs_diff_eq!(*tau, 1.0, epsilon = 1e-8);
            assert_abs_diff_eq!(wrap_half(image[1] - seed[1]), 0.0, epsilon = 1e-8);
        }
        // return-time bound
        assert!(pd.stats.tau_max <= section.map.q as f64 / section.transversality_margin);
    }

    #[test]
    fn poincare_rotation_by_irrational() {
        use crate::form::VectorField;
        use crate::metric::MetricField;
        use crate::scenario::Tolerances;
        let d = crate::grid::TorusDomain::t2(64).unwrap();
        let g = MetricField::flat(&d);
        let x = VectorField::constant(&d, &[1.0, 0.41421]).unwrap();
        let s = Scenario::new(d, g.clone(), x, g.volume_form(), Tolerances::default()).unwrap();
        let (section, _) = pipeline_section(&s, Some(&[1, 0]));
        let seeds: Vec<Vec<f64>> = (0..64).map(|j| vec![0.0, j as f64 / 64.0]).collect();
        let pd = poincare_map(&seeds, &s, &section.map, 0.0).unwrap();
        for (seed, image) in seeds.iter().zip(&pd.images) {
            let expected = wrap_unit(seed[1] + 0.41421);
            assert!(wrap_half(image[1] - expected).abs() <= 1e-6);
        }
    }

    #[test]
    fn poincare_fixture_b_hint_10_is_half_shift() {
        // P(y) = y + 0.5 exactly: the y-drift integrates to 0.5 over one
        // x-period, and tau = 1
        let s = fixture_b(128);
        let (section, _) = pipeline_section(&s, Some(&[1, 0]));
        let seeds: Vec<Vec<f64>> = (0..32).map(|j| vec![0.0, j as f64 / 32.0]).collect();
        let pd = poincare_map(&seeds, &s, &section.map, 0.0).unwrap();
        for (seed, (image, tau)) in
            seeds.iter().zip(pd.images.iter().zip(&pd.return_times))
        {
            assert_abs_diff_eq!(*tau, 1.0, epsilon = 1e-6);
            let expected = wrap_unit(seed[1] + 0.5);
            assert!(wrap_half(image[1] - expected).abs() <= 1e-6);
        }
    }

    #[test]
    fn measure_invariance_fixture_a_exact() {
        let s = fixture_a(64);
        let (section, _) = pipeline_section(&s, None);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let report = invariant_measure_check(&section, &s, 16, &mut rng).unwrap();
        assert!(report.max_difference <= 1e-8, "diff {}", report.max_difference);
    }

    #[test]
    fn measure_invariance_rotation() {
        use crate::form::VectorField;
        use crate::metric::MetricField;
        use crate::scenario::Tolerances;
        let d = crate::grid::TorusDomain::t2(64).unwrap();
        let g = MetricField::flat(&d);
        let x = VectorField::constant(&d, &[1.0, 0.41421]).unwrap();
        let s = Scenario::new(d, g.clone(), x, g.volume_form(), Tolerances::default()).unwrap();
        let (section, _) = pipeline_section(&s, Some(&[1, 0]));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let report = invariant_measure_check(&section, &s, 16, &mut rng).unwrap();
        assert!(report.max_difference <= 1e-8, "diff {}", report.max_difference);
    }

    #[test]
    fn measure_invariance_fixture_b() {
        let s = fixture_b(128);
        let (section, _) = pipeline_section(&s, None);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let report = invariant_measure_check(&section, &s, 16, &mut rng).unwrap();
        assert!(report.max_difference <= 1e-4, "diff {}", report.max_difference);
    }

    #[test]
    fn time_one_jacobian_fixture_b() {
        let s = fixture_b(128);
        let dev = time_one_jacobian_deviation(&s, 16, 1.0).unwrap();
        assert!(dev <= 1e-5, "jacobian deviation {dev}");
    }
}
