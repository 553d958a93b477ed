//! Periodic grids over flat tori and band-limited scalar fields on them.
//!
//! Coordinates are periodic with period 1 per axis; a resolution of `N`
//! places samples at `j / N`.  Fields are interpreted through their
//! trigonometric interpolant, which makes spectral differentiation exact on
//! band-limited data.

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::TAU;

use crate::error::Error;
use crate::fft;
use crate::Result;

/// Wrap a coordinate into `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r == 1.0 {
        0.0
    } else {
        r
    }
}

/// Wrap a difference into `[-0.5, 0.5]` (circle distance with sign).
pub fn wrap_half(x: f64) -> f64 {
    x - x.round()
}

/// A flat torus `T^n` sampled on a uniform periodic grid.
///
/// Scenario domains have dimension 2 or 3; one-dimensional grids are allowed
/// so that suspension base data (roof functions, displacement fields on
/// `T^{n-1}`) can reuse the same machinery.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TorusDomain {
    resolution: Vec<usize>,
}

impl TorusDomain {
    pub fn new(resolution: &[usize]) -> Result<Self> {
        let dim = resolution.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::BadDimension { actual: dim });
        }
        for &n in resolution {
            if n < 8 || n % 2 != 0 {
                return Err(Error::BadResolution { actual: n });
            }
        }
        Ok(Self { resolution: resolution.to_vec() })
    }

    /// Square grid on `T^2`.
    pub fn t2(n: usize) -> Result<Self> {
        Self::new(&[n, n])
    }

    /// Cubic grid on `T^3`.
    pub fn t3(n: usize) -> Result<Self> {
        Self::new(&[n, n, n])
    }

    /// Grid on `T^1`, used for suspension base data.
    pub fn t1(n: usize) -> Result<Self> {
        Self::new(&[n])
    }

    pub fn dim(&self) -> usize {
        self.resolution.len()
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing `1 / N_axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        1.0 / self.resolution[axis] as f64
    }

    /// Row-major flat index of a multi-index.
    pub fn flatten(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (a, &i) in idx.iter().enumerate() {
            flat = flat * self.resolution[a] + i;
        }
        flat
    }

    /// Multi-index of a row-major flat index.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.resolution[a];
            flat /= self.resolution[a];
        }
        idx
    }

    /// Coordinates of the grid point with the given flat index.
    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| i as f64 / self.resolution[a] as f64)
            .collect()
    }

    /// Signed Fourier mode for bin `i` along an axis with `n` samples.
    /// The Nyquist bin maps to `+n/2`.
    pub(crate) fn signed_mode(i: usize, n: usize) -> i64 {
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }
}

/// Real scalar samples on a [`TorusDomain`].
#[derive(Clone, Debug)]
pub struct ScalarField {
    domain: TorusDomain,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(domain: &TorusDomain) -> Self {
        Self { domain: domain.clone(), values: vec![0.0; domain.len()] }
    }

    pub fn constant(domain: &TorusDomain, value: f64) -> Self {
        Self { domain: domain.clone(), values: vec![value; domain.len()] }
    }

    /// Sample a function of the coordinates on the grid.
    pub fn from_fn(domain: &TorusDomain, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..domain.len()).map(|p| f(&domain.coords(p))).collect();
        Self { domain: domain.clone(), values }
    }

    pub fn from_values(domain: &TorusDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::ComponentCount { expected: domain.len(), actual: values.len() });
        }
        let field = Self { domain: domain.clone(), values };
        field.check_finite()?;
        Ok(field)
    }

    pub fn check_finite(&self) -> Result<()> {
        for (p, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { point: self.domain.unflatten(p) });
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> &TorusDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Index and value of the grid minimum.
    pub fn argmin(&self) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (p, &v) in self.values.iter().enumerate() {
            if v < best.1 {
                best = (p, v);
            }
        }
        best
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { domain: self.domain.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.domain, other.domain);
        let values =
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { domain: self.domain.clone(), values }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a * b)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Spectral partial derivative along an axis.
    ///
    /// The Nyquist mode is zeroed, which keeps the derivative of real data
    /// real and is exact for band-limited fields.
    pub fn derivative(&self, axis: usize) -> ScalarField {
        let n = self.domain.resolution[axis];
        let fft_fwd = fft::forward(n);
        let fft_inv = fft::inverse(n);
        let mut out = self.clone();

        // ik multipliers per bin; period 1 gives k_m = 2*pi*m.
        let mut ik = vec![Complex64::new(0.0, 0.0); n];
        for (i, slot) in ik.iter_mut().enumerate() {
            let m = TorusDomain::signed_mode(i, n);
            if i == n / 2 {
                continue;
            }
            *slot = Complex64::new(0.0, TAU * m as f64);
        }

        let stride: usize = self.domain.resolution[axis + 1..].iter().product();
        let block = stride * n;
        let total = self.domain.len();
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let scale = 1.0 / n as f64;

        let mut base = 0;
        while base < total {
            for off in 0..stride {
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = Complex64::new(self.values[base + off + j * stride], 0.0);
                }
                fft_fwd.process(&mut line);
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot *= ik[j];
                }
                fft_inv.process(&mut line);
                for (j, slot) in line.iter().enumerate() {
                    out.values[base + off + j * stride] = slot.re * scale;
                }
            }
            base += block;
        }
        out
    }

    /// Full n-dimensional forward FFT (unnormalized).
    pub(crate) fn spectrum(&self) -> Spectrum {
        let mut data: Vec<Complex64> =
            self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for axis in 0..self.domain.dim() {
            fft_axis(&mut data, &self.domain, axis, true);
        }
        Spectrum { domain: self.domain.clone(), data }
    }

    /// Mean of the samples along the coordinate loop through grid index 0
    /// in the given axis; equals the loop integral of the interpolant.
    pub fn axis_line_mean(&self, axis: usize) -> f64 {
        let n = self.domain.resolution[axis];
        let stride: usize = self.domain.resolution[axis + 1..].iter().product();
        let mut sum = 0.0;
        for j in 0..n {
            sum += self.values[j * stride];
        }
        sum / n as f64
    }

    /// Random band-limited field: a sum of cosine modes with `0 < |m_i| <=
    /// max_mode` and uniform random amplitudes in `[-amplitude, amplitude]`.
    ///
    /// Quadratic expressions in such fields stay below the grid Nyquist
    /// frequency whenever `max_mode <= N/6`, so pointwise products of them
    /// are alias-free.
    pub fn random_band_limited(
        domain: &TorusDomain,
        max_mode: i64,
        amplitude: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let dim = domain.dim();
        let len = domain.len();
        let width = (2 * max_mode + 1) as usize;
        let count = width.pow(dim as u32);
        let mut data = vec![Complex64::new(0.0, 0.0); len];
        for t in 0..count {
            let mut rest = t;
            let mut m = vec![0i64; dim];
            for slot in m.iter_mut().rev() {
                *slot = (rest % width) as i64 - max_mode;
                rest /= width;
            }
            // keep one representative of each +-m pair
            match m.iter().find(|&&mi| mi != 0) {
                Some(&m0) if m0 > 0 => {}
                _ => continue,
            }
            let amp = rng.gen_range(-amplitude..=amplitude);
            let phase = rng.gen_range(0.0..TAU);
            // amp cos(2π m·x + φ) lands in the ±m spectral bins
            let coeff = Complex64::from_polar(0.5 * amp * len as f64, phase);
            let plus: Vec<usize> = m
                .iter()
                .zip(domain.resolution())
                .map(|(&mi, &n)| mi.rem_euclid(n as i64) as usize)
                .collect();
            let minus: Vec<usize> = m
                .iter()
                .zip(domain.resolution())
                .map(|(&mi, &n)| (-mi).rem_euclid(n as i64) as usize)
                .collect();
            data[domain.flatten(&plus)] += coeff;
            data[domain.flatten(&minus)] += coeff.conj();
        }
        spectrum_into_field(domain, data)
    }
}

/// Unnormalized n-dimensional Fourier data of a [`ScalarField`].
#[derive(Clone)]
pub(crate) struct Spectrum {
    pub domain: TorusDomain,
    pub data: Vec<Complex64>,
}

impl Spectrum {
    /// Inverse transform, taking the real part and normalizing.
    pub fn into_field(mut self) -> ScalarField {
        for axis in 0..self.domain.dim() {
            fft_axis(&mut self.data, &self.domain, axis, false);
        }
        let scale = 1.0 / self.domain.len() as f64;
        let values = self.data.iter().map(|c| c.re * scale).collect();
        ScalarField { domain: self.domain, values }
    }

    /// Signed mode vector of a flat bin index.
    pub fn mode(&self, flat: usize) -> Vec<i64> {
        self.domain
            .unflatten(flat)
            .iter()
            .zip(self.domain.resolution())
            .map(|(&i, &n)| TorusDomain::signed_mode(i, n))
            .collect()
    }
}

/// Inverse-transform raw (unnormalized) spectral data into a field.
pub(crate) fn spectrum_into_field(domain: &TorusDomain, data: Vec<Complex64>) -> ScalarField {
    Spectrum { domain: domain.clone(), data }.into_field()
}

fn fft_axis(data: &mut [Complex64], domain: &TorusDomain, axis: usize, forward: bool) {
    let n = domain.resolution()[axis];
    let plan = if forward { fft::forward(n) } else { fft::inverse(n) };
    let stride: usize = domain.resolution()[axis + 1..].iter().product();
    let block = stride * n;
    let total = domain.len();
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut base = 0;
    while base < total {
        for off in 0..stride {
            for (j, slot) in line.iter_mut().enumerate() {
                *slot = data[base + off + j * stride];
            }
            plan.process(&mut line);
            for (j, slot) in line.iter().enumerate() {
                data[base + off + j * stride] = *slot;
            }
        }
        base += block;
    }
}

/// Sparse trigonometric interpolant of a scalar field: evaluates the field
/// and its gradient at arbitrary points.  Negligible Fourier modes are
/// dropped; the Nyquist bin is split evenly between `+N/2` and `-N/2` so the
/// interpolant stays real.
#[derive(Clone, Debug)]
pub struct TrigInterpolant {
    dim: usize,
    modes: Vec<([i64; 3], Complex64)>,
}

impl TrigInterpolant {
    pub fn new(field: &ScalarField) -> Self {
        let spec = field.spectrum();
        let scale = 1.0 / field.domain.len() as f64;
        let mut max_mag = 0.0f64;
        for c in &spec.data {
            max_mag = max_mag.max(c.norm() * scale);
        }
        let threshold = max_mag * 1e-15;
        let dim = field.domain.dim();
        let res = field.domain.resolution().to_vec();

        let mut modes = Vec::new();
        for (flat, c) in spec.data.iter().enumerate() {
            let coeff = c * scale;
            if coeff.norm() <= threshold {
                continue;
            }
            let idx = field.domain.unflatten(flat);
            // Each Nyquist axis contributes two half-weight modes.
            let mut expansions: Vec<([i64; 3], f64)> = vec![([0i64; 3], 1.0)];
            for (a, (&i, &n)) in idx.iter().zip(&res).enumerate() {
                let mut next = Vec::with_capacity(expansions.len() * 2);
                if i == n / 2 && i != 0 {
                    for (m, w) in &expansions {
                        let mut mp = *m;
                        mp[a] = (n / 2) as i64;
                        next.push((mp, w * 0.5));
                        let mut mm = *m;
                        mm[a] = -((n / 2) as i64);
                        next.push((mm, w * 0.5));
                    }
                } else {
                    for (m, w) in &expansions {
                        let mut mp = *m;
                        mp[a] = TorusDomain::signed_mode(i, n);
                        next.push((mp, *w));
                    }
                }
                expansions = next;
            }
            for (m, w) in expansions {
                modes.push((m, coeff * w));
            }
        }
        Self { dim, modes }
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        let mut v = 0.0;
        for (m, c) in &self.modes {
            let mut dot = 0.0;
            for a in 0..self.dim {
                dot += m[a] as f64 * p[a];
            }
            let (s, co) = (TAU * dot).sin_cos();
            v += c.re * co - c.im * s;
        }
        v
    }

    /// Value and gradient at a point.
    pub fn eval_with_grad(&self, p: &[f64]) -> (f64, [f64; 3]) {
        let mut v = 0.0;
        let mut g = [0.0f64; 3];
        for (m, c) in &self.modes {
            let mut dot = 0.0;
            for a in 0..self.dim {
                dot += m[a] as f64 * p[a];
            }
            let (s, co) = (TAU * dot).sin_cos();
            v += c.re * co - c.im * s;
            // d/dx_a Re(c e^{i 2 pi m.x}) = -2 pi m_a (c.re sin + c.im cos)
            let d = -(c.re * s + c.im * co) * TAU;
            for a in 0..self.dim {
                g[a] += d * m[a] as f64;
            }
        }
        (v, g)
    }

    pub fn grad(&self, p: &[f64]) -> [f64; 3] {
        self.eval_with_grad(p).1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn domain_rejects_bad_resolution() {
        assert!(TorusDomain::new(&[6, 8]).is_err());
        assert!(TorusDomain::new(&[9, 8]).is_err());
        assert!(TorusDomain::new(&[]).is_err());
        assert!(TorusDomain::new(&[8, 8, 8, 8]).is_err());
        assert!(TorusDomain::t2(16).is_ok());
    }

    #[test]
    fn flatten_roundtrip() {
        let d = TorusDomain::new(&[8, 10, 12]).unwrap();
        for flat in [0usize, 1, 959, 480, 123] {
            assert_eq!(d.flatten(&d.unflatten(flat)), flat);
        }
    }

    #[test]
    fn spectral_derivative_matches_analytic() {
        let d = TorusDomain::t2(32).unwrap();
        let f = ScalarField::from_fn(&d, |p| (TAU * p[0]).sin() + 0.5 * (2.0 * TAU * p[1]).cos());
        let fx = f.derivative(0);
        let fy = f.derivative(1);
        for p in 0..d.len() {
            let x = d.coords(p);
            assert_abs_diff_eq!(fx.values()[p], TAU * (TAU * x[0]).cos(), epsilon = 1e-11);
            assert_abs_diff_eq!(
                fy.values()[p],
                -TAU * (2.0 * TAU * x[1]).sin(),
                epsilon = 1e-11
            );
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let d = TorusDomain::t3(8).unwrap();
        let f = ScalarField::constant(&d, 4.25);
        assert!(f.derivative(2).max_abs() < 1e-14);
    }

    #[test]
    fn interpolant_reproduces_grid_and_off_grid_values() {
        let d = TorusDomain::t2(32).unwrap();
        let f = ScalarField::from_fn(&d, |p| {
            1.0 + (TAU * p[0]).sin() * (2.0 * TAU * p[1]).cos()
        });
        let interp = TrigInterpolant::new(&f);
        for p in [0usize, 5, 700, 1023] {
            let x = d.coords(p);
            assert_abs_diff_eq!(interp.eval(&x), f.values()[p], epsilon = 1e-12);
        }
        let x = [0.123, 0.456];
        let expected = 1.0 + (TAU * x[0]).sin() * (2.0 * TAU * x[1]).cos();
        assert_abs_diff_eq!(interp.eval(&x), expected, epsilon = 1e-12);
        let (_, g) = interp.eval_with_grad(&x);
        assert_abs_diff_eq!(
            g[0],
            TAU * (TAU * x[0]).cos() * (2.0 * TAU * x[1]).cos(),
            epsilon = 1e-11
        );
    }

    #[test]
    fn random_band_limited_is_reproducible_and_band_limited() {
        let d = TorusDomain::t2(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = ScalarField::random_band_limited(&d, 2, 1.0, &mut rng);
        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        let f2 = ScalarField::random_band_limited(&d, 2, 1.0, &mut rng2);
        assert_eq!(f.values(), f2.values());
        // spectrum vanishes above the requested band
        let spec = f.spectrum();
        for (flat, c) in spec.data.iter().enumerate() {
            let m = spec.mode(flat);
            if m.iter().any(|&mi| mi.abs() > 2) {
                assert!((c.norm() / d.len() as f64) < 1e-12);
            }
        }
    }

    #[test]
    fn wrap_helpers() {
        assert_abs_diff_eq!(wrap_unit(1.25), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_unit(-0.25), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_half(0.75), -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_half(-0.75), 0.25, epsilon = 1e-15);
    }
}
