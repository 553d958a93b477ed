//! Riemannian metric fields and the metric-dependent form operations:
//! musical isomorphisms, Hodge star, codifferential, Laplace-de Rham
//! operator and sup operator norms.
//!
//! All of these are pointwise-algebraic on the grid samples.  Combined with
//! the spectral exterior derivative this keeps the star identities and the
//! norm equality `‖δ_g(i_X Ω)‖_g = ‖d X^♭‖_g` exact in the discretization,
//! not just up to truncation error.

use crate::error::Error;
use crate::form::{index_position, multi_indices, KForm, VectorField};
use crate::grid::{ScalarField, TorusDomain};
use crate::Result;

/// Dense symmetric matrix of size `n <= 3`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct SymMat {
    pub n: usize,
    pub a: [[f64; 3]; 3],
}

impl SymMat {
    pub fn det(&self) -> f64 {
        let a = &self.a;
        match self.n {
            1 => a[0][0],
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            _ => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
        }
    }

    pub fn inverse(&self) -> SymMat {
        let d = self.det();
        let a = &self.a;
        let mut inv = [[0.0; 3]; 3];
        match self.n {
            1 => inv[0][0] = 1.0 / d,
            2 => {
                inv[0][0] = a[1][1] / d;
                inv[1][1] = a[0][0] / d;
                inv[0][1] = -a[0][1] / d;
                inv[1][0] = -a[1][0] / d;
            }
            _ => {
                inv[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / d;
                inv[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / d;
                inv[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / d;
                inv[1][0] = inv[0][1];
                inv[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / d;
                inv[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / d;
                inv[2][0] = inv[0][2];
                inv[2][1] = inv[1][2];
                inv[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / d;
            }
        }
        SymMat { n: self.n, a: inv }
    }

    /// Lower-triangular Cholesky factor; `None` when not positive-definite.
    pub fn cholesky(&self) -> Option<[[f64; 3]; 3]> {
        let mut l = [[0.0f64; 3]; 3];
        for i in 0..self.n {
            for j in 0..=i {
                let mut s = self.a[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    if s <= 0.0 {
                        return None;
                    }
                    l[i][j] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        Some(l)
    }

    pub fn matvec(&self, v: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..self.n {
            for j in 0..self.n {
                out[i] += self.a[i][j] * v[j];
            }
        }
        out
    }
}

/// Solve `L y = b` for lower-triangular `L`.
pub(crate) fn solve_lower(l: &[[f64; 3]; 3], n: usize, b: &[f64; 3]) -> [f64; 3] {
    let mut y = [0.0; 3];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    y
}

fn pow_neg1(e: usize) -> f64 {
    if e % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sign of the permutation `(idx, complement)` of `0..n`.
fn complement_sign(idx: &[usize], complement: &[usize]) -> f64 {
    let mut perm: Vec<usize> = idx.to_vec();
    perm.extend_from_slice(complement);
    let mut inversions = 0usize;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                inversions += 1;
            }
        }
    }
    pow_neg1(inversions)
}

/// Euclidean operator norm of a form given by canonical coefficients in an
/// orthonormal frame of dimension `m <= 4`.
///
/// Degrees 0, 1, m-1, m are covered by absolute value / Euclidean length
/// (forms of those degrees are simple); degree 2 uses the spectral norm of
/// the antisymmetric coefficient matrix.
pub(crate) fn frame_operator_norm(m: usize, k: usize, comps: &[f64]) -> Result<f64> {
    if k == 0 || k == m {
        return Ok(comps[0].abs());
    }
    if k == 1 || k + 1 == m {
        return Ok(comps.iter().map(|c| c * c).sum::<f64>().sqrt());
    }
    if k == 2 && m == 4 {
        // Antisymmetric 4x4: singular values sigma satisfy
        // sigma1^2 + sigma2^2 = sum b^2, sigma1 sigma2 = |Pfaffian|.
        let (b01, b02, b03, b12, b13, b23) =
            (comps[0], comps[1], comps[2], comps[3], comps[4], comps[5]);
        let s: f64 = comps.iter().map(|c| c * c).sum();
        let pf = b01 * b23 - b02 * b13 + b03 * b12;
        let disc = (s * s - 4.0 * pf * pf).max(0.0).sqrt();
        return Ok(((s + disc) / 2.0).sqrt());
    }
    Err(Error::UnsupportedNorm { n: m, k })
}

/// Symmetric positive-definite metric tensor sampled per grid point.
///
/// Components are stored as scalar fields in lower-triangular order
/// (`g00, g10, g11, g20, g21, g22`).  Symmetry and positive-definiteness
/// are validated on construction.
#[derive(Clone, Debug)]
pub struct MetricField {
    domain: TorusDomain,
    comps: Vec<ScalarField>,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl MetricField {
    /// Euclidean metric.
    pub fn flat(domain: &TorusDomain) -> Self {
        let n = domain.dim();
        let mut comps = Vec::new();
        for i in 0..n {
            for j in 0..=i {
                comps.push(ScalarField::constant(domain, if i == j { 1.0 } else { 0.0 }));
            }
        }
        Self { domain: domain.clone(), comps }
    }

    /// Diagonal metric from per-axis coefficient fields.
    pub fn diagonal(domain: &TorusDomain, diag: Vec<ScalarField>) -> Result<Self> {
        if diag.len() != domain.dim() {
            return Err(Error::ComponentCount { expected: domain.dim(), actual: diag.len() });
        }
        let mut comps = Vec::new();
        for (i, field) in diag.into_iter().enumerate() {
            for j in 0..=i {
                if i == j {
                    comps.push(field.clone());
                } else {
                    comps.push(ScalarField::zeros(domain));
                }
            }
        }
        let metric = Self { domain: domain.clone(), comps };
        metric.validate_spd()?;
        Ok(metric)
    }

    /// Sample a full matrix-valued function; checks symmetry to 1e-12 and
    /// positive-definiteness at every grid point.
    pub fn from_fn(domain: &TorusDomain, f: impl Fn(&[f64]) -> Vec<Vec<f64>>) -> Result<Self> {
        let n = domain.dim();
        let mut comps: Vec<ScalarField> =
            (0..n * (n + 1) / 2).map(|_| ScalarField::zeros(domain)).collect();
        for p in 0..domain.len() {
            let x = domain.coords(p);
            let m = f(&x);
            let mut slot = 0;
            for i in 0..n {
                for j in 0..=i {
                    if (m[i][j] - m[j][i]).abs() > SYMMETRY_TOL {
                        return Err(Error::NotSymmetric { point: domain.unflatten(p) });
                    }
                    comps[slot].values_mut()[p] = 0.5 * (m[i][j] + m[j][i]);
                    slot += 1;
                }
            }
        }
        let metric = Self { domain: domain.clone(), comps };
        metric.validate_spd()?;
        Ok(metric)
    }

    /// Build from lower-triangular component fields
    /// (`g00, g10, g11, [g20, g21, g22]`).
    pub fn from_lower_components(domain: &TorusDomain, comps: Vec<ScalarField>) -> Result<Self> {
        let n = domain.dim();
        let expected = n * (n + 1) / 2;
        if comps.len() != expected {
            return Err(Error::ComponentCount { expected, actual: comps.len() });
        }
        for c in &comps {
            if c.domain() != domain {
                return Err(Error::DomainMismatch);
            }
            c.check_finite()?;
        }
        let metric = Self { domain: domain.clone(), comps };
        metric.validate_spd()?;
        Ok(metric)
    }

    fn validate_spd(&self) -> Result<()> {
        for p in 0..self.domain.len() {
            if self.at(p).cholesky().is_none() {
                return Err(Error::NotPositiveDefinite { point: self.domain.unflatten(p) });
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> &TorusDomain {
        &self.domain
    }

    /// Lower-triangular component fields in storage order.
    pub fn lower_components(&self) -> &[ScalarField] {
        &self.comps
    }

    /// Metric matrix at a flat grid index.
    pub(crate) fn at(&self, p: usize) -> SymMat {
        let n = self.domain.dim();
        let mut a = [[0.0; 3]; 3];
        let mut slot = 0;
        for i in 0..n {
            for j in 0..=i {
                let v = self.comps[slot].values()[p];
                a[i][j] = v;
                a[j][i] = v;
                slot += 1;
            }
        }
        SymMat { n, a }
    }

    /// Riemannian volume form `sqrt(det g) dx^1 ∧ ... ∧ dx^n`.
    pub fn volume_form(&self) -> KForm {
        let n = self.domain.dim();
        let mut coeff = ScalarField::zeros(&self.domain);
        for p in 0..self.domain.len() {
            coeff.values_mut()[p] = self.at(p).det().sqrt();
        }
        KForm::from_components(&self.domain, n, vec![coeff]).expect("single top component")
    }

    /// Musical flat: the 1-form `θ_X = g(X, ·)`.
    pub fn flat_map(&self, x: &VectorField) -> Result<KForm> {
        if x.domain() != &self.domain {
            return Err(Error::DomainMismatch);
        }
        let n = self.domain.dim();
        let mut out = KForm::zero(&self.domain, 1);
        for p in 0..self.domain.len() {
            let g = self.at(p);
            let mut v = [0.0; 3];
            for (a, slot) in v.iter_mut().enumerate().take(n) {
                *slot = x.component(a).values()[p];
            }
            let theta = g.matvec(&v);
            for a in 0..n {
                out.components_mut()[a].values_mut()[p] = theta[a];
            }
        }
        Ok(out)
    }

    /// Pointwise Hodge star with orientation `dx^1 ∧ ... ∧ dx^n`:
    /// `(⋆ω)_{I^c} = sqrt(det g) · sgn(I, I^c) · ω^I` with indices raised by
    /// Gram minors of `g^{-1}`.
    pub fn hodge_star(&self, form: &KForm) -> Result<KForm> {
        if form.domain() != &self.domain {
            return Err(Error::DomainMismatch);
        }
        let n = self.domain.dim();
        let k = form.degree();
        let in_indices = multi_indices(n, k);
        let mut out = KForm::zero(&self.domain, n - k);

        // target position and permutation sign per input component
        let mut routing = Vec::with_capacity(in_indices.len());
        for idx in &in_indices {
            let complement: Vec<usize> = (0..n).filter(|a| !idx.contains(a)).collect();
            let sign = complement_sign(idx, &complement);
            routing.push((index_position(n, &complement), sign));
        }

        for p in 0..self.domain.len() {
            let g = self.at(p);
            let ginv = g.inverse();
            let sqrt_det = g.det().sqrt();
            for (src, idx) in in_indices.iter().enumerate() {
                // raise: ω^I = Σ_J det( g^{-1}[I, J] ) ω_J
                let mut raised = 0.0;
                for (other, jdx) in in_indices.iter().enumerate() {
                    let minor = gram_minor(&ginv, idx, jdx);
                    raised += minor * form.components()[other].values()[p];
                }
                let (target, sign) = routing[src];
                out.components_mut()[target].values_mut()[p] = sign * sqrt_det * raised;
            }
        }
        Ok(out)
    }

    /// Codifferential `δ_g = (−1)^{n(k+1)+1} ⋆ d ⋆` on k-forms, `k ≥ 1`.
    pub fn codifferential(&self, form: &KForm) -> Result<KForm> {
        let k = form.degree();
        if k == 0 {
            return Err(Error::DegreeZeroForm { op: "codifferential" });
        }
        let n = self.domain.dim();
        let starred = self.hodge_star(form)?;
        let d_starred = starred.exterior_derivative()?;
        let back = self.hodge_star(&d_starred)?;
        let sign = pow_neg1(n * (k + 1) + 1);
        Ok(back.scaled(sign))
    }

    /// Laplace-de Rham operator `Δ = d δ + δ d`, with the degree-edge terms
    /// dropped where they are undefined.
    pub fn laplacian(&self, form: &KForm) -> Result<KForm> {
        let n = self.domain.dim();
        let k = form.degree();
        let mut out = KForm::zero(&self.domain, k);
        if k >= 1 {
            let d_delta = self.codifferential(form)?.exterior_derivative()?;
            out = out.add(&d_delta)?;
        }
        if k < n {
            let delta_d = self.codifferential(&form.exterior_derivative()?)?;
            out = out.add(&delta_d)?;
        }
        Ok(out)
    }

    /// Pointwise operator norm of a form in a g-orthonormal frame.
    pub fn pointwise_norm(&self, form: &KForm) -> Result<ScalarField> {
        if form.domain() != &self.domain {
            return Err(Error::DomainMismatch);
        }
        let n = self.domain.dim();
        let k = form.degree();
        if k > n {
            return Err(Error::UnsupportedNorm { n, k });
        }
        let mut out = ScalarField::zeros(&self.domain);
        match k {
            0 => {
                for p in 0..self.domain.len() {
                    out.values_mut()[p] = form.components()[0].values()[p].abs();
                }
            }
            _ if k == n => {
                // |ω| = |coefficient| / sqrt(det g)
                for p in 0..self.domain.len() {
                    let coeff = form.components()[0].values()[p];
                    out.values_mut()[p] = coeff.abs() / self.at(p).det().sqrt();
                }
            }
            1 => {
                // |ω|^2 = ω^T g^{-1} ω = |L^{-1} ω|^2
                for p in 0..self.domain.len() {
                    let l = self.at(p).cholesky().expect("validated SPD");
                    let mut w = [0.0; 3];
                    for (a, slot) in w.iter_mut().enumerate().take(n) {
                        *slot = form.components()[a].values()[p];
                    }
                    let y = solve_lower(&l, n, &w);
                    out.values_mut()[p] =
                        y.iter().take(n).map(|v| v * v).sum::<f64>().sqrt();
                }
            }
            2 if n == 3 => {
                // frame coefficients B^ = L^{-1} B L^{-T}; spectral norm of an
                // antisymmetric 3x3 equals the length of its axial vector
                for p in 0..self.domain.len() {
                    let l = self.at(p).cholesky().expect("validated SPD");
                    let b01 = form.component(&[0, 1]).values()[p];
                    let b02 = form.component(&[0, 2]).values()[p];
                    let b12 = form.component(&[1, 2]).values()[p];
                    let b = [[0.0, b01, b02], [-b01, 0.0, b12], [-b02, -b12, 0.0]];
                    // columns of M = L^{-1} B
                    let mut m = [[0.0f64; 3]; 3];
                    for col in 0..3 {
                        let rhs = [b[0][col], b[1][col], b[2][col]];
                        let y = solve_lower(&l, n, &rhs);
                        for row in 0..3 {
                            m[row][col] = y[row];
                        }
                    }
                    // rows of B^ = M L^{-T}: solve L k = M^T column-wise
                    let mut bh = [[0.0f64; 3]; 3];
                    for row in 0..3 {
                        let rhs = [m[row][0], m[row][1], m[row][2]];
                        let y = solve_lower(&l, n, &rhs);
                        bh[row] = y;
                    }
                    let norm =
                        (bh[0][1] * bh[0][1] + bh[0][2] * bh[0][2] + bh[1][2] * bh[1][2]).sqrt();
                    out.values_mut()[p] = norm;
                }
            }
            _ => return Err(Error::UnsupportedNorm { n, k }),
        }
        Ok(out)
    }

    /// Sup operator norm `sup_p |ω_p|_g` over the grid.
    pub fn sup_norm(&self, form: &KForm) -> Result<f64> {
        Ok(self.pointwise_norm(form)?.max_abs())
    }

    /// Pointwise `g(X, X)`.
    pub fn speed_squared(&self, x: &VectorField) -> Result<ScalarField> {
        if x.domain() != &self.domain {
            return Err(Error::DomainMismatch);
        }
        let n = self.domain.dim();
        let mut out = ScalarField::zeros(&self.domain);
        for p in 0..self.domain.len() {
            let g = self.at(p);
            let mut v = [0.0; 3];
            for (a, slot) in v.iter_mut().enumerate().take(n) {
                *slot = x.component(a).values()[p];
            }
            let gv = g.matvec(&v);
            out.values_mut()[p] = v.iter().zip(&gv).map(|(a, b)| a * b).sum();
        }
        Ok(out)
    }
}

fn gram_minor(ginv: &SymMat, rows: &[usize], cols: &[usize]) -> f64 {
    match rows.len() {
        0 => 1.0,
        1 => ginv.a[rows[0]][cols[0]],
        2 => {
            ginv.a[rows[0]][cols[0]] * ginv.a[rows[1]][cols[1]]
                - ginv.a[rows[0]][cols[1]] * ginv.a[rows[1]][cols[0]]
        }
        _ => {
            let m = |i: usize, j: usize| ginv.a[rows[i]][cols[j]];
            m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
                - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
        }
    }
}

/// Minimum g-speed of a vector field over the grid.
#[derive(Clone, Debug)]
pub struct SpeedReport {
    pub min: f64,
    pub min_squared: f64,
    pub argmin: Vec<usize>,
}

/// `m_g(X) = inf_p ‖X‖_g` over grid points; errors on a singular field.
pub fn min_speed(g: &MetricField, x: &VectorField) -> Result<SpeedReport> {
    let speed2 = g.speed_squared(x)?;
    let (argmin, min2) = speed2.argmin();
    if min2 <= 0.0 {
        return Err(Error::SingularVectorField {
            point: g.domain().unflatten(argmin),
            value: min2,
        });
    }
    Ok(SpeedReport { min: min2.sqrt(), min_squared: min2, argmin: g.domain().unflatten(argmin) })
}
