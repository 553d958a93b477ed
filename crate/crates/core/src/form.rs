//! Differential forms on torus grids.
//!
//! A degree-`k` form stores one scalar component per strictly increasing
//! multi-index `(i_1 < ... < i_k)`, listed in lexicographic order; there is
//! no redundant antisymmetric storage.

use crate::error::Error;
use crate::grid::{ScalarField, TorusDomain};
use crate::Result;

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Strictly increasing multi-indices of length `k` over `0..n`, in
/// lexicographic order.
pub(crate) fn multi_indices(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binomial(n, k));
    let mut current = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            rec(n, k, i + 1, current, out);
            current.pop();
        }
    }
    rec(n, k, 0, &mut current, &mut out);
    out
}

/// Position of an increasing multi-index in the lexicographic list.
pub(crate) fn index_position(n: usize, idx: &[usize]) -> usize {
    multi_indices(n, idx.len())
        .iter()
        .position(|m| m == idx)
        .expect("canonical multi-index")
}

fn pow_neg1(e: usize) -> f64 {
    if e % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Degree-`k` differential form with component fields on a torus grid.
#[derive(Clone, Debug)]
pub struct KForm {
    domain: TorusDomain,
    degree: usize,
    components: Vec<ScalarField>,
}

impl KForm {
    pub fn zero(domain: &TorusDomain, degree: usize) -> Self {
        let count = binomial(domain.dim(), degree);
        Self {
            domain: domain.clone(),
            degree,
            components: (0..count).map(|_| ScalarField::zeros(domain)).collect(),
        }
    }

    /// Build a form from components in canonical multi-index order.
    pub fn from_components(
        domain: &TorusDomain,
        degree: usize,
        components: Vec<ScalarField>,
    ) -> Result<Self> {
        let expected = binomial(domain.dim(), degree);
        if components.len() != expected {
            return Err(Error::ComponentCount { expected, actual: components.len() });
        }
        for c in &components {
            if c.domain() != domain {
                return Err(Error::DomainMismatch);
            }
            c.check_finite()?;
        }
        Ok(Self { domain: domain.clone(), degree, components })
    }

    /// Sample each component from a function of the coordinates; the closure
    /// receives the point and the canonical multi-index.
    pub fn from_fn(
        domain: &TorusDomain,
        degree: usize,
        f: impl Fn(&[f64], &[usize]) -> f64,
    ) -> Self {
        let idx = multi_indices(domain.dim(), degree);
        let components = idx
            .iter()
            .map(|i| ScalarField::from_fn(domain, |p| f(p, i)))
            .collect();
        Self { domain: domain.clone(), degree, components }
    }

    pub fn domain(&self) -> &TorusDomain {
        &self.domain
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.components
    }

    /// Component field for an increasing multi-index.
    pub fn component(&self, idx: &[usize]) -> &ScalarField {
        &self.components[index_position(self.domain.dim(), idx)]
    }

    /// Multi-indices in storage order.
    pub fn index_set(&self) -> Vec<Vec<usize>> {
        multi_indices(self.domain.dim(), self.degree)
    }

    /// Spectral exterior derivative.
    pub fn exterior_derivative(&self) -> Result<KForm> {
        let n = self.domain.dim();
        let k = self.degree;
        if k >= n {
            return Err(Error::TopDegreeForm);
        }
        let out_indices = multi_indices(n, k + 1);
        let mut out = KForm::zero(&self.domain, k + 1);
        for (pos, target) in out_indices.iter().enumerate() {
            let mut acc = ScalarField::zeros(&self.domain);
            for (slot, &axis) in target.iter().enumerate() {
                let mut source = target.clone();
                source.remove(slot);
                let d = self.component(&source).derivative(axis);
                let sign = pow_neg1(slot);
                acc = acc.zip(&d, |a, b| a + sign * b);
            }
            out.components[pos] = acc;
        }
        Ok(out)
    }

    /// Interior product `i_X ω` (contraction in the first slot).
    pub fn contract(&self, x: &VectorField) -> Result<KForm> {
        if self.degree == 0 {
            return Err(Error::DegreeZeroForm { op: "interior product" });
        }
        if x.domain() != &self.domain {
            return Err(Error::DomainMismatch);
        }
        let n = self.domain.dim();
        let mut out = KForm::zero(&self.domain, self.degree - 1);
        for source in multi_indices(n, self.degree) {
            let comp = self.component(&source);
            for (slot, &axis) in source.iter().enumerate() {
                let mut target = source.clone();
                target.remove(slot);
                let sign = pow_neg1(slot);
                let pos = index_position(n, &target);
                let term = comp.mul(x.component(axis));
                out.components[pos] = out.components[pos].zip(&term, |a, b| a + sign * b);
            }
        }
        Ok(out)
    }

    /// Pointwise evaluation of a 1-form on a vector field.
    pub fn pair(&self, x: &VectorField) -> Result<ScalarField> {
        if self.degree != 1 {
            return Err(Error::DegreeMismatch { expected: 1, actual: self.degree });
        }
        let contracted = self.contract(x)?;
        Ok(contracted.components.into_iter().next().expect("degree-0 component"))
    }

    pub fn add(&self, other: &KForm) -> Result<KForm> {
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch { expected: self.degree, actual: other.degree });
        }
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.add(b))
            .collect();
        Ok(Self { domain: self.domain.clone(), degree: self.degree, components })
    }

    pub fn sub(&self, other: &KForm) -> Result<KForm> {
        self.add(&other.scaled(-1.0))
    }

    pub fn scaled(&self, c: f64) -> KForm {
        Self {
            domain: self.domain.clone(),
            degree: self.degree,
            components: self.components.iter().map(|f| f.scaled(c)).collect(),
        }
    }

    /// Largest absolute component sample (flat-coefficient bound, no metric).
    pub fn max_abs_component(&self) -> f64 {
        self.components.iter().fold(0.0f64, |m, c| m.max(c.max_abs()))
    }
}

/// Vector field on a torus grid, one scalar component per axis.
#[derive(Clone, Debug)]
pub struct VectorField {
    domain: TorusDomain,
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn from_components(domain: &TorusDomain, components: Vec<ScalarField>) -> Result<Self> {
        if components.len() != domain.dim() {
            return Err(Error::ComponentCount {
                expected: domain.dim(),
                actual: components.len(),
            });
        }
        for c in &components {
            if c.domain() != domain {
                return Err(Error::DomainMismatch);
            }
            c.check_finite()?;
        }
        Ok(Self { domain: domain.clone(), components })
    }

    pub fn from_fn(domain: &TorusDomain, f: impl Fn(&[f64], usize) -> f64) -> Self {
        let components = (0..domain.dim())
            .map(|axis| ScalarField::from_fn(domain, |p| f(p, axis)))
            .collect();
        Self { domain: domain.clone(), components }
    }

    pub fn constant(domain: &TorusDomain, v: &[f64]) -> Result<Self> {
        if v.len() != domain.dim() {
            return Err(Error::ComponentCount { expected: domain.dim(), actual: v.len() });
        }
        Ok(Self {
            domain: domain.clone(),
            components: v.iter().map(|&c| ScalarField::constant(domain, c)).collect(),
        })
    }

    pub fn domain(&self) -> &TorusDomain {
        &self.domain
    }

    pub fn component(&self, axis: usize) -> &ScalarField {
        &self.components[axis]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn scaled(&self, c: f64) -> VectorField {
        Self {
            domain: self.domain.clone(),
            components: self.components.iter().map(|f| f.scaled(c)).collect(),
        }
    }

    /// Euclidean speed maximum over the grid.
    pub fn euclidean_sup(&self) -> f64 {
        let mut sup = 0.0f64;
        for p in 0..self.domain.len() {
            let mut s = 0.0;
            for c in &self.components {
                let v = c.values()[p];
                s += v * v;
            }
            sup = sup.max(s);
        }
        sup.sqrt()
    }
}
