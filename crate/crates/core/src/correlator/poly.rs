//! Polynomials in commuting symbols `(zᵢ*, zᵢ)` standing for normally
//! ordered products of `(aᵢ†, aᵢ)`. Multiplying two such polynomials is
//! exactly taking the normally ordered product of the operators.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::fock::{normal_moment, MomentOrder, TruncatedState};

/// Exponents `(pᵢ, qᵢ)` of `∏ zᵢ*^{pᵢ} zᵢ^{qᵢ}`.
pub type Monomial = Vec<(usize, usize)>;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalPoly {
    modes: usize,
    terms: BTreeMap<Monomial, C64>,
}

impl NormalPoly {
    pub fn zero(modes: usize) -> Self {
        NormalPoly {
            modes,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(modes: usize, c: C64) -> Self {
        let mut p = NormalPoly::zero(modes);
        p.add_term(vec![(0, 0); modes], c);
        p
    }

    pub fn one(modes: usize) -> Self {
        NormalPoly::constant(modes, C64::new(1.0, 0.0))
    }

    /// `c · zᵢ*^p zᵢ^q`.
    pub fn monomial(modes: usize, mode: usize, p: usize, q: usize, c: C64) -> Self {
        let mut key = vec![(0, 0); modes];
        key[mode] = (p, q);
        let mut out = NormalPoly::zero(modes);
        out.add_term(key, c);
        out
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C64)> {
        self.terms.iter()
    }

    /// Coefficient of a monomial (zero if absent).
    pub fn coefficient(&self, key: &[(usize, usize)]) -> C64 {
        self.terms.get(key).copied().unwrap_or_default()
    }

    fn add_term(&mut self, key: Monomial, c: C64) {
        if c == C64::new(0.0, 0.0) {
            return;
        }
        *self.terms.entry(key).or_default() += c;
    }

    pub fn add(&self, other: &NormalPoly) -> NormalPoly {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), *c);
        }
        out
    }

    pub fn scale(&self, s: C64) -> NormalPoly {
        NormalPoly {
            modes: self.modes,
            terms: self.terms.iter().map(|(k, c)| (k.clone(), c * s)).collect(),
        }
    }

    pub fn mul(&self, other: &NormalPoly) -> NormalPoly {
        debug_assert_eq!(self.modes, other.modes);
        let mut out = NormalPoly::zero(self.modes);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let key = ka
                    .iter()
                    .zip(kb)
                    .map(|(a, b)| (a.0 + b.0, a.1 + b.1))
                    .collect();
                out.add_term(key, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, k: usize) -> NormalPoly {
        let mut out = NormalPoly::one(self.modes);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    pub fn max_order(&self) -> usize {
        self.terms
            .keys()
            .map(|k| k.iter().map(|(p, q)| p + q).sum())
            .max()
            .unwrap_or(0)
    }

    /// Replaces every monomial by its normally ordered expectation in
    /// `state`. Terms are summed in key order so the result does not depend
    /// on how the polynomial was assembled.
    pub fn expectation(&self, state: &TruncatedState) -> Result<C64> {
        let mut acc = C64::new(0.0, 0.0);
        for (key, c) in &self.terms {
            if key.iter().all(|&(p, q)| p == 0 && q == 0) {
                acc += c;
                continue;
            }
            let order = MomentOrder::new(key.clone())?;
            acc += c * normal_moment(state, &order)?;
        }
        Ok(acc)
    }
}

/// A c-number-shifted linear field `Σᵢ cᵢ zᵢ + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearField {
    pub coefficients: Vec<C64>,
    pub offset: C64,
}

impl LinearField {
    /// `f* f` as a normally ordered polynomial.
    pub fn intensity(&self) -> NormalPoly {
        let modes = self.coefficients.len();
        let mut f = NormalPoly::constant(modes, self.offset);
        let mut fc = NormalPoly::constant(modes, self.offset.conj());
        for (i, c) in self.coefficients.iter().enumerate() {
            f = f.add(&NormalPoly::monomial(modes, i, 0, 1, *c));
            fc = fc.add(&NormalPoly::monomial(modes, i, 1, 0, c.conj()));
        }
        fc.mul(&f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_square() {
        // (z + 1)^2 = z^2 + 2z + 1
        let p = NormalPoly::monomial(1, 0, 0, 1, C64::new(1.0, 0.0))
            .add(&NormalPoly::one(1))
            .pow(2);
        assert_eq!(p.coefficient(&[(0, 2)]), C64::new(1.0, 0.0));
        assert_eq!(p.coefficient(&[(0, 1)]), C64::new(2.0, 0.0));
        assert_eq!(p.coefficient(&[(0, 0)]), C64::new(1.0, 0.0));
        assert_eq!(p.max_order(), 2);
    }

    #[test]
    fn intensity_of_shifted_field() {
        let f = LinearField {
            coefficients: vec![C64::new(0.5, 0.0)],
            offset: C64::new(0.0, 2.0),
        };
        let p = f.intensity();
        assert_eq!(p.coefficient(&[(1, 1)]), C64::new(0.25, 0.0));
        assert_eq!(p.coefficient(&[(0, 0)]), C64::new(4.0, 0.0));
        assert_eq!(p.coefficient(&[(0, 1)]), C64::new(0.0, -1.0));
        assert_eq!(p.coefficient(&[(1, 0)]), C64::new(0.0, 1.0));
    }
}
