//! Sparse multivariate polynomials: evaluation, formal differentiation, ring
//! arithmetic, and the builder for the MVSK objective.
//!
//! Terms are keyed by canonical exponent keys (sorted `(variable, power)`
//! pairs with no zero powers) and iterate in graded lexicographic order:
//! total degree ascending, ties broken with lower variable indices ranking
//! first. Coefficients with magnitude below [`PRUNE_EPS`] are dropped after
//! every operation so floating-point residue from the decomposition
//! assemblies cannot inflate term counts.

use crate::moments::{portfolio_moments, MomentSource};
use crate::{Error, Result};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Coefficients with |c| below this are pruned after every operation.
pub const PRUNE_EPS: f64 = 1e-14;

/// Canonical exponent key: `(variable, power)` pairs sorted by variable,
/// powers all nonzero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Monomial(Vec<(u32, u32)>);

impl Monomial {
    /// The empty product (constant term key).
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    /// x_i^pow; the constant key when pow = 0.
    pub fn var(i: usize, pow: u32) -> Self {
        if pow == 0 {
            return Self::one();
        }
        Monomial(vec![(i as u32, pow)])
    }

    /// Build from arbitrary `(variable, power)` pairs; duplicates merge,
    /// zero powers drop.
    pub fn from_pairs(pairs: &[(usize, u32)]) -> Self {
        let mut v: Vec<(u32, u32)> = pairs
            .iter()
            .filter(|&&(_, p)| p > 0)
            .map(|&(i, p)| (i as u32, p))
            .collect();
        v.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(u32, u32)> = Vec::with_capacity(v.len());
        for (i, p) in v {
            match merged.last_mut() {
                Some(&mut (li, ref mut lp)) if li == i => *lp += p,
                _ => merged.push((i, p)),
            }
        }
        Monomial(merged)
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, p)| p).sum()
    }

    pub fn max_var(&self) -> Option<usize> {
        self.0.last().map(|&(i, _)| i as usize)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|&(i, p)| x[i as usize].powi(p as i32))
            .product()
    }

    /// Formal partial derivative: returns `(power, reduced key)` or None if
    /// the variable is absent.
    pub fn partial(&self, var: usize) -> Option<(f64, Monomial)> {
        let var = var as u32;
        let pos = self.0.iter().position(|&(i, _)| i == var)?;
        let (_, p) = self.0[pos];
        let mut reduced = self.0.clone();
        if p == 1 {
            reduced.remove(pos);
        } else {
            reduced[pos].1 = p - 1;
        }
        Some((p as f64, Monomial(reduced)))
    }

    /// Lexicographic comparison with lower variable indices major:
    /// x0^2 > x0*x1 > x0*x2 > x1^2 > ...
    fn lex_cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        loop {
            match (a.get(i), b.get(j)) {
                (None, None) => return Ordering::Equal,
                // `a` has run out of variables: `b` still has a positive
                // power at some later variable, so `a` is lex-smaller there.
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (Some(&(va, ea)), Some(&(vb, eb))) => {
                    if va < vb {
                        // `a` is heavier on an earlier variable.
                        return Ordering::Greater;
                    }
                    if va > vb {
                        return Ordering::Less;
                    }
                    if ea != eb {
                        return ea.cmp(&eb);
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Monomial {
    /// Graded lexicographic map order: ascending iteration yields total
    /// degree ascending, and inside a degree the lex-heavier (earlier
    /// variable, higher power) key first.
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.lex_cmp(self))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsePolynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl SparsePolynomial {
    pub fn zero(nvars: usize) -> Self {
        SparsePolynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        if c.abs() >= PRUNE_EPS {
            p.terms.insert(Monomial::one(), c);
        }
        p
    }

    /// Single-term polynomial `coeff * prod x_i^{p_i}`.
    pub fn monomial(nvars: usize, pairs: &[(usize, u32)], coeff: f64) -> Result<Self> {
        let key = Monomial::from_pairs(pairs);
        if let Some(mv) = key.max_var() {
            if mv >= nvars {
                return Err(Error::IndexOutOfRange(format!(
                    "variable {mv} out of range for {nvars} variables"
                )));
            }
        }
        let mut p = Self::zero(nvars);
        if coeff.abs() >= PRUNE_EPS {
            p.terms.insert(key, coeff);
        }
        Ok(p)
    }

    /// The linear form `sum coeffs_i * x_i` with nvars = coeffs.len().
    pub fn linear(coeffs: &[f64]) -> Self {
        let mut p = Self::zero(coeffs.len());
        for (i, &c) in coeffs.iter().enumerate() {
            if c.abs() >= PRUNE_EPS {
                p.terms.insert(Monomial::var(i, 1), c);
            }
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Terms in graded lexicographic order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(k, &v)| (k, v))
    }

    pub fn coeff(&self, key: &Monomial) -> f64 {
        self.terms.get(key).copied().unwrap_or(0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_nvars(&self, other: &Self) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::DimensionMismatch(format!(
                "polynomials over {} and {} variables",
                self.nvars, other.nvars
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.nvars {
            return Err(Error::DimensionMismatch(format!(
                "point of dim {} for polynomial over {} variables",
                x.len(),
                self.nvars
            )));
        }
        Ok(self.terms.iter().map(|(m, c)| c * m.eval(x)).sum())
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.abs() >= PRUNE_EPS);
    }

    /// self += s * other (no pruning until the caller finishes accumulating;
    /// call `prune` or go through the public ops for canonical output).
    pub(crate) fn accumulate(&mut self, other: &Self, s: f64) {
        for (m, c) in &other.terms {
            *self.terms.entry(m.clone()).or_insert(0.0) += s * c;
        }
    }

    pub(crate) fn finish(mut self) -> Self {
        self.prune();
        self
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_nvars(other)?;
        let mut out = self.clone();
        out.accumulate(other, 1.0);
        out.prune();
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_nvars(other)?;
        let mut out = self.clone();
        out.accumulate(other, -1.0);
        out.prune();
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            let v = c * s;
            if v.abs() >= PRUNE_EPS {
                out.terms.insert(m.clone(), v);
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_nvars(other)?;
        let mut out = Self::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let key = ma.mul(mb);
                *out.terms.entry(key).or_insert(0.0) += ca * cb;
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn square(&self) -> Self {
        self.mul(self).expect("same nvars")
    }

    pub fn derivative(&self, var: usize) -> Result<Self> {
        if var >= self.nvars {
            return Err(Error::IndexOutOfRange(format!(
                "derivative variable {} out of range for {} variables",
                var, self.nvars
            )));
        }
        let mut out = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            if let Some((p, reduced)) = m.partial(var) {
                *out.terms.entry(reduced).or_insert(0.0) += p * c;
            }
        }
        out.prune();
        Ok(out)
    }

    /// Formal gradient: one polynomial per variable.
    pub fn grad_exact(&self) -> Vec<SparsePolynomial> {
        (0..self.nvars)
            .map(|v| self.derivative(v).expect("var in range"))
            .collect()
    }

    /// Central-difference gradient `(f(x+de_i) - f(x-de_i)) / 2d`.
    pub fn grad_numeric(&self, x: &[f64], delta: f64) -> Result<Vec<f64>> {
        if delta <= 0.0 {
            return Err(Error::InvalidInput(format!("delta {delta} must be > 0")));
        }
        if x.len() != self.nvars {
            return Err(Error::DimensionMismatch(format!(
                "point of dim {} for polynomial over {} variables",
                x.len(),
                self.nvars
            )));
        }
        let mut xp = x.to_vec();
        let mut g = vec![0.0; self.nvars];
        for i in 0..self.nvars {
            xp[i] = x[i] + delta;
            let fp = self.eval(&xp)?;
            xp[i] = x[i] - delta;
            let fm = self.eval(&xp)?;
            xp[i] = x[i];
            g[i] = (fp - fm) / (2.0 * delta);
        }
        Ok(g)
    }

    /// Textual dump: one term per line, `coefficient exponent-vector` with
    /// the exponent vector dense over all variables, in graded
    /// lexicographic order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (m, c) in &self.terms {
            let mut dense = vec![0u32; self.nvars];
            for &(i, p) in m.pairs() {
                dense[i as usize] = p;
            }
            write!(out, "{c}").unwrap();
            for e in dense {
                write!(out, " {e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Largest number of distinct variables a single compiled term may touch.
/// Degree-4 objectives need at most 4; the slack covers test polynomials.
const MAX_TERM_VARS: usize = 8;

#[derive(Debug, Clone)]
struct CompiledTerm {
    c: f64,
    len: u8,
    vars: [u32; MAX_TERM_VARS],
    pows: [u32; MAX_TERM_VARS],
}

/// Flat, allocation-free evaluation form of a [`SparsePolynomial`], for the
/// hot solver loops: one pass computes the value and, on request, the full
/// gradient via prefix/suffix products (no divisions, so points with zero
/// coordinates are handled exactly).
#[derive(Debug, Clone)]
pub struct CompiledPoly {
    nvars: usize,
    terms: Vec<CompiledTerm>,
}

#[inline]
fn powu(x: f64, p: u32) -> f64 {
    match p {
        0 => 1.0,
        1 => x,
        2 => x * x,
        3 => x * x * x,
        4 => {
            let s = x * x;
            s * s
        }
        _ => x.powi(p as i32),
    }
}

impl CompiledPoly {
    pub fn new(p: &SparsePolynomial) -> Self {
        let terms = p
            .terms()
            .map(|(m, c)| {
                let pairs = m.pairs();
                assert!(
                    pairs.len() <= MAX_TERM_VARS,
                    "term touches {} variables, compiled form supports {}",
                    pairs.len(),
                    MAX_TERM_VARS
                );
                let mut t = CompiledTerm {
                    c,
                    len: pairs.len() as u8,
                    vars: [0; MAX_TERM_VARS],
                    pows: [0; MAX_TERM_VARS],
                };
                for (slot, &(v, e)) in pairs.iter().enumerate() {
                    t.vars[slot] = v;
                    t.pows[slot] = e;
                }
                t
            })
            .collect();
        CompiledPoly {
            nvars: p.nvars(),
            terms,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        let mut acc = 0.0;
        for t in &self.terms {
            let mut prod = t.c;
            for m in 0..t.len as usize {
                prod *= powu(x[t.vars[m] as usize], t.pows[m]);
            }
            acc += prod;
        }
        acc
    }

    /// Value and gradient in one pass; `grad` is zeroed first.
    pub fn eval_with_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        debug_assert_eq!(grad.len(), self.nvars);
        grad.fill(0.0);
        let mut acc = 0.0;
        let mut factors = [0.0f64; MAX_TERM_VARS];
        let mut prefix = [0.0f64; MAX_TERM_VARS + 1];
        for t in &self.terms {
            let len = t.len as usize;
            prefix[0] = 1.0;
            for m in 0..len {
                factors[m] = powu(x[t.vars[m] as usize], t.pows[m]);
                prefix[m + 1] = prefix[m] * factors[m];
            }
            acc += t.c * prefix[len];
            let mut suffix = 1.0;
            for m in (0..len).rev() {
                let xv = x[t.vars[m] as usize];
                let dp = t.pows[m] as f64 * powu(xv, t.pows[m] - 1);
                grad[t.vars[m] as usize] += t.c * dp * prefix[m] * suffix;
                suffix *= factors[m];
            }
        }
        acc
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.nvars];
        self.eval_with_grad(x, &mut g);
        g
    }
}

/// Investor preference weights on (-m1, m2, -m3, m4); all nonnegative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preference {
    c: [f64; 4],
}

impl Preference {
    pub fn new(c: [f64; 4]) -> Result<Self> {
        for (i, v) in c.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "preference weight c{} = {} must be finite and >= 0",
                    i + 1,
                    v
                )));
            }
        }
        Ok(Preference { c })
    }

    pub fn c(&self) -> [f64; 4] {
        self.c
    }

    pub fn c1(&self) -> f64 {
        self.c[0]
    }
    pub fn c2(&self) -> f64 {
        self.c[1]
    }
    pub fn c3(&self) -> f64 {
        self.c[2]
    }
    pub fn c4(&self) -> f64 {
        self.c[3]
    }
}

/// The MVSK objective `f = -c1*m1 + c2*m2 - c3*m3 + c4*m4` as one sparse
/// polynomial over n variables. Moment entries enter once per sorted index
/// tuple, scaled by the tuple's permutation multiplicity.
pub fn build_objective<S: MomentSource + ?Sized>(src: &S, c: &Preference) -> SparsePolynomial {
    let n = src.asset_count();
    let [c1, c2, c3, c4] = c.c();
    let mut f = SparsePolynomial::zero(n);

    if c1 != 0.0 {
        for i in 0..n {
            let v = -c1 * src.mean(i);
            if v != 0.0 {
                *f.terms.entry(Monomial::var(i, 1)).or_insert(0.0) += v;
            }
        }
    }
    if c2 != 0.0 {
        for i in 0..n {
            for j in i..n {
                let mult = if i == j { 1.0 } else { 2.0 };
                let v = c2 * mult * src.cov(i, j);
                if v != 0.0 {
                    let key = Monomial::from_pairs(&[(i, 1), (j, 1)]);
                    *f.terms.entry(key).or_insert(0.0) += v;
                }
            }
        }
    }
    if c3 != 0.0 {
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    let v = -c3 * triple_multiplicity(i, j, k) * src.coskew(i, j, k);
                    if v != 0.0 {
                        let key = Monomial::from_pairs(&[(i, 1), (j, 1), (k, 1)]);
                        *f.terms.entry(key).or_insert(0.0) += v;
                    }
                }
            }
        }
    }
    if c4 != 0.0 {
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    for l in k..n {
                        let v = c4 * quad_multiplicity(i, j, k, l) * src.cokurt(i, j, k, l);
                        if v != 0.0 {
                            let key =
                                Monomial::from_pairs(&[(i, 1), (j, 1), (k, 1), (l, 1)]);
                            *f.terms.entry(key).or_insert(0.0) += v;
                        }
                    }
                }
            }
        }
    }
    f.finish()
}

/// Count of distinct permutations of the sorted triple (i <= j <= k).
pub(crate) fn triple_multiplicity(i: usize, j: usize, k: usize) -> f64 {
    if i == j && j == k {
        1.0
    } else if i == j || j == k {
        3.0
    } else {
        6.0
    }
}

/// Count of distinct permutations of the sorted quadruple (i <= j <= k <= l).
pub(crate) fn quad_multiplicity(i: usize, j: usize, k: usize, l: usize) -> f64 {
    let e_ij = (i == j) as u32;
    let e_jk = (j == k) as u32;
    let e_kl = (k == l) as u32;
    match e_ij + e_jk + e_kl {
        3 => 1.0, // aaaa
        // Two adjacent equalities: a triple plus a single (aaab / abbb)
        // when the middle pair is equal, otherwise two pairs (aabb).
        2 => {
            if j == k {
                4.0
            } else {
                6.0
            }
        }
        1 => 12.0, // one repeated pair, two distinct (aabc / abbc / abcc)
        _ => 24.0, // all distinct
    }
}

/// Consistency oracle wiring: evaluate the objective definition directly via
/// portfolio moments.
pub fn objective_value<S: MomentSource + ?Sized>(
    src: &S,
    c: &Preference,
    x: &[f64],
) -> Result<f64> {
    let [m1, m2, m3, m4] = portfolio_moments(src, x)?;
    let [c1, c2, c3, c4] = c.c();
    Ok(-c1 * m1 + c2 * m2 - c3 * m3 + c4 * m4)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly_x1x2() -> SparsePolynomial {
        SparsePolynomial::monomial(2, &[(0, 1), (1, 1)], 1.0).unwrap()
    }

    #[test]
    fn eval_bilinear_at_point() {
        assert_eq!(poly_x1x2().eval(&[1.0, 2.0]).unwrap(), 2.0);
    }

    #[test]
    fn eval_empty_is_zero() {
        let p = SparsePolynomial::zero(3);
        assert_eq!(p.eval(&[4.0, 5.0, 6.0]).unwrap(), 0.0);
    }

    #[test]
    fn eval_dim_mismatch_errors() {
        assert!(poly_x1x2().eval(&[1.0]).is_err());
    }

    #[test]
    fn grad_exact_of_square() {
        let p = SparsePolynomial::monomial(2, &[(0, 2)], 1.0).unwrap();
        let g = p.grad_exact();
        assert_eq!(g[0].eval(&[3.0, 0.0]).unwrap(), 6.0);
        assert!(g[1].is_zero());
    }

    #[test]
    fn grad_exact_of_triple_product() {
        let p = SparsePolynomial::monomial(3, &[(0, 1), (1, 1), (2, 1)], 1.0).unwrap();
        let d1 = p.derivative(1).unwrap();
        // d/dx2 (x1 x2 x3) = x1 x3
        assert_eq!(d1.eval(&[2.0, 9.0, 5.0]).unwrap(), 10.0);
    }

    #[test]
    fn grad_numeric_quadratic_exact() {
        // Central differences have no truncation error on quadratics; only
        // rounding in the (3 +- 0.01)^2 evaluations remains.
        let p = SparsePolynomial::monomial(1, &[(0, 2)], 1.0).unwrap();
        let g = p.grad_numeric(&[3.0], 0.01).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-11, "got {}", g[0]);
    }

    #[test]
    fn grad_numeric_quartic_bias() {
        // d/dx x^4 at 1 via central differences: 4 + 4*delta^2.
        let p = SparsePolynomial::monomial(1, &[(0, 4)], 1.0).unwrap();
        let g = p.grad_numeric(&[1.0], 0.01).unwrap();
        assert!((g[0] - 4.0004).abs() < 1e-10, "got {}", g[0]);
    }

    #[test]
    fn grad_numeric_constant_is_zero() {
        let p = SparsePolynomial::constant(2, 7.5);
        assert_eq!(p.grad_numeric(&[0.3, 0.4], 0.01).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn grad_numeric_rejects_nonpositive_delta() {
        let p = SparsePolynomial::constant(1, 1.0);
        assert!(p.grad_numeric(&[0.0], 0.0).is_err());
    }

    #[test]
    fn add_cancel_prunes_to_empty() {
        let p = poly_x1x2();
        let s = p.add(&p.scale(-1.0)).unwrap();
        assert!(s.is_zero());
    }

    #[test]
    fn mul_difference_of_squares() {
        let x1 = SparsePolynomial::monomial(2, &[(0, 1)], 1.0).unwrap();
        let x2 = SparsePolynomial::monomial(2, &[(1, 1)], 1.0).unwrap();
        let prod = x1.add(&x2).unwrap().mul(&x1.sub(&x2).unwrap()).unwrap();
        let expect = SparsePolynomial::monomial(2, &[(0, 2)], 1.0)
            .unwrap()
            .sub(&SparsePolynomial::monomial(2, &[(1, 2)], 1.0).unwrap())
            .unwrap();
        assert_eq!(prod, expect);
    }

    #[test]
    fn dump_is_graded_lex() {
        // 1 + x1^2 + x0 x1 + x0 over 2 vars; expect degree-ascending,
        // x0-major within each degree.
        let mut p = SparsePolynomial::constant(2, 1.0);
        p = p
            .add(&SparsePolynomial::monomial(2, &[(1, 2)], 1.0).unwrap())
            .unwrap();
        p = p
            .add(&SparsePolynomial::monomial(2, &[(0, 1), (1, 1)], 2.0).unwrap())
            .unwrap();
        p = p
            .add(&SparsePolynomial::monomial(2, &[(0, 1)], 3.0).unwrap())
            .unwrap();
        let dump = p.dump();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines, vec!["1 0 0", "3 1 0", "2 1 1", "1 0 2"]);
    }

    #[test]
    fn preference_rejects_negative() {
        assert!(Preference::new([1.0, -0.5, 0.0, 0.0]).is_err());
        assert!(Preference::new([0.0; 4]).is_ok());
    }

    #[test]
    fn compiled_matches_formal_evaluation() {
        // Mixed-degree polynomial with zero coordinates in the test point,
        // exercising the division-free gradient path.
        let mut p = SparsePolynomial::constant(3, 2.0);
        for (pairs, c) in [
            (vec![(0usize, 1u32)], -1.5),
            (vec![(0, 2), (1, 1), (2, 1)], 3.0),
            (vec![(1, 4)], 0.25),
            (vec![(0, 1), (2, 3)], -2.0),
        ] {
            p = p
                .add(&SparsePolynomial::monomial(3, &pairs, c).unwrap())
                .unwrap();
        }
        let compiled = CompiledPoly::new(&p);
        let grads = p.grad_exact();
        for x in [[0.3, 0.7, 0.1], [0.0, 0.5, 0.0], [1.0, 0.0, 2.0]] {
            let want = p.eval(&x).unwrap();
            let mut g = vec![0.0; 3];
            let got = compiled.eval_with_grad(&x, &mut g);
            assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
            assert!((compiled.eval(&x) - want).abs() <= 1e-12 * (1.0 + want.abs()));
            for v in 0..3 {
                let gw = grads[v].eval(&x).unwrap();
                assert!(
                    (g[v] - gw).abs() <= 1e-12 * (1.0 + gw.abs()),
                    "grad component {v} at {x:?}: {} vs {}",
                    g[v],
                    gw
                );
            }
        }
    }

    #[test]
    fn multiplicities_count_distinct_permutations() {
        let n = 3;
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    let mut count = 0;
                    for a in 0..n {
                        for b in 0..n {
                            for c in 0..n {
                                let mut s = [a, b, c];
                                s.sort_unstable();
                                if s == [i, j, k] {
                                    count += 1;
                                }
                            }
                        }
                    }
                    assert_eq!(
                        triple_multiplicity(i, j, k),
                        count as f64,
                        "triple ({i},{j},{k})"
                    );
                    for l in k..n {
                        let mut count = 0;
                        for a in 0..n {
                            for b in 0..n {
                                for c in 0..n {
                                    for d in 0..n {
                                        let mut s = [a, b, c, d];
                                        s.sort_unstable();
                                        if s == [i, j, k, l] {
                                            count += 1;
                                        }
                                    }
                                }
                            }
                        }
                        assert_eq!(
                            quad_multiplicity(i, j, k, l),
                            count as f64,
                            "quad ({i},{j},{k},{l})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn monomial_order_within_degree() {
        let x0x1 = Monomial::from_pairs(&[(0, 1), (1, 1)]);
        let x0sq = Monomial::from_pairs(&[(0, 2)]);
        let x1sq = Monomial::from_pairs(&[(1, 2)]);
        assert!(x0sq < x0x1, "x0^2 lists before x0 x1");
        assert!(x0x1 < x1sq, "x0 x1 lists before x1^2");
    }
}
