//! Difference-of-convex decompositions of the MVSK objective.
//!
//! Two routes are provided. The structured route splits every stored
//! co-moment monomial into a difference of convex sum-of-squares pieces
//! (see [`monomials`]) and routes each piece by the strict sign of its
//! tensor entry, yielding `f = G - H` with both sides convex quartics. The
//! universal route overestimates the objective's curvature with a single
//! scalar `eta` and uses `f = (eta/2)||x||^2 - ((eta/2)||x||^2 - f)`.
//!
//! The structured pair is valid on the nonnegative orthant whenever the
//! skewness term is active (the diagonal cube split is convex only there);
//! that always holds for feasible sets inside the simplex.

pub mod monomials;

use crate::linalg;
use crate::moments::{
    portfolio_moment_gradients, sigma_times, MomentSource, MomentTensors,
};
use crate::poly::{build_objective, CompiledPoly, Preference, SparsePolynomial};
use crate::{Error, Result};

/// Where a convex component is actually convex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    AllSpace,
    NonnegOrthant,
}

impl Domain {
    pub fn intersect(self, other: Self) -> Self {
        if self == Domain::NonnegOrthant || other == Domain::NonnegOrthant {
            Domain::NonnegOrthant
        } else {
            Domain::AllSpace
        }
    }

    pub fn contains(self, x: &[f64]) -> bool {
        match self {
            Domain::AllSpace => true,
            Domain::NonnegOrthant => x.iter().all(|&v| v >= 0.0),
        }
    }
}

/// A polynomial known to be convex on its domain, with a compiled
/// evaluation form. The gradient is the formal derivative of the value.
#[derive(Debug, Clone)]
pub struct ConvexComponent {
    value: SparsePolynomial,
    compiled: CompiledPoly,
    domain: Domain,
}

impl ConvexComponent {
    pub fn new(value: SparsePolynomial, domain: Domain) -> Self {
        let compiled = CompiledPoly::new(&value);
        ConvexComponent {
            value,
            compiled,
            domain,
        }
    }

    pub fn value(&self) -> &SparsePolynomial {
        &self.value
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.value.nvars() {
            return Err(Error::DimensionMismatch(format!(
                "point of dim {} for component over {} variables",
                x.len(),
                self.value.nvars()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.compiled.eval(x))
    }

    /// Value and gradient in one pass; `grad` must have length nvars.
    pub fn eval_with_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.compiled.eval_with_grad(x, grad))
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.compiled.grad(x))
    }
}

/// target = g - h with both components convex on the pair's domain.
#[derive(Debug, Clone)]
pub struct DcPair {
    g: ConvexComponent,
    h: ConvexComponent,
    target: SparsePolynomial,
    target_compiled: CompiledPoly,
}

impl DcPair {
    pub fn new(
        g: SparsePolynomial,
        h: SparsePolynomial,
        target: SparsePolynomial,
        domain: Domain,
    ) -> Self {
        let target_compiled = CompiledPoly::new(&target);
        DcPair {
            g: ConvexComponent::new(g, domain),
            h: ConvexComponent::new(h, domain),
            target,
            target_compiled,
        }
    }

    pub fn nvars(&self) -> usize {
        self.target.nvars()
    }

    pub fn g(&self) -> &ConvexComponent {
        &self.g
    }

    pub fn h(&self) -> &ConvexComponent {
        &self.h
    }

    pub fn target(&self) -> &SparsePolynomial {
        &self.target
    }

    pub fn domain(&self) -> Domain {
        self.g.domain().intersect(self.h.domain())
    }

    /// Evaluate the decomposed polynomial itself.
    pub fn eval_target(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.target.nvars() {
            return Err(Error::DimensionMismatch(format!(
                "point of dim {} for pair over {} variables",
                x.len(),
                self.target.nvars()
            )));
        }
        Ok(self.target_compiled.eval(x))
    }

    /// Gradient of the decomposed polynomial (formal route, compiled).
    pub fn target_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.target.nvars() {
            return Err(Error::DimensionMismatch(format!(
                "point of dim {} for pair over {} variables",
                x.len(),
                self.target.nvars()
            )));
        }
        Ok(self.target_compiled.grad(x))
    }
}

fn check_var(n: usize, i: usize) -> Result<()> {
    if i >= n {
        return Err(Error::IndexOutOfRange(format!(
            "variable {i} out of range for {n} variables"
        )));
    }
    Ok(())
}

/// x_i x_j = 1/4 (x_i+x_j)^2 - 1/4 (x_i-x_j)^2, convex both sides
/// everywhere.
pub fn decompose_bilinear(n: usize, i: usize, j: usize) -> Result<DcPair> {
    check_var(n, i)?;
    check_var(n, j)?;
    if i == j {
        return Err(Error::InvalidInput(format!(
            "bilinear split needs two distinct variables, got x_{i}^2; use decompose_even_power"
        )));
    }
    let sum = SparsePolynomial::monomial(n, &[(i, 1)], 1.0)?
        .add(&SparsePolynomial::monomial(n, &[(j, 1)], 1.0)?)?;
    let diff = SparsePolynomial::monomial(n, &[(i, 1)], 1.0)?
        .sub(&SparsePolynomial::monomial(n, &[(j, 1)], 1.0)?)?;
    let target = SparsePolynomial::monomial(n, &[(i, 1), (j, 1)], 1.0)?;
    Ok(DcPair::new(
        sum.square().scale(0.25),
        diff.square().scale(0.25),
        target,
        Domain::AllSpace,
    ))
}

/// Alternative bilinear split:
/// x_i x_j = 1/2 (x_i+x_j)^2 - 1/2 (x_i^2 + x_j^2).
pub fn decompose_bilinear_alt(n: usize, i: usize, j: usize) -> Result<DcPair> {
    check_var(n, i)?;
    check_var(n, j)?;
    if i == j {
        return Err(Error::InvalidInput(format!(
            "bilinear split needs two distinct variables, got x_{i}^2; use decompose_even_power"
        )));
    }
    let sum = SparsePolynomial::monomial(n, &[(i, 1)], 1.0)?
        .add(&SparsePolynomial::monomial(n, &[(j, 1)], 1.0)?)?;
    let h = SparsePolynomial::monomial(n, &[(i, 2)], 0.5)?
        .add(&SparsePolynomial::monomial(n, &[(j, 2)], 0.5)?)?;
    let target = SparsePolynomial::monomial(n, &[(i, 1), (j, 1)], 1.0)?;
    Ok(DcPair::new(sum.square().scale(0.5), h, target, Domain::AllSpace))
}

/// x_i^{2k} = x_i^{2k} - 0: even powers are already convex.
pub fn decompose_even_power(n: usize, i: usize, power: u32) -> Result<DcPair> {
    check_var(n, i)?;
    if power == 0 || power % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "trivial split needs a positive even power, got {power}"
        )));
    }
    let value = SparsePolynomial::monomial(n, &[(i, power)], 1.0)?;
    Ok(DcPair::new(
        value.clone(),
        SparsePolynomial::zero(n),
        value,
        Domain::AllSpace,
    ))
}

/// Product rule for decompositions: with p = p1 - p2 and q = q1 - q2,
/// p*q = 1/2 [(p1+q1)^2 + (p2+q2)^2] - 1/2 [(p1+q2)^2 + (p2+q1)^2].
pub fn decompose_product(p: &DcPair, q: &DcPair) -> Result<DcPair> {
    if p.nvars() != q.nvars() {
        return Err(Error::DimensionMismatch(format!(
            "pairs over {} and {} variables",
            p.nvars(),
            q.nvars()
        )));
    }
    let (p1, p2) = (p.g.value(), p.h.value());
    let (q1, q2) = (q.g.value(), q.h.value());
    let g = p1
        .add(q1)?
        .square()
        .add(&p2.add(q2)?.square())?
        .scale(0.5);
    let h = p1
        .add(q2)?
        .square()
        .add(&p2.add(q1)?.square())?
        .scale(0.5);
    let target = p.target().mul(q.target())?;
    Ok(DcPair::new(g, h, target, p.domain().intersect(q.domain())))
}

/// Route a unit split (gu, hu) scaled by the signed weight w: positive
/// weights keep the orientation, negative weights swap the two pieces so
/// both accumulated sides stay convex.
fn route(
    g_acc: &mut SparsePolynomial,
    h_acc: &mut SparsePolynomial,
    gu: &SparsePolynomial,
    hu: &SparsePolynomial,
    w: f64,
) {
    if w > 0.0 {
        g_acc.accumulate(gu, w);
        h_acc.accumulate(hu, w);
    } else {
        g_acc.accumulate(hu, -w);
        h_acc.accumulate(gu, -w);
    }
}

fn mono(n: usize, pairs: &[(usize, u32)], c: f64) -> SparsePolynomial {
    SparsePolynomial::monomial(n, pairs, c).expect("indices in range")
}

/// DC split of the cubic portfolio moment, valid on the nonnegative
/// orthant. Every stored coskewness entry is weighted by its permutation
/// multiplicity and routed by strict sign; exact zeros contribute nothing.
pub fn build_m3_pair(t: &MomentTensors) -> DcPair {
    let n = t.asset_count();
    let mut g = SparsePolynomial::zero(n);
    let mut h = SparsePolynomial::zero(n);
    let mut target = SparsePolynomial::zero(n);
    t.for_each_sorted_triple(|a, b, c, s| {
        if s == 0.0 {
            return;
        }
        if a == c {
            // Diagonal cube x_a^3: trivial split, orthant-only convexity.
            let unit = monomials::cube_value(n, a);
            if s > 0.0 {
                g.accumulate(&unit, s);
            } else {
                h.accumulate(&unit, -s);
            }
            target.accumulate(&unit, s);
        } else if a == b {
            // x_a^2 x_c, weight 3.
            let w = 3.0 * s;
            route(
                &mut g,
                &mut h,
                &monomials::square_lin_g(n, a, c),
                &monomials::square_lin_h(n, a, c),
                w,
            );
            target.accumulate(&mono(n, &[(a, 2), (c, 1)], 1.0), w);
        } else if b == c {
            // x_b^2 x_a, weight 3.
            let w = 3.0 * s;
            route(
                &mut g,
                &mut h,
                &monomials::square_lin_g(n, b, a),
                &monomials::square_lin_h(n, b, a),
                w,
            );
            target.accumulate(&mono(n, &[(b, 2), (a, 1)], 1.0), w);
        } else {
            // x_a x_b x_c, weight 6.
            let w = 6.0 * s;
            route(
                &mut g,
                &mut h,
                &monomials::triple_g(n, a, b, c),
                &monomials::triple_h(n, a, b, c),
                w,
            );
            target.accumulate(&mono(n, &[(a, 1), (b, 1), (c, 1)], 1.0), w);
        }
    });
    DcPair::new(g.finish(), h.finish(), target.finish(), Domain::NonnegOrthant)
}

/// DC split of the quartic portfolio moment, valid on all of R^n.
pub fn build_m4_pair(t: &MomentTensors) -> DcPair {
    let n = t.asset_count();
    let mut g = SparsePolynomial::zero(n);
    let mut h = SparsePolynomial::zero(n);
    let mut target = SparsePolynomial::zero(n);
    t.for_each_sorted_quad(|a, b, c, d, s| {
        if s == 0.0 {
            return;
        }
        match (a == b, b == c, c == d) {
            (true, true, true) => {
                // Diagonal quartic x_a^4: already convex.
                let unit = monomials::quartic_value(n, a);
                if s > 0.0 {
                    g.accumulate(&unit, s);
                } else {
                    h.accumulate(&unit, -s);
                }
                target.accumulate(&unit, s);
            }
            (true, true, false) => {
                // x_a^3 x_d, weight 4.
                let w = 4.0 * s;
                route(
                    &mut g,
                    &mut h,
                    &monomials::cube_lin_g(n, a, d),
                    &monomials::cube_lin_h(n, a, d),
                    w,
                );
                target.accumulate(&mono(n, &[(a, 3), (d, 1)], 1.0), w);
            }
            (false, true, true) => {
                // x_b^3 x_a, weight 4.
                let w = 4.0 * s;
                route(
                    &mut g,
                    &mut h,
                    &monomials::cube_lin_g(n, b, a),
                    &monomials::cube_lin_h(n, b, a),
                    w,
                );
                target.accumulate(&mono(n, &[(b, 3), (a, 1)], 1.0), w);
            }
            (true, false, true) => {
                // x_a^2 x_c^2, weight 6.
                let w = 6.0 * s;
                route(
                    &mut g,
                    &mut h,
                    &monomials::square_square_g(n, a, c),
                    &monomials::square_square_h(n, a, c),
                    w,
                );
                target.accumulate(&mono(n, &[(a, 2), (c, 2)], 1.0), w);
            }
            (true, false, false) => {
                // x_a^2 x_c x_d, weight 12.
                let w = 12.0 * s;
                route(
                    &mut g,
                    &mut h,
                    &monomials::square_bilin_g(n, a, c, d),
                    &monomials::square_bilin_h(n, a, c, d),
                    w,
                );
                target.accumulate(&mono(n, &[(a, 2), (c, 1), (d, 1)], 1.0), w);
            }
            (false, true, false) => {
                // x_b^2 x_a x_d, weight 12.
                let w = 12.0 * s;
                route(
                    &mut g,
                    &mut h,
                    &monomials::square_bilin_g(n, b, a, d),
                    &monomials::square_bilin_h(n, b, a, d),
                    w,
                );
                target.accumulate(&mono(n, &[(b, 2), (a, 1), (d, 1)], 1.0), w);
            }
            (false, false, true) => {
                // x_c^2 x_a x_b, weight 12.
                let w = 12.0 * s;
                route(
                    &mut g,
                    &mut h,
                    &monomials::square_bilin_g(n, c, a, b),
                    &monomials::square_bilin_h(n, c, a, b),
                    w,
                );
                target.accumulate(&mono(n, &[(c, 2), (a, 1), (b, 1)], 1.0), w);
            }
            (false, false, false) => {
                // x_a x_b x_c x_d, weight 24.
                let w = 24.0 * s;
                route(
                    &mut g,
                    &mut h,
                    &monomials::quad_g(n, a, b, c, d),
                    &monomials::quad_h(n, a, b, c, d),
                    w,
                );
                target.accumulate(&mono(n, &[(a, 1), (b, 1), (c, 1), (d, 1)], 1.0), w);
            }
        }
    });
    DcPair::new(g.finish(), h.finish(), target.finish(), Domain::AllSpace)
}

/// DC split of the full objective:
/// G = -c1 m1 + c2 m2 + c3 h_m3 + c4 g_m4 and H = c3 g_m3 + c4 h_m4, so
/// G - H = f. The mean and variance terms are already convex and stay in
/// G whole. Valid on the nonnegative orthant when the skewness weight is
/// active, everywhere otherwise.
pub fn assemble_g_h(t: &MomentTensors, c: &Preference) -> DcPair {
    let n = t.asset_count();
    let [c1, c2, c3, c4] = c.c();
    let convex_part = Preference::new([c1, c2, 0.0, 0.0]).expect("weights already validated");
    let mut g = build_objective(t, &convex_part);
    let mut h = SparsePolynomial::zero(n);
    let mut domain = Domain::AllSpace;
    if c3 != 0.0 {
        let m3 = build_m3_pair(t);
        // -c3 m3 = c3 h_m3 - c3 g_m3.
        g.accumulate(m3.h.value(), c3);
        h.accumulate(m3.g.value(), c3);
        domain = Domain::NonnegOrthant;
    }
    if c4 != 0.0 {
        let m4 = build_m4_pair(t);
        g.accumulate(m4.g.value(), c4);
        h.accumulate(m4.h.value(), c4);
    }
    let target = build_objective(t, c);
    DcPair::new(g.finish(), h.finish(), target, domain)
}

/// Curvature bound for the universal split:
/// eta = 2 c2 ||Sigma||_inf + 6 c3 max_i sum_{j,k} |S_ijk|
///     + 12 c4 max_i sum_{j,k,l} |K_ijkl|,
/// with the inner sums over the full permutation-expanded tensors.
pub fn compute_eta(t: &MomentTensors, c: &Preference) -> f64 {
    let n = t.asset_count();
    let [_, c2, c3, c4] = c.c();
    let mut eta = 0.0;
    if c2 != 0.0 {
        let mut row_max: f64 = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += t.cov(i, j).abs();
            }
            row_max = row_max.max(row);
        }
        eta += 2.0 * c2 * row_max;
    }
    if c3 != 0.0 {
        let mut row_max: f64 = 0.0;
        for i in 0..n {
            // Dense sum over (j,k) from sorted pairs j <= k: off-diagonal
            // pairs appear twice in the dense expansion.
            let mut row = 0.0;
            for j in 0..n {
                for k in j..n {
                    let w = if j == k { 1.0 } else { 2.0 };
                    row += w * t.coskew(i, j, k).abs();
                }
            }
            row_max = row_max.max(row);
        }
        eta += 6.0 * c3 * row_max;
    }
    if c4 != 0.0 {
        let mut row_max: f64 = 0.0;
        for i in 0..n {
            // Dense sum over (j,k,l) from sorted triples weighted by their
            // permutation count.
            let mut row = 0.0;
            for j in 0..n {
                for k in j..n {
                    for l in k..n {
                        let w = crate::poly::triple_multiplicity(j, k, l);
                        row += w * t.cokurt(i, j, k, l).abs();
                    }
                }
            }
            row_max = row_max.max(row);
        }
        eta += 12.0 * c4 * row_max;
    }
    eta
}

/// Universal split f = (eta/2)||x||^2 - ((eta/2)||x||^2 - f), valid on the
/// simplex where the curvature bound holds.
#[derive(Debug, Clone)]
pub struct UniversalPair {
    eta: f64,
    f: SparsePolynomial,
    f_compiled: CompiledPoly,
    tensors: MomentTensors,
    c: Preference,
}

impl UniversalPair {
    /// Errors when the curvature bound is zero (only the mean is weighted,
    /// or all weights vanish): the quadratic side would be degenerate.
    pub fn new(t: &MomentTensors, c: &Preference) -> Result<Self> {
        let eta = compute_eta(t, c);
        if eta <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "universal split needs positive curvature, got eta = {eta}; \
                 weight at least one of variance, skewness, kurtosis on \
                 non-degenerate data"
            )));
        }
        let f = build_objective(t, c);
        let f_compiled = CompiledPoly::new(&f);
        Ok(UniversalPair {
            eta,
            f,
            f_compiled,
            tensors: t.clone(),
            c: *c,
        })
    }

    pub fn nvars(&self) -> usize {
        self.tensors.asset_count()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn f(&self) -> &SparsePolynomial {
        &self.f
    }

    pub fn preference(&self) -> Preference {
        self.c
    }

    pub fn eval_f(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.f_compiled.eval(x))
    }

    /// H_bar(x) = (eta/2)||x||^2 - f(x).
    pub fn eval_h_bar(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let sq: f64 = x.iter().map(|v| v * v).sum();
        Ok(0.5 * self.eta * sq - self.f_compiled.eval(x))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.nvars() {
            return Err(Error::DimensionMismatch(format!(
                "point of dim {} for {} assets",
                x.len(),
                self.nvars()
            )));
        }
        Ok(())
    }

    /// Moment-contraction route for the objective gradient:
    /// grad f = -c1 mu + 2 c2 Sigma x - c3 grad m3 + c4 grad m4.
    pub fn grad_f(&self, x: &[f64]) -> Result<Vec<f64>> {
        objective_gradient(&self.tensors, &self.c, x)
    }

    /// grad H_bar = eta x - grad f, expanded as
    /// eta x + c1 mu - 2 c2 Sigma x + c3 grad m3 - c4 grad m4.
    pub fn grad_h_bar(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.grad_f(x)?;
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi = self.eta * xi - *gi;
        }
        Ok(g)
    }
}

/// Objective gradient by moment contraction (independent of the formal
/// polynomial route): grad f = -c1 mu + 2 c2 Sigma x - c3 grad m3
/// + c4 grad m4, with zero-weight blocks skipped.
pub fn objective_gradient<S: MomentSource + ?Sized>(
    src: &S,
    c: &Preference,
    x: &[f64],
) -> Result<Vec<f64>> {
    let n = src.asset_count();
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "point of dim {} for {} assets",
            x.len(),
            n
        )));
    }
    let [c1, c2, c3, c4] = c.c();
    let mut g = vec![0.0; n];
    if c1 != 0.0 {
        for i in 0..n {
            g[i] -= c1 * src.mean(i);
        }
    }
    if c2 != 0.0 {
        let sx = sigma_times(src, x)?;
        for i in 0..n {
            g[i] += 2.0 * c2 * sx[i];
        }
    }
    if c3 != 0.0 || c4 != 0.0 {
        let (g3, g4) = portfolio_moment_gradients(src, x)?;
        for i in 0..n {
            g[i] += -c3 * g3[i] + c4 * g4[i];
        }
    }
    Ok(g)
}

/// Sampled convexity check used by tests: smallest eigenvalue of the
/// central-difference Hessian of `f` at `x`.
pub fn sampled_hessian_min_eig<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], step: f64) -> f64 {
    let hess = linalg::fd_hessian(&f, x, step);
    linalg::min_eigenvalue(&hess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::ReturnMatrix;

    fn tensors_1d(sigma: f64, skew: f64, kurt: f64) -> MomentTensors {
        MomentTensors::from_sorted_entries(1, vec![0.0], vec![sigma], vec![skew], vec![kurt])
            .unwrap()
    }

    fn random_tensors(n: usize, seed: u64) -> MomentTensors {
        let r = ReturnMatrix::synthetic(n, 25, seed, -0.1, 0.4).unwrap();
        MomentTensors::estimate(&r)
    }

    #[test]
    fn bilinear_split_at_reference_point() {
        let pair = decompose_bilinear(2, 0, 1).unwrap();
        let x = [1.0, 2.0];
        assert_eq!(pair.g().eval(&x).unwrap(), 2.25);
        assert_eq!(pair.h().eval(&x).unwrap(), 0.25);
        assert_eq!(pair.eval_target(&x).unwrap(), 2.0);
    }

    #[test]
    fn bilinear_split_diagonal_collapse() {
        let pair = decompose_bilinear(2, 0, 1).unwrap();
        let x = [0.7, 0.7];
        assert_eq!(pair.h().eval(&x).unwrap(), 0.0);
        assert!((pair.g().eval(&x).unwrap() - 0.49).abs() < 1e-15);
    }

    #[test]
    fn bilinear_rejects_equal_indices() {
        assert!(decompose_bilinear(2, 1, 1).is_err());
        assert!(decompose_bilinear_alt(2, 0, 0).is_err());
    }

    #[test]
    fn bilinear_alt_identity() {
        let pair = decompose_bilinear_alt(3, 0, 2).unwrap();
        let diff = pair.g().value().sub(pair.h().value()).unwrap();
        assert_eq!(diff, *pair.target());
    }

    #[test]
    fn even_power_split() {
        let pair = decompose_even_power(2, 1, 4).unwrap();
        assert!(pair.h().value().is_zero());
        assert_eq!(pair.g().value(), pair.target());
        assert!(decompose_even_power(2, 1, 3).is_err(), "odd power");
        assert!(decompose_even_power(2, 1, 0).is_err(), "zero power");
    }

    #[test]
    fn product_of_bilinear_pairs() {
        let p = decompose_bilinear(4, 0, 1).unwrap();
        let q = decompose_bilinear(4, 2, 3).unwrap();
        let prod = decompose_product(&p, &q).unwrap();
        let want = SparsePolynomial::monomial(4, &[(0, 1), (1, 1), (2, 1), (3, 1)], 1.0).unwrap();
        assert_eq!(*prod.target(), want);
        let diff = prod.g().value().sub(prod.h().value()).unwrap();
        assert_eq!(diff, want, "g - h reconstructs the product exactly");
    }

    #[test]
    fn product_with_zero_target() {
        let p = decompose_bilinear(4, 0, 1).unwrap();
        let zero = DcPair::new(
            SparsePolynomial::zero(4),
            SparsePolynomial::zero(4),
            SparsePolynomial::zero(4),
            Domain::AllSpace,
        );
        let prod = decompose_product(&p, &zero).unwrap();
        assert!(prod.target().is_zero());
    }

    #[test]
    fn m3_pair_routes_negative_diagonal_into_h() {
        let t = tensors_1d(0.0, -2.0, 0.0);
        let pair = build_m3_pair(&t);
        assert!(pair.g().value().is_zero(), "g = {}", pair.g().value().dump());
        let want = SparsePolynomial::monomial(1, &[(0, 3)], 2.0).unwrap();
        assert_eq!(*pair.h().value(), want);
        assert_eq!(pair.domain(), Domain::NonnegOrthant);
    }

    #[test]
    fn m4_pair_keeps_positive_diagonal_in_g() {
        let t = tensors_1d(0.0, 0.0, 3.0);
        let pair = build_m4_pair(&t);
        let want = SparsePolynomial::monomial(1, &[(0, 4)], 3.0).unwrap();
        assert_eq!(*pair.g().value(), want);
        assert!(pair.h().value().is_zero());
        assert_eq!(pair.domain(), Domain::AllSpace);
    }

    #[test]
    fn zero_tensors_give_zero_pairs() {
        let t = MomentTensors::from_sorted_entries(
            2,
            vec![0.0; 2],
            vec![0.0; 3],
            vec![0.0; 4],
            vec![0.0; 5],
        )
        .unwrap();
        let m3 = build_m3_pair(&t);
        let m4 = build_m4_pair(&t);
        assert!(m3.g().value().is_zero() && m3.h().value().is_zero());
        assert!(m4.g().value().is_zero() && m4.h().value().is_zero());
    }

    /// Largest coefficient of (g - h) - target relative to the target's
    /// own scale. Unit splits cancel exactly; weighted sums of them are
    /// only exact up to rounding of the weight multiplications.
    fn reconstruction_residual(pair: &DcPair) -> f64 {
        let diff = pair.g().value().sub(pair.h().value()).unwrap();
        let resid = diff.sub(pair.target()).unwrap();
        resid.max_abs_coeff() / (1.0 + pair.target().max_abs_coeff())
    }

    #[test]
    fn m3_difference_reconstructs_target_coefficients() {
        let t = random_tensors(4, 31);
        let pair = build_m3_pair(&t);
        let resid = reconstruction_residual(&pair);
        assert!(resid <= 1e-13, "cubic coefficient residual {resid}");
    }

    #[test]
    fn m4_difference_reconstructs_target_coefficients() {
        let t = random_tensors(4, 32);
        let pair = build_m4_pair(&t);
        let resid = reconstruction_residual(&pair);
        assert!(resid <= 1e-13, "quartic coefficient residual {resid}");
    }

    #[test]
    fn m3_target_matches_portfolio_moment() {
        let t = random_tensors(3, 33);
        let pair = build_m3_pair(&t);
        let x = [0.2, 0.3, 0.5];
        let m = crate::moments::portfolio_moments(&t, &x).unwrap();
        let got = pair.eval_target(&x).unwrap();
        assert!((got - m[2]).abs() <= 1e-12 * (1.0 + m[2].abs()));
    }

    #[test]
    fn assembled_pair_with_convex_weights_only() {
        let t = random_tensors(3, 34);
        let c = Preference::new([1.0, 1.0, 0.0, 0.0]).unwrap();
        let pair = assemble_g_h(&t, &c);
        assert!(pair.h().value().is_zero());
        assert_eq!(pair.g().value(), pair.target());
        assert_eq!(pair.domain(), Domain::AllSpace);
    }

    #[test]
    fn assembled_pair_pure_kurtosis_matches_m4_split() {
        let t = random_tensors(3, 35);
        let c = Preference::new([0.0, 0.0, 0.0, 1.0]).unwrap();
        let pair = assemble_g_h(&t, &c);
        let m4 = build_m4_pair(&t);
        assert_eq!(pair.g().value(), m4.g().value());
        assert_eq!(pair.h().value(), m4.h().value());
        assert_eq!(pair.domain(), Domain::AllSpace);
    }

    #[test]
    fn assembled_pair_identity_at_random_points() {
        let t = random_tensors(4, 36);
        let c = Preference::new([10.0, 1.0, 10.0, 1.0]).unwrap();
        let pair = assemble_g_h(&t, &c);
        assert_eq!(pair.domain(), Domain::NonnegOrthant);
        let xs = [
            [0.25, 0.25, 0.25, 0.25],
            [0.7, 0.1, 0.1, 0.1],
            [0.0, 0.0, 0.5, 0.5],
        ];
        for x in xs {
            let f = crate::poly::objective_value(&t, &c, &x).unwrap();
            let g = pair.g().eval(&x).unwrap();
            let h = pair.h().eval(&x).unwrap();
            assert!(
                ((g - h) - f).abs() <= 1e-9 * (1.0 + f.abs()),
                "identity at {x:?}: g-h = {}, f = {f}",
                g - h
            );
        }
    }

    #[test]
    fn eta_single_asset_reference_value() {
        let t = tensors_1d(2.0, -1.0, 1.0);
        let c = Preference::new([0.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(compute_eta(&t, &c), 22.0);
    }

    #[test]
    fn eta_zero_when_only_mean_weighted() {
        let t = random_tensors(3, 37);
        let c = Preference::new([5.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(compute_eta(&t, &c), 0.0);
        assert!(UniversalPair::new(&t, &c).is_err());
    }

    #[test]
    fn universal_pair_gradient_identity() {
        let t = random_tensors(4, 38);
        let c = Preference::new([1.0, 10.0, 1.0, 10.0]).unwrap();
        let pair = UniversalPair::new(&t, &c).unwrap();
        let x = [0.4, 0.3, 0.2, 0.1];
        let formal = CompiledPoly::new(pair.f()).grad(&x);
        let hb = pair.grad_h_bar(&x).unwrap();
        for i in 0..4 {
            let want = pair.eta() * x[i] - formal[i];
            assert!(
                (hb[i] - want).abs() <= 1e-10 * (1.0 + want.abs()),
                "component {i}: {} vs {}",
                hb[i],
                want
            );
        }
    }

    #[test]
    fn universal_gradient_at_origin_is_scaled_mean() {
        let t = random_tensors(3, 39);
        let c = Preference::new([2.0, 1.0, 1.0, 1.0]).unwrap();
        let pair = UniversalPair::new(&t, &c).unwrap();
        let hb = pair.grad_h_bar(&[0.0, 0.0, 0.0]).unwrap();
        for i in 0..3 {
            let want = 2.0 * t.mean(i);
            assert!((hb[i] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn universal_h_bar_value_is_quadratic_minus_objective() {
        let t = random_tensors(3, 40);
        let c = Preference::new([10.0, 10.0, 10.0, 10.0]).unwrap();
        let pair = UniversalPair::new(&t, &c).unwrap();
        let x = [0.5, 0.2, 0.3];
        let f = pair.eval_f(&x).unwrap();
        let sq: f64 = x.iter().map(|v| v * v).sum();
        let want = 0.5 * pair.eta() * sq - f;
        assert_eq!(pair.eval_h_bar(&x).unwrap(), want);
    }
}
