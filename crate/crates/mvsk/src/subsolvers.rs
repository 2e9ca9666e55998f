//! Convex subproblem machinery: exact projection onto the standard simplex
//! (optionally intersected with a target-return hyperplane) and a projected
//! gradient minimizer for smooth convex polynomials over those sets.

use crate::dcsos::ConvexComponent;
use crate::linalg;
use crate::{Error, Result};

/// Coordinates in (-CLAMP_EPS, 0) after a projection are snapped to zero so
/// active-set queries stay well defined.
const CLAMP_EPS: f64 = 1e-15;

/// The feasible sets the solvers understand.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    /// {x >= 0, sum x = 1}.
    Simplex { n: usize },
    /// The simplex intersected with {mu . x = r}.
    SimplexWithReturn { mu: Vec<f64>, r: f64 },
}

impl FeasibleSet {
    pub fn simplex(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput(
                "feasible set needs at least one asset".into(),
            ));
        }
        Ok(FeasibleSet::Simplex { n })
    }

    /// Errors when r lies outside [min mu, max mu]: the intersection is
    /// empty.
    pub fn simplex_with_return(mu: Vec<f64>, r: f64) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidInput(
                "feasible set needs at least one asset".into(),
            ));
        }
        if !r.is_finite() || mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "target return and means must be finite".into(),
            ));
        }
        let lo = mu.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if r < lo || r > hi {
            return Err(Error::Infeasible(format!(
                "target return {r} outside the attainable range [{lo}, {hi}]"
            )));
        }
        Ok(FeasibleSet::SimplexWithReturn { mu, r })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Simplex { n } => *n,
            FeasibleSet::SimplexWithReturn { mu, .. } => mu.len(),
        }
    }

    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        match self {
            FeasibleSet::Simplex { n } => {
                if y.len() != *n {
                    return Err(Error::DimensionMismatch(format!(
                        "point of dim {} for a {n}-dim simplex",
                        y.len()
                    )));
                }
                project_simplex(y)
            }
            FeasibleSet::SimplexWithReturn { mu, r } => project_simplex_with_return(y, mu, *r),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let sum: f64 = x.iter().sum();
        let nonneg = x.iter().all(|&v| v >= -tol);
        let on_simplex = nonneg && (sum - 1.0).abs() <= tol;
        match self {
            FeasibleSet::Simplex { .. } => on_simplex,
            FeasibleSet::SimplexWithReturn { mu, r } => {
                on_simplex && (linalg::dot(mu, x) - r).abs() <= tol
            }
        }
    }

    /// Vertex set of the polytope, used for first-order optimality
    /// certificates. For the simplex these are the coordinate vectors; for
    /// the return-constrained set, every feasible two-asset segment point
    /// where the hyperplane crosses an edge of the simplex.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        match self {
            FeasibleSet::Simplex { n } => (0..*n)
                .map(|i| {
                    let mut e = vec![0.0; *n];
                    e[i] = 1.0;
                    e
                })
                .collect(),
            FeasibleSet::SimplexWithReturn { mu, r } => {
                let n = mu.len();
                let spread = mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    - mu.iter().cloned().fold(f64::INFINITY, f64::min);
                if spread <= 1e-14 {
                    // Degenerate hyperplane: the whole simplex is feasible.
                    return FeasibleSet::Simplex { n }.vertices();
                }
                let mut verts = Vec::new();
                for i in 0..n {
                    for j in (i + 1)..n {
                        if mu[i] == mu[j] {
                            continue;
                        }
                        let t = (r - mu[j]) / (mu[i] - mu[j]);
                        if (-1e-12..=1.0 + 1e-12).contains(&t) {
                            let tc = t.clamp(0.0, 1.0);
                            let mut v = vec![0.0; n];
                            v[i] = tc;
                            v[j] = 1.0 - tc;
                            verts.push(v);
                        }
                    }
                }
                verts
            }
        }
    }
}

/// Euclidean projection onto the standard simplex by sort and threshold:
/// x_i = max(y_i - tau, 0) with tau chosen so the result sums to one.
pub fn project_simplex(y: &[f64]) -> Result<Vec<f64>> {
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidInput("cannot project an empty vector".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "cannot project a non-finite vector".into(),
        ));
    }
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite values compare"));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let cand = (cumsum - 1.0) / (j + 1) as f64;
        if uj - cand > 0.0 {
            tau = cand;
        }
    }
    let mut x: Vec<f64> = y.iter().map(|&v| (v - tau).max(0.0)).collect();
    renormalize(&mut x);
    Ok(x)
}

/// Snap tiny negative round-off to zero and rescale so the entries sum to
/// one exactly (up to one final rounding).
fn renormalize(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v > -CLAMP_EPS && *v < 0.0 {
            *v = 0.0;
        }
    }
    let sum: f64 = x.iter().sum();
    if sum > 0.0 && sum != 1.0 {
        for v in x.iter_mut() {
            *v /= sum;
        }
    }
}

/// Euclidean projection onto the simplex intersected with {mu . x = r}.
///
/// The KKT system is x_i = max(y_i - tau - lambda mu_i, 0); the outer
/// multiplier lambda is found by bisection (the attained return is
/// continuous and non-increasing in lambda), the inner tau by the
/// sort-threshold projection. The active set identified by the bisection is
/// then polished with an exact two-constraint least-squares solve so the
/// equalities hold to machine precision.
pub fn project_simplex_with_return(y: &[f64], mu: &[f64], r: f64) -> Result<Vec<f64>> {
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidInput("cannot project an empty vector".into()));
    }
    if mu.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "means of dim {} for a point of dim {n}",
            mu.len()
        )));
    }
    if y.iter().chain(mu.iter()).any(|v| !v.is_finite()) || !r.is_finite() {
        return Err(Error::InvalidInput(
            "cannot project with non-finite inputs".into(),
        ));
    }
    let lo = mu.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if r < lo || r > hi {
        return Err(Error::Infeasible(format!(
            "target return {r} outside the attainable range [{lo}, {hi}]"
        )));
    }

    let scale = 1.0 + lo.abs().max(hi.abs());
    if hi - lo <= 1e-14 * scale {
        // All means equal: the hyperplane is redundant (feasibility was
        // checked above), so this is a plain simplex projection.
        return project_simplex(y);
    }
    if (r - hi).abs() <= 1e-13 * scale {
        return project_on_support(y, mu, |m| (m - hi).abs() <= 1e-13 * scale);
    }
    if (r - lo).abs() <= 1e-13 * scale {
        return project_on_support(y, mu, |m| (m - lo).abs() <= 1e-13 * scale);
    }

    // phi(lambda) = mu . project_simplex(y - lambda mu) is continuous and
    // non-increasing, with limits max mu (lambda -> -inf) and min mu
    // (lambda -> +inf); r strictly inside (lo, hi) is always bracketed.
    let phi = |lambda: f64| -> Result<(f64, Vec<f64>)> {
        let shifted: Vec<f64> = y
            .iter()
            .zip(mu)
            .map(|(&yi, &mi)| yi - lambda * mi)
            .collect();
        let x = project_simplex(&shifted)?;
        Ok((linalg::dot(mu, &x), x))
    };

    let (mut lam_lo, mut lam_hi) = (0.0_f64, 0.0_f64);
    let (phi0, mut best) = phi(0.0)?;
    if phi0 > r {
        // Need larger lambda to push the return down.
        let mut step = 1.0;
        loop {
            lam_hi = lam_lo + step;
            if phi(lam_hi)?.0 <= r {
                break;
            }
            step *= 2.0;
            if step > 1e18 {
                return Err(Error::Numerical(
                    "return-constrained projection failed to bracket the multiplier".into(),
                ));
            }
        }
    } else {
        let mut step = 1.0;
        loop {
            lam_lo = lam_hi - step;
            if phi(lam_lo)?.0 >= r {
                break;
            }
            step *= 2.0;
            if step > 1e18 {
                return Err(Error::Numerical(
                    "return-constrained projection failed to bracket the multiplier".into(),
                ));
            }
        }
    }

    for _ in 0..200 {
        let mid = 0.5 * (lam_lo + lam_hi);
        let (v, x) = phi(mid)?;
        best = x;
        if (v - r).abs() <= 1e-13 * scale {
            break;
        }
        if v > r {
            lam_lo = mid;
        } else {
            lam_hi = mid;
        }
        if lam_hi - lam_lo <= f64::EPSILON * (1.0 + lam_lo.abs().max(lam_hi.abs())) {
            break;
        }
    }

    // Polish: on the support found by the bisection, the projection solves
    // an equality-constrained least squares with two constraints; its
    // closed form restores sum x = 1 and mu . x = r to machine precision.
    if let Some(polished) = polish_on_support(y, mu, r, &best) {
        best = polished;
    }
    for v in best.iter_mut() {
        if *v > -CLAMP_EPS && *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(best)
}

/// Projection when the optimal support is forced to {i : keep(mu_i)}: the
/// remaining coordinates form a plain sub-simplex.
fn project_on_support<F: Fn(f64) -> bool>(y: &[f64], mu: &[f64], keep: F) -> Result<Vec<f64>> {
    let idx: Vec<usize> = (0..y.len()).filter(|&i| keep(mu[i])).collect();
    let sub: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let proj = project_simplex(&sub)?;
    let mut x = vec![0.0; y.len()];
    for (pos, &i) in idx.iter().enumerate() {
        x[i] = proj[pos];
    }
    Ok(x)
}

/// Solve min ||x - y||^2 subject to sum_S x = 1 and mu_S . x = r on the
/// support S = {i : base_i > 0}, zero elsewhere. Returns None when the
/// solve is degenerate or leaves the nonnegative orthant, in which case the
/// caller keeps the bisection iterate.
fn polish_on_support(y: &[f64], mu: &[f64], r: f64, base: &[f64]) -> Option<Vec<f64>> {
    let support: Vec<usize> = (0..base.len()).filter(|&i| base[i] > 0.0).collect();
    let m = support.len();
    if m == 0 {
        return None;
    }
    if m == 1 {
        let i = support[0];
        if (mu[i] - r).abs() > 1e-9 * (1.0 + r.abs()) {
            return None;
        }
        let mut x = vec![0.0; y.len()];
        x[i] = 1.0;
        return Some(x);
    }
    // x_S = y_S + a 1 + b (mu_S - mean(mu_S)): centering the means makes
    // the sum constraint independent of b, so the 2x2 system decouples and
    // stays well conditioned even when the support means nearly coincide.
    let mf = m as f64;
    let (mut sm, mut sy) = (0.0, 0.0);
    for &i in &support {
        sm += mu[i];
        sy += y[i];
    }
    let mu_bar = sm / mf;
    let (mut svar, mut scov) = (0.0, 0.0);
    for &i in &support {
        let d = mu[i] - mu_bar;
        svar += d * d;
        scov += d * y[i];
    }
    if svar <= 1e-14 * (1.0 + mu_bar * mu_bar) * mf {
        return None;
    }
    let a = (1.0 - sy) / mf;
    // mu . x = sum mu_i (y_i + a + b d_i) = smy + a sm + b svar = r, and
    // smy = scov + mu_bar * sy.
    let b = (r - (scov + mu_bar * sy) - a * sm) / svar;
    let mut x = vec![0.0; y.len()];
    for &i in &support {
        let v = y[i] + a + b * (mu[i] - mu_bar);
        if v < -CLAMP_EPS {
            return None;
        }
        x[i] = v.max(0.0);
    }
    // Off-support optimality: the implied multipliers must not want any
    // zero coordinate back in.
    for i in 0..y.len() {
        if base[i] <= 0.0 && y[i] + a + b * (mu[i] - mu_bar) > 1e-10 {
            return None;
        }
    }
    // Final insurance: accept only if both equalities actually hold.
    let sum: f64 = x.iter().sum();
    let ret = linalg::dot(mu, &x);
    if (sum - 1.0).abs() > 1e-12 || (ret - r).abs() > 1e-11 * (1.0 + r.abs()) {
        return None;
    }
    Some(x)
}

/// The universal-decomposition subproblem in closed form: the iterate is
/// the projection of grad_val / eta onto the feasible set.
pub fn solve_quadratic_subproblem(
    grad_val: &[f64],
    eta: f64,
    set: &FeasibleSet,
) -> Result<Vec<f64>> {
    if !(eta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "quadratic subproblem needs eta > 0, got {eta}"
        )));
    }
    let scaled: Vec<f64> = grad_val.iter().map(|&g| g / eta).collect();
    set.project(&scaled)
}

/// Detailed outcome of the projected-gradient subsolve.
#[derive(Debug, Clone)]
pub(crate) struct SubsolveInfo {
    pub x: Vec<f64>,
    /// Projected-gradient residual ||x - P(x - s grad)|| / s at the final
    /// iterate, with s clamped to [1e-8, 1].
    pub residual: f64,
}

/// Minimize phi(x) = G(x) - linear . x over the feasible set by projected
/// gradient with a Barzilai-Borwein initial step and projection-arc
/// backtracking. Terminates on the projected-gradient residual or
/// max_iter; the returned point is always feasible.
pub fn minimize_convex_over_set(
    g: &ConvexComponent,
    linear: &[f64],
    set: &FeasibleSet,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    minimize_convex_detailed(g, linear, set, x0, tol, max_iter).map(|info| info.x)
}

pub(crate) fn minimize_convex_detailed(
    g: &ConvexComponent,
    linear: &[f64],
    set: &FeasibleSet,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<SubsolveInfo> {
    let n = set.dim();
    if linear.len() != n || x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "subproblem over {n} variables got linear of dim {} and start of dim {}",
            linear.len(),
            x0.len()
        )));
    }
    if !set.contains(x0, 1e-9) {
        return Err(Error::Infeasible(
            "subproblem start is not feasible".into(),
        ));
    }
    // Snap the start exactly onto the set before iterating.
    let mut x = set.project(x0)?;
    let mut grad = vec![0.0; n];
    let mut fx = eval_phi(g, linear, &x, &mut grad)?;

    let mut step = 1.0_f64;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut residual = f64::INFINITY;

    for _ in 0..max_iter {
        if let Some((px, pg)) = &prev {
            let dx = linalg::sub(&x, px);
            let dg = linalg::sub(&grad, pg);
            let num = linalg::dot(&dx, &dx);
            let den = linalg::dot(&dx, &dg);
            if den > 0.0 && num > 0.0 {
                step = (num / den).clamp(1e-8, 1e8);
            }
        }

        let s_term = step.clamp(1e-8, 1.0);
        let probe = set.project(&linalg::add_scaled(&x, -s_term, &grad))?;
        residual = linalg::dist(&x, &probe) / s_term;
        if residual <= tol {
            break;
        }

        // Projection-arc backtracking with the standard sufficient-decrease
        // condition phi(cand) <= phi(x) + c grad . (cand - x).
        let mut alpha = step;
        let mut moved = false;
        for _ in 0..60 {
            let cand = set.project(&linalg::add_scaled(&x, -alpha, &grad))?;
            let diff = linalg::sub(&cand, &x);
            let decrease = linalg::dot(&grad, &diff);
            if decrease >= 0.0 {
                // The arc made no progress at this step size.
                if linalg::norm(&diff) == 0.0 {
                    break;
                }
                alpha *= 0.5;
                continue;
            }
            let mut cand_grad = vec![0.0; n];
            let f_cand = eval_phi(g, linear, &cand, &mut cand_grad)?;
            if f_cand <= fx + 1e-4 * decrease {
                prev = Some((std::mem::replace(&mut x, cand), std::mem::replace(&mut grad, cand_grad)));
                fx = f_cand;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            // No acceptable step: treat the current point as stationary to
            // within the arithmetic, recording the residual just computed.
            break;
        }
    }

    Ok(SubsolveInfo { x, residual })
}

fn eval_phi(
    g: &ConvexComponent,
    linear: &[f64],
    x: &[f64],
    grad: &mut [f64],
) -> Result<f64> {
    let val = g.eval_with_grad(x, grad)?;
    let mut out = val;
    for (gi, (&li, &xi)) in grad.iter_mut().zip(linear.iter().zip(x)) {
        out -= li * xi;
        *gi -= li;
    }
    if !out.is_finite() {
        return Err(Error::Numerical(
            "subproblem objective became non-finite".into(),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcsos::Domain;
    use crate::poly::SparsePolynomial;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            assert!(
                (x - y).abs() <= tol,
                "component {i}: {x} vs {y} (tol {tol})"
            );
        }
    }

    #[test]
    fn simplex_projection_keeps_feasible_points() {
        let x = project_simplex(&[0.5, 0.5]).unwrap();
        assert_close(&x, &[0.5, 0.5], 1e-15);
        let y = project_simplex(&[0.3, 0.3, 0.3]).unwrap();
        assert_close(&y, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 1e-15);
    }

    #[test]
    fn simplex_projection_clips_dominant_coordinate() {
        let x = project_simplex(&[2.0, 0.0]).unwrap();
        assert_close(&x, &[1.0, 0.0], 1e-15);
    }

    #[test]
    fn simplex_projection_rejects_empty_and_nan() {
        assert!(project_simplex(&[]).is_err());
        assert!(project_simplex(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn simplex_projection_feasibility_and_idempotence() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(1..8);
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let x = project_simplex(&y).unwrap();
            let sum: f64 = x.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-14, "sum {sum}");
            assert!(x.iter().all(|&v| v >= 0.0), "negative coordinate in {x:?}");
            let again = project_simplex(&x).unwrap();
            assert_close(&again, &x, 1e-12);
        }
    }

    #[test]
    fn simplex_projection_is_nonexpansive() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        for _ in 0..50 {
            let n = rng.gen_range(1..8);
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let pa = project_simplex(&a).unwrap();
            let pb = project_simplex(&b).unwrap();
            assert!(
                linalg::dist(&pa, &pb) <= linalg::dist(&a, &b) + 1e-12,
                "projection expanded the pair {a:?}, {b:?}"
            );
        }
    }

    #[test]
    fn return_projection_keeps_feasible_point() {
        let x = project_simplex_with_return(&[0.5, 0.5], &[0.0, 1.0], 0.5).unwrap();
        assert_close(&x, &[0.5, 0.5], 1e-12);
    }

    #[test]
    fn return_projection_extreme_return_forces_vertex() {
        let x = project_simplex_with_return(&[0.7, 0.3], &[0.0, 1.0], 1.0).unwrap();
        assert_close(&x, &[0.0, 1.0], 1e-12);
    }

    #[test]
    fn return_projection_rejects_unattainable_return() {
        let err = project_simplex_with_return(&[0.5, 0.5], &[0.0, 0.2], 0.3);
        assert!(matches!(err, Err(Error::Infeasible(_))));
    }

    #[test]
    fn return_projection_equal_means_degenerates_to_simplex() {
        let x = project_simplex_with_return(&[2.0, 0.0], &[0.1, 0.1], 0.1).unwrap();
        assert_close(&x, &[1.0, 0.0], 1e-12);
    }

    #[test]
    fn return_projection_satisfies_both_constraints() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..100 {
            let n = rng.gen_range(2..7);
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mu: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.1..0.4)).collect();
            let lo = mu.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let r = lo + (hi - lo) * rng.gen_range(0.0..1.0);
            let x = project_simplex_with_return(&y, &mu, r).unwrap();
            let sum: f64 = x.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-10, "sum {sum}");
            assert!(x.iter().all(|&v| v >= 0.0));
            let ret = linalg::dot(&mu, &x);
            assert!(
                (ret - r).abs() <= 1e-10,
                "attained return {ret} vs target {r}"
            );
        }
    }

    #[test]
    fn return_projection_is_idempotent() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        for _ in 0..30 {
            let n = rng.gen_range(2..6);
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mu: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.1..0.4)).collect();
            let lo = mu.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let r = lo + (hi - lo) * rng.gen_range(0.1..0.9);
            let x = project_simplex_with_return(&y, &mu, r).unwrap();
            let again = project_simplex_with_return(&x, &mu, r).unwrap();
            assert!(linalg::dist(&again, &x) <= 1e-8, "not idempotent: {x:?}");
        }
    }

    #[test]
    fn feasible_set_constructors_validate() {
        assert!(FeasibleSet::simplex(0).is_err());
        assert!(FeasibleSet::simplex_with_return(vec![0.1, 0.3], 0.5).is_err());
        assert!(FeasibleSet::simplex_with_return(vec![0.1, 0.3], 0.2).is_ok());
    }

    #[test]
    fn simplex_vertices_are_unit_vectors() {
        let set = FeasibleSet::simplex(3).unwrap();
        let v = set.vertices();
        assert_eq!(v.len(), 3);
        assert_close(&v[0], &[1.0, 0.0, 0.0], 0.0);
        assert_close(&v[2], &[0.0, 0.0, 1.0], 0.0);
    }

    #[test]
    fn return_vertices_lie_on_both_constraints() {
        let mu = vec![0.0, 0.1, 0.4];
        let set = FeasibleSet::simplex_with_return(mu.clone(), 0.2).unwrap();
        let verts = set.vertices();
        assert!(!verts.is_empty());
        for v in &verts {
            assert!(set.contains(v, 1e-12), "vertex {v:?} infeasible");
        }
        // Crossings: edge (0,1) has returns in [0, 0.1] (misses 0.2), edges
        // (0,2) and (1,2) both cross it.
        assert_eq!(verts.len(), 2);
    }

    #[test]
    fn quadratic_subproblem_matches_projection_semantics() {
        let set = FeasibleSet::simplex(4).unwrap();
        let uniform = solve_quadratic_subproblem(&[0.0; 4], 3.0, &set).unwrap();
        assert_close(&uniform, &[0.25; 4], 1e-15);

        let grad = [1.0, -0.5, 0.25, 2.0];
        let a = solve_quadratic_subproblem(&grad, 2.0, &set).unwrap();
        let doubled: Vec<f64> = grad.iter().map(|g| 2.0 * g).collect();
        let b = solve_quadratic_subproblem(&doubled, 4.0, &set).unwrap();
        assert_close(&a, &b, 1e-15);

        assert!(solve_quadratic_subproblem(&grad, 0.0, &set).is_err());
    }

    fn half_norm_squared(n: usize) -> ConvexComponent {
        let mut p = SparsePolynomial::zero(n);
        for i in 0..n {
            p = p
                .add(&SparsePolynomial::monomial(n, &[(i, 2)], 0.5).unwrap())
                .unwrap();
        }
        ConvexComponent::new(p, Domain::AllSpace)
    }

    #[test]
    fn pgd_finds_uniform_point_for_symmetric_quadratic() {
        let set = FeasibleSet::simplex(5).unwrap();
        let g = half_norm_squared(5);
        let x0 = [1.0, 0.0, 0.0, 0.0, 0.0];
        let x = minimize_convex_over_set(&g, &[0.0; 5], &set, &x0, 1e-10, 5000).unwrap();
        assert_close(&x, &[0.2; 5], 1e-7);
    }

    #[test]
    fn pgd_matches_closed_form_projection() {
        // min (eta/2)||x||^2 - v . x over the simplex equals project(v/eta).
        let set = FeasibleSet::simplex(4).unwrap();
        let eta = 2.5;
        let mut p = SparsePolynomial::zero(4);
        for i in 0..4 {
            p = p
                .add(&SparsePolynomial::monomial(4, &[(i, 2)], 0.5 * eta).unwrap())
                .unwrap();
        }
        let g = ConvexComponent::new(p, Domain::AllSpace);
        let v = [0.9, -0.2, 0.4, 0.1];
        let want = solve_quadratic_subproblem(&v, eta, &set).unwrap();
        let x0 = [0.25; 4];
        let got = minimize_convex_over_set(&g, &v, &set, &x0, 1e-10, 5000).unwrap();
        assert_close(&got, &want, 1e-6);
    }

    #[test]
    fn pgd_rejects_infeasible_start() {
        let set = FeasibleSet::simplex(3).unwrap();
        let g = half_norm_squared(3);
        let err = minimize_convex_over_set(&g, &[0.0; 3], &set, &[0.9, 0.9, 0.9], 1e-8, 100);
        assert!(matches!(err, Err(Error::Infeasible(_))));
    }

    #[test]
    fn pgd_first_order_certificate_at_vertices() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let set = FeasibleSet::simplex(4).unwrap();
        // Random strongly convex quadratic: sum q_i (x_i - b_i)^2.
        for _ in 0..10 {
            let q: Vec<f64> = (0..4).map(|_| rng.gen_range(0.5..3.0)).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..1.0)).collect();
            let mut p = SparsePolynomial::zero(4);
            for i in 0..4 {
                p = p
                    .add(&SparsePolynomial::monomial(4, &[(i, 2)], q[i]).unwrap())
                    .unwrap()
                    .add(&SparsePolynomial::monomial(4, &[(i, 1)], -2.0 * q[i] * b[i]).unwrap())
                    .unwrap();
            }
            let g = ConvexComponent::new(p, Domain::AllSpace);
            let tol = 1e-9;
            let x =
                minimize_convex_over_set(&g, &[0.0; 4], &set, &[0.25; 4], tol, 5000).unwrap();
            let grad = g.grad(&x).unwrap();
            for z in set.vertices() {
                let slack = linalg::dot(&grad, &linalg::sub(&z, &x));
                assert!(
                    slack >= -10.0 * tol.max(1e-8),
                    "vertex violates optimality by {slack}"
                );
            }
        }
    }
}
