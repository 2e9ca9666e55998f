//! Outer solvers for the MVSK model: DCA and boosted DCA on the structured
//! decomposition, and their universal-decomposition counterparts UDCA and
//! UBDCA, plus the Armijo line search, stopping logic, the final
//! stationarity refinement, and KKT residual reporting shared by all four.

use crate::dcsos::{DcPair, Domain, UniversalPair};
use crate::linalg;
use crate::subsolvers::{
    minimize_convex_detailed, solve_quadratic_subproblem, FeasibleSet,
};
use crate::{Error, Result};

/// Feasibility tolerance asserted on every iterate.
pub const FEAS_TOL: f64 = 1e-12;

/// Which stopping test terminates the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopMode {
    /// Stop on the relative objective change alone.
    DfOnly,
    /// Require both the objective change and the relative step to be small.
    DfAndDx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIter,
    SubproblemFailure,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "CONVERGED",
            Status::MaxIter => "MAX_ITER",
            Status::SubproblemFailure => "SUBPROBLEM_FAILURE",
        }
    }
}

/// The four outer algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Dca,
    Bdca,
    Udca,
    Ubdca,
}

impl Algo {
    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Dca => "dca",
            Algo::Bdca => "bdca",
            Algo::Udca => "udca",
            Algo::Ubdca => "ubdca",
        }
    }
}

impl std::str::FromStr for Algo {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dca" => Ok(Algo::Dca),
            "bdca" => Ok(Algo::Bdca),
            "udca" => Ok(Algo::Udca),
            "ubdca" => Ok(Algo::Ubdca),
            other => Err(Error::InvalidInput(format!(
                "unknown algorithm '{other}'; expected dca, bdca, udca, or ubdca"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Relative objective-change tolerance.
    pub eps1: f64,
    /// Relative step tolerance (used in DfAndDx mode).
    pub eps2: f64,
    /// Line-search reduction factor, in (0, 1).
    pub beta: f64,
    /// Armijo sufficient-decrease parameter, in (0, 1).
    pub sigma: f64,
    /// Line search gives up once alpha * ||d|| drops below this floor.
    pub eps_ls: f64,
    pub max_outer_iter: usize,
    /// Projected-gradient residual tolerance for the inner subproblem.
    pub sub_tol: f64,
    pub sub_max_iter: usize,
    /// A coordinate counts as active when it is at most this.
    pub active_tol: f64,
    pub stop_mode: StopMode,
    /// Store each iterate in the trace (used by property checks).
    pub record_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps1: 1e-6,
            eps2: 1e-4,
            beta: 0.5,
            sigma: 1e-3,
            eps_ls: 1e-8,
            max_outer_iter: 1000,
            sub_tol: 1e-8,
            sub_max_iter: 5000,
            active_tol: 1e-8,
            stop_mode: StopMode::DfOnly,
            record_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidInput(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::InvalidInput(format!(
                "sigma must lie in (0, 1), got {}",
                self.sigma
            )));
        }
        for (name, v) in [
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("eps_ls", self.eps_ls),
            ("sub_tol", self.sub_tol),
            ("active_tol", self.active_tol),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_outer_iter == 0 || self.sub_max_iter == 0 {
            return Err(Error::InvalidInput(
                "iteration limits must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One outer iteration of any solver. Fields mirror the trace columns;
/// `f_pre_ls`, `alpha`, and `d_norm2` are stored exactly as evaluated so
/// the Armijo inequality can be re-checked bit-for-bit.
#[derive(Debug, Clone)]
pub struct IterRecord {
    pub k: usize,
    /// Objective after the full step (including any line search).
    pub f: f64,
    pub delta_f: f64,
    pub delta_x: f64,
    /// Accepted line-search step; 0 when the search did not fire.
    pub alpha: f64,
    pub ls_trials: usize,
    /// Inner product of the objective gradient at the subproblem iterate
    /// with the DC direction d.
    pub descent_ip: f64,
    /// Squared norm of d as evaluated by the solver.
    pub d_norm2: f64,
    /// Objective at the subproblem iterate, before the line search.
    pub f_pre_ls: f64,
    /// Projected-gradient residual reported by the subproblem (0 for the
    /// closed-form universal subproblem).
    pub sub_residual: f64,
    /// The iterate after this iteration, when recording is enabled.
    pub x: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Final point: the last outer iterate after the face-restricted
    /// Newton refinement, which is accepted only when it is feasible and
    /// does not increase the objective.
    pub x_star: Vec<f64>,
    pub f_star: f64,
    /// Outer iterations of the DC loop; the refinement is not counted.
    pub iterations: usize,
    pub status: Status,
    /// Stationarity gap at x_star: worst linearized improvement over the
    /// feasible set's vertices.
    pub kkt_residual: f64,
    /// Raw outer iterations; the last row's f can sit slightly above
    /// f_star because the refinement runs after the loop.
    pub trace: Vec<IterRecord>,
}

/// Indices of nonnegativity constraints active at x.
pub fn active_set(x: &[f64], tol: f64) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter_map(|(i, &v)| if v <= tol { Some(i) } else { None })
        .collect()
}

fn active_subset(inner: &[f64], outer: &[f64], tol: f64) -> bool {
    inner
        .iter()
        .zip(outer)
        .all(|(&yi, &xi)| yi > tol || xi <= tol)
}

/// First-order stationarity residual over the polytope:
/// max(0, max over vertices z of grad . (x - z)). Zero iff x minimizes the
/// local linear model over the feasible set.
pub fn kkt_residual(grad: &[f64], set: &FeasibleSet, x: &[f64]) -> Result<f64> {
    if grad.len() != set.dim() || x.len() != set.dim() {
        return Err(Error::DimensionMismatch(format!(
            "gradient of dim {} and point of dim {} for a set of dim {}",
            grad.len(),
            x.len(),
            set.dim()
        )));
    }
    let gx = linalg::dot(grad, x);
    let mut worst = 0.0_f64;
    for z in set.vertices() {
        worst = worst.max(gx - linalg::dot(grad, &z));
    }
    Ok(worst)
}

/// Outcome of one Armijo search, with the quantities the acceptance
/// inequality was evaluated from.
#[derive(Debug, Clone)]
pub(crate) struct ArmijoOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    /// 0 when no step was accepted.
    pub alpha: f64,
    pub trials: usize,
}

/// Backtracking line search from `x` along `d`: accepts the first
/// alpha in {alpha0, beta*alpha0, ...} with alpha > eps_ls/||d|| whose
/// feasible candidate satisfies f(x) - f(cand) >= sigma alpha^2 ||d||^2;
/// falls back to `x` unchanged.
pub fn armijo_search<F: FnMut(&[f64]) -> Result<f64>>(
    mut f: F,
    x: &[f64],
    d: &[f64],
    alpha0: f64,
    cfg: &SolverConfig,
    set: &FeasibleSet,
) -> Result<Vec<f64>> {
    let fx = f(x)?;
    let d_norm2 = linalg::dot(d, d);
    Ok(armijo_detailed(&mut f, x, fx, d, d_norm2, alpha0, cfg, set)?.x)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn armijo_detailed<F: FnMut(&[f64]) -> Result<f64>>(
    f: &mut F,
    x: &[f64],
    fx: f64,
    d: &[f64],
    d_norm2: f64,
    alpha0: f64,
    cfg: &SolverConfig,
    set: &FeasibleSet,
) -> Result<ArmijoOutcome> {
    let d_norm = d_norm2.sqrt();
    let mut alpha = alpha0;
    let mut trials = 0;
    if d_norm > 0.0 {
        while alpha > cfg.eps_ls / d_norm {
            trials += 1;
            let mut cand = linalg::add_scaled(x, alpha, d);
            if set.contains(&cand, FEAS_TOL) {
                // Snap the round-off-sized negatives allowed by the check.
                for v in cand.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                let f_cand = f(&cand)?;
                if fx - f_cand - cfg.sigma * alpha * alpha * d_norm2 >= 0.0 {
                    return Ok(ArmijoOutcome {
                        x: cand,
                        f: f_cand,
                        alpha,
                        trials,
                    });
                }
            }
            alpha *= cfg.beta;
        }
    }
    Ok(ArmijoOutcome {
        x: x.to_vec(),
        f: fx,
        alpha: 0.0,
        trials,
    })
}

/// The two inner models share one outer loop; this trait is the seam
/// between them. The structured route differentiates the compiled target
/// polynomial; the universal route contracts the moment tensors directly.
trait DcModel {
    fn nvars(&self) -> usize;
    fn eval_f(&self, x: &[f64]) -> Result<f64>;
    fn grad_f(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// Returns the next iterate and the subproblem residual achieved.
    fn solve_subproblem(
        &self,
        x: &[f64],
        set: &FeasibleSet,
        cfg: &SolverConfig,
        tol: f64,
    ) -> Result<(Vec<f64>, f64)>;
    /// Exact subproblems cannot be refined further.
    fn refinable(&self) -> bool;

    /// Symmetric Hessian of f at x by central differences of the exact
    /// gradient. Roughly 1e-6 relative accuracy, which only affects the
    /// convergence rate of the final Newton refinement, not its fixed
    /// point: that is determined by the exact gradient.
    fn hess_f(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = x.len();
        let mut h = vec![vec![0.0; n]; n];
        let mut xp = x.to_vec();
        for i in 0..n {
            let step = 1e-5 * (1.0 + x[i].abs());
            xp[i] = x[i] + step;
            let gp = self.grad_f(&xp)?;
            xp[i] = x[i] - step;
            let gm = self.grad_f(&xp)?;
            xp[i] = x[i];
            for j in 0..n {
                h[i][j] = (gp[j] - gm[j]) / (2.0 * step);
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (h[i][j] + h[j][i]);
                h[i][j] = v;
                h[j][i] = v;
            }
        }
        Ok(h)
    }
}

struct StructuredModel<'a> {
    pair: &'a DcPair,
}

impl DcModel for StructuredModel<'_> {
    fn nvars(&self) -> usize {
        self.pair.nvars()
    }

    fn eval_f(&self, x: &[f64]) -> Result<f64> {
        self.pair.eval_target(x)
    }

    fn grad_f(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.pair.target_grad(x)
    }

    fn solve_subproblem(
        &self,
        x: &[f64],
        set: &FeasibleSet,
        cfg: &SolverConfig,
        tol: f64,
    ) -> Result<(Vec<f64>, f64)> {
        let linear = self.pair.h().grad(x)?;
        let info = minimize_convex_detailed(
            self.pair.g(),
            &linear,
            set,
            x,
            tol,
            cfg.sub_max_iter,
        )?;
        Ok((info.x, info.residual))
    }

    fn refinable(&self) -> bool {
        true
    }
}

struct UniversalModel<'a> {
    up: &'a UniversalPair,
}

impl DcModel for UniversalModel<'_> {
    fn nvars(&self) -> usize {
        self.up.nvars()
    }

    fn eval_f(&self, x: &[f64]) -> Result<f64> {
        self.up.eval_f(x)
    }

    fn grad_f(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.up.grad_f(x)
    }

    fn solve_subproblem(
        &self,
        x: &[f64],
        set: &FeasibleSet,
        _cfg: &SolverConfig,
        _tol: f64,
    ) -> Result<(Vec<f64>, f64)> {
        let v = self.up.grad_h_bar(x)?;
        let y = solve_quadratic_subproblem(&v, self.up.eta(), set)?;
        Ok((y, 0.0))
    }

    fn refinable(&self) -> bool {
        false
    }
}

/// DCA on the structured decomposition: each outer iteration minimizes
/// G(x) - grad H(x_k) . x over the feasible set.
pub fn dca_solve(
    pair: &DcPair,
    set: &FeasibleSet,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    check_pair_domain(pair, set)?;
    drive(&StructuredModel { pair }, set, x0, cfg, false)
}

/// Boosted DCA: the DCA step followed, when the guards allow, by an Armijo
/// line search along d = x_{k+1} - x_k starting from alpha = sqrt(2)/||d||.
pub fn bdca_solve(
    pair: &DcPair,
    set: &FeasibleSet,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    check_pair_domain(pair, set)?;
    drive(&StructuredModel { pair }, set, x0, cfg, true)
}

/// DCA on the universal decomposition: each iterate is the closed-form
/// projection of grad H_bar(x_k) / eta onto the feasible set.
pub fn udca_solve(
    up: &UniversalPair,
    set: &FeasibleSet,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    drive(&UniversalModel { up }, set, x0, cfg, false)
}

/// Boosted UDCA: the projection step plus the BDCA line search.
pub fn ubdca_solve(
    up: &UniversalPair,
    set: &FeasibleSet,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    drive(&UniversalModel { up }, set, x0, cfg, true)
}

fn check_pair_domain(pair: &DcPair, _set: &FeasibleSet) -> Result<()> {
    // Both feasible sets live inside the simplex, hence inside the
    // nonnegative orthant, so every pair domain contains them. The check
    // stays for future set kinds.
    match pair.domain() {
        Domain::AllSpace | Domain::NonnegOrthant => Ok(()),
    }
}

/// The final refinement stops once the stationarity gap is this small.
const POLISH_GAP_TARGET: f64 = 1e-9;
const POLISH_MAX_STEPS: usize = 60;

/// Least-squares multiplier fit on the free coordinates. Writes the
/// in-face gradient component into `tangential` (zero on fixed
/// coordinates) and returns, for each fixed coordinate, how strongly the
/// first-order conditions want it released; only positive entries matter.
fn face_state(
    g: &[f64],
    set: &FeasibleSet,
    free: &[bool],
) -> (Vec<f64>, Vec<f64>) {
    let n = g.len();
    let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
    let m = idx.len() as f64;
    let (lambda, b) = match set {
        FeasibleSet::Simplex { .. } => {
            (idx.iter().map(|&i| g[i]).sum::<f64>() / m, 0.0)
        }
        FeasibleSet::SimplexWithReturn { mu, .. } => {
            // Fit g ~ lambda + b*mu on the free coordinates, centered so
            // the normal equations stay well conditioned.
            let mu_bar = idx.iter().map(|&i| mu[i]).sum::<f64>() / m;
            let g_bar = idx.iter().map(|&i| g[i]).sum::<f64>() / m;
            let mut svar = 0.0;
            let mut scov = 0.0;
            for &i in &idx {
                let dm = mu[i] - mu_bar;
                svar += dm * dm;
                scov += dm * (g[i] - g_bar);
            }
            let b = if svar > 1e-30 { scov / svar } else { 0.0 };
            (g_bar - b * mu_bar, b)
        }
    };
    let mu_at = |i: usize| match set {
        FeasibleSet::Simplex { .. } => 0.0,
        FeasibleSet::SimplexWithReturn { mu, .. } => mu[i],
    };
    let mut tangential = vec![0.0; n];
    let mut violation = vec![0.0; n];
    for i in 0..n {
        let fitted = lambda + b * mu_at(i);
        if free[i] {
            tangential[i] = g[i] - fitted;
        } else {
            violation[i] = fitted - g[i];
        }
    }
    (tangential, violation)
}

/// Refine the final iterate with an active-set Newton method restricted
/// to the face spanned by its support, releasing fixed coordinates whose
/// multipliers come out negative. The outer stopping rule is a relative
/// objective change, which can leave a measurable first-order gap; a few
/// Newton steps near the solution close it at negligible cost. Every step
/// is feasible and decreases f, and the refinement is discarded unless it
/// ends feasible and no worse than the input, so the reported result can
/// only improve.
fn polish_to_stationarity(
    model: &dyn DcModel,
    set: &FeasibleSet,
    x0: &[f64],
    f0: f64,
) -> Result<(Vec<f64>, f64)> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut f = f0;
    'outer: for _ in 0..POLISH_MAX_STEPS {
        let g = model.grad_f(&x)?;
        if kkt_residual(&g, set, &x)? <= POLISH_GAP_TARGET {
            break;
        }
        let mut free: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
        let (tangential, violation) = face_state(&g, set, &free);
        let t_norm = linalg::norm(&tangential);
        let (best_j, best_v) = violation
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
        if best_v > t_norm {
            // The face is (nearly) stationary but a fixed coordinate has a
            // negative multiplier: open it and let the step pull it up.
            free[best_j] = true;
        }

        let hess = model.hess_f(&x)?;
        let k = match set {
            FeasibleSet::Simplex { .. } => 1,
            FeasibleSet::SimplexWithReturn { .. } => 2,
        };

        // Inner loop: solve the equality-constrained Newton system on the
        // free coordinates, dropping any zero coordinate the step would
        // push negative.
        let p = 'newton: loop {
            let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
            let m = idx.len();
            if m == 0 {
                break 'outer;
            }
            let dim = m + k;
            let mut kkt = vec![vec![0.0; dim]; dim];
            let mut rhs = vec![0.0; dim];
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    kkt[a][b] = hess[i][j];
                }
                rhs[a] = -g[i];
                kkt[a][m] = 1.0;
                kkt[m][a] = 1.0;
                if let FeasibleSet::SimplexWithReturn { mu, .. } = set {
                    kkt[a][m + 1] = mu[i];
                    kkt[m + 1][a] = mu[i];
                }
            }
            let h_scale = 1.0
                + idx
                    .iter()
                    .map(|&i| hess[i][i].abs())
                    .fold(0.0_f64, f64::max);
            // The Hessian is indefinite in general; escalate a ridge term
            // until the system solves and the step descends.
            let mut sol = None;
            let mut tau = 0.0;
            for _ in 0..6 {
                let mut sys = kkt.clone();
                for a in 0..m {
                    sys[a][a] += tau;
                }
                if let Some(s) = linalg::solve_linear(&sys, &rhs) {
                    let descent: f64 =
                        idx.iter().enumerate().map(|(a, &i)| g[i] * s[a]).sum();
                    if descent < 0.0 {
                        sol = Some(s);
                        break;
                    }
                }
                tau = if tau == 0.0 { 1e-8 * h_scale } else { tau * 100.0 };
            }
            let mut p = vec![0.0; n];
            match sol {
                Some(s) => {
                    for (a, &i) in idx.iter().enumerate() {
                        p[i] = s[a];
                    }
                }
                None => {
                    // Steepest feasible descent inside the face; the
                    // least-squares fit makes it orthogonal to the
                    // constraint normals.
                    if t_norm == 0.0 {
                        break 'outer;
                    }
                    for i in 0..n {
                        if free[i] {
                            p[i] = -tangential[i];
                        }
                    }
                }
            }
            match (0..n).find(|&i| free[i] && x[i] == 0.0 && p[i] < 0.0) {
                Some(bad) => free[bad] = false,
                None => break 'newton p,
            }
        };

        let gp = linalg::dot(&g, &p);
        if !(gp < 0.0) {
            break;
        }
        // Largest step keeping every coordinate nonnegative.
        let mut alpha_max = 1.0_f64;
        for i in 0..n {
            if p[i] < 0.0 && x[i] > 0.0 {
                alpha_max = alpha_max.min(x[i] / -p[i]);
            }
        }
        let mut alpha = alpha_max;
        let mut accepted = false;
        for _ in 0..50 {
            let mut cand = linalg::add_scaled(&x, alpha, &p);
            // Blocking coordinates land at roundoff scale; snap them to
            // exactly zero so they count as fixed next round.
            for v in cand.iter_mut() {
                if *v < 1e-18 {
                    *v = 0.0;
                }
            }
            if let FeasibleSet::Simplex { .. } = set {
                let sum: f64 = cand.iter().sum();
                for v in cand.iter_mut() {
                    *v /= sum;
                }
            }
            let f_cand = model.eval_f(&cand)?;
            if f_cand.is_finite() && f_cand <= f + 1e-4 * alpha * gp {
                x = cand;
                f = f_cand;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if set.contains(&x, FEAS_TOL) && f <= f0 {
        Ok((x, f))
    } else {
        Ok((x0.to_vec(), f0))
    }
}

fn drive(
    model: &dyn DcModel,
    set: &FeasibleSet,
    x0: &[f64],
    cfg: &SolverConfig,
    boosted: bool,
) -> Result<SolveResult> {
    cfg.validate()?;
    let n = set.dim();
    if model.nvars() != n {
        return Err(Error::DimensionMismatch(format!(
            "model over {} variables with a feasible set of dim {n}",
            model.nvars()
        )));
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "start of dim {} for a set of dim {n}",
            x0.len()
        )));
    }
    if !set.contains(x0, 1e-9) {
        return Err(Error::Infeasible(
            "starting point is not feasible; project it first".into(),
        ));
    }
    let mut x = set.project(x0)?;
    let mut f_x = model.eval_f(&x)?;

    let mut trace = Vec::new();
    trace.push(IterRecord {
        k: 0,
        f: f_x,
        delta_f: f64::INFINITY,
        delta_x: f64::INFINITY,
        alpha: 0.0,
        ls_trials: 0,
        descent_ip: 0.0,
        d_norm2: 0.0,
        f_pre_ls: f_x,
        sub_residual: 0.0,
        x: cfg.record_iterates.then(|| x.clone()),
    });

    let mut status = Status::MaxIter;
    let mut iterations = 0;

    for k in 1..=cfg.max_outer_iter {
        iterations = k;

        let mut tol = cfg.sub_tol;
        let (mut y, mut sub_residual) = match model.solve_subproblem(&x, set, cfg, tol) {
            Ok(out) => out,
            Err(_) => {
                status = Status::SubproblemFailure;
                iterations = k - 1;
                break;
            }
        };
        let mut d = linalg::sub(&y, &x);
        let mut grad_y = model.grad_f(&y)?;
        let mut ip = linalg::dot(&grad_y, &d);

        // The DC descent inequality holds at exact subproblem solutions;
        // when the inexact solve leaves a measurable violation, re-solve
        // tighter from the current iterate instead of carrying it forward.
        if model.refinable() {
            let mut rounds = 0;
            while ip > 10.0 * cfg.sub_tol * linalg::dot(&d, &d).sqrt()
                && sub_residual > 1e-14
                && rounds < 3
            {
                tol *= 1e-2;
                let (y2, r2) = match model.solve_subproblem(&y, set, cfg, tol) {
                    Ok(out) => out,
                    Err(_) => break,
                };
                y = y2;
                sub_residual = r2;
                d = linalg::sub(&y, &x);
                grad_y = model.grad_f(&y)?;
                ip = linalg::dot(&grad_y, &d);
                rounds += 1;
            }
        }

        let d_norm2 = linalg::dot(&d, &d);
        let f_y = model.eval_f(&y)?;

        let (x_next, f_next, alpha, ls_trials) = if boosted && d_norm2 > 0.0 {
            let feasible = set.contains(&x, FEAS_TOL) && set.contains(&y, FEAS_TOL);
            let shrinking = active_subset(&y, &x, cfg.active_tol);
            let descending = ip < -1e-12;
            if !feasible {
                status = Status::SubproblemFailure;
                iterations = k - 1;
                break;
            }
            if shrinking && descending {
                let alpha0 = std::f64::consts::SQRT_2 / d_norm2.sqrt();
                let mut eval = |p: &[f64]| model.eval_f(p);
                let out =
                    armijo_detailed(&mut eval, &y, f_y, &d, d_norm2, alpha0, cfg, set)?;
                (out.x, out.f, out.alpha, out.trials)
            } else {
                (y, f_y, 0.0, 0)
            }
        } else {
            (y, f_y, 0.0, 0)
        };

        let delta_f = (f_next - f_x).abs() / (1.0 + f_next.abs());
        let delta_x = linalg::dist(&x_next, &x) / (1.0 + linalg::norm(&x_next));

        x = x_next;
        f_x = f_next;
        trace.push(IterRecord {
            k,
            f: f_x,
            delta_f,
            delta_x,
            alpha,
            ls_trials,
            descent_ip: ip,
            d_norm2,
            f_pre_ls: f_y,
            sub_residual,
            x: cfg.record_iterates.then(|| x.clone()),
        });

        let df_ok = delta_f <= cfg.eps1;
        let dx_ok = match cfg.stop_mode {
            StopMode::DfOnly => true,
            StopMode::DfAndDx => delta_x <= cfg.eps2,
        };
        if df_ok && dx_ok {
            status = Status::Converged;
            break;
        }
    }

    if status != Status::SubproblemFailure {
        let (px, pf) = polish_to_stationarity(model, set, &x, f_x)?;
        x = px;
        f_x = pf;
    }

    let grad = model.grad_f(&x)?;
    let kkt = kkt_residual(&grad, set, &x)?;
    Ok(SolveResult {
        x_star: x,
        f_star: f_x,
        iterations,
        status,
        kkt_residual: kkt,
        trace,
    })
}

/// Render the iteration trace as CSV. The KKT residual is only defined for
/// the final iterate, so the column is empty on all other rows.
pub fn trace_csv(result: &SolveResult) -> String {
    let mut out = String::from("k,f,delta_f,delta_x,alpha,ls_trials,descent_ip,kkt_residual_final_only\n");
    let last = result.trace.len().saturating_sub(1);
    for (pos, rec) in result.trace.iter().enumerate() {
        let kkt = if pos == last {
            format!("{:.12e}", result.kkt_residual)
        } else {
            String::new()
        };
        out.push_str(&format!(
            "{},{:.12e},{:.6e},{:.6e},{:.6e},{},{:.6e},{}\n",
            rec.k, rec.f, rec.delta_f, rec.delta_x, rec.alpha, rec.ls_trials, rec.descent_ip, kkt
        ));
    }
    out
}
