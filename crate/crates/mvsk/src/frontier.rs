//! Efficient-frontier sweeps: solve the return-constrained MVSK model over
//! a grid of target returns and collect the realized portfolio moments.

use crate::dca::{
    bdca_solve, dca_solve, ubdca_solve, udca_solve, Algo, SolverConfig, Status,
};
use crate::dcsos::{assemble_g_h, UniversalPair};
use crate::moments::{portfolio_moments, MomentTensors};
use crate::poly::Preference;
use crate::subsolvers::FeasibleSet;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Investor profiles for preference sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvestorKind {
    Neutral,
    Averse,
    Seeking,
}

impl std::str::FromStr for InvestorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "neutral" => Ok(InvestorKind::Neutral),
            "averse" => Ok(InvestorKind::Averse),
            "seeking" => Ok(InvestorKind::Seeking),
            other => Err(Error::InvalidInput(format!(
                "unknown investor kind '{other}'; expected neutral, averse, or seeking"
            ))),
        }
    }
}

/// Outcome of one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Converged,
    MaxIter,
    SubproblemFailure,
    /// The target return lies outside the attainable range.
    Infeasible,
}

impl PointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PointStatus::Converged => "CONVERGED",
            PointStatus::MaxIter => "MAX_ITER",
            PointStatus::SubproblemFailure => "SUBPROBLEM_FAILURE",
            PointStatus::Infeasible => "INFEASIBLE",
        }
    }
}

impl From<Status> for PointStatus {
    fn from(s: Status) -> Self {
        match s {
            Status::Converged => PointStatus::Converged,
            Status::MaxIter => PointStatus::MaxIter,
            Status::SubproblemFailure => PointStatus::SubproblemFailure,
        }
    }
}

/// What to sweep: the return grid and the moment weights. The mean weight
/// c1 plays no role in the constrained objective (the constraint pins the
/// mean); callers should warn when a nonzero c1 is supplied.
#[derive(Debug, Clone)]
pub struct FrontierSpec {
    r_grid: Vec<f64>,
    preference: Preference,
}

impl FrontierSpec {
    pub fn new(r_grid: Vec<f64>, preference: Preference) -> Result<Self> {
        if r_grid.is_empty() {
            return Err(Error::InvalidInput("frontier grid is empty".into()));
        }
        if r_grid.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidInput(
                "frontier grid contains non-finite returns".into(),
            ));
        }
        if r_grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput(
                "frontier grid must be sorted ascending".into(),
            ));
        }
        Ok(FrontierSpec { r_grid, preference })
    }

    pub fn r_grid(&self) -> &[f64] {
        &self.r_grid
    }

    pub fn preference(&self) -> Preference {
        self.preference
    }

    /// The weights actually optimized: c1 is dropped.
    pub fn effective_preference(&self) -> Preference {
        let [_, c2, c3, c4] = self.preference.c();
        Preference::new([0.0, c2, c3, c4]).expect("weights already validated")
    }
}

/// Target returns 0, 0.001, ..., 0.400.
pub fn default_r_grid() -> Vec<f64> {
    (0..=400).map(|i| i as f64 * 1e-3).collect()
}

/// Deterministic preference draw for an investor profile: risk-neutral
/// weights all lie in [20, 22]; risk-averse puts the even moments there and
/// the odd ones in [1, 3]; risk-seeking swaps the two boxes.
pub fn sample_preference(kind: InvestorKind, seed: u64) -> Preference {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (odd, even) = match kind {
        InvestorKind::Neutral => ((20.0, 22.0), (20.0, 22.0)),
        InvestorKind::Averse => ((1.0, 3.0), (20.0, 22.0)),
        InvestorKind::Seeking => ((20.0, 22.0), (1.0, 3.0)),
    };
    let c1 = rng.gen_range(odd.0..odd.1);
    let c2 = rng.gen_range(even.0..even.1);
    let c3 = rng.gen_range(odd.0..odd.1);
    let c4 = rng.gen_range(even.0..even.1);
    Preference::new([c1, c2, c3, c4]).expect("box bounds are positive")
}

/// One solved (or skipped) grid point. Infeasible and failed points carry
/// NaN weights and moments.
#[derive(Debug, Clone)]
pub struct FrontierPoint {
    pub r: f64,
    pub x: Vec<f64>,
    /// Realized portfolio moments [m1, m2, m3, m4] at x.
    pub m: [f64; 4],
    pub status: PointStatus,
}

impl FrontierPoint {
    fn skipped(r: f64, n: usize, status: PointStatus) -> Self {
        FrontierPoint {
            r,
            x: vec![f64::NAN; n],
            m: [f64::NAN; 4],
            status,
        }
    }
}

/// Sweep the grid, solving min c2 m2 - c3 m3 + c4 m4 over the simplex
/// intersected with {mu . x = r} at every attainable r, warm-starting each
/// solve from the previous point. The DC model is built once per sweep.
pub fn generate_frontier(
    t: &MomentTensors,
    spec: &FrontierSpec,
    cfg: &SolverConfig,
    algo: Algo,
) -> Result<Vec<FrontierPoint>> {
    let n = t.asset_count();
    let c = spec.effective_preference();
    let structured = matches!(algo, Algo::Dca | Algo::Bdca);
    let pair = structured.then(|| assemble_g_h(t, &c));
    let universal = if structured {
        None
    } else {
        Some(UniversalPair::new(t, &c)?)
    };

    let mu = t.mean_vector().to_vec();
    let lo = mu.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut prev_x: Option<Vec<f64>> = None;
    let mut out = Vec::with_capacity(spec.r_grid.len());
    for &r in &spec.r_grid {
        if r < lo || r > hi {
            out.push(FrontierPoint::skipped(r, n, PointStatus::Infeasible));
            continue;
        }
        let set = FeasibleSet::simplex_with_return(mu.clone(), r)?;
        let warm = match &prev_x {
            Some(p) => p.clone(),
            None => vec![1.0 / n as f64; n],
        };
        let x0 = set.project(&warm)?;
        let solved = match (&pair, &universal, algo) {
            (Some(p), _, Algo::Dca) => dca_solve(p, &set, &x0, cfg),
            (Some(p), _, Algo::Bdca) => bdca_solve(p, &set, &x0, cfg),
            (_, Some(u), Algo::Udca) => udca_solve(u, &set, &x0, cfg),
            (_, Some(u), Algo::Ubdca) => ubdca_solve(u, &set, &x0, cfg),
            _ => unreachable!("model built to match the algorithm"),
        };
        match solved {
            Ok(res) => {
                let m = portfolio_moments(t, &res.x_star)?;
                prev_x = Some(res.x_star.clone());
                out.push(FrontierPoint {
                    r,
                    x: res.x_star,
                    m,
                    status: res.status.into(),
                });
            }
            Err(_) => {
                out.push(FrontierPoint::skipped(r, n, PointStatus::SubproblemFailure));
            }
        }
    }
    Ok(out)
}

/// Render frontier points as CSV with 12 significant digits:
/// `r,m1,m2,m3,m4,status,x_1..x_n`.
pub fn frontier_csv(points: &[FrontierPoint], n: usize) -> String {
    let mut out = String::from("r,m1,m2,m3,m4,status");
    for i in 1..=n {
        out.push_str(&format!(",x_{i}"));
    }
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{}",
            p.r,
            p.m[0],
            p.m[1],
            p.m[2],
            p.m[3],
            p.status.as_str()
        ));
        for v in &p.x {
            out.push_str(&format!(",{v:.11e}"));
        }
        out.push('\n');
    }
    out
}
