//! Command line front end: synthetic data generation, moment estimation,
//! single solves, four-way solver benchmarks, and frontier sweeps.

use clap::{Args, Parser, Subcommand, ValueEnum};
use mvsk::dca::{
    bdca_solve, dca_solve, trace_csv, ubdca_solve, udca_solve, Algo, SolveResult,
    SolverConfig, Status, StopMode,
};
use mvsk::dcsos::{assemble_g_h, compute_eta, UniversalPair};
use mvsk::frontier::{
    default_r_grid, generate_frontier, frontier_csv, sample_preference, FrontierSpec,
    InvestorKind,
};
use mvsk::moments::{
    portfolio_moments, JitMoments, MomentSource, MomentTensors, ReturnMatrix,
};
use mvsk::poly::{build_objective, Preference, SparsePolynomial};
use mvsk::subsolvers::FeasibleSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

/// Bad inputs, unreadable files, malformed CSV.
const EXIT_INPUT: u8 = 2;
/// The optimizer itself failed.
const EXIT_SOLVER: u8 = 3;

struct Failure {
    code: u8,
    msg: String,
}

type CliResult<T> = Result<T, Failure>;

fn input_err<E: Display>(e: E) -> Failure {
    Failure {
        code: EXIT_INPUT,
        msg: e.to_string(),
    }
}

fn solver_err<E: Display>(e: E) -> Failure {
    Failure {
        code: EXIT_SOLVER,
        msg: e.to_string(),
    }
}

#[derive(Parser)]
#[command(
    name = "mvsk",
    version,
    about = "Mean-variance-skewness-kurtosis portfolio optimization with DC solvers"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic return matrix as CSV.
    Gen(GenArgs),
    /// Estimate moment tensors from a return CSV and print a JSON summary.
    Moments(MomentsArgs),
    /// Solve one MVSK instance and print the result as JSON.
    Solve(SolveArgs),
    /// Run all four solvers over a set of instances and emit a CSV table.
    Bench(BenchArgs),
    /// Sweep an efficient frontier over a grid of target returns.
    Frontier(FrontierArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Dca,
    Bdca,
    Udca,
    Ubdca,
}

impl From<AlgoArg> for Algo {
    fn from(a: AlgoArg) -> Algo {
        match a {
            AlgoArg::Dca => Algo::Dca,
            AlgoArg::Bdca => Algo::Bdca,
            AlgoArg::Udca => Algo::Udca,
            AlgoArg::Ubdca => Algo::Ubdca,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StopModeArg {
    /// Stop on the relative objective change alone.
    DfOnly,
    /// Require both the objective change and the step to be small.
    DfAndDx,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Neutral,
    Averse,
    Seeking,
}

impl From<KindArg> for InvestorKind {
    fn from(k: KindArg) -> InvestorKind {
        match k {
            KindArg::Neutral => InvestorKind::Neutral,
            KindArg::Averse => InvestorKind::Averse,
            KindArg::Seeking => InvestorKind::Seeking,
        }
    }
}

/// Solver tuning shared by solve, bench, and frontier.
#[derive(Args)]
struct SolverFlags {
    /// Relative objective-change tolerance.
    #[arg(long, default_value_t = 1e-6)]
    eps1: f64,
    /// Relative step tolerance (only used with --stop-mode df-and-dx).
    #[arg(long, default_value_t = 1e-4)]
    eps2: f64,
    /// Line-search reduction factor.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Armijo sufficient-decrease parameter.
    #[arg(long, default_value_t = 1e-3)]
    sigma: f64,
    /// Line-search floor on alpha * ||d||.
    #[arg(long = "eps-ls", default_value_t = 1e-8)]
    eps_ls: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Projected-gradient residual tolerance for the inner subproblem.
    #[arg(long, default_value_t = 1e-8)]
    sub_tol: f64,
    #[arg(long, default_value_t = 5000)]
    sub_max_iter: usize,
    /// Coordinates at or below this count as active.
    #[arg(long, default_value_t = 1e-8)]
    active_tol: f64,
    #[arg(long, value_enum, default_value_t = StopModeArg::DfOnly)]
    stop_mode: StopModeArg,
}

impl SolverFlags {
    fn to_config(&self) -> SolverConfig {
        SolverConfig {
            eps1: self.eps1,
            eps2: self.eps2,
            beta: self.beta,
            sigma: self.sigma,
            eps_ls: self.eps_ls,
            max_outer_iter: self.max_iter,
            sub_tol: self.sub_tol,
            sub_max_iter: self.sub_max_iter,
            active_tol: self.active_tol,
            stop_mode: match self.stop_mode {
                StopModeArg::DfOnly => StopMode::DfOnly,
                StopModeArg::DfAndDx => StopMode::DfAndDx,
            },
            record_iterates: false,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Number of assets.
    #[arg(long)]
    n: usize,
    /// Number of return periods.
    #[arg(long)]
    periods: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lower return bound (inclusive).
    #[arg(long, default_value_t = -0.1, allow_hyphen_values = true)]
    low: f64,
    /// Upper return bound (exclusive).
    #[arg(long, default_value_t = 0.4)]
    high: f64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MomentsArgs {
    /// Return matrix CSV (rows are periods).
    data: PathBuf,
    /// Recompute every tensor entry from raw returns on the fly and verify
    /// it is bit-identical to the materialized value.
    #[arg(long)]
    jit_moments: bool,
}

#[derive(Args)]
struct SolveArgs {
    /// Return matrix CSV (rows are periods).
    data: PathBuf,
    /// Moment weights: "c1,c2,c3,c4" or a named profile
    /// (seeking = 10,1,10,1; averse = 1,10,1,10; neutral = 10,10,10,10).
    #[arg(long, default_value = "neutral")]
    pref: String,
    #[arg(long, value_enum, default_value_t = AlgoArg::Bdca)]
    algo: AlgoArg,
    /// Seed for the random starting point.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Explicit starting point "x1,x2,..."; projected if infeasible.
    #[arg(long)]
    x0: Option<String>,
    /// Write the per-iteration trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Verify materialized moment tensors against on-the-fly recomputation
    /// before solving.
    #[arg(long)]
    jit_moments: bool,
    /// Print the objective polynomial before solving.
    #[arg(long)]
    dump_objective: bool,
    /// Print the DC components G and H, eta, and the universal H_bar.
    #[arg(long)]
    dump_dc: bool,
    /// Write the result JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct BenchArgs {
    /// Return matrix CSV paths (repeatable).
    #[arg(long)]
    data: Vec<PathBuf>,
    /// Synthetic instance sizes, e.g. "4,8,12".
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    /// Periods for synthetic instances.
    #[arg(long, default_value_t = 30)]
    periods: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct FrontierArgs {
    /// Return matrix CSV (rows are periods).
    data: PathBuf,
    /// Investor profile to sample weights for (ignored when --pref given).
    #[arg(long, value_enum, default_value_t = KindArg::Neutral)]
    kind: KindArg,
    /// Explicit weights "c1,c2,c3,c4"; overrides --kind.
    #[arg(long)]
    pref: Option<String>,
    /// Seed for preference sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    r_start: f64,
    #[arg(long, default_value_t = 0.4)]
    r_stop: f64,
    #[arg(long, default_value_t = 0.001)]
    r_step: f64,
    #[arg(long, value_enum, default_value_t = AlgoArg::Bdca)]
    algo: AlgoArg,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Moments(a) => cmd_moments(a),
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Frontier(a) => cmd_frontier(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(input_err),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_matrix(path: &Path) -> CliResult<ReturnMatrix> {
    ReturnMatrix::from_csv_path(path)
        .map_err(|e| input_err(format!("{}: {e}", path.display())))
}

fn parse_preference(s: &str) -> CliResult<Preference> {
    let named = match s.to_ascii_lowercase().as_str() {
        "seeking" => Some([10.0, 1.0, 10.0, 1.0]),
        "averse" => Some([1.0, 10.0, 1.0, 10.0]),
        "neutral" => Some([10.0, 10.0, 10.0, 10.0]),
        _ => None,
    };
    let c = match named {
        Some(c) => c,
        None => {
            let parts: Vec<&str> = s.split(',').map(str::trim).collect();
            if parts.len() != 4 {
                return Err(input_err(format!(
                    "preference '{s}' is neither a named profile nor four comma-separated weights"
                )));
            }
            let mut c = [0.0; 4];
            for (slot, part) in c.iter_mut().zip(&parts) {
                *slot = part
                    .parse::<f64>()
                    .map_err(|e| input_err(format!("weight '{part}': {e}")))?;
            }
            c
        }
    };
    Preference::new(c).map_err(input_err)
}

fn parse_vector(s: &str, n: usize, what: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(input_err(format!(
            "{what} needs {n} comma-separated values, got {}",
            parts.len()
        )));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|e| input_err(format!("{what} entry '{p}': {e}")))
        })
        .collect()
}

/// Starting point convention: each coordinate is drawn from {0, 1}, then
/// the vector is projected onto the feasible set, which favors sparse
/// starts.
fn draw_start(n: usize, seed: u64, set: &FeasibleSet) -> CliResult<Vec<f64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.gen::<bool>()))).collect();
    set.project(&raw).map_err(solver_err)
}

fn verify_jit(r: &ReturnMatrix, t: &MomentTensors) -> CliResult<()> {
    let jit = JitMoments::new(r);
    let n = t.asset_count();
    for i in 0..n {
        if t.mean(i) != jit.mean(i) {
            return Err(solver_err(format!("mean {i} differs between backends")));
        }
    }
    let mut mismatch: Option<String> = None;
    t.for_each_sorted_pair(|i, j, v| {
        if mismatch.is_none() && jit.cov(i, j) != v {
            mismatch = Some(format!("covariance ({i},{j})"));
        }
    });
    t.for_each_sorted_triple(|i, j, k, v| {
        if mismatch.is_none() && jit.coskew(i, j, k) != v {
            mismatch = Some(format!("coskewness ({i},{j},{k})"));
        }
    });
    t.for_each_sorted_quad(|i, j, k, l, v| {
        if mismatch.is_none() && jit.cokurt(i, j, k, l) != v {
            mismatch = Some(format!("cokurtosis ({i},{j},{k},{l})"));
        }
    });
    match mismatch {
        Some(entry) => Err(solver_err(format!(
            "{entry} differs between the materialized and on-the-fly backends"
        ))),
        None => Ok(()),
    }
}

fn run_algo(
    algo: Algo,
    pair: Option<&mvsk::dcsos::DcPair>,
    up: Option<&UniversalPair>,
    set: &FeasibleSet,
    x0: &[f64],
    cfg: &SolverConfig,
) -> mvsk::Result<SolveResult> {
    match algo {
        Algo::Dca => dca_solve(pair.expect("structured model built"), set, x0, cfg),
        Algo::Bdca => bdca_solve(pair.expect("structured model built"), set, x0, cfg),
        Algo::Udca => udca_solve(up.expect("universal model built"), set, x0, cfg),
        Algo::Ubdca => ubdca_solve(up.expect("universal model built"), set, x0, cfg),
    }
}

fn cmd_gen(a: GenArgs) -> CliResult<()> {
    let r = ReturnMatrix::synthetic(a.n, a.periods, a.seed, a.low, a.high)
        .map_err(input_err)?;
    emit(&a.out, &r.to_csv_string())
}

fn cmd_moments(a: MomentsArgs) -> CliResult<()> {
    let r = load_matrix(&a.data)?;
    let t = MomentTensors::estimate(&r);
    if a.jit_moments {
        verify_jit(&r, &t)?;
    }
    let n = t.asset_count();
    let uniform = vec![1.0 / n as f64; n];
    let m = portfolio_moments(&t, &uniform).map_err(solver_err)?;
    let mut doc = serde_json::json!({
        "n": n,
        "t": r.period_count(),
        "mu": t.mean_vector(),
        "cov_entries": n * (n + 1) / 2,
        "skew_entries": n * (n + 1) * (n + 2) / 6,
        "kurt_entries": n * (n + 1) * (n + 2) * (n + 3) / 24,
        "equal_weight_moments": {
            "m1": m[0], "m2": m[1], "m3": m[2], "m4": m[3],
        },
    });
    if a.jit_moments {
        doc["jit_verified"] = serde_json::json!(true);
    }
    println!("{}", serde_json::to_string_pretty(&doc).map_err(input_err)?);
    Ok(())
}

fn dump_objective(f: &SparsePolynomial) {
    println!("# objective ({} terms)", f.num_terms());
    println!("{}", f.dump());
}

fn dump_dc(t: &MomentTensors, c: &Preference, f: &SparsePolynomial) {
    let pair = assemble_g_h(t, c);
    let eta = compute_eta(t, c);
    // H_bar = (eta/2)||x||^2 - f, assembled directly so the dump also
    // works when eta is zero.
    let n = t.asset_count();
    let mut h_bar = f.scale(-1.0);
    for i in 0..n {
        let sq = SparsePolynomial::monomial(n, &[(i, 2)], 0.5 * eta)
            .expect("index in range");
        h_bar = h_bar.add(&sq).expect("same variable count");
    }
    println!("# G ({} terms)", pair.g().value().num_terms());
    println!("{}", pair.g().value().dump());
    println!("# H ({} terms)", pair.h().value().num_terms());
    println!("{}", pair.h().value().dump());
    println!("# eta");
    println!("{eta}");
    println!("# H_bar ({} terms)", h_bar.num_terms());
    println!("{}", h_bar.dump());
}

fn cmd_solve(a: SolveArgs) -> CliResult<()> {
    let r = load_matrix(&a.data)?;
    let t = MomentTensors::estimate(&r);
    if a.jit_moments {
        verify_jit(&r, &t)?;
    }
    let c = parse_preference(&a.pref)?;
    let n = t.asset_count();
    let set = FeasibleSet::simplex(n).map_err(input_err)?;
    let cfg = a.solver.to_config();
    cfg.validate().map_err(input_err)?;

    let x0 = match &a.x0 {
        Some(s) => {
            let given = parse_vector(s, n, "--x0")?;
            if given.iter().any(|v| !v.is_finite()) {
                return Err(input_err("--x0 contains non-finite values"));
            }
            if !set.contains(&given, 1e-9) {
                eprintln!("warning: --x0 is not feasible; projecting it onto the simplex");
            }
            set.project(&given).map_err(input_err)?
        }
        None => draw_start(n, a.seed, &set)?,
    };

    let f = build_objective(&t, &c);
    if a.dump_objective {
        dump_objective(&f);
    }
    if a.dump_dc {
        dump_dc(&t, &c, &f);
    }

    let algo: Algo = a.algo.into();
    let structured = matches!(algo, Algo::Dca | Algo::Bdca);
    let pair = structured.then(|| assemble_g_h(&t, &c));
    let up = if structured {
        None
    } else {
        Some(UniversalPair::new(&t, &c).map_err(solver_err)?)
    };

    let started = Instant::now();
    let res = run_algo(algo, pair.as_ref(), up.as_ref(), &set, &x0, &cfg)
        .map_err(solver_err)?;
    let time_ms = started.elapsed().as_secs_f64() * 1e3;

    if let Some(path) = &a.trace {
        std::fs::write(path, trace_csv(&res)).map_err(input_err)?;
    }

    let doc = serde_json::json!({
        "f_star": res.f_star,
        "x_star": res.x_star,
        "iterations": res.iterations,
        "time_ms": time_ms,
        "kkt_residual": res.kkt_residual,
        "status": res.status.as_str(),
    });
    let text = format!(
        "{}\n",
        serde_json::to_string_pretty(&doc).map_err(input_err)?
    );
    emit(&a.out, &text)?;
    if res.status == Status::SubproblemFailure {
        return Err(solver_err("solver reported SUBPROBLEM_FAILURE"));
    }
    Ok(())
}

/// Benchmark preferences, in the order they appear in each row group.
const BENCH_PREFS: [(&str, [f64; 4]); 3] = [
    ("seeking", [10.0, 1.0, 10.0, 1.0]),
    ("averse", [1.0, 10.0, 1.0, 10.0]),
    ("neutral", [10.0, 10.0, 10.0, 10.0]),
];

const BENCH_ALGOS: [Algo; 4] = [Algo::Dca, Algo::Bdca, Algo::Udca, Algo::Ubdca];

fn cmd_bench(a: BenchArgs) -> CliResult<()> {
    let mut header = String::from("instance,n,t,pref,monomials");
    for algo in BENCH_ALGOS {
        let name = algo.as_str();
        header.push_str(&format!(",{name}_iters,{name}_ms,{name}_f"));
    }
    header.push('\n');
    let mut out = header;

    // (label, matrix) pairs: explicit files first, then synthetic sizes.
    let mut instances: Vec<(String, ReturnMatrix)> = Vec::new();
    for path in &a.data {
        instances.push((path.display().to_string(), load_matrix(path)?));
    }
    for (idx, &n) in a.sizes.iter().enumerate() {
        let seed = a.seed.wrapping_add(idx as u64);
        let r = ReturnMatrix::synthetic(n, a.periods, seed, -0.1, 0.4)
            .map_err(input_err)?;
        // Semicolon, not comma: the label is one CSV field.
        instances.push((format!("synthetic(n={n};seed={seed})"), r));
    }

    let cfg = a.solver.to_config();
    cfg.validate().map_err(input_err)?;
    // Column sums for the averages row: (iters, ms, f) per algorithm.
    let mut sums = [[0.0_f64; 3]; 4];
    let mut solved_rows = 0_usize;

    for (idx, (label, r)) in instances.iter().enumerate() {
        let t = MomentTensors::estimate(r);
        let n = t.asset_count();
        let set = FeasibleSet::simplex(n).map_err(input_err)?;
        let x0 = draw_start(n, a.seed.wrapping_add(1000 + idx as u64), &set)?;
        for (pref_name, weights) in BENCH_PREFS {
            let c = Preference::new(weights).map_err(input_err)?;
            let monomials = build_objective(&t, &c).num_terms();
            let pair = assemble_g_h(&t, &c);
            let up = UniversalPair::new(&t, &c).map_err(solver_err)?;
            out.push_str(&format!(
                "{label},{n},{},{pref_name},{monomials}",
                r.period_count()
            ));
            let mut row_ok = true;
            for (ai, algo) in BENCH_ALGOS.into_iter().enumerate() {
                let started = Instant::now();
                let solved = run_algo(algo, Some(&pair), Some(&up), &set, &x0, &cfg);
                let ms = started.elapsed().as_secs_f64() * 1e3;
                match solved {
                    Ok(res) => {
                        out.push_str(&format!(
                            ",{},{ms:.3},{:.9e}",
                            res.iterations, res.f_star
                        ));
                        sums[ai][0] += res.iterations as f64;
                        sums[ai][1] += ms;
                        sums[ai][2] += res.f_star;
                    }
                    Err(e) => {
                        eprintln!("warning: {algo:?} failed on {label} ({pref_name}): {e}");
                        out.push_str(",,,");
                        row_ok = false;
                    }
                }
            }
            out.push('\n');
            if row_ok {
                solved_rows += 1;
            }
        }
    }

    if solved_rows > 0 {
        let d = solved_rows as f64;
        out.push_str("averages,,,,");
        for column in sums {
            out.push_str(&format!(
                ",{:.1},{:.3},{:.9e}",
                column[0] / d,
                column[1] / d,
                column[2] / d
            ));
        }
        out.push('\n');
    }
    emit(&a.out, &out)
}

fn cmd_frontier(a: FrontierArgs) -> CliResult<()> {
    let r = load_matrix(&a.data)?;
    let t = MomentTensors::estimate(&r);
    let c = match &a.pref {
        Some(s) => parse_preference(s)?,
        None => sample_preference(a.kind.into(), a.seed),
    };
    if c.c1() != 0.0 {
        eprintln!(
            "warning: the mean weight c1 = {} plays no role in the frontier objective; \
             the return constraint pins the mean",
            c.c1()
        );
    }
    if !(a.r_step > 0.0) {
        return Err(input_err(format!("--r-step must be positive, got {}", a.r_step)));
    }
    if a.r_stop < a.r_start {
        return Err(input_err(format!(
            "--r-stop {} is below --r-start {}",
            a.r_stop, a.r_start
        )));
    }
    let grid = if (a.r_start, a.r_stop, a.r_step) == (0.0, 0.4, 0.001) {
        default_r_grid()
    } else {
        let mut g = Vec::new();
        let mut i = 0_u64;
        loop {
            let r = a.r_start + i as f64 * a.r_step;
            if r > a.r_stop + 1e-9 * a.r_step {
                break;
            }
            g.push(r);
            i += 1;
        }
        g
    };
    let spec = FrontierSpec::new(grid, c).map_err(input_err)?;
    let cfg = a.solver.to_config();
    cfg.validate().map_err(input_err)?;
    let points = generate_frontier(&t, &spec, &cfg, a.algo.into()).map_err(solver_err)?;
    emit(&a.out, &frontier_csv(&points, t.asset_count()))
}
