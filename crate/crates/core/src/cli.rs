//! The `hsfm` command-line surface.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input or configuration
//! error, 3 numerical failure (non-finite values, divergence).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fan::{hormander_functional, marcinkiewicz_report, FanGrid, MeasureKind, Symbol};
use crate::hgroup::{lp_norm, GroupFunction, GroupGrid};
use crate::multiplier::{kernel_coefficients, Kernel};
use crate::pde::{solve_with, ProblemFile};
use crate::sft::{SpectralFunction, TransformPlan};
use crate::verify::{parse_symbol, run_report, VerifyConfig, DEFAULT_ROUNDTRIP_TOLERANCE};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const THREADS_ENV: &str = "HSFM_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Grid, seed and output settings shared by every command.
///
/// `threads` is not written into output files so that runs with different
/// worker counts stay byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub n: usize,
    #[serde(rename = "Lz")]
    pub lz: f64,
    #[serde(rename = "Nz")]
    pub nz: usize,
    #[serde(rename = "Lt")]
    pub lt: f64,
    #[serde(rename = "Nt")]
    pub nt: usize,
    #[serde(rename = "Kmax")]
    pub kmax: usize,
    pub seed: u64,
    #[serde(skip_serializing, default)]
    pub threads: Option<usize>,
    pub out: PathBuf,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            n: 1,
            lz: 6.0,
            nz: 24,
            lt: 8.0,
            nt: 48,
            kmax: 12,
            seed: 0,
            threads: None,
            out: PathBuf::from("hsfm-out"),
        }
    }
}

impl SessionConfig {
    pub fn grid(&self) -> Result<GroupGrid> {
        GroupGrid::new(self.n, self.lz, self.nz, self.lt, self.nt)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if self.kmax == 0 {
            return Err(Error::InvalidArgument("Kmax must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidArgument("thread count must be positive".into()));
        }
        Ok(())
    }

    /// Adopts the grid of an input file.
    fn with_grid(&self, g: &GroupGrid) -> Self {
        Self {
            n: g.n,
            lz: g.lz,
            nz: g.nz,
            lt: g.lt,
            nt: g.nt,
            ..self.clone()
        }
    }
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    session: Option<SessionPatch>,
    #[serde(default)]
    verify: Option<VerifyConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionPatch {
    n: Option<usize>,
    #[serde(rename = "Lz")]
    lz: Option<f64>,
    #[serde(rename = "Nz")]
    nz: Option<usize>,
    #[serde(rename = "Lt")]
    lt: Option<f64>,
    #[serde(rename = "Nt")]
    nt: Option<usize>,
    #[serde(rename = "Kmax")]
    kmax: Option<usize>,
    seed: Option<u64>,
    threads: Option<usize>,
    out: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(name = "hsfm", version, about = "Fourier analysis on the Heisenberg group")]
struct Cli {
    /// JSON file with optional "session" and "verify" sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (overrides HSFM_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Forward transform of an HSF-G file, or inverse of an HSF-F file.
    Transform(TransformArgs),
    /// Run inequality and identity suites and write a ratio report.
    Verify(VerifyArgs),
    /// Solve an HSF-P problem by Picard iteration.
    Solve(SolveArgs),
    /// Describe the fan of the session grid, optionally with symbol diagnostics.
    FanInfo(FanInfoArgs),
    /// Tabulate the convolution kernel of a symbol.
    Kernel(KernelArgs),
}

#[derive(Debug, Args)]
struct TransformArgs {
    input: PathBuf,
    /// Treat the input as HSF-F and synthesise an HSF-G file.
    #[arg(long)]
    inverse: bool,
    /// Print the relative L2 roundtrip error of forward then inverse.
    #[arg(long)]
    roundtrip: bool,
    /// Roundtrip threshold; exceeding it exits with code 1.
    #[arg(long, default_value_t = DEFAULT_ROUNDTRIP_TOLERANCE)]
    max_roundtrip: f64,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Suite name; repeatable. One of default, plancherel, hy, dual-hy,
    /// paley, hyp, lplq, hormander.
    #[arg(long)]
    suite: Vec<String>,
    /// Symbol for the hormander suite, e.g. power:beta=0.5,gamma=1.
    #[arg(long)]
    symbol: Option<String>,
    /// Dimension n of the hormander fan.
    #[arg(long)]
    n: Option<usize>,
    /// Exponent p of the hormander functional.
    #[arg(long)]
    p: Option<f64>,
    /// Exponent q of the hormander functional.
    #[arg(long)]
    q: Option<f64>,
    /// Corpus size.
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    problem: PathBuf,
}

#[derive(Debug, Args)]
struct FanInfoArgs {
    #[arg(long)]
    symbol: Option<String>,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 4.0)]
    q: f64,
}

#[derive(Debug, Args)]
struct KernelArgs {
    #[arg(long)]
    symbol: String,
}

/// A command failure paired with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonFinite(_) | Error::Divergence { .. } | Error::MaxIterations { .. } => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        };
        let message = match &e {
            Error::Divergence { increments } => json!({
                "error": "divergence",
                "message": e.to_string(),
                "increments": increments,
            })
            .to_string(),
            _ => format!("error: {e}"),
        };
        Failure { code, message }
    }
}

type CmdResult = std::result::Result<i32, Failure>;

fn read_input(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn header(session: &SessionConfig) -> Value {
    json!({
        "tool": { "name": "hsfm", "version": VERSION },
        "session": session,
    })
}

fn manifest(session: &SessionConfig, body: Value) -> Result<Vec<u8>> {
    let mut v = header(session);
    if let (Value::Object(dst), Value::Object(src)) = (&mut v, body) {
        dst.extend(src);
    }
    let mut bytes = serde_json::to_vec_pretty(&v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn resolve_session(cli: &Cli, file: &ConfigFile) -> Result<SessionConfig> {
    let mut s = SessionConfig::default();
    if let Some(p) = &file.session {
        s.n = p.n.unwrap_or(s.n);
        s.lz = p.lz.unwrap_or(s.lz);
        s.nz = p.nz.unwrap_or(s.nz);
        s.lt = p.lt.unwrap_or(s.lt);
        s.nt = p.nt.unwrap_or(s.nt);
        s.kmax = p.kmax.unwrap_or(s.kmax);
        s.seed = p.seed.unwrap_or(s.seed);
        s.threads = p.threads.or(s.threads);
        s.out = p.out.clone().unwrap_or(s.out);
    }
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let t = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        s.threads = Some(t);
    }
    s.threads = cli.threads.or(s.threads);
    s.seed = cli.seed.unwrap_or(s.seed);
    if let Some(o) = &cli.out {
        s.out = o.clone();
    }
    s.validate()?;
    Ok(s)
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Format {
                format: "config",
                detail: e.to_string(),
            })
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// its exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: &Cli) -> CmdResult {
    let file = load_config(cli.config.as_deref())?;
    let session = resolve_session(cli, &file)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = session.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Transform(a) => cmd_transform(&session, a),
        Command::Verify(a) => cmd_verify(&session, file.verify.clone().unwrap_or_default(), a),
        Command::Solve(a) => cmd_solve(&session, a),
        Command::FanInfo(a) => cmd_fan_info(&session, a),
        Command::Kernel(a) => cmd_kernel(&session, a),
    })
}

fn file_stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into())
}

fn cmd_transform(session: &SessionConfig, a: &TransformArgs) -> CmdResult {
    let bytes = read_input(&a.input)?;
    let stem = file_stem(&a.input);
    let mut body = json!({ "input": a.input.display().to_string() });
    let mut code = EXIT_OK;
    let (session, written) = if a.inverse {
        let spec = SpectralFunction::from_hsff(&bytes)?;
        let session = SessionConfig {
            kmax: spec.fan().kmax(),
            ..session.with_grid(spec.grid())
        };
        let plan = TransformPlan::new(*spec.grid(), spec.fan().clone())?;
        let g = plan.inverse(&spec)?;
        check_finite(g.values(), "inverse transform")?;
        let path = session.out.join(format!("{stem}.hsfg"));
        write_output(&path, &g.to_hsfg()?)?;
        (session, path)
    } else {
        let f = GroupFunction::from_hsfg(&bytes)?;
        let session = session.with_grid(f.grid());
        let fan = FanGrid::for_grid(f.grid(), session.kmax)?;
        let plan = TransformPlan::new(*f.grid(), fan)?;
        let spec = plan.forward(&f)?;
        check_finite(spec.values(), "forward transform")?;
        if a.roundtrip {
            let back = plan.inverse(&spec)?;
            let err = if lp_norm(&f, 2.0)? == 0.0 {
                lp_norm(&back, 2.0)?
            } else {
                back.relative_l2_error(&f)?
            };
            check_finite(&[num_complex::Complex64::new(err, 0.0)], "roundtrip error")?;
            println!("roundtrip relative L2 error {err:e} (threshold {:e})", a.max_roundtrip);
            body["roundtrip_error"] = json!(err);
            body["roundtrip_threshold"] = json!(a.max_roundtrip);
            if err > a.max_roundtrip {
                eprintln!("roundtrip error {err:e} exceeds {:e}", a.max_roundtrip);
                code = EXIT_VERIFY;
            }
        }
        let path = session.out.join(format!("{stem}.hsff"));
        write_output(&path, &spec.to_hsff()?)?;
        (session, path)
    };
    body["output"] = json!(written.display().to_string());
    write_output(&session.out.join(format!("{stem}.transform.json")), &manifest(&session, body)?)?;
    println!("wrote {}", written.display());
    Ok(code)
}

fn check_finite(v: &[num_complex::Complex64], what: &str) -> Result<()> {
    if v.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

fn cmd_verify(session: &SessionConfig, mut cfg: VerifyConfig, a: &VerifyArgs) -> CmdResult {
    if !a.suite.is_empty() {
        cfg.suites = a.suite.clone();
    }
    if let Some(s) = &a.symbol {
        cfg.hormander_symbol = s.clone();
    }
    cfg.hormander_n = a.n.unwrap_or(cfg.hormander_n);
    cfg.hormander_p = a.p.unwrap_or(cfg.hormander_p);
    cfg.hormander_q = a.q.unwrap_or(cfg.hormander_q);
    cfg.count = a.count.unwrap_or(cfg.count);
    let report = run_report(session.grid()?, session.kmax, session.seed, &cfg)?;
    let body = json!({ "verify": cfg, "report": report });
    write_output(&session.out.join("report.json"), &manifest(session, body)?)?;
    let mut csv = format!("# {}\n", serde_json::to_string(&header(session))?);
    csv.push_str(&report.to_csv()?);
    write_output(&session.out.join("report.csv"), csv.as_bytes())?;
    for agg in &report.aggregates {
        println!("{}: {} ratios, max {:e}, mean {:e}", agg.check, agg.count, agg.max, agg.mean);
    }
    for e in report.entries.iter().filter(|e| e.check == "hormander") {
        println!("hormander {} {}: {:e}", e.symbol_id.as_deref().unwrap_or(""), e.item_id, e.lhs);
    }
    for note in &report.notes {
        println!("{note}");
    }
    let failed: Vec<_> = report.assertions.iter().filter(|x| !x.passed).collect();
    for f in &failed {
        eprintln!("FAILED {}: {}", f.name, f.detail);
    }
    println!(
        "{} of {} assertions passed",
        report.assertions.len() - failed.len(),
        report.assertions.len()
    );
    Ok(if failed.is_empty() { EXIT_OK } else { EXIT_VERIFY })
}

fn cmd_solve(session: &SessionConfig, a: &SolveArgs) -> CmdResult {
    let text = std::fs::read_to_string(&a.problem)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", a.problem.display())))?;
    let file = ProblemFile::parse(&text)?;
    let base = a.problem.parent().unwrap_or(Path::new("."));
    let loaded = file.load(base)?;
    let grid = *loaded.problem.u0.grid();
    let session = SessionConfig {
        kmax: loaded.fan.kmax(),
        ..session.with_grid(&grid)
    };
    let plan = TransformPlan::new(grid, loaded.fan.clone())?;
    let traj = solve_with(&plan, &loaded.problem, loaded.timegrid, loaded.tol, loaded.maxiter)?;
    let states = traj.write_states(&session.out)?;
    let body = json!({
        "problem": file,
        "iterations": traj.iterations,
        "increments": traj.increments,
        "residual": traj.residual,
        "states": states,
    });
    write_output(&session.out.join("manifest.json"), &manifest(&session, body)?)?;
    println!("iterations {}", traj.iterations);
    println!("final increment {:e}", traj.increments.last().copied().unwrap_or(0.0));
    println!("residual {:e}", traj.residual);
    Ok(EXIT_OK)
}

fn cmd_fan_info(session: &SessionConfig, a: &FanInfoArgs) -> CmdResult {
    let grid = session.grid()?;
    let fan = FanGrid::for_grid(&grid, session.kmax)?;
    let mut body = json!({
        "fan": {
            "n": fan.n(),
            "Kmax": fan.kmax(),
            "Lt": fan.lt(),
            "Nt": fan.nt(),
            "nodes": fan.n_nodes(),
            "dlambda": fan.dlambda(),
            "lambda_max": fan.nodes().iter().fold(0.0f64, |m, l| m.max(l.abs())),
            "total_nu": fan.total_measure(MeasureKind::Nu),
            "total_nu2": fan.total_measure(MeasureKind::Nu2),
            "total_mu": fan.total_measure(MeasureKind::Mu),
        }
    });
    if let Some(spec) = &a.symbol {
        let m: Symbol = parse_symbol(spec, fan.n())?;
        let h = hormander_functional(&m, a.p, a.q, &fan)?;
        let table = marcinkiewicz_report(&m, 1, 1, &fan)?;
        body["symbol"] = json!({
            "id": m.id(),
            "hormander": { "p": a.p, "q": a.q, "value": h },
            "marcinkiewicz": table,
        });
    }
    let bytes = manifest(session, body)?;
    write_output(&session.out.join("fan-info.json"), &bytes)?;
    std::io::stdout().write_all(&bytes)?;
    Ok(EXIT_OK)
}

fn cmd_kernel(session: &SessionConfig, a: &KernelArgs) -> CmdResult {
    let grid = session.grid()?;
    let fan = FanGrid::for_grid(&grid, session.kmax)?;
    let m = parse_symbol(&a.symbol, grid.n)?;
    let k: Kernel = kernel_coefficients(&m, &grid, &fan)?;
    check_finite(k.coefficients(), "kernel coefficients")?;
    let path = session.out.join("kernel.hsfk");
    write_output(&path, &k.to_hsfk()?)?;
    let origin = grid.spatial_flat(&vec![grid.nz / 2; grid.real_axes()]);
    let k0 = k.eval_index(origin, 0.0)?;
    let body = json!({
        "symbol": m.id(),
        "output": path.display().to_string(),
        "origin_value": [k0.re, k0.im],
    });
    write_output(&session.out.join("kernel.json"), &manifest(session, body)?)?;
    println!("K(0, 0) = {k0}");
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}
