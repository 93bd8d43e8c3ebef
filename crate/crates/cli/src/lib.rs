//! The `efx` command line tool: generate instances, solve, verify, run the
//! brute-force oracle and replay traces. All numbers travel as exact
//! rationals; every output is a deterministic function of the inputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value as Json};

use efx_core::charity::{charity_allocate, CharityOptions};
use efx_core::fairness::two_thirds;
use efx_core::few_types::few_types_allocate;
use efx_core::generate::random_instance;
use efx_core::oracle::{brute_force_exists_alpha_efx, verify_trace};
use efx_core::trace::Trace;
use efx_core::value::{format_rational, pow2};
use efx_core::{
    check_alpha_efx, check_charity, parse_rational, Allocation, EnvyGraph, Error, GraphKind, Instance, Rational,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "efx", version, about = "Approximate EFX allocations with exact certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded random instance.
    Gen(GenArgs),
    /// Run a solver and certify its output.
    Solve(SolveArgs),
    /// Certify an allocation.
    Verify(VerifyArgs),
    /// Search all allocations of a small instance.
    Oracle(OracleArgs),
    /// Check a trace and compare it with a fresh run.
    Replay(ReplayArgs),
    /// Fold the tie-breaking tags into explicit values.
    Perturb(PerturbArgs),
    /// Print an envy graph in DOT format.
    Graph(GraphArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub types: usize,
    /// Comma-separated group sizes, one per type.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    #[arg(long)]
    pub goods: usize,
    #[arg(long, default_value_t = 20)]
    pub max_value: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Fewtypes,
    Charity,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub algo: Algo,
    /// Certification factor; defaults to 2/3 (fewtypes) or 1-ε (charity).
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long, default_value = "1/4")]
    pub epsilon: String,
    /// Demand threshold for charity; chosen from k and ε when absent.
    #[arg(long)]
    pub d: Option<usize>,
    /// Charity only: also remove plain envy of the pool.
    #[arg(long)]
    pub strict: bool,
    /// Instance files; several inputs run as a batch.
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON-lines trace (single input only).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Worker threads for batches.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub alpha: Option<String>,
    /// Allow a pool; it must not be envied (heavily, with --epsilon).
    #[arg(long)]
    pub charity: bool,
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long)]
    pub instance: PathBuf,
    /// An allocation file, or a solve result holding one.
    #[arg(long)]
    pub allocation: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value = "2/3")]
    pub alpha: String,
    /// Only complete allocations.
    #[arg(long)]
    pub complete: bool,
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub instance: PathBuf,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to 1/2^(m+8).
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Plain,
    Reduced,
    Enhanced,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub allocation: PathBuf,
    #[arg(long, value_enum, default_value_t = Kind::Plain)]
    pub kind: Kind,
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: msg.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Input(_) => EXIT_INPUT,
            _ => EXIT_INTERNAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<i32, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn rational_arg(name: &str, s: &str) -> Result<Rational, Failure> {
    parse_rational(s).map_err(|e| Failure::input(format!("--{name}: {e}")))
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    Instance::from_json_str(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// Reads a bare allocation or the `allocation` field of a solve result.
fn load_allocation(path: &Path) -> Result<Allocation, Failure> {
    let raw: Json =
        serde_json::from_str(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let body = raw.get("allocation").cloned().unwrap_or(raw);
    serde_json::from_value(body).map_err(|e| Failure::input(format!("{}: not an allocation: {e}", path.display())))
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serialises");
    s.push('\n');
    s
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => write_file(p, text),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Failure::input(format!("stdout: {e}"))),
    }
}

/// Parses `args` (program name first) and runs the command, writing
/// results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_INPUT;
            }
            let _ = write!(out, "{e}");
            return EXIT_PASS;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Outcome {
    match cli.command {
        Command::Gen(a) => gen(a, out),
        Command::Solve(a) => solve(a, out),
        Command::Verify(a) => verify(a, out),
        Command::Oracle(a) => oracle(a, out),
        Command::Replay(a) => replay(a, out),
        Command::Perturb(a) => perturb(a, out),
        Command::Graph(a) => graph(a, out),
    }
}

fn gen(a: GenArgs, out: &mut dyn Write) -> Outcome {
    if a.types == 0 || a.sizes.len() != a.types {
        return Err(Failure::input(format!("--types {} but {} group sizes given", a.types, a.sizes.len())));
    }
    if a.goods == 0 || a.sizes.contains(&0) {
        return Err(Failure::input("goods and group sizes must be positive"));
    }
    let inst = random_instance(&a.sizes, a.goods, a.max_value, a.seed)?;
    emit(out, a.out.as_deref(), &pretty(&inst.to_json()))?;
    Ok(EXIT_PASS)
}

struct Solved {
    result: Json,
    pass: bool,
    trace: Trace,
}

fn solve_one(a: &SolveArgs, inst: &Instance) -> Result<Solved, (Failure, Option<Box<Trace>>)> {
    let fail = |e: Error| {
        let trace = e.trace().cloned().map(Box::new);
        (Failure::from(e), trace)
    };
    match a.algo {
        Algo::Fewtypes => {
            let alpha = match &a.alpha {
                Some(s) => rational_arg("alpha", s).map_err(|f| (f, None))?,
                None => two_thirds(),
            };
            let r = few_types_allocate(inst).map_err(fail)?;
            let cert = check_alpha_efx(inst, &r.allocation, &alpha).map_err(fail)?;
            let pass = cert.pass && r.certificate.pass && r.allocation.is_complete();
            let result = json!({
                "algo": "fewtypes",
                "allocation": r.allocation,
                "alpha": format_rational(&alpha),
                "certificate": cert,
                "case": r.case.as_str(),
                "stats": r.stats,
                "trace_file": a.trace.as_ref().map(|p| p.display().to_string()),
            });
            Ok(Solved {
                result,
                pass,
                trace: r.trace,
            })
        }
        Algo::Charity => {
            let eps = rational_arg("epsilon", &a.epsilon).map_err(|f| (f, None))?;
            let alpha = match &a.alpha {
                Some(s) => rational_arg("alpha", s).map_err(|f| (f, None))?,
                None => Rational::from_integer(1.into()) - &eps,
            };
            let opts = CharityOptions {
                d: a.d,
                strict: a.strict,
            };
            let r = charity_allocate(inst, &eps, &opts).map_err(fail)?;
            let cert = check_alpha_efx(inst, &r.allocation, &alpha)
                .and_then(|c| Ok(c.merge(check_charity(inst, &r.allocation, Some(&eps))?)))
                .map_err(fail)?;
            let pass = cert.pass && r.report.certificate.pass;
            let result = json!({
                "algo": "charity",
                "allocation": r.allocation,
                "alpha": format_rational(&alpha),
                "certificate": cert,
                "report": r.report,
                "trace_file": a.trace.as_ref().map(|p| p.display().to_string()),
            });
            Ok(Solved {
                result,
                pass,
                trace: r.trace,
            })
        }
    }
}

fn failure_trace_path(a: &SolveArgs, input: &Path) -> PathBuf {
    a.trace.clone().unwrap_or_else(|| {
        let mut p = input.as_os_str().to_owned();
        p.push(".failure.jsonl");
        PathBuf::from(p)
    })
}

fn solve(a: SolveArgs, out: &mut dyn Write) -> Outcome {
    if a.input.len() > 1 && a.trace.is_some() {
        return Err(Failure::input("--trace needs a single --input"));
    }
    if a.jobs == 0 {
        return Err(Failure::input("--jobs must be positive"));
    }
    let instances = a.input.iter().map(|p| load_instance(p)).collect::<Result<Vec<_>, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| Failure {
            code: EXIT_INTERNAL,
            message: e.to_string(),
        })?;
    let runs: Vec<_> = pool.install(|| {
        use rayon::prelude::*;
        instances.par_iter().map(|inst| solve_one(&a, inst)).collect()
    });

    let mut results = Vec::new();
    let mut all_pass = true;
    for (run, input) in runs.into_iter().zip(&a.input) {
        match run {
            Ok(s) => {
                if let Some(p) = &a.trace {
                    write_file(p, &s.trace.to_jsonl())?;
                }
                all_pass &= s.pass;
                results.push(s.result);
            }
            Err((f, trace)) => {
                let mut message = format!("{}: {}", input.display(), f.message);
                if let Some(t) = trace.filter(|t| !t.events.is_empty()) {
                    let p = failure_trace_path(&a, input);
                    write_file(&p, &t.to_jsonl())?;
                    message.push_str(&format!(" (trace written to {})", p.display()));
                }
                return Err(Failure { code: f.code, message });
            }
        }
    }
    let text = if results.len() == 1 {
        pretty(&results[0])
    } else {
        pretty(&results)
    };
    emit(out, a.out.as_deref(), &text)?;
    Ok(if all_pass { EXIT_PASS } else { EXIT_FAIL })
}

fn verify(a: VerifyArgs, out: &mut dyn Write) -> Outcome {
    let inst = load_instance(&a.instance)?;
    let x = load_allocation(&a.allocation)?;
    x.validate(&inst)
        .map_err(|e| Failure::input(format!("not an allocation: {e}")))?;
    let eps = a.epsilon.as_deref().map(|s| rational_arg("epsilon", s)).transpose()?;
    if eps.is_some() && !a.charity {
        return Err(Failure::input("--epsilon needs --charity"));
    }
    let alpha = match (&a.alpha, &eps) {
        (Some(s), _) => rational_arg("alpha", s)?,
        (None, Some(e)) => Rational::from_integer(1.into()) - e,
        (None, None) => two_thirds(),
    };
    let mut cert = check_alpha_efx(&inst, &x, &alpha)?;
    if a.charity {
        cert = cert.merge(check_charity(&inst, &x, eps.as_ref())?);
    }
    let complete = x.is_complete();
    let pass = cert.pass && (a.charity || complete);
    let report = json!({
        "pass": pass,
        "alpha": format_rational(&alpha),
        "mode": if a.charity { "charity" } else { "complete" },
        "complete": complete,
        "pool_size": x.pool.len(),
        "certificate": cert,
    });
    emit(out, None, &pretty(&report))?;
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

fn oracle(a: OracleArgs, out: &mut dyn Write) -> Outcome {
    let inst = load_instance(&a.input)?;
    let alpha = rational_arg("alpha", &a.alpha)?;
    let found = brute_force_exists_alpha_efx(&inst, &alpha, a.complete)?;
    let report = json!({
        "found": found.is_some(),
        "alpha": format_rational(&alpha),
        "complete_only": a.complete,
        "allocation": found,
    });
    emit(out, None, &pretty(&report))?;
    Ok(if found.is_some() { EXIT_PASS } else { EXIT_FAIL })
}

fn replay(a: ReplayArgs, out: &mut dyn Write) -> Outcome {
    let inst = load_instance(&a.instance)?;
    let trace = Trace::from_jsonl(&read(&a.trace)?)?;
    let report = verify_trace(&trace, &inst)?;
    emit(out, None, &pretty(&report))?;
    Ok(if report.pass { EXIT_PASS } else { EXIT_FAIL })
}

fn perturb(a: PerturbArgs, out: &mut dyn Write) -> Outcome {
    let inst = load_instance(&a.input)?;
    let eps = match &a.epsilon {
        Some(s) => rational_arg("epsilon", s)?,
        None => Rational::from_integer(1.into()) / pow2(inst.num_goods() + 8),
    };
    let p = inst.explicit_perturbation(&eps)?;
    emit(out, a.out.as_deref(), &pretty(&p.to_json()))?;
    Ok(EXIT_PASS)
}

fn graph(a: GraphArgs, out: &mut dyn Write) -> Outcome {
    let inst = load_instance(&a.instance)?;
    let x = load_allocation(&a.allocation)?;
    x.validate(&inst)
        .map_err(|e| Failure::input(format!("not an allocation: {e}")))?;
    let kind = match a.kind {
        Kind::Plain => GraphKind::Plain,
        Kind::Reduced => GraphKind::Reduced,
        Kind::Enhanced => GraphKind::Enhanced,
    };
    emit(out, None, &EnvyGraph::build(&inst, &x, kind).to_dot(&inst))?;
    Ok(EXIT_PASS)
}
