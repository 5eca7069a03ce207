use std::io::Write;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use hypercd::algebra::{self, CdNumber};
use hypercd::check::run_check;
use hypercd::expr;
use hypercd::factorize::{self, FactorOptions, Grid, OperatorSpec, VerifyMode, VerifyOptions};
use hypercd::fundamental::{self as fs, FundamentalSolution, GridField, GridSpec, Kernel, Kind, KG_EPSILON};
use hypercd::line_integral::{self as li, LineOptions, PathFamily, PsiOperator, TargetGrid};
use hypercd::{Error, Result};

#[derive(Parser)]
#[command(
    name = "hypercd",
    version,
    about = "Cayley-Dickson algebras, operator factorization and fundamental solutions"
)]
struct Cli {
    /// Seed for every randomized step; recorded in reports.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Override the pass/fail tolerance of the command.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Write the main artifact here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Staircase,
    Straight,
}

#[derive(Subcommand)]
enum Command {
    /// Multiplication table of level v as CSV entries `±k`.
    Table {
        #[arg(long, short)]
        level: u32,
    },
    /// Factor an operator spec (JSON) and verify the composition.
    Factor {
        spec: PathBuf,
        /// Seeded cubic test polynomials.
        #[arg(long, default_value_t = 20)]
        tests: usize,
        /// Verification grid nodes per axis on [-1, 1].
        #[arg(long, default_value_t = 5)]
        nodes: usize,
        /// Verify with finite differences on a Gaussian instead.
        #[arg(long)]
        fd: bool,
    },
    /// Line integral of a phrase along a polyline path (CSV vertices).
    Integrate {
        #[arg(long)]
        phrase: String,
        #[arg(long)]
        path: PathBuf,
    },
    /// Anti-derivative I f of a first-order operator on a grid, with the
    /// left-inverse residual.
    Antiderive {
        /// Slot and coefficient `j:psi`, e.g. `1:1+z1^2`; repeatable.
        #[arg(long = "psi", required = true)]
        psi: Vec<String>,
        #[arg(long)]
        level: u32,
        /// Integrand in the expression grammar (coordinates z0..).
        #[arg(long)]
        f: String,
        /// Grid axes (leading coordinates).
        #[arg(long, default_value_t = 2)]
        axes: usize,
        #[arg(long, default_value_t = 9)]
        nodes: usize,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long, value_enum, default_value = "staircase")]
        family: Family,
    },
    /// Evaluate a fundamental solution, e.g. `laplace:n=3`.
    Fundamental {
        kernel: String,
        /// Comma-separated point; repeatable.
        #[arg(long = "at", allow_hyphen_values = true)]
        at: Vec<String>,
        /// Sample on a cube `nodes,lo,hi` and write a grid file.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Report the Laplace constant calibration for this dimension.
        #[arg(long)]
        calibrate: bool,
    },
    /// Convolve a kernel with a source grid file.
    Solve { kernel: String, source: PathBuf },
    /// Run an invariant suite (or `all`).
    Check {
        #[arg(default_value = "all")]
        suite: String,
    },
}

/// Outcome of a command: a JSON report and whether it met its tolerance.
struct Outcome {
    report: Value,
    pass: bool,
    /// Printed instead of the report when set.
    raw: Option<String>,
}

impl Outcome {
    fn new(report: Value, pass: bool) -> Self {
        Outcome { report, pass, raw: None }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(o) => {
            let text = match o.raw {
                Some(text) => text,
                None => serde_json::to_string_pretty(&o.report).expect("json") + "\n",
            };
            // a closed pipe downstream is not an error of ours
            let _ = std::io::stdout().write_all(text.as_bytes());
            if o.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<Option<String>> {
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            Ok(Some(p.display().to_string()))
        }
        None => Ok(None),
    }
}

fn read(path: &FsPath) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn numbers(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|e| Error::Parse { offset: 0, message: format!("'{}': {e}", s.trim()) })
        })
        .collect()
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Table { level } => {
            let csv = algebra::table(*level)?.to_csv();
            match emit(&cli.out, &csv)? {
                Some(p) => Ok(Outcome::new(json!({"level": level, "written": p}), true)),
                None => Ok(Outcome { report: Value::Null, pass: true, raw: Some(csv) }),
            }
        }
        Command::Factor { spec, tests, nodes, fd } => factor(cli, spec, *tests, *nodes, *fd),
        Command::Integrate { phrase, path } => {
            let mu = li::parse_phrase(phrase)?;
            let gamma = li::Path::read(path)?;
            let opts = LineOptions { rtol: cli.tol.unwrap_or(1e-9), ..LineOptions::default() };
            let v = li::line_integrate(&mu, &gamma, None, &opts)?;
            Ok(Outcome::new(
                json!({"phrase": mu.to_string(), "variation": gamma.variation(), "value": v.coeffs()}),
                true,
            ))
        }
        Command::Antiderive { psi, level, f, axes, nodes, lo, hi, family } => {
            let dim = 1usize << level;
            let slots = psi
                .iter()
                .map(|s| {
                    let (j, e) = s.split_once(':').ok_or_else(|| Error::Parse {
                        offset: 0,
                        message: format!("expected 'slot:psi', got '{s}'"),
                    })?;
                    let j = j
                        .trim()
                        .parse::<usize>()
                        .map_err(|e| Error::Parse { offset: 0, message: format!("slot '{j}': {e}") })?;
                    Ok((j, expr::parse(e, dim)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let op = PsiOperator::new(*level, slots)?;
            let fe = expr::parse(f, dim)?;
            let level = *level;
            let func = move |z: &CdNumber| Ok(fe.eval(z.coeffs())?.embed(level));
            let grid = TargetGrid::cube(*axes, *nodes, *lo, *hi);
            let z0 = CdNumber::zero(level);
            let family = match family {
                Family::Staircase => PathFamily::Staircase,
                Family::Straight => PathFamily::Straight,
            };
            let big = li::antiderivative_field(&func, &op, &z0, &grid, family, &LineOptions::default())?;
            let small = grid.sample(&z0, &func)?;
            let rep = li::verify_left_inverse(&big, &small, &op.to_first_order())?;
            let tol = cli.tol.unwrap_or(1e-6);
            let written = emit(&cli.out, &big.to_text())?;
            Ok(Outcome::new(json!({"left_inverse": rep, "tolerance": tol, "written": written}), rep.max_residual < tol))
        }
        Command::Fundamental { kernel, at, grid, calibrate } => {
            let sol = FundamentalSolution::parse(kernel)?;
            let mut report = json!({"kernel": sol.to_string(), "singular_set": sol.singular_set()});
            let mut values = Vec::new();
            for p in at {
                let x = numbers(p)?;
                let v = match sol.kind {
                    Kind::KleinGordon { .. } => sol.symbol(&x)?,
                    _ => sol.eval(&x)?,
                };
                let (re, im) = v.scalar_part();
                values.push(json!({"at": x, "re": re, "im": im}));
            }
            report["values"] = json!(values);
            if *calibrate {
                let Kind::Laplace { n } = sol.kind else {
                    return Err(Error::Spec("--calibrate applies to laplace kernels".into()));
                };
                report["calibration"] = json!(fs::laplace_calibration(n)?);
            }
            if let Some(g) = grid {
                let v = numbers(g)?;
                if v.len() != 3 || v[0] < 1.0 || v[0].fract() != 0.0 {
                    return Err(Error::Spec(format!("--grid expects nodes,lo,hi, got '{g}'")));
                }
                let spec = GridSpec::cube(sol.dimension(), v[0] as usize, v[1], v[2])?;
                let field = fs::sample_kernel(&sol, &spec)?;
                match emit(&cli.out, &field.to_text())? {
                    Some(p) => report["written"] = json!(p),
                    None => report["grid"] = json!(field.to_text()),
                }
            }
            Ok(Outcome::new(report, true))
        }
        Command::Solve { kernel, source } => {
            let sol = FundamentalSolution::parse(kernel)?;
            let g = GridField::read(source)?;
            let (field, extra) = match sol.kind {
                Kind::KleinGordon { p, c, b, .. } => (
                    fs::klein_gordon_solve_spectral(p, c, b, KG_EPSILON, &g)?,
                    json!({"method": "spectral", "epsilon": KG_EPSILON}),
                ),
                _ => {
                    let r = fs::convolve_solve(Kernel::Solution(&sol), &g)?;
                    (r.field, json!({"method": "convolution", "convolution": r.report}))
                }
            };
            let text = field.to_text();
            let mut report = json!({"kernel": sol.to_string(), "solve": extra});
            match emit(&cli.out, &text)? {
                Some(p) => report["written"] = json!(p),
                None => report["grid"] = json!(text),
            }
            Ok(Outcome::new(report, true))
        }
        Command::Check { suite } => {
            let r = run_check(suite, cli.seed, cli.tol)?;
            let pass = r.pass;
            let report = serde_json::to_value(&r).expect("json");
            emit(&cli.out, &serde_json::to_string_pretty(&report).expect("json"))?;
            Ok(Outcome::new(report, pass))
        }
    }
}

fn factor(cli: &Cli, spec: &FsPath, tests: usize, nodes: usize, fd: bool) -> Result<Outcome> {
    let op = OperatorSpec::from_json(&read(spec)?)?;
    let f = factorize::factorize(&op, FactorOptions::default())?;
    let n = op.dimension;
    let (test_fns, mode, default_tol) = if fd {
        (vec![factorize::gaussian(n)], VerifyMode::FiniteDifference, 1e-8)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
        ((0..tests).map(|_| factorize::random_polynomial(n, 3, &mut rng)).collect(), VerifyMode::Symbolic, 1e-10)
    };
    let opts = VerifyOptions { grid: Grid { nodes, ..Grid::default() }, mode, ..VerifyOptions::default() };
    let rep = factorize::verify_factorization(&f, &test_fns, &opts)?;
    let tol = cli.tol.unwrap_or(default_tol);
    let pass = rep.max_residual < tol;
    let mut report = json!({
        "seed": cli.seed,
        "tolerance": tol,
        "pass": pass,
        "verification": rep,
        "factorization": f.to_json(),
    });
    if let Some(p) = emit(&cli.out, &serde_json::to_string_pretty(&report["factorization"]).expect("json"))? {
        report["written"] = json!(p);
    }
    Ok(Outcome::new(report, pass))
}
