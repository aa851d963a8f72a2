//! Command-line front end. Exit codes: 0 success, 1 a verification suite
//! failed, 2 usage or domain error.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bellman::Bellman;
use crate::domain::{Params, Point3, Regime, Region};
use crate::error::{Error, Result};
use crate::testfn::{
    bmo_norm, build_psi, depth_for, optimizer_phi0, optimizer_uminus, optimizer_uplus, read_csv, write_csv,
    PiecewiseFn,
};
use crate::verify::{self, TransferenceSpec, VerifyReport};

#[derive(Debug, Parser)]
#[command(name = "bellman-bmo", version, about = "Sharp Bellman function for the L^p/BMO multiplicative inequality")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Clone, Copy, Args)]
struct ParamArgs {
    #[arg(long)]
    p: f64,
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
}

impl ParamArgs {
    fn params(&self) -> Result<Params> {
        Params::new(self.p, self.r, self.eps)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the Bellman function at one point.
    Eval {
        #[command(flatten)]
        params: ParamArgs,
        /// Point as x1,x2,x3.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        x: Point3,
        /// Ask for the lower Bellman function.
        #[arg(long)]
        min: bool,
    },
    /// Evaluate on a grid of the slice x1 = const; CSV x1,x2,x3,region,u,B.
    Scan {
        #[command(flatten)]
        params: ParamArgs,
        /// x2lo:x2hi:n,x3n with x3 spanning the admissible range at each x2.
        #[arg(long, value_parser = parse_grid)]
        grid: GridSpec,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x1: f64,
        #[arg(long)]
        min: bool,
    },
    /// Run verification suites and print their reports.
    Verify {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Hessian samples, oracle functions and seam points.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 64)]
        cells: usize,
        /// Grid density of the constant scan.
        #[arg(long, default_value_t = 2000)]
        density: usize,
        #[arg(long, default_value_t = 0.999)]
        lambda: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value_t = 12)]
        levels: u32,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Print the sharp constant; with --density also scan for it.
    Constant {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        density: Option<usize>,
    },
    /// Write an extremal function as CSV pieces.
    Optimizer(FnArgs),
    /// Grid BMO seminorm of a function read from CSV or built by --kind.
    Bmo {
        #[arg(long, conflicts_with = "kind")]
        input: Option<PathBuf>,
        #[command(flatten)]
        source: FnArgs,
        #[arg(long, default_value_t = 12)]
        levels: u32,
    },
}

#[derive(Debug, Clone, Args)]
struct FnArgs {
    #[arg(long, value_enum)]
    kind: Option<FnKind>,
    #[arg(long, default_value_t = 1.0)]
    u: f64,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 0.999)]
    lambda: f64,
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FnKind {
    Uplus,
    Uminus,
    Phi0,
    Psi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Identities,
    Skeleton,
    Concavity,
    Glue,
    Oracle,
    Attainment,
    Constant,
    Transference,
    /// Every suite that depends only on (p, r, eps).
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct GridSpec {
    x2lo: f64,
    x2hi: f64,
    n: usize,
    x3n: usize,
}

fn parse_point(s: &str) -> std::result::Result<Point3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [a, b, c] => Ok(Point3::new(a, b, c)),
        _ => Err(format!("expected x1,x2,x3, got {} values", v.len())),
    }
}

fn parse_grid(s: &str) -> std::result::Result<GridSpec, String> {
    let bad = || format!("expected x2lo:x2hi:n,x3n, got {s:?}");
    let (x2part, x3n) = s.split_once(',').ok_or_else(bad)?;
    let f: Vec<&str> = x2part.split(':').collect();
    if f.len() != 3 {
        return Err(bad());
    }
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    let int = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    let g = GridSpec {
        x2lo: num(f[0])?,
        x2hi: num(f[1])?,
        n: int(f[2])?,
        x3n: int(x3n)?,
    };
    if g.n == 0 || g.x3n == 0 || !(g.x2lo <= g.x2hi) {
        return Err(bad());
    }
    Ok(g)
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| {
        if n == 1 {
            lo
        } else if i + 1 == n {
            hi
        } else {
            lo + (hi - lo) * (i as f64 / (n - 1) as f64)
        }
    })
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
                return 2;
            }
            let _ = write!(out, "{text}");
            return 0;
        }
    };
    match dispatch(cli.cmd, out) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Input(e.to_string())
}

fn check_side(params: &Params, min: bool) -> Result<()> {
    match (params.regime(), min) {
        (Regime::Max, true) => Err(Error::Input(
            "--min needs (r−2)(p−r) > 0; these parameters give the upper Bellman function".into(),
        )),
        (Regime::Min, false) => Err(Error::Input(
            "(r−2)(p−r) > 0 gives the lower Bellman function; pass --min".into(),
        )),
        _ => Ok(()),
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<bool> {
    match cmd {
        Command::Eval { params, x, min } => {
            let params = params.params()?;
            check_side(&params, min)?;
            let v = Bellman::new(params)?
                .eval(x)
                .map_err(|e| with_point(e, x))?;
            writeln!(out, "{v}").map_err(io_err)?;
            Ok(true)
        }
        Command::Scan { params, grid, x1, min } => {
            let params = params.params()?;
            check_side(&params, min)?;
            scan(&Bellman::new(params)?, grid, x1, out)?;
            Ok(true)
        }
        Command::Verify {
            params,
            suite,
            seed,
            samples,
            cells,
            density,
            lambda,
            delta,
            depth,
            levels,
            format,
        } => {
            let params = params.params()?;
            let mut reports = Vec::new();
            let run = |s: Suite, reports: &mut Vec<VerifyReport>| -> Result<()> {
                reports.push(match s {
                    Suite::Identities => {
                        let eps = params.eps();
                        let grid: Vec<f64> = linspace(eps, eps + 10.0, 201).collect();
                        verify::check_identities(&params, &grid)?
                    }
                    Suite::Skeleton => verify::check_skeleton(&params, &linspace(-5.0, 5.0, 201).collect::<Vec<_>>())?,
                    Suite::Concavity => verify::check_concavity(&params, samples, seed)?,
                    Suite::Glue => verify::check_c1_glue(&params, samples)?,
                    Suite::Oracle => verify::check_inequality_oracle(&params, samples, cells, seed)?,
                    Suite::Attainment => {
                        let eps = params.eps();
                        verify::check_attainment(&params, &[eps, 1.5 * eps, 3.0 * eps])?
                    }
                    Suite::Constant => constant_report(params.p(), params.r(), density)?,
                    Suite::Transference => {
                        let mut spec = TransferenceSpec::new(params.p(), params.r(), delta, lambda);
                        spec.depth = depth.unwrap_or(spec.depth);
                        spec.levels = levels;
                        verify::transference_demo(&spec)?
                    }
                    Suite::All => unreachable!(),
                });
                Ok(())
            };
            if suite == Suite::All {
                for s in [
                    Suite::Identities,
                    Suite::Skeleton,
                    Suite::Concavity,
                    Suite::Glue,
                    Suite::Oracle,
                    Suite::Attainment,
                ] {
                    run(s, &mut reports)?;
                }
            } else {
                run(suite, &mut reports)?;
            }
            write_reports(&reports, format, out)?;
            Ok(reports.iter().all(|r| r.passed))
        }
        Command::Constant { p, r, density } => {
            let c = verify::sharp_constant(p, r)?;
            match density {
                None => writeln!(out, "{c}").map_err(io_err)?,
                Some(n) => {
                    let scan = verify::extract_constant(p, r, n)?;
                    let a = scan.argmax;
                    writeln!(out, "c_sharp,c_observed,x1,x2,x3").map_err(io_err)?;
                    writeln!(out, "{c},{},{},{},{}", scan.c_observed, a.x1, a.x2, a.x3).map_err(io_err)?;
                }
            }
            Ok(true)
        }
        Command::Optimizer(args) => {
            let f = build_fn(&args)?;
            write_csv(&f, &mut *out)?;
            Ok(true)
        }
        Command::Bmo { input, source, levels } => {
            let f = match input {
                Some(path) => read_csv(File::open(&path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?)?,
                None => build_fn(&source)?,
            };
            writeln!(out, "{}", bmo_norm(&f, levels)).map_err(io_err)?;
            Ok(true)
        }
    }
}

fn with_point(e: Error, x: Point3) -> Error {
    let pt = format!("({}, {}, {})", x.x1, x.x2, x.x3);
    let tag = |m: String| if m.contains(&pt) { m } else { format!("{m} at {pt}") };
    match e {
        Error::Domain(m) => Error::Domain(tag(m)),
        Error::Singularity(m) => Error::Singularity(tag(m)),
        Error::Convergence(m) => Error::Convergence(tag(m)),
        Error::Boundary(m) => Error::Boundary(tag(m)),
        Error::Input(m) => Error::Input(tag(m)),
    }
}

fn build_fn(args: &FnArgs) -> Result<PiecewiseFn> {
    let kind = args
        .kind
        .ok_or_else(|| Error::Input("need --kind (or --input for bmo)".into()))?;
    match kind {
        FnKind::Uplus => optimizer_uplus(args.eps, args.u),
        FnKind::Uminus => optimizer_uminus(args.eps, args.u),
        FnKind::Phi0 => Ok(optimizer_phi0()),
        FnKind::Psi => {
            let depth = args.depth.unwrap_or_else(|| depth_for(args.lambda, 1e-6));
            build_psi(args.lambda, depth, (0.0, 1.0))
        }
    }
}

fn constant_report(p: f64, r: f64, density: usize) -> Result<VerifyReport> {
    let c = verify::sharp_constant(p, r)?;
    let scan = verify::extract_constant(p, r, density)?;
    let rel = (scan.c_observed.powf(r) - c.powf(r)).abs() / c.powf(r);
    Ok(VerifyReport {
        suite: "constant".into(),
        params: verify::ParamsRecord { p, r, eps: 1.0 },
        cases: scan.points,
        worst_residual: rel,
        tolerance: 1e-3,
        witness: serde_json::json!({
            "c_sharp": c,
            "c_observed": scan.c_observed,
            "argmax": [scan.argmax.x1, scan.argmax.x2, scan.argmax.x3],
        }),
        passed: rel <= 1e-3,
    })
}

fn scan(b: &Bellman, g: GridSpec, x1: f64, out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x1", "x2", "x3", "region", "u", "B"]).map_err(io_err)?;
    let geo = b.geometry();
    for x2 in linspace(g.x2lo, g.x2hi, g.n) {
        let Ok((lo, hi)) = geo.envelopes(crate::domain::Point2::new(x1, x2)) else {
            w.write_record([x1.to_string(), x2.to_string(), String::new(), Region::Outside.to_string(), String::new(), String::new()])
                .map_err(io_err)?;
            continue;
        };
        for x3 in linspace(lo, hi, g.x3n) {
            let x = Point3::new(x1, x2, x3);
            let region = geo.region_of(x);
            let (u, v) = if region == Region::Outside {
                (String::new(), String::new())
            } else {
                let leaf = b.solve_leaf(x).map_err(|e| with_point(e, x))?;
                let v = b.value_on_leaf(x, &leaf).map_err(|e| with_point(e, x))?;
                (leaf.u.to_string(), v.to_string())
            };
            w.write_record([x1.to_string(), x2.to_string(), x3.to_string(), region.to_string(), u, v])
                .map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

fn write_reports(reports: &[VerifyReport], format: Format, out: &mut dyn Write) -> Result<()> {
    match format {
        Format::Json => {
            let text = if reports.len() == 1 {
                serde_json::to_string_pretty(&reports[0])
            } else {
                serde_json::to_string_pretty(reports)
            }
            .map_err(io_err)?;
            writeln!(out, "{text}").map_err(io_err)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["suite", "p", "r", "eps", "cases", "worst_residual", "tolerance", "passed"])
                .map_err(io_err)?;
            for r in reports {
                w.write_record([
                    r.suite.clone(),
                    r.params.p.to_string(),
                    r.params.r.to_string(),
                    r.params.eps.to_string(),
                    r.cases.to_string(),
                    r.worst_residual.to_string(),
                    r.tolerance.to_string(),
                    r.passed.to_string(),
                ])
                .map_err(io_err)?;
            }
            w.flush().map_err(io_err)
        }
    }
}
