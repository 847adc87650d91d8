//! `glmlab`: batch front end for analyzing, filtering, integrating and
//! optimizing general linear methods. Every command writes JSON or CSV.
//!
//! Exit codes: 0 success or match, 1 the computation ran but did not match
//! the declared metadata (or found no feasible method), 2 usage or input
//! error.

mod resolve;

use std::fs::File;
use std::io::{self, Write};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use glmlab::glm::{to_compact, validate};
use glmlab::integrate::{halving, observed_order};
use glmlab::optimize::{optimize_filters, verify_result, OptimizeError, ProblemJson, VerificationConfig};
use glmlab::order::{Condition, OrderResidualReport};
use glmlab::stability::{region_raster, stability_report, ScanConfig};
use glmlab::{catalog, CatalogEntry, GlmTableau, Method, SolveConfig};

use resolve::{Resolved, UsageError};

/// Largest accepted gap between a computed and a declared stability angle.
const ALPHA_TOL_DEG: f64 = 0.25;

#[derive(Parser)]
#[command(name = "glmlab", version, about = "Analyze, filter, integrate and optimize general linear methods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Order residuals, consistency and linear stability of a method.
    Analyze {
        /// Catalog name or method JSON file.
        method: String,
        /// Order-condition tolerance.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Wedge rays in the stability scan.
        #[arg(long)]
        scan_rays: Option<usize>,
        /// Moduli per ray in the stability scan.
        #[arg(long)]
        scan_moduli: Option<usize>,
        /// Largest modulus of the main scan.
        #[arg(long)]
        zmax: Option<f64>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Spectral radius of M(z) on a rectangular grid, as CSV.
    Region {
        method: String,
        /// re_min:re_max:im_min:im_max
        #[arg(long, allow_hyphen_values = true)]
        window: String,
        /// Grid points per side.
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long)]
        out: Option<String>,
    },
    /// Errors and observed orders under step halving, as CSV.
    Converge {
        method: String,
        /// Problem name, e.g. decay_forced or dahlquist(-1).
        #[arg(long)]
        problem: String,
        #[arg(long, default_value_t = 0.2)]
        dt0: f64,
        #[arg(long, default_value_t = 5)]
        levels: usize,
        #[arg(long)]
        out: Option<String>,
    },
    /// Search for filters that widen the stability region.
    Optimize {
        /// Problem JSON file.
        problem: String,
        /// Overrides the seed in the problem file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Apply a pre/post-filter file to a core method.
    Filter {
        /// Core name (IE, MP, BDF2, RK22) or method JSON file.
        core: String,
        /// Filter JSON file.
        filter: String,
        #[arg(long)]
        out: Option<String>,
    },
    /// List the catalog or export one of its methods.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    /// Metadata of every entry.
    List,
    /// Method JSON of one entry.
    Export {
        name: String,
        #[arg(long)]
        out: Option<String>,
    },
}

enum Failure {
    Usage(UsageError),
    /// Output was written; the result did not match.
    Mismatch,
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(UsageError(e.to_string()))
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Mismatch) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<(), UsageError> {
    let Ok(v) = std::env::var("GLMLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| UsageError(format!("GLMLAB_THREADS='{v}' is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cmd: Command) -> CmdResult {
    match cmd {
        Command::Analyze {
            method,
            tol,
            scan_rays,
            scan_moduli,
            zmax,
            out,
        } => {
            let mut scan = ScanConfig::default();
            if let Some(n) = scan_rays {
                scan.rays = n;
            }
            if let Some(n) = scan_moduli {
                scan.moduli = n;
            }
            if let Some(z) = zmax {
                scan.modulus_max = z;
            }
            if !(tol > 0.0) || scan.rays == 0 || scan.moduli < 2 || !(scan.modulus_max > scan.modulus_min) {
                return Err(UsageError("tol must be positive, scan-rays >= 1, scan-moduli >= 2, zmax > 1e-3".into()).into());
            }
            analyze(&method, tol, &scan, out.as_deref())
        }
        Command::Region { method, window, n, out } => {
            let window = resolve::window(&window)?;
            if n < 2 {
                return Err(UsageError("--n must be at least 2".into()).into());
            }
            let m = resolve::method(&method)?;
            let compact = to_compact(m.tableau()).map_err(UsageError::from)?;
            let raster = region_raster(&compact, window, n, n);
            let mut w = sink(out.as_deref())?;
            raster.write_csv(&mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Converge {
            method,
            problem,
            dt0,
            levels,
            out,
        } => {
            if !(dt0 > 0.0) || levels < 2 {
                return Err(UsageError("--dt0 must be positive and --levels at least 2".into()).into());
            }
            let problem = resolve::problem(&problem)?;
            let method: Method = match resolve::method(&method)? {
                Resolved::Catalog(e) => Method::from(e.as_ref()),
                Resolved::File(t) => Method::from(t),
            };
            let cfg = SolveConfig::new(dt0);
            let table = observed_order(&problem, &method, &halving(dt0, levels), &cfg).map_err(UsageError::from)?;
            let mut w = sink(out.as_deref())?;
            table.write_csv(&mut w)?;
            w.flush()?;
            if let Some(s) = table.slope {
                eprintln!("slope {s:.4}");
            }
            Ok(())
        }
        Command::Optimize { problem, seed, out } => optimize(&problem, seed, out.as_deref()),
        Command::Filter { core, filter, out } => {
            let core = resolve::core(&core)?;
            let spec = glmlab::filter::FilterSpec::from_json(&resolve::read_file(&filter)?)
                .map_err(|e| UsageError(format!("{filter}: {e}")))?;
            let tableau = spec.apply(&core).map_err(UsageError::from)?;
            write_text(out.as_deref(), &tableau.to_json())
        }
        Command::Catalog { action } => match action {
            CatalogAction::List => {
                let metas: Vec<_> = catalog::list::<f64>().iter().map(|e| e.meta()).collect();
                write_json(None, &metas)
            }
            CatalogAction::Export { name, out } => {
                let e: CatalogEntry = catalog::get(&name).map_err(UsageError::from)?;
                write_text(out.as_deref(), &e.tableau.to_json())
            }
        },
    }
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    expected: Value,
    computed: Value,
    pass: bool,
}

fn analyze(arg: &str, tol: f64, scan: &ScanConfig, out: Option<&str>) -> CmdResult {
    let resolved = resolve::method(arg)?;
    let tableau: &GlmTableau = resolved.tableau();
    let compact = to_compact(tableau).map_err(UsageError::from)?;
    let order = OrderResidualReport::new(&compact, tol);
    let consistency = validate(&compact, tol);
    let stability = stability_report(&compact, scan);

    let target = match &resolved {
        Resolved::Catalog(e) => e.declared_order as i32,
        Resolved::File(_) => order.order.max(0) + 1,
    };
    let flagged: Vec<String> = Condition::ALL
        .iter()
        .filter(|c| i32::from(c.order) <= target && order.residual(**c).abs() > tol)
        .map(|c| c.label())
        .collect();

    let mut checks = Vec::new();
    if let Resolved::Catalog(e) = &resolved {
        checks.push(Check {
            name: "order",
            expected: json!(e.declared_order),
            computed: json!(order.order),
            pass: order.order == e.declared_order as i32,
        });
        if let Ok(s) = &stability {
            let (computed, pass) = if e.declared_alpha_deg >= 90.0 {
                (json!(if s.a_stable { Some(90.0) } else { s.alpha_deg }), s.a_stable)
            } else {
                let pass = !s.a_stable && s.alpha_deg.is_some_and(|a| (a - e.declared_alpha_deg).abs() <= ALPHA_TOL_DEG);
                (json!(s.alpha_deg), pass)
            };
            checks.push(Check {
                name: "alpha_deg",
                expected: json!(e.declared_alpha_deg),
                computed,
                pass,
            });
            checks.push(Check {
                name: "l_stable",
                expected: json!(e.declared_l_stable),
                computed: json!(s.l_stable),
                pass: s.l_stable == e.declared_l_stable,
            });
        }
    }

    let matched = match &resolved {
        Resolved::Catalog(_) => consistency.pass && stability.is_ok() && checks.iter().all(|c| c.pass),
        Resolved::File(_) => consistency.pass,
    };
    let (stability, stability_error) = match stability {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = json!({
        "method": tableau.name,
        "source": match resolved { Resolved::Catalog(_) => "catalog", Resolved::File(_) => "file" },
        "order": order,
        "consistency": consistency,
        "stability": stability,
        "stability_error": stability_error,
        "flagged": flagged,
        "checks": checks,
        "match": matched,
    });
    write_json(out, &report)?;
    if matched {
        Ok(())
    } else {
        Err(Failure::Mismatch)
    }
}

fn optimize(path: &str, seed: Option<u64>, out: Option<&str>) -> CmdResult {
    let pj = ProblemJson::from_json(&resolve::read_file(path)?).map_err(|e| UsageError(format!("{path}: {e}")))?;
    let core = resolve::core_value(&pj.core)?;
    let problem = pj.to_problem(&core).map_err(UsageError::from)?;
    let mut cfg = pj.config();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let result = match optimize_filters(&problem, &cfg) {
        Ok(r) => r,
        Err(OptimizeError::Infeasible { penalty, residuals }) => {
            let report = json!({
                "method": Value::Null,
                "report": {
                    "feasible": false,
                    "error": "no filter meets the order conditions",
                    "best_penalty": penalty,
                    "residuals": residuals,
                    "config": cfg,
                },
            });
            write_json(out, &report)?;
            return Err(Failure::Mismatch);
        }
        Err(e) => return Err(UsageError::from(e).into()),
    };
    let verification = verify_result(&result, &VerificationConfig::default()).map_err(UsageError::from)?;
    let method: Value = serde_json::from_str(&result.tableau.to_json()).map_err(UsageError::from)?;
    let feasible = verification.feasible;
    let report = json!({
        "method": method,
        "report": {
            "result": result,
            "verification": verification,
            "config": cfg,
        },
    });
    write_json(out, &report)?;
    if feasible {
        Ok(())
    } else {
        Err(Failure::Mismatch)
    }
}

fn sink(out: Option<&str>) -> Result<Box<dyn Write>, UsageError> {
    Ok(match out {
        Some(path) => Box::new(io::BufWriter::new(
            File::create(path).map_err(|e| UsageError(format!("{path}: {e}")))?,
        )),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn write_text(out: Option<&str>, text: &str) -> CmdResult {
    let mut w = sink(out)?;
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(())
}

fn write_json<S: Serialize>(out: Option<&str>, v: &S) -> CmdResult {
    let text = serde_json::to_string_pretty(v).map_err(UsageError::from)?;
    write_text(out, &text)
}
