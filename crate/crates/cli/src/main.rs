//! `conecal` — batch driver for the verification suite and the min-cut lab.
//!
//! Settings come from built-in defaults, overridden by `--config FILE`
//! (TOML), overridden by flags. Every run writes `report.json` and
//! `report.csv` to `--out` and exits non-zero iff some verdict failed.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use conecal::lab::{build_lattice, LatticeMode, MincutCase, Stencil};
use conecal::parallel::Execution;
use conecal::verifier::{run_suite, CheckRecord, Fault, LambdaSpec, SuiteConfig, VerificationReport};

#[derive(Parser, Debug)]
#[command(name = "conecal", version, about = "Calibration checks for the axial hyperplane in round cones")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Metric and Hodge identities through the generic Gram-determinant engine.
    Identities(Common),
    /// Critical slope: closed form, bisection and exact certificate.
    Threshold(Common),
    /// Identities, threshold and the calibration field checks.
    Verify(Common),
    /// Box, cone-face and tube flux studies.
    Flux(Common),
    /// Lattice min-cut against the flat plane.
    Mincut(MincutArgs),
    /// Print the default configuration as TOML.
    Defaults,
}

#[derive(Args, Debug)]
struct Common {
    /// Dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Slopes, comma separated: numbers, `bar`, `bar*F` or `bar/D`.
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<LambdaSpec>>,
    /// Profile exponent (default: the optimal one per cone).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json and report.csv.
    #[arg(long, default_value = "conecal-out")]
    out: PathBuf,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sample count for the subcommand's main checks.
    #[arg(long)]
    samples: Option<usize>,
    /// Difference step (identities: absolute; verify: smallest relative step);
    /// quadrature resolution is set in the config file.
    #[arg(long)]
    step: Option<f64>,
    /// Tolerance for the subcommand's main checks.
    #[arg(long)]
    tol: Option<f64>,
    /// Add this amount to every inverse-metric entry (negative control).
    #[arg(long)]
    inject_fault: Option<f64>,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
    /// Print every record, not only verdicts.
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Args, Debug)]
struct MincutArgs {
    #[command(flatten)]
    common: Common,
    /// Ball radius.
    #[arg(long)]
    radius: Option<f64>,
    /// Boundary shell width.
    #[arg(long)]
    shell: Option<f64>,
    #[arg(long, value_enum)]
    stencil: Option<StencilArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Lattice spacings for the vertex-clearance probe, comma separated.
    #[arg(long, value_delimiter = ',')]
    probe: Option<Vec<f64>>,
    /// Skip the second solver.
    #[arg(long)]
    no_validate: bool,
    /// Write the first case's network as a text arc list to this file.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StencilArg {
    Nearest,
    Crofton26,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Axisymmetric,
    Full,
}

fn load(common: &Common) -> Result<SuiteConfig> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SuiteConfig::from_toml_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SuiteConfig::default(),
    };
    if let Some(n) = &common.n {
        cfg.n = n.clone();
    }
    if let Some(l) = &common.lambda {
        cfg.lambda = l.clone();
    }
    if common.gamma.is_some() {
        cfg.gamma = common.gamma;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(eps) = common.inject_fault {
        cfg.fault = Some(Fault::MetricInverse(eps));
    }
    if common.sequential {
        cfg.execution = Execution::Sequential;
    }
    Ok(cfg)
}

fn only(cfg: &mut SuiteConfig, identities: bool, threshold: bool, calibration: bool) {
    cfg.identities = identities;
    cfg.threshold = threshold;
    cfg.calibration = calibration;
    cfg.flux.enabled = false;
    cfg.mincut.enabled = false;
}

fn configure(cmd: &Command) -> Result<(SuiteConfig, &Common)> {
    let (mut cfg, common) = match cmd {
        Command::Identities(c) | Command::Threshold(c) | Command::Verify(c) | Command::Flux(c) => (load(c)?, c),
        Command::Mincut(m) => (load(&m.common)?, &m.common),
        Command::Defaults => unreachable!("handled before configuration"),
    };
    match cmd {
        Command::Identities(c) => {
            only(&mut cfg, true, false, false);
            if let Some(k) = c.samples {
                cfg.samples.identities = k;
            }
            if let Some(s) = c.step {
                cfg.steps.hodge = s;
            }
            if let Some(t) = c.tol {
                cfg.tolerances.identity = t;
                cfg.tolerances.hodge_algebraic = t;
            }
        }
        Command::Threshold(c) => {
            only(&mut cfg, false, true, false);
            if let Some(t) = c.tol {
                cfg.tolerances.threshold = t;
            }
            if let Some(s) = c.step {
                cfg.steps.bisection = s;
            }
        }
        Command::Verify(c) => {
            only(&mut cfg, true, true, true);
            if let Some(k) = c.samples {
                let s = &mut cfg.samples;
                s.norm = k;
                s.plane = k;
                s.surface = k;
                s.divergence = k;
            }
            if let Some(s) = c.step {
                cfg.steps.divergence = vec![10.0 * s, s];
                cfg.steps.omega = vec![10.0 * s, s];
            }
            if let Some(t) = c.tol {
                cfg.tolerances.divergence = t;
            }
        }
        Command::Flux(c) => {
            only(&mut cfg, false, false, false);
            cfg.flux.enabled = true;
            if let Some(n) = &c.n {
                cfg.flux.box_n = n.clone();
                cfg.flux.tube_n = n.clone();
            }
            if let Some(l) = &c.lambda {
                match l.as_slice() {
                    [LambdaSpec::Value(v)] => cfg.flux.lambda = *v,
                    _ => bail!("flux takes a single numeric --lambda"),
                }
            }
            if let Some(t) = c.tol {
                cfg.tolerances.cone_face = t;
            }
        }
        Command::Mincut(m) => {
            only(&mut cfg, false, false, false);
            let mc = &mut cfg.mincut;
            mc.enabled = true;
            let c = &m.common;
            if c.n.is_some() || c.lambda.is_some() {
                let ns = c.n.clone().unwrap_or_else(|| mc.cases.iter().map(|k| k.n).collect());
                let ls = c.lambda.clone().unwrap_or_else(|| vec![LambdaSpec::Value(0.3)]);
                mc.cases = ns
                    .iter()
                    .flat_map(|&n| ls.iter().map(move |&lambda| MincutCase { n, lambda }))
                    .collect();
            }
            if let Some(h) = c.step {
                mc.spacing = h;
            }
            if let Some(t) = c.tol {
                mc.tolerance = t;
            }
            if let Some(r) = m.radius {
                mc.radius = r;
            }
            if m.shell.is_some() {
                mc.shell = m.shell;
            }
            if let Some(s) = m.stencil {
                mc.stencil = match s {
                    StencilArg::Nearest => Stencil::Nearest,
                    StencilArg::Crofton26 => Stencil::Crofton26,
                };
            }
            if let Some(md) = m.mode {
                mc.mode = match md {
                    ModeArg::Axisymmetric => LatticeMode::Axisymmetric,
                    ModeArg::Full => LatticeMode::Full,
                };
            }
            if let Some(p) = &m.probe {
                mc.probe_spacings = p.clone();
            }
            if m.no_validate {
                mc.validate = false;
            }
        }
        Command::Defaults => {}
    }
    Ok((cfg, common))
}

fn print_record(r: &CheckRecord) {
    let verdict = match r.pass {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "INFO",
    };
    let tol = r.tolerance.map_or(String::new(), |t| format!(" tol {t}"));
    println!(
        "{verdict} {:<28} n={} lambda={:.8} stat {:.6e}{tol}  {}",
        r.check, r.n, r.lambda, r.statistic, r.detail
    );
}

fn run(cli: Cli) -> Result<bool> {
    if let Command::Defaults = cli.command {
        print!("{}", SuiteConfig::default().to_toml_string()?);
        return Ok(true);
    }
    let (cfg, common) = configure(&cli.command)?;
    if let Command::Mincut(m) = &cli.command {
        if let Some(path) = &m.dump {
            let case = cfg.mincut.cases.first().context("no min-cut case")?;
            let p = build_lattice(&cfg.mincut.spec(case)?)?;
            std::fs::write(path, p.dump()).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {} nodes to {}", p.len(), path.display());
        }
    }
    let mut report: VerificationReport = run_suite(&cfg)?;
    report.stamp_now();
    for r in &report.records {
        if common.verbose || r.pass.is_some() {
            print_record(r);
        }
    }
    report
        .write_to(&common.out)
        .with_context(|| format!("writing report to {}", common.out.display()))?;
    let failed = report.failures().count();
    let judged = report.records.iter().filter(|r| r.pass.is_some()).count();
    eprintln!(
        "{} of {judged} verdicts passed; report in {}",
        judged - failed,
        common.out.display()
    );
    Ok(failed == 0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
