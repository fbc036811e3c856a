//! Command-line front end: operator dumps, identity verification, parameter
//! sweeps, dynamics trajectories, and the position-space ODE study.
//!
//! Exit status contract: 0 when every gated check passes, 1 when checks ran
//! and some failed, 2 on configuration or solver errors before any check.

mod checks;
mod config;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use qfock::dynamics::{self, ParameterPath, PathShape};
use qfock::flow;
use qfock::position::{self, Branch, Integrator};
use qfock::serial;
use qfock::similarity::{self, ColumnGauge};
use qfock::DeformParams;

use checks::CliError;
use config::FileConfig;
use report::{CheckRow, VerificationReport};

#[derive(Parser)]
#[command(name = "qfock", version, about = "Truncated Fock-space deformation toolkit")]
struct Cli {
    /// Key-value config file; command-line flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (joined under QFOCK_OUT_ROOT when relative).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, global = true, value_enum)]
    format: Option<ReportFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Write the ladder/quadrature operators and the displacement flow,
    /// with their identity checks.
    Operators {
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        u: Option<f64>,
        /// Interior block for conjugation identities (default dim/2).
        #[arg(long)]
        interior: Option<usize>,
    },
    /// Full-chain verification: solve, invert, build the pair, residual
    /// table.
    Verify {
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        u: Option<f64>,
        #[arg(long)]
        dim: Option<usize>,
        /// Interior block for pair identities (default dim/4).
        #[arg(long)]
        interior: Option<usize>,
        /// Override every upper-bound threshold (marks the report
        /// non-standard).
        #[arg(long)]
        residual_tol: Option<f64>,
    },
    /// Solver-level sweep over a parameter grid.
    Sweep {
        /// Comma-separated q values.
        #[arg(long, value_delimiter = ',')]
        q_list: Vec<f64>,
        /// Comma-separated u values.
        #[arg(long, value_delimiter = ',')]
        u_list: Vec<f64>,
        /// Comma-separated dimensions.
        #[arg(long, value_delimiter = ',')]
        dim_list: Vec<usize>,
    },
    /// Build a time-dependent trajectory and export per-frame residuals
    /// and the commutator drift.
    Dynamics {
        #[arg(long)]
        q: Option<f64>,
        /// Path spec: `const:U0`, `ramp:U0,RATE`, or `sin:U0,AMP,OMEGA`.
        #[arg(long)]
        path: Option<String>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        dim: Option<usize>,
        /// Also reconstruct both operators through the retarded Green form.
        #[arg(long)]
        green: bool,
        /// Re-run at h/2 and h/4 and report mid-frame residual ratios.
        #[arg(long)]
        convergence: bool,
        /// Rebuild under the comparison gauge and gate the drift series
        /// difference.
        #[arg(long)]
        gauge_check: bool,
        /// Dump every frame's matrices under frames/.
        #[arg(long)]
        dump_frames: bool,
    },
    /// Integrate the position-representation equation outward and classify
    /// growth.
    Ode {
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        u: Option<f64>,
        /// Frobenius branch seeding the solution.
        #[arg(long, value_enum, default_value = "r0")]
        branch: BranchArg,
        #[arg(long)]
        x_end: Option<f64>,
        /// Series order for the seed.
        #[arg(long)]
        order: Option<usize>,
        /// Also scan branch mixtures for square-integrability.
        #[arg(long)]
        scan: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BranchArg {
    R0,
    R1,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    config::configure_threads();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(2)
        }
    }
}

struct Stage {
    log: Vec<(String, f64)>,
    started: Instant,
    verbosity: u8,
}

impl Stage {
    fn new() -> Self {
        Self {
            log: Vec::new(),
            started: Instant::now(),
            verbosity: config::verbosity(),
        }
    }

    fn mark(&mut self, name: &str) {
        let secs = self.started.elapsed().as_secs_f64();
        if self.verbosity > 0 {
            eprintln!("[stage] {name}: {secs:.3}s");
        }
        self.log.push((name.to_string(), secs));
        self.started = Instant::now();
    }

    fn write_log(&self, dir: &Path) {
        let mut text = String::new();
        for (name, secs) in &self.log {
            text.push_str(&format!("{name}\t{secs:.6}\n"));
        }
        let _ = fs::write(dir.join("timing.log"), text);
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let file_config = match &cli.config {
        Some(path) => FileConfig::load(path).map_err(|message| CliError { message })?,
        None => FileConfig::empty(),
    };
    let out_dir = config::resolve_out_dir(cli.out.clone(), &file_config);
    fs::create_dir_all(&out_dir).map_err(|e| CliError {
        message: format!("cannot create output dir {}: {e}", out_dir.display()),
    })?;
    let format = cli.format.unwrap_or(
        match file_config.string("format").as_deref() {
            Some("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        },
    );

    match cli.command {
        Command::Operators { dim, u, interior } => {
            cmd_operators(&file_config, out_dir, format, dim, u, interior)
        }
        Command::Verify {
            q,
            u,
            dim,
            interior,
            residual_tol,
        } => cmd_verify(&file_config, out_dir, format, q, u, dim, interior, residual_tol),
        Command::Sweep {
            q_list,
            u_list,
            dim_list,
        } => cmd_sweep(&file_config, out_dir, format, q_list, u_list, dim_list),
        Command::Dynamics {
            q,
            path,
            t_end,
            h,
            dim,
            green,
            convergence,
            gauge_check,
            dump_frames,
        } => cmd_dynamics(
            &file_config,
            out_dir,
            format,
            q,
            path,
            t_end,
            h,
            dim,
            green,
            convergence,
            gauge_check,
            dump_frames,
        ),
        Command::Ode {
            q,
            u,
            branch,
            x_end,
            order,
            scan,
        } => cmd_ode(&file_config, out_dir, format, q, u, branch, x_end, order, scan),
    }
}

fn require<T>(value: Option<T>, name: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError {
        message: format!("missing required parameter --{name} (flag or config)"),
    })
}

/// JSON has no infinities; non-finite diagnostics become a tag string.
fn finite_or_tag(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else {
        serde_json::json!("beyond-binary64")
    }
}

fn write_report(
    dir: &Path,
    format: ReportFormat,
    report: &VerificationReport,
    stage: &Stage,
) -> Result<(), CliError> {
    let (name, text) = match format {
        ReportFormat::Json => ("report.json", report.to_json()),
        ReportFormat::Csv => ("report.csv", report.to_csv()),
    };
    fs::write(dir.join(name), text).map_err(|e| CliError {
        message: format!("cannot write report: {e}"),
    })?;
    stage.write_log(dir);
    Ok(())
}

fn cmd_operators(
    file_config: &FileConfig,
    out_dir: PathBuf,
    format: ReportFormat,
    dim: Option<usize>,
    u: Option<f64>,
    interior: Option<usize>,
) -> Result<bool, CliError> {
    let mut stage = Stage::new();
    let d = require(dim.or(file_config.usize("dim")?), "dim")?;
    let u = require(u.or(file_config.f64("u")?), "u")?;
    let k = interior.or(file_config.usize("interior")?).unwrap_or(d / 2);
    if d < 2 {
        return Err(CliError {
            message: format!("dimension must be at least 2, got {d}"),
        });
    }
    if k == 0 || k > d {
        return Err(CliError {
            message: format!("interior block {k} out of range for dimension {d}"),
        });
    }

    let named: [(&str, qfock::FockMatrix); 6] = [
        ("a", fock_op(d, qfock::fock::annihilation)?),
        ("a_dagger", fock_op(d, qfock::fock::creation)?),
        ("n", fock_op(d, qfock::fock::number)?),
        ("q", fock_op(d, qfock::fock::position)?),
        ("p", fock_op(d, qfock::fock::momentum)?),
        ("t_u", flow::displacement(u, d)?.matrix().clone()),
    ];
    for (name, m) in &named {
        serial::write_matrix(&out_dir.join(format!("{name}.json")), m)?;
    }
    stage.mark("write-operators");

    let rows = checks::operator_checks(d, u, k)?;
    stage.mark("identity-checks");

    let mut report = VerificationReport::new(
        serde_json::json!({"command": "operators", "dim": d, "u": u, "interior": k}),
        false,
    );
    report.checks = rows;
    report.stage_seconds = stage.log.clone();
    write_report(&out_dir, format, &report, &stage)?;
    Ok(report.all_passed())
}

fn fock_op(
    d: usize,
    f: fn(usize) -> Result<qfock::FockMatrix, qfock::FockError>,
) -> Result<qfock::FockMatrix, CliError> {
    Ok(f(d)?)
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    file_config: &FileConfig,
    out_dir: PathBuf,
    format: ReportFormat,
    q: Option<f64>,
    u: Option<f64>,
    dim: Option<usize>,
    interior: Option<usize>,
    residual_tol: Option<f64>,
) -> Result<bool, CliError> {
    let mut stage = Stage::new();
    let q = require(q.or(file_config.f64("q")?), "q")?;
    let u = require(u.or(file_config.f64("u")?), "u")?;
    let d = require(dim.or(file_config.usize("dim")?), "dim")?;
    let mut params = DeformParams::new(q, u, d)?;
    if let Some(k) = interior.or(file_config.usize("interior")?) {
        params = params.with_interior(k)?;
    }

    // Solver failures (no-solution, overflow) abort before any check runs.
    let sol = similarity::solve(&params)?;
    stage.mark("solve-similarity");
    fs::write(
        out_dir.join("similarity_report.json"),
        serde_json::to_string_pretty(&sol.report()).expect("report serializes"),
    )
    .map_err(|e| CliError {
        message: format!("cannot write sidecar: {e}"),
    })?;
    serial::write_matrix(&out_dir.join("s.json"), sol.s())?;

    let mut rows = checks::similarity_checks(&params, &sol, residual_tol);
    stage.mark("similarity-checks");

    let flow = flow::displacement(u, d)?;
    rows.extend(checks::pair_checks(&params, &sol, &flow, residual_tol)?);
    stage.mark("pair-checks");

    rows.extend(checks::bracket_checks(d, q)?);
    stage.mark("bracket-checks");

    let mut report = VerificationReport::new(
        serde_json::json!({
            "command": "verify", "q": q, "u": u, "dim": d,
            "interior": params.interior.k(),
        }),
        residual_tol.is_some(),
    );
    report.checks = rows;
    report.diagnostics = serde_json::json!({
        "condition_estimate": finite_or_tag(sol.condition_estimate()),
        "condition_interior": finite_or_tag(sol.condition_interior()),
        "resonance_flags": sol.resonance_flags().len(),
        "trivial_branch": params.is_trivial(),
    });
    report.stage_seconds = stage.log.clone();
    write_report(&out_dir, format, &report, &stage)?;
    Ok(report.all_passed())
}

#[derive(Serialize, Clone)]
struct SweepRow {
    q: f64,
    u: f64,
    dim: usize,
    status: String,
    sylvester_max: Option<f64>,
    inversion_residual: Option<f64>,
    condition_estimate: Option<f64>,
    condition_interior: Option<f64>,
    nonunitarity: Option<f64>,
    resonance_count: Option<usize>,
    pass: bool,
}

fn cmd_sweep(
    file_config: &FileConfig,
    out_dir: PathBuf,
    format: ReportFormat,
    q_list: Vec<f64>,
    u_list: Vec<f64>,
    dim_list: Vec<usize>,
) -> Result<bool, CliError> {
    let mut stage = Stage::new();
    let q_list = if q_list.is_empty() {
        vec![require(file_config.f64("q")?, "q-list")?]
    } else {
        q_list
    };
    let u_list = if u_list.is_empty() {
        vec![require(file_config.f64("u")?, "u-list")?]
    } else {
        u_list
    };
    let dim_list = if dim_list.is_empty() {
        vec![require(file_config.usize("dim")?, "dim-list")?]
    } else {
        dim_list
    };

    // Deterministic grid order regardless of completion order.
    let mut grid = Vec::new();
    for &q in &q_list {
        for &u in &u_list {
            for &d in &dim_list {
                grid.push((q, u, d));
            }
        }
    }
    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&(q, u, d)| sweep_point(q, u, d))
        .collect();
    stage.mark("sweep");

    let all_pass = rows.iter().all(|r| r.pass);
    match format {
        ReportFormat::Json => {
            let doc = serde_json::json!({
                "tool_version": format!("qfock {}", env!("CARGO_PKG_VERSION")),
                "command": "sweep",
                "rows": rows,
            });
            fs::write(
                out_dir.join("sweep.json"),
                serde_json::to_string_pretty(&doc).expect("serializes"),
            )
        }
        ReportFormat::Csv => {
            let mut text = String::from(
                "q,u,dim,status,sylvester_max,inversion_residual,condition_estimate,condition_interior,nonunitarity,resonance_count,pass\n",
            );
            for r in &rows {
                let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                text.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{}\n",
                    r.q,
                    r.u,
                    r.dim,
                    r.status,
                    opt(r.sylvester_max),
                    opt(r.inversion_residual),
                    opt(r.condition_estimate),
                    opt(r.condition_interior),
                    opt(r.nonunitarity),
                    r.resonance_count.map(|x| x.to_string()).unwrap_or_default(),
                    r.pass
                ));
            }
            fs::write(out_dir.join("sweep.csv"), text)
        }
    }
    .map_err(|e| CliError {
        message: format!("cannot write sweep table: {e}"),
    })?;
    stage.write_log(&out_dir);
    Ok(all_pass)
}

fn sweep_point(q: f64, u: f64, d: usize) -> SweepRow {
    let base = SweepRow {
        q,
        u,
        dim: d,
        status: String::new(),
        sylvester_max: None,
        inversion_residual: None,
        condition_estimate: None,
        condition_interior: None,
        nonunitarity: None,
        resonance_count: None,
        pass: false,
    };
    let params = match DeformParams::new(q, u, d) {
        Ok(p) => p,
        Err(e) => {
            return SweepRow {
                status: format!("invalid: {e}"),
                ..base
            }
        }
    };
    match similarity::solve(&params) {
        Ok(sol) => {
            let sylvester = sol
                .sylvester_residual()
                .iter()
                .fold(0.0f64, |a, r| a.max(*r));
            let inv = sol.inversion_residual().unwrap_or(f64::INFINITY);
            let pass = sylvester < 1e-10 && inv <= 1e-6;
            SweepRow {
                status: "ok".into(),
                sylvester_max: Some(sylvester),
                inversion_residual: Some(inv),
                condition_estimate: Some(sol.condition_estimate()),
                condition_interior: Some(sol.condition_interior()),
                nonunitarity: Some(similarity::nonunitarity_certificate(&sol)),
                resonance_count: Some(sol.resonance_flags().len()),
                pass,
                ..base
            }
        }
        Err(e) => SweepRow {
            status: format!("error: {e}"),
            ..base
        },
    }
}

fn parse_path_shape(spec: &str) -> Result<PathShape, CliError> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let nums: Vec<f64> = rest
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError {
            message: format!("bad path spec `{spec}`: {e}"),
        })?;
    match (kind, nums.as_slice()) {
        ("const", [u0]) => Ok(PathShape::Constant { u0: *u0 }),
        ("ramp", [u0, rate]) => Ok(PathShape::Ramp {
            u0: *u0,
            rate: *rate,
        }),
        ("sin", [u0, amplitude, omega]) => Ok(PathShape::Sinusoid {
            u0: *u0,
            amplitude: *amplitude,
            omega: *omega,
        }),
        _ => Err(CliError {
            message: format!(
                "bad path spec `{spec}`: expected const:U0 | ramp:U0,RATE | sin:U0,AMP,OMEGA"
            ),
        }),
    }
}

#[derive(Serialize)]
struct FrameRecord {
    t: f64,
    residual_lowering: f64,
    residual_raising: f64,
    drift: f64,
    condition_estimate: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_dynamics(
    file_config: &FileConfig,
    out_dir: PathBuf,
    format: ReportFormat,
    q: Option<f64>,
    path_spec: Option<String>,
    t_end: Option<f64>,
    h: Option<f64>,
    dim: Option<usize>,
    green: bool,
    convergence: bool,
    gauge_check: bool,
    dump_frames: bool,
) -> Result<bool, CliError> {
    let mut stage = Stage::new();
    let q = require(q.or(file_config.f64("q")?), "q")?;
    let spec = require(path_spec.or(file_config.string("path")), "path")?;
    let shape = parse_path_shape(&spec)?;
    let t_end = require(t_end.or(file_config.f64("t_end")?), "t-end")?;
    let h = require(h.or(file_config.f64("h")?), "h")?;
    let d = require(dim.or(file_config.usize("dim")?), "dim")?;

    let path = ParameterPath {
        shape,
        q,
        t_end,
        h,
    };
    let traj = dynamics::build_trajectory(&path, d)?;
    stage.mark("trajectory");

    let drift = dynamics::commutator_drift(&traj);
    stage.mark("drift");

    let records: Vec<FrameRecord> = traj
        .frames
        .iter()
        .zip(&drift)
        .map(|(f, (_, dr))| FrameRecord {
            t: f.t,
            residual_lowering: f.residual_lowering,
            residual_raising: f.residual_raising,
            drift: *dr,
            condition_estimate: f.condition_estimate,
        })
        .collect();

    let mut extras = serde_json::Map::new();
    let mut gated_rows: Vec<CheckRow> = Vec::new();

    if green {
        let low = dynamics::green_reconstruct(&traj, dynamics::PairSide::Lowering)?;
        let high = dynamics::green_reconstruct(&traj, dynamics::PairSide::Raising)?;
        extras.insert(
            "green".into(),
            serde_json::json!({
                "lowering_deviation": low.deviation,
                "raising_deviation": high.deviation,
            }),
        );
        stage.mark("green");
    }
    if convergence {
        let mut panel = Vec::new();
        for halving in 0..3 {
            let refined = ParameterPath {
                h: h / 2f64.powi(halving),
                ..path.clone()
            };
            let t = dynamics::build_trajectory(&refined, d)?;
            let res = dynamics::modified_eom_residual(&t)?;
            let mid = res[res.len() / 2];
            panel.push(serde_json::json!({
                "h": refined.h,
                "residual_lowering": mid.lowering,
                "residual_raising": mid.raising,
            }));
        }
        extras.insert("convergence".into(), serde_json::Value::Array(panel));
        stage.mark("convergence");
    }
    if gauge_check {
        let other = dynamics::build_trajectory_with_gauge(&path, d, ColumnGauge::L2)?;
        let drift_l2 = dynamics::commutator_drift(&other);
        let worst = drift
            .iter()
            .zip(&drift_l2)
            .map(|((_, a), (_, b))| (a - b).abs() / a.abs().max(1.0))
            .fold(0.0f64, f64::max);
        gated_rows.push(CheckRow::upper("drift.gauge-invariance", traj.block.k(), "max-abs", worst, 1e-8));
        stage.mark("gauge-check");
    }
    if dump_frames {
        let frame_dir = out_dir.join("frames");
        fs::create_dir_all(&frame_dir).map_err(|e| CliError {
            message: format!("cannot create frames dir: {e}"),
        })?;
        for (i, f) in traj.frames.iter().enumerate() {
            serial::write_matrix(&frame_dir.join(format!("{i:05}_lowering.json")), &f.lowering)?;
            serial::write_matrix(&frame_dir.join(format!("{i:05}_raising.json")), &f.raising)?;
            serial::write_matrix(&frame_dir.join(format!("{i:05}_sim.json")), &f.sim)?;
        }
        stage.mark("dump-frames");
    }

    let all_pass = gated_rows.iter().all(|c| c.pass);
    match format {
        ReportFormat::Json => {
            let doc = serde_json::json!({
                "tool_version": format!("qfock {}", env!("CARGO_PKG_VERSION")),
                "command": "dynamics",
                "config": {"q": q, "path": spec, "t_end": t_end, "h": h, "dim": d},
                "frames": records,
                "checks": gated_rows,
                "extras": extras,
            });
            fs::write(
                out_dir.join("trajectory.json"),
                serde_json::to_string_pretty(&doc).expect("serializes"),
            )
        }
        ReportFormat::Csv => {
            let mut text =
                String::from("t,residual_lowering,residual_raising,drift,condition_estimate\n");
            for r in &records {
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.t, r.residual_lowering, r.residual_raising, r.drift, r.condition_estimate
                ));
            }
            fs::write(out_dir.join("trajectory.csv"), text)
        }
    }
    .map_err(|e| CliError {
        message: format!("cannot write trajectory: {e}"),
    })?;
    stage.write_log(&out_dir);
    Ok(all_pass)
}

#[allow(clippy::too_many_arguments)]
fn cmd_ode(
    file_config: &FileConfig,
    out_dir: PathBuf,
    format: ReportFormat,
    q: Option<f64>,
    u: Option<f64>,
    branch: BranchArg,
    x_end: Option<f64>,
    order: Option<usize>,
    scan: bool,
) -> Result<bool, CliError> {
    let mut stage = Stage::new();
    let q = require(q.or(file_config.f64("q")?), "q")?;
    let u = u.or(file_config.f64("u")?).unwrap_or(0.0);
    let x_end = x_end.or(file_config.f64("x_end")?).unwrap_or(4.0);
    let order = order
        .or(file_config.usize("order")?)
        .unwrap_or(position::DEFAULT_SEED_ORDER);
    let branch = match branch {
        BranchArg::R0 => Branch::R0,
        BranchArg::R1 => Branch::R1,
    };

    let problem = position::OdeProblem::new(q, u)?;
    let seed = position::FrobeniusSeries::build(&problem, branch, order)?;
    let state = seed.eval(position::DEFAULT_SEED_X)?;
    let primary = position::integrate_from(
        &problem,
        branch,
        position::DEFAULT_SEED_X,
        state,
        x_end,
        Integrator::DormandPrince54,
    )?;
    let secondary = position::integrate_from(
        &problem,
        branch,
        position::DEFAULT_SEED_X,
        state,
        x_end,
        Integrator::ClassicRk4,
    )?;
    stage.mark("integrate");

    // Solution table: plain text with header metadata.
    let mut table = String::new();
    table.push_str(&format!("# q = {q}\n# u = {u}\n"));
    table.push_str(&format!("# branch = {}\n# method = dormand-prince-54\n", branch.name()));
    table.push_str("# x\tpsi\tdpsi\n");
    for ((x, v), dv) in primary
        .grid
        .iter()
        .zip(&primary.values)
        .zip(&primary.derivatives)
    {
        table.push_str(&format!("{x}\t{v}\t{dv}\n"));
    }
    fs::write(out_dir.join("solution.txt"), table).map_err(|e| CliError {
        message: format!("cannot write solution table: {e}"),
    })?;

    let dual_gap = {
        let va = *primary.values.last().unwrap();
        let vb = *secondary.values.last().unwrap();
        ((va - vb) / va.abs().max(1e-300)).abs()
    };
    let (r0, r1) = position::indicial_exponents(q)?;
    // Independent oracle: indicial roots from numerically extracted pole
    // coefficients.
    let indicial_gap = {
        let x = 1e-7;
        let (phi1, phi2) = position::ode_coefficients(x, &problem)?;
        let p0 = x * phi1;
        let q0 = x * x * phi2;
        let half = (p0 - 1.0) / 2.0;
        let disc = (half * half - q0).sqrt();
        let (ohi, olo) = (-half + disc, -half - disc);
        let (hi, lo) = if r0 >= r1 { (r0, r1) } else { (r1, r0) };
        (hi - ohi).abs().max((lo - olo).abs())
    };
    let pole_order = position::infinity_pole_order(&problem);

    let mut report = VerificationReport::new(
        serde_json::json!({
            "command": "ode", "q": q, "u": u, "branch": branch.name(),
            "x_end": x_end, "order": order,
        }),
        false,
    );
    report.checks = vec![
        CheckRow::upper("ode.indicial", 0, "abs", indicial_gap, 1e-6),
        CheckRow::upper("ode.dual-integrator", 0, "relative", dual_gap, 1e-6),
        CheckRow::lower("ode.infinity-pole", 0, "order", pole_order, 5.5),
    ];
    let mut diagnostics = serde_json::json!({
        "growth_class": primary.growth_class,
        "envelope_slope": primary.envelope_slope,
        "l2_partial": primary.l2_partial,
        "indicial_exponents": [r0, r1],
        "infinity_pole_order": pole_order,
    });
    if scan {
        let thetas: Vec<f64> = (0..13)
            .map(|i| i as f64 * std::f64::consts::PI / 12.0)
            .collect();
        let scan_report = position::square_integrability_scan(&problem, &thetas, x_end)?;
        diagnostics["scan"] = serde_json::to_value(&scan_report).expect("serializes");
        stage.mark("scan");
    }
    report.diagnostics = diagnostics;
    report.stage_seconds = stage.log.clone();
    write_report(&out_dir, format, &report, &stage)?;
    Ok(report.all_passed())
}
