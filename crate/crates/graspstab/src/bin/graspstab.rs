//! Command-line front end.
//!
//! Every subcommand reads a grasp description file (see the `io` module for
//! the schema) and runs one of the library queries against it. Exit codes
//! are part of the interface:
//!
//! - `0` — stable / feasible / closure
//! - `1` — unstable / infeasible / no closure
//! - `2` — usage or input error
//! - `3` — solver resource limit or nonconvergence
//!
//! Set `GRASPSTAB_LOG` to `error` (default), `info`, or `debug` for
//! diagnostics on stderr. Sweeps run on all cores unless `--workers` says
//! otherwise.

use std::io::Write as _;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{Vector3, Vector6};

use graspstab::grasp::{GraspModel, SpatialGrasp};
use graspstab::io::{format_g12, parse_grasp_file, SolveDefaults};
use graspstab::iterative::IterativeError;
use graspstab::planar::{
    complete_slip_states, enumerate_detach_states, planar_stability, PlanarOutcome,
};
use graspstab::queries::{
    force_closure_check, force_map, max_disturbance, optimize_actuators, planar_force_map,
    planar_max_disturbance, stability_check, ActuatorOutcome, DisturbanceBound, MapPlane, MapRow,
    QueryConfig, QueryError, RowStatus, SolverChoice, StabilityVerdict,
};
use graspstab::relaxation::RelaxError;
use graspstab::solver::SolveError;

#[derive(Parser)]
#[command(
    name = "graspstab",
    version,
    about = "Quasi-static stability analysis of robotic grasps with passive effects",
    after_help = "Exit codes: 0 stable/feasible, 1 unstable/infeasible/no-closure, \
                  2 usage or input error, 3 solver limit or nonconvergence.\n\
                  Environment: GRASPSTAB_LOG=error|info|debug."
)]
struct Cli {
    /// Worker threads for map and sweep rows (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide whether the grasp passively resists an applied wrench.
    Check(CheckArgs),
    /// Largest disturbance magnitude resisted along a direction.
    Maxdist(MaxdistArgs),
    /// Commanded torques that hold a wrench with the lowest peak torque.
    Optimize(OptimizeArgs),
    /// Polar map of the maximum resistible disturbance over a plane.
    Map(MapArgs),
    /// Enumerate the contact states of a planar grasp.
    #[command(name = "enum2d")]
    Enum2d(FileArg),
    /// Sweep one actuator's command and track the resistible disturbance.
    #[command(name = "sweep-preload")]
    SweepPreload(SweepArgs),
    /// Force-closure baseline test (friction cone edges positively span).
    Closure(FileArg),
}

#[derive(Args)]
struct FileArg {
    /// Grasp description file (JSON).
    file: String,
}

#[derive(Args, Clone, Copy)]
struct SolverOpts {
    /// Analysis engine.
    #[arg(long, value_enum, default_value_t = Engine::Relaxation)]
    solver: Engine,
    /// Normal-uncertainty half-angle in degrees (relaxation engine).
    #[arg(long, value_name = "DEG")]
    eta: Option<f64>,
    /// Relaxation resolution exponent: finest cone sector spans 90°/2^q.
    #[arg(long, value_name = "Q")]
    q: Option<u32>,
    /// Largest disturbance magnitude searched, newtons.
    #[arg(long, value_name = "N")]
    cap: Option<f64>,
    /// Bisection tolerance in newtons (iterative engine).
    #[arg(long, value_name = "N")]
    tol: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Engine {
    /// Exact passive-stability test on a refined friction-cone relaxation.
    Relaxation,
    /// Movement-constrained iteration tracking the net wrench.
    Iterative,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    file: FileArg,
    /// Applied wrench: fx,fy,fz,tx,ty,tz (N, Nm); planar grasps take fx,fy,tz.
    #[arg(long = "w", value_name = "WRENCH", allow_hyphen_values = true)]
    wrench: String,
    #[command(flatten)]
    opts: SolverOpts,
}

#[derive(Args)]
struct MaxdistArgs {
    #[command(flatten)]
    file: FileArg,
    /// Disturbance direction: fx,fy,fz,tx,ty,tz; planar grasps take fx,fy,tz.
    /// Normalized before use.
    #[arg(long, value_name = "WRENCH", allow_hyphen_values = true)]
    dir: String,
    #[command(flatten)]
    opts: SolverOpts,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    file: FileArg,
    /// Wrench the optimized torques must hold: fx,fy,fz,tx,ty,tz.
    #[arg(long = "w", value_name = "WRENCH", allow_hyphen_values = true)]
    wrench: String,
    #[command(flatten)]
    opts: SolverOpts,
}

#[derive(Args)]
struct MapArgs {
    #[command(flatten)]
    file: FileArg,
    /// Sweep plane: xy, xz, yz (forces), txty, txtz, tytz (torques), or a
    /// custom "u1,..,u6;v1,..,v6" basis pair.
    #[arg(long, default_value = "xy")]
    plane: String,
    /// Angular step in degrees; must divide 360.
    #[arg(long, default_value_t = 1.0, value_name = "DEG")]
    step: f64,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<String>,
    /// Allow a basis mixing force and torque components (units differ!).
    #[arg(long)]
    allow_mixed: bool,
    #[command(flatten)]
    opts: SolverOpts,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    file: FileArg,
    /// Index of the actuator whose command is swept.
    #[arg(long)]
    actuator: usize,
    /// First commanded value (N or Nm per the transmission).
    #[arg(long, allow_hyphen_values = true)]
    from: f64,
    /// Last commanded value.
    #[arg(long, allow_hyphen_values = true)]
    to: f64,
    /// Number of evenly spaced sweep points.
    #[arg(long, default_value_t = 11)]
    points: usize,
    /// Disturbance direction to bound at each point (6 components).
    #[arg(long, value_name = "WRENCH", allow_hyphen_values = true)]
    dir: String,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<String>,
    #[command(flatten)]
    opts: SolverOpts,
}

fn main() {
    init_logging();
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            std::process::exit(input_error("--workers must be at least 1"));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            std::process::exit(input_error(format!("cannot size the worker pool: {e}")));
        }
    }
    let code = match cli.command {
        Cmd::Check(args) => run_check(args),
        Cmd::Maxdist(args) => run_maxdist(args),
        Cmd::Optimize(args) => run_optimize(args),
        Cmd::Map(args) => run_map(args),
        Cmd::Enum2d(args) => run_enum2d(args),
        Cmd::SweepPreload(args) => run_sweep(args),
        Cmd::Closure(args) => run_closure(args),
    };
    std::process::exit(code);
}

fn init_logging() {
    let level = std::env::var("GRASPSTAB_LOG").unwrap_or_else(|_| "error".into());
    let filter = match level.as_str() {
        "" | "error" => log::LevelFilter::Error,
        "info" => log::LevelFilter::Info,
        "debug" => log::LevelFilter::Debug,
        other => {
            eprintln!("warning: GRASPSTAB_LOG takes error|info|debug, ignoring {other:?}");
            log::LevelFilter::Error
        }
    };
    env_logger::Builder::new()
        .filter_level(filter)
        .format_timestamp(None)
        .init();
}

fn input_error(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    2
}

fn query_error(e: &QueryError) -> i32 {
    let code = match e {
        QueryError::Grasp(_) | QueryError::Config(_) => 2,
        QueryError::Relaxation(r) => match r {
            RelaxError::Grasp(_) | RelaxError::Config(_) => 2,
            RelaxError::Solver { source, .. } => solve_error(source),
            RelaxError::IterationLimit(_) => 3,
        },
        QueryError::Iterative(i) => match i {
            IterativeError::Grasp(_) | IterativeError::Config(_) => 2,
            IterativeError::Solver(source) => solve_error(source),
        },
        QueryError::Solver(source) => solve_error(source),
    };
    eprintln!("error: {e}");
    code
}

fn solve_error(e: &SolveError) -> i32 {
    match e {
        SolveError::InvalidModel(_) => 2,
        SolveError::NodeLimit { .. } | SolveError::Numeric(_) => 3,
    }
}

/// Loads a grasp file and folds its solver block plus the command-line
/// overrides into a query configuration.
fn load(
    path: &str,
    opts: &SolverOpts,
) -> Result<(GraspModel, SolveDefaults, QueryConfig), i32> {
    let file = parse_grasp_file(path).map_err(input_error)?;
    let mut cfg = QueryConfig::default();
    file.defaults.apply(&mut cfg);
    if let Some(eta) = opts.eta {
        if !(0.0..90.0).contains(&eta) {
            return Err(input_error("--eta must lie in [0, 90) degrees"));
        }
        cfg.relaxation.eta = eta.to_radians();
    }
    if let Some(q) = opts.q {
        cfg.relaxation.resolution_exponent = q;
    }
    if let Some(cap) = opts.cap {
        if !(cap > 0.0) {
            return Err(input_error("--cap must be positive"));
        }
        cfg.cap = cap;
    }
    if let Some(tol) = opts.tol {
        if !(tol > 0.0) {
            return Err(input_error("--tol must be positive"));
        }
        cfg.tolerance = tol;
    }
    Ok((file.model, file.defaults, cfg))
}

fn engine(opts: &SolverOpts) -> SolverChoice {
    match opts.solver {
        Engine::Relaxation => SolverChoice::Relaxation,
        Engine::Iterative => SolverChoice::Iterative,
    }
}

fn parse_numbers(text: &str, expected: usize, what: &str) -> Result<Vec<f64>, i32> {
    let parts: Result<Vec<f64>, _> = text.split(',').map(|p| p.trim().parse::<f64>()).collect();
    match parts {
        Ok(vals) if vals.len() == expected && vals.iter().all(|v| v.is_finite()) => Ok(vals),
        Ok(vals) if vals.len() != expected => Err(input_error(format!(
            "{what} takes {expected} comma-separated numbers, got {}",
            vals.len()
        ))),
        _ => Err(input_error(format!("{what} must be {expected} comma-separated numbers"))),
    }
}

fn commanded_of(g: &SpatialGrasp) -> Vec<f64> {
    g.hand.commanded.iter().copied().collect()
}

fn run_check(args: CheckArgs) -> i32 {
    let (model, _, cfg) = match load(&args.file.file, &args.opts) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let started = Instant::now();
    match model {
        GraspModel::Planar(g) => {
            let w = match parse_numbers(&args.wrench, 3, "--w (planar: fx,fy,tz)") {
                Ok(v) => Vector3::new(v[0], v[1], v[2]),
                Err(code) => return code,
            };
            match planar_stability(&g, &w) {
                Ok(PlanarOutcome::Stable(sol)) => {
                    log::info!("decided in {:?}", started.elapsed());
                    log::debug!("witness contact forces: {:?}", sol.contact_forces.as_slice());
                    println!("stable");
                    0
                }
                Ok(PlanarOutcome::Unstable) => {
                    println!("unstable");
                    1
                }
                Err(e) => input_error(e),
            }
        }
        GraspModel::Spatial(g) => {
            let w = match parse_numbers(&args.wrench, 6, "--w") {
                Ok(v) => Vector6::from_row_slice(&v),
                Err(code) => return code,
            };
            match stability_check(&g, &commanded_of(&g), &w, engine(&args.opts), &cfg) {
                Ok(StabilityVerdict::Stable) => {
                    log::info!("decided in {:?}", started.elapsed());
                    println!("stable");
                    0
                }
                Ok(StabilityVerdict::Unstable) => {
                    println!("unstable");
                    1
                }
                Ok(StabilityVerdict::NotConverged) => {
                    println!("not converged");
                    3
                }
                Err(e) => query_error(&e),
            }
        }
    }
}

fn describe(bound: &DisturbanceBound) -> String {
    match bound {
        DisturbanceBound::Bounded(s) => format!("max {} N", format_g12(*s)),
        DisturbanceBound::UnboundedAboveCap(cap) => {
            format!("unbounded above the {} N cap", format_g12(*cap))
        }
        DisturbanceBound::Infeasible => "infeasible: no equilibrium even undisturbed".into(),
    }
}

fn run_maxdist(args: MaxdistArgs) -> i32 {
    let (model, _, cfg) = match load(&args.file.file, &args.opts) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let result = match model {
        GraspModel::Planar(g) => {
            let dir = match unit_direction(&args.dir, 3) {
                Ok(v) => Vector3::from_row_slice(&v),
                Err(code) => return code,
            };
            planar_max_disturbance(&g, &dir, &cfg)
        }
        GraspModel::Spatial(g) => {
            let dir = match unit_direction(&args.dir, 6) {
                Ok(v) => Vector6::from_row_slice(&v),
                Err(code) => return code,
            };
            max_disturbance(&g, &commanded_of(&g), &dir, engine(&args.opts), &cfg)
        }
    };
    match result {
        Ok(bound) => {
            println!("{}", describe(&bound));
            match bound {
                DisturbanceBound::Infeasible => 1,
                _ => 0,
            }
        }
        Err(e) => query_error(&e),
    }
}

/// Parses a direction and scales it to unit length (directions carry no
/// magnitude; the file-side strictness about unit normals does not apply).
fn unit_direction(text: &str, len: usize) -> Result<Vec<f64>, i32> {
    let v = parse_numbers(text, len, "--dir")?;
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= 0.0 {
        return Err(input_error("--dir must be nonzero"));
    }
    Ok(v.into_iter().map(|x| x / norm).collect())
}

fn run_optimize(args: OptimizeArgs) -> i32 {
    let (model, _, cfg) = match load(&args.file.file, &args.opts) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let g = match model {
        GraspModel::Spatial(g) => g,
        GraspModel::Planar(_) => {
            return input_error("optimize needs a spatial grasp (planar hands are not modeled)")
        }
    };
    let w = match parse_numbers(&args.wrench, 6, "--w") {
        Ok(v) => Vector6::from_row_slice(&v),
        Err(code) => return code,
    };
    match optimize_actuators(&g, &w, &[], &cfg) {
        Ok(ActuatorOutcome::Optimal(opt)) => {
            let parts: Vec<String> = opt.commanded.iter().map(|t| format_g12(*t)).collect();
            println!("peak {}", format_g12(opt.objective));
            println!("commanded {}", parts.join(","));
            0
        }
        Ok(ActuatorOutcome::Infeasible) => {
            println!("infeasible");
            1
        }
        Err(e) => query_error(&e),
    }
}

fn named_plane(name: &str) -> Option<(usize, usize)> {
    match name {
        "xy" => Some((0, 1)),
        "xz" => Some((0, 2)),
        "yz" => Some((1, 2)),
        "txty" => Some((3, 4)),
        "txtz" => Some((3, 5)),
        "tytz" => Some((4, 5)),
        _ => None,
    }
}

fn pure_kind(v: &Vector6<f64>) -> Option<&'static str> {
    let force = v.fixed_rows::<3>(0).norm();
    let torque = v.fixed_rows::<3>(3).norm();
    if torque == 0.0 {
        Some("force")
    } else if force == 0.0 {
        Some("torque")
    } else {
        None
    }
}

fn parse_plane(spec: &str, step: f64, allow_mixed: bool) -> Result<MapPlane, i32> {
    let (u, v) = if let Some((i, j)) = named_plane(spec) {
        let mut u = Vector6::zeros();
        let mut v = Vector6::zeros();
        u[i] = 1.0;
        v[j] = 1.0;
        (u, v)
    } else {
        let Some((ut, vt)) = spec.split_once(';') else {
            return Err(input_error(format!(
                "--plane takes xy|xz|yz|txty|txtz|tytz or \"u1,..,u6;v1,..,v6\" (got {spec:?})"
            )));
        };
        let ul = parse_numbers(ut, 6, "--plane u basis")?;
        let vl = parse_numbers(vt, 6, "--plane v basis")?;
        let mut u = Vector6::from_row_slice(&ul);
        let mut v = Vector6::from_row_slice(&vl);
        if !allow_mixed {
            match (pure_kind(&u), pure_kind(&v)) {
                (Some(a), Some(b)) if a == b => {}
                _ => {
                    return Err(input_error(
                        "plane mixes force and torque components, whose units differ; \
                         pass --allow-mixed to sweep it anyway",
                    ))
                }
            }
        }
        if u.norm() == 0.0 || v.norm() == 0.0 {
            return Err(input_error("plane basis vectors must be nonzero"));
        }
        u /= u.norm();
        v /= v.norm();
        (u, v)
    };
    Ok(MapPlane { u, v, step_deg: step })
}

fn emit_rows(
    out: Option<&str>,
    header: &str,
    rows: impl Iterator<Item = String>,
) -> Result<(), i32> {
    let body: String = std::iter::once(header.to_string())
        .chain(rows)
        .map(|line| line + "\n")
        .collect();
    match out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| input_error(format!("cannot write {path}: {e}"))),
        None => {
            print!("{body}");
            std::io::stdout().flush().ok();
            Ok(())
        }
    }
}

fn map_row_line(row: &MapRow) -> String {
    let status = match row.status {
        RowStatus::Ok => "ok",
        RowStatus::Capped => "capped",
        RowStatus::Error => "error",
    };
    format!("{},{},{}", format_g12(row.angle_deg), format_g12(row.magnitude), status)
}

fn run_map(args: MapArgs) -> i32 {
    let (model, _, cfg) = match load(&args.file.file, &args.opts) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let started = Instant::now();
    let rows: Result<Vec<MapRow>, QueryError> = match &model {
        GraspModel::Planar(g) => {
            if args.plane != "xy" {
                return input_error("planar grasps only support --plane xy");
            }
            planar_force_map(g, args.step, &cfg)
        }
        GraspModel::Spatial(g) => {
            let plane = match parse_plane(&args.plane, args.step, args.allow_mixed) {
                Ok(p) => p,
                Err(code) => return code,
            };
            force_map(g, &commanded_of(g), &plane, engine(&args.opts), &cfg)
        }
    };
    match rows {
        Ok(rows) => {
            log::info!("{} rows in {:?}", rows.len(), started.elapsed());
            let errors = rows.iter().filter(|r| matches!(r.status, RowStatus::Error)).count();
            if errors > 0 {
                log::info!("{errors} rows failed and carry status=error");
            }
            match emit_rows(
                args.out.as_deref(),
                "angle_deg,magnitude,status",
                rows.iter().map(map_row_line),
            ) {
                Ok(()) => 0,
                Err(code) => code,
            }
        }
        Err(e) => query_error(&e),
    }
}

fn run_enum2d(args: FileArg) -> i32 {
    let file = match parse_grasp_file(&args.file) {
        Ok(f) => f,
        Err(e) => return input_error(e),
    };
    let g = match file.model {
        GraspModel::Planar(g) => g,
        GraspModel::Spatial(_) => {
            return input_error("enum2d enumerates planar contact states; this grasp is spatial")
        }
    };
    let map = graspstab::grasp::build_grasp_map(&GraspModel::Planar(g.clone()));
    let offsets: Vec<f64> = g.contacts.iter().map(|c| c.preload / c.stiffness).collect();
    let slips = complete_slip_states(&map);
    let detaches = enumerate_detach_states(&map, &offsets);
    println!("contacts {}", g.contacts.len());
    println!("slip states {}", slips.len());
    println!("detach states {}", detaches.len());
    for st in &slips {
        let signs: Vec<String> = st.s.iter().map(|s| s.to_string()).collect();
        println!("slip [{}]", signs.join(","));
    }
    for st in &detaches {
        let flags: Vec<&str> = st.u.iter().map(|&p| if p { "hold" } else { "detach" }).collect();
        println!("detach [{}]", flags.join(","));
    }
    0
}

fn run_sweep(args: SweepArgs) -> i32 {
    let (model, _, cfg) = match load(&args.file.file, &args.opts) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let g = match model {
        GraspModel::Spatial(g) => g,
        GraspModel::Planar(_) => {
            return input_error("sweep-preload varies an actuator command; planar grasps have none")
        }
    };
    let base = commanded_of(&g);
    if args.actuator >= base.len() {
        return input_error(format!(
            "--actuator {} out of range: the hand has {} actuators",
            args.actuator,
            base.len()
        ));
    }
    if args.points == 0 {
        return input_error("--points must be at least 1");
    }
    let dir = match unit_direction(&args.dir, 6) {
        Ok(v) => Vector6::from_row_slice(&v),
        Err(code) => return code,
    };
    let values: Vec<f64> = (0..args.points)
        .map(|i| {
            if args.points == 1 {
                args.from
            } else {
                args.from + (args.to - args.from) * i as f64 / (args.points - 1) as f64
            }
        })
        .collect();
    let started = Instant::now();
    let choice = engine(&args.opts);
    use rayon::prelude::*;
    let rows: Vec<(f64, f64, &'static str)> = values
        .par_iter()
        .map(|&preload| {
            let mut f_c = base.clone();
            f_c[args.actuator] = preload;
            match max_disturbance(&g, &f_c, &dir, choice, &cfg) {
                Ok(DisturbanceBound::Bounded(s)) => (preload, s, "ok"),
                Ok(DisturbanceBound::UnboundedAboveCap(cap)) => (preload, cap, "capped"),
                // No equilibrium at all at this preload: nothing is resisted.
                Ok(DisturbanceBound::Infeasible) => (preload, 0.0, "ok"),
                Err(_) => (preload, 0.0, "error"),
            }
        })
        .collect();
    log::info!("{} sweep points in {:?}", rows.len(), started.elapsed());
    match emit_rows(
        args.out.as_deref(),
        "preload,magnitude,status",
        rows.iter()
            .map(|(p, m, s)| format!("{},{},{}", format_g12(*p), format_g12(*m), s)),
    ) {
        Ok(()) => 0,
        Err(code) => code,
    }
}

fn run_closure(args: FileArg) -> i32 {
    let file = match parse_grasp_file(&args.file) {
        Ok(f) => f,
        Err(e) => return input_error(e),
    };
    match force_closure_check(&file.model) {
        Ok(true) => {
            println!("closure");
            0
        }
        Ok(false) => {
            println!("no closure");
            1
        }
        Err(e) => query_error(&e),
    }
}
