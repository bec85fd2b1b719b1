use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use surface_ot::functionals::{run_flow, FlowFunctional};
use surface_ot::harmonic::{solve_harmonic, BoundaryData, DomainMesh};
use surface_ot::io::{self, load_density, sha256_file, RunManifest};
use surface_ot::oracle::{convergence_experiment, cost_matrix, lp_transport, DistanceMode, TranslationSetup};
use surface_ot::{solve_geodesic, Error, MeshOperators, Result, SolverConfig, TriangleMesh};

#[derive(Parser)]
#[command(name = "surface-ot", version, about = "Dynamical optimal transport on triangle meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Geodesic between two densities; writes frames, residuals and a manifest.
    Geodesic(PairArgs),
    /// Print the discrete Wasserstein distance between two densities.
    Distance(PairArgs),
    /// Minimizing-movement gradient flow.
    Jko(JkoArgs),
    /// Harmonic map from a domain mesh with boundary densities.
    Harmonic(HarmonicArgs),
    /// Exact static transport cost on vertex distances.
    Oracle(OracleArgs),
    /// Translated-bump refinement study on the unit square.
    Convergence(ConvergenceArgs),
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long = "time-steps", default_value_t = 31)]
    time_steps: usize,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long = "max-iters", default_value_t = 5000)]
    max_iters: usize,
    /// Initial penalty (default: inverse surface area).
    #[arg(long = "penalty")]
    penalty: Option<f64>,
    /// Keep the penalty fixed.
    #[arg(long = "no-adapt")]
    no_adapt: bool,
    /// Recorded in the manifest; the solvers are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            time_steps: self.time_steps,
            initial_penalty: self.penalty,
            tol: self.tol,
            max_iters: self.max_iters,
            alpha: self.alpha,
            penalty_adapt: !self.no_adapt,
            ..SolverConfig::default()
        }
    }
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    rho0: PathBuf,
    #[arg(long)]
    rho1: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FunctionalKind {
    Crowd,
    Porous,
}

#[derive(Args)]
struct JkoArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    rho0: PathBuf,
    #[arg(long, value_enum)]
    functional: FunctionalKind,
    /// Porous exponent m > 1.
    #[arg(long, default_value_t = 2.0)]
    exponent: f64,
    /// Per-vertex potential file for the crowd functional (default zero).
    #[arg(long)]
    potential: Option<PathBuf>,
    /// Density cap for the crowd functional.
    #[arg(long)]
    cap: Option<f64>,
    #[arg(long)]
    step: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long = "time-steps", default_value_t = 5)]
    time_steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long = "max-iters", default_value_t = 5000)]
    max_iters: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HarmonicArgs {
    /// Target surface.
    #[arg(long)]
    mesh: PathBuf,
    /// Parameter domain: OBJ polyline (`l` records) or triangle mesh.
    #[arg(long)]
    domain: PathBuf,
    /// Directory holding `boundary.txt` and the density files it names.
    #[arg(long)]
    boundary: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Graph,
    Euclidean,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    rho0: PathBuf,
    #[arg(long)]
    rho1: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Graph)]
    metric: ModeArg,
    /// Also solve the dynamical problem and report both values.
    #[arg(long)]
    compare: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Points per side of the unit square.
    #[arg(long, value_delimiter = ',', default_values_t = [16usize, 32])]
    sides: Vec<usize>,
    /// Odd numbers of time steps.
    #[arg(long = "time-steps", value_delimiter = ',', default_values_t = [15usize, 31])]
    time_steps: Vec<usize>,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long = "max-iters", default_value_t = 5000)]
    max_iters: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Outcome {
    converged: bool,
}

fn load_mesh(path: &Path) -> Result<(TriangleMesh, MeshOperators, String)> {
    let mesh = TriangleMesh::load_auto(path)?;
    let ops = MeshOperators::new(&mesh);
    Ok((mesh, ops, sha256_file(path)?))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn pair(args: &PairArgs, command: &str) -> Result<Outcome> {
    let start = Instant::now();
    let (mesh, ops, hash) = load_mesh(&args.mesh)?;
    let mu0 = load_density(&args.rho0, &mesh)?;
    let mu1 = load_density(&args.rho1, &mesh)?;
    let cfg = args.solver.config();
    let res = solve_geodesic(&mesh, &ops, &mu0, &mu1, &cfg)?;
    if command == "distance" {
        println!("{:.10e}", res.distance);
    } else {
        println!(
            "distance {:.10e}  iterations {}  converged {}  gap {:.3e}",
            res.distance, res.iterations, res.converged, res.gap
        );
    }
    if let Some(out) = &args.out {
        create_dir(out)?;
        let frames = io::save_frames(out, &res.mu_curve)?;
        io::write_residuals(out.join("residuals.csv"), &res.history)?;
        io::write_values(out.join("rho0.txt"), mu0.values())?;
        io::write_values(out.join("rho1.txt"), mu1.values())?;
        RunManifest {
            command: command.into(),
            mesh: Some(args.mesh.clone()),
            mesh_sha256: Some(hash),
            config: cfg,
            parameters: json!({
                "seed": args.solver.seed,
                "dual_objective": res.dual_objective,
                "primal_action": res.primal_action,
                "gap": res.gap,
                "final_penalty": res.final_penalty,
            }),
            iterations: res.iterations,
            converged: res.converged,
            residuals: Some("residuals.csv".into()),
            distance: Some(res.distance),
            frames,
            extra_files: vec!["rho0.txt".into(), "rho1.txt".into()],
            wall_time_secs: start.elapsed().as_secs_f64(),
        }
        .write(out)?;
    }
    Ok(Outcome { converged: res.converged })
}

fn jko(args: &JkoArgs) -> Result<Outcome> {
    let start = Instant::now();
    let (mesh, ops, hash) = load_mesh(&args.mesh)?;
    let mu0 = load_density(&args.rho0, &mesh)?;
    let functional = match args.functional {
        FunctionalKind::Porous => FlowFunctional::Porous { exponent: args.exponent },
        FunctionalKind::Crowd => {
            let potential = match &args.potential {
                Some(p) => read_potential(p, mesh.num_vertices())?,
                None => vec![0.0; mesh.num_vertices()],
            };
            let cap = args.cap.ok_or_else(|| Error::InvalidConfig("--cap is required for crowd".into()))?;
            FlowFunctional::Crowd { potential, cap }
        }
    };
    let cfg = SolverConfig {
        time_steps: args.time_steps,
        tol: args.tol,
        max_iters: args.max_iters,
        ..SolverConfig::default()
    };
    let trace = run_flow(&mesh, &ops, &mu0, &functional, args.step, args.steps, &cfg)?;
    println!("step,energy,transport_cost,iterations");
    let mut table = String::from("step,energy,transport_cost,iterations\n");
    for k in 0..trace.densities.len() {
        let (cost, iters) = if k == 0 {
            (0.0, 0)
        } else {
            (trace.transport_costs[k - 1], trace.iterations[k - 1])
        };
        let line = format!("{k},{:.16e},{:.16e},{iters}", trace.energies[k], cost);
        println!("{line}");
        table.push_str(&line);
        table.push('\n');
    }
    if let Some(out) = &args.out {
        create_dir(out)?;
        let frames = io::save_frames(out, &trace.densities)?;
        write_text(&out.join("energies.csv"), &table)?;
        let kind = match args.functional {
            FunctionalKind::Crowd => "crowd",
            FunctionalKind::Porous => "porous",
        };
        RunManifest {
            command: "jko".into(),
            mesh: Some(args.mesh.clone()),
            mesh_sha256: Some(hash),
            config: cfg,
            parameters: json!({
                "functional": kind,
                "exponent": args.exponent,
                "cap": args.cap,
                "potential": args.potential,
                "step": args.step,
                "steps": args.steps,
                "seed": args.seed,
            }),
            iterations: trace.iterations.iter().sum(),
            converged: trace.converged,
            residuals: None,
            distance: None,
            frames,
            extra_files: vec!["energies.csv".into()],
            wall_time_secs: start.elapsed().as_secs_f64(),
        }
        .write(out)?;
    }
    Ok(Outcome { converged: trace.converged })
}

fn read_potential(path: &Path, n: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let values: Vec<f64> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(k, l)| l.parse().map_err(|_| Error::Parse { line: k + 1, message: format!("bad number '{l}'") }))
        .collect::<Result<_>>()?;
    if values.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: values.len() });
    }
    if values.iter().any(|v: &f64| !v.is_finite()) {
        return Err(Error::InvalidConfig("potential must be finite".into()));
    }
    Ok(values)
}

/// `boundary.txt` lines: `<domain vertex> <density file>`, paths relative
/// to the directory.
fn read_boundary(dir: &Path, mesh: &TriangleMesh) -> Result<BoundaryData> {
    let index = dir.join("boundary.txt");
    let text = fs::read_to_string(&index).map_err(|source| Error::Io { path: index.clone(), source })?;
    let mut bc = BoundaryData::default();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let bad = || Error::Parse { line: k + 1, message: format!("expected '<vertex> <file>', got '{line}'") };
        let x: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let file = parts.next().ok_or_else(bad)?;
        bc.insert(x, load_density(dir.join(file), mesh)?);
    }
    Ok(bc)
}

fn harmonic(args: &HarmonicArgs) -> Result<Outcome> {
    let start = Instant::now();
    let (mesh, ops, hash) = load_mesh(&args.mesh)?;
    let domain = DomainMesh::load(&args.domain)?;
    let bc = read_boundary(&args.boundary, &mesh)?;
    let cfg = args.solver.config();
    let res = solve_harmonic(&domain, &mesh, &ops, &bc, &cfg)?;
    println!(
        "energy {:.10e}  iterations {}  converged {}  gap {:.3e}",
        res.energy, res.iterations, res.converged, res.gap
    );
    if let Some(out) = &args.out {
        create_dir(out)?;
        let frames = io::save_frames(out, &res.values)?;
        io::write_residuals(out.join("residuals.csv"), &res.history)?;
        RunManifest {
            command: "harmonic".into(),
            mesh: Some(args.mesh.clone()),
            mesh_sha256: Some(hash),
            config: cfg,
            parameters: json!({
                "domain": args.domain,
                "domain_sha256": sha256_file(&args.domain)?,
                "energy": res.energy,
                "primal_energy": res.primal_energy,
                "gap": res.gap,
                "seed": args.solver.seed,
            }),
            iterations: res.iterations,
            converged: res.converged,
            residuals: Some("residuals.csv".into()),
            distance: None,
            frames,
            extra_files: vec![],
            wall_time_secs: start.elapsed().as_secs_f64(),
        }
        .write(out)?;
    }
    Ok(Outcome { converged: res.converged })
}

fn oracle(args: &OracleArgs) -> Result<Outcome> {
    let start = Instant::now();
    let (mesh, ops, hash) = load_mesh(&args.mesh)?;
    let mu0 = load_density(&args.rho0, &mesh)?;
    let mu1 = load_density(&args.rho1, &mesh)?;
    let mode = match args.metric {
        ModeArg::Graph => DistanceMode::Graph,
        ModeArg::Euclidean => DistanceMode::Euclidean,
    };
    let plan = lp_transport(&mesh, &cost_matrix(&mesh, mode)?, &mu0, &mu1)?;
    println!("lp_value {:.10e}", plan.value);
    let mut converged = true;
    let mut dynamic = None;
    let cfg = args.solver.config();
    if args.compare {
        let res = solve_geodesic(&mesh, &ops, &mu0, &mu1, &cfg)?;
        let w2 = res.dual_objective;
        let rel = (w2 - plan.value).abs() / plan.value.max(f64::MIN_POSITIVE);
        println!("dynamic_value {w2:.10e}  relative_difference {rel:.3e}");
        converged = res.converged;
        dynamic = Some((w2, res.iterations));
    }
    if let Some(out) = &args.out {
        create_dir(out)?;
        let entries: Vec<_> = plan.entries.iter().map(|&(u, v, m)| json!([u, v, m])).collect();
        let report = json!({ "lp_value": plan.value, "plan": entries, "dynamic_value": dynamic.map(|d| d.0) });
        write_text(&out.join("oracle.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
        RunManifest {
            command: "oracle".into(),
            mesh: Some(args.mesh.clone()),
            mesh_sha256: Some(hash),
            config: cfg,
            parameters: json!({
                "metric": match args.metric { ModeArg::Graph => "graph", ModeArg::Euclidean => "euclidean" },
                "compare": args.compare,
                "seed": args.solver.seed,
            }),
            iterations: dynamic.map_or(0, |d| d.1),
            converged,
            residuals: None,
            distance: Some(plan.value.sqrt()),
            frames: vec![],
            extra_files: vec!["oracle.json".into()],
            wall_time_secs: start.elapsed().as_secs_f64(),
        }
        .write(out)?;
    }
    Ok(Outcome { converged })
}

fn convergence(args: &ConvergenceArgs) -> Result<Outcome> {
    let start = Instant::now();
    let cfg = SolverConfig { tol: args.tol, max_iters: args.max_iters, ..SolverConfig::default() };
    let setup = TranslationSetup::default();
    let rows = convergence_experiment(&args.sides, &args.time_steps, &setup, &cfg)?;
    let mut table = String::from("side,time_steps,l1_error,iterations,converged,mass_error,min_density\n");
    for r in &rows {
        table.push_str(&format!(
            "{},{},{:.16e},{},{},{:.3e},{:.3e}\n",
            r.side, r.time_steps, r.l1_error, r.iterations, r.converged, r.mass_error, r.min_density
        ));
    }
    print!("{table}");
    let converged = rows.iter().all(|r| r.converged);
    if let Some(out) = &args.out {
        create_dir(out)?;
        write_text(&out.join("convergence.csv"), &table)?;
        RunManifest {
            command: "convergence".into(),
            mesh: None,
            mesh_sha256: None,
            config: cfg,
            parameters: json!({
                "sides": args.sides,
                "time_steps": args.time_steps,
                "radius": setup.radius,
                "shift": setup.shift,
                "center": setup.center,
                "seed": args.seed,
            }),
            iterations: rows.iter().map(|r| r.iterations).sum(),
            converged,
            residuals: None,
            distance: None,
            frames: vec![],
            extra_files: vec!["convergence.csv".into()],
            wall_time_secs: start.elapsed().as_secs_f64(),
        }
        .write(out)?;
    }
    Ok(Outcome { converged })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Geodesic(a) => pair(a, "geodesic"),
        Command::Distance(a) => pair(a, "distance"),
        Command::Jko(a) => jko(a),
        Command::Harmonic(a) => harmonic(a),
        Command::Oracle(a) => oracle(a),
        Command::Convergence(a) => convergence(a),
    };
    match result {
        Ok(Outcome { converged: true }) => ExitCode::SUCCESS,
        Ok(Outcome { converged: false }) => {
            eprintln!("warning: solver stopped at the iteration limit before reaching the tolerance");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

