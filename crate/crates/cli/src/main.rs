//! `bottlab`: tables, Clifford systems, Hopf families, classification and
//! flow experiments from the command line.
//!
//! Exit codes: 0 on success, 1 on invalid input, 2 on numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bottlab_core::centriole::{index_lower_bound, synthetic_geodesic};
use bottlab_core::classifier::{classify, hopf_clutching_padded, split_report, ClassifyConfig};
use bottlab_core::clifford::{class_kind, irreducible_dim, module_sum, ClassKind, ModuleClass};
use bottlab_core::pathflow::{random_path, shorten, FlowConfig, MapFamily, SphereGrid};
use bottlab_core::Error;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

mod verify;

#[derive(Parser)]
#[command(name = "bottlab", version, about = "Clifford modules, centrioles and clutching-map classification")]
struct Cli {
    /// Worker threads for meridian flows (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print m_k for k = 0..16 and the groups A_k for k = 0..15.
    Tables {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build p·S_k ⊕ q·S_k′ and print its class.
    Build {
        #[command(flatten)]
        module: ModuleArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the Hopf clutching map of p·S_k ⊕ q·S_k′ on a sphere grid.
    Hopf {
        #[command(flatten)]
        module: ModuleArgs,
        /// Total rank; anything above the module dimension is a trivial block.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "grid-t", default_value_t = 64)]
        grid_t: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify a clutching map read from a MapFamily JSON file.
    Classify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flow: FlowArgs,
        /// Largest sphere dimension accepted.
        #[arg(long = "max-k", default_value_t = 3)]
        max_k: usize,
    },
    /// Shorten a random path from I to −I in SO(n).
    FlowDemo {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[command(flatten)]
        flow: FlowArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Index lower bound for odd block angles, with a corner-cutting demonstration.
    Index {
        /// Comma-separated odd integers, e.g. "3,1,1,1" or "3,-1".
        #[arg(long, allow_hyphen_values = true)]
        angles: String,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Degree; defaults to the angle sum.
        #[arg(long, allow_hyphen_values = true)]
        c: Option<i64>,
    },
    /// Run the invariant suite at reduced sizes.
    Verify {
        #[command(flatten)]
        flow: FlowArgs,
    },
}

#[derive(Args)]
struct ModuleArgs {
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    copies: usize,
    #[arg(long = "copies-prime", default_value_t = 0)]
    copies_prime: usize,
}

#[derive(Args)]
struct FlowArgs {
    #[arg(long = "grid-t", default_value_t = 64)]
    grid_t: usize,
    #[arg(long = "path-n", default_value_t = 64)]
    path_n: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long = "max-sweeps", default_value_t = 20_000)]
    max_sweeps: usize,
    #[arg(long, default_value_t = FlowConfig::default().seed)]
    seed: u64,
}

impl FlowArgs {
    fn config(&self) -> Result<FlowConfig, Failure> {
        let cfg = FlowConfig {
            grid_t: self.grid_t,
            path_n: self.path_n,
            tol: self.tol,
            max_sweeps: self.max_sweeps,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self { code: if e.is_numerical() { 2 } else { 1 }, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w as usize).build_global() {
            eprintln!("error: cannot start {w} workers: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Tables { out } => tables(out.as_deref()),
        Command::Build { module, out } => build(&module, out.as_deref()),
        Command::Hopf { module, n, grid_t, out } => hopf(&module, n, grid_t, out.as_deref()),
        Command::Classify { input, out, flow, max_k } => classify_file(&input, out.as_deref(), &flow, max_k),
        Command::FlowDemo { n, flow, out } => flow_demo(n, &flow, out.as_deref()),
        Command::Index { angles, k, c } => index(&angles, k, c),
        Command::Verify { flow } => verify::run(&flow.config()?),
    }
}

/// Writes JSON only after the whole command succeeded, via a sibling
/// temporary file so that no partial output is left behind.
fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::invalid(e.to_string()))?;
    let tmp = path.with_extension("partial");
    fs::write(&tmp, text + "\n").map_err(|e| Failure::invalid(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn kind_name(kind: ClassKind) -> &'static str {
    match kind {
        ClassKind::Z => "Z",
        ClassKind::Z2 => "Z2",
        ClassKind::Zero => "0",
    }
}

#[derive(Serialize)]
struct TablesJson {
    dims: Vec<(usize, usize)>,
    groups: Vec<(usize, ClassKind)>,
}

fn tables(out: Option<&Path>) -> Result<(), Failure> {
    let dims: Vec<(usize, usize)> = (0..=16).map(|k| (k, irreducible_dim(k))).collect();
    let groups: Vec<(usize, ClassKind)> = (0..=15).map(|k| (k, class_kind(k))).collect();
    println!("{:>3}  {:>5}", "k", "m_k");
    for (k, m) in &dims {
        println!("{k:>3}  {m:>5}");
    }
    println!();
    println!("{:>3}  A_k", "k");
    for (k, g) in &groups {
        println!("{k:>3}  {}", kind_name(*g));
    }
    if let Some(path) = out {
        write_json(path, &TablesJson { dims, groups })?;
    }
    Ok(())
}

fn module(args: &ModuleArgs) -> Result<bottlab_core::CliffordSystem, Failure> {
    if args.copies + args.copies_prime == 0 {
        return Err(Failure::invalid("need at least one irreducible summand"));
    }
    if args.k > 24 {
        return Err(Failure::invalid(format!("k = {} is too large", args.k)));
    }
    Ok(module_sum(args.k, args.copies, args.copies_prime)?)
}

fn build(args: &ModuleArgs, out: Option<&Path>) -> Result<(), Failure> {
    let s = module(args)?;
    let class = ModuleClass::from_multiplicities(args.k, args.copies, args.copies_prime);
    println!("k = {}, n = {}, class in A_{}: {class}", s.k(), s.n(), args.k);
    if let Some(path) = out {
        write_json(path, &s)?;
    }
    Ok(())
}

fn hopf(args: &ModuleArgs, n: Option<usize>, grid_t: usize, out: Option<&Path>) -> Result<(), Failure> {
    let s = module(args)?;
    if args.k == 0 || args.k > 7 {
        return Err(Failure::invalid(format!("k = {} must lie in 1..=7", args.k)));
    }
    let total = n.unwrap_or(s.n());
    if total < s.n() {
        return Err(Failure::invalid(format!("n = {total} is below the module dimension {}", s.n())));
    }
    let nodes = SphereGrid::node_count(args.k, grid_t.max(2));
    if nodes > 2_000_000 {
        return Err(Failure::invalid(format!("grid would have {nodes} nodes; lower --grid-t")));
    }
    let grid = SphereGrid::new(args.k, grid_t)?;
    let fam = hopf_clutching_padded(&s, &grid, total - s.n())?;
    println!("Hopf family: k = {}, n = {total}, T = {grid_t}, {} nodes", args.k, grid.len());
    match out {
        Some(path) => write_json(path, &fam),
        None => {
            println!("{}", serde_json::to_string(&fam).map_err(|e| Failure::invalid(e.to_string()))?);
            Ok(())
        }
    }
}

fn classify_file(input: &Path, out: Option<&Path>, flow: &FlowArgs, max_k: usize) -> Result<(), Failure> {
    let text = fs::read_to_string(input).map_err(|e| Failure::invalid(format!("{}: {e}", input.display())))?;
    let fam: MapFamily =
        serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", input.display())))?;
    let cfg = ClassifyConfig { flow: flow.config()?, max_k };
    let report = classify(&fam, &cfg)?;
    print!("{}", split_report(&report));
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FlowDemoJson {
    n: usize,
    #[serde(rename = "N")]
    path_n: usize,
    seed: u64,
    sweeps: usize,
    energies: Vec<(usize, f64)>,
    final_energy: f64,
    angles: Vec<f64>,
    max_deviation: f64,
}

fn flow_demo(n: usize, flow: &FlowArgs, out: Option<&Path>) -> Result<(), Failure> {
    if flow.path_n < 2 {
        return Err(Failure::invalid(format!("N = {} is too small to shorten", flow.path_n)));
    }
    if n == 0 || n % 2 == 1 {
        return Err(Failure::invalid(format!("n = {n} must be positive and even")));
    }
    let cfg = flow.config()?;
    let path = random_path(n, cfg.path_n, 1.0, cfg.seed)?;
    let s = shorten(&path, cfg.tol, cfg.max_sweeps)?;
    println!("random path I → −I in SO({n}), N = {}, seed {}", cfg.path_n, cfg.seed);
    let first = s.energies.first().map(|e| e.1).unwrap_or(0.0);
    println!("energy {first:.9} → {:.9} after {} sweeps", s.final_energy(), s.sweeps);
    let mut level = 0;
    for (steps, e) in &s.energies {
        if *steps != level {
            println!("  level N = {steps}: start energy {e:.9}");
            level = *steps;
        }
    }
    let angles: Vec<String> = s.angles().iter().map(|a| format!("{a:.6}")).collect();
    println!("final angles (units of π): [{}]", angles.join(", "));
    println!("max deviation from fitted geodesic {:.2e}", s.max_deviation);
    if let Some(p) = out {
        write_json(
            p,
            &FlowDemoJson {
                n,
                path_n: cfg.path_n,
                seed: cfg.seed,
                sweeps: s.sweeps,
                energies: s.energies.clone(),
                final_energy: s.final_energy(),
                angles: s.angles().to_vec(),
                max_deviation: s.max_deviation,
            },
        )?;
    }
    Ok(())
}

fn parse_angles(text: &str) -> Result<Vec<i64>, Failure> {
    text.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<i64>().map_err(|_| Failure::invalid(format!("cannot parse angle {t:?}"))))
        .collect()
}

fn index(angles: &str, k: usize, c: Option<i64>) -> Result<(), Failure> {
    let angles = parse_angles(angles)?;
    if angles.is_empty() {
        return Err(Failure::invalid("no angles given"));
    }
    if k == 0 {
        return Err(Failure::invalid("k must be at least 1"));
    }
    let c = c.unwrap_or_else(|| angles.iter().sum());
    let bound = index_lower_bound(&angles, k, c)?;
    let case = if (k + 1) % 4 == 3 { "Case 2 (signed)" } else { "Case 1" };
    println!("angles {angles:?}, k = {k}, c = {c}: {case}, index lower bound {bound}");
    if bound == 0 {
        return Ok(());
    }
    let m = irreducible_dim(k + 1) * angles.len();
    if m > 256 {
        println!("corner demonstration skipped: synthetic module would have dimension {m}");
        return Ok(());
    }
    let (ctx, geo) = synthetic_geodesic(k, &angles)?;
    let modules = ctx.velocity_modules(geo.velocity())?;
    for j in 0..modules.len() {
        for h in j + 1..modules.len() {
            let b = if ctx.is_signed_case() {
                (modules[j].signed_angle - modules[h].signed_angle).abs() / 2.0
            } else {
                (modules[j].angle + modules[h].angle) / 2.0
            };
            if b.round() < 2.0 {
                continue;
            }
            let cut = ctx.cut_corner(&geo, j, h)?;
            println!(
                "cut corner on modules ({j}, {h}), b = {}, t = 1/{}: geodesic energy {:.6}, broken path energy {:.6}",
                cut.b, cut.b, cut.geodesic_energy, cut.cut_energy
            );
            return Ok(());
        }
    }
    Ok(())
}
