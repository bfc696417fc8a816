use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use latopt_core::pipeline::{
    assemble_stage, load_macro_state, load_micro_state, macro_stage, micro_stage, run_pipeline,
    PipelineConfig,
};
use latopt_core::Error;

#[derive(Parser)]
#[command(
    name = "latopt",
    version,
    about = "Lattice structure design: macro material layout and buckling-aware unit cells"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Free material optimization, clustering and per-cluster strain selection.
    Macro(Common),
    /// Designs one lattice unit per cluster from a stored macro stage.
    Micro(Common),
    /// Runs every stage and writes the manifest.
    Run(Common),
    /// Tiles stored units over the macro grid.
    Assemble(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (dotted keys, or JSON with a .json extension). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) => 2,
        Error::Solver(_)
        | Error::Infeasible(_)
        | Error::EmptyUnit
        | Error::Connector(_)
        | Error::Parameter(_) => 3,
        _ => 1,
    }
}

fn setup(common: &Common) -> Result<(PipelineConfig, PathBuf), Error> {
    let cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok((cfg, out))
}

fn run(command: &Command) -> Result<(), Error> {
    match command {
        Command::Macro(c) => {
            let (cfg, out) = setup(c)?;
            let m = macro_stage(&cfg, &out)?;
            println!(
                "free compliance {:.6}, clustered compliance {:.6}, {} clusters -> {}",
                m.state.free_compliance,
                m.state.clustered_compliance,
                m.state.targets.len(),
                out.display()
            );
        }
        Command::Micro(c) => {
            let (cfg, out) = setup(c)?;
            let state = load_macro_state(&out)?;
            for u in micro_stage(&cfg, &out, &state)? {
                println!(
                    "cluster {}: {} bars, J {:.4e}, volume {:.4}, components {}",
                    u.cluster,
                    u.unit.bars.len(),
                    u.objective,
                    u.final_volume,
                    u.connectivity.components
                );
            }
        }
        Command::Assemble(c) => {
            let (cfg, out) = setup(c)?;
            let state = load_macro_state(&out)?;
            let units = load_micro_state(&out)?;
            let a = assemble_stage(&cfg, &out, &state, &units)?;
            report_assembly(
                &out,
                a.image.width,
                a.image.height,
                a.tile.connectors.len(),
                a.connectivity.components,
            );
        }
        Command::Run(c) => {
            let (cfg, out) = setup(c)?;
            let manifest = run_pipeline(&cfg, &out)?;
            let a = &manifest["assembly"];
            println!(
                "compliance free {:.6}, clustered {:.6}, assembled {:.6}",
                manifest["macro"]["free_compliance"]
                    .as_f64()
                    .unwrap_or(f64::NAN),
                manifest["macro"]["clustered_compliance"]
                    .as_f64()
                    .unwrap_or(f64::NAN),
                a["compliance"].as_f64().unwrap_or(f64::NAN)
            );
            report_assembly(
                &out,
                a["width"].as_u64().unwrap_or(0) as usize,
                a["height"].as_u64().unwrap_or(0) as usize,
                a["connectors"].as_u64().unwrap_or(0) as usize,
                a["components"].as_u64().unwrap_or(0) as usize,
            );
        }
    }
    Ok(())
}

fn report_assembly(out: &Path, width: usize, height: usize, connectors: usize, components: usize) {
    println!(
        "structure {width}x{height} px, {connectors} connectors, {components} components -> {}",
        out.display()
    );
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
