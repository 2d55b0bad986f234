//! `labelrl`: ingest trajectories, train, evaluate and export replays and
//! value heatmaps.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use labelrl_core::episode::ControllerKind;
use labelrl_core::error::{Error, Result};
use labelrl_core::harness::{self, RunConfig};
use labelrl_core::policy::HeatmapMode;
use labelrl_core::trajectory::{SynthKind, SynthParams};

#[derive(Parser, Debug)]
#[command(name = "labelrl", version, about = "Label view management for moving objects")]
struct Cli {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run on one thread (the only mode the current trainer uses).
    #[arg(long, global = true)]
    single_thread: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct PolicyArgs {
    #[arg(long, default_value = "none", value_parser = parse_controller)]
    controller: ControllerKind,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split a `t,id,x,z` trajectory CSV into scene files and a manifest.
    Ingest {
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write synthetic scenes for consecutive seeds.
    Synth {
        #[arg(long, default_value = "crossing_pair")]
        kind: String,
        #[arg(long, default_value_t = 64)]
        count: usize,
        /// First scene seed.
        #[arg(long, default_value_t = 0)]
        first: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a policy on an ingested dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare controllers on held-out scenes.
    Eval {
        /// Repeat or comma-separate to compare several controllers.
        #[arg(long, value_delimiter = ',', default_values = ["none", "force"], value_parser = parse_controller)]
        controller: Vec<ControllerKind>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Scene files to evaluate; otherwise the held-out split of --data.
        #[arg(long)]
        scenes: Option<String>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-step JSON lines of one scene.
    Replay {
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encoded observations along a replay, one JSON line per step and label.
    Obs {
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// 30x30 value grid of one label at one step.
    Heatmap {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        step: usize,
        #[arg(long, default_value_t = 0)]
        label: usize,
        #[arg(long, value_enum, default_value_t = Mode::Offset)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Offset,
    Acceleration,
}

fn parse_controller(s: &str) -> std::result::Result<ControllerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn eval_scenes(scenes: Option<&str>, data: Option<&Path>, cfg: &RunConfig) -> Result<Vec<labelrl_core::trajectory::Scene>> {
    match (scenes, data) {
        (Some(glob), _) => harness::load_scene_glob(glob),
        (None, Some(dir)) => Ok(harness::split_dataset(harness::load_dataset(dir)?, &cfg.data)?.test),
        (None, None) => Err(Error::Usage("eval needs --scenes or --data".into())),
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Ingest { csv, out } => {
            let m = harness::cmd_ingest(&csv, &out, &cfg.data)?;
            println!("{} scenes written to {}", m.scenes.len(), out.display());
        }
        Command::Synth { kind, count, first, out } => {
            let kind: SynthKind = kind.parse()?;
            let params = SynthParams {
                duration: cfg.data.scene_len,
                dt: cfg.data.dt,
                ..SynthParams::default()
            };
            let m = harness::cmd_synth(kind, &params, count, first, &out)?;
            println!("{} scenes written to {}", m.scenes.len(), out.display());
        }
        Command::Train { data, out } => {
            let outcome = harness::cmd_train(&cfg, &data, &out)?;
            if let Some(last) = outcome.log.last() {
                println!(
                    "trained {} steps; final test reward {}",
                    last.global_step,
                    last.test_reward.map_or("n/a".to_string(), |r| format!("{r:.3}"))
                );
            }
        }
        Command::Eval {
            controller,
            checkpoint,
            scenes,
            data,
            out,
        } => {
            if controller.contains(&ControllerKind::Rl) && checkpoint.is_none() {
                return Err(Error::Usage("the rl controller requires --checkpoint".into()));
            }
            let scenes = eval_scenes(scenes.as_deref(), data.as_deref(), &cfg)?;
            let report = harness::cmd_eval(&cfg, &controller, checkpoint.as_deref(), &scenes, out.as_deref())?;
            print!("{}", report.table.render());
        }
        Command::Replay { policy, scene, out } => {
            let scene = harness::load_scene(&scene)?;
            let n = harness::cmd_replay(&cfg, policy.controller, policy.checkpoint.as_deref(), &scene, &out)?;
            println!("{n} lines written to {}", out.display());
        }
        Command::Obs { policy, scene, out } => {
            let scene = harness::load_scene(&scene)?;
            let n = harness::cmd_obs_dump(&cfg, policy.controller, policy.checkpoint.as_deref(), &scene, &out)?;
            println!("{n} observations written to {}", out.display());
        }
        Command::Heatmap {
            checkpoint,
            scene,
            step,
            label,
            mode,
            out,
        } => {
            let scene = harness::load_scene(&scene)?;
            let mode = match mode {
                Mode::Offset => HeatmapMode::Offset,
                Mode::Acceleration => HeatmapMode::Acceleration,
            };
            let h = harness::cmd_heatmap(&cfg, &checkpoint, &scene, step, label, mode, Some(&out))?;
            println!("heatmap written to {} (world {})", out.display(), &h.hash_after[..12]);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
