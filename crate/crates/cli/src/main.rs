//! `fairdyn`: experiment drivers for inequality analysis in two-group MDPs.
//!
//! Subcommands: `analytic` (closed-form effect sweeps), `detect` (direct
//! effect heatmaps over advantage grids), `train` (planner comparisons), and
//! `plot` (CSV to SVG). Every command writes its outputs plus a manifest into
//! the chosen directory and exits nonzero if anything could not be written.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fairdyn::envs::{AllocationParams, LendingParams};
use fairdyn::harness::{
    epochs_csv, heatmap_csv, mean_curve_csv, run_analytic, run_detect, run_train, trace_csv,
    write_manifest, AnalyticConfig, Channel, DetectConfig, EnvChoice, EnvParams, Manifest,
    TrainConfig, TrainRun,
};
use fairdyn::model::EnsembleConfig;
use fairdyn::planner::{LearnConfig, PlanConfig, PlanMode};
use fairdyn::plot::{emit_svg, PlotKind};

#[derive(Parser)]
#[command(name = "fairdyn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form TE/NDE/NIE sweeps of the logistic reward model.
    Analytic {
        #[arg(long, default_value = "out/analytic")]
        out: PathBuf,
        /// Grid points per sweep.
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Natural-direct-effect heatmaps over an advantage-parameter grid.
    Detect {
        #[arg(long, default_value = "allocation")]
        env: EnvChoice,
        /// Which dynamics channel the sweep varies.
        #[arg(long, default_value = "reward")]
        channel: Channel,
        #[arg(long, default_value_t = 8)]
        grid: usize,
        /// Episodes rolled out per grid cell.
        #[arg(long, default_value_t = 200)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// JSON file with base environment parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out/detect")]
        out: PathBuf,
    },
    /// Model-based training comparisons across planning modes.
    Train {
        /// pets, fair-a, fair-s, insightfair, or all.
        #[arg(long, default_value = "all")]
        algo: String,
        #[arg(long, default_value = "allocation")]
        env: EnvChoice,
        /// Table-style preset: unfair or fair dynamics.
        #[arg(long, default_value = "unfair")]
        dynamics: String,
        /// Number of seeds, counted up from the base seed.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// JSON file with environment parameters (overrides --dynamics).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out/train")]
        out: PathBuf,
        #[command(flatten)]
        planner: PlannerArgs,
    },
    /// Render a CSV produced by the other commands as an SVG chart.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "lines")]
        kind: PlotKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Args)]
struct PlannerArgs {
    #[arg(long, default_value_t = 10)]
    horizon: usize,
    #[arg(long, default_value_t = 200)]
    population: usize,
    #[arg(long, default_value_t = 20)]
    elites: usize,
    #[arg(long, default_value_t = 5)]
    iterations: usize,
    #[arg(long, default_value_t = 5)]
    particles: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// State-disparity threshold for shared-action planning.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    state_penalty: f64,
    #[arg(long, default_value_t = 5)]
    ensemble: usize,
    /// Hidden layer width (two layers).
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 300)]
    fit_epochs: usize,
    #[arg(long, default_value_t = 2)]
    init_episodes: usize,
}

fn resolve_seed(cli_seed: Option<u64>) -> u64 {
    cli_seed
        .or_else(|| {
            std::env::var("FAIRDYN_SEED")
                .ok()
                .and_then(|s| s.parse().ok())
        })
        .unwrap_or(0)
}

fn write_output(
    dir: &Path,
    manifest: &mut Manifest,
    name: &str,
    contents: &str,
) -> Result<()> {
    std::fs::write(dir.join(name), contents)
        .with_context(|| format!("writing {name} into {}", dir.display()))?;
    manifest.record_output(name, contents.as_bytes());
    Ok(())
}

fn load_env_config(path: &Path) -> Result<EnvParams> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading env config {}", path.display()))?;
    let params: EnvParams =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(params)
}

fn preset_params(env: EnvChoice, dynamics: &str) -> Result<EnvParams> {
    Ok(match (env, dynamics) {
        (EnvChoice::Allocation, "unfair") => {
            EnvParams::Allocation(AllocationParams::unfair_dynamics())
        }
        (EnvChoice::Allocation, "fair") => EnvParams::Allocation(AllocationParams::fair_dynamics()),
        (EnvChoice::Lending, "unfair") => EnvParams::Lending(LendingParams::unfair_dynamics()),
        (EnvChoice::Lending, "fair") => EnvParams::Lending(LendingParams::fair_dynamics()),
        (_, other) => bail!("unknown dynamics preset '{other}' (use unfair or fair)"),
    })
}

fn parse_algos(algo: &str) -> Result<Vec<PlanMode>> {
    if algo.eq_ignore_ascii_case("all") {
        return Ok(PlanMode::ALL.to_vec());
    }
    algo.split(',')
        .map(|part| part.trim().parse::<PlanMode>().map_err(anyhow::Error::msg))
        .collect()
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Analytic { out, points } => cmd_analytic(&out, points),
        Command::Detect {
            env,
            channel,
            grid,
            episodes,
            seed,
            config,
            out,
        } => cmd_detect(env, channel, grid, episodes, resolve_seed(seed), config, &out),
        Command::Train {
            algo,
            env,
            dynamics,
            seeds,
            epochs,
            seed,
            config,
            out,
            planner,
        } => cmd_train(
            &algo,
            env,
            &dynamics,
            seeds,
            epochs,
            resolve_seed(seed),
            config,
            &out,
            &planner,
        ),
        Command::Plot {
            input,
            kind,
            out,
            title,
        } => cmd_plot(&input, kind, &out, title.as_deref()),
    }
}

fn cmd_analytic(out: &Path, points: usize) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let config = AnalyticConfig {
        points,
        ..AnalyticConfig::default()
    };
    let sweeps = run_analytic(&config)?;
    let mut manifest = Manifest::new("analytic", serde_json::to_value(&config)?, vec![]);
    for sweep in &sweeps {
        let csv = fairdyn::analytic::sweep_csv(&sweep.rows);
        write_output(out, &mut manifest, &format!("{}.csv", sweep.file_stem()), &csv)?;
        let svg = emit_svg(
            &csv,
            PlotKind::Lines,
            &format!("Analytic effects, w1 = w2 = w3 = {}", sweep.weight),
        )?;
        write_output(out, &mut manifest, &format!("{}.svg", sweep.file_stem()), &svg)?;
    }
    write_manifest(out, &manifest)?;
    println!("analytic: wrote {} files to {}", manifest.outputs.len(), out.display());
    Ok(())
}

fn cmd_detect(
    env: EnvChoice,
    channel: Channel,
    grid: usize,
    episodes: usize,
    seed: u64,
    config_path: Option<PathBuf>,
    out: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let mut config = DetectConfig::new(env, channel, grid, episodes, seed);
    if let Some(path) = config_path {
        config.base = Some(load_env_config(&path)?);
    }
    let result = run_detect(&config)?;
    let mut manifest = Manifest::new("detect", serde_json::to_value(&config)?, vec![seed]);
    let stem = format!("detect_{}_{}", env.as_str(), channel.as_str());
    let csv = heatmap_csv(&result);
    write_output(out, &mut manifest, &format!("{stem}.csv"), &csv)?;
    let svg = emit_svg(
        &csv,
        PlotKind::Heatmap,
        &format!(
            "NDE on {} ({}, tau_max = {:.4})",
            match channel {
                Channel::Reward => "reward",
                Channel::Transition => "next state",
            },
            env.as_str(),
            result.tau_max
        ),
    )?;
    write_output(out, &mut manifest, &format!("{stem}.svg"), &svg)?;
    write_manifest(out, &manifest)?;
    println!("detect: wrote {} files to {}", manifest.outputs.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    algo: &str,
    env: EnvChoice,
    dynamics: &str,
    seed_count: u64,
    epochs: usize,
    base_seed: u64,
    config_path: Option<PathBuf>,
    out: &Path,
    planner: &PlannerArgs,
) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let params = match config_path {
        Some(path) => load_env_config(&path)?,
        None => preset_params(env, dynamics)?,
    };
    if params.choice() != env {
        bail!("env config is for {}, not {}", params.choice().as_str(), env.as_str());
    }
    let algos = parse_algos(algo)?;
    if seed_count == 0 {
        bail!("--seeds must be at least 1");
    }
    let seeds: Vec<u64> = (0..seed_count).map(|i| base_seed + i).collect();
    let default_epsilon = match env {
        EnvChoice::Allocation => 0.05,
        EnvChoice::Lending => 0.02,
    };
    let config = TrainConfig {
        params,
        algos,
        seeds: seeds.clone(),
        learn: LearnConfig {
            epochs,
            init_random_episodes: planner.init_episodes,
            plan: PlanConfig {
                horizon: planner.horizon,
                population: planner.population,
                elites: planner.elites,
                iterations: planner.iterations,
                particles: planner.particles,
                lambda: planner.lambda,
                epsilon: planner.epsilon.unwrap_or(default_epsilon),
                state_penalty: planner.state_penalty,
                ..PlanConfig::default()
            },
            fit: EnsembleConfig {
                ensemble_size: planner.ensemble,
                hidden_layers: vec![planner.hidden, planner.hidden],
                epochs: planner.fit_epochs,
                ..EnsembleConfig::default()
            },
            ..LearnConfig::default()
        },
    };
    let runs = run_train(&config)?;
    let mut manifest = Manifest::new("train", config.manifest_value(), seeds);
    for run in &runs {
        write_output(
            out,
            &mut manifest,
            &format!("{}_seed{}.csv", run.algo.as_str(), run.seed),
            &epochs_csv(&run.epochs),
        )?;
        if let Some(last) = run.epochs.last() {
            write_output(
                out,
                &mut manifest,
                &format!("{}_seed{}_trace.csv", run.algo.as_str(), run.seed),
                &trace_csv(last),
            )?;
        }
    }
    for algo in &config.algos {
        let algo_runs: Vec<&TrainRun> = runs.iter().filter(|r| r.algo == *algo).collect();
        let csv = mean_curve_csv(&algo_runs);
        write_output(out, &mut manifest, &format!("{}_mean.csv", algo.as_str()), &csv)?;
        let svg = emit_svg(
            &csv,
            PlotKind::Lines,
            &format!("{} on {} ({} dynamics)", algo.as_str(), env.as_str(), dynamics),
        )?;
        write_output(out, &mut manifest, &format!("{}_mean.svg", algo.as_str()), &svg)?;
    }
    write_manifest(out, &manifest)?;
    println!("train: wrote {} files to {}", manifest.outputs.len(), out.display());
    Ok(())
}

fn cmd_plot(input: &Path, kind: PlotKind, out: &Path, title: Option<&str>) -> Result<()> {
    let csv = std::fs::read_to_string(input)
        .with_context(|| format!("reading {}", input.display()))?;
    let fallback = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let svg = emit_svg(&csv, kind, title.unwrap_or(&fallback))?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(out, &svg).with_context(|| format!("writing {}", out.display()))?;
    println!("plot: wrote {}", out.display());
    Ok(())
}
