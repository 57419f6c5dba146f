use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use log::info;
use samjam_core::evaluation::{evaluate, EvalConfig, DEFAULT_TIGHT_IOU};
use samjam_core::experiment::{bench, record, ExperimentError, Source};
use samjam_core::graph::GraphsFile;
use samjam_core::matching::DEFAULT_IOU_THRESHOLD;
use samjam_core::pipeline::{Method, PipelineConfig, PipelineError, RunOutput, DEFAULT_OVERLAP_THRESHOLD};
use samjam_core::providers::ProviderSelector;
use samjam_core::simulator::{canned, SimWorld};
use serde_json::json;

/// Temporally consistent video scene graphs from frame-level detections and
/// tracked masks.
#[derive(Parser)]
#[command(name = "samjam", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method over a clip and write graphs.json.
    Run(RunArgs),
    /// Render a scenario, run the mask-grounded pipeline on it and save the
    /// provider outputs in the recorded layout, plus ground truth.
    Simulate(SimulateArgs),
    /// Score predicted graphs against ground truth.
    Eval(EvalArgs),
    /// Score every method on a set of scenarios.
    Bench(BenchArgs),
}

#[derive(Args, Clone, Copy)]
struct Thresholds {
    /// Minimum box IoU between a detected object and a mask for them to be
    /// matched (strictly greater than).
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    iou_threshold: f64,
    /// A generated mask whose area is at least this fraction covered by the
    /// propagated masks is dropped as already tracked.
    #[arg(long, default_value_t = DEFAULT_OVERLAP_THRESHOLD)]
    overlap_threshold: f64,
}

#[derive(Args)]
struct RunArgs {
    /// `recorded:<dir>` or `sim:<scenario>:<noise>:<seed>`.
    #[arg(long)]
    providers: String,
    /// Clip to pick from a recorded directory holding several.
    #[arg(long)]
    clip: Option<String>,
    /// samjam, current_frame, last_graph or all_graphs.
    #[arg(long, default_value = "samjam")]
    mode: String,
    #[command(flatten)]
    thresholds: Thresholds,
    /// Overrides the seed of a `sim:` selector.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "graphs.json")]
    out: PathBuf,
    /// Write per-frame match decisions to `<dir>/<frame>.matches.json`.
    #[arg(long)]
    dump_matches: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Canned scenario name or path to a scenario JSON file.
    #[arg(long, default_value = "pick_up")]
    scenario: String,
    /// Canned noise profile (zero, churn, realistic) or path to a JSON file.
    #[arg(long, default_value = "zero")]
    noise: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    thresholds: Thresholds,
    /// Output root; frames land in `<out>/frames/<clip>/`, ground truth in
    /// `<out>/gt/<clip>.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Minimum box IoU for a predicted endpoint to count as tight.
    #[arg(long, default_value_t = DEFAULT_TIGHT_IOU)]
    tight_iou: f64,
    /// Write the full report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated scenario names or JSON paths.
    #[arg(long, default_value = "pick_up,occlusion_return,swap")]
    scenarios: String,
    /// Canned noise profile or path to a JSON file.
    #[arg(long, default_value = "churn")]
    noise: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    thresholds: Thresholds,
    /// Minimum box IoU for a predicted endpoint to count as tight.
    #[arg(long, default_value_t = DEFAULT_TIGHT_IOU)]
    tight_iou: f64,
    /// Write the full report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write per-clip recalls as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const PROVIDER_FAILURE: u8 = 1;
const CONFIG_ERROR: u8 = 2;

fn config(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: CONFIG_ERROR,
        error: error.into(),
    }
}

fn provider(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: PROVIDER_FAILURE,
        error: error.into(),
    }
}

fn classify(error: ExperimentError) -> Failure {
    match &error {
        ExperimentError::Provider(_) => provider(error),
        ExperimentError::Pipeline { source, .. } => match source {
            PipelineError::Config(_) | PipelineError::EmptyClip => config(error),
            _ => provider(error),
        },
        _ => config(error),
    }
}

fn pipeline_config(method: Method, t: Thresholds) -> Result<PipelineConfig, Failure> {
    PipelineConfig::from_decimals(method, t.iou_threshold, t.overlap_threshold).map_err(config)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("serialisable");
    text.push('\n');
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))
            .map_err(config)?;
    }
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(config)
}

fn read_graphs(path: &Path) -> Result<GraphsFile, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(config)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(config)
}

fn dump_matches(dir: &Path, output: &RunOutput) -> Result<(), Failure> {
    for frame in &output.frames {
        let t = &frame.trace;
        let value = json!({
            "frame": frame.graph.frame_index,
            "generated": t.generated.len(),
            "propagated": t.propagated.iter().filter_map(|m| m.tid()).collect::<Vec<_>>(),
            "candidates": t.candidates.iter().filter_map(|m| m.tid()).collect::<Vec<_>>(),
            "matches": t.matches,
            "newly_tracked": t.newly_tracked,
            "timings": t.timings,
        });
        write_json(&dir.join(format!("{}.matches.json", frame.graph.frame_index)), &value)?;
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let method: Method = args.mode.parse().map_err(|e: String| config(anyhow!(e)))?;
    let cfg = pipeline_config(method, args.thresholds)?;
    let mut selector: ProviderSelector = args.providers.parse().map_err(config)?;
    if let (ProviderSelector::Sim { seed, .. }, Some(s)) = (&mut selector, args.seed) {
        *seed = s;
    }
    let sources = Source::resolve(&selector, args.clip.as_deref()).map_err(classify)?;
    let [source] = sources.as_slice() else {
        return Err(config(anyhow!(
            "{} clips found; pick one with --clip",
            sources.len()
        )));
    };
    let output = source.run(cfg).map_err(classify)?;
    info!("{}: {} frames with {}", output.clip, output.frames.len(), method);
    write_text(&args.out, &output.graphs_file().to_json())?;
    if let Some(dir) = &args.dump_matches {
        dump_matches(dir, &output)?;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let cfg = pipeline_config(Method::Samjam, args.thresholds)?;
    let world = SimWorld::load(&args.scenario, &args.noise, args.seed).map_err(config)?;
    let output = Source::Sim(world.clone()).run(cfg).map_err(classify)?;
    let rc = record(&output, &args.out).map_err(classify)?;
    let gt = args.out.join("gt").join(format!("{}.json", output.clip));
    write_text(&gt, &world.ground_truth().to_json())?;
    println!("recorded {} frames to {}", output.frames.len(), rc.dir().display());
    println!("ground truth in {}", gt.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), Failure> {
    let cfg = EvalConfig::from_decimal(args.tight_iou).map_err(config)?;
    let pred = read_graphs(&args.pred)?;
    let gt = read_graphs(&args.gt)?;
    let report = evaluate(&[(pred, gt)], &cfg).map_err(config)?;
    for c in &report.clips {
        println!("{}: recall {:.4} ({}/{})", c.clip, c.recall, c.tp, c.gt);
        println!(
            "  false positives: triplet {}, bbox {}, id {}, duplicate {}",
            c.failures.triplet, c.failures.bbox, c.failures.id, c.failures.duplicate
        );
    }
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), Failure> {
    let scenarios: Vec<&str> = args
        .scenarios
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if scenarios.is_empty() {
        return Err(config(anyhow!(
            "empty scenario list (canned: {})",
            canned::NAMES.join(", ")
        )));
    }
    let base = pipeline_config(Method::Samjam, args.thresholds)?;
    let eval = EvalConfig::from_decimal(args.tight_iou).map_err(config)?;
    let worlds = scenarios
        .iter()
        .map(|s| SimWorld::load(s, &args.noise, args.seed))
        .collect::<Result<Vec<_>, _>>()
        .map_err(config)?;
    let report = bench(&worlds, base, eval, &args.noise).map_err(classify)?;
    print!("{}", report.to_table());
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    if let Some(path) = &args.csv {
        write_text(path, &report.to_csv())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SAMJAM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { CONFIG_ERROR } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
