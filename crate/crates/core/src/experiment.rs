//! Glue for end-to-end runs: provider sources, recording, and the
//! method-by-scenario recall table.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::evaluation::{evaluate_clip, mean_recall, ClipReport, EvalConfig, EvalError};
use crate::graph::{Clip, GraphsFile};
use crate::pipeline::{run, Method, PipelineConfig, PipelineError, RunOutput};
use crate::providers::{ProviderError, ProviderSelector, Providers, RecordedClip};
use crate::simulator::{SimError, SimWorld};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{clip} ({method}): {source}")]
    Pipeline {
        clip: String,
        method: Method,
        #[source]
        source: PipelineError,
    },
    #[error("{clip} ({method}): {source}")]
    Eval {
        clip: String,
        method: Method,
        #[source]
        source: EvalError,
    },
    #[error("{0}")]
    Config(String),
}

/// Where a clip's provider outputs come from.
#[derive(Debug, Clone)]
pub enum Source {
    Recorded(RecordedClip),
    Sim(SimWorld),
}

impl Source {
    /// Resolves a selector into one source per clip. `clip` picks a single
    /// clip out of a recorded directory.
    pub fn resolve(selector: &ProviderSelector, clip: Option<&str>) -> Result<Vec<Source>, ExperimentError> {
        match selector {
            ProviderSelector::Sim { scenario, noise, seed } => {
                Ok(vec![Source::Sim(SimWorld::load(scenario, noise, *seed)?)])
            }
            ProviderSelector::Recorded { dir } => {
                let names = match clip {
                    Some(c) => vec![c.to_string()],
                    None => RecordedClip::list(dir)?,
                };
                let mut out = Vec::new();
                for name in names {
                    let rc = RecordedClip::new(dir, name);
                    if rc.frame_count() == 0 {
                        return Err(ProviderError::Unavailable(format!(
                            "no recorded frames in {}",
                            rc.dir().display()
                        ))
                        .into());
                    }
                    out.push(Source::Recorded(rc));
                }
                if out.is_empty() {
                    return Err(ExperimentError::Config(format!("no clips under {}", dir.display())));
                }
                Ok(out)
            }
        }
    }

    pub fn clip(&self) -> Clip {
        match self {
            Source::Recorded(rc) => Clip::with_len(rc.id(), rc.frame_count()),
            Source::Sim(w) => w.clip(),
        }
    }

    /// Fresh providers for one run.
    pub fn providers(&self) -> Providers {
        match self {
            Source::Recorded(rc) => Providers::recorded(rc.clone()),
            Source::Sim(w) => w.providers(),
        }
    }

    /// Ground truth, when the source knows it.
    pub fn ground_truth(&self) -> Option<GraphsFile> {
        match self {
            Source::Recorded(_) => None,
            Source::Sim(w) => Some(w.ground_truth()),
        }
    }

    pub fn run(&self, config: PipelineConfig) -> Result<RunOutput, ExperimentError> {
        let clip = self.clip();
        run(&clip, self.providers(), config).map_err(|source| ExperimentError::Pipeline {
            clip: clip.id.clone(),
            method: config.method,
            source,
        })
    }
}

/// Writes what the providers returned during a mask-grounded run in the
/// recorded layout, so that replaying it reproduces the run exactly.
pub fn record(output: &RunOutput, root: &Path) -> Result<RecordedClip, ExperimentError> {
    let rc = RecordedClip::new(root, &output.clip);
    for (i, frame) in output.frames.iter().enumerate() {
        if frame.trace.matches.is_none() {
            return Err(ExperimentError::Config(
                "only mask-grounded runs can be recorded".into(),
            ));
        }
        rc.write_detector(&frame.trace.detector_graph)?;
        rc.write_generated(frame.graph.frame_index, &frame.trace.generated)?;
        if i > 0 {
            rc.write_propagated(frame.graph.frame_index, &frame.trace.propagated)?;
        }
    }
    Ok(rc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodRow {
    pub method: String,
    pub clips: Vec<ClipReport>,
    pub mean_recall: f64,
}

/// One row per method, one column per clip, plus the mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub noise: String,
    pub seed: u64,
    pub tight_iou: f64,
    pub rows: Vec<MethodRow>,
}

impl BenchReport {
    pub fn row(&self, method: Method) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method.name())
    }

    /// Percentages to two decimals.
    pub fn to_table(&self) -> String {
        let clips: Vec<&str> = self
            .rows
            .first()
            .map(|r| r.clips.iter().map(|c| c.clip.as_str()).collect())
            .unwrap_or_default();
        let width = clips.iter().map(|c| c.len()).max().unwrap_or(0).max(8);
        let mut out = format!("{:<14}", "method");
        for c in &clips {
            let _ = write!(out, " {c:>width$}");
        }
        let _ = writeln!(out, " {:>width$}", "mean");
        for row in &self.rows {
            let _ = write!(out, "{:<14}", row.method);
            for c in &row.clips {
                let _ = write!(out, " {:>width$.2}", c.recall * 100.0);
            }
            let _ = writeln!(out, " {:>width$.2}", row.mean_recall * 100.0);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,clip,tp,gt,recall\n");
        for row in &self.rows {
            for c in &row.clips {
                let _ = writeln!(out, "{},{},{},{},{}", row.method, c.clip, c.tp, c.gt, c.recall);
            }
            let _ = writeln!(out, "{},mean,,,{}", row.method, row.mean_recall);
        }
        out
    }
}

/// Runs every method on every world and scores it against the scripted
/// ground truth. Each (world, method) cell runs on its own thread with its
/// own providers.
pub fn bench(
    worlds: &[SimWorld],
    base: PipelineConfig,
    eval: EvalConfig,
    noise_name: &str,
) -> Result<BenchReport, ExperimentError> {
    if worlds.is_empty() {
        return Err(ExperimentError::Config("no scenarios to run".into()));
    }
    let cells: Vec<(Method, &SimWorld)> = Method::ALL
        .iter()
        .flat_map(|m| worlds.iter().map(move |w| (*m, w)))
        .collect();
    let results: Vec<Result<ClipReport, ExperimentError>> = std::thread::scope(|s| {
        let handles: Vec<_> = cells
            .iter()
            .map(|&(method, world)| {
                s.spawn(move || {
                    let config = PipelineConfig { method, ..base };
                    let out = Source::Sim(world.clone()).run(config)?;
                    evaluate_clip(&out.graphs_file(), &world.ground_truth(), &eval).map_err(|source| {
                        ExperimentError::Eval {
                            clip: out.clip.clone(),
                            method,
                            source,
                        }
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("bench cell panicked"))
            .collect()
    });
    let mut results = results.into_iter();
    let mut rows = Vec::new();
    for method in Method::ALL {
        let clips = results.by_ref().take(worlds.len()).collect::<Result<Vec<_>, _>>()?;
        let mean = mean_recall(&clips.iter().map(|c| c.recall).collect::<Vec<_>>()).map_err(|source| {
            ExperimentError::Eval {
                clip: "*".into(),
                method,
                source,
            }
        })?;
        rows.push(MethodRow {
            method: method.name().to_string(),
            clips,
            mean_recall: mean,
        });
    }
    Ok(BenchReport {
        noise: noise_name.to_string(),
        seed: worlds[0].seed(),
        tight_iou: eval.tight_iou.to_f64(),
        rows,
    })
}
