//! Turning a configuration into files on disk.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use belltrace_core::harness::{Allocation, Dataset, HarnessError, RunTrace, TrialContext};
use belltrace_core::models::{lhv_behavior, pr_box, singlet_behavior, Behavior, ChshSettings, ModelError};
use belltrace_core::observers::SettingPrior;
use belltrace_core::Schedule;
use log::{debug, info};
use thiserror::Error;

use crate::config::{parse_config, ConfigErrors, ExperimentConfig, ModelSpec, Policy};
use crate::formats::{self, FormatError};
use crate::report::{self, RunInfo, Summary};
use crate::runner::run_parallel;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n{0}")]
    Config(ConfigErrors),
    #[error("{0}")]
    Runtime(#[from] HarnessError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// `1` configuration, `2` runtime or realism violation, `3` I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Io { .. } => 3,
        }
    }

    fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config(ConfigErrors(vec![crate::config::FieldError { path: path.into(), reason: reason.into() }]))
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text).map_err(CliError::Config)
}

/// A validated experiment ready to run.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub behavior: Behavior,
    pub chsh: Option<ChshSettings>,
    pub allocation: Allocation,
    pub context: TrialContext,
}

fn model_error(e: ModelError) -> CliError {
    CliError::config("model", e.to_string())
}

fn load_behavior(spec: &ModelSpec, base: &Path) -> Result<Behavior, CliError> {
    match spec {
        ModelSpec::Singlet { grid_a, grid_b } => singlet_behavior(grid_a, grid_b).map_err(model_error),
        ModelSpec::PrBox => Ok(pr_box()),
        ModelSpec::Lhv(m) => lhv_behavior(m).map_err(model_error),
        ModelSpec::File { path } => {
            let full = base.join(path);
            let f = File::open(&full).map_err(|e| CliError::io(&full, e))?;
            formats::read_behavior(f).map_err(|e| match e {
                FormatError::Io(io) => CliError::io(&full, io),
                e if e.is_io() => CliError::io(&full, std::io::Error::other(e.to_string())),
                e => CliError::config("model.path", format!("{}: {e}", full.display())),
            })
        }
    }
}

/// Builds the model and trial context. Relative behavior-file paths are
/// resolved against `base`.
pub fn prepare(config: ExperimentConfig, base: &Path) -> Result<Prepared, CliError> {
    let behavior = load_behavior(&config.model, base)?;
    let (ga, gb) = (behavior.settings_a(), behavior.settings_b());
    let chsh = match config.chsh {
        Some(s) => {
            for (x, y) in s.pairs() {
                if !ga.contains(&x) || !gb.contains(&y) {
                    return Err(CliError::config("chsh", format!("pair ({x}, {y}) is not in the model's grid")));
                }
            }
            Some(s)
        }
        None if ga.len() >= 2 && gb.len() >= 2 => {
            Some(ChshSettings::new(ga[0], ga[1], gb[0], gb[1]).map_err(model_error)?)
        }
        None => None,
    };
    let (allocation, prior) = match &config.policy {
        Policy::PerPair => (Allocation::PerPair { n: config.n }, None),
        Policy::Random { prior_a, prior_b } => {
            let uniform = |k: usize| vec![1.0 / k as f64; k];
            let pa = prior_a.clone().unwrap_or_else(|| uniform(ga.len()));
            let pb = prior_b.clone().unwrap_or_else(|| uniform(gb.len()));
            if pa.len() != ga.len() || pb.len() != gb.len() {
                return Err(CliError::config("policy", "priors need one weight per setting of the model's grid"));
            }
            let n = config.n * (ga.len() * gb.len()) as u64;
            (
                Allocation::Random { n, prior_a: pa.clone(), prior_b: pb.clone() },
                Some(SettingPrior { alice: pa, bob: pb }),
            )
        }
    };
    let schedule = Schedule::build(config.schedule).map_err(|e| CliError::config("schedule", e.to_string()))?;
    let context = TrialContext::new(behavior.clone(), schedule, config.q, config.preset, prior, config.seed)
        .map_err(|e| match e {
            HarnessError::Observer(o) => CliError::config("q", o.to_string()),
            other => CliError::Runtime(other),
        })?
        .with_replay(config.replay);
    Ok(Prepared { config, behavior, chsh, allocation, context })
}

/// Indices of the traced trials: the first `k` trials of each setting pair
/// under a per-pair plan, otherwise the first `k · pairs` trials.
pub fn traced_indices(p: &Prepared) -> Vec<u64> {
    let pairs = (p.behavior.settings_a().len() * p.behavior.settings_b().len()) as u64;
    let k = p.config.report.traced_runs;
    match p.allocation {
        Allocation::PerPair { n } => (0..pairs).flat_map(|pair| (0..k.min(n)).map(move |i| pair * n + i)).collect(),
        Allocation::Random { n, .. } => (0..(k * pairs).min(n)).collect(),
    }
}

/// Datasets, traces and summary of one run, before anything is written.
pub struct Outcome {
    pub dataset: Dataset,
    pub traces: Vec<RunTrace>,
    pub summary: Summary,
}

pub fn execute(p: &Prepared) -> Result<Outcome, CliError> {
    let pool = match p.config.threads {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::config("threads", e.to_string()))?,
        ),
        None => None,
    };
    info!("running {} trials", p.allocation.total(p.behavior.settings_a().len() * p.behavior.settings_b().len()));
    let dataset = run_parallel(&p.context, &p.allocation, p.config.report.write_dataset, pool.as_ref())?;
    let traces = traced_indices(p)
        .into_iter()
        .map(|i| {
            debug!("tracing trial {i}");
            p.context.run_trial(&p.allocation, i, true).map(|(_, t)| t.expect("tracked trial"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let info = RunInfo {
        model: p.config.model.kind().to_string(),
        seed: p.config.seed,
        n_per_pair: p.config.n,
        preset: p.config.preset,
        replay: p.config.replay,
    };
    let summary = report::build_summary(info, &p.behavior, p.chsh.as_ref(), &dataset, &traces)?;
    Ok(Outcome { dataset, traces, summary })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn finish(path: &Path, w: BufWriter<File>) -> Result<(), CliError> {
    w.into_inner().map_err(|e| CliError::io(path, e.into_error()))?.sync_all().map_err(|e| CliError::io(path, e))
}

fn format_err(path: &Path, e: FormatError) -> CliError {
    match e {
        FormatError::Io(io) => CliError::io(path, io),
        other => CliError::io(path, std::io::Error::other(other.to_string())),
    }
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, v).map_err(|e| CliError::io(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    finish(path, w)
}

/// Writes the run's files into `out` and returns their paths.
pub fn write_outputs(p: &Prepared, o: &Outcome, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut written = Vec::new();

    let path = out.join("summary.json");
    write_json(&path, &o.summary)?;
    written.push(path);

    let path = out.join("trace.json");
    write_json(&path, &report::build_trace(p.context.schedule(), &o.traces))?;
    written.push(path);

    let path = out.join("behavior.csv");
    let mut w = create(&path)?;
    formats::write_behavior(&mut w, &p.behavior).map_err(|e| format_err(&path, e))?;
    finish(&path, w)?;
    written.push(path);

    if p.config.report.write_dataset {
        let path = out.join("dataset.csv");
        let mut w = create(&path)?;
        formats::write_dataset(&mut w, &o.dataset).map_err(|e| format_err(&path, e))?;
        finish(&path, w)?;
        written.push(path);
    }

    if p.config.report.plot {
        let est = belltrace_core::harness::estimate_behavior(&o.dataset)?;
        let path = out.join("correlators.tsv");
        let mut w = create(&path)?;
        formats::write_correlators(&mut w, &report::correlator_points(&p.behavior, &est))
            .map_err(|e| CliError::io(&path, e))?;
        finish(&path, w)?;
        written.push(path);
        if matches!(p.config.model, ModelSpec::Singlet { .. }) {
            let path = out.join("singlet_curve.tsv");
            let mut w = create(&path)?;
            formats::write_singlet_curve(&mut w, p.config.report.curve_points).map_err(|e| CliError::io(&path, e))?;
            finish(&path, w)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Loads `config_path`, applies overrides, runs and writes into `out`.
pub fn run(config_path: &Path, out: &Path, seed: Option<u64>, n: Option<u64>) -> Result<Summary, CliError> {
    let mut config = load_config(config_path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::config("--n", "must be a positive integer"));
        }
        config.n = n;
        config.report.traced_runs = config.report.traced_runs.min(n);
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    let prepared = prepare(config, base)?;
    let outcome = execute(&prepared)?;
    for path in write_outputs(&prepared, &outcome, out)? {
        info!("wrote {}", path.display());
    }
    Ok(outcome.summary)
}
