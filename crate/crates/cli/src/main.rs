use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use rfwb::analysis::{collect_head_features, run_gradcheck, DiagnosticsBundle, GradcheckSize};
use rfwb::model::{load_checkpoint, save_checkpoint, HeadKind, Model};
use rfwb::synth::{read_dataset, write_dataset, SynthSpec};
use rfwb::training::{evaluate, train, write_history, RunConfig, Task, TrainConfig};

#[derive(Parser)]
#[command(name = "rfwb", version, about = "Complex-valued white-box transformer toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from a spec file.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write its checkpoint and history.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// History path; defaults to `<out>.history.jsonl`.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Print metrics of a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Coordinates per point for the grouped regression error.
        #[arg(long, default_value_t = 3)]
        group: usize,
    },
    /// Write correlation, sparsity and occupancy tables for one block.
    Analyze {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Block index, 0-based; defaults to the last block.
        #[arg(long)]
        block: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the gradient oracle suite.
    Gradcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "8,16,4,2")]
        size: GradcheckSize,
    },
}

struct Failure {
    kind: &'static str,
    message: String,
}

impl From<rfwb::Error> for Failure {
    fn from(e: rfwb::Error) -> Self {
        Self { kind: e.kind(), message: e.to_string() }
    }
}

type CliResult = Result<(), Failure>;

fn task_of(model: &Model) -> Task {
    match model.config.head {
        HeadKind::Classify { .. } => Task::Classification,
        HeadKind::Regress { .. } => Task::Regression,
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure { kind: "io", message: format!("{}: {e}", path.display()) })
}

fn print(value: serde_json::Value) {
    println!("{value}");
}

fn synth(spec: &Path, out: &Path) -> CliResult {
    let spec = SynthSpec::from_toml(&read_text(spec)?)?;
    let ds = spec.generate()?;
    write_dataset(&ds, out)?;
    print(json!({
        "command": "synth",
        "samples": ds.len(),
        "classes": ds.classes().len(),
        "shape": ds.samples.first().map(|s| s.shape().to_vec()),
        "out": out.display().to_string(),
    }));
    Ok(())
}

fn run_train(config: &Path, data: &Path, out: &Path, history: Option<PathBuf>) -> CliResult {
    let run = RunConfig::from_toml(&read_text(config)?)?;
    let ds = read_dataset(data)?;
    let splits = ds.split(run.train.seed);
    let model = Model::new(run.model.clone(), run.train.seed)?;
    let outcome = train(model, &splits.train, &splits.val, &run.train)?;
    save_checkpoint(&outcome.model, out)?;
    let history = history.unwrap_or_else(|| {
        let mut p = out.as_os_str().to_owned();
        p.push(".history.jsonl");
        PathBuf::from(p)
    });
    write_history(&outcome.history, &history)?;
    let test = if splits.test.is_empty() { None } else { Some(evaluate(&outcome.model, &splits.test, &run.train)?) };
    print(json!({
        "command": "train",
        "epochs": outcome.history.len(),
        "best_epoch": outcome.best_epoch,
        "best_val_metric": outcome.best_metric,
        "stopped_early": outcome.stopped_early,
        "test": test,
        "checkpoint": out.display().to_string(),
        "history": history.display().to_string(),
    }));
    Ok(())
}

fn eval(ckpt: &Path, data: &Path, group: usize) -> CliResult {
    let model = load_checkpoint(ckpt)?;
    let ds = read_dataset(data)?;
    let cfg = TrainConfig { task: task_of(&model), coord_group: group, ..TrainConfig::default() };
    cfg.validate()?;
    let metrics = evaluate(&model, &ds, &cfg)?;
    print(json!({ "command": "eval", "metrics": metrics }));
    Ok(())
}

fn analyze(ckpt: &Path, data: &Path, block: Option<usize>, out: &Path) -> CliResult {
    let model = load_checkpoint(ckpt)?;
    let ds = read_dataset(data)?;
    let features = collect_head_features(&model, &ds, block)?;
    let bundle = DiagnosticsBundle::compute(&features)?;
    let files = bundle.write_csv(out)?;
    print(json!({
        "command": "analyze",
        "block": bundle.block,
        "ssr_gap": bundle.ssr_gap,
        "zero_rows": bundle.occupancy.zero_rows,
        "files": files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
    }));
    Ok(())
}

fn gradcheck(seed: u64, size: GradcheckSize) -> CliResult {
    let report = run_gradcheck(seed, size)?;
    for c in &report.checks {
        let status = match (c.skipped, c.passed) {
            (true, _) => "SKIP",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        };
        println!("{status} {} max_error={:.3e} threshold={:.1e}", c.name, c.max_error, c.threshold);
    }
    let failures = report.failures();
    if failures.is_empty() {
        return Ok(());
    }
    let names: Vec<String> = failures.iter().map(|c| format!("{} ({:.3e})", c.name, c.max_error)).collect();
    Err(Failure { kind: "gradcheck_failed", message: names.join(", ") })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": "usage", "message": first }));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Synth { spec, out } => synth(&spec, &out),
        Command::Train { config, data, out, history } => run_train(&config, &data, &out, history),
        Command::Eval { ckpt, data, group } => eval(&ckpt, &data, group),
        Command::Analyze { ckpt, data, block, out } => analyze(&ckpt, &data, block, &out),
        Command::Gradcheck { seed, size } => gradcheck(seed, size),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({ "error": f.kind, "message": f.message }));
            ExitCode::FAILURE
        }
    }
}
