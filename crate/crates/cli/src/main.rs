use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use esrm::buffer::MemoryStrategy;
use esrm::data::surrogate::{self, SurrogateConfig};
use esrm::data::{contaminate, load_dataset, save_dataset, ContaminationSpec, Provenance};
use esrm::experiment::{self, Overrides};
use esrm::metrics::{export_embeddings, write_embeddings, ClassFilter};
use esrm::model::{Learner, PROJECTION_DIM};
use esrm::trainer::Method;

#[derive(Parser)]
#[command(name = "esrm", version, about = "Online continual learning with entropy-selected replay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Esrm,
    Er,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Es,
    Reservoir,
    RealOnly,
    SyntheticOnly,
}

#[derive(Subcommand)]
enum Command {
    /// Replace a fraction of each class with twin images and write the result with a manifest.
    Contaminate {
        #[arg(long)]
        real: PathBuf,
        /// Twin source as TAG=DIR; repeat for several sources (equal shares).
        #[arg(long = "twin", value_parser = parse_twin, required = true)]
        twins: Vec<(String, PathBuf)>,
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the built-in surrogate dataset (train/, test/, twin/) as image folders.
    MakeSurrogate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 160)]
        train_per_class: usize,
        #[arg(long, default_value_t = 40)]
        test_per_class: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Run a seeded battery from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        buffer_size: Option<usize>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long, value_enum)]
        mem_strategy: Option<StrategyArg>,
        /// Replaces the seed list; repeat or separate with commas.
        #[arg(long, value_delimiter = ',')]
        seed: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit histogram, composition and ROC artifacts from a results directory.
    Plots {
        #[arg(long)]
        results: PathBuf,
        /// Defaults to RESULTS/plots.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export buffer embeddings of one seed's run directory as TSV.
    ExportEmbeddings {
        #[arg(long)]
        run_dir: PathBuf,
        /// Keep labels below this value.
        #[arg(long, conflicts_with = "only")]
        first_classes: Option<usize>,
        /// Keep exactly these labels.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_twin(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((tag, dir)) if !tag.is_empty() && !dir.is_empty() => Ok((tag.to_string(), dir.into())),
        _ => Err(format!("expected TAG=DIR, got `{s}`")),
    }
}

const CONFIG_ERROR: u8 = 1;
const RUN_FAILURE: u8 = 2;

fn fail(e: esrm::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_config_error() { CONFIG_ERROR } else { RUN_FAILURE })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { CONFIG_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Contaminate { real, twins, classes, ratio, seed, out } => {
            let result = (|| {
                let real = load_dataset(&real, classes, Provenance::Real)?;
                let mut sources = BTreeMap::new();
                for (tag, dir) in &twins {
                    sources.insert(tag.clone(), load_dataset(dir, classes, Provenance::synthetic(tag))?);
                }
                let spec = ContaminationSpec::uniform_sources(ratio, twins.iter().map(|t| t.0.clone()), seed);
                let mixed = contaminate(&real, &sources, &spec)?;
                save_dataset(&mixed, &out)?;
                Ok(mixed.samples().iter().filter(|s| !s.provenance().is_real()).count())
            })();
            match result {
                Ok(n) => {
                    log::info!("wrote {} with {n} substituted samples", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::MakeSurrogate { out, classes, train_per_class, test_per_class, seed } => {
            let cfg = SurrogateConfig { classes, train_per_class, test_per_class, seed, ..SurrogateConfig::default() };
            let result = surrogate::generate(&cfg).and_then(|data| {
                save_dataset(&data.train, &out.join("train"))?;
                save_dataset(&data.test, &out.join("test"))?;
                save_dataset(&data.twin, &out.join("twin"))
            });
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(e),
            }
        }
        Command::Run { config, ratio, buffer_size, method, mem_strategy, seed, out } => {
            let mut cfg = match experiment::parse_config(&config) {
                Ok(cfg) => cfg,
                Err(e) => return fail(e),
            };
            cfg.apply(&Overrides {
                ratio,
                buffer_size,
                method: method.map(|m| match m {
                    MethodArg::Esrm => Method::Esrm,
                    MethodArg::Er => Method::Er,
                }),
                mem_strategy: mem_strategy.map(|s| match s {
                    StrategyArg::Es => MemoryStrategy::EntropySelection,
                    StrategyArg::Reservoir => MemoryStrategy::Reservoir,
                    StrategyArg::RealOnly => MemoryStrategy::RealOnly,
                    StrategyArg::SyntheticOnly => MemoryStrategy::SyntheticOnly,
                }),
                seeds: (!seed.is_empty()).then_some(seed),
                out_dir: out,
            });
            if let Err(e) = cfg.validate() {
                return fail(e);
            }
            match experiment::run_battery(&cfg) {
                Ok(record) => {
                    println!("{}", summary_text(&record));
                    if record.has_failures() {
                        ExitCode::from(RUN_FAILURE)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Plots { results, out } => {
            let out = out.unwrap_or_else(|| results.join("plots"));
            match experiment::load_results(&results).and_then(|r| experiment::emit_plots(&r, &out)) {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::ExportEmbeddings { run_dir, first_classes, only, out } => {
            let filter = match (first_classes, only.is_empty()) {
                (Some(n), _) => ClassFilter::FirstN(n),
                (None, false) => ClassFilter::Only(only.into_iter().collect()),
                (None, true) => ClassFilter::All,
            };
            let result = (|| {
                let model = Learner::load(&run_dir.join("model.safetensors"))?;
                let buffer = experiment::load_buffer(&run_dir)?;
                let records = export_embeddings(&model, &buffer, &filter)?;
                write_embeddings(&records, PROJECTION_DIM, &out)?;
                Ok(records.len())
            })();
            match result {
                Ok(n) => {
                    log::info!("wrote {n} embeddings to {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}

fn summary_text(record: &experiment::ResultsRecord) -> String {
    let fmt = |m: Option<experiment::MeanStd>| m.map_or("n/a".to_string(), |m| format!("{:.4} ± {:.4}", m.mean, m.std));
    let a = &record.aggregate;
    format!(
        "fingerprint {}\nFAA {}\nLA  {}\nRF  {}\nAUC {}\nfinal real fraction {}\nfailed seeds {:?}",
        &record.fingerprint[..12],
        fmt(a.faa),
        fmt(a.la),
        fmt(a.rf),
        fmt(a.auc),
        fmt(a.final_real_fraction),
        a.failed_seeds
    )
}
