use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use tsprep_core::export::{self, ExportFormat, Manifest};
use tsprep_core::tensor_file::DType;
use tsprep_core::{cache, pipeline, DatasetKind, ImputeMethod, MissingSpec, PipelineConfig, Split};

mod report;

#[derive(Debug, Parser)]
#[command(name = "tsprep", version, about = "Prepare UEA/UCR and PhysioNet time series for machine learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Download and unpack the raw sources of a dataset
    Fetch {
        dataset: String,
        #[arg(long, env = "TSPREP_CACHE", default_value = ".")]
        path: PathBuf,
        /// Base URL serving the source files instead of their original hosts
        #[arg(long)]
        mirror: Option<String>,
    },
    /// Build a dataset and write it (f64) with a manifest
    Prepare(PrepareArgs),
    /// Re-write a prepared dataset in another format or dtype
    Export {
        entry: PathBuf,
        #[arg(long, default_value = "tsprep")]
        format: ExportFormat,
        #[arg(long, default_value = "f32")]
        dtype: DType,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print shapes, channels, missingness and split sizes of an export or cache entry
    Info {
        entry: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Re-check the SHA-256 of every file of an export or cache entry
    Validate { entry: PathBuf },
}

#[derive(Debug, Args)]
struct PrepareArgs {
    dataset: DatasetKind,
    #[arg(long)]
    train_prop: f64,
    #[arg(long)]
    val_prop: Option<f64>,
    /// Split a loaded `Dataset` would expose; recorded in the manifest
    #[arg(long, default_value = "train")]
    split: Split,
    /// Proportion to drop: one value, or one per data channel separated by commas
    #[arg(long, value_parser = parse_missing)]
    missing: Option<MissingSpec>,
    #[arg(long, default_value = "none")]
    impute: ImputeMethod,
    /// Master channel indices filled with the training mode
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<usize>,
    /// Fill values in raw units as `channel:value`
    #[arg(long, value_delimiter = ',', value_parser = parse_channel_mean)]
    channel_means: Vec<(usize, f64)>,
    #[arg(long, overrides_with = "no_time")]
    time: bool,
    #[arg(long, overrides_with = "time")]
    no_time: bool,
    #[arg(long)]
    mask: bool,
    #[arg(long)]
    delta: bool,
    #[arg(long)]
    standardise: bool,
    #[arg(long)]
    overwrite_cache: bool,
    #[arg(long, env = "TSPREP_CACHE", default_value = ".")]
    path: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `<path>/.torchtime/prepared/<dataset>`
    #[arg(long)]
    out: Option<PathBuf>,
}

impl PrepareArgs {
    fn config(&self) -> PipelineConfig {
        let mut c = PipelineConfig::new(self.dataset.clone(), self.train_prop);
        c.val_prop = self.val_prop;
        c.split = self.split;
        c.missing = self.missing.clone().unwrap_or_default();
        c.impute = self.impute.clone();
        c.categorical = self.categorical.iter().copied().collect::<BTreeSet<_>>();
        c.channel_means = self.channel_means.iter().copied().collect::<BTreeMap<_, _>>();
        c.time = !self.no_time;
        c.mask = self.mask;
        c.delta = self.delta;
        c.standardise = self.standardise;
        c.overwrite_cache = self.overwrite_cache;
        c.path = self.path.clone();
        c.seed = self.seed;
        c
    }
}

fn parse_missing(s: &str) -> Result<MissingSpec, String> {
    let values = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(match values.as_slice() {
        [p] => MissingSpec::Scalar(*p),
        _ => MissingSpec::PerChannel(values),
    })
}

fn parse_channel_mean(s: &str) -> Result<(usize, f64), String> {
    let (k, v) = s.split_once(':').ok_or_else(|| format!("expected channel:value, got {s:?}"))?;
    let k = k.trim().parse().map_err(|e| format!("channel {k:?}: {e}"))?;
    let v = v.trim().parse().map_err(|e| format!("value {v:?}: {e}"))?;
    Ok((k, v))
}

/// Exit status 2 for configuration and usage errors, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let config = err.chain().any(|cause| {
        cause.downcast_ref::<tsprep_core::Error>().is_some_and(tsprep_core::Error::is_config)
            || matches!(cause.downcast_ref(), Some(tsprep_fetch::FetchError::UnknownDataset { .. }))
    });
    if config {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Fetch { dataset, path, mirror } => cmd_fetch(&dataset, &path, mirror.as_deref()),
        Command::Prepare(args) => cmd_prepare(&args),
        Command::Export { entry, format, dtype, out } => cmd_export(&entry, format, dtype, &out),
        Command::Info { entry, json } => cmd_info(&entry, json),
        Command::Validate { entry } => cmd_validate(&entry),
    }
}

fn cmd_fetch(dataset: &str, path: &Path, mirror: Option<&str>) -> anyhow::Result<ExitCode> {
    let mut desc = tsprep_fetch::descriptor(dataset)?;
    if let Some(base) = mirror {
        desc = desc.with_mirror(base);
    }
    let report = tsprep_fetch::fetch(&tsprep_fetch::agent(), &desc, &pipeline::raw_root(path))?;
    if report.is_noop() {
        println!("{}: already present in {}", report.dataset, report.dir.display());
    } else {
        for f in &report.files {
            println!("{}: {:?}, {} files extracted", f.url, f.outcome, f.extracted.len());
        }
        println!("{}: ready in {}", report.dataset, report.dir.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_prepare(args: &PrepareArgs) -> anyhow::Result<ExitCode> {
    let config = args.config();
    let dataset = pipeline::build(&config)?;
    let out = args.out.clone().unwrap_or_else(|| {
        config.path.join(cache::CACHE_DIR).join("prepared").join(config.dataset.cache_name())
    });
    let manifest = export::export_dataset(&dataset, config.to_json(), &out, ExportFormat::Tsprep, DType::F64)?;
    println!("{}", out.display());
    for (split, n) in &manifest.split_sizes {
        println!("  {split}: {n}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_export(entry: &Path, format: ExportFormat, dtype: DType, out: &Path) -> anyhow::Result<ExitCode> {
    let (manifest, splits) =
        export::read_export(entry).with_context(|| format!("reading prepared dataset {}", entry.display()))?;
    let written = export::write_export(out, &splits, &manifest, format, dtype)?;
    println!("{}: {} files", out.display(), written.files.len() + 1);
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(entry: &Path) -> anyhow::Result<ExitCode> {
    match export::validate_dir(entry)? {
        Ok(()) => {
            println!("ok {}", entry.display());
            Ok(ExitCode::SUCCESS)
        }
        Err(file) => {
            eprintln!("checksum mismatch: {}", entry.join(&file).display());
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_info(entry: &Path, json: bool) -> anyhow::Result<ExitCode> {
    let info = if entry.join(export::MANIFEST).is_file() {
        report::from_export(&Manifest::read(entry)?, entry)?
    } else if entry.join(cache::META).is_file() {
        report::from_cache(entry)?
    } else {
        anyhow::bail!("{} is neither an export nor a cache entry", entry.display());
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&info.to_json())?);
    } else {
        print!("{}", info.render());
    }
    Ok(ExitCode::SUCCESS)
}
