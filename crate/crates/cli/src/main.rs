//! `skelimg`: encode skeleton sequences as images, train the CNN, evaluate
//! under the NTU split protocols and fuse scores.

mod manifest;
mod pipeline;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use skelimg_core::eval::{fuse_tables, split_metas};
use skelimg_core::repr::{quantize_to_png, write_tensor_file};
use skelimg_core::{
    DatasetKind, EncodeConfig, EvalReport, Representation, ScoreTable, SplitProtocol, SynthSpec,
};

use manifest::Manifest;
use pipeline::{CnnOverrides, Encoded};

#[derive(Parser)]
#[command(name = "skelimg", version, about = "Skeleton image action recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the .skeleton files of a dataset directory as an index CSV.
    Index(IndexArgs),
    /// Write synthetic .skeleton fixtures.
    Synth(SynthArgs),
    /// Encode a dataset directory into image tensors.
    Encode(EncodeArgs),
    /// Train one model per image kind on the train side of a split.
    Train(TrainArgs),
    /// Score the test side of a split with trained models.
    Eval(EvalArgs),
    /// Average score files and evaluate the result.
    Fuse(FuseArgs),
    /// Encode, train and evaluate in one go.
    Run(RunArgs),
}

#[derive(Args)]
struct InputDir {
    /// Input directory.
    #[arg(long, conflicts_with = "dir")]
    root: Option<PathBuf>,
    #[arg(value_name = "DIR")]
    dir: Option<PathBuf>,
}

impl InputDir {
    fn path(&self) -> Result<&Path> {
        match (&self.root, &self.dir) {
            (Some(p), _) | (None, Some(p)) => Ok(p),
            (None, None) => bail!("no input directory; pass --root DIR"),
        }
    }
}

#[derive(Args)]
struct ProtocolArgs {
    /// cross-subject, cross-view or cross-setup (short: xsub, xview, xset).
    #[arg(long, default_value = "cross-subject")]
    protocol: String,
    /// Protocol file overriding the shipped defaults.
    #[arg(long)]
    protocol_config: Option<PathBuf>,
    /// ntu60, ntu120 or synthetic; picks the default subject list.
    #[arg(long, default_value = "ntu60")]
    dataset: DatasetKind,
}

impl ProtocolArgs {
    fn resolve(&self) -> Result<SplitProtocol> {
        match &self.protocol_config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                SplitProtocol::parse(&text).with_context(|| format!("protocol {}", path.display()))
            }
            None => Ok(SplitProtocol::default_for(&self.protocol, self.dataset)?),
        }
    }
}

#[derive(Args)]
struct CnnArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Filters of the three conv layers, e.g. 8,16,32.
    #[arg(long, value_parser = parse_filters)]
    filters: Option<[usize; 3]>,
    #[arg(long)]
    hidden: Option<usize>,
    /// Output classes; defaults to the largest action id seen.
    #[arg(long)]
    classes: Option<usize>,
}

fn parse_filters(s: &str) -> Result<[usize; 3], String> {
    let values: Vec<usize> = s
        .split(',')
        .map(|v| v.trim().parse().map_err(|_| format!("{v:?} is not a filter count")))
        .collect::<Result<_, _>>()?;
    values
        .try_into()
        .map_err(|_| "expected three comma-separated filter counts".to_string())
}

impl CnnArgs {
    fn overrides(&self) -> CnnOverrides {
        CnnOverrides {
            epochs: self.epochs,
            lr: self.lr,
            batch: self.batch,
            momentum: self.momentum,
            dropout: self.dropout,
            filters: self.filters,
            hidden: self.hidden,
            classes: self.classes,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct IndexArgs {
    #[command(flatten)]
    input: InputDir,
    #[arg(long, default_value = "ntu60")]
    dataset: DatasetKind,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// key = value spec file; built-in defaults when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the seed in the spec.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    input: InputDir,
    #[arg(long)]
    repr: Representation,
    #[arg(long)]
    out: PathBuf,
    /// Also write quantized PNGs under <out>/png.
    #[arg(long)]
    png: bool,
    #[arg(long, default_value_t = 2)]
    persons: usize,
    /// Seed for the random joint order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "synthetic")]
    dataset: DatasetKind,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory written by `encode`.
    #[command(flatten)]
    input: InputDir,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[command(flatten)]
    cnn: CnnArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory written by `encode`.
    #[command(flatten)]
    input: InputDir,
    /// Directory written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FuseArgs {
    /// Score CSV files.
    #[arg(required = true)]
    scores: Vec<PathBuf>,
    /// Protocol name recorded in the summary.
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Dataset directory of .skeleton files.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    root: Option<PathBuf>,
    /// Synthetic data spec instead of a dataset directory.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value = "tsrji-stacked")]
    repr: Representation,
    #[arg(long, default_value_t = 2)]
    persons: usize,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[command(flatten)]
    cnn: CnnArgs,
    #[arg(long)]
    out: PathBuf,
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn cmd_index(args: &IndexArgs) -> Result<()> {
    let index = pipeline::index_root(args.input.path()?, args.dataset)?;
    create_dir(&args.out)?;
    write_file(&args.out.join("index.csv"), index.to_csv())?;
    let mut m = Manifest::new("index", 0);
    m.set("root", args.input.path()?.display())
        .set("dataset", args.dataset)
        .set("entries", index.entries.len());
    m.write(&args.out)?;
    println!("{} sequences indexed", index.entries.len());
    Ok(())
}

fn load_spec(path: Option<&Path>) -> Result<SynthSpec> {
    match path {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SynthSpec::parse(&text).with_context(|| format!("spec {}", p.display()))
        }
        None => Ok(SynthSpec::default()),
    }
}

fn spec_manifest(m: &mut Manifest, spec: &SynthSpec) {
    m.set("synth.num_classes", spec.num_classes)
        .set("synth.samples_per_class", spec.samples_per_class)
        .set("synth.frames", spec.frames)
        .set("synth.noise_std", spec.noise_std)
        .set("synth.seed", spec.seed)
        .set("synth.persons", spec.persons);
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut spec = load_spec(args.spec.as_deref())?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let data = skelimg_core::synth::generate(&spec, &skelimg_core::kinect25_topology())?;
    skelimg_core::synth::write_fixtures(&args.out, &data)
        .with_context(|| format!("writing fixtures to {}", args.out.display()))?;
    let mut m = Manifest::new("synth", spec.seed);
    spec_manifest(&mut m, &spec);
    m.write(&args.out)?;
    println!("{} sequences written to {}", data.len(), args.out.display());
    Ok(())
}

fn cmd_encode(args: &EncodeArgs) -> Result<()> {
    let root = args.input.path()?;
    let index = pipeline::index_root(root, args.dataset)?;
    let seqs = pipeline::load_sequences(&index)?;
    let cfg = EncodeConfig {
        persons: args.persons,
        seed: args.seed,
        ..EncodeConfig::default()
    };
    let images = pipeline::encode_sequences(&seqs, args.repr, &cfg)?;
    create_dir(&args.out)?;
    let png_dir = args.out.join("png");
    if args.png {
        create_dir(&png_dir)?;
    }
    images.par_iter().try_for_each(|img| -> Result<()> {
        let name = &img.source_meta.source_name;
        let kind = img.kind.to_string();
        let path = pipeline::tensor_path(&args.out, name, &kind);
        write_tensor_file(&path, img).with_context(|| format!("writing {}", path.display()))?;
        if args.png {
            let pngs = quantize_to_png(img).with_context(|| format!("rendering {name}"))?;
            let single = pngs.len() == 1;
            for (c, bytes) in pngs.iter().enumerate() {
                let file = if single {
                    format!("{name}.{kind}.png")
                } else {
                    format!("{name}.{kind}.c{c}.png")
                };
                write_file(&png_dir.join(file), bytes)?;
            }
        }
        Ok(())
    })?;
    write_file(&args.out.join("index.csv"), index.to_csv())?;
    let mut m = Manifest::new("encode", args.seed);
    m.set("root", root.display())
        .set("repr", args.repr)
        .set("persons", args.persons)
        .set("target_frames", cfg.target_frames)
        .set("sequences", seqs.len())
        .set("images", images.len());
    m.write(&args.out)?;
    println!("{} images from {} sequences", images.len(), seqs.len());
    Ok(())
}

/// Trains one model per image kind on the train side of `protocol` and
/// writes checkpoints and histories into `out`.
fn train_all(
    encoded: &Encoded,
    protocol: &SplitProtocol,
    cnn: &CnnArgs,
    out: &Path,
    m: &mut Manifest,
) -> Result<BTreeMap<String, skelimg_core::CnnModel>> {
    let classes = pipeline::observed_classes(encoded);
    let overrides = cnn.overrides();
    let trained: Vec<_> = encoded
        .par_iter()
        .map(|(kind, samples)| -> Result<_> {
            let split = split_metas(samples.iter().map(|s| &s.meta), protocol)
                .with_context(|| format!("splitting {kind} images"))?;
            let (model, history) =
                pipeline::train_group(kind, samples, &split.train, &overrides, classes)?;
            Ok((kind.clone(), split.train.len(), model, history))
        })
        .collect::<Result<_>>()?;
    let mut models = BTreeMap::new();
    for (kind, n, model, history) in trained {
        pipeline::write_checkpoint(out, &kind, &model)?;
        write_file(&out.join(format!("history.{kind}.csv")), history.to_csv())?;
        m.set(&format!("{kind}.train_samples"), n);
        m.set_cnn(&kind, model.config());
        models.insert(kind, model);
    }
    Ok(models)
}

/// The protocol's defining field, e.g. `test_cameras = 1`.
fn protocol_fields(protocol: &SplitProtocol) -> String {
    protocol.to_config().lines().skip(1).collect::<Vec<_>>().join("; ")
}

fn write_report(dir: &Path, table: &ScoreTable, report: &EvalReport) -> Result<()> {
    create_dir(dir)?;
    write_file(&dir.join("scores.csv"), table.to_csv())?;
    report
        .write_to(dir)
        .with_context(|| format!("writing report to {}", dir.display()))
}

/// Scores the test side per kind, then fuses when there are several kinds.
fn eval_all(
    encoded: &Encoded,
    models: &BTreeMap<String, skelimg_core::CnnModel>,
    protocol: &SplitProtocol,
    out: &Path,
    m: &mut Manifest,
) -> Result<()> {
    let mut tables = Vec::new();
    for (kind, model) in models {
        let samples = encoded
            .get(kind)
            .with_context(|| format!("no {kind} images for checkpoint model.{kind}.ckpt"))?;
        let split = split_metas(samples.iter().map(|s| &s.meta), protocol)
            .with_context(|| format!("splitting {kind} images"))?;
        let table = pipeline::score_group(model, samples, &split.test)
            .with_context(|| format!("scoring {kind} images"))?;
        let report = table.evaluate()?.with_protocol(protocol.clone());
        write_report(&out.join(kind), &table, &report)?;
        println!("{kind}: {}", report.summary_line());
        m.set(&format!("{kind}.summary"), report.summary_line());
        tables.push(table);
    }
    if tables.len() > 1 {
        let fused = fuse_tables(&tables)?;
        let report = fused.evaluate()?.with_protocol(protocol.clone());
        write_report(&out.join("fused"), &fused, &report)?;
        println!("fused: {}", report.summary_line());
        m.set("fused.summary", report.summary_line());
    }
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let root = args.input.path()?;
    let protocol = args.protocol.resolve()?;
    let encoded = pipeline::read_encoded(root)?;
    create_dir(&args.out)?;
    let mut m = Manifest::new("train", args.cnn.seed);
    m.set("root", root.display()).set("protocol", protocol.name())
        .set("protocol_config", protocol_fields(&protocol));
    train_all(&encoded, &protocol, &args.cnn, &args.out, &mut m)?;
    write_file(&args.out.join("protocol.cfg"), protocol.to_config())?;
    m.write(&args.out)
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let root = args.input.path()?;
    let protocol = args.protocol.resolve()?;
    let encoded = pipeline::read_encoded(root)?;
    let models = pipeline::read_checkpoints(&args.model)?;
    create_dir(&args.out)?;
    let mut m = Manifest::new("eval", 0);
    m.set("root", root.display())
        .set("model", args.model.display())
        .set("protocol", protocol.name())
        .set("protocol_config", protocol_fields(&protocol));
    eval_all(&encoded, &models, &protocol, &args.out, &mut m)?;
    m.write(&args.out)
}

fn cmd_fuse(args: &FuseArgs) -> Result<()> {
    let tables = args
        .scores
        .iter()
        .map(|p| ScoreTable::read(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let fused = fuse_tables(&tables)?;
    let mut report = fused.evaluate()?;
    if let Some(name) = &args.protocol {
        report = report.with_protocol(SplitProtocol::default_for(name, DatasetKind::Ntu60)?);
    }
    write_report(&args.out, &fused, &report)?;
    let mut m = Manifest::new("fuse", 0);
    let inputs: Vec<String> = args.scores.iter().map(|p| p.display().to_string()).collect();
    m.set("inputs", inputs.join(" "))
        .set("summary", report.summary_line());
    m.write(&args.out)?;
    println!("{}", report.summary_line());
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let protocol = args.protocol.resolve()?;
    let mut m = Manifest::new("run", args.cnn.seed);
    let seqs = match (&args.root, &args.spec) {
        (Some(root), None) => {
            m.set("root", root.display());
            pipeline::load_sequences(&pipeline::index_root(root, args.protocol.dataset)?)?
        }
        (None, Some(path)) => {
            let spec = load_spec(Some(path))?;
            spec_manifest(&mut m, &spec);
            pipeline::synth_sequences(&spec)?
        }
        _ => bail!("pass exactly one of --root and --spec"),
    };
    let cfg = EncodeConfig {
        persons: args.persons,
        seed: args.cnn.seed,
        ..EncodeConfig::default()
    };
    let encoded = pipeline::group(pipeline::encode_sequences(&seqs, args.repr, &cfg)?);
    create_dir(&args.out)?;
    m.set("repr", args.repr)
        .set("persons", args.persons)
        .set("sequences", seqs.len())
        .set("protocol", protocol.name())
        .set("protocol_config", protocol_fields(&protocol));
    let models = train_all(&encoded, &protocol, &args.cnn, &args.out, &mut m)?;
    eval_all(&encoded, &models, &protocol, &args.out, &mut m)?;
    m.write(&args.out)
}

/// Caps the worker pool at `SKELIMG_THREADS` when set.
fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var("SKELIMG_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("SKELIMG_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring worker threads")
}

fn run(cli: &Cli) -> Result<()> {
    init_threads()?;
    match &cli.command {
        Command::Index(a) => cmd_index(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Fuse(a) => cmd_fuse(a),
        Command::Run(a) => cmd_run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("skelimg: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
