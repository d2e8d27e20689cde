use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fiesta_core::amplitude::angular_density;
use fiesta_core::fourier::{decompose, fft2_centered};
use fiesta_core::pipeline::{self, BatchReport, Manifest, Mode, SideInputs};
use fiesta_core::preprocess::{self, Modality};
use fiesta_core::{io, metrics, phantom, AugConfig};

const SEED_ENV: &str = "FIESTA_SEED";

#[derive(Parser)]
#[command(name = "fiesta", version, about = "Fourier-domain augmentation for medical image slices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Context-aware augmentation of every slice.
    Fat(BatchArgs),
    /// Location-aware augmentation; needs label maps.
    Lfat(BatchArgs),
    /// Uncertainty-guided fusion of the two augmented views.
    Mutual(BatchArgs),
    /// All three steps per slice.
    All(BatchArgs),
    /// Angular density of each slice's amplitude spectrum as CSV.
    Density(IoArgs),
    /// Per-class Dice between a predicted (--input) and reference (--labels) label map.
    Dice {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Intensity normalization, center crop and resize of raw slices.
    Preprocess {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "ct")]
        modality: ModalityArg,
        #[arg(long, default_value_t = preprocess::TARGET_SIZE)]
        size: usize,
    },
    /// Regenerate one item of a previous batch from its report.
    Replay {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        item: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic phantom data set (slices, labels, probability maps).
    Phantom {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = preprocess::TARGET_SIZE)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Slice directory, single PFM, or JSON manifest.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Probability-map stem, or a directory of per-slice stems.
    #[arg(long)]
    prob_ca: Option<PathBuf>,
    #[arg(long)]
    prob_la: Option<PathBuf>,
    /// Precomputed uncertainty map (PFM), or a directory of them.
    #[arg(long)]
    unc_ca: Option<PathBuf>,
    #[arg(long)]
    unc_la: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct IoArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModalityArg {
    Ct,
    Mri,
}

fn resolve_config(path: Option<&Path>, seed: Option<u64>) -> Result<AugConfig> {
    let mut cfg = match path {
        Some(p) => AugConfig::load(p)?,
        None => AugConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Ok(value) = std::env::var(SEED_ENV) {
        cfg.seed = value.trim().parse().with_context(|| format!("{SEED_ENV}={value:?} is not a u64"))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_batch(mode: Mode, args: BatchArgs) -> Result<ExitCode> {
    let cfg = resolve_config(args.config.as_deref(), args.seed)?;
    let side = SideInputs {
        labels: args.labels,
        prob_ca: args.prob_ca,
        prob_la: args.prob_la,
        unc_ca: args.unc_ca,
        unc_la: args.unc_la,
    };
    let manifest = Manifest::discover(&args.input, &side)?;
    if manifest.items.is_empty() {
        bail!("no input slices found at {}", args.input.display());
    }
    let report = pipeline::run_batch(&manifest, &cfg, mode, &args.out)?;
    for item in report.items.iter().filter(|i| !i.ok) {
        eprintln!("item {} ({}): {}", item.index, item.stem, item.errors.join("; "));
    }
    let failed = report.failed_items();
    eprintln!(
        "{} of {} items ok, report at {}",
        report.items.len() - failed,
        report.items.len(),
        args.out.join(pipeline::REPORT_FILE).display()
    );
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn list_slices(input: &Path) -> Result<Vec<PathBuf>> {
    let manifest = Manifest::discover(input, &SideInputs::default())?;
    Ok(manifest.items.into_iter().map(|i| i.image).collect())
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn run_density(args: IoArgs) -> Result<ExitCode> {
    create_dir(&args.out)?;
    let mut failed = 0;
    for path in list_slices(&args.input)? {
        let result = io::read_image(&path).and_then(|img| {
            let (amp, _) = decompose(&fft2_centered(&img)?);
            let csv = angular_density(&amp).to_csv();
            let target = args.out.join(format!("{}.density.csv", stem(&path)));
            fs::write(&target, csv).map_err(|e| fiesta_core::FiestaError::Io { path: target, source: e })
        });
        if let Err(e) = result {
            eprintln!("{}: {e}", path.display());
            failed += 1;
        }
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn run_dice(input: &Path, labels: &Path, out: Option<&Path>) -> Result<ExitCode> {
    let pred = io::read_labels(input)?;
    let gt = io::read_labels(labels)?;
    let classes = pred.num_classes().max(gt.num_classes());
    let scores = metrics::dice_score(&pred.with_num_classes(classes)?, &gt.with_num_classes(classes)?)?;
    let mut csv = String::from("class,dice\n");
    for (i, s) in scores.iter().enumerate() {
        csv.push_str(&format!("{},{s}\n", i + 1));
    }
    print!("{csv}");
    if let Some(dir) = out {
        create_dir(dir)?;
        let target = dir.join("dice.csv");
        fs::write(&target, csv).with_context(|| format!("writing {}", target.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn run_preprocess(args: IoArgs, labels: Option<PathBuf>, modality: ModalityArg, size: usize) -> Result<ExitCode> {
    let modality = match modality {
        ModalityArg::Ct => Modality::Ct,
        ModalityArg::Mri => Modality::Mri,
    };
    create_dir(&args.out)?;
    let label_out = args.out.join("labels");
    let mut failed = 0;
    for path in list_slices(&args.input)? {
        let name = stem(&path);
        let result = io::read_raster(&path).and_then(|raster| {
            let img = fiesta_core::Image2D::new(raster.height, raster.width, raster.data)?;
            io::write_image(&args.out.join(format!("{name}.pfm")), &preprocess::preprocess_slice(&img, modality, size)?)?;
            if let Some(dir) = &labels {
                let src = if dir.is_dir() { dir.join(format!("{name}.pgm")) } else { dir.clone() };
                let resized = preprocess::preprocess_labels(&io::read_labels(&src)?, size)?;
                fs::create_dir_all(&label_out).map_err(|e| fiesta_core::FiestaError::Io {
                    path: label_out.clone(),
                    source: e,
                })?;
                io::write_labels(&label_out.join(format!("{name}.pgm")), &resized)?;
            }
            Ok(())
        });
        if let Err(e) = result {
            eprintln!("{}: {e}", path.display());
            failed += 1;
        }
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn run_replay(report: &Path, item: usize, out: &Path) -> Result<ExitCode> {
    let report = BatchReport::load(report)?;
    for path in pipeline::replay_item(&report, item, out)? {
        println!("{}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Fat(args) => run_batch(Mode::Fat, args),
        Command::Lfat(args) => run_batch(Mode::Lfat, args),
        Command::Mutual(args) => run_batch(Mode::Mutual, args),
        Command::All(args) => run_batch(Mode::All, args),
        Command::Density(args) => run_density(args),
        Command::Dice { input, labels, out } => run_dice(&input, &labels, out.as_deref()),
        Command::Preprocess { io, labels, modality, size } => run_preprocess(io, labels, modality, size),
        Command::Replay { report, item, out } => run_replay(&report, item, &out),
        Command::Phantom { out, count, size, seed } => {
            let paths = phantom::write_phantom_set(&out, count, size, seed)?;
            eprintln!("wrote {} slices to {}", paths.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
