//! Command-line front end. [`main_with_args`] returns the process exit code:
//! 0 on success, 2 on usage errors and 1 on runtime errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::error::Error;
use crate::eval::{evaluate_dataset, evaluate_thresholds};
use crate::fsutil::{create_dir_all, write_atomic};
use crate::junction::{detect_junctions, write_junctions_csv};
use crate::ljunction::{decompose, write_ljunctions_csv};
use crate::pipeline::{
    ablate, angle_histogram_csv, dataset_items, fit_dataset_prior, pair_by_stem, save_overlay, write_ablation_csv,
};
use crate::prior::AnglePriorModel;
use crate::raster::{load_image, load_mask, save_png};
use crate::saliency::{compute_gbi, write_raw_csv};
use crate::scene::generate_suite;

const HISTOGRAM_BINS: usize = 36;

#[derive(Debug, Parser)]
#[command(name = "gbi", version, about = "Building index maps from junction saliency")]
pub struct Cli {
    /// TOML configuration; missing keys keep their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect junctions; writes `<stem>.csv`, `<stem>_l.csv` and `<stem>_overlay.png`.
    Junctions {
        image: PathBuf,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
    /// Fit the angle prior on a dataset with `scenes/` and `masks/`.
    FitPrior {
        dataset: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Labeled angle histogram with the fitted densities.
        #[arg(long, value_name = "PATH")]
        histogram: Option<PathBuf>,
    },
    /// Compute the index map; writes `<stem>_gbi.png` and `<stem>_raw.csv`.
    Gbi {
        image: PathBuf,
        /// Angle prior JSON; the bundled prior when omitted.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        #[command(flatten)]
        stages: StageFlags,
    },
    /// Threshold an index map into a binary PNG.
    Segment {
        heatmap: PathBuf,
        #[arg(long, short)]
        threshold: f64,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Score prediction maps against masks with matching file names.
    Eval {
        pred_dir: PathBuf,
        gt_dir: PathBuf,
        /// Receives `summary.json` and `pr.csv`.
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
    /// Mean AP and F of each stage combination on a dataset.
    Ablate {
        dataset: PathBuf,
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Write a synthetic suite of scenes, masks and corner lists.
    GenScenes {
        dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
    /// Print the effective configuration.
    DumpConfig {
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, Args)]
pub struct StageFlags {
    #[arg(long)]
    pub no_angle: bool,
    #[arg(long)]
    pub no_neighbor: bool,
    #[arg(long)]
    pub no_shadow: bool,
    #[arg(long)]
    pub no_blur: bool,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path).map_err(|e| Failure::Usage(e.to_string()))?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let config = load_config(&cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| Failure::Usage(e.to_string()))?;
    pool.install(|| dispatch(cli.command, config))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "image".into())
}

fn load_model(path: Option<&Path>) -> Result<AnglePriorModel, Failure> {
    Ok(match path {
        Some(p) => AnglePriorModel::load(p)?,
        None => AnglePriorModel::shipped(),
    })
}

fn dispatch(command: Command, mut config: Config) -> Result<(), Failure> {
    match command {
        Command::Junctions { image, out_dir } => {
            let img = load_image(&image)?;
            let junctions = detect_junctions(&img, &config.detection)?;
            let ljs: Vec<_> = junctions.iter().flat_map(decompose).collect();
            let name = stem(&image);
            create_dir_all(&out_dir)?;
            write_junctions_csv(out_dir.join(format!("{name}.csv")), &junctions)?;
            write_ljunctions_csv(out_dir.join(format!("{name}_l.csv")), &ljs)?;
            save_overlay(&img, &junctions, out_dir.join(format!("{name}_overlay.png")))?;
        }
        Command::FitPrior { dataset, out, histogram } => {
            let items = dataset_items(&dataset)?;
            let (pool, model) = fit_dataset_prior(&items, &config)?;
            model.save(&out)?;
            if let Some(h) = histogram {
                write_atomic(&h, angle_histogram_csv(&pool, &model, HISTOGRAM_BINS).as_bytes())?;
            }
        }
        Command::Gbi { image, model, out_dir, stages } => {
            let model = load_model(model.as_deref())?;
            let img = load_image(&image)?;
            let s = &mut config.stages;
            s.angle &= !stages.no_angle;
            s.neighbor &= !stages.no_neighbor;
            s.shadow &= !stages.no_shadow;
            s.blur &= !stages.no_blur;
            let run = compute_gbi(&img, &model, &config.detection, &config.saliency, config.stages)?;
            let name = stem(&image);
            create_dir_all(&out_dir)?;
            save_png(&run.map.index, out_dir.join(format!("{name}_gbi.png")))?;
            write_raw_csv(&run.map.raw, out_dir.join(format!("{name}_raw.csv")))?;
        }
        Command::Segment { heatmap, threshold, out } => {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(Failure::Usage(format!("threshold {threshold} must lie in [0, 1]")));
            }
            let map = load_image(&heatmap)?;
            save_png(&map.map(|v| if v >= threshold { 1.0 } else { 0.0 }), &out)?;
        }
        Command::Eval { pred_dir, gt_dir, out_dir } => {
            let thresholds = config.eval.thresholds()?;
            let items = pair_by_stem(&pred_dir, &gt_dir)?;
            let reports = items
                .iter()
                .map(|item| {
                    let pred = load_image(&item.image)?;
                    let gt = load_mask(&item.mask)?;
                    Ok((item.name.clone(), evaluate_thresholds(&pred, &gt, &thresholds)?))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let summary = evaluate_dataset(&reports)?;
            create_dir_all(&out_dir)?;
            summary.write_json(out_dir.join("summary.json"))?;
            let mut csv = String::from("image,threshold,precision,recall,f\n");
            for (name, r) in &reports {
                for p in &r.points {
                    csv.push_str(&format!("{name},{},{},{},{}\n", p.threshold, p.precision, p.recall, p.f));
                }
            }
            write_atomic(&out_dir.join("pr.csv"), csv.as_bytes())?;
        }
        Command::Ablate { dataset, model, out } => {
            let model = load_model(model.as_deref())?;
            let items = dataset_items(&dataset)?;
            write_ablation_csv(&ablate(&items, &model, &config)?, &out)?;
        }
        Command::GenScenes { dir, count } => {
            if count == 0 {
                return Err(Failure::Usage("--count must be at least 1".into()));
            }
            generate_suite(&dir, count, config.seed, &config.suite)?;
        }
        Command::DumpConfig { out } => {
            let text = config.to_toml()?;
            match out {
                Some(p) => write_atomic(&p, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}
