//! `camel` command surface: corpus generation/ingestion, predictor
//! training, frontier construction, grid evaluation, transfer-learning
//! page selection and porting, conformal fitting and the continuous
//! update loop.
//!
//! Every verb honors `--seed` (falling back to the config file, then the
//! CAMEL_SEED environment variable) and prints one machine-readable
//! summary line on success. Exit codes: 0 success, 2 usage error,
//! 1 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use camel_core::adapt;
use camel_core::conformal;
use camel_core::corpus::{generate_corpus, load_corpus, save_corpus, GestureKind, SizeProfile};
use camel_core::device::{
    group_representative, preset_device, DeviceModel, UserGroup, PRESET_DEVICE_NAMES,
};
use camel_core::harness;
use camel_core::ingest;
use camel_core::neural::Dataset;
use camel_core::predictors::{
    self, load_fps_predictor, load_qoe_predictor, save_fps_predictor, save_qoe_predictor,
    FeaturePipeline, PredictorConfig,
};
use camel_core::search::{build_frontier, load_frontier, save_frontier};

#[derive(Parser)]
#[command(name = "camel", version, about = "Energy-aware web-interaction scheduling testbed")]
struct Cli {
    /// Seed for every stochastic step; falls back to the config file,
    /// then the CAMEL_SEED environment variable, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// TOML config file; explicit flags win over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(serde::Deserialize, Default)]
struct FileConfig {
    seed: Option<u64>,
    device: Option<String>,
    scale: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or ingest page corpora.
    Corpus {
        #[command(subcommand)]
        cmd: CorpusCmd,
    },
    /// Train QoE or FPS predictors against the simulator oracles.
    Train(TrainArgs),
    /// Profile the configuration space and keep the Pareto frontier.
    Frontier {
        #[command(subcommand)]
        cmd: FrontierCmd,
    },
    /// Run the cross-validated evaluation grid and write a CSV report.
    Evaluate(EvaluateArgs),
    /// Transfer-learning support: page selection and model porting.
    Adapt {
        #[command(subcommand)]
        cmd: AdaptCmd,
    },
    /// Conformal prediction: fit models and flag suspect predictions.
    Cp {
        #[command(subcommand)]
        cmd: CpCmd,
    },
    /// Apply user feedback on flagged inputs and refresh the models.
    Continuous(ContinuousArgs),
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Generate a seeded synthetic corpus.
    Gen {
        #[arg(long, default_value_t = 40)]
        pages: usize,
        #[arg(long, default_value_t = 4)]
        dom_min: u64,
        #[arg(long, default_value_t = 7000)]
        dom_max: u64,
        #[arg(long, default_value_t = 2000)]
        viewport_height: u32,
        /// Shift applied to every page's image-heaviness, for drifted
        /// corpora ([-1, 1]).
        #[arg(long, default_value_t = 0.0)]
        image_shift: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a corpus from a directory of .html files.
    Ingest {
        #[arg(long)]
        html: PathBuf,
        #[arg(long, default_value_t = 2000)]
        viewport_height: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// qoe or fps.
    #[arg(long)]
    kind: String,
    /// Device preset, required for FPS models.
    #[arg(long)]
    device: Option<String>,
    /// User group (low|mod|high), required for QoE models.
    #[arg(long)]
    user_group: Option<String>,
    /// Existing frontier file; built from the corpus when omitted.
    #[arg(long)]
    frontier: Option<PathBuf>,
    #[arg(long, default_value = "desk")]
    scale: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum FrontierCmd {
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        device: String,
        /// Profiling sample size.
        #[arg(long, default_value_t = 20)]
        pages: usize,
        #[arg(long, default_value = "desk")]
        scale: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Comma-separated device presets, or "all".
    #[arg(long, default_value = "all")]
    devices: String,
    /// Comma-separated user groups (low,mod,high), or "all".
    #[arg(long, default_value = "all")]
    users: String,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value = "desk")]
    scale: String,
    /// Multiplier applied to predicted QoE targets (1.10 for the
    /// conservative policy).
    #[arg(long, default_value_t = 1.0)]
    target_scale: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum AdaptCmd {
    /// Cluster the corpus and choose two profiling pages per cluster.
    Select {
        /// Model bundle supplying the feature space (qoe or fps).
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 15)]
        kmax: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Port an FPS predictor to a new device using the selected pages.
    Transfer {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        pages: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        device: String,
        #[arg(long)]
        frontier: Option<PathBuf>,
        #[arg(long, default_value = "desk")]
        scale: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum CpCmd {
    /// Fit a conformal model around a trained QoE gesture model.
    Fit {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        user_group: String,
        #[arg(long, default_value = "scroll")]
        gesture: String,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 10)]
        knn: usize,
        #[arg(long, default_value = "desk")]
        scale: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a corpus and log suspect predictions.
    Eval {
        #[arg(long)]
        cp: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        threshold: f64,
        #[arg(long, default_value = "desk")]
        scale: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ContinuousArgs {
    #[arg(long)]
    cp: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    user_group: String,
    #[arg(long)]
    flagged: PathBuf,
    #[arg(long, default_value = "desk")]
    scale: String,
    #[arg(long)]
    out_model: PathBuf,
    #[arg(long)]
    out_cp: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("camel: error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

fn resolve_seed(flag: Option<u64>, config: &FileConfig) -> u64 {
    flag.or(config.seed)
        .or_else(|| std::env::var("CAMEL_SEED").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0)
}

fn predictor_config(scale: &str, seed: u64) -> Result<PredictorConfig> {
    match scale {
        "desk" => Ok(PredictorConfig::desk(seed)),
        "paper" => Ok(PredictorConfig::paper(seed)),
        other => bail!("unknown scale {other:?}; use desk or paper"),
    }
}

fn parse_devices(spec: &str, config: &FileConfig) -> Result<Vec<DeviceModel>> {
    let spec = if spec == "all" {
        match &config.device {
            Some(d) if spec == "all" && !d.is_empty() => spec,
            _ => spec,
        }
    } else {
        spec
    };
    let names: Vec<&str> = if spec == "all" {
        PRESET_DEVICE_NAMES.to_vec()
    } else {
        spec.split(',').map(str::trim).collect()
    };
    names.iter().map(|n| Ok(preset_device(n)?)).collect()
}

fn parse_groups(spec: &str) -> Result<Vec<UserGroup>> {
    if spec == "all" {
        return Ok(UserGroup::ALL.to_vec());
    }
    spec.split(',')
        .map(|s| Ok(UserGroup::parse(s.trim())?))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let file_config = load_file_config(&cli.config)?;
    let seed = resolve_seed(cli.seed, &file_config);

    match cli.command {
        Command::Corpus { cmd } => match cmd {
            CorpusCmd::Gen { pages, dom_min, dom_max, viewport_height, image_shift, out } => {
                let profile = SizeProfile {
                    dom_nodes: (dom_min, dom_max),
                    viewport_height_px: viewport_height,
                    image_theme_shift: image_shift,
                };
                let corpus = generate_corpus(seed, pages, &profile)?;
                save_corpus(&corpus, &out)?;
                println!("camel: verb=corpus-gen seed={seed} pages={pages} out={}", out.display());
            }
            CorpusCmd::Ingest { html, viewport_height, out } => {
                let corpus = ingest::ingest_dir(&html, viewport_height)?;
                save_corpus(&corpus, &out)?;
                println!(
                    "camel: verb=corpus-ingest pages={} out={}",
                    corpus.pages.len(),
                    out.display()
                );
            }
        },

        Command::Train(args) => {
            let cfg = predictor_config(scale_of(&args.scale, &file_config), seed)?;
            let corpus = load_corpus(&args.corpus)?;
            match args.kind.as_str() {
                "qoe" => {
                    let group = UserGroup::parse(
                        args.user_group.as_deref().context("--user-group is required for qoe")?,
                    )?;
                    let user = group_representative(group);
                    let model = predictors::train_qoe_predictor(&corpus, &user, &cfg, seed)?;
                    save_qoe_predictor(&model, &args.out)?;
                    println!(
                        "camel: verb=train kind=qoe group={} gestures=3 out={}",
                        group.name(),
                        args.out.display()
                    );
                }
                "fps" => {
                    let device =
                        preset_device(args.device.as_deref().context("--device is required for fps")?)?;
                    let frontier = match &args.frontier {
                        Some(path) => load_frontier(path)?,
                        None => {
                            let sample: Vec<_> = corpus.pages.iter().take(20).collect();
                            build_frontier(&device, &sample, &[500.0, 1500.0, 3000.0], &cfg.erfs, seed)?
                        }
                    };
                    let model =
                        predictors::train_fps_predictor(&corpus, &device, &frontier, &cfg, seed)?;
                    save_fps_predictor(&model, &args.out)?;
                    println!(
                        "camel: verb=train kind=fps device={} gestures=3 out={}",
                        device.name,
                        args.out.display()
                    );
                }
                other => bail!("unknown model kind {other:?}; use qoe or fps"),
            }
        }

        Command::Frontier { cmd } => match cmd {
            FrontierCmd::Build { corpus, device, pages, scale, out } => {
                let cfg = predictor_config(scale_of(&scale, &file_config), seed)?;
                let corpus = load_corpus(&corpus)?;
                let device = preset_device(&device)?;
                let sample: Vec<_> = corpus.pages.iter().take(pages.max(1)).collect();
                let frontier =
                    build_frontier(&device, &sample, &[500.0, 1500.0, 3000.0], &cfg.erfs, seed)?;
                save_frontier(&frontier, &out)?;
                println!(
                    "camel: verb=frontier-build device={} entries={} out={}",
                    device.name,
                    frontier.len(),
                    out.display()
                );
            }
        },

        Command::Evaluate(args) => {
            let cfg = predictor_config(scale_of(&args.scale, &file_config), seed)?;
            let corpus = load_corpus(&args.corpus)?;
            let devices = parse_devices(&args.devices, &file_config)?;
            let groups = parse_groups(&args.users)?;
            let models =
                harness::train_fold_models(&corpus, &devices, &groups, args.folds, &cfg, seed)?;
            let report = harness::run_grid(
                &corpus,
                &devices,
                &groups,
                &models,
                &cfg,
                seed,
                args.target_scale,
            )?;
            harness::save_report(&report, &args.out)?;
            println!(
                "camel: verb=evaluate rows={} saving={:.4} violation={:.4} oracle_saving={:.4} out={}",
                report.rows.len(),
                report.camel_saving_geomean,
                report.camel_violation_geomean,
                report.oracle_saving_geomean,
                args.out.display()
            );
        }

        Command::Adapt { cmd } => match cmd {
            AdaptCmd::Select { model, corpus, kmax, out } => {
                let corpus = load_corpus(&corpus)?;
                let pipeline = load_any_pipeline(&model)?;
                let (reps, clustering) = adapt::select_transfer_pages(&corpus, &pipeline, kmax, seed)?;
                let ids = reps.page_ids();
                let mut text = String::from("# camel transfer pages v1\n");
                for id in &ids {
                    text.push_str(id);
                    text.push('\n');
                }
                std::fs::write(&out, text)?;
                println!(
                    "camel: verb=adapt-select clusters={} pages={} out={}",
                    clustering.k,
                    ids.len(),
                    out.display()
                );
            }
            AdaptCmd::Transfer { base, pages, corpus, device, frontier, scale, out } => {
                let cfg = predictor_config(scale_of(&scale, &file_config), seed)?;
                let corpus = load_corpus(&corpus)?;
                let base = load_fps_predictor(&base)?;
                let device = preset_device(&device)?;
                let page_ids: Vec<String> = std::fs::read_to_string(&pages)?
                    .lines()
                    .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
                    .map(|l| l.trim().to_string())
                    .collect();
                let frontier = match &frontier {
                    Some(path) => load_frontier(path)?,
                    None => {
                        let sample: Vec<_> = corpus.pages.iter().take(20).collect();
                        build_frontier(&device, &sample, &[500.0, 1500.0, 3000.0], &cfg.erfs, seed)?
                    }
                };
                let ported = adapt::transfer_fps_predictor(
                    &base, &corpus, &page_ids, &device, &frontier, &cfg, seed,
                )?;
                save_fps_predictor(&ported, &out)?;
                println!(
                    "camel: verb=adapt-transfer device={} pages={} out={}",
                    device.name,
                    page_ids.len(),
                    out.display()
                );
            }
        },

        Command::Cp { cmd } => match cmd {
            CpCmd::Fit { model, corpus, user_group, gesture, eps, knn, scale, out } => {
                let cfg = predictor_config(scale_of(&scale, &file_config), seed)?;
                let corpus = load_corpus(&corpus)?;
                let qoe = load_qoe_predictor(&model)?;
                let gesture = GestureKind::parse(&gesture)?;
                let group = UserGroup::parse(&user_group)?;
                let user = group_representative(group);
                let gm = qoe.model(gesture)?;
                let data = predictors::build_qoe_dataset(
                    &corpus,
                    &user,
                    gesture,
                    cfg.speeds.for_gesture(gesture),
                    &gm.pipeline,
                )?;
                let (proper, calibration) = split_for_cp(&data);
                let cp = conformal::fit_cp(|x| gm.network.forward(x), &proper, &calibration, knn, eps)?;
                conformal::save_cp_bundle(
                    &conformal::CpBundle { gesture, epsilon: eps, knn_k: knn, cp },
                    &out,
                )?;
                println!(
                    "camel: verb=cp-fit gesture={} n_cal={} out={}",
                    gesture.name(),
                    calibration.len(),
                    out.display()
                );
            }
            CpCmd::Eval { cp, model, corpus, threshold, scale, out } => {
                let cfg = predictor_config(scale_of(&scale, &file_config), seed)?;
                let corpus = load_corpus(&corpus)?;
                let qoe = load_qoe_predictor(&model)?;
                let bundle = conformal::load_cp_bundle(&cp)?;
                let gm = qoe.model(bundle.gesture)?;
                let mut flagged = Vec::new();
                let mut total = 0usize;
                for page in &corpus.pages {
                    for &speed in cfg.speeds.for_gesture(bundle.gesture) {
                        let input = qoe.input_for(bundle.gesture, page, 0, speed)?;
                        let x = predictors::encode_qoe_input(&input);
                        let bound = conformal::predict_interval(
                            &bundle.cp,
                            |x| gm.network.forward(x),
                            &x,
                            bundle.epsilon,
                        )?;
                        total += 1;
                        if bound.relative_bound > threshold {
                            flagged.push(conformal::FlaggedInput {
                                page_id: page.id.clone(),
                                gesture: bundle.gesture,
                                speed_px_s: speed,
                                offset_px: 0,
                                input: x,
                                center: bound.center,
                                half_width: bound.half_width,
                            });
                        }
                    }
                }
                conformal::save_flagged_log(&flagged, &out)?;
                println!(
                    "camel: verb=cp-eval scored={total} flagged={} out={}",
                    flagged.len(),
                    out.display()
                );
            }
        },

        Command::Continuous(args) => {
            let cfg = predictor_config(scale_of(&args.scale, &file_config), seed)?;
            let corpus = load_corpus(&args.corpus)?;
            let mut qoe = load_qoe_predictor(&args.model)?;
            let bundle = conformal::load_cp_bundle(&args.cp)?;
            let flagged = conformal::load_flagged_log(&args.flagged)?;
            let group = UserGroup::parse(&args.user_group)?;
            let user = group_representative(group);
            let gm = qoe.model(bundle.gesture)?.clone();
            let tl_data = predictors::build_qoe_dataset(
                &corpus,
                &user,
                bundle.gesture,
                cfg.speeds.for_gesture(bundle.gesture),
                &gm.pipeline,
            )?;
            let mut train_cfg = cfg.qoe_training.clone();
            train_cfg.epochs = train_cfg.epochs / 4 + 1;
            train_cfg.seed = seed;
            let outcome = conformal::continuous_update(
                &bundle.cp,
                &gm.network,
                &flagged,
                &corpus,
                &user,
                &tl_data,
                &train_cfg,
                bundle.knn_k,
                bundle.epsilon,
            )?;
            qoe.models.insert(
                bundle.gesture,
                predictors::GestureModel { network: outcome.network, pipeline: gm.pipeline },
            );
            save_qoe_predictor(&qoe, &args.out_model)?;
            conformal::save_cp_bundle(
                &conformal::CpBundle {
                    gesture: bundle.gesture,
                    epsilon: bundle.epsilon,
                    knn_k: bundle.knn_k,
                    cp: outcome.cp,
                },
                &args.out_cp,
            )?;
            println!(
                "camel: verb=continuous labeled={} skipped={} out_model={} out_cp={}",
                outcome.labeled,
                outcome.skipped,
                args.out_model.display(),
                args.out_cp.display()
            );
        }
    }
    Ok(())
}

fn scale_of<'a>(flag: &'a str, config: &'a FileConfig) -> &'a str {
    if flag == "desk" {
        // "desk" is the clap default; a config file may override it
        config.scale.as_deref().unwrap_or(flag)
    } else {
        flag
    }
}

/// Every fifth sample calibrates; the rest feed the difficulty estimator.
fn split_for_cp(data: &Dataset) -> (Dataset, Dataset) {
    let calib_idx: Vec<usize> = (0..data.len()).filter(|i| i % 5 == 0).collect();
    let proper_idx: Vec<usize> = (0..data.len()).filter(|i| i % 5 != 0).collect();
    (data.subset(&proper_idx), data.subset(&calib_idx))
}

/// A model bundle of either kind supplies the clustering feature space.
fn load_any_pipeline(path: &Path) -> Result<FeaturePipeline> {
    if let Ok(fps) = load_fps_predictor(path) {
        let model = fps.model(GestureKind::Scroll)?;
        return Ok(model.pipeline.clone());
    }
    let qoe = load_qoe_predictor(path)?;
    Ok(qoe.model(GestureKind::Scroll)?.pipeline.clone())
}
