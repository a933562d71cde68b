//! Experiment harness: simulates interaction sessions under the full
//! decision loop, a stock-governor baseline and a ground-truth oracle,
//! then aggregates energy savings and QoE violations across a
//! cross-validated grid.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Gesture, GestureKind, PageDescriptor};
use crate::device::{group_representative, DeviceModel, UserGroup, UserModel};
use crate::error::{Error, Result};
use crate::predictors::{
    encode_fps_input, FpsInput, FpsPredictor, PredictorConfig, QoePredictor, SAMPLING_WINDOW_S,
};
use crate::rng;
use crate::search::{
    build_frontier, search_min_energy, Cluster, ConfigFrontier, ProcessingConfiguration,
};

/// Trained models plus the frontier they select from, for one
/// (device, user group) pairing.
#[derive(Debug, Clone)]
pub struct TrainedStack {
    pub qoe: QoePredictor,
    pub fps: FpsPredictor,
    pub frontier: ConfigFrontier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Camel,
    Baseline,
    Oracle,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Camel => "camel",
            Mode::Baseline => "baseline",
            Mode::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "camel" => Ok(Mode::Camel),
            "baseline" => Ok(Mode::Baseline),
            "oracle" => Ok(Mode::Oracle),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Outcome of one simulated interaction session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub energy_j: f64,
    pub baseline_energy_j: f64,
    /// 1 - energy / baseline_energy.
    pub saving: f64,
    pub fps_trace: Vec<f64>,
    /// The session's QoE target: mean true minimum-acceptable FPS.
    pub fps_min: f64,
    /// Windows whose achieved FPS fell below the per-window threshold.
    pub delta: usize,
    /// The headline ratio delta / fps_min.
    pub violation: f64,
    /// Secondary plain fraction delta / |trace|.
    pub violation_fraction: f64,
    /// True when every window's search met its predicted target.
    pub all_met: bool,
}

/// Drives one session with explicit target and FPS policies; the decision
/// loop queries them once per 50 ms window. After each window `observe`
/// receives (predicted fps of the chosen configuration, achieved fps) —
/// achieved FPS is directly measurable on a real platform, so policies may
/// use it for in-session feedback.
pub fn run_session_with_policies<T, F, O>(
    page: &PageDescriptor,
    gesture: &Gesture,
    user: &UserModel,
    device: &DeviceModel,
    frontier: &ConfigFrontier,
    mut target_policy: T,
    mut fps_policy: F,
    mut observe: O,
) -> Result<SessionMetrics>
where
    T: FnMut(u32) -> Result<f64>,
    F: FnMut(&ProcessingConfiguration, u32, Cluster) -> Result<f64>,
    O: FnMut(f64, f64),
{
    let windows = (gesture.duration_s / SAMPLING_WINDOW_S).round().max(1.0) as usize;
    let mut offset: u32 = 0;
    let mut prev = Cluster::Big;
    let mut baseline_prev = Cluster::Big;
    let governor = device.governor_config();

    let mut energy = 0.0;
    let mut baseline_energy = 0.0;
    let mut trace = Vec::with_capacity(windows);
    let mut thr_sum = 0.0;
    let mut delta = 0usize;
    let mut all_met = true;

    for _ in 0..windows {
        let slice = page.slice_at(offset)?;
        let true_thr = user.threshold(page, slice, gesture.kind, gesture.speed_px_s);

        let target = target_policy(offset)?;
        let outcome = search_min_energy(target, frontier, |config| fps_policy(config, offset, prev))?;
        all_met &= outcome.met;
        let config = outcome.config;

        let achieved = device.true_fps(page, slice, gesture, &config, prev)?;
        energy += device.true_energy(page, slice, gesture, &config, SAMPLING_WINDOW_S)?;
        observe(outcome.predicted_fps, achieved);

        let _ = device.true_fps(page, slice, gesture, &governor, baseline_prev)?;
        baseline_energy += device.true_energy(page, slice, gesture, &governor, SAMPLING_WINDOW_S)?;
        baseline_prev = governor.render_placement;

        if achieved < true_thr {
            delta += 1;
        }
        trace.push(achieved);
        thr_sum += true_thr;
        prev = config.render_placement;

        if gesture.kind != GestureKind::Pinch {
            let next = f64::from(offset) + gesture.speed_px_s * SAMPLING_WINDOW_S;
            offset = next.min(f64::from(page.page_height_px - 1)) as u32;
        }
    }

    let fps_min = thr_sum / windows as f64;
    Ok(SessionMetrics {
        energy_j: energy,
        baseline_energy_j: baseline_energy,
        saving: 1.0 - energy / baseline_energy,
        violation: delta as f64 / fps_min,
        violation_fraction: delta as f64 / windows as f64,
        fps_trace: trace,
        fps_min,
        delta,
        all_met,
    })
}

/// Simulates one session in the given mode.
///
/// Camel drives the trained predictors through the frontier search each
/// window; baseline pins the stock governor configuration; oracle picks
/// the cheapest frontier configuration whose ground-truth FPS meets the
/// user's ground-truth threshold.
pub fn run_session(
    page: &PageDescriptor,
    gesture: &Gesture,
    user: &UserModel,
    device: &DeviceModel,
    stack: &TrainedStack,
    mode: Mode,
    target_scale: f64,
) -> Result<SessionMetrics> {
    match mode {
        Mode::Baseline => {
            let governor = device.governor_config();
            let gov_fps = |config: &ProcessingConfiguration, offset: u32, prev: Cluster| {
                let slice = page.slice_at(offset)?;
                if config.setting_key() == governor.setting_key()
                    && config.erf_denominator == governor.erf_denominator
                {
                    device.true_fps(page, slice, gesture, config, prev)
                } else {
                    // any non-governor entry is reported unusable so the
                    // search lands on the governor row
                    Ok(0.0001)
                }
            };
            // a frontier of exactly the governor keeps the loop uniform
            let gov_frontier = ConfigFrontier {
                device_name: device.name.clone(),
                profiling_seed: stack.frontier.profiling_seed,
                entries: vec![crate::search::FrontierEntry {
                    config: governor.clone(),
                    mean_energy_j: 1.0,
                    mean_fps: device.fps_cap,
                }],
            };
            run_session_with_policies(
                page,
                gesture,
                user,
                device,
                &gov_frontier,
                |_| Ok(0.0001),
                gov_fps,
                |_, _| {},
            )
        }
        Mode::Oracle => run_session_with_policies(
            page,
            gesture,
            user,
            device,
            &stack.frontier,
            |offset| {
                let slice = page.slice_at(offset)?;
                Ok(user.threshold(page, slice, gesture.kind, gesture.speed_px_s))
            },
            |config, offset, prev| {
                let slice = page.slice_at(offset)?;
                device.true_fps(page, slice, gesture, config, prev)
            },
            |_, _| {},
        ),
        Mode::Camel => {
            // features per slice are reused across windows
            let mut qoe_cache: BTreeMap<u32, f64> = BTreeMap::new();
            let mut fps_feat_cache: BTreeMap<usize, crate::features::FeatureVector> = BTreeMap::new();
            let qoe = &stack.qoe;
            let fps = &stack.fps;
            // In-session feedback: achieved FPS is measurable, so camel
            // tracks the running error of its FPS predictions per session
            // and subtracts it from subsequent estimates.
            let bias = std::cell::Cell::new(0.0f64);
            let bias_obs = &bias;
            run_session_with_policies(
                page,
                gesture,
                user,
                device,
                &stack.frontier,
                |offset| {
                    if let Some(&t) = qoe_cache.get(&offset) {
                        return Ok(t);
                    }
                    let input = qoe.input_for(gesture.kind, page, offset, gesture.speed_px_s)?;
                    let t = qoe.predict_min_fps(gesture.kind, &input)? * target_scale;
                    qoe_cache.insert(offset, t);
                    Ok(t)
                },
                |config, offset, prev| {
                    let slice_idx = page.slice_index_at(offset)?;
                    let model = fps.model(gesture.kind)?;
                    if !fps_feat_cache.contains_key(&slice_idx) {
                        fps_feat_cache.insert(slice_idx, model.pipeline.features(page, slice_idx)?);
                    }
                    let features = fps_feat_cache.get(&slice_idx).unwrap();
                    let input = FpsInput {
                        viewport_features: features.clone(),
                        speed_px_s: gesture.speed_px_s,
                        config: config.clone(),
                        render_cluster: prev,
                    };
                    let raw = model.network.forward(&encode_fps_input(&input, &fps.scale))?;
                    Ok((raw - bias.get()).max(1e-6))
                },
                |predicted, achieved| {
                    // predicted already carries the correction; recover the
                    // raw model error before updating the running estimate
                    let raw_error = predicted + bias_obs.get() - achieved;
                    bias_obs.set(0.7 * bias_obs.get() + 0.3 * raw_error);
                },
            )
        }
    }
}

// ---------------------------------------------------------------------------
// Cross-validated grid evaluation
// ---------------------------------------------------------------------------

/// Gesture durations used by the evaluation grid, seconds.
pub fn gesture_duration(kind: GestureKind) -> f64 {
    match kind {
        GestureKind::Scroll => 2.0,
        GestureKind::Fling => 1.5,
        GestureKind::Pinch => 1.5,
    }
}

/// One report row: session keys plus its metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub mode: Mode,
    pub fold: usize,
    pub page_id: String,
    pub gesture: GestureKind,
    pub speed_px_s: f64,
    pub device: String,
    pub user_group: String,
    pub windows: usize,
    pub metrics: SessionMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    /// Set when folds = 1 (train = test): not a validating run.
    pub smoke: bool,
    pub rows: Vec<ReportRow>,
    pub camel_saving_geomean: f64,
    pub camel_violation_geomean: f64,
    pub oracle_saving_geomean: f64,
}

/// Shifted geometric mean: exp(mean(ln(1 + v))) - 1; tolerates zeros and
/// mild negatives.
pub fn geomean_shifted(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += (1.0 + v).max(1e-12).ln();
        n += 1;
    }
    if n == 0 {
        return 0.0;
    }
    (sum / n as f64).exp() - 1.0
}

pub fn compute_aggregates(rows: &[ReportRow]) -> (f64, f64, f64) {
    let camel_saving = geomean_shifted(
        rows.iter()
            .filter(|r| r.mode == Mode::Camel)
            .map(|r| r.metrics.saving),
    );
    let camel_violation = geomean_shifted(
        rows.iter()
            .filter(|r| r.mode == Mode::Camel)
            .map(|r| r.metrics.violation),
    );
    let oracle_saving = geomean_shifted(
        rows.iter()
            .filter(|r| r.mode == Mode::Oracle)
            .map(|r| r.metrics.saving),
    );
    (camel_saving, camel_violation, oracle_saving)
}

/// Models trained for every fold of the grid.
#[derive(Debug)]
pub struct FoldModels {
    pub folds: usize,
    /// fold -> device name -> (fps predictor, frontier)
    pub per_device: Vec<BTreeMap<String, (FpsPredictor, ConfigFrontier)>>,
    /// fold -> group -> qoe predictor
    pub per_group: Vec<BTreeMap<String, QoePredictor>>,
}

pub fn fold_of(page_idx: usize, folds: usize) -> usize {
    page_idx % folds
}

/// Trains FPS predictors per (fold, device) and QoE predictors per
/// (fold, user group) on each fold's training pages.
pub fn train_fold_models(
    corpus: &Corpus,
    devices: &[DeviceModel],
    groups: &[UserGroup],
    folds: usize,
    cfg: &PredictorConfig,
    seed: u64,
) -> Result<FoldModels> {
    if folds == 0 || folds > corpus.pages.len() {
        return Err(Error::Domain(format!(
            "folds {} must lie in 1..={} (page count)",
            folds,
            corpus.pages.len()
        )));
    }
    let mut per_device = Vec::with_capacity(folds);
    let mut per_group = Vec::with_capacity(folds);
    for fold in 0..folds {
        let train_pages: Vec<PageDescriptor> = corpus
            .pages
            .iter()
            .enumerate()
            .filter(|(i, _)| folds == 1 || fold_of(*i, folds) != fold)
            .map(|(_, p)| p.clone())
            .collect();
        let train_corpus = Corpus { seed: corpus.seed, pages: train_pages };

        let device_models: Vec<(String, (FpsPredictor, ConfigFrontier))> = devices
            .par_iter()
            .map(|device| -> Result<_> {
                let sample: Vec<&PageDescriptor> = train_corpus.pages.iter().take(20).collect();
                let frontier = build_frontier(
                    device,
                    &sample,
                    &[500.0, 1500.0, 3000.0],
                    &cfg.erfs,
                    rng::child_seed(seed, &format!("frontier-{fold}-{}", device.name)),
                )?;
                let fps = crate::predictors::train_fps_predictor(
                    &train_corpus,
                    device,
                    &frontier,
                    cfg,
                    rng::child_seed(seed, &format!("fps-{fold}-{}", device.name)),
                )?;
                Ok((device.name.clone(), (fps, frontier)))
            })
            .collect::<Result<Vec<_>>>()?;

        let group_models: Vec<(String, QoePredictor)> = groups
            .par_iter()
            .map(|&group| -> Result<_> {
                let user = group_representative(group);
                let qoe = crate::predictors::train_qoe_predictor(
                    &train_corpus,
                    &user,
                    cfg,
                    rng::child_seed(seed, &format!("qoe-{fold}-{}", group.name())),
                )?;
                Ok((group.name().to_string(), qoe))
            })
            .collect::<Result<Vec<_>>>()?;

        per_device.push(device_models.into_iter().collect());
        per_group.push(group_models.into_iter().collect());
    }
    Ok(FoldModels { folds, per_device, per_group })
}

/// Runs the full session grid against trained fold models. Each held-out
/// page is tested exactly once (its own fold), in camel and oracle modes.
pub fn run_grid(
    corpus: &Corpus,
    devices: &[DeviceModel],
    groups: &[UserGroup],
    models: &FoldModels,
    cfg: &PredictorConfig,
    seed: u64,
    target_scale: f64,
) -> Result<ExperimentReport> {
    let folds = models.folds;
    let mut jobs = Vec::new();
    for (page_idx, page) in corpus.pages.iter().enumerate() {
        let fold = fold_of(page_idx, folds);
        for device in devices {
            for &group in groups {
                for gesture_kind in GestureKind::ALL {
                    for &speed in cfg.speeds.for_gesture(gesture_kind) {
                        jobs.push((fold, page, device, group, gesture_kind, speed));
                    }
                }
            }
        }
    }

    let mut rows: Vec<ReportRow> = jobs
        .par_iter()
        .map(|&(fold, page, device, group, gesture_kind, speed)| -> Result<Vec<ReportRow>> {
            let (fps, frontier) = models.per_device[fold]
                .get(&device.name)
                .ok_or_else(|| Error::Config(format!("no fps model for device {}", device.name)))?;
            let qoe = models.per_group[fold]
                .get(group.name())
                .ok_or_else(|| Error::Config(format!("no qoe model for group {}", group.name())))?;
            let stack = TrainedStack { qoe: qoe.clone(), fps: fps.clone(), frontier: frontier.clone() };
            let user = group_representative(group);
            let gesture = Gesture::new(gesture_kind, speed, gesture_duration(gesture_kind))?;

            let mut out = Vec::with_capacity(2);
            for mode in [Mode::Camel, Mode::Oracle] {
                let metrics = run_session(page, &gesture, &user, device, &stack, mode, target_scale)?;
                out.push(ReportRow {
                    mode,
                    fold,
                    page_id: page.id.clone(),
                    gesture: gesture_kind,
                    speed_px_s: speed,
                    device: device.name.clone(),
                    user_group: group.name().to_string(),
                    windows: metrics.fps_trace.len(),
                    metrics,
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<Vec<ReportRow>>>>()?
        .into_iter()
        .flatten()
        .collect();

    rows.sort_by(|a, b| {
        a.page_id
            .cmp(&b.page_id)
            .then(a.gesture.cmp(&b.gesture))
            .then(a.speed_px_s.total_cmp(&b.speed_px_s))
            .then(a.user_group.cmp(&b.user_group))
            .then(a.device.cmp(&b.device))
            .then(a.mode.cmp(&b.mode))
    });

    let (camel_saving_geomean, camel_violation_geomean, oracle_saving_geomean) =
        compute_aggregates(&rows);
    Ok(ExperimentReport {
        seed,
        smoke: folds == 1,
        rows,
        camel_saving_geomean,
        camel_violation_geomean,
        oracle_saving_geomean,
    })
}

/// Five-fold (by default) cross-validated evaluation: train on the other
/// folds, test each page exactly once.
pub fn evaluate(
    corpus: &Corpus,
    devices: &[DeviceModel],
    groups: &[UserGroup],
    folds: usize,
    cfg: &PredictorConfig,
    seed: u64,
) -> Result<ExperimentReport> {
    let models = train_fold_models(corpus, devices, groups, folds, cfg, seed)?;
    run_grid(corpus, devices, groups, &models, cfg, seed, 1.0)
}

// ---------------------------------------------------------------------------
// Report CSV
// ---------------------------------------------------------------------------

pub const REPORT_FORMAT: &str = "camel-report";
pub const REPORT_VERSION: u32 = 1;

const CSV_HEADER: &str = "mode,fold,page_id,gesture,speed_px_s,device,user_group,windows,energy_j,baseline_energy_j,saving,fps_min,delta,violation,violation_fraction,all_met,fps_trace";

/// Writes the report: '#' metadata lines (format, seed, aggregates),
/// a header row, then one CSV row per session and mode. The geometric
/// means are shifted by +1 before averaging to tolerate zero and negative
/// entries, then shifted back.
pub fn write_report<W: Write>(report: &ExperimentReport, mut out: W) -> Result<()> {
    writeln!(out, "# format={REPORT_FORMAT} version={REPORT_VERSION}")?;
    writeln!(out, "# seed={} smoke={}", report.seed, report.smoke)?;
    writeln!(
        out,
        "# camel_saving_geomean={} camel_violation_geomean={} oracle_saving_geomean={}",
        report.camel_saving_geomean, report.camel_violation_geomean, report.oracle_saving_geomean
    )?;
    writeln!(out, "{CSV_HEADER}")?;
    for r in &report.rows {
        let trace = r
            .metrics
            .fps_trace
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(";");
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.mode.name(),
            r.fold,
            r.page_id,
            r.gesture.name(),
            r.speed_px_s,
            r.device,
            r.user_group,
            r.windows,
            r.metrics.energy_j,
            r.metrics.baseline_energy_j,
            r.metrics.saving,
            r.metrics.fps_min,
            r.metrics.delta,
            r.metrics.violation,
            r.metrics.violation_fraction,
            r.metrics.all_met,
            trace
        )?;
    }
    Ok(())
}

pub fn read_report<R: BufRead>(input: R) -> Result<ExperimentReport> {
    let mut seed = 0u64;
    let mut smoke = false;
    let mut aggregates = (0.0, 0.0, 0.0);
    let mut rows = Vec::new();
    let mut saw_header = false;
    for line in input.lines() {
        let line = line?;
        if line.starts_with('#') {
            for token in line.trim_start_matches('#').split_whitespace() {
                if let Some((key, value)) = token.split_once('=') {
                    match key {
                        "seed" => seed = value.parse().map_err(|_| bad_field("seed", value))?,
                        "smoke" => smoke = value.parse().map_err(|_| bad_field("smoke", value))?,
                        "camel_saving_geomean" => {
                            aggregates.0 = value.parse().map_err(|_| bad_field(key, value))?
                        }
                        "camel_violation_geomean" => {
                            aggregates.1 = value.parse().map_err(|_| bad_field(key, value))?
                        }
                        "oracle_saving_geomean" => {
                            aggregates.2 = value.parse().map_err(|_| bad_field(key, value))?
                        }
                        _ => {}
                    }
                }
            }
            continue;
        }
        if !saw_header {
            if line != CSV_HEADER {
                return Err(Error::Format(format!("unexpected report header: {line}")));
            }
            saw_header = true;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 17 {
            return Err(Error::Format(format!("report row has {} fields", fields.len())));
        }
        let fps_trace: Vec<f64> = if fields[16].is_empty() {
            Vec::new()
        } else {
            fields[16]
                .split(';')
                .map(|v| v.parse().map_err(|_| bad_field("fps_trace", v)))
                .collect::<Result<_>>()?
        };
        rows.push(ReportRow {
            mode: Mode::parse(fields[0])?,
            fold: fields[1].parse().map_err(|_| bad_field("fold", fields[1]))?,
            page_id: fields[2].to_string(),
            gesture: GestureKind::parse(fields[3])?,
            speed_px_s: fields[4].parse().map_err(|_| bad_field("speed", fields[4]))?,
            device: fields[5].to_string(),
            user_group: fields[6].to_string(),
            windows: fields[7].parse().map_err(|_| bad_field("windows", fields[7]))?,
            metrics: SessionMetrics {
                energy_j: fields[8].parse().map_err(|_| bad_field("energy_j", fields[8]))?,
                baseline_energy_j: fields[9]
                    .parse()
                    .map_err(|_| bad_field("baseline_energy_j", fields[9]))?,
                saving: fields[10].parse().map_err(|_| bad_field("saving", fields[10]))?,
                fps_min: fields[11].parse().map_err(|_| bad_field("fps_min", fields[11]))?,
                delta: fields[12].parse().map_err(|_| bad_field("delta", fields[12]))?,
                violation: fields[13].parse().map_err(|_| bad_field("violation", fields[13]))?,
                violation_fraction: fields[14]
                    .parse()
                    .map_err(|_| bad_field("violation_fraction", fields[14]))?,
                all_met: fields[15].parse().map_err(|_| bad_field("all_met", fields[15]))?,
                fps_trace,
            },
        });
    }
    Ok(ExperimentReport {
        seed,
        smoke,
        rows,
        camel_saving_geomean: aggregates.0,
        camel_violation_geomean: aggregates.1,
        oracle_saving_geomean: aggregates.2,
    })
}

fn bad_field(name: &str, value: &str) -> Error {
    Error::Format(format!("bad {name} value {value:?}"))
}

pub fn save_report(report: &ExperimentReport, path: &std::path::Path) -> Result<()> {
    write_report(report, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load_report(path: &std::path::Path) -> Result<ExperimentReport> {
    read_report(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::generate_corpus;
    use crate::device::preset_device;
    use crate::search::erf_ladder_desk;

    fn tiny_stack(corpus: &Corpus, device: &DeviceModel, seed: u64) -> TrainedStack {
        let pages: Vec<&PageDescriptor> = corpus.pages.iter().take(10).collect();
        let frontier =
            build_frontier(device, &pages, &[500.0, 1500.0], &erf_ladder_desk(), seed).unwrap();
        let mut cfg = PredictorConfig::desk(seed);
        cfg.qoe_training.epochs = 40;
        cfg.fps_training.epochs = 10;
        let qoe = crate::predictors::train_qoe_predictor(
            corpus,
            &crate::device::default_user(),
            &cfg,
            seed,
        )
        .unwrap();
        let fps =
            crate::predictors::train_fps_predictor(corpus, device, &frontier, &cfg, seed).unwrap();
        TrainedStack { qoe, fps, frontier }
    }

    #[test]
    fn baseline_against_itself_saves_nothing() {
        let corpus = generate_corpus(71, 20, &Default::default()).unwrap();
        let dev = preset_device("xiaomi9").unwrap();
        let stack = tiny_stack(&corpus, &dev, 3);
        let gesture = Gesture::new(GestureKind::Scroll, 1000.0, 1.0).unwrap();
        let user = crate::device::default_user();
        let m = run_session(&corpus.pages[0], &gesture, &user, &dev, &stack, Mode::Baseline, 1.0)
            .unwrap();
        assert!((m.saving - 0.0).abs() < 1e-12);
        assert_eq!(m.energy_j, m.baseline_energy_j);
    }

    #[test]
    fn oracle_never_costs_more_than_camel_on_clean_sessions() {
        let corpus = generate_corpus(73, 30, &Default::default()).unwrap();
        let dev = preset_device("pixel2").unwrap();
        let stack = tiny_stack(&corpus, &dev, 5);
        let user = crate::device::default_user();
        let mut clean_sessions = 0;
        for page in corpus.pages.iter().skip(10).take(12) {
            for (kind, speed) in [(GestureKind::Scroll, 1200.0), (GestureKind::Fling, 4000.0)] {
                let gesture = Gesture::new(kind, speed, gesture_duration(kind)).unwrap();
                let camel =
                    run_session(page, &gesture, &user, &dev, &stack, Mode::Camel, 1.0).unwrap();
                let oracle =
                    run_session(page, &gesture, &user, &dev, &stack, Mode::Oracle, 1.0).unwrap();
                let baseline =
                    run_session(page, &gesture, &user, &dev, &stack, Mode::Baseline, 1.0).unwrap();
                assert!(camel.energy_j <= baseline.energy_j + 1e-9);
                if camel.delta == 0 {
                    clean_sessions += 1;
                    assert!(
                        oracle.energy_j <= camel.energy_j + 1e-9,
                        "oracle {} > camel {} on {}",
                        oracle.energy_j,
                        camel.energy_j,
                        page.id
                    );
                }
            }
        }
        assert!(clean_sessions > 0, "no clean sessions to compare");
    }

    #[test]
    fn perfect_predictors_reproduce_oracle_exactly() {
        let corpus = generate_corpus(79, 12, &Default::default()).unwrap();
        let dev = preset_device("huaweip9").unwrap();
        let pages: Vec<&PageDescriptor> = corpus.pages.iter().take(10).collect();
        let frontier =
            build_frontier(&dev, &pages, &[500.0, 1500.0], &erf_ladder_desk(), 9).unwrap();
        let stack = TrainedStack {
            qoe: QoePredictor { models: BTreeMap::new() },
            fps: FpsPredictor {
                device_name: dev.name.clone(),
                scale: crate::predictors::FreqScale::of(&dev),
                models: BTreeMap::new(),
            },
            frontier: frontier.clone(),
        };
        let user = crate::device::default_user();
        for page in corpus.pages.iter().take(6) {
            let gesture = Gesture::new(GestureKind::Scroll, 1500.0, 1.0).unwrap();
            let perfect = run_session_with_policies(
                page,
                &gesture,
                &user,
                &dev,
                &frontier,
                |offset| {
                    let slice = page.slice_at(offset)?;
                    Ok(user.threshold(page, slice, gesture.kind, gesture.speed_px_s))
                },
                |config, offset, prev| {
                    let slice = page.slice_at(offset)?;
                    dev.true_fps(page, slice, &gesture, config, prev)
                },
                |_, _| {},
            )
            .unwrap();
            let oracle =
                run_session(page, &gesture, &user, &dev, &stack, Mode::Oracle, 1.0).unwrap();
            assert_eq!(perfect, oracle);
        }
    }

    #[test]
    fn saving_and_violation_stay_in_range() {
        let corpus = generate_corpus(83, 16, &Default::default()).unwrap();
        let dev = preset_device("odroidxu3").unwrap();
        let stack = tiny_stack(&corpus, &dev, 7);
        let user = crate::device::group_representative(UserGroup::High);
        for page in corpus.pages.iter().take(6) {
            let gesture = Gesture::new(GestureKind::Pinch, 600.0, 1.5).unwrap();
            let m = run_session(page, &gesture, &user, &dev, &stack, Mode::Camel, 1.0).unwrap();
            assert!(m.saving < 1.0 && m.saving.is_finite());
            assert!(m.violation >= 0.0 && m.violation.is_finite());
            assert!(m.delta <= m.fps_trace.len());
            assert!((m.saving - (1.0 - m.energy_j / m.baseline_energy_j)).abs() < 1e-12);
        }
    }

    #[test]
    fn folds_exceeding_pages_is_a_domain_error() {
        let corpus = generate_corpus(87, 3, &Default::default()).unwrap();
        let dev = preset_device("xiaomi9").unwrap();
        let cfg = PredictorConfig::desk(1);
        match train_fold_models(&corpus, &[dev], &[UserGroup::Moderate], 5, &cfg, 1) {
            Err(Error::Domain(_)) => {}
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn each_page_tested_exactly_once_and_aggregates_recompute() {
        let corpus = generate_corpus(91, 10, &Default::default()).unwrap();
        let dev = preset_device("xiaomi9").unwrap();
        let mut cfg = PredictorConfig::desk(3);
        cfg.out_dim = 5;
        cfg.fps_out_dim = 5;
        cfg.qoe_training.epochs = 30;
        cfg.fps_training.epochs = 8;
        cfg.speeds = crate::predictors::SpeedGrid {
            scroll: vec![1000.0],
            fling: vec![3000.0],
            pinch: vec![500.0],
        };
        let groups = [UserGroup::Moderate];
        let report = evaluate(&corpus, &[dev], &groups, 2, &cfg, 11).unwrap();

        // one camel and one oracle row per (page, gesture, speed, device, group)
        let camel_rows: Vec<_> = report.rows.iter().filter(|r| r.mode == Mode::Camel).collect();
        assert_eq!(camel_rows.len(), 10 * 3);
        let mut seen = std::collections::BTreeSet::new();
        for r in &camel_rows {
            seen.insert((r.page_id.clone(), r.gesture));
        }
        assert_eq!(seen.len(), 30, "every page tested exactly once per cell");

        let (s, v, o) = compute_aggregates(&report.rows);
        assert_eq!(s, report.camel_saving_geomean);
        assert_eq!(v, report.camel_violation_geomean);
        assert_eq!(o, report.oracle_saving_geomean);
        assert!(!report.smoke);
    }

    #[test]
    fn single_fold_run_is_flagged_as_smoke() {
        let corpus = generate_corpus(95, 6, &Default::default()).unwrap();
        let dev = preset_device("pixel2").unwrap();
        let mut cfg = PredictorConfig::desk(5);
        cfg.out_dim = 6;
        cfg.fps_out_dim = 6;
        cfg.qoe_training.epochs = 10;
        cfg.fps_training.epochs = 4;
        cfg.speeds = crate::predictors::SpeedGrid {
            scroll: vec![800.0],
            fling: vec![2500.0],
            pinch: vec![400.0],
        };
        let report = evaluate(&corpus, &[dev], &[UserGroup::Low], 1, &cfg, 3).unwrap();
        assert!(report.smoke);
    }

    #[test]
    fn report_roundtrips_through_csv() {
        let corpus = generate_corpus(97, 6, &Default::default()).unwrap();
        let dev = preset_device("huaweip9").unwrap();
        let mut cfg = PredictorConfig::desk(7);
        cfg.out_dim = 4;
        cfg.fps_out_dim = 4;
        cfg.qoe_training.epochs = 10;
        cfg.fps_training.epochs = 4;
        cfg.speeds = crate::predictors::SpeedGrid {
            scroll: vec![900.0],
            fling: vec![2800.0],
            pinch: vec![300.0],
        };
        let report = evaluate(&corpus, &[dev], &[UserGroup::Moderate], 2, &cfg, 9).unwrap();
        let mut buf = Vec::new();
        write_report(&report, &mut buf).unwrap();
        let parsed = read_report(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(report, parsed);
    }
}
