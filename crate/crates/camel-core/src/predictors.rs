//! QoE and FPS predictors: one network per gesture wrapping the shared
//! feature pipeline, plus the grid builders that turn the simulator oracles
//! into training sets.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{future_viewport, Corpus, Gesture, GestureKind, PageDescriptor};
use crate::device::{DeviceModel, UserModel};
use crate::error::{Error, Result};
use crate::features::{
    extract_raw, fit_pipeline, reduce_and_normalize, FeatureReducer, FeatureVector, Normalizer,
};
use crate::neural::{train, Dataset, Network, NetworkSpec, TrainingConfig};
use crate::rng;
use crate::search::{Cluster, ConfigFrontier, ProcessingConfiguration};

/// The 50 ms speed-sampling window used when extrapolating the viewport.
pub const SAMPLING_WINDOW_S: f64 = 0.05;

/// Fitted reducer + normalizer pair shared by a predictor's gestures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipeline {
    pub reducer: FeatureReducer,
    pub normalizer: Normalizer,
}

impl FeaturePipeline {
    /// Fits on every (page, slice) pair of the corpus.
    pub fn fit(corpus: &Corpus, out_dim: usize, corr_threshold: f64) -> Result<Self> {
        let raws: Vec<_> = corpus
            .pages
            .iter()
            .flat_map(|p| p.viewport_profiles.iter().map(|s| extract_raw(p, s)))
            .collect();
        let (reducer, normalizer) = fit_pipeline(&raws, out_dim, corr_threshold)?;
        Ok(FeaturePipeline { reducer, normalizer })
    }

    pub fn features(&self, page: &PageDescriptor, slice_idx: usize) -> Result<FeatureVector> {
        let slice = page
            .viewport_profiles
            .get(slice_idx)
            .ok_or_else(|| Error::Domain(format!("page {} has no slice {slice_idx}", page.id)))?;
        reduce_and_normalize(&self.reducer, &self.normalizer, &extract_raw(page, slice))
    }

    pub fn out_dim(&self) -> usize {
        self.reducer.out_dim
    }
}

/// Current/future viewport features plus the interactive speed.
#[derive(Debug, Clone, PartialEq)]
pub struct QoeInput {
    pub current_viewport_features: FeatureVector,
    pub future_viewport_features: FeatureVector,
    pub speed_px_s: f64,
}

/// Viewport features, speed, candidate configuration and the cluster the
/// render process currently occupies (migration penalty input).
#[derive(Debug, Clone, PartialEq)]
pub struct FpsInput {
    pub viewport_features: FeatureVector,
    pub speed_px_s: f64,
    pub config: ProcessingConfiguration,
    pub render_cluster: Cluster,
}

/// Device peak frequencies used to scale configuration inputs to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqScale {
    pub big_max_ghz: f64,
    pub little_max_ghz: f64,
    pub gpu_max_mhz: f64,
}

impl FreqScale {
    pub fn of(device: &DeviceModel) -> Self {
        FreqScale {
            big_max_ghz: device.max_big(),
            little_max_ghz: device.max_little(),
            gpu_max_mhz: device.max_gpu(),
        }
    }
}

pub fn encode_qoe_input(q: &QoeInput) -> Vec<f64> {
    let mut x = Vec::with_capacity(q.current_viewport_features.values.len() * 2 + 1);
    x.extend_from_slice(&q.current_viewport_features.values);
    x.extend_from_slice(&q.future_viewport_features.values);
    x.push(q.speed_px_s / 1000.0);
    x
}

pub fn encode_fps_input(f: &FpsInput, scale: &FreqScale) -> Vec<f64> {
    let inv_n = 1.0 / f64::from(f.config.erf_denominator);
    let big = f.config.big_ghz / scale.big_max_ghz;
    let little = f.config.little_ghz / scale.little_max_ghz;
    let gpu = f.config.gpu_mhz / scale.gpu_max_mhz;
    let mut x = Vec::with_capacity(f.viewport_features.values.len() + 8);
    x.extend_from_slice(&f.viewport_features.values);
    x.push(f.speed_px_s / 1000.0);
    x.push(inv_n);
    // delivered FPS is near-linear in sqrt(1/N); offering the root keeps
    // the thinned regime inside easy reach of a small network
    x.push(inv_n.sqrt());
    x.push(big);
    x.push(little);
    x.push(gpu);
    x.push(matches!(f.config.render_placement, Cluster::Big) as u8 as f64);
    x.push(matches!(f.render_cluster, Cluster::Big) as u8 as f64);
    x
}

/// One trained network with the pipeline it was fitted against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureModel {
    pub network: Network,
    pub pipeline: FeaturePipeline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoePredictor {
    pub models: BTreeMap<GestureKind, GestureModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpsPredictor {
    pub device_name: String,
    pub scale: FreqScale,
    pub models: BTreeMap<GestureKind, GestureModel>,
}

impl QoePredictor {
    pub fn model(&self, gesture: GestureKind) -> Result<&GestureModel> {
        self.models.get(&gesture).ok_or_else(|| {
            Error::Config(format!("no QoE model trained for gesture {}", gesture.name()))
        })
    }

    /// Minimum acceptable FPS for the described interaction.
    pub fn predict_min_fps(&self, gesture: GestureKind, input: &QoeInput) -> Result<f64> {
        if !(input.speed_px_s > 0.0) {
            return Err(Error::Domain("speed must be positive".into()));
        }
        self.model(gesture)?.network.forward(&encode_qoe_input(input))
    }

    /// Builds the input from page geometry via this predictor's pipeline.
    pub fn input_for(
        &self,
        gesture: GestureKind,
        page: &PageDescriptor,
        offset_px: u32,
        speed_px_s: f64,
    ) -> Result<QoeInput> {
        let model = self.model(gesture)?;
        let cur_idx = page.slice_index_at(offset_px)?;
        let g = Gesture::new(gesture, speed_px_s, 1.0)?;
        let fut = future_viewport(page, offset_px, &g, SAMPLING_WINDOW_S)?;
        let fut_idx = page
            .viewport_profiles
            .iter()
            .position(|s| s.start_px == fut.start_px)
            .expect("future slice belongs to page");
        Ok(QoeInput {
            current_viewport_features: model.pipeline.features(page, cur_idx)?,
            future_viewport_features: model.pipeline.features(page, fut_idx)?,
            speed_px_s,
        })
    }
}

impl FpsPredictor {
    pub fn model(&self, gesture: GestureKind) -> Result<&GestureModel> {
        self.models.get(&gesture).ok_or_else(|| {
            Error::Config(format!("no FPS model trained for gesture {}", gesture.name()))
        })
    }

    /// Achieved FPS the device is expected to deliver under a configuration.
    pub fn predict_fps(&self, gesture: GestureKind, input: &FpsInput) -> Result<f64> {
        if !(input.speed_px_s > 0.0) {
            return Err(Error::Domain("speed must be positive".into()));
        }
        self.model(gesture)?
            .network
            .forward(&encode_fps_input(input, &self.scale))
    }
}

// ---------------------------------------------------------------------------
// Grid shapes and dataset builders
// ---------------------------------------------------------------------------

/// Cardinality of an FPS training grid; the sample count is the plain
/// product, so paper-scale grids can be sized without materializing them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub pages: u64,
    pub speeds: u64,
    pub settings: u64,
    pub erfs: u64,
}

impl GridShape {
    pub fn total(&self) -> u64 {
        self.pages * self.speeds * self.settings * self.erfs
    }
}

pub fn fps_grid_shape(
    corpus: &Corpus,
    speeds: &[f64],
    settings: &[ProcessingConfiguration],
    erfs: &[u32],
) -> GridShape {
    GridShape {
        pages: corpus.pages.len() as u64,
        speeds: speeds.len() as u64,
        settings: settings.len() as u64,
        erfs: erfs.len() as u64,
    }
}

/// Index arithmetic for one cell of the FPS grid, in iteration order
/// (pages, then speeds, then settings, then ERFs innermost).
pub fn fps_grid_cell(
    shape: &GridShape,
    flat: u64,
) -> (usize, usize, usize, usize) {
    let erfs = shape.erfs;
    let settings = shape.settings;
    let speeds = shape.speeds;
    let e = (flat % erfs) as usize;
    let s = ((flat / erfs) % settings) as usize;
    let v = ((flat / (erfs * settings)) % speeds) as usize;
    let p = (flat / (erfs * settings * speeds)) as usize;
    (p, v, s, e)
}

/// The render cluster occupied before a grid cell's configuration applies;
/// alternating by cell parity covers both migration cases.
pub fn grid_prev_cluster(page_idx: usize, setting_idx: usize, config: &ProcessingConfiguration) -> Cluster {
    if (page_idx + setting_idx) % 2 == 0 {
        config.render_placement
    } else {
        config.render_placement.other()
    }
}

/// Labels one (page, speed, setting, ERF) cell per grid point with the
/// device oracle's achieved FPS. Inputs go through `pipeline`.
pub fn build_fps_dataset(
    corpus: &Corpus,
    device: &DeviceModel,
    gesture: GestureKind,
    speeds: &[f64],
    settings: &[ProcessingConfiguration],
    erfs: &[u32],
    pipeline: &FeaturePipeline,
    scale: &FreqScale,
) -> Result<Dataset> {
    if corpus.pages.is_empty() || speeds.is_empty() || settings.is_empty() || erfs.is_empty() {
        return Err(Error::Config("fps grid needs pages, speeds, settings and erfs".into()));
    }
    let rows: Vec<Result<Vec<(Vec<f64>, f64)>>> = corpus
        .pages
        .par_iter()
        .enumerate()
        .map(|(page_idx, page)| {
            let slice_idx = page.slice_index_at(page.page_height_px / 2)?;
            let slice = &page.viewport_profiles[slice_idx];
            let features = pipeline.features(page, slice_idx)?;
            let mut cells = Vec::with_capacity(speeds.len() * settings.len() * erfs.len());
            for &speed in speeds {
                let g = Gesture::new(gesture, speed, 1.0)?;
                for (setting_idx, setting) in settings.iter().enumerate() {
                    for &erf in erfs {
                        let config = ProcessingConfiguration {
                            erf_denominator: erf,
                            ..setting.clone()
                        };
                        let prev = grid_prev_cluster(page_idx, setting_idx, &config);
                        let label = device.true_fps(page, slice, &g, &config, prev)?;
                        let input = FpsInput {
                            viewport_features: features.clone(),
                            speed_px_s: speed,
                            config,
                            render_cluster: prev,
                        };
                        cells.push((encode_fps_input(&input, scale), label));
                    }
                }
            }
            Ok(cells)
        })
        .collect();

    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for row in rows {
        for (x, y) in row? {
            inputs.push(x);
            targets.push(y);
        }
    }
    Dataset::new(inputs, targets)
}

/// The descending replay ladder used to elicit QoE labels.
pub fn qoe_ladder() -> Vec<f64> {
    let mut ladder = Vec::new();
    let mut v = 60.0;
    while v >= 5.0 {
        ladder.push(v);
        v -= 1.0;
    }
    ladder
}

/// Deterministic per-cell starting offset so training covers the page.
fn qoe_cell_offset(page: &PageDescriptor, gesture: GestureKind, speed: f64) -> u32 {
    let key = [
        page.dom_node_count,
        gesture as u64 + 1,
        speed.to_bits(),
    ];
    let u = rng::hash_noise(0x9e3_779b9, &key);
    (u * f64::from(page.page_height_px - 1)) as u32
}

/// One sample per (page, speed) labeled by replaying the FPS ladder
/// against the user oracle on the current viewport.
pub fn build_qoe_dataset(
    corpus: &Corpus,
    user: &UserModel,
    gesture: GestureKind,
    speeds: &[f64],
    pipeline: &FeaturePipeline,
) -> Result<Dataset> {
    let ladder = qoe_ladder();
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for page in &corpus.pages {
        for &speed in speeds {
            let offset = qoe_cell_offset(page, gesture, speed);
            let cur_idx = page.slice_index_at(offset)?;
            let g = Gesture::new(gesture, speed, 1.0)?;
            let fut = future_viewport(page, offset, &g, SAMPLING_WINDOW_S)?;
            let fut_idx = page
                .viewport_profiles
                .iter()
                .position(|s| s.start_px == fut.start_px)
                .expect("future slice belongs to page");
            let input = QoeInput {
                current_viewport_features: pipeline.features(page, cur_idx)?,
                future_viewport_features: pipeline.features(page, fut_idx)?,
                speed_px_s: speed,
            };
            let label = user.elicit_min_fps(
                page,
                &page.viewport_profiles[cur_idx],
                gesture,
                speed,
                &ladder,
            )?;
            inputs.push(encode_qoe_input(&input));
            targets.push(label);
        }
    }
    Dataset::new(inputs, targets)
}

// ---------------------------------------------------------------------------
// Training drivers
// ---------------------------------------------------------------------------

/// Per-gesture interactive speeds (px/s; zoom px/s for pinch).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedGrid {
    pub scroll: Vec<f64>,
    pub fling: Vec<f64>,
    pub pinch: Vec<f64>,
}

impl SpeedGrid {
    pub fn desk() -> Self {
        SpeedGrid {
            scroll: vec![400.0, 800.0, 1200.0, 1600.0, 2000.0],
            fling: vec![2000.0, 3000.0, 4000.0, 5000.0, 6000.0],
            pinch: vec![200.0, 400.0, 600.0, 800.0, 1000.0],
        }
    }

    pub fn paper() -> Self {
        SpeedGrid {
            scroll: (1..=10).map(|i| 200.0 * i as f64).collect(),
            fling: (1..=10).map(|i| 1500.0 + 500.0 * i as f64).collect(),
            pinch: (1..=10).map(|i| 100.0 * i as f64).collect(),
        }
    }

    pub fn for_gesture(&self, gesture: GestureKind) -> &[f64] {
        match gesture {
            GestureKind::Scroll => &self.scroll,
            GestureKind::Fling => &self.fling,
            GestureKind::Pinch => &self.pinch,
        }
    }
}

/// Everything needed to train a predictor set from oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub out_dim: usize,
    /// Feature dimensionality for the FPS pipeline; the FPS mapping
    /// generalizes from few pages best in a denser space.
    pub fps_out_dim: usize,
    pub corr_threshold: f64,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub speeds: SpeedGrid,
    pub erfs: Vec<u32>,
    /// Number of distinct processor settings drawn from the frontier.
    pub max_settings: usize,
    pub qoe_training: TrainingConfig,
    pub fps_training: TrainingConfig,
}

impl PredictorConfig {
    /// Deliberately small: the full pipeline (train + evaluate) stays
    /// interactive on a workstation.
    pub fn desk(seed: u64) -> Self {
        PredictorConfig {
            out_dim: 24,
            fps_out_dim: 12,
            corr_threshold: 0.95,
            hidden_layers: 2,
            hidden_width: 48,
            speeds: SpeedGrid::desk(),
            erfs: crate::search::erf_ladder_desk(),
            max_settings: 8,
            qoe_training: TrainingConfig {
                epochs: 300,
                learning_rate: 3e-3,
                l2_lambda: 1e-5,
                batch_size: 32,
                seed,
                ..Default::default()
            },
            fps_training: TrainingConfig {
                epochs: 120,
                learning_rate: 3e-3,
                l2_lambda: 1e-5,
                batch_size: 64,
                seed,
                ..Default::default()
            },
        }
    }

    /// The full-size configuration: 127 features, 7x260 networks,
    /// 10 speeds and 8 event-response frequencies.
    pub fn paper(seed: u64) -> Self {
        PredictorConfig {
            out_dim: 127,
            fps_out_dim: 127,
            corr_threshold: 0.95,
            hidden_layers: 7,
            hidden_width: 260,
            speeds: SpeedGrid::paper(),
            erfs: crate::search::erf_ladder_paper(),
            max_settings: 16,
            qoe_training: TrainingConfig { epochs: 200, seed, ..Default::default() },
            fps_training: TrainingConfig { epochs: 30, seed, ..Default::default() },
        }
    }

    pub fn network_spec(&self, input_dim: usize) -> NetworkSpec {
        NetworkSpec::compact(input_dim, self.hidden_layers, self.hidden_width)
    }
}

/// Up to `max_settings` distinct processor settings, evenly spaced along
/// the frontier's energy order.
pub fn frontier_settings(frontier: &ConfigFrontier, max_settings: usize) -> Vec<ProcessingConfiguration> {
    let distinct = frontier.distinct_settings();
    if distinct.len() <= max_settings || max_settings < 2 {
        return distinct;
    }
    let len = distinct.len();
    let mut out = Vec::with_capacity(max_settings);
    let mut last = usize::MAX;
    for k in 0..max_settings {
        let idx = (k as f64 * (len - 1) as f64 / (max_settings - 1) as f64).round() as usize;
        if idx != last {
            out.push(distinct[idx].clone());
            last = idx;
        }
    }
    out
}

/// Frontier settings plus the two grid extremes (stock governor and
/// all-minimum), so the model never extrapolates past its training range
/// when queried on an arbitrary configuration.
pub fn training_settings(
    device: &DeviceModel,
    frontier: &ConfigFrontier,
    max_settings: usize,
) -> Vec<ProcessingConfiguration> {
    let mut settings = frontier_settings(frontier, max_settings.saturating_sub(2).max(2));
    let governor = device.governor_config();
    let floor = ProcessingConfiguration {
        erf_denominator: 1,
        big_ghz: device.big_freqs_ghz[0],
        little_ghz: device.little_freqs_ghz[0],
        gpu_mhz: device.gpu_freqs_mhz[0],
        render_placement: Cluster::Little,
    };
    for anchor in [floor, governor] {
        if !settings.iter().any(|s| s.setting_key() == anchor.setting_key()) {
            settings.push(anchor);
        }
    }
    settings
}

/// Trains the three per-gesture QoE networks against a user oracle.
pub fn train_qoe_predictor(
    corpus: &Corpus,
    user: &UserModel,
    cfg: &PredictorConfig,
    seed: u64,
) -> Result<QoePredictor> {
    let pipeline = FeaturePipeline::fit(corpus, cfg.out_dim, cfg.corr_threshold)?;
    let models: Vec<(GestureKind, GestureModel)> = GestureKind::ALL
        .par_iter()
        .map(|&gesture| -> Result<(GestureKind, GestureModel)> {
            let data = build_qoe_dataset(corpus, user, gesture, cfg.speeds.for_gesture(gesture), &pipeline)?;
            let spec = cfg.network_spec(2 * cfg.out_dim + 1);
            let init = Network::init(spec, rng::child_seed(seed, &format!("qoe-{}", gesture.name())))?;
            let mut training = cfg.qoe_training.clone();
            training.seed = rng::child_seed(seed, &format!("qoe-train-{}", gesture.name()));
            let network = train(&init, &data, &training)?;
            Ok((gesture, GestureModel { network, pipeline: pipeline.clone() }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QoePredictor { models: models.into_iter().collect() })
}

/// Trains the three per-gesture FPS networks against a device oracle.
pub fn train_fps_predictor(
    corpus: &Corpus,
    device: &DeviceModel,
    frontier: &ConfigFrontier,
    cfg: &PredictorConfig,
    seed: u64,
) -> Result<FpsPredictor> {
    let pipeline = FeaturePipeline::fit(corpus, cfg.fps_out_dim, cfg.corr_threshold)?;
    let scale = FreqScale::of(device);
    let settings = training_settings(device, frontier, cfg.max_settings);
    let models: Vec<(GestureKind, GestureModel)> = GestureKind::ALL
        .par_iter()
        .map(|&gesture| -> Result<(GestureKind, GestureModel)> {
            let data = build_fps_dataset(
                corpus,
                device,
                gesture,
                cfg.speeds.for_gesture(gesture),
                &settings,
                &cfg.erfs,
                &pipeline,
                &scale,
            )?;
            let spec = cfg.network_spec(cfg.fps_out_dim + 8);
            let init = Network::init(spec, rng::child_seed(seed, &format!("fps-{}", gesture.name())))?;
            let mut training = cfg.fps_training.clone();
            training.seed = rng::child_seed(seed, &format!("fps-train-{}", gesture.name()));
            let network = train(&init, &data, &training)?;
            Ok((gesture, GestureModel { network, pipeline: pipeline.clone() }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FpsPredictor { device_name: device.name.clone(), scale, models: models.into_iter().collect() })
}

// ---------------------------------------------------------------------------
// Model bundle file: header line + one line per gesture model.
// ---------------------------------------------------------------------------

pub const MODEL_FORMAT: &str = "camel-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    format: String,
    version: u32,
    kind: String,
    device: Option<String>,
    scale: Option<FreqScale>,
    gestures: usize,
}

#[derive(Serialize, Deserialize)]
struct GestureLine {
    gesture: GestureKind,
    model: GestureModel,
}

pub fn write_qoe_predictor<W: Write>(p: &QoePredictor, mut out: W) -> Result<()> {
    let header = ModelHeader {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        kind: "qoe".into(),
        device: None,
        scale: None,
        gestures: p.models.len(),
    };
    writeln!(out, "{}", serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?)?;
    for (gesture, model) in &p.models {
        let line = GestureLine { gesture: *gesture, model: model.clone() };
        writeln!(out, "{}", serde_json::to_string(&line).map_err(|e| Error::Format(e.to_string()))?)?;
    }
    Ok(())
}

pub fn write_fps_predictor<W: Write>(p: &FpsPredictor, mut out: W) -> Result<()> {
    let header = ModelHeader {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        kind: "fps".into(),
        device: Some(p.device_name.clone()),
        scale: Some(p.scale.clone()),
        gestures: p.models.len(),
    };
    writeln!(out, "{}", serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?)?;
    for (gesture, model) in &p.models {
        let line = GestureLine { gesture: *gesture, model: model.clone() };
        writeln!(out, "{}", serde_json::to_string(&line).map_err(|e| Error::Format(e.to_string()))?)?;
    }
    Ok(())
}

fn read_model_lines<R: BufRead>(input: R, expect_kind: &str) -> Result<(ModelHeader, BTreeMap<GestureKind, GestureModel>)> {
    let mut lines = input.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Format("empty model file".into()))??;
    let header: ModelHeader =
        serde_json::from_str(&header_line).map_err(|e| Error::Format(format!("bad header: {e}")))?;
    if header.format != MODEL_FORMAT {
        return Err(Error::Format(format!("not a model file: {}", header.format)));
    }
    if header.version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {}", header.version)));
    }
    if header.kind != expect_kind {
        return Err(Error::Format(format!(
            "expected a {expect_kind} model, found {}",
            header.kind
        )));
    }
    let mut models = BTreeMap::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: GestureLine =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("bad model line: {e}")))?;
        models.insert(parsed.gesture, parsed.model);
    }
    Ok((header, models))
}

pub fn read_qoe_predictor<R: BufRead>(input: R) -> Result<QoePredictor> {
    let (_, models) = read_model_lines(input, "qoe")?;
    Ok(QoePredictor { models })
}

pub fn read_fps_predictor<R: BufRead>(input: R) -> Result<FpsPredictor> {
    let (header, models) = read_model_lines(input, "fps")?;
    Ok(FpsPredictor {
        device_name: header.device.unwrap_or_default(),
        scale: header
            .scale
            .ok_or_else(|| Error::Format("fps model lacks frequency scale".into()))?,
        models,
    })
}

pub fn save_qoe_predictor(p: &QoePredictor, path: &std::path::Path) -> Result<()> {
    write_qoe_predictor(p, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load_qoe_predictor(path: &std::path::Path) -> Result<QoePredictor> {
    read_qoe_predictor(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn save_fps_predictor(p: &FpsPredictor, path: &std::path::Path) -> Result<()> {
    write_fps_predictor(p, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load_fps_predictor(path: &std::path::Path) -> Result<FpsPredictor> {
    read_fps_predictor(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{fixture_image_heavy, fixture_text_heavy, generate_corpus, SizeProfile};
    use crate::device::{default_user, preset_device};
    use crate::search::{build_frontier, erf_ladder_desk};

    fn desk_corpus(seed: u64, n: usize) -> Corpus {
        generate_corpus(seed, n, &SizeProfile::default()).unwrap()
    }

    fn desk_frontier(corpus: &Corpus, device_name: &str) -> ConfigFrontier {
        let dev = preset_device(device_name).unwrap();
        let pages: Vec<&_> = corpus.pages.iter().take(20).collect();
        build_frontier(&dev, &pages, &[500.0, 1500.0, 3000.0], &erf_ladder_desk(), 7).unwrap()
    }

    #[test]
    fn degenerate_grid_has_one_sample() {
        let corpus = desk_corpus(3, 1);
        let dev = preset_device("xiaomi9").unwrap();
        let pipeline = FeaturePipeline::fit(&desk_corpus(3, 40), 8, 0.95).unwrap();
        let scale = FreqScale::of(&dev);
        let setting = dev.governor_config();
        let data = build_fps_dataset(
            &corpus,
            &dev,
            GestureKind::Scroll,
            &[800.0],
            &[setting],
            &[1],
            &pipeline,
            &scale,
        )
        .unwrap();
        assert_eq!(data.len(), 1);
    }

    #[test]
    fn fps_grid_cardinality_is_the_product() {
        let corpus = desk_corpus(11, 40);
        let dev = preset_device("xiaomi9").unwrap();
        let frontier = desk_frontier(&corpus, "xiaomi9");
        let settings = frontier_settings(&frontier, 8);
        let pipeline = FeaturePipeline::fit(&corpus, 12, 0.95).unwrap();
        let scale = FreqScale::of(&dev);
        let speeds = SpeedGrid::desk();
        let data = build_fps_dataset(
            &corpus,
            &dev,
            GestureKind::Scroll,
            &speeds.scroll,
            &settings,
            &erf_ladder_desk(),
            &pipeline,
            &scale,
        )
        .unwrap();
        assert_eq!(data.len(), 40 * 5 * settings.len() * 4);
        assert!(settings.len() <= 8);

        let shape = fps_grid_shape(&corpus, &speeds.scroll, &settings, &erf_ladder_desk());
        assert_eq!(shape.total(), data.len() as u64);
    }

    #[test]
    fn fps_labels_match_oracle_recomputation() {
        let corpus = desk_corpus(13, 10);
        let dev = preset_device("pixel2").unwrap();
        let frontier = desk_frontier(&corpus, "pixel2");
        let settings = frontier_settings(&frontier, 4);
        let pipeline = FeaturePipeline::fit(&corpus, 10, 0.95).unwrap();
        let scale = FreqScale::of(&dev);
        let speeds = [600.0, 1800.0];
        let erfs = [1u32, 6];
        let data = build_fps_dataset(
            &corpus,
            &dev,
            GestureKind::Fling,
            &speeds,
            &settings,
            &erfs,
            &pipeline,
            &scale,
        )
        .unwrap();
        let shape = fps_grid_shape(&corpus, &speeds, &settings, &erfs);
        assert_eq!(shape.total(), data.len() as u64);

        let mut probe = crate::rng::seeded(5);
        for _ in 0..100 {
            let flat = rand::Rng::gen_range(&mut probe, 0..data.len() as u64);
            let (p, v, s, e) = fps_grid_cell(&shape, flat);
            let page = &corpus.pages[p];
            let slice = page.slice_at(page.page_height_px / 2).unwrap();
            let g = Gesture::new(GestureKind::Fling, speeds[v], 1.0).unwrap();
            let config = ProcessingConfiguration {
                erf_denominator: erfs[e],
                ..settings[s].clone()
            };
            let prev = grid_prev_cluster(p, s, &config);
            let expect = dev.true_fps(page, slice, &g, &config, prev).unwrap();
            assert_eq!(data.targets[flat as usize], expect);
        }
    }

    #[test]
    fn qoe_grid_counts_pages_gestures_speeds() {
        let corpus = desk_corpus(17, 100);
        let pipeline = FeaturePipeline::fit(&corpus, 12, 0.95).unwrap();
        let user = default_user();
        let speeds = SpeedGrid::desk();
        let mut total = 0;
        for gesture in GestureKind::ALL {
            let data =
                build_qoe_dataset(&corpus, &user, gesture, speeds.for_gesture(gesture), &pipeline)
                    .unwrap();
            assert_eq!(data.len(), 100 * 5);
            total += data.len();
        }
        assert_eq!(total, 1500);
    }

    #[test]
    fn qoe_labels_match_oracle_recomputation() {
        let corpus = desk_corpus(19, 12);
        let pipeline = FeaturePipeline::fit(&corpus, 10, 0.95).unwrap();
        let user = default_user();
        let speeds = [700.0, 1400.0];
        let data =
            build_qoe_dataset(&corpus, &user, GestureKind::Scroll, &speeds, &pipeline).unwrap();
        let ladder = qoe_ladder();
        for (i, page) in corpus.pages.iter().enumerate() {
            for (j, &speed) in speeds.iter().enumerate() {
                let offset = qoe_cell_offset(page, GestureKind::Scroll, speed);
                let slice = page.slice_at(offset).unwrap();
                let expect = user
                    .elicit_min_fps(page, slice, GestureKind::Scroll, speed, &ladder)
                    .unwrap();
                assert_eq!(data.targets[i * speeds.len() + j], expect);
            }
        }
    }

    #[test]
    fn empty_speed_grid_gives_empty_dataset() {
        let corpus = desk_corpus(23, 5);
        let pipeline = FeaturePipeline::fit(&corpus, 8, 0.95).unwrap();
        let data =
            build_qoe_dataset(&corpus, &default_user(), GestureKind::Pinch, &[], &pipeline).unwrap();
        assert!(data.is_empty());
    }

    #[test]
    fn predictions_are_pure() {
        let corpus = desk_corpus(29, 40);
        let cfg = PredictorConfig { qoe_training: TrainingConfig { epochs: 5, ..PredictorConfig::desk(1).qoe_training }, ..PredictorConfig::desk(1) };
        let qoe = train_qoe_predictor(&corpus, &default_user(), &cfg, 1).unwrap();
        let input = qoe.input_for(GestureKind::Scroll, &corpus.pages[0], 0, 900.0).unwrap();
        let a = qoe.predict_min_fps(GestureKind::Scroll, &input).unwrap();
        let b = qoe.predict_min_fps(GestureKind::Scroll, &input).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
    }

    #[test]
    fn missing_gesture_model_is_a_config_error() {
        let corpus = desk_corpus(31, 40);
        let cfg = PredictorConfig { qoe_training: TrainingConfig { epochs: 2, ..PredictorConfig::desk(1).qoe_training }, ..PredictorConfig::desk(1) };
        let mut qoe = train_qoe_predictor(&corpus, &default_user(), &cfg, 1).unwrap();
        qoe.models.remove(&GestureKind::Fling);
        let input = qoe.input_for(GestureKind::Scroll, &corpus.pages[0], 0, 900.0).unwrap();
        match qoe.predict_min_fps(GestureKind::Fling, &input) {
            Err(Error::Config(_)) => {}
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn trained_qoe_predictor_recovers_fixture_targets() {
        let corpus = desk_corpus(37, 80);
        let cfg = PredictorConfig::desk(2);
        let qoe = train_qoe_predictor(&corpus, &default_user(), &cfg, 2).unwrap();

        let img = fixture_image_heavy();
        let input = qoe.input_for(GestureKind::Scroll, &img, 0, 1000.0).unwrap();
        let target_img = qoe.predict_min_fps(GestureKind::Scroll, &input).unwrap();
        assert!(
            (target_img - 32.0).abs() <= 3.0,
            "image-heavy fixture target {target_img}, want 32 +/- 3"
        );

        let txt = fixture_text_heavy();
        let input = qoe.input_for(GestureKind::Scroll, &txt, 0, 1000.0).unwrap();
        let target_txt = qoe.predict_min_fps(GestureKind::Scroll, &input).unwrap();
        assert!(
            (target_txt - 23.0).abs() <= 3.0,
            "text-heavy fixture target {target_txt}, want 23 +/- 3"
        );
    }

    #[test]
    fn trained_fps_predictor_tracks_oracle_on_held_out_pages() {
        let train_corpus = desk_corpus(41, 60);
        let dev = preset_device("xiaomi9").unwrap();
        let frontier = desk_frontier(&train_corpus, "xiaomi9");
        let cfg = PredictorConfig::desk(3);
        let fps = train_fps_predictor(&train_corpus, &dev, &frontier, &cfg, 3).unwrap();

        let held_out = desk_corpus(4242, 20);
        let settings = frontier_settings(&frontier, cfg.max_settings);
        let pipeline = &fps.model(GestureKind::Scroll).unwrap().pipeline;
        let mut rel_err_sum = 0.0;
        let mut n = 0usize;
        let mut mono_ok = 0usize;
        let mut mono_total = 0usize;
        for page in &held_out.pages {
            let slice_idx = page.slice_index_at(page.page_height_px / 2).unwrap();
            let slice = &page.viewport_profiles[slice_idx];
            let features = pipeline.features(page, slice_idx).unwrap();
            for &speed in &[600.0, 1400.0] {
                let g = Gesture::new(GestureKind::Scroll, speed, 1.0).unwrap();
                for setting in &settings {
                    for &erf in &[1u32, 6] {
                        let config = ProcessingConfiguration { erf_denominator: erf, ..setting.clone() };
                        let input = FpsInput {
                            viewport_features: features.clone(),
                            speed_px_s: speed,
                            config: config.clone(),
                            render_cluster: config.render_placement,
                        };
                        let pred = fps.predict_fps(GestureKind::Scroll, &input).unwrap();
                        let truth = dev
                            .true_fps(page, slice, &g, &config, config.render_placement)
                            .unwrap();
                        rel_err_sum += (pred - truth).abs() / truth;
                        n += 1;
                    }
                }

                // max-frequency vs min-frequency ordering, on cells where
                // the oracle orders them strictly (no cap tie)
                let max_cfg = ProcessingConfiguration { erf_denominator: 6, ..dev.governor_config() };
                let min_cfg = ProcessingConfiguration {
                    erf_denominator: 6,
                    big_ghz: dev.big_freqs_ghz[0],
                    little_ghz: dev.little_freqs_ghz[0],
                    gpu_mhz: dev.gpu_freqs_mhz[0],
                    render_placement: Cluster::Little,
                };
                let hi_true = dev.true_fps(page, slice, &g, &max_cfg, Cluster::Big).unwrap();
                let lo_true = dev.true_fps(page, slice, &g, &min_cfg, Cluster::Little).unwrap();
                if hi_true > lo_true + 0.5 {
                    let with = |config: &ProcessingConfiguration| FpsInput {
                        viewport_features: features.clone(),
                        speed_px_s: speed,
                        config: config.clone(),
                        render_cluster: config.render_placement,
                    };
                    let hi = fps.predict_fps(GestureKind::Scroll, &with(&max_cfg)).unwrap();
                    let lo = fps.predict_fps(GestureKind::Scroll, &with(&min_cfg)).unwrap();
                    if hi >= lo {
                        mono_ok += 1;
                    }
                    mono_total += 1;
                }
            }
        }
        let mean_rel_err = rel_err_sum / n as f64;
        assert!(mean_rel_err < 0.10, "held-out mean relative error {mean_rel_err}");
        assert!(
            mono_ok as f64 >= 0.95 * mono_total as f64,
            "monotone ordering held on {mono_ok}/{mono_total} cases"
        );
    }

    #[test]
    fn model_bundles_roundtrip() {
        let corpus = desk_corpus(43, 40);
        let dev = preset_device("huaweip9").unwrap();
        let frontier = desk_frontier(&corpus, "huaweip9");
        let mut cfg = PredictorConfig::desk(4);
        cfg.qoe_training.epochs = 5;
        cfg.fps_training.epochs = 2;
        let qoe = train_qoe_predictor(&corpus, &default_user(), &cfg, 4).unwrap();
        let fps = train_fps_predictor(&corpus, &dev, &frontier, &cfg, 4).unwrap();

        let mut buf = Vec::new();
        write_qoe_predictor(&qoe, &mut buf).unwrap();
        let qoe2 = read_qoe_predictor(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(qoe, qoe2);

        let mut buf = Vec::new();
        write_fps_predictor(&fps, &mut buf).unwrap();
        let fps2 = read_fps_predictor(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(fps, fps2);

        let input = qoe.input_for(GestureKind::Pinch, &corpus.pages[1], 100, 400.0).unwrap();
        assert_eq!(
            qoe.predict_min_fps(GestureKind::Pinch, &input).unwrap().to_bits(),
            qoe2.predict_min_fps(GestureKind::Pinch, &input).unwrap().to_bits()
        );
    }
}
