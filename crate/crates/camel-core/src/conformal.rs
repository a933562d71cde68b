//! Inductive conformal prediction over the regression predictors:
//! difficulty-normalized nonconformity scores, distribution-free error
//! bounds, suspect flagging and the feedback-driven update loop.

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, GestureKind};
use crate::device::UserModel;
use crate::error::{Error, Result};
use crate::neural::{Dataset, Network, TrainingConfig};
use crate::predictors::qoe_ladder;

/// k-nearest-neighbor difficulty estimator: g(x) is the mean absolute
/// residual of the k nearest proper-training points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnDifficulty {
    pub inputs: Vec<Vec<f64>>,
    pub abs_residuals: Vec<f64>,
    pub k: usize,
}

impl KnnDifficulty {
    pub fn fit<F>(h: F, proper_train: &Dataset, k: usize) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<f64>,
    {
        if proper_train.is_empty() {
            return Err(Error::Fit("difficulty estimator needs training data".into()));
        }
        let k = k.clamp(1, proper_train.len());
        let abs_residuals = proper_train
            .inputs
            .iter()
            .zip(&proper_train.targets)
            .map(|(x, &y)| Ok((y - h(x)?).abs()))
            .collect::<Result<Vec<_>>>()?;
        Ok(KnnDifficulty { inputs: proper_train.inputs.clone(), abs_residuals, k })
    }

    /// Mean |residual| over the k nearest stored inputs; ties resolve by
    /// (distance, index) so the estimate is deterministic.
    pub fn estimate(&self, x: &[f64]) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .inputs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, i)
            })
            .collect();
        dist.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let k = self.k.min(dist.len());
        dist[..k]
            .iter()
            .map(|&(_, i)| self.abs_residuals[i])
            .sum::<f64>()
            / k as f64
    }
}

/// Inductive conformal model around a regression predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpModel {
    pub difficulty: KnnDifficulty,
    /// Sensitivity of the normalization; keeps the denominator positive.
    pub beta: f64,
    /// Nonconformity scores of the calibration split, ascending.
    pub calibration_scores: Vec<f64>,
}

/// Error bound of one prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBound {
    pub center: f64,
    pub half_width: f64,
    pub relative_bound: f64,
}

pub const BETA_GRID: [f64; 8] = [0.01, 0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0];

/// Fits the difficulty estimator on the proper-training split, chooses
/// beta by grid search (smallest median interval width subject to
/// empirical coverage >= 1 - eps on a validation half of the calibration
/// split), then scores the full calibration split.
pub fn fit_cp<F>(
    h: F,
    proper_train: &Dataset,
    calibration: &Dataset,
    k: usize,
    epsilon: f64,
) -> Result<CpModel>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if calibration.is_empty() {
        return Err(Error::Fit("conformal calibration split is empty".into()));
    }
    if !(0.0 < epsilon && epsilon < 1.0) {
        return Err(Error::Domain(format!("significance must lie in (0,1), got {epsilon}")));
    }
    let difficulty = KnnDifficulty::fit(&h, proper_train, k)?;

    let residuals: Vec<f64> = calibration
        .inputs
        .iter()
        .zip(&calibration.targets)
        .map(|(x, &y)| Ok((y - h(x)?).abs()))
        .collect::<Result<Vec<_>>>()?;
    let difficulties: Vec<f64> = calibration.inputs.iter().map(|x| difficulty.estimate(x)).collect();

    // even indices tune beta, odd indices validate it
    let fit_idx: Vec<usize> = (0..calibration.len()).step_by(2).collect();
    let val_idx: Vec<usize> = (1..calibration.len()).step_by(2).collect();
    let (fit_idx, val_idx) = if val_idx.is_empty() {
        (fit_idx.clone(), fit_idx)
    } else {
        (fit_idx, val_idx)
    };

    let mut chosen = None;
    let mut fallback: Option<(f64, f64)> = None; // (coverage, beta)
    for &beta in &BETA_GRID {
        let mut scores: Vec<f64> = fit_idx
            .iter()
            .map(|&i| residuals[i] / (difficulties[i] + beta))
            .collect();
        scores.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let q = quantile_value(&scores, epsilon);

        let mut widths: Vec<f64> = Vec::with_capacity(val_idx.len());
        let mut covered = 0usize;
        for &i in &val_idx {
            let hw = q * (difficulties[i] + beta);
            widths.push(hw);
            if residuals[i] <= hw {
                covered += 1;
            }
        }
        widths.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let median = widths[widths.len() / 2];
        let coverage = covered as f64 / val_idx.len() as f64;

        if coverage >= 1.0 - epsilon {
            match chosen {
                Some((best_median, _)) if best_median <= median => {}
                _ => chosen = Some((median, beta)),
            }
        }
        match fallback {
            Some((best_cov, _)) if best_cov >= coverage => {}
            _ => fallback = Some((coverage, beta)),
        }
    }
    let beta = chosen
        .map(|(_, b)| b)
        .or(fallback.map(|(_, b)| b))
        .expect("beta grid is non-empty");

    let mut calibration_scores: Vec<f64> = residuals
        .iter()
        .zip(&difficulties)
        .map(|(r, g)| r / (g + beta))
        .collect();
    calibration_scores.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));

    Ok(CpModel { difficulty, beta, calibration_scores })
}

/// The ceil((1-eps)(n+1))-th smallest score, clamped to the largest one.
fn quantile_value(sorted_scores: &[f64], epsilon: f64) -> f64 {
    let n = sorted_scores.len();
    let rank = ((1.0 - epsilon) * (n as f64 + 1.0)).ceil() as usize;
    sorted_scores[rank.clamp(1, n) - 1]
}

/// Nonconformity of a labeled point: |y - h(x)| / (g(x) + beta).
pub fn nonconformity<F>(cp: &CpModel, h: F, x: &[f64], y: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    Ok((y - h(x)?).abs() / (cp.difficulty.estimate(x) + cp.beta))
}

/// Distribution-free error bound at significance epsilon.
pub fn predict_interval<F>(cp: &CpModel, h: F, x: &[f64], epsilon: f64) -> Result<ErrorBound>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !(0.0 < epsilon && epsilon < 1.0) {
        return Err(Error::Domain(format!("significance must lie in (0,1), got {epsilon}")));
    }
    let center = h(x)?;
    let q = quantile_value(&cp.calibration_scores, epsilon);
    let half_width = q * (cp.difficulty.estimate(x) + cp.beta);
    let relative_bound = if center != 0.0 { half_width / center.abs() } else { f64::INFINITY };
    Ok(ErrorBound { center, half_width, relative_bound })
}

/// A prediction is suspect when its relative error bound exceeds the
/// threshold (default one fifth of the predicted value).
pub const SUSPECT_THRESHOLD: f64 = 0.20;

pub fn is_suspect<F>(
    cp: &CpModel,
    h: F,
    x: &[f64],
    epsilon: f64,
    threshold: f64,
) -> Result<bool>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    Ok(predict_interval(cp, h, x, epsilon)?.relative_bound > threshold)
}

/// Scheduling target used while an update is pending: the high end of the
/// estimated error bound, so violations stay unlikely in the meantime.
pub fn interim_target(bound: &ErrorBound) -> f64 {
    bound.center + bound.half_width
}

/// A suspect prediction queued for ground-truth feedback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedInput {
    pub page_id: String,
    pub gesture: GestureKind,
    pub speed_px_s: f64,
    pub offset_px: u32,
    pub input: Vec<f64>,
    pub center: f64,
    pub half_width: f64,
}

/// Outcome of one continuous-learning pass.
#[derive(Debug, Clone)]
pub struct ContinuousUpdate {
    pub network: Network,
    pub cp: CpModel,
    /// Transfer dataset including the newly labeled inputs.
    pub tl_data: Dataset,
    pub labeled: usize,
    /// Inputs whose feedback ladder was rejected outright, skipped.
    pub skipped: usize,
}

/// Labels the flagged inputs via the user's replay feedback, appends them
/// to the transfer set, retrains from the current weights and refits the
/// conformal model on the enlarged data. Nothing is mutated in place.
#[allow(clippy::too_many_arguments)]
pub fn continuous_update(
    cp: &CpModel,
    network: &Network,
    flagged: &[FlaggedInput],
    corpus: &Corpus,
    user: &UserModel,
    tl_data: &Dataset,
    train_cfg: &TrainingConfig,
    knn_k: usize,
    epsilon: f64,
) -> Result<ContinuousUpdate> {
    if flagged.is_empty() {
        return Ok(ContinuousUpdate {
            network: network.clone(),
            cp: cp.clone(),
            tl_data: tl_data.clone(),
            labeled: 0,
            skipped: 0,
        });
    }

    let ladder = qoe_ladder();
    let mut enlarged = tl_data.clone();
    let mut labeled = 0usize;
    let mut skipped = 0usize;
    for item in flagged {
        let page = corpus
            .page(&item.page_id)
            .ok_or_else(|| Error::Domain(format!("flagged page {} not in corpus", item.page_id)))?;
        let slice = page.slice_at(item.offset_px)?;
        match user.elicit_min_fps(page, slice, item.gesture, item.speed_px_s, &ladder) {
            Ok(label) => {
                enlarged.inputs.push(item.input.clone());
                enlarged.targets.push(label);
                labeled += 1;
            }
            Err(Error::NoneAcceptable(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }

    let updated = crate::adapt::transfer_train(network, &enlarged, train_cfg)?;

    // refit conformal state on the enlarged data: every fifth sample
    // calibrates, the rest feed the difficulty estimator
    let calib_idx: Vec<usize> = (0..enlarged.len()).filter(|i| i % 5 == 0).collect();
    let proper_idx: Vec<usize> = (0..enlarged.len()).filter(|i| i % 5 != 0).collect();
    let proper = if proper_idx.is_empty() { enlarged.clone() } else { enlarged.subset(&proper_idx) };
    let calibration = enlarged.subset(&calib_idx);
    let cp_new = fit_cp(|x| updated.forward(x), &proper, &calibration, knn_k, epsilon)?;

    Ok(ContinuousUpdate { network: updated, cp: cp_new, tl_data: enlarged, labeled, skipped })
}

// ---------------------------------------------------------------------------
// File formats: CP bundle and the flagged-input log.
// ---------------------------------------------------------------------------

pub const CP_FORMAT: &str = "camel-cp";
pub const CP_VERSION: u32 = 1;
pub const FLAGGED_FORMAT: &str = "camel-flagged";

/// A conformal model bound to one gesture plus the knobs it was fit with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpBundle {
    pub gesture: GestureKind,
    pub epsilon: f64,
    pub knn_k: usize,
    pub cp: CpModel,
}

pub fn save_cp_bundle(bundle: &CpBundle, path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", serde_json::json!({"format": CP_FORMAT, "version": CP_VERSION}))?;
    writeln!(
        out,
        "{}",
        serde_json::to_string(bundle).map_err(|e| Error::Format(e.to_string()))?
    )?;
    Ok(())
}

pub fn load_cp_bundle(path: &std::path::Path) -> Result<CpBundle> {
    use std::io::BufRead;
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = file.lines();
    let header: serde_json::Value = serde_json::from_str(
        &lines.next().ok_or_else(|| Error::Format("empty cp file".into()))??,
    )
    .map_err(|e| Error::Format(format!("bad cp header: {e}")))?;
    if header["format"] != CP_FORMAT {
        return Err(Error::Format("not a cp file".into()));
    }
    let body = lines.next().ok_or_else(|| Error::Format("cp file lacks a body".into()))??;
    serde_json::from_str(&body).map_err(|e| Error::Format(format!("bad cp body: {e}")))
}

pub fn save_flagged_log(flagged: &[FlaggedInput], path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "{}",
        serde_json::json!({"format": FLAGGED_FORMAT, "version": 1, "entries": flagged.len()})
    )?;
    for item in flagged {
        writeln!(
            out,
            "{}",
            serde_json::to_string(item).map_err(|e| Error::Format(e.to_string()))?
        )?;
    }
    Ok(())
}

pub fn load_flagged_log(path: &std::path::Path) -> Result<Vec<FlaggedInput>> {
    use std::io::BufRead;
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = file.lines();
    let header: serde_json::Value = serde_json::from_str(
        &lines.next().ok_or_else(|| Error::Format("empty flagged log".into()))??,
    )
    .map_err(|e| Error::Format(format!("bad flagged header: {e}")))?;
    if header["format"] != FLAGGED_FORMAT {
        return Err(Error::Format("not a flagged log".into()));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("bad flagged line: {e}")))?,
        );
    }
    Ok(out)
}
