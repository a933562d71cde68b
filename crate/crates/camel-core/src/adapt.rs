//! Porting predictors to a new environment: k-means over page features,
//! BIC-scored choice of cluster count, two representative pages per cluster,
//! and fine-tuning from copied weights on the small profiled set.

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, GestureKind};
use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::neural::{train, Dataset, Network, TrainingConfig};
use crate::predictors::{
    build_fps_dataset, FeaturePipeline, FpsPredictor, FreqScale, GestureModel, PredictorConfig,
};
use crate::rng;
use crate::search::ConfigFrontier;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index per input point.
    pub assignment: Vec<usize>,
    /// Total point count R.
    pub total_points: usize,
    /// Points per cluster R_n.
    pub cluster_sizes: Vec<usize>,
    /// Pooled ML variance of point-to-centroid distances,
    /// sum ||x - c(x)||^2 / (R * d).
    pub sigma2: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm from k-means++ seeding; converges when assignments
/// stabilize or after 300 iterations. Deterministic per seed.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusteringResult> {
    Ok(kmeans_with_history(points, k, seed)?.0)
}

/// As [`kmeans`], also returning the within-cluster sum of squares after
/// each Lloyd iteration.
pub fn kmeans_with_history(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
) -> Result<(ClusteringResult, Vec<f64>)> {
    let n = points.len();
    if k < 1 {
        return Err(Error::Domain("k must be >= 1".into()));
    }
    if k > n {
        return Err(Error::Domain(format!("k = {k} exceeds the {n} available points")));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Domain("points have inconsistent dimensions".into()));
    }

    let mut rng = rng::seeded(rng::child_seed(seed, "kmeans"));

    // k-means++ seeding
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // all mass at existing centroids; spread deterministically
            rng.gen_range(0..n)
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centroids.last().unwrap()));
        }
    }

    let mut assignment = vec![0usize; n];
    let mut wcss_history = Vec::new();
    for _iter in 0..300 {
        // assignment step
        let mut changed = false;
        let mut wcss = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (best, best_d) = centroids
                .iter()
                .enumerate()
                .map(|(c, centroid)| (c, sq_dist(p, centroid)))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
                .unwrap();
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
            wcss += best_d;
        }
        wcss_history.push(wcss);
        if !changed && wcss_history.len() > 1 {
            break;
        }

        // update step
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignment) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // adopt the point farthest from its centroid
                let (far, _) = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, sq_dist(p, &centroids[assignment[i]])))
                    .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
                    .unwrap();
                centroids[c] = points[far].clone();
            } else {
                for (j, s) in sums[c].iter().enumerate() {
                    centroids[c][j] = s / counts[c] as f64;
                }
            }
        }
    }

    let mut cluster_sizes = vec![0usize; k];
    let mut ss = 0.0;
    for (p, &c) in points.iter().zip(&assignment) {
        cluster_sizes[c] += 1;
        ss += sq_dist(p, &centroids[c]);
    }
    let sigma2 = ss / (n as f64 * dim as f64);

    Ok((
        ClusteringResult {
            k,
            centroids,
            assignment,
            total_points: n,
            cluster_sizes,
            sigma2,
        },
        wcss_history,
    ))
}

/// Best of several seeded k-means runs by within-cluster sum of squares.
pub fn kmeans_best(points: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> Result<ClusteringResult> {
    let mut best: Option<(f64, ClusteringResult)> = None;
    for r in 0..restarts.max(1) {
        let (clustering, history) =
            kmeans_with_history(points, k, rng::child_seed(seed, &format!("restart{r}")))?;
        let wcss = *history.last().unwrap_or(&f64::INFINITY);
        match &best {
            Some((best_wcss, _)) if *best_wcss <= wcss => {}
            _ => best = Some((wcss, clustering)),
        }
    }
    Ok(best.expect("at least one restart").1)
}

/// Free-parameter count: (K-1) class probabilities + d*K centroid
/// coordinates + 1 variance estimate.
pub fn bic_free_params(k: usize, dim: usize) -> usize {
    (k - 1) + dim * k + 1
}

/// Likelihood-based cluster-count score; larger is better. Natural log
/// throughout. Fails when the pooled variance degenerates to zero.
pub fn bic(points: &[Vec<f64>], clustering: &ClusteringResult) -> Result<f64> {
    let r = clustering.total_points as f64;
    if points.len() != clustering.total_points {
        return Err(Error::Domain("clustering does not describe these points".into()));
    }
    if clustering.sigma2 <= 0.0 {
        return Err(Error::Fit(
            "degenerate variance: every point coincides with its centroid".into(),
        ));
    }
    let dim = points[0].len() as f64;
    let k = clustering.k as f64;
    let two_pi = 2.0 * std::f64::consts::PI;

    let mut log_likelihood = 0.0;
    for &r_n in &clustering.cluster_sizes {
        if r_n == 0 {
            continue;
        }
        let rn = r_n as f64;
        log_likelihood += -(rn / 2.0) * two_pi.ln()
            - (rn * dim / 2.0) * clustering.sigma2.ln()
            - (rn - k) / 2.0
            + rn * (rn / r).ln();
    }
    let p_j = bic_free_params(clustering.k, points[0].len()) as f64;
    Ok(log_likelihood - (p_j / 2.0) * r.ln())
}

/// Runs k-means for each k in the range and keeps the clustering with the
/// highest BIC score; ties go to the smaller k.
pub fn select_k(
    points: &[Vec<f64>],
    k_range: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Result<ClusteringResult> {
    let mut best: Option<(f64, ClusteringResult)> = None;
    for k in k_range {
        let clustering = kmeans_best(points, k, rng::child_seed(seed, &format!("k{k}")), 4)?;
        let score = bic(points, &clustering)?;
        match &best {
            Some((best_score, _)) if *best_score >= score => {}
            _ => best = Some((score, clustering)),
        }
    }
    best.map(|(_, c)| c)
        .ok_or_else(|| Error::Domain("empty k range".into()))
}

/// The two chosen pages of one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRepresentatives {
    pub cluster: usize,
    /// Member closest to its own centroid.
    pub centroid_nearest: String,
    /// Member with the largest root-sum-of-squares distance to the other
    /// clusters' centroids.
    pub frontier_point: String,
    /// Set when a singleton cluster filled both slots with the same page.
    pub duplicated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeSet {
    pub clusters: Vec<ClusterRepresentatives>,
}

impl RepresentativeSet {
    /// All chosen page ids, duplicates removed, selection order kept.
    pub fn page_ids(&self) -> Vec<String> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for c in &self.clusters {
            for id in [&c.centroid_nearest, &c.frontier_point] {
                if seen.insert(id.clone()) {
                    out.push(id.clone());
                }
            }
        }
        out
    }

    /// Total slots including duplicates: two per cluster.
    pub fn slot_count(&self) -> usize {
        self.clusters.len() * 2
    }
}

/// Picks two pages per cluster: the member nearest its own centroid, and
/// the member farthest (root-sum-of-squares) from all other centroids.
/// Ties resolve to the lower point index.
pub fn select_representatives(
    points: &[Vec<f64>],
    page_ids: &[String],
    clustering: &ClusteringResult,
) -> Result<RepresentativeSet> {
    if points.len() != page_ids.len() || points.len() != clustering.total_points {
        return Err(Error::Domain("points, ids and clustering sizes disagree".into()));
    }
    let mut clusters = Vec::with_capacity(clustering.k);
    for c in 0..clustering.k {
        let members: Vec<usize> = (0..points.len())
            .filter(|&i| clustering.assignment[i] == c)
            .collect();
        if members.is_empty() {
            return Err(Error::Domain(format!("cluster {c} is empty")));
        }

        let nearest = *members
            .iter()
            .min_by(|&&a, &&b| {
                sq_dist(&points[a], &clustering.centroids[c])
                    .partial_cmp(&sq_dist(&points[b], &clustering.centroids[c]))
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            })
            .unwrap();

        // root of the summed squared distances to every other centroid;
        // the root is monotone, so compare the sums directly
        let other_mass = |i: usize| -> f64 {
            clustering
                .centroids
                .iter()
                .enumerate()
                .filter(|(oc, _)| *oc != c)
                .map(|(_, centroid)| sq_dist(&points[i], centroid))
                .sum()
        };
        let frontier = if clustering.k == 1 {
            nearest
        } else {
            *members
                .iter()
                .max_by(|&&a, &&b| {
                    other_mass(a)
                        .partial_cmp(&other_mass(b))
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(b.cmp(&a))
                })
                .unwrap()
        };

        let duplicated = members.len() == 1;
        clusters.push(ClusterRepresentatives {
            cluster: c,
            centroid_nearest: page_ids[nearest].clone(),
            frontier_point: page_ids[if duplicated { nearest } else { frontier }].clone(),
            duplicated,
        });
    }
    Ok(RepresentativeSet { clusters })
}

/// Copies the base weights and fine-tunes on the small dataset;
/// the base network is untouched.
pub fn transfer_train(base: &Network, small: &Dataset, cfg: &TrainingConfig) -> Result<Network> {
    let init = Network::init_from_base(base, &base.spec)?;
    train(&init, small, cfg)
}

/// One feature vector per page (midpoint slice), the space pages are
/// clustered in when choosing transfer sets.
pub fn page_feature_matrix(corpus: &Corpus, pipeline: &FeaturePipeline) -> Result<Vec<Vec<f64>>> {
    corpus
        .pages
        .iter()
        .map(|p| {
            let idx = p.slice_index_at(p.page_height_px / 2)?;
            Ok(pipeline.features(p, idx)?.values)
        })
        .collect()
}

/// Clusters the corpus in feature space and returns the chosen profiling
/// pages (two per cluster) together with the clustering.
pub fn select_transfer_pages(
    corpus: &Corpus,
    pipeline: &FeaturePipeline,
    k_max: usize,
    seed: u64,
) -> Result<(RepresentativeSet, ClusteringResult)> {
    let points = page_feature_matrix(corpus, pipeline)?;
    let upper = k_max.min(points.len());
    if upper < 2 {
        return Err(Error::Domain("need at least two pages to cluster".into()));
    }
    let clustering = select_k(&points, 2..=upper, seed)?;
    let ids: Vec<String> = corpus.pages.iter().map(|p| p.id.clone()).collect();
    let reps = select_representatives(&points, &ids, &clustering)?;
    Ok((reps, clustering))
}

/// Ports an FPS predictor to a new device by profiling only the selected
/// pages there and fine-tuning each gesture network from the base weights.
/// The base's feature pipeline is reused so input encodings stay aligned.
pub fn transfer_fps_predictor(
    base: &FpsPredictor,
    corpus: &Corpus,
    page_ids: &[String],
    target_device: &DeviceModel,
    frontier: &ConfigFrontier,
    cfg: &PredictorConfig,
    seed: u64,
) -> Result<FpsPredictor> {
    let subset = Corpus {
        seed: corpus.seed,
        pages: corpus
            .pages
            .iter()
            .filter(|p| page_ids.contains(&p.id))
            .cloned()
            .collect(),
    };
    if subset.pages.is_empty() {
        return Err(Error::Domain("no selected pages found in the corpus".into()));
    }
    let scale = FreqScale::of(target_device);
    let settings = crate::predictors::training_settings(target_device, frontier, cfg.max_settings);
    let mut models = std::collections::BTreeMap::new();
    for gesture in GestureKind::ALL {
        let base_model = base.model(gesture)?;
        let data = build_fps_dataset(
            &subset,
            target_device,
            gesture,
            cfg.speeds.for_gesture(gesture),
            &settings,
            &cfg.erfs,
            &base_model.pipeline,
            &scale,
        )?;
        let mut training = cfg.fps_training.clone();
        training.seed = rng::child_seed(seed, &format!("tl-{}", gesture.name()));
        let network = transfer_train(&base_model.network, &data, &training)?;
        models.insert(
            gesture,
            GestureModel { network, pipeline: base_model.pipeline.clone() },
        );
    }
    Ok(FpsPredictor { device_name: target_device.name.clone(), scale, models })
}
