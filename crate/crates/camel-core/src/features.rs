//! Feature pipeline: raw per-viewport statistics, correlation-filter +
//! PCA dimensionality reduction, and min-max normalization to [0, 1].
//!
//! The raw layout is fixed: scalar page/viewport statistics followed by one
//! reserved position per vocabulary name plus a catch-all per family, so
//! every page maps to the same dense vector regardless of which names it
//! actually uses.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    PageDescriptor, ViewportSlice, ATTR_VOCAB, PROPERTY_VOCAB, SELECTOR_VOCAB, TAG_VOCAB,
};
use crate::error::{Error, Result};

/// Named positions of the scalar block at the head of a raw vector.
pub mod raw_layout {
    pub const DOM_NODES: usize = 0;
    pub const TREE_DEPTH: usize = 1;
    pub const STYLE_RULES: usize = 2;
    pub const PAGE_HEIGHT: usize = 3;
    pub const SLICE_HEIGHT: usize = 4;
    pub const GPU_MEM: usize = 5;
    pub const IMAGE_FRACTION: usize = 6;
    pub const TEXT_DENSITY: usize = 7;
    pub const SCALARS: usize = 8;
}

pub const TAGS_START: usize = raw_layout::SCALARS;
pub const ATTRS_START: usize = TAGS_START + TAG_VOCAB.len() + 1;
pub const PROPS_START: usize = ATTRS_START + ATTR_VOCAB.len() + 1;
pub const SELECTORS_START: usize = PROPS_START + PROPERTY_VOCAB.len() + 1;
/// Fixed raw dimensionality of the extraction pipeline.
pub const RAW_DIM: usize = SELECTORS_START + SELECTOR_VOCAB.len() + 1;

/// A dense vector of raw (unreduced) feature values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFeatureVector {
    pub values: Vec<f64>,
}

impl RawFeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        RawFeatureVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A reduced feature vector with every component in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

fn fill_counts(out: &mut [f64], start: usize, vocab: &[&str], counts: &BTreeMap<String, u64>) {
    let catch_all = start + vocab.len();
    for (name, count) in counts {
        match vocab.iter().position(|v| v == name) {
            Some(pos) => out[start + pos] += *count as f64,
            None => out[catch_all] += *count as f64,
        }
    }
}

/// Extracts the raw feature vector of one (page, viewport) pair.
pub fn extract_raw(page: &PageDescriptor, viewport: &ViewportSlice) -> RawFeatureVector {
    let mut v = vec![0.0; RAW_DIM];
    v[raw_layout::DOM_NODES] = page.dom_node_count as f64;
    v[raw_layout::TREE_DEPTH] = page.tree_depth as f64;
    v[raw_layout::STYLE_RULES] = page.style_rule_count as f64;
    v[raw_layout::PAGE_HEIGHT] = f64::from(page.page_height_px);
    v[raw_layout::SLICE_HEIGHT] = f64::from(viewport.height_px());
    v[raw_layout::GPU_MEM] = viewport.gpu_mem_footprint as f64;
    v[raw_layout::IMAGE_FRACTION] = viewport.image_fraction;
    v[raw_layout::TEXT_DENSITY] = viewport.text_density;
    fill_counts(&mut v, TAGS_START, &TAG_VOCAB, &page.tag_counts);
    fill_counts(&mut v, ATTRS_START, &ATTR_VOCAB, &page.attr_counts);
    fill_counts(&mut v, PROPS_START, &PROPERTY_VOCAB, &page.property_counts);
    fill_counts(&mut v, SELECTORS_START, &SELECTOR_VOCAB, &page.selector_pattern_counts);
    RawFeatureVector::new(v)
}

/// Correlation filter followed by PCA, fitted on a training sample.
///
/// Surviving columns are standardized to unit variance before the
/// eigendecomposition so mixed-unit features (bytes, pixels, fractions)
/// contribute comparably to the components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReducer {
    /// Raw input dimensionality this reducer was fitted for.
    pub raw_dim: usize,
    /// Raw indices surviving the correlation filter, ascending.
    pub kept_indices: Vec<usize>,
    /// Mean of the surviving columns on the training set.
    pub pca_mean: Vec<f64>,
    /// Per-column standard deviation (1.0 for constant columns).
    pub col_scale: Vec<f64>,
    /// Principal components, one row per component, orthonormal.
    pub pca_basis: Vec<Vec<f64>>,
    pub out_dim: usize,
}

impl FeatureReducer {
    /// Projects a raw vector onto the retained principal components.
    pub fn project(&self, raw: &RawFeatureVector) -> Result<Vec<f64>> {
        if raw.len() != self.raw_dim {
            return Err(Error::Domain(format!(
                "raw vector has {} dims, reducer expects {}",
                raw.len(),
                self.raw_dim
            )));
        }
        let centered: Vec<f64> = self
            .kept_indices
            .iter()
            .zip(self.pca_mean.iter().zip(&self.col_scale))
            .map(|(&idx, (&m, &s))| (raw.values[idx] - m) / s)
            .collect();
        Ok(self
            .pca_basis
            .iter()
            .map(|row| row.iter().zip(&centered).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Maps a projected vector back to the surviving raw columns.
    pub fn reconstruct(&self, projected: &[f64]) -> Vec<f64> {
        let d = self.kept_indices.len();
        let mut out = vec![0.0; d];
        for (coef, row) in projected.iter().zip(&self.pca_basis) {
            for i in 0..d {
                out[i] += coef * row[i];
            }
        }
        for i in 0..d {
            out[i] = out[i] * self.col_scale[i] + self.pca_mean[i];
        }
        out
    }

    /// Max deviation of basis gram matrix from identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let k = self.pca_basis.len();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let dot: f64 = self.pca_basis[i]
                    .iter()
                    .zip(&self.pca_basis[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Per-dimension min/max recorded on the training projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    pub fn fit(projections: &[Vec<f64>]) -> Result<Self> {
        let first = projections
            .first()
            .ok_or_else(|| Error::Fit("cannot fit normalizer on empty set".into()))?;
        let dim = first.len();
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for p in projections {
            if p.len() != dim {
                return Err(Error::Fit("inconsistent projection lengths".into()));
            }
            for i in 0..dim {
                min[i] = min[i].min(p[i]);
                max[i] = max[i].max(p[i]);
            }
        }
        Ok(Normalizer { min, max })
    }

    /// Linear map min -> 0, max -> 1, clipped to [0, 1].
    /// Zero-width dimensions map to 0.
    pub fn apply(&self, projected: &[f64]) -> Result<Vec<f64>> {
        if projected.len() != self.min.len() {
            return Err(Error::Domain(format!(
                "projection has {} dims, normalizer expects {}",
                projected.len(),
                self.min.len()
            )));
        }
        Ok(projected
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let width = self.max[i] - self.min[i];
                if width <= 0.0 {
                    0.0
                } else {
                    ((v - self.min[i]) / width).clamp(0.0, 1.0)
                }
            })
            .collect())
    }
}

/// Full reduction: project, then normalize into [0, 1].
pub fn reduce_and_normalize(
    reducer: &FeatureReducer,
    normalizer: &Normalizer,
    raw: &RawFeatureVector,
) -> Result<FeatureVector> {
    let projected = reducer.project(raw)?;
    Ok(FeatureVector { values: normalizer.apply(&projected)? })
}

/// Drops one of every pair of columns whose |Pearson correlation| exceeds
/// the threshold (keeping the earlier index), then fits PCA on the rest.
pub fn fit_reducer(
    raws: &[RawFeatureVector],
    out_dim: usize,
    corr_threshold: f64,
) -> Result<FeatureReducer> {
    let n = raws.len();
    if out_dim < 1 {
        return Err(Error::Fit("out_dim must be >= 1".into()));
    }
    if n < out_dim {
        return Err(Error::Fit(format!(
            "need at least out_dim={out_dim} samples, got {n}"
        )));
    }
    let raw_dim = raws[0].len();
    if raws.iter().any(|r| r.len() != raw_dim) {
        return Err(Error::Fit("raw vectors have inconsistent lengths".into()));
    }
    if raws
        .iter()
        .any(|r| r.values.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::Fit("raw vectors contain non-finite values".into()));
    }

    let kept_indices = correlation_filter(raws, raw_dim, corr_threshold);
    let d = kept_indices.len();
    if out_dim > d {
        return Err(Error::Fit(format!(
            "out_dim {out_dim} exceeds the {d} dimensions surviving the correlation filter"
        )));
    }

    // Column means and standard deviations over survivors.
    let mut mean = vec![0.0; d];
    for r in raws {
        for (j, &idx) in kept_indices.iter().enumerate() {
            mean[j] += r.values[idx];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; d];
    for r in raws {
        for (j, &idx) in kept_indices.iter().enumerate() {
            let c = r.values[idx] - mean[j];
            var[j] += c * c;
        }
    }
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let col_scale: Vec<f64> = var
        .iter()
        .map(|&v| {
            let s = (v / denom).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();

    // Sample covariance of the standardized survivors.
    let mut cov = vec![vec![0.0; d]; d];
    for r in raws {
        let c: Vec<f64> = kept_indices
            .iter()
            .enumerate()
            .map(|(j, &idx)| (r.values[idx] - mean[j]) / col_scale[j])
            .collect();
        for i in 0..d {
            let ci = c[i];
            let row = &mut cov[i];
            for j in i..d {
                row[j] += ci * c[j] / denom;
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[i][j] = cov[j][i];
        }
    }

    let (eigenvalues, eigenvectors) = jacobi_eigen(&cov);
    // Order components by descending eigenvalue; ties resolve by original index.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eigenvalues[b]
            .partial_cmp(&eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut pca_basis = Vec::with_capacity(out_dim);
    for &col in order.iter().take(out_dim) {
        let mut row: Vec<f64> = (0..d).map(|r| eigenvectors[r][col]).collect();
        // Deterministic sign: largest-magnitude entry made positive.
        let lead = row
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| {
                a.abs()
                    .partial_cmp(&b.abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        if row[lead] < 0.0 {
            for v in &mut row {
                *v = -*v;
            }
        }
        pca_basis.push(row);
    }

    Ok(FeatureReducer { raw_dim, kept_indices, pca_mean: mean, col_scale, pca_basis, out_dim })
}

/// Fits the reducer and then the normalizer on the same training sample.
pub fn fit_pipeline(
    raws: &[RawFeatureVector],
    out_dim: usize,
    corr_threshold: f64,
) -> Result<(FeatureReducer, Normalizer)> {
    let reducer = fit_reducer(raws, out_dim, corr_threshold)?;
    let projections = raws
        .iter()
        .map(|r| reducer.project(r))
        .collect::<Result<Vec<_>>>()?;
    let normalizer = Normalizer::fit(&projections)?;
    Ok((reducer, normalizer))
}

fn correlation_filter(raws: &[RawFeatureVector], raw_dim: usize, threshold: f64) -> Vec<usize> {
    let n = raws.len() as f64;
    let mut mean = vec![0.0; raw_dim];
    let mut sq = vec![0.0; raw_dim];
    for r in raws {
        for (i, &v) in r.values.iter().enumerate() {
            mean[i] += v;
            sq[i] += v * v;
        }
    }
    for i in 0..raw_dim {
        mean[i] /= n;
    }
    let std: Vec<f64> = (0..raw_dim)
        .map(|i| (sq[i] / n - mean[i] * mean[i]).max(0.0).sqrt())
        .collect();

    let mut kept: Vec<usize> = Vec::new();
    for j in 0..raw_dim {
        // Constant columns have no defined correlation; they pass through.
        let mut correlated = false;
        if std[j] > 0.0 {
            for &k in &kept {
                if std[k] == 0.0 {
                    continue;
                }
                let mut cov = 0.0;
                for r in raws {
                    cov += (r.values[j] - mean[j]) * (r.values[k] - mean[k]);
                }
                cov /= n;
                let corr = cov / (std[j] * std[k]);
                if corr.abs() > threshold {
                    correlated = true;
                    break;
                }
            }
        }
        if !correlated {
            kept.push(j);
        }
    }
    kept
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Returns (eigenvalues, eigenvector matrix with eigenvectors as columns).
fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v = vec![vec![0.0; d]; d];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    if d <= 1 {
        return (a.iter().map(|r| r[0]).collect(), v);
    }

    let frobenius: f64 = matrix
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    let tol = 1e-14 * frobenius.max(1e-300);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p][q];
                if apq.abs() <= tol / (d as f64) {
                    continue;
                }
                let app = a[p][p];
                let aqq = a[q][q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..d {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let eigenvalues: Vec<f64> = (0..d).map(|i| a[i][i]).collect();
    (eigenvalues, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, SizeProfile};
    use rand::Rng;

    fn corpus_raws(seed: u64, n_pages: usize) -> Vec<RawFeatureVector> {
        let corpus = generate_corpus(seed, n_pages, &SizeProfile::default()).unwrap();
        corpus
            .pages
            .iter()
            .map(|p| extract_raw(p, &p.viewport_profiles[0]))
            .collect()
    }

    #[test]
    fn scalar_counts_land_on_reserved_positions() {
        let profile = SizeProfile { dom_nodes: (4, 4), ..Default::default() };
        let corpus = generate_corpus(5, 1, &profile).unwrap();
        let page = &corpus.pages[0];
        let raw = extract_raw(page, &page.viewport_profiles[0]);
        assert_eq!(raw.values[raw_layout::DOM_NODES], 4.0);
        assert_eq!(raw.len(), RAW_DIM);
    }

    #[test]
    fn extraction_is_deterministic() {
        let corpus = generate_corpus(8, 1, &SizeProfile::default()).unwrap();
        let page = &corpus.pages[0];
        let a = extract_raw(page, &page.viewport_profiles[0]);
        let b = extract_raw(page, &page.viewport_profiles[0]);
        assert_eq!(a, b);
    }

    #[test]
    fn missing_style_rules_leave_property_positions_zero() {
        let corpus = generate_corpus(8, 1, &SizeProfile::default()).unwrap();
        let mut page = corpus.pages[0].clone();
        page.property_counts.clear();
        let raw = extract_raw(&page, &page.viewport_profiles[0]);
        for i in PROPS_START..SELECTORS_START {
            assert_eq!(raw.values[i], 0.0);
        }
    }

    #[test]
    fn unseen_names_go_to_catch_all() {
        let corpus = generate_corpus(8, 1, &SizeProfile::default()).unwrap();
        let mut page = corpus.pages[0].clone();
        page.tag_counts.insert("made-up-element".to_string(), 17);
        let raw = extract_raw(&page, &page.viewport_profiles[0]);
        assert_eq!(raw.values[TAGS_START + TAG_VOCAB.len()], 17.0);
    }

    #[test]
    fn duplicate_columns_collapse_in_correlation_filter() {
        let mut rng = crate::rng::seeded(3);
        let raws: Vec<RawFeatureVector> = (0..50)
            .map(|_| {
                let a: f64 = rng.gen_range(0.0..10.0);
                let b: f64 = rng.gen_range(0.0..10.0);
                // columns 0 and 1 identical, column 2 independent
                RawFeatureVector::new(vec![a, a, b])
            })
            .collect();
        let reducer = fit_reducer(&raws, 1, 0.95).unwrap();
        assert_eq!(reducer.kept_indices, vec![0, 2]);
    }

    #[test]
    fn planar_data_reconstructs_exactly_with_two_components() {
        let mut rng = crate::rng::seeded(9);
        let d = 12;
        let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let raws: Vec<RawFeatureVector> = (0..80)
            .map(|_| {
                let s: f64 = rng.gen_range(-3.0..3.0);
                let t: f64 = rng.gen_range(-3.0..3.0);
                RawFeatureVector::new((0..d).map(|i| 1.5 + s * u[i] + t * w[i]).collect())
            })
            .collect();
        // exact plane: correlation filter must not interfere
        let reducer = fit_reducer(&raws, 2, 1.1).unwrap();
        for raw in &raws {
            let projected = reducer.project(raw).unwrap();
            let rebuilt = reducer.reconstruct(&projected);
            let err: f64 = reducer
                .kept_indices
                .iter()
                .zip(&rebuilt)
                .map(|(&idx, &r)| (raw.values[idx] - r).powi(2))
                .sum();
            assert!(err < 1e-8, "reconstruction error {err}");
        }
    }

    #[test]
    fn default_corpus_supports_127_components() {
        let raws = corpus_raws(13, 150);
        let reducer = fit_reducer(&raws, 127, 0.95).unwrap();
        assert_eq!(reducer.out_dim, 127);
        assert_eq!(reducer.pca_basis.len(), 127);
    }

    #[test]
    fn basis_is_orthonormal() {
        let raws = corpus_raws(17, 140);
        let reducer = fit_reducer(&raws, 32, 0.95).unwrap();
        assert!(reducer.orthonormality_defect() < 1e-6);
    }

    #[test]
    fn excessive_out_dim_is_a_fit_error_naming_both_numbers() {
        let raws: Vec<RawFeatureVector> = (0..10)
            .map(|i| RawFeatureVector::new(vec![i as f64, 2.0 * i as f64 + 1.0]))
            .collect();
        match fit_reducer(&raws, 2, 0.95) {
            Err(Error::Fit(msg)) => {
                assert!(msg.contains('2') && msg.contains('1'), "message: {msg}");
            }
            other => panic!("expected fit error, got {other:?}"),
        }
    }

    #[test]
    fn normalizer_endpoints_and_midpoint() {
        let projections = vec![vec![2.0], vec![6.0]];
        let norm = Normalizer::fit(&projections).unwrap();
        assert_eq!(norm.apply(&[2.0]).unwrap()[0], 0.0);
        assert_eq!(norm.apply(&[6.0]).unwrap()[0], 1.0);
        assert!((norm.apply(&[4.0]).unwrap()[0] - 0.5).abs() < 1e-12);
        // out-of-range values clip
        assert_eq!(norm.apply(&[12.0]).unwrap()[0], 1.0);
        assert_eq!(norm.apply(&[-5.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn zero_width_dimension_maps_to_zero() {
        let projections = vec![vec![3.0], vec![3.0]];
        let norm = Normalizer::fit(&projections).unwrap();
        assert_eq!(norm.apply(&[3.0]).unwrap()[0], 0.0);
        assert_eq!(norm.apply(&[999.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn outputs_stay_in_unit_interval_even_off_distribution() {
        let train = corpus_raws(23, 130);
        let (reducer, normalizer) = fit_pipeline(&train, 16, 0.95).unwrap();
        // deployment pages drawn far outside the training size range
        let wild_profile = SizeProfile { dom_nodes: (5000, 60_000), ..Default::default() };
        let wild = generate_corpus(99, 40, &wild_profile).unwrap();
        for page in &wild.pages {
            for slice in &page.viewport_profiles {
                let raw = extract_raw(page, slice);
                let fv = reduce_and_normalize(&reducer, &normalizer, &raw).unwrap();
                assert!(fv.values.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn reconstruction_error_non_increasing_in_out_dim() {
        let raws = corpus_raws(31, 140);
        let mut prev = f64::INFINITY;
        for out_dim in [2usize, 8, 32] {
            let reducer = fit_reducer(&raws, out_dim, 0.95).unwrap();
            let total: f64 = raws
                .iter()
                .map(|raw| {
                    let p = reducer.project(raw).unwrap();
                    let rebuilt = reducer.reconstruct(&p);
                    reducer
                        .kept_indices
                        .iter()
                        .zip(&rebuilt)
                        .map(|(&idx, &r)| (raw.values[idx] - r).powi(2))
                        .sum::<f64>()
                })
                .sum();
            assert!(
                total <= prev + 1e-6,
                "error grew from {prev} to {total} at out_dim {out_dim}"
            );
            prev = total;
        }
    }

    #[test]
    fn fitted_pipeline_roundtrips_bit_identically() {
        let raws = corpus_raws(37, 130);
        let (reducer, normalizer) = fit_pipeline(&raws, 24, 0.95).unwrap();
        let json_r = serde_json::to_string(&reducer).unwrap();
        let json_n = serde_json::to_string(&normalizer).unwrap();
        let reducer2: FeatureReducer = serde_json::from_str(&json_r).unwrap();
        let normalizer2: Normalizer = serde_json::from_str(&json_n).unwrap();
        assert_eq!(reducer, reducer2);
        assert_eq!(normalizer, normalizer2);
        for (a, b) in reducer
            .pca_basis
            .iter()
            .flatten()
            .zip(reducer2.pca_basis.iter().flatten())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in normalizer.min.iter().zip(&normalizer2.min) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn dimension_mismatch_is_a_domain_error() {
        let raws = corpus_raws(41, 130);
        let (reducer, normalizer) = fit_pipeline(&raws, 8, 0.95).unwrap();
        let bad = RawFeatureVector::new(vec![1.0; 3]);
        match reduce_and_normalize(&reducer, &normalizer, &bad) {
            Err(Error::Domain(_)) => {}
            other => panic!("expected domain error, got {other:?}"),
        }
    }
}
