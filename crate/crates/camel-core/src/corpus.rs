//! Page corpus: descriptors for web pages, viewport slices and gestures,
//! plus a seeded synthetic generator standing in for a crawled page set.
//!
//! A page is described purely by DOM/style statistics and a per-viewport
//! content profile; there is no markup, layout or rendering here.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Synthetic tag vocabulary. Counts for names outside the list go to a
/// catch-all feature position during extraction.
pub const TAG_VOCAB: [&str; 40] = [
    "div", "span", "a", "p", "li", "ul", "img", "script", "link", "meta", "input", "button",
    "form", "table", "tr", "td", "th", "thead", "tbody", "h1", "h2", "h3", "h4", "section",
    "article", "header", "footer", "nav", "aside", "figure", "figcaption", "video", "iframe",
    "svg", "path", "label", "select", "option", "style", "br",
];

pub const ATTR_VOCAB: [&str; 30] = [
    "class", "id", "href", "src", "style", "type", "rel", "name", "value", "alt", "title",
    "width", "height", "data-id", "data-src", "role", "aria-label", "aria-hidden", "target",
    "placeholder", "content", "charset", "lang", "tabindex", "method", "action", "loading",
    "srcset", "sizes", "media",
];

pub const PROPERTY_VOCAB: [&str; 30] = [
    "color", "background-color", "background", "font-size", "font-family", "font-weight",
    "margin", "margin-top", "margin-bottom", "padding", "padding-left", "display", "position",
    "top", "left", "right", "bottom", "width", "height", "max-width", "min-height", "border",
    "border-radius", "box-shadow", "overflow", "z-index", "flex", "line-height", "text-align",
    "opacity",
];

pub const SELECTOR_VOCAB: [&str; 20] = [
    "type", "class", "id", "descendant", "child", "adjacent-sibling", "general-sibling",
    "attribute", "pseudo-class", "pseudo-element", "universal", "type-class", "class-class",
    "id-descendant", "class-descendant", "nth-child", "hover", "first-child", "not",
    "attribute-prefix",
];

/// One horizontal slice of a page, the unit the user actually sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewportSlice {
    pub start_px: u32,
    pub end_px: u32,
    pub gpu_mem_footprint: u64,
    /// Fraction of the slice area covered by image/video content.
    pub image_fraction: f64,
    /// Fraction covered by body text; image_fraction + text_density <= 1.
    pub text_density: f64,
}

impl ViewportSlice {
    pub fn height_px(&self) -> u32 {
        self.end_px - self.start_px
    }

    pub fn validate(&self) -> Result<()> {
        if self.end_px <= self.start_px {
            return Err(Error::Domain(format!(
                "viewport slice end {} <= start {}",
                self.end_px, self.start_px
            )));
        }
        if !(0.0..=1.0).contains(&self.image_fraction) || !(0.0..=1.0).contains(&self.text_density)
        {
            return Err(Error::Domain("content fractions outside [0,1]".into()));
        }
        if self.image_fraction + self.text_density > 1.0 + 1e-12 {
            return Err(Error::Domain(format!(
                "image_fraction {} + text_density {} > 1",
                self.image_fraction, self.text_density
            )));
        }
        Ok(())
    }
}

/// Statistics extracted from a page's DOM tree and style sheets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageDescriptor {
    pub id: String,
    pub dom_node_count: u64,
    pub tree_depth: u64,
    pub tag_counts: BTreeMap<String, u64>,
    pub attr_counts: BTreeMap<String, u64>,
    pub style_rule_count: u64,
    pub property_counts: BTreeMap<String, u64>,
    pub selector_pattern_counts: BTreeMap<String, u64>,
    pub page_height_px: u32,
    /// Contiguous top-to-bottom cover of the page.
    pub viewport_profiles: Vec<ViewportSlice>,
}

impl PageDescriptor {
    pub fn validate(&self) -> Result<()> {
        if self.dom_node_count < 1 {
            return Err(Error::Domain(format!("page {}: dom_node_count < 1", self.id)));
        }
        if self.tree_depth < 1 {
            return Err(Error::Domain(format!("page {}: tree_depth < 1", self.id)));
        }
        if self.page_height_px == 0 {
            return Err(Error::Domain(format!("page {}: zero height", self.id)));
        }
        if self.viewport_profiles.is_empty() {
            return Err(Error::Domain(format!("page {}: no viewport profiles", self.id)));
        }
        let mut expected_start = 0u32;
        for slice in &self.viewport_profiles {
            slice.validate()?;
            if slice.start_px != expected_start {
                return Err(Error::Domain(format!(
                    "page {}: slice starts at {} but previous ended at {}",
                    self.id, slice.start_px, expected_start
                )));
            }
            expected_start = slice.end_px;
        }
        if expected_start != self.page_height_px {
            return Err(Error::Domain(format!(
                "page {}: slices cover up to {} of {} px",
                self.id, expected_start, self.page_height_px
            )));
        }
        Ok(())
    }

    /// The slice containing the given vertical offset.
    pub fn slice_at(&self, offset_px: u32) -> Result<&ViewportSlice> {
        if offset_px >= self.page_height_px {
            return Err(Error::Domain(format!(
                "offset {} out of page bounds 0..{}",
                offset_px, self.page_height_px
            )));
        }
        let idx = self
            .viewport_profiles
            .partition_point(|s| s.end_px <= offset_px);
        Ok(&self.viewport_profiles[idx])
    }

    /// Index of the slice containing the offset, for cache keys.
    pub fn slice_index_at(&self, offset_px: u32) -> Result<usize> {
        if offset_px >= self.page_height_px {
            return Err(Error::Domain(format!(
                "offset {} out of page bounds 0..{}",
                offset_px, self.page_height_px
            )));
        }
        Ok(self
            .viewport_profiles
            .partition_point(|s| s.end_px <= offset_px))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GestureKind {
    Scroll,
    Fling,
    Pinch,
}

impl GestureKind {
    pub const ALL: [GestureKind; 3] = [GestureKind::Scroll, GestureKind::Fling, GestureKind::Pinch];

    pub fn name(self) -> &'static str {
        match self {
            GestureKind::Scroll => "scroll",
            GestureKind::Fling => "fling",
            GestureKind::Pinch => "pinch",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "scroll" => Ok(GestureKind::Scroll),
            "fling" => Ok(GestureKind::Fling),
            "pinch" => Ok(GestureKind::Pinch),
            other => Err(Error::Config(format!("unknown gesture {other:?}"))),
        }
    }
}

/// A user interaction: kind, speed in px/s (zoom px/s for pinch) and duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gesture {
    pub kind: GestureKind,
    pub speed_px_s: f64,
    pub duration_s: f64,
}

impl Gesture {
    pub fn new(kind: GestureKind, speed_px_s: f64, duration_s: f64) -> Result<Self> {
        if !(speed_px_s > 0.0) || !speed_px_s.is_finite() {
            return Err(Error::Domain(format!("gesture speed must be positive, got {speed_px_s}")));
        }
        if !(duration_s > 0.0) || !duration_s.is_finite() {
            return Err(Error::Domain(format!(
                "gesture duration must be positive, got {duration_s}"
            )));
        }
        Ok(Gesture { kind, speed_px_s, duration_s })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub seed: u64,
    pub pages: Vec<PageDescriptor>,
}

impl Corpus {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for page in &self.pages {
            page.validate()?;
            if !seen.insert(page.id.as_str()) {
                return Err(Error::Domain(format!("duplicate page id {}", page.id)));
            }
        }
        Ok(())
    }

    pub fn page(&self, id: &str) -> Option<&PageDescriptor> {
        self.pages.iter().find(|p| p.id == id)
    }
}

/// Ranges controlling synthetic page generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizeProfile {
    /// Inclusive range of DOM node counts.
    pub dom_nodes: (u64, u64),
    /// Fixed slice height; the device screen height stands in for the
    /// viewport granularity the source material never pins down.
    pub viewport_height_px: u32,
    /// Shift applied to every page's image-heaviness, in [-1, 1].
    /// Nonzero values produce a drifted corpus for ageing-model scenarios.
    pub image_theme_shift: f64,
}

impl Default for SizeProfile {
    fn default() -> Self {
        SizeProfile {
            dom_nodes: (4, 7000),
            viewport_height_px: 2000,
            image_theme_shift: 0.0,
        }
    }
}

impl SizeProfile {
    pub fn validate(&self) -> Result<()> {
        if self.dom_nodes.0 < 1 || self.dom_nodes.1 < self.dom_nodes.0 {
            return Err(Error::Config(format!(
                "invalid dom node range {:?}",
                self.dom_nodes
            )));
        }
        if self.viewport_height_px == 0 {
            return Err(Error::Config("viewport height must be positive".into()));
        }
        if !self.image_theme_shift.is_finite() || self.image_theme_shift.abs() > 1.0 {
            return Err(Error::Config(format!(
                "image theme shift {} outside [-1, 1]",
                self.image_theme_shift
            )));
        }
        Ok(())
    }
}

/// Generates a deterministic synthetic corpus. Pure function of its arguments.
pub fn generate_corpus(seed: u64, n_pages: usize, profile: &SizeProfile) -> Result<Corpus> {
    profile.validate()?;
    if n_pages < 1 {
        return Err(Error::Config("n_pages must be >= 1".into()));
    }
    let pages = (0..n_pages)
        .map(|i| generate_page(seed, i, profile))
        .collect::<Vec<_>>();
    let corpus = Corpus { seed, pages };
    corpus.validate()?;
    Ok(corpus)
}

fn generate_page(seed: u64, index: usize, profile: &SizeProfile) -> PageDescriptor {
    let mut rng = rng::seeded(rng::child_seed(seed, &format!("page-{index}")));
    let (dom_min, dom_max) = profile.dom_nodes;

    // Log-uniform node count so small and large pages both appear.
    let dom_node_count = if dom_min == dom_max {
        dom_min
    } else {
        let lo = (dom_min as f64).ln();
        let hi = (dom_max as f64).ln();
        let v = (lo + rng.gen::<f64>() * (hi - lo)).exp().round() as u64;
        v.clamp(dom_min, dom_max)
    };

    let depth_scale: f64 = rng.gen_range(0.8..1.6);
    let tree_depth = (((dom_node_count as f64).log2().max(0.0) * depth_scale).round() as u64).max(1);

    let image_theme = {
        let base: f64 = rng.gen_range(0.05..0.90);
        (base + profile.image_theme_shift).clamp(0.0, 0.95)
    };

    let tag_counts = heavy_tailed_counts(&mut rng, &TAG_VOCAB, dom_node_count);
    let attrs_total = ((dom_node_count as f64) * rng.gen_range(0.6..2.2)).round().max(1.0) as u64;
    let attr_counts = heavy_tailed_counts(&mut rng, &ATTR_VOCAB, attrs_total);

    let style_rule_count =
        (8.0 + (dom_node_count as f64) * rng.gen_range(0.05..0.30)).round() as u64;
    let selector_pattern_counts =
        heavy_tailed_counts(&mut rng, &SELECTOR_VOCAB, style_rule_count.max(1));
    let props_total = ((style_rule_count as f64) * rng.gen_range(1.5..4.0)).round().max(1.0) as u64;
    let property_counts = heavy_tailed_counts(&mut rng, &PROPERTY_VOCAB, props_total);

    let page_height_px =
        (600.0 + (dom_node_count as f64) * rng.gen_range(1.5..6.0)).round() as u32;

    let viewport_profiles = build_slices(
        &mut rng,
        page_height_px,
        profile.viewport_height_px,
        image_theme,
    );

    PageDescriptor {
        id: format!("p{seed:08x}-{index:05}"),
        dom_node_count,
        tree_depth,
        tag_counts,
        attr_counts,
        style_rule_count,
        property_counts,
        selector_pattern_counts,
        page_height_px,
        viewport_profiles,
    }
}

fn build_slices(
    rng: &mut impl Rng,
    page_height_px: u32,
    slice_height: u32,
    image_theme: f64,
) -> Vec<ViewportSlice> {
    let mut slices = Vec::new();
    let mut start = 0u32;
    while start < page_height_px {
        let end = (start + slice_height).min(page_height_px);
        let jitter: f64 = rng.gen_range(-0.12..0.12);
        let image_fraction = (image_theme + jitter).clamp(0.0, 0.95);
        let text_density =
            ((1.0 - image_fraction) * rng.gen_range(0.40..0.95)).clamp(0.0, 1.0 - image_fraction);
        // Screen-width buffer at 4 bytes/px, inflated by image share (textures).
        let area_px = f64::from(end - start) * 1080.0;
        let gpu_mem_footprint = (area_px * 4.0 * (0.5 + 1.5 * image_fraction)).round() as u64;
        slices.push(ViewportSlice {
            start_px: start,
            end_px: end,
            gpu_mem_footprint,
            image_fraction,
            text_density,
        });
        start = end;
    }
    slices
}

/// Splits `total` across the vocabulary with Zipf-like weights and
/// log-normal jitter, yielding the sparse heavy-tailed counts real pages show.
fn heavy_tailed_counts(
    rng: &mut impl Rng,
    vocab: &[&str],
    total: u64,
) -> BTreeMap<String, u64> {
    let mut weights = Vec::with_capacity(vocab.len());
    for rank in 0..vocab.len() {
        let zipf = 1.0 / ((rank + 1) as f64).powf(1.1);
        let jitter: f64 = rng.gen_range(-1.0..1.0);
        weights.push(zipf * jitter.exp());
    }
    let sum: f64 = weights.iter().sum();
    let mut counts = BTreeMap::new();
    let mut assigned = 0u64;
    for (name, w) in vocab.iter().zip(&weights) {
        let c = ((total as f64) * w / sum).round() as u64;
        if c > 0 {
            counts.insert((*name).to_string(), c);
            assigned += c;
        }
    }
    if assigned == 0 {
        counts.insert(vocab[0].to_string(), total.max(1));
    }
    counts
}

/// The slice the interaction will reach within the sampling window.
///
/// Displacement is speed times window, clamped to the last pixel of the
/// page; pinch gestures stay on the current slice.
pub fn future_viewport<'a>(
    page: &'a PageDescriptor,
    current_offset_px: u32,
    gesture: &Gesture,
    window_s: f64,
) -> Result<&'a ViewportSlice> {
    if current_offset_px >= page.page_height_px {
        return Err(Error::Domain(format!(
            "offset {} out of page bounds 0..{}",
            current_offset_px, page.page_height_px
        )));
    }
    if !(window_s > 0.0) {
        return Err(Error::Domain(format!("window must be positive, got {window_s}")));
    }
    let target = match gesture.kind {
        GestureKind::Pinch => current_offset_px,
        GestureKind::Scroll | GestureKind::Fling => {
            let disp = gesture.speed_px_s * window_s;
            let raw = f64::from(current_offset_px) + disp;
            let last = f64::from(page.page_height_px - 1);
            raw.min(last).floor() as u32
        }
    };
    page.slice_at(target)
}

// ---------------------------------------------------------------------------
// Corpus file format: one JSON header line, then one JSON page per line.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct CorpusHeader {
    format: String,
    version: u32,
    seed: u64,
    pages: usize,
}

pub const CORPUS_FORMAT: &str = "camel-corpus";
pub const CORPUS_VERSION: u32 = 1;

pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    let header = CorpusHeader {
        format: CORPUS_FORMAT.to_string(),
        version: CORPUS_VERSION,
        seed: corpus.seed,
        pages: corpus.pages.len(),
    };
    writeln!(
        out,
        "{}",
        serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?
    )?;
    for page in &corpus.pages {
        writeln!(
            out,
            "{}",
            serde_json::to_string(page).map_err(|e| Error::Format(e.to_string()))?
        )?;
    }
    Ok(())
}

pub fn read_corpus<R: BufRead>(input: R) -> Result<Corpus> {
    let mut lines = input.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Format("empty corpus file".into()))??;
    let header: CorpusHeader =
        serde_json::from_str(&header_line).map_err(|e| Error::Format(format!("bad header: {e}")))?;
    if header.format != CORPUS_FORMAT {
        return Err(Error::Format(format!("not a corpus file: {}", header.format)));
    }
    if header.version != CORPUS_VERSION {
        return Err(Error::Format(format!("unsupported corpus version {}", header.version)));
    }
    let mut pages = Vec::with_capacity(header.pages);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let page: PageDescriptor =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("bad page record: {e}")))?;
        pages.push(page);
    }
    let corpus = Corpus { seed: header.seed, pages };
    corpus.validate()?;
    Ok(corpus)
}

pub fn save_corpus(corpus: &Corpus, path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_corpus(corpus, std::io::BufWriter::new(file))
}

pub fn load_corpus(path: &std::path::Path) -> Result<Corpus> {
    let file = std::fs::File::open(path)?;
    read_corpus(std::io::BufReader::new(file))
}

// ---------------------------------------------------------------------------
// Fixture pages with pinned content mix, used for oracle calibration checks.
// ---------------------------------------------------------------------------

/// A large image-dominated page (news front page shape).
pub fn fixture_image_heavy() -> PageDescriptor {
    fixture_page("fixture-image-heavy", 2600, 0.70, 0.20)
}

/// A long text-dominated page (reference article shape).
pub fn fixture_text_heavy() -> PageDescriptor {
    fixture_page("fixture-text-heavy", 3400, 0.10, 0.61)
}

fn fixture_page(id: &str, dom: u64, image_fraction: f64, text_density: f64) -> PageDescriptor {
    // Generated through the ordinary machinery so count statistics look
    // like the rest of the corpus; only the content mix is pinned.
    let profile = SizeProfile { dom_nodes: (dom, dom), ..Default::default() };
    let mut page = generate_corpus(0xF1C5, 1, &profile)
        .expect("fixture profile is valid")
        .pages
        .remove(0);
    page.id = id.to_string();
    for slice in &mut page.viewport_profiles {
        slice.image_fraction = image_fraction;
        slice.text_density = text_density;
        let area_px = f64::from(slice.end_px - slice.start_px) * 1080.0;
        slice.gpu_mem_footprint = (area_px * 4.0 * (0.5 + 1.5 * image_fraction)).round() as u64;
    }
    page
}
