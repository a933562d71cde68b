//! Maps on-disk HTML documents onto page descriptors using the same count
//! semantics as the synthetic generator. A tolerant tag scanner, not a
//! conforming parser: enough structure for counting, never for rendering.

use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::{Corpus, PageDescriptor, ViewportSlice};
use crate::error::{Error, Result};

const VOID_ELEMENTS: [&str; 14] = [
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param",
    "source", "track", "wbr",
];

/// Screen width assumed when estimating image coverage, px.
const SCREEN_WIDTH_PX: f64 = 1080.0;

/// Image share assumed when img/video tags carry no usable dimensions.
const DEFAULT_IMAGE_FRACTION: f64 = 0.3;

#[derive(Default)]
struct ScanState {
    tag_counts: BTreeMap<String, u64>,
    attr_counts: BTreeMap<String, u64>,
    dom_nodes: u64,
    max_depth: u64,
    text_chars: u64,
    image_area_px: f64,
    sized_images: u64,
    image_tags: u64,
    style_text: String,
}

/// Builds a descriptor from one HTML document.
pub fn page_from_html(id: &str, html: &str, viewport_height_px: u32) -> Result<PageDescriptor> {
    if viewport_height_px == 0 {
        return Err(Error::Config("viewport height must be positive".into()));
    }
    let mut state = ScanState::default();
    scan(html, &mut state);
    if state.dom_nodes == 0 {
        return Err(Error::Format(format!("{id}: no elements found")));
    }

    let (style_rule_count, property_counts, selector_pattern_counts) =
        scan_styles(&state.style_text);

    // Geometry estimates: text at ~28 px per 90-char line, images by their
    // declared area, one viewport of chrome.
    let text_height = (state.text_chars as f64 / 90.0) * 28.0;
    let image_height = state.image_area_px / SCREEN_WIDTH_PX;
    let default_image_height = (state.image_tags - state.sized_images) as f64
        * f64::from(viewport_height_px)
        * DEFAULT_IMAGE_FRACTION
        / 4.0;
    let page_height_px =
        (600.0 + text_height + image_height + default_image_height).round().max(600.0) as u32;

    let total_area = f64::from(page_height_px) * SCREEN_WIDTH_PX;
    let image_fraction = if state.image_tags == 0 {
        0.0
    } else if state.sized_images == 0 {
        DEFAULT_IMAGE_FRACTION
    } else {
        (state.image_area_px / total_area).clamp(0.0, 0.95)
    };
    let text_density =
        ((text_height * SCREEN_WIDTH_PX / total_area) * 0.9).clamp(0.0, 1.0 - image_fraction);

    let mut slices = Vec::new();
    let mut start = 0u32;
    while start < page_height_px {
        let end = (start + viewport_height_px).min(page_height_px);
        let area_px = f64::from(end - start) * SCREEN_WIDTH_PX;
        slices.push(ViewportSlice {
            start_px: start,
            end_px: end,
            gpu_mem_footprint: (area_px * 4.0 * (0.5 + 1.5 * image_fraction)).round() as u64,
            image_fraction,
            text_density,
        });
        start = end;
    }

    let page = PageDescriptor {
        id: id.to_string(),
        dom_node_count: state.dom_nodes,
        tree_depth: state.max_depth.max(1),
        tag_counts: state.tag_counts,
        attr_counts: state.attr_counts,
        style_rule_count,
        property_counts,
        selector_pattern_counts,
        page_height_px,
        viewport_profiles: slices,
    };
    page.validate()?;
    Ok(page)
}

/// Ingests every `.html`/`.htm` file under a directory, sorted by name.
pub fn ingest_dir(dir: &Path, viewport_height_px: u32) -> Result<Corpus> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| e.eq_ignore_ascii_case("html") || e.eq_ignore_ascii_case("htm"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!("no .html files under {}", dir.display())));
    }
    let mut pages = Vec::with_capacity(files.len());
    for path in files {
        let html = std::fs::read_to_string(&path)?;
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("page")
            .to_string();
        pages.push(page_from_html(&id, &html, viewport_height_px)?);
    }
    let corpus = Corpus { seed: 0, pages };
    corpus.validate()?;
    Ok(corpus)
}

fn scan(html: &str, state: &mut ScanState) {
    let bytes = html.as_bytes();
    let mut i = 0usize;
    let mut depth = 0u64;
    let mut raw_until: Option<&str> = None; // inside <script>/<style>
    let mut style_depth = 0u32;

    while i < bytes.len() {
        if bytes[i] != b'<' {
            let start = i;
            while i < bytes.len() && bytes[i] != b'<' {
                i += 1;
            }
            let text = &html[start..i];
            if let Some(closer) = raw_until {
                if closer == "style" && style_depth > 0 {
                    state.style_text.push_str(text);
                }
            } else {
                state.text_chars += text
                    .chars()
                    .filter(|c| !c.is_whitespace())
                    .count() as u64;
            }
            continue;
        }

        // comments and doctype
        if html[i..].starts_with("<!--") {
            i = html[i..].find("-->").map(|p| i + p + 3).unwrap_or(bytes.len());
            continue;
        }
        if html[i..].starts_with("<!") {
            i = html[i..].find('>').map(|p| i + p + 1).unwrap_or(bytes.len());
            continue;
        }

        let Some(rel_end) = html[i..].find('>') else { break };
        let tag_body = &html[i + 1..i + rel_end];
        i += rel_end + 1;
        if tag_body.is_empty() {
            continue;
        }

        if let Some(name) = tag_body.strip_prefix('/') {
            let name = name.trim().to_ascii_lowercase();
            if let Some(closer) = raw_until {
                if name == closer {
                    raw_until = None;
                    if name == "style" {
                        style_depth = style_depth.saturating_sub(1);
                    }
                }
                continue;
            }
            depth = depth.saturating_sub(1);
            continue;
        }
        if raw_until.is_some() {
            continue;
        }

        let self_closing = tag_body.ends_with('/');
        let body = tag_body.trim_end_matches('/');
        let mut parts = body.split_whitespace();
        let Some(raw_name) = parts.next() else { continue };
        let name = raw_name.to_ascii_lowercase();
        if name.starts_with('?') {
            continue;
        }

        state.dom_nodes += 1;
        *state.tag_counts.entry(name.clone()).or_insert(0) += 1;

        let attrs = parse_attrs(&body[raw_name.len()..]);
        let mut width = None;
        let mut height = None;
        for (attr, value) in &attrs {
            *state.attr_counts.entry(attr.clone()).or_insert(0) += 1;
            if attr == "width" {
                width = value.as_deref().and_then(parse_px);
            }
            if attr == "height" {
                height = value.as_deref().and_then(parse_px);
            }
        }

        if name == "img" || name == "video" {
            state.image_tags += 1;
            if let (Some(w), Some(h)) = (width, height) {
                state.image_area_px += w * h;
                state.sized_images += 1;
            }
        }

        let is_void = VOID_ELEMENTS.contains(&name.as_str());
        if name == "script" || name == "style" {
            raw_until = Some(if name == "script" { "script" } else { "style" });
            if name == "style" {
                style_depth += 1;
            }
            continue;
        }
        if !is_void && !self_closing {
            depth += 1;
            state.max_depth = state.max_depth.max(depth);
        }
    }
}

fn parse_attrs(s: &str) -> Vec<(String, Option<String>)> {
    let mut out = Vec::new();
    let bytes = s.as_bytes();
    let mut i = 0usize;
    while i < bytes.len() {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace()) {
            i += 1;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'=' {
            i += 1;
        }
        if i == start {
            break;
        }
        let name = s[start..i].to_ascii_lowercase();
        let mut value = None;
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'=' {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'"' || bytes[i] == b'\'') {
                let quote = bytes[i];
                i += 1;
                let vstart = i;
                while i < bytes.len() && bytes[i] != quote {
                    i += 1;
                }
                value = Some(s[vstart..i].to_string());
                i = (i + 1).min(bytes.len());
            } else {
                let vstart = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                value = Some(s[vstart..i].to_string());
            }
        }
        if !name.is_empty() {
            out.push((name, value));
        }
    }
    out
}

fn parse_px(v: &str) -> Option<f64> {
    let v = v.trim().trim_end_matches("px");
    v.parse::<f64>().ok().filter(|x| *x > 0.0)
}

/// Counts rules, property names and selector shapes in inline stylesheets.
fn scan_styles(css: &str) -> (u64, BTreeMap<String, u64>, BTreeMap<String, u64>) {
    let mut rules = 0u64;
    let mut properties: BTreeMap<String, u64> = BTreeMap::new();
    let mut selectors: BTreeMap<String, u64> = BTreeMap::new();

    for block in css.split('}') {
        let Some((selector_part, body)) = block.split_once('{') else { continue };
        let selector_part = selector_part.trim();
        if selector_part.is_empty() || selector_part.starts_with('@') {
            continue;
        }
        rules += 1;
        for selector in selector_part.split(',') {
            let pattern = classify_selector(selector.trim());
            if !pattern.is_empty() {
                *selectors.entry(pattern.to_string()).or_insert(0) += 1;
            }
        }
        for decl in body.split(';') {
            if let Some((prop, _)) = decl.split_once(':') {
                let prop = prop.trim().to_ascii_lowercase();
                if !prop.is_empty() {
                    *properties.entry(prop).or_insert(0) += 1;
                }
            }
        }
    }
    (rules, properties, selectors)
}

fn classify_selector(s: &str) -> &'static str {
    if s.is_empty() {
        return "";
    }
    if s.contains(">") {
        return "child";
    }
    if s.contains('+') {
        return "adjacent-sibling";
    }
    if s.contains('~') {
        return "general-sibling";
    }
    if s.contains(' ') {
        return "descendant";
    }
    if s.contains("::") {
        return "pseudo-element";
    }
    if s.contains(":hover") {
        return "hover";
    }
    if s.contains(':') {
        return "pseudo-class";
    }
    if s.contains('[') {
        return "attribute";
    }
    if s.starts_with('#') {
        return "id";
    }
    if s.starts_with('.') {
        return "class";
    }
    if s.contains('.') {
        return "type-class";
    }
    if s == "*" {
        return "universal";
    }
    "type"
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"<!DOCTYPE html>
<html>
<head>
  <meta charset="utf-8">
  <style>
    .headline { color: red; font-size: 14px; }
    p { margin: 4px; }
    div p { padding: 2px; }
  </style>
  <script>var x = "<div>not real</div>";</script>
</head>
<body>
  <div class="headline" id="top">
    <p>Hello world, this is a paragraph of body text for the scanner.</p>
    <img src="a.png" width="540" height="400">
    <img src="b.png">
  </div>
</body>
</html>"#;

    #[test]
    fn counts_match_hand_tally() {
        let page = page_from_html("sample", SAMPLE, 2000).unwrap();
        // html, head, meta, style, script, body, div, p, img, img
        assert_eq!(page.dom_node_count, 10);
        assert_eq!(page.tag_counts["img"], 2);
        assert_eq!(page.tag_counts["div"], 1);
        assert_eq!(page.attr_counts["class"], 1);
        assert_eq!(page.attr_counts["src"], 2);
        assert_eq!(page.style_rule_count, 3);
        assert_eq!(page.property_counts["color"], 1);
        assert_eq!(page.property_counts["margin"], 1);
        assert_eq!(page.selector_pattern_counts["class"], 1);
        assert_eq!(page.selector_pattern_counts["type"], 1);
        assert_eq!(page.selector_pattern_counts["descendant"], 1);
        // script content is not text and spawns no elements
        assert!(page.tag_counts.get("var").is_none());
        page.validate().unwrap();
    }

    #[test]
    fn unsized_images_fall_back_to_default_share() {
        let html = "<html><body><img src=x><p>text</p></body></html>";
        let page = page_from_html("p", html, 2000).unwrap();
        assert!((page.viewport_profiles[0].image_fraction - 0.3).abs() < 1e-9);
    }

    #[test]
    fn pages_without_images_have_zero_image_fraction() {
        let html = "<html><body><p>just text</p></body></html>";
        let page = page_from_html("p", html, 2000).unwrap();
        assert_eq!(page.viewport_profiles[0].image_fraction, 0.0);
    }

    #[test]
    fn ingest_dir_is_deterministic_and_sorted() {
        let dir = std::env::temp_dir().join(format!("camel-ingest-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("b.html"), "<html><body><p>bee</p></body></html>").unwrap();
        std::fs::write(dir.join("a.html"), SAMPLE).unwrap();
        let c1 = ingest_dir(&dir, 2000).unwrap();
        let c2 = ingest_dir(&dir, 2000).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(c1.pages[0].id, "a");
        assert_eq!(c1.pages[1].id, "b");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
