//! Deterministic word-cloud geometry and SVG output.
//!
//! Entries are sized by an affine map of their weights onto a point range,
//! measured with a synthetic metric (no font files involved), and placed
//! greedily, largest first, along an outward Archimedean spiral from the
//! canvas center. Text is horizontal only.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::AssignmentTable;
use crate::salience::{classify_delta, DiffClass, DiffResult, ScaledWeights};

pub const DEFAULT_MIN_PT: f64 = 12.0;
pub const DEFAULT_MAX_PT: f64 = 48.0;
pub const CHAR_WIDTH_EM: f64 = 0.6;
pub const LINE_HEIGHT_EM: f64 = 1.2;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("font range must satisfy 0 < min_pt < max_pt, got [{0}, {1}]")]
    InvalidFontRange(f64, f64),
    #[error("canvas must have positive width and height, got {0}x{1}")]
    InvalidCanvas(f64, f64),
    #[error("padding must be >= 0, got {0}")]
    InvalidPadding(f64),
    #[error("spiral steps must be positive")]
    InvalidSpiral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorClass {
    #[default]
    Neutral,
    ADominant,
    BDominant,
    WithinMargin,
}

impl ColorClass {
    fn css(self) -> &'static str {
        match self {
            ColorClass::Neutral => "neutral",
            ColorClass::ADominant => "a-dominant",
            ColorClass::BDominant => "b-dominant",
            ColorClass::WithinMargin => "within-margin",
        }
    }
}

impl From<DiffClass> for ColorClass {
    fn from(c: DiffClass) -> Self {
        match c {
            DiffClass::ADominant => ColorClass::ADominant,
            DiffClass::BDominant => ColorClass::BDominant,
            DiffClass::WithinMargin => ColorClass::WithinMargin,
        }
    }
}

/// A term to size: key, label, and weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedItem {
    pub key: String,
    pub display_text: String,
    pub weight: f64,
    /// Value emitted as `data-breadth` (breadth, Δb, or token count).
    pub breadth: Option<i64>,
    pub participants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudEntry {
    pub concept_key: String,
    pub display_text: String,
    pub weight: f64,
    pub font_size: f64,
    pub color_class: ColorClass,
    pub breadth: Option<i64>,
    pub participants: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FontRange {
    pub min_pt: f64,
    pub max_pt: f64,
}

impl Default for FontRange {
    fn default() -> Self {
        Self {
            min_pt: DEFAULT_MIN_PT,
            max_pt: DEFAULT_MAX_PT,
        }
    }
}

impl FontRange {
    pub fn validate(self) -> Result<Self, LayoutError> {
        if self.min_pt > 0.0 && self.min_pt < self.max_pt && self.max_pt.is_finite() {
            Ok(self)
        } else {
            Err(LayoutError::InvalidFontRange(self.min_pt, self.max_pt))
        }
    }

    pub fn mid(self) -> f64 {
        (self.min_pt + self.max_pt) / 2.0
    }
}

/// Placement order: descending weight, ties by key.
fn by_weight_then_key(
    a: &(impl AsRef<str>, f64),
    b: &(impl AsRef<str>, f64),
) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1)
        .then_with(|| a.0.as_ref().cmp(b.0.as_ref()))
}

/// Pairs each weighted concept of a table with its display text, breadth and
/// the participants who mentioned it.
pub fn weighted_items(
    weights: &ScaledWeights,
    table: Option<&AssignmentTable>,
    breadth: impl Fn(&str) -> u32,
) -> Vec<WeightedItem> {
    weights
        .weights
        .iter()
        .map(|(key, &weight)| {
            let display_text = table
                .and_then(|t| t.column(key).map(|i| t.concept_texts()[i].clone()))
                .unwrap_or_else(|| key.clone());
            WeightedItem {
                key: key.clone(),
                display_text,
                weight,
                breadth: Some(i64::from(breadth(key))),
                participants: table
                    .map(|t| {
                        t.participants_with(key)
                            .into_iter()
                            .map(str::to_string)
                            .collect()
                    })
                    .unwrap_or_default(),
            }
        })
        .collect()
}

/// Maps weights affinely onto `[min_pt, max_pt]`. Zero weights are dropped,
/// `top_k` keeps the largest, and a degenerate range maps everything to the
/// midpoint. Output is in placement order.
pub fn font_sizes(
    items: &[WeightedItem],
    range: FontRange,
    top_k: Option<usize>,
) -> Result<Vec<CloudEntry>, LayoutError> {
    let range = range.validate()?;
    let mut kept: Vec<&WeightedItem> = items.iter().filter(|i| i.weight > 0.0).collect();
    kept.sort_by(|a, b| by_weight_then_key(&(&a.key, a.weight), &(&b.key, b.weight)));
    if let Some(k) = top_k {
        kept.truncate(k);
    }
    let Some(w_max) = kept.first().map(|i| i.weight) else {
        return Ok(Vec::new());
    };
    let w_min = kept.last().map_or(w_max, |i| i.weight);
    let span = w_max - w_min;
    Ok(kept
        .into_iter()
        .map(|item| {
            let font_size = if span > 0.0 {
                range.min_pt + (item.weight - w_min) / span * (range.max_pt - range.min_pt)
            } else {
                range.mid()
            };
            CloudEntry {
                concept_key: item.key.clone(),
                display_text: item.display_text.clone(),
                weight: item.weight,
                font_size: font_size.clamp(range.min_pt, range.max_pt),
                color_class: ColorClass::Neutral,
                breadth: item.breadth,
                participants: item.participants.clone(),
            }
        })
        .collect())
}

/// Synthetic text metrics: 0.6 em per character, 1.2 em line height.
pub fn measure(display_text: &str, font_size: f64) -> (f64, f64) {
    let chars = display_text.chars().count() as f64;
    (
        chars * font_size * CHAR_WIDTH_EM,
        font_size * LINE_HEIGHT_EM,
    )
}

/// Diff-cloud entries: sized by |Δb|, colored by sign outside the margin.
/// Concepts with Δb = 0 are kept at the minimum size.
pub fn diff_entries(
    diff: &DiffResult,
    display_text: impl Fn(&str) -> String,
    range: FontRange,
    top_k: Option<usize>,
) -> Result<Vec<CloudEntry>, LayoutError> {
    let items: Vec<WeightedItem> = diff
        .deltas
        .iter()
        .map(|(key, &delta)| WeightedItem {
            key: key.clone(),
            display_text: display_text(key),
            weight: delta.unsigned_abs() as f64,
            breadth: Some(delta),
            participants: Vec::new(),
        })
        .collect();
    let range = range.validate()?;
    let mut entries = font_sizes(&items, range, None)?;
    entries.extend(
        items
            .iter()
            .filter(|i| i.weight == 0.0)
            .map(|i| CloudEntry {
                concept_key: i.key.clone(),
                display_text: i.display_text.clone(),
                weight: 0.0,
                font_size: range.min_pt,
                color_class: ColorClass::Neutral,
                breadth: i.breadth,
                participants: Vec::new(),
            }),
    );
    entries.sort_by(|a, b| {
        by_weight_then_key(&(&a.concept_key, a.weight), &(&b.concept_key, b.weight))
    });
    if let Some(k) = top_k {
        entries.truncate(k);
    }
    for e in &mut entries {
        let delta = diff.deltas[&e.concept_key];
        e.color_class = classify_delta(delta, diff.margin).into();
    }
    Ok(entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Canvas {
    pub width: f64,
    pub height: f64,
}

impl Default for Canvas {
    fn default() -> Self {
        Self {
            width: 960.0,
            height: 540.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpiralConfig {
    /// Radial growth per full turn, in px.
    pub radial_step: f64,
    /// Angle advanced per probe, in radians.
    pub angular_step: f64,
}

impl Default for SpiralConfig {
    fn default() -> Self {
        Self {
            radial_step: 2.0,
            angular_step: 0.35,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlyphBox {
    pub entry: CloudEntry,
    /// Top-left corner.
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl GlyphBox {
    /// True when the two boxes, each inflated by `padding`, share interior area.
    pub fn overlaps(&self, other: &GlyphBox, padding: f64) -> bool {
        rects_overlap(
            (self.x, self.y, self.width, self.height),
            (other.x, other.y, other.width, other.height),
            padding,
        )
    }
}

fn rects_overlap(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64), padding: f64) -> bool {
    let (ax, ay, aw, ah) = a;
    let (bx, by, bw, bh) = b;
    ax - padding < bx + bw + padding
        && bx - padding < ax + aw + padding
        && ay - padding < by + bh + padding
        && by - padding < ay + ah + padding
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudLayout {
    /// Condition id, or `a vs b` for diff clouds.
    pub label: String,
    pub canvas: Canvas,
    pub seed: u64,
    pub padding: f64,
    pub boxes: Vec<GlyphBox>,
    pub overflow: Vec<CloudEntry>,
}

/// Places entries largest first on an outward spiral from the canvas center.
/// Each entry starts at a seed-derived angle; entries that find no free spot
/// before the spiral radius passes the canvas diagonal go to `overflow`.
pub fn place(
    label: &str,
    entries: &[CloudEntry],
    canvas: Canvas,
    seed: u64,
    padding: f64,
    spiral: SpiralConfig,
) -> Result<CloudLayout, LayoutError> {
    if !(canvas.width > 0.0 && canvas.height > 0.0) {
        return Err(LayoutError::InvalidCanvas(canvas.width, canvas.height));
    }
    if !(padding >= 0.0 && padding.is_finite()) {
        return Err(LayoutError::InvalidPadding(padding));
    }
    if !(spiral.radial_step > 0.0 && spiral.angular_step > 0.0) {
        return Err(LayoutError::InvalidSpiral);
    }

    let mut ordered: Vec<&CloudEntry> = entries.iter().collect();
    ordered.sort_by(|a, b| {
        by_weight_then_key(&(&a.concept_key, a.weight), &(&b.concept_key, b.weight))
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cx, cy) = (canvas.width / 2.0, canvas.height / 2.0);
    let diagonal = canvas.width.hypot(canvas.height);
    let growth = spiral.radial_step / TAU;

    let mut boxes: Vec<GlyphBox> = Vec::with_capacity(ordered.len());
    let mut overflow = Vec::new();
    for entry in ordered {
        let start: f64 = rng.random_range(0.0..TAU);
        let (w, h) = measure(&entry.display_text, entry.font_size);
        let mut spot = None;
        if w <= canvas.width && h <= canvas.height {
            let mut theta = 0.0_f64;
            loop {
                let r = growth * theta;
                if r > diagonal {
                    break;
                }
                let angle = start + theta;
                let x = cx + r * angle.cos() - w / 2.0;
                let y = cy + r * angle.sin() - h / 2.0;
                let inside =
                    x >= 0.0 && y >= 0.0 && x + w <= canvas.width && y + h <= canvas.height;
                if inside
                    && !boxes.iter().any(|b| {
                        rects_overlap((x, y, w, h), (b.x, b.y, b.width, b.height), padding)
                    })
                {
                    spot = Some((x, y));
                    break;
                }
                theta += spiral.angular_step;
            }
        }
        match spot {
            Some((x, y)) => boxes.push(GlyphBox {
                entry: entry.clone(),
                x,
                y,
                width: w,
                height: h,
            }),
            None => overflow.push(entry.clone()),
        }
    }
    if !overflow.is_empty() {
        tracing::warn!(
            label,
            count = overflow.len(),
            "entries did not fit on the canvas"
        );
    }
    Ok(CloudLayout {
        label: label.to_string(),
        canvas,
        seed,
        padding,
        boxes,
        overflow,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub background: String,
    /// Cycled over neutral entries in placement order.
    pub neutral: Vec<String>,
    pub a_dominant: String,
    pub b_dominant: String,
    pub within_margin: String,
    pub font_family: String,
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            background: "#ffffff".into(),
            neutral: vec![
                "#1f4e79".into(),
                "#2e75b6".into(),
                "#385723".into(),
                "#7f6000".into(),
                "#843c0c".into(),
            ],
            a_dominant: "#c55a11".into(),
            b_dominant: "#2f5597".into(),
            within_margin: "#a6a6a6".into(),
            font_family: "Helvetica, Arial, sans-serif".into(),
        }
    }
}

impl Palette {
    fn color(&self, class: ColorClass, index: usize) -> &str {
        match class {
            ColorClass::Neutral if self.neutral.is_empty() => "#000000",
            ColorClass::Neutral => &self.neutral[index % self.neutral.len()],
            ColorClass::ADominant => &self.a_dominant,
            ColorClass::BDominant => &self.b_dominant,
            ColorClass::WithinMargin => &self.within_margin,
        }
    }
}

/// Options for [`render_svg`]. `diff_legend` adds a legend band under the
/// cloud naming the two conditions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenderOptions {
    pub diff_legend: Option<(String, String, u32)>,
}

const LEGEND_BAND: f64 = 32.0;

pub fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn write_texts(out: &mut String, layout: &CloudLayout, palette: &Palette, dx: f64) {
    for (i, b) in layout.boxes.iter().enumerate() {
        let e = &b.entry;
        let _ = write!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"{:.2}\" fill=\"{}\" class=\"{}\" data-concept=\"{}\"",
            b.x + dx,
            b.y + e.font_size,
            e.font_size,
            escape_xml(palette.color(e.color_class, i)),
            e.color_class.css(),
            escape_xml(&e.concept_key),
        );
        if let Some(breadth) = e.breadth {
            let _ = write!(out, " data-breadth=\"{breadth}\"");
        }
        if !e.participants.is_empty() {
            let _ = write!(
                out,
                " data-participants=\"{}\"",
                escape_xml(&e.participants.join(" "))
            );
        }
        let _ = writeln!(out, ">{}</text>", escape_xml(&e.display_text));
    }
}

fn write_legend(
    out: &mut String,
    palette: &Palette,
    (a, b, margin): &(String, String, u32),
    y: f64,
) {
    let items = [
        (&palette.a_dominant, format!("more in {a} (Δ > {margin})")),
        (&palette.b_dominant, format!("more in {b} (Δ < -{margin})")),
        (
            &palette.within_margin,
            format!("within margin (|Δ| ≤ {margin})"),
        ),
    ];
    let _ = writeln!(out, "<g class=\"legend\" font-size=\"12\">");
    let mut x = 8.0;
    for (color, label) in items {
        let _ = writeln!(
            out,
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"12\" height=\"12\" fill=\"{}\"/>",
            y + 10.0,
            escape_xml(color)
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            x + 16.0,
            y + 20.5,
            escape_xml(&label)
        );
        x += 16.0 + label.chars().count() as f64 * 12.0 * CHAR_WIDTH_EM + 24.0;
    }
    let _ = writeln!(out, "</g>");
}

fn svg_open(out: &mut String, width: f64, height: f64, palette: &Palette, label: &str) {
    let _ = writeln!(out, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" data-cloud=\"{}\">",
        escape_xml(label)
    );
    let _ = writeln!(
        out,
        "<rect x=\"0\" y=\"0\" width=\"{width:.0}\" height=\"{height:.0}\" fill=\"{}\"/>",
        escape_xml(&palette.background)
    );
}

/// Serializes a layout as an SVG 1.1 document. Output bytes depend only on
/// the layout, palette and options.
pub fn render_svg(layout: &CloudLayout, palette: &Palette, options: &RenderOptions) -> String {
    let legend = options.diff_legend.is_some();
    let height = layout.canvas.height + if legend { LEGEND_BAND } else { 0.0 };
    let mut out = String::new();
    svg_open(
        &mut out,
        layout.canvas.width,
        height,
        palette,
        &layout.label,
    );
    let _ = writeln!(
        out,
        "<g font-family=\"{}\">",
        escape_xml(&palette.font_family)
    );
    write_texts(&mut out, layout, palette, 0.0);
    let _ = writeln!(out, "</g>");
    if let Some(legend) = &options.diff_legend {
        write_legend(&mut out, palette, legend, layout.canvas.height);
    }
    let _ = writeln!(out, "</svg>");
    out
}

/// Two-panel diff rendering: A-dominant concepts on the left, B-dominant on
/// the right, each placed on its own half-width canvas. Within-margin
/// concepts are left out.
pub fn place_separated(
    entries: &[CloudEntry],
    label: &str,
    canvas: Canvas,
    seed: u64,
    padding: f64,
    spiral: SpiralConfig,
) -> Result<(CloudLayout, CloudLayout), LayoutError> {
    let half = Canvas {
        width: canvas.width / 2.0,
        height: canvas.height,
    };
    let pick = |class| {
        entries
            .iter()
            .filter(|e| e.color_class == class)
            .cloned()
            .collect::<Vec<_>>()
    };
    let left = place(
        label,
        &pick(ColorClass::ADominant),
        half,
        seed,
        padding,
        spiral,
    )?;
    let right = place(
        label,
        &pick(ColorClass::BDominant),
        half,
        seed,
        padding,
        spiral,
    )?;
    Ok((left, right))
}

pub fn render_svg_separated(
    left: &CloudLayout,
    right: &CloudLayout,
    palette: &Palette,
    options: &RenderOptions,
) -> String {
    let width = left.canvas.width + right.canvas.width;
    let canvas_h = left.canvas.height.max(right.canvas.height);
    let height = canvas_h
        + if options.diff_legend.is_some() {
            LEGEND_BAND
        } else {
            0.0
        };
    let mut out = String::new();
    svg_open(&mut out, width, height, palette, &left.label);
    let _ = writeln!(
        out,
        "<g font-family=\"{}\">",
        escape_xml(&palette.font_family)
    );
    write_texts(&mut out, left, palette, 0.0);
    write_texts(&mut out, right, palette, left.canvas.width);
    let _ = writeln!(out, "</g>");
    let _ = writeln!(
        out,
        "<line x1=\"{0:.2}\" y1=\"0\" x2=\"{0:.2}\" y2=\"{1:.2}\" stroke=\"{2}\"/>",
        left.canvas.width,
        canvas_h,
        escape_xml(&palette.within_margin)
    );
    if let Some(legend) = &options.diff_legend {
        write_legend(&mut out, palette, legend, canvas_h);
    }
    let _ = writeln!(out, "</svg>");
    out
}
