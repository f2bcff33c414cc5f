//! Static report rendering: relevance-highlighted messages, annotated
//! importance grids, bias tables, error grids, and the final multi-page
//! HTML/CSV/JSON bundle.
//!
//! Everything here is a pure function from in-memory analysis results to
//! strings, plus one bundle writer. Output is byte-deterministic for equal
//! inputs: no timestamps (unless an explicit stamp is supplied), no map
//! iteration in render paths, fixed number formatting.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::aggregation::TokenImportanceTable;
use crate::diagnostics::{f1_score, ConfusionMatrix, ErrorGrid, RepresentativeExample};
use crate::word_grouping::{BiasFlag, BiasRow, Lean, PosGroup};
use crate::{Result, SeglensError};

/// Parse a `#RRGGBB` hex color.
pub fn parse_hex_color(color: &str) -> Result<(u8, u8, u8)> {
    let invalid = || {
        SeglensError::InvalidConfig(format!(
            "color {color:?} is not of the form #RRGGBB"
        ))
    };
    let hex = color.strip_prefix('#').ok_or_else(invalid)?;
    if hex.len() != 6 || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(invalid());
    }
    let part = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).expect("checked hex");
    Ok((part(0), part(2), part(4)))
}

/// Escape text for safe embedding in HTML element content or attributes.
#[must_use]
pub fn escape_html(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Report colors. All values are `#RRGGBB` hex so that highlight opacity can
/// be computed; [`Palette::validate`] enforces this.
#[derive(Debug, Clone)]
pub struct Palette {
    /// Highlight color for tokens pushing toward class 1.
    pub class1_color: String,
    /// Highlight color for tokens pushing toward class 0.
    pub class0_color: String,
    /// Opacity of the strongest-scored token in a message, in (0, 1].
    pub max_alpha: f64,
    /// Meaning-bucket colors toward class 1, for buckets 2, 3, 4
    /// (bucket 1 stays uncolored).
    pub meaning_class1: [String; 3],
    /// Meaning-bucket colors toward class 0, for buckets 2, 3, 4.
    pub meaning_class0: [String; 3],
    /// Cell color for lexicon-negative tokens (the class-1-leaning side).
    pub sentiment_negative: String,
    /// Cell color for lexicon-positive tokens.
    pub sentiment_positive: String,
    /// Cell colors per part-of-speech group.
    pub pos_colors: Vec<(PosGroup, String)>,
    /// Bias colors for (significant, strong) toward the first anchor set.
    pub bias_toward_a: [String; 2],
    /// Bias colors for (significant, strong) toward the second anchor set.
    pub bias_toward_b: [String; 2],
}

// The three blue and three orange shades used across all annotation views,
// darkest first.
const BLUE_DARK: &str = "#9BC2E6";
const BLUE_MID: &str = "#BDD7EE";
const BLUE_LIGHT: &str = "#DDEBF7";
const ORANGE_DARK: &str = "#F4B084";
const ORANGE_MID: &str = "#F8CBAD";
const ORANGE_LIGHT: &str = "#FCE4D6";

impl Default for Palette {
    fn default() -> Self {
        Palette {
            class1_color: "#2E75B6".to_string(),
            class0_color: "#C00000".to_string(),
            max_alpha: 0.75,
            meaning_class1: [
                BLUE_LIGHT.to_string(),
                BLUE_MID.to_string(),
                BLUE_DARK.to_string(),
            ],
            meaning_class0: [
                ORANGE_LIGHT.to_string(),
                ORANGE_MID.to_string(),
                ORANGE_DARK.to_string(),
            ],
            sentiment_negative: BLUE_DARK.to_string(),
            sentiment_positive: ORANGE_DARK.to_string(),
            pos_colors: vec![
                (PosGroup::AdjectiveFamily, BLUE_DARK.to_string()),
                (PosGroup::Adverb, BLUE_MID.to_string()),
                (PosGroup::VerbFamily, BLUE_LIGHT.to_string()),
                (PosGroup::PluralNoun, ORANGE_MID.to_string()),
                (PosGroup::Noun, ORANGE_DARK.to_string()),
            ],
            bias_toward_a: [BLUE_MID.to_string(), BLUE_DARK.to_string()],
            bias_toward_b: [ORANGE_MID.to_string(), ORANGE_DARK.to_string()],
        }
    }
}

impl Palette {
    /// Check every color parses as `#RRGGBB` and `max_alpha` is in (0, 1].
    pub fn validate(&self) -> Result<()> {
        let mut colors: Vec<&str> = vec![
            &self.class1_color,
            &self.class0_color,
            &self.sentiment_negative,
            &self.sentiment_positive,
        ];
        colors.extend(self.meaning_class1.iter().map(String::as_str));
        colors.extend(self.meaning_class0.iter().map(String::as_str));
        colors.extend(self.pos_colors.iter().map(|(_, c)| c.as_str()));
        colors.extend(self.bias_toward_a.iter().map(String::as_str));
        colors.extend(self.bias_toward_b.iter().map(String::as_str));
        for color in colors {
            parse_hex_color(color)?;
        }
        if !(self.max_alpha > 0.0 && self.max_alpha <= 1.0) {
            return Err(SeglensError::InvalidConfig(format!(
                "max_alpha must be in (0, 1], got {}",
                self.max_alpha
            )));
        }
        Ok(())
    }

    /// The meaning-view cell color for a bucket and lean, if any.
    #[must_use]
    pub fn meaning_color(&self, bucket: usize, lean: Lean) -> Option<&str> {
        if !(2..=4).contains(&bucket) {
            return None;
        }
        match lean {
            Lean::TowardA => Some(self.meaning_class1[bucket - 2].as_str()),
            Lean::TowardB => Some(self.meaning_class0[bucket - 2].as_str()),
            Lean::None => None,
        }
    }

    /// The cell color for a part-of-speech group, if configured.
    #[must_use]
    pub fn pos_color(&self, group: PosGroup) -> Option<&str> {
        self.pos_colors
            .iter()
            .find(|(g, _)| *g == group)
            .map(|(_, c)| c.as_str())
    }

    /// The bias-view cell color for a flag and direction, if any.
    #[must_use]
    pub fn bias_color(&self, flag: BiasFlag, direction: Lean) -> Option<&str> {
        let shades = match direction {
            Lean::TowardA => &self.bias_toward_a,
            Lean::TowardB => &self.bias_toward_b,
            Lean::None => return None,
        };
        match flag {
            BiasFlag::Significant => Some(shades[0].as_str()),
            BiasFlag::Strong => Some(shades[1].as_str()),
            BiasFlag::None => None,
        }
    }
}

/// Fraction of the message's strongest score below which a token renders
/// unhighlighted.
pub const HIGHLIGHT_FLOOR: f64 = 0.10;

/// Render a message as an HTML fragment with per-token relevance shading:
/// positive scores shade with the class-1 color, negative with the class-0
/// color, at opacity `max_alpha * |score| / max|score|`. Tokens under
/// [`HIGHLIGHT_FLOOR`] of the message maximum stay plain; a message whose
/// scores are all zero is rendered as plain escaped text.
pub fn render_highlighted_message(
    tokens: &[String],
    scores: &[f64],
    palette: &Palette,
) -> Result<String> {
    if tokens.len() != scores.len() {
        return Err(SeglensError::DataMismatch(format!(
            "{} tokens but {} scores",
            tokens.len(),
            scores.len()
        )));
    }
    let class1 = parse_hex_color(&palette.class1_color)?;
    let class0 = parse_hex_color(&palette.class0_color)?;
    let max_abs = scores.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let mut parts = Vec::with_capacity(tokens.len());
    for (token, &score) in tokens.iter().zip(scores) {
        let text = escape_html(token);
        if max_abs == 0.0 || score.abs() < HIGHLIGHT_FLOOR * max_abs {
            parts.push(text);
            continue;
        }
        let (r, g, b) = if score > 0.0 { class1 } else { class0 };
        let alpha = palette.max_alpha * score.abs() / max_abs;
        parts.push(format!(
            "<span style=\"background-color:rgba({r},{g},{b},{alpha:.3})\">{text}</span>"
        ));
    }
    Ok(parts.join(" "))
}

/// Cell decoration computed by an annotation mode for one (segment, token):
/// the fill color (`None` leaves the cell uncolored) and a short label shown
/// as a tooltip in HTML and as a column in CSV.
#[derive(Debug, Clone)]
pub struct CellAnnotation {
    /// `#RRGGBB` fill, or `None` for unmatched/unscored tokens.
    pub color: Option<String>,
    /// Short text, e.g. `negative`, `noun`, `bucket 3 toward class1`.
    pub label: String,
}

/// Render ranked tables side by side, keyed by rank: one column per table
/// (the layout used for full-data-plus-topic comparisons). Cells show the
/// token, colored and tooltipped by `annotate(segment, token)`.
#[must_use]
pub fn render_importance_grid(
    tables: &[&TokenImportanceTable],
    k: usize,
    annotate: &dyn Fn(&str, &str) -> CellAnnotation,
) -> String {
    let depth = tables
        .iter()
        .map(|t| t.top_k(k).len())
        .max()
        .unwrap_or(0);
    let mut html = String::from("<table>\n<thead><tr><th>Rank</th>");
    for table in tables {
        let _ = write!(html, "<th>{}</th>", escape_html(&table.segment));
    }
    html.push_str("</tr></thead>\n<tbody>\n");
    for rank in 0..depth {
        let _ = write!(html, "<tr><td>{rank}</td>");
        for table in tables {
            match table.top_k(k).get(rank) {
                Some(row) => {
                    let annotation = annotate(&table.segment, &row.token);
                    let style = annotation
                        .color
                        .as_deref()
                        .map(|c| format!(" style=\"background-color:{c}\""))
                        .unwrap_or_default();
                    let _ = write!(
                        html,
                        "<td{style} title=\"{}\">{}</td>",
                        escape_html(&annotation.label),
                        escape_html(&row.token)
                    );
                }
                None => html.push_str("<td></td>"),
            }
        }
        html.push_str("</tr>\n");
    }
    html.push_str("</tbody>\n</table>\n");
    html
}

/// CSV twin of [`render_importance_grid`]: long format with one row per
/// (segment, rank) holding the token, its statistics, and the annotation
/// label, so the CSV carries exactly the content the HTML shows.
pub fn importance_grid_csv(
    tables: &[&TokenImportanceTable],
    k: usize,
    annotate: &dyn Fn(&str, &str) -> CellAnnotation,
) -> String {
    let mut out = String::from(
        "segment,rank,token,total_relevance,mean_relevance,doc_frequency,annotation\n",
    );
    for table in tables {
        for row in table.top_k(k) {
            let annotation = annotate(&table.segment, &row.token);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                csv_field(&table.segment),
                row.rank,
                csv_field(&row.token),
                row.total_relevance,
                row.mean_relevance,
                row.doc_frequency,
                csv_field(&annotation.label)
            );
        }
    }
    out
}

fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

/// Render the per-segment performance table: confusion cells plus exact F1
/// (`n/a` where undefined).
#[must_use]
pub fn render_performance_section(rows: &[(String, ConfusionMatrix)]) -> String {
    let mut html = String::from(
        "<table>\n<thead><tr><th>Segment</th><th>Actual 0 / Pred 0</th>\
         <th>Actual 0 / Pred 1</th><th>Actual 1 / Pred 0</th>\
         <th>Actual 1 / Pred 1</th><th>F1</th></tr></thead>\n<tbody>\n",
    );
    for (segment, cm) in rows {
        let f1 = match f1_score(cm) {
            Ok(v) => format!("{v:.4}"),
            Err(_) => "n/a".to_string(),
        };
        let _ = writeln!(
            html,
            "<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
            escape_html(segment),
            cm.true_negatives,
            cm.false_positives,
            cm.false_negatives,
            cm.true_positives,
            f1
        );
    }
    html.push_str("</tbody>\n</table>\n");
    html
}

/// Render unique-per-segment top tokens: one block per segment listing
/// tokens (with their within-segment rank) found in no other segment's
/// top list.
#[must_use]
pub fn render_unique_tokens_section(
    heading: &str,
    unique: &[(String, Vec<crate::aggregation::ImportanceRow>)],
) -> String {
    let mut html = format!("<h3>{}</h3>\n", escape_html(heading));
    for (segment, rows) in unique {
        let _ = write!(html, "<h4>{}</h4>\n<ul>", escape_html(segment));
        if rows.is_empty() {
            html.push_str("<li><em>none</em></li>");
        }
        for row in rows {
            let _ = write!(
                html,
                "<li>{}.{}</li>",
                row.rank,
                escape_html(&row.token)
            );
        }
        html.push_str("</ul>\n");
    }
    html
}

/// Render the bias table: flagged rows only (the full scan is exported as
/// data), colored by flag strength and direction.
#[must_use]
pub fn render_bias_section(rows: &[BiasRow], palette: &Palette) -> String {
    let mut html = String::from(
        "<table>\n<thead><tr><th>Token</th><th>Rank</th><th>Similarity (male)</th>\
         <th>Similarity (female)</th><th>Difference</th><th>Flag</th></tr></thead>\n<tbody>\n",
    );
    let mut any = false;
    for row in rows {
        if row.flag == BiasFlag::None {
            continue;
        }
        any = true;
        let style = palette
            .bias_color(row.flag, row.direction)
            .map(|c| format!(" style=\"background-color:{c}\""))
            .unwrap_or_default();
        let _ = writeln!(
            html,
            "<tr{style}><td>{}</td><td>{}</td><td>{:.3}</td><td>{:.3}</td>\
             <td>{:.3}</td><td>{}</td></tr>",
            escape_html(&row.token),
            row.rank,
            row.sim_a,
            row.sim_b,
            row.difference,
            row.flag.name()
        );
    }
    if !any {
        html.push_str("<tr><td colspan=\"6\"><em>none</em></td></tr>\n");
    }
    html.push_str("</tbody>\n</table>\n");
    html
}

/// Render an error grid as an HTML table: percentage rates with counts,
/// `n/a` for undefined cells, row error totals, and the lowest/highest
/// defined rate of each row marked with `low`/`high` classes.
#[must_use]
pub fn render_error_grid(grid: &ErrorGrid) -> String {
    let mut html = String::from("<table>\n<thead><tr><th>Segment</th>");
    for column in &grid.columns {
        let _ = write!(html, "<th>{}</th>", escape_html(column));
    }
    html.push_str("<th>N of Errors</th></tr></thead>\n<tbody>\n");
    for (r, row_label) in grid.rows.iter().enumerate() {
        let _ = write!(html, "<tr><td>{}</td>", escape_html(row_label));
        let (min, max) = grid.row_extremes[r];
        for (c, cell) in grid.cells[r].iter().enumerate() {
            let class = if Some(c) == min && Some(c) == max {
                String::new()
            } else if Some(c) == min {
                " class=\"low\"".to_string()
            } else if Some(c) == max {
                " class=\"high\"".to_string()
            } else {
                String::new()
            };
            match cell.rate {
                Some(rate) => {
                    let _ = write!(
                        html,
                        "<td{class}>{:.1}% ({})</td>",
                        rate * 100.0,
                        cell.count
                    );
                }
                None => html.push_str("<td>n/a</td>"),
            }
        }
        let _ = writeln!(html, "<td>{}</td></tr>", grid.row_error_totals[r]);
    }
    html.push_str("</tbody>\n</table>\n");
    html
}

/// Render representative misclassified examples per segment, each with its
/// relevance-highlighted message. Segments without examples get a `none`
/// placeholder.
pub fn render_representatives_section(
    heading: &str,
    per_segment: &[(String, Vec<RepresentativeExample>)],
    palette: &Palette,
) -> Result<String> {
    let mut html = format!("<h3>{}</h3>\n", escape_html(heading));
    for (segment, examples) in per_segment {
        let _ = writeln!(html, "<h4>{}</h4>", escape_html(segment));
        if examples.is_empty() {
            html.push_str("<p><em>none</em></p>\n");
            continue;
        }
        for example in examples {
            let message =
                render_highlighted_message(&example.tokens, &example.scores, palette)?;
            let _ = writeln!(
                html,
                "<div class=\"example\"><p class=\"meta\">{} &mdash; actual {}, \
                 predicted {}, probability {:.3}</p><p class=\"message\">{}</p></div>",
                escape_html(&example.id),
                example.actual,
                example.predicted,
                example.prob,
                message
            );
        }
    }
    Ok(html)
}

/// One rendered page of the bundle.
#[derive(Debug, Clone)]
pub struct SectionPage {
    /// File name without extension, e.g. `performance`.
    pub slug: String,
    /// Human heading.
    pub title: String,
    /// Body HTML fragment.
    pub body_html: String,
}

/// Everything [`emit_report`] writes.
#[derive(Debug, Clone, Default)]
pub struct ReportBundle {
    /// Report heading on the index page.
    pub title: String,
    /// Optional stamp line (e.g. a timestamp); omitted entirely when `None`
    /// so that equal inputs produce byte-identical bundles.
    pub stamp: Option<String>,
    /// Section pages, in display order.
    pub sections: Vec<SectionPage>,
    /// `(file name, CSV text)` pairs written under `tables/`.
    pub tables: Vec<(String, String)>,
    /// `(file name, JSON text)` pairs written under `data/`.
    pub data: Vec<(String, String)>,
}

const PAGE_CSS: &str = "body{font-family:Georgia,serif;margin:2rem auto;max-width:60rem;\
padding:0 1rem;line-height:1.5}table{border-collapse:collapse;margin:1rem 0}\
td,th{border:1px solid #999;padding:0.25rem 0.5rem;text-align:left}\
th{background:#ACB9CA}td.low{outline:2px solid #548235}td.high{outline:2px solid #C00000}\
div.example{border:1px solid #ccc;margin:0.75rem 0;padding:0.5rem}\
p.meta{color:#555;font-size:0.9rem;margin:0 0 0.5rem}p.message{margin:0}\
nav a{margin-right:1rem}footer{margin-top:2rem;color:#777;font-size:0.85rem}";

fn render_page(title: &str, body: &str, stamp: Option<&str>, home_link: bool) -> String {
    let nav = if home_link {
        "<nav><a href=\"index.html\">&larr; index</a></nav>\n"
    } else {
        ""
    };
    let footer = match stamp {
        Some(stamp) => format!("<footer>{}</footer>\n", escape_html(stamp)),
        None => String::new(),
    };
    format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n\
         <title>{title}</title>\n<style>{PAGE_CSS}</style>\n</head>\n<body>\n\
         {nav}<h1>{title}</h1>\n{body}\n{footer}</body>\n</html>\n",
        title = escape_html(title),
    )
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|source| SeglensError::WriteOutput {
        path: path.display().to_string(),
        source,
    })
}

/// Write the bundle: `index.html` linking every section, one HTML file per
/// section, CSVs under `tables/`, JSON under `data/`. Fully static and
/// byte-deterministic for equal inputs.
pub fn emit_report(out_dir: &Path, bundle: &ReportBundle) -> Result<()> {
    let tables_dir = out_dir.join("tables");
    let data_dir = out_dir.join("data");
    for dir in [out_dir, &tables_dir, &data_dir] {
        std::fs::create_dir_all(dir).map_err(|source| SeglensError::WriteOutput {
            path: dir.display().to_string(),
            source,
        })?;
    }

    let mut index_body = String::from("<ul>\n");
    for section in &bundle.sections {
        let _ = writeln!(
            index_body,
            "<li><a href=\"{slug}.html\">{title}</a></li>",
            slug = section.slug,
            title = escape_html(&section.title)
        );
    }
    index_body.push_str("</ul>\n");
    if !bundle.tables.is_empty() || !bundle.data.is_empty() {
        index_body.push_str("<h2>Machine-readable exports</h2>\n<ul>\n");
        for (name, _) in &bundle.tables {
            let _ = writeln!(
                index_body,
                "<li><a href=\"tables/{name}\">tables/{name}</a></li>",
                name = escape_html(name)
            );
        }
        for (name, _) in &bundle.data {
            let _ = writeln!(
                index_body,
                "<li><a href=\"data/{name}\">data/{name}</a></li>",
                name = escape_html(name)
            );
        }
        index_body.push_str("</ul>\n");
    }
    write_file(
        &out_dir.join("index.html"),
        &render_page(&bundle.title, &index_body, bundle.stamp.as_deref(), false),
    )?;

    for section in &bundle.sections {
        write_file(
            &out_dir.join(format!("{}.html", section.slug)),
            &render_page(
                &section.title,
                &section.body_html,
                bundle.stamp.as_deref(),
                true,
            ),
        )?;
    }
    for (name, csv) in &bundle.tables {
        write_file(&tables_dir.join(name), csv)?;
    }
    for (name, json) in &bundle.data {
        write_file(&data_dir.join(name), json)?;
    }
    Ok(())
}

/// Build a sentiment-mode annotation function over a lexicon.
pub fn sentiment_annotator<'a>(
    lexicon: &'a crate::word_grouping::SentimentLexicon,
    palette: &'a Palette,
) -> impl Fn(&str, &str) -> CellAnnotation + 'a {
    move |_segment: &str, token: &str| {
        use crate::word_grouping::SentimentTag;
        let tag = lexicon.tag(token);
        let color = match tag {
            SentimentTag::Negative => Some(palette.sentiment_negative.clone()),
            SentimentTag::Positive => Some(palette.sentiment_positive.clone()),
            SentimentTag::Unmatched => None,
        };
        CellAnnotation {
            color,
            label: tag.name().to_string(),
        }
    }
}

/// Build a part-of-speech-mode annotation function over a lexicon.
pub fn pos_annotator<'a>(
    lexicon: &'a crate::word_grouping::PosLexicon,
    palette: &'a Palette,
) -> impl Fn(&str, &str) -> CellAnnotation + 'a {
    move |_segment: &str, token: &str| match lexicon.group(token) {
        Some(group) => CellAnnotation {
            color: palette.pos_color(group).map(str::to_string),
            label: group.name().to_string(),
        },
        None => CellAnnotation {
            color: None,
            label: "unmatched".to_string(),
        },
    }
}

/// Build a meaning-mode annotation function over precomputed per-token
/// annotations (token -> meaning), shared by all segments in the grid.
pub fn meaning_annotator<'a>(
    meanings: &'a HashMap<String, crate::word_grouping::Meaning>,
    palette: &'a Palette,
) -> impl Fn(&str, &str) -> CellAnnotation + 'a {
    use crate::word_grouping::Meaning;
    move |_segment: &str, token: &str| match meanings.get(token) {
        Some(Meaning::Scored { bucket, lean, .. }) => CellAnnotation {
            color: palette.meaning_color(*bucket, *lean).map(str::to_string),
            label: format!("bucket {bucket} {}", lean.name()),
        },
        Some(Meaning::NoEmbedding) => CellAnnotation {
            color: None,
            label: "no-embedding".to_string(),
        },
        None => CellAnnotation {
            color: None,
            label: "no-embedding".to_string(),
        },
    }
}
