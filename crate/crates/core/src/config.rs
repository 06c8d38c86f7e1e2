//! Run configuration: external tool templates, sentinel colors and the
//! thresholds used by extraction, labeling and evaluation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DPI: u32 = 150;

/// An 8-bit RGB color reserved for drawing table frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentinelColor {
    pub rgb: [u8; 3],
    pub name: String,
}

impl SentinelColor {
    pub fn green() -> Self {
        SentinelColor {
            rgb: [0, 255, 0],
            name: "tbsentinel".into(),
        }
    }

    pub fn white() -> Self {
        SentinelColor {
            rgb: [255, 255, 255],
            name: "tbcontrol".into(),
        }
    }

    /// Upper-case hex as used by OOXML color attributes.
    pub fn hex(&self) -> String {
        format!("{:02X}{:02X}{:02X}", self.rgb[0], self.rgb[1], self.rgb[2])
    }

    pub fn max_channel_distance(&self, other: &SentinelColor) -> u8 {
        self.rgb
            .iter()
            .zip(other.rgb.iter())
            .map(|(a, b)| a.abs_diff(*b))
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub word_to_pdf_cmd: String,
    pub latex_to_pdf_cmd: String,
    pub rasterize_cmd: String,
    /// LaTeX to XML converter used for structure labels; empty disables it.
    pub latex_to_xml_cmd: String,
    pub dpi: u32,
    pub timeout_s: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            word_to_pdf_cmd: "soffice --headless --convert-to pdf --outdir {outdir} {input}".into(),
            latex_to_pdf_cmd:
                "pdflatex -interaction=nonstopmode -halt-on-error -output-directory {outdir} {input}"
                    .into(),
            rasterize_cmd: "pdftoppm -r {dpi} -png {input} {outdir}/page".into(),
            latex_to_xml_cmd: String::new(),
            dpi: DEFAULT_DPI,
            timeout_s: 120,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dpi == 0 {
            return Err(Error::Config("dpi must be positive".into()));
        }
        if self.timeout_s == 0 {
            return Err(Error::Config("timeout_s must be positive".into()));
        }
        let templates = [
            ("word_to_pdf_cmd", &self.word_to_pdf_cmd),
            ("latex_to_pdf_cmd", &self.latex_to_pdf_cmd),
            ("rasterize_cmd", &self.rasterize_cmd),
        ];
        for (field, template) in templates {
            if !template.contains("{input}") {
                return Err(Error::Config(format!("{field} lacks an {{input}} placeholder")));
            }
            if !template.contains("{output}") && !template.contains("{outdir}") {
                return Err(Error::Config(format!(
                    "{field} lacks an {{output}} or {{outdir}} placeholder"
                )));
            }
        }
        if !self.latex_to_xml_cmd.is_empty()
            && !(self.latex_to_xml_cmd.contains("{input}")
                && self.latex_to_xml_cmd.contains("{output}"))
        {
            return Err(Error::Config(
                "latex_to_xml_cmd needs {input} and {output} placeholders".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    /// A pixel differs when some channel moves by strictly more than this.
    pub tol: u8,
    /// Max per-channel deviation of an annotated pixel from the sentinel.
    pub sentinel_distance: u8,
    pub min_box_px: u32,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            tol: 24,
            sentinel_distance: 64,
            min_box_px: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotateConfig {
    pub annotated: SentinelColor,
    pub control: SentinelColor,
    /// Word border width in eighths of a point; 8 (1pt) draws ~2px at 150 DPI.
    pub border_size_eighths: u32,
    /// LaTeX frame rule and separation, in points.
    pub frame_rule_pt: f32,
    pub frame_sep_pt: f32,
}

impl Default for AnnotateConfig {
    fn default() -> Self {
        AnnotateConfig {
            annotated: SentinelColor::green(),
            control: SentinelColor::white(),
            border_size_eighths: 8,
            frame_rule_pt: 1.0,
            frame_sep_pt: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructureConfig {
    pub drop_empty_tables: bool,
    pub drop_single_empty_cell: bool,
}

impl Default for StructureConfig {
    fn default() -> Self {
        StructureConfig {
            drop_empty_tables: true,
            drop_single_empty_cell: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub detection_val: usize,
    pub detection_test: usize,
    pub structure_val: usize,
    pub structure_test: usize,
    pub group_by_document: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            detection_val: 0,
            detection_test: 0,
            structure_val: 0,
            structure_test: 0,
            group_by_document: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub iou_match: f64,
    pub coverage_min: f64,
    pub bleu_smoothing: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iou_match: 0.5,
            coverage_min: 0.9,
            bleu_smoothing: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub render: RenderConfig,
    pub extract: ExtractConfig,
    pub annotate: AnnotateConfig,
    pub structure: StructureConfig,
    pub split: SplitConfig,
    pub eval: EvalConfig,
    pub seed: u64,
    pub jobs: usize,
}

impl Config {
    /// Loads TOML or JSON, chosen by file extension.
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Config = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)?,
            _ => toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.render.validate()?;
        let a = &self.annotate;
        if a.annotated.max_channel_distance(&a.control) <= self.extract.tol {
            return Err(Error::Config(format!(
                "annotated and control sentinels differ by at most {} per channel, not above tol {}",
                a.annotated.max_channel_distance(&a.control),
                self.extract.tol
            )));
        }
        if a.border_size_eighths == 0 || a.frame_rule_pt <= 0.0 {
            return Err(Error::Config("frame stroke width must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.eval.iou_match)
            || !(0.0..=1.0).contains(&self.eval.coverage_min)
        {
            return Err(Error::Config("evaluation thresholds must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn sentinels_too_close_rejected() {
        let mut cfg = Config::default();
        cfg.annotate.control.rgb = [10, 250, 10];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn template_without_placeholder_rejected() {
        let mut cfg = RenderConfig::default();
        cfg.rasterize_cmd = "pdftoppm -png".into();
        assert!(cfg.validate().is_err());
        cfg = RenderConfig {
            dpi: 0,
            ..RenderConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg: Config = toml::from_str("[render]\ndpi = 300\n[extract]\ntol = 30\n").unwrap();
        assert_eq!(cfg.render.dpi, 300);
        assert_eq!(cfg.extract.tol, 30);
        assert_eq!(cfg.extract.min_box_px, 8);
        assert_eq!(cfg.annotate.annotated.rgb, [0, 255, 0]);
    }
}
