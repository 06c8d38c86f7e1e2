//! Deterministic stand-ins for the external toolchain (a typesetter for a
//! Word/LaTeX subset, a rasterizer and a LaTeX-to-XML converter) and a
//! generator for documents whose table positions are known in advance.

pub mod corpus;
pub mod layout;
pub mod pdf;
pub mod raster;
pub mod tex;
pub mod typeset;
pub mod word;

use std::path::{Path, PathBuf};

/// Typesets a `.docx` or `.tex` file into PDF bytes.
pub fn typeset_file(path: &Path) -> Result<Vec<u8>, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default()
        .to_ascii_lowercase();
    let blocks = match ext.as_str() {
        "docx" => word::word_blocks(&bytes)?,
        "tex" => {
            let src = String::from_utf8_lossy(&bytes);
            tex::tex_blocks(&src).map_err(|e| format!("! {e}"))?
        }
        other => return Err(format!("unsupported input type '.{other}'")),
    };
    Ok(pdf::write_pdf(&typeset::lay_out(&blocks).pages))
}

/// Paths of the three helper executables in one directory.
#[derive(Debug, Clone)]
pub struct FixtureTools {
    pub typeset: PathBuf,
    pub raster: PathBuf,
    pub latexml: PathBuf,
}

fn quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', "'\\''"))
}

impl FixtureTools {
    pub fn in_dir(dir: &Path) -> Self {
        let exe = |n: &str| dir.join(format!("{n}{}", std::env::consts::EXE_SUFFIX));
        FixtureTools {
            typeset: exe("fixture-typeset"),
            raster: exe("fixture-raster"),
            latexml: exe("fixture-latexml"),
        }
    }

    /// Looks next to the running test binary (`target/<profile>/deps/..`).
    pub fn beside_current_exe() -> Option<Self> {
        let exe = std::env::current_exe().ok()?;
        let mut dir = exe.parent()?;
        if dir.ends_with("deps") {
            dir = dir.parent()?;
        }
        let tools = FixtureTools::in_dir(dir);
        tools.available().then_some(tools)
    }

    pub fn available(&self) -> bool {
        self.typeset.is_file() && self.raster.is_file() && self.latexml.is_file()
    }

    pub fn word_to_pdf_cmd(&self) -> String {
        format!("{} {{input}} {{outdir}}", quote(&self.typeset))
    }

    pub fn latex_to_pdf_cmd(&self) -> String {
        self.word_to_pdf_cmd()
    }

    pub fn rasterize_cmd(&self) -> String {
        format!("{} {{dpi}} {{input}} {{outdir}}/page", quote(&self.raster))
    }

    pub fn latex_to_xml_cmd(&self) -> String {
        format!("{} {{input}} {{output}}", quote(&self.latexml))
    }

    /// A TOML `[render]` table wiring the helpers in.
    pub fn render_toml(&self, dpi: u32) -> String {
        let s = |v: String| v.replace('\\', "\\\\").replace('"', "\\\"");
        format!(
            "[render]\nword_to_pdf_cmd = \"{}\"\nlatex_to_pdf_cmd = \"{}\"\nrasterize_cmd = \"{}\"\nlatex_to_xml_cmd = \"{}\"\ndpi = {dpi}\ntimeout_s = 60\n",
            s(self.word_to_pdf_cmd()),
            s(self.latex_to_pdf_cmd()),
            s(self.rasterize_cmd()),
            s(self.latex_to_xml_cmd()),
        )
    }
}
