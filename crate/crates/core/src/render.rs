//! External converter orchestration: source → PDF → page images, and
//! pairing of annotated/control renders.
//!
//! Tools are described by command templates. Placeholders substituted per
//! argument: `{input}`, `{output}`, `{outdir}`, `{dpi}`. Each job runs in its
//! own temporary directory, removed when the job finishes.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use image::{ImageBuffer, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;
use walkdir::WalkDir;

use crate::config::RenderConfig;
use crate::error::{Error, Result};
use crate::ingest::SourceKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageImage {
    pub width_px: u32,
    pub height_px: u32,
    /// Row-major RGB, 8 bits per channel.
    pub pixels: Vec<u8>,
    pub page_index: usize,
}

impl PageImage {
    pub fn blank(width_px: u32, height_px: u32, page_index: usize) -> Self {
        PageImage {
            width_px,
            height_px,
            pixels: vec![255; width_px as usize * height_px as usize * 3],
            page_index,
        }
    }

    pub fn from_raw(width_px: u32, height_px: u32, pixels: Vec<u8>, page_index: usize) -> Result<Self> {
        if pixels.len() != width_px as usize * height_px as usize * 3 {
            return Err(Error::RasterFailed(format!(
                "buffer of {} bytes does not hold {width_px}x{height_px} RGB",
                pixels.len()
            )));
        }
        Ok(PageImage {
            width_px,
            height_px,
            pixels,
            page_index,
        })
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width_px as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width_px as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Decodes any PNG, compositing alpha over white.
    pub fn from_png_bytes(bytes: &[u8], page_index: usize) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
        let rgba = img.to_rgba8();
        let (w, h) = rgba.dimensions();
        let mut pixels = Vec::with_capacity(w as usize * h as usize * 3);
        for p in rgba.pixels() {
            let a = p[3] as u32;
            for c in 0..3 {
                let v = (p[c] as u32 * a + 255 * (255 - a) + 127) / 255;
                pixels.push(v as u8);
            }
        }
        PageImage::from_raw(w, h, pixels, page_index)
    }

    pub fn load_png(path: &Path, page_index: usize) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_png_bytes(&bytes, page_index)
    }

    pub fn to_rgb_image(&self) -> RgbImage {
        ImageBuffer::<Rgb<u8>, _>::from_raw(self.width_px, self.height_px, self.pixels.clone())
            .expect("buffer length checked at construction")
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        self.to_rgb_image()
            .save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn crop(&self, x: u32, y: u32, w: u32, h: u32) -> PageImage {
        let x1 = (x + w).min(self.width_px);
        let y1 = (y + h).min(self.height_px);
        let (x0, y0) = (x.min(x1), y.min(y1));
        let (cw, ch) = (x1 - x0, y1 - y0);
        let mut pixels = Vec::with_capacity(cw as usize * ch as usize * 3);
        for row in y0..y1 {
            let a = (row as usize * self.width_px as usize + x0 as usize) * 3;
            pixels.extend_from_slice(&self.pixels[a..a + cw as usize * 3]);
        }
        PageImage {
            width_px: cw,
            height_px: ch,
            pixels,
            page_index: self.page_index,
        }
    }

    pub fn is_blank(&self) -> bool {
        self.pixels.iter().all(|&v| v == 255)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PagePair {
    pub annotated: PageImage,
    pub control: PageImage,
    pub page_index: usize,
    pub doc_id: String,
}

impl PagePair {
    pub fn dimensions(&self) -> (u32, u32) {
        (self.annotated.width_px, self.annotated.height_px)
    }
}

/// Pairs pages by index, failing atomically on any count or size mismatch.
pub fn pair_pages(
    annotated: Vec<PageImage>,
    control: Vec<PageImage>,
    doc_id: &str,
) -> Result<Vec<PagePair>> {
    if annotated.len() != control.len() || annotated.is_empty() {
        return Err(Error::PageCountMismatch {
            annotated: annotated.len(),
            control: control.len(),
        });
    }
    for (i, (a, c)) in annotated.iter().zip(&control).enumerate() {
        if (a.width_px, a.height_px) != (c.width_px, c.height_px)
            || a.page_index != i
            || c.page_index != i
        {
            return Err(Error::AlignmentBroken {
                page_index: i,
                annotated: (a.width_px, a.height_px),
                control: (c.width_px, c.height_px),
            });
        }
    }
    Ok(annotated
        .into_iter()
        .zip(control)
        .enumerate()
        .map(|(i, (a, c))| PagePair {
            annotated: a,
            control: c,
            page_index: i,
            doc_id: doc_id.to_string(),
        })
        .collect())
}

/// Result of one external tool invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolRun {
    pub status: Option<i32>,
    pub duration_ms: u64,
    pub stderr: String,
}

/// Expands a template into argv. Placeholders may be embedded in larger
/// arguments (`--dest={output}`).
pub fn expand_template(template: &str, vars: &[(&str, String)]) -> Result<Vec<String>> {
    let words = shell_words::split(template)
        .map_err(|e| Error::Config(format!("bad command template '{template}': {e}")))?;
    if words.is_empty() {
        return Err(Error::Config("empty command template".into()));
    }
    Ok(words
        .into_iter()
        .map(|w| {
            vars.iter()
                .fold(w, |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
        })
        .collect())
}

/// Runs argv in `cwd` with a wall-clock limit; stdout is discarded and the
/// tail of stderr kept for the manifest.
pub fn run_tool(argv: &[String], cwd: &Path, timeout: Duration) -> Result<ToolRun> {
    let started = Instant::now();
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::RenderFailed(format!("cannot start {}: {e}", argv[0])))?;
    let mut stderr_pipe = child.stderr.take().expect("stderr piped");
    let reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr_pipe.read_to_end(&mut buf);
        buf
    });
    let status = match child
        .wait_timeout(timeout)
        .map_err(|e| Error::RenderFailed(e.to_string()))?
    {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(Error::RenderFailed(format!(
                "{} timed out after {}s",
                argv[0],
                timeout.as_secs()
            )));
        }
    };
    let stderr = reader.join().unwrap_or_default();
    let stderr = String::from_utf8_lossy(&stderr);
    let tail: String = {
        let chars: Vec<char> = stderr.chars().collect();
        chars[chars.len().saturating_sub(2000)..].iter().collect()
    };
    Ok(ToolRun {
        status: status.code(),
        duration_ms: started.elapsed().as_millis() as u64,
        stderr: tail,
    })
}

fn program_on_path(program: &str) -> bool {
    let p = Path::new(program);
    if p.components().count() > 1 {
        return p.is_file();
    }
    std::env::var_os("PATH")
        .map(|paths| std::env::split_paths(&paths).any(|dir| dir.join(program).is_file()))
        .unwrap_or(false)
}

/// Checks that every configured tool resolves to an executable.
pub fn probe_tools(cfg: &RenderConfig) -> Result<()> {
    cfg.validate()?;
    let mut templates = vec![&cfg.word_to_pdf_cmd, &cfg.latex_to_pdf_cmd, &cfg.rasterize_cmd];
    if !cfg.latex_to_xml_cmd.is_empty() {
        templates.push(&cfg.latex_to_xml_cmd);
    }
    for t in templates {
        let argv = expand_template(t, &[])?;
        if !program_on_path(&argv[0]) {
            return Err(Error::ToolProbe(format!("'{}' not found", argv[0])));
        }
    }
    Ok(())
}

/// A source document handed to a converter.
#[derive(Debug, Clone)]
pub struct RenderInput<'a> {
    pub bytes: &'a [u8],
    pub kind: SourceKind,
    /// File stem used inside the job directory; output is `<stem>.pdf`.
    pub stem: &'a str,
    /// Sibling files (figures, includes) copied next to the input.
    pub resource_dir: Option<&'a Path>,
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub pdf: Vec<u8>,
    pub run: ToolRun,
}

fn copy_resources(from: &Path, to: &Path, skip: &Path) -> Result<()> {
    for entry in WalkDir::new(from).min_depth(1) {
        let entry = entry.map_err(|e| Error::RenderFailed(format!("copying resources: {e}")))?;
        let rel = entry.path().strip_prefix(from).expect("walk stays under root");
        let dest = to.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&dest).map_err(|e| Error::io(&dest, e))?;
        } else if entry.file_type().is_file() && rel != skip {
            std::fs::copy(entry.path(), &dest).map_err(|e| Error::io(&dest, e))?;
        }
    }
    Ok(())
}

fn safe_stem(stem: &str) -> String {
    let s: String = stem
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "doc".into()
    } else {
        s
    }
}

pub fn render_to_pdf(input: &RenderInput<'_>, cfg: &RenderConfig) -> Result<RenderOutput> {
    let template = match input.kind {
        SourceKind::Word => &cfg.word_to_pdf_cmd,
        SourceKind::Latex => &cfg.latex_to_pdf_cmd,
    };
    let job = tempfile::Builder::new()
        .prefix("tablelabel-render-")
        .tempdir()
        .map_err(|e| Error::RenderFailed(format!("temp dir: {e}")))?;
    let src_dir = job.path().join("src");
    let out_dir = job.path().join("out");
    for d in [&src_dir, &out_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let stem = safe_stem(input.stem);
    let file_name = format!("{stem}.{}", input.kind.extension());
    if let Some(res) = input.resource_dir {
        copy_resources(res, &src_dir, Path::new(&file_name))?;
    }
    let input_path = src_dir.join(&file_name);
    std::fs::write(&input_path, input.bytes).map_err(|e| Error::io(&input_path, e))?;
    let output_path = out_dir.join(format!("{stem}.pdf"));

    let argv = expand_template(
        template,
        &[
            ("input", input_path.display().to_string()),
            ("output", output_path.display().to_string()),
            ("outdir", out_dir.display().to_string()),
            ("dpi", cfg.dpi.to_string()),
        ],
    )?;
    let run = run_tool(&argv, &src_dir, Duration::from_secs(cfg.timeout_s))?;
    if run.status != Some(0) {
        return Err(Error::RenderFailed(format!(
            "{} exited with {:?}: {}",
            argv[0],
            run.status,
            last_line(&run.stderr)
        )));
    }
    let pdf = std::fs::read(&output_path).map_err(|_| {
        Error::RenderFailed(format!("{} produced no {}", argv[0], output_path.display()))
    })?;
    Ok(RenderOutput { pdf, run })
}

fn last_line(s: &str) -> &str {
    s.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("")
}

/// Rasterizes every page at `cfg.dpi` through the configured tool, which
/// must write one PNG per page into `{outdir}`.
pub fn rasterize(pdf: &[u8], cfg: &RenderConfig) -> Result<Vec<PageImage>> {
    let job = tempfile::Builder::new()
        .prefix("tablelabel-raster-")
        .tempdir()
        .map_err(|e| Error::RasterFailed(format!("temp dir: {e}")))?;
    let input = job.path().join("input.pdf");
    let out_dir = job.path().join("pages");
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    std::fs::write(&input, pdf).map_err(|e| Error::io(&input, e))?;
    let argv = expand_template(
        &cfg.rasterize_cmd,
        &[
            ("input", input.display().to_string()),
            ("output", out_dir.join("page.png").display().to_string()),
            ("outdir", out_dir.display().to_string()),
            ("dpi", cfg.dpi.to_string()),
        ],
    )?;
    let run = run_tool(&argv, job.path(), Duration::from_secs(cfg.timeout_s))
        .map_err(|e| Error::RasterFailed(e.to_string()))?;
    if run.status != Some(0) {
        return Err(Error::RasterFailed(format!(
            "{} exited with {:?}: {}",
            argv[0],
            run.status,
            last_line(&run.stderr)
        )));
    }
    let pages = page_files(&out_dir)?;
    if pages.is_empty() {
        return Err(Error::RasterFailed("rasterizer wrote no pages".into()));
    }
    pages
        .iter()
        .enumerate()
        .map(|(i, p)| PageImage::load_png(p, i).map_err(|e| Error::RasterFailed(e.to_string())))
        .collect()
}

/// PNG files ordered by the last run of digits in their names, so
/// `page-2.png` sorts before `page-10.png`.
fn page_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(u64, PathBuf)> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .map(|p| {
            let stem = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let digits: String = stem
                .chars()
                .rev()
                .skip_while(|c| !c.is_ascii_digit())
                .take_while(|c| c.is_ascii_digit())
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .collect();
            (digits.parse().unwrap_or(0), p)
        })
        .collect();
    files.sort();
    Ok(files.into_iter().map(|(_, p)| p).collect())
}

/// Runs the LaTeX → XML converter on a source, returning the XML bytes.
pub fn convert_latex_to_xml(input: &RenderInput<'_>, cfg: &RenderConfig) -> Result<Vec<u8>> {
    if cfg.latex_to_xml_cmd.is_empty() {
        return Err(Error::Config("no latex_to_xml_cmd configured".into()));
    }
    let job = tempfile::Builder::new()
        .prefix("tablelabel-xml-")
        .tempdir()
        .map_err(|e| Error::RenderFailed(format!("temp dir: {e}")))?;
    let src_dir = job.path().join("src");
    std::fs::create_dir_all(&src_dir).map_err(|e| Error::io(&src_dir, e))?;
    let stem = safe_stem(input.stem);
    let file_name = format!("{stem}.tex");
    if let Some(res) = input.resource_dir {
        copy_resources(res, &src_dir, Path::new(&file_name))?;
    }
    let input_path = src_dir.join(&file_name);
    std::fs::write(&input_path, input.bytes).map_err(|e| Error::io(&input_path, e))?;
    let output_path = job.path().join(format!("{stem}.xml"));
    let argv = expand_template(
        &cfg.latex_to_xml_cmd,
        &[
            ("input", input_path.display().to_string()),
            ("output", output_path.display().to_string()),
            ("outdir", job.path().display().to_string()),
            ("dpi", cfg.dpi.to_string()),
        ],
    )?;
    let run = run_tool(&argv, &src_dir, Duration::from_secs(cfg.timeout_s))?;
    if run.status != Some(0) {
        return Err(Error::RenderFailed(format!(
            "{} exited with {:?}: {}",
            argv[0],
            run.status,
            last_line(&run.stderr)
        )));
    }
    std::fs::read(&output_path).map_err(|e| Error::io(&output_path, e))
}
