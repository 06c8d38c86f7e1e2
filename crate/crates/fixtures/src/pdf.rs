//! A deliberately small PDF subset: uncompressed content streams holding
//! only `rg`, `RG`, `w`, `re`, `f` and `S`.

use crate::layout::{RectPt, PAGE_H, PAGE_W};

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Fill { rect: RectPt, rgb: [u8; 3] },
    /// Stroke centered on the rectangle outline.
    Stroke { rect: RectPt, width: f64, rgb: [u8; 3] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Page {
    pub width_pt: f64,
    pub height_pt: f64,
    pub ops: Vec<Op>,
}

fn color(rgb: [u8; 3]) -> String {
    format!(
        "{:.4} {:.4} {:.4}",
        rgb[0] as f64 / 255.0,
        rgb[1] as f64 / 255.0,
        rgb[2] as f64 / 255.0
    )
}

fn content(page: &Page) -> String {
    let mut s = String::new();
    for op in &page.ops {
        match op {
            Op::Fill { rect, rgb } => {
                let y = page.height_pt - rect.y - rect.h;
                s.push_str(&format!(
                    "{} rg\n{:.4} {:.4} {:.4} {:.4} re f\n",
                    color(*rgb),
                    rect.x,
                    y,
                    rect.w,
                    rect.h
                ));
            }
            Op::Stroke { rect, width, rgb } => {
                let y = page.height_pt - rect.y - rect.h;
                s.push_str(&format!(
                    "{} RG\n{:.4} w\n{:.4} {:.4} {:.4} {:.4} re S\n",
                    color(*rgb),
                    width,
                    rect.x,
                    y,
                    rect.w,
                    rect.h
                ));
            }
        }
    }
    s
}

pub fn write_pdf(pages: &[Vec<Op>]) -> Vec<u8> {
    let pages: Vec<Page> = pages
        .iter()
        .map(|ops| Page {
            width_pt: PAGE_W,
            height_pt: PAGE_H,
            ops: ops.clone(),
        })
        .collect();
    write_pages(&pages)
}

pub fn write_pages(pages: &[Page]) -> Vec<u8> {
    let mut objects: Vec<String> = Vec::new();
    let kids: Vec<String> = (0..pages.len()).map(|i| format!("{} 0 R", 3 + 2 * i)).collect();
    objects.push("<< /Type /Catalog /Pages 2 0 R >>".into());
    objects.push(format!(
        "<< /Type /Pages /Kids [{}] /Count {} >>",
        kids.join(" "),
        pages.len()
    ));
    for (i, p) in pages.iter().enumerate() {
        objects.push(format!(
            "<< /Type /Page /Parent 2 0 R /MediaBox [0 0 {:.3} {:.3}] /Contents {} 0 R >>",
            p.width_pt,
            p.height_pt,
            4 + 2 * i
        ));
        let c = content(p);
        objects.push(format!("<< /Length {} >>\nstream\n{}endstream", c.len(), c));
    }
    let mut out = b"%PDF-1.4\n".to_vec();
    let mut offsets = Vec::new();
    for (i, o) in objects.iter().enumerate() {
        offsets.push(out.len());
        out.extend_from_slice(format!("{} 0 obj\n{}\nendobj\n", i + 1, o).as_bytes());
    }
    let xref = out.len();
    out.extend_from_slice(format!("xref\n0 {}\n0000000000 65535 f \n", objects.len() + 1).as_bytes());
    for off in offsets {
        out.extend_from_slice(format!("{off:010} 00000 n \n").as_bytes());
    }
    out.extend_from_slice(
        format!(
            "trailer\n<< /Size {} /Root 1 0 R >>\nstartxref\n{xref}\n%%EOF\n",
            objects.len() + 1
        )
        .as_bytes(),
    );
    out
}

fn objects(text: &str) -> Result<std::collections::BTreeMap<u32, &str>, String> {
    let mut map = std::collections::BTreeMap::new();
    let mut rest = text;
    let mut base = 0;
    while let Some(i) = rest.find(" 0 obj\n") {
        let head = &text[..base + i];
        let num_start = head.rfind('\n').map_or(0, |p| p + 1);
        let num: u32 = head[num_start..]
            .trim()
            .parse()
            .map_err(|_| format!("bad object header at byte {}", base + i))?;
        let body_start = base + i + " 0 obj\n".len();
        let end = text[body_start..]
            .find("\nendobj")
            .ok_or_else(|| format!("object {num} is not terminated"))?;
        map.insert(num, &text[body_start..body_start + end]);
        base = body_start + end;
        rest = &text[base..];
    }
    Ok(map)
}

fn refs(s: &str) -> Vec<u32> {
    let words: Vec<&str> = s.split_whitespace().collect();
    words
        .windows(3)
        .filter(|w| w[1] == "0" && w[2].starts_with('R'))
        .filter_map(|w| w[0].trim_start_matches('[').parse().ok())
        .collect()
}

fn dict_value<'a>(dict: &'a str, key: &str) -> Option<&'a str> {
    let i = dict.find(key)?;
    Some(&dict[i + key.len()..])
}

/// Reads back a PDF produced by [`write_pages`].
pub fn read_pdf(bytes: &[u8]) -> Result<Vec<Page>, String> {
    if !bytes.starts_with(b"%PDF-") {
        return Err("not a PDF file".into());
    }
    let text = std::str::from_utf8(bytes).map_err(|_| "unsupported binary PDF content".to_string())?;
    let objs = objects(text)?;
    let catalog = objs
        .values()
        .find(|o| o.contains("/Type /Catalog"))
        .ok_or("no catalog")?;
    let pages_ref = refs(dict_value(catalog, "/Pages").ok_or("catalog without /Pages")?)
        .first()
        .copied()
        .ok_or("bad /Pages reference")?;
    let pages_obj = objs.get(&pages_ref).ok_or("missing page tree")?;
    let kids_str = dict_value(pages_obj, "/Kids").ok_or("page tree without /Kids")?;
    let kids_str = &kids_str[..kids_str.find(']').ok_or("unterminated /Kids")?];
    let mut pages = Vec::new();
    for kid in refs(&format!("{kids_str} ")) {
        let page = objs.get(&kid).ok_or_else(|| format!("missing page object {kid}"))?;
        let mb = dict_value(page, "/MediaBox [").ok_or("page without /MediaBox")?;
        let nums: Vec<f64> = mb[..mb.find(']').ok_or("bad /MediaBox")?]
            .split_whitespace()
            .map(|n| n.parse::<f64>().map_err(|_| "bad /MediaBox".to_string()))
            .collect::<Result<_, _>>()?;
        if nums.len() != 4 {
            return Err("bad /MediaBox".into());
        }
        let (width_pt, height_pt) = (nums[2] - nums[0], nums[3] - nums[1]);
        let contents = refs(dict_value(page, "/Contents").ok_or("page without /Contents")?)
            .first()
            .copied()
            .ok_or("bad /Contents reference")?;
        let stream = objs.get(&contents).ok_or("missing content stream")?;
        let s = stream.find("stream\n").ok_or("content object has no stream")? + "stream\n".len();
        let e = stream.rfind("endstream").ok_or("unterminated stream")?;
        let ops = parse_content(&stream[s..e], height_pt)?;
        pages.push(Page {
            width_pt,
            height_pt,
            ops,
        });
    }
    Ok(pages)
}

fn parse_content(s: &str, height: f64) -> Result<Vec<Op>, String> {
    let mut stack: Vec<f64> = Vec::new();
    let mut fill = [0u8; 3];
    let mut stroke = [0u8; 3];
    let mut width = 1.0;
    let mut path: Option<RectPt> = None;
    let mut ops = Vec::new();
    let to_rgb = |v: &[f64]| {
        let c = |x: f64| (x.clamp(0.0, 1.0) * 255.0).round() as u8;
        [c(v[0]), c(v[1]), c(v[2])]
    };
    for tok in s.split_whitespace() {
        if let Ok(v) = tok.parse::<f64>() {
            stack.push(v);
            continue;
        }
        let need = |n: usize, stack: &Vec<f64>| {
            if stack.len() < n {
                Err(format!("operator {tok} needs {n} operands"))
            } else {
                Ok(())
            }
        };
        match tok {
            "rg" => {
                need(3, &stack)?;
                fill = to_rgb(&stack[stack.len() - 3..]);
            }
            "RG" => {
                need(3, &stack)?;
                stroke = to_rgb(&stack[stack.len() - 3..]);
            }
            "w" => {
                need(1, &stack)?;
                width = stack[stack.len() - 1];
            }
            "re" => {
                need(4, &stack)?;
                let v = &stack[stack.len() - 4..];
                path = Some(RectPt::new(v[0], height - v[1] - v[3], v[2], v[3]));
            }
            "f" => ops.push(Op::Fill {
                rect: path.take().ok_or("f without a path")?,
                rgb: fill,
            }),
            "S" => ops.push(Op::Stroke {
                rect: path.take().ok_or("S without a path")?,
                width,
                rgb: stroke,
            }),
            other => return Err(format!("unsupported operator {other}")),
        }
        stack.clear();
    }
    Ok(ops)
}
