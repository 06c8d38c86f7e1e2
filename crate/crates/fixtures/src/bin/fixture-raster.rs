//! `fixture-raster DPI INPUT PREFIX`: writes `PREFIX-<n>.png` per page.

use std::process::ExitCode;

use tablelabel_fixtures::{pdf, raster};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() != 3 {
        eprintln!("usage: fixture-raster DPI INPUT PREFIX");
        return ExitCode::from(2);
    }
    let Ok(dpi) = args[0].parse::<u32>() else {
        eprintln!("bad dpi '{}'", args[0]);
        return ExitCode::from(2);
    };
    let pages = match std::fs::read(&args[1]).map_err(|e| e.to_string()).and_then(|b| pdf::read_pdf(&b)) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{}: {e}", args[1]);
            return ExitCode::FAILURE;
        }
    };
    for (i, page) in pages.iter().enumerate() {
        let path = format!("{}-{}.png", args[2], i + 1);
        if let Err(e) = raster::rasterize_page(page, dpi).save(&path) {
            eprintln!("{path}: {e}");
            return ExitCode::FAILURE;
        }
    }
    ExitCode::SUCCESS
}
