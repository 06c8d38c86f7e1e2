//! `fixture-typeset INPUT OUTDIR`: writes `OUTDIR/<stem>.pdf`.

use std::path::Path;
use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() != 2 {
        eprintln!("usage: fixture-typeset INPUT OUTDIR");
        return ExitCode::from(2);
    }
    let input = Path::new(&args[0]);
    let stem = input.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    match tablelabel_fixtures::typeset_file(input) {
        Ok(pdf) => {
            let out = Path::new(&args[1]).join(format!("{stem}.pdf"));
            if let Err(e) = std::fs::write(&out, pdf) {
                eprintln!("{}: {e}", out.display());
                return ExitCode::FAILURE;
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            eprintln!("No pages of output.");
            ExitCode::FAILURE
        }
    }
}
