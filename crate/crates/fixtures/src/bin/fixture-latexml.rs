//! `fixture-latexml INPUT OUTPUT`: tabulars of a LaTeX source as XML.

use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() != 2 {
        eprintln!("usage: fixture-latexml INPUT OUTPUT");
        return ExitCode::from(2);
    }
    let src = match std::fs::read(&args[0]) {
        Ok(b) => String::from_utf8_lossy(&b).into_owned(),
        Err(e) => {
            eprintln!("{}: {e}", args[0]);
            return ExitCode::FAILURE;
        }
    };
    match tablelabel_fixtures::tex::tex_to_xml(&src) {
        Ok(xml) => match std::fs::write(&args[1], xml) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("{}: {e}", args[1]);
                ExitCode::FAILURE
            }
        },
        Err(e) => {
            eprintln!("Error: {e}");
            ExitCode::FAILURE
        }
    }
}
