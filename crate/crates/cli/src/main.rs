use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let emitted = polymoments_cli::dispatch(std::env::args_os());
    if let Some(msg) = &emitted.diagnostic {
        eprintln!("{msg}");
    }
    let written = match &emitted.out {
        Some(path) => std::fs::write(path, &emitted.document),
        None => std::io::stdout().write_all(emitted.document.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(polymoments_cli::EXIT_USAGE as u8);
    }
    ExitCode::from(emitted.code as u8)
}
