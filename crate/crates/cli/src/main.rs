use std::process::ExitCode;

fn main() -> ExitCode {
    let outcome = forced_surface_cli::run_from(std::env::args_os());
    if outcome.code == forced_surface_cli::EXIT_OK {
        print!("{}", outcome.summary);
    } else {
        eprint!("{}", outcome.summary);
    }
    if !outcome.summary.ends_with('\n') {
        println!();
    }
    for path in &outcome.artifacts {
        println!("wrote {}", path.display());
    }
    ExitCode::from(outcome.code as u8)
}
