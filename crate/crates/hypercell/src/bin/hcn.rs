use std::process::ExitCode;

fn main() -> ExitCode {
    hypercell::cli::run_cli()
}
