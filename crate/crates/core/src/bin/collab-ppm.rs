use std::process::ExitCode;

fn main() -> ExitCode {
    collab_ppm::cli::run(std::env::args_os())
}
