use std::process::ExitCode;

fn main() -> ExitCode {
    cola::harness::cli::main(std::env::args_os())
}
