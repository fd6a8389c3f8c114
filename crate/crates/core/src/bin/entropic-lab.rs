use std::process::ExitCode;

fn main() -> ExitCode {
    entropic_lab::cli::main()
}
