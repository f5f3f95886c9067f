use std::process::ExitCode;

fn main() -> ExitCode {
    noisy_polarizer::cli::main_entry()
}
