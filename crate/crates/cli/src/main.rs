use clap::Parser;

fn main() -> std::process::ExitCode {
    kforms_cli::main_exit(&kforms_cli::Cli::parse())
}
