use clap::Parser;

fn main() -> std::process::ExitCode {
    let cli = rieszlab::cli::Cli::parse();
    std::process::ExitCode::from(rieszlab::cli::run(cli))
}
