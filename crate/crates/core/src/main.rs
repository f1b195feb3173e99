use clap::Parser;

fn main() {
    let cli = lipstep::cli::Cli::parse();
    if let Err(err) = lipstep::cli::run(&cli) {
        eprintln!("error: {err}");
        std::process::exit(lipstep::cli::exit_code(&err));
    }
}
