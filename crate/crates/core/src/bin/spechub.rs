use clap::Parser;

fn main() {
    let cli = spechub::cli::Cli::parse();
    if let Err(e) = spechub::cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
