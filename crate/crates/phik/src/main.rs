use clap::Parser;

fn main() {
    let cli = phik::cli::Cli::parse();
    if let Err(e) = phik::cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
