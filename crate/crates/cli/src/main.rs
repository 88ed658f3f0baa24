use clap::Parser;

fn main() {
    let cli = tmsq_cli::Cli::parse();
    if let Err(e) = tmsq_cli::run(&cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
