use clap::Parser;

fn main() {
    let cli = rallycast::args::Cli::parse();
    if let Err(e) = rallycast::execute(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
