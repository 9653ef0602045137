use clap::Parser;

fn main() {
    let cli = metaadapt::cli::Cli::parse();
    std::process::exit(metaadapt::cli::run(cli));
}
