use clap::Parser;

fn main() {
    let cli = stokeslab_cli::Cli::parse();
    std::process::exit(stokeslab_cli::entry(cli));
}
