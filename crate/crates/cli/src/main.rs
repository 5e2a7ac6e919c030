use clap::Parser;

fn main() {
    let args = brane_cli::Args::parse();
    std::process::exit(brane_cli::run(&args));
}
