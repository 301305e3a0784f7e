use clap::Parser;

fn main() {
    let cli = sawlab::Cli::parse();
    if let Err(e) = sawlab::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}
