use clap::Parser;
use fdshift_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("fdshift: {e}");
        std::process::exit(e.exit_code());
    }
}
