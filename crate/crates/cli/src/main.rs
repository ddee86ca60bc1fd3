use clap::Parser;
use qcoin_cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = execute(cli, &mut stdout) {
        eprintln!("qcoin: {e}");
        std::process::exit(e.exit_code());
    }
}
