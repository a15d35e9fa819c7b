use bhc_cli::Command;
use clap::Parser;

#[derive(Parser)]
#[command(name = "bhc", version, about = "Balanced homodyne correlation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = bhc_cli::run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
