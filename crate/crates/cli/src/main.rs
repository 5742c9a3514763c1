use clap::Parser;

use splitnoise_cli::{run, Cli, EXIT_OK};

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("splitnoise {}: {e}", cli.command.name());
            e.exit_code()
        }
    };
    std::process::exit(code);
}
