use progfront_cli::CliError;

fn main() {
    if let Err(e) = progfront_cli::run(std::env::args_os()) {
        match &e {
            // clap formats its own messages
            CliError::Usage(msg) if msg.starts_with("error:") => eprint!("{msg}"),
            _ => eprintln!("error: {e}"),
        }
        std::process::exit(e.exit_code());
    }
}
