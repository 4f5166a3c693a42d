use clap::Parser;
use epon_cli::Cli;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = epon_cli::run(Cli::parse()) {
        eprintln!("epon-tw: {e}");
        std::process::exit(e.exit_code());
    }
}
