use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).format_timestamp(None).init();
    let cli = rapd_cli::Cli::parse();
    if let Err(e) = rapd_cli::run(cli) {
        eprintln!("{}", rapd_cli::error_line(&e));
        std::process::exit(1);
    }
}
