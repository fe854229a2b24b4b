use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = nvq_cli::Cli::parse();
    match nvq_cli::run(&cli) {
        Ok(true) => {}
        Ok(false) => {
            eprintln!("nvq: thresholds not met");
            std::process::exit(1);
        }
        Err(e) => {
            eprintln!("nvq: {e:#}");
            std::process::exit(2);
        }
    }
}
