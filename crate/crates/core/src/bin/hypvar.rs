use clap::Parser;
use hypvar::cli::{main_with, RunConfig};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    std::process::exit(main_with(RunConfig::parse()));
}
