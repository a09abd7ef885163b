use std::process::ExitCode;

use clap::Parser;
use metaharvest_cli::{run, Cli, Io};
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .json()
        .with_writer(std::io::stderr)
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn,metaharvest=info")))
        .init();
    let (mut out, mut err) = (std::io::stdout(), std::io::stderr());
    ExitCode::from(run(cli, &mut Io { out: &mut out, err: &mut err }).await)
}
