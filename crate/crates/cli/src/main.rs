use std::process::ExitCode;

use clap::Parser;
use ior_cli::{run, serve_config, Cli, Command, Outcome};
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve {
            config,
            data_dir,
            listen,
            templates,
            rules,
            regions,
        } => serve_config(
            config.as_deref(),
            data_dir,
            listen,
            templates,
            rules,
            regions,
            std::env::vars(),
        )
        .and_then(|config| {
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(ior_server::serve(config))?;
            Ok(Outcome::Success)
        }),
        _ => run(cli, &mut std::io::stdout().lock()),
    };
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
