//! `textlab`: operator command line. Local commands work on a store
//! directory; `remote` talks to a running server.

mod eval;
mod failure;
mod local;
mod remote;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "textlab", version, about = "Classroom text classification: operator tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create a store populated with a demo fixture.
    Seed(local::SeedArgs),
    /// Evaluate search terms offline and print the per-word report.
    Eval(eval::EvalArgs),
    /// Manage accounts in a stopped store.
    #[command(subcommand)]
    User(local::UserCommand),
    /// Print the store's state as canonical JSON.
    Dump {
        #[arg(long, env = "TEXTLAB_DATA_DIR", default_value = "./textlab-data")]
        data_dir: PathBuf,
    },
    /// Run the HTTP service.
    Serve(textlab_server::Config),
    /// Call a running server.
    Remote(remote::RemoteArgs),
}

fn run(cli: Cli) -> Result<(), Failure> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Seed(args) => local::seed(&args, &mut out),
        Command::Eval(args) => {
            let report = eval::evaluate(&args)?;
            eval::render(&report, args.format, &mut out)
        }
        Command::User(cmd) => local::user(cmd, &mut out),
        Command::Dump { data_dir } => local::dump(&data_dir, &mut out),
        Command::Serve(config) => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
                )
                .with_writer(std::io::stderr)
                .init();
            drop(out);
            runtime()?.block_on(textlab_server::serve(config)).map_err(serve_failure)
        }
        Command::Remote(args) => runtime()?.block_on(remote::run(args, &mut out)),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn serve_failure(e: textlab_server::ServeError) -> Failure {
    use textlab_server::ServeError;
    match e {
        ServeError::StoreLocked(_) => Failure::domain("STORE_LOCKED", e),
        other => Failure::config(other),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let _ = std::io::stdout().flush();
            eprintln!("{f}");
            f.exit_code()
        }
    }
}
