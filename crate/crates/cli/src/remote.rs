use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Subcommand};
use serde::Serialize;
use textlab_client::{Client, CorpusUpload};
use textlab_core::classroom::{AnalysisId, ProjectId, SortOrder};
use textlab_core::corpus::DocId;
use textlab_core::textclf::Algorithm;

use crate::eval::{read_terms, render, Format};
use crate::failure::Failure;

#[derive(Debug, Args)]
pub struct RemoteArgs {
    /// Server origin.
    #[arg(long, env = "TEXTLAB_URL", default_value = "http://127.0.0.1:8080")]
    pub url: String,

    /// Session token from `remote login`.
    #[arg(long, env = "TEXTLAB_TOKEN", conflicts_with = "user")]
    pub token: Option<String>,

    /// Log in as this user before the command.
    #[arg(long)]
    pub user: Option<String>,

    /// Read the password from the first line of stdin instead of prompting.
    #[arg(long)]
    pub password_stdin: bool,

    #[command(subcommand)]
    pub command: RemoteCommand,
}

#[derive(Debug, Subcommand)]
pub enum RemoteCommand {
    Health,
    /// Log in and print the session token.
    Login,
    /// Create a student account through a group's signup token.
    Signup { signup_token: String, username: String },
    Me,
    Groups,
    Corpora,
    /// Upload a CSV or JSON corpus.
    Upload {
        file: PathBuf,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        default_category: Option<String>,
    },
    Projects,
    Analyses { project: u64 },
    /// Show the next unlabeled document.
    Next { analysis: u64 },
    Label { analysis: u64, document: u64, category: String },
    /// Replace your terms from a terms file.
    Terms { analysis: u64, file: PathBuf },
    /// Run your terms and print the report.
    Run {
        analysis: u64,
        #[arg(long, default_value = "nb", value_parser = |s: &str| s.parse::<Algorithm>())]
        algorithm: Algorithm,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Per-document label agreement.
    Stats {
        analysis: u64,
        #[arg(long)]
        desc: bool,
    },
    Leaderboard { analysis: u64 },
}

fn print_json(out: &mut impl Write, value: &impl Serialize) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn password(from_stdin: bool, prompt: &str) -> Result<String, Failure> {
    if from_stdin {
        let mut line = String::new();
        std::io::stdin().read_line(&mut line)?;
        return Ok(line.trim_end_matches(['\r', '\n']).to_string());
    }
    Ok(rpassword::prompt_password(prompt)?)
}

pub async fn run(args: RemoteArgs, out: &mut impl Write) -> Result<(), Failure> {
    let mut client = Client::new(&args.url);
    if let Some(t) = &args.token {
        client = client.with_token(t);
    }
    if let RemoteCommand::Signup { signup_token, username } = &args.command {
        let pw = password(args.password_stdin, "New password: ")?;
        return print_json(out, &client.signup(signup_token, username, &pw).await?);
    }
    if let Some(user) = &args.user {
        let pw = password(args.password_stdin, "Password: ")?;
        client.login(user, &pw).await?;
    }
    match args.command {
        RemoteCommand::Signup { .. } => unreachable!("handled above"),
        RemoteCommand::Health => print_json(out, &client.health().await?),
        RemoteCommand::Login => {
            let token = client
                .token()
                .ok_or_else(|| Failure::config("give --user to log in"))?;
            writeln!(out, "{token}")?;
            Ok(())
        }
        RemoteCommand::Me => print_json(out, &client.me().await?),
        RemoteCommand::Groups => print_json(out, &client.groups().await?),
        RemoteCommand::Corpora => print_json(out, &client.corpora().await?),
        RemoteCommand::Upload {
            file,
            name,
            default_category,
        } => {
            let bytes = std::fs::read(&file).map_err(|e| Failure::config(format!("cannot read {}: {e}", file.display())))?;
            let upload = CorpusUpload {
                file_name: file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                bytes,
                format: None,
                name,
                default_category,
            };
            print_json(out, &client.upload_corpus(upload).await?)
        }
        RemoteCommand::Projects => print_json(out, &client.projects().await?),
        RemoteCommand::Analyses { project } => print_json(out, &client.analyses(ProjectId(project)).await?),
        RemoteCommand::Next { analysis } => print_json(out, &client.next_document(AnalysisId(analysis)).await?),
        RemoteCommand::Label {
            analysis,
            document,
            category,
        } => print_json(
            out,
            &client.submit_label(AnalysisId(analysis), DocId(document), &category).await?,
        ),
        RemoteCommand::Terms { analysis, file } => {
            let terms = read_terms(&file)?;
            print_json(out, &client.set_terms(AnalysisId(analysis), &terms).await?)
        }
        RemoteCommand::Run {
            analysis,
            algorithm,
            format,
        } => {
            let resp = client.run(AnalysisId(analysis), algorithm).await?;
            render(&resp.report, format, out)
        }
        RemoteCommand::Stats { analysis, desc } => {
            let order = if desc { SortOrder::Desc } else { SortOrder::Asc };
            print_json(out, &client.label_stats(AnalysisId(analysis), order).await?)
        }
        RemoteCommand::Leaderboard { analysis } => print_json(out, &client.leaderboard(AnalysisId(analysis)).await?),
    }
}
