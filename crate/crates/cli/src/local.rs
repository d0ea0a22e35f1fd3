use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Subcommand};
use textlab_core::classroom::{Classroom, Role, SeededEntropy, Settings, SystemEntropy};
use textlab_core::fixture;
use textlab_core::store::Store;
use textlab_core::wire::API_PREFIX;

use crate::failure::Failure;

#[derive(Debug, Args)]
pub struct SeedArgs {
    #[arg(long, env = "TEXTLAB_DATA_DIR", default_value = "./textlab-data")]
    pub data_dir: PathBuf,

    #[arg(long, default_value = fixture::NAME)]
    pub fixture: String,

    #[arg(long, default_value_t = fixture::SEED)]
    pub seed: u64,

    /// Replace an existing store.
    #[arg(long)]
    pub force: bool,

    /// Server origin used when printing the signup link.
    #[arg(long, default_value = "http://127.0.0.1:8080")]
    pub base_url: String,
}

#[derive(Debug, Args)]
pub struct PasswordArgs {
    #[arg(long, env = "TEXTLAB_DATA_DIR", default_value = "./textlab-data")]
    pub data_dir: PathBuf,

    pub username: String,

    /// Read the password from the first line of stdin instead of prompting.
    #[arg(long)]
    pub password_stdin: bool,
}

#[derive(Debug, Subcommand)]
pub enum UserCommand {
    /// Create a teacher account.
    AddTeacher(PasswordArgs),
    /// Set a new password for an existing account.
    ResetPassword(PasswordArgs),
    /// List accounts with their roles and groups.
    List {
        #[arg(long, env = "TEXTLAB_DATA_DIR", default_value = "./textlab-data")]
        data_dir: PathBuf,
    },
}

pub fn seed(args: &SeedArgs, out: &mut impl Write) -> Result<(), Failure> {
    if args.fixture != fixture::NAME {
        return Err(Failure::config(format!(
            "unknown fixture `{}` (available: {})",
            args.fixture,
            fixture::NAME
        )));
    }
    let store = Store::create(&args.data_dir, args.force)?;
    let classroom = Classroom::recover(
        Settings::default(),
        Arc::new(store),
        Box::new(SeededEntropy::new(args.seed, fixture::epoch())),
        Vec::new(),
    )?;
    let installed = fixture::install(&classroom, args.seed)?;

    writeln!(out, "seeded fixture {} (seed {}) in {}", fixture::NAME, args.seed, args.data_dir.display())?;
    writeln!(out)?;
    writeln!(out, "teacher: {} / {}", installed.teacher, fixture::password_for(&installed.teacher))?;
    for s in &installed.students {
        writeln!(out, "student: {s} / {}", fixture::password_for(s))?;
    }
    writeln!(out)?;
    writeln!(out, "group {} \"{}\"", installed.group.id, installed.group.name)?;
    writeln!(
        out,
        "signup link: {}{API_PREFIX}{}",
        args.base_url.trim_end_matches('/'),
        installed.group.signup_path()
    )?;
    for c in &installed.corpora {
        writeln!(out, "corpus {} \"{}\": {} documents, category {}", c.id, c.name, c.documents, c.categories.join(", "))?;
    }
    writeln!(out, "project {} \"{}\"", installed.project.id, installed.project.title)?;
    for a in [&installed.shared_texts, &installed.shared_model, &installed.personal] {
        writeln!(
            out,
            "analysis {} {}: pool {}, train {}, test {}",
            a.id,
            serde_json::to_value(a.kind)?.as_str().unwrap_or_default(),
            a.pool_size,
            a.train_size,
            a.test_size
        )?;
    }
    Ok(())
}

fn read_password(from_stdin: bool) -> Result<String, Failure> {
    if from_stdin {
        let mut line = String::new();
        std::io::stdin().lock().read_line(&mut line)?;
        return Ok(line.trim_end_matches(['\r', '\n']).to_string());
    }
    let first = rpassword::prompt_password("Password: ")?;
    let again = rpassword::prompt_password("Repeat password: ")?;
    if first != again {
        return Err(Failure::config("passwords do not match"));
    }
    Ok(first)
}

fn open_writable(dir: &Path) -> Result<Classroom, Failure> {
    Ok(Classroom::open(dir, Settings::default(), Box::new(SystemEntropy))?)
}

pub fn user(cmd: UserCommand, out: &mut impl Write) -> Result<(), Failure> {
    match cmd {
        UserCommand::AddTeacher(args) => {
            let classroom = open_writable(&args.data_dir)?;
            let password = read_password(args.password_stdin)?;
            let user = classroom.add_teacher(&args.username, &password)?;
            writeln!(out, "created teacher {} (id {})", user.username, user.id)?;
        }
        UserCommand::ResetPassword(args) => {
            let classroom = open_writable(&args.data_dir)?;
            let password = read_password(args.password_stdin)?;
            classroom.reset_password(&args.username, &password)?;
            writeln!(out, "password reset for {}", args.username)?;
        }
        UserCommand::List { data_dir } => {
            let classroom = Classroom::open_read_only(&data_dir, Settings::default())?;
            let mut rows = vec![["username".to_string(), "role".to_string(), "groups".to_string()]];
            for u in classroom.users() {
                let groups = classroom.groups_for(u.id)?;
                let names: Vec<&str> = groups.iter().map(|g| g.name.as_str()).collect();
                let role = match u.role {
                    Role::Teacher => "teacher",
                    Role::Student => "student",
                };
                rows.push([u.username, role.to_string(), names.join(", ")]);
            }
            let w0 = rows.iter().map(|r| r[0].chars().count()).max().unwrap_or(0);
            for [name, role, groups] in rows {
                writeln!(out, "{}", format!("{name:<w0$}  {role:<7}  {groups}").trim_end())?;
            }
        }
    }
    Ok(())
}

pub fn dump(dir: &Path, out: &mut impl Write) -> Result<(), Failure> {
    let classroom = Classroom::open_read_only(dir, Settings::default())?;
    serde_json::to_writer_pretty(&mut *out, &classroom.dump())?;
    writeln!(out)?;
    Ok(())
}
