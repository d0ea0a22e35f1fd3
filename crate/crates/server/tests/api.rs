use std::path::Path;
use std::sync::Arc;

use textlab_client::{Client, ClientError, CorpusUpload};
use textlab_core::classroom::{AnalysisKind, Classroom, SeededEntropy, Settings, SortOrder};
use textlab_core::fixture;
use textlab_core::store::{MemoryJournal, Store};
use textlab_core::textclf::{Algorithm, WordSort};
use textlab_server::{bind, serve_classroom, Config, ServeError};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

struct Running {
    base: String,
    stop: Option<oneshot::Sender<()>>,
    handle: Option<JoinHandle<()>>,
}

impl Running {
    fn client(&self) -> Client {
        Client::new(self.base.clone())
    }

    async fn stop(mut self) {
        self.stop.take().unwrap().send(()).ok();
        self.handle.take().unwrap().await.unwrap();
    }
}

async fn start(config: Config) -> Running {
    let server = bind(config).await.expect("server starts");
    start_server(server)
}

fn start_server(server: textlab_server::Server) -> Running {
    let base = format!("http://{}", server.local_addr());
    let (tx, rx) = oneshot::channel::<()>();
    let handle = tokio::spawn(async move {
        server
            .run(async {
                rx.await.ok();
            })
            .await
            .unwrap();
    });
    Running {
        base,
        stop: Some(tx),
        handle: Some(handle),
    }
}

fn seed(dir: &Path) -> fixture::Installed {
    let store = Store::create(dir, false).unwrap();
    let classroom = Classroom::recover(
        Settings::default(),
        Arc::new(store),
        Box::new(SeededEntropy::new(fixture::SEED, fixture::epoch())),
        Vec::new(),
    )
    .unwrap();
    fixture::install(&classroom, fixture::SEED).unwrap()
}

async fn login(running: &Running, user: &str) -> Client {
    let mut client = running.client();
    client.login(user, &fixture::password_for(user)).await.unwrap();
    client
}

fn code(err: ClientError) -> String {
    err.code().unwrap_or("<none>").to_string()
}

#[tokio::test]
async fn health_reports_version() {
    let dir = tempfile::tempdir().unwrap();
    let running = start(Config::ephemeral(dir.path())).await;
    let health = running.client().health().await.unwrap();
    assert_eq!(health.version, env!("CARGO_PKG_VERSION"));
    running.stop().await;
}

#[tokio::test]
async fn second_server_on_same_port_fails() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = bind(Config::ephemeral(a.path())).await.unwrap();
    let port = first.local_addr().port();
    let mut config = Config::ephemeral(b.path());
    config.port = port;
    match bind(config).await {
        Err(ServeError::PortInUse { port: p }) => assert_eq!(p, port),
        Err(other) => panic!("expected PortInUse, got {other}"),
        Ok(_) => panic!("expected PortInUse, got a server"),
    }
}

#[tokio::test]
async fn second_server_on_same_store_fails() {
    let dir = tempfile::tempdir().unwrap();
    let _first = bind(Config::ephemeral(dir.path())).await.unwrap();
    assert!(matches!(bind(Config::ephemeral(dir.path())).await, Err(ServeError::StoreLocked(_))));
}

#[tokio::test]
async fn corrupt_store_refuses_to_start() {
    let dir = tempfile::tempdir().unwrap();
    seed(dir.path());
    let wal = dir.path().join("wal.jsonl");
    let mut lines: Vec<String> = std::fs::read_to_string(&wal).unwrap().lines().map(String::from).collect();
    lines[1] = "{not json".into();
    std::fs::write(&wal, lines.join("\n") + "\n").unwrap();
    match bind(Config::ephemeral(dir.path())).await {
        Err(e @ ServeError::CorruptStore { .. }) => assert!(e.to_string().contains("backup")),
        Err(other) => panic!("expected CorruptStore, got {other}"),
        Ok(_) => panic!("expected CorruptStore, got a server"),
    }
}

#[tokio::test]
async fn login_failures_are_indistinguishable() {
    let dir = tempfile::tempdir().unwrap();
    seed(dir.path());
    let running = start(Config::ephemeral(dir.path())).await;
    let mut client = running.client();
    let wrong = client.login("teacher", "nope").await.unwrap_err();
    let unknown = client.login("nobody", "nope").await.unwrap_err();
    assert_eq!(wrong.to_string(), unknown.to_string());
    assert_eq!(wrong.status(), Some(401));
    assert_eq!(code(wrong), "BAD_CREDENTIALS");
    let ok = client.login("teacher", &fixture::password_for("teacher")).await.unwrap();
    assert_eq!(ok.token.len(), 22);
    running.stop().await;
}

#[tokio::test]
async fn protected_endpoints_need_a_session() {
    let dir = tempfile::tempdir().unwrap();
    let running = start(Config::ephemeral(dir.path())).await;
    let anon = running.client();
    assert_eq!(code(anon.projects().await.unwrap_err()), "UNAUTHENTICATED");
    assert_eq!(code(anon.with_token("forged").me().await.unwrap_err()), "UNAUTHENTICATED");
    let raw = reqwest::get(format!("{}/api/v1/nowhere", running.base)).await.unwrap();
    assert_eq!(raw.status(), 404);
    running.stop().await;
}

#[tokio::test]
async fn expired_sessions_get_401() {
    let dir = tempfile::tempdir().unwrap();
    seed(dir.path());
    let mut config = Config::ephemeral(dir.path());
    config.session_ttl_minutes = 0.005;
    let running = start(config).await;
    let client = login(&running, "teacher").await;
    assert!(client.projects().await.is_ok());
    tokio::time::sleep(std::time::Duration::from_millis(400)).await;
    let err = client.projects().await.unwrap_err();
    assert_eq!(err.status(), Some(401));
    assert_eq!(code(err), "SESSION_EXPIRED");
    running.stop().await;
}

#[tokio::test]
async fn request_cap_returns_429() {
    let dir = tempfile::tempdir().unwrap();
    seed(dir.path());
    let mut config = Config::ephemeral(dir.path());
    config.request_cap = 3;
    let running = start(config).await;
    let client = login(&running, "teacher").await;
    for _ in 0..3 {
        client.me().await.unwrap();
    }
    let err = client.me().await.unwrap_err();
    assert_eq!(err.status(), Some(429));
    assert_eq!(code(err), "RATE_LIMITED");
    running.stop().await;
}

#[tokio::test]
async fn teacher_only_operations_reject_students() {
    let dir = tempfile::tempdir().unwrap();
    let installed = seed(dir.path());
    let running = start(Config::ephemeral(dir.path())).await;
    let student = login(&running, "student02").await;
    assert_eq!(code(student.create_group("mine", None).await.unwrap_err()), "FORBIDDEN");
    assert_eq!(code(student.corpora().await.unwrap_err()), "FORBIDDEN");
    let upload = CorpusUpload {
        file_name: "x.csv".into(),
        bytes: b"text,category\na,b\n".to_vec(),
        format: None,
        name: None,
        default_category: None,
    };
    assert_eq!(code(student.upload_corpus(upload).await.unwrap_err()), "FORBIDDEN");
    let ids: Vec<_> = installed.corpora.iter().map(|c| c.id).collect();
    assert_eq!(
        code(student.create_project("p", "", installed.group.id, &ids).await.unwrap_err()),
        "FORBIDDEN"
    );
    assert_eq!(
        code(student
            .create_analysis(installed.project.id, AnalysisKind::SharedModel, None, None)
            .await
            .unwrap_err()),
        "FORBIDDEN"
    );
    // Another student's personal analysis stays private, labels and terms included.
    let personal = installed.personal.id;
    assert_eq!(code(student.analysis(personal).await.unwrap_err()), "FORBIDDEN");
    assert_eq!(code(student.next_document(personal).await.unwrap_err()), "FORBIDDEN");
    assert_eq!(code(student.terms(personal, None).await.unwrap_err()), "FORBIDDEN");
    let own = student
        .create_analysis(installed.project.id, AnalysisKind::Personal, None, Some(1))
        .await
        .unwrap();
    assert_eq!(own.pool_size, 2 * fixture::DOCS_PER_CORPUS);
    running.stop().await;
}

#[tokio::test]
async fn corpus_upload_formats_and_limits() {
    let dir = tempfile::tempdir().unwrap();
    seed(dir.path());
    let mut config = Config::ephemeral(dir.path());
    config.upload_cap_mb = 1;
    let running = start(config).await;
    let teacher = login(&running, "teacher").await;

    let csv = teacher
        .upload_corpus(CorpusUpload {
            file_name: "tweets.csv".into(),
            bytes: b"text\nhello there\nsecond one\n".to_vec(),
            format: None,
            name: None,
            default_category: Some("cedar".into()),
        })
        .await
        .unwrap();
    assert_eq!((csv.name.as_str(), csv.documents), ("tweets", 2));
    assert_eq!(csv.categories, ["cedar"]);

    let json = teacher
        .upload_corpus(CorpusUpload {
            file_name: "data.txt".into(),
            bytes: br#"[{"text":"a","category":"x"},{"text":"b","category":"y"}]"#.to_vec(),
            format: Some("json".into()),
            name: Some("mixed".into()),
            default_category: None,
        })
        .await
        .unwrap();
    assert_eq!(json.categories, ["x", "y"]);

    let missing = teacher
        .upload_corpus(CorpusUpload {
            file_name: "a.csv".into(),
            bytes: b"text\nhello\n".to_vec(),
            format: None,
            name: None,
            default_category: None,
        })
        .await
        .unwrap_err();
    assert_eq!(code(missing), "MISSING_CATEGORY");

    let long = format!("text,category\n{},a\n", "x".repeat(10_001));
    let err = teacher
        .upload_corpus(CorpusUpload {
            file_name: "long.csv".into(),
            bytes: long.into_bytes(),
            format: None,
            name: None,
            default_category: None,
        })
        .await
        .unwrap_err();
    assert_eq!(code(err), "DOCUMENT_TOO_LONG");

    let huge = format!("text,category\n{}", "short text,a\n".repeat(120_000));
    let err = teacher
        .upload_corpus(CorpusUpload {
            file_name: "huge.csv".into(),
            bytes: huge.into_bytes(),
            format: None,
            name: None,
            default_category: None,
        })
        .await
        .unwrap_err();
    assert_eq!(err.status(), Some(413));
    running.stop().await;
}

#[tokio::test]
async fn labeling_never_leaks_gold_labels() {
    let dir = tempfile::tempdir().unwrap();
    let installed = seed(dir.path());
    let running = start(Config::ephemeral(dir.path())).await;
    let student = login(&running, "student03").await;
    let id = installed.shared_texts.id;
    let raw = reqwest::Client::new()
        .get(format!("{}/api/v1/analyses/{id}/next", running.base))
        .bearer_auth(student.token().unwrap())
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    let value: serde_json::Value = serde_json::from_str(&raw).unwrap();
    assert_eq!(value["document"].as_object().unwrap().keys().collect::<Vec<_>>(), ["id", "text"]);
    assert_eq!(value.as_object().unwrap().keys().count(), 3);
    assert!(!raw.contains("\"category\""));
    let next = student.next_document(id).await.unwrap();
    assert_eq!(next.remaining, 20);
    // Empty model: the estimate is the prior, which is uniform without documents.
    assert_eq!(next.estimate.probabilities, vec![0.5, 0.5]);
    running.stop().await;
}

#[tokio::test]
async fn labels_terms_runs_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let installed = seed(dir.path());
    let running = start(Config::ephemeral(dir.path())).await;
    let teacher = login(&running, "teacher").await;
    let student = login(&running, "student04").await;
    let id = installed.shared_model.id;

    assert_eq!(code(student.word_stats(id, WordSort::Count).await.unwrap_err()), "NO_LABELS_YET");
    let next = student.next_document(id).await.unwrap();
    let resp = student.submit_label(id, next.document.id, "alder").await.unwrap();
    let again = student.submit_label(id, next.document.id, "birch").await.unwrap_err();
    assert_eq!(again.status(), Some(409));
    assert_eq!(code(again), "ALREADY_LABELED");
    assert_eq!(code(student.submit_label(id, next.document.id, "oak").await.unwrap_err()), "UNKNOWN_CATEGORY");

    let rows = teacher.label_stats(id, SortOrder::Desc).await.unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].correct_count, u64::from(resp.correct));
    let words = student.word_stats(id, WordSort::Predictiveness).await.unwrap();
    assert_eq!(words.documents, 1);

    assert_eq!(code(student.run(id, Algorithm::Nb).await.unwrap_err()), "NO_TERMS");
    let missing = student.set_terms(id, &[("soul".into(), "".into())]).await.unwrap_err();
    assert_eq!(code(missing), "MISSING_REASON");
    let bad = student.set_terms(id, &[("**".into(), "r".into())]).await.unwrap_err();
    assert_eq!(code(bad), "INVALID_PATTERN");
    student.set_terms(id, &[("zzzz*".into(), "nothing".into())]).await.unwrap();
    assert_eq!(code(student.run(id, Algorithm::Nb).await.unwrap_err()), "NO_FEATURES_MATCHED");

    student.set_terms(id, &fixture::planted_terms()).await.unwrap();
    assert_eq!(student.terms(id, None).await.unwrap().len(), 12);
    let first = student.run(id, Algorithm::Nb).await.unwrap();
    let second = student.run(id, Algorithm::Nb).await.unwrap();
    assert_eq!((first.run, second.run), (1, 2));
    assert_eq!(first.report, second.report);
    assert_eq!(first.report.metrics.accuracy, Some(1.0));
    let logreg = student.run(id, Algorithm::Logreg).await.unwrap();
    assert_eq!(logreg.report.algorithm, Algorithm::Logreg);

    let confusion = student.confusion(id, 1).await.unwrap();
    assert_eq!(confusion.confusion, first.report.confusion);
    let other = login(&running, "student05").await;
    assert_eq!(code(other.confusion(id, 1).await.unwrap_err()), "FORBIDDEN");
    assert_eq!(code(other.terms(id, Some(next_user(&student).await)).await.unwrap_err()), "FORBIDDEN");
    assert_eq!(teacher.runs(id).await.unwrap().len(), 3);
    let board = other.leaderboard(id).await.unwrap();
    assert_eq!(board[0].username, "student04");
    assert_eq!(board[0].runs, 3);
    running.stop().await;
}

async fn next_user(client: &Client) -> textlab_core::classroom::UserId {
    client.me().await.unwrap().id
}

#[tokio::test]
async fn signup_link_creates_a_student() {
    let dir = tempfile::tempdir().unwrap();
    let installed = seed(dir.path());
    let running = start(Config::ephemeral(dir.path())).await;
    let anon = running.client();
    let groups = login(&running, "teacher").await.groups().await.unwrap();
    assert_eq!(groups[0].signup_url, format!("/api/v1{}", installed.group.signup_path()));
    let created = anon.signup(&installed.group.signup_token, "newbie", "pw").await.unwrap();
    let taken = anon.signup(&installed.group.signup_token, "newbie", "pw").await.unwrap_err();
    assert_eq!(code(taken), "USERNAME_TAKEN");
    assert_eq!(code(anon.signup("bogus", "x", "pw").await.unwrap_err()), "UNKNOWN_TOKEN");
    let mut me = running.client();
    me.login("newbie", "pw").await.unwrap();
    assert_eq!(me.me().await.unwrap().id, created.user_id);
    assert_eq!(me.projects().await.unwrap().len(), 1);
    running.stop().await;
}

#[tokio::test]
async fn full_storage_surfaces_as_503() {
    let journal = Arc::new(MemoryJournal::default());
    let classroom = Arc::new(Classroom::new(
        Settings::default(),
        journal.clone(),
        Box::new(SeededEntropy::new(1, fixture::epoch())),
    ));
    fixture::install(&classroom, fixture::SEED).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let config = Config::ephemeral("unused");
    let running = start_server(serve_classroom(listener, classroom.clone(), &config));
    let student = login(&running, "student06").await;
    let before = classroom.dump();
    journal.set_failing(true);
    let next = student.next_document(fixture_ids(&classroom)).await.unwrap();
    let err = student
        .submit_label(fixture_ids(&classroom), next.document.id, "alder")
        .await
        .unwrap_err();
    assert_eq!(err.status(), Some(503));
    assert_eq!(code(err), "STORAGE_FULL");
    assert_eq!(classroom.dump(), before);
    journal.set_failing(false);
    student
        .submit_label(fixture_ids(&classroom), next.document.id, "alder")
        .await
        .unwrap();
    running.stop().await;
}

fn fixture_ids(classroom: &Classroom) -> textlab_core::classroom::AnalysisId {
    let teacher = classroom.user_by_name("teacher").unwrap().id;
    let project = classroom.projects_for(teacher).unwrap()[0].id;
    classroom
        .analyses_for(teacher, project)
        .unwrap()
        .into_iter()
        .find(|a| a.kind == AnalysisKind::SharedTexts)
        .unwrap()
        .id
}

#[tokio::test]
async fn state_survives_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let installed = seed(dir.path());
    let running = start(Config::ephemeral(dir.path())).await;
    let student = login(&running, "student07").await;
    let id = installed.shared_texts.id;
    for _ in 0..5 {
        let next = student.next_document(id).await.unwrap();
        student.submit_label(id, next.document.id, "birch").await.unwrap();
    }
    student.set_terms(id, &fixture::planted_terms()).await.unwrap();
    student.run(id, Algorithm::Nb).await.unwrap();
    running.stop().await;
    let before = Classroom::open_read_only(dir.path(), Settings::default()).unwrap().dump();

    let restarted = start(Config::ephemeral(dir.path())).await;
    let student = login(&restarted, "student07").await;
    assert_eq!(student.next_document(id).await.unwrap().remaining, 15);
    assert_eq!(student.runs(id).await.unwrap().len(), 1);
    restarted.stop().await;
    let after = Classroom::open_read_only(dir.path(), Settings::default()).unwrap().dump();
    assert_eq!(serde_json::to_string(&before).unwrap(), serde_json::to_string(&after).unwrap());
}
