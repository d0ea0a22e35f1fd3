//! Users, groups, projects and analyses, and the labeling and modeling
//! workflow that runs inside an analysis.
//!
//! [`Classroom`] is the single entry point. Every mutation is turned into an
//! [`Event`], written to the [`Journal`], and only then applied, so a
//! classroom rebuilt from its journal is identical to the live one.
//! Directory entities (users, groups, corpora, projects) sit behind one
//! reader-writer lock; each analysis has its own mutex.

mod analysis;
mod auth;
mod entropy;
mod events;
mod model;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard, RwLock, RwLockReadGuard, RwLockWriteGuard};

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{
    Corpus, CorpusError, CorpusId, DocId, Document, Partition, SplitSpec, MAX_DOCUMENT_CHARS,
};
use crate::store::{Journal, Store, StoreError};
use crate::textclf::{
    predict_nb, run_pipeline, train_nb, word_stats, Algorithm, ClfError, LogRegParams,
    NaiveBayesModel, PipelineParams, SearchTerm, WordSort, DEFAULT_ALPHA,
};

use analysis::{AnalysisState, DocHandle};

pub use auth::{encode_token, hash_password, verify_password};
pub use entropy::{Entropy, SeededEntropy, SystemEntropy};
pub use events::Event;
pub use model::{
    AnalysisId, AnalysisKind, AnalysisRecord, AnalysisSummary, CorpusSummary, DocumentView, GroupId,
    LabelEvent, LabelStatRow, LeaderboardRow, NextDocument, Project, ProjectId, Role, RunRecord,
    SortOrder, User, UserGroup, UserId, WordStatsTable,
};

const MAX_USERNAME_CHARS: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum ClassroomError {
    #[error("not allowed")]
    Forbidden,
    #[error("invalid username or password")]
    BadCredentials,
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("unknown group {0}")]
    UnknownGroup(GroupId),
    #[error("unknown corpus {0}")]
    UnknownCorpus(CorpusId),
    #[error("unknown project {0}")]
    UnknownProject(ProjectId),
    #[error("unknown analysis {0}")]
    UnknownAnalysis(AnalysisId),
    #[error("document {0} is not part of this analysis")]
    UnknownDocument(DocId),
    #[error("category `{0}` is not part of this analysis")]
    UnknownCategory(String),
    #[error("no run number {0} in this analysis")]
    UnknownRun(u64),
    #[error("you already have a group named `{0}`")]
    DuplicateName(String),
    #[error("unknown signup link")]
    UnknownToken,
    #[error("this signup link has expired")]
    ExpiredToken,
    #[error("username `{0}` is taken")]
    UsernameTaken(String),
    #[error("a project needs at least two categories, found {0}")]
    TooFewCategories(usize),
    #[error("cannot draw {requested} documents from category `{category}`, which has {available}")]
    NNotSatisfiable {
        category: String,
        requested: usize,
        available: usize,
    },
    #[error("every document in this analysis is already labeled")]
    NothingLeft,
    #[error("you already labeled document {0}")]
    AlreadyLabeled(DocId),
    #[error("nothing has been labeled yet")]
    NoLabelsYet,
    #[error("search term `{0}` needs a reason")]
    MissingReason(String),
    #[error("add at least one search term first")]
    NoTerms,
    #[error("{0}")]
    InvalidInput(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Clf(#[from] ClfError),
    #[error(transparent)]
    Storage(#[from] StoreError),
}

pub type Result<T, E = ClassroomError> = std::result::Result<T, E>;

/// Defaults applied to newly created analyses and model runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub alpha: f64,
    pub train_fraction: f64,
    pub logreg: LogRegParams,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            alpha: DEFAULT_ALPHA,
            train_fraction: 0.8,
            logreg: LogRegParams::default(),
        }
    }
}

/// Identity and memberships of the user making a request.
#[derive(Debug, Clone)]
pub(crate) struct Caller {
    pub(crate) id: UserId,
    pub(crate) role: Role,
    pub(crate) groups: BTreeSet<GroupId>,
}

impl Caller {
    pub(crate) fn is_teacher(&self) -> bool {
        self.role == Role::Teacher
    }
}

#[derive(Debug, Default)]
struct Counters {
    user: u64,
    group: u64,
    corpus: u64,
    project: u64,
    analysis: u64,
    document: u64,
}

#[derive(Debug, Default)]
struct Directory {
    users: BTreeMap<UserId, User>,
    usernames: HashMap<String, UserId>,
    groups: BTreeMap<GroupId, UserGroup>,
    signup_tokens: HashMap<String, GroupId>,
    corpora: BTreeMap<CorpusId, Arc<Corpus>>,
    doc_locations: HashMap<DocId, (CorpusId, usize)>,
    projects: BTreeMap<ProjectId, Project>,
    next: Counters,
}

impl Directory {
    fn caller(&self, id: UserId) -> Result<Caller> {
        let user = self.users.get(&id).ok_or(ClassroomError::Forbidden)?;
        Ok(Caller {
            id,
            role: user.role,
            groups: user.group_ids.clone(),
        })
    }

    fn teacher(&self, id: UserId) -> Result<&User> {
        match self.users.get(&id) {
            Some(user) if user.is_teacher() => Ok(user),
            _ => Err(ClassroomError::Forbidden),
        }
    }

    fn project_visible(&self, project: &Project, caller: &Caller) -> bool {
        if caller.is_teacher() {
            project.owner_id == caller.id
        } else {
            caller.groups.contains(&project.group_id)
        }
    }

    fn doc_handle(&self, id: DocId) -> Option<DocHandle> {
        let (corpus, index) = self.doc_locations.get(&id)?;
        Some(DocHandle::new(self.corpora[corpus].clone(), *index))
    }

    fn project_documents(&self, project: &Project) -> Vec<&Document> {
        let mut docs: Vec<&Document> = project
            .corpus_ids
            .iter()
            .flat_map(|c| self.corpora[c].documents.iter())
            .collect();
        docs.sort_by_key(|d| d.id);
        docs
    }

    fn insert_user(&mut self, user: User) {
        self.next.user = self.next.user.max(user.id.0 + 1);
        self.usernames.insert(user.username.clone(), user.id);
        self.users.insert(user.id, user);
    }

    /// Applies a directory event. Analysis events are ignored here.
    fn apply(&mut self, event: &Event) -> Result<(), String> {
        match event {
            Event::UserCreated { user } => self.insert_user(user.clone()),
            Event::StudentRegistered { user, group_id } => {
                let group = self
                    .groups
                    .get_mut(group_id)
                    .ok_or_else(|| format!("registration into unknown group {group_id}"))?;
                group.member_ids.insert(user.id);
                self.insert_user(user.clone());
            }
            Event::PasswordChanged { user_id, password_hash } => {
                let user = self
                    .users
                    .get_mut(user_id)
                    .ok_or_else(|| format!("password change for unknown user {user_id}"))?;
                user.password_hash = password_hash.clone();
            }
            Event::GroupCreated { group } => {
                self.next.group = self.next.group.max(group.id.0 + 1);
                self.signup_tokens.insert(group.signup_token.clone(), group.id);
                self.groups.insert(group.id, group.clone());
            }
            Event::CorpusAdded { corpus } => {
                self.next.corpus = self.next.corpus.max(corpus.id.0 + 1);
                for (i, doc) in corpus.documents.iter().enumerate() {
                    self.next.document = self.next.document.max(doc.id.0 + 1);
                    self.doc_locations.insert(doc.id, (corpus.id, i));
                }
                self.corpora.insert(corpus.id, Arc::new(corpus.clone()));
            }
            Event::ProjectCreated { project } => {
                self.next.project = self.next.project.max(project.id.0 + 1);
                self.projects.insert(project.id, project.clone());
            }
            Event::AnalysisCreated { analysis } => {
                self.next.analysis = self.next.analysis.max(analysis.id.0 + 1);
            }
            Event::LabelRecorded { .. } | Event::TermsSet { .. } | Event::RunRecorded { .. } => {}
        }
        Ok(())
    }
}

/// Training data of an analysis, resolved to documents.
#[derive(Debug, Clone)]
pub struct AnalysisDataset {
    pub categories: Vec<String>,
    pub alpha: f64,
    pub train: Vec<Document>,
    pub test: Vec<Document>,
}

#[derive(Serialize)]
struct AnalysisDump<'a> {
    record: &'a AnalysisRecord,
    labels: &'a [LabelEvent],
    terms: &'a BTreeMap<UserId, Vec<SearchTerm>>,
    runs: &'a [RunRecord],
}

pub struct Classroom {
    settings: Settings,
    directory: RwLock<Directory>,
    analyses: RwLock<BTreeMap<AnalysisId, Arc<Mutex<AnalysisState>>>>,
    journal: Arc<dyn Journal>,
    entropy: Mutex<Box<dyn Entropy>>,
}

impl std::fmt::Debug for Classroom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Classroom").field("settings", &self.settings).finish_non_exhaustive()
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

fn read<T>(l: &RwLock<T>) -> RwLockReadGuard<'_, T> {
    l.read().unwrap_or_else(|p| p.into_inner())
}

fn write<T>(l: &RwLock<T>) -> RwLockWriteGuard<'_, T> {
    l.write().unwrap_or_else(|p| p.into_inner())
}

fn validate_username(username: &str) -> Result<&str> {
    let name = username.trim();
    if name.is_empty() || name.chars().count() > MAX_USERNAME_CHARS || name.chars().any(char::is_whitespace) {
        return Err(ClassroomError::InvalidInput(format!(
            "usernames must be 1-{MAX_USERNAME_CHARS} characters without spaces"
        )));
    }
    Ok(name)
}

fn validate_password(password: &str) -> Result<()> {
    if password.is_empty() {
        return Err(ClassroomError::InvalidInput("password must not be empty".into()));
    }
    Ok(())
}

fn non_empty<'a>(value: &'a str, what: &str) -> Result<&'a str> {
    let v = value.trim();
    if v.is_empty() {
        return Err(ClassroomError::InvalidInput(format!("{what} must not be empty")));
    }
    Ok(v)
}

impl Classroom {
    pub fn new(settings: Settings, journal: Arc<dyn Journal>, entropy: Box<dyn Entropy>) -> Self {
        Classroom {
            settings,
            directory: RwLock::new(Directory::default()),
            analyses: RwLock::new(BTreeMap::new()),
            journal,
            entropy: Mutex::new(entropy),
        }
    }

    /// Rebuilds a classroom by applying `events` in order, then continues
    /// journaling to `journal`.
    pub fn recover(
        settings: Settings,
        journal: Arc<dyn Journal>,
        entropy: Box<dyn Entropy>,
        events: Vec<Event>,
    ) -> Result<Self> {
        let classroom = Classroom::new(settings, journal, entropy);
        for (i, event) in events.into_iter().enumerate() {
            classroom.apply(event).map_err(|reason| StoreError::Corrupt { line: i + 1, reason })?;
        }
        Ok(classroom)
    }

    /// Opens the store in `dir` with its exclusive lock and replays it.
    pub fn open(dir: &Path, settings: Settings, entropy: Box<dyn Entropy>) -> Result<Self> {
        let (store, events) = Store::open(dir)?;
        Classroom::recover(settings, Arc::new(store), entropy, events)
    }

    /// Replays the store in `dir` into a classroom that cannot persist
    /// anything; safe while a server holds the lock.
    pub fn open_read_only(dir: &Path, settings: Settings) -> Result<Self> {
        let events = Store::read_events(dir)?;
        let journal = Arc::new(crate::store::MemoryJournal::default());
        journal.set_failing(true);
        Classroom::recover(settings, journal, Box::new(SystemEntropy), events)
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    fn apply(&self, event: Event) -> Result<(), String> {
        match &event {
            Event::AnalysisCreated { analysis } => {
                let mut dir = write(&self.directory);
                dir.apply(&event)?;
                let state = self.build_analysis(&dir, analysis.clone())?;
                write(&self.analyses).insert(analysis.id, Arc::new(Mutex::new(state)));
            }
            _ => match event.analysis_id() {
                Some(id) => {
                    let slot = read(&self.analyses)
                        .get(&id)
                        .cloned()
                        .ok_or_else(|| format!("event for unknown analysis {id}"))?;
                    let mut state = lock(&slot);
                    Self::apply_to_analysis(&mut state, event)?;
                }
                None => write(&self.directory).apply(&event)?,
            },
        }
        Ok(())
    }

    fn apply_to_analysis(state: &mut AnalysisState, event: Event) -> Result<(), String> {
        match event {
            Event::LabelRecorded { label, .. } => {
                if !state.docs.contains_key(&label.document_id) {
                    return Err(format!("label for document {} outside the pool", label.document_id));
                }
                state.apply_label(label);
            }
            Event::TermsSet { user_id, terms, .. } => {
                state.terms.insert(user_id, terms);
            }
            Event::RunRecorded { run, .. } => state.runs.push(run),
            _ => unreachable!("only analysis events are routed here"),
        }
        Ok(())
    }

    fn build_analysis(&self, dir: &Directory, record: AnalysisRecord) -> Result<AnalysisState, String> {
        let project = dir
            .projects
            .get(&record.project_id)
            .ok_or_else(|| format!("analysis {} refers to unknown project", record.id))?;
        let docs = record
            .doc_pool
            .iter()
            .map(|id| {
                dir.doc_handle(*id)
                    .map(|h| (*id, h))
                    .ok_or_else(|| format!("analysis {} refers to unknown document {id}", record.id))
            })
            .collect::<Result<BTreeMap<_, _>, _>>()?;
        Ok(AnalysisState::new(record, project.group_id, project.owner_id, docs))
    }

    fn commit_directory(&self, dir: &mut Directory, event: Event) -> Result<()> {
        self.journal.append(&event)?;
        dir.apply(&event).expect("validated before journaling");
        Ok(())
    }

    fn commit_analysis(&self, state: &mut AnalysisState, event: Event) -> Result<()> {
        self.journal.append(&event)?;
        Self::apply_to_analysis(state, event).expect("validated before journaling");
        Ok(())
    }

    fn now(&self) -> DateTime<Utc> {
        lock(&self.entropy).now()
    }

    fn random_bytes<const N: usize>(&self) -> [u8; N] {
        let mut buf = [0u8; N];
        lock(&self.entropy).fill_bytes(&mut buf);
        buf
    }

    fn hash(&self, password: &str) -> String {
        hash_password(password, &self.random_bytes::<16>())
    }

    fn analysis_slot(&self, id: AnalysisId) -> Result<Arc<Mutex<AnalysisState>>> {
        read(&self.analyses)
            .get(&id)
            .cloned()
            .ok_or(ClassroomError::UnknownAnalysis(id))
    }

    fn caller(&self, id: UserId) -> Result<Caller> {
        read(&self.directory).caller(id)
    }

    // ---- accounts -------------------------------------------------------

    pub fn add_teacher(&self, username: &str, password: &str) -> Result<User> {
        let username = validate_username(username)?;
        validate_password(password)?;
        let password_hash = self.hash(password);
        let mut dir = write(&self.directory);
        if dir.usernames.contains_key(username) {
            return Err(ClassroomError::UsernameTaken(username.to_string()));
        }
        let user = User {
            id: UserId(dir.next.user),
            username: username.to_string(),
            password_hash,
            role: Role::Teacher,
            group_ids: BTreeSet::new(),
        };
        self.commit_directory(&mut dir, Event::UserCreated { user: user.clone() })?;
        Ok(user)
    }

    pub fn reset_password(&self, username: &str, password: &str) -> Result<()> {
        validate_password(password)?;
        let password_hash = self.hash(password);
        let mut dir = write(&self.directory);
        let user_id = *dir
            .usernames
            .get(username)
            .ok_or_else(|| ClassroomError::UnknownUser(username.to_string()))?;
        self.commit_directory(&mut dir, Event::PasswordChanged { user_id, password_hash })
    }

    pub fn users(&self) -> Vec<User> {
        read(&self.directory).users.values().cloned().collect()
    }

    pub fn user(&self, id: UserId) -> Option<User> {
        read(&self.directory).users.get(&id).cloned()
    }

    pub fn user_by_name(&self, username: &str) -> Option<User> {
        let dir = read(&self.directory);
        dir.usernames.get(username).map(|id| dir.users[id].clone())
    }

    /// Checks credentials. Unknown users and wrong passwords fail the same
    /// way and cost the same hashing work.
    pub fn authenticate(&self, username: &str, password: &str) -> Result<User> {
        let user = self.user_by_name(username);
        let hash = user.as_ref().map_or(auth::decoy_hash(), |u| u.password_hash.as_str());
        let ok = verify_password(password, hash);
        match user {
            Some(user) if ok => Ok(user),
            _ => Err(ClassroomError::BadCredentials),
        }
    }

    // ---- groups ---------------------------------------------------------

    pub fn create_group(&self, caller: UserId, name: &str, expiry: Option<DateTime<Utc>>) -> Result<UserGroup> {
        let name = non_empty(name, "group name")?;
        let mut dir = write(&self.directory);
        dir.teacher(caller)?;
        if dir.groups.values().any(|g| g.owner_id == caller && g.name == name) {
            return Err(ClassroomError::DuplicateName(name.to_string()));
        }
        let signup_token = loop {
            let token = encode_token(self.random_bytes::<16>());
            if !dir.signup_tokens.contains_key(&token) {
                break token;
            }
        };
        let group = UserGroup {
            id: GroupId(dir.next.group),
            name: name.to_string(),
            owner_id: caller,
            member_ids: BTreeSet::new(),
            signup_token,
            token_expiry: expiry,
        };
        self.commit_directory(&mut dir, Event::GroupCreated { group: group.clone() })?;
        Ok(group)
    }

    /// Groups owned by a teacher, or joined by a student.
    pub fn groups_for(&self, caller: UserId) -> Result<Vec<UserGroup>> {
        let dir = read(&self.directory);
        let who = dir.caller(caller)?;
        Ok(dir
            .groups
            .values()
            .filter(|g| if who.is_teacher() { g.owner_id == caller } else { who.groups.contains(&g.id) })
            .cloned()
            .collect())
    }

    /// Creates a student account from a group's signup link.
    pub fn register_via_link(&self, token: &str, username: &str, password: &str) -> Result<User> {
        let now = self.now();
        let username = validate_username(username)?;
        validate_password(password)?;
        let password_hash = self.hash(password);
        let mut dir = write(&self.directory);
        let group_id = *dir.signup_tokens.get(token).ok_or(ClassroomError::UnknownToken)?;
        if dir.groups[&group_id].token_expiry.is_some_and(|e| e <= now) {
            return Err(ClassroomError::ExpiredToken);
        }
        if dir.usernames.contains_key(username) {
            return Err(ClassroomError::UsernameTaken(username.to_string()));
        }
        let user = User {
            id: UserId(dir.next.user),
            username: username.to_string(),
            password_hash,
            role: Role::Student,
            group_ids: [group_id].into(),
        };
        self.commit_directory(&mut dir, Event::StudentRegistered { user: user.clone(), group_id })?;
        Ok(user)
    }

    // ---- corpora and projects ------------------------------------------

    /// Registers a corpus, giving its documents globally unique ids.
    pub fn add_corpus(&self, caller: UserId, name: &str, mut corpus: Corpus) -> Result<CorpusSummary> {
        let name = non_empty(name, "corpus name")?;
        if corpus.is_empty() {
            return Err(CorpusError::EmptyCorpus.into());
        }
        if let Some(row) = corpus.documents.iter().position(|d| d.raw_text.chars().count() > MAX_DOCUMENT_CHARS) {
            return Err(CorpusError::DocumentTooLong { row: row + 1 }.into());
        }
        let mut dir = write(&self.directory);
        dir.teacher(caller)?;
        corpus.id = CorpusId(dir.next.corpus);
        corpus.name = name.to_string();
        corpus.renumber(dir.next.document);
        let summary = summarize(&corpus);
        self.commit_directory(&mut dir, Event::CorpusAdded { corpus })?;
        Ok(summary)
    }

    pub fn corpora(&self) -> Vec<CorpusSummary> {
        read(&self.directory).corpora.values().map(|c| summarize(c)).collect()
    }

    pub fn create_project(
        &self,
        caller: UserId,
        title: &str,
        description: &str,
        group_id: GroupId,
        corpus_ids: &[CorpusId],
    ) -> Result<Project> {
        let title = non_empty(title, "project title")?;
        let mut dir = write(&self.directory);
        dir.teacher(caller)?;
        let group = dir.groups.get(&group_id).ok_or(ClassroomError::UnknownGroup(group_id))?;
        if group.owner_id != caller {
            return Err(ClassroomError::Forbidden);
        }
        if corpus_ids.is_empty() {
            return Err(ClassroomError::InvalidInput("a project needs at least one corpus".into()));
        }
        let mut ids: Vec<CorpusId> = Vec::new();
        let mut categories = BTreeSet::new();
        for id in corpus_ids {
            let corpus = dir.corpora.get(id).ok_or(ClassroomError::UnknownCorpus(*id))?;
            if !ids.contains(id) {
                ids.push(*id);
                categories.extend(corpus.categories.iter().cloned());
            }
        }
        if categories.len() < 2 {
            return Err(ClassroomError::TooFewCategories(categories.len()));
        }
        let project = Project {
            id: ProjectId(dir.next.project),
            title: title.to_string(),
            description: description.trim().to_string(),
            owner_id: caller,
            group_id,
            corpus_ids: ids,
            categories: categories.into_iter().collect(),
        };
        self.commit_directory(&mut dir, Event::ProjectCreated { project: project.clone() })?;
        Ok(project)
    }

    /// The landing page: a teacher's own projects, or the projects of a
    /// student's groups.
    pub fn projects_for(&self, caller: UserId) -> Result<Vec<Project>> {
        let dir = read(&self.directory);
        let who = dir.caller(caller)?;
        Ok(dir
            .projects
            .values()
            .filter(|p| dir.project_visible(p, &who))
            .cloned()
            .collect())
    }

    /// Every document of a project with its categories, for headless evaluation.
    pub fn project_documents(&self, project_id: ProjectId) -> Result<(Vec<String>, Vec<Document>)> {
        let dir = read(&self.directory);
        let project = dir.projects.get(&project_id).ok_or(ClassroomError::UnknownProject(project_id))?;
        let docs = dir.project_documents(project).into_iter().cloned().collect();
        Ok((project.categories.clone(), docs))
    }

    // ---- analyses -------------------------------------------------------

    pub fn create_analysis(
        &self,
        caller: UserId,
        project_id: ProjectId,
        kind: AnalysisKind,
        per_category_n: Option<usize>,
        seed: Option<u64>,
    ) -> Result<AnalysisSummary> {
        let seed = match seed {
            Some(s) => s,
            None => lock(&self.entropy).next_u64(),
        };
        let created_at = self.now();
        let mut dir = write(&self.directory);
        let who = dir.caller(caller)?;
        let project = dir.projects.get(&project_id).ok_or(ClassroomError::UnknownProject(project_id))?;
        if !dir.project_visible(project, &who) {
            return Err(ClassroomError::Forbidden);
        }
        if !who.is_teacher() && kind != AnalysisKind::Personal {
            return Err(ClassroomError::Forbidden);
        }
        let all_docs = dir.project_documents(project);
        let (pool, per_category_n): (Vec<&Document>, Option<usize>) = match kind {
            AnalysisKind::SharedTexts => {
                let n = per_category_n.ok_or_else(|| {
                    ClassroomError::InvalidInput("a shared-texts analysis needs per_category_n".into())
                })?;
                (sample_per_category(&all_docs, &project.categories, n, seed)?, Some(n))
            }
            _ => (all_docs, None),
        };
        let split = SplitSpec::stratified(pool.iter().copied(), self.settings.train_fraction, seed)?;
        let record = AnalysisRecord {
            id: AnalysisId(dir.next.analysis),
            project_id,
            owner_id: caller,
            kind,
            per_category_n,
            seed,
            alpha: self.settings.alpha,
            categories: project.categories.clone(),
            doc_pool: pool.iter().map(|d| d.id).collect(),
            split,
            created_at,
        };
        let state = self
            .build_analysis(&dir, record.clone())
            .map_err(ClassroomError::InvalidInput)?;
        let summary = state.summary();
        self.commit_directory(&mut dir, Event::AnalysisCreated { analysis: record })?;
        write(&self.analyses).insert(summary.id, Arc::new(Mutex::new(state)));
        Ok(summary)
    }

    pub fn analyses_for(&self, caller: UserId, project_id: ProjectId) -> Result<Vec<AnalysisSummary>> {
        let who = {
            let dir = read(&self.directory);
            let who = dir.caller(caller)?;
            let project = dir.projects.get(&project_id).ok_or(ClassroomError::UnknownProject(project_id))?;
            if !dir.project_visible(project, &who) {
                return Err(ClassroomError::Forbidden);
            }
            who
        };
        let slots: Vec<_> = read(&self.analyses).values().cloned().collect();
        Ok(slots
            .iter()
            .filter_map(|slot| {
                let state = lock(slot);
                (state.record.project_id == project_id && state.can_view(&who)).then(|| state.summary())
            })
            .collect())
    }

    /// Runs `f` on a viewable analysis while holding its lock.
    fn with_analysis<T>(
        &self,
        caller: UserId,
        id: AnalysisId,
        f: impl FnOnce(&Caller, &mut AnalysisState) -> Result<T>,
    ) -> Result<T> {
        let who = self.caller(caller)?;
        let slot = self.analysis_slot(id)?;
        let mut state = lock(&slot);
        if !state.can_view(&who) {
            return Err(ClassroomError::Forbidden);
        }
        f(&who, &mut state)
    }

    pub fn analysis(&self, caller: UserId, id: AnalysisId) -> Result<AnalysisSummary> {
        self.with_analysis(caller, id, |_, state| Ok(state.summary()))
    }

    /// The caller's next unlabeled document, without its gold category, with
    /// the current model estimate and the number still to label.
    pub fn next_document(&self, caller: UserId, id: AnalysisId) -> Result<NextDocument> {
        self.with_analysis(caller, id, |who, state| {
            if !state.can_label(who) {
                return Err(ClassroomError::Forbidden);
            }
            let next = state
                .order_for(who.id)
                .into_iter()
                .find(|doc| !state.has_labeled(who.id, *doc))
                .ok_or(ClassroomError::NothingLeft)?;
            let doc = state.docs[&next].doc();
            Ok(NextDocument {
                document: DocumentView {
                    id: doc.id,
                    text: doc.clean_text.clone(),
                },
                estimate: predict_nb(state.model_for(who.id), &doc.tokens),
                remaining: state.remaining(who.id),
            })
        })
    }

    /// Records the caller's label for a pool document. The check that the
    /// caller has not labeled it yet and the insertion happen under the
    /// analysis lock, so concurrent duplicates cannot both succeed.
    pub fn submit_label(&self, caller: UserId, id: AnalysisId, document_id: DocId, category: &str) -> Result<LabelEvent> {
        let timestamp = self.now();
        self.with_analysis(caller, id, |who, state| {
            if !state.can_label(who) {
                return Err(ClassroomError::Forbidden);
            }
            let doc = state
                .docs
                .get(&document_id)
                .ok_or(ClassroomError::UnknownDocument(document_id))?
                .doc();
            if !state.record.categories.iter().any(|c| c == category) {
                return Err(ClassroomError::UnknownCategory(category.to_string()));
            }
            if state.has_labeled(who.id, document_id) {
                return Err(ClassroomError::AlreadyLabeled(document_id));
            }
            let label = LabelEvent {
                user_id: who.id,
                document_id,
                chosen_category: category.to_string(),
                correct: doc.category == category,
                by_teacher: who.is_teacher(),
                timestamp,
            };
            self.commit_analysis(state, Event::LabelRecorded { analysis_id: id, label: label.clone() })?;
            Ok(label)
        })
    }

    pub fn label_statistics(&self, caller: UserId, id: AnalysisId, order: SortOrder) -> Result<Vec<LabelStatRow>> {
        self.with_analysis(caller, id, |_, state| Ok(state.label_rows(order)))
    }

    /// Word counts over every document labeled so far, using gold categories.
    pub fn analysis_word_statistics(&self, caller: UserId, id: AnalysisId, sort: WordSort) -> Result<WordStatsTable> {
        self.with_analysis(caller, id, |_, state| {
            let docs = state.labeled_documents();
            if docs.is_empty() {
                return Err(ClassroomError::NoLabelsYet);
            }
            let model = train_nb(docs.iter().copied(), &state.record.categories, None, state.record.alpha)?;
            Ok(WordStatsTable {
                categories: state.record.categories.clone(),
                documents: docs.len(),
                rows: word_stats(&model, sort),
            })
        })
    }

    /// Replaces the caller's search terms. Every term needs a reason.
    pub fn set_terms(&self, caller: UserId, id: AnalysisId, terms: &[(String, String)]) -> Result<Vec<SearchTerm>> {
        let terms = terms
            .iter()
            .map(|(pattern, reason)| {
                let term = SearchTerm::new(pattern, reason.trim())?;
                if term.reason.is_empty() {
                    return Err(ClassroomError::MissingReason(term.pattern));
                }
                Ok(term)
            })
            .collect::<Result<Vec<_>>>()?;
        self.with_analysis(caller, id, |who, state| {
            let event = Event::TermsSet { analysis_id: id, user_id: who.id, terms: terms.clone() };
            self.commit_analysis(state, event)?;
            Ok(terms)
        })
    }

    /// A user's search terms. Students may only read their own.
    pub fn terms(&self, caller: UserId, id: AnalysisId, of: Option<UserId>) -> Result<Vec<SearchTerm>> {
        self.with_analysis(caller, id, |who, state| {
            let target = of.unwrap_or(who.id);
            if target != who.id && !who.is_teacher() {
                return Err(ClassroomError::Forbidden);
            }
            Ok(state.terms.get(&target).cloned().unwrap_or_default())
        })
    }

    /// Trains a fresh classifier on the analysis' training documents using
    /// the caller's terms as features, evaluates it on the test documents
    /// and stores the report under the next run number.
    pub fn run_model(&self, caller: UserId, id: AnalysisId, algorithm: Algorithm) -> Result<RunRecord> {
        let (terms, train, test, categories, alpha) = self.with_analysis(caller, id, |who, state| {
            let terms = state.terms.get(&who.id).cloned().unwrap_or_default();
            if terms.is_empty() {
                return Err(ClassroomError::NoTerms);
            }
            let handles = |part| -> Vec<DocHandle> {
                state
                    .record
                    .doc_pool
                    .iter()
                    .filter(|d| state.record.split.partition(**d) == Some(part))
                    .map(|d| state.docs[d].clone())
                    .collect()
            };
            Ok((
                terms,
                handles(Partition::Train),
                handles(Partition::Test),
                state.record.categories.clone(),
                state.record.alpha,
            ))
        })?;
        let train: Vec<&Document> = train.iter().map(DocHandle::doc).collect();
        let test: Vec<&Document> = test.iter().map(DocHandle::doc).collect();
        let params = PipelineParams {
            algorithm,
            alpha,
            logreg: self.settings.logreg,
        };
        let report = run_pipeline(&train, &test, &categories, &terms, &params)?;
        let created_at = self.now();
        self.with_analysis(caller, id, |who, state| {
            let run = RunRecord {
                seq: state.runs.len() as u64 + 1,
                user_id: who.id,
                algorithm,
                created_at,
                report,
            };
            self.commit_analysis(state, Event::RunRecorded { analysis_id: id, run: run.clone() })?;
            Ok(run)
        })
    }

    /// A stored run, visible to its author and the teacher.
    pub fn run(&self, caller: UserId, id: AnalysisId, seq: u64) -> Result<RunRecord> {
        self.with_analysis(caller, id, |who, state| {
            let run = seq
                .checked_sub(1)
                .and_then(|i| state.runs.get(i as usize))
                .ok_or(ClassroomError::UnknownRun(seq))?;
            if run.user_id != who.id && !who.is_teacher() {
                return Err(ClassroomError::Forbidden);
            }
            Ok(run.clone())
        })
    }

    /// Runs by the caller, or by everyone when the caller is the teacher.
    pub fn runs(&self, caller: UserId, id: AnalysisId) -> Result<Vec<RunRecord>> {
        self.with_analysis(caller, id, |who, state| {
            Ok(state
                .runs
                .iter()
                .filter(|r| who.is_teacher() || r.user_id == who.id)
                .cloned()
                .collect())
        })
    }

    /// Each user's best run total, highest first.
    pub fn leaderboard(&self, caller: UserId, id: AnalysisId) -> Result<Vec<LeaderboardRow>> {
        let runs = self.with_analysis(caller, id, |_, state| Ok(state.runs.clone()))?;
        let dir = read(&self.directory);
        let mut best: BTreeMap<UserId, LeaderboardRow> = BTreeMap::new();
        for run in &runs {
            let row = best.entry(run.user_id).or_insert_with(|| LeaderboardRow {
                user_id: run.user_id,
                username: dir.users.get(&run.user_id).map(|u| u.username.clone()).unwrap_or_default(),
                best_total_score: run.report.total_score,
                best_run: run.seq,
                runs: 0,
            });
            row.runs += 1;
            if run.report.total_score > row.best_total_score {
                row.best_total_score = run.report.total_score;
                row.best_run = run.seq;
            }
        }
        let mut rows: Vec<_> = best.into_values().collect();
        rows.sort_by(|a, b| b.best_total_score.cmp(&a.best_total_score).then(a.user_id.cmp(&b.user_id)));
        Ok(rows)
    }

    // ---- operator access ------------------------------------------------

    /// Train and test documents of an analysis, bypassing access checks.
    pub fn analysis_dataset(&self, id: AnalysisId) -> Result<AnalysisDataset> {
        let slot = self.analysis_slot(id)?;
        let state = lock(&slot);
        Ok(AnalysisDataset {
            categories: state.record.categories.clone(),
            alpha: state.record.alpha,
            train: state.partition_docs(Partition::Train).into_iter().cloned().collect(),
            test: state.partition_docs(Partition::Test).into_iter().cloned().collect(),
        })
    }

    /// The model that labels have trained so far: the common model for a
    /// shared-model analysis, otherwise `user`'s own.
    pub fn labeling_model(&self, id: AnalysisId, user: UserId) -> Result<NaiveBayesModel> {
        let slot = self.analysis_slot(id)?;
        let state = lock(&slot);
        Ok(state.model_for(user).clone())
    }

    /// Distinct documents labeled so far in an analysis.
    pub fn labeled_documents(&self, id: AnalysisId) -> Result<Vec<Document>> {
        let slot = self.analysis_slot(id)?;
        let state = lock(&slot);
        Ok(state.labeled_documents().into_iter().cloned().collect())
    }

    pub fn shared_model(&self, id: AnalysisId) -> Result<NaiveBayesModel> {
        let slot = self.analysis_slot(id)?;
        let state = lock(&slot);
        Ok(state.shared_model().clone())
    }

    /// Every persisted entity as one canonical JSON document.
    pub fn dump(&self) -> serde_json::Value {
        let dir = read(&self.directory);
        let slots: Vec<_> = read(&self.analyses).values().cloned().collect();
        let guards: Vec<_> = slots.iter().map(|s| lock(s)).collect();
        let analyses: Vec<AnalysisDump<'_>> = guards
            .iter()
            .map(|s| AnalysisDump {
                record: &s.record,
                labels: &s.labels,
                terms: &s.terms,
                runs: &s.runs,
            })
            .collect();
        serde_json::json!({
            "users": dir.users.values().collect::<Vec<_>>(),
            "groups": dir.groups.values().collect::<Vec<_>>(),
            "corpora": dir.corpora.values().map(|c| c.as_ref()).collect::<Vec<_>>(),
            "projects": dir.projects.values().collect::<Vec<_>>(),
            "analyses": analyses,
        })
    }
}

fn summarize(corpus: &Corpus) -> CorpusSummary {
    CorpusSummary {
        id: corpus.id,
        name: corpus.name.clone(),
        categories: corpus.categories.iter().cloned().collect(),
        documents: corpus.len(),
    }
}

/// Draws `n` documents of every category without replacement; the result is
/// ordered by document id.
fn sample_per_category<'a>(
    docs: &[&'a Document],
    categories: &[String],
    n: usize,
    seed: u64,
) -> Result<Vec<&'a Document>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = Vec::new();
    for category in categories {
        let mut members: Vec<&Document> = docs.iter().copied().filter(|d| d.category == *category).collect();
        if n < 2 || n > members.len() {
            return Err(ClassroomError::NNotSatisfiable {
                category: category.clone(),
                requested: n,
                available: members.len(),
            });
        }
        let (chosen, _) = members.partial_shuffle(&mut rng, n);
        pool.extend_from_slice(chosen);
    }
    pool.sort_by_key(|d| d.id);
    Ok(pool)
}
