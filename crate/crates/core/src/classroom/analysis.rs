use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{
    AnalysisKind, AnalysisRecord, AnalysisSummary, GroupId, LabelEvent, LabelStatRow, RunRecord,
    SortOrder, UserId,
};
use super::Caller;
use crate::corpus::{Corpus, DocId, Document, Partition};
use crate::textclf::{NaiveBayesModel, SearchTerm};

/// A document inside a shared corpus.
#[derive(Debug, Clone)]
pub(crate) struct DocHandle {
    corpus: Arc<Corpus>,
    index: usize,
}

impl DocHandle {
    pub(crate) fn new(corpus: Arc<Corpus>, index: usize) -> Self {
        DocHandle { corpus, index }
    }

    pub(crate) fn doc(&self) -> &Document {
        &self.corpus.documents[self.index]
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    correct: u64,
    incorrect: u64,
    teacher: u64,
}

/// Live state of one analysis: its fixed record plus everything that has
/// accumulated through labels, terms and runs.
pub(crate) struct AnalysisState {
    pub(crate) record: AnalysisRecord,
    pub(crate) group_id: GroupId,
    pub(crate) project_owner: UserId,
    pub(crate) docs: BTreeMap<DocId, DocHandle>,
    pub(crate) labels: Vec<LabelEvent>,
    labeled_by: BTreeMap<UserId, BTreeSet<DocId>>,
    tallies: BTreeMap<DocId, Tally>,
    pub(crate) terms: BTreeMap<UserId, Vec<SearchTerm>>,
    pub(crate) runs: Vec<RunRecord>,
    shared_model: NaiveBayesModel,
    user_models: BTreeMap<UserId, NaiveBayesModel>,
}

impl AnalysisState {
    pub(crate) fn new(
        record: AnalysisRecord,
        group_id: GroupId,
        project_owner: UserId,
        docs: BTreeMap<DocId, DocHandle>,
    ) -> Self {
        let shared_model = NaiveBayesModel::empty(&record.categories, record.alpha, None)
            .expect("analysis categories and alpha validated at creation");
        AnalysisState {
            record,
            group_id,
            project_owner,
            docs,
            labels: Vec::new(),
            labeled_by: BTreeMap::new(),
            tallies: BTreeMap::new(),
            terms: BTreeMap::new(),
            runs: Vec::new(),
            shared_model,
            user_models: BTreeMap::new(),
        }
    }

    pub(crate) fn can_view(&self, caller: &Caller) -> bool {
        if caller.is_teacher() {
            return caller.id == self.project_owner;
        }
        match self.record.kind {
            AnalysisKind::Personal => caller.id == self.record.owner_id,
            AnalysisKind::SharedTexts | AnalysisKind::SharedModel => caller.groups.contains(&self.group_id),
        }
    }

    pub(crate) fn can_label(&self, caller: &Caller) -> bool {
        match self.record.kind {
            AnalysisKind::Personal => caller.id == self.record.owner_id,
            _ => self.can_view(caller),
        }
    }

    pub(crate) fn summary(&self) -> AnalysisSummary {
        let r = &self.record;
        AnalysisSummary {
            id: r.id,
            project_id: r.project_id,
            owner_id: r.owner_id,
            kind: r.kind,
            per_category_n: r.per_category_n,
            seed: r.seed,
            categories: r.categories.clone(),
            pool_size: r.doc_pool.len(),
            train_size: r.split.ids(Partition::Train).count(),
            test_size: r.split.ids(Partition::Test).count(),
        }
    }

    /// The pool in the order `user` sees it: a shuffle seeded by the analysis
    /// seed mixed with the user id.
    pub(crate) fn order_for(&self, user: UserId) -> Vec<DocId> {
        let mut order = self.record.doc_pool.clone();
        let seed = self.record.seed ^ user.0.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        order
    }

    pub(crate) fn has_labeled(&self, user: UserId, doc: DocId) -> bool {
        self.labeled_by.get(&user).is_some_and(|s| s.contains(&doc))
    }

    pub(crate) fn labeled_count(&self, user: UserId) -> usize {
        self.labeled_by.get(&user).map_or(0, BTreeSet::len)
    }

    pub(crate) fn remaining(&self, user: UserId) -> usize {
        self.record.doc_pool.len() - self.labeled_count(user)
    }

    /// The model whose estimate `user` sees while labeling.
    pub(crate) fn model_for(&self, user: UserId) -> &NaiveBayesModel {
        match self.record.kind {
            AnalysisKind::SharedModel => &self.shared_model,
            _ => self.user_models.get(&user).unwrap_or(&self.shared_model),
        }
    }

    pub(crate) fn shared_model(&self) -> &NaiveBayesModel {
        &self.shared_model
    }

    /// Records a validated label and trains on the document's gold category.
    /// The shared model takes each document once, the first time anyone labels it.
    pub(crate) fn apply_label(&mut self, label: LabelEvent) {
        let handle = self.docs.get(&label.document_id).expect("label validated against pool").clone();
        let doc = handle.doc();
        let first_for_doc = !self.tallies.contains_key(&label.document_id);
        match self.record.kind {
            AnalysisKind::SharedModel => {
                if first_for_doc {
                    self.shared_model
                        .observe(&doc.tokens, &doc.category)
                        .expect("gold category belongs to the analysis");
                }
            }
            _ => {
                let model = self
                    .user_models
                    .entry(label.user_id)
                    .or_insert_with(|| self.shared_model.clone());
                model
                    .observe(&doc.tokens, &doc.category)
                    .expect("gold category belongs to the analysis");
            }
        }
        let tally = self.tallies.entry(label.document_id).or_default();
        if label.correct {
            tally.correct += 1;
        } else {
            tally.incorrect += 1;
        }
        if label.by_teacher {
            tally.teacher += 1;
        }
        self.labeled_by.entry(label.user_id).or_default().insert(label.document_id);
        self.labels.push(label);
    }

    pub(crate) fn label_rows(&self, order: SortOrder) -> Vec<LabelStatRow> {
        let mut rows: Vec<LabelStatRow> = self
            .tallies
            .iter()
            .map(|(id, t)| LabelStatRow {
                document_id: *id,
                text: self.docs[id].doc().clean_text.clone(),
                correct_count: t.correct,
                incorrect_count: t.incorrect,
                correct_pct: t.correct as f64 / (t.correct + t.incorrect) as f64,
                teacher_labels: t.teacher,
            })
            .collect();
        rows.sort_by(|a, b| {
            let by_pct = a.correct_pct.total_cmp(&b.correct_pct);
            let by_pct = if order == SortOrder::Desc { by_pct.reverse() } else { by_pct };
            by_pct.then_with(|| a.document_id.cmp(&b.document_id))
        });
        rows
    }

    /// Distinct documents that have at least one label.
    pub(crate) fn labeled_documents(&self) -> Vec<&Document> {
        self.tallies.keys().map(|id| self.docs[id].doc()).collect()
    }

    pub(crate) fn partition_docs(&self, part: Partition) -> Vec<&Document> {
        self.record
            .doc_pool
            .iter()
            .filter(|id| self.record.split.partition(**id) == Some(part))
            .map(|id| self.docs[id].doc())
            .collect()
    }
}
