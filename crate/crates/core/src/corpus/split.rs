use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, DocId, Document};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Test,
}

/// A seeded, stratified train/test assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    #[serde(with = "as_pairs")]
    pub assignment: BTreeMap<DocId, Partition>,
}

/// Stored as `[[id, partition], ...]`: integer map keys do not survive
/// buffering inside internally tagged enums.
mod as_pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    use super::{DocId, Partition};

    pub fn serialize<S: Serializer>(map: &BTreeMap<DocId, Partition>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<DocId, Partition>, D::Error> {
        Ok(Vec::<(DocId, Partition)>::deserialize(d)?.into_iter().collect())
    }
}

/// Number of training documents for a category of size `n`: `f * n` rounded
/// to nearest with exact halves going down, then clamped so both sides are
/// non-empty.
fn train_count(fraction: f64, n: usize) -> usize {
    let exact = fraction * n as f64;
    let rounded = (exact - 0.5).ceil().max(0.0) as usize;
    rounded.clamp(1, n - 1)
}

impl SplitSpec {
    /// Stratifies `docs` by gold category. Within each category documents are
    /// ordered by id, shuffled with a generator seeded from `seed`, and the
    /// leading share goes to training.
    pub fn stratified<'a, I>(docs: I, train_fraction: f64, seed: u64) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = &'a Document>,
    {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(CorpusError::InvalidFraction(train_fraction));
        }
        let mut by_category: BTreeMap<&str, Vec<DocId>> = BTreeMap::new();
        for doc in docs {
            by_category.entry(doc.category.as_str()).or_default().push(doc.id);
        }
        if by_category.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut assignment = BTreeMap::new();
        for (category, mut ids) in by_category {
            if ids.len() < 2 {
                return Err(CorpusError::CategoryTooSmall {
                    category: category.to_string(),
                    count: ids.len(),
                });
            }
            ids.sort_unstable();
            ids.shuffle(&mut rng);
            let n_train = train_count(train_fraction, ids.len());
            for (i, id) in ids.into_iter().enumerate() {
                let part = if i < n_train { Partition::Train } else { Partition::Test };
                assignment.insert(id, part);
            }
        }
        Ok(SplitSpec {
            train_fraction,
            seed,
            assignment,
        })
    }

    pub fn partition(&self, id: DocId) -> Option<Partition> {
        self.assignment.get(&id).copied()
    }

    pub fn is_train(&self, id: DocId) -> bool {
        self.partition(id) == Some(Partition::Train)
    }

    pub fn is_test(&self, id: DocId) -> bool {
        self.partition(id) == Some(Partition::Test)
    }

    pub fn ids(&self, part: Partition) -> impl Iterator<Item = DocId> + '_ {
        self.assignment
            .iter()
            .filter(move |(_, p)| **p == part)
            .map(|(id, _)| *id)
    }
}

pub fn make_split(corpus: &Corpus, train_fraction: f64, seed: u64) -> Result<SplitSpec, CorpusError> {
    SplitSpec::stratified(&corpus.documents, train_fraction, seed)
}
