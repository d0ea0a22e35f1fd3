use std::collections::BTreeMap;

use serde_json::Value;

use super::{Corpus, CorpusError, DocId, Document, MAX_DOCUMENT_CHARS};

const TEXT: &str = "text";
const CATEGORY: &str = "category";

fn check_length(text: &str, row: usize) -> Result<(), CorpusError> {
    if text.chars().count() > MAX_DOCUMENT_CHARS {
        return Err(CorpusError::DocumentTooLong { row });
    }
    Ok(())
}

fn resolve_category(
    given: Option<&str>,
    default_category: Option<&str>,
    row: usize,
) -> Result<String, CorpusError> {
    given
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .or(default_category)
        .map(str::to_string)
        .ok_or(CorpusError::MissingCategory { row })
}

/// Reads a header-first, comma-separated file with a `text` column and an
/// optional `category` column. Other columns are kept as source metadata.
pub fn ingest_csv(bytes: &[u8], default_category: Option<&str>) -> Result<Corpus, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CorpusError::MalformedCsv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_lowercase())
        .collect();
    let text_col = headers
        .iter()
        .position(|h| h == TEXT)
        .ok_or(CorpusError::MissingTextColumn)?;
    let category_col = headers.iter().position(|h| h == CATEGORY);
    if category_col.is_none() && default_category.is_none() {
        return Err(CorpusError::MissingCategory { row: 1 });
    }

    let mut documents = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CorpusError::MalformedCsv(e.to_string()))?;
        let row = idx + 1;
        let text = record.get(text_col).unwrap_or_default();
        check_length(text, row)?;
        let category = resolve_category(category_col.and_then(|c| record.get(c)), default_category, row)?;
        let mut doc = Document::new(DocId(idx as u64), text, category);
        doc.source_meta = headers
            .iter()
            .zip(record.iter())
            .enumerate()
            .filter(|(col, _)| *col != text_col && Some(*col) != category_col)
            .map(|(_, (h, v))| (h.clone(), v.to_string()))
            .collect();
        documents.push(doc);
    }
    Corpus::from_documents("", documents)
}

/// Reads a JSON array of objects, each carrying a string `text` and optionally
/// a string `category`. Other string fields become source metadata.
pub fn ingest_json(bytes: &[u8], default_category: Option<&str>) -> Result<Corpus, CorpusError> {
    let rows: Vec<serde_json::Map<String, Value>> =
        serde_json::from_slice(bytes).map_err(|e| CorpusError::MalformedJson(e.to_string()))?;
    let mut documents = Vec::with_capacity(rows.len());
    for (idx, obj) in rows.into_iter().enumerate() {
        let row = idx + 1;
        let text = match obj.get(TEXT) {
            Some(Value::String(s)) => s.as_str(),
            Some(_) => {
                return Err(CorpusError::MalformedJson(format!("row {row}: `text` is not a string")))
            }
            None => return Err(CorpusError::MissingTextColumn),
        };
        check_length(text, row)?;
        let category = match obj.get(CATEGORY) {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.as_str()),
            Some(_) => {
                return Err(CorpusError::MalformedJson(format!(
                    "row {row}: `category` is not a string"
                )))
            }
        };
        let category = resolve_category(category, default_category, row)?;
        let mut doc = Document::new(DocId(idx as u64), text, category);
        doc.source_meta = obj
            .iter()
            .filter(|(k, _)| k.as_str() != TEXT && k.as_str() != CATEGORY)
            .filter_map(|(k, v)| v.as_str().map(|s| (k.clone(), s.to_string())))
            .collect::<BTreeMap<_, _>>();
        documents.push(doc);
    }
    Corpus::from_documents("", documents)
}

/// Writes the raw texts and gold categories back out as `text,category` CSV.
pub fn to_csv(corpus: &Corpus) -> Vec<u8> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([TEXT, CATEGORY]).expect("in-memory write");
    for doc in &corpus.documents {
        writer
            .write_record([doc.raw_text.as_str(), doc.category.as_str()])
            .expect("in-memory write");
    }
    writer.into_inner().expect("in-memory flush")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn overlong_documents_are_rejected() {
        let long = "a".repeat(MAX_DOCUMENT_CHARS + 1);
        let csv = format!("text,category\nok,A\n{long},B");
        assert_eq!(ingest_csv(csv.as_bytes(), None), Err(CorpusError::DocumentTooLong { row: 2 }));
        let json = format!(r#"[{{"text":"{long}","category":"A"}}]"#);
        assert_eq!(ingest_json(json.as_bytes(), None), Err(CorpusError::DocumentTooLong { row: 1 }));
        let exact = format!("text\n{}", "a".repeat(MAX_DOCUMENT_CHARS));
        assert!(ingest_csv(exact.as_bytes(), Some("A")).is_ok());
    }

    #[test]
    fn csv_with_category_column() {
        let corpus = ingest_csv(b"text,category\nhello,A\nworld,B", None).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.categories.iter().collect::<Vec<_>>(), ["A", "B"]);
        assert_eq!(corpus.documents[1].id, DocId(1));
        assert_eq!(corpus.documents[1].tokens, ["world"]);
    }

    #[test]
    fn csv_default_category() {
        let corpus = ingest_csv(b"text\nhello", Some("A")).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.documents[0].category, "A");
    }

    #[test]
    fn csv_errors() {
        assert_eq!(ingest_csv(b"body\nhello", Some("A")), Err(CorpusError::MissingTextColumn));
        assert_eq!(
            ingest_csv(b"text\nhello", None),
            Err(CorpusError::MissingCategory { row: 1 })
        );
        assert_eq!(ingest_csv(b"text,category\n", None), Err(CorpusError::EmptyCorpus));
        assert!(matches!(
            ingest_csv(b"text,category\na,b,c\n", None),
            Err(CorpusError::MalformedCsv(_))
        ));
        assert!(matches!(
            ingest_csv(b"text,category\n\xff\xfe,A\n", None),
            Err(CorpusError::MalformedCsv(_))
        ));
    }

    #[test]
    fn csv_keeps_extra_columns_and_quoting() {
        let corpus = ingest_csv(
            b"handle,text,category\n@bob,\"Hi, @alice https://x.y\",A\n",
            None,
        )
        .unwrap();
        let doc = &corpus.documents[0];
        assert_eq!(doc.clean_text, "Hi, @mention http://link");
        assert_eq!(doc.source_meta["handle"], "@bob");
    }

    #[test]
    fn csv_empty_category_cell_falls_back() {
        let corpus = ingest_csv(b"text,category\nhello,\n", Some("Z")).unwrap();
        assert_eq!(corpus.documents[0].category, "Z");
        assert_eq!(
            ingest_csv(b"text,category\nhello,\n", None),
            Err(CorpusError::MissingCategory { row: 1 })
        );
    }

    #[test]
    fn json_examples() {
        let corpus = ingest_json(br#"[{"text":"a","category":"X"}]"#, None).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.categories.iter().collect::<Vec<_>>(), ["X"]);

        assert_eq!(ingest_json(b"[]", None), Err(CorpusError::EmptyCorpus));

        let corpus = ingest_json(br#"[{"text":"a"},{"text":"b"}]"#, Some("Y")).unwrap();
        assert!(corpus.documents.iter().all(|d| d.category == "Y"));
    }

    #[test]
    fn json_errors() {
        assert_eq!(
            ingest_json(br#"[{"body":"a"}]"#, Some("Y")),
            Err(CorpusError::MissingTextColumn)
        );
        assert_eq!(
            ingest_json(br#"[{"text":"a"}]"#, None),
            Err(CorpusError::MissingCategory { row: 1 })
        );
        assert!(matches!(ingest_json(b"{", None), Err(CorpusError::MalformedJson(_))));
        assert!(matches!(ingest_json(br#"{"text":"a"}"#, None), Err(CorpusError::MalformedJson(_))));
        assert!(matches!(
            ingest_json(br#"[{"text":3}]"#, Some("Y")),
            Err(CorpusError::MalformedJson(_))
        ));
    }

    proptest! {
        #[test]
        fn csv_round_trips_texts_and_categories(
            rows in prop::collection::vec(("[^\r]{0,30}", "[A-Za-z][A-Za-z ]{0,8}[A-Za-z]"), 1..20)
        ) {
            let docs = rows
                .iter()
                .enumerate()
                .map(|(i, (t, c))| Document::new(DocId(i as u64), t.clone(), c.clone()))
                .collect();
            let corpus = Corpus::from_documents("rt", docs).unwrap();
            let again = ingest_csv(&to_csv(&corpus), None).unwrap();
            prop_assert_eq!(again.len(), corpus.len());
            for (a, b) in corpus.documents.iter().zip(&again.documents) {
                prop_assert_eq!(&a.raw_text, &b.raw_text);
                prop_assert_eq!(&a.category, &b.category);
            }
        }
    }
}
