use std::fs;
use std::path::Path;

use crate::corpus::Dataset;
use crate::llm::{ChatMessage, FinetuneRecord};
use crate::markup::{render_markup, render_triples, MarkerMap};

use super::prompts::{relations_input, relations_system, terms_system};
use super::{ExtractError, Task};

/// One training record per eligible item. The system turn is the task
/// instruction without the examples introduction.
pub fn finetune_records(
    train: &Dataset,
    task: Task,
    m: &MarkerMap,
) -> Result<Vec<FinetuneRecord>, ExtractError> {
    let system = match task {
        Task::Terms => terms_system(m, false),
        Task::Relations => relations_system(false),
    };
    let mut out = Vec::new();
    for item in &train.items {
        let (user, assistant) = match task {
            Task::Terms => {
                let rendered = render_markup(item, m).map_err(|source| ExtractError::Item {
                    id: item.doc.id.clone(),
                    source,
                })?;
                (item.doc.text.clone(), rendered)
            }
            Task::Relations => {
                if !item.is_multi_term() {
                    continue;
                }
                (
                    relations_input(&item.term_list(), &item.doc.text),
                    render_triples(&train.relation_gold(&item.doc.id)),
                )
            }
        };
        out.push(FinetuneRecord {
            messages: vec![
                ChatMessage::system(system.clone()),
                ChatMessage::user(user),
                ChatMessage::assistant(assistant),
            ],
        });
    }
    Ok(out)
}

/// Write the records as one JSON object per line. Returns the record count.
pub fn export_finetune_dataset(
    train: &Dataset,
    task: Task,
    m: &MarkerMap,
    path: impl AsRef<Path>,
) -> Result<usize, ExtractError> {
    let path = path.as_ref();
    let records = finetune_records(train, task, m)?;
    let mut body = String::new();
    for r in &records {
        body.push_str(&serde_json::to_string(r).expect("record serializes"));
        body.push('\n');
    }
    fs::write(path, body).map_err(|source| ExtractError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(records.len())
}
