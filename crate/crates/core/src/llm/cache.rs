//! Embedding cache keyed by (model, content hash), optionally backed by an
//! append-only line file.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::text::full_hash;

#[derive(Serialize, Deserialize)]
struct CacheLine {
    model: String,
    hash: String,
    values: Vec<f64>,
}

#[derive(Default)]
pub struct EmbeddingCache {
    entries: RwLock<HashMap<(String, String), Vec<f64>>>,
    dims: RwLock<HashMap<String, usize>>,
    file: Option<Mutex<fs::File>>,
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        EmbeddingCache::default()
    }

    /// Open (or create) a cache file and load its entries. A torn final
    /// line from an interrupted write is ignored.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let cache = EmbeddingCache::default();
        if path.exists() {
            let reader = BufReader::new(fs::File::open(path)?);
            for line in reader.lines() {
                let line = line?;
                match serde_json::from_str::<CacheLine>(&line) {
                    Ok(c) => {
                        cache
                            .dims
                            .write()
                            .unwrap()
                            .insert(c.model.clone(), c.values.len());
                        cache
                            .entries
                            .write()
                            .unwrap()
                            .insert((c.model, c.hash), c.values);
                    }
                    Err(e) => log::warn!("skipping bad cache line in {}: {e}", path.display()),
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(EmbeddingCache {
            file: Some(Mutex::new(file)),
            ..cache
        })
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, model: &str, text: &str) -> Option<Vec<f64>> {
        self.entries
            .read()
            .unwrap()
            .get(&(model.to_string(), full_hash(text.as_bytes())))
            .cloned()
    }

    pub fn insert(&self, model: &str, text: &str, values: Vec<f64>) -> Result<(), GatewayError> {
        // One writer at a time keeps the dimension check and the append atomic.
        let mut dims = self.dims.write().unwrap();
        if let Some(&expected) = dims.get(model) {
            if expected != values.len() {
                return Err(GatewayError::DimensionMismatch {
                    model: model.to_string(),
                    expected,
                    got: values.len(),
                });
            }
        }
        let hash = full_hash(text.as_bytes());
        if let Some(file) = &self.file {
            let line = serde_json::to_string(&CacheLine {
                model: model.to_string(),
                hash: hash.clone(),
                values: values.clone(),
            })
            .expect("cache line serializes");
            let mut f = file.lock().unwrap();
            writeln!(f, "{line}")?;
        }
        dims.insert(model.to_string(), values.len());
        self.entries
            .write()
            .unwrap()
            .insert((model.to_string(), hash), values);
        Ok(())
    }
}
