//! Recorded completions keyed by request digest.
//!
//! Each digest owns `<digest>.json`, holding the list of completions
//! recorded for it, and `<digest>.meta.json`, holding the request and the
//! time of the last write. Trial `i` replays completion `i mod n`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::RwLock;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::request::CompletionRequest;
use crate::LlmError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureFile {
    pub digest: String,
    pub completions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureMeta {
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub messages: Vec<crate::request::Message>,
    pub recorded_at_unix: u64,
}

/// Directory-backed store. Reads share a lock; writes take it exclusively.
#[derive(Debug)]
pub struct FixtureStore {
    dir: PathBuf,
    cache: RwLock<BTreeMap<String, Vec<String>>>,
}

impl FixtureStore {
    pub fn open(dir: impl Into<PathBuf>) -> Self {
        FixtureStore {
            dir: dir.into(),
            cache: RwLock::new(BTreeMap::new()),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.json"))
    }

    pub fn meta_path_for(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.meta.json"))
    }

    fn read_file(&self, digest: &str) -> Result<Option<Vec<String>>, LlmError> {
        let path = self.path_for(digest);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(LlmError::Io(format!("{}: {e}", path.display()))),
        };
        let file: FixtureFile =
            serde_json::from_str(&text).map_err(|e| LlmError::MalformedFixture(format!("{}: {e}", path.display())))?;
        if file.digest != digest {
            return Err(LlmError::MalformedFixture(format!(
                "{} records digest {}",
                path.display(),
                file.digest
            )));
        }
        Ok(Some(file.completions))
    }

    /// All completions recorded for `digest`, or `None`.
    pub fn completions(&self, digest: &str) -> Result<Option<Vec<String>>, LlmError> {
        if let Some(c) = self.cache.read().expect("fixture lock").get(digest) {
            return Ok(Some(c.clone()));
        }
        let loaded = self.read_file(digest)?;
        if let Some(c) = &loaded {
            self.cache
                .write()
                .expect("fixture lock")
                .insert(digest.to_string(), c.clone());
        }
        Ok(loaded)
    }

    /// The completion replayed for trial `trial`.
    pub fn lookup(&self, req: &CompletionRequest, trial: usize) -> Result<String, LlmError> {
        let digest = req.digest();
        match self.completions(&digest)? {
            Some(c) if !c.is_empty() => Ok(c[trial % c.len()].clone()),
            _ => Err(LlmError::MissingFixture { digest }),
        }
    }

    /// Stores `text` as the completion for trial `trial`, appending when
    /// the trial is new.
    pub fn record(&self, req: &CompletionRequest, trial: usize, text: &str) -> Result<(), LlmError> {
        let digest = req.digest();
        let mut cache = self.cache.write().expect("fixture lock");
        let mut completions = match cache.get(&digest) {
            Some(c) => c.clone(),
            None => self.read_file(&digest)?.unwrap_or_default(),
        };
        if trial < completions.len() {
            completions[trial] = text.to_string();
        } else {
            completions.push(text.to_string());
        }
        fs::create_dir_all(&self.dir).map_err(|e| LlmError::Io(format!("{}: {e}", self.dir.display())))?;
        let file = FixtureFile {
            digest: digest.clone(),
            completions: completions.clone(),
        };
        let meta = FixtureMeta {
            model: req.model.clone(),
            temperature: req.temperature,
            top_p: req.top_p,
            messages: req.messages.clone(),
            recorded_at_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        write_atomic(&self.path_for(&digest), &to_pretty(&file))?;
        write_atomic(&self.meta_path_for(&digest), &to_pretty(&meta))?;
        cache.insert(digest, completions);
        Ok(())
    }

    /// Digests with a fixture file in the store directory, sorted.
    pub fn digests(&self) -> Result<Vec<String>, LlmError> {
        let entries = match fs::read_dir(&self.dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(LlmError::Io(format!("{}: {e}", self.dir.display()))),
        };
        let mut out: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| !n.ends_with(".meta.json"))
            .filter_map(|n| n.strip_suffix(".json").map(str::to_string))
            .collect();
        out.sort();
        Ok(out)
    }
}

fn to_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("fixture serializes");
    s.push('\n');
    s
}

fn write_atomic(path: &Path, text: &str) -> Result<(), LlmError> {
    let io = |e: std::io::Error| LlmError::Io(format!("{}: {e}", path.display()));
    let tmp = path.with_extension("json.tmp");
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}
