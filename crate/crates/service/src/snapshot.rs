use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use arc_swap::ArcSwapOption;
use serde::Serialize;
use tabassist_core::index::{load_index, IndexManifest, PersistError};
use tabassist_core::kb::{open_kb, KbError, KbFiles};
use tabassist_core::Engine;
use thiserror::Error;

/// An immutable engine plus the manifest it was built from.
#[derive(Debug)]
pub struct Snapshot {
    pub version: u64,
    pub manifest: IndexManifest,
    pub kb_sha256: String,
    pub engine: Engine,
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotInfo {
    pub version: u64,
    pub manifest: IndexManifest,
    pub kb_sha256: String,
}

impl Snapshot {
    pub fn info(&self) -> SnapshotInfo {
        SnapshotInfo { version: self.version, manifest: self.manifest.clone(), kb_sha256: self.kb_sha256.clone() }
    }
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("index {}: {source}", path.display())]
    Index { path: PathBuf, source: PersistError },
    #[error("knowledge base {}: {source}", path.display())]
    Kb { path: PathBuf, source: KbError },
    #[error("knowledge base hash {found} does not match the index manifest ({expected})")]
    KbMismatch { expected: String, found: String },
}

/// Where snapshots are loaded from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotSource {
    pub index_dir: PathBuf,
    pub kb: KbFiles,
}

impl SnapshotSource {
    pub fn new(index_dir: &Path, kb: &Path) -> Self {
        SnapshotSource { index_dir: index_dir.to_path_buf(), kb: KbFiles::locate(kb, None) }
    }

    /// Loads the index and KB. A manifest with an empty KB hash accepts any
    /// KB; otherwise the hashes must agree.
    pub fn load(&self, version: u64) -> Result<Snapshot, SnapshotError> {
        let (index, manifest) = load_index(&self.index_dir)
            .map_err(|source| SnapshotError::Index { path: self.index_dir.clone(), source })?;
        let opened = open_kb(&self.kb).map_err(|source| SnapshotError::Kb { path: self.kb.kb.clone(), source })?;
        if !manifest.kb_sha256.is_empty() && manifest.kb_sha256 != opened.sha256 {
            return Err(SnapshotError::KbMismatch { expected: manifest.kb_sha256, found: opened.sha256 });
        }
        let skipped = opened.loaded.errors.len() + opened.redirect_errors.len();
        if skipped > 0 {
            tracing::warn!(skipped, "knowledge base records skipped");
        }
        Ok(Snapshot { version, manifest, kb_sha256: opened.sha256, engine: Engine::new(opened.loaded.store, index) })
    }
}

/// The served snapshot and reload bookkeeping. Readers take a full `Arc`
/// of the current snapshot, so a swap never tears a request.
#[derive(Debug)]
pub struct SnapshotStore {
    current: ArcSwapOption<Snapshot>,
    loading: Mutex<Option<u64>>,
    last_error: Mutex<Option<String>>,
    next_version: AtomicU64,
}

/// Proof that a reload slot was claimed; hand it back to
/// [`SnapshotStore::finish_reload`].
#[derive(Debug)]
pub struct ReloadTicket {
    pub version: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotStatus {
    pub current: Option<SnapshotInfo>,
    pub loading: Option<u64>,
    pub last_error: Option<String>,
}

impl Default for SnapshotStore {
    fn default() -> Self {
        SnapshotStore {
            current: ArcSwapOption::empty(),
            loading: Mutex::new(None),
            last_error: Mutex::new(None),
            next_version: AtomicU64::new(1),
        }
    }
}

impl SnapshotStore {
    pub fn current(&self) -> Option<Arc<Snapshot>> {
        self.current.load_full()
    }

    pub fn next_version(&self) -> u64 {
        self.next_version.fetch_add(1, Ordering::Relaxed)
    }

    /// Installs a snapshot built elsewhere.
    pub fn install(&self, snapshot: Snapshot) {
        self.next_version.fetch_max(snapshot.version + 1, Ordering::Relaxed);
        tracing::info!(version = snapshot.version, "snapshot installed");
        self.current.store(Some(Arc::new(snapshot)));
    }

    /// Claims the reload slot, or `None` when a reload is already running.
    pub fn begin_reload(&self) -> Option<ReloadTicket> {
        let mut loading = self.loading.lock().unwrap();
        if loading.is_some() {
            return None;
        }
        let version = self.next_version();
        *loading = Some(version);
        Some(ReloadTicket { version })
    }

    pub fn finish_reload(&self, ticket: ReloadTicket, result: Result<Snapshot, SnapshotError>) {
        match result {
            Ok(snapshot) => {
                self.install(snapshot);
                *self.last_error.lock().unwrap() = None;
            }
            Err(e) => {
                tracing::error!(version = ticket.version, error = %e, "reload failed");
                *self.last_error.lock().unwrap() = Some(e.to_string());
            }
        }
        *self.loading.lock().unwrap() = None;
    }

    pub fn status(&self) -> SnapshotStatus {
        SnapshotStatus {
            current: self.current().map(|s| s.info()),
            loading: *self.loading.lock().unwrap(),
            last_error: self.last_error.lock().unwrap().clone(),
        }
    }
}
