//! On-disk chain directory.
//!
//! Layout: `genesis.json` (canonical config), `blocks.dat` (each block as a
//! u32 little-endian length followed by its bytes, in arrival order) and
//! `manifest.json` (genesis hash, tip hash, height). Writers hold `LOCK`.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use super::{Chain, GenesisConfig};
use crate::codec::{deserialize_block, serialize_block, Block};
use crate::validation::ValidationError;

const GENESIS_FILE: &str = "genesis.json";
const BLOCKS_FILE: &str = "blocks.dat";
const MANIFEST_FILE: &str = "manifest.json";
const LOCK_FILE: &str = "LOCK";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("bad genesis file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("chain directory is locked by another writer")]
    Locked,
    #[error("chain directory already initialized")]
    AlreadyInitialized,
    #[error("no chain in directory")]
    NotInitialized,
    #[error("block file corrupt at record {0}")]
    Corrupt(usize),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::Io(_) => "IOError",
            StoreError::Json(_) => "BadConfig",
            StoreError::Locked => "ChainLocked",
            StoreError::AlreadyInitialized => "AlreadyInitialized",
            StoreError::NotInitialized => "NotInitialized",
            StoreError::Corrupt(_) => "CorruptStore",
            StoreError::Validation(e) => e.code(),
        }
    }
}

#[derive(Debug)]
struct Lock(PathBuf);

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

#[derive(Debug)]
pub struct ChainStore {
    dir: PathBuf,
    _lock: Option<Lock>,
}

impl ChainStore {
    /// Creates the directory layout for a new chain and returns it locked.
    pub fn init(dir: &Path, config: &GenesisConfig) -> Result<ChainStore, StoreError> {
        fs::create_dir_all(dir)?;
        if dir.join(GENESIS_FILE).exists() {
            return Err(StoreError::AlreadyInitialized);
        }
        let chain = Chain::from_genesis(config)?;
        let store = ChainStore { dir: dir.to_path_buf(), _lock: Some(lock(dir)?) };
        fs::write(dir.join(GENESIS_FILE), config.canonical_json())?;
        File::create(dir.join(BLOCKS_FILE))?;
        store.write_manifest(&chain)?;
        Ok(store)
    }

    /// Opens for reading only.
    pub fn open(dir: &Path) -> Result<ChainStore, StoreError> {
        if !dir.join(GENESIS_FILE).exists() {
            return Err(StoreError::NotInitialized);
        }
        Ok(ChainStore { dir: dir.to_path_buf(), _lock: None })
    }

    /// Opens for writing; fails if another writer holds the lock.
    pub fn open_locked(dir: &Path) -> Result<ChainStore, StoreError> {
        let mut store = Self::open(dir)?;
        store._lock = Some(lock(dir)?);
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config(&self) -> Result<GenesisConfig, StoreError> {
        Ok(serde_json::from_str(&fs::read_to_string(self.dir.join(GENESIS_FILE))?)?)
    }

    pub fn blocks(&self) -> Result<Vec<Block>, StoreError> {
        let bytes = fs::read(self.dir.join(BLOCKS_FILE))?;
        let mut out = Vec::new();
        let mut rest = &bytes[..];
        while !rest.is_empty() {
            let corrupt = StoreError::Corrupt(out.len());
            let (len, tail) = rest.split_first_chunk::<4>().ok_or(corrupt)?;
            let len = u32::from_le_bytes(*len) as usize;
            if tail.len() < len {
                return Err(StoreError::Corrupt(out.len()));
            }
            let block = deserialize_block(&tail[..len]).map_err(|_| StoreError::Corrupt(out.len()))?;
            out.push(block);
            rest = &tail[len..];
        }
        Ok(out)
    }

    /// Rebuilds the chain by replaying every stored block.
    pub fn load(&self) -> Result<Chain, StoreError> {
        let mut chain = Chain::from_genesis(&self.config()?)?;
        for block in self.blocks()? {
            chain.apply_block(&block)?;
        }
        Ok(chain)
    }

    /// Records a block the chain has accepted.
    pub fn append(&self, chain: &Chain, block: &Block) -> Result<(), StoreError> {
        let bytes = serialize_block(block);
        let mut f = OpenOptions::new().append(true).open(self.dir.join(BLOCKS_FILE))?;
        f.write_all(&(bytes.len() as u32).to_le_bytes())?;
        f.write_all(&bytes)?;
        f.sync_data()?;
        self.write_manifest(chain)
    }

    fn write_manifest(&self, chain: &Chain) -> Result<(), StoreError> {
        let manifest = json!({
            "genesis_hash": chain.genesis_hash(),
            "tip_hash": chain.tip(),
            "height": chain.height(),
        });
        let tmp = self.dir.join("manifest.json.tmp");
        fs::write(&tmp, manifest.to_string())?;
        fs::rename(tmp, self.dir.join(MANIFEST_FILE))?;
        Ok(())
    }
}

fn lock(dir: &Path) -> Result<Lock, StoreError> {
    let path = dir.join(LOCK_FILE);
    match OpenOptions::new().write(true).create_new(true).open(&path) {
        Ok(_) => Ok(Lock(path)),
        Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(StoreError::Locked),
        Err(e) => Err(e.into()),
    }
}
