//! On-disk cache of built hypothesis spaces.
//!
//! A cache entry is a JSON document:
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "key": "<sha256 hex of mdp, rewards, prior weights and tie tolerance>",
//!   "num_states": N, "num_actions": A,
//!   "hypotheses": [{"source_reward": k, "members": [...], "labels": "<hex>"}],
//!   "prior_bits": ["<f64 bits as 16 hex digits>", ...],
//!   "cell_of_state": [...]
//! }
//! ```
//!
//! `labels` packs each state's greedy set as `ceil(A / 8)` little-endian bytes.
//! Rewards are not stored; they are supplied again when loading.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hypothesis::{build_space, HypothesisSpace};
use crate::mdp::{ActionSet, Mdp, RewardFunction};

pub const CACHE_FORMAT_VERSION: u32 = 1;

/// Environment variable naming the cache directory.
pub const CACHE_DIR_ENV: &str = "GBSIRL_CACHE_DIR";

#[derive(Serialize, Deserialize)]
struct HypothesisRecord {
    source_reward: usize,
    members: Vec<usize>,
    labels: String,
}

#[derive(Serialize, Deserialize)]
struct SpaceFile {
    format_version: u32,
    key: String,
    num_states: usize,
    num_actions: usize,
    hypotheses: Vec<HypothesisRecord>,
    prior_bits: Vec<String>,
    cell_of_state: Vec<usize>,
}

/// Content hash identifying a space build.
pub fn space_key(mdp: &Mdp, rewards: &[RewardFunction], prior_weights: &[f64], tie_tol: f64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(CACHE_FORMAT_VERSION.to_le_bytes());
    mdp.write_canonical(&mut |b| hasher.update(b));
    hasher.update((rewards.len() as u64).to_le_bytes());
    for r in rewards {
        r.write_canonical(&mut |b| hasher.update(b));
    }
    for w in prior_weights {
        hasher.update(w.to_le_bytes());
    }
    hasher.update(tie_tol.to_le_bytes());
    hex::encode(hasher.finalize())
}

pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(CACHE_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

/// Location of the entry for `key` inside a cache directory.
pub fn space_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("space-{key}.json"))
}

fn bytes_per_state(num_actions: usize) -> usize {
    num_actions.div_ceil(8)
}

pub fn save_space(space: &HypothesisSpace, key: &str, path: &Path) -> Result<()> {
    let width = bytes_per_state(space.num_actions());
    let hypotheses = space
        .hypotheses()
        .iter()
        .map(|h| {
            let mut bytes = Vec::with_capacity(width * space.num_states());
            for s in h.labels() {
                bytes.extend_from_slice(&s.bits().to_le_bytes()[..width]);
            }
            HypothesisRecord {
                source_reward: h.source_reward_index(),
                members: h.members().to_vec(),
                labels: hex::encode(bytes),
            }
        })
        .collect();
    let file = SpaceFile {
        format_version: CACHE_FORMAT_VERSION,
        key: key.to_string(),
        num_states: space.num_states(),
        num_actions: space.num_actions(),
        hypotheses,
        prior_bits: space.prior().iter().map(|p| format!("{:016x}", p.to_bits())).collect(),
        cell_of_state: space.partition().cell_of_state().to_vec(),
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    // Write then rename so concurrent readers never see a partial file.
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, serde_json::to_vec(&file)?)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads a cached space. `pool` is the reward list the space was built from
/// (may be empty for label-only spaces); `expected_key`, when given, must
/// match the stored key.
pub fn load_space(path: &Path, pool: &[RewardFunction], expected_key: Option<&str>) -> Result<HypothesisSpace> {
    let file: SpaceFile = serde_json::from_slice(&fs::read(path)?)?;
    let corrupt = |m: &str| Error::Argument(format!("space cache {}: {m}", path.display()));
    if file.format_version != CACHE_FORMAT_VERSION {
        return Err(corrupt(&format!("unsupported format version {}", file.format_version)));
    }
    if let Some(k) = expected_key {
        if k != file.key {
            return Err(corrupt("key mismatch"));
        }
    }
    let width = bytes_per_state(file.num_actions);
    let mut parts = Vec::with_capacity(file.hypotheses.len());
    for rec in file.hypotheses {
        let bytes = hex::decode(&rec.labels).map_err(|e| corrupt(&e.to_string()))?;
        if bytes.len() != width * file.num_states {
            return Err(corrupt("label length mismatch"));
        }
        let labels: Vec<ActionSet> = bytes
            .chunks(width)
            .map(|c| {
                let mut word = [0u8; 4];
                word[..width].copy_from_slice(c);
                ActionSet::from_bits(u32::from_le_bytes(word))
            })
            .collect();
        parts.push((labels, rec.source_reward, rec.members));
    }
    let prior = file
        .prior_bits
        .iter()
        .map(|s| u64::from_str_radix(s, 16).map(f64::from_bits))
        .collect::<std::result::Result<Vec<f64>, _>>()
        .map_err(|e| corrupt(&e.to_string()))?;
    if prior.len() != parts.len() {
        return Err(corrupt("prior length mismatch"));
    }
    let space = HypothesisSpace::from_parts(file.num_states, file.num_actions, parts, prior, pool)?;
    if space.partition().cell_of_state() != file.cell_of_state.as_slice() {
        return Err(corrupt("stored partition does not match labels"));
    }
    Ok(space)
}

/// [`build_space`] backed by a cache directory, if one is given.
pub fn build_space_cached(
    mdp: &Mdp,
    rewards: &[RewardFunction],
    prior_weights: &[f64],
    tie_tol: f64,
    cache_dir: Option<&Path>,
) -> Result<HypothesisSpace> {
    let Some(dir) = cache_dir else {
        return build_space(mdp, rewards, prior_weights, tie_tol);
    };
    let key = space_key(mdp, rewards, prior_weights, tie_tol);
    let path = space_path(dir, &key);
    if path.exists() {
        match load_space(&path, rewards, Some(&key)) {
            Ok(space) => {
                log::debug!("loaded hypothesis space from {}", path.display());
                return Ok(space);
            }
            Err(e) => log::warn!("ignoring unreadable cache entry: {e}"),
        }
    }
    let space = build_space(mdp, rewards, prior_weights, tie_tol)?;
    save_space(&space, &key, &path)?;
    Ok(space)
}
