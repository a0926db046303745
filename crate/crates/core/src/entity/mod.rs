//! Typed code-entity extraction.
//!
//! An [`EntitySet`] maps each [`EntityType`] of a fixed 20-slot registry to
//! the lowercase surface strings found in one snippet. Two backends produce
//! them: [`LocalLexical`], a deterministic rule-based extractor, and
//! [`RemoteLlm`], which queries an NER model through the generation gateway.

mod batch;
mod local;
mod remote;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::Language;

pub use batch::{extract_batch, BatchSummary, EntityCache, EntityCacheRecord};
pub use local::LocalLexical;
pub use remote::RemoteLlm;

/// Bumped whenever the registry or the local extraction rules change; part of
/// every entity cache key.
pub const REGISTRY_VERSION: u32 = 1;

/// Entity type names. The first nine are the normative types; the remaining
/// slots are reserved so the registry always has 20 entries.
pub const REGISTRY: [&str; 20] = [
    "function",
    "class",
    "library",
    "module",
    "variable",
    "value",
    "data-type",
    "data-structure",
    "algorithm",
    "reserved-10",
    "reserved-11",
    "reserved-12",
    "reserved-13",
    "reserved-14",
    "reserved-15",
    "reserved-16",
    "reserved-17",
    "reserved-18",
    "reserved-19",
    "reserved-20",
];

/// Index into [`REGISTRY`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityType(u8);

impl EntityType {
    pub const FUNCTION: EntityType = EntityType(0);
    pub const CLASS: EntityType = EntityType(1);
    pub const LIBRARY: EntityType = EntityType(2);
    pub const MODULE: EntityType = EntityType(3);
    pub const VARIABLE: EntityType = EntityType(4);
    pub const VALUE: EntityType = EntityType(5);
    pub const DATA_TYPE: EntityType = EntityType(6);
    pub const DATA_STRUCTURE: EntityType = EntityType(7);
    pub const ALGORITHM: EntityType = EntityType(8);

    pub const COUNT: usize = REGISTRY.len();
    /// Types with a defined meaning, i.e. not reserved slots.
    pub const NORMATIVE: [EntityType; 9] = [
        Self::FUNCTION,
        Self::CLASS,
        Self::LIBRARY,
        Self::MODULE,
        Self::VARIABLE,
        Self::VALUE,
        Self::DATA_TYPE,
        Self::DATA_STRUCTURE,
        Self::ALGORITHM,
    ];

    pub fn all() -> impl Iterator<Item = EntityType> {
        (0..Self::COUNT as u8).map(EntityType)
    }

    pub fn from_index(index: usize) -> Option<EntityType> {
        (index < Self::COUNT).then_some(EntityType(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        REGISTRY[self.index()]
    }

    pub fn is_reserved(self) -> bool {
        self.index() >= Self::NORMATIVE.len()
    }

    /// Human-readable label, e.g. "data type".
    pub fn label(self) -> String {
        self.name().replace('-', " ")
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EntityType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '_'], "-");
        REGISTRY
            .iter()
            .position(|n| *n == norm)
            .map(|i| EntityType(i as u8))
            .ok_or_else(|| format!("unknown entity type `{s}`"))
    }
}

impl Serialize for EntityType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for EntityType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Entity type → set of lowercase surface strings. Absent types are empty.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntitySet {
    entities: BTreeMap<EntityType, BTreeSet<String>>,
}

static EMPTY: BTreeSet<String> = BTreeSet::new();

impl EntitySet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `surface` lowercased; blank strings are ignored.
    pub fn insert(&mut self, ty: EntityType, surface: &str) -> bool {
        let s = surface.trim().to_lowercase();
        if s.is_empty() {
            return false;
        }
        self.entities.entry(ty).or_default().insert(s)
    }

    pub fn get(&self, ty: EntityType) -> &BTreeSet<String> {
        self.entities.get(&ty).unwrap_or(&EMPTY)
    }

    pub fn is_empty(&self) -> bool {
        self.entities.values().all(BTreeSet::is_empty)
    }

    /// Non-empty types with their surfaces, in registry order.
    pub fn iter(&self) -> impl Iterator<Item = (EntityType, &BTreeSet<String>)> {
        self.entities
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| (*k, v))
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.entities.values().flatten().map(String::as_str)
    }

    pub fn remove_type(&mut self, ty: EntityType) {
        self.entities.remove(&ty);
    }
}

impl PartialEq for EntitySet {
    fn eq(&self, other: &Self) -> bool {
        self.iter().eq(other.iter())
    }
}

impl Eq for EntitySet {}

impl<const N: usize> From<[(EntityType, &[&str]); N]> for EntitySet {
    fn from(items: [(EntityType, &[&str]); N]) -> Self {
        let mut set = EntitySet::new();
        for (ty, surfaces) in items {
            for s in surfaces {
                set.insert(ty, s);
            }
        }
        set
    }
}

#[derive(Debug, Error)]
pub enum EntityError {
    #[error("language {0} is not supported by this backend")]
    UnsupportedLanguage(Language),
    #[error("code is empty")]
    EmptyCode,
    #[error("remote NER backend returned {status}: {excerpt}")]
    RemoteBackendError { status: u16, excerpt: String },
    #[error("sample {id}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<EntityError>,
    },
    #[error("entity cache {path}: {reason}")]
    Cache { path: String, reason: String },
}

impl EntityError {
    pub fn is_upstream(&self) -> bool {
        match self {
            EntityError::RemoteBackendError { .. } => true,
            EntityError::Sample { source, .. } => source.is_upstream(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    LocalLexical,
    RemoteLlm,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::LocalLexical => "local-lexical",
            BackendKind::RemoteLlm => "remote-llm",
        }
    }
}

/// Anything that turns a snippet into an [`EntitySet`].
pub trait EntityExtractor: Send + Sync {
    /// Stable identifier recorded in the cache; two extractors with the same
    /// id must produce the same output.
    fn backend_id(&self) -> String;

    fn extract(&self, code: &str, language: Language) -> Result<EntitySet, EntityError>;
}
