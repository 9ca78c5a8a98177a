//! Categorical vocabularies with reserved padding and unknown ids.

use std::collections::{BTreeMap, HashMap};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::types::{Feature, Rally, ALL_FEATURES};
use crate::{Error, Result};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

pub const PAD_TOKEN: &str = "<PAD>";
pub const UNK_TOKEN: &str = "<UNK>";

/// A value-to-id mapping for one categorical feature. Id 0 is padding and
/// id 1 is the unknown marker; observed values get dense ids from 2 in
/// descending frequency order, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    values: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn build<'a, I: IntoIterator<Item = &'a str>>(observed: I) -> Vocabulary {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for value in observed {
            *counts.entry(value).or_insert(0) += 1;
        }
        let mut ordered: Vec<(&str, u64)> = counts.into_iter().collect();
        ordered.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut values = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        values.extend(ordered.into_iter().map(|(v, _)| v.to_string()));
        Vocabulary::from_values(values)
    }

    fn from_values(values: Vec<String>) -> Vocabulary {
        let ids = values
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        Vocabulary { values, ids }
    }

    /// Id for a value, falling back to [`UNK_ID`] for unseen values.
    pub fn encode(&self, value: &str) -> usize {
        self.ids.get(value).copied().unwrap_or(UNK_ID)
    }

    /// Value for an id. Panics if the id is out of range.
    pub fn decode(&self, id: usize) -> &str {
        &self.values[id]
    }

    /// Total number of ids including padding and unknown.
    pub fn size(&self) -> usize {
        self.values.len()
    }

    /// Observed values in id order (ids 2..size).
    pub fn observed(&self) -> &[String] {
        &self.values[2..]
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<&str, usize> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i))
            .collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<String, usize>::deserialize(deserializer)?;
        let mut values = vec![String::new(); map.len()];
        for (value, id) in map {
            if id >= values.len() {
                return Err(D::Error::custom(format!(
                    "vocabulary ids are not dense: id {id} with {} entries",
                    values.len()
                )));
            }
            values[id] = value;
        }
        if values.first().map(String::as_str) != Some(PAD_TOKEN)
            || values.get(1).map(String::as_str) != Some(UNK_TOKEN)
        {
            return Err(D::Error::custom(format!(
                "vocabulary must reserve id 0 for {PAD_TOKEN} and id 1 for {UNK_TOKEN}"
            )));
        }
        Ok(Vocabulary::from_values(values))
    }
}

/// Fitted vocabularies for all categorical features, keyed by feature name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vocabularies {
    map: BTreeMap<String, Vocabulary>,
}

impl Vocabularies {
    pub fn get(&self, feature: Feature) -> &Vocabulary {
        &self.map[feature.name()]
    }

    pub fn validate(&self) -> Result<()> {
        for feature in ALL_FEATURES {
            if !self.map.contains_key(feature.name()) {
                return Err(Error::Config(format!(
                    "vocabulary file is missing feature {:?}",
                    feature.name()
                )));
            }
        }
        Ok(())
    }
}

/// Fits one vocabulary per categorical feature over every stroke.
pub fn build_vocabularies(rallies: &[Rally]) -> Vocabularies {
    let mut map = BTreeMap::new();
    for feature in ALL_FEATURES {
        let observed = rallies
            .iter()
            .flat_map(|r| r.strokes.iter())
            .map(|s| s.feature(feature));
        map.insert(feature.name().to_string(), Vocabulary::build(observed));
    }
    Vocabularies { map }
}
