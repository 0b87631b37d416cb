//! The on-disk set of reference profiles.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::emotion::EmotionVocabulary;
use crate::error::{Error, Result};
use crate::reference::{Polarity, ReferenceProfile};

pub const SCHEMA_VERSION: u32 = 1;

/// Name of the reference screening is built around; loading warns without it.
pub const PRIMARY_REFERENCE: &str = "suicide";

/// An ordered collection of uniquely named reference profiles.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    references: Vec<ReferenceProfile>,
}

#[derive(Serialize, Deserialize)]
struct RegistryFile {
    schema_version: u32,
    vocabulary: EmotionVocabulary,
    references: Vec<ReferenceProfile>,
}

impl Registry {
    pub fn new(references: Vec<ReferenceProfile>) -> Result<Self> {
        let registry = Self { references };
        registry.validate()?;
        Ok(registry)
    }

    fn validate(&self) -> Result<()> {
        for (i, r) in self.references.iter().enumerate() {
            if r.name.trim().is_empty() {
                return Err(Error::schema(format!("references[{i}].name"), "name is empty"));
            }
            if self.references[..i].iter().any(|o| o.name == r.name) {
                return Err(Error::schema(
                    format!("references[{i}].name"),
                    format!("duplicate reference `{}`", r.name),
                ));
            }
            ReferenceProfile::check_polarity(&r.name, r.polarity).map_err(|e| match e {
                Error::SchemaViolation { reason, .. } => Error::schema(format!("references[{i}].polarity"), reason),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn references(&self) -> &[ReferenceProfile] {
        &self.references
    }

    pub fn len(&self) -> usize {
        self.references.len()
    }

    pub fn is_empty(&self) -> bool {
        self.references.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&ReferenceProfile> {
        self.references.iter().find(|r| r.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&ReferenceProfile> {
        self.get(name).ok_or_else(|| Error::UnknownReference(name.to_string()))
    }

    /// Replaces the reference with the same name in place, or appends it.
    pub fn upsert(&mut self, reference: ReferenceProfile) -> Result<()> {
        ReferenceProfile::check_polarity(&reference.name, reference.polarity)?;
        match self.references.iter_mut().find(|r| r.name == reference.name) {
            Some(slot) => *slot = reference,
            None => self.references.push(reference),
        }
        Ok(())
    }

    pub fn remove(&mut self, name: &str) -> Option<ReferenceProfile> {
        let i = self.references.iter().position(|r| r.name == name)?;
        Some(self.references.remove(i))
    }

    /// References taking part in screening, in registry order.
    pub fn screening_set(&self, include_unused: bool) -> Vec<&ReferenceProfile> {
        self.references
            .iter()
            .filter(|r| include_unused || r.polarity != Polarity::Unused)
            .collect()
    }

    /// Non-fatal problems a screening run would run into.
    pub fn warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        if self.get(PRIMARY_REFERENCE).is_none() {
            warnings.push(format!("registry has no `{PRIMARY_REFERENCE}` reference"));
        }
        for (polarity, label) in [(Polarity::Positive, "positive"), (Polarity::Negative, "negative")] {
            if !self.references.iter().any(|r| r.polarity == polarity) {
                warnings.push(format!("registry has no {label} reference; screening will fail"));
            }
        }
        warnings
    }

    pub fn to_json(&self) -> Result<String> {
        let file = RegistryFile {
            schema_version: SCHEMA_VERSION,
            vocabulary: EmotionVocabulary,
            references: self.references.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    /// Parses and validates a registry document. Errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: RegistryFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::schema(path, e.into_inner().to_string())
        })?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::schema(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", file.schema_version),
            ));
        }
        Self::new(file.references)
    }

    /// Writes the registry to a sibling temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        std::fs::write(&tmp, self.to_json()?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Loads a registry, logging every warning.
    pub fn load(path: &Path) -> Result<Self> {
        let registry = Self::from_json(&std::fs::read_to_string(path)?)?;
        for w in registry.warnings() {
            log::warn!("{}: {w}", path.display());
        }
        Ok(registry)
    }

    /// Loads a registry, or starts an empty one when the file does not exist.
    pub fn load_or_default(path: &Path) -> Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::from_json(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e.into()),
        }
    }
}
