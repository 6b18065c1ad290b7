use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Text,
    Number,
    /// Seconds.
    Duration,
    ObjectLabel,
    PersonName,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntitySpec {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: EntityKind,
}

impl EntitySpec {
    pub fn new(name: impl Into<String>, kind: EntityKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionPolicy {
    /// Runs on the dispatching thread before `dispatch` returns.
    #[default]
    Inline,
    /// Runs on the skill executor's worker thread.
    Deferred,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillLevel {
    /// Sees only the abstract facade: speak, notify, query state.
    #[default]
    HighLevel,
    /// Additionally gets device outputs such as locomotion.
    LowLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkillDescriptor {
    pub id: String,
    #[serde(default)]
    pub required_entities: Vec<EntitySpec>,
    #[serde(default)]
    pub optional_entities: Vec<EntitySpec>,
    #[serde(default)]
    pub execution_policy: ExecutionPolicy,
    #[serde(default)]
    pub level: SkillLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DescriptorError {
    #[error("skill id must not be empty")]
    EmptyId,
    #[error("skill `{skill}` declares entity `{entity}` more than once")]
    DuplicateEntity { skill: String, entity: String },
}

impl SkillDescriptor {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            required_entities: Vec::new(),
            optional_entities: Vec::new(),
            execution_policy: ExecutionPolicy::Inline,
            level: SkillLevel::HighLevel,
        }
    }

    pub fn require(mut self, name: &str, kind: EntityKind) -> Self {
        self.required_entities.push(EntitySpec::new(name, kind));
        self
    }

    pub fn optional(mut self, name: &str, kind: EntityKind) -> Self {
        self.optional_entities.push(EntitySpec::new(name, kind));
        self
    }

    pub fn policy(mut self, policy: ExecutionPolicy) -> Self {
        self.execution_policy = policy;
        self
    }

    pub fn level(mut self, level: SkillLevel) -> Self {
        self.level = level;
        self
    }

    /// Nonempty id; entity names unique across required and optional.
    pub fn validate(&self) -> Result<(), DescriptorError> {
        if self.id.is_empty() {
            return Err(DescriptorError::EmptyId);
        }
        let mut seen = BTreeSet::new();
        for e in self.required_entities.iter().chain(&self.optional_entities) {
            if !seen.insert(e.name.as_str()) {
                return Err(DescriptorError::DuplicateEntity {
                    skill: self.id.clone(),
                    entity: e.name.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn entity(&self, name: &str) -> Option<&EntitySpec> {
        self.required_entities
            .iter()
            .chain(&self.optional_entities)
            .find(|e| e.name == name)
    }

    /// Required entity names absent from `entities`, in declaration order.
    pub fn missing(&self, entities: &Entities) -> Vec<String> {
        self.required_entities
            .iter()
            .filter(|e| !entities.contains_key(&e.name))
            .map(|e| e.name.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntityValue {
    Number(f64),
    Text(String),
}

impl EntityValue {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            EntityValue::Text(s) => Some(s),
            EntityValue::Number(_) => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            EntityValue::Number(n) => Some(*n),
            EntityValue::Text(_) => None,
        }
    }

    /// Numbers for Number/Duration, nonempty text for the textual kinds.
    pub fn fits(&self, kind: EntityKind) -> bool {
        match (kind, self) {
            (EntityKind::Number | EntityKind::Duration, EntityValue::Number(n)) => n.is_finite(),
            (
                EntityKind::Text | EntityKind::ObjectLabel | EntityKind::PersonName,
                EntityValue::Text(s),
            ) => !s.is_empty(),
            _ => false,
        }
    }
}

impl From<&str> for EntityValue {
    fn from(s: &str) -> Self {
        EntityValue::Text(s.to_string())
    }
}

impl From<String> for EntityValue {
    fn from(s: String) -> Self {
        EntityValue::Text(s)
    }
}

impl From<f64> for EntityValue {
    fn from(n: f64) -> Self {
        EntityValue::Number(n)
    }
}

pub type Entities = BTreeMap<String, EntityValue>;

/// Builds an entity map from `(name, value)` pairs.
pub fn entities<I, K, V>(pairs: I) -> Entities
where
    I: IntoIterator<Item = (K, V)>,
    K: Into<String>,
    V: Into<EntityValue>,
{
    pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect()
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog JSON at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Invalid(#[from] DescriptorError),
    #[error("skill `{0}` appears twice in the catalog")]
    Duplicate(String),
}

/// Parses a JSON list of descriptors and validates each one.
pub fn load_catalog(json: &str) -> Result<Vec<SkillDescriptor>, CatalogError> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let list: Vec<SkillDescriptor> = serde_path_to_error::deserialize(de).map_err(|e| CatalogError::Parse {
        path: e.path().to_string(),
        message: e.into_inner().to_string(),
    })?;
    let mut ids = BTreeSet::new();
    for d in &list {
        d.validate()?;
        if !ids.insert(d.id.as_str()) {
            return Err(CatalogError::Duplicate(d.id.clone()));
        }
    }
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert_eq!(SkillDescriptor::new("").validate(), Err(DescriptorError::EmptyId));
        let d = SkillDescriptor::new("x")
            .require("a", EntityKind::Text)
            .optional("a", EntityKind::Number);
        assert!(matches!(d.validate(), Err(DescriptorError::DuplicateEntity { .. })));
    }

    #[test]
    fn missing_in_declaration_order() {
        let d = SkillDescriptor::new("x")
            .require("b", EntityKind::Text)
            .require("a", EntityKind::Text);
        assert_eq!(d.missing(&Entities::new()), vec!["b", "a"]);
        assert_eq!(d.missing(&entities([("b", "v")])), vec!["a"]);
    }

    #[test]
    fn value_kinds() {
        assert!(EntityValue::from(2.0).fits(EntityKind::Duration));
        assert!(!EntityValue::from("2").fits(EntityKind::Number));
        assert!(!EntityValue::from("").fits(EntityKind::ObjectLabel));
        let v: EntityValue = serde_json::from_str("\"cup\"").unwrap();
        assert_eq!(v.as_text(), Some("cup"));
        let v: EntityValue = serde_json::from_str("3").unwrap();
        assert_eq!(v.as_number(), Some(3.0));
    }

    #[test]
    fn catalog_json() {
        let json = r#"[
            {"id": "find_object", "required_entities": [{"name": "object_label", "type": "object_label"}]},
            {"id": "drive", "required_entities": [{"name": "direction", "type": "text"}],
             "execution_policy": "deferred", "level": "low_level"}
        ]"#;
        let c = load_catalog(json).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].execution_policy, ExecutionPolicy::Deferred);
        assert_eq!(c[1].level, SkillLevel::LowLevel);

        let err = load_catalog(r#"[{"id": "x", "required_entities": [{"name": "a"}]}]"#).unwrap_err();
        assert!(matches!(err, CatalogError::Parse { ref path, .. } if path.starts_with("[0].required_entities[0]")));
        assert!(matches!(
            load_catalog(r#"[{"id": "x"}, {"id": "x"}]"#),
            Err(CatalogError::Duplicate(_))
        ));
    }
}
