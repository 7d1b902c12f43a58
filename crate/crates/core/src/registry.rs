//! Name-keyed registries of pluggable implementations.
//!
//! Allocation strategies and load models are trait objects looked up by the
//! name given in a config file or on the command line. Each entry is a
//! factory taking the JSON parameter object that accompanies the name.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistryError {
    #[error("unknown {what} '{name}' (available: {available})")]
    Unknown {
        what: &'static str,
        name: String,
        available: String,
    },
    #[error("invalid parameters for {what} '{name}': {reason}")]
    InvalidParams {
        what: &'static str,
        name: String,
        reason: String,
    },
}

pub type Factory<T> =
    Arc<dyn Fn(&serde_json::Value) -> Result<Arc<T>, String> + Send + Sync>;

pub struct Registry<T: ?Sized> {
    what: &'static str,
    factories: BTreeMap<String, Factory<T>>,
}

impl<T: ?Sized> Clone for Registry<T> {
    fn clone(&self) -> Self {
        Registry {
            what: self.what,
            factories: self.factories.clone(),
        }
    }
}

impl<T: ?Sized> Registry<T> {
    pub fn new(what: &'static str) -> Self {
        Registry {
            what,
            factories: BTreeMap::new(),
        }
    }

    /// Later registrations under the same name replace earlier ones.
    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&serde_json::Value) -> Result<Arc<T>, String> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Arc::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn build(&self, name: &str, params: &serde_json::Value) -> Result<Arc<T>, RegistryError> {
        let factory = self.factories.get(name).ok_or_else(|| RegistryError::Unknown {
            what: self.what,
            name: name.to_string(),
            available: self.names().collect::<Vec<_>>().join(", "),
        })?;
        factory(params).map_err(|reason| RegistryError::InvalidParams {
            what: self.what,
            name: name.to_string(),
            reason,
        })
    }
}

/// Deserializes strategy/model parameters, treating `null` as `{}`.
pub fn params<P: serde::de::DeserializeOwned>(value: &serde_json::Value) -> Result<P, String> {
    let value = if value.is_null() {
        serde_json::Value::Object(Default::default())
    } else {
        value.clone()
    };
    serde_json::from_value(value).map_err(|e| e.to_string())
}
