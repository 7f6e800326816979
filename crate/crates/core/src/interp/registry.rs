//! Activity implementations keyed by descriptor id, with virtual dispatch on
//! the runtime domain type of a service instance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::{Arc, MutexGuard};

use thiserror::Error;

use crate::library::Catalog;
use crate::model::Ident;
use crate::runtime::{instantiate, lock, new_service, InstanceIds, ServiceInstance, Value};
use crate::types::domain_chain;

/// The branch an activity took and the values for that branch's outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub branch: Ident,
    pub outputs: Vec<Value>,
}

impl Outcome {
    pub fn branch(branch: impl Into<Ident>) -> Self {
        Outcome { branch: branch.into(), outputs: Vec::new() }
    }

    pub fn with(branch: impl Into<Ident>, outputs: Vec<Value>) -> Self {
        Outcome { branch: branch.into(), outputs }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ActivityError(pub String);

impl ActivityError {
    pub fn new(msg: impl Into<String>) -> Self {
        ActivityError(msg.into())
    }
}

/// What an implementation sees: evaluated inputs, the service instance of a
/// virtual activity, and a factory for new instances.
pub struct ActivityCall<'a> {
    pub activity_id: &'a str,
    pub inputs: Vec<Value>,
    pub instance: Option<Value>,
    pub(crate) cat: &'a dyn Catalog,
    pub(crate) ids: &'a mut InstanceIds,
}

impl ActivityCall<'_> {
    pub fn input(&self, i: usize) -> Result<&Value, ActivityError> {
        self.inputs
            .get(i)
            .ok_or_else(|| ActivityError::new(format!("`{}` has no input {i}", self.activity_id)))
    }

    /// Record id of a domain-valued input.
    pub fn input_id(&self, i: usize) -> Result<String, ActivityError> {
        let v = self.input(i)?;
        v.record_id()
            .map(str::to_string)
            .ok_or_else(|| ActivityError::new(format!("input {i} of `{}` has no record id", self.activity_id)))
    }

    pub fn service_state(&self) -> Result<MutexGuard<'_, ServiceInstance>, ActivityError> {
        match &self.instance {
            Some(Value::Service(s)) => Ok(lock(s)),
            _ => Err(ActivityError::new(format!("`{}` needs a service instance", self.activity_id))),
        }
    }

    pub fn new_service(&mut self, type_name: &str, state: BTreeMap<String, Value>) -> Value {
        new_service(type_name, state, self.ids)
    }

    pub fn instantiate(&mut self, graph_id: &str) -> Result<Value, ActivityError> {
        instantiate(graph_id, Vec::new(), self.cat, self.ids)
            .map(Value::Process)
            .map_err(|e| ActivityError::new(e.to_string()))
    }
}

pub trait Activity: Send + Sync {
    fn execute(&self, call: &mut ActivityCall<'_>) -> Result<Outcome, ActivityError>;
}

impl<F> Activity for F
where
    F: Fn(&mut ActivityCall<'_>) -> Result<Outcome, ActivityError> + Send + Sync,
{
    fn execute(&self, call: &mut ActivityCall<'_>) -> Result<Outcome, ActivityError> {
        self(call)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("activity `{id}` already has an implementation{}", for_type(.instance_type))]
    Duplicate { id: Ident, instance_type: Option<Ident> },
}

fn for_type(t: &Option<Ident>) -> String {
    t.as_ref().map(|t| format!(" for {t}")).unwrap_or_default()
}

type Key = (Ident, Option<Ident>);

#[derive(Default, Clone)]
pub struct ActivityRegistry {
    impls: BTreeMap<Key, Arc<dyn Activity>>,
}

impl fmt::Debug for ActivityRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.impls.keys()).finish()
    }
}

impl ActivityRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers the implementation used when no instance-specific one applies.
    pub fn register(&mut self, id: &str, a: impl Activity + 'static) -> Result<(), RegistryError> {
        self.insert((id.to_string(), None), Arc::new(a))
    }

    /// Registers the implementation for instances of `domain_type` and its subtypes.
    pub fn register_for(&mut self, id: &str, domain_type: &str, a: impl Activity + 'static) -> Result<(), RegistryError> {
        self.insert((id.to_string(), Some(domain_type.to_string())), Arc::new(a))
    }

    fn insert(&mut self, key: Key, a: Arc<dyn Activity>) -> Result<(), RegistryError> {
        if self.impls.contains_key(&key) {
            return Err(RegistryError::Duplicate { id: key.0, instance_type: key.1 });
        }
        self.impls.insert(key, a);
        Ok(())
    }

    /// Nearest implementation along the instance type's supertype chain,
    /// then the untyped one.
    pub fn resolve(&self, id: &str, instance_type: Option<&str>, cat: &dyn Catalog) -> Option<Arc<dyn Activity>> {
        if let Some(t) = instance_type {
            for ty in domain_chain(t, cat) {
                if let Some(a) = self.impls.get(&(id.to_string(), Some(ty))) {
                    return Some(a.clone());
                }
            }
        }
        self.impls.get(&(id.to_string(), None)).cloned()
    }

    pub fn activity_ids(&self) -> BTreeSet<&str> {
        self.impls.keys().map(|(id, _)| id.as_str()).collect()
    }
}
