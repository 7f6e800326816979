//! A run-scoped view of a library with extra service graphs layered on top.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::library::{Catalog, GraphLibrary};
use crate::model::{ActivityDescriptor, DomainDecl, Ident, InterfaceGraph, Slg};

#[derive(Debug, Clone)]
pub struct Overlay {
    base: Arc<GraphLibrary>,
    extra: BTreeMap<Ident, Arc<Slg>>,
}

impl Overlay {
    pub fn new(base: Arc<GraphLibrary>) -> Self {
        Overlay { base, extra: BTreeMap::new() }
    }

    pub fn base(&self) -> &Arc<GraphLibrary> {
        &self.base
    }

    pub fn contains(&self, id: &str) -> bool {
        self.extra.contains_key(id) || self.base.service(id).is_some() || self.base.interface(id).is_some()
    }

    /// Adds a graph; the caller has validated it. Fails on an id clash.
    pub fn insert(&mut self, g: Slg) -> Result<Arc<Slg>, Ident> {
        if self.contains(&g.id) {
            return Err(g.id);
        }
        let g = Arc::new(g);
        self.extra.insert(g.id.clone(), g.clone());
        Ok(g)
    }

    pub fn extra(&self) -> impl Iterator<Item = &Arc<Slg>> {
        self.extra.values()
    }
}

impl Catalog for Overlay {
    fn interface(&self, id: &str) -> Option<&InterfaceGraph> {
        self.base.interface(id)
    }

    fn service(&self, id: &str) -> Option<&Arc<Slg>> {
        self.extra.get(id).or_else(|| self.base.service(id))
    }

    fn activity(&self, id: &str) -> Option<&ActivityDescriptor> {
        self.base.activity(id)
    }

    fn domain(&self, name: &str) -> Option<&DomainDecl> {
        self.base.domain(name)
    }

    fn service_ids(&self) -> Vec<Ident> {
        let mut ids = self.base.service_ids();
        ids.extend(self.extra.keys().cloned());
        ids.sort();
        ids
    }
}
