//! Level-local typed contexts and first-class process and service instances.
//!
//! Values have reference semantics for instances: cloning a [`Value`] that
//! holds a service or process instance shares the instance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::{Arc, Mutex, MutexGuard};

use serde_json::json;
use thiserror::Error;

use crate::library::Catalog;
use crate::model::{Ident, PrimitiveKind, SemanticType};
use crate::types::is_subtype;

#[derive(Debug, Clone, PartialEq)]
pub enum PrimValue {
    Str(String),
    Int(i64),
    Bool(bool),
    Real(f64),
    File(String),
    Enum { name: Ident, literal: String },
}

impl PrimValue {
    /// Reads a JSON literal as a value of primitive type `ty`.
    pub fn from_json(v: &serde_json::Value, ty: &SemanticType) -> Result<PrimValue, String> {
        let SemanticType::Primitive(kind) = ty else {
            return Err(format!("static literals need a primitive type, not {ty}"));
        };
        let bad = || format!("literal {v} is not a {ty}");
        Ok(match kind {
            PrimitiveKind::String => PrimValue::Str(v.as_str().ok_or_else(bad)?.to_string()),
            PrimitiveKind::FileHandle => PrimValue::File(v.as_str().ok_or_else(bad)?.to_string()),
            PrimitiveKind::Int => PrimValue::Int(v.as_i64().ok_or_else(bad)?),
            PrimitiveKind::Bool => PrimValue::Bool(v.as_bool().ok_or_else(bad)?),
            PrimitiveKind::Real => PrimValue::Real(v.as_f64().ok_or_else(bad)?),
            PrimitiveKind::Enum { name, literals } => {
                let lit = v.as_str().ok_or_else(bad)?;
                if !literals.iter().any(|l| l == lit) {
                    return Err(bad());
                }
                PrimValue::Enum { name: name.clone(), literal: lit.to_string() }
            }
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            PrimValue::Str(s) | PrimValue::File(s) => json!(s),
            PrimValue::Int(i) => json!(i),
            PrimValue::Bool(b) => json!(b),
            PrimValue::Real(r) => json!(r),
            PrimValue::Enum { literal, .. } => json!(literal),
        }
    }

    fn type_name(&self) -> String {
        match self {
            PrimValue::Str(_) => "string".into(),
            PrimValue::Int(_) => "int".into(),
            PrimValue::Bool(_) => "bool".into(),
            PrimValue::Real(_) => "real".into(),
            PrimValue::File(_) => "fileHandle".into(),
            PrimValue::Enum { name, .. } => format!("enum {name}"),
        }
    }

    fn fits(&self, kind: &PrimitiveKind) -> bool {
        match (self, kind) {
            (PrimValue::Str(_), PrimitiveKind::String)
            | (PrimValue::Int(_), PrimitiveKind::Int)
            | (PrimValue::Bool(_), PrimitiveKind::Bool)
            | (PrimValue::Real(_), PrimitiveKind::Real)
            | (PrimValue::File(_), PrimitiveKind::FileHandle) => true,
            (PrimValue::Enum { name, literal }, PrimitiveKind::Enum { name: n, literals }) => {
                name == n && literals.contains(literal)
            }
            _ => false,
        }
    }
}

/// Per-run instance numbering; keeps traces reproducible across runs.
pub type InstanceId = u64;

#[derive(Debug, Default)]
pub struct InstanceIds {
    next: InstanceId,
}

impl InstanceIds {
    pub fn allocate(&mut self) -> InstanceId {
        self.next += 1;
        self.next
    }
}

/// A stateful service object. The engine never interprets `state`.
#[derive(Debug)]
pub struct ServiceInstance {
    pub id: InstanceId,
    pub type_name: Ident,
    pub state: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProcStatus {
    Fresh,
    Running,
    Paused,
    Finished(Ident),
    Aborted,
}

impl ProcStatus {
    pub fn can_become(&self, next: &ProcStatus) -> bool {
        use ProcStatus::*;
        matches!(
            (self, next),
            (Fresh, Running)
                | (Running, Paused)
                | (Paused, Running)
                | (Running, Finished(_))
                | (Running, Aborted)
                | (Paused, Aborted)
                // finished instances may be re-run with their context intact
                | (Finished(_), Running)
        )
    }

    pub fn label(&self) -> String {
        match self {
            ProcStatus::Fresh => "fresh".into(),
            ProcStatus::Running => "running".into(),
            ProcStatus::Paused => "paused".into(),
            ProcStatus::Finished(b) => format!("finished({b})"),
            ProcStatus::Aborted => "aborted".into(),
        }
    }
}

/// A service graph paired with its own context.
#[derive(Debug)]
pub struct ProcInstance {
    pub id: InstanceId,
    pub graph_id: Ident,
    pub context: Context,
    status: ProcStatus,
    history: Vec<ProcStatus>,
    /// Inputs waiting to be written by the start node.
    pub pending_inputs: Vec<Value>,
}

impl ProcInstance {
    pub fn status(&self) -> &ProcStatus {
        &self.status
    }

    /// Every status the instance has held, oldest first.
    pub fn history(&self) -> &[ProcStatus] {
        &self.history
    }

    pub fn set_status(&mut self, next: ProcStatus) -> Result<(), ContextError> {
        if !self.status.can_become(&next) {
            return Err(ContextError::BadTransition { from: self.status.label(), to: next.label() });
        }
        self.history.push(next.clone());
        self.status = next;
        Ok(())
    }
}

pub type ServiceRef = Arc<Mutex<ServiceInstance>>;
pub type ProcRef = Arc<Mutex<ProcInstance>>;

pub fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainValue {
    pub type_name: Ident,
    pub payload: BTreeMap<String, Value>,
}

#[derive(Debug, Clone)]
pub enum Value {
    Prim(PrimValue),
    Domain(DomainValue),
    Service(ServiceRef),
    Process(ProcRef),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Prim(a), Value::Prim(b)) => a == b,
            (Value::Domain(a), Value::Domain(b)) => a == b,
            (Value::Service(a), Value::Service(b)) => Arc::ptr_eq(a, b),
            (Value::Process(a), Value::Process(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl Value {
    pub fn bool(b: bool) -> Self {
        Value::Prim(PrimValue::Bool(b))
    }

    pub fn str(s: impl Into<String>) -> Self {
        Value::Prim(PrimValue::Str(s.into()))
    }

    pub fn int(i: i64) -> Self {
        Value::Prim(PrimValue::Int(i))
    }

    /// A domain record carrying just an `id` field.
    pub fn domain_ref(type_name: impl Into<Ident>, id: impl Into<String>) -> Self {
        Value::Domain(DomainValue {
            type_name: type_name.into(),
            payload: BTreeMap::from([("id".to_string(), Value::str(id))]),
        })
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Prim(PrimValue::Bool(b)) => Some(*b),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Prim(PrimValue::Str(s) | PrimValue::File(s)) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Prim(PrimValue::Int(i)) => Some(*i),
            _ => None,
        }
    }

    /// The `id` field of a domain record.
    pub fn record_id(&self) -> Option<&str> {
        match self {
            Value::Domain(d) => d.payload.get("id").and_then(Value::as_str),
            _ => None,
        }
    }

    pub fn as_process(&self) -> Option<&ProcRef> {
        match self {
            Value::Process(p) => Some(p),
            _ => None,
        }
    }

    /// A human-readable description of the value's runtime type.
    pub fn type_label(&self) -> String {
        match self {
            Value::Prim(p) => p.type_name(),
            Value::Domain(d) => d.type_name.clone(),
            Value::Service(s) => lock(s).type_name.clone(),
            Value::Process(p) => format!("service graph {}", lock(p).graph_id),
        }
    }

    /// Whether the value's runtime type is below `declared`.
    pub fn fits(&self, declared: &SemanticType, cat: &dyn Catalog) -> bool {
        match (self, declared) {
            (Value::Prim(p), SemanticType::Primitive(k)) => p.fits(k),
            (Value::Domain(d), SemanticType::Domain { .. }) => {
                is_subtype(&SemanticType::domain(d.type_name.clone()), declared, cat)
            }
            (Value::Service(s), SemanticType::Domain { .. }) => {
                let t = lock(s).type_name.clone();
                is_subtype(&SemanticType::domain(t), declared, cat)
            }
            (Value::Process(p), SemanticType::Graph { .. }) => {
                let g = lock(p).graph_id.clone();
                is_subtype(&SemanticType::service(g), declared, cat)
            }
            _ => false,
        }
    }

    /// Reads a JSON input as a value of `ty`. Domain records accept either an
    /// object of fields or a bare string taken as the record's `id`.
    pub fn from_input_json(v: &serde_json::Value, ty: &SemanticType) -> Result<Value, String> {
        match ty {
            SemanticType::Primitive(_) => PrimValue::from_json(v, ty).map(Value::Prim),
            SemanticType::Domain { name } => match v {
                serde_json::Value::String(s) => Ok(Value::domain_ref(name.clone(), s.clone())),
                serde_json::Value::Object(map) => {
                    let mut payload = BTreeMap::new();
                    for (k, f) in map {
                        payload.insert(k.clone(), json_to_plain(f)?);
                    }
                    Ok(Value::Domain(DomainValue { type_name: name.clone(), payload }))
                }
                other => Err(format!("cannot read {other} as {name}")),
            },
            SemanticType::Graph { .. } => Err(format!("process instances cannot be given as input literals ({ty})")),
        }
    }

    /// JSON rendering for snapshots and traces. Instances reached twice are
    /// rendered as references.
    pub fn to_json(&self) -> serde_json::Value {
        self.to_json_seen(&mut BTreeSet::new())
    }

    fn to_json_seen(&self, seen: &mut BTreeSet<(char, InstanceId)>) -> serde_json::Value {
        match self {
            Value::Prim(p) => p.to_json(),
            Value::Domain(d) => json!({
                "domain": d.type_name,
                "payload": d.payload.iter().map(|(k, v)| (k.clone(), v.to_json_seen(seen))).collect::<serde_json::Map<_, _>>(),
            }),
            Value::Service(s) => {
                let s = lock(s);
                if !seen.insert(('s', s.id)) {
                    return json!({ "serviceRef": s.id });
                }
                json!({
                    "service": s.type_name,
                    "instance": s.id,
                    "state": s.state.iter().map(|(k, v)| (k.clone(), v.to_json_seen(seen))).collect::<serde_json::Map<_, _>>(),
                })
            }
            Value::Process(p) => {
                let p = lock(p);
                if !seen.insert(('p', p.id)) {
                    return json!({ "processRef": p.id });
                }
                json!({
                    "graphId": p.graph_id,
                    "instance": p.id,
                    "status": p.status.label(),
                    "vars": p.context.to_json_seen(seen),
                })
            }
        }
    }
}

/// Plain JSON (no instances) as a domain payload value.
fn json_to_plain(v: &serde_json::Value) -> Result<Value, String> {
    Ok(match v {
        serde_json::Value::Bool(b) => Value::bool(*b),
        serde_json::Value::String(s) => Value::str(s.clone()),
        serde_json::Value::Number(n) => match n.as_i64() {
            Some(i) => Value::int(i),
            None => Value::Prim(PrimValue::Real(n.as_f64().unwrap_or_default())),
        },
        other => return Err(format!("unsupported payload field {other}")),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContextError {
    #[error("undeclared variable `{0}`")]
    UndeclaredVar(Ident),
    #[error("type mismatch writing `{var}`: declared {declared}, value is {found}")]
    TypeMismatch { var: Ident, declared: String, found: String },
    #[error("read of unassigned variable `{0}`")]
    UnassignedRead(Ident),
    #[error("illegal status transition {from} -> {to}")]
    BadTransition { from: String, to: String },
    #[error("unknown service graph `{0}`")]
    UnknownGraph(Ident),
    #[error("`{graph}` expects {expected} inputs, got {found}")]
    Arity { graph: Ident, expected: usize, found: usize },
    #[error("input {position} of `{graph}` expects {expected}, got {found}")]
    InputType { graph: Ident, position: usize, expected: String, found: String },
}

/// A typed variable store for one hierarchy level.
#[derive(Debug, Clone, Default)]
pub struct Context {
    decls: BTreeMap<Ident, SemanticType>,
    values: BTreeMap<Ident, Value>,
}

impl Context {
    pub fn new(decls: BTreeMap<Ident, SemanticType>) -> Self {
        Context { decls, values: BTreeMap::new() }
    }

    pub fn decls(&self) -> &BTreeMap<Ident, SemanticType> {
        &self.decls
    }

    pub fn declared(&self, var: &str) -> Option<&SemanticType> {
        self.decls.get(var)
    }

    pub fn is_assigned(&self, var: &str) -> bool {
        self.values.contains_key(var)
    }

    pub fn write(&mut self, var: &str, v: Value, cat: &dyn Catalog) -> Result<(), ContextError> {
        let declared = self.decls.get(var).ok_or_else(|| ContextError::UndeclaredVar(var.to_string()))?;
        if !v.fits(declared, cat) {
            return Err(ContextError::TypeMismatch {
                var: var.to_string(),
                declared: declared.to_string(),
                found: v.type_label(),
            });
        }
        self.values.insert(var.to_string(), v);
        Ok(())
    }

    pub fn read(&self, var: &str) -> Result<Value, ContextError> {
        if !self.decls.contains_key(var) {
            return Err(ContextError::UndeclaredVar(var.to_string()));
        }
        self.values.get(var).cloned().ok_or_else(|| ContextError::UnassignedRead(var.to_string()))
    }

    pub fn values(&self) -> impl Iterator<Item = (&Ident, &Value)> {
        self.values.iter()
    }

    /// Variables whose stored value no longer fits the declaration.
    pub fn audit(&self, cat: &dyn Catalog) -> Vec<Ident> {
        self.values
            .iter()
            .filter(|(k, v)| self.decls.get(*k).is_none_or(|t| !v.fits(t, cat)))
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        self.to_json_seen(&mut BTreeSet::new())
    }

    fn to_json_seen(&self, seen: &mut BTreeSet<(char, InstanceId)>) -> serde_json::Value {
        serde_json::Value::Object(self.values.iter().map(|(k, v)| (k.clone(), v.to_json_seen(seen))).collect())
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

/// Creates a fresh instance of a service graph. `init_inputs` is either empty
/// (inputs arrive at the call site) or matches the graph's inputs.
pub fn instantiate(
    graph_id: &str,
    init_inputs: Vec<Value>,
    cat: &dyn Catalog,
    ids: &mut InstanceIds,
) -> Result<ProcRef, ContextError> {
    let g = cat.service(graph_id).ok_or_else(|| ContextError::UnknownGraph(graph_id.to_string()))?;
    if !init_inputs.is_empty() {
        if init_inputs.len() != g.signature.inputs.len() {
            return Err(ContextError::Arity {
                graph: graph_id.to_string(),
                expected: g.signature.inputs.len(),
                found: init_inputs.len(),
            });
        }
        for (i, (v, p)) in init_inputs.iter().zip(&g.signature.inputs).enumerate() {
            if !v.fits(&p.ty, cat) {
                return Err(ContextError::InputType {
                    graph: graph_id.to_string(),
                    position: i,
                    expected: p.ty.to_string(),
                    found: v.type_label(),
                });
            }
        }
    }
    Ok(Arc::new(Mutex::new(ProcInstance {
        id: ids.allocate(),
        graph_id: graph_id.to_string(),
        context: Context::new(g.context_decls.clone()),
        status: ProcStatus::Fresh,
        history: vec![ProcStatus::Fresh],
        pending_inputs: init_inputs,
    })))
}

pub fn new_service(type_name: &str, state: BTreeMap<String, Value>, ids: &mut InstanceIds) -> Value {
    Value::Service(Arc::new(Mutex::new(ServiceInstance { id: ids.allocate(), type_name: type_name.to_string(), state })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ocs;

    #[test]
    fn write_read_and_type_mismatch() {
        let lib = ocs::library();
        let mut c = Context::new(BTreeMap::from([
            ("flag".to_string(), SemanticType::bool()),
            ("user".to_string(), SemanticType::domain("User")),
            ("pay".to_string(), SemanticType::interface("Payment")),
        ]));
        c.write("flag", Value::bool(true), &lib).unwrap();
        assert_eq!(c.read("flag").unwrap(), Value::bool(true));
        assert_eq!(
            c.write("user", Value::int(3), &lib),
            Err(ContextError::TypeMismatch { var: "user".into(), declared: "User".into(), found: "int".into() })
        );
        assert_eq!(c.read("user"), Err(ContextError::UnassignedRead("user".into())));
        assert_eq!(c.write("nope", Value::bool(true), &lib), Err(ContextError::UndeclaredVar("nope".into())));

        let mut ids = InstanceIds::default();
        let p = instantiate("CreditCardPayment", vec![], &lib, &mut ids).unwrap();
        c.write("pay", Value::Process(p.clone()), &lib).unwrap();
        assert_eq!(c.read("pay").unwrap(), Value::Process(p));
        assert!(c.audit(&lib).is_empty());
    }

    #[test]
    fn instantiate_checks_arity_and_isolates() {
        let lib = ocs::library();
        let mut ids = InstanceIds::default();
        assert!(matches!(
            instantiate("CreditCardPayment", vec![Value::bool(true), Value::bool(false)], &lib, &mut ids),
            Err(ContextError::Arity { .. })
        ));
        assert!(matches!(instantiate("nope", vec![], &lib, &mut ids), Err(ContextError::UnknownGraph(_))));

        let a = instantiate("validate-payment", vec![], &lib, &mut ids).unwrap();
        let b = instantiate("validate-payment", vec![], &lib, &mut ids).unwrap();
        lock(&a).context.write("paper", Value::domain_ref("Paper", "p"), &lib).unwrap();
        assert!(lock(&a).context.is_assigned("paper"));
        assert!(!lock(&b).context.is_assigned("paper"));
        assert_ne!(lock(&a).id, lock(&b).id);
        assert_eq!(lock(&a).status(), &ProcStatus::Fresh);
    }

    #[test]
    fn status_transitions() {
        use ProcStatus::*;
        assert!(Fresh.can_become(&Running));
        assert!(Running.can_become(&Paused));
        assert!(Paused.can_become(&Running));
        assert!(Finished("x".into()).can_become(&Running));
        assert!(!Fresh.can_become(&Finished("x".into())));
        assert!(!Aborted.can_become(&Running));
    }

    #[test]
    fn literal_coercion() {
        let e = SemanticType::Primitive(PrimitiveKind::Enum { name: "Color".into(), literals: vec!["red".into()] });
        assert!(PrimValue::from_json(&json!("red"), &e).is_ok());
        assert!(PrimValue::from_json(&json!("blue"), &e).is_err());
        assert!(PrimValue::from_json(&json!(3), &SemanticType::bool()).is_err());
        assert!(PrimValue::from_json(&json!("x"), &SemanticType::domain("User")).is_err());
    }
}
