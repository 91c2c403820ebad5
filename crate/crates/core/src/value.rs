//! Immutable values held by state variables.

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

#[derive(Default)]
struct Interner {
    names: Vec<&'static str>,
    ids: HashMap<&'static str, u32>,
}

fn interner() -> &'static RwLock<Interner> {
    static INTERNER: OnceLock<RwLock<Interner>> = OnceLock::new();
    INTERNER.get_or_init(Default::default)
}

/// Interned symbol. Compares by its text so set ordering is stable across runs.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sym(u32);

impl Sym {
    pub fn new(text: &str) -> Sym {
        if let Some(&id) = interner().read().unwrap().ids.get(text) {
            return Sym(id);
        }
        let mut table = interner().write().unwrap();
        if let Some(&id) = table.ids.get(text) {
            return Sym(id);
        }
        let leaked: &'static str = Box::leak(text.to_owned().into_boxed_str());
        let id = table.names.len() as u32;
        table.names.push(leaked);
        table.ids.insert(leaked, id);
        Sym(id)
    }

    pub fn as_str(self) -> &'static str {
        interner().read().unwrap().names[self.0 as usize]
    }
}

impl Ord for Sym {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.0 == other.0 {
            Ordering::Equal
        } else {
            self.as_str().cmp(other.as_str())
        }
    }
}

impl PartialOrd for Sym {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

// Binary encodings carry the interned id; text encodings carry the name.
impl Serialize for Sym {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if s.is_human_readable() {
            s.serialize_str(self.as_str())
        } else {
            s.serialize_u32(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Sym {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        if d.is_human_readable() {
            let text = String::deserialize(d)?;
            Ok(Sym::new(&text))
        } else {
            let id = u32::deserialize(d)?;
            if (id as usize) < interner().read().unwrap().names.len() {
                Ok(Sym(id))
            } else {
                Err(de::Error::custom(format!("unknown symbol id {id}")))
            }
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Sym(Sym),
    Seq(Arc<Vec<Value>>),
    Set(Arc<BTreeSet<Value>>),
    Record(Arc<BTreeMap<String, Value>>),
    Pair(Arc<(Value, Value)>),
}

pub fn int(i: i64) -> Value {
    Value::Int(i)
}

pub fn boolean(b: bool) -> Value {
    Value::Bool(b)
}

pub fn sym(s: &str) -> Value {
    Value::Sym(Sym::new(s))
}

pub fn seq(items: impl IntoIterator<Item = Value>) -> Value {
    Value::Seq(Arc::new(items.into_iter().collect()))
}

pub fn set(items: impl IntoIterator<Item = Value>) -> Value {
    Value::Set(Arc::new(items.into_iter().collect()))
}

pub fn pair(a: Value, b: Value) -> Value {
    Value::Pair(Arc::new((a, b)))
}

pub fn record<K: Into<String>>(fields: impl IntoIterator<Item = (K, Value)>) -> Value {
    Value::Record(Arc::new(
        fields.into_iter().map(|(k, v)| (k.into(), v)).collect(),
    ))
}

impl Value {
    pub fn empty_seq() -> Value {
        seq([])
    }

    pub fn empty_set() -> Value {
        set([])
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
            Value::Sym(_) => "sym",
            Value::Seq(_) => "seq",
            Value::Set(_) => "set",
            Value::Record(_) => "record",
            Value::Pair(_) => "pair",
        }
    }

    #[track_caller]
    pub fn as_int(&self) -> i64 {
        match self {
            Value::Int(i) => *i,
            other => panic!("expected int, found {other}"),
        }
    }

    #[track_caller]
    pub fn as_bool(&self) -> bool {
        match self {
            Value::Bool(b) => *b,
            other => panic!("expected bool, found {other}"),
        }
    }

    #[track_caller]
    pub fn as_sym(&self) -> Sym {
        match self {
            Value::Sym(s) => *s,
            other => panic!("expected symbol, found {other}"),
        }
    }

    pub fn is_sym(&self, text: &str) -> bool {
        matches!(self, Value::Sym(s) if s.as_str() == text)
    }

    #[track_caller]
    pub fn as_seq(&self) -> &[Value] {
        match self {
            Value::Seq(v) => v,
            other => panic!("expected seq, found {other}"),
        }
    }

    #[track_caller]
    pub fn as_set(&self) -> &BTreeSet<Value> {
        match self {
            Value::Set(v) => v,
            other => panic!("expected set, found {other}"),
        }
    }

    #[track_caller]
    pub fn as_pair(&self) -> (&Value, &Value) {
        match self {
            Value::Pair(p) => (&p.0, &p.1),
            other => panic!("expected pair, found {other}"),
        }
    }

    #[track_caller]
    pub fn field(&self, name: &str) -> &Value {
        match self {
            Value::Record(r) => r
                .get(name)
                .unwrap_or_else(|| panic!("record has no field {name}")),
            other => panic!("expected record, found {other}"),
        }
    }

    /// Element `i` of a sequence.
    #[track_caller]
    pub fn at(&self, i: usize) -> &Value {
        &self.as_seq()[i]
    }

    /// Copy of a sequence with element `i` replaced.
    #[track_caller]
    pub fn with_at(&self, i: usize, v: Value) -> Value {
        let mut items = self.as_seq().to_vec();
        items[i] = v;
        Value::Seq(Arc::new(items))
    }

    #[track_caller]
    pub fn pushed(&self, v: Value) -> Value {
        let mut items = self.as_seq().to_vec();
        items.push(v);
        Value::Seq(Arc::new(items))
    }

    #[track_caller]
    pub fn len(&self) -> usize {
        match self {
            Value::Seq(v) => v.len(),
            Value::Set(v) => v.len(),
            Value::Record(v) => v.len(),
            other => panic!("{other} has no length"),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[track_caller]
    pub fn contains(&self, v: &Value) -> bool {
        match self {
            Value::Set(s) => s.contains(v),
            Value::Seq(s) => s.contains(v),
            other => panic!("{other} is not a collection"),
        }
    }

    #[track_caller]
    pub fn with_inserted(&self, v: Value) -> Value {
        let mut s = self.as_set().clone();
        s.insert(v);
        Value::Set(Arc::new(s))
    }

    #[track_caller]
    pub fn with_removed(&self, v: &Value) -> Value {
        let mut s = self.as_set().clone();
        s.remove(v);
        Value::Set(Arc::new(s))
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list<'a>(
            f: &mut fmt::Formatter<'_>,
            items: impl Iterator<Item = &'a Value>,
        ) -> fmt::Result {
            for (k, v) in items.enumerate() {
                if k > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{v}")?;
            }
            Ok(())
        }
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(true) => write!(f, "TRUE"),
            Value::Bool(false) => write!(f, "FALSE"),
            Value::Sym(s) => write!(f, "{}", s.as_str()),
            Value::Seq(v) => {
                write!(f, "<<")?;
                list(f, v.iter())?;
                write!(f, ">>")
            }
            Value::Set(v) => {
                write!(f, "{{")?;
                list(f, v.iter())?;
                write!(f, "}}")
            }
            Value::Record(r) => {
                write!(f, "[")?;
                for (k, (name, v)) in r.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{name} |-> {v}")?;
                }
                write!(f, "]")
            }
            Value::Pair(p) => write!(f, "({}, {})", p.0, p.1),
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_order_by_text() {
        let b = Sym::new("zeta");
        let a = Sym::new("alpha");
        assert!(a < b);
        assert_eq!(Sym::new("zeta"), b);
    }

    #[test]
    fn binary_round_trip() {
        let v = seq([int(3), sym("LOOKING"), set([int(1), int(0)]), pair(boolean(true), int(-2))]);
        let bytes = postcard::to_stdvec(&v).unwrap();
        let back: Value = postcard::from_bytes(&bytes).unwrap();
        assert_eq!(v, back);
    }

    #[test]
    fn json_uses_names() {
        let v = sym("LEADING");
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(text, r#"{"Sym":"LEADING"}"#);
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn display() {
        let v = seq([int(1), set([sym("A")]), pair(int(0), int(2))]);
        assert_eq!(v.to_string(), "<<1, {A}, (0, 2)>>");
    }
}
