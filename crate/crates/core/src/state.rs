use crate::value::Value;
use serde_json::{Map, Value as Json};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

/// Sorted variable names shared by every state of one composed spec.
#[derive(Debug, PartialEq, Eq)]
pub struct Layout {
    names: Vec<String>,
}

impl Layout {
    pub fn new(mut names: Vec<String>) -> Arc<Layout> {
        names.sort();
        names.dedup();
        Arc::new(Layout { names })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }
}

/// A full assignment of values to the variables of a layout.
#[derive(Clone)]
pub struct State {
    layout: Arc<Layout>,
    values: Vec<Value>,
}

impl State {
    /// Builds a state; `values` follow the layout's name order.
    pub fn new(layout: Arc<Layout>, values: Vec<Value>) -> State {
        assert_eq!(layout.len(), values.len(), "value count does not match layout");
        State { layout, values }
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut Vec<Value> {
        &mut self.values
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.layout.index(name).map(|i| &self.values[i])
    }

    #[track_caller]
    pub fn var(&self, name: &str) -> &Value {
        self.get(name)
            .unwrap_or_else(|| panic!("state has no variable {name}"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.layout
            .names
            .iter()
            .map(String::as_str)
            .zip(self.values.iter())
    }

    /// Canonical binary encoding of the values.
    pub fn encode(&self) -> Vec<u8> {
        postcard::to_stdvec(&self.values).expect("values always encode")
    }

    pub fn decode(layout: &Arc<Layout>, bytes: &[u8]) -> Option<State> {
        let values: Vec<Value> = postcard::from_bytes(bytes).ok()?;
        (values.len() == layout.len()).then(|| State {
            layout: layout.clone(),
            values,
        })
    }

    /// Variables whose values differ from `other`, with the values in `self`.
    pub fn diff<'a>(&'a self, other: &State) -> Vec<(&'a str, &'a Value)> {
        self.iter()
            .zip(other.values.iter())
            .filter(|((_, a), b)| a != b)
            .map(|(pair, _)| pair)
            .collect()
    }

    pub fn to_json(&self) -> Json {
        let mut map = Map::new();
        for (name, v) in self.iter() {
            map.insert(name.to_string(), serde_json::to_value(v).unwrap());
        }
        Json::Object(map)
    }
}

impl PartialEq for State {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values
    }
}

impl Eq for State {}

impl Hash for State {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.values.hash(h)
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (name, v) in self.iter() {
            m.entry(&name, v);
        }
        m.finish()
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, v) in self.iter() {
            writeln!(f, "  {name} = {v}")?;
        }
        Ok(())
    }
}
