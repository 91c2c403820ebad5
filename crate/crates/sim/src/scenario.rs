use crate::cluster::{Cluster, SimError};
use crate::types::SimEvent;
use mgcheck_zab::BugFlags;
use serde::{Deserialize, Serialize};
use std::path::Path;

fn yes() -> bool {
    true
}

/// Cluster size, bug flags and an optional scripted event prefix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub nodes: usize,
    #[serde(default)]
    pub flags: BugFlags,
    #[serde(default = "yes")]
    pub uptodate_ack: bool,
    #[serde(default)]
    pub events: Vec<SimEvent>,
}

impl Scenario {
    pub fn new(nodes: usize, flags: BugFlags) -> Scenario {
        Scenario {
            nodes,
            flags,
            uptodate_ack: true,
            events: Vec::new(),
        }
    }

    pub fn from_json(s: &str) -> Result<Scenario, SimError> {
        serde_json::from_str(s).map_err(|e| SimError::BadScenario(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn load(path: &Path) -> Result<Scenario, SimError> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| SimError::BadScenario(format!("{}: {e}", path.display())))?;
        Scenario::from_json(&s)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    /// Fresh cluster with the scripted prefix applied.
    pub fn build(&self) -> Result<Cluster, SimError> {
        if self.nodes == 0 {
            return Err(SimError::BadScenario("cluster needs at least one node".into()));
        }
        let mut c = Cluster::new(self.nodes, self.flags).with_uptodate_ack(self.uptodate_ack);
        for e in &self.events {
            c.step(*e)?;
        }
        Ok(c)
    }
}
