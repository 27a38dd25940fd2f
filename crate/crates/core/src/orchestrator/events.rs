use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Logical timestamp; strictly increasing within a log.
    pub time: u64,
    pub actor: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub payload: serde_json::Value,
}

/// Totally ordered record of cloud and edge interactions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, actor: impl Into<String>, kind: &str, payload: serde_json::Value) {
        let time = self.events.len() as u64;
        self.events.push(Event {
            time,
            actor: actor.into(),
            kind: kind.to_string(),
            payload,
        });
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Event> + 'a {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.events {
            let _ = writeln!(out, "{}", serde_json::to_string(e)?);
        }
        Ok(out)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()?)?;
        Ok(())
    }
}

pub fn edge_actor(plvn_id: u64) -> String {
    format!("edge-{plvn_id}")
}

pub const CLOUD: &str = "cloud";
