use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bib::{EventKind, EventRecord};

/// Event filter shared by subscriptions and trigger rules. Every present
/// field must match; tags use subset semantics.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventPattern {
    pub kind: Option<EventKind>,
    pub entity_id: Option<String>,
    pub tags: BTreeSet<String>,
    pub path_prefix: Option<String>,
}

impl EventPattern {
    pub fn kind(kind: EventKind) -> Self {
        EventPattern {
            kind: Some(kind),
            ..Default::default()
        }
    }

    pub fn entity(mut self, id: impl Into<String>) -> Self {
        self.entity_id = Some(id.into());
        self
    }

    pub fn tag(mut self, tag: impl Into<String>) -> Self {
        self.tags.insert(tag.into());
        self
    }

    pub fn path(mut self, prefix: impl Into<String>) -> Self {
        self.path_prefix = Some(prefix.into());
        self
    }

    /// True when no filter field is set.
    pub fn is_empty(&self) -> bool {
        self.kind.is_none()
            && self.entity_id.is_none()
            && self.tags.is_empty()
            && self.path_prefix.is_none()
    }

    pub fn matches(&self, ev: &EventRecord) -> bool {
        self.kind.is_none_or(|k| k == ev.kind)
            && self.entity_id.as_ref().is_none_or(|e| *e == ev.entity_id)
            && self.tags.is_subset(&ev.tags)
            && self
                .path_prefix
                .as_ref()
                .is_none_or(|p| ev.delta.keys().any(|k| k.starts_with(p.as_str())))
    }
}

impl fmt::Display for EventPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(k) = self.kind {
            parts.push(format!("kind={}", k.as_str()));
        }
        if let Some(e) = &self.entity_id {
            parts.push(format!("entity={e}"));
        }
        if !self.tags.is_empty() {
            parts.push(format!(
                "tags={}",
                self.tags.iter().cloned().collect::<Vec<_>>().join(",")
            ));
        }
        if let Some(p) = &self.path_prefix {
            parts.push(format!("path={p}"));
        }
        write!(f, "[{}]", parts.join(" "))
    }
}
