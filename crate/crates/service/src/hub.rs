//! Per-session event stream with sequence numbers and a resume buffer.

use std::collections::VecDeque;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::broadcast;

/// Events kept for clients that reconnect with `Last-Event-ID`.
pub const RESUME_BUFFER: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Status,
    Reply,
    PageReady,
    PanelUpdated,
    Error,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Status => "status",
            EventKind::Reply => "reply",
            EventKind::PageReady => "page_ready",
            EventKind::PanelUpdated => "panel_updated",
            EventKind::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEnvelope {
    pub session_id: String,
    pub seq: u64,
    pub kind: EventKind,
    pub payload: Value,
}

struct Inner {
    next_seq: u64,
    buffer: VecDeque<EventEnvelope>,
}

pub struct EventHub {
    session_id: String,
    inner: Mutex<Inner>,
    tx: broadcast::Sender<EventEnvelope>,
}

impl EventHub {
    pub fn new(session_id: &str) -> Self {
        let (tx, _) = broadcast::channel(RESUME_BUFFER);
        EventHub {
            session_id: session_id.to_string(),
            inner: Mutex::new(Inner { next_seq: 1, buffer: VecDeque::new() }),
            tx,
        }
    }

    pub fn emit(&self, kind: EventKind, payload: Value) -> u64 {
        let mut inner = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        let seq = inner.next_seq;
        inner.next_seq += 1;
        let env = EventEnvelope { session_id: self.session_id.clone(), seq, kind, payload };
        if inner.buffer.len() == RESUME_BUFFER {
            inner.buffer.pop_front();
        }
        inner.buffer.push_back(env.clone());
        // Sent under the lock so subscribers see buffer and channel agree.
        let _ = self.tx.send(env);
        seq
    }

    /// Buffered events after `after`, and a receiver for everything newer.
    pub fn subscribe(&self, after: u64) -> (Vec<EventEnvelope>, broadcast::Receiver<EventEnvelope>) {
        let inner = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        let rx = self.tx.subscribe();
        let backlog = inner.buffer.iter().filter(|e| e.seq > after).cloned().collect();
        (backlog, rx)
    }

    /// Buffered events after `after`; used to catch up a lagging receiver.
    pub fn since(&self, after: u64) -> Vec<EventEnvelope> {
        let inner = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        inner.buffer.iter().filter(|e| e.seq > after).cloned().collect()
    }

    pub fn last_seq(&self) -> u64 {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).next_seq - 1
    }
}
