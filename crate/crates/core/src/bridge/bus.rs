//! Shared handle to a [`TopicTable`] plus the millisecond clock that drives
//! throttle gates.

use std::sync::Arc;
use std::time::Instant;

use parking_lot::Mutex;
use serde::Serialize;
use serde_json::Value;

use super::schema::Mode;
use super::table::{Outbox, Outcome, SessionId, TopicTable};
use super::BridgeError;

type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

/// Cloneable handle; all clones share one table. Every operation takes the
/// table lock for its whole duration, so commands are applied one at a time.
#[derive(Clone)]
pub struct Bus {
    table: Arc<Mutex<TopicTable>>,
    clock: Clock,
}

impl std::fmt::Debug for Bus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Bus").field("now_ms", &self.now_ms()).finish()
    }
}

impl Bus {
    /// A bus over the standard topic set, clocked by wall time since creation.
    pub fn new(mode: Mode) -> Self {
        let start = Instant::now();
        Self::with_clock(TopicTable::with_standard_topics(mode), move || start.elapsed().as_millis() as u64)
    }

    pub fn with_clock(table: TopicTable, clock: impl Fn() -> u64 + Send + Sync + 'static) -> Self {
        Self {
            table: Arc::new(Mutex::new(table)),
            clock: Arc::new(clock),
        }
    }

    pub fn now_ms(&self) -> u64 {
        (self.clock)()
    }

    /// Runs `f` with exclusive access to the table.
    pub fn with_table<R>(&self, f: impl FnOnce(&mut TopicTable) -> R) -> R {
        f(&mut self.table.lock())
    }

    pub fn publish(&self, topic: &str, schema: &str, payload: &Value) -> Result<usize, BridgeError> {
        let now = self.now_ms();
        self.table.lock().publish(topic, schema, payload, now)
    }

    /// Serializes `msg` and publishes it.
    pub fn publish_msg<T: Serialize>(&self, topic: &str, schema: &str, msg: &T) -> Result<usize, BridgeError> {
        let v = serde_json::to_value(msg).map_err(|_| BridgeError::BadPayload(topic.into()))?;
        self.publish(topic, schema, &v)
    }

    pub fn set_time(&self, t: f64) {
        self.table.lock().set_time(t);
    }

    pub fn set_mode(&self, mode: Mode) {
        self.table.lock().set_mode(mode);
    }

    pub fn open_session(&self, outbox: Arc<Outbox>) -> SessionId {
        self.table.lock().open_session(outbox)
    }

    pub fn close_session(&self, session: SessionId) {
        self.table.lock().close_session(session);
    }

    pub fn subscribe(&self, session: SessionId, topic: &str, throttle_ms: u64) -> Result<bool, BridgeError> {
        let now = self.now_ms();
        self.table.lock().subscribe(session, topic, throttle_ms, now)
    }

    /// Opens an unthrottled in-process session on `topics`; returns its outbox.
    pub fn tap(&self, topics: &[&str], capacity: Option<usize>) -> Result<(SessionId, Arc<Outbox>), BridgeError> {
        let outbox = match capacity {
            Some(c) => Outbox::bounded(c),
            None => Outbox::unbounded(),
        };
        let mut t = self.table.lock();
        let id = t.open_session(outbox.clone());
        for topic in topics {
            if let Err(e) = t.subscribe(id, topic, 0, 0) {
                t.close_session(id);
                return Err(e);
            }
        }
        Ok((id, outbox))
    }

    pub fn handle_text(&self, session: SessionId, text: &str) -> Outcome {
        let now = self.now_ms();
        self.table.lock().handle_text(session, text, now)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::schema::{GOAL, T_GOAL};
    use std::sync::atomic::{AtomicU64, Ordering};

    #[test]
    fn manual_clock_drives_throttle() {
        let now = Arc::new(AtomicU64::new(0));
        let n = now.clone();
        let bus = Bus::with_clock(TopicTable::with_standard_topics(Mode::Live), move || n.load(Ordering::SeqCst));
        let o = Outbox::unbounded();
        let s = bus.open_session(o.clone());
        bus.subscribe(s, T_GOAL, 1000).unwrap();
        let g = serde_json::json!({"x": 1, "y": 1});
        assert_eq!(bus.publish(T_GOAL, GOAL, &g).unwrap(), 1);
        now.store(999, Ordering::SeqCst);
        assert_eq!(bus.publish(T_GOAL, GOAL, &g).unwrap(), 0);
        now.store(1000, Ordering::SeqCst);
        assert_eq!(bus.publish(T_GOAL, GOAL, &g).unwrap(), 1);
    }

    #[test]
    fn tap_receives_latched_and_new() {
        let bus = Bus::new(Mode::Live);
        bus.publish(T_GOAL, GOAL, &serde_json::json!({"x": 1, "y": 1})).unwrap();
        let (_, o) = bus.tap(&[T_GOAL], None).unwrap();
        assert_eq!(o.len(), 1);
        assert!(bus.tap(&["/missing"], None).is_err());
        assert_eq!(bus.with_table(|t| t.session_count()), 1);
    }
}
