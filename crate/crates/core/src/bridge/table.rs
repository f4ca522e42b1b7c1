//! Topic registry, latched payloads, per-subscriber throttling and per-session
//! outboxes. Synchronous; time comes in as a millisecond argument.

use std::collections::{BTreeMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;
use serde_json::Value;
use tokio::sync::Notify;

use super::protocol::{canonical_json, decode_frame, encode_frame, encode_with_msg_text, Level, Op, WireMessage};
use super::schema::{self, Mode, StatusMsg};
use super::BridgeError;

pub type SessionId = u64;

/// Default outbox depth for socket sessions.
pub const OUTBOX_DEPTH: usize = 16;

/// What a published frame was, for consumers that need more than the text.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMeta {
    /// Sim time at publish.
    pub t: f64,
    pub topic: String,
    pub schema: String,
    /// Canonical payload text.
    pub msg: String,
}

/// One outbound frame. Published frames share their text between all
/// recipients; replies carry no metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub frame: Arc<str>,
    pub meta: Option<Arc<FrameMeta>>,
}

/// FIFO of frames waiting for one session. Bounded outboxes drop their oldest
/// frame when full so publishers never wait on a slow reader.
#[derive(Debug)]
pub struct Outbox {
    queue: Mutex<VecDeque<Delivery>>,
    capacity: Option<usize>,
    dropped: AtomicU64,
    closed: AtomicBool,
    notify: Notify,
}

impl Outbox {
    pub fn bounded(capacity: usize) -> Arc<Self> {
        Arc::new(Self::with_capacity(Some(capacity.max(1))))
    }

    pub fn unbounded() -> Arc<Self> {
        Arc::new(Self::with_capacity(None))
    }

    fn with_capacity(capacity: Option<usize>) -> Self {
        Self {
            queue: Mutex::new(VecDeque::new()),
            capacity,
            dropped: AtomicU64::new(0),
            closed: AtomicBool::new(false),
            notify: Notify::new(),
        }
    }

    pub fn push(&self, d: Delivery) {
        {
            let mut q = self.queue.lock();
            if self.capacity.is_some_and(|c| q.len() >= c) {
                q.pop_front();
                self.dropped.fetch_add(1, Ordering::Relaxed);
            }
            q.push_back(d);
        }
        self.notify.notify_one();
    }

    pub fn try_pop(&self) -> Option<Delivery> {
        self.queue.lock().pop_front()
    }

    pub fn drain(&self) -> Vec<Delivery> {
        self.queue.lock().drain(..).collect()
    }

    pub fn len(&self) -> usize {
        self.queue.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }

    /// Wakes any waiting reader; [`Outbox::recv`] returns `None` once drained.
    pub fn close(&self) {
        self.closed.store(true, Ordering::Release);
        self.notify.notify_waiters();
        self.notify.notify_one();
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::Acquire)
    }

    /// Next frame, waiting if necessary.
    pub async fn recv(&self) -> Option<Delivery> {
        loop {
            let woken = self.notify.notified();
            if let Some(d) = self.try_pop() {
                return Some(d);
            }
            if self.is_closed() {
                return None;
            }
            woken.await;
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Subscriber {
    session: SessionId,
    throttle_ms: u64,
    last_ms: Option<u64>,
}

impl Subscriber {
    fn admits(&self, now_ms: u64) -> bool {
        self.throttle_ms == 0 || self.last_ms.is_none_or(|last| now_ms.saturating_sub(last) >= self.throttle_ms)
    }
}

#[derive(Debug)]
struct Topic {
    schema: String,
    latest: Option<Delivery>,
    subscribers: Vec<Subscriber>,
}

/// How an inbound frame was answered.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// Subscriptions changed (a latched frame may have been queued).
    StateChange,
    /// A client publish was delivered to this many subscribers.
    FanOut(usize),
    /// A reply was queued to the sender.
    Reply(Level),
}

#[derive(Debug)]
pub struct TopicTable {
    topics: BTreeMap<String, Topic>,
    sessions: BTreeMap<SessionId, Arc<Outbox>>,
    next_session: SessionId,
    mode: Mode,
    sim_time: f64,
    retired_drops: u64,
}

impl TopicTable {
    pub fn new(mode: Mode) -> Self {
        Self {
            topics: BTreeMap::new(),
            sessions: BTreeMap::new(),
            next_session: 1,
            mode,
            sim_time: 0.0,
            retired_drops: 0,
        }
    }

    /// A table with every standard topic registered.
    pub fn with_standard_topics(mode: Mode) -> Self {
        let mut t = Self::new(mode);
        for (name, s) in schema::standard_topics() {
            t.register(&name, s).expect("standard topics are consistent");
        }
        t
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Sim time stamped onto published frames.
    pub fn set_time(&mut self, t: f64) {
        self.sim_time = t;
    }

    pub fn time(&self) -> f64 {
        self.sim_time
    }

    /// Registers a topic; re-registering with the same schema is a no-op.
    pub fn register(&mut self, topic: &str, schema: &str) -> Result<(), BridgeError> {
        if let Some(t) = self.topics.get(topic) {
            if t.schema != schema {
                return Err(BridgeError::SchemaMismatch {
                    topic: topic.into(),
                    expected: t.schema.clone(),
                    found: schema.into(),
                });
            }
            return Ok(());
        }
        self.topics.insert(
            topic.into(),
            Topic {
                schema: schema.into(),
                latest: None,
                subscribers: Vec::new(),
            },
        );
        Ok(())
    }

    pub fn schema_of(&self, topic: &str) -> Option<&str> {
        self.topics.get(topic).map(|t| t.schema.as_str())
    }

    /// `(topic, schema)` for every registered topic, sorted by name.
    pub fn directory(&self) -> Vec<(String, String)> {
        self.topics.iter().map(|(n, t)| (n.clone(), t.schema.clone())).collect()
    }

    pub fn open_session(&mut self, outbox: Arc<Outbox>) -> SessionId {
        let id = self.next_session;
        self.next_session += 1;
        self.sessions.insert(id, outbox);
        id
    }

    pub fn close_session(&mut self, session: SessionId) {
        for t in self.topics.values_mut() {
            t.subscribers.retain(|s| s.session != session);
        }
        if let Some(o) = self.sessions.remove(&session) {
            self.retired_drops += o.dropped();
            o.close();
        }
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    /// Frames dropped from full outboxes, including closed sessions.
    pub fn dropped_total(&self) -> u64 {
        self.retired_drops + self.sessions.values().map(|o| o.dropped()).sum::<u64>()
    }

    pub fn latest(&self, topic: &str) -> Option<&Delivery> {
        self.topics.get(topic).and_then(|t| t.latest.as_ref())
    }

    /// Adds (or re-throttles) a subscription and queues the latched frame.
    /// Returns whether a latched frame was queued.
    pub fn subscribe(&mut self, session: SessionId, topic: &str, throttle_ms: u64, now_ms: u64) -> Result<bool, BridgeError> {
        let outbox = self.sessions.get(&session).ok_or(BridgeError::UnknownSession(session))?.clone();
        let t = self
            .topics
            .get_mut(topic)
            .ok_or_else(|| BridgeError::UnknownTopic(topic.into()))?;
        let latched = t.latest.clone();
        let last_ms = latched.as_ref().map(|_| now_ms);
        match t.subscribers.iter_mut().find(|s| s.session == session) {
            Some(s) => {
                s.throttle_ms = throttle_ms;
                if last_ms.is_some() {
                    s.last_ms = last_ms;
                }
            }
            None => t.subscribers.push(Subscriber {
                session,
                throttle_ms,
                last_ms,
            }),
        }
        if let Some(d) = latched {
            outbox.push(d);
            return Ok(true);
        }
        Ok(false)
    }

    pub fn unsubscribe(&mut self, session: SessionId, topic: &str) -> Result<(), BridgeError> {
        let t = self
            .topics
            .get_mut(topic)
            .ok_or_else(|| BridgeError::UnknownTopic(topic.into()))?;
        t.subscribers.retain(|s| s.session != session);
        Ok(())
    }

    /// Latches `payload` on `topic` and queues it to every subscriber whose
    /// throttle window has elapsed. Returns the number of deliveries.
    pub fn publish(&mut self, topic: &str, schema: &str, payload: &Value, now_ms: u64) -> Result<usize, BridgeError> {
        let msg = canonical_json(payload);
        self.publish_canonical(topic, schema, msg, now_ms)
    }

    /// [`TopicTable::publish`] for a payload already in canonical text form.
    pub fn publish_canonical(&mut self, topic: &str, schema: &str, msg: String, now_ms: u64) -> Result<usize, BridgeError> {
        let t = self
            .topics
            .get_mut(topic)
            .ok_or_else(|| BridgeError::UnknownTopic(topic.into()))?;
        if t.schema != schema {
            return Err(BridgeError::SchemaMismatch {
                topic: topic.into(),
                expected: t.schema.clone(),
                found: schema.into(),
            });
        }
        let envelope = WireMessage {
            topic: Some(topic.into()),
            schema: Some(schema.into()),
            ..WireMessage::new(Op::Publish)
        };
        let frame: Arc<str> = encode_with_msg_text(&envelope, Some(&msg)).into();
        let d = Delivery {
            frame,
            meta: Some(Arc::new(FrameMeta {
                t: self.sim_time,
                topic: topic.into(),
                schema: schema.into(),
                msg,
            })),
        };
        t.latest = Some(d.clone());
        let mut count = 0;
        for s in t.subscribers.iter_mut() {
            if !s.admits(now_ms) {
                continue;
            }
            if let Some(o) = self.sessions.get(&s.session) {
                o.push(d.clone());
                s.last_ms = Some(now_ms);
                count += 1;
            }
        }
        Ok(count)
    }

    pub fn status(&self) -> StatusMsg {
        StatusMsg {
            stamp: self.sim_time,
            mode: self.mode.clone(),
            sessions: self.sessions.len(),
            dropped: self.dropped_total(),
            message: None,
        }
    }

    fn reply(&self, session: SessionId, m: WireMessage) -> Outcome {
        let level = m.level.unwrap_or(Level::Info);
        if let Some(o) = self.sessions.get(&session) {
            o.push(Delivery {
                frame: encode_frame(&m).into(),
                meta: None,
            });
        }
        Outcome::Reply(level)
    }

    fn error(&self, session: SessionId, e: &BridgeError, id: Option<String>) -> Outcome {
        self.reply(session, WireMessage::status(Level::Error, e.to_string(), id))
    }

    /// Decodes and handles one inbound text frame from `session`.
    pub fn handle_text(&mut self, session: SessionId, text: &str, now_ms: u64) -> Outcome {
        match decode_frame(text) {
            Ok(m) => self.handle(session, m, now_ms),
            Err(e) => self.reply(session, e.reply()),
        }
    }

    /// Applies a decoded client frame. Every frame produces exactly one of a
    /// subscription change, a fan-out, or a reply to the sender.
    pub fn handle(&mut self, session: SessionId, m: WireMessage, now_ms: u64) -> Outcome {
        let id = m.id.clone();
        match m.op {
            Op::Subscribe => {
                let topic = m.topic.unwrap_or_default();
                match self.subscribe(session, &topic, m.throttle_ms.unwrap_or(0), now_ms) {
                    Ok(_) => Outcome::StateChange,
                    Err(e) => self.error(session, &e, id),
                }
            }
            Op::Unsubscribe => {
                let topic = m.topic.unwrap_or_default();
                match self.unsubscribe(session, &topic) {
                    Ok(()) => Outcome::StateChange,
                    Err(e) => self.error(session, &e, id),
                }
            }
            Op::Publish => match self.client_publish(&m, now_ms) {
                Ok(n) => Outcome::FanOut(n),
                Err(e) => self.error(session, &e, id),
            },
            Op::Topics => {
                let dir: Vec<Value> = self
                    .directory()
                    .into_iter()
                    .map(|(topic, schema)| serde_json::json!({"topic": topic, "type": schema}))
                    .collect();
                let reply = WireMessage {
                    id,
                    msg: Some(serde_json::json!({ "topics": dir })),
                    ..WireMessage::new(Op::Topics)
                };
                if let Some(o) = self.sessions.get(&session) {
                    o.push(Delivery {
                        frame: encode_frame(&reply).into(),
                        meta: None,
                    });
                }
                Outcome::Reply(Level::Info)
            }
            Op::Status => {
                let status = serde_json::to_value(self.status()).unwrap_or(Value::Null);
                let reply = WireMessage {
                    id,
                    level: Some(Level::Info),
                    msg: Some(status),
                    ..WireMessage::new(Op::Status)
                };
                self.reply(session, reply)
            }
        }
    }

    fn client_publish(&mut self, m: &WireMessage, now_ms: u64) -> Result<usize, BridgeError> {
        let topic = m.topic.as_deref().unwrap_or_default();
        let expected = self
            .schema_of(topic)
            .ok_or_else(|| BridgeError::UnknownTopic(topic.into()))?
            .to_string();
        if self.mode == Mode::Replay {
            return Err(BridgeError::ReplayMode);
        }
        if !schema::CLIENT_WRITABLE.contains(&topic) {
            return Err(BridgeError::ReadOnlyTopic(topic.into()));
        }
        if let Some(found) = &m.schema {
            if *found != expected {
                return Err(BridgeError::SchemaMismatch {
                    topic: topic.into(),
                    expected,
                    found: found.clone(),
                });
            }
        }
        let payload = m.msg.as_ref().ok_or(BridgeError::BadPayload(topic.into()))?;
        if !schema::payload_matches(&expected, payload) {
            return Err(BridgeError::BadPayload(topic.into()));
        }
        self.publish(topic, &expected, payload, now_ms)
    }
}
