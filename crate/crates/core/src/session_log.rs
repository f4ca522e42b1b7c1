//! JSON-lines recording of published frames and timed replay onto a bus.
//!
//! Line 1 is a header `{"format":"clearbot-log/1","scenario":..}`; every other
//! line is one frame `{"t":..,"topic":..,"schema":..,"msg":..}` with `t` in
//! sim seconds.

use std::io::{self, BufRead, Write};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::bridge::protocol::canonical_json;
use crate::bridge::{Bus, BridgeError, FrameMeta, Mode, Outbox};

pub const FORMAT: &str = "clearbot-log/1";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log i/o: {0}")]
    Io(#[from] io::Error),
    #[error("missing or unsupported log header")]
    BadHeader,
    #[error("line {line}: time {t} precedes {prev}")]
    NonMonotoneTime { line: usize, t: f64, prev: f64 },
    #[error("replay speed must be positive, got {0}")]
    BadSpeed(f64),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl LogHeader {
    pub fn new(scenario: Option<&str>, seed: Option<u64>) -> Self {
        Self {
            format: FORMAT.into(),
            scenario: scenario.map(str::to_owned),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t: f64,
    pub topic: String,
    pub schema: String,
    pub msg: Value,
}

/// Writes frames as they are handed over. Call [`Recorder::finish`] to flush.
#[derive(Debug)]
pub struct Recorder<W: Write> {
    sink: W,
    count: usize,
    last_t: f64,
}

impl<W: Write> Recorder<W> {
    /// Writes the header line.
    pub fn new(mut sink: W, header: &LogHeader) -> Result<Self, LogError> {
        let h = serde_json::to_value(header).map_err(io::Error::from)?;
        writeln!(sink, "{}", canonical_json(&h))?;
        Ok(Self {
            sink,
            count: 0,
            last_t: f64::NEG_INFINITY,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn write(&mut self, f: &FrameMeta) -> Result<(), LogError> {
        if f.t < self.last_t {
            return Err(LogError::NonMonotoneTime {
                line: self.count + 2,
                t: f.t,
                prev: self.last_t,
            });
        }
        let quote = |s: &str| Value::String(s.to_owned()).to_string();
        writeln!(
            self.sink,
            "{{\"t\":{},\"topic\":{},\"schema\":{},\"msg\":{}}}",
            canonical_json(&serde_json::json!(f.t)),
            quote(&f.topic),
            quote(&f.schema),
            f.msg
        )?;
        self.last_t = f.t;
        self.count += 1;
        Ok(())
    }

    /// Writes every published frame currently queued in `outbox`.
    pub fn drain(&mut self, outbox: &Outbox) -> Result<usize, LogError> {
        let mut n = 0;
        while let Some(d) = outbox.try_pop() {
            if let Some(meta) = d.meta {
                self.write(&meta)?;
                n += 1;
            }
        }
        Ok(n)
    }

    /// Writes frames from `outbox` until it is closed and empty.
    pub async fn follow(&mut self, outbox: &Outbox) -> Result<usize, LogError> {
        let mut n = 0;
        while let Some(d) = outbox.recv().await {
            if let Some(meta) = d.meta {
                self.write(&meta)?;
                n += 1;
            }
        }
        Ok(n)
    }

    /// Flushes and returns the record count and sink.
    pub fn finish(mut self) -> Result<(usize, W), LogError> {
        self.sink.flush()?;
        Ok((self.count, self.sink))
    }
}

/// A parsed log. Corrupt lines are skipped and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: LogHeader,
    pub records: Vec<LogRecord>,
    pub corrupt: usize,
}

impl SessionLog {
    pub fn read(reader: impl BufRead) -> Result<Self, LogError> {
        let mut lines = reader.lines();
        let header: LogHeader = match lines.next() {
            Some(l) => serde_json::from_str(&l?).map_err(|_| LogError::BadHeader)?,
            None => return Err(LogError::BadHeader),
        };
        if header.format != FORMAT {
            return Err(LogError::BadHeader);
        }
        let mut records: Vec<LogRecord> = Vec::new();
        let mut corrupt = 0;
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = match serde_json::from_str::<LogRecord>(&line) {
                Ok(r) if r.t.is_finite() => r,
                _ => {
                    log::warn!("log line {}: skipped corrupt record", i + 2);
                    corrupt += 1;
                    continue;
                }
            };
            if let Some(prev) = records.last() {
                if rec.t < prev.t {
                    return Err(LogError::NonMonotoneTime {
                        line: i + 2,
                        t: rec.t,
                        prev: prev.t,
                    });
                }
            }
            records.push(rec);
        }
        Ok(Self { header, records, corrupt })
    }

    pub fn duration(&self) -> f64 {
        match (self.records.first(), self.records.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

/// Re-publishes every record on its topic, in file order, spacing frames by
/// their sim-time gap divided by `speed`. `f64::INFINITY` replays without
/// delay. The bus is switched to replay mode, which rejects client publishes.
pub async fn replay(log: &SessionLog, speed: f64, bus: &Bus) -> Result<usize, LogError> {
    if !(speed > 0.0) {
        return Err(LogError::BadSpeed(speed));
    }
    bus.set_mode(Mode::Replay);
    let Some(first) = log.records.first() else {
        return Ok(0);
    };
    let start = tokio::time::Instant::now();
    let mut n = 0;
    for r in &log.records {
        if speed.is_finite() {
            let offset = (r.t - first.t) / speed;
            tokio::time::sleep_until(start + Duration::from_secs_f64(offset.max(0.0))).await;
        }
        bus.with_table(|t| -> Result<(), BridgeError> {
            t.register(&r.topic, &r.schema)?;
            t.set_time(r.t);
            Ok(())
        })?;
        bus.publish(&r.topic, &r.schema, &r.msg)?;
        n += 1;
    }
    Ok(n)
}
