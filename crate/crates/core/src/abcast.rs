//! Atomic (total order) broadcast among the servers.
//!
//! The service is a simulator-resident sequencer: a message is assigned its
//! global position when it is broadcast, and every server that has not
//! crashed is handed the messages strictly in that order at seeded,
//! finite delays. The resulting [`AbTrace`] is checked independently by
//! [`check_abcast_trace`] for Validity, Uniform Agreement, Uniform
//! Integrity and Uniform Total Order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ledger::{ProcessId, Record};
use crate::verdict::{CheckerKind, Property, Verdict};

pub type ServerId = u32;
/// Global total-order position of a broadcast message.
pub type MessageId = u64;

/// What the server protocols broadcast.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AbPayload {
    Append { c: u64, record: Record },
    Get { client: ProcessId, c: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbMessage {
    pub sender: ServerId,
    pub payload: AbPayload,
    pub seq: MessageId,
}

/// One line of `abtrace.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "ev", rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceEvent {
    Broadcast {
        server: ServerId,
        msg: MessageId,
        t: u64,
        payload: AbPayload,
    },
    Deliver {
        server: ServerId,
        msg: MessageId,
        t: u64,
    },
    Crash {
        server: ServerId,
        t: u64,
    },
}

/// Broadcast, delivery and crash events in the order they happened.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AbTrace {
    pub events: Vec<TraceEvent>,
}

impl AbTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, ev: TraceEvent) {
        self.events.push(ev);
    }

    pub fn broadcasts(&self) -> impl Iterator<Item = (ServerId, MessageId, u64)> + '_ {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Broadcast { server, msg, t, .. } => Some((*server, *msg, *t)),
            _ => None,
        })
    }

    /// Per-server delivery lists, in delivery order.
    pub fn deliveries(&self) -> BTreeMap<ServerId, Vec<MessageId>> {
        let mut out: BTreeMap<ServerId, Vec<MessageId>> = BTreeMap::new();
        for e in &self.events {
            if let TraceEvent::Deliver { server, msg, .. } = e {
                out.entry(*server).or_default().push(*msg);
            }
        }
        out
    }

    pub fn crashes(&self) -> BTreeMap<ServerId, u64> {
        self.events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Crash { server, t } => Some((*server, *t)),
                _ => None,
            })
            .collect()
    }

    /// Every server mentioned anywhere in the trace.
    pub fn servers(&self) -> BTreeSet<ServerId> {
        self.events
            .iter()
            .map(|e| match e {
                TraceEvent::Broadcast { server, .. }
                | TraceEvent::Deliver { server, .. }
                | TraceEvent::Crash { server, .. } => *server,
            })
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, serde_json::Error> {
        let mut events = Vec::new();
        for line in r.lines() {
            let line = line.map_err(serde_json::Error::io)?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(&line)?);
        }
        Ok(Self { events })
    }
}

/// The sequencer-backed broadcast service.
#[derive(Debug, Clone)]
pub struct AtomicBroadcast {
    messages: Vec<AbMessage>,
    next: Vec<usize>,
    crashed: Vec<bool>,
    // Last scheduled delivery time per server, keeping per-server delivery
    // times monotone in sequence order.
    horizon: Vec<u64>,
    max_delay: u64,
    trace: AbTrace,
}

impl AtomicBroadcast {
    pub fn new(servers: usize, max_delay: u64) -> Self {
        assert!(max_delay >= 1, "max_delay must be at least one tick");
        Self {
            messages: Vec::new(),
            next: vec![0; servers],
            crashed: vec![false; servers],
            horizon: vec![0; servers],
            max_delay,
            trace: AbTrace::new(),
        }
    }

    /// Assigns the next global position to `payload` and returns the
    /// delivery time chosen for every live server.
    ///
    /// Panics if `server` has crashed.
    pub fn abroadcast<R: Rng>(
        &mut self,
        server: ServerId,
        payload: AbPayload,
        now: u64,
        rng: &mut R,
    ) -> (MessageId, Vec<(ServerId, u64)>) {
        assert!(
            !self.crashed[server as usize],
            "crashed server {server} attempted to broadcast"
        );
        let seq = self.messages.len() as MessageId;
        self.trace.push(TraceEvent::Broadcast {
            server,
            msg: seq,
            t: now,
            payload: payload.clone(),
        });
        self.messages.push(AbMessage {
            sender: server,
            payload,
            seq,
        });
        let mut schedule = Vec::with_capacity(self.next.len());
        for s in 0..self.next.len() {
            if self.crashed[s] {
                continue;
            }
            let at = (now + rng.gen_range(1..=self.max_delay)).max(self.horizon[s]);
            self.horizon[s] = at;
            schedule.push((s as ServerId, at));
        }
        (seq, schedule)
    }

    /// Hands `server` the lowest-positioned message it has not yet
    /// delivered. Crashed servers never deliver again.
    pub fn deliver_next(&mut self, server: ServerId, now: u64) -> Option<AbMessage> {
        let s = server as usize;
        if self.crashed[s] {
            return None;
        }
        let msg = self.messages.get(self.next[s])?.clone();
        self.next[s] += 1;
        self.trace.push(TraceEvent::Deliver {
            server,
            msg: msg.seq,
            t: now,
        });
        Some(msg)
    }

    pub fn crash(&mut self, server: ServerId, now: u64) {
        let s = server as usize;
        if !self.crashed[s] {
            self.crashed[s] = true;
            self.trace.push(TraceEvent::Crash { server, t: now });
        }
    }

    pub fn broadcast_count(&self) -> usize {
        self.messages.len()
    }

    pub fn delivered_count(&self, server: ServerId) -> usize {
        self.next[server as usize]
    }

    pub fn trace(&self) -> &AbTrace {
        &self.trace
    }

    pub fn into_trace(self) -> AbTrace {
        self.trace
    }
}

fn ids(msgs: &[MessageId]) -> Vec<String> {
    msgs.iter().map(|m| format!("m{m}")).collect()
}

/// Checks a completed (quiescent) trace for the four broadcast guarantees.
///
/// Properties are tested in the order Uniform Integrity, Validity, Uniform
/// Agreement, Uniform Total Order; the first violation is reported with the
/// offending message ids (and the servers involved).
pub fn check_abcast_trace(trace: &AbTrace) -> Verdict {
    let kind = CheckerKind::Abcast;
    let crashes = trace.crashes();
    let correct: BTreeSet<ServerId> = trace
        .servers()
        .into_iter()
        .filter(|s| !crashes.contains_key(s))
        .collect();

    // Uniform Integrity: delivered at most once per server, and only after
    // having been broadcast.
    let mut broadcast_so_far: BTreeSet<MessageId> = BTreeSet::new();
    let mut delivered: HashMap<ServerId, BTreeSet<MessageId>> = HashMap::new();
    for e in &trace.events {
        match e {
            TraceEvent::Broadcast { msg, .. } => {
                broadcast_so_far.insert(*msg);
            }
            TraceEvent::Deliver { server, msg, .. } => {
                if !broadcast_so_far.contains(msg) {
                    return Verdict::fail(
                        kind,
                        Property::UniformIntegrity,
                        vec![format!("m{msg}"), format!("s{server}")],
                    );
                }
                if !delivered.entry(*server).or_default().insert(*msg) {
                    return Verdict::fail(
                        kind,
                        Property::UniformIntegrity,
                        vec![format!("m{msg}"), format!("s{server}")],
                    );
                }
            }
            TraceEvent::Crash { .. } => {}
        }
    }

    // Validity: a correct broadcaster delivers its own messages.
    for (server, msg, _) in trace.broadcasts() {
        if correct.contains(&server) && !delivered.get(&server).is_some_and(|d| d.contains(&msg)) {
            return Verdict::fail(kind, Property::Validity, vec![format!("m{msg}"), format!("s{server}")]);
        }
    }

    // Uniform Agreement: delivered anywhere implies delivered at every
    // correct server.
    let delivered_anywhere: BTreeSet<MessageId> = delivered.values().flatten().copied().collect();
    for msg in &delivered_anywhere {
        for s in &correct {
            if !delivered.get(s).is_some_and(|d| d.contains(msg)) {
                return Verdict::fail(kind, Property::UniformAgreement, vec![format!("m{msg}"), format!("s{s}")]);
            }
        }
    }

    // Uniform Total Order: common messages appear in the same relative
    // order at every pair of servers.
    let lists = trace.deliveries();
    let positions: BTreeMap<ServerId, HashMap<MessageId, usize>> = lists
        .iter()
        .map(|(s, l)| (*s, l.iter().enumerate().map(|(i, m)| (*m, i)).collect()))
        .collect();
    for (a, list_a) in &lists {
        for (b, pos_b) in &positions {
            if b <= a {
                continue;
            }
            let mut last: Option<(usize, MessageId)> = None;
            for m in list_a {
                if let Some(&p) = pos_b.get(m) {
                    if let Some((lp, lm)) = last {
                        if p < lp {
                            let mut w = ids(&[lm, *m]);
                            w.push(format!("s{a}"));
                            w.push(format!("s{b}"));
                            return Verdict::fail(kind, Property::UniformTotalOrder, w);
                        }
                    }
                    last = Some((p, *m));
                }
            }
        }
    }

    Verdict::pass(kind)
}
