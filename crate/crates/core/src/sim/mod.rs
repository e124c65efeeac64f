//! Deterministic discrete-event simulation of clients, servers, reliable
//! channels and the atomic broadcast service.
//!
//! A run is a pure function of its [`Scenario`]: all randomness comes from
//! ChaCha streams seeded by `scenario.seed`, and events are executed in
//! `(time, seqno)` order.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::abcast::{AtomicBroadcast, ServerId};
use crate::ledger::{filter_valid, ProcessId};
use crate::protocols::{
    new_server, select_servers, Action, ClientState, Completion, Proposer, Request, Response, ServerProtocol,
};

pub mod artifact;
pub mod history;
pub mod scenario;

pub use artifact::{ArtifactError, RunArtifact, RunMeta, ServerSnapshot, ValidatedGet};
pub use history::{op_id, EventType, History, HistoryError, HistoryEvent, OpKind};
pub use scenario::{
    generate_workload, ClientCrashSpec, ClientProgram, ConfigError, CrashSpec, GeneratorSpec, OpSpec, PayloadSpec,
    RandomCrashes, ResolvedScenario, Scenario, WorkloadSpec,
};

/// Upper bound on executed events; a finite workload never gets close.
pub const EVENT_LIMIT: u64 = 5_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run stalled: client {client} never received a response for {op}")]
    Stalled { client: ProcessId, op: String },
    #[error("event limit of {0} exceeded")]
    EventLimit(u64),
}

#[derive(Debug, Clone)]
enum EventKind {
    Invoke(ProcessId),
    Request {
        server: ServerId,
        client: ProcessId,
        req: Request,
    },
    Response {
        client: ProcessId,
        resp: Response,
    },
    AbDeliver(ServerId),
    CrashServer(ServerId),
    CrashClient(ProcessId),
}

enum Program {
    Ops(VecDeque<OpSpec>),
    Propose(Proposer),
}

impl Program {
    fn next_op(&mut self) -> Option<OpSpec> {
        match self {
            Self::Ops(ops) => ops.pop_front(),
            Self::Propose(p) => p.next_op(),
        }
    }
}

struct SimClient {
    state: ClientState,
    program: Program,
    crashed: bool,
    probes_left: u32,
}

struct Simulator {
    scenario: Scenario,
    rng: ChaCha8Rng,
    now: u64,
    seqno: u64,
    queue: BTreeMap<(u64, u64), EventKind>,
    servers: Vec<Box<dyn ServerProtocol>>,
    crashed: Vec<bool>,
    clients: Vec<SimClient>,
    abcast: AtomicBroadcast,
    history: History,
    validated: Vec<ValidatedGet>,
    probing: bool,
    executed: u64,
}

impl Simulator {
    fn new(resolved: &ResolvedScenario) -> Self {
        let s = &resolved.scenario;
        let clients = resolved
            .programs
            .iter()
            .enumerate()
            .map(|(id, prog)| {
                let id = id as ProcessId;
                SimClient {
                    state: ClientState::new(id, s.mode, select_servers(id, s.n, s.f)),
                    program: match prog {
                        ClientProgram::Ops(ops) => Program::Ops(ops.iter().cloned().collect()),
                        ClientProgram::Propose(v) => Program::Propose(Proposer::new(v.clone())),
                    },
                    crashed: false,
                    probes_left: 0,
                }
            })
            .collect();
        Self {
            scenario: s.clone(),
            rng: ChaCha8Rng::seed_from_u64(s.seed),
            now: 0,
            seqno: 0,
            queue: BTreeMap::new(),
            servers: (0..s.n).map(|i| new_server(s.mode, i)).collect(),
            crashed: vec![false; s.n as usize],
            clients,
            abcast: AtomicBroadcast::new(s.n as usize, s.max_delay),
            history: History::new(),
            validated: Vec::new(),
            probing: false,
            executed: 0,
        }
    }

    fn schedule(&mut self, at: u64, ev: EventKind) {
        debug_assert!(at >= self.now, "event scheduled in the past");
        self.queue.insert((at, self.seqno), ev);
        self.seqno += 1;
    }

    fn channel_delay(&mut self) -> u64 {
        self.rng.gen_range(1..=self.scenario.max_delay)
    }

    fn think(&mut self) -> u64 {
        self.rng.gen_range(0..=self.scenario.max_think)
    }

    fn run(mut self, resolved: &ResolvedScenario) -> Result<RunArtifact, SimError> {
        // crashes first, so a crash wins ties with other events at its tick
        for c in &resolved.crashes {
            self.schedule(c.time, EventKind::CrashServer(c.server));
        }
        for c in &self.scenario.client_crashes.clone() {
            self.schedule(c.time, EventKind::CrashClient(c.client));
        }
        for id in 0..self.clients.len() as ProcessId {
            let at = self.think();
            self.schedule(at, EventKind::Invoke(id));
        }
        let mut probe_start = None;
        loop {
            while let Some(((t, _), ev)) = self.queue.pop_first() {
                self.now = t;
                self.executed += 1;
                if self.executed > EVENT_LIMIT {
                    return Err(SimError::EventLimit(EVENT_LIMIT));
                }
                self.step(ev);
            }
            for cl in &self.clients {
                if let (false, Some(p)) = (cl.crashed, cl.state.pending()) {
                    return Err(SimError::Stalled {
                        client: cl.state.id(),
                        op: op_id(cl.state.id(), p.c()),
                    });
                }
            }
            if self.probing {
                break;
            }
            self.probing = true;
            probe_start = Some(self.history.len());
            log::debug!("quiescent at t={}, starting probe phase", self.now);
            for id in 0..self.clients.len() {
                if !self.clients[id].crashed && self.scenario.probe_gets > 0 {
                    self.clients[id].probes_left = self.scenario.probe_gets;
                    let at = self.now + 1;
                    self.schedule(at, EventKind::Invoke(id as ProcessId));
                }
            }
        }
        Ok(self.finish(resolved, probe_start.expect("probe phase started")))
    }

    fn step(&mut self, ev: EventKind) {
        match ev {
            EventKind::Invoke(client) => self.invoke(client),
            EventKind::Request { server, client, req } => {
                if self.crashed[server as usize] {
                    return;
                }
                let actions = self.servers[server as usize].on_request(client, req);
                self.perform(server, actions);
            }
            EventKind::Response { client, resp } => self.respond(client, resp),
            EventKind::AbDeliver(server) => {
                if self.crashed[server as usize] {
                    return;
                }
                let msg = self
                    .abcast
                    .deliver_next(server, self.now)
                    .expect("one scheduled delivery per broadcast message");
                let actions = self.servers[server as usize].on_deliver(&msg.payload);
                self.perform(server, actions);
            }
            EventKind::CrashServer(server) => {
                log::debug!("t={} server {server} crashes", self.now);
                self.crashed[server as usize] = true;
                self.abcast.crash(server, self.now);
            }
            EventKind::CrashClient(client) => {
                log::debug!("t={} client {client} crashes", self.now);
                self.clients[client as usize].crashed = true;
            }
        }
    }

    fn invoke(&mut self, client: ProcessId) {
        let now = self.now;
        let cl = &mut self.clients[client as usize];
        if cl.crashed || cl.state.pending().is_some() {
            return;
        }
        let op = if self.probing {
            if cl.probes_left == 0 {
                return;
            }
            cl.probes_left -= 1;
            OpSpec::Get
        } else {
            match cl.program.next_op() {
                Some(op) => op,
                None => return,
            }
        };
        let req = match op {
            OpSpec::Get => {
                let req = cl.state.begin_get();
                self.history.push(HistoryEvent::invoke_get(client, req.c(), now));
                req
            }
            OpSpec::Append(payload) => {
                let req = cl.state.begin_append(payload.clone());
                self.history
                    .push(HistoryEvent::invoke_append(client, req.c(), now, payload));
                req
            }
        };
        let targets = cl.state.servers().to_vec();
        for server in targets {
            let at = now + self.channel_delay();
            self.schedule(
                at,
                EventKind::Request {
                    server,
                    client,
                    req: req.clone(),
                },
            );
        }
    }

    fn perform(&mut self, server: ServerId, actions: Vec<Action>) {
        for action in actions {
            match action {
                Action::Respond { to, resp } => {
                    let at = self.now + self.channel_delay();
                    self.schedule(at, EventKind::Response { client: to, resp });
                }
                Action::Broadcast(payload) => {
                    let (_, deliveries) = self.abcast.abroadcast(server, payload, self.now, &mut self.rng);
                    for (dst, at) in deliveries {
                        self.schedule(at, EventKind::AbDeliver(dst));
                    }
                }
            }
        }
    }

    fn respond(&mut self, client: ProcessId, resp: Response) {
        let now = self.now;
        let cl = &mut self.clients[client as usize];
        if cl.crashed {
            return;
        }
        let Some(done) = cl.state.on_response(resp) else {
            log::trace!("t={now} client {client} drops a duplicate response");
            return;
        };
        match &done {
            Completion::Get { c, seq } => {
                self.history.push(HistoryEvent::get_response(client, *c, now, seq.taus()));
                if let Some(pred) = &self.scenario.predicate {
                    self.validated.push(ValidatedGet {
                        op: op_id(client, *c),
                        seq: filter_valid(seq, pred).taus(),
                    });
                }
            }
            Completion::Append { c, result, .. } => {
                self.history
                    .push(HistoryEvent::append_response(client, *c, now, *result));
            }
        }
        if let Program::Propose(p) = &mut cl.program {
            if !self.probing {
                p.on_complete(&done);
            }
        }
        let at = now + self.think();
        self.schedule(at, EventKind::Invoke(client));
    }

    fn finish(self, resolved: &ResolvedScenario, probe_start: usize) -> RunArtifact {
        let states = self
            .servers
            .iter()
            .enumerate()
            .map(|(i, s)| ServerSnapshot {
                id: i as ServerId,
                crashed: self.crashed[i],
                records: s.replica().clone(),
            })
            .collect();
        let decisions = self
            .clients
            .iter()
            .filter_map(|cl| match &cl.program {
                Program::Propose(p) => p.decision().map(|d| (cl.state.id(), d.to_string())),
                Program::Ops(_) => None,
            })
            .collect();
        RunArtifact {
            history: self.history,
            abtrace: self.abcast.into_trace(),
            states,
            meta: RunMeta {
                scenario_hash: self.scenario.hash(),
                seed: self.scenario.seed,
                crashes: resolved.crashes.clone(),
                client_crashes: self.scenario.client_crashes.clone(),
                scenario: self.scenario,
                probe_start,
                decisions,
                events_executed: self.executed,
                end_time: self.now,
            },
            validated_gets: self.validated,
        }
    }
}

/// Executes `scenario` to quiescence, then runs the probe phase, and returns
/// the recorded artifact.
pub fn run(scenario: &Scenario) -> Result<RunArtifact, SimError> {
    let resolved = scenario.resolve()?;
    Simulator::new(&resolved).run(&resolved)
}

/// Counts used for one-line run summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSummary {
    pub ops_completed: usize,
    pub ops_pending: usize,
    pub records_appended: usize,
    pub crashes: usize,
}

impl RunArtifact {
    pub fn summary(&self) -> RunSummary {
        let invokes = self.history.events.iter().filter(|e| e.ev == EventType::Invoke).count();
        let responses = self.history.len() - invokes;
        let records_appended = self
            .states
            .iter()
            .map(|s| s.records.len())
            .max()
            .unwrap_or(0);
        RunSummary {
            ops_completed: responses,
            ops_pending: invokes - responses,
            records_appended,
            crashes: self.meta.crashes.len() + self.meta.client_crashes.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abcast::check_abcast_trace;
    use crate::ledger::RecordId;
    use crate::protocols::Mode;

    fn explicit(mode: Mode, lists: Vec<Vec<OpSpec>>) -> Scenario {
        let mut s = Scenario::new(mode, 3, 1, lists.len() as u32, 0);
        s.workload = WorkloadSpec::Explicit(lists);
        s
    }

    fn responses(a: &RunArtifact, kind: OpKind) -> Vec<&HistoryEvent> {
        a.history
            .events
            .iter()
            .filter(|e| e.ev == EventType::Response && e.kind == kind)
            .collect()
    }

    #[test]
    fn append_then_get_sees_the_record_in_atomic_mode() {
        let s = explicit(Mode::Atomic, vec![vec![OpSpec::Append("x".into()), OpSpec::Get]]);
        let a = run(&s).unwrap();
        a.history.validate().unwrap();
        let gets = responses(&a, OpKind::Get);
        assert_eq!(gets[0].seq.as_deref(), Some(&[RecordId::new(0, 1)][..]));
        // two probe gets
        assert_eq!(gets.len(), 3);
        assert_eq!(a.meta.probe_start, 4);
    }

    #[test]
    fn identical_scenarios_give_identical_artifacts() {
        let mut s = Scenario::new(Mode::Sequential, 5, 2, 3, 8).with_seed(77);
        s.random_crashes = Some(RandomCrashes { max: 2, window: 40 });
        let a = run(&s).unwrap();
        let b = run(&s).unwrap();
        assert_eq!(a.history.to_jsonl(), b.history.to_jsonl());
        assert_eq!(a.abtrace.to_jsonl(), b.abtrace.to_jsonl());
        assert_eq!(a, b);
    }

    #[test]
    fn early_server_crash_does_not_block_eventual_clients() {
        let mut s = Scenario::new(Mode::Eventual, 3, 1, 3, 6).with_seed(3);
        s.crash_schedule = vec![CrashSpec { server: 0, time: 0 }];
        let a = run(&s).unwrap();
        assert_eq!(a.summary().ops_pending, 0);
        assert!(a.states[0].crashed);
        assert!(check_abcast_trace(&a.abtrace).is_pass());
    }

    #[test]
    fn every_mode_completes_under_crashes() {
        for mode in [Mode::Eventual, Mode::Sequential, Mode::Atomic] {
            for seed in 0..30 {
                let mut s = Scenario::new(mode, 3, 1, 4, 10).with_seed(seed);
                s.random_crashes = Some(RandomCrashes { max: 1, window: 60 });
                let a = run(&s).unwrap();
                assert_eq!(a.summary().ops_pending, 0, "{mode} seed {seed}");
                assert_eq!(a.summary().ops_completed, 4 * 10 + 4 * 2);
            }
        }
    }

    #[test]
    fn empty_workload_runs_only_probes() {
        let a = run(&Scenario::new(Mode::Atomic, 3, 1, 2, 0)).unwrap();
        assert_eq!(a.meta.probe_start, 0);
        assert_eq!(a.history.len(), 2 * 2 * 2);
    }

    #[test]
    fn crashed_client_leaves_a_pending_operation() {
        let mut s = explicit(Mode::Atomic, vec![vec![OpSpec::Append("x".into())], vec![OpSpec::Get]]);
        s.client_crashes = vec![ClientCrashSpec { client: 0, time: 0 }];
        s.max_think = 0;
        let a = run(&s).unwrap();
        a.history.validate().unwrap();
        // client 0 crashes before its invocation runs (crash wins the tie)
        assert!(a.history.events.iter().all(|e| e.client == 1));

        s.client_crashes = vec![ClientCrashSpec { client: 0, time: 1 }];
        let a = run(&s).unwrap();
        assert_eq!(a.summary().ops_pending, 1);
    }

    #[test]
    fn validated_mode_records_filtered_views() {
        let mut s = explicit(
            Mode::Atomic,
            vec![vec![
                OpSpec::Append("deposit:A:5".into()),
                OpSpec::Append("withdraw:A:7".into()),
                OpSpec::Get,
            ]],
        );
        s.predicate = Some(crate::ledger::ValidityPredicate::AccountBalance {
            initial: Default::default(),
        });
        let a = run(&s).unwrap();
        let first = &a.validated_gets[0];
        assert_eq!(first.op, "op0:3");
        assert_eq!(first.seq, vec![RecordId::new(0, 1)]);
        assert_eq!(a.validated_gets.len(), 3);
    }

    #[test]
    fn artifact_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Scenario::new(Mode::Eventual, 3, 1, 2, 5).with_seed(11);
        s.predicate = Some(crate::ledger::ValidityPredicate::UniqueTau);
        let a = run(&s).unwrap();
        a.write_dir(dir.path()).unwrap();
        let b = RunArtifact::read_dir(dir.path()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_scenario_is_rejected_before_running() {
        let s = Scenario::new(Mode::Atomic, 4, 2, 1, 1);
        assert!(matches!(run(&s), Err(SimError::Config(ConfigError::MajorityRequired { .. }))));
    }
}
