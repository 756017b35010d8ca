use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use super::{sample_service, PolicyAssigner, SimConfig};
use crate::error::{Error, Result};
use crate::seeding::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrival,
    /// A copy joined a server queue.
    Enqueue,
    Start,
    /// A queued copy was withdrawn because a sibling started.
    Cancel,
    Complete,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::Enqueue => "enqueue",
            EventKind::Start => "start",
            EventKind::Cancel => "cancel",
            EventKind::Complete => "complete",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub job: u64,
    pub server: Option<usize>,
}

/// `t,kind,job,server` with an empty server field for arrivals.
impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},", self.time, self.kind.as_str(), self.job)?;
        match self.server {
            Some(s) => write!(f, "{s}"),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationOutcome {
    pub mean_wait: f64,
    pub measured: u64,
    /// Arrivals generated, warmup and overrun included.
    pub arrivals: u64,
    pub last_arrival: f64,
    pub peak_in_system: usize,
}

#[derive(Debug, Clone, Copy)]
struct Departure {
    time: f64,
    server: usize,
}

impl PartialEq for Departure {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Departure {}

impl PartialOrd for Departure {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so that `BinaryHeap` pops the earliest, then lowest server.
impl Ord for Departure {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.server.cmp(&self.server))
    }
}

struct State<'a> {
    arrival: Vec<f64>,
    service: Vec<f64>,
    started: Vec<bool>,
    blocks: Vec<Vec<usize>>,
    queues: Vec<VecDeque<u32>>,
    running_job: Vec<Option<u32>>,
    departures: BinaryHeap<Departure>,
    waiting: usize,
    running: usize,
    measured_from: u64,
    measured_to: u64,
    remaining: u64,
    wait_sum: f64,
    log: Option<&'a mut Vec<Event>>,
}

impl State<'_> {
    fn emit(&mut self, time: f64, kind: EventKind, job: u32, server: Option<usize>) {
        if let Some(log) = self.log.as_deref_mut() {
            log.push(Event {
                time,
                kind,
                job: job as u64,
                server,
            });
        }
    }

    fn start(&mut self, job: u32, server: usize, now: f64, queued: bool) {
        let j = job as usize;
        self.started[j] = true;
        self.running_job[server] = Some(job);
        self.running += 1;
        if queued {
            self.waiting -= 1;
        }
        if (self.measured_from..self.measured_to).contains(&(job as u64)) {
            self.wait_sum += now - self.arrival[j];
            self.remaining -= 1;
        }
        self.departures.push(Departure {
            time: now + self.service[j],
            server,
        });
        self.emit(now, EventKind::Start, job, Some(server));
        if queued && self.log.is_some() {
            let others: Vec<usize> = self.blocks[j]
                .iter()
                .copied()
                .filter(|&s| s != server)
                .collect();
            for s in others {
                self.emit(now, EventKind::Cancel, job, Some(s));
            }
        }
    }
}

/// One replication on `seed`. Arrivals, service times and policy draws use
/// separate random streams, so the same seed gives every policy the same
/// arrival and service sequences.
///
/// Arrivals keep coming until every measured job has started. With `log`
/// set, every event is appended in processing order.
pub fn run_replication(
    cfg: &SimConfig,
    replication: usize,
    seed: u64,
    log: Option<&mut Vec<Event>>,
) -> Result<ReplicationOutcome> {
    let n = cfg.n;
    let rate = cfg.total_arrival_rate();
    let mut arrival_rng = rng_for(seed, 0);
    let mut service_rng = rng_for(seed, 1);
    let mut policy_rng = rng_for(seed, 2);
    let mut assigner = PolicyAssigner::new(cfg.policy, n, cfg.d, cfg.block_selection)?;

    let capacity = (cfg.warmup + cfg.jobs) as usize + 1024;
    let logging = log.is_some();
    let mut st = State {
        arrival: Vec::with_capacity(capacity),
        service: Vec::with_capacity(capacity),
        started: Vec::with_capacity(capacity),
        blocks: Vec::new(),
        queues: vec![VecDeque::new(); n],
        running_job: vec![None; n],
        departures: BinaryHeap::with_capacity(n),
        waiting: 0,
        running: 0,
        measured_from: cfg.warmup,
        measured_to: cfg.warmup + cfg.jobs,
        remaining: cfg.jobs,
        wait_sum: 0.0,
        log,
    };

    let mut next_arrival = arrival_rng.sample::<f64, _>(Exp1) / rate;
    let mut next_id: u64 = 0;
    let mut last_arrival = 0.0;
    let mut peak = 0usize;

    while st.remaining > 0 {
        let departure_first = st.departures.peek().is_some_and(|d| d.time <= next_arrival);
        if departure_first {
            let Departure { time, server } = st.departures.pop().expect("peeked");
            let done = st.running_job[server].take().expect("busy server");
            st.running -= 1;
            st.emit(time, EventKind::Complete, done, Some(server));
            while let Some(job) = st.queues[server].pop_front() {
                if !st.started[job as usize] {
                    st.start(job, server, time, true);
                    break;
                }
            }
            continue;
        }

        if next_id >= u32::MAX as u64 {
            return Err(Error::Instability {
                replication,
                in_system: st.waiting + st.running,
                time: next_arrival,
            });
        }
        let now = next_arrival;
        let job = next_id as u32;
        st.arrival.push(now);
        st.service
            .push(sample_service(cfg.p, cfg.q, &mut service_rng));
        st.started.push(false);
        st.emit(now, EventKind::Arrival, job, None);

        let members = assigner.members(next_id, &mut policy_rng);
        if logging {
            st.blocks.push(members.to_vec());
        }
        let idle = members
            .iter()
            .copied()
            .filter(|&s| st.running_job[s].is_none())
            .min();
        match idle {
            Some(server) => st.start(job, server, now, false),
            None => {
                st.waiting += 1;
                for &s in members {
                    st.queues[s].push_back(job);
                }
                if logging {
                    let servers = members.to_vec();
                    for s in servers {
                        st.emit(now, EventKind::Enqueue, job, Some(s));
                    }
                }
            }
        }

        let in_system = st.waiting + st.running;
        peak = peak.max(in_system);
        if in_system > cfg.max_in_system {
            return Err(Error::Instability {
                replication,
                in_system,
                time: now,
            });
        }
        last_arrival = now;
        next_id += 1;
        next_arrival = now + arrival_rng.sample::<f64, _>(Exp1) / rate;
    }

    Ok(ReplicationOutcome {
        mean_wait: st.wait_sum / cfg.jobs as f64,
        measured: cfg.jobs,
        arrivals: next_id,
        last_arrival,
        peak_in_system: peak,
    })
}
