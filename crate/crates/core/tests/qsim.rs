use std::collections::{HashMap, HashSet, VecDeque};

use redsched::qsim::{run_replication, simulate, Event, EventKind, LoadConvention, SimConfig};
use redsched::{Error, PolicyKind};

fn mm1(load: f64, jobs: u64, reps: usize) -> SimConfig {
    SimConfig::new(PolicyKind::Random, 1, 1, 1.0, 0.0, load)
        .with_jobs(jobs)
        .with_replications(reps)
        .with_seed(7)
}

#[test]
fn mm1_mean_wait_matches_theory() {
    let load = 0.5;
    let res = simulate(&mm1(load, 200_000, 10)).unwrap();
    let theory = load / (1.0 - load);
    assert!(
        (res.mean_wait - theory).abs() <= 3.0 * res.stderr,
        "mean {} se {} theory {theory}",
        res.mean_wait,
        res.stderr
    );
    assert!(res.ci95_lo <= res.mean_wait && res.mean_wait <= res.ci95_hi);
    let rel = (res.realized_arrival_rate - res.lambda_total).abs() / res.lambda_total;
    assert!(rel < 0.01, "realized rate {}", res.realized_arrival_rate);
}

#[test]
fn light_load_barely_waits() {
    for policy in PolicyKind::ALL {
        let cfg = SimConfig::new(policy, 13, 4, 10.0, 0.1, 0.01)
            .with_jobs(20_000)
            .with_replications(2);
        let res = simulate(&cfg).unwrap();
        assert!(
            res.mean_wait >= 0.0 && res.mean_wait < 1e-3,
            "{policy}: {}",
            res.mean_wait
        );
    }
}

#[test]
fn identical_config_is_bit_identical() {
    let cfg = SimConfig::new(PolicyKind::Bibd, 13, 4, 10.0, 0.1, 0.7)
        .with_jobs(20_000)
        .with_replications(4);
    let a = simulate(&cfg).unwrap();
    let b = simulate(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rep_means.len(), 4);
    let c = simulate(&cfg.clone().with_seed(2)).unwrap();
    assert_ne!(a.mean_wait, c.mean_wait);
}

#[test]
fn both_conventions_are_reported() {
    let cfg = SimConfig::new(PolicyKind::Random, 13, 4, 10.0, 0.1, 0.5)
        .with_jobs(1_000)
        .with_replications(2)
        .with_convention(LoadConvention::PaperRho);
    let res = simulate(&cfg).unwrap();
    assert!((res.lambda_total - 0.455 * 13.0).abs() < 1e-12);
    assert!((res.rates.utilization_total - 0.5 * 13.0 / 1.9).abs() < 1e-12);
    assert_eq!(res.row().load_convention, LoadConvention::PaperRho);
}

#[test]
fn runaway_queue_aborts() {
    let mut cfg = SimConfig::new(PolicyKind::Random, 4, 2, 10.0, 0.5, 0.99)
        .with_jobs(200_000)
        .with_replications(1);
    cfg.max_in_system = 50;
    match simulate(&cfg) {
        Err(Error::Instability { in_system, .. }) => assert!(in_system > 50),
        other => panic!("expected instability, got {other:?}"),
    }
}

/// Replays an event log and checks the scheduling rules against it.
fn check_log(cfg: &SimConfig, log: &[Event]) {
    let n = cfg.n;
    let mut arrival: HashMap<u64, f64> = HashMap::new();
    let mut start: HashMap<u64, (f64, usize)> = HashMap::new();
    let mut queues: Vec<VecDeque<u64>> = vec![VecDeque::new(); n];
    let mut running: Vec<Option<(u64, f64)>> = vec![None; n];
    let mut enqueued: HashMap<u64, HashSet<usize>> = HashMap::new();
    let mut busy_time = 0.0;
    let mut served = 0.0;
    let mut last = 0.0;

    for e in log {
        assert!(e.time >= last, "events out of order");
        last = e.time;
        match e.kind {
            EventKind::Arrival => {
                assert!(arrival.insert(e.job, e.time).is_none());
            }
            EventKind::Enqueue => {
                let s = e.server.unwrap();
                assert!(
                    running[s].is_some(),
                    "job {} queued at idle server {s}",
                    e.job
                );
                assert!(!queues[s].contains(&e.job), "duplicate queue slot");
                queues[s].push_back(e.job);
                enqueued.entry(e.job).or_default().insert(s);
            }
            EventKind::Start => {
                let s = e.server.unwrap();
                assert!(running[s].is_none(), "server {s} double-booked");
                assert!(
                    start.insert(e.job, (e.time, s)).is_none(),
                    "job {} started twice",
                    e.job
                );
                assert!(e.time >= arrival[&e.job]);
                if enqueued.contains_key(&e.job) {
                    assert_eq!(
                        queues[s].front(),
                        Some(&e.job),
                        "FCFS violated at server {s}"
                    );
                    queues[s].pop_front();
                }
                running[s] = Some((e.job, e.time));
            }
            EventKind::Cancel => {
                let s = e.server.unwrap();
                let pos = queues[s]
                    .iter()
                    .position(|&j| j == e.job)
                    .expect("cancel of absent copy");
                queues[s].remove(pos);
            }
            EventKind::Complete => {
                let s = e.server.unwrap();
                let (job, began) = running[s].take().expect("completion at idle server");
                assert_eq!(job, e.job);
                busy_time += e.time - began;
            }
        }
        if e.kind == EventKind::Start || e.kind == EventKind::Cancel {
            // A started job holds no queue slot anywhere once its cancels are applied.
            if let Some(&(t, _)) = start.get(&e.job) {
                let pending = queues.iter().filter(|q| q.contains(&e.job)).count();
                let cancels_left = log
                    .iter()
                    .filter(|x| x.job == e.job && x.kind == EventKind::Cancel && x.time == t)
                    .count();
                assert!(pending <= cancels_left);
            }
        }
    }
    for (job, &(_, s)) in &start {
        if let Some(servers) = enqueued.get(job) {
            assert!(servers.contains(&s));
        }
        assert!(
            queues.iter().all(|q| !q.contains(job)),
            "started job {job} still queued"
        );
    }
    for e in log.iter().filter(|e| e.kind == EventKind::Complete) {
        let (t, _) = start[&e.job];
        served += e.time - t;
    }
    assert!((busy_time - served).abs() < 1e-9 * served.max(1.0));
    for e in log.iter().filter(|e| e.kind == EventKind::Start) {
        // Idle-server shortcut: a job that did not queue found an idle server.
        if !enqueued.contains_key(&e.job) {
            assert_eq!(e.time, arrival[&e.job]);
        }
    }
}

#[test]
fn event_log_obeys_scheduling_rules() {
    for policy in PolicyKind::ALL {
        let cfg = SimConfig::new(policy, 7, 3, 10.0, 0.2, 0.85).with_jobs(3_000);
        let mut log = Vec::new();
        let out = run_replication(&cfg, 0, 11, Some(&mut log)).unwrap();
        assert_eq!(out.measured, 3_000);
        assert!(
            log.iter().any(|e| e.kind == EventKind::Cancel),
            "{policy}: no contention"
        );
        check_log(&cfg, &log);
        let line = log[0].to_string();
        assert_eq!(line.split(',').count(), 4);
        assert!(line.ends_with(','));
    }
}

#[test]
fn logging_does_not_change_results() {
    let cfg = SimConfig::new(PolicyKind::RoundRobin, 13, 4, 10.0, 0.1, 0.8).with_jobs(5_000);
    let mut log = Vec::new();
    let with = run_replication(&cfg, 0, 3, Some(&mut log)).unwrap();
    let without = run_replication(&cfg, 0, 3, None).unwrap();
    assert_eq!(with, without);
}
