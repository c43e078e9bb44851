//! Execution of one case: every participant runs its process as a set of
//! threads (one per open parallel branch); the thread whose next event is
//! earliest fires first. Receives block until a matching message is in the
//! channel `(receiver, message, sender)`.

use std::collections::{HashMap, VecDeque};

use rand::Rng;

use super::model::{Branch, CollabModel, Delay, Step};
use crate::event_model::{Event, Timestamp};

pub(crate) trait Oracle {
    fn choose(&mut self, branches: &[Branch]) -> usize;
    fn delay(&mut self, d: &Delay) -> i64;
}

pub(crate) struct RandomOracle<R>(pub R);

impl<R: Rng> Oracle for RandomOracle<R> {
    fn choose(&mut self, branches: &[Branch]) -> usize {
        let u: f64 = self.0.random();
        let mut acc = 0.0;
        for (i, b) in branches.iter().enumerate() {
            acc += b.probability;
            if u < acc {
                return i;
            }
        }
        // rounding: fall back to the last branch that can be taken
        branches.iter().rposition(|b| b.probability > 0.0).unwrap_or(0)
    }

    fn delay(&mut self, d: &Delay) -> i64 {
        d.sample(&mut self.0)
    }
}

/// Replays a fixed list of choices (0 beyond its end) with zero delays and
/// records every choice point as (choice, number of branches).
pub(crate) struct ScriptOracle {
    script: Vec<usize>,
    pub trail: Vec<(usize, usize)>,
}

impl ScriptOracle {
    pub fn new(script: Vec<usize>) -> Self {
        ScriptOracle {
            script,
            trail: Vec::new(),
        }
    }
}

impl Oracle for ScriptOracle {
    fn choose(&mut self, branches: &[Branch]) -> usize {
        let c = self.script.get(self.trail.len()).copied().unwrap_or(0);
        self.trail.push((c, branches.len()));
        c
    }

    fn delay(&mut self, _: &Delay) -> i64 {
        0
    }
}

struct Thread<'m> {
    participant: usize,
    frames: Vec<(&'m [Step], usize)>,
    clock: i64,
    parent: Option<usize>,
    /// Children of a parallel block still running.
    waiting: usize,
    done: bool,
    /// Sampled delay of the current head step.
    delay: Option<i64>,
}

impl<'m> Thread<'m> {
    fn new(participant: usize, steps: &'m [Step], clock: i64, parent: Option<usize>) -> Self {
        Thread {
            participant,
            frames: vec![(steps, 0)],
            clock,
            parent,
            waiting: 0,
            done: false,
            delay: None,
        }
    }

    fn head(&self) -> Option<&'m Step> {
        self.frames.last().and_then(|&(steps, i)| steps.get(i))
    }

    fn advance(&mut self) {
        if let Some(f) = self.frames.last_mut() {
            f.1 += 1;
        }
    }

    fn runnable(&self) -> bool {
        !self.done && self.waiting == 0
    }
}

/// Resolves control flow until every runnable thread sits on a task, send or receive.
fn settle<'m, O: Oracle>(threads: &mut Vec<Thread<'m>>, oracle: &mut O) {
    loop {
        let mut changed = false;
        let mut tid = 0;
        while tid < threads.len() {
            while threads[tid].runnable() {
                let th = &mut threads[tid];
                let Some(&(steps, idx)) = th.frames.last() else {
                    th.done = true;
                    changed = true;
                    if let Some(p) = th.parent {
                        let clock = th.clock;
                        let parent = &mut threads[p];
                        parent.clock = parent.clock.max(clock);
                        parent.waiting -= 1;
                        if parent.waiting == 0 {
                            parent.advance();
                        }
                    }
                    break;
                };
                if idx >= steps.len() {
                    th.frames.pop();
                    th.advance();
                    changed = true;
                    continue;
                }
                match &steps[idx] {
                    Step::Xor(branches) => {
                        let c = oracle.choose(branches);
                        th.frames.push((&branches[c].steps, 0));
                        changed = true;
                    }
                    Step::And(branches) => {
                        th.waiting = branches.len();
                        let (p, clock) = (th.participant, th.clock);
                        for b in branches {
                            threads.push(Thread::new(p, b, clock, Some(tid)));
                        }
                        changed = true;
                        break;
                    }
                    _ => break,
                }
            }
            tid += 1;
        }
        if !changed {
            return;
        }
    }
}

fn step_delay(step: &Step) -> &Delay {
    match step {
        Step::Task { delay, .. } | Step::Send { delay, .. } | Step::Receive { delay, .. } => delay,
        Step::Xor(_) | Step::And(_) => unreachable!("control steps are settled"),
    }
}

/// Runs one case and returns each participant's events in execution order,
/// or a description of the blocked receives on deadlock.
pub(crate) fn run_case<O: Oracle>(
    model: &CollabModel,
    case_id: &str,
    start: i64,
    oracle: &mut O,
) -> Result<Vec<Vec<Event>>, Vec<String>> {
    let ps = model.participants();
    let index: HashMap<&str, usize> = ps.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
    let mut threads: Vec<Thread<'_>> = ps
        .iter()
        .enumerate()
        .map(|(i, p)| Thread::new(i, &p.steps, start, None))
        .collect();
    let mut channels: HashMap<(usize, &str, usize), VecDeque<i64>> = HashMap::new();
    let mut out: Vec<Vec<Event>> = vec![Vec::new(); ps.len()];
    let mut last: Vec<Option<i64>> = vec![None; ps.len()];

    loop {
        settle(&mut threads, oracle);
        let mut best: Option<(i64, usize)> = None;
        for (tid, th) in threads.iter_mut().enumerate() {
            if !th.runnable() {
                continue;
            }
            let Some(step) = th.head() else { continue };
            let d = *th.delay.get_or_insert_with(|| oracle.delay(step_delay(step)));
            let ready = th.clock + d;
            let t = match step {
                Step::Receive { message, from, .. } => {
                    let key = (th.participant, message.as_str(), index[from.as_str()]);
                    match channels.get(&key).and_then(|q| q.front()) {
                        Some(&arrival) => ready.max(arrival),
                        None => continue,
                    }
                }
                _ => ready,
            };
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, tid));
            }
        }
        let Some((t, tid)) = best else {
            if threads.iter().all(|t| t.done) {
                return Ok(out);
            }
            let blocked = threads
                .iter()
                .filter(|t| t.runnable())
                .filter_map(|t| match t.head() {
                    Some(Step::Receive { message, from, .. }) => {
                        Some(format!("{} waits for {message:?} from {from}", ps[t.participant].name))
                    }
                    _ => None,
                })
                .collect();
            return Err(blocked);
        };

        let th = &mut threads[tid];
        let p = th.participant;
        // a participant's events are strictly increasing in time
        let t = match last[p] {
            Some(l) if t <= l => l + 1,
            _ => t,
        };
        let name = &ps[p].name;
        let ts = Timestamp::from_millis(t);
        let event = match th.head().expect("selected thread has a head") {
            Step::Task { activity, .. } => Event::user(case_id, activity, ts, name),
            Step::Send {
                message,
                to,
                activity,
                latency,
                ..
            } => {
                let arrival = t + oracle.delay(latency);
                channels
                    .entry((index[to.as_str()], message.as_str(), p))
                    .or_default()
                    .push_back(arrival);
                Event::send(case_id, activity, ts, name, to)
            }
            Step::Receive {
                message,
                from,
                activity,
                ..
            } => {
                channels
                    .get_mut(&(p, message.as_str(), index[from.as_str()]))
                    .and_then(VecDeque::pop_front);
                Event::receive(case_id, activity, ts, name, from)
            }
            Step::Xor(_) | Step::And(_) => unreachable!("control steps are settled"),
        };
        out[p].push(event);
        last[p] = Some(t);
        th.clock = t;
        th.delay = None;
        th.advance();
    }
}
