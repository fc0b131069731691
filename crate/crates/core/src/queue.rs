//! Judge queue: FIFO per user, round-robin across users, and at most one
//! submission per user in flight so each user's results complete in order.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use crate::model::{Sid, Uid};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ticket {
    pub uid: Uid,
    pub sid: Sid,
}

#[derive(Debug, Default)]
struct Inner {
    queues: HashMap<Uid, VecDeque<Sid>>,
    /// Users with queued work, in service order.
    rotation: VecDeque<Uid>,
    in_flight: HashSet<Uid>,
    queued: usize,
    closed: bool,
}

#[derive(Debug, Default)]
pub struct JudgeQueue {
    inner: Mutex<Inner>,
    changed: Condvar,
}

impl JudgeQueue {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Returns false once the queue is closed.
    pub fn push(&self, uid: &str, sid: &str) -> bool {
        let mut q = self.lock();
        if q.closed {
            return false;
        }
        let list = q.queues.entry(uid.to_owned()).or_default();
        list.push_back(sid.to_owned());
        if list.len() == 1 {
            q.rotation.push_back(uid.to_owned());
        }
        q.queued += 1;
        drop(q);
        self.changed.notify_all();
        true
    }

    fn take(q: &mut Inner) -> Option<Ticket> {
        let pos = q.rotation.iter().position(|u| !q.in_flight.contains(u))?;
        let uid = q.rotation.remove(pos).expect("position is valid");
        let list = q.queues.get_mut(&uid).expect("rotation tracks queues");
        let sid = list.pop_front().expect("rotation holds non-empty queues");
        if list.is_empty() {
            q.queues.remove(&uid);
        } else {
            q.rotation.push_back(uid.clone());
        }
        q.in_flight.insert(uid.clone());
        q.queued -= 1;
        Some(Ticket { uid, sid })
    }

    /// Blocks until a ticket is available. `None` once the queue is closed.
    pub fn pop(&self) -> Option<Ticket> {
        let mut q = self.lock();
        loop {
            if q.closed {
                return None;
            }
            if let Some(t) = Self::take(&mut q) {
                return Some(t);
            }
            q = self.changed.wait(q).unwrap_or_else(|e| e.into_inner());
        }
    }

    pub fn try_pop(&self) -> Option<Ticket> {
        let mut q = self.lock();
        if q.closed {
            return None;
        }
        Self::take(&mut q)
    }

    /// Marks the user's in-flight submission as finished.
    pub fn done(&self, ticket: &Ticket) {
        self.lock().in_flight.remove(&ticket.uid);
        self.changed.notify_all();
    }

    /// Stops handing out tickets. Queued work stays recorded in the store
    /// and is picked up again on restart.
    pub fn close(&self) {
        self.lock().closed = true;
        self.changed.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.lock().closed
    }

    pub fn queued(&self) -> usize {
        self.lock().queued
    }

    pub fn in_flight(&self) -> usize {
        self.lock().in_flight.len()
    }

    /// Waits until nothing is queued or in flight.
    pub fn wait_idle(&self, timeout: Duration) -> bool {
        self.wait_until(timeout, |q| q.queued == 0 && q.in_flight.is_empty())
    }

    /// Waits until nothing is in flight (queued work may remain).
    pub fn wait_no_in_flight(&self, timeout: Duration) -> bool {
        self.wait_until(timeout, |q| q.in_flight.is_empty())
    }

    fn wait_until(&self, timeout: Duration, done: impl Fn(&Inner) -> bool) -> bool {
        let deadline = Instant::now() + timeout;
        let mut q = self.lock();
        while !done(&q) {
            let now = Instant::now();
            if now >= deadline {
                return false;
            }
            q = self
                .changed
                .wait_timeout(q, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drain(q: &JudgeQueue) -> Vec<String> {
        let mut out = Vec::new();
        while let Some(t) = q.try_pop() {
            out.push(t.sid.clone());
            q.done(&t);
        }
        out
    }

    #[test]
    fn round_robin_across_users() {
        let q = JudgeQueue::new();
        for sid in ["a1", "a2", "a3"] {
            q.push("a", sid);
        }
        q.push("b", "b1");
        q.push("c", "c1");
        q.push("c", "c2");
        assert_eq!(drain(&q), ["a1", "b1", "c1", "a2", "c2", "a3"]);
        assert_eq!(q.queued(), 0);
    }

    #[test]
    fn one_in_flight_per_user() {
        let q = JudgeQueue::new();
        q.push("a", "a1");
        q.push("a", "a2");
        q.push("b", "b1");
        let t1 = q.try_pop().unwrap();
        let t2 = q.try_pop().unwrap();
        assert_eq!((t1.sid.as_str(), t2.sid.as_str()), ("a1", "b1"));
        assert!(q.try_pop().is_none(), "a2 must wait for a1");
        q.done(&t1);
        assert_eq!(q.try_pop().unwrap().sid, "a2");
    }

    #[test]
    fn close_wakes_waiters() {
        let q = std::sync::Arc::new(JudgeQueue::new());
        let q2 = q.clone();
        let h = std::thread::spawn(move || q2.pop());
        std::thread::sleep(Duration::from_millis(20));
        q.close();
        assert_eq!(h.join().unwrap(), None);
        assert!(!q.push("a", "x"));
    }

    #[test]
    fn idle_tracking() {
        let q = JudgeQueue::new();
        assert!(q.wait_idle(Duration::from_millis(1)));
        q.push("a", "a1");
        assert!(!q.wait_idle(Duration::from_millis(1)));
        let t = q.try_pop().unwrap();
        assert!(!q.wait_idle(Duration::from_millis(1)));
        q.done(&t);
        assert!(q.wait_idle(Duration::from_millis(1)));
    }
}
