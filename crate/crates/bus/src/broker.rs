use std::collections::{HashMap, VecDeque};
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex, RwLock, Weak};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::json;

use crate::{BusError, Document, Envelope, SimTime, TopicName};

/// Per-subscriber queue bound.
pub const DEFAULT_QUEUE_CAPACITY: usize = 1024;

type Handler = dyn Fn(&Document) -> Result<Document, Document> + Send + Sync;

/// In-process topic and service router. Cloning yields another handle to
/// the same broker.
#[derive(Clone)]
pub struct Broker {
    inner: Arc<Inner>,
}

struct Inner {
    topics: RwLock<HashMap<TopicName, Arc<Mutex<TopicState>>>>,
    services: Mutex<HashMap<TopicName, ServiceEntry>>,
    queue_capacity: usize,
    next_token: AtomicU64,
}

#[derive(Default)]
struct TopicState {
    next_seq: u64,
    subscribers: Vec<Weak<SubscriberQueue>>,
}

struct SubscriberQueue {
    state: Mutex<QueueState>,
    ready: Condvar,
    capacity: usize,
}

#[derive(Default)]
struct QueueState {
    buf: VecDeque<Envelope>,
    dropped: u64,
}

struct ServiceEntry {
    token: u64,
    jobs: mpsc::Sender<Job>,
}

struct Job {
    request: Document,
    deadline: Instant,
    reply: mpsc::SyncSender<Result<Document, Document>>,
}

impl Default for Broker {
    fn default() -> Self {
        Broker::new()
    }
}

impl Broker {
    pub fn new() -> Self {
        Broker::with_queue_capacity(DEFAULT_QUEUE_CAPACITY)
    }

    pub fn with_queue_capacity(capacity: usize) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        Broker {
            inner: Arc::new(Inner {
                topics: RwLock::new(HashMap::new()),
                services: Mutex::new(HashMap::new()),
                queue_capacity: capacity,
                next_token: AtomicU64::new(0),
            }),
        }
    }

    fn topic_state(&self, topic: &TopicName) -> Arc<Mutex<TopicState>> {
        if let Some(state) = self.inner.topics.read().unwrap().get(topic) {
            return state.clone();
        }
        self.inner
            .topics
            .write()
            .unwrap()
            .entry(topic.clone())
            .or_default()
            .clone()
    }

    /// Assigns the next sequence number on `topic` and hands the envelope to
    /// every live subscriber. Publishing with no subscribers is not an error.
    pub fn publish(&self, topic: &TopicName, payload: Document, sim_time: SimTime) -> u64 {
        let state = self.topic_state(topic);
        // Held across delivery so concurrent producers cannot reorder seqs.
        let mut state = state.lock().unwrap();
        let seq = state.next_seq;
        state.next_seq += 1;
        let env = Envelope {
            topic: topic.clone(),
            seq,
            sim_time,
            payload,
        };
        state.subscribers.retain(|weak| match weak.upgrade() {
            Some(queue) => {
                queue.push(env.clone());
                true
            }
            None => false,
        });
        seq
    }

    /// [`publish`](Self::publish) with a string topic.
    pub fn publish_to(&self, topic: &str, payload: Document, sim_time: SimTime) -> Result<u64, BusError> {
        let topic = TopicName::new(topic)?;
        Ok(self.publish(&topic, payload, sim_time))
    }

    /// Receives every envelope published on `topic` after this call.
    pub fn subscribe(&self, topic: &TopicName) -> Subscription {
        let queue = Arc::new(SubscriberQueue {
            state: Mutex::new(QueueState::default()),
            ready: Condvar::new(),
            capacity: self.inner.queue_capacity,
        });
        self.topic_state(topic)
            .lock()
            .unwrap()
            .subscribers
            .push(Arc::downgrade(&queue));
        Subscription {
            topic: topic.clone(),
            queue,
        }
    }

    pub fn subscribe_to(&self, topic: &str) -> Result<Subscription, BusError> {
        Ok(self.subscribe(&TopicName::new(topic)?))
    }

    /// Number of messages published so far on `topic`.
    pub fn published_count(&self, topic: &TopicName) -> u64 {
        self.inner
            .topics
            .read()
            .unwrap()
            .get(topic)
            .map_or(0, |s| s.lock().unwrap().next_seq)
    }

    /// Registers `handler` for `service`. Calls are served one at a time on a
    /// dedicated worker thread until the returned handle is dropped.
    pub fn advertise<F>(&self, service: &TopicName, handler: F) -> Result<ServiceHandle, BusError>
    where
        F: Fn(&Document) -> Result<Document, Document> + Send + Sync + 'static,
    {
        let mut services = self.inner.services.lock().unwrap();
        if services.contains_key(service) {
            return Err(BusError::DuplicateService(service.to_string()));
        }
        let token = self.inner.next_token.fetch_add(1, Ordering::Relaxed);
        let (tx, rx) = mpsc::channel::<Job>();
        let handler: Arc<Handler> = Arc::new(handler);
        let name = service.to_string();
        thread::Builder::new()
            .name(format!("svc{name}"))
            .spawn(move || {
                for job in rx {
                    if Instant::now() > job.deadline {
                        // Caller already gave up; skipping keeps the call at-most-once.
                        continue;
                    }
                    let outcome = panic::catch_unwind(AssertUnwindSafe(|| handler(&job.request)))
                        .unwrap_or_else(|_| Err(json!({"error": "handler panicked", "service": name})));
                    let _ = job.reply.send(outcome);
                }
            })
            .map_err(BusError::Io)?;
        services.insert(service.clone(), ServiceEntry { token, jobs: tx });
        Ok(ServiceHandle {
            broker: Arc::downgrade(&self.inner),
            service: service.clone(),
            token,
        })
    }

    pub fn advertise_at<F>(&self, service: &str, handler: F) -> Result<ServiceHandle, BusError>
    where
        F: Fn(&Document) -> Result<Document, Document> + Send + Sync + 'static,
    {
        self.advertise(&TopicName::new(service)?, handler)
    }

    pub fn has_service(&self, service: &TopicName) -> bool {
        self.inner.services.lock().unwrap().contains_key(service)
    }

    /// Invokes `service` at most once and waits up to `timeout` for its reply.
    pub fn call(&self, service: &TopicName, request: Document, timeout: Duration) -> Result<Document, BusError> {
        let jobs = {
            let services = self.inner.services.lock().unwrap();
            match services.get(service) {
                Some(entry) => entry.jobs.clone(),
                None => return Err(BusError::NoSuchService(service.to_string())),
            }
        };
        let (reply_tx, reply_rx) = mpsc::sync_channel(1);
        let job = Job {
            request,
            deadline: Instant::now() + timeout,
            reply: reply_tx,
        };
        if jobs.send(job).is_err() {
            return Err(BusError::NoSuchService(service.to_string()));
        }
        match reply_rx.recv_timeout(timeout) {
            Ok(Ok(doc)) => Ok(doc),
            Ok(Err(doc)) => Err(BusError::HandlerError(doc)),
            Err(mpsc::RecvTimeoutError::Timeout) => Err(BusError::Timeout(service.to_string())),
            // Worker skipped the job (deadline passed while queued) or went away.
            Err(mpsc::RecvTimeoutError::Disconnected) => Err(BusError::Timeout(service.to_string())),
        }
    }

    pub fn call_at(&self, service: &str, request: Document, timeout: Duration) -> Result<Document, BusError> {
        self.call(&TopicName::new(service)?, request, timeout)
    }
}

impl SubscriberQueue {
    fn push(&self, env: Envelope) {
        let mut state = self.state.lock().unwrap();
        if state.buf.len() >= self.capacity {
            state.buf.pop_front();
            state.dropped += 1;
        }
        state.buf.push_back(env);
        drop(state);
        self.ready.notify_one();
    }
}

/// Receiving end of a topic subscription. Dropping it unsubscribes.
pub struct Subscription {
    topic: TopicName,
    queue: Arc<SubscriberQueue>,
}

impl Subscription {
    pub fn topic(&self) -> &TopicName {
        &self.topic
    }

    pub fn try_recv(&self) -> Option<Envelope> {
        self.queue.state.lock().unwrap().buf.pop_front()
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Option<Envelope> {
        let deadline = Instant::now() + timeout;
        let mut state = self.queue.state.lock().unwrap();
        loop {
            if let Some(env) = state.buf.pop_front() {
                return Some(env);
            }
            let now = Instant::now();
            if now >= deadline {
                return None;
            }
            state = self.queue.ready.wait_timeout(state, deadline - now).unwrap().0;
        }
    }

    /// Takes everything currently queued.
    pub fn drain(&self) -> Vec<Envelope> {
        self.queue.state.lock().unwrap().buf.drain(..).collect()
    }

    pub fn pending(&self) -> usize {
        self.queue.state.lock().unwrap().buf.len()
    }

    /// Envelopes discarded because the queue was full.
    pub fn dropped(&self) -> u64 {
        self.queue.state.lock().unwrap().dropped
    }
}

/// Keeps a service registered; dropping it removes the registration.
pub struct ServiceHandle {
    broker: Weak<Inner>,
    service: TopicName,
    token: u64,
}

impl ServiceHandle {
    pub fn service(&self) -> &TopicName {
        &self.service
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        if let Some(inner) = self.broker.upgrade() {
            let mut services = inner.services.lock().unwrap();
            if services.get(&self.service).is_some_and(|e| e.token == self.token) {
                services.remove(&self.service);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topic(s: &str) -> TopicName {
        TopicName::new(s).unwrap()
    }

    #[test]
    fn first_publish_gets_seq_zero_then_one() {
        let broker = Broker::new();
        let t = topic("/rvr/cmd_vel");
        assert_eq!(broker.publish(&t, json!({"left": 0.1, "right": 0.1}), SimTime::ZERO), 0);
        assert_eq!(broker.publish(&t, json!({}), SimTime::ZERO), 1);
        assert_eq!(broker.published_count(&t), 2);
    }

    #[test]
    fn seqs_are_per_topic() {
        let broker = Broker::new();
        assert_eq!(broker.publish(&topic("/a"), json!(1), SimTime::ZERO), 0);
        assert_eq!(broker.publish(&topic("/b"), json!(1), SimTime::ZERO), 0);
        assert_eq!(broker.publish(&topic("/a"), json!(1), SimTime::ZERO), 1);
    }

    #[test]
    fn publish_without_subscribers_is_fire_and_forget() {
        let broker = Broker::new();
        assert_eq!(broker.publish(&topic("/nobody"), json!(null), SimTime::ZERO), 0);
    }

    #[test]
    fn string_topic_is_validated() {
        let broker = Broker::new();
        assert!(matches!(broker.publish_to("bad", json!(1), SimTime::ZERO), Err(BusError::InvalidTopic(_))));
        assert!(matches!(broker.subscribe_to("/Bad"), Err(BusError::InvalidTopic(_))));
    }

    #[test]
    fn subscriber_sees_consecutive_seqs_after_subscribing() {
        let broker = Broker::new();
        let t = topic("/rvr/odom");
        for _ in 0..5 {
            broker.publish(&t, json!(0), SimTime::ZERO);
        }
        let sub = broker.subscribe(&t);
        for i in 0..3 {
            broker.publish(&t, json!(i), SimTime::ZERO);
        }
        let seqs: Vec<u64> = sub.drain().iter().map(|e| e.seq).collect();
        assert_eq!(seqs, vec![5, 6, 7]);
    }

    #[test]
    fn fan_out_is_identical() {
        let broker = Broker::new();
        let t = topic("/rvr/imu");
        let a = broker.subscribe(&t);
        let b = broker.subscribe(&t);
        for i in 0..10 {
            broker.publish(&t, json!({"i": i}), SimTime::from_micros(i));
        }
        assert_eq!(a.drain(), b.drain());
    }

    #[test]
    fn overflow_drops_oldest_and_counts() {
        let broker = Broker::with_queue_capacity(4);
        let t = topic("/camera/frame");
        let sub = broker.subscribe(&t);
        for i in 0..10 {
            broker.publish(&t, json!(i), SimTime::ZERO);
        }
        assert_eq!(sub.dropped(), 6);
        let seqs: Vec<u64> = sub.drain().iter().map(|e| e.seq).collect();
        assert_eq!(seqs, vec![6, 7, 8, 9]);
    }

    #[test]
    fn dropped_subscription_is_pruned() {
        let broker = Broker::new();
        let t = topic("/x");
        let sub = broker.subscribe(&t);
        drop(sub);
        broker.publish(&t, json!(1), SimTime::ZERO);
        let state = broker.topic_state(&t);
        assert!(state.lock().unwrap().subscribers.is_empty());
    }

    #[test]
    fn recv_timeout_wakes_on_publish() {
        let broker = Broker::new();
        let t = topic("/x");
        let sub = broker.subscribe(&t);
        let b2 = broker.clone();
        let t2 = t.clone();
        let h = thread::spawn(move || {
            thread::sleep(Duration::from_millis(20));
            b2.publish(&t2, json!("hi"), SimTime::ZERO);
        });
        let env = sub.recv_timeout(Duration::from_secs(5)).expect("delivery");
        assert_eq!(env.payload, json!("hi"));
        h.join().unwrap();
        assert!(sub.recv_timeout(Duration::from_millis(5)).is_none());
    }

    #[test]
    fn call_routes_to_handler_once() {
        let broker = Broker::new();
        let count = Arc::new(AtomicU64::new(0));
        let c = count.clone();
        let _h = broker
            .advertise_at("/arm/home", move |_req| {
                c.fetch_add(1, Ordering::SeqCst);
                Ok(json!({"ok": true}))
            })
            .unwrap();
        let resp = broker.call_at("/arm/home", json!({}), Duration::from_secs(1)).unwrap();
        assert_eq!(resp, json!({"ok": true}));
        assert_eq!(count.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn unregistered_service() {
        let broker = Broker::new();
        assert!(matches!(
            broker.call_at("/arm/home", json!({}), Duration::from_secs(1)),
            Err(BusError::NoSuchService(_))
        ));
    }

    #[test]
    fn duplicate_advertise_rejected() {
        let broker = Broker::new();
        let _h = broker.advertise_at("/s", |_| Ok(json!(1))).unwrap();
        assert!(matches!(broker.advertise_at("/s", |_| Ok(json!(2))), Err(BusError::DuplicateService(_))));
    }

    #[test]
    fn dropping_handle_deregisters() {
        let broker = Broker::new();
        let h = broker.advertise_at("/s", |_| Ok(json!(1))).unwrap();
        assert!(broker.has_service(h.service()));
        drop(h);
        assert!(matches!(
            broker.call_at("/s", json!({}), Duration::from_secs(1)),
            Err(BusError::NoSuchService(_))
        ));
        // The name is free again.
        let _h2 = broker.advertise_at("/s", |_| Ok(json!(2))).unwrap();
    }

    #[test]
    fn slow_handler_times_out() {
        let broker = Broker::new();
        let _h = broker
            .advertise_at("/slow", |_| {
                thread::sleep(Duration::from_millis(200));
                Ok(json!(1))
            })
            .unwrap();
        assert!(matches!(
            broker.call_at("/slow", json!({}), Duration::from_millis(20)),
            Err(BusError::Timeout(_))
        ));
    }

    #[test]
    fn handler_error_is_propagated_verbatim() {
        let broker = Broker::new();
        let _h = broker
            .advertise_at("/fails", |req| Err(json!({"reason": "nope", "echo": req.clone()})))
            .unwrap();
        match broker.call_at("/fails", json!([1, 2]), Duration::from_secs(1)) {
            Err(BusError::HandlerError(doc)) => assert_eq!(doc, json!({"reason": "nope", "echo": [1, 2]})),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn panicking_handler_becomes_handler_error() {
        let broker = Broker::new();
        let _h = broker.advertise_at("/boom", |_| panic!("boom")).unwrap();
        assert!(matches!(
            broker.call_at("/boom", json!({}), Duration::from_secs(1)),
            Err(BusError::HandlerError(_))
        ));
        // Worker survives the panic.
        assert!(matches!(
            broker.call_at("/boom", json!({}), Duration::from_secs(1)),
            Err(BusError::HandlerError(_))
        ));
    }

    #[test]
    fn calls_to_one_service_are_serialized() {
        let broker = Broker::new();
        let active = Arc::new(AtomicU64::new(0));
        let max_seen = Arc::new(AtomicU64::new(0));
        let (a, m) = (active.clone(), max_seen.clone());
        let _h = broker
            .advertise_at("/serial", move |_| {
                let now = a.fetch_add(1, Ordering::SeqCst) + 1;
                m.fetch_max(now, Ordering::SeqCst);
                thread::sleep(Duration::from_millis(2));
                a.fetch_sub(1, Ordering::SeqCst);
                Ok(json!(null))
            })
            .unwrap();
        let threads: Vec<_> = (0..8)
            .map(|_| {
                let b = broker.clone();
                thread::spawn(move || b.call_at("/serial", json!({}), Duration::from_secs(5)).unwrap())
            })
            .collect();
        for t in threads {
            t.join().unwrap();
        }
        assert_eq!(max_seen.load(Ordering::SeqCst), 1);
    }
}
