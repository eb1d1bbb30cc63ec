//! Blocking TCP client for [`BusServer`](crate::server::BusServer).

use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::json;

use crate::catalog::BUS_PING;
use crate::wire::{self, Frame};
use crate::{BusError, Document, Envelope, ServiceCall, SimTime, TopicName};

type Pending = Arc<Mutex<HashMap<u64, Sender<Result<Document, BusError>>>>>;
type Routes = Arc<Mutex<HashMap<TopicName, Vec<Sender<Envelope>>>>>;

pub struct BusClient {
    writer: Mutex<BufWriter<TcpStream>>,
    next_call: AtomicU64,
    pending: Pending,
    routes: Routes,
}

impl BusClient {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<BusClient, BusError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let read_half = stream.try_clone()?;
        let pending: Pending = Arc::default();
        let routes: Routes = Arc::default();
        {
            let (pending, routes) = (pending.clone(), routes.clone());
            thread::Builder::new().name("bus-client".into()).spawn(move || {
                let mut reader = BufReader::new(read_half);
                while let Ok(Some(frame)) = wire::read_frame(&mut reader) {
                    dispatch(frame, &pending, &routes);
                }
                // Fail any calls still waiting.
                for (_, tx) in pending.lock().unwrap().drain() {
                    let _ = tx.send(Err(BusError::Disconnected));
                }
            })?;
        }
        Ok(BusClient {
            writer: Mutex::new(BufWriter::new(stream)),
            next_call: AtomicU64::new(1),
            pending,
            routes,
        })
    }

    fn send(&self, frame: &Frame) -> Result<(), BusError> {
        let mut w = self.writer.lock().unwrap();
        wire::write_frame(&mut *w, frame)?;
        w.flush()?;
        Ok(())
    }

    /// Subscribes and waits until the server has registered the subscription.
    pub fn subscribe(&self, topic: &str) -> Result<Receiver<Envelope>, BusError> {
        let topic = TopicName::new(topic)?;
        let (tx, rx) = mpsc::channel();
        let first = {
            let mut routes = self.routes.lock().unwrap();
            let senders = routes.entry(topic.clone()).or_default();
            senders.push(tx);
            senders.len() == 1
        };
        if first {
            self.send(&Frame::Sub { topic })?;
        }
        self.ping(Duration::from_secs(5))?;
        Ok(rx)
    }

    pub fn publish(&self, topic: &str, payload: Document, sim_time: SimTime) -> Result<(), BusError> {
        let topic = TopicName::new(topic)?;
        self.send(&Frame::Pub(Envelope {
            topic,
            seq: 0,
            sim_time,
            payload,
        }))
    }

    pub fn call(&self, service: &str, request: Document, timeout: Duration) -> Result<Document, BusError> {
        let service = TopicName::new(service)?;
        let call_id = self.next_call.fetch_add(1, Ordering::Relaxed);
        let (tx, rx) = mpsc::channel();
        self.pending.lock().unwrap().insert(call_id, tx);
        let sent = self.send(&Frame::Call(ServiceCall {
            service: service.clone(),
            call_id,
            request,
            deadline: Some(timeout.as_secs_f64()),
        }));
        if let Err(e) = sent {
            self.pending.lock().unwrap().remove(&call_id);
            return Err(e);
        }
        // Small grace period over the server-side budget for the reply to travel.
        match rx.recv_timeout(timeout + Duration::from_millis(500)) {
            Ok(result) => result,
            Err(_) => {
                self.pending.lock().unwrap().remove(&call_id);
                Err(BusError::Timeout(service.to_string()))
            }
        }
    }

    /// Round-trips a no-op call; every frame sent before it has been handled
    /// by the server once this returns.
    pub fn ping(&self, timeout: Duration) -> Result<(), BusError> {
        self.call(BUS_PING, json!({}), timeout).map(|_| ())
    }
}

fn dispatch(frame: Frame, pending: &Pending, routes: &Routes) {
    match frame {
        Frame::Pub(env) => {
            if let Some(senders) = routes.lock().unwrap().get_mut(&env.topic) {
                senders.retain(|tx| tx.send(env.clone()).is_ok());
            }
        }
        Frame::Reply { call_id, response } => {
            if let Some(tx) = pending.lock().unwrap().remove(&call_id) {
                let _ = tx.send(Ok(response));
            }
        }
        Frame::Err {
            call_id,
            code,
            message,
            detail,
        } => {
            let err = Frame::into_error(code, message, detail);
            match call_id.and_then(|id| pending.lock().unwrap().remove(&id)) {
                Some(tx) => {
                    let _ = tx.send(Err(err));
                }
                None => log::warn!("bus error frame: {err}"),
            }
        }
        Frame::Sub { .. } | Frame::Call(_) => {}
    }
}
