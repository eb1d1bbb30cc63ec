//! TCP and WebSocket listeners in front of a [`Broker`].
//!
//! Both transports carry [`wire`](crate::wire) frames. A connection may
//! `sub` to topics, `pub` envelopes (the broker assigns `seq`), and `call`
//! services; replies and errors come back tagged with the caller's
//! `call_id`, which must be unique per connection.

use std::collections::HashSet;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde_json::json;
use tungstenite::Message;

use crate::catalog::BUS_PING;
use crate::wire::{self, ErrorCode, Frame};
use crate::{BusError, Broker};

pub const DEFAULT_TCP_PORT: u16 = 7450;
pub const DEFAULT_WS_PORT: u16 = 7451;
pub const PORT_ENV: &str = "STAIR_BUS_PORT";

const POLL: Duration = Duration::from_millis(20);

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub tcp: SocketAddr,
    pub ws: Option<SocketAddr>,
    /// Applied to calls that carry no deadline.
    pub default_call_timeout: Duration,
}

impl ServerConfig {
    /// Loopback listeners on the default ports, with `STAIR_BUS_PORT`
    /// overriding the TCP port.
    pub fn from_env() -> Self {
        let tcp_port = std::env::var(PORT_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<u16>().ok())
            .unwrap_or(DEFAULT_TCP_PORT);
        ServerConfig::with_ports(tcp_port, Some(DEFAULT_WS_PORT))
    }

    pub fn with_ports(tcp: u16, ws: Option<u16>) -> Self {
        ServerConfig {
            tcp: SocketAddr::from(([127, 0, 0, 1], tcp)),
            ws: ws.map(|p| SocketAddr::from(([127, 0, 0, 1], p))),
            default_call_timeout: Duration::from_secs(5),
        }
    }

    /// Ephemeral loopback ports, for tests.
    pub fn ephemeral() -> Self {
        ServerConfig::with_ports(0, Some(0))
    }
}

pub struct BusServer {
    tcp_addr: SocketAddr,
    ws_addr: Option<SocketAddr>,
    shutdown: Arc<AtomicBool>,
    acceptors: Vec<JoinHandle<()>>,
}

impl BusServer {
    pub fn start(broker: Broker, config: ServerConfig) -> io::Result<BusServer> {
        let shutdown = Arc::new(AtomicBool::new(false));
        let tcp = TcpListener::bind(config.tcp)?;
        let tcp_addr = tcp.local_addr()?;
        let mut acceptors = Vec::new();
        {
            let (broker, shutdown, timeout) = (broker.clone(), shutdown.clone(), config.default_call_timeout);
            acceptors.push(spawn_acceptor(tcp, shutdown.clone(), move |stream| {
                serve_tcp(stream, broker.clone(), shutdown.clone(), timeout)
            })?);
        }
        let ws_addr = match config.ws {
            Some(addr) => {
                let ws = TcpListener::bind(addr)?;
                let local = ws.local_addr()?;
                let (broker, shutdown, timeout) = (broker.clone(), shutdown.clone(), config.default_call_timeout);
                acceptors.push(spawn_acceptor(ws, shutdown.clone(), move |stream| {
                    serve_ws(stream, broker.clone(), shutdown.clone(), timeout)
                })?);
                Some(local)
            }
            None => None,
        };
        log::info!("bus listening on tcp {tcp_addr}, ws {ws_addr:?}");
        Ok(BusServer {
            tcp_addr,
            ws_addr,
            shutdown,
            acceptors,
        })
    }

    pub fn tcp_addr(&self) -> SocketAddr {
        self.tcp_addr
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.ws_addr
    }

    /// Stops accepting and tells live connections to close.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        for h in self.acceptors.drain(..) {
            let _ = h.join();
        }
    }
}

impl Drop for BusServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn spawn_acceptor<F>(listener: TcpListener, shutdown: Arc<AtomicBool>, serve: F) -> io::Result<JoinHandle<()>>
where
    F: Fn(TcpStream) + Send + Clone + 'static,
{
    listener.set_nonblocking(true)?;
    thread::Builder::new().name("bus-accept".into()).spawn(move || {
        while !shutdown.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, peer)) => {
                    log::debug!("bus connection from {peer}");
                    let _ = stream.set_nonblocking(false);
                    let _ = stream.set_nodelay(true);
                    let serve = serve.clone();
                    let _ = thread::Builder::new().name("bus-conn".into()).spawn(move || serve(stream));
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    thread::sleep(POLL);
                }
            }
        }
    })
}

/// Per-connection protocol state shared by both transports.
struct Session {
    broker: Broker,
    out: mpsc::Sender<Frame>,
    alive: Arc<AtomicBool>,
    seen_calls: HashSet<u64>,
    subscribed: HashSet<String>,
    default_timeout: Duration,
}

impl Session {
    fn new(broker: Broker, out: mpsc::Sender<Frame>, alive: Arc<AtomicBool>, default_timeout: Duration) -> Self {
        Session {
            broker,
            out,
            alive,
            seen_calls: HashSet::new(),
            subscribed: HashSet::new(),
            default_timeout,
        }
    }

    fn handle(&mut self, frame: Frame) {
        match frame {
            Frame::Sub { topic } => {
                if !self.subscribed.insert(topic.to_string()) {
                    return;
                }
                let sub = self.broker.subscribe(&topic);
                let (out, alive) = (self.out.clone(), self.alive.clone());
                let _ = thread::Builder::new().name("bus-fwd".into()).spawn(move || {
                    while alive.load(Ordering::SeqCst) {
                        if let Some(env) = sub.recv_timeout(POLL) {
                            if out.send(Frame::Pub(env)).is_err() {
                                break;
                            }
                        }
                    }
                });
            }
            Frame::Pub(env) => {
                self.broker.publish(&env.topic, env.payload, env.sim_time);
            }
            Frame::Call(call) => {
                if !self.seen_calls.insert(call.call_id) {
                    let _ = self.out.send(Frame::Err {
                        call_id: Some(call.call_id),
                        code: ErrorCode::DuplicateCallId,
                        message: format!("call_id {} already used on this connection", call.call_id),
                        detail: None,
                    });
                    return;
                }
                if call.service.as_str() == BUS_PING {
                    let _ = self.out.send(Frame::Reply {
                        call_id: call.call_id,
                        response: json!({"ok": true}),
                    });
                    return;
                }
                let timeout = call
                    .deadline
                    .filter(|d| d.is_finite() && *d > 0.0)
                    .map(Duration::from_secs_f64)
                    .unwrap_or(self.default_timeout);
                let (broker, out) = (self.broker.clone(), self.out.clone());
                let _ = thread::Builder::new().name("bus-call".into()).spawn(move || {
                    let frame = match broker.call(&call.service, call.request, timeout) {
                        Ok(response) => Frame::Reply {
                            call_id: call.call_id,
                            response,
                        },
                        Err(e) => Frame::from_error(Some(call.call_id), &e),
                    };
                    let _ = out.send(frame);
                });
            }
            Frame::Reply { .. } | Frame::Err { .. } => {
                log::debug!("ignoring client-sent reply/err frame");
            }
        }
    }

    fn reject(&self, err: &BusError) {
        let _ = self.out.send(Frame::Err {
            call_id: None,
            code: ErrorCode::BadFrame,
            message: err.to_string(),
            detail: None,
        });
    }
}

fn serve_tcp(stream: TcpStream, broker: Broker, shutdown: Arc<AtomicBool>, timeout: Duration) {
    let Ok(write_half) = stream.try_clone() else {
        return;
    };
    let alive = Arc::new(AtomicBool::new(true));
    let (tx, rx) = mpsc::channel::<Frame>();

    let writer_alive = alive.clone();
    let writer_shutdown = shutdown.clone();
    let writer = thread::spawn(move || {
        let mut w = BufWriter::new(write_half);
        while writer_alive.load(Ordering::SeqCst) && !writer_shutdown.load(Ordering::SeqCst) {
            match rx.recv_timeout(POLL) {
                Ok(frame) => {
                    if wire::write_frame(&mut w, &frame).is_err() {
                        break;
                    }
                    // Batch whatever else is already queued before flushing.
                    while let Ok(more) = rx.try_recv() {
                        if wire::write_frame(&mut w, &more).is_err() {
                            break;
                        }
                    }
                    if w.flush().is_err() {
                        break;
                    }
                }
                Err(mpsc::RecvTimeoutError::Timeout) => {}
                Err(mpsc::RecvTimeoutError::Disconnected) => break,
            }
        }
        writer_alive.store(false, Ordering::SeqCst);
        let _ = w.get_ref().shutdown(std::net::Shutdown::Both);
    });

    let _ = stream.set_read_timeout(Some(Duration::from_millis(200)));
    let mut session = Session::new(broker, tx, alive.clone(), timeout);
    let mut reader = BufReader::new(stream);
    let mut pending: Vec<u8> = Vec::new();
    let mut chunk = [0u8; 8192];
    'conn: while alive.load(Ordering::SeqCst) && !shutdown.load(Ordering::SeqCst) {
        match io::Read::read(&mut reader, &mut chunk) {
            Ok(0) => break,
            Ok(n) => {
                pending.extend_from_slice(&chunk[..n]);
                loop {
                    match wire::decode(&pending) {
                        Ok(Some((frame, used))) => {
                            pending.drain(..used);
                            session.handle(frame);
                        }
                        Ok(None) => break,
                        Err(e) => {
                            session.reject(&e);
                            break 'conn;
                        }
                    }
                }
            }
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(_) => break,
        }
    }
    alive.store(false, Ordering::SeqCst);
    drop(session);
    let _ = writer.join();
}

fn serve_ws(stream: TcpStream, broker: Broker, shutdown: Arc<AtomicBool>, timeout: Duration) {
    let mut ws = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            log::debug!("websocket handshake failed: {e}");
            return;
        }
    };
    let _ = ws.get_ref().set_read_timeout(Some(Duration::from_millis(10)));
    let alive = Arc::new(AtomicBool::new(true));
    let (tx, rx) = mpsc::channel::<Frame>();
    let mut session = Session::new(broker, tx, alive.clone(), timeout);

    while !shutdown.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Binary(bytes)) => match wire::decode_exact(&bytes) {
                Ok(frame) => session.handle(frame),
                Err(e) => session.reject(&e),
            },
            // Browsers may send the JSON body alone as a text message.
            Ok(Message::Text(text)) => match wire::decode_body(text.as_bytes()) {
                Ok(frame) => session.handle(frame),
                Err(e) => session.reject(&e),
            },
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(_) => break,
        }
        let mut failed = false;
        while let Ok(frame) = rx.try_recv() {
            if ws.write(Message::Binary(wire::encode(&frame))).is_err() {
                failed = true;
                break;
            }
        }
        if failed || matches!(ws.flush(), Err(ref e) if !is_would_block(e)) {
            break;
        }
    }
    alive.store(false, Ordering::SeqCst);
    let _ = ws.close(None);
    let _ = ws.flush();
}

fn is_would_block(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut))
}
