//! Request/response protocol between the engine and model hosts.
//!
//! TCP framing, little-endian:
//! `u32 frame_len | u8 kind (0 req, 1 resp) | u64 request_id | u16 model_len | model_id | payload`.
//! A response payload starts with a status byte (0 ok, 1 model error,
//! 2 timeout) followed by an encoded semantic value or a UTF-8 error message.

use std::collections::{HashMap, VecDeque};
use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex, RwLock};

use crate::codec::{read_u16, read_u32, read_u64, read_u8};

use super::{ExtractionError, Extractor, SemanticValue};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq)]
pub struct AipmRequest {
    pub request_id: u64,
    pub model_id: String,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AipmStatus {
    Ok(SemanticValue),
    ModelError(String),
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AipmResponse {
    pub request_id: u64,
    pub model_id: String,
    pub status: AipmStatus,
}

impl AipmResponse {
    fn payload(&self) -> Vec<u8> {
        let mut p = Vec::new();
        match &self.status {
            AipmStatus::Ok(v) => {
                p.push(0);
                v.encode(&mut p);
            }
            AipmStatus::ModelError(m) => {
                p.push(1);
                p.extend_from_slice(m.as_bytes());
            }
            AipmStatus::Timeout => p.push(2),
        }
        p
    }

    fn from_payload(request_id: u64, model_id: String, payload: &[u8]) -> io::Result<Self> {
        let mut r = payload;
        let status = match read_u8(&mut r)? {
            0 => AipmStatus::Ok(SemanticValue::decode(&mut r)?),
            1 => AipmStatus::ModelError(String::from_utf8_lossy(r).into_owned()),
            2 => AipmStatus::Timeout,
            s => return Err(io::Error::new(io::ErrorKind::InvalidData, format!("unknown status {s}"))),
        };
        Ok(AipmResponse { request_id, model_id, status })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Request(AipmRequest),
    Response(AipmResponse),
}

impl Frame {
    pub fn encode(&self) -> Vec<u8> {
        let (kind, id, model, payload) = match self {
            Frame::Request(r) => (0u8, r.request_id, &r.model_id, r.payload.clone()),
            Frame::Response(r) => (1u8, r.request_id, &r.model_id, r.payload()),
        };
        let body_len = 1 + 8 + 2 + model.len() + payload.len();
        let mut out = Vec::with_capacity(4 + body_len);
        out.extend_from_slice(&(body_len as u32).to_le_bytes());
        out.push(kind);
        out.extend_from_slice(&id.to_le_bytes());
        out.extend_from_slice(&(model.len() as u16).to_le_bytes());
        out.extend_from_slice(model.as_bytes());
        out.extend_from_slice(&payload);
        out
    }

    pub fn read_from<R: Read>(r: &mut R) -> io::Result<Frame> {
        let len = read_u32(r)? as usize;
        let mut body = vec![0u8; len];
        r.read_exact(&mut body)?;
        let mut b = body.as_slice();
        let kind = read_u8(&mut b)?;
        let id = read_u64(&mut b)?;
        let mlen = read_u16(&mut b)? as usize;
        if b.len() < mlen {
            return Err(io::ErrorKind::UnexpectedEof.into());
        }
        let model_id =
            String::from_utf8(b[..mlen].to_vec()).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        let payload = &b[mlen..];
        match kind {
            0 => Ok(Frame::Request(AipmRequest { request_id: id, model_id, payload: payload.to_vec() })),
            1 => Ok(Frame::Response(AipmResponse::from_payload(id, model_id, payload)?)),
            k => Err(io::Error::new(io::ErrorKind::InvalidData, format!("unknown frame kind {k}"))),
        }
    }
}

/// Models addressable by id, served to AIPM requests.
#[derive(Default)]
pub struct ModelHost {
    models: RwLock<HashMap<String, Arc<dyn Extractor>>>,
}

impl ModelHost {
    pub fn register(&self, model_id: String, e: Arc<dyn Extractor>) {
        self.models.write().insert(model_id, e);
    }

    pub fn handle(&self, req: &AipmRequest) -> AipmResponse {
        let model = self.models.read().get(&req.model_id).cloned();
        let status = match model {
            None => AipmStatus::ModelError(format!("no model {}", req.model_id)),
            Some(m) => match m.extract(&req.payload) {
                Ok(v) => AipmStatus::Ok(v),
                Err(msg) => AipmStatus::ModelError(msg),
            },
        };
        AipmResponse { request_id: req.request_id, model_id: req.model_id.clone(), status }
    }
}

/// A connection that carries requests out and responses back, possibly out of order.
pub trait AipmTransport: Send + Sync {
    fn send(&self, req: AipmRequest) -> Result<(), ExtractionError>;

    /// Next available response, or `None` if none arrived within `timeout`.
    fn recv(&self, timeout: Duration) -> Result<Option<AipmResponse>, ExtractionError>;
}

/// Serves each request synchronously on the sending thread.
pub struct InProcessTransport {
    host: Arc<ModelHost>,
    queue: Mutex<VecDeque<AipmResponse>>,
    ready: Condvar,
    closed: AtomicBool,
}

impl InProcessTransport {
    pub fn new(host: Arc<ModelHost>) -> Self {
        InProcessTransport { host, queue: Mutex::new(VecDeque::new()), ready: Condvar::new(), closed: AtomicBool::new(false) }
    }

    pub fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
        self.ready.notify_all();
    }
}

impl AipmTransport for InProcessTransport {
    fn send(&self, req: AipmRequest) -> Result<(), ExtractionError> {
        if self.closed.load(Ordering::SeqCst) {
            return Err(ExtractionError::TransportClosed);
        }
        let resp = self.host.handle(&req);
        self.queue.lock().push_back(resp);
        self.ready.notify_one();
        Ok(())
    }

    fn recv(&self, timeout: Duration) -> Result<Option<AipmResponse>, ExtractionError> {
        let mut q = self.queue.lock();
        if q.is_empty() {
            if self.closed.load(Ordering::SeqCst) {
                return Err(ExtractionError::TransportClosed);
            }
            self.ready.wait_for(&mut q, timeout);
        }
        match q.pop_front() {
            Some(r) => Ok(Some(r)),
            None if self.closed.load(Ordering::SeqCst) => Err(ExtractionError::TransportClosed),
            None => Ok(None),
        }
    }
}

/// Client side of a TCP connection to [`serve_tcp`].
pub struct TcpTransport {
    writer: Mutex<TcpStream>,
    responses: Mutex<mpsc::Receiver<AipmResponse>>,
}

impl TcpTransport {
    pub fn connect(addr: &str) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let mut reader = stream.try_clone()?;
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            while let Ok(Frame::Response(r)) = Frame::read_from(&mut reader) {
                if tx.send(r).is_err() {
                    break;
                }
            }
        });
        Ok(TcpTransport { writer: Mutex::new(stream), responses: Mutex::new(rx) })
    }
}

impl AipmTransport for TcpTransport {
    fn send(&self, req: AipmRequest) -> Result<(), ExtractionError> {
        self.writer
            .lock()
            .write_all(&Frame::Request(req).encode())
            .map_err(|_| ExtractionError::TransportClosed)
    }

    fn recv(&self, timeout: Duration) -> Result<Option<AipmResponse>, ExtractionError> {
        match self.responses.lock().recv_timeout(timeout) {
            Ok(r) => Ok(Some(r)),
            Err(mpsc::RecvTimeoutError::Timeout) => Ok(None),
            Err(mpsc::RecvTimeoutError::Disconnected) => Err(ExtractionError::TransportClosed),
        }
    }
}

/// Accepts connections and answers requests with `host`, one thread per
/// request so responses may overtake each other.
pub fn serve_tcp(listener: TcpListener, host: Arc<ModelHost>) -> thread::JoinHandle<()> {
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { break };
            let host = host.clone();
            thread::spawn(move || {
                let Ok(writer) = stream.try_clone() else { return };
                let writer = Arc::new(Mutex::new(writer));
                let mut reader = stream;
                while let Ok(Frame::Request(req)) = Frame::read_from(&mut reader) {
                    let host = host.clone();
                    let writer = writer.clone();
                    thread::spawn(move || {
                        let resp = host.handle(&req);
                        let _ = writer.lock().write_all(&Frame::Response(resp).encode());
                    });
                }
            });
        }
    })
}

/// Matches responses to callers. Several threads may wait at once; whichever
/// holds the pump lock drains the transport and parks foreign responses in
/// the pending map.
pub struct AipmClient {
    transport: Arc<dyn AipmTransport>,
    next_id: AtomicU64,
    pending: Mutex<HashMap<u64, AipmResponse>>,
    arrived: Condvar,
    pump: Mutex<()>,
    timeout: Duration,
}

impl AipmClient {
    pub fn new(transport: Arc<dyn AipmTransport>) -> Self {
        Self::with_timeout(transport, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(transport: Arc<dyn AipmTransport>, timeout: Duration) -> Self {
        AipmClient {
            transport,
            next_id: AtomicU64::new(1),
            pending: Mutex::new(HashMap::new()),
            arrived: Condvar::new(),
            pump: Mutex::new(()),
            timeout,
        }
    }

    pub fn call(&self, model_id: &str, payload: Vec<u8>) -> Result<AipmResponse, ExtractionError> {
        let request_id = self.next_id.fetch_add(1, Ordering::Relaxed);
        self.roundtrip(AipmRequest { request_id, model_id: model_id.to_string(), payload })
    }

    pub fn roundtrip(&self, req: AipmRequest) -> Result<AipmResponse, ExtractionError> {
        let id = req.request_id;
        let deadline = Instant::now() + self.timeout;
        self.transport.send(req)?;
        loop {
            if let Some(r) = self.pending.lock().remove(&id) {
                return Ok(r);
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(ExtractionError::Timeout);
            }
            let slice = (deadline - now).min(Duration::from_millis(20));
            if let Some(_guard) = self.pump.try_lock() {
                let got = self.transport.recv(slice);
                match got {
                    Ok(Some(r)) if r.request_id == id => return Ok(r),
                    Ok(Some(r)) => {
                        self.pending.lock().insert(r.request_id, r);
                        self.arrived.notify_all();
                    }
                    Ok(None) => {}
                    Err(e) => {
                        self.arrived.notify_all();
                        return Err(e);
                    }
                }
            } else {
                let mut p = self.pending.lock();
                if !p.contains_key(&id) {
                    self.arrived.wait_for(&mut p, slice);
                }
            }
        }
    }
}
