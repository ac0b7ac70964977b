//! Line-delimited JSON transport for the sync protocol.
//!
//! ```text
//! -> {"t":"sync","agent":0,"ver":0,"obs":[[1,2]],"rid":0}
//! <- {"t":"delta","recs":[{"v":1,"s":[1],"a":0,"o":1},...],"ver":3,"complete":false}
//! <- {"t":"err","code":"unknown_type"}
//! ```

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ServerState, SyncDelta, SyncRequest};
use crate::complex::{InsertionRecord, LandmarkId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "lowercase")]
pub enum ClientMessage {
    Sync {
        agent: usize,
        ver: u64,
        obs: Vec<Vec<LandmarkId>>,
        rid: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "lowercase")]
pub enum ServerMessage {
    Delta {
        recs: Vec<InsertionRecord>,
        ver: u64,
        complete: bool,
    },
    Err {
        code: String,
    },
}

impl From<&SyncRequest> for ClientMessage {
    fn from(r: &SyncRequest) -> Self {
        ClientMessage::Sync {
            agent: r.agent,
            ver: r.known_version,
            obs: r.observations.clone(),
            rid: r.request_id,
        }
    }
}

impl From<ClientMessage> for SyncRequest {
    fn from(m: ClientMessage) -> Self {
        let ClientMessage::Sync {
            agent,
            ver,
            obs,
            rid,
        } = m;
        SyncRequest {
            agent,
            known_version: ver,
            observations: obs,
            request_id: rid,
        }
    }
}

impl From<SyncDelta> for ServerMessage {
    fn from(d: SyncDelta) -> Self {
        ServerMessage::Delta {
            recs: d.records,
            ver: d.new_version,
            complete: d.complete,
        }
    }
}

fn err_line(code: &str) -> String {
    serde_json::to_string(&ServerMessage::Err { code: code.into() }).expect("serializable")
}

/// Answers one request line (without the trailing newline).
pub fn handle_line(server: &mut ServerState, line: &str) -> String {
    let value: serde_json::Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(_) => return err_line("bad_json"),
    };
    match value.get("t").and_then(|t| t.as_str()) {
        None => return err_line("missing_type"),
        Some("sync") => {}
        Some(_) => return err_line("unknown_type"),
    }
    let msg: ClientMessage = match serde_json::from_value(value) {
        Ok(m) => m,
        Err(_) => return err_line("bad_message"),
    };
    match server.handle_sync(&msg.into()) {
        Ok(delta) => serde_json::to_string(&ServerMessage::from(delta)).expect("serializable"),
        Err(e) => err_line(e.code()),
    }
}

/// Serves one connection until EOF. Blank lines are skipped.
pub fn serve_stream<R: BufRead, W: Write>(
    state: &Mutex<ServerState>,
    reader: R,
    mut writer: W,
) -> io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let reply = {
            let mut s = state.lock().unwrap_or_else(|p| p.into_inner());
            handle_line(&mut s, line)
        };
        writer.write_all(reply.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

/// Threaded TCP front end; requests from all connections are serialized
/// through one lock.
pub struct SyncServer {
    addr: SocketAddr,
    state: Arc<Mutex<ServerState>>,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl SyncServer {
    pub fn spawn(addr: impl ToSocketAddrs, state: ServerState) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let state = Arc::new(Mutex::new(state));
        let stop = Arc::new(AtomicBool::new(false));
        let accept = {
            let state = Arc::clone(&state);
            let stop = Arc::clone(&stop);
            std::thread::spawn(move || {
                for conn in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = conn else { continue };
                    let _ = stream.set_nodelay(true);
                    let state = Arc::clone(&state);
                    std::thread::spawn(move || {
                        let Ok(read_half) = stream.try_clone() else { return };
                        if let Err(e) = serve_stream(&state, BufReader::new(read_half), stream) {
                            log::debug!("sync connection ended: {e}");
                        }
                    });
                }
            })
        };
        Ok(SyncServer {
            addr,
            state,
            stop,
            accept: Some(accept),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn state(&self) -> Arc<Mutex<ServerState>> {
        Arc::clone(&self.state)
    }

    /// Stops accepting connections. Open connections finish on their own.
    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        if let Some(h) = self.accept.take() {
            self.stop.store(true, Ordering::SeqCst);
            let _ = TcpStream::connect(self.addr);
            let _ = h.join();
        }
    }
}

impl Drop for SyncServer {
    fn drop(&mut self) {
        self.stop_accepting();
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad server message: {0}")]
    Json(#[from] serde_json::Error),
    #[error("server error: {0}")]
    Remote(String),
    #[error("connection closed")]
    Closed,
}

/// Blocking client for one connection.
pub struct SyncClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl SyncClient {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let writer = TcpStream::connect(addr)?;
        writer.set_nodelay(true)?;
        let reader = BufReader::new(writer.try_clone()?);
        Ok(SyncClient { reader, writer })
    }

    /// Sends a raw line and returns the raw reply line.
    pub fn raw(&mut self, line: &str) -> Result<String, WireError> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(WireError::Closed);
        }
        Ok(reply.trim_end().to_string())
    }

    pub fn sync(&mut self, req: &SyncRequest) -> Result<SyncDelta, WireError> {
        let line = serde_json::to_string(&ClientMessage::from(req))?;
        let reply = self.raw(&line)?;
        match serde_json::from_str::<ServerMessage>(&reply)? {
            ServerMessage::Delta {
                recs,
                ver,
                complete,
            } => Ok(SyncDelta {
                records: recs,
                new_version: ver,
                complete,
            }),
            ServerMessage::Err { code } => Err(WireError::Remote(code)),
        }
    }
}
