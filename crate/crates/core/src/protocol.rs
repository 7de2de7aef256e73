//! Line-oriented feedback protocol between a surface controller and a power meter.
//!
//! Requests: `SET 1bit <hex>`, `SET phase <r0,r1,…>`, `GET-COUNT`, `RESET <seed>`.
//! Responses: `PWR <dbm>`, `COUNT <n>`, `OK`, `ERR <code> <text>`.
//! Every line is printable ASCII terminated by LF; a trailing CR is ignored.
//! Payloads are row-major over `(m, n)`.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use crate::channel::{Scenario, SimulatedOracle};
use crate::error::Result;
use crate::geometry::{dispatch_profile, phase_of, PhaseProfile, PhaseStateSet, RisGeometry};
use crate::oracle::{OracleError, PowerOracle};
use crate::packing::{from_row_major, pack_hex, to_row_major, unpack_hex, PackError};
use crate::scalar::RisFloat;

/// Longest accepted line, excluding the terminating LF.
pub const MAX_LINE: usize = 64 * 1024 - 1;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    OneBit(String),
    Phase(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    Set(Payload),
    GetCount,
    Reset(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Pwr(f64),
    Count(u64),
    Ok,
    Err(u16, String),
}

impl Request {
    pub fn to_line(&self) -> String {
        match self {
            Request::Set(Payload::OneBit(hex)) => format!("SET 1bit {hex}"),
            Request::Set(Payload::Phase(ph)) => {
                let parts: Vec<String> = ph.iter().map(|p| p.to_string()).collect();
                format!("SET phase {}", parts.join(","))
            }
            Request::GetCount => "GET-COUNT".into(),
            Request::Reset(seed) => format!("RESET {seed}"),
        }
    }
}

impl Response {
    pub fn to_line(&self) -> String {
        match self {
            Response::Pwr(p) => format!("PWR {p:.4}"),
            Response::Count(n) => format!("COUNT {n}"),
            Response::Ok => "OK".into(),
            Response::Err(code, text) => format!("ERR {code:03} {text}"),
        }
    }
}

fn bad(text: impl Into<String>) -> Response {
    Response::Err(400, text.into())
}

fn printable(line: &[u8]) -> bool {
    line.iter().all(|&b| (0x20..=0x7e).contains(&b))
}

/// Parses one request line (without its LF). Failures come back as the `ERR` to send.
pub fn parse_request(line: &[u8]) -> std::result::Result<Request, Response> {
    let line = line.strip_suffix(b"\r").unwrap_or(line);
    if line.is_empty() {
        return Err(bad("empty request"));
    }
    if !printable(line) {
        return Err(bad("non-printable byte in request"));
    }
    let text = std::str::from_utf8(line).map_err(|_| bad("invalid text"))?;
    let mut parts = text.splitn(3, ' ');
    let verb = parts.next().unwrap_or("");
    match verb {
        "GET-COUNT" => match parts.next() {
            None => Ok(Request::GetCount),
            Some(_) => Err(bad("GET-COUNT takes no arguments")),
        },
        "RESET" => {
            let arg = parts.next().ok_or_else(|| bad("RESET needs a seed"))?;
            if parts.next().is_some() {
                return Err(bad("RESET takes one argument"));
            }
            if arg.is_empty() || !arg.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad("seed must be an unsigned 64-bit integer"));
            }
            arg.parse::<u64>()
                .map(Request::Reset)
                .map_err(|_| bad("seed must be an unsigned 64-bit integer"))
        }
        "SET" => {
            let enc = parts.next().ok_or_else(|| bad("SET needs an encoding"))?;
            let payload = parts.next().ok_or_else(|| bad("SET needs a payload"))?;
            match enc {
                "1bit" => {
                    if payload.is_empty() || !payload.bytes().all(|b| b.is_ascii_hexdigit()) {
                        return Err(bad("1bit payload must be hex digits"));
                    }
                    Ok(Request::Set(Payload::OneBit(payload.to_string())))
                }
                "phase" => {
                    let phases = payload
                        .split(',')
                        .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
                        .collect::<Option<Vec<f64>>>()
                        .ok_or_else(|| bad("phase payload must be comma-separated finite radians"))?;
                    Ok(Request::Set(Payload::Phase(phases)))
                }
                _ => Err(bad(format!("unknown encoding '{enc}'"))),
            }
        }
        _ => Err(bad("unknown command")),
    }
}

pub fn parse_response(line: &str) -> std::result::Result<Response, OracleError> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let violation = || OracleError::Protocol(format!("unexpected response '{line}'"));
    if line == "OK" {
        return Ok(Response::Ok);
    }
    if let Some(v) = line.strip_prefix("PWR ") {
        return v.parse::<f64>().map(Response::Pwr).map_err(|_| violation());
    }
    if let Some(v) = line.strip_prefix("COUNT ") {
        return v.parse::<u64>().map(Response::Count).map_err(|_| violation());
    }
    if let Some(rest) = line.strip_prefix("ERR ") {
        let (code, text) = rest.split_once(' ').unwrap_or((rest, ""));
        if code.len() == 3 {
            if let Ok(code) = code.parse::<u16>() {
                return Ok(Response::Err(code, text.to_string()));
            }
        }
    }
    Err(violation())
}

/// Server-side state: the simulated channel behind the wire.
pub struct Device<T: Copy> {
    oracle: SimulatedOracle<T>,
    geometry: RisGeometry<T>,
    states: PhaseStateSet<T>,
}

impl<T: RisFloat> Device<T> {
    pub fn new(scenario: &Scenario<T>) -> Result<Self> {
        Ok(Self {
            oracle: SimulatedOracle::new(scenario)?,
            geometry: scenario.ris.geometry,
            states: scenario.ris.phase_states.clone(),
        })
    }

    /// States addressed by the `1bit` encoding.
    fn one_bit_states(&self) -> Option<PhaseStateSet<T>> {
        match &self.states {
            PhaseStateSet::Continuous => Some(PhaseStateSet::one_bit()),
            PhaseStateSet::Discrete { states } if states.len() == 2 => Some(self.states.clone()),
            PhaseStateSet::Discrete { .. } => None,
        }
    }

    fn profile(&self, payload: &Payload) -> std::result::Result<PhaseProfile<T>, Response> {
        let (rows, cols) = (self.geometry.rows_z, self.geometry.cols_y);
        let len = self.geometry.len();
        match payload {
            Payload::OneBit(hex) => {
                let set = self
                    .one_bit_states()
                    .ok_or_else(|| bad("1bit encoding needs a two-state surface"))?;
                let idx = unpack_hex(hex, len, 1, 2).map_err(|e| match e {
                    PackError::Length { expected, got } => {
                        Response::Err(413, format!("expected {expected} hex digits, got {got}"))
                    }
                    other => bad(other.to_string()),
                })?;
                PhaseProfile::from_state_indices(self.geometry, &set, &from_row_major(&idx, rows, cols))
                    .map_err(|e| bad(e.to_string()))
            }
            Payload::Phase(ph) => {
                if ph.len() != len {
                    return Err(Response::Err(413, format!("expected {len} phases, got {}", ph.len())));
                }
                let kron: Vec<T> = from_row_major(ph, rows, cols).into_iter().map(T::of).collect();
                PhaseProfile::from_phases(self.geometry, &kron)
                    .and_then(|p| dispatch_profile(p, &self.states))
                    .map_err(|e| bad(e.to_string()))
            }
        }
    }

    /// Answers one raw request line.
    pub fn handle(&mut self, line: &[u8]) -> Response {
        let req = match parse_request(line) {
            Ok(r) => r,
            Err(resp) => return resp,
        };
        match req {
            Request::GetCount => Response::Count(self.oracle.query_count()),
            Request::Reset(seed) => {
                self.oracle.reset(seed);
                Response::Ok
            }
            Request::Set(payload) => match self.profile(&payload) {
                Ok(profile) => match self.oracle.query(&profile) {
                    Ok(p) => Response::Pwr(p.as_f64()),
                    Err(e) => Response::Err(500, e.to_string()),
                },
                Err(resp) => resp,
            },
        }
    }
}

enum Line {
    Eof,
    Text(Vec<u8>),
    TooLong,
}

fn read_line_limited<R: BufRead>(r: &mut R) -> io::Result<Line> {
    let mut buf = Vec::new();
    let mut overflow = false;
    loop {
        let avail = r.fill_buf()?;
        if avail.is_empty() {
            return Ok(if overflow {
                Line::TooLong
            } else if buf.is_empty() {
                Line::Eof
            } else {
                Line::Text(buf)
            });
        }
        let (chunk, done) = match avail.iter().position(|&b| b == b'\n') {
            Some(i) => (&avail[..i], Some(i + 1)),
            None => (avail, None),
        };
        if !overflow {
            buf.extend_from_slice(chunk);
            if buf.len() > MAX_LINE {
                overflow = true;
                buf.clear();
            }
        }
        let used = done.unwrap_or(avail.len());
        r.consume(used);
        if done.is_some() {
            return Ok(if overflow { Line::TooLong } else { Line::Text(buf) });
        }
    }
}

fn serve_connection<T: RisFloat>(stream: TcpStream, device: &Mutex<Device<T>>) -> io::Result<()> {
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    loop {
        let resp = match read_line_limited(&mut reader)? {
            Line::Eof => return Ok(()),
            Line::TooLong => bad(format!("line exceeds {} bytes", MAX_LINE + 1)),
            Line::Text(line) => device.lock().expect("device lock").handle(&line),
        };
        writer.write_all(format!("{}\n", resp.to_line()).as_bytes())?;
        writer.flush()?;
    }
}

/// A running server; dropping it without [`shutdown`](Self::shutdown) leaves it running.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    active: Arc<Mutex<Option<TcpStream>>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting, drops the active client and joins the server thread.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(s) = self.active.lock().expect("active lock").take() {
            let _ = s.shutdown(Shutdown::Both);
        }
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_secs(1));
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    /// Blocks until the server thread exits.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Serves `scenario` on `endpoint`, one client at a time.
pub fn serve<T: RisFloat, A: ToSocketAddrs>(scenario: &Scenario<T>, endpoint: A) -> io::Result<ServerHandle> {
    let device = Arc::new(Mutex::new(
        Device::new(scenario).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?,
    ));
    let listener = TcpListener::bind(endpoint)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let active: Arc<Mutex<Option<TcpStream>>> = Arc::new(Mutex::new(None));
    let busy = Arc::new(AtomicBool::new(false));
    let (stop_t, active_t) = (stop.clone(), active.clone());
    let thread = std::thread::spawn(move || {
        for conn in listener.incoming() {
            if stop_t.load(Ordering::SeqCst) {
                break;
            }
            let Ok(mut stream) = conn else { continue };
            if busy.swap(true, Ordering::SeqCst) {
                let _ = stream.write_all(b"ERR 409 another client is connected\n");
                let _ = stream.shutdown(Shutdown::Both);
                continue;
            }
            let _ = stream.set_nodelay(true);
            *active_t.lock().expect("active lock") = stream.try_clone().ok();
            let (device, busy, active) = (device.clone(), busy.clone(), active_t.clone());
            std::thread::spawn(move || {
                let _ = serve_connection(stream, &device);
                active.lock().expect("active lock").take();
                busy.store(false, Ordering::SeqCst);
            });
        }
    });
    Ok(ServerHandle {
        addr,
        stop,
        active,
        thread: Some(thread),
    })
}

/// Client side of the protocol, usable wherever a local oracle is.
///
/// Profiles go out as `1bit` when the configured state set has two states and
/// every coefficient is one of them exactly; otherwise as `phase`.
pub struct RemoteOracle<T: Copy> {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    states: PhaseStateSet<T>,
    count: u64,
}

impl<T: RisFloat> RemoteOracle<T> {
    pub fn connect<A: ToSocketAddrs>(endpoint: A) -> std::result::Result<Self, OracleError> {
        Self::connect_timeout(endpoint, DEFAULT_TIMEOUT)
    }

    pub fn connect_timeout<A: ToSocketAddrs>(endpoint: A, timeout: Duration) -> std::result::Result<Self, OracleError> {
        let transport = |e: io::Error| OracleError::Transport(e.to_string());
        let addr = endpoint
            .to_socket_addrs()
            .map_err(transport)?
            .next()
            .ok_or_else(|| OracleError::Transport("endpoint resolves to no address".into()))?;
        let stream = TcpStream::connect_timeout(&addr, timeout).map_err(transport)?;
        stream.set_read_timeout(Some(timeout)).map_err(transport)?;
        stream.set_write_timeout(Some(timeout)).map_err(transport)?;
        let _ = stream.set_nodelay(true);
        Ok(Self {
            writer: stream.try_clone().map_err(transport)?,
            reader: BufReader::new(stream),
            states: PhaseStateSet::continuous(),
            count: 0,
        })
    }

    pub fn with_states(mut self, states: PhaseStateSet<T>) -> Self {
        self.states = states;
        self
    }

    fn exchange(&mut self, req: &Request) -> std::result::Result<Response, OracleError> {
        let io_err = |e: io::Error| match e.kind() {
            io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => OracleError::Timeout,
            _ => OracleError::Transport(e.to_string()),
        };
        self.writer
            .write_all(format!("{}\n", req.to_line()).as_bytes())
            .map_err(io_err)?;
        let mut line = String::new();
        let n = self.reader.read_line(&mut line).map_err(io_err)?;
        if n == 0 || !line.ends_with('\n') {
            return Err(OracleError::Transport("connection closed by server".into()));
        }
        match parse_response(line.trim_end_matches('\n'))? {
            Response::Err(code, text) => Err(OracleError::Remote { code, text }),
            r => Ok(r),
        }
    }

    fn encode(&self, profile: &PhaseProfile<T>) -> Payload {
        let g = profile.geometry();
        if let PhaseStateSet::Discrete { states } = &self.states {
            if states.len() == 2 {
                let exact: Option<Vec<usize>> = profile
                    .coefficients()
                    .iter()
                    .map(|c| states.iter().position(|s| s.coefficient() == *c))
                    .collect();
                if let Some(idx) = exact {
                    return Payload::OneBit(pack_hex(&to_row_major(&idx, g.rows_z, g.cols_y), 1));
                }
            }
        }
        let phases: Vec<f64> = profile.coefficients().iter().map(|&c| phase_of(c).as_f64()).collect();
        Payload::Phase(to_row_major(&phases, g.rows_z, g.cols_y))
    }

    /// Server-side query counter.
    pub fn remote_count(&mut self) -> std::result::Result<u64, OracleError> {
        match self.exchange(&Request::GetCount)? {
            Response::Count(n) => Ok(n),
            other => Err(OracleError::Protocol(format!("expected COUNT, got '{}'", other.to_line()))),
        }
    }

    /// Reseeds the server's noise stream and zeroes both counters.
    pub fn reset(&mut self, seed: u64) -> std::result::Result<(), OracleError> {
        match self.exchange(&Request::Reset(seed))? {
            Response::Ok => {
                self.count = 0;
                Ok(())
            }
            other => Err(OracleError::Protocol(format!("expected OK, got '{}'", other.to_line()))),
        }
    }
}

impl<T: RisFloat> PowerOracle<T> for RemoteOracle<T> {
    fn query(&mut self, profile: &PhaseProfile<T>) -> std::result::Result<T, OracleError> {
        self.count += 1;
        let req = Request::Set(self.encode(profile));
        match self.exchange(&req)? {
            Response::Pwr(p) => Ok(T::of(p)),
            other => Err(OracleError::Protocol(format!("expected PWR, got '{}'", other.to_line()))),
        }
    }

    fn query_count(&self) -> u64 {
        self.count
    }
}
