//! An in-process inference server that serves a [`MockBackend`] over the
//! remote wire protocol. Used by the conformance tests and by
//! `minuted serve-mock`; failures can be injected per request.

use std::collections::VecDeque;
use std::io::{self, ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::Serialize;

use super::remote::{
    ClassifyRequest, ClassifyResponse, CountTokensRequest, CountTokensResponse, EmbedRequest,
    EmbedTextResponse, EmbedTokensResponse, Granularity, SummarizeRequest, SummarizeResponse,
    CLASSIFY_PATH, COUNT_TOKENS_PATH, EMBED_PATH, SUMMARIZE_PATH,
};
use super::{ActionClassifier, Embedder, MockBackend, Summarizer, SummaryParams, TokenCounter};
use crate::error::Error;

const MAX_HEADER_BYTES: usize = 64 * 1024;
const MAX_BODY_BYTES: usize = 64 * 1024 * 1024;
/// How often idle connections look at the shutdown flag.
const POLL: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedRequest {
    pub path: String,
    pub body: String,
}

#[derive(Debug)]
struct StubState {
    backend: MockBackend,
    faults: Mutex<VecDeque<u16>>,
    log: Mutex<Vec<RecordedRequest>>,
    stopping: AtomicBool,
}

/// HTTP/1.1 server with one thread per connection, so pooled keep-alive
/// clients never starve each other.
pub struct StubServer {
    addr: SocketAddr,
    state: Arc<StubState>,
    acceptor: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Listens on an ephemeral localhost port.
    pub fn start(backend: MockBackend) -> io::Result<Self> {
        StubServer::bind("127.0.0.1:0", backend)
    }

    pub fn bind(addr: &str, backend: MockBackend) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let state = Arc::new(StubState {
            backend,
            faults: Mutex::default(),
            log: Mutex::default(),
            stopping: AtomicBool::new(false),
        });
        let shared = state.clone();
        let acceptor = thread::spawn(move || {
            for stream in listener.incoming() {
                if shared.stopping.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let state = shared.clone();
                thread::spawn(move || {
                    let _ = serve_connection(stream, &state);
                });
            }
        });
        Ok(StubServer {
            addr,
            state,
            acceptor: Some(acceptor),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// The next `count` requests are answered with `status` and an error body.
    pub fn fail_next(&self, status: u16, count: usize) {
        let mut faults = self.state.faults.lock().expect("fault queue poisoned");
        faults.extend(std::iter::repeat_n(status, count));
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.state.log.lock().expect("request log poisoned").clone()
    }

    pub fn clear_requests(&self) {
        self.state.log.lock().expect("request log poisoned").clear();
    }

    /// Blocks until the server shuts down.
    pub fn wait(mut self) {
        if let Some(acceptor) = self.acceptor.take() {
            let _ = acceptor.join();
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.state.stopping.store(true, Ordering::SeqCst);
        if let Some(acceptor) = self.acceptor.take() {
            // Wake the blocking accept.
            let _ = TcpStream::connect(self.addr);
            let _ = acceptor.join();
        }
    }
}

struct Parsed {
    method: String,
    path: String,
    body_start: usize,
    body_len: usize,
    close: bool,
}

fn parse_head(buf: &[u8]) -> Result<Option<Parsed>, &'static str> {
    let mut headers = [httparse::EMPTY_HEADER; 32];
    let mut req = httparse::Request::new(&mut headers);
    let body_start = match req.parse(buf) {
        Ok(httparse::Status::Complete(n)) => n,
        Ok(httparse::Status::Partial) => return Ok(None),
        Err(_) => return Err("malformed request head"),
    };
    let mut body_len = 0;
    let mut close = req.version == Some(0);
    for h in req.headers.iter() {
        let value = std::str::from_utf8(h.value)
            .map_err(|_| "non-UTF-8 header")?
            .trim();
        if h.name.eq_ignore_ascii_case("content-length") {
            body_len = value.parse().map_err(|_| "bad Content-Length")?;
        } else if h.name.eq_ignore_ascii_case("transfer-encoding") {
            return Err("chunked bodies are not supported");
        } else if h.name.eq_ignore_ascii_case("connection") {
            close = value.eq_ignore_ascii_case("close");
        }
    }
    if body_len > MAX_BODY_BYTES {
        return Err("body too large");
    }
    Ok(Some(Parsed {
        method: req.method.unwrap_or_default().to_string(),
        path: req.path.unwrap_or_default().to_string(),
        body_start,
        body_len,
        close,
    }))
}

/// Reads more bytes into `buf`. `Ok(false)` means the peer closed or the
/// server is stopping.
fn fill(stream: &mut TcpStream, buf: &mut Vec<u8>, state: &StubState) -> io::Result<bool> {
    let mut chunk = [0u8; 8192];
    loop {
        if state.stopping.load(Ordering::SeqCst) {
            return Ok(false);
        }
        match stream.read(&mut chunk) {
            Ok(0) => return Ok(false),
            Ok(n) => {
                buf.extend_from_slice(&chunk[..n]);
                return Ok(true);
            }
            Err(e)
                if matches!(
                    e.kind(),
                    ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted
                ) => {}
            Err(e) => return Err(e),
        }
    }
}

fn serve_connection(mut stream: TcpStream, state: &StubState) -> io::Result<()> {
    stream.set_read_timeout(Some(POLL))?;
    stream.set_nodelay(true)?;
    let mut buf = Vec::new();
    loop {
        let head = loop {
            match parse_head(&buf) {
                Ok(Some(head)) => break head,
                Ok(None) if buf.len() > MAX_HEADER_BYTES => {
                    return write_response(
                        &mut stream,
                        431,
                        &error_body("request head too large"),
                        true,
                    );
                }
                Ok(None) => {
                    if !fill(&mut stream, &mut buf, state)? {
                        return Ok(());
                    }
                }
                Err(msg) => return write_response(&mut stream, 400, &error_body(msg), true),
            }
        };
        let end = head.body_start + head.body_len;
        while buf.len() < end {
            if !fill(&mut stream, &mut buf, state)? {
                return Ok(());
            }
        }
        let body = String::from_utf8_lossy(&buf[head.body_start..end]).into_owned();
        buf.drain(..end);
        let (status, payload) = respond(state, &head.method, &head.path, body);
        write_response(&mut stream, status, &payload, head.close)?;
        if head.close {
            return Ok(());
        }
    }
}

fn respond(state: &StubState, method: &str, path: &str, body: String) -> (u16, String) {
    state
        .log
        .lock()
        .expect("request log poisoned")
        .push(RecordedRequest {
            path: path.to_string(),
            body: body.clone(),
        });
    let fault = state
        .faults
        .lock()
        .expect("fault queue poisoned")
        .pop_front();
    match fault {
        Some(code) => (code, error_body("injected failure")),
        None if method != "POST" => (405, error_body("use POST")),
        None => handle(&state.backend, path, &body),
    }
}

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        405 => "Method Not Allowed",
        413 => "Payload Too Large",
        422 => "Unprocessable Entity",
        429 => "Too Many Requests",
        431 => "Request Header Fields Too Large",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Unknown",
    }
}

fn write_response(stream: &mut TcpStream, status: u16, body: &str, close: bool) -> io::Result<()> {
    let connection = if close { "close" } else { "keep-alive" };
    let head = format!(
        "HTTP/1.1 {status} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: {connection}\r\n\r\n",
        reason(status),
        body.len()
    );
    stream.write_all(head.as_bytes())?;
    stream.write_all(body.as_bytes())?;
    stream.flush()
}

fn error_body(message: &str) -> String {
    serde_json::json!({ "error": message }).to_string()
}

fn ok<T: Serialize>(value: &T) -> (u16, String) {
    (
        200,
        serde_json::to_string(value).expect("serializable response"),
    )
}

fn fail(err: Error) -> (u16, String) {
    let status = match err {
        Error::InputTooLong { .. } => 413,
        Error::InvalidInput(_) => 422,
        _ => 500,
    };
    (status, error_body(&err.to_string()))
}

/// Routes one request body to the mock backend. Returns the status code and
/// the JSON response body.
pub fn handle(backend: &MockBackend, path: &str, body: &str) -> (u16, String) {
    fn parse<T: serde::de::DeserializeOwned>(body: &str) -> Result<T, (u16, String)> {
        serde_json::from_str(body).map_err(|e| (400, error_body(&e.to_string())))
    }
    let result = match path {
        COUNT_TOKENS_PATH => parse::<CountTokensRequest>(body).map(|req| {
            match req.texts.iter().map(|t| backend.count_tokens(t)).collect() {
                Ok(counts) => ok(&CountTokensResponse { counts }),
                Err(e) => fail(e),
            }
        }),
        EMBED_PATH => parse::<EmbedRequest>(body).map(|req| match req.granularity {
            Granularity::Text => {
                let vectors: Result<Vec<Vec<f64>>, Error> = req
                    .texts
                    .iter()
                    .map(|t| backend.embed_text(t).map(Into::into))
                    .collect();
                match vectors {
                    Ok(vectors) => ok(&EmbedTextResponse { vectors }),
                    Err(e) => fail(e),
                }
            }
            Granularity::Tokens => {
                let vectors: Result<Vec<Vec<Vec<f64>>>, Error> = req
                    .texts
                    .iter()
                    .map(|t| {
                        backend
                            .embed_tokens(t)
                            .map(|vs| vs.into_iter().map(Into::into).collect())
                    })
                    .collect();
                match vectors {
                    Ok(vectors) => ok(&EmbedTokensResponse { vectors }),
                    Err(e) => fail(e),
                }
            }
        }),
        SUMMARIZE_PATH => parse::<SummarizeRequest>(body).map(|req| {
            let params = SummaryParams {
                min_tokens: req.min_tokens,
                max_tokens: req.max_tokens,
            };
            match params
                .validate()
                .and_then(|_| backend.summarize(&req.text, params))
            {
                Ok(summary) => ok(&SummarizeResponse { summary }),
                Err(e) => fail(e),
            }
        }),
        CLASSIFY_PATH => {
            parse::<ClassifyRequest>(body).map(|req| match backend.classify_batch(&req.sentences) {
                Ok(labels) => ok(&ClassifyResponse {
                    labels: labels.iter().map(|l| l.label.wire()).collect(),
                    scores: labels.iter().map(|l| l.confidence).collect(),
                }),
                Err(e) => fail(e),
            })
        }
        _ => Ok((404, error_body("unknown endpoint"))),
    };
    result.unwrap_or_else(|e| e)
}
