//! Minimal HTTP/1.1 server standing in for chat-completions endpoints.
//!
//! Each endpoint is addressed by the first path segment:
//! `http://127.0.0.1:<port>/<route>/v1/chat/completions`.

#![allow(dead_code)]

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

#[derive(Debug, Clone)]
pub enum Behavior {
    /// Always reply with this text.
    Fixed(String),
    /// Reply with the text followed by the prompt.
    Echo(String),
    /// Reply with `n` words from the list, chosen by hashing the prompt.
    Words(Vec<String>, usize),
    /// Answer 500 for the first `n` requests, then behave as `then`.
    FailFirst(usize, Box<Behavior>),
    /// Always answer 500.
    Down,
}

#[derive(Debug, Clone)]
pub struct SeenRequest {
    pub route: String,
    pub authorization: Option<String>,
    pub body: serde_json::Value,
}

struct State {
    routes: HashMap<String, Behavior>,
    per_route: Mutex<HashMap<String, usize>>,
    seen: Mutex<Vec<SeenRequest>>,
    requests: AtomicUsize,
}

pub struct MockServer {
    port: u16,
    state: Arc<State>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(routes: Vec<(&str, Behavior)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
        let port = listener.local_addr().unwrap().port();
        let state = Arc::new(State {
            routes: routes.into_iter().map(|(r, b)| (r.to_string(), b)).collect(),
            per_route: Mutex::new(HashMap::new()),
            seen: Mutex::new(Vec::new()),
            requests: AtomicUsize::new(0),
        });
        let stop = Arc::new(AtomicBool::new(false));
        let handle = {
            let state = Arc::clone(&state);
            let stop = Arc::clone(&stop);
            std::thread::spawn(move || {
                for conn in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(conn) = conn else { continue };
                    let state = Arc::clone(&state);
                    std::thread::spawn(move || {
                        let _ = serve(conn, &state);
                    });
                }
            })
        };
        Self {
            port,
            state,
            stop,
            handle: Some(handle),
        }
    }

    pub fn base_url(&self, route: &str) -> String {
        format!("http://127.0.0.1:{}/{route}/v1", self.port)
    }

    /// Total HTTP requests received so far.
    pub fn requests(&self) -> usize {
        self.state.requests.load(Ordering::SeqCst)
    }

    pub fn seen(&self) -> Vec<SeenRequest> {
        self.state.seen.lock().unwrap().clone()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(("127.0.0.1", self.port));
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(conn: TcpStream, state: &State) -> std::io::Result<()> {
    let mut reader = BufReader::new(conn.try_clone()?);
    let mut request_line = String::new();
    if reader.read_line(&mut request_line)? == 0 {
        return Ok(());
    }
    let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
    let mut content_length = 0usize;
    let mut chunked = false;
    let mut authorization = None;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            let v = v.trim();
            match k.to_ascii_lowercase().as_str() {
                "content-length" => content_length = v.parse().unwrap_or(0),
                "transfer-encoding" => chunked = v.eq_ignore_ascii_case("chunked"),
                "authorization" => authorization = Some(v.to_string()),
                _ => {}
            }
        }
    }
    let body = if chunked {
        read_chunked(&mut reader)?
    } else {
        let mut b = vec![0u8; content_length];
        reader.read_exact(&mut b)?;
        b
    };
    state.requests.fetch_add(1, Ordering::SeqCst);

    let route = path.trim_start_matches('/').split('/').next().unwrap_or("").to_string();
    let body: serde_json::Value = serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
    let prompt = body["messages"][0]["content"].as_str().unwrap_or("").to_string();
    state.seen.lock().unwrap().push(SeenRequest {
        route: route.clone(),
        authorization,
        body,
    });
    let nth = {
        let mut counts = state.per_route.lock().unwrap();
        let c = counts.entry(route.clone()).or_insert(0);
        *c += 1;
        *c - 1
    };

    let reply = match state.routes.get(&route) {
        None => Err(404),
        Some(b) => respond(b, nth, &prompt),
    };
    let (status, payload) = match reply {
        Ok(text) => (
            "200 OK",
            serde_json::json!({
                "id": "mock",
                "object": "chat.completion",
                "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}]
            })
            .to_string(),
        ),
        Err(404) => ("404 Not Found", r#"{"error":"no such route"}"#.to_string()),
        Err(_) => ("500 Internal Server Error", r#"{"error":"scripted failure"}"#.to_string()),
    };
    let mut conn = conn;
    write!(
        conn,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    conn.flush()
}

fn respond(b: &Behavior, nth: usize, prompt: &str) -> Result<String, u16> {
    match b {
        Behavior::Fixed(t) => Ok(t.clone()),
        Behavior::Echo(t) => Ok(format!("{t} {prompt}")),
        Behavior::Words(words, n) => {
            let mut h: u64 = 0xcbf2_9ce4_8422_2325;
            let mut out = Vec::with_capacity(*n);
            for b in prompt.bytes() {
                h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
            }
            for _ in 0..*n {
                h = h.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                out.push(words[(h >> 33) as usize % words.len()].as_str());
            }
            Ok(out.join(" "))
        }
        Behavior::FailFirst(n, then) if nth >= *n => respond(then, nth, prompt),
        Behavior::FailFirst(..) | Behavior::Down => Err(500),
    }
}

fn read_chunked<R: BufRead>(r: &mut R) -> std::io::Result<Vec<u8>> {
    let mut out = Vec::new();
    loop {
        let mut size = String::new();
        r.read_line(&mut size)?;
        let n = usize::from_str_radix(size.trim().split(';').next().unwrap_or("0"), 16).unwrap_or(0);
        if n == 0 {
            let mut trailer = String::new();
            r.read_line(&mut trailer)?;
            return Ok(out);
        }
        let mut chunk = vec![0u8; n + 2];
        r.read_exact(&mut chunk)?;
        out.extend_from_slice(&chunk[..n]);
    }
}
