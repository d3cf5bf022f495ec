//! Minimal HTTP server for exercising the judge client offline.
//!
//! Each connection carries one request; the handler receives the request
//! body and returns a status and response body.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde_json::{json, Value};

type Handler = dyn Fn(&str) -> (u16, String) + Send + Sync;

pub struct MockServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    hits: Arc<AtomicUsize>,
    thread: Option<JoinHandle<()>>,
}

/// Wraps assistant content in a chat-completion response body.
pub fn completion(content: &str) -> String {
    json!({ "choices": [{ "message": { "role": "assistant", "content": content } }] }).to_string()
}

/// User message of a chat-completion request body.
pub fn user_message(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    v["messages"]
        .as_array()?
        .iter()
        .rev()
        .find(|m| m["role"] == "user")?["content"]
        .as_str()
        .map(str::to_string)
}

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    }
}

fn serve(mut stream: TcpStream, handler: &Handler) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut len = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body)?;
    let (status, payload) = handler(&String::from_utf8_lossy(&body));
    write!(
        stream,
        "HTTP/1.1 {status} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        reason(status),
        payload.len()
    )?;
    stream.flush()
}

impl MockServer {
    /// Serves every request with `handler` until dropped.
    pub fn start<F>(handler: F) -> std::io::Result<Self>
    where
        F: Fn(&str) -> (u16, String) + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let hits = Arc::new(AtomicUsize::new(0));
        let (stop2, hits2) = (stop.clone(), hits.clone());
        let handler: Arc<Handler> = Arc::new(handler);
        let thread = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if stop2.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                hits2.fetch_add(1, Ordering::SeqCst);
                let h = handler.clone();
                std::thread::spawn(move || {
                    let _ = serve(stream, &*h);
                });
            }
        });
        Ok(MockServer {
            addr,
            stop,
            hits,
            thread: Some(thread),
        })
    }

    /// Replies from `script` in order; the last entry repeats once the
    /// script runs out.
    pub fn scripted(script: Vec<(u16, String)>) -> std::io::Result<Self> {
        assert!(!script.is_empty(), "script needs at least one reply");
        let pos = Mutex::new(0usize);
        MockServer::start(move |_| {
            let mut i = pos.lock().expect("script position");
            let reply = script[(*i).min(script.len() - 1)].clone();
            *i += 1;
            reply
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }

    /// Number of connections accepted so far.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
