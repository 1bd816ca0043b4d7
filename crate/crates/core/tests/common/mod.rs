//! Local chat-completion stub and response fixtures shared by the
//! integration tests.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

type Handler = dyn Fn(usize, &str) -> (u16, String) + Send + Sync;

pub struct Stub {
    pub base_url: String,
    hits: Arc<AtomicUsize>,
}

impl Stub {
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

/// Serves `POST /v1/chat/completions` on an ephemeral port. The handler gets
/// the zero-based request index and the request body and returns a status
/// and the assistant text (or an error body for non-2xx statuses).
pub fn serve(handler: impl Fn(usize, &str) -> (u16, String) + Send + Sync + 'static) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub");
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let handler: Arc<Handler> = Arc::new(handler);
    let counter = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let handler = handler.clone();
            let counter = counter.clone();
            thread::spawn(move || {
                let _ = handle(stream, &*handler, &counter);
            });
        }
    });
    Stub {
        base_url: format!("http://{addr}/v1"),
        hits,
    }
}

fn handle(stream: TcpStream, handler: &Handler, counter: &AtomicUsize) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut length = 0usize;
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
                length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body)?;
    let index = counter.fetch_add(1, Ordering::SeqCst);
    let (status, text) = handler(index, &String::from_utf8_lossy(&body));
    let payload = if (200..300).contains(&status) {
        serde_json::json!({
            "id": format!("stub-{index}"),
            "object": "chat.completion",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}]
        })
        .to_string()
    } else {
        serde_json::json!({"error": {"message": text}}).to_string()
    };
    let mut out = stream;
    write!(
        out,
        "HTTP/1.1 {status} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    out.flush()
}

const HEADER: &str = "Trial\tAge\tGender\tMajor\tYear\tChatGPT Exp.\tPU1\tPU2\tPU3\tPU4\tPU5\tPU6\tPEOU1\tPEOU2\tPEOU3\tPEOU4\tPEOU5\tPEOU6\tCPLAY1\tCPLAY2\tCPLAY3\tCPLAY4\tBI1\tBI2";
const MAJORS: [&str; 6] = ["CS", "Math", "Eng", "Bio", "Bus", "Psych"];

fn mix(a: u64, b: u64, c: u64) -> usize {
    let mut z = a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ c.wrapping_add(0x94D0_49BB_1331_11EB);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (z ^ (z >> 31)) as usize
}

/// One study-1 data line in the tab-separated reply layout.
pub fn a2_row(trial: usize, salt: usize) -> String {
    let mut cells = vec![
        trial.to_string(),
        (18 + (trial + salt) % 6).to_string(),
        (1 + (trial + salt) % 2).to_string(),
        MAJORS[(trial * 7 + salt) % MAJORS.len()].to_string(),
        (1 + (trial + salt) % 4).to_string(),
        ((trial * 3 + salt) % 5).to_string(),
    ];
    let base = 2 + mix(trial as u64, salt as u64, 99) % 5;
    for j in 0..18 {
        let noise = mix(trial as u64, salt as u64, j) % 3;
        cells.push((base + noise - 1).clamp(1, 7).to_string());
    }
    cells.join("\t")
}

/// A complete reply: preamble, header, `rows` data lines, closing remark.
pub fn a2_reply(rows: usize, salt: usize) -> String {
    let mut s =
        String::from("Certainly! Here's a table with student samples and their responses on a 7-point scale.\n\n");
    s.push_str(HEADER);
    s.push('\n');
    for t in 1..=rows {
        s.push_str(&a2_row(t, salt));
        s.push('\n');
    }
    s.push_str("\nFeel free to copy this table into Excel.\n");
    s
}

/// A reply with `good` valid lines plus one out-of-scale line and one short line.
pub fn a2_reply_with_junk(good: usize, salt: usize) -> String {
    let mut s = a2_reply(good, salt);
    let mut bad = a2_row(good + 1, salt).replace("\t7\t", "\t9\t");
    if !bad.contains("\t9\t") {
        bad.push_str("\t9");
    }
    s.push_str(&bad);
    s.push('\n');
    s.push_str("99\t20\t1\tCS\t2\t1\t5\t4\n");
    s
}
