//! Chat-completion client, transcript log, batched generation and offline replay.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::parse::parse_table;
use super::prompt::{render_prompt, PromptTemplate};
use crate::error::{Error, IoContext, Result};
use crate::model::ModelSpec;
use crate::panel::{Panel, Provenance, RespondentRow};

pub const API_KEY_VAR: &str = "CONSTRUCT_FORGE_API_KEY";

const SYSTEM_PROMPT: &str = "You are a helpful assistant.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct LlmSettings {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: u64,
    /// HTTP retries per request and re-prompts per batch.
    pub retry_limit: usize,
    /// First backoff delay; doubles on each retry.
    pub backoff_ms: u64,
    /// Batches in flight at once.
    pub parallelism: usize,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-3.5-turbo".into(),
            temperature: 1.0,
            timeout_secs: 120,
            retry_limit: 3,
            backoff_ms: 1000,
            parallelism: 4,
        }
    }
}

/// One HTTP attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: u64,
    pub batch: usize,
    pub round: usize,
    pub attempt: usize,
    pub rows_per_batch: usize,
    pub sent_ms: u64,
    pub received_ms: u64,
    pub status: Option<u16>,
    pub request: String,
    pub response: Option<String>,
    pub error: Option<String>,
    /// Parse outcome of a successful completion.
    pub accepted: Option<usize>,
    pub rejected: Option<usize>,
}

impl TranscriptEntry {
    fn is_completion(&self) -> bool {
        matches!(self.status, Some(200..=299)) && self.error.is_none() && self.response.is_some()
    }
}

/// Append-only, totally ordered log shared by concurrent batches.
#[derive(Debug, Default)]
pub struct Transcript {
    entries: Mutex<Vec<TranscriptEntry>>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    fn record(&self, mut entry: TranscriptEntry) -> u64 {
        let mut entries = self.entries.lock().expect("transcript lock");
        entry.seq = entries.len() as u64;
        entries.push(entry);
        entries.len() as u64 - 1
    }

    fn annotate(&self, seq: u64, accepted: usize, rejected: usize) {
        let mut entries = self.entries.lock().expect("transcript lock");
        let e = &mut entries[seq as usize];
        e.accepted = Some(accepted);
        e.rejected = Some(rejected);
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().expect("transcript lock").clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("transcript lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes one JSON record per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for e in self.entries() {
            out.push_str(&serde_json::to_string(&e)?);
            out.push('\n');
        }
        fs::write(path, out).at(path)
    }

    pub fn load(path: &Path) -> Result<Vec<TranscriptEntry>> {
        let file = fs::File::open(path).at(path)?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.at(path)?;
            if line.trim().is_empty() {
                continue;
            }
            let e: TranscriptEntry =
                serde_json::from_str(&line).map_err(|err| Error::Transcript(format!("line {}: {err}", i + 1)))?;
            entries.push(e);
        }
        Ok(entries)
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequestContext {
    pub batch: usize,
    pub round: usize,
    pub rows_per_batch: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    /// Transcript entry holding the successful attempt.
    pub seq: u64,
}

pub struct LlmClient {
    http: reqwest::blocking::Client,
    key: String,
    settings: LlmSettings,
}

impl LlmClient {
    /// Reads the credential from `CONSTRUCT_FORGE_API_KEY`.
    pub fn from_env(settings: LlmSettings) -> Result<Self> {
        match std::env::var(API_KEY_VAR) {
            Ok(k) if !k.trim().is_empty() => Self::with_key(settings, k.trim()),
            _ => Err(Error::MissingCredential),
        }
    }

    pub fn with_key(settings: LlmSettings, key: &str) -> Result<Self> {
        if key.is_empty() {
            return Err(Error::MissingCredential);
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(settings.timeout_secs))
            .build()
            .map_err(|e| Error::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(LlmClient {
            http,
            key: key.to_string(),
            settings,
        })
    }

    pub fn settings(&self) -> &LlmSettings {
        &self.settings
    }

    /// Sends one prompt, retrying 429/5xx and transport failures with
    /// exponential backoff. Every attempt is logged to `transcript`.
    pub fn complete(&self, prompt: &str, transcript: &Transcript, ctx: RequestContext) -> Result<Completion> {
        let url = format!("{}/chat/completions", self.settings.base_url.trim_end_matches('/'));
        let body = json!({
            "model": self.settings.model,
            "temperature": self.settings.temperature,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": prompt},
            ],
        });
        let attempts = self.settings.retry_limit + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.settings.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(delay));
            }
            let mut entry = TranscriptEntry {
                seq: 0,
                batch: ctx.batch,
                round: ctx.round,
                attempt,
                rows_per_batch: ctx.rows_per_batch,
                sent_ms: now_ms(),
                received_ms: 0,
                status: None,
                request: prompt.to_string(),
                response: None,
                error: None,
                accepted: None,
                rejected: None,
            };
            let sent = self.http.post(&url).bearer_auth(&self.key).json(&body).send();
            let (status, text) = match sent.and_then(|r| {
                let s = r.status().as_u16();
                r.text().map(|t| (s, t))
            }) {
                Ok(ok) => ok,
                Err(e) => {
                    last = e.to_string();
                    entry.received_ms = now_ms();
                    entry.error = Some(last.clone());
                    transcript.record(entry);
                    continue;
                }
            };
            entry.received_ms = now_ms();
            entry.status = Some(status);
            match status {
                200..=299 => match assistant_text(&text) {
                    Some(content) => {
                        entry.response = Some(content.clone());
                        let seq = transcript.record(entry);
                        if content.trim().is_empty() {
                            return Err(Error::EmptyCompletion);
                        }
                        return Ok(Completion { text: content, seq });
                    }
                    None => {
                        entry.error = Some(format!("malformed completion body: {text}"));
                        transcript.record(entry);
                        return Err(Error::Transport {
                            attempts: attempt + 1,
                            message: "malformed completion body".into(),
                        });
                    }
                },
                401 | 403 => {
                    entry.error = Some(text);
                    transcript.record(entry);
                    return Err(Error::Auth(status));
                }
                429 | 500..=599 => {
                    last = format!("HTTP {status}");
                    entry.error = Some(text);
                    transcript.record(entry);
                }
                _ => {
                    entry.error = Some(text);
                    transcript.record(entry);
                    return Err(Error::Transport {
                        attempts: attempt + 1,
                        message: format!("HTTP {status}"),
                    });
                }
            }
        }
        Err(Error::Transport {
            attempts,
            message: last,
        })
    }
}

fn assistant_text(body: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(body).ok()?;
    match v.pointer("/choices/0/message")?.get("content")? {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Null => Some(String::new()),
        _ => None,
    }
}

/// Single prompt round trip using the environment credential.
pub fn call_llm(prompt: &str, settings: &LlmSettings, transcript: &Transcript) -> Result<String> {
    let client = LlmClient::from_env(settings.clone())?;
    let ctx = RequestContext {
        batch: 0,
        round: 0,
        rows_per_batch: 0,
    };
    client.complete(prompt, transcript, ctx).map(|c| c.text)
}

/// Keeps the candidate with the most rows (earliest on ties), cut to the
/// batch size. Shared by live generation and replay.
fn select_batch(batch: usize, candidates: Vec<Vec<RespondentRow>>, rows_per_batch: usize) -> Vec<RespondentRow> {
    let mut best: Vec<RespondentRow> = Vec::new();
    let mut found = false;
    for c in candidates {
        if !found || c.len() > best.len() {
            best = c;
            found = true;
        }
    }
    best.truncate(rows_per_batch);
    if best.len() < rows_per_batch {
        log::warn!(
            "batch {batch}: accepted {} of {rows_per_batch} rows after re-prompting",
            best.len()
        );
    }
    best
}

fn parse_rows(text: &str, spec: &ModelSpec) -> Result<(Vec<RespondentRow>, usize)> {
    match parse_table(text, spec) {
        Ok(out) => Ok((out.rows, out.rejected.len())),
        Err(Error::NoRows { rejected }) => Ok((Vec::new(), rejected)),
        Err(e) => Err(e),
    }
}

fn run_batch(
    client: &LlmClient,
    prompt: &str,
    spec: &ModelSpec,
    rows_per_batch: usize,
    transcript: &Transcript,
    batch: usize,
) -> Result<Vec<RespondentRow>> {
    let mut candidates = Vec::new();
    for round in 0..=client.settings.retry_limit {
        let ctx = RequestContext {
            batch,
            round,
            rows_per_batch,
        };
        let c = client.complete(prompt, transcript, ctx)?;
        let (rows, rejected) = parse_rows(&c.text, spec)?;
        transcript.annotate(c.seq, rows.len(), rejected);
        let full = rows.len() >= rows_per_batch;
        if !full {
            log::info!("batch {batch} round {round}: {} rows, re-prompting", rows.len());
        }
        candidates.push(rows);
        if full {
            break;
        }
    }
    Ok(select_batch(batch, candidates, rows_per_batch))
}

/// Runs `batches` prompts (concurrently, up to the configured parallelism)
/// and concatenates the accepted rows in batch order.
pub fn generate_llm(
    client: &LlmClient,
    template: &PromptTemplate,
    spec: Arc<ModelSpec>,
    batches: usize,
    transcript: &Transcript,
) -> Result<Panel> {
    let prompt = render_prompt(template)?;
    let rows_per_batch = template.rows_per_batch;
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let results: Mutex<Vec<Option<Result<Vec<RespondentRow>>>>> = Mutex::new((0..batches).map(|_| None).collect());
    let workers = client.settings.parallelism.clamp(1, batches.max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let b = next.fetch_add(1, Ordering::SeqCst);
                if b >= batches {
                    break;
                }
                let r = run_batch(client, &prompt, &spec, rows_per_batch, transcript, b);
                if r.is_err() {
                    abort.store(true, Ordering::SeqCst);
                }
                results.lock().expect("results lock")[b] = Some(r);
            });
        }
    });
    let mut rows = Vec::new();
    for r in results.into_inner().expect("results lock") {
        match r {
            Some(Ok(batch)) => rows.extend(batch),
            Some(Err(e)) => return Err(e),
            None => {}
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyPanel);
    }
    Panel::new(
        spec,
        rows,
        Provenance::Llm {
            transcript: None,
            batches,
        },
    )
}

/// Rebuilds the panel of a recorded run without network access.
pub fn replay_transcript(entries: &[TranscriptEntry], spec: Arc<ModelSpec>) -> Result<Panel> {
    let batches = entries.iter().map(|e| e.batch + 1).max().unwrap_or(0);
    if batches == 0 {
        return Err(Error::Transcript("no entries".into()));
    }
    let mut rows = Vec::new();
    for b in 0..batches {
        let mut done: Vec<&TranscriptEntry> = entries.iter().filter(|e| e.batch == b && e.is_completion()).collect();
        if done.is_empty() {
            return Err(Error::Transcript(format!("batch {b} has no completed response")));
        }
        done.sort_by_key(|e| (e.round, e.attempt));
        let rows_per_batch = done[0].rows_per_batch;
        let mut candidates = Vec::new();
        for e in done {
            candidates.push(parse_rows(e.response.as_deref().unwrap_or(""), &spec)?.0);
        }
        rows.extend(select_batch(b, candidates, rows_per_batch));
    }
    if rows.is_empty() {
        return Err(Error::EmptyPanel);
    }
    Panel::new(
        spec,
        rows,
        Provenance::Llm {
            transcript: None,
            batches,
        },
    )
}

pub fn replay_file(path: &Path, spec: Arc<ModelSpec>) -> Result<Panel> {
    let panel = replay_transcript(&Transcript::load(path)?, spec)?;
    let batches = match panel.provenance() {
        Provenance::Llm { batches, .. } => *batches,
        _ => 0,
    };
    Ok(panel.with_provenance(Provenance::Llm {
        transcript: Some(path.to_path_buf()),
        batches,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: i32) -> RespondentRow {
        RespondentRow {
            demographics: vec![],
            responses: vec![v],
        }
    }

    #[test]
    fn selection_prefers_longest_then_earliest() {
        let c = vec![vec![row(1)], vec![row(2), row(3)], vec![row(4), row(5)]];
        assert_eq!(select_batch(0, c, 20), vec![row(2), row(3)]);
        let c = vec![vec![row(1), row(2), row(3)]];
        assert_eq!(select_batch(0, c, 2).len(), 2);
        assert!(select_batch(0, vec![vec![], vec![]], 2).is_empty());
    }

    #[test]
    fn completion_body() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}]}"#;
        assert_eq!(assistant_text(body).as_deref(), Some("hi"));
        assert_eq!(assistant_text("{}"), None);
        assert_eq!(assistant_text("not json"), None);
    }

    #[test]
    fn transcript_roundtrip() {
        let t = Transcript::new();
        let e = TranscriptEntry {
            seq: 9,
            batch: 1,
            round: 0,
            attempt: 0,
            rows_per_batch: 20,
            sent_ms: 1,
            received_ms: 2,
            status: Some(200),
            request: "p".into(),
            response: Some("r\nwith newline".into()),
            error: None,
            accepted: None,
            rejected: None,
        };
        assert_eq!(t.record(e.clone()), 0);
        t.annotate(0, 3, 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        t.save(&path).unwrap();
        let back = Transcript::load(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].seq, 0);
        assert_eq!(back[0].accepted, Some(3));
        assert_eq!(back[0].response, e.response);
    }
}
