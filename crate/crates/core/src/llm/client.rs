use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Backend, BackendError, CacheRecord, LlmRequest, LlmResponse, ResponseCache};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub multiplier: f64,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            initial_backoff: Duration::from_millis(500),
            multiplier: 2.0,
            max_backoff: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            initial_backoff: Duration::ZERO,
            ..Self::default()
        }
    }

    /// Delay before attempt `attempt + 1` (attempts are 1-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = self.multiplier.powi(attempt.saturating_sub(1) as i32);
        self.initial_backoff.mul_f64(factor).min(self.max_backoff)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: u32,
    pub error: String,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("retries exhausted after {} attempts: {}", .attempts.len(), .attempts.last().map_or("", |a| a.error.as_str()))]
    Transport { attempts: Vec<AttemptRecord> },
    #[error("request rejected: {0}")]
    Fatal(String),
    #[error("response cache: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub calls: u64,
    pub cache_hits: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Default)]
struct Counters {
    calls: AtomicU64,
    cache_hits: AtomicU64,
    prompt_tokens: AtomicU64,
    completion_tokens: AtomicU64,
}

struct Gate {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn enter(&self) -> GateGuard<'_> {
        let mut n = self.active.lock().expect("gate");
        while *n >= self.limit {
            n = self.freed.wait(n).expect("gate");
        }
        *n += 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.active.lock().expect("gate") -= 1;
        self.0.freed.notify_one();
    }
}

/// Cache-first completion client, safe to share across threads.
pub struct LlmClient {
    backend: Arc<dyn Backend>,
    cache: ResponseCache,
    policy: RetryPolicy,
    gate: Gate,
    counters: Counters,
}

impl LlmClient {
    pub fn new(backend: Arc<dyn Backend>, cache: ResponseCache) -> Self {
        Self {
            backend,
            cache,
            policy: RetryPolicy::default(),
            gate: Gate { limit: 8, active: Mutex::new(0), freed: Condvar::new() },
            counters: Counters::default(),
        }
    }

    pub fn with_policy(mut self, policy: RetryPolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Bound on requests sent to the backend at once. Cache hits are not gated.
    pub fn with_max_in_flight(mut self, limit: usize) -> Self {
        self.gate.limit = limit.max(1);
        self
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    pub fn usage(&self) -> Usage {
        let c = &self.counters;
        Usage {
            calls: c.calls.load(Ordering::Relaxed),
            cache_hits: c.cache_hits.load(Ordering::Relaxed),
            prompt_tokens: c.prompt_tokens.load(Ordering::Relaxed),
            completion_tokens: c.completion_tokens.load(Ordering::Relaxed),
        }
    }

    pub fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        self.complete_with(request, &self.policy)
    }

    pub fn complete_with(
        &self,
        request: &LlmRequest,
        policy: &RetryPolicy,
    ) -> Result<LlmResponse, LlmError> {
        self.counters.calls.fetch_add(1, Ordering::Relaxed);
        let key = request.cache_key();
        if let Some(hit) = self.cache.get(&key) {
            self.counters.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(LlmResponse {
                text: hit.text,
                prompt_tokens: hit.prompt_tokens,
                completion_tokens: hit.completion_tokens,
                latency_ms: 0,
                cache_hit: true,
                attempts: 0,
                truncated: hit.truncated,
            });
        }

        let _slot = self.gate.enter();
        let started = Instant::now();
        let mut log = Vec::new();
        let max = policy.max_attempts.max(1);
        for attempt in 1..=max {
            match self.backend.send(request) {
                Ok(reply) => {
                    let c = &self.counters;
                    c.prompt_tokens.fetch_add(reply.prompt_tokens, Ordering::Relaxed);
                    c.completion_tokens.fetch_add(reply.completion_tokens, Ordering::Relaxed);
                    self.cache.insert(CacheRecord {
                        key,
                        request_digest: request.digest(),
                        text: reply.text.clone(),
                        prompt_tokens: reply.prompt_tokens,
                        completion_tokens: reply.completion_tokens,
                        truncated: reply.truncated,
                    })?;
                    return Ok(LlmResponse {
                        text: reply.text,
                        prompt_tokens: reply.prompt_tokens,
                        completion_tokens: reply.completion_tokens,
                        latency_ms: started.elapsed().as_millis() as u64,
                        cache_hit: false,
                        attempts: attempt,
                        truncated: reply.truncated,
                    });
                }
                Err(BackendError::Config(m)) => return Err(LlmError::Config(m)),
                Err(BackendError::Fatal(m)) => return Err(LlmError::Fatal(m)),
                Err(e) => {
                    log::warn!("attempt {attempt}/{max} failed: {e}");
                    log.push(AttemptRecord { attempt, error: e.to_string() });
                    if attempt < max {
                        std::thread::sleep(policy.backoff(attempt));
                    }
                }
            }
        }
        Err(LlmError::Transport { attempts: log })
    }
}
