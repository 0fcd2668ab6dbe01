//! Rate limiting and retry for the HTTP-backed clients.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, thiserror::Error)]
pub enum TransportError {
    /// Connection failures, timeouts, 429 and 5xx responses.
    #[error("transport failure: {0}")]
    Retryable(String),
    #[error("request rejected: {0}")]
    Fatal(String),
    #[error("no recorded response for key {0}")]
    MissingRecording(String),
}

impl TransportError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, TransportError::Retryable(_))
    }
}

impl From<reqwest::Error> for TransportError {
    fn from(e: reqwest::Error) -> Self {
        match e.status() {
            Some(s) if s.as_u16() == 429 || s.is_server_error() => TransportError::Retryable(e.to_string()),
            Some(_) => TransportError::Fatal(e.to_string()),
            None if e.is_decode() || e.is_builder() => TransportError::Fatal(e.to_string()),
            None => TransportError::Retryable(e.to_string()),
        }
    }
}

/// Token bucket shared by all threads issuing requests through one client.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    per_second: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    /// `per_second` tokens refill continuously up to `capacity`.
    pub fn new(per_second: f64, capacity: f64) -> Self {
        assert!(per_second > 0.0 && capacity >= 1.0, "rate and burst must be positive");
        Self {
            capacity,
            per_second,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    fn try_take(&self) -> Result<(), Duration> {
        let mut state = self.state.lock().expect("token bucket poisoned");
        let now = Instant::now();
        let (tokens, last) = *state;
        let tokens = (tokens + now.duration_since(last).as_secs_f64() * self.per_second).min(self.capacity);
        if tokens >= 1.0 {
            *state = (tokens - 1.0, now);
            Ok(())
        } else {
            *state = (tokens, now);
            Err(Duration::from_secs_f64((1.0 - tokens) / self.per_second))
        }
    }

    /// Blocks until a token is available.
    pub fn acquire(&self) {
        while let Err(wait) = self.try_take() {
            thread::sleep(wait);
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_attempts: 1,
            base_delay: Duration::ZERO,
        }
    }

    /// Runs `op`, retrying retryable failures with delays of
    /// `base_delay * 2^(attempt - 1)`.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, TransportError>) -> Result<T, TransportError> {
        let mut attempt = 1;
        loop {
            match op() {
                Err(e) if e.is_retryable() && attempt < self.max_attempts => {
                    let delay = self.base_delay * 2u32.pow(attempt - 1);
                    log::warn!("attempt {attempt} failed ({e}); retrying in {delay:?}");
                    thread::sleep(delay);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retries_transient_then_succeeds() {
        let policy = RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(1),
        };
        let mut calls = 0;
        let out = policy.run(|| {
            calls += 1;
            if calls < 3 {
                Err(TransportError::Retryable("flaky".into()))
            } else {
                Ok(calls)
            }
        });
        assert_eq!(out.unwrap(), 3);
    }

    #[test]
    fn gives_up_after_max_attempts() {
        let policy = RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(1),
        };
        let mut calls = 0;
        let out: Result<(), _> = policy.run(|| {
            calls += 1;
            Err(TransportError::Retryable("down".into()))
        });
        assert!(out.is_err());
        assert_eq!(calls, 3);
    }

    #[test]
    fn fatal_errors_not_retried() {
        let mut calls = 0;
        let out: Result<(), _> = RetryPolicy::default().run(|| {
            calls += 1;
            Err(TransportError::MissingRecording("k".into()))
        });
        assert!(out.is_err());
        assert_eq!(calls, 1);
    }

    #[test]
    fn bucket_throttles_after_burst() {
        let bucket = TokenBucket::new(200.0, 2.0);
        let start = Instant::now();
        for _ in 0..4 {
            bucket.acquire();
        }
        // Two tokens beyond the burst need ~10ms of refill.
        assert!(start.elapsed() >= Duration::from_millis(8));
    }
}
