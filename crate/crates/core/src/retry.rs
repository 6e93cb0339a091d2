use std::thread;
use std::time::Duration;

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            backoff: Duration::from_millis(500),
        }
    }
}

pub enum Attempt<T> {
    Done(T),
    /// Transport or 5xx failure.
    Retry(String),
    /// Not worth retrying.
    Fail(String),
}

/// Runs `op` until it succeeds, fails permanently, or the attempts run out.
/// Errors carry the number of attempts made.
pub fn with_retries<T>(
    policy: &RetryPolicy,
    mut op: impl FnMut() -> Attempt<T>,
) -> Result<T, (u32, String)> {
    let attempts = policy.attempts.max(1);
    let mut delay = policy.backoff;
    for n in 1..=attempts {
        match op() {
            Attempt::Done(v) => return Ok(v),
            Attempt::Fail(msg) => return Err((n, msg)),
            Attempt::Retry(msg) => {
                if n == attempts {
                    return Err((n, msg));
                }
                log::warn!("attempt {n}/{attempts} failed: {msg}; retrying in {delay:?}");
                thread::sleep(delay);
                delay *= 2;
            }
        }
    }
    unreachable!()
}
