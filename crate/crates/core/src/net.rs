//! Small blocking-HTTP helpers shared by the LLM and gazetteer clients.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;

/// Spaces calls at least `1 / rate` seconds apart across all threads.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl RateLimiter {
    /// `None` when `per_second` is not a positive finite number.
    pub fn per_second(per_second: f64) -> Option<Self> {
        (per_second.is_finite() && per_second > 0.0).then(|| Self {
            interval: Duration::from_secs_f64(1.0 / per_second),
            next_slot: Mutex::new(None),
        })
    }

    /// Blocks until the caller's slot comes up.
    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = next.map_or(now, |t| t.max(now));
            *next = Some(slot + self.interval);
            slot.saturating_duration_since(now)
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

/// Exponential backoff with multiplicative jitter.
#[derive(Debug, Clone, Copy)]
pub struct Backoff {
    pub base: Duration,
    pub factor: f64,
    /// Upper bound of the random extra fraction added to each delay.
    pub jitter: f64,
}

impl Default for Backoff {
    fn default() -> Self {
        Self {
            base: Duration::from_secs(1),
            factor: 2.0,
            jitter: 0.25,
        }
    }
}

impl Backoff {
    /// Delay before retry number `retry` (1-based), without jitter.
    pub fn nominal_delay(&self, retry: u32) -> Duration {
        self.base
            .mul_f64(self.factor.powi(retry.saturating_sub(1) as i32))
    }

    pub fn delay(&self, retry: u32) -> Duration {
        let extra = if self.jitter > 0.0 {
            rand::thread_rng().gen_range(0.0..self.jitter)
        } else {
            0.0
        };
        self.nominal_delay(retry).mul_f64(1.0 + extra)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles() {
        let b = Backoff::default();
        assert_eq!(b.nominal_delay(1), Duration::from_secs(1));
        assert_eq!(b.nominal_delay(2), Duration::from_secs(2));
        assert_eq!(b.nominal_delay(4), Duration::from_secs(8));
        let d = b.delay(3);
        assert!(d >= Duration::from_secs(4) && d < Duration::from_secs(5));
    }

    #[test]
    fn limiter_spaces_calls() {
        let limiter = RateLimiter::per_second(50.0).unwrap();
        let start = Instant::now();
        for _ in 0..6 {
            limiter.acquire();
        }
        // five gaps of 20 ms
        assert!(start.elapsed() >= Duration::from_millis(95));
        assert!(RateLimiter::per_second(0.0).is_none());
    }
}
