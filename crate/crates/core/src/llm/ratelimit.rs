use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Token bucket shared by concurrent callers of one backend.
#[derive(Debug)]
pub struct RateLimiter {
    capacity: f64,
    refill_per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(capacity: u32, refill_per_sec: f64) -> Self {
        assert!(capacity > 0 && refill_per_sec > 0.0, "rate limiter needs positive parameters");
        Self { capacity: capacity as f64, refill_per_sec, state: Mutex::new((capacity as f64, Instant::now())) }
    }

    /// Takes one token if available; otherwise returns how long to wait.
    pub fn try_acquire(&self) -> Result<(), Duration> {
        let mut state = self.state.lock().expect("rate limiter poisoned");
        let now = Instant::now();
        let elapsed = now.duration_since(state.1).as_secs_f64();
        state.0 = (state.0 + elapsed * self.refill_per_sec).min(self.capacity);
        state.1 = now;
        if state.0 >= 1.0 {
            state.0 -= 1.0;
            Ok(())
        } else {
            Err(Duration::from_secs_f64((1.0 - state.0) / self.refill_per_sec))
        }
    }

    pub fn acquire(&self) {
        while let Err(wait) = self.try_acquire() {
            std::thread::sleep(wait);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burst_then_wait() {
        let rl = RateLimiter::new(2, 1000.0);
        assert!(rl.try_acquire().is_ok());
        assert!(rl.try_acquire().is_ok());
        let wait = rl.try_acquire().unwrap_err();
        assert!(wait <= Duration::from_millis(2));
        rl.acquire();
    }

    #[test]
    fn serializes_concurrent_bursts() {
        let rl = std::sync::Arc::new(RateLimiter::new(1, 200.0));
        let started = Instant::now();
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let rl = rl.clone();
                std::thread::spawn(move || rl.acquire())
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        // one token up front, three refills at 5 ms each
        assert!(started.elapsed() >= Duration::from_millis(12));
    }
}
