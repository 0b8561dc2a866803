use std::sync::{Condvar, Mutex, OnceLock};
use std::time::Instant;

/// Counting semaphore bounding in-flight generations.
#[derive(Debug)]
pub struct GenerationQueue {
    capacity: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

pub struct QueuePermit<'a> {
    queue: &'a GenerationQueue,
}

impl GenerationQueue {
    pub fn new(capacity: usize) -> Self {
        GenerationQueue {
            capacity: capacity.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn in_flight(&self) -> usize {
        *self.in_flight.lock().unwrap()
    }

    /// Waits for a slot until `deadline`; `None` on timeout.
    pub fn acquire_until(&self, deadline: Instant) -> Option<QueuePermit<'_>> {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.capacity {
            let now = Instant::now();
            if now >= deadline {
                return None;
            }
            n = self.freed.wait_timeout(n, deadline - now).unwrap().0;
        }
        *n += 1;
        Some(QueuePermit { queue: self })
    }
}

impl Drop for QueuePermit<'_> {
    fn drop(&mut self) {
        *self.queue.in_flight.lock().unwrap() -= 1;
        self.queue.freed.notify_one();
    }
}

/// Process-wide queue with room for one job, matching a single GPU.
pub fn global_queue() -> &'static GenerationQueue {
    static QUEUE: OnceLock<GenerationQueue> = OnceLock::new();
    QUEUE.get_or_init(|| GenerationQueue::new(1))
}
