//! CPU and wall clocks for experiment rows.

use std::time::Instant;

fn clock_seconds(clock: libc::clockid_t) -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(clock, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

/// CPU time consumed by the calling thread.
pub fn thread_cpu_seconds() -> f64 {
    clock_seconds(libc::CLOCK_THREAD_CPUTIME_ID)
}

/// CPU time consumed by the whole process, all threads.
pub fn process_cpu_seconds() -> f64 {
    clock_seconds(libc::CLOCK_PROCESS_CPUTIME_ID)
}

/// Measures thread CPU time and wall time from construction.
pub struct Stopwatch {
    cpu: f64,
    wall: Instant,
    process: bool,
}

impl Stopwatch {
    pub fn thread() -> Self {
        Stopwatch { cpu: thread_cpu_seconds(), wall: Instant::now(), process: false }
    }

    pub fn process() -> Self {
        Stopwatch { cpu: process_cpu_seconds(), wall: Instant::now(), process: true }
    }

    /// (cpu seconds, wall seconds) since construction.
    pub fn elapsed(&self) -> (f64, f64) {
        let now = if self.process { process_cpu_seconds() } else { thread_cpu_seconds() };
        ((now - self.cpu).max(0.0), self.wall.elapsed().as_secs_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clocks_advance() {
        let sw = Stopwatch::thread();
        let mut x = 0u64;
        for i in 0..5_000_000u64 {
            x = x.wrapping_mul(31).wrapping_add(i);
        }
        std::hint::black_box(x);
        let (cpu, wall) = sw.elapsed();
        assert!(cpu > 0.0 && wall > 0.0);
        assert!(process_cpu_seconds() >= cpu);
    }
}
