//! Wall-clock stage timing. `std::time::Instant` is unavailable on
//! `wasm32-unknown-unknown`, where every measurement reads zero.

#[cfg(not(target_arch = "wasm32"))]
#[derive(Debug, Clone, Copy)]
pub struct Stopwatch(std::time::Instant);

#[cfg(not(target_arch = "wasm32"))]
impl Stopwatch {
    pub fn start() -> Self {
        Self(std::time::Instant::now())
    }

    pub fn elapsed_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }

    /// Elapsed time since the last call (or start), and restart.
    pub fn lap_ms(&mut self) -> f64 {
        let ms = self.elapsed_ms();
        self.0 = std::time::Instant::now();
        ms
    }
}

#[cfg(target_arch = "wasm32")]
#[derive(Debug, Clone, Copy)]
pub struct Stopwatch;

#[cfg(target_arch = "wasm32")]
impl Stopwatch {
    pub fn start() -> Self {
        Self
    }

    pub fn elapsed_ms(&self) -> f64 {
        0.0
    }

    pub fn lap_ms(&mut self) -> f64 {
        0.0
    }
}
