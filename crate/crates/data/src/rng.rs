//! Seeded sampling helpers.

use rand::Rng;

/// Standard normal draw via Box-Muller; exact and deterministic for a
/// seeded RNG (u1 is shifted into (0, 1] so the logarithm is finite).
pub fn normal_draw<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
