//! Iteration counts sufficient for a target expected duality gap.

use serde::{Deserialize, Serialize};

/// `ceil` that ignores upward rounding noise, so a value computed as
/// `2000.0000000000002` counts as 2000.
fn ceil_tolerant(x: f64) -> f64 {
    (x - 1e-9 * x.abs().max(1.0)).ceil()
}

fn to_count(x: f64) -> u64 {
    if x.is_nan() || x <= 0.0 {
        0
    } else {
        x as u64
    }
}

/// `n + R^2 / (lambda gamma)`
fn smooth_base(n: usize, radius: f64, lambda: f64, gamma: f64) -> f64 {
    n as f64 + radius * radius / (lambda * gamma)
}

/// Iterations after which the last iterate of a smooth problem has expected
/// gap at most `eps`. Never less than 1.
pub fn smooth_iterations(n: usize, radius: f64, lambda: f64, gamma: f64, eps: f64) -> u64 {
    let base = smooth_base(n, radius, lambda, gamma);
    to_count(ceil_tolerant(base * (base / eps).ln())).max(1)
}

/// Burn-in before averaging over a window of `window` iterations, for a smooth
/// problem with target expected gap `eps`.
pub fn smooth_averaging_burn_in(
    n: usize,
    radius: f64,
    lambda: f64,
    gamma: f64,
    eps: f64,
    window: u64,
) -> u64 {
    let base = smooth_base(n, radius, lambda, gamma);
    to_count(ceil_tolerant(base * (base / (window as f64 * eps)).ln()))
}

/// Iteration counts for Lipschitz losses with averaged or random output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LipschitzSchedule {
    /// Iterations after which plain full steps give way to the decaying regime.
    pub t0: u64,
    /// Iterations discarded before output selection.
    pub burn_in: u64,
    /// Total iterations.
    pub total: u64,
}

/// Schedule for `L`-Lipschitz losses with `max_i ||X_i|| <= R`.
pub fn lipschitz_schedule(n: usize, radius: f64, lipschitz: f64, lambda: f64, eps: f64) -> LipschitzSchedule {
    let rl_sq = (radius * lipschitz).powi(2);
    lipschitz_inner(n, 4.0 * rl_sq, lambda, eps, rl_sq, 20.0)
}

/// Schedule for structured hinge losses whose dual steps satisfy `||z||_1 <= 2`.
/// The tighter step bound replaces `4 L^2 = 16` by `L^2 = 4` in the analysis.
pub fn structured_schedule(n: usize, radius: f64, lambda: f64, eps: f64) -> LipschitzSchedule {
    let two_r_sq = (2.0 * radius).powi(2);
    lipschitz_inner(n, two_r_sq, lambda, eps, two_r_sq, 5.0)
}

// `g` bounds the expected squared step term; the closed-form display uses
// `rl_sq` and `constant`. The total honors both.
fn lipschitz_inner(
    n: usize,
    g: f64,
    lambda: f64,
    eps: f64,
    rl_sq: f64,
    constant: f64,
) -> LipschitzSchedule {
    let nf = n as f64;
    let t0 = to_count(ceil_tolerant(nf * (2.0 * lambda * nf / g).ln()));
    let burn_in = t0.max(to_count(ceil_tolerant(4.0 * g / (lambda * eps) - 2.0 * nf + t0 as f64)));
    let window = (n as u64).max(to_count(ceil_tolerant(g / (lambda * eps))));
    let display_t0 = to_count(ceil_tolerant(nf * (0.5 * lambda * nf / rl_sq).ln()));
    let display = display_t0 + n as u64 + to_count(ceil_tolerant(constant * rl_sq / (lambda * eps)));
    LipschitzSchedule {
        t0,
        burn_in,
        total: (burn_in + window).max(display),
    }
}
