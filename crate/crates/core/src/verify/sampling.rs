//! Deterministic grids, random samples and random gain sets.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controllers::Gains;
use crate::geometry::{PolarState, StateSpace};

/// Half-width used for unbounded angle coordinates.
pub const ANGLE_BOX: f64 = 10.0;
/// Upper end of sampled distances.
pub const RHO_BOX: f64 = 10.0;
/// Distance kept from barriered boundaries.
pub const BARRIER_MARGIN: f64 = 0.01;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Symmetric sampling interval for one angle of `space`.
pub fn angle_range(barrier: bool, margin: f64) -> (f64, f64) {
    if barrier {
        (-PI + margin, PI - margin)
    } else {
        (-ANGLE_BOX, ANGLE_BOX)
    }
}

/// Tensor grid in `(delta, gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularGrid {
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl AngularGrid {
    /// `n x n` grid over the angular part of `space`, truncated at
    /// [`ANGLE_BOX`] and kept `margin` away from barriers. With even `n` the
    /// origin is not a grid point.
    pub fn over(space: StateSpace, n: usize, margin: f64) -> Self {
        let (d0, d1) = angle_range(space.bounds_delta(), margin);
        let (g0, g1) = angle_range(space.bounds_gamma(), margin);
        Self { delta: linspace(d0, d1, n), gamma: linspace(g0, g1, n) }
    }

    pub fn with_ranges(delta: (f64, f64), gamma: (f64, f64), nd: usize, ng: usize) -> Self {
        Self { delta: linspace(delta.0, delta.1, nd), gamma: linspace(gamma.0, gamma.1, ng) }
    }

    pub fn len(&self) -> usize {
        self.delta.len() * self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major point `i`.
    pub fn point(&self, i: usize) -> (f64, f64) {
        (self.delta[i / self.gamma.len()], self.gamma[i % self.gamma.len()])
    }

    pub fn describe(&self) -> String {
        let span = |v: &[f64]| match (v.first(), v.last()) {
            (Some(a), Some(b)) => format!("[{a:.6}, {b:.6}] x {}", v.len()),
            _ => "empty".to_string(),
        };
        format!("delta {} ; gamma {}", span(&self.delta), span(&self.gamma))
    }
}

/// Uniform random states with `rho in (0, RHO_BOX]` and angles in the
/// truncated, barrier-shrunk box of `space`.
pub fn sample_states(space: StateSpace, n: usize, margin: f64, seed: u64) -> Vec<PolarState<f64>> {
    let mut r = rng(seed);
    let (d0, d1) = angle_range(space.bounds_delta(), margin);
    let (g0, g1) = angle_range(space.bounds_gamma(), margin);
    (0..n)
        .map(|_| {
            let rho = RHO_BOX * (1.0 - r.gen::<f64>());
            PolarState::new(rho, r.gen_range(d0..=d1), r.gen_range(g0..=g1))
        })
        .collect()
}

/// Random gains, each log-uniform on `[0.1, 10]`. With `passivity` set, `k3`
/// is redrawn as `k2^2 / k1` times a log-uniform factor in `[1, 10]`, so
/// `k1 k3 >= k2^2` holds.
pub fn random_gains(n: usize, passivity: bool, seed: u64) -> Vec<Gains<f64>> {
    let mut r = rng(seed);
    let mut draw = |lo: f64, hi: f64| (r.gen_range(lo.ln()..=hi.ln())).exp();
    (0..n)
        .map(|_| {
            let (k1, k2, mut k3, k4) = (draw(0.1, 10.0), draw(0.1, 10.0), draw(0.1, 10.0), draw(0.1, 10.0));
            if passivity {
                k3 = k2 * k2 / k1 * draw(1.0, 10.0);
            }
            Gains::new(k1, k2, k3, k4).expect("positive gains")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_grids_skip_the_origin() {
        let g = AngularGrid::over(StateSpace::S3, 100, BARRIER_MARGIN);
        assert_eq!(g.len(), 10_000);
        assert!((0..g.len()).all(|i| g.point(i) != (0.0, 0.0)));
        assert_eq!(g.point(0), (-PI + 0.01, -PI + 0.01));
        assert_eq!(g.point(g.len() - 1), (PI - 0.01, PI - 0.01));
    }

    #[test]
    fn samples_are_deterministic_and_inside() {
        let a = sample_states(StateSpace::S2, 500, BARRIER_MARGIN, 7);
        assert_eq!(a, sample_states(StateSpace::S2, 500, BARRIER_MARGIN, 7));
        assert_ne!(a, sample_states(StateSpace::S2, 500, BARRIER_MARGIN, 8));
        for p in &a {
            assert!(StateSpace::S2.contains(p));
            assert!(p.rho <= RHO_BOX && p.delta.abs() <= ANGLE_BOX && p.gamma.abs() <= PI - BARRIER_MARGIN);
        }
    }

    #[test]
    fn passivity_gains_satisfy_condition() {
        for g in random_gains(200, true, 3) {
            assert!(g.satisfies_passivity_condition());
        }
    }
}
