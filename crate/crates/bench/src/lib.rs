//! Deterministic fixtures shared by the benchmarks.

use ndarray::Array2;
use prefrl_core::envsim::{Segment, SegmentStep};
use prefrl_core::rng::{self, Rng};
use prefrl_core::teacher::{PreferenceLabel, PreferenceRecord};
use rand::Rng as _;

pub fn fixture_rng(name: &str) -> Rng {
    rng::stream(2024, name)
}

pub fn matrix(r: &mut Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| r.random_range(-1.0..1.0))
}

pub fn segment(r: &mut Rng, len: usize, state_dim: usize, action_dim: usize) -> Segment {
    Segment::new(
        (0..len)
            .map(|_| SegmentStep {
                state: (0..state_dim).map(|_| r.random_range(-1.0..1.0)).collect(),
                action: (0..action_dim).map(|_| r.random_range(-1.0..1.0)).collect(),
                reward_true: r.random_range(0.0..1.0),
            })
            .collect(),
    )
}

pub fn records(r: &mut Rng, n: usize, len: usize, state_dim: usize, action_dim: usize) -> Vec<PreferenceRecord> {
    (0..n)
        .map(|_| PreferenceRecord {
            seg0: segment(r, len, state_dim, action_dim),
            seg1: segment(r, len, state_dim, action_dim),
            label: if r.random::<bool>() {
                PreferenceLabel::FirstPreferred
            } else {
                PreferenceLabel::SecondPreferred
            },
            query_step: 0,
        })
        .collect()
}
