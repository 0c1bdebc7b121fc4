//! The third-order, two-input, two-output worked example used as the golden
//! scenario throughout the crate.

use crate::model::{DisturbanceChannel, FilterPair, HarmonicComponent, LtiPlant};
use crate::numerics::{Matrix, Vector};

pub fn plant() -> LtiPlant {
    LtiPlant::new(
        Matrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.0, 0.0, 0.0, 1.0, -4.0, -5.0, -6.0]),
        Matrix::from_row_slice(3, 2, &[2.0, 0.0, 1.0, 0.0, -1.0, 3.0]),
        Matrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0]),
        Matrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, 0.0, -1.0, 1.0]),
        Vector::from_vec(vec![1.0, 1.0, 0.0]),
    )
    .expect("worked example plant is valid")
}

/// `f₁ = 5 sin 2t`, `f₂ = 4 + 7 sin 3t`.
pub fn channels() -> Vec<DisturbanceChannel> {
    vec![
        DisturbanceChannel::new(vec![HarmonicComponent { amplitude: 5.0, frequency: 2.0, phase: 0.0 }], 0.0)
            .expect("valid channel"),
        DisturbanceChannel::new(vec![HarmonicComponent { amplitude: 7.0, frequency: 3.0, phase: 0.0 }], 4.0)
            .expect("valid channel"),
    ]
}

pub fn filter_pairs() -> Vec<FilterPair> {
    vec![
        FilterPair::new(Matrix::from_row_slice(2, 2, &[0.0, 1.0, -3.0, -4.0]), Vector::from_vec(vec![0.0, 2.0]))
            .expect("valid filter"),
        FilterPair::new(
            Matrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -6.0, -11.0, -6.0]),
            Vector::from_vec(vec![0.0, 0.0, 6.0]),
        )
        .expect("valid filter"),
    ]
}

/// Observer gain `K₁` chosen for the example.
pub fn k1() -> Matrix {
    Matrix::from_row_slice(3, 2, &[3.0, -5.0, -1.0, 5.0, -3.0, 7.0])
}

/// Resulting total observer gain `K = K₁ + M·N`.
pub fn expected_k() -> Matrix {
    Matrix::from_row_slice(3, 2, &[0.0, 0.0, 0.0, 1.0, 0.0, -1.0])
}

pub fn expected_q1() -> Matrix {
    Matrix::from_row_slice(2, 3, &[0.0, 0.0, 0.0, -2.0, 0.0, 0.0])
}

pub fn expected_q2() -> Matrix {
    Matrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -6.0, 0.0, 6.0])
}
