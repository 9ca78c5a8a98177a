//! Fixed sinusoidal positional encodings.

use crate::autodiff::Tensor;

/// Encoding row for one position: `sin(pos / 10000^(2i/d))` on even
/// channels, `cos` of the same angle on odd channels.
pub fn encoding_row(position: usize, dim: usize) -> Vec<f64> {
    let mut row = vec![0.0; dim];
    for i in 0..dim / 2 {
        let angle = position as f64 / 10_000f64.powf(2.0 * i as f64 / dim as f64);
        row[2 * i] = angle.sin();
        row[2 * i + 1] = angle.cos();
    }
    if dim % 2 == 1 {
        let i = dim / 2;
        let angle = position as f64 / 10_000f64.powf(2.0 * i as f64 / dim as f64);
        row[dim - 1] = angle.sin();
    }
    row
}

/// Stacked encoding matrix for a list of positions, shape `(len, dim)`.
pub fn encoding_matrix(positions: &[usize], dim: usize) -> Tensor {
    let mut data = Vec::with_capacity(positions.len() * dim);
    for &position in positions {
        data.extend(encoding_row(position, dim));
    }
    Tensor::new(vec![positions.len(), dim], data)
}
