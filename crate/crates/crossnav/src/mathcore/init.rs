//! Parameter initialization: uniform Glorot-style matrices, zero biases,
//! forget-gate bias of 1.

use crate::mathcore::tensor::Tensor;
use rand::Rng;

/// Matrix with entries uniform in `[-a, a]`, `a = sqrt(6/(fan_in+fan_out))`.
pub fn glorot_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let values = (0..rows * cols).map(|_| rng.random_range(-a..a)).collect();
    Tensor::new(vec![rows, cols], values).expect("generated values are finite")
}

/// Vector with entries uniform in `[-a, a]` using the given fan pair.
pub fn glorot_vector(len: usize, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let values = (0..len).map(|_| rng.random_range(-a..a)).collect();
    Tensor::new(vec![len], values).expect("generated values are finite")
}

/// LSTM parameter triple `(wx, wh, bias)` with the forget-gate bias block
/// set to 1.
pub fn lstm_init(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> (Tensor, Tensor, Tensor) {
    let wx = glorot_matrix(input_dim, 4 * hidden, rng);
    let wh = glorot_matrix(hidden, 4 * hidden, rng);
    let mut b = Tensor::zeros(vec![4 * hidden]);
    for i in hidden..2 * hidden {
        b.values_mut()[i] = 1.0;
    }
    (wx, wh, b)
}
