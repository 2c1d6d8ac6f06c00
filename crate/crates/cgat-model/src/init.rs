use cgat_tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Glorot-uniform draw with an explicit fan pair: limit sqrt(6/(in+out)).
pub(crate) fn glorot(
    rng: &mut ChaCha8Rng,
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len: usize = shape.iter().product();
    let data = (0..len).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * limit).collect();
    Tensor::new(shape, data).expect("shape matches data length")
}

pub(crate) fn zeros_vec(len: usize) -> Tensor {
    Tensor::zeros(&[len])
}

pub(crate) fn ones_vec(len: usize) -> Tensor {
    Tensor::filled(&[len], 1.0)
}
