use nalgebra::DMatrix;

use super::{Matrix, Rng};

/// Random orthogonal `n × n` matrix: QR of a standard-normal draw with the
/// sign of R's diagonal folded into Q.
pub fn random_orthogonal(n: usize, rng: &mut Rng) -> Matrix {
    let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.normal());
    let qr = a.qr();
    let q = qr.q();
    let r = qr.r();
    let mut out = Matrix::zeros(n, n);
    for j in 0..n {
        let sign = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            out.set(i, j, q[(i, j)] * sign);
        }
    }
    out
}
