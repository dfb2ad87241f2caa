use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct PcaOutput {
    pub coords: Matrix,
    /// Share of total variance carried by each of the two components.
    pub explained: [f64; 2],
}

/// Projection onto the top two principal components. Each component's sign is
/// chosen so its largest-magnitude loading is positive.
pub fn pca_2d(points: &Matrix) -> Result<PcaOutput> {
    let (n, d) = points.shape();
    if n < 2 || d == 0 {
        return Err(Error::Data(format!("PCA needs at least 2 points, got {n}")));
    }
    let means: Vec<f64> = points.col_sums().iter().map(|s| s / n as f64).collect();
    let centred = DMatrix::from_fn(n, d, |r, c| points.get(r, c) - means[c]);
    let cov = centred.transpose() * &centred / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let mut coords = Matrix::zeros(n, 2);
    let mut explained = [0.0; 2];
    for (k, &idx) in order.iter().take(2).enumerate() {
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let lead = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for r in 0..n {
            coords.set(r, k, centred.row(r).iter().zip(&v).map(|(a, b)| a * b).sum());
        }
        explained[k] = if total > 0.0 { eig.eigenvalues[idx].max(0.0) / total } else { 0.0 };
    }
    Ok(PcaOutput { coords, explained })
}
