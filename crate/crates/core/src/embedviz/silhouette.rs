use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Mean silhouette with Euclidean distance for binary labels. A point alone
/// in its class scores 0.
pub fn separation_score(points: &Matrix, labels: &[u8]) -> Result<f64> {
    let n = points.rows();
    if labels.len() != n {
        return Err(Error::shape("silhouette", points.shape(), (labels.len(), 1)));
    }
    let count1 = labels.iter().filter(|&&l| l == 1).count();
    if count1 == 0 || count1 == n {
        return Err(Error::UndefinedMetric("silhouette needs both classes".into()));
    }
    let counts = [n - count1, count1];
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = [0.0; 2];
        for j in 0..n {
            if j != i {
                let d: f64 = points.row(i).iter().zip(points.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                sums[usize::from(labels[j] == 1)] += d.sqrt();
            }
        }
        let own = usize::from(labels[i] == 1);
        if counts[own] == 1 {
            continue;
        }
        let a = sums[own] / (counts[own] - 1) as f64;
        let b = sums[1 - own] / counts[1 - own] as f64;
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Rng;

    #[test]
    fn point_masses_far_apart() {
        let mut rows = vec![vec![0.0, 0.0]; 5];
        rows.extend(vec![vec![1e6, 1e6]; 5]);
        let x = Matrix::from_rows(&rows).unwrap();
        let y = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        assert!((separation_score(&x, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shuffled_labels_on_one_blob_score_near_zero() {
        let mut rng = Rng::new(5);
        let mut mean = 0.0;
        for _ in 0..20 {
            let x = Matrix::from_vec(100, 3, (0..300).map(|_| rng.normal()).collect()).unwrap();
            let mut y: Vec<u8> = (0..100).map(|i| u8::from(i < 50)).collect();
            rng.shuffle(&mut y);
            let s = separation_score(&x, &y).unwrap();
            assert!(s.abs() < 0.1, "{s}");
            mean += s / 20.0;
        }
        assert!(mean.abs() < 0.05);
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mut rng = Rng::new(8);
        for _ in 0..30 {
            let n = 3 + rng.below(30);
            let x = Matrix::from_vec(n, 2, (0..2 * n).map(|_| rng.normal()).collect()).unwrap();
            let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.bernoulli(0.5))).collect();
            y[0] = 0;
            y[1] = 1;
            let dist = |i: usize, j: usize| ((x.get(i, 0) - x.get(j, 0)).powi(2) + (x.get(i, 1) - x.get(j, 1)).powi(2)).sqrt();
            let mut s = Vec::new();
            for i in 0..n {
                let same: Vec<usize> = (0..n).filter(|&j| j != i && y[j] == y[i]).collect();
                let other: Vec<usize> = (0..n).filter(|&j| y[j] != y[i]).collect();
                if same.is_empty() {
                    s.push(0.0);
                    continue;
                }
                let a = same.iter().map(|&j| dist(i, j)).sum::<f64>() / same.len() as f64;
                let b = other.iter().map(|&j| dist(i, j)).sum::<f64>() / other.len() as f64;
                s.push((b - a) / a.max(b));
            }
            let oracle = s.iter().sum::<f64>() / n as f64;
            assert!((separation_score(&x, &y).unwrap() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(separation_score(&Matrix::zeros(3, 2), &[1, 1, 1]).is_err());
    }
}
