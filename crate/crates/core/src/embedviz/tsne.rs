use crate::error::{Error, Result};
use crate::numkit::{Matrix, Rng};

pub const ENTROPY_TOL: f64 = 1e-5;
pub const MAX_SEARCH_STEPS: usize = 50;
pub const MAX_POINTS: usize = 2000;

const EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;
const LEARNING_RATE: f64 = 200.0;
const MIN_GAIN: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            perplexity: 30.0,
            iterations: 1000,
            seed: 0,
        }
    }
}

/// Row-conditional affinities `P(j|i)` (row-major n × n) and, per row, the
/// absolute gap between its entropy and `ln(perplexity)`.
#[derive(Clone, Debug)]
pub struct Affinities {
    pub n: usize,
    pub conditional: Vec<f64>,
    pub entropy_gap: Vec<f64>,
}

impl Affinities {
    pub fn max_gap(&self) -> f64 {
        self.entropy_gap.iter().fold(0.0, |a, &b| a.max(b))
    }
}

#[derive(Clone, Debug)]
pub struct TsneOutput {
    pub coords: Matrix,
    pub affinities: Affinities,
}

pub fn squared_distances(points: &Matrix) -> Vec<f64> {
    let n = points.rows();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = points.row(i).iter().zip(points.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Entropy (nats) of row `i` at precision `beta`, filling `out` with the row.
fn row_entropy(d2: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let n = out.len();
    let dmin = (0..n).filter(|&j| j != i).map(|j| d2[j]).fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for j in 0..n {
        if j == i {
            out[j] = 0.0;
            continue;
        }
        let shifted = d2[j] - dmin;
        let w = (-beta * shifted).exp();
        out[j] = w;
        sum += w;
        weighted += w * shifted;
    }
    out.iter_mut().for_each(|v| *v /= sum);
    sum.ln() + beta * weighted / sum
}

/// Per-row bisection on log-precision so each row's entropy matches `ln(perplexity)`.
pub fn affinities(points: &Matrix, perplexity: f64) -> Result<Affinities> {
    let n = points.rows();
    if n < 4 || !(perplexity > 0.0 && 3.0 * perplexity < n as f64) {
        return Err(Error::config(format!("perplexity {perplexity} needs more than {} points (have {n})", (3.0 * perplexity).ceil())));
    }
    let d2 = squared_distances(points);
    let mean_d2 = d2.iter().sum::<f64>() / (n * (n - 1)) as f64;
    let scale = if mean_d2 > 0.0 { 1.0 / mean_d2 } else { 1.0 };
    let target = perplexity.ln();
    let mut conditional = vec![0.0; n * n];
    let mut entropy_gap = vec![0.0; n];
    for i in 0..n {
        let row = &d2[i * n..(i + 1) * n];
        let out = &mut conditional[i * n..(i + 1) * n];
        let (mut lo, mut hi) = (-40.0f64, 40.0f64);
        let mut log_beta = 0.0;
        let mut h = row_entropy(row, i, scale, out);
        for _ in 0..MAX_SEARCH_STEPS {
            if (h - target).abs() < ENTROPY_TOL {
                break;
            }
            // entropy falls as precision grows
            if h > target {
                lo = log_beta;
            } else {
                hi = log_beta;
            }
            log_beta = 0.5 * (lo + hi);
            h = row_entropy(row, i, scale * log_beta.exp(), out);
        }
        entropy_gap[i] = (h - target).abs();
    }
    Ok(Affinities {
        n,
        conditional,
        entropy_gap,
    })
}

/// Exact t-SNE to two dimensions.
pub fn tsne_2d(points: &Matrix, params: &TsneParams) -> Result<TsneOutput> {
    let n = points.rows();
    if n > MAX_POINTS {
        return Err(Error::config(format!("exact t-SNE is limited to {MAX_POINTS} points, got {n}")));
    }
    let aff = affinities(points, params.perplexity)?;
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = ((aff.conditional[i * n + j] + aff.conditional[j * n + i]) / (2.0 * n as f64)).max(1e-12);
        }
    }
    let mut rng = Rng::new(params.seed);
    let mut y: Vec<f64> = (0..2 * n).map(|_| 1e-2 * rng.normal()).collect();
    let mut update = vec![0.0; 2 * n];
    let mut gains = vec![1.0; 2 * n];
    let mut num = vec![0.0; n * n];
    let mut grad = vec![0.0; 2 * n];
    for it in 0..params.iterations {
        let exaggeration = if it < EXAGGERATION_ITERS { EXAGGERATION } else { 1.0 };
        let momentum = if it < EXAGGERATION_ITERS { 0.5 } else { 0.8 };
        let mut z = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let dx = y[2 * i] - y[2 * j];
                let dy = y[2 * i + 1] - y[2 * j + 1];
                let q = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = q;
                num[j * n + i] = q;
                z += 2.0 * q;
            }
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = num[i * n + j];
                let m = 4.0 * (exaggeration * p[i * n + j] - q / z) * q;
                grad[2 * i] += m * (y[2 * i] - y[2 * j]);
                grad[2 * i + 1] += m * (y[2 * i + 1] - y[2 * j + 1]);
            }
        }
        for k in 0..2 * n {
            gains[k] = if (grad[k] > 0.0) != (update[k] > 0.0) {
                gains[k] + 0.2
            } else {
                f64::max(gains[k] * 0.8, MIN_GAIN)
            };
            update[k] = momentum * update[k] - LEARNING_RATE * gains[k] * grad[k];
            y[k] += update[k];
        }
        for c in 0..2 {
            let mean = (0..n).map(|i| y[2 * i + c]).sum::<f64>() / n as f64;
            (0..n).for_each(|i| y[2 * i + c] -= mean);
        }
    }
    let coords = Matrix::from_vec(n, 2, y).map_err(|_| Error::NonFinite("t-SNE coordinates".into()))?;
    Ok(TsneOutput { coords, affinities: aff })
}
