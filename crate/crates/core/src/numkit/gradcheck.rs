use super::Matrix;
use crate::error::{Error, Result};

/// Largest relative disagreement between an analytic gradient and a central
/// difference of `f`, measured as `|analytic - numeric| / max(1, |numeric|)`.
///
/// `analytic[i]` must have the shape of `params[i]`.
pub fn grad_check<F>(mut f: F, params: &[Matrix], analytic: &[Matrix], h: f64) -> Result<f64>
where
    F: FnMut(&[Matrix]) -> f64,
{
    if !(1e-6..=1e-4).contains(&h) {
        return Err(Error::config(format!("grad_check step {h} outside [1e-6, 1e-4]")));
    }
    if params.len() != analytic.len() {
        return Err(Error::shape("grad_check", (params.len(), 0), (analytic.len(), 0)));
    }
    for (p, g) in params.iter().zip(analytic) {
        if p.shape() != g.shape() {
            return Err(Error::shape("grad_check", p.shape(), g.shape()));
        }
    }
    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..work.len() {
        for j in 0..work[i].len() {
            let orig = work[i].as_slice()[j];
            work[i].as_mut_slice()[j] = orig + h;
            let up = f(&work);
            work[i].as_mut_slice()[j] = orig - h;
            let down = f(&work);
            work[i].as_mut_slice()[j] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::NonFinite(format!(
                    "objective evaluated to {up} / {down} at tensor {i}, entry {j}"
                )));
            }
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[i].as_slice()[j];
            worst = worst.max((a - numeric).abs() / numeric.abs().max(1.0));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{tanh, Rng};

    #[test]
    fn square_function() {
        let w = Matrix::filled(1, 1, 3.0);
        let err = grad_check(|p| p[0].get(0, 0).powi(2), &[w], &[Matrix::filled(1, 1, 6.0)], 1e-5)
            .unwrap();
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn wrong_gradient_is_detected() {
        // f(w) = w^2 / 2 at w = 1 has gradient 1; reporting 1.5 is off by 0.5.
        let w = Matrix::filled(1, 1, 1.0);
        let err = grad_check(
            |p| 0.5 * p[0].get(0, 0).powi(2),
            &[w],
            &[Matrix::filled(1, 1, 1.5)],
            1e-5,
        )
        .unwrap();
        assert!((err - 0.5).abs() < 1e-6, "{err}");
        // doubling a unit gradient
        let w = Matrix::filled(1, 1, 0.5);
        let err = grad_check(|p| p[0].get(0, 0), &[w], &[Matrix::filled(1, 1, 2.0)], 1e-5).unwrap();
        assert!(err > 0.5);
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let w = Matrix::filled(1, 1, 0.0);
        let res = grad_check(|p| (p[0].get(0, 0)).ln(), &[w], &[Matrix::zeros(1, 1)], 1e-5);
        assert!(res.is_err());
    }

    #[test]
    fn step_out_of_range() {
        let w = Matrix::filled(1, 1, 0.0);
        assert!(grad_check(|_| 0.0, &[w], &[Matrix::zeros(1, 1)], 1e-2).is_err());
    }

    /// loss = sum(tanh(tanh(tanh(x W1) W2) W3) ⊙ R), backward written out by hand.
    #[test]
    fn three_layer_tanh_composition() {
        let mut rng = Rng::new(21);
        let rand = |r: usize, c: usize, rng: &mut Rng| {
            Matrix::from_vec(r, c, (0..r * c).map(|_| rng.normal() * 0.7).collect()).unwrap()
        };
        for _ in 0..20 {
            let x = rand(3, 4, &mut rng);
            let ws = vec![rand(4, 5, &mut rng), rand(5, 3, &mut rng), rand(3, 2, &mut rng)];
            let r = rand(3, 2, &mut rng);
            let forward = |ws: &[Matrix]| -> Vec<Matrix> {
                let mut acts = vec![x.clone()];
                for w in ws {
                    let mut z = acts.last().unwrap().matmul(w).unwrap();
                    z.as_mut_slice().iter_mut().for_each(|v| *v = tanh(*v));
                    acts.push(z);
                }
                acts
            };
            let acts = forward(&ws);
            let mut delta = r.clone();
            let mut grads = vec![Matrix::zeros(1, 1); 3];
            for l in (0..3).rev() {
                let out = &acts[l + 1];
                for (d, o) in delta.as_mut_slice().iter_mut().zip(out.as_slice()) {
                    *d *= 1.0 - o * o;
                }
                grads[l] = acts[l].transpose().matmul(&delta).unwrap();
                delta = delta.matmul(&ws[l].transpose()).unwrap();
            }
            let loss = |p: &[Matrix]| -> f64 {
                let a = forward(p);
                a[3].as_slice().iter().zip(r.as_slice()).map(|(a, b)| a * b).sum()
            };
            let err = grad_check(loss, &ws, &grads, 1e-5).unwrap();
            assert!(err <= 1e-4, "{err}");
        }
    }
}
