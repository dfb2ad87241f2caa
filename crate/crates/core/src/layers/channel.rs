use super::{LinearLayer, ParamSet, SeqBatch};
use crate::error::{Error, Result};
use crate::numkit::{gemm, relu, sigmoid, Matrix, Rng};

/// Squeeze-and-excitation style channel gate over the time axis:
/// `s = mean_t H_t`, `w = σ(W₂ relu(W₁ s))`, `out_t = H_t ⊙ w`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelReweight {
    pub squeeze: LinearLayer,
    pub excite: LinearLayer,
    pub reduction: usize,
}

#[derive(Clone, Debug)]
pub struct ChannelCache {
    summary: Matrix,
    squeezed: Matrix,
    /// Per-sample channel gates, `batch × f`.
    pub gates: Matrix,
}

impl ChannelReweight {
    pub fn new(params: &mut ParamSet, width: usize, reduction: usize, rng: &mut Rng) -> Result<Self> {
        if reduction == 0 || !width.is_multiple_of(reduction) {
            return Err(Error::config(format!(
                "channel reduction ratio {reduction} must divide width {width}"
            )));
        }
        let inner = width / reduction;
        Ok(ChannelReweight {
            squeeze: LinearLayer::new(params, "cr.w1", width, inner, false, rng),
            excite: LinearLayer::new(params, "cr.w2", inner, width, false, rng),
            reduction,
        })
    }

    pub fn forward(&self, params: &ParamSet, h: &SeqBatch) -> (SeqBatch, ChannelCache) {
        let (steps, batch, f) = (h.steps, h.batch, h.width());
        assert_eq!(f, self.squeeze.inputs, "channel reweight width");
        let mut summary = Matrix::zeros(batch, f);
        for t in 0..steps {
            for b in 0..batch {
                for (s, v) in summary.row_mut(b).iter_mut().zip(h.token(t, b)) {
                    *s += v;
                }
            }
        }
        summary.scale(1.0 / steps as f64);
        let mut squeezed = self.squeeze.forward(params, &summary);
        squeezed.as_mut_slice().iter_mut().for_each(|v| *v = relu(*v));
        let mut gates = self.excite.forward(params, &squeezed);
        gates.as_mut_slice().iter_mut().for_each(|v| *v = sigmoid(*v));

        let mut out = h.clone();
        for t in 0..steps {
            for b in 0..batch {
                for (o, w) in out.token_mut(t, b).iter_mut().zip(gates.row(b)) {
                    *o *= w;
                }
            }
        }
        (
            out,
            ChannelCache {
                summary,
                squeezed,
                gates,
            },
        )
    }

    pub fn backward(
        &self,
        params: &ParamSet,
        h: &SeqBatch,
        cache: &ChannelCache,
        d_out: &Matrix,
        grads: &mut ParamSet,
    ) -> Matrix {
        let (steps, batch, f) = (h.steps, h.batch, h.width());
        let mut dh = d_out.clone();
        let mut d_gate = Matrix::zeros(batch, f);
        for t in 0..steps {
            for b in 0..batch {
                let row = t * batch + b;
                let w = cache.gates.row(b);
                let dg = d_gate.row_mut(b);
                let hv = h.data.row(row);
                let d = dh.row_mut(row);
                for j in 0..f {
                    dg[j] += d[j] * hv[j];
                    d[j] *= w[j];
                }
            }
        }
        for (d, w) in d_gate.as_mut_slice().iter_mut().zip(cache.gates.as_slice()) {
            *d *= w * (1.0 - w);
        }
        let mut d_sq = Matrix::zeros(batch, self.squeeze.outputs);
        self.excite.accumulate_grads(&cache.squeezed, &d_gate, grads);
        gemm(1.0, d_gate.view(), params[self.excite.weight].view().t(), 0.0, d_sq.view_mut());
        for (d, a) in d_sq.as_mut_slice().iter_mut().zip(cache.squeezed.as_slice()) {
            if *a <= 0.0 {
                *d = 0.0;
            }
        }
        let mut d_summary = self.squeeze.backward(params, &cache.summary, &d_sq, grads);
        d_summary.scale(1.0 / steps as f64);
        for t in 0..steps {
            for b in 0..batch {
                for (d, s) in dh.row_mut(t * batch + b).iter_mut().zip(d_summary.row(b)) {
                    *d += s;
                }
            }
        }
        dh
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::grad_check;

    fn random_seq(rng: &mut Rng, steps: usize, batch: usize, f: usize) -> SeqBatch {
        let n = steps * batch;
        SeqBatch::new(steps, batch, Matrix::from_vec(n, f, (0..n * f).map(|_| rng.normal()).collect()).unwrap())
    }

    #[test]
    fn zero_weights_halve_everything() {
        let mut ps = ParamSet::new();
        let cr = ChannelReweight::new(&mut ps, 8, 4, &mut Rng::new(0)).unwrap();
        ps.zero();
        let h = random_seq(&mut Rng::new(1), 3, 2, 8);
        let (out, cache) = cr.forward(&ps, &h);
        assert!(cache.gates.as_slice().iter().all(|g| *g == 0.5));
        for (o, v) in out.data.as_slice().iter().zip(h.data.as_slice()) {
            assert_eq!(*o, v / 2.0);
        }
    }

    #[test]
    fn reduction_must_divide_width() {
        let mut ps = ParamSet::new();
        assert!(ChannelReweight::new(&mut ps, 10, 4, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn gates_strictly_inside_unit_interval() {
        let mut ps = ParamSet::new();
        let mut rng = Rng::new(3);
        let cr = ChannelReweight::new(&mut ps, 8, 2, &mut rng).unwrap();
        let h = random_seq(&mut rng, 5, 3, 8);
        let (_, cache) = cr.forward(&ps, &h);
        assert!(cache.gates.as_slice().iter().all(|g| *g > 0.0 && *g < 1.0));
    }

    #[test]
    fn gradient_sign_favours_passing_the_informative_channel() {
        // Loss rewards channel 0's output; the gradient on its gate bias-like
        // excite weights must point toward opening that gate.
        let mut ps = ParamSet::new();
        let mut rng = Rng::new(4);
        let cr = ChannelReweight::new(&mut ps, 4, 2, &mut rng).unwrap();
        let mut h = SeqBatch::zeros(3, 1, 4);
        for t in 0..3 {
            h.token_mut(t, 0).copy_from_slice(&[3.0, 0.1, -0.1, 0.05]);
        }
        let (_, cache) = cr.forward(&ps, &h);
        // L = -sum_t out[t, 0]
        let mut d = Matrix::zeros(3, 4);
        for t in 0..3 {
            d.set(t, 0, -1.0);
        }
        let mut grads = ps.zeros_like();
        cr.backward(&ps, &h, &cache, &d, &mut grads);
        let a = cache.squeezed.row(0);
        let g = &grads[cr.excite.weight];
        for i in 0..a.len() {
            if a[i] > 0.0 {
                assert!(g.get(i, 0) < 0.0, "descent would not open gate 0");
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = Rng::new(12);
        for _ in 0..50 {
            let mut ps = ParamSet::new();
            let f = 4 * (1 + rng.below(2));
            let cr = ChannelReweight::new(&mut ps, f, 2, &mut rng).unwrap();
            let (steps, batch) = (1 + rng.below(4), 1 + rng.below(3));
            let h = random_seq(&mut rng, steps, batch, f);
            let w = random_seq(&mut rng, steps, batch, f).data;
            let (_, cache) = cr.forward(&ps, &h);
            let mut grads = ps.zeros_like();
            let dh = cr.backward(&ps, &h, &cache, &w, &mut grads);
            let names = ps.names().to_vec();
            let mut all = ps.tensors().to_vec();
            all.push(h.data.clone());
            let mut analytic = grads.tensors().to_vec();
            analytic.push(dh);
            let err = grad_check(
                |p| {
                    let set = ParamSet::from_parts(names.clone(), p[..2].to_vec());
                    let (y, _) = cr.forward(&set, &SeqBatch::new(steps, batch, p[2].clone()));
                    y.data.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum()
                },
                &all,
                &analytic,
                1e-5,
            )
            .unwrap();
            assert!(err <= 1e-4, "{err}");
        }
    }
}
