use super::{ParamId, ParamSet};
use crate::numkit::{gemm, Matrix, Rng};

/// Affine map `y = x W + b` with `W` stored `in × out`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearLayer {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub inputs: usize,
    pub outputs: usize,
}

impl LinearLayer {
    /// Uniform(±sqrt(1/fan_in)) weights and zero bias.
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        inputs: usize,
        outputs: usize,
        with_bias: bool,
        rng: &mut Rng,
    ) -> Self {
        let bound = (1.0 / inputs as f64).sqrt();
        let mut w = Matrix::zeros(inputs, outputs);
        w.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = rng.uniform_range(-bound, bound));
        let weight = params.add(format!("{name}.weight"), w);
        let bias = with_bias.then(|| params.add(format!("{name}.bias"), Matrix::zeros(1, outputs)));
        LinearLayer {
            weight,
            bias,
            inputs,
            outputs,
        }
    }

    pub fn forward(&self, params: &ParamSet, x: &Matrix) -> Matrix {
        assert_eq!(x.cols(), self.inputs, "linear input width");
        let mut y = Matrix::zeros(x.rows(), self.outputs);
        if let Some(b) = self.bias {
            let bias = params[b].as_slice();
            for r in 0..y.rows() {
                y.row_mut(r).copy_from_slice(bias);
            }
            gemm(1.0, x.view(), params[self.weight].view(), 1.0, y.view_mut());
        } else {
            gemm(1.0, x.view(), params[self.weight].view(), 0.0, y.view_mut());
        }
        y
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&self, params: &ParamSet, x: &Matrix, dy: &Matrix, grads: &mut ParamSet) -> Matrix {
        self.accumulate_grads(x, dy, grads);
        let mut dx = Matrix::zeros(x.rows(), self.inputs);
        gemm(1.0, dy.view(), params[self.weight].view().t(), 0.0, dx.view_mut());
        dx
    }

    pub fn accumulate_grads(&self, x: &Matrix, dy: &Matrix, grads: &mut ParamSet) {
        gemm(1.0, x.view().t(), dy.view(), 1.0, grads[self.weight].view_mut());
        if let Some(b) = self.bias {
            grads.accumulate(b, &dy.col_sums());
        }
    }
}
