//! Central finite-difference verification of analytic gradients.

use lltext_core::Scalar;

use crate::params::ParamSet;
use crate::tensor::Tensor;

/// Outcome of a finite-difference sweep.
#[derive(Debug, Clone, Copy)]
pub struct FdReport {
    pub checked: usize,
    pub max_rel_err: f64,
    /// Parameter/entry where the worst error occurred.
    pub worst_index: usize,
}

impl FdReport {
    fn empty() -> Self {
        Self {
            checked: 0,
            max_rel_err: 0.0,
            worst_index: 0,
        }
    }

    fn update(&mut self, rel: f64, index: usize) {
        self.checked += 1;
        if rel > self.max_rel_err {
            self.max_rel_err = rel;
            self.worst_index = index;
        }
    }
}

/// Relative error between analytic and numeric derivatives. Entries where
/// both are below `floor` count as exact agreement.
fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < floor {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Checks `d loss / d x` for a loss expressed as a function of one tensor.
/// `stride` subsamples entries (1 = every entry).
pub fn check_input_gradient<T: Scalar>(
    loss: impl Fn(&Tensor<T>) -> T,
    x: &Tensor<T>,
    analytic: &Tensor<T>,
    h: f64,
    stride: usize,
) -> FdReport {
    assert_eq!(x.shape(), analytic.shape());
    let mut report = FdReport::empty();
    let mut probe = x.clone();
    for i in (0..x.numel()).step_by(stride.max(1)) {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + T::of(h);
        let up = loss(&probe).dbl();
        probe.data_mut()[i] = orig - T::of(h);
        let down = loss(&probe).dbl();
        probe.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        report.update(rel_err(analytic.data()[i].dbl(), numeric, 1e-7), i);
    }
    report
}

/// Checks analytic parameter gradients against central differences.
///
/// `analytic` must align with the parameter set's insertion order (the
/// layout produced by `ParamSet::grads`). For each tensor at most
/// `max_entries_per_tensor` evenly spaced entries are probed; parameters
/// without an analytic gradient are verified to have zero numeric gradient.
pub fn check_param_gradients<T: Scalar>(
    params: &ParamSet<T>,
    loss: impl Fn(&ParamSet<T>) -> T,
    analytic: &[Option<Tensor<T>>],
    h: f64,
    max_entries_per_tensor: usize,
) -> FdReport {
    assert_eq!(params.len(), analytic.len());
    let mut report = FdReport::empty();
    let mut probe = params.clone();
    let names: Vec<String> = params.iter().map(|(n, _)| n.to_string()).collect();
    for (pi, name) in names.iter().enumerate() {
        let n = params.get(name).numel();
        let step = (n / max_entries_per_tensor.max(1)).max(1);
        for i in (0..n).step_by(step) {
            let orig = probe.get(name).data()[i];
            probe.get_mut(name).data_mut()[i] = orig + T::of(h);
            let up = loss(&probe).dbl();
            probe.get_mut(name).data_mut()[i] = orig - T::of(h);
            let down = loss(&probe).dbl();
            probe.get_mut(name).data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let ana = analytic[pi]
                .as_ref()
                .map_or(0.0, |t| t.data()[i].dbl());
            report.update(rel_err(ana, numeric, 1e-7), pi);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    #[test]
    fn quadratic_gradient_matches() {
        // loss = mean((x * x) + 3x) has gradient 2x/n + 3/n.
        let x = Tensor::new(vec![1, 2, 2], vec![0.3f64, -0.7, 1.1, 0.05]);
        let loss = |t: &Tensor<f64>| {
            let mut g = Graph::new();
            let xn = g.param(t.clone());
            let sq = g.mul(xn, xn);
            let three = g.mul_const(xn, 3.0);
            let s = g.add(sq, three);
            let m = g.mean_all(s);
            g.scalar_value(m)
        };
        let mut g = Graph::new();
        let xn = g.param(x.clone());
        let sq = g.mul(xn, xn);
        let three = g.mul_const(xn, 3.0);
        let s = g.add(sq, three);
        let m = g.mean_all(s);
        g.backward(m);
        let analytic = g.grad(xn).unwrap().clone();
        let report = check_input_gradient(loss, &x, &analytic, 1e-6, 1);
        assert!(report.max_rel_err < 1e-8, "rel err {}", report.max_rel_err);
    }
}
