//! One LSTM direction over a whole sequence, forward and backward.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, Axis};

use super::params::LstmLayerParams;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations kept for backpropagation, indexed by frame in natural time
/// order regardless of the direction of travel.
#[derive(Clone, Debug)]
pub(crate) struct DirectionCache {
    /// Activated gates `[i | f | g | o]`, `T x 4H`.
    pub gates: Array2<f64>,
    pub cell: Array2<f64>,
    pub tanh_cell: Array2<f64>,
    pub hidden: Array2<f64>,
    pub reverse: bool,
}

/// Runs the recurrence over `x` (`T x I`). With `reverse` the sequence is
/// consumed from the last frame to the first.
pub(crate) fn direction_forward(p: &LstmLayerParams, x: ArrayView2<f64>, reverse: bool) -> DirectionCache {
    let t_len = x.nrows();
    let h = p.hidden();
    let mut gates = x.dot(&p.w_ih.t()).as_standard_layout().into_owned();
    gates += &p.bias;
    let mut cell = Array2::zeros((t_len, h));
    let mut tanh_cell = Array2::zeros((t_len, h));
    let mut hidden = Array2::<f64>::zeros((t_len, h));
    let w_hh = p.w_hh.as_slice().expect("standard layout");

    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    for step in 0..t_len {
        let t = if reverse { t_len - 1 - step } else { step };
        let mut z = gates.row_mut(t);
        let z = z.as_slice_mut().expect("row of a standard-layout matrix");
        for (j, zj) in z.iter_mut().enumerate() {
            let row = &w_hh[j * h..(j + 1) * h];
            *zj += row.iter().zip(&h_prev).map(|(w, hv)| w * hv).sum::<f64>();
        }
        for k in 0..h {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[h + k]);
            let g = z[2 * h + k].tanh();
            let o = sigmoid(z[3 * h + k]);
            z[k] = i;
            z[h + k] = f;
            z[2 * h + k] = g;
            z[3 * h + k] = o;
            let c = f * c_prev[k] + i * g;
            let tc = c.tanh();
            cell[[t, k]] = c;
            tanh_cell[[t, k]] = tc;
            let hv = o * tc;
            hidden[[t, k]] = hv;
            c_prev[k] = c;
            h_prev[k] = hv;
        }
    }
    DirectionCache {
        gates,
        cell,
        tanh_cell,
        hidden,
        reverse,
    }
}

/// Backpropagates `d_hidden` (`T x H`, gradient of the loss with respect to
/// this direction's outputs) through time. Parameter gradients are added to
/// `grads`; the gradient with respect to `x` is returned.
pub(crate) fn direction_backward(
    p: &LstmLayerParams,
    cache: &DirectionCache,
    x: ArrayView2<f64>,
    d_hidden: ArrayView2<f64>,
    grads: &mut LstmLayerParams,
) -> Array2<f64> {
    let t_len = x.nrows();
    let h = p.hidden();
    let w_hh = p.w_hh.as_slice().expect("standard layout");
    let mut dz_all = Array2::<f64>::zeros((t_len, 4 * h));
    // h_{prev(t)} for each t, zero at the sequence start
    let mut h_prev_all = Array2::<f64>::zeros((t_len, h));
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];

    let prev_of = |t: usize| -> Option<usize> {
        if cache.reverse {
            (t + 1 < t_len).then_some(t + 1)
        } else {
            t.checked_sub(1)
        }
    };

    for step in (0..t_len).rev() {
        let t = if cache.reverse { t_len - 1 - step } else { step };
        let prev = prev_of(t);
        let gates = cache.gates.row(t);
        let mut dz = dz_all.row_mut(t);
        for k in 0..h {
            let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            let tc = cache.tanh_cell[[t, k]];
            let dh = d_hidden[[t, k]] + dh_next[k];
            let d_o = dh * tc;
            let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
            let c_prev = prev.map_or(0.0, |tp| cache.cell[[tp, k]]);
            dz[k] = dc * g * i * (1.0 - i);
            dz[h + k] = dc * c_prev * f * (1.0 - f);
            dz[2 * h + k] = dc * i * (1.0 - g * g);
            dz[3 * h + k] = d_o * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        for (j, &dzj) in dz.iter().enumerate() {
            if dzj != 0.0 {
                let row = &w_hh[j * h..(j + 1) * h];
                for (acc, w) in dh_next.iter_mut().zip(row) {
                    *acc += w * dzj;
                }
            }
        }
        if let Some(tp) = prev {
            h_prev_all.row_mut(t).assign(&cache.hidden.row(tp));
        }
    }

    general_mat_mul(1.0, &dz_all.t(), &h_prev_all, 1.0, &mut grads.w_hh);
    general_mat_mul(1.0, &dz_all.t(), &x, 1.0, &mut grads.w_ih);
    grads.bias += &dz_all.sum_axis(Axis(0));
    dz_all.dot(&p.w_ih)
}
