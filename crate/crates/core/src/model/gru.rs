//! GRU recurrence with explicit step caches for backpropagation through time.

use super::params::GruLayer;
use super::tensor::{gemv_acc, gemv_t_acc, outer_acc, sigmoid, Scalar};

pub(crate) struct StepCache<F> {
    x: Vec<F>,
    h_prev: Vec<F>,
    r: Vec<F>,
    z: Vec<F>,
    n: Vec<F>,
    /// `W_hn h_prev + b_hn`, the recurrent candidate term before gating by `r`.
    hn: Vec<F>,
}

pub(crate) struct LayerTrace<F> {
    steps: Vec<StepCache<F>>,
    pub outputs: Vec<Vec<F>>,
}

impl<F: Scalar> GruLayer<F> {
    fn step(&self, x: &[F], h: &[F]) -> StepCache<F> {
        let hd = self.hidden_dim();
        let mut gi = self.b_ih.data().to_vec();
        gemv_acc(self.w_ih.data(), self.input_dim(), x, &mut gi);
        let mut gh = self.b_hh.data().to_vec();
        gemv_acc(self.w_hh.data(), hd, h, &mut gh);

        let mut r = Vec::with_capacity(hd);
        let mut z = Vec::with_capacity(hd);
        let mut n = Vec::with_capacity(hd);
        for j in 0..hd {
            let rj = sigmoid(gi[j] + gh[j]);
            r.push(rj);
            z.push(sigmoid(gi[hd + j] + gh[hd + j]));
            n.push((gi[2 * hd + j] + rj * gh[2 * hd + j]).tanh());
        }
        StepCache {
            x: x.to_vec(),
            h_prev: h.to_vec(),
            r,
            z,
            n,
            hn: gh.split_off(2 * hd),
        }
    }

    fn next_hidden(c: &StepCache<F>) -> Vec<F> {
        c.z.iter()
            .zip(&c.n)
            .zip(&c.h_prev)
            .map(|((&z, &n), &h)| (F::one() - z) * n + z * h)
            .collect()
    }

    /// Runs the layer over `inputs` from a zero state, returning every hidden state.
    pub(crate) fn run(&self, inputs: &[Vec<F>]) -> Vec<Vec<F>> {
        let mut h = vec![F::zero(); self.hidden_dim()];
        let mut outputs = Vec::with_capacity(inputs.len());
        for x in inputs {
            h = Self::next_hidden(&self.step(x, &h));
            outputs.push(h.clone());
        }
        outputs
    }

    pub(crate) fn run_traced(&self, inputs: &[Vec<F>]) -> LayerTrace<F> {
        let mut h = vec![F::zero(); self.hidden_dim()];
        let mut steps = Vec::with_capacity(inputs.len());
        let mut outputs = Vec::with_capacity(inputs.len());
        for x in inputs {
            let cache = self.step(x, &h);
            h = Self::next_hidden(&cache);
            steps.push(cache);
            outputs.push(h.clone());
        }
        LayerTrace { steps, outputs }
    }

    /// Backpropagates `d_outputs` (one gradient per hidden state) through the
    /// sequence, accumulating into `grads` and returning per-step input gradients.
    pub(crate) fn backward(
        &self,
        trace: &LayerTrace<F>,
        d_outputs: &[Vec<F>],
        grads: &mut GruLayer<F>,
    ) -> Vec<Vec<F>> {
        let hd = self.hidden_dim();
        let in_dim = self.input_dim();
        let mut d_inputs = vec![vec![F::zero(); in_dim]; trace.steps.len()];
        let mut dh_next = vec![F::zero(); hd];
        let mut dgi = vec![F::zero(); 3 * hd];
        let mut dgh = vec![F::zero(); 3 * hd];

        for t in (0..trace.steps.len()).rev() {
            let c = &trace.steps[t];
            let mut dh_prev = vec![F::zero(); hd];
            for j in 0..hd {
                let dh = d_outputs[t][j] + dh_next[j];
                let (r, z, n) = (c.r[j], c.z[j], c.n[j]);
                let dn = dh * (F::one() - z);
                let dz = dh * (c.h_prev[j] - n);
                dh_prev[j] = dh * z;
                let dan = dn * (F::one() - n * n);
                let dr = dan * c.hn[j];
                let daz = dz * z * (F::one() - z);
                let dar = dr * r * (F::one() - r);
                dgi[j] = dar;
                dgi[hd + j] = daz;
                dgi[2 * hd + j] = dan;
                dgh[j] = dar;
                dgh[hd + j] = daz;
                dgh[2 * hd + j] = dan * r;
            }
            outer_acc(grads.w_ih.data_mut(), &dgi, &c.x);
            outer_acc(grads.w_hh.data_mut(), &dgh, &c.h_prev);
            for (b, &g) in grads.b_ih.data_mut().iter_mut().zip(&dgi) {
                *b += g;
            }
            for (b, &g) in grads.b_hh.data_mut().iter_mut().zip(&dgh) {
                *b += g;
            }
            gemv_t_acc(self.w_ih.data(), in_dim, &dgi, &mut d_inputs[t]);
            gemv_t_acc(self.w_hh.data(), hd, &dgh, &mut dh_prev);
            dh_next = dh_prev;
        }
        d_inputs
    }
}
