//! Plain feedforward networks in f64 with manual backpropagation.
//!
//! The first layer takes sparse count vectors and is computed by index
//! gathering, so cost scales with the number of nonzero features, not
//! the input dimension. Counts pass through ln(1 + c) on the way in to
//! keep repeated-subterm multiplicities from dominating the scale.
//! Hidden layers use tanh; the output layer is linear with one unit.
//! Everything is deterministic given the init seed.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::features::SparseVec;

/// ln(1 + count), the transform applied to every sparse input entry.
pub(crate) fn squash(count: u32) -> f64 {
    (1.0 + f64::from(count)).ln()
}

/// One fully connected layer, row-major weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    fn xavier(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Dense {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        Dense {
            rows,
            cols,
            w: (0..rows * cols).map(|_| dist.sample(rng)).collect(),
            b: vec![0.0; rows],
        }
    }
}

/// A multilayer perceptron: sparse input layer, tanh hidden layers, one
/// linear output unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations recorded by a forward pass, consumed by `backward`.
/// `hidden[l]` is the post-tanh output of layer `l`.
pub struct Forward {
    pub hidden: Vec<Vec<f64>>,
    pub out: f64,
}

/// Gradient buffers shaped like an [`Mlp`].
#[derive(Clone, Debug)]
pub struct MlpGrads {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> MlpGrads {
        MlpGrads {
            w: net.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            b: net.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, f: f64) {
        for t in self.w.iter_mut().chain(self.b.iter_mut()) {
            for g in t {
                *g *= f;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w
            .iter()
            .chain(self.b.iter())
            .all(|t| t.iter().all(|g| g.is_finite()))
    }
}

impl Mlp {
    /// A network mapping `in_dim` sparse inputs through `hidden_layers`
    /// tanh layers of width `hidden` to a single linear output.
    pub fn new(in_dim: usize, hidden: usize, hidden_layers: usize, seed: u64) -> Mlp {
        assert!(hidden_layers >= 1, "need at least one hidden layer");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(hidden_layers + 1);
        layers.push(Dense::xavier(hidden, in_dim, &mut rng));
        for _ in 1..hidden_layers {
            layers.push(Dense::xavier(hidden, hidden, &mut rng));
        }
        layers.push(Dense::xavier(1, hidden, &mut rng));
        Mlp { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// First-layer pre-activation contribution of some input parts,
    /// without the bias. Lets callers share the state part across all
    /// actions offered in one proof state.
    pub fn prefix(&self, parts: &[(usize, &SparseVec)]) -> Vec<f64> {
        let l = &self.layers[0];
        let mut acc = vec![0.0; l.rows];
        for &(offset, v) in parts {
            gather(l, offset, v, &mut acc);
        }
        acc
    }

    /// Full forward pass from a first-layer prefix plus optional extra
    /// input parts (the per-action block).
    pub fn forward(&self, prefix: &[f64], extra: &[(usize, &SparseVec)]) -> Forward {
        let first = &self.layers[0];
        debug_assert_eq!(prefix.len(), first.rows);
        let mut z: Vec<f64> = prefix.to_vec();
        for &(offset, v) in extra {
            gather(first, offset, v, &mut z);
        }
        for (zi, bi) in z.iter_mut().zip(&first.b) {
            *zi = (*zi + bi).tanh();
        }

        let mut hidden = Vec::with_capacity(self.layers.len() - 1);
        hidden.push(z);
        for l in &self.layers[1..self.layers.len() - 1] {
            let prev = hidden.last().expect("nonempty");
            let mut z = l.b.clone();
            for r in 0..l.rows {
                let row = &l.w[r * l.cols..(r + 1) * l.cols];
                z[r] += dot(row, prev);
            }
            for zi in &mut z {
                *zi = zi.tanh();
            }
            hidden.push(z);
        }

        let last = self.layers.last().expect("nonempty");
        let out = last.b[0] + dot(&last.w, hidden.last().expect("nonempty"));
        Forward { hidden, out }
    }

    /// Convenience single pass over whole inputs.
    pub fn forward_parts(&self, parts: &[(usize, &SparseVec)]) -> Forward {
        self.forward(&self.prefix(&[]), parts)
    }

    /// Accumulates parameter gradients for `d out` into `grads`. The
    /// sparse `inputs` must be the ones the forward pass saw.
    pub fn backward(
        &self,
        dout: f64,
        fwd: &Forward,
        inputs: &[(usize, &SparseVec)],
        grads: &mut MlpGrads,
    ) {
        let n = self.layers.len();
        let last = &self.layers[n - 1];
        let top = fwd.hidden.last().expect("nonempty");
        grads.b[n - 1][0] += dout;
        for (g, a) in grads.w[n - 1].iter_mut().zip(top) {
            *g += dout * a;
        }
        let mut da: Vec<f64> = last.w.iter().map(|w| dout * w).collect();

        for li in (1..n - 1).rev() {
            let a = &fwd.hidden[li];
            let mut dz = vec![0.0; a.len()];
            for (i, (d, ai)) in da.iter().zip(a).enumerate() {
                dz[i] = d * (1.0 - ai * ai);
            }
            let l = &self.layers[li];
            let prev = &fwd.hidden[li - 1];
            for r in 0..l.rows {
                grads.b[li][r] += dz[r];
                let gw = &mut grads.w[li][r * l.cols..(r + 1) * l.cols];
                for (g, p) in gw.iter_mut().zip(prev) {
                    *g += dz[r] * p;
                }
            }
            let mut next_da = vec![0.0; l.cols];
            for r in 0..l.rows {
                let row = &l.w[r * l.cols..(r + 1) * l.cols];
                for (nd, w) in next_da.iter_mut().zip(row) {
                    *nd += dz[r] * w;
                }
            }
            da = next_da;
        }

        let first = &self.layers[0];
        let a = &fwd.hidden[0];
        for r in 0..first.rows {
            let dz = da[r] * (1.0 - a[r] * a[r]);
            grads.b[0][r] += dz;
            for &(offset, v) in inputs {
                for (i, c) in v.iter() {
                    grads.w[0][r * first.cols + offset + i] += dz * squash(c);
                }
            }
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            out.push(l.w.as_mut_slice());
            out.push(l.b.as_mut_slice());
        }
        out
    }
}

fn gather(l: &Dense, offset: usize, v: &SparseVec, acc: &mut [f64]) {
    for (i, c) in v.iter() {
        let col = offset + i;
        debug_assert!(col < l.cols, "input index {col} out of range {}", l.cols);
        let x = squash(c);
        for (r, a) in acc.iter_mut().enumerate() {
            *a += l.w[r * l.cols + col] * x;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Adaptive moment estimation over one network's tensors. Moment
/// buffers are not part of checkpoints; a reloaded learner restarts
/// them cold.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Adam {
        let shapes: Vec<usize> = net
            .layers
            .iter()
            .flat_map(|l| [l.w.len(), l.b.len()])
            .collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGrads) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let tensors = net.tensors_mut();
        let grad_tensors: Vec<&[f64]> = grads
            .w
            .iter()
            .zip(&grads.b)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect();
        for ((params, grad), (m, v)) in tensors
            .into_iter()
            .zip(grad_tensors)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..params.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(dim: usize, entries: &[(usize, u32)]) -> SparseVec {
        let mut v = SparseVec::zeros(dim);
        for &(i, c) in entries {
            v.bump(i, c);
        }
        v
    }

    #[test]
    fn forward_is_deterministic_and_prefix_split_matches_single_pass() {
        let net = Mlp::new(12, 5, 2, 7);
        let state = sv(8, &[(0, 1), (3, 2), (7, 1)]);
        let action = sv(4, &[(1, 1), (2, 3)]);
        let parts = [(0usize, &state), (8usize, &action)];
        let whole = net.forward_parts(&parts);
        let prefix = net.prefix(&[(0, &state)]);
        let split = net.forward(&prefix, &[(8, &action)]);
        assert_eq!(whole.out, split.out);
        let again = net.forward_parts(&parts);
        assert_eq!(whole.out, again.out);
    }

    #[test]
    fn same_seed_same_network_different_seed_different_network() {
        let a = Mlp::new(10, 4, 2, 1);
        let b = Mlp::new(10, 4, 2, 1);
        let c = Mlp::new(10, 4, 2, 2);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.param_count(), 10 * 4 + 4 + 4 * 4 + 4 + 4 + 1);
    }

    #[test]
    fn backward_matches_finite_differences_on_the_raw_output() {
        let mut net = Mlp::new(10, 4, 2, 3);
        let state = sv(6, &[(1, 2), (4, 1)]);
        let action = sv(4, &[(0, 1), (3, 2)]);
        let parts = [(0usize, &state), (6usize, &action)];

        let mut grads = MlpGrads::zeros_like(&net);
        let fwd = net.forward_parts(&parts);
        net.backward(1.0, &fwd, &parts, &mut grads);

        let h = 1e-6;
        for li in 0..net.layers.len() {
            for wi in 0..net.layers[li].w.len() {
                let orig = net.layers[li].w[wi];
                net.layers[li].w[wi] = orig + h;
                let up = net.forward_parts(&parts).out;
                net.layers[li].w[wi] = orig - h;
                let down = net.forward_parts(&parts).out;
                net.layers[li].w[wi] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.w[li][wi];
                assert!(
                    (numeric - analytic).abs() <= 1e-6 + 1e-5 * numeric.abs(),
                    "layer {li} w[{wi}]: analytic {analytic} numeric {numeric}"
                );
            }
            for bi in 0..net.layers[li].b.len() {
                let orig = net.layers[li].b[bi];
                net.layers[li].b[bi] = orig + h;
                let up = net.forward_parts(&parts).out;
                net.layers[li].b[bi] = orig - h;
                let down = net.forward_parts(&parts).out;
                net.layers[li].b[bi] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.b[li][bi];
                assert!(
                    (numeric - analytic).abs() <= 1e-6 + 1e-5 * numeric.abs(),
                    "layer {li} b[{bi}]: analytic {analytic} numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn adam_descends_a_simple_quadratic_fit() {
        // Fit the constant function 0.5 from a single input; loss must
        // drop by orders of magnitude in a few hundred steps.
        let mut net = Mlp::new(3, 4, 1, 9);
        let mut opt = Adam::new(&net, 1e-2);
        let x = sv(3, &[(0, 1), (2, 1)]);
        let parts = [(0usize, &x)];
        let target = 0.5;
        let first = (net.forward_parts(&parts).out - target).powi(2);
        for _ in 0..300 {
            let fwd = net.forward_parts(&parts);
            let mut grads = MlpGrads::zeros_like(&net);
            net.backward(2.0 * (fwd.out - target), &fwd, &parts, &mut grads);
            opt.step(&mut net, &grads);
        }
        let last = (net.forward_parts(&parts).out - target).powi(2);
        assert!(last < first * 1e-4, "first {first} last {last}");
    }
}
