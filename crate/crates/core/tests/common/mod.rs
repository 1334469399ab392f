#![allow(dead_code)]

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;

use neurocap::data::{generate_synthetic, load_dataset, Dataset, SyntheticSpec};
use neurocap::nn::{
    gradient_check, mse_loss, seeded_rng, softmax_cross_entropy, Activation, DenseLayer, GradCheckReport,
    LstmCell, Parameterized, Rng,
};

/// Writes a synthetic dataset into `dir` and loads it back.
pub fn synthetic_dataset(dir: &Path, spec: &SyntheticSpec, seed: u64) -> (PathBuf, Dataset) {
    let ds = generate_synthetic(spec, seed).unwrap();
    let manifest = ds.write_to(dir).unwrap();
    let loaded = load_dataset(&manifest).unwrap();
    (manifest, loaded)
}

fn random_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Dense → LSTM (three unrolled steps) → dense logits with cross-entropy at
/// every step, plus an MSE readout of the final hidden state. Every weight,
/// every input and the initial state are differentiated.
pub struct Composite {
    pub encoder: DenseLayer,
    pub lstm: LstmCell,
    pub logits: DenseLayer,
    pub readout: DenseLayer,
    pub inputs: Vec<Vec<f64>>,
    pub h0: Vec<f64>,
    pub c0: Vec<f64>,
    pub targets: Vec<usize>,
    pub regression_target: Vec<f64>,
}

pub const STEPS: usize = 3;

impl Composite {
    pub fn random(seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let a = rng.random_range(2..=5);
        let d = rng.random_range(2..=5);
        let h = rng.random_range(2..=5);
        let v = rng.random_range(3..=6);
        let m = rng.random_range(1..=4);
        let act = [Activation::Identity, Activation::Tanh, Activation::Relu][rng.random_range(0..3)];
        let mut lstm = LstmCell::init(d, h, &mut rng);
        // move the forget bias off its constant init so its gradient is exercised
        let fb = random_vec(&mut rng, h);
        lstm.b_f.iter_mut().zip(fb).for_each(|(b, r)| *b += 0.5 * r);
        Self {
            encoder: DenseLayer::init(a, d, act, &mut rng),
            lstm,
            logits: DenseLayer::init(h, v, Activation::Identity, &mut rng),
            readout: DenseLayer::init(h, m, Activation::Tanh, &mut rng),
            inputs: (0..STEPS).map(|_| random_vec(&mut rng, a)).collect(),
            h0: random_vec(&mut rng, h).iter().map(|x| 0.5 * x).collect(),
            c0: random_vec(&mut rng, h).iter().map(|x| 0.5 * x).collect(),
            targets: (0..STEPS).map(|_| rng.random_range(0..v)).collect(),
            regression_target: random_vec(&mut rng, m),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut p = self.encoder.flatten();
        p.extend(self.lstm.flatten());
        p.extend(self.logits.flatten());
        p.extend(self.readout.flatten());
        for x in &self.inputs {
            p.extend(x);
        }
        p.extend(&self.h0);
        p.extend(&self.c0);
        p
    }

    fn assign(&mut self, flat: &[f64]) {
        let mut off = 0;
        let mut take = |n: usize| {
            let s = &flat[off..off + n];
            off += n;
            s.to_vec()
        };
        let n = self.encoder.param_count();
        self.encoder.assign_flat(&take(n)).unwrap();
        let n = self.lstm.param_count();
        self.lstm.assign_flat(&take(n)).unwrap();
        let n = self.logits.param_count();
        self.logits.assign_flat(&take(n)).unwrap();
        let n = self.readout.param_count();
        self.readout.assign_flat(&take(n)).unwrap();
        for i in 0..STEPS {
            let n = self.inputs[i].len();
            self.inputs[i] = take(n);
        }
        let n = self.h0.len();
        self.h0 = take(n);
        self.c0 = take(n);
    }

    pub fn loss_and_grad(&self) -> (f64, Vec<f64>) {
        let mut g_enc = self.encoder.zero_grads();
        let mut g_lstm = self.lstm.zero_grads();
        let mut g_logits = self.logits.zero_grads();
        let mut g_read = self.readout.zero_grads();

        let mut h = self.h0.clone();
        let mut c = self.c0.clone();
        let mut enc_caches = Vec::new();
        let mut lstm_caches = Vec::new();
        let mut logit_caches = Vec::new();
        let mut loss = 0.0;
        let mut d_logits = Vec::new();
        for t in 0..STEPS {
            let e = self.encoder.forward_cached(&self.inputs[t]).unwrap();
            let (h2, c2, lc) = self.lstm.step_cached(&e.output, &h, &c).unwrap();
            let lo = self.logits.forward_cached(&h2).unwrap();
            let (l, d) = softmax_cross_entropy(&lo.output, self.targets[t]).unwrap();
            loss += l;
            d_logits.push(d);
            enc_caches.push(e);
            lstm_caches.push(lc);
            logit_caches.push(lo);
            h = h2;
            c = c2;
        }
        let ro = self.readout.forward_cached(&h).unwrap();
        let (l, d_ro) = mse_loss(&ro.output, &self.regression_target).unwrap();
        loss += l;

        let mut d_h = self.readout.backward(&ro, &d_ro, &mut g_read);
        let mut d_c = vec![0.0; h.len()];
        let mut d_inputs = vec![Vec::new(); STEPS];
        for t in (0..STEPS).rev() {
            let from_logits = self.logits.backward(&logit_caches[t], &d_logits[t], &mut g_logits);
            d_h.iter_mut().zip(&from_logits).for_each(|(a, b)| *a += b);
            let (d_x, d_hp, d_cp) = self.lstm.backward(&lstm_caches[t], &d_h, &d_c, &mut g_lstm);
            d_inputs[t] = self.encoder.backward(&enc_caches[t], &d_x, &mut g_enc);
            d_h = d_hp;
            d_c = d_cp;
        }
        let mut grad = g_enc.flatten();
        grad.extend(g_lstm.flatten());
        grad.extend(g_logits.flatten());
        grad.extend(g_read.flatten());
        for d in d_inputs {
            grad.extend(d);
        }
        grad.extend(d_h);
        grad.extend(d_c);
        (loss, grad)
    }
}

/// Gradient check of one random composite configuration.
pub fn composite_gradcheck(seed: u64, tolerance: f64) -> GradCheckReport {
    let base = Composite::random(seed);
    let params = base.flatten();
    let mut work = Composite::random(seed);
    gradient_check(
        |p| {
            work.assign(p);
            Ok(work.loss_and_grad())
        },
        &params,
        tolerance,
    )
    .unwrap()
}

/// Largest principal angle (radians) between the row spaces of `a` and `b`,
/// both with orthonormal rows.
pub fn subspace_angle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let k = a.len();
    let m = DMatrix::from_fn(k, k, |i, j| a[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum::<f64>());
    let sv = m.singular_values();
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min).min(1.0);
    // acos is ill-conditioned near 1; use the sine of the angle instead
    (1.0 - min * min).max(0.0).sqrt().asin()
}

/// Top-`k` eigenvectors of the sample covariance from nalgebra, descending.
pub fn oracle_components(points: &[Vec<f64>], k: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = points.len();
    let d = points[0].len();
    let x = DMatrix::from_fn(n, d, |i, j| points[i][j]);
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let comps = order[..k]
        .iter()
        .map(|&c| eig.eigenvectors.column(c).iter().cloned().collect())
        .collect();
    let values = order.iter().map(|&c| eig.eigenvalues[c]).collect();
    (comps, values)
}
