use super::{uniform_fan_in, Parameterized, Rng, Tensor2};
use crate::error::{ensure_finite, ensure_len, Error, Result};

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Single LSTM cell. Each gate weight is hidden×(input+hidden) and acts on
/// the concatenation `[x; h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_i: Tensor2,
    pub w_f: Tensor2,
    pub w_o: Tensor2,
    pub w_g: Tensor2,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_o: Vec<f64>,
    pub b_g: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads {
    pub w_i: Tensor2,
    pub w_f: Tensor2,
    pub w_o: Tensor2,
    pub w_g: Tensor2,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_o: Vec<f64>,
    pub b_g: Vec<f64>,
}

/// Activations of one step, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub concat: Vec<f64>,
    pub input_gate: Vec<f64>,
    pub forget_gate: Vec<f64>,
    pub output_gate: Vec<f64>,
    pub candidate: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

impl LstmCell {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = Tensor2::zeros(hidden_dim, input_dim + hidden_dim);
        Self {
            input_dim,
            hidden_dim,
            w_i: w.clone(),
            w_f: w.clone(),
            w_o: w.clone(),
            w_g: w,
            b_i: vec![0.0; hidden_dim],
            b_f: vec![0.0; hidden_dim],
            b_o: vec![0.0; hidden_dim],
            b_g: vec![0.0; hidden_dim],
        }
    }

    /// Uniform fan-in weights, zero biases except the forget gate at 1.0.
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Self {
        let fan_in = input_dim + hidden_dim;
        let mut gate = || uniform_fan_in(rng, hidden_dim, fan_in, fan_in);
        let (w_i, w_f, w_o, w_g) = (gate(), gate(), gate(), gate());
        Self {
            input_dim,
            hidden_dim,
            w_i,
            w_f,
            w_o,
            w_g,
            b_i: vec![0.0; hidden_dim],
            b_f: vec![1.0; hidden_dim],
            b_o: vec![0.0; hidden_dim],
            b_g: vec![0.0; hidden_dim],
        }
    }

    pub fn zero_grads(&self) -> LstmGrads {
        let w = Tensor2::zeros(self.hidden_dim, self.input_dim + self.hidden_dim);
        let b = vec![0.0; self.hidden_dim];
        LstmGrads {
            w_i: w.clone(),
            w_f: w.clone(),
            w_o: w.clone(),
            w_g: w,
            b_i: b.clone(),
            b_f: b.clone(),
            b_o: b.clone(),
            b_g: b,
        }
    }

    /// One update. Returns `(h', c')`.
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (h_next, c_next, _) = self.step_cached(x, h, c)?;
        Ok((h_next, c_next))
    }

    pub fn step_cached(
        &self,
        x: &[f64],
        h: &[f64],
        c: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, LstmCache)> {
        ensure_len("lstm input", self.input_dim, x.len())?;
        ensure_len("lstm hidden state", self.hidden_dim, h.len())?;
        ensure_len("lstm cell state", self.hidden_dim, c.len())?;
        ensure_finite("lstm input", x)?;
        ensure_finite("lstm hidden state", h)?;
        ensure_finite("lstm cell state", c)?;

        let mut concat = Vec::with_capacity(self.input_dim + self.hidden_dim);
        concat.extend_from_slice(x);
        concat.extend_from_slice(h);

        let gate = |w: &Tensor2, b: &[f64], f: fn(f64) -> f64| -> Vec<f64> {
            w.iter_rows()
                .zip(b)
                .map(|(row, bi)| f(super::dot(row, &concat) + bi))
                .collect()
        };
        let input_gate = gate(&self.w_i, &self.b_i, sigmoid);
        let forget_gate = gate(&self.w_f, &self.b_f, sigmoid);
        let output_gate = gate(&self.w_o, &self.b_o, sigmoid);
        let candidate = gate(&self.w_g, &self.b_g, f64::tanh);

        let c_next: Vec<f64> = (0..self.hidden_dim)
            .map(|k| forget_gate[k] * c[k] + input_gate[k] * candidate[k])
            .collect();
        let tanh_c: Vec<f64> = c_next.iter().map(|v| v.tanh()).collect();
        let h_next: Vec<f64> = output_gate.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();
        if !h_next.iter().chain(&c_next).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("lstm state".into()));
        }
        let cache = LstmCache {
            concat,
            input_gate,
            forget_gate,
            output_gate,
            candidate,
            c_prev: c.to_vec(),
            tanh_c,
        };
        Ok((h_next, c_next, cache))
    }

    /// Backpropagates through one step given gradients w.r.t. `h'` and `c'`.
    /// Returns gradients w.r.t. `(x, h, c)`.
    pub fn backward(
        &self,
        cache: &LstmCache,
        d_h: &[f64],
        d_c: &[f64],
        grads: &mut LstmGrads,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.hidden_dim;
        let mut da_i = vec![0.0; n];
        let mut da_f = vec![0.0; n];
        let mut da_o = vec![0.0; n];
        let mut da_g = vec![0.0; n];
        let mut d_c_prev = vec![0.0; n];
        for k in 0..n {
            let (i, f, o, g) = (
                cache.input_gate[k],
                cache.forget_gate[k],
                cache.output_gate[k],
                cache.candidate[k],
            );
            let t = cache.tanh_c[k];
            let dc = d_c[k] + d_h[k] * o * (1.0 - t * t);
            da_o[k] = d_h[k] * t * o * (1.0 - o);
            da_i[k] = dc * g * i * (1.0 - i);
            da_f[k] = dc * cache.c_prev[k] * f * (1.0 - f);
            da_g[k] = dc * i * (1.0 - g * g);
            d_c_prev[k] = dc * f;
        }

        let mut d_concat = vec![0.0; self.input_dim + n];
        for (w, gw, gb, da) in [
            (&self.w_i, &mut grads.w_i, &mut grads.b_i, &da_i),
            (&self.w_f, &mut grads.w_f, &mut grads.b_f, &da_f),
            (&self.w_o, &mut grads.w_o, &mut grads.b_o, &da_o),
            (&self.w_g, &mut grads.w_g, &mut grads.b_g, &da_g),
        ] {
            gw.add_outer(da, &cache.concat);
            for (b, d) in gb.iter_mut().zip(da) {
                *b += d;
            }
            w.matvec_t_acc(da, &mut d_concat);
        }
        let d_h_prev = d_concat.split_off(self.input_dim);
        (d_concat, d_h_prev, d_c_prev)
    }
}

impl Parameterized for LstmCell {
    fn params(&self) -> Vec<&[f64]> {
        vec![
            self.w_i.data(),
            self.w_f.data(),
            self.w_o.data(),
            self.w_g.data(),
            &self.b_i,
            &self.b_f,
            &self.b_o,
            &self.b_g,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_i.data_mut(),
            self.w_f.data_mut(),
            self.w_o.data_mut(),
            self.w_g.data_mut(),
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_g,
        ]
    }
}

impl Parameterized for LstmGrads {
    fn params(&self) -> Vec<&[f64]> {
        vec![
            self.w_i.data(),
            self.w_f.data(),
            self.w_o.data(),
            self.w_g.data(),
            &self.b_i,
            &self.b_f,
            &self.b_o,
            &self.b_g,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_i.data_mut(),
            self.w_f.data_mut(),
            self.w_o.data_mut(),
            self.w_g.data_mut(),
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_g,
        ]
    }
}
