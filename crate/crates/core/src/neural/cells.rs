//! LSTM and GRU cells: one forward step with its cache, and the matching
//! reverse-mode step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::NeuralError;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<(), NeuralError> {
    if got == want {
        Ok(())
    } else {
        Err(NeuralError::Shape(format!("{what} has length {got}, expected {want}")))
    }
}

fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in &mut t.data {
        *v = rng.random_range(-bound..bound);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CellState {
    pub h: Vec<f64>,
    /// Empty for GRU layers.
    pub c: Vec<f64>,
}

/// Gate matrices act on the concatenation `[h_{t-1}, x_t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerWeights {
    pub w_i: Tensor,
    pub w_f: Tensor,
    pub w_g: Tensor,
    pub w_o: Tensor,
    pub b_i: Tensor,
    pub b_f: Tensor,
    pub b_g: Tensor,
    pub b_o: Tensor,
}

impl LstmLayerWeights {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = Tensor::zeros(&[hidden, hidden + input]);
        let b = Tensor::zeros(&[hidden]);
        Self {
            w_i: w.clone(),
            w_f: w.clone(),
            w_g: w.clone(),
            w_o: w,
            b_i: b.clone(),
            b_f: b.clone(),
            b_g: b.clone(),
            b_o: b,
        }
    }

    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / ((hidden + input) as f64).sqrt();
        let w = |rng: &mut _| uniform(&[hidden, hidden + input], bound, rng);
        let b = |rng: &mut _| uniform(&[hidden], bound, rng);
        Self {
            w_i: w(rng),
            w_f: w(rng),
            w_g: w(rng),
            w_o: w(rng),
            b_i: b(rng),
            b_f: b(rng),
            b_g: b(rng),
            b_o: b(rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.b_i.len()
    }

    pub fn input(&self) -> usize {
        self.w_i.cols() - self.hidden()
    }

    pub fn tensors(&self) -> [&Tensor; 8] {
        [&self.w_i, &self.w_f, &self.w_g, &self.w_o, &self.b_i, &self.b_f, &self.b_g, &self.b_o]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 8] {
        [
            &mut self.w_i,
            &mut self.w_f,
            &mut self.w_g,
            &mut self.w_o,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_g,
            &mut self.b_o,
        ]
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let h = self.hidden();
        let shape = &self.w_i.shape;
        if shape.len() != 2 || shape[0] != h || shape[1] < h {
            return Err(NeuralError::Shape(format!("LSTM gate matrix shape {shape:?} for hidden {h}")));
        }
        for w in [&self.w_f, &self.w_g, &self.w_o] {
            if &w.shape != shape {
                return Err(NeuralError::Shape(format!("LSTM gate shapes differ: {:?} vs {shape:?}", w.shape)));
            }
        }
        for b in [&self.b_f, &self.b_g, &self.b_o] {
            check_len("LSTM bias", b.len(), h)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruLayerWeights {
    pub w_z: Tensor,
    pub w_r: Tensor,
    pub w_h: Tensor,
    pub u_z: Tensor,
    pub u_r: Tensor,
    pub u_h: Tensor,
    pub b_z: Tensor,
    pub b_r: Tensor,
    pub b_h: Tensor,
}

impl GruLayerWeights {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = Tensor::zeros(&[hidden, input]);
        let u = Tensor::zeros(&[hidden, hidden]);
        let b = Tensor::zeros(&[hidden]);
        Self {
            w_z: w.clone(),
            w_r: w.clone(),
            w_h: w,
            u_z: u.clone(),
            u_r: u.clone(),
            u_h: u,
            b_z: b.clone(),
            b_r: b.clone(),
            b_h: b,
        }
    }

    /// `W` uses fan-in `input`, `U` and the biases fan-in `hidden`.
    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let wb = 1.0 / (input as f64).sqrt();
        let ub = 1.0 / (hidden as f64).sqrt();
        Self {
            w_z: uniform(&[hidden, input], wb, rng),
            w_r: uniform(&[hidden, input], wb, rng),
            w_h: uniform(&[hidden, input], wb, rng),
            u_z: uniform(&[hidden, hidden], ub, rng),
            u_r: uniform(&[hidden, hidden], ub, rng),
            u_h: uniform(&[hidden, hidden], ub, rng),
            b_z: uniform(&[hidden], ub, rng),
            b_r: uniform(&[hidden], ub, rng),
            b_h: uniform(&[hidden], ub, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.b_z.len()
    }

    pub fn input(&self) -> usize {
        self.w_z.cols()
    }

    pub fn tensors(&self) -> [&Tensor; 9] {
        [
            &self.w_z, &self.w_r, &self.w_h, &self.u_z, &self.u_r, &self.u_h, &self.b_z, &self.b_r, &self.b_h,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 9] {
        [
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_h,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let (h, x) = (self.hidden(), self.input());
        for w in [&self.w_z, &self.w_r, &self.w_h] {
            if w.shape != [h, x] {
                return Err(NeuralError::Shape(format!("GRU W shape {:?}, expected [{h}, {x}]", w.shape)));
            }
        }
        for u in [&self.u_z, &self.u_r, &self.u_h] {
            if u.shape != [h, h] {
                return Err(NeuralError::Shape(format!("GRU U shape {:?}, expected [{h}, {h}]", u.shape)));
            }
        }
        for b in [&self.b_r, &self.b_h] {
            check_len("GRU bias", b.len(), h)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LstmCache {
    hx: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

fn affine(w: &Tensor, b: &Tensor, v: &[f64]) -> Vec<f64> {
    let mut out = b.data.clone();
    w.matvec_acc(v, &mut out);
    out
}

pub(crate) fn lstm_forward(x: &[f64], h: &[f64], c: &[f64], w: &LstmLayerWeights) -> (Vec<f64>, Vec<f64>, LstmCache) {
    let mut hx = Vec::with_capacity(h.len() + x.len());
    hx.extend_from_slice(h);
    hx.extend_from_slice(x);
    let i: Vec<f64> = affine(&w.w_i, &w.b_i, &hx).into_iter().map(sigmoid).collect();
    let f: Vec<f64> = affine(&w.w_f, &w.b_f, &hx).into_iter().map(sigmoid).collect();
    let g: Vec<f64> = affine(&w.w_g, &w.b_g, &hx).into_iter().map(f64::tanh).collect();
    let o: Vec<f64> = affine(&w.w_o, &w.b_o, &hx).into_iter().map(sigmoid).collect();
    let c_new: Vec<f64> = (0..h.len()).map(|j| f[j] * c[j] + i[j] * g[j]).collect();
    let tanh_c: Vec<f64> = c_new.iter().map(|v| v.tanh()).collect();
    let h_new: Vec<f64> = o.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();
    let cache = LstmCache {
        hx,
        i,
        f,
        g,
        o,
        c_prev: c.to_vec(),
        tanh_c,
    };
    (h_new, c_new, cache)
}

/// Given `dh` and `dc` at this step's outputs, accumulates parameter
/// gradients and returns `(dx, dh_prev, dc_prev)`.
pub(crate) fn lstm_backward(
    cache: &LstmCache,
    dh: &[f64],
    dc: &[f64],
    w: &LstmLayerWeights,
    grad: &mut LstmLayerWeights,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = dh.len();
    let mut da_i = vec![0.0; n];
    let mut da_f = vec![0.0; n];
    let mut da_g = vec![0.0; n];
    let mut da_o = vec![0.0; n];
    let mut dc_prev = vec![0.0; n];
    for j in 0..n {
        let (i, f, g, o, t) = (cache.i[j], cache.f[j], cache.g[j], cache.o[j], cache.tanh_c[j]);
        let dct = dc[j] + dh[j] * o * (1.0 - t * t);
        da_o[j] = dh[j] * t * o * (1.0 - o);
        da_i[j] = dct * g * i * (1.0 - i);
        da_f[j] = dct * cache.c_prev[j] * f * (1.0 - f);
        da_g[j] = dct * i * (1.0 - g * g);
        dc_prev[j] = dct * f;
    }
    let mut dhx = vec![0.0; cache.hx.len()];
    for (da, wm, gw, gb) in [
        (&da_i, &w.w_i, &mut grad.w_i, &mut grad.b_i),
        (&da_f, &w.w_f, &mut grad.w_f, &mut grad.b_f),
        (&da_g, &w.w_g, &mut grad.w_g, &mut grad.b_g),
        (&da_o, &w.w_o, &mut grad.w_o, &mut grad.b_o),
    ] {
        gw.add_outer(da, &cache.hx);
        gb.add_assign(da);
        wm.matvec_t_acc(da, &mut dhx);
    }
    let dx = dhx.split_off(n);
    (dx, dhx, dc_prev)
}

#[derive(Debug, Clone)]
pub(crate) struct GruCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    rh: Vec<f64>,
    h_tilde: Vec<f64>,
}

pub(crate) fn gru_forward(x: &[f64], h: &[f64], w: &GruLayerWeights) -> (Vec<f64>, GruCache) {
    let gate = |wm: &Tensor, um: &Tensor, b: &Tensor, hv: &[f64]| {
        let mut a = affine(wm, b, x);
        um.matvec_acc(hv, &mut a);
        a
    };
    let z: Vec<f64> = gate(&w.w_z, &w.u_z, &w.b_z, h).into_iter().map(sigmoid).collect();
    let r: Vec<f64> = gate(&w.w_r, &w.u_r, &w.b_r, h).into_iter().map(sigmoid).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(r, h)| r * h).collect();
    let h_tilde: Vec<f64> = gate(&w.w_h, &w.u_h, &w.b_h, &rh).into_iter().map(f64::tanh).collect();
    let h_new: Vec<f64> = (0..h.len()).map(|j| (1.0 - z[j]) * h[j] + z[j] * h_tilde[j]).collect();
    let cache = GruCache {
        x: x.to_vec(),
        h_prev: h.to_vec(),
        z,
        r,
        rh,
        h_tilde,
    };
    (h_new, cache)
}

/// Returns `(dx, dh_prev)`.
pub(crate) fn gru_backward(cache: &GruCache, dh: &[f64], w: &GruLayerWeights, grad: &mut GruLayerWeights) -> (Vec<f64>, Vec<f64>) {
    let n = dh.len();
    let mut dh_prev: Vec<f64> = (0..n).map(|j| dh[j] * (1.0 - cache.z[j])).collect();
    let da_z: Vec<f64> = (0..n)
        .map(|j| dh[j] * (cache.h_tilde[j] - cache.h_prev[j]) * cache.z[j] * (1.0 - cache.z[j]))
        .collect();
    let da_h: Vec<f64> = (0..n)
        .map(|j| dh[j] * cache.z[j] * (1.0 - cache.h_tilde[j] * cache.h_tilde[j]))
        .collect();
    let mut d_rh = vec![0.0; n];
    w.u_h.matvec_t_acc(&da_h, &mut d_rh);
    let da_r: Vec<f64> = (0..n)
        .map(|j| d_rh[j] * cache.h_prev[j] * cache.r[j] * (1.0 - cache.r[j]))
        .collect();
    for j in 0..n {
        dh_prev[j] += d_rh[j] * cache.r[j];
    }

    let mut dx = vec![0.0; cache.x.len()];
    grad.w_h.add_outer(&da_h, &cache.x);
    grad.u_h.add_outer(&da_h, &cache.rh);
    grad.b_h.add_assign(&da_h);
    w.w_h.matvec_t_acc(&da_h, &mut dx);
    for (da, wm, um, gw, gu, gb) in [
        (&da_z, &w.w_z, &w.u_z, &mut grad.w_z, &mut grad.u_z, &mut grad.b_z),
        (&da_r, &w.w_r, &w.u_r, &mut grad.w_r, &mut grad.u_r, &mut grad.b_r),
    ] {
        gw.add_outer(da, &cache.x);
        gu.add_outer(da, &cache.h_prev);
        gb.add_assign(da);
        wm.matvec_t_acc(da, &mut dx);
        um.matvec_t_acc(da, &mut dh_prev);
    }
    (dx, dh_prev)
}

/// One LSTM step on explicit state.
pub fn lstm_step(x: &[f64], state: &CellState, w: &LstmLayerWeights) -> Result<CellState, NeuralError> {
    w.validate()?;
    check_len("LSTM input", x.len(), w.input())?;
    check_len("LSTM hidden state", state.h.len(), w.hidden())?;
    check_len("LSTM cell state", state.c.len(), w.hidden())?;
    let (h, c, _) = lstm_forward(x, &state.h, &state.c, w);
    Ok(CellState { h, c })
}

/// One GRU step; returns the new hidden vector.
pub fn gru_step(x: &[f64], h: &[f64], w: &GruLayerWeights) -> Result<Vec<f64>, NeuralError> {
    w.validate()?;
    check_len("GRU input", x.len(), w.input())?;
    check_len("GRU hidden state", h.len(), w.hidden())?;
    Ok(gru_forward(x, h, w).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;

    #[test]
    fn lstm_zero_weights() {
        let w = LstmLayerWeights::zeros(2, 1);
        let s = lstm_step(&[3.0, -1.0], &CellState { h: vec![0.0], c: vec![0.0] }, &w).unwrap();
        assert_eq!(s, CellState { h: vec![0.0], c: vec![0.0] });
        let s = lstm_step(&[0.0, 0.0], &CellState { h: vec![0.0], c: vec![2.0] }, &w).unwrap();
        assert_eq!(s.c, vec![1.0]);
        assert!((s.h[0] - 0.5 * 1.0f64.tanh()).abs() < 1e-15);
        assert!((s.h[0] - 0.380797).abs() < 1e-6);
    }

    #[test]
    fn lstm_forget_saturation() {
        let mut w = LstmLayerWeights::zeros(1, 1);
        w.b_f.data[0] = 50.0;
        let s = lstm_step(&[1.0], &CellState { h: vec![0.0], c: vec![3.0] }, &w).unwrap();
        assert!((s.c[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gru_zero_weights_and_closed_gate() {
        let w = GruLayerWeights::zeros(1, 1);
        assert_eq!(gru_step(&[5.0], &[1.0], &w).unwrap(), vec![0.5]);
        assert_eq!(gru_step(&[5.0], &[0.0], &w).unwrap(), vec![0.0]);
        let mut w = w;
        w.b_z.data[0] = -50.0;
        assert!((gru_step(&[5.0], &[0.9], &w).unwrap()[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let w = LstmLayerWeights::zeros(2, 3);
        assert!(lstm_step(&[1.0], &CellState { h: vec![0.0; 3], c: vec![0.0; 3] }, &w).is_err());
        let g = GruLayerWeights::zeros(2, 3);
        assert!(gru_step(&[1.0, 2.0], &[0.0; 2], &g).is_err());
    }

    #[test]
    fn gate_and_state_bounds() {
        let mut r = rng(7);
        for _ in 0..200 {
            let w = LstmLayerWeights::init(3, 4, &mut r);
            let x: Vec<f64> = (0..3).map(|_| r.random_range(-20.0..20.0)).collect();
            let h: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..4).map(|_| r.random_range(-5.0..5.0)).collect();
            let (h1, _, cache) = lstm_forward(&x, &h, &c, &w);
            for j in 0..4 {
                for gate in [cache.i[j], cache.f[j], cache.o[j]] {
                    assert!((0.0..=1.0).contains(&gate));
                }
                assert!(cache.g[j].abs() <= 1.0 && h1[j].abs() < 1.0);
            }
            let gw = GruLayerWeights::init(3, 4, &mut r);
            let (h2, gc) = gru_forward(&x, &h, &gw);
            for j in 0..4 {
                let (lo, hi) = (h[j].min(gc.h_tilde[j]), h[j].max(gc.h_tilde[j]));
                assert!(h2[j] >= lo - 1e-15 && h2[j] <= hi + 1e-15);
            }
        }
    }
}
