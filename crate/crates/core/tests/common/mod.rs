//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's forward passes or forecasting code.
#![allow(dead_code)]

use std::path::PathBuf;

use biascast::neural::{Layer, Network, Tensor};
use biascast::sarima::SarimaFit;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `W v + b` for a row-major `W`.
fn affine(w: &Tensor, v: &[f64], b: &Tensor) -> Vec<f64> {
    let cols = w.shape[1];
    (0..w.shape[0])
        .map(|r| b.data[r] + (0..cols).map(|c| w.data[r * cols + c] * v[c]).sum::<f64>())
        .collect()
}

fn matvec(w: &Tensor, v: &[f64]) -> Vec<f64> {
    let cols = w.shape[1];
    (0..w.shape[0]).map(|r| (0..cols).map(|c| w.data[r * cols + c] * v[c]).sum()).collect()
}

/// Head output at every step, dropout off, state starting at zero.
pub fn oracle_outputs(net: &Network, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let hidden = net.config.hidden;
    let mut h = vec![vec![0.0; hidden]; net.layers.len()];
    let mut c = vec![vec![0.0; hidden]; net.layers.len()];
    let mut outputs = Vec::new();
    for x in inputs {
        let mut below = x.clone();
        for (l, layer) in net.layers.iter().enumerate() {
            match layer {
                Layer::Lstm(w) => {
                    let v: Vec<f64> = h[l].iter().chain(&below).copied().collect();
                    let i = affine(&w.w_i, &v, &w.b_i);
                    let f = affine(&w.w_f, &v, &w.b_f);
                    let g = affine(&w.w_g, &v, &w.b_g);
                    let o = affine(&w.w_o, &v, &w.b_o);
                    for k in 0..hidden {
                        c[l][k] = sig(f[k]) * c[l][k] + sig(i[k]) * g[k].tanh();
                        h[l][k] = sig(o[k]) * c[l][k].tanh();
                    }
                }
                Layer::Gru(w) => {
                    let z = affine(&w.w_z, &below, &w.b_z);
                    let uz = matvec(&w.u_z, &h[l]);
                    let r = affine(&w.w_r, &below, &w.b_r);
                    let ur = matvec(&w.u_r, &h[l]);
                    let z: Vec<f64> = z.iter().zip(&uz).map(|(a, b)| sig(a + b)).collect();
                    let r: Vec<f64> = r.iter().zip(&ur).map(|(a, b)| sig(a + b)).collect();
                    let rh: Vec<f64> = r.iter().zip(&h[l]).map(|(a, b)| a * b).collect();
                    let cand = affine(&w.w_h, &below, &w.b_h);
                    let uh = matvec(&w.u_h, &rh);
                    for k in 0..hidden {
                        let ht = (cand[k] + uh[k]).tanh();
                        h[l][k] = (1.0 - z[k]) * h[l][k] + z[k] * ht;
                    }
                }
            }
            below = h[l].clone();
        }
        outputs.push(affine(&net.w_out, &below, &net.b_out));
    }
    outputs
}

/// One-step SARIMA prediction for a model without differencing, recomputing
/// the CSS residuals over `history` from scratch.
pub fn oracle_sarima_next(fit: &SarimaFit, history: &[f64]) -> f64 {
    let spec = fit.spec;
    assert_eq!(spec.d + spec.seasonal_d, 0, "oracle covers undifferenced models only");
    let p = &fit.params;
    let s = spec.period;
    let start = spec.p.max(s * spec.seasonal_p);
    let predict = |y: &[f64], e: &[f64], t: usize| {
        let mut v = p.c;
        for (k, a) in p.alpha.iter().enumerate() {
            v += a * y[t - k - 1];
        }
        for (k, th) in p.theta.iter().enumerate() {
            if t > k {
                v += th * e[t - k - 1];
            }
        }
        for (k, ph) in p.phi.iter().enumerate() {
            v += ph * y[t - s * (k + 1)];
        }
        for (k, et) in p.eta.iter().enumerate() {
            if t >= s * (k + 1) {
                v += et * e[t - s * (k + 1)];
            }
        }
        v
    };
    let mut e = vec![0.0; history.len()];
    for t in start..history.len() {
        e[t] = history[t] - predict(history, &e, t);
    }
    predict(history, &e, history.len())
}

pub fn rmse(pred: &[f64], actual: &[f64]) -> f64 {
    assert_eq!(pred.len(), actual.len());
    (pred.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum::<f64>() / pred.len() as f64).sqrt()
}
