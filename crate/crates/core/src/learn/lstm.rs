//! Stacked LSTM classifier trained by back-propagation through time.
//!
//! Sequences are `[time][feature]`. The top layer's state at the last time
//! step feeds a softmax head. Gate order within every weight block is
//! input, forget, cell, output.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmConfig {
    pub layers: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    /// Fraction of training sequences held out for early stopping; 0 disables.
    pub val_fraction: f64,
    pub patience: usize,
    pub seed: u64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            layers: vec![200, 100],
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 300,
            batch_size: 16,
            clip_norm: 5.0,
            val_fraction: 0.0,
            patience: 30,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct LayerShape {
    input: usize,
    hidden: usize,
    w: usize,
    u: usize,
    b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub n_inputs: usize,
    pub n_classes: usize,
    pub layer_sizes: Vec<usize>,
    /// Every weight, flattened; see `layout` for offsets.
    pub params: Vec<f64>,
    layout: Vec<LayerShape>,
    head_v: usize,
    head_c: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub val: Option<f64>,
}

pub fn loss_curve_csv(curve: &[EpochLoss]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss\n");
    for e in curve {
        let val = e.val.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{}\n", e.epoch, e.train, val));
    }
    s
}

struct StepCache {
    x: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tc: Vec<f64>,
    h: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl LstmModel {
    /// Parameter count for a shape, or `None` on overflow.
    pub fn param_count(n_inputs: usize, layer_sizes: &[usize], n_classes: usize) -> Option<usize> {
        let mut total = 0usize;
        let mut input = n_inputs;
        for &h in layer_sizes {
            let per_layer = h.checked_mul(input.checked_add(h)?.checked_add(1)?)?.checked_mul(4)?;
            total = total.checked_add(per_layer)?;
            input = h;
        }
        total.checked_add(n_classes.checked_mul(input.checked_add(1)?)?)
    }

    pub fn new(n_inputs: usize, layer_sizes: &[usize], n_classes: usize, seed: u64) -> Result<Self> {
        if n_inputs == 0 || n_classes < 2 || layer_sizes.is_empty() || layer_sizes.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "bad LSTM shape: {n_inputs} inputs, layers {layer_sizes:?}, {n_classes} classes"
            )));
        }
        let mut layout = Vec::new();
        let mut off = 0;
        let mut input = n_inputs;
        for &h in layer_sizes {
            let shape = LayerShape {
                input,
                hidden: h,
                w: off,
                u: off + 4 * h * input,
                b: off + 4 * h * input + 4 * h * h,
            };
            off = shape.b + 4 * h;
            layout.push(shape);
            input = h;
        }
        let head_v = off;
        let head_c = head_v + n_classes * input;
        let total = head_c + n_classes;

        let mut r = rng::stream(seed, "lstm-init", 0);
        let mut params = vec![0.0; total];
        for s in &layout {
            let a = 1.0 / (s.hidden as f64).sqrt();
            for p in &mut params[s.w..s.b] {
                *p = r.gen_range(-a..a);
            }
            // forget gate starts open
            for p in &mut params[s.b + s.hidden..s.b + 2 * s.hidden] {
                *p = 1.0;
            }
        }
        let a = 1.0 / (input as f64).sqrt();
        for p in &mut params[head_v..head_c] {
            *p = r.gen_range(-a..a);
        }
        Ok(LstmModel {
            n_inputs,
            n_classes,
            layer_sizes: layer_sizes.to_vec(),
            params,
            layout,
            head_v,
            head_c,
        })
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn check_seq(&self, seq: &[Vec<f64>]) -> Result<()> {
        if seq.is_empty() {
            return Err(Error::InvalidParameter("empty sequence".into()));
        }
        if let Some(r) = seq.iter().find(|r| r.len() != self.n_inputs) {
            return Err(Error::DimMismatch {
                expected: self.n_inputs,
                got: r.len(),
            });
        }
        Ok(())
    }

    fn forward(&self, params: &[f64], seq: &[Vec<f64>]) -> (Vec<Vec<StepCache>>, Vec<f64>) {
        let mut caches: Vec<Vec<StepCache>> = Vec::with_capacity(self.layout.len());
        let mut inputs: Vec<Vec<f64>> = seq.to_vec();
        for s in &self.layout {
            let h_n = s.hidden;
            let w = &params[s.w..s.u];
            let u = &params[s.u..s.b];
            let b = &params[s.b..s.b + 4 * h_n];
            let mut h = vec![0.0; h_n];
            let mut c = vec![0.0; h_n];
            let mut layer = Vec::with_capacity(inputs.len());
            for x in &inputs {
                let mut z = b.to_vec();
                for (k, zk) in z.iter_mut().enumerate() {
                    let wr = &w[k * s.input..(k + 1) * s.input];
                    let ur = &u[k * h_n..(k + 1) * h_n];
                    *zk += wr.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()
                        + ur.iter().zip(&h).map(|(a, v)| a * v).sum::<f64>();
                }
                let i: Vec<f64> = z[..h_n].iter().map(|&v| sigmoid(v)).collect();
                let f: Vec<f64> = z[h_n..2 * h_n].iter().map(|&v| sigmoid(v)).collect();
                let g: Vec<f64> = z[2 * h_n..3 * h_n].iter().map(|v| v.tanh()).collect();
                let o: Vec<f64> = z[3 * h_n..].iter().map(|&v| sigmoid(v)).collect();
                c = (0..h_n).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
                let tc: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
                h = (0..h_n).map(|k| o[k] * tc[k]).collect();
                layer.push(StepCache {
                    x: x.clone(),
                    i,
                    f,
                    g,
                    o,
                    c: c.clone(),
                    tc,
                    h: h.clone(),
                });
            }
            inputs = layer.iter().map(|st| st.h.clone()).collect();
            caches.push(layer);
        }
        let top = inputs.last().expect("non-empty sequence");
        let hn = top.len();
        let logits: Vec<f64> = (0..self.n_classes)
            .map(|k| {
                let v = &params[self.head_v + k * hn..self.head_v + (k + 1) * hn];
                params[self.head_c + k] + v.iter().zip(top).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        (caches, softmax(&logits))
    }

    pub fn predict_proba(&self, seq: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_seq(seq)?;
        Ok(self.forward(&self.params, seq).1)
    }

    pub fn predict(&self, seq: &[Vec<f64>]) -> Result<usize> {
        Ok(crate::learn::elm::argmax(&self.predict_proba(seq)?))
    }

    /// Cross-entropy of one sequence under `params`.
    pub fn loss_at(&self, params: &[f64], seq: &[Vec<f64>], label: usize) -> f64 {
        let (_, p) = self.forward(params, seq);
        -p[label].max(1e-300).ln()
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, params: &[f64], seq: &[Vec<f64>], label: usize) -> (f64, Vec<f64>) {
        let (caches, p) = self.forward(params, seq);
        let loss = -p[label].max(1e-300).ln();
        let mut grad = vec![0.0; params.len()];
        let t_n = seq.len();

        let top = &caches.last().unwrap()[t_n - 1].h;
        let hn = top.len();
        let mut dlogits = p.clone();
        dlogits[label] -= 1.0;
        let mut dh_in: Vec<Vec<f64>> = vec![vec![0.0; hn]; t_n];
        for k in 0..self.n_classes {
            grad[self.head_c + k] += dlogits[k];
            for j in 0..hn {
                grad[self.head_v + k * hn + j] += dlogits[k] * top[j];
                dh_in[t_n - 1][j] += dlogits[k] * params[self.head_v + k * hn + j];
            }
        }

        for (l, s) in self.layout.iter().enumerate().rev() {
            let h_n = s.hidden;
            let layer = &caches[l];
            let mut dh_rec = vec![0.0; h_n];
            let mut dc_next = vec![0.0; h_n];
            let mut dx_all = vec![vec![0.0; s.input]; t_n];
            let zeros = vec![0.0; h_n];
            for t in (0..t_n).rev() {
                let st = &layer[t];
                let (c_prev, h_prev) = if t > 0 {
                    (&layer[t - 1].c, &layer[t - 1].h)
                } else {
                    (&zeros, &zeros)
                };
                let mut dz = vec![0.0; 4 * h_n];
                for k in 0..h_n {
                    let dh = dh_in[t][k] + dh_rec[k];
                    let d_o = dh * st.tc[k];
                    let dc = dh * st.o[k] * (1.0 - st.tc[k] * st.tc[k]) + dc_next[k];
                    let di = dc * st.g[k];
                    let dg = dc * st.i[k];
                    let df = dc * c_prev[k];
                    dc_next[k] = dc * st.f[k];
                    dz[k] = di * st.i[k] * (1.0 - st.i[k]);
                    dz[h_n + k] = df * st.f[k] * (1.0 - st.f[k]);
                    dz[2 * h_n + k] = dg * (1.0 - st.g[k] * st.g[k]);
                    dz[3 * h_n + k] = d_o * st.o[k] * (1.0 - st.o[k]);
                }
                dh_rec.iter_mut().for_each(|v| *v = 0.0);
                for (r, &d) in dz.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    grad[s.b + r] += d;
                    let wo = s.w + r * s.input;
                    for j in 0..s.input {
                        grad[wo + j] += d * st.x[j];
                        dx_all[t][j] += d * params[wo + j];
                    }
                    let uo = s.u + r * h_n;
                    for j in 0..h_n {
                        grad[uo + j] += d * h_prev[j];
                        dh_rec[j] += d * params[uo + j];
                    }
                }
            }
            dh_in = dx_all;
        }
        (loss, grad)
    }

    fn mean_loss(&self, params: &[f64], data: &[(&[Vec<f64>], usize)]) -> f64 {
        data.par_iter().map(|(s, l)| self.loss_at(params, s, *l)).sum::<f64>() / data.len() as f64
    }
}

/// Trains a fresh model; returns it with the per-epoch loss curve.
pub fn lstm_train(
    sequences: &[Vec<Vec<f64>>],
    labels: &[usize],
    n_classes: usize,
    cfg: &LstmConfig,
) -> Result<(LstmModel, Vec<EpochLoss>)> {
    if sequences.is_empty() || sequences.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} sequences vs {} labels",
            sequences.len(),
            labels.len()
        )));
    }
    let t_n = sequences[0].len();
    if let Some(s) = sequences.iter().find(|s| s.len() != t_n) {
        return Err(Error::InvalidParameter(format!(
            "ragged sequence lengths: {} vs {t_n} steps",
            s.len()
        )));
    }
    let n_inputs = sequences[0].first().map_or(0, Vec::len);
    if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::InvalidParameter(format!("label {l} >= class count {n_classes}")));
    }
    let mut model = LstmModel::new(n_inputs, &cfg.layers, n_classes, cfg.seed)?;
    for s in sequences {
        model.check_seq(s)?;
    }
    if !(cfg.learning_rate >= 0.0 && (0.0..1.0).contains(&cfg.momentum) && cfg.batch_size > 0) {
        return Err(Error::InvalidParameter("bad optimiser settings".into()));
    }

    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut r = rng::stream(cfg.seed, "lstm-train", 0);
    order.shuffle(&mut r);
    let n_val = if cfg.val_fraction > 0.0 {
        ((sequences.len() as f64 * cfg.val_fraction).round() as usize).min(sequences.len() - 1)
    } else {
        0
    };
    let (val_idx, train_idx) = order.split_at(n_val);
    let val: Vec<(&[Vec<f64>], usize)> = val_idx.iter().map(|&i| (&sequences[i][..], labels[i])).collect();
    let mut train: Vec<(&[Vec<f64>], usize)> = train_idx.iter().map(|&i| (&sequences[i][..], labels[i])).collect();

    let mut velocity = vec![0.0; model.n_params()];
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut stale = 0;
    for epoch in 0..cfg.epochs {
        train.shuffle(&mut r);
        let mut total = 0.0;
        for batch in train.chunks(cfg.batch_size) {
            let (loss, mut grad) = batch
                .par_iter()
                .map(|(s, l)| model.loss_and_grad(&model.params, s, *l))
                .reduce(
                    || (0.0, vec![0.0; model.n_params()]),
                    |(la, mut ga), (lb, gb)| {
                        ga.iter_mut().zip(&gb).for_each(|(a, b)| *a += b);
                        (la + lb, ga)
                    },
                );
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss(epoch));
            }
            total += loss;
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > cfg.clip_norm && cfg.clip_norm > 0.0 {
                let k = cfg.clip_norm / norm;
                grad.iter_mut().for_each(|g| *g *= k);
            }
            for ((p, v), g) in model.params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = cfg.momentum * *v + g;
                *p -= cfg.learning_rate * *v;
            }
        }
        let train_loss = total / train.len() as f64;
        if !train_loss.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteLoss(epoch));
        }
        let val_loss = (!val.is_empty()).then(|| model.mean_loss(&model.params, &val));
        curve.push(EpochLoss {
            epoch,
            train: train_loss,
            val: val_loss,
        });
        if let Some(vl) = val_loss {
            if best.as_ref().is_none_or(|(b, _)| vl < *b) {
                best = Some((vl, model.params.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
        }
    }
    if let Some((_, p)) = best {
        model.params = p;
    }
    Ok((model, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn planted(n: usize, steps: usize, feats: usize, seed: u64) -> (Vec<Vec<Vec<f64>>>, Vec<usize>) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut seqs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = i % 2;
            let shift = if label == 1 { 0.8 } else { -0.8 };
            seqs.push(
                (0..steps)
                    .map(|_| {
                        (0..feats)
                            .map(|k| r.gen_range(-0.5..0.5) + if k == 0 { shift } else { 0.0 })
                            .collect()
                    })
                    .collect(),
            );
            labels.push(label);
        }
        (seqs, labels)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (seqs, labels) = planted(2, 3, 2, 9);
        let model = LstmModel::new(2, &[4, 3], 2, 11).unwrap();
        let (_, grad) = model.loss_and_grad(&model.params, &seqs[1], labels[1]);
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        let mut p = model.params.clone();
        for k in 0..p.len() {
            let orig = p[k];
            p[k] = orig + eps;
            let up = model.loss_at(&p, &seqs[1], labels[1]);
            p[k] = orig - eps;
            let down = model.loss_at(&p, &seqs[1], labels[1]);
            p[k] = orig;
            let num = (up - down) / (2.0 * eps);
            let rel = (num - grad[k]).abs() / num.abs().max(grad[k].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn learns_planted_mean_shift() {
        let (seqs, labels) = planted(20, 6, 3, 1);
        let cfg = LstmConfig {
            layers: vec![8, 4],
            epochs: 200,
            batch_size: 4,
            ..Default::default()
        };
        let (m, curve) = lstm_train(&seqs, &labels, 2, &cfg).unwrap();
        let acc = seqs
            .iter()
            .zip(&labels)
            .filter(|(s, &l)| m.predict(s).unwrap() == l)
            .count();
        assert!(acc >= 19, "train accuracy {acc}/20");
        assert!(curve.last().unwrap().train < curve[0].train);
    }

    #[test]
    fn loss_decreases_early() {
        let mut first = 0.0;
        let mut tenth = 0.0;
        for seed in 0..3 {
            let (seqs, labels) = planted(20, 6, 3, seed + 5);
            let cfg = LstmConfig {
                layers: vec![8, 4],
                epochs: 10,
                batch_size: 20,
                seed,
                ..Default::default()
            };
            let (_, curve) = lstm_train(&seqs, &labels, 2, &cfg).unwrap();
            first += curve[0].train;
            tenth += curve[9].train;
        }
        assert!(tenth < first);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let (seqs, labels) = planted(6, 4, 2, 2);
        let cfg = LstmConfig {
            layers: vec![3],
            epochs: 5,
            learning_rate: 0.0,
            ..Default::default()
        };
        let (m, _) = lstm_train(&seqs, &labels, 2, &cfg).unwrap();
        assert_eq!(m.params, LstmModel::new(2, &[3], 2, 0).unwrap().params);
    }

    #[test]
    fn ragged_sequences_rejected() {
        let (mut seqs, labels) = planted(4, 4, 2, 2);
        seqs[2].pop();
        assert!(lstm_train(&seqs, &labels, 2, &LstmConfig::default()).is_err());
    }

    #[test]
    fn early_stopping_with_validation() {
        // labels unrelated to the planted shift, so held-out loss stalls
        let (seqs, _) = planted(20, 4, 2, 4);
        let labels: Vec<usize> = (0..20).map(|i| (i / 2) % 2).collect();
        let cfg = LstmConfig {
            layers: vec![4],
            epochs: 400,
            val_fraction: 0.25,
            patience: 5,
            ..Default::default()
        };
        let (_, curve) = lstm_train(&seqs, &labels, 2, &cfg).unwrap();
        assert!(curve.len() < 400);
        assert!(curve.iter().all(|e| e.val.is_some()));
        assert!(loss_curve_csv(&curve).starts_with("epoch,train_loss,val_loss\n0,"));
    }
}
