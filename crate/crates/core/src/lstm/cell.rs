//! Single-layer LSTM cell with a linear read-out, and exact reverse-mode
//! gradients through the unrolled sequence.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LstmError, WindowSample};

/// Weights of one gate: `w` is hidden×input, `u` is hidden×hidden, both row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

impl GateParams {
    fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: vec![0.0; hidden * input],
            u: vec![0.0; hidden * hidden],
            b: vec![0.0; hidden],
        }
    }

    /// Pre-activation W x + U h + b.
    fn affine(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let (d, hd) = (x.len(), h.len());
        (0..hd)
            .map(|r| {
                let wx: f64 = self.w[r * d..(r + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum();
                let uh: f64 = self.u[r * hd..(r + 1) * hd].iter().zip(h).map(|(a, b)| a * b).sum();
                wx + uh + self.b[r]
            })
            .collect()
    }
}

/// Gate order used for every flat view: forget, input, output, candidate.
pub const GATE_NAMES: [&str; 4] = ["forget", "input", "output", "candidate"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    input_size: usize,
    hidden_size: usize,
    pub forget: GateParams,
    pub input: GateParams,
    pub output: GateParams,
    pub candidate: GateParams,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

impl LstmParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let g = GateParams::zeros(input_size, hidden_size);
        Self {
            input_size,
            hidden_size,
            forget: g.clone(),
            input: g.clone(),
            output: g.clone(),
            candidate: g,
            w_out: vec![0.0; hidden_size],
            b_out: 0.0,
        }
    }

    /// Every entry uniform in (−1/√h, 1/√h), then `forget_bias` added to the
    /// forget-gate bias.
    pub fn init<R: Rng>(input_size: usize, hidden_size: usize, forget_bias: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_size, hidden_size);
        let bound = 1.0 / (hidden_size as f64).sqrt();
        let mut flat = p.to_flat();
        for v in flat.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
        p.set_flat(&flat);
        for b in p.forget.b.iter_mut() {
            *b += forget_bias;
        }
        p
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn gates(&self) -> [&GateParams; 4] {
        [&self.forget, &self.input, &self.output, &self.candidate]
    }

    fn gates_mut(&mut self) -> [&mut GateParams; 4] {
        [
            &mut self.forget,
            &mut self.input,
            &mut self.output,
            &mut self.candidate,
        ]
    }

    pub fn n_params(&self) -> usize {
        4 * self.hidden_size * (self.input_size + self.hidden_size + 1) + self.hidden_size + 1
    }

    /// Named tensors in flat order: per gate `w`, `u`, `b`, then `w_out`, `b_out`.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::with_capacity(14);
        for (name, g) in GATE_NAMES.iter().zip(self.gates()) {
            out.push((format!("{name}.w"), g.w.as_slice()));
            out.push((format!("{name}.u"), g.u.as_slice()));
            out.push((format!("{name}.b"), g.b.as_slice()));
        }
        out.push(("w_out".to_string(), self.w_out.as_slice()));
        out.push(("b_out".to_string(), std::slice::from_ref(&self.b_out)));
        out
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().into_iter().flat_map(|(_, t)| t.iter().copied()).collect()
    }

    /// Inverse of [`to_flat`](Self::to_flat). Panics on a length mismatch.
    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "flat parameter length");
        let mut it = flat.iter().copied();
        for g in self.gates_mut() {
            for dst in [&mut g.w, &mut g.u, &mut g.b] {
                dst.iter_mut().for_each(|v| *v = it.next().unwrap());
            }
        }
        self.w_out.iter_mut().for_each(|v| *v = it.next().unwrap());
        self.b_out = it.next().unwrap();
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }

    fn check_shapes(&self) -> Result<(), LstmError> {
        let (d, h) = (self.input_size, self.hidden_size);
        let ok = self
            .gates()
            .iter()
            .all(|g| g.w.len() == h * d && g.u.len() == h * h && g.b.len() == h)
            && self.w_out.len() == h;
        if ok {
            Ok(())
        } else {
            Err(LstmError::Shape("parameter tensors inconsistent with sizes".into()))
        }
    }
}

/// Hidden output and memory cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Activations of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    pub candidate: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

fn step(x: &[f64], state: &LstmState, p: &LstmParams) -> StepCache {
    let f: Vec<f64> = p.forget.affine(x, &state.h).into_iter().map(sigmoid).collect();
    let i: Vec<f64> = p.input.affine(x, &state.h).into_iter().map(sigmoid).collect();
    let o: Vec<f64> = p.output.affine(x, &state.h).into_iter().map(sigmoid).collect();
    let g: Vec<f64> = p.candidate.affine(x, &state.h).into_iter().map(f64::tanh).collect();
    let c: Vec<f64> = (0..f.len()).map(|k| f[k] * state.c[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = o.iter().zip(&tanh_c).map(|(a, b)| a * b).collect();
    StepCache {
        x: x.to_vec(),
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        forget: f,
        input: i,
        output: o,
        candidate: g,
        c,
        tanh_c,
        h,
    }
}

/// One LSTM step: f, i, o = σ(W x + U h + b), g = tanh(...),
/// c' = f⊙c + i⊙g, h' = o⊙tanh(c').
pub fn cell_forward(x: &[f64], state: &LstmState, params: &LstmParams) -> Result<LstmState, LstmError> {
    params.check_shapes()?;
    if x.len() != params.input_size {
        return Err(LstmError::Shape(format!(
            "input has {} features, cell expects {}",
            x.len(),
            params.input_size
        )));
    }
    if state.h.len() != params.hidden_size || state.c.len() != params.hidden_size {
        return Err(LstmError::Shape(format!(
            "state has sizes ({}, {}), cell expects {}",
            state.h.len(),
            state.c.len(),
            params.hidden_size
        )));
    }
    let s = step(x, state, params);
    Ok(LstmState { h: s.h, c: s.c })
}

/// Run the cell over the rows of `window` (row-major, oldest first) from a zero
/// state and project the last hidden vector to a scalar.
pub fn forward_sequence(window: &[f64], params: &LstmParams) -> Result<(f64, Vec<StepCache>), LstmError> {
    params.check_shapes()?;
    let d = params.input_size;
    if window.is_empty() {
        return Err(LstmError::EmptyWindow);
    }
    if !window.len().is_multiple_of(d) {
        return Err(LstmError::Shape(format!(
            "window of {} values is not a multiple of {d} features",
            window.len()
        )));
    }
    let mut state = LstmState::zeros(params.hidden_size);
    let mut caches = Vec::with_capacity(window.len() / d);
    for x in window.chunks(d) {
        let s = step(x, &state, params);
        state = LstmState {
            h: s.h.clone(),
            c: s.c.clone(),
        };
        caches.push(s);
    }
    let pred = params.w_out.iter().zip(&state.h).map(|(a, b)| a * b).sum::<f64>() + params.b_out;
    Ok((pred, caches))
}

fn accumulate_gate(grad: &mut GateParams, da: &[f64], x: &[f64], h_prev: &[f64]) {
    let (d, h) = (x.len(), h_prev.len());
    for r in 0..da.len() {
        let a = da[r];
        if a == 0.0 {
            continue;
        }
        for (gw, xv) in grad.w[r * d..(r + 1) * d].iter_mut().zip(x) {
            *gw += a * xv;
        }
        for (gu, hv) in grad.u[r * h..(r + 1) * h].iter_mut().zip(h_prev) {
            *gu += a * hv;
        }
        grad.b[r] += a;
    }
}

/// dL/dh_prev contribution U^T da.
fn add_recurrent(dh_prev: &mut [f64], gate: &GateParams, da: &[f64]) {
    let h = dh_prev.len();
    for (r, &a) in da.iter().enumerate() {
        for (dst, u) in dh_prev.iter_mut().zip(&gate.u[r * h..(r + 1) * h]) {
            *dst += a * u;
        }
    }
}

/// Gradients of the batch-mean squared error with respect to every
/// parameter, and the loss itself. With `clip_norm`, the accumulated
/// gradient is rescaled so that its global L2 norm does not exceed it.
pub fn bptt_gradients(
    batch: &[WindowSample],
    params: &LstmParams,
    clip_norm: Option<f64>,
) -> Result<(LstmParams, f64), LstmError> {
    if batch.is_empty() {
        return Err(LstmError::EmptyBatch);
    }
    let h = params.hidden_size;
    let scale = 1.0 / batch.len() as f64;
    let mut grad = LstmParams::zeros(params.input_size, h);
    let mut loss = 0.0;

    for sample in batch {
        let (pred, caches) = forward_sequence(&sample.inputs, params)?;
        let err = pred - sample.target;
        loss += err * err * scale;
        let dpred = 2.0 * err * scale;

        let last = caches.last().expect("non-empty window");
        for k in 0..h {
            grad.w_out[k] += dpred * last.h[k];
        }
        grad.b_out += dpred;

        let mut dh: Vec<f64> = params.w_out.iter().map(|w| dpred * w).collect();
        let mut dc_next = vec![0.0; h];
        for s in caches.iter().rev() {
            let mut da_f = vec![0.0; h];
            let mut da_i = vec![0.0; h];
            let mut da_o = vec![0.0; h];
            let mut da_g = vec![0.0; h];
            for k in 0..h {
                let dc = dc_next[k] + dh[k] * s.output[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                let d_o = dh[k] * s.tanh_c[k];
                let d_f = dc * s.c_prev[k];
                let d_i = dc * s.candidate[k];
                let d_g = dc * s.input[k];
                dc_next[k] = dc * s.forget[k];
                da_f[k] = d_f * s.forget[k] * (1.0 - s.forget[k]);
                da_i[k] = d_i * s.input[k] * (1.0 - s.input[k]);
                da_o[k] = d_o * s.output[k] * (1.0 - s.output[k]);
                da_g[k] = d_g * (1.0 - s.candidate[k] * s.candidate[k]);
            }
            accumulate_gate(&mut grad.forget, &da_f, &s.x, &s.h_prev);
            accumulate_gate(&mut grad.input, &da_i, &s.x, &s.h_prev);
            accumulate_gate(&mut grad.output, &da_o, &s.x, &s.h_prev);
            accumulate_gate(&mut grad.candidate, &da_g, &s.x, &s.h_prev);

            let mut dh_prev = vec![0.0; h];
            add_recurrent(&mut dh_prev, &params.forget, &da_f);
            add_recurrent(&mut dh_prev, &params.input, &da_i);
            add_recurrent(&mut dh_prev, &params.output, &da_o);
            add_recurrent(&mut dh_prev, &params.candidate, &da_g);
            dh = dh_prev;
        }
    }

    if !loss.is_finite() {
        return Err(LstmError::NonFiniteLoss { epoch: None });
    }
    if let Some(max_norm) = clip_norm {
        let mut flat = grad.to_flat();
        let norm = flat.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > max_norm {
            let s = max_norm / norm;
            flat.iter_mut().for_each(|v| *v *= s);
            grad.set_flat(&flat);
        }
    }
    Ok((grad, loss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(inputs: Vec<f64>, target: f64) -> WindowSample {
        WindowSample {
            inputs,
            target,
            target_date: crate::ingest::YearMonth::new(2004, 1).unwrap(),
        }
    }

    #[test]
    fn zero_params_halve_memory() {
        let p = LstmParams::zeros(2, 3);
        let c0 = vec![0.4, -1.0, 2.0];
        let s = cell_forward(
            &[0.3, -0.7],
            &LstmState {
                h: vec![0.0; 3],
                c: c0.clone(),
            },
            &p,
        )
        .unwrap();
        for k in 0..3 {
            assert!((s.c[k] - 0.5 * c0[k]).abs() < 1e-15);
            assert!((s.h[k] - 0.5 * (0.5 * c0[k]).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_forget_gate_erases_memory() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = LstmParams::init(2, 3, 0.0, &mut rng);
        p.forget.w.iter_mut().for_each(|v| *v = 0.0);
        p.forget.u.iter_mut().for_each(|v| *v = 0.0);
        p.forget.b.iter_mut().for_each(|v| *v = -20.0);
        let x = [0.5, -0.2];
        let state = LstmState {
            h: vec![0.1, 0.2, -0.3],
            c: vec![5.0, -4.0, 3.0],
        };
        let s = step(&x, &state, &p);
        for k in 0..3 {
            assert!((s.c[k] - s.input[k] * s.candidate[k]).abs() < 1e-7);
        }
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let p = LstmParams::zeros(2, 3);
        assert!(cell_forward(&[1.0], &LstmState::zeros(3), &p).is_err());
        assert!(cell_forward(&[1.0, 2.0], &LstmState::zeros(2), &p).is_err());
        assert!(matches!(forward_sequence(&[], &p), Err(LstmError::EmptyWindow)));
        assert!(forward_sequence(&[1.0, 2.0, 3.0], &p).is_err());
    }

    #[test]
    fn zero_window_predicts_bias() {
        let mut p = LstmParams::zeros(3, 4);
        p.b_out = 0.7;
        let (pred, _) = forward_sequence(&[0.0; 12], &p).unwrap();
        assert_eq!(pred, 0.7);
    }

    #[test]
    fn single_step_matches_cell_plus_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = LstmParams::init(3, 4, 1.0, &mut rng);
        let x = [0.2, -0.4, 1.1];
        let s = cell_forward(&x, &LstmState::zeros(4), &p).unwrap();
        let expected: f64 = p.w_out.iter().zip(&s.h).map(|(a, b)| a * b).sum::<f64>() + p.b_out;
        let (pred, caches) = forward_sequence(&x, &p).unwrap();
        assert_eq!(caches.len(), 1);
        assert!((pred - expected).abs() < 1e-15);
        assert_eq!(pred, forward_sequence(&x, &p).unwrap().0);
    }

    #[test]
    fn gradients_vanish_at_exact_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = LstmParams::init(2, 3, 1.0, &mut rng);
        let inputs = vec![0.1, 0.2, -0.3, 0.4];
        let (pred, _) = forward_sequence(&inputs, &p).unwrap();
        let (g, loss) = bptt_gradients(&[sample(inputs, pred)], &p, None).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_chain_matches_hand_derivation() {
        // d = h = 1, L = 1, zero initial state, so U and c_prev drop out.
        let mut p = LstmParams::zeros(1, 1);
        let (wf, wi, wo, wg) = (0.3, -0.4, 0.5, 0.8);
        let (bf, bi, bo, bg) = (0.1, 0.2, -0.1, 0.05);
        p.forget.w[0] = wf;
        p.input.w[0] = wi;
        p.output.w[0] = wo;
        p.candidate.w[0] = wg;
        p.forget.b[0] = bf;
        p.input.b[0] = bi;
        p.output.b[0] = bo;
        p.candidate.b[0] = bg;
        p.w_out[0] = 1.3;
        p.b_out = -0.2;
        let (x, y) = (0.7, 0.4);

        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let i = sig(wi * x + bi);
        let o = sig(wo * x + bo);
        let g = (wg * x + bg).tanh();
        let c = i * g;
        let hh = o * c.tanh();
        let pred = 1.3 * hh - 0.2;
        let e = 2.0 * (pred - y);
        let dh = e * 1.3;
        let dc = dh * o * (1.0 - c.tanh().powi(2));
        let expect_wo = dh * c.tanh() * o * (1.0 - o) * x;
        let expect_wi = dc * g * i * (1.0 - i) * x;
        let expect_wg = dc * i * (1.0 - g * g) * x;
        let expect_bg = dc * i * (1.0 - g * g);

        let (grad, loss) = bptt_gradients(&[sample(vec![x], y)], &p, None).unwrap();
        assert!((loss - (pred - y).powi(2)).abs() < 1e-15);
        assert!((grad.w_out[0] - e * hh).abs() < 1e-14);
        assert!((grad.b_out - e).abs() < 1e-14);
        assert!((grad.output.w[0] - expect_wo).abs() < 1e-14);
        assert!((grad.input.w[0] - expect_wi).abs() < 1e-14);
        assert!((grad.candidate.w[0] - expect_wg).abs() < 1e-14);
        assert!((grad.candidate.b[0] - expect_bg).abs() < 1e-14);
        // c_prev = 0, so the forget gate receives no gradient.
        assert_eq!(grad.forget.w[0], 0.0);
        assert_eq!(grad.forget.b[0], 0.0);
    }

    #[test]
    fn clipping_bounds_global_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = LstmParams::init(2, 3, 1.0, &mut rng);
        let batch = [sample(vec![1.0, 2.0, 3.0, 4.0], 500.0)];
        let (raw, _) = bptt_gradients(&batch, &p, None).unwrap();
        let (clipped, _) = bptt_gradients(&batch, &p, Some(5.0)).unwrap();
        let norm = |g: &LstmParams| g.to_flat().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm(&raw) > 5.0);
        assert!((norm(&clipped) - 5.0).abs() < 1e-9);
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = LstmParams::init(3, 2, 1.0, &mut rng);
        let mut q = LstmParams::zeros(3, 2);
        q.set_flat(&p.to_flat());
        assert_eq!(p, q);
        assert_eq!(p.to_flat().len(), p.n_params());
    }
}
