use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ParamId, ParamStore, Tape, Var};
use crate::error::Result;
use crate::Rng;

/// Affine map `x · Wᵀ + b` with `W` of shape out×in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut Rng) -> Self {
        let w = store.uniform(&format!("{name}.w"), output, input, input, rng);
        let b = store.zeros(&format!("{name}.b"), 1, output);
        Self { w, b, input, output }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        tape.linear(x, self.w, self.b)
    }
}

/// Negative-side slope of a PReLU: a constant or a trained scalar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Slope {
    Fixed(f64),
    Learned(ParamId),
}

impl Slope {
    pub fn new(store: &mut ParamStore, name: &str, init: f64, learnable: bool) -> Self {
        if learnable {
            Slope::Learned(store.add(name, super::Tensor::filled(1, 1, init)))
        } else {
            Slope::Fixed(init)
        }
    }

    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Slope::Fixed(s) => Ok(tape.prelu(x, *s)),
            Slope::Learned(p) => {
                let s = tape.param(*p);
                tape.prelu_param(x, s)
            }
        }
    }
}

/// Stack of linear layers with PReLU between them (and after the last one
/// when `activate_last`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub slope: Slope,
    pub activate_last: bool,
}

impl Mlp {
    /// `widths` lists the input width followed by each layer's output width.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        widths: &[usize],
        slope: f64,
        learnable_slope: bool,
        activate_last: bool,
        rng: &mut Rng,
    ) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        let slope = Slope::new(store, &format!("{name}.slope"), slope, learnable_slope);
        Self { layers, slope, activate_last }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let mut h = x;
        let last = self.layers.len().saturating_sub(1);
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(tape, h)?;
            if i < last || self.activate_last {
                h = self.slope.apply(tape, h)?;
            }
        }
        Ok(h)
    }
}

/// Gated recurrent unit:
/// `z = σ(x W_zᵀ + h U_zᵀ + b_z)`, `r = σ(x W_rᵀ + h U_rᵀ + b_r)`,
/// `h̃ = tanh(x W_hᵀ + (r ⊙ h) U_hᵀ + b_h)`, `h' = (1 − z) ⊙ h + z ⊙ h̃`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gru {
    pub hidden: usize,
    pub input: usize,
    /// `[W_z; W_r; W_h]`, 3H×X, and the matching biases.
    pub w: Linear,
    /// `[U_z; U_r]`, 2H×H.
    pub u_zr: ParamId,
    /// H×H.
    pub u_h: ParamId,
}

impl Gru {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let w = Linear::new(store, &format!("{name}.w"), input, 3 * hidden, rng);
        let u_zr = store.uniform(&format!("{name}.u_zr"), 2 * hidden, hidden, hidden, rng);
        let u_h = store.uniform(&format!("{name}.u_h"), hidden, hidden, hidden, rng);
        Self { hidden, input, w, u_zr, u_h }
    }

    /// One step for every row of `h` (rows×H) given inputs `x` (rows×X).
    pub fn step(&self, tape: &mut Tape, h: Var, x: Var) -> Result<Var> {
        let hd = self.hidden;
        let xs = self.w.forward(tape, x)?;
        let u = tape.param(self.u_zr);
        let hs = tape.matmul_t(h, u)?;
        let xz = tape.slice(xs, 0, hd)?;
        let hz = tape.slice(hs, 0, hd)?;
        let zpre = tape.add(xz, hz)?;
        let z = tape.sigmoid(zpre);
        let xr = tape.slice(xs, hd, hd)?;
        let hr = tape.slice(hs, hd, hd)?;
        let rpre = tape.add(xr, hr)?;
        let r = tape.sigmoid(rpre);
        let rh = tape.mul(r, h)?;
        let uh = tape.param(self.u_h);
        let cand_h = tape.matmul_t(rh, uh)?;
        let xh = tape.slice(xs, 2 * hd, hd)?;
        let cpre = tape.add(xh, cand_h)?;
        let cand = tape.tanh(cpre);
        let keep = tape.one_minus(z);
        let a = tape.mul(keep, h)?;
        let b = tape.mul(z, cand)?;
        tape.add(a, b)
    }
}

/// LSTM cell with gate order input, forget, candidate, output:
/// `c' = f ⊙ c + i ⊙ g`, `h' = o ⊙ tanh(c')`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub hidden: usize,
    pub input: usize,
    /// 4H×X plus biases.
    pub w: Linear,
    /// 4H×H.
    pub u: ParamId,
}

impl Lstm {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let w = Linear::new(store, &format!("{name}.w"), input, 4 * hidden, rng);
        let u = store.uniform(&format!("{name}.u"), 4 * hidden, hidden, hidden, rng);
        Self { hidden, input, w, u }
    }

    /// Returns `(h', c')`.
    pub fn step(&self, tape: &mut Tape, h: Var, c: Var, x: Var) -> Result<(Var, Var)> {
        let hd = self.hidden;
        let xs = self.w.forward(tape, x)?;
        let u = tape.param(self.u);
        let hs = tape.matmul_t(h, u)?;
        let pre = tape.add(xs, hs)?;
        let ip = tape.slice(pre, 0, hd)?;
        let i = tape.sigmoid(ip);
        let fp = tape.slice(pre, hd, hd)?;
        let f = tape.sigmoid(fp);
        let gp = tape.slice(pre, 2 * hd, hd)?;
        let g = tape.tanh(gp);
        let op = tape.slice(pre, 3 * hd, hd)?;
        let o = tape.sigmoid(op);
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c2 = tape.add(fc, ig)?;
        let tc = tape.tanh(c2);
        let h2 = tape.mul(o, tc)?;
        Ok((h2, c2))
    }
}
