//! Naive per-object reimplementation of the policy forward pass, reading
//! parameters by name. Loops over objects and edges instead of using the tape.

#![allow(dead_code)]

use tango_core::nn::{ParamStore, Tensor};
use tango_core::policy::{GoalFeatures, SceneFeatures, TangoModel};
use tango_core::world::{Action, InteractionType, ObjectId};

pub struct Reference {
    pub nodes: Vec<Vec<f64>>,
    pub attention: Vec<f64>,
    pub omega: Vec<f64>,
    pub history: Vec<f64>,
    pub interaction: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Option<Vec<f64>>,
    pub action: Action,
}

fn p<'a>(store: &'a ParamStore, name: &str) -> &'a Tensor {
    store.value(store.id_of(name).unwrap_or_else(|| panic!("no parameter {name}")))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `W v + b` with `W` out×in.
fn affine(w: &Tensor, b: Option<&Tensor>, v: &[f64]) -> Vec<f64> {
    assert_eq!(w.cols(), v.len(), "affine width");
    (0..w.rows())
        .map(|i| {
            let mut s = b.map_or(0.0, |b| b.get(0, i));
            for k in 0..v.len() {
                s += w.get(i, k) * v[k];
            }
            s
        })
        .collect()
}

fn mlp(store: &ParamStore, name: &str, slope: f64, activate_last: bool, v: &[f64]) -> Vec<f64> {
    let slope = store.id_of(&format!("{name}.slope")).map_or(slope, |id| store.value(id).get(0, 0));
    let mut layers = 0;
    while store.id_of(&format!("{name}.{layers}.w")).is_some() {
        layers += 1;
    }
    let mut h = v.to_vec();
    for i in 0..layers {
        h = affine(p(store, &format!("{name}.{i}.w")), Some(p(store, &format!("{name}.{i}.b"))), &h);
        if i + 1 < layers || activate_last {
            h.iter_mut().for_each(|x| {
                if *x < 0.0 {
                    *x *= slope
                }
            });
        }
    }
    h
}

fn gru(store: &ParamStore, name: &str, h: &[f64], x: &[f64]) -> Vec<f64> {
    let n = h.len();
    let wx = affine(p(store, &format!("{name}.w.w")), Some(p(store, &format!("{name}.w.b"))), x);
    let uh = affine(p(store, &format!("{name}.u_zr")), None, h);
    let z: Vec<f64> = (0..n).map(|j| sigmoid(wx[j] + uh[j])).collect();
    let r: Vec<f64> = (0..n).map(|j| sigmoid(wx[n + j] + uh[n + j])).collect();
    let rh: Vec<f64> = (0..n).map(|j| r[j] * h[j]).collect();
    let c = affine(p(store, &format!("{name}.u_h")), None, &rh);
    (0..n).map(|j| (1.0 - z[j]) * h[j] + z[j] * (wx[2 * n + j] + c[j]).tanh()).collect()
}

fn lstm(store: &ParamStore, name: &str, h: &[f64], c: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let wx = affine(p(store, &format!("{name}.w.w")), Some(p(store, &format!("{name}.w.b"))), x);
    let uh = affine(p(store, &format!("{name}.u")), None, h);
    let pre: Vec<f64> = wx.iter().zip(&uh).map(|(a, b)| a + b).collect();
    let mut h2 = vec![0.0; n];
    let mut c2 = vec![0.0; n];
    for j in 0..n {
        let (i, f, g, o) = (sigmoid(pre[j]), sigmoid(pre[n + j]), pre[2 * n + j].tanh(), sigmoid(pre[3 * n + j]));
        c2[j] = f * c[j] + i * g;
        h2[j] = o * c2[j].tanh();
    }
    (h2, c2)
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn cat(parts: &[&[f64]]) -> Vec<f64> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

/// Highest score; ties go to the smaller id.
fn pick(scores: &[f64], ids: &[ObjectId]) -> usize {
    (0..scores.len())
        .max_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(ids[b].cmp(&ids[a])))
        .unwrap()
}

/// Forward pass of a factored-decoder model with history, attention,
/// graph and metric encoders all present.
pub fn reference(model: &TangoModel, scene: &SceneFeatures, goal: &GoalFeatures, history: &[Vec<f64>]) -> Reference {
    let s = &model.params;
    let c = &model.config;
    let n = scene.len();
    let gain = (c.embed_dim as f64).sqrt();
    let k = InteractionType::COUNT;
    let embed = |o: usize| -> Vec<f64> { scene.embeddings.row(o).iter().map(|v| v * gain).collect() };

    let mut nodes: Vec<Vec<f64>> = (0..n)
        .map(|o| {
            let x = cat(&[scene.attributes.row(o), &embed(o)]);
            affine(p(s, "ggcn.init.w"), Some(p(s, "ggcn.init.b")), &x).into_iter().map(f64::tanh).collect()
        })
        .collect();
    for round in 0..c.message_steps {
        let msgs: Vec<Vec<f64>> = (0..n)
            .map(|o| {
                let mut m = vec![0.0; c.hidden];
                for j in 0..4 {
                    let w = p(s, &format!("ggcn.msg.{round}.{j}"));
                    for &u in &scene.neighbors[j][o] {
                        for (a, b) in m.iter_mut().zip(affine(w, None, &nodes[u])) {
                            *a += b;
                        }
                    }
                }
                m
            })
            .collect();
        nodes = (0..n).map(|o| gru(s, "ggcn.gru", &nodes[o], &msgs[o])).collect();
    }
    let fused: Vec<Vec<f64>> =
        (0..n).map(|o| cat(&[&nodes[o], &mlp(s, "metric", c.prelu_slope, true, scene.metric.row(o))])).collect();

    let (mut eta, mut cell) = (vec![0.0; c.hidden], vec![0.0; c.hidden]);
    for a in history {
        let x: Vec<f64> = a.iter().enumerate().map(|(i, v)| if i < k { *v } else { v * gain }).collect();
        (eta, cell) = lstm(s, "history", &eta, &cell, &x);
    }

    let gobj: Vec<f64> = goal.objects.iter().map(|v| v * gain).collect();
    let query = affine(p(s, "attention.w"), Some(p(s, "attention.b")), &cat(&[&gobj, &eta]));
    let width = fused[0].len() as f64;
    let logits: Vec<f64> =
        fused.iter().map(|f| f.iter().zip(&query).map(|(a, b)| a * b).sum::<f64>() / width.sqrt()).collect();
    let attention = softmax(&logits);
    let mut omega = vec![0.0; fused[0].len()];
    for (o, f) in fused.iter().enumerate() {
        for (w, v) in omega.iter_mut().zip(f) {
            *w += attention[o] * v;
        }
    }
    let grel: Vec<f64> = goal.relations.iter().map(|v| v * gain).collect();
    let context = cat(&[&omega, &grel, &eta]);

    let interaction = softmax(&mlp(s, "head.interaction", c.prelu_slope, false, &context));
    let best = (0..k).fold(0, |b, i| if interaction[i] > interaction[b] { i } else { b });
    let mut ibar = vec![0.0; k];
    ibar[best] = 1.0;
    let alpha: Vec<f64> =
        (0..n).map(|o| sigmoid(mlp(s, "head.alpha", c.prelu_slope, false, &cat(&[&context, &embed(o), &ibar]))[0])).collect();
    let kind = InteractionType::ALL[best];
    let beta = (kind.arity() == 2).then(|| {
        (0..n)
            .map(|o| sigmoid(mlp(s, "head.beta", c.prelu_slope, false, &cat(&[&context, &embed(o), &ibar, &[alpha[o]]]))[0]))
            .collect::<Vec<f64>>()
    });
    let o1 = scene.ids[pick(&alpha, &scene.ids)].clone();
    let o2 = beta.as_ref().map(|b| scene.ids[pick(b, &scene.ids)].clone());
    let action = Action::new(kind, o1, o2).expect("arity matches");
    Reference { nodes, attention, omega, history: eta, interaction, alpha, beta, action }
}

/// Largest absolute difference between two equally long slices.
pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
