//! Small feed-forward actor and critic over `observe` features plus the
//! partner-history summary. The critic additionally sees a one-hot partner
//! identity when trained against a pool.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::model::{sha256_of, History, Model};
use crate::engine::{observation_len, observe_into, GameState, Layout, NUM_ACTIONS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: usize,
    /// Size of the critic's partner one-hot; 0 disables it.
    pub partners: usize,
    pub history: bool,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: 64,
            partners: 0,
            history: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Dense {
    rows: usize,
    cols: usize,
    /// Row-major `rows x cols` weights followed by `rows` biases.
    w: Vec<f64>,
}

impl Dense {
    fn new(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Dense {
        let normal = Normal::new(0.0, scale / (cols as f64).sqrt()).expect("finite scale");
        let mut w: Vec<f64> = (0..rows * cols).map(|_| normal.sample(rng)).collect();
        w.extend(std::iter::repeat(0.0).take(rows));
        Dense { rows, cols, w }
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        let bias = &self.w[self.rows * self.cols..];
        for r in 0..self.rows {
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            out[r] = bias[r] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Accumulates parameter gradients into `g` and returns `dL/dx` if asked.
    fn backward(&self, x: &[f64], dout: &[f64], g: &mut [f64], dx: Option<&mut [f64]>) {
        let (gw, gb) = g.split_at_mut(self.rows * self.cols);
        for r in 0..self.rows {
            if dout[r] == 0.0 {
                continue;
            }
            gb[r] += dout[r];
            for (gi, xi) in gw[r * self.cols..(r + 1) * self.cols].iter_mut().zip(x) {
                *gi += dout[r] * xi;
            }
        }
        if let Some(dx) = dx {
            dx.fill(0.0);
            for r in 0..self.rows {
                let row = &self.w[r * self.cols..(r + 1) * self.cols];
                for (d, w) in dx.iter_mut().zip(row) {
                    *d += dout[r] * w;
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    fn new(n: usize) -> Adam {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Ascent step on `params` along `grad`.
    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t as i32);
        let c2 = 1.0 - B2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] += lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub config: MlpConfig,
    input: usize,
    actor: [Dense; 2],
    critic: [Dense; 2],
    opt: Vec<Adam>,
}

#[derive(Clone, Debug)]
pub struct MlpGrad {
    parts: [Vec<f64>; 4],
}

impl MlpModel {
    pub fn new(layout: &Layout, config: MlpConfig, seed: u64) -> MlpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = observation_len(layout) + History::FEATURES;
        let h = config.hidden;
        let actor = [
            Dense::new(h, input, 1.0, &mut rng),
            Dense::new(NUM_ACTIONS, h, 0.01, &mut rng),
        ];
        let critic = [
            Dense::new(h, input + config.partners, 1.0, &mut rng),
            Dense::new(1, h, 1.0, &mut rng),
        ];
        let opt = actor
            .iter()
            .chain(&critic)
            .map(|d| Adam::new(d.w.len()))
            .collect();
        MlpModel {
            config,
            input,
            actor,
            critic,
            opt,
        }
    }

    fn critic_input(&self, x: &[f64], partner: Option<usize>) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.input + self.config.partners);
        v.extend_from_slice(x);
        v.extend(std::iter::repeat(0.0).take(self.config.partners));
        if let Some(p) = partner.filter(|&p| p < self.config.partners) {
            v[self.input + p] = 1.0;
        }
        v
    }
}

fn tanh_layer(d: &Dense, x: &[f64]) -> Vec<f64> {
    let mut h = vec![0.0; d.rows];
    d.forward(x, &mut h);
    h.iter_mut().for_each(|v| *v = v.tanh());
    h
}

impl Model for MlpModel {
    type Input = Vec<f64>;
    type Grad = MlpGrad;

    fn encode(&self, state: &GameState, player: usize, history: &History) -> Vec<f64> {
        let n = self.input - History::FEATURES;
        let mut buf = vec![0f32; self.input];
        observe_into(state, player, &mut buf[..n]);
        if self.config.history {
            history.write_features(&mut buf[n..]);
        }
        buf.into_iter().map(f64::from).collect()
    }

    fn logits(&self, x: &Vec<f64>) -> [f64; NUM_ACTIONS] {
        let h = tanh_layer(&self.actor[0], x);
        let mut out = [0.0; NUM_ACTIONS];
        self.actor[1].forward(&h, &mut out);
        out
    }

    fn value(&self, x: &Vec<f64>, partner: Option<usize>) -> f64 {
        let h = tanh_layer(&self.critic[0], &self.critic_input(x, partner));
        let mut out = [0.0];
        self.critic[1].forward(&h, &mut out);
        out[0]
    }

    fn zero_grad(&self) -> MlpGrad {
        MlpGrad {
            parts: [
                vec![0.0; self.actor[0].w.len()],
                vec![0.0; self.actor[1].w.len()],
                vec![0.0; self.critic[0].w.len()],
                vec![0.0; self.critic[1].w.len()],
            ],
        }
    }

    fn accumulate(
        &self,
        x: &Vec<f64>,
        partner: Option<usize>,
        dlogits: &[f64; NUM_ACTIONS],
        dvalue: f64,
        grad: &mut MlpGrad,
    ) {
        let [g0, g1, g2, g3] = &mut grad.parts;
        let h = tanh_layer(&self.actor[0], x);
        let mut dh = vec![0.0; h.len()];
        self.actor[1].backward(&h, dlogits, g1, Some(&mut dh));
        for (d, hv) in dh.iter_mut().zip(&h) {
            *d *= 1.0 - hv * hv;
        }
        self.actor[0].backward(x, &dh, g0, None);

        let cx = self.critic_input(x, partner);
        let h = tanh_layer(&self.critic[0], &cx);
        let mut dh = vec![0.0; h.len()];
        self.critic[1].backward(&h, &[dvalue], g3, Some(&mut dh));
        for (d, hv) in dh.iter_mut().zip(&h) {
            *d *= 1.0 - hv * hv;
        }
        self.critic[0].backward(&cx, &dh, g2, None);
    }

    fn apply(&mut self, grad: &MlpGrad, lr: f64, batch: usize) {
        let scale = 1.0 / batch.max(1) as f64;
        let layers = self.actor.iter_mut().chain(self.critic.iter_mut());
        for ((layer, opt), g) in layers.zip(self.opt.iter_mut()).zip(&grad.parts) {
            let g: Vec<f64> = g.iter().map(|v| v * scale).collect();
            opt.step(&mut layer.w, &g, lr);
        }
    }

    fn param_hash(&self) -> String {
        sha256_of(&(&self.config, &self.actor, &self.critic))
    }
}
