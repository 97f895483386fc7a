use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numcore::tape::Gradients;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Zeros,
    /// Uniform in `[-bound, bound]`.
    Uniform(f64),
    /// Uniform in `±sqrt(6 / (rows + cols))`.
    Xavier,
}

/// A dense row-major parameter matrix with its Adam moment buffers.
#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub value: Vec<f64>,
    pub monotonic: bool,
    m: Vec<f64>,
    v: Vec<f64>,
    steps: u64,
}

impl Param {
    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    /// Number of optimizer updates this parameter has received.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }
}

/// Named trainable tensors plus optimizer state.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    steps: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        init: Init,
        monotonic: bool,
        rng: &mut R,
    ) -> ParamId {
        let n = rows * cols;
        let mut value = match init {
            Init::Zeros => vec![0.0; n],
            Init::Uniform(bound) => (0..n).map(|_| rng.gen_range(-bound..=bound)).collect(),
            Init::Xavier => {
                let bound = (6.0 / (rows + cols) as f64).sqrt();
                (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
            }
        };
        if monotonic {
            project_nonnegative(&mut value);
        }
        self.insert(Param {
            name: name.into(),
            rows,
            cols,
            value,
            monotonic,
            m: vec![0.0; n],
            v: vec![0.0; n],
            steps: 0,
        })
    }

    /// Adds a parameter with explicit contents.
    pub fn add_with_value(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        value: Vec<f64>,
        monotonic: bool,
    ) -> ParamId {
        assert_eq!(value.len(), rows * cols, "parameter data length");
        let n = value.len();
        self.insert(Param {
            name: name.into(),
            rows,
            cols,
            value,
            monotonic,
            m: vec![0.0; n],
            v: vec![0.0; n],
            steps: 0,
        })
    }

    fn insert(&mut self, p: Param) -> ParamId {
        self.params.push(p);
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn values(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].value
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Number of `adam_step` calls applied to the store.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Total scalar count across all parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(Param::len).sum()
    }

    /// Copies parameter values (not optimizer state) from `other`, which
    /// must have an identical layout.
    pub fn copy_values_from(&mut self, other: &ParamStore) {
        assert_eq!(self.params.len(), other.params.len());
        for (dst, src) in self.params.iter_mut().zip(&other.params) {
            assert_eq!(dst.value.len(), src.value.len());
            dst.value.copy_from_slice(&src.value);
        }
    }

    /// One Adam update for every parameter present in `grads`, followed by
    /// the nonnegativity projection of monotonic parameters.
    pub fn adam_step(&mut self, grads: &Gradients, lr: f64) {
        self.steps += 1;
        for (i, p) in self.params.iter_mut().enumerate() {
            let Some(g) = grads.param(ParamId(i)) else {
                continue;
            };
            assert_eq!(g.len(), p.value.len(), "gradient length for {}", p.name);
            p.steps += 1;
            let t = p.steps as i32;
            let bc1 = 1.0 - ADAM_BETA1.powi(t);
            let bc2 = 1.0 - ADAM_BETA2.powi(t);
            for j in 0..g.len() {
                let gj = g[j];
                p.m[j] = ADAM_BETA1 * p.m[j] + (1.0 - ADAM_BETA1) * gj;
                p.v[j] = ADAM_BETA2 * p.v[j] + (1.0 - ADAM_BETA2) * gj * gj;
                let m_hat = p.m[j] / bc1;
                let v_hat = p.v[j] / bc2;
                p.value[j] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
            if p.monotonic {
                project_nonnegative(&mut p.value);
            }
        }
    }
}

fn project_nonnegative(xs: &mut [f64]) {
    for x in xs {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}
