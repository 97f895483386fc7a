use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{QMatrix, RawData, ResponseLog};
use crate::numcore::sigmoid;

/// Parameters of the planted matrix-factorization generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_students: usize,
    pub n_exercises: usize,
    pub n_concepts: usize,
    pub logs_per_student: usize,
    /// Latent dimension of the planted factors.
    pub latent_dim: usize,
    /// Planted factor entries are uniform in `[-scale, scale]`.
    pub scale: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_students: 200,
            n_exercises: 100,
            n_concepts: 8,
            logs_per_student: 40,
            latent_dim: 2,
            scale: 3.0,
            seed: 0,
        }
    }
}

/// Generated data plus the planted factors that produced it.
#[derive(Clone, Debug)]
pub struct SynthData {
    pub raw: RawData,
    /// `n_students x latent_dim`, row-major.
    pub student_factors: Vec<f64>,
    /// `n_exercises x latent_dim`, row-major.
    pub exercise_factors: Vec<f64>,
}

impl SynthData {
    /// Probability of a correct response under the planted model.
    pub fn true_probability(&self, student: usize, exercise: usize) -> f64 {
        let d = self.student_factors.len() / self.raw.student_ids.len();
        let s = &self.student_factors[student * d..(student + 1) * d];
        let e = &self.exercise_factors[exercise * d..(exercise + 1) * d];
        sigmoid(s.iter().zip(e).map(|(a, b)| a * b).sum())
    }
}

/// Responses drawn as Bernoulli(sigmoid(<w_s, w_e>)) with random factors.
///
/// Each student answers `logs_per_student` distinct exercises; each exercise
/// tags one to three concepts.
pub fn generate_synthetic(cfg: &SynthConfig) -> SynthData {
    assert!(cfg.n_students > 0 && cfg.n_exercises > 0 && cfg.n_concepts > 0);
    assert!(cfg.latent_dim > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.latent_dim;
    let mut factors = |n: usize| -> Vec<f64> {
        (0..n * d)
            .map(|_| rng.gen_range(-cfg.scale..=cfg.scale))
            .collect()
    };
    let student_factors = factors(cfg.n_students);
    let exercise_factors = factors(cfg.n_exercises);

    let k = cfg.n_concepts;
    let mut q = vec![0u8; cfg.n_exercises * k];
    for e in 0..cfg.n_exercises {
        let tags = rng.gen_range(1..=3.min(k));
        for c in sample(&mut rng, k, tags) {
            q[e * k + c] = 1;
        }
    }

    let per_student = cfg.logs_per_student.min(cfg.n_exercises);
    let mut data = SynthData {
        raw: RawData {
            logs: Vec::with_capacity(cfg.n_students * per_student),
            q: QMatrix::new(cfg.n_exercises, k, q).expect("every row tagged"),
            student_ids: (0..cfg.n_students).map(|s| format!("s{s}")).collect(),
            exercise_ids: (0..cfg.n_exercises).map(|e| format!("e{e}")).collect(),
            concept_ids: (0..k).map(|c| format!("c{c}")).collect(),
        },
        student_factors,
        exercise_factors,
    };
    for s in 0..cfg.n_students {
        for e in sample(&mut rng, cfg.n_exercises, per_student) {
            let p = data.true_probability(s, e);
            let score = u8::from(rng.gen_bool(p));
            data.raw.logs.push(ResponseLog {
                student: s,
                exercise: e,
                score,
            });
        }
    }
    data
}
