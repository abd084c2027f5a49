use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::Sampler;
use crate::model::{EvaluationSet, Model, ParamVector, TwoLayerNet};
use crate::rng::{self, labels, SeededRng};

/// A small ReLU network generating the labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherSpec {
    #[serde(default = "default_teacher_width")]
    pub width: usize,
    pub input_dim: usize,
    pub seed: u64,
}

fn default_teacher_width() -> usize {
    3
}

impl TeacherSpec {
    pub fn new(input_dim: usize, seed: u64) -> Self {
        TeacherSpec {
            width: 3,
            input_dim,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Teacher {
    pub net: TwoLayerNet,
    pub w: ParamVector,
}

impl Teacher {
    /// Gaussian units rescaled so that `||a_j|| |b_j| = 1`.
    pub fn generate(spec: &TeacherSpec) -> Result<Teacher> {
        if spec.width == 0 || spec.input_dim == 0 {
            return Err(Error::invalid(
                "teacher needs at least one unit and one input dimension",
            ));
        }
        let net = TwoLayerNet::relu(spec.width, spec.input_dim);
        let mut r = rng::stream(spec.seed, labels::TEACHER);
        let mut inner = Vec::with_capacity(spec.width);
        let mut outer = Vec::with_capacity(spec.width);
        for _ in 0..spec.width {
            let a = rng::normal_vec(&mut r, spec.input_dim, 1.0);
            let b = rng::normal(&mut r);
            let c = (crate::linalg::norm(&a) * b.abs()).sqrt();
            inner.push(a.into_iter().map(|x| x / c).collect());
            outer.push(vec![b / c]);
        }
        Ok(Teacher {
            w: net.params_from(&inner, &outer),
            net,
        })
    }

    pub fn labels(&self, set: &EvaluationSet) -> Vec<f64> {
        self.net.forward(&self.w, set)
    }

    /// `n` uniform points on the unit sphere with teacher labels.
    pub fn sample(&self, n: usize, r: &mut SeededRng) -> Result<EvaluationSet> {
        let set = EvaluationSet::new(rng::sphere_points(r, n, self.net.input_dim))?;
        let y = self.labels(&set);
        set.with_targets(y, 1)
    }
}

/// Fresh labelled batches on every step, plus a fixed held-out sample.
#[derive(Debug, Clone)]
pub struct TeacherSampler {
    teacher: Teacher,
    stream: SeededRng,
    holdout: EvaluationSet,
}

impl TeacherSampler {
    pub fn new(teacher: Teacher, seed: u64, holdout_size: usize) -> Result<Self> {
        let holdout = teacher.sample(holdout_size, &mut rng::stream(seed, labels::HOLDOUT))?;
        Ok(TeacherSampler {
            teacher,
            stream: rng::stream(seed, labels::SGD_BATCHES),
            holdout,
        })
    }
}

impl Sampler for TeacherSampler {
    fn batch(&mut self, _step: usize, size: usize) -> Result<EvaluationSet> {
        self.teacher.sample(size, &mut self.stream)
    }

    fn holdout(&self) -> &EvaluationSet {
        &self.holdout
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn teacher_units_are_normalized() {
        for seed in 0..20 {
            let t = Teacher::generate(&TeacherSpec::new(7, seed)).unwrap();
            for n in crate::model::NeuronModel::neurons(&t.net, &t.w) {
                let prod = crate::linalg::norm(&n.inner) * n.outer[0].abs();
                assert!((prod - 1.0).abs() < 1e-12);
            }
        }
    }
}
