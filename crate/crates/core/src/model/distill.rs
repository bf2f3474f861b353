//! Teacher-to-student distillation of the base.
//!
//! The student base is regressed onto the teacher base's output activations,
//! so any head trained on teacher features attaches to the student unchanged.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::net::base_regression_grad;
use super::{base_features, ModelError, NetworkSpec, Optimizer, OptimizerKind, ParamVector};

#[derive(Debug, Clone, PartialEq)]
pub struct DistillConfig {
    pub epochs: usize,
    pub alpha: f64,
    pub optimizer: OptimizerKind,
    /// Seed for the student's Glorot initialization when no `init` is given.
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            alpha: 1e-2,
            optimizer: OptimizerKind::Adam,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistillOutcome {
    /// Student parameters: trained base followed by the teacher's head.
    pub student: ParamVector,
    /// Distillation loss before each epoch, plus the final loss.
    pub loss_curve: Vec<f64>,
}

impl DistillOutcome {
    pub fn base(&self) -> &[f64] {
        self.student.base()
    }
}

fn check_compatible(teacher: &NetworkSpec, student: &NetworkSpec) -> Result<(), ModelError> {
    if teacher.input_dim() != student.input_dim() {
        return Err(ModelError::Shape(format!(
            "student input {} vs teacher input {}",
            student.input_dim(),
            teacher.input_dim()
        )));
    }
    if teacher.layer_sizes[teacher.head_start_layer..] != student.layer_sizes[student.head_start_layer..] {
        return Err(ModelError::Shape(format!(
            "student head {:?} does not match teacher head {:?}",
            &student.layer_sizes[student.head_start_layer..],
            &teacher.layer_sizes[teacher.head_start_layer..]
        )));
    }
    Ok(())
}

/// Trains the student base to reproduce the teacher base's activations on
/// `transfer_inputs` (full-batch). `init` overrides the random initialization.
pub fn distill_base(
    teacher_spec: &NetworkSpec,
    teacher: &ParamVector,
    student_spec: &NetworkSpec,
    transfer_inputs: &Array2<f64>,
    cfg: &DistillConfig,
    init: Option<&ParamVector>,
) -> Result<DistillOutcome, ModelError> {
    check_compatible(teacher_spec, student_spec)?;
    if transfer_inputs.nrows() == 0 {
        return Err(ModelError::EmptyBatch);
    }
    let targets = base_features(teacher_spec, teacher, transfer_inputs.view())?;
    let mut student = match init {
        Some(p) => {
            p.check_spec(student_spec)?;
            p.clone()
        }
        None => ParamVector::glorot(student_spec, &mut ChaCha8Rng::seed_from_u64(cfg.seed)),
    };
    student.set_head(teacher.head())?;
    let base_len = student_spec.head_offset();
    let mut opt = Optimizer::new(cfg.optimizer, cfg.alpha);
    let mut curve = Vec::with_capacity(cfg.epochs + 1);
    for _ in 0..cfg.epochs {
        let (loss, grad) = base_regression_grad(student_spec, &student, transfer_inputs.view(), &targets);
        curve.push(loss);
        if loss == 0.0 {
            break;
        }
        opt.step(&mut student.values_mut()[..base_len], &grad)?;
    }
    let (final_loss, _) = base_regression_grad(student_spec, &student, transfer_inputs.view(), &targets);
    curve.push(final_loss);
    Ok(DistillOutcome {
        student,
        loss_curve: curve,
    })
}

/// Distillation loss of `student` against `teacher` on `inputs`.
pub fn distill_loss(
    teacher_spec: &NetworkSpec,
    teacher: &ParamVector,
    student_spec: &NetworkSpec,
    student: &ParamVector,
    inputs: &Array2<f64>,
) -> Result<f64, ModelError> {
    check_compatible(teacher_spec, student_spec)?;
    let targets = base_features(teacher_spec, teacher, inputs.view())?;
    Ok(base_regression_grad(student_spec, student, inputs.view(), &targets).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn inputs(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn self_distillation_is_a_fixed_point() {
        let spec = NetworkSpec::new(vec![6, 8, 4, 2], 2).unwrap();
        let teacher = ParamVector::glorot(&spec, &mut ChaCha8Rng::seed_from_u64(1));
        let x = inputs(32, 6, 2);
        let out = distill_base(&spec, &teacher, &spec, &x, &DistillConfig::default(), Some(&teacher)).unwrap();
        assert_eq!(out.loss_curve[0], 0.0);
        assert_eq!(out.student, teacher);
    }

    #[test]
    fn smaller_student_loss_decreases() {
        let teacher_spec = NetworkSpec::new(vec![6, 16, 8, 2], 2).unwrap();
        let student_spec = NetworkSpec::new(vec![6, 4, 8, 2], 2).unwrap();
        let teacher = ParamVector::glorot(&teacher_spec, &mut ChaCha8Rng::seed_from_u64(3));
        let x = inputs(64, 6, 4);
        let cfg = DistillConfig {
            epochs: 100,
            alpha: 5e-3,
            ..DistillConfig::default()
        };
        let out = distill_base(&teacher_spec, &teacher, &student_spec, &x, &cfg, None).unwrap();
        let c = &out.loss_curve;
        let down = c.windows(2).filter(|w| w[1] < w[0]).count();
        assert!(down as f64 >= 0.9 * (c.len() - 1) as f64, "{down} of {}", c.len() - 1);
        assert!(c.last().unwrap() < &c[0]);
        assert_eq!(out.student.head(), teacher.head());
    }

    #[test]
    fn rejects_mismatched_heads() {
        let t = NetworkSpec::new(vec![6, 8, 4, 2], 2).unwrap();
        let s = NetworkSpec::new(vec![6, 8, 5, 2], 2).unwrap();
        let p = ParamVector::zeros(&t);
        let err = distill_base(&t, &p, &s, &inputs(4, 6, 0), &DistillConfig::default(), None);
        assert!(matches!(err, Err(ModelError::Shape(_))));
    }
}
