//! Per-epoch learning-rate schedules.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSchedule {
    Constant { base_lr: f64 },
    /// `base_lr * decay^floor(epoch / period)`
    Step { base_lr: f64, period: usize, decay: f64 },
    /// Half-cosine from `base_lr` at epoch 0 to `eta_min` at `t_max`, then flat.
    CosineAnnealing { base_lr: f64, t_max: usize, eta_min: f64 },
}

impl LrSchedule {
    pub fn base_lr(&self) -> f64 {
        match *self {
            LrSchedule::Constant { base_lr }
            | LrSchedule::Step { base_lr, .. }
            | LrSchedule::CosineAnnealing { base_lr, .. } => base_lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let base = self.base_lr();
        if !(base > 0.0 && base.is_finite()) {
            return Err(Error::Argument(format!("base learning rate {base} must be positive")));
        }
        match *self {
            LrSchedule::Constant { .. } => Ok(()),
            LrSchedule::Step { period, decay, .. } => {
                if period == 0 || !(decay > 0.0 && decay <= 1.0) {
                    Err(Error::Argument("step schedule needs period >= 1 and decay in (0, 1]".into()))
                } else {
                    Ok(())
                }
            }
            LrSchedule::CosineAnnealing { t_max, eta_min, .. } => {
                if t_max == 0 || !(0.0..=base).contains(&eta_min) {
                    Err(Error::Argument("cosine schedule needs t_max >= 1 and 0 <= eta_min <= base_lr".into()))
                } else {
                    Ok(())
                }
            }
        }
    }
}

pub fn lr_at(schedule: &LrSchedule, epoch: usize) -> f64 {
    match *schedule {
        LrSchedule::Constant { base_lr } => base_lr,
        LrSchedule::Step { base_lr, period, decay } => base_lr * decay.powi((epoch / period) as i32),
        LrSchedule::CosineAnnealing { base_lr, t_max, eta_min } => {
            if epoch == 0 {
                base_lr
            } else if epoch >= t_max {
                eta_min
            } else {
                let cos = (PI * epoch as f64 / t_max as f64).cos();
                eta_min + 0.5 * (base_lr - eta_min) * (1.0 + cos)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_endpoints_and_midpoint() {
        let s = LrSchedule::CosineAnnealing { base_lr: 3e-4, t_max: 50, eta_min: 1e-6 };
        assert_eq!(lr_at(&s, 0), 3e-4);
        assert_eq!(lr_at(&s, 50), 1e-6);
        assert_eq!(lr_at(&s, 80), 1e-6);
        assert!((lr_at(&s, 25) - (3e-4 + 1e-6) / 2.0).abs() <= 1e-12);
        let z = LrSchedule::CosineAnnealing { base_lr: 0.1, t_max: 10, eta_min: 0.0 };
        assert!((lr_at(&z, 5) - 0.05).abs() <= 1e-12);
        let mut prev = f64::INFINITY;
        for e in 0..=10 {
            let lr = lr_at(&z, e);
            assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn step_and_constant() {
        let s = LrSchedule::Step { base_lr: 1.0, period: 15, decay: 0.1 };
        assert_eq!(lr_at(&s, 14), 1.0);
        assert_eq!(lr_at(&s, 15), 0.1);
        assert!((lr_at(&s, 30) - 0.01).abs() < 1e-15);
        assert_eq!(lr_at(&LrSchedule::Constant { base_lr: 0.5 }, 99), 0.5);
    }

    #[test]
    fn validation() {
        assert!(LrSchedule::Constant { base_lr: 0.0 }.validate().is_err());
        assert!(LrSchedule::Step { base_lr: 1.0, period: 0, decay: 0.5 }.validate().is_err());
        assert!(LrSchedule::CosineAnnealing { base_lr: 1.0, t_max: 5, eta_min: 2.0 }.validate().is_err());
    }

    #[test]
    fn json_shape() {
        let s: LrSchedule = serde_json::from_str(r#"{"kind":"step","base_lr":0.001,"period":15,"decay":0.1}"#).unwrap();
        assert_eq!(s, LrSchedule::Step { base_lr: 0.001, period: 15, decay: 0.1 });
    }
}
