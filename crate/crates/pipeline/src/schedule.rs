//! Learning-rate schedule.

use crate::config::LrSchedule;

/// Piecewise-constant rate: `initial` for epochs before the drop point,
/// `drop_to` from the drop epoch onward ("after N epochs" means the rate
/// changes once N epochs have completed, i.e. at epoch index N).
pub fn lr_schedule(epoch: usize, cfg: &LrSchedule) -> f64 {
    match (cfg.drop_to, cfg.drop_after_epochs) {
        (Some(low), Some(at)) if epoch >= at => low,
        _ => cfg.initial,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enhancer_schedule_boundaries() {
        let cfg = LrSchedule {
            initial: 1e-4,
            drop_to: Some(1e-5),
            drop_after_epochs: Some(2000),
        };
        assert_eq!(lr_schedule(0, &cfg), 1e-4);
        assert_eq!(lr_schedule(1999, &cfg), 1e-4);
        assert_eq!(lr_schedule(2000, &cfg), 1e-5);
        assert_eq!(lr_schedule(3999, &cfg), 1e-5);
    }

    #[test]
    fn fixed_schedule_never_drops() {
        let cfg = LrSchedule {
            initial: 1e-4,
            drop_to: None,
            drop_after_epochs: None,
        };
        for epoch in [0, 100, 10_000] {
            assert_eq!(lr_schedule(epoch, &cfg), 1e-4);
        }
    }
}
