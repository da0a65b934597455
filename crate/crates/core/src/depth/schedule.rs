use crate::error::{Error, Result};

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 8.5e-4;
pub const DEFAULT_BETA_END: f64 = 0.012;

/// Cumulative signal fractions `ᾱ_t` for a linear β schedule.
///
/// Timesteps are zero-based: index `t` here is step `t + 1` of a 1-based
/// `1..=T` numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    alpha_bar: Vec<f64>,
}

impl Default for DiffusionSchedule {
    fn default() -> Self {
        make_schedule(DEFAULT_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END)
            .expect("default schedule is valid")
    }
}

impl DiffusionSchedule {
    /// Wraps an explicit `ᾱ` table, which must lie in `(0, 1]` and strictly decrease.
    pub fn from_alpha_bar(alpha_bar: Vec<f64>) -> Result<Self> {
        if alpha_bar.is_empty() {
            return Err(Error::InvalidArgument("empty schedule".into()));
        }
        let in_range = alpha_bar.iter().all(|&a| a > 0.0 && a <= 1.0);
        let decreasing = alpha_bar.windows(2).all(|w| w[1] < w[0]);
        if !in_range || !decreasing {
            return Err(Error::InvalidArgument(
                "alpha_bar must lie in (0, 1] and strictly decrease".into(),
            ));
        }
        Ok(Self { alpha_bar })
    }

    pub fn steps(&self) -> usize {
        self.alpha_bar.len()
    }

    pub fn alpha_bar(&self) -> &[f64] {
        &self.alpha_bar
    }

    /// Signal scale `√ᾱ_t`.
    pub fn signal(&self, t: usize) -> f64 {
        self.alpha_bar[t].sqrt()
    }

    /// Noise scale `√(1 - ᾱ_t)`.
    pub fn noise(&self, t: usize) -> f64 {
        (1.0 - self.alpha_bar[t]).sqrt()
    }
}

/// `β` linearly spaced over `steps`, `ᾱ_t = Π_{s ≤ t} (1 - β_s)`.
pub fn make_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<DiffusionSchedule> {
    if steps == 0 {
        return Err(Error::InvalidArgument("schedule needs at least one step".into()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < beta_start <= beta_end < 1, got [{beta_start}, {beta_end}]"
        )));
    }
    let mut alpha_bar = Vec::with_capacity(steps);
    let mut acc = 1.0;
    for i in 0..steps {
        let beta = if steps == 1 {
            beta_start
        } else {
            beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
        };
        acc *= 1.0 - beta;
        alpha_bar.push(acc);
    }
    Ok(DiffusionSchedule { alpha_bar })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_tables() {
        assert_eq!(make_schedule(1, 0.5, 0.5).unwrap().alpha_bar(), &[0.5]);
        let s = make_schedule(3, 0.1, 0.1).unwrap();
        let expected = [0.9, 0.81, 0.729];
        for (a, e) in s.alpha_bar().iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn default_matches_cumulative_product() {
        let s = DiffusionSchedule::default();
        assert_eq!(s.steps(), 1000);
        let mut acc = 1.0f64;
        for (i, &a) in s.alpha_bar().iter().enumerate() {
            let beta = 8.5e-4 + (0.012 - 8.5e-4) * i as f64 / 999.0;
            acc *= 1.0 - beta;
            assert!((a - acc).abs() <= 1e-15);
        }
        assert!(s.alpha_bar()[0] > 0.999);
        assert!(s.alpha_bar()[999] < 0.01);
        assert!(s.alpha_bar().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(make_schedule(0, 0.1, 0.2).is_err());
        assert!(make_schedule(10, 0.0, 0.2).is_err());
        assert!(make_schedule(10, 0.3, 0.2).is_err());
        assert!(make_schedule(10, 0.1, 1.0).is_err());
        assert!(DiffusionSchedule::from_alpha_bar(vec![0.5, 0.6]).is_err());
    }
}
