/// Energy drain that empties a full tank in four simulated hours, per second.
pub const DEFAULT_DECAY_RATE: f64 = 1.0 / 14_400.0;

/// Internal bodily state. The energy level is sensed by the agent; turning it
/// into reward is the agent's business.
#[derive(Clone, Debug, PartialEq)]
pub struct InteroState {
    /// Dimensionless, always in `[0, 1]`.
    pub energy: f64,
    /// Energy lost per simulated second.
    pub decay_rate: f64,
    /// Feed amounts queued since the last update.
    pub pending_feed: f64,
}

impl Default for InteroState {
    fn default() -> Self {
        Self { energy: 1.0, decay_rate: DEFAULT_DECAY_RATE, pending_feed: 0.0 }
    }
}

impl InteroState {
    pub fn with_energy(energy: f64) -> Self {
        Self { energy: energy.clamp(0.0, 1.0), ..Self::default() }
    }

    pub fn queue_feed(&mut self, amount: f64) {
        if amount > 0.0 {
            self.pending_feed += amount;
        }
    }

    /// Applies the queued feeds and one step of decay.
    pub fn advance(&mut self, dt: f64) {
        let feeds = core::mem::take(&mut self.pending_feed);
        *self = update_interoception(self, &[feeds], dt);
    }
}

/// `energy ← clamp(energy − decay·dt + Σ feeds, 0, 1)`; the feed queue is cleared.
pub fn update_interoception(intero: &InteroState, feeds: &[f64], dt: f64) -> InteroState {
    let fed: f64 = feeds.iter().filter(|f| **f > 0.0).sum();
    let energy = (intero.energy - intero.decay_rate * dt + fed).clamp(0.0, 1.0);
    InteroState { energy, decay_rate: intero.decay_rate, pending_feed: 0.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DT;
    use proptest::prelude::*;

    #[test]
    fn full_tank_lasts_four_hours() {
        let mut s = InteroState::default();
        let mut empty_at = None;
        for tick in 1..=800_000u64 {
            s.advance(DT);
            if s.energy == 0.0 {
                empty_at = Some(tick);
                break;
            }
        }
        let tick = empty_at.expect("energy must reach zero");
        // 14400 s = 720000 ticks; summation error stays within a tick
        assert!(tick.abs_diff(720_000) <= 1, "emptied at tick {tick}");
    }

    #[test]
    fn feeding_saturates() {
        let s = update_interoception(&InteroState::with_energy(0.9), &[0.4], 0.0);
        assert_eq!(s.energy, 1.0);
    }

    #[test]
    fn empty_stays_empty() {
        let s = update_interoception(&InteroState::with_energy(0.0), &[], DT);
        assert_eq!(s.energy, 0.0);
    }

    proptest! {
        #[test]
        fn conservation_away_from_bounds(e in 0.1f64..0.8, feed in 0.0f64..0.1) {
            let s = InteroState::with_energy(e);
            let next = update_interoception(&s, &[feed], DT);
            let expected = e - s.decay_rate * DT + feed;
            prop_assert!((next.energy - expected).abs() < 1e-15);
        }

        #[test]
        fn energy_stays_in_unit_interval(e in -1.0f64..2.0, feed in -1.0f64..2.0, dt in 0.0f64..1e5) {
            let next = update_interoception(&InteroState { energy: e, ..Default::default() }, &[feed], dt);
            prop_assert!((0.0..=1.0).contains(&next.energy));
        }
    }
}
