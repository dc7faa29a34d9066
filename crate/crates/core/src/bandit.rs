//! Adversarial multi-armed bandit that schedules the training
//! curriculum. Each arm is a traffic density; the scheduler samples an
//! arm per episode from an exponential-weight distribution mixed with a
//! uniform exploration floor, normalizes the episode reward against the
//! running extrema, and accumulates importance-weighted reward into a
//! set of target weights that replace the live ones at a fixed cadence.
//! Freezing the live weights between synchronizations keeps the sampling
//! distribution stationary while the policy underneath it shifts.

use crate::config::{BanditConfig, InitScheme};
use rand::Rng;

/// Initial arm weights. The exponential scheme starts the schedule on
/// the easiest arm; the equal scheme starts uniform.
pub fn init_weights(n_arms: usize, scheme: InitScheme) -> Vec<f64> {
    match scheme {
        InitScheme::Exp => (0..n_arms).map(|i| (-2.0 * i as f64).exp()).collect(),
        InitScheme::Equal => vec![1.0; n_arms],
    }
}

/// Everything produced by one per-episode bandit update.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeUpdate {
    /// Reward normalized into the running extrema range.
    pub r_norm: f64,
    /// Importance-weighted reward credited to the arm.
    pub r_hat: f64,
    /// Whether this episode triggered a live-weight synchronization.
    pub synced: bool,
}

#[derive(Debug, Clone)]
pub struct BanditState {
    cfg: BanditConfig,
    /// Weights the sampling distribution is built from; frozen between
    /// synchronizations.
    live: Vec<f64>,
    /// Weights accumulating updates, copied onto `live` when due.
    target: Vec<f64>,
    episodes: u64,
    r_min: f64,
    r_max: f64,
}

impl BanditState {
    pub fn new(n_arms: usize, cfg: &BanditConfig) -> BanditState {
        let live = init_weights(n_arms, cfg.init);
        BanditState {
            cfg: cfg.clone(),
            target: live.clone(),
            live,
            episodes: 0,
            r_min: f64::INFINITY,
            r_max: f64::NEG_INFINITY,
        }
    }

    /// Rebuild a scheduler mid-run, e.g. when resuming from a checkpoint.
    pub fn from_parts(
        cfg: &BanditConfig,
        live: Vec<f64>,
        target: Vec<f64>,
        episodes: u64,
        r_min: f64,
        r_max: f64,
    ) -> BanditState {
        assert_eq!(live.len(), target.len());
        BanditState {
            cfg: cfg.clone(),
            live,
            target,
            episodes,
            r_min,
            r_max,
        }
    }

    pub fn n_arms(&self) -> usize {
        self.live.len()
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn live_weights(&self) -> &[f64] {
        &self.live
    }

    pub fn target_weights(&self) -> &[f64] {
        &self.target
    }

    pub fn reward_extrema(&self) -> (f64, f64) {
        (self.r_min, self.r_max)
    }

    /// Sampling distribution over arms: exponential weights with a
    /// uniform exploration floor. The largest weight is factored out of
    /// the exponentials so the result stays finite for any weight scale.
    pub fn arm_probabilities(&self) -> Vec<f64> {
        let n = self.live.len() as f64;
        let m = self.live.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = self.live.iter().map(|w| (w - m).exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.iter()
            .map(|e| (1.0 - self.cfg.eta) * e / sum + self.cfg.eta / n)
            .collect()
    }

    /// Draw an arm by inverse CDF over the current probabilities.
    pub fn sample_arm<R: Rng>(&self, rng: &mut R) -> usize {
        let probs = self.arm_probabilities();
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (arm, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return arm;
            }
        }
        probs.len() - 1
    }

    /// Fold `reward` into the running extrema, then map it into
    /// `[-1, 1]` against them. Returns zero while the extrema are
    /// degenerate (first episode, or all rewards identical so far).
    pub fn record_and_rescale(&mut self, reward: f64) -> f64 {
        self.r_min = self.r_min.min(reward);
        self.r_max = self.r_max.max(reward);
        let denom = self.cfg.k1 * self.r_max - self.cfg.k0 * self.r_min;
        if !(denom > 0.0) || !denom.is_finite() {
            return 0.0;
        }
        2.0 * (reward - self.cfg.k0 * self.r_min) / denom - 1.0
    }

    /// Credit the arm with the importance-weighted normalized reward.
    /// Only the target weights move; the live ones stay frozen.
    pub fn update_target(&mut self, arm: usize, r_norm: f64) -> f64 {
        let p = self.arm_probabilities()[arm];
        let r_hat = r_norm / p;
        self.target[arm] += self.cfg.alpha * r_hat;
        r_hat
    }

    /// Count a finished episode; copy the target weights onto the live
    /// ones every `sync_interval` episodes.
    pub fn sync_if_due(&mut self) -> bool {
        self.episodes += 1;
        if self.episodes % self.cfg.sync_interval == 0 {
            self.live.copy_from_slice(&self.target);
            true
        } else {
            false
        }
    }

    /// The full per-episode update in canonical order: rescale the raw
    /// reward, credit the arm, then count the episode toward the sync.
    pub fn record_episode(&mut self, arm: usize, reward: f64) -> EpisodeUpdate {
        let r_norm = self.record_and_rescale(reward);
        let r_hat = self.update_target(arm, r_norm);
        let synced = self.sync_if_due();
        EpisodeUpdate {
            r_norm,
            r_hat,
            synced,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config() -> BanditConfig {
        BanditConfig::default()
    }

    #[test]
    fn exponential_init_probabilities_match_the_direct_formula() {
        let cfg = config();
        let bandit = BanditState::new(3, &cfg);
        let probs = bandit.arm_probabilities();
        // Direct evaluation without the max-subtraction trick.
        let w: Vec<f64> = (0..3).map(|i| (-2.0 * i as f64).exp()).collect();
        let sum: f64 = w.iter().map(|wi| wi.exp()).sum();
        for (i, &p) in probs.iter().enumerate() {
            let direct = (1.0 - cfg.eta) * w[i].exp() / sum + cfg.eta / 3.0;
            assert_relative_eq!(p, direct, epsilon = 1e-12);
        }
        assert!(probs[0] > probs[1] && probs[1] > probs[2]);
    }

    #[test]
    fn equal_init_is_exactly_uniform() {
        let mut cfg = config();
        cfg.init = InitScheme::Equal;
        let bandit = BanditState::new(4, &cfg);
        for p in bandit.arm_probabilities() {
            assert_relative_eq!(p, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn rescaling_tracks_the_running_extrema() {
        let mut bandit = BanditState::new(3, &config());
        assert_eq!(bandit.record_and_rescale(5.0), 0.0); // degenerate
        assert_relative_eq!(bandit.record_and_rescale(10.0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(bandit.record_and_rescale(0.0), -1.0, epsilon = 1e-12);
        assert_relative_eq!(bandit.record_and_rescale(5.0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(bandit.record_and_rescale(7.5), 0.5, epsilon = 1e-12);
        assert_eq!(bandit.reward_extrema(), (0.0, 10.0));
    }

    #[test]
    fn target_moves_and_live_stays_frozen_until_sync() {
        let mut cfg = config();
        cfg.sync_interval = 3;
        let mut bandit = BanditState::new(3, &cfg);
        let live_before = bandit.live_weights().to_vec();

        bandit.record_and_rescale(0.0);
        bandit.record_and_rescale(10.0);
        let r_norm = bandit.record_and_rescale(10.0);
        let p = bandit.arm_probabilities()[1];
        let r_hat = bandit.update_target(1, r_norm);
        assert_relative_eq!(r_hat, r_norm / p, epsilon = 1e-12);
        assert_relative_eq!(
            bandit.target_weights()[1],
            live_before[1] + cfg.alpha * r_hat,
            epsilon = 1e-12
        );
        assert_eq!(bandit.live_weights(), live_before.as_slice());

        assert!(!bandit.sync_if_due()); // episode 1
        assert!(!bandit.sync_if_due()); // episode 2
        assert_eq!(bandit.live_weights(), live_before.as_slice());
        assert!(bandit.sync_if_due()); // episode 3: copy
        assert_eq!(bandit.live_weights(), bandit.target_weights());
    }

    #[test]
    fn sampling_frequencies_match_probabilities() {
        let bandit = BanditState::new(3, &config());
        let probs = bandit.arm_probabilities();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut counts = [0usize; 3];
        let draws = 60_000;
        for _ in 0..draws {
            counts[bandit.sample_arm(&mut rng)] += 1;
        }
        for (arm, &c) in counts.iter().enumerate() {
            let freq = c as f64 / draws as f64;
            assert!(
                (freq - probs[arm]).abs() < 0.01,
                "arm {arm}: {freq} vs {}",
                probs[arm]
            );
        }
    }

    #[test]
    fn consistently_better_arm_takes_over_after_syncs() {
        let mut cfg = config();
        cfg.sync_interval = 50;
        let mut bandit = BanditState::new(3, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let arm = bandit.sample_arm(&mut rng);
            let reward = if arm == 2 { 10.0 } else { -10.0 };
            bandit.record_episode(arm, reward);
        }
        let probs = bandit.arm_probabilities();
        assert!(
            probs[2] > 0.6,
            "good arm should dominate, got {probs:?}"
        );
    }

    proptest! {
        #[test]
        fn probabilities_are_a_distribution_with_exploration_floor(
            weights in proptest::collection::vec(-50.0..50.0f64, 2..8),
        ) {
            let cfg = config();
            let n = weights.len();
            let bandit = BanditState::from_parts(
                &cfg,
                weights.clone(),
                weights,
                0,
                f64::INFINITY,
                f64::NEG_INFINITY,
            );
            let probs = bandit.arm_probabilities();
            let sum: f64 = probs.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            let floor = cfg.eta / n as f64;
            for &p in &probs {
                prop_assert!(p >= floor - 1e-12);
                prop_assert!(p <= 1.0 - cfg.eta + floor + 1e-12);
                prop_assert!(p.is_finite());
            }
        }

        #[test]
        fn normalized_rewards_stay_in_unit_range(
            rewards in proptest::collection::vec(-1e6..1e6f64, 1..200),
        ) {
            let mut bandit = BanditState::new(3, &config());
            for r in rewards {
                let r_norm = bandit.record_and_rescale(r);
                prop_assert!((-1.0..=1.0).contains(&r_norm));
            }
        }

        #[test]
        fn updates_never_poison_the_state(
            episodes in proptest::collection::vec((0usize..3, -1e4..1e4f64), 1..300),
        ) {
            let mut cfg = config();
            cfg.sync_interval = 7;
            let mut bandit = BanditState::new(3, &cfg);
            for (arm, reward) in episodes {
                let update = bandit.record_episode(arm, reward);
                prop_assert!(update.r_norm.is_finite());
                prop_assert!(update.r_hat.is_finite());
            }
            for p in bandit.arm_probabilities() {
                prop_assert!(p.is_finite());
            }
        }
    }
}
