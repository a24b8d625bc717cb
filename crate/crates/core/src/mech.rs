//! Local randomizers and the per-user privacy ledger.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum MechError {
    #[error("epsilon {0} outside (0, {1}]")]
    EpsilonOutOfRange(f64, f64),
    #[error("sensitivity must be nonnegative and finite, got {0}")]
    BadSensitivity(f64),
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("user {user} spent {spent:.9}, over the budget {budget:.9}")]
    OverBudget { user: usize, spent: f64, budget: f64 },
    #[error("user {user} participated in rounds {first} and {second}")]
    TwoRounds { user: usize, first: usize, second: usize },
    #[error("user {0} unknown to a ledger of {1} users")]
    UnknownUser(usize, usize),
}

/// Largest epsilon the simulator accepts.
pub const MAX_EPSILON: f64 = 10.0;

/// How a bounded statistic is noised.
///
/// A statistic promised to lie in `[-L, L]` moves by up to `2L` between
/// neighboring inputs. `Strict` scales the Laplace noise to that full range;
/// `Loose` treats `L` itself as the sensitivity, which runs quieter but only
/// guarantees `2 * epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    Strict,
    Loose,
}

/// Validated privacy parameters shared by the protocols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub noise_mode: NoiseMode,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, noise_mode: NoiseMode) -> Result<Self, MechError> {
        if !epsilon.is_finite() || epsilon <= 0.0 || epsilon > MAX_EPSILON {
            return Err(MechError::EpsilonOutOfRange(epsilon, MAX_EPSILON));
        }
        Ok(PrivacyParams { epsilon, noise_mode })
    }
}

/// Probability that randomized response keeps the true bit.
pub fn rr_keep_prob(epsilon: f64) -> f64 {
    let e = epsilon.exp();
    e / (1.0 + e)
}

/// One-bit randomized response: keep with probability `e^eps / (1 + e^eps)`.
pub fn randomized_response<R: Rng + ?Sized>(bit: bool, epsilon: f64, rng: &mut R) -> bool {
    if rng.gen_bool(rr_keep_prob(epsilon)) {
        bit
    } else {
        !bit
    }
}

/// Unbiases a mean of randomized-response bits back to an estimate of the
/// true frequency. Deliberately unclamped: values outside `[0, 1]` are
/// legitimate estimator outputs.
pub fn rr_debias(mean: f64, epsilon: f64) -> f64 {
    let e = epsilon.exp();
    (e + 1.0) / (e - 1.0) * (mean - 1.0 / (e + 1.0))
}

/// Noise scale for a statistic bounded by `sensitivity` in absolute value.
pub fn laplace_scale(sensitivity: f64, epsilon: f64, mode: NoiseMode) -> f64 {
    match mode {
        NoiseMode::Strict => 2.0 * sensitivity / epsilon,
        NoiseMode::Loose => sensitivity / epsilon,
    }
}

/// Symmetric Laplace density with the given scale.
pub fn laplace_density(scale: f64, x: f64) -> f64 {
    (-x.abs() / scale).exp() / (2.0 * scale)
}

/// One Laplace draw by inverse transform. Zero sensitivity yields zero noise.
pub fn laplace_noise<R: Rng + ?Sized>(
    sensitivity: f64,
    epsilon: f64,
    mode: NoiseMode,
    rng: &mut R,
) -> Result<f64, MechError> {
    if !sensitivity.is_finite() || sensitivity < 0.0 {
        return Err(MechError::BadSensitivity(sensitivity));
    }
    let scale = laplace_scale(sensitivity, epsilon, mode);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut u: f64 = rng.gen();
    while u == 0.0 {
        u = rng.gen();
    }
    let v = u - 0.5;
    Ok(-scale * v.signum() * (1.0 - 2.0 * v.abs()).ln())
}

/// Which local randomizer a ledger entry charges for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MechanismTag {
    RandomizedResponse,
    NoisedLogLikelihood,
}

/// Tracks, per user, the total privacy spend and the single round that user
/// participated in. Every protocol in this crate touches each user at most
/// once; the ledger is the independent check of that discipline.
#[derive(Debug, Clone)]
pub struct PrivacyLedger {
    spent: Vec<f64>,
    round_of: Vec<u32>,
    second_round: Vec<(usize, usize, usize)>,
    tags: Vec<Option<MechanismTag>>,
}

const NO_ROUND: u32 = u32::MAX;

impl PrivacyLedger {
    pub fn new(users: usize) -> Self {
        PrivacyLedger {
            spent: vec![0.0; users],
            round_of: vec![NO_ROUND; users],
            second_round: Vec::new(),
            tags: vec![None; users],
        }
    }

    pub fn users(&self) -> usize {
        self.spent.len()
    }

    /// Charges `epsilon` to `user` for participating in `round`.
    pub fn record(
        &mut self,
        user: usize,
        round: usize,
        tag: MechanismTag,
        epsilon: f64,
    ) -> Result<(), LedgerError> {
        if user >= self.spent.len() {
            return Err(LedgerError::UnknownUser(user, self.spent.len()));
        }
        self.spent[user] += epsilon;
        self.tags[user] = Some(tag);
        let prev = self.round_of[user];
        if prev == NO_ROUND {
            self.round_of[user] = round as u32;
        } else if prev as usize != round {
            // Remember the violation; assert_budget reports it.
            self.second_round.push((user, prev as usize, round));
        }
        Ok(())
    }

    pub fn spend(&self, user: usize) -> f64 {
        self.spent[user]
    }

    pub fn tag(&self, user: usize) -> Option<MechanismTag> {
        self.tags[user]
    }

    /// Number of users with any recorded spend.
    pub fn participants(&self) -> usize {
        self.round_of.iter().filter(|r| **r != NO_ROUND).count()
    }

    /// Fails if any user went over `budget` or showed up in two rounds.
    pub fn assert_budget(&self, budget: f64) -> Result<(), LedgerError> {
        if let Some((user, first, second)) = self.second_round.first() {
            return Err(LedgerError::TwoRounds {
                user: *user,
                first: *first,
                second: *second,
            });
        }
        for (user, spent) in self.spent.iter().enumerate() {
            if *spent > budget + 1e-12 {
                return Err(LedgerError::OverBudget {
                    user,
                    spent: *spent,
                    budget,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::child_rng;

    #[test]
    fn keep_probability_at_ln3_is_three_quarters() {
        assert!((rr_keep_prob(3f64.ln()) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rr_empirical_frequency_matches() {
        let mut rng = child_rng(21, "rr", 0);
        let eps = 1.0;
        let n = 200_000;
        let kept = (0..n)
            .filter(|_| randomized_response(true, eps, &mut rng))
            .count();
        let freq = kept as f64 / n as f64;
        assert!((freq - rr_keep_prob(eps)).abs() < 0.005);
    }

    #[test]
    fn rr_likelihood_ratio_is_exactly_exp_eps() {
        for eps in [0.25, 1.0, 2.0, 5.0] {
            let keep = rr_keep_prob(eps);
            // P(out = b | in = b) / P(out = b | in = !b) at both outputs.
            let ratio = keep / (1.0 - keep);
            assert!((ratio - eps.exp()).abs() <= 1e-12 * eps.exp());
        }
    }

    #[test]
    fn debias_inverts_the_channel() {
        let eps = 1.0;
        let keep = rr_keep_prob(eps);
        for truth in [0.0, 0.3, 1.0] {
            let expected_mean = truth * keep + (1.0 - truth) * (1.0 - keep);
            assert!((rr_debias(expected_mean, eps) - truth).abs() < 1e-12);
        }
        // No clamping: plugging in a mean of 0 at eps = 1 goes negative.
        assert!(rr_debias(0.0, 1.0) < 0.0);
    }

    #[test]
    fn laplace_scales_differ_by_mode() {
        assert_eq!(laplace_scale(3.0, 1.5, NoiseMode::Strict), 4.0);
        assert_eq!(laplace_scale(3.0, 1.5, NoiseMode::Loose), 2.0);
    }

    #[test]
    fn laplace_zero_sensitivity_is_silent() {
        let mut rng = child_rng(21, "lap0", 0);
        for _ in 0..32 {
            assert_eq!(
                laplace_noise(0.0, 1.0, NoiseMode::Strict, &mut rng).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn laplace_variance_matches_two_scale_squared() {
        let mut rng = child_rng(21, "lapvar", 0);
        let (sens, eps) = (1.0, 1.0);
        let scale = laplace_scale(sens, eps, NoiseMode::Strict);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let x = laplace_noise(sens, eps, NoiseMode::Strict, &mut rng).unwrap();
            sum += x;
            sumsq += x * x;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let want = 2.0 * scale * scale;
        assert!((var - want).abs() / want < 0.02, "var {var} want {want}");
        assert!(mean.abs() < 0.02);
    }

    #[test]
    fn strict_mode_density_ratio_is_at_most_exp_eps() {
        // Worst-case neighboring statistics at the two ends of [-L, L].
        let (l, eps) = (2.0, 1.0);
        let scale = laplace_scale(l, eps, NoiseMode::Strict);
        let mut rng = child_rng(21, "lapratio", 0);
        for _ in 0..100 {
            let z = laplace_noise(l, eps, NoiseMode::Strict, &mut rng).unwrap();
            let ratio = laplace_density(scale, z - l) / laplace_density(scale, z + l);
            assert!(ratio <= eps.exp() + 1e-9);
            assert!(ratio >= (-eps).exp() - 1e-9);
        }
    }

    #[test]
    fn privacy_params_validate() {
        assert!(PrivacyParams::new(1.0, NoiseMode::Strict).is_ok());
        assert!(PrivacyParams::new(0.0, NoiseMode::Strict).is_err());
        assert!(PrivacyParams::new(10.5, NoiseMode::Loose).is_err());
        assert!(PrivacyParams::new(f64::NAN, NoiseMode::Loose).is_err());
    }

    #[test]
    fn ledger_tracks_spend_and_rounds() {
        let mut ledger = PrivacyLedger::new(3);
        ledger.record(0, 0, MechanismTag::RandomizedResponse, 1.0).unwrap();
        ledger.record(1, 1, MechanismTag::RandomizedResponse, 1.0).unwrap();
        assert!(ledger.assert_budget(1.0).is_ok());
        assert_eq!(ledger.participants(), 2);
        assert_eq!(ledger.spend(2), 0.0);

        // Overspending a single user trips the budget check.
        ledger.record(0, 0, MechanismTag::RandomizedResponse, 1.0).unwrap();
        assert!(matches!(
            ledger.assert_budget(1.0),
            Err(LedgerError::OverBudget { user: 0, .. })
        ));
    }

    #[test]
    fn ledger_rejects_two_round_participation() {
        let mut ledger = PrivacyLedger::new(2);
        ledger.record(0, 0, MechanismTag::RandomizedResponse, 0.4).unwrap();
        ledger.record(0, 1, MechanismTag::RandomizedResponse, 0.4).unwrap();
        assert!(matches!(
            ledger.assert_budget(1.0),
            Err(LedgerError::TwoRounds { user: 0, first: 0, second: 1 })
        ));
    }

    #[test]
    fn ledger_unknown_user() {
        let mut ledger = PrivacyLedger::new(1);
        assert!(matches!(
            ledger.record(5, 0, MechanismTag::RandomizedResponse, 0.1),
            Err(LedgerError::UnknownUser(5, 1))
        ));
    }
}
