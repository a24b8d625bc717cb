//! Non-interactive selection by noised log-likelihood scoring.
//!
//! The population is split round-robin into one group per hypothesis. After
//! flattening, each user in group `i` reports `log(gamma(X) / q_i(X))` plus
//! Laplace noise, where `gamma` is uniform on the flattened domain; the
//! group means estimate a KL-like score, shifted by the same constant for
//! every group, and the smallest mean wins. Everything a user sends depends
//! on one sample and one noise draw, so the whole protocol is one round.

use crate::dist::{Dist, DistError, HypothesisSet};
use crate::flatten::{build_flatten_map, FlattenError};
use crate::mech::{laplace_noise, laplace_scale, MechanismTag, PrivacyLedger, PrivacyParams};
use crate::transcript::{RoundRecord, Transcript};
use rand::Rng;

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("need at least one user per hypothesis: n = {n}, k = {k}")]
    NotEnoughUsers { n: usize, k: usize },
    #[error("log ratio unbounded at symbol {symbol} (reference {gamma:.6}, hypothesis {mass:.6})")]
    UnboundedRatio { symbol: usize, gamma: f64, mass: f64 },
    #[error("sample {0} has zero probability under the group hypothesis or the reference")]
    ZeroProbabilitySample(usize),
    #[error("sample value {0} outside the domain of size {1}")]
    SampleOutOfRange(usize, usize),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Flatten(#[from] FlattenError),
    #[error(transparent)]
    Mech(#[from] crate::mech::MechError),
}

/// The validated parameters a run executes with. Construction checks that
/// the log ratio of `gamma` against every hypothesis stays within the
/// sensitivity bound, so messages built from this config are always in
/// range.
#[derive(Debug, Clone)]
pub struct NiConfig {
    pub privacy: PrivacyParams,
    pub n: usize,
    /// Users per group; round-robin assignment keeps sizes within one.
    pub group_sizes: Vec<usize>,
    /// Exact bound on |log(gamma / q_i)| over the flattened instance.
    pub sensitivity_bound: f64,
    /// Reference distribution on the flattened alphabet.
    pub gamma: Dist,
}

impl NiConfig {
    pub fn new(
        privacy: PrivacyParams,
        n: usize,
        q_flat: &HypothesisSet,
        gamma: Dist,
    ) -> Result<Self, ProtocolError> {
        let k = q_flat.len();
        if n < k {
            return Err(ProtocolError::NotEnoughUsers { n, k });
        }
        let sensitivity_bound = compute_log_ratio_bound(q_flat, &gamma)?;
        Ok(NiConfig {
            privacy,
            n,
            group_sizes: balanced_groups(n, k),
            sensitivity_bound,
            gamma,
        })
    }
}

#[derive(Debug, Clone)]
pub struct NiResult {
    pub chosen: usize,
    /// Group means, one per hypothesis.
    pub scores: Vec<f64>,
    pub config: NiConfig,
    /// Size of the flattened domain the users actually reported on.
    pub flattened_domain: usize,
    pub transcript: Transcript,
    pub ledger: PrivacyLedger,
}

/// Exact `max_i max_a |log(gamma(a) / q_i(a))|`, the statistic's range.
/// Unbounded ratios (mass mismatches between `gamma` and a hypothesis) are
/// rejected.
pub fn compute_log_ratio_bound(q: &HypothesisSet, gamma: &Dist) -> Result<f64, ProtocolError> {
    if gamma.alphabet_size() != q.alphabet_size() {
        return Err(DistError::AlphabetMismatch(gamma.alphabet_size(), q.alphabet_size()).into());
    }
    let mut bound = 0.0f64;
    for a in 0..gamma.alphabet_size() {
        let g = gamma.mass(a);
        for qi in q.iter() {
            let m = qi.mass(a);
            match (g > 0.0, m > 0.0) {
                (true, true) => bound = bound.max((g / m).ln().abs()),
                (false, false) => {}
                _ => {
                    return Err(ProtocolError::UnboundedRatio {
                        symbol: a,
                        gamma: g,
                        mass: m,
                    })
                }
            }
        }
    }
    Ok(bound)
}

/// One user's report: the clipped-by-construction log ratio at the sample,
/// plus Laplace noise scaled for `sensitivity_bound`.
pub fn user_message<R: Rng + ?Sized>(
    a: usize,
    q_i: &Dist,
    gamma: &Dist,
    sensitivity_bound: f64,
    privacy: &PrivacyParams,
    rng: &mut R,
) -> Result<f64, ProtocolError> {
    if a >= gamma.alphabet_size() {
        return Err(ProtocolError::SampleOutOfRange(a, gamma.alphabet_size()));
    }
    let g = gamma.mass(a);
    let m = q_i.mass(a);
    if g <= 0.0 || m <= 0.0 {
        return Err(ProtocolError::ZeroProbabilitySample(a));
    }
    let w = (g / m).ln();
    debug_assert!(w.abs() <= sensitivity_bound + 1e-9);
    let noise = laplace_noise(sensitivity_bound, privacy.epsilon, privacy.noise_mode, rng)?;
    Ok(w + noise)
}

/// Group sizes under round-robin assignment of `n` users to `k` groups.
pub fn balanced_groups(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| n / k + usize::from(i < n % k)).collect()
}

/// Expected group scores without noise, computed exactly: the mean report of
/// a group scoring `q_i` under data distribution `p` (all on the flattened
/// domain).
pub fn expected_scores(
    q_flat: &HypothesisSet,
    p_flat: &Dist,
    gamma: &Dist,
) -> Result<Vec<f64>, ProtocolError> {
    if p_flat.alphabet_size() != q_flat.alphabet_size() {
        return Err(
            DistError::AlphabetMismatch(p_flat.alphabet_size(), q_flat.alphabet_size()).into(),
        );
    }
    let mut scores = Vec::with_capacity(q_flat.len());
    for qi in q_flat.iter() {
        let mut total = 0.0;
        for b in 0..p_flat.alphabet_size() {
            let mass = p_flat.mass(b);
            if mass == 0.0 {
                continue;
            }
            let g = gamma.mass(b);
            let m = qi.mass(b);
            if g <= 0.0 || m <= 0.0 {
                return Err(ProtocolError::UnboundedRatio {
                    symbol: b,
                    gamma: g,
                    mass: m,
                });
            }
            total += mass * (g / m).ln();
        }
        scores.push(total);
    }
    Ok(scores)
}

/// Index of the smallest score; ties go to the lowest index.
pub fn argmin(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s < scores[best] {
            best = i;
        }
    }
    best
}

/// Runs the full one-round protocol: flatten, group, collect noised log
/// ratios, pick the smallest group mean.
pub fn run_noninteractive<R: Rng + ?Sized>(
    q: &HypothesisSet,
    samples: &[usize],
    privacy: &PrivacyParams,
    rng: &mut R,
) -> Result<NiResult, ProtocolError> {
    let k = q.len();
    let n = samples.len();
    if n < k {
        return Err(ProtocolError::NotEnoughUsers { n, k });
    }
    let source_domain = q.alphabet_size();
    let map = build_flatten_map(q);
    let q_flat = map.push_forward_set(q)?;
    let np = map.target_size();
    let config = NiConfig::new(*privacy, n, &q_flat, Dist::uniform(np))?;
    let bound = config.sensitivity_bound;
    // Flattened masses live in [1/(2N'), 1/N], so the bound cannot exceed
    // max(log 2, log(N'/N)) <= log(k + 1).
    debug_assert!(bound <= ((k + 1) as f64).ln().max(2f64.ln()) + 1e-9);
    debug_assert!(laplace_scale(bound, privacy.epsilon, privacy.noise_mode).is_finite());

    // Per-group log-ratio tables; one lookup per user.
    let tables: Vec<Vec<f64>> = q_flat
        .iter()
        .map(|qi| {
            (0..np)
                .map(|b| (config.gamma.mass(b) / qi.mass(b)).ln())
                .collect()
        })
        .collect();

    let mut sums = vec![0.0f64; k];
    let mut ledger = PrivacyLedger::new(n);
    for (j, &a) in samples.iter().enumerate() {
        if a >= source_domain {
            return Err(ProtocolError::SampleOutOfRange(a, source_domain));
        }
        let b = map.apply(a, rng)?;
        let i = j % k;
        let noise = laplace_noise(bound, privacy.epsilon, privacy.noise_mode, rng)?;
        sums[i] += tables[i][b] + noise;
        ledger
            .record(j, 0, MechanismTag::NoisedLogLikelihood, privacy.epsilon)
            .expect("ledger sized to n");
    }

    let scores: Vec<f64> = sums
        .iter()
        .zip(&config.group_sizes)
        .map(|(s, c)| s / *c as f64)
        .collect();
    let chosen = argmin(&scores);
    Ok(NiResult {
        chosen,
        scores,
        config,
        flattened_domain: np,
        transcript: Transcript {
            rounds: vec![RoundRecord {
                comparisons: 0,
                user_start: 0,
                user_end: n,
                messages: n,
            }],
        },
        ledger,
    })
}
