//! Scheffe tests: pick between two candidate distributions from samples.
//!
//! The witness set `S = {a : q1(a) > q2(a)}` satisfies
//! `q1(S) - q2(S) = d_tv(q1, q2)`, so comparing an estimate of `p(S)`
//! against the two known masses decides which candidate sits closer in the
//! projection onto S. The private variant estimates `p(S)` through
//! randomized response on the indicator.

use crate::dist::{Dist, DistError};
use crate::mech::{randomized_response, rr_debias, MechanismTag, PrivacyLedger, PrivacyParams};
use rand::Rng;

#[derive(Debug, thiserror::Error)]
pub enum ScheffeError {
    #[error("sample value {0} outside the domain of size {1}")]
    SampleOutOfRange(usize, usize),
    #[error("no samples supplied")]
    NoSamples,
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Mech(#[from] crate::mech::MechError),
}

/// The witness set of an ordered pair of candidates, with both masses.
#[derive(Debug, Clone)]
pub struct ScheffeWitness {
    pub in_set: Vec<bool>,
    /// q1(S); always the larger of the two masses.
    pub mass_first: f64,
    /// q2(S).
    pub mass_second: f64,
}

impl ScheffeWitness {
    pub fn new(q1: &Dist, q2: &Dist) -> Result<Self, ScheffeError> {
        if q1.alphabet_size() != q2.alphabet_size() {
            return Err(DistError::AlphabetMismatch(q1.alphabet_size(), q2.alphabet_size()).into());
        }
        let in_set: Vec<bool> = (0..q1.alphabet_size())
            .map(|a| q1.mass(a) > q2.mass(a))
            .collect();
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (a, &inside) in in_set.iter().enumerate() {
            if inside {
                m1 += q1.mass(a);
                m2 += q2.mass(a);
            }
        }
        Ok(ScheffeWitness {
            in_set,
            mass_first: m1,
            mass_second: m2,
        })
    }

    pub fn contains(&self, a: usize) -> bool {
        self.in_set.get(a).copied().unwrap_or(false)
    }

    /// Which candidate an estimate of p(S) favors: 0 for the first, 1 for
    /// the second. Exact ties go to the second, matching the convention
    /// that the first candidate must strictly win to displace the second.
    pub fn decide(&self, p_hat: f64) -> usize {
        if (p_hat - self.mass_first).abs() < (p_hat - self.mass_second).abs() {
            0
        } else {
            1
        }
    }

    /// Fraction of samples landing in S. Estimates p(S) without privacy.
    pub fn empirical_mass(&self, samples: &[usize]) -> Result<f64, ScheffeError> {
        if samples.is_empty() {
            return Err(ScheffeError::NoSamples);
        }
        let mut hits = 0usize;
        for &a in samples {
            if a >= self.in_set.len() {
                return Err(ScheffeError::SampleOutOfRange(a, self.in_set.len()));
            }
            hits += usize::from(self.in_set[a]);
        }
        Ok(hits as f64 / samples.len() as f64)
    }
}

/// Non-private Scheffe test: 0 if the first candidate wins, 1 otherwise.
pub fn scheffe_test(q1: &Dist, q2: &Dist, samples: &[usize]) -> Result<usize, ScheffeError> {
    let w = ScheffeWitness::new(q1, q2)?;
    let p_hat = w.empirical_mass(samples)?;
    Ok(w.decide(p_hat))
}

#[derive(Debug, Clone)]
pub struct LdpScheffe {
    pub chosen: usize,
    /// Debiased estimate of p(S); can leave [0, 1] by design.
    pub estimate: f64,
    pub witness: ScheffeWitness,
}

/// Private Scheffe test. Each sample contributes one randomized-response
/// bit for membership in S; the debiased mean estimates p(S). When a
/// ledger is supplied every user is charged once in the given round.
pub fn ldp_scheffe<R: Rng + ?Sized>(
    q1: &Dist,
    q2: &Dist,
    samples: &[usize],
    privacy: &PrivacyParams,
    rng: &mut R,
    ledger: Option<(&mut PrivacyLedger, usize, usize)>,
) -> Result<LdpScheffe, ScheffeError> {
    let witness = ScheffeWitness::new(q1, q2)?;
    if samples.is_empty() {
        return Err(ScheffeError::NoSamples);
    }
    let mut hits = 0usize;
    for &a in samples {
        if a >= witness.in_set.len() {
            return Err(ScheffeError::SampleOutOfRange(a, witness.in_set.len()));
        }
        let bit = randomized_response(witness.in_set[a], privacy.epsilon, rng);
        hits += usize::from(bit);
    }
    if let Some((ledger, user_start, round)) = ledger {
        for offset in 0..samples.len() {
            ledger
                .record(
                    user_start + offset,
                    round,
                    MechanismTag::RandomizedResponse,
                    privacy.epsilon,
                )
                .expect("population ledger covers consumed users");
        }
    }
    let estimate = rr_debias(hits as f64 / samples.len() as f64, privacy.epsilon);
    let chosen = witness.decide(estimate);
    Ok(LdpScheffe {
        chosen,
        estimate,
        witness,
    })
}
