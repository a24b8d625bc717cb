//! Finite discrete distributions and the instance machinery built on them.
//!
//! A [`Dist`] is a probability vector over the alphabet `{0, .., N-1}`. The
//! constructor normalizes and validates, so every value of the type satisfies
//! the simplex invariant; distances, sampling, and the instance generators
//! all build on that guarantee.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Weights must sum to 1 within this slack after normalization.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum DistError {
    #[error("weight at index {0} is negative or not finite")]
    BadWeight(usize),
    #[error("weights sum to zero; cannot normalize")]
    ZeroSum,
    #[error("empty weight vector")]
    Empty,
    #[error("alphabet size mismatch: {0} vs {1}")]
    AlphabetMismatch(usize, usize),
    #[error("hypothesis set is empty")]
    EmptyHypothesisSet,
    #[error("dimension {0} too large; limit is {1}")]
    DimensionTooLarge(usize, usize),
    #[error("alpha {0} outside the valid range {1}")]
    AlphaOutOfRange(f64, &'static str),
    #[error("rejection sampling exhausted {0} attempts without finding {1} separated distributions")]
    Infeasible(usize, usize),
    #[error("cannot move {wanted:.6} mass; only {available:.6} available on the donor side")]
    NotEnoughMass { wanted: f64, available: f64 },
    #[error("index {0} out of range for {1} hypotheses")]
    IndexOutOfRange(usize, usize),
    #[error("instance file: {0}")]
    BadInstanceFile(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A probability distribution over `{0, .., alphabet_size()-1}`.
///
/// Carries its cumulative table so sampling is a binary search.
#[derive(Debug, Clone)]
pub struct Dist {
    weights: Vec<f64>,
    cdf: Vec<f64>,
}

impl Dist {
    /// Normalizes `weights` onto the simplex. Zero entries are kept as exact
    /// zeros so support queries stay meaningful.
    pub fn new(weights: &[f64]) -> Result<Self, DistError> {
        if weights.is_empty() {
            return Err(DistError::Empty);
        }
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(DistError::BadWeight(i));
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(DistError::ZeroSum);
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() < SIMPLEX_TOL);
        Ok(Self::from_normalized(weights))
    }

    fn from_normalized(weights: Vec<f64>) -> Self {
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cdf.push(acc);
        }
        // Clamp the tail so a unit draw can never fall past the last symbol.
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Dist { weights, cdf }
    }

    pub fn uniform(n: usize) -> Self {
        Self::from_normalized(vec![1.0 / n as f64; n.max(1)])
    }

    pub fn alphabet_size(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self, a: usize) -> f64 {
        self.weights[a]
    }

    /// Total mass on the symbols where `mask` is set.
    pub fn mass_on(&self, mask: &[bool]) -> f64 {
        self.weights
            .iter()
            .zip(mask)
            .filter(|(_, m)| **m)
            .map(|(w, _)| w)
            .sum()
    }

    /// One draw via inverse transform on the cumulative table.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        self.cdf.partition_point(|c| *c <= u).min(self.weights.len() - 1)
    }
}

/// The candidate set `Q = {q_1, .., q_k}`, all on one alphabet.
#[derive(Debug, Clone)]
pub struct HypothesisSet {
    hypotheses: Vec<Dist>,
}

impl HypothesisSet {
    pub fn new(hypotheses: Vec<Dist>) -> Result<Self, DistError> {
        let first = hypotheses.first().ok_or(DistError::EmptyHypothesisSet)?;
        let n = first.alphabet_size();
        for h in &hypotheses {
            if h.alphabet_size() != n {
                return Err(DistError::AlphabetMismatch(n, h.alphabet_size()));
            }
        }
        Ok(HypothesisSet { hypotheses })
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn alphabet_size(&self) -> usize {
        self.hypotheses[0].alphabet_size()
    }

    pub fn get(&self, i: usize) -> &Dist {
        &self.hypotheses[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Dist> {
        self.hypotheses.iter()
    }
}

/// What is known about a generated or loaded instance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InstanceMeta {
    /// Index of the data distribution inside the set, when it is a member.
    pub true_index: Option<usize>,
    /// Guaranteed lower bound on pairwise total variation, when known.
    pub separation: Option<f64>,
    /// Distance from the data distribution to the set, when known.
    pub beta: Option<f64>,
}

/// Total variation distance, `max_S |p(S) - q(S)| = ||p - q||_1 / 2`.
pub fn tv_distance(p: &Dist, q: &Dist) -> Result<f64, DistError> {
    if p.alphabet_size() != q.alphabet_size() {
        return Err(DistError::AlphabetMismatch(p.alphabet_size(), q.alphabet_size()));
    }
    let l1: f64 = p
        .weights
        .iter()
        .zip(&q.weights)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(0.5 * l1)
}

/// KL divergence in nats. `0 log 0 = 0`; mass of `q` where `r` vanishes
/// makes the divergence infinite.
pub fn kl_divergence(q: &Dist, r: &Dist) -> Result<f64, DistError> {
    if q.alphabet_size() != r.alphabet_size() {
        return Err(DistError::AlphabetMismatch(q.alphabet_size(), r.alphabet_size()));
    }
    let mut total = 0.0;
    for (a, b) in q.weights.iter().zip(&r.weights) {
        if *a == 0.0 {
            continue;
        }
        if *b == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += a * (a / b).ln();
    }
    Ok(total)
}

/// Distance from `p` to the nearest member of `set`, with the index of that
/// member. Ties resolve to the lowest index.
pub fn min_tv_to_set(p: &Dist, set: &HypothesisSet) -> Result<(f64, usize), DistError> {
    if set.is_empty() {
        return Err(DistError::EmptyHypothesisSet);
    }
    let mut best = f64::INFINITY;
    let mut best_idx = 0;
    for (i, q) in set.iter().enumerate() {
        let d = tv_distance(p, q)?;
        if d < best {
            best = d;
            best_idx = i;
        }
    }
    Ok((best, best_idx))
}

/// Largest hypercube dimension the hard-instance generator accepts.
pub const MAX_HARD_DIMENSION: usize = 16;

/// The biased-coordinate family over `{-1,+1}^d`, encoded as an alphabet of
/// size `2^d`. Symbol `m` sets coordinate `j` to `+1` iff bit `j` of `m` is
/// set (little-endian). For each coordinate `j` and sign `b` the member is
/// the mixture `(1-alpha) * uniform + alpha * (uniform | x_j = b)`, so the
/// marginal of coordinate `j` is `1/2 + alpha/2` and opposite-sign pairs sit
/// at total variation exactly `alpha`.
pub fn gen_hard_instance(d: usize, alpha: f64) -> Result<(HypothesisSet, InstanceMeta), DistError> {
    if d == 0 || d > MAX_HARD_DIMENSION {
        return Err(DistError::DimensionTooLarge(d, MAX_HARD_DIMENSION));
    }
    if !(0.0..0.5).contains(&alpha) {
        return Err(DistError::AlphaOutOfRange(alpha, "[0, 1/2)"));
    }
    let size = 1usize << d;
    let base = (1.0 - alpha) / size as f64;
    let boost = alpha / (size / 2) as f64;
    let mut members = Vec::with_capacity(2 * d);
    for j in 0..d {
        for b in [true, false] {
            // b = true encodes the +1 side.
            let mut w = vec![base; size];
            for (m, slot) in w.iter_mut().enumerate() {
                if ((m >> j) & 1 == 1) == b {
                    *slot += boost;
                }
            }
            members.push(Dist::new(&w)?);
        }
    }
    let set = HypothesisSet::new(members)?;
    // Distinct members differing in coordinate sit at alpha/2; opposite signs
    // of one coordinate sit at alpha.
    let separation = if d > 1 { alpha / 2.0 } else { alpha };
    Ok((
        set,
        InstanceMeta {
            true_index: None,
            separation: Some(separation),
            beta: None,
        },
    ))
}

/// Attempt budget for [`gen_random_separated`].
pub const SEPARATION_ATTEMPTS: usize = 100_000;

fn random_simplex_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Dist {
    // Normalized unit exponentials are uniform on the simplex.
    let w: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
    Dist::new(&w).expect("exponential draws are positive")
}

/// Rejection-samples `k` distributions on `n` symbols with pairwise total
/// variation at least `alpha`. Fails with an infeasibility signal once the
/// attempt budget is spent.
pub fn gen_random_separated<R: Rng + ?Sized>(
    k: usize,
    n: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<(HypothesisSet, InstanceMeta), DistError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(DistError::AlphaOutOfRange(alpha, "[0, 1]"));
    }
    let mut accepted: Vec<Dist> = Vec::with_capacity(k);
    let mut attempts = 0;
    while accepted.len() < k {
        if attempts >= SEPARATION_ATTEMPTS {
            return Err(DistError::Infeasible(SEPARATION_ATTEMPTS, k));
        }
        attempts += 1;
        let cand = random_simplex_point(n, rng);
        let ok = accepted
            .iter()
            .all(|q| tv_distance(q, &cand).expect("same alphabet") >= alpha);
        if ok {
            accepted.push(cand);
        }
    }
    let set = HypothesisSet::new(accepted)?;
    Ok((
        set,
        InstanceMeta {
            true_index: None,
            separation: Some(alpha),
            beta: None,
        },
    ))
}

/// Returns a copy of `p` at total variation exactly `delta`, built by moving
/// `delta` mass from one random half of the alphabet onto the other.
pub fn shift_mass<R: Rng + ?Sized>(p: &Dist, delta: f64, rng: &mut R) -> Result<Dist, DistError> {
    if !(0.0..1.0).contains(&delta) {
        return Err(DistError::AlphaOutOfRange(delta, "[0, 1)"));
    }
    let n = p.alphabet_size();
    if n < 2 {
        return Err(DistError::Empty);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        idx.swap(i, rng.gen_range(0..=i));
    }
    let (donors, receivers) = idx.split_at(n / 2);
    let donor_mass: f64 = donors.iter().map(|&a| p.mass(a)).sum();
    if donor_mass <= delta {
        return Err(DistError::NotEnoughMass {
            wanted: delta,
            available: donor_mass,
        });
    }
    let mut w = p.weights().to_vec();
    for &a in donors {
        w[a] -= p.mass(a) * delta / donor_mass;
    }
    // Spread the removed mass evenly; receivers only ever gain, so the moved
    // mass equals the total variation exactly.
    let gain = delta / receivers.len() as f64;
    for &a in receivers {
        w[a] += gain;
    }
    Dist::new(&w)
}

/// On-disk instance format: weights are arbitrary nonnegative decimals and
/// are normalized on load.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InstanceFile {
    pub domain_size: usize,
    pub hypotheses: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl InstanceFile {
    pub fn from_parts(set: &HypothesisSet, meta: &InstanceMeta) -> Self {
        InstanceFile {
            domain_size: set.alphabet_size(),
            hypotheses: set.iter().map(|d| d.weights().to_vec()).collect(),
            true_index: meta.true_index,
            alpha: meta.separation,
        }
    }

    pub fn into_parts(self) -> Result<(HypothesisSet, InstanceMeta), DistError> {
        if self.hypotheses.is_empty() {
            return Err(DistError::EmptyHypothesisSet);
        }
        let mut members = Vec::with_capacity(self.hypotheses.len());
        for row in &self.hypotheses {
            if row.len() != self.domain_size {
                return Err(DistError::BadInstanceFile(format!(
                    "hypothesis has {} weights, domain_size is {}",
                    row.len(),
                    self.domain_size
                )));
            }
            members.push(Dist::new(row)?);
        }
        if let Some(t) = self.true_index {
            if t >= members.len() {
                return Err(DistError::IndexOutOfRange(t, members.len()));
            }
        }
        let set = HypothesisSet::new(members)?;
        Ok((
            set,
            InstanceMeta {
                true_index: self.true_index,
                separation: self.alpha,
                beta: None,
            },
        ))
    }
}

pub fn load_instance(path: &Path) -> Result<(HypothesisSet, InstanceMeta), DistError> {
    let text = std::fs::read_to_string(path)?;
    let file: InstanceFile =
        serde_json::from_str(&text).map_err(|e| DistError::BadInstanceFile(e.to_string()))?;
    file.into_parts()
}

pub fn save_instance(path: &Path, set: &HypothesisSet, meta: &InstanceMeta) -> Result<(), DistError> {
    let file = InstanceFile::from_parts(set, meta);
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| DistError::BadInstanceFile(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}
