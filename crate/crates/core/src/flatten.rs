//! Domain flattening.
//!
//! Given a hypothesis set on `[N]`, the map expands symbol `a` into a
//! contiguous block of `ceil(max_i q_i(a) * N)` fresh symbols and then mixes
//! the block-uniform relabeling with the uniform distribution on the new
//! domain, half and half. Pushing any member through the map lands its mass
//! inside `[1/(2N'), 1/N]` on every new symbol, and pairwise total variation
//! inside the set is cut exactly in half. Symbols carrying no mass under any
//! member get an empty block; a source distribution with mass there routes
//! that mass entirely through the uniform branch, which perturbs distances
//! by at most that stray mass.

use crate::dist::{Dist, DistError, HypothesisSet};
use rand::Rng;

#[derive(Debug, thiserror::Error)]
pub enum FlattenError {
    #[error("symbol {0} out of range for source domain of size {1}")]
    SymbolOutOfRange(usize, usize),
    #[error("distribution is on {0} symbols but the map expects {1}")]
    SourceMismatch(usize, usize),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// The randomized map from `[N]` to `[N']`.
#[derive(Debug, Clone)]
pub struct FlattenMap {
    source_size: usize,
    target_size: usize,
    /// `(start, len)` per source symbol; blocks tile `[N']` in symbol order.
    blocks: Vec<(usize, usize)>,
}

impl FlattenMap {
    pub fn source_size(&self) -> usize {
        self.source_size
    }

    pub fn target_size(&self) -> usize {
        self.target_size
    }

    pub fn blocks(&self) -> &[(usize, usize)] {
        &self.blocks
    }

    /// One draw of the map at `a`: a fair coin picks between uniform on the
    /// block of `a` and uniform on the whole target; an empty block always
    /// takes the uniform branch.
    pub fn apply<R: Rng + ?Sized>(&self, a: usize, rng: &mut R) -> Result<usize, FlattenError> {
        let (start, len) = *self
            .blocks
            .get(a)
            .ok_or(FlattenError::SymbolOutOfRange(a, self.source_size))?;
        if len > 0 && rng.gen_bool(0.5) {
            Ok(start + rng.gen_range(0..len))
        } else {
            Ok(rng.gen_range(0..self.target_size))
        }
    }

    /// The exact law of `apply` under source distribution `d`.
    pub fn push_forward(&self, d: &Dist) -> Result<Dist, FlattenError> {
        if d.alphabet_size() != self.source_size {
            return Err(FlattenError::SourceMismatch(d.alphabet_size(), self.source_size));
        }
        // Mass on empty blocks goes entirely to the uniform branch.
        let stray: f64 = self
            .blocks
            .iter()
            .enumerate()
            .filter(|(_, (_, len))| *len == 0)
            .map(|(a, _)| d.mass(a))
            .sum();
        let uniform_term = (1.0 + stray) / (2.0 * self.target_size as f64);
        let mut w = vec![uniform_term; self.target_size];
        for (a, (start, len)) in self.blocks.iter().enumerate() {
            if *len == 0 {
                continue;
            }
            let per_symbol = d.mass(a) / (2.0 * *len as f64);
            for slot in &mut w[*start..*start + *len] {
                *slot += per_symbol;
            }
        }
        Ok(Dist::new(&w)?)
    }

    /// Pushes every member of a set through the map.
    pub fn push_forward_set(&self, set: &HypothesisSet) -> Result<HypothesisSet, FlattenError> {
        let members = set
            .iter()
            .map(|d| self.push_forward(d))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(HypothesisSet::new(members)?)
    }
}

/// Builds the map determined by the pointwise maximum of the set.
pub fn build_flatten_map(set: &HypothesisSet) -> FlattenMap {
    let n = set.alphabet_size();
    let mut blocks = Vec::with_capacity(n);
    let mut next = 0usize;
    for a in 0..n {
        let peak = set
            .iter()
            .map(|q| q.mass(a))
            .fold(0.0f64, f64::max);
        let len = (peak * n as f64).ceil() as usize;
        blocks.push((next, len));
        next += len;
    }
    FlattenMap {
        source_size: n,
        target_size: next,
        blocks,
    }
}
