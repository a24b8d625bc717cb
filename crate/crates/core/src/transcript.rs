//! Per-run protocol bookkeeping shared by the selection protocols.

/// One interaction round: how many comparisons were issued and which block
/// of users answered. Users are consumed in id order, so a half-open range
/// identifies them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundRecord {
    pub comparisons: usize,
    pub user_start: usize,
    pub user_end: usize,
    /// One message per consumed user in every protocol here.
    pub messages: usize,
}

impl RoundRecord {
    pub fn users(&self) -> usize {
        self.user_end - self.user_start
    }
}

#[derive(Debug, Clone, Default)]
pub struct Transcript {
    pub rounds: Vec<RoundRecord>,
}

impl Transcript {
    pub fn rounds_used(&self) -> usize {
        self.rounds.len()
    }

    pub fn total_users(&self) -> usize {
        self.rounds.iter().map(RoundRecord::users).sum()
    }

    pub fn total_comparisons(&self) -> usize {
        self.rounds.iter().map(|r| r.comparisons).sum()
    }

    pub fn total_messages(&self) -> usize {
        self.rounds.iter().map(|r| r.messages).sum()
    }

    /// User ranges must never overlap across rounds.
    pub fn users_disjoint(&self) -> bool {
        let mut high = 0usize;
        for r in &self.rounds {
            if r.user_start < high || r.user_end < r.user_start {
                return false;
            }
            high = r.user_end;
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_and_disjointness() {
        let t = Transcript {
            rounds: vec![
                RoundRecord { comparisons: 3, user_start: 0, user_end: 30, messages: 30 },
                RoundRecord { comparisons: 1, user_start: 30, user_end: 40, messages: 10 },
            ],
        };
        assert_eq!(t.rounds_used(), 2);
        assert_eq!(t.total_users(), 40);
        assert_eq!(t.total_comparisons(), 4);
        assert!(t.users_disjoint());

        let bad = Transcript {
            rounds: vec![
                RoundRecord { comparisons: 1, user_start: 0, user_end: 10, messages: 10 },
                RoundRecord { comparisons: 1, user_start: 5, user_end: 15, messages: 10 },
            ],
        };
        assert!(!bad.users_disjoint());
    }
}
