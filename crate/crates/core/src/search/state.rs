//! Packed fact sets used as search states.

use crate::ground::{FactId, GroundAction, GroundTask};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitState(Box<[u64]>);

impl BitState {
    pub fn empty(num_facts: usize) -> Self {
        BitState(vec![0; num_facts.div_ceil(64)].into_boxed_slice())
    }

    pub fn from_facts(num_facts: usize, facts: impl IntoIterator<Item = FactId>) -> Self {
        let mut s = Self::empty(num_facts);
        for f in facts {
            s.insert(f);
        }
        s
    }

    #[inline]
    pub fn contains(&self, f: FactId) -> bool {
        self.0[(f / 64) as usize] >> (f % 64) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, f: FactId) {
        self.0[(f / 64) as usize] |= 1 << (f % 64);
    }

    #[inline]
    pub fn remove(&mut self, f: FactId) {
        self.0[(f / 64) as usize] &= !(1 << (f % 64));
    }

    /// Ids of the true facts in increasing order.
    pub fn facts(&self) -> impl Iterator<Item = FactId> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros();
                bits &= bits - 1;
                Some(w as u32 * 64 + b)
            })
        })
    }

    #[inline]
    pub fn applicable(&self, a: &GroundAction) -> bool {
        a.pre.iter().all(|&f| self.contains(f)) && !a.pre_neg.iter().any(|&f| self.contains(f))
    }

    /// `(s \ del) ∪ add`
    pub fn successor(&self, a: &GroundAction) -> BitState {
        let mut next = self.clone();
        for &f in &a.del {
            next.remove(f);
        }
        for &f in &a.add {
            next.insert(f);
        }
        next
    }

    pub fn is_goal(&self, task: &GroundTask) -> bool {
        task.goal_pos.iter().all(|&f| self.contains(f)) && !task.goal_neg.iter().any(|&f| self.contains(f))
    }
}
