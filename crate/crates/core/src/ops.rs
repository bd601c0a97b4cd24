//! Complex multiply-add tallies per pipeline phase.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub views: u64,
    pub peeling: u64,
    pub gating: u64,
    pub verification: u64,
    pub fallback: u64,
    pub total: u64,
    /// Time-domain samples read from the source.
    pub samples_read: u64,
}

impl OpCounts {
    /// View construction plus peeling.
    pub fn identification(&self) -> u64 {
        self.views + self.peeling
    }

    pub fn phase_sum(&self) -> u64 {
        self.views + self.peeling + self.gating + self.verification + self.fallback
    }

    pub fn finalized(mut self) -> Self {
        self.total = self.phase_sum();
        self
    }
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, o: Self) {
        self.views += o.views;
        self.peeling += o.peeling;
        self.gating += o.gating;
        self.verification += o.verification;
        self.fallback += o.fallback;
        self.total += o.total;
        self.samples_read += o.samples_read;
    }
}
