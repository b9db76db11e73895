use serde::{Deserialize, Serialize};

use crate::algorithms::{Method, RoundMessages};

/// Closed-form per-round payload counts (d-dimensional vectors) for each
/// method: GPDMM-style methods exchange one combined vector each way, AGPDMM
/// downlinks the primal and dual separately, SCAFFOLD ships two vectors in
/// both directions.
pub fn account_traffic(method: Method, m: usize, _d: usize, _k: usize) -> (usize, usize) {
    match method {
        Method::Fedave
        | Method::PdmmExact
        | Method::Fedsplit
        | Method::FedsplitInexact
        | Method::Gpdmm => (m, m),
        Method::Agpdmm | Method::AgpdmmVariant => (2 * m, m),
        Method::Scaffold => (2 * m, 2 * m),
    }
}

/// Cumulative message counts and byte counts (8 bytes per entry).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficLedger {
    pub down_vectors: u64,
    pub up_vectors: u64,
    pub down_bytes: u64,
    pub up_bytes: u64,
}

impl TrafficLedger {
    pub fn record(&mut self, messages: RoundMessages, dim: usize) {
        let vector_bytes = 8 * dim as u64;
        self.down_vectors += messages.down_vectors as u64;
        self.up_vectors += messages.up_vectors as u64;
        self.down_bytes += messages.down_vectors as u64 * vector_bytes;
        self.up_bytes += messages.up_vectors as u64 * vector_bytes;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_counts_per_method() {
        assert_eq!(account_traffic(Method::Gpdmm, 25, 20, 5), (25, 25));
        assert_eq!(account_traffic(Method::Agpdmm, 25, 20, 5), (50, 25));
        assert_eq!(account_traffic(Method::Scaffold, 25, 20, 5), (50, 50));
        assert_eq!(account_traffic(Method::Fedave, 10, 4, 1), (10, 10));
        assert_eq!(account_traffic(Method::PdmmExact, 7, 3, 1), (7, 7));
    }

    #[test]
    fn ledger_accumulates_bytes() {
        let mut ledger = TrafficLedger::default();
        ledger.record(
            RoundMessages {
                down_vectors: 3,
                up_vectors: 2,
            },
            10,
        );
        ledger.record(
            RoundMessages {
                down_vectors: 1,
                up_vectors: 1,
            },
            10,
        );
        assert_eq!(ledger.down_vectors, 4);
        assert_eq!(ledger.up_vectors, 3);
        assert_eq!(ledger.down_bytes, 4 * 80);
        assert_eq!(ledger.up_bytes, 3 * 80);
    }
}
