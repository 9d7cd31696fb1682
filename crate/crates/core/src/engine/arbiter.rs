/// Round-robin arbiter for the shared memory port. Each grant moves one
/// 4-byte word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arbiter {
    requesters: usize,
    last: usize,
}

/// Bytes moved per grant.
pub const GRANT_BYTES: u32 = 4;

impl Arbiter {
    pub fn new(requesters: usize) -> Self {
        assert!(requesters > 0, "arbiter needs a requester");
        Arbiter {
            requesters,
            last: requesters - 1,
        }
    }

    pub fn requesters(&self) -> usize {
        self.requesters
    }

    /// Grants the first requester after the previous winner, wrapping around.
    pub fn schedule_step(&mut self, requests: &[bool]) -> Option<usize> {
        debug_assert_eq!(requests.len(), self.requesters);
        let n = self.requesters;
        let winner = (1..=n)
            .map(|k| (self.last + k) % n)
            .find(|&i| requests[i])?;
        self.last = winner;
        Some(winner)
    }
}

/// Longest run of cycles a requester waited between two of its grants while
/// all of `active` requested every cycle for `cycles` cycles.
pub fn max_grant_gap(arbiter: &mut Arbiter, active: &[usize], cycles: u64) -> u64 {
    let mut requests = vec![false; arbiter.requesters()];
    for &i in active {
        requests[i] = true;
    }
    let mut last: Vec<Option<u64>> = vec![None; arbiter.requesters()];
    let mut worst = 0;
    for t in 0..cycles {
        if let Some(g) = arbiter.schedule_step(&requests) {
            if let Some(prev) = last[g] {
                worst = worst.max(t - prev - 1);
            }
            last[g] = Some(t);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rotates_in_index_order() {
        let mut a = Arbiter::new(3);
        let all = [true, true, true];
        let order: Vec<_> = (0..6).map(|_| a.schedule_step(&all).unwrap()).collect();
        assert_eq!(order, vec![0, 1, 2, 0, 1, 2]);
        assert_eq!(a.schedule_step(&[false; 3]), None);
    }

    #[test]
    fn gap_is_requesters_minus_one() {
        for r in 2..=4 {
            let mut a = Arbiter::new(4);
            let active: Vec<usize> = (0..r).collect();
            assert_eq!(max_grant_gap(&mut a, &active, 1000), r as u64 - 1);
        }
    }

    proptest! {
        #[test]
        fn no_starvation(pattern in prop::collection::vec(prop::collection::vec(any::<bool>(), 4), 1..200)) {
            let mut a = Arbiter::new(4);
            // A requester that keeps asking is served within n cycles.
            let mut waiting = [0u32; 4];
            for req in &pattern {
                let g = a.schedule_step(req);
                prop_assert_eq!(g.is_some(), req.iter().any(|&b| b));
                for i in 0..4 {
                    if Some(i) == g || !req[i] {
                        waiting[i] = 0;
                    } else {
                        waiting[i] += 1;
                        prop_assert!(waiting[i] < 4);
                    }
                }
            }
        }
    }
}
