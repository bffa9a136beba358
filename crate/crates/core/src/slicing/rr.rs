use crate::timebase::FramePosition;

/// PRBs handed to one device in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grant {
    pub device: u32,
    pub prbs: u32,
}

/// A grant once the transport-block size is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransmissionGrant {
    pub device: u32,
    pub slot: FramePosition,
    pub prbs: u32,
    pub tb_bits: u64,
}

/// Round-robin PRB allocator with a cursor persisted across slots.
///
/// PRBs are dealt one at a time, starting at the first backlogged device at or
/// after the cursor and skipping devices whose demand is already met. A full
/// pass gives every device the same share; the last partial pass hands the
/// remainder out one each. The cursor then moves just past the device that
/// received the final PRB.
#[derive(Debug, Clone, Default)]
pub struct RoundRobin {
    cursor: u32,
}

impl RoundRobin {
    pub fn new() -> Self {
        RoundRobin { cursor: 0 }
    }

    pub fn cursor(&self) -> u32 {
        self.cursor
    }

    /// `demands` holds `(device, prbs wanted)` sorted by device id; devices
    /// with zero demand are ignored. Returned grants are in the same order.
    pub fn allocate(&mut self, demands: &[(u32, u32)], capacity: u32) -> Vec<Grant> {
        debug_assert!(demands.windows(2).all(|w| w[0].0 < w[1].0));
        let active: Vec<(u32, u32)> = demands.iter().copied().filter(|&(_, d)| d > 0).collect();
        if active.is_empty() || capacity == 0 {
            return Vec::new();
        }
        let n = active.len();
        let start = active.iter().position(|&(id, _)| id >= self.cursor).unwrap_or(0);
        let mut given = vec![0u32; n];
        let mut left = capacity;

        // equal shares, capped by demand, until less than one PRB per hungry device is left
        loop {
            let hungry = (0..n).filter(|&i| given[i] < active[i].1).count() as u32;
            if hungry == 0 {
                break;
            }
            let share = left / hungry;
            if share == 0 {
                break;
            }
            for i in 0..n {
                let need = active[i].1 - given[i];
                if need > 0 {
                    let g = share.min(need);
                    given[i] += g;
                    left -= g;
                }
            }
        }

        let mut last = None;
        for off in 0..n {
            if left == 0 {
                break;
            }
            let i = (start + off) % n;
            if given[i] < active[i].1 {
                given[i] += 1;
                left -= 1;
                last = Some(i);
            }
        }
        if let Some(i) = last {
            self.cursor = active[(i + 1) % n].0;
        }

        active
            .iter()
            .zip(given)
            .filter(|(_, g)| *g > 0)
            .map(|(&(device, _), prbs)| Grant { device, prbs })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn backlog(n: u32) -> Vec<(u32, u32)> {
        (0..n).map(|d| (d, u32::MAX)).collect()
    }

    fn prbs(grants: &[Grant]) -> Vec<u32> {
        grants.iter().map(|g| g.prbs).collect()
    }

    #[test]
    fn single_device_takes_everything() {
        let mut rr = RoundRobin::new();
        assert_eq!(rr.allocate(&backlog(1), 25), vec![Grant { device: 0, prbs: 25 }]);
    }

    #[test]
    fn remainder_rotates() {
        let mut rr = RoundRobin::new();
        assert_eq!(prbs(&rr.allocate(&backlog(3), 10)), vec![4, 3, 3]);
        assert_eq!(rr.cursor(), 1);
        assert_eq!(prbs(&rr.allocate(&backlog(3), 10)), vec![3, 4, 3]);
        assert_eq!(prbs(&rr.allocate(&backlog(3), 10)), vec![3, 3, 4]);
        // hand enumeration: 10 PRBs each after three slots
        assert_eq!(rr.cursor(), 0);
    }

    #[test]
    fn fewer_prbs_than_devices() {
        // 10 AGVs sharing a 7-PRB slice
        let mut rr = RoundRobin::new();
        let first = rr.allocate(&backlog(10), 7);
        assert_eq!(first.len(), 7);
        assert_eq!(first.iter().map(|g| g.device).collect::<Vec<_>>(), (0..7).collect::<Vec<_>>());
        let second = rr.allocate(&backlog(10), 7);
        assert_eq!(second.iter().map(|g| g.device).collect::<Vec<_>>(), vec![0, 1, 2, 3, 7, 8, 9]);
    }

    #[test]
    fn demand_caps_and_redistribution() {
        let mut rr = RoundRobin::new();
        let g = rr.allocate(&[(0, 1), (1, 100), (2, 100)], 10);
        assert_eq!(prbs(&g), vec![1, 5, 4]);
        let g = rr.allocate(&[(0, 2), (1, 2)], 10);
        assert_eq!(prbs(&g), vec![2, 2]);
        assert!(rr.allocate(&[], 10).is_empty());
        assert!(rr.allocate(&[(0, 0)], 10).is_empty());
        assert!(rr.allocate(&backlog(2), 0).is_empty());
    }

    proptest! {
        #[test]
        fn prop_capacity_and_work_conservation(
            demands in proptest::collection::btree_map(0u32..40, 0u32..30, 0..12),
            cap in 0u32..110,
        ) {
            let demands: Vec<(u32, u32)> = demands.into_iter().collect();
            let grants = RoundRobin::new().allocate(&demands, cap);
            let total: u32 = grants.iter().map(|g| g.prbs).sum();
            let want: u32 = demands.iter().map(|d| d.1).sum();
            prop_assert_eq!(total, cap.min(want));
            for g in &grants {
                let d = demands.iter().find(|d| d.0 == g.device).unwrap();
                prop_assert!(g.prbs <= d.1);
            }
        }

        #[test]
        fn prop_fairness_window(n in 1u32..12, cap in 1u32..60, slots in 1usize..50) {
            let mut rr = RoundRobin::new();
            let mut total = vec![0u64; n as usize];
            for _ in 0..slots {
                for g in rr.allocate(&backlog(n), cap) {
                    total[g.device as usize] += g.prbs as u64;
                }
            }
            let spread = total.iter().max().unwrap() - total.iter().min().unwrap();
            prop_assert!(spread <= n as u64);
        }
    }
}
