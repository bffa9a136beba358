//! Device population of one run: where every AGV, worker and smart tag is
//! at any time.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{AgvActivity, Floorplan, MobilityState, Scenario, Trajectory};
use crate::channel::{ChannelTable, Position3D};
use crate::rng::{self, SimRng};
use crate::slicing::{Profile, SliceDevice};
use crate::timebase::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeviceKind {
    Agv,
    Worker,
    SmartTag,
}

impl DeviceKind {
    pub fn profile(self) -> Profile {
        match self {
            DeviceKind::Agv => Profile::Urllc,
            DeviceKind::Worker => Profile::Embb,
            DeviceKind::SmartTag => Profile::Mmtc,
        }
    }

    pub fn of_profile(profile: Profile) -> Self {
        match profile {
            Profile::Urllc => DeviceKind::Agv,
            Profile::Embb => DeviceKind::Worker,
            Profile::Mmtc => DeviceKind::SmartTag,
        }
    }

    fn code(self) -> u64 {
        match self {
            DeviceKind::Agv => 1,
            DeviceKind::Worker => 2,
            DeviceKind::SmartTag => 3,
        }
    }

    /// Run-wide identifier used to derive the device's random streams.
    pub fn global_id(self, index: u32) -> u64 {
        self.code() << 32 | index as u64
    }
}

#[derive(Debug, Clone)]
pub struct FleetDevice {
    pub kind: DeviceKind,
    pub index: u32,
    /// One path per activity interval, in absolute time.
    pub paths: Vec<Trajectory>,
    /// Completed round trips per interval.
    pub round_trips: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct Population {
    pub agvs: Vec<FleetDevice>,
    pub workers: Vec<FleetDevice>,
    pub tags: Vec<FleetDevice>,
}

fn period_for(trips_per_hour: f64) -> SimTime {
    SimTime::from_secs_f64(3600.0 / trips_per_hour)
}

impl Population {
    pub fn build(scenario: &Scenario, run_seed: u64) -> Self {
        let fp = &scenario.floorplan;
        let fleet = &scenario.fleet;
        let tr = &scenario.traffic;
        let n_iv = scenario.n_intervals();

        let route = |kind: DeviceKind,
                     index: u32,
                     iv: usize,
                     homes: &[[f64; 2]],
                     aways: &[[f64; 2]],
                     z: f64,
                     speed: f64,
                     period: SimTime| {
            let mut r: SimRng = rng::stream(
                run_seed,
                &[rng::label::MOBILITY, kind.global_id(index), iv as u64],
            );
            let homes = Floorplan::points(homes, z);
            let home = *homes.choose(&mut r).expect("validated non-empty");
            let mut state = MobilityState::new(home, Floorplan::points(aways, z), speed, period, &mut r);
            let start = scenario.interval_start(iv);
            let end = start + scenario.interval_duration();
            let path = Trajectory::record(&mut state, start, end, &mut r);
            (path, state.round_trips())
        };

        let agvs = (0..fleet.agvs)
            .map(|a| {
                let mut paths = Vec::with_capacity(n_iv);
                let mut trips = Vec::with_capacity(n_iv);
                for (iv, spec) in scenario.intervals.iter().enumerate() {
                    let (homes, aways, per_hour) = match spec.agv_activity {
                        AgvActivity::Loading => (&fp.p1, &fp.p2, tr.loading_trips_per_hour),
                        AgvActivity::Storing => (&fp.p3, &fp.p4, tr.storing_trips_per_hour),
                    };
                    if a < spec.agvs {
                        let (p, n) = route(
                            DeviceKind::Agv,
                            a,
                            iv,
                            homes,
                            aways,
                            fleet.agv_height_m,
                            fleet.agv_speed_mps,
                            period_for(per_hour),
                        );
                        paths.push(p);
                        trips.push(n);
                    } else {
                        let park = homes[a as usize % homes.len()];
                        paths.push(Trajectory::stationary(Position3D::new(park[0], park[1], fleet.agv_height_m)));
                        trips.push(0);
                    }
                }
                FleetDevice { kind: DeviceKind::Agv, index: a, paths, round_trips: trips }
            })
            .collect();

        let workers = (0..fleet.workers)
            .map(|w| {
                let (paths, round_trips) = (0..n_iv)
                    .map(|iv| {
                        route(
                            DeviceKind::Worker,
                            w,
                            iv,
                            &fp.p5,
                            &fp.p4,
                            fleet.worker_height_m,
                            fleet.worker_speed_mps,
                            period_for(tr.worker_trips_per_hour),
                        )
                    })
                    .unzip();
                FleetDevice { kind: DeviceKind::Worker, index: w, paths, round_trips }
            })
            .collect();

        let tags = (0..fleet.smart_tags)
            .map(|t| {
                let mut r: SimRng =
                    rng::stream(run_seed, &[rng::label::PLACEMENT, DeviceKind::SmartTag.global_id(t)]);
                let rack = fp.racks[r.gen_range(0..fp.racks.len())];
                let at = rack.sample(&mut r);
                FleetDevice {
                    kind: DeviceKind::SmartTag,
                    index: t,
                    paths: vec![Trajectory::stationary(at); n_iv],
                    round_trips: vec![0; n_iv],
                }
            })
            .collect();

        Population { agvs, workers, tags }
    }

    pub fn devices(&self, kind: DeviceKind) -> &[FleetDevice] {
        match kind {
            DeviceKind::Agv => &self.agvs,
            DeviceKind::Worker => &self.workers,
            DeviceKind::SmartTag => &self.tags,
        }
    }

    /// Devices of a slice, with their per-interval channel draws attached.
    pub fn slice_devices(&self, profile: Profile, run_seed: u64) -> Vec<SliceDevice> {
        let kind = DeviceKind::of_profile(profile);
        let devs = self.devices(kind);
        let n_iv = devs.first().map_or(0, |d| d.paths.len());
        let ids: Vec<u64> = devs.iter().map(|d| kind.global_id(d.index)).collect();
        let table = ChannelTable::new(run_seed, &ids, n_iv);
        devs.iter()
            .enumerate()
            .map(|(i, d)| SliceDevice {
                paths: d.paths.clone(),
                draws: (0..n_iv).map(|iv| table.draw(i, iv)).collect(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_stay_in_the_hall() {
        let s = Scenario::bundled();
        let pop = Population::build(&s, 42);
        let mut t = SimTime::ZERO;
        while t < s.horizon() {
            let iv = (t.0 / s.interval_duration().0) as usize;
            for d in pop.agvs.iter().chain(&pop.workers).chain(&pop.tags) {
                let p = d.paths[iv].position_at(t);
                assert!(s.floorplan.contains(&p), "{:?} {} at {t}: {p:?}", d.kind, d.index);
            }
            t += SimTime::from_secs(7);
        }
    }

    #[test]
    fn trip_cadence() {
        let s = Scenario::bundled();
        let pop = Population::build(&s, 5);
        // storing: one round trip per minute
        for a in &pop.agvs {
            assert_eq!(a.round_trips[1], 10, "agv {}", a.index);
        }
        // loading: 12 per hour, i.e. 2 in 600 s for the three active AGVs
        for a in &pop.agvs[..3] {
            assert_eq!(a.round_trips[0], 2);
        }
        for w in &pop.workers {
            assert_eq!(w.round_trips, vec![2, 2, 2]);
        }
    }

    #[test]
    fn workers_start_at_an_entrance() {
        let s = Scenario::bundled();
        let pop = Population::build(&s, 8);
        let entrances = Floorplan::points(&s.floorplan.p5, s.fleet.worker_height_m);
        for w in &pop.workers {
            for (iv, path) in w.paths.iter().enumerate() {
                let start = path.position_at(s.interval_start(iv));
                assert!(entrances.iter().any(|e| e.distance_3d(&start) < 1e-9));
            }
        }
    }

    #[test]
    fn tags_sit_in_racks() {
        let s = Scenario::bundled();
        let pop = Population::build(&s, 1);
        for tag in &pop.tags {
            let p = tag.paths[0].position_at(SimTime::ZERO);
            assert!(s.floorplan.racks.iter().any(|r| r.contains_xy(p.x, p.y) && p.z <= r.height_m));
        }
    }

    #[test]
    fn same_seed_same_population() {
        let s = Scenario::bundled();
        let a = Population::build(&s, 77);
        let b = Population::build(&s, 77);
        for (x, y) in a.agvs.iter().zip(&b.agvs) {
            assert_eq!(x.paths, y.paths);
        }
        let c = Population::build(&s, 78);
        assert_ne!(a.agvs[0].paths[1], c.agvs[0].paths[1]);
    }
}
