//! Waypoint mobility with cadence-preserving dwell times.
//!
//! A device runs round trips from a home waypoint to a randomly drawn away
//! waypoint and back. The dwell at each end is stretched so every round trip
//! lasts exactly `period`, which pins the trip cadence regardless of how far
//! the random target is. Trips longer than the period simply run without
//! dwell.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::channel::Position3D;
use crate::timebase::{SimTime, NS_PER_SEC};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Outbound,
    DwellAway,
    Inbound,
    DwellHome,
}

/// Stateful walker; [`MobilityState::advance`] moves it through time.
#[derive(Debug, Clone)]
pub struct MobilityState {
    home: Position3D,
    away_points: Vec<Position3D>,
    speed_mps: f64,
    period: SimTime,
    phase: Phase,
    /// Time already spent in the current phase.
    elapsed: SimTime,
    away: Position3D,
    leg: SimTime,
    dwell: SimTime,
    round_trips: u32,
}

impl MobilityState {
    /// Starts at `home`, immediately heading for a random member of `away_points`.
    pub fn new<R: Rng + ?Sized>(
        home: Position3D,
        away_points: Vec<Position3D>,
        speed_mps: f64,
        period: SimTime,
        rng: &mut R,
    ) -> Self {
        assert!(!away_points.is_empty(), "route needs at least one target");
        assert!(speed_mps > 0.0);
        let mut s = MobilityState {
            home,
            away_points,
            speed_mps,
            period,
            phase: Phase::Outbound,
            elapsed: SimTime::ZERO,
            away: home,
            leg: SimTime::ZERO,
            dwell: SimTime::ZERO,
            round_trips: 0,
        };
        s.start_trip(rng);
        s
    }

    fn start_trip<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.away = *self.away_points.choose(rng).expect("non-empty");
        let d = self.home.distance_3d(&self.away);
        self.leg = SimTime(((d / self.speed_mps) * NS_PER_SEC as f64).round() as u64);
        let spare = self.period.0.saturating_sub(2 * self.leg.0);
        self.dwell = SimTime(spare / 2);
        self.phase = Phase::Outbound;
        self.elapsed = SimTime::ZERO;
    }

    fn phase_length(&self) -> SimTime {
        match self.phase {
            Phase::Outbound | Phase::Inbound => self.leg,
            Phase::DwellAway => self.dwell,
            // the odd nanosecond of an odd spare goes to the home dwell
            Phase::DwellHome => {
                SimTime(self.period.0.saturating_sub(2 * self.leg.0).saturating_sub(self.dwell.0))
            }
        }
    }

    /// Time left before the next waypoint event.
    pub fn time_to_next_event(&self) -> SimTime {
        self.phase_length() - self.elapsed
    }

    pub fn position(&self) -> Position3D {
        let len = self.phase_length();
        let frac = if len.0 == 0 { 1.0 } else { self.elapsed.0 as f64 / len.0 as f64 };
        match self.phase {
            Phase::Outbound => self.home.lerp(&self.away, frac),
            Phase::DwellAway => self.away,
            Phase::Inbound => self.away.lerp(&self.home, frac),
            Phase::DwellHome => self.home,
        }
    }

    pub fn round_trips(&self) -> u32 {
        self.round_trips
    }

    pub fn speed_mps(&self) -> f64 {
        self.speed_mps
    }

    /// Moves the device forward by `dt` and returns where it ends up.
    pub fn advance<R: Rng + ?Sized>(&mut self, dt: SimTime, rng: &mut R) -> Position3D {
        let mut left = dt;
        loop {
            let remaining = self.time_to_next_event();
            if left < remaining {
                self.elapsed += left;
                break;
            }
            left = left - remaining;
            self.elapsed = self.phase_length();
            self.next_phase(rng);
            if left.0 == 0 {
                break;
            }
        }
        self.position()
    }

    fn next_phase<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.elapsed = SimTime::ZERO;
        self.phase = match self.phase {
            Phase::Outbound => Phase::DwellAway,
            Phase::DwellAway => Phase::Inbound,
            Phase::Inbound => Phase::DwellHome,
            Phase::DwellHome => {
                self.round_trips += 1;
                self.start_trip(rng);
                return;
            }
        };
    }
}

/// Piecewise-linear path sampled at every waypoint event.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: Vec<(SimTime, Position3D)>,
}

impl Trajectory {
    pub fn stationary(at: Position3D) -> Self {
        Trajectory { points: vec![(SimTime::ZERO, at)] }
    }

    /// Records `state` from `start` until `end`.
    pub fn record<R: Rng + ?Sized>(
        state: &mut MobilityState,
        start: SimTime,
        end: SimTime,
        rng: &mut R,
    ) -> Self {
        let mut points = vec![(start, state.position())];
        let mut t = start;
        while t < end {
            let step = state.time_to_next_event().min(end - t);
            let pos = state.advance(step, rng);
            t += step;
            points.push((t, pos));
        }
        Trajectory { points }
    }

    pub fn position_at(&self, t: SimTime) -> Position3D {
        let idx = self.points.partition_point(|(pt, _)| *pt <= t);
        if idx == 0 {
            return self.points[0].1;
        }
        if idx == self.points.len() {
            return self.points[idx - 1].1;
        }
        let (t0, p0) = self.points[idx - 1];
        let (t1, p1) = self.points[idx];
        if t1 == t0 {
            return p1;
        }
        p0.lerp(&p1, (t.0 - t0.0) as f64 / (t1.0 - t0.0) as f64)
    }

    pub fn breakpoints(&self) -> &[(SimTime, Position3D)] {
        &self.points
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn p(x: f64, y: f64) -> Position3D {
        Position3D::new(x, y, 0.5)
    }

    #[test]
    fn kinematics() {
        let mut r = rng::stream(1, &[]);
        let mut s = MobilityState::new(p(0.0, 0.0), vec![p(15.0, 0.0)], 1.5, SimTime::from_secs(300), &mut r);
        assert_eq!(s.time_to_next_event(), SimTime::from_secs(10));
        let pos = s.advance(SimTime::from_secs(5), &mut r);
        assert!((pos.x - 7.5).abs() < 1e-9);
        let pos = s.advance(SimTime::from_secs(5), &mut r);
        assert!((pos.x - 15.0).abs() < 1e-9);
        // dwell: (300 - 20) / 2
        assert_eq!(s.time_to_next_event(), SimTime::from_secs(140));
    }

    #[test]
    fn cadence_one_round_trip_per_minute() {
        let mut r = rng::stream(2, &[]);
        let targets = vec![p(10.0, 3.0), p(4.0, 20.0), p(8.0, 8.0)];
        let mut s = MobilityState::new(p(22.0, 12.0), targets, 1.5, SimTime::from_secs(60), &mut r);
        let mut t = SimTime::ZERO;
        while t < SimTime::from_secs(600) {
            s.advance(SimTime::from_ms(100), &mut r);
            t += SimTime::from_ms(100);
        }
        assert_eq!(s.round_trips(), 10);
    }

    #[test]
    fn trajectory_matches_stepper() {
        let targets = vec![p(10.0, 3.0), p(4.0, 20.0)];
        let mut r1 = rng::stream(3, &[]);
        let mut s1 = MobilityState::new(p(0.0, 0.0), targets.clone(), 1.0, SimTime::from_secs(300), &mut r1);
        let traj = Trajectory::record(&mut s1, SimTime::ZERO, SimTime::from_secs(900), &mut r1);

        let mut r2 = rng::stream(3, &[]);
        let mut s2 = MobilityState::new(p(0.0, 0.0), targets, 1.0, SimTime::from_secs(300), &mut r2);
        for k in 1..=900u64 {
            let pos = s2.advance(SimTime::from_secs(1), &mut r2);
            let q = traj.position_at(SimTime::from_secs(k));
            assert!(pos.distance_3d(&q) < 1e-6, "t={k}s {pos:?} vs {q:?}");
        }
    }

    #[test]
    fn stationary_trajectory() {
        let t = Trajectory::stationary(p(3.0, 4.0));
        assert_eq!(t.position_at(SimTime::from_secs(1000)), p(3.0, 4.0));
    }
}
