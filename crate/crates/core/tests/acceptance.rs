//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit when any
//! criterion fails. Runs the full published campaigns, so it takes a few
//! minutes.


use std::process::ExitCode;
use std::time::Instant;

use nrslice::campaign::{run_campaign, slice_run, CampaignSpec, Workload, DEFAULT_RACH_SEEDS, DEFAULT_SLICING_SEEDS};
use nrslice::metrics::{PacketRecord, Report};
use nrslice::reproduce::{format_table, rach_checks, slicing_checks, Check};
use nrslice::rng;
use nrslice::scenario::{Population, ProfileTraffic};
use nrslice::slicing::{run_slice, PlanMode, Profile};
use nrslice::timebase::{numerology_params, prb_count, time_to_position, Numerology, SimTime};
use nrslice::Scenario;

use rach_oracle::{empirical, mismatches, small_config, Oracle, CASES, ORACLE_SEEDS};

const MASTER_SEED: u64 = 0;
const BOTH: [PlanMode; 2] = [PlanMode::Static, PlanMode::Dynamic];

struct Verdict {
    criterion: u8,
    pass: bool,
    detail: String,
}

fn campaign(s: &Scenario, workload: Workload, seeds: usize, jobs: usize) -> Report {
    let spec = CampaignSpec { workload, plans: BOTH.to_vec(), seeds, master_seed: MASTER_SEED, jobs, resume_dir: None };
    run_campaign(s, &spec).expect("campaign runs").0
}

fn from_checks(checks: &[Check], criteria: std::ops::RangeInclusive<u8>) -> Vec<Verdict> {
    criteria
        .map(|c| {
            let rows: Vec<&Check> = checks.iter().filter(|k| k.criterion == c).collect();
            let failed = rows.iter().filter(|k| !k.pass).count();
            Verdict { criterion: c, pass: !rows.is_empty() && failed == 0, detail: format!("{failed} of {} rows out of tolerance", rows.len()) }
        })
        .collect()
}

fn oracle() -> Verdict {
    let mut bad = Vec::new();
    for &(index, n, preambles, attempts) in CASES {
        let cfg = small_config(index, preambles, attempts);
        let exact = Oracle::new(&cfg, n).marginals();
        let seen = empirical(&cfg, n, 0..ORACLE_SEEDS);
        let m = mismatches(&exact, &seen, ORACLE_SEEDS as f64);
        if !m.is_empty() {
            bad.push(format!("index {index} n {n} P {preambles} M {attempts}: {m:?}"));
        }
    }
    Verdict {
        criterion: 7,
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{} instances within 3 SE over {ORACLE_SEEDS} seeds", CASES.len())
        } else {
            bad.join("; ")
        },
    }
}

fn urllc_records(s: &Scenario, mode: PlanMode, seed: u64) -> Vec<PacketRecord> {
    let plan = s.slice_plan(mode);
    let pop = Population::build(s, seed);
    let devices = pop.slice_devices(Profile::Urllc, seed);
    let run = slice_run(s, &plan, Profile::Urllc, &devices, seed);
    let mut out = Vec::new();
    run_slice(&run, ProfileTraffic::new(s, Profile::Urllc, seed), |r| out.push(r.clone()));
    out
}

fn isolation(s: &Scenario) -> Verdict {
    let mut heavy = s.clone();
    for iv in &mut heavy.intervals {
        iv.embb_rate_mbps *= 2.0;
    }
    let seed = rng::seed_stream(MASTER_SEED, 0);
    let mut notes = Vec::new();
    let mut pass = true;
    for mode in BOTH {
        let a = urllc_records(s, mode, seed);
        let b = urllc_records(&heavy, mode, seed);
        let same = !a.is_empty() && a == b;
        pass &= same;
        notes.push(format!("{mode}: {} records {}", a.len(), if same { "identical" } else { "differ" }));
    }
    Verdict { criterion: 12, pass, detail: notes.join(", ") }
}

fn determinism(s: &Scenario, rach_jobs2: &Report) -> Verdict {
    let rach_jobs1 = campaign(s, Workload::Rach, DEFAULT_RACH_SEEDS, 1);
    let slicing: Vec<String> = [1, 3].iter().map(|&j| campaign(s, Workload::Slicing, 3, j).to_csv()).collect();
    let rach_same = rach_jobs1.to_csv() == rach_jobs2.to_csv();
    let slicing_same = slicing[0] == slicing[1];
    Verdict {
        criterion: 13,
        pass: rach_same && slicing_same,
        detail: format!("rach csv jobs 1 vs 2 identical: {rach_same}, slicing csv jobs 1 vs 3 identical: {slicing_same}"),
    }
}

fn numerology() -> Verdict {
    let mut bad = Vec::new();
    // (mu, scs kHz, slot ns, symbol ns, slots per subframe)
    let table: [(u8, u32, u64, u64, u32); 5] = [
        (0, 15, 1_000_000, 71_429, 1),
        (1, 30, 500_000, 35_714, 2),
        (2, 60, 250_000, 17_857, 4),
        (3, 120, 125_000, 8_929, 8),
        (4, 240, 62_500, 4_464, 16),
    ];
    for (mu, scs, slot, symbol, per_sf) in table {
        let p = numerology_params(mu).unwrap();
        let got = (p.scs_khz, p.slot_duration.0, p.symbol_duration.0, p.slots_per_subframe);
        if got != (scs, slot, symbol, per_sf) {
            bad.push(format!("mu {mu}: {got:?}"));
        }
    }
    if numerology_params(5).is_ok() {
        bad.push("mu 5 accepted".into());
    }
    let prbs = [
        (20e6, Numerology::MU0, 0.10, 100),
        (20e6, Numerology::MU2, 0.10, 25),
        (180e3, Numerology::MU0, 0.0, 1),
    ];
    for (bw, mu, guard, want) in prbs {
        let got = prb_count(bw, mu, guard).unwrap();
        if got != want {
            bad.push(format!("prbs {bw} {mu}: {got}"));
        }
    }
    let positions = [
        (SimTime::ZERO, Numerology::MU0, (0, 0, 0)),
        (SimTime::from_ms(10), Numerology::MU0, (1, 0, 0)),
        (SimTime::from_us(1_250), Numerology::MU2, (0, 1, 1)),
    ];
    for (t, mu, want) in positions {
        let p = time_to_position(t, mu);
        if (p.frame, p.subframe, p.slot) != want {
            bad.push(format!("position {t:?} {mu}: {p:?}"));
        }
    }
    Verdict {
        criterion: 14,
        pass: bad.is_empty(),
        detail: if bad.is_empty() { "mu 0..4, PRB counts and slot positions exact".into() } else { bad.join("; ") },
    }
}

fn main() -> ExitCode {
    let s = Scenario::bundled();
    let mut verdicts = Vec::new();

    let t = Instant::now();
    let rach = campaign(&s, Workload::Rach, DEFAULT_RACH_SEEDS, 2);
    let rach_rows = rach_checks(&rach);
    print!("{}", format_table(&rach_rows));
    println!("rach campaign: {DEFAULT_RACH_SEEDS} seeds in {:.1} s\n", t.elapsed().as_secs_f64());
    verdicts.extend(from_checks(&rach_rows, 1..=6));

    let t = Instant::now();
    verdicts.push(oracle());
    println!("oracle: {:.1} s", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let slicing = campaign(&s, Workload::Slicing, DEFAULT_SLICING_SEEDS, 1);
    let slicing_rows = slicing_checks(&slicing);
    print!("{}", format_table(&slicing_rows));
    println!("slicing campaign: {DEFAULT_SLICING_SEEDS} seeds in {:.1} s\n", t.elapsed().as_secs_f64());
    verdicts.extend(from_checks(&slicing_rows, 8..=11));

    verdicts.push(isolation(&s));
    let t = Instant::now();
    verdicts.push(determinism(&s, &rach));
    println!("determinism: {:.1} s", t.elapsed().as_secs_f64());
    verdicts.push(numerology());
    verdicts.sort_by_key(|v| v.criterion);

    println!();
    for v in &verdicts {
        println!("criterion {:>2}: {}  ({})", v.criterion, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    let failed: Vec<u8> = verdicts.iter().filter(|v| !v.pass).map(|v| v.criterion).collect();
    if failed.is_empty() {
        println!("all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
