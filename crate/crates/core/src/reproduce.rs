//! Published reference values and the tolerance each obtained value is
//! judged against.

use std::fmt::Write as _;

use crate::metrics::{IntervalLabel, Metric, Report};
use crate::slicing::{PlanMode, Profile};

/// One compared quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    /// Acceptance criterion the row belongs to.
    pub criterion: u8,
    pub label: String,
    /// Published value or bound, as printed.
    pub reference: String,
    pub obtained: Option<f64>,
    pub pass: bool,
}

fn get(report: &Report, plan: PlanMode, iv: IntervalLabel, profile: Profile, metric: Metric) -> Option<f64> {
    report.get(plan.as_str(), iv, profile, metric).map(|a| a.mean)
}

const S: PlanMode = PlanMode::Static;
const D: PlanMode = PlanMode::Dynamic;

fn iv(i: u8) -> IntervalLabel {
    IntervalLabel::Interval(i)
}

struct Builder<'r> {
    report: &'r Report,
    out: Vec<Check>,
}

impl Builder<'_> {
    fn value(&self, plan: PlanMode, label: IntervalLabel, profile: Profile, metric: Metric) -> Option<f64> {
        get(self.report, plan, label, profile, metric)
    }

    fn push(&mut self, criterion: u8, label: String, reference: String, obtained: Option<f64>, pass: bool) {
        self.out.push(Check { criterion, label, reference, obtained, pass });
    }

    fn within(&mut self, c: u8, plan: PlanMode, i: u8, metric: Metric, target: f64, tol: f64) {
        let v = self.value(plan, iv(i), Profile::Mmtc, metric);
        let pass = v.is_some_and(|v| (v - target).abs() <= tol);
        self.push(c, format!("{metric} {plan} interval {i}"), format!("{target} ± {tol}"), v, pass);
    }

    fn at_most(&mut self, c: u8, plan: PlanMode, i: u8, metric: Metric, reference: &str, bound: f64) {
        let v = self.value(plan, iv(i), Profile::Mmtc, metric);
        let pass = v.is_some_and(|v| v <= bound);
        self.push(c, format!("{metric} {plan} interval {i}"), format!("{reference} (≤ {bound})"), v, pass);
    }

    fn relative(&mut self, c: u8, plan: PlanMode, i: u8, metric: Metric, target: f64, rel: f64) {
        let v = self.value(plan, iv(i), Profile::Mmtc, metric);
        let pass = v.is_some_and(|v| (v - target).abs() <= rel * target);
        self.push(c, format!("{metric} {plan} interval {i}"), format!("{target} ± {}%", rel * 100.0), v, pass);
    }

    /// `lower` below `upper`; the obtained column shows `upper - lower`.
    fn ordering(&mut self, c: u8, label: String, reference: String, lower: Option<f64>, upper: Option<f64>) {
        let diff = lower.zip(upper).map(|(l, u)| u - l);
        self.push(c, label, reference, diff, diff.is_some_and(|d| d > 0.0));
    }
}

/// Random-access rows (criteria 1 to 6).
pub fn rach_checks(report: &Report) -> Vec<Check> {
    use Metric::*;
    let mut b = Builder { report, out: Vec::new() };
    b.within(1, S, 1, BlockingProbability, 0.91, 0.08);
    b.within(2, D, 1, BlockingProbability, 0.62, 0.08);
    b.within(3, S, 2, BlockingProbability, 0.08, 0.05);
    b.at_most(3, D, 2, BlockingProbability, "0", 0.01);
    b.at_most(4, D, 3, BlockingProbability, "0.006", 0.02);
    b.at_most(4, S, 3, BlockingProbability, "0", 0.005);
    for (plan, i, target) in [(S, 1, 8.34), (D, 1, 6.97), (S, 2, 5.43), (D, 2, 3.21)] {
        b.within(5, plan, i, AvgPreambleRetx, target, 1.0);
    }
    let retx = |b: &Builder, p, i| b.value(p, iv(i), Profile::Mmtc, AvgPreambleRetx);
    for (i, s_ref, d_ref) in [(1u8, 8.34, 6.97), (2, 5.43, 3.21)] {
        let (s, d) = (retx(&b, S, i), retx(&b, D, i));
        b.ordering(5, format!("{AvgPreambleRetx} static > dynamic, interval {i}"), format!("{s_ref} > {d_ref}"), d, s);
    }
    let (s, d) = (retx(&b, S, 3), retx(&b, D, 3));
    b.ordering(5, format!("{AvgPreambleRetx} static < dynamic, interval 3"), "2.21 < 4.27".into(), s, d);

    for (i, s_ref, d_ref) in [(1u8, 160.92, 124.25), (2, 100.84, 65.56), (3, 53.58, 94.51)] {
        b.relative(6, S, i, AccessDelayMs, s_ref, 0.25);
        b.relative(6, D, i, AccessDelayMs, d_ref, 0.25);
    }
    let delay = |b: &Builder, p| b.value(p, iv(3), Profile::Mmtc, AccessDelayMs);
    let (s, d) = (delay(&b, S), delay(&b, D));
    b.ordering(6, format!("{AccessDelayMs} static < dynamic, interval 3"), "53.58 < 94.51".into(), s, d);
    b.out
}

/// Slicing rows (criteria 8 to 11).
pub fn slicing_checks(report: &Report) -> Vec<Check> {
    use Metric::*;
    let mut b = Builder { report, out: Vec::new() };
    let tput = |b: &Builder, p, l| b.value(p, l, Profile::Embb, ThroughputBps);
    let outage = |b: &Builder, p, l| b.value(p, l, Profile::Urllc, Outage);

    for plan in [S, D] {
        let v = tput(&b, plan, iv(1));
        let pass = v.is_some_and(|v| (v - 4e6).abs() <= 0.02 * 4e6);
        b.push(8, format!("{ThroughputBps} embb {plan} interval 1"), "4e6 ± 2%".into(), v, pass);
    }

    let (s3, d3) = (tput(&b, S, iv(3)), tput(&b, D, iv(3)));
    b.ordering(9, "embb throughput static < dynamic, interval 3".into(), "6.45e6 < 7.64e6".into(), s3, d3);
    b.push(9, "embb throughput dynamic < 8e6, interval 3".into(), "7.64e6".into(), d3, d3.is_some_and(|d| d < 8e6));
    let ratio = s3.zip(d3).and_then(|(s, d)| (s > 0.0).then(|| d / s));
    b.push(9, "embb throughput dynamic / static, interval 3".into(), "1.18 (≥ 1.10)".into(), ratio, ratio.is_some_and(|r| r >= 1.10));

    let (s2, d2) = (outage(&b, S, iv(2)), outage(&b, D, iv(2)));
    // obtained is the dynamic outage, judged against a tenth of the static one
    let bound = s2.map(|s| 0.1 * s);
    b.push(
        10,
        "urllc outage dynamic ≤ 0.1 × static, interval 2".into(),
        format!("1.3e-4 (≤ {})", bound.map_or_else(|| "?".into(), |v| format!("{v:.3e}"))),
        d2,
        d2.zip(bound).is_some_and(|(d, b)| d <= b),
    );

    let (sc, dc) = (outage(&b, S, IntervalLabel::Combined), outage(&b, D, IntervalLabel::Combined));
    b.ordering(11, "urllc outage dynamic < static, combined".into(), "95.65% lower".into(), dc, sc);
    let (sc, dc) = (tput(&b, S, IntervalLabel::Combined), tput(&b, D, IntervalLabel::Combined));
    b.ordering(11, "embb throughput static < dynamic, combined".into(), "6.48% higher".into(), sc, dc);
    b.out
}

/// Fixed-width table of `checks`, one line per row.
pub fn format_table(checks: &[Check]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<3} {:<52} {:<24} {:>14}  result", "#", "quantity", "published", "obtained");
    for c in checks {
        let obtained = c.obtained.map_or_else(|| "missing".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(
            s,
            "{:<3} {:<52} {:<24} {:>14}  {}",
            c.criterion,
            c.label,
            c.reference,
            obtained,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    s
}
