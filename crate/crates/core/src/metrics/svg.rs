//! Grouped bar charts as standalone SVG: one group per interval plus the
//! combined row, one bar per plan.

use std::fmt::Write as _;

use super::report::{Aggregate, Report};
use super::{IntervalLabel, Metric};
use crate::slicing::Profile;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Family {
    pub file_stem: &'static str,
    pub title: &'static str,
    pub y_label: &'static str,
    pub profile: Profile,
    pub metric: Metric,
    pub log_scale: bool,
    /// Values are divided by this before plotting.
    pub unit: f64,
    /// Whiskers come from these metrics' means instead of the seed spread.
    pub whiskers: Option<(Metric, Metric)>,
}

pub const FAMILIES: [Family; 5] = [
    Family {
        file_stem: "blocking_probability",
        title: "mMTC blocking probability",
        y_label: "probability",
        profile: Profile::Mmtc,
        metric: Metric::BlockingProbability,
        log_scale: false,
        unit: 1.0,
        whiskers: None,
    },
    Family {
        file_stem: "preamble_retransmissions",
        title: "Average preamble retransmissions",
        y_label: "retransmissions",
        profile: Profile::Mmtc,
        metric: Metric::AvgPreambleRetx,
        log_scale: false,
        unit: 1.0,
        whiskers: None,
    },
    Family {
        file_stem: "access_delay",
        title: "Random-access delay",
        y_label: "ms",
        profile: Profile::Mmtc,
        metric: Metric::AccessDelayMs,
        log_scale: false,
        unit: 1.0,
        whiskers: Some((Metric::AccessDelayDevLoMs, Metric::AccessDelayDevHiMs)),
    },
    Family {
        file_stem: "urllc_outage",
        title: "URLLC outage at the latency threshold",
        y_label: "outage (log)",
        profile: Profile::Urllc,
        metric: Metric::Outage,
        log_scale: true,
        unit: 1.0,
        whiskers: None,
    },
    Family {
        file_stem: "embb_throughput",
        title: "eMBB throughput per worker",
        y_label: "Mbps",
        profile: Profile::Embb,
        metric: Metric::ThroughputBps,
        log_scale: false,
        unit: 1e6,
        whiskers: None,
    },
];

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bar {
    value: f64,
    lo: f64,
    hi: f64,
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 4] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52"];

/// Renders `family` from `report`, or `None` when the report has no rows for it.
pub fn render_family(report: &Report, family: &Family) -> Option<String> {
    let plans = report.plans();
    let mut labels: Vec<IntervalLabel> = report
        .rows
        .iter()
        .filter(|r| r.key.profile == family.profile && r.key.metric == family.metric)
        .map(|r| r.key.interval)
        .collect();
    labels.sort();
    labels.dedup();
    if labels.is_empty() {
        return None;
    }
    let bars: Vec<Vec<Option<Bar>>> = labels
        .iter()
        .map(|&iv| {
            plans
                .iter()
                .map(|&plan| {
                    let a: &Aggregate = report.get(plan, iv, family.profile, family.metric)?;
                    let (dlo, dhi) = match family.whiskers {
                        Some((lo, hi)) => (
                            report.get(plan, iv, family.profile, lo).map_or(0.0, |x| x.mean),
                            report.get(plan, iv, family.profile, hi).map_or(0.0, |x| x.mean),
                        ),
                        None => (a.dev_lo, a.dev_hi),
                    };
                    Some(Bar {
                        value: a.mean / family.unit,
                        lo: (a.mean - dlo) / family.unit,
                        hi: (a.mean + dhi) / family.unit,
                    })
                })
                .collect()
        })
        .collect();
    let groups: Vec<String> = labels
        .iter()
        .map(|l| match l {
            IntervalLabel::Interval(i) => format!("interval {i}"),
            IntervalLabel::Combined => "combined".to_string(),
        })
        .collect();
    render(family, &report.config_hash, &groups, &plans, &bars)
}

fn render(family: &Family, hash: &str, groups: &[String], plans: &[&str], bars: &[Vec<Option<Bar>>]) -> Option<String> {
    let all: Vec<&Bar> = bars.iter().flatten().flatten().collect();
    let plot_h = H - TOP - BOTTOM;
    let plot_w = W - LEFT - RIGHT;

    // y mapping and tick values
    let (to_y, ticks): (Box<dyn Fn(f64) -> f64>, Vec<(f64, String)>) = if family.log_scale {
        let positive: Vec<f64> = all.iter().flat_map(|b| [b.value, b.lo, b.hi]).filter(|v| *v > 0.0).collect();
        if positive.is_empty() {
            return None;
        }
        let lo_dec = positive.iter().cloned().fold(f64::INFINITY, f64::min).log10().floor();
        let hi_dec = positive.iter().cloned().fold(f64::NEG_INFINITY, f64::max).log10().ceil().max(lo_dec + 1.0);
        let span = hi_dec - lo_dec;
        let f = move |v: f64| {
            let l = if v > 0.0 { v.log10().clamp(lo_dec, hi_dec) } else { lo_dec };
            TOP + plot_h * (1.0 - (l - lo_dec) / span)
        };
        let ticks = (lo_dec as i32..=hi_dec as i32).map(|d| (10f64.powi(d), format!("1e{d}"))).collect();
        (Box::new(f), ticks)
    } else {
        let max = all.iter().map(|b| b.hi.max(b.value)).fold(0.0, f64::max);
        let top = if max > 0.0 { nice_ceiling(max) } else { 1.0 };
        let f = move |v: f64| TOP + plot_h * (1.0 - v.clamp(0.0, top) / top);
        let ticks = (0..=5).map(|i| top * i as f64 / 5.0).map(|v| (v, format_tick(v))).collect();
        (Box::new(f), ticks)
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<!-- config_hash: {hash} -->");
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, family.title);
    for (v, label) in &ticks {
        let y = to_y(*v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{label}</text>"##,
            W - RIGHT,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text transform="translate(16,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + plot_h / 2.0,
        family.y_label
    );

    let group_w = plot_w / groups.len() as f64;
    let bar_w = group_w * 0.7 / plans.len().max(1) as f64;
    let base_y = to_y(0.0);
    for (g, name) in groups.iter().enumerate() {
        let gx = LEFT + g as f64 * group_w + group_w * 0.15;
        for (p, bar) in bars[g].iter().enumerate() {
            let Some(b) = bar else { continue };
            let x = gx + p as f64 * bar_w;
            let y = to_y(b.value);
            let color = COLORS[p % COLORS.len()];
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="{color}"><title>{}: {}</title></rect>"#,
                bar_w * 0.95,
                (base_y - y).max(0.0),
                plans[p],
                b.value
            );
            if b.hi > b.lo {
                let cx = x + bar_w * 0.475;
                let _ = writeln!(
                    s,
                    r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
                    to_y(b.lo),
                    to_y(b.hi)
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{name}</text>"#,
            LEFT + (g as f64 + 0.5) * group_w,
            H - BOTTOM + 18.0
        );
    }
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{base_y:.1}" x2="{}" y2="{base_y:.1}" stroke="black"/>"#, W - RIGHT);
    for (p, plan) in plans.iter().enumerate() {
        let x = LEFT + p as f64 * 110.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{plan}</text>"#,
            H - 24.0,
            COLORS[p % COLORS.len()],
            x + 16.0,
            H - 14.0
        );
    }
    s.push_str("</svg>\n");
    Some(s)
}

fn nice_ceiling(v: f64) -> f64 {
    let mag = 10f64.powf(v.log10().floor());
    for m in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if m * mag >= v {
            return m * mag;
        }
    }
    10.0 * mag
}

fn format_tick(v: f64) -> String {
    let r = super::round_sig(v, 3);
    format!("{r}")
}

/// Every chart the report supports, as `(file name, svg)`, plus the stems
/// of the families left out for lack of data.
pub fn render_all(report: &Report) -> (Vec<(String, String)>, Vec<&'static str>) {
    let mut charts = Vec::new();
    let mut omitted = Vec::new();
    for f in &FAMILIES {
        match render_family(report, f) {
            Some(svg) => charts.push((format!("{}.svg", f.file_stem), svg)),
            None => omitted.push(f.file_stem),
        }
    }
    (charts, omitted)
}
