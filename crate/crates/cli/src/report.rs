//! Learning curves and per-scenario program reports.

use crate::svg::{Scale, Svg};
use crate::Invalid;
use anyhow::Result;
use gdpsim_core::agents::TrainLogRow;
use gdpsim_core::env::{run_episode, EnvConfig, EpisodeTrace, Policy, SagdpEnv};
use gdpsim_core::scope::ClassKind;
use gdpsim_core::{Scenario, HORIZON};
use std::fmt::Write;

/// Minutes per quarter over minutes per hour.
fn hours(quarters: u64) -> f64 {
    quarters as f64 * 15.0 / 60.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub iter: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
    pub csv: String,
    pub svg: String,
}

/// Evaluated rows of a training log as a CSV table and an SVG chart of the
/// mean with a ±1 std band.
pub fn emit_learning_curve(log: &[TrainLogRow]) -> Result<LearningCurve> {
    let points: Vec<CurvePoint> = log
        .iter()
        .filter_map(|r| {
            Some(CurvePoint {
                iter: r.iter,
                mean: r.eval_mean?,
                std: r.eval_std?,
            })
        })
        .collect();
    if points.is_empty() {
        return Err(Invalid("training log has no evaluation rows".into()).into());
    }
    let mut csv = String::from("iter,mean,std\n");
    for p in &points {
        let _ = writeln!(csv, "{},{},{}", p.iter, p.mean, p.std);
    }

    let (w, h) = (640.0, 360.0);
    let (left, right, top, bottom) = (70.0, 20.0, 30.0, 40.0);
    let lo = points.iter().map(|p| p.mean - p.std).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.mean + p.std).fold(f64::NEG_INFINITY, f64::max);
    let first = points[0].iter as f64;
    let last = points.last().unwrap().iter as f64;
    let xs = Scale::new((first, last), (left, w - right));
    let ys = Scale::new((lo, hi), (h - bottom, top));
    let mut svg = Svg::new(w, h);
    svg.line(left, h - bottom, w - right, h - bottom, "black");
    svg.line(left, top, left, h - bottom, "black");
    let mut band: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (xs.at(p.iter as f64), ys.at(p.mean + p.std)))
        .collect();
    band.extend(
        points
            .iter()
            .rev()
            .map(|p| (xs.at(p.iter as f64), ys.at(p.mean - p.std))),
    );
    svg.polygon(&band, "steelblue", 0.25);
    let line: Vec<(f64, f64)> = points.iter().map(|p| (xs.at(p.iter as f64), ys.at(p.mean))).collect();
    svg.polyline(&line, "steelblue", false);
    for &(x, y) in &line {
        svg.circle(x, y, 2.5, "steelblue");
    }
    svg.text(w / 2.0, h - 8.0, 12.0, "middle", "iteration");
    svg.text(left - 6.0, ys.at(hi) + 4.0, 10.0, "end", &format!("{hi:.0}"));
    svg.text(left - 6.0, ys.at(lo) + 4.0, 10.0, "end", &format!("{lo:.0}"));
    svg.text(left, top - 10.0, 12.0, "start", "evaluation return (mean ± std)");
    Ok(LearningCurve {
        points,
        csv,
        svg: svg.finish(),
    })
}

/// One quarter of the program report.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarterRow {
    pub t: usize,
    pub sched_controlled: u32,
    pub sched_other: u32,
    pub initial_paar: u32,
    pub planned_arrivals: u32,
    pub arr_rate: u32,
    pub act_arr: u32,
    pub final_paar: u32,
    pub realized_gd: u32,
    pub realized_ad: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportTotals {
    pub planned_gd_quarters: u64,
    pub realized_gd_quarters: u64,
    pub realized_ad_quarters: u64,
}

impl ReportTotals {
    pub fn planned_gd_hours(&self) -> f64 {
        hours(self.planned_gd_quarters)
    }

    pub fn realized_gd_hours(&self) -> f64 {
        hours(self.realized_gd_quarters)
    }

    pub fn realized_ad_hours(&self) -> f64 {
        hours(self.realized_ad_quarters)
    }
}

#[derive(Debug, Clone)]
pub struct GdpReport {
    pub rows: Vec<QuarterRow>,
    pub totals: ReportTotals,
    pub trace: EpisodeTrace,
}

/// Runs `policy` through `scenario` and tabulates the initial plan, the
/// planned arrivals after rationing, and what actually landed.
pub fn emit_gdp_report(scenario: &Scenario, policy: &dyn Policy, env_config: &EnvConfig) -> Result<GdpReport> {
    if scenario.quarters.len() != HORIZON {
        return Err(Invalid(format!(
            "scenario has {} quarters, expected {HORIZON}",
            scenario.quarters.len()
        ))
        .into());
    }
    let mut env = SagdpEnv::new(env_config.clone());
    let trace = run_episode(&mut env, scenario, policy)?;
    let plan = env
        .initial_plan()
        .cloned()
        .ok_or_else(|| anyhow::anyhow!("program was never released"))?;
    let final_paar = env.effective_paar_table();

    let mut rows: Vec<QuarterRow> = (0..HORIZON)
        .map(|t| QuarterRow {
            t,
            sched_controlled: 0,
            sched_other: 0,
            initial_paar: plan.paar[t],
            planned_arrivals: 0,
            arr_rate: scenario.quarters[t].arr_rate,
            act_arr: trace.steps[t].act_arr,
            final_paar: final_paar[t],
            realized_gd: trace.steps[t].realized_gd,
            realized_ad: trace.steps[t].realized_ad,
        })
        .collect();
    let mut planned_gd = 0u64;
    for ((class, f), &planned) in env.classes().iter().zip(scenario.arrivals()).zip(&plan.planned_arr) {
        let row = &mut rows[f.sched_arr as usize];
        if class.class == ClassKind::Controlled {
            row.sched_controlled += 1;
            planned_gd += (planned - f.sched_arr).max(0) as u64;
        } else {
            row.sched_other += 1;
        }
        if (0..HORIZON as i32).contains(&planned) {
            rows[planned as usize].planned_arrivals += 1;
        }
    }
    let totals = ReportTotals {
        planned_gd_quarters: planned_gd,
        realized_gd_quarters: trace.steps.iter().map(|s| s.realized_gd as u64).sum(),
        realized_ad_quarters: trace.steps.iter().map(|s| s.realized_ad as u64).sum(),
    };
    Ok(GdpReport { rows, totals, trace })
}

impl GdpReport {
    pub fn quarters_csv(&self) -> String {
        let mut s = String::from(
            "t,sched_controlled,sched_other,initial_paar,planned_arrivals,arr_rate,act_arr,final_paar,realized_gd,realized_ad\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.sched_controlled,
                r.sched_other,
                r.initial_paar,
                r.planned_arrivals,
                r.arr_rate,
                r.act_arr,
                r.final_paar,
                r.realized_gd,
                r.realized_ad
            );
        }
        s
    }

    pub fn totals_csv(&self) -> String {
        let t = &self.totals;
        format!(
            "metric,quarters,hours\nplanned_ground_delay,{},{}\nrealized_ground_delay,{},{}\nrealized_airborne_delay,{},{}\n",
            t.planned_gd_quarters,
            t.planned_gd_hours(),
            t.realized_gd_quarters,
            t.realized_gd_hours(),
            t.realized_ad_quarters,
            t.realized_ad_hours()
        )
    }

    pub fn trace_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for step in &self.trace.steps {
            s.push_str(&serde_json::to_string(step)?);
            s.push('\n');
        }
        Ok(s)
    }

    /// Three stacked panels: scheduled demand, planned arrivals, realized
    /// throughput.
    pub fn svg(&self) -> String {
        let (w, panel_h, gap) = (880.0, 220.0, 40.0);
        let (left, right) = (50.0, 20.0);
        let h = 3.0 * (panel_h + gap) + 20.0;
        let peak = self
            .rows
            .iter()
            .flat_map(|r| {
                [
                    r.sched_controlled + r.sched_other,
                    r.planned_arrivals,
                    r.act_arr,
                    r.arr_rate,
                    r.initial_paar,
                    r.final_paar,
                ]
            })
            .max()
            .unwrap_or(1)
            .max(1) as f64;
        let xs = Scale::new((0.0, HORIZON as f64), (left, w - right));
        let bar = (xs.at(1.0) - xs.at(0.0)) * 0.8;
        let mut svg = Svg::new(w, h);
        let t = &self.totals;
        let titles = [
            "Scheduled arrivals (controlled / other) and initial program rate".to_string(),
            format!(
                "Planned arrivals after rationing; planned ground delay {} h",
                t.planned_gd_hours()
            ),
            format!(
                "Realized arrivals vs capacity; ground delay {} h, airborne delay {} h",
                t.realized_gd_hours(),
                t.realized_ad_hours()
            ),
        ];
        for (k, title) in titles.iter().enumerate() {
            let top = 20.0 + k as f64 * (panel_h + gap);
            let base = top + panel_h;
            let ys = Scale::new((0.0, peak), (base, top + 14.0));
            svg.text(left, top + 8.0, 12.0, "start", title);
            svg.line(left, base, w - right, base, "black");
            svg.line(left, base, left, top + 14.0, "black");
            svg.text(left - 6.0, ys.at(peak) + 4.0, 10.0, "end", &format!("{peak:.0}"));
            for r in &self.rows {
                let x = xs.at(r.t as f64);
                match k {
                    0 => {
                        let c = r.sched_controlled as f64;
                        let o = r.sched_other as f64;
                        svg.rect(x, ys.at(c), bar, base - ys.at(c), "steelblue");
                        svg.rect(x, ys.at(c + o), bar, ys.at(c) - ys.at(c + o), "lightgray");
                    }
                    1 => {
                        let p = r.planned_arrivals as f64;
                        svg.rect(x, ys.at(p), bar, base - ys.at(p), "seagreen");
                    }
                    _ => {
                        let a = r.act_arr as f64;
                        svg.rect(x, ys.at(a), bar, base - ys.at(a), "darkorange");
                    }
                }
            }
            let step_line = |f: &dyn Fn(&QuarterRow) -> u32| -> Vec<(f64, f64)> {
                self.rows
                    .iter()
                    .flat_map(|r| {
                        let y = ys.at(f(r) as f64);
                        [(xs.at(r.t as f64), y), (xs.at(r.t as f64 + 1.0), y)]
                    })
                    .collect()
            };
            match k {
                0 => svg.polyline(&step_line(&|r| r.initial_paar), "firebrick", false),
                1 => svg.polyline(&step_line(&|r| r.initial_paar), "firebrick", true),
                _ => {
                    svg.polyline(&step_line(&|r| r.arr_rate), "black", false);
                    svg.polyline(&step_line(&|r| r.final_paar), "firebrick", true);
                }
            }
            svg.text(w / 2.0, base + 16.0, 10.0, "middle", "quarter");
        }
        svg.finish()
    }
}

pub fn train_log_csv(log: &[TrainLogRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut s = String::from("iter,train_loss,td_term,conservative_term,eval_mean,eval_std\n");
    for r in log {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.iter,
            r.train_loss,
            opt(r.td_term),
            opt(r.conservative_term),
            opt(r.eval_mean),
            opt(r.eval_std)
        );
    }
    s
}
