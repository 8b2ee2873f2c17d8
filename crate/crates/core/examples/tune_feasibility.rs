//! Tunes every method's parameters for the three feasibility settings on
//! held-out seeds, to two significant figures.
//!
//! Score: median over the tuning seeds of the summed `log10` squared gap
//! along the trace, with gaps clipped at the reference resolution. Lower is
//! better; it rewards both speed and final accuracy.
//!
//! `cargo run --release --example tune_feasibility`

use gaugeopt::experiment::{generate_feasibility, MethodConfig};
use gaugeopt::solvers::{RunOptions, StepSchedule};
use gaugeopt::Problem;

const RESOLUTION: f64 = 1e-12;
const TUNING_SEEDS: std::ops::Range<u64> = 1000..1004;

struct Case {
    problem: Problem,
    start: Vec<f64>,
    p_star: f64,
}

fn score(cases: &[Case], method: MethodConfig, iters: usize) -> f64 {
    let mut s: Vec<f64> = cases
        .iter()
        .map(|c| match method.run(&c.problem, &c.start, iters, &RunOptions::default()) {
            Ok(t) if t.rows.len() == iters + 1 => t
                .rows
                .iter()
                .map(|r| (0.5 * r.best_so_far * r.best_so_far - 0.5 * c.p_star * c.p_star).max(RESOLUTION).log10())
                .sum(),
            _ => f64::INFINITY,
        })
        .collect();
    s.sort_by(|a, b| a.total_cmp(b));
    s[s.len() / 2]
}

/// Coarse `{1, 2, 5}·10^k` sweep followed by a two-significant-figure
/// refinement around the winner.
fn tune1(f: impl Fn(f64) -> f64, lo: i32, hi: i32) -> (f64, f64) {
    let coarse: Vec<f64> = (lo..=hi).flat_map(|k| [1.0, 2.0, 5.0].map(|m| m * 10f64.powi(k))).collect();
    let mut best = coarse.iter().map(|&v| (f(v), v)).min_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
    let base = best.1;
    let mag = 10f64.powi(base.log10().floor() as i32 - 1);
    for step in -6..=8 {
        let v = ((base / mag).round() + step as f64 * (base / mag / 10.0).max(1.0).round()) * mag;
        if v > 0.0 {
            let s = f(v);
            if s < best.0 {
                best = (s, v);
            }
        }
    }
    (two_sig(best.1), best.0)
}

/// Rounds away the float noise of the refinement grid.
fn two_sig(v: f64) -> f64 {
    format!("{v:.1e}").parse().unwrap()
}

fn main() {
    for ((p1, p2), iters) in [((1.5, 1.8), 2000), ((2.0, 2.0), 500), ((3.0, 4.0), 2000)] {
        let cases: Vec<Case> = TUNING_SEEDS
            .map(|s| {
                let inst = generate_feasibility(100, p1, p2, s).unwrap();
                Case { problem: inst.problem().unwrap(), start: inst.start(), p_star: inst.reference(1e-12).unwrap().1 }
            })
            .collect();
        println!("p = ({p1}, {p2}), {iters} iterations");
        let sub_c = tune1(|e| score(&cases, MethodConfig::Subgrad { schedule: StepSchedule::Constant { eta: e } }, iters), -3, 1);
        let sub_s = tune1(|e| score(&cases, MethodConfig::Subgrad { schedule: StepSchedule::InverseSqrt { eta: e } }, iters), -3, 1);
        let gg_c = tune1(|e| score(&cases, MethodConfig::Gengrad { schedule: StepSchedule::Constant { eta: e } }, iters), -3, 1);
        let gg_s = tune1(|e| score(&cases, MethodConfig::Gengrad { schedule: StepSchedule::InverseSqrt { eta: e } }, iters), -3, 1);
        println!("  subgrad constant eta = {} ({:.1})", sub_c.0, sub_c.1);
        println!("  subgrad inverse-sqrt eta = {} ({:.1})", sub_s.0, sub_s.1);
        println!("  gengrad constant eta = {} ({:.1})", gg_c.0, gg_c.1);
        println!("  gengrad inverse-sqrt eta = {} ({:.1})", gg_s.0, gg_s.1);
        // L first with mu = 0, then mu at that L, then L again.
        let (l0, _) = tune1(|l| score(&cases, MethodConfig::Accel { l, mu: 0.0 }, iters), -1, 3);
        let (mu, _) = tune1(|mu| if mu > l0 { f64::INFINITY } else { score(&cases, MethodConfig::Accel { l: l0, mu }, iters) }, -5, 1);
        let (l, s) = tune1(|l| if mu > l { f64::INFINITY } else { score(&cases, MethodConfig::Accel { l, mu }, iters) }, -1, 3);
        println!("  accel L = {l}, mu = {mu} ({s:.1})");
    }
}
