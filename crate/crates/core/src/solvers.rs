//! Subgradient, generalized gradient (fixed, scheduled or Armijo), accelerated
//! generalized gradient and level-projection methods with per-iteration traces.

use std::io::{self, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::finitemax::FiniteMaxProblem;
use crate::linalg::norm2;
use crate::scalar::Scalar;
use crate::steps::{armijo_gen_grad, gen_grad_step_lin, level_proj_step_lin, subgrad_step_lin};

/// Stepsize rules `α_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule<T> {
    Constant { eta: T },
    /// `η/√(k + 10)`.
    InverseSqrt { eta: T },
    /// `η/(k + 10)`.
    Inverse { eta: T },
    /// `D/(‖f(y_k)g_k‖√(T + 1))` for a horizon `T`.
    TheoremSubgrad { d: T, horizon: usize },
    /// `2/(μ(k + 2) + M⁴/(μ(k + 1)))`.
    TheoremSc { mu: T, m: T },
    /// `1/L`.
    InverseL { l: T },
}

impl<T: Scalar> StepSchedule<T> {
    /// Stepsize at iteration `k`; `step_norm` is `‖f(y_k)g_k‖`.
    pub fn alpha(&self, k: usize, step_norm: T) -> T {
        let kk = T::lit(k as f64);
        match *self {
            Self::Constant { eta } => eta,
            Self::InverseSqrt { eta } => eta / (kk + T::lit(10.0)).sqrt(),
            Self::Inverse { eta } => eta / (kk + T::lit(10.0)),
            Self::TheoremSubgrad { d, horizon } => {
                let root = T::lit((horizon + 1) as f64).sqrt();
                // A zero subgradient leaves the iterate fixed for any stepsize.
                if step_norm > T::zero() {
                    d / (step_norm * root)
                } else {
                    d / root
                }
            }
            Self::TheoremSc { mu, m } => {
                let m4 = m * m * m * m;
                T::lit(2.0) / (mu * (kk + T::lit(2.0)) + m4 / (mu * (kk + T::one())))
            }
            Self::InverseL { l } => l.recip(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// Objective became non-finite or exceeded the divergence factor.
    Diverged,
    /// The linearized level set was empty.
    InfeasibleTarget,
    /// Backtracking found no admissible step.
    Stalled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow<T> {
    pub iter: usize,
    pub time_s: f64,
    pub objective: T,
    pub half_sq_objective: T,
    pub best_so_far: T,
    pub feasible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace<T> {
    pub rows: Vec<TraceRow<T>>,
    pub status: RunStatus,
    pub final_point: Vec<T>,
    /// Recorded iterates when requested by [`RunOptions::keep_points`].
    pub points: Option<Vec<Vec<T>>>,
    /// `t_k` of the accelerated recursion (empty for other methods).
    pub t_values: Vec<T>,
}

pub const TRACE_HEADER: &str = "iter,time_s,objective,half_sq_objective,best_so_far,feasible";

impl<T: Scalar> Trace<T> {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{},{}", r.iter, r.time_s, r.objective, r.half_sq_objective, r.best_so_far, r.feasible)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn best(&self) -> T {
        self.rows.last().map_or(T::infinity(), |r| r.best_so_far)
    }

    /// First iteration with objective at most one.
    pub fn first_feasible(&self) -> Option<usize> {
        self.rows.iter().find(|r| r.feasible).map(|r| r.iter)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub keep_points: bool,
    /// Abort once the objective exceeds this multiple of its initial value.
    pub divergence_factor: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { keep_points: false, divergence_factor: 1e6 }
    }
}

struct Recorder<T> {
    start: Instant,
    rows: Vec<TraceRow<T>>,
    points: Option<Vec<Vec<T>>>,
    limit: T,
    best: T,
}

impl<T: Scalar> Recorder<T> {
    fn new(opts: &RunOptions, iters: usize) -> Self {
        Self {
            start: Instant::now(),
            rows: Vec::with_capacity(iters + 1),
            points: opts.keep_points.then(Vec::new),
            limit: T::lit(opts.divergence_factor),
            best: T::infinity(),
        }
    }

    /// Appends a row; returns `false` when the run diverged.
    fn record(&mut self, iter: usize, x: &[T], objective: T) -> bool {
        if let Some(p) = &mut self.points {
            p.push(x.to_vec());
        }
        if self.rows.is_empty() {
            self.limit = self.limit * objective.max(T::min_positive_value());
        }
        self.best = self.best.min(objective);
        self.rows.push(TraceRow {
            iter,
            time_s: self.start.elapsed().as_secs_f64(),
            objective,
            half_sq_objective: T::lit(0.5) * objective * objective,
            best_so_far: self.best,
            feasible: objective <= T::one(),
        });
        objective.is_finite() && objective <= self.limit
    }

    fn finish(self, status: RunStatus, final_point: Vec<T>, t_values: Vec<T>) -> Trace<T> {
        Trace { rows: self.rows, status, final_point, points: self.points, t_values }
    }
}

fn check_start<T: Scalar>(problem: &FiniteMaxProblem<T>, y0: &[T]) -> Result<()> {
    check_dim(problem.dim(), y0.len())
}

/// `y_{k+1} = y_k − α_k f(y_k)g_k`.
pub fn run_subgradient<T: Scalar>(problem: &FiniteMaxProblem<T>, y0: &[T], schedule: StepSchedule<T>, iters: usize) -> Result<Trace<T>> {
    run_subgradient_with(problem, y0, schedule, iters, &RunOptions::default())
}

pub fn run_subgradient_with<T: Scalar>(
    problem: &FiniteMaxProblem<T>,
    y0: &[T],
    schedule: StepSchedule<T>,
    iters: usize,
    opts: &RunOptions,
) -> Result<Trace<T>> {
    check_start(problem, y0)?;
    let mut rec = Recorder::new(opts, iters);
    let mut y = y0.to_vec();
    for k in 0..=iters {
        let lin = problem.linearize(&y)?;
        let (f, i) = lin.max();
        if !rec.record(k, &y, f) {
            return Ok(rec.finish(RunStatus::Diverged, y, Vec::new()));
        }
        if k == iters {
            break;
        }
        let alpha = schedule.alpha(k, norm2(&lin.subgrads[i]));
        y = subgrad_step_lin(&lin, &y, alpha).next_point;
    }
    Ok(rec.finish(RunStatus::Completed, y, Vec::new()))
}

/// `y_{k+1} = gen-grad(y_k, α_k)`.
pub fn run_gen_gradient<T: Scalar>(problem: &FiniteMaxProblem<T>, y0: &[T], schedule: StepSchedule<T>, iters: usize) -> Result<Trace<T>> {
    run_gen_gradient_with(problem, y0, schedule, iters, &RunOptions::default())
}

pub fn run_gen_gradient_with<T: Scalar>(
    problem: &FiniteMaxProblem<T>,
    y0: &[T],
    schedule: StepSchedule<T>,
    iters: usize,
    opts: &RunOptions,
) -> Result<Trace<T>> {
    check_start(problem, y0)?;
    let mut rec = Recorder::new(opts, iters);
    let mut y = y0.to_vec();
    for k in 0..=iters {
        let lin = problem.linearize(&y)?;
        let (f, i) = lin.max();
        if !rec.record(k, &y, f) {
            return Ok(rec.finish(RunStatus::Diverged, y, Vec::new()));
        }
        if k == iters {
            break;
        }
        let alpha = schedule.alpha(k, norm2(&lin.subgrads[i]));
        y = gen_grad_step_lin(&lin, &y, alpha)?.next_point;
    }
    Ok(rec.finish(RunStatus::Completed, y, Vec::new()))
}

/// Generalized gradient method with Armijo backtracking from `s̄` each step.
pub fn run_gen_gradient_armijo<T: Scalar>(
    problem: &FiniteMaxProblem<T>,
    y0: &[T],
    s_bar: T,
    tau: T,
    c: T,
    iters: usize,
    opts: &RunOptions,
) -> Result<Trace<T>> {
    check_start(problem, y0)?;
    let mut rec = Recorder::new(opts, iters);
    let mut y = y0.to_vec();
    for k in 0..=iters {
        let f = problem.eval(&y)?;
        if !rec.record(k, &y, f) {
            return Ok(rec.finish(RunStatus::Diverged, y, Vec::new()));
        }
        if k == iters {
            break;
        }
        let step = armijo_gen_grad(problem, &y, s_bar, tau, c)?;
        if step.stalled {
            return Ok(rec.finish(RunStatus::Stalled, y, Vec::new()));
        }
        y = step.next_point;
    }
    Ok(rec.finish(RunStatus::Completed, y, Vec::new()))
}

/// State of the accelerated recursion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccelState<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub t: T,
    pub gamma0: T,
}

/// `√(μ/L)` when `μ > 0` (a fixed point of the recursion), else `(√5 − 1)/2`.
pub fn default_t0<T: Scalar>(l: T, mu: T) -> T {
    if mu > T::zero() {
        (mu / l).sqrt().min(T::one())
    } else {
        (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0)
    }
}

/// `γ₀ = t₀(t₀L − μ)/(1 − t₀)`, with its limit `μ` at `t₀ = 1 = √(μ/L)`.
pub fn gamma0<T: Scalar>(l: T, mu: T, t0: T) -> T {
    if t0 >= T::one() {
        mu
    } else {
        t0 * (t0 * l - mu) / (T::one() - t0)
    }
}

/// Positive root of `t² − qt − (1 − t_k)t_k² = 0`, `q = μ/L`.
pub fn next_t<T: Scalar>(t: T, q: T) -> T {
    let c = (T::one() - t) * t * t;
    let disc = q * q + T::lit(4.0) * c;
    let root = if q >= T::zero() { (q + disc.sqrt()) / T::lit(2.0) } else { T::lit(2.0) * c / (disc.sqrt() - q) };
    root.max(T::lit(1e-12)).min(T::one())
}

/// Residual of `t_{k+1}² = (1 − t_k)t_k² + q t_{k+1}`.
pub fn t_recursion_residual<T: Scalar>(t: T, t_next: T, q: T) -> T {
    t_next * t_next - (T::one() - t) * t * t - q * t_next
}

impl<T: Scalar> AccelState<T> {
    pub fn new(y0: &[T], l: T, mu: T, t0: T) -> Self {
        Self { x: y0.to_vec(), y: y0.to_vec(), t: t0, gamma0: gamma0(l, mu, t0) }
    }
}

/// Accelerated generalized gradient method with stepsize `1/L`; the trace
/// records `f(x_k)`. `t0 = None` selects [`default_t0`].
pub fn run_accelerated<T: Scalar>(
    problem: &FiniteMaxProblem<T>,
    y0: &[T],
    l: T,
    mu: T,
    t0: Option<T>,
    iters: usize,
) -> Result<Trace<T>> {
    run_accelerated_with(problem, y0, l, mu, t0, iters, &RunOptions::default())
}

pub fn run_accelerated_with<T: Scalar>(
    problem: &FiniteMaxProblem<T>,
    y0: &[T],
    l: T,
    mu: T,
    t0: Option<T>,
    iters: usize,
    opts: &RunOptions,
) -> Result<Trace<T>> {
    check_start(problem, y0)?;
    if !(l > T::zero() && l.is_finite() && mu >= T::zero() && mu <= l) {
        return Err(Error::InvalidParameter("accelerated method needs 0 < L < inf and 0 <= mu <= L".into()));
    }
    let t0 = t0.unwrap_or_else(|| default_t0(l, mu));
    if !(t0 > T::zero() && t0 <= T::one()) {
        return Err(Error::InvalidParameter("t0 must lie in (0, 1]".into()));
    }
    let q = mu / l;
    let alpha = l.recip();
    let mut st = AccelState::new(y0, l, mu, t0);
    let mut rec = Recorder::new(opts, iters);
    let mut ts = vec![st.t];
    for k in 0..=iters {
        let fx = problem.eval(&st.x)?;
        if !rec.record(k, &st.x, fx) {
            return Ok(rec.finish(RunStatus::Diverged, st.x, ts));
        }
        if k == iters {
            break;
        }
        let lin = problem.linearize(&st.y)?;
        let x_next = gen_grad_step_lin(&lin, &st.y, alpha)?.next_point;
        let t_next = next_t(st.t, q);
        let beta = st.t * (T::one() - st.t) / (st.t * st.t + t_next);
        st.y = x_next.iter().zip(&st.x).map(|(&xn, &xo)| xn + beta * (xn - xo)).collect();
        st.x = x_next;
        st.t = t_next;
        ts.push(t_next);
    }
    Ok(rec.finish(RunStatus::Completed, st.x, ts))
}

/// Level-set projection method toward the target `f̄`.
pub fn run_level<T: Scalar>(problem: &FiniteMaxProblem<T>, y0: &[T], f_bar: T, iters: usize) -> Result<Trace<T>> {
    run_level_with(problem, y0, f_bar, iters, &RunOptions::default())
}

pub fn run_level_with<T: Scalar>(problem: &FiniteMaxProblem<T>, y0: &[T], f_bar: T, iters: usize, opts: &RunOptions) -> Result<Trace<T>> {
    check_start(problem, y0)?;
    let mut rec = Recorder::new(opts, iters);
    let mut y = y0.to_vec();
    for k in 0..=iters {
        let lin = problem.linearize(&y)?;
        if !rec.record(k, &y, lin.max().0) {
            return Ok(rec.finish(RunStatus::Diverged, y, Vec::new()));
        }
        if k == iters {
            break;
        }
        match level_proj_step_lin(&lin, &y, f_bar) {
            Ok(step) => y = step.next_point,
            Err(Error::EmptyLevelSet) => return Ok(rec.finish(RunStatus::InfeasibleTarget, y, Vec::new())),
            Err(e) => return Err(e),
        }
    }
    Ok(rec.finish(RunStatus::Completed, y, Vec::new()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow<T> {
    pub iter: usize,
    /// `min_{j≤k} f(y_j) − p*`.
    pub min_gap: T,
    /// `(½ min f² − ½p*²)/p*`, an upper bound on `min_gap`.
    pub squared_gap_bound: T,
}

pub fn gap_report<T: Scalar>(trace: &Trace<T>, p_star: T) -> Result<Vec<GapRow<T>>> {
    if !(p_star > T::zero()) {
        return Err(Error::InvalidParameter("p_star must be positive".into()));
    }
    let half = T::lit(0.5);
    Ok(trace
        .rows
        .iter()
        .map(|r| GapRow {
            iter: r.iter,
            min_gap: r.best_so_far - p_star,
            squared_gap_bound: (half * r.best_so_far * r.best_so_far - half * p_star * p_star) / p_star,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finitemax::feasibility_problem;
    use crate::gauge::GaugeOracle;
    use crate::sets::StructuredSet;

    fn norm_problem(centers: &[[f64; 2]]) -> FiniteMaxProblem<f64> {
        let oracles = centers
            .iter()
            .map(|c| GaugeOracle::new(StructuredSet::pnorm_ball(2.0, c.to_vec()).unwrap(), c.to_vec()).unwrap())
            .collect();
        feasibility_problem(oracles).unwrap()
    }

    #[test]
    fn schedules_are_positive() {
        let all = [
            StepSchedule::Constant { eta: 0.1 },
            StepSchedule::InverseSqrt { eta: 0.1 },
            StepSchedule::Inverse { eta: 0.1 },
            StepSchedule::TheoremSubgrad { d: 2.0, horizon: 10 },
            StepSchedule::TheoremSc { mu: 0.5, m: 1.0 },
            StepSchedule::InverseL { l: 4.0 },
        ];
        for s in all {
            for k in [0, 1, 10, 1000] {
                for norm in [0.0, 1.0] {
                    assert!(s.alpha(k, norm) > 0.0);
                }
            }
        }
        assert_eq!(StepSchedule::InverseSqrt { eta: 3.0 }.alpha(6, 1.0), 0.75);
    }

    #[test]
    fn one_step_to_the_minimizer() {
        let p = norm_problem(&[[0.0, 0.0]]);
        let t = run_subgradient(&p, &[1.0, 0.0], StepSchedule::Constant { eta: 1.0 }, 3).unwrap();
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.rows[1].objective, 0.0);
        let g = run_gen_gradient(&p, &[1.0, -2.0], StepSchedule::InverseL { l: 1.0 }, 2).unwrap();
        assert_eq!(g.rows[1].objective, 0.0);
    }

    #[test]
    fn accelerated_with_unit_condition_number_is_gradient_descent() {
        let p = norm_problem(&[[0.0, 0.0]]);
        let t = run_accelerated(&p, &[3.0, 4.0], 1.0, 1.0, None, 5).unwrap();
        assert!(t.t_values.iter().all(|&x| x == 1.0));
        assert!(t.rows[1].objective < 1e-15);
        // √(μ/L) is a fixed point.
        let q = 0.01f64;
        assert!((next_t(q.sqrt(), q) - q.sqrt()).abs() < 1e-15);
        assert!((gamma0(100.0f64, 1.0, 0.1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polyak_recursion_on_the_norm() {
        let p = norm_problem(&[[0.0, 0.0]]);
        let t = run_level(&p, &[2.0, 0.0], 1.0, 6).unwrap();
        let mut x = 2.0f64;
        for row in &t.rows {
            assert!((row.objective - x).abs() < 1e-14);
            if x > 1.0 {
                x -= (x * x - 1.0) / (2.0 * x);
            }
        }
        let feasible = run_level(&p, &[0.5, 0.0], 1.0, 3).unwrap();
        assert!(feasible.rows.iter().all(|r| r.objective == 0.5));
    }

    #[test]
    fn infeasible_target_and_divergence_flags() {
        let p = norm_problem(&[[1.0, 0.0], [-1.0, 0.0]]);
        let t = run_level(&p, &[0.0, 0.0], 0.1, 10).unwrap();
        assert_eq!(t.status, RunStatus::InfeasibleTarget);
        let q = norm_problem(&[[0.0, 0.0]]);
        let d = run_subgradient(&q, &[1.0, 0.0], StepSchedule::Constant { eta: 1e4 }, 10).unwrap();
        assert_eq!(d.status, RunStatus::Diverged);
    }

    #[test]
    fn csv_format() {
        let p = norm_problem(&[[0.0, 0.0]]);
        let mut t = run_subgradient(&p, &[0.1, 0.0], StepSchedule::Constant { eta: 0.5 }, 1).unwrap();
        for r in &mut t.rows {
            r.time_s = 0.25;
        }
        assert_eq!(t.to_csv(), format!("{TRACE_HEADER}\n0,0.25,0.1,0.005000000000000001,0.1,true\n1,0.25,0.05,0.0012500000000000002,0.05,true\n"));
    }

    #[test]
    fn gap_report_examples() {
        let p = norm_problem(&[[0.0, 0.0]]);
        let t = run_level(&p, &[0.5, 0.0], 1.0, 3).unwrap();
        assert!(gap_report(&t, 0.5).unwrap().iter().all(|g| g.min_gap == 0.0 && g.squared_gap_bound == 0.0));
    }
}
