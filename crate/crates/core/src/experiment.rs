//! Synthetic instances from the numerical section (intersecting `p`-norm
//! regression ellipsoids and quadratic trust-region problems) and a runner
//! that applies one method and writes a trace plus a JSON summary.
//!
//! All randomness comes from ChaCha8 seeded with the instance seed, with one
//! stream per generated array so instances are reproducible across
//! implementations.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finitemax::{feasibility_problem, radial_dual_problem, recenter, FiniteMaxProblem, QuadraticObjective};
use crate::gauge::GaugeOracle;
use crate::linalg::{norm_p, solve_dense, symmetric_eigenvalues, Matrix};
use crate::sets::StructuredSet;
use crate::solvers::{
    run_accelerated_with, run_gen_gradient_with, run_level_with, run_subgradient_with, RunOptions, RunStatus, StepSchedule,
    Trace,
};
use crate::verify::{reference_feasibility, reference_trust_region};

/// Stream ids, one per generated array.
mod stream {
    pub const X: u64 = 1;
    pub const A: u64 = 10;
    pub const NOISE: u64 = 20;
    pub const QUANTILE: u64 = 30;
    pub const Q: u64 = 40;
    pub const C: u64 = 41;
    pub const TR_A: u64 = 42;
    pub const TR_X: u64 = 43;
    pub const TR_EPS: u64 = 44;
}

/// Monte Carlo samples behind each radius quantile.
pub const QUANTILE_SAMPLES: usize = 2000;
/// Target probability that the true point lies in each set.
pub const COVERAGE: f64 = 0.975;
/// CG iterations used to recenter.
pub const RECENTER_ITERS: usize = 30;

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Generalized normal variate with density proportional to `exp(−|x|^β)`:
/// `sign · G^{1/β}` with `G ~ Gamma(1/β, 1)`. For `β = 2` this is `N(0, ½)`.
pub fn generalized_normal<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(1.0 / beta, 1.0).expect("positive shape").sample(rng);
    let mag: f64 = g.powf(1.0 / beta);
    if rng.gen::<bool>() {
        mag
    } else {
        -mag
    }
}

fn gaussian_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix<f64> {
    Matrix::new(rows, cols, gaussian_vec(rows * cols, rng)).expect("shape matches")
}

fn residual(a: &Matrix<f64>, x: &[f64], b: &[f64]) -> Vec<f64> {
    a.matvec(x).expect("shape matches").iter().zip(b).map(|(u, v)| u - v).collect()
}

/// Recentering point for `‖Ax − b‖_p ≤ τ`: CG first, then an exact
/// (minimum-norm when `A` is wide) solution of `Ax = b` whenever the CG point
/// is not well inside the set.
pub fn interior_center(a: &Matrix<f64>, b: &[f64], p: f64, tau: f64) -> Result<Vec<f64>> {
    let e = recenter(a, b, RECENTER_ITERS)?;
    if norm_p(&residual(a, &e, b), p) < 0.5 * tau {
        return Ok(e);
    }
    let exact = if a.rows() >= a.cols() {
        solve_dense(&a.gram(), &a.tmatvec(b)?)
    } else {
        let aat = a.matmul(&a.transpose())?;
        solve_dense(&aat, b).map(|w| a.tmatvec(&w).expect("shape matches"))
    };
    let e = exact.ok_or_else(|| Error::InvalidParameter("could not find an interior center".into()))?;
    if norm_p(&residual(a, &e, b), p) < tau {
        Ok(e)
    } else {
        Err(Error::NotInterior)
    }
}

/// Two `p`-norm regression ellipsoids `‖A_i x − b_i‖_{p_i} ≤ τ_i` around a
/// common true point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityInstance {
    pub seed: u64,
    pub n: usize,
    pub p: Vec<f64>,
    pub x_true: Vec<f64>,
    pub sets: Vec<StructuredSet<f64>>,
    pub centers: Vec<Vec<f64>>,
}

/// `τ` such that `‖ε‖_p ≤ τ` with probability [`COVERAGE`] for `ε` with iid
/// generalized normal entries.
pub fn coverage_radius<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> f64 {
    let mut norms: Vec<f64> =
        (0..QUANTILE_SAMPLES).map(|_| norm_p(&(0..n).map(|_| generalized_normal(p, rng)).collect::<Vec<_>>(), p)).collect();
    norms.sort_by(|a, b| a.total_cmp(b));
    let idx = ((COVERAGE * QUANTILE_SAMPLES as f64).ceil() as usize).saturating_sub(1);
    norms[idx]
}

pub fn generate_feasibility(n: usize, p1: f64, p2: f64, seed: u64) -> Result<FeasibilityInstance> {
    if n < 2 {
        return Err(Error::InvalidParameter("n must be at least 2".into()));
    }
    for p in [p1, p2] {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p must lie in (1, inf), got {p}")));
        }
    }
    let x_true = gaussian_vec(n, &mut rng(seed, stream::X));
    let mut sets = Vec::new();
    let mut centers = Vec::new();
    for (i, &p) in [p1, p2].iter().enumerate() {
        let i = i as u64;
        let a = gaussian_matrix(n, n, &mut rng(seed, stream::A + i));
        let mut noise_rng = rng(seed, stream::NOISE + i);
        let eps: Vec<f64> = (0..n).map(|_| generalized_normal(p, &mut noise_rng)).collect();
        let b: Vec<f64> = a.matvec(&x_true)?.iter().zip(&eps).map(|(u, v)| u + v).collect();
        let tau = coverage_radius(n, p, &mut rng(seed, stream::QUANTILE + i));
        centers.push(interior_center(&a, &b, p, tau)?);
        sets.push(StructuredSet::pnorm_ellipsoid(a, b, p, tau)?);
    }
    Ok(FeasibilityInstance { seed, n, p: vec![p1, p2], x_true, sets, centers })
}

impl FeasibilityInstance {
    pub fn oracles(&self) -> Result<Vec<GaugeOracle<f64>>> {
        self.sets.iter().zip(&self.centers).map(|(s, e)| GaugeOracle::new(s.clone(), e.clone())).collect()
    }

    pub fn problem(&self) -> Result<FiniteMaxProblem<f64>> {
        feasibility_problem(self.oracles()?)
    }

    /// Average of the set centers.
    pub fn start(&self) -> Vec<f64> {
        let k = self.centers.len() as f64;
        (0..self.n).map(|j| self.centers.iter().map(|c| c[j]).sum::<f64>() / k).collect()
    }

    pub fn x_true_feasible(&self) -> Result<bool> {
        for s in &self.sets {
            if !s.contains(&self.x_true)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Reference `(y*, p*)`: the barrier solution, evaluated exactly and
    /// polished by monotone generalized gradient steps when the certified
    /// smoothness is finite.
    pub fn reference(&self, gap: f64) -> Result<(Vec<f64>, f64)> {
        let (y, t) = reference_feasibility(&self.oracles()?, gap)?;
        let problem = self.problem()?;
        let mut best = (y.clone(), t.min(problem.eval(&y)?));
        if problem.l.is_finite() {
            let opts = RunOptions { keep_points: true, ..RunOptions::default() };
            let trace = run_gen_gradient_with(&problem, &y, StepSchedule::InverseL { l: problem.l }, 200, &opts)?;
            let points = trace.points.unwrap_or_default();
            for (row, pt) in trace.rows.iter().zip(points) {
                if row.objective < best.1 {
                    best = (pt, row.objective);
                }
            }
        }
        Ok(best)
    }
}

/// `max 1 − ½xᵀQx − cᵀx` subject to `‖Ax − b‖_p ≤ 1`, together with its
/// recentered form (constraint centered at the origin, objective equal to one
/// there).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrustRegionInstance {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub p: f64,
    pub objective: QuadraticObjective<f64>,
    pub constraint: StructuredSet<f64>,
    /// Recentering point `e`; `x = x' + e`.
    pub center: Vec<f64>,
    pub recentered_objective: QuadraticObjective<f64>,
    pub recentered_constraint: StructuredSet<f64>,
    /// `K` with `f(x) = f̃(x') − K`.
    pub shift: f64,
}

pub fn generate_trust_region(n: usize, m: usize, p: f64, seed: u64) -> Result<TrustRegionInstance> {
    if n < 2 || m < 2 {
        return Err(Error::InvalidParameter("dimensions must be at least 2".into()));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p must lie in (1, inf), got {p}")));
    }
    let g = gaussian_matrix(n, n, &mut rng(seed, stream::Q));
    let mut q = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            q[(i, j)] = 0.5 * (g[(i, j)] + g[(j, i)]);
        }
    }
    let lmin = symmetric_eigenvalues(&q)?[0];
    for i in 0..n {
        q[(i, i)] += (-lmin).max(0.0);
    }
    let c = gaussian_vec(n, &mut rng(seed, stream::C));
    let a = gaussian_matrix(m, n, &mut rng(seed, stream::TR_A));
    let x_feas = gaussian_vec(n, &mut rng(seed, stream::TR_X));
    let eps = gaussian_vec(m, &mut rng(seed, stream::TR_EPS));
    let b: Vec<f64> = a.matvec(&x_feas)?.iter().zip(&eps).map(|(u, v)| u + v / m as f64).collect();
    let objective = QuadraticObjective::new(q, c)?;
    let center = interior_center(&a, &b, p, 1.0)?;
    let (recentered_objective, shift) = objective.recentered(&center)?;
    let b_shift = residual(&a, &center, &b).iter().map(|r| -r).collect();
    let recentered_constraint = StructuredSet::pnorm_ellipsoid(a.clone(), b_shift, p, 1.0)?;
    let constraint = StructuredSet::pnorm_ellipsoid(a, b, p, 1.0)?;
    Ok(TrustRegionInstance { seed, n, m, p, objective, constraint, center, recentered_objective, recentered_constraint, shift })
}

impl TrustRegionInstance {
    /// Radial dual `max{f̃^Γ, γ_S}` of the recentered problem.
    pub fn problem(&self) -> Result<FiniteMaxProblem<f64>> {
        let oracle = GaugeOracle::at_origin(self.recentered_constraint.clone())?;
        radial_dual_problem(self.recentered_objective.clone(), oracle)
    }

    /// Primal point and original objective value from a dual point.
    pub fn recover(&self, problem: &FiniteMaxProblem<f64>, y: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (xs, _) = crate::finitemax::recover_primal(problem, y)?;
        let x: Vec<f64> = xs.iter().zip(&self.center).map(|(a, b)| a + b).collect();
        let value = self.objective.value(&x)?;
        Ok((x, value))
    }

    /// Constraint gauge of an original-space point about the center.
    pub fn constraint_gauge(&self, x: &[f64]) -> Result<f64> {
        let xs: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        GaugeOracle::at_origin(self.recentered_constraint.clone())?.value(&xs)
    }

    /// Reference maximizer and value from the barrier solver.
    pub fn reference(&self, gap: f64) -> Result<(Vec<f64>, f64)> {
        reference_trust_region(&self.objective, &self.constraint, &self.center, gap)
    }
}

/// Serialized problem instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemInstance {
    Feasibility(FeasibilityInstance),
    RadialQuadratic(TrustRegionInstance),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Subgrad,
    Gengrad,
    Accel,
    Level,
}

/// A method together with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodConfig {
    Subgrad { schedule: StepSchedule<f64> },
    Gengrad { schedule: StepSchedule<f64> },
    Accel { l: f64, mu: f64 },
    Level { f_bar: f64 },
}

impl MethodConfig {
    pub fn method(&self) -> Method {
        match self {
            Self::Subgrad { .. } => Method::Subgrad,
            Self::Gengrad { .. } => Method::Gengrad,
            Self::Accel { .. } => Method::Accel,
            Self::Level { .. } => Method::Level,
        }
    }

    pub fn run(&self, problem: &FiniteMaxProblem<f64>, y0: &[f64], iters: usize, opts: &RunOptions) -> Result<Trace<f64>> {
        match *self {
            Self::Subgrad { schedule } => run_subgradient_with(problem, y0, schedule, iters, opts),
            Self::Gengrad { schedule } => run_gen_gradient_with(problem, y0, schedule, iters, opts),
            Self::Accel { l, mu } => run_accelerated_with(problem, y0, l, mu, None, iters, opts),
            Self::Level { f_bar } => run_level_with(problem, y0, f_bar, iters, opts),
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub method: MethodConfig,
    pub iters: usize,
    /// Trace CSV destination; nothing is written when absent.
    pub out_path: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Feasibility { n: usize, p1: f64, p2: f64, seed: u64 },
    TrustRegion { n: usize, m: usize, p: f64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: Method,
    pub status: RunStatus,
    pub iterations: usize,
    pub final_best: f64,
    pub elapsed_s: f64,
    /// First iteration with objective at most one (feasibility only).
    pub first_feasible: Option<usize>,
    /// Recovered primal objective (trust region only).
    pub primal_objective: Option<f64>,
    /// Constraint gauge of the recovered primal point (trust region only).
    pub primal_gauge: Option<f64>,
}

/// Builds the instance, runs the method, writes the trace and returns the
/// summary together with the trace.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(Summary, Trace<f64>)> {
    let opts = RunOptions::default();
    let (trace, primal) = match config.problem {
        ProblemSpec::Feasibility { n, p1, p2, seed } => {
            let inst = generate_feasibility(n, p1, p2, seed)?;
            let problem = inst.problem()?;
            (config.method.run(&problem, &inst.start(), config.iters, &opts)?, None)
        }
        ProblemSpec::TrustRegion { n, m, p, seed } => {
            let inst = generate_trust_region(n, m, p, seed)?;
            let problem = inst.problem()?;
            let trace = config.method.run(&problem, &vec![0.0; n], config.iters, &opts)?;
            let primal = match trace.status {
                RunStatus::Diverged => None,
                _ => {
                    let (x, v) = inst.recover(&problem, &trace.final_point)?;
                    Some((v, inst.constraint_gauge(&x)?))
                }
            };
            (trace, primal)
        }
    };
    if let Some(path) = &config.out_path {
        let file = File::create(path).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
        trace.write_csv(BufWriter::new(file)).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    }
    let summary = Summary {
        method: config.method.method(),
        status: trace.status,
        iterations: trace.rows.last().map_or(0, |r| r.iter),
        final_best: trace.best(),
        elapsed_s: trace.rows.last().map_or(0.0, |r| r.time_s),
        first_feasible: match config.problem {
            ProblemSpec::Feasibility { .. } => trace.first_feasible(),
            ProblemSpec::TrustRegion { .. } => None,
        },
        primal_objective: primal.map(|p| p.0),
        primal_gauge: primal.map(|p| p.1),
    };
    Ok((summary, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generalized_normal_shape_two_is_gaussian_half_variance() {
        let mut r = rng(3, 0);
        let xs: Vec<f64> = (0..200_000).map(|_| generalized_normal(2.0, &mut r)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        let kurt = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / xs.len() as f64 / (var * var);
        assert!(mean.abs() < 0.01);
        assert!((var - 0.5).abs() < 0.01);
        assert!((kurt - 3.0).abs() < 0.05);
    }

    #[test]
    fn feasibility_instance_is_deterministic_and_centered() {
        let a = generate_feasibility(12, 1.5, 3.0, 9).unwrap();
        let b = generate_feasibility(12, 1.5, 3.0, 9).unwrap();
        assert_eq!(a, b);
        for (s, e) in a.sets.iter().zip(&a.centers) {
            assert!(s.contains(e).unwrap());
        }
        assert_ne!(a, generate_feasibility(12, 1.5, 3.0, 10).unwrap());
    }

    #[test]
    fn trust_region_instance_is_interior_and_psd() {
        let t = generate_trust_region(10, 5, 4.0, 2).unwrap();
        assert!(symmetric_eigenvalues(t.objective.q()).unwrap()[0] >= -1e-12);
        let g = GaugeOracle::at_origin(t.recentered_constraint.clone()).unwrap();
        assert!(g.value(&[0.0; 10]).unwrap() < 1.0);
        assert!((t.recentered_objective.value(&[0.0; 10]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(t, generate_trust_region(10, 5, 4.0, 2).unwrap());
    }

    #[test]
    fn instance_json_roundtrip() {
        let inst = ProblemInstance::RadialQuadratic(generate_trust_region(4, 2, 2.0, 1).unwrap());
        let js = serde_json::to_string(&inst).unwrap();
        assert!(js.starts_with("{\"kind\":\"radial_quadratic\""));
        let back: ProblemInstance = serde_json::from_str(&js).unwrap();
        assert_eq!(back, inst);
    }
}
