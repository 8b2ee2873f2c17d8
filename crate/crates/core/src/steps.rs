//! The three first-order oracles on `maxᵢ ½fᵢ²`: subgradient, generalized
//! (prox-linear) gradient and level-set projection steps, plus an Armijo
//! backtracking wrapper for the generalized gradient step.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::finitemax::{FiniteMaxProblem, Linearization};
use crate::linalg::{self, dot, norm2_sq, solve_dense, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepResult<T> {
    pub next_point: Vec<T>,
    pub active_components: Vec<usize>,
    /// Weights on `active_components`; a convex combination for gradient
    /// steps, nonnegative projection multipliers for level steps.
    pub multipliers: Vec<T>,
    /// Decrease of the step's model from its value at `y`.
    pub model_decrease: T,
    /// Stepsize actually used (differs from the request only under Armijo).
    pub step_size: T,
    /// Set when backtracking found no admissible stepsize.
    pub stalled: bool,
}

/// `½fᵢ²(y)` and `vᵢ = fᵢ(y)gᵢ` for each component.
fn model_data<T: Scalar>(lin: &Linearization<T>) -> (Vec<T>, &[Vec<T>]) {
    let h = lin.values.iter().map(|&f| T::lit(0.5) * f * f).collect();
    (h, &lin.subgrads)
}

fn gram<T: Scalar>(v: &[Vec<T>]) -> Vec<Vec<T>> {
    v.iter().map(|a| v.iter().map(|b| dot(a, b)).collect()).collect()
}

/// `y − Σ λᵢ vᵢ` over a support.
fn combine<T: Scalar>(y: &[T], v: &[Vec<T>], support: &[usize], weights: &[T], scale: T) -> Vec<T> {
    let mut z = y.to_vec();
    for (&i, &w) in support.iter().zip(weights) {
        linalg::axpy(-scale * w, &v[i], &mut z);
    }
    z
}

/// `maxᵢ {hᵢ + vᵢᵀd}`.
fn model_max<T: Scalar>(h: &[T], v: &[Vec<T>], d: &[T]) -> T {
    h.iter().zip(v).map(|(&hi, vi)| hi + dot(vi, d)).fold(T::neg_infinity(), T::max)
}

/// `y − α f(y) g` with `g` from the lowest-index component attaining the max.
pub fn subgrad_step<T: Scalar>(problem: &FiniteMaxProblem<T>, y: &[T], alpha: T) -> Result<StepResult<T>> {
    let lin = problem.linearize(y)?;
    Ok(subgrad_step_lin(&lin, y, alpha))
}

pub fn subgrad_step_lin<T: Scalar>(lin: &Linearization<T>, y: &[T], alpha: T) -> StepResult<T> {
    let (_, i) = lin.max();
    let v = &lin.subgrads[i];
    let next_point = combine(y, std::slice::from_ref(v), &[0], &[T::one()], alpha);
    StepResult {
        next_point,
        active_components: vec![i],
        multipliers: vec![T::one()],
        model_decrease: alpha * norm2_sq(v),
        step_size: alpha,
        stalled: false,
    }
}

/// Minimizer of `maxᵢ{½fᵢ²(y) + fᵢ(y)gᵢᵀ(z − y)} + ‖z − y‖²/(2α)`.
pub fn gen_grad_step<T: Scalar>(problem: &FiniteMaxProblem<T>, y: &[T], alpha: T) -> Result<StepResult<T>> {
    let lin = problem.linearize(y)?;
    gen_grad_step_lin(&lin, y, alpha)
}

pub fn gen_grad_step_lin<T: Scalar>(lin: &Linearization<T>, y: &[T], alpha: T) -> Result<StepResult<T>> {
    if !(alpha > T::zero()) {
        return Err(Error::InvalidParameter("stepsize must be positive".into()));
    }
    let (h, v) = model_data(lin);
    let (support, weights) = match lin.len() {
        1 => (vec![0], vec![T::one()]),
        2 => gen_grad_pair(&h, v, alpha),
        m if m <= 8 => gen_grad_enumerate(&h, v, alpha)?,
        m => return Err(Error::Unsupported(format!("{m} components exceed the enumeration limit of 8"))),
    };
    let next_point = combine(y, v, &support, &weights, alpha);
    let d = linalg::sub(&next_point, y);
    let model = model_max(&h, v, &d) + norm2_sq(&d) / (T::lit(2.0) * alpha);
    let top = h.iter().copied().fold(T::neg_infinity(), T::max);
    Ok(StepResult {
        next_point,
        active_components: support,
        multipliers: weights,
        model_decrease: top - model,
        step_size: alpha,
        stalled: false,
    })
}

/// Three-branch closed form for two components. The blend weight solves
/// `h₁ − αv₁ᵀw = h₂ − αv₂ᵀw` for `w = (1 − θ)v₁ + θv₂`.
fn gen_grad_pair<T: Scalar>(h: &[T], v: &[Vec<T>], alpha: T) -> (Vec<usize>, Vec<T>) {
    let (v1, v2) = (&v[0], &v[1]);
    let diff = linalg::sub(v1, v2);
    // Model gap h₁ − h₂ + (v₁ − v₂)ᵀd at the single-component steps d = −αvᵢ.
    let gap_at = |vi: &[T]| h[0] - h[1] - alpha * dot(&diff, vi);
    if gap_at(v1) > T::zero() {
        return (vec![0], vec![T::one()]);
    }
    if gap_at(v2) < T::zero() {
        return (vec![1], vec![T::one()]);
    }
    let dd = norm2_sq(&diff);
    if dd == T::zero() {
        return (vec![0], vec![T::one()]);
    }
    let theta = ((h[1] - h[0]) / alpha + dot(&diff, v1)) / dd;
    let theta = theta.max(T::zero()).min(T::one());
    (vec![0, 1], vec![T::one() - theta, theta])
}

/// Candidate supports in increasing size, then lexicographic order.
fn supports(m: usize) -> Vec<Vec<usize>> {
    let mut all: Vec<Vec<usize>> =
        (1u32..(1 << m)).map(|mask| (0..m).filter(|&i| mask & (1 << i) != 0).collect()).collect();
    all.sort_by_key(|s| s.len());
    all
}

/// Dual of the prox-linear subproblem over the simplex, solved by KKT
/// support enumeration.
fn gen_grad_enumerate<T: Scalar>(h: &[T], v: &[Vec<T>], alpha: T) -> Result<(Vec<usize>, Vec<T>)> {
    let g = gram(v);
    let tol = T::lit(1e-10) * T::one().max(h.iter().fold(T::zero(), |a, &b| a.max(b.abs())));
    let mut best: Option<(T, Vec<usize>, Vec<T>)> = None;
    for s in supports(h.len()) {
        let k = s.len();
        // [αG_SS  1; 1ᵀ 0][λ; ν] = [h_S; 1]
        let mut a = Matrix::zeros(k + 1, k + 1);
        let mut rhs = vec![T::zero(); k + 1];
        for (r, &i) in s.iter().enumerate() {
            for (c, &j) in s.iter().enumerate() {
                a[(r, c)] = alpha * g[i][j];
            }
            a[(r, k)] = T::one();
            a[(k, r)] = T::one();
            rhs[r] = h[i];
        }
        rhs[k] = T::one();
        let Some(sol) = solve_dense(&a, &rhs) else { continue };
        let lam = &sol[..k];
        if lam.iter().any(|&l| l < -T::lit(1e-12)) {
            continue;
        }
        let nu = sol[k];
        let w: Vec<T> = (0..h.len()).map(|i| s.iter().zip(lam).map(|(&j, &l)| l * g[i][j]).sum()).collect();
        let ok = (0..h.len()).all(|i| s.contains(&i) || h[i] - alpha * w[i] <= nu + tol);
        if !ok {
            continue;
        }
        let dual = s.iter().zip(lam).map(|(&i, &l)| l * h[i]).sum::<T>()
            - T::lit(0.5) * alpha * s.iter().zip(lam).map(|(&i, &l)| l * w[i]).sum::<T>();
        if best.as_ref().map_or(true, |b| dual > b.0 + tol) {
            let lam: Vec<T> = lam.iter().map(|&l| l.max(T::zero())).collect();
            let total: T = lam.iter().copied().sum();
            best = Some((dual, s.clone(), lam.iter().map(|&l| l / total).collect()));
        }
    }
    best.map(|(_, s, l)| (s, l)).ok_or_else(|| Error::NoConvergence("no KKT support for the prox-linear step".into()))
}

/// Projection of `y` onto `{z : ½fᵢ²(y) + fᵢ(y)gᵢᵀ(z − y) ≤ ½f̄² ∀i}`.
pub fn level_proj_step<T: Scalar>(problem: &FiniteMaxProblem<T>, y: &[T], f_bar: T) -> Result<StepResult<T>> {
    let lin = problem.linearize(y)?;
    level_proj_step_lin(&lin, y, f_bar)
}

pub fn level_proj_step_lin<T: Scalar>(lin: &Linearization<T>, y: &[T], f_bar: T) -> Result<StepResult<T>> {
    if !(f_bar > T::zero()) {
        return Err(Error::InvalidParameter("target level must be positive".into()));
    }
    let (h, v) = model_data(lin);
    let target = T::lit(0.5) * f_bar * f_bar;
    let delta: Vec<T> = h.iter().map(|&hi| hi - target).collect();
    let (support, weights) = if delta.iter().all(|&d| d <= T::zero()) {
        (Vec::new(), Vec::new())
    } else {
        match lin.len() {
            1 => (vec![0], vec![delta[0] / norm2_sq(&v[0])]),
            2 => level_pair(&delta, v)?,
            m if m <= 8 => level_enumerate(&delta, v)?,
            m => return Err(Error::Unsupported(format!("{m} components exceed the enumeration limit of 8"))),
        }
    };
    let next_point = combine(y, v, &support, &weights, T::one());
    let d = linalg::sub(&next_point, y);
    let top = h.iter().copied().fold(T::neg_infinity(), T::max);
    Ok(StepResult {
        model_decrease: top - model_max(&h, v, &d),
        next_point,
        active_components: support,
        multipliers: weights,
        step_size: T::one(),
        stalled: false,
    })
}

/// Closed form for two linearized constraints `δᵢ − vᵢᵀw ≤ 0`.
fn level_pair<T: Scalar>(delta: &[T], v: &[Vec<T>]) -> Result<(Vec<usize>, Vec<T>)> {
    let g = gram(v);
    let scale = T::one().max(delta[0].abs()).max(delta[1].abs());
    let tol = T::lit(1e-12) * scale;
    // Single-constraint projection i, checked against constraint j.
    let single = |i: usize, j: usize| -> Option<T> {
        if delta[i] <= T::zero() || g[i][i] == T::zero() {
            return None;
        }
        let lam = delta[i] / g[i][i];
        (delta[j] - lam * g[j][i] <= tol).then_some(lam)
    };
    if let Some(l) = single(0, 1) {
        return Ok((vec![0], vec![l]));
    }
    if let Some(l) = single(1, 0) {
        return Ok((vec![1], vec![l]));
    }
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    if det.abs() <= T::lit(1e-14) * g[0][0] * g[1][1] {
        // Parallel linearizations: the deeper violation decides, if the
        // resulting set is nonempty.
        let i = if delta[0] >= delta[1] { 0 } else { 1 };
        let j = 1 - i;
        if g[i][i] > T::zero() {
            let lam = delta[i] / g[i][i];
            if delta[j] - lam * g[j][i] <= T::lit(1e-8) * scale {
                return Ok((vec![i], vec![lam]));
            }
        }
        return Err(Error::EmptyLevelSet);
    }
    let l1 = (g[1][1] * delta[0] - g[0][1] * delta[1]) / det;
    let l2 = (g[0][0] * delta[1] - g[1][0] * delta[0]) / det;
    if l1 < -T::lit(1e-8) * l1.abs().max(l2.abs()) || l2 < -T::lit(1e-8) * l1.abs().max(l2.abs()) {
        return Err(Error::EmptyLevelSet);
    }
    Ok((vec![0, 1], vec![l1.max(T::zero()), l2.max(T::zero())]))
}

/// Projection multipliers by KKT support enumeration; the feasible support
/// with the shortest displacement wins.
fn level_enumerate<T: Scalar>(delta: &[T], v: &[Vec<T>]) -> Result<(Vec<usize>, Vec<T>)> {
    let g = gram(v);
    let tol = T::lit(1e-10) * T::one().max(delta.iter().fold(T::zero(), |a, &b| a.max(b.abs())));
    let mut best: Option<(T, Vec<usize>, Vec<T>)> = None;
    for s in supports(delta.len()) {
        let k = s.len();
        let mut a = Matrix::zeros(k, k);
        let rhs: Vec<T> = s.iter().map(|&i| delta[i]).collect();
        for (r, &i) in s.iter().enumerate() {
            for (c, &j) in s.iter().enumerate() {
                a[(r, c)] = g[i][j];
            }
        }
        let Some(lam) = solve_dense(&a, &rhs) else { continue };
        if lam.iter().any(|&l| l < -T::lit(1e-12)) {
            continue;
        }
        let w: Vec<T> = (0..delta.len()).map(|i| s.iter().zip(&lam).map(|(&j, &l)| l * g[i][j]).sum()).collect();
        if !(0..delta.len()).all(|i| delta[i] - w[i] <= tol) {
            continue;
        }
        let len2: T = s.iter().zip(&lam).map(|(&i, &l)| l * w[i]).sum();
        if best.as_ref().map_or(true, |b| len2 < b.0) {
            best = Some((len2, s.clone(), lam.iter().map(|&l| l.max(T::zero())).collect()));
        }
    }
    best.map(|(_, s, l)| (s, l)).ok_or(Error::EmptyLevelSet)
}

/// Backtracking over `τⁱs̄` (`i = 0..=60`) for the generalized gradient step,
/// accepting the first step with `½f²(ȳ) ≤ ½f²(y) − c‖ȳ − y‖²`.
pub fn armijo_gen_grad<T: Scalar>(
    problem: &FiniteMaxProblem<T>,
    y: &[T],
    s_bar: T,
    tau: T,
    c: T,
) -> Result<StepResult<T>> {
    if !(s_bar > T::zero() && tau > T::zero() && tau < T::one() && c > T::zero()) {
        return Err(Error::InvalidParameter("armijo requires s_bar > 0, tau in (0,1), c > 0".into()));
    }
    check_dim(problem.dim(), y.len())?;
    let lin = problem.linearize(y)?;
    let f0 = lin.max().0;
    let half0 = T::lit(0.5) * f0 * f0;
    let mut s = s_bar;
    for _ in 0..=60 {
        let step = gen_grad_step_lin(&lin, y, s)?;
        let fz = problem.eval(&step.next_point)?;
        let moved = norm2_sq(&linalg::sub(&step.next_point, y));
        if T::lit(0.5) * fz * fz <= half0 - c * moved {
            return Ok(step);
        }
        s = s * tau;
    }
    Ok(StepResult {
        next_point: y.to_vec(),
        active_components: Vec::new(),
        multipliers: Vec::new(),
        model_decrease: T::zero(),
        step_size: T::zero(),
        stalled: true,
    })
}
