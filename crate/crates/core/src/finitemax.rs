//! Finite-maximum targets: gauge feasibility objectives and the radial dual of
//! quadratic maximization over a structured set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gauge::{certified_structure, GaugeOracle};
use crate::linalg::{self, dot, norm2, symmetric_eigenvalues, Matrix};
use crate::scalar::Scalar;

/// `f(x) = 1 − ½xᵀQx − cᵀx` with `Q` symmetric positive semidefinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct QuadraticObjective<T: Scalar> {
    #[serde(rename = "Q")]
    q: Matrix<T>,
    c: Vec<T>,
}

impl<T: Scalar> QuadraticObjective<T> {
    pub fn new(q: Matrix<T>, c: Vec<T>) -> Result<Self> {
        if !q.is_square() {
            return Err(Error::DimensionMismatch { expected: q.rows(), found: q.cols() });
        }
        check_dim(q.rows(), c.len())?;
        if !linalg::all_finite(q.as_slice()) || !linalg::all_finite(&c) {
            return Err(Error::NonFinite);
        }
        let asym = q.asymmetry();
        if asym > T::lit(1e-12) * T::one().max(q.max_abs()) {
            return Err(Error::NotSymmetric(asym.f64()));
        }
        let lmin = symmetric_eigenvalues(&q)?[0];
        if lmin < -T::lit(1e-10) * T::one().max(q.max_abs()) {
            return Err(Error::InvalidParameter(format!("Q is not positive semidefinite (min eigenvalue {lmin})")));
        }
        Ok(Self { q, c })
    }

    pub fn q(&self) -> &Matrix<T> {
        &self.q
    }

    pub fn c(&self) -> &[T] {
        &self.c
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// Primal objective `1 − ½xᵀQx − cᵀx`.
    pub fn value(&self, x: &[T]) -> Result<T> {
        Ok(T::one() - T::lit(0.5) * self.q.quad_form(x)? - dot(&self.c, x))
    }

    /// Objective after the substitution `x = x' + e`, shifted by a constant so
    /// that it equals one at `x' = 0`. Returns the new objective and the shift
    /// `K = 1 − f(e)` with `f(x) = f̃(x') − K`.
    pub fn recentered(&self, e: &[T]) -> Result<(Self, T)> {
        let shift = T::one() - self.value(e)?;
        let c = linalg::add(&self.c, &self.q.matvec(e)?);
        Ok((Self { q: self.q.clone(), c }, shift))
    }
}

/// Radial dual `f^Γ(y) = (cᵀy + 1 + √((cᵀy + 1)² + 2yᵀQy))/2` and the
/// gradient of `½(f^Γ)²`.
pub fn radial_quadratic<T: Scalar>(q: &QuadraticObjective<T>, y: &[T]) -> Result<(T, Vec<T>)> {
    check_dim(q.dim(), y.len())?;
    let qy = q.q.matvec(y)?;
    let a = dot(&q.c, y) + T::one();
    let yqy = dot(y, &qy).max(T::zero());
    let r = (a * a + T::lit(2.0) * yqy).sqrt();
    if r == T::zero() {
        return Ok((T::zero(), vec![T::zero(); y.len()]));
    }
    // (a + r)/2 cancels when a < 0; use the conjugate form there.
    let value = if a >= T::zero() { T::lit(0.5) * (a + r) } else { yqy / (r - a) };
    let half = T::lit(0.5);
    let grad = q
        .c
        .iter()
        .zip(&qy)
        .map(|(&ci, &qi)| value * half * (ci + (a * ci + T::lit(2.0) * qi) / r))
        .collect();
    Ok((value, grad))
}

/// Analytic Hessian of `½(f^Γ)²` at `y`.
pub fn radial_quadratic_hessian<T: Scalar>(q: &QuadraticObjective<T>, y: &[T]) -> Result<Matrix<T>> {
    let (f, g2) = radial_quadratic(q, y)?;
    let n = y.len();
    if f == T::zero() {
        return Ok(Matrix::zeros(n, n));
    }
    let qy = q.q.matvec(y)?;
    let a = dot(&q.c, y) + T::one();
    let r = (a * a + T::lit(2.0) * dot(y, &qy).max(T::zero())).sqrt();
    let w: Vec<T> = q.c.iter().zip(&qy).map(|(&ci, &qi)| a * ci + T::lit(2.0) * qi).collect();
    let grad_f: Vec<T> = g2.iter().map(|&g| g / f).collect();
    let half = T::lit(0.5);
    let r3 = r * r * r;
    let mut h = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let hess_f = half * ((q.c[i] * q.c[j] + T::lit(2.0) * q.q[(i, j)]) / r - w[i] * w[j] / r3);
            h[(i, j)] = grad_f[i] * grad_f[j] + f * hess_f;
        }
    }
    Ok(h)
}

/// What a component evaluates.
#[derive(Clone, Debug)]
pub enum ComponentKind<T: Scalar> {
    Gauge(GaugeOracle<T>),
    RadialQuadratic(QuadraticObjective<T>),
}

/// A closed convex nonnegative function with its Lipschitz constant `M` and
/// the strong convexity `μ` and smoothness `L` of its half square.
#[derive(Clone, Debug)]
pub struct ComponentFunction<T: Scalar> {
    pub kind: ComponentKind<T>,
    pub lipschitz: T,
    pub mu: T,
    pub l: T,
}

impl<T: Scalar> ComponentFunction<T> {
    /// Gauge component with certified constants.
    pub fn gauge(oracle: GaugeOracle<T>) -> Self {
        let g = certified_structure(&oracle);
        let lipschitz = oracle.lipschitz();
        Self { kind: ComponentKind::Gauge(oracle), lipschitz, mu: g.mu, l: g.l }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ComponentKind::Gauge(o) => o.dim(),
            ComponentKind::RadialQuadratic(q) => q.dim(),
        }
    }

    pub fn eval(&self, y: &[T]) -> Result<T> {
        match &self.kind {
            ComponentKind::Gauge(o) => o.value(y),
            ComponentKind::RadialQuadratic(q) => Ok(radial_quadratic(q, y)?.0),
        }
    }

    /// Value and an element of `∂(½f²)(y)`.
    pub fn eval_half_sq(&self, y: &[T]) -> Result<(T, Vec<T>)> {
        match &self.kind {
            ComponentKind::Gauge(o) => {
                let ev = o.gauge(y)?;
                Ok((ev.value, ev.half_sq_subgrad))
            }
            ComponentKind::RadialQuadratic(q) => radial_quadratic(q, y),
        }
    }
}

/// `f(y) = maxᵢ fᵢ(y)` with aggregated constants.
#[derive(Clone, Debug)]
pub struct FiniteMaxProblem<T: Scalar> {
    components: Vec<ComponentFunction<T>>,
    pub lipschitz: T,
    pub mu: T,
    pub l: T,
    pub p_star_hint: Option<T>,
}

/// Values and half-square subgradients of every component at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Linearization<T> {
    pub values: Vec<T>,
    pub subgrads: Vec<Vec<T>>,
}

impl<T: Scalar> Linearization<T> {
    /// `(max value, lowest index attaining it)`.
    pub fn max(&self) -> (T, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (self.values[best], best)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl<T: Scalar> FiniteMaxProblem<T> {
    pub fn new(components: Vec<ComponentFunction<T>>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::InvalidParameter("need at least one component".into()));
        };
        let n = first.dim();
        for c in &components {
            check_dim(n, c.dim())?;
        }
        let mut p = Self { components, lipschitz: T::zero(), mu: T::zero(), l: T::zero(), p_star_hint: None };
        p.refresh_constants();
        Ok(p)
    }

    /// Recomputes the aggregate `(M, μ, L)` from the components.
    pub fn refresh_constants(&mut self) {
        let cs = &self.components;
        self.lipschitz = cs.iter().map(|c| c.lipschitz).fold(T::zero(), T::max);
        self.mu = cs.iter().map(|c| c.mu).fold(T::infinity(), T::min);
        self.l = cs.iter().map(|c| c.l).fold(T::zero(), T::max);
    }

    pub fn components(&self) -> &[ComponentFunction<T>] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [ComponentFunction<T>] {
        &mut self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn eval(&self, y: &[T]) -> Result<T> {
        let mut best = T::neg_infinity();
        for c in &self.components {
            best = best.max(c.eval(y)?);
        }
        Ok(best)
    }

    pub fn linearize(&self, y: &[T]) -> Result<Linearization<T>> {
        let mut values = Vec::with_capacity(self.len());
        let mut subgrads = Vec::with_capacity(self.len());
        for c in &self.components {
            let (v, g) = c.eval_half_sq(y)?;
            values.push(v);
            subgrads.push(g);
        }
        Ok(Linearization { values, subgrads })
    }
}

/// Gauge feasibility objective `maxᵢ γ_{Sᵢ,eᵢ}(y)`; the sets intersect iff
/// its minimum is at most one.
pub fn feasibility_problem<T: Scalar>(oracles: Vec<GaugeOracle<T>>) -> Result<FiniteMaxProblem<T>> {
    FiniteMaxProblem::new(oracles.into_iter().map(ComponentFunction::gauge).collect())
}

/// Sampled constants of the radial dual component: the Lipschitz bound
/// `‖c‖ + √(λ_max(Q)/2)` and the extreme Hessian eigenvalues of `½(f^Γ)²`
/// over points drawn uniformly from the ball of radius `radius`.
pub fn radial_constants<T: Scalar>(q: &QuadraticObjective<T>, radius: T, samples: usize, seed: u64) -> Result<(T, T, T)> {
    let eig = symmetric_eigenvalues(&q.q)?;
    let lmax_q = eig.last().copied().unwrap_or(T::zero()).max(T::zero());
    let lipschitz = norm2(&q.c) + (T::lit(0.5) * lmax_q).sqrt();
    let n = q.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mu = T::infinity();
    let mut l = T::zero();
    for _ in 0..samples {
        let dir: Vec<T> = (0..n).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect();
        let dn = norm2(&dir);
        let rad = radius * T::lit(rng.gen::<f64>().powf(1.0 / n as f64));
        let y: Vec<T> = dir.iter().map(|&d| d / dn * rad).collect();
        let ev = symmetric_eigenvalues(&radial_quadratic_hessian(q, &y)?)?;
        mu = mu.min(ev[0].max(T::zero()));
        l = l.max(ev[n - 1]);
    }
    Ok((lipschitz, mu, l))
}

/// Two-component radial dual `max{f^Γ, γ_{S,0}}` of maximizing `q` over `S`.
pub fn radial_dual_problem<T: Scalar>(q: QuadraticObjective<T>, constraint: GaugeOracle<T>) -> Result<FiniteMaxProblem<T>> {
    check_dim(q.dim(), constraint.dim())?;
    if constraint.center().iter().any(|&x| x != T::zero()) {
        return Err(Error::InvalidParameter("constraint oracle must be centered at the origin".into()));
    }
    let (lipschitz, mu, l) = radial_constants(&q, constraint.inner_radius(), 100, 0)?;
    let radial = ComponentFunction { kind: ComponentKind::RadialQuadratic(q), lipschitz, mu, l };
    FiniteMaxProblem::new(vec![radial, ComponentFunction::gauge(constraint)])
}

/// Primal point `x = y/F(y)` and objective `1/F(y)` from a radial dual point.
pub fn recover_primal<T: Scalar>(problem: &FiniteMaxProblem<T>, y: &[T]) -> Result<(Vec<T>, T)> {
    let f = problem.eval(y)?;
    if !(f > T::zero()) || !f.is_finite() {
        return Err(Error::NonPositiveObjective);
    }
    Ok((linalg::scale(f.recip(), y), f.recip()))
}

/// Least-squares center from `iterations` steps of CGLS on `Ax = b`,
/// started at zero.
pub fn recenter<T: Scalar>(a: &Matrix<T>, b: &[T], iterations: usize) -> Result<Vec<T>> {
    Ok(recenter_trace(a, b, iterations)?.0)
}

/// CGLS iterate and the residual norms `‖Ax_k − b‖` for `k = 0..=iters`.
pub fn recenter_trace<T: Scalar>(a: &Matrix<T>, b: &[T], iterations: usize) -> Result<(Vec<T>, Vec<T>)> {
    check_dim(a.rows(), b.len())?;
    if a.max_abs() == T::zero() {
        return Err(Error::InvalidParameter("matrix must be nonzero".into()));
    }
    let mut x = vec![T::zero(); a.cols()];
    let mut r = b.to_vec();
    let mut s = a.tmatvec(&r)?;
    let mut p = s.clone();
    let mut gamma = dot(&s, &s);
    let mut residuals = vec![norm2(&r)];
    for _ in 0..iterations {
        if gamma == T::zero() {
            break;
        }
        let q = a.matvec(&p)?;
        let qq = dot(&q, &q);
        if qq == T::zero() {
            break;
        }
        let alpha = gamma / qq;
        linalg::axpy(alpha, &p, &mut x);
        linalg::axpy(-alpha, &q, &mut r);
        s = a.tmatvec(&r)?;
        let next = dot(&s, &s);
        let beta = next / gamma;
        gamma = next;
        for (pi, &si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
        residuals.push(norm2(&r));
    }
    Ok((x, residuals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::StructuredSet;

    fn unit_ball(n: usize) -> GaugeOracle<f64> {
        GaugeOracle::at_origin(StructuredSet::pnorm_ball(2.0, vec![0.0; n]).unwrap()).unwrap()
    }

    #[test]
    fn radial_examples() {
        let zero = QuadraticObjective::new(Matrix::zeros(2, 2), vec![0.0, 0.0]).unwrap();
        assert_eq!(radial_quadratic(&zero, &[3.0, -7.0]).unwrap().0, 1.0);
        let id = QuadraticObjective::new(Matrix::identity(2), vec![0.0, 0.0]).unwrap();
        let (v, _) = radial_quadratic(&id, &[1.0, 0.0]).unwrap();
        assert!((v - (1.0 + 3f64.sqrt()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn radial_fixed_point_with_negative_linear_term() {
        let q = QuadraticObjective::new(Matrix::from_rows(vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap(), vec![3.0, -1.0]).unwrap();
        for y in [[-5.0, 1.0], [0.2, 0.3], [-100.0, -40.0]] {
            let (v, _) = radial_quadratic(&q, &y).unwrap();
            let x: Vec<f64> = y.iter().map(|t| t / v).collect();
            assert!((v * q.value(&x).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_quadratics() {
        let asym = Matrix::from_rows(vec![vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(QuadraticObjective::new(asym, vec![0.0, 0.0]), Err(Error::NotSymmetric(_))));
        let neg = Matrix::from_diag(&[1.0, -1.0]);
        assert!(QuadraticObjective::new(neg, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn recentering_preserves_objective_differences() {
        let q = QuadraticObjective::<f64>::new(Matrix::from_diag(&[1.0, 2.0]), vec![0.5, -1.0]).unwrap();
        let e = [0.3, -0.2];
        let (r, k) = q.recentered(&e).unwrap();
        assert!((r.value(&[0.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        let x = [1.1, 0.4];
        let xs = [x[0] - e[0], x[1] - e[1]];
        assert!((q.value(&x).unwrap() - (r.value(&xs).unwrap() - k)).abs() < 1e-14);
    }

    #[test]
    fn feasibility_metadata() {
        let two = feasibility_problem(vec![unit_ball(2), unit_ball(2)]).unwrap();
        assert_eq!((two.lipschitz, two.mu, two.l), (1.0, 1.0, 1.0));
        assert!(two.eval(&[0.5, 0.5]).unwrap() <= 1.0);
        assert!(feasibility_problem(vec![unit_ball(2), unit_ball(3)]).is_err());
        let h = GaugeOracle::at_origin(StructuredSet::halfspace(vec![1.0, 0.0], 1.0).unwrap()).unwrap();
        let p = feasibility_problem(vec![h]).unwrap();
        assert_eq!(p.eval(&[-3.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn recover_primal_examples() {
        let q = QuadraticObjective::new(Matrix::zeros(2, 2), vec![0.0, 0.0]).unwrap();
        let p = radial_dual_problem(q, unit_ball(2)).unwrap();
        let (x, f) = recover_primal(&p, &[0.5, 0.0]).unwrap();
        assert_eq!((x, f), (vec![0.5, 0.0], 1.0));
        // Maximizing 1 + x₁ over the unit ball: dual optimum (1/2, 0).
        let lin = QuadraticObjective::new(Matrix::zeros(2, 2), vec![-1.0, 0.0]).unwrap();
        let p = radial_dual_problem(lin, unit_ball(2)).unwrap();
        let (x, f) = recover_primal(&p, &[0.5, 0.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && x[1] == 0.0 && (f - 2.0).abs() < 1e-15);
        let off = GaugeOracle::new(StructuredSet::pnorm_ball(2.0, vec![0.0, 0.0]).unwrap(), vec![0.1, 0.0]).unwrap();
        let q = QuadraticObjective::new(Matrix::zeros(2, 2), vec![0.0, 0.0]).unwrap();
        assert!(radial_dual_problem(q, off).is_err());
    }

    #[test]
    fn recenter_examples() {
        let x = recenter(&Matrix::identity(3), &[1.0, -2.0, 0.5], 30).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 0.5]);
        let x: Vec<f64> = recenter(&Matrix::from_diag(&[1.0, 2.0]), &[1.0, 2.0], 30).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        assert!(recenter(&Matrix::<f64>::zeros(2, 2), &[1.0, 1.0], 3).is_err());
    }
}
