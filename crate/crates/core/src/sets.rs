//! Structured convex sets: membership, boundary normals, radius bounds and
//! strong convexity / smoothness bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, dot, norm2, norm_inf, norm_p, GramSpectrum, Matrix};
use crate::scalar::{sentinel_add, sentinel_recip, Scalar};

/// Set strong convexity `alpha` and smoothness `beta`.
///
/// `alpha = 0` means "not strongly convex". `beta = ∞` means "not smooth",
/// while `beta = 0` encodes the infinitely smooth halfspace (inner balls of
/// every radius fit).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureConstants<T> {
    pub alpha: T,
    pub beta: T,
}

impl<T: Scalar> StructureConstants<T> {
    pub fn new(alpha: T, beta: T) -> Result<Self> {
        if alpha < T::zero() || beta < T::zero() || alpha.is_nan() || beta.is_nan() {
            return Err(Error::InvalidParameter("structure constants must be nonnegative".into()));
        }
        if alpha > T::zero() && beta > T::zero() && beta.is_finite() && alpha > beta * (T::one() + T::lit(1e-12)) {
            return Err(Error::InvalidParameter("alpha cannot exceed beta".into()));
        }
        Ok(Self { alpha, beta })
    }

    pub fn is_strongly_convex(&self) -> bool {
        self.alpha > T::zero()
    }

    pub fn is_smooth(&self) -> bool {
        self.beta.is_finite()
    }
}

/// Set operations with known constant propagation rules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CombineOp<T> {
    /// Image under a linear map with the given extreme eigenvalues of `A*A`.
    Affine { lambda_min: T, lambda_max: T },
    MinkowskiSum,
    Intersection,
}

pub fn combine_constants<T: Scalar>(
    op: CombineOp<T>,
    inputs: &[StructureConstants<T>],
) -> Result<StructureConstants<T>> {
    let first = *inputs
        .first()
        .ok_or_else(|| Error::InvalidParameter("at least one input required".into()))?;
    match op {
        CombineOp::Affine { lambda_min, lambda_max } => {
            if inputs.len() != 1 {
                return Err(Error::InvalidParameter("affine takes exactly one input".into()));
            }
            if lambda_min < T::zero() || lambda_max < lambda_min {
                return Err(Error::InvalidParameter("invalid spectrum".into()));
            }
            let alpha = if lambda_min == T::zero() { T::zero() } else { first.alpha * lambda_min / lambda_max.sqrt() };
            let beta = if first.beta == T::zero() {
                T::zero()
            } else if lambda_min == T::zero() {
                T::infinity()
            } else {
                first.beta * lambda_max / lambda_min.sqrt()
            };
            Ok(StructureConstants { alpha, beta })
        }
        CombineOp::MinkowskiSum => {
            let (mut ia, mut ib) = (T::zero(), T::zero());
            for c in inputs {
                ia = sentinel_add(ia, sentinel_recip(c.alpha));
                ib = sentinel_add(ib, sentinel_recip(c.beta));
            }
            Ok(StructureConstants { alpha: sentinel_recip(ia), beta: sentinel_recip(ib) })
        }
        CombineOp::Intersection => {
            let alpha = inputs.iter().fold(first.alpha, |m, c| m.min(c.alpha));
            Ok(StructureConstants { alpha, beta: T::infinity() })
        }
    }
}

/// Safe-side radius bounds around an interior point `e`.
///
/// `r` never exceeds the true distance from `e` to the complement and `d`
/// never undershoots the largest distance from `e` to a member (`∞` when the
/// set is unbounded).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusBounds<T> {
    pub r: T,
    pub d: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Halfspace<T> {
    a: Vec<T>,
    b: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ball<T> {
    c: Vec<T>,
    r: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PnormBall<T> {
    p: T,
    offset: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PnormEllipsoid<T> {
    a: Matrix<T>,
    b: Vec<T>,
    p: T,
    tau: T,
    spectrum: GramSpectrum<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HullBallOrigin<T> {
    c: Vec<T>,
    rho: T,
}

fn check_finite<T: Scalar>(v: &[T]) -> Result<()> {
    if linalg::all_finite(v) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn check_p<T: Scalar>(p: T) -> Result<()> {
    if p > T::one() && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("p must lie in (1, inf), got {p}")))
    }
}

impl<T: Scalar> Halfspace<T> {
    pub fn new(a: Vec<T>, b: T) -> Result<Self> {
        check_finite(&a)?;
        if !(b > T::zero()) || !b.is_finite() {
            return Err(Error::InvalidParameter("halfspace requires b > 0".into()));
        }
        if norm_inf(&a) == T::zero() {
            return Err(Error::InvalidParameter("halfspace normal must be nonzero".into()));
        }
        Ok(Self { a, b })
    }
    pub fn a(&self) -> &[T] {
        &self.a
    }
    pub fn b(&self) -> T {
        self.b
    }
}

impl<T: Scalar> Ball<T> {
    pub fn new(c: Vec<T>, r: T) -> Result<Self> {
        check_finite(&c)?;
        if !(r > T::zero()) || !r.is_finite() {
            return Err(Error::InvalidParameter("ball radius must be positive and finite".into()));
        }
        Ok(Self { c, r })
    }
    pub fn center(&self) -> &[T] {
        &self.c
    }
    pub fn radius(&self) -> T {
        self.r
    }
}

impl<T: Scalar> PnormBall<T> {
    pub fn new(p: T, offset: Vec<T>) -> Result<Self> {
        check_p(p)?;
        check_finite(&offset)?;
        Ok(Self { p, offset })
    }
    pub fn p(&self) -> T {
        self.p
    }
    pub fn offset(&self) -> &[T] {
        &self.offset
    }
}

impl<T: Scalar> PnormEllipsoid<T> {
    pub fn new(a: Matrix<T>, b: Vec<T>, p: T, tau: T) -> Result<Self> {
        check_p(p)?;
        check_dim(a.rows(), b.len())?;
        check_finite(a.as_slice())?;
        check_finite(&b)?;
        if a.rows() == 0 || a.cols() == 0 {
            return Err(Error::InvalidParameter("ellipsoid matrix must be nonempty".into()));
        }
        if !(tau > T::zero()) || !tau.is_finite() {
            return Err(Error::InvalidParameter("tau must be positive".into()));
        }
        let spectrum = GramSpectrum::of(&a)?;
        Ok(Self { a, b, p, tau, spectrum })
    }
    pub fn matrix(&self) -> &Matrix<T> {
        &self.a
    }
    pub fn b(&self) -> &[T] {
        &self.b
    }
    pub fn p(&self) -> T {
        self.p
    }
    pub fn tau(&self) -> T {
        self.tau
    }
    pub fn spectrum(&self) -> GramSpectrum<T> {
        self.spectrum
    }
}

impl<T: Scalar> HullBallOrigin<T> {
    pub fn new(c: Vec<T>, rho: T) -> Result<Self> {
        check_finite(&c)?;
        if !(rho > T::zero()) || !rho.is_finite() {
            return Err(Error::InvalidParameter("hull radius must be positive".into()));
        }
        Ok(Self { c, rho })
    }
    pub fn center(&self) -> &[T] {
        &self.c
    }
    pub fn radius(&self) -> T {
        self.rho
    }
}

/// A closed convex set with a structured description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSet<T>", into = "RawSet<T>", bound = "T: Scalar")]
pub enum StructuredSet<T: Scalar> {
    Halfspace(Halfspace<T>),
    Ball(Ball<T>),
    PnormBall(PnormBall<T>),
    PnormEllipsoid(PnormEllipsoid<T>),
    HullBallOrigin(HullBallOrigin<T>),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
enum RawSet<T: Scalar> {
    Halfspace {
        a: Vec<T>,
        b: T,
    },
    Ball {
        c: Vec<T>,
        r: T,
    },
    PnormBall {
        p: T,
        offset: Vec<T>,
    },
    PnormEllipsoid {
        #[serde(rename = "A")]
        a: Matrix<T>,
        b: Vec<T>,
        p: T,
        tau: T,
    },
    HullBallOrigin {
        c: Vec<T>,
        rho: T,
    },
}

impl<T: Scalar> TryFrom<RawSet<T>> for StructuredSet<T> {
    type Error = Error;
    fn try_from(raw: RawSet<T>) -> Result<Self> {
        Ok(match raw {
            RawSet::Halfspace { a, b } => Self::Halfspace(Halfspace::new(a, b)?),
            RawSet::Ball { c, r } => Self::Ball(Ball::new(c, r)?),
            RawSet::PnormBall { p, offset } => Self::PnormBall(PnormBall::new(p, offset)?),
            RawSet::PnormEllipsoid { a, b, p, tau } => Self::PnormEllipsoid(PnormEllipsoid::new(a, b, p, tau)?),
            RawSet::HullBallOrigin { c, rho } => Self::HullBallOrigin(HullBallOrigin::new(c, rho)?),
        })
    }
}

impl<T: Scalar> From<StructuredSet<T>> for RawSet<T> {
    fn from(s: StructuredSet<T>) -> Self {
        match s {
            StructuredSet::Halfspace(h) => RawSet::Halfspace { a: h.a, b: h.b },
            StructuredSet::Ball(b) => RawSet::Ball { c: b.c, r: b.r },
            StructuredSet::PnormBall(b) => RawSet::PnormBall { p: b.p, offset: b.offset },
            StructuredSet::PnormEllipsoid(e) => RawSet::PnormEllipsoid { a: e.a, b: e.b, p: e.p, tau: e.tau },
            StructuredSet::HullBallOrigin(h) => RawSet::HullBallOrigin { c: h.c, rho: h.rho },
        }
    }
}

/// `∇‖w‖_p^p / p = sign(w)|w|^{p-1}`.
pub(crate) fn pnorm_grad<T: Scalar>(w: &[T], p: T) -> Vec<T> {
    let pm1 = p - T::one();
    w.iter().map(|&x| if x == T::zero() { T::zero() } else { x.signum() * x.abs().powf(pm1) }).collect()
}

/// Pointwise Hessian-over-gradient ratio of `‖w‖_p^p` at a level-set point:
/// `p(p-1)‖w‖_∞^{p-2} / ‖∇‖w‖_p^p‖`.
pub(crate) fn pnorm_curvature<T: Scalar>(w: &[T], p: T) -> T {
    let g = pnorm_grad(w, p);
    let gn = p * norm2(&g);
    p * (p - T::one()) * norm_inf(w).powf(p - T::lit(2.0)) / gn
}

/// Local (alpha, beta) of a p-norm level set at boundary point offset `w`.
pub(crate) fn pnorm_local_constants<T: Scalar>(w: &[T], p: T) -> StructureConstants<T> {
    let k = pnorm_curvature(w, p);
    let two = T::lit(2.0);
    let alpha = if p <= two { k } else { T::zero() };
    let beta = if p >= two { k } else { T::infinity() };
    StructureConstants { alpha, beta }
}

/// Global constants of the unit p-norm ball in dimension `n`.
pub(crate) fn pnorm_unit_constants<T: Scalar>(p: T, n: usize) -> StructureConstants<T> {
    let two = T::lit(2.0);
    let k = (p - T::one()) * T::lit(n as f64).powf(T::lit(0.5) - p.recip());
    if p == two {
        StructureConstants { alpha: T::one(), beta: T::one() }
    } else if p < two {
        StructureConstants { alpha: k, beta: T::infinity() }
    } else {
        StructureConstants { alpha: T::zero(), beta: k }
    }
}

/// Largest ratio `‖v‖_p / ‖v‖_2` over `R^n`.
fn p_over_2<T: Scalar>(p: T, n: usize) -> T {
    let ex = (p.recip() - T::lit(0.5)).max(T::zero());
    T::lit(n as f64).powf(ex)
}

/// Largest ratio `‖v‖_2 / ‖v‖_p` over `R^n`.
fn two_over_p<T: Scalar>(p: T, n: usize) -> T {
    let ex = (T::lit(0.5) - p.recip()).max(T::zero());
    T::lit(n as f64).powf(ex)
}

/// Inf-form gauge of `B(c, r)` at `z`: `inf{λ > 0 : z/λ ∈ B(c, r)}`, with
/// `∞` when the ray misses the ball.
pub(crate) fn inf_ball_gauge<T: Scalar>(c: &[T], r: T, z: &[T]) -> T {
    let zz = dot(z, z);
    if zz == T::zero() {
        return T::zero();
    }
    let cz = dot(c, z);
    let k = r * r - dot(c, c);
    let disc = cz * cz + k * zz;
    if disc < T::zero() {
        return T::infinity();
    }
    let den = cz + disc.sqrt();
    if den <= T::zero() {
        return T::infinity();
    }
    zz / den
}

fn rel_boundary<T: Scalar>(lhs: T, rhs: T) -> Result<()> {
    let res = (lhs - rhs).abs();
    if res <= T::boundary_tol() * T::one().max(rhs.abs()) {
        Ok(())
    } else {
        Err(Error::NotOnBoundary(res.f64()))
    }
}

fn unit<T: Scalar>(v: Vec<T>) -> Result<Vec<T>> {
    let n = norm2(&v);
    if n == T::zero() || !n.is_finite() {
        return Err(Error::AmbiguousNormal);
    }
    Ok(v.into_iter().map(|x| x / n).collect())
}

impl<T: Scalar> StructuredSet<T> {
    pub fn halfspace(a: Vec<T>, b: T) -> Result<Self> {
        Halfspace::new(a, b).map(Self::Halfspace)
    }

    pub fn ball(c: Vec<T>, r: T) -> Result<Self> {
        Ball::new(c, r).map(Self::Ball)
    }

    pub fn pnorm_ball(p: T, offset: Vec<T>) -> Result<Self> {
        PnormBall::new(p, offset).map(Self::PnormBall)
    }

    pub fn pnorm_ellipsoid(a: Matrix<T>, b: Vec<T>, p: T, tau: T) -> Result<Self> {
        PnormEllipsoid::new(a, b, p, tau).map(Self::PnormEllipsoid)
    }

    pub fn hull_ball_origin(c: Vec<T>, rho: T) -> Result<Self> {
        HullBallOrigin::new(c, rho).map(Self::HullBallOrigin)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Halfspace(_) => "halfspace",
            Self::Ball(_) => "ball",
            Self::PnormBall(_) => "pnorm_ball",
            Self::PnormEllipsoid(_) => "pnorm_ellipsoid",
            Self::HullBallOrigin(_) => "hull_ball_origin",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Halfspace(h) => h.a.len(),
            Self::Ball(b) => b.c.len(),
            Self::PnormBall(b) => b.offset.len(),
            Self::PnormEllipsoid(e) => e.a.cols(),
            Self::HullBallOrigin(h) => h.c.len(),
        }
    }

    /// Left and right hand sides of the defining inequality `lhs ≤ rhs`.
    ///
    /// For the hull the left side is the inf-form gauge of the ball, which
    /// certifies membership but only detects the ball facet of the boundary.
    pub fn defining_value(&self, x: &[T]) -> Result<(T, T)> {
        check_dim(self.dim(), x.len())?;
        check_finite(x)?;
        Ok(match self {
            Self::Halfspace(h) => (dot(&h.a, x), h.b),
            Self::Ball(b) => (norm2(&linalg::sub(x, &b.c)), b.r),
            Self::PnormBall(b) => (norm_p(&linalg::sub(x, &b.offset), b.p), T::one()),
            Self::PnormEllipsoid(e) => {
                let w = linalg::sub(&e.a.matvec(x)?, &e.b);
                (norm_p(&w, e.p), e.tau)
            }
            Self::HullBallOrigin(h) => (inf_ball_gauge(&h.c, h.rho, x), T::one()),
        })
    }

    /// Closed membership test with no tolerance.
    pub fn contains(&self, x: &[T]) -> Result<bool> {
        let (lhs, rhs) = self.defining_value(x)?;
        Ok(lhs <= rhs)
    }

    /// Boundary predicate at relative tolerance [`Scalar::boundary_tol`].
    pub fn on_boundary(&self, x: &[T]) -> Result<bool> {
        match self.normal_vector(x) {
            Ok(_) | Err(Error::AmbiguousNormal) => Ok(true),
            Err(Error::NotOnBoundary(_)) => Ok(false),
            Err(e) => Err(e),
        }
    }

    /// Unit normal at a boundary point.
    pub fn normal_vector(&self, x: &[T]) -> Result<Vec<T>> {
        let (lhs, rhs) = self.defining_value(x)?;
        match self {
            Self::Halfspace(h) => {
                rel_boundary(lhs, rhs)?;
                unit(h.a.clone())
            }
            Self::Ball(b) => {
                rel_boundary(lhs, rhs)?;
                unit(linalg::sub(x, &b.c))
            }
            Self::PnormBall(b) => {
                rel_boundary(lhs, rhs)?;
                unit(pnorm_grad(&linalg::sub(x, &b.offset), b.p))
            }
            Self::PnormEllipsoid(e) => {
                rel_boundary(lhs, rhs)?;
                let w = linalg::sub(&e.a.matvec(x)?, &e.b);
                unit(e.a.tmatvec(&pnorm_grad(&w, e.p))?)
            }
            Self::HullBallOrigin(h) => h.normal(x),
        }
    }

    /// Global (alpha, beta) of the set.
    pub fn structure_constants(&self) -> StructureConstants<T> {
        match self {
            Self::Halfspace(_) => StructureConstants { alpha: T::zero(), beta: T::zero() },
            Self::Ball(b) => StructureConstants { alpha: b.r.recip(), beta: b.r.recip() },
            Self::PnormBall(b) => pnorm_unit_constants(b.p, b.offset.len()),
            Self::PnormEllipsoid(e) => {
                let base = pnorm_unit_constants(e.p, e.a.rows());
                let scaled = StructureConstants { alpha: base.alpha / e.tau, beta: base.beta / e.tau };
                let op = CombineOp::Affine { lambda_min: e.spectrum.lambda_min, lambda_max: e.spectrum.lambda_max };
                combine_constants(op, &[scaled]).expect("spectrum is valid by construction")
            }
            // Flat cone facets and a nonsmooth apex.
            Self::HullBallOrigin(_) => StructureConstants { alpha: T::zero(), beta: T::infinity() },
        }
    }

    /// Local (alpha, beta) at a boundary point, as used when sampling local
    /// gauge constants.
    pub fn local_constants(&self, x: &[T]) -> Result<StructureConstants<T>> {
        let (lhs, rhs) = self.defining_value(x)?;
        match self {
            Self::Halfspace(_) | Self::Ball(_) => {
                rel_boundary(lhs, rhs)?;
                Ok(self.structure_constants())
            }
            Self::PnormBall(b) => {
                rel_boundary(lhs, rhs)?;
                Ok(pnorm_local_constants(&linalg::sub(x, &b.offset), b.p))
            }
            Self::PnormEllipsoid(e) => {
                rel_boundary(lhs, rhs)?;
                let w = linalg::sub(&e.a.matvec(x)?, &e.b);
                let base = pnorm_local_constants(&w, e.p);
                let op = CombineOp::Affine { lambda_min: e.spectrum.lambda_min, lambda_max: e.spectrum.lambda_max };
                combine_constants(op, &[base])
            }
            Self::HullBallOrigin(h) => {
                match h.normal(x) {
                    // The apex is a nonsmooth vertex.
                    Err(Error::AmbiguousNormal) => return Ok(StructureConstants { alpha: T::zero(), beta: T::infinity() }),
                    other => other?,
                };
                if h.on_ball_facet(x) {
                    Ok(StructureConstants { alpha: h.rho.recip(), beta: h.rho.recip() })
                } else {
                    Ok(StructureConstants { alpha: T::zero(), beta: h.rho.recip() })
                }
            }
        }
    }

    /// Radius bounds `(R, D)` around the strictly interior point `e`.
    pub fn radius_bounds(&self, e: &[T]) -> Result<RadiusBounds<T>> {
        check_dim(self.dim(), e.len())?;
        check_finite(e)?;
        let bounds = match self {
            Self::Halfspace(h) => {
                let slack = h.b - dot(&h.a, e);
                RadiusBounds { r: slack / norm2(&h.a), d: T::infinity() }
            }
            Self::Ball(b) => {
                let off = norm2(&linalg::sub(e, &b.c));
                RadiusBounds { r: b.r - off, d: b.r + off }
            }
            Self::PnormBall(b) => {
                let n = b.offset.len();
                let u = linalg::sub(e, &b.offset);
                let r = (T::one() - norm_p(&u, b.p)) / p_over_2(b.p, n);
                RadiusBounds { r, d: norm2(&u) + two_over_p(b.p, n) }
            }
            Self::PnormEllipsoid(el) => {
                let m = el.a.rows();
                let u = linalg::sub(&el.a.matvec(e)?, &el.b);
                let smax = el.spectrum.lambda_max.sqrt();
                let smin = el.spectrum.lambda_min.sqrt();
                let r = (el.tau - norm_p(&u, el.p)) / (p_over_2(el.p, m) * smax);
                let d = if smin > T::zero() {
                    (el.tau * two_over_p(el.p, m) + norm2(&u)) / smin
                } else {
                    T::infinity()
                };
                RadiusBounds { r, d }
            }
            Self::HullBallOrigin(h) => {
                // Only centers inside the generating ball are supported; the
                // ball is then a certified inner region.
                let off = norm2(&linalg::sub(e, &h.c));
                RadiusBounds { r: h.rho - off, d: norm2(e).max(off + h.rho) }
            }
        };
        if !(bounds.r > T::zero()) {
            return Err(Error::NotInterior);
        }
        Ok(bounds)
    }
}

impl<T: Scalar> HullBallOrigin<T> {
    fn on_ball_facet(&self, x: &[T]) -> bool {
        let xc = linalg::sub(x, &self.c);
        let dist = norm2(&xc);
        (dist - self.rho).abs() <= T::boundary_tol() * T::one().max(self.rho)
            && dot(&xc, x) >= -T::boundary_tol() * self.rho * norm2(x).max(T::one())
    }

    fn normal(&self, x: &[T]) -> Result<Vec<T>> {
        let xn = norm2(x);
        let k = self.rho * self.rho - dot(&self.c, &self.c);
        if xn <= T::boundary_tol() * self.rho.max(norm2(&self.c)) {
            // The origin is a boundary point only when it is outside or on the ball.
            return if k <= T::zero() { Err(Error::AmbiguousNormal) } else { Err(Error::NotOnBoundary(self.rho.f64())) };
        }
        if self.on_ball_facet(x) {
            return unit(linalg::sub(x, &self.c));
        }
        if k < T::zero() {
            // Tangent cone: (cᵀx)² = (‖c‖² − ρ²)‖x‖² with the point short of the tangency.
            let cx = dot(&self.c, x);
            let cc = dot(&self.c, &self.c);
            let resid = (cx * cx + k * xn * xn).abs() / (cc * xn * xn);
            // Short of the tangency point (cᵀx/‖x‖)x/‖x‖ means ‖x‖² ≤ cᵀx. The
            // ball gauge is not used here: its discriminant vanishes on the
            // cone and rounds to either sign.
            if cx > T::zero() && resid <= T::boundary_tol() && xn * xn <= cx * (T::one() + T::boundary_tol()) {
                // Ball normal at the tangency point, the projection of c onto the ray.
                let touch = linalg::scale(cx / (xn * xn), x);
                return unit(linalg::sub(&touch, &self.c));
            }
        }
        let dist = norm2(&linalg::sub(x, &self.c));
        Err(Error::NotOnBoundary((dist - self.rho).abs().f64()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * 1f64.max(b.abs())
    }

    #[test]
    fn membership_examples() {
        let h = StructuredSet::halfspace(vec![2.0, 0.0], 4.0).unwrap();
        assert!(h.contains(&[1.0, 1.0]).unwrap());
        let b = StructuredSet::pnorm_ball(2.0, vec![0.0, 0.0]).unwrap();
        assert!(b.contains(&[0.6, 0.8]).unwrap());
        let ball = StructuredSet::ball(vec![0.5, 0.0], 1.0).unwrap();
        assert!(!ball.contains(&[2.0, 0.0]).unwrap());
        assert!(matches!(ball.contains(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn invalid_sets_rejected() {
        assert!(StructuredSet::halfspace(vec![1.0], 0.0).is_err());
        assert!(StructuredSet::ball(vec![0.0], -1.0).is_err());
        assert!(StructuredSet::pnorm_ball(1.0, vec![0.0]).is_err());
        assert!(StructuredSet::pnorm_ellipsoid(Matrix::identity(2), vec![0.0], 2.0, 1.0).is_err());
    }

    #[test]
    fn normal_examples() {
        let b = StructuredSet::pnorm_ball(2.0, vec![0.0, 0.0]).unwrap();
        let z = b.normal_vector(&[0.6, 0.8]).unwrap();
        assert!(close(z[0], 0.6, 1e-15) && close(z[1], 0.8, 1e-15));
        let h = StructuredSet::halfspace(vec![2.0, 0.0], 4.0).unwrap();
        assert_eq!(h.normal_vector(&[2.0, 3.0]).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(h.normal_vector(&[1.0, 3.0]), Err(Error::NotOnBoundary(_))));
        let b4 = StructuredSet::pnorm_ball(4.0, vec![0.0, 0.0]).unwrap();
        let x = 2f64.powf(-0.25);
        let z = b4.normal_vector(&[x, x]).unwrap();
        let s = 0.5f64.sqrt();
        assert!(close(z[0], s, 1e-12) && close(z[1], s, 1e-12));
    }

    #[test]
    fn pnorm4_normal_matches_finite_difference() {
        let b4 = StructuredSet::pnorm_ball(4.0, vec![0.3, -0.1]).unwrap();
        let theta: f64 = 0.7;
        let dir = [theta.cos(), theta.sin()];
        let rad = 1.0 / norm_p(&dir, 4.0);
        let x = [0.3 + rad * dir[0], -0.1 + rad * dir[1]];
        let f = |v: &[f64]| norm_p(&[v[0] - 0.3, v[1] + 0.1], 4.0);
        let h = 1e-6;
        let g: Vec<f64> = (0..2)
            .map(|i| {
                let mut p = x;
                let mut m = x;
                p[i] += h;
                m[i] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
            .collect();
        let gn = norm2(&g);
        let z = b4.normal_vector(&x).unwrap();
        for i in 0..2 {
            assert!((z[i] - g[i] / gn).abs() < 1e-8);
        }
    }

    #[test]
    fn structure_constant_examples() {
        let b2 = StructuredSet::pnorm_ball(2.0, vec![0.0, 0.0]).unwrap();
        assert_eq!(b2.structure_constants(), StructureConstants { alpha: 1.0, beta: 1.0 });
        let b3 = StructuredSet::pnorm_ball(3.0, vec![0.0, 0.0]).unwrap();
        let c = b3.structure_constants();
        assert_eq!(c.alpha, 0.0);
        assert!(close(c.beta, 2f64.powf(7.0 / 6.0), 1e-15));
        assert!(close(c.beta, 2.2449, 1e-4));
        let ball = StructuredSet::ball(vec![3.0, -1.0], 2.0).unwrap();
        assert_eq!(ball.structure_constants(), StructureConstants { alpha: 0.5, beta: 0.5 });
        let h = StructuredSet::halfspace(vec![1.0, 1.0], 1.0).unwrap();
        assert_eq!(h.structure_constants(), StructureConstants { alpha: 0.0, beta: 0.0 });
    }

    #[test]
    fn ellipsoid_constants_follow_affine_rule() {
        let a = Matrix::from_diag(&[1.0, 3.0]);
        let e = StructuredSet::pnorm_ellipsoid(a, vec![0.1, 0.0], 2.0, 1.0).unwrap();
        let c = e.structure_constants();
        assert!(close(c.alpha, 1.0 / 3.0, 1e-14));
        assert!(close(c.beta, 9.0, 1e-14));
    }

    #[test]
    fn combine_examples() {
        let two = StructureConstants { alpha: 2.0f64, beta: 2.0 };
        let s = combine_constants(CombineOp::MinkowskiSum, &[two, two]).unwrap();
        assert_eq!(s, StructureConstants { alpha: 1.0, beta: 1.0 });
        let i = combine_constants(
            CombineOp::Intersection,
            &[StructureConstants { alpha: 1.0f64, beta: 1.0 }, StructureConstants { alpha: 3.0, beta: 3.0 }],
        )
        .unwrap();
        assert_eq!(i.alpha, 1.0);
        assert!(i.beta.is_infinite());
        let id = combine_constants(CombineOp::Affine { lambda_min: 1.0, lambda_max: 1.0 }, &[two]).unwrap();
        assert_eq!(id, two);
        let sing = combine_constants(CombineOp::Affine { lambda_min: 0.0, lambda_max: 4.0 }, &[two]).unwrap();
        assert_eq!(sing.alpha, 0.0);
        assert!(sing.beta.is_infinite());
        // Sum with a nonsmooth, non strongly convex set.
        let flat = StructureConstants { alpha: 0.0, beta: f64::INFINITY };
        let s = combine_constants(CombineOp::MinkowskiSum, &[two, flat]).unwrap();
        assert_eq!(s, StructureConstants { alpha: 0.0, beta: 2.0 });
        assert!(combine_constants::<f64>(CombineOp::Intersection, &[]).is_err());
    }

    #[test]
    fn radius_bound_examples() {
        let b = StructuredSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(b.radius_bounds(&[0.0, 0.0]).unwrap(), RadiusBounds { r: 1.0, d: 1.0 });
        let h = StructuredSet::halfspace(vec![2.0f64, 0.0], 4.0).unwrap();
        let rb = h.radius_bounds(&[0.0, 0.0]).unwrap();
        assert_eq!(rb.r, 2.0);
        assert!(rb.d.is_infinite());
        let b = StructuredSet::ball(vec![0.5, 0.0], 1.0).unwrap();
        assert_eq!(b.radius_bounds(&[0.0, 0.0]).unwrap(), RadiusBounds { r: 0.5, d: 1.5 });
        assert!(matches!(b.radius_bounds(&[2.0, 0.0]), Err(Error::NotInterior)));
    }

    #[test]
    fn hull_boundary_and_normals() {
        // Ball below the origin: c = (0, -2), rho = 1.
        let h = StructuredSet::hull_ball_origin(vec![0.0, -2.0], 1.0).unwrap();
        assert!(h.contains(&[0.0, 0.0]).unwrap());
        assert!(h.contains(&[0.0, -2.9]).unwrap());
        assert!(!h.contains(&[0.0, 0.1]).unwrap());
        assert!(matches!(h.normal_vector(&[0.0, 0.0]), Err(Error::AmbiguousNormal)));
        // Far pole of the ball.
        let z = h.normal_vector(&[0.0, -3.0]).unwrap();
        assert!(close(z[1], -1.0, 1e-15));
        // Near pole is interior to the hull.
        assert!(matches!(h.normal_vector(&[0.0, -1.0]), Err(Error::NotOnBoundary(_))));
        // Midpoint of a tangent segment: tangency at (√3/2, -3/2).
        let t = [3f64.sqrt() / 2.0, -1.5];
        let mid = [t[0] / 2.0, t[1] / 2.0];
        let zm = h.normal_vector(&mid).unwrap();
        let zt = h.normal_vector(&t).unwrap();
        for i in 0..2 {
            assert!((zm[i] - zt[i]).abs() < 1e-12);
        }
        // Cone facets support through the apex.
        assert!(dot(&zt, &t).abs() < 1e-12);
    }

    #[test]
    fn json_roundtrip_all_variants() {
        let sets = vec![
            StructuredSet::halfspace(vec![2.0, 0.1], 4.0).unwrap(),
            StructuredSet::ball(vec![0.5, 1.0 / 3.0], 1.0).unwrap(),
            StructuredSet::pnorm_ball(1.5, vec![0.1, 0.2]).unwrap(),
            StructuredSet::pnorm_ellipsoid(
                Matrix::from_rows(vec![vec![1.0, 0.2], vec![0.3, 2.0]]).unwrap(),
                vec![0.1, -0.7],
                4.0,
                1.25,
            )
            .unwrap(),
            StructuredSet::hull_ball_origin(vec![0.0, -2.0], 0.7).unwrap(),
        ];
        for s in sets {
            let js = serde_json::to_string(&s).unwrap();
            let back: StructuredSet<f64> = serde_json::from_str(&js).unwrap();
            assert_eq!(back, s, "{js}");
        }
        let js = r#"{"kind":"pnorm_ellipsoid","A":[[1.0,0.0],[0.0,2.0]],"b":[0.0,0.0],"p":2.0,"tau":1.0}"#;
        let s: StructuredSet<f64> = serde_json::from_str(js).unwrap();
        assert_eq!(s.kind(), "pnorm_ellipsoid");
        let bad = r#"{"kind":"halfspace","a":[1.0],"b":-1.0}"#;
        assert!(serde_json::from_str::<StructuredSet<f64>>(bad).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let b = StructuredSet::<f32>::pnorm_ball(3.0, vec![0.0, 0.0]).unwrap();
        let x = [1.0f32 / 2f32.powf(1.0 / 3.0), 1.0 / 2f32.powf(1.0 / 3.0)];
        assert!(b.on_boundary(&x).unwrap());
        let z = b.normal_vector(&x).unwrap();
        assert!((z[0] - 0.5f32.sqrt()).abs() < 1e-6);
    }
}
