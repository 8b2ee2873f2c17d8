//! Gauge evaluation and the structure of the half gauge squared: subgradients,
//! ball-gauge Hessians and their spectra, local and global strong convexity /
//! smoothness constants, converse certificates and the tightness witness.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, dot, norm2, norm2_sq, norm_inf, GramSpectrum, Matrix};
use crate::scalar::Scalar;
use crate::sets::{self, Ball, RadiusBounds, StructureConstants, StructuredSet};

/// A set together with a strictly interior center `e`.
#[derive(Clone, Debug)]
pub struct GaugeOracle<T: Scalar> {
    set: StructuredSet<T>,
    e: Vec<T>,
    bounds: RadiusBounds<T>,
    lipschitz_m: T,
    kernel: Kernel<T>,
}

/// Per-variant data precomputed at construction.
#[derive(Clone, Debug)]
enum Kernel<T> {
    Halfspace { slack: T },
    /// Level set `‖u + t v‖_p = τ` in the image space of the set's linear map
    /// (identity for balls); `u` is the image of `e`.
    Level { u: Vec<T>, p: T, tau: T },
    Hull,
}

/// Result of one gauge evaluation at `y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeEval<T> {
    pub value: T,
    /// `ȳ = e + (y − e)/value`; absent when `value = 0`.
    pub boundary_point: Option<Vec<T>>,
    /// Unit normal at `ȳ`; absent when `value = 0`.
    pub unit_normal: Option<Vec<T>>,
    /// `ζᵀ(ȳ − e)`; zero when `value = 0`.
    pub support: T,
    /// `g = value · ζ / (ζᵀ(ȳ − e)) ∈ ∂(½γ²)(y)`.
    pub half_sq_subgrad: Vec<T>,
}

impl<T: Scalar> GaugeEval<T> {
    /// `ζ / ζᵀ(ȳ − e) ∈ ∂γ(y)` (zero vector when the gauge vanishes).
    pub fn gauge_subgradient(&self) -> Vec<T> {
        match &self.unit_normal {
            Some(z) => linalg::scale(self.support.recip(), z),
            None => vec![T::zero(); self.half_sq_subgrad.len()],
        }
    }
}

/// Local constants of `½γ²` from Theorems on gauge strong convexity and
/// smoothness, with their simplified bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalStructure<T> {
    pub mu_local: T,
    pub l_local: T,
    pub mu_lower_bound: T,
    pub l_upper_bound: T,
}

/// Strong convexity and smoothness of `½γ²` over the whole space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalStructure<T> {
    pub mu: T,
    pub l: T,
}

impl<T: Scalar> GlobalStructure<T> {
    /// Keeps the larger strong convexity and the smaller smoothness constant.
    pub fn tightest(self, other: Self) -> Self {
        Self { mu: self.mu.max(other.mu), l: self.l.min(other.l) }
    }
}

/// Scalar safeguarded Newton for `φ(t) = 0` where `φ` is convex, `φ(lo) ≤ 0`
/// and `φ(hi) ≥ 0`. Newton from the right end of a convex increasing branch
/// never overshoots; anything else falls back to bisection.
fn safeguarded_newton<T: Scalar, F: Fn(T) -> (T, T)>(phi: F, mut lo: T, mut hi: T) -> Result<T> {
    let tol = T::root_tol();
    let half = T::lit(0.5);
    let mut t = hi;
    for _ in 0..200 {
        let (f, df) = phi(t);
        if f == T::zero() {
            return Ok(t);
        }
        if f > T::zero() {
            hi = hi.min(t);
        } else {
            lo = lo.max(t);
        }
        let mut next = if df > T::zero() { t - f / df } else { T::nan() };
        if !(next > lo && next < hi) {
            next = half * (lo + hi);
        }
        if (next - t).abs() <= tol * next.abs() || hi - lo <= tol * hi {
            return Ok(next);
        }
        t = next;
    }
    for _ in 0..400 {
        let mid = half * (lo + hi);
        if hi - lo <= tol * hi {
            return Ok(mid);
        }
        if phi(mid).0 > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::NoConvergence("gauge root finder".into()))
}

/// Exit parameter `t > 0` of `‖u + t v‖_2 = τ` given `‖u‖ < τ`.
fn quadratic_exit<T: Scalar>(u: &[T], v: &[T], tau: T) -> T {
    let vv = dot(v, v);
    let uv = dot(u, v);
    let k = (tau - linalg::norm2(u)) * (tau + linalg::norm2(u));
    let disc = (uv * uv + k * vv).max(T::zero());
    let sq = disc.sqrt();
    // Stable root of vv t² + 2 uv t − k = 0.
    if uv >= T::zero() {
        k / (uv + sq)
    } else {
        (sq - uv) / vv
    }
}

/// Exit parameter for `‖u + t v‖_p = τ`, using the quartic polynomial when
/// `p = 4` and the power-sum otherwise.
fn pnorm_exit<T: Scalar>(u: &[T], v: &[T], p: T, tau: T, lo: T, hi: T) -> Result<T> {
    // Rescale so the unknown is O(τ) regardless of ‖v‖.
    let vs = norm_inf(v);
    let vt: Vec<T> = v.iter().map(|&x| x / vs).collect();
    let lo_s = lo * vs;
    let mut hi_s = hi * vs;
    let taup = tau.powf(p);
    let s = if p == T::lit(4.0) {
        let (mut c0, mut c1, mut c2, mut c3, mut c4) = (-taup, T::zero(), T::zero(), T::zero(), T::zero());
        for (&a, &b) in u.iter().zip(&vt) {
            let (a2, b2) = (a * a, b * b);
            c0 = c0 + a2 * a2;
            c1 = c1 + a2 * a * b;
            c2 = c2 + a2 * b2;
            c3 = c3 + a * b2 * b;
            c4 = c4 + b2 * b2;
        }
        let (c1, c2, c3) = (T::lit(4.0) * c1, T::lit(6.0) * c2, T::lit(4.0) * c3);
        let phi = |t: T| {
            let f = (((c4 * t + c3) * t + c2) * t + c1) * t + c0;
            let df = ((T::lit(4.0) * c4 * t + T::lit(3.0) * c3) * t + T::lit(2.0) * c2) * t + c1;
            (f, df)
        };
        if !hi_s.is_finite() {
            hi_s = grow_bracket(&phi, lo_s)?;
        }
        safeguarded_newton(phi, lo_s, hi_s)?
    } else {
        let pm1 = p - T::one();
        let phi = |t: T| {
            let mut f = -taup;
            let mut df = T::zero();
            for (&a, &b) in u.iter().zip(&vt) {
                let w = a + t * b;
                let aw = w.abs();
                if aw > T::zero() {
                    let pw = aw.powf(pm1);
                    f = f + pw * aw;
                    df = df + p * pw * w.signum() * b;
                }
            }
            (f, df)
        };
        if !hi_s.is_finite() {
            hi_s = grow_bracket(&phi, lo_s)?;
        }
        safeguarded_newton(phi, lo_s, hi_s)?
    };
    Ok(s / vs)
}

fn grow_bracket<T: Scalar, F: Fn(T) -> (T, T)>(phi: &F, lo: T) -> Result<T> {
    let mut hi = lo.max(T::one()) * T::lit(2.0);
    for _ in 0..2000 {
        if phi(hi).0 >= T::zero() {
            return Ok(hi);
        }
        hi = hi * T::lit(2.0);
    }
    Err(Error::NoConvergence("gauge bracket".into()))
}

impl<T: Scalar> GaugeOracle<T> {
    pub fn new(set: StructuredSet<T>, e: Vec<T>) -> Result<Self> {
        check_dim(set.dim(), e.len())?;
        if !set.contains(&e)? {
            return Err(Error::NotInterior);
        }
        let bounds = set.radius_bounds(&e)?;
        let kernel = match &set {
            StructuredSet::Halfspace(h) => Kernel::Halfspace { slack: h.b() - dot(h.a(), &e) },
            StructuredSet::Ball(b) => Kernel::Level { u: linalg::sub(&e, b.center()), p: T::lit(2.0), tau: b.radius() },
            StructuredSet::PnormBall(b) => Kernel::Level { u: linalg::sub(&e, b.offset()), p: b.p(), tau: T::one() },
            StructuredSet::PnormEllipsoid(el) => {
                Kernel::Level { u: linalg::sub(&el.matrix().matvec(&e)?, el.b()), p: el.p(), tau: el.tau() }
            }
            StructuredSet::HullBallOrigin(_) => Kernel::Hull,
        };
        Ok(Self { set, e, bounds, lipschitz_m: bounds.r.recip(), kernel })
    }

    /// Oracle centered at the origin.
    pub fn at_origin(set: StructuredSet<T>) -> Result<Self> {
        let n = set.dim();
        Self::new(set, vec![T::zero(); n])
    }

    pub fn set(&self) -> &StructuredSet<T> {
        &self.set
    }

    pub fn center(&self) -> &[T] {
        &self.e
    }

    pub fn dim(&self) -> usize {
        self.e.len()
    }

    /// Cached `R` (inner radius around `e`).
    pub fn inner_radius(&self) -> T {
        self.bounds.r
    }

    /// Cached `D` (outer radius around `e`, possibly `∞`).
    pub fn outer_radius(&self) -> T {
        self.bounds.d
    }

    /// Lipschitz constant `M = 1/R` of the gauge.
    pub fn lipschitz(&self) -> T {
        self.lipschitz_m
    }

    /// Image of `x` under the set's linear map (identity except for ellipsoids).
    fn image(&self, x: &[T]) -> Result<Vec<T>> {
        match &self.set {
            StructuredSet::PnormEllipsoid(el) => el.matrix().matvec(x),
            _ => Ok(x.to_vec()),
        }
    }

    /// Gauge value only.
    pub fn value(&self, y: &[T]) -> Result<T> {
        Ok(self.value_and_image(y)?.0)
    }

    /// Returns `(γ(y), y − e, A(y − e))`.
    fn value_and_image(&self, y: &[T]) -> Result<(T, Vec<T>, Vec<T>)> {
        check_dim(self.dim(), y.len())?;
        if !linalg::all_finite(y) {
            return Err(Error::NonFinite);
        }
        let d = linalg::sub(y, &self.e);
        let dn = norm2(&d);
        if dn == T::zero() {
            return Ok((T::zero(), d, Vec::new()));
        }
        match &self.kernel {
            Kernel::Halfspace { slack } => {
                let StructuredSet::Halfspace(h) = &self.set else { unreachable!() };
                let ad = dot(h.a(), &d);
                Ok((ad.max(T::zero()) / *slack, d, Vec::new()))
            }
            Kernel::Level { u, p, tau } => {
                let v = self.image(&d)?;
                if norm_inf(&v) == T::zero() {
                    return Ok((T::zero(), d, v));
                }
                let t = if *p == T::lit(2.0) {
                    quadratic_exit(u, &v, *tau)
                } else {
                    let lo = self.bounds.r / dn;
                    let hi = self.bounds.d / dn;
                    pnorm_exit(u, &v, *p, *tau, lo, hi)?
                };
                Ok((t.recip(), d, v))
            }
            Kernel::Hull => {
                // Monotone bisection on membership along the ray.
                let mut lo = self.bounds.r / dn;
                let mut hi = self.bounds.d / dn;
                let half = T::lit(0.5);
                for _ in 0..400 {
                    let mid = half * (lo + hi);
                    if hi - lo <= T::epsilon() * hi {
                        break;
                    }
                    let x: Vec<T> = self.e.iter().zip(&d).map(|(&ei, &di)| ei + mid * di).collect();
                    if self.set.contains(&x)? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok((lo.recip(), d, Vec::new()))
            }
        }
    }

    /// Full evaluation: value, boundary point, unit normal and a subgradient
    /// of `½γ²`.
    pub fn gauge(&self, y: &[T]) -> Result<GaugeEval<T>> {
        let (value, d, v) = self.value_and_image(y)?;
        if value == T::zero() {
            return Ok(GaugeEval {
                value,
                boundary_point: None,
                unit_normal: None,
                support: T::zero(),
                half_sq_subgrad: vec![T::zero(); d.len()],
            });
        }
        let inv = value.recip();
        let ybar: Vec<T> = self.e.iter().zip(&d).map(|(&ei, &di)| ei + di * inv).collect();
        let zeta = match (&self.kernel, &self.set) {
            (Kernel::Halfspace { .. }, StructuredSet::Halfspace(h)) => {
                let n = norm2(h.a());
                h.a().iter().map(|&x| x / n).collect()
            }
            (Kernel::Level { u, p, .. }, set) => {
                let wbar: Vec<T> = u.iter().zip(&v).map(|(&ui, &vi)| ui + vi * inv).collect();
                let grad = sets::pnorm_grad(&wbar, *p);
                let raw = match set {
                    StructuredSet::PnormEllipsoid(el) => el.matrix().tmatvec(&grad)?,
                    _ => grad,
                };
                let n = norm2(&raw);
                if n == T::zero() {
                    return Err(Error::AmbiguousNormal);
                }
                raw.into_iter().map(|x| x / n).collect()
            }
            (Kernel::Hull, StructuredSet::HullBallOrigin(h)) => match self.set.normal_vector(&ybar) {
                // At the apex any normal-cone element will do; −c is one.
                Err(Error::AmbiguousNormal) => {
                    let n = norm2(h.center());
                    h.center().iter().map(|&x| -x / n).collect()
                }
                other => other?,
            },
            _ => self.set.normal_vector(&ybar)?,
        };
        let support = dot(&zeta, &d) * inv;
        if !(support > T::zero()) {
            return Err(Error::NonPositiveSupport(support.f64()));
        }
        let coef = value / support;
        let half_sq_subgrad = zeta.iter().map(|&z| z * coef).collect();
        Ok(GaugeEval { value, boundary_point: Some(ybar), unit_normal: Some(zeta), support, half_sq_subgrad })
    }

    /// Local constants at `eval`, handling `γ(y) = 0` with the radius
    /// constants `1/D²` and `1/R²`.
    pub fn local_structure(&self, eval: &GaugeEval<T>, consts: StructureConstants<T>) -> Result<LocalStructure<T>> {
        if eval.value == T::zero() {
            let mu = if self.bounds.d.is_finite() { (self.bounds.d * self.bounds.d).recip() } else { T::zero() };
            let l = (self.bounds.r * self.bounds.r).recip();
            return Ok(LocalStructure { mu_local: mu, l_local: l, mu_lower_bound: mu, l_upper_bound: l });
        }
        local_structure(eval, &self.e, consts.alpha, consts.beta)
    }

    /// Local constants of `½γ²` at `y`, computed in the image space of the
    /// set's linear map and transported back by the spectrum of `AᵀA`.
    pub fn local_structure_at(&self, y: &[T]) -> Result<LocalStructure<T>> {
        let eval = self.gauge(y)?;
        if eval.value == T::zero() {
            return self.local_structure(&eval, self.set.structure_constants());
        }
        let ybar = eval.boundary_point.as_ref().expect("positive gauge has a boundary point");
        match (&self.set, &self.kernel) {
            (StructuredSet::PnormEllipsoid(el), Kernel::Level { u, p, .. }) => {
                let wbar = linalg::sub(&el.matrix().matvec(ybar)?, el.b());
                let c = sets::pnorm_local_constants(&wbar, *p);
                let grad = sets::pnorm_grad(&wbar, *p);
                let gn = norm2(&grad);
                let zeta: Vec<T> = grad.iter().map(|&g| g / gn).collect();
                let rel = linalg::sub(&wbar, u);
                let local = local_structure_raw(&zeta, &rel, c.alpha, c.beta)?;
                let sp = el.spectrum();
                Ok(LocalStructure {
                    mu_local: local.mu_local * sp.lambda_min,
                    l_local: local.l_local * sp.lambda_max,
                    mu_lower_bound: local.mu_lower_bound * sp.lambda_min,
                    l_upper_bound: local.l_upper_bound * sp.lambda_max,
                })
            }
            _ => {
                let c = self.set.local_constants(ybar)?;
                local_structure(&eval, &self.e, c.alpha, c.beta)
            }
        }
    }
}

/// Local constants from the support `s = ζᵀ(ȳ − e)` and the offset `ȳ − e`.
fn local_structure_raw<T: Scalar>(zeta: &[T], rel: &[T], alpha: T, beta: T) -> Result<LocalStructure<T>> {
    let s = dot(zeta, rel);
    if !(s > T::zero()) {
        return Err(Error::NonPositiveSupport(s.f64()));
    }
    let four = T::lit(4.0);
    let s3 = s * s * s;
    let d2 = dot(rel, rel);
    // Squared tangential part d² − s², formed without cancellation.
    let tan2 = norm2_sq(&rel.iter().zip(zeta).map(|(&r, &z)| r - s * z).collect::<Vec<_>>());
    // x² − 4ks³ = (s − kd²)² + 4ks(d² − s²) keeps the double root accurate.
    let disc_of = |k: T| {
        let a = s - k * d2;
        a * a + four * k * s * tan2
    };
    let (mu_local, mu_lower_bound) = if alpha > T::zero() {
        let x = s + alpha * d2;
        let disc = disc_of(alpha);
        // Rationalized form of (x − √disc)/(2s³).
        (T::lit(2.0) * alpha / (x + disc.sqrt()), alpha / x)
    } else {
        (T::zero(), T::zero())
    };
    let (l_local, l_upper_bound) = if beta.is_infinite() {
        (T::infinity(), T::infinity())
    } else {
        let x = s + beta * d2;
        let disc = disc_of(beta);
        ((x + disc.sqrt()) / (T::lit(2.0) * s3), x / s3)
    };
    Ok(LocalStructure { mu_local, l_local, mu_lower_bound, l_upper_bound })
}

/// Local strong convexity and smoothness of `½γ²` at an evaluation with
/// positive gauge, given the set's local constants at `ȳ`. Uses the frame
/// recentered at `e`: `s = ζᵀ(ȳ − e)`, `d = ‖ȳ − e‖`.
pub fn local_structure<T: Scalar>(eval: &GaugeEval<T>, e: &[T], alpha: T, beta: T) -> Result<LocalStructure<T>> {
    let (Some(ybar), Some(zeta)) = (&eval.boundary_point, &eval.unit_normal) else {
        return Err(Error::ZeroGauge);
    };
    check_dim(ybar.len(), e.len())?;
    local_structure_raw(zeta, &linalg::sub(ybar, e), alpha, beta)
}

/// Corollary bounds `μ = α/(D + αD²)` and `L = (R + βD²)/R³`.
fn corollary<T: Scalar>(c: StructureConstants<T>, r: T, d: T) -> GlobalStructure<T> {
    let mu = if c.alpha > T::zero() && d.is_finite() { c.alpha / (d + c.alpha * d * d) } else { T::zero() };
    let l = if c.beta.is_infinite() {
        T::infinity()
    } else if c.beta == T::zero() {
        (r * r).recip()
    } else if d.is_infinite() {
        T::infinity()
    } else {
        (r + c.beta * d * d) / (r * r * r)
    };
    GlobalStructure { mu, l }
}

/// Global constants of `½γ²` from the corollary bounds. Ellipsoids also try
/// the image-space ball route with the spectrum transform and keep the
/// tighter result.
pub fn global_structure<T: Scalar>(oracle: &GaugeOracle<T>) -> GlobalStructure<T> {
    let direct = corollary(oracle.set.structure_constants(), oracle.bounds.r, oracle.bounds.d);
    match (&oracle.set, &oracle.kernel) {
        (StructuredSet::PnormEllipsoid(el), Kernel::Level { u, p, tau }) => {
            let Ok(image) = StructuredSet::pnorm_ball(*p, vec![T::zero(); u.len()]) else {
                return direct;
            };
            // Image set {w : ‖w − b‖_p ≤ τ} scaled to the unit ball.
            let scaled_center: Vec<T> = u.iter().map(|&x| x / *tau).collect();
            let Ok(rb) = image.radius_bounds(&scaled_center) else {
                return direct;
            };
            let unit = corollary(image.structure_constants(), rb.r, rb.d);
            let t2 = *tau * *tau;
            let (mu, l) = transform_structure(unit.mu / t2, unit.l / t2, el.spectrum());
            direct.tightest(GlobalStructure { mu, l })
        }
        _ => direct,
    }
}

/// Closed-form constants where the set family has them: halfspaces,
/// centered p-norm balls, balls and Euclidean ellipsoids. These are the
/// extremal values of the simplified local bounds over the boundary.
pub fn tabulated_structure<T: Scalar>(oracle: &GaugeOracle<T>) -> Option<GlobalStructure<T>> {
    let e = &oracle.e;
    // Ball of radius r whose center sits at distance c from e.
    let ball_row = |r: T, c: T| {
        let mu = ((r + c) * (T::lit(2.0) * r + c)).recip();
        let l = (T::lit(2.0) * r - c) / (r * (r - c) * (r - c));
        GlobalStructure { mu, l }
    };
    match &oracle.set {
        StructuredSet::Halfspace(_) => {
            let r = oracle.bounds.r;
            Some(GlobalStructure { mu: T::zero(), l: (r * r).recip() })
        }
        StructuredSet::PnormBall(b) => {
            if b.offset() == e.as_slice() {
                let c = sets::pnorm_unit_constants(b.p(), e.len());
                let mu = c.alpha;
                Some(GlobalStructure { mu, l: c.beta })
            } else if b.p() == T::lit(2.0) {
                Some(ball_row(T::one(), norm2(&linalg::sub(e, b.offset()))))
            } else {
                None
            }
        }
        StructuredSet::Ball(b) => {
            let c = norm2(&linalg::sub(e, b.center()));
            if c == T::zero() {
                let k = (b.radius() * b.radius()).recip();
                Some(GlobalStructure { mu: k, l: k })
            } else {
                Some(ball_row(b.radius(), c))
            }
        }
        StructuredSet::PnormEllipsoid(el) if el.p() == T::lit(2.0) => {
            let Kernel::Level { u, .. } = &oracle.kernel else { return None };
            let row = ball_row(el.tau(), norm2(u));
            let (mu, l) = transform_structure(row.mu, row.l, el.spectrum());
            Some(GlobalStructure { mu, l })
        }
        _ => None,
    }
}

/// Tightest certified global constants available for the oracle.
pub fn certified_structure<T: Scalar>(oracle: &GaugeOracle<T>) -> GlobalStructure<T> {
    let g = global_structure(oracle);
    match tabulated_structure(oracle) {
        Some(t) => g.tightest(t),
        None => g,
    }
}

/// Constants of `½γ²_E` for `E = A⁻¹S` from those of `½γ²_S`.
pub fn transform_structure<T: Scalar>(mu: T, l: T, spectrum: GramSpectrum<T>) -> (T, T) {
    let mu2 = if spectrum.lambda_min == T::zero() { T::zero() } else { mu * spectrum.lambda_min };
    let l2 = if l.is_infinite() { l } else { l * spectrum.lambda_max };
    (mu2, l2)
}

/// Inf-form gauge of the ball `B(c, r)` at `z` (the ball need not contain
/// the origin). Returns `∞` when the ray through `z` misses the ball.
pub fn ball_gauge<T: Scalar>(c: &[T], r: T, z: &[T]) -> Result<T> {
    check_dim(c.len(), z.len())?;
    if !linalg::all_finite(c) || !linalg::all_finite(z) || !r.is_finite() {
        return Err(Error::NonFinite);
    }
    let zz = dot(z, z);
    if zz == T::zero() {
        return Ok(T::zero());
    }
    let cz = dot(c, z);
    let k = r * r - dot(c, c);
    if k == T::zero() {
        // Origin on the sphere: the quadratic degenerates to a linear equation.
        return Ok(if cz > T::zero() { zz / (T::lit(2.0) * cz) } else { T::infinity() });
    }
    Ok(sets::inf_ball_gauge(c, r, z))
}

fn check_unit<T: Scalar>(zeta: &[T]) -> Result<()> {
    let n = norm2(zeta);
    if (n - T::one()).abs() > T::lit(1e-10).max(T::epsilon() * T::lit(16.0)) {
        return Err(Error::InvalidParameter(format!("normal must be a unit vector (norm {n})")));
    }
    Ok(())
}

/// Hessian of `½γ_B²` at `ȳ` for the ball `B(ȳ − rζ, r)` tangent at `ȳ`:
/// `(1/(ζ̄ᵀȳ)³)[(ζ̄ᵀȳ + ‖ȳ‖²) ζ̄ζ̄ᵀ − ζ̄ᵀȳ (ζ̄ȳᵀ + ȳζ̄ᵀ) + (ζ̄ᵀȳ)² I]`, `ζ̄ = rζ`.
pub fn ball_gauge_hessian<T: Scalar>(y_bar: &[T], zeta: &[T], r: T) -> Result<Matrix<T>> {
    check_dim(y_bar.len(), zeta.len())?;
    check_unit(zeta)?;
    if !(r > T::zero()) {
        return Err(Error::InvalidParameter("radius must be positive".into()));
    }
    let zb: Vec<T> = zeta.iter().map(|&z| z * r).collect();
    let s = dot(&zb, y_bar);
    if !(s > T::zero()) {
        return Err(Error::NonPositiveSupport(dot(zeta, y_bar).f64()));
    }
    let yy = dot(y_bar, y_bar);
    let n = y_bar.len();
    let inv = (s * s * s).recip();
    let mut h = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut v = (s + yy) * zb[i] * zb[j] - s * (zb[i] * y_bar[j] + y_bar[i] * zb[j]);
            if i == j {
                v = v + s * s;
            }
            h[(i, j)] = v * inv;
        }
    }
    Ok(h)
}

/// Closed-form spectrum of [`ball_gauge_hessian`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianSpectrum<T> {
    pub lambda_min: T,
    /// Eigenvalue `1/(rζᵀȳ)` of multiplicity `n − 2`.
    pub lambda_mid: T,
    pub lambda_max: T,
    /// `(1/r)/(ζᵀȳ + ‖ȳ‖²/r) ≤ λ_min`.
    pub min_lower_bound: T,
    /// `λ_max ≤ (ζᵀȳ + ‖ȳ‖²/r)/(ζᵀȳ)³`.
    pub max_upper_bound: T,
}

pub fn hessian_eigenvalues<T: Scalar>(y_bar: &[T], zeta: &[T], r: T) -> Result<HessianSpectrum<T>> {
    check_dim(y_bar.len(), zeta.len())?;
    check_unit(zeta)?;
    if !(r > T::zero()) {
        return Err(Error::InvalidParameter("radius must be positive".into()));
    }
    let s = dot(zeta, y_bar);
    if !(s > T::zero()) {
        return Err(Error::NonPositiveSupport(s.f64()));
    }
    let rinv = r.recip();
    let yy = dot(y_bar, y_bar);
    let x = s + yy * rinv;
    let s3 = s * s * s;
    let tan2 = norm2_sq(&y_bar.iter().zip(zeta).map(|(&y, &z)| y - s * z).collect::<Vec<_>>());
    let a = s - yy * rinv;
    let disc = a * a + T::lit(4.0) * s * tan2 * rinv;
    if !(disc >= T::zero()) {
        return Err(Error::NegativeDiscriminant(disc.f64()));
    }
    let sq = disc.sqrt();
    let lambda_max = (x + sq) / (T::lit(2.0) * s3);
    // λ_min λ_max = 1/(r s³); the product form avoids cancellation.
    let lambda_min = T::lit(2.0) * rinv / (x + sq);
    Ok(HessianSpectrum {
        lambda_min,
        lambda_mid: (r * s).recip(),
        lambda_max,
        min_lower_bound: rinv / x,
        max_upper_bound: x / s3,
    })
}

/// Nonzero eigenvalues `(low, high)` of `C1 aaᵀ + C2(abᵀ + baᵀ) + C3 bbᵀ`;
/// every other eigenvalue is zero.
pub fn rank2_eigenvalues<T: Scalar>(a: &[T], b: &[T], c1: T, c2: T, c3: T) -> Result<(T, T)> {
    check_dim(a.len(), b.len())?;
    let aa = dot(a, a);
    let bb = dot(b, b);
    let ab = dot(a, b);
    let tr = c1 * aa + T::lit(2.0) * c2 * ab + c3 * bb;
    let gram = (aa * bb - ab * ab).max(T::zero());
    let det = (c1 * c3 - c2 * c2) * gram;
    let disc = (tr * tr - T::lit(4.0) * det).max(T::zero());
    let sq = disc.sqrt();
    let half = T::lit(0.5);
    // Pair the larger-magnitude root with its stable formula.
    if tr >= T::zero() {
        let high = half * (tr + sq);
        let low = if high != T::zero() { det / high } else { half * (tr - sq) };
        Ok((low, high))
    } else {
        let low = half * (tr - sq);
        let high = if low != T::zero() { det / low } else { half * (tr + sq) };
        Ok((low, high))
    }
}

/// Local ball certificates implied by the converse theorems.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificates<T: Scalar> {
    /// Ball that locally contains the set (present when `μ > 0`).
    pub outer: Option<Ball<T>>,
    /// Ball locally contained in the set (present when `L < ∞`).
    pub inner: Option<Ball<T>>,
}

pub fn converse_certificate<T: Scalar>(eval: &GaugeEval<T>, mu: T, l: T) -> Result<Certificates<T>> {
    let (Some(ybar), Some(zeta)) = (&eval.boundary_point, &eval.unit_normal) else {
        return Err(Error::ZeroGauge);
    };
    let s = eval.support;
    let make = |k: T| -> Result<Option<Ball<T>>> {
        if !(k > T::zero()) || !k.is_finite() {
            return Ok(None);
        }
        let rad = (k * s).recip();
        if !rad.is_finite() {
            return Ok(None);
        }
        let c = ybar.iter().zip(zeta).map(|(&y, &z)| y - z * rad).collect();
        Ball::new(c, rad).map(Some)
    };
    Ok(Certificates { outer: make(mu)?, inner: make(l)? })
}

/// The extremal witness: a ball of curvature `γ` merged with the origin,
/// with boundary point `ȳ = (√(D² − R²), −R)` and normal `ζ = (0, −1)`.
#[derive(Clone, Debug)]
pub struct TightnessWitness<T: Scalar> {
    pub set: StructuredSet<T>,
    pub y_bar: Vec<T>,
    pub zeta: Vec<T>,
    /// Radius `1/γ` of the ball facet through `ȳ`.
    pub radius: T,
}

pub fn tightness_instance<T: Scalar>(gamma: T, r: T, d: T) -> Result<TightnessWitness<T>> {
    if !(gamma > T::zero() && r > T::zero() && r <= d) || !gamma.is_finite() || !d.is_finite() {
        return Err(Error::InvalidParameter("requires gamma > 0 and 0 < R <= D".into()));
    }
    let radius = gamma.recip();
    let y_bar = vec![((d - r) * (d + r)).sqrt(), -r];
    let zeta = vec![T::zero(), -T::one()];
    let c = vec![y_bar[0], y_bar[1] + radius];
    let set = StructuredSet::hull_ball_origin(c, radius)?;
    Ok(TightnessWitness { set, y_bar, zeta, radius })
}

/// Closed-form extreme Hessian eigenvalues at the witness:
/// `(1/(2R³))(R + γD² ∓ √((R + γD²)² − 4γR³))`.
pub fn tightness_eigenvalues<T: Scalar>(gamma: T, r: T, d: T) -> (T, T) {
    let x = r + gamma * d * d;
    let r3 = r * r * r;
    let a = r - gamma * d * d;
    let sq = (a * a + T::lit(4.0) * gamma * r * (d - r) * (d + r)).sqrt();
    let two_r3 = T::lit(2.0) * r3;
    ((x - sq) / two_r3, (x + sq) / two_r3)
}

/// Samples boundary points along uniformly random directions and returns the
/// extreme local constants `(min μ_local, max L_local)`.
pub fn estimate_constants_by_sampling<T: Scalar, R: Rng + ?Sized>(
    oracle: &GaugeOracle<T>,
    samples: usize,
    rng: &mut R,
) -> Result<(T, T)> {
    let n = oracle.dim();
    let mut mu = T::infinity();
    let mut l = T::zero();
    let mut taken = 0usize;
    while taken < samples {
        let dir: Vec<T> = (0..n).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect();
        let dn = norm2(&dir);
        if dn == T::zero() {
            continue;
        }
        let y: Vec<T> = oracle.e.iter().zip(&dir).map(|(&e, &x)| e + x / dn).collect();
        let ls = oracle.local_structure_at(&y)?;
        mu = mu.min(ls.mu_local);
        l = l.max(ls.l_local);
        taken += 1;
    }
    Ok((mu, l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / 1f64.max(b.abs())
    }

    #[test]
    fn hull_cone_facet_and_apex() {
        // Rays from e cross the tangent cone, the ball facet and the apex.
        let o = GaugeOracle::new(StructuredSet::hull_ball_origin(vec![2.0, 0.0], 1.0).unwrap(), vec![1.5, 0.0]).unwrap();
        for k in 0..4000 {
            let th = k as f64 * std::f64::consts::PI / 2000.0;
            let y = [1.5 + th.cos(), th.sin()];
            let ls = o.local_structure_at(&y).unwrap();
            assert!(ls.mu_local >= 0.0 && ls.l_local > 0.0);
        }
        let apex = o.gauge(&[0.5, 0.0]).unwrap();
        assert_eq!(apex.unit_normal.unwrap(), vec![-1.0, 0.0]);
    }

    #[test]
    fn gauge_examples() {
        let h = GaugeOracle::at_origin(StructuredSet::halfspace(vec![2.0, 0.0], 4.0).unwrap()).unwrap();
        assert_eq!(h.gauge(&[1.0, 1.0]).unwrap().value, 0.5);
        assert_eq!(h.gauge(&[-1.0, 1.0]).unwrap().value, 0.0);
        let b = GaugeOracle::at_origin(StructuredSet::pnorm_ball(2.0, vec![0.0, 0.0]).unwrap()).unwrap();
        assert!(rel(b.gauge(&[3.0, 4.0]).unwrap().value, 5.0) < 1e-15);
        let ball = GaugeOracle::at_origin(StructuredSet::ball(vec![0.5, 0.0], 1.0).unwrap()).unwrap();
        assert!(rel(ball.gauge(&[3.0, 0.0]).unwrap().value, 2.0) < 1e-15);
    }

    #[test]
    fn oracle_rejects_exterior_center() {
        let b = StructuredSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert!(matches!(GaugeOracle::new(b.clone(), vec![2.0, 0.0]), Err(Error::NotInterior)));
        assert!(matches!(GaugeOracle::new(b, vec![1.0, 0.0]), Err(Error::NotInterior)));
        let o = GaugeOracle::at_origin(StructuredSet::ball(vec![0.0], 1.0).unwrap()).unwrap();
        assert!(matches!(o.gauge(&[f64::NAN]), Err(Error::NonFinite)));
        assert_eq!(o.lipschitz() * o.inner_radius(), 1.0);
    }

    #[test]
    fn subgradient_of_norm_is_identity_map() {
        let b = GaugeOracle::at_origin(StructuredSet::pnorm_ball(2.0, vec![0.0, 0.0]).unwrap()).unwrap();
        let ev = b.gauge(&[3.0, 4.0]).unwrap();
        // ½‖y‖² has gradient y.
        assert!(rel(ev.half_sq_subgrad[0], 3.0) < 1e-14 && rel(ev.half_sq_subgrad[1], 4.0) < 1e-14);
        let gs = ev.gauge_subgradient();
        assert!(rel(gs[0], 0.6) < 1e-14);
    }

    #[test]
    fn quartic_and_general_paths_agree_at_p4() {
        let set = StructuredSet::pnorm_ball(4.0, vec![0.1, -0.2, 0.05]).unwrap();
        let o = GaugeOracle::at_origin(set).unwrap();
        let y = [0.7, -1.3, 2.1];
        let quartic = o.value(&y).unwrap();
        let Kernel::Level { u, .. } = &o.kernel else { panic!() };
        let d = y.to_vec();
        let dn = norm2(&d);
        let general = {
            // Force the power-sum path by perturbing p infinitesimally.
            let t = pnorm_exit(u, &d, 4.0 + 1e-15, 1.0, o.inner_radius() / dn, o.outer_radius() / dn).unwrap();
            1.0 / t
        };
        assert!(rel(quartic, general) < 1e-12, "{quartic} vs {general}");
    }

    #[test]
    fn ball_gauge_examples() {
        assert_eq!(ball_gauge(&[0.0, 0.0], 1.0, &[0.0, 2.0]).unwrap(), 2.0);
        assert!(rel(ball_gauge(&[0.5, 0.0], 1.0, &[1.5, 0.0]).unwrap(), 1.0) < 1e-15);
        let v = ball_gauge(&[0.5, 0.0], 1.0, &[0.0, 1.0]).unwrap();
        assert!(rel(v, 1.0 / 0.75f64.sqrt()) < 1e-15);
        // Origin on the sphere: linear branch.
        assert!(rel(ball_gauge(&[1.0, 0.0], 1.0, &[1.0, 1.0]).unwrap(), 1.0) < 1e-15);
        assert!(ball_gauge::<f64>(&[1.0, 0.0], 1.0, &[-1.0, 0.0]).unwrap().is_infinite());
        // Origin outside: ray missing the ball.
        assert!(ball_gauge::<f64>(&[3.0, 0.0], 1.0, &[0.0, 1.0]).unwrap().is_infinite());
        assert!(rel(ball_gauge(&[3.0, 0.0], 1.0, &[1.0, 0.0]).unwrap(), 0.25) < 1e-15);
    }

    #[test]
    fn hessian_examples() {
        let h = ball_gauge_hessian(&[1.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(h, Matrix::identity(2));
        let sp = hessian_eigenvalues(&[1.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert_eq!((sp.lambda_min, sp.lambda_mid, sp.lambda_max), (1.0, 1.0, 1.0));
        let flat = hessian_eigenvalues(&[1.0, 0.0], &[1.0, 0.0], 1e12).unwrap();
        assert!(flat.lambda_min < 1e-11);
        assert!(matches!(ball_gauge_hessian(&[0.0, 1.0], &[1.0, 0.0], 1.0), Err(Error::NonPositiveSupport(_))));
        assert!(ball_gauge_hessian(&[1.0, 0.0], &[2.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn witness_hessian_matches_displayed_matrix() {
        let (g, r, d) = (0.7f64, 0.9f64, 2.3f64);
        let w = tightness_instance(g, r, d).unwrap();
        let h = ball_gauge_hessian(&w.y_bar, &w.zeta, w.radius).unwrap();
        let q = (d * d - r * r).sqrt();
        let r3 = r * r * r;
        let want = [[g * r * r / r3, g * r * q / r3], [g * r * q / r3, (r + g * (d * d - r * r)) / r3]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(rel(h[(i, j)], want[i][j]) < 1e-13);
            }
        }
        assert!(w.set.on_boundary(&w.y_bar).unwrap());
        let z = w.set.normal_vector(&w.y_bar).unwrap();
        assert!(rel(z[1], -1.0) < 1e-14 && z[0].abs() < 1e-14);
    }

    #[test]
    fn tightness_examples() {
        let (lo, hi) = tightness_eigenvalues(1.0, 1.0, 1.0);
        assert!(rel(lo, 1.0) < 1e-12 && rel(hi, 1.0) < 1e-12);
        let (lo, hi) = tightness_eigenvalues(1.0, 1.0, 2f64.sqrt());
        assert!(rel(lo, (3.0 - 5f64.sqrt()) / 2.0) < 1e-14);
        assert!(rel(hi, (3.0 + 5f64.sqrt()) / 2.0) < 1e-14);
        let w = tightness_instance(1.0f64, 1.0, 1.0).unwrap();
        assert!(w.y_bar[0].abs() < 1e-15 && w.y_bar[1] == -1.0);
        assert!(tightness_instance(1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn rank2_examples() {
        assert_eq!(rank2_eigenvalues(&[1.0, 0.0], &[0.0, 1.0], 2.0, 0.0, 3.0).unwrap(), (2.0, 3.0));
        assert_eq!(rank2_eigenvalues(&[1.0, 0.0], &[1.0, 0.0], 1.0, 1.0, 0.0).unwrap(), (0.0, 3.0));
    }

    #[test]
    fn local_structure_examples() {
        let o = GaugeOracle::at_origin(StructuredSet::pnorm_ball(2.0, vec![0.0, 0.0]).unwrap()).unwrap();
        let ev = o.gauge(&[0.3, -0.4]).unwrap();
        let ls = local_structure(&ev, &[0.0, 0.0], 1.0, 1.0).unwrap();
        assert!(rel(ls.mu_local, 1.0) < 1e-14 && rel(ls.l_local, 1.0) < 1e-14);
        let flat = local_structure(&ev, &[0.0, 0.0], 0.0, 1.0).unwrap();
        assert_eq!(flat.mu_local, 0.0);
        let ns = local_structure(&ev, &[0.0, 0.0], 1.0, f64::INFINITY).unwrap();
        assert!(ns.l_local.is_infinite());
        let zero = o.gauge(&[0.0, 0.0]).unwrap();
        assert!(matches!(local_structure(&zero, &[0.0, 0.0], 1.0, 1.0), Err(Error::ZeroGauge)));
        let at_center = o.local_structure(&zero, o.set().structure_constants()).unwrap();
        assert_eq!((at_center.mu_local, at_center.l_local), (1.0, 1.0));
    }

    #[test]
    fn global_structure_examples() {
        let o = GaugeOracle::at_origin(StructuredSet::pnorm_ball(2.0, vec![0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(global_structure(&o), GlobalStructure { mu: 0.5, l: 2.0 });
        assert_eq!(certified_structure(&o), GlobalStructure { mu: 1.0, l: 1.0 });
        let h = GaugeOracle::at_origin(StructuredSet::halfspace(vec![3.0, 4.0], 2.0).unwrap()).unwrap();
        let g = global_structure(&h);
        assert_eq!(g.mu, 0.0);
        assert!(rel(g.l, 25.0 / 4.0) < 1e-15);
    }

    #[test]
    fn transform_examples() {
        let two_i = GramSpectrum { lambda_min: 4.0, lambda_max: 4.0 };
        assert_eq!(transform_structure(1.0, 1.0, two_i), (4.0, 4.0));
        let d13 = GramSpectrum::of(&Matrix::from_diag(&[1.0, 3.0])).unwrap();
        let (m, l) = transform_structure(1.0, 1.0, d13);
        assert!(rel(m, 1.0) < 1e-14 && rel(l, 9.0) < 1e-14);
        let sing = GramSpectrum::of(&Matrix::from_diag(&[0.0, 3.0])).unwrap();
        assert_eq!(transform_structure(1.0, 1.0, sing).0, 0.0);
    }

    #[test]
    fn certificate_examples() {
        let o = GaugeOracle::at_origin(StructuredSet::pnorm_ball(2.0, vec![0.0, 0.0]).unwrap()).unwrap();
        let ev = o.gauge(&[2.0, 0.0]).unwrap();
        let c = converse_certificate(&ev, 1.0, 1.0).unwrap();
        let outer: Ball<f64> = c.outer.unwrap();
        assert!(outer.center().iter().all(|x| x.abs() < 1e-15) && rel(outer.radius(), 1.0) < 1e-15);
        assert!(converse_certificate(&ev, 0.0, 1.0).unwrap().outer.is_none());
        assert!(converse_certificate(&ev, 1.0, f64::INFINITY).unwrap().inner.is_none());
        let json = serde_json::to_string(&StructuredSet::Ball(c.inner.unwrap())).unwrap();
        assert!(json.starts_with(r#"{"kind":"ball""#));
    }

    #[test]
    fn sampling_on_unit_ball_is_exact() {
        let o = GaugeOracle::at_origin(StructuredSet::pnorm_ball(2.0, vec![0.0, 0.0, 0.0]).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mu, l) = estimate_constants_by_sampling(&o, 200, &mut rng).unwrap();
        assert!(rel(mu, 1.0) < 1e-12 && rel(l, 1.0) < 1e-12, "{mu} {l}");
    }

    #[test]
    fn sampling_p15_is_positive() {
        let o = GaugeOracle::at_origin(StructuredSet::pnorm_ball(1.5f64, vec![0.0, 0.0]).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (mu, l) = estimate_constants_by_sampling(&o, 2000, &mut rng).unwrap();
        assert!(mu > 0.0);
        assert!(l.is_infinite());
    }

    #[test]
    fn single_precision_gauge() {
        let o = GaugeOracle::<f32>::at_origin(StructuredSet::pnorm_ball(3.0, vec![0.0, 0.0]).unwrap()).unwrap();
        let v = o.value(&[1.0, 1.0]).unwrap();
        assert!((v - 2f32.powf(1.0 / 3.0)).abs() < 1e-5);
    }
}
