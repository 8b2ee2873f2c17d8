//! Slow, independent oracles used to check the fast paths: membership
//! bisection for gauges, finite differences, a cyclic Jacobi eigensolver,
//! primal KKT enumeration for the small step subproblems, containment
//! sampling for ball certificates and a log-barrier Newton reference solver.
//!
//! Nothing here reuses the closed forms it validates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{check_dim, Error, Result};
use crate::finitemax::{Linearization, QuadraticObjective};
use crate::gauge::{
    ball_gauge_hessian, converse_certificate, hessian_eigenvalues, local_structure, rank2_eigenvalues, tightness_eigenvalues,
    tightness_instance, GaugeOracle,
};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::sets::{Ball, StructuredSet};
use crate::steps::{gen_grad_step_lin, level_proj_step_lin};

/// Summary of one oracle-agreement or containment suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub name: String,
    pub case_count: usize,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    /// Cases whose error exceeded `tolerance`.
    pub violations: usize,
    pub tolerance: f64,
    /// Negative controls pass only when they detect a violation.
    pub negative_control: bool,
    pub worst_case_input: Value,
}

impl OracleReport {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            case_count: 0,
            max_abs_error: 0.0,
            max_rel_error: 0.0,
            violations: 0,
            tolerance,
            negative_control: false,
            worst_case_input: Value::Null,
        }
    }

    pub fn negative(mut self) -> Self {
        self.negative_control = true;
        self
    }

    /// Records a comparison judged by relative error (absolute when the
    /// reference is zero).
    pub fn observe(&mut self, computed: f64, reference: f64, input: impl FnOnce() -> Value) {
        let abs = (computed - reference).abs();
        let rel = if reference == 0.0 { abs } else { abs / reference.abs() };
        self.record(abs, if rel.is_nan() { f64::INFINITY } else { rel }, input);
    }

    /// Records a precomputed `(absolute, relative)` error pair.
    pub fn record(&mut self, abs: f64, rel: f64, input: impl FnOnce() -> Value) {
        self.case_count += 1;
        self.max_abs_error = self.max_abs_error.max(abs);
        if rel > self.tolerance {
            self.violations += 1;
        }
        if rel > self.max_rel_error || (self.worst_case_input.is_null() && rel.is_finite()) {
            self.max_rel_error = self.max_rel_error.max(rel);
            self.worst_case_input = input();
        }
    }

    pub fn passed(&self) -> bool {
        if self.negative_control {
            self.violations > 0
        } else {
            self.violations == 0 && self.case_count > 0
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Gauge by bisection on membership along the ray from `e`, bracketed by the
/// set's radius bounds. Returns `λ` with relative accuracy `tol`.
pub fn gauge_bisection<T: Scalar>(set: &StructuredSet<T>, e: &[T], y: &[T], tol: T) -> Result<T> {
    check_dim(set.dim(), y.len())?;
    let rb = set.radius_bounds(e)?;
    let d: Vec<T> = y.iter().zip(e).map(|(&a, &b)| a - b).collect();
    let dn = d.iter().map(|&x| x * x).sum::<T>().sqrt();
    if dn == T::zero() {
        return Ok(T::zero());
    }
    let at = |t: T| -> Result<bool> {
        let x: Vec<T> = e.iter().zip(&d).map(|(&ei, &di)| ei + t * di).collect();
        set.contains(&x)
    };
    let mut lo = rb.r / dn;
    if !at(lo)? {
        return Err(Error::InvalidParameter("inner radius bound is not inside the set".into()));
    }
    let mut hi = if rb.d.is_finite() {
        let hi = rb.d / dn * (T::one() + T::lit(1e-9));
        if at(hi)? {
            return Err(Error::InvalidParameter("outer radius bound is inside the set".into()));
        }
        hi
    } else {
        let mut hi = lo * T::lit(2.0);
        while at(hi)? {
            hi = hi * T::lit(2.0);
            // An unbounded ray: report a zero gauge.
            if hi * dn > T::lit(1e150) {
                return Ok(T::zero());
            }
        }
        hi
    };
    let half = T::lit(0.5);
    while hi - lo > tol * hi {
        let mid = half * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((half * (lo + hi)).recip())
}

/// Central-difference gradient.
pub fn finite_diff_gradient<F: Fn(&[f64]) -> f64>(f: F, y: &[f64], h: f64) -> Vec<f64> {
    let mut z = y.to_vec();
    (0..y.len())
        .map(|i| {
            z[i] = y[i] + h;
            let up = f(&z);
            z[i] = y[i] - h;
            let down = f(&z);
            z[i] = y[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian, symmetrized.
pub fn finite_diff_hessian<F: Fn(&[f64]) -> f64>(f: F, y: &[f64], h: f64) -> Matrix<f64> {
    let n = y.len();
    let mut z = y.to_vec();
    let mut eval = |i: usize, si: f64, j: usize, sj: f64| {
        z[i] += si * h;
        z[j] += sj * h;
        let v = f(&z);
        z[i] = y[i];
        z[j] = y[j];
        v
    };
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = (eval(i, 1.0, j, 1.0) - eval(i, 1.0, j, -1.0) - eval(i, -1.0, j, 1.0) + eval(i, -1.0, j, -1.0))
                / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Eigenvalues (ascending) by cyclic Jacobi rotations.
pub fn symmetric_eigs(m: &Matrix<f64>) -> Result<Vec<f64>> {
    let n = m.rows();
    check_dim(n, m.cols())?;
    let mut a = m.to_rows();
    let fro = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for i in 0..n {
        for j in 0..i {
            let asym = (a[i][j] - a[j][i]).abs();
            if asym > 1e-10 * fro.max(1.0) {
                return Err(Error::NotSymmetric(asym));
            }
            let avg = 0.5 * (a[i][j] + a[j][i]);
            a[i][j] = avg;
            a[j][i] = avg;
        }
    }
    let off = |a: &Vec<Vec<f64>>| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i][j] * a[i][j];
                }
            }
        }
        s.sqrt()
    };
    for _ in 0..100 {
        if off(&a) <= 1e-14 * fro {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    Ok(ev)
}

/// Gaussian elimination with complete pivoting; `None` when singular.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut pi, mut pj, mut best) = (k, k, 0.0);
        for i in k..n {
            for j in k..n {
                if a[i][j].abs() > best {
                    (pi, pj, best) = (i, j, a[i][j].abs());
                }
            }
        }
        if best <= 1e-13 * scale {
            return None;
        }
        a.swap(k, pi);
        b.swap(k, pi);
        for row in a.iter_mut() {
            row.swap(k, pj);
        }
        perm.swap(k, pj);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    let mut out = vec![0.0; n];
    for (k, &p) in perm.iter().enumerate() {
        out[p] = x[k];
    }
    Some(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QpKind {
    ProxLinear { alpha: f64 },
    LevelProjection { f_bar: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub point: Vec<f64>,
    pub support: Vec<usize>,
    pub multipliers: Vec<f64>,
}

/// Exact solution of the prox-linear or level-projection subproblem by
/// enumerating active supports and solving the full primal KKT system for
/// each one.
pub fn small_qp_enumerate(kind: QpKind, values: &[f64], subgrads: &[Vec<f64>], y: &[f64]) -> Result<QpSolution> {
    let m = values.len();
    if m == 0 || m > 8 || subgrads.len() != m {
        return Err(Error::InvalidParameter("need 1..=8 linearizations".into()));
    }
    let n = y.len();
    let h: Vec<f64> = values.iter().map(|f| 0.5 * f * f).collect();
    let dotv = |i: usize, d: &[f64]| subgrads[i].iter().zip(d).map(|(a, b)| a * b).sum::<f64>();
    let scale = 1f64.max(h.iter().fold(0.0f64, |a, b| a.max(b.abs())));
    let tol = 1e-10 * scale;
    let mut best: Option<(f64, QpSolution)> = None;
    let mut consider = |obj: f64, sol: QpSolution| {
        if best.as_ref().map_or(true, |(b, _)| obj < *b) {
            best = Some((obj, sol));
        }
    };
    if let QpKind::LevelProjection { f_bar } = kind {
        if h.iter().all(|&hi| hi <= 0.5 * f_bar * f_bar) {
            consider(0.0, QpSolution { point: y.to_vec(), support: vec![], multipliers: vec![] });
        }
    }
    for mask in 1u32..(1 << m) {
        let s: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        let k = s.len();
        match kind {
            QpKind::ProxLinear { alpha } => {
                // Unknowns (d, t, λ_S): d/α + Σλᵢvᵢ = 0, Σλᵢ = 1, hᵢ + vᵢᵀd − t = 0.
                let size = n + 1 + k;
                let mut a = vec![vec![0.0; size]; size];
                let mut rhs = vec![0.0; size];
                for r in 0..n {
                    a[r][r] = 1.0 / alpha;
                    for (c, &i) in s.iter().enumerate() {
                        a[r][n + 1 + c] = subgrads[i][r];
                    }
                }
                for c in 0..k {
                    a[n][n + 1 + c] = 1.0;
                }
                rhs[n] = 1.0;
                for (r, &i) in s.iter().enumerate() {
                    for c in 0..n {
                        a[n + 1 + r][c] = subgrads[i][c];
                    }
                    a[n + 1 + r][n] = -1.0;
                    rhs[n + 1 + r] = -h[i];
                }
                let Some(x) = gauss_solve(a, rhs) else { continue };
                let d = &x[..n];
                let t = x[n];
                let lam = &x[n + 1..];
                if lam.iter().any(|&l| l < -1e-10) {
                    continue;
                }
                if (0..m).any(|i| !s.contains(&i) && h[i] + dotv(i, d) > t + tol) {
                    continue;
                }
                let obj = t + d.iter().map(|x| x * x).sum::<f64>() / (2.0 * alpha);
                let point = y.iter().zip(d).map(|(a, b)| a + b).collect();
                consider(obj, QpSolution { point, support: s.clone(), multipliers: lam.to_vec() });
            }
            QpKind::LevelProjection { f_bar } => {
                // Unknowns (d, λ_S): d + Σλᵢvᵢ = 0, hᵢ + vᵢᵀd = ½f̄².
                let target = 0.5 * f_bar * f_bar;
                let size = n + k;
                let mut a = vec![vec![0.0; size]; size];
                let mut rhs = vec![0.0; size];
                for r in 0..n {
                    a[r][r] = 1.0;
                    for (c, &i) in s.iter().enumerate() {
                        a[r][n + c] = subgrads[i][r];
                    }
                }
                for (r, &i) in s.iter().enumerate() {
                    for c in 0..n {
                        a[n + r][c] = subgrads[i][c];
                    }
                    rhs[n + r] = target - h[i];
                }
                let Some(x) = gauss_solve(a, rhs) else { continue };
                let d = &x[..n];
                let lam = &x[n..];
                if lam.iter().any(|&l| l < -1e-10) {
                    continue;
                }
                if (0..m).any(|i| !s.contains(&i) && h[i] + dotv(i, d) > target + tol) {
                    continue;
                }
                let obj = d.iter().map(|x| x * x).sum::<f64>();
                let point = y.iter().zip(d).map(|(a, b)| a + b).collect();
                consider(obj, QpSolution { point, support: s.clone(), multipliers: lam.to_vec() });
            }
        }
    }
    best.map(|(_, s)| s).ok_or(Error::EmptyLevelSet)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    /// The ball should contain the set near the sample center.
    Outer,
    /// The ball should lie inside the set near the sample center.
    Inner,
}

/// Samples `count` points uniformly in `B(near, radius)` and checks the local
/// inclusion claimed by a ball certificate. Violations beyond `1e-8` count.
pub fn containment_sample<R: Rng + ?Sized>(
    certificate: &Ball<f64>,
    kind: CertificateKind,
    set: &StructuredSet<f64>,
    near: &[f64],
    radius: f64,
    count: usize,
    rng: &mut R,
) -> Result<OracleReport> {
    check_dim(set.dim(), near.len())?;
    let name = match kind {
        CertificateKind::Outer => "containment_outer",
        CertificateKind::Inner => "containment_inner",
    };
    let mut report = OracleReport::new(name, 1e-8);
    let n = near.len();
    let c = certificate.center();
    let r = certificate.radius();
    let dist = |x: &[f64]| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    for _ in 0..count {
        let x = uniform_in_ball(near, radius, n, rng);
        match kind {
            CertificateKind::Outer => {
                if set.contains(&x)? {
                    let excess = (dist(&x) - r).max(0.0);
                    report.record(excess, excess, || json!({ "point": x }));
                }
            }
            CertificateKind::Inner => {
                if dist(&x) <= r {
                    let (lhs, rhs) = set.defining_value(&x)?;
                    let excess = ((lhs - rhs) / rhs.abs().max(1.0)).max(0.0);
                    report.record(excess, excess, || json!({ "point": x }));
                }
            }
        }
    }
    Ok(report)
}

fn normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn uniform_in_ball<R: Rng + ?Sized>(center: &[f64], radius: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let d = normal_vec(n, rng);
    let dn = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    let rad = radius * rng.gen::<f64>().powf(1.0 / n as f64);
    center.iter().zip(&d).map(|(c, x)| c + rad * x / dn).collect()
}

// ---------------------------------------------------------------------------
// Log-barrier reference solver.

/// `‖Gz − h‖_p ≤ aᵀz + β`.
#[derive(Clone, Debug)]
struct ConeConstraint {
    g: Matrix<f64>,
    h: Vec<f64>,
    a: Vec<f64>,
    beta: f64,
    p: f64,
}

fn pnorm_plain(w: &[f64], p: f64) -> f64 {
    let m = w.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    m * w.iter().map(|x| (x.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
}

impl ConeConstraint {
    fn residual(&self, z: &[f64]) -> Vec<f64> {
        self.g.matvec(z).unwrap().iter().zip(&self.h).map(|(a, b)| a - b).collect()
    }

    fn slack(&self, z: &[f64]) -> f64 {
        self.a.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + self.beta - pnorm_plain(&self.residual(z), self.p)
    }

    /// Adds the gradient and Hessian of `−log(slack)` into the dense
    /// row-major buffers.
    fn accumulate(&self, z: &[f64], grad: &mut [f64], hess: &mut [f64]) {
        let nz = z.len();
        let mut w = self.residual(z);
        let mut nrm = pnorm_plain(&w, self.p);
        let slack = self.a.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + self.beta - nrm;
        if nrm == 0.0 {
            // The norm has a kink here; take derivatives at a nearby point.
            w.iter_mut().for_each(|x| *x = 1e-8 * slack.max(1e-8));
            nrm = pnorm_plain(&w, self.p);
        }
        let p = self.p;
        let gn: Vec<f64> = w.iter().map(|x| x.signum() * (x.abs() / nrm).powf(p - 1.0)).collect();
        let gt_gn = self.g.tmatvec(&gn).unwrap();
        let ds: Vec<f64> = self.a.iter().zip(&gt_gn).map(|(a, b)| a - b).collect();
        let k = (p - 1.0) / (nrm * slack);
        for (r, wr) in w.iter().enumerate() {
            let wgt = k * (wr.abs() / nrm).max(1e-150).powf(p - 2.0);
            let row = self.g.row(r);
            for (i, &gi) in row.iter().enumerate() {
                let gi = wgt * gi;
                if gi == 0.0 {
                    continue;
                }
                let out = &mut hess[i * nz..(i + 1) * nz];
                for (o, &gj) in out.iter_mut().zip(row) {
                    *o += gi * gj;
                }
            }
        }
        let s2 = slack * slack;
        for i in 0..nz {
            grad[i] -= ds[i] / slack;
            let out = &mut hess[i * nz..(i + 1) * nz];
            for j in 0..nz {
                out[j] += ds[i] * ds[j] / s2 - k * gt_gn[i] * gt_gn[j];
            }
        }
    }
}

/// Cholesky solve of a dense row-major system, with a diagonal shift
/// fallback for tiny negative pivots.
fn cholesky_solve(h: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = (0..n).fold(0.0f64, |m, i| m.max(h[i * n + i].abs())).max(1e-300);
    for shift in [0.0, 1e-14, 1e-12, 1e-10] {
        let mut l = vec![0.0; n * n];
        let mut ok = true;
        'outer: for i in 0..n {
            for j in 0..=i {
                let s = h[i * n + j] - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
                if i == j {
                    let s = s + shift * scale;
                    if s <= 0.0 {
                        ok = false;
                        break 'outer;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        if !ok {
            continue;
        }
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= l[i * n + k] * y[k];
            }
            y[i] /= l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= l[k * n + i] * y[k];
            }
            y[i] /= l[i * n + i];
        }
        return Some(y);
    }
    None
}

/// Minimizes `q(z) = ½zᵀPz + cᵀz` over the cone constraints by a
/// path-following barrier method until the duality-gap estimate `k/t` falls
/// below `gap`.
fn barrier_solve(p: Option<&Matrix<f64>>, c: &[f64], cons: &[ConeConstraint], z0: Vec<f64>, gap: f64) -> Result<Vec<f64>> {
    let nz = z0.len();
    let mut z = z0;
    if cons.iter().any(|k| !(k.slack(&z) > 0.0)) {
        return Err(Error::NotInterior);
    }
    let objective = |z: &[f64]| {
        let lin: f64 = c.iter().zip(z).map(|(a, b)| a * b).sum();
        lin + p.map_or(0.0, |p| 0.5 * p.quad_form(z).unwrap())
    };
    let phi = |z: &[f64], t: f64| -> f64 {
        let mut v = t * objective(z);
        for k in cons {
            let s = k.slack(z);
            if !(s > 0.0) {
                return f64::INFINITY;
            }
            v -= s.ln();
        }
        v
    };
    let mut t = 1.0;
    let mcons = cons.len() as f64;
    for _ in 0..200 {
        for _ in 0..200 {
            let mut grad: Vec<f64> = match p {
                Some(p) => p.matvec(&z).unwrap().iter().zip(c).map(|(a, b)| t * (a + b)).collect(),
                None => c.iter().map(|x| t * x).collect(),
            };
            let mut hess = match p {
                Some(p) => p.as_slice().iter().map(|x| t * x).collect(),
                None => vec![0.0; nz * nz],
            };
            for k in cons {
                k.accumulate(&z, &mut grad, &mut hess);
            }
            let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
            let Some(step) = cholesky_solve(&hess, &neg) else {
                return Err(Error::NoConvergence("barrier Newton system is singular".into()));
            };
            let dec: f64 = -grad.iter().zip(&step).map(|(a, b)| a * b).sum::<f64>();
            if dec / 2.0 <= 1e-10 {
                break;
            }
            let base = phi(&z, t);
            let mut s = 1.0;
            let mut moved = false;
            while s > 1e-14 {
                let trial: Vec<f64> = z.iter().zip(&step).map(|(a, b)| a + s * b).collect();
                let v = phi(&trial, t);
                if v.is_finite() && v <= base - 0.25 * s * dec {
                    z = trial;
                    // Progress below rounding level ends the centering.
                    moved = base - v > 1e-15 * base.abs();
                    break;
                }
                s *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if mcons / t < gap {
            return Ok(z);
        }
        t *= 16.0;
    }
    Err(Error::NoConvergence("barrier path did not reach the target gap".into()))
}

/// `(A, b, p, τ)` with the set `{x : ‖Ax − b‖_p ≤ τ}` for the norm-type sets.
fn cone_data(set: &StructuredSet<f64>) -> Result<(Matrix<f64>, Vec<f64>, f64, f64)> {
    match set {
        StructuredSet::Ball(b) => Ok((Matrix::identity(b.center().len()), b.center().to_vec(), 2.0, b.radius())),
        StructuredSet::PnormBall(b) => Ok((Matrix::identity(b.offset().len()), b.offset().to_vec(), b.p(), 1.0)),
        StructuredSet::PnormEllipsoid(e) => Ok((e.matrix().clone(), e.b().to_vec(), e.p(), e.tau())),
        _ => Err(Error::Unsupported(format!("reference solver does not handle {} sets", set.kind()))),
    }
}

/// Reference minimizer `(y*, p*)` of `maxᵢ γ_{Sᵢ,eᵢ}(y)` over norm-type sets,
/// from the epigraph form `‖t uᵢ + Aᵢ(y − eᵢ)‖ ≤ tτᵢ`, `uᵢ = Aᵢeᵢ − bᵢ`.
pub fn reference_feasibility(oracles: &[GaugeOracle<f64>], gap: f64) -> Result<(Vec<f64>, f64)> {
    let n = oracles.first().ok_or_else(|| Error::InvalidParameter("no sets".into()))?.dim();
    let mut cons = Vec::new();
    let y0 = oracles[0].center().to_vec();
    let mut t0: f64 = 0.0;
    for o in oracles {
        let (a, b, p, tau) = cone_data(o.set())?;
        let e = o.center();
        let ae = a.matvec(e)?;
        let u: Vec<f64> = ae.iter().zip(&b).map(|(x, y)| x - y).collect();
        let mut data = Vec::with_capacity(a.rows() * (n + 1));
        for r in 0..a.rows() {
            data.extend_from_slice(a.row(r));
            data.push(u[r]);
        }
        let g = Matrix::new(a.rows(), n + 1, data)?;
        let mut av = vec![0.0; n + 1];
        av[n] = tau;
        // Strictly feasible height at y0.
        let shift: Vec<f64> = y0.iter().zip(e).map(|(a, b)| a - b).collect();
        let push = pnorm_plain(&a.matvec(&shift)?, p) / (tau - pnorm_plain(&u, p));
        t0 = t0.max(push);
        cons.push(ConeConstraint { g, h: ae, a: av, beta: 0.0, p });
    }
    let mut z0 = y0;
    z0.push(2.0 * t0 + 1.0);
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let z = barrier_solve(None, &c, &cons, z0, gap)?;
    let value = z[n];
    Ok((z[..n].to_vec(), value))
}

/// Reference maximizer of `1 − ½xᵀQx − cᵀx` over `{x : ‖Ax − b‖_p ≤ τ}`,
/// started from the strictly feasible `x0`.
pub fn reference_trust_region(
    q: &QuadraticObjective<f64>,
    constraint: &StructuredSet<f64>,
    x0: &[f64],
    gap: f64,
) -> Result<(Vec<f64>, f64)> {
    let (a, b, p, tau) = cone_data(constraint)?;
    let cons = [ConeConstraint { g: a, h: b, a: vec![0.0; x0.len()], beta: tau, p }];
    let x = barrier_solve(Some(q.q()), q.c(), &cons, x0.to_vec(), gap)?;
    let value = q.value(&x)?;
    Ok((x, value))
}

// ---------------------------------------------------------------------------
// Suites.

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix<f64> {
    Matrix::new(rows, cols, normal_vec(rows * cols, rng)).expect("shape matches")
}

/// Gauge families covered by [`suite_gauge`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeFamily {
    Halfspace,
    BallP2,
    EllipsoidP2,
    Quartic,
    GeneralP,
}

fn random_oracle<R: Rng + ?Sized>(family: GaugeFamily, rng: &mut R) -> GaugeOracle<f64> {
    let n = rng.gen_range(2..=8);
    let e = normal_vec(n, rng);
    let set = match family {
        GaugeFamily::Halfspace => {
            let a = normal_vec(n, rng);
            let b = a.iter().zip(&e).map(|(x, y)| x * y).sum::<f64>().max(0.0) + rng.gen_range(0.1..3.0);
            StructuredSet::halfspace(a, b).unwrap()
        }
        GaugeFamily::BallP2 => {
            let off: Vec<f64> = normal_vec(n, rng).iter().map(|x| 0.3 * x).collect();
            let c: Vec<f64> = e.iter().zip(&off).map(|(a, b)| a + b).collect();
            let dist = off.iter().map(|x| x * x).sum::<f64>().sqrt();
            if rng.gen::<bool>() {
                StructuredSet::ball(c, dist * rng.gen_range(1.1..4.0) + 0.05).unwrap()
            } else {
                // Unit p = 2 ball with an offset; keep e inside it.
                let scale = 0.9 * rng.gen::<f64>() / dist.max(1e-12);
                let c: Vec<f64> = e.iter().zip(&off).map(|(a, b)| a + b * scale.min(1.0 / dist.max(1e-12) * 0.9)).collect();
                StructuredSet::pnorm_ball(2.0, c).unwrap()
            }
        }
        GaugeFamily::EllipsoidP2 | GaugeFamily::Quartic | GaugeFamily::GeneralP => {
            let p = match family {
                GaugeFamily::EllipsoidP2 => 2.0,
                GaugeFamily::Quartic => 4.0,
                _ => loop {
                    let p = rng.gen_range(1.1..6.0);
                    if (p - 2.0f64).abs() > 0.05 && (p - 4.0f64).abs() > 0.05 {
                        break p;
                    }
                },
            };
            let m = rng.gen_range(n..=n + 2);
            let a = random_matrix(m, n, rng);
            let b = normal_vec(m, rng);
            let u: Vec<f64> = a.matvec(&e).unwrap().iter().zip(&b).map(|(x, y)| x - y).collect();
            let tau = pnorm_plain(&u, p) * rng.gen_range(1.2..3.0) + 0.1;
            StructuredSet::pnorm_ellipsoid(a, b, p, tau).unwrap()
        }
    };
    GaugeOracle::new(set, e).unwrap()
}

/// Closed-form gauge vs membership bisection on random instances.
pub fn suite_gauge(family: GaugeFamily, count: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = rng_for(seed, family as u64 + 1);
    let mut report = OracleReport::new(format!("gauge_{}", serde_json::to_value(family).unwrap().as_str().unwrap()), 1e-10);
    while report.case_count < count {
        let o = random_oracle(family, &mut rng);
        let y: Vec<f64> = o.center().iter().map(|c| c + 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let fast = o.value(&y)?;
        if fast == 0.0 {
            continue;
        }
        let slow = gauge_bisection(o.set(), o.center(), &y, 1e-14)?;
        report.observe(fast, slow, || json!({ "set": o.set(), "e": o.center(), "y": y }));
    }
    Ok(report)
}

/// Deliberately wrong p = 2 ellipsoid gauge with the radical's sign flipped.
pub fn corrupted_ellipsoid_gauge(oracle: &GaugeOracle<f64>, y: &[f64]) -> Result<f64> {
    let (a, b, _, tau) = cone_data(oracle.set())?;
    let d: Vec<f64> = y.iter().zip(oracle.center()).map(|(a, b)| a - b).collect();
    let u: Vec<f64> = a.matvec(oracle.center())?.iter().zip(&b).map(|(x, y)| x - y).collect();
    let v = a.matvec(&d)?;
    let uu: f64 = u.iter().map(|x| x * x).sum();
    let uv: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let k = tau * tau - uu;
    Ok((uv - (uv * uv + k * vv).sqrt()) / k)
}

/// Negative control: the corrupted closed form must disagree with bisection.
pub fn suite_corrupted_radical(count: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = rng_for(seed, 17);
    let mut report = OracleReport::new("corrupted_radical", 1e-10).negative();
    for _ in 0..count {
        let o = random_oracle(GaugeFamily::EllipsoidP2, &mut rng);
        let y: Vec<f64> = o.center().iter().map(|c| c + 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let bad = corrupted_ellipsoid_gauge(&o, &y)?;
        let slow = gauge_bisection(o.set(), o.center(), &y, 1e-14)?;
        report.observe(bad, slow, || json!({ "y": y }));
    }
    Ok(report)
}

/// Random `(ȳ, ζ, r)` with the origin strictly inside `B(ȳ − rζ, r)` and a
/// support `ζᵀȳ` bounded away from zero.
fn random_ball_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>, f64) {
    loop {
        let y = normal_vec(n, rng);
        let mut z = normal_vec(n, rng);
        let zn = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        z.iter_mut().for_each(|x| *x /= zn);
        let mut s: f64 = z.iter().zip(&y).map(|(a, b)| a * b).sum();
        if s < 0.0 {
            z.iter_mut().for_each(|x| *x = -*x);
            s = -s;
        }
        let yy: f64 = y.iter().map(|x| x * x).sum();
        if s < 0.2 * yy.sqrt() {
            continue;
        }
        let r = yy / (2.0 * s) * rng.gen_range(1.2..4.0);
        return (y, z, r);
    }
}

/// Gauge of `B(c, r)` (origin inside) from the quadratic in `1/λ`.
fn ball_gauge_plain(c: &[f64], r: f64, x: &[f64]) -> f64 {
    let xx: f64 = x.iter().map(|v| v * v).sum();
    if xx == 0.0 {
        return 0.0;
    }
    let cx: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum();
    let cc: f64 = c.iter().map(|v| v * v).sum();
    // Largest t with ‖t x − c‖ = r.
    let t = (cx + (cx * cx - xx * (cc - r * r)).sqrt()) / xx;
    1.0 / t
}

/// Ball-gauge Hessian vs central differences of `½γ_B²`, dimensions 2 to 10.
pub fn suite_hessian_fd(count: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = rng_for(seed, 31);
    let mut report = OracleReport::new("hessian_fd", 1e-5);
    for _ in 0..count {
        let n = rng.gen_range(2..=10);
        let (y, z, r) = random_ball_point(n, &mut rng);
        let c: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a - r * b).collect();
        let h = ball_gauge_hessian(&y, &z, r)?;
        let scale = y.iter().map(|x| x * x).sum::<f64>().sqrt();
        let fd = finite_diff_hessian(|x| 0.5 * ball_gauge_plain(&c, r, x).powi(2), &y, 1e-4 * scale);
        let (mut err, mut big) = (0.0f64, 0.0f64);
        for i in 0..n {
            for j in 0..n {
                err = err.max((h[(i, j)] - fd[(i, j)]).abs());
                big = big.max(fd[(i, j)].abs());
            }
        }
        report.record(err, err / big, || json!({ "y_bar": y, "zeta": z, "r": r }));
    }
    Ok(report)
}

/// Closed-form Hessian spectrum vs Jacobi on the assembled matrix.
pub fn suite_hessian_eigs(count: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = rng_for(seed, 37);
    let mut report = OracleReport::new("hessian_eigenvalues", 1e-10);
    for _ in 0..count {
        let n = rng.gen_range(2..=10);
        let (y, z, r) = random_ball_point(n, &mut rng);
        let ev = symmetric_eigs(&ball_gauge_hessian(&y, &z, r)?)?;
        let sp = hessian_eigenvalues(&y, &z, r)?;
        let mut want = vec![sp.lambda_min, sp.lambda_max];
        want.extend(std::iter::repeat(sp.lambda_mid).take(n - 2));
        want.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in want.iter().zip(&ev) {
            report.observe(*a, *b, || json!({ "y_bar": y, "zeta": z, "r": r }));
        }
    }
    Ok(report)
}

/// Nonzero eigenvalues of `C₁aaᵀ + C₂(abᵀ + baᵀ) + C₃bbᵀ` vs Jacobi.
pub fn suite_rank2(count: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = rng_for(seed, 41);
    let mut report = OracleReport::new("rank2_eigenvalues", 1e-10);
    for _ in 0..count {
        let n = rng.gen_range(2..=10);
        let a = normal_vec(n, &mut rng);
        let b = normal_vec(n, &mut rng);
        let (c1, c2, c3) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = c1 * a[i] * a[j] + c2 * (a[i] * b[j] + b[i] * a[j]) + c3 * b[i] * b[j];
            }
        }
        let ev = symmetric_eigs(&m)?;
        let (lo, hi) = rank2_eigenvalues(&a, &b, c1, c2, c3)?;
        let norm = ev.iter().fold(0.0f64, |x, y| x.max(y.abs()));
        // Match each closed-form root with the nearest Jacobi eigenvalue;
        // errors are relative to the spectral norm.
        for want in [lo, hi] {
            let got = ev.iter().copied().min_by(|x, y| (x - want).abs().total_cmp(&(y - want).abs())).unwrap();
            let err = (got - want).abs();
            report.record(err, err / norm, || json!({ "a": a, "b": b, "c": [c1, c2, c3] }));
        }
    }
    Ok(report)
}

/// Extremal witness: Jacobi on its Hessian and finite differences of the
/// gauge of its ball facet vs the closed-form eigenvalues.
pub fn suite_witness(count: usize, seed: u64) -> Result<(OracleReport, OracleReport)> {
    let mut rng = rng_for(seed, 43);
    let mut eig = OracleReport::new("witness_eigenvalues", 1e-8);
    let mut fd = OracleReport::new("witness_fd", 1e-4);
    for k in 0..count {
        let r = rng.gen_range(0.2..2.0);
        let d = r * rng.gen_range(1.0..4.0);
        let gamma = rng.gen_range(0.1..3.0);
        let w = tightness_instance(gamma, r, d)?;
        let ev = symmetric_eigs(&ball_gauge_hessian(&w.y_bar, &w.zeta, w.radius)?)?;
        let (lo, hi) = tightness_eigenvalues(gamma, r, d);
        let input = || json!({ "gamma": gamma, "R": r, "D": d });
        eig.observe(ev[0], lo, input);
        eig.observe(ev[1], hi, input);
        if k < 20 {
            let c: Vec<f64> = w.set_center();
            let h = finite_diff_hessian(|x| 0.5 * ball_gauge_plain(&c, w.radius, x).powi(2), &w.y_bar, 1e-4 * w.radius.min(d));
            let fev = symmetric_eigs(&h)?;
            fd.observe(fev[0], lo, input);
            fd.observe(fev[1], hi, input);
        }
    }
    Ok((eig, fd))
}

trait WitnessCenter {
    fn set_center(&self) -> Vec<f64>;
}

impl WitnessCenter for crate::gauge::TightnessWitness<f64> {
    fn set_center(&self) -> Vec<f64> {
        match &self.set {
            StructuredSet::HullBallOrigin(h) => h.center().to_vec(),
            _ => unreachable!("witness is a hull"),
        }
    }
}

fn random_linearization<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> (Linearization<f64>, Vec<f64>) {
    let values: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..3.0)).collect();
    let subgrads = (0..m).map(|_| normal_vec(n, rng)).collect();
    (Linearization { values, subgrads }, normal_vec(n, rng))
}

/// Two-component prox-linear closed form vs primal KKT enumeration.
pub fn suite_gen_grad_pair(count: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = rng_for(seed, 53);
    let mut report = OracleReport::new("gen_grad_pair", 1e-8);
    for _ in 0..count {
        let n = rng.gen_range(2..=6);
        let (lin, y) = random_linearization(n, 2, &mut rng);
        let alpha = 10f64.powf(rng.gen_range(-2.0..1.0));
        let fast = gen_grad_step_lin(&lin, &y, alpha)?;
        let slow = small_qp_enumerate(QpKind::ProxLinear { alpha }, &lin.values, &lin.subgrads, &y)?;
        record_point(&mut report, &fast.next_point, &slow.point, &y, || json!({ "lin": lin.values, "alpha": alpha }));
    }
    Ok(report)
}

/// Two-component level projection closed form vs primal KKT enumeration.
pub fn suite_level_pair(count: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = rng_for(seed, 59);
    let mut report = OracleReport::new("level_pair", 1e-8);
    for _ in 0..count {
        let n = rng.gen_range(2..=6);
        let (lin, y) = random_linearization(n, 2, &mut rng);
        let f_bar = rng.gen_range(0.1..3.0);
        let fast = level_proj_step_lin(&lin, &y, f_bar)?;
        let slow = small_qp_enumerate(QpKind::LevelProjection { f_bar }, &lin.values, &lin.subgrads, &y)?;
        record_point(&mut report, &fast.next_point, &slow.point, &y, || json!({ "lin": lin.values, "f_bar": f_bar }));
    }
    Ok(report)
}

/// Error of a step relative to the displacement length (at least one).
fn record_point(report: &mut OracleReport, fast: &[f64], slow: &[f64], y: &[f64], input: impl FnOnce() -> Value) {
    let err = fast.iter().zip(slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let step = slow.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    report.record(err, err / step.max(1.0), input);
}

/// Converse certificates sampled for containment: the unit ball's own
/// certificate, a halfspace inner ball at radius `0.1R`, and a p = 1.5 ball
/// whose strong convexity is inflated twofold (negative control).
pub fn suite_containment(count: usize, seed: u64) -> Result<Vec<OracleReport>> {
    let mut rng = rng_for(seed, 61);
    let mut out = Vec::new();

    let unit = GaugeOracle::at_origin(StructuredSet::pnorm_ball(2.0, vec![0.0, 0.0, 0.0])?)?;
    let ev = unit.gauge(&[0.6, -0.8, 0.0])?;
    let certs = converse_certificate(&ev, 1.0, 1.0)?;
    let ybar = ev.boundary_point.clone().unwrap();
    let mut r = containment_sample(&certs.outer.unwrap(), CertificateKind::Outer, unit.set(), &ybar, 0.5, count, &mut rng)?;
    r.name = "containment_unit_ball_outer".into();
    out.push(r);
    let mut r = containment_sample(&certs.inner.unwrap(), CertificateKind::Inner, unit.set(), &ybar, 0.5, count, &mut rng)?;
    r.name = "containment_unit_ball_inner".into();
    out.push(r);

    let half = GaugeOracle::at_origin(StructuredSet::halfspace(vec![1.0, 2.0], 3.0)?)?;
    let ev = half.gauge(&[2.0, 2.0])?;
    let big_r: f64 = half.inner_radius();
    let certs = converse_certificate(&ev, 0.0, (big_r * big_r).recip())?;
    let ybar = ev.boundary_point.clone().unwrap();
    let mut r = containment_sample(&certs.inner.unwrap(), CertificateKind::Inner, half.set(), &ybar, 0.1 * big_r, count, &mut rng)?;
    r.name = "containment_halfspace_inner".into();
    out.push(r);

    // p = 1.5: the diagonal boundary point has the flattest curvature, so the
    // local strong convexity there gives an exact osculating certificate.
    let p15 = GaugeOracle::at_origin(StructuredSet::pnorm_ball(1.5, vec![0.0, 0.0])?)?;
    let ev = p15.gauge(&[1.0, 1.0])?;
    let ybar = ev.boundary_point.clone().unwrap();
    let consts = p15.set().local_constants(&ybar)?;
    let mu = local_structure(&ev, &[0.0, 0.0], consts.alpha, consts.beta)?.mu_local;
    let honest = converse_certificate(&ev, 0.5 * mu, f64::INFINITY)?.outer.unwrap();
    let mut r = containment_sample(&honest, CertificateKind::Outer, p15.set(), &ybar, 0.3, count, &mut rng)?;
    r.name = "containment_p15_outer".into();
    out.push(r);
    let inflated = converse_certificate(&ev, 2.0 * mu, f64::INFINITY)?.outer.unwrap();
    let mut r = containment_sample(&inflated, CertificateKind::Outer, p15.set(), &ybar, 0.3, count, &mut rng)?;
    r.name = "containment_p15_inflated".into();
    r.negative_control = true;
    out.push(r);
    Ok(out)
}

/// Every suite at the given size; used by the `verify` subcommand.
pub fn run_all_suites(count: usize, seed: u64) -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();
    for fam in [GaugeFamily::Halfspace, GaugeFamily::BallP2, GaugeFamily::EllipsoidP2, GaugeFamily::Quartic, GaugeFamily::GeneralP] {
        out.push(suite_gauge(fam, count, seed)?);
    }
    out.push(suite_corrupted_radical(count.min(100), seed)?);
    out.push(suite_hessian_fd(count, seed)?);
    out.push(suite_hessian_eigs(count, seed)?);
    out.push(suite_rank2(count, seed)?);
    let (eig, fd) = suite_witness(count, seed)?;
    out.push(eig);
    out.push(fd);
    out.push(suite_gen_grad_pair(count, seed)?);
    out.push(suite_level_pair(count, seed)?);
    out.extend(suite_containment(count.max(2000), seed)?);
    Ok(out)
}
