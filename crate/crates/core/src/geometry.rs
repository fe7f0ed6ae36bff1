//! Bounded domains as implicit geometry: signed distance, planes and reflections,
//! boundary sampling, diameters and the reflected-cap decomposition.

use crate::scalar::{dist, dot, norm, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Largest spatial dimension supported by domains.
pub const MAX_DIM: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid domain spec `{spec}`: {reason}")]
    Parse { spec: String, reason: String },
    #[error("invalid domain: {0}")]
    Validation(String),
    #[error("domain is empty")]
    Empty,
    #[error("boundary sampling failed: {0}")]
    Sampling(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid hyperplane: {0}")]
    Plane(String),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aabb<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Real> Aabb<T> {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn diagonal(&self) -> T {
        dist(&self.lo, &self.hi)
    }

    pub fn center(&self) -> Vec<T> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| (a + b) / T::lit(2.0))
            .collect()
    }

    pub fn volume(&self) -> T {
        self.lo
            .iter()
            .zip(&self.hi)
            .fold(T::one(), |acc, (&a, &b)| acc * (b - a))
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&a, &b))| v >= a && v <= b)
    }

    pub fn union(&self, other: &Aabb<T>) -> Aabb<T> {
        Aabb {
            lo: self.lo.iter().zip(&other.lo).map(|(&a, &b)| a.min(b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(&a, &b)| a.max(b)).collect(),
        }
    }
}

/// Oriented hyperplane `{x : x . direction = offset}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane<T> {
    pub direction: Vec<T>,
    pub offset: T,
}

impl<T: Real> Hyperplane<T> {
    /// Normalizes `direction`; fails for a zero or non-finite vector.
    pub fn new(direction: &[T], offset: T) -> Result<Self> {
        let n = norm(direction);
        if !(n > T::zero()) || !n.is_finite() || !offset.is_finite() {
            return Err(GeometryError::Plane("direction must be a nonzero finite vector".into()));
        }
        Ok(Hyperplane {
            direction: direction.iter().map(|&v| v / n).collect(),
            offset,
        })
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    /// `x . e - lambda`; negative on the cap side.
    #[inline]
    pub fn signed_offset(&self, x: &[T]) -> T {
        dot(x, &self.direction) - self.offset
    }

    #[inline]
    pub fn reflect_into(&self, x: &[T], out: &mut [T]) {
        let t = T::lit(2.0) * self.signed_offset(x);
        for ((o, &xi), &ei) in out.iter_mut().zip(x).zip(&self.direction) {
            *o = xi - t * ei;
        }
    }

    pub fn reflect(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); x.len()];
        self.reflect_into(x, &mut out);
        out
    }

    /// Reflects a direction vector (no offset).
    pub fn reflect_vector(&self, v: &[T]) -> Vec<T> {
        let t = T::lit(2.0) * dot(v, &self.direction);
        v.iter().zip(&self.direction).map(|(&vi, &ei)| vi - t * ei).collect()
    }
}

/// `x - 2((x . e) - lambda) e`.
pub fn reflect<T: Real>(x: &[T], plane: &Hyperplane<T>) -> Vec<T> {
    plane.reflect(x)
}

/// Built-in shapes.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape<T> {
    Ball { center: Vec<T>, radius: T },
    Ellipsoid { center: Vec<T>, semi_axes: Vec<T> },
    Box { lo: Vec<T>, hi: Vec<T> },
    Union(Vec<Shape<T>>),
    /// Planar star domain `r(theta) = r0 (1 + sum_m a_m cos(m theta))`.
    Star {
        center: Vec<T>,
        r0: T,
        coeffs: Vec<T>,
        /// Scale making `(rho / r(theta) - 1) * scale` 1-Lipschitz.
        sdf_scale: T,
    },
}

impl<T: Real> Shape<T> {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Ball { center, .. } | Shape::Ellipsoid { center, .. } => center.len(),
            Shape::Box { lo, .. } => lo.len(),
            Shape::Union(parts) => parts[0].dim(),
            Shape::Star { .. } => 2,
        }
    }

    fn bbox(&self) -> Aabb<T> {
        match self {
            Shape::Ball { center, radius } => Aabb {
                lo: center.iter().map(|&c| c - *radius).collect(),
                hi: center.iter().map(|&c| c + *radius).collect(),
            },
            Shape::Ellipsoid { center, semi_axes } => Aabb {
                lo: center.iter().zip(semi_axes).map(|(&c, &a)| c - a).collect(),
                hi: center.iter().zip(semi_axes).map(|(&c, &a)| c + a).collect(),
            },
            Shape::Box { lo, hi } => Aabb {
                lo: lo.clone(),
                hi: hi.clone(),
            },
            Shape::Union(parts) => parts[1..]
                .iter()
                .fold(parts[0].bbox(), |acc, p| acc.union(&p.bbox())),
            Shape::Star { center, r0, coeffs, .. } => {
                let rmax = *r0 * (T::one() + coeffs.iter().fold(T::zero(), |a, &c| a + c.abs()));
                Aabb {
                    lo: center.iter().map(|&c| c - rmax).collect(),
                    hi: center.iter().map(|&c| c + rmax).collect(),
                }
            }
        }
    }

    /// Circumscribed-ball diameter bound.
    fn diameter_upper(&self) -> T {
        let two = T::lit(2.0);
        match self {
            Shape::Ball { radius, .. } => two * *radius,
            Shape::Ellipsoid { semi_axes, .. } => {
                two * semi_axes.iter().fold(T::zero(), |a, &b| a.max(b))
            }
            Shape::Box { lo, hi } => dist(lo, hi),
            Shape::Star { r0, coeffs, .. } => {
                two * *r0 * (T::one() + coeffs.iter().fold(T::zero(), |a, &c| a + c.abs()))
            }
            Shape::Union(parts) => {
                let balls: Vec<(Vec<T>, T)> = parts
                    .iter()
                    .map(|p| (p.anchor(), p.diameter_upper() / two))
                    .collect();
                let mut best = T::zero();
                for (i, (ci, ri)) in balls.iter().enumerate() {
                    for (cj, rj) in &balls[i..] {
                        best = best.max(dist(ci, cj) + *ri + *rj);
                    }
                }
                best
            }
        }
    }

    fn anchor(&self) -> Vec<T> {
        match self {
            Shape::Ball { center, .. } | Shape::Ellipsoid { center, .. } | Shape::Star { center, .. } => {
                center.clone()
            }
            Shape::Box { .. } => self.bbox().center(),
            Shape::Union(parts) => parts[0].anchor(),
        }
    }

    /// Interior points from which every ray crosses the boundary (one per component).
    fn charts(&self, out: &mut Vec<Vec<T>>) {
        match self {
            Shape::Union(parts) => parts.iter().for_each(|p| p.charts(out)),
            s => out.push(s.anchor()),
        }
    }

    fn is_smooth(&self) -> bool {
        match self {
            Shape::Box { .. } => false,
            Shape::Union(parts) => {
                // Overlapping components meet at a corner.
                parts.iter().all(|p| p.is_smooth())
                    && parts.iter().enumerate().all(|(i, a)| {
                        parts[i + 1..].iter().all(|b| {
                            dist(&a.anchor(), &b.anchor())
                                >= (a.diameter_upper() + b.diameter_upper()) / T::lit(2.0)
                        })
                    })
            }
            _ => true,
        }
    }

    /// Sign-equivalent of the signed distance, cheaper where the exact distance needs a solve.
    fn implicit(&self, x: &[T]) -> T {
        match self {
            Shape::Ellipsoid { center, semi_axes } => {
                let mut q = T::zero();
                for ((&xi, &ci), &ai) in x.iter().zip(center).zip(semi_axes) {
                    let t = (xi - ci) / ai;
                    q += t * t;
                }
                q - T::one()
            }
            Shape::Union(parts) => parts
                .iter()
                .map(|p| p.implicit(x))
                .fold(T::infinity(), |a, b| a.min(b)),
            s => s.sdf_grad(x, None),
        }
    }

    /// Signed distance (or 1-Lipschitz lower bound for stars); writes the gradient when asked.
    fn sdf_grad(&self, x: &[T], grad: Option<&mut [T]>) -> T {
        match self {
            Shape::Ball { center, radius } => {
                let r = dist(x, center);
                if let Some(g) = grad {
                    if r > T::zero() {
                        for ((gi, &xi), &ci) in g.iter_mut().zip(x).zip(center) {
                            *gi = (xi - ci) / r;
                        }
                    } else {
                        unit_axis(g, 0);
                    }
                }
                r - *radius
            }
            Shape::Box { lo, hi } => box_sdf(x, lo, hi, grad),
            Shape::Ellipsoid { center, semi_axes } => ellipsoid_sdf(x, center, semi_axes, grad),
            Shape::Union(parts) => {
                let mut best = T::infinity();
                let mut best_i = 0;
                for (i, p) in parts.iter().enumerate() {
                    let v = p.sdf_grad(x, None);
                    if v < best {
                        best = v;
                        best_i = i;
                    }
                }
                if let Some(g) = grad {
                    parts[best_i].sdf_grad(x, Some(g));
                }
                best
            }
            Shape::Star {
                center,
                r0,
                coeffs,
                sdf_scale,
            } => {
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                let rho = (dx * dx + dy * dy).sqrt();
                let theta = dy.atan2(dx);
                let (r, dr) = star_radius(*r0, coeffs, theta);
                if let Some(g) = grad {
                    // grad(rho / r) = (rho_hat - (r'/r) theta_hat) / r
                    let (ct, st) = if rho > T::zero() {
                        (dx / rho, dy / rho)
                    } else {
                        (T::one(), T::zero())
                    };
                    let k = dr / r;
                    g[0] = *sdf_scale * (ct + k * st) / r;
                    g[1] = *sdf_scale * (st - k * ct) / r;
                }
                *sdf_scale * (rho / r - T::one())
            }
        }
    }

    /// Outward unit normal at a boundary point, when the shape has an analytic one.
    fn normal(&self, x: &[T]) -> Option<Vec<T>> {
        let n = x.len();
        let mut g = vec![T::zero(); n];
        match self {
            Shape::Ellipsoid { center, semi_axes } => {
                for i in 0..n {
                    g[i] = (x[i] - center[i]) / (semi_axes[i] * semi_axes[i]);
                }
            }
            Shape::Union(parts) => {
                let i = parts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, p.sdf_grad(x, None).abs()))
                    .fold((0, T::infinity()), |a, b| if b.1 < a.1 { b } else { a })
                    .0;
                return parts[i].normal(x);
            }
            Shape::Box { .. } => return None,
            s => {
                s.sdf_grad(x, Some(&mut g));
            }
        }
        let l = norm(&g);
        (l > T::zero()).then(|| g.into_iter().map(|v| v / l).collect())
    }
}

fn unit_axis<T: Real>(g: &mut [T], axis: usize) {
    for (i, v) in g.iter_mut().enumerate() {
        *v = if i == axis { T::one() } else { T::zero() };
    }
}

fn box_sdf<T: Real>(x: &[T], lo: &[T], hi: &[T], grad: Option<&mut [T]>) -> T {
    let n = x.len();
    let two = T::lit(2.0);
    let mut q = [T::zero(); MAX_DIM];
    let mut sgn = [T::one(); MAX_DIM];
    let mut out2 = T::zero();
    let mut inside = -T::infinity();
    let mut arg = 0;
    for i in 0..n {
        let m = (lo[i] + hi[i]) / two;
        let h = (hi[i] - lo[i]) / two;
        let d = x[i] - m;
        sgn[i] = if d < T::zero() { -T::one() } else { T::one() };
        q[i] = d.abs() - h;
        if q[i] > T::zero() {
            out2 += q[i] * q[i];
        }
        if q[i] > inside {
            inside = q[i];
            arg = i;
        }
    }
    let outside = out2.sqrt();
    if let Some(g) = grad {
        if outside > T::zero() {
            for i in 0..n {
                g[i] = sgn[i] * q[i].max(T::zero()) / outside;
            }
        } else {
            unit_axis(g, arg);
            g[arg] = sgn[arg];
        }
    }
    outside + inside.min(T::zero())
}

/// Exact Euclidean signed distance to an axis-aligned ellipsoid.
///
/// The closest point is `q_i = a_i^2 p_i / (a_i^2 + t)` with `t` the root of
/// `F(t) = sum (a_i p_i / (a_i^2 + t))^2 - 1` above `-a_min^2`, handled separately when
/// `p` has no component along the shortest axes.
fn ellipsoid_sdf<T: Real>(x: &[T], center: &[T], axes: &[T], grad: Option<&mut [T]>) -> T {
    let n = x.len();
    let mut p = [0.0f64; MAX_DIM];
    let mut a = [0.0f64; MAX_DIM];
    let mut sign = [1.0f64; MAX_DIM];
    for i in 0..n {
        let d = (x[i] - center[i]).as_f64();
        sign[i] = if d < 0.0 { -1.0 } else { 1.0 };
        p[i] = d.abs();
        a[i] = axes[i].as_f64();
    }
    let a_min = a[..n].iter().cloned().fold(f64::INFINITY, f64::min);
    let implicit: f64 = (0..n).map(|i| (p[i] / a[i]).powi(2)).sum::<f64>() - 1.0;
    let on_min = |i: usize| (a[i] - a_min).abs() <= 1e-14 * a_min;
    let perp2: f64 = (0..n).filter(|&i| on_min(i)).map(|i| p[i] * p[i]).sum();
    let f = |t: f64| -> f64 {
        (0..n)
            .map(|i| (a[i] * p[i] / (a[i] * a[i] + t)).powi(2))
            .sum::<f64>()
            - 1.0
    };
    let t_floor = -a_min * a_min;
    let mut q = [0.0f64; MAX_DIM];
    let degenerate = perp2 == 0.0 && {
        let lim: f64 = (0..n)
            .filter(|&i| !on_min(i))
            .map(|i| (a[i] * p[i] / (a[i] * a[i] - a_min * a_min)).powi(2))
            .sum();
        lim < 1.0
    };
    if degenerate {
        let mut used = 0.0;
        for i in 0..n {
            if !on_min(i) {
                q[i] = a[i] * a[i] * p[i] / (a[i] * a[i] - a_min * a_min);
                used += (q[i] / a[i]).powi(2);
            }
        }
        let first = (0..n).find(|&i| on_min(i)).unwrap_or(0);
        q[first] = a_min * (1.0 - used).max(0.0).sqrt();
    } else {
        // F is decreasing on (t_floor, inf); bracket and solve with safeguarded Newton.
        let (mut lo, mut hi) = if implicit > 0.0 {
            (0.0, 1.0_f64)
        } else {
            (t_floor, 0.0)
        };
        if implicit > 0.0 {
            while f(hi) > 0.0 {
                lo = hi;
                hi *= 2.0;
            }
        }
        let mut t = if implicit > 0.0 { 0.5 * (lo + hi) } else { 0.0 };
        for _ in 0..200 {
            let ft = f(t);
            if ft == 0.0 {
                break;
            }
            if ft > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let dft: f64 = (0..n)
                .map(|i| {
                    let d = a[i] * a[i] + t;
                    -2.0 * (a[i] * p[i]).powi(2) / (d * d * d)
                })
                .sum();
            let mut next = t - ft / dft;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-15 * (1.0 + t.abs()) || hi - lo <= 1e-15 * (1.0 + t.abs()) {
                t = next;
                break;
            }
            t = next;
        }
        for i in 0..n {
            q[i] = a[i] * a[i] * p[i] / (a[i] * a[i] + t);
        }
    }
    let mut d2 = 0.0;
    for i in 0..n {
        d2 += (p[i] - q[i]).powi(2);
    }
    let d = d2.sqrt();
    let s = if implicit > 0.0 { 1.0 } else { -1.0 };
    if let Some(g) = grad {
        if d > 1e-13 * a_min {
            for i in 0..n {
                g[i] = T::lit(s * sign[i] * (p[i] - q[i]) / d);
            }
        } else {
            let mut l = 0.0;
            for i in 0..n {
                l += (p[i] / (a[i] * a[i])).powi(2);
            }
            let l = l.sqrt().max(f64::MIN_POSITIVE);
            for i in 0..n {
                g[i] = T::lit(sign[i] * p[i] / (a[i] * a[i]) / l);
            }
        }
    }
    T::lit(s * d)
}

fn star_radius<T: Real>(r0: T, coeffs: &[T], theta: T) -> (T, T) {
    let mut r = T::one();
    let mut dr = T::zero();
    for (m, &c) in coeffs.iter().enumerate() {
        let m = T::from_usize_lossy(m + 1);
        r += c * (m * theta).cos();
        dr -= c * m * (m * theta).sin();
    }
    (r0 * r, r0 * dr)
}

/// Fraction of the box `center +- half` lying in `{x : n . (x - center) <= -d}` (`n` unit).
pub fn halfspace_box_fraction<T: Real>(normal: &[T], d: T, half: &[T]) -> T {
    let dim = normal.len();
    let two = T::lit(2.0);
    // Shift to [0, 2h]: condition sum |n_i| y_i <= c.
    let mut c = -d;
    let mut ext = [T::zero(); MAX_DIM];
    for i in 0..dim {
        c += normal[i].abs() * half[i];
        ext[i] = normal[i].abs() * two * half[i];
    }
    let total = ext[..dim].iter().fold(T::zero(), |a, &b| a + b);
    if c <= T::zero() {
        return T::zero();
    }
    if c >= total {
        return T::one();
    }
    // Extents that are negligible are replaced by their mean.
    let cut = T::lit(1e-4) * total;
    let mut a = [T::zero(); MAX_DIM];
    let mut m = 0;
    for &e in &ext[..dim] {
        if e > cut {
            a[m] = e;
            m += 1;
        } else {
            c -= e / two;
        }
    }
    let a = &a[..m];
    uniform_sum_cdf(a, c)
}

/// `P(sum a_i U_i <= c)` for independent uniforms on [0, 1].
fn uniform_sum_cdf<T: Real>(a: &[T], c: T) -> T {
    let m = a.len();
    if m == 0 {
        return if c >= T::zero() { T::one() } else { T::zero() };
    }
    let total = a.iter().fold(T::zero(), |acc, &v| acc + v);
    if c <= T::zero() {
        return T::zero();
    }
    if c >= total {
        return T::one();
    }
    // Evaluate on the smaller side for accuracy.
    let (c_eff, flip) = if c > total / T::lit(2.0) {
        (total - c, true)
    } else {
        (c, false)
    };
    let mut acc = T::zero();
    for mask in 0u32..(1 << m) {
        let mut shift = T::zero();
        for (i, &ai) in a.iter().enumerate() {
            if mask & (1 << i) != 0 {
                shift += ai;
            }
        }
        let r = c_eff - shift;
        if r > T::zero() {
            let term = r.powi(m as i32);
            if mask.count_ones() % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
    }
    let mut denom = T::one();
    for (i, &ai) in a.iter().enumerate() {
        denom *= ai * T::from_usize_lossy(i + 1);
    }
    let p = (acc / denom).max(T::zero()).min(T::one());
    if flip {
        T::one() - p
    } else {
        p
    }
}

/// Anything the volume integrator can integrate over.
pub trait Region<T: Real>: Sync {
    fn dim(&self) -> usize;
    fn bbox(&self) -> &Aabb<T>;
    /// Signed distance or a lower bound of it with Lipschitz constant `lipschitz()`.
    fn sdf(&self, x: &[T]) -> T;
    fn lipschitz(&self) -> T {
        T::one()
    }
    /// Approximate fraction of the box `center +- half` inside the region.
    fn volume_fraction(&self, center: &[T], half: &[T]) -> T;
    #[inline]
    fn contains(&self, x: &[T]) -> bool {
        self.sdf(x) < T::zero()
    }
}

/// Bounded open set `{x : sdf(x) < 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain<T> {
    shape: Shape<T>,
    bbox: Aabb<T>,
    label: String,
}

impl<T: Real> Domain<T> {
    pub fn from_shape(shape: Shape<T>, label: impl Into<String>) -> Result<Self> {
        validate_shape(&shape)?;
        let bbox = shape.bbox();
        Ok(Domain {
            shape,
            bbox,
            label: label.into(),
        })
    }

    pub fn ball(center: &[T], radius: T) -> Result<Self> {
        let label = format!("ball:{}:{}", join(center, ","), radius);
        Self::from_shape(
            Shape::Ball {
                center: center.to_vec(),
                radius,
            },
            label,
        )
    }

    pub fn ellipsoid(center: &[T], semi_axes: &[T]) -> Result<Self> {
        let label = format!("ellipsoid:{}:{}", join(center, ","), join(semi_axes, ","));
        Self::from_shape(
            Shape::Ellipsoid {
                center: center.to_vec(),
                semi_axes: semi_axes.to_vec(),
            },
            label,
        )
    }

    pub fn axis_box(lo: &[T], hi: &[T]) -> Result<Self> {
        let label = format!("box:{}:{}", join(lo, ","), join(hi, ","));
        Self::from_shape(
            Shape::Box {
                lo: lo.to_vec(),
                hi: hi.to_vec(),
            },
            label,
        )
    }

    pub fn star(center: &[T], r0: T, coeffs: &[T]) -> Result<Self> {
        let label = format!("star:{}:{}:{}", join(center, ","), r0, join(coeffs, ","));
        let shape = Shape::Star {
            center: center.to_vec(),
            r0,
            coeffs: coeffs.to_vec(),
            sdf_scale: T::one(),
        };
        validate_shape(&shape)?;
        // min over theta of r / sqrt(1 + (r'/r)^2), slightly deflated.
        let mut m = T::infinity();
        let samples = 4096;
        for i in 0..samples {
            let th = T::lit(2.0) * T::PI() * T::from_usize_lossy(i) / T::from_usize_lossy(samples);
            let (r, dr) = star_radius(r0, coeffs, th);
            let k = dr / r;
            m = m.min(r / (T::one() + k * k).sqrt());
        }
        let shape = Shape::Star {
            center: center.to_vec(),
            r0,
            coeffs: coeffs.to_vec(),
            sdf_scale: m * T::lit(0.999),
        };
        Self::from_shape(shape, label)
    }

    pub fn union(parts: Vec<Domain<T>>) -> Result<Self> {
        let label = format!(
            "union:{}",
            parts.iter().map(|p| p.label.as_str()).collect::<Vec<_>>().join(";")
        );
        Self::from_shape(Shape::Union(parts.into_iter().map(|p| p.shape).collect()), label)
    }

    /// Parses the domain-spec grammar, e.g. `ball:0,0,0:1` or `union:ball:-1.2,0:1;ball:1.2,0:1`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let err = |reason: &str| GeometryError::Parse {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let (tag, rest) = spec.split_once(':').ok_or_else(|| err("missing `:`"))?;
        let nums = |s: &str| -> Result<Vec<T>> {
            s.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .map(T::lit)
                        .ok_or_else(|| err(&format!("bad number `{v}`")))
                })
                .collect()
        };
        let fields: Vec<&str> = rest.split(':').collect();
        let mut dom = match tag.trim().to_ascii_lowercase().as_str() {
            "ball" => {
                let [c, r] = fields[..] else {
                    return Err(err("expected ball:<center>:<radius>"));
                };
                let r = nums(r)?;
                if r.len() != 1 {
                    return Err(err("radius must be a single number"));
                }
                Self::ball(&nums(c)?, r[0])?
            }
            "ellipsoid" => {
                let [c, a] = fields[..] else {
                    return Err(err("expected ellipsoid:<center>:<semi-axes>"));
                };
                Self::ellipsoid(&nums(c)?, &nums(a)?)?
            }
            "box" => {
                let [lo, hi] = fields[..] else {
                    return Err(err("expected box:<lo>:<hi>"));
                };
                Self::axis_box(&nums(lo)?, &nums(hi)?)?
            }
            "star" => {
                let (c, r0, a) = match fields[..] {
                    [c, r0] => (c, r0, None),
                    [c, r0, a] => (c, r0, Some(a)),
                    _ => return Err(err("expected star:<cx>,<cy>:<r0>:<a1>,<a2>,...")),
                };
                let r0 = nums(r0)?;
                if r0.len() != 1 {
                    return Err(err("r0 must be a single number"));
                }
                let coeffs = match a {
                    Some(a) if !a.trim().is_empty() => nums(a)?,
                    _ => Vec::new(),
                };
                Self::star(&nums(c)?, r0[0], &coeffs)?
            }
            "union" => {
                let parts = rest
                    .split(';')
                    .filter(|s| !s.trim().is_empty())
                    .map(Self::parse)
                    .collect::<Result<Vec<_>>>()?;
                if parts.is_empty() {
                    return Err(err("union needs at least one component"));
                }
                Self::union(parts)?
            }
            _ => return Err(err("unknown domain kind")),
        };
        dom.label = spec.to_string();
        Ok(dom)
    }

    pub fn shape(&self) -> &Shape<T> {
        &self.shape
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    pub fn bbox(&self) -> &Aabb<T> {
        &self.bbox
    }

    /// Built-ins with corners (boxes, overlapping unions) are outside the C^1 hypothesis.
    pub fn is_smooth(&self) -> bool {
        self.shape.is_smooth()
    }

    /// Lipschitz bound of the signed distance; every built-in is 1-Lipschitz.
    pub fn lipschitz(&self) -> T {
        T::one()
    }

    /// Circumscribed diameter bound from the shape description.
    pub fn diameter_upper(&self) -> T {
        self.shape.diameter_upper().min(self.bbox.diagonal())
    }

    /// Scale-free boundary tolerance `1e-9 diam` (floored at the scalar precision).
    pub fn boundary_tol(&self) -> T {
        T::tol_floor(1e-9) * self.diameter_upper()
    }

    #[inline]
    pub fn sdf(&self, x: &[T]) -> T {
        self.shape.sdf_grad(x, None)
    }

    #[inline]
    pub fn sdf_grad(&self, x: &[T], grad: &mut [T]) -> T {
        self.shape.sdf_grad(x, Some(grad))
    }

    #[inline]
    pub fn implicit(&self, x: &[T]) -> T {
        self.shape.implicit(x)
    }

    #[inline]
    pub fn contains(&self, x: &[T]) -> bool {
        self.implicit(x) < T::zero()
    }

    /// Outward unit normal at (or near) a boundary point.
    pub fn normal(&self, x: &[T]) -> Vec<T> {
        if let Some(n) = self.shape.normal(x) {
            return n;
        }
        let dim = x.len();
        let h = T::tol_floor(1e-7) * self.diameter_upper();
        let mut g = vec![T::zero(); dim];
        let mut xp = x.to_vec();
        for i in 0..dim {
            xp[i] = x[i] + h;
            let fp = self.sdf(&xp);
            xp[i] = x[i] - h;
            let fm = self.sdf(&xp);
            xp[i] = x[i];
            g[i] = (fp - fm) / (T::lit(2.0) * h);
        }
        let l = norm(&g);
        if l > T::zero() {
            g.iter_mut().for_each(|v| *v /= l);
        }
        g
    }

    /// Ray anchors: one interior point per component.
    pub fn charts(&self) -> Vec<Vec<T>> {
        let mut out = Vec::new();
        self.shape.charts(&mut out);
        out
    }

    /// First sign change of the implicit function along `origin + t dir` for `t` in
    /// `[t0, t1]`: a march of `steps` cells followed by bisection.
    pub fn first_crossing(&self, origin: &[T], dir: &[T], t0: T, t1: T, steps: usize) -> Option<T> {
        let dim = origin.len();
        let mut p = [T::zero(); MAX_DIM];
        let mut eval = |t: T| {
            for i in 0..dim {
                p[i] = origin[i] + t * dir[i];
            }
            self.implicit(&p[..dim]) < T::zero()
        };
        let start = eval(t0);
        let h = (t1 - t0) / T::from_usize_lossy(steps.max(1));
        let mut lo = t0;
        let mut hi = None;
        for k in 1..=steps.max(1) {
            let t = if k == steps.max(1) { t1 } else { t0 + h * T::from_usize_lossy(k) };
            if eval(t) != start {
                hi = Some(t);
                break;
            }
            lo = t;
        }
        let mut hi = hi?;
        for _ in 0..200 {
            let mid = (lo + hi) / T::lit(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            if eval(mid) == start {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some((lo + hi) / T::lit(2.0))
    }

    /// First boundary crossing along the ray `anchor + t u`, `|u| = 1`, from an interior anchor.
    pub fn ray_boundary_point(&self, anchor: &[T], u: &[T]) -> Option<Vec<T>> {
        if self.implicit(anchor) >= T::zero() {
            return None;
        }
        let reach = self.bbox.diagonal() + dist(anchor, &self.bbox.center());
        let t = self.first_crossing(anchor, u, T::zero(), reach, 256)?;
        Some(anchor.iter().zip(u).map(|(&a, &v)| a + t * v).collect())
    }

    /// Boundary sample with normal for a chart direction.
    pub fn sample_at(&self, chart: &[T], u: &[T]) -> Option<BoundarySample<T>> {
        let point = self.ray_boundary_point(chart, u)?;
        let normal = self.normal(&point);
        Some(BoundarySample { point, normal })
    }
}

impl<T: Real> Region<T> for Domain<T> {
    fn dim(&self) -> usize {
        self.bbox.dim()
    }

    fn bbox(&self) -> &Aabb<T> {
        &self.bbox
    }

    #[inline]
    fn sdf(&self, x: &[T]) -> T {
        self.shape.sdf_grad(x, None)
    }

    fn volume_fraction(&self, center: &[T], half: &[T]) -> T {
        let mut g = [T::zero(); MAX_DIM];
        let dim = center.len();
        let s = self.shape.sdf_grad(center, Some(&mut g[..dim]));
        planar_fraction(s, &g[..dim], half)
    }

    #[inline]
    fn contains(&self, x: &[T]) -> bool {
        self.implicit(x) < T::zero()
    }
}

/// Fraction from a first-order model of the level set through the gradient.
pub(crate) fn planar_fraction<T: Real>(sdf: T, grad: &[T], half: &[T]) -> T {
    let l = norm(grad);
    if !(l > T::zero()) {
        return if sdf < T::zero() { T::one() } else { T::zero() };
    }
    let mut n = [T::zero(); MAX_DIM];
    for (ni, &gi) in n.iter_mut().zip(grad) {
        *ni = gi / l;
    }
    halfspace_box_fraction(&n[..grad.len()], sdf / l, half)
}

fn validate_shape<T: Real>(shape: &Shape<T>) -> Result<()> {
    let bad = |m: String| Err(GeometryError::Validation(m));
    let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
    match shape {
        Shape::Ball { center, radius } => {
            if center.is_empty() || center.len() > MAX_DIM {
                return bad(format!("dimension must be 1..={MAX_DIM}"));
            }
            if !(*radius > T::zero()) || !finite(center) {
                return bad(format!("radius must be positive, got {radius}"));
            }
        }
        Shape::Ellipsoid { center, semi_axes } => {
            if center.is_empty() || center.len() > MAX_DIM || center.len() != semi_axes.len() {
                return bad("center and semi-axes must have the same dimension".into());
            }
            if semi_axes.iter().any(|&a| !(a > T::zero())) || !finite(center) || !finite(semi_axes) {
                return bad("semi-axes must be positive".into());
            }
        }
        Shape::Box { lo, hi } => {
            if lo.is_empty() || lo.len() > MAX_DIM || lo.len() != hi.len() {
                return bad("box corners must have the same dimension".into());
            }
            if lo.iter().zip(hi).any(|(&a, &b)| !(a < b)) {
                return bad("box needs lo < hi in every coordinate".into());
            }
        }
        Shape::Union(parts) => {
            if parts.is_empty() {
                return bad("union needs at least one component".into());
            }
            let d = parts[0].dim();
            for p in parts {
                validate_shape(p)?;
                if p.dim() != d {
                    return bad("union components must share a dimension".into());
                }
            }
        }
        Shape::Star { center, r0, coeffs, .. } => {
            if center.len() != 2 {
                return bad("star domains are planar".into());
            }
            if !(*r0 > T::zero()) {
                return bad(format!("r0 must be positive, got {r0}"));
            }
            let s = coeffs.iter().fold(T::zero(), |a, &c| a + c.abs());
            if !(s < T::one()) {
                return bad("perturbation amplitudes must satisfy sum |a_m| < 1".into());
            }
        }
    }
    Ok(())
}

fn join<T: Real>(v: &[T], sep: &str) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

impl<T: Real> fmt::Display for Domain<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// Point on the boundary with its outward unit normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySample<T> {
    pub point: Vec<T>,
    pub normal: Vec<T>,
}

pub(crate) fn random_unit<T: Real, R: Rng>(rng: &mut R, dim: usize) -> Vec<T> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let l = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if l > 1e-12 {
            return v.into_iter().map(|x| T::lit(x / l)).collect();
        }
    }
}

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` boundary points by ray-rooting from each component's anchor through seeded
/// random directions. Normals are analytic where the shape has them.
pub fn boundary_sample<T: Real>(d: &Domain<T>, n: usize, seed: u64) -> Result<Vec<BoundarySample<T>>> {
    if n == 0 {
        return Err(GeometryError::Sampling("need at least one sample".into()));
    }
    let charts = d.charts();
    let mut rng = rng_from_seed(seed);
    let tol = d.boundary_tol();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let chart = &charts[i % charts.len()];
        let u = random_unit(&mut rng, d.dim());
        let s = d
            .sample_at(chart, &u)
            .ok_or_else(|| GeometryError::Sampling(format!("no boundary crossing from {chart:?}")))?;
        if d.sdf(&s.point).abs() > tol {
            return Err(GeometryError::Sampling(format!(
                "root at {:?} misses the boundary tolerance",
                s.point
            )));
        }
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiameterBounds<T> {
    /// Max pairwise distance between boundary samples.
    pub lower: T,
    /// Conservative upper bound: the smaller of the bbox diagonal and the circumscribed bound.
    pub upper: T,
    pub bbox_diagonal: T,
}

pub fn diameter<T: Real>(d: &Domain<T>, n_samples: usize, seed: u64) -> Result<DiameterBounds<T>> {
    if n_samples < 2 {
        return Err(GeometryError::Sampling("diameter needs at least two samples".into()));
    }
    let pts = boundary_sample(d, n_samples, seed)?;
    let mut lower = T::zero();
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            lower = lower.max(dist(&a.point, &b.point));
        }
    }
    Ok(DiameterBounds {
        lower,
        upper: d.diameter_upper().max(lower),
        bbox_diagonal: d.bbox.diagonal(),
    })
}

/// Pattern search over chart directions minimizing `objective` on the boundary.
/// Returns the best (direction, boundary point, objective value).
pub(crate) fn refine_on_boundary<T: Real, F>(
    d: &Domain<T>,
    chart: &[T],
    u0: &[T],
    objective: F,
    min_step: T,
) -> Option<(Vec<T>, Vec<T>, T)>
where
    F: Fn(&[T]) -> T,
{
    let dim = u0.len();
    let mut u = u0.to_vec();
    let mut p = d.ray_boundary_point(chart, &u)?;
    let mut best = objective(&p);
    let mut step = T::lit(0.05);
    let mut trial = vec![T::zero(); dim];
    while step > min_step {
        let mut improved = false;
        for axis in 0..dim {
            for sgn in [T::one(), -T::one()] {
                for i in 0..dim {
                    trial[i] = u[i];
                }
                trial[axis] += sgn * step;
                let l = norm(&trial);
                trial.iter_mut().for_each(|v| *v /= l);
                if let Some(q) = d.ray_boundary_point(chart, &trial) {
                    let v = objective(&q);
                    if v < best {
                        best = v;
                        u.copy_from_slice(&trial);
                        p = q;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step /= T::lit(2.0);
        }
    }
    Some((u, p, best))
}

/// `lambda_0 = min over the closed domain of x . e`: boundary samples refined by local descent.
pub fn lambda_min<T: Real>(d: &Domain<T>, e: &[T]) -> Result<T> {
    extreme_projection(d, e, 1024, 0x1a3b)
}

/// `max over the closed domain of x . e`.
pub fn lambda_max<T: Real>(d: &Domain<T>, e: &[T]) -> Result<T> {
    let neg: Vec<T> = e.iter().map(|&v| -v).collect();
    Ok(-extreme_projection(d, &neg, 1024, 0x1a3c)?)
}

fn extreme_projection<T: Real>(d: &Domain<T>, e: &[T], n: usize, seed: u64) -> Result<T> {
    if e.len() != d.dim() {
        return Err(GeometryError::Dimension {
            expected: d.dim(),
            got: e.len(),
        });
    }
    let charts = d.charts();
    let mut rng = rng_from_seed(seed);
    let mut best = T::infinity();
    for chart in &charts {
        // Seed the search with the best of a batch of directions for this chart.
        let mut start: Option<(Vec<T>, T)> = None;
        let mut try_dir = |u: Vec<T>| {
            if let Some(p) = d.ray_boundary_point(chart, &u) {
                let v = dot(&p, e);
                if start.as_ref().is_none_or(|(_, b)| v < *b) {
                    start = Some((u, v));
                }
            }
        };
        try_dir(e.iter().map(|&v| -v).collect());
        for _ in 0..n / charts.len() {
            try_dir(random_unit(&mut rng, d.dim()));
        }
        let (u0, _) = start.ok_or(GeometryError::Empty)?;
        let min_step = T::tol_floor(1e-9);
        if let Some((_, _, v)) = refine_on_boundary(d, chart, &u0, |p| dot(p, e), min_step) {
            best = best.min(v);
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(GeometryError::Empty)
    }
}

/// Classification of a point relative to `T_lambda` and the reflected cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CapZone {
    /// In the domain, strictly on the cap side `x . e < lambda`.
    SigmaLambda,
    /// In the domain, and the mirror image lies in the cap.
    SigmaPrime,
    /// In the domain, beyond the plane, mirror image outside the domain.
    OmegaLambda,
    OnPlane,
    Outside,
}

pub fn region_membership<T: Real>(d: &Domain<T>, plane: &Hyperplane<T>, y: &[T]) -> CapZone {
    if !d.contains(y) {
        return CapZone::Outside;
    }
    let t = plane.signed_offset(y);
    if t.abs() <= d.boundary_tol() {
        return CapZone::OnPlane;
    }
    if t < T::zero() {
        return CapZone::SigmaLambda;
    }
    let mut r = [T::zero(); MAX_DIM];
    plane.reflect_into(y, &mut r[..y.len()]);
    if d.contains(&r[..y.len()]) {
        CapZone::SigmaPrime
    } else {
        CapZone::OmegaLambda
    }
}

/// The set `Omega_lambda`: domain points beyond `T_lambda` whose mirror image leaves the domain.
#[derive(Debug, Clone)]
pub struct CapRegion<'a, T> {
    domain: &'a Domain<T>,
    plane: Hyperplane<T>,
    bbox: Aabb<T>,
}

impl<'a, T: Real> CapRegion<'a, T> {
    pub fn new(domain: &'a Domain<T>, plane: Hyperplane<T>) -> Self {
        let mut bbox = domain.bbox().clone();
        // Tighten along an axis-aligned sweep direction.
        for (i, &ei) in plane.direction.iter().enumerate() {
            if (ei.abs() - T::one()).abs() <= T::epsilon() * T::lit(4.0) {
                if ei > T::zero() {
                    bbox.lo[i] = bbox.lo[i].max(plane.offset.min(bbox.hi[i]));
                } else {
                    bbox.hi[i] = bbox.hi[i].min((-plane.offset).max(bbox.lo[i]));
                }
            }
        }
        CapRegion {
            domain,
            plane,
            bbox,
        }
    }

    pub fn plane(&self) -> &Hyperplane<T> {
        &self.plane
    }
}

impl<T: Real> Region<T> for CapRegion<'_, T> {
    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn bbox(&self) -> &Aabb<T> {
        &self.bbox
    }

    fn lipschitz(&self) -> T {
        self.domain.lipschitz().max(T::one())
    }

    fn sdf(&self, y: &[T]) -> T {
        let n = y.len();
        let mut r = [T::zero(); MAX_DIM];
        self.plane.reflect_into(y, &mut r[..n]);
        self.domain
            .sdf(y)
            .max(-self.plane.signed_offset(y))
            .max(-self.domain.sdf(&r[..n]))
    }

    fn contains(&self, y: &[T]) -> bool {
        let n = y.len();
        if !(self.plane.signed_offset(y) > T::zero()) || !self.domain.contains(y) {
            return false;
        }
        let mut r = [T::zero(); MAX_DIM];
        self.plane.reflect_into(y, &mut r[..n]);
        !self.domain.contains(&r[..n])
    }

    fn volume_fraction(&self, center: &[T], half: &[T]) -> T {
        // Intersection of three sets. With at most one constraint cutting the box the
        // Frechet lower bound is exact, and it vanishes on the zero-width sliver of a
        // symmetric cap. Where several cut it, the bound collapses to zero on thin wedges,
        // so the linearized constraints are counted on a sub-grid instead.
        let n = center.len();
        let mut g_dom = [T::zero(); MAX_DIM];
        let s_dom = self.domain.sdf_grad(center, &mut g_dom[..n]);
        let f_dom = planar_fraction(s_dom, &g_dom[..n], half);
        let off = self.plane.signed_offset(center);
        let neg: Vec<T> = self.plane.direction.iter().map(|&v| -v).collect();
        let f_side = halfspace_box_fraction(&neg, -off, half);
        let mut r = [T::zero(); MAX_DIM];
        self.plane.reflect_into(center, &mut r[..n]);
        let mut g = [T::zero(); MAX_DIM];
        let s_mir = self.domain.sdf_grad(&r[..n], &mut g[..n]);
        let g_mir = self.plane.reflect_vector(&g[..n]);
        let f_mirror_out = T::one() - planar_fraction(s_mir, &g_mir, half);
        let fs = [f_dom, f_side, f_mirror_out];
        if fs.iter().any(|&f| f <= T::zero()) {
            return T::zero();
        }
        let partial = fs.iter().filter(|&&f| f < T::one()).count();
        if partial <= 1 {
            return (f_dom + f_side + f_mirror_out - T::lit(2.0)).max(T::zero());
        }
        const K: usize = 6;
        let total = K.pow(n as u32);
        let mut idx = [0usize; MAX_DIM];
        let mut hits = 0usize;
        for _ in 0..total {
            let (mut ld, mut ls, mut lm) = (s_dom, off, s_mir);
            for i in 0..n {
                let t = T::from_usize_lossy(2 * idx[i] + 1) / T::from_usize_lossy(K) - T::one();
                let dx = t * half[i];
                ld += g_dom[i] * dx;
                ls += self.plane.direction[i] * dx;
                lm += g_mir[i] * dx;
            }
            if ld < T::zero() && ls > T::zero() && lm > T::zero() {
                hits += 1;
            }
            for ax in 0..n {
                idx[ax] += 1;
                if idx[ax] < K {
                    break;
                }
                idx[ax] = 0;
            }
        }
        T::from_usize_lossy(hits) / T::from_usize_lossy(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn d(spec: &str) -> Domain<f64> {
        Domain::parse(spec).unwrap()
    }

    #[test]
    fn parse_builtins() {
        let b = d("ball:0,0,0:1");
        assert_eq!(b.dim(), 3);
        assert_relative_eq!(b.sdf(&[0.0, 0.0, 0.0]), -1.0);
        assert_relative_eq!(b.sdf(&[2.0, 0.0, 0.0]), 1.0);
        let u = d("union:ball:-1.2,0:1;ball:1.2,0:1");
        for x in [[0.3f64, 0.1], [-1.5, 0.2], [0.0, 0.0], [2.0, 0.9]] {
            let want = (dist(&x, &[-1.2, 0.0]) - 1.0).min(dist(&x, &[1.2, 0.0]) - 1.0);
            assert_relative_eq!(u.sdf(&x), want, max_relative = 1e-15);
        }
        assert!(u.is_smooth());
        assert!(!d("union:ball:-0.5,0:1;ball:0.5,0:1").is_smooth());
        assert!(d("union:ball:-1.2,0:1;ball:1.2,0:1").label().starts_with("union:"));
        assert!(!d("box:0,0:1,2").is_smooth());
        assert!(d("star:0,0:0.2:0.1,0.05").is_smooth());
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "ball:0,0:-1",
            "ball:0,0",
            "ellipsoid:0,0:1",
            "ellipsoid:0,0:1,0",
            "box:0,0:1,-1",
            "star:0,0:1:0.6,0.5",
            "star:0,0,0:1:0.1",
            "union:",
            "union:ball:0,0:1;ball:0,0,0:1",
            "torus:0,0:1",
            "ball:0,x:1",
        ] {
            assert!(Domain::<f64>::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn ellipse_sign_matches_implicit() {
        let e = d("ellipsoid:0,0:1,0.5");
        let mut rng = rng_from_seed(7);
        for _ in 0..1000 {
            let x: [f64; 2] = [rng.random_range(-1.5..1.5), rng.random_range(-1.0..1.0)];
            let f = x[0] * x[0] + (x[1] / 0.5).powi(2) - 1.0;
            assert_eq!(e.sdf(&x) < 0.0, f < 0.0, "{x:?}");
        }
    }

    #[test]
    fn ellipse_distance_is_exact() {
        // Brute-force distance to a dense polyline of the boundary.
        let (a, b) = (1.0, 0.5);
        let e = d("ellipsoid:0,0:1,0.5");
        let pts: Vec<[f64; 2]> = (0..200_000)
            .map(|i| {
                let t = i as f64 * std::f64::consts::TAU / 200_000.0;
                [a * t.cos(), b * t.sin()]
            })
            .collect();
        let mut rng = rng_from_seed(3);
        for _ in 0..60 {
            let x = [rng.random_range(-1.6..1.6), rng.random_range(-1.0..1.0)];
            let brute = pts.iter().map(|p| dist(p, &x)).fold(f64::INFINITY, f64::min);
            assert!((e.sdf(&x).abs() - brute).abs() < 1e-4, "{x:?}: {} vs {brute}", e.sdf(&x));
        }
        // Degenerate axis points inside.
        assert_relative_eq!(e.sdf(&[0.0, 0.0]), -0.5, max_relative = 1e-12);
        let inner = e.sdf(&[0.9, 0.0]);
        let brute = pts.iter().map(|p| dist(p, &[0.9, 0.0])).fold(f64::INFINITY, f64::min);
        assert_relative_eq!(inner, -brute, epsilon = 1e-6);
        let e3 = d("ellipsoid:0,0,0:1,0.7,0.7");
        assert_relative_eq!(e3.sdf(&[0.0, 0.0, 0.0]), -0.7, max_relative = 1e-12);
        assert_relative_eq!(e3.sdf(&[2.0, 0.0, 0.0]), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn sdf_is_lipschitz() {
        let mut rng = rng_from_seed(11);
        for spec in ["ball:0,0,0:1", "ellipsoid:0,0:1,0.5", "ellipsoid:0,0,0:1,0.7,0.5", "box:0,0:1,2", "union:ball:-1.2,0:1;ball:1.2,0:1", "star:0,0:0.2:0.1,0.05", "star:0.1,0:1:0.3,0.2,0.1"] {
            let dom = d(spec);
            let bb = dom.bbox().clone();
            for _ in 0..2000 {
                let x: Vec<f64> = (0..dom.dim()).map(|i| rng.random_range(bb.lo[i] - 0.5..bb.hi[i] + 0.5)).collect();
                let y: Vec<f64> = x.iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
                let l = (dom.sdf(&x) - dom.sdf(&y)).abs() / dist(&x, &y);
                assert!(l <= dom.lipschitz() + 1e-9, "{spec}: {l}");
            }
        }
    }

    #[test]
    fn reflection_examples() {
        let e1 = Hyperplane::new(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!(reflect(&[0.3, 0.5], &e1), vec![1.7, 0.5]);
        let diag = Hyperplane::new(&[1.0, 1.0], 0.0).unwrap();
        let r = reflect(&[1.0, 0.0], &diag);
        assert_relative_eq!(r[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(r[1], -1.0, epsilon = 1e-15);
        assert!(Hyperplane::new(&[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn reflection_isometries() {
        let mut rng = rng_from_seed(5);
        for _ in 0..500 {
            let e = random_unit::<f64, _>(&mut rng, 3);
            let plane = Hyperplane::new(&e, rng.random_range(-2.0..2.0)).unwrap();
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (xl, yl) = (plane.reflect(&x), plane.reflect(&y));
            assert!((dist(&xl, &yl) - dist(&x, &y)).abs() <= 1e-12);
            assert!((dist(&xl, &y) - dist(&x, &yl)).abs() <= 1e-12);
            let back = plane.reflect(&xl);
            assert!(dist(&back, &x) <= 1e-12);
        }
    }

    #[test]
    fn reflection_fixes_exactly_the_plane() {
        let plane = Hyperplane::new(&[0.0, 1.0], 0.25).unwrap();
        assert_eq!(plane.reflect(&[3.0, 0.25]), vec![3.0, 0.25]);
        assert_ne!(plane.reflect(&[3.0, 0.2500001]), vec![3.0, 0.2500001]);
    }

    #[test]
    fn cap_inequality() {
        // |x - y| > |x_lambda - y| for x in the cap and y in Omega_lambda.
        let dom = d("ellipsoid:0,0:1,0.5");
        let mut rng = rng_from_seed(9);
        let mut checked = 0;
        while checked < 500 {
            let e = random_unit::<f64, _>(&mut rng, 2);
            let l0 = lambda_min(&dom, &e).unwrap();
            let plane = Hyperplane::new(&e, l0 + rng.random_range(0.05..0.6)).unwrap();
            for _ in 0..2000 {
                let x = [rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5)];
                let y = [rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5)];
                if region_membership(&dom, &plane, &x) == CapZone::SigmaLambda
                    && region_membership(&dom, &plane, &y) == CapZone::OmegaLambda
                {
                    let xl = plane.reflect(&x);
                    assert!(dist(&x, &y) > dist(&xl, &y));
                    checked += 1;
                }
            }
        }
    }

    #[test]
    fn membership_examples() {
        let disk = d("ball:0,0:1");
        let p0 = Hyperplane::new(&[1.0, 0.0], 0.0).unwrap();
        assert_eq!(region_membership(&disk, &p0, &[-0.5, 0.0]), CapZone::SigmaLambda);
        assert_eq!(region_membership(&disk, &p0, &[0.5, 0.0]), CapZone::SigmaPrime);
        assert_eq!(region_membership(&disk, &p0, &[0.0, 0.3]), CapZone::OnPlane);
        assert_eq!(region_membership(&disk, &p0, &[1.5, 0.0]), CapZone::Outside);
        let p = Hyperplane::new(&[1.0, 0.0], -0.5).unwrap();
        assert_eq!(region_membership(&disk, &p, &[0.7, 0.0]), CapZone::OmegaLambda);
    }

    #[test]
    fn boundary_samples_on_ball() {
        let b = d("ball:0,0,0:1");
        let s = boundary_sample(&b, 100, 1).unwrap();
        assert_eq!(s.len(), 100);
        for p in &s {
            assert!((norm(&p.point) - 1.0).abs() <= 1e-9);
            for i in 0..3 {
                assert!((p.normal[i] - p.point[i]).abs() <= 1e-6);
            }
        }
        // Reproducible.
        assert_eq!(s, boundary_sample(&b, 100, 1).unwrap());
    }

    #[test]
    fn boundary_normals() {
        let e = d("ellipsoid:0,0:1,0.5");
        let n = e.normal(&[1.0, 0.0]);
        assert!((n[0] - 1.0).abs() < 1e-6 && n[1].abs() < 1e-6);
        for dom in [d("union:ball:-1.2,0:1;ball:1.2,0:1"), d("star:0,0:0.2:0.1,0.05"), d("box:0,0:1,2")] {
            for s in boundary_sample(&dom, 200, 4).unwrap() {
                assert!(dom.sdf(&s.point).abs() <= dom.boundary_tol());
                assert!((norm(&s.normal) - 1.0).abs() < 1e-12);
                let h = 1e-6;
                let out: Vec<f64> = s.point.iter().zip(&s.normal).map(|(p, n)| p + h * n).collect();
                assert!(dom.sdf(&out) > 0.0, "{}: {:?}", dom.label(), s.point);
            }
        }
    }

    #[test]
    fn diameters() {
        let b = diameter(&d("ball:0,0,0:1"), 400, 2).unwrap();
        assert!(b.lower >= 2.0 - 1e-1 && b.lower <= 2.0);
        assert_relative_eq!(b.bbox_diagonal, 2.0 * 3f64.sqrt(), max_relative = 1e-15);
        let small = diameter(&d("ball:0,0:0.25"), 200, 2).unwrap();
        assert!(small.upper < crate::kernels::monotonicity_threshold(4.0, 2).unwrap());
        assert_relative_eq!(small.upper, 0.5, max_relative = 1e-15);
        let u = diameter(&d("union:ball:-1.2,0:1;ball:1.2,0:1"), 400, 2).unwrap();
        assert_relative_eq!(u.upper, 4.4, max_relative = 1e-12);
        assert!(u.lower > 4.3 && u.lower <= 4.4);
    }

    #[test]
    fn lambda_min_examples() {
        assert_relative_eq!(lambda_min(&d("ball:0,0,0:1"), &[1.0, 0.0, 0.0]).unwrap(), -1.0, epsilon = 2e-6);
        assert_relative_eq!(lambda_min(&d("ball:2,0:1"), &[1.0, 0.0]).unwrap(), 1.0, epsilon = 2e-6);
        assert_relative_eq!(lambda_min(&d("ellipsoid:0,0:1,0.5"), &[0.0, 1.0]).unwrap(), -0.5, epsilon = 1e-6);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let support = (0.5f64 + 0.25 * 0.5).sqrt();
        assert_relative_eq!(lambda_min(&d("ellipsoid:0,0:1,0.5"), &[s, s]).unwrap(), -support, epsilon = 2e-6);
        assert_relative_eq!(lambda_min(&d("union:ball:-1.2,0:1;ball:1.2,0:1"), &[1.0, 0.0]).unwrap(), -2.2, epsilon = 4e-6);
        assert_relative_eq!(lambda_max(&d("union:ball:-1.2,0:1;ball:1.2,0:1"), &[1.0, 0.0]).unwrap(), 2.2, epsilon = 4e-6);
    }

    #[test]
    fn halfspace_fraction_matches_sampling() {
        let mut rng = rng_from_seed(21);
        for _ in 0..200 {
            let n = random_unit::<f64, _>(&mut rng, 3);
            let half = [rng.random_range(0.1..1.0), rng.random_range(0.1..1.0), rng.random_range(0.1..1.0)];
            let dd = rng.random_range(-1.0..1.0);
            let f = halfspace_box_fraction(&n, dd, &half);
            // Midpoint grid oracle.
            let m = 40;
            let mut hits = 0;
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        let p = [
                            half[0] * (2.0 * (i as f64 + 0.5) / m as f64 - 1.0),
                            half[1] * (2.0 * (j as f64 + 0.5) / m as f64 - 1.0),
                            half[2] * (2.0 * (k as f64 + 0.5) / m as f64 - 1.0),
                        ];
                        if dot(&n, &p) <= -dd {
                            hits += 1;
                        }
                    }
                }
            }
            let want = hits as f64 / (m * m * m) as f64;
            assert!((f - want).abs() < 0.02, "{f} vs {want}");
        }
        // Axis-aligned normal hits the closed form.
        assert_relative_eq!(halfspace_box_fraction(&[1.0, 0.0], 0.25, &[0.5, 0.5]), 0.25, max_relative = 1e-12);
    }
}
