//! Volume integration over implicit regions with error estimates, plus an independent
//! Monte-Carlo estimator and a 1-D Gauss-Kronrod integrator used by the kernels.

use crate::geometry::{Region, MAX_DIM};
use crate::scalar::{pairwise_sum, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("integrand returned a non-finite value {value} at {point:?}")]
    NonFinite { point: Vec<f64>, value: f64 },
    #[error("no Monte-Carlo sample hit the region")]
    EmptyRegion,
    #[error("invalid quadrature config: {0}")]
    Config(String),
    #[error("dimension {0} is outside 1..={max}", max = MAX_DIM)]
    Dimension(usize),
}

pub type Result<T, E = QuadratureError> = std::result::Result<T, E>;

/// Integration controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_depth: usize,
    /// Points per axis of the tensor Gauss rule on each cell.
    pub base_rule_order: usize,
    /// Grading ratio: near a singular point cells refine until `diam <= ratio * dist`.
    pub singular_refine_ratio: T,
    pub mc_samples: usize,
    pub seed: u64,
    /// Cap on the number of cells created by one adaptive integration.
    pub max_cells: usize,
}

impl<T: Real> Default for QuadratureConfig<T> {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: T::lit(1e-6),
            abs_tol: T::lit(1e-9),
            max_depth: 24,
            base_rule_order: 3,
            singular_refine_ratio: T::lit(0.5),
            mc_samples: 2_000_000,
            seed: 0,
            max_cells: 200_000,
        }
    }
}

impl<T: Real> QuadratureConfig<T> {
    pub fn with_rel_tol(mut self, rel_tol: T) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: T) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mc_samples(mut self, n: usize) -> Self {
        self.mc_samples = n;
        self
    }

    pub fn with_max_cells(mut self, n: usize) -> Self {
        self.max_cells = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(QuadratureError::Config(m.to_string()));
        if !(self.rel_tol > T::zero()) || !(self.abs_tol > T::zero()) {
            return bad("tolerances must be positive");
        }
        let th = self.singular_refine_ratio;
        if !(th > T::zero() && th < T::one()) {
            return bad("singular_refine_ratio must lie in (0, 1)");
        }
        if self.max_depth < 4 {
            return bad("max_depth must be at least 4");
        }
        if !(1..=8).contains(&self.base_rule_order) {
            return bad("base_rule_order must lie in 1..=8");
        }
        if self.mc_samples == 0 || self.max_cells == 0 {
            return bad("mc_samples and max_cells must be positive");
        }
        Ok(())
    }

    /// Target accuracy for a given value.
    pub fn tolerance_for(&self, value: T) -> T {
        (self.rel_tol * value.abs()).max(self.abs_tol)
    }
}

/// Value with an error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralEstimate<T> {
    pub value: T,
    pub error_bound: T,
    pub cells_used: usize,
    pub converged: bool,
}

impl<T: Real> IntegralEstimate<T> {
    pub fn exact(value: T) -> Self {
        IntegralEstimate {
            value,
            error_bound: T::zero(),
            cells_used: 0,
            converged: true,
        }
    }

    /// `a * self + b * other` with bounds added.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Self {
        IntegralEstimate {
            value: a * self.value + b * other.value,
            error_bound: a.abs() * self.error_bound + b.abs() * other.error_bound,
            cells_used: self.cells_used + other.cells_used,
            converged: self.converged && other.converged,
        }
    }

    pub fn scaled(&self, a: T) -> Self {
        IntegralEstimate {
            value: a * self.value,
            error_bound: a.abs() * self.error_bound,
            ..*self
        }
    }

    /// True when `|self - truth| <= error_bound`.
    pub fn covers(&self, truth: T) -> bool {
        (self.value - truth).abs() <= self.error_bound
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

// 15-point Kronrod extension of the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Interval {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Interval {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Globally adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
pub fn integrate_1d<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> IntegralEstimate<f64> {
    let (v, e) = gk15(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Interval { a, b, value: v, err: e });
    let (mut total, mut err) = (v, e);
    let mut n = 1;
    while err > (rel_tol * total.abs()).max(abs_tol) && n < max_intervals {
        let Some(top) = heap.pop() else { break };
        let m = 0.5 * (top.a + top.b);
        if m <= top.a || m >= top.b {
            heap.push(top);
            break;
        }
        let (v1, e1) = gk15(f, top.a, m);
        let (v2, e2) = gk15(f, m, top.b);
        total += v1 + v2 - top.value;
        err += e1 + e2 - top.err;
        heap.push(Interval { a: top.a, b: m, value: v1, err: e1 });
        heap.push(Interval { a: m, b: top.b, value: v2, err: e2 });
        n += 1;
    }
    // Re-sum to shed accumulated rounding.
    let mut parts: Vec<(f64, f64, f64)> = heap.into_iter().map(|i| (i.a, i.value, i.err)).collect();
    parts.sort_by(|x, y| x.0.total_cmp(&y.0));
    let value = pairwise_sum(&parts.iter().map(|p| p.1).collect::<Vec<_>>());
    let error_bound = pairwise_sum(&parts.iter().map(|p| p.2).collect::<Vec<_>>());
    IntegralEstimate {
        value,
        error_bound,
        cells_used: n,
        converged: error_bound <= (rel_tol * value.abs()).max(abs_tol),
    }
}

const MAX_OUT: usize = 4;
const MIN_DEPTH: usize = 3;

#[derive(Clone, Copy)]
struct Cell<T> {
    center: [T; MAX_DIM],
    half: [T; MAX_DIM],
    depth: usize,
    q1: [T; MAX_OUT],
    q2: [T; MAX_OUT],
    err: [T; MAX_OUT],
    leaf: bool,
}

#[derive(Clone, Copy)]
struct Key<T> {
    priority: T,
    id: usize,
}

impl<T: Real> PartialEq for Key<T> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl<T: Real> Eq for Key<T> {}
impl<T: Real> PartialOrd for Key<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: Real> Ord for Key<T> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.priority
            .partial_cmp(&o.priority)
            .unwrap_or(Ordering::Equal)
            .then_with(|| o.id.cmp(&self.id))
    }
}

struct Integrator<'a, T: Real, R: Region<T> + ?Sized, F> {
    f: &'a F,
    region: &'a R,
    dim: usize,
    m: usize,
    nodes: Vec<T>,
    weights: Vec<T>,
    order: usize,
    singular: Option<[T; MAX_DIM]>,
    skip_radius: T,
    theta: T,
    lipschitz: T,
    /// Children rule values of every cell, `2^dim * m` per cell.
    pieces: Vec<T>,
    buf: Vec<T>,
}

impl<T, R, F> Integrator<'_, T, R, F>
where
    T: Real,
    R: Region<T> + ?Sized,
    F: Fn(&[T], &mut [T]),
{
    fn eval(&mut self, x: &[T], out: &mut [T]) -> Result<()> {
        if let Some(s) = &self.singular {
            let mut d2 = T::zero();
            for i in 0..self.dim {
                d2 += (x[i] - s[i]) * (x[i] - s[i]);
            }
            if d2.sqrt() <= self.skip_radius {
                out.iter_mut().for_each(|v| *v = T::zero());
                return Ok(());
            }
        }
        (self.f)(x, out);
        for &v in out.iter() {
            if !v.is_finite() {
                return Err(QuadratureError::NonFinite {
                    point: x.iter().map(|v| v.as_f64()).collect(),
                    value: v.as_f64(),
                });
            }
        }
        Ok(())
    }

    /// Base rule on one box: tensor Gauss inside, fraction-weighted midpoint sub-boxes
    /// where the boundary may cross, nothing outside.
    fn rule(&mut self, center: &[T], half: &[T], acc: &mut [T]) -> Result<()> {
        let dim = self.dim;
        let m = self.m;
        acc[..m].iter_mut().for_each(|v| *v = T::zero());
        let mut hd = T::zero();
        let mut vol = T::one();
        for &h in &half[..dim] {
            hd += h * h;
            vol *= h;
        }
        let reach = self.lipschitz * hd.sqrt();
        let s = self.region.sdf(&center[..dim]);
        if s >= reach {
            return Ok(());
        }
        let inside = s <= -reach;
        let n = self.order;
        let total = n.pow(dim as u32);
        let mut x = [T::zero(); MAX_DIM];
        let mut sub_half = [T::zero(); MAX_DIM];
        for i in 0..dim {
            sub_half[i] = half[i] / T::from_usize_lossy(n);
        }
        let mut out = [T::zero(); MAX_OUT];
        let mut idx = [0usize; MAX_DIM];
        for _ in 0..total {
            let w = if inside {
                let mut w = vol;
                for i in 0..dim {
                    x[i] = center[i] + half[i] * self.nodes[idx[i]];
                    w *= self.weights[idx[i]];
                }
                w
            } else {
                for i in 0..dim {
                    let k = T::from_usize_lossy(2 * idx[i] + 1) - T::from_usize_lossy(n);
                    x[i] = center[i] + k * sub_half[i];
                }
                let frac = self.region.volume_fraction(&x[..dim], &sub_half[..dim]);
                let mut w = vol * T::lit(2f64.powi(dim as i32)) / T::from_usize_lossy(total);
                w *= frac;
                w
            };
            if w > T::zero() {
                let xs = x;
                self.eval(&xs[..dim], &mut out[..m])?;
                for k in 0..m {
                    acc[k] += w * out[k];
                }
            }
            for ax in 0..dim {
                idx[ax] += 1;
                if idx[ax] < n {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Ok(())
    }

    /// Child rule values into `self.buf` and the estimate at the finer level.
    fn children(&mut self, c: &Cell<T>, q2: &mut [T]) -> Result<()> {
        let dim = self.dim;
        let m = self.m;
        let nchild = 1usize << dim;
        q2[..m].iter_mut().for_each(|v| *v = T::zero());
        self.buf.clear();
        let mut ch = [T::zero(); MAX_DIM];
        let mut hh = [T::zero(); MAX_DIM];
        for i in 0..dim {
            hh[i] = c.half[i] / T::lit(2.0);
        }
        let mut acc = [T::zero(); MAX_OUT];
        for k in 0..nchild {
            for i in 0..dim {
                ch[i] = if k & (1 << i) != 0 { c.center[i] + hh[i] } else { c.center[i] - hh[i] };
            }
            let (cc, hc) = (ch, hh);
            self.rule(&cc[..dim], &hc[..dim], &mut acc)?;
            for j in 0..m {
                q2[j] += acc[j];
                self.buf.push(acc[j]);
            }
        }
        Ok(())
    }

    fn ungraded(&self, c: &Cell<T>) -> bool {
        let Some(s) = &self.singular else { return false };
        let mut d2 = T::zero();
        let mut diam2 = T::zero();
        for i in 0..self.dim {
            let gap = ((s[i] - c.center[i]).abs() - c.half[i]).max(T::zero());
            d2 += gap * gap;
            diam2 += T::lit(4.0) * c.half[i] * c.half[i];
        }
        diam2.sqrt() > self.theta * d2.sqrt()
    }

    fn finish(&mut self, c: &mut Cell<T>) -> Result<()> {
        let mut q2 = [T::zero(); MAX_OUT];
        self.children(c, &mut q2)?;
        let ungraded = self.ungraded(c);
        for j in 0..self.m {
            c.q2[j] = q2[j];
            c.err[j] = (q2[j] - c.q1[j]).abs();
            if ungraded {
                c.err[j] += q2[j].abs();
            }
        }
        self.pieces.extend_from_slice(&self.buf);
        Ok(())
    }
}

fn priority<T: Real>(c: &Cell<T>, m: usize) -> T {
    c.err[..m].iter().fold(T::zero(), |a, &b| a + b)
}

/// Adaptive integration of a vector-valued integrand with `m <= 4` components.
///
/// Returns one estimate per component. The refinement loop stops once the summed error
/// is within `max(rel_tol |value|, abs_tol)` in the Euclidean norm of the value vector.
pub fn integrate_vec<T, R, F>(
    f: &F,
    m: usize,
    region: &R,
    cfg: &QuadratureConfig<T>,
    singular_at: Option<&[T]>,
) -> Result<Vec<IntegralEstimate<T>>>
where
    T: Real,
    R: Region<T> + ?Sized,
    F: Fn(&[T], &mut [T]),
{
    cfg.validate()?;
    let dim = region.dim();
    if dim == 0 || dim > MAX_DIM {
        return Err(QuadratureError::Dimension(dim));
    }
    if m == 0 || m > MAX_OUT {
        return Err(QuadratureError::Config(format!("output width {m} outside 1..={MAX_OUT}")));
    }
    let bbox = region.bbox();
    let scale = bbox.diagonal();
    let (xs, ws) = gauss_legendre(cfg.base_rule_order);
    let singular = singular_at.map(|s| {
        let mut a = [T::zero(); MAX_DIM];
        a[..dim].copy_from_slice(&s[..dim]);
        a
    });
    let mut it = Integrator {
        f,
        region,
        dim,
        m,
        nodes: xs.into_iter().map(T::lit).collect(),
        weights: ws.into_iter().map(T::lit).collect(),
        order: cfg.base_rule_order,
        singular,
        skip_radius: T::lit(1e-12) * scale,
        theta: cfg.singular_refine_ratio,
        lipschitz: region.lipschitz(),
        pieces: Vec::new(),
        buf: Vec::new(),
    };
    let nchild = 1usize << dim;
    let stride = nchild * m;

    // Uniform start at MIN_DEPTH.
    let mut cells: Vec<Cell<T>> = Vec::new();
    let per_axis = 1usize << MIN_DEPTH;
    let mut half = [T::zero(); MAX_DIM];
    for i in 0..dim {
        half[i] = (bbox.hi[i] - bbox.lo[i]) / T::from_usize_lossy(2 * per_axis);
    }
    let start = per_axis.pow(dim as u32);
    let mut idx = [0usize; MAX_DIM];
    for _ in 0..start {
        let mut center = [T::zero(); MAX_DIM];
        for i in 0..dim {
            center[i] = bbox.lo[i] + half[i] * T::from_usize_lossy(2 * idx[i] + 1);
        }
        let mut q1 = [T::zero(); MAX_OUT];
        it.rule(&center[..dim], &half[..dim], &mut q1)?;
        let mut c = Cell {
            center,
            half,
            depth: MIN_DEPTH,
            q1,
            q2: [T::zero(); MAX_OUT],
            err: [T::zero(); MAX_OUT],
            leaf: true,
        };
        it.finish(&mut c)?;
        cells.push(c);
        for ax in 0..dim {
            idx[ax] += 1;
            if idx[ax] < per_axis {
                break;
            }
            idx[ax] = 0;
        }
    }

    let mut heap: BinaryHeap<Key<T>> = cells
        .iter()
        .enumerate()
        .filter(|(_, c)| priority(c, m) > T::zero())
        .map(|(id, c)| Key {
            priority: priority(c, m),
            id,
        })
        .collect();
    let mut value = [T::zero(); MAX_OUT];
    let mut err = [T::zero(); MAX_OUT];
    for c in &cells {
        for j in 0..m {
            value[j] += c.q2[j];
            err[j] += c.err[j];
        }
    }
    let target = |value: &[T; MAX_OUT], err: &[T; MAX_OUT]| -> bool {
        let v = value[..m].iter().fold(T::zero(), |a, &b| a + b * b).sqrt();
        let e = err[..m].iter().fold(T::zero(), |a, &b| a + b);
        e <= cfg.tolerance_for(v)
    };

    // Cells whose priorities tie up to rounding are split together, which keeps the
    // refinement pattern symmetric when the problem is.
    let mut batch: Vec<Key<T>> = Vec::new();
    while !target(&value, &err) && cells.len() + nchild <= cfg.max_cells {
        let Some(first) = heap.pop() else { break };
        let cut = first.priority * (T::one() - T::lit(1e-9));
        batch.clear();
        batch.push(first);
        while heap.peek().is_some_and(|k| k.priority >= cut) {
            batch.extend(heap.pop());
        }
        for &top in &batch {
            let parent = cells[top.id];
            if parent.depth >= cfg.max_depth {
                continue;
            }
            cells[top.id].leaf = false;
            for j in 0..m {
                value[j] -= parent.q2[j];
                err[j] -= parent.err[j];
            }
            let base = top.id * stride;
            for k in 0..nchild {
                let mut center = parent.center;
                let mut half = parent.half;
                for i in 0..dim {
                    half[i] = parent.half[i] / T::lit(2.0);
                    center[i] = if k & (1 << i) != 0 {
                        parent.center[i] + half[i]
                    } else {
                        parent.center[i] - half[i]
                    };
                }
                let mut q1 = [T::zero(); MAX_OUT];
                q1[..m].copy_from_slice(&it.pieces[base + k * m..base + (k + 1) * m]);
                let mut c = Cell {
                    center,
                    half,
                    depth: parent.depth + 1,
                    q1,
                    q2: [T::zero(); MAX_OUT],
                    err: [T::zero(); MAX_OUT],
                    leaf: true,
                };
                it.finish(&mut c)?;
                for j in 0..m {
                    value[j] += c.q2[j];
                    err[j] += c.err[j];
                }
                let id = cells.len();
                let p = priority(&c, m);
                cells.push(c);
                if p > T::zero() {
                    heap.push(Key { priority: p, id });
                }
            }
        }
    }

    // Deterministic final reduction over leaves in creation order.
    let leaves: Vec<&Cell<T>> = cells.iter().filter(|c| c.leaf).collect();
    let mut out = Vec::with_capacity(m);
    let mut vals = Vec::with_capacity(m);
    let mut errs = Vec::with_capacity(m);
    for j in 0..m {
        vals.push(pairwise_sum(&leaves.iter().map(|c| c.q2[j]).collect::<Vec<_>>()));
        errs.push(pairwise_sum(&leaves.iter().map(|c| c.err[j]).collect::<Vec<_>>()));
    }
    let norm = vals.iter().fold(T::zero(), |a, &b| a + b * b).sqrt();
    let total_err = errs.iter().fold(T::zero(), |a, &b| a + b);
    let all_converged = total_err <= cfg.tolerance_for(norm);
    for j in 0..m {
        out.push(IntegralEstimate {
            value: vals[j],
            error_bound: errs[j],
            cells_used: cells.len(),
            converged: all_converged && errs[j] <= cfg.tolerance_for(vals[j]).max(cfg.tolerance_for(norm)),
        });
    }
    Ok(out)
}

/// Adaptive integration of `f` over `region`.
///
/// `singular_at` marks a point where `f` may be unbounded; cells near it are graded
/// until `diam <= singular_refine_ratio * dist`, and nodes within `1e-12 * diam(bbox)`
/// of it are dropped.
pub fn integrate<T, R, F>(
    f: &F,
    region: &R,
    cfg: &QuadratureConfig<T>,
    singular_at: Option<&[T]>,
) -> Result<IntegralEstimate<T>>
where
    T: Real,
    R: Region<T> + ?Sized,
    F: Fn(&[T]) -> T,
{
    let g = |x: &[T], out: &mut [T]| out[0] = f(x);
    Ok(integrate_vec(&g, 1, region, cfg, singular_at)?[0])
}

/// Uniform Monte-Carlo over the bounding box; `error_bound` is three standard errors.
///
/// Samples are split into fixed chunks with independent streams so the result does not
/// depend on the thread count.
pub fn mc_integrate<T, R, F>(
    f: &F,
    region: &R,
    cfg: &QuadratureConfig<T>,
    singular_at: Option<&[T]>,
) -> Result<IntegralEstimate<T>>
where
    T: Real,
    R: Region<T> + ?Sized,
    F: Fn(&[T]) -> T + Sync,
{
    cfg.validate()?;
    let dim = region.dim();
    if dim == 0 || dim > MAX_DIM {
        return Err(QuadratureError::Dimension(dim));
    }
    let bbox = region.bbox();
    if bbox.lo.iter().zip(&bbox.hi).any(|(a, b)| !(a < b)) {
        return Err(QuadratureError::EmptyRegion);
    }
    let vol = bbox.volume().as_f64();
    let skip = 1e-12 * bbox.diagonal().as_f64();
    const CHUNK: usize = 1 << 14;
    let n = cfg.mc_samples;
    let chunks = n.div_ceil(CHUNK);
    let lo: Vec<f64> = bbox.lo.iter().map(|v| v.as_f64()).collect();
    let hi: Vec<f64> = bbox.hi.iter().map(|v| v.as_f64()).collect();
    let partial: Vec<Result<(f64, f64, usize)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(c as u64 + 1);
            let count = CHUNK.min(n - c * CHUNK);
            let (mut s1, mut s2, mut hits) = (0.0f64, 0.0f64, 0usize);
            let mut x = [T::zero(); MAX_DIM];
            for _ in 0..count {
                for i in 0..dim {
                    x[i] = T::lit(rng.random_range(lo[i]..hi[i]));
                }
                if !region.contains(&x[..dim]) {
                    continue;
                }
                hits += 1;
                if let Some(s) = singular_at {
                    let d: f64 = (0..dim).map(|i| (x[i] - s[i]).as_f64().powi(2)).sum::<f64>().sqrt();
                    if d <= skip {
                        continue;
                    }
                }
                let v = f(&x[..dim]).as_f64();
                if !v.is_finite() {
                    return Err(QuadratureError::NonFinite {
                        point: x[..dim].iter().map(|v| v.as_f64()).collect(),
                        value: v,
                    });
                }
                s1 += v;
                s2 += v * v;
            }
            Ok((s1, s2, hits))
        })
        .collect();
    let mut sums = Vec::with_capacity(chunks);
    let mut sq = Vec::with_capacity(chunks);
    let mut hits = 0;
    for p in partial {
        let (a, b, h) = p?;
        sums.push(a);
        sq.push(b);
        hits += h;
    }
    if hits == 0 {
        return Err(QuadratureError::EmptyRegion);
    }
    let nf = n as f64;
    let mean = pairwise_sum(&sums) / nf;
    let var = (pairwise_sum(&sq) / nf - mean * mean).max(0.0) * nf / (nf - 1.0).max(1.0);
    let se = vol * (var / nf).sqrt();
    Ok(IntegralEstimate {
        value: T::lit(vol * mean),
        error_bound: T::lit(3.0 * se),
        cells_used: n,
        converged: true,
    })
}
