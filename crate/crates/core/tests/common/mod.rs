//! Frozen reference values. Each was computed once by an independent script (numpy/scipy/
//! mpmath, no code shared with this crate) and is pinned here.
#![allow(dead_code)]

use std::f64::consts::{E, PI};

/// Bessel kernel `g_alpha(s)` in dimension `N` by a trapezoid rule on `delta = e^t`,
/// step 0.01 over `t in [-80, 80]`, 30-digit arithmetic. Entries are `(s, alpha, N, g)`.
pub const BESSEL_TRAPEZOID: [(f64, f64, usize, f64); 5] = [
    (1.0, 2.0, 3, 0.029_274_915_762_159_58),
    (0.5, 2.0, 3, 0.096_532_352_630_053_908),
    (2.0, 2.0, 3, 0.005_384_819_825_462_157_4),
    (0.7, 3.0, 2, 0.079_034_005_765_193_342),
    (0.3, 2.5, 2, 0.158_235_240_137_245_87),
];

/// Ellipse (1, 0.5), direction (1,1)/sqrt(2): first plane position where a reflected cap point
/// leaves the ellipse, by bisection of that predicate over 400000 boundary points.
pub const ELLIPSE_DIAGONAL_LAMBDA_BAR: f64 = -0.474_341_307_056_810_16;

/// Same quantity from the silhouette point `x + 4y = 0`: `-3/sqrt(40)`.
pub fn ellipse_diagonal_lambda_exact() -> f64 {
    -3.0 / 40f64.sqrt()
}

/// Ellipsoid (1, 0.7, 0.7), direction (1,1,0)/sqrt(2): lowest boundary point with normal
/// orthogonal to the direction (SLSQP from 40 random starts).
pub const ELLIPSOID_LAMBDA_BAR: f64 = -0.295_435_067_645_382_47;

/// Newtonian potential of that ellipsoid via the interior ellipsoidal formula
/// `pi abc ∫ (1 - Σ x_i²/(a_i²+s)) / sqrt(Π(a_i²+s)) ds`, evaluated on the probe sequence
/// `Q - d_i (e + n)`, `d_i = 0.2 · 2^-i`, i = 1..6.
pub const ELLIPSOID_QUOTIENTS: [f64; 6] = [
    0.512_981_073_673_479_8,
    0.470_935_797_397_373_9,
    0.449_913_159_259_685_6,
    0.439_401_840_190_036_4,
    0.434_146_180_656_471,
    0.431_518_350_896_810_57,
];
/// `0.9 · min` of the quotients above.
pub const ELLIPSOID_PROBE_C: f64 = 0.388_366_515_807_129_5;
/// `∇u · e` at the orthogonality point, from the same formula.
pub const ELLIPSOID_GRAD_ALONG_E: f64 = 0.428_890_521_121_212_95;

/// Star `r = 0.2 (1 + 0.1 cos θ + 0.05 cos 2θ)`, direction (1,1)/sqrt(2), log-Riesz alpha = 4:
/// lowest silhouette point and quotients by polar integration of `ρ⁴/16 - (ρ⁴/4) ln ρ`,
/// `d_i = 0.046 · 2^-i`.
pub const STAR_LAMBDA_BAR: f64 = -0.006_295_034_987_571_862_5;
pub const STAR_QUOTIENTS: [f64; 6] = [
    -0.004_035_689_896_427_485_5,
    -0.003_893_751_811_609_554,
    -0.003_819_972_551_673_268_7,
    -0.003_782_436_976_243_711,
    -0.003_763_514_805_053_904_5,
    -0.003_754_016_013_129_987_8,
];
pub const STAR_PROBE_C: f64 = 0.003_378_614_411_816_989;

/// Boundary spread `max u - min u` by polar integration about each of 721 boundary points.
pub const SPREAD_ELLIPSE_LOG: f64 = 0.523_598_775_598_298;
pub const SPREAD_ELLIPSE_RIESZ3: f64 = 0.525_705_292_588_111_4;
pub const SPREAD_UNION_LOG: f64 = 2.787_545_198_920_083_7;
pub const SPREAD_UNION_RIESZ3: f64 = 6.111_959_089_207_712;

/// Two disjoint unit disks at ±1.2: the own disk contributes 0 on its boundary and the other
/// contributes `pi log(1/r)`, so the spread is `pi ln(3.4 / 1.4)`.
pub fn spread_union_log_exact() -> f64 {
    PI * (3.4f64 / 1.4).ln()
}

/// `u(x_λ) - u(x)` for the unit disk, log kernel, λ = -0.5, x = (-0.75, 0), from
/// `u = pi (1 - |x|²) / 2` inside the disk.
pub const DISK_LOG_DIFFERENCE: f64 = PI / 4.0;

/// Same for the disk of radius 0.25, log-Riesz alpha = 4, λ = -0.1, x = (-0.15, 0), by
/// polar integration.
pub const SMALL_DISK_LOG_RIESZ_DIFFERENCE: f64 = -0.003_284_120_276_416_02;

/// Unit ball, kernel `e^-s / (4 pi s)`, boundary value `1 - 2 e^-1 sinh 1`.
pub fn bessel_ball_boundary() -> f64 {
    1.0 - 2.0 * (-1f64).exp() * 1f64.sinh()
}

pub fn newtonian_ball_boundary() -> f64 {
    4.0 * PI / 3.0
}

/// Log-Riesz maximum: at `e^(1/(N-alpha))` with value `1/((alpha-N) e)`.
pub fn log_riesz_peak(alpha: f64, n: usize) -> (f64, f64) {
    let p = alpha - n as f64;
    ((-1.0 / p).exp(), 1.0 / (p * E))
}
