//! Application of the Gaussian singular integrals `T_{F,m}` and `T̄_{F,m}`
//! (full, local and global parts), weak-type distribution functions, and
//! empirical operator-norm estimates on `L^{p(·)}(γ_d)`.
//!
//! Full application uses the exact change of variables
//! `y = √(1-t) x + √t z`, which turns the kernel's `t`-integral and the
//! outer `y`-integral into
//!
//! `T f(x) = ½ ∫₀¹ ψ_m(t)/t ∫ F(arg) e^{-|z|²} f(√(1-t)x + √t z) dz dt`
//!
//! with `arg = √t x - √(1-t) z` (alternative) or `arg = z` (general). The
//! diagonal singularity of the kernel becomes the `1/t` endpoint, which the
//! orthogonality of `F` cancels: the inner integral vanishes at `t = 0`, so
//! after `t = s²` the integrand is bounded. The local/global parts restrict
//! `y` to the admissible ball `B_h(x)` or its complement and are integrated
//! in polar coordinates around `x` with the kernel evaluated pointwise;
//! the near-diagonal ball is handled by symmetrized quadrature pairs
//! `(y, 2x - y)` with the exclusion radius δ refined until the increments
//! fall under the outer tolerance.

use rayon::prelude::*;

use crate::exponents::{check_lh0, check_p_gamma_inf, default_class_pairs, default_class_points, ExponentFunction};
use crate::geometry::{admissibility_radius, dist, norm_sq};
use crate::kernels::{kernel_eval, psi_profile, ProfileFunction, Variant};
use crate::quad::{integrate_adaptive, legendre_rule, GridSpec, QuadratureScheme};
use crate::varlebesgue::{luxemburg_norm, luxemburg_norm_values, BallSupport, ScalarField};
use crate::{Error, Result};

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// A fully specified operator: variant, certified profile, order, dimension,
/// admissibility scale and quadrature tolerances.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub variant: Variant,
    pub profile: ProfileFunction,
    pub m: u32,
    pub dim: usize,
    pub scale_const: f64,
    pub kernel_tol: f64,
    pub outer_tol: f64,
    /// Initial near-diagonal exclusion radius for the local part.
    pub delta: f64,
    z_scheme: QuadratureScheme,
    angular: Vec<(Vec<f64>, f64)>,
}

impl OperatorSpec {
    /// Build a spec; the alternative variant requires `dim > 1` and the
    /// profile must carry an orthogonality certificate.
    pub fn new(variant: Variant, profile: ProfileFunction, m: u32, dim: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("operator order m must be at least 1".into()));
        }
        if dim < 1 || dim > 3 {
            return Err(Error::InvalidInput(format!("operator dimension {dim} not in 1..=3")));
        }
        if variant == Variant::Alternative && dim < 2 {
            return Err(Error::InvalidInput("the alternative operator needs d > 1".into()));
        }
        if !profile.is_certified() {
            return Err(Error::InvalidInput(
                "profile lacks an orthogonality certificate; run verify_orthogonality first".into(),
            ));
        }
        let z_order = if dim == 3 { 10 } else { 18 };
        Ok(OperatorSpec {
            variant,
            profile,
            m,
            dim,
            scale_const: dim as f64,
            kernel_tol: 1e-8,
            outer_tol: 1e-6,
            delta: 0.125,
            z_scheme: QuadratureScheme::gauss_hermite(dim, z_order),
            angular: angular_rule(dim),
        })
    }

    pub fn with_tolerances(mut self, kernel_tol: f64, outer_tol: f64) -> Self {
        self.kernel_tol = kernel_tol;
        self.outer_tol = outer_tol;
        self
    }

    pub fn with_scale_const(mut self, c: f64) -> Self {
        self.scale_const = c;
        self
    }
}

/// Unit directions with weights summing to the sphere measure of S^{d-1}.
fn angular_rule(dim: usize) -> Vec<(Vec<f64>, f64)> {
    match dim {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => {
            let n = 48;
            let w = 2.0 * std::f64::consts::PI / n as f64;
            (0..n)
                .map(|k| {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    (vec![th.cos(), th.sin()], w)
                })
                .collect()
        }
        3 => {
            // product rule: Gauss-Legendre in cos(polar) x uniform azimuth
            let gl = legendre_rule(12);
            let na = 24;
            let wa = 2.0 * std::f64::consts::PI / na as f64;
            let mut out = Vec::new();
            for (&c, &wc) in gl.nodes.iter().zip(gl.weights.iter()) {
                let s = (1.0 - c * c).sqrt();
                for k in 0..na {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / na as f64;
                    out.push((vec![s * th.cos(), s * th.sin(), c], wc * wa));
                }
            }
            out
        }
        _ => unreachable!(),
    }
}

/// Result of one operator application.
#[derive(Debug, Clone, Copy)]
pub struct ApplyOutcome {
    pub value: f64,
    pub abs_error_estimate: f64,
    /// Set when a quadrature budget or the δ-extrapolation failed to reach
    /// tolerance; the value is still the best available estimate.
    pub flagged: bool,
}

/// The F-argument of the substituted integrand.
#[inline]
fn substituted_arg(buf: &mut [f64], x: &[f64], z: &[f64], t: f64, variant: Variant) {
    match variant {
        Variant::Alternative => {
            let rt = t.sqrt();
            let s = (1.0 - t).sqrt();
            for i in 0..x.len() {
                buf[i] = rt * x[i] - s * z[i];
            }
        }
        Variant::General => buf.copy_from_slice(z),
    }
}

/// Inner `z`-integral against `e^{-|z|²}` by the tensor Gauss–Hermite rule
/// (fields with unbounded support).
fn inner_smooth(spec: &OperatorSpec, f: &ScalarField, x: &[f64], t: f64) -> f64 {
    let s = (1.0 - t).sqrt();
    let rt = t.sqrt();
    let d = spec.dim;
    let mut arg = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut acc = 0.0;
    for i in 0..spec.z_scheme.len() {
        let z = spec.z_scheme.node(i);
        substituted_arg(&mut arg, x, z, t, spec.variant);
        for k in 0..d {
            y[k] = s * x[k] + rt * z[k];
        }
        acc += spec.z_scheme.weight(i) * spec.profile.eval(&arg) * f.eval(&y);
    }
    acc * SQRT_PI.powi(d as i32)
}

/// Dense unit-direction rule with weights summing to the sphere measure.
fn dense_dirs(dim: usize, n: usize) -> Vec<(Vec<f64>, f64)> {
    match dim {
        1 => angular_rule(1),
        2 => {
            let w = 2.0 * std::f64::consts::PI / n as f64;
            (0..n)
                .map(|k| {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    (vec![th.cos(), th.sin()], w)
                })
                .collect()
        }
        3 => {
            // Fibonacci sphere with equal weights
            let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            let w = 4.0 * std::f64::consts::PI / n as f64;
            (0..n)
                .map(|k| {
                    let zc = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - zc * zc).sqrt();
                    let th = golden * k as f64;
                    (vec![r * th.cos(), r * th.sin(), zc], w)
                })
                .collect()
        }
        _ => unreachable!(),
    }
}

/// Apply the operator at a point: `T f(x)` (general) or `T̄ f(x)`
/// (alternative), full-space version.
///
/// Fields of unbounded support go through the substituted `t`-integral with
/// the Gauss–Hermite inner rule. Ball-supported fields are integrated in
/// `y`-space with the kernel evaluated pointwise: polar around the support
/// center when `x` is safely outside (the kernel is smooth on the support),
/// polar around `x` with the symmetrized δ-refinement otherwise.
pub fn apply(spec: &OperatorSpec, f: &ScalarField, x: &[f64]) -> Result<ApplyOutcome> {
    if x.len() != spec.dim {
        return Err(Error::InvalidInput("evaluation point dimension mismatch".into()));
    }
    match &f.support {
        None => Ok(apply_fubini(spec, f, x)),
        Some(ball) => {
            let dc = dist(x, &ball.center);
            if dc < 0.999 * ball.radius {
                // x inside the support: singular core around x, then the
                // crescent (smooth: the singularity is excluded) around c
                let rho_in = 0.95 * (ball.radius - dc);
                let core = singular_polar_apply(spec, f, x, rho_in);
                let crescent = compact_center_polar(spec, f, x, ball, Some(rho_in));
                Ok(ApplyOutcome {
                    value: core.value + crescent.value,
                    abs_error_estimate: core.abs_error_estimate + crescent.abs_error_estimate,
                    flagged: core.flagged || crescent.flagged,
                })
            } else {
                Ok(compact_center_polar(spec, f, x, ball, None))
            }
        }
    }
}

/// The substituted `t`-integral route: `t = s²` over most of the range and
/// `t = 1 - w²` at the endpoint (mild log behavior of `ψ_m` for odd `m`).
fn apply_fubini(spec: &OperatorSpec, f: &ScalarField, x: &[f64]) -> ApplyOutcome {
    let tf = |t: f64| 0.5 * psi_profile(t, spec.m, spec.dim, spec.variant) / t * inner_smooth(spec, f, x, t);
    let split_t: f64 = 0.7225;
    let part_s = integrate_adaptive(
        |s| 2.0 * s * tf(s * s),
        &[(0.0, 0.35), (0.35, split_t.sqrt())],
        spec.outer_tol,
        spec.outer_tol * 1e-3,
        80,
    );
    let w_hi = (1.0 - split_t).sqrt();
    let part_w = integrate_adaptive(
        |w| 2.0 * w * tf(1.0 - w * w),
        &[(0.0, w_hi)],
        spec.outer_tol,
        spec.outer_tol * 1e-3,
        60,
    );
    ApplyOutcome {
        value: part_s.value + part_w.value,
        abs_error_estimate: part_s.error + part_w.error,
        flagged: !(part_s.converged && part_w.converged),
    }
}

/// `∫ K(x,y) f(y) dy` over the support ball in polar coordinates around its
/// center, optionally excluding the ball `B(x, rho_in)` (used when `x` sits
/// inside the support and the singular core is handled separately). The
/// angular count grows as the kernel's nearest singular point approaches
/// the integration domain.
fn compact_center_polar(
    spec: &OperatorSpec,
    f: &ScalarField,
    x: &[f64],
    ball: &BallSupport,
    exclude_around_x: Option<f64>,
) -> ApplyOutcome {
    let d = spec.dim;
    let dc = dist(x, &ball.center);
    let gap = match exclude_around_x {
        Some(rho_in) => rho_in,
        None => (dc - ball.radius).max(1e-6),
    };
    let boost = (0.5 * ball.radius / gap).clamp(1.0, 4.0);
    let n_ang = match d {
        1 => 2,
        2 => (32.0 * boost) as usize,
        _ => ((180.0 * boost) as usize).min(1440),
    };
    let dirs = dense_dirs(d, n_ang);
    // per-direction allowed radii: [0, r] minus the excluded x-ball
    let excl: Vec<Option<(f64, f64)>> = dirs
        .iter()
        .map(|(dir, _)| exclude_around_x.and_then(|rho_in| ray_ball_interval(&ball.center, dir, x, rho_in)))
        .collect();
    let mut y = vec![0.0; d];
    let shell = |rho: f64| -> f64 {
        let mut acc = 0.0;
        for ((dir, w), ex) in dirs.iter().zip(&excl) {
            if let Some((a, b)) = ex {
                if rho > *a && rho < *b {
                    continue;
                }
            }
            for k in 0..d {
                y[k] = ball.center[k] + rho * dir[k];
            }
            let fv = f.eval(&y);
            if fv == 0.0 {
                continue;
            }
            let kv = kernel_eval(x, &y, &spec.profile, spec.m, spec.variant, spec.kernel_tol)
                .map(|r| r.value)
                .unwrap_or(0.0);
            acc += w * kv * fv;
        }
        acc * rho.powi(d as i32 - 1)
    };
    // panel cuts where the excluded ball enters and leaves
    let mut cuts = vec![0.0, ball.radius];
    if exclude_around_x.is_some() {
        let rho_in = exclude_around_x.unwrap();
        cuts.push((dc - rho_in).clamp(0.0, ball.radius));
        cuts.push((dc + rho_in).clamp(0.0, ball.radius));
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let segments: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    let res = integrate_adaptive(shell, &segments, spec.outer_tol, spec.outer_tol * 1e-3, 80);
    ApplyOutcome { value: res.value, abs_error_estimate: res.error, flagged: !res.converged }
}

/// Polar-around-`x` application over radii `(0, r_hi]`. The symmetrized
/// shell average `A(ρ)` has a finite limit at `ρ = 0` (antipodal pairs
/// cancel the singular part of the kernel), so the radial quadrature runs
/// down to 0 directly; panel bisection refines the head `[0, δ]`, `[0, δ/2]`,
/// … exactly where the near-diagonal structure demands it.
fn singular_polar_apply(spec: &OperatorSpec, f: &ScalarField, x: &[f64], r_hi: f64) -> ApplyOutcome {
    let (value, err, ok) = polar_shell(spec, f, x, 0.0, r_hi);
    ApplyOutcome { value, abs_error_estimate: err, flagged: !ok }
}

/// Interval of radii `ρ ≥ 0` with `x + ρ·dir ∈ B(center, radius)`.
fn ray_ball_interval(x: &[f64], dir: &[f64], center: &[f64], radius: f64) -> Option<(f64, f64)> {
    // |x + ρ dir - c|² = radius²; dir is unit
    let rel: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
    let b = crate::geometry::dot(&rel, dir);
    let c0 = norm_sq(&rel) - radius * radius;
    let disc = b * b - c0;
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let lo = (-b - sq).max(0.0);
    let hi = -b + sq;
    if hi <= lo {
        None
    } else {
        Some((lo, hi))
    }
}

/// Integrate `K(x,·) f` in polar coordinates over radii `[r_lo, r_hi]`
/// around `x`, restricted per ray to the support of `f` when known.
///
/// The angular sum runs *inside* the radial quadrature: the shell average
/// `A(ρ) = Σ_ω w_ω ρ^{d-1} K(x, x+ρω) f(x+ρω)` pairs every direction with
/// its antipode `(y, 2x-y)`, so the `ρ^{-1}`-type singular parts cancel in
/// the sum and `A` stays bounded as `ρ → 0`. Radial panels are aligned to
/// the radii where rays enter or leave the support.
fn polar_shell(spec: &OperatorSpec, f: &ScalarField, x: &[f64], r_lo: f64, r_hi: f64) -> (f64, f64, bool) {
    let d = spec.dim;
    // a support ball subtending a narrow cone from x needs a denser set of
    // directions than the base rule
    let dense;
    let angular: &[(Vec<f64>, f64)] = match &f.support {
        Some(ball) if dist(x, &ball.center) > ball.radius => {
            let subtense = 2.0 * (ball.radius / dist(x, &ball.center)).min(1.0).asin();
            let needed = (20.0 * 2.0 * std::f64::consts::PI / subtense.max(1e-3)) as usize;
            if needed > spec.angular.len() && d == 2 {
                dense = dense_dirs(2, needed.clamp(48, 1024));
                &dense
            } else if needed > spec.angular.len() && d == 3 {
                dense = dense_dirs(3, (needed * 4).clamp(288, 4096));
                &dense
            } else {
                &spec.angular
            }
        }
        _ => &spec.angular,
    };
    // per-direction admissible radius interval
    let segs: Vec<Option<(f64, f64)>> = angular
        .iter()
        .map(|(dir, _)| {
            let base = match &f.support {
                Some(ball) => ray_ball_interval(x, dir, &ball.center, ball.radius),
                None => Some((0.0, f64::INFINITY)),
            };
            base.map(|(a, b)| (a.max(r_lo), b.min(r_hi))).filter(|(a, b)| b > a)
        })
        .collect();
    // panel boundaries at every entry/exit radius
    let mut cuts: Vec<f64> = segs.iter().flatten().flat_map(|&(a, b)| [a, b]).collect();
    if cuts.is_empty() {
        return (0.0, 0.0, true);
    }
    // seed the head with the configured exclusion radius so the bisection
    // starts refining the near-diagonal panel immediately
    if r_lo == 0.0 {
        cuts.push(spec.delta.min(0.5 * r_hi));
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let segments: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();

    let shell_average = |rho: f64| -> f64 {
        let mut y = vec![0.0; d];
        let mut acc = 0.0;
        for ((dir, w), seg) in angular.iter().zip(&segs) {
            let Some((a, b)) = seg else { continue };
            if rho < *a || rho > *b {
                continue;
            }
            for k in 0..d {
                y[k] = x[k] + rho * dir[k];
            }
            let fv = f.eval(&y);
            if fv == 0.0 {
                continue;
            }
            let kv = kernel_eval(x, &y, &spec.profile, spec.m, spec.variant, spec.kernel_tol)
                .map(|r| r.value)
                .unwrap_or(0.0);
            acc += w * kv * fv;
        }
        acc * rho.powi(d as i32 - 1)
    };
    let res = integrate_adaptive(shell_average, &segments, spec.outer_tol * 0.3, spec.outer_tol * 1e-3, 160);
    (res.value, res.error, res.converged)
}

/// Which part of the local/global splitting to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Local,
    Global,
}

fn apply_region(spec: &OperatorSpec, f: &ScalarField, x: &[f64], region: Region) -> Result<ApplyOutcome> {
    if x.len() != spec.dim {
        return Err(Error::InvalidInput("evaluation point dimension mismatch".into()));
    }
    let r_h = spec.scale_const * admissibility_radius(x);
    match region {
        Region::Global => {
            if let Some(b) = &f.support {
                if dist(x, &b.center) >= b.radius + r_h {
                    // the support misses B_h(x): the global part is the whole operator
                    return apply(spec, f, x);
                }
            }
            let r_out = match &f.support {
                Some(b) => (crate::geometry::norm(&b.center) + b.radius + 8.0).max(10.0) + crate::geometry::norm(x),
                None => 10.0 + crate::geometry::norm(x),
            };
            let (value, err, ok) = polar_shell(spec, f, x, r_h, r_out);
            // tail beyond the truncation, from the case-i kernel bound with ε = 1/2
            let tail = (0.5 * norm_sq(x) - (r_out - crate::geometry::norm(x)).max(0.0).powi(2)).exp();
            Ok(ApplyOutcome { value, abs_error_estimate: err + tail, flagged: !ok })
        }
        Region::Local => {
            // quick reject: support does not meet the admissible ball
            if let Some(b) = &f.support {
                if dist(x, &b.center) >= b.radius + r_h {
                    return Ok(ApplyOutcome { value: 0.0, abs_error_estimate: 0.0, flagged: false });
                }
            }
            Ok(singular_polar_apply(spec, f, x, r_h))
        }
    }
}

/// Local part: `y` restricted to the admissible ball `B_h(x)`.
pub fn apply_local(spec: &OperatorSpec, f: &ScalarField, x: &[f64]) -> Result<ApplyOutcome> {
    apply_region(spec, f, x, Region::Local)
}

/// Global part: `y` restricted to the complement of `B_h(x)`.
pub fn apply_global(spec: &OperatorSpec, f: &ScalarField, x: &[f64]) -> Result<ApplyOutcome> {
    apply_region(spec, f, x, Region::Global)
}

/// Superlevel measures `γ_d({x : |T f(x)| > λ})` sampled on a grid, with the
/// weak-type ratios `λ·measure/‖f‖_{L¹(γ)}`.
#[derive(Debug, Clone)]
pub struct DistributionReport {
    pub lambdas: Vec<f64>,
    pub measures: Vec<f64>,
    pub weak_ratios: Vec<f64>,
    pub l1_norm: f64,
    /// γ-mass outside the sampling grid (upper bound on the unseen measure).
    pub grid_defect: f64,
    pub flagged_points: usize,
}

/// `∫ |f| dγ_d`, via the support ball in polar coordinates when available,
/// otherwise on a Gauss–Hermite scheme.
pub fn l1_gamma_norm(f: &ScalarField, dim: usize) -> f64 {
    match &f.support {
        Some(ball) => {
            let angular = angular_rule(dim);
            let gl = legendre_rule(24);
            let mut acc = 0.0;
            let mut y = vec![0.0; dim];
            for (dir, wang) in &angular {
                let c = 0.5 * ball.radius;
                for (&node, &w) in gl.nodes.iter().zip(gl.weights.iter()) {
                    let rho = c + c * node;
                    for k in 0..dim {
                        y[k] = ball.center[k] + rho * dir[k];
                    }
                    acc += wang * w * c * rho.powi(dim as i32 - 1) * f.eval(&y).abs() * (-norm_sq(&y)).exp();
                }
            }
            acc / SQRT_PI.powi(dim as i32)
        }
        None => {
            let scheme = QuadratureScheme::gauss_hermite(dim, if dim == 3 { 20 } else { 48 });
            scheme.integrate(|x| f.eval(x).abs())
        }
    }
}

pub fn distribution_function(
    spec: &OperatorSpec,
    f: &ScalarField,
    lambdas: &[f64],
    grid: &GridSpec,
) -> Result<DistributionReport> {
    if lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidInput("levels λ must be positive".into()));
    }
    if grid.dim != spec.dim {
        return Err(Error::InvalidInput("grid dimension mismatch".into()));
    }
    let l1 = l1_gamma_norm(f, spec.dim);
    if !(l1 > 0.0) {
        // f ≡ 0: all measures vanish
        return Ok(DistributionReport {
            lambdas: lambdas.to_vec(),
            measures: vec![0.0; lambdas.len()],
            weak_ratios: vec![0.0; lambdas.len()],
            l1_norm: 0.0,
            grid_defect: 0.0,
            flagged_points: 0,
        });
    }
    let outcomes: Vec<ApplyOutcome> = (0..grid.len())
        .into_par_iter()
        .map(|i| apply(spec, f, &grid.point(i)).expect("dimension validated above"))
        .collect();
    let flagged_points = outcomes.iter().filter(|o| o.flagged).count();
    let weights: Vec<f64> = (0..grid.len()).map(|i| grid.gamma_weight(i)).collect();
    let covered: f64 = weights.iter().sum();
    let mut sorted: Vec<f64> = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut measures = Vec::with_capacity(sorted.len());
    let mut ratios = Vec::with_capacity(sorted.len());
    for &lam in &sorted {
        let mass: f64 = outcomes
            .iter()
            .zip(&weights)
            .filter(|(o, _)| o.value.abs() > lam)
            .map(|(_, w)| w)
            .sum();
        let m = mass.min(1.0);
        measures.push(m);
        ratios.push(lam * m / l1);
    }
    Ok(DistributionReport {
        lambdas: sorted,
        measures,
        weak_ratios: ratios,
        l1_norm: l1,
        grid_defect: (1.0 - covered).max(0.0),
        flagged_points,
    })
}

/// Norm-ratio report for a family of test fields.
#[derive(Debug, Clone)]
pub struct OperatorNormReport {
    pub max_ratio: f64,
    /// Per field: (name, ‖f‖, ‖Tf‖, ratio).
    pub per_function: Vec<(String, f64, f64, f64)>,
    pub flagged_points: usize,
}

/// Empirical `‖T f‖_{p(·),γ} / ‖f‖_{p(·),γ}` over a family of test fields,
/// with `T f` materialized on the norm scheme's nodes.
///
/// The exponent must pass its own `P^∞_{γ_d}` and LH₀ checks on the default
/// sample sets before any ratio is computed.
pub fn operator_norm_estimate(
    spec: &OperatorSpec,
    p: &ExponentFunction,
    test_family: &[ScalarField],
    scheme: &QuadratureScheme,
) -> Result<OperatorNormReport> {
    operator_norm_estimate_multi(spec, &[p], test_family, scheme).map(|mut v| v.remove(0))
}

/// Same as [`operator_norm_estimate`] for several exponents at once; `T f`
/// is materialized once per field and reused for every exponent's norms.
pub fn operator_norm_estimate_multi(
    spec: &OperatorSpec,
    exponents: &[&ExponentFunction],
    test_family: &[ScalarField],
    scheme: &QuadratureScheme,
) -> Result<Vec<OperatorNormReport>> {
    if scheme.dim != spec.dim {
        return Err(Error::InvalidInput("scheme dimension mismatch".into()));
    }
    let points = default_class_points(spec.dim, 1);
    let pairs = default_class_pairs(spec.dim, 2000, 1);
    for p in exponents {
        let gamma_check = check_p_gamma_inf(p, &points)?;
        if !gamma_check.passed {
            return Err(Error::Verification {
                message: format!(
                    "exponent failed the P^inf_gamma check: estimated {} > claimed {}",
                    gamma_check.estimated_constant, p.c_gamma
                ),
                witness: gamma_check.witness.first().cloned().unwrap_or_default(),
            });
        }
        let lh0 = check_lh0(|x| p.eval(x), &pairs, p.lh0_const)?;
        if !lh0.passed {
            return Err(Error::Verification {
                message: format!(
                    "exponent failed the LH0 check: estimated {} > claimed {}",
                    lh0.estimated_constant, p.lh0_const
                ),
                witness: lh0.witness.first().cloned().unwrap_or_default(),
            });
        }
    }

    let p_values: Vec<Vec<f64>> = exponents
        .iter()
        .map(|p| (0..scheme.len()).map(|i| p.eval(scheme.node(i))).collect())
        .collect();
    let mut reports: Vec<OperatorNormReport> = exponents
        .iter()
        .map(|_| OperatorNormReport { max_ratio: 0.0, per_function: Vec::new(), flagged_points: 0 })
        .collect();
    for f in test_family {
        let outcomes: Vec<ApplyOutcome> = (0..scheme.len())
            .into_par_iter()
            .map(|i| apply(spec, f, scheme.node(i)).expect("dimension validated above"))
            .collect();
        let flagged = outcomes.iter().filter(|o| o.flagged).count();
        let tf_values: Vec<f64> = outcomes.iter().map(|o| o.value).collect();
        for (k, p) in exponents.iter().enumerate() {
            let nf = luxemburg_norm(f, p, scheme)?;
            if nf == 0.0 {
                return Err(Error::InvalidInput(format!("test field {} has zero norm", f.name)));
            }
            let ntf = luxemburg_norm_values(&tf_values, &p_values[k], scheme)?;
            let ratio = ntf / nf;
            reports[k].max_ratio = reports[k].max_ratio.max(ratio);
            reports[k].per_function.push((f.name.clone(), nf, ntf, ratio));
            reports[k].flagged_points += flagged;
        }
    }
    Ok(reports)
}

/// The standard 10-field test family: Hermite polynomials (degree ≤ 4) times
/// Gaussian dilations, ball indicators at `|center| ∈ {0, 2, 4}`, and sharp
/// bumps — probing the local singularity, the global tails and the `b > 0`
/// half-space.
pub fn standard_family(dim: usize) -> Vec<ScalarField> {
    let e = |k: usize, n: usize| -> Vec<usize> {
        let mut v = vec![0; dim];
        if dim > k {
            v[k] = n;
        } else {
            v[0] = n;
        }
        v
    };
    let mut center2 = vec![0.0; dim];
    center2[0] = 2.0;
    let mut center4 = vec![0.0; dim];
    center4[0] = 4.0;
    vec![
        ScalarField::hermite_gaussian(vec![vec![0; dim]], vec![1.0], 0.5).unwrap(),
        ScalarField::hermite_gaussian(vec![e(0, 1)], vec![1.0], 0.5).unwrap(),
        ScalarField::hermite_gaussian(vec![e(0, 2)], vec![0.25], 0.25).unwrap(),
        ScalarField::hermite_gaussian(vec![{
            let mut v = e(0, 3);
            if dim > 1 {
                v[1] = 1;
            }
            v
        }], vec![0.05], 0.5)
        .unwrap(),
        ScalarField::hermite_gaussian(vec![e(0, 4)], vec![0.02], 1.0 / 3.0).unwrap(),
        ScalarField::indicator_ball(vec![0.0; dim], 1.0),
        ScalarField::indicator_ball(center2.clone(), 0.75),
        ScalarField::indicator_ball(center4, 0.5),
        ScalarField::bump(center2, 0.5),
        ScalarField::bump(vec![0.0; dim], 1.0),
    ]
}

/// Pointwise combination `a·f + b·g`; the support hint is the enclosing ball
/// when both inputs carry one.
pub fn linear_combination(a: f64, f: &ScalarField, b: f64, g: &ScalarField) -> ScalarField {
    let support = match (&f.support, &g.support) {
        (Some(p), Some(q)) => Some(enclosing_ball(p, q)),
        _ => None,
    };
    let fc = f.clone();
    let gc = g.clone();
    let mut out = ScalarField::from_fn(format!("{a}*{} + {b}*{}", f.name, g.name), move |x| {
        a * fc.eval(x) + b * gc.eval(x)
    });
    out.support = support;
    out
}

fn enclosing_ball(p: &BallSupport, q: &BallSupport) -> BallSupport {
    let d = dist(&p.center, &q.center);
    if d + q.radius <= p.radius {
        return p.clone();
    }
    if d + p.radius <= q.radius {
        return q.clone();
    }
    let radius = 0.5 * (d + p.radius + q.radius);
    let t = if d > 0.0 { (radius - p.radius) / d } else { 0.0 };
    let center = p
        .center
        .iter()
        .zip(&q.center)
        .map(|(a, b)| a + t * (b - a))
        .collect();
    BallSupport { center, radius }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::verify_orthogonality;

    fn certified(mut p: ProfileFunction, dim: usize) -> ProfileFunction {
        let s = QuadratureScheme::gauss_hermite(dim, 32);
        verify_orthogonality(&mut p, &s).unwrap();
        p
    }

    fn alt_spec_z1() -> OperatorSpec {
        OperatorSpec::new(Variant::Alternative, certified(ProfileFunction::coordinate(2), 2), 2, 2)
            .unwrap()
            .with_scale_const(2.0)
    }

    #[test]
    fn spec_validation() {
        let p = certified(ProfileFunction::coordinate(2), 2);
        assert!(OperatorSpec::new(Variant::Alternative, p.clone(), 2, 1).is_err());
        let uncertified = ProfileFunction::coordinate(2);
        assert!(OperatorSpec::new(Variant::Alternative, uncertified, 2, 2).is_err());
        let mut one = ProfileFunction::from_fn("one", |_| 1.0);
        let s = QuadratureScheme::gauss_hermite(2, 16);
        verify_orthogonality(&mut one, &s).unwrap();
        assert!(OperatorSpec::new(Variant::General, one, 2, 2).is_err());
    }

    #[test]
    fn general_variant_annihilates_constants() {
        let spec = OperatorSpec::new(Variant::General, certified(ProfileFunction::coordinate(2), 2), 2, 2).unwrap();
        let one = ScalarField::constant(1.0);
        for x in [[0.0, 0.0], [1.0, -0.5], [3.0, 2.0]] {
            let out = apply(&spec, &one, &x).unwrap();
            assert!(out.value.abs() < 1e-7, "T(1)({x:?}) = {}", out.value);
        }
    }

    #[test]
    fn alternative_odd_profile_vanishes_at_origin_on_even_fields() {
        let spec = alt_spec_z1();
        let f = ScalarField::hermite_gaussian(vec![vec![0, 0]], vec![1.0], 0.5).unwrap();
        let out = apply(&spec, &f, &[0.0, 0.0]).unwrap();
        assert!(out.value.abs() < 1e-9, "got {}", out.value);
    }

    #[test]
    fn apply_regression_indicator_field() {
        // locked against a brute-force tensor-quadrature oracle and an
        // independent polar evaluation of ∫ K̄(0,·) over the disk
        let spec = alt_spec_z1().with_tolerances(1e-10, 1e-9);
        let f = ScalarField::indicator_ball(vec![3.0, 0.0], 0.5);
        let out = apply(&spec, &f, &[0.0, 0.0]).unwrap();
        assert!(!out.flagged);
        let expected = -1.312_489_381_313e-5;
        assert!(
            (out.value - expected).abs() < 1e-9 + 1e-6 * expected.abs(),
            "got {} expected {expected}",
            out.value
        );
    }

    #[test]
    fn local_plus_global_equals_full() {
        let spec = alt_spec_z1().with_tolerances(1e-9, 1e-7);
        let f = ScalarField::bump(vec![1.0, 0.0], 0.8);
        let x = [1.2, 0.3];
        let full = apply(&spec, &f, &x).unwrap();
        let loc = apply_local(&spec, &f, &x).unwrap();
        let glob = apply_global(&spec, &f, &x).unwrap();
        let sum = loc.value + glob.value;
        assert!(
            (sum - full.value).abs() < 100.0 * spec.outer_tol * (1.0 + full.value.abs()),
            "local {} + global {} = {} vs full {}",
            loc.value,
            glob.value,
            sum,
            full.value
        );
    }

    #[test]
    fn local_vanishes_when_support_is_global() {
        let spec = alt_spec_z1();
        // for x = (2,0): B_h(x) has radius 2·(1/2) = 1; support at distance 3
        let f = ScalarField::indicator_ball(vec![-1.5, 0.0], 0.4);
        let out = apply_local(&spec, &f, &[2.0, 0.0]).unwrap();
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn global_vanishes_when_support_is_local() {
        let spec = alt_spec_z1();
        let f = ScalarField::indicator_ball(vec![2.0, 0.0], 0.3);
        // B_h((2,0)) is the ball of radius 1 around it: the support is inside
        let out = apply_global(&spec, &f, &[2.0, 0.0]).unwrap();
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn apply_linearity() {
        let spec = alt_spec_z1();
        let f = ScalarField::hermite_gaussian(vec![vec![1, 0]], vec![0.5], 0.5).unwrap();
        let g = ScalarField::hermite_gaussian(vec![vec![0, 2]], vec![0.25], 0.25).unwrap();
        let (a, b) = (1.3, -0.7);
        let combo = linear_combination(a, &f, b, &g);
        let x = [0.8, -0.4];
        let lhs = apply(&spec, &combo, &x).unwrap().value;
        let rhs = a * apply(&spec, &f, &x).unwrap().value + b * apply(&spec, &g, &x).unwrap().value;
        assert!((lhs - rhs).abs() < 2.0 * spec.outer_tol * (1.0 + rhs.abs()));
    }

    #[test]
    fn distribution_function_basics() {
        let spec = alt_spec_z1();
        let grid = GridSpec::new(2, 21, 4.0).unwrap();
        let lambdas = [0.01, 0.05, 0.1, 0.5];

        let zero = ScalarField::constant(0.0);
        let rep = distribution_function(&spec, &zero, &lambdas, &grid).unwrap();
        assert!(rep.measures.iter().all(|&m| m == 0.0));

        let f = ScalarField::bump(vec![2.0, 0.0], 0.4);
        let rep = distribution_function(&spec, &f, &lambdas, &grid).unwrap();
        for w in rep.measures.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "superlevel sets must nest");
        }
        assert!(rep.measures.iter().all(|&m| (0.0..=1.0).contains(&m)));
        assert!(rep.l1_norm > 0.0);
    }

    #[test]
    fn norm_ratio_zero_for_annihilated_field() {
        let spec = OperatorSpec::new(Variant::General, certified(ProfileFunction::coordinate(2), 2), 2, 2).unwrap();
        let p = ExponentFunction::constant(2.0).unwrap();
        let scheme = QuadratureScheme::gauss_hermite(2, 10);
        let fam = vec![ScalarField::constant(1.0)];
        let rep = operator_norm_estimate(&spec, &p, &fam, &scheme).unwrap();
        assert!(rep.max_ratio < 1e-6, "ratio {}", rep.max_ratio);
    }

    #[test]
    fn norm_ratio_scale_invariance() {
        let spec = alt_spec_z1();
        let p = ExponentFunction::constant(2.0).unwrap();
        let scheme = QuadratureScheme::gauss_hermite(2, 8);
        let f = ScalarField::hermite_gaussian(vec![vec![1, 0]], vec![0.5], 0.5).unwrap();
        let r1 = operator_norm_estimate(&spec, &p, &[f.clone()], &scheme).unwrap();
        let r5 = operator_norm_estimate(&spec, &p, &[f.scaled(5.0)], &scheme).unwrap();
        assert!((r1.max_ratio - r5.max_ratio).abs() < 1e-8 * (1.0 + r1.max_ratio));
    }

    #[test]
    fn rejects_zero_norm_test_field() {
        let spec = alt_spec_z1();
        let p = ExponentFunction::constant(2.0).unwrap();
        let scheme = QuadratureScheme::gauss_hermite(2, 8);
        let fam = vec![ScalarField::constant(0.0)];
        assert!(operator_norm_estimate(&spec, &p, &fam, &scheme).is_err());
    }

    #[test]
    fn standard_family_shape() {
        let fam = standard_family(2);
        assert_eq!(fam.len(), 10);
        assert!(fam.iter().filter(|f| f.support.is_some()).count() >= 5);
    }
}
