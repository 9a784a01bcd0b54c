//! Profile functions `F`, the radial profiles `φ_m`/`ψ_m`, the Gaussian
//! singular-integral kernels, their global-region bounds, the convolution
//! comparison kernel, the majorant `P(x,y)` and the `Θ(t)` growth criterion.
//!
//! Both kernel variants share the structure
//!
//! `K(x,y) = ½ ∫₀¹ ψ_m(t) F(arg(t)) e^{-u(t)} / t^{d/2+1} dt`,
//!
//! with `u(t) = |y - √(1-t) x|²/t`. The general variant takes
//! `arg = (y - √(1-t) x)/√t` and radial power `r^{m-1}`; the alternative
//! takes `arg = (x - √(1-t) y)/√t` and `r^{d-1}`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{classify_pair, dist, norm_sq, u_profile, GlobalQuantities, PairClass};
use crate::quad::{hermite_poly, hermite_poly_deriv, integrate_adaptive, QuadratureScheme, SchemeKind};
use crate::{Error, Result};

/// Orthogonality residual tolerance below which a profile may drive an
/// operator.
pub const ORTHOGONALITY_TOL: f64 = 1e-8;

/// Which of the two kernel families is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    General,
    Alternative,
}

type Oracle = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradOracle = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A `C¹` profile with gradient oracle and verified certificates.
#[derive(Clone)]
pub struct ProfileFunction {
    eval: Oracle,
    grad: GradOracle,
    pub name: String,
    /// `∫ F dγ_d`, filled by [`verify_orthogonality`].
    pub orthogonality_residual: Option<f64>,
    /// Sampled suprema of `|F(z)| e^{-ε|z|²}` per tested ε.
    pub growth_report: Vec<(f64, f64)>,
    /// Sampled suprema of `|∇F(z)| e^{-ε|z|²}` per tested ε.
    pub growth_report_grad: Vec<(f64, f64)>,
}

impl std::fmt::Debug for ProfileFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProfileFunction")
            .field("name", &self.name)
            .field("orthogonality_residual", &self.orthogonality_residual)
            .finish()
    }
}

impl ProfileFunction {
    pub fn eval(&self, z: &[f64]) -> f64 {
        (self.eval)(z)
    }

    pub fn grad(&self, z: &[f64]) -> Vec<f64> {
        (self.grad)(z)
    }

    /// Combination of physicists' Hermite products
    /// `F(z) = Σ_k c_k Π_i H_{α_k,i}(z_i)`; gradients are analytic via
    /// `H_n' = 2n H_{n-1}`. Mean-zero whenever no multi-index is all-zero.
    pub fn hermite(indices: Vec<Vec<usize>>, coeffs: Vec<f64>) -> Result<Self> {
        if indices.len() != coeffs.len() || indices.is_empty() {
            return Err(Error::InvalidInput("hermite profile needs matching indices/coeffs".into()));
        }
        let dim = indices[0].len();
        if indices.iter().any(|a| a.len() != dim) {
            return Err(Error::InvalidInput("hermite multi-indices must share one dimension".into()));
        }
        let name = format!("hermite{indices:?}·{coeffs:?}");
        let idx_e = indices.clone();
        let cf_e = coeffs.clone();
        let eval = move |z: &[f64]| {
            let mut acc = 0.0;
            for (alpha, c) in idx_e.iter().zip(&cf_e) {
                let mut term = *c;
                for (i, &n) in alpha.iter().enumerate() {
                    term *= hermite_poly(n, z[i]);
                }
                acc += term;
            }
            acc
        };
        let grad = move |z: &[f64]| {
            let mut g = vec![0.0; z.len()];
            for (alpha, c) in indices.iter().zip(&coeffs) {
                for (j, gj) in g.iter_mut().enumerate() {
                    let mut term = *c;
                    for (i, &n) in alpha.iter().enumerate() {
                        term *= if i == j {
                            hermite_poly_deriv(n, z[i])
                        } else {
                            hermite_poly(n, z[i])
                        };
                    }
                    *gj += term;
                }
            }
            g
        };
        Ok(ProfileFunction {
            eval: Arc::new(eval),
            grad: Arc::new(grad),
            name,
            orthogonality_residual: None,
            growth_report: Vec::new(),
            growth_report_grad: Vec::new(),
        })
    }

    /// Profile from a plain closure; the gradient falls back to central
    /// differences when not supplied.
    pub fn from_fn(name: impl Into<String>, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        let eval: Oracle = Arc::new(eval);
        let inner = eval.clone();
        let grad = move |z: &[f64]| {
            let h = 1e-5;
            let mut g = Vec::with_capacity(z.len());
            let mut zp = z.to_vec();
            for i in 0..z.len() {
                zp[i] = z[i] + h;
                let up = inner(&zp);
                zp[i] = z[i] - h;
                let dn = inner(&zp);
                zp[i] = z[i];
                g.push((up - dn) / (2.0 * h));
            }
            g
        };
        ProfileFunction {
            eval,
            grad: Arc::new(grad),
            name: name.into(),
            orthogonality_residual: None,
            growth_report: Vec::new(),
            growth_report_grad: Vec::new(),
        }
    }

    /// `F(z) = z₁`.
    pub fn coordinate(dim: usize) -> Self {
        let mut idx = vec![0; dim];
        idx[0] = 1;
        let mut p = Self::hermite(vec![idx], vec![0.5]).unwrap();
        p.name = "z1".into();
        p
    }

    /// `F(z) = z₁² - 1/2` (the degree-2 mean-zero radial piece).
    pub fn coordinate_square(dim: usize) -> Self {
        let mut idx = vec![0; dim];
        idx[0] = 2;
        let mut p = Self::hermite(vec![idx], vec![0.25]).unwrap();
        p.name = "z1^2-1/2".into();
        p
    }

    /// `F(z) = z₁ z₂` (requires `dim ≥ 2`).
    pub fn coordinate_product(dim: usize) -> Self {
        assert!(dim >= 2);
        let mut idx = vec![0; dim];
        idx[0] = 1;
        idx[1] = 1;
        let mut p = Self::hermite(vec![idx], vec![0.25]).unwrap();
        p.name = "z1*z2".into();
        p
    }

    /// `F(z) = z₁² z₂² - 1/4`, the Θ-criterion example (requires `dim ≥ 2`).
    pub fn square_product(dim: usize) -> Self {
        assert!(dim >= 2);
        let mk = |a: usize, b: usize| {
            let mut idx = vec![0; dim];
            idx[0] = a;
            idx[1] = b;
            idx
        };
        let mut p = Self::hermite(
            vec![mk(2, 2), mk(2, 0), mk(0, 2)],
            vec![1.0 / 16.0, 1.0 / 8.0, 1.0 / 8.0],
        )
        .unwrap();
        p.name = "z1^2*z2^2-1/4".into();
        p
    }

    /// Sampled growth certificates `sup |F| e^{-ε|z|²}` (and the gradient
    /// analogue) over a seeded sample cloud reaching `|z| = 12`.
    pub fn verify_growth(&mut self, eps_list: &[f64], dim: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples: Vec<Vec<f64>> = Vec::with_capacity(2000);
        for i in 0..2000 {
            let r = 12.0 * (i as f64 + 1.0) / 2000.0;
            let dir: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0f64)).collect();
            let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
            samples.push(dir.into_iter().map(|v| r * v / n).collect());
        }
        self.growth_report = eps_list
            .iter()
            .map(|&eps| {
                let sup = samples
                    .iter()
                    .map(|z| self.eval(z).abs() * (-eps * norm_sq(z)).exp())
                    .fold(0.0f64, f64::max);
                (eps, sup)
            })
            .collect();
        self.growth_report_grad = eps_list
            .iter()
            .map(|&eps| {
                let sup = samples
                    .iter()
                    .map(|z| {
                        let g = self.grad(z);
                        g.iter().map(|v| v * v).sum::<f64>().sqrt() * (-eps * norm_sq(z)).exp()
                    })
                    .fold(0.0f64, f64::max);
                (eps, sup)
            })
            .collect();
    }

    /// Whether the profile is certified mean-zero for operator use.
    pub fn is_certified(&self) -> bool {
        matches!(self.orthogonality_residual, Some(r) if r.abs() <= ORTHOGONALITY_TOL)
    }
}

/// Quadrature of `∫ F dγ_d` on a Gauss–Hermite scheme; stores and returns
/// the residual.
pub fn verify_orthogonality(profile: &mut ProfileFunction, scheme: &QuadratureScheme) -> Result<f64> {
    if scheme.kind != SchemeKind::GaussHermiteTensor {
        return Err(Error::InvalidInput("orthogonality check needs a Gauss-Hermite scheme".into()));
    }
    let residual = scheme.integrate(|z| profile.eval(z));
    profile.orthogonality_residual = Some(residual);
    Ok(residual)
}

/// Radial profile `φ_m(r) = ((-log r)/(1-r²))^{(m-2)/2} · r^q` with
/// `q = d-1` (alternative) or `q = m-1` (general), on `0 < r < 1`.
pub fn profile_phi(r: f64, m: u32, dim: usize, variant: Variant) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidInput(format!("profile_phi needs 0 < r < 1, got {r}")));
    }
    let q = match variant {
        Variant::Alternative => dim as i32 - 1,
        Variant::General => m as i32 - 1,
    };
    let ratio = if 1.0 - r < 1e-8 {
        // -log r / (1-r²) → 1/2 as r → 1
        0.5
    } else {
        -r.ln() / (1.0 - r * r)
    };
    Ok(ratio.powf((m as f64 - 2.0) / 2.0) * r.powi(q))
}

/// `ψ_m(t) = φ_m(√(1-t))/√(1-t)`; in closed form
/// `((-log(1-t))/(2t))^{(m-2)/2} (1-t)^{(q-1)/2}`.
pub fn psi_profile(t: f64, m: u32, dim: usize, variant: Variant) -> f64 {
    let q = match variant {
        Variant::Alternative => dim as f64 - 1.0,
        Variant::General => m as f64 - 1.0,
    };
    let lam = if t < 1e-9 {
        0.5 * (1.0 + 0.5 * t)
    } else {
        -(-t).ln_1p() / (2.0 * t)
    };
    lam.powf((m as f64 - 2.0) / 2.0) * (1.0 - t).powf((q - 1.0) / 2.0)
}

/// The F-argument of the kernel integrand at parameter `t`, written into `buf`.
#[inline]
fn kernel_arg(buf: &mut [f64], x: &[f64], y: &[f64], t: f64, variant: Variant) {
    let s = (1.0 - t).sqrt();
    let rt = t.sqrt();
    match variant {
        Variant::Alternative => {
            for i in 0..x.len() {
                buf[i] = (x[i] - s * y[i]) / rt;
            }
        }
        Variant::General => {
            for i in 0..x.len() {
                buf[i] = (y[i] - s * x[i]) / rt;
            }
        }
    }
}

#[inline]
fn kernel_integrand(x: &[f64], y: &[f64], t: f64, profile: &ProfileFunction, m: u32, variant: Variant, buf: &mut [f64]) -> f64 {
    let d = x.len();
    kernel_arg(buf, x, y, t, variant);
    let u = u_profile(x, y, t);
    // e^{-u}/t^{d/2+1} in one exponential so tiny t cannot overflow
    let w = (-u - (d as f64 / 2.0 + 1.0) * t.ln()).exp();
    0.5 * psi_profile(t, m, d, variant) * profile.eval(buf) * w
}

/// Kernel value with an error estimate, subdivision count and (optionally)
/// the global-bound comparison filled in by [`kernel_bound_check`].
#[derive(Debug, Clone, Copy)]
pub struct KernelEvalReport {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub t_subdivisions: usize,
    /// False when the subdivision budget ran out before reaching tolerance.
    pub converged: bool,
    pub bound_b_le_0: Option<f64>,
    pub bound_b_gt_0: Option<f64>,
    pub ratio_to_bound: Option<f64>,
}

/// Evaluate `K_{F,m}(x,y)` (general) or `K̄_{F,m}(x,y)` (alternative) by
/// adaptive quadrature over `t ∈ (0,1)`.
///
/// The substitution `t = s²` removes the `t^{-1/2}`-type behavior near 0
/// (with panels pre-split at `s ≈ |x-y|` where the off-diagonal integrand
/// peaks) and `t = 1 - w²` gives the endpoint at 1 a square-root rule,
/// which keeps the `m = 1` profile's log endpoint harmless.
pub fn kernel_eval(
    x: &[f64],
    y: &[f64],
    profile: &ProfileFunction,
    m: u32,
    variant: Variant,
    tol: f64,
) -> Result<KernelEvalReport> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InvalidInput("kernel_eval needs points of equal dimension".into()));
    }
    if m == 0 {
        return Err(Error::InvalidInput("kernel order m must be at least 1".into()));
    }
    let r = dist(x, y);
    if r == 0.0 {
        return Err(Error::InvalidInput("kernel_eval excludes the diagonal x = y".into()));
    }
    let mut buf = vec![0.0; x.len()];

    // t = s² on (0, 1/4)
    let mut s_segments = vec![(0.0, 0.5)];
    if r < 0.4 {
        s_segments = vec![(0.0, 0.25 * r), (0.25 * r, r), (r, (4.0 * r).min(0.5))];
        if 4.0 * r < 0.5 {
            s_segments.push((4.0 * r, 0.5));
        }
    }
    let part_s = integrate_adaptive(
        |s| 2.0 * s * kernel_integrand(x, y, s * s, profile, m, variant, &mut buf),
        &s_segments,
        tol / 3.0,
        tol / 3.0 * 1e-3,
        400,
    );
    // plain t on (1/4, 3/4)
    let part_t = integrate_adaptive(
        |t| kernel_integrand(x, y, t, profile, m, variant, &mut buf),
        &[(0.25, 0.75)],
        tol / 3.0,
        tol / 3.0 * 1e-3,
        200,
    );
    // t = 1 - w² on (3/4, 1)
    let part_w = integrate_adaptive(
        |w| 2.0 * w * kernel_integrand(x, y, 1.0 - w * w, profile, m, variant, &mut buf),
        &[(0.0, 0.5)],
        tol / 3.0,
        tol / 3.0 * 1e-3,
        200,
    );

    let value = part_s.value + part_t.value + part_w.value;
    let error = part_s.error + part_t.error + part_w.error;
    Ok(KernelEvalReport {
        value,
        abs_error_estimate: error,
        t_subdivisions: part_s.panels + part_t.panels + part_w.panels,
        converged: part_s.converged && part_t.converged && part_w.converged
            && error <= tol * (1.0 + value.abs()),
        bound_b_le_0: None,
        bound_b_gt_0: None,
        ratio_to_bound: None,
    })
}

/// Compare `|K̄_{F,m}(x,y)|` in the global region against the Lemma bounds
/// with `C_ε = 1`:
/// case `b ≤ 0`: `e^{-|y|² + ε|x|²}` for `0 < ε < 1`;
/// case `b > 0`: `e^{ε(|x|²-|y|²)} e^{-(1-ε)u(t₀)} / t₀^{d/2}` for
/// `0 < ε < 1/d`. The max ratio over a sample set is the empirical `C_ε`.
pub fn kernel_bound_check(
    x: &[f64],
    y: &[f64],
    profile: &ProfileFunction,
    m: u32,
    variant: Variant,
    eps: f64,
    scale_const: f64,
) -> Result<KernelEvalReport> {
    let d = x.len();
    if classify_pair(x, y, scale_const) != PairClass::Global {
        return Err(Error::InvalidInput("kernel bounds hold in the global region only".into()));
    }
    let g = GlobalQuantities::new(x, y)?;
    if g.b <= 0.0 {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidInput(format!("case b ≤ 0 needs 0 < ε < 1, got {eps}")));
        }
    } else if !(eps > 0.0 && eps < 1.0 / d as f64) {
        return Err(Error::InvalidInput(format!("case b > 0 needs 0 < ε < 1/d, got {eps}")));
    }
    let mut report = kernel_eval(x, y, profile, m, variant, 1e-9)?;
    if g.b <= 0.0 {
        let bound = (-norm_sq(y) + eps * norm_sq(x)).exp();
        report.bound_b_le_0 = Some(bound);
        report.ratio_to_bound = Some(report.value.abs() / bound);
    } else {
        let u_t0 = u_profile(x, y, g.t0);
        let bound = (eps * (norm_sq(x) - norm_sq(y)) - (1.0 - eps) * u_t0).exp() / g.t0.powf(d as f64 / 2.0);
        report.bound_b_gt_0 = Some(bound);
        report.ratio_to_bound = Some(report.value.abs() / bound);
    }
    Ok(report)
}

/// `α_∞ = (1-ε)/2 - |1/p_∞ - ε - (1-ε)/2|`, positive when `ε < 1/p_∞`.
pub fn alpha_inf(eps: f64, p_inf: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0 / p_inf) {
        return Err(Error::InvalidInput(format!(
            "majorant exponent needs 0 < ε < 1/p_∞ = {}, got {eps}",
            1.0 / p_inf
        )));
    }
    let half = (1.0 - eps) / 2.0;
    let a = half - (1.0 / p_inf - eps - half).abs();
    if a <= 0.0 {
        return Err(Error::Numerical(format!("α_∞ = {a} not positive for ε = {eps}, p_∞ = {p_inf}")));
    }
    Ok(a)
}

/// Majorant `P(x,y) = |x+y|^d e^{-α_∞ |x+y||x-y|}`.
pub fn majorant_p(x: &[f64], y: &[f64], alpha: f64) -> f64 {
    let d = x.len();
    let sum: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    let ns = crate::geometry::norm(&sum);
    let nd = dist(x, y);
    ns.powi(d as i32) * (-alpha * ns * nd).exp()
}

/// Convolution comparison kernel
/// `K(x) = ∫₀^∞ F(-x/√t) e^{-|x|²/t} dt / t^{d/2+1}`, computed through the
/// substitutions `s = |x|²/t`, `s = σ²`:
/// `K(x) = 2|x|^{-d} ∫₀^∞ F(-σ x/|x|) σ^{d-1} e^{-σ²} dσ`.
pub fn cz_kernel(x: &[f64], profile: &ProfileFunction, tol: f64) -> Result<f64> {
    let d = x.len();
    let nx = crate::geometry::norm(x);
    if nx == 0.0 {
        return Err(Error::InvalidInput("the comparison kernel is non-integrable at x = 0".into()));
    }
    let theta: Vec<f64> = x.iter().map(|v| v / nx).collect();
    let mut buf = vec![0.0; d];
    let res = integrate_adaptive(
        |sigma| {
            for i in 0..d {
                buf[i] = -sigma * theta[i];
            }
            profile.eval(&buf) * sigma.powi(d as i32 - 1) * (-sigma * sigma).exp()
        },
        &[(0.0, 3.0), (3.0, 9.0)],
        tol,
        tol * 1e-3,
        300,
    );
    if !res.converged {
        return Err(Error::Numerical("comparison-kernel quadrature did not converge".into()));
    }
    Ok(2.0 * res.value / nx.powi(d as i32))
}

/// Seeded sample of point pairs from the closed global region
/// `|x - y| ≥ C_d·m(x)`, filtered by the sign of `b = 2⟨x,y⟩`. Radii follow
/// folded normals at a few scales so both the `u₀ ≈ 0` collinear wells and
/// the far tails are exercised.
pub fn sample_global_pairs(
    dim: usize,
    count: usize,
    scale_const: f64,
    positive_b: bool,
    seed: u64,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move |rng: &mut ChaCha8Rng| {
        let u1: f64 = rng.random_range(1e-12..1.0);
        let u2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        (-2.0 * u1.ln()).sqrt() * u2.cos()
    };
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let sigma = [0.8, 1.5, 2.5][out.len() % 3];
        let x: Vec<f64> = (0..dim).map(|_| sigma * normal(&mut rng)).collect();
        let y: Vec<f64> = if out.len() % 5 == 0 {
            // near-collinear with x to probe the u(t₀) ≈ 0 well
            let lam: f64 = rng.random_range(0.1..2.0);
            x.iter()
                .map(|v| lam * v + 0.05 * normal(&mut rng))
                .collect()
        } else {
            (0..dim).map(|_| sigma * normal(&mut rng)).collect()
        };
        let b = 2.0 * crate::geometry::dot(&x, &y);
        if positive_b != (b > 0.0) {
            continue;
        }
        if classify_pair(&x, &y, scale_const) != PairClass::Global {
            continue;
        }
        if crate::geometry::norm_sq(&x) + crate::geometry::norm_sq(&y) == 0.0 {
            continue;
        }
        out.push((x, y));
    }
    out
}

/// One point of the Θ profile; `diverged` marks an infimum that fell below
/// the floor (`F` unbounded below on `Ω_t`).
#[derive(Debug, Clone, Copy)]
pub struct ThetaPoint {
    pub t: f64,
    pub value: f64,
    pub diverged: bool,
}

/// Floor below which a descent is declared divergent.
pub const THETA_FLOOR: f64 = -1e12;

/// `Θ(t) = inf_{Ω_t} F(z) / t²` over `Ω_t = {z : min_i |z_i| ≥ t}`,
/// estimated by projected gradient descent started from every orthant
/// corner plus seeded random interior points.
pub fn theta_profile(profile: &ProfileFunction, dim: usize, t_values: &[f64], seed: u64) -> Result<Vec<ThetaPoint>> {
    if t_values.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidInput("Θ needs positive t values".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let mut best = f64::INFINITY;
        let mut diverged = false;
        for pattern in 0..(1usize << dim) {
            let sign: Vec<f64> = (0..dim)
                .map(|i| if pattern >> i & 1 == 0 { 1.0 } else { -1.0 })
                .collect();
            let corner: Vec<f64> = sign.iter().map(|s| s * t).collect();
            let mut starts = vec![corner];
            for _ in 0..4 {
                starts.push(
                    sign.iter()
                        .map(|s| s * (t + rng.random_range(0.0..2.0 * t + 2.0)))
                        .collect(),
                );
            }
            for start in starts {
                let (v, fell) = descend(profile, &sign, t, start);
                if fell {
                    diverged = true;
                } else {
                    best = best.min(v);
                }
            }
            if diverged {
                break;
            }
        }
        out.push(if diverged {
            ThetaPoint { t, value: f64::NEG_INFINITY, diverged: true }
        } else {
            ThetaPoint { t, value: best / (t * t), diverged: false }
        });
    }
    Ok(out)
}

/// Projected gradient descent of `F` over one orthant branch
/// `{z : sign_i · z_i ≥ t}`; returns the best value and whether it fell
/// through the floor.
fn descend(profile: &ProfileFunction, sign: &[f64], t: f64, mut z: Vec<f64>) -> (f64, bool) {
    let project = |z: &mut Vec<f64>| {
        for (zi, s) in z.iter_mut().zip(sign) {
            if *zi * s < t {
                *zi = s * t;
            }
        }
    };
    project(&mut z);
    let mut fz = profile.eval(&z);
    let mut stall = 0;
    for _ in 0..600 {
        if fz < THETA_FLOOR {
            return (fz, true);
        }
        let g = profile.grad(&z);
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn < 1e-14 {
            break;
        }
        let mut step = (1.0 + z.iter().map(|v| v * v).sum::<f64>().sqrt()) / gn;
        let mut accepted = false;
        for _ in 0..40 {
            let mut cand: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - step * gi).collect();
            project(&mut cand);
            let fc = profile.eval(&cand);
            if fc < fz - 1e-15 * (1.0 + fz.abs()) {
                z = cand;
                fz = fc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            stall += 1;
            if stall > 2 {
                break;
            }
        } else {
            stall = 0;
        }
    }
    (fz, fz < THETA_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::QuadratureScheme;

    fn gh2() -> QuadratureScheme {
        QuadratureScheme::gauss_hermite(2, 32)
    }

    #[test]
    fn orthogonality_examples() {
        let s = gh2();
        let mut z1 = ProfileFunction::coordinate(2);
        assert!(verify_orthogonality(&mut z1, &s).unwrap().abs() < 1e-14);

        // z₁² - 1/2 integrates to zero: the second Gaussian moment is 1/2
        let mut h2 = ProfileFunction::coordinate_square(2);
        assert!(verify_orthogonality(&mut h2, &s).unwrap().abs() < 1e-13);

        let mut one = ProfileFunction::from_fn("one", |_| 1.0);
        let r = verify_orthogonality(&mut one, &s).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!(!one.is_certified());
    }

    #[test]
    fn phi_profile_shapes() {
        // m = 2 kills the log factor: φ = r^{d-1} for the alternative kernel
        for r in [0.1, 0.5, 0.9] {
            let v = profile_phi(r, 2, 3, Variant::Alternative).unwrap();
            assert!((v - r * r).abs() < 1e-14);
        }
        // ψ₂(t) = (1-t)^{(d-2)/2}: for d = 3 this is √(1-t)
        for t in [0.2, 0.6, 0.95] {
            assert!((psi_profile(t, 2, 3, Variant::Alternative) - (1.0 - t).sqrt()).abs() < 1e-12);
        }
        // m = 1, d = 2: φ(r) → 0 as r → 0 (r · (-log r)^{-1/2} → 0)
        let v = profile_phi(1e-10, 1, 2, Variant::Alternative).unwrap();
        assert!(v.abs() < 1e-5);
        assert!(profile_phi(0.0, 1, 2, Variant::Alternative).is_err());
        assert!(profile_phi(1.0, 1, 2, Variant::Alternative).is_err());
    }

    #[test]
    fn kernel_regression_closed_form() {
        // x=(1,0), y=(0,1), F=z₁, m=2, d=2, alternative:
        // K̄ = (e/2)·2^{-3/2}·Γ(3/2,2) = 0.11134649486752717
        let z1 = ProfileFunction::coordinate(2);
        let rep = kernel_eval(&[1.0, 0.0], &[0.0, 1.0], &z1, 2, Variant::Alternative, 1e-11).unwrap();
        assert!(rep.converged);
        assert!((rep.value - 0.111_346_494_867_527_17).abs() < 1e-11, "got {}", rep.value);
    }

    #[test]
    fn kernel_oddness_at_origin() {
        let z1 = ProfileFunction::coordinate(2);
        let y = [1.3, -0.4];
        let neg_y = [-1.3, 0.4];
        let a = kernel_eval(&[0.0, 0.0], &y, &z1, 2, Variant::Alternative, 1e-11).unwrap();
        let b = kernel_eval(&[0.0, 0.0], &neg_y, &z1, 2, Variant::Alternative, 1e-11).unwrap();
        assert!((a.value + b.value).abs() < 1e-10);
    }

    #[test]
    fn kernel_tolerance_self_consistency() {
        let z1 = ProfileFunction::coordinate(2);
        let x = [1.0, 0.0];
        let y = [2.0, 0.5];
        let loose = kernel_eval(&x, &y, &z1, 2, Variant::Alternative, 1e-6).unwrap();
        let tight = kernel_eval(&x, &y, &z1, 2, Variant::Alternative, 1e-9).unwrap();
        assert!((loose.value - tight.value).abs() < 2e-6 * (1.0 + tight.value.abs()));
    }

    #[test]
    fn kernel_rejects_diagonal() {
        let z1 = ProfileFunction::coordinate(2);
        assert!(kernel_eval(&[1.0, 0.0], &[1.0, 0.0], &z1, 2, Variant::Alternative, 1e-8).is_err());
    }

    #[test]
    fn arg_swap_identity() {
        // alternative argument at (x,y) equals the general argument at (y,x)
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ba = [0.0; 2];
        let mut bg = [0.0; 2];
        for _ in 0..10_000 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let y = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let t = rng.random_range(1e-6..1.0f64);
            kernel_arg(&mut ba, &x, &y, t, Variant::Alternative);
            kernel_arg(&mut bg, &y, &x, t, Variant::General);
            for i in 0..2 {
                assert!((ba[i] - bg[i]).abs() <= 1e-12 * (1.0 + ba[i].abs()));
            }
        }
    }

    #[test]
    fn bound_check_examples() {
        let z1 = ProfileFunction::coordinate(2);
        // b = -4 < 0, ε = 0.5: bound = e^{-4+0.5}
        let r = kernel_bound_check(&[1.0, 0.0], &[-2.0, 0.0], &z1, 2, Variant::Alternative, 0.5, 2.0).unwrap();
        let b = r.bound_b_le_0.unwrap();
        assert!((b - (-3.5f64).exp()).abs() < 1e-12);
        assert!(r.ratio_to_bound.unwrap().is_finite());

        // b = 4 > 0, ε = 0.1: t₀ = 0.75, u₀ = 3 ⇒ bound = e^{-3}/0.75
        // (scale 1 puts the pair on the closed global boundary)
        let r = kernel_bound_check(&[1.0, 0.0], &[2.0, 0.0], &z1, 2, Variant::Alternative, 0.1, 1.0).unwrap();
        let b = r.bound_b_gt_0.unwrap();
        assert!((b - (-3.0f64).exp() / 0.75).abs() < 1e-12, "bound {b}");

        // local pair rejected
        assert!(kernel_bound_check(&[2.0, 0.0], &[2.1, 0.0], &z1, 2, Variant::Alternative, 0.1, 2.0).is_err());
    }

    #[test]
    fn alpha_inf_arithmetic() {
        assert!((alpha_inf(0.1, 2.0).unwrap() - 0.40).abs() < 1e-15);
        assert!(alpha_inf(0.6, 2.0).is_err());
        assert!(alpha_inf(0.0, 2.0).is_err());
    }

    #[test]
    fn majorant_on_diagonal() {
        let x = [1.0, 2.0];
        let v = majorant_p(&x, &x, 0.4);
        // exponent vanishes at x = y, leaving |2x|^d
        assert!((v - (2.0 * 5f64.sqrt()).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn cz_kernel_closed_form_and_homogeneity() {
        let z1 = ProfileFunction::coordinate(2);
        let k = cz_kernel(&[1.0, 0.0], &z1, 1e-12).unwrap();
        let gamma_3_2 = std::f64::consts::PI.sqrt() / 2.0;
        assert!((k + gamma_3_2).abs() < 1e-10, "got {k}");

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            if crate::geometry::norm(&x) < 0.1 {
                continue;
            }
            let k1 = cz_kernel(&x, &z1, 1e-12).unwrap();
            let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            let k2 = cz_kernel(&x2, &z1, 1e-12).unwrap();
            assert!((k2 - k1 / 4.0).abs() < 1e-9 * (1.0 + k1.abs()));
        }
        assert!(cz_kernel(&[0.0, 0.0], &z1, 1e-10).is_err());
    }

    #[test]
    fn cz_kernel_spherical_mean_zero_for_odd_profile() {
        let z1 = ProfileFunction::coordinate(2);
        let n = 256;
        let mean: f64 = (0..n)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                cz_kernel(&[th.cos(), th.sin()], &z1, 1e-10).unwrap()
            })
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 1e-6);
    }

    #[test]
    fn theta_profiles() {
        // F = z₁ is unbounded below on every Ω_t
        let z1 = ProfileFunction::coordinate(2);
        let pts = theta_profile(&z1, 2, &[1.0, 2.0], 5).unwrap();
        assert!(pts.iter().all(|p| p.diverged));

        // F = z₁z₂ likewise (z₁ = t, z₂ → -∞)
        let z12 = ProfileFunction::coordinate_product(2);
        let pts = theta_profile(&z12, 2, &[1.0, 4.0], 5).unwrap();
        assert!(pts.iter().all(|p| p.diverged));

        // F = z₁²z₂² - 1/4 has inf over Ω_t equal to t⁴ - 1/4 at the corner
        let sq = ProfileFunction::square_product(2);
        let pts = theta_profile(&sq, 2, &[1.0, 2.0, 4.0], 5).unwrap();
        for p in &pts {
            let expected = (p.t.powi(4) - 0.25) / (p.t * p.t);
            assert!(!p.diverged);
            assert!((p.value - expected).abs() < 1e-6, "Θ({}) = {} vs {}", p.t, p.value, expected);
        }
    }

    #[test]
    fn growth_certificates_finite() {
        let mut f = ProfileFunction::square_product(2);
        f.verify_growth(&[0.05, 0.1, 0.5], 2, 9);
        assert!(f.growth_report.iter().all(|(_, s)| s.is_finite()));
        assert!(f.growth_report_grad.iter().all(|(_, s)| s.is_finite()));
    }
}
