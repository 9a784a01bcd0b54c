//! Modulars and Luxemburg norms on variable exponent Lebesgue spaces, the
//! Hölder pairing, finite-family ratio checks for the `𝒢` class, and the
//! discrete Hardy–Littlewood maximal function.
//!
//! The modular is `ρ(f) = Σ_i w_i |f(x_i)|^{p(x_i)}` over a scheme whose
//! weights embody the measure. Every term is computed as a single
//! exponential `exp(p·log|f| + log w)` so large fields cannot overflow
//! before the Gaussian weight damps them.

use std::sync::Arc;

use crate::exponents::{dual_exponent, ExponentFunction};
use crate::geometry::dist;
use crate::quad::{GridField, MeasureKind, QuadratureScheme};
use crate::{Error, Result};

pub use crate::quad::{GridSpec, SchemeKind};

type Oracle = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Ball support hint: the field vanishes outside `B(center, radius)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallSupport {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Parity of a field, when known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    Unknown,
}

/// A real-valued function on `R^d` given by an evaluation oracle.
#[derive(Clone)]
pub struct ScalarField {
    eval: Oracle,
    pub support: Option<BallSupport>,
    pub parity: Parity,
    pub name: String,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("name", &self.name)
            .field("support", &self.support)
            .field("parity", &self.parity)
            .finish()
    }
}

impl ScalarField {
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn from_fn(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField { eval: Arc::new(f), support: None, parity: Parity::Unknown, name: name.into() }
    }

    pub fn constant(c: f64) -> Self {
        let mut f = Self::from_fn(format!("const({c})"), move |_| c);
        f.parity = Parity::Even;
        f
    }

    /// Indicator of the ball `B(center, radius)`.
    pub fn indicator_ball(center: Vec<f64>, radius: f64) -> Self {
        let c = center.clone();
        let mut f = Self::from_fn(
            format!("chi_B({center:?},{radius})"),
            move |x| if dist(&c, x) < radius { 1.0 } else { 0.0 },
        );
        f.support = Some(BallSupport { center, radius });
        f
    }

    /// Smooth bump `exp(1 - 1/(1 - |x-c|²/r²))` supported on `B(c, r)`.
    pub fn bump(center: Vec<f64>, radius: f64) -> Self {
        let c = center.clone();
        let r2 = radius * radius;
        let mut f = Self::from_fn(format!("bump({center:?},{radius})"), move |x| {
            let q = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / r2;
            if q >= 1.0 {
                0.0
            } else {
                (1.0 - 1.0 / (1.0 - q)).exp()
            }
        });
        f.support = Some(BallSupport { center, radius });
        f
    }

    /// `f(x) = Σ_k c_k H_{α_k}(x) · e^{-decay |x|²}` with physicists' Hermite
    /// products `H_α(x) = Π_i H_{α_i}(x_i)`.
    pub fn hermite_gaussian(indices: Vec<Vec<usize>>, coeffs: Vec<f64>, decay: f64) -> Result<Self> {
        if indices.len() != coeffs.len() || indices.is_empty() {
            return Err(Error::InvalidInput("hermite field needs matching indices/coeffs".into()));
        }
        let degree_parity: Vec<usize> = indices.iter().map(|a| a.iter().sum::<usize>() % 2).collect();
        let parity = if degree_parity.iter().all(|&p| p == 0) {
            Parity::Even
        } else if degree_parity.iter().all(|&p| p == 1) {
            Parity::Odd
        } else {
            Parity::Unknown
        };
        let name = format!("hermite{indices:?}*exp(-{decay}|x|^2)");
        let mut f = Self::from_fn(name, move |x| {
            let nsq: f64 = x.iter().map(|v| v * v).sum();
            let mut acc = 0.0;
            for (alpha, c) in indices.iter().zip(&coeffs) {
                let mut term = *c;
                for (i, &n) in alpha.iter().enumerate() {
                    term *= crate::quad::hermite_poly(n, x[i]);
                }
                acc += term;
            }
            acc * (-decay * nsq).exp()
        });
        f.parity = parity;
        Ok(f)
    }

    /// `f(x) = e^{coeff |x|²}`; the closed-form norm test case.
    pub fn exp_quadratic(coeff: f64) -> Self {
        let mut f = Self::from_fn(format!("exp({coeff}|x|^2)"), move |x| {
            (coeff * x.iter().map(|v| v * v).sum::<f64>()).exp()
        });
        f.parity = Parity::Even;
        f
    }

    /// Pointwise scaling `c·f`.
    pub fn scaled(&self, c: f64) -> Self {
        let inner = self.eval.clone();
        ScalarField {
            eval: Arc::new(move |x| c * inner(x)),
            support: self.support.clone(),
            parity: self.parity,
            name: format!("{c}*{}", self.name),
        }
    }
}

/// Modular `ρ_{p(·)}(f) = Σ w_i |f(x_i)|^{p(x_i)}` from precomputed values.
pub fn modular_values(values: &[f64], p_values: &[f64], scheme: &QuadratureScheme) -> f64 {
    modular_values_scaled(values, p_values, scheme, 1.0)
}

/// Modular of `f/λ` from precomputed `f` values.
pub fn modular_values_scaled(values: &[f64], p_values: &[f64], scheme: &QuadratureScheme, lambda: f64) -> f64 {
    let log_lambda = lambda.ln();
    let mut acc = 0.0;
    for i in 0..values.len() {
        let v = values[i].abs();
        if v == 0.0 {
            continue;
        }
        acc += (p_values[i] * (v.ln() - log_lambda) + scheme.log_weight(i)).exp();
    }
    acc
}

fn field_values(f: &ScalarField, scheme: &QuadratureScheme) -> Vec<f64> {
    (0..scheme.len()).map(|i| f.eval(scheme.node(i))).collect()
}

fn exponent_values(p: &ExponentFunction, scheme: &QuadratureScheme) -> Vec<f64> {
    (0..scheme.len()).map(|i| p.eval(scheme.node(i))).collect()
}

/// Modular `∫ |f|^{p(x)} dμ` by quadrature.
pub fn modular(f: &ScalarField, p: &ExponentFunction, scheme: &QuadratureScheme) -> f64 {
    modular_values(&field_values(f, scheme), &exponent_values(p, scheme), scheme)
}

/// Luxemburg norm `inf{λ > 0 : ρ(f/λ) ≤ 1}` by bisection on the strictly
/// decreasing map `λ ↦ ρ(f/λ)`.
pub fn luxemburg_norm(f: &ScalarField, p: &ExponentFunction, scheme: &QuadratureScheme) -> Result<f64> {
    luxemburg_norm_values(&field_values(f, scheme), &exponent_values(p, scheme), scheme)
}

/// Luxemburg norm with bisection diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct NormOutcome {
    pub value: f64,
    pub iterations: usize,
    /// `|ρ(f/λ*) - 1|` at the returned λ*; 0 for the zero field.
    pub modular_residual: f64,
}

/// Luxemburg norm `inf{λ > 0 : ρ(f/λ) ≤ 1}` with iteration count and final
/// modular residual.
pub fn luxemburg_norm_detailed(
    f: &ScalarField,
    p: &ExponentFunction,
    scheme: &QuadratureScheme,
) -> Result<NormOutcome> {
    let values = field_values(f, scheme);
    let p_values = exponent_values(p, scheme);
    luxemburg_norm_values_detailed(&values, &p_values, scheme)
}

/// Luxemburg norm from precomputed node values.
pub fn luxemburg_norm_values(values: &[f64], p_values: &[f64], scheme: &QuadratureScheme) -> Result<f64> {
    luxemburg_norm_values_detailed(values, p_values, scheme).map(|o| o.value)
}

fn luxemburg_norm_values_detailed(values: &[f64], p_values: &[f64], scheme: &QuadratureScheme) -> Result<NormOutcome> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NotInSpace("field evaluates to NaN on the scheme".into()));
    }
    if values.iter().all(|&v| v == 0.0) {
        return Ok(NormOutcome { value: 0.0, iterations: 0, modular_residual: 0.0 });
    }
    let m = |lambda: f64| modular_values_scaled(values, p_values, scheme, lambda);

    // geometric bracket growth from λ = 1
    let mut iterations = 0usize;
    let mut lo = 1.0f64;
    let mut hi = 1.0f64;
    let mut steps = 0;
    while !(m(hi) <= 1.0) {
        hi *= 2.0;
        steps += 1;
        iterations += 1;
        if steps > 200 {
            return Err(Error::NotInSpace(
                "modular stays above 1 for every bracketing λ; f is not in the space on this scheme".into(),
            ));
        }
    }
    steps = 0;
    while m(lo) < 1.0 {
        lo *= 0.5;
        steps += 1;
        iterations += 1;
        if steps > 200 {
            // f is numerically zero against the weights
            return Ok(NormOutcome { value: 0.0, iterations, modular_residual: 0.0 });
        }
    }
    // bisection; the modular is continuous and strictly decreasing in λ
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let v = m(mid);
        iterations += 1;
        if (v - 1.0).abs() <= 1e-10 || (hi - lo) / mid < 1e-15 {
            return Ok(NormOutcome { value: mid, iterations, modular_residual: (v - 1.0).abs() });
        }
        if v > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let value = (lo * hi).sqrt();
    Ok(NormOutcome { value, iterations, modular_residual: (m(value) - 1.0).abs() })
}

/// Outcome of a Hölder-pairing check: `lhs = ∫|fg| dμ`,
/// `rhs = 2‖f‖_{p(·)}‖g‖_{p'(·)}`, and their ratio (≤ 1 when the inequality
/// holds).
#[derive(Debug, Clone, Copy)]
pub struct HolderReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

pub fn holder_pairing_check(
    f: &ScalarField,
    g: &ScalarField,
    p: &ExponentFunction,
    scheme: &QuadratureScheme,
) -> Result<HolderReport> {
    let p_dual = dual_exponent(p)?;
    let nf = luxemburg_norm(f, p, scheme)?;
    let ng = luxemburg_norm(g, &p_dual, scheme)?;
    if nf == 0.0 || ng == 0.0 {
        return Err(Error::InvalidInput("Hölder check needs nonzero norms".into()));
    }
    let lhs = scheme.integrate(|x| (f.eval(x) * g.eval(x)).abs());
    let rhs = 2.0 * nf * ng;
    Ok(HolderReport { lhs, rhs, ratio: lhs / rhs })
}

/// Finite-family `𝒢`-class ratio
/// `Σ_B ‖fχ_B‖_{p(·)} ‖gχ_B‖_{p'(·)} / (‖f‖_{p(·)} ‖g‖_{p'(·)})`
/// over Lebesgue-measure norms on a truncated scheme.
pub fn g_class_ratio(
    p: &ExponentFunction,
    family: &crate::geometry::CoveringFamily,
    f: &ScalarField,
    g: &ScalarField,
    scheme: &QuadratureScheme,
) -> Result<f64> {
    if scheme.measure() != MeasureKind::Lebesgue {
        return Err(Error::InvalidInput("the 𝒢-class ratio is stated for Lebesgue-measure norms".into()));
    }
    let p_dual = dual_exponent(p)?;
    let fv = field_values(f, scheme);
    let gv = field_values(g, scheme);
    let pv = exponent_values(p, scheme);
    let pdv = exponent_values(&p_dual, scheme);
    let nf = luxemburg_norm_values(&fv, &pv, scheme)?;
    let ng = luxemburg_norm_values(&gv, &pdv, scheme)?;
    if nf == 0.0 || ng == 0.0 {
        return Err(Error::InvalidInput("𝒢-ratio denominator vanishes".into()));
    }
    let mut sum = 0.0;
    let mut masked_f = vec![0.0; fv.len()];
    let mut masked_g = vec![0.0; gv.len()];
    for ball in &family.balls {
        for i in 0..scheme.len() {
            let inside = dist(&ball.center, scheme.node(i)) < ball.radius;
            masked_f[i] = if inside { fv[i] } else { 0.0 };
            masked_g[i] = if inside { gv[i] } else { 0.0 };
        }
        let a = luxemburg_norm_values(&masked_f, &pv, scheme)?;
        let b = luxemburg_norm_values(&masked_g, &pdv, scheme)?;
        sum += a * b;
    }
    Ok(sum / (nf * ng))
}

/// Discrete Hardy–Littlewood maximal function on a uniform grid: at every
/// grid point, the sup over the radius set `{0} ∪ {h·2^k}` of the average of
/// `|f|` over the discrete ball (clipped at the grid boundary).
///
/// The dyadic radius set keeps the cost bounded; the full supremum over all
/// radii is within a dimensional factor of the dyadic one.
pub fn hl_maximal(field: &GridField) -> GridField {
    let spec = field.spec;
    let n = spec.n_per_axis;
    let h = spec.spacing();
    let dim = spec.dim;
    let max_k = (2.0 * spec.radius / h).log2().ceil() as i32;

    // offset stencils per radius, shared across grid points
    let mut stencils: Vec<Vec<Vec<i64>>> = Vec::new();
    for k in 0..=max_k {
        let r = h * 2f64.powi(k);
        let reach = (r / h).floor() as i64;
        let mut offsets = Vec::new();
        let width = (2 * reach + 1) as usize;
        let mut idx = vec![0i64; dim];
        for _ in 0..width.pow(dim as u32) {
            let off: Vec<i64> = idx.iter().map(|&v| v - reach).collect();
            let dist2: f64 = off.iter().map(|&v| (v as f64 * h).powi(2)).sum();
            if dist2 <= r * r {
                offsets.push(off.clone());
            }
            for d in (0..dim).rev() {
                idx[d] += 1;
                if idx[d] < width as i64 {
                    break;
                }
                idx[d] = 0;
            }
        }
        stencils.push(offsets);
    }

    let coords = |i: usize| -> Vec<i64> {
        let mut rem = i;
        (0..dim)
            .map(|_| {
                let k = (rem % n) as i64;
                rem /= n;
                k
            })
            .collect()
    };
    let flat = |c: &[i64]| -> usize {
        let mut acc = 0usize;
        for d in (0..dim).rev() {
            acc = acc * n + c[d] as usize;
        }
        acc
    };

    let values: Vec<f64> = (0..spec.len())
        .map(|i| {
            let c = coords(i);
            let mut best = field.values[i].abs();
            for offsets in &stencils {
                let mut sum = 0.0;
                let mut count = 0usize;
                for off in offsets {
                    let mut q = Vec::with_capacity(dim);
                    let mut ok = true;
                    for d in 0..dim {
                        let v = c[d] + off[d];
                        if v < 0 || v >= n as i64 {
                            ok = false;
                            break;
                        }
                        q.push(v);
                    }
                    if ok {
                        sum += field.values[flat(&q)].abs();
                        count += 1;
                    }
                }
                if count > 0 {
                    best = best.max(sum / count as f64);
                }
            }
            best
        })
        .collect();

    GridField { spec, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::QuadratureScheme;

    fn gh(dim: usize, order: usize) -> QuadratureScheme {
        QuadratureScheme::gauss_hermite(dim, order)
    }

    #[test]
    fn modular_constant_exponent_constant_field() {
        let p = ExponentFunction::constant(2.0).unwrap();
        let f = ScalarField::constant(3.0);
        let s = gh(2, 32);
        assert!((modular(&f, &p, &s) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn modular_of_one_is_one_for_any_exponent() {
        let p = ExponentFunction::radial_rational(2.0, 1.0).unwrap();
        let f = ScalarField::constant(1.0);
        let s = gh(2, 32);
        assert!((modular(&f, &p, &s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn modular_closed_form_gaussian() {
        // d=1, p ≡ 2, f = e^{x²/4}: ∫ e^{x²/2} dγ₁ = √2
        let p = ExponentFunction::constant(2.0).unwrap();
        let f = ScalarField::exp_quadratic(0.25);
        let s = gh(1, 64);
        assert!((modular(&f, &p, &s) - 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn luxemburg_examples() {
        let s = gh(1, 64);
        let p = ExponentFunction::constant(2.0).unwrap();
        assert!((luxemburg_norm(&ScalarField::constant(3.0), &p, &s).unwrap() - 3.0).abs() < 1e-8);

        let pr = ExponentFunction::radial_rational(2.0, 1.0).unwrap();
        assert!((luxemburg_norm(&ScalarField::constant(1.0), &pr, &s).unwrap() - 1.0).abs() < 1e-8);

        let f = ScalarField::exp_quadratic(0.25);
        assert!((luxemburg_norm(&f, &p, &s).unwrap() - 2f64.powf(0.25)).abs() < 1e-7);
    }

    #[test]
    fn luxemburg_zero_field() {
        let p = ExponentFunction::constant(2.0).unwrap();
        let s = gh(1, 16);
        assert_eq!(luxemburg_norm(&ScalarField::constant(0.0), &p, &s).unwrap(), 0.0);
    }

    #[test]
    fn luxemburg_detects_not_in_space() {
        let p = ExponentFunction::constant(4.0).unwrap();
        let f = ScalarField::from_fn("inf spike", |x| if x[0].abs() < 0.5 { f64::INFINITY } else { 0.0 });
        let s = gh(1, 32);
        assert!(matches!(luxemburg_norm(&f, &p, &s), Err(Error::NotInSpace(_))));
    }

    #[test]
    fn unit_ball_property() {
        let s = gh(2, 24);
        let cases: Vec<(ExponentFunction, ScalarField)> = vec![
            (ExponentFunction::constant(1.5).unwrap(), ScalarField::constant(2.0)),
            (
                ExponentFunction::radial_rational(2.0, 1.0).unwrap(),
                ScalarField::hermite_gaussian(vec![vec![1, 0]], vec![0.5], 0.25).unwrap(),
            ),
            (ExponentFunction::constant(4.0).unwrap(), ScalarField::indicator_ball(vec![0.0, 0.0], 1.5)),
        ];
        for (p, f) in cases {
            let norm = luxemburg_norm(&f, &p, &s).unwrap();
            assert!(norm > 0.0);
            let scaled = f.scaled(1.0 / norm);
            let m = modular(&scaled, &p, &s);
            assert!((m - 1.0).abs() < 1e-8, "modular(f/‖f‖) = {m} for {}", f.name);
        }
    }

    #[test]
    fn norm_homogeneity() {
        let s = gh(2, 24);
        let p = ExponentFunction::radial_rational(2.0, 1.0).unwrap();
        let f = ScalarField::hermite_gaussian(vec![vec![2, 0]], vec![1.0], 0.5).unwrap();
        let base = luxemburg_norm(&f, &p, &s).unwrap();
        for c in [0.1, 1.0, 7.0] {
            let n = luxemburg_norm(&f.scaled(c), &p, &s).unwrap();
            assert!((n - c * base).abs() < 1e-10 * (1.0 + c * base));
        }
    }

    #[test]
    fn constant_exponent_reduces_to_lp() {
        let s = gh(1, 48);
        let f = ScalarField::hermite_gaussian(vec![vec![1]], vec![0.5], 0.5).unwrap();
        for p0 in [1.5, 2.0, 4.0] {
            let p = ExponentFunction::constant(p0).unwrap();
            let n = luxemburg_norm(&f, &p, &s).unwrap();
            let m = modular(&f, &p, &s);
            assert!((n - m.powf(1.0 / p0)).abs() < 1e-8);
        }
    }

    #[test]
    fn norm_monotone_in_field() {
        let s = gh(1, 32);
        let p = ExponentFunction::radial_rational(2.0, 0.5).unwrap();
        let small = ScalarField::from_fn("small", |x| (-x[0] * x[0]).exp());
        let large = ScalarField::from_fn("large", |x| (-0.5 * x[0] * x[0]).exp());
        let ns = luxemburg_norm(&small, &p, &s).unwrap();
        let nl = luxemburg_norm(&large, &p, &s).unwrap();
        assert!(ns <= nl);
    }

    #[test]
    fn holder_pairing_examples() {
        let s = gh(1, 64);
        let p = ExponentFunction::constant(2.0).unwrap();

        let one = ScalarField::constant(1.0);
        let r = holder_pairing_check(&one, &one, &p, &s).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-10);
        assert!((r.rhs - 2.0).abs() < 1e-8);
        assert!((r.ratio - 0.5).abs() < 1e-8);

        let f = ScalarField::exp_quadratic(0.25);
        let r = holder_pairing_check(&f, &one, &p, &s).unwrap();
        assert!((r.lhs - 2.0 / 3f64.sqrt()).abs() < 1e-8);
        assert!((r.rhs - 2.0 * 2f64.powf(0.25)).abs() < 1e-6);
        assert!(r.ratio <= 1.0);

        let half = ScalarField::from_fn("chi(0,inf)", |x| if x[0] > 0.0 { 1.0 } else { 0.0 });
        let r = holder_pairing_check(&half, &half, &p, &s).unwrap();
        assert!((r.lhs - 0.5).abs() < 1e-10);
        assert!((r.rhs - 1.0).abs() < 1e-8);
        assert!((r.ratio - 0.5).abs() < 1e-8);
    }

    #[test]
    fn maximal_function_basics() {
        let spec = GridSpec::new(2, 33, 4.0).unwrap();
        let c = GridField::from_fn(spec, |_| 2.5);
        let m = hl_maximal(&c);
        assert!(m.values.iter().all(|&v| (v - 2.5).abs() < 1e-12));

        let ind = GridField::from_fn(spec, |x| if crate::geometry::norm(x) < 1.0 { 1.0 } else { 0.0 });
        let m = hl_maximal(&ind);
        let center = spec.len() / 2; // odd n per axis puts a node at the origin
        assert!((m.values[center] - 1.0).abs() < 1e-12);
        // maximal dominates |f| pointwise
        for (mv, fv) in m.values.iter().zip(&ind.values) {
            assert!(mv + 1e-15 >= fv.abs());
        }
    }

    #[test]
    fn maximal_is_sublinear() {
        let spec = GridSpec::new(2, 25, 3.0).unwrap();
        let f = GridField::from_fn(spec, |x| (x[0] * 1.3).sin());
        let g = GridField::from_fn(spec, |x| if x[1] > 0.0 { 1.0 } else { 0.2 });
        let sum = GridField {
            spec,
            values: f.values.iter().zip(&g.values).map(|(a, b)| a + b).collect(),
        };
        let mf = hl_maximal(&f);
        let mg = hl_maximal(&g);
        let ms = hl_maximal(&sum);
        for i in 0..spec.len() {
            assert!(ms.values[i] <= mf.values[i] + mg.values[i] + 1e-12);
        }
    }
}
