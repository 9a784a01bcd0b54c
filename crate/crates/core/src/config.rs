//! JSON declarations for exponents, profiles, fields and schemes, shared by
//! the CLI and by reproducible experiment scripts.
//!
//! Arithmetic expressions use `x1..xd` for the coordinates and `r` for
//! `|x|`, with the usual function library (`sin`, `exp`, `ln`, ...).

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::exponents::ExponentFunction;
use crate::kernels::{verify_orthogonality, ProfileFunction, Variant};
use crate::quad::{MeasureKind, QuadratureScheme};
use crate::varlebesgue::{BallSupport, ScalarField};
use crate::{Error, Result};

const VAR_NAMES: [&str; 3] = ["x1", "x2", "x3"];

thread_local! {
    static EXPR_CTX: RefCell<meval::Context<'static>> = RefCell::new(meval::Context::new());
}

fn eval_expr(expr: &meval::Expr, x: &[f64]) -> f64 {
    EXPR_CTX.with(|c| {
        let mut ctx = c.borrow_mut();
        for (i, v) in x.iter().enumerate() {
            ctx.var(VAR_NAMES[i], *v);
        }
        ctx.var("r", x.iter().map(|v| v * v).sum::<f64>().sqrt());
        expr.eval_with_context(&*ctx).unwrap_or(f64::NAN)
    })
}

fn parse_expr(source: &str, dim: usize) -> Result<meval::Expr> {
    if dim > 3 {
        return Err(Error::Config("expressions support at most 3 coordinates".into()));
    }
    source
        .parse::<meval::Expr>()
        .map_err(|e| Error::Config(format!("cannot parse expression {source:?}: {e}")))
}

/// Declaration of an exponent function.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ExponentConfig {
    Constant {
        p: f64,
    },
    RadialRational {
        p_inf: f64,
        amplitude: f64,
    },
    Expression {
        source: String,
        p_inf: f64,
        p_minus: f64,
        p_plus: f64,
        #[serde(default)]
        c_gamma: f64,
        #[serde(default)]
        lh0_const: f64,
    },
}

impl ExponentConfig {
    pub fn build(&self, dim: usize) -> Result<ExponentFunction> {
        match self {
            ExponentConfig::Constant { p } => ExponentFunction::constant(*p),
            ExponentConfig::RadialRational { p_inf, amplitude } => {
                ExponentFunction::radial_rational(*p_inf, *amplitude)
            }
            ExponentConfig::Expression { source, p_inf, p_minus, p_plus, c_gamma, lh0_const } => {
                let expr = parse_expr(source, dim)?;
                ExponentFunction::from_oracle(
                    move |x| eval_expr(&expr, x),
                    *p_inf,
                    *c_gamma,
                    *lh0_const,
                    *p_minus,
                    *p_plus,
                )
            }
        }
    }
}

/// Declaration of a profile function `F`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileConfig {
    Preset { preset: String },
    Hermite { hermite: Vec<Vec<usize>>, coeffs: Vec<f64> },
    Expression { expression: String },
}

impl ProfileConfig {
    /// Build the profile and certify its orthogonality on a Gauss–Hermite
    /// scheme.
    pub fn build(&self, dim: usize) -> Result<ProfileFunction> {
        let mut profile = match self {
            ProfileConfig::Preset { preset } => match preset.as_str() {
                "z1" => ProfileFunction::coordinate(dim),
                "z1sq" => ProfileFunction::coordinate_square(dim),
                "z1z2" => {
                    if dim < 2 {
                        return Err(Error::Config("preset z1z2 needs dim >= 2".into()));
                    }
                    ProfileFunction::coordinate_product(dim)
                }
                "z1sq_z2sq" => {
                    if dim < 2 {
                        return Err(Error::Config("preset z1sq_z2sq needs dim >= 2".into()));
                    }
                    ProfileFunction::square_product(dim)
                }
                other => return Err(Error::Config(format!("unknown profile preset {other:?}"))),
            },
            ProfileConfig::Hermite { hermite, coeffs } => {
                if hermite.iter().any(|a| a.len() != dim) {
                    return Err(Error::Config("hermite multi-indices must match the dimension".into()));
                }
                ProfileFunction::hermite(hermite.clone(), coeffs.clone())?
            }
            ProfileConfig::Expression { expression } => {
                let expr = parse_expr(expression, dim)?;
                ProfileFunction::from_fn(expression.clone(), move |z| eval_expr(&expr, z))
            }
        };
        let order = if dim == 3 { 20 } else { 48 };
        let scheme = QuadratureScheme::gauss_hermite(dim, order);
        verify_orthogonality(&mut profile, &scheme)?;
        Ok(profile)
    }
}

/// Declaration of a scalar test field.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldConfig {
    Constant {
        value: f64,
    },
    HermiteGaussian {
        indices: Vec<Vec<usize>>,
        coeffs: Vec<f64>,
        decay: f64,
    },
    IndicatorBall {
        center: Vec<f64>,
        radius: f64,
    },
    Bump {
        center: Vec<f64>,
        radius: f64,
    },
    ExpQuadratic {
        coeff: f64,
    },
    Expression {
        source: String,
        #[serde(default)]
        support_center: Option<Vec<f64>>,
        #[serde(default)]
        support_radius: Option<f64>,
    },
}

impl FieldConfig {
    pub fn build(&self, dim: usize) -> Result<ScalarField> {
        match self {
            FieldConfig::Constant { value } => Ok(ScalarField::constant(*value)),
            FieldConfig::HermiteGaussian { indices, coeffs, decay } => {
                if indices.iter().any(|a| a.len() != dim) {
                    return Err(Error::Config("field multi-indices must match the dimension".into()));
                }
                ScalarField::hermite_gaussian(indices.clone(), coeffs.clone(), *decay)
            }
            FieldConfig::IndicatorBall { center, radius } => {
                check_dim(center, dim)?;
                Ok(ScalarField::indicator_ball(center.clone(), *radius))
            }
            FieldConfig::Bump { center, radius } => {
                check_dim(center, dim)?;
                Ok(ScalarField::bump(center.clone(), *radius))
            }
            FieldConfig::ExpQuadratic { coeff } => Ok(ScalarField::exp_quadratic(*coeff)),
            FieldConfig::Expression { source, support_center, support_radius } => {
                let expr = parse_expr(source, dim)?;
                let mut f = ScalarField::from_fn(source.clone(), move |x| eval_expr(&expr, x));
                if let (Some(c), Some(r)) = (support_center, support_radius) {
                    check_dim(c, dim)?;
                    f.support = Some(BallSupport { center: c.clone(), radius: *r });
                }
                Ok(f)
            }
        }
    }
}

fn check_dim(v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        Err(Error::Config(format!("vector {v:?} does not match dimension {dim}")))
    } else {
        Ok(())
    }
}

/// Parse scheme shorthand: `gh:64`, `uniform:6:400`, `uniform-lebesgue:6:200`.
pub fn parse_scheme(spec: &str, dim: usize) -> Result<QuadratureScheme> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["gh", order] => {
            let order: usize = order.parse().map_err(|_| Error::Config(format!("bad GH order in {spec:?}")))?;
            Ok(QuadratureScheme::gauss_hermite(dim, order))
        }
        ["uniform", radius, n] | ["uniform-lebesgue", radius, n] => {
            let radius: f64 = radius.parse().map_err(|_| Error::Config(format!("bad radius in {spec:?}")))?;
            let n: usize = n.parse().map_err(|_| Error::Config(format!("bad count in {spec:?}")))?;
            let measure = if parts[0] == "uniform" { MeasureKind::Gaussian } else { MeasureKind::Lebesgue };
            Ok(QuadratureScheme::truncated_uniform(dim, radius, n, measure))
        }
        _ => Err(Error::Config(format!(
            "unknown scheme {spec:?}; use gh:<order>, uniform:<radius>:<n> or uniform-lebesgue:<radius>:<n>"
        ))),
    }
}

/// Operator declaration: variant, order, dimension and profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub variant: String,
    pub m: u32,
    pub dim: usize,
    pub profile: ProfileConfig,
    #[serde(default)]
    pub scale_const: Option<f64>,
    #[serde(default)]
    pub kernel_tol: Option<f64>,
    #[serde(default)]
    pub outer_tol: Option<f64>,
}

impl OperatorConfig {
    pub fn variant(&self) -> Result<Variant> {
        match self.variant.as_str() {
            "general" => Ok(Variant::General),
            "alternative" => Ok(Variant::Alternative),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }

    pub fn build(&self) -> Result<crate::operators::OperatorSpec> {
        let profile = self.profile.build(self.dim)?;
        let mut spec = crate::operators::OperatorSpec::new(self.variant()?, profile, self.m, self.dim)?;
        if let Some(c) = self.scale_const {
            spec = spec.with_scale_const(c);
        }
        let kernel_tol = self.kernel_tol.unwrap_or(spec.kernel_tol);
        let outer_tol = self.outer_tol.unwrap_or(spec.outer_tol);
        Ok(spec.with_tolerances(kernel_tol, outer_tol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_configs_roundtrip() {
        let c: ExponentConfig = serde_json::from_str(r#"{"family":"constant","p":2.0}"#).unwrap();
        let p = c.build(2).unwrap();
        assert_eq!(p.eval(&[1.0, 1.0]), 2.0);

        let c: ExponentConfig =
            serde_json::from_str(r#"{"family":"radial_rational","p_inf":2.0,"amplitude":1.0}"#).unwrap();
        let p = c.build(2).unwrap();
        assert!((p.eval(&[0.0, 0.0]) - 3.0).abs() < 1e-15);

        let c: ExponentConfig = serde_json::from_str(
            r#"{"family":"expression","source":"2 + 1/(1 + r^2)","p_inf":2.0,"p_minus":2.0,"p_plus":3.0,"c_gamma":1.0,"lh0_const":1.0}"#,
        )
        .unwrap();
        let p = c.build(2).unwrap();
        assert!((p.eval(&[1.0, 0.0]) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn profile_config_presets_and_hermite() {
        let c: ProfileConfig = serde_json::from_str(r#"{"preset":"z1"}"#).unwrap();
        let f = c.build(2).unwrap();
        assert!(f.is_certified());
        assert!((f.eval(&[0.7, -0.3]) - 0.7).abs() < 1e-14);

        let c: ProfileConfig =
            serde_json::from_str(r#"{"hermite":[[1,0],[0,2]],"coeffs":[1.0,0.5]}"#).unwrap();
        let f = c.build(2).unwrap();
        // 1.0·H₁(z₁) + 0.5·H₂(z₂) = 2z₁ + 0.5(4z₂² - 2)
        let z = [0.3, 0.4];
        assert!((f.eval(&z) - (2.0 * 0.3 + 0.5 * (4.0 * 0.16 - 2.0))).abs() < 1e-13);
        assert!(f.is_certified());
    }

    #[test]
    fn expression_profile_fails_orthogonality() {
        let c: ProfileConfig = serde_json::from_str(r#"{"expression":"1 + x1"}"#).unwrap();
        let f = c.build(2).unwrap();
        assert!(!f.is_certified());
        assert!((f.orthogonality_residual.unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn field_configs() {
        let c: FieldConfig =
            serde_json::from_str(r#"{"kind":"indicator_ball","center":[3.0,0.0],"radius":0.5}"#).unwrap();
        let f = c.build(2).unwrap();
        assert_eq!(f.eval(&[3.1, 0.0]), 1.0);
        assert_eq!(f.eval(&[0.0, 0.0]), 0.0);
        assert!(f.support.is_some());

        let bad = c.build(3);
        assert!(bad.is_err());
    }

    #[test]
    fn scheme_shorthand() {
        assert_eq!(parse_scheme("gh:16", 2).unwrap().len(), 256);
        assert_eq!(parse_scheme("uniform:4:10", 1).unwrap().len(), 10);
        assert!(parse_scheme("nope", 2).is_err());
    }
}
