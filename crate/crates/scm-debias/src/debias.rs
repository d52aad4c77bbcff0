//! The three mitigation operators (Subtraction, Linear Projection,
//! Partial Projection) and their two-direction application to vector
//! sets, including concatenated-space handling.

use serde::{Deserialize, Serialize};

use crate::compound::replicate_direction;
use crate::embedding::{dot, norm};
use crate::error::{Error, Result};
use crate::subspace::BiasSubspace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    Subtraction,
    LinearProjection,
    PartialProjection,
}

impl Operator {
    pub fn short_name(&self) -> &'static str {
        match self {
            Operator::Subtraction => "sub",
            Operator::LinearProjection => "lp",
            Operator::PartialProjection => "pp",
        }
    }
}

impl std::fmt::Display for Operator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Operator::Subtraction => write!(f, "subtraction"),
            Operator::LinearProjection => write!(f, "linear_projection"),
            Operator::PartialProjection => write!(f, "partial_projection"),
        }
    }
}

/// Smoothing function f(.) used by Partial Projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Smoothing {
    ConstantOne,
    /// 1 / (1 + x)
    InverseOnePlus,
    /// exp(-x^2 / sigma^2)
    Gaussian { sigma: f64 },
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::Gaussian { sigma: 1.0 }
    }
}

impl Smoothing {
    pub fn validate(&self) -> Result<()> {
        if let Smoothing::Gaussian { sigma } = self {
            if *sigma <= 0.0 {
                return Err(Error::Config(format!(
                    "gaussian smoothing requires sigma > 0, got {sigma}"
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Smoothing::ConstantOne => 1.0,
            Smoothing::InverseOnePlus => 1.0 / (1.0 + x),
            Smoothing::Gaussian { sigma } => (-x * x / (sigma * sigma)).exp(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Smoothing::ConstantOne => "constant_one".into(),
            Smoothing::InverseOnePlus => "inverse_one_plus".into(),
            Smoothing::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
        }
    }
}

/// How operators act on 2d concatenated vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcatMode {
    /// Apply the d-dim operator independently to each d-block.
    Blockwise,
    /// Lift directions to [u; u]/sqrt(2) and means to [mu; mu].
    Replicated,
}

impl Default for ConcatMode {
    fn default() -> Self {
        ConcatMode::Blockwise
    }
}

impl std::fmt::Display for ConcatMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConcatMode::Blockwise => write!(f, "blockwise"),
            ConcatMode::Replicated => write!(f, "replicated"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasSpec {
    pub operator: Operator,
    /// PP only; ignored otherwise.
    pub beta: f64,
    /// PP only; ignored otherwise.
    pub smoothing: Smoothing,
    pub concat_mode: ConcatMode,
}

impl DebiasSpec {
    pub fn new(operator: Operator) -> Self {
        DebiasSpec {
            operator,
            beta: 1.0,
            smoothing: Smoothing::default(),
            concat_mode: ConcatMode::default(),
        }
    }
}

fn check_direction(w: &[f64], v: &[f64]) -> Result<()> {
    if w.len() != v.len() {
        return Err(Error::Argument(format!(
            "vector dim {} does not match direction dim {}",
            w.len(),
            v.len()
        )));
    }
    let n = norm(v);
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!(
            "direction is not unit norm (||v|| = {n})"
        )));
    }
    Ok(())
}

/// w' = w - v
pub fn subtract(w: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_direction(w, v)?;
    Ok(w.iter().zip(v).map(|(a, b)| a - b).collect())
}

/// w' = w - <w,v> v, orthogonal to v.
pub fn linear_project(w: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_direction(w, v)?;
    let c = dot(w, v);
    Ok(w.iter().zip(v).map(|(a, b)| a - c * b).collect())
}

/// w' = mu + r(w) + beta * f(||r(w)||) * v, with r(w) = w - <w,v> v.
pub fn partial_project(
    w: &[f64],
    v: &[f64],
    mu: &[f64],
    beta: f64,
    f: Smoothing,
) -> Result<Vec<f64>> {
    check_direction(w, v)?;
    if mu.len() != w.len() {
        return Err(Error::Argument(format!(
            "mu dim {} does not match vector dim {}",
            mu.len(),
            w.len()
        )));
    }
    f.validate()?;
    let r: Vec<f64> = {
        let c = dot(w, v);
        w.iter().zip(v).map(|(a, b)| a - c * b).collect()
    };
    let scale = beta * f.eval(norm(&r));
    Ok(mu
        .iter()
        .zip(&r)
        .zip(v)
        .map(|((m, ri), vi)| m + ri + scale * vi)
        .collect())
}

fn apply_one(w: &[f64], v: &[f64], mu: &[f64], spec: &DebiasSpec) -> Result<Vec<f64>> {
    match spec.operator {
        Operator::Subtraction => subtract(w, v),
        Operator::LinearProjection => linear_project(w, v),
        Operator::PartialProjection => partial_project(w, v, mu, spec.beta, spec.smoothing),
    }
}

/// Orthogonalized second direction: u_c projected off u_w, renormalized.
pub fn orthogonalize(u_w: &[f64], u_c: &[f64]) -> Result<Vec<f64>> {
    let cos = dot(u_w, u_c) / (norm(u_w) * norm(u_c));
    if cos.abs() > 1.0 - 1e-9 {
        return Err(Error::Degenerate(
            "warmth and competence directions are (anti)parallel; second direction undefined"
                .into(),
        ));
    }
    let c = dot(u_c, u_w);
    let mut out: Vec<f64> = u_c.iter().zip(u_w).map(|(a, b)| a - c * b).collect();
    let n = norm(&out);
    for x in &mut out {
        *x /= n;
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DebiasedSet {
    pub before: Vec<Vec<f64>>,
    pub after: Vec<Vec<f64>>,
    pub spec: DebiasSpec,
    pub subspace_provenance: String,
}

/// The two orthonormal directions actually applied (warmth first, then
/// competence orthogonalized against it), at base dimensionality d.
pub fn applied_directions(subspace: &BiasSubspace) -> Result<(Vec<f64>, Vec<f64>)> {
    let u_c_orth = orthogonalize(&subspace.u_warmth, &subspace.u_competence)?;
    Ok((subspace.u_warmth.clone(), u_c_orth))
}

fn debias_base(w: &[f64], subspace: &BiasSubspace, spec: &DebiasSpec) -> Result<Vec<f64>> {
    let (u_w, u_c) = applied_directions(subspace)?;
    let step1 = apply_one(w, &u_w, &subspace.mu_warmth, spec)?;
    apply_one(&step1, &u_c, &subspace.mu_competence, spec)
}

/// Debias a single vector of dimension d or 2d. Concatenated vectors are
/// handled per `spec.concat_mode`.
pub fn debias_vector(w: &[f64], subspace: &BiasSubspace, spec: &DebiasSpec) -> Result<Vec<f64>> {
    let d = subspace.dim();
    if w.len() == d {
        debias_base(w, subspace, spec)
    } else if w.len() == 2 * d {
        match spec.concat_mode {
            ConcatMode::Blockwise => {
                let mut out = debias_base(&w[..d], subspace, spec)?;
                out.extend(debias_base(&w[d..], subspace, spec)?);
                Ok(out)
            }
            ConcatMode::Replicated => {
                let u_w = replicate_direction(&subspace.u_warmth);
                let u_c = replicate_direction(&subspace.u_competence);
                let u_c = orthogonalize(&u_w, &u_c)?;
                // mu is a location, not a direction: block copy, no rescale
                let mu_w = crate::compound::concat_compound(&subspace.mu_warmth, &subspace.mu_warmth);
                let mu_c =
                    crate::compound::concat_compound(&subspace.mu_competence, &subspace.mu_competence);
                let step1 = apply_one(w, &u_w, &mu_w, spec)?;
                apply_one(&step1, &u_c, &mu_c, spec)
            }
        }
    } else {
        Err(Error::Argument(format!(
            "vector dim {} is neither d={d} nor 2d={}",
            w.len(),
            2 * d
        )))
    }
}

/// Apply the operator for warmth, then for the orthogonalized competence
/// direction, over a whole vector set.
pub fn apply_subspace(
    vectors: &[Vec<f64>],
    subspace: &BiasSubspace,
    spec: &DebiasSpec,
    provenance: impl Into<String>,
) -> Result<DebiasedSet> {
    spec.smoothing.validate()?;
    let after: Vec<Vec<f64>> = vectors
        .iter()
        .map(|w| debias_vector(w, subspace, spec))
        .collect::<Result<_>>()?;
    Ok(DebiasedSet {
        before: vectors.to_vec(),
        after,
        spec: spec.clone(),
        subspace_provenance: provenance.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::WordPair;

    fn unit(mut v: Vec<f64>) -> Vec<f64> {
        let n = norm(&v);
        for x in &mut v {
            *x /= n;
        }
        v
    }

    fn toy_subspace(d: usize) -> BiasSubspace {
        let mut u_w = vec![0.0; d];
        u_w[0] = 1.0;
        let mut u_c = vec![0.0; d];
        u_c[1] = 1.0;
        BiasSubspace {
            u_warmth: u_w,
            u_competence: u_c,
            mu_warmth: vec![0.0; d],
            mu_competence: vec![0.0; d],
            warmth_pairs: Vec::<WordPair>::new(),
            competence_pairs: Vec::new(),
            shortfall: false,
        }
    }

    #[test]
    fn subtract_examples() {
        assert_eq!(subtract(&[1.0, 1.0], &[1.0, 0.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(subtract(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(subtract(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn subtraction_is_constant_shift() {
        let v = unit(vec![0.3, -0.7, 0.2]);
        let ws = [vec![1.0, 2.0, 3.0], vec![-4.0, 0.0, 9.0]];
        for w in &ws {
            let w2 = subtract(w, &v).unwrap();
            for i in 0..3 {
                // bitwise-exact per component; the shift itself only up
                // to one rounding step
                assert_eq!(w2[i], w[i] - v[i]);
                assert!((w2[i] - w[i] + v[i]).abs() <= 1e-15 * w[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn linear_project_examples() {
        assert_eq!(
            linear_project(&[2.0, 3.0], &[1.0, 0.0]).unwrap(),
            vec![0.0, 3.0]
        );
        // parallel -> zero
        let out = linear_project(&[5.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!(out.iter().all(|x| x.abs() < 1e-12));
        // orthogonal -> unchanged
        let out = linear_project(&[0.0, 4.0], &[1.0, 0.0]).unwrap();
        assert!((out[1] - 4.0).abs() <= 1e-12 && out[0].abs() <= 1e-12);
    }

    #[test]
    fn lp_idempotent_and_norm_nonincreasing() {
        let v = unit(vec![0.2, 0.5, -0.8]);
        let w = vec![1.0, -2.0, 0.7];
        let w1 = linear_project(&w, &v).unwrap();
        let w2 = linear_project(&w1, &v).unwrap();
        for (a, b) in w1.iter().zip(&w2) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert!(norm(&w1) <= norm(&w) + 1e-12);
        assert!(dot(&w1, &v).abs() <= 1e-9);
    }

    #[test]
    fn partial_project_hand_case() {
        // w=[2,3], v=[1,0], mu=0, beta=1, f=1 -> r=[0,3], ||r||=3 -> [1,3]
        let out = partial_project(
            &[2.0, 3.0],
            &[1.0, 0.0],
            &[0.0, 0.0],
            1.0,
            Smoothing::ConstantOne,
        )
        .unwrap();
        assert!((out[0] - 1.0).abs() < 1e-12);
        assert!((out[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn pp_reduces_to_lp_when_beta_zero_mu_zero() {
        let v = unit(vec![0.6, -0.3, 0.1]);
        let w = vec![1.5, 0.2, -0.9];
        let pp = partial_project(&w, &v, &[0.0; 3], 0.0, Smoothing::default()).unwrap();
        let lp = linear_project(&w, &v).unwrap();
        for (a, b) in pp.iter().zip(&lp) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn pp_projection_identity() {
        // <w' - mu, v> = beta * f(||r(w)||)
        let v = unit(vec![0.1, 0.9, -0.4]);
        let mu = vec![0.3, -0.2, 0.5];
        let w = vec![2.0, 1.0, -1.0];
        let beta = 0.7;
        let f = Smoothing::Gaussian { sigma: 2.0 };
        let out = partial_project(&w, &v, &mu, beta, f).unwrap();
        let c = dot(&w, &v);
        let r: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a - c * b).collect();
        let lhs = dot(
            &out.iter().zip(&mu).map(|(a, b)| a - b).collect::<Vec<_>>(),
            &v,
        );
        assert!((lhs - beta * f.eval(norm(&r))).abs() <= 1e-9);
    }

    #[test]
    fn gaussian_sigma_must_be_positive() {
        assert!(matches!(
            partial_project(
                &[1.0, 0.0],
                &[1.0, 0.0],
                &[0.0, 0.0],
                1.0,
                Smoothing::Gaussian { sigma: 0.0 }
            ),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn apply_subspace_orthonormal_axes() {
        let sub = toy_subspace(3);
        let spec = DebiasSpec::new(Operator::LinearProjection);
        let set = apply_subspace(&[vec![5.0, 7.0, 2.0]], &sub, &spec, "toy").unwrap();
        let out = &set.after[0];
        assert!(out[0].abs() <= 1e-12);
        assert!(out[1].abs() <= 1e-12);
        assert!((out[2] - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn lp_residuals_vanish_on_both_directions() {
        let mut sub = toy_subspace(4);
        // non-orthogonal raw directions
        sub.u_competence = unit(vec![0.5, 0.8, 0.2, -0.1]);
        sub.u_warmth = unit(vec![0.9, 0.1, -0.3, 0.2]);
        let (u_w, u_c) = applied_directions(&sub).unwrap();
        assert!(dot(&u_w, &u_c).abs() <= 1e-12);
        assert!((norm(&u_c) - 1.0).abs() <= 1e-9);

        let spec = DebiasSpec::new(Operator::LinearProjection);
        let w = vec![1.0, -2.0, 3.0, 0.5];
        let out = debias_vector(&w, &sub, &spec).unwrap();
        assert!(dot(&out, &u_w).abs() <= 1e-9);
        assert!(dot(&out, &u_c).abs() <= 1e-9);
    }

    #[test]
    fn parallel_directions_are_degenerate() {
        let mut sub = toy_subspace(3);
        sub.u_competence = sub.u_warmth.clone();
        let spec = DebiasSpec::new(Operator::LinearProjection);
        assert!(matches!(
            debias_vector(&[1.0, 2.0, 3.0], &sub, &spec),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn blockwise_equals_concatenated_blocks() {
        let mut sub = toy_subspace(3);
        sub.u_warmth = unit(vec![0.4, -0.2, 0.88]);
        sub.u_competence = unit(vec![0.1, 0.95, 0.2]);
        sub.mu_warmth = vec![0.05, -0.02, 0.1];
        sub.mu_competence = vec![-0.07, 0.03, 0.0];
        for op in [
            Operator::Subtraction,
            Operator::LinearProjection,
            Operator::PartialProjection,
        ] {
            let spec = DebiasSpec::new(op);
            let w1 = vec![1.0, 2.0, -0.5];
            let w2 = vec![-0.3, 0.9, 4.0];
            let concat = crate::compound::concat_compound(&w1, &w2);
            let lhs = debias_vector(&concat, &sub, &spec).unwrap();
            let rhs = crate::compound::concat_compound(
                &debias_vector(&w1, &sub, &spec).unwrap(),
                &debias_vector(&w2, &sub, &spec).unwrap(),
            );
            assert_eq!(lhs, rhs, "operator {op}");
        }
    }

    #[test]
    fn replicated_mode_removes_lifted_components() {
        let mut sub = toy_subspace(3);
        sub.u_warmth = unit(vec![0.4, -0.2, 0.88]);
        sub.u_competence = unit(vec![0.1, 0.95, 0.2]);
        let mut spec = DebiasSpec::new(Operator::LinearProjection);
        spec.concat_mode = ConcatMode::Replicated;
        let w = vec![1.0, 2.0, -0.5, -0.3, 0.9, 4.0];
        let out = debias_vector(&w, &sub, &spec).unwrap();
        let u_w = replicate_direction(&sub.u_warmth);
        assert!(dot(&out, &u_w).abs() <= 1e-9);
    }
}
