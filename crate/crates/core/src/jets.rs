//! Nested forward-mode automatic differentiation.
//!
//! A [`Jet`] of depth `d` carries the value of a function at a seed point and,
//! for `d > 0`, one depth `d - 1` jet per active variable holding the first
//! partial derivative as a function in its own right. Repeated nesting gives
//! exact mixed partials up to order `d`.
//!
//! Two conventions keep the representation small:
//!
//! * An empty `partials` vector means "all first derivatives are zero".
//! * Constants carry [`CONSTANT_DEPTH`] and are exact to every order, so they
//!   combine with jets of any depth. Any other pair of jets combines at the
//!   smaller of their two depths.
//!
//! Mixed partials are read through [`Jet::extract`], which canonicalises the
//! differentiation order (ascending variable index) before walking the nest.
//! `∂²f/∂x∂y` and `∂²f/∂y∂x` therefore read the same stored number and are
//! bit-equal by construction.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

use crate::scalar::Scalar;

/// Depth marker for constants.
pub const CONSTANT_DEPTH: u32 = u32::MAX;

/// Default differentiation depth.
pub const DEFAULT_DEPTH: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("expected {expected} coordinates, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("derivative of order {order} requested from a jet of depth {depth}")]
    OrderExceedsDepth { order: usize, depth: usize },
    #[error("multi-index has {found} entries but the jet has {expected} variables")]
    IndexArity { expected: usize, found: usize },
    #[error("{op}: argument {value} outside the domain")]
    Domain { op: &'static str, value: f64 },
    #[error("duplicate active variable `{0}`")]
    DuplicateVariable(String),
}

#[derive(Clone, PartialEq)]
pub struct Jet {
    value: f64,
    depth: u32,
    partials: Vec<Jet>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.partials.is_empty() {
            write!(f, "Jet({}", self.value)?;
        } else {
            write!(f, "Jet({}, {:?}", self.value, self.partials)?;
        }
        match self.depth() {
            Some(d) => write!(f, " @{d})"),
            None => write!(f, " const)"),
        }
    }
}

/// Depth and active variables for seeding.
#[derive(Debug, Clone, PartialEq)]
pub struct JetConfig {
    pub depth: usize,
    pub vars: Vec<String>,
}

impl JetConfig {
    pub fn new<S: Into<String>>(
        depth: usize,
        vars: impl IntoIterator<Item = S>,
    ) -> Result<Self, JetError> {
        let vars: Vec<String> = vars.into_iter().map(Into::into).collect();
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(JetError::DuplicateVariable(v.clone()));
            }
        }
        Ok(Self { depth, vars })
    }

    pub fn with_vars<S: Into<String>>(vars: impl IntoIterator<Item = S>) -> Result<Self, JetError> {
        Self::new(DEFAULT_DEPTH, vars)
    }
}

/// One jet per active variable: value `point[i]`, unit derivative in
/// variable `i`, zero in the others, nested to `config.depth`.
pub fn seed(config: &JetConfig, point: &[f64]) -> Result<Vec<Jet>, JetError> {
    if point.len() != config.vars.len() {
        return Err(JetError::LengthMismatch {
            expected: config.vars.len(),
            found: point.len(),
        });
    }
    Ok(seed_point(point, config.depth))
}

/// Seeds every coordinate of `point` as an active variable.
pub fn seed_point(point: &[f64], depth: usize) -> Vec<Jet> {
    let n = point.len();
    point
        .iter()
        .enumerate()
        .map(|(i, &x)| Jet::variable(x, i, n, depth))
        .collect()
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        Jet {
            value,
            depth: CONSTANT_DEPTH,
            partials: Vec::new(),
        }
    }

    /// A value with vanishing derivatives, known to order `depth`.
    pub fn flat(value: f64, depth: usize) -> Self {
        Jet {
            value,
            depth: depth as u32,
            partials: Vec::new(),
        }
    }

    pub fn variable(value: f64, index: usize, nvars: usize, depth: usize) -> Self {
        if depth == 0 {
            return Jet::flat(value, 0);
        }
        let partials = (0..nvars)
            .map(|j| Jet::flat(if j == index { 1.0 } else { 0.0 }, depth - 1))
            .collect();
        Jet {
            value,
            depth: depth as u32,
            partials,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// `None` for constants.
    pub fn depth(&self) -> Option<usize> {
        (self.depth != CONSTANT_DEPTH).then_some(self.depth as usize)
    }

    pub fn is_constant(&self) -> bool {
        self.depth == CONSTANT_DEPTH
    }

    /// First partial in variable `j`, as a jet one level shallower.
    pub fn partial(&self, j: usize) -> Jet {
        match self.partials.get(j) {
            Some(p) => p.clone(),
            None => self.zero_partial(),
        }
    }

    fn zero_partial(&self) -> Jet {
        if self.is_constant() {
            Jet::constant(0.0)
        } else {
            Jet::flat(0.0, (self.depth as usize).saturating_sub(1))
        }
    }

    /// Drops derivative information above order `depth`.
    pub fn truncate(&self, depth: usize) -> Jet {
        if self.depth as usize <= depth && !self.is_constant() {
            return self.clone();
        }
        if self.is_constant() {
            return self.clone();
        }
        if depth == 0 {
            return Jet::flat(self.value, 0);
        }
        Jet {
            value: self.value,
            depth: depth as u32,
            partials: self
                .partials
                .iter()
                .map(|p| p.truncate(depth - 1))
                .collect(),
        }
    }

    /// The raw mixed partial `∂^|μ| f / ∂x_0^μ_0 ∂x_1^μ_1 ...` at the seed
    /// point, where `counts[i] = μ_i`. This is the derivative itself, not a
    /// Taylor coefficient (no factorial division).
    pub fn extract(&self, counts: &[usize]) -> Result<f64, JetError> {
        let nvars = self.partials.len();
        if nvars > 0 && counts.len() != nvars {
            return Err(JetError::IndexArity {
                expected: nvars,
                found: counts.len(),
            });
        }
        let path: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(i, c))
            .collect();
        self.extract_path(&path)
    }

    /// Mixed partial along a list of variable indices, in any order.
    pub fn extract_path(&self, indices: &[usize]) -> Result<f64, JetError> {
        if let Some(d) = self.depth() {
            if indices.len() > d {
                return Err(JetError::OrderExceedsDepth {
                    order: indices.len(),
                    depth: d,
                });
            }
        }
        let mut path = indices.to_vec();
        path.sort_unstable();
        let mut cur = self;
        for &i in &path {
            match cur.partials.get(i) {
                Some(p) => cur = p,
                None => return Ok(0.0),
            }
        }
        Ok(cur.value)
    }

    fn combine_depth(&self, other: &Jet) -> u32 {
        self.depth.min(other.depth)
    }

    fn add_ref(&self, other: &Jet) -> Jet {
        self.lin_comb(1.0, other, 1.0)
    }

    fn sub_ref(&self, other: &Jet) -> Jet {
        self.lin_comb(1.0, other, -1.0)
    }

    /// `a * self + b * other`.
    fn lin_comb(&self, a: f64, other: &Jet, b: f64) -> Jet {
        let depth = self.combine_depth(other);
        let value = a * self.value + b * other.value;
        if depth == 0 || (self.partials.is_empty() && other.partials.is_empty()) {
            return Jet {
                value,
                depth,
                partials: Vec::new(),
            };
        }
        let inner = depth.saturating_sub(1) as usize;
        let partials = match (self.partials.is_empty(), other.partials.is_empty()) {
            (false, true) => self
                .partials
                .iter()
                .map(|p| p.scale_trunc(a, inner))
                .collect(),
            (true, false) => other
                .partials
                .iter()
                .map(|p| p.scale_trunc(b, inner))
                .collect(),
            _ => {
                debug_assert_eq!(self.partials.len(), other.partials.len());
                self.partials
                    .iter()
                    .zip(&other.partials)
                    .map(|(p, q)| p.lin_comb(a, q, b))
                    .collect()
            }
        };
        Jet {
            value,
            depth,
            partials,
        }
    }

    fn scale_trunc(&self, c: f64, depth: usize) -> Jet {
        let depth = if self.is_constant() {
            CONSTANT_DEPTH
        } else {
            (self.depth as usize).min(depth) as u32
        };
        let partials = if depth == 0 {
            Vec::new()
        } else {
            let inner = depth.saturating_sub(1) as usize;
            self.partials
                .iter()
                .map(|p| p.scale_trunc(c, inner))
                .collect()
        };
        Jet {
            value: c * self.value,
            depth,
            partials,
        }
    }

    fn mul_ref(&self, other: &Jet) -> Jet {
        if self.is_constant() && self.partials.is_empty() {
            return other.scale_trunc(self.value, usize::MAX);
        }
        if other.is_constant() && other.partials.is_empty() {
            return self.scale_trunc(other.value, usize::MAX);
        }
        let depth = self.combine_depth(other);
        let value = self.value * other.value;
        if depth == 0 || (self.partials.is_empty() && other.partials.is_empty()) {
            return Jet {
                value,
                depth,
                partials: Vec::new(),
            };
        }
        let inner = depth as usize - 1;
        let a = self.truncate(inner);
        let b = other.truncate(inner);
        let n = self.partials.len().max(other.partials.len());
        let partials = (0..n)
            .map(|i| {
                let left = self.partials.get(i).map(|p| p.mul_ref(&b));
                let right = other.partials.get(i).map(|q| a.mul_ref(q));
                match (left, right) {
                    (Some(l), Some(r)) => l.add_ref(&r),
                    (Some(l), None) => l,
                    (None, Some(r)) => r,
                    (None, None) => Jet::flat(0.0, inner),
                }
            })
            .collect();
        Jet {
            value,
            depth,
            partials,
        }
    }

    /// Applies a scalar function given its value at the seed and its
    /// derivative as a jet-valued function of the (truncated) argument.
    fn chain(&self, value: f64, derivative: impl FnOnce(&Jet) -> Jet) -> Jet {
        if self.depth == 0 || self.partials.is_empty() {
            return Jet {
                value,
                depth: self.depth,
                partials: Vec::new(),
            };
        }
        let inner = self.truncate(self.depth as usize - 1);
        let d = derivative(&inner);
        let partials = self.partials.iter().map(|p| d.mul_ref(p)).collect();
        Jet {
            value,
            depth: self.depth,
            partials,
        }
    }

    pub fn recip(&self) -> Jet {
        self.chain(1.0 / self.value, |t| {
            let r = t.recip();
            -(r.mul_ref(&r))
        })
    }

    pub fn sin(&self) -> Jet {
        self.chain(self.value.sin(), |t| t.cos())
    }

    pub fn cos(&self) -> Jet {
        self.chain(self.value.cos(), |t| -t.sin())
    }

    pub fn tan(&self) -> Jet {
        self.chain(self.value.tan(), |t| t.cos().powi(-2))
    }

    pub fn exp(&self) -> Jet {
        self.chain(self.value.exp(), |t| t.exp())
    }

    pub fn ln(&self) -> Jet {
        self.chain(self.value.ln(), |t| t.recip())
    }

    pub fn sqrt(&self) -> Jet {
        self.chain(self.value.sqrt(), |t| {
            t.sqrt().recip().scale_trunc(0.5, usize::MAX)
        })
    }

    /// `|x|`, differentiated as `sign(x)`; at exactly zero the right-hand
    /// derivative is used.
    pub fn abs(&self) -> Jet {
        let sign = if self.value < 0.0 { -1.0 } else { 1.0 };
        self.chain(self.value.abs(), |_| Jet::constant(sign))
    }

    pub fn powi(&self, n: i32) -> Jet {
        match n {
            0 => Jet::constant(1.0),
            1 => self.clone(),
            _ => self.chain(self.value.powi(n), |t| {
                t.powi(n - 1).scale_trunc(n as f64, usize::MAX)
            }),
        }
    }

    pub fn checked_recip(&self) -> Result<Jet, JetError> {
        if self.value == 0.0 {
            return Err(JetError::Domain {
                op: "div",
                value: self.value,
            });
        }
        Ok(self.recip())
    }

    pub fn checked_ln(&self) -> Result<Jet, JetError> {
        if self.value <= 0.0 {
            return Err(JetError::Domain {
                op: "ln",
                value: self.value,
            });
        }
        Ok(self.ln())
    }

    pub fn checked_sqrt(&self) -> Result<Jet, JetError> {
        let ok = if self.depth == 0 || self.partials.is_empty() {
            self.value >= 0.0
        } else {
            self.value > 0.0
        };
        if !ok {
            return Err(JetError::Domain {
                op: "sqrt",
                value: self.value,
            });
        }
        Ok(self.sqrt())
    }
}

macro_rules! jet_binop {
    ($tr:ident, $method:ident, $imp:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$imp(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                self.$imp(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$imp(&rhs)
            }
        }
        impl $tr<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                self.$imp(rhs)
            }
        }
        impl $tr<f64> for Jet {
            type Output = Jet;
            fn $method(self, rhs: f64) -> Jet {
                self.$imp(&Jet::constant(rhs))
            }
        }
        impl $tr<f64> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: f64) -> Jet {
                self.$imp(&Jet::constant(rhs))
            }
        }
    };
}

impl Jet {
    fn div_ref(&self, other: &Jet) -> Jet {
        if other.is_constant() && other.partials.is_empty() {
            return self.scale_trunc(1.0 / other.value, usize::MAX);
        }
        self.mul_ref(&other.recip())
    }
}

jet_binop!(Add, add, add_ref);
jet_binop!(Sub, sub, sub_ref);
jet_binop!(Mul, mul, mul_ref);
jet_binop!(Div, div, div_ref);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale_trunc(-1.0, usize::MAX)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale_trunc(-1.0, usize::MAX)
    }
}

impl Scalar for Jet {
    fn constant(c: f64) -> Self {
        Jet::constant(c)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn sin(&self) -> Self {
        Jet::sin(self)
    }
    fn cos(&self) -> Self {
        Jet::cos(self)
    }
    fn tan(&self) -> Self {
        Jet::tan(self)
    }
    fn exp(&self) -> Self {
        Jet::exp(self)
    }
    fn ln(&self) -> Self {
        Jet::ln(self)
    }
    fn sqrt(&self) -> Self {
        Jet::sqrt(self)
    }
    fn abs(&self) -> Self {
        Jet::abs(self)
    }
    fn powi(&self, n: i32) -> Self {
        Jet::powi(self, n)
    }
    fn scale(&self, c: f64) -> Self {
        self.scale_trunc(c, usize::MAX)
    }
    fn is_exact_zero(&self) -> bool {
        self.value == 0.0 && self.partials.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(point: &[f64], depth: usize) -> Vec<Jet> {
        seed_point(point, depth)
    }

    #[test]
    fn seed_depth_one() {
        let cfg = JetConfig::new(1, ["x"]).unwrap();
        let x = &seed(&cfg, &[2.0]).unwrap()[0];
        assert_eq!(x.value(), 2.0);
        assert_eq!(x.extract(&[1]).unwrap(), 1.0);
    }

    #[test]
    fn seed_mixed_partial_of_variable_is_zero() {
        let cfg = JetConfig::new(2, ["x", "y"]).unwrap();
        let v = seed(&cfg, &[0.0, 1.0]).unwrap();
        assert_eq!(v[0].extract(&[1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn seed_length_mismatch() {
        let cfg = JetConfig::new(2, ["x", "y"]).unwrap();
        assert!(matches!(
            seed(&cfg, &[1.0]),
            Err(JetError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn duplicate_variables_rejected() {
        assert!(JetConfig::new(1, ["x", "x"]).is_err());
    }

    #[test]
    fn square_at_three() {
        let x = &vars(&[3.0], 2)[0];
        let f = x * x;
        assert_eq!(f.value(), 9.0);
        assert_eq!(f.extract(&[1]).unwrap(), 6.0);
        assert_eq!(f.extract(&[2]).unwrap(), 2.0);
    }

    #[test]
    fn sin_at_zero() {
        let x = &vars(&[0.0], 1)[0];
        let f = x.sin();
        assert_eq!(f.value(), 0.0);
        assert_eq!(f.extract(&[1]).unwrap(), 1.0);
    }

    #[test]
    fn exp_two_x_second_derivative() {
        let x = &vars(&[0.0], 2)[0];
        let f = (x * 2.0).exp();
        assert_eq!(f.extract(&[2]).unwrap(), 4.0);
    }

    #[test]
    fn product_mixed_partial() {
        let v = vars(&[0.3, -1.2], 2);
        let f = &v[0] * &v[1];
        assert_eq!(f.extract(&[1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn extract_constant() {
        assert_eq!(Jet::constant(5.0).extract(&[]).unwrap(), 5.0);
        assert_eq!(Jet::constant(5.0).extract_path(&[0, 0, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn extract_x_y_squared() {
        let v = vars(&[3.0, 2.0], 2);
        let f = &v[0] * &v[1].powi(2);
        assert_eq!(f.extract(&[1, 1]).unwrap(), 4.0);
    }

    #[test]
    fn third_derivative_of_sin() {
        let x = &vars(&[0.0], 3)[0];
        assert_eq!(x.sin().extract(&[3]).unwrap(), -1.0);
    }

    #[test]
    fn order_exceeding_depth_is_error() {
        let x = &vars(&[1.0], 1)[0];
        assert!(matches!(
            (x * x).extract(&[2]),
            Err(JetError::OrderExceedsDepth { order: 2, depth: 1 })
        ));
    }

    #[test]
    fn mixed_depths_combine_at_the_shallower() {
        let deep = &vars(&[1.0], 3)[0];
        let shallow = &vars(&[1.0], 1)[0];
        let f = deep * shallow;
        assert_eq!(f.depth(), Some(1));
        assert_eq!(f.extract(&[1]).unwrap(), 2.0);
    }

    #[test]
    fn domain_errors_name_the_operation() {
        let x = &vars(&[-1.0], 1)[0];
        assert_eq!(
            x.checked_ln().unwrap_err(),
            JetError::Domain {
                op: "ln",
                value: -1.0
            }
        );
        assert!(matches!(
            x.checked_sqrt(),
            Err(JetError::Domain { op: "sqrt", .. })
        ));
        let z = Jet::flat(0.0, 1);
        assert!(matches!(
            z.checked_recip(),
            Err(JetError::Domain { op: "div", .. })
        ));
    }

    #[test]
    fn mixed_partials_are_bit_equal() {
        let v = vars(&[0.7, -0.4, 1.3], 3);
        let f = (&v[0] * &v[1]).sin() * (&v[2] / (&v[0] + 2.0)).exp() + v[1].powi(3) * v[2].cos();
        for i in 0..3 {
            for j in 0..3 {
                let a = f.extract_path(&[i, j]).unwrap();
                let b = f.extract_path(&[j, i]).unwrap();
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
