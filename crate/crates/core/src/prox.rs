//! Activation surrogates as projections onto closed intervals, and the
//! prox-composition rule `prox_{φ + ι_Ω} = P_Ω ∘ prox_φ` applied
//! coordinatewise.

use std::fmt;
use std::str::FromStr;

use crate::numerics::Matrix;

/// Closed interval `[lo, hi]`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    #[inline]
    pub fn clamp(&self, x: f64) -> f64 {
        // max/min rather than f64::clamp, which panics on infinite bounds in debug builds
        x.max(self.lo).min(self.hi)
    }

    #[inline]
    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    pub fn is_unbounded(&self) -> bool {
        self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    /// ReLU, the projection onto `[0, ∞)`.
    ReluProjection,
    /// `max{-1, min{x, 1}}`.
    HardTanh,
    /// `0.25 max{-2, min{x, 2}} + 0.5`, with feasible set `[0, 1]`.
    HardSigmoid,
    Identity,
}

impl ActivationKind {
    /// The per-coordinate feasible set `S` of activations of this kind.
    pub fn interval(self) -> Interval {
        match self {
            ActivationKind::ReluProjection => Interval { lo: 0.0, hi: f64::INFINITY },
            ActivationKind::HardTanh => Interval { lo: -1.0, hi: 1.0 },
            ActivationKind::HardSigmoid => Interval { lo: 0.0, hi: 1.0 },
            ActivationKind::Identity => Interval::REAL_LINE,
        }
    }

    /// Scalar activation `h(z)`.
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            ActivationKind::HardSigmoid => 0.25 * z.max(-2.0).min(2.0) + 0.5,
            _ => self.interval().clamp(z),
        }
    }

    /// Almost-everywhere derivative of [`apply`](Self::apply); zero at the kinks.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            ActivationKind::ReluProjection => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::HardTanh => {
                if z > -1.0 && z < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::HardSigmoid => {
                if z > -2.0 && z < 2.0 {
                    0.25
                } else {
                    0.0
                }
            }
            ActivationKind::Identity => 1.0,
        }
    }

    /// Points where `apply` is not differentiable.
    pub fn kinks(self) -> &'static [f64] {
        match self {
            ActivationKind::ReluProjection => &[0.0],
            ActivationKind::HardTanh => &[-1.0, 1.0],
            ActivationKind::HardSigmoid => &[-2.0, 2.0],
            ActivationKind::Identity => &[],
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ActivationKind::ReluProjection => "relu",
            ActivationKind::HardTanh => "hardtanh",
            ActivationKind::HardSigmoid => "hardsigmoid",
            ActivationKind::Identity => "identity",
        };
        f.write_str(name)
    }
}

impl FromStr for ActivationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(ActivationKind::ReluProjection),
            "hardtanh" | "hard-tanh" => Ok(ActivationKind::HardTanh),
            "hardsigmoid" | "hard-sigmoid" => Ok(ActivationKind::HardSigmoid),
            "identity" | "linear" => Ok(ActivationKind::Identity),
            other => Err(format!("unknown activation `{other}`")),
        }
    }
}

/// Euclidean projection of every entry onto the feasible interval of `kind`.
///
/// This is the projection used by the activation block update. For the
/// three clamp-type kinds it coincides with [`forward_activation`]; for
/// `HardSigmoid` the activation is an affine map of a clamp and differs.
pub fn project(kind: ActivationKind, x: &Matrix) -> Matrix {
    let iv = kind.interval();
    x.mapv(|v| iv.clamp(v))
}

pub fn project_in_place(kind: ActivationKind, x: &mut Matrix) {
    let iv = kind.interval();
    x.mapv_inplace(|v| iv.clamp(v));
}

/// Activation used by forward passes.
pub fn forward_activation(kind: ActivationKind, z: &Matrix) -> Matrix {
    z.mapv(|v| kind.apply(v))
}

/// `P_[lo,hi] ∘ prox_φ`, coordinatewise.
pub fn prox_composed<F>(scalar_prox: F, interval: Interval, x: &Matrix) -> Matrix
where
    F: Fn(f64) -> f64,
{
    x.mapv(|v| interval.clamp(scalar_prox(v)))
}

/// Prox of `λ|·|`.
pub fn soft_threshold(lambda: f64) -> impl Fn(f64) -> f64 {
    move |x| x.signum() * (x.abs() - lambda).max(0.0)
}

/// True if every entry lies in the kind's interval up to `tol`.
pub fn is_feasible(kind: ActivationKind, x: &Matrix, tol: f64) -> bool {
    let iv = kind.interval();
    x.iter().all(|&v| iv.contains(v, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const SURROGATES: [ActivationKind; 3] =
        [ActivationKind::ReluProjection, ActivationKind::HardTanh, ActivationKind::HardSigmoid];

    #[test]
    fn relu_projection() {
        let x = array![[-1.0, 2.0]];
        assert_eq!(project(ActivationKind::ReluProjection, &x), array![[0.0, 2.0]]);
        assert_eq!(forward_activation(ActivationKind::ReluProjection, &x), array![[0.0, 2.0]]);
    }

    #[test]
    fn hard_tanh() {
        let x = array![[1.5, -3.0, 0.3]];
        assert_eq!(project(ActivationKind::HardTanh, &x), array![[1.0, -1.0, 0.3]]);
        assert_eq!(forward_activation(ActivationKind::HardTanh, &x), array![[1.0, -1.0, 0.3]]);
    }

    #[test]
    fn hard_sigmoid_activation() {
        let x = array![[0.0, 4.0, -4.0, 1.0]];
        assert_eq!(
            forward_activation(ActivationKind::HardSigmoid, &x),
            array![[0.5, 1.0, 0.0, 0.75]]
        );
        // The feasible-set projection is a plain clamp to [0, 1].
        assert_eq!(project(ActivationKind::HardSigmoid, &x), array![[0.0, 1.0, 0.0, 1.0]]);
    }

    #[test]
    fn identity_is_passthrough() {
        let x = array![[-7.5, 1e300, 0.0]];
        assert_eq!(forward_activation(ActivationKind::Identity, &x), x);
        assert_eq!(project(ActivationKind::Identity, &x), x);
    }

    #[test]
    fn prox_composition_cases() {
        let relu = ActivationKind::ReluProjection.interval();
        let x = array![[-1.0, 2.0, 0.0]];
        assert_eq!(prox_composed(|v| v, relu, &x), project(ActivationKind::ReluProjection, &x));
        assert_eq!(prox_composed(|v| v, Interval::new(-1.0, 1.0), &array![[5.0]]), array![[1.0]]);
        let out = prox_composed(soft_threshold(1.0), relu, &array![[3.0, -3.0]]);
        assert_eq!(out, array![[2.0, 0.0]]);
    }

    #[test]
    fn soft_threshold_then_clamp_matches_grid_search() {
        // argmin_y |y| + ½(y - x)² + ι_[0,∞)(y) by brute force on a grid
        for &x in &[3.0, -3.0, 0.4, 1.7, -0.2] {
            let expected = prox_composed(soft_threshold(1.0), Interval::new(0.0, f64::INFINITY), &array![[x]])[[0, 0]];
            let mut best = (f64::INFINITY, 0.0);
            for k in 0..=100_000 {
                let y = k as f64 * 1e-4;
                let f = y.abs() + 0.5 * (y - x).powi(2);
                if f < best.0 {
                    best = (f, y);
                }
            }
            assert!((best.1 - expected).abs() <= 1e-4, "x={x}: {} vs {expected}", best.1);
        }
    }

    #[test]
    fn hard_sigmoid_two_closed_forms_agree() {
        for k in -400..=400 {
            let x = k as f64 * 0.0125;
            let a = ActivationKind::HardSigmoid.apply(x);
            let b = 0.0f64.max((0.25 * x + 0.5).min(1.0));
            assert!((a - b).abs() <= 1e-15, "x={x}");
        }
    }

    #[test]
    fn derivatives_vanish_at_kinks() {
        for kind in SURROGATES {
            for &k in kind.kinks() {
                assert_eq!(kind.derivative(k), 0.0);
            }
        }
        assert_eq!(ActivationKind::HardSigmoid.derivative(0.3), 0.25);
    }

    #[test]
    fn parse_and_display_round_trip() {
        for kind in SURROGATES.iter().copied().chain([ActivationKind::Identity]) {
            assert_eq!(kind.to_string().parse::<ActivationKind>().unwrap(), kind);
        }
        assert!("softplus".parse::<ActivationKind>().is_err());
    }
}
