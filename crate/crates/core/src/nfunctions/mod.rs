//! Shifted N-functions of `φ(t) = tᵖ/p` and the maps `A`, `V`.
//!
//! `φ_a(t) = ∫₀ᵗ φ'(a∨s)/(a∨s) s ds` has the closed form
//! `a^{p-2} t²/2` for `t ≤ a` and `a^p/2 + (tᵖ - aᵖ)/p` for `t > a`,
//! with `φ_a'(t) = (a∨t)^{p-2} t` and conjugate `(φ_a)* = (φ*)_{a^{p-1}}`.

mod props;

pub use props::{
    conjugate_numeric, hammer_sweep, shift_lemma_checks, HammerSweep, PropertyRow, ShiftCheckOptions,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::weights::spd::SpdMatrix;

/// `φ(t) = tᵖ/p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerPhi {
    p: f64,
}

impl PowerPhi {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::invalid(format!("exponent p must lie in (1, inf), got {p}")));
        }
        Ok(PowerPhi { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `p' = p/(p-1)`.
    pub fn conjugate_exponent(&self) -> f64 {
        conjugate_exponent(self.p)
    }

    pub fn phi(&self, t: f64) -> f64 {
        t.powf(self.p) / self.p
    }

    pub fn dphi(&self, t: f64) -> f64 {
        t.powf(self.p - 1.0)
    }

    /// `φ*(t) = t^{p'}/p'`.
    pub fn conjugate(&self) -> PowerPhi {
        PowerPhi {
            p: self.conjugate_exponent(),
        }
    }

    pub fn shifted(&self, a: f64) -> Result<ShiftedPhi> {
        ShiftedPhi::new(*self, a)
    }
}

pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

/// `φ_a` for a shift `a ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShiftedPhi {
    base: PowerPhi,
    a: f64,
}

impl ShiftedPhi {
    pub fn new(base: PowerPhi, a: f64) -> Result<Self> {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::invalid(format!("shift must be nonnegative, got {a}")));
        }
        Ok(ShiftedPhi { base, a })
    }

    pub fn p(&self) -> f64 {
        self.base.p
    }

    pub fn shift(&self) -> f64 {
        self.a
    }

    pub fn phi(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("phi_a needs t >= 0, got {t}")));
        }
        Ok(self.eval(t))
    }

    /// [`ShiftedPhi::phi`] without the sign check.
    pub(crate) fn eval(&self, t: f64) -> f64 {
        let (p, a) = (self.base.p, self.a);
        if t == 0.0 {
            0.0
        } else if t <= a {
            a.powf(p - 2.0) * t * t / 2.0
        } else {
            a.powf(p) / 2.0 + (t.powf(p) - a.powf(p)) / p
        }
    }

    /// `φ_a'(t) = (a∨t)^{p-2} t`.
    pub fn dphi(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        self.a.max(t).powf(self.base.p - 2.0) * t
    }

    /// `(φ_a)* = (φ*)_{φ'(a)}`.
    pub fn conjugate(&self) -> ShiftedPhi {
        ShiftedPhi {
            base: self.base.conjugate(),
            a: self.base.dphi(self.a),
        }
    }
}

/// `A(ξ) = |ξ|^{p-2} ξ`, with `A(0) = 0`.
pub fn a_map(p: f64, xi: &[f64]) -> Vec<f64> {
    scale_by_norm(xi, p - 2.0)
}

/// `V(ξ) = |ξ|^{(p-2)/2} ξ`, with `V(0) = 0`.
pub fn v_map(p: f64, xi: &[f64]) -> Vec<f64> {
    scale_by_norm(xi, 0.5 * (p - 2.0))
}

fn scale_by_norm(xi: &[f64], power: f64) -> Vec<f64> {
    let n = norm(xi);
    if n == 0.0 {
        return vec![0.0; xi.len()];
    }
    let s = n.powf(power);
    xi.iter().map(|v| v * s).collect()
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedMaps {
    /// `𝒜(ξ) = M A(Mξ)`
    pub cal_a: Vec<f64>,
    /// `𝒱(ξ) = V(Mξ)`
    pub cal_v: Vec<f64>,
}

pub fn weighted_maps(m: &SpdMatrix, p: f64, xi: &[f64]) -> WeightedMaps {
    let mxi = m.mul_vec(xi);
    WeightedMaps {
        cal_a: m.mul_vec(&a_map(p, &mxi)),
        cal_v: v_map(p, &mxi),
    }
}

/// The four hammer-lemma quantities for a pair `(P, Q)`, in the order
/// `(A(P)-A(Q))·(P-Q)`, `|V(P)-V(Q)|²`, `p φ_{|Q|}(|P-Q|)`,
/// `p' (φ*)_{|A(Q)|}(|A(P)-A(Q)|)`. The factors `p`, `p'` make all four
/// coincide with `|P-Q|²` at `p = 2`.
#[derive(Clone, Debug, Serialize)]
pub struct HammerReport {
    pub quantities: [f64; 4],
    /// `quantities[i] / quantities[j]` for `i < j`, lexicographic.
    pub ratios: [f64; 6],
}

impl HammerReport {
    /// Smallest `c` with every ratio in `[1/c, c]`.
    pub fn constant(&self) -> f64 {
        self.ratios.iter().fold(1.0_f64, |c, r| c.max(*r).max(1.0 / r))
    }
}

pub const HAMMER_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

pub fn hammer_check(p: f64, pv: &[f64], qv: &[f64]) -> Result<HammerReport> {
    let phi = PowerPhi::new(p)?;
    if pv.len() != qv.len() {
        return Err(Error::invalid("hammer check needs vectors of equal length"));
    }
    if norm(pv) == 0.0 && norm(qv) == 0.0 {
        return Err(Error::invalid("hammer check needs (P, Q) != (0, 0)"));
    }
    let ap = a_map(p, pv);
    let aq = a_map(p, qv);
    let vp = v_map(p, pv);
    let vq = v_map(p, qv);
    let d: Vec<f64> = pv.iter().zip(qv).map(|(a, b)| a - b).collect();
    let da: Vec<f64> = ap.iter().zip(&aq).map(|(a, b)| a - b).collect();
    let dv: Vec<f64> = vp.iter().zip(&vq).map(|(a, b)| a - b).collect();
    let pc = phi.conjugate_exponent();
    let q = [
        dot(&da, &d),
        dot(&dv, &dv),
        p * phi.shifted(norm(qv))?.eval(norm(&d)),
        pc * phi.conjugate().shifted(norm(&aq))?.eval(norm(&da)),
    ];
    let mut ratios = [0.0; 6];
    for (k, (i, j)) in HAMMER_PAIRS.iter().enumerate() {
        ratios[k] = q[*i] / q[*j];
    }
    Ok(HammerReport { quantities: q, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    fn sp(p: f64, a: f64) -> ShiftedPhi {
        PowerPhi::new(p).unwrap().shifted(a).unwrap()
    }

    /// Composite Gauss-Legendre of the defining integral.
    fn phi_a_oracle(p: f64, a: f64, t: f64) -> f64 {
        let f = |s: f64| a.max(s).powf(p - 2.0) * s;
        let (x, w) = (super::props::GL_NODES, super::props::GL_WEIGHTS);
        let mut acc = 0.0;
        let mut pieces = vec![(0.0, t.min(a))];
        if t > a {
            pieces.push((a, t));
        }
        for (lo, hi) in pieces {
            let k = 64;
            let h = (hi - lo) / k as f64;
            for i in 0..k {
                let m = lo + h * (i as f64 + 0.5);
                for (xj, wj) in x.iter().zip(&w) {
                    acc += 0.5 * h * wj * f(m + 0.5 * h * xj);
                }
            }
        }
        acc
    }

    #[test]
    fn phi_a_examples() {
        for a in [0.0, 0.3, 2.0] {
            for t in [0.0, 0.1, 1.7] {
                assert_relative_eq!(sp(2.0, a).phi(t).unwrap(), t * t / 2.0, max_relative = 1e-14);
            }
        }
        assert_relative_eq!(sp(3.0, 1.0).phi(2.0).unwrap(), 17.0 / 6.0, max_relative = 1e-14);
        assert_relative_eq!(sp(3.0, 2.0).phi(1.0).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(phi_a_oracle(3.0, 1.0, 2.0), 17.0 / 6.0, max_relative = 1e-12);
        assert!(sp(3.0, 1.0).phi(-1.0).is_err());
        assert_eq!(sp(1.5, 0.0).phi(0.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_shift_is_phi() {
        let phi = PowerPhi::new(1.7).unwrap();
        assert_relative_eq!(sp(1.7, 0.0).phi(2.3).unwrap(), phi.phi(2.3), max_relative = 1e-14);
    }

    #[test]
    fn maps_examples() {
        assert_eq!(a_map(2.0, &[1.5, -2.0]), vec![1.5, -2.0]);
        assert_eq!(v_map(2.0, &[1.5, -2.0]), vec![1.5, -2.0]);
        assert_eq!(a_map(4.0, &[2.0, 0.0]), vec![8.0, 0.0]);
        assert_eq!(v_map(4.0, &[2.0, 0.0]), vec![4.0, 0.0]);
        assert_eq!(a_map(1.5, &[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn weighted_maps_examples() {
        let m = SpdMatrix::new(dmatrix![2.0, 0.5; 0.5, 1.0]).unwrap();
        let xi = [0.3, -0.7];
        let w = weighted_maps(&m, 2.0, &xi);
        let m2 = m.squared().mul_vec(&xi);
        for (a, b) in w.cal_a.iter().zip(&m2) {
            assert!((a - b).abs() < 1e-14);
        }
        let id = weighted_maps(&SpdMatrix::identity(2), 3.0, &xi);
        assert_eq!(id.cal_a, a_map(3.0, &xi));
        assert_eq!(id.cal_v, v_map(3.0, &xi));
    }

    #[test]
    fn hammer_examples() {
        let r = hammer_check(2.0, &[0.3, 1.2], &[-0.5, 0.1]).unwrap();
        for v in r.ratios {
            assert_relative_eq!(v, 1.0, max_relative = 1e-14);
        }
        let r = hammer_check(4.0, &[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_relative_eq!(r.quantities[0], 1.0);
        assert_relative_eq!(r.quantities[1], 1.0);
        assert_relative_eq!(r.ratios[0], 1.0);
        assert!(hammer_check(3.0, &[0.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn conjugate_of_shift() {
        let s = sp(3.0, 2.0).conjugate();
        assert_relative_eq!(s.p(), 1.5);
        assert_relative_eq!(s.shift(), 4.0);
    }

    proptest! {
        #[test]
        fn phi_a_matches_quadrature(p in 1.1f64..5.0, a in 0.0f64..3.0, t in 0.0f64..4.0) {
            let exact = sp(p, a).phi(t).unwrap();
            let oracle = phi_a_oracle(p, a, t);
            prop_assert!((exact - oracle).abs() <= 1e-9 * exact.max(1e-300));
        }

        #[test]
        fn a_and_v_identities(p in 1.05f64..6.0, x in -5.0f64..5.0, y in -5.0f64..5.0) {
            let xi = [x, y];
            let n = norm(&xi);
            let a = a_map(p, &xi);
            let v = v_map(p, &xi);
            prop_assert!((norm(&a) - n.powf(p - 1.0)).abs() <= 1e-12 * n.powf(p - 1.0).max(1.0));
            prop_assert!((dot(&v, &v) - n.powf(p)).abs() <= 1e-12 * n.powf(p).max(1.0));
            prop_assert!((dot(&a, &xi) - dot(&v, &v)).abs() <= 1e-12 * n.powf(p).max(1.0));
        }

        #[test]
        fn weighted_identity(p in 1.1f64..5.0, d0 in 0.2f64..3.0, d1 in 0.2f64..3.0, off in -0.1f64..0.1,
                             x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let m = SpdMatrix::new(dmatrix![d0, off; off, d1]).unwrap();
            let w = weighted_maps(&m, p, &[x, y]);
            let lhs = dot(&w.cal_a, &[x, y]);
            let rhs = dot(&w.cal_v, &w.cal_v);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn phi_a_increasing_and_convex(p in 1.1f64..5.0, a in 0.0f64..3.0, t in 0.01f64..4.0) {
            let f = sp(p, a);
            let h = 1e-3 * t;
            let (l, m, r) = (f.eval(t - h), f.eval(t), f.eval(t + h));
            prop_assert!(l < m && m < r);
            prop_assert!(l - 2.0 * m + r >= -1e-12 * m);
        }
    }
}
