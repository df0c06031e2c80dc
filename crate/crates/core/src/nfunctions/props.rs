//! Randomized property sweeps for the shifted N-function inequalities.
//!
//! Constants that are proven in closed form are used as is:
//!
//! * Young: `c_δ = δ^{-max(2,p')/min(2,p)}` for `δ ≤ 1`;
//! * removal of shift, primal form: `c = max(1, (p/2)^{p/2})`;
//! * removal of shift, conjugate form: `c = max(1, p'/2)`.
//!
//! The change-of-shift constant is calibrated on one half of the samples
//! and verified with a factor 2 margin on the other half.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{conjugate_exponent, dot, hammer_check, norm, v_map, PowerPhi, ShiftedPhi, HAMMER_PAIRS};
use crate::error::Result;

#[cfg(test)]
pub(crate) use crate::weights::quadrature::{GL6_NODES as GL_NODES, GL6_WEIGHTS as GL_WEIGHTS};

/// One line of a property sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyRow {
    pub p: f64,
    pub case: String,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub violations: usize,
    pub samples: usize,
}

#[derive(Clone, Debug)]
pub struct ShiftCheckOptions {
    pub tuples: usize,
    pub seed: u64,
    /// Fixed `δ ∈ (0, 1]`; sampled log-uniformly per tuple when `None`.
    pub delta: Option<f64>,
    /// Magnitudes are drawn from `exp(U(-range, range))`.
    pub log_range: f64,
}

impl Default for ShiftCheckOptions {
    fn default() -> Self {
        ShiftCheckOptions {
            tuples: 100_000,
            seed: 0,
            delta: None,
            log_range: 6.0,
        }
    }
}

const REL_SLACK: f64 = 1e-12;
const DUALITY_TOL: f64 = 1e-8;

struct Stat {
    case: &'static str,
    min: f64,
    max: f64,
    violations: usize,
    samples: usize,
}

impl Stat {
    fn new(case: &'static str) -> Self {
        Stat {
            case,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            violations: 0,
            samples: 0,
        }
    }

    fn ratio(&mut self, r: f64, violated: bool) {
        self.samples += 1;
        if r.is_finite() {
            self.min = self.min.min(r);
            self.max = self.max.max(r);
        }
        if violated || r.is_nan() {
            self.violations += 1;
        }
    }

    /// Records `lhs ≤ rhs`.
    fn leq(&mut self, lhs: f64, rhs: f64) {
        let violated = lhs > rhs * (1.0 + REL_SLACK) + f64::MIN_POSITIVE;
        let r = if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
        self.ratio(r, violated);
    }

    fn row(self, p: f64) -> PropertyRow {
        PropertyRow {
            p,
            case: self.case.to_string(),
            min_ratio: if self.samples == 0 { f64::NAN } else { self.min },
            max_ratio: if self.samples == 0 { f64::NAN } else { self.max },
            violations: self.violations,
            samples: self.samples,
        }
    }
}

/// Proven Young constant `c_δ` with `st ≤ c_δ (φ_a)*(s) + δ φ_a(t)`.
pub fn young_constant(p: f64, delta: f64) -> f64 {
    if delta >= 1.0 {
        1.0
    } else {
        delta.powf(-conjugate_exponent(p).max(2.0) / p.min(2.0))
    }
}

pub fn removal_shift_constant(p: f64) -> f64 {
    (0.5 * p).powf(0.5 * p).max(1.0)
}

pub fn removal_shift_conjugate_constant(p: f64) -> f64 {
    (0.5 * conjugate_exponent(p)).max(1.0)
}

/// `sup_{s ≥ 0} (ts - φ_a(s))` by golden-section search in `log s`.
pub fn conjugate_numeric(f: &ShiftedPhi, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let g = |u: f64| {
        let s = u.exp();
        t * s - f.eval(s)
    };
    // the maximizer solves φ_a'(s) = t and lies below this bound
    let upper = 2.0 * f.shift().max(t.powf(1.0 / (f.p() - 1.0)));
    let mut lo = upper.ln() - 80.0;
    let mut hi = upper.ln();
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut g1 = g(x1);
    let mut g2 = g(x2);
    for _ in 0..160 {
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + ratio * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - ratio * (hi - lo);
            g1 = g(x1);
        }
    }
    g1.max(g2).max(0.0)
}

fn log_uniform(rng: &mut ChaCha8Rng, range: f64) -> f64 {
    rng.random_range(-range..range).exp()
}

fn random_vector(rng: &mut ChaCha8Rng, range: f64) -> [f64; 2] {
    let s = log_uniform(rng, range);
    [rng.sample::<f64, _>(StandardNormal) * s, rng.sample::<f64, _>(StandardNormal) * s]
}

fn sweep_rng(seed: u64, p: f64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (p * 1000.0).round() as u64)
}

/// Removal of shift, Young, conjugate duality, `Δ₂`, convexity, the
/// equivalence `φ_a(t) ≍ (a∨t)^{p-2}t²`, the two-branch equivalence of
/// `φ_a(λa)`, and change of shift.
pub fn shift_lemma_checks(p: f64, opts: &ShiftCheckOptions) -> Result<Vec<PropertyRow>> {
    let phi = PowerPhi::new(p)?;
    let phi_star = phi.conjugate();
    let pc = phi.conjugate_exponent();
    if let Some(d) = opts.delta {
        if !(d > 0.0 && d <= 1.0) {
            return Err(crate::error::Error::invalid(format!("delta must lie in (0, 1], got {d}")));
        }
    }
    let mut rng = sweep_rng(opts.seed, p);
    let range = opts.log_range;
    let c2 = removal_shift_constant(p);
    let c3 = removal_shift_conjugate_constant(p);
    let kappa = p.max(2.0) - 1.0;

    let mut removal1 = Stat::new("removal-shift1");
    let mut removal2 = Stat::new("removal-shift2");
    let mut removal3 = Stat::new("removal-shift3");
    let mut young = Stat::new("young");
    let mut young2a = Stat::new("young2-first");
    let mut young2b = Stat::new("young2-second");
    let mut duality = Stat::new("conjugate-duality");
    let mut delta2 = Stat::new("delta2");
    let mut delta2_conj = Stat::new("delta2-conjugate");
    let mut convex = Stat::new("convexity");
    let mut equiv = Stat::new("phi-a-equivalence");
    let mut small = Stat::new("phi-lambda-a-small");
    let mut large = Stat::new("phi-lambda-a-large");
    let mut equiv_ratios = Vec::with_capacity(opts.tuples);

    for _ in 0..opts.tuples {
        let a = log_uniform(&mut rng, range);
        let t = log_uniform(&mut rng, range);
        let s = log_uniform(&mut rng, range);
        let delta = opts.delta.unwrap_or_else(|| rng.random_range(-range..0.0).exp());
        let fa = ShiftedPhi { base: phi, a };
        let fa_star = fa.conjugate();

        removal1.leq(fa.dphi(t), phi.dphi(t / delta).max(delta * phi.dphi(a)));
        removal2.leq(fa.eval(t), delta * phi.phi(a) + c2 * delta * phi.phi(t / delta));
        removal3.leq(fa_star.eval(t), delta * phi.phi(a) + c3 * delta * phi_star.phi(t / delta));

        let cd = young_constant(p, delta);
        young.leq(s * t, cd * fa_star.eval(s) + delta * fa.eval(t));
        young2a.leq(fa.dphi(s) * t, cd * kappa * fa.eval(s) + delta * fa.eval(t));
        let dt = delta / kappa;
        let cb = dt.powf(-p.max(2.0) / pc.min(2.0));
        young2b.leq(fa.dphi(s) * t, delta * fa.eval(s) + cb * fa.eval(t));

        let closed = fa_star.eval(t);
        let numeric = conjugate_numeric(&fa, t);
        let r = numeric / closed;
        duality.ratio(r, (r - 1.0).abs() > DUALITY_TOL);

        let d2 = fa.eval(2.0 * t) / fa.eval(t) / 2f64.powf(p.max(2.0));
        delta2.ratio(d2, d2 > 1.0 + REL_SLACK);
        let d2c = fa_star.eval(2.0 * t) / fa_star.eval(t) / 2f64.powf(pc.max(2.0));
        delta2_conj.ratio(d2c, d2c > 1.0 + REL_SLACK);

        let h = 1e-3 * t;
        let (l, m, rr) = (fa.eval(t - h), fa.eval(t), fa.eval(t + h));
        let second = (l - 2.0 * m + rr) / m;
        convex.ratio(second, !(l < m && m < rr) || second < -1e-12);

        let e = fa.eval(t) / (a.max(t).powf(p - 2.0) * t * t);
        equiv_ratios.push(e);

        let lambda = s / a;
        if lambda < 1.0 {
            small.ratio(fa.eval(lambda * a) / (lambda * lambda * phi.phi(a)), false);
        } else if lambda > 1.0 {
            large.ratio(fa.eval(lambda * a) / phi.phi(lambda * a), false);
        }
    }

    // centered constant c = √(max/min) of the equivalence, required ≤ 2
    let (emin, emax) = equiv_ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(*r), hi.max(*r)));
    let center = (emin * emax).sqrt();
    for r in &equiv_ratios {
        let x = r / center;
        equiv.ratio(*r, !(0.5..=2.0).contains(&x));
    }

    let mut rows: Vec<PropertyRow> = [
        removal1, removal2, removal3, young, young2a, young2b, duality, delta2, delta2_conj, convex, equiv, small,
        large,
    ]
    .into_iter()
    .map(|s| s.row(p))
    .collect();
    rows.extend(change_of_shift(p, opts)?);
    Ok(rows)
}

/// Change of shift with `δ = opts.delta` (0.5 when unset), primal and conjugate.
fn change_of_shift(p: f64, opts: &ShiftCheckOptions) -> Result<Vec<PropertyRow>> {
    let phi = PowerPhi::new(p)?;
    let delta = opts.delta.unwrap_or(0.5);
    let mut rng = sweep_rng(opts.seed.wrapping_add(1), p);
    let range = opts.log_range / 2.0;
    let n = opts.tuples.max(2);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let pv = random_vector(&mut rng, range);
        let qv = random_vector(&mut rng, range);
        let t = log_uniform(&mut rng, range);
        let vp = v_map(p, &pv);
        let vq = v_map(p, &qv);
        let dv = [vp[0] - vq[0], vp[1] - vq[1]];
        let v2 = dot(&dv, &dv);
        let fp = ShiftedPhi { base: phi, a: norm(&pv) };
        let fq = ShiftedPhi { base: phi, a: norm(&qv) };
        samples.push((
            (fp.eval(t), fq.eval(t)),
            (fp.conjugate().eval(t), fq.conjugate().eval(t)),
            v2,
        ));
    }
    let (calib, verify) = samples.split_at(n / 2);
    let need = |lhs: f64, rhs_phi: f64, v2: f64| ((lhs - delta * v2) / rhs_phi).max(0.0);
    let c_primal = calib.iter().map(|((l, r), _, v2)| need(*l, *r, *v2)).fold(1.0, f64::max);
    let c_conj = calib.iter().map(|(_, (l, r), v2)| need(*l, *r, *v2)).fold(1.0, f64::max);
    let mut primal = Stat::new("change-of-shift");
    let mut conj = Stat::new("change-of-shift-conjugate");
    for ((l, r), (lc, rc), v2) in verify {
        primal.leq(*l, 2.0 * c_primal * r + delta * v2);
        conj.leq(*lc, 2.0 * c_conj * rc + delta * v2);
    }
    Ok(vec![primal.row(p), conj.row(p)])
}

/// Pairwise hammer-lemma ratios over random `(P, Q)` in the plane; half
/// the pairs have `Q` close to `P` relative to `|P|`.
#[derive(Clone, Debug, Serialize)]
pub struct HammerSweep {
    pub p: f64,
    /// Smallest `c` with every observed ratio in `[1/c, c]`.
    pub c: f64,
    pub pair_min: [f64; 6],
    pub pair_max: [f64; 6],
    pub samples: usize,
    /// Pairs with a nonpositive or non-finite quantity.
    pub degenerate: usize,
}

impl HammerSweep {
    pub fn rows(&self) -> Vec<PropertyRow> {
        HAMMER_PAIRS
            .iter()
            .enumerate()
            .map(|(k, (i, j))| PropertyRow {
                p: self.p,
                case: format!("hammer-q{i}-q{j}"),
                min_ratio: self.pair_min[k],
                max_ratio: self.pair_max[k],
                violations: self.degenerate,
                samples: self.samples,
            })
            .collect()
    }
}

pub fn hammer_sweep(p: f64, pairs: usize, seed: u64) -> Result<HammerSweep> {
    PowerPhi::new(p)?;
    let mut rng = sweep_rng(seed.wrapping_add(2), p);
    let mut pair_min = [f64::INFINITY; 6];
    let mut pair_max = [f64::NEG_INFINITY; 6];
    let mut degenerate = 0;
    for k in 0..pairs {
        let pv = random_vector(&mut rng, 3.0);
        let qv = if k % 2 == 0 {
            let scale = norm(&pv) * rng.random_range(-8.0f64..0.0).exp();
            [
                pv[0] + rng.sample::<f64, _>(StandardNormal) * scale,
                pv[1] + rng.sample::<f64, _>(StandardNormal) * scale,
            ]
        } else {
            random_vector(&mut rng, 3.0)
        };
        let r = hammer_check(p, &pv, &qv)?;
        if r.quantities.iter().any(|q| !(q.is_finite() && *q > 0.0)) {
            degenerate += 1;
            continue;
        }
        for (k, v) in r.ratios.iter().enumerate() {
            pair_min[k] = pair_min[k].min(*v);
            pair_max[k] = pair_max[k].max(*v);
        }
    }
    let c = pair_min
        .iter()
        .zip(&pair_max)
        .fold(1.0_f64, |c, (lo, hi)| c.max(*hi).max(1.0 / lo));
    Ok(HammerSweep {
        p,
        c,
        pair_min,
        pair_max,
        samples: pairs,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn removal_shift1_examples() {
        let phi = PowerPhi::new(3.0).unwrap();
        // δ = 1, a = 0 reduces to φ'(t) ≤ φ'(t)
        let f0 = phi.shifted(0.0).unwrap();
        assert_eq!(f0.dphi(1.3), phi.dphi(1.3).max(0.0));
        let f = phi.shifted(2.0).unwrap();
        assert_eq!(f.dphi(1.0), 2.0);
        assert_eq!(phi.dphi(1.0 / 0.5).max(0.5 * phi.dphi(2.0)), 4.0);
    }

    #[test]
    fn numeric_conjugate_matches_closed_form() {
        for p in [1.5, 2.0, 3.0, 4.5] {
            for a in [0.0, 0.01, 1.0, 30.0] {
                let f = PowerPhi::new(p).unwrap().shifted(a).unwrap();
                for t in [1e-3, 0.5, 2.0, 100.0] {
                    let exact = f.conjugate().eval(t);
                    let num = conjugate_numeric(&f, t);
                    assert!((num / exact - 1.0).abs() < 1e-10, "p={p} a={a} t={t}");
                }
            }
        }
    }

    #[test]
    fn small_sweep_has_no_violations() {
        let opts = ShiftCheckOptions {
            tuples: 4000,
            seed: 9,
            ..Default::default()
        };
        for p in [1.5, 2.0, 3.0, 4.5] {
            for row in shift_lemma_checks(p, &opts).unwrap() {
                assert_eq!(row.violations, 0, "{row:?}");
            }
        }
    }

    #[test]
    fn hammer_is_exact_at_two() {
        let s = hammer_sweep(2.0, 2000, 1).unwrap();
        assert!((s.c - 1.0).abs() < 1e-12);
        let s = hammer_sweep(3.0, 2000, 1).unwrap();
        assert!(s.c > 1.0 && s.c < 10.0);
    }
}
