//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs with `cargo test --test acceptance`. A failing criterion is
//! reported, not raised, so the rest of the suite still runs.

use std::path::Path;
use std::time::{Duration, Instant};

use degcz::config::ExperimentConfig;
use degcz::experiments::{self as ex, with_threads};
use degcz::fem::mesh::MeshSpec;
use degcz::harness::{caccioppoli_check, fefferman_stein, poincare_check, Classification, Samples};
use degcz::meyers::{MeyersExample, Variant};
use degcz::output::OutputDir;
use degcz::seminorms::bmo::{bmo_matrix, bmo_scalar};
use degcz::seminorms::family::BallFamily;
use degcz::seminorms::muckenhoupt::muckenhoupt_ap;
use degcz::weights::field::{Field, ScalarWeightField, WeightField};
use degcz::weights::means::{log_mean_matrix, log_mean_scalar};
use degcz::weights::quadrature::QuadratureSpec;
use degcz::weights::registry::{log_normal, power_radial, rank_one_radial};
use degcz::weights::spd::{spd_exp, spd_log, sym_norm, SpdMatrix};
use degcz::{Ball, Result};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        passed,
        detail: detail.into(),
    })
}

fn run(id: usize, name: &str, limit: Duration, f: impl FnOnce() -> Result<Outcome>) -> bool {
    let t = Instant::now();
    let res = f();
    let dt = t.elapsed();
    let in_time = dt <= limit;
    let (passed, detail) = match res {
        Ok(o) => (o.passed && in_time, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let timing = format!("{:.2}s of {}s", dt.as_secs_f64(), limit.as_secs());
    let late = if in_time { "" } else { ", over the time limit" };
    println!(
        "{} {id} {name}: {detail} [{timing}{late}]",
        if passed { "PASS" } else { "FAIL" }
    );
    passed
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

// 1 ---------------------------------------------------------------------

fn exact_identities() -> Result<Outcome> {
    let mut worst_div = 0.0f64;
    let mut worst_flux = 0.0f64;
    let mut worst_fd = 0.0f64;
    let mut fd_name = String::new();
    for variant in [Variant::Plain, Variant::Degenerate] {
        for n in [2, 3] {
            for eps in [0.1, 0.25, 0.5] {
                let mut cfg = ExperimentConfig::default();
                cfg.example.variant = variant;
                cfg.example.n = n;
                cfg.example.eps = eps;
                cfg.example.points = 50;
                cfg.example.levels = 0;
                let rep = ex::run_verify(&cfg)?;
                for c in &rep.checks {
                    match c.name.as_str() {
                        "divergence-identity" => worst_div = worst_div.max(c.value),
                        "flux-consistency" => worst_flux = worst_flux.max(c.value),
                        "flux-divergence-finite-difference" if c.value > worst_fd => {
                            worst_fd = c.value;
                            fd_name = rep.example.clone();
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    // the finite-difference divergence is an independent cross-check and
    // not part of the criterion; it is printed so a mismatch stays visible
    outcome(
        worst_div <= 1e-14 && worst_flux <= 1e-10,
        format!(
            "max |identity| {worst_div:.2e}, max flux mismatch {worst_flux:.2e}; \
             cross-check: largest relative finite-difference divergence {worst_fd:.2e} ({fd_name})"
        ),
    )
}

// 2 ---------------------------------------------------------------------

fn solver_convergence() -> Result<Outcome> {
    let mut errors = Vec::new();
    let mut vertices = 0;
    for level in 1..=3 {
        let mut cfg = ExperimentConfig::default();
        cfg.solve.level = level;
        let o = ex::run_solve(&cfg)?;
        vertices = o.summary.vertices;
        errors.push(o.summary.weighted_h1_error.expect("exact solution is known"));
    }
    let factors: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let worst = factors.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        worst >= 1.5 && vertices <= 50_000,
        format!(
            "H1 errors {}, reduction factors {factors:.2?}, finest mesh {vertices} vertices",
            errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" -> ")
        ),
    )
}

// 3 ---------------------------------------------------------------------

fn sharpness() -> Result<Outcome> {
    let cfg = ExperimentConfig::default();
    let rep = ex::run_sweep(&cfg)?;
    let mut ok = true;
    let mut wrong = Vec::new();
    for (rho, want) in [
        (2.0, Classification::Bounded),
        (3.0, Classification::Bounded),
        (3.6, Classification::Bounded),
        (4.4, Classification::Diverging),
        (5.0, Classification::Diverging),
    ] {
        let got = rep.classification(0.5, rho, 0);
        if got != Some(want) {
            ok = false;
            wrong.push(format!("rho {rho}: {got:?}"));
        }
    }
    let b = rep
        .boundaries
        .iter()
        .find(|b| b.eps == 0.25 && b.ball_id == 0)
        .and_then(|b| b.detected);
    let in_range = b.is_some_and(|d| (7.2..=8.8).contains(&d));
    let b5 = rep.boundaries.iter().find(|b| b.eps == 0.5).and_then(|b| b.detected);
    outcome(
        ok && in_range,
        format!(
            "eps 0.5 boundary {b5:?}{}, eps 0.25 boundary {b:?}, {} failed cells",
            if wrong.is_empty() { String::new() } else { format!(" (misclassified {})", wrong.join(", ")) },
            rep.failures.len()
        ),
    )
}

// 4 ---------------------------------------------------------------------

fn degenerate_weight() -> Result<Outcome> {
    let quad = QuadratureSpec::default();
    let domain = Ball::centered(2, 1.0)?;
    let fam = BallFamily::dyadic_grid(domain.clone(), 3, 2.0)?;
    let zoomed = fam.zoom(&[0.0, 0.0], 2, 16)?;
    let extra = BallFamily::from_balls("zoom", domain, zoomed.balls()[fam.len()..].to_vec())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for eps in [0.1, 0.25, 0.5] {
        let w = MeyersExample::degenerate(2, eps)?.weight_field();
        let log_m = bmo_matrix(&w.log_field(), &fam, &quad)?;
        let log_m_zoomed = log_m.extended(&bmo_matrix(&w.log_field(), &extra, &quad)?, &fam, &zoomed)?;
        let m = bmo_matrix(&w.matrix_field(), &fam, &quad)?;
        let m_zoomed = m.extended(&bmo_matrix(&w.matrix_field(), &extra, &quad)?, &fam, &zoomed)?;
        let growth = m_zoomed.value / m.value;
        let log_max = log_m.value.max(log_m_zoomed.value);
        ok &= growth >= 2.0 && log_max <= 1.5 * eps + 0.01;
        parts.push(format!("eps {eps}: bmo(M) x{growth:.3}, bmo(log M) {log_max:.4}"));
    }
    outcome(ok, parts.join("; "))
}

// 5 ---------------------------------------------------------------------

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> SpdMatrix {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let (q, _) = a.qr().unpack();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| rng.random_range(-6.0f64..6.0).exp()));
    let m = &q * d * q.transpose();
    SpdMatrix::new((&m + m.transpose()) * 0.5).expect("random SPD matrix")
}

fn weight_algebra() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut round = 0.0f64;
    for k in 0..10_000 {
        let m = random_spd(&mut rng, 2 + k % 3);
        let back = spd_exp(&spd_log(&m))?;
        round = round.max(sym_norm(&(back.as_matrix() - m.as_matrix())) / m.spectral_norm());
    }

    let mut rank_one = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..=4);
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let len = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= len);
        let a = rng.random_range(-0.99f64..20.0);
        let xx = DMatrix::from_fn(n, n, |i, j| x[i] * x[j]);
        let m = SpdMatrix::new(DMatrix::identity(n, n) + &xx * a)?;
        let err = sym_norm(&(spd_log(&m) - &xx * (1.0 + a).ln()));
        rank_one = rank_one.max(err / (1.0 + a).ln().abs().max(1.0));
    }

    let quad = QuadratureSpec::default();
    let mut duality = 0.0f64;
    let weights: Vec<WeightField> = vec![
        MeyersExample::degenerate(2, 0.5)?.weight_field(),
        power_radial(2, 0.7, 0.3),
        log_normal(2, 0.8, 8, 3, 1.0)?,
    ];
    let balls = [
        Ball::centered(2, 1.0)?,
        Ball::new(vec![0.3, -0.2], 0.25)?,
        Ball::new(vec![0.05, 0.0], 0.1)?,
    ];
    for w in &weights {
        for b in &balls {
            let mean = log_mean_matrix(w, b, &quad)?;
            let inv = log_mean_matrix(&w.inverse(), b, &quad)?;
            let prod = mean.as_matrix() * inv.as_matrix() - DMatrix::identity(2, 2);
            duality = duality.max(sym_norm(&prod));
        }
    }

    let mut scalar = 0.0f64;
    for n in [2, 3] {
        for eps in [0.1, 0.25, 0.5, 1.0] {
            for r in [0.5, 1.0, 2.0] {
                let w = ScalarWeightField::power(n, eps);
                let got = log_mean_scalar(&w, &Ball::centered(n, r)?, &quad)?;
                let want = r.powf(eps) * (-eps / n as f64).exp();
                scalar = scalar.max((got - want).abs() / want);
            }
        }
    }
    outcome(
        round <= 1e-9 && rank_one <= 1e-12 && duality <= 1e-10 && scalar <= 1e-6,
        format!(
            "exp/log round trip {round:.2e}, rank-one log {rank_one:.2e}, \
             log-mean inversion {duality:.2e}, scalar log mean {scalar:.2e}"
        ),
    )
}

// 6 ---------------------------------------------------------------------

fn nfunctions() -> Result<Outcome> {
    let cfg = ExperimentConfig::default();
    let rep = ex::run_nfun(&cfg)?;
    let at_two = rep.hammer.iter().find(|(p, _)| *p == 2.0).map(|(_, c)| *c);
    let two_exact = at_two.is_some_and(|c| (c - 1.0).abs() <= 1e-12);
    let worst = rep.hammer.iter().map(|(_, c)| *c).fold(0.0, f64::max);
    let hammer: Vec<String> = rep.hammer.iter().map(|(p, c)| format!("p {p}: {c:.3}")).collect();
    outcome(
        rep.violations == 0 && worst <= rep.hammer_limit && two_exact,
        format!(
            "{} violations over {} rows; hammer constants {} (limit {})",
            rep.violations,
            rep.rows.len(),
            hammer.join(", "),
            rep.hammer_limit
        ),
    )
}

// 7 ---------------------------------------------------------------------

fn scaled_field(f: &Field<DMatrix<f64>>, t: f64) -> Field<DMatrix<f64>> {
    let g = f.clone();
    let mut out = Field::new(f.dim(), format!("{}(x/{t})", f.label()), move |x: &[f64]| {
        let y: Vec<f64> = x.iter().map(|v| v / t).collect();
        g.eval(&y)
    });
    for s in f.singular_points() {
        out = out.with_singular_point(s.iter().map(|v| v * t).collect());
    }
    out
}

fn seminorms() -> Result<Outcome> {
    let quad = QuadratureSpec::default();
    let domain = Ball::centered(2, 1.0)?;
    let fam = BallFamily::dyadic_grid(domain.clone(), 3, 2.0)?;

    // scalar log-BMO is at most twice the matrix one, ball by ball
    let weights: Vec<WeightField> = vec![
        rank_one_radial(2, 0.3),
        power_radial(2, 0.5, 0.4),
        log_normal(2, 0.5, 8, 0, 1.0)?,
        log_normal(2, 1.0, 8, 1, 0.5)?,
        MeyersExample::plain(2, 0.25)?.weight_field(),
        MeyersExample::degenerate(2, 0.25)?.weight_field(),
    ];
    let mut pairs = 0;
    let mut lemma_bad = 0;
    let mut lemma_worst = 0.0f64;
    for w in &weights {
        let s = bmo_scalar(&w.scalar().log_field(), &fam, &quad)?;
        let m = bmo_matrix(&w.log_field(), &fam, &quad)?;
        for (a, b) in s.per_ball.iter().zip(&m.per_ball) {
            pairs += 1;
            if *b > 0.0 {
                lemma_worst = lemma_worst.max(a / b);
            }
            if *a > 2.0 * b * (1.0 + 1e-12) + 1e-14 {
                lemma_bad += 1;
            }
        }
    }

    // dilating the field and the family together leaves the estimate unchanged
    let mut scale = 0.0f64;
    for w in [log_normal(2, 0.7, 8, 2, 1.0)?, power_radial(2, 0.6, 0.5)] {
        let base = bmo_matrix(&w.log_field(), &fam, &quad)?;
        for t in [0.125, 4.0] {
            let big = BallFamily::dyadic_grid(Ball::centered(2, t)?, 3, 2.0)?;
            let scaled = bmo_matrix(&scaled_field(&w.log_field(), t), &big, &quad)?;
            for (a, b) in base.per_ball.iter().zip(&scaled.per_ball) {
                scale = scale.max((a - b).abs() / a.abs().max(1e-300));
            }
        }
    }

    let one = muckenhoupt_ap(&ScalarWeightField::constant(2, 1.0)?, 2.0, &fam, &quad)?;
    let ap_one = one.value().map_or(f64::INFINITY, |v| (v - 1.0).abs());
    let strong = muckenhoupt_ap(&ScalarWeightField::power(2, 1.2), 2.0, &fam, &quad)?;
    let mild = ScalarWeightField::power(2, 0.6);
    let coarse = muckenhoupt_ap(&mild, 2.0, &fam, &quad)?.value();
    let fine = muckenhoupt_ap(&mild, 2.0, &fam.refined()?, &quad)?.value();
    let stable = match (coarse, fine) {
        (Some(a), Some(b)) => (b / a - 1.0).abs() <= 0.1,
        _ => false,
    };
    outcome(
        lemma_bad == 0 && scale <= 1e-12 && ap_one <= 1e-14 && strong.is_divergent() && stable,
        format!(
            "scalar vs matrix: {lemma_bad} violations in {pairs} pairs (max ratio {lemma_worst:.3}); \
             scale invariance {scale:.1e}; |A_2(1) - 1| = {ap_one:.1e}; \
             A_2(|x|^1.2) divergent: {}; A_2(|x|^0.6) {coarse:?} -> {fine:?}",
            strong.is_divergent()
        ),
    )
}

// 8 ---------------------------------------------------------------------

fn random_balls(count: usize, seed: u64) -> Result<Vec<Ball>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut balls = Vec::with_capacity(count);
    while balls.len() < count {
        let c: [f64; 2] = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        let r: f64 = rng.random_range(0.05..0.2);
        if c[0].hypot(c[1]) + 2.0 * r <= 0.95 {
            balls.push(Ball::new(c.to_vec(), r)?);
        }
    }
    Ok(balls)
}

/// First solve level whose cells meeting `2B` are at most `r` across, for every ball.
fn resolving_level(balls: &[Ball]) -> Result<usize> {
    let spec = ExperimentConfig::default().solve.mesh;
    for level in 0..=3 {
        let mesh = spec.build(level)?;
        let fine = balls.iter().all(|b| {
            let outer = b.dilate(2.0);
            mesh.cells_in(&outer).iter().all(|&c| mesh.diameter(c) <= b.radius)
        });
        if fine {
            return Ok(level);
        }
    }
    Err(degcz::Error::Geometry("no level up to 3 resolves the test balls".into()))
}

fn spread(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (y / x - 1.0).abs()).fold(0.0, f64::max)
}

fn inequality_shapes() -> Result<Outcome> {
    let balls = random_balls(20, 8)?;
    let quad = QuadratureSpec::default();
    let base = resolving_level(&balls)?;
    let mut cacc = Vec::new();
    let mut poinc = Vec::new();
    for level in [base, base + 1] {
        let mut cfg = ExperimentConfig::default();
        cfg.solve.level = level;
        let (prob, _) = ex::solve_problem(&cfg)?;
        let o = ex::run_solve(&cfg)?;
        let omega = prob.weight.scalar();
        let mut c = Vec::new();
        let mut p = Vec::new();
        for b in &balls {
            c.push(caccioppoli_check(&o.solution, &prob, b)?.ratio.unwrap_or(f64::NAN));
            p.push(poincare_check(&o.solution, &omega, b, 2.0, 0.75, 2, &quad)?.ratio.unwrap_or(f64::NAN));
        }
        cacc.push(c);
        poinc.push(p);
    }
    let sc = spread(&cacc[0], &cacc[1]);
    let sp = spread(&poinc[0], &poinc[1]);

    // |∇u| of the plain example, capped, on graded cells of B_1 and zero on 1 < |x| < 2
    let ex1 = MeyersExample::plain(2, 0.25)?;
    let cap = 1e3;
    let disk = MeshSpec::GradedDisk {
        sectors: 32,
        grading: 0.8,
        inner_radius: 1e-12,
    }
    .build(0)?;
    let ring = MeshSpec::Annulus {
        r_in: 1.0,
        r_out: 2.0,
        sectors: 128,
        layers: 24,
    }
    .build(0)?;
    let mut f = Samples {
        points: Vec::new(),
        areas: Vec::new(),
        values: Vec::new(),
    };
    for c in 0..disk.cell_count() {
        let x = disk.barycenter(c);
        let g = ex1.grad_u(&x)?;
        f.points.push(x);
        f.areas.push(disk.area(c));
        f.values.push(g[0].hypot(g[1]).min(cap));
    }
    for c in 0..ring.cell_count() {
        f.points.push(ring.barycenter(c));
        f.areas.push(ring.area(c));
        f.values.push(0.0);
    }
    let dom = Ball::centered(2, 2.0)?;
    let mut fam_balls = BallFamily::dyadic_grid(dom.clone(), 7, 2.0)?.balls().to_vec();
    for k in 3..45 {
        fam_balls.extend(degcz::harness::zoom_balls([0.0, 0.0], 0.5f64.powi(k), 1));
    }
    let fam = BallFamily::from_balls("dyadic+zoom", dom, fam_balls)?;
    let rows = fefferman_stein(&f, &fam, &[4.0, 8.0, 16.0]);
    let cs: Vec<f64> = rows.iter().map(|r| r.constant).collect();
    let hi = cs.iter().copied().fold(0.0, f64::max);
    let lo = cs.iter().copied().fold(f64::INFINITY, f64::min);
    let variation = hi / lo;
    outcome(
        sc <= 0.25 && sp <= 0.25 && variation <= 2.0,
        format!(
            "levels {base}->{}: Caccioppoli max change {:.1}%, Poincare max change {:.1}% over 20 balls; \
             Fefferman-Stein C(4,8,16) = {cs:.3?}, variation {variation:.2}x",
            base + 1,
            100.0 * sc,
            100.0 * sp
        ),
    )
}

// 9 ---------------------------------------------------------------------

fn csv_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).map_err(|e| degcz::Error::io(dir, e))? {
        let p = e.map_err(|e| degcz::Error::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x == "csv") {
            let bytes = std::fs::read(&p).map_err(|e| degcz::Error::io(&p, e))?;
            out.push((p.file_name().unwrap().to_string_lossy().into_owned(), bytes));
        }
    }
    out.sort();
    Ok(out)
}

fn determinism() -> Result<Outcome> {
    let mut cfg = ExperimentConfig::default();
    cfg.seed = 9;
    cfg.threads = 1;
    cfg.nfun.tuples = 20_000;
    cfg.nfun.hammer_pairs = 20_000;
    let once = |root: &Path| -> Result<Vec<(String, Vec<u8>)>> {
        let out = OutputDir::create(root, &cfg)?;
        with_threads(1, || -> Result<()> {
            ex::write_sweep(&out, &cfg, &ex::run_sweep(&cfg)?)?;
            ex::write_nfun(&out, &ex::run_nfun(&cfg)?)?;
            ex::write_solve(&out, &ex::run_solve(&cfg)?)?;
            ex::write_verify(&out, &ex::run_verify(&cfg)?)?;
            Ok(())
        })??;
        csv_files(root)
    };
    let a = tempfile::tempdir().map_err(|e| degcz::Error::io(Path::new("tempdir"), e))?;
    let b = tempfile::tempdir().map_err(|e| degcz::Error::io(Path::new("tempdir"), e))?;
    let first = once(a.path())?;
    let second = once(b.path())?;
    let names: Vec<&str> = first.iter().map(|(n, _)| n.as_str()).collect();
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    outcome(
        first.len() == second.len() && !first.is_empty() && differing.is_empty(),
        format!("{} CSVs compared ({}); differing: {differing:?}", names.len(), names.join(", ")),
    )
}

fn main() {
    let mut passed = 0;
    let criteria: Vec<(&str, Duration, fn() -> Result<Outcome>)> = vec![
        ("exact-solution identities", secs(1), exact_identities),
        ("solver convergence", secs(60), solver_convergence),
        ("sharpness threshold", secs(300), sharpness),
        ("degenerate weight characterization", secs(30), degenerate_weight),
        ("weight algebra", secs(10), weight_algebra),
        ("N-function properties", secs(30), nfunctions),
        ("seminorm estimators", secs(60), seminorms),
        ("inequality shapes", secs(120), inequality_shapes),
        ("determinism", secs(300), determinism),
    ];
    let total = criteria.len();
    for (k, (name, limit, f)) in criteria.into_iter().enumerate() {
        if run(k + 1, name, limit, f) {
            passed += 1;
        }
    }
    println!("{passed}/{total} criteria passed");
}
