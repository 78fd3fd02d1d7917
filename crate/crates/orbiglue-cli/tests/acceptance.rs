//! Acceptance run: one line per criterion.
//!
//! Criteria 8 and 9 are red. Each has a known cause, and the run checks
//! that the measured failure is that cause; any other failure makes the
//! process exit non-zero.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use orbiglue::gluing::{self, GluingConfig, Profile};
use orbiglue::green::{self, GreenParams};
use orbiglue::jet::Jet;
use orbiglue::radial::{self, InnerData, Potential, RadialPotential, SolveOptions};
use orbiglue::restree::{self, IntersectionData};
use orbiglue::weights::WeightVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::process::Command;
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
    /// For a red criterion: whether the failure is the documented one.
    documented: bool,
}

fn pass(detail: String) -> Outcome {
    Outcome { pass: true, detail, documented: false }
}

fn fail(detail: String) -> Outcome {
    Outcome { pass: false, detail, documented: false }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        pass(detail)
    } else {
        fail(detail)
    }
}

fn wv(s: &str) -> WeightVector {
    s.parse().unwrap()
}

fn c1_tree() -> Outcome {
    let t = restree::build_tree(&wv("(-5,3,2,1)"), restree::DEFAULT_MAX_DEPTH).unwrap();
    let kids: Vec<String> = t.root.children.iter().map(|c| c.weights.to_string()).collect();
    let grand: Vec<String> = t.root.children[0].children.iter().map(|c| c.weights.to_string()).collect();
    let ok = kids == ["(3,1,2,1)", "(2,1,1,1)"]
        && grand == ["(2,1,1,1)"]
        && t.root.children[1].children.is_empty()
        && t.is_type_i
        && t.node_count == 4;
    check(ok, format!("children {kids:?}, grandchild {grand:?}, type I {}, {} nodes", t.is_type_i, t.node_count))
}

fn c2_chains() -> Outcome {
    let mut checked = 0;
    for p in 2u64..=200 {
        for q in 1..p {
            if num_gcd(p, q) != 1 {
                continue;
            }
            for n in [2usize, 3] {
                let mut w = vec![q];
                w.extend(std::iter::repeat_n(1, n - 1));
                let v = WeightVector::non_compact(p, w).unwrap();
                // depth <= a0 bounds every branch
                let t = restree::build_tree(&v, p as usize).unwrap();
                let chain = restree::euclidean_chain(p, q, n).unwrap();
                let nodes: Vec<_> = t.preorder().into_iter().cloned().collect();
                let single = t.node_count == t.depth + 1;
                if !(t.is_type_i && single && nodes == chain) {
                    return fail(format!("({p},{q}) with n = {n}: tree {nodes:?} vs chain {chain:?}"));
                }
                checked += 1;
            }
        }
    }
    pass(format!("{checked} coprime (p, q, n) cases, each a single chain equal to the Euclidean chain"))
}

fn num_gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        num_gcd(b, a % b)
    }
}

fn c3_beta() -> Outcome {
    let rows = green::identity_table(10, 1e-12).unwrap();
    let worst = rows.iter().map(|r| r.abs_err).fold(0.0, f64::max);
    check(
        worst < 1e-8 && rows.len() == 28,
        format!("{} pairs 3 <= k < n <= 10, max |quad - exact| = {worst:.1e}", rows.len()),
    )
}

fn c4_lambda_limit() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (n, k) in [(4, 3), (5, 3), (6, 4)] {
        let p = GreenParams::new(n, k).unwrap();
        let lead = green::leading_coefficient(&p).unwrap();
        let scaled = green::lambda_flat(1e-3, &p).unwrap() * 1e-3f64.powi(2 * k as i32 - 4);
        let rel = (scaled / lead - 1.0).abs();
        ok &= rel < 0.01;
        parts.push(format!("({n},{k}) rel err {rel:.1e}"));
    }
    check(ok, format!("d = 1e-3: {}", parts.join(", ")))
}

fn rat(rng: &mut ChaCha8Rng, nonzero: bool) -> BigRational {
    loop {
        let num: i64 = rng.random_range(-40..=40);
        let den: i64 = rng.random_range(1..=12);
        if !(nonzero && num == 0) {
            return BigRational::new(BigInt::from(num), BigInt::from(den));
        }
    }
}

fn c5_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut done = 0;
    while done < 100 {
        let k = rng.random_range(3..=6usize);
        let n = rng.random_range(k..=8usize);
        let w0 = rng.random_range(1..=30u64);
        let w: Vec<u64> = (0..k).map(|_| rng.random_range(1..=30u64)).collect();
        let all: Vec<u64> = std::iter::once(w0).chain(w.iter().copied()).collect();
        let coprime = (0..all.len()).all(|i| (i + 1..all.len()).all(|j| num_gcd(all[i], all[j]) == 1));
        if !coprime {
            continue;
        }
        let v = WeightVector::non_compact(w0, w).unwrap();
        let mut data = IntersectionData::new(n, k, rat(&mut rng, true), rat(&mut rng, false));
        for j in k..n {
            if rng.random_bool(0.5) {
                data.higher.insert(j, rat(&mut rng, false));
            }
        }
        if rng.random_bool(0.5) {
            data.c1_top = Some(rat(&mut rng, false));
        }
        let lam = restree::lambda_constant(&v, &data).unwrap();
        let ex = restree::expansion_oracle(&v, &data).unwrap();
        if ex.coefficient(k - 1).as_constant() != Some(lam.value.clone()) {
            return fail(format!("{v} n = {n}: oracle {} vs {}", ex.coefficient(k - 1), lam.value));
        }
        done += 1;
    }
    pass("100 random instances, oracle coefficient of eps^(2k-2) equals lambda exactly".into())
}

fn random_point(rng: &mut ChaCha8Rng, k: usize, s: f64) -> Vec<Complex64> {
    let mut z: Vec<Complex64> =
        (0..k).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let norm: f64 = z.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
    for w in z.iter_mut() {
        *w *= s.sqrt() / norm;
    }
    z
}

fn generic_inner() -> InnerData {
    InnerData { s0: 1.0, h: 0.0, dh: 1.0, ddh: 0.3, flux: 0.2 }
}

fn c6_radial() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let sol = radial::solve_scalar_flat(3, generic_inner(), 1e3, SolveOptions::default()).unwrap();
    type Maker<'a> = Box<dyn Fn(&mut ChaCha8Rng) -> (RadialPotential, f64) + 'a>;
    let families: Vec<(&str, Maker)> = vec![
        ("flat", Box::new(|r| (RadialPotential::flat(r.random_range(2..=4)).unwrap(), r.random_range(0.01..50.0)))),
        (
            "truncated",
            Box::new(|r| {
                let k = r.random_range(3..=4);
                (RadialPotential::truncated_ale(k, r.random_range(0.1..1.0)).unwrap(), r.random_range(4.0..40.0))
            }),
        ),
        (
            "log",
            Box::new(|r| (RadialPotential::log_ale(2, r.random_range(-0.2..1.0)).unwrap(), r.random_range(0.5..20.0))),
        ),
        (
            "fubini",
            Box::new(|r| (RadialPotential::fubini_like(r.random_range(2..=3)).unwrap(), r.random_range(0.05..10.0))),
        ),
        ("sampled", Box::new(|r| (sol.potential.clone(), r.random_range(2.0..500.0)))),
    ];
    let mut worst = Vec::new();
    let mut ok = true;
    let mut flat_sup = 0.0f64;
    for (name, make) in &families {
        let mut w = 0.0f64;
        for _ in 0..50 {
            let (pot, s) = make(&mut rng);
            let z = random_point(&mut rng, pot.k(), s);
            let closed = radial::scalar_curvature(&pot, s).unwrap().value;
            let fd = radial::scalar_curvature_fd(&pot, &z, None).unwrap().value;
            w = w.max((closed - fd).abs());
            if *name == "flat" {
                flat_sup = flat_sup.max(closed.abs()).max(fd.abs());
            }
        }
        ok &= w <= 1e-6;
        worst.push(format!("{name} {w:.0e}"));
    }
    let mut bi = 0.0f64;
    for k in [3usize, 4, 5] {
        for s in [0.5, 1.0, 10.0, 100.0] {
            bi = bi.max(radial::biharmonic_radial(|x: Jet| x.powf(2.0 - k as f64), k, s).abs());
        }
    }
    ok &= flat_sup <= 1e-10 && bi <= 1e-10;
    check(
        ok,
        format!(
            "max |closed - fd| per family: {}; flat |S| <= {flat_sup:.0e}; |biharmonic| <= {bi:.0e}",
            worst.join(", ")
        ),
    )
}

fn sup_curvature(sol: &radial::FlatSolution) -> f64 {
    sol.potential_grid()
        .iter()
        .map(|&s| radial::scalar_curvature(&sol.potential, s).unwrap().value.abs())
        .fold(0.0, f64::max)
}

/// Sup residual of the least-squares fit of `y` by `{1, f}`.
fn two_term_residual(s: &[f64], y: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let b: Vec<f64> = s.iter().map(|&x| f(x)).collect();
    let n = s.len() as f64;
    let (sb, sbb) = (b.iter().sum::<f64>(), b.iter().map(|v| v * v).sum::<f64>());
    let (sy, sby) = (y.iter().sum::<f64>(), b.iter().zip(y).map(|(p, q)| p * q).sum::<f64>());
    let det = n * sbb - sb * sb;
    let c1 = (n * sby - sb * sy) / det;
    let c0 = (sy - c1 * sb) / n;
    b.iter().zip(y).map(|(p, q)| (q - c0 - c1 * p).abs()).fold(0.0, f64::max)
}

fn c7_solver() -> Outcome {
    let mut sup = 0.0f64;
    for k in [2, 3, 4] {
        let sol = radial::solve_scalar_flat(k, generic_inner(), 1e4, SolveOptions::default()).unwrap();
        sup = sup.max(sup_curvature(&sol));
    }
    let k = 3;
    let pts: Vec<(f64, f64)> = [1e3, 1e4, 1e5]
        .iter()
        .map(|&s_max| {
            let sol = radial::solve_scalar_flat(k, generic_inner(), s_max, SolveOptions::default()).unwrap();
            (sol.fit.window.0.ln(), sol.fit.residual_sup.ln())
        })
        .collect();
    let slope = (pts[2].1 - pts[0].1) / (pts[2].0 - pts[0].0);
    let target = (3.0 - 2.0 * k as f64) / 2.0;
    let sol = radial::solve_scalar_flat(2, generic_inner(), 1e4, SolveOptions::default()).unwrap();
    let radial::Form::Sampled(sp) = sol.potential.form() else { unreachable!() };
    let n = sp.grid().len();
    let s = &sp.grid()[n / 2..];
    let y: Vec<f64> = (n / 2..n).map(|j| sp.column(0)[j] - 0.5 * sp.grid()[j]).collect();
    let log_res = two_term_residual(s, &y, f64::ln);
    let pow_res = two_term_residual(s, &y, |x| 1.0 / x);
    let ok = sup <= 1e-7 && (slope - target).abs() <= 0.5 && log_res < 1e-3 * pow_res;
    check(
        ok,
        format!(
            "sup |S| = {sup:.1e}; k = 3 residual slope {slope:.2} vs {target}; k = 2 log residual {log_res:.1e} vs power {pow_res:.1e}"
        ),
    )
}

fn smooth(eps: f64, a: f64, m: u32) -> GluingConfig {
    GluingConfig { profile: Profile::Smooth, cap_order: Some(m), ..GluingConfig::new(3, eps, a) }
}

fn c8_positivity() -> Outcome {
    // Truncated model: inside d <= r_eps, H' = 1/2 - (eps/d)^4 does not depend
    // on eps once d is measured in units of eps, so d = eps/10 always gives
    // 1/2 - 10^4.
    let mut margins = Vec::new();
    let mut documented = true;
    for eps in [1e-3, 1e-4, 1e-5, 1e-6] {
        let p = gluing::positivity_scan(&GluingConfig::new(3, eps, 1.0)).unwrap();
        documented &= (p.min_margin - (0.5 - 1e4)).abs() < 1e-6 && (p.argmin_d - eps / 10.0).abs() < 1e-12 * eps;
        margins.push(p.min_margin);
    }
    let ok = margins.iter().all(|&m| m > 0.0);
    let detail = format!(
        "truncated f = A t^(4-2k): margin {:.1} at d = eps/10 for every eps <= 1e-3 (H' = 1/2 - (eps/d)^4)",
        margins[0]
    );
    Outcome { pass: ok, detail, documented: !ok && documented }
}

fn c8_smooth() -> Outcome {
    let cfg = smooth(1e-3, 1.0, 4);
    let mut margins = Vec::new();
    for eps in [1e-3, 1e-4, 1e-5, 1e-6] {
        margins.push(gluing::positivity_scan(&cfg.with_eps(eps)).unwrap().min_margin);
    }
    let sweep = gluing::positivity_sweep(&cfg, 1e-6).unwrap();
    // The margin is flat in eps up to rounding; allow 1e-12 relative.
    let monotone = sweep
        .scans
        .windows(2)
        .take_while(|w| w[1].min_margin > 0.0)
        .all(|w| w[1].min_margin <= w[0].min_margin * (1.0 + 1e-12));
    let fail_eps = sweep.first_failure;
    let ok = margins.iter().all(|&m| m > 0.0) && monotone && fail_eps.is_some_and(|e| e > 0.05);
    check(
        ok,
        format!(
            "smooth O(-4) cap, A = 1: margin {:.4e} for eps in [1e-6, 1e-3], non-increasing over the doubling sweep: {monotone}, first failure at eps = {:?}",
            margins[0], fail_eps
        ),
    )
}

const SWEEP: [f64; 5] = [-2.0, -2.5, -3.0, -3.5, -4.0];

struct RateRun {
    omega2: Vec<f64>,
    slope: f64,
    delta: f64,
}

fn rates(a: f64, m: u32) -> RateRun {
    let mut omega2 = Vec::new();
    let mut pairs = Vec::new();
    let mut delta = 0.0;
    for e in SWEEP {
        let cfg = smooth(10f64.powf(e), a, m);
        delta = cfg.delta();
        let rep = gluing::scalar_error_report(&cfg).unwrap();
        omega2.push(rep.region(2).sup_d_abs_s);
        pairs.push((cfg.eps, rep.sup_weighted()));
    }
    RateRun { omega2, slope: gluing::rate_fit(3, &pairs).unwrap().slope, delta }
}

fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::MIN, f64::max);
    let lo = v.iter().cloned().fold(f64::MAX, f64::min);
    (hi - lo) / hi
}

fn c9_rates() -> Outcome {
    // The truncated model is degenerate at d = eps/10 (criterion 8), so the
    // report runs on the smooth cap.
    let trunc = gluing::scalar_error_report(&GluingConfig::new(3, 1e-3, 1.0));
    let r = rates(1.0, 4);
    let bound = 3.0 - r.delta - 0.3;
    let predicted = 3.0 - r.delta - 1.0 / 3.0;
    let var = spread(&r.omega2);
    let max_o2 = r.omega2.iter().cloned().fold(0.0, f64::max);
    let ok = var < 0.5 && r.slope >= bound;
    // Documented: the annulus term eps^(2k-2) d^(4-2k) through the cutoff
    // scales as r^(3-delta-1/k), below the bound by 1/k - 0.3, and on
    // Omega_2 the smooth cap is scalar-flat, so d|S| is rounding noise.
    let documented = matches!(trunc, Err(gluing::GluingError::Degenerate { .. }))
        && (r.slope - predicted).abs() < 0.1
        && predicted < bound
        && max_o2 < 1e-8;
    let detail = format!(
        "smooth O(-4) cap, A = 1: weighted slope {:.3} vs bound {bound:.2} (annulus scaling predicts {predicted:.3}); sup_Omega2 d|S| <= {max_o2:.1e} (rounding level) with spread {:.0}%",
        r.slope,
        100.0 * var
    );
    Outcome { pass: ok, detail, documented: !ok && documented }
}

fn c9_blowup() -> Outcome {
    let r = rates(-1.0, 1);
    let bound = 3.0 - r.delta - 0.3;
    let max_o2 = r.omega2.iter().cloned().fold(0.0, f64::max);
    check(
        r.slope >= bound && max_o2 < 1e-8,
        format!(
            "smooth O(-1) cap, A = -1: weighted slope {:.3} vs bound {bound:.2}; sup_Omega2 d|S| <= {max_o2:.1e}",
            r.slope
        ),
    )
}

fn cli(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_orbiglue")).args(args).output().expect("binary runs");
    assert!(out.status.success(), "{args:?}");
    out.stdout
}

fn c10_determinism() -> Outcome {
    let cmds: [&[&str]; 6] = [
        &["classify", "(-5,3,2,1)"],
        &["tree", "(-5,3,2,1)", "--dot"],
        &["lambda", "(-5,3,2,1)", "--n", "4", "--vol", "1", "--I", "1", "--oracle"],
        &["flat-solve", "--k", "3", "--flux", "0.2", "--format", "csv"],
        &["glue", "--k", "3", "--eps", "0.001", "--A", "1", "--profile", "smooth"],
        &["green", "--n", "4", "--k", "3", "--mc-samples", "20000", "--seed", "3"],
    ];
    let identical = cmds.iter().all(|c| cli(c) == cli(c));
    let p = GreenParams::new(4, 3).unwrap();
    let a = green::lambda_flat_monte_carlo(1.0, &p, 50_000, 17).unwrap();
    let b = green::lambda_flat_monte_carlo(1.0, &p, 50_000, 17).unwrap();
    let exact = green::lambda_flat(1.0, &p).unwrap();
    let mc_ok = a.estimate.to_bits() == b.estimate.to_bits() && (a.estimate / exact - 1.0).abs() < 0.01;
    check(
        identical && mc_ok,
        format!("{} subcommands byte-identical: {identical}; seeded Monte Carlo reproducible and within 1% of quadrature: {mc_ok}", cmds.len()),
    )
}

fn main() {
    type Criterion = (&'static str, Duration, fn() -> Outcome);
    let criteria: Vec<Criterion> = vec![
        ("1", Duration::from_millis(1), c1_tree),
        ("2", Duration::from_secs(5), c2_chains),
        ("3", Duration::from_secs(5), c3_beta),
        ("4", Duration::from_secs(30), c4_lambda_limit),
        ("5", Duration::from_secs(10), c5_oracle),
        ("6", Duration::from_secs(30), c6_radial),
        ("7", Duration::from_secs(120), c7_solver),
        ("8", Duration::from_secs(60), c8_positivity),
        ("8 (smooth cap)", Duration::from_secs(60), c8_smooth),
        ("9", Duration::from_secs(180), c9_rates),
        ("9 (blow-up cap)", Duration::from_secs(180), c9_blowup),
        ("10", Duration::from_secs(10), c10_determinism),
    ];
    let mut undocumented = Vec::new();
    for (name, budget, f) in criteria {
        let t = Instant::now();
        let out = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            fail(format!("panicked: {msg}"))
        });
        let dt = t.elapsed();
        let slow = dt > budget;
        let verdict = match (out.pass && !slow, out.documented) {
            (true, _) => "PASS",
            (false, true) => "FAIL (documented)",
            (false, false) => "FAIL",
        };
        let over = if slow { " (over budget)" } else { "" };
        println!("criterion {name}: {verdict} [{:.2?} of {:.0?}{over}] {}", dt, budget, out.detail);
        if verdict == "FAIL" {
            undocumented.push(name);
        }
    }
    if !undocumented.is_empty() {
        eprintln!("undocumented failures: {undocumented:?}");
        std::process::exit(1);
    }
}
