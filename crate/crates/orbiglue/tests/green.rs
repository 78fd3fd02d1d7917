use num_bigint::BigInt;
use num_rational::BigRational;
use orbiglue::green::*;
use proptest::prelude::*;
use std::f64::consts::PI;

fn p(n: u32, k: u32) -> GreenParams {
    GreenParams::new(n, k).unwrap()
}

fn ratio(a: i64, b: i64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

#[test]
fn beta_examples() {
    assert_eq!(beta_integral_rational(&p(4, 3)).unwrap(), ratio(1, 2));
    assert_eq!(beta_integral_rational(&p(5, 3)).unwrap(), ratio(1, 4));
    assert_eq!(beta_integral_rational(&p(6, 4)).unwrap(), ratio(1, 12));
    assert_eq!(beta_integral_rational(&p(8, 3)).unwrap(), ratio(1, 10));
    for (n, k, want) in [(4, 3, 0.5), (6, 4, 1.0 / 12.0), (8, 3, 0.1)] {
        assert!((beta_integral_quad(&p(n, k)).unwrap() - want).abs() < 1e-10);
    }
}

/// `∫_0^∞ R³ (1 + R²)^{-3} dR` on a truncated uniform grid with the tail
/// integrated in closed form, independent of the θ substitution.
#[test]
fn beta_five_three_by_direct_quadrature() {
    let f = |r: f64| r.powi(3) / (1.0 + r * r).powi(3);
    let (top, n) = (200.0, 2_000_000);
    let h = top / n as f64;
    let mut sum = 0.5 * (f(0.0) + f(top));
    for i in 1..n {
        sum += f(i as f64 * h);
    }
    // tail: R³/(1+R²)³ ≈ R^{-3} - 3R^{-5}
    let tail = 0.5 / (top * top) - 0.75 / top.powi(4);
    assert!((sum * h + tail - 0.25).abs() < 1e-8);
}

#[test]
fn identity_table_through_ten() {
    let rows = identity_table(10, 1e-12).unwrap();
    assert_eq!(rows.len(), (4..=10).map(|n| n - 3).sum::<u32>() as usize);
    for r in rows {
        assert!(3 <= r.k && r.k < r.n && r.n <= 10);
        assert!(r.abs_err < 1e-8, "{r:?}");
    }
}

#[test]
fn convergence_guard() {
    for (n, k) in [(5, 2), (3, 3), (4, 4), (3, 4), (10, 1)] {
        assert_eq!(GreenParams::new(n, k), Err(GreenError::Convergence { n, k }));
        let q = GreenParams { n, k, quad_tol: 1e-12 };
        assert!(beta_integral_exact(&q).is_err() && beta_integral_quad(&q).is_err());
    }
    // Riemann criterion: 2(n-2) - (2n-2k-1) = 2k - 3 > 1 iff k > 2
    for n in 4..12u32 {
        for k in 1..n {
            let crit = 2 * (n as i32 - 2) - (2 * n as i32 - 2 * k as i32 - 1) > 1;
            assert_eq!(GreenParams::new(n, k).is_ok(), crit);
        }
    }
    assert!(GreenParams { n: 4, k: 3, quad_tol: 0.0 }.validate().is_err());
    assert!(lambda_flat(0.0, &p(4, 3)).is_err());
    assert!(lambda_flat(1.5, &p(4, 3)).is_err());
}

#[test]
fn leading_coefficient_examples() {
    assert!((leading_coefficient(&p(4, 3)).unwrap() - PI).abs() < 1e-14);
    // π^{n-k} Γ(k-2) / Γ(n-2)
    for (n, k) in [(5u32, 3u32), (6, 4), (8, 3), (10, 9)] {
        let fact = |j: u32| (1..=j).map(f64::from).product::<f64>();
        let want = PI.powi((n - k) as i32) * fact(k - 3) / fact(n - 3);
        let got = leading_coefficient(&p(n, k)).unwrap();
        assert!((got - want).abs() < 1e-13 * want, "{n} {k}");
    }
}

#[test]
fn sphere_and_ball_volumes() {
    assert!((sphere_volume(1) - 2.0 * PI).abs() < 1e-15);
    assert!((sphere_volume(2) - 2.0 * PI * PI).abs() < 1e-14);
    assert!((ball_volume(1) - PI).abs() < 1e-15);
    assert!((ball_volume(2) - PI * PI / 2.0).abs() < 1e-14);
}

/// For n = 4, k = 3 the fiber integral is `2π ∫_0^1 r (d² + r²)^{-2} dr = π/(d²(1+d²))`.
#[test]
fn lambda_closed_form_four_three() {
    for d in [1.0, 0.5, 1e-1, 1e-2, 1e-3] {
        let want = PI / (d * d * (1.0 + d * d));
        let got = lambda_flat(d, &p(4, 3)).unwrap();
        assert!((got - want).abs() < 1e-10 * want, "{d} {got} {want}");
    }
}

#[test]
fn lambda_matches_monte_carlo() {
    let q = p(4, 3);
    let exact = lambda_flat(1.0, &q).unwrap();
    let mc = lambda_flat_monte_carlo(1.0, &q, 200_000, 7).unwrap();
    assert!((mc.estimate - exact).abs() < 0.01 * exact, "{mc:?} {exact}");
    assert!(mc.std_err < 0.01 * exact);
    let q = p(6, 4);
    let exact = lambda_flat(0.8, &q).unwrap();
    let mc = lambda_flat_monte_carlo(0.8, &q, 200_000, 11).unwrap();
    assert!((mc.estimate - exact).abs() < 0.01 * exact);
    assert!(lambda_flat_monte_carlo(1.0, &p(4, 3), 0, 1).is_err());
}

#[test]
fn seeded_monte_carlo_is_reproducible() {
    let q = p(5, 3);
    let a = lambda_flat_monte_carlo(0.5, &q, 10_000, 42).unwrap();
    let b = lambda_flat_monte_carlo(0.5, &q, 10_000, 42).unwrap();
    let c = lambda_flat_monte_carlo(0.5, &q, 10_000, 43).unwrap();
    assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
    assert_ne!(a.estimate, c.estimate);
}

#[test]
fn scaled_lambda_converges_to_leading_coefficient() {
    for (n, k) in [(4, 3), (5, 3), (6, 4)] {
        let q = p(n, k);
        let lead = leading_coefficient(&q).unwrap();
        let vals: Vec<f64> = [1e-1, 1e-2, 1e-3].iter().map(|&d| lambda_flat_scaled(d, &q).unwrap()).collect();
        assert!((vals[2] - lead).abs() < 0.01 * lead, "{n} {k} {vals:?} {lead}");
        // monotone approach from below
        assert!(vals[0] < vals[1] && vals[1] < vals[2] && vals[2] < lead);
        assert!((lead - vals[2]) < (lead - vals[1]) && (lead - vals[1]) < (lead - vals[0]));
    }
}

#[test]
fn halving_distance_ratio() {
    for (n, k) in [(4u32, 3u32), (5, 3), (6, 4), (7, 5)] {
        let q = p(n, k);
        let want = 2f64.powi(2 * k as i32 - 4);
        let r = |d: f64| lambda_flat(d / 2.0, &q).unwrap() / lambda_flat(d, &q).unwrap();
        let errs: Vec<f64> = [1e-1, 1e-2, 1e-3].iter().map(|&d| (r(d) / want - 1.0).abs()).collect();
        assert!(errs[2] < errs[0] && errs[2] < 1e-3, "{n} {k} {errs:?}");
        // slope of log Λ against log d over a small-d window
        let ds: [f64; 4] = [1e-3, 5e-4, 2.5e-4, 1.25e-4];
        let xs: Vec<f64> = ds.iter().map(|d| d.ln()).collect();
        let ys: Vec<f64> = ds.iter().map(|&d| lambda_flat(d, &q).unwrap().ln()).collect();
        let mx = xs.iter().sum::<f64>() / 4.0;
        let my = ys.iter().sum::<f64>() / 4.0;
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope - (4.0 - 2.0 * k as f64)).abs() < 1e-2, "{slope}");
    }
}

#[test]
fn sweep_csv() {
    let rows = lambda_sweep(&p(5, 3), &[1.0, 0.1]).unwrap();
    let csv = sweep_to_csv(&rows);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,k,d,lambda_flat,scaled");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("5,3,1,"));
    assert!((rows[1].lambda_flat * 0.01 - rows[1].scaled).abs() < 1e-12 * rows[1].scaled);
}

#[test]
fn gamma_correction_formula() {
    assert_eq!(gamma_correction(2.0, 4.0, -24.0 * PI, 3.0), 36.0 * PI);
    assert_eq!(gamma_correction(1.0, 1.0, 0.0, 5.0), 0.0);
}

#[test]
fn params_serde() {
    let q: GreenParams = serde_json::from_str(r#"{"n":5,"k":3}"#).unwrap();
    assert_eq!(q, p(5, 3));
    assert!(serde_json::from_str::<GreenParams>(r#"{"n":5,"k":3,"d":1}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scaled_lambda_is_increasing_and_bounded((n, k) in (4u32..9).prop_flat_map(|n| (Just(n), 3..n)), a in 1e-3f64..1.0, b in 1e-3f64..1.0) {
        let q = p(n, k);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-6);
        let lead = leading_coefficient(&q).unwrap();
        let at_lo = lambda_flat_scaled(lo, &q).unwrap();
        let at_hi = lambda_flat_scaled(hi, &q).unwrap();
        prop_assert!(at_hi < at_lo && at_lo < lead);
    }
}
