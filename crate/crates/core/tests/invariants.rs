use lsfp_core::harness::{gen_gcfp, gen_qp, initial_point};
use lsfp_core::{
    rate_bound, residual, run_algorithm1, run_km_constant, Ball, BetaKind, FixedPointMap, KmConfig,
    RunResult, SearchMode, SolverConfig, Vector,
};

/// `(xₙ, rₙ, dₙ)` for every executed step, rebuilt from the recorded α and β.
fn replay(map: &FixedPointMap, x0: &Vector, run: &RunResult) -> Vec<(Vector, Vector, Vector)> {
    let mut x = x0.clone();
    let mut r = residual(map, &x).unwrap();
    let mut d = r.neg();
    let mut out = Vec::new();
    for rec in run.records.iter().filter(|r| r.step_executed) {
        let dir = if rec.used_fallback { r.neg() } else { d.clone() };
        out.push((x.clone(), r.clone(), dir.clone()));
        x = x.add_scaled(rec.alpha, &dir).unwrap();
        r = residual(map, &x).unwrap();
        d = r.neg().add_scaled(rec.beta_value, &dir).unwrap();
    }
    out
}

fn config(kind: BetaKind) -> SolverConfig {
    SolverConfig {
        beta_kind: kind,
        max_iters: 30,
        ..SolverConfig::default()
    }
}

#[test]
fn dy_beta_positive_and_descent_propagates() {
    let mut steps = 0;
    for seed in 0..6 {
        for inst in [gen_qp(100, seed).unwrap(), gen_gcfp(100, seed).unwrap()] {
            let map = inst.map().unwrap();
            let x0 = initial_point(100, seed, 0).unwrap();
            let run = run_algorithm1(&map, &x0, &config(BetaKind::Dy)).unwrap();
            let states = replay(&map, &x0, &run);
            let executed: Vec<_> = run.records.iter().filter(|r| r.step_executed).collect();
            for (i, rec) in executed.iter().enumerate() {
                let (_, r, d) = &states[i];
                if r.dot(d).unwrap() >= 0.0 || !rec.ls_satisfied {
                    continue;
                }
                steps += 1;
                if run.restarts == 0 {
                    assert!(
                        rec.beta_value > 0.0,
                        "seed {seed} step {i}: beta {}",
                        rec.beta_value
                    );
                }
                if let Some((_, r_next, d_next)) = states.get(i + 1) {
                    if !executed[i + 1].used_fallback {
                        assert!(r_next.dot(d_next).unwrap() < 0.0, "seed {seed} step {}", i + 1);
                    }
                }
            }
        }
    }
    assert!(steps > 0);
}

#[test]
fn fr_ratio_stays_in_strong_wolfe_band() {
    let sigma: f64 = 0.4;
    let mut cfg = config(BetaKind::Fr);
    cfg.linesearch.sigma = sigma;
    cfg.linesearch.mode = SearchMode::StrongWolfe;
    let mut checked = 0;
    for seed in 0..6 {
        for inst in [gen_qp(100, seed).unwrap(), gen_gcfp(100, seed).unwrap()] {
            let map = inst.map().unwrap();
            let x0 = initial_point(100, seed, 1).unwrap();
            let run = run_algorithm1(&map, &x0, &cfg).unwrap();
            if run.restarts > 0 || run.records.iter().any(|r| r.used_fallback) {
                continue;
            }
            for (n, (_, r, d)) in replay(&map, &x0, &run).iter().enumerate() {
                let ratio = r.dot(d).unwrap() / r.norm_squared();
                let partial: f64 = (0..=n).map(|j| sigma.powi(j as i32)).sum();
                let slack = 1e-9 * partial;
                assert!(
                    ratio >= -partial - slack && ratio <= -2.0 + partial + slack,
                    "n={n} ratio={ratio}"
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn sd_residuals_strictly_decrease_on_qp() {
    for seed in 0..5 {
        let inst = gen_qp(200, seed).unwrap();
        let map = inst.map().unwrap();
        let run = run_algorithm1(&map, &initial_point(200, seed, 0).unwrap(), &config(BetaKind::Sd)).unwrap();
        let res = run.residuals();
        assert!(res.windows(2).all(|w| w[1] < w[0]), "{res:?}");
    }
}

#[test]
fn rate_bound_matches_prefix_sums() {
    let inst = gen_qp(100, 4).unwrap();
    let map = inst.map().unwrap();
    let mut cfg = config(BetaKind::Sd);
    cfg.rate_check = true;
    let run = run_algorithm1(&map, &initial_point(100, 4, 0).unwrap(), &cfg).unwrap();
    let bound = run.rate_bound.clone().expect("SD has a bound");
    assert_eq!(
        bound,
        rate_bound(&run.records, BetaKind::Sd, 0.3, 0.5, 1e-8).unwrap()
    );

    let r0 = run.records[0].residual_norm;
    let mut prefix = 0.0;
    for (rec, b) in run.records.iter().zip(&bound) {
        if rec.step_executed {
            prefix += rec.alpha;
        }
        let expected = r0 / (0.3 * prefix).sqrt();
        assert!((b - expected).abs() <= 1e-12 * expected);
        assert!(rec.residual_norm <= b * (1.0 + 1e-9));
    }
}

#[test]
fn km_iterates_are_fejer_monotone() {
    // rotation by θ about p: nonexpansive with Fix = {p}
    let rotation = |theta: f64, p: [f64; 2]| {
        FixedPointMap::new(2, "rotation", move |x: &Vector| {
            let (s, c) = theta.sin_cos();
            let (u, v) = (x[0] - p[0], x[1] - p[1]);
            Vector::new(vec![p[0] + c * u - s * v, p[1] + s * u + c * v])
        })
    };
    let cases: Vec<(FixedPointMap, Vector)> = vec![
        (
            rotation(2.0, [1.0, -1.0]),
            Vector::from_slice(&[1.0, -1.0]).unwrap(),
        ),
        (
            rotation(0.3, [0.0, 4.0]),
            Vector::from_slice(&[0.0, 4.0]).unwrap(),
        ),
        (
            FixedPointMap::projection(Ball::new(Vector::from_slice(&[2.0, 2.0]).unwrap(), 0.5).unwrap()),
            Vector::from_slice(&[2.1, 1.8]).unwrap(),
        ),
    ];
    let cfg = KmConfig {
        max_iters: 5000,
        ..KmConfig::default()
    };
    for (map, fixed) in cases {
        assert!(residual(&map, &fixed).unwrap().norm() < 1e-12);
        let mut x = Vector::from_slice(&[-7.0, 3.0]).unwrap();
        let mut dist = x.distance(&fixed).unwrap();
        for _ in 0..50 {
            let step = run_km_constant(
                &map,
                &x,
                0.5,
                &KmConfig {
                    max_iters: 1,
                    ..cfg.clone()
                },
            )
            .unwrap();
            x = step.final_point;
            let next = x.distance(&fixed).unwrap();
            assert!(next <= dist + 1e-9);
            dist = next;
        }
        let run = run_km_constant(&map, &Vector::from_slice(&[-7.0, 3.0]).unwrap(), 0.5, &cfg).unwrap();
        assert!(run.final_residual() < 1e-6);
    }
}

#[test]
fn trace_counts_are_rederivable() {
    let inst = gen_gcfp(50, 2).unwrap();
    let map = inst.map().unwrap();
    let run = run_algorithm1(
        &map,
        &initial_point(50, 2, 0).unwrap(),
        &config(BetaKind::PrpPlus),
    )
    .unwrap();
    let n2 = run
        .records
        .iter()
        .filter(|r| r.alpha > 0.0 && r.step_executed)
        .count();
    assert_eq!(run.executed_steps(), n2);
    assert_eq!(run.records.len(), n2 + 1);
    assert!(run.records.iter().enumerate().all(|(i, r)| r.n == i));
}
