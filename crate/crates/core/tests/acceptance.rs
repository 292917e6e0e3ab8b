use std::process::ExitCode;
use std::time::Instant;

use lsfp_core::harness::{gen_gcfp_with, gen_qp, GcfpOptions, ProblemData};
use lsfp_core::{
    bisection_wolfe_search, conditions_hold, make_projected_gradient_map, rate_bound, residual,
    run_algorithm1, run_experiment, run_km_constant, Algo, AlgoSpec, Ball, BetaKind, DiagonalQuadratic,
    ExperimentConfig, ExperimentReport, FixedPointMap, KmConfig, LineSearchConfig, ProblemInstance,
    ProblemKind, Rng, RunResult, SearchMode, SolverConfig, Vector,
};

const DESK_DIM: usize = 1000;
const DESK_SAMPLES: usize = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

struct Desk {
    qp: Vec<(Algo, ExperimentReport)>,
    gcfp: Vec<(Algo, ExperimentReport)>,
}

impl Desk {
    fn run() -> Self {
        let experiment = |kind, algo| {
            let cfg = ExperimentConfig::new(AlgoSpec::new(algo), kind, DESK_DIM, DESK_SAMPLES);
            (algo, run_experiment(&cfg).expect("desk experiment"))
        };
        Self {
            qp: Algo::ALL
                .iter()
                .map(|&a| experiment(ProblemKind::QpBall, a))
                .collect(),
            gcfp: [Algo::Sd2, Algo::Sd3]
                .iter()
                .map(|&a| experiment(ProblemKind::Gcfp, a))
                .collect(),
        }
    }

    fn qp(&self, algo: Algo) -> &ExperimentReport {
        &self.qp.iter().find(|(a, _)| *a == algo).unwrap().1
    }

    fn gcfp(&self, algo: Algo) -> &ExperimentReport {
        &self.gcfp.iter().find(|(a, _)| *a == algo).unwrap().1
    }
}

fn random_map(rng: &mut Rng) -> FixedPointMap {
    let dim = 1 + (rng.uniform(0.0, 6.0) as usize);
    let center = rng.sample_uniform_box(dim, -3.0, 3.0).unwrap();
    let ball = Ball::new(center, rng.uniform(0.1, 3.0)).unwrap();
    if rng.uniform(0.0, 1.0) < 0.5 {
        let mut eig: Vec<f64> = (0..dim).map(|_| rng.uniform_closed(0.0, 10.0)).collect();
        eig[0] = 10.0;
        let q = DiagonalQuadratic::new(
            Vector::new(eig).unwrap(),
            rng.sample_uniform_box(dim, -8.0, 8.0).unwrap(),
        )
        .unwrap();
        let lambda = rng.uniform(0.05, 1.0) * 2.0 / q.lambda_max();
        make_projected_gradient_map(q, ball, lambda).unwrap()
    } else {
        let m = 1 + (rng.uniform(0.0, 5.0) as usize);
        let inner = (0..m)
            .map(|_| {
                Ball::new(
                    rng.sample_uniform_box(dim, -6.0, 6.0).unwrap(),
                    rng.uniform(0.1, 2.0),
                )
                .unwrap()
            })
            .collect();
        lsfp_core::make_gcfp_map(ball, inner, vec![1.0 / m as f64; m]).unwrap()
    }
}

fn criterion_1() -> Outcome {
    let mut rng = Rng::new(2024);
    let (mut accepted, mut attempts, mut violations) = (0usize, 0usize, 0usize);
    while accepted < 10_000 && attempts < 200_000 {
        attempts += 1;
        let map = random_map(&mut rng);
        let x = rng.sample_uniform_box(map.dim(), -10.0, 10.0).unwrap();
        let d = if rng.uniform(0.0, 1.0) < 0.3 {
            residual(&map, &x).unwrap().neg()
        } else {
            rng.sample_uniform_box(map.dim(), -5.0, 5.0).unwrap()
        };
        let delta = rng.uniform(0.01, 0.5);
        let strong = rng.uniform(0.0, 1.0) < 0.3;
        let sigma = if strong {
            rng.uniform(delta, 0.5)
        } else {
            rng.uniform(delta, 0.99)
        };
        let config = LineSearchConfig {
            delta,
            sigma,
            mode: if strong {
                SearchMode::StrongWolfe
            } else {
                SearchMode::Wolfe
            },
            ..LineSearchConfig::default()
        };
        let out = bisection_wolfe_search(&map, &x, &d, &config).unwrap();
        if out.satisfied && out.probes > 0 {
            accepted += 1;
            if !conditions_hold(&map, &x, &d, out.alpha, &config).unwrap() {
                violations += 1;
            }
        }
    }
    outcome(
        accepted == 10_000 && violations == 0,
        format!("{accepted} accepted searches re-checked, {violations} violations ({attempts} attempts)"),
    )
}

fn criterion_2(desk: &Desk) -> Outcome {
    let sr = |a| desk.qp(a).sr_percent;
    let (sd1, sd2, sd3) = (sr(Algo::Sd1), sr(Algo::Sd2), sr(Algo::Sd3));
    outcome(
        sd2 == 100.0 && sd3 == 100.0 && sd1 < 100.0,
        format!("SR(SD-1)={sd1:.1} SR(SD-2)={sd2:.1} SR(SD-3)={sd3:.1}"),
    )
}

fn criterion_3(desk: &Desk) -> Outcome {
    let sr = |a| desk.qp(a).sr_percent;
    let prp = sr(Algo::PrpPlus);
    let others = [Algo::Fr, Algo::Dy, Algo::Hz];
    let pass = prp >= 95.0 && others.iter().all(|&a| sr(a) < prp);
    let listing: Vec<String> = [Algo::PrpPlus, Algo::Fr, Algo::Dy, Algo::Hz, Algo::HsPlus]
        .iter()
        .map(|&a| format!("SR({a})={:.1}", sr(a)))
        .collect();
    outcome(pass, listing.join(" "))
}

fn reached_within(run: &RunResult, tol: f64, iters: usize) -> bool {
    run.records.iter().any(|r| r.n <= iters && r.residual_norm <= tol)
}

fn criterion_4(desk: &Desk) -> Outcome {
    let share = |algo, iters| {
        let report = desk.gcfp(algo);
        let hits = report
            .traces
            .iter()
            .filter(|t| reached_within(t, 1e-10, iters))
            .count();
        hits as f64 / report.traces.len() as f64
    };
    let (sd3, sd2) = (share(Algo::Sd3, 5), share(Algo::Sd2, 6));
    outcome(
        sd3 >= 0.9 && sd2 >= 0.9,
        format!(
            "SD-3 within 5: {:.0}%, SD-2 within 6: {:.0}%",
            100.0 * sd3,
            100.0 * sd2
        ),
    )
}

fn bound_violations(run: &RunResult, kind: BetaKind) -> usize {
    let bound = rate_bound(&run.records, kind, 0.3, 0.5, 1e-8).unwrap();
    run.records
        .iter()
        .zip(&bound)
        .filter(|(r, b)| r.residual_norm > **b * (1.0 + 1e-9))
        .count()
}

fn criterion_5(desk: &Desk) -> Outcome {
    let mut checked = 0;
    let mut skipped = 0;
    let mut violations = 0;
    for report in [desk.qp(Algo::Sd3), desk.gcfp(Algo::Sd3)] {
        for run in &report.traces {
            checked += 1;
            violations += bound_violations(run, BetaKind::Sd);
        }
    }
    for (algo, kind) in [(Algo::Dy, BetaKind::Dy), (Algo::Fr, BetaKind::Fr)] {
        for run in &desk.qp(algo).traces {
            let steps_ok =
                run.records.iter().filter(|r| r.step_executed).all(|r| {
                    r.ls_satisfied && !r.used_fallback && (kind != BetaKind::Fr || r.strong_wolfe_ok)
                });
            if steps_ok {
                checked += 1;
                violations += bound_violations(run, kind);
            } else {
                skipped += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!("{checked} runs checked, {skipped} without the step hypotheses, {violations} violations"),
    )
}

fn criterion_6(desk: &Desk) -> Outcome {
    let mut checked = 0;
    let mut violations = 0;
    let line_search_algos = [
        Algo::Sd3,
        Algo::Fr,
        Algo::PrpPlus,
        Algo::HsPlus,
        Algo::Dy,
        Algo::Hz,
    ];
    let reports = desk
        .qp
        .iter()
        .chain(desk.gcfp.iter())
        .filter(|(a, _)| line_search_algos.contains(a));
    for (_, report) in reports {
        for run in &report.traces {
            let executed: Vec<_> = run.records.iter().filter(|r| r.step_executed).collect();
            if !executed.iter().all(|r| r.ls_satisfied && r.descent_ok) {
                continue;
            }
            checked += 1;
            if run
                .records
                .windows(2)
                .any(|w| w[1].residual_norm >= w[0].residual_norm)
            {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!("{checked} traces checked, {violations} violations"),
    )
}

fn criterion_7() -> Outcome {
    let mut violations = 0;
    let cfg = KmConfig::default();
    for seed in 0..100 {
        let inst = gen_qp(50, seed).unwrap();
        let map = inst.map().unwrap();
        let x0 = lsfp_core::harness::initial_point(50, seed, 0).unwrap();
        let run = run_km_constant(&map, &x0, 0.5, &cfg).unwrap();
        violations += run
            .records
            .windows(2)
            .filter(|w| w[1].residual_norm > w[0].residual_norm + 1e-9)
            .count();
    }
    let zero = FixedPointMap::constant(Vector::from_slice(&[0.0]).unwrap());
    let mut x = Vector::from_slice(&[1.0]).unwrap();
    let mut closed_form_err = 0.0f64;
    for n in 1..=10 {
        let run = run_km_constant(
            &zero,
            &x,
            0.5,
            &KmConfig {
                max_iters: 1,
                ..cfg.clone()
            },
        )
        .unwrap();
        x = run.final_point;
        closed_form_err = closed_form_err.max((x[0] - 2f64.powi(-n)).abs());
    }
    let run = run_km_constant(&zero, &Vector::from_slice(&[1.0]).unwrap(), 0.5, &cfg).unwrap();
    for r in &run.records {
        closed_form_err = closed_form_err.max((r.residual_norm - 2f64.powi(-(r.n as i32))).abs());
    }
    outcome(
        violations == 0 && closed_form_err <= 1e-12,
        format!("{violations} monotonicity violations over 100 instances, closed-form error {closed_form_err:.1e}"),
    )
}

/// Minimizer of the instance objective over a square grid of spacing `step`
/// covering the feasible ball, with grid points outside the ball pulled onto
/// its boundary so boundary minimizers are resolved as finely as interior ones.
fn grid_minimizer(inst: &ProblemInstance, step: f64) -> Vector {
    let ball = inst.feasible_ball();
    let (c, r) = (ball.center(), ball.radius());
    let k = (r / step).ceil() as i64;
    let mut best = (f64::INFINITY, c.clone());
    for i in -k..=k {
        for j in -k..=k {
            let (mut u, mut v) = (i as f64 * step, j as f64 * step);
            let len = u.hypot(v);
            if len > r {
                u *= r / len;
                v *= r / len;
            }
            let p = Vector::from_slice(&[c[0] + u, c[1] + v]).unwrap();
            let f = inst.objective(&p).unwrap();
            if f < best.0 {
                best = (f, p);
            }
        }
    }
    best.1
}

fn criterion_8() -> Outcome {
    let config = SolverConfig {
        max_iters: 500,
        ..SolverConfig::default()
    };
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    let toy_gcfp = GcfpOptions::default();
    for seed in 0..3 {
        for inst in [
            gen_qp(2, seed).unwrap(),
            gen_gcfp_with(2, seed, &toy_gcfp).unwrap(),
        ] {
            let map = inst.map().unwrap();
            let x0 = lsfp_core::harness::initial_point(2, seed, 0).unwrap();
            let run = run_algorithm1(&map, &x0, &config).unwrap();
            let oracle = grid_minimizer(&inst, 1e-3);
            let err = run.final_point.distance(&oracle).unwrap();
            worst = worst.max(err);
            let label = match inst.data {
                ProblemData::Qp { .. } => "qp",
                ProblemData::Gcfp { .. } => "gcfp",
            };
            details.push(format!(
                "{label}/{seed}={err:.1e} (residual {:.0e})",
                run.final_residual()
            ));
        }
    }
    outcome(
        worst <= 1e-2,
        format!(
            "max distance to grid minimizer {worst:.2e} [{}]",
            details.join(" ")
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let desk = Desk::run();
    let desk_secs = start.elapsed().as_secs_f64();

    let criteria: Vec<(&str, Check)> = vec![
        ("line-search soundness", Box::new(criterion_1)),
        ("SR reproduction for SD-1/2/3", Box::new(|| criterion_2(&desk))),
        ("SR trend for CG variants", Box::new(|| criterion_3(&desk))),
        ("GCFP fast termination", Box::new(|| criterion_4(&desk))),
        ("rate-bound dominance", Box::new(|| criterion_5(&desk))),
        ("monotone residuals", Box::new(|| criterion_6(&desk))),
        ("KM baseline properties", Box::new(criterion_7)),
        ("toy-scale grid oracle", Box::new(criterion_8)),
    ];
    println!("desk-scale experiments: {desk_secs:.1}s");
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = check();
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        if !result.pass {
            failures += 1;
        }
        println!(
            "criterion {} [{verdict}] {name}: {} ({:.1}s)",
            i + 1,
            result.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
