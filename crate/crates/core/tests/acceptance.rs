//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rulab::config::ConfigTree;
use rulab::solver::SolveStatus;
use rulab::{
    apply_a, apply_b, estimate_lambda_1_direct, estimate_lambda_p, scalar_closed_form, solve_fixed_point,
    sweep_stability_map, ByConstantVol, ByStochVol, DiscreteOperator, FiniteChain, FramingSpec, McSettings,
    MehraPrescott, ModelSpec, PreferenceSpec, ShockSpec, Ssy,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let elapsed = start.elapsed();
    ensure(elapsed <= limit, format!("took {elapsed:.1?}, limit {limit:?}"))
}

fn table1_reproduction() -> Outcome {
    let start = Instant::now();
    let prefs = PreferenceSpec::new(0.998, 10.0, 1.5).unwrap();
    let model: ModelSpec = ByStochVol::table1().into();
    let settings = McSettings {
        p: 2.0,
        n: 1000,
        m: 1000,
        j: 100,
        seed: 1,
        ..McSettings::default()
    };
    let est = estimate_lambda_p(&model, &prefs, &settings).map_err(|e| e.to_string())?;
    ensure(
        (est.lambda_p - 0.998).abs() <= 0.005,
        format!("lambda_2 = {:.5}, expected 0.998 +- 0.005", est.lambda_p),
    )?;
    within_time(start, Duration::from_secs(600))?;
    Ok(format!(
        "lambda_2 = {:.5} (se {:.1e}) in {:.1?}",
        est.lambda_p,
        est.lambda_std_error,
        start.elapsed()
    ))
}

fn constant_vol_spectral_oracle() -> Outcome {
    let start = Instant::now();
    let prefs = PreferenceSpec::new(0.99, 2.0, 1.5).unwrap();
    let model: ModelSpec = ByConstantVol::new(0.01, 0.5, 0.1).unwrap().into();
    let op = DiscreteOperator::build(&model, &prefs, 401, 8.0).map_err(|e| e.to_string())?;
    let rho = op.spectral_radius_power(1e-13, 100_000).map_err(|e| e.to_string())?.rho;
    // Exponential eigenfunction exp(a x), a = (1 - gamma) / (1 - rho):
    // rho = exp((1-g) mu + (1-g)^2 s^2 / 2 + a^2 s^2 / 2) = exp(0.015).
    let exact = 0.015f64.exp();
    let rel = (rho / exact - 1.0).abs();
    ensure(rel <= 1e-3, format!("rho = {rho}, exact {exact}, rel err {rel:.2e}"))?;
    within_time(start, Duration::from_secs(5))?;
    Ok(format!("rel err {rel:.2e} in {:.1?}", start.elapsed()))
}

fn random_chain(rng: &mut ChaCha8Rng) -> FiniteChain {
    let n = rng.random_range(2..=10);
    let transition: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|x| x / s).collect()
        })
        .collect();
    let growth = (0..n)
        .map(|_| (0..n).map(|_| rng.random_range(-0.02..0.02)).collect())
        .collect();
    FiniteChain::new(transition, growth).unwrap()
}

fn dense_radius(op: &DiscreteOperator) -> f64 {
    let n = op.len();
    let m = DMatrix::from_fn(n, n, |i, j| op.entry(i, j));
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn finite_chain_triple_agreement() -> Outcome {
    let start = Instant::now();
    let prefs = PreferenceSpec::new(0.99, 3.0, 1.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_power, mut worst_gelfand, mut worst_z) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..10 {
        let chain = random_chain(&mut rng);
        let states = chain.n_states();
        let model: ModelSpec = chain.into();
        let op = DiscreteOperator::build(&model, &prefs, 0, 0.0).unwrap();
        let exact = dense_radius(&op);
        let power = op
            .spectral_radius_power(1e-14, 1_000_000)
            .map_err(|e| e.to_string())?
            .rho;
        let d_power = (power - exact).abs();
        ensure(
            d_power <= 1e-10,
            format!("case {case} ({states} states): power {power} vs dense {exact}"),
        )?;
        let a = op.gelfand_sequence(200, 2.0).map_err(|e| e.to_string())?;
        let d_gelfand = (a[199] - exact).abs();
        ensure(d_gelfand <= 1e-3, format!("case {case}: a_200 = {} vs {exact}", a[199]))?;
        // The Monte Carlo estimator targets the finite-horizon norm a_50.
        let settings = McSettings {
            p: 2.0,
            n: 50,
            m: 1000,
            j: 1000,
            seed: 500 + case,
            ..McSettings::default()
        };
        let est = estimate_lambda_p(&model, &prefs, &settings).map_err(|e| e.to_string())?;
        let z = (est.rho_hat - a[49]).abs() / est.std_error;
        ensure(
            z <= 3.0,
            format!(
                "case {case}: rho_hat {} vs a_50 {} is {z:.2} std errors (se {:.2e})",
                est.rho_hat, a[49], est.std_error
            ),
        )?;
        worst_power = worst_power.max(d_power);
        worst_gelfand = worst_gelfand.max(d_gelfand);
        worst_z = worst_z.max(z);
    }
    within_time(start, Duration::from_secs(60))?;
    Ok(format!(
        "max |power-dense| {worst_power:.1e}, max |a_200-rho| {worst_gelfand:.1e}, max MC z {worst_z:.2} in {:.1?}",
        start.elapsed()
    ))
}

/// Three-state chain shifted so that `beta * rho(K)^(1/theta) = lambda`.
fn theorem_fixture(prefs: &PreferenceSpec, lambda: f64) -> DiscreteOperator {
    let base = FiniteChain::new(
        vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.5, 0.3], vec![0.1, 0.4, 0.5]],
        vec![vec![0.01, 0.0, -0.01], vec![0.005, 0.0, -0.005], vec![0.0, -0.01, 0.02]],
    )
    .unwrap();
    let model: ModelSpec = base.clone().into();
    let rho0 = dense_radius(&DiscreteOperator::build(&model, prefs, 0, 0.0).unwrap());
    let target = (lambda / prefs.beta()).powf(prefs.theta());
    let shift = (target / rho0).ln() / prefs.one_minus_gamma();
    let model: ModelSpec = base.shifted(shift).into();
    DiscreteOperator::build(&model, prefs, 0, 0.0).unwrap()
}

fn theorem_equivalence_suite() -> Outcome {
    let start = Instant::now();
    let beta = 0.98;
    let prefs = [
        PreferenceSpec::new(beta, 10.0, 1.5).unwrap(),
        PreferenceSpec::new(beta, 2.0, 2.0).unwrap(),
        PreferenceSpec::new(beta, 0.75, 2.0).unwrap(),
        PreferenceSpec::new(beta, 0.5, 4.0 / 3.0).unwrap(),
    ];
    let mut fixtures = 0;
    for p in &prefs {
        for lambda in [0.5, 0.9, 0.99, 1.01, 1.4] {
            let op = theorem_fixture(p, lambda);
            let realized = p.stability_coefficient(dense_radius(&op));
            ensure(
                (realized - lambda).abs() < 1e-9,
                format!("fixture Lambda {realized} != {lambda}"),
            )?;
            // xi = |1 - Lambda| keeps a stable fixed point of order one.
            let shock = ShockSpec::new(vec![(1.0 - lambda).abs() / (1.0 - beta); op.len()]).unwrap();
            let mut solutions = Vec::new();
            for scale in [0.01, 1.0, 100.0] {
                let g0 = vec![scale; op.len()];
                let r = solve_fixed_point(|g| apply_a(&op, p, &shock, g), &g0, 1e-11, 100_000)
                    .map_err(|e| e.to_string())?;
                let tag = format!("theta {}, Lambda {lambda}, g0 {scale}", p.theta());
                if lambda < 1.0 {
                    ensure(r.status == SolveStatus::Converged, format!("{tag}: {:?}", r.status))?;
                    let g = r.solution.unwrap();
                    ensure(g.iter().all(|v| *v > 0.0), format!("{tag}: nonpositive solution"))?;
                    solutions.push(g);
                } else {
                    let expected = if p.theta() < 0.0 {
                        SolveStatus::CollapsedToZero
                    } else {
                        SolveStatus::Diverged
                    };
                    ensure(
                        r.status == expected,
                        format!("{tag}: {:?}, expected {expected:?}", r.status),
                    )?;
                }
            }
            for s in solutions.iter().skip(1) {
                let gap = s
                    .iter()
                    .zip(&solutions[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                ensure(
                    gap <= 1e-6,
                    format!("theta {}, Lambda {lambda}: starts disagree by {gap}", p.theta()),
                )?;
            }
            fixtures += 1;
        }
    }
    within_time(start, Duration::from_secs(60))?;
    Ok(format!("{fixtures} fixtures in {:.1?}", start.elapsed()))
}

fn singleton_op(k: f64, prefs: &PreferenceSpec) -> DiscreteOperator {
    let model: ModelSpec = FiniteChain::singleton(k, prefs.one_minus_gamma()).unwrap().into();
    DiscreteOperator::build(&model, prefs, 0, 0.0).unwrap()
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo);
    assert!(f_lo * f(hi) < 0.0, "no sign change");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == (f_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn narrow_framing_counterexample() -> Outcome {
    let prefs = PreferenceSpec::new(0.99, 2.0, 2.0).unwrap();
    let (k, b) = (0.5, 0.3);
    let op = singleton_op(k, &prefs);
    let lambda = prefs.stability_coefficient(k);
    ensure((lambda - 1.4).abs() < 1e-3, format!("Lambda = {lambda}"))?;
    let a = solve_fixed_point(|g| apply_a(&op, &prefs, &ShockSpec::unit(1), g), &[1.0], 1e-12, 100_000)
        .map_err(|e| e.to_string())?;
    ensure(a.status == SolveStatus::CollapsedToZero, format!("A: {:?}", a.status))?;
    let framing = FramingSpec::new(vec![b]).unwrap();
    let r =
        solve_fixed_point(|g| apply_b(&op, &prefs, &framing, g), &[1.0], 1e-12, 100_000).map_err(|e| e.to_string())?;
    ensure(r.status == SolveStatus::Converged, format!("B: {:?}", r.status))?;
    let theta = prefs.theta();
    let oracle = bisect(
        |g| g - ((1.0 - 0.99) + 0.99 * (k * g + b).powf(1.0 / theta)).powf(theta),
        1e-12,
        1e3,
    );
    let g = r.solution.unwrap()[0];
    ensure(
        (g - oracle).abs() <= 1e-9,
        format!("B fixed point {g} vs bisection {oracle}"),
    )?;
    Ok(format!(
        "Lambda {lambda:.4}; A collapses after {} steps; B -> {g:.12} (oracle {oracle:.12})",
        a.iterations
    ))
}

fn scalar_closed_form_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 50 {
        let gamma = rng.random_range(0.2..8.0);
        let psi = rng.random_range(0.4..3.0);
        let beta = rng.random_range(0.8..0.999);
        let Ok(prefs) = PreferenceSpec::new(beta, gamma, psi) else {
            continue;
        };
        let theta = prefs.theta();
        if !(0.2..=5.0).contains(&theta.abs()) {
            continue;
        }
        let lambda = rng.random_range(0.1..0.97);
        let k = (lambda / beta).powf(theta);
        let xi = (1.0 - lambda) * rng.random_range(0.5..2.0);
        let exact = scalar_closed_form(&prefs, k, xi)
            .unwrap()
            .ok_or("closed form reported unstable")?;
        let op = singleton_op(k, &prefs);
        let shock = ShockSpec::new(vec![xi / (1.0 - beta)]).unwrap();
        let r = solve_fixed_point(|g| apply_a(&op, &prefs, &shock, g), &[1.0], 1e-14, 1_000_000)
            .map_err(|e| e.to_string())?;
        ensure(
            r.status == SolveStatus::Converged,
            format!("theta {theta}: {:?}", r.status),
        )?;
        let err = (r.solution.unwrap()[0] - exact).abs() / exact.max(1.0);
        ensure(err <= 1e-9, format!("theta {theta}, Lambda {lambda}: error {err:.2e}"))?;
        worst = worst.max(err);
        done += 1;
    }
    Ok(format!("50 configurations, max scaled error {worst:.1e}"))
}

fn hilbert_schmidt_bound() -> Outcome {
    let (mu, rho, sigma, gamma) = (0.0015, 0.979, 0.0078, 10.0);
    let prefs = PreferenceSpec::new(0.998, gamma, 1.5).unwrap();
    let model: ModelSpec = ByConstantVol::new(mu, rho, sigma).unwrap().into();
    let coarse = DiscreteOperator::build(&model, &prefs, 201, 6.0)
        .map_err(|e| e.to_string())?
        .hs_norm();
    let fine = DiscreteOperator::build(&model, &prefs, 401, 6.0)
        .map_err(|e| e.to_string())?
        .hs_norm();
    let a: f64 = 1.0 - gamma;
    let s2 = sigma * sigma;
    let bound = (2.0 * a * a * s2 + 2.0 * a * mu).exp() * (1.0 - rho * rho).sqrt()
        / ((2.0 * std::f64::consts::PI).sqrt() * s2)
        * (4.0 * a * a * s2 / (2.0 * (1.0 - rho * rho))).exp();
    ensure(fine.is_finite() && fine > 0.0, format!("hs norm {fine}"))?;
    ensure(fine <= bound, format!("hs norm {fine} exceeds bound {bound}"))?;
    let change = (fine / coarse - 1.0).abs();
    ensure(
        change < 0.01,
        format!("refinement changed hs norm by {:.2}%", 100.0 * change),
    )?;
    Ok(format!(
        "hs {fine:.4} <= bound {bound:.4}; refinement change {:.1e}",
        change
    ))
}

fn l1_consistency() -> Outcome {
    let start = Instant::now();
    let cases: Vec<(&str, ModelSpec, PreferenceSpec, usize)> = vec![
        (
            "by_constant_vol",
            ByConstantVol::new(0.0015, 0.979, 0.0078).unwrap().into(),
            PreferenceSpec::new(0.998, 10.0, 1.5).unwrap(),
            200,
        ),
        (
            "by_stoch_vol",
            ByStochVol::table1().into(),
            PreferenceSpec::new(0.998, 10.0, 1.5).unwrap(),
            200,
        ),
        (
            "mehra_prescott",
            MehraPrescott::new(0.018, 0.5).unwrap().into(),
            PreferenceSpec::new(0.99, 1.05, 1.5).unwrap(),
            50,
        ),
        (
            "ssy",
            Ssy::example().into(),
            PreferenceSpec::new(0.999, 8.89, 1.97).unwrap(),
            200,
        ),
    ];
    let mut summary = Vec::new();
    for (name, model, prefs, n) in cases {
        let direct = estimate_lambda_1_direct(&model, &prefs, n, 20_000, 101).map_err(|e| e.to_string())?;
        let settings = McSettings {
            p: 1.0,
            n,
            m: 1000,
            j: 20,
            seed: 202,
            ..McSettings::default()
        };
        let nested = estimate_lambda_p(&model, &prefs, &settings).map_err(|e| e.to_string())?;
        let se = direct.std_error.hypot(nested.std_error);
        let z = (direct.rho_hat - nested.rho_hat).abs() / se;
        ensure(
            z <= 3.0,
            format!(
                "{name}: direct {} vs nested {} ({z:.2} combined std errors)",
                direct.rho_hat, nested.rho_hat
            ),
        )?;
        summary.push(format!("{name} z={z:.2}"));
    }
    Ok(format!("{} in {:.1?}", summary.join(", "), start.elapsed()))
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let model: ModelSpec = ByConstantVol::new(0.0015, 0.979, 0.0078).unwrap().into();
    for prefs in [
        PreferenceSpec::new(0.998, 10.0, 1.5).unwrap(),
        PreferenceSpec::new(0.96, 0.5, 4.0 / 3.0).unwrap(),
    ] {
        let op = DiscreteOperator::build(&model, &prefs, 41, 6.0).unwrap();
        let n = op.len();
        let shock = ShockSpec::unit(n);
        let framing = FramingSpec::new(vec![0.3; n]).unwrap();
        for _ in 0..100 {
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
            let h: Vec<f64> = g.iter().map(|v| v + rng.random_range(0.0..1.0)).collect();
            for (lo, hi) in [
                (apply_a(&op, &prefs, &shock, &g), apply_a(&op, &prefs, &shock, &h)),
                (apply_b(&op, &prefs, &framing, &g), apply_b(&op, &prefs, &framing, &h)),
            ] {
                let (lo, hi) = (lo.map_err(|e| e.to_string())?, hi.map_err(|e| e.to_string())?);
                ensure(
                    lo.iter().zip(&hi).all(|(a, b)| a <= b),
                    format!("isotonicity fails for theta {}", prefs.theta()),
                )?;
            }
            let kg = op.apply(&g).map_err(|e| e.to_string())?;
            ensure(kg.iter().all(|v| *v > 0.0), "K g not positive")?;
        }
    }

    let model: ModelSpec = ByStochVol::table1().into();
    let prefs = PreferenceSpec::new(0.998, 10.0, 1.5).unwrap();
    let settings = McSettings {
        n: 100,
        m: 200,
        j: 20,
        seed: 5,
        ..McSettings::default()
    };
    let base = estimate_lambda_p(&model, &prefs, &settings).map_err(|e| e.to_string())?;
    for beta in [0.5, 0.75, 0.9] {
        let est = estimate_lambda_p(&model, &prefs.with_beta(beta).unwrap(), &settings).map_err(|e| e.to_string())?;
        let ratio_gap = (est.lambda_p / beta - base.lambda_p / 0.998).abs();
        ensure(
            ratio_gap < 1e-14,
            format!("Lambda not linear in beta (gap {ratio_gap:.1e})"),
        )?;
    }
    let mut last = 0.0;
    for p in [1.0, 1.5, 2.0, 3.0, 4.0] {
        let est = estimate_lambda_p(&model, &prefs, &McSettings { p, ..settings }).map_err(|e| e.to_string())?;
        ensure(est.rho_hat >= last, format!("rho_hat decreased at p = {p}"))?;
        last = est.rho_hat;
    }
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_lambda_p(&model, &prefs, &settings))
            .unwrap()
    };
    let (one, eight) = (run(1), run(8));
    ensure(
        one == eight && one.lambda_p.to_bits() == eight.lambda_p.to_bits(),
        "1-thread and 8-thread runs differ",
    )?;
    Ok("isotonicity, positivity, beta-linearity, p-monotonicity, thread determinism".into())
}

fn ssy_regime_stable() -> Outcome {
    let text = r#"
[model]
name = "ssy"
mu_c = 0.0016
rho = 0.987
phi_c = 1.0
phi_z = 0.215
sigma_bar = 0.0032
rho_hc = 0.991
rho_hz = 0.974
sigma_hc = 0.0095
sigma_hz = 0.0375
m_bound = 1.0

[preferences]
beta = 0.999
gamma = 8.89
psi = 1.97

[estimation]
p = 2.0
n = 1000
m = 200
J = 50
seed = 8

[sweep]
a = { name = "psi", lo = 1.97, hi = 2.5, steps = 2 }
b = { name = "mu_c", lo = 0.0016, hi = 0.0012, steps = 2 }
"#;
    let cells = sweep_stability_map(&ConfigTree::parse(text).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let base = &cells[0];
    ensure(
        base.status == "stable",
        format!("stated regime classified {} (Lambda {})", base.status, base.lambda_p),
    )?;
    let all: Vec<String> = cells
        .iter()
        .map(|c| format!("{:.5}:{}", c.lambda_p, c.status))
        .collect();
    Ok(format!("cells [{}]", all.join(", ")))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("table 1 reproduction", table1_reproduction),
        ("constant-vol spectral oracle", constant_vol_spectral_oracle),
        ("finite-chain triple agreement", finite_chain_triple_agreement),
        ("existence equivalence suite", theorem_equivalence_suite),
        ("narrow-framing counterexample", narrow_framing_counterexample),
        ("scalar closed form", scalar_closed_form_suite),
        ("hilbert-schmidt bound", hilbert_schmidt_bound),
        ("L1 consistency", l1_consistency),
        ("property suites", property_suites),
        ("ssy regime classified stable", ssy_regime_stable),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
