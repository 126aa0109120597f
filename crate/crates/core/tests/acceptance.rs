//! End-to-end acceptance checks for the library: gradient correctness,
//! encoder and mollifier guarantees, perturbation bounds, integrator order,
//! structural dynamics, and excitation statistics. Each test is one
//! criterion and prints as one pass/fail line in the harness output.

use std::f64::consts::PI;
use std::time::Instant;

use oscnet_core::analysis::lemma1_decay_report;
use oscnet_core::diffcore::{finite_difference_gradient, DenseMatrix};
use oscnet_core::dynsys::{
    damping_matrix, modal, modal_damping_ratios, perturbation_bound_check, rk4_integrate,
    BoucWenConfig, BoucWenSystem,
};
use oscnet_core::encoder::{build_sine_encoder, sine_transform_quadrature, SineEncoderSpec};
use oscnet_core::nets::{init_mlp, Activation, Layer, MlpParams};
use oscnet_core::oscillator::{
    oscillator_forward, oscillator_loss_and_grad, LossMode, OscillatorModel,
};
use oscnet_core::signal::Signal;
use oscnet_core::stochastic::{
    harmonizable_value_at, sample_harmonizable_coeffs, SeededRng, SpectrumGrid,
};

fn within(start: Instant, seconds: f64, what: &str) {
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        elapsed < seconds,
        "{what} took {elapsed:.1}s, budget {seconds}s"
    );
}

#[test]
fn criterion_01_backprop_matches_finite_differences() {
    let start = Instant::now();
    let mut model = OscillatorModel {
        gamma: init_mlp(&[5, 4, 2], Activation::Prelu, false, 11),
        pi: init_mlp(&[4, 4, 1], Activation::Prelu, true, 12),
        r: 2,
        p: 1,
        q: 1,
    };
    let mut rng = SeededRng::new(21, 0);
    // Three integration steps: four grid points.
    let batch: Vec<(Signal, Signal)> = (0..2)
        .map(|_| {
            let u = Signal::from_fn(1, 0.1, 4, |_| vec![rng.uniform(-1.0, 1.0)]).unwrap();
            let y = Signal::from_fn(1, 0.1, 4, |_| vec![rng.uniform(-1.0, 1.0)]).unwrap();
            (u, y)
        })
        .collect();
    let x = model.flatten();
    let mut max_rel = 0.0_f64;
    for r_power in [2u32, 8] {
        let (_, grad) =
            oscillator_loss_and_grad(&mut model, &batch, r_power, LossMode::Train).unwrap();
        let proto = model.clone();
        let batch_ref = &batch;
        let mut f = |params: &[f64]| -> f64 {
            let mut m = proto.clone();
            m.unflatten(params).unwrap();
            oscillator_loss_and_grad(&mut m, batch_ref, r_power, LossMode::Train)
                .unwrap()
                .0
        };
        let fd = finite_difference_gradient(&mut f, &x, 1e-6).unwrap();
        for (&a, &b) in grad.0.iter().zip(&fd.0) {
            max_rel = max_rel.max((a - b).abs() / f64::max(1.0, b.abs()));
        }
    }
    // Every parameter slot is exercised, including PReLU slopes and
    // batch-norm affine weights.
    assert_eq!(x.len(), model.param_count());
    assert!(
        max_rel < 1e-5,
        "gradient relative error {max_rel:.2e} exceeds 1e-5"
    );
    within(start, 10.0, "gradient check");
}

#[test]
fn criterion_02_encoder_states_match_quadrature_oracle() {
    let start = Instant::now();
    let frequencies = vec![PI / 20.0, PI / 2.0, PI, 2.0 * PI];
    let spec = SineEncoderSpec {
        frequencies: frequencies.clone(),
        p: 1,
    };
    let m = spec.m();
    let gamma = build_sine_encoder(&spec).unwrap();
    let mut w = DenseMatrix::zeros(m, m + 2);
    for i in 0..m {
        w.set(i, i, 1.0);
    }
    let model = OscillatorModel {
        gamma,
        pi: MlpParams {
            layers: vec![Layer {
                weight: w,
                bias: vec![0.0; m],
                activation: Activation::Linear,
                prelu_alpha: None,
                batch_norm: None,
            }],
        },
        r: m,
        p: 1,
        q: m,
    };
    let (dt, len) = (1e-3, 1001);
    let mut max_rel = 0.0_f64;
    for s in 0..20u64 {
        let mut rng = SeededRng::new(33, s);
        let coeffs: Vec<(f64, f64, f64)> = (1..=5)
            .map(|j| {
                (
                    j as f64 * 2.0 * PI / 5.0,
                    rng.uniform(-1.0, 1.0),
                    rng.uniform(-1.0, 1.0),
                )
            })
            .collect();
        let u = Signal::from_fn(1, dt, len, |t| {
            vec![coeffs
                .iter()
                .map(|&(w, a, b)| a * (w * t).sin() + b * (w * t).cos())
                .sum()]
        })
        .unwrap();
        let (y, _) = oscillator_forward(&model, &u).unwrap();
        for i in 0..len {
            let t = i as f64 * dt;
            if t < 0.1 {
                continue;
            }
            for (n, &omega) in frequencies.iter().enumerate() {
                let oracle = sine_transform_quadrature(&u, omega, t).unwrap()[0];
                let rel = (y.sample(i)[n] - oracle).abs() / f64::max(1.0, oracle.abs());
                max_rel = max_rel.max(rel);
            }
        }
    }
    assert!(
        max_rel < 1e-4,
        "encoder relative error {max_rel:.2e} exceeds 1e-4"
    );
    within(start, 30.0, "encoder oracle comparison");
}

#[test]
fn criterion_03_mollifier_error_bounded_and_decaying() {
    let start = Instant::now();
    let (dt, len) = (0.005, 201);
    let mut family = vec![
        Signal::from_fn(1, dt, len, |t| vec![t]).unwrap(),
        Signal::from_fn(1, dt, len, |t| vec![(0.5 - t).abs()]).unwrap(),
    ];
    for k in 0..3u64 {
        let mut rng = SeededRng::new(55, k);
        let slopes: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let mut values = vec![rng.uniform(-0.5, 0.5)];
        for i in 1..len {
            let seg = (((i - 1) as f64 * dt) / 0.25).floor().min(3.0) as usize;
            values.push(values[i - 1] + slopes[seg] * dt);
        }
        family.push(Signal::new(1, dt, values).unwrap());
    }
    // The report itself rejects any point whose error exceeds its bound.
    let report = lemma1_decay_report(&family, 1.0, &[16, 64, 256, 1024]).unwrap();
    let skipped: Vec<usize> = report.skipped.iter().map(|s| s.m).collect();
    assert_eq!(
        skipped,
        vec![16, 64],
        "mode counts below the validity threshold must be skipped with notice"
    );
    assert!(report.skipped.iter().all(|s| !s.notice.is_empty()));
    let evaluated: Vec<usize> = report.points.iter().map(|p| p.m).collect();
    assert_eq!(evaluated, vec![256, 1024]);
    for p in &report.points {
        assert!(
            p.sup_error <= p.bound * (1.0 + 1e-6),
            "M = {}: error {} exceeds bound {}",
            p.m,
            p.sup_error,
            p.bound
        );
    }
    let fit = report.fit.expect("two positive-error points fit a slope");
    assert!(
        fit.slope <= -0.28,
        "decay slope {} is shallower than -0.28",
        fit.slope
    );
    within(start, 120.0, "mollifier decay experiment");
}

#[test]
fn criterion_04_perturbation_bound_holds() {
    let start = Instant::now();
    // Closed form: x'' = -x against x'' = -x + 0.01 from rest over [0, 1].
    let zero = Signal::from_fn(1, 0.01, 101, |_| vec![0.0]).unwrap();
    let g1 = |x: &[f64], _: &[f64], _: &[f64]| vec![-x[0]];
    let g2 = |x: &[f64], _: &[f64], _: &[f64]| vec![-x[0] + 0.01];
    let report = perturbation_bound_check(&g1, &g2, (1.0, 0.0), 1, &[zero])
        .unwrap()
        .remove(0);
    let expected = 0.01 * (1.0 - 1.0_f64.cos() + 1.0_f64.sin());
    assert!((report.observed_sup_diff - expected).abs() < 1e-6);
    assert!((report.bound_value - 1.0_f64.exp() * 0.01).abs() < 1e-12);
    assert!(report.observed_sup_diff <= report.bound_value * (1.0 + 1e-3));

    for k in 0..20u64 {
        let mut rng = SeededRng::new(66, k);
        let a = rng.uniform(0.2, 1.5);
        let b = rng.uniform(0.2, 1.5);
        let delta = rng.uniform(-0.02, 0.02);
        let c = rng.uniform(-1.0, 1.0);
        let w = rng.uniform(0.5, 3.0);
        let u = Signal::from_fn(1, 0.01, 101, |t| vec![c * (w * t).sin()]).unwrap();
        let g1 = move |x: &[f64], v: &[f64], uv: &[f64]| vec![-a * x[0] - b * v[0] + uv[0]];
        let g2 =
            move |x: &[f64], v: &[f64], uv: &[f64]| vec![-a * x[0] - b * v[0] + uv[0] + delta];
        let report = perturbation_bound_check(&g1, &g2, (a, b), 1, &[u])
            .unwrap()
            .remove(0);
        assert!(
            report.observed_sup_diff <= report.bound_value * (1.0 + 1e-3),
            "pair {k}: observed {} exceeds bound {}",
            report.observed_sup_diff,
            report.bound_value
        );
    }
    within(start, 60.0, "perturbation bound checks");
}

#[test]
fn criterion_05_rk4_single_step_and_order() {
    let start = Instant::now();
    // One step of y' = y at h = 0.1 gives the degree-4 Taylor polynomial.
    let u = Signal::from_fn(1, 0.1, 2, |_| vec![0.0]).unwrap();
    let traj = rk4_integrate(|z, _| vec![z[0]], &u, &[1.0]).unwrap();
    let h: f64 = 0.1;
    let expected = 1.0 + h + h * h / 2.0 + h * h * h / 6.0 + h * h * h * h / 24.0;
    assert!((traj[1][0] - 1.105_170_83).abs() < 1e-8);
    assert!((traj[1][0] - expected).abs() < 1e-15);

    // Observed convergence order on y' = y over [0, 1].
    let mut errors = Vec::new();
    for steps in [10usize, 20, 40] {
        let dt = 1.0 / steps as f64;
        let u = Signal::from_fn(1, dt, steps + 1, |_| vec![0.0]).unwrap();
        let traj = rk4_integrate(|z, _| vec![z[0]], &u, &[1.0]).unwrap();
        errors.push((traj[steps][0] - 1.0_f64.exp()).abs());
    }
    for pair in errors.windows(2) {
        let order = (pair[0] / pair[1]).log2();
        assert!(
            (3.8..=4.2).contains(&order),
            "observed order {order} outside [3.8, 4.2]"
        );
    }
    within(start, 1.0, "integrator order check");
}

#[test]
fn criterion_06_synthesized_damping_gives_uniform_modal_ratios() {
    let start = Instant::now();
    let cfg = BoucWenConfig::default();
    let m_mat = cfg.mass_matrix();
    let k_mat = cfg.stiffness_matrix();
    let c_mat = damping_matrix(&m_mat, &k_mat, cfg.zeta).unwrap();
    let ratios = modal_damping_ratios(&m_mat, &k_mat, &c_mat).unwrap();
    assert_eq!(ratios.len(), 5);
    for (i, zeta) in ratios.iter().enumerate() {
        assert!(
            (zeta - 0.05).abs() < 1e-10,
            "mode {i}: damping ratio {zeta} is not 0.05"
        );
    }
    within(start, 1.0, "modal damping check");
}

#[test]
fn criterion_07_linear_limit_matches_modal_oracle() {
    let start = Instant::now();
    let cfg = BoucWenConfig {
        lambda: 1.0,
        ..BoucWenConfig::default()
    };
    let sys = BoucWenSystem::new(cfg).unwrap();
    let u = Signal::from_fn(1, 1e-3, 10_001, |t| {
        vec![
            20.0 * (0.4 * PI * t).sin() - 30.0 * (0.8 * PI * t).cos()
                + 12.0 * (1.6 * PI * t).cos(),
        ]
    })
    .unwrap();
    let traj = rk4_integrate(|z, uv| sys.rhs(z, uv[0]), &u, &[0.0; 15]).unwrap();
    let oracle = modal::modal_superposition_response(
        &cfg.mass_matrix(),
        &cfg.stiffness_matrix(),
        cfg.zeta,
        &u,
    )
    .unwrap();
    let mut max_err = 0.0_f64;
    let mut max_ref = 0.0_f64;
    for (got, want) in traj.iter().zip(&oracle) {
        for j in 0..10 {
            max_err = max_err.max((got[j] - want[j]).abs());
            max_ref = max_ref.max(want[j].abs());
        }
    }
    assert!(
        max_err <= 1e-6 * max_ref,
        "relative Linf {} exceeds 1e-6",
        max_err / max_ref
    );
    within(start, 5.0, "linear-limit oracle comparison");
}

#[test]
fn criterion_08_harmonizable_ensemble_variance_matches_spectrum() {
    let start = Instant::now();
    let grid = SpectrumGrid::default_band();
    let times = [1.0, 3.0, 5.0];
    let n_draws = 10_000u64;
    let mut sums = [0.0_f64; 3];
    let mut sq_sums = [0.0_f64; 3];
    for draw in 0..n_draws {
        let mut rng = SeededRng::new(88, draw);
        let (a, b) = sample_harmonizable_coeffs(&mut rng, &grid).unwrap();
        for (j, &t) in times.iter().enumerate() {
            let v = harmonizable_value_at(&grid, &a, &b, t);
            sums[j] += v;
            sq_sums[j] += v * v;
        }
    }
    for (j, &t) in times.iter().enumerate() {
        let n = n_draws as f64;
        let mean = sums[j] / n;
        let var = sq_sums[j] / n - mean * mean;
        let target = grid.variance_at(t);
        assert!(
            (var - target).abs() <= 0.05 * target,
            "t = {t}: sample variance {var} deviates from {target} by more than 5%"
        );
    }
    within(start, 60.0, "ensemble variance check");
}
