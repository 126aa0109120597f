//! Experiment runners: dataset generation, model sweeps, and the
//! verification suites. Every runner writes its artifacts under the
//! configured output directory and returns a typed summary.

use std::f64::consts::PI;
use std::path::Path;

use serde::Serialize;

use oscnet_core::analysis::{
    decay_experiment_report, lemma1_decay_report, DecayReport, Lemma1Report,
};
use oscnet_core::diffcore::{finite_difference_gradient, DenseMatrix};
use oscnet_core::dynsys::{
    extreme_value_process, perturbation_bound_check, rk4_integrate, BoucWenSystem,
    PerturbationReport,
};
use oscnet_core::encoder::{build_sine_encoder, sine_transform_quadrature, SineEncoderSpec};
use oscnet_core::nets::{deepen_identity, init_mlp, Activation, Layer, MlpParams};
use oscnet_core::oscillator::{
    oscillator_forward, oscillator_loss_and_grad, LossMode, OscillatorModel,
};
use oscnet_core::signal::Signal;
use oscnet_core::stochastic::{
    sample_harmonic_excitation, sample_harmonizable_excitation, SeededRng, TimeGrid,
};
use oscnet_core::training::{
    build_case1_dataset, build_case2_dataset, train, Dataset, TrainRecord,
};

use crate::artifacts::{
    fmt_f64, path_in, write_csv, write_history_csv, write_json, write_signals_csv, write_string,
    RunTimer,
};
use crate::config::{ExperimentKind, ResolvedConfig};
use crate::plot::{write_loglog_svg, PlotSpec};
use crate::CliError;

/// Seed salts keep dataset draws, model initialization, and the training
/// shuffle on disjoint substreams of the run seed.
const SALT_DATASET: u64 = 0x5eed_0000_0000_0001;
const SALT_GAMMA: u64 = 0x5eed_0000_0000_0002;
const SALT_PI: u64 = 0x5eed_0000_0000_0003;

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckSummary {
    pub param_count: usize,
    pub loss_powers: Vec<u32>,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma2Summary {
    pub frequencies: Vec<f64>,
    pub n_inputs: usize,
    pub compared_from_time: f64,
    pub per_frequency_max_rel_err: Vec<f64>,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationSummary {
    pub closed_form: PerturbationReport,
    /// Exact solution of the closed-form pair at the horizon, for reference.
    pub closed_form_expected_sup_diff: f64,
    pub randomized: Vec<PerturbationReport>,
    pub all_hold: bool,
    /// Largest observed/bound ratio over checks with a positive bound.
    pub max_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Case1Summary {
    pub depths: Vec<usize>,
    pub first_epoch_loss: f64,
    pub min_epoch_loss: f64,
    pub final_epoch_loss: f64,
    /// Sup output change of each warm-start deepening, one per added layer.
    pub deepen_max_diffs: Vec<f64>,
    pub diverged: Vec<bool>,
    pub best_epochs: Vec<Option<usize>>,
    pub report: Option<DecayReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Case2Summary {
    pub widths: Vec<usize>,
    pub diverged: Vec<bool>,
    pub report: DecayReport,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentSummary {
    Gradcheck(GradcheckSummary),
    Lemma1Verify(Lemma1Report),
    Lemma2Verify(Lemma2Summary),
    PerturbationVerify(PerturbationSummary),
    Case1(Case1Summary),
    Case2(Case2Summary),
}

/// Runs the configured experiment, writing `resolved.toml`, the experiment
/// artifacts, `summary.json`, and last `manifest.json` (timings only) under
/// the output directory.
pub fn run_experiment(cfg: &ResolvedConfig) -> Result<ExperimentSummary, CliError> {
    cfg.validate()?;
    let dir = Path::new(&cfg.output_dir).to_path_buf();
    std::fs::create_dir_all(&dir)?;
    write_string(&path_in(&dir, "resolved.toml"), &cfg.to_toml()?)?;
    let mut timer = RunTimer::new();
    let summary = match cfg.experiment {
        ExperimentKind::Gradcheck => ExperimentSummary::Gradcheck(run_gradcheck(cfg, &dir)?),
        ExperimentKind::Lemma1Verify => ExperimentSummary::Lemma1Verify(run_lemma1(cfg, &dir)?),
        ExperimentKind::Lemma2Verify => ExperimentSummary::Lemma2Verify(run_lemma2(cfg, &dir)?),
        ExperimentKind::PerturbationVerify => {
            ExperimentSummary::PerturbationVerify(run_perturbation(cfg, &dir)?)
        }
        ExperimentKind::Case1 => ExperimentSummary::Case1(run_case1(cfg, &dir, &mut timer)?),
        ExperimentKind::Case2 => ExperimentSummary::Case2(run_case2(cfg, &dir, &mut timer)?),
    };
    write_json(&path_in(&dir, "summary.json"), &summary)?;
    timer.mark("experiment");
    let manifest = timer.into_manifest(cfg.experiment.name(), &dir);
    write_json(&path_in(&dir, "manifest.json"), &manifest)?;
    Ok(summary)
}

/// Finite-difference check of the backpropagated gradient on a small model
/// with PReLU dynamics and a batch-normalized PReLU readout, unrolled over
/// three integration steps.
pub fn run_gradcheck(cfg: &ResolvedConfig, dir: &Path) -> Result<GradcheckSummary, CliError> {
    let seed = cfg.seed;
    let mut model = OscillatorModel {
        gamma: init_mlp(&[5, 4, 2], Activation::Prelu, false, seed ^ SALT_GAMMA),
        pi: init_mlp(&[4, 4, 1], Activation::Prelu, true, seed ^ SALT_PI),
        r: 2,
        p: 1,
        q: 1,
    };
    let mut rng = SeededRng::new(seed ^ SALT_DATASET, 0);
    let batch: Vec<(Signal, Signal)> = (0..2)
        .map(|_| {
            let u = Signal::from_fn(1, 0.1, 4, |_| vec![rng.uniform(-1.0, 1.0)])?;
            let y = Signal::from_fn(1, 0.1, 4, |_| vec![rng.uniform(-1.0, 1.0)])?;
            Ok((u, y))
        })
        .collect::<Result<_, CliError>>()?;

    let x = model.flatten();
    let loss_powers = vec![2u32, 8];
    let mut rows = Vec::new();
    let mut max_rel_err: f64 = 0.0;
    for &r_power in &loss_powers {
        let (_, grad) = oscillator_loss_and_grad(&mut model, &batch, r_power, LossMode::Train)?;
        let proto = model.clone();
        let batch_ref = &batch;
        let mut f = |params: &[f64]| -> f64 {
            let mut m = proto.clone();
            m.unflatten(params).expect("parameter length is fixed");
            oscillator_loss_and_grad(&mut m, batch_ref, r_power, LossMode::Train)
                .expect("finite probe evaluation")
                .0
        };
        let fd = finite_difference_gradient(&mut f, &x, 1e-6)?;
        for (i, (&a, &b)) in grad.0.iter().zip(&fd.0).enumerate() {
            let rel = (a - b).abs() / f64::max(1.0, b.abs());
            max_rel_err = max_rel_err.max(rel);
            rows.push(vec![
                r_power.to_string(),
                i.to_string(),
                fmt_f64(a),
                fmt_f64(b),
                fmt_f64(rel),
            ]);
        }
    }
    write_csv(
        &path_in(dir, "gradcheck.csv"),
        &["loss_power", "param", "backprop", "finite_difference", "rel_err"],
        &rows,
    )?;
    Ok(GradcheckSummary {
        param_count: x.len(),
        loss_powers,
        max_rel_err,
    })
}

fn piecewise_linear_family(seed: u64) -> Result<Vec<Signal>, CliError> {
    let (dt, len) = (0.005, 201);
    let mut family = vec![
        Signal::from_fn(1, dt, len, |t| vec![t])?,
        Signal::from_fn(1, dt, len, |t| vec![(0.5 - t).abs()])?,
    ];
    // Random continuous slope-1-bounded functions with kinks at the quarters.
    for k in 0..3 {
        let mut rng = SeededRng::new(seed ^ SALT_DATASET, k);
        let slopes: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let mut values = Vec::with_capacity(len);
        let mut v = rng.uniform(-0.5, 0.5);
        values.push(v);
        for i in 1..len {
            let seg = (((i - 1) as f64 * dt) / 0.25).floor().min(3.0) as usize;
            v += slopes[seg] * dt;
            values.push(v);
        }
        family.push(Signal::new(1, dt, values)?);
    }
    Ok(family)
}

/// Mollifier-reconstruction decay over a Lipschitz piecewise-linear family,
/// with the closed-form error bound enforced per mode count.
pub fn run_lemma1(cfg: &ResolvedConfig, dir: &Path) -> Result<Lemma1Report, CliError> {
    let family = piecewise_linear_family(cfg.seed)?;
    let m_list = [16usize, 64, 256, 1024];
    let report = lemma1_decay_report(&family, 1.0, &m_list)?;
    let rows: Vec<Vec<String>> = report
        .points
        .iter()
        .map(|p| {
            vec![
                p.m.to_string(),
                fmt_f64(p.v_opt),
                fmt_f64(p.sup_error),
                fmt_f64(p.bound),
            ]
        })
        .collect();
    write_csv(
        &path_in(dir, "lemma1_points.csv"),
        &["modes", "v_opt", "sup_error", "bound"],
        &rows,
    )?;
    if let Some(fit) = &report.fit {
        let mut spec = PlotSpec::from_fit(
            "reconstruction error vs mode count",
            "modes",
            "sup error",
            fit,
        );
        spec.reference_slope = Some(-1.0 / 3.0);
        write_loglog_svg(&path_in(dir, "lemma1_decay.svg"), &spec)?;
    }
    Ok(report)
}

fn encoder_model(spec: &SineEncoderSpec) -> Result<OscillatorModel, CliError> {
    let m = spec.m();
    let gamma = build_sine_encoder(spec)?;
    // Readout is the identity on the x half of the state, so y = x(t).
    let mut w = DenseMatrix::zeros(m, m + 2);
    for i in 0..m {
        w.set(i, i, 1.0);
    }
    let pi = MlpParams {
        layers: vec![Layer {
            weight: w,
            bias: vec![0.0; m],
            activation: Activation::Linear,
            prelu_alpha: None,
            batch_norm: None,
        }],
    };
    Ok(OscillatorModel {
        gamma,
        pi,
        r: m,
        p: 1,
        q: m,
    })
}

/// Compares the built sine-transform encoder's rolled-out states against
/// trapezoid quadrature of the defining integral on random band-limited
/// inputs.
pub fn run_lemma2(cfg: &ResolvedConfig, dir: &Path) -> Result<Lemma2Summary, CliError> {
    let frequencies = vec![PI / 20.0, PI / 2.0, PI, 2.0 * PI];
    let spec = SineEncoderSpec {
        frequencies: frequencies.clone(),
        p: 1,
    };
    let model = encoder_model(&spec)?;
    let (dt, len) = (1e-3, 1001);
    let t_min = 0.1;
    let n_inputs = 20;
    let mut per_freq_max = vec![0.0f64; frequencies.len()];
    let mut rows = Vec::new();
    for s in 0..n_inputs {
        let mut rng = SeededRng::new(cfg.seed ^ SALT_DATASET, s as u64);
        // Five harmonics of 2 pi / 5, topping out at 2 pi rad/s.
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
        })?;
        let (y, _) = oscillator_forward(&model, &u)?;
        for i in 0..len {
            let t = i as f64 * dt;
            if t < t_min {
                continue;
            }
            for (n, &w) in frequencies.iter().enumerate() {
                let oracle = sine_transform_quadrature(&u, w, t)?[0];
                let rel = (y.sample(i)[n] - oracle).abs() / f64::max(1.0, oracle.abs());
                per_freq_max[n] = per_freq_max[n].max(rel);
            }
        }
        rows.push(vec![
            s.to_string(),
            fmt_f64(per_freq_max.iter().cloned().fold(0.0, f64::max)),
        ]);
    }
    write_csv(
        &path_in(dir, "lemma2_progress.csv"),
        &["input", "running_max_rel_err"],
        &rows,
    )?;
    let freq_rows: Vec<Vec<String>> = frequencies
        .iter()
        .zip(&per_freq_max)
        .map(|(&w, &e)| vec![fmt_f64(w), fmt_f64(e)])
        .collect();
    write_csv(
        &path_in(dir, "lemma2_frequencies.csv"),
        &["omega", "max_rel_err"],
        &freq_rows,
    )?;
    Ok(Lemma2Summary {
        frequencies,
        n_inputs,
        compared_from_time: t_min,
        max_rel_err: per_freq_max.iter().cloned().fold(0.0, f64::max),
        per_frequency_max_rel_err: per_freq_max,
    })
}

/// Gronwall perturbation bound on one closed-form pair and twenty randomized
/// damped-oscillator pairs with constant right-hand-side offsets.
pub fn run_perturbation(cfg: &ResolvedConfig, dir: &Path) -> Result<PerturbationSummary, CliError> {
    // x'' = -x against x'' = -x + 0.01 from rest under zero input over [0, 1]:
    // the difference is 0.01 (1 - cos t, sin t), so the sup L1 gap is
    // 0.01 (1 - cos 1 + sin 1) while the bound is e * 0.01.
    let zero = Signal::from_fn(1, 0.01, 101, |_| vec![0.0])?;
    let g1 = |x: &[f64], _v: &[f64], _u: &[f64]| vec![-x[0]];
    let g2 = |x: &[f64], _v: &[f64], _u: &[f64]| vec![-x[0] + 0.01];
    let closed_form = perturbation_bound_check(&g1, &g2, (1.0, 0.0), 1, &[zero])?
        .into_iter()
        .next()
        .expect("one excitation yields one report");
    let closed_form_expected = 0.01 * (1.0 - 1.0f64.cos() + 1.0f64.sin());

    let mut randomized = Vec::new();
    for k in 0..20u64 {
        let mut rng = SeededRng::new(cfg.seed ^ SALT_DATASET, 1000 + k);
        let a = rng.uniform(0.2, 1.5);
        let b = rng.uniform(0.2, 1.5);
        let delta = rng.uniform(-0.02, 0.02);
        let c = rng.uniform(-1.0, 1.0);
        let w = rng.uniform(0.5, 3.0);
        let u = Signal::from_fn(1, 0.01, 101, |t| vec![c * (w * t).sin()])?;
        let g1 = move |x: &[f64], v: &[f64], uv: &[f64]| vec![-a * x[0] - b * v[0] + uv[0]];
        let g2 = move |x: &[f64], v: &[f64], uv: &[f64]| {
            vec![-a * x[0] - b * v[0] + uv[0] + delta]
        };
        let report = perturbation_bound_check(&g1, &g2, (a, b), 1, &[u])?
            .into_iter()
            .next()
            .expect("one excitation yields one report");
        randomized.push(report);
    }

    let all = std::iter::once(&closed_form).chain(&randomized);
    let mut all_hold = true;
    let mut max_ratio: f64 = 0.0;
    let mut rows = Vec::new();
    for (i, r) in all.enumerate() {
        all_hold &= r.observed_sup_diff <= r.bound_value * (1.0 + 1e-3);
        if r.bound_value > 0.0 {
            max_ratio = max_ratio.max(r.observed_sup_diff / r.bound_value);
        } else {
            all_hold &= r.observed_sup_diff == 0.0;
        }
        rows.push(vec![
            i.to_string(),
            fmt_f64(r.observed_sup_diff),
            fmt_f64(r.bound_value),
            fmt_f64(r.lipschitz_l),
            r.holds.to_string(),
        ]);
    }
    write_csv(
        &path_in(dir, "perturbation.csv"),
        &["check", "observed_sup_diff", "bound", "lipschitz_l", "holds"],
        &rows,
    )?;
    Ok(PerturbationSummary {
        closed_form,
        closed_form_expected_sup_diff: closed_form_expected,
        randomized,
        all_hold,
        max_ratio,
    })
}

fn simulate_x5(
    sys: &BoucWenSystem,
    u: &Signal,
) -> Result<Signal, CliError> {
    let traj = rk4_integrate(|z, uv| sys.rhs(z, uv[0]), u, &[0.0; 15])?;
    let x5: Vec<f64> = traj.iter().map(|z| z[4]).collect();
    Ok(Signal::new(1, u.dt(), x5)?)
}

fn write_dataset(dir: &Path, name: &str, data: &Dataset) -> Result<(), CliError> {
    let mut names = Vec::new();
    for i in 0..data.inputs.len() {
        names.push(format!("u{i}"));
        names.push(format!("y{i}"));
    }
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let mut signals = Vec::new();
    for (u, y) in data.inputs.iter().zip(&data.targets) {
        signals.push(u);
        signals.push(y);
    }
    write_signals_csv(&path_in(dir, name), &name_refs, &signals)?;
    write_json(
        &path_in(dir, "dataset_meta.json"),
        &serde_json::json!({
            "provenance": data.provenance,
            "samples": data.inputs.len(),
            "train": data.train_indices.len(),
            "validation": data.val_indices.len(),
        }),
    )
}

fn record_artifacts(
    dir: &Path,
    tag: &str,
    model: &OscillatorModel,
    record: &TrainRecord,
) -> Result<(), CliError> {
    write_history_csv(&path_in(dir, &format!("train_{tag}.csv")), &record.epochs)?;
    write_json(&path_in(dir, &format!("model_{tag}.json")), model)
}

/// Extreme-response training: peak-ranked harmonic dataset, warm-started
/// readout deepening across the configured depth ladder with per-depth clip
/// thresholds, and an error-versus-depth decay report.
pub fn run_case1(
    cfg: &ResolvedConfig,
    dir: &Path,
    timer: &mut RunTimer,
) -> Result<Case1Summary, CliError> {
    let fine = TimeGrid::default_excitation();
    let gs = cfg.dataset.grid_stride;
    let sys = BoucWenSystem::new(cfg.boucwen)?;
    let mut pairs = Vec::with_capacity(cfg.dataset.pool);
    for l in 0..cfg.dataset.pool {
        let mut rng = SeededRng::new(cfg.seed ^ SALT_DATASET, l as u64);
        let u = sample_harmonic_excitation(&mut rng, fine);
        let x5 = simulate_x5(&sys, &u)?;
        let target = extreme_value_process(&x5);
        pairs.push((u.subsample(gs), target.subsample(gs)));
    }
    let data = build_case1_dataset(&pairs, cfg.dataset.n_select)?;
    write_dataset(dir, "dataset.csv", &data)?;
    timer.mark("dataset");

    let r = 5;
    let gamma_hidden = cfg.dataset.gamma_hidden_widths[0];
    let mut model = OscillatorModel {
        gamma: init_mlp(
            &[2 * r + 1, gamma_hidden, r],
            Activation::Relu,
            false,
            cfg.seed ^ SALT_GAMMA,
        ),
        pi: init_mlp(&[r + 2, 10, 1], Activation::Prelu, true, cfg.seed ^ SALT_PI),
        r,
        p: 1,
        q: 1,
    };
    let probe = data.inputs[0].clone();
    let mut models = Vec::new();
    let mut deepen_max_diffs = Vec::new();
    let mut diverged = Vec::new();
    let mut best_epochs = Vec::new();
    let mut first_epoch_loss = f64::NAN;
    let mut min_epoch_loss = f64::NAN;
    let mut final_epoch_loss = f64::NAN;
    for (i, &depth) in cfg.dataset.pi_depths.iter().enumerate() {
        if i > 0 {
            let (before, _) = oscillator_forward(&model, &probe)?;
            deepen_identity(&mut model.pi);
            let (after, _) = oscillator_forward(&model, &probe)?;
            let diff = before
                .values()
                .iter()
                .zip(after.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            deepen_max_diffs.push(diff);
        }
        let mut tc = cfg.train.clone();
        tc.clip_threshold_pi = cfg.dataset.pi_clip_thresholds[i];
        let record = train(&mut model, &data, &tc)?;
        record_artifacts(dir, &format!("depth{depth}"), &model, &record)?;
        if i == 0 {
            first_epoch_loss = record.epochs.first().map_or(f64::NAN, |e| e.train_loss);
            min_epoch_loss = record
                .epochs
                .iter()
                .map(|e| e.train_loss)
                .fold(f64::INFINITY, f64::min);
            final_epoch_loss = record.epochs.last().map_or(f64::NAN, |e| e.train_loss);
        }
        diverged.push(record.diverged);
        best_epochs.push(record.best_epoch);
        models.push((depth as f64, model.clone()));
        timer.mark(&format!("train_depth{depth}"));
    }
    let report = decay_experiment_report(&models, &data.inputs, &data.targets).ok();
    if let Some(rep) = &report {
        write_decay_artifacts(dir, rep, "depth", None)?;
    }
    Ok(Case1Summary {
        depths: cfg.dataset.pi_depths.clone(),
        first_epoch_loss,
        min_epoch_loss,
        final_epoch_loss,
        deepen_max_diffs,
        diverged,
        best_epochs,
        report,
    })
}

fn write_decay_artifacts(
    dir: &Path,
    report: &DecayReport,
    size_name: &str,
    reference_slope: Option<f64>,
) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = report
        .sizes
        .iter()
        .zip(&report.summaries)
        .map(|(&s, e)| vec![fmt_f64(s), fmt_f64(e.rel_linf), fmt_f64(e.rel_l2)])
        .collect();
    write_csv(
        &path_in(dir, "errors.csv"),
        &[size_name, "rel_linf", "rel_l2"],
        &rows,
    )?;
    let mut spec = PlotSpec::from_fit(
        "sup-norm relative error decay",
        size_name,
        "relative sup error",
        &report.linf_fit,
    );
    spec.reference_slope = reference_slope;
    write_loglog_svg(&path_in(dir, "decay_linf.svg"), &spec)?;
    let spec2 = PlotSpec::from_fit(
        "l2 relative error decay",
        size_name,
        "relative l2 error",
        &report.l2_fit,
    );
    write_loglog_svg(&path_in(dir, "decay_l2.svg"), &spec2)?;
    Ok(())
}

/// Harmonizable-excitation training: deviation-ranked dataset, a width sweep
/// of all-ReLU models trained from random initialization, and the
/// error-versus-width decay report.
pub fn run_case2(
    cfg: &ResolvedConfig,
    dir: &Path,
    timer: &mut RunTimer,
) -> Result<Case2Summary, CliError> {
    let fine = TimeGrid::default_excitation();
    let gs = cfg.dataset.grid_stride;
    let sys = BoucWenSystem::new(cfg.boucwen)?;
    let mut pairs = Vec::with_capacity(cfg.dataset.pool);
    for l in 0..cfg.dataset.pool {
        let mut rng = SeededRng::new(cfg.seed ^ SALT_DATASET, l as u64);
        let u = sample_harmonizable_excitation(&mut rng, &cfg.spectrum, fine)?;
        let x5 = simulate_x5(&sys, &u)?;
        pairs.push((u.subsample(gs), x5.subsample(gs)));
    }
    let data = build_case2_dataset(&pairs, cfg.dataset.stride)?;
    write_dataset(dir, "dataset.csv", &data)?;
    timer.mark("dataset");

    let r = 10;
    let mut models = Vec::new();
    let mut diverged = Vec::new();
    for &width in &cfg.dataset.gamma_hidden_widths {
        let wsalt = (width as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let mut model = OscillatorModel {
            gamma: init_mlp(
                &[2 * r + 1, width, r],
                Activation::Relu,
                false,
                cfg.seed ^ SALT_GAMMA ^ wsalt,
            ),
            pi: init_mlp(&[r + 2, 20, 1], Activation::Relu, false, cfg.seed ^ SALT_PI ^ wsalt),
            r,
            p: 1,
            q: 1,
        };
        let record = train(&mut model, &data, &cfg.train)?;
        record_artifacts(dir, &format!("width{width}"), &model, &record)?;
        diverged.push(record.diverged);
        models.push((width as f64, model));
        timer.mark(&format!("train_width{width}"));
    }
    let report = decay_experiment_report(&models, &data.inputs, &data.targets)?;
    write_decay_artifacts(dir, &report, "width", Some(-0.5))?;
    Ok(Case2Summary {
        widths: cfg.dataset.gamma_hidden_widths.clone(),
        diverged,
        report,
    })
}
