//! Constructive sine-transform encoding of input signals.
//!
//! An explicit one-hidden-layer ReLU network realizes, through the oscillator
//! ODE, the time-varying sine transform `x_n(t) = integral_0^t u(t-tau)
//! sin(omega_n tau) dtau` for a bank of frequencies. Mollifier Fourier data
//! (alpha_n, theta_n) then reconstructs the input from these coefficients,
//! with a closed-form error bound decaying as M^(-1/3).

use crate::diffcore::DenseMatrix;
use crate::nets::{Activation, Layer, MlpParams};
use crate::signal::Signal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("invalid encoder spec: {0}")]
    BadSpec(String),
    #[error("time {t} is not on the signal grid")]
    TimeOffGrid { t: f64 },
    #[error("time {t} is outside the signal domain [0, {t_max}]")]
    TimeOutOfDomain { t: f64, t_max: f64 },
    #[error("Fourier quadrature did not converge for mode {n}")]
    QuadratureNonConvergence { n: usize },
    #[error("mollifier width must satisfy 0 < v < T, got v={v}, T={t}")]
    BadMollifierWidth { v: f64, t: f64 },
    #[error("mode count {m} must exceed 16*c_rho2/pi^2 = {threshold}")]
    ModeCountTooSmall { m: usize, threshold: f64 },
    #[error("coefficient vector has length {got}, expected M*p = {expected}")]
    CoefficientLength { expected: usize, got: usize },
    #[error("tau = {tau} is outside [0, t] with t = {t}")]
    TauOutOfRange { tau: f64, t: f64 },
}

/// Frequency bank for the sine-transform encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineEncoderSpec {
    pub frequencies: Vec<f64>,
    pub p: usize,
}

impl SineEncoderSpec {
    /// The default grid omega_n = pi*n/(2T) for n = 1..=m.
    pub fn default_grid(p: usize, m: usize, t_horizon: f64) -> Self {
        SineEncoderSpec {
            frequencies: (1..=m).map(|n| PI * n as f64 / (2.0 * t_horizon)).collect(),
            p,
        }
    }

    pub fn m(&self) -> usize {
        self.frequencies.len()
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.p == 0 {
            return Err(EncoderError::BadSpec("p must be positive".into()));
        }
        if self.m() < 2 {
            return Err(EncoderError::BadSpec(format!(
                "need at least 2 frequencies, got {}",
                self.m()
            )));
        }
        for (i, &w) in self.frequencies.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(EncoderError::BadSpec(format!(
                    "frequency {i} is not positive and finite: {w}"
                )));
            }
            if self.frequencies[..i].contains(&w) {
                return Err(EncoderError::BadSpec(format!("duplicate frequency {w}")));
            }
        }
        Ok(())
    }
}

/// Builds the explicit one-hidden-layer ReLU MLP whose oscillator ODE solves
/// `x_n'' = -omega_n^2 x_n + omega_n u` per mode, via the paired-ReLU
/// identity `x = relu(x) - relu(-x)`. Widths are `(p(2M+1), 2pM, pM)`. The
/// state layout is mode-major: component `(n-1)*p + j` is mode `n`, channel
/// `j`; the MLP input is `[x, x', u]`.
pub fn build_sine_encoder(spec: &SineEncoderSpec) -> Result<MlpParams, EncoderError> {
    spec.validate()?;
    let (p, m) = (spec.p, spec.m());
    let in_w = p * (2 * m + 1);
    let hid_w = 2 * p * m;
    let out_w = p * m;

    let mut w1 = DenseMatrix::zeros(hid_w, in_w);
    for n in 0..m {
        let omega = spec.frequencies[n];
        for j in 0..p {
            let c = n * p + j;
            // relu(-omega^2 x + omega u) and relu(omega^2 x - omega u)
            w1.set(2 * c, c, -omega * omega);
            w1.set(2 * c, 2 * out_w + j, omega);
            w1.set(2 * c + 1, c, omega * omega);
            w1.set(2 * c + 1, 2 * out_w + j, -omega);
        }
    }
    let mut w2 = DenseMatrix::zeros(out_w, hid_w);
    for c in 0..out_w {
        w2.set(c, 2 * c, 1.0);
        w2.set(c, 2 * c + 1, -1.0);
    }
    Ok(MlpParams {
        layers: vec![
            Layer {
                weight: w1,
                bias: vec![0.0; hid_w],
                activation: Activation::Relu,
                prelu_alpha: None,
                batch_norm: None,
            },
            Layer {
                weight: w2,
                bias: vec![0.0; out_w],
                activation: Activation::Linear,
                prelu_alpha: None,
                batch_norm: None,
            },
        ],
    })
}

/// Composite-trapezoid evaluation of the sine transform
/// `L_t u(omega) = integral_0^t u(t-tau) sin(omega tau) dtau`,
/// one value per input channel. Serves as the independent oracle for the
/// built encoder. `t` must lie on the grid of `u`.
pub fn sine_transform_quadrature(
    u: &Signal,
    omega: f64,
    t: f64,
) -> Result<Vec<f64>, EncoderError> {
    let dt = u.dt();
    let idx = (t / dt).round() as i64;
    if idx < 0 || idx as usize >= u.len() {
        return Err(EncoderError::TimeOutOfDomain {
            t,
            t_max: u.duration(),
        });
    }
    let idx = idx as usize;
    if (idx as f64 * dt - t).abs() > 1e-9 * f64::max(1.0, t.abs()) {
        return Err(EncoderError::TimeOffGrid { t });
    }
    let mut acc = vec![0.0; u.dim()];
    for k in 0..=idx {
        let weight = if k == 0 || k == idx { 0.5 } else { 1.0 };
        let s = (omega * k as f64 * dt).sin();
        let sample = u.sample(idx - k);
        for (a, &v) in acc.iter_mut().zip(sample) {
            *a += weight * s * v;
        }
    }
    for a in &mut acc {
        *a *= dt;
    }
    Ok(acc)
}

/// Sine transform of the piecewise-linear interpolant of `u`, integrating
/// `(a + b tau) sin(omega tau)` exactly on every grid interval. Exact for
/// sampled piecewise-linear inputs at any frequency, unlike the trapezoid
/// rule whose error grows with omega.
pub fn sine_transform_piecewise_linear(
    u: &Signal,
    omega: f64,
    t: f64,
) -> Result<Vec<f64>, EncoderError> {
    let dt = u.dt();
    let idx = (t / dt).round() as i64;
    if idx < 0 || idx as usize >= u.len() {
        return Err(EncoderError::TimeOutOfDomain {
            t,
            t_max: u.duration(),
        });
    }
    let idx = idx as usize;
    if (idx as f64 * dt - t).abs() > 1e-9 * f64::max(1.0, t.abs()) {
        return Err(EncoderError::TimeOffGrid { t });
    }
    // Antiderivatives: int sin = -cos(w tau)/w, int tau sin = sin(w tau)/w^2
    // - tau cos(w tau)/w.
    let f0 = |tau: f64| -(omega * tau).cos() / omega;
    let f1 = |tau: f64| (omega * tau).sin() / (omega * omega) - tau * (omega * tau).cos() / omega;
    let mut acc = vec![0.0; u.dim()];
    for k in 0..idx {
        let (tau_a, tau_b) = (k as f64 * dt, (k + 1) as f64 * dt);
        let (d0, d1) = (f0(tau_b) - f0(tau_a), f1(tau_b) - f1(tau_a));
        // u(t - tau) on [tau_a, tau_b] runs linearly from sample idx-k down
        // to sample idx-k-1.
        let hi = u.sample(idx - k);
        let lo = u.sample(idx - k - 1);
        for j in 0..u.dim() {
            let slope = (lo[j] - hi[j]) / dt;
            let a = hi[j] - slope * tau_a;
            acc[j] += a * d0 + slope * d1;
        }
    }
    Ok(acc)
}

/// Mollifier Fourier data on the default frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifierData {
    /// Support width of the mollifier (seconds).
    pub v: f64,
    /// Time horizon T (seconds).
    pub t_horizon: f64,
    /// Normalization constant c_v = v * c_1.
    pub c_v: f64,
    /// Scaled Fourier moduli alpha_n = |H rho_v(omega_n)| / T, each <= 1/T.
    pub alpha: Vec<f64>,
    /// Fourier phases theta_n.
    pub theta: Vec<f64>,
}

/// e^{-1/(1-x^2)} on (-1,1), zero outside: the unnormalized unit bump.
fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fb: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_simpson(f, a, m, fa, fm, flm, left, 0.5 * tol, depth - 1)
            + adaptive_simpson(f, m, b, fm, fb, frm, right, 0.5 * tol, depth - 1)
    }
}

fn integrate_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fb, fm) = (f(a), f(b), f(m));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive_simpson(f, a, b, fa, fb, fm, whole, tol, 40)
}

/// c_1 = (1/2) * integral_{-1}^{1} e^{-1/(1-x^2)} dx, so that the unit
/// mollifier rho_1 integrates to one.
pub fn mollifier_c1() -> f64 {
    static C1: OnceLock<f64> = OnceLock::new();
    *C1.get_or_init(|| 0.5 * integrate_adaptive(&bump, -1.0, 1.0, 1e-13))
}

/// The unit mollifier rho_1(tau) = c_1^{-1} e^{-1/(1-(2tau+1)^2)} on (-1,0).
pub fn rho1(tau: f64) -> f64 {
    bump(2.0 * tau + 1.0) / mollifier_c1()
}

/// Second tau-derivative of rho_1, from the closed-form chain rule through
/// s(x) = -1/(1-x^2) with x = 2*tau + 1.
pub fn rho1_second_derivative(tau: f64) -> f64 {
    let x = 2.0 * tau + 1.0;
    if x.abs() >= 1.0 {
        return 0.0;
    }
    let d = 1.0 - x * x;
    let s1 = -2.0 * x / (d * d);
    let s2 = -2.0 * (1.0 + 3.0 * x * x) / (d * d * d);
    // tau-derivatives pick up factors 2 and 4 from dx/dtau = 2
    let (s1t, s2t) = (2.0 * s1, 4.0 * s2);
    rho1(tau) * (s1t * s1t + s2t)
}

/// Third tau-derivative of rho_1.
pub fn rho1_third_derivative(tau: f64) -> f64 {
    let x = 2.0 * tau + 1.0;
    if x.abs() >= 1.0 {
        return 0.0;
    }
    let d = 1.0 - x * x;
    let s1 = -2.0 * x / (d * d);
    let s2 = -2.0 * (1.0 + 3.0 * x * x) / (d * d * d);
    let s3 = -24.0 * x * (1.0 + x * x) / (d * d * d * d);
    let (s1t, s2t, s3t) = (2.0 * s1, 4.0 * s2, 8.0 * s3);
    rho1(tau) * (s1t * s1t * s1t + 3.0 * s1t * s2t + s3t)
}

/// Maximizes |f| on [-1, 0] by a dense grid followed by golden-section
/// refinement around the grid argmax.
fn max_abs_on_unit_support(f: &dyn Fn(f64) -> f64) -> f64 {
    let n = 100_000;
    let mut best = 0.0;
    let mut best_tau = -0.5;
    for i in 0..=n {
        let tau = -1.0 + i as f64 / n as f64;
        let v = f(tau).abs();
        if v > best {
            best = v;
            best_tau = tau;
        }
    }
    let h = 1.0 / n as f64;
    let (mut a, mut b) = (best_tau - h, best_tau + h);
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if f(c).abs() > f(d).abs() {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b)).abs().max(best)
}

/// c_rho,2 = max over [-1,0] of |rho_1''|.
pub fn c_rho2() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| max_abs_on_unit_support(&rho1_second_derivative))
}

/// c_rho,3 = max over [-1,0] of |rho_1'''|.
pub fn c_rho3() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| max_abs_on_unit_support(&rho1_third_derivative))
}

fn gauss_legendre_16() -> &'static (Vec<f64>, Vec<f64>) {
    static GL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    GL.get_or_init(|| legendre_nodes(16))
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Fourier transform H rho_v(omega) = integral rho_v(tau) e^{-i omega tau}
/// dtau over the support [-v, 0], by Gauss-Legendre panels sized for at
/// least 20 points per period of the oscillatory factor.
fn mollifier_fourier_at(v: f64, c_v: f64, omega: f64, panels: usize) -> (f64, f64) {
    let (nodes, weights) = gauss_legendre_16();
    let h = v / panels as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for k in 0..panels {
        let a = -v + k as f64 * h;
        for (&x, &w) in nodes.iter().zip(weights) {
            let tau = a + 0.5 * h * (x + 1.0);
            let rho = bump((2.0 * tau + v) / v) / c_v;
            let phase = omega * tau;
            re += 0.5 * h * w * rho * phase.cos();
            im -= 0.5 * h * w * rho * phase.sin();
        }
    }
    (re, im)
}

/// Computes normalization, moduli, and phases of the mollifier rho_v on the
/// default grid omega_n = pi*n/(2T), n = 1..=M.
pub fn mollifier_fourier(v: f64, t_horizon: f64, m: usize) -> Result<MollifierData, EncoderError> {
    if !(v > 0.0 && v < t_horizon) {
        return Err(EncoderError::BadMollifierWidth { v, t: t_horizon });
    }
    let c_v = v * mollifier_c1();
    let omega_max = PI * m as f64 / (2.0 * t_horizon);
    // >= 20 points per period at the highest frequency, with GL-16 panels
    let needed = (20.0 * v * omega_max / (2.0 * PI)).ceil() as usize;
    let panels = usize::max(8, needed.div_ceil(16) + 1);

    let mut alpha = Vec::with_capacity(m);
    let mut theta = Vec::with_capacity(m);
    for n in 1..=m {
        let omega = PI * n as f64 / (2.0 * t_horizon);
        let (re, im) = mollifier_fourier_at(v, c_v, omega, panels);
        let (re2, im2) = mollifier_fourier_at(v, c_v, omega, 2 * panels);
        let modulus = re.hypot(im);
        if (re - re2).hypot(im - im2) > 1e-9 * (1.0 + modulus) {
            return Err(EncoderError::QuadratureNonConvergence { n });
        }
        alpha.push(modulus / t_horizon);
        theta.push((-im).atan2(re));
    }
    Ok(MollifierData {
        v,
        t_horizon,
        c_v,
        alpha,
        theta,
    })
}

/// Evaluates the reconstruction
/// `u_hat_t(tau) = u(0) + sum_n alpha_n { x_n(t) + u(0)/omega_n
/// [cos(omega_n t) - 1] } sin[omega_n (t - tau) - theta_n]`
/// on `tau_grid`, one p-vector per tau. `coeffs` holds the sine-transform
/// coefficients x(t) in mode-major layout.
pub fn reconstruct_input(
    coeffs: &[f64],
    u0: &[f64],
    data: &MollifierData,
    omegas: &[f64],
    t: f64,
    tau_grid: &[f64],
) -> Result<Vec<Vec<f64>>, EncoderError> {
    let p = u0.len();
    let m = omegas.len();
    if coeffs.len() != m * p {
        return Err(EncoderError::CoefficientLength {
            expected: m * p,
            got: coeffs.len(),
        });
    }
    for &tau in tau_grid {
        if tau < 0.0 || tau > t + 1e-12 {
            return Err(EncoderError::TauOutOfRange { tau, t });
        }
    }
    // The bracketed amplitude per (mode, channel) is tau-independent.
    let mut amp = vec![0.0; m * p];
    for n in 0..m {
        let omega = omegas[n];
        let ct = ((omega * t).cos() - 1.0) / omega;
        for j in 0..p {
            amp[n * p + j] = data.alpha[n] * (coeffs[n * p + j] + u0[j] * ct);
        }
    }
    Ok(tau_grid
        .iter()
        .map(|&tau| {
            (0..p)
                .map(|j| {
                    let mut acc = u0[j];
                    for n in 0..m {
                        let s = (omegas[n] * (t - tau) - data.theta[n]).sin();
                        acc += amp[n * p + j] * s;
                    }
                    acc
                })
                .collect()
        })
        .collect())
}

/// The optimized reconstruction error for a Lipschitz input family:
/// returns `(v_opt, eps_K)` with `v_opt = 2T (2 c_rho2 / (pi^2 M))^{1/3}`
/// and `eps_K = 54^{1/3} p L_K T c_rho2^{1/3} / (pi^{2/3} M^{1/3})`.
/// Requires `M > 16 c_rho2 / pi^2`, which guarantees `v_opt < T`.
pub fn epsilon_k(
    l_k: f64,
    p: usize,
    t_horizon: f64,
    m: usize,
    c_rho2: f64,
) -> Result<(f64, f64), EncoderError> {
    let threshold = 16.0 * c_rho2 / (PI * PI);
    if (m as f64) <= threshold {
        return Err(EncoderError::ModeCountTooSmall { m, threshold });
    }
    let v_opt = 2.0 * t_horizon * (2.0 * c_rho2 / (PI * PI * m as f64)).cbrt();
    let eps = 54.0_f64.cbrt() * p as f64 * l_k * t_horizon * c_rho2.cbrt()
        / (PI.powf(2.0 / 3.0) * (m as f64).cbrt());
    Ok((v_opt, eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::Layer;
    use crate::oscillator::{oscillator_forward, OscillatorModel};
    use approx::assert_relative_eq;

    #[test]
    fn c1_value() {
        assert!((mollifier_c1() - 0.221997).abs() < 1e-5);
    }

    #[test]
    fn mollifier_normalizes_to_one() {
        let v = 0.37;
        let c_v = v * mollifier_c1();
        // integral of rho_v over its support equals H rho_v(0)
        let (re, im) = mollifier_fourier_at(v, c_v, 0.0, 16);
        assert_relative_eq!(re, 1.0, epsilon = 1e-10);
        assert_eq!(im, 0.0);
    }

    #[test]
    fn alpha_bounded_by_inverse_horizon() {
        let t_horizon = 2.0;
        let data = mollifier_fourier(0.3, t_horizon, 64).unwrap();
        for &a in &data.alpha {
            assert!(a <= (1.0 + 1e-9) / t_horizon);
        }
        assert_eq!(data.alpha.len(), 64);
    }

    #[test]
    fn mollifier_width_validation() {
        assert!(mollifier_fourier(0.0, 1.0, 4).is_err());
        assert!(mollifier_fourier(1.5, 1.0, 4).is_err());
    }

    #[test]
    fn encoder_widths() {
        let spec = SineEncoderSpec::default_grid(1, 5, 1.0);
        let mlp = build_sine_encoder(&spec).unwrap();
        assert_eq!(mlp.in_width(), 11);
        assert_eq!(mlp.layers[0].out_width(), 10);
        assert_eq!(mlp.out_width(), 5);
    }

    #[test]
    fn encoder_computes_linear_formula() {
        // Mode with omega=2 at x=0.3, u=0.7: -4*0.3 + 2*0.7 = 0.2
        let spec = SineEncoderSpec {
            frequencies: vec![2.0, 3.0],
            p: 1,
        };
        let mlp = build_sine_encoder(&spec).unwrap();
        let out = mlp
            .forward_inference(&[0.3, 0.1, 5.0, -2.0, 0.7])
            .unwrap();
        assert_relative_eq!(out[0], 0.2, epsilon = 1e-14);
        // second mode: -9*0.1 + 3*0.7 = 1.2
        assert_relative_eq!(out[1], 1.2, epsilon = 1e-14);
    }

    fn encoder_model(spec: &SineEncoderSpec) -> OscillatorModel {
        let m = spec.m();
        let gamma = build_sine_encoder(spec).unwrap();
        // Readout: identity on x, so y = x(t)
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
        OscillatorModel {
            gamma,
            pi,
            r: m,
            p: 1,
            q: m,
        }
    }

    #[test]
    fn constant_input_forced_response() {
        // u = 1, omega = pi: x(t) = (1 - cos(pi t))/pi, so x(1) = 2/pi
        let spec = SineEncoderSpec {
            frequencies: vec![PI, 2.0 * PI],
            p: 1,
        };
        let model = encoder_model(&spec);
        let u = Signal::from_fn(1, 1e-3, 1001, |_| vec![1.0]).unwrap();
        let (y, _) = oscillator_forward(&model, &u).unwrap();
        assert!((y.sample(1000)[0] - 2.0 / PI).abs() < 1e-5);
    }

    #[test]
    fn sine_transform_closed_forms() {
        let ones = Signal::from_fn(1, 1e-3, 1001, |_| vec![1.0]).unwrap();
        let got = sine_transform_quadrature(&ones, PI, 1.0).unwrap();
        assert!((got[0] - 2.0 / PI).abs() < 1e-6);

        let n = 3142;
        let dt = PI / (n as f64 - 1.0);
        let sine = Signal::from_fn(1, dt, n, |t| vec![t.sin()]).unwrap();
        let got = sine_transform_quadrature(&sine, 1.0, (n - 1) as f64 * dt).unwrap();
        assert!((got[0] - PI / 2.0).abs() < 1e-5);

        let zeros = Signal::from_fn(1, 0.01, 101, |_| vec![0.0]).unwrap();
        assert_eq!(sine_transform_quadrature(&zeros, 3.3, 0.5).unwrap(), vec![0.0]);
    }

    #[test]
    fn sine_transform_rejects_off_domain_time() {
        let u = Signal::from_fn(1, 0.1, 11, |t| vec![t]).unwrap();
        assert!(sine_transform_quadrature(&u, 1.0, 1.5).is_err());
        assert!(sine_transform_quadrature(&u, 1.0, 0.55).is_err());
    }

    #[test]
    fn encoder_matches_quadrature_oracle() {
        let spec = SineEncoderSpec {
            frequencies: vec![PI / 2.0, PI, 2.0 * PI],
            p: 1,
        };
        let model = encoder_model(&spec);
        let u = Signal::from_fn(1, 1e-3, 1001, |t| {
            vec![0.4 * (2.0 * t).sin() + 0.7 * (5.0 * t).cos() - 0.2]
        })
        .unwrap();
        let (y, _) = oscillator_forward(&model, &u).unwrap();
        for i in (100..=1000).step_by(100) {
            let t = i as f64 * 1e-3;
            for (n, &omega) in spec.frequencies.iter().enumerate() {
                let oracle = sine_transform_quadrature(&u, omega, t).unwrap()[0];
                let got = y.sample(i)[n];
                assert!(
                    (got - oracle).abs() <= 1e-4 * f64::max(1.0, oracle.abs()),
                    "mode {n} at t={t}: {got} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn piecewise_linear_transform_matches_closed_forms() {
        let t = 1.0;
        // Very high frequency, far beyond the trapezoid rule's reach.
        for omega in [PI / 2.0, 10.0, 1500.0] {
            let c = 2.3;
            let u = Signal::from_fn(1, 0.01, 101, |_| vec![c]).unwrap();
            let got = sine_transform_piecewise_linear(&u, omega, t).unwrap()[0];
            let exact = c * (1.0 - (omega * t).cos()) / omega;
            assert_relative_eq!(got, exact, epsilon = 1e-12);

            let lin = Signal::from_fn(1, 0.01, 101, |s| vec![s]).unwrap();
            let got = sine_transform_piecewise_linear(&lin, omega, t).unwrap()[0];
            let exact = t / omega - (omega * t).sin() / (omega * omega);
            assert_relative_eq!(got, exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn piecewise_linear_transform_agrees_with_trapezoid_when_resolved() {
        let u = Signal::from_fn(1, 1e-3, 1001, |s| vec![(2.0 * s).sin() + 0.3]).unwrap();
        let omega = 3.0 * PI;
        let a = sine_transform_piecewise_linear(&u, omega, 1.0).unwrap()[0];
        let b = sine_transform_quadrature(&u, omega, 1.0).unwrap()[0];
        assert!((a - b).abs() < 1e-5, "{a} vs {b}");
    }

    #[test]
    fn reconstruction_of_constants_is_exact() {
        let t_horizon = 1.0;
        let m = 8;
        let data = mollifier_fourier(0.25, t_horizon, m).unwrap();
        let omegas: Vec<f64> = (1..=m)
            .map(|n| PI * n as f64 / (2.0 * t_horizon))
            .collect();
        let c = 2.7;
        // Exact sine-transform coefficients of u = c:
        // L_t u(omega) = c (1 - cos(omega t)) / omega, which cancels the
        // u(0)/omega [cos(omega t) - 1] term identically.
        let t = 0.8;
        let coeffs: Vec<f64> = omegas
            .iter()
            .map(|w| c * (1.0 - (w * t).cos()) / w)
            .collect();
        let taus = [0.0, 0.2, 0.5, 0.8];
        let rec = reconstruct_input(&coeffs, &[c], &data, &omegas, t, &taus).unwrap();
        for r in rec {
            assert_relative_eq!(r[0], c, epsilon = 1e-12);
        }
    }

    #[test]
    fn reconstruction_of_zero_is_zero() {
        let data = mollifier_fourier(0.25, 1.0, 4).unwrap();
        let omegas: Vec<f64> = (1..=4).map(|n| PI * n as f64 / 2.0).collect();
        let rec =
            reconstruct_input(&[0.0; 4], &[0.0], &data, &omegas, 0.5, &[0.0, 0.25, 0.5]).unwrap();
        for r in rec {
            assert_eq!(r[0], 0.0);
        }
    }

    #[test]
    fn reconstruction_error_below_epsilon_k() {
        // u(t) = t on [0,1] is 1-Lipschitz; sup reconstruction error at
        // M = 256 must sit below the closed-form bound.
        let t_horizon = 1.0;
        let m = 256;
        let (v_opt, eps) = epsilon_k(1.0, 1, t_horizon, m, c_rho2()).unwrap();
        let data = mollifier_fourier(v_opt, t_horizon, m).unwrap();
        let omegas: Vec<f64> = (1..=m)
            .map(|n| PI * n as f64 / (2.0 * t_horizon))
            .collect();
        let u = Signal::from_fn(1, 1e-3, 1001, |t| vec![t]).unwrap();
        let t = 1.0;
        let coeffs: Vec<f64> = omegas
            .iter()
            .map(|&w| sine_transform_quadrature(&u, w, t).unwrap()[0])
            .collect();
        let taus: Vec<f64> = (0..=200).map(|i| i as f64 * 0.005).collect();
        let rec = reconstruct_input(&coeffs, &[0.0], &data, &omegas, t, &taus).unwrap();
        let sup = taus
            .iter()
            .zip(&rec)
            .map(|(&tau, r)| (r[0] - tau).abs())
            .fold(0.0, f64::max);
        assert!(sup <= eps, "sup error {sup} exceeds eps_K {eps}");
    }

    #[test]
    fn epsilon_k_cube_root_scaling() {
        let c = c_rho2();
        let (_, e1) = epsilon_k(2.0, 3, 1.5, 512, c).unwrap();
        let (_, e2) = epsilon_k(2.0, 3, 1.5, 4096, c).unwrap();
        assert_relative_eq!(e1 / e2, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn epsilon_k_optimizer_is_stationary() {
        // Eq-12 objective: p L v + 8 T^3 p L c / (pi^2 v^2 M); its
        // derivative at v_opt must vanish.
        let (l_k, p, t_h, m) = (1.3, 2, 2.0, 1024);
        let c = c_rho2();
        let (v_opt, eps) = epsilon_k(l_k, p, t_h, m, c).unwrap();
        assert!(v_opt < t_h);
        let obj = |v: f64| {
            p as f64 * l_k * v
                + 8.0 * t_h.powi(3) * p as f64 * l_k * c / (PI * PI * v * v * m as f64)
        };
        let h = 1e-6;
        let deriv = (obj(v_opt + h) - obj(v_opt - h)) / (2.0 * h);
        assert!(deriv.abs() < 1e-6);
        assert_relative_eq!(obj(v_opt), eps, epsilon = 1e-12);
    }

    #[test]
    fn epsilon_k_rejects_small_mode_count() {
        let c = 10.0;
        let threshold = 16.0 * c / (PI * PI);
        match epsilon_k(1.0, 1, 1.0, 16, c) {
            Err(EncoderError::ModeCountTooSmall { m: 16, threshold: th }) => {
                assert_relative_eq!(th, threshold, epsilon = 1e-12)
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn c_rho_constants_are_positive_and_stable() {
        let a = c_rho2();
        let b = c_rho2();
        assert_eq!(a, b);
        assert!(a > 0.0);
        assert!(c_rho3() > a);
    }
}
