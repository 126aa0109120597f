//! Seeded generation of the two excitation classes: a five-term random
//! harmonic sum and a zero-mean Gaussian harmonizable ground motion with a
//! prescribed Wigner-Ville spectrum, simulated by the real spectral
//! representation.

use crate::signal::Signal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StochasticError {
    #[error("frequency grid must be non-empty")]
    EmptyFrequencyGrid,
    #[error("invalid grid: {0}")]
    BadGrid(String),
}

/// Counter-based seeded generator: identical (seed, stream) pairs yield
/// identical draw sequences; distinct streams are independent. Backed by
/// ChaCha12.
#[derive(Debug, Clone)]
pub struct SeededRng {
    pub seed: u64,
    pub stream: u64,
    rng: ChaCha12Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        SeededRng { seed, stream, rng }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    /// One Box-Muller pair of independent standard normals.
    pub fn standard_normal_pair(&mut self) -> (f64, f64) {
        // 1 - u in (0, 1] keeps the log argument positive.
        let u1 = 1.0 - self.rng.gen::<f64>();
        let u2 = self.rng.gen::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = TAU * u2;
        (radius * angle.cos(), radius * angle.sin())
    }
}

/// Uniform time grid for excitation sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub len: usize,
}

impl TimeGrid {
    /// The default grid: [0, 10] at dt = 0.01.
    pub fn default_excitation() -> Self {
        TimeGrid { dt: 0.01, len: 1001 }
    }
}

/// The five-term harmonic sum
/// `U_e(t) = c1 sin(0.4 pi t) + c2 cos(0.8 pi t) + c3 sin(1.2 pi t)
/// + c4 cos(1.6 pi t) + c5 sin(2 pi t)` with fixed coefficients.
pub fn harmonic_excitation_from_coeffs(c: &[f64; 5], grid: TimeGrid) -> Signal {
    Signal::from_fn(1, grid.dt, grid.len, |t| {
        vec![
            c[0] * (0.4 * PI * t).sin()
                + c[1] * (0.8 * PI * t).cos()
                + c[2] * (1.2 * PI * t).sin()
                + c[3] * (1.6 * PI * t).cos()
                + c[4] * (2.0 * PI * t).sin(),
        ]
    })
    .expect("finite harmonic sum")
}

/// Draws c_1..c_5 ~ U[-35, 35] and evaluates the harmonic sum on the grid.
pub fn sample_harmonic_excitation(rng: &mut SeededRng, grid: TimeGrid) -> Signal {
    let mut c = [0.0; 5];
    for ci in &mut c {
        *ci = rng.uniform(-35.0, 35.0);
    }
    harmonic_excitation_from_coeffs(&c, grid)
}

/// The Wigner-Ville spectrum `W_e(t, f) = 2500 t^2 f^2 exp[-0.3 (1 + f^2) t]`
/// (t in seconds, f in Hz).
pub fn wigner_ville_spectrum(t: f64, f: f64) -> f64 {
    2500.0 * t * t * f * f * (-0.3 * (1.0 + f * f) * t).exp()
}

/// Midpoint frequency grid over [0, f_max] used by the spectral
/// representation: f_k = (k - 1/2) df, k = 1..=n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGrid {
    pub f_max: f64,
    pub n: usize,
}

impl SpectrumGrid {
    /// The default band: [0, 10] Hz with 512 frequencies.
    pub fn default_band() -> Self {
        SpectrumGrid { f_max: 10.0, n: 512 }
    }

    pub fn validate(&self) -> Result<(), StochasticError> {
        if self.n == 0 {
            return Err(StochasticError::EmptyFrequencyGrid);
        }
        if !(self.f_max > 0.0) {
            return Err(StochasticError::BadGrid(format!(
                "f_max must be positive, got {}",
                self.f_max
            )));
        }
        Ok(())
    }

    pub fn df(&self) -> f64 {
        self.f_max / self.n as f64
    }

    pub fn frequency(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.df()
    }

    /// Exact process variance at time t under the discrete representation:
    /// sum_k 2 W(t, f_k) df.
    pub fn variance_at(&self, t: f64) -> f64 {
        let df = self.df();
        (0..self.n)
            .map(|k| 2.0 * wigner_ville_spectrum(t, self.frequency(k)) * df)
            .sum()
    }

    /// Fraction of the band-unlimited spectral mass integral 2 W(t, f) df
    /// over f in [0, inf) captured by this band, from the closed form of the
    /// Gaussian-type integral.
    pub fn spectral_mass_coverage(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 1.0;
        }
        let a = 0.3 * t;
        let total = 5000.0 * t * t * (-a).exp() * 0.25 * (PI / (a * a * a)).sqrt();
        self.variance_at(t) / total
    }
}

/// One draw of the spectral-representation coefficients (A_k, B_k), i.i.d.
/// standard normal, in fixed k order.
pub fn sample_harmonizable_coeffs(
    rng: &mut SeededRng,
    grid: &SpectrumGrid,
) -> Result<(Vec<f64>, Vec<f64>), StochasticError> {
    grid.validate()?;
    let mut a = Vec::with_capacity(grid.n);
    let mut b = Vec::with_capacity(grid.n);
    for _ in 0..grid.n {
        let (x, y) = rng.standard_normal_pair();
        a.push(x);
        b.push(y);
    }
    Ok((a, b))
}

/// Evaluates the spectral representation
/// `U(t) = sum_k sqrt(2 W(t, f_k) df) [A_k cos(2 pi f_k t)
/// + B_k sin(2 pi f_k t)]` at one time.
pub fn harmonizable_value_at(grid: &SpectrumGrid, a: &[f64], b: &[f64], t: f64) -> f64 {
    let df = grid.df();
    let mut acc = 0.0;
    for k in 0..grid.n {
        let f = grid.frequency(k);
        let amp = (2.0 * wigner_ville_spectrum(t, f) * df).sqrt();
        let phase = TAU * f * t;
        acc += amp * (a[k] * phase.cos() + b[k] * phase.sin());
    }
    acc
}

/// Draws one harmonizable sample path on the time grid. The per-frequency
/// oscillation and exponential decay advance by multiplicative recurrences,
/// so the cost is O(len * n) without transcendental calls in the inner loop.
pub fn sample_harmonizable_excitation(
    rng: &mut SeededRng,
    grid: &SpectrumGrid,
    time: TimeGrid,
) -> Result<Signal, StochasticError> {
    let (a, b) = sample_harmonizable_coeffs(rng, grid)?;
    let df = grid.df();
    let dt = time.dt;
    let mut values = vec![0.0; time.len];
    // sqrt(2 W(t, f)) = sqrt(5000) t f e^{-0.15 (1 + f^2) t}
    let base = (5000.0 * df).sqrt();
    for k in 0..grid.n {
        let f = grid.frequency(k);
        let (ak, bk) = (a[k], b[k]);
        let (sd, cd) = (TAU * f * dt).sin_cos();
        let decay_step = (-0.15 * (1.0 + f * f) * dt).exp();
        let (mut c, mut s) = (1.0, 0.0);
        let mut decay = 1.0;
        for (i, slot) in values.iter_mut().enumerate() {
            let t = i as f64 * dt;
            *slot += base * t * f * decay * (ak * c + bk * s);
            let c_next = c * cd - s * sd;
            s = s * cd + c * sd;
            c = c_next;
            decay *= decay_step;
        }
    }
    Ok(Signal::new(1, dt, values).expect("finite spectral sum"))
}
