//! Target dynamical systems: the 5-DOF Bouc-Wen benchmark, modal damping
//! synthesis, classical RK4 integration, the extreme-value process, and a
//! Gronwall-type perturbation-bound harness for pairs of second-order
//! systems.

use crate::signal::Signal;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const N_DOF: usize = 5;
/// Bouc-Wen state layout: [X (5), Xdot (5), Z (5)].
pub const STATE_DIM: usize = 3 * N_DOF;

#[derive(Debug, Error)]
pub enum DynError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("mass matrix is not positive definite")]
    MassNotPositiveDefinite,
    #[error("generalized eigenproblem produced a non-positive eigenvalue {0}")]
    NonPositiveEigenvalue(f64),
    #[error("non-finite state at integration step {step}")]
    NonFiniteState { step: usize },
    #[error("excitation must have at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("matrix dimensions do not match")]
    DimensionMismatch,
}

/// Parameters of the 5-DOF shear-frame Bouc-Wen model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoucWenConfig {
    /// Floor mass (kg).
    pub m: f64,
    /// Interstory stiffness (N/m).
    pub k: f64,
    /// Elastic fraction; 1 recovers a purely linear system.
    pub lambda: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Hysteresis exponent.
    pub s: f64,
    /// Modal damping ratio applied to every mode.
    pub zeta: f64,
}

impl Default for BoucWenConfig {
    fn default() -> Self {
        BoucWenConfig {
            m: 1382.4,
            k: 1.7e6,
            lambda: 0.01,
            beta: 2.0,
            gamma: 2.0,
            s: 3.0,
            zeta: 0.05,
        }
    }
}

impl BoucWenConfig {
    pub fn validate(&self) -> Result<(), DynError> {
        if !(self.m > 0.0 && self.k > 0.0) {
            return Err(DynError::BadConfig("m and k must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(DynError::BadConfig("lambda must lie in [0, 1]".into()));
        }
        if !(self.s >= 1.0) {
            return Err(DynError::BadConfig("s must be >= 1".into()));
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(DynError::BadConfig("zeta must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn mass_matrix(&self) -> DMatrix<f64> {
        DMatrix::identity(N_DOF, N_DOF) * self.m
    }

    /// Tridiagonal shear-frame stiffness: 2k on the diagonal except k at the
    /// roof, -k off-diagonal.
    pub fn stiffness_matrix(&self) -> DMatrix<f64> {
        let k = self.k;
        let mut m = DMatrix::zeros(N_DOF, N_DOF);
        for i in 0..N_DOF {
            m[(i, i)] = if i == N_DOF - 1 { k } else { 2.0 * k };
            if i + 1 < N_DOF {
                m[(i, i + 1)] = -k;
                m[(i + 1, i)] = -k;
            }
        }
        m
    }

    /// Upper-bidiagonal hysteretic stiffness mapping interstory Z to floor
    /// forces: k on the diagonal, -k on the superdiagonal.
    pub fn hysteretic_matrix(&self) -> DMatrix<f64> {
        let k = self.k;
        let mut m = DMatrix::zeros(N_DOF, N_DOF);
        for i in 0..N_DOF {
            m[(i, i)] = k;
            if i + 1 < N_DOF {
                m[(i, i + 1)] = -k;
            }
        }
        m
    }
}

/// Mass-normalized generalized eigendecomposition of (K, M): returns
/// (omegas ascending, Phi with mass-normalized mode columns).
fn generalized_modes(
    m_mat: &DMatrix<f64>,
    k_mat: &DMatrix<f64>,
) -> Result<(Vec<f64>, DMatrix<f64>), DynError> {
    if m_mat.nrows() != k_mat.nrows() || !m_mat.is_square() || !k_mat.is_square() {
        return Err(DynError::DimensionMismatch);
    }
    let chol = m_mat
        .clone()
        .cholesky()
        .ok_or(DynError::MassNotPositiveDefinite)?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or(DynError::MassNotPositiveDefinite)?;
    let a = &l_inv * k_mat * l_inv.transpose();
    // Symmetrize against roundoff before the symmetric eigensolver.
    let a = (&a + a.transpose()) * 0.5;
    let eig = a.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut omegas = Vec::with_capacity(order.len());
    let mut phi = DMatrix::zeros(m_mat.nrows(), order.len());
    for (col, &i) in order.iter().enumerate() {
        let lam = eig.eigenvalues[i];
        if lam <= 0.0 {
            return Err(DynError::NonPositiveEigenvalue(lam));
        }
        omegas.push(lam.sqrt());
        let q = eig.eigenvectors.column(i);
        let mode = l_inv.transpose() * q;
        phi.set_column(col, &mode);
    }
    Ok((omegas, phi))
}

/// Synthesizes the damping matrix giving every mode the damping ratio
/// `zeta`: C = M Phi diag(2 zeta omega_i) Phi^T M with mass-normalized
/// modes Phi.
pub fn damping_matrix(
    m_mat: &DMatrix<f64>,
    k_mat: &DMatrix<f64>,
    zeta: f64,
) -> Result<DMatrix<f64>, DynError> {
    let (omegas, phi) = generalized_modes(m_mat, k_mat)?;
    let diag = DMatrix::from_diagonal(&DVector::from_iterator(
        omegas.len(),
        omegas.iter().map(|w| 2.0 * zeta * w),
    ));
    Ok(m_mat * &phi * diag * phi.transpose() * m_mat)
}

/// Recovers per-mode damping ratios zeta_i = phi_i^T C phi_i / (2 omega_i)
/// from a damping matrix, for verification.
pub fn modal_damping_ratios(
    m_mat: &DMatrix<f64>,
    k_mat: &DMatrix<f64>,
    c_mat: &DMatrix<f64>,
) -> Result<Vec<f64>, DynError> {
    let (omegas, phi) = generalized_modes(m_mat, k_mat)?;
    let modal_c = phi.transpose() * c_mat * &phi;
    Ok(omegas
        .iter()
        .enumerate()
        .map(|(i, w)| modal_c[(i, i)] / (2.0 * w))
        .collect())
}

/// The Bouc-Wen system with precomputed matrices, ready for integration.
#[derive(Debug, Clone)]
pub struct BoucWenSystem {
    pub cfg: BoucWenConfig,
    c_over_m: DMatrix<f64>,
    k_over_m: DMatrix<f64>,
    kh_over_m: DMatrix<f64>,
}

impl BoucWenSystem {
    pub fn new(cfg: BoucWenConfig) -> Result<Self, DynError> {
        cfg.validate()?;
        let m_mat = cfg.mass_matrix();
        let k_mat = cfg.stiffness_matrix();
        let c_mat = damping_matrix(&m_mat, &k_mat, cfg.zeta)?;
        Ok(BoucWenSystem {
            cfg,
            c_over_m: c_mat / cfg.m,
            k_over_m: k_mat * (cfg.lambda / cfg.m),
            kh_over_m: cfg.hysteretic_matrix() * ((1.0 - cfg.lambda) / cfg.m),
        })
    }

    /// State derivative for state [X, Xdot, Z] under ground acceleration
    /// `u_e`:
    /// Xddot = -u_e 1 - M^{-1}(C Xdot + lambda K X + (1-lambda) Kh Z),
    /// Zdot_i = Vt_i - beta |Vt_i| |Z_i|^{s-1} Z_i - gamma Vt_i |Z_i|^s,
    /// where Vt is the interstory velocity (same differencing as X~).
    pub fn rhs(&self, state: &[f64], u_e: f64) -> Vec<f64> {
        assert_eq!(state.len(), STATE_DIM);
        let x = DVector::from_column_slice(&state[..N_DOF]);
        let v = DVector::from_column_slice(&state[N_DOF..2 * N_DOF]);
        let z = &state[2 * N_DOF..];

        let accel = -(&self.c_over_m * &v) - (&self.k_over_m * &x)
            - (&self.kh_over_m * DVector::from_column_slice(z));
        let mut out = Vec::with_capacity(STATE_DIM);
        out.extend_from_slice(v.as_slice());
        for i in 0..N_DOF {
            out.push(accel[i] - u_e);
        }
        let (cfg, s) = (&self.cfg, self.cfg.s);
        for i in 0..N_DOF {
            let vt = if i == 0 { v[0] } else { v[i] - v[i - 1] };
            let zi = z[i];
            let zs1 = zi.abs().powf(s - 1.0);
            out.push(vt - cfg.beta * vt.abs() * zs1 * zi - cfg.gamma * vt * zs1 * zi.abs());
        }
        out
    }
}

/// Bouc-Wen right-hand side for a raw state vector.
pub fn boucwen_rhs(sys: &BoucWenSystem, state: &[f64], u_e: f64) -> Vec<f64> {
    sys.rhs(state, u_e)
}

/// Classical fourth-order Runge-Kutta over the grid of `u`. The half-step
/// excitation value is linearly interpolated between grid points. Returns
/// the state at every grid point, starting with `z0`.
pub fn rk4_integrate(
    rhs: impl Fn(&[f64], &[f64]) -> Vec<f64>,
    u: &Signal,
    z0: &[f64],
) -> Result<Vec<Vec<f64>>, DynError> {
    if u.len() < 2 {
        return Err(DynError::TooShort(u.len()));
    }
    let dt = u.dt();
    let mut traj = Vec::with_capacity(u.len());
    let mut z = z0.to_vec();
    traj.push(z.clone());
    let mut u_half = vec![0.0; u.dim()];
    for i in 0..u.len() - 1 {
        let (ua, ub) = (u.sample(i), u.sample(i + 1));
        for (h, (&a, &b)) in u_half.iter_mut().zip(ua.iter().zip(ub)) {
            *h = 0.5 * (a + b);
        }
        let k1 = rhs(&z, ua);
        let z2: Vec<f64> = z.iter().zip(&k1).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k2 = rhs(&z2, &u_half);
        let z3: Vec<f64> = z.iter().zip(&k2).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k3 = rhs(&z3, &u_half);
        let z4: Vec<f64> = z.iter().zip(&k3).map(|(a, b)| a + dt * b).collect();
        let k4 = rhs(&z4, ub);
        for j in 0..z.len() {
            z[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if !z.iter().all(|v| v.is_finite()) {
            return Err(DynError::NonFiniteState { step: i + 1 });
        }
        traj.push(z.clone());
    }
    Ok(traj)
}

/// Running maximum of |x| per channel: E(t_i) = max_{j <= i} |x(t_j)|.
pub fn extreme_value_process(x: &Signal) -> Signal {
    let mut running = vec![0.0; x.dim()];
    let mut values = Vec::with_capacity(x.len() * x.dim());
    for i in 0..x.len() {
        for (r, &v) in running.iter_mut().zip(x.sample(i)) {
            *r = f64::max(*r, v.abs());
        }
        values.extend_from_slice(&running);
    }
    Signal::new(x.dim(), x.dt(), values).expect("finite by construction")
}

/// Result of one Gronwall perturbation-bound check (Eq.-27 form):
/// observed sup-norm trajectory difference against
/// `e^{T L} * T * max_t |g2 - g1|` evaluated along the first system's
/// trajectory, with the L1 vector norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub observed_sup_diff: f64,
    pub bound_value: f64,
    pub lipschitz_l: f64,
    pub holds: bool,
}

/// Second-order right-hand side x'' = g(x, x', u).
pub type SecondOrderRhs<'a> = &'a dyn Fn(&[f64], &[f64], &[f64]) -> Vec<f64>;

fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Integrates both systems from zero initial conditions under each
/// excitation and compares the observed trajectory difference with the
/// Gronwall bound. `l1_partial` holds the Lipschitz constants of g1 with
/// respect to its first and second arguments; the state-space constant is
/// `L = max(L1, L2 + 1)`.
pub fn perturbation_bound_check(
    g1: SecondOrderRhs,
    g2: SecondOrderRhs,
    l1_partial: (f64, f64),
    r: usize,
    excitations: &[Signal],
) -> Result<Vec<PerturbationReport>, DynError> {
    let lipschitz_l = f64::max(l1_partial.0, l1_partial.1 + 1.0);
    fn wrap<'a>(
        g: SecondOrderRhs<'a>,
        r: usize,
    ) -> impl Fn(&[f64], &[f64]) -> Vec<f64> + 'a {
        move |state: &[f64], uval: &[f64]| -> Vec<f64> {
            let (x, v) = state.split_at(r);
            let mut out = Vec::with_capacity(2 * r);
            out.extend_from_slice(v);
            out.extend(g(x, v, uval));
            out
        }
    }
    let z0 = vec![0.0; 2 * r];
    let mut reports = Vec::with_capacity(excitations.len());
    for u in excitations {
        let t_final = u.duration();
        let traj1 = rk4_integrate(wrap(g1, r), u, &z0)?;
        let traj2 = rk4_integrate(wrap(g2, r), u, &z0)?;
        let observed = traj1
            .iter()
            .zip(&traj2)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        let max_dg = traj1
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let (x, v) = z.split_at(r);
                let uval = u.sample(i);
                let d1 = g1(x, v, uval);
                let d2 = g2(x, v, uval);
                l1_norm(
                    &d1.iter()
                        .zip(&d2)
                        .map(|(a, b)| a - b)
                        .collect::<Vec<f64>>(),
                )
            })
            .fold(0.0, f64::max);
        let bound_value = (t_final * lipschitz_l).exp() * t_final * max_dg;
        reports.push(PerturbationReport {
            observed_sup_diff: observed,
            bound_value,
            lipschitz_l,
            holds: observed <= bound_value,
        });
    }
    Ok(reports)
}

/// Exact linear modal-superposition response for M X'' + C X' + K X =
/// -M 1 u_e(t) with piecewise-linear u_e, via the per-mode closed-form
/// recurrence for linearly interpolated forcing. Serves as the oracle for
/// the lambda = 1 Bouc-Wen limit. Returns [X, Xdot] per grid point.
pub mod modal {
    use super::*;

    pub fn modal_superposition_response(
        m_mat: &DMatrix<f64>,
        k_mat: &DMatrix<f64>,
        zeta: f64,
        u: &Signal,
    ) -> Result<Vec<Vec<f64>>, DynError> {
        if u.len() < 2 {
            return Err(DynError::TooShort(u.len()));
        }
        let n = m_mat.nrows();
        let (omegas, phi) = generalized_modes(m_mat, k_mat)?;
        // Modal force factors: p_j(t) = -(phi_j^T M 1) u_e(t)
        let ones = DVector::from_element(n, 1.0);
        let factors = phi.transpose() * m_mat * ones;
        let dt = u.dt();

        let mut q = vec![0.0; n];
        let mut qd = vec![0.0; n];
        let mut out = Vec::with_capacity(u.len());
        let store = |q: &[f64], qd: &[f64]| {
            let x = &phi * DVector::from_column_slice(q);
            let v = &phi * DVector::from_column_slice(qd);
            let mut row = Vec::with_capacity(2 * n);
            row.extend_from_slice(x.as_slice());
            row.extend_from_slice(v.as_slice());
            row
        };
        out.push(store(&q, &qd));
        for i in 0..u.len() - 1 {
            for j in 0..n {
                let w = omegas[j];
                let wd = w * (1.0 - zeta * zeta).sqrt();
                let a = -factors[j] * u.sample(i)[0];
                let b = -factors[j] * (u.sample(i + 1)[0] - u.sample(i)[0]) / dt;
                // Particular solution for p = a + b tau
                let bp = b / (w * w);
                let ap = a / (w * w) - 2.0 * zeta * b / (w * w * w);
                let c1 = q[j] - ap;
                let c2 = (qd[j] - bp + zeta * w * c1) / wd;
                let e = (-zeta * w * dt).exp();
                let (swd, cwd) = (wd * dt).sin_cos();
                q[j] = ap + bp * dt + e * (c1 * cwd + c2 * swd);
                qd[j] = bp
                    + e * ((-zeta * w * c1 + wd * c2) * cwd - (zeta * w * c2 + wd * c1) * swd);
            }
            out.push(store(&q, &qd));
        }
        Ok(out)
    }
}
