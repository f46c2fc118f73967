//! Quadratic Lyapunov certification of a gain set.
//!
//! With `z_R = (‖e_R‖, ‖e_ω‖)` and `z_x = (‖e_x‖, ‖e_v‖)` the candidates
//!
//! ```text
//! V_R = ½ e_ωᵀ I e_ω + Ψ(R_e) + p1 e_ωᵀ e_R
//! V_x = ½ m e_vᵀ e_v + ½ e_xᵀ K_x e_x + p2 e_xᵀ e_v
//! ```
//!
//! are sandwiched by `P_R1, P_R2, P_x1, P_x2` and their derivatives are
//! bounded through `W_R, W_x, W_Rx`. The pair `(p1, p2)` is chosen on a
//! grid to maximise `λ_min(W)`.

use serde::Serialize;
use thiserror::Error;

use crate::controller::{ActuationLimits, ControlGains};
use crate::dynamics::{RigidBodyParams, RigidBodyState};
use crate::eig::{spectral_norm2, sym2_eigenvalues, sym3_eigenvalues, Mat2};
use crate::geom::{attitude_error_vector, nav_error, psi_constants, GeomError, PsiConstants, RotationMatrix, Vec3};
use crate::par::{map_indices, Execution};
use crate::trajectory::TrajectoryCommand;

/// Grid resolution per axis for the `(p1, p2)` search.
pub const GRID: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("p1 = {value} outside (0, {bound})")]
    P1OutOfRange { value: f64, bound: f64 },
    #[error("p2 = {value} outside (0, {bound})")]
    P2OutOfRange { value: f64, bound: f64 },
    #[error("tracking-force budget f_cM = {f_cm} N must lie in (0, f_M − f_M^d = {budget}] N")]
    BadForceBudget { f_cm: f64, budget: f64 },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificationInput {
    pub params: RigidBodyParams,
    pub gains: ControlGains,
    pub limits: ActuationLimits,
    /// `sup ‖m g e3 + m a_d‖`, N.
    pub f_m_d: f64,
    /// Tracking-force budget, N.
    pub f_cm: f64,
}

impl CertificationInput {
    pub fn new(
        params: RigidBodyParams,
        gains: ControlGains,
        limits: ActuationLimits,
        f_m_d: f64,
        f_cm: f64,
    ) -> Result<Self, CertifyError> {
        let budget = limits.f_max - f_m_d;
        if !(f_cm > 0.0 && f_cm <= budget) {
            return Err(CertifyError::BadForceBudget { f_cm, budget });
        }
        Ok(Self { params, gains, limits, f_m_d, f_cm })
    }

    /// Uses the whole budget `f_cM = f_M − f_M^d`.
    pub fn with_full_budget(
        params: RigidBodyParams,
        gains: ControlGains,
        limits: ActuationLimits,
        f_m_d: f64,
    ) -> Result<Self, CertifyError> {
        Self::new(params, gains, limits, f_m_d, limits.f_max - f_m_d)
    }
}

fn inertia_extremes(params: &RigidBodyParams) -> (f64, f64) {
    let e = sym3_eigenvalues(params.inertia());
    (e[0], e[2])
}

fn extremes(m: &crate::geom::Mat3) -> (f64, f64) {
    let e = sym3_eigenvalues(m);
    (e[0], e[2])
}

/// Upper limit for `p1`.
pub fn p1_bound(params: &RigidBodyParams, gains: &ControlGains) -> Result<f64, CertifyError> {
    let h1 = psi_constants(&gains.k_r, gains.psi)?.h1;
    let (i_min, i_max) = inertia_extremes(params);
    let (kw_min, kw_max) = extremes(&gains.k_omega);
    let sqrt2 = std::f64::consts::SQRT_2;
    let first = (h1 * i_min).sqrt();
    let second = 4.0 * sqrt2 * kw_min * i_min * i_min
        / (sqrt2 * kw_max * kw_max * i_max + 4.0 * gains.k_r.trace() * i_min * i_min);
    Ok(first.min(second))
}

/// Upper limit for `p2`.
pub fn p2_bound(params: &RigidBodyParams, gains: &ControlGains) -> f64 {
    let m = params.mass();
    let (kx_min, _) = extremes(&gains.k_x);
    let (kv_min, kv_max) = extremes(&gains.k_v);
    let first = (m * kx_min).sqrt();
    let second = 4.0 * m * kv_min * kx_min / (4.0 * m * kx_min + kv_max * kv_max);
    first.min(second)
}

/// `α = √((3 + 2γ) h2 / Ψ_M)` with `γ = 2 Ψ_M / λ_min(K_R)`.
///
/// `tr R_e ≥ 3 − 2Ψ/λ_min(K_R)` enters the force-error bound as
/// `3 − γ Ψ/Ψ_M`, which fixes the `Ψ_M` factor in `γ`. Without it the bound
/// fails for large attitude errors.
pub fn force_error_gain(gains: &ControlGains) -> Result<(f64, f64), CertifyError> {
    let h2 = psi_constants(&gains.k_r, gains.psi)?.h2;
    let gamma = 2.0 * gains.psi_max / gains.k_r.min();
    Ok((((3.0 + 2.0 * gamma) * h2 / gains.psi_max).sqrt(), gamma))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificationMatrices {
    pub p_r1: Mat2,
    pub p_r2: Mat2,
    pub p_x1: Mat2,
    pub p_x2: Mat2,
    pub w_r: Mat2,
    pub w_x: Mat2,
    pub w_rx: Mat2,
}

impl CertificationMatrices {
    /// `W = [[λ_min(W_x), −‖W_Rx‖/2], [−‖W_Rx‖/2, λ_min(W_R)]]`.
    pub fn w(&self) -> Mat2 {
        let off = -0.5 * spectral_norm2(&self.w_rx);
        Mat2::new(sym2_eigenvalues(&self.w_x)[0], off, off, sym2_eigenvalues(&self.w_r)[0])
    }
}

struct Constants {
    psi: PsiConstants,
    i_min: f64,
    i_max: f64,
    kw_min: f64,
    kw_max: f64,
    kx_min: f64,
    kx_max: f64,
    kv_min: f64,
    kv_max: f64,
    trace_kr: f64,
    alpha: f64,
    gamma: f64,
    mass: f64,
    f_max: f64,
}

impl Constants {
    fn new(input: &CertificationInput) -> Result<Self, CertifyError> {
        let g = &input.gains;
        let (i_min, i_max) = inertia_extremes(&input.params);
        let (kw_min, kw_max) = extremes(&g.k_omega);
        let (kx_min, kx_max) = extremes(&g.k_x);
        let (kv_min, kv_max) = extremes(&g.k_v);
        let (alpha, gamma) = force_error_gain(g)?;
        Ok(Self {
            psi: psi_constants(&g.k_r, g.psi)?,
            i_min,
            i_max,
            kw_min,
            kw_max,
            kx_min,
            kx_max,
            kv_min,
            kv_max,
            trace_kr: g.k_r.trace(),
            alpha,
            gamma,
            mass: input.params.mass(),
            f_max: input.limits.f_max,
        })
    }

    fn matrices(&self, p1: f64, p2: f64) -> CertificationMatrices {
        let m = self.mass;
        let w_r12 = -0.5 * p1 * self.kw_max / self.i_min;
        let w_x12 = -0.5 * p2 * self.kv_max / m;
        let af = self.alpha * self.f_max;
        CertificationMatrices {
            p_r1: Mat2::new(self.psi.h1, -p1, -p1, self.i_min),
            p_r2: Mat2::new(self.psi.h2, p1, p1, self.i_max),
            p_x1: Mat2::new(self.kx_min, -p2, -p2, m),
            p_x2: Mat2::new(self.kx_max, p2, p2, m),
            w_r: Mat2::new(
                p1 / self.i_max,
                w_r12,
                w_r12,
                self.kw_min - p1 * self.trace_kr / std::f64::consts::SQRT_2,
            ),
            w_x: Mat2::new(p2 * self.kx_min / m, w_x12, w_x12, self.kv_min - p2),
            w_rx: Mat2::new(p2 * af / m, 0.0, af, 0.0),
        }
    }
}

/// All sandwich and decay matrices for a given `(p1, p2)`.
pub fn build_matrices(input: &CertificationInput, p1: f64, p2: f64) -> Result<CertificationMatrices, CertifyError> {
    let b1 = p1_bound(&input.params, &input.gains)?;
    let b2 = p2_bound(&input.params, &input.gains);
    if !(p1 > 0.0 && p1 < b1) {
        return Err(CertifyError::P1OutOfRange { value: p1, bound: b1 });
    }
    if !(p2 > 0.0 && p2 < b2) {
        return Err(CertifyError::P2OutOfRange { value: p2, bound: b2 });
    }
    Ok(Constants::new(input)?.matrices(p1, p2))
}

/// Every constant of the analysis for the chosen `(p1, p2)` with the
/// verdicts recomputable from the stored values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct CertificationReport {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub h1: f64,
    pub h2: f64,
    pub psi: f64,
    pub psi_below_c1: bool,
    pub p1_max: f64,
    pub p2_max: f64,
    pub p1: f64,
    pub p2: f64,
    pub lambda_min_PR1: f64,
    pub lambda_max_PR1: f64,
    pub lambda_min_PR2: f64,
    pub lambda_max_PR2: f64,
    pub lambda_min_Px1: f64,
    pub lambda_max_Px1: f64,
    pub lambda_min_Px2: f64,
    pub lambda_max_Px2: f64,
    pub lambda_min_P1: f64,
    pub lambda_max_P2: f64,
    pub lambda_min_WR: f64,
    pub lambda_max_WR: f64,
    pub lambda_min_Wx: f64,
    pub lambda_max_Wx: f64,
    pub norm_WRx: f64,
    pub lambda_min_W: f64,
    /// `λ_min(W_x) − ‖W_Rx‖²/(4 λ_min(W_R))`.
    pub w_margin: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub f_M: f64,
    pub f_M_d: f64,
    pub f_cM: f64,
    pub w_condition: bool,
    /// `λ_min(W)/λ_max(P_2)`, 1/s; meaningful only when certified.
    pub decay_rate_bound: f64,
    pub reg_R_bound: f64,
    pub reg_F_bound: f64,
    pub grid: usize,
    pub certified: bool,
}

fn eig_pair(m: &Mat2) -> (f64, f64) {
    let e = sym2_eigenvalues(m);
    (e[0], e[1])
}

/// Grid search of `(p1, p2)` over the open box below the bounds at
/// [`GRID`]² points; the first maximiser of `λ_min(W)` in row-major order wins.
pub fn certify(input: &CertificationInput, exec: Execution) -> Result<CertificationReport, CertifyError> {
    certify_with_grid(input, GRID, exec)
}

pub fn certify_with_grid(input: &CertificationInput, n: usize, exec: Execution) -> Result<CertificationReport, CertifyError> {
    let consts = Constants::new(input)?;
    let b1 = p1_bound(&input.params, &input.gains)?;
    let b2 = p2_bound(&input.params, &input.gains);
    let n = n.max(1);
    let step = |b: f64, i: usize| b * (i + 1) as f64 / (n + 1) as f64;

    let rows = map_indices(exec, n, |i| {
        let p1 = step(b1, i);
        let mut best = (f64::NEG_INFINITY, 0usize);
        for j in 0..n {
            let w = consts.matrices(p1, step(b2, j)).w();
            let score = sym2_eigenvalues(&w)[0];
            if score > best.0 {
                best = (score, j);
            }
        }
        best
    });
    let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
    for (i, (score, j)) in rows.into_iter().enumerate() {
        if score > best.0 {
            best = (score, i, j);
        }
    }
    let (p1, p2) = (step(b1, best.1), step(b2, best.2));
    Ok(report_for(input, &consts, b1, b2, p1, p2, n))
}

fn report_for(
    input: &CertificationInput,
    consts: &Constants,
    b1: f64,
    b2: f64,
    p1: f64,
    p2: f64,
    grid: usize,
) -> CertificationReport {
    let m = consts.matrices(p1, p2);
    let (pr1_lo, pr1_hi) = eig_pair(&m.p_r1);
    let (pr2_lo, pr2_hi) = eig_pair(&m.p_r2);
    let (px1_lo, px1_hi) = eig_pair(&m.p_x1);
    let (px2_lo, px2_hi) = eig_pair(&m.p_x2);
    let (wr_lo, wr_hi) = eig_pair(&m.w_r);
    let (wx_lo, wx_hi) = eig_pair(&m.w_x);
    let norm_wrx = spectral_norm2(&m.w_rx);
    let lambda_min_w = sym2_eigenvalues(&m.w())[0];
    let w_margin = wx_lo - norm_wrx * norm_wrx / (4.0 * wr_lo);
    let w_condition = wr_lo > 0.0 && wx_lo > 0.0 && w_margin > 0.0;
    let lambda_max_p2 = pr2_hi.max(px2_hi);
    let g = &input.gains;
    let kx_sq = sym3_eigenvalues(&(g.k_x.transpose() * g.k_x))[2];
    let kv_sq = sym3_eigenvalues(&(g.k_v.transpose() * g.k_v))[2];
    let reg_f = px1_lo * input.f_cm * input.f_cm / (2.0 * kx_sq.max(kv_sq));
    let psi_below_c1 = consts.psi.psi < consts.psi.c1;
    let pd = pr1_lo > 0.0 && px1_lo > 0.0;
    CertificationReport {
        c1: consts.psi.c1,
        c2: consts.psi.c2,
        c3: consts.psi.c3,
        h1: consts.psi.h1,
        h2: consts.psi.h2,
        psi: consts.psi.psi,
        psi_below_c1,
        p1_max: b1,
        p2_max: b2,
        p1,
        p2,
        lambda_min_PR1: pr1_lo,
        lambda_max_PR1: pr1_hi,
        lambda_min_PR2: pr2_lo,
        lambda_max_PR2: pr2_hi,
        lambda_min_Px1: px1_lo,
        lambda_max_Px1: px1_hi,
        lambda_min_Px2: px2_lo,
        lambda_max_Px2: px2_hi,
        lambda_min_P1: pr1_lo.min(px1_lo),
        lambda_max_P2: lambda_max_p2,
        lambda_min_WR: wr_lo,
        lambda_max_WR: wr_hi,
        lambda_min_Wx: wx_lo,
        lambda_max_Wx: wx_hi,
        norm_WRx: norm_wrx,
        lambda_min_W: lambda_min_w,
        w_margin,
        alpha: consts.alpha,
        gamma: consts.gamma,
        f_M: input.limits.f_max,
        f_M_d: input.f_m_d,
        f_cM: input.f_cm,
        w_condition,
        decay_rate_bound: lambda_min_w / lambda_max_p2,
        reg_R_bound: consts.psi.psi,
        reg_F_bound: reg_f,
        grid,
        certified: psi_below_c1 && pd && w_condition,
    }
}

/// Lyapunov values of an error state. `p1`, `p2` weight the cross terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovValues {
    /// `½ e_ωᵀ I e_ω + Ψ`
    pub v_r_basic: f64,
    pub v_r: f64,
    pub v_x: f64,
    pub v: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn lyapunov_values(
    params: &RigidBodyParams,
    gains: &ControlGains,
    e_x: &Vec3,
    e_v: &Vec3,
    r_e: &RotationMatrix,
    e_omega: &Vec3,
    p1: f64,
    p2: f64,
) -> LyapunovValues {
    let psi = nav_error(&gains.k_r, r_e);
    let e_r = attitude_error_vector(&gains.k_r, r_e);
    let v_r_basic = 0.5 * e_omega.dot(&(params.inertia() * e_omega)) + psi;
    let v_r = v_r_basic + p1 * e_omega.dot(&e_r);
    let v_x = 0.5 * params.mass() * e_v.norm_squared() + 0.5 * e_x.dot(&(gains.k_x * e_x)) + p2 * e_x.dot(e_v);
    LyapunovValues { v_r_basic, v_r, v_x, v: v_r + v_x }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct InitialConditionVerdict {
    pub values: LyapunovValues,
    pub reg_R_bound: f64,
    pub reg_F_bound: f64,
    /// `½ e_ω(0)ᵀ I e_ω(0) + Ψ(0) < ψ`
    pub reg_R: bool,
    /// `V(0) < λ_min(P_x1) f_cM² / (2 max(λ_max(K_xᵀK_x), λ_max(K_vᵀK_v)))`
    pub reg_F: bool,
}

/// Region membership of the initial error state against the reference
/// `(R_ref, ω_ref)` and the desired translational motion in `cmd`.
pub fn check_initial_condition(
    report: &CertificationReport,
    s0: &RigidBodyState,
    r_ref: &RotationMatrix,
    omega_ref: &Vec3,
    cmd: &TrajectoryCommand,
    gains: &ControlGains,
    params: &RigidBodyParams,
) -> InitialConditionVerdict {
    let r_e = s0.r * r_ref.transpose();
    let values = lyapunov_values(
        params,
        gains,
        &(s0.x - cmd.x),
        &(s0.v - cmd.v),
        &r_e,
        &(s0.omega - omega_ref),
        report.p1,
        report.p2,
    );
    InitialConditionVerdict {
        values,
        reg_R_bound: report.reg_R_bound,
        reg_F_bound: report.reg_F_bound,
        reg_R: values.v_r_basic < report.reg_R_bound,
        reg_F: values.v < report.reg_F_bound,
    }
}
