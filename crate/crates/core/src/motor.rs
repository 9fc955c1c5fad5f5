//! SPMSM magnetic-equivalent-circuit model, torque–speed envelopes and design checks.
//!
//! Geometry enters in millimetres and is converted to SI before any physics.

use crate::error::CoreError;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Fixed machine constants shared by every motor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotorConstants {
    pub q_slots: f64,
    pub q1: f64,
    pub p: f64,
    pub q_pm: f64,
    pub n_s: f64,
    pub c_p: f64,
    /// Tooth-tip height, mm.
    pub h_tip: f64,
    /// Air gap, mm.
    pub delta: f64,
    pub alpha_m: f64,
    pub b_r: f64,
    pub b_max: f64,
    /// kg/mm³
    pub rho_iron: f64,
    /// kg/mm³
    pub rho_cu: f64,
    /// Ω·mm
    pub rho_e: f64,
    pub mu0: f64,
    pub mu_r: f64,
    pub f_f: f64,
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl MotorConstants {
    pub fn standard() -> Self {
        let q_slots = 12u32;
        let q1 = q_slots / 3;
        let p = 4u32;
        MotorConstants {
            q_slots: q_slots as f64,
            q1: q1 as f64,
            p: p as f64,
            q_pm: (q1 / gcd(q1, 2 * p)) as f64,
            n_s: 50.0,
            c_p: 1.0,
            h_tip: 2.0,
            delta: 0.5,
            alpha_m: PI,
            b_r: 1.38,
            b_max: 1.5,
            rho_iron: 7.8e-6,
            rho_cu: 8.93e-6,
            rho_e: 1.8e-5,
            mu0: 4.0 * PI * 1e-7,
            mu_r: 1.05,
            f_f: 0.55,
        }
    }

    pub fn k_p(&self) -> f64 {
        (PI * self.p / self.q_slots).sin()
    }

    pub fn k_d(&self) -> f64 {
        (PI / 6.0).sin() / (self.q_pm * (PI / (6.0 * self.q_pm)).sin())
    }
}

pub const MM: f64 = 1e-3;

/// Seven geometry parameters (mm) plus electrical limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotorDesign<S = f64> {
    pub l: S,
    pub r_ro: S,
    pub r_so: S,
    pub h_m: S,
    pub h_sy: S,
    pub w_tooth: S,
    pub b0: S,
    /// Bus voltage limit, V.
    pub v_max: f64,
    /// Phase current limit, A.
    pub i_max: f64,
}

pub const BETA_NAMES: [&str; 7] = ["l", "r_ro", "r_so", "h_m", "h_sy", "w_tooth", "b0"];

/// Design box of the seven parameters (mm).
pub const BETA_BOX: [(f64, f64); 7] = [(20.0, 100.0), (10.0, 100.0), (10.0, 100.0), (1.0, 5.0), (5.0, 10.0), (5.0, 20.0), (1.0, 10.0)];

impl<S: Scalar> MotorDesign<S> {
    pub fn beta(&self) -> [S; 7] {
        [self.l, self.r_ro, self.r_so, self.h_m, self.h_sy, self.w_tooth, self.b0]
    }

    pub fn from_beta(beta: &[S], v_max: f64, i_max: f64) -> Self {
        MotorDesign { l: beta[0], r_ro: beta[1], r_so: beta[2], h_m: beta[3], h_sy: beta[4], w_tooth: beta[5], b0: beta[6], v_max, i_max }
    }

    pub fn value(&self) -> MotorDesign<f64> {
        let b = self.beta();
        MotorDesign::from_beta(&b.map(|x| x.re()), self.v_max, self.i_max)
    }
}

impl MotorDesign<f64> {
    pub fn lift<S: Scalar>(&self) -> MotorDesign<S> {
        MotorDesign::from_beta(&self.beta().map(S::cst), self.v_max, self.i_max)
    }
}

/// Everything the MEC chain derives from β. Lengths in m, areas in m², masses in kg.
#[derive(Clone, Copy, Debug)]
pub struct MotorElectromagnetics<S = f64> {
    pub h_ss: S,
    pub b_ss: S,
    pub a_slot: S,
    pub a_so: S,
    pub volume: S,
    pub a_cu: S,
    pub a_coil: S,
    pub d_wire: S,
    pub tau_s: S,
    pub l_end_av: S,
    pub l_coil: S,
    pub m_rotor: S,
    pub m_stator: S,
    /// Rotor inertias: axial, transverse, transverse (kg·m²).
    pub rotor_inertia: [S; 3],
    pub stator_inertia: [S; 3],
    pub r1: S,
    pub resistance: S,
    pub p_g: S,
    pub p_so: S,
    pub p_tt: S,
    pub l1: S,
    pub l_d: S,
    pub l_q: S,
    pub gamma: S,
    pub t_pitch: S,
    pub k_c: S,
    pub b_g: S,
    pub b_g1: S,
    pub phi1: S,
    pub k_p: f64,
    pub k_d: f64,
    pub k_w: f64,
    pub phi_pm: S,
}

/// Geometry, mass and MEC quantities without feasibility checks. Values may be
/// negative or NaN for impossible geometry; see [`derive_electromagnetics`].
pub fn electromagnetics_unchecked<S: Scalar>(d: &MotorDesign<S>) -> MotorElectromagnetics<S> {
    let c = MotorConstants::standard();
    let q = c.q_slots;
    let l = d.l * MM;
    let r_ro = d.r_ro * MM;
    let r_so = d.r_so * MM;
    let h_m = d.h_m * MM;
    let h_sy = d.h_sy * MM;
    let w = d.w_tooth * MM;
    let b0 = d.b0 * MM;
    let delta = c.delta * MM;
    let h_tip = c.h_tip * MM;
    let rho_iron = c.rho_iron / (MM * MM * MM);
    let rho_cu = c.rho_cu / (MM * MM * MM);
    let rho_e = c.rho_e * MM;

    let h_ss = r_so - h_sy - r_ro - delta - h_tip;
    let outer = r_so - h_sy;
    let inner = r_ro + delta + h_tip;
    let a_slot = (outer * outer - inner * inner) * (PI / q) - w * h_ss;
    let b_ss = a_slot / h_ss;
    let r_gap = r_ro + delta;
    let a_so = r_so * r_so * PI - r_gap * r_gap * PI - (a_slot + b0 * h_tip) * q;
    let volume = a_so * l;
    let a_cu = a_slot * c.f_f;
    let a_coil = a_cu / (2.0 * c.n_s);
    let d_wire = (a_coil * (4.0 / PI)).sqrt();
    let tau_s = r_gap * (2.0 * PI / q);
    let l_end_av = (w * (2.0 - PI / 2.0) + tau_s * (PI / 2.0)) * 0.5;
    let l_coil = l * 2.0 + l_end_av * 2.0;

    let m_rotor = r_ro * r_ro * l * (rho_iron * PI);
    let m_stator = r_so * r_so * l * (rho_iron * PI) - r_gap * r_gap * l * (rho_iron * PI) - a_slot * l * (rho_iron * q)
        + a_coil * l_coil * (rho_cu * c.n_s * q);

    let rotor_ax = m_rotor * r_ro * r_ro * 0.5;
    let rotor_tr = m_rotor * (r_ro * r_ro * 3.0 + l * l) / 12.0;
    let rr = r_so * r_so + r_gap * r_gap;
    let stator_ax = m_stator * rr * 0.5;
    let stator_tr = m_stator * (rr * 3.0 + l * l) / 12.0;

    let r1 = l_coil * (c.n_s * c.n_s * rho_e) / (a_slot * c.f_f);
    let resistance = r1 * (c.q1 / (c.c_p * c.c_p));

    let p_g = (r_ro * l * (2.0 * PI * c.mu0 / q)) / (h_m / c.mu_r + delta);
    let p_so = l * (c.mu0 * h_tip) / b0;
    let dm = h_m + delta;
    let p_tt = dm * l * c.mu0 / (dm * (PI / 2.0) + b0);
    let l1 = p_g + p_so * 3.0 + p_tt * 3.0;
    let l_d = l1 * (c.q1 * c.n_s * c.n_s / (c.c_p * c.c_p));

    let ratio = b0 / delta;
    let gamma = ratio * ratio / (ratio + 5.0);
    let t_pitch = r_ro * (2.0 * PI / q);
    let k_c = t_pitch / (t_pitch - gamma * delta);
    let hm_r = h_m / c.mu_r;
    let b_g = hm_r * c.b_r / (hm_r + k_c * delta);
    let b_g1 = b_g * (4.0 / PI);
    let phi1 = b_g1 * l * r_ro * (2.0 * PI / q);
    let k_p = c.k_p();
    let k_d = c.k_d();
    let k_w = k_p * k_d;
    let phi_pm = phi1 * (k_w * c.n_s * c.q1 / c.c_p);

    MotorElectromagnetics {
        h_ss,
        b_ss,
        a_slot,
        a_so,
        volume,
        a_cu,
        a_coil,
        d_wire,
        tau_s,
        l_end_av,
        l_coil,
        m_rotor,
        m_stator,
        rotor_inertia: [rotor_ax, rotor_tr, rotor_tr],
        stator_inertia: [stator_ax, stator_tr, stator_tr],
        r1,
        resistance,
        p_g,
        p_so,
        p_tt,
        l1,
        l_d,
        l_q: l_d,
        gamma,
        t_pitch,
        k_c,
        b_g,
        b_g1,
        phi1,
        k_p,
        k_d,
        k_w,
        phi_pm,
    }
}

/// Full MEC chain; rejects geometrically impossible motors.
pub fn derive_electromagnetics<S: Scalar>(d: &MotorDesign<S>) -> Result<MotorElectromagnetics<S>, CoreError> {
    for (name, v) in BETA_NAMES.iter().zip(d.beta().iter()) {
        if !(v.re() > 0.0) || !v.re().is_finite() {
            return Err(CoreError::InfeasibleGeometry(format!("{name} must be positive, got {}", v.re())));
        }
    }
    let em = electromagnetics_unchecked(d);
    if em.h_ss.re() <= 0.0 {
        return Err(CoreError::InfeasibleGeometry(format!("slot height h_ss = {} m", em.h_ss.re())));
    }
    if em.a_slot.re() <= 0.0 {
        return Err(CoreError::InfeasibleGeometry(format!("slot area = {} m^2", em.a_slot.re())));
    }
    if em.a_so.re() <= 0.0 {
        return Err(CoreError::InfeasibleGeometry(format!("stator core area = {} m^2", em.a_so.re())));
    }
    Ok(em)
}

/// Maximum back-EMF voltage budget `V_max/√3 − R·I_max`.
pub fn v_dq_max<S: Scalar>(em: &MotorElectromagnetics<S>, v_max: f64, i_max: f64) -> S {
    -(em.resistance * i_max) + v_max / 3f64.sqrt()
}

/// Flat torque `1.5·p·Φ_pm·I_max`.
pub fn flat_torque<S: Scalar>(em: &MotorElectromagnetics<S>, i_max: f64) -> S {
    let p = MotorConstants::standard().p;
    em.phi_pm * (1.5 * p * i_max)
}

/// Corner electric speed `ω_ce`.
pub fn corner_electric_speed<S: Scalar>(em: &MotorElectromagnetics<S>, v_max: f64, i_max: f64) -> S {
    let li = em.l_q * i_max;
    v_dq_max(em, v_max, i_max) / (li * li + em.phi_pm * em.phi_pm).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeCase {
    Pos,
    Zero,
    Neg,
}

/// Relative tolerance on `Φ_pm/L_d − I_max` below which the zero case is selected.
pub const ZERO_CASE_RTOL: f64 = 1e-9;

/// Analytical torque–speed envelope of one motor (rotor side).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorqueEnvelope {
    pub case: EnvelopeCase,
    pub tau_flat: f64,
    pub omega_r: f64,
    /// Switch speed, neg case only.
    pub omega_s: Option<f64>,
    /// Speed ceiling; infinite outside the pos case.
    pub omega_max: f64,
    pub v_dq_max: f64,
    pub phi_pm: f64,
    pub l_d: f64,
    pub i_max: f64,
    pub p: f64,
}

pub fn torque_envelope(d: &MotorDesign) -> Result<TorqueEnvelope, CoreError> {
    let em = derive_electromagnetics(d)?;
    envelope_from_em(&em, d.v_max, d.i_max)
}

pub fn envelope_from_em(em: &MotorElectromagnetics, v_max: f64, i_max: f64) -> Result<TorqueEnvelope, CoreError> {
    let p = MotorConstants::standard().p;
    let v = v_dq_max(em, v_max, i_max);
    if v < 0.0 {
        return Err(CoreError::VoltageBudget { v_dq_max: v });
    }
    let phi = em.phi_pm;
    let l = em.l_d;
    let li = l * i_max;
    let diff = phi / l - i_max;
    let case = if diff.abs() <= ZERO_CASE_RTOL * i_max {
        EnvelopeCase::Zero
    } else if diff > 0.0 {
        EnvelopeCase::Pos
    } else {
        EnvelopeCase::Neg
    };
    let omega_r = v / (li * li + phi * phi).sqrt() / p;
    let (omega_s, omega_max) = match case {
        EnvelopeCase::Pos => (None, v / (p * (phi - li).abs())),
        EnvelopeCase::Zero => (None, f64::INFINITY),
        EnvelopeCase::Neg => (Some(v / (p * (li * li - phi * phi).sqrt())), f64::INFINITY),
    };
    Ok(TorqueEnvelope { case, tau_flat: 1.5 * p * phi * i_max, omega_r, omega_s, omega_max, v_dq_max: v, phi_pm: phi, l_d: l, i_max, p })
}

/// Result of a τ_max query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TauBounds<S = f64> {
    pub tau_min: S,
    pub tau_max: S,
    /// Set when |ω| exceeds ω_max in the pos case.
    pub out_of_range: bool,
}

impl TorqueEnvelope {
    /// Piecewise τ_max at |ω| (rotor speed, rad/s), generic in ω.
    pub fn tau_max<S: Scalar>(&self, omega: S) -> (S, bool) {
        let w = omega.abs();
        if w.branch_lt(self.omega_r) || w.re() == self.omega_r {
            return (S::cst(self.tau_flat), false);
        }
        let we = w * self.p;
        let k = 1.5 * self.p * self.phi_pm;
        let li = self.l_d * self.i_max;
        let iq_current_voltage = |we: S| {
            let vw = S::cst(self.v_dq_max) / we;
            let id = (vw * vw - (li * li + self.phi_pm * self.phi_pm)) / (2.0 * self.phi_pm * self.l_d);
            let rad = -(id * id) + self.i_max * self.i_max;
            if rad.re() <= 0.0 {
                S::zero()
            } else {
                rad.sqrt()
            }
        };
        match self.case {
            EnvelopeCase::Pos => {
                if !w.branch_lt(self.omega_max) {
                    return (S::zero(), w.re() > self.omega_max);
                }
                (iq_current_voltage(we) * k, false)
            }
            EnvelopeCase::Zero => (iq_current_voltage(we) * k, false),
            EnvelopeCase::Neg => {
                let ws = self.omega_s.unwrap_or(f64::INFINITY);
                if w.branch_lt(ws) {
                    (iq_current_voltage(we) * k, false)
                } else {
                    (S::cst(self.v_dq_max) / (we * self.l_d) * k, false)
                }
            }
        }
    }

    pub fn bounds(&self, omega: f64) -> TauBounds {
        let (t, flag) = self.tau_max(omega);
        TauBounds { tau_min: -t, tau_max: t, out_of_range: flag }
    }
}

/// `(τ_min, τ_max)` of motor `d` at rotor speed ω.
pub fn tau_bounds(omega: f64, d: &MotorDesign) -> Result<TauBounds, CoreError> {
    Ok(torque_envelope(d)?.bounds(omega))
}

/// Motor currents for one (ω, τ) operating point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatingPoint {
    pub omega: f64,
    pub tau: f64,
    pub i_d: f64,
    pub i_q: f64,
    pub feasible: bool,
}

/// Electrical parameters needed by the current-conversion routine.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveParams {
    pub resistance: f64,
    pub l_d: f64,
    pub phi_pm: f64,
    pub v_max: f64,
    pub i_max: f64,
    pub p: f64,
}

impl DriveParams {
    pub fn from_design(d: &MotorDesign) -> Result<Self, CoreError> {
        let em = derive_electromagnetics(d)?;
        Ok(DriveParams {
            resistance: em.resistance,
            l_d: em.l_d,
            phi_pm: em.phi_pm,
            v_max: d.v_max,
            i_max: d.i_max,
            p: MotorConstants::standard().p,
        })
    }

    /// Conversion of a first-quadrant operating point into d/q currents.
    pub fn currents(&self, omega: f64, tau: f64) -> OperatingPoint {
        let DriveParams { resistance, l_d, phi_pm, v_max, i_max, p } = *self;
        let l_q = l_d;
        let infeasible = OperatingPoint { omega, tau, i_d: f64::NAN, i_q: f64::NAN, feasible: false };
        let v = v_max / 3f64.sqrt() - resistance * i_max;
        let omega_r = v / (p * ((l_q * i_max).powi(2) + phi_pm * phi_pm).sqrt());
        let omega_e = p * omega;
        if omega <= omega_r {
            let i_q = tau / (1.5 * p * phi_pm);
            if i_q > i_max {
                return infeasible;
            }
            return OperatingPoint { omega, tau, i_d: 0.0, i_q, feasible: true };
        }
        let mut i_d_lim = ((v / omega_e).powi(2) - (l_d * i_max).powi(2) - phi_pm * phi_pm) / (2.0 * phi_pm * l_d);
        let i_q_lim_v = v / (omega_e * l_q);
        let i_q_t = tau / (1.5 * p * phi_pm);
        if i_d_lim <= -i_max {
            if i_q_t > i_q_lim_v || phi_pm / l_d - i_max >= 0.0 {
                return infeasible;
            }
            return OperatingPoint { omega, tau, i_d: -phi_pm / l_d, i_q: i_q_t, feasible: true };
        }
        i_d_lim = i_d_lim.signum() * i_d_lim.abs().min(i_max);
        let i_q_lim = if i_d_lim * l_d + phi_pm < 0.0 {
            i_d_lim = -phi_pm / l_d;
            let i_q_lim_c = (i_max * i_max - i_d_lim * i_d_lim).sqrt();
            i_q_lim_v.min(i_q_lim_c)
        } else {
            (i_max * i_max - i_d_lim * i_d_lim).sqrt()
        };
        if i_q_t > i_q_lim {
            return infeasible;
        }
        OperatingPoint { omega, tau, i_d: i_d_lim, i_q: i_q_t, feasible: true }
    }

    pub fn back_emf(&self, omega: f64, i_d: f64, i_q: f64) -> f64 {
        self.p * omega * ((self.l_d * i_q).powi(2) + (self.phi_pm + self.l_d * i_d).powi(2)).sqrt()
    }

    pub fn v_dq_max(&self) -> f64 {
        self.v_max / 3f64.sqrt() - self.resistance * self.i_max
    }
}

pub fn speed_torque_to_currents(omega: f64, tau: f64, d: &MotorDesign) -> Result<OperatingPoint, CoreError> {
    Ok(DriveParams::from_design(d)?.currents(omega, tau))
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Binary feasibility grid over `[0, ω̂] × [0, τ̂]`; `grid[iτ][iω]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperationMap {
    pub omegas: Vec<f64>,
    pub taus: Vec<f64>,
    pub grid: Vec<Vec<u8>>,
}

impl OperationMap {
    /// Largest feasible τ index in each ω column.
    pub fn boundary(&self) -> Vec<Option<usize>> {
        (0..self.omegas.len()).map(|iw| (0..self.taus.len()).rev().find(|&it| self.grid[it][iw] == 1)).collect()
    }
}

pub fn operation_map(d: &MotorDesign, n_omega: usize, n_tau: usize, omega_hat: f64, tau_hat: f64) -> Result<OperationMap, CoreError> {
    use rayon::prelude::*;
    let drive = DriveParams::from_design(d)?;
    let omegas = linspace(0.0, omega_hat, n_omega);
    let taus = linspace(0.0, tau_hat, n_tau);
    let grid = taus.par_iter().map(|&t| omegas.iter().map(|&w| drive.currents(w, t).feasible as u8).collect()).collect();
    Ok(OperationMap { omegas, taus, grid })
}

/// One evaluated design constraint. `margin ≥ 0` means satisfied.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignConstraint {
    pub id: String,
    pub margin: f64,
}

/// Absolute slack below which a closed boundary still counts as satisfied.
pub const DESIGN_TOL: f64 = 1e-12;

/// Strict inequalities `x > 0` are enforced as `x ≥ STRICT_EPS` in the NLP.
pub const STRICT_EPS: f64 = 1e-9;

/// Smooth design inequalities as `g(β) ≥ 0` (excluding the box), generic for the NLP.
/// Units: lengths mm, areas mm², masses kg, flux density T.
pub fn design_inequalities<S: Scalar>(d: &MotorDesign<S>) -> Vec<(&'static str, S)> {
    let c = MotorConstants::standard();
    let em = electromagnetics_unchecked(d);
    let r_gap = d.r_ro + c.delta;
    let clamp = |x: S| {
        let lim = 1.0 - 1e-12;
        if x.re() > lim {
            S::cst(lim)
        } else if x.re() < -lim {
            S::cst(-lim)
        } else {
            x
        }
    };
    let arc = clamp(d.w_tooth / (r_gap * 2.0)).asin() + clamp(d.b0 / (r_gap * 2.0)).asin();
    let mass = em.m_stator + em.m_rotor;
    let flux_tooth = em.phi1 * c.k_p() / (d.w_tooth * MM * d.l * MM);
    let flux_yoke = em.phi1 * c.k_p() / (d.h_sy * MM * d.l * MM * 3f64.sqrt());
    let mm2 = 1.0 / (MM * MM);
    vec![
        ("h_ss > 0", em.h_ss / MM),
        ("D_wire >= 0.6 mm", em.d_wire / MM - 0.6),
        ("k_C > 0", em.k_c),
        ("tooth arc > 0", arc),
        ("tooth arc <= pi/Q", -arc + PI / c.q_slots),
        ("motor mass > 0", mass),
        ("motor mass <= 3 kg", -mass + 3.0),
        ("stator mass > 0", em.m_stator),
        ("tooth flux > 0", flux_tooth),
        ("tooth flux <= 1.5 T", -flux_tooth + c.b_max),
        ("yoke flux > 0", flux_yoke),
        ("yoke flux <= 1.5 T", -flux_yoke + c.b_max),
        ("A_slot > 0", em.a_slot * mm2),
        ("A_so > 0", em.a_so * mm2),
    ]
}

/// Whether a `design_inequalities` entry is a strict inequality.
pub fn is_strict(id: &str) -> bool {
    id.contains("> 0")
}

/// Every design constraint with its signed margin.
pub fn design_margins(d: &MotorDesign) -> Vec<DesignConstraint> {
    let mut out = Vec::new();
    let c = MotorConstants::standard();
    for ((name, (lo, hi)), v) in BETA_NAMES.iter().zip(BETA_BOX.iter()).zip(d.beta().iter()) {
        out.push(DesignConstraint { id: format!("{name} in [{lo},{hi}]"), margin: (v - lo).min(hi - v) });
    }
    let r_gap = d.r_ro + c.delta;
    for arg in [d.w_tooth / (2.0 * r_gap), d.b0 / (2.0 * r_gap)] {
        if !(arg.abs() <= 1.0) {
            out.push(DesignConstraint { id: "arcsin domain".into(), margin: 1.0 - arg.abs() });
        }
    }
    for (id, g) in design_inequalities(d) {
        let margin = if g.is_nan() { f64::NEG_INFINITY } else { g };
        out.push(DesignConstraint { id: id.to_string(), margin });
    }
    out
}

/// Violated design constraints; empty iff the design is feasible.
pub fn design_feasibility(d: &MotorDesign) -> Vec<DesignConstraint> {
    design_margins(d).into_iter().filter(|c| if is_strict(&c.id) { c.margin <= 0.0 } else { c.margin < -DESIGN_TOL }).collect()
}
