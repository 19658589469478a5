//! Rigid-carrier model: physical parameters, attitude state, orbital-frame
//! kinematics, and the gravity-gradient torque.
//!
//! Conventions: the attitude quaternion q = (q1, q2, q3, q4) has scalar part
//! q4 and maps the orbital frame (x toward flight, z toward the Earth-away
//! radial) onto the body frame. `omega` is the absolute body angular rate in
//! body axes; the orbital frame itself rotates at -omega0 about its x axis.

use nalgebra::Vector3;

use crate::beam::BeamBasis;
use crate::dynamics::FullState;
use crate::error::{Error, Result};
use crate::tol;

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Geometry, stiffness, and inertia of the carrier-plus-boom assembly.
///
/// `EI` and `rhoA` are the composite bending stiffness (N m^2) and linear
/// density (kg/m). The optional constituent fields let a scenario state the
/// factors separately; when a full pair is present it must reproduce the
/// composite value.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    /// Boom length (m).
    pub ell: f64,
    /// Offset of the boom root from the carrier mass center (m).
    pub ell0: f64,
    /// Bending stiffness EI (N m^2).
    pub ei: f64,
    /// Linear mass density rho*A (kg/m).
    pub rho_a: f64,
    /// Principal moments of inertia of the carrier (kg m^2).
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    /// Orbital mean motion (rad/s).
    pub omega0: f64,
    /// Weight of the quaternion block in the state-space norm
    /// (diagnostics only; never enters the dynamics).
    pub kappa: f64,
    /// Optional constituent factors: Young's modulus (Pa), area moment
    /// (m^4), cross-section area (m^2), volumetric density (kg/m^3).
    pub e_modulus: Option<f64>,
    pub i_cs: Option<f64>,
    pub a_cs: Option<f64>,
    pub rho: Option<f64>,
}

impl Default for PhysicalParams {
    /// Desk-scale defaults: a 2 m boom on a small carrier in a near-circular
    /// low orbit (omega0 = 1.13e-3 rad/s).
    fn default() -> Self {
        PhysicalParams {
            ell: 2.0,
            ell0: 0.5,
            ei: 40.0,
            rho_a: 1.2,
            i1: 8.0,
            i2: 10.0,
            i3: 6.0,
            omega0: 1.13e-3,
            kappa: 1.0,
            e_modulus: None,
            i_cs: None,
            a_cs: None,
            rho: None,
        }
    }
}

impl PhysicalParams {
    /// Stiffness-to-density ratio EI/(rho A) driving the beam dynamics.
    pub fn stiffness_ratio(&self) -> f64 {
        self.ei / self.rho_a
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ell", self.ell),
            ("EI", self.ei),
            ("rhoA", self.rho_a),
            ("I1", self.i1),
            ("I2", self.i2),
            ("I3", self.i3),
            ("kappa", self.kappa),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        for (name, v) in [("ell0", self.ell0), ("omega0", self.omega0)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        // Any physical rigid body satisfies the triangle inequalities.
        let tri = [
            ("I1 + I2 >= I3", self.i1 + self.i2 - self.i3),
            ("I2 + I3 >= I1", self.i2 + self.i3 - self.i1),
            ("I3 + I1 >= I2", self.i3 + self.i1 - self.i2),
        ];
        for (name, v) in tri {
            if v < 0.0 {
                return Err(Error::Config(format!("inertia triangle inequality violated: {name}")));
            }
        }
        if let (Some(e), Some(ics)) = (self.e_modulus, self.i_cs) {
            let composite = e * ics;
            if (composite - self.ei).abs() > 1e-9 * self.ei.abs().max(1.0) {
                return Err(Error::Config(format!(
                    "EI = {} inconsistent with E * I_cs = {composite}",
                    self.ei
                )));
            }
        }
        if let (Some(rho), Some(acs)) = (self.rho, self.a_cs) {
            let composite = rho * acs;
            if (composite - self.rho_a).abs() > 1e-9 * self.rho_a.abs().max(1.0) {
                return Err(Error::Config(format!(
                    "rhoA = {} inconsistent with rho * A_cs = {composite}",
                    self.rho_a
                )));
            }
        }
        Ok(())
    }
}

/// Feedback gains nu1, nu2, nu3 of the boom-damping control law. Units make
/// nu_i * gamma_i an angular acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains {
    pub nu1: f64,
    pub nu2: f64,
    pub nu3: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Gains { nu1: 0.5, nu2: 0.5, nu3: 0.5 }
    }
}

impl Gains {
    /// Validated construction: all gains strictly positive. (Diagnostic runs
    /// with zero gains build the struct literally; scenarios go through here.)
    pub fn new(nu1: f64, nu2: f64, nu3: f64) -> Result<Self> {
        for (name, v) in [("nu1", nu1), ("nu2", nu2), ("nu3", nu3)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(Gains { nu1, nu2, nu3 })
    }
}

// ---------------------------------------------------------------------------
// Attitude state
// ---------------------------------------------------------------------------

/// Attitude quaternion with vector part `v` = (q1, q2, q3) and scalar `s` = q4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub v: Vector3<f64>,
    pub s: f64,
}

impl Quat {
    pub fn new(q1: f64, q2: f64, q3: f64, q4: f64) -> Self {
        Quat { v: Vector3::new(q1, q2, q3), s: q4 }
    }

    pub fn identity() -> Self {
        Quat::new(0.0, 0.0, 0.0, 1.0)
    }

    /// Rotation by `angle` about a unit `axis` (body relative to orbital).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let half = 0.5 * angle;
        Quat { v: axis * half.sin(), s: half.cos() }
    }

    pub fn norm(&self) -> f64 {
        (self.v.norm_squared() + self.s * self.s).sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Quat { v: self.v / n, s: self.s / n }
    }

    /// 4-component dot product.
    pub fn dot(&self, other: &Quat) -> f64 {
        self.v.dot(&other.v) + self.s * other.s
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().all(|c| c.is_finite()) && self.s.is_finite()
    }

    pub(crate) fn check_unit(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::InvalidState("quaternion has non-finite components".into()));
        }
        let defect = (self.norm() - 1.0).abs();
        if defect > tol::QUAT_UNIT {
            return Err(Error::InvalidState(format!(
                "quaternion norm deviates from 1 by {defect:.3e} (tolerance {:.1e})",
                tol::QUAT_UNIT
            )));
        }
        Ok(())
    }
}

/// Carrier angular rate (body axes, rad/s) and attitude quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidState {
    pub omega: Vector3<f64>,
    pub q: Quat,
}

impl RigidState {
    /// Validated construction: finite rate, unit quaternion.
    pub fn new(omega: Vector3<f64>, q: Quat) -> Result<Self> {
        if !omega.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidState("angular rate has non-finite components".into()));
        }
        q.check_unit()?;
        Ok(RigidState { omega, q })
    }
}

/// Orbital-frame unit vectors expressed in body axes, plus the body rate
/// relative to the orbital frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicsAux {
    pub i: Vector3<f64>,
    pub j: Vector3<f64>,
    pub k: Vector3<f64>,
    pub omega_r: Vector3<f64>,
}

impl KinematicsAux {
    pub fn compute(rigid: &RigidState, omega0: f64) -> Result<Self> {
        rigid.q.check_unit()?;
        let (i, j, k) = frame_vectors_unchecked(&rigid.q);
        let omega_r = rigid.omega + omega0 * i;
        Ok(KinematicsAux { i, j, k, omega_r })
    }
}

/// A torque vector in body axes with its origin labelled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TorqueSource {
    Control,
    Gravity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Torque {
    pub components: Vector3<f64>,
    pub source: TorqueSource,
}

// ---------------------------------------------------------------------------
// Kinematics
// ---------------------------------------------------------------------------

pub(crate) fn frame_vectors_unchecked(q: &Quat) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let (q1, q2, q3, q4) = (q.v.x, q.v.y, q.v.z, q.s);
    let i = Vector3::new(
        q1 * q1 - q2 * q2 - q3 * q3 + q4 * q4,
        2.0 * (q1 * q2 - q3 * q4),
        2.0 * (q1 * q3 + q2 * q4),
    );
    let j = Vector3::new(
        2.0 * (q1 * q2 + q3 * q4),
        q4 * q4 - q1 * q1 + q2 * q2 - q3 * q3,
        2.0 * (q2 * q3 - q1 * q4),
    );
    let k = Vector3::new(
        2.0 * (q1 * q3 - q2 * q4),
        2.0 * (q2 * q3 + q1 * q4),
        q3 * q3 + q4 * q4 - q1 * q1 - q2 * q2,
    );
    (i, j, k)
}

/// Orbital-frame unit vectors in body axes. Columns of the orbital-to-body
/// rotation: at identity attitude they are the body axes themselves.
pub fn frame_vectors(q: &Quat) -> Result<(Vector3<f64>, Vector3<f64>, Vector3<f64>)> {
    q.check_unit()?;
    Ok(frame_vectors_unchecked(q))
}

/// Body rate relative to the orbital frame: omega + omega0 * i(q).
pub fn relative_rate(omega: &Vector3<f64>, q: &Quat, omega0: f64) -> Result<Vector3<f64>> {
    q.check_unit()?;
    let (i, _, _) = frame_vectors_unchecked(q);
    Ok(omega + omega0 * i)
}

/// Quaternion kinematics driven by the relative rate:
/// qdot = (q4 * w + q x w) / 2, q4dot = -<q, w> / 2.
/// Returns (vector-part rate, scalar rate).
pub fn quaternion_rate(q: &Quat, omega_r: &Vector3<f64>) -> (Vector3<f64>, f64) {
    let vdot = 0.5 * (q.s * omega_r + q.v.cross(omega_r));
    let sdot = -0.5 * q.v.dot(omega_r);
    (vdot, sdot)
}

// ---------------------------------------------------------------------------
// Gravity-gradient torque
// ---------------------------------------------------------------------------

pub(crate) fn gravity_torque_unchecked(params: &PhysicalParams, q: &Quat) -> Vector3<f64> {
    let (_, _, k) = frame_vectors_unchecked(q);
    let ik = Vector3::new(params.i1 * k.x, params.i2 * k.y, params.i3 * k.z);
    3.0 * params.omega0 * params.omega0 * k.cross(&ik)
}

/// Gravity-gradient torque 3*omega0^2 * k x (I k) on the carrier, body axes.
pub fn gravity_torque(params: &PhysicalParams, q: &Quat) -> Result<Torque> {
    q.check_unit()?;
    Ok(Torque { components: gravity_torque_unchecked(params, q), source: TorqueSource::Gravity })
}

// ---------------------------------------------------------------------------
// State-space norm
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn x_norm_sq_parts(
    a1: &nalgebra::DVector<f64>,
    p1: &nalgebra::DVector<f64>,
    a2: &nalgebra::DVector<f64>,
    p2: &nalgebra::DVector<f64>,
    omega: &Vector3<f64>,
    q: [f64; 4],
    params: &PhysicalParams,
    basis: &BeamBasis,
) -> f64 {
    let g0 = &basis.gram0;
    let g2 = &basis.gram2;
    let velocity = (g0 * p1).dot(p1) + (g0 * p2).dot(p2);
    let curvature = (g2 * a1).dot(a1) + (g2 * a2).dot(a2);
    let rigid = params.i1 * omega.x * omega.x
        + params.i2 * omega.y * omega.y
        + params.i3 * omega.z * omega.z;
    let quat = q.iter().map(|c| c * c).sum::<f64>();
    params.rho_a * velocity + params.ei * curvature + rigid + params.kappa * quat
}

/// Norm of a state in the energy-weighted state space: rhoA-weighted modal
/// velocity, EI-weighted curvature, inertia-weighted rate, kappa-weighted
/// quaternion block.
pub fn norm_x(state: &FullState, params: &PhysicalParams, basis: &BeamBasis) -> f64 {
    assert_eq!(state.beam.n_modes(), basis.n_modes, "state/basis mode counts must match");
    let q = &state.rigid.q;
    x_norm_sq_parts(
        &state.beam.a1,
        &state.beam.p1,
        &state.beam.a2,
        &state.beam.p2,
        &state.rigid.omega,
        [q.v.x, q.v.y, q.v.z, q.s],
        params,
        basis,
    )
    .sqrt()
}

/// Distance between two states in the same norm (componentwise difference;
/// the quaternion block is differenced as a plain 4-vector).
pub fn dist_x(
    state: &FullState,
    reference: &FullState,
    params: &PhysicalParams,
    basis: &BeamBasis,
) -> f64 {
    assert_eq!(state.beam.n_modes(), basis.n_modes, "state/basis mode counts must match");
    assert_eq!(reference.beam.n_modes(), basis.n_modes, "reference/basis mode counts must match");
    let (qa, qb) = (&state.rigid.q, &reference.rigid.q);
    x_norm_sq_parts(
        &(&state.beam.a1 - &reference.beam.a1),
        &(&state.beam.p1 - &reference.beam.p1),
        &(&state.beam.a2 - &reference.beam.a2),
        &(&state.beam.p2 - &reference.beam.p2),
        &(state.rigid.omega - reference.rigid.omega),
        [qa.v.x - qb.v.x, qa.v.y - qb.v.y, qa.v.z - qb.v.z, qa.s - qb.s],
        params,
        basis,
    )
    .sqrt()
}
