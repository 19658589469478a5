//! Right-hand sides of the coupled carrier/boom equations of motion in modal
//! coordinates: the closed-loop system with boom-damping feedback folded in,
//! and the open-loop system driven by an external torque.
//!
//! All assemblies are pure functions of a [`FullState`] value; the flat
//! vector layout is (a1 | p1 | a2 | p2 | omega1..3 | q1..4), length 4N+7.

use nalgebra::{DVector, Vector3};

use crate::beam::{gamma_functionals, BeamBasis, ModalBeamState};
use crate::error::{Error, Result};
use crate::model::{
    frame_vectors_unchecked, quaternion_rate, Gains, PhysicalParams, Quat, RigidState, Torque,
};

/// Which system the integrator advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhsMode {
    /// Angular rows carry the boom-damping feedback; no external torque.
    ClosedLoop,
    /// External torque; beam forcing keeps terms up to second order in the
    /// deflections and rates.
    OpenLoopTruncated,
    /// External torque; beam forcing also keeps the quadratic centrifugal
    /// terms acting on the deflection itself.
    OpenLoopFull,
}

/// How the quaternion rows couple the orbital rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KinematicsFlavor {
    /// The orbital rate is mapped through the current attitude before it
    /// enters the kinematics. Exactly tangent: <q, qdot> = 0 at every state.
    #[default]
    Consistent,
    /// The orbital rate enters the roll-axis slots with a fixed sign pattern
    /// instead of being attitude-mapped. Still skew (norm-preserving) and
    /// shares the same equilibrium, but agrees with `Consistent` only near
    /// zero roll/pitch error. Kept selectable for comparison runs.
    Legacy,
}

/// Which quadratic beam terms the open-loop assembly retains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamModel {
    Truncated,
    Full,
}

// ---------------------------------------------------------------------------
// State container
// ---------------------------------------------------------------------------

/// Complete simulation state: modal boom coordinates plus carrier rate and
/// attitude.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub beam: ModalBeamState,
    pub rigid: RigidState,
}

impl FullState {
    /// Flat-vector length for a given mode count.
    pub fn dim(n_modes: usize) -> usize {
        4 * n_modes + 7
    }

    pub fn n_modes(&self) -> usize {
        self.beam.n_modes()
    }

    pub fn is_finite(&self) -> bool {
        self.beam.is_finite()
            && self.rigid.omega.iter().all(|v| v.is_finite())
            && self.rigid.q.is_finite()
    }

    /// Canonical flat ordering (a1 | p1 | a2 | p2 | omega | q).
    pub fn to_flat(&self) -> DVector<f64> {
        let n = self.n_modes();
        let mut flat = DVector::zeros(Self::dim(n));
        flat.rows_mut(0, n).copy_from(&self.beam.a1);
        flat.rows_mut(n, n).copy_from(&self.beam.p1);
        flat.rows_mut(2 * n, n).copy_from(&self.beam.a2);
        flat.rows_mut(3 * n, n).copy_from(&self.beam.p2);
        let r = 4 * n;
        flat[r] = self.rigid.omega.x;
        flat[r + 1] = self.rigid.omega.y;
        flat[r + 2] = self.rigid.omega.z;
        flat[r + 3] = self.rigid.q.v.x;
        flat[r + 4] = self.rigid.q.v.y;
        flat[r + 5] = self.rigid.q.v.z;
        flat[r + 6] = self.rigid.q.s;
        flat
    }

    /// Inverse of [`to_flat`](Self::to_flat). The quaternion block is taken
    /// as stored; callers that require unit norm must check it themselves.
    pub fn from_flat(n_modes: usize, flat: &DVector<f64>) -> Result<Self> {
        if flat.len() != Self::dim(n_modes) {
            return Err(Error::InvalidState(format!(
                "flat state has length {}, expected {} for {} modes",
                flat.len(),
                Self::dim(n_modes),
                n_modes
            )));
        }
        let n = n_modes;
        let r = 4 * n;
        Ok(FullState {
            beam: ModalBeamState {
                a1: flat.rows(0, n).clone_owned(),
                p1: flat.rows(n, n).clone_owned(),
                a2: flat.rows(2 * n, n).clone_owned(),
                p2: flat.rows(3 * n, n).clone_owned(),
            },
            rigid: RigidState {
                omega: Vector3::new(flat[r], flat[r + 1], flat[r + 2]),
                q: Quat::new(flat[r + 3], flat[r + 4], flat[r + 5], flat[r + 6]),
            },
        })
    }
}

/// The rigid circular-orbit rest state: boom undeformed, omega = (-omega0, 0, 0),
/// identity attitude. Every right-hand side vanishes here exactly.
pub fn equilibrium_state(params: &PhysicalParams, basis: &BeamBasis) -> FullState {
    FullState {
        beam: ModalBeamState::zeros(basis.n_modes),
        rigid: RigidState {
            omega: Vector3::new(-params.omega0, 0.0, 0.0),
            q: Quat::identity(),
        },
    }
}

// ---------------------------------------------------------------------------
// Right-hand sides
// ---------------------------------------------------------------------------

pub(crate) fn check_state(state: &FullState, basis: &BeamBasis) -> Result<()> {
    if state.n_modes() != basis.n_modes {
        return Err(Error::InvalidState(format!(
            "state has {} modes, basis {}",
            state.n_modes(),
            basis.n_modes
        )));
    }
    if !state.is_finite() {
        return Err(Error::InvalidState("state has non-finite entries".into()));
    }
    Ok(())
}

fn quaternion_rows(
    omega: &Vector3<f64>,
    q: &Quat,
    omega0: f64,
    flavor: KinematicsFlavor,
) -> (Vector3<f64>, f64) {
    match flavor {
        KinematicsFlavor::Consistent => {
            let (i, _, _) = frame_vectors_unchecked(q);
            let omega_r = omega + omega0 * i;
            quaternion_rate(q, &omega_r)
        }
        KinematicsFlavor::Legacy => {
            let (w1, w2, w3) = (omega.x, omega.y, omega.z);
            let (q1, q2, q3, q4) = (q.v.x, q.v.y, q.v.z, q.s);
            let wp = w1 + omega0;
            let wm = w1 - omega0;
            (
                Vector3::new(
                    0.5 * (w3 * q2 - w2 * q3 + wp * q4),
                    0.5 * (wm * q3 - w3 * q1 + w2 * q4),
                    0.5 * (w2 * q1 - wm * q2 + w3 * q4),
                ),
                -0.5 * (q1 * wp + q2 * w2 + q3 * w3),
            )
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn pack(
    n: usize,
    a1dot: &DVector<f64>,
    p1dot: &DVector<f64>,
    a2dot: &DVector<f64>,
    p2dot: &DVector<f64>,
    omega_dot: &Vector3<f64>,
    qdot: &Vector3<f64>,
    q4dot: f64,
) -> DVector<f64> {
    let mut flat = DVector::zeros(FullState::dim(n));
    flat.rows_mut(0, n).copy_from(a1dot);
    flat.rows_mut(n, n).copy_from(p1dot);
    flat.rows_mut(2 * n, n).copy_from(a2dot);
    flat.rows_mut(3 * n, n).copy_from(p2dot);
    let r = 4 * n;
    flat[r] = omega_dot.x;
    flat[r + 1] = omega_dot.y;
    flat[r + 2] = omega_dot.z;
    flat[r + 3] = qdot.x;
    flat[r + 4] = qdot.y;
    flat[r + 5] = qdot.z;
    flat[r + 6] = q4dot;
    flat
}

/// Closed-loop derivative: stiffness and Coriolis coupling on the beam, the
/// feedback functionals on both beam and angular rows, quaternion rows per
/// flavor. Length 4N+7.
pub fn closed_loop_rhs(
    state: &FullState,
    params: &PhysicalParams,
    gains: &Gains,
    basis: &BeamBasis,
    flavor: KinematicsFlavor,
) -> Result<DVector<f64>> {
    check_state(state, basis)?;
    let n = basis.n_modes;
    let beam = &state.beam;
    let g = gamma_functionals(beam, basis);
    let c = params.stiffness_ratio();
    let w3 = state.rigid.omega.z;

    let p1dot = -c * (&basis.gram2 * &beam.a1) + (2.0 * w3) * &beam.p2
        + (gains.nu2 * g.gamma2) * &basis.b
        - (gains.nu3 * g.gamma3) * &beam.a2;
    let p2dot = -c * (&basis.gram2 * &beam.a2) - (2.0 * w3) * &beam.p1
        - (gains.nu1 * g.gamma1) * &basis.b
        + (gains.nu3 * g.gamma3) * &beam.a1;

    let w = &state.rigid.omega;
    let omega_dot = Vector3::new(
        w.y * w.z - gains.nu1 * g.gamma1,
        -w.x * w.z - gains.nu2 * g.gamma2,
        -gains.nu3 * g.gamma3,
    );
    let (qdot, q4dot) = quaternion_rows(w, &state.rigid.q, params.omega0, flavor);
    Ok(pack(n, &beam.p1, &p1dot, &beam.p2, &p2dot, &omega_dot, &qdot, q4dot))
}

/// Open-loop derivative under an external torque. Angular rows carry the
/// gyroscopic, gravity-gradient, and torque terms; the angular accelerations
/// are then substituted into the beam forcing, so no implicit system is
/// solved. `BeamModel::Full` additionally keeps the centrifugal terms acting
/// on the deflection itself.
pub fn open_loop_rhs(
    state: &FullState,
    torque: &Torque,
    params: &PhysicalParams,
    basis: &BeamBasis,
    model: BeamModel,
    flavor: KinematicsFlavor,
) -> Result<DVector<f64>> {
    check_state(state, basis)?;
    if !torque.components.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidState("torque has non-finite entries".into()));
    }
    let n = basis.n_modes;
    let beam = &state.beam;
    let c = params.stiffness_ratio();
    let w = &state.rigid.omega;
    let (w1, w2, w3) = (w.x, w.y, w.z);
    let q = &state.rigid.q;
    let (q1, q2, q3, q4) = (q.v.x, q.v.y, q.v.z, q.s);
    let (i1, i2, i3) = (params.i1, params.i2, params.i3);
    let w0sq = params.omega0 * params.omega0;
    let u = &torque.components;

    // Angular accelerations with the gravity gradient written in attitude
    // components (the normalization q4^2 = 1 - |q|^2 is already folded in).
    let roll_yaw = q1 * q4 + q2 * q3;
    let pitch_yaw = q1 * q3 - q2 * q4;
    let tilt = 2.0 * q1 * q1 + 2.0 * q2 * q2 - 1.0;
    let wdot1 = (i2 - i3) / i1 * (w2 * w3) + 6.0 * w0sq * (i2 - i3) / i1 * roll_yaw * tilt + u.x / i1;
    let wdot2 =
        (i3 - i1) / i2 * (w1 * w3) + 6.0 * w0sq * (i3 - i1) / i2 * pitch_yaw * tilt + u.y / i2;
    let wdot3 = (i1 - i2) / i3 * (w1 * w2)
        + 12.0 * w0sq * (i1 - i2) / i3 * roll_yaw * (q2 * q4 - q1 * q3)
        + u.z / i3;

    let mut p1dot = -c * (&basis.gram2 * &beam.a1) + wdot3 * &beam.a2
        - (wdot2 + w1 * w3) * &basis.b
        + (2.0 * w3) * &beam.p2;
    let mut p2dot = -c * (&basis.gram2 * &beam.a2) - wdot3 * &beam.a1
        + (wdot1 - w2 * w3) * &basis.b
        - (2.0 * w3) * &beam.p1;
    if model == BeamModel::Full {
        p1dot += (w2 * w2 + w3 * w3) * &beam.a1 - (w1 * w2) * &beam.a2;
        p2dot += (w1 * w1 + w3 * w3) * &beam.a2 - (w1 * w2) * &beam.a1;
    }

    let omega_dot = Vector3::new(wdot1, wdot2, wdot3);
    let (qdot, q4dot) = quaternion_rows(w, q, params.omega0, flavor);
    Ok(pack(n, &beam.p1, &p1dot, &beam.p2, &p2dot, &omega_dot, &qdot, q4dot))
}

/// Dispatch used by the integrator: closed loop ignores `external`; the open
/// modes apply it.
pub fn rhs_for_mode(
    state: &FullState,
    mode: RhsMode,
    flavor: KinematicsFlavor,
    params: &PhysicalParams,
    gains: &Gains,
    basis: &BeamBasis,
    external: &Torque,
) -> Result<DVector<f64>> {
    match mode {
        RhsMode::ClosedLoop => closed_loop_rhs(state, params, gains, basis, flavor),
        RhsMode::OpenLoopTruncated => {
            open_loop_rhs(state, external, params, basis, BeamModel::Truncated, flavor)
        }
        RhsMode::OpenLoopFull => {
            open_loop_rhs(state, external, params, basis, BeamModel::Full, flavor)
        }
    }
}

/// Rate of change of the boom energy along a derivative vector:
/// p1 . p1dot + p2 . p2dot + (EI/rhoA)(a1' G2 a1dot + a2' G2 a2dot).
/// Evaluated from the assembled derivative, never by differencing energies,
/// so it isolates the algebra of the semi-discretization from time stepping.
pub fn energy_rate_along(
    state: &FullState,
    deriv: &DVector<f64>,
    params: &PhysicalParams,
    basis: &BeamBasis,
) -> f64 {
    let n = state.n_modes();
    assert_eq!(deriv.len(), FullState::dim(n), "derivative length must match state");
    let da1 = deriv.rows(0, n).clone_owned();
    let dp1 = deriv.rows(n, n).clone_owned();
    let da2 = deriv.rows(2 * n, n).clone_owned();
    let dp2 = deriv.rows(3 * n, n).clone_owned();
    let c = params.stiffness_ratio();
    state.beam.p1.dot(&dp1)
        + state.beam.p2.dot(&dp2)
        + c * ((&basis.gram2 * &state.beam.a1).dot(&da1)
            + (&basis.gram2 * &state.beam.a2).dot(&da2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{beam_energy, y_functional};
    use crate::model::TorqueSource;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn basis_and_params() -> (PhysicalParams, BeamBasis) {
        let params = PhysicalParams::default();
        let basis = BeamBasis::build(&params, 4, 1001).unwrap();
        (params, basis)
    }

    fn zero_torque() -> Torque {
        Torque { components: Vector3::zeros(), source: TorqueSource::Control }
    }

    fn random_unit_quat(rng: &mut ChaCha8Rng) -> Quat {
        loop {
            let q = Quat::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if q.norm() > 0.1 {
                return q.normalized();
            }
        }
    }

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> FullState {
        let mut vec = |amp: f64| DVector::from_fn(n, |_, _| rng.gen_range(-amp..amp));
        FullState {
            beam: ModalBeamState {
                a1: vec(0.02),
                p1: vec(0.02),
                a2: vec(0.02),
                p2: vec(0.02),
            },
            rigid: RigidState {
                omega: Vector3::new(
                    rng.gen_range(-0.05..0.05),
                    rng.gen_range(-0.05..0.05),
                    rng.gen_range(-0.05..0.05),
                ),
                q: random_unit_quat(rng),
            },
        }
    }

    #[test]
    fn flat_round_trip_preserves_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let state = random_state(4, &mut rng);
        let flat = state.to_flat();
        assert_eq!(flat.len(), 23);
        assert_eq!(flat[0], state.beam.a1[0]);
        assert_eq!(flat[4], state.beam.p1[0]);
        assert_eq!(flat[8], state.beam.a2[0]);
        assert_eq!(flat[12], state.beam.p2[0]);
        assert_eq!(flat[16], state.rigid.omega.x);
        assert_eq!(flat[19], state.rigid.q.v.x);
        assert_eq!(flat[22], state.rigid.q.s);
        let back = FullState::from_flat(4, &flat).unwrap();
        assert_eq!(back, state);
    }

    #[test]
    fn from_flat_rejects_wrong_length() {
        let flat = DVector::zeros(22);
        assert!(matches!(FullState::from_flat(4, &flat), Err(Error::InvalidState(_))));
    }

    #[test]
    fn equilibrium_zeroes_every_rhs_combination() {
        let (params, basis) = basis_and_params();
        let gains = Gains::default();
        let eq = equilibrium_state(&params, &basis);
        assert_eq!(beam_energy(&eq.beam, &params, &basis), 0.0);
        assert_eq!(y_functional(&eq.beam, &basis), 0.0);
        let u = zero_torque();
        for flavor in [KinematicsFlavor::Consistent, KinematicsFlavor::Legacy] {
            let mut rows = vec![closed_loop_rhs(&eq, &params, &gains, &basis, flavor).unwrap()];
            for model in [BeamModel::Truncated, BeamModel::Full] {
                rows.push(open_loop_rhs(&eq, &u, &params, &basis, model, flavor).unwrap());
            }
            for rhs in rows {
                let worst = rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                assert!(worst < 1e-14, "flavor {flavor:?}: residual {worst:.3e}");
            }
        }
    }

    #[test]
    fn quiet_boom_stays_quiet_under_pure_roll() {
        let (params, basis) = basis_and_params();
        let gains = Gains::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let state = FullState {
                beam: ModalBeamState::zeros(4),
                rigid: RigidState {
                    omega: Vector3::new(-params.omega0, 0.0, 0.0),
                    q: random_unit_quat(&mut rng),
                },
            };
            let rhs =
                closed_loop_rhs(&state, &params, &gains, &basis, KinematicsFlavor::Consistent)
                    .unwrap();
            for idx in 0..19 {
                assert_eq!(rhs[idx], 0.0, "row {idx} should vanish");
            }
        }
    }

    #[test]
    fn consistent_rows_stay_tangent_to_the_sphere() {
        let (params, basis) = basis_and_params();
        let gains = Gains::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let state = random_state(4, &mut rng);
            let rhs =
                closed_loop_rhs(&state, &params, &gains, &basis, KinematicsFlavor::Consistent)
                    .unwrap();
            let q = &state.rigid.q;
            let dot = q.v.x * rhs[19] + q.v.y * rhs[20] + q.v.z * rhs[21] + q.s * rhs[22];
            assert!(dot.abs() < 1e-14, "tangency residual {dot:.3e}");
        }
    }

    #[test]
    fn legacy_rows_are_skew_hence_tangent_too() {
        let (params, basis) = basis_and_params();
        let u = zero_torque();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let state = random_state(4, &mut rng);
            let rhs = open_loop_rhs(
                &state,
                &u,
                &params,
                &basis,
                BeamModel::Truncated,
                KinematicsFlavor::Legacy,
            )
            .unwrap();
            let q = &state.rigid.q;
            let dot = q.v.x * rhs[19] + q.v.y * rhs[20] + q.v.z * rhs[21] + q.s * rhs[22];
            assert!(dot.abs() < 1e-14, "tangency residual {dot:.3e}");
        }
    }

    #[test]
    fn flavors_coincide_without_orbital_rate() {
        let params = PhysicalParams { omega0: 0.0, ..Default::default() };
        let basis = BeamBasis::build(&params, 4, 1001).unwrap();
        let gains = Gains::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let state = random_state(4, &mut rng);
            let a = closed_loop_rhs(&state, &params, &gains, &basis, KinematicsFlavor::Consistent)
                .unwrap();
            let b =
                closed_loop_rhs(&state, &params, &gains, &basis, KinematicsFlavor::Legacy).unwrap();
            let diff = (&a - &b).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            assert!(diff < 1e-15, "flavor mismatch {diff:.3e}");
        }
    }

    #[test]
    fn full_minus_truncated_scales_quadratically_in_rate() {
        let (params, basis) = basis_and_params();
        let u = zero_torque();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = random_state(4, &mut rng);
        let dir = Vector3::new(0.7, -0.4, 0.5);
        let diff_at = |eps: f64| {
            let mut s = base.clone();
            s.rigid.omega = eps * dir;
            let full =
                open_loop_rhs(&s, &u, &params, &basis, BeamModel::Full, KinematicsFlavor::Consistent)
                    .unwrap();
            let trunc = open_loop_rhs(
                &s,
                &u,
                &params,
                &basis,
                BeamModel::Truncated,
                KinematicsFlavor::Consistent,
            )
            .unwrap();
            (&full - &trunc).iter().fold(0.0_f64, |m, v| m.max(v.abs()))
        };
        let d1 = diff_at(0.08);
        let d2 = diff_at(0.04);
        assert!(d1 > 0.0);
        let ratio = d1 / d2;
        assert!((3.9..4.1).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn closed_loop_energy_rate_is_negative_semidefinite_sum() {
        let (params, basis) = basis_and_params();
        let gains = Gains { nu1: 0.8, nu2: 0.6, nu3: 1.1 };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let state = random_state(4, &mut rng);
            let rhs = closed_loop_rhs(&state, &params, &gains, &basis, KinematicsFlavor::Consistent)
                .unwrap();
            let vdot = energy_rate_along(&state, &rhs, &params, &basis);
            let g = gamma_functionals(&state.beam, &basis);
            let dissipation = gains.nu1 * g.gamma1 * g.gamma1
                + gains.nu2 * g.gamma2 * g.gamma2
                + gains.nu3 * g.gamma3 * g.gamma3;
            let residual = (vdot + dissipation).abs();
            assert!(
                residual < 1e-12 * vdot.abs().max(1.0),
                "decay residual {residual:.3e} at vdot {vdot:.3e}"
            );
            assert!(vdot <= 0.0 || vdot < 1e-15);
        }
    }

    #[test]
    fn rejects_non_finite_state_and_torque() {
        let (params, basis) = basis_and_params();
        let gains = Gains::default();
        let mut state = equilibrium_state(&params, &basis);
        state.beam.a1[0] = f64::NAN;
        assert!(closed_loop_rhs(&state, &params, &gains, &basis, KinematicsFlavor::Consistent)
            .is_err());
        let good = equilibrium_state(&params, &basis);
        let bad_torque =
            Torque { components: Vector3::new(f64::INFINITY, 0.0, 0.0), source: TorqueSource::Control };
        assert!(open_loop_rhs(
            &good,
            &bad_torque,
            &params,
            &basis,
            BeamModel::Truncated,
            KinematicsFlavor::Consistent
        )
        .is_err());
    }

    #[test]
    fn dispatcher_routes_to_matching_assembly() {
        let (params, basis) = basis_and_params();
        let gains = Gains::default();
        let u = zero_torque();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let state = random_state(4, &mut rng);
        let f = KinematicsFlavor::Consistent;
        let direct = closed_loop_rhs(&state, &params, &gains, &basis, f).unwrap();
        let routed =
            rhs_for_mode(&state, RhsMode::ClosedLoop, f, &params, &gains, &basis, &u).unwrap();
        assert_eq!(direct, routed);
        let direct =
            open_loop_rhs(&state, &u, &params, &basis, BeamModel::Full, f).unwrap();
        let routed =
            rhs_for_mode(&state, RhsMode::OpenLoopFull, f, &params, &gains, &basis, &u).unwrap();
        assert_eq!(direct, routed);
    }
}
