//! Numerical tolerances used by constructors, the verifier, and the
//! acceptance suite. Each constant documents what it bounds; tests reference
//! these instead of re-typing literals so a tolerance lives in one place.

/// Unit-norm gate for quaternions entering public kinematics operations.
pub const QUAT_UNIT: f64 = 1e-9;

/// Scenario loading warns when normalizing the initial quaternion moves it
/// by more than this.
pub const QUAT_LOAD_WARN: f64 = 1e-6;

/// Scenario loading skips renormalization entirely below this deviation, so a
/// CSV state row written by the integrator reloads bit-identically.
pub const QUAT_LOAD_SKIP: f64 = 1e-12;

/// Max-norm bound on the right-hand side evaluated at the relative
/// equilibrium, any mode/flavor combination.
pub const EQUILIBRIUM_RESIDUAL: f64 = 1e-14;

/// Decay identity |Vdot + nu1*g1^2 + nu2*g2^2 + nu3*g3^2|, relative to
/// max(1, |Vdot|).
pub const DECAY_IDENTITY_REL: f64 = 1e-12;

/// Closed-loop rows vs open-loop rows with the feedback substituted,
/// relative to max(1, largest row magnitude).
pub const CONTROL_CONSISTENCY_REL: f64 = 1e-12;

/// Allowed per-step increase of the Lyapunov functional at dt <= 1e-3.
pub const V_STEP_SLACK: f64 = 1e-8;

/// Closed-loop run bound on |decay residual| relative to max(1, V(0)).
pub const RUN_DECAY_RESIDUAL: f64 = 1e-10;

/// Per-step pre-renormalization quaternion drift bound (consistent flavor).
pub const Q_STEP_DRIFT: f64 = 1e-10;

/// Absolute residual bound |1 + cos(x) cosh(x)| asserted for the first
/// characteristic root (well-conditioned only for low modes).
pub const CHAR_RESIDUAL_ABS: f64 = 1e-10;

/// Scaled residual |cos(x) + sech(x)| target for every characteristic root.
/// This is the same equation divided by cosh(x); its slope near a root is
/// O(1), so the bound is meaningful in f64 for every mode index.
pub const CHAR_RESIDUAL_SCALED: f64 = 1e-12;

/// Construction-time bound on the scaled characteristic residual.
pub const CHAR_RESIDUAL_BUILD: f64 = 1e-10;

/// Off-diagonal bound for the modal mass matrix (orthonormal basis).
pub const GRAM0_OFFDIAG: f64 = 1e-8;

/// Relative defect bound of the stiffness Gram diagonal vs beta_k^4.
pub const GRAM2_DIAG_REL: f64 = 1e-6;

/// Relative error bound for the finite-difference fundamental frequency
/// against the modal value at a 400-point grid.
pub const FD_FUNDAMENTAL_REL: f64 = 5e-3;
