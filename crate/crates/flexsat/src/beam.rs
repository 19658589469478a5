//! Clamped-free boom basis: characteristic roots, orthonormal mode shapes,
//! Gram matrices, modal functionals, and an independent finite-difference
//! frequency oracle.
//!
//! The boom is an Euler-Bernoulli cantilever of length `ell`, clamped at the
//! carrier (deflection and slope zero) and free at the tip (curvature and
//! shear zero). Deflections in the two transverse body planes are expanded in
//! the same scalar mode family.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::model::PhysicalParams;
use crate::quad::QuadratureRule;
use crate::tol;

/// Scaled characteristic function cos(x) + sech(x).
///
/// Roots coincide with those of 1 + cos(x) cosh(x); dividing by cosh keeps
/// the slope O(1) near every root, so residuals are meaningful in f64 for
/// high modes where the unscaled form jumps by ulps times cosh(x).
pub fn characteristic_scaled(x: f64) -> f64 {
    x.cos() + 1.0 / x.cosh()
}

/// Unscaled characteristic function 1 + cos(x) cosh(x).
pub fn characteristic(x: f64) -> f64 {
    1.0 + x.cos() * x.cosh()
}

/// Dimensionless roots x_k = beta_k * ell of the clamped-free characteristic
/// equation, ascending. Bisection with a 200-iteration cap on brackets that
/// isolate one root each: the roots pair up inside intervals where cos < 0,
/// one just above each x = (4m+1)pi/2 descent of cos through zero and one
/// just below each (4m+3)pi/2 ascent, so odd k is bracketed on
/// [(2k-1)pi/2 - 0.01, k pi] and even k on [(k-1)pi, (2k-1)pi/2 + 0.01].
pub fn solve_characteristic_roots(n_modes: usize) -> Result<Vec<f64>> {
    if n_modes < 1 {
        return Err(Error::Config("mode count must be at least 1".into()));
    }
    let mut roots = Vec::with_capacity(n_modes);
    for k in 1..=n_modes {
        let half_odd = (2 * k - 1) as f64 * FRAC_PI_2;
        // The 0.01 pull-in keeps the endpoint sign certain: the root sits
        // within ~2 exp(-x) < 0.01 of the asymptote for k >= 3, while at the
        // shifted endpoint cos is ~0.01, far above rounding noise.
        let (mut lo, mut hi) = if k % 2 == 1 {
            (half_odd - 0.01, k as f64 * PI)
        } else {
            ((k - 1) as f64 * PI, half_odd + 0.01)
        };
        let mut flo = characteristic_scaled(lo);
        let fhi = characteristic_scaled(hi);
        let prod = flo * fhi;
        if !prod.is_finite() || prod >= 0.0 {
            return Err(Error::Internal(format!(
                "characteristic bracket for mode {k} does not change sign"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if !(mid > lo && mid < hi) {
                break; // interval is at float resolution
            }
            let fm = characteristic_scaled(mid);
            if flo * fm <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
                flo = fm;
            }
        }
        let root = if characteristic_scaled(lo).abs() <= characteristic_scaled(hi).abs() {
            lo
        } else {
            hi
        };
        if characteristic_scaled(root).abs() >= tol::CHAR_RESIDUAL_SCALED {
            return Err(Error::Internal(format!(
                "characteristic root {k} converged to residual {:.3e}",
                characteristic_scaled(root).abs()
            )));
        }
        roots.push(root);
    }
    Ok(roots)
}

// ---------------------------------------------------------------------------
// Mode shapes
// ---------------------------------------------------------------------------

/// Unnormalized clamped-free shape and its first three derivatives at
/// u = beta * zeta. `sigma` and its stably computed complement `oms = 1 - sigma`
/// enter through cosh(u) - sigma sinh(u) = (oms e^u + (1+sigma) e^-u)/2 and
/// sinh(u) - sigma cosh(u) = (oms e^u - (1+sigma) e^-u)/2, which avoids the
/// catastrophic cancellation of the textbook form once u is large.
fn shape_raw(beta: f64, sigma: f64, oms: f64, zeta: f64) -> (f64, f64, f64, f64) {
    let u = beta * zeta;
    let ep = u.exp();
    let em = (-u).exp();
    let ch_m_s_sh = 0.5 * (oms * ep + (1.0 + sigma) * em);
    let sh_m_s_ch = 0.5 * (oms * ep - (1.0 + sigma) * em);
    let (sin_u, cos_u) = u.sin_cos();
    let b2 = beta * beta;
    (
        ch_m_s_sh - cos_u + sigma * sin_u,
        beta * (sh_m_s_ch + sin_u + sigma * cos_u),
        b2 * (ch_m_s_sh + cos_u - sigma * sin_u),
        b2 * beta * (sh_m_s_ch - sin_u - sigma * cos_u),
    )
}

/// 1 - sigma_k computed without subtracting nearly equal numbers:
/// (sin x - cos x - e^-x) / (sinh x + sin x) at the root x.
fn one_minus_sigma(x: f64) -> f64 {
    (x.sin() - x.cos() - (-x).exp()) / (x.sinh() + x.sin())
}

// ---------------------------------------------------------------------------
// Basis
// ---------------------------------------------------------------------------

/// Orthonormal modal basis for the boom plus the derived quantities the
/// dynamics needs. Gram matrices are taken under the stored quadrature rule;
/// `gram0` is the identity up to quadrature error by construction.
#[derive(Debug, Clone)]
pub struct BeamBasis {
    pub n_modes: usize,
    pub ell: f64,
    pub ell0: f64,
    /// Dimensionless roots x_k = beta_k * ell.
    pub beta_l: Vec<f64>,
    /// Wavenumbers beta_k (1/m).
    pub beta: Vec<f64>,
    pub sigma: Vec<f64>,
    one_minus_sigma: Vec<f64>,
    /// Normalization constants giving unit L2 norm under `quad`.
    pub norm_c: Vec<f64>,
    /// First-moment coefficients b_k = integral (zeta + ell0) phi_k.
    pub b: DVector<f64>,
    pub gram0: DMatrix<f64>,
    pub gram1: DMatrix<f64>,
    pub gram2: DMatrix<f64>,
    /// gram0 + gram1 + gram2: Gram of the displacement norm used by `y`.
    pub h2_gram: DMatrix<f64>,
    pub quad: QuadratureRule,
    /// Shape values at quadrature nodes, node-major (len(quad) x n_modes).
    phi_quad: DMatrix<f64>,
}

impl BeamBasis {
    /// Builds the basis and verifies its invariants. `quad_points` must be
    /// odd and at least 201; `n_modes` between 1 and 12. Construction fails
    /// with a configuration error naming the violated invariant (for large
    /// mode counts the fix is usually more quadrature points).
    pub fn build(params: &PhysicalParams, n_modes: usize, quad_points: usize) -> Result<Self> {
        params.validate()?;
        if !(1..=12).contains(&n_modes) {
            return Err(Error::Config(format!("n_modes must be in 1..=12, got {n_modes}")));
        }
        if quad_points < 201 || quad_points.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "quad_points must be odd and >= 201, got {quad_points}"
            )));
        }
        let ell = params.ell;
        let beta_l = solve_characteristic_roots(n_modes)?;
        for (k, &x) in beta_l.iter().enumerate() {
            if characteristic_scaled(x).abs() >= tol::CHAR_RESIDUAL_BUILD {
                return Err(Error::Config(format!(
                    "characteristic residual for mode {} is {:.3e} (bound {:.1e})",
                    k + 1,
                    characteristic_scaled(x).abs(),
                    tol::CHAR_RESIDUAL_BUILD
                )));
            }
        }
        let beta: Vec<f64> = beta_l.iter().map(|x| x / ell).collect();
        let oms: Vec<f64> = beta_l.iter().map(|&x| one_minus_sigma(x)).collect();
        let sigma: Vec<f64> = oms.iter().map(|o| 1.0 - o).collect();

        let quad = QuadratureRule::simpson(ell, quad_points)?;
        let nq = quad.len();

        // Sample unnormalized shapes, then rescale to unit L2 norm under the
        // same rule so gram0's diagonal is 1 by construction.
        let mut phi = DMatrix::zeros(nq, n_modes);
        let mut dphi = DMatrix::zeros(nq, n_modes);
        let mut ddphi = DMatrix::zeros(nq, n_modes);
        for k in 0..n_modes {
            for (i, &z) in quad.nodes.iter().enumerate() {
                let (f, d1, d2, _) = shape_raw(beta[k], sigma[k], oms[k], z);
                phi[(i, k)] = f;
                dphi[(i, k)] = d1;
                ddphi[(i, k)] = d2;
            }
        }
        let mut norm_c = Vec::with_capacity(n_modes);
        for k in 0..n_modes {
            let sq: Vec<f64> = (0..nq).map(|i| phi[(i, k)] * phi[(i, k)]).collect();
            let l2 = quad.integrate_samples(&sq);
            if !(l2.is_finite() && l2 > 0.0) {
                return Err(Error::Internal(format!("mode {} has non-positive L2 norm", k + 1)));
            }
            let c = 1.0 / l2.sqrt();
            norm_c.push(c);
            for i in 0..nq {
                phi[(i, k)] *= c;
                dphi[(i, k)] *= c;
                ddphi[(i, k)] *= c;
            }
        }

        let gram = |table: &DMatrix<f64>| -> DMatrix<f64> {
            let mut g = DMatrix::zeros(n_modes, n_modes);
            for a in 0..n_modes {
                for bql in a..n_modes {
                    let prod: Vec<f64> = (0..nq).map(|i| table[(i, a)] * table[(i, bql)]).collect();
                    let v = quad.integrate_samples(&prod);
                    g[(a, bql)] = v;
                    g[(bql, a)] = v;
                }
            }
            g
        };
        let gram0 = gram(&phi);
        let gram1 = gram(&dphi);
        let gram2 = gram(&ddphi);
        let h2_gram = &gram0 + &gram1 + &gram2;

        let mut basis = BeamBasis {
            n_modes,
            ell,
            ell0: params.ell0,
            beta_l,
            beta,
            sigma,
            one_minus_sigma: oms,
            norm_c,
            b: DVector::zeros(n_modes),
            gram0,
            gram1,
            gram2,
            h2_gram,
            quad,
            phi_quad: phi,
        };
        basis.b = basis.project(|z| z + basis.ell0);

        basis.check_invariants()?;
        Ok(basis)
    }

    fn check_invariants(&self) -> Result<()> {
        for a in 0..self.n_modes {
            for b in 0..self.n_modes {
                let target = if a == b { 1.0 } else { 0.0 };
                let defect = (self.gram0[(a, b)] - target).abs();
                if defect > tol::GRAM0_OFFDIAG {
                    return Err(Error::Config(format!(
                        "mass Gram entry ({},{}) deviates from orthonormality by {defect:.3e} \
                         (bound {:.1e}); increase quad_points",
                        a + 1,
                        b + 1,
                        tol::GRAM0_OFFDIAG
                    )));
                }
            }
        }
        for k in 0..self.n_modes {
            let beta4 = self.beta[k].powi(4);
            let rel = (self.gram2[(k, k)] - beta4).abs() / beta4;
            if rel > tol::GRAM2_DIAG_REL {
                return Err(Error::Config(format!(
                    "stiffness Gram diagonal for mode {} off by {rel:.3e} relative \
                     (bound {:.1e}); increase quad_points",
                    k + 1,
                    tol::GRAM2_DIAG_REL
                )));
            }
        }
        if self.b[0].abs() < 1e-12 {
            return Err(Error::Config(
                "first-moment coefficient b_1 is numerically zero; the rigid-flexible \
                 coupling would vanish"
                    .into(),
            ));
        }
        Ok(())
    }

    /// Shape value and first three derivatives of mode `mode` (0-based) at a
    /// point of [0, ell].
    pub fn shape_derivatives(&self, mode: usize, zeta: f64) -> Result<(f64, f64, f64, f64)> {
        if mode >= self.n_modes {
            return Err(Error::Range(format!(
                "mode index {mode} out of range for {} modes",
                self.n_modes
            )));
        }
        if !(0.0..=self.ell).contains(&zeta) {
            return Err(Error::Range(format!("zeta = {zeta} outside [0, {}]", self.ell)));
        }
        let (f, d1, d2, d3) =
            shape_raw(self.beta[mode], self.sigma[mode], self.one_minus_sigma[mode], zeta);
        let c = self.norm_c[mode];
        Ok((c * f, c * d1, c * d2, c * d3))
    }

    pub fn shape(&self, mode: usize, zeta: f64) -> Result<f64> {
        Ok(self.shape_derivatives(mode, zeta)?.0)
    }

    /// Modal coefficients of a scalar field on [0, ell] under the stored
    /// quadrature rule.
    pub fn project(&self, field: impl Fn(f64) -> f64) -> DVector<f64> {
        let samples: Vec<f64> = self.quad.nodes.iter().map(|&z| field(z)).collect();
        let mut coeffs = DVector::zeros(self.n_modes);
        for k in 0..self.n_modes {
            let prod: Vec<f64> =
                (0..self.quad.len()).map(|i| samples[i] * self.phi_quad[(i, k)]).collect();
            coeffs[k] = self.quad.integrate_samples(&prod);
        }
        coeffs
    }

    /// Field values sum_k coeffs_k phi_k at the given points; every point
    /// must lie in [0, ell].
    pub fn reconstruct(&self, coeffs: &DVector<f64>, grid: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(coeffs.len(), self.n_modes, "coefficient count must match mode count");
        let mut out = Vec::with_capacity(grid.len());
        for &z in grid {
            if !(0.0..=self.ell).contains(&z) {
                return Err(Error::Range(format!("grid point {z} outside [0, {}]", self.ell)));
            }
            let mut acc = 0.0;
            for k in 0..self.n_modes {
                let (f, _, _, _) =
                    shape_raw(self.beta[k], self.sigma[k], self.one_minus_sigma[k], z);
                acc += coeffs[k] * self.norm_c[k] * f;
            }
            out.push(acc);
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Modal state and functionals
// ---------------------------------------------------------------------------

/// Modal coefficients of the boom: displacements a1, a2 and velocities
/// p1, p2 in the two transverse planes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalBeamState {
    pub a1: DVector<f64>,
    pub p1: DVector<f64>,
    pub a2: DVector<f64>,
    pub p2: DVector<f64>,
}

impl ModalBeamState {
    pub fn zeros(n_modes: usize) -> Self {
        ModalBeamState {
            a1: DVector::zeros(n_modes),
            p1: DVector::zeros(n_modes),
            a2: DVector::zeros(n_modes),
            p2: DVector::zeros(n_modes),
        }
    }

    pub fn new(a1: DVector<f64>, p1: DVector<f64>, a2: DVector<f64>, p2: DVector<f64>) -> Result<Self> {
        let n = a1.len();
        if p1.len() != n || a2.len() != n || p2.len() != n {
            return Err(Error::InvalidState("modal block lengths differ".into()));
        }
        let state = ModalBeamState { a1, p1, a2, p2 };
        if !state.is_finite() {
            return Err(Error::InvalidState("modal state has non-finite entries".into()));
        }
        Ok(state)
    }

    pub fn n_modes(&self) -> usize {
        self.a1.len()
    }

    pub fn is_finite(&self) -> bool {
        self.a1.iter().chain(&self.p1).chain(&self.a2).chain(&self.p2).all(|v| v.is_finite())
    }
}

/// The three feedback functionals of the boom motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaValues {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

/// gamma1 = b . p2, gamma2 = -b . p1, gamma3 = a2 . p1 - a1 . p2
/// (first moments of the transverse velocities and the modal angular
/// momentum about the boom axis).
pub fn gamma_functionals(state: &ModalBeamState, basis: &BeamBasis) -> GammaValues {
    assert_eq!(state.n_modes(), basis.n_modes, "state/basis mode counts must match");
    GammaValues {
        gamma1: basis.b.dot(&state.p2),
        gamma2: -basis.b.dot(&state.p1),
        gamma3: state.a2.dot(&state.p1) - state.a1.dot(&state.p2),
    }
}

/// Elastic-plus-kinetic boom energy
/// V = (|p1|^2 + |p2|^2 + (EI/rhoA)(a1' G2 a1 + a2' G2 a2)) / 2.
pub fn beam_energy(state: &ModalBeamState, params: &PhysicalParams, basis: &BeamBasis) -> f64 {
    assert_eq!(state.n_modes(), basis.n_modes, "state/basis mode counts must match");
    let c = params.stiffness_ratio();
    let stiff = (&basis.gram2 * &state.a1).dot(&state.a1) + (&basis.gram2 * &state.a2).dot(&state.a2);
    0.5 * (state.p1.norm_squared() + state.p2.norm_squared() + c * stiff)
}

/// Output functional y: H2 norms of the two displacement fields plus L2
/// norms of the two velocity fields.
pub fn y_functional(state: &ModalBeamState, basis: &BeamBasis) -> f64 {
    assert_eq!(state.n_modes(), basis.n_modes, "state/basis mode counts must match");
    let h = &basis.h2_gram;
    (h * &state.a1).dot(&state.a1).max(0.0).sqrt()
        + (h * &state.a2).dot(&state.a2).max(0.0).sqrt()
        + state.p1.norm()
        + state.p2.norm()
}

/// Largest coefficient alpha with alpha * y^2 <= V for every modal state:
/// min of 1/2 (velocity terms) and (EI/2rhoA) lambda_min(G2, G0+G1+G2)
/// (displacement terms), divided by 4 for the 4-term square of y.
pub fn y_energy_alpha(params: &PhysicalParams, basis: &BeamBasis) -> Result<f64> {
    let lam = lambda_min_pencil(&basis.gram2, &basis.h2_gram)?;
    let mu_w = 0.5 * params.stiffness_ratio() * lam;
    Ok(mu_w.min(0.5) / 4.0)
}

/// Smallest generalized eigenvalue of (A, B) for symmetric A and SPD B.
fn lambda_min_pencil(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Internal("displacement Gram is not positive definite".into()))?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Internal("triangular solve failed".into()))?;
    let m = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Internal("triangular solve failed".into()))?;
    let sym = 0.5 * (&m + &m.transpose());
    let eig = sym.symmetric_eigen();
    Ok(eig.eigenvalues.iter().fold(f64::INFINITY, |acc, &v| acc.min(v)))
}

// ---------------------------------------------------------------------------
// Finite-difference oracle
// ---------------------------------------------------------------------------

/// Lowest `n_freq` natural frequencies (rad/s) of the clamped-free boom from
/// a second-order finite-difference discretization, independent of the modal
/// basis. The clamped end enters through a ghost node (slope closure
/// w_-1 = w_1); the free end is natural in the energy form, so no tip rows
/// are imposed. Frequencies are square roots of the eigenvalues of
/// (EI/rhoA) B'B with B the second-difference map.
pub fn fd_frequencies(params: &PhysicalParams, grid_points: usize, n_freq: usize) -> Result<Vec<f64>> {
    params.validate()?;
    if grid_points < 10 {
        return Err(Error::Config(format!("grid_points must be >= 10, got {grid_points}")));
    }
    if n_freq < 1 || n_freq > grid_points {
        return Err(Error::Config(format!(
            "n_freq must be in 1..={grid_points}, got {n_freq}"
        )));
    }
    let m = grid_points;
    let h = params.ell / m as f64;
    let inv_h2 = 1.0 / (h * h);
    // Unknowns u[c] = w((c+1) h), c = 0..m-1; w(0) = 0 is eliminated.
    let mut b = DMatrix::zeros(m, m);
    b[(0, 0)] = 2.0 * inv_h2; // curvature at the clamp via the ghost node
    for j in 1..m {
        if j >= 2 {
            b[(j, j - 2)] = inv_h2;
        }
        b[(j, j - 1)] = -2.0 * inv_h2;
        b[(j, j)] = inv_h2;
    }
    // Row j=1 references w_0 = 0, hence only two entries.
    let k = params.stiffness_ratio() * (b.transpose() * &b);
    let eig = k.symmetric_eigen();
    let mut lambdas: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    lambdas.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(lambdas.into_iter().take(n_freq).map(|l| l.max(0.0).sqrt()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn default_basis(n: usize) -> BeamBasis {
        BeamBasis::build(&PhysicalParams::default(), n, 1001).unwrap()
    }

    fn random_modal(n: usize, amp: f64, rng: &mut ChaCha8Rng) -> ModalBeamState {
        let mut rv = |_| DVector::from_fn(n, |_, _| rng.gen_range(-amp..amp));
        ModalBeamState::new(rv(0), rv(0), rv(0), rv(0)).unwrap()
    }

    #[test]
    fn first_root_matches_reference_value() {
        let roots = solve_characteristic_roots(1).unwrap();
        assert!((roots[0] - 1.8751040687).abs() < 1e-9);
        assert!(characteristic(roots[0]).abs() < 1e-10);
    }

    #[test]
    fn fourth_root_sits_just_below_seven_half_pi() {
        let roots = solve_characteristic_roots(4).unwrap();
        assert!((roots[3] - 3.5 * PI).abs() < 0.01);
        assert!((roots[1] - 4.694091132974175).abs() < 1e-8);
    }

    #[test]
    fn roots_ascend_with_small_residuals() {
        let roots = solve_characteristic_roots(12).unwrap();
        for pair in roots.windows(2) {
            assert!(pair[1] > pair[0]);
        }
        for (k, &x) in roots.iter().enumerate() {
            assert!(
                characteristic_scaled(x).abs() < tol::CHAR_RESIDUAL_SCALED,
                "mode {} scaled residual {:.3e}",
                k + 1,
                characteristic_scaled(x).abs()
            );
        }
        // The unscaled residual is only well-conditioned for low modes.
        for &x in roots.iter().take(4) {
            assert!(characteristic(x).abs() < tol::CHAR_RESIDUAL_ABS);
        }
    }

    #[test]
    fn shapes_satisfy_clamped_end_conditions() {
        let basis = default_basis(6);
        for k in 0..6 {
            let (f, d1, _, _) = basis.shape_derivatives(k, 0.0).unwrap();
            assert_abs_diff_eq!(f, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(d1, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn shapes_satisfy_free_end_conditions() {
        let basis = default_basis(6);
        for k in 0..6 {
            let (_, _, d2, d3) = basis.shape_derivatives(k, basis.ell).unwrap();
            let b = basis.beta[k];
            assert!(d2.abs() < 1e-6 * b * b, "mode {k} curvature at tip: {d2:.3e}");
            assert!(d3.abs() < 1e-6 * b * b * b, "mode {k} shear at tip: {d3:.3e}");
        }
    }

    #[test]
    fn mass_gram_is_identity_within_tolerance() {
        let basis = default_basis(4);
        for a in 0..4 {
            for b in 0..4 {
                let target = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (basis.gram0[(a, b)] - target).abs() < tol::GRAM0_OFFDIAG,
                    "gram0[{a},{b}] = {}",
                    basis.gram0[(a, b)]
                );
            }
        }
    }

    #[test]
    fn stiffness_gram_diagonal_matches_beta_fourth() {
        let basis = default_basis(4);
        for k in 0..4 {
            let beta4 = basis.beta[k].powi(4);
            assert_relative_eq!(basis.gram2[(k, k)], beta4, max_relative = tol::GRAM2_DIAG_REL);
        }
    }

    #[test]
    fn finer_quadrature_reduces_orthonormality_defect() {
        let params = PhysicalParams::default();
        let offdiag_max = |basis: &BeamBasis| {
            let mut worst: f64 = 0.0;
            for a in 0..basis.n_modes {
                for b in 0..basis.n_modes {
                    if a != b {
                        worst = worst.max(basis.gram0[(a, b)].abs());
                    }
                }
            }
            worst
        };
        let coarse = offdiag_max(&BeamBasis::build(&params, 6, 301).unwrap());
        let fine = offdiag_max(&BeamBasis::build(&params, 6, 2001).unwrap());
        assert!(fine <= coarse, "coarse {coarse:.3e} vs fine {fine:.3e}");
    }

    #[test]
    fn build_rejects_bad_configuration() {
        let params = PhysicalParams::default();
        assert!(BeamBasis::build(&params, 0, 1001).is_err());
        assert!(BeamBasis::build(&params, 13, 1001).is_err());
        assert!(BeamBasis::build(&params, 4, 1000).is_err());
        assert!(BeamBasis::build(&params, 4, 101).is_err());
    }

    #[test]
    fn projecting_a_mode_recovers_its_unit_vector() {
        let basis = default_basis(4);
        let coeffs = basis.project(|z| basis.shape(1, z).unwrap());
        for k in 0..4 {
            let target = if k == 1 { 1.0 } else { 0.0 };
            assert!((coeffs[k] - target).abs() < 1e-8, "coeff {k} = {}", coeffs[k]);
        }
    }

    #[test]
    fn projecting_zero_gives_zero() {
        let basis = default_basis(3);
        let coeffs = basis.project(|_| 0.0);
        assert!(coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn moment_vector_is_projection_of_the_lever_arm() {
        let basis = default_basis(4);
        let direct = basis.project(|z| z + basis.ell0);
        assert_eq!(basis.b, direct);
        assert!(basis.b[0].abs() > 0.1);
    }

    #[test]
    fn reconstruct_round_trips_through_project() {
        let basis = default_basis(4);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let coeffs = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
        let nodes = basis.quad.nodes.clone();
        let samples = basis.reconstruct(&coeffs, &nodes).unwrap();
        let back = basis.project(|z| {
            let idx = nodes.iter().position(|&n| n == z).unwrap();
            samples[idx]
        });
        for k in 0..4 {
            assert!((back[k] - coeffs[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn reconstruct_rejects_out_of_range_points() {
        let basis = default_basis(2);
        let coeffs = DVector::zeros(2);
        assert!(matches!(basis.reconstruct(&coeffs, &[-0.1]), Err(Error::Range(_))));
        assert!(matches!(basis.reconstruct(&coeffs, &[basis.ell + 1e-9]), Err(Error::Range(_))));
    }

    #[test]
    fn gammas_vanish_for_quiet_boom() {
        let basis = default_basis(4);
        let g = gamma_functionals(&ModalBeamState::zeros(4), &basis);
        assert_eq!((g.gamma1, g.gamma2, g.gamma3), (0.0, 0.0, 0.0));
    }

    #[test]
    fn gamma_of_first_mode_velocity_is_its_moment() {
        let basis = default_basis(4);
        let mut state = ModalBeamState::zeros(4);
        state.p2[0] = 1.0;
        let g = gamma_functionals(&state, &basis);
        assert_eq!(g.gamma1, basis.b[0]);
        assert_eq!(g.gamma2, 0.0);
        assert_eq!(g.gamma3, 0.0);
    }

    #[test]
    fn swapping_planes_flips_gamma_signs() {
        let basis = default_basis(4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let state = random_modal(4, 0.5, &mut rng);
        let swapped = ModalBeamState::new(
            state.a2.clone(),
            state.p2.clone(),
            state.a1.clone(),
            state.p1.clone(),
        )
        .unwrap();
        let g = gamma_functionals(&state, &basis);
        let gs = gamma_functionals(&swapped, &basis);
        assert_eq!(gs.gamma1, -g.gamma2);
        assert_eq!(gs.gamma2, -g.gamma1);
        assert_eq!(gs.gamma3, -g.gamma3);
    }

    #[test]
    fn gamma_of_uniform_velocity_approaches_continuum_moment() {
        // For v2 = c the continuum value is c (ell^2/2 + ell0 ell) = 3c here.
        let params = PhysicalParams::default();
        let continuum = 3.0;
        let gamma_at = |n: usize| {
            let basis = BeamBasis::build(&params, n, 1001).unwrap();
            let mut state = ModalBeamState::zeros(n);
            state.p2 = basis.project(|_| 1.0);
            gamma_functionals(&state, &basis).gamma1
        };
        let coarse_err = (gamma_at(2) - continuum).abs();
        let fine_err = (gamma_at(10) - continuum).abs();
        assert!(fine_err < coarse_err);
        assert!(fine_err < 0.05 * continuum, "gamma1(10 modes) error {fine_err:.3e}");
    }

    #[test]
    fn beam_energy_of_single_mode_matches_closed_form() {
        let params = PhysicalParams::default();
        let basis = default_basis(4);
        let amp = 0.02;
        let mut state = ModalBeamState::zeros(4);
        state.a1[2] = amp;
        let expected = 0.5 * params.stiffness_ratio() * basis.beta[2].powi(4) * amp * amp;
        assert_relative_eq!(beam_energy(&state, &params, &basis), expected, max_relative = 2e-6);
    }

    #[test]
    fn beam_energy_is_exactly_quadratic_under_doubling() {
        let params = PhysicalParams::default();
        let basis = default_basis(4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let state = random_modal(4, 0.3, &mut rng);
        let doubled = ModalBeamState::new(
            2.0 * &state.a1,
            2.0 * &state.p1,
            2.0 * &state.a2,
            2.0 * &state.p2,
        )
        .unwrap();
        assert_eq!(
            beam_energy(&doubled, &params, &basis),
            4.0 * beam_energy(&state, &params, &basis)
        );
    }

    #[test]
    fn y_vanishes_only_for_quiet_boom_and_scales_linearly() {
        let basis = default_basis(4);
        assert_eq!(y_functional(&ModalBeamState::zeros(4), &basis), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let state = random_modal(4, 0.4, &mut rng);
        let doubled = ModalBeamState::new(
            2.0 * &state.a1,
            2.0 * &state.p1,
            2.0 * &state.a2,
            2.0 * &state.p2,
        )
        .unwrap();
        let y = y_functional(&state, &basis);
        assert!(y > 0.0);
        assert_eq!(y_functional(&doubled, &basis), 2.0 * y);
    }

    #[test]
    fn energy_dominates_scaled_output_squared() {
        let params = PhysicalParams::default();
        let basis = default_basis(4);
        let alpha = y_energy_alpha(&params, &basis).unwrap();
        assert!(alpha > 0.0 && alpha <= 0.125);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let state = random_modal(4, 1.0, &mut rng);
            let y = y_functional(&state, &basis);
            let v = beam_energy(&state, &params, &basis);
            assert!(alpha * y * y <= v * (1.0 + 1e-9), "alpha y^2 = {} vs V = {}", alpha * y * y, v);
        }
    }

    #[test]
    fn fd_fundamental_matches_modal_frequency() {
        let params = PhysicalParams::default();
        let basis = default_basis(1);
        let modal = basis.beta[0].powi(2) * params.stiffness_ratio().sqrt();
        let fd = fd_frequencies(&params, 400, 3).unwrap();
        assert!(fd.windows(2).all(|w| w[1] > w[0]));
        let rel = (fd[0] - modal).abs() / modal;
        assert!(rel < tol::FD_FUNDAMENTAL_REL, "relative error {rel:.3e}");
    }

    #[test]
    fn fd_overtone_ratio_matches_root_ratio() {
        let params = PhysicalParams::default();
        let roots = solve_characteristic_roots(2).unwrap();
        let expected = (roots[1] / roots[0]).powi(2);
        let fd = fd_frequencies(&params, 400, 2).unwrap();
        let ratio = fd[1] / fd[0];
        assert!((ratio - expected).abs() / expected < 0.01, "ratio {ratio} vs {expected}");
    }

    #[test]
    fn fd_error_shrinks_with_grid_refinement() {
        let params = PhysicalParams::default();
        let basis = default_basis(1);
        let modal = basis.beta[0].powi(2) * params.stiffness_ratio().sqrt();
        let err = |grid: usize| (fd_frequencies(&params, grid, 1).unwrap()[0] - modal).abs();
        assert!(err(800) < err(400));
    }
}
