//! Centralized numerical tolerances.
//!
//! Every threshold used by the library lives here so tests can override a
//! single record instead of scattering magic numbers.

/// Numerical tolerances used across the crate.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Reconstruction residual allowed for eigendecompositions,
    /// relative to `1 + ‖H‖`.
    pub recon: f64,
    /// Slack below zero still accepted as positive semidefinite.
    pub psd: f64,
    /// Hermiticity residual accepted before symmetrizing.
    pub herm: f64,
    /// Eigenvalues of a generator below this count as kernel (spectral gap floor).
    pub gap: f64,
    /// Residual accepted for subalgebra closure checks.
    pub subalgebra: f64,
    /// Residual accepted for orthonormality (Gram) checks.
    pub orthonormal: f64,
    /// Relative switch point between the closed-form logarithmic mean and its
    /// equal-arguments limit branch.
    pub log_mean_switch: f64,
    /// Eigenvalue floor applied to densities so that `log ρ` stays finite.
    pub density_floor: f64,
    /// Absolute resolution of curvature bisections.
    pub lambda_bisect: f64,
    /// Resolution in `t` of CB-return-time bisections.
    pub t_bisect: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            recon: 1e-10,
            psd: 1e-9,
            herm: 1e-12,
            gap: 1e-10,
            subalgebra: 1e-8,
            orthonormal: 1e-8,
            log_mean_switch: 1e-12,
            density_floor: 1e-12,
            lambda_bisect: 1e-6,
            t_bisect: 1e-9,
        }
    }
}

impl Tolerances {
    /// Uniformly scale the residual-style tolerances (used by CLI `--tol`).
    pub fn scaled(factor: f64) -> Self {
        let d = Tolerances::default();
        Tolerances {
            recon: d.recon * factor,
            psd: d.psd * factor,
            herm: d.herm * factor,
            gap: d.gap,
            subalgebra: d.subalgebra * factor,
            orthonormal: d.orthonormal * factor,
            ..d
        }
    }
}
