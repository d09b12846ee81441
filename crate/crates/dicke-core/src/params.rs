use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Model parameters of the extended Dicke Hamiltonian
///
/// H = ω b†b + ω0 J3 + (λ/√N)(b†J− + bJ+) + (δλ/√N)(b†J+ + bJ−)
///
/// for a quasispin of size j = two_j/2 carried by N = atoms_n atoms. The
/// coupling that actually controls the physics is λγ = √γ·λ with
/// γ = 2j/N ∈ (0,1]; the effective Planck constant of the classical limit is
/// ħ_eff = 1/(2j).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega: f64,
    pub omega0: f64,
    pub lambda: f64,
    pub delta: f64,
    pub two_j: u32,
    pub atoms_n: u32,
}

impl ModelParams {
    /// Validating constructor. `two_j` and `atoms_n` must have equal parity
    /// (both count the same atoms), couplings must be in range.
    pub fn new(
        omega: f64,
        omega0: f64,
        lambda: f64,
        delta: f64,
        two_j: u32,
        atoms_n: u32,
    ) -> Result<Self> {
        let p = Self { omega, omega0, lambda, delta, two_j, atoms_n };
        p.validate()?;
        Ok(p)
    }

    /// Unvalidated constructor.
    ///
    /// Exists so symmetry checks (e.g. the λ → −λ spectral equivalence) can
    /// build Hamiltonians outside the validated range. Callers own the
    /// consequences.
    #[doc(hidden)]
    pub fn new_raw(
        omega: f64,
        omega0: f64,
        lambda: f64,
        delta: f64,
        two_j: u32,
        atoms_n: u32,
    ) -> Self {
        Self { omega, omega0, lambda, delta, two_j, atoms_n }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Domain(msg));
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return fail(format!("omega must be > 0, got {}", self.omega));
        }
        if !(self.omega0 > 0.0) || !self.omega0.is_finite() {
            return fail(format!("omega0 must be > 0, got {}", self.omega0));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return fail(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return fail(format!("delta must lie in [0,1], got {}", self.delta));
        }
        if self.two_j < 1 || self.two_j > self.atoms_n {
            return fail(format!(
                "two_j must satisfy 1 <= two_j <= atoms_n, got two_j={} atoms_n={}",
                self.two_j, self.atoms_n
            ));
        }
        if (self.two_j % 2) != (self.atoms_n % 2) {
            return fail(format!(
                "two_j and atoms_n must have equal parity, got {} and {}",
                self.two_j, self.atoms_n
            ));
        }
        Ok(())
    }

    /// Quasispin j.
    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    /// N* = 2j, the scaling size of the classical limit.
    pub fn n_star(&self) -> f64 {
        self.two_j as f64
    }

    /// γ = 2j/N.
    pub fn gamma(&self) -> f64 {
        self.two_j as f64 / self.atoms_n as f64
    }

    /// λγ = √γ·λ, the coupling of the classical Hamiltonian.
    pub fn lambda_gamma(&self) -> f64 {
        self.gamma().sqrt() * self.lambda
    }

    /// Effective Planck constant 1/(2j).
    pub fn hbar_eff(&self) -> f64 {
        1.0 / self.n_star()
    }

    /// Detuning Δω = ω − ω0.
    pub fn delta_omega(&self) -> f64 {
        self.omega - self.omega0
    }

    /// λ/√N, the prefactor of the quantum matrix elements.
    pub fn coupling_prefactor(&self) -> f64 {
        self.lambda / (self.atoms_n as f64).sqrt()
    }
}
