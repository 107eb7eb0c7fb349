//! Named observables and states: Pauli matrices, the 3×3 Staffelberg
//! family and a commuting triangle example.

use crate::density::DensityMatrix;
use crate::hermitian::HermitianMatrix;
use crate::linalg::{CMatrix, C64};
use crate::moments::{ExpectedValue, ObservableSet};

fn from_entries(n: usize, entries: &[(usize, usize, C64)]) -> HermitianMatrix {
    let mut m = CMatrix::zeros(n, n);
    for &(i, j, z) in entries {
        m[(i, j)] = z;
    }
    HermitianMatrix::new(m).expect("fixture entries are Hermitian")
}

pub fn pauli_x() -> HermitianMatrix {
    from_entries(2, &[(0, 1, C64::new(1.0, 0.0)), (1, 0, C64::new(1.0, 0.0))])
}

pub fn pauli_y() -> HermitianMatrix {
    from_entries(2, &[(0, 1, C64::new(0.0, -1.0)), (1, 0, C64::new(0.0, 1.0))])
}

pub fn pauli_z() -> HermitianMatrix {
    HermitianMatrix::from_real_diag(&[1.0, -1.0])
}

/// Observables `a₁ = σ₁ ⊕ 0`, `a₂ = σ₂ ⊕ 1` on `ℂ³` with uniform prior,
/// plus the states used to exhibit the discontinuity at `m₀ = (0, 1)`.
#[derive(Clone, Debug)]
pub struct StaffelbergFixture {
    obs: ObservableSet,
}

pub fn staffelberg() -> StaffelbergFixture {
    let zero = HermitianMatrix::zeros(1);
    let one = HermitianMatrix::identity(1);
    let obs = ObservableSet::uniform(vec![pauli_x().direct_sum(&zero), pauli_y().direct_sum(&one)])
        .expect("fixture dimensions agree");
    StaffelbergFixture { obs }
}

impl StaffelbergFixture {
    pub fn observable_set(&self) -> &ObservableSet {
        &self.obs
    }

    pub fn observables(&self) -> &[HermitianMatrix] {
        self.obs.observables()
    }

    /// `ρ(α) = ½(1₂ + sin α σ₁ + cos α σ₂) ⊕ 0`, with `E(ρ(α)) = (sin α, cos α)`.
    pub fn rho(&self, alpha: f64) -> DensityMatrix {
        let block = HermitianMatrix::identity(2)
            .add(&pauli_x().scale(alpha.sin()))
            .add(&pauli_y().scale(alpha.cos()))
            .scale(0.5);
        DensityMatrix::from_positive(block.direct_sum(&HermitianMatrix::zeros(1)))
    }

    /// `v₊ = (1, i, 0)/√2`, the `+1` eigenvector of `σ₂ ⊕ 0`.
    pub fn v_plus(&self) -> Vec<C64> {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        vec![C64::new(r, 0.0), C64::new(0.0, r), C64::new(0.0, 0.0)]
    }

    /// `0₂ ⊕ 1`
    pub fn apex(&self) -> DensityMatrix {
        DensityMatrix::from_positive(HermitianMatrix::from_real_diag(&[0.0, 0.0, 1.0]))
    }

    /// Midpoint `c = ½(ρ(0) + 0₂ ⊕ 1)` of the segment over `m₀`.
    pub fn c(&self) -> DensityMatrix {
        self.rho(0.0).mix(0.5, &self.apex())
    }

    pub fn m0(&self) -> ExpectedValue {
        ExpectedValue::new(vec![0.0, 1.0])
    }

    /// Normal `w = 0₂ ⊕ 1 − ρ(0)` and level `−1/3` of the neighborhood
    /// `U(c) = {ρ : ⟨ρ, w⟩ ≥ −1/3}`.
    pub fn neighborhood_of_c(&self) -> (HermitianMatrix, f64) {
        let w = self.apex().matrix().sub(self.rho(0.0).matrix());
        (w, -1.0 / 3.0)
    }
}

/// Commuting pair `diag(1, −1, 0)`, `diag(0, 1, −1)`; the body is the
/// triangle with vertices `(1, 0)`, `(−1, 1)`, `(0, −1)`.
pub fn triangle() -> ObservableSet {
    ObservableSet::uniform(vec![
        HermitianMatrix::from_real_diag(&[1.0, -1.0, 0.0]),
        HermitianMatrix::from_real_diag(&[0.0, 1.0, -1.0]),
    ])
    .expect("fixture dimensions agree")
}
