//! Isotropic elasticity with a volumetric-deviatoric tension/compression
//! split, quadratic degradation `f(α) = (1-α)²` and the two local dissipation
//! functions (`w₀α` with an elastic stage, `w₀α²` without).
//!
//! All tensors are 6-component Voigt vectors `(ε_x, ε_y, ε_z, γ_xy, γ_yz, γ_zx)`
//! with engineering shear strains. Stresses use the same ordering with tensor
//! shear components.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SMatrix};

/// Voigt vector, engineering shear for strains.
pub type Voigt = [f64; 6];
pub type Matrix6 = SMatrix<f64, 6, 6>;

/// Indices of the in-plane rows `(ε_x, ε_y, γ_xy)` inside a Voigt vector.
pub const PLANE_ROWS: [usize; 3] = [0, 1, 3];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MaterialError {
    #[error("damage value {0} outside [0, 1]")]
    DamageOutOfRange(f64),
    #[error("invalid material parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

/// Local dissipation function `w(α)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DissipationModel {
    /// `w = w₀α`: strictly positive `w'(0)`, hence an elastic stage.
    #[default]
    Threshold,
    /// `w = w₀α²`: damage grows from the first load increment.
    NoThreshold,
}

impl DissipationModel {
    pub fn name(self) -> &'static str {
        match self {
            DissipationModel::Threshold => "threshold",
            DissipationModel::NoThreshold => "no_threshold",
        }
    }
}

impl fmt::Display for DissipationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DissipationModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "threshold" => Ok(DissipationModel::Threshold),
            "no_threshold" => Ok(DissipationModel::NoThreshold),
            other => Err(format!("unknown dissipation model `{other}`")),
        }
    }
}

/// How two-dimensional meshes treat the out-of-plane direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlaneModel {
    #[default]
    Strain,
    Stress,
}

impl FromStr for PlaneModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strain" | "plane_strain" => Ok(PlaneModel::Strain),
            "stress" | "plane_stress" => Ok(PlaneModel::Stress),
            other => Err(format!("unknown plane model `{other}`")),
        }
    }
}

/// Which Heaviside branch carries the volumetric term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumetricBranch {
    /// `tr ε > 0`: volumetric energy is degradable.
    Tension,
    /// `tr ε ≤ 0`: volumetric energy is protected. Zero trace lands here.
    Compression,
}

impl VolumetricBranch {
    pub fn of(volumetric_strain: f64) -> Self {
        if volumetric_strain > 0.0 {
            VolumetricBranch::Tension
        } else {
            VolumetricBranch::Compression
        }
    }
}

/// Validated material constants. Units: MPa and mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    bulk: f64,
    poisson: f64,
    w0: f64,
    eta: f64,
    model: DissipationModel,
}

impl MaterialParams {
    pub fn new(
        bulk: f64,
        poisson: f64,
        w0: f64,
        eta: f64,
        model: DissipationModel,
    ) -> Result<Self, MaterialError> {
        let invalid = |name, value, reason| MaterialError::InvalidParameter {
            name,
            value,
            reason,
        };
        if !(bulk > 0.0 && bulk.is_finite()) {
            return Err(invalid("K", bulk, "must be positive"));
        }
        if !(poisson > -1.0 && poisson < 0.5) {
            return Err(invalid("nu", poisson, "must lie in (-1, 0.5)"));
        }
        if !(w0 > 0.0 && w0.is_finite()) {
            return Err(invalid("w0", w0, "must be positive"));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(invalid("eta", eta, "must be positive"));
        }
        Ok(MaterialParams {
            bulk,
            poisson,
            w0,
            eta,
            model,
        })
    }

    pub fn bulk_modulus(&self) -> f64 {
        self.bulk
    }

    pub fn poisson_ratio(&self) -> f64 {
        self.poisson
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn model(&self) -> DissipationModel {
        self.model
    }

    pub fn with_model(mut self, model: DissipationModel) -> Self {
        self.model = model;
        self
    }

    /// μ = 3K(1-2ν) / (2(1+ν))
    pub fn shear_modulus(&self) -> f64 {
        3.0 * self.bulk * (1.0 - 2.0 * self.poisson) / (2.0 * (1.0 + self.poisson))
    }

    /// λ = K - 2μ/3
    pub fn lame_lambda(&self) -> f64 {
        self.bulk - 2.0 * self.shear_modulus() / 3.0
    }

    pub fn youngs_modulus(&self) -> f64 {
        3.0 * self.bulk * (1.0 - 2.0 * self.poisson)
    }

    /// l = η / √w₀
    pub fn internal_length(&self) -> f64 {
        self.eta / self.w0.sqrt()
    }

    /// `c_w = 4 ∫₀¹ √(w(β)/w₀) dβ`: 8/3 for the threshold model, 2 without.
    pub fn c_w(&self) -> f64 {
        match self.model {
            DissipationModel::Threshold => 8.0 / 3.0,
            DissipationModel::NoThreshold => 2.0,
        }
    }

    /// `G_c = c_w w₀ l / √2`; equals `(4√2/3) w₀ l` for the threshold model.
    pub fn fracture_toughness(&self) -> f64 {
        self.c_w() * self.w0 * self.internal_length() / std::f64::consts::SQRT_2
    }

    /// Tension/compression split of the undamaged energy and stress.
    pub fn split(&self, strain: &Voigt) -> SplitState {
        let k = self.bulk;
        let mu = self.shear_modulus();
        let tr = strain[0] + strain[1] + strain[2];
        let ev = tr / 3.0;
        let dev = deviatoric(strain);
        let dev_sq = dev[0] * dev[0]
            + dev[1] * dev[1]
            + dev[2] * dev[2]
            + 2.0 * (dev[3] * dev[3] + dev[4] * dev[4] + dev[5] * dev[5]);

        let mut stress_plus = [0.0; 6];
        let mut stress_minus = [0.0; 6];
        for i in 0..6 {
            stress_plus[i] = 2.0 * mu * dev[i];
        }
        let (psi_plus, psi_minus) = match VolumetricBranch::of(ev) {
            VolumetricBranch::Tension => {
                for s in &mut stress_plus[..3] {
                    *s += k * tr;
                }
                (0.5 * k * tr * tr + mu * dev_sq, 0.0)
            }
            VolumetricBranch::Compression => {
                for s in &mut stress_minus[..3] {
                    *s = k * tr;
                }
                (mu * dev_sq, 0.5 * k * tr * tr)
            }
        };
        SplitState {
            psi_plus,
            psi_minus,
            stress_plus,
            stress_minus,
            vol_strain: ev,
            dev_strain: dev,
        }
    }

    /// `w(α)` and `w'(α)`.
    pub fn local_dissipation(&self, alpha: f64) -> Result<(f64, f64), MaterialError> {
        check_damage(alpha)?;
        Ok(match self.model {
            DissipationModel::Threshold => (self.w0 * alpha, self.w0),
            DissipationModel::NoThreshold => (self.w0 * alpha * alpha, 2.0 * self.w0 * alpha),
        })
    }

    /// `D = K[H(ε_v)(1-α)² + H(-ε_v)] P_V + 2μ(1-α)² P_D`.
    pub fn constitutive_matrix(
        &self,
        alpha: f64,
        branch: VolumetricBranch,
    ) -> Result<Matrix6, MaterialError> {
        let f = degradation(alpha)?;
        let vol = match branch {
            VolumetricBranch::Tension => f,
            VolumetricBranch::Compression => 1.0,
        };
        Ok(volumetric_projector() * (self.bulk * vol)
            + deviatoric_projector() * (2.0 * self.shear_modulus() * f))
    }

    /// Constitutive matrix in the layout used by element B matrices: the full
    /// 6×6 in 3D, or the condensed 3×3 in-plane matrix in 2D.
    pub fn tangent(
        &self,
        alpha: f64,
        branch: VolumetricBranch,
        dim: usize,
        plane: PlaneModel,
    ) -> Result<DMatrix<f64>, MaterialError> {
        let d = self.constitutive_matrix(alpha, branch)?;
        if dim == 3 {
            return Ok(DMatrix::from_iterator(6, 6, d.iter().copied()));
        }
        let mut out = DMatrix::zeros(3, 3);
        for (a, &i) in PLANE_ROWS.iter().enumerate() {
            for (b, &j) in PLANE_ROWS.iter().enumerate() {
                out[(a, b)] = d[(i, j)];
            }
        }
        if plane == PlaneModel::Stress {
            let dzz = d[(2, 2)];
            if dzz > 0.0 {
                for (a, &i) in PLANE_ROWS.iter().enumerate() {
                    for (b, &j) in PLANE_ROWS.iter().enumerate() {
                        out[(a, b)] -= d[(i, 2)] * d[(2, j)] / dzz;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Completes an in-plane strain `(ε_x, ε_y, γ_xy)` to a full Voigt strain.
    /// Plane strain sets `ε_z = 0`; plane stress picks the `ε_z` that makes
    /// `σ_z` vanish under the damaged split law (the minimiser of `Ψ` over `ε_z`).
    pub fn complete_plane(&self, inplane: [f64; 3], alpha: f64, plane: PlaneModel) -> Voigt {
        let [ex, ey, gxy] = inplane;
        let ez = match plane {
            PlaneModel::Strain => 0.0,
            PlaneModel::Stress => {
                let a = ex + ey;
                let k = self.bulk;
                let mu = self.shear_modulus();
                if a > 0.0 {
                    // tension branch; independent of the degradation factor
                    -a * (k - 2.0 * mu / 3.0) / (k + 4.0 * mu / 3.0)
                } else {
                    let f = (1.0 - alpha.clamp(0.0, 1.0)).powi(2);
                    -a * (k - 2.0 * f * mu / 3.0) / (k + 4.0 * f * mu / 3.0)
                }
            }
        };
        [ex, ey, ez, gxy, 0.0, 0.0]
    }

    /// Damaged energy density `Ψ = f(α)Ψ₀⁺ + Ψ₀⁻`.
    pub fn energy_density(&self, strain: &Voigt, alpha: f64) -> Result<f64, MaterialError> {
        let s = self.split(strain);
        Ok(degradation(alpha)? * s.psi_plus + s.psi_minus)
    }

    /// Damaged stress `f(α)σ₀⁺ + σ₀⁻`.
    pub fn stress(&self, strain: &Voigt, alpha: f64) -> Result<Voigt, MaterialError> {
        let s = self.split(strain);
        let f = degradation(alpha)?;
        let mut out = [0.0; 6];
        for i in 0..6 {
            out[i] = f * s.stress_plus[i] + s.stress_minus[i];
        }
        Ok(out)
    }
}

/// Split energies and stresses at one material point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitState {
    pub psi_plus: f64,
    pub psi_minus: f64,
    pub stress_plus: Voigt,
    pub stress_minus: Voigt,
    /// ε_v = tr(ε)/3
    pub vol_strain: f64,
    /// Deviatoric strain with tensor shear entries (γ/2).
    pub dev_strain: Voigt,
}

impl SplitState {
    pub fn branch(&self) -> VolumetricBranch {
        VolumetricBranch::of(self.vol_strain)
    }
}

/// Deviatoric part of a Voigt strain, shear entries halved.
pub fn deviatoric(strain: &Voigt) -> Voigt {
    let ev = (strain[0] + strain[1] + strain[2]) / 3.0;
    [
        strain[0] - ev,
        strain[1] - ev,
        strain[2] - ev,
        0.5 * strain[3],
        0.5 * strain[4],
        0.5 * strain[5],
    ]
}

/// Contraction `ε:σ` of an engineering-shear strain with a stress.
pub fn contract(strain: &Voigt, stress: &Voigt) -> f64 {
    strain.iter().zip(stress).map(|(e, s)| e * s).sum()
}

/// Damage driving force `ε:σ₀⁺`, equal to `2Ψ₀⁺`.
pub fn driving_force(split: &SplitState, strain: &Voigt) -> f64 {
    contract(strain, &split.stress_plus)
}

fn check_damage(alpha: f64) -> Result<(), MaterialError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(MaterialError::DamageOutOfRange(alpha))
    }
}

/// f(α) = (1-α)²
pub fn degradation(alpha: f64) -> Result<f64, MaterialError> {
    check_damage(alpha)?;
    Ok((1.0 - alpha) * (1.0 - alpha))
}

/// f'(α) = -2(1-α)
pub fn degradation_derivative(alpha: f64) -> Result<f64, MaterialError> {
    check_damage(alpha)?;
    Ok(-2.0 * (1.0 - alpha))
}

pub fn volumetric_projector() -> Matrix6 {
    let mut p = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            p[(i, j)] = 1.0;
        }
    }
    p
}

pub fn deviatoric_projector() -> Matrix6 {
    let mut p = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            p[(i, j)] = if i == j { 2.0 / 3.0 } else { -1.0 / 3.0 };
        }
        p[(i + 3, i + 3)] = 0.5;
    }
    p
}
