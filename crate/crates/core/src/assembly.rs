//! Global systems for the two convex subproblems of the staggered scheme.
//!
//! * Elasticity (damage frozen): `∫ B_vᵀ D(α_h, branch) B_v dΩ · u = 0`.
//! * Damage (displacement frozen):
//!   `∫ [N_sᵀ (2Ψ₀⁺) N_s + η² B_sᵀ B_s] dΩ · α = ∫ N_sᵀ (2Ψ₀⁺ - w₀) dΩ`,
//!   with `2Ψ₀⁺ = ε:σ₀⁺` evaluated at each quadrature point.
//!
//! Element contributions are computed in parallel and scattered in element
//! order, so assembled values are bitwise reproducible.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::elements::{compute_element_matrices, ElementMatrices, QuadratureRule};
use crate::material::{
    driving_force, DissipationModel, MaterialError, MaterialParams, PlaneModel, Voigt,
    VolumetricBranch, PLANE_ROWS,
};
use crate::mesh::{Mesh, MeshError};
use crate::sparse::CsrMatrix;

#[derive(Debug, thiserror::Error)]
pub enum AssemblyError {
    #[error("{field} has length {got}, expected {expected}")]
    Size {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("component {component} is invalid for a field with {components} components")]
    Component { component: usize, components: usize },
    #[error("conflicting prescribed values {first} and {second} on dof {dof}")]
    ConflictingConstraint { dof: usize, first: f64, second: f64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Material(#[from] MaterialError),
}

/// Global index of nodal component `(node, component)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    pub components: usize,
}

impl DofMap {
    pub fn index(&self, node: usize, component: usize) -> usize {
        node * self.components + component
    }
}

#[derive(Debug, Clone)]
struct AssemblyPattern {
    template: CsrMatrix,
    /// Per element, CSR offsets of the local matrix entries (row major).
    scatter: Vec<Vec<usize>>,
}

impl AssemblyPattern {
    fn new(mesh: &Mesh, components: usize) -> Self {
        let n = mesh.num_nodes() * components;
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for el in mesh.elements() {
            for &a in el {
                for ca in 0..components {
                    let r = &mut rows[a * components + ca];
                    for &b in el {
                        for cb in 0..components {
                            r.push(b * components + cb);
                        }
                    }
                }
            }
        }
        let template = CsrMatrix::from_pattern(rows);
        let scatter = mesh
            .elements()
            .map(|el| {
                let dofs = local_dofs(el, components);
                let mut pos = Vec::with_capacity(dofs.len() * dofs.len());
                for &i in &dofs {
                    for &j in &dofs {
                        pos.push(template.position(i, j).expect("element entry in pattern"));
                    }
                }
                pos
            })
            .collect();
        AssemblyPattern { template, scatter }
    }

    fn assemble(&self, locals: &[DMatrix<f64>]) -> CsrMatrix {
        let mut m = self.template.clone();
        let values = m.values_mut();
        for (ke, pos) in locals.iter().zip(&self.scatter) {
            let n = ke.nrows();
            for i in 0..n {
                for j in 0..n {
                    values[pos[i * n + j]] += ke[(i, j)];
                }
            }
        }
        m
    }
}

fn local_dofs(element: &[usize], components: usize) -> Vec<usize> {
    element
        .iter()
        .flat_map(|&a| (0..components).map(move |c| a * components + c))
        .collect()
}

/// Square system with its right-hand side.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
}

/// Prescribed values on global dofs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Constraints {
    entries: std::collections::BTreeMap<usize, f64>,
}

impl Constraints {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, dof: usize, value: f64) -> Result<(), AssemblyError> {
        match self.entries.insert(dof, value) {
            Some(prev) if (prev - value).abs() > 1e-14 * prev.abs().max(value.abs()) => {
                Err(AssemblyError::ConflictingConstraint {
                    dof,
                    first: prev,
                    second: value,
                })
            }
            _ => Ok(()),
        }
    }

    /// Prescribes `component` of every node in boundary set `set`.
    pub fn add_set(
        &mut self,
        mesh: &Mesh,
        dofs: DofMap,
        set: &str,
        component: usize,
        value: f64,
    ) -> Result<(), AssemblyError> {
        if component >= dofs.components {
            return Err(AssemblyError::Component {
                component,
                components: dofs.components,
            });
        }
        for &node in mesh.boundary_set(set)? {
            self.insert(dofs.index(node, component), value)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|(&d, &v)| (d, v))
    }

    pub fn contains(&self, dof: usize) -> bool {
        self.entries.contains_key(&dof)
    }

    /// Writes the prescribed values into `x`.
    pub fn impose_on(&self, x: &mut [f64]) {
        for (d, v) in self.iter() {
            x[d] = v;
        }
    }
}

impl SparseSystem {
    /// Symmetric elimination: constrained columns move to the right-hand
    /// side, constrained rows become identity rows holding the value.
    pub fn apply_dirichlet(&mut self, constraints: &Constraints) {
        let n = self.matrix.size();
        let mut fixed: Vec<Option<f64>> = vec![None; n];
        for (d, v) in constraints.iter() {
            if d < n {
                fixed[d] = Some(v);
            }
        }
        let row_ptr = self.matrix.row_ptr().to_vec();
        let cols = self.matrix.col_idx().to_vec();
        let values = self.matrix.values_mut();
        for i in 0..n {
            match fixed[i] {
                Some(v) => {
                    for k in row_ptr[i]..row_ptr[i + 1] {
                        values[k] = if cols[k] == i { 1.0 } else { 0.0 };
                    }
                    self.rhs[i] = v;
                }
                None => {
                    for k in row_ptr[i]..row_ptr[i + 1] {
                        if let Some(v) = fixed[cols[k]] {
                            self.rhs[i] -= values[k] * v;
                            values[k] = 0.0;
                        }
                    }
                }
            }
        }
    }

    /// Prescribes `component` on boundary set `set` of `mesh`.
    pub fn apply_dirichlet_set(
        &mut self,
        mesh: &Mesh,
        set: &str,
        component: usize,
        value: f64,
    ) -> Result<(), AssemblyError> {
        let mut c = Constraints::new();
        c.add_set(mesh, self.dofs, set, component, value)?;
        self.apply_dirichlet(&c);
        Ok(())
    }
}

/// Mesh plus cached element kinematics and sparsity patterns.
#[derive(Debug, Clone)]
pub struct Discretization {
    mesh: Mesh,
    plane: PlaneModel,
    elements: Vec<ElementMatrices>,
    qp_offsets: Vec<usize>,
    vector_pattern: AssemblyPattern,
    scalar_pattern: AssemblyPattern,
}

impl Discretization {
    pub fn new(mesh: Mesh, plane: PlaneModel) -> Result<Self, AssemblyError> {
        let rule = QuadratureRule::default_for(mesh.kind());
        let elements = (0..mesh.num_elements())
            .map(|e| {
                compute_element_matrices(mesh.kind(), &mesh.element_coords(e), &rule)
                    .map_err(|source| MeshError::Element { element: e, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut qp_offsets = Vec::with_capacity(elements.len() + 1);
        qp_offsets.push(0);
        for em in &elements {
            qp_offsets.push(qp_offsets.last().unwrap() + em.points.len());
        }
        let vector_pattern = AssemblyPattern::new(&mesh, mesh.dim());
        let scalar_pattern = AssemblyPattern::new(&mesh, 1);
        Ok(Discretization {
            mesh,
            plane,
            elements,
            qp_offsets,
            vector_pattern,
            scalar_pattern,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn plane(&self) -> PlaneModel {
        self.plane
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn displacement_dofs(&self) -> DofMap {
        DofMap {
            components: self.dim(),
        }
    }

    pub fn num_displacement_dofs(&self) -> usize {
        self.mesh.num_nodes() * self.dim()
    }

    pub fn element_matrices(&self, e: usize) -> &ElementMatrices {
        &self.elements[e]
    }

    pub fn num_quadrature_points(&self) -> usize {
        *self.qp_offsets.last().unwrap()
    }

    fn check_sizes(&self, u: Option<&[f64]>, alpha: Option<&[f64]>) -> Result<(), AssemblyError> {
        if let Some(u) = u {
            let expected = self.num_displacement_dofs();
            if u.len() != expected {
                return Err(AssemblyError::Size {
                    field: "displacement",
                    expected,
                    got: u.len(),
                });
            }
        }
        if let Some(a) = alpha {
            let expected = self.mesh.num_nodes();
            if a.len() != expected {
                return Err(AssemblyError::Size {
                    field: "damage",
                    expected,
                    got: a.len(),
                });
            }
        }
        Ok(())
    }

    fn gather_vector(&self, e: usize, u: &[f64]) -> Vec<f64> {
        let d = self.dim();
        self.mesh
            .element(e)
            .iter()
            .flat_map(|&a| (0..d).map(move |c| u[a * d + c]))
            .collect()
    }

    fn gather_scalar(&self, e: usize, a: &[f64]) -> Vec<f64> {
        self.mesh.element(e).iter().map(|&i| a[i]).collect()
    }

    /// Full Voigt strain at point `q` of element `e`; `alpha_h` only matters
    /// for plane stress.
    fn point_strain(
        &self,
        params: &MaterialParams,
        em: &ElementMatrices,
        q: usize,
        ue: &[f64],
        alpha_h: f64,
    ) -> Voigt {
        let e = em.strain(q, ue);
        if self.dim() == 3 {
            e
        } else {
            params.complete_plane([e[0], e[1], e[3]], alpha_h, self.plane)
        }
    }

    pub fn strain_at(
        &self,
        params: &MaterialParams,
        u: &[f64],
        alpha: &[f64],
        e: usize,
        q: usize,
    ) -> Result<Voigt, AssemblyError> {
        self.check_sizes(Some(u), Some(alpha))?;
        let em = &self.elements[e];
        let ah = damage_at(em, q, &self.gather_scalar(e, alpha))?;
        Ok(self.point_strain(params, em, q, &self.gather_vector(e, u), ah))
    }

    pub fn stress_at(
        &self,
        params: &MaterialParams,
        u: &[f64],
        alpha: &[f64],
        e: usize,
        q: usize,
    ) -> Result<Voigt, AssemblyError> {
        let em = &self.elements[e];
        let ah = damage_at(em, q, &self.gather_scalar(e, alpha))?;
        let strain = self.strain_at(params, u, alpha, e, q)?;
        Ok(params.stress(&strain, ah)?)
    }

    /// Heaviside branch at every quadrature point, element-major.
    pub fn volumetric_branches(
        &self,
        params: &MaterialParams,
        u: &[f64],
        alpha: &[f64],
    ) -> Result<Vec<VolumetricBranch>, AssemblyError> {
        self.check_sizes(Some(u), Some(alpha))?;
        let per_element: Vec<Vec<VolumetricBranch>> = (0..self.elements.len())
            .into_par_iter()
            .map(|e| {
                let em = &self.elements[e];
                let ue = self.gather_vector(e, u);
                let ae = self.gather_scalar(e, alpha);
                (0..em.points.len())
                    .map(|q| {
                        let ah = damage_at(em, q, &ae)?;
                        let s = self.point_strain(params, em, q, &ue, ah);
                        Ok(VolumetricBranch::of((s[0] + s[1] + s[2]) / 3.0))
                    })
                    .collect::<Result<Vec<_>, AssemblyError>>()
            })
            .collect::<Result<_, _>>()?;
        Ok(per_element.into_iter().flatten().collect())
    }

    /// Elasticity system with the Heaviside branch of every quadrature point
    /// taken from the strain of `u_current`.
    pub fn assemble_elasticity(
        &self,
        params: &MaterialParams,
        alpha: &[f64],
        u_current: &[f64],
    ) -> Result<SparseSystem, AssemblyError> {
        let branches = self.volumetric_branches(params, u_current, alpha)?;
        self.assemble_elasticity_with_branches(params, alpha, &branches)
    }

    pub fn assemble_elasticity_with_branches(
        &self,
        params: &MaterialParams,
        alpha: &[f64],
        branches: &[VolumetricBranch],
    ) -> Result<SparseSystem, AssemblyError> {
        self.check_sizes(None, Some(alpha))?;
        if branches.len() != self.num_quadrature_points() {
            return Err(AssemblyError::Size {
                field: "branches",
                expected: self.num_quadrature_points(),
                got: branches.len(),
            });
        }
        let dim = self.dim();
        let locals: Vec<DMatrix<f64>> = (0..self.elements.len())
            .into_par_iter()
            .map(|e| {
                let em = &self.elements[e];
                let ae = self.gather_scalar(e, alpha);
                let ndof = dim * em.nodes();
                let mut ke = DMatrix::zeros(ndof, ndof);
                for (q, p) in em.points.iter().enumerate() {
                    let ah = damage_at(em, q, &ae)?;
                    let d =
                        params.tangent(ah, branches[self.qp_offsets[e] + q], dim, self.plane)?;
                    let b = em.b_vector(q);
                    let db = &d * &b;
                    ke.gemm_tr(p.weight, &b, &db, 1.0);
                }
                Ok(ke)
            })
            .collect::<Result<_, AssemblyError>>()?;
        Ok(SparseSystem {
            matrix: self.vector_pattern.assemble(&locals),
            rhs: vec![0.0; self.num_displacement_dofs()],
            dofs: self.displacement_dofs(),
        })
    }

    /// Damage system for frozen displacement `u`. `alpha` is the current
    /// damage iterate; it only enters through the out-of-plane strain of
    /// plane-stress problems.
    pub fn assemble_damage(
        &self,
        params: &MaterialParams,
        u: &[f64],
        alpha: &[f64],
    ) -> Result<SparseSystem, AssemblyError> {
        self.check_sizes(Some(u), Some(alpha))?;
        let eta2 = params.eta() * params.eta();
        let w0 = params.w0();
        let model = params.model();
        let locals: Vec<(DMatrix<f64>, DVector<f64>)> = (0..self.elements.len())
            .into_par_iter()
            .map(|e| {
                let em = &self.elements[e];
                let n = em.nodes();
                let ue = self.gather_vector(e, u);
                let ae = self.gather_scalar(e, alpha);
                let mut ke = DMatrix::zeros(n, n);
                let mut fe = DVector::zeros(n);
                for (q, p) in em.points.iter().enumerate() {
                    let ah = damage_at(em, q, &ae)?;
                    let strain = self.point_strain(params, em, q, &ue, ah);
                    let split = params.split(&strain);
                    let s = driving_force(&split, &strain);
                    let (mass_coef, source) = match model {
                        DissipationModel::Threshold => (s, s - w0),
                        DissipationModel::NoThreshold => (s + 2.0 * w0, s),
                    };
                    for i in 0..n {
                        let ni = p.shape[i];
                        fe[i] += p.weight * ni * source;
                        for j in 0..n {
                            let gg: f64 =
                                (0..3).map(|d| p.gradients[i][d] * p.gradients[j][d]).sum();
                            ke[(i, j)] += p.weight * (mass_coef * ni * p.shape[j] + eta2 * gg);
                        }
                    }
                }
                Ok((ke, fe))
            })
            .collect::<Result<_, AssemblyError>>()?;
        let mut rhs = vec![0.0; self.mesh.num_nodes()];
        for (e, (_, fe)) in locals.iter().enumerate() {
            for (a, &node) in self.mesh.element(e).iter().enumerate() {
                rhs[node] += fe[a];
            }
        }
        let mats: Vec<DMatrix<f64>> = locals.into_iter().map(|(k, _)| k).collect();
        Ok(SparseSystem {
            matrix: self.scalar_pattern.assemble(&mats),
            rhs,
            dofs: DofMap { components: 1 },
        })
    }

    /// `∂W/∂u`: internal force `∫ B_vᵀ σ(ε, α) dΩ` with the branch taken from
    /// the strain itself.
    pub fn internal_force(
        &self,
        params: &MaterialParams,
        u: &[f64],
        alpha: &[f64],
    ) -> Result<Vec<f64>, AssemblyError> {
        self.check_sizes(Some(u), Some(alpha))?;
        let dim = self.dim();
        let locals: Vec<Vec<f64>> = (0..self.elements.len())
            .into_par_iter()
            .map(|e| {
                let em = &self.elements[e];
                let ue = self.gather_vector(e, u);
                let ae = self.gather_scalar(e, alpha);
                let mut fe = vec![0.0; dim * em.nodes()];
                for (q, p) in em.points.iter().enumerate() {
                    let ah = damage_at(em, q, &ae)?;
                    let strain = self.point_strain(params, em, q, &ue, ah);
                    let sigma = params.stress(&strain, ah)?;
                    let rows: Vec<f64> = if dim == 3 {
                        sigma.to_vec()
                    } else {
                        PLANE_ROWS.iter().map(|&i| sigma[i]).collect()
                    };
                    let b = em.b_vector(q);
                    for c in 0..b.ncols() {
                        let mut s = 0.0;
                        for (r, sr) in rows.iter().enumerate() {
                            s += b[(r, c)] * sr;
                        }
                        fe[c] += p.weight * s;
                    }
                }
                Ok(fe)
            })
            .collect::<Result<_, AssemblyError>>()?;
        let mut f = vec![0.0; self.num_displacement_dofs()];
        for (e, fe) in locals.iter().enumerate() {
            for (a, &node) in self.mesh.element(e).iter().enumerate() {
                for c in 0..dim {
                    f[node * dim + c] += fe[a * dim + c];
                }
            }
        }
        Ok(f)
    }

    /// `∂W/∂α`: `∫ [(-(1-α_h) ε:σ₀⁺ + w'(α_h)) N_s + η² B_sᵀ ∇α_h] dΩ`.
    pub fn damage_gradient(
        &self,
        params: &MaterialParams,
        u: &[f64],
        alpha: &[f64],
    ) -> Result<Vec<f64>, AssemblyError> {
        self.check_sizes(Some(u), Some(alpha))?;
        let eta2 = params.eta() * params.eta();
        let locals: Vec<Vec<f64>> = (0..self.elements.len())
            .into_par_iter()
            .map(|e| {
                let em = &self.elements[e];
                let ue = self.gather_vector(e, u);
                let ae = self.gather_scalar(e, alpha);
                let mut fe = vec![0.0; em.nodes()];
                for (q, p) in em.points.iter().enumerate() {
                    let ah = damage_at(em, q, &ae)?;
                    let strain = self.point_strain(params, em, q, &ue, ah);
                    let split = params.split(&strain);
                    let s = driving_force(&split, &strain);
                    let (_, dw) = params.local_dissipation(ah)?;
                    let local = -(1.0 - ah) * s + dw;
                    let g = em.gradient(q, &ae);
                    for (i, fi) in fe.iter_mut().enumerate() {
                        let gg: f64 = (0..3).map(|d| p.gradients[i][d] * g[d]).sum();
                        *fi += p.weight * (local * p.shape[i] + eta2 * gg);
                    }
                }
                Ok(fe)
            })
            .collect::<Result<_, AssemblyError>>()?;
        let mut f = vec![0.0; self.mesh.num_nodes()];
        for (e, fe) in locals.iter().enumerate() {
            for (a, &node) in self.mesh.element(e).iter().enumerate() {
                f[node] += fe[a];
            }
        }
        Ok(f)
    }

    /// Sum of the internal-force component over a boundary set: the support
    /// reaction (N, or N per unit thickness in 2D).
    pub fn reaction_force(
        &self,
        params: &MaterialParams,
        alpha: &[f64],
        u: &[f64],
        set: &str,
        component: usize,
    ) -> Result<f64, AssemblyError> {
        let dofs = self.displacement_dofs();
        if component >= dofs.components {
            return Err(AssemblyError::Component {
                component,
                components: dofs.components,
            });
        }
        let nodes = self.mesh.boundary_set(set)?;
        let f = self.internal_force(params, u, alpha)?;
        Ok(nodes.iter().map(|&n| f[dofs.index(n, component)]).sum())
    }

    /// Per-element energy contributions `(elastic, dissipated)`.
    pub fn element_energies(
        &self,
        params: &MaterialParams,
        u: &[f64],
        alpha: &[f64],
    ) -> Result<Vec<(f64, f64)>, AssemblyError> {
        self.check_sizes(Some(u), Some(alpha))?;
        let eta2 = params.eta() * params.eta();
        (0..self.elements.len())
            .into_par_iter()
            .map(|e| {
                let em = &self.elements[e];
                let ue = self.gather_vector(e, u);
                let ae = self.gather_scalar(e, alpha);
                let (mut el, mut dis) = (0.0, 0.0);
                for (q, p) in em.points.iter().enumerate() {
                    let ah = damage_at(em, q, &ae)?;
                    let strain = self.point_strain(params, em, q, &ue, ah);
                    el += p.weight * params.energy_density(&strain, ah)?;
                    let g = em.gradient(q, &ae);
                    let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
                    dis += p.weight * (params.local_dissipation(ah)?.0 + 0.5 * eta2 * g2);
                }
                Ok((el, dis))
            })
            .collect()
    }
}

/// Interpolated damage, tolerating round-off just outside `[0, 1]`.
fn damage_at(em: &ElementMatrices, q: usize, ae: &[f64]) -> Result<f64, AssemblyError> {
    let a = em.interpolate(q, ae);
    if (-1e-12..=1.0 + 1e-12).contains(&a) {
        Ok(a.clamp(0.0, 1.0))
    } else {
        Err(MaterialError::DamageOutOfRange(a).into())
    }
}
