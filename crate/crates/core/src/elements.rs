//! Isoparametric elements: shape functions, quadrature rules and the
//! strain-displacement (`B_v`) and scalar-gradient (`B_s`) operators.
//!
//! Strains are stored in Voigt order `(ε_x, ε_y, ε_z, γ_xy, γ_yz, γ_zx)` with
//! engineering shear. Two-dimensional elements produce the in-plane rows
//! `(ε_x, ε_y, γ_xy)`; the out-of-plane components are completed by the
//! material layer.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix2, Matrix3};

use crate::material::Voigt;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ElementError {
    #[error("unsupported element kind `{0}`")]
    UnsupportedKind(String),
    #[error("element expects {expected} nodes, got {got}")]
    NodeCount { expected: usize, got: usize },
    #[error(
        "inverted or degenerate element: jacobian determinant {det:e} at quadrature point {point}"
    )]
    Inverted { det: f64, point: usize },
}

/// Element shapes supported by the solver. A mesh uses a single kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Tri3,
    Quad4,
    Tet4,
    Hex8,
}

impl ElementKind {
    pub fn dim(self) -> usize {
        match self {
            ElementKind::Tri3 | ElementKind::Quad4 => 2,
            ElementKind::Tet4 | ElementKind::Hex8 => 3,
        }
    }

    pub fn nodes(self) -> usize {
        match self {
            ElementKind::Tri3 => 3,
            ElementKind::Quad4 | ElementKind::Tet4 => 4,
            ElementKind::Hex8 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementKind::Tri3 => "tri3",
            ElementKind::Quad4 => "quad4",
            ElementKind::Tet4 => "tet4",
            ElementKind::Hex8 => "hex8",
        }
    }

    /// Legacy VTK cell type id.
    pub fn vtk_cell_type(self) -> u8 {
        match self {
            ElementKind::Tri3 => 5,
            ElementKind::Quad4 => 9,
            ElementKind::Tet4 => 10,
            ElementKind::Hex8 => 12,
        }
    }

    /// Volume (area in 2D) of the reference element.
    pub fn reference_volume(self) -> f64 {
        match self {
            ElementKind::Tri3 => 0.5,
            ElementKind::Quad4 => 4.0,
            ElementKind::Tet4 => 1.0 / 6.0,
            ElementKind::Hex8 => 8.0,
        }
    }

    /// Number of Voigt strain rows carried by the element's B matrix.
    pub fn strain_rows(self) -> usize {
        if self.dim() == 2 {
            3
        } else {
            6
        }
    }

    /// Reference coordinates of the element vertices.
    pub fn reference_nodes(self) -> &'static [[f64; 3]] {
        match self {
            ElementKind::Tri3 => &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            ElementKind::Quad4 => &[
                [-1.0, -1.0, 0.0],
                [1.0, -1.0, 0.0],
                [1.0, 1.0, 0.0],
                [-1.0, 1.0, 0.0],
            ],
            ElementKind::Tet4 => &[
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
            ElementKind::Hex8 => &HEX8_NODES,
        }
    }
}

const HEX8_NODES: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementKind {
    type Err = ElementError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tri3" => Ok(ElementKind::Tri3),
            "quad4" => Ok(ElementKind::Quad4),
            "tet4" => Ok(ElementKind::Tet4),
            "hex8" => Ok(ElementKind::Hex8),
            other => Err(ElementError::UnsupportedKind(other.to_string())),
        }
    }
}

/// Points and weights on the reference element.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Default rule for each kind: one point for simplices, 2×2 / 2×2×2 Gauss
    /// for quadrilaterals and hexahedra.
    pub fn default_for(kind: ElementKind) -> Self {
        let g = 1.0 / 3f64.sqrt();
        match kind {
            ElementKind::Tri3 => QuadratureRule {
                points: vec![[1.0 / 3.0, 1.0 / 3.0, 0.0]],
                weights: vec![0.5],
            },
            ElementKind::Tet4 => QuadratureRule {
                points: vec![[0.25, 0.25, 0.25]],
                weights: vec![1.0 / 6.0],
            },
            ElementKind::Quad4 => {
                let mut points = Vec::with_capacity(4);
                for &eta in &[-g, g] {
                    for &xi in &[-g, g] {
                        points.push([xi, eta, 0.0]);
                    }
                }
                QuadratureRule {
                    points,
                    weights: vec![1.0; 4],
                }
            }
            ElementKind::Hex8 => {
                let mut points = Vec::with_capacity(8);
                for &zeta in &[-g, g] {
                    for &eta in &[-g, g] {
                        for &xi in &[-g, g] {
                            points.push([xi, eta, zeta]);
                        }
                    }
                }
                QuadratureRule {
                    points,
                    weights: vec![1.0; 8],
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Shape function values and reference-coordinate gradients of every node of
/// `kind` at `point`. Gradients are `[∂/∂ξ, ∂/∂η, ∂/∂ζ]`; the third entry is
/// zero for 2D kinds.
pub fn shape_and_gradients(kind: ElementKind, point: [f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
    let [xi, eta, zeta] = point;
    match kind {
        ElementKind::Tri3 => (
            vec![1.0 - xi - eta, xi, eta],
            vec![[-1.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        ),
        ElementKind::Tet4 => (
            vec![1.0 - xi - eta - zeta, xi, eta, zeta],
            vec![
                [-1.0, -1.0, -1.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
        ),
        ElementKind::Quad4 => {
            let mut n = Vec::with_capacity(4);
            let mut d = Vec::with_capacity(4);
            for r in kind.reference_nodes() {
                let (a, b) = (1.0 + xi * r[0], 1.0 + eta * r[1]);
                n.push(0.25 * a * b);
                d.push([0.25 * r[0] * b, 0.25 * a * r[1], 0.0]);
            }
            (n, d)
        }
        ElementKind::Hex8 => {
            let mut n = Vec::with_capacity(8);
            let mut d = Vec::with_capacity(8);
            for r in kind.reference_nodes() {
                let (a, b, c) = (1.0 + xi * r[0], 1.0 + eta * r[1], 1.0 + zeta * r[2]);
                n.push(0.125 * a * b * c);
                d.push([
                    0.125 * r[0] * b * c,
                    0.125 * a * r[1] * c,
                    0.125 * a * b * r[2],
                ]);
            }
            (n, d)
        }
    }
}

/// Kinematic data at one quadrature point.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraturePoint {
    /// Shape function values `N_i`.
    pub shape: Vec<f64>,
    /// Physical gradients `∂N_i/∂x`; rows of the scalar operator `B_s`.
    pub gradients: Vec<[f64; 3]>,
    /// Jacobian determinant times quadrature weight.
    pub weight: f64,
}

/// Per-element kinematic operators at every quadrature point.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMatrices {
    pub kind: ElementKind,
    pub points: Vec<QuadraturePoint>,
}

/// Maps the reference data to the physical element given by `coords`.
pub fn compute_element_matrices(
    kind: ElementKind,
    coords: &[[f64; 3]],
    rule: &QuadratureRule,
) -> Result<ElementMatrices, ElementError> {
    if coords.len() != kind.nodes() {
        return Err(ElementError::NodeCount {
            expected: kind.nodes(),
            got: coords.len(),
        });
    }
    let dim = kind.dim();
    let mut points = Vec::with_capacity(rule.len());
    for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let (shape, dref) = shape_and_gradients(kind, p);
        let (det, gradients) = if dim == 2 {
            let mut jac = Matrix2::zeros();
            for (x, d) in coords.iter().zip(&dref) {
                for i in 0..2 {
                    for j in 0..2 {
                        jac[(i, j)] += d[i] * x[j];
                    }
                }
            }
            let det = jac.determinant();
            if !(det > 0.0) {
                return Err(ElementError::Inverted { det, point: q });
            }
            let inv = jac
                .try_inverse()
                .ok_or(ElementError::Inverted { det, point: q })?;
            let grads = dref
                .iter()
                .map(|d| {
                    [
                        inv[(0, 0)] * d[0] + inv[(0, 1)] * d[1],
                        inv[(1, 0)] * d[0] + inv[(1, 1)] * d[1],
                        0.0,
                    ]
                })
                .collect();
            (det, grads)
        } else {
            let mut jac = Matrix3::zeros();
            for (x, d) in coords.iter().zip(&dref) {
                for i in 0..3 {
                    for j in 0..3 {
                        jac[(i, j)] += d[i] * x[j];
                    }
                }
            }
            let det = jac.determinant();
            if !(det > 0.0) {
                return Err(ElementError::Inverted { det, point: q });
            }
            let inv = jac
                .try_inverse()
                .ok_or(ElementError::Inverted { det, point: q })?;
            let grads = dref
                .iter()
                .map(|d| {
                    let mut g = [0.0; 3];
                    for (i, gi) in g.iter_mut().enumerate() {
                        *gi = inv[(i, 0)] * d[0] + inv[(i, 1)] * d[1] + inv[(i, 2)] * d[2];
                    }
                    g
                })
                .collect();
            (det, grads)
        };
        points.push(QuadraturePoint {
            shape,
            gradients,
            weight: det * w,
        });
    }
    Ok(ElementMatrices { kind, points })
}

impl ElementMatrices {
    pub fn nodes(&self) -> usize {
        self.kind.nodes()
    }

    pub fn volume(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }

    /// `B_v` at quadrature point `q`: 3 × 2n in 2D, 6 × 3n in 3D, with nodal
    /// displacement components interleaved per node.
    pub fn b_vector(&self, q: usize) -> DMatrix<f64> {
        let dim = self.kind.dim();
        let n = self.nodes();
        let grads = &self.points[q].gradients;
        let mut b = DMatrix::zeros(self.kind.strain_rows(), dim * n);
        for (i, g) in grads.iter().enumerate() {
            if dim == 2 {
                let c = 2 * i;
                b[(0, c)] = g[0];
                b[(1, c + 1)] = g[1];
                b[(2, c)] = g[1];
                b[(2, c + 1)] = g[0];
            } else {
                let c = 3 * i;
                b[(0, c)] = g[0];
                b[(1, c + 1)] = g[1];
                b[(2, c + 2)] = g[2];
                b[(3, c)] = g[1];
                b[(3, c + 1)] = g[0];
                b[(4, c + 1)] = g[2];
                b[(4, c + 2)] = g[1];
                b[(5, c)] = g[2];
                b[(5, c + 2)] = g[0];
            }
        }
        b
    }

    /// `B_s` at quadrature point `q`: dim × n.
    pub fn b_scalar(&self, q: usize) -> DMatrix<f64> {
        let dim = self.kind.dim();
        let grads = &self.points[q].gradients;
        DMatrix::from_fn(dim, self.nodes(), |r, c| grads[c][r])
    }

    /// Voigt strain `B_v u` at point `q` for interleaved nodal displacements.
    /// Plane problems return `ε_z = γ_yz = γ_zx = 0`.
    pub fn strain(&self, q: usize, u: &[f64]) -> Voigt {
        let dim = self.kind.dim();
        let mut du = [[0.0; 3]; 3];
        for (i, g) in self.points[q].gradients.iter().enumerate() {
            for c in 0..dim {
                let ui = u[dim * i + c];
                for d in 0..dim {
                    du[c][d] += ui * g[d];
                }
            }
        }
        [
            du[0][0],
            du[1][1],
            du[2][2],
            du[0][1] + du[1][0],
            du[1][2] + du[2][1],
            du[2][0] + du[0][2],
        ]
    }

    /// Interpolated scalar `N_s a` at point `q`.
    pub fn interpolate(&self, q: usize, nodal: &[f64]) -> f64 {
        self.points[q]
            .shape
            .iter()
            .zip(nodal)
            .map(|(n, a)| n * a)
            .sum()
    }

    /// Scalar gradient `B_s a` at point `q`.
    pub fn gradient(&self, q: usize, nodal: &[f64]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (gi, a) in self.points[q].gradients.iter().zip(nodal) {
            for d in 0..3 {
                g[d] += gi[d] * a;
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [ElementKind; 4] = [
        ElementKind::Tri3,
        ElementKind::Quad4,
        ElementKind::Tet4,
        ElementKind::Hex8,
    ];

    fn unit_coords(kind: ElementKind) -> Vec<[f64; 3]> {
        // map the reference element onto [0,1]^d
        kind.reference_nodes()
            .iter()
            .map(|r| match kind {
                ElementKind::Quad4 | ElementKind::Hex8 => [
                    0.5 * (r[0] + 1.0),
                    0.5 * (r[1] + 1.0),
                    0.5 * (r[2] + 1.0) * (kind.dim() - 2) as f64,
                ],
                _ => *r,
            })
            .collect()
    }

    #[test]
    fn quad4_center_is_symmetric() {
        let (n, _) = shape_and_gradients(ElementKind::Quad4, [0.0, 0.0, 0.0]);
        assert_eq!(n, vec![0.25; 4]);
    }

    #[test]
    fn hex8_center_is_symmetric() {
        let (n, _) = shape_and_gradients(ElementKind::Hex8, [0.0; 3]);
        assert_eq!(n, vec![0.125; 8]);
    }

    #[test]
    fn kronecker_delta_at_vertices() {
        for kind in ALL {
            for (i, r) in kind.reference_nodes().iter().enumerate() {
                let (n, _) = shape_and_gradients(kind, *r);
                for (j, v) in n.iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert_eq!(*v, expected, "{kind} node {i} shape {j}");
                }
            }
        }
    }

    #[test]
    fn weights_sum_to_reference_volume() {
        for kind in ALL {
            let rule = QuadratureRule::default_for(kind);
            let s: f64 = rule.weights.iter().sum();
            assert!((s - kind.reference_volume()).abs() < 1e-15, "{kind}");
        }
    }

    #[test]
    fn partition_of_unity_and_zero_gradient_sum() {
        for kind in ALL {
            let rule = QuadratureRule::default_for(kind);
            let em = compute_element_matrices(kind, &unit_coords(kind), &rule).unwrap();
            for p in &em.points {
                let s: f64 = p.shape.iter().sum();
                assert!((s - 1.0).abs() < 1e-14);
                for d in 0..3 {
                    let g: f64 = p.gradients.iter().map(|g| g[d]).sum();
                    assert!(g.abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn unit_quad_reproduces_unit_x_strain() {
        let kind = ElementKind::Quad4;
        let coords = unit_coords(kind);
        let em =
            compute_element_matrices(kind, &coords, &QuadratureRule::default_for(kind)).unwrap();
        let u: Vec<f64> = coords.iter().flat_map(|x| [x[0], 0.0]).collect();
        for q in 0..em.points.len() {
            let b = em.b_vector(q);
            let e = &b * nalgebra::DVector::from_column_slice(&u);
            assert!((e[0] - 1.0).abs() < 1e-14 && e[1].abs() < 1e-14 && e[2].abs() < 1e-14);
            let s = em.strain(q, &u);
            assert!((s[0] - 1.0).abs() < 1e-14 && s[1].abs() < 1e-14 && s[3].abs() < 1e-14);
        }
    }

    #[test]
    fn unit_hex_scalar_gradient_of_z() {
        let kind = ElementKind::Hex8;
        let coords = unit_coords(kind);
        let em =
            compute_element_matrices(kind, &coords, &QuadratureRule::default_for(kind)).unwrap();
        let a: Vec<f64> = coords.iter().map(|x| x[2]).collect();
        for q in 0..em.points.len() {
            let g = em.gradient(q, &a);
            assert!(g[0].abs() < 1e-14 && g[1].abs() < 1e-14 && (g[2] - 1.0).abs() < 1e-14);
            let bs = em.b_scalar(q) * nalgebra::DVector::from_column_slice(&a);
            assert!((bs[2] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn reflected_quad_is_rejected() {
        let coords = [
            [0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
            [1.0, 0.0, 0.0],
        ];
        let err = compute_element_matrices(
            ElementKind::Quad4,
            &coords,
            &QuadratureRule::default_for(ElementKind::Quad4),
        )
        .unwrap_err();
        assert!(matches!(err, ElementError::Inverted { .. }));
    }

    #[test]
    fn unknown_kind_is_rejected() {
        assert_eq!(
            "wedge6".parse::<ElementKind>(),
            Err(ElementError::UnsupportedKind("wedge6".into()))
        );
    }
}
