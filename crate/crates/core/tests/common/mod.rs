#![allow(dead_code)]

use std::collections::BTreeMap;

use phasefrac::assembly::Discretization;
use phasefrac::elements::ElementKind;
use phasefrac::material::{DissipationModel, MaterialParams};
use phasefrac::mesh::Mesh;
use phasefrac::solver::compute_energies;
use phasefrac::sparse::{dot, norm2};

/// Benchmark material: K = 121030 MPa, ν = 0.227, w0 = 75.94 MPa, η = 0.052.
pub fn benchmark_params(model: DissipationModel) -> MaterialParams {
    MaterialParams::new(121030.0, 0.227, 75.94, 0.052, model).unwrap()
}

/// `nx × ny` quads on the unit square with interior nodes shifted by up to
/// 0.3 of the spacing. `jitter` values in [-1, 1] are reused cyclically.
pub fn jittered_quads(nx: usize, ny: usize, jitter: &[f64]) -> Mesh {
    let mut nodes = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            let k = nodes.len();
            let interior = i > 0 && i < nx && j > 0 && j < ny;
            let (dx, dy) = if interior {
                (
                    0.3 * jitter[2 * k % jitter.len()] / nx as f64,
                    0.3 * jitter[(2 * k + 1) % jitter.len()] / ny as f64,
                )
            } else {
                (0.0, 0.0)
            };
            nodes.push([i as f64 / nx as f64 + dx, j as f64 / ny as f64 + dy, 0.0]);
        }
    }
    let mut conn = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let a = j * (nx + 1) + i;
            conn.extend([a, a + 1, a + nx + 2, a + nx + 1]);
        }
    }
    Mesh::new(ElementKind::Quad4, nodes, conn, BTreeMap::new()).unwrap()
}

/// 2×2×2 hexes on the unit cube; the centre node moves by up to 0.15.
pub fn jittered_hexes(jitter: &[f64]) -> Mesh {
    let n = 2;
    let idx = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;
    let mut nodes = Vec::new();
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                let c = nodes.len();
                let s = if i == 1 && j == 1 && k == 1 {
                    0.15
                } else {
                    0.0
                };
                nodes.push([
                    i as f64 / 2.0 + s * jitter[c % jitter.len()],
                    j as f64 / 2.0 + s * jitter[(c + 1) % jitter.len()],
                    k as f64 / 2.0 + s * jitter[(c + 2) % jitter.len()],
                ]);
            }
        }
    }
    let mut conn = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                conn.extend([
                    idx(i, j, k),
                    idx(i + 1, j, k),
                    idx(i + 1, j + 1, k),
                    idx(i, j + 1, k),
                    idx(i, j, k + 1),
                    idx(i + 1, j, k + 1),
                    idx(i + 1, j + 1, k + 1),
                    idx(i, j + 1, k + 1),
                ]);
            }
        }
    }
    Mesh::new(ElementKind::Hex8, nodes, conn, BTreeMap::new()).unwrap()
}

fn total(disc: &Discretization, p: &MaterialParams, u: &[f64], a: &[f64]) -> f64 {
    compute_energies(disc, p, u, a).unwrap().total
}

fn axpy(x: &[f64], s: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + s * b).collect()
}

/// Relative errors of `f_u·ũ` and `f_α·α̃` against central differences of
/// the total energy.
pub fn residual_errors(
    disc: &Discretization,
    p: &MaterialParams,
    u: &[f64],
    a: &[f64],
    du: &[f64],
    da: &[f64],
) -> (f64, f64) {
    let h = 1e-5;
    let fu = disc.internal_force(p, u, a).unwrap();
    let fd_u =
        (total(disc, p, &axpy(u, h, du), a) - total(disc, p, &axpy(u, -h, du), a)) / (2.0 * h);
    let an_u = dot(&fu, du);
    let hk = 1e-4;
    let fa = disc.damage_gradient(p, u, a).unwrap();
    let fd_a =
        (total(disc, p, u, &axpy(a, hk, da)) - total(disc, p, u, &axpy(a, -hk, da))) / (2.0 * hk);
    let an_a = dot(&fa, da);
    let ru = an_u.abs().max(1e-3 * norm2(&fu) * norm2(du)).max(1e-300);
    let ra = an_a.abs().max(1e-3 * norm2(&fa) * norm2(da)).max(1e-300);
    ((fd_u - an_u).abs() / ru, (fd_a - an_a).abs() / ra)
}
