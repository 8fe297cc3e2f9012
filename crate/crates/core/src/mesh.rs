//! Homogeneous unstructured meshes, the notched-square generator used by the
//! benchmarks, and a plain-text mesh format.
//!
//! Text format (whitespace separated, `#` starts a comment line):
//!
//! ```text
//! dim nnodes nelems kind
//! x y [z]                 # nnodes lines
//! n0 n1 ...               # nelems lines, 0-based node indices
//! set <name> <count>
//! i0 i1 ...               # count indices, any line breaking
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::elements::{compute_element_matrices, ElementError, ElementKind, QuadratureRule};

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("unsupported notch geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("degenerate mesh: {0}")]
    Degenerate(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid mesh: {0}")]
    Validation(String),
    #[error("element {element}: {source}")]
    Element {
        element: usize,
        #[source]
        source: ElementError,
    },
    #[error("unknown boundary set `{0}`")]
    UnknownSet(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mesh of a single element kind with named boundary node sets.
/// Coordinates are in mm; 2D meshes keep `z = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    kind: ElementKind,
    nodes: Vec<[f64; 3]>,
    connectivity: Vec<usize>,
    boundary_sets: BTreeMap<String, Vec<usize>>,
}

impl Mesh {
    /// Builds and validates a mesh. `connectivity` is flat, `kind.nodes()`
    /// indices per element.
    pub fn new(
        kind: ElementKind,
        nodes: Vec<[f64; 3]>,
        connectivity: Vec<usize>,
        boundary_sets: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self, MeshError> {
        let mesh = Mesh {
            kind,
            nodes,
            connectivity,
            boundary_sets,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<(), MeshError> {
        let npe = self.kind.nodes();
        if self.connectivity.len() % npe != 0 {
            return Err(MeshError::Validation(format!(
                "connectivity length {} is not a multiple of {npe}",
                self.connectivity.len()
            )));
        }
        if self.nodes.iter().flatten().any(|c| !c.is_finite()) {
            return Err(MeshError::Validation("non-finite node coordinate".into()));
        }
        let n = self.nodes.len();
        if let Some((pos, &bad)) = self.connectivity.iter().enumerate().find(|(_, &i)| i >= n) {
            return Err(MeshError::Validation(format!(
                "element {} references node {bad}, but the mesh has {n} nodes",
                pos / npe
            )));
        }
        for (name, set) in &self.boundary_sets {
            if set.is_empty() {
                return Err(MeshError::Validation(format!(
                    "boundary set `{name}` is empty"
                )));
            }
            if let Some(&bad) = set.iter().find(|&&i| i >= n) {
                return Err(MeshError::Validation(format!(
                    "boundary set `{name}` references node {bad}, but the mesh has {n} nodes"
                )));
            }
        }
        let rule = QuadratureRule::default_for(self.kind);
        for e in 0..self.num_elements() {
            compute_element_matrices(self.kind, &self.element_coords(e), &rule)
                .map_err(|source| MeshError::Element { element: e, source })?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.connectivity.len() / self.kind.nodes()
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let npe = self.kind.nodes();
        &self.connectivity[e * npe..(e + 1) * npe]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.connectivity.chunks_exact(self.kind.nodes())
    }

    pub fn element_coords(&self, e: usize) -> Vec<[f64; 3]> {
        self.element(e).iter().map(|&i| self.nodes[i]).collect()
    }

    pub fn boundary_sets(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.boundary_sets
    }

    pub fn boundary_set(&self, name: &str) -> Result<&[usize], MeshError> {
        self.boundary_sets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| MeshError::UnknownSet(name.to_string()))
    }

    /// Diagonal of the axis-aligned bounding box.
    pub fn diameter(&self) -> f64 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.nodes {
            for d in 0..3 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (0..3)
            .map(|d| (hi[d] - lo[d]).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Sum of element volumes by quadrature.
    pub fn volume(&self) -> f64 {
        let rule = QuadratureRule::default_for(self.kind);
        (0..self.num_elements())
            .map(|e| {
                compute_element_matrices(self.kind, &self.element_coords(e), &rule)
                    .map(|m| m.volume())
                    .unwrap_or(0.0)
            })
            .sum()
    }

    pub fn to_text(&self) -> String {
        let dim = self.dim();
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} {} {} {}",
            dim,
            self.num_nodes(),
            self.num_elements(),
            self.kind
        );
        for p in &self.nodes {
            let coords: Vec<String> = p[..dim].iter().map(|c| format!("{c:?}")).collect();
            let _ = writeln!(s, "{}", coords.join(" "));
        }
        for el in self.elements() {
            let ids: Vec<String> = el.iter().map(usize::to_string).collect();
            let _ = writeln!(s, "{}", ids.join(" "));
        }
        for (name, set) in &self.boundary_sets {
            let _ = writeln!(s, "set {} {}", name, set.len());
            for chunk in set.chunks(16) {
                let ids: Vec<String> = chunk.iter().map(usize::to_string).collect();
                let _ = writeln!(s, "{}", ids.join(" "));
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let parse_err = |line, message: String| MeshError::Parse { line, message };

        let (hline, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty mesh file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(hline, "expected `dim nnodes nelems kind`".into()));
        }
        let num = |tok: &str, what: &str| -> Result<usize, MeshError> {
            tok.parse()
                .map_err(|_| parse_err(hline, format!("invalid {what} `{tok}`")))
        };
        let dim = num(fields[0], "dimension")?;
        let nnodes = num(fields[1], "node count")?;
        let nelems = num(fields[2], "element count")?;
        let kind: ElementKind = fields[3]
            .parse()
            .map_err(|e: ElementError| parse_err(hline, e.to_string()))?;
        if kind.dim() != dim {
            return Err(MeshError::Validation(format!(
                "dimension {dim} does not match element kind {kind}"
            )));
        }

        let mut nodes = Vec::with_capacity(nnodes);
        for _ in 0..nnodes {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| MeshError::Validation(format!("expected {nnodes} node lines")))?;
            let vals: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| parse_err(ln, format!("bad coordinate: {e}")))?;
            if vals.len() != dim {
                return Err(parse_err(
                    ln,
                    format!("expected {dim} coordinates, got {}", vals.len()),
                ));
            }
            let mut p = [0.0; 3];
            p[..dim].copy_from_slice(&vals);
            nodes.push(p);
        }

        let npe = kind.nodes();
        let mut connectivity = Vec::with_capacity(nelems * npe);
        for _ in 0..nelems {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| MeshError::Validation(format!("expected {nelems} element lines")))?;
            let ids: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|e| parse_err(ln, format!("bad node index: {e}")))?;
            if ids.len() != npe {
                return Err(parse_err(
                    ln,
                    format!("expected {npe} node indices, got {}", ids.len()),
                ));
            }
            connectivity.extend(ids);
        }

        let mut boundary_sets = BTreeMap::new();
        while let Some((ln, l)) = lines.next() {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 || f[0] != "set" {
                return Err(parse_err(ln, "expected `set <name> <count>`".into()));
            }
            let count: usize = f[2]
                .parse()
                .map_err(|_| parse_err(ln, format!("invalid set size `{}`", f[2])))?;
            let mut ids = Vec::with_capacity(count);
            while ids.len() < count {
                let (iln, il) = lines.next().ok_or_else(|| {
                    MeshError::Validation(format!("set `{}` declares {count} nodes", f[1]))
                })?;
                for t in il.split_whitespace() {
                    ids.push(
                        t.parse::<usize>()
                            .map_err(|_| parse_err(iln, format!("bad node index `{t}`")))?,
                    );
                }
            }
            if ids.len() != count {
                return Err(MeshError::Validation(format!(
                    "set `{}` declares {count} nodes but lists {}",
                    f[1],
                    ids.len()
                )));
            }
            if boundary_sets.insert(f[1].to_string(), ids).is_some() {
                return Err(parse_err(ln, format!("duplicate set `{}`", f[1])));
            }
        }
        Mesh::new(kind, nodes, connectivity, boundary_sets)
    }
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    Mesh::from_text(&std::fs::read_to_string(path)?)
}

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    std::fs::write(path, mesh.to_text())?;
    Ok(())
}

/// Strip of graded refinement around the notch line: rows within
/// `half_width` of the notch use spacing `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandRefinement {
    pub half_width: f64,
    pub h: f64,
}

/// Square specimen `[0, L]²` with a horizontal slit from the left edge.
#[derive(Debug, Clone, PartialEq)]
pub struct NotchedSquareSpec {
    pub side: f64,
    pub notch_start: [f64; 2],
    pub notch_end: [f64; 2],
    /// Target element size.
    pub h: f64,
    /// Extrusion thickness; `None` generates a 2D mesh.
    pub thickness: Option<f64>,
    pub layers: usize,
    pub refinement: Option<BandRefinement>,
}

impl Default for NotchedSquareSpec {
    fn default() -> Self {
        NotchedSquareSpec {
            side: 1.0,
            notch_start: [0.0, 0.5],
            notch_end: [0.5, 0.5],
            h: 0.02,
            thickness: None,
            layers: 1,
            refinement: None,
        }
    }
}

/// Splits `[a, b]` into equal intervals no longer than `h`; returns interior
/// and end points.
fn subdivide(a: f64, b: f64, h: f64) -> Vec<f64> {
    let n = ((b - a) / h - 1e-9).ceil().max(1.0) as usize;
    (0..=n)
        .map(|i| {
            if i == n {
                b
            } else {
                a + (b - a) * i as f64 / n as f64
            }
        })
        .collect()
}

fn concat_breaks(breaks: &[f64], sizes: &[f64]) -> Vec<f64> {
    let mut out = vec![breaks[0]];
    for (w, &h) in breaks.windows(2).zip(sizes) {
        if w[1] - w[0] > 0.0 {
            out.extend(subdivide(w[0], w[1], h).into_iter().skip(1));
        }
    }
    out
}

/// Structured quad4 (2D) or hex8 (3D) mesh of a square with a slit notch.
///
/// Nodes on the notch line left of the tip are duplicated: the original
/// belongs to the elements below the slit, the copy to the elements above.
/// The tip node stays single.
pub fn generate_notched_square(spec: &NotchedSquareSpec) -> Result<Mesh, MeshError> {
    let l = spec.side;
    if !(l > 0.0) || !(spec.h > 0.0) {
        return Err(MeshError::Degenerate("side and h must be positive".into()));
    }
    if spec.h >= l {
        return Err(MeshError::Degenerate(format!(
            "element size {} is not smaller than the side {l}",
            spec.h
        )));
    }
    let inside = |p: [f64; 2]| p.iter().all(|c| (0.0..=l).contains(c));
    if !inside(spec.notch_start) || !inside(spec.notch_end) {
        return Err(MeshError::UnsupportedGeometry(
            "notch endpoints must lie in the square".into(),
        ));
    }
    let [x0, y0] = spec.notch_start;
    let [x1, y1] = spec.notch_end;
    if y0 != y1 {
        return Err(MeshError::UnsupportedGeometry(
            "notch must be horizontal".into(),
        ));
    }
    if x0 != 0.0 {
        return Err(MeshError::UnsupportedGeometry(
            "notch must start on the left edge".into(),
        ));
    }
    if !(x1 > 0.0 && x1 < l) || !(y0 > 0.0 && y0 < l) {
        return Err(MeshError::UnsupportedGeometry(
            "notch tip must be interior".into(),
        ));
    }

    let xs = concat_breaks(&[0.0, x1, l], &[spec.h, spec.h]);
    let ys = match spec.refinement {
        None => concat_breaks(&[0.0, y0, l], &[spec.h, spec.h]),
        Some(r) => {
            if !(r.h > 0.0) || !(r.half_width > 0.0) {
                return Err(MeshError::Degenerate(
                    "refinement band needs positive sizes".into(),
                ));
            }
            let lo = (y0 - r.half_width).max(0.0);
            let hi = (y0 + r.half_width).min(l);
            concat_breaks(&[0.0, lo, y0, hi, l], &[spec.h, r.h, r.h, spec.h])
        }
    };
    let notch_row = ys
        .iter()
        .position(|&y| y == y0)
        .expect("notch row is a break point");
    let tip_col = xs
        .iter()
        .position(|&x| x == x1)
        .expect("notch tip is a break point");

    let (nx, ny) = (xs.len(), ys.len());
    let (zs, kind) = match spec.thickness {
        None => (vec![0.0], ElementKind::Quad4),
        Some(t) => {
            if !(t > 0.0) || spec.layers == 0 {
                return Err(MeshError::Degenerate(
                    "thickness and layers must be positive".into(),
                ));
            }
            let zs = (0..=spec.layers)
                .map(|k| {
                    if k == spec.layers {
                        t
                    } else {
                        t * k as f64 / spec.layers as f64
                    }
                })
                .collect();
            (zs, ElementKind::Hex8)
        }
    };
    let nz = zs.len();
    let grid = |i: usize, j: usize, k: usize| (k * ny + j) * nx + i;

    let mut nodes = Vec::with_capacity(nx * ny * nz + tip_col * nz);
    for &z in &zs {
        for &y in &ys {
            for &x in &xs {
                nodes.push([x, y, z]);
            }
        }
    }
    // copies for the upper lip, x < tip
    let mut upper = vec![usize::MAX; tip_col * nz];
    for k in 0..nz {
        for i in 0..tip_col {
            upper[k * tip_col + i] = nodes.len();
            nodes.push(nodes[grid(i, notch_row, k)]);
        }
    }
    let node_at = |i: usize, j: usize, k: usize, above_slit: bool| {
        if above_slit && j == notch_row && i < tip_col {
            upper[k * tip_col + i]
        } else {
            grid(i, j, k)
        }
    };

    let mut connectivity = Vec::new();
    let layers = if kind == ElementKind::Hex8 { nz - 1 } else { 1 };
    for k in 0..layers {
        for j in 0..ny - 1 {
            let above = j >= notch_row;
            for i in 0..nx - 1 {
                let quad = |kk: usize| {
                    [
                        node_at(i, j, kk, above),
                        node_at(i + 1, j, kk, above),
                        node_at(i + 1, j + 1, kk, above),
                        node_at(i, j + 1, kk, above),
                    ]
                };
                connectivity.extend(quad(k));
                if kind == ElementKind::Hex8 {
                    connectivity.extend(quad(k + 1));
                }
            }
        }
    }

    let mut sets: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let eps = 1e-12 * l;
    let t = spec.thickness.unwrap_or(0.0);
    for (idx, p) in nodes.iter().enumerate() {
        let mut tag = |name: &str, hit: bool| {
            if hit {
                sets.entry(name.to_string()).or_default().push(idx);
            }
        };
        tag("bottom", p[1].abs() <= eps);
        tag("top", (p[1] - l).abs() <= eps);
        tag("left", p[0].abs() <= eps);
        tag("right", (p[0] - l).abs() <= eps);
        if spec.thickness.is_some() {
            tag("front", p[2].abs() <= eps);
            tag("back", (p[2] - t).abs() <= eps);
        }
    }
    Mesh::new(kind, nodes, connectivity, sets)
}
