//! Run configuration: a TOML file with `[mesh]`, `[material]`, `[load]`,
//! `[solver]` and `[output]` sections, optionally layered over a preset.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Table;

use crate::assembly::Discretization;
use crate::material::{DissipationModel, MaterialError, MaterialParams, PlaneModel};
use crate::mesh::{
    generate_notched_square, load_mesh, BandRefinement, Mesh, MeshError, NotchedSquareSpec,
};
use crate::solver::{
    ConvergenceNorm, DamageSolve, Irreversibility, LinearConfig, LinearSolverKind, LoadProgram,
    Prescription, Simulation, SolverError, StaggeredConfig,
};
use crate::sparse::Preconditioner;

pub const PRESETS: &[(&str, &str)] = &[
    (
        "experiment1-2d",
        include_str!("../../presets/experiment1-2d.toml"),
    ),
    (
        "experiment2-2d",
        include_str!("../../presets/experiment2-2d.toml"),
    ),
    (
        "experiment1-3d",
        include_str!("../../presets/experiment1-3d.toml"),
    ),
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Parse(String),
    #[error("invalid value for '{key}': {message}")]
    Invalid { key: String, message: String },
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct MeshSection {
    file: Option<PathBuf>,
    side: Option<f64>,
    notch_start: Option<[f64; 2]>,
    notch_end: Option<[f64; 2]>,
    h: Option<f64>,
    thickness: Option<f64>,
    layers: Option<usize>,
    refinement: Option<RefinementSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RefinementSection {
    half_width: f64,
    h: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct MaterialSection {
    bulk_modulus: f64,
    poisson_ratio: f64,
    w0: f64,
    eta: f64,
    dissipation: Option<String>,
    plane: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
enum ComponentSpec {
    Index(usize),
    Name(String),
}

impl ComponentSpec {
    fn index(&self, key: &str) -> Result<usize, ConfigError> {
        match self {
            ComponentSpec::Index(i) if *i < 3 => Ok(*i),
            ComponentSpec::Name(n) if n == "x" => Ok(0),
            ComponentSpec::Name(n) if n == "y" => Ok(1),
            ComponentSpec::Name(n) if n == "z" => Ok(2),
            other => Err(invalid(key, format!("{other:?} is not one of x, y, z"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct DrivenSection {
    set: String,
    component: ComponentSpec,
    factor: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct FixedSection {
    set: String,
    components: Vec<ComponentSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct LoadSection {
    increment: f64,
    #[serde(rename = "final")]
    final_value: f64,
    driven: Vec<DrivenSection>,
    #[serde(default)]
    fixed: Vec<FixedSection>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    tol_u: Option<f64>,
    tol_alpha: Option<f64>,
    max_iterations: Option<usize>,
    linear_solver: Option<String>,
    preconditioner: Option<String>,
    linear_tolerance: Option<f64>,
    damage_solve: Option<String>,
    irreversibility: Option<String>,
    norm: Option<String>,
    sign_passes: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
    snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    mesh: MeshSection,
    material: MaterialSection,
    load: LoadSection,
    #[serde(default)]
    solver: SolverSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Generated(NotchedSquareSpec),
    File(PathBuf),
}

/// Fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub material: MaterialParams,
    pub plane: PlaneModel,
    pub program: LoadProgram,
    pub solver: StaggeredConfig,
    pub output_dir: PathBuf,
    pub snapshot_every: usize,
    /// The merged configuration as TOML, for provenance in output folders.
    pub resolved: String,
}

pub fn preset(name: &str) -> Result<&'static str, ConfigError> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))
}

fn parse_table(text: &str, origin: &str) -> Result<Table, ConfigError> {
    text.parse::<Table>()
        .map_err(|e| ConfigError::Parse(format!("{origin}: {e}")))
}

/// Overlays `top` onto `base`; nested tables merge, everything else replaces.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Reads a config file, optionally layered over a named preset.
pub fn parse_config(
    path: Option<&Path>,
    preset_name: Option<&str>,
) -> Result<RunConfig, ConfigError> {
    let mut table = match preset_name {
        Some(name) => parse_table(preset(name)?, name)?,
        None => Table::new(),
    };
    let mut base_dir = PathBuf::from(".");
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
            path: p.to_path_buf(),
            source,
        })?;
        merge(&mut table, parse_table(&text, &p.display().to_string())?);
        if let Some(d) = p.parent() {
            base_dir = d.to_path_buf();
        }
    }
    if path.is_none() && preset_name.is_none() {
        return Err(ConfigError::Parse("no config file or preset given".into()));
    }
    from_table(table, &base_dir)
}

/// Parses config text; relative mesh paths resolve against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    from_table(parse_table(text, "config")?, base_dir)
}

fn from_table(table: Table, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let resolved = toml::to_string(&table).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let fc: FileConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.message().to_string()))?;

    let mesh = match fc.mesh.file {
        Some(f) => {
            let p = if f.is_absolute() { f } else { base_dir.join(f) };
            if !p.exists() {
                return Err(invalid(
                    "mesh.file",
                    format!("{} does not exist", p.display()),
                ));
            }
            MeshSource::File(p)
        }
        None => {
            let d = NotchedSquareSpec::default();
            let m = &fc.mesh;
            MeshSource::Generated(NotchedSquareSpec {
                side: m.side.unwrap_or(d.side),
                notch_start: m.notch_start.unwrap_or(d.notch_start),
                notch_end: m.notch_end.unwrap_or(d.notch_end),
                h: m.h
                    .ok_or_else(|| invalid("mesh.h", "missing (or give mesh.file)"))?,
                thickness: m.thickness,
                layers: m.layers.unwrap_or(1),
                refinement: m.refinement.as_ref().map(|r| BandRefinement {
                    half_width: r.half_width,
                    h: r.h,
                }),
            })
        }
    };

    let mat = &fc.material;
    let model = match &mat.dissipation {
        Some(s) => s
            .parse::<DissipationModel>()
            .map_err(|e| invalid("material.dissipation", e))?,
        None => DissipationModel::default(),
    };
    let plane = match mat.plane.as_deref() {
        None | Some("strain") => PlaneModel::Strain,
        Some("stress") => PlaneModel::Stress,
        Some(other) => {
            return Err(invalid(
                "material.plane",
                format!("'{other}' is not strain or stress"),
            ))
        }
    };
    let material =
        MaterialParams::new(mat.bulk_modulus, mat.poisson_ratio, mat.w0, mat.eta, model)?;

    let mut prescriptions = Vec::new();
    for d in &fc.load.driven {
        let factor = d.factor.unwrap_or(1.0);
        if !factor.is_finite() {
            return Err(invalid("load.driven.factor", "must be finite"));
        }
        prescriptions.push(Prescription::driven(
            &d.set,
            d.component.index("load.driven.component")?,
            factor,
        ));
    }
    for f in &fc.load.fixed {
        for c in &f.components {
            prescriptions.push(Prescription::fixed(
                &f.set,
                c.index("load.fixed.components")?,
            ));
        }
    }
    let mut program = LoadProgram::monotonic(prescriptions, fc.load.increment, fc.load.final_value)
        .map_err(|e| invalid("load", e.to_string()))?;
    let snapshot_every = fc.output.snapshot_every.unwrap_or(0);
    program.snapshot_every = snapshot_every;

    let s = &fc.solver;
    let d = StaggeredConfig::default();
    let solver = StaggeredConfig {
        tol_u: s.tol_u,
        tol_alpha: s.tol_alpha.unwrap_or(d.tol_alpha),
        max_iterations: s.max_iterations.unwrap_or(d.max_iterations),
        linear: LinearConfig {
            kind: match &s.linear_solver {
                Some(v) => v
                    .parse::<LinearSolverKind>()
                    .map_err(|e| invalid("solver.linear_solver", e))?,
                None => d.linear.kind,
            },
            preconditioner: match &s.preconditioner {
                Some(v) => v
                    .parse::<Preconditioner>()
                    .map_err(|e| invalid("solver.preconditioner", e))?,
                None => d.linear.preconditioner,
            },
            tolerance: s.linear_tolerance.unwrap_or(d.linear.tolerance),
            max_iterations: None,
        },
        damage_solve: match &s.damage_solve {
            Some(v) => v
                .parse::<DamageSolve>()
                .map_err(|e| invalid("solver.damage_solve", e))?,
            None => d.damage_solve,
        },
        irreversibility: match &s.irreversibility {
            Some(v) => v
                .parse::<Irreversibility>()
                .map_err(|e| invalid("solver.irreversibility", e))?,
            None => d.irreversibility,
        },
        norm: match &s.norm {
            Some(v) => v
                .parse::<ConvergenceNorm>()
                .map_err(|e| invalid("solver.norm", e))?,
            None => d.norm,
        },
        sign_passes: s.sign_passes.unwrap_or(d.sign_passes),
    };
    solver.validate()?;

    Ok(RunConfig {
        mesh,
        material,
        plane,
        program,
        solver,
        output_dir: fc.output.dir.unwrap_or_else(|| PathBuf::from("out")),
        snapshot_every,
        resolved,
    })
}

impl RunConfig {
    pub fn build_mesh(&self) -> Result<Mesh, ConfigError> {
        let mesh = match &self.mesh {
            MeshSource::Generated(spec) => generate_notched_square(spec)?,
            MeshSource::File(p) => load_mesh(p)?,
        };
        if mesh.dim() == 3 && self.plane == PlaneModel::Stress {
            return Err(invalid(
                "material.plane",
                "plane stress applies to 2D meshes only",
            ));
        }
        Ok(mesh)
    }

    pub fn simulation(&self) -> Result<Simulation, ConfigError> {
        let disc =
            Discretization::new(self.build_mesh()?, self.plane).map_err(SolverError::from)?;
        Ok(Simulation::new(
            disc,
            self.material,
            self.program.clone(),
            self.solver.clone(),
        )?)
    }
}
