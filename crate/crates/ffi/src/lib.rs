//! C interface to the phasefrac solver.
//!
//! Meshes and simulations are opaque handles created and destroyed through
//! this interface. Every function returns a [`PfStatus`]; on failure the
//! message is available from [`pf_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use phasefrac::io::{self, ConfigError};
use phasefrac::mesh::{self, BandRefinement, Mesh, NotchedSquareSpec};
use phasefrac::solver::{Simulation, SolverError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfStatus {
    PfOk = 0,
    /// The load program has no steps left.
    PfFinished = 1,
    PfErrNullPointer = 2,
    PfErrInvalidArgument = 3,
    PfErrIo = 4,
    PfErrConfig = 5,
    PfErrMesh = 6,
    PfErrSolver = 7,
    PfErrBufferTooSmall = 8,
    PfErrPanic = 9,
}

/// Opaque mesh handle.
pub struct PfMesh {
    inner: Mesh,
}

/// Opaque simulation handle.
pub struct PfSimulation {
    inner: Simulation,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PfEnergies {
    pub elastic: f64,
    pub dissipated: f64,
    pub total: f64,
    pub reaction: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: PfStatus, msg: impl Into<String>) -> PfStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> PfStatus) -> PfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(PfStatus::PfErrPanic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, PfStatus> {
    if p.is_null() {
        return Err(fail(PfStatus::PfErrNullPointer, format!("{what} is null")));
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(fail(
            PfStatus::PfErrInvalidArgument,
            format!("{what} is not UTF-8"),
        )),
    }
}

fn config_status(e: &ConfigError) -> PfStatus {
    match e {
        ConfigError::Io { .. } => PfStatus::PfErrIo,
        ConfigError::Mesh(_) => PfStatus::PfErrMesh,
        ConfigError::Solver(_) => PfStatus::PfErrSolver,
        _ => PfStatus::PfErrConfig,
    }
}

fn mesh_status(e: &mesh::MeshError) -> PfStatus {
    match e {
        mesh::MeshError::Io(_) => PfStatus::PfErrIo,
        _ => PfStatus::PfErrMesh,
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length plus one.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Generates a square with an edge slit. `thickness <= 0` gives a 2D quad
/// mesh; `band_half_width <= 0` disables the refined band.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn pf_mesh_generate_notched_square(
    side: f64,
    notch_tip_x: f64,
    notch_y: f64,
    h: f64,
    thickness: f64,
    layers: usize,
    band_half_width: f64,
    band_h: f64,
    out: *mut *mut PfMesh,
) -> PfStatus {
    guard(|| {
        if out.is_null() {
            return fail(PfStatus::PfErrNullPointer, "out is null");
        }
        let spec = NotchedSquareSpec {
            side,
            notch_start: [0.0, notch_y],
            notch_end: [notch_tip_x, notch_y],
            h,
            thickness: (thickness > 0.0).then_some(thickness),
            layers: layers.max(1),
            refinement: (band_half_width > 0.0).then_some(BandRefinement {
                half_width: band_half_width,
                h: band_h,
            }),
        };
        match mesh::generate_notched_square(&spec) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(PfMesh { inner: m }));
                PfStatus::PfOk
            }
            Err(e) => fail(mesh_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_load(path: *const c_char, out: *mut *mut PfMesh) -> PfStatus {
    guard(|| {
        if out.is_null() {
            return fail(PfStatus::PfErrNullPointer, "out is null");
        }
        let p = match path_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match mesh::load_mesh(&p) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(PfMesh { inner: m }));
                PfStatus::PfOk
            }
            Err(e) => fail(mesh_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `mesh` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_save(mesh: *const PfMesh, path: *const c_char) -> PfStatus {
    guard(|| {
        let Some(m) = mesh.as_ref() else {
            return fail(PfStatus::PfErrNullPointer, "mesh is null");
        };
        let p = match path_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match mesh::save_mesh(&m.inner, &p) {
            Ok(()) => PfStatus::PfOk,
            Err(e) => fail(mesh_status(&e), e.to_string()),
        }
    })
}

/// Writes node count, element count and spatial dimension; any output
/// pointer may be null.
///
/// # Safety
/// `mesh` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_info(
    mesh: *const PfMesh,
    num_nodes: *mut usize,
    num_elements: *mut usize,
    dim: *mut usize,
) -> PfStatus {
    guard(|| {
        let Some(m) = mesh.as_ref() else {
            return fail(PfStatus::PfErrNullPointer, "mesh is null");
        };
        if !num_nodes.is_null() {
            *num_nodes = m.inner.num_nodes();
        }
        if !num_elements.is_null() {
            *num_elements = m.inner.num_elements();
        }
        if !dim.is_null() {
            *dim = m.inner.dim();
        }
        PfStatus::PfOk
    })
}

/// # Safety
/// `mesh` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_free(mesh: *mut PfMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Builds a simulation from a TOML config, a preset name, or both (the file
/// is layered over the preset). Either may be null, not both.
///
/// # Safety
/// Non-null strings must be NUL-terminated; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pf_simulation_create(
    config_path: *const c_char,
    preset: *const c_char,
    out: *mut *mut PfSimulation,
) -> PfStatus {
    guard(|| {
        if out.is_null() {
            return fail(PfStatus::PfErrNullPointer, "out is null");
        }
        let path = if config_path.is_null() {
            None
        } else {
            match path_arg(config_path, "config_path") {
                Ok(p) => Some(p),
                Err(s) => return s,
            }
        };
        let preset = if preset.is_null() {
            None
        } else {
            match CStr::from_ptr(preset).to_str() {
                Ok(s) => Some(s.to_string()),
                Err(_) => return fail(PfStatus::PfErrInvalidArgument, "preset is not UTF-8"),
            }
        };
        let built =
            io::parse_config(path.as_deref(), preset.as_deref()).and_then(|c| c.simulation());
        match built {
            Ok(sim) => {
                *out = Box::into_raw(Box::new(PfSimulation { inner: sim }));
                PfStatus::PfOk
            }
            Err(e) => fail(config_status(&e), e.to_string()),
        }
    })
}

fn solver_fail(e: SolverError) -> PfStatus {
    fail(PfStatus::PfErrSolver, e.to_string())
}

/// Runs the next load step. Returns `PF_FINISHED` when no steps remain.
/// `converged` (may be null) receives 1 if the step met both tolerances.
///
/// # Safety
/// `sim` must be a live handle; `converged` null or writable.
#[no_mangle]
pub unsafe extern "C" fn pf_simulation_advance(
    sim: *mut PfSimulation,
    converged: *mut i32,
) -> PfStatus {
    guard(|| {
        let Some(s) = sim.as_mut() else {
            return fail(PfStatus::PfErrNullPointer, "sim is null");
        };
        match s.inner.advance() {
            Ok(Some(r)) => {
                if !converged.is_null() {
                    *converged = i32::from(r.converged);
                }
                PfStatus::PfOk
            }
            Ok(None) => PfStatus::PfFinished,
            Err(e) => solver_fail(e),
        }
    })
}

/// Runs all remaining steps; `all_converged` (may be null) receives 1 if
/// every step of the run converged.
///
/// # Safety
/// `sim` must be a live handle; `all_converged` null or writable.
#[no_mangle]
pub unsafe extern "C" fn pf_simulation_run(
    sim: *mut PfSimulation,
    all_converged: *mut i32,
) -> PfStatus {
    guard(|| {
        let Some(s) = sim.as_mut() else {
            return fail(PfStatus::PfErrNullPointer, "sim is null");
        };
        loop {
            match s.inner.advance() {
                Ok(Some(_)) => {}
                Ok(None) => break,
                Err(e) => return solver_fail(e),
            }
        }
        if !all_converged.is_null() {
            *all_converged = i32::from(s.inner.history().iter().all(|r| r.converged));
        }
        PfStatus::PfOk
    })
}

/// Steps completed so far and steps in the program.
///
/// # Safety
/// `sim` must be a live handle; non-null outputs writable.
#[no_mangle]
pub unsafe extern "C" fn pf_simulation_progress(
    sim: *const PfSimulation,
    completed: *mut usize,
    total: *mut usize,
) -> PfStatus {
    guard(|| {
        let Some(s) = sim.as_ref() else {
            return fail(PfStatus::PfErrNullPointer, "sim is null");
        };
        if !completed.is_null() {
            *completed = s.inner.history().len();
        }
        if !total.is_null() {
            *total = s.inner.program().len();
        }
        PfStatus::PfOk
    })
}

/// Energies (N·mm) and reaction (N) of the current state.
///
/// # Safety
/// `sim` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pf_simulation_energies(
    sim: *const PfSimulation,
    out: *mut PfEnergies,
) -> PfStatus {
    guard(|| {
        let Some(s) = sim.as_ref() else {
            return fail(PfStatus::PfErrNullPointer, "sim is null");
        };
        if out.is_null() {
            return fail(PfStatus::PfErrNullPointer, "out is null");
        }
        match s.inner.energies() {
            Ok(r) => {
                *out = PfEnergies {
                    elastic: r.elastic,
                    dissipated: r.dissipated,
                    total: r.total,
                    reaction: r.reaction,
                };
                PfStatus::PfOk
            }
            Err(e) => solver_fail(e),
        }
    })
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize, required: *mut usize) -> PfStatus {
    if !required.is_null() {
        *required = src.len();
    }
    if buf.is_null() {
        return if required.is_null() {
            fail(PfStatus::PfErrNullPointer, "buffer is null")
        } else {
            PfStatus::PfOk
        };
    }
    if len < src.len() {
        return fail(
            PfStatus::PfErrBufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        );
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    PfStatus::PfOk
}

/// Copies nodal damage. With `buf` null only `required` is written.
///
/// # Safety
/// `sim` must be a live handle; `buf` null or `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pf_simulation_damage(
    sim: *const PfSimulation,
    buf: *mut f64,
    len: usize,
    required: *mut usize,
) -> PfStatus {
    guard(|| match sim.as_ref() {
        Some(s) => copy_out(s.inner.damage(), buf, len, required),
        None => fail(PfStatus::PfErrNullPointer, "sim is null"),
    })
}

/// Copies nodal displacement, interleaved by node (`dim` values per node).
///
/// # Safety
/// `sim` must be a live handle; `buf` null or `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pf_simulation_displacement(
    sim: *const PfSimulation,
    buf: *mut f64,
    len: usize,
    required: *mut usize,
) -> PfStatus {
    guard(|| match sim.as_ref() {
        Some(s) => copy_out(s.inner.displacement(), buf, len, required),
        None => fail(PfStatus::PfErrNullPointer, "sim is null"),
    })
}

/// Writes a legacy VTK snapshot of the current state.
///
/// # Safety
/// `sim` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pf_simulation_write_vtk(
    sim: *const PfSimulation,
    path: *const c_char,
) -> PfStatus {
    guard(|| {
        let Some(s) = sim.as_ref() else {
            return fail(PfStatus::PfErrNullPointer, "sim is null");
        };
        let p = match path_arg(path, "path") {
            Ok(p) => p,
            Err(st) => return st,
        };
        let sim = &s.inner;
        match io::write_vtk(
            sim.discretization().mesh(),
            sim.displacement(),
            sim.damage(),
            &p,
        ) {
            Ok(()) => PfStatus::PfOk,
            Err(e) => fail(PfStatus::PfErrIo, format!("{}: {e}", p.display())),
        }
    })
}

/// # Safety
/// `sim` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn pf_simulation_free(sim: *mut PfSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
