//! Force-displacement and energy curves as CSV.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::solver::StepRecord;

pub const CURVE_HEADER: &str =
    "step,applied_displacement_mm,reaction_force,E,D,W,iterations,converged_flag";
const UNITS: &str = "# units: displacement mm; reaction N (per mm of thickness in 2D); E, D, W N*mm (per mm of thickness in 2D)";

pub const DIAGNOSTIC_HEADER: &str =
    "step,iterations,upper_bound_hits,fallback_solves,unsettled_signs,max_half_step_increase";

pub fn curves_string(history: &[StepRecord]) -> String {
    let mut s = format!("{UNITS}\n{CURVE_HEADER}\n");
    for r in history {
        let e = &r.energies;
        let _ = writeln!(
            s,
            "{},{:?},{:?},{:?},{:?},{:?},{},{}",
            r.step,
            r.applied,
            e.reaction,
            e.elastic,
            e.dissipated,
            e.total,
            r.iterations,
            u8::from(r.converged)
        );
    }
    s
}

pub fn write_curves(history: &[StepRecord], path: impl AsRef<Path>) -> io::Result<()> {
    std::fs::write(path, curves_string(history))
}

/// Largest increase of the total energy between consecutive half-steps.
pub fn max_half_step_increase(r: &StepRecord) -> f64 {
    r.half_step_energies
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn diagnostics_string(history: &[StepRecord]) -> String {
    let mut s = format!("{DIAGNOSTIC_HEADER}\n");
    for r in history {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:?}",
            r.step,
            r.iterations,
            r.upper_bound_hits,
            r.fallback_solves,
            r.unsettled_signs,
            max_half_step_increase(r).max(0.0)
        );
    }
    s
}

pub fn write_diagnostics(history: &[StepRecord], path: impl AsRef<Path>) -> io::Result<()> {
    std::fs::write(path, diagnostics_string(history))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub step: usize,
    pub applied: f64,
    pub reaction: f64,
    pub elastic: f64,
    pub dissipated: f64,
    pub total: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CurveError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("dissipated work decreases at step {step}: {before} -> {after}")]
    DissipationDecrease {
        step: usize,
        before: f64,
        after: f64,
    },
}

pub fn parse_curves(text: &str) -> Result<Vec<CurveRow>, CurveError> {
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if line != CURVE_HEADER {
                return Err(CurveError::Format {
                    line: line_no,
                    message: format!("unexpected header '{line}'"),
                });
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = |m: String| CurveError::Format {
            line: line_no,
            message: m,
        };
        if f.len() != 8 {
            return Err(bad(format!("expected 8 fields, found {}", f.len())));
        }
        let num = |k: usize| {
            f[k].parse::<f64>()
                .map_err(|e| bad(format!("field {}: {e}", k + 1)))
        };
        let int = |k: usize| {
            f[k].parse::<usize>()
                .map_err(|e| bad(format!("field {}: {e}", k + 1)))
        };
        rows.push(CurveRow {
            step: int(0)?,
            applied: num(1)?,
            reaction: num(2)?,
            elastic: num(3)?,
            dissipated: num(4)?,
            total: num(5)?,
            iterations: int(6)?,
            converged: match f[7] {
                "1" => true,
                "0" => false,
                other => return Err(bad(format!("converged flag '{other}'"))),
            },
        });
    }
    if !header_seen {
        return Err(CurveError::Format {
            line: 0,
            message: "missing header".into(),
        });
    }
    Ok(rows)
}

/// Re-reads a curve file and checks that `D` never decreases.
pub fn validate_curves(path: impl AsRef<Path>) -> Result<Vec<CurveRow>, CurveError> {
    let rows = parse_curves(&std::fs::read_to_string(path)?)?;
    for w in rows.windows(2) {
        if w[1].dissipated < w[0].dissipated {
            return Err(CurveError::DissipationDecrease {
                step: w[1].step,
                before: w[0].dissipated,
                after: w[1].dissipated,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::EnergyReport;

    fn record(step: usize, d: f64) -> StepRecord {
        StepRecord {
            step,
            applied: step as f64 * 1e-4,
            energies: EnergyReport {
                elastic: 0.5,
                dissipated: d,
                total: 0.5 + d,
                reaction: 12.5,
            },
            iterations: 3,
            converged: step != 2,
            half_step_energies: vec![1.0, 0.9, 0.9],
            upper_bound_hits: 0,
            fallback_solves: 0,
            unsettled_signs: 0,
        }
    }

    #[test]
    fn empty_history_is_header_only() {
        let s = curves_string(&[]);
        assert_eq!(s.lines().filter(|l| !l.starts_with('#')).count(), 1);
        assert!(parse_curves(&s).unwrap().is_empty());
    }

    #[test]
    fn round_trip() {
        let h: Vec<StepRecord> = (1..=3).map(|i| record(i, 0.1 * i as f64)).collect();
        let rows = parse_curves(&curves_string(&h)).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].applied, 2e-4);
        assert_eq!(rows[2].dissipated, 0.1 * 3.0);
        assert!(!rows[1].converged && rows[0].converged);
    }

    #[test]
    fn validator_catches_decreasing_dissipation() {
        let dir = std::env::temp_dir().join(format!("phasefrac-curves-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("c.csv");
        write_curves(&[record(1, 0.2), record(2, 0.1)], &p).unwrap();
        assert!(matches!(
            validate_curves(&p),
            Err(CurveError::DissipationDecrease { step: 2, .. })
        ));
        write_curves(&[record(1, 0.1), record(2, 0.2)], &p).unwrap();
        assert_eq!(validate_curves(&p).unwrap().len(), 2);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn diagnostics_report_descent() {
        let s = diagnostics_string(&[record(1, 0.0)]);
        assert_eq!(s.lines().nth(1).unwrap(), "1,3,0,0,0,0.0");
    }
}
