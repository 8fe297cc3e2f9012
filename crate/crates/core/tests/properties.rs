mod common;

use proptest::prelude::*;

use phasefrac::assembly::Discretization;
use phasefrac::material::{DissipationModel, PlaneModel};
use phasefrac::mesh::{generate_notched_square, NotchedSquareSpec};
use phasefrac::solver::{LoadProgram, Prescription, Simulation, StaggeredConfig};
use phasefrac::sparse::dot;

use common::{benchmark_params as params, jittered_hexes, jittered_quads, residual_errors};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn residuals_are_energy_derivatives_2d(
        jitter in proptest::collection::vec(-1.0f64..1.0, 30),
        uvals in proptest::collection::vec(-1e-3f64..1e-3, 30),
        dirs in proptest::collection::vec(-1e-3f64..1e-3, 30),
        avals in proptest::collection::vec(0.05f64..0.95, 15),
        adirs in proptest::collection::vec(-1.0f64..1.0, 15),
        no_threshold in any::<bool>(),
    ) {
        let model = if no_threshold { DissipationModel::NoThreshold } else { DissipationModel::Threshold };
        let p = params(model);
        let disc = Discretization::new(jittered_quads(4, 2, &jitter), PlaneModel::Strain).unwrap();
        let (eu, ea) = residual_errors(&disc, &p, &uvals, &avals, &dirs, &adirs);
        prop_assert!(eu < 1e-6, "displacement residual error {eu}");
        prop_assert!(ea < 1e-6, "damage residual error {ea}");
    }

    #[test]
    fn residuals_are_energy_derivatives_3d(
        jitter in proptest::collection::vec(-1.0f64..1.0, 27),
        uvals in proptest::collection::vec(-1e-3f64..1e-3, 81),
        dirs in proptest::collection::vec(-1e-3f64..1e-3, 81),
        avals in proptest::collection::vec(0.05f64..0.95, 27),
        adirs in proptest::collection::vec(-1.0f64..1.0, 27),
    ) {
        let p = params(DissipationModel::Threshold);
        let disc = Discretization::new(jittered_hexes(&jitter), PlaneModel::Strain).unwrap();
        let (eu, ea) = residual_errors(&disc, &p, &uvals, &avals, &dirs, &adirs);
        prop_assert!(eu < 1e-6, "displacement residual error {eu}");
        prop_assert!(ea < 1e-6, "damage residual error {ea}");
    }

    #[test]
    fn rigid_modes_lie_in_the_stiffness_kernel(
        jitter in proptest::collection::vec(-1.0f64..1.0, 30),
        avals in proptest::collection::vec(0.0f64..1.0, 15),
        uvals in proptest::collection::vec(-1e-3f64..1e-3, 30),
    ) {
        let p = params(DissipationModel::Threshold);
        let disc = Discretization::new(jittered_quads(4, 2, &jitter), PlaneModel::Strain).unwrap();
        let k = disc.assemble_elasticity(&p, &avals, &uvals).unwrap().matrix;
        let scale = k.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let nodes = disc.mesh().nodes();
        let modes = [
            nodes.iter().flat_map(|_| [1.0, 0.0]).collect::<Vec<_>>(),
            nodes.iter().flat_map(|_| [0.0, 1.0]).collect(),
            nodes.iter().flat_map(|x| [-x[1], x[0]]).collect(),
        ];
        for m in &modes {
            let r = k.apply(m);
            prop_assert!(r.iter().all(|v| v.abs() <= 1e-10 * scale));
        }
    }

    #[test]
    fn damage_matrix_is_symmetric_positive_definite(
        jitter in proptest::collection::vec(-1.0f64..1.0, 30),
        uvals in proptest::collection::vec(-2e-3f64..2e-3, 30),
        avals in proptest::collection::vec(0.0f64..1.0, 15),
        x in proptest::collection::vec(-1.0f64..1.0, 15),
    ) {
        let p = params(DissipationModel::Threshold);
        let disc = Discretization::new(jittered_quads(4, 2, &jitter), PlaneModel::Strain).unwrap();
        let a = disc.assemble_damage(&p, &uvals, &avals).unwrap().matrix;
        prop_assert!(a.asymmetry() <= 1e-14);
        prop_assume!(x.iter().any(|v| v.abs() > 1e-3));
        prop_assert!(dot(&x, &a.apply(&x)) > 0.0);
    }

    #[test]
    fn assembly_is_bitwise_reproducible(
        uvals in proptest::collection::vec(-1e-3f64..1e-3, 54),
        avals in proptest::collection::vec(0.0f64..1.0, 27),
    ) {
        let p = params(DissipationModel::Threshold);
        let mesh = generate_notched_square(&NotchedSquareSpec { h: 0.25, ..Default::default() }).unwrap();
        let disc = Discretization::new(mesh, PlaneModel::Strain).unwrap();
        let a = disc.assemble_elasticity(&p, &avals, &uvals).unwrap();
        let b = disc.assemble_elasticity(&p, &avals, &uvals).unwrap();
        prop_assert_eq!(a.matrix.values(), b.matrix.values());
        let c = disc.assemble_damage(&p, &uvals, &avals).unwrap();
        let d = disc.assemble_damage(&p, &uvals, &avals).unwrap();
        prop_assert_eq!(c.rhs, d.rhs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Irreversibility, bounds, monotone dissipation and half-step descent
    /// on short random load programs, including unloading.
    #[test]
    fn staggered_runs_respect_invariants(
        increments in proptest::collection::vec(-1e-3f64..3e-3, 2..6),
        shear in any::<bool>(),
        no_threshold in any::<bool>(),
    ) {
        let model = if no_threshold { DissipationModel::NoThreshold } else { DissipationModel::Threshold };
        let mesh = generate_notched_square(&NotchedSquareSpec { h: 0.125, ..Default::default() }).unwrap();
        let disc = Discretization::new(mesh, PlaneModel::Strain).unwrap();
        let mut steps = Vec::new();
        let mut v = 3e-3;
        for d in increments {
            v += d;
            steps.push(v);
        }
        let comp = if shear { 0 } else { 1 };
        let program = LoadProgram::new(
            vec![
                Prescription::driven("top", comp, 1.0),
                Prescription::fixed("top", 1 - comp),
                Prescription::fixed("bottom", 0),
                Prescription::fixed("bottom", 1),
            ],
            steps,
        ).unwrap();
        let mut sim = Simulation::new(disc, params(model), program, StaggeredConfig::default()).unwrap();
        let mut prev = sim.damage().to_vec();
        let mut prev_d = 0.0;
        while let Some(r) = sim.advance().unwrap() {
            let r = r.clone();
            for w in r.half_step_energies.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-10, "energy rose {} -> {}", w[0], w[1]);
            }
            prop_assert!(r.energies.dissipated >= prev_d - 1e-14);
            prev_d = r.energies.dissipated;
            for (a, b) in sim.damage().iter().zip(&prev) {
                prop_assert!(a >= b && (0.0..=1.0).contains(a));
            }
            prev = sim.damage().to_vec();
        }
    }
}
