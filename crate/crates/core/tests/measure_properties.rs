use proptest::prelude::*;
use smolcircle_core::measures::{
    moment, project, rho_distance, Atom, EmpiricalMeasure, GridMeasure, MassGrid, Measure, TestFamily,
};
use smolcircle_core::particle::{InitialProfile, ParticleSystem, SpatialDensity};

fn atoms() -> impl Strategy<Value = Vec<Atom>> {
    proptest::collection::vec((0.0f64..1.0, 0.1f64..20.0, 0.01f64..1.0), 1..12)
        .prop_map(|v| v.into_iter().map(|(x, m, w)| Atom { x, m, w }).collect())
}

proptest! {
    #[test]
    fn rho_is_a_pseudometric(a in atoms(), b in atoms(), c in atoms()) {
        let fam = TestFamily::default();
        let (a, b, c) = (
            EmpiricalMeasure::from_atoms(a).unwrap(),
            EmpiricalMeasure::from_atoms(b).unwrap(),
            EmpiricalMeasure::from_atoms(c).unwrap(),
        );
        let ab = rho_distance(&a, &b, &fam);
        let bc = rho_distance(&b, &c, &fam);
        let ac = rho_distance(&a, &c, &fam);
        prop_assert!(ac <= ab + bc + 1e-15);
        prop_assert_eq!(ab, rho_distance(&b, &a, &fam));
        prop_assert_eq!(rho_distance(&a, &a, &fam), 0.0);
        prop_assert!(ab < 1.0);
    }

    #[test]
    fn projection_keeps_the_total(a in atoms(), cells in 1usize..40, bins in 1usize..30) {
        let emp = EmpiricalMeasure::from_atoms(a).unwrap();
        let g = project(&emp, cells, &MassGrid::integer(bins).unwrap()).unwrap();
        prop_assert!((g.total() - emp.total()).abs() <= 1e-15 * emp.total().max(1.0));
    }

    #[test]
    fn moment_is_linear(a in atoms(), s in -3.0f64..3.0) {
        let emp = EmpiricalMeasure::from_atoms(a).unwrap();
        let f = |x: f64, m: f64| (6.0 * x).sin() + m;
        let g = |x: f64, m: f64| x * x - (-m).exp();
        let lhs = moment(&emp, |x, m| f(x, m) + s * g(x, m));
        let rhs = moment(&emp, f) + s * moment(&emp, g);
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }
}

#[test]
fn uniform_projection_is_within_binomial_noise() {
    let n = 10_000;
    let j = 16;
    let p = 1.0 / j as f64;
    let bound = 4.0 * (p * (1.0 - p) / n as f64).sqrt();
    for seed in [1u64, 2, 3] {
        let sys = ParticleSystem::sample_initial(n, &InitialProfile::Monodisperse(SpatialDensity::Uniform), seed)
            .unwrap();
        let g = project(&sys.empirical_measure(), j, &MassGrid::integer(4).unwrap()).unwrap();
        let space = g.space_marginal();
        let worst = space.iter().map(|v| (v - p).abs()).fold(0.0, f64::max);
        assert!(worst < bound, "seed {seed}: {worst} vs {bound}");
        assert_eq!(g.mass_marginal()[0], g.total());
    }
}

#[test]
fn rho_decreases_as_point_masses_approach() {
    let fam = TestFamily::default();
    let at = |x: f64| EmpiricalMeasure::from_atoms(vec![Atom { x, m: 1.0, w: 1.0 }]).unwrap();
    let d: Vec<f64> = [0.1, 0.05, 0.01, 0.001].iter().map(|delta| rho_distance(&at(0.3), &at(0.3 + delta), &fam)).collect();
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
    // across the seam of the circle
    let wrap = rho_distance(&at(0.995), &at(0.005), &fam);
    assert!(wrap < d[1], "{wrap}");
}

#[test]
fn monodisperse_projection_counts_particles() {
    let n = 4;
    let atoms: Vec<Atom> = (0..n).map(|k| Atom { x: k as f64 / n as f64, m: 1.0, w: 1.0 / n as f64 }).collect();
    let g = project(&EmpiricalMeasure::from_atoms(atoms).unwrap(), 4, &MassGrid::integer(3).unwrap()).unwrap();
    let conc = g.to_concentration().unwrap();
    assert!((conc.total() - 1.0).abs() < 1e-15);
    let back = conc.from_concentration().unwrap();
    assert_eq!(back.values(), g.values());
}

#[test]
fn grid_and_atom_pairings_agree_for_cell_centred_atoms() {
    let fam = TestFamily::default();
    let grid = MassGrid::integer(3).unwrap();
    let values = vec![0.1, 0.0, 0.2, 0.3, 0.1, 0.3];
    let g = GridMeasure::from_values(2, grid, values.clone()).unwrap();
    let atoms: Vec<Atom> = (0..6)
        .filter(|k| values[*k] > 0.0)
        .map(|k| Atom { x: 0.25 + 0.5 * (k / 3) as f64, m: (k % 3 + 1) as f64, w: values[k] })
        .collect();
    let emp = EmpiricalMeasure::from_atoms(atoms).unwrap();
    assert!(rho_distance(&g, &emp, &fam) < 1e-15);
}
