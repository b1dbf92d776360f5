//! The mass-flow solver against independent integrations of the discrete
//! Smoluchowski system and against the constant-kernel closed form.

use proptest::prelude::*;
use smolcircle_core::kernels::{DerivedCoefficients, DiffusivitySpec, KernelSpec};
use smolcircle_core::massflow::{
    coag_rate, constant_kernel_oracle, heat_step, picard_truncated, solve, CoagIntegrator, FieldState,
    HomogeneousState, SolverOptions, Splitting,
};
use smolcircle_core::measures::{GridMeasure, MassGrid};

/// Classical RK4 on `dn_k/dt = ½Σ_{i+j=k} K(i,j) n_i n_j - n_k Σ_j K(k,j) n_j`,
/// with concentrations, bins `1..=b` and clusters above `b` dropped.
fn smoluchowski_rk4(n0: &[f64], kernel: impl Fn(usize, usize) -> f64, t: f64, steps: usize) -> Vec<f64> {
    let b = n0.len();
    let rhs = |n: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; b];
        for k in 1..=b {
            let mut gain = 0.0;
            for i in 1..k {
                gain += 0.5 * kernel(i, k - i) * n[i - 1] * n[k - i - 1];
            }
            let loss: f64 = (1..=b).map(|j| kernel(k, j) * n[j - 1]).sum::<f64>() * n[k - 1];
            out[k - 1] = gain - loss;
        }
        out
    };
    let h = t / steps as f64;
    let mut n = n0.to_vec();
    for _ in 0..steps {
        let k1 = rhs(&n);
        let y: Vec<f64> = n.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
        let k2 = rhs(&y);
        let y: Vec<f64> = n.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
        let k3 = rhs(&y);
        let y: Vec<f64> = n.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
        let k4 = rhs(&y);
        for i in 0..b {
            n[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    n
}

fn constant_coeffs(rate: f64, a0: f64) -> DerivedCoefficients {
    DerivedCoefficients::new(KernelSpec::constant(rate).unwrap(), DiffusivitySpec::constant(a0).unwrap())
}

#[test]
fn closed_form_agrees_with_direct_integration() {
    // K0·n0·t = 2, truncation at 200 sizes costs far below 1e-6
    let b = 200;
    let mut n0 = vec![0.0; b];
    n0[0] = 1.0;
    let direct = smoluchowski_rk4(&n0, |_, _| 2.0, 1.0, 4000);
    let closed = constant_kernel_oracle(1.0, 2.0, 1.0, 20).unwrap();
    for k in 0..20 {
        let rel = (direct[k] - closed[k]).abs() / closed[k];
        assert!(rel < 1e-6, "k = {}: {} vs {}", k + 1, direct[k], closed[k]);
    }
}

#[test]
fn mass_flow_matches_smoluchowski_with_kappa() {
    // power-sum kernel, power-law diffusivity, B = 16, one cell
    let coeffs = DerivedCoefficients::new(
        KernelSpec::power_sum(0.7, 0.5).unwrap(),
        DiffusivitySpec::power_law(1.0).unwrap(),
    );
    let b = 16;
    let grid = MassGrid::integer(b).unwrap();
    let mut conc = vec![0.0; b];
    conc[0] = 0.8;
    conc[1] = 0.1;
    let mass: Vec<f64> = conc.iter().enumerate().map(|(k, c)| c * (k + 1) as f64).collect();
    let field = HomogeneousState::new(grid, mass).unwrap().to_field();
    let mut opts = SolverOptions::new(1e-3);
    opts.positivity_clip = false;
    let t = 0.5;
    let out = solve(&field, t, &coeffs, &opts, &[t]).unwrap();
    let got = out.snapshots[0].measure.to_concentration().unwrap();

    // the solver sends sums past bin 16 into bin 16; the oracle drops them,
    // so compare the bins a pair from inside the grid can reach exactly
    let kernel = |i: usize, j: usize| coeffs.kappa_eval(i as f64, j as f64);
    let mut wide = vec![0.0; 4 * b];
    wide[..b].copy_from_slice(&conc);
    let want = smoluchowski_rk4(&wide, kernel, t, 2000);
    for k in 0..8 {
        let rel = (got.values()[k] - want[k]).abs() / want[k];
        assert!(rel < 1e-5, "bin {}: {} vs {}", k + 1, got.values()[k], want[k]);
    }
}

#[test]
fn generator_form_matches_symmetrised_double_sum() {
    let coeffs = DerivedCoefficients::new(
        KernelSpec::power_sum(0.3, 0.25).unwrap(),
        DiffusivitySpec::power_law(0.5).unwrap(),
    );
    let b = 24;
    let grid = MassGrid::integer(b).unwrap();
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..20 {
        // keep the top half empty so no pair overflows the grid
        let u: Vec<f64> = (0..b).map(|k| if k < b / 2 { next() } else { 0.0 }).collect();
        let rate = coag_rate(&u, &grid, &coeffs).unwrap();
        let lhs: f64 = rate.iter().enumerate().map(|(k, r)| (k + 1) as f64 * r).sum();
        // ½ ΣΣ [(m+m')f(m+m') - m f(m) - m' f(m')]·κ(m,m')/(m m')·u(m)u(m')
        let f = |m: f64| m;
        let mut rhs = 0.0;
        for i in 1..=b {
            for j in 1..=b {
                let (mi, mj) = (i as f64, j as f64);
                let w = coeffs.kappa_eval(mi, mj) / (mi * mj) * u[i - 1] * u[j - 1];
                rhs += 0.5 * w * ((mi + mj) * f(mi + mj) - mi * f(mi) - mj * f(mj));
            }
        }
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
        let total: f64 = rate.iter().sum();
        assert!(total.abs() < 1e-13);
    }
}

#[test]
fn constant_kernel_solve_is_close_to_the_closed_form() {
    let coeffs = constant_coeffs(1.0, 1.0);
    let grid = MassGrid::integer(32).unwrap();
    let mut v = vec![0.0; 32];
    v[0] = 1.0;
    let field = HomogeneousState::new(grid, v).unwrap().to_field();
    let opts = SolverOptions::new(1e-3);
    let out = solve(&field, 1.0, &coeffs, &opts, &[0.5, 1.0]).unwrap();
    for (snap, t) in out.snapshots.iter().zip([0.5, 1.0]) {
        let conc = snap.measure.to_concentration().unwrap();
        let oracle = constant_kernel_oracle(t, 2.0, 1.0, 20).unwrap();
        for k in 0..20 {
            let rel = (conc.values()[k] - oracle[k]).abs() / oracle[k];
            assert!(rel < 1e-3, "t = {t}, k = {}: {rel}", k + 1);
        }
    }
}

#[test]
fn zero_kernel_is_pure_heat_flow() {
    let coeffs = DerivedCoefficients::new(
        KernelSpec::constant(0.0).unwrap(),
        DiffusivitySpec::power_law(1.0).unwrap(),
    );
    let grid = MassGrid::integer(3).unwrap();
    let j = 64;
    let init = GridMeasure::product(
        j,
        grid,
        |x| if x < 0.25 { 1.0 } else { 0.2 },
        |m| 1.0 / m,
        1.0,
    )
    .unwrap();
    let mut opts = SolverOptions::new(0.01);
    opts.positivity_clip = false;
    let field = FieldState::new(init.clone());
    let out = solve(&field, 2.0, &coeffs, &opts, &[2.0]).unwrap();
    let end = &out.snapshots[0].measure;
    let m0 = init.mass_marginal();
    let m1 = end.mass_marginal();
    for b in 0..3 {
        assert!((m0[b] - m1[b]).abs() < 1e-12);
        // slowest bin has a = 1/3; its deviation from uniform decays like
        // exp(-½·(1/3)·(2π)²·2) ≈ 2e-6
        let mean = m1[b] / j as f64;
        for c in 0..j {
            assert!((end.get(c, b) - mean).abs() < 1e-5 * mean.max(1e-3));
        }
    }
}

#[test]
fn homogeneous_data_stays_homogeneous() {
    let coeffs = constant_coeffs(1.0, 0.5);
    let grid = MassGrid::integer(8).unwrap();
    let init = GridMeasure::product(16, grid, |_| 1.0, |m| if m == 1.0 { 1.0 } else { 0.0 }, 1.0).unwrap();
    let out = solve(&FieldState::new(init), 0.5, &coeffs, &SolverOptions::new(0.01), &[0.5]).unwrap();
    let end = &out.snapshots[0].measure;
    for b in 0..8 {
        for c in 1..16 {
            assert!((end.get(c, b) - end.get(0, b)).abs() < 1e-14);
        }
    }
}

#[test]
fn lie_splitting_and_euler_also_conserve_mass() {
    let coeffs = constant_coeffs(2.0, 0.3);
    let grid = MassGrid::integer(16).unwrap();
    let init = GridMeasure::product(
        32,
        grid,
        |x| 1.0 + 0.9 * (2.0 * std::f64::consts::PI * x).sin(),
        |m| (-m).exp(),
        1.0,
    )
    .unwrap();
    let mut opts = SolverOptions::new(0.005);
    opts.splitting = Splitting::Lie;
    opts.coag_integrator = CoagIntegrator::Euler;
    opts.positivity_clip = false;
    let out = solve(&FieldState::new(init), 1.0, &coeffs, &opts, &[1.0]).unwrap();
    assert!(out.mass_drift < 1e-12, "{}", out.mass_drift);
}

#[test]
fn heat_step_preserves_bin_means_and_contracts() {
    let grid = MassGrid::integer(2).unwrap();
    let d = DiffusivitySpec::power_law(1.0).unwrap();
    let values: Vec<f64> = (0..64).map(|i| ((i * 37 % 11) as f64) * 0.1).collect();
    let field = FieldState::new(GridMeasure::from_values(32, grid, values).unwrap());
    let out = heat_step(&field, &d, 0.003).unwrap();
    let (m0, m1) = (field.measure.mass_marginal(), out.measure.mass_marginal());
    for b in 0..2 {
        assert!((m0[b] - m1[b]).abs() < 1e-12);
        let l2 = |g: &GridMeasure| (0..32).map(|c| g.get(c, b).powi(2)).sum::<f64>();
        assert!(l2(&out.measure) <= l2(&field.measure) + 1e-12);
    }
}

#[test]
fn picard_with_zero_kernel_keeps_the_initial_datum() {
    // κ = 0: c = δ = ω(1)²·ν on a single occupied bin, so μ̃ ≡ ν up to the
    // defect of the exponential trapezoid step, about 4e-10 here
    let coeffs = constant_coeffs(0.0, 1.0);
    let grid = MassGrid::integer(4).unwrap();
    let nu = HomogeneousState::new(grid, vec![0.02, 0.0, 0.0, 0.0]).unwrap();
    let mut opts = SolverOptions::new(1e-3);
    opts.picard_tol = 1e-14;
    let out = picard_truncated(2, &nu, 0.5, &coeffs, &opts).unwrap();
    for i in 0..out.times.len() {
        assert!((out.at(i)[0] - 0.02).abs() < 1e-9, "{}", out.at(i)[0]);
        assert_eq!(out.at(i)[1], 0.0);
    }
}

#[test]
fn picard_rejects_bad_truncation() {
    let coeffs = constant_coeffs(1.0, 1.0);
    let nu = HomogeneousState::new(MassGrid::integer(4).unwrap(), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    assert!(picard_truncated(0, &nu, 1.0, &coeffs, &SolverOptions::new(1e-3)).is_err());
    assert!(picard_truncated(5, &nu, 1.0, &coeffs, &SolverOptions::new(1e-3)).is_err());
}

proptest! {
    #[test]
    fn rate_conserves_mass_flow(values in proptest::collection::vec(0.0f64..1.0, 12)) {
        let coeffs = DerivedCoefficients::new(
            KernelSpec::power_sum(1.0, 0.5).unwrap(),
            DiffusivitySpec::power_law(1.0).unwrap(),
        );
        let grid = MassGrid::geometric(1.0, 2f64.powf(0.25), 12).unwrap();
        let rate = coag_rate(&values, &grid, &coeffs).unwrap();
        let total: f64 = rate.iter().sum();
        prop_assert!(total.abs() < 1e-12);
    }
}
