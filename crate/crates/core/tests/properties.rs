//! Property tests for the numerical building blocks and the signal chain.

mod common;

use distcomp::adapt::{
    extended_error, filter_derivatives, gradient_update_derivative, mre_update_derivatives, psi_from_vec, psi_to_vec,
    MreState, RegressorFilterState,
};
use distcomp::model::{build_exo_generator, sample_disturbance, DisturbanceChannel, HarmonicComponent};
use distcomp::numerics::{
    eigenvalues, left_pinv, observable_decomposition, pole_place_observer, solve_kron, KronTerm, Spectrum, RANK_TOL,
};
use distcomp::sim::rk4_step;
use distcomp::{Matrix, Vector};
use nalgebra::Complex;
use proptest::prelude::*;

use common::{random_hurwitz, random_matrix, random_plant, rng};

fn det(m: &Matrix) -> f64 {
    m.clone().lu().determinant()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pinv_is_left_inverse(seed in any::<u64>(), n in 2usize..7, m in 1usize..4) {
        let m = m.min(n);
        let e = random_matrix(&mut rng(seed), n, m) + Matrix::identity(n, m) * 2.0;
        let p = left_pinv(&e).unwrap();
        prop_assert!((p * &e - Matrix::identity(m, m)).amax() < 1e-9);
    }

    #[test]
    fn eigenvalues_match_trace_and_determinant(seed in any::<u64>(), n in 1usize..8) {
        let a = random_matrix(&mut rng(seed), n, n) * 3.0;
        let s = eigenvalues(&a).unwrap();
        prop_assert_eq!(s.len(), n);
        prop_assert!(s.is_self_conjugate(1e-8));
        let sum: Complex<f64> = s.iter().sum();
        let prod: Complex<f64> = s.iter().product();
        let scale = a.norm().max(1.0);
        prop_assert!((sum.re - a.trace()).abs() < 1e-9 * scale && sum.im.abs() < 1e-9 * scale);
        prop_assert!((prod.re - det(&a)).abs() < 1e-8 * scale.powi(n as i32));
    }

    #[test]
    fn pole_placement_hits_request(seed in any::<u64>(), n in 2usize..6, p in 1usize..4) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, n, n) * 2.0;
        let c = random_matrix(&mut r, p, n);
        let want = Spectrum::real(&(0..n).map(|k| -1.0 - 0.5 * k as f64).collect::<Vec<_>>());
        let k = pole_place_observer(&a, &c, &want, seed).unwrap();
        let got = eigenvalues(&(&a - k * &c)).unwrap();
        prop_assert!(want.match_distance(&got) < 1e-6);
    }

    #[test]
    fn decomposition_has_staircase_form(seed in any::<u64>(), n1 in 1usize..4, n2 in 1usize..3) {
        // Build an unobservable pair in hidden coordinates, then mix.
        let mut r = rng(seed);
        let n = n1 + n2;
        let mut a_s = random_matrix(&mut r, n, n);
        for i in 0..n1 {
            for j in n1..n {
                a_s[(i, j)] = 0.0;
            }
        }
        let mut c_s = random_matrix(&mut r, 2, n);
        for i in 0..2 {
            for j in n1..n {
                c_s[(i, j)] = 0.0;
            }
        }
        let mix = random_matrix(&mut r, n, n) + Matrix::identity(n, n) * 3.0;
        let mix_inv = mix.clone().try_inverse().unwrap();
        let a = &mix_inv * a_s * &mix;
        let c = c_s * &mix;
        let d = observable_decomposition(&c, &a, RANK_TOL).unwrap();
        prop_assume!(d.n1 == n1);
        let t = &d.p * &a * &d.p_inv;
        prop_assert!(t.view((0, n1), (n1, n2)).amax() < 1e-8 * a.norm().max(1.0));
        prop_assert!((&c * &d.p_inv).view((0, n1), (2, n2)).amax() < 1e-8);
    }

    #[test]
    fn uio_reduction_with_square_ce(seed in any::<u64>(), n in 3usize..6) {
        // With as many outputs as disturbances and CE invertible, C·T·A = 0 in
        // exact arithmetic, so (C, TA) has observable dimension n − 1.
        let mut r = rng(seed);
        let plant = random_plant(&mut r, n, 1, n - 1, n - 1);
        let ce = plant.c() * plant.e();
        let nn = plant.e() * ce.try_inverse().unwrap();
        let t = Matrix::identity(n, n) - &nn * plant.c();
        let d = observable_decomposition(plant.c(), &(t * plant.a()), RANK_TOL).unwrap();
        prop_assert_eq!(d.n1, n - 1);
    }

    #[test]
    fn sylvester_residual(seed in any::<u64>(), n in 1usize..5, q in 1usize..5) {
        let mut r = rng(seed);
        let a = random_hurwitz(&mut r, n);
        let s = random_matrix(&mut r, q, q);
        let s = &s - s.transpose();
        let rhs = random_matrix(&mut r, n, q);
        let x = solve_kron(&[KronTerm::new(a.clone(), Matrix::identity(q, q)), KronTerm::new(-Matrix::identity(n, n), s.clone())], &rhs, (n, q)).unwrap();
        prop_assert!((&a * &x - &x * &s - rhs).amax() < 1e-9);
    }

    #[test]
    fn generator_matches_closed_form(amp in 0.0f64..5.0, freq in 0.1f64..6.0, phase in -3.0f64..3.0, bias in -3.0f64..3.0, t in 0.0f64..50.0) {
        let ch = DisturbanceChannel::new(vec![HarmonicComponent { amplitude: amp, frequency: freq, phase }], bias).unwrap();
        let g = build_exo_generator(&ch).unwrap();
        let exact = amp * (freq * t + phase).sin() + bias;
        prop_assert!((g.output_at(t) - exact).abs() < 1e-9);
        prop_assert!((sample_disturbance(&ch, t) - exact).abs() < 1e-12);
    }

    #[test]
    fn psi_vectorization_round_trip(seed in any::<u64>(), n_in in 1usize..4, q in 1usize..6) {
        let psi = random_matrix(&mut rng(seed), n_in, q);
        prop_assert_eq!(psi_from_vec(&psi_to_vec(&psi), n_in, q).unwrap(), psi);
    }

    #[test]
    fn filters_are_linear(seed in any::<u64>()) {
        let mut r = rng(seed);
        let plant = random_plant(&mut r, 3, 2, 2, 1);
        let mk = |r: &mut _| RegressorFilterState {
            z: vec![random_matrix(r, 3, 4), random_matrix(r, 3, 4)],
            x_u: Vector::from_column_slice(random_matrix(r, 3, 1).as_slice()),
        };
        let s1 = mk(&mut r);
        let s2 = mk(&mut r);
        let xi1 = Vector::from_column_slice(random_matrix(&mut r, 4, 1).as_slice());
        let xi2 = Vector::from_column_slice(random_matrix(&mut r, 4, 1).as_slice());
        let u1 = Vector::from_column_slice(random_matrix(&mut r, 2, 1).as_slice());
        let u2 = Vector::from_column_slice(random_matrix(&mut r, 2, 1).as_slice());
        let sum = RegressorFilterState {
            z: s1.z.iter().zip(&s2.z).map(|(a, b)| a + b).collect(),
            x_u: &s1.x_u + &s2.x_u,
        };
        let d1 = filter_derivatives(&plant, &s1, &xi1, &u1);
        let d2 = filter_derivatives(&plant, &s2, &xi2, &u2);
        let ds = filter_derivatives(&plant, &sum, &(&xi1 + &xi2), &(&u1 + &u2));
        for j in 0..2 {
            prop_assert!((&ds.z[j] - &d1.z[j] - &d2.z[j]).amax() < 1e-12);
        }
        prop_assert!((&ds.x_u - &d1.x_u - &d2.x_u).amax() < 1e-12);
    }

    #[test]
    fn memory_matrix_stays_psd(seed in any::<u64>()) {
        // Ω̇ = (ΦᵀΦ − Ω)/τ from zero keeps Ω positive semidefinite.
        let mut r = rng(seed);
        let mut st = MreState::zeros(4);
        for k in 0..200 {
            let phi = random_matrix(&mut r, 2, 4) * (k as f64 * 0.05).sin();
            let (_, dom, _) = mre_update_derivatives(&phi, &Vector::zeros(2), &st, &Vector::zeros(4), 0.5, 1.0);
            st.omega += dom * 0.01;
            st.symmetrize();
        }
        let min = st.omega.clone().symmetric_eigenvalues().min();
        prop_assert!(min > -1e-12, "min eig {}", min);
    }
}

/// For constant `Ψ̂`, filtering `u = Ψ̂·ξ̂` through the plant equals `Φ·vec(Ψ̂)`.
#[test]
fn regressor_identity_for_constant_parameters() {
    let mut r = rng(5);
    let plant = random_plant(&mut r, 3, 2, 2, 1);
    let (n, n_in, q) = (3, 2, 4);
    let psi = random_matrix(&mut r, n_in, q);
    let psi_vec = psi_to_vec(&psi);
    let xi = |t: f64| Vector::from_fn(q, |k, _| ((k + 1) as f64 * t).sin());
    let pack = |s: &RegressorFilterState| {
        let mut v: Vec<f64> = s.z.iter().flat_map(|z| z.iter().copied()).collect();
        v.extend(s.x_u.iter());
        Vector::from_vec(v)
    };
    let unpack = |v: &Vector| RegressorFilterState {
        z: (0..n_in).map(|j| Matrix::from_column_slice(n, q, &v.as_slice()[j * n * q..(j + 1) * n * q])).collect(),
        x_u: v.rows(n_in * n * q, n).into_owned(),
    };
    let mut state = Vector::zeros(n_in * n * q + n);
    let h = 1e-3;
    for k in 0..3000 {
        state = rk4_step(
            |t, v| {
                let xs = xi(t);
                pack(&filter_derivatives(&plant, &unpack(v), &xs, &(&psi * &xs)))
            },
            k as f64 * h,
            &state,
            h,
        )
        .unwrap();
    }
    let s = unpack(&state);
    let lhs = plant.c() * &s.x_u;
    let rhs = s.phi(plant.c()) * &psi_vec;
    let rhs_copy = rhs.clone();
    assert!((lhs - rhs).amax() < 1e-10);
    // An output made of the parameter term plus the filtered input leaves no extended error.
    let y = &rhs_copy + plant.c() * &s.x_u;
    assert!(extended_error(plant.c(), &y, &s, &psi_vec).amax() < 1e-10);
}

/// Gradient law on a scalar regression `y = φ·ψ*` drives `ψ̂` towards `ψ*`.
#[test]
fn gradient_reduces_parameter_error() {
    let target = 1.7;
    let mut psi = Vector::zeros(1);
    let h = 1e-3;
    for k in 0..20_000 {
        psi = rk4_step(
            |t, p| {
                let phi = Matrix::from_element(1, 1, t.sin() + 1.5);
                let y = &phi * Vector::from_element(1, target);
                let ybar = y - &phi * p;
                gradient_update_derivative(&phi, &ybar, 2.0)
            },
            k as f64 * h,
            &psi,
            h,
        )
        .unwrap();
    }
    assert!((psi[0] - target).abs() < 1e-6);
}
