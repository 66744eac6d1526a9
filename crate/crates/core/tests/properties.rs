//! Randomized invariants across the crate. Integrator reversibility and
//! area preservation live with the integrator itself.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use proptest::prelude::*;
use xpoint_core::control::discounted_value;
use xpoint_core::equilibria::{find_equilibria, geodesic_flow, orbit_summary};
use xpoint_core::hjb::{solve_characteristics, solve_viscous, Branch, HjbConfig, Region};
use xpoint_core::hst::{activation, build_filterbank, hst_forward, wick_paths, HstOptions, Pooling};
use xpoint_core::models::{gradient_mismatch, make_joukowski, AnalyticHamiltonian, DoubleWell, Kapitza, Pendulum};
use xpoint_core::rom::{decode, encode, make_pairs, rom_grad_check, rom_init, rom_predict_many, rom_train, Pair};
use xpoint_core::rom::{pendulum_dataset, DatasetConfig, RomSizes, TrainConfig};
use xpoint_core::{integrate, IntegratorConfig, ModelSpec, PhaseState, Rect, Scheme};

/// `c H` for a base model; equilibria keep their kind, eigenvalues scale by `c`.
struct Scaled<'a> {
    base: &'a dyn ModelSpec,
    c: f64,
}

impl ModelSpec for Scaled<'_> {
    fn id(&self) -> &str {
        "scaled"
    }
    fn hamiltonian(&self, q: f64, p: f64, tau: f64) -> f64 {
        self.c * self.base.hamiltonian(q, p, tau)
    }
    fn dh_dq(&self, q: f64, p: f64, tau: f64) -> f64 {
        self.c * self.base.dh_dq(q, p, tau)
    }
    fn dh_dp(&self, q: f64, p: f64, tau: f64) -> f64 {
        self.c * self.base.dh_dp(q, p, tau)
    }
    fn is_separable(&self) -> bool {
        false
    }
    fn hessian(&self, q: f64, p: f64, tau: f64) -> [[f64; 2]; 2] {
        self.base.hessian(q, p, tau).map(|row| row.map(|v| self.c * v))
    }
}

fn tone_signal(n: usize, freqs: &[(f64, f64)], offset: f64) -> Vec<Complex64> {
    (0..n)
        .map(|x| {
            let t = x as f64 / n as f64;
            let v: f64 = freqs.iter().map(|&(k, a)| a * (2.0 * PI * k * t).cos()).sum();
            Complex64::new(v + offset, 0.0)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn model_gradients_match_finite_differences(q in -3.0f64..3.0, p in -2.0f64..2.0, tau in 0.0f64..5.0) {
        let kap = Kapitza { a: 0.1, omega: 30.0 };
        let models: [&dyn ModelSpec; 3] = [&Pendulum, &DoubleWell, &kap];
        for m in models {
            prop_assert!(gradient_mismatch(m, &[(q, p, tau)]) < 1e-6, "{}", m.id());
        }
    }

    #[test]
    fn conservative_models_are_even_in_p(q in -3.0f64..3.0, p in -2.0f64..2.0) {
        for m in [&Pendulum as &dyn ModelSpec, &DoubleWell] {
            prop_assert_eq!(m.hamiltonian(q, p, 0.0), m.hamiltonian(q, -p, 0.0));
        }
    }

    #[test]
    fn equilibria_are_stationary_and_kind_is_scale_free(c in 0.1f64..10.0) {
        let base = find_equilibria(&DoubleWell, Rect::new(-2.0, 2.0, -2.0, 2.0), 9).unwrap();
        let scaled_model = Scaled { base: &DoubleWell, c };
        let scaled = find_equilibria(&scaled_model, Rect::new(-2.0, 2.0, -2.0, 2.0), 9).unwrap();
        prop_assert_eq!(base.len(), scaled.len());
        for (a, b) in base.iter().zip(&scaled) {
            let grad = DoubleWell.dh_dq(a.q, a.p, 0.0).hypot(DoubleWell.dh_dp(a.q, a.p, 0.0));
            prop_assert!(grad < 1e-10);
            prop_assert_eq!(a.kind, b.kind);
            for (la, lb) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                prop_assert!((la * c - lb).norm() < 1e-6 * c.max(1.0));
            }
        }
    }

    #[test]
    fn action_and_period_give_the_same_frequency(e in -0.95f64..0.95) {
        let o = orbit_summary(&Pendulum, e, 0.0).unwrap();
        prop_assert!((o.omega_q_fd / o.omega_q - 1.0).abs() < 5e-3);
    }

    #[test]
    fn geodesics_conserve_re_h_and_raise_im_h(r in 1.1f64..3.0, phi in 0.1f64..(PI - 0.1)) {
        let j = make_joukowski();
        let seed = Complex64::from_polar(r, phi);
        let h0 = j.value(seed).unwrap();
        let path = geodesic_flow(&j, seed, 1e-3, 500).unwrap();
        let mut last = h0.im;
        for z in path {
            let h = j.value(z).unwrap();
            prop_assert!((h.re - h0.re).abs() < 1e-8);
            prop_assert!(h.im >= last);
            last = h.im;
        }
    }

    #[test]
    fn discounted_value_is_monotone_in_nu(q0 in -2.5f64..2.5, a in 0.0f64..2.0, b in 0.0f64..1.0) {
        let cfg = IntegratorConfig::new(1e-2, 2000, 1, Scheme::Leapfrog);
        let traj = integrate(&Pendulum, PhaseState::new(q0, 0.0, 0.0), &cfg, None).unwrap();
        let reward = |q: f64| a * q * q + b;
        let mut prev = f64::INFINITY;
        for nu in [0.0, 0.01, 0.1, 0.5, 1.0, 3.0] {
            let v = discounted_value(&traj, reward, nu).unwrap().value;
            prop_assert!(v <= prev);
            prev = v;
        }
        // nu = 0 is the plain trapezoidal integral
        let plain: f64 = traj.samples.windows(2).map(|w| 0.5 * (w[1].tau - w[0].tau) * (reward(w[0].q) + reward(w[1].q))).sum();
        prop_assert_eq!(discounted_value(&traj, reward, 0.0).unwrap().value, plain);
    }

    #[test]
    fn characteristic_slope_is_even_for_even_h(e in -0.9f64..0.9) {
        let s = solve_characteristics(&Pendulum, e, Branch::Upper, Region::Well { center: 0.0 }, 512).unwrap();
        let n = s.ds_dq.len();
        for i in 0..n {
            prop_assert!((s.ds_dq[i] - s.ds_dq[n - 1 - i]).abs() < 1e-10);
        }
    }

    #[test]
    fn viscous_solution_is_a_fixed_point(nu in 0.2f64..5.0, width in 0.1f64..1.0) {
        let cfg = HjbConfig { nu, grid_n: 401, max_iter: 2000, tol: 1e-12, q_min: -2.0, q_max: 2.0 };
        let sol = solve_viscous(&DoubleWell, |q: f64| (-q * q / width).exp(), &cfg).unwrap();
        prop_assert!(*sol.residual_history.last().unwrap() < cfg.tol);
        prop_assert!(sol.values.iter().all(|&v| v >= 0.0 && v <= 1.0 / nu + 1e-12));
    }

    #[test]
    fn activation_satisfies_its_branch_identity(re in -10.0f64..10.0, im in -10.0f64..10.0) {
        let z = Complex64::new(re, im);
        prop_assert!((activation(z).sin() * FRAC_PI_2 - z).norm() < 1e-12);
    }

    #[test]
    fn activation_is_odd_on_the_compact_window(x in -FRAC_PI_2..FRAC_PI_2) {
        let (a, b) = (activation(Complex64::new(x, 0.0)), activation(Complex64::new(-x, 0.0)));
        prop_assert!((a + b).norm() < 1e-12);
    }

    #[test]
    fn hst_global_pooling_is_shift_invariant(k1 in 1.0f64..60.0, a2 in 0.0f64..1.0, shift in 0usize..256) {
        let bank = build_filterbank(256, 4, FRAC_PI_2, None).unwrap();
        let f = tone_signal(256, &[(k1.round(), 1.0), (37.0, a2)], 0.2);
        let mut g = f.clone();
        g.rotate_right(shift);
        let opts = HstOptions { pooling: Pooling::Global, ..Default::default() };
        let (x, y) = (hst_forward(&f, &bank, &opts).unwrap(), hst_forward(&g, &bank, &opts).unwrap());
        for (u, v) in x.flatten().iter().zip(y.flatten()) {
            prop_assert!((u - v).abs() <= 1e-10);
        }
    }

    #[test]
    fn hst_window_pooling_is_equivariant(k1 in 1.0f64..60.0, windows in 0usize..16) {
        // windows are 2^J = 16 samples apart, so a shift by whole windows moves the pooled output
        let bank = build_filterbank(256, 4, FRAC_PI_2, None).unwrap();
        let f = tone_signal(256, &[(k1.round(), 1.0), (5.0, 0.4)], 0.0);
        let mut g = f.clone();
        g.rotate_right(16 * windows);
        let (x, y) = (hst_forward(&f, &bank, &HstOptions::default()).unwrap(), hst_forward(&g, &bank, &HstOptions::default()).unwrap());
        for (px, py) in x.paths.iter().zip(&y.paths) {
            let mut moved = px.pooled.clone();
            moved.rotate_right(windows);
            for (u, v) in moved.iter().zip(&py.pooled) {
                prop_assert!((u - v).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn hst_annihilates_constants(re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let bank = build_filterbank(128, 3, FRAC_PI_2, None).unwrap();
        let out = hst_forward(&vec![Complex64::new(re, im); 128], &bank, &HstOptions { m_max: 3, ..Default::default() }).unwrap();
        for p in out.paths.iter().filter(|p| p.order() >= 1) {
            prop_assert!(p.pooled.iter().all(|c| c.re == 0.0 && c.im == 0.0));
        }
    }

    #[test]
    fn path_count_is_a_binomial_sum(j in 1usize..9, m_max in 0usize..5) {
        let binom = |n: usize, k: usize| (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1));
        let expected: usize = (0..=m_max.min(j)).map(|m| binom(j, m)).sum();
        let paths = wick_paths(j, m_max);
        prop_assert_eq!(paths.len(), expected);
        prop_assert!(paths.iter().all(|p| p.windows(2).all(|w| w[0] < w[1])));
    }

    #[test]
    fn rom_prediction_rotates_on_the_unit_circle(seed in 0u64..1000, q in -1.5f64..1.5, p in -1.0f64..1.0, tau in -5.0f64..5.0) {
        let params = rom_init(&RomSizes::with_hidden(8), seed).unwrap();
        let s = [PhaseState::new(q, p, 0.0)];
        let latent = encode(&params, &s)[0];
        let moved = latent.rotated(tau);
        prop_assert!((moved.cos_q.hypot(moved.sin_q) - latent.cos_q.hypot(latent.sin_q)).abs() < 1e-12);
        prop_assert_eq!(moved.p, latent.p);
        // tau = 0 is the autoencoder, bit for bit
        let still = rom_predict_many(&params, &s, 0.0)[0];
        prop_assert_eq!([still.q, still.p], decode(&params, &[latent])[0]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn rom_gradient_check_holds_at_random_parameters(seed in 0u64..10_000, s0 in -0.8f64..0.8, s1 in -0.8f64..0.8) {
        let params = rom_init(&RomSizes::with_hidden(16), seed).unwrap();
        let batch: Vec<Pair> = (0..4)
            .map(|i| {
                let k = i as f64;
                Pair { s: [s0 + 0.1 * k, s1 - 0.1 * k], target: [0.3 - 0.1 * k, 0.2 * k], tau: 0.5 * (k + 1.0) }
            })
            .collect();
        let r = rom_grad_check(&params, &batch, 1.0, 1.0, seed).unwrap();
        prop_assert!(r.max_rel_error < 1e-4, "{} at {} (margin {})", r.max_rel_error, r.worst_param, r.min_margin);
    }
}

#[test]
fn rom_training_is_bit_reproducible() {
    let data = pendulum_dataset(&DatasetConfig {
        n_trajectories: 6,
        ..Default::default()
    })
    .unwrap();
    let cfg = TrainConfig {
        hidden: 8,
        epochs: 6,
        batches_per_epoch: 3,
        batch_size: 16,
        ..Default::default()
    };
    let pairs = make_pairs(&data, &cfg.taus).unwrap();
    let a = rom_train(&pairs, &cfg).unwrap();
    let b = rom_train(&pairs, &cfg).unwrap();
    let parallel = rom_train(
        &pairs,
        &TrainConfig {
            parallel: true,
            ..cfg.clone()
        },
    )
    .unwrap();
    assert_eq!(a.params.theta, b.params.theta);
    assert_eq!(a.params.theta, parallel.params.theta);
}
