use arwp_core::config::{DampingSchedule, SamplerConfig};
use arwp_core::ensemble::{ensemble_covariance, ensemble_mean, init_gaussian_ensemble, ParticleEnsemble};
use arwp_core::potentials::{GaussianMixturePotential, Potential, QuadraticPotential, RosenbrockPotential};
use arwp_core::rwpo::{rwpo_score, rwpo_score_at};
use arwp_core::samplers::{
    arwp_step_with_score, ila_coefficients, klmc_coefficients, mala_log_acceptance, mala_step_counted, SamplerKind,
};
use arwp_core::theory::{discrete_flow_1d, rwpo_gaussian_var, stationary_var, ScalarState};
use arwp_core::Error;
use nalgebra::{DMatrix, DVector, Matrix2};
use proptest::prelude::*;

fn quad_1d() -> QuadraticPotential {
    QuadraticPotential::diagonal(&[1.0]).unwrap()
}

fn gaussian_1d(n: usize, var: f64, seed: u64) -> ParticleEnsemble {
    init_gaussian_ensemble(&DVector::zeros(1), &DMatrix::from_element(1, 1, var), n, seed).unwrap()
}

fn variance(e: &ParticleEnsemble) -> f64 {
    ensemble_covariance(e).unwrap()[(0, 0)]
}

fn run(
    kind: SamplerKind,
    mut e: ParticleEnsemble,
    p: &dyn Potential,
    cfg: &SamplerConfig,
    steps: usize,
) -> ParticleEnsemble {
    for _ in 0..steps {
        e = kind.step(&e, p, cfg).unwrap();
    }
    e
}

/// Fixed point of `S = M S M^T + Q`.
fn stationary_cov2(m: Matrix2<f64>, q: Matrix2<f64>) -> Matrix2<f64> {
    let mut s = Matrix2::zeros();
    for _ in 0..200_000 {
        let next = m * s * m.transpose() + q;
        if (next - s).abs().max() < 1e-15 {
            return next;
        }
        s = next;
    }
    s
}

#[test]
fn ula_without_noise_is_gradient_descent() {
    let e = ParticleEnsemble::from_points_1d(&[1.0]);
    let cfg = SamplerConfig {
        eta: 0.1,
        beta: f64::INFINITY,
        ..Default::default()
    };
    let next = SamplerKind::Ula.step(&e, &quad_1d(), &cfg).unwrap();
    assert!((next.positions[(0, 0)] - 0.9).abs() < 1e-15);
}

#[test]
fn ula_stationary_variance_matches_ar1_oracle() {
    for (eta, steps) in [(0.01, 1500), (0.5, 60)] {
        let cfg = SamplerConfig {
            eta,
            seed: 11,
            ..Default::default()
        };
        let e = run(SamplerKind::Ula, gaussian_1d(20_000, 1.0, 3), &quad_1d(), &cfg, steps);
        let oracle = 1.0 / (1.0 - eta / 2.0);
        let v = variance(&e);
        assert!((v - oracle).abs() < 0.05 * oracle, "eta={eta}: {v} vs {oracle}");
    }
}

#[test]
fn mala_is_unbiased() {
    // At eta = 0.5 plain ULA would sit at 4/3.
    for (eta, steps) in [(0.05, 600), (0.5, 200)] {
        let cfg = SamplerConfig {
            eta,
            seed: 5,
            ..Default::default()
        };
        let e = run(SamplerKind::Mala, gaussian_1d(20_000, 4.0, 9), &quad_1d(), &cfg, steps);
        let v = variance(&e);
        assert!((v - 1.0).abs() < 0.03, "eta={eta}: variance {v}");
    }
}

#[test]
fn mala_accepts_everything_on_flat_potential() {
    struct Flat;
    impl Potential for Flat {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, _: &[f64]) -> f64 {
            1.5
        }
        fn gradient(&self, _: &[f64], g: &mut [f64]) {
            g.fill(0.0);
        }
    }
    let e = init_gaussian_ensemble(&DVector::zeros(2), &DMatrix::identity(2, 2), 500, 1).unwrap();
    let (_, accepted) = mala_step_counted(
        &e,
        &Flat,
        &SamplerConfig {
            eta: 0.7,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(accepted, 500);
}

#[test]
fn mala_detailed_balance_on_three_states() {
    let pot = GaussianMixturePotential::new(vec![vec![-1.0], vec![1.5]], vec![1.0, 0.4], vec![0.3, 0.6]).unwrap();
    let states = [-1.0, 0.3, 1.2];
    let cfg = SamplerConfig {
        eta: 0.4,
        beta: 1.3,
        ..Default::default()
    };
    let pi: Vec<f64> = states.iter().map(|&s| (-cfg.beta * pot.value(&[s])).exp()).collect();
    let proposal = |i: usize, j: usize| {
        let x = states[i];
        let g = pot.gradient_vec(&[x])[0];
        let r = states[j] - x + cfg.eta * g;
        (-cfg.beta * r * r / (4.0 * cfg.eta)).exp()
    };
    let c = 0.1;
    let mut pm = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                let acc = mala_log_acceptance(&pot, &[states[i]], &[states[j]], &cfg)
                    .min(0.0)
                    .exp();
                pm[i][j] = c * proposal(i, j) * acc;
            }
        }
        pm[i][i] = 1.0 - pm[i].iter().sum::<f64>();
    }
    for i in 0..3 {
        for j in 0..3 {
            let (l, r) = (pi[i] * pm[i][j], pi[j] * pm[j][i]);
            assert!(
                (l - r).abs() <= 1e-12 * l.abs().max(r.abs()).max(1e-300),
                "{i}->{j}: {l} vs {r}"
            );
        }
    }
    assert_eq!(mala_log_acceptance(&pot, &[0.3], &[0.3], &cfg), 0.0);
}

fn simpson<F: Fn(f64) -> f64>(f: F, hi: f64, n: usize) -> f64 {
    let h = hi / n as f64;
    let mut acc = f(0.0) + f(hi);
    for k in 1..n {
        acc += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn klmc_noise_covariance_matches_quadrature() {
    for a in [0.5, 1.0, 5.0] {
        for eta in [0.1, 1.0] {
            let k = klmc_coefficients(a, eta).unwrap();
            let psi0 = |t: f64| (-a * t).exp();
            let psi1 = |t: f64| -(-a * t).exp_m1() / a;
            let q00 = simpson(|t| psi0(t).powi(2), eta, 20_000);
            let q01 = simpson(|t| psi0(t) * psi1(t), eta, 20_000);
            let q11 = simpson(|t| psi1(t).powi(2), eta, 20_000);
            let c = k.noise_cov;
            assert!((c[(0, 0)] - q00).abs() < 1e-10, "a={a} eta={eta}");
            assert!((c[(0, 1)] - q01).abs() < 1e-10, "a={a} eta={eta}");
            assert!((c[(1, 1)] - q11).abs() < 1e-10, "a={a} eta={eta}");
            assert_eq!(c[(0, 1)], c[(1, 0)]);
            assert!((k.psi1 - simpson(psi0, eta, 20_000)).abs() < 1e-10);
            assert!((k.psi2 - simpson(psi1, eta, 20_000)).abs() < 1e-10);
        }
    }
}

#[test]
fn klmc_stationary_variance_matches_recursion() {
    let (a, eta, lambda, beta) = (2.0, 0.1, 1.0, 1.0);
    let k = klmc_coefficients(a, eta).unwrap();
    let m = Matrix2::new(1.0 - k.psi2 / lambda, k.psi1, -k.psi1 / lambda, k.psi0);
    let c = k.noise_cov;
    let q = Matrix2::new(c[(1, 1)], c[(0, 1)], c[(0, 1)], c[(0, 0)]) * (2.0 * a / beta);
    let oracle = stationary_cov2(m, q)[(0, 0)];
    let cfg = SamplerConfig {
        eta,
        damping: DampingSchedule::Constant(a),
        seed: 4,
        ..Default::default()
    };
    let e = run(SamplerKind::Klmc, gaussian_1d(20_000, 1.0, 8), &quad_1d(), &cfg, 250);
    let v = variance(&e);
    assert!((v - oracle).abs() < 0.05 * oracle, "{v} vs {oracle}");
    // O(eta) discretization bias of the integrator.
    assert!((oracle - 1.0).abs() < 0.05, "oracle {oracle}");
}

#[test]
fn ila_stationary_variance_matches_recursion() {
    let (dt, lipschitz) = (0.2, 2.0);
    let c = ila_coefficients(dt, 1.5, lipschitz).unwrap();
    let s2 = 2.0 * (1.0 - c.inertia) * c.tau;
    let m = Matrix2::new(1.0 - c.tau, c.inertia, -c.tau, c.inertia);
    let oracle = stationary_cov2(m, Matrix2::from_element(s2))[(0, 0)];
    let cfg = SamplerConfig {
        eta: dt,
        lipschitz,
        seed: 21,
        ..Default::default()
    };
    let e = run(SamplerKind::Ila, gaussian_1d(20_000, 1.0, 2), &quad_1d(), &cfg, 1500);
    let v = variance(&e);
    assert!((v - oracle).abs() < 0.05 * oracle, "{v} vs {oracle}");
    // Small steps target the Gibbs variance.
    let c = ila_coefficients(0.02, 1.5, 1.0).unwrap();
    let m = Matrix2::new(1.0 - c.tau, c.inertia, -c.tau, c.inertia);
    let fine = stationary_cov2(m, Matrix2::from_element(2.0 * (1.0 - c.inertia) * c.tau))[(0, 0)];
    assert!((fine - 1.0).abs() < 0.02, "{fine}");
}

#[test]
fn ila_with_zero_step_fixes_resting_particles() {
    let e = init_gaussian_ensemble(&DVector::zeros(2), &DMatrix::identity(2, 2), 50, 3).unwrap();
    let cfg = SamplerConfig {
        eta: 0.0,
        ..Default::default()
    };
    let next = SamplerKind::Ila
        .step(&e, &RosenbrockPotential::default(), &cfg)
        .unwrap();
    assert_eq!(next.positions, e.positions);
    assert_eq!(next.momenta, e.momenta);
}

#[test]
fn single_particle_at_minimum_is_fixed() {
    let e = ParticleEnsemble::from_points_1d(&[0.0]);
    let cfg = SamplerConfig {
        eta: 0.3,
        t: 0.2,
        damping: DampingSchedule::Constant(1.0),
        ..Default::default()
    };
    for kind in [SamplerKind::ArwpHeavyBall, SamplerKind::ArwpNesterov, SamplerKind::Brwp] {
        let next = kind.step(&e, &quad_1d(), &cfg).unwrap();
        assert_eq!(next.positions[(0, 0)], 0.0, "{kind}");
        assert_eq!(next.momenta[(0, 0)], 0.0, "{kind}");
    }
}

/// Analytic Gaussian score `-(x - mean) / sigma_tilde` from the ensemble's own variance.
fn closure_score(e: &ParticleEnsemble, lambda: f64, t: f64) -> DMatrix<f64> {
    let st = rwpo_gaussian_var(variance(e), lambda, t, 1.0).unwrap();
    let m = ensemble_mean(e)[0];
    e.positions.map(|x| -(x - m) / st)
}

#[test]
fn arwp_with_injected_score_follows_covariance_recursion() {
    let (lambda, t) = (1.0, 0.2);
    let q = quad_1d();
    for (a, eta) in [(1.0, 0.1), (2.0, 0.5), (3.0, 0.6)] {
        let cfg = SamplerConfig {
            eta,
            t,
            damping: DampingSchedule::Constant(a),
            ..Default::default()
        };
        let mut e = gaussian_1d(10_000, 2.0, 17);
        let flow = discrete_flow_1d(
            ScalarState {
                sigma: variance(&e),
                g: 0.0,
                t: 0.0,
            },
            lambda,
            t,
            cfg.damping,
            eta,
            50,
        )
        .unwrap();
        for (k, state) in flow.iter().enumerate().skip(1) {
            let s = closure_score(&e, lambda, t);
            e = arwp_step_with_score(&e, &q, &cfg, &s).unwrap();
            let v = variance(&e);
            assert!(
                (v - state.sigma).abs() < 1e-3 * state.sigma,
                "a={a} eta={eta} k={k}: {v} vs {}",
                state.sigma
            );
        }
    }
}

#[test]
fn proximal_samplers_settle_near_biased_variance() {
    let t = 0.2;
    let target = stationary_var(1.0, t);
    let q = quad_1d();
    let cases = [
        (
            SamplerKind::Brwp,
            SamplerConfig {
                eta: 0.1,
                t,
                ..Default::default()
            },
            150,
        ),
        (
            SamplerKind::ArwpHeavyBall,
            SamplerConfig {
                eta: 0.5,
                t,
                damping: DampingSchedule::Constant(2.0),
                ..Default::default()
            },
            120,
        ),
    ];
    for (kind, cfg, steps) in cases {
        let e = run(kind, gaussian_1d(1500, 3.0, 31), &q, &cfg, steps);
        let v = variance(&e);
        assert!((v - target).abs() < 0.05 * target, "{kind}: {v} vs {target}");
    }
}

#[test]
fn arwp_beyond_stability_boundary_diverges() {
    let cfg = SamplerConfig {
        eta: 0.3,
        t: 0.2,
        damping: DampingSchedule::Constant(10.0),
        ..Default::default()
    };
    let mut e = gaussian_1d(200, 1.0, 1);
    let q = quad_1d();
    let mut outcome = Ok(());
    for _ in 0..2000 {
        match SamplerKind::ArwpHeavyBall.step(&e, &q, &cfg) {
            Ok(next) => e = next,
            Err(err) => {
                outcome = Err(err);
                break;
            }
        }
    }
    assert!(matches!(outcome, Err(Error::Diverged { .. })), "{outcome:?}");
}

#[test]
fn rwpo_score_matches_closure_on_large_ensemble() {
    let n = 10_000;
    let e = gaussian_1d(n, 1.0, 77);
    let q = QuadraticPotential::diagonal(&[1.0]).unwrap();
    let cfg = SamplerConfig {
        t: 0.2,
        seed: 77,
        ..Default::default()
    };
    let lz = arwp_core::rwpo::log_normalizers(&e, &q, &cfg).unwrap();
    let xs = [-1.0, -0.5, 0.5, 1.0];
    let queries = DMatrix::from_row_slice(1, 4, &xs);
    let s = rwpo_score_at(&queries, &e.positions, &lz, &q, &cfg).unwrap();
    let st = rwpo_gaussian_var(variance(&e), 1.0, 0.2, 1.0).unwrap();
    let m = ensemble_mean(&e)[0];
    for (i, x) in xs.iter().enumerate() {
        let expect = -(x - m) / st;
        assert!(
            (s.scores[(0, i)] - expect).abs() < 0.05 * expect.abs(),
            "x={x}: {} vs {expect}",
            s.scores[(0, i)]
        );
    }
}

fn sampler_cfg(kind: SamplerKind, seed: u64) -> SamplerConfig {
    let damping = match kind {
        SamplerKind::ArwpNesterov => DampingSchedule::Nesterov,
        SamplerKind::Klmc => DampingSchedule::Constant(2.0),
        _ => DampingSchedule::Constant(1.0),
    };
    SamplerConfig {
        eta: 0.05,
        t: 0.1,
        damping,
        seed,
        lipschitz: 2.0,
        ..Default::default()
    }
}

#[test]
fn runs_are_identical_across_thread_counts() {
    let p = GaussianMixturePotential::four_well();
    let init = init_gaussian_ensemble(&DVector::from_vec(vec![3.0, 0.0]), &DMatrix::identity(2, 2), 64, 12).unwrap();
    for kind in SamplerKind::ALL {
        let cfg = sampler_cfg(kind, 12);
        let go = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run(kind, init.clone(), &p, &cfg, 20))
        };
        let (one, many) = (go(1), go(8));
        assert_eq!(one, many, "{kind}");
        assert_eq!(one, go(1), "{kind} rerun");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Each independent chain reads only its own particle and stream, so
    /// relabelling particles together with their streams relabels the output.
    #[test]
    fn independent_chains_are_local(seed in any::<u64>(), j in 0usize..8, shift in -3.0..3.0f64) {
        let p = RosenbrockPotential::default();
        let e = init_gaussian_ensemble(&DVector::zeros(2), &DMatrix::identity(2, 2), 8, seed).unwrap();
        let mut other = e.clone();
        for c in 0..8 {
            if c != j {
                other.positions[(0, c)] += shift;
                other.momenta[(1, c)] -= shift;
            }
        }
        for kind in [SamplerKind::Ula, SamplerKind::Mala, SamplerKind::Ila, SamplerKind::Klmc] {
            let cfg = sampler_cfg(kind, seed);
            let a = kind.step(&e, &p, &cfg).unwrap();
            let b = kind.step(&other, &p, &cfg).unwrap();
            prop_assert_eq!(a.positions.column(j), b.positions.column(j));
            prop_assert_eq!(a.momenta.column(j), b.momenta.column(j));
        }
    }

    #[test]
    fn klmc_noise_covariance_is_psd(a in 0.01..50.0f64, eta in 0.0..5.0f64) {
        let c = klmc_coefficients(a, eta).unwrap().noise_cov;
        let eig = c.symmetric_eigenvalues();
        let scale = c.abs().max().max(f64::MIN_POSITIVE);
        prop_assert!(eig.min() >= -1e-12 * scale, "{eig:?}");
        let k = klmc_coefficients(a, eta).unwrap();
        prop_assert!(k.psi0 > 0.0 && k.psi0 <= 1.0);
    }

    #[test]
    fn seeded_runs_repeat(seed in any::<u64>()) {
        let p = GaussianMixturePotential::four_well();
        let e = init_gaussian_ensemble(&DVector::zeros(2), &DMatrix::identity(2, 2), 16, seed).unwrap();
        for kind in SamplerKind::ALL {
            let cfg = sampler_cfg(kind, seed);
            prop_assert_eq!(run(kind, e.clone(), &p, &cfg, 3), run(kind, e.clone(), &p, &cfg, 3));
        }
    }
}

#[test]
fn brwp_scores_match_helper() {
    let e = gaussian_1d(40, 1.0, 3);
    let cfg = SamplerConfig {
        t: 0.3,
        ..Default::default()
    };
    let s = rwpo_score(&e, &quad_1d(), &cfg).unwrap();
    assert_eq!(s.scores.shape(), (1, 40));
}
