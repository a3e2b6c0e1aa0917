//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line with the measured values (run with `--nocapture` to see them for
//! passing tests).

use num_complex::Complex64;
use rand::Rng;

use repeater_core::channel::{effective_g, ChannelSet, RepeaterConfig};
use repeater_core::numerics::{solve_qp, CMat, QpProblem};
use repeater_core::optimizer::{
    self, build_alpha_qp, initialize, run, C3Variant, OptConfig, OptLimits,
};
use repeater_core::rng::{stream_rng, StreamPurpose};
use repeater_core::scenario::{Layout, NoisePowers, Point3, Scenario};
use repeater_core::stability::{
    alpha_g, circle_det_closed_form, gershgorin_metrics, loop_det, margin_sweep, nyquist_sweep,
    NyquistSweep, StabilityError, SweepGrid,
};
use repeater_core::units::{amplitude_to_db, db_to_amplitude, SPEED_OF_LIGHT};
use repeater_core::uplink::{
    assemble, blue_variance_toy, mmse_combiners, mmse_sinr_direct, mse, sinr, sum_capacity,
    RateUnit, UplinkSystem, UserState,
};

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Sweep with caller-side step refinement: halve the step until the
/// winding number is trustworthy.
fn sweep_refining(
    cs: &ChannelSet,
    cfg: &RepeaterConfig,
    grid: &SweepGrid,
    max_halvings: usize,
) -> NyquistSweep {
    let mut g = *grid;
    for _ in 0..=max_halvings {
        match nyquist_sweep(cs, cfg, &g) {
            Ok(s) => return s,
            Err(StabilityError::GridTooCoarse { .. }) => {
                g.step_hz /= 2.0;
            }
            Err(e) => panic!("sweep failed: {e}"),
        }
    }
    panic!("grid still too coarse after {max_halvings} halvings");
}

// ---------------------------------------------------------------------
// 1. Circle bound: alpha_G for 15 repeaters on a 1000 m circle at 2 GHz
// ---------------------------------------------------------------------
#[test]
fn criterion_01_circle_bound() {
    let cs = ChannelSet::circle_free_space(15, 1000.0, 2.0e9);
    let bound_db = amplitude_to_db(alpha_g(&cs));
    assert!(
        (bound_db - 75.8).abs() <= 0.1,
        "criterion 1 (circle bound): FAIL: alpha_G = {bound_db:.3} dB, expected 75.8 +/- 0.1"
    );
    println!("criterion 1 (circle bound): PASS: alpha_G = {bound_db:.3} dB");
}

// ---------------------------------------------------------------------
// 2. Circle transition: margin sweep over the 20 MHz band, 100 Hz step
// ---------------------------------------------------------------------
#[test]
fn criterion_02_circle_transition() {
    let cs = ChannelSet::circle_free_space(15, 1000.0, 2.0e9);
    let ag = alpha_g(&cs);
    let grid = SweepGrid::new(2.0e9, 20.0e6, 100.0).unwrap();
    let pts = margin_sweep(&cs, &[ag * db_to_amplitude(-6.0), ag], &grid);
    let at_minus_6 = pts[0].1;
    let at_bound = pts[1].1;
    println!(
        "criterion 2 (circle transition): min|det| = {at_minus_6:.4} at alpha_G - 6 dB, {at_bound:.4} at alpha_G"
    );
    assert!(
        at_minus_6 >= 0.5,
        "criterion 2 (circle transition): FAIL: min|det| at alpha_G - 6 dB is {at_minus_6:.4}, expected >= 0.5"
    );
    assert!(
        at_bound <= 0.05,
        "criterion 2 (circle transition): FAIL: min|det| at alpha_G is {at_bound:.4}, expected <= 0.05"
    );
    println!("criterion 2 (circle transition): PASS");
}

// ---------------------------------------------------------------------
// 3. Two-repeater exactness: Nyquist flips at alpha^2 beta = 1 and
//    agrees with Gershgorin
// ---------------------------------------------------------------------
#[test]
fn criterion_03_two_repeater_exactness() {
    let mut rng = stream_rng(303, StreamPurpose::Aux, 0);
    let mut checked = 0;
    while checked < 200 {
        let sqrt_beta = 0.05 + 1.95 * rng.gen::<f64>();
        let tau = (0.3 + 2.7 * rng.gen::<f64>()) * 1e-6;
        let nu = rng.gen::<f64>() * 1e-6;
        // alpha^2 beta log-uniform in [0.1, 10], away from the boundary
        let loop_gain = 10f64.powf(rng.gen::<f64>() * 2.0 - 1.0);
        if (0.95..1.05).contains(&loop_gain) {
            continue;
        }
        let alpha = loop_gain.sqrt() / sqrt_beta;
        let cs = ChannelSet::two_repeater(sqrt_beta, tau, 2.0e9);
        let cfg = RepeaterConfig {
            alpha: vec![alpha; 2],
            nu_s: vec![nu; 2],
        };
        let period_hz = 1.0 / (2.0 * (tau + nu));
        let grid = SweepGrid::new(
            2.0e9,
            3.0 * period_hz,
            0.1 / (4.0 * std::f64::consts::PI * (tau + nu)),
        )
        .unwrap();
        let sweep = sweep_refining(&cs, &cfg, &grid, 10);
        let nyquist_stable = sweep.winding_number == 0;
        let truth = loop_gain < 1.0;
        let (_, _, d) = gershgorin_metrics(&cs, &cfg);
        let gershgorin_stable = d < 1.0;
        assert_eq!(
            nyquist_stable, truth,
            "criterion 3: FAIL: Nyquist verdict wrong at alpha^2 beta = {loop_gain:.4}"
        );
        assert_eq!(
            gershgorin_stable, truth,
            "criterion 3: FAIL: Gershgorin verdict wrong at alpha^2 beta = {loop_gain:.4}"
        );
        checked += 1;
    }

    // locate the flip by bisection on a few instances
    for probe in 0..10u64 {
        let mut prng = stream_rng(304, StreamPurpose::Aux, probe);
        let sqrt_beta = 0.1 + 1.5 * prng.gen::<f64>();
        let tau = (0.5 + 2.0 * prng.gen::<f64>()) * 1e-6;
        let nu = prng.gen::<f64>() * 0.5e-6;
        let crit = 1.0 / sqrt_beta;
        let cs = ChannelSet::two_repeater(sqrt_beta, tau, 2.0e9);
        let period_hz = 1.0 / (2.0 * (tau + nu));
        let grid = SweepGrid::new(
            2.0e9,
            3.0 * period_hz,
            0.1 / (4.0 * std::f64::consts::PI * (tau + nu)),
        )
        .unwrap();
        let stable_at = |alpha: f64| {
            let cfg = RepeaterConfig {
                alpha: vec![alpha; 2],
                nu_s: vec![nu; 2],
            };
            sweep_refining(&cs, &cfg, &grid, 12).winding_number == 0
        };
        let mut lo = 0.8 * crit;
        let mut hi = 1.25 * crit;
        assert!(stable_at(lo) && !stable_at(hi));
        while (hi - lo) / crit > 1e-3 {
            let mid = 0.5 * (lo + hi);
            if stable_at(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let flip = 0.5 * (lo + hi);
        assert!(
            (flip * sqrt_beta - 1.0).abs() <= 5e-3,
            "criterion 3: FAIL: flip at alpha*sqrt(beta) = {:.5}, expected 1",
            flip * sqrt_beta
        );
    }
    println!(
        "criterion 3 (two-repeater exactness): PASS: 200 verdicts match, 10 flip points at alpha^2 beta = 1"
    );
}

// ---------------------------------------------------------------------
// 4. Closed-form circulant determinant vs. dense determinant
// ---------------------------------------------------------------------
#[test]
fn criterion_04_closed_form_circulant() {
    let mut rng = stream_rng(404, StreamPurpose::Aux, 0);
    let freq = 2.0e9;
    let omega_c = 2.0 * std::f64::consts::PI * freq;
    let radius = 1000.0;
    let mut worst: f64 = 0.0;
    for n in [3usize, 5, 7, 9, 11, 13, 15] {
        let cs = ChannelSet::circle_free_space(n, radius, freq);
        let ag = alpha_g(&cs);
        for _ in 0..50 {
            let f = freq - 10.0e6 + 20.0e6 * rng.gen::<f64>();
            let omega = 2.0 * std::f64::consts::PI * f;
            let alpha = rng.gen::<f64>() * 1.5 * ag;
            let nu = rng.gen::<f64>() * 1e-7;
            let cfg = RepeaterConfig {
                alpha: vec![alpha; n],
                nu_s: vec![nu; n],
            };
            let direct = loop_det(&cs, &cfg, omega);
            let closed = circle_det_closed_form(n, radius, alpha, nu, omega, |d| {
                SPEED_OF_LIGHT / (2.0 * omega_c * d)
            });
            let rel = (direct - closed).norm() / direct.norm().max(1e-300);
            worst = worst.max(rel);
            assert!(
                rel <= 1e-8,
                "criterion 4: FAIL: n = {n}, relative error {rel:.3e}"
            );
        }
    }
    println!("criterion 4 (closed-form circulant): PASS: worst relative error {worst:.3e}");
}

// ---------------------------------------------------------------------
// 5. Soundness: D < 1 on the grid implies zero winding
// ---------------------------------------------------------------------
#[test]
fn criterion_05_gershgorin_soundness() {
    let mut rng = stream_rng(505, StreamPurpose::Aux, 0);
    for trial in 0..100 {
        let n = 2 + (trial % 7);
        // random symmetric coupling with random phases and delays
        let mut hr = CMat::zeros(n, n);
        let mut tau = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let amp = 10f64.powf(-1.0 - 2.0 * rng.gen::<f64>());
                let phase = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
                let t = (0.5 + 7.5 * rng.gen::<f64>()) * 1e-6;
                hr.set(i, j, Complex64::from_polar(amp, phase));
                hr.set(j, i, Complex64::from_polar(amp, phase));
                tau[i * n + j] = t;
                tau[j * n + i] = t;
            }
        }
        let cs = ChannelSet {
            hd: CMat::zeros(0, 0),
            hu: CMat::zeros(n, 0),
            hb: CMat::zeros(0, n),
            hr,
            hr_tau_s: tau,
            rep_delays_s: vec![0.0; n],
            freq_hz: 2.0e9,
        };
        // scale a random gain pattern to a target D in [0.05, 0.9]
        let mut cfg = RepeaterConfig {
            alpha: (0..n).map(|_| 0.2 + rng.gen::<f64>()).collect(),
            nu_s: (0..n).map(|_| rng.gen::<f64>() * 1e-7).collect(),
        };
        let (_, _, d0) = gershgorin_metrics(&cs, &cfg);
        let target = 0.05 + 0.85 * rng.gen::<f64>();
        for a in cfg.alpha.iter_mut() {
            *a *= target / d0;
        }
        let (_, _, d) = gershgorin_metrics(&cs, &cfg);
        assert!(d < 1.0);
        let grid = SweepGrid::new(2.0e9, 2.0e6, 1000.0).unwrap();
        let sweep = sweep_refining(&cs, &cfg, &grid, 8);
        assert_eq!(
            sweep.winding_number, 0,
            "criterion 5: FAIL: D = {d:.3} < 1 but winding = {} (trial {trial})",
            sweep.winding_number
        );
    }
    println!("criterion 5 (soundness): PASS: 100 sub-unit-D configurations, all winding 0");
}

// ---------------------------------------------------------------------
// 6. MMSE identities
// ---------------------------------------------------------------------
#[test]
fn criterion_06_mmse_identities() {
    let mut rng = stream_rng(606, StreamPurpose::Aux, 0);
    for trial in 0..100 {
        let m = 4 + (trial % 13);
        let k = 1 + (trial % 6).min(m - 1);
        let h = CMat::from_fn(m, k, |_, _| {
            cx(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let b = CMat::from_fn(m, m, |_, _| {
            cx(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 0.4
        });
        let sigma = CMat::identity(m)
            .scale(cx(0.2 + rng.gen::<f64>(), 0.0))
            .add(&b.mul(&b.hermitian()));
        let sys = UplinkSystem {
            h,
            sigma,
            sigma_b2: 1.0,
            sigma_r2: 1.0,
        };
        let rho: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() * 2.0).collect();
        let combiners = mmse_combiners(&sys, &rho);
        let st = UserState {
            rho: rho.clone(),
            combiners,
            gamma: vec![1.0; k],
        };
        for uk in 0..k {
            let via_quotient = sinr(&sys, &st, uk).unwrap();
            let via_lemma = mmse_sinr_direct(&sys, &rho, uk);
            assert!(
                (via_quotient - via_lemma).abs() <= 1e-9 * (1.0 + via_lemma.abs()),
                "criterion 6: FAIL: SINR forms disagree: {via_quotient} vs {via_lemma}"
            );
            let xi = mse(&sys, &st, uk);
            assert!(
                (xi.ln() + (1.0 + via_lemma).ln()).abs() <= 1e-9,
                "criterion 6: FAIL: log xi != -log(1 + SINR)"
            );
        }
    }
    println!("criterion 6 (MMSE identities): PASS: 100 instances, both identities to 1e-9");
}

// ---------------------------------------------------------------------
// 7. Toy example: BLUE variance formula and Monte Carlo check
// ---------------------------------------------------------------------
#[test]
fn criterion_07_blue_toy() {
    let s2 = 1.0;
    assert_eq!(blue_variance_toy(0.0, s2), s2);
    assert!((blue_variance_toy(1.0, s2) - 2.0 / 3.0).abs() < 1e-15);
    assert!((blue_variance_toy(1e9, s2) - 0.5).abs() < 1e-9);

    // Monte Carlo BLUE on the explicit 3x2 projected model
    let alpha = 1.0;
    let n_samples = 100_000;
    let mut rng = stream_rng(707, StreamPurpose::Aux, 0);
    let mut gauss = || {
        // Box-Muller keeps the oracle free of library samplers
        let u1: f64 = rng.gen::<f64>().max(1e-300);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    // H = [[1,0],[0,1],[a,a]]; BLUE = (H'H)^{-1} H' y with y = w
    let g = [
        [1.0 + alpha * alpha, alpha * alpha],
        [alpha * alpha, 1.0 + alpha * alpha],
    ];
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let ginv = [
        [g[1][1] / det, -g[0][1] / det],
        [-g[1][0] / det, g[0][0] / det],
    ];
    let mut sum_sq = 0.0;
    for _ in 0..n_samples {
        let w = [
            gauss() * s2.sqrt(),
            gauss() * s2.sqrt(),
            gauss() * s2.sqrt(),
        ];
        // H' w = [w0 + a w2, w1 + a w2]
        let hw = [w[0] + alpha * w[2], w[1] + alpha * w[2]];
        let x0 = ginv[0][0] * hw[0] + ginv[0][1] * hw[1];
        sum_sq += x0 * x0;
    }
    let mc_var = sum_sq / n_samples as f64;
    let formula = blue_variance_toy(alpha, s2);
    let rel = (mc_var - formula).abs() / formula;
    assert!(
        rel <= 0.02,
        "criterion 7: FAIL: Monte Carlo variance {mc_var:.5} vs formula {formula:.5} ({rel:.3})"
    );
    println!(
        "criterion 7 (toy example): PASS: formula points exact, Monte Carlo within {:.2}%",
        rel * 100.0
    );
}

// ---------------------------------------------------------------------
// 8. Optimizer ascent on random instances
// ---------------------------------------------------------------------
fn random_synthetic_channel(seed: u64, m: usize, k: usize, n: usize, coupling: f64) -> ChannelSet {
    let mut rng = stream_rng(seed, StreamPurpose::Aux, 42);
    let mut rnd = |scale: f64| cx(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * scale;
    let hd = CMat::from_fn(m, k, |_, _| rnd(1.0));
    let hu = CMat::from_fn(n, k, |_, _| rnd(1.0));
    let hb = CMat::from_fn(m, n, |_, _| rnd(1.0));
    let mut hr = CMat::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rnd(coupling);
            hr.set(i, j, v);
            hr.set(j, i, v);
        }
    }
    ChannelSet {
        hd,
        hu,
        hb,
        hr,
        hr_tau_s: vec![0.0; n * n],
        rep_delays_s: vec![0.0; n],
        freq_hz: 2.0e9,
    }
}

#[test]
fn criterion_08_optimizer_ascent() {
    let limits = OptLimits {
        p_max_w: 1.0,
        p_max_rep_w: 1.0,
        a_max: 10.0,
        sigma_b2: 0.05,
        sigma_r2: 0.05,
    };
    let mut max_passes = 0;
    for trial in 0..50 {
        let cs = random_synthetic_channel(8000 + trial, 16, 5, 6, 0.12);
        let mut cfg = OptConfig::equal_weights(5);
        cfg.enforce_c5 = false;
        let st = initialize(&cs, &limits, &cfg);
        let out = run(&cs, &limits, &cfg, st).unwrap();
        for w in out.trace.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-6,
                "criterion 8: FAIL: trace decreased on trial {trial}: {:?}",
                out.trace
            );
        }
        let final_rate = *out.trace.last().unwrap();
        let final_system = assemble(
            &cs,
            &RepeaterConfig {
                alpha: out.alpha.clone(),
                nu_s: cs.rep_delays_s.clone(),
            },
            NoisePowers {
                bs_w: limits.sigma_b2,
                rep_w: limits.sigma_r2,
            },
            false,
        )
        .unwrap();
        let cap = sum_capacity(&final_system, limits.p_max_w, RateUnit::Bits);
        assert!(
            final_rate <= cap + 1e-9,
            "criterion 8: FAIL: sum rate {final_rate:.4} exceeds capacity {cap:.4} on trial {trial}"
        );
        max_passes = max_passes.max(out.iter);
    }
    println!(
        "criterion 8 (optimizer ascent): PASS: 50 instances monotone, rate <= capacity (longest run {max_passes} passes)"
    );
}

// ---------------------------------------------------------------------
// 9. QP solver vs. exhaustive grid search, plus the scalar closed form
// ---------------------------------------------------------------------
fn grid_argmin_3d(p: &QpProblem, step: f64) -> Vec<f64> {
    let counts: Vec<usize> = (0..3)
        .map(|i| ((p.upper[i] - p.lower[i]) / step).round() as usize + 1)
        .collect();
    let mut best = f64::INFINITY;
    let mut arg = p.lower.clone();
    let mut x = [0.0f64; 3];
    for a in 0..counts[0] {
        x[0] = p.lower[0] + a as f64 * step;
        for b in 0..counts[1] {
            x[1] = p.lower[1] + b as f64 * step;
            for c in 0..counts[2] {
                x[2] = p.lower[2] + c as f64 * step;
                if p.max_violation(&x) > 1e-12 {
                    continue;
                }
                let f = p.objective(&x);
                if f < best {
                    best = f;
                    arg = x.to_vec();
                }
            }
        }
    }
    arg
}

#[test]
fn criterion_09_qp_oracle() {
    let mut rng = stream_rng(909, StreamPurpose::Aux, 0);
    let step = 1e-3;
    for trial in 0..50 {
        // Build the instance around a known minimizer x* on the oracle's
        // lattice: with c = -Q x* - mu a the KKT conditions make x* the
        // unique optimum, with the linear row active and the box slack.
        // The grid search then pins x* independently.
        let b: Vec<f64> = (0..9).map(|_| rng.gen::<f64>() - 0.5).collect();
        let mut q = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                q[i * 3 + j] = (0..3).map(|l| b[l * 3 + i] * b[l * 3 + j]).sum::<f64>();
            }
            q[i * 3 + i] += 1.0;
        }
        let lower: Vec<f64> = (0..3)
            .map(|_| (rng.gen::<f64>() * 50.0).round() * step)
            .collect();
        let upper: Vec<f64> = lower
            .iter()
            .map(|l| l + (120.0 + (rng.gen::<f64>() * 120.0).round()) * step)
            .collect();
        // intended minimizer: a lattice point at least 20 steps inside
        let x_star: Vec<f64> = (0..3)
            .map(|i| {
                let span = ((upper[i] - lower[i]) / step).round() as i64;
                lower[i] + (20 + rng.gen_range(0..(span - 40))) as f64 * step
            })
            .collect();
        let a: Vec<f64> = (0..3).map(|_| (1 + rng.gen_range(0..3)) as f64).collect();
        let row_b: f64 = a.iter().zip(&x_star).map(|(u, v)| u * v).sum();
        let mu = 0.1 + 1.9 * rng.gen::<f64>();
        let c: Vec<f64> = (0..3)
            .map(|i| -(0..3).map(|j| q[i * 3 + j] * x_star[j]).sum::<f64>() - mu * a[i])
            .collect();
        let p = QpProblem {
            q,
            c,
            lower,
            upper,
            ineq_a: a,
            ineq_b: vec![row_b],
        };
        let x = solve_qp(&p, 1e-8).unwrap();
        let g = grid_argmin_3d(&p, step);
        for i in 0..3 {
            assert!(
                (x[i] - g[i]).abs() <= 2e-3,
                "criterion 9: FAIL: trial {trial} coordinate {i}: solver {} vs grid {}",
                x[i],
                g[i]
            );
            assert!(
                (x[i] - x_star[i]).abs() <= 1e-6,
                "criterion 9: FAIL: trial {trial}: solver missed the constructed optimum"
            );
        }
    }

    // single-repeater QP against the scalar clamp
    let limits = OptLimits {
        p_max_w: 1.0,
        p_max_rep_w: 1.0,
        a_max: 10.0,
        sigma_b2: 0.1,
        sigma_r2: 0.1,
    };
    let cfg = OptConfig::equal_weights(2);
    for seed in 0..25 {
        let cs = random_synthetic_channel(9100 + seed, 4, 2, 1, 0.0);
        let mut st = initialize(&cs, &limits, &cfg);
        let sys = assemble(
            &cs,
            &RepeaterConfig::uniform(1, st.alpha[0]),
            NoisePowers {
                bs_w: limits.sigma_b2,
                rep_w: limits.sigma_r2,
            },
            false,
        )
        .unwrap();
        st.combiners = optimizer::update_combiners(&sys, &st);
        let (w, _) = optimizer::update_weights(&sys, &st);
        st.varpi = w;
        let qp = build_alpha_qp(&cs, &st, &cfg, &limits);
        let x = solve_qp(&qp, 1e-10).unwrap();
        let expect = (-qp.c[0] / qp.q[0]).clamp(0.0, qp.upper[0]);
        assert!(
            (x[0] - expect).abs() <= 1e-12 * (1.0 + expect.abs()),
            "criterion 9: FAIL: scalar QP {} vs closed form {expect}",
            x[0]
        );
    }
    println!("criterion 9 (QP oracle): PASS: 50 grid-search matches, 25 scalar closed forms");
}

// ---------------------------------------------------------------------
// 10. End-to-end: optimized gains always certify stable
// ---------------------------------------------------------------------
#[test]
fn criterion_10_end_to_end_stability() {
    for trial in 0..50u64 {
        let s = Scenario {
            m: 16,
            k: 3 + (trial % 4) as usize,
            n: 4 + (trial % 9) as usize,
            seed: 1000 + trial,
            ..Scenario::default()
        };
        let layout = Layout::build(&s, trial).unwrap();
        let model = repeater_core::channel::PathlossModel::uma_umi(s.carrier_hz);
        let cs = repeater_core::channel::build_channels(&s, &layout, &model, trial);
        let limits = OptLimits::from_scenario(&s);
        let mut cfg = OptConfig::equal_weights(s.k);
        cfg.eta = s.eta;
        if trial % 2 == 1 {
            cfg.c3_variant = C3Variant::ColumnGain;
        }
        let st = initialize(&cs, &limits, &cfg);
        let out = run(&cs, &limits, &cfg, st).unwrap();
        let rc = RepeaterConfig {
            alpha: out.alpha.clone(),
            nu_s: cs.rep_delays_s.clone(),
        };
        let (_, _, d) = gershgorin_metrics(&cs, &rc);
        assert!(
            d <= cfg.eta,
            "criterion 10: FAIL: trial {trial}: D = {d} exceeds eta = {}",
            cfg.eta
        );
        let grid = SweepGrid::new(s.carrier_hz, 20.0e6, 5000.0).unwrap();
        let sweep = sweep_refining(&cs, &rc, &grid, 8);
        assert_eq!(
            sweep.winding_number, 0,
            "criterion 10: FAIL: trial {trial}: optimized gains wind"
        );
    }
    println!("criterion 10 (end-to-end stability): PASS: 50 scenarios, D <= eta and winding 0");
}

// ---------------------------------------------------------------------
// 11. Paper-scale defaults: repeaters vs. no repeaters (qualitative),
//     with advisory pre-processing SNR checks
// ---------------------------------------------------------------------
fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn criterion_11_paper_scale_defaults() {
    let trials = 20u64;
    let s = Scenario::default(); // M=64, K=20, N=40, forced R2B LoS, FR1
    let s_no_rep = Scenario { n: 0, ..s.clone() };
    let model = repeater_core::channel::PathlossModel::uma_umi(s.carrier_hz);
    let limits = OptLimits::from_scenario(&s);
    let noise = s.noise_power();

    let mut with_rates = Vec::new();
    let mut without_rates = Vec::new();
    let mut edge_snrs_db = Vec::new();
    let mut rep_snrs_db = Vec::new();

    for trial in 0..trials {
        let layout = Layout::build(&s, trial).unwrap();
        let cs = repeater_core::channel::build_channels(&s, &layout, &model, trial);
        let cfg = OptConfig::equal_weights(s.k);
        let out = run(&cs, &limits, &cfg, initialize(&cs, &limits, &cfg)).unwrap();
        with_rates.push(*out.trace.last().unwrap());

        let layout0 = Layout {
            rep_pos: Vec::new(),
            ..layout.clone()
        };
        let cs0 = repeater_core::channel::build_channels(&s_no_rep, &layout0, &model, trial);
        let out0 = run(&cs0, &limits, &cfg, initialize(&cs0, &limits, &cfg)).unwrap();
        without_rates.push(*out0.trace.last().unwrap());

        // advisory: per-antenna pre-processing SNR of the cell-edge user
        // and of its closest repeater's retransmission
        let bs2d = Point3::new(0.0, 0.0, 0.0);
        let (edge_k, _) = layout
            .user_pos
            .iter()
            .enumerate()
            .map(|(i, p)| (i, Point3::new(p.x, p.y, 0.0).dist_2d(&bs2d)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        let beta_d: f64 = (0..s.m)
            .map(|m| cs.hd.get(m, edge_k).norm_sqr())
            .sum::<f64>()
            / s.m as f64;
        edge_snrs_db.push(10.0 * (limits.p_max_w * beta_d / noise.bs_w).log10());

        let (near_rep, _) = layout
            .rep_pos
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.dist_3d(&layout.user_pos[edge_k])))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        let beta_u = cs.hu.get(near_rep, edge_k).norm_sqr();
        let beta_b: f64 = (0..s.m)
            .map(|m| cs.hb.get(m, near_rep).norm_sqr())
            .sum::<f64>()
            / s.m as f64;
        let alpha_rule = limits
            .a_max
            .min((limits.p_max_rep_w / (limits.p_max_w * beta_u + noise.rep_w)).sqrt());
        let rep_snr = limits.p_max_w * alpha_rule.powi(2) * beta_u * beta_b / noise.bs_w;
        rep_snrs_db.push(10.0 * rep_snr.log10());
    }

    let mean_with = with_rates.iter().sum::<f64>() / trials as f64;
    let mean_without = without_rates.iter().sum::<f64>() / trials as f64;
    let factor = mean_with / mean_without;
    println!(
        "criterion 11 (paper-scale defaults): sum rate {mean_with:.2} bps/Hz with repeaters vs {mean_without:.2} without (factor {factor:.2})"
    );

    // advisory-only comparisons: transcription-dependent, reported but
    // not fatal
    let med_edge = median(edge_snrs_db);
    let med_rep = median(rep_snrs_db);
    let edge_ok = (med_edge - (-23.4)).abs() <= 3.0;
    let rep_ok = (med_rep - (-3.9)).abs() <= 3.0;
    println!(
        "criterion 11 advisory: median cell-edge SNR {med_edge:.1} dB (reported -23.4, within 3 dB: {edge_ok}); median repeater-path SNR {med_rep:.1} dB (reported -3.9, within 3 dB: {rep_ok})"
    );

    assert!(
        (1.5..=2.5).contains(&factor),
        "criterion 11: FAIL: sum-rate factor {factor:.2} outside [1.5, 2.5]"
    );
    println!("criterion 11 (paper-scale defaults): PASS");
}

// ---------------------------------------------------------------------
// extra guard: the effective response stays finite for certified gains
// ---------------------------------------------------------------------
#[test]
fn certified_gains_admit_full_response() {
    let s = Scenario {
        m: 16,
        k: 4,
        n: 8,
        seed: 77,
        ..Scenario::default()
    };
    let layout = Layout::build(&s, 0).unwrap();
    let model = repeater_core::channel::PathlossModel::uma_umi(s.carrier_hz);
    let cs = repeater_core::channel::build_channels(&s, &layout, &model, 0);
    let limits = OptLimits::from_scenario(&s);
    let cfg = OptConfig::equal_weights(s.k);
    let out = run(&cs, &limits, &cfg, initialize(&cs, &limits, &cfg)).unwrap();
    let rc = RepeaterConfig {
        alpha: out.alpha.clone(),
        nu_s: cs.rep_delays_s.clone(),
    };
    let g = effective_g(&cs, &rc, cs.center_omega()).unwrap();
    assert!(g.max_abs().is_finite());
    // the optimization model and the true response agree well under the
    // stability margin
    let wsr_model = optimizer::evaluate_wsr(&cs, &out, &cfg, &limits, false).unwrap();
    let wsr_true = optimizer::evaluate_wsr(&cs, &out, &cfg, &limits, true).unwrap();
    assert!((wsr_model - wsr_true).abs() <= 0.35 * wsr_model.max(1.0));
}
