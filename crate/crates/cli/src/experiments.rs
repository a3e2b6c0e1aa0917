//! The experiments behind each figure, emitting columnar CSV data.
//!
//! Every experiment is a pure function of (scenario, seed): trials fan
//! out across workers and are gathered in trial order, so reruns produce
//! byte-identical files.

use std::path::Path;

use rayon::prelude::*;

use repeater_core::channel::{
    build_channels, ChannelSet, LinkClass, LinkDraw, PathlossModel, RepeaterConfig,
};
use repeater_core::optimizer::{initialize, run, OptConfig, OptLimits, OptState};
use repeater_core::scenario::{Layout, Point3, Scenario};
use repeater_core::stability::{
    alpha_g, margin_csv, margin_sweep, nyquist_csv, nyquist_sweep, NyquistSweep, StabilityError,
    SweepGrid,
};
use repeater_core::units::{amplitude_to_db, db_to_amplitude, dbm_to_watts};
use repeater_core::uplink::{assemble, mmse_sinr_direct, sum_capacity, RateUnit};

use crate::CliError;

/// Fixed 12-significant-digit formatting keeps the outputs diffable.
fn fmt(v: f64) -> String {
    format!("{v:.11e}")
}

fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut text = String::with_capacity(rows.len() * 32 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| fmt(v)).collect();
        text.push_str(&line.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

/// One optimizer run for a scenario realization.
fn run_instance(
    s: &Scenario,
    model: &PathlossModel,
    trial: u64,
    eps: f64,
) -> Result<(OptState, ChannelSet, OptLimits, OptConfig), CliError> {
    let layout = Layout::build(s, trial).map_err(|e| CliError::new("scenario", e.to_string()))?;
    let cs = build_channels(s, &layout, model, trial);
    let limits = OptLimits::from_scenario(s);
    let mut cfg = OptConfig::equal_weights(s.k);
    cfg.eta = s.eta;
    cfg.eps = eps;
    let st = initialize(&cs, &limits, &cfg);
    let out = run(&cs, &limits, &cfg, st).map_err(|e| CliError::new("optimizer", e.to_string()))?;
    Ok((out, cs, limits, cfg))
}

/// Two fixed users, one repeater sliding along an offset track: MMSE sum
/// rate per position, plus its moving average.
#[allow(clippy::too_many_arguments)]
pub fn motivating(
    s: &Scenario,
    model: &PathlossModel,
    trials: usize,
    offset_m: f64,
    span_m: f64,
    step_m: f64,
    window_m: f64,
    out: &Path,
) -> Result<(), CliError> {
    let user_dist = 500.0;
    let user_gap = 40.0;
    let s2 = Scenario {
        k: 2,
        n: 1,
        ..s.clone()
    };
    let limits = OptLimits::from_scenario(&s2);
    let noise = s2.noise_power();
    let n_pos = (2.0 * span_m / step_m).floor() as usize + 1;

    let positions: Vec<f64> = (0..n_pos).map(|i| -span_m + i as f64 * step_m).collect();
    let mean_rates: Vec<f64> = positions
        .par_iter()
        .enumerate()
        .map(|(pi, &y)| {
            let layout = Layout {
                bs_pos: Point3::new(0.0, 0.0, s2.h_bs_m),
                user_pos: vec![
                    Point3::new(user_dist, user_gap / 2.0, s2.h_ue_m),
                    Point3::new(user_dist, -user_gap / 2.0, s2.h_ue_m),
                ],
                // the track runs parallel to the user line, offset toward
                // the BS
                rep_pos: vec![Point3::new(user_dist - offset_m, y, s2.h_rep_m)],
            };
            let mut sum = 0.0;
            for trial in 0..trials {
                let instance = (trial as u64) * 1_000_003 + pi as u64;
                let cs = build_channels(&s2, &layout, model, instance);
                // gain at the repeater power cap, both users at full power
                let input = limits.p_max_w
                    * (cs.hu.get(0, 0).norm_sqr() + cs.hu.get(0, 1).norm_sqr())
                    + noise.rep_w;
                let alpha = limits.a_max.min((limits.p_max_rep_w / input).sqrt());
                let cfg = RepeaterConfig {
                    alpha: vec![alpha],
                    nu_s: cs.rep_delays_s.clone(),
                };
                let sys = assemble(&cs, &cfg, noise, true).expect("single repeater is stable");
                let rho = vec![limits.p_max_w; 2];
                let rate: f64 = (0..2)
                    .map(|k| (1.0 + mmse_sinr_direct(&sys, &rho, k)).log2())
                    .sum();
                sum += rate;
            }
            sum / trials as f64
        })
        .collect();

    // centered moving average over the window
    let half = (window_m / (2.0 * step_m)).round() as usize;
    let smoothed: Vec<f64> = (0..n_pos)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n_pos - 1);
            mean_rates[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();

    let rows: Vec<Vec<f64>> = positions
        .iter()
        .zip(&mean_rates)
        .zip(&smoothed)
        .map(|((&y, &r), &sm)| vec![y, r, sm])
        .collect();
    write_csv(
        &out.join("motivating.csv"),
        "position_m,sum_rate_bps_hz,sum_rate_moving_avg",
        &rows,
    )
}

/// Optimal gain of a single assisting repeater given mean link gains:
/// power-capped when the repeater helps, off when it cannot.
pub fn optimal_placement_gain(
    beta_d: f64,
    beta_u: f64,
    p_max_w: f64,
    p_max_rep_w: f64,
    a_max: f64,
    sigma_b2: f64,
    sigma_r2: f64,
) -> f64 {
    let helps = if sigma_r2 == 0.0 {
        beta_u > 0.0
    } else {
        beta_u / sigma_r2 >= beta_d / sigma_b2
    };
    if helps {
        a_max.min((p_max_rep_w / (p_max_w * beta_u + sigma_r2)).sqrt())
    } else {
        0.0
    }
}

/// SNR of a cell-edge user as the repeater slides toward the BS, under
/// the optimal gain rule, for repeater noise ratios 0, 1, and 10.
pub fn placement(
    s: &Scenario,
    model: &PathlossModel,
    step_m: f64,
    out: &Path,
) -> Result<(), CliError> {
    let omega = 2.0 * std::f64::consts::PI * s.carrier_hz;
    let p_max = dbm_to_watts(s.p_max_dbm);
    let p_rep = dbm_to_watts(s.p_max_rep_dbm);
    let a_max = db_to_amplitude(s.a_max_db);
    let sigma_b2 = s.noise_power().bs_w;

    let bs = Point3::new(0.0, 0.0, s.h_bs_m);
    let user = Point3::new(s.cell_radius_m, 0.0, s.h_ue_m);
    let beta_d = model.mean_power_gain(
        LinkClass::Direct,
        user.dist_2d(&Point3::new(0.0, 0.0, 0.0)),
        user.dist_3d(&bs),
        omega,
    );

    let mut rows = Vec::new();
    let mut d = step_m.max(1.0);
    while d < s.cell_radius_m {
        let rep = Point3::new(d, 0.0, s.h_rep_m);
        let los = LinkDraw {
            los: true,
            shadow_db: 0.0,
        };
        let amp_b = model.amplitude(LinkClass::RepeaterBs, rep.dist_3d(&bs), omega, &los);
        let beta_b = amp_b * amp_b;
        let beta_u = model.mean_power_gain(
            LinkClass::UserRepeater,
            (user.x - rep.x).abs(),
            user.dist_3d(&rep),
            omega,
        );
        let mut row = vec![d];
        for ratio in [0.0, 1.0, 10.0] {
            let sigma_r2 = ratio * sigma_b2;
            let alpha =
                optimal_placement_gain(beta_d, beta_u, p_max, p_rep, a_max, sigma_b2, sigma_r2);
            let snr = p_max * (beta_d + alpha * alpha * beta_u * beta_b)
                / (sigma_b2 + alpha * alpha * beta_u * sigma_r2);
            row.push(10.0 * snr.log10());
        }
        row.push(10.0 * (p_max * beta_d / sigma_b2).log10());
        rows.push(row);
        d += step_m;
    }
    write_csv(
        &out.join("placement.csv"),
        "repeater_bs_dist_m,snr_db_ratio0,snr_db_ratio1,snr_db_ratio10,snr_db_direct",
        &rows,
    )
}

/// Per-iteration weighted sum rate, averaged over trials, with repeaters
/// (both stability-row variants) and without.
pub fn convergence(
    s: &Scenario,
    model: &PathlossModel,
    trials: usize,
    out: &Path,
) -> Result<(), CliError> {
    let s_none = Scenario { n: 0, ..s.clone() };

    struct TrialOut {
        with_row: Vec<f64>,
        with_col: Vec<f64>,
        without: Vec<f64>,
        cap_with: f64,
        cap_without: f64,
        final_state: serde_json::Value,
    }

    let per_trial: Vec<Result<TrialOut, CliError>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let run_variant =
                |sc: &Scenario, colsum: bool| -> Result<(OptState, f64, Vec<f64>), CliError> {
                    let layout = Layout::build(sc, trial)
                        .map_err(|e| CliError::new("scenario", e.to_string()))?;
                    let cs = build_channels(sc, &layout, model, trial);
                    let limits = OptLimits::from_scenario(sc);
                    let mut cfg = OptConfig::equal_weights(sc.k);
                    cfg.eta = sc.eta;
                    cfg.eps = 0.0; // full-length trace for the curve
                    if colsum {
                        cfg.c3_variant = repeater_core::optimizer::C3Variant::ColumnGain;
                    }
                    let out = run(&cs, &limits, &cfg, initialize(&cs, &limits, &cfg))
                        .map_err(|e| CliError::new("optimizer", e.to_string()))?;
                    let sys = assemble(
                        &cs,
                        &RepeaterConfig {
                            alpha: out.alpha.clone(),
                            nu_s: cs.rep_delays_s.clone(),
                        },
                        sc.noise_power(),
                        false,
                    )
                    .map_err(|e| CliError::new("optimizer", e.to_string()))?;
                    let cap = sum_capacity(&sys, limits.p_max_w, RateUnit::Bits);
                    let rates: Vec<f64> = (0..sc.k)
                        .map(|k| (1.0 + mmse_sinr_direct(&sys, &out.rho, k)).log2())
                        .collect();
                    Ok((out, cap, rates))
                };
            let (with_row, cap_with, rates) = run_variant(s, false)?;
            let (with_col, _, _) = run_variant(s, true)?;
            let (without, cap_without, _) = run_variant(&s_none, false)?;
            let final_state = serde_json::json!({
                "trial": trial,
                "iterations": with_row.iter,
                "rho_w": with_row.rho,
                "alpha_db": with_row
                    .alpha
                    .iter()
                    .map(|&a| if a > 0.0 { amplitude_to_db(a) } else { f64::NEG_INFINITY })
                    .collect::<Vec<f64>>(),
                "rates_bps_hz": rates,
                "weighted_sum_rate_bps_hz": with_row.trace.last().copied().unwrap_or(0.0),
            });
            Ok(TrialOut {
                with_row: with_row.trace,
                with_col: with_col.trace,
                without: without.trace,
                cap_with,
                cap_without,
                final_state,
            })
        })
        .collect();

    let mut outs = Vec::with_capacity(trials);
    for r in per_trial {
        outs.push(r?);
    }
    let i_max = outs
        .iter()
        .map(|t| t.with_row.len().max(t.without.len()).max(t.with_col.len()))
        .max()
        .unwrap_or(0);
    let mean_at = |get: &dyn Fn(&TrialOut) -> &Vec<f64>, i: usize| {
        outs.iter()
            .map(|t| {
                let tr = get(t);
                *tr.get(i).unwrap_or_else(|| tr.last().unwrap())
            })
            .sum::<f64>()
            / outs.len() as f64
    };
    let rows: Vec<Vec<f64>> = (0..i_max)
        .map(|i| {
            vec![
                (i + 1) as f64,
                mean_at(&|t| &t.with_row, i),
                mean_at(&|t| &t.with_col, i),
                mean_at(&|t| &t.without, i),
            ]
        })
        .collect();
    write_csv(
        &out.join("convergence.csv"),
        "iteration,with_repeaters,with_repeaters_colsum_c3,without_repeaters",
        &rows,
    )?;
    let raw: Vec<Vec<f64>> = outs
        .iter()
        .enumerate()
        .flat_map(|(trial, t)| {
            let pad = |tr: &Vec<f64>, i: usize| *tr.get(i).unwrap_or_else(|| tr.last().unwrap());
            (0..i_max)
                .map(|i| {
                    vec![
                        trial as f64,
                        (i + 1) as f64,
                        pad(&t.with_row, i),
                        pad(&t.with_col, i),
                        pad(&t.without, i),
                    ]
                })
                .collect::<Vec<_>>()
        })
        .collect();
    write_csv(
        &out.join("convergence_trials.csv"),
        "trial,iteration,with_repeaters,with_repeaters_colsum_c3,without_repeaters",
        &raw,
    )?;
    let cap_with = outs.iter().map(|t| t.cap_with).sum::<f64>() / outs.len() as f64;
    let cap_without = outs.iter().map(|t| t.cap_without).sum::<f64>() / outs.len() as f64;
    write_csv(
        &out.join("convergence_capacity.csv"),
        "sum_capacity_with,sum_capacity_without",
        &[vec![cap_with, cap_without]],
    )?;

    // per-trial final operating points (powers, gains, per-user rates)
    let states: Vec<&serde_json::Value> = outs.iter().map(|t| &t.final_state).collect();
    let text =
        serde_json::to_string_pretty(&states).map_err(|e| CliError::new("io", e.to_string()))?;
    std::fs::write(out.join("final_state.json"), text)
        .map_err(|e| CliError::new("io", e.to_string()))
}

/// Mean final sum rate vs. repeater count, with forced and probabilistic
/// repeater-BS line of sight.
pub fn repeater_count(
    s: &Scenario,
    model: &PathlossModel,
    trials: usize,
    counts: &[usize],
    out: &Path,
) -> Result<(), CliError> {
    for &n in counts {
        if n > s.m {
            return Err(CliError::new(
                "config",
                format!("repeater count {n} exceeds the antenna count {}", s.m),
            ));
        }
    }
    type CountOut = (Vec<f64>, Vec<Vec<f64>>);
    let results: Vec<Result<CountOut, CliError>> = counts
        .par_iter()
        .map(|&n| {
            let mut row = vec![n as f64];
            let mut raw = Vec::new();
            for forced in [true, false] {
                let sc = Scenario {
                    n,
                    los_r2b_forced: forced,
                    ..s.clone()
                };
                let mut sum = 0.0;
                for trial in 0..trials as u64 {
                    let (st, ..) = run_instance(&sc, model, trial, 1e-3)?;
                    let rate = st.trace.last().copied().unwrap_or(0.0);
                    raw.push(vec![
                        n as f64,
                        if forced { 1.0 } else { 0.0 },
                        trial as f64,
                        rate,
                    ]);
                    sum += rate;
                }
                row.push(sum / trials as f64);
            }
            Ok((row, raw))
        })
        .collect();
    let mut rows = Vec::new();
    let mut raw_rows = Vec::new();
    for r in results {
        let (row, raw) = r?;
        rows.push(row);
        raw_rows.extend(raw);
    }
    write_csv(
        &out.join("repeater_count.csv"),
        "n_repeaters,sum_rate_forced_los,sum_rate_prob_los",
        &rows,
    )?;
    write_csv(
        &out.join("repeater_count_trials.csv"),
        "n_repeaters,forced_los,trial,sum_rate_bps_hz",
        &raw_rows,
    )
}

/// Per-user final rates and powers (CDF data) with and without
/// repeaters, plus the fraction of silenced users.
pub fn rate_cdf(
    s: &Scenario,
    model: &PathlossModel,
    trials: usize,
    out: &Path,
) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for n in [0usize, s.n] {
        let sc = Scenario { n, ..s.clone() };
        let per_trial: Vec<Result<Vec<Vec<f64>>, CliError>> = (0..trials as u64)
            .into_par_iter()
            .map(|trial| {
                let (st, cs, ..) = run_instance(&sc, model, trial, 1e-3)?;
                let sys = assemble(
                    &cs,
                    &RepeaterConfig {
                        alpha: st.alpha.clone(),
                        nu_s: cs.rep_delays_s.clone(),
                    },
                    sc.noise_power(),
                    false,
                )
                .map_err(|e| CliError::new("optimizer", e.to_string()))?;
                Ok((0..sc.k)
                    .map(|k| {
                        let rate = (1.0 + mmse_sinr_direct(&sys, &st.rho, k)).log2();
                        vec![n as f64, trial as f64, k as f64, rate, st.rho[k]]
                    })
                    .collect())
            })
            .collect();
        let mut zero = 0usize;
        let mut total = 0usize;
        for r in per_trial {
            for row in r? {
                if row[4] <= 1e-9 * dbm_to_watts(s.p_max_dbm) {
                    zero += 1;
                }
                total += 1;
                rows.push(row);
            }
        }
        summary.push(vec![n as f64, zero as f64 / total as f64]);
    }
    write_csv(
        &out.join("rate_cdf.csv"),
        "n_repeaters,trial,user,rate_bps_hz,rho_w",
        &rows,
    )?;
    write_csv(
        &out.join("rate_cdf_summary.csv"),
        "n_repeaters,zero_power_fraction",
        &summary,
    )
}

/// Mean final sum rate for each stability margin eta.
pub fn eta_sweep(
    s: &Scenario,
    model: &PathlossModel,
    trials: usize,
    etas: &[f64],
    out: &Path,
) -> Result<(), CliError> {
    for &eta in etas {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(CliError::new("config", format!("eta {eta} outside (0, 1]")));
        }
    }
    type EtaOut = (Vec<f64>, Vec<Vec<f64>>);
    let results: Vec<Result<EtaOut, CliError>> = etas
        .par_iter()
        .map(|&eta| {
            let sc = Scenario { eta, ..s.clone() };
            let mut sum = 0.0;
            let mut raw = Vec::new();
            for trial in 0..trials as u64 {
                let (st, ..) = run_instance(&sc, model, trial, 1e-3)?;
                let rate = st.trace.last().copied().unwrap_or(0.0);
                raw.push(vec![eta, trial as f64, rate]);
                sum += rate;
            }
            Ok((vec![eta, sum / trials as f64], raw))
        })
        .collect();
    let mut rows = Vec::new();
    let mut raw_rows = Vec::new();
    for r in results {
        let (row, raw) = r?;
        rows.push(row);
        raw_rows.extend(raw);
    }
    write_csv(&out.join("eta_sweep.csv"), "eta,sum_rate_bps_hz", &rows)?;
    write_csv(
        &out.join("eta_sweep_trials.csv"),
        "eta,trial,sum_rate_bps_hz",
        &raw_rows,
    )
}

fn sweep_with_refinement(
    cs: &ChannelSet,
    cfg: &RepeaterConfig,
    grid: &SweepGrid,
) -> Result<NyquistSweep, CliError> {
    let mut g = *grid;
    for _ in 0..6 {
        match nyquist_sweep(cs, cfg, &g) {
            Ok(s) => return Ok(s),
            Err(StabilityError::GridTooCoarse { .. }) => g.step_hz /= 2.0,
            Err(e) => return Err(CliError::new("stability", e.to_string())),
        }
    }
    Err(CliError::new(
        "stability",
        "frequency grid still too coarse after refinement",
    ))
}

/// Nyquist image at the Gershgorin bound and the min-determinant margin
/// sweep around it, for repeaters equally spaced on a circle.
pub fn circle_nyquist(
    n: usize,
    radius_m: f64,
    center_hz: f64,
    span_hz: f64,
    step_hz: f64,
    (alpha_min_db, alpha_max_db, alpha_step_db): (f64, f64, f64),
    out: &Path,
) -> Result<(), CliError> {
    if n < 2 {
        return Err(CliError::new("config", "circle needs at least 2 repeaters"));
    }
    let cs = ChannelSet::circle_free_space(n, radius_m, center_hz);
    let ag = alpha_g(&cs);
    let grid = SweepGrid::new(center_hz, span_hz, step_hz)
        .map_err(|e| CliError::new("stability", e.to_string()))?;

    let sweep = sweep_with_refinement(&cs, &RepeaterConfig::uniform(n, ag), &grid)?;
    std::fs::write(out.join("circle_nyquist_image.csv"), nyquist_csv(&sweep))
        .map_err(|e| CliError::new("io", e.to_string()))?;

    let mut rel_db = alpha_min_db;
    let mut alphas = Vec::new();
    while rel_db <= alpha_max_db + 1e-9 {
        alphas.push(ag * db_to_amplitude(rel_db));
        rel_db += alpha_step_db;
    }
    let points: Vec<(f64, f64)> = alphas
        .par_iter()
        .map(|&a| margin_sweep(&cs, &[a], &grid)[0])
        .collect();
    std::fs::write(out.join("circle_margin.csv"), margin_csv(&points))
        .map_err(|e| CliError::new("io", e.to_string()))?;

    write_csv(
        &out.join("circle_summary.csv"),
        "alpha_g_db,min_abs_det_at_alpha_g,winding_at_alpha_g",
        &[vec![
            amplitude_to_db(ag),
            sweep.min_abs_det,
            sweep.winding_number as f64,
        ]],
    )
}

/// Channel matrices of one realization as long-format CSV (real/imag
/// pairs), for external inspection.
pub fn dump_channels(
    s: &Scenario,
    model: &PathlossModel,
    trial: u64,
    out: &Path,
) -> Result<(), CliError> {
    let layout = Layout::build(s, trial).map_err(|e| CliError::new("scenario", e.to_string()))?;
    let cs = build_channels(s, &layout, model, trial);
    let dump = |name: &str, m: &repeater_core::numerics::CMat| -> Result<(), CliError> {
        let mut rows = Vec::with_capacity(m.rows() * m.cols());
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                let z = m.get(r, c);
                rows.push(vec![r as f64, c as f64, z.re, z.im]);
            }
        }
        write_csv(&out.join(name), "row,col,re,im", &rows)
    };
    dump("hd.csv", &cs.hd)?;
    dump("hu.csv", &cs.hu)?;
    dump("hb.csv", &cs.hb)?;
    dump("hr.csv", &cs.hr)?;
    let tau_rows: Vec<Vec<f64>> = (0..cs.n_repeaters())
        .flat_map(|r| {
            (0..cs.n_repeaters())
                .map(move |c| (r, c))
                .collect::<Vec<_>>()
        })
        .map(|(r, c)| vec![r as f64, c as f64, cs.hr_tau_s[r * cs.n_repeaters() + c]])
        .collect();
    write_csv(&out.join("hr_tau.csv"), "row,col,tau_s", &tau_rows)
}
