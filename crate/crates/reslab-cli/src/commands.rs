use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use reslab::cpx::{ComplexField, Precision};
use reslab::oracle::{box_violation_flags, compare, propagate_crank_nicolson, GridWave};
use reslab::potential::PiecewisePotential;
use reslab::resonance::{decay_rate_si, find_resonances, gamow_from_resonance, Resonance};
use reslab::spectral::{
    eta_bar_abs_at, eta_coefficient, evolve, forward_transform, k_points_near_resonance,
    transform_plus_at_real_k_mp, EvolutionResult, FnWave, PoleApproximation, TransformOptions,
    WaveFunction,
};
use reslab::threads::set_threads;
use reslab::units::HBAR;

use crate::config::RawConfig;
use crate::{CliError, Command, Common, DynamicsArgs};

/// Reference decay rate of the alpha-decay benchmark, 1/s.
const U234_REFERENCE_RATE: f64 = 1.3361e-13;

/// 17 significant digits, the fixed CSV float format.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display()))),
    }
}

fn csv(header: &str, rows: &[Vec<String>]) -> String {
    let mut text = String::with_capacity(rows.len() * 64 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

fn merged_config(common: &Common) -> Result<RawConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RawConfig::from_file(path).map_err(|e| CliError::config(e.0))?,
        None => RawConfig::default(),
    };
    if let Some(v) = &common.potential {
        cfg.set("potential", v.clone());
    }
    if let Some(v) = common.ell {
        cfg.set("ell", v.to_string());
    }
    if let Some(v) = common.delta {
        cfg.set("delta", v.to_string());
    }
    if let Some(v) = common.lambda {
        cfg.set("lambda", v.to_string());
    }
    if let Some(v) = &common.breakpoints {
        cfg.set("breakpoints", v.clone());
    }
    if let Some(v) = &common.heights {
        cfg.set("heights", v.clone());
    }
    if let Some(v) = common.a0_m {
        cfg.set("a0_m", v.to_string());
    }
    if let Some(v) = common.e1_mev {
        cfg.set("E1_MeV", v.to_string());
    }
    if let Some(v) = common.mass_kg {
        cfg.set("mass_kg", v.to_string());
    }
    if let Some(v) = common.digits {
        cfg.set("digits", v.to_string());
    }
    if let Some(v) = common.threads {
        cfg.set("threads", v.to_string());
    }
    Ok(cfg)
}

fn apply_threads(cfg: &RawConfig) -> Result<(), CliError> {
    let from_env = std::env::var("RESLAB_THREADS").ok().and_then(|s| s.parse::<usize>().ok());
    let n = match cfg.get_u32("threads").map_err(|e| CliError::config(e.0))? {
        Some(n) => Some(n as usize),
        None => from_env,
    };
    if let Some(n) = n {
        set_threads(n);
    }
    Ok(())
}

fn precision(cfg: &RawConfig, default_digits: Option<u32>) -> Result<Precision, CliError> {
    match cfg.get_u32("digits").map_err(|e| CliError::config(e.0))? {
        Some(d) => Ok(Precision::Extended(d)),
        None => Ok(match default_digits {
            Some(d) => Precision::Extended(d),
            None => Precision::Double,
        }),
    }
}

fn first_resonance_in(
    v: &PiecewisePotential,
    window: (f64, f64),
    max_im: f64,
    precision: Precision,
) -> Result<Resonance, CliError> {
    let rs = find_resonances(v, window, max_im, precision).map_err(|e| CliError::numeric(e.to_string()))?;
    rs.into_iter()
        .next()
        .ok_or_else(|| CliError::numeric(format!("no resonance found in ({}, {})", window.0, window.1)))
}

pub fn run(common: &Common, command: &Command) -> Result<(), CliError> {
    let cfg = merged_config(common)?;
    apply_threads(&cfg)?;
    let v = cfg.potential().map_err(|e| CliError::config(e.0))?;
    let units = cfg.units().map_err(|e| CliError::config(e.0))?;
    let out = common.out.as_deref();

    match command {
        Command::Scatter { kmin, kmax, knum } => {
            if !(*kmin > 0.0 && kmax > kmin && *knum >= 2) {
                return Err(CliError::config("need 0 < kmin < kmax and knum >= 2"));
            }
            let rows = (0..*knum)
                .map(|i| {
                    let k = kmin + (kmax - kmin) * i as f64 / (*knum - 1) as f64;
                    let sol = reslab::scattering::solve_scattering(&v, &Complex64::new(k, 0.0))
                        .map_err(|e| CliError::numeric(e.to_string()))?;
                    let (t, r_plus, _) =
                        sol.transmission_reflection().map_err(|e| CliError::numeric(e.to_string()))?;
                    Ok(vec![
                        fmt(k),
                        fmt(sol.a().re),
                        fmt(sol.a().im),
                        fmt(sol.b_plus().re),
                        fmt(sol.b_plus().im),
                        fmt(t),
                        fmt(r_plus),
                    ])
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            emit(out, &csv("k,re_a,im_a,re_b_plus,im_b_plus,T,R_plus", &rows))
        }

        Command::Resonances { kmin, kmax, max_im } => {
            let prec = precision(&cfg, None)?;
            let rs = find_resonances(&v, (*kmin, *kmax), *max_im, prec)
                .map_err(|e| CliError::numeric(e.to_string()))?;
            let rows: Vec<Vec<String>> = rs
                .iter()
                .map(|r| {
                    vec![
                        fmt(r.z.re),
                        fmt(r.z.im),
                        fmt(r.energy),
                        fmt(r.gamma),
                        fmt(decay_rate_si(r, &units)),
                        r.channel.to_string(),
                    ]
                })
                .collect();
            emit(out, &csv("re_z,im_z,E,Gamma,Gamma_SI,channel", &rows))
        }

        Command::Gamow { kmin, kmax, xmin, xmax, xnum } => {
            let prec = precision(&cfg, None)?;
            let r = first_resonance_in(&v, (*kmin, *kmax), 1.0, prec)?;
            let g = gamow_from_resonance(&v, &r).map_err(|e| CliError::numeric(e.to_string()))?;
            let rows: Vec<Vec<String>> = (0..*xnum)
                .map(|i| {
                    let x = xmin + (xmax - xmin) * i as f64 / (*xnum - 1).max(1) as f64;
                    let val = g.eval(x);
                    vec![fmt(x), fmt(val.re), fmt(val.im), fmt(val.norm())]
                })
                .collect();
            emit(out, &csv("x,re_G,im_G,abs_G", &rows))
        }

        Command::Transform { kmin, kmax, half_widths, knum } => {
            // narrow peaks need the extended backend; 50 digits covers the
            // benchmark's |Im z|/Re z ~ 1e-35
            let prec = precision(&cfg, Some(50))?;
            let r = first_resonance_in(&v, (*kmin, *kmax), 1.0, prec)?;
            let g = gamow_from_resonance(&v, &r).map_err(|e| CliError::numeric(e.to_string()))?;
            let trunc = g.truncated(v.inner_half_width());
            let c_eta = eta_coefficient(&trunc, &g, &r);
            let z = r.z_at_working_precision();
            let offsets: Vec<f64> = (0..*knum)
                .map(|i| -half_widths + 2.0 * half_widths * i as f64 / (*knum - 1).max(1) as f64)
                .collect();
            let ks = k_points_near_resonance(&z, &offsets);
            let rows = ks
                .iter()
                .map(|k| {
                    let hat = transform_plus_at_real_k_mp(&trunc, &v, k)
                        .map_err(|e| CliError::numeric(e.to_string()))?;
                    Ok(vec![
                        fmt(k.re_f64()),
                        fmt(hat.abs_f64()),
                        fmt(eta_bar_abs_at(c_eta, &z, k)),
                    ])
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            emit(out, &csv("k,abs_psihat_plus,abs_eta", &rows))
        }

        Command::Evolve { dynamics, xnum } => {
            let (result, _, _) = evolve_pipeline(&v, dynamics, *xnum)?;
            let mut rows = Vec::new();
            for (ti, &t) in result.times.iter().enumerate() {
                for (xi, &x) in result.x_grid.iter().enumerate() {
                    let p = result.profiles[ti][xi];
                    rows.push(vec![fmt(t), fmt(x), fmt(p.re), fmt(p.im), fmt(p.norm_sqr())]);
                }
            }
            emit(out, &csv("t,x,re_psi,im_psi,abs2", &rows))
        }

        Command::Survival { dynamics } => {
            let (result, r, _) = evolve_pipeline(&v, dynamics, 3)?;
            let probs = result.survival_probability();
            // calibrate the pole model at the time closest to 5/E
            let t_star = 5.0 / r.energy;
            let (ci, _) = result
                .times
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - t_star).abs().partial_cmp(&(b.1 - t_star).abs()).unwrap())
                .expect("nonempty times");
            let pole =
                PoleApproximation::calibrated(&r, result.survival_amplitude[ci], result.times[ci]);
            let rows: Vec<Vec<String>> = result
                .times
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let pole_p = pole.amplitude(t).norm_sqr() / (result.total_mass * result.total_mass);
                    vec![fmt(t), fmt(probs[i].1), fmt(result.window_mass[i]), fmt(pole_p)]
                })
                .collect();
            emit(out, &csv("t,P,window_mass,pole_P", &rows))
        }

        Command::OracleCompare { dynamics, xnum, box_half, dx, dt, taper } => {
            let mut dynamics = dynamics.clone();
            // CN needs times on its step grid
            dynamics.tmin = (dynamics.tmin / dt).round().max(1.0) * dt;
            dynamics.tmax = (dynamics.tmax / dt).round() * dt;
            let (result, r, state) = evolve_pipeline_tapered(&v, &dynamics, *xnum, *taper)?;
            let times: Vec<f64> = result.times.iter().map(|&t| (t / dt).round() * dt).collect();
            let window = result.window;
            let k_top = 2.0 * r.energy.sqrt() + 6.0;
            let box_half = box_half.unwrap_or(window + k_top * times.last().copied().unwrap_or(1.0));
            let grid = GridWave::from_wavefunction(state.as_ref(), box_half, *dx)
                .map_err(|e| CliError::numeric(e.to_string()))?;
            let snaps = propagate_crank_nicolson(&grid, &v, &times, *dt)
                .map_err(|e| CliError::numeric(e.to_string()))?;
            let diffs = compare(&result, &snaps, window).map_err(|e| CliError::numeric(e.to_string()))?;
            let flags = box_violation_flags(&snaps, window, 1e-7);
            let rows: Vec<Vec<String>> = diffs
                .iter()
                .zip(flags.iter())
                .map(|((t, d), f)| vec![fmt(*t), fmt(*d), (*f as u8).to_string()])
                .collect();
            emit(out, &csv("t,l2_diff,flag", &rows))
        }

        Command::U234 {} => {
            let bench = PiecewisePotential::double_well(1.0, 2.0, 436.0)
                .expect("benchmark parameters are valid");
            let prec = precision(&cfg, Some(50))?;
            let r = first_resonance_in(&bench, (7.0, 8.0), 1.0, prec)?;
            let z_si_re = units.to_si_wavenumber(r.z.re);
            let z_si_im = units.to_si_wavenumber(r.z.im);
            let gamma_si = decay_rate_si(&r, &units);
            let deviation = (gamma_si / U234_REFERENCE_RATE - 1.0).abs();
            let mut text = String::new();
            text.push_str(&format!("re_z_natural = {}\n", fmt(r.z.re)));
            text.push_str(&format!("im_z_natural = {}\n", fmt(r.z.im)));
            text.push_str(&format!("hbar_re_z_si = {}\n", fmt(HBAR * z_si_re)));
            text.push_str(&format!("hbar_im_z_si = {}\n", fmt(HBAR * z_si_im)));
            text.push_str(&format!("energy_natural = {}\n", fmt(r.energy)));
            text.push_str(&format!("gamma_natural = {}\n", fmt(r.gamma)));
            text.push_str(&format!("gamma_si_per_s = {}\n", fmt(gamma_si)));
            text.push_str(&format!("reference_gamma_si_per_s = {}\n", fmt(U234_REFERENCE_RATE)));
            text.push_str(&format!("relative_deviation = {}\n", fmt(deviation)));
            emit(out, &text)?;
            std::io::stdout().flush().ok();
            if deviation < 1e-3 {
                Ok(())
            } else {
                Err(CliError::verification(format!(
                    "decay rate deviates by {deviation:.3e} from the reference"
                )))
            }
        }
    }
}

fn time_grid(d: &DynamicsArgs) -> Result<Vec<f64>, CliError> {
    if d.tnum < 2 || d.tmax <= d.tmin {
        return Err(CliError::config("need tnum >= 2 and tmax > tmin"));
    }
    if d.tlog {
        if d.tmin <= 0.0 {
            return Err(CliError::config("log-spaced times need tmin > 0"));
        }
        let ratio = d.tmax / d.tmin;
        Ok((0..d.tnum)
            .map(|i| d.tmin * ratio.powf(i as f64 / (d.tnum - 1) as f64))
            .collect())
    } else {
        Ok((0..d.tnum)
            .map(|i| d.tmin + (d.tmax - d.tmin) * i as f64 / (d.tnum - 1) as f64)
            .collect())
    }
}

fn evolve_pipeline(
    v: &PiecewisePotential,
    d: &DynamicsArgs,
    xnum: usize,
) -> Result<(EvolutionResult, Resonance, Box<dyn WaveFunction>), CliError> {
    evolve_pipeline_tapered(v, d, xnum, 0.0)
}

/// Shared state preparation: locate resonances, truncate (optionally taper)
/// the Gamow state of the first root in the window, expand, evolve.
fn evolve_pipeline_tapered(
    v: &PiecewisePotential,
    d: &DynamicsArgs,
    xnum: usize,
    taper: f64,
) -> Result<(EvolutionResult, Resonance, Box<dyn WaveFunction>), CliError> {
    let scan_top = d.kmax_spectral.unwrap_or(d.kmax * 3.0).max(d.kmax);
    let rs = find_resonances(v, (0.05, scan_top), 2.0, Precision::Double)
        .map_err(|e| CliError::numeric(e.to_string()))?;
    let r = rs
        .iter()
        .find(|r| r.z.re >= d.kmin && r.z.re <= d.kmax)
        .cloned()
        .ok_or_else(|| CliError::numeric(format!("no resonance found in ({}, {})", d.kmin, d.kmax)))?;
    let g = gamow_from_resonance(v, &r).map_err(|e| CliError::numeric(e.to_string()))?;
    let width = d.trunc.unwrap_or_else(|| v.inner_half_width());
    let state: Box<dyn WaveFunction> = if taper > 0.0 {
        let flat = (width - taper).max(0.0);
        let g_inner = g.clone();
        Box::new(FnWave::new(-width, width, g.breakpoints().to_vec(), move |x| {
            let a = x.abs();
            let envelope = if a <= flat {
                1.0
            } else {
                ((a - flat) / (width - flat) * std::f64::consts::FRAC_PI_2).cos().powi(2)
            };
            g_inner.eval(x) * envelope
        }))
    } else {
        Box::new(g.truncated(width))
    };

    let mut opts = TransformOptions::for_resonances(&rs, d.tol);
    if let Some(k_top) = d.kmax_spectral {
        opts.k_max = k_top;
    }
    let coeffs = forward_transform(state.as_ref(), v, &opts).map_err(|e| CliError::numeric(e.to_string()))?;

    let times = time_grid(d)?;
    let window = d.window.unwrap_or_else(|| v.half_support());
    let xs: Vec<f64> = (0..xnum.max(2))
        .map(|i| -window + 2.0 * window * i as f64 / (xnum.max(2) - 1) as f64)
        .collect();
    let result = evolve(&coeffs, v, &times, window, &xs).map_err(|e| CliError::numeric(e.to_string()))?;
    Ok((result, r, state))
}
