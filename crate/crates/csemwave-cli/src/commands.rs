//! The four batch commands: forward, invert, basis, gradcheck.

use crate::setup;
use csemwave::adjoint_source::{compute_basis, load_basis_cache, save_basis_cache};
use csemwave::config::Config;
use csemwave::error::{Error, Result};
use csemwave::fileio::{
    write_complex_volume, write_iteration_log, write_significant_misfit, write_volume,
    VolumeHeader,
};
use csemwave::gradient::{compute_weights, Problem};
use csemwave::inversion::invert;
use csemwave::medium::{Anisotropy, ModelParam};
use csemwave::oracle::{cosine_similarity, fd_gradient, timedomain_gradient};
use csemwave::scalar::Real;
use csemwave::survey::{read_data_csv, write_data_csv, DataSet};
use csemwave::vol::Vol;
use std::io::Write;
use std::path::{Path, PathBuf};

pub struct CommonArgs {
    pub out: Option<PathBuf>,
    pub noise: Option<f64>,
    pub seed: Option<u64>,
}

fn out_dir(cfg: &Config, args: &CommonArgs) -> Result<PathBuf> {
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => {
            let raw = cfg.str_or("out.dir", ".");
            let p = PathBuf::from(raw);
            if p.is_absolute() {
                p
            } else {
                cfg.base_dir.join(p)
            }
        }
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn interior_header(grid: &csemwave::grid::Grid3D<f64>, units: &str) -> VolumeHeader {
    let mut d: [Vec<f64>; 3] = [vec![], vec![], vec![]];
    for axis in 0..3 {
        d[axis] = grid
            .interior_cells(axis)
            .map(|i| grid.cell_width(axis, i))
            .collect();
        // collapse uniform spacing to a single entry
        if d[axis]
            .windows(2)
            .all(|w| (w[0] - w[1]).abs() < 1e-12 * w[0].abs())
        {
            d[axis].truncate(1);
        }
    }
    VolumeHeader {
        n: grid.n,
        d,
        units: units.to_string(),
    }
}

/// Forward-model the survey and write receiver spectra (optionally noisy) as
/// CSV, plus raw field volumes when requested.
pub fn cmd_forward(cfg: &Config, args: &CommonArgs) -> Result<()> {
    let grid = setup::load_grid(cfg)?;
    let survey = setup::load_survey(cfg, &grid)?;
    let sim = setup::load_sim(cfg, survey.freqs.clone())?;
    let model = setup::load_model(cfg, &grid, "")?;
    let medium = model.to_medium(&grid)?;
    let out = out_dir(cfg, args)?;

    let empty = DataSet::new();
    let problem = Problem {
        grid: &grid,
        survey: &survey,
        obs: &empty,
        sim: sim.clone(),
        basis_gamma: 1e-3,
        basis_tol: 1e-10,
        basis_max_iter: 200,
        basis_nt: None,
    };
    let dt = problem.time_step(&medium)?;

    let want_volumes = cfg.bool_or("out.volumes", false)?;
    let mut cfg_run = sim.clone();
    cfg_run.dt_override = Some(dt);

    let mut data = DataSet::new();
    let mut any_unconverged = false;
    if want_volumes {
        for src in &survey.sources {
            let gather = csemwave::fdtd::run_forward(
                &grid,
                &medium,
                &cfg_run,
                src,
                &survey.receivers,
                true,
            )?;
            any_unconverged |= !gather.converged;
            for s in &gather.samples {
                for (freq_idx, &value) in s.values.iter().enumerate() {
                    data.push(csemwave::survey::DataEntry {
                        src: src.id,
                        rcv: s.receiver,
                        component: s.component,
                        freq_idx,
                        value,
                        weight: 0.0,
                    });
                }
            }
            let vols = gather.e_volumes.as_ref().unwrap();
            let header = VolumeHeader {
                n: [grid.np(0) + 1, grid.np(1) + 1, grid.np(2) + 1],
                d: [vec![], vec![], vec![]],
                units: "V/m".into(),
            };
            for (f, comps) in vols.iter().enumerate() {
                for (c, vol) in comps.iter().enumerate() {
                    let name = format!(
                        "vol_src{}_f{}_E{}.bin",
                        src.id,
                        survey.freqs[f],
                        ["x", "y", "z"][c]
                    );
                    write_complex_volume(&out.join(name), vol, &header)?;
                }
            }
        }
    } else {
        let (d, converged) = problem.synthetic_data(&medium, dt)?;
        data = d;
        any_unconverged = !converged;
    }
    if any_unconverged {
        eprintln!("warning: at least one gather hit nt_max before steady state");
    }

    let eta = args.noise.unwrap_or(cfg.f64_or("noise.eta", 0.0)?);
    if eta > 0.0 {
        let seed = args.seed.unwrap_or(cfg.usize_or("noise.seed", 1234)? as u64);
        data.add_noise(eta, seed);
    }
    // fill weights so downstream inversion configs can reuse the file as-is
    let wp = setup::load_weights(cfg)?;
    compute_weights(&mut data, &survey, &wp)?;
    write_data_csv(&out.join("data.csv"), &data, &survey.freqs)?;
    println!("wrote {}", out.join("data.csv").display());
    Ok(())
}

fn write_models(
    out: &Path,
    grid: &csemwave::grid::Grid3D<f64>,
    param: &ModelParam<f64>,
) -> Result<()> {
    let header = interior_header(grid, "ohm-m");
    let names = match param.anisotropy {
        Anisotropy::Isotropic => vec!["rho.bin"],
        Anisotropy::Vti => vec!["rho_h.bin", "rho_v.bin"],
    };
    for (m, name) in param.m.iter().zip(names) {
        let rho: Vol<f64> = m.map(|v| v.exp());
        write_volume(&out.join(name), &rho, &header)?;
    }
    Ok(())
}

/// Run the full inversion loop and write models, logs and residual scatter.
pub fn cmd_invert(cfg: &Config, args: &CommonArgs) -> Result<()> {
    let grid = setup::load_grid(cfg)?;
    let survey = setup::load_survey(cfg, &grid)?;
    let sim = setup::load_sim(cfg, survey.freqs.clone())?;
    let initial = setup::load_model(cfg, &grid, "initial_")?;
    let out = out_dir(cfg, args)?;

    let mut obs: DataSet<f64> = read_data_csv(&cfg.path("data.file")?, &survey.freqs)?;
    if obs.is_empty() {
        return Err(Error::Config("observed data file is empty".into()));
    }
    let wp = setup::load_weights(cfg)?;
    compute_weights(&mut obs, &survey, &wp)?;

    let basis = setup::load_basis(cfg)?;
    let problem = Problem {
        grid: &grid,
        survey: &survey,
        obs: &obs,
        sim,
        basis_gamma: basis.gamma,
        basis_tol: basis.tol,
        basis_max_iter: basis.max_iter,
        basis_nt: basis.nt,
    };
    let inv_cfg = setup::load_inversion(cfg)?;

    // residual scatter before
    let initial_report = problem.misfit(&initial)?;
    let rows: Vec<(u32, u32, [f64; 3], f64)> = initial_report
        .per_receiver
        .iter()
        .map(|&(s, r, v)| (s, r, survey.receiver(r).unwrap().position, v))
        .collect();
    write_significant_misfit(&out.join("significant_misfit_initial.csv"), &rows)?;

    let (final_model, records) = invert(&problem, initial, &inv_cfg)?;
    write_iteration_log(&out.join("iterations.csv"), &records)?;
    write_models(&out, &grid, &final_model)?;

    let final_report = problem.misfit(&final_model)?;
    let rows: Vec<(u32, u32, [f64; 3], f64)> = final_report
        .per_receiver
        .iter()
        .map(|&(s, r, v)| (s, r, survey.receiver(r).unwrap().position, v))
        .collect();
    write_significant_misfit(&out.join("significant_misfit_final.csv"), &rows)?;
    write_data_csv(&out.join("data_final.csv"), &final_report.d_syn, &survey.freqs)?;

    println!(
        "inversion finished: {} iterations, normalized misfit {:.6e} -> {:.6e}",
        records.len(),
        initial_report.normalized,
        final_report.normalized
    );
    Ok(())
}

/// Emit the basis series and CGNR convergence history as CSV.
pub fn cmd_basis(cfg: &Config, args: &CommonArgs) -> Result<()> {
    let out = out_dir(cfg, args)?;
    let freqs = cfg.f64_list("basis.freqs").or_else(|_| {
        // fall back to the survey frequency list when given
        let grid = setup::load_grid(cfg)?;
        Ok::<_, Error>(setup::load_survey(cfg, &grid)?.freqs)
    })?;
    let omega0 = match cfg.raw("sim.omega0") {
        Some(_) => cfg.require_f64("sim.omega0")?,
        None => 2.0 * std::f64::consts::PI * cfg.f64_or("sim.f0", 1.0)?,
    };
    let settings = setup::load_basis(cfg)?;
    let nt = settings
        .nt
        .ok_or_else(|| Error::Config("basis.nt is required for the basis command".into()))?;
    let params = csemwave::adjoint_source::BasisParams {
        dt: cfg.require_f64("basis.dt")?,
        nt,
        freqs,
        omega0,
        gamma: settings.gamma,
    };

    let basis = match settings
        .cache_dir
        .as_deref()
        .map(|d| load_basis_cache::<f64>(&params, d))
        .transpose()?
        .flatten()
    {
        Some(b) => b,
        None => {
            let b = compute_basis(&params, settings.tol, settings.max_iter)?;
            if let Some(dir) = settings.cache_dir.as_deref() {
                save_basis_cache(&b, dir)?;
            }
            b
        }
    };
    if !basis.converged {
        eprintln!("warning: basis solver did not reach tolerance");
    }

    let mut f = std::fs::File::create(out.join("basis.csv"))?;
    let cols: Vec<String> = (1..=basis.columns.len()).map(|k| format!("b{k}")).collect();
    writeln!(f, "t,{}", cols.join(","))?;
    for n in 0..params.nt {
        let mut row = format!("{:e}", params.dt * n as f64);
        for col in &basis.columns {
            row.push_str(&format!(",{:e}", col[n].f64()));
        }
        writeln!(f, "{row}")?;
    }

    let mut f = std::fs::File::create(out.join("basis_convergence.csv"))?;
    writeln!(f, "column,iteration,relative_residual")?;
    for (k, hist) in basis.histories.iter().enumerate() {
        for (it, r) in hist.iter().enumerate() {
            writeln!(f, "{},{},{:e}", k + 1, it, r.f64())?;
        }
    }
    println!("wrote {}", out.join("basis.csv").display());
    Ok(())
}

/// Compare adjoint-state, finite-difference and time-domain derivatives on
/// probe cells of a tiny configuration.
pub fn cmd_gradcheck(cfg: &Config, args: &CommonArgs) -> Result<()> {
    let grid = setup::load_grid(cfg)?;
    let survey = setup::load_survey(cfg, &grid)?;
    let mut sim = setup::load_sim(cfg, survey.freqs.clone())?;
    if sim.fixed_steps.is_none() {
        return Err(Error::Config(
            "gradcheck requires sim.fixed_steps for deterministic differencing".into(),
        ));
    }
    let model = setup::load_model(cfg, &grid, "")?;
    let out = out_dir(cfg, args)?;

    let mut obs: DataSet<f64> = read_data_csv(&cfg.path("data.file")?, &survey.freqs)?;
    let wp = setup::load_weights(cfg)?;
    compute_weights(&mut obs, &survey, &wp)?;

    // pin the time step of the evaluated model for every run
    let medium = model.to_medium(&grid)?;
    let basis = setup::load_basis(cfg)?;
    let probe = Problem {
        grid: &grid,
        survey: &survey,
        obs: &obs,
        sim: sim.clone(),
        basis_gamma: basis.gamma,
        basis_tol: basis.tol,
        basis_max_iter: basis.max_iter,
        basis_nt: basis.nt,
    };
    let dt = probe.time_step(&medium)?;
    sim.dt_override = Some(dt);
    let problem = Problem { sim, ..probe };

    let cells: Vec<(usize, usize, usize, usize)> = match cfg.raw("gradcheck.cells") {
        Some(s) => s
            .split(';')
            .map(|triple| {
                let v: Vec<usize> = triple
                    .split(',')
                    .map(|t| t.trim().parse().unwrap_or(usize::MAX))
                    .collect();
                match v.as_slice() {
                    [c, i, j, k] if *i != usize::MAX => Ok((*c, *i, *j, *k)),
                    [i, j, k] if *i != usize::MAX => Ok((0, *i, *j, *k)),
                    _ => Err(Error::Config(format!("gradcheck.cells: bad entry '{triple}'"))),
                }
            })
            .collect::<Result<_>>()?,
        None => {
            let [n1, n2, n3] = grid.n;
            let (c1, c2, c3) = (n1 / 2, n2 / 2, n3 / 2);
            vec![
                (0, c1, c2, c3),
                (0, c1 / 2, c2, c3),
                (0, c1, c2 / 2, c3),
                (0, c1, c2, c3 / 2),
                (0, (c1 + n1 - 1) / 2, (c2 + n2 - 1) / 2, c3),
            ]
        }
    };
    let delta = cfg.f64_or("gradcheck.delta", 1e-4)?;
    let budget = (cfg.f64_or("gradcheck.budget_mb", 512.0)? * 1048576.0) as usize;

    let (_, adj) = problem.misfit_and_gradient(&model)?;
    let fd = fd_gradient(
        |p| problem.misfit(p).map(|r| r.phi_d),
        &model,
        &cells,
        delta,
    )?;
    let td = timedomain_gradient(&problem, &model, budget)?;

    let adj_cells: Vec<f64> = cells.iter().map(|&(c, i, j, k)| adj[c].at(i, j, k)).collect();
    let td_cells: Vec<f64> = cells.iter().map(|&(c, i, j, k)| td[c].at(i, j, k)).collect();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);

    let mut f = std::fs::File::create(out.join("gradcheck.csv"))?;
    writeln!(
        f,
        "class,i1,i2,i3,adjoint,finite_difference,timedomain,rel_adj_fd,rel_td_fd"
    )?;
    for (n, &(c, i, j, k)) in cells.iter().enumerate() {
        writeln!(
            f,
            "{c},{i},{j},{k},{:e},{:e},{:e},{:e},{:e}",
            adj_cells[n],
            fd[n],
            td_cells[n],
            rel(adj_cells[n], fd[n]),
            rel(td_cells[n], fd[n])
        )?;
    }
    let cos_adj = cosine_similarity(&adj_cells, &fd);
    let cos_td = cosine_similarity(&td_cells, &fd);
    let full_adj: Vec<f64> = adj.iter().flat_map(|v| v.data.iter().copied()).collect();
    let full_td: Vec<f64> = td.iter().flat_map(|v| v.data.iter().copied()).collect();
    let cos_full = cosine_similarity(&full_adj, &full_td);
    writeln!(f, "# cosine_adjoint_fd {cos_adj:e}")?;
    writeln!(f, "# cosine_timedomain_fd {cos_td:e}")?;
    writeln!(f, "# cosine_timedomain_adjoint_full {cos_full:e}")?;
    // gradient volumes for inspection
    let header = interior_header(&grid, "dphi/dm");
    for (class, g) in adj.iter().enumerate() {
        write_volume(&out.join(format!("gradient_class{class}.bin")), g, &header)?;
    }
    println!(
        "gradcheck: cosine adjoint-fd {cos_adj:.6}, timedomain-fd {cos_td:.6}, volumes {cos_full:.6}"
    );
    Ok(())
}
