//! Builds grids, media and solver settings from a key=value configuration.

use csemwave::config::Config;
use csemwave::error::{Error, Result};
use csemwave::fdtd::SimConfig;
use csemwave::fileio::read_volume;
use csemwave::gradient::{DepthWeighting, WeightParams};
use csemwave::grid::{build_grid, AxisSpec, Grid3D, GridSpec, Stretch};
use csemwave::inversion::{InvConfig, LineSearchParams};
use csemwave::medium::{Anisotropy, ModelParam};
use csemwave::survey::{read_survey, Survey};
use csemwave::vol::Vol;

pub fn load_grid(cfg: &Config) -> Result<Grid3D<f64>> {
    let mut axes = Vec::with_capacity(3);
    for axis in 1..=3 {
        let n = cfg.usize_or(&format!("grid.n{axis}"), 0)?;
        if n == 0 {
            return Err(Error::Config(format!("grid.n{axis} is required")));
        }
        let d = cfg.require_f64(&format!("grid.d{axis}"))?;
        let stretch = match cfg.raw(&format!("grid.stretch{axis}")) {
            None => None,
            Some(s) => {
                let parts: Vec<&str> = s.split(',').map(str::trim).collect();
                if parts.len() != 2 {
                    return Err(Error::Config(format!(
                        "grid.stretch{axis}: expected 'factor,start_cell'"
                    )));
                }
                Some(Stretch {
                    factor: parts[0].parse().map_err(|_| {
                        Error::Config(format!("grid.stretch{axis}: bad factor"))
                    })?,
                    start: parts[1].parse().map_err(|_| {
                        Error::Config(format!("grid.stretch{axis}: bad start cell"))
                    })?,
                })
            }
        };
        axes.push(AxisSpec { n, d, stretch });
    }
    let origin = match cfg.raw("grid.origin") {
        None => [0.0; 3],
        Some(s) => {
            let v: Vec<f64> = s
                .split(',')
                .map(|t| t.trim().parse().unwrap_or(f64::NAN))
                .collect();
            if v.len() != 3 || v.iter().any(|x| x.is_nan()) {
                return Err(Error::Config("grid.origin: expected 'x,y,z'".into()));
            }
            [v[0], v[1], v[2]]
        }
    };
    build_grid(&GridSpec {
        axes: [axes[0], axes[1], axes[2]],
        npml: cfg.usize_or("grid.npml", 8)?,
        origin,
    })
}

pub fn load_survey(cfg: &Config, grid: &Grid3D<f64>) -> Result<Survey<f64>> {
    let mut survey: Survey<f64> = read_survey(&cfg.path("survey.file")?)?;
    if survey.reciprocity {
        survey = survey.apply_reciprocity()?;
    }
    survey.validate(grid)?;
    Ok(survey)
}

fn anisotropy(cfg: &Config) -> Result<Anisotropy> {
    match cfg.str_or("model.anisotropy", "iso") {
        "iso" => Ok(Anisotropy::Isotropic),
        "vti" => Ok(Anisotropy::Vti),
        other => Err(Error::Config(format!(
            "model.anisotropy must be iso|vti, got '{other}'"
        ))),
    }
}

fn load_rho(cfg: &Config, key_file: &str, grid: &Grid3D<f64>) -> Result<Option<Vol<f64>>> {
    if cfg.has(key_file) {
        let (vol, header) = read_volume::<f64>(&cfg.path(key_file)?)?;
        let [n1, n2, n3] = grid.n;
        if header.n != [n1, n2, n3] {
            return Err(Error::Config(format!(
                "{key_file}: dims {:?} do not match grid interior {:?}",
                header.n,
                [n1, n2, n3]
            )));
        }
        Ok(Some(vol))
    } else {
        Ok(None)
    }
}

/// Model parameters from `model.rho_h`/`model.rho_v` files (resistivity in
/// ohm-m) or a homogeneous fallback, with bounds and optional frozen cells.
pub fn load_model(cfg: &Config, grid: &Grid3D<f64>, prefix: &str) -> Result<ModelParam<f64>> {
    let [n1, n2, n3] = grid.n;
    let ani = anisotropy(cfg)?;
    let rho_min = cfg.f64_or("model.rho_min", 0.05)?;
    let rho_max = cfg.f64_or("model.rho_max", 1000.0)?;
    let (m_min, m_max) = (rho_min.ln(), rho_max.ln());

    let file_key = |class: &str| format!("model.{prefix}rho_{class}");
    let homog_key = format!("model.{prefix}homogeneous_rho");
    let to_m = |rho: Vol<f64>| rho.map(|r| r.ln());

    let m_h = match load_rho(cfg, &file_key("h"), grid)? {
        Some(v) => to_m(v),
        None => {
            let rho = cfg.f64_or(&homog_key, f64::NAN)?;
            if rho.is_nan() {
                return Err(Error::Config(format!(
                    "either {} or {homog_key} is required",
                    file_key("h")
                )));
            }
            Vol::filled(n1, n2, n3, rho.ln())
        }
    };
    let mut param = match ani {
        Anisotropy::Isotropic => ModelParam::isotropic(m_h, m_min, m_max),
        Anisotropy::Vti => {
            let m_v = match load_rho(cfg, &file_key("v"), grid)? {
                Some(v) => to_m(v),
                None => m_h.clone(),
            };
            ModelParam::vti(m_h, m_v, m_min, m_max)
        }
    };
    apply_features(cfg, grid, prefix, &mut param)?;
    param.project();
    // the (possibly feature-painted) starting model doubles as the reference
    param.m_ref = param.m.clone();

    if let Some(z) = cfg
        .raw("model.freeze_z_above")
        .map(|s| s.parse::<f64>())
        .transpose()
        .map_err(|_| Error::Config("model.freeze_z_above: bad number".into()))?
    {
        for k in 0..n3 {
            if grid.center(2, grid.npml + k) < z {
                for j in 0..n2 {
                    for i in 0..n1 {
                        *param.frozen.at_mut(i, j, k) = true;
                    }
                }
            }
        }
    }
    Ok(param)
}

/// Paint horizontal layers and rectangular blocks into the model:
/// `model.<prefix>layerN = z0,z1,rho` and
/// `model.<prefix>blockN = x0,x1,y0,y1,z0,z1,rho` (physical meters).
fn apply_features(
    cfg: &Config,
    grid: &Grid3D<f64>,
    prefix: &str,
    param: &mut ModelParam<f64>,
) -> Result<()> {
    let [n1, n2, n3] = grid.n;
    let paint = |param: &mut ModelParam<f64>, lo: [f64; 3], hi: [f64; 3], rho: f64| {
        let m = rho.ln();
        for k in 0..n3 {
            let z = grid.center(2, grid.npml + k);
            if z < lo[2] || z > hi[2] {
                continue;
            }
            for j in 0..n2 {
                let y = grid.center(1, grid.npml + j);
                if y < lo[1] || y > hi[1] {
                    continue;
                }
                for i in 0..n1 {
                    let x = grid.center(0, grid.npml + i);
                    if x < lo[0] || x > hi[0] {
                        continue;
                    }
                    for class in &mut param.m {
                        *class.at_mut(i, j, k) = m;
                    }
                }
            }
        }
    };
    for n in 1..=32 {
        let key = format!("model.{prefix}layer{n}");
        let Some(raw) = cfg.raw(&key) else { break };
        let v: Vec<f64> = raw
            .split(',')
            .map(|t| t.trim().parse().unwrap_or(f64::NAN))
            .collect();
        if v.len() != 3 || v.iter().any(|x| x.is_nan()) {
            return Err(Error::Config(format!("{key}: expected 'z0,z1,rho'")));
        }
        paint(
            param,
            [f64::NEG_INFINITY, f64::NEG_INFINITY, v[0]],
            [f64::INFINITY, f64::INFINITY, v[1]],
            v[2],
        );
    }
    for n in 1..=32 {
        let key = format!("model.{prefix}block{n}");
        let Some(raw) = cfg.raw(&key) else { break };
        let v: Vec<f64> = raw
            .split(',')
            .map(|t| t.trim().parse().unwrap_or(f64::NAN))
            .collect();
        if v.len() != 7 || v.iter().any(|x| x.is_nan()) {
            return Err(Error::Config(format!(
                "{key}: expected 'x0,x1,y0,y1,z0,z1,rho'"
            )));
        }
        paint(param, [v[0], v[2], v[4]], [v[1], v[3], v[5]], v[6]);
    }
    Ok(())
}

pub fn load_sim(cfg: &Config, freqs: Vec<f64>) -> Result<SimConfig<f64>> {
    let omega0 = match cfg.raw("sim.omega0") {
        Some(_) => cfg.require_f64("sim.omega0")?,
        None => 2.0 * std::f64::consts::PI * cfg.f64_or("sim.f0", 1.0)?,
    };
    let mut sim = SimConfig::new(freqs, omega0);
    sim.cfl = cfg.f64_or("sim.cfl", 0.9)?;
    sim.steady_tol = cfg.f64_or("sim.steady_tol", 1e-5)?;
    sim.check_every = cfg.usize_or("sim.check_every", 200)?;
    sim.nt_max = cfg.usize_or("sim.nt_max", 200_000)?;
    if cfg.has("sim.dt") {
        sim.dt_override = Some(cfg.require_f64("sim.dt")?);
    }
    if cfg.has("sim.fixed_steps") {
        sim.fixed_steps = Some(cfg.usize_or("sim.fixed_steps", 0)?);
    }
    if cfg.has("sim.wavelet_peak") {
        sim.wavelet_peak = Some(cfg.require_f64("sim.wavelet_peak")?);
    }
    Ok(sim)
}

pub struct BasisSettings {
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub nt: Option<usize>,
    pub cache_dir: Option<std::path::PathBuf>,
}

pub fn load_basis(cfg: &Config) -> Result<BasisSettings> {
    Ok(BasisSettings {
        gamma: cfg.f64_or("basis.gamma", 1e-3)?,
        tol: cfg.f64_or("basis.tol", 1e-10)?,
        max_iter: cfg.usize_or("basis.max_iter", 200)?,
        nt: if cfg.has("basis.nt") {
            Some(cfg.usize_or("basis.nt", 0)?)
        } else {
            None
        },
        cache_dir: if cfg.has("basis.cache_dir") {
            Some(cfg.path("basis.cache_dir")?)
        } else {
            None
        },
    })
}

pub fn load_weights(cfg: &Config) -> Result<WeightParams<f64>> {
    Ok(WeightParams {
        eta: cfg.f64_or("weights.eta", 0.03)?,
        floor: cfg.f64_or("weights.floor", 1e-15)?,
        mute_offset: cfg.f64_or("weights.mute_offset", 600.0)?,
    })
}

pub fn load_inversion(cfg: &Config) -> Result<InvConfig<f64>> {
    let alpha = match cfg.raw("inv.alpha") {
        None => [1.0, 1.0, 0.1],
        Some(s) => {
            let v: Vec<f64> = s
                .split(',')
                .map(|t| t.trim().parse().unwrap_or(f64::NAN))
                .collect();
            if v.len() != 3 || v.iter().any(|x| x.is_nan()) {
                return Err(Error::Config("inv.alpha: expected 'ax,ay,az'".into()));
            }
            [v[0], v[1], v[2]]
        }
    };
    let depth_weighting = if cfg.bool_or("precond.enable", false)? {
        Some(DepthWeighting {
            power: cfg.f64_or("precond.power", 1.5)?,
            z0: cfg.require_f64("precond.z0")?,
            seabed_z: cfg.f64_or("precond.seabed_z", 0.0)?,
        })
    } else {
        None
    };
    Ok(InvConfig {
        max_iter: cfg.usize_or("inv.max_iter", 30)?,
        memory: cfg.usize_or("inv.memory", 5)?,
        beta0: cfg.f64_or("inv.beta0", 0.01)?,
        cooling: cfg.f64_or("inv.cooling", 0.85)?,
        reg_alpha: alpha,
        line_search: LineSearchParams {
            c1: cfg.f64_or("inv.c1", 1e-4)?,
            shrink: cfg.f64_or("inv.shrink", 0.5)?,
            max_trials: cfg.usize_or("inv.ls_max_trials", 8)?,
        },
        max_update: cfg.f64_or("inv.max_update", 0.5)?,
        depth_weighting,
    })
}
