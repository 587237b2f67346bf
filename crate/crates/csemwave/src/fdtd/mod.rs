//! Fictitious-wave-domain leap-frog engine with on-the-fly frequency
//! extraction.
//!
//! One simulation instance owns its mutable field state; concurrent
//! simulations for different sources share the read-only grid and medium.

pub mod dtft;
pub mod pml;
pub mod step;

pub use dtft::{check_steady_state, injection_calibration, kernel, kernel_rate, SourceKind, Wavelet};
pub use step::{FieldState, Operator};

use crate::error::{Error, Result};
use crate::grid::{stagger_weights, Component, Grid3D};
use crate::medium::{FictitiousPermittivity, Medium};
use crate::scalar::{two_pi, Cplx, Real};
use crate::survey::{ReceiverDef, SourceDef};
use crate::vol::Vol;

/// Simulation controls shared by forward and adjoint runs.
#[derive(Debug, Clone)]
pub struct SimConfig<T> {
    /// CFL safety factor in (0, 1].
    pub cfl: T,
    /// Pin the time step instead of deriving it from the CFL bound.
    pub dt_override: Option<T>,
    /// Hard cap on the number of steps.
    pub nt_max: usize,
    /// Diffusive-domain frequencies of interest, Hz.
    pub freqs: Vec<T>,
    /// Fictitious-domain reference angular frequency, rad/s.
    pub omega0: T,
    /// Relative steady-state tolerance on tracked receiver spectra.
    pub steady_tol: T,
    /// Steps between convergence checks.
    pub check_every: usize,
    /// Wavelet spectral peak in fictitious Hz (None: auto from `freqs`).
    pub wavelet_peak: Option<T>,
    /// Run exactly this many steps, disabling the steady-state exit.
    pub fixed_steps: Option<usize>,
    /// Never exit before this many steps (source series must finish playing).
    pub min_steps: usize,
}

impl<T: Real> SimConfig<T> {
    pub fn new(freqs: Vec<T>, omega0: T) -> Self {
        SimConfig {
            cfl: T::of(0.9),
            dt_override: None,
            nt_max: 200_000,
            freqs,
            omega0,
            steady_tol: T::of(1e-5),
            check_every: 200,
            wavelet_peak: None,
            fixed_steps: None,
            min_steps: 0,
        }
    }

    pub fn wavelet(&self) -> Wavelet<T> {
        match self.wavelet_peak {
            Some(p) => Wavelet::with_peak(p),
            None => Wavelet::auto(self.freqs.iter(), self.omega0),
        }
    }
}

/// Stable leap-frog step for the fictitious wave system:
/// `dt = cfl * min(spacing) / (c_max * sqrt(3))` with `c_max = 1/sqrt(mu eps_min)`.
pub fn compute_time_step<T: Real>(
    grid: &Grid3D<T>,
    eps: &FictitiousPermittivity<T>,
    mu: T,
    cfl: T,
) -> Result<T> {
    if !(cfl > T::zero()) || cfl > T::one() {
        return Err(Error::Simulation(format!("cfl {cfl} outside (0, 1]")));
    }
    let eps_min = eps.eps_min();
    if !(eps_min > T::zero()) {
        return Err(Error::Simulation("degenerate medium: eps_min <= 0".into()));
    }
    let c_max = (mu * eps_min).sqrt().recip();
    Ok(cfl * grid.min_width() / (c_max * T::of(3.0).sqrt()))
}

/// A dipole source driven either by the configured wavelet or by an explicit
/// fictitious-time series (one value per step).
#[derive(Debug, Clone)]
pub struct Drive<T> {
    pub position: [T; 3],
    pub orientation: [T; 3],
    pub kind: SourceKind,
    pub moment: T,
    pub series: Option<Vec<T>>,
}

/// A receiver sample point for one field component.
#[derive(Debug, Clone)]
pub struct Probe<T> {
    pub position: [T; 3],
    pub component: Component,
}

struct PreparedTap<T> {
    flat: usize,
    coef: T,
}

struct PreparedDrive<T> {
    /// Taps per component axis, with update coefficients folded in.
    taps: [Vec<PreparedTap<T>>; 3],
    electric: bool,
    series: Option<Vec<T>>,
}

struct PreparedProbe<T> {
    component: Component,
    taps: Vec<PreparedTap<T>>,
}

/// What a simulation should record beyond receiver spectra.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Accumulate frequency-domain E volumes over the interior.
    pub record_volumes: bool,
    /// Keep the raw time series at every probe.
    pub record_series: bool,
    /// Record interior E snapshots every step, failing beyond this many bytes.
    pub snapshot_budget: Option<usize>,
}

/// Raw engine output. Probe spectra and volumes carry the plain quadrature
/// scale (kernel times dt); interpretation factors are applied by callers.
pub struct SimOutput<T> {
    pub dt: T,
    pub steps: usize,
    pub converged: bool,
    /// `[probe][freq]`
    pub probe_spectra: Vec<Vec<Cplx<T>>>,
    /// `[probe][step]` raw samples (E at n dt, H at (n+1/2) dt) when requested.
    pub probe_series: Option<Vec<Vec<T>>>,
    /// `[freq][comp]`, node-dimension volumes accumulated over the interior.
    pub e_volumes: Option<Vec<[Vol<Cplx<T>>; 3]>>,
    pub snapshots: Option<Snapshots<T>>,
    /// Configured-wavelet spectra per frequency at electric (n+1/2) and
    /// magnetic (n) injection timings.
    pub wavelet_spectrum: Vec<[Cplx<T>; 2]>,
}

/// Interior E-field snapshots recorded every step (oracle use only).
pub struct Snapshots<T> {
    /// Node index ranges per component and axis.
    pub ranges: [[std::ops::Range<usize>; 3]; 3],
    /// One frame per step: flattened boxes for Ex, Ey, Ez.
    pub frames: Vec<[Vec<T>; 3]>,
}

/// Node index ranges of the E samples adjacent to interior cells.
pub fn e_volume_ranges<T: Real>(
    grid: &Grid3D<T>,
    comp_axis: usize,
) -> [std::ops::Range<usize>; 3] {
    let npml = grid.npml;
    let mut out = [0..0, 0..0, 0..0];
    for axis in 0..3 {
        let n = grid.n[axis];
        out[axis] = if axis == comp_axis {
            npml..npml + n
        } else {
            npml..npml + n + 1
        };
    }
    out
}

fn prepare_drive<T: Real>(
    grid: &Grid3D<T>,
    op: &Operator<T>,
    drive: &Drive<T>,
) -> Result<PreparedDrive<T>> {
    let electric = drive.kind == SourceKind::Electric;
    let comps = if electric {
        [Component::Ex, Component::Ey, Component::Ez]
    } else {
        [Component::Hx, Component::Hy, Component::Hz]
    };
    let mut taps: [Vec<PreparedTap<T>>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for axis in 0..3 {
        let amp = drive.orientation[axis] * drive.moment;
        if amp == T::zero() {
            continue;
        }
        let sw = stagger_weights(grid, drive.position, comps[axis])?;
        let offsets = comps[axis].offsets();
        for (node, w) in sw.nodes.iter().zip(sw.weights.iter()) {
            if *w == T::zero() {
                continue;
            }
            let mut dv = T::one();
            for a in 0..3 {
                dv = dv * grid.sample_extent(a, offsets[a], node[a]);
            }
            let density = amp * *w / dv;
            let vol = &op.ce[axis];
            let flat = vol.idx(node[0], node[1], node[2]);
            // E: de = -(dt/eps) J ; H: dh = +(dt/mu) M
            let coef = if electric {
                -op.ce[axis].data[flat] * density
            } else {
                op.ch * density
            };
            taps[axis].push(PreparedTap { flat, coef });
        }
    }
    Ok(PreparedDrive {
        taps,
        electric,
        series: drive.series.clone(),
    })
}

fn finalize_probe<T: Real>(
    grid: &Grid3D<T>,
    op: &Operator<T>,
    probe: &Probe<T>,
) -> Result<PreparedProbe<T>> {
    let sw = stagger_weights(grid, probe.position, probe.component)?;
    let (nd1, nd2, _) = op.node_dims;
    let taps = sw
        .nodes
        .iter()
        .zip(sw.weights.iter())
        .filter(|(_, w)| **w != T::zero())
        .map(|(node, w)| PreparedTap {
            flat: node[0] + nd1 * (node[1] + nd2 * node[2]),
            coef: *w,
        })
        .collect();
    Ok(PreparedProbe {
        component: probe.component,
        taps,
    })
}

/// Run one leap-frog simulation.
///
/// Termination: after `fixed_steps` when given, otherwise when the tracked
/// probe spectra reach steady state (or `nt_max`, reported via
/// `converged = false`).
pub fn run_simulation<T: Real>(
    grid: &Grid3D<T>,
    eps: &FictitiousPermittivity<T>,
    mu: T,
    cfg: &SimConfig<T>,
    drives: &[Drive<T>],
    probes: &[Probe<T>],
    opts: &RunOptions,
) -> Result<SimOutput<T>> {
    let record_volumes = opts.record_volumes;
    let snapshot_budget = opts.snapshot_budget;
    if cfg.freqs.is_empty() {
        return Err(Error::Simulation("no frequencies requested".into()));
    }
    let dt = match cfg.dt_override {
        Some(d) if d > T::zero() => d,
        Some(_) => return Err(Error::Simulation("dt override must be positive".into())),
        None => compute_time_step(grid, eps, mu, cfg.cfl)?,
    };
    let c_max = (mu * eps.eps_min()).sqrt().recip();
    let pml = pml::build_pml(grid, c_max, dt);
    let op = Operator::build(grid, eps, mu, dt, pml);
    let mut state = FieldState::zeros(&op);

    let prepared_drives: Vec<PreparedDrive<T>> = drives
        .iter()
        .map(|d| prepare_drive(grid, &op, d))
        .collect::<Result<_>>()?;
    let prepared_probes: Vec<PreparedProbe<T>> = probes
        .iter()
        .map(|p| finalize_probe(grid, &op, p))
        .collect::<Result<_>>()?;
    if prepared_probes.is_empty() && cfg.fixed_steps.is_none() {
        return Err(Error::Simulation(
            "steady-state termination requires at least one probe".into(),
        ));
    }

    let wavelet = cfg.wavelet();
    let nfreq = cfg.freqs.len();
    let rates: Vec<T> = cfg
        .freqs
        .iter()
        .map(|&f| kernel_rate(f, cfg.omega0))
        .collect();

    let mut probe_acc = vec![vec![Cplx::new(T::zero(), T::zero()); nfreq]; prepared_probes.len()];
    let mut probe_series: Option<Vec<Vec<T>>> = if opts.record_series {
        Some(vec![Vec::new(); prepared_probes.len()])
    } else {
        None
    };
    let mut wavelet_acc = vec![[Cplx::new(T::zero(), T::zero()); 2]; nfreq];

    let (nd1, nd2, nd3) = op.node_dims;
    let mut volumes: Option<Vec<[Vol<Cplx<T>>; 3]>> = if record_volumes {
        Some(
            (0..nfreq)
                .map(|_| {
                    [
                        Vol::zeros(nd1, nd2, nd3),
                        Vol::zeros(nd1, nd2, nd3),
                        Vol::zeros(nd1, nd2, nd3),
                    ]
                })
                .collect(),
        )
    } else {
        None
    };
    let vol_ranges = [
        e_volume_ranges(grid, 0),
        e_volume_ranges(grid, 1),
        e_volume_ranges(grid, 2),
    ];

    let mut snapshots: Option<Snapshots<T>> = snapshot_budget.map(|_| Snapshots {
        ranges: vol_ranges.clone(),
        frames: Vec::new(),
    });
    let frame_bytes: usize = vol_ranges
        .iter()
        .map(|r| r.iter().map(|x| x.len()).product::<usize>() * std::mem::size_of::<T>())
        .sum();

    let step_limit = cfg.fixed_steps.unwrap_or(cfg.nt_max).min(cfg.nt_max);
    let mut prev_check: Option<Vec<Cplx<T>>> = None;
    let mut converged = cfg.fixed_steps.is_some();
    let mut steps = 0usize;
    let half = T::of(0.5);

    while steps < step_limit {
        let n = steps;
        let t_n = dt * T::of(n as f64);
        let t_half = dt * (T::of(n as f64) + half);

        // E fields are at t_n here; sample them before advancing.
        let mut e_probe_vals = vec![T::zero(); prepared_probes.len()];
        for (p, probe) in prepared_probes.iter().enumerate() {
            if !probe.component.is_electric() {
                continue;
            }
            let field = &state.e[probe.component.axis()];
            let mut v = T::zero();
            for tap in &probe.taps {
                v = v + tap.coef * field.data[tap.flat];
            }
            e_probe_vals[p] = v;
        }
        let wv_m = wavelet.value(t_n);
        let wv_j = wavelet.value(t_half);
        for f in 0..nfreq {
            let ker = kernel(rates[f], t_n) * dt;
            let ker_half = kernel(rates[f], t_half) * dt;
            for (p, probe) in prepared_probes.iter().enumerate() {
                if probe.component.is_electric() {
                    probe_acc[p][f] += ker.scale(e_probe_vals[p]);
                }
            }
            if let Some(vols) = volumes.as_mut() {
                for comp in 0..3 {
                    let field = &state.e[comp];
                    let acc = &mut vols[f][comp];
                    let r = &vol_ranges[comp];
                    for k in r[2].clone() {
                        for j in r[1].clone() {
                            let row = nd1 * (j + nd2 * k);
                            for i in r[0].clone() {
                                let idx = row + i;
                                let v = field.data[idx];
                                acc.data[idx].re = acc.data[idx].re + v * ker.re;
                                acc.data[idx].im = acc.data[idx].im + v * ker.im;
                            }
                        }
                    }
                }
            }
            wavelet_acc[f][0] += ker_half.scale(wv_j);
            wavelet_acc[f][1] += ker.scale(wv_m);
        }
        if let Some(snap) = snapshots.as_mut() {
            if (snap.frames.len() + 1) * frame_bytes > snapshot_budget.unwrap() {
                return Err(Error::Simulation(format!(
                    "snapshot budget exceeded after {} frames",
                    snap.frames.len()
                )));
            }
            let mut frame: [Vec<T>; 3] = [Vec::new(), Vec::new(), Vec::new()];
            for comp in 0..3 {
                let field = &state.e[comp];
                let r = &vol_ranges[comp];
                let mut buf = Vec::with_capacity(r.iter().map(|x| x.len()).product());
                for k in r[2].clone() {
                    for j in r[1].clone() {
                        let row = nd1 * (j + nd2 * k);
                        for i in r[0].clone() {
                            buf.push(field.data[row + i]);
                        }
                    }
                }
                frame[comp] = buf;
            }
            snapshots.as_mut().unwrap().frames.push(frame);
        }

        step::update_h(&mut state, &op);
        // magnetic sources act at integer time levels
        for d in &prepared_drives {
            if d.electric {
                continue;
            }
            let amp = match &d.series {
                Some(s) => s.get(n).copied().unwrap_or(T::zero()),
                None => wavelet.value(t_n),
            };
            if amp != T::zero() {
                for axis in 0..3 {
                    for tap in &d.taps[axis] {
                        state.h[axis].data[tap.flat] = state.h[axis].data[tap.flat] + tap.coef * amp;
                    }
                }
            }
        }

        // H fields are now at t_{n+1/2}.
        let mut h_probe_vals = vec![T::zero(); prepared_probes.len()];
        for (p, probe) in prepared_probes.iter().enumerate() {
            if probe.component.is_electric() {
                continue;
            }
            let field = &state.h[probe.component.axis()];
            let mut v = T::zero();
            for tap in &probe.taps {
                v = v + tap.coef * field.data[tap.flat];
            }
            h_probe_vals[p] = v;
        }
        for f in 0..nfreq {
            let ker = kernel(rates[f], t_half) * dt;
            for (p, probe) in prepared_probes.iter().enumerate() {
                if !probe.component.is_electric() {
                    probe_acc[p][f] += ker.scale(h_probe_vals[p]);
                }
            }
        }
        if let Some(series) = probe_series.as_mut() {
            for (p, probe) in prepared_probes.iter().enumerate() {
                series[p].push(if probe.component.is_electric() {
                    e_probe_vals[p]
                } else {
                    h_probe_vals[p]
                });
            }
        }

        step::update_e(&mut state, &op);
        // electric sources act between integer time levels
        for d in &prepared_drives {
            if !d.electric {
                continue;
            }
            let amp = match &d.series {
                Some(s) => s.get(n).copied().unwrap_or(T::zero()),
                None => wavelet.value(t_half),
            };
            if amp != T::zero() {
                for axis in 0..3 {
                    for tap in &d.taps[axis] {
                        state.e[axis].data[tap.flat] = state.e[axis].data[tap.flat] + tap.coef * amp;
                    }
                }
            }
        }

        steps += 1;

        if cfg!(debug_assertions) && steps % cfg.check_every == 0 {
            debug_assert!(state.all_finite(), "non-finite field values at step {steps}");
        }

        if cfg.fixed_steps.is_none() && steps % cfg.check_every == 0 && steps >= cfg.min_steps {
            let flat: Vec<Cplx<T>> = probe_acc.iter().flatten().copied().collect();
            if let Some(prev) = &prev_check {
                if check_steady_state(prev, &flat, cfg.steady_tol) {
                    converged = true;
                    break;
                }
            }
            prev_check = Some(flat);
        }
    }

    Ok(SimOutput {
        dt,
        steps,
        converged,
        probe_spectra: probe_acc,
        probe_series,
        e_volumes: volumes,
        snapshots,
        wavelet_spectrum: wavelet_acc,
    })
}

/// Correspondence factor between fictitious and diffusive electric current
/// sources: sqrt(-i omega / (2 omega0)).
pub fn elec_source_factor<T: Real>(freq_hz: T, omega0: T) -> Cplx<T> {
    let omega = two_pi::<T>() * freq_hz;
    let r = (omega / (T::of(2.0) * omega0)).sqrt();
    let s = T::of(0.5).sqrt();
    Cplx::new(r * s, -r * s)
}

/// Field correspondence for magnetic outputs: H = sqrt(2 omega0 / (-i omega)) H'.
pub fn mag_field_factor<T: Real>(freq_hz: T, omega0: T) -> Cplx<T> {
    elec_source_factor(freq_hz, omega0).inv()
}

/// One receiver/component spectrum across the configured frequencies.
#[derive(Debug, Clone)]
pub struct ReceiverSamples<T> {
    pub receiver: u32,
    pub component: Component,
    pub values: Vec<Cplx<T>>,
}

/// Diffusive-domain frequency response of one source gather.
pub struct FreqFieldSet<T> {
    pub freqs: Vec<T>,
    pub samples: Vec<ReceiverSamples<T>>,
    /// Impulse-normalized E volumes `[freq][comp]` when requested.
    pub e_volumes: Option<Vec<[Vol<Cplx<T>>; 3]>>,
    pub converged: bool,
    pub steps: usize,
    pub dt: T,
}

/// Forward-model one source: run the fictitious-wave simulation with the
/// configured wavelet, then normalize receiver spectra (and volumes) into
/// diffusive-domain impulse responses of a unit dipole.
pub fn run_forward<T: Real>(
    grid: &Grid3D<T>,
    medium: &Medium<T>,
    cfg: &SimConfig<T>,
    source: &SourceDef<T>,
    receivers: &[ReceiverDef<T>],
    record_volumes: bool,
) -> Result<FreqFieldSet<T>> {
    let eps = crate::medium::sigma_to_epsilon(medium, cfg.omega0)?;
    let drive = Drive {
        position: source.position,
        orientation: source.orientation,
        kind: source.kind,
        moment: source.moment,
        series: None,
    };
    let mut probes = Vec::new();
    let mut owners = Vec::new();
    for rcv in receivers {
        for &comp in &rcv.components {
            probes.push(Probe {
                position: rcv.position,
                component: comp,
            });
            owners.push((rcv.id, comp));
        }
    }
    let out = run_simulation(
        grid,
        &eps,
        medium.mu,
        cfg,
        std::slice::from_ref(&drive),
        &probes,
        &RunOptions {
            record_volumes,
            ..Default::default()
        },
    )?;

    let src_is_electric = source.kind == SourceKind::Electric;
    let mut factors_e = Vec::with_capacity(cfg.freqs.len());
    let mut factors_h = Vec::with_capacity(cfg.freqs.len());
    for (f, &freq) in cfg.freqs.iter().enumerate() {
        let s = out.wavelet_spectrum[f][if src_is_electric { 0 } else { 1 }];
        if s.norm() == T::zero() {
            return Err(Error::Simulation(format!(
                "wavelet spectrum vanishes at {freq} Hz"
            )));
        }
        let g_src = if src_is_electric {
            elec_source_factor(freq, cfg.omega0)
        } else {
            Cplx::new(T::one(), T::zero())
        };
        factors_e.push(g_src / s);
        factors_h.push(g_src * mag_field_factor(freq, cfg.omega0) / s);
    }

    let samples = owners
        .iter()
        .zip(out.probe_spectra.iter())
        .map(|(&(id, comp), acc)| ReceiverSamples {
            receiver: id,
            component: comp,
            values: acc
                .iter()
                .enumerate()
                .map(|(f, &v)| {
                    v * if comp.is_electric() {
                        factors_e[f]
                    } else {
                        factors_h[f]
                    }
                })
                .collect(),
        })
        .collect();

    let e_volumes = out.e_volumes.map(|vols| {
        vols.into_iter()
            .enumerate()
            .map(|(f, comps)| {
                let fac = factors_e[f];
                let mut out: [Vol<Cplx<T>>; 3] = comps;
                for c in out.iter_mut() {
                    for v in &mut c.data {
                        *v = *v * fac;
                    }
                }
                out
            })
            .collect()
    });

    Ok(FreqFieldSet {
        freqs: cfg.freqs.clone(),
        samples,
        e_volumes,
        converged: out.converged,
        steps: out.steps,
        dt: out.dt,
    })
}
