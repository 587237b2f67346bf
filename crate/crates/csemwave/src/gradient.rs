//! Data misfit, residual weighting, adjoint simulation and conductivity
//! gradient assembly.
//!
//! The gradient of the data misfit with respect to conductivity is the
//! frequency-domain product of forward and conjugated adjoint E fields,
//! `-Re sum_s sum_w conj(E_adj)_j E_i`, scaled with the local cell volume.
//! The conjugated adjoint field solves the plain Maxwell system with electric
//! current sources `conj(W^2 (d_obs - d_syn))` for E-data (magnetic sources
//! for H-data) at the receiver positions, which is what lets the forward
//! engine double as the adjoint engine; the fictitious-domain current
//! correspondence puts the `sqrt(-i omega / 2 omega0)` factor on the electric
//! entries.

use crate::adjoint_source::{synthesize_adjoint_sources, BasisParams, BasisSet};
use crate::error::{Error, Result};
use crate::fdtd::{
    elec_source_factor, injection_calibration, run_forward, run_simulation, Drive, FreqFieldSet,
    Probe, RunOptions, SimConfig, SourceKind,
};
use crate::grid::{Component, Grid3D};
use crate::medium::{
    chain_rule_to_logparam, interior_of, sigma_to_epsilon, Anisotropy, Medium, ModelParam,
};
use crate::scalar::{Cplx, Real};
use crate::survey::{DataEntry, DataSet, Survey};
use crate::vol::Vol;
use rayon::prelude::*;

/// Relative-plus-floor uncertainty model for the diagonal data weights.
#[derive(Debug, Clone, Copy)]
pub struct WeightParams<T> {
    /// Relative error fraction.
    pub eta: T,
    /// Absolute noise floor in field units.
    pub floor: T,
    /// Source-receiver distances below this are muted (weight zero).
    pub mute_offset: T,
}

/// Fill the weight column of an observed data set:
/// `w = 1 / (eta |d| + floor)`, zero inside the mute offset.
pub fn compute_weights<T: Real>(
    data: &mut DataSet<T>,
    survey: &Survey<T>,
    params: &WeightParams<T>,
) -> Result<()> {
    if !(params.floor > T::zero()) {
        return Err(Error::Survey("noise floor must be positive".into()));
    }
    for e in &mut data.entries {
        if !e.value.re.is_finite() || !e.value.im.is_finite() {
            return Err(Error::Survey(format!(
                "non-finite observed datum (src {}, rcv {})",
                e.src, e.rcv
            )));
        }
        let src = survey
            .source(e.src)
            .ok_or_else(|| Error::Survey(format!("datum references unknown source {}", e.src)))?;
        let rcv = survey
            .receiver(e.rcv)
            .ok_or_else(|| Error::Survey(format!("datum references unknown receiver {}", e.rcv)))?;
        let mut d2 = T::zero();
        for a in 0..3 {
            let d = src.position[a] - rcv.position[a];
            d2 += d * d;
        }
        e.weight = if d2.sqrt() < params.mute_offset {
            T::zero()
        } else {
            (params.eta * e.value.norm() + params.floor).recip()
        };
    }
    Ok(())
}

/// One weighted residual `w (d_obs - d_syn)` of a source gather.
#[derive(Debug, Clone, Copy)]
pub struct WeightedResidual<T> {
    pub rcv: u32,
    pub component: Component,
    pub freq_idx: usize,
    /// W (d_obs - d_syn)
    pub wdelta: Cplx<T>,
    pub weight: T,
}

/// Half the squared norm of the weighted residuals, with the per-datum
/// normalization used for convergence logging and the active-datum count.
pub fn misfit_value<T: Real>(residuals: &[WeightedResidual<T>]) -> (T, T, usize) {
    let mut phi = T::zero();
    let mut n = 0usize;
    for r in residuals {
        if r.weight > T::zero() {
            phi += r.wdelta.norm_sqr();
            n += 1;
        }
    }
    phi = phi * T::of(0.5);
    let normalized = if n > 0 {
        phi / T::of(n as f64)
    } else {
        T::zero()
    };
    (phi, normalized, n)
}

/// Weighted residuals of one gather from observed data and synthetic spectra.
pub fn build_residuals<T: Real>(
    src_id: u32,
    obs: &DataSet<T>,
    syn: &FreqFieldSet<T>,
) -> Vec<WeightedResidual<T>> {
    let mut out = Vec::new();
    for s in &syn.samples {
        for (freq_idx, &val) in s.values.iter().enumerate() {
            if let Some(entry) = obs.get(src_id, s.receiver, s.component, freq_idx) {
                let wdelta = (entry.value - val).scale(entry.weight);
                out.push(WeightedResidual {
                    rcv: s.receiver,
                    component: s.component,
                    freq_idx,
                    wdelta,
                    weight: entry.weight,
                });
            }
        }
    }
    out
}

/// Conjugated adjoint E volumes for one source gather: synthesize every
/// receiver's time function from the basis and run one simulation injecting
/// them all simultaneously.
#[allow(clippy::too_many_arguments)]
pub fn run_adjoint<T: Real>(
    grid: &Grid3D<T>,
    medium: &Medium<T>,
    cfg: &SimConfig<T>,
    dt: T,
    residuals: &[WeightedResidual<T>],
    survey: &Survey<T>,
    basis: &BasisSet<T>,
    source_position: [T; 3],
) -> Result<(Vec<[Vol<Cplx<T>>; 3]>, bool)> {
    let nfreq = cfg.freqs.len();
    // coefficient spectra per (receiver, component)
    let mut keys: Vec<(u32, Component)> = Vec::new();
    let mut coeffs: Vec<Vec<Cplx<T>>> = Vec::new();
    let zero = Cplx::new(T::zero(), T::zero());
    for r in residuals {
        if r.weight == T::zero() || r.wdelta == zero {
            continue;
        }
        let slot = match keys
            .iter()
            .position(|&(id, c)| id == r.rcv && c == r.component)
        {
            Some(i) => i,
            None => {
                keys.push((r.rcv, r.component));
                coeffs.push(vec![zero; nfreq]);
                coeffs.len() - 1
            }
        };
        let freq = cfg.freqs[r.freq_idx];
        // target fictitious source spectrum, divided by the engine injection
        // calibration so the accumulated spectra come out as the adjoint field
        let w2delta_conj = (r.wdelta.scale(r.weight)).conj();
        let kind = if r.component.is_electric() {
            SourceKind::Electric
        } else {
            SourceKind::Magnetic
        };
        let cal = injection_calibration(kind, freq, cfg.omega0, dt);
        let target = if r.component.is_electric() {
            elec_source_factor(freq, cfg.omega0) * w2delta_conj
        } else {
            w2delta_conj
        };
        coeffs[slot][r.freq_idx] = target / cal;
    }

    if keys.is_empty() {
        // zero residuals: the adjoint field is identically zero
        let (p1, p2, p3) = grid.np_all();
        let zero_vols = (0..nfreq)
            .map(|_| {
                [
                    Vol::zeros(p1 + 1, p2 + 1, p3 + 1),
                    Vol::zeros(p1 + 1, p2 + 1, p3 + 1),
                    Vol::zeros(p1 + 1, p2 + 1, p3 + 1),
                ]
            })
            .collect();
        return Ok((zero_vols, true));
    }

    let spectra: Vec<(u32, Component, Vec<Cplx<T>>)> = keys
        .iter()
        .zip(coeffs)
        .map(|(&(rcv, comp), c)| (rcv, comp, c))
        .collect();
    let sources = synthesize_adjoint_sources(&spectra, basis)?;

    let mut drives = Vec::with_capacity(sources.entries.len());
    for entry in &sources.entries {
        let rcv = survey.receiver(entry.receiver).ok_or_else(|| {
            Error::Survey(format!(
                "residual references unknown receiver {}",
                entry.receiver
            ))
        })?;
        let mut orientation = [T::zero(); 3];
        orientation[entry.component.axis()] = T::one();
        drives.push(Drive {
            position: rcv.position,
            orientation,
            kind: if entry.component.is_electric() {
                SourceKind::Electric
            } else {
                SourceKind::Magnetic
            },
            moment: T::one(),
            series: Some(entry.series.clone()),
        });
    }

    let eps = sigma_to_epsilon(medium, cfg.omega0)?;
    let mut adj_cfg = cfg.clone();
    adj_cfg.dt_override = Some(dt);
    // never let the steady-state exit cut the injected series short
    if adj_cfg.fixed_steps.is_none() {
        adj_cfg.min_steps = adj_cfg.min_steps.max(basis.params.nt);
    }
    // track convergence at the gather's source position
    let probes: Vec<Probe<T>> = [Component::Ex, Component::Ey, Component::Ez]
        .iter()
        .map(|&component| Probe {
            position: source_position,
            component,
        })
        .collect();

    let out = run_simulation(
        grid,
        &eps,
        medium.mu,
        &adj_cfg,
        &drives,
        &probes,
        &RunOptions {
            record_volumes: true,
            ..Default::default()
        },
    )?;
    Ok((out.e_volumes.unwrap(), out.converged))
}

/// Per-class conductivity gradients on interior cells, already scaled by the
/// cell volume.
#[derive(Debug, Clone)]
pub struct GradientVolume<T> {
    pub per_class: Vec<Vol<T>>,
    pub anisotropy: Anisotropy,
}

impl<T: Real> GradientVolume<T> {
    pub fn zeros(grid: &Grid3D<T>, anisotropy: Anisotropy) -> Self {
        let [n1, n2, n3] = grid.n;
        let n_class = match anisotropy {
            Anisotropy::Isotropic => 1,
            Anisotropy::Vti => 2,
        };
        GradientVolume {
            per_class: (0..n_class).map(|_| Vol::zeros(n1, n2, n3)).collect(),
            anisotropy,
        }
    }

    pub fn add_assign(&mut self, other: &GradientVolume<T>) {
        for (a, b) in self.per_class.iter_mut().zip(&other.per_class) {
            for (x, &y) in a.data.iter_mut().zip(&b.data) {
                *x += y;
            }
        }
    }
}

/// Accumulate `-Re (conj-adjoint . forward)` products into cell gradients.
///
/// Each interior cell gathers the four adjacent sample positions of every E
/// component with a quarter of its volume, the exact transpose of the
/// transverse material averaging used by the update coefficients.
pub fn assemble_gradient<T: Real>(
    grid: &Grid3D<T>,
    forward: &[[Vol<Cplx<T>>; 3]],
    adjoint: &[[Vol<Cplx<T>>; 3]],
    anisotropy: Anisotropy,
) -> Result<GradientVolume<T>> {
    if forward.len() != adjoint.len() {
        return Err(Error::Simulation(
            "forward/adjoint frequency count mismatch".into(),
        ));
    }
    // horizontal (x+y) and vertical (z) parts are always accumulated
    // separately so the isotropic gradient is exactly their sum
    let [n1, n2, n3] = grid.n;
    let mut part_h: Vol<T> = Vol::zeros(n1, n2, n3);
    let mut part_v: Vol<T> = Vol::zeros(n1, n2, n3);
    let npml = grid.npml;
    let quarter = T::of(0.25);
    for (fwd, adj) in forward.iter().zip(adjoint) {
        for comp in 0..3 {
            if fwd[comp].dims() != adj[comp].dims() {
                return Err(Error::Simulation("volume shape mismatch".into()));
            }
            let f = &fwd[comp];
            let a = &adj[comp];
            let g = if comp == 2 { &mut part_v } else { &mut part_h };
            for k in 0..n3 {
                for j in 0..n2 {
                    for i in 0..n1 {
                        let (pi, pj, pk) = (i + npml, j + npml, k + npml);
                        // the four sample positions adjacent to this cell
                        let positions: [[usize; 3]; 4] = match comp {
                            0 => [
                                [pi, pj, pk],
                                [pi, pj + 1, pk],
                                [pi, pj, pk + 1],
                                [pi, pj + 1, pk + 1],
                            ],
                            1 => [
                                [pi, pj, pk],
                                [pi + 1, pj, pk],
                                [pi, pj, pk + 1],
                                [pi + 1, pj, pk + 1],
                            ],
                            _ => [
                                [pi, pj, pk],
                                [pi + 1, pj, pk],
                                [pi, pj + 1, pk],
                                [pi + 1, pj + 1, pk],
                            ],
                        };
                        let mut sum = T::zero();
                        for p in positions {
                            let fv = f.at(p[0], p[1], p[2]);
                            let av = a.at(p[0], p[1], p[2]);
                            // -Re(adj * fwd)
                            sum -= av.re * fv.re - av.im * fv.im;
                        }
                        let dv = grid.cell_volume(pi, pj, pk);
                        *g.at_mut(i, j, k) += sum * quarter * dv;
                    }
                }
            }
        }
    }
    let per_class = match anisotropy {
        Anisotropy::Isotropic => {
            for (h, &v) in part_h.data.iter_mut().zip(&part_v.data) {
                *h = *h + v;
            }
            vec![part_h]
        }
        Anisotropy::Vti => vec![part_h, part_v],
    };
    Ok(GradientVolume {
        per_class,
        anisotropy,
    })
}

/// Anisotropic first-difference roughness against the reference model:
/// value `1/2 sum_a alpha_a^2 ||D_a (m - m_ref)||^2` and its gradient.
pub fn tikhonov_value_and_gradient<T: Real>(
    param: &ModelParam<T>,
    alpha: [T; 3],
) -> (T, Vec<Vol<T>>) {
    let mut value = T::zero();
    let mut grads = Vec::with_capacity(param.n_classes());
    for (m, mref) in param.m.iter().zip(&param.m_ref) {
        let (n1, n2, n3) = m.dims();
        let mut grad = Vol::zeros(n1, n2, n3);
        let u: Vec<T> = m
            .data
            .iter()
            .zip(&mref.data)
            .map(|(&a, &b)| a - b)
            .collect();
        let u = Vol::from_vec(n1, n2, n3, u);
        let lim = [n1, n2, n3];
        for axis in 0..3 {
            let a2 = alpha[axis] * alpha[axis];
            if a2 == T::zero() {
                continue;
            }
            for k in 0..n3 {
                for j in 0..n2 {
                    for i in 0..n1 {
                        let mut up = [i, j, k];
                        up[axis] += 1;
                        if up[axis] >= lim[axis] {
                            continue;
                        }
                        let d = u.at(up[0], up[1], up[2]) - u.at(i, j, k);
                        value += a2 * d * d * T::of(0.5);
                        *grad.at_mut(up[0], up[1], up[2]) += a2 * d;
                        *grad.at_mut(i, j, k) -= a2 * d;
                    }
                }
            }
        }
        grads.push(grad);
    }
    (value, grads)
}

/// Depth weighting that counters the decay of EM sensitivity: 1 above the
/// seabed, `((z - z_seabed + z0)/z0)^p` below.
#[derive(Debug, Clone, Copy)]
pub struct DepthWeighting<T> {
    pub power: T,
    pub z0: T,
    pub seabed_z: T,
}

impl<T: Real> DepthWeighting<T> {
    /// Per interior cell weights.
    pub fn weights(&self, grid: &Grid3D<T>) -> Vol<T> {
        let [n1, n2, n3] = grid.n;
        let mut out = Vol::filled(n1, n2, n3, T::one());
        for k in 0..n3 {
            let z = grid.center(2, grid.npml + k);
            let w = if z <= self.seabed_z {
                T::one()
            } else {
                ((z - self.seabed_z + self.z0) / self.z0).powf(self.power)
            };
            for j in 0..n2 {
                for i in 0..n1 {
                    *out.at_mut(i, j, k) = w;
                }
            }
        }
        out
    }
}

/// Multiply a gradient by the depth weights in place.
pub fn depth_precondition<T: Real>(
    grad: &mut GradientVolume<T>,
    grid: &Grid3D<T>,
    weighting: &DepthWeighting<T>,
) {
    let w = weighting.weights(grid);
    for class in &mut grad.per_class {
        for (g, &wi) in class.data.iter_mut().zip(&w.data) {
            *g *= wi;
        }
    }
}

/// Everything a misfit/gradient evaluation needs besides the model itself.
pub struct Problem<'a, T> {
    pub grid: &'a Grid3D<T>,
    pub survey: &'a Survey<T>,
    /// Observed data with weights filled in.
    pub obs: &'a DataSet<T>,
    pub sim: SimConfig<T>,
    pub basis_gamma: T,
    pub basis_tol: T,
    pub basis_max_iter: usize,
    /// Adjoint source length; derived from the slowest kernel when absent.
    pub basis_nt: Option<usize>,
}

/// Outcome of one misfit (and optionally gradient) evaluation.
pub struct MisfitReport<T> {
    pub phi_d: T,
    pub normalized: T,
    pub n_active: usize,
    /// Significant misfit ||W(d_obs - d_syn)|| per (source, receiver).
    pub per_receiver: Vec<(u32, u32, T)>,
    pub all_converged: bool,
    pub d_syn: DataSet<T>,
}

impl<'a, T: Real> Problem<'a, T> {
    /// Time step used for a medium (honoring any override).
    pub fn time_step(&self, medium: &Medium<T>) -> Result<T> {
        match self.sim.dt_override {
            Some(dt) => Ok(dt),
            None => {
                let eps = sigma_to_epsilon(medium, self.sim.omega0)?;
                crate::fdtd::compute_time_step(self.grid, &eps, medium.mu, self.sim.cfl)
            }
        }
    }

    /// Basis length covering the decay of the slowest transform kernel.
    pub fn basis_params(&self, dt: T) -> BasisParams<T> {
        let nt = self.basis_nt.unwrap_or_else(|| {
            let fmin = self.sim.freqs.iter().fold(T::infinity(), |m, &f| m.min(f));
            let rate = crate::fdtd::kernel_rate(fmin, self.sim.omega0);
            (T::of(12.0) / (rate * dt)).ceil().f64() as usize
        });
        BasisParams {
            dt,
            nt,
            freqs: self.sim.freqs.clone(),
            omega0: self.sim.omega0,
            gamma: self.basis_gamma,
        }
    }

    /// Forward-model every gather and return synthetic data (weights copied
    /// from the observations where present).
    pub fn synthetic_data(&self, medium: &Medium<T>, dt: T) -> Result<(DataSet<T>, bool)> {
        let mut cfg = self.sim.clone();
        cfg.dt_override = Some(dt);
        let gathers: Vec<Result<FreqFieldSet<T>>> = self
            .survey
            .sources
            .par_iter()
            .map(|src| run_forward(self.grid, medium, &cfg, src, &self.survey.receivers, false))
            .collect();
        let mut out = DataSet::new();
        let mut all_converged = true;
        for (src, gather) in self.survey.sources.iter().zip(gathers) {
            let gather = gather?;
            all_converged &= gather.converged;
            self.push_gather(&mut out, src.id, &gather);
        }
        Ok((out, all_converged))
    }

    fn push_gather(&self, out: &mut DataSet<T>, src_id: u32, gather: &FreqFieldSet<T>) {
        for s in &gather.samples {
            for (freq_idx, &value) in s.values.iter().enumerate() {
                let weight = self
                    .obs
                    .get(src_id, s.receiver, s.component, freq_idx)
                    .map(|e| e.weight)
                    .unwrap_or_else(T::zero);
                out.push(DataEntry {
                    src: src_id,
                    rcv: s.receiver,
                    component: s.component,
                    freq_idx,
                    value,
                    weight,
                });
            }
        }
    }

    /// Data misfit of one model.
    pub fn misfit(&self, param: &ModelParam<T>) -> Result<MisfitReport<T>> {
        let medium = param.to_medium(self.grid)?;
        let dt = self.time_step(&medium)?;
        let (d_syn, all_converged) = self.synthetic_data(&medium, dt)?;
        Ok(self.report_from(d_syn, all_converged))
    }

    fn report_from(&self, d_syn: DataSet<T>, all_converged: bool) -> MisfitReport<T> {
        let mut phi = T::zero();
        let mut n = 0usize;
        let mut per: Vec<(u32, u32, T)> = Vec::new();
        for src in &self.survey.sources {
            for rcv in &self.survey.receivers {
                let mut acc = T::zero();
                for &comp in &rcv.components {
                    for freq_idx in 0..self.survey.freqs.len() {
                        if let (Some(o), Some(s)) = (
                            self.obs.get(src.id, rcv.id, comp, freq_idx),
                            d_syn.get(src.id, rcv.id, comp, freq_idx),
                        ) {
                            let wd = (o.value - s.value).scale(o.weight);
                            acc += wd.norm_sqr();
                            if o.weight > T::zero() {
                                n += 1;
                            }
                        }
                    }
                }
                phi += acc;
                per.push((src.id, rcv.id, acc.sqrt()));
            }
        }
        let phi_d = phi * T::of(0.5);
        let normalized = if n > 0 {
            phi_d / T::of(n as f64)
        } else {
            T::zero()
        };
        MisfitReport {
            phi_d,
            normalized,
            n_active: n,
            per_receiver: per,
            all_converged,
            d_syn,
        }
    }

    /// Data misfit and its gradient with respect to the log-resistivity
    /// parameters (frozen cells zeroed).
    pub fn misfit_and_gradient(
        &self,
        param: &ModelParam<T>,
    ) -> Result<(MisfitReport<T>, Vec<Vol<T>>)> {
        let medium = param.to_medium(self.grid)?;
        let dt = self.time_step(&medium)?;
        let basis = crate::adjoint_source::compute_basis(
            &self.basis_params(dt),
            self.basis_tol,
            self.basis_max_iter,
        )?;

        let mut cfg = self.sim.clone();
        cfg.dt_override = Some(dt);

        // one forward (with volumes) and one adjoint per source, in parallel
        let per_source: Vec<Result<(FreqFieldSet<T>, GradientVolume<T>, bool)>> = self
            .survey
            .sources
            .par_iter()
            .map(|src| {
                let fwd =
                    run_forward(self.grid, &medium, &cfg, src, &self.survey.receivers, true)?;
                let residuals = build_residuals(src.id, self.obs, &fwd);
                let (adj_vols, adj_conv) = run_adjoint(
                    self.grid,
                    &medium,
                    &cfg,
                    dt,
                    &residuals,
                    self.survey,
                    &basis,
                    src.position,
                )?;
                let grad = assemble_gradient(
                    self.grid,
                    fwd.e_volumes.as_ref().unwrap(),
                    &adj_vols,
                    param.anisotropy,
                )?;
                let conv = fwd.converged && adj_conv;
                Ok((fwd, grad, conv))
            })
            .collect();

        // deterministic reduction in source order
        let mut total = GradientVolume::zeros(self.grid, param.anisotropy);
        let mut d_syn = DataSet::new();
        let mut all_converged = true;
        for (src, item) in self.survey.sources.iter().zip(per_source) {
            let (fwd, grad, conv) = item?;
            all_converged &= conv;
            total.add_assign(&grad);
            self.push_gather(&mut d_syn, src.id, &fwd);
        }

        // chain rule to log-resistivity per class, then freeze
        let mut grads_m = Vec::with_capacity(param.n_classes());
        for (class, grad_sigma) in total.per_class.iter().enumerate() {
            let sigma = if class == 0 {
                &medium.sigma_h
            } else {
                &medium.sigma_v
            };
            let sigma_int = interior_of(self.grid, sigma);
            let mut g = chain_rule_to_logparam(grad_sigma, &sigma_int)?;
            for (gi, &frozen) in g.data.iter_mut().zip(&param.frozen.data) {
                if frozen {
                    *gi = T::zero();
                }
            }
            grads_m.push(g);
        }

        let report = self.report_from(d_syn, all_converged);
        Ok((report, grads_m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survey::{ReceiverDef, SourceDef};

    fn line_survey() -> Survey<f64> {
        Survey {
            sources: vec![SourceDef {
                id: 1,
                position: [0.0; 3],
                orientation: [1.0, 0.0, 0.0],
                kind: SourceKind::Electric,
                moment: 1.0,
            }],
            receivers: vec![
                ReceiverDef {
                    id: 1,
                    position: [100.0, 0.0, 0.0],
                    components: vec![Component::Ex],
                },
                ReceiverDef {
                    id: 2,
                    position: [2000.0, 0.0, 0.0],
                    components: vec![Component::Ex],
                },
            ],
            freqs: vec![0.25],
            reciprocity: false,
        }
    }

    #[test]
    fn weight_formula_and_mute() {
        let survey = line_survey();
        let mut data = DataSet::new();
        for (rcv, val) in [(1u32, 1e-9), (2u32, 0.0)] {
            data.push(DataEntry {
                src: 1,
                rcv,
                component: Component::Ex,
                freq_idx: 0,
                value: Cplx::new(val, 0.0),
                weight: 0.0,
            });
        }
        let params = WeightParams {
            eta: 0.03,
            floor: 1e-15,
            mute_offset: 600.0,
        };
        compute_weights(&mut data, &survey, &params).unwrap();
        // inside the mute offset
        assert_eq!(data.get(1, 1, Component::Ex, 0).unwrap().weight, 0.0);
        // |d| = 0 leaves the floor
        let w2 = data.get(1, 2, Component::Ex, 0).unwrap().weight;
        assert!((w2 - 1e15).abs() < 1.0);

        // large |d|: w ~ 1/(eta |d|)
        let mut data2 = DataSet::new();
        data2.push(DataEntry {
            src: 1,
            rcv: 2,
            component: Component::Ex,
            freq_idx: 0,
            value: Cplx::new(1.0, 0.0),
            weight: 0.0,
        });
        compute_weights(&mut data2, &survey, &params).unwrap();
        let w = data2.entries[0].weight;
        assert!((w - 1.0 / 0.03).abs() / (1.0 / 0.03) < 1e-10);

        let bad = WeightParams {
            eta: 0.03,
            floor: 0.0,
            mute_offset: 0.0,
        };
        assert!(compute_weights(&mut data2, &survey, &bad).is_err());
    }

    #[test]
    fn misfit_values() {
        let zero: Vec<WeightedResidual<f64>> = vec![];
        assert_eq!(misfit_value(&zero).0, 0.0);

        let one = vec![WeightedResidual {
            rcv: 1,
            component: Component::Ex,
            freq_idx: 0,
            wdelta: Cplx::new(3.0, 4.0),
            weight: 1.0,
        }];
        let (phi, norm, n) = misfit_value(&one);
        assert_eq!(phi, 12.5);
        assert_eq!(n, 1);
        assert_eq!(norm, 12.5);

        // doubling weights quadruples the misfit
        let two = vec![WeightedResidual {
            wdelta: Cplx::new(6.0, 8.0),
            ..one[0]
        }];
        assert_eq!(misfit_value(&two).0, 50.0);
    }

    #[test]
    fn tikhonov_cases() {
        let m = Vol::filled(4, 4, 4, 1.3f64);
        let p = ModelParam::isotropic(m, -5.0, 5.0);
        let (v, g) = tikhonov_value_and_gradient(&p, [1.0, 1.0, 0.1]);
        assert_eq!(v, 0.0);
        assert!(g[0].data.iter().all(|&x| x == 0.0));

        // constant shift is annihilated
        let mut p2 = p.clone();
        for x in &mut p2.m[0].data {
            *x += 0.7;
        }
        let (v2, g2) = tikhonov_value_and_gradient(&p2, [1.0, 1.0, 0.1]);
        assert_eq!(v2, 0.0);
        assert!(g2[0].data.iter().all(|&x| x == 0.0));

        // finite-difference check of the gradient
        let mut p3 = p.clone();
        for (i, x) in p3.m[0].data.iter_mut().enumerate() {
            *x += (i as f64 * 0.37).sin() * 0.2;
        }
        let alpha = [1.0, 0.8, 0.1];
        let (_, g3) = tikhonov_value_and_gradient(&p3, alpha);
        let delta = 1e-6;
        for idx in [0usize, 13, 37, 63] {
            let mut pp = p3.clone();
            pp.m[0].data[idx] += delta;
            let mut pm = p3.clone();
            pm.m[0].data[idx] -= delta;
            let fd = (tikhonov_value_and_gradient(&pp, alpha).0
                - tikhonov_value_and_gradient(&pm, alpha).0)
                / (2.0 * delta);
            let err = (fd - g3[0].data[idx]).abs() / fd.abs().max(1e-12);
            assert!(err < 1e-6, "cell {idx}: fd {fd} vs {}", g3[0].data[idx]);
        }
    }

    #[test]
    fn depth_weights_monotone() {
        use crate::grid::{build_grid, AxisSpec, GridSpec};
        let grid = build_grid(&GridSpec {
            axes: [
                AxisSpec::uniform(4, 100.0),
                AxisSpec::uniform(4, 100.0),
                AxisSpec::uniform(10, 100.0),
            ],
            npml: 0,
            origin: [0.0, 0.0, 0.0],
        })
        .unwrap();
        let w = DepthWeighting {
            power: 1.5,
            z0: 300.0,
            seabed_z: 200.0,
        }
        .weights(&grid);
        let mut prev = 0.0;
        for k in 0..10 {
            let v = w.at(0, 0, k);
            assert!(v >= prev);
            prev = v;
        }
        assert_eq!(w.at(0, 0, 0), 1.0); // above the seabed

        // p = 0 leaves everything unchanged
        let w0 = DepthWeighting {
            power: 0.0,
            z0: 300.0,
            seabed_z: 200.0,
        }
        .weights(&grid);
        assert!(w0.data.iter().all(|&v| v == 1.0));
    }
}
