//! Independent reference implementations used by tests, the acceptance suite
//! and the `gradcheck` tool: the analytic diffusive whole-space dipole field,
//! central-difference misfit derivatives, and a time-domain gradient built
//! from stored snapshots.

use crate::error::{Error, Result};
use crate::fdtd::{
    elec_source_factor, injection_calibration, kernel, kernel_rate, mag_field_factor,
    run_simulation, Drive, Probe, RunOptions, SourceKind,
};
use crate::gradient::{GradientVolume, Problem};
use crate::medium::{chain_rule_to_logparam, interior_of, sigma_to_epsilon, Anisotropy, ModelParam};
use crate::scalar::{two_pi, Cplx, Real};
use crate::vol::Vol;

/// Frequency-domain E and H of an electric point dipole in a homogeneous
/// conductive whole space, `exp(-i omega t)` convention, wavenumber
/// `k^2 = i omega mu sigma` with decaying branch.
pub fn analytic_whole_space_dipole<T: Real>(
    sigma: T,
    mu: T,
    freq_hz: T,
    src: [T; 3],
    dipole: [T; 3],
    obs: [T; 3],
) -> Result<([Cplx<T>; 3], [Cplx<T>; 3])> {
    let mut dr = [T::zero(); 3];
    let mut r2 = T::zero();
    for a in 0..3 {
        dr[a] = obs[a] - src[a];
        r2 += dr[a] * dr[a];
    }
    let r = r2.sqrt();
    if r == T::zero() {
        return Err(Error::Simulation(
            "observation point coincides with source".into(),
        ));
    }
    let rhat = [dr[0] / r, dr[1] / r, dr[2] / r];
    let omega = two_pi::<T>() * freq_hz;
    // k = (1+i) sqrt(omega mu sigma / 2)
    let kmag = (omega * mu * sigma * T::of(0.5)).sqrt();
    let k = Cplx::new(kmag, kmag);
    let ikr = Cplx::new(T::zero(), T::one()) * k.scale(r);
    let k2r2 = k * k * Cplx::new(r * r, T::zero());
    let eikr = ikr.exp();
    let pref = eikr
        / Cplx::new(
            T::of(4.0) * T::of(std::f64::consts::PI) * sigma * r * r * r,
            T::zero(),
        );
    let radial = k2r2 + ikr - Cplx::new(T::one(), T::zero());
    let angular = -k2r2 - ikr.scale(T::of(3.0)) + Cplx::new(T::of(3.0), T::zero());
    let pdotr = dipole[0] * rhat[0] + dipole[1] * rhat[1] + dipole[2] * rhat[2];
    let mut e = [Cplx::new(T::zero(), T::zero()); 3];
    for a in 0..3 {
        e[a] = pref * (radial.scale(dipole[a]) + angular.scale(pdotr * rhat[a]));
    }
    // H = grad(g) x p with g = exp(ikr)/(4 pi r)
    let dgdr = eikr * (ikr - Cplx::new(T::one(), T::zero()))
        / Cplx::new(T::of(4.0) * T::of(std::f64::consts::PI) * r * r, T::zero());
    let cross = [
        rhat[1] * dipole[2] - rhat[2] * dipole[1],
        rhat[2] * dipole[0] - rhat[0] * dipole[2],
        rhat[0] * dipole[1] - rhat[1] * dipole[0],
    ];
    let mut h = [Cplx::new(T::zero(), T::zero()); 3];
    for a in 0..3 {
        h[a] = dgdr.scale(cross[a]);
    }
    Ok((e, h))
}

/// Skin depth sqrt(2 / (omega mu sigma)).
pub fn skin_depth<T: Real>(sigma: T, mu: T, freq_hz: T) -> T {
    (T::of(2.0) / (two_pi::<T>() * freq_hz * mu * sigma)).sqrt()
}

/// Central finite differences of a misfit evaluator with respect to selected
/// interior cells.
///
/// `cells` are (class, i1, i2, i3) interior indices. Frozen cells report a
/// zero derivative without evaluating.
pub fn fd_gradient<T: Real>(
    mut misfit: impl FnMut(&ModelParam<T>) -> Result<T>,
    param: &ModelParam<T>,
    cells: &[(usize, usize, usize, usize)],
    delta: T,
) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(cells.len());
    for &(class, i1, i2, i3) in cells {
        if param.frozen.at(i1, i2, i3) {
            out.push(T::zero());
            continue;
        }
        let mut plus = param.clone();
        *plus.m[class].at_mut(i1, i2, i3) += delta;
        let mut minus = param.clone();
        *minus.m[class].at_mut(i1, i2, i3) -= delta;
        let fp = misfit(&plus)?;
        let fm = misfit(&minus)?;
        out.push((fp - fm) / (T::of(2.0) * delta));
    }
    Ok(out)
}

/// Misfit gradient by fictitious-time cross-correlation,
/// `-1/(2 omega0) integral E_adj . dE/dt`, with every snapshot kept in
/// memory. Tiny grids only; the per-run snapshot budget is enforced.
///
/// The adjoint system has zero final conditions and is integrated backward,
/// which after time reversal is one more forward run whose electric sources
/// are `Re sum_k conj(lambda_E) kernel_k` read at reversed times (magnetic
/// residuals enter through the H-equation with the
/// `sqrt(-2 omega0 / (i omega))` factor). Returns log-resistivity gradients
/// comparable with the frequency-domain path.
pub fn timedomain_gradient<T: Real>(
    problem: &Problem<'_, T>,
    param: &ModelParam<T>,
    budget_bytes: usize,
) -> Result<Vec<Vol<T>>> {
    let steps = problem.sim.fixed_steps.ok_or_else(|| {
        Error::Simulation("time-domain gradient oracle requires fixed_steps".into())
    })?;
    if steps < 2 {
        return Err(Error::Simulation("need at least two steps".into()));
    }
    let n_last = steps - 1; // frames 0..=n_last, final time T = n_last dt
    let grid = problem.grid;
    let medium = param.to_medium(grid)?;
    let eps = sigma_to_epsilon(&medium, problem.sim.omega0)?;
    let dt = problem.time_step(&medium)?;
    let t_final = dt * T::of(n_last as f64);
    let omega0 = problem.sim.omega0;
    let freqs = &problem.sim.freqs;
    let rates: Vec<T> = freqs.iter().map(|&f| kernel_rate(f, omega0)).collect();

    let mut cfg = problem.sim.clone();
    cfg.dt_override = Some(dt);
    cfg.fixed_steps = Some(steps);

    let basis = crate::adjoint_source::compute_basis(
        &problem.basis_params(dt),
        problem.basis_tol,
        problem.basis_max_iter,
    )?;

    // accumulated -(1/2 omega0) E_adj . dE/dt per component box, then
    // gathered to cells with the same quarter-volume split as the main path
    let [n1, n2, n3] = grid.n;
    let mut part_h: Vol<T> = Vol::zeros(n1, n2, n3);
    let mut part_v: Vol<T> = Vol::zeros(n1, n2, n3);

    for src in &problem.survey.sources {
        // impulse-response source series: raw accumulated receiver spectra
        // then equal the diffusive data directly
        let coeffs: Vec<Cplx<T>> = freqs
            .iter()
            .map(|&f| {
                let cal = injection_calibration(src.kind, f, omega0, dt);
                let g = match src.kind {
                    SourceKind::Electric => elec_source_factor(f, omega0),
                    SourceKind::Magnetic => Cplx::new(T::one(), T::zero()),
                };
                g / cal
            })
            .collect();
        let series = basis.synthesize(&coeffs)?;

        let mut probes = Vec::new();
        let mut owners = Vec::new();
        for rcv in &problem.survey.receivers {
            for &comp in &rcv.components {
                probes.push(Probe {
                    position: rcv.position,
                    component: comp,
                });
                owners.push((rcv.id, comp));
            }
        }
        let fwd = run_simulation(
            grid,
            &eps,
            medium.mu,
            &cfg,
            &[Drive {
                position: src.position,
                orientation: src.orientation,
                kind: src.kind,
                moment: src.moment,
                series: Some(series),
            }],
            &probes,
            &RunOptions {
                snapshot_budget: Some(budget_bytes),
                ..Default::default()
            },
        )?;
        let fwd_snaps = fwd.snapshots.as_ref().unwrap();

        // residual multipliers lambda = W^2 (d_obs - d_syn)
        let mut lambdas: Vec<Vec<Cplx<T>>> = Vec::with_capacity(owners.len());
        for (p, &(rcv, comp)) in owners.iter().enumerate() {
            let mut lam = vec![Cplx::new(T::zero(), T::zero()); freqs.len()];
            for (k, l) in lam.iter_mut().enumerate() {
                if let Some(o) = problem.obs.get(src.id, rcv, comp, k) {
                    *l = (o.value - fwd.probe_spectra[p][k]).scale(o.weight * o.weight);
                }
            }
            lambdas.push(lam);
        }

        // reversed-time adjoint sources, one real series per receiver/component
        let mut adj_drives = Vec::new();
        for (p, &(rcv_id, comp)) in owners.iter().enumerate() {
            let lam = &lambdas[p];
            if lam.iter().all(|c| c.re == T::zero() && c.im == T::zero()) {
                continue;
            }
            let rcv = problem.survey.receiver(rcv_id).unwrap();
            let electric = comp.is_electric();
            let rhs = |t: T| -> T {
                if t < T::zero() {
                    return T::zero();
                }
                let mut v = T::zero();
                for (k, &rate) in rates.iter().enumerate() {
                    let factor = if electric {
                        lam[k].conj()
                    } else {
                        mag_field_factor(freqs[k], omega0) * lam[k].conj()
                    };
                    v += (factor * kernel(rate, t)).re;
                }
                v
            };
            let len = if electric { steps - 1 } else { steps };
            let series: Vec<T> = (0..len)
                .map(|m| {
                    let tau = if electric {
                        dt * (T::of(m as f64) + T::of(0.5))
                    } else {
                        dt * T::of(m as f64)
                    };
                    rhs(t_final - tau)
                })
                .collect();
            let mut orientation = [T::zero(); 3];
            orientation[comp.axis()] = T::one();
            adj_drives.push(Drive {
                position: rcv.position,
                orientation,
                kind: if electric {
                    SourceKind::Electric
                } else {
                    SourceKind::Magnetic
                },
                moment: T::one(),
                series: Some(series),
            });
        }
        if adj_drives.is_empty() {
            continue; // zero residual, zero contribution
        }
        let adj = run_simulation(
            grid,
            &eps,
            medium.mu,
            &cfg,
            &adj_drives,
            &[],
            &RunOptions {
                snapshot_budget: Some(budget_bytes),
                ..Default::default()
            },
        )?;
        let adj_snaps = adj.snapshots.as_ref().unwrap();

        // cross-correlate: E_adj at (n+1/2) dt pairs with the forward field
        // difference across the same interval
        let half = T::of(0.5);
        let scale = -(T::of(2.0) * omega0).recip();
        for comp in 0..3 {
            let len: usize = fwd_snaps.ranges[comp].iter().map(|r| r.len()).product();
            let mut density = vec![T::zero(); len];
            for n in 0..n_last {
                let f0 = &fwd_snaps.frames[n][comp];
                let f1 = &fwd_snaps.frames[n + 1][comp];
                let m = n_last - 1 - n;
                let a0 = &adj_snaps.frames[m][comp];
                let a1 = &adj_snaps.frames[m + 1][comp];
                for idx in 0..len {
                    let eadj = (a0[idx] + a1[idx]) * half;
                    density[idx] += eadj * (f1[idx] - f0[idx]);
                }
            }
            // gather to cells with the quarter-volume split
            let r = &fwd_snaps.ranges[comp];
            let (l0, l1) = (r[0].len(), r[1].len());
            let box_idx = |i: usize, j: usize, k: usize| -> usize {
                (i - r[0].start) + l0 * ((j - r[1].start) + l1 * (k - r[2].start))
            };
            let part = if comp == 2 { &mut part_v } else { &mut part_h };
            let npml = grid.npml;
            let quarter = T::of(0.25);
            for k in 0..n3 {
                for j in 0..n2 {
                    for i in 0..n1 {
                        let (pi, pj, pk) = (i + npml, j + npml, k + npml);
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
                            sum += density[box_idx(p[0], p[1], p[2])];
                        }
                        let dv = grid.cell_volume(pi, pj, pk);
                        *part.at_mut(i, j, k) += sum * scale * quarter * dv;
                    }
                }
            }
        }
    }

    let grad_sigma = match param.anisotropy {
        Anisotropy::Isotropic => {
            for (h, &v) in part_h.data.iter_mut().zip(&part_v.data) {
                *h = *h + v;
            }
            GradientVolume {
                per_class: vec![part_h],
                anisotropy: Anisotropy::Isotropic,
            }
        }
        Anisotropy::Vti => GradientVolume {
            per_class: vec![part_h, part_v],
            anisotropy: Anisotropy::Vti,
        },
    };

    // chain rule to log-resistivity for direct comparability
    let mut out = Vec::with_capacity(grad_sigma.per_class.len());
    for (class, gs) in grad_sigma.per_class.iter().enumerate() {
        let sigma = if class == 0 {
            &medium.sigma_h
        } else {
            &medium.sigma_v
        };
        let mut g = chain_rule_to_logparam(gs, &interior_of(grid, sigma))?;
        for (gi, &frozen) in g.data.iter_mut().zip(&param.frozen.data) {
            if frozen {
                *gi = T::zero();
            }
        }
        out.push(g);
    }
    Ok(out)
}

/// Cosine similarity of two derivative sets.
pub fn cosine_similarity<T: Real>(a: &[T], b: &[T]) -> T {
    let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na: T = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let nb: T = b.iter().map(|&x| x * x).sum::<T>().sqrt();
    if na == T::zero() || nb == T::zero() {
        return T::zero();
    }
    dot / (na * nb)
}
