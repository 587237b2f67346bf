//! Integration tests of the adjoint machinery: Green's-function baseline,
//! superposition, mute/frozen invariants and gradient-misfit consistency.

use csemwave::adjoint_source::compute_basis;
use csemwave::fdtd::{run_forward, SimConfig, SourceKind};
use csemwave::gradient::{
    compute_weights, run_adjoint, tikhonov_value_and_gradient, Problem, WeightParams,
    WeightedResidual,
};
use csemwave::grid::{build_grid, AxisSpec, Component, Grid3D, GridSpec};
use csemwave::medium::{Medium, ModelParam};
use csemwave::scalar::Cplx;
use csemwave::survey::{DataSet, ReceiverDef, SourceDef, Survey};
use csemwave::vol::Vol;

fn grid8(npml: usize) -> Grid3D<f64> {
    let d = 100.0;
    build_grid(&GridSpec {
        axes: [
            AxisSpec::uniform(8, d),
            AxisSpec::uniform(8, d),
            AxisSpec::uniform(8, d),
        ],
        npml,
        origin: [-400.0; 3],
    })
    .unwrap()
}

fn survey_two_rcv() -> Survey<f64> {
    Survey {
        sources: vec![SourceDef {
            id: 1,
            position: [-250.0, -250.0, -250.0],
            orientation: [1.0, 0.0, 0.0],
            kind: SourceKind::Electric,
            moment: 1.0,
        }],
        receivers: vec![
            ReceiverDef {
                id: 1,
                position: [250.0, -150.0, -250.0],
                components: vec![Component::Ex],
            },
            ReceiverDef {
                id: 2,
                position: [-150.0, 250.0, -250.0],
                components: vec![Component::Ex],
            },
        ],
        freqs: vec![0.25, 1.0],
        reciprocity: false,
    }
}

fn base_sim(steps: usize) -> SimConfig<f64> {
    let mut sim = SimConfig::new(vec![0.25, 1.0], 2.0 * std::f64::consts::PI);
    sim.fixed_steps = Some(steps);
    sim
}

/// A unit residual at one receiver must reproduce the Green's-function
/// response of a dipole placed there.
#[test]
fn adjoint_field_is_greens_function_of_receiver_dipole() {
    let grid = grid8(16);
    let medium = Medium::homogeneous(&grid, 1.0).unwrap();
    let sim = base_sim(400);
    let survey = survey_two_rcv();
    let eps = csemwave::medium::sigma_to_epsilon(&medium, sim.omega0).unwrap();
    let dt = csemwave::fdtd::compute_time_step(&grid, &eps, medium.mu, 0.9).unwrap();
    let mut cfg = sim.clone();
    cfg.dt_override = Some(dt);

    // unit residual (weight 1) in Ex at receiver 1, first frequency only
    let residuals = [WeightedResidual {
        rcv: 1,
        component: Component::Ex,
        freq_idx: 0,
        wdelta: Cplx::new(1.0, 0.0),
        weight: 1.0,
    }];
    let problem = Problem {
        grid: &grid,
        survey: &survey,
        obs: &DataSet::new(),
        sim: cfg.clone(),
        basis_gamma: 1e-6,
        basis_tol: 1e-12,
        basis_max_iter: 300,
        basis_nt: None,
    };
    let basis = compute_basis(&problem.basis_params(dt), 1e-12, 300).unwrap();
    let (adj_vols, _) = run_adjoint(
        &grid,
        &medium,
        &cfg,
        dt,
        &residuals,
        &survey,
        &basis,
        survey.sources[0].position,
    )
    .unwrap();

    // reference: forward run with a unit x-dipole at the receiver position
    let src = SourceDef {
        id: 99,
        position: survey.receivers[0].position,
        orientation: [1.0, 0.0, 0.0],
        kind: SourceKind::Electric,
        moment: 1.0,
    };
    let probe_rcv = [ReceiverDef {
        id: 1,
        position: survey.sources[0].position,
        components: vec![Component::Ex],
    }];
    let reference = run_forward(&grid, &medium, &cfg, &src, &probe_rcv, true).unwrap();
    let ref_vols = reference.e_volumes.as_ref().unwrap();

    // compare E volumes over the interior at the driven frequency
    let mut num = 0.0;
    let mut den = 0.0;
    for comp in 0..3 {
        let r = csemwave::fdtd::e_volume_ranges(&grid, comp);
        for k in r[2].clone() {
            for j in r[1].clone() {
                for i in r[0].clone() {
                    let a = adj_vols[0][comp].at(i, j, k);
                    let b = ref_vols[0][comp].at(i, j, k);
                    num += (a - b).norm_sqr();
                    den += b.norm_sqr();
                }
            }
        }
    }
    let rel = (num / den).sqrt();
    assert!(
        rel < 0.01,
        "adjoint field deviates from receiver dipole response by {:.3}%",
        rel * 100.0
    );
}

/// Two receivers driven together equal the sum of single-receiver runs.
#[test]
fn adjoint_superposition_over_receivers() {
    let grid = grid8(8);
    let medium = Medium::homogeneous(&grid, 1.0).unwrap();
    let sim = base_sim(300);
    let survey = survey_two_rcv();
    let eps = csemwave::medium::sigma_to_epsilon(&medium, sim.omega0).unwrap();
    let dt = csemwave::fdtd::compute_time_step(&grid, &eps, medium.mu, 0.9).unwrap();
    let mut cfg = sim.clone();
    cfg.dt_override = Some(dt);
    let problem = Problem {
        grid: &grid,
        survey: &survey,
        obs: &DataSet::new(),
        sim: cfg.clone(),
        basis_gamma: 1e-3,
        basis_tol: 1e-10,
        basis_max_iter: 200,
        basis_nt: None,
    };
    let basis = compute_basis(&problem.basis_params(dt), 1e-10, 200).unwrap();

    let r1 = WeightedResidual {
        rcv: 1,
        component: Component::Ex,
        freq_idx: 0,
        wdelta: Cplx::new(0.7, -0.4),
        weight: 1.0,
    };
    let r2 = WeightedResidual {
        rcv: 2,
        component: Component::Ex,
        freq_idx: 1,
        wdelta: Cplx::new(-1.2, 0.9),
        weight: 1.0,
    };
    let run = |rs: &[WeightedResidual<f64>]| {
        run_adjoint(
            &grid,
            &medium,
            &cfg,
            dt,
            rs,
            &survey,
            &basis,
            survey.sources[0].position,
        )
        .unwrap()
        .0
    };
    let both = run(&[r1, r2]);
    let only1 = run(&[r1]);
    let only2 = run(&[r2]);

    let mut num = 0.0;
    let mut den = 0.0;
    for f in 0..2 {
        for comp in 0..3 {
            for ((a, b), c) in both[f][comp]
                .data
                .iter()
                .zip(&only1[f][comp].data)
                .zip(&only2[f][comp].data)
            {
                num += (a - (b + c)).norm_sqr();
                den += a.norm_sqr();
            }
        }
    }
    assert!(den > 0.0);
    assert!((num / den).sqrt() < 1e-10, "superposition violated");
}

/// Zero residuals produce an exactly zero adjoint field and gradient.
#[test]
fn zero_residual_zero_gradient() {
    let grid = grid8(8);
    let survey = survey_two_rcv();
    let sim = base_sim(200);

    // observations exactly equal to the synthetic data of the start model
    let start = ModelParam::isotropic(Vol::filled(8, 8, 8, 0.0f64), -3.0, 3.0);
    let medium = start.to_medium(&grid).unwrap();
    let eps = csemwave::medium::sigma_to_epsilon(&medium, sim.omega0).unwrap();
    let dt = csemwave::fdtd::compute_time_step(&grid, &eps, medium.mu, 0.9).unwrap();
    let mut cfg = sim.clone();
    cfg.dt_override = Some(dt);

    let empty = DataSet::new();
    let gen = Problem {
        grid: &grid,
        survey: &survey,
        obs: &empty,
        sim: cfg.clone(),
        basis_gamma: 1e-3,
        basis_tol: 1e-10,
        basis_max_iter: 200,
        basis_nt: None,
    };
    let (mut obs, _) = gen.synthetic_data(&medium, dt).unwrap();
    for e in &mut obs.entries {
        e.weight = 1.0;
    }
    let problem = Problem { obs: &obs, ..gen };
    let (report, grads) = problem.misfit_and_gradient(&start).unwrap();
    assert_eq!(report.phi_d, 0.0);
    assert!(grads[0].data.iter().all(|&g| g == 0.0));
}

/// Muted data contribute nothing; frozen cells stay at zero gradient.
#[test]
fn mute_and_frozen_invariants() {
    let grid = grid8(8);
    let survey = survey_two_rcv();
    let sim = base_sim(300);
    let truth = {
        let mut m = Vol::filled(8, 8, 8, 0.0f64);
        for k in 2..5 {
            for j in 2..5 {
                for i in 2..5 {
                    *m.at_mut(i, j, k) = 0.8;
                }
            }
        }
        ModelParam::isotropic(m, -3.0, 3.0)
    };
    let start = ModelParam::isotropic(Vol::filled(8, 8, 8, 0.0f64), -3.0, 3.0);
    let medium0 = start.to_medium(&grid).unwrap();
    let eps = csemwave::medium::sigma_to_epsilon(&medium0, sim.omega0).unwrap();
    let dt = csemwave::fdtd::compute_time_step(&grid, &eps, medium0.mu, 0.8).unwrap();
    let mut cfg = sim.clone();
    cfg.dt_override = Some(dt);

    let empty = DataSet::new();
    let gen = Problem {
        grid: &grid,
        survey: &survey,
        obs: &empty,
        sim: cfg.clone(),
        basis_gamma: 1e-3,
        basis_tol: 1e-10,
        basis_max_iter: 200,
        basis_nt: None,
    };
    let medium_true = truth.to_medium(&grid).unwrap();
    let eps_t = csemwave::medium::sigma_to_epsilon(&medium_true, cfg.omega0).unwrap();
    let dt_t = csemwave::fdtd::compute_time_step(&grid, &eps_t, medium_true.mu, 0.8).unwrap();
    let mut gen_cfg = cfg.clone();
    gen_cfg.dt_override = Some(dt_t);
    let gen = Problem { sim: gen_cfg, ..gen };
    let (mut obs, _) = gen.synthetic_data(&medium_true, dt_t).unwrap();
    compute_weights(
        &mut obs,
        &survey,
        &WeightParams {
            eta: 0.03,
            floor: 1e-16,
            mute_offset: 0.0,
        },
    )
    .unwrap();

    // mute receiver 2 by hand
    let mut obs_muted = obs.clone();
    for e in &mut obs_muted.entries {
        if e.rcv == 2 {
            e.weight = 0.0;
        }
    }
    // drop receiver 2 data entirely
    let mut obs_dropped = DataSet::new();
    for e in &obs.entries {
        if e.rcv != 2 {
            obs_dropped.push(*e);
        }
    }

    fn make<'a>(
        grid: &'a Grid3D<f64>,
        survey: &'a Survey<f64>,
        obs: &'a DataSet<f64>,
        cfg: &SimConfig<f64>,
    ) -> Problem<'a, f64> {
        Problem {
            grid,
            survey,
            obs,
            sim: cfg.clone(),
            basis_gamma: 1e-3,
            basis_tol: 1e-10,
            basis_max_iter: 200,
            basis_nt: None,
        }
    }
    let pm = make(&grid, &survey, &obs_muted, &cfg);
    let pd = make(&grid, &survey, &obs_dropped, &cfg);
    let (rep_m, grad_m) = pm.misfit_and_gradient(&start).unwrap();
    let (rep_d, grad_d) = pd.misfit_and_gradient(&start).unwrap();
    assert_eq!(rep_m.phi_d, rep_d.phi_d, "muted datum must not affect misfit");
    for (a, b) in grad_m[0].data.iter().zip(&grad_d[0].data) {
        assert_eq!(a, b, "muted datum must not affect the gradient");
    }

    // frozen cells
    let mut frozen = start.clone();
    *frozen.frozen.at_mut(3, 3, 3) = true;
    *frozen.frozen.at_mut(0, 0, 0) = true;
    let p = make(&grid, &survey, &obs, &cfg);
    let (_, g) = p.misfit_and_gradient(&frozen).unwrap();
    assert_eq!(g[0].at(3, 3, 3), 0.0);
    assert_eq!(g[0].at(0, 0, 0), 0.0);
    assert!(g[0].at(4, 4, 4) != 0.0);
}

/// Halving a random model perturbation shrinks the linearization error by
/// about four.
#[test]
fn gradient_misfit_consistency_order() {
    use rand::{Rng, SeedableRng};
    let grid = grid8(16);
    let survey = survey_two_rcv();
    let mut sim = base_sim(400);
    let start = ModelParam::isotropic(Vol::filled(8, 8, 8, 0.0f64), -3.0, 3.0);
    let truth = {
        let mut m = Vol::filled(8, 8, 8, 0.0f64);
        for k in 3..6 {
            for j in 2..6 {
                for i in 2..6 {
                    *m.at_mut(i, j, k) = 1.0;
                }
            }
        }
        ModelParam::isotropic(m, -3.0, 3.0)
    };
    let medium0 = start.to_medium(&grid).unwrap();
    let eps = csemwave::medium::sigma_to_epsilon(&medium0, sim.omega0).unwrap();
    // margin for perturbed trial models
    let dt = csemwave::fdtd::compute_time_step(&grid, &eps, medium0.mu, 0.7).unwrap();
    sim.dt_override = Some(dt);

    let empty = DataSet::new();
    let medium_true = truth.to_medium(&grid).unwrap();
    let eps_t = csemwave::medium::sigma_to_epsilon(&medium_true, sim.omega0).unwrap();
    let dt_t = csemwave::fdtd::compute_time_step(&grid, &eps_t, medium_true.mu, 0.7).unwrap();
    let mut gen_cfg = sim.clone();
    gen_cfg.dt_override = Some(dt_t);
    let gen = Problem {
        grid: &grid,
        survey: &survey,
        obs: &empty,
        sim: gen_cfg,
        basis_gamma: 1e-6,
        basis_tol: 1e-12,
        basis_max_iter: 300,
        basis_nt: None,
    };
    let (mut obs, _) = gen.synthetic_data(&medium_true, dt_t).unwrap();
    compute_weights(
        &mut obs,
        &survey,
        &WeightParams {
            eta: 0.03,
            floor: 1e-16,
            mute_offset: 0.0,
        },
    )
    .unwrap();
    let problem = Problem {
        grid: &grid,
        survey: &survey,
        obs: &obs,
        sim: sim.clone(),
        basis_gamma: 1e-6,
        basis_tol: 1e-12,
        basis_max_iter: 300,
        basis_nt: None,
    };
    let (rep0, grad) = problem.misfit_and_gradient(&start).unwrap();

    // descent-direction perturbation (strong curvature along it) plus a
    // small random part, scaled to a 0.15 max log-resistivity update
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let gmax = grad[0].data.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let delta: Vec<f64> = grad[0]
        .data
        .iter()
        .map(|&g| -0.15 * g / gmax + rng.gen_range(-0.01..0.01))
        .collect();
    let lin_err = |scale: f64| -> f64 {
        let mut m = start.clone();
        for (x, &d) in m.m[0].data.iter_mut().zip(&delta) {
            *x += scale * d;
        }
        let phi = problem.misfit(&m).unwrap().phi_d;
        let gdot: f64 = grad[0]
            .data
            .iter()
            .zip(&delta)
            .map(|(&g, &d)| g * scale * d)
            .sum();
        (phi - rep0.phi_d - gdot).abs()
    };
    let e1 = lin_err(1.0);
    let e2 = lin_err(0.5);
    let ratio = e1 / e2;
    assert!(
        (2.5..7.0).contains(&ratio),
        "linearization error must shrink ~4x: {e1:e} vs {e2:e} (ratio {ratio:.2})"
    );
}

/// Tikhonov term and depth weighting combine with the data term the way the
/// records claim.
#[test]
fn regularized_total_misfit_components() {
    let m = Vol::filled(4, 4, 4, 0.0f64);
    let mut p = ModelParam::isotropic(m, -2.0, 2.0);
    for (i, x) in p.m[0].data.iter_mut().enumerate() {
        *x = (i % 5) as f64 * 0.1;
    }
    let (v, g) = tikhonov_value_and_gradient(&p, [1.0, 1.0, 0.1]);
    assert!(v > 0.0);
    assert_eq!(g[0].len(), 64);
}
