//! Scratch diagnostic: adjoint gradient vs central finite differences.
use csemwave::fdtd::{SimConfig, SourceKind};
use csemwave::gradient::{compute_weights, Problem, WeightParams};
use csemwave::grid::{build_grid, AxisSpec, Component, GridSpec};
use csemwave::medium::ModelParam;
use csemwave::oracle::{cosine_similarity, fd_gradient};
use csemwave::survey::{ReceiverDef, SourceDef, Survey};
use csemwave::vol::Vol;

fn main() {
    let arg = |n: usize, dflt: f64| std::env::args().nth(n).and_then(|s| s.parse().ok()).unwrap_or(dflt);
    let gamma = arg(1, 1e-3);
    let npml = arg(4, 8.0) as usize;
    let steps = arg(2, 400.0) as usize;
    let fd_delta = arg(3, 1e-4);
    let d = 100.0;
    let n = 8;
    let grid = build_grid(&GridSpec {
        axes: [AxisSpec::uniform(n, d), AxisSpec::uniform(n, d), AxisSpec::uniform(n, d)],
        npml,
        origin: [-(n as f64) * d / 2.0; 3],
    })
    .unwrap();

    let survey = Survey {
        sources: vec![
            SourceDef { id: 1, position: [-250.0, -250.0, -350.0], orientation: [1.0, 0.0, 0.0], kind: SourceKind::Electric, moment: 1.0 },
            SourceDef { id: 2, position: [250.0, 250.0, -350.0], orientation: [0.0, 1.0, 0.0], kind: SourceKind::Electric, moment: 1.0 },
        ],
        receivers: vec![
            ReceiverDef { id: 1, position: [-250.0, 250.0, -350.0], components: vec![Component::Ex, Component::Ey] },
            ReceiverDef { id: 2, position: [250.0, -250.0, -350.0], components: vec![Component::Ex] },
            ReceiverDef { id: 3, position: [0.0, 0.0, -250.0], components: vec![Component::Ey] },
            ReceiverDef { id: 4, position: [150.0, -50.0, -350.0], components: vec![Component::Ex] },
        ],
        freqs: vec![0.25, 1.0],
        reciprocity: false,
    };

    // true model: background 1 ohm-m with a resistive block
    let mut m_true = Vol::filled(n, n, n, 0.0f64);
    for k in 3..6 {
        for j in 2..6 {
            for i in 2..6 {
                *m_true.at_mut(i, j, k) = 3.0f64.ln();
            }
        }
    }
    let true_param = ModelParam::isotropic(m_true, -3.0, 3.0);
    let medium_true = true_param.to_medium(&grid).unwrap();

    let mut sim = SimConfig::new(survey.freqs.clone(), 2.0 * std::f64::consts::PI);
    sim.fixed_steps = Some(steps);

    // pin dt to the CFL of the homogeneous start model
    let start = ModelParam::isotropic(Vol::filled(n, n, n, 0.0f64), -3.0, 3.0);
    let medium0 = start.to_medium(&grid).unwrap();
    let eps0 = csemwave::medium::sigma_to_epsilon(&medium0, sim.omega0).unwrap();
    let dt = csemwave::fdtd::compute_time_step(&grid, &eps0, medium0.mu, 0.8).unwrap();
    sim.dt_override = Some(dt);
    println!("gamma={gamma:e} steps={steps} fd_delta={fd_delta:e} dt={dt:.5}");

    // observed data from the true model, at its own stable time step
    let dummy_obs = csemwave::survey::DataSet::new();
    let mut gen_sim = sim.clone();
    gen_sim.dt_override = None;
    gen_sim.fixed_steps = None;
    gen_sim.steady_tol = 1e-7;
    let gen = Problem { grid: &grid, survey: &survey, obs: &dummy_obs, sim: gen_sim, basis_gamma: gamma, basis_tol: 1e-10, basis_max_iter: 200, basis_nt: None };
    let eps_t = csemwave::medium::sigma_to_epsilon(&medium_true, sim.omega0).unwrap();
    let dt_t = csemwave::fdtd::compute_time_step(&grid, &eps_t, medium_true.mu, 0.8).unwrap();
    let (mut obs, conv) = gen.synthetic_data(&medium_true, dt_t).unwrap();
    println!("data generated, converged = {conv}");
    compute_weights(&mut obs, &survey, &WeightParams { eta: 0.03, floor: 1e-16, mute_offset: 0.0 }).unwrap();

    let problem = Problem { grid: &grid, survey: &survey, obs: &obs, sim: sim.clone(), basis_gamma: gamma, basis_tol: 1e-10, basis_max_iter: 200, basis_nt: None };

    println!("obs[0..4]: {:?}", obs.entries.iter().take(4).map(|e| (e.src, e.rcv, e.component, e.freq_idx, e.value, e.weight)).collect::<Vec<_>>());
    let rep0 = problem.misfit(&start).unwrap();
    println!("dsyn[0..4]: {:?}", rep0.d_syn.entries.iter().take(4).map(|e| (e.src, e.rcv, e.component, e.freq_idx, e.value)).collect::<Vec<_>>());
    let t0 = std::time::Instant::now();
    let (report, grads) = problem.misfit_and_gradient(&start).unwrap();
    println!("phi_d = {:e}, n_active = {}, grad wall {:?}", report.phi_d, report.n_active, t0.elapsed());

    let cells = [
        (0usize, 3usize, 3usize, 3usize),
        (0, 2, 4, 3),
        (0, 4, 2, 2),
        (0, 5, 5, 4),
        (0, 3, 4, 5),
        (0, 1, 1, 1),
        (0, 6, 3, 3),
    ];
    let t0 = std::time::Instant::now();
    let fd = fd_gradient(
        |p| problem.misfit(p).map(|r| r.phi_d),
        &start,
        &cells,
        fd_delta,
    )
    .unwrap();
    println!("fd wall {:?}", t0.elapsed());

    let mut adj = Vec::new();
    for (ci, &(class, i, j, k)) in cells.iter().enumerate() {
        let a = grads[class].at(i, j, k);
        adj.push(a);
        let rel = (a - fd[ci]).abs() / fd[ci].abs().max(1e-300);
        println!("cell {:?}: adj {:+.6e}  fd {:+.6e}  rel {:.4}%  ratio {:.6}", (i, j, k), a, fd[ci], rel * 100.0, a / fd[ci]);
    }
    println!("cosine adj-fd = {:.6}", cosine_similarity(&adj, &fd));

    // appendix-style time-domain path
    let t0 = std::time::Instant::now();
    let td = csemwave::oracle::timedomain_gradient(&problem, &start, 512 << 20).unwrap();
    println!("timedomain wall {:?}", t0.elapsed());
    let mut tdv = Vec::new();
    for &(class, i, j, k) in &cells {
        tdv.push(td[class].at(i, j, k));
    }
    for (ci, &(_, i, j, k)) in cells.iter().enumerate() {
        println!("cell {:?}: td {:+.6e}  fd {:+.6e}  rel {:.4}%", (i, j, k), tdv[ci], fd[ci], (tdv[ci] - fd[ci]).abs() / fd[ci].abs() * 100.0);
    }
    println!("cosine td-fd = {:.6}", cosine_similarity(&tdv, &fd));
    // full-volume cosine between the two adjoint paths
    println!("cosine td-adj full = {:.6}", cosine_similarity(&td[0].data, &grads[0].data));
}
