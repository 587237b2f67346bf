use csemwave::fdtd::{run_forward, SimConfig, SourceKind};
use csemwave::gradient::Problem;
use csemwave::grid::{build_grid, AxisSpec, Component, GridSpec};
use csemwave::medium::ModelParam;
use csemwave::survey::{DataSet, ReceiverDef, SourceDef, Survey};
use csemwave::vol::Vol;

fn main() {
    let d = 100.0;
    let n = 8;
    let grid = build_grid(&GridSpec {
        axes: [AxisSpec::uniform(n, d), AxisSpec::uniform(n, d), AxisSpec::uniform(n, d)],
        npml: 8,
        origin: [-(n as f64) * d / 2.0; 3],
    })
    .unwrap();
    let survey = Survey {
        sources: vec![SourceDef { id: 1, position: [-250.0, -250.0, -350.0], orientation: [1.0, 0.0, 0.0], kind: SourceKind::Electric, moment: 1.0 }],
        receivers: vec![ReceiverDef { id: 1, position: [-250.0, 250.0, -350.0], components: vec![Component::Ex] }],
        freqs: vec![0.25, 1.0],
        reciprocity: false,
    };
    let mut sim = SimConfig::new(survey.freqs.clone(), 2.0 * std::f64::consts::PI);
    sim.fixed_steps = Some(400);
    let start = ModelParam::isotropic(Vol::filled(n, n, n, 0.0f64), -3.0, 3.0);
    let medium0 = start.to_medium(&grid).unwrap();
    let eps0 = csemwave::medium::sigma_to_epsilon(&medium0, sim.omega0).unwrap();
    let dt = csemwave::fdtd::compute_time_step(&grid, &eps0, medium0.mu, 0.8).unwrap();
    sim.dt_override = Some(dt);

    // direct run
    let out = run_forward(&grid, &medium0, &sim, &survey.sources[0], &survey.receivers, false).unwrap();
    println!("direct: {:?}", out.samples[0].values);

    // via Problem
    let dummy = DataSet::new();
    let p = Problem { grid: &grid, survey: &survey, obs: &dummy, sim: sim.clone(), basis_gamma: 1e-3, basis_tol: 1e-10, basis_max_iter: 200, basis_nt: None };
    let (dsyn, _) = p.synthetic_data(&medium0, dt).unwrap();
    println!("via problem: {:?}", dsyn.entries.iter().map(|e| e.value).collect::<Vec<_>>());
    let rep = p.misfit(&start).unwrap();
    println!("via misfit: {:?}", rep.d_syn.entries.iter().map(|e| e.value).collect::<Vec<_>>());
}
