//! Scratch diagnostic: desk-scale two-block inversion behavior.
use csemwave::fdtd::{SimConfig, SourceKind};
use csemwave::gradient::{compute_weights, DepthWeighting, Problem, WeightParams};
use csemwave::grid::{build_grid, AxisSpec, Component, GridSpec};
use csemwave::inversion::{invert, InvConfig};
use csemwave::medium::ModelParam;
use csemwave::survey::{DataSet, ReceiverDef, SourceDef, Survey};
use csemwave::vol::Vol;

fn main() {
    let iters: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(15);
    let (n1, n2, n3) = (32usize, 32usize, 16usize);
    let (d1, d2, d3) = (125.0, 125.0, 100.0);
    let grid = build_grid(&GridSpec {
        axes: [AxisSpec::uniform(n1, d1), AxisSpec::uniform(n2, d2), AxisSpec::uniform(n3, d3)],
        npml: 8,
        origin: [-2000.0, -2000.0, -400.0],
    })
    .unwrap();

    let rho_bounds = (0.2f64, 100.0f64);
    let air_rho = 100.0f64;
    let bg = 5.0f64;

    // truth: two blocks
    let paint = |param: &mut ModelParam<f64>, lo: [f64; 3], hi: [f64; 3], rho: f64| {
        for k in 0..n3 {
            let z = grid.center(2, grid.npml + k);
            if z < lo[2] || z > hi[2] { continue; }
            for j in 0..n2 {
                let y = grid.center(1, grid.npml + j);
                if y < lo[1] || y > hi[1] { continue; }
                for i in 0..n1 {
                    let x = grid.center(0, grid.npml + i);
                    if x < lo[0] || x > hi[0] { continue; }
                    *param.m[0].at_mut(i, j, k) = rho.ln();
                }
            }
        }
    };
    let base = |rho_bg: f64| {
        let mut p = ModelParam::isotropic(
            Vol::filled(n1, n2, n3, rho_bg.ln()),
            rho_bounds.0.ln(),
            rho_bounds.1.ln(),
        );
        paint(&mut p, [f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY], [f64::INFINITY, f64::INFINITY, 0.0], air_rho);
        // freeze the air
        for k in 0..n3 {
            if grid.center(2, grid.npml + k) < 0.0 {
                for j in 0..n2 { for i in 0..n1 { *p.frozen.at_mut(i, j, k) = true; } }
            }
        }
        p.m_ref = p.m.clone();
        p
    };
    let mut truth = base(bg);
    paint(&mut truth, [-1250.0, -500.0, 200.0], [-250.0, 500.0, 700.0], 1.0);
    paint(&mut truth, [250.0, -500.0, 200.0], [1250.0, 500.0, 700.0], 100.0);
    let initial = base(bg);

    // survey: 4 x-directed sources, 16 receivers, Ex+Ey, 2 freqs
    let mut receivers = Vec::new();
    let mut id = 0;
    for &y in &[-1500.0, -500.0, 500.0, 1500.0] {
        for &x in &[-1500.0, -500.0, 500.0, 1500.0] {
            id += 1;
            receivers.push(ReceiverDef { id, position: [x, y, 50.0], components: vec![Component::Ex, Component::Ey] });
        }
    }
    let sources: Vec<SourceDef<f64>> = [(-1000.0, -1000.0), (1000.0, -1000.0), (-1000.0, 1000.0), (1000.0, 1000.0)]
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| SourceDef { id: i as u32 + 1, position: [x, y, 50.0], orientation: [1.0, 0.0, 0.0], kind: SourceKind::Electric, moment: 1.0 })
        .collect();
    let survey = Survey { sources, receivers, freqs: vec![0.25, 1.0], reciprocity: false };

    let sim = SimConfig::new(survey.freqs.clone(), 2.0 * std::f64::consts::PI);

    // observed data
    let t0 = std::time::Instant::now();
    let empty = DataSet::new();
    let gen = Problem { grid: &grid, survey: &survey, obs: &empty, sim: sim.clone(), basis_gamma: 1e-3, basis_tol: 1e-10, basis_max_iter: 200, basis_nt: None };
    let medium_true = truth.to_medium(&grid).unwrap();
    let dt_true = gen.time_step(&medium_true).unwrap();
    println!("dt_true = {dt_true:.5}");
    let (mut obs, conv) = gen.synthetic_data(&medium_true, dt_true).unwrap();
    println!("data gen: {:?} converged {conv}", t0.elapsed());
    obs.add_noise(0.03, 7);
    compute_weights(&mut obs, &survey, &WeightParams { eta: 0.03, floor: 1e-15, mute_offset: 600.0 }).unwrap();

    let problem = Problem { grid: &grid, survey: &survey, obs: &obs, sim, basis_gamma: 1e-3, basis_tol: 1e-10, basis_max_iter: 200, basis_nt: None };
    let inv_cfg = InvConfig {
        max_iter: iters,
        depth_weighting: Some(DepthWeighting { power: 1.5, z0: 2252.0, seabed_z: 0.0 }),
        ..Default::default()
    };
    let t0 = std::time::Instant::now();
    let (final_model, records) = invert(&problem, initial.clone(), &inv_cfg).unwrap();
    println!("inversion wall {:?}", t0.elapsed());
    for r in &records {
        println!(
            "it {:2}  phi_d {:.4e}  norm {:.4e}  phi_m {:.3e}  beta {:.3e}  alpha {:.3e}  restart {}  wall {:.1}s",
            r.iteration, r.phi_d, r.normalized, r.phi_m, r.beta, r.alpha, r.restart, r.wall_secs
        );
    }
    let initial_norm = problem.misfit(&initial).unwrap().normalized;
    let final_norm = records.last().unwrap().normalized;
    println!("normalized misfit: initial {initial_norm:.4e} -> final {final_norm:.4e} (ratio {:.3})", final_norm / initial_norm);

    // anomaly signs at block centers
    let cell_of = |x: f64, y: f64, z: f64| -> (usize, usize, usize) {
        let f = |axis: usize, v: f64| -> usize {
            (0..grid.n[axis])
                .min_by_key(|&i| ((grid.center(axis, grid.npml + i) - v).abs() * 1000.0) as i64)
                .unwrap()
        };
        (f(0, x), f(1, y), f(2, z))
    };
    let a = cell_of(-750.0, 0.0, 450.0);
    let b = cell_of(750.0, 0.0, 450.0);
    let da = final_model.m[0].at(a.0, a.1, a.2) - initial.m[0].at(a.0, a.1, a.2);
    let db = final_model.m[0].at(b.0, b.1, b.2) - initial.m[0].at(b.0, b.1, b.2);
    println!("anomaly at conductive block center: {da:+.4} (want < 0)");
    println!("anomaly at resistive block center:  {db:+.4} (want > 0)");
}
