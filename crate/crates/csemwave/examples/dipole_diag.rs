//! Scratch diagnostic: dipole accuracy vs analytic at several ranges.
use csemwave::fdtd::{run_forward, SimConfig, SourceKind};
use csemwave::grid::{build_grid, AxisSpec, Component, GridSpec};
use csemwave::medium::Medium;
use csemwave::oracle::analytic_whole_space_dipole;
use csemwave::scalar::mu_vacuum;
use csemwave::survey::{ReceiverDef, SourceDef};

fn main() {
    let sigma = 1.0;
    let freq = 1.0;
    let mu = mu_vacuum::<f64>();
    let d: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(80.0);
    let nx: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(46);
    let npml: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(8);
    let tol: f64 = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(1e-5);
    let (ny, nz) = (nx - 6, nx - 12);
    let grid = build_grid(&GridSpec {
        axes: [AxisSpec::uniform(nx, d), AxisSpec::uniform(ny, d), AxisSpec::uniform(nz, d)],
        npml,
        origin: [-(nx as f64) * d / 2.0, -(ny as f64) * d / 2.0, -(nz as f64) * d / 2.0],
    }).unwrap();
    let medium = Medium::homogeneous(&grid, sigma).unwrap();
    let mut cfg = SimConfig::new(vec![freq], 2.0 * std::f64::consts::PI);
    cfg.steady_tol = tol;
    let mut receivers = vec![];
    let mut id = 0;
    for r in [500.0, 600.0, 800.0, 1100.0, 1400.0] {
        id += 1;
        receivers.push(ReceiverDef { id, position: [r, 0.0, 0.0], components: vec![Component::Ex] });
        id += 1;
        receivers.push(ReceiverDef { id, position: [0.0, r, 0.0], components: vec![Component::Ex, Component::Hz] });
    }
    let source = SourceDef { id: 1, position: [0.0;3], orientation: [1.0,0.0,0.0], kind: SourceKind::Electric, moment: 1.0 };
    let t = std::time::Instant::now();
    let out = run_forward(&grid, &medium, &cfg, &source, &receivers, false).unwrap();
    println!("steps {} converged {} dt {:.4} wall {:?}", out.steps, out.converged, out.dt, t.elapsed());
    for s in &out.samples {
        let rcv = receivers.iter().find(|r| r.id == s.receiver).unwrap();
        let (ea, ha) = analytic_whole_space_dipole(sigma, mu, freq, source.position, source.orientation, rcv.position).unwrap();
        let want = match s.component { Component::Ex => ea[0], Component::Hz => ha[2], _ => unreachable!() };
        let got = s.values[0];
        println!("r={:6.0} {:?} {:?}  amp_rel {:+.3}%  phase {:+.3} deg", 
            (rcv.position[0].powi(2)+rcv.position[1].powi(2)).sqrt(),
            if rcv.position[0] != 0.0 { "axial" } else { "broad" },
            s.component,
            ((got.norm() - want.norm()) / want.norm()) * 100.0,
            (got / want).arg() * 180.0 / std::f64::consts::PI);
    }
}
