//! Integration tests of the fictitious-wave leap-frog engine.

use csemwave::fdtd::{
    kernel, kernel_rate, run_forward, run_simulation, Drive, Probe, RunOptions, SimConfig,
    SourceKind,
};
use csemwave::grid::{build_grid, AxisSpec, Component, Grid3D, GridSpec};
use csemwave::medium::{sigma_to_epsilon, Medium};
use csemwave::oracle::{analytic_whole_space_dipole, skin_depth};
use csemwave::scalar::mu_vacuum;
use csemwave::survey::{ReceiverDef, SourceDef};

fn cube_grid(n: usize, d: f64, npml: usize) -> Grid3D<f64> {
    let half = n as f64 * d / 2.0;
    build_grid(&GridSpec {
        axes: [
            AxisSpec::uniform(n, d),
            AxisSpec::uniform(n, d),
            AxisSpec::uniform(n, d),
        ],
        npml,
        origin: [-half; 3],
    })
    .unwrap()
}

fn x_dipole(moment: f64) -> Drive<f64> {
    Drive {
        position: [0.0; 3],
        orientation: [1.0, 0.0, 0.0],
        kind: SourceKind::Electric,
        moment,
        series: None,
    }
}

#[test]
fn zero_source_stays_zero() {
    let grid = cube_grid(12, 100.0, 0);
    let medium = Medium::homogeneous(&grid, 1.0).unwrap();
    let eps = sigma_to_epsilon(&medium, 2.0 * std::f64::consts::PI).unwrap();
    let mut cfg = SimConfig::new(vec![1.0], 2.0 * std::f64::consts::PI);
    cfg.fixed_steps = Some(50);
    let out = run_simulation(
        &grid,
        &eps,
        medium.mu,
        &cfg,
        &[x_dipole(0.0)],
        &[Probe {
            position: [300.0, 0.0, 0.0],
            component: Component::Ex,
        }],
        &RunOptions::default(),
    )
    .unwrap();
    assert!(out.probe_spectra[0].iter().all(|c| c.norm() == 0.0));
}

#[test]
fn forward_is_linear_in_moment() {
    let grid = cube_grid(16, 100.0, 8);
    let medium = Medium::homogeneous(&grid, 1.0).unwrap();
    let mut cfg = SimConfig::new(vec![1.0], 2.0 * std::f64::consts::PI);
    cfg.fixed_steps = Some(120);
    let receivers = [ReceiverDef {
        id: 1,
        position: [400.0, 100.0, 0.0],
        components: vec![Component::Ex, Component::Hy],
    }];
    let src = |m: f64| SourceDef {
        id: 1,
        position: [0.0; 3],
        orientation: [1.0, 0.0, 0.0],
        kind: SourceKind::Electric,
        moment: m,
    };
    let a = run_forward(&grid, &medium, &cfg, &src(1.0), &receivers, false).unwrap();
    let b = run_forward(&grid, &medium, &cfg, &src(2.0), &receivers, false).unwrap();
    for (sa, sb) in a.samples.iter().zip(&b.samples) {
        for (va, vb) in sa.values.iter().zip(&sb.values) {
            assert_eq!(va.re * 2.0, vb.re, "doubling the moment must double spectra");
            assert_eq!(va.im * 2.0, vb.im);
        }
    }
}

#[test]
fn on_the_fly_accumulation_equals_offline_transform() {
    let grid = cube_grid(14, 100.0, 8);
    let medium = Medium::homogeneous(&grid, 0.7).unwrap();
    let eps = sigma_to_epsilon(&medium, 2.0 * std::f64::consts::PI).unwrap();
    let omega0 = 2.0 * std::f64::consts::PI;
    let freqs = vec![0.25, 1.0];
    let mut cfg = SimConfig::new(freqs.clone(), omega0);
    cfg.fixed_steps = Some(200);
    let probes = [
        Probe {
            position: [300.0, -100.0, 100.0],
            component: Component::Ex,
        },
        Probe {
            position: [300.0, -100.0, 100.0],
            component: Component::Hz,
        },
    ];
    let out = run_simulation(
        &grid,
        &eps,
        medium.mu,
        &cfg,
        &[x_dipole(1.0)],
        &probes,
        &RunOptions {
            record_series: true,
            ..Default::default()
        },
    )
    .unwrap();
    let series = out.probe_series.as_ref().unwrap();
    for (p, probe) in probes.iter().enumerate() {
        for (f, &freq) in freqs.iter().enumerate() {
            let rate = kernel_rate(freq, omega0);
            let mut acc = num_complex::Complex::new(0.0f64, 0.0);
            for (n, &v) in series[p].iter().enumerate() {
                let t = if probe.component.is_electric() {
                    out.dt * n as f64
                } else {
                    out.dt * (n as f64 + 0.5)
                };
                acc += (kernel(rate, t) * out.dt).scale(v);
            }
            // identical summation order makes this exact
            assert_eq!(
                acc, out.probe_spectra[p][f],
                "probe {p} freq {f}: offline transform must match bit-for-bit"
            );
        }
    }
}

#[test]
fn energy_bounded_in_reflecting_box() {
    let grid = cube_grid(10, 100.0, 0);
    let medium = Medium::homogeneous(&grid, 1.0).unwrap();
    let eps = sigma_to_epsilon(&medium, 2.0 * std::f64::consts::PI).unwrap();
    let mut cfg = SimConfig::new(vec![1.0], 2.0 * std::f64::consts::PI);
    cfg.fixed_steps = Some(10_000);
    let out = run_simulation(
        &grid,
        &eps,
        medium.mu,
        &cfg,
        &[x_dipole(1.0)],
        &[Probe {
            position: [300.0, 200.0, 100.0],
            component: Component::Ex,
        }],
        &RunOptions {
            record_series: true,
            ..Default::default()
        },
    )
    .unwrap();
    let series = &out.probe_series.as_ref().unwrap()[0];
    assert!(series.iter().all(|v| v.is_finite()));
    let early: f64 = series[..2000].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let late: f64 = series[8000..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(early > 0.0);
    assert!(
        late < 3.0 * early,
        "standing waves must stay bounded: early {early:e}, late {late:e}"
    );
}

#[test]
fn wavefront_travels_at_fictitious_speed() {
    // first-arrival difference between two probes gives the front speed;
    // a short pulse keeps both probes in the radiative regime
    let grid = cube_grid(64, 25.0, 8);
    let sigma = 1.0;
    let omega0 = 2.0 * std::f64::consts::PI;
    let medium = Medium::homogeneous(&grid, sigma).unwrap();
    let eps = sigma_to_epsilon(&medium, omega0).unwrap();
    let c = 1.0 / (medium.mu * eps.eps_h.data[0]).sqrt();
    let mut cfg = SimConfig::new(vec![1.0], omega0);
    cfg.wavelet_peak = Some(10.0); // wavelength ~ c/10 = 316 m, ~13 cells
    let r1 = 250.0;
    let r2 = 650.0;
    let dt_est = 0.9 * 25.0 / (c * 3.0f64.sqrt());
    let t_need = (0.2 + r2 / c) / dt_est;
    cfg.fixed_steps = Some(t_need as usize);
    let probes = [
        Probe {
            position: [0.0, r1, 0.0],
            component: Component::Ex,
        },
        Probe {
            position: [0.0, r2, 0.0],
            component: Component::Ex,
        },
    ];
    let out = run_simulation(
        &grid,
        &eps,
        medium.mu,
        &cfg,
        &[x_dipole(1.0)],
        &probes,
        &RunOptions {
            record_series: true,
            ..Default::default()
        },
    )
    .unwrap();
    let series = out.probe_series.as_ref().unwrap();
    let arrival = |s: &[f64]| -> f64 {
        let max = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let thresh = 5e-3 * max;
        for n in 1..s.len() {
            if s[n].abs() >= thresh {
                // linear interpolation of the crossing
                let frac = (thresh - s[n - 1].abs()) / (s[n].abs() - s[n - 1].abs());
                return (n as f64 - 1.0 + frac) * out.dt;
            }
        }
        f64::NAN
    };
    let t1 = arrival(&series[0]);
    let t2 = arrival(&series[1]);
    let v = (r2 - r1) / (t2 - t1);
    let rel = (v - c).abs() / c;
    assert!(
        rel < 0.05,
        "front speed {v:.1} vs fictitious speed {c:.1} ({:.1}%)",
        rel * 100.0
    );
}

/// Coarse-grid comparison with the analytic diffusive dipole, axial and
/// broadside, amplitude and phase, plus the magnetic output path. The strict
/// version runs in the acceptance suite on a finer grid.
#[test]
fn whole_space_dipole_matches_analytic_coarsely() {
    let sigma = 1.0;
    let freq = 1.0;
    let mu = mu_vacuum::<f64>();
    let delta = skin_depth(sigma, mu, freq);
    let d = 80.0;
    assert!(delta / d > 6.0);

    let grid = build_grid(&GridSpec {
        axes: [
            AxisSpec::uniform(46, d),
            AxisSpec::uniform(40, d),
            AxisSpec::uniform(34, d),
        ],
        npml: 8,
        origin: [-46.0 * d / 2.0, -40.0 * d / 2.0, -34.0 * d / 2.0],
    })
    .unwrap();
    let medium = Medium::homogeneous(&grid, sigma).unwrap();
    let cfg = SimConfig::new(vec![freq], 2.0 * std::f64::consts::PI);

    let receivers: Vec<ReceiverDef<f64>> = vec![
        ReceiverDef {
            id: 1,
            position: [1400.0, 0.0, 0.0],
            components: vec![Component::Ex],
        },
        ReceiverDef {
            id: 2,
            position: [0.0, 600.0, 0.0],
            components: vec![Component::Ex, Component::Hz],
        },
        ReceiverDef {
            id: 3,
            position: [0.0, 1100.0, 0.0],
            components: vec![Component::Ex],
        },
    ];
    let source = SourceDef {
        id: 1,
        position: [0.0; 3],
        orientation: [1.0, 0.0, 0.0],
        kind: SourceKind::Electric,
        moment: 1.0,
    };
    let out = run_forward(&grid, &medium, &cfg, &source, &receivers, false).unwrap();
    assert!(out.converged, "run must reach steady state");

    for s in &out.samples {
        let rcv = receivers.iter().find(|r| r.id == s.receiver).unwrap();
        let (e_ana, h_ana) = analytic_whole_space_dipole(
            sigma,
            mu,
            freq,
            source.position,
            source.orientation,
            rcv.position,
        )
        .unwrap();
        let want = match s.component {
            Component::Ex => e_ana[0],
            Component::Hz => h_ana[2],
            _ => unreachable!(),
        };
        let got = s.values[0];
        let amp_rel = (got.norm() - want.norm()).abs() / want.norm();
        let phase_deg = (got / want).arg().abs() * 180.0 / std::f64::consts::PI;
        assert!(
            amp_rel < 0.05,
            "rcv {} {:?}: amplitude off by {:.2}% (got {:e}, want {:e})",
            s.receiver,
            s.component,
            amp_rel * 100.0,
            got.norm(),
            want.norm()
        );
        assert!(
            phase_deg < 5.0,
            "rcv {} {:?}: phase off by {phase_deg:.2} deg",
            s.receiver,
            s.component
        );
    }
}
