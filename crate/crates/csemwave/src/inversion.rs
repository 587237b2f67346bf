//! Outer nonlinear optimization: l-BFGS directions with bound projection,
//! backtracking line search, steepest-descent restart and termination.

use crate::error::Result;
use crate::gradient::{tikhonov_value_and_gradient, DepthWeighting, Problem};
use crate::medium::ModelParam;
use crate::scalar::Real;
use std::collections::VecDeque;

/// Stored (model step, gradient change) pairs for the two-loop recursion.
/// Pairs with non-positive curvature are rejected on entry.
#[derive(Debug, Clone)]
pub struct LbfgsMemory<T> {
    pairs: VecDeque<(Vec<T>, Vec<T>, T)>,
    capacity: usize,
}

impl<T: Real> LbfgsMemory<T> {
    pub fn new(capacity: usize) -> Self {
        LbfgsMemory {
            pairs: VecDeque::new(),
            capacity: capacity.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Store a pair if its curvature is positive; returns whether it was kept.
    pub fn push(&mut self, s: Vec<T>, y: Vec<T>) -> bool {
        let sy = dot(&s, &y);
        if !(sy > T::zero()) {
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, sy));
        true
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Two-loop recursion. `h0_diag` is an optional positive diagonal initial
/// Hessian (depth preconditioning enters here); the usual
/// `<s,y>/<y,y>` scaling multiplies it. Falls back to the (scaled) negative
/// gradient whenever the result is not a descent direction.
pub fn lbfgs_direction<T: Real>(
    grad: &[T],
    mem: &LbfgsMemory<T>,
    h0_diag: Option<&[T]>,
) -> Vec<T> {
    let apply_h0 = |v: &mut [T], scale: T| {
        match h0_diag {
            Some(d) => {
                for (x, &di) in v.iter_mut().zip(d) {
                    *x *= di * scale;
                }
            }
            None => {
                for x in v.iter_mut() {
                    *x *= scale;
                }
            }
        }
    };

    let steepest = |scale: T| -> Vec<T> {
        let mut d: Vec<T> = grad.iter().map(|&g| -g).collect();
        apply_h0(&mut d, scale);
        d
    };

    if mem.is_empty() {
        return steepest(T::one());
    }
    let mut q: Vec<T> = grad.to_vec();
    let mut alphas = Vec::with_capacity(mem.pairs.len());
    for (s, y, sy) in mem.pairs.iter().rev() {
        let rho = sy.recip();
        let a = rho * dot(s, &q);
        for (qi, &yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push((a, rho));
    }
    let (_, y_last, sy_last) = mem.pairs.back().unwrap();
    let gamma = *sy_last / dot(y_last, y_last);
    apply_h0(&mut q, gamma);
    for ((s, y, _), &(a, rho)) in mem.pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, &si) in q.iter_mut().zip(s) {
            *qi += si * (a - b);
        }
    }
    for x in q.iter_mut() {
        *x = -*x;
    }
    if dot(&q, grad) < T::zero() {
        q
    } else {
        steepest(T::one())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LineSearchParams<T> {
    /// Armijo sufficient-decrease constant.
    pub c1: T,
    /// Backtracking factor.
    pub shrink: T,
    pub max_trials: usize,
}

impl<T: Real> Default for LineSearchParams<T> {
    fn default() -> Self {
        LineSearchParams {
            c1: T::of(1e-4),
            shrink: T::of(0.5),
            max_trials: 8,
        }
    }
}

/// Result of one accepted line-search step.
pub struct AcceptedStep<T, Aux> {
    pub alpha: T,
    pub model: ModelParam<T>,
    pub phi: T,
    pub aux: Aux,
    pub trials: usize,
}

/// Backtracking line search with bound projection: trial models are clamped
/// into `[m_min, m_max]` before evaluation and the Armijo test uses the
/// projected step. Returns `None` after `max_trials` failures or when `dir`
/// is not a descent direction.
pub fn line_search<T: Real, Aux>(
    mut eval: impl FnMut(&ModelParam<T>) -> Result<(T, Aux)>,
    model: &ModelParam<T>,
    phi0: T,
    grad: &[T],
    dir: &[T],
    alpha0: T,
    params: &LineSearchParams<T>,
) -> Result<Option<AcceptedStep<T, Aux>>> {
    if !(dot(grad, dir) < T::zero()) {
        return Ok(None);
    }
    let base = model.pack();
    let mut alpha = alpha0;
    for trial in 0..params.max_trials {
        let mut candidate = model.clone();
        let flat: Vec<T> = base
            .iter()
            .zip(dir)
            .map(|(&m, &d)| m + alpha * d)
            .collect();
        candidate.unpack(&flat);
        candidate.project();
        // directional derivative along the actually taken (projected) step
        let packed = candidate.pack();
        let gdot: T = packed
            .iter()
            .zip(&base)
            .zip(grad)
            .map(|((&a, &b), &g)| (a - b) * g)
            .sum();
        if gdot < T::zero() {
            let (phi, aux) = eval(&candidate)?;
            if phi <= phi0 + params.c1 * gdot {
                return Ok(Some(AcceptedStep {
                    alpha,
                    model: candidate,
                    phi,
                    aux,
                    trials: trial + 1,
                }));
            }
        }
        alpha *= params.shrink;
    }
    Ok(None)
}

#[derive(Debug, Clone)]
pub struct InvConfig<T> {
    pub max_iter: usize,
    pub memory: usize,
    /// Initial regularization weight and its per-iteration cooling factor.
    pub beta0: T,
    pub cooling: T,
    /// Roughness operator coefficients per axis.
    pub reg_alpha: [T; 3],
    pub line_search: LineSearchParams<T>,
    /// Per-iteration cap on the largest log-resistivity update.
    pub max_update: T,
    pub depth_weighting: Option<DepthWeighting<T>>,
}

impl<T: Real> Default for InvConfig<T> {
    fn default() -> Self {
        InvConfig {
            max_iter: 30,
            memory: 5,
            beta0: T::of(0.01),
            cooling: T::of(0.85),
            reg_alpha: [T::one(), T::one(), T::of(0.1)],
            line_search: LineSearchParams::default(),
            max_update: T::of(0.5),
            depth_weighting: None,
        }
    }
}

/// One accepted (or terminal) iteration of the outer loop.
#[derive(Debug, Clone)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub phi_d: T,
    pub phi_m: T,
    pub normalized: T,
    pub beta: T,
    pub alpha: T,
    pub restart: bool,
    /// Informational only; excluded from deterministic logs.
    pub wall_secs: f64,
}

/// Iterative minimization of `phi_d + beta phi_m` with l-BFGS directions.
///
/// On the first line-search failure the memory is cleared and the iteration
/// retries along the (preconditioned) steepest descent; a second failure
/// terminates. Accepted total misfits decrease monotonically by construction.
pub fn invert<T: Real>(
    problem: &Problem<'_, T>,
    initial: ModelParam<T>,
    cfg: &InvConfig<T>,
) -> Result<(ModelParam<T>, Vec<IterationRecord<T>>)> {
    let mut model = initial;
    model.project();
    let mut records: Vec<IterationRecord<T>> = Vec::new();
    if cfg.max_iter == 0 {
        return Ok((model, records));
    }

    let h0: Option<Vec<T>> = cfg.depth_weighting.as_ref().map(|w| {
        let weights = w.weights(problem.grid);
        let mut d = Vec::with_capacity(weights.len() * model.n_classes());
        for _ in 0..model.n_classes() {
            d.extend_from_slice(&weights.data);
        }
        d
    });

    let mut mem = LbfgsMemory::new(cfg.memory);
    let mut beta = cfg.beta0;
    let mut prev: Option<(Vec<T>, Vec<T>)> = None;

    for iteration in 0..cfg.max_iter {
        let t0 = std::time::Instant::now();
        let (report, grad_d) = problem.misfit_and_gradient(&model)?;
        let (phi_m, grad_m) = tikhonov_value_and_gradient(&model, cfg.reg_alpha);
        let phi_total = report.phi_d + beta * phi_m;

        // total gradient, flattened class-major, frozen cells zeroed
        let mut grad_flat: Vec<T> = Vec::with_capacity(model.dof());
        for (gd, gm) in grad_d.iter().zip(&grad_m) {
            for ((&a, &b), &frozen) in gd.data.iter().zip(&gm.data).zip(&model.frozen.data) {
                grad_flat.push(if frozen { T::zero() } else { a + beta * b });
            }
        }

        let model_flat = model.pack();
        if let Some((pm, pg)) = prev.take() {
            let s: Vec<T> = model_flat.iter().zip(&pm).map(|(&a, &b)| a - b).collect();
            let y: Vec<T> = grad_flat.iter().zip(&pg).map(|(&a, &b)| a - b).collect();
            mem.push(s, y);
        }

        let gmax = grad_flat.iter().fold(T::zero(), |m, &g| m.max(g.abs()));
        if gmax == T::zero() {
            records.push(IterationRecord {
                iteration,
                phi_d: report.phi_d,
                phi_m,
                normalized: report.normalized,
                beta,
                alpha: T::zero(),
                restart: false,
                wall_secs: t0.elapsed().as_secs_f64(),
            });
            break;
        }

        let eval = |m: &ModelParam<T>| -> Result<(T, (T, T))> {
            let rep = problem.misfit(m)?;
            let (pm, _) = tikhonov_value_and_gradient(m, cfg.reg_alpha);
            Ok((rep.phi_d + beta * pm, (rep.phi_d, rep.normalized)))
        };

        // trial step: quadratic estimate aiming at zero total misfit, capped
        // so no parameter moves more than max_update log units at once
        let start_alpha = |dir: &[T]| -> T {
            let slope = dot(&grad_flat, dir);
            let dmax = dir.iter().fold(T::zero(), |m, &d| m.max(d.abs()));
            let cap = cfg.max_update / dmax;
            if slope < T::zero() {
                (-(T::of(2.0)) * phi_total / slope).min(cap)
            } else {
                cap
            }
        };
        let mut restart = false;
        let mut dir = lbfgs_direction(&grad_flat, &mem, h0.as_deref());
        let mut alpha0 = start_alpha(&dir);
        let mut accepted = line_search(
            eval,
            &model,
            phi_total,
            &grad_flat,
            &dir,
            alpha0,
            &cfg.line_search,
        )?;
        if accepted.is_none() {
            // restart from steepest descent once
            restart = true;
            mem.clear();
            dir = lbfgs_direction(&grad_flat, &mem, h0.as_deref());
            alpha0 = start_alpha(&dir);
            let eval2 = |m: &ModelParam<T>| -> Result<(T, (T, T))> {
                let rep = problem.misfit(m)?;
                let (pm, _) = tikhonov_value_and_gradient(m, cfg.reg_alpha);
                Ok((rep.phi_d + beta * pm, (rep.phi_d, rep.normalized)))
            };
            accepted = line_search(
                eval2,
                &model,
                phi_total,
                &grad_flat,
                &dir,
                alpha0,
                &cfg.line_search,
            )?;
        }

        match accepted {
            Some(step) => {
                let (phi_d_new, normalized_new) = step.aux;
                model = step.model;
                prev = Some((model_flat, grad_flat));
                let (phi_m_new, _) = tikhonov_value_and_gradient(&model, cfg.reg_alpha);
                records.push(IterationRecord {
                    iteration,
                    phi_d: phi_d_new,
                    phi_m: phi_m_new,
                    normalized: normalized_new,
                    beta,
                    alpha: step.alpha,
                    restart,
                    wall_secs: t0.elapsed().as_secs_f64(),
                });
                beta *= cfg.cooling;
            }
            None => {
                // steepest descent failed too: record the terminal state
                records.push(IterationRecord {
                    iteration,
                    phi_d: report.phi_d,
                    phi_m,
                    normalized: report.normalized,
                    beta,
                    alpha: T::zero(),
                    restart: true,
                    wall_secs: t0.elapsed().as_secs_f64(),
                });
                break;
            }
        }
    }
    Ok((model, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_memory_gives_negative_gradient() {
        let mem = LbfgsMemory::<f64>::new(5);
        let g = vec![1.0, -2.0, 3.0];
        let d = lbfgs_direction(&g, &mem, None);
        assert_eq!(d, vec![-1.0, 2.0, -3.0]);
    }

    #[test]
    fn rejected_pair_leaves_direction_unchanged() {
        let mut mem = LbfgsMemory::<f64>::new(5);
        assert!(mem.push(vec![1.0, 0.0], vec![0.5, 0.0]));
        let g = vec![0.3, -0.4];
        let before = lbfgs_direction(&g, &mem, None);
        // negative curvature pair must be rejected
        assert!(!mem.push(vec![1.0, 0.0], vec![-1.0, 0.0]));
        let after = lbfgs_direction(&g, &mem, None);
        assert_eq!(before, after);
    }

    #[test]
    fn two_loop_solves_quadratic_bowl_quickly() {
        // f(x) = 1/2 x^T A x with A = diag(1, 10)
        let a = [1.0, 10.0];
        let f = |x: &[f64]| 0.5 * (a[0] * x[0] * x[0] + a[1] * x[1] * x[1]);
        let grad = |x: &[f64]| vec![a[0] * x[0], a[1] * x[1]];
        let mut x = vec![5.0, 1.0];
        let mut mem = LbfgsMemory::new(5);
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        for _ in 0..5 {
            let g = grad(&x);
            if let Some((px, pg)) = prev.take() {
                let s: Vec<f64> = x.iter().zip(&px).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = g.iter().zip(&pg).map(|(a, b)| a - b).collect();
                mem.push(s, y);
            }
            let d = lbfgs_direction(&g, &mem, None);
            // exact minimizing step along d for the quadratic
            let gd: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            let dad: f64 = d.iter().enumerate().map(|(i, v)| a[i] * v * v).sum();
            let alpha = -gd / dad;
            prev = Some((x.clone(), g));
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += alpha * di;
            }
            if f(&x) < 1e-20 {
                break;
            }
        }
        assert!(f(&x) < 1e-16, "bowl not minimized: {x:?}");
    }

    #[test]
    fn line_search_contracts() {
        use crate::vol::Vol;
        // quadratic along the direction, minimum inside the first step
        let m = ModelParam::isotropic(Vol::filled(2, 1, 1, 0.0f64), -10.0, 10.0);
        let eval = |p: &ModelParam<f64>| -> Result<(f64, ())> {
            let x = p.m[0].data[0];
            let y = p.m[0].data[1];
            Ok(((x - 1.0) * (x - 1.0) + y * y, ()))
        };
        let grad = vec![-2.0, 0.0]; // at (0,0)
        let dir = vec![2.0, 0.0];
        let out = line_search(eval, &m, 1.0, &grad, &dir, 1.0, &LineSearchParams::default())
            .unwrap()
            .expect("must accept");
        assert!(out.phi < 1.0);

        // ascent direction fails immediately
        let eval2 = |_: &ModelParam<f64>| -> Result<(f64, ())> { panic!("must not evaluate") };
        let out2 = line_search(
            eval2,
            &m,
            1.0,
            &grad,
            &[-1.0, 0.0],
            1.0,
            &LineSearchParams::default(),
        )
        .unwrap();
        assert!(out2.is_none());
    }

    #[test]
    fn trial_outside_bounds_is_projected() {
        use crate::vol::Vol;
        let m = ModelParam::isotropic(Vol::filled(1, 1, 1, 0.0f64), -1.0, 1.0);
        let mut seen = Vec::new();
        let eval = |p: &ModelParam<f64>| -> Result<(f64, ())> {
            let x = p.m[0].data[0];
            Ok((x * x - 2.0 * x, ())) // decreasing toward x = 1
        };
        let grad = vec![-2.0];
        let dir = vec![10.0]; // huge step, must be clamped to the bound
        let out = line_search(
            |p| {
                seen.push(p.m[0].data[0]);
                eval(p)
            },
            &m,
            0.0,
            &grad,
            &dir,
            1.0,
            &LineSearchParams::default(),
        )
        .unwrap()
        .expect("accepts projected step");
        assert!(out.model.m[0].data[0] <= 1.0);
        assert!(seen.iter().all(|&x| x <= 1.0));
    }
}
