//! Convolutional PML (recursive-convolution form) for the fictitious wave
//! domain.
//!
//! Each padded face carries a polynomially graded decay profile matched to
//! the fastest fictitious wave speed. The memory-variable update is
//! `psi = b psi + a (spatial derivative)` with `b = exp(-s dt)` and
//! `a = b - 1`, where `s` is the local decay rate in 1/s.

use crate::grid::Grid3D;
use crate::scalar::Real;

/// Polynomial grading order.
pub const PML_ORDER: f64 = 3.0;
/// Target reflection coefficient of the graded profile.
pub const PML_TARGET_REFLECTION: f64 = 1e-5;

/// Per-axis recursive-convolution coefficients at node and cell-center
/// positions. Zero outside the pads, so memory variables stay zero there.
#[derive(Debug, Clone)]
pub struct PmlProfiles<T> {
    pub b_node: [Vec<T>; 3],
    pub a_node: [Vec<T>; 3],
    pub b_half: [Vec<T>; 3],
    pub a_half: [Vec<T>; 3],
}

/// Build CPML coefficient tables for a grid and time step. `c_ref` is the
/// fictitious wave speed used to scale the absorption.
pub fn build_pml<T: Real>(grid: &Grid3D<T>, c_ref: T, dt: T) -> PmlProfiles<T> {
    let mut out = PmlProfiles {
        b_node: [Vec::new(), Vec::new(), Vec::new()],
        a_node: [Vec::new(), Vec::new(), Vec::new()],
        b_half: [Vec::new(), Vec::new(), Vec::new()],
        a_half: [Vec::new(), Vec::new(), Vec::new()],
    };
    for axis in 0..3 {
        let np = grid.np(axis);
        let node_coords: Vec<T> = (0..=np).map(|i| grid.node(axis, i)).collect();
        let half_coords: Vec<T> = (0..np).map(|i| grid.center(axis, i)).collect();
        let (bn, an) = profile_along(grid, axis, &node_coords, c_ref, dt);
        let (bh, ah) = profile_along(grid, axis, &half_coords, c_ref, dt);
        out.b_node[axis] = bn;
        out.a_node[axis] = an;
        out.b_half[axis] = bh;
        out.a_half[axis] = ah;
    }
    out
}

fn profile_along<T: Real>(
    grid: &Grid3D<T>,
    axis: usize,
    coords: &[T],
    c_ref: T,
    dt: T,
) -> (Vec<T>, Vec<T>) {
    let np = grid.np(axis);
    let npml = grid.npml;
    let mut b = vec![T::zero(); coords.len()];
    let mut a = vec![T::zero(); coords.len()];
    if npml == 0 {
        return (b, a);
    }
    let lo_face = grid.node(axis, npml);
    let hi_face = grid.node(axis, np - npml);
    let lo_width = lo_face - grid.node(axis, 0);
    let hi_width = grid.node(axis, np) - hi_face;
    for (i, &x) in coords.iter().enumerate() {
        let (depth, width) = if x < lo_face {
            (lo_face - x, lo_width)
        } else if x > hi_face {
            (x - hi_face, hi_width)
        } else {
            continue;
        };
        let rho = (depth / width).min(T::one());
        // reflection-coefficient grading for the decay rate in 1/s
        let s_max = -T::of(PML_ORDER + 1.0) * T::of(PML_TARGET_REFLECTION.ln()) * c_ref
            / (T::of(2.0) * width);
        let s = s_max * rho.powi(PML_ORDER as i32);
        let bi = (-s * dt).exp();
        b[i] = bi;
        a[i] = bi - T::one();
    }
    (b, a)
}
