//! Leap-frog update kernels over the staggered lattice.
//!
//! All six field arrays share the node-count dimensions `(np1+1, np2+1,
//! np3+1)`; each component only uses its valid staggered sub-range. The outer
//! boundary acts as a perfect electric conductor (tangential E never
//! updated), with the PML pads absorbing everything before it matters.

use super::pml::PmlProfiles;
use crate::grid::Grid3D;
use crate::medium::FictitiousPermittivity;
use crate::scalar::Real;
use crate::vol::Vol;

/// Precomputed update coefficients for one (grid, medium, dt) combination.
pub struct Operator<T> {
    pub dt: T,
    /// dt / eps at Ex, Ey, Ez positions.
    pub ce: [Vol<T>; 3],
    /// dt / mu.
    pub ch: T,
    /// 1 / cell width per axis.
    pub inv_cell: [Vec<T>; 3],
    /// 1 / dual width (node-centered) per axis.
    pub inv_dual: [Vec<T>; 3],
    pub pml: PmlProfiles<T>,
    pub node_dims: (usize, usize, usize),
    pub cell_dims: (usize, usize, usize),
}

/// The cells adjacent to an E-component sample position together with the
/// half-width weights transverse to the component axis. Used both for
/// material averaging and for gradient assembly, so the two stay consistent.
pub fn transverse_neighbors<T: Real>(
    grid: &Grid3D<T>,
    axis: usize,
    idx: usize,
) -> [(usize, T); 2] {
    let np = grid.np(axis);
    let half = T::of(0.5);
    // node index idx along a non-offset axis borders cells idx-1 and idx
    let lo = if idx > 0 {
        (idx - 1, grid.cell_width(axis, idx - 1) * half)
    } else {
        (0, T::zero())
    };
    let hi = if idx < np {
        (idx, grid.cell_width(axis, idx) * half)
    } else {
        (np - 1, T::zero())
    };
    [lo, hi]
}

/// Volume-weighted permittivity at one E sample position.
fn eps_at_e_position<T: Real>(
    grid: &Grid3D<T>,
    eps: &Vol<T>,
    comp_axis: usize,
    i: usize,
    j: usize,
    k: usize,
) -> T {
    let (t1, t2) = match comp_axis {
        0 => (1, 2),
        1 => (2, 0),
        _ => (0, 1),
    };
    let pos = [i, j, k];
    let n1 = transverse_neighbors(grid, t1, pos[t1]);
    let n2 = transverse_neighbors(grid, t2, pos[t2]);
    let mut num = T::zero();
    let mut den = T::zero();
    for &(c1, w1) in &n1 {
        for &(c2, w2) in &n2 {
            let w = w1 * w2;
            if w == T::zero() {
                continue;
            }
            let mut cell = [0usize; 3];
            cell[comp_axis] = pos[comp_axis];
            cell[t1] = c1;
            cell[t2] = c2;
            num = num + eps.at(cell[0], cell[1], cell[2]) * w;
            den = den + w;
        }
    }
    num / den
}

impl<T: Real> Operator<T> {
    pub fn build(
        grid: &Grid3D<T>,
        eps: &FictitiousPermittivity<T>,
        mu: T,
        dt: T,
        pml: PmlProfiles<T>,
    ) -> Self {
        let (p1, p2, p3) = grid.np_all();
        let nd = (p1 + 1, p2 + 1, p3 + 1);
        let mut ce: [Vol<T>; 3] = [
            Vol::zeros(nd.0, nd.1, nd.2),
            Vol::zeros(nd.0, nd.1, nd.2),
            Vol::zeros(nd.0, nd.1, nd.2),
        ];
        for comp_axis in 0..3 {
            let eps_vol = eps.eps_for_axis(comp_axis);
            // valid sample range: cells along the component axis, nodes across
            let lim = |axis: usize| -> usize {
                if axis == comp_axis {
                    grid.np(axis)
                } else {
                    grid.np(axis) + 1
                }
            };
            for k in 0..lim(2) {
                for j in 0..lim(1) {
                    for i in 0..lim(0) {
                        let e = eps_at_e_position(grid, eps_vol, comp_axis, i, j, k);
                        *ce[comp_axis].at_mut(i, j, k) = dt / e;
                    }
                }
            }
        }
        let mut inv_cell: [Vec<T>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut inv_dual: [Vec<T>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for axis in 0..3 {
            inv_cell[axis] = (0..grid.np(axis))
                .map(|i| grid.cell_width(axis, i).recip())
                .collect();
            inv_dual[axis] = (0..=grid.np(axis))
                .map(|i| grid.dual_width(axis, i).recip())
                .collect();
        }
        Operator {
            dt,
            ce,
            ch: dt / mu,
            inv_cell,
            inv_dual,
            pml,
            node_dims: nd,
            cell_dims: (p1, p2, p3),
        }
    }
}

/// All mutable state of one simulation: six field arrays plus twelve PML
/// memory arrays (two transverse derivative directions per component).
pub struct FieldState<T> {
    pub e: [Vol<T>; 3],
    pub h: [Vol<T>; 3],
    pub psi_e: [[Vol<T>; 2]; 3],
    pub psi_h: [[Vol<T>; 2]; 3],
}

impl<T: Real> FieldState<T> {
    pub fn zeros(op: &Operator<T>) -> Self {
        let (n1, n2, n3) = op.node_dims;
        let z = || Vol::<T>::zeros(n1, n2, n3);
        FieldState {
            e: [z(), z(), z()],
            h: [z(), z(), z()],
            psi_e: [[z(), z()], [z(), z()], [z(), z()]],
            psi_h: [[z(), z()], [z(), z()], [z(), z()]],
        }
    }

    pub fn all_finite(&self) -> bool {
        self.e
            .iter()
            .chain(self.h.iter())
            .all(|v| v.data.iter().all(|x| x.is_finite()))
    }
}

/// Advance H by one step from curl E (no sources).
pub fn update_h<T: Real>(state: &mut FieldState<T>, op: &Operator<T>) {
    let (p1, p2, p3) = op.cell_dims;
    let (nd1, nd2, _) = op.node_dims;
    let s1 = 1usize;
    let s2 = nd1;
    let s3 = nd1 * nd2;
    let ch = op.ch;
    let [ex, ey, ez] = &state.e;
    let [hx, hy, hz] = &mut state.h;
    let psi = &mut state.psi_h;

    // Hx at (node, half, half): dEz/dy and dEy/dz
    {
        let (pxy, pxz) = {
            let [a, b] = &mut psi[0];
            (&mut a.data, &mut b.data)
        };
        let hd = &mut hx.data;
        for k in 0..p3 {
            let bh3 = op.pml.b_half[2][k];
            let ah3 = op.pml.a_half[2][k];
            let ic3 = op.inv_cell[2][k];
            for j in 0..p2 {
                let bh2 = op.pml.b_half[1][j];
                let ah2 = op.pml.a_half[1][j];
                let ic2 = op.inv_cell[1][j];
                let row = s2 * j + s3 * k;
                for i in 0..=p1 {
                    let idx = row + i;
                    let dez_dy = (ez.data[idx + s2] - ez.data[idx]) * ic2;
                    let dey_dz = (ey.data[idx + s3] - ey.data[idx]) * ic3;
                    let py = bh2 * pxy[idx] + ah2 * dez_dy;
                    pxy[idx] = py;
                    let pz = bh3 * pxz[idx] + ah3 * dey_dz;
                    pxz[idx] = pz;
                    hd[idx] = hd[idx] + ch * ((dey_dz + pz) - (dez_dy + py));
                }
            }
        }
    }
    // Hy at (half, node, half): dEx/dz and dEz/dx
    {
        let (pyz, pyx) = {
            let [a, b] = &mut psi[1];
            (&mut a.data, &mut b.data)
        };
        let hd = &mut hy.data;
        for k in 0..p3 {
            let bh3 = op.pml.b_half[2][k];
            let ah3 = op.pml.a_half[2][k];
            let ic3 = op.inv_cell[2][k];
            for j in 0..=p2 {
                let row = s2 * j + s3 * k;
                for i in 0..p1 {
                    let idx = row + i;
                    let bh1 = op.pml.b_half[0][i];
                    let ah1 = op.pml.a_half[0][i];
                    let ic1 = op.inv_cell[0][i];
                    let dex_dz = (ex.data[idx + s3] - ex.data[idx]) * ic3;
                    let dez_dx = (ez.data[idx + s1] - ez.data[idx]) * ic1;
                    let pz = bh3 * pyz[idx] + ah3 * dex_dz;
                    pyz[idx] = pz;
                    let px = bh1 * pyx[idx] + ah1 * dez_dx;
                    pyx[idx] = px;
                    hd[idx] = hd[idx] + ch * ((dez_dx + px) - (dex_dz + pz));
                }
            }
        }
    }
    // Hz at (half, half, node): dEy/dx and dEx/dy
    {
        let (pzx, pzy) = {
            let [a, b] = &mut psi[2];
            (&mut a.data, &mut b.data)
        };
        let hd = &mut hz.data;
        for k in 0..=p3 {
            let row_k = s3 * k;
            for j in 0..p2 {
                let bh2 = op.pml.b_half[1][j];
                let ah2 = op.pml.a_half[1][j];
                let ic2 = op.inv_cell[1][j];
                let row = s2 * j + row_k;
                for i in 0..p1 {
                    let idx = row + i;
                    let bh1 = op.pml.b_half[0][i];
                    let ah1 = op.pml.a_half[0][i];
                    let ic1 = op.inv_cell[0][i];
                    let dey_dx = (ey.data[idx + s1] - ey.data[idx]) * ic1;
                    let dex_dy = (ex.data[idx + s2] - ex.data[idx]) * ic2;
                    let px = bh1 * pzx[idx] + ah1 * dey_dx;
                    pzx[idx] = px;
                    let py = bh2 * pzy[idx] + ah2 * dex_dy;
                    pzy[idx] = py;
                    hd[idx] = hd[idx] + ch * ((dex_dy + py) - (dey_dx + px));
                }
            }
        }
    }
}

/// Advance E by one step from curl H (no sources).
pub fn update_e<T: Real>(state: &mut FieldState<T>, op: &Operator<T>) {
    let (p1, p2, p3) = op.cell_dims;
    let (nd1, nd2, _) = op.node_dims;
    let s1 = 1usize;
    let s2 = nd1;
    let s3 = nd1 * nd2;
    let [hx, hy, hz] = &state.h;
    let [ex, ey, ez] = &mut state.e;
    let psi = &mut state.psi_e;

    // Ex at (half, node, node): dHz/dy and dHy/dz
    {
        let (pxy, pxz) = {
            let [a, b] = &mut psi[0];
            (&mut a.data, &mut b.data)
        };
        let ed = &mut ex.data;
        let ce = &op.ce[0].data;
        for k in 1..p3 {
            let bn3 = op.pml.b_node[2][k];
            let an3 = op.pml.a_node[2][k];
            let id3 = op.inv_dual[2][k];
            for j in 1..p2 {
                let bn2 = op.pml.b_node[1][j];
                let an2 = op.pml.a_node[1][j];
                let id2 = op.inv_dual[1][j];
                let row = s2 * j + s3 * k;
                for i in 0..p1 {
                    let idx = row + i;
                    let dhz_dy = (hz.data[idx] - hz.data[idx - s2]) * id2;
                    let dhy_dz = (hy.data[idx] - hy.data[idx - s3]) * id3;
                    let py = bn2 * pxy[idx] + an2 * dhz_dy;
                    pxy[idx] = py;
                    let pz = bn3 * pxz[idx] + an3 * dhy_dz;
                    pxz[idx] = pz;
                    ed[idx] = ed[idx] + ce[idx] * ((dhz_dy + py) - (dhy_dz + pz));
                }
            }
        }
    }
    // Ey at (node, half, node): dHx/dz and dHz/dx
    {
        let (pyz, pyx) = {
            let [a, b] = &mut psi[1];
            (&mut a.data, &mut b.data)
        };
        let ed = &mut ey.data;
        let ce = &op.ce[1].data;
        for k in 1..p3 {
            let bn3 = op.pml.b_node[2][k];
            let an3 = op.pml.a_node[2][k];
            let id3 = op.inv_dual[2][k];
            for j in 0..p2 {
                let row = s2 * j + s3 * k;
                for i in 1..p1 {
                    let idx = row + i;
                    let bn1 = op.pml.b_node[0][i];
                    let an1 = op.pml.a_node[0][i];
                    let id1 = op.inv_dual[0][i];
                    let dhx_dz = (hx.data[idx] - hx.data[idx - s3]) * id3;
                    let dhz_dx = (hz.data[idx] - hz.data[idx - s1]) * id1;
                    let pz = bn3 * pyz[idx] + an3 * dhx_dz;
                    pyz[idx] = pz;
                    let px = bn1 * pyx[idx] + an1 * dhz_dx;
                    pyx[idx] = px;
                    ed[idx] = ed[idx] + ce[idx] * ((dhx_dz + pz) - (dhz_dx + px));
                }
            }
        }
    }
    // Ez at (node, node, half): dHy/dx and dHx/dy
    {
        let (pzx, pzy) = {
            let [a, b] = &mut psi[2];
            (&mut a.data, &mut b.data)
        };
        let ed = &mut ez.data;
        let ce = &op.ce[2].data;
        for k in 0..p3 {
            let row_k = s3 * k;
            for j in 1..p2 {
                let bn2 = op.pml.b_node[1][j];
                let an2 = op.pml.a_node[1][j];
                let id2 = op.inv_dual[1][j];
                let row = s2 * j + row_k;
                for i in 1..p1 {
                    let idx = row + i;
                    let bn1 = op.pml.b_node[0][i];
                    let an1 = op.pml.a_node[0][i];
                    let id1 = op.inv_dual[0][i];
                    let dhy_dx = (hy.data[idx] - hy.data[idx - s1]) * id1;
                    let dhx_dy = (hx.data[idx] - hx.data[idx - s2]) * id2;
                    let px = bn1 * pzx[idx] + an1 * dhy_dx;
                    pzx[idx] = px;
                    let py = bn2 * pzy[idx] + an2 * dhx_dy;
                    pzy[idx] = py;
                    ed[idx] = ed[idx] + ce[idx] * ((dhy_dx + px) - (dhx_dy + py));
                }
            }
        }
    }
}
