//! Staggered (Yee) spatial discretization: per-axis spacings with optional
//! geometric stretching, PML padding, and interpolation between continuous
//! positions and the staggered sub-lattices.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Electric/magnetic field component on the Yee lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    Ex,
    Ey,
    Ez,
    Hx,
    Hy,
    Hz,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Component::Ex,
        Component::Ey,
        Component::Ez,
        Component::Hx,
        Component::Hy,
        Component::Hz,
    ];

    /// Half-cell offset pattern per axis. `true` means the component lives at
    /// cell centers along that axis, `false` at nodes.
    pub fn offsets(self) -> [bool; 3] {
        match self {
            Component::Ex => [true, false, false],
            Component::Ey => [false, true, false],
            Component::Ez => [false, false, true],
            Component::Hx => [false, true, true],
            Component::Hy => [true, false, true],
            Component::Hz => [true, true, false],
        }
    }

    pub fn is_electric(self) -> bool {
        matches!(self, Component::Ex | Component::Ey | Component::Ez)
    }

    /// Axis the component is aligned with (0, 1 or 2).
    pub fn axis(self) -> usize {
        match self {
            Component::Ex | Component::Hx => 0,
            Component::Ey | Component::Hy => 1,
            Component::Ez | Component::Hz => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Ex => "Ex",
            Component::Ey => "Ey",
            Component::Ez => "Ez",
            Component::Hx => "Hx",
            Component::Hy => "Hy",
            Component::Hz => "Hz",
        }
    }

    pub fn parse(s: &str) -> Option<Component> {
        match s {
            "Ex" => Some(Component::Ex),
            "Ey" => Some(Component::Ey),
            "Ez" => Some(Component::Ez),
            "Hx" => Some(Component::Hx),
            "Hy" => Some(Component::Hy),
            "Hz" => Some(Component::Hz),
            _ => None,
        }
    }
}

/// Geometric stretching of one axis: cells at index >= `start` grow by a
/// constant factor per cell.
#[derive(Debug, Clone, Copy)]
pub struct Stretch<T> {
    pub factor: T,
    pub start: usize,
}

/// One axis of the grid description.
#[derive(Debug, Clone, Copy)]
pub struct AxisSpec<T> {
    /// Interior cell count.
    pub n: usize,
    /// Base spacing in meters.
    pub d: T,
    pub stretch: Option<Stretch<T>>,
}

impl<T: Real> AxisSpec<T> {
    pub fn uniform(n: usize, d: T) -> Self {
        Self {
            n,
            d,
            stretch: None,
        }
    }
}

/// Full grid description consumed by [`build_grid`].
#[derive(Debug, Clone)]
pub struct GridSpec<T> {
    pub axes: [AxisSpec<T>; 3],
    /// PML thickness in cells per face; 0 disables absorption.
    pub npml: usize,
    /// Physical coordinate of the first interior node.
    pub origin: [T; 3],
}

/// Staggered 3D lattice with PML padding.
///
/// Interior cells occupy indices `npml..npml+n` per axis; the pads replicate
/// the edge spacing. Node coordinates, cell-center coordinates and dual
/// spacings are precomputed for the padded axes.
#[derive(Debug, Clone)]
pub struct Grid3D<T> {
    /// Interior cell counts.
    pub n: [usize; 3],
    pub npml: usize,
    pub origin: [T; 3],
    /// Padded per-cell spacings, length `np(axis)`.
    d: [Vec<T>; 3],
    /// Padded node coordinates, length `np(axis)+1`.
    nodes: [Vec<T>; 3],
    /// Padded cell-center coordinates, length `np(axis)`.
    centers: [Vec<T>; 3],
    /// Dual spacings at nodes (half-sum of adjacent cells), length `np(axis)+1`.
    dual: [Vec<T>; 3],
}

const STRETCH_MIN: f64 = 1.0;
const STRETCH_MAX: f64 = 1.2;
const MIN_PML: usize = 8;

/// Build the padded lattice from a grid description.
pub fn build_grid<T: Real>(spec: &GridSpec<T>) -> Result<Grid3D<T>> {
    if spec.npml != 0 && spec.npml < MIN_PML {
        return Err(Error::Grid(format!(
            "npml must be 0 (disabled) or >= {MIN_PML}, got {}",
            spec.npml
        )));
    }
    let mut d: [Vec<T>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (axis, ax) in spec.axes.iter().enumerate() {
        if ax.n == 0 {
            return Err(Error::Grid(format!("axis {axis}: zero cells")));
        }
        if !(ax.d > T::zero()) || !ax.d.is_finite() {
            return Err(Error::Grid(format!("axis {axis}: non-positive spacing")));
        }
        if let Some(st) = ax.stretch {
            let f = st.factor.f64();
            if !(STRETCH_MIN..=STRETCH_MAX).contains(&f) {
                return Err(Error::Grid(format!(
                    "axis {axis}: stretch factor {f} outside [{STRETCH_MIN}, {STRETCH_MAX}]"
                )));
            }
            if st.start >= ax.n {
                return Err(Error::Grid(format!(
                    "axis {axis}: stretch start {} beyond cell count {}",
                    st.start, ax.n
                )));
            }
        }
        let mut interior = Vec::with_capacity(ax.n);
        for i in 0..ax.n {
            let w = match ax.stretch {
                Some(st) if i > st.start => {
                    ax.d * st.factor.powi((i - st.start) as i32)
                }
                _ => ax.d,
            };
            interior.push(w);
        }
        // Pads replicate the edge interior cell width.
        let mut padded = Vec::with_capacity(ax.n + 2 * spec.npml);
        padded.extend(std::iter::repeat(interior[0]).take(spec.npml));
        padded.extend_from_slice(&interior);
        padded.extend(std::iter::repeat(interior[ax.n - 1]).take(spec.npml));
        d[axis] = padded;
    }

    let mut nodes: [Vec<T>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut centers: [Vec<T>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut dual: [Vec<T>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let half = T::of(0.5);
    for axis in 0..3 {
        let np = d[axis].len();
        // First padded node sits npml pad cells before the origin.
        let mut x0 = spec.origin[axis];
        for i in 0..spec.npml {
            x0 = x0 - d[axis][i];
        }
        let mut ns = Vec::with_capacity(np + 1);
        ns.push(x0);
        for i in 0..np {
            let next = ns[i] + d[axis][i];
            ns.push(next);
        }
        let cs: Vec<T> = (0..np).map(|i| ns[i] + d[axis][i] * half).collect();
        let mut du = Vec::with_capacity(np + 1);
        du.push(d[axis][0] * half);
        for i in 1..np {
            du.push((d[axis][i - 1] + d[axis][i]) * half);
        }
        du.push(d[axis][np - 1] * half);
        nodes[axis] = ns;
        centers[axis] = cs;
        dual[axis] = du;
    }

    Ok(Grid3D {
        n: [spec.axes[0].n, spec.axes[1].n, spec.axes[2].n],
        npml: spec.npml,
        origin: spec.origin,
        d,
        nodes,
        centers,
        dual,
    })
}

impl<T: Real> Grid3D<T> {
    /// Padded cell count along an axis.
    #[inline]
    pub fn np(&self, axis: usize) -> usize {
        self.d[axis].len()
    }

    /// Padded cell counts for all axes.
    pub fn np_all(&self) -> (usize, usize, usize) {
        (self.np(0), self.np(1), self.np(2))
    }

    /// Cell width.
    #[inline]
    pub fn cell_width(&self, axis: usize, i: usize) -> T {
        self.d[axis][i]
    }

    pub fn widths(&self, axis: usize) -> &[T] {
        &self.d[axis]
    }

    /// Dual width centered on a node (clamped to half cells at the outer faces).
    #[inline]
    pub fn dual_width(&self, axis: usize, i: usize) -> T {
        self.dual[axis][i]
    }

    /// Node coordinate.
    #[inline]
    pub fn node(&self, axis: usize, i: usize) -> T {
        self.nodes[axis][i]
    }

    /// Cell-center coordinate.
    #[inline]
    pub fn center(&self, axis: usize, i: usize) -> T {
        self.centers[axis][i]
    }

    /// Minimum cell width over the padded grid.
    pub fn min_width(&self) -> T {
        let mut m = self.d[0][0];
        for axis in 0..3 {
            for &w in &self.d[axis] {
                if w < m {
                    m = w;
                }
            }
        }
        m
    }

    /// Volume of a padded cell.
    #[inline]
    pub fn cell_volume(&self, i1: usize, i2: usize, i3: usize) -> T {
        self.d[0][i1] * self.d[1][i2] * self.d[2][i3]
    }

    /// Physical bounds of the interior (non-PML) region.
    pub fn interior_min(&self) -> [T; 3] {
        [self.origin[0], self.origin[1], self.origin[2]]
    }

    pub fn interior_max(&self) -> [T; 3] {
        let mut out = [T::zero(); 3];
        for axis in 0..3 {
            out[axis] = self.nodes[axis][self.npml + self.n[axis]];
        }
        out
    }

    pub fn contains_interior(&self, pos: [T; 3]) -> bool {
        let lo = self.interior_min();
        let hi = self.interior_max();
        (0..3).all(|a| pos[a] >= lo[a] && pos[a] <= hi[a])
    }

    /// Interior cell index range along an axis (padded indexing).
    pub fn interior_cells(&self, axis: usize) -> std::ops::Range<usize> {
        self.npml..self.npml + self.n[axis]
    }

    /// Coordinates of the sub-lattice a component lives on along one axis.
    fn lattice_coords(&self, axis: usize, half_offset: bool) -> &[T] {
        if half_offset {
            &self.centers[axis]
        } else {
            &self.nodes[axis]
        }
    }

    /// Spatial extent owned by a field sample along one axis (used to convert
    /// point moments into grid current densities).
    #[inline]
    pub fn sample_extent(&self, axis: usize, half_offset: bool, i: usize) -> T {
        if half_offset {
            self.d[axis][i]
        } else {
            self.dual[axis][i]
        }
    }
}

/// Trilinear interpolation footprint on one component's sub-lattice:
/// 8 node index triples and matching weights (weights sum to 1).
#[derive(Debug, Clone)]
pub struct StaggerWeights<T> {
    pub component: Component,
    pub nodes: [[usize; 3]; 8],
    pub weights: [T; 8],
}

/// Locate `pos` on the sub-lattice of `component` and return the trilinear
/// interpolation footprint. Positions outside the interior region are
/// rejected.
pub fn stagger_weights<T: Real>(
    grid: &Grid3D<T>,
    pos: [T; 3],
    component: Component,
) -> Result<StaggerWeights<T>> {
    if !grid.contains_interior(pos) {
        return Err(Error::Grid(format!(
            "position ({}, {}, {}) outside interior region",
            pos[0], pos[1], pos[2]
        )));
    }
    let offsets = component.offsets();
    let mut idx = [0usize; 3];
    let mut frac = [T::zero(); 3];
    for axis in 0..3 {
        let coords = grid.lattice_coords(axis, offsets[axis]);
        let p = pos[axis];
        if p < coords[0] || p > coords[coords.len() - 1] {
            return Err(Error::Grid(format!(
                "position not covered by {} sub-lattice on axis {axis}",
                component.name()
            )));
        }
        // Largest m with coords[m] <= p, clamped so m+1 is valid.
        let mut m = coords.partition_point(|&c| c <= p);
        m = m.saturating_sub(1).min(coords.len() - 2);
        idx[axis] = m;
        frac[axis] = (p - coords[m]) / (coords[m + 1] - coords[m]);
    }
    let mut nodes = [[0usize; 3]; 8];
    let mut weights = [T::zero(); 8];
    for c in 0..8 {
        let mut w = T::one();
        let mut node = [0usize; 3];
        for axis in 0..3 {
            let upper = (c >> axis) & 1 == 1;
            node[axis] = idx[axis] + upper as usize;
            w = w * if upper {
                frac[axis]
            } else {
                T::one() - frac[axis]
            };
        }
        nodes[c] = node;
        weights[c] = w;
    }
    Ok(StaggerWeights {
        component,
        nodes,
        weights,
    })
}
