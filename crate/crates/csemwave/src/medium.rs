//! Electrical material properties on the padded grid, the fictitious
//! permittivity mapping, and the log-resistivity inversion parametrization.

use crate::error::{Error, Result};
use crate::grid::Grid3D;
use crate::scalar::{mu_vacuum, Real};
use crate::vol::Vol;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anisotropy {
    Isotropic,
    Vti,
}

/// Conductivity model on padded cells. `sigma_h` covers the xx and yy tensor
/// entries, `sigma_v` the zz entry; in isotropic mode the two are identical.
#[derive(Debug, Clone)]
pub struct Medium<T> {
    pub sigma_h: Vol<T>,
    pub sigma_v: Vol<T>,
    pub mu: T,
    pub anisotropy: Anisotropy,
}

impl<T: Real> Medium<T> {
    pub fn isotropic(sigma: Vol<T>) -> Result<Self> {
        let m = Self {
            sigma_v: sigma.clone(),
            sigma_h: sigma,
            mu: mu_vacuum(),
            anisotropy: Anisotropy::Isotropic,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn vti(sigma_h: Vol<T>, sigma_v: Vol<T>) -> Result<Self> {
        if sigma_h.dims() != sigma_v.dims() {
            return Err(Error::Medium("sigma_h/sigma_v shape mismatch".into()));
        }
        let m = Self {
            sigma_h,
            sigma_v,
            mu: mu_vacuum(),
            anisotropy: Anisotropy::Vti,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn homogeneous(grid: &Grid3D<T>, sigma: T) -> Result<Self> {
        let (n1, n2, n3) = grid.np_all();
        Self::isotropic(Vol::filled(n1, n2, n3, sigma))
    }

    fn validate(&self) -> Result<()> {
        for arr in [&self.sigma_h, &self.sigma_v] {
            if arr.data.iter().any(|s| !(*s > T::zero()) || !s.is_finite()) {
                return Err(Error::Medium(
                    "conductivities must be strictly positive and finite".into(),
                ));
            }
        }
        if self.anisotropy == Anisotropy::Isotropic && self.sigma_h != self.sigma_v {
            return Err(Error::Medium(
                "isotropic medium requires sigma_h == sigma_v".into(),
            ));
        }
        Ok(())
    }

    /// Conductivity tensor entry governing a given E component direction.
    pub fn sigma_for_axis(&self, axis: usize) -> &Vol<T> {
        if axis == 2 {
            &self.sigma_v
        } else {
            &self.sigma_h
        }
    }

    pub fn sigma_min(&self) -> T {
        let mut m = self.sigma_h.data[0];
        for arr in [&self.sigma_h, &self.sigma_v] {
            for &s in &arr.data {
                if s < m {
                    m = s;
                }
            }
        }
        m
    }
}

/// Fictitious permittivity eps = sigma / (2 omega0) that turns the diffusive
/// system into a wave equation.
#[derive(Debug, Clone)]
pub struct FictitiousPermittivity<T> {
    pub eps_h: Vol<T>,
    pub eps_v: Vol<T>,
    pub omega0: T,
}

/// Element-wise eps_ij = sigma_ij / (2 omega0).
pub fn sigma_to_epsilon<T: Real>(
    medium: &Medium<T>,
    omega0: T,
) -> Result<FictitiousPermittivity<T>> {
    if !(omega0 > T::zero()) {
        return Err(Error::Medium("omega0 must be positive".into()));
    }
    let scale = (T::of(2.0) * omega0).recip();
    Ok(FictitiousPermittivity {
        eps_h: medium.sigma_h.map(|s| s * scale),
        eps_v: medium.sigma_v.map(|s| s * scale),
        omega0,
    })
}

impl<T: Real> FictitiousPermittivity<T> {
    pub fn eps_for_axis(&self, axis: usize) -> &Vol<T> {
        if axis == 2 {
            &self.eps_v
        } else {
            &self.eps_h
        }
    }

    pub fn eps_min(&self) -> T {
        let mut m = self.eps_h.data[0];
        for arr in [&self.eps_h, &self.eps_v] {
            for &e in &arr.data {
                if e < m {
                    m = e;
                }
            }
        }
        m
    }
}

/// Inversion parametrization m = ln(rho), one volume per inverted parameter
/// class (one for isotropic, two for VTI), on interior cells.
#[derive(Debug, Clone)]
pub struct ModelParam<T> {
    /// Parameter class volumes: `[m]` or `[m_h, m_v]`.
    pub m: Vec<Vol<T>>,
    pub anisotropy: Anisotropy,
    pub m_min: T,
    pub m_max: T,
    /// Reference model used by the roughness regularization.
    pub m_ref: Vec<Vol<T>>,
    /// Cells excluded from inversion (water, air).
    pub frozen: Vol<bool>,
}

impl<T: Real> ModelParam<T> {
    pub fn isotropic(m: Vol<T>, m_min: T, m_max: T) -> Self {
        let (n1, n2, n3) = m.dims();
        Self {
            m_ref: vec![m.clone()],
            m: vec![m],
            anisotropy: Anisotropy::Isotropic,
            m_min,
            m_max,
            frozen: Vol::filled(n1, n2, n3, false),
        }
    }

    pub fn vti(m_h: Vol<T>, m_v: Vol<T>, m_min: T, m_max: T) -> Self {
        assert_eq!(m_h.dims(), m_v.dims());
        let (n1, n2, n3) = m_h.dims();
        Self {
            m_ref: vec![m_h.clone(), m_v.clone()],
            m: vec![m_h, m_v],
            anisotropy: Anisotropy::Vti,
            m_min,
            m_max,
            frozen: Vol::filled(n1, n2, n3, false),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.m.len()
    }

    pub fn interior_dims(&self) -> (usize, usize, usize) {
        self.m[0].dims()
    }

    /// Clamp every parameter into `[m_min, m_max]`.
    pub fn project(&mut self) {
        for vol in &mut self.m {
            for v in &mut vol.data {
                if *v < self.m_min {
                    *v = self.m_min;
                } else if *v > self.m_max {
                    *v = self.m_max;
                }
            }
        }
    }

    /// Total number of scalar parameters across classes.
    pub fn dof(&self) -> usize {
        self.m.iter().map(|v| v.len()).sum()
    }

    /// Flatten to a single vector (class-major, x-fastest within a class).
    pub fn pack(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.dof());
        for vol in &self.m {
            out.extend_from_slice(&vol.data);
        }
        out
    }

    /// Overwrite parameters from a packed vector.
    pub fn unpack(&mut self, flat: &[T]) {
        assert_eq!(flat.len(), self.dof());
        let mut off = 0;
        for vol in &mut self.m {
            let n = vol.len();
            vol.data.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }

    /// Convert to a padded conductivity model: sigma = 1 / exp(m) = exp(-m),
    /// with pads replicating the interior boundary cells.
    pub fn to_medium(&self, grid: &Grid3D<T>) -> Result<Medium<T>> {
        let sig_h = pad_extend(grid, &self.m[0].map(|m| (-m).exp()));
        match self.anisotropy {
            Anisotropy::Isotropic => Medium::isotropic(sig_h),
            Anisotropy::Vti => {
                let sig_v = pad_extend(grid, &self.m[1].map(|m| (-m).exp()));
                Medium::vti(sig_h, sig_v)
            }
        }
    }
}

/// Replicate interior cell values into the PML pads.
pub fn pad_extend<T: Real>(grid: &Grid3D<T>, interior: &Vol<T>) -> Vol<T> {
    let (n1, n2, n3) = interior.dims();
    assert_eq!(
        (n1, n2, n3),
        (grid.n[0], grid.n[1], grid.n[2]),
        "interior volume does not match grid"
    );
    let (p1, p2, p3) = grid.np_all();
    let npml = grid.npml;
    let mut out = Vol::filled(p1, p2, p3, interior.data[0]);
    let clamp = |i: usize, n: usize| -> usize { i.saturating_sub(npml).min(n - 1) };
    for k in 0..p3 {
        let kk = clamp(k, n3);
        for j in 0..p2 {
            let jj = clamp(j, n2);
            for i in 0..p1 {
                let ii = clamp(i, n1);
                *out.at_mut(i, j, k) = interior.at(ii, jj, kk);
            }
        }
    }
    out
}

/// Extract the interior region of a padded cell volume.
pub fn interior_of<T: Copy>(grid: &Grid3D<impl Real>, padded: &Vol<T>) -> Vol<T> {
    let npml = grid.npml;
    let [n1, n2, n3] = grid.n;
    let mut out_data = Vec::with_capacity(n1 * n2 * n3);
    for k in 0..n3 {
        for j in 0..n2 {
            for i in 0..n1 {
                out_data.push(padded.at(i + npml, j + npml, k + npml));
            }
        }
    }
    Vol::from_vec(n1, n2, n3, out_data)
}

/// Chain rule from conductivity gradients to log-resistivity gradients:
/// d(phi)/dm = -sigma * d(phi)/d(sigma), element-wise on interior cells.
pub fn chain_rule_to_logparam<T: Real>(
    grad_sigma: &Vol<T>,
    sigma_interior: &Vol<T>,
) -> Result<Vol<T>> {
    if grad_sigma.dims() != sigma_interior.dims() {
        return Err(Error::Medium("gradient/medium shape mismatch".into()));
    }
    let mut out = grad_sigma.clone();
    for (g, &s) in out.data.iter_mut().zip(&sigma_interior.data) {
        *g = -s * *g;
    }
    Ok(out)
}
