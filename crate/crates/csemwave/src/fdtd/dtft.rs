//! Decaying-kernel frequency extraction carried out on the fly during time
//! stepping, plus the source wavelet and steady-state detection.
//!
//! The fictitious-domain transform kernel at frequency `w` (rad/s) is
//! `exp(-sqrt(w w0) t) * exp(i sqrt(w w0) t)`; its decay is what realizes the
//! attenuation of the diffusive fields during time evolution.

use crate::scalar::{two_pi, Cplx, Real};

/// Kernel rate sqrt(omega * omega0) for a frequency given in Hz.
#[inline]
pub fn kernel_rate<T: Real>(freq_hz: T, omega0: T) -> T {
    (two_pi::<T>() * freq_hz * omega0).sqrt()
}

/// Transform kernel value at time `t`.
#[inline]
pub fn kernel<T: Real>(rate: T, t: T) -> Cplx<T> {
    let decay = (-rate * t).exp();
    Cplx::new(decay * (rate * t).cos(), decay * (rate * t).sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Electric,
    Magnetic,
}

/// Spectrum of a unit sample train injected by the engine, per time sample.
///
/// Electric currents enter the E update between integer steps, so a series
/// value at index n acts at time (n+1/2) dt; magnetic currents act at n dt.
/// This factor converts a dt-free kernel sum over t_n into the engine's
/// effective source spectrum.
#[inline]
pub fn injection_calibration<T: Real>(
    kind: SourceKind,
    freq_hz: T,
    omega0: T,
    dt: T,
) -> Cplx<T> {
    let dtc = Cplx::new(dt, T::zero());
    match kind {
        SourceKind::Magnetic => dtc,
        SourceKind::Electric => {
            let rate = kernel_rate(freq_hz, omega0);
            kernel(rate, dt * T::of(0.5)) * dtc
        }
    }
}

/// First-derivative-of-Gaussian source pulse, peak amplitude one.
#[derive(Debug, Clone, Copy)]
pub struct Wavelet<T> {
    pub tau: T,
    pub t0: T,
}

impl<T: Real> Wavelet<T> {
    /// Build from the desired spectral peak in fictitious-domain Hz.
    pub fn with_peak(peak_fict_hz: T) -> Self {
        let tau = (two_pi::<T>() * peak_fict_hz).recip();
        Wavelet {
            tau,
            t0: T::of(6.0) * tau,
        }
    }

    /// Default peak: the highest kernel oscillation frequency sqrt(f * f0)
    /// among the requested diffusive-domain frequencies.
    pub fn auto<'a>(freqs: impl Iterator<Item = &'a T>, omega0: T) -> Self
    where
        T: 'a,
    {
        let f0 = omega0 / two_pi::<T>();
        let mut peak = T::zero();
        for &f in freqs {
            let p = (f * f0).sqrt();
            if p > peak {
                peak = p;
            }
        }
        if peak == T::zero() {
            peak = T::one();
        }
        Self::with_peak(peak)
    }

    #[inline]
    pub fn value(&self, t: T) -> T {
        let u = (t - self.t0) / self.tau;
        -u * (T::of(0.5) - u * u * T::of(0.5)).exp()
    }
}

/// Steady-state test between two checkpoints of the tracked accumulators.
///
/// Converged when every sample's relative change over the interval is below
/// `tol`. All-zero accumulators report not converged so the check cannot
/// trigger before the source has reached any receiver.
pub fn check_steady_state<T: Real>(prev: &[Cplx<T>], curr: &[Cplx<T>], tol: T) -> bool {
    assert_eq!(prev.len(), curr.len());
    if curr.is_empty() {
        return false;
    }
    let mut global_max = T::zero();
    for c in curr {
        let mag = c.norm();
        if mag > global_max {
            global_max = mag;
        }
    }
    if global_max == T::zero() {
        return false;
    }
    // samples far below the gather scale are measured against it instead of
    // their own magnitude, so broadside nulls cannot stall termination
    let floor = global_max * T::of(1e-6);
    for (p, c) in prev.iter().zip(curr) {
        let change = (c - p).norm();
        let denom = c.norm().max(floor);
        if change > tol * denom {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        let rate = 2.0f64;
        let k0 = kernel(rate, 0.0);
        assert_eq!(k0, Cplx::new(1.0, 0.0));
        // magnitude at t = 1/rate is exp(-1)
        let k1 = kernel(rate, 0.5);
        assert!((k1.norm() - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn wavelet_peak_near_unity_and_smooth_onset() {
        let w = Wavelet::<f64>::with_peak(1.0);
        let mut peak: f64 = 0.0;
        let dt = 1e-4;
        let mut t = 0.0;
        while t < 6.0 * w.t0 {
            peak = peak.max(w.value(t).abs());
            t += dt;
        }
        assert!((peak - 1.0).abs() < 1e-4);
        assert!(w.value(0.0).abs() < 1e-6);
    }

    #[test]
    fn steady_state_cases() {
        let a = vec![Cplx::new(1.0, 2.0), Cplx::new(0.5, -0.5)];
        assert!(check_steady_state(&a, &a.clone(), 1e-5));

        let tol = 1e-4;
        let mut b = a.clone();
        b[0].re += 10.0 * tol * b[0].norm();
        assert!(!check_steady_state(&a, &b, tol));

        let z = vec![Cplx::new(0.0, 0.0); 2];
        assert!(!check_steady_state(&z.clone(), &z, 1e-5));
    }
}
