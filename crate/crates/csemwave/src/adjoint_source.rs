//! Estimation of time-domain adjoint sources from a few frequency samples.
//!
//! The decaying-kernel transform that maps a fictitious-time series to its
//! frequency samples is a wide matrix `B` (2*n_freq rows by n_time columns)
//! whose entries are generated on the fly. A damped least-squares problem
//!
//! ```text
//!   min ||s_omega - B s_t||^2 + gamma ||s_t||^2
//! ```
//!
//! is solved by conjugate gradients on the normal equations. Feeding the
//! solver the 2*n_freq unit spectra yields the columns of the damped
//! pseudo-inverse once; every receiver's adjoint source time function is then
//! a linear combination of those columns with its own residual spectrum as
//! coefficients.

use crate::error::{Error, Result};
use crate::grid::Component;
use crate::scalar::{two_pi, Cplx, Real};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

/// Parameters that uniquely determine the sampling operator and its basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisParams<T> {
    /// Fictitious time step in seconds.
    pub dt: T,
    /// Series length.
    pub nt: usize,
    /// Frequencies of interest in Hz.
    pub freqs: Vec<T>,
    /// Fictitious-domain reference angular frequency in rad/s.
    pub omega0: T,
    /// Damping weight.
    pub gamma: T,
}

impl<T: Real> BasisParams<T> {
    pub fn n_freq(&self) -> usize {
        self.freqs.len()
    }

    /// Kernel rate sqrt(omega_k * omega0) for row `k`.
    pub fn rate(&self, k: usize) -> T {
        (two_pi::<T>() * self.freqs[k] * self.omega0).sqrt()
    }

    fn validate(&self) -> Result<()> {
        if self.nt == 0 || self.freqs.is_empty() {
            return Err(Error::AdjointSource("empty time grid or frequency list".into()));
        }
        if !(self.dt > T::zero()) || self.gamma < T::zero() || !(self.omega0 > T::zero()) {
            return Err(Error::AdjointSource("invalid dt/gamma/omega0".into()));
        }
        Ok(())
    }
}

/// Stacked real spectrum layout: `[Re s(w_1)..Re s(w_n), Im s(w_1)..Im s(w_n)]`.
pub type SpectrumVector<T> = Vec<T>;

/// Convert complex per-frequency samples into the stacked layout.
pub fn stack_spectrum<T: Real>(samples: &[Cplx<T>]) -> SpectrumVector<T> {
    let n = samples.len();
    let mut out = vec![T::zero(); 2 * n];
    for (k, s) in samples.iter().enumerate() {
        out[k] = s.re;
        out[n + k] = s.im;
    }
    out
}

/// Apply the sampling operator: row k accumulates
/// `sum_n exp(-a_k t_n) cos(a_k t_n) s[n]`, rows n_freq+k use sin.
pub fn apply_b<T: Real>(series: &[T], params: &BasisParams<T>) -> Result<SpectrumVector<T>> {
    if series.len() != params.nt {
        return Err(Error::AdjointSource(format!(
            "series length {} != nt {}",
            series.len(),
            params.nt
        )));
    }
    let nf = params.n_freq();
    let mut out = vec![T::zero(); 2 * nf];
    for k in 0..nf {
        let a = params.rate(k);
        let mut re = T::zero();
        let mut im = T::zero();
        for (n, &s) in series.iter().enumerate() {
            let t = params.dt * T::of(n as f64);
            let at = a * t;
            let decay = (-at).exp();
            re = re + decay * at.cos() * s;
            im = im + decay * at.sin() * s;
        }
        out[k] = re;
        out[nf + k] = im;
    }
    Ok(out)
}

/// Exact adjoint of [`apply_b`].
pub fn apply_b_transpose<T: Real>(
    spectrum: &[T],
    params: &BasisParams<T>,
) -> Result<Vec<T>> {
    let nf = params.n_freq();
    if spectrum.len() != 2 * nf {
        return Err(Error::AdjointSource(format!(
            "spectrum length {} != 2*n_freq {}",
            spectrum.len(),
            2 * nf
        )));
    }
    let mut out = vec![T::zero(); params.nt];
    for k in 0..nf {
        let a = params.rate(k);
        let (cr, ci) = (spectrum[k], spectrum[nf + k]);
        if cr == T::zero() && ci == T::zero() {
            continue;
        }
        for (n, o) in out.iter_mut().enumerate() {
            let t = params.dt * T::of(n as f64);
            let at = a * t;
            let decay = (-at).exp();
            *o = *o + decay * (at.cos() * cr + at.sin() * ci);
        }
    }
    Ok(out)
}

/// Outcome of a damped CGNR solve.
#[derive(Debug, Clone)]
pub struct CgnrSolution<T> {
    pub series: Vec<T>,
    /// Relative normal-equation residual per iteration (starting at 1).
    pub history: Vec<T>,
    pub converged: bool,
}

/// Solve `(B^T B + gamma I) s = B^T s_omega` by conjugate gradients with
/// on-the-fly operator applications.
pub fn solve_damped_cgnr<T: Real>(
    s_omega: &[T],
    params: &BasisParams<T>,
    tol: T,
    max_iter: usize,
) -> Result<CgnrSolution<T>> {
    params.validate()?;
    if !(tol > T::zero()) {
        return Err(Error::AdjointSource("tolerance must be positive".into()));
    }
    let gamma = params.gamma;
    let rhs = apply_b_transpose(s_omega, params)?;
    let rhs_norm = norm(&rhs);
    let mut x = vec![T::zero(); params.nt];
    if rhs_norm == T::zero() {
        // gamma * ||s||^2 alone is minimized by zero
        return Ok(CgnrSolution {
            series: x,
            history: vec![T::zero()],
            converged: true,
        });
    }
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rho = dot(&r, &r);
    let mut history = vec![T::one()];
    let mut converged = false;
    for _ in 0..max_iter {
        if rho.sqrt() <= tol * rhs_norm {
            converged = true;
            break;
        }
        // q = (B^T B + gamma I) p, matrix-free
        let bp = apply_b(&p, params)?;
        let mut q = apply_b_transpose(&bp, params)?;
        for (qi, &pi) in q.iter_mut().zip(&p) {
            *qi = *qi + gamma * pi;
        }
        let alpha = rho / dot(&p, &q);
        for ((xi, &pi), (ri, &qi)) in
            x.iter_mut().zip(&p).zip(r.iter_mut().zip(&q))
        {
            *xi = *xi + alpha * pi;
            *ri = *ri - alpha * qi;
        }
        let rho_next = dot(&r, &r);
        let beta = rho_next / rho;
        rho = rho_next;
        for (pi, &ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        history.push(rho.sqrt() / rhs_norm);
    }
    if rho.sqrt() <= tol * rhs_norm {
        converged = true;
    }
    Ok(CgnrSolution {
        series: x,
        history,
        converged,
    })
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// The 2*n_freq columns of the damped pseudo-inverse: data-independent time
/// series reused to synthesize every adjoint source.
#[derive(Debug, Clone)]
pub struct BasisSet<T> {
    pub params: BasisParams<T>,
    /// `columns[k]`, k < n_freq: response to a unit real spectrum at freq k;
    /// `columns[n_freq+k]`: response to a unit imaginary spectrum.
    pub columns: Vec<Vec<T>>,
    /// CGNR relative-residual history per column solve.
    pub histories: Vec<Vec<T>>,
    pub converged: bool,
}

/// Solve the damped problem for each of the 2*n_freq unit spectra.
pub fn compute_basis<T: Real>(
    params: &BasisParams<T>,
    tol: T,
    max_iter: usize,
) -> Result<BasisSet<T>> {
    params.validate()?;
    let nf = params.n_freq();
    let mut columns = Vec::with_capacity(2 * nf);
    let mut histories = Vec::with_capacity(2 * nf);
    let mut converged = true;
    for k in 0..2 * nf {
        let mut e = vec![T::zero(); 2 * nf];
        e[k] = T::one();
        let sol = solve_damped_cgnr(&e, params, tol, max_iter)?;
        converged &= sol.converged;
        columns.push(sol.series);
        histories.push(sol.history);
    }
    Ok(BasisSet {
        params: params.clone(),
        columns,
        histories,
        converged,
    })
}

impl<T: Real> BasisSet<T> {
    /// Linear combination of the basis columns for one complex spectrum:
    /// `s(t) = sum_k Re{c_k} b_k + Im{c_k} b_{n_freq+k}`.
    pub fn synthesize(&self, coefficients: &[Cplx<T>]) -> Result<Vec<T>> {
        let nf = self.params.n_freq();
        if coefficients.len() != nf {
            return Err(Error::AdjointSource(format!(
                "coefficient count {} != basis frequency count {nf}",
                coefficients.len()
            )));
        }
        let mut out = vec![T::zero(); self.params.nt];
        for k in 0..nf {
            let (cr, ci) = (coefficients[k].re, coefficients[k].im);
            for (o, (&br, &bi)) in out
                .iter_mut()
                .zip(self.columns[k].iter().zip(&self.columns[nf + k]))
            {
                *o = *o + cr * br + ci * bi;
            }
        }
        Ok(out)
    }

    fn cache_key(&self) -> String {
        cache_key(&self.params)
    }
}

/// One synthesized adjoint source time function.
#[derive(Debug, Clone)]
pub struct AdjointSourceEntry<T> {
    pub receiver: u32,
    pub component: Component,
    pub series: Vec<T>,
}

/// Synthesized time functions for every receiver/component of one gather.
#[derive(Debug, Clone)]
pub struct AdjointSourceSet<T> {
    pub entries: Vec<AdjointSourceEntry<T>>,
}

/// Build all adjoint source series for one source gather by reusing the basis.
///
/// `residual_spectra` carries, per receiver and component, the fully prepared
/// coefficient spectrum (conjugated weighted residuals including any
/// field-correspondence and injection-calibration factors).
pub fn synthesize_adjoint_sources<T: Real>(
    residual_spectra: &[(u32, Component, Vec<Cplx<T>>)],
    basis: &BasisSet<T>,
) -> Result<AdjointSourceSet<T>> {
    let nf = basis.params.n_freq();
    let mut entries = Vec::with_capacity(residual_spectra.len());
    for (receiver, component, coeffs) in residual_spectra {
        if coeffs.len() != nf {
            return Err(Error::AdjointSource(
                "residual frequency list does not match basis".into(),
            ));
        }
        entries.push(AdjointSourceEntry {
            receiver: *receiver,
            component: *component,
            series: basis.synthesize(coeffs)?,
        });
    }
    Ok(AdjointSourceSet { entries })
}

/// Content hash of the basis parameters, used as the cache file name.
pub fn cache_key<T: Real>(params: &BasisParams<T>) -> String {
    let mut h = Sha256::new();
    let mut text = format!(
        "dt={:e};nt={};omega0={:e};gamma={:e};freqs=",
        params.dt.f64(),
        params.nt,
        params.omega0.f64(),
        params.gamma.f64()
    );
    for f in &params.freqs {
        text.push_str(&format!("{:e},", f.f64()));
    }
    h.update(text.as_bytes());
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

const CACHE_MAGIC: &[u8; 8] = b"CSEMBAS1";

/// Persist a basis set under `dir`, keyed by the parameter hash.
pub fn save_basis_cache<T: Real>(basis: &BasisSet<T>, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.basis", basis.cache_key()));
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&(basis.params.nt as u64).to_le_bytes());
    buf.extend_from_slice(&(basis.params.n_freq() as u64).to_le_bytes());
    buf.extend_from_slice(&basis.params.dt.f64().to_le_bytes());
    buf.extend_from_slice(&basis.params.omega0.f64().to_le_bytes());
    buf.extend_from_slice(&basis.params.gamma.f64().to_le_bytes());
    for f in &basis.params.freqs {
        buf.extend_from_slice(&f.f64().to_le_bytes());
    }
    for col in &basis.columns {
        for v in col {
            buf.extend_from_slice(&v.f64().to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(&path)?;
    file.write_all(&buf)?;
    Ok(path)
}

/// Load a cached basis for the given parameters, if present and matching.
pub fn load_basis_cache<T: Real>(
    params: &BasisParams<T>,
    dir: &Path,
) -> Result<Option<BasisSet<T>>> {
    let path = dir.join(format!("{}.basis", cache_key(params)));
    if !path.exists() {
        return Ok(None);
    }
    let mut bytes = Vec::new();
    std::fs::File::open(&path)?.read_to_end(&mut bytes)?;
    let mut off = 0usize;
    let take = |bytes: &[u8], off: &mut usize, n: usize| -> Result<Vec<u8>> {
        if *off + n > bytes.len() {
            return Err(Error::File(format!("truncated basis cache {path:?}")));
        }
        let out = bytes[*off..*off + n].to_vec();
        *off += n;
        Ok(out)
    };
    let magic = take(&bytes, &mut off, 8)?;
    if magic != CACHE_MAGIC {
        return Err(Error::File(format!("bad basis cache magic in {path:?}")));
    }
    let read_u64 = |b: Vec<u8>| u64::from_le_bytes(b.try_into().unwrap());
    let read_f64 = |b: Vec<u8>| f64::from_le_bytes(b.try_into().unwrap());
    let nt = read_u64(take(&bytes, &mut off, 8)?) as usize;
    let nf = read_u64(take(&bytes, &mut off, 8)?) as usize;
    let dt = read_f64(take(&bytes, &mut off, 8)?);
    let omega0 = read_f64(take(&bytes, &mut off, 8)?);
    let gamma = read_f64(take(&bytes, &mut off, 8)?);
    let mut freqs = Vec::with_capacity(nf);
    for _ in 0..nf {
        freqs.push(read_f64(take(&bytes, &mut off, 8)?));
    }
    let stored = BasisParams::<T> {
        dt: T::of(dt),
        nt,
        freqs: freqs.iter().map(|&f| T::of(f)).collect(),
        omega0: T::of(omega0),
        gamma: T::of(gamma),
    };
    if &stored != params {
        // hash collision or stale file; treat as a miss
        return Ok(None);
    }
    let mut columns = Vec::with_capacity(2 * nf);
    for _ in 0..2 * nf {
        let mut col = Vec::with_capacity(nt);
        for _ in 0..nt {
            col.push(T::of(read_f64(take(&bytes, &mut off, 8)?)));
        }
        columns.push(col);
    }
    Ok(Some(BasisSet {
        params: stored,
        columns,
        histories: Vec::new(),
        converged: true,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_params() -> BasisParams<f64> {
        BasisParams {
            dt: 0.004,
            nt: 50,
            freqs: vec![0.25, 1.0],
            omega0: 2.0 * std::f64::consts::PI,
            gamma: 1e-3,
        }
    }

    /// Materialize the operator entries directly from the kernel formula.
    fn dense_b(params: &BasisParams<f64>) -> Vec<Vec<f64>> {
        let nf = params.n_freq();
        let mut rows = vec![vec![0.0; params.nt]; 2 * nf];
        for k in 0..nf {
            let a = params.rate(k);
            for n in 0..params.nt {
                let t = params.dt * n as f64;
                rows[k][n] = (-a * t).exp() * (a * t).cos();
                rows[nf + k][n] = (-a * t).exp() * (a * t).sin();
            }
        }
        rows
    }

    #[test]
    fn delta_at_origin_hits_cos_rows() {
        let p = small_params();
        let mut s = vec![0.0; p.nt];
        s[0] = 1.0;
        let y = apply_b(&s, &p).unwrap();
        assert_eq!(y.len(), 4);
        assert!((y[0] - 1.0).abs() < 1e-15);
        assert!((y[1] - 1.0).abs() < 1e-15);
        assert_eq!(y[2], 0.0);
        assert_eq!(y[3], 0.0);

        let zero = vec![0.0; p.nt];
        assert!(apply_b(&zero, &p).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_materialized_matrix() {
        let p = small_params();
        let rows = dense_b(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s: Vec<f64> = (0..p.nt).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = apply_b(&s, &p).unwrap();
        for (k, row) in rows.iter().enumerate() {
            let dense: f64 = row.iter().zip(&s).map(|(a, b)| a * b).sum();
            assert!((dense - y[k]).abs() < 1e-13, "row {k}");
        }
    }

    #[test]
    fn transpose_is_exact_adjoint() {
        let p = BasisParams {
            dt: 0.004,
            nt: 1000,
            freqs: vec![0.25, 0.75, 2.25],
            omega0: 2.0 * std::f64::consts::PI,
            gamma: 1e-3,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s: Vec<f64> = (0..p.nt).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..2 * p.n_freq()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bs = apply_b(&s, &p).unwrap();
        let bty = apply_b_transpose(&y, &p).unwrap();
        let lhs: f64 = bs.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = s.iter().zip(&bty).map(|(a, b)| a * b).sum();
        assert!(
            (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()),
            "adjoint mismatch {lhs} vs {rhs}"
        );

        let zeros = vec![0.0; 2 * p.n_freq()];
        assert!(apply_b_transpose(&zeros, &p).unwrap().iter().all(|&v| v == 0.0));

        // single nonzero Re row reproduces the decaying cosine kernel
        let mut e = zeros.clone();
        e[1] = 1.0;
        let series = apply_b_transpose(&e, &p).unwrap();
        let a = p.rate(1);
        for n in (0..p.nt).step_by(113) {
            let t = p.dt * n as f64;
            let want = (-a * t).exp() * (a * t).cos();
            assert!((series[n] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn cgnr_matches_dense_damped_solve() {
        let p = small_params();
        let rows = dense_b(&p);
        let nf2 = 2 * p.n_freq();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b: Vec<f64> = (0..nf2).map(|_| rng.gen_range(-1.0..1.0)).collect();

        // dense normal equations (B^T B + gamma I) x = B^T b
        let nt = p.nt;
        let mut normal = nalgebra::DMatrix::<f64>::zeros(nt, nt);
        for i in 0..nt {
            for j in 0..nt {
                let mut v = 0.0;
                for row in &rows {
                    v += row[i] * row[j];
                }
                if i == j {
                    v += p.gamma;
                }
                normal[(i, j)] = v;
            }
        }
        let mut rhs = nalgebra::DVector::<f64>::zeros(nt);
        for i in 0..nt {
            rhs[i] = rows.iter().zip(&b).map(|(row, &bk)| row[i] * bk).sum();
        }
        let dense = normal.clone().cholesky().unwrap().solve(&rhs);

        let sol = solve_damped_cgnr(&b, &p, 1e-12, 300).unwrap();
        assert!(sol.converged);
        for i in 0..nt {
            assert!((sol.series[i] - dense[i]).abs() < 1e-8, "entry {i}");
        }

        // zero spectrum -> zero series
        let z = solve_damped_cgnr(&vec![0.0; nf2], &p, 1e-10, 50).unwrap();
        assert!(z.series.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn basis_recipe_and_reuse() {
        let p = small_params();
        let basis = compute_basis(&p, 1e-10, 200).unwrap();
        assert!(basis.converged);
        assert_eq!(basis.columns.len(), 4);

        // unit real spectrum at freq k equals the stored column
        let direct = solve_damped_cgnr(&[0.0, 1.0, 0.0, 0.0], &p, 1e-10, 200).unwrap();
        for (a, b) in basis.columns[1].iter().zip(&direct.series) {
            assert!((a - b).abs() < 1e-12);
        }

        // synthesizing a random spectrum equals solving it directly
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let coeffs: Vec<Cplx<f64>> = (0..p.n_freq())
            .map(|_| Cplx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let synth = basis.synthesize(&coeffs).unwrap();
        let stacked = stack_spectrum(&coeffs);
        let direct = solve_damped_cgnr(&stacked, &p, 1e-12, 300).unwrap();
        let scale: f64 = direct.series.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (a, b) in synth.iter().zip(&direct.series) {
            assert!((a - b).abs() < 1e-7 * scale.max(1.0));
        }
    }

    #[test]
    fn basis_amplitude_decays() {
        let p = BasisParams {
            dt: 0.004,
            nt: 1000,
            freqs: vec![0.25, 0.75, 2.25],
            omega0: 2.0 * std::f64::consts::PI,
            gamma: 1e-3,
        };
        let basis = compute_basis(&p, 1e-10, 200).unwrap();
        for col in &basis.columns {
            let head: f64 = col[..100].iter().map(|v| v.abs()).fold(0.0, f64::max);
            let tail: f64 = col[900..].iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(tail < 0.05 * head, "tail {tail} vs head {head}");
        }
    }

    #[test]
    fn basis_is_deterministic() {
        let p = small_params();
        let a = compute_basis(&p, 1e-10, 200).unwrap();
        let b = compute_basis(&p, 1e-10, 200).unwrap();
        for (ca, cb) in a.columns.iter().zip(&b.columns) {
            assert_eq!(ca, cb, "basis columns must be bit-identical");
        }
    }

    #[test]
    fn synthesis_is_linear() {
        let p = small_params();
        let basis = compute_basis(&p, 1e-10, 200).unwrap();
        let c1 = vec![Cplx::new(0.3, -0.7), Cplx::new(1.5, 0.2)];
        let c2 = vec![Cplx::new(-1.0, 0.4), Cplx::new(0.0, 2.0)];
        let alpha = 2.5f64;
        let combo: Vec<Cplx<f64>> = c1
            .iter()
            .zip(&c2)
            .map(|(a, b)| a.scale(alpha) + b)
            .collect();
        let s1 = basis.synthesize(&c1).unwrap();
        let s2 = basis.synthesize(&c2).unwrap();
        let sc = basis.synthesize(&combo).unwrap();
        for ((a, b), c) in s1.iter().zip(&s2).zip(&sc) {
            assert!((alpha * a + b - c).abs() < 1e-12);
        }

        // zero residual -> zero source
        let z = basis
            .synthesize(&vec![Cplx::new(0.0, 0.0); 2])
            .unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = small_params();
        let basis = compute_basis(&p, 1e-10, 200).unwrap();
        save_basis_cache(&basis, dir.path()).unwrap();
        let loaded = load_basis_cache(&p, dir.path()).unwrap().unwrap();
        for (a, b) in basis.columns.iter().zip(&loaded.columns) {
            assert_eq!(a, b);
        }
        // different params miss
        let mut p2 = p.clone();
        p2.gamma = 1e-2;
        assert!(load_basis_cache(&p2, dir.path()).unwrap().is_none());
    }
}
