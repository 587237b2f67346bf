//! Acquisition geometry and observed-data containers, with the plain-text
//! survey format and CSV data format used by the batch tools.

use crate::error::{Error, Result};
use crate::fdtd::SourceKind;
use crate::grid::{Component, Grid3D};
use crate::scalar::{Cplx, Real};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct SourceDef<T> {
    pub id: u32,
    pub position: [T; 3],
    /// Unit dipole direction.
    pub orientation: [T; 3],
    pub kind: SourceKind,
    pub moment: T,
}

#[derive(Debug, Clone)]
pub struct ReceiverDef<T> {
    pub id: u32,
    pub position: [T; 3],
    pub components: Vec<Component>,
}

/// Source and receiver records plus the frequency list.
#[derive(Debug, Clone)]
pub struct Survey<T> {
    pub sources: Vec<SourceDef<T>>,
    pub receivers: Vec<ReceiverDef<T>>,
    pub freqs: Vec<T>,
    pub reciprocity: bool,
}

impl<T: Real> Survey<T> {
    pub fn validate(&self, grid: &Grid3D<T>) -> Result<()> {
        let mut ids = std::collections::HashSet::new();
        for s in &self.sources {
            if !ids.insert(s.id) {
                return Err(Error::Survey(format!("duplicate source id {}", s.id)));
            }
            if !grid.contains_interior(s.position) {
                return Err(Error::Survey(format!("source {} outside interior", s.id)));
            }
        }
        let mut rids = std::collections::HashSet::new();
        for r in &self.receivers {
            if !rids.insert(r.id) {
                return Err(Error::Survey(format!("duplicate receiver id {}", r.id)));
            }
            if !grid.contains_interior(r.position) {
                return Err(Error::Survey(format!("receiver {} outside interior", r.id)));
            }
            if r.components.is_empty() {
                return Err(Error::Survey(format!("receiver {} records nothing", r.id)));
            }
        }
        if self.freqs.is_empty() {
            return Err(Error::Survey("empty frequency list".into()));
        }
        for w in self.freqs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Survey(
                    "frequency list must be sorted and distinct".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn source(&self, id: u32) -> Option<&SourceDef<T>> {
        self.sources.iter().find(|s| s.id == id)
    }

    pub fn receiver(&self, id: u32) -> Option<&ReceiverDef<T>> {
        self.receivers.iter().find(|r| r.id == id)
    }

    /// Swap the roles of sources and receivers. Every source must share one
    /// dipole kind; receivers take over their components as dipoles along the
    /// recorded axes only when a single component is recorded per receiver.
    pub fn apply_reciprocity(&self) -> Result<Survey<T>> {
        let mut new_sources = Vec::with_capacity(self.receivers.len());
        for r in &self.receivers {
            if r.components.len() != 1 {
                return Err(Error::Survey(format!(
                    "reciprocity needs exactly one recorded component per receiver (receiver {})",
                    r.id
                )));
            }
            let comp = r.components[0];
            let mut orientation = [T::zero(); 3];
            orientation[comp.axis()] = T::one();
            new_sources.push(SourceDef {
                id: r.id,
                position: r.position,
                orientation,
                kind: if comp.is_electric() {
                    SourceKind::Electric
                } else {
                    SourceKind::Magnetic
                },
                moment: T::one(),
            });
        }
        let mut new_receivers = Vec::with_capacity(self.sources.len());
        for s in &self.sources {
            let axis = principal_axis(s.orientation)?;
            let comp = match (s.kind, axis) {
                (SourceKind::Electric, 0) => Component::Ex,
                (SourceKind::Electric, 1) => Component::Ey,
                (SourceKind::Electric, 2) => Component::Ez,
                (SourceKind::Magnetic, 0) => Component::Hx,
                (SourceKind::Magnetic, 1) => Component::Hy,
                (SourceKind::Magnetic, 2) => Component::Hz,
                _ => unreachable!(),
            };
            new_receivers.push(ReceiverDef {
                id: s.id,
                position: s.position,
                components: vec![comp],
            });
        }
        Ok(Survey {
            sources: new_sources,
            receivers: new_receivers,
            freqs: self.freqs.clone(),
            reciprocity: false,
        })
    }
}

fn principal_axis<T: Real>(orientation: [T; 3]) -> Result<usize> {
    let mut nonzero = None;
    for (axis, &v) in orientation.iter().enumerate() {
        if v != T::zero() {
            if nonzero.is_some() {
                return Err(Error::Survey(
                    "reciprocity requires axis-aligned dipoles".into(),
                ));
            }
            nonzero = Some(axis);
        }
    }
    nonzero.ok_or_else(|| Error::Survey("zero dipole orientation".into()))
}

/// One observed or synthetic datum.
#[derive(Debug, Clone, Copy)]
pub struct DataEntry<T> {
    pub src: u32,
    pub rcv: u32,
    pub component: Component,
    pub freq_idx: usize,
    pub value: Cplx<T>,
    pub weight: T,
}

/// Complex spectra keyed by (source, receiver, component, frequency), stored
/// in a fixed order so every traversal is deterministic.
#[derive(Debug, Clone, Default)]
pub struct DataSet<T> {
    pub entries: Vec<DataEntry<T>>,
    index: HashMap<(u32, u32, Component, usize), usize>,
}

impl<T: Real> DataSet<T> {
    pub fn new() -> Self {
        DataSet {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn push(&mut self, entry: DataEntry<T>) {
        let key = (entry.src, entry.rcv, entry.component, entry.freq_idx);
        match self.index.get(&key) {
            Some(&i) => self.entries[i] = entry,
            None => {
                self.index.insert(key, self.entries.len());
                self.entries.push(entry);
            }
        }
    }

    pub fn get(
        &self,
        src: u32,
        rcv: u32,
        component: Component,
        freq_idx: usize,
    ) -> Option<&DataEntry<T>> {
        self.index
            .get(&(src, rcv, component, freq_idx))
            .map(|&i| &self.entries[i])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Seeded multiplicative Gaussian noise:
    /// `d += eta |d| (g1 + i g2)/sqrt(2)` with standard-normal g.
    pub fn add_noise(&mut self, eta: T, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = StandardNormal;
        let s = T::of(0.5).sqrt();
        for e in &mut self.entries {
            let g1: f64 = normal.sample(&mut rng);
            let g2: f64 = normal.sample(&mut rng);
            let amp = eta * e.value.norm() * s;
            e.value += Cplx::new(T::of(g1) * amp, T::of(g2) * amp);
        }
    }

    /// Swap source/receiver roles in all keys (values untouched).
    pub fn transpose_keys(&self) -> DataSet<T> {
        let mut out = DataSet::new();
        for e in &self.entries {
            out.push(DataEntry {
                src: e.rcv,
                rcv: e.src,
                ..*e
            });
        }
        out
    }
}

// ---------------------------------------------------------------------------
// file formats
// ---------------------------------------------------------------------------

/// Parse the plain-text survey format:
///
/// ```text
/// freq 0.25
/// src 1  x y z  ox oy oz  electric
/// rcv 1  x y z  Ex,Ey
/// reciprocity 1
/// ```
pub fn read_survey<T: Real>(path: &Path) -> Result<Survey<T>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Survey(format!("cannot open {path:?}: {e}")))?;
    let mut survey = Survey {
        sources: Vec::new(),
        receivers: Vec::new(),
        freqs: Vec::new(),
        reciprocity: false,
    };
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        let kw = tok.next().unwrap();
        let ctx = |msg: &str| Error::Survey(format!("{path:?}:{}: {msg}", lineno + 1));
        let next_f = |tok: &mut std::str::SplitWhitespace| -> Result<T> {
            tok.next()
                .and_then(|s| s.parse::<f64>().ok())
                .map(T::of)
                .ok_or_else(|| ctx("expected a number"))
        };
        match kw {
            "freq" => survey.freqs.push(next_f(&mut tok)?),
            "reciprocity" => {
                survey.reciprocity = tok.next() == Some("1");
            }
            "src" => {
                let id: u32 = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| ctx("bad source id"))?;
                let position = [next_f(&mut tok)?, next_f(&mut tok)?, next_f(&mut tok)?];
                let orientation = [next_f(&mut tok)?, next_f(&mut tok)?, next_f(&mut tok)?];
                let kind = match tok.next() {
                    Some("electric") => SourceKind::Electric,
                    Some("magnetic") => SourceKind::Magnetic,
                    _ => return Err(ctx("source kind must be electric|magnetic")),
                };
                survey.sources.push(SourceDef {
                    id,
                    position,
                    orientation,
                    kind,
                    moment: T::one(),
                });
            }
            "rcv" => {
                let id: u32 = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| ctx("bad receiver id"))?;
                let position = [next_f(&mut tok)?, next_f(&mut tok)?, next_f(&mut tok)?];
                let comps: Vec<Component> = tok
                    .next()
                    .ok_or_else(|| ctx("missing component list"))?
                    .split(',')
                    .map(|c| Component::parse(c).ok_or_else(|| ctx("bad component")))
                    .collect::<Result<_>>()?;
                survey.receivers.push(ReceiverDef {
                    id,
                    position,
                    components: comps,
                });
            }
            other => return Err(ctx(&format!("unknown keyword '{other}'"))),
        }
    }
    survey.freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(survey)
}

pub const DATA_CSV_HEADER: &str = "# time dependence exp(-i omega t); spectra are sums of \
s(t) exp(+i omega' t) dt with omega' = (1+i) sqrt(omega omega0)\n\
src_id,rcv_id,component,freq_hz,real,imag,weight";

/// Write a data set as CSV (stable order, full float precision).
pub fn write_data_csv<T: Real>(
    path: &Path,
    data: &DataSet<T>,
    freqs: &[T],
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{DATA_CSV_HEADER}")?;
    for e in &data.entries {
        writeln!(
            f,
            "{},{},{},{:e},{:e},{:e},{:e}",
            e.src,
            e.rcv,
            e.component.name(),
            freqs[e.freq_idx].f64(),
            e.value.re.f64(),
            e.value.im.f64(),
            e.weight.f64()
        )?;
    }
    Ok(())
}

/// Read a data CSV written by [`write_data_csv`]. Frequencies are matched
/// against `freqs` with a relative tolerance.
pub fn read_data_csv<T: Real>(path: &Path, freqs: &[T]) -> Result<DataSet<T>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::File(format!("cannot open {path:?}: {e}")))?;
    let mut out = DataSet::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("src_id") {
            continue;
        }
        let cols: Vec<&str> = t.split(',').collect();
        if cols.len() != 7 {
            return Err(Error::File(format!(
                "{path:?}:{}: expected 7 columns",
                lineno + 1
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::File(format!("{path:?}:{}: bad number '{s}'", lineno + 1)))
        };
        let freq = parse_f(cols[3])?;
        let freq_idx = freqs
            .iter()
            .position(|&f| {
                let f = f.f64();
                (f - freq).abs() <= 1e-9 * f.abs().max(freq.abs()).max(1e-30)
            })
            .ok_or_else(|| {
                Error::File(format!(
                    "{path:?}:{}: frequency {freq} not in survey list",
                    lineno + 1
                ))
            })?;
        out.push(DataEntry {
            src: cols[0].trim().parse().map_err(|_| {
                Error::File(format!("{path:?}:{}: bad src id", lineno + 1))
            })?,
            rcv: cols[1].trim().parse().map_err(|_| {
                Error::File(format!("{path:?}:{}: bad rcv id", lineno + 1))
            })?,
            component: Component::parse(cols[2].trim())
                .ok_or_else(|| Error::File(format!("{path:?}:{}: bad component", lineno + 1)))?,
            freq_idx,
            value: Cplx::new(T::of(parse_f(cols[4])?), T::of(parse_f(cols[5])?)),
            weight: T::of(parse_f(cols[6])?),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_is_seeded_and_scaled() {
        let mut d1: DataSet<f64> = DataSet::new();
        d1.push(DataEntry {
            src: 1,
            rcv: 1,
            component: Component::Ex,
            freq_idx: 0,
            value: Cplx::new(1.0, -2.0),
            weight: 1.0,
        });
        let mut d2 = d1.clone();
        d1.add_noise(0.03, 42);
        d2.add_noise(0.03, 42);
        assert_eq!(d1.entries[0].value, d2.entries[0].value);

        let mut d3 = d2.clone();
        d3.add_noise(0.0, 7);
        assert_eq!(d3.entries[0].value, d2.entries[0].value); // eta = 0 leaves data unchanged
    }

    #[test]
    fn reciprocity_transposes_roles_and_keys() {
        let survey: Survey<f64> = Survey {
            sources: vec![SourceDef {
                id: 10,
                position: [0.0, 0.0, 0.0],
                orientation: [1.0, 0.0, 0.0],
                kind: SourceKind::Electric,
                moment: 1.0,
            }],
            receivers: vec![ReceiverDef {
                id: 20,
                position: [100.0, 0.0, 0.0],
                components: vec![Component::Ex],
            }],
            freqs: vec![0.25],
            reciprocity: true,
        };
        let sw = survey.apply_reciprocity().unwrap();
        assert_eq!(sw.sources.len(), 1);
        assert_eq!(sw.sources[0].id, 20);
        assert_eq!(sw.receivers[0].id, 10);
        assert_eq!(sw.receivers[0].components, vec![Component::Ex]);

        let mut data: DataSet<f64> = DataSet::new();
        data.push(DataEntry {
            src: 10,
            rcv: 20,
            component: Component::Ex,
            freq_idx: 0,
            value: Cplx::new(3.0, 4.0),
            weight: 2.0,
        });
        let t = data.transpose_keys();
        let e = t.get(20, 10, Component::Ex, 0).unwrap();
        assert_eq!(e.value, Cplx::new(3.0, 4.0));
        assert_eq!(e.weight, 2.0);
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let freqs = [0.25, 1.0];
        let mut data: DataSet<f64> = DataSet::new();
        for (i, &f) in freqs.iter().enumerate() {
            let _ = f;
            data.push(DataEntry {
                src: 1,
                rcv: 2,
                component: Component::Ey,
                freq_idx: i,
                value: Cplx::new(1.25e-13 * (i as f64 + 1.0), -7.5e-15),
                weight: 0.5,
            });
        }
        write_data_csv(&path, &data, &freqs).unwrap();
        let back: DataSet<f64> = read_data_csv(&path, &freqs).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in data.entries.iter().zip(&back.entries) {
            assert_eq!(a.value, b.value);
            assert_eq!(a.weight, b.weight);
            assert_eq!(a.freq_idx, b.freq_idx);
        }
    }

    #[test]
    fn survey_file_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("survey.txt");
        std::fs::write(
            &path,
            "# comment\nfreq 1.0\nfreq 0.25\nsrc 1 0 0 50  1 0 0 electric\nrcv 7 500 0 50 Ex,Ey\n",
        )
        .unwrap();
        let s: Survey<f64> = read_survey(&path).unwrap();
        assert_eq!(s.freqs, vec![0.25, 1.0]); // sorted
        assert_eq!(s.sources[0].id, 1);
        assert_eq!(s.receivers[0].components.len(), 2);
    }
}
