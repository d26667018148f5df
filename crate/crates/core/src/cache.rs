//! On-disk caches for class enumerations and spectrum samples.
//!
//! Records are plain text, one per line. Floats are written in Rust's
//! shortest round-trip form, so a cache hit reproduces the computed values
//! bit for bit. A directory has one writer at a time, enforced by an
//! exclusive lock file; files are written to a temporary name and renamed.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::spectra::{
    ChamberVector, HolonomySign, RepSpectrum, Representation, SampleEntry, SampleKind,
    SpectraError, SpectrumSample,
};
use crate::word::{
    enumerate_conjugacy_classes, sort_classes, ConjugacyClass, GeneratorAlphabet, Shard, Word,
};

/// Environment variable naming the default cache directory.
pub const CACHE_DIR_ENV: &str = "CORRLAB_CACHE_DIR";

const LOCK_NAME: &str = ".corrlab.lock";
const FORMAT_VERSION: &str = "corrlab-cache 1";

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache I/O at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cache directory {0} is locked by another writer")]
    Locked(PathBuf),
    #[error("corrupt cache record in {path} line {line}: {reason}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CacheError + '_ {
    move |source| CacheError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Resolves the cache directory from an explicit path or the environment.
pub fn resolve_cache_dir(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from))
}

/// Exclusive writer lock, released on drop.
#[derive(Debug)]
pub struct CacheLock {
    path: PathBuf,
}

impl CacheLock {
    pub fn acquire(dir: &Path) -> Result<Self, CacheError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(CacheError::Locked(dir.to_path_buf()))
            }
            Err(e) => Err(CacheError::Io { path, source: e }),
        }
    }
}

impl Drop for CacheLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// A cache directory.
#[derive(Clone, Debug)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write_atomic(&self, name: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CacheError> {
        let _lock = CacheLock::acquire(&self.dir)?;
        let final_path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        {
            let f = File::create(&tmp).map_err(io_err(&tmp))?;
            let mut w = BufWriter::new(f);
            writeln!(w, "{FORMAT_VERSION}").map_err(io_err(&tmp))?;
            body(&mut w).map_err(io_err(&tmp))?;
            w.flush().map_err(io_err(&tmp))?;
        }
        fs::rename(&tmp, &final_path).map_err(io_err(&final_path))
    }

    fn read_lines(&self, name: &str) -> Result<Option<Vec<String>>, CacheError> {
        let path = self.dir.join(name);
        let f = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(CacheError::Io { path, source: e }),
        };
        let lines = BufReader::new(f)
            .lines()
            .collect::<Result<Vec<_>, _>>()
            .map_err(io_err(&path))?;
        if lines.first().map(String::as_str) != Some(FORMAT_VERSION) {
            return Ok(None);
        }
        Ok(Some(lines.into_iter().skip(1).collect()))
    }

    /// Conjugacy classes up to `max_len`, read from or written to
    /// `classes-r{rank}-l{max_len}.txt` (one `length letters…` record each).
    pub fn classes(
        &self,
        alphabet: &GeneratorAlphabet,
        max_len: usize,
        shard_count: usize,
    ) -> Result<Vec<ConjugacyClass>, CacheError> {
        let name = format!("classes-r{}-l{max_len}.txt", alphabet.rank());
        if let Some(lines) = self.read_lines(&name)? {
            let path = self.dir.join(&name);
            return lines
                .iter()
                .enumerate()
                .map(|(i, line)| {
                    let corrupt = |reason: String| CacheError::Corrupt {
                        path: path.clone(),
                        line: i + 2,
                        reason,
                    };
                    let (len, rest) = line.split_once(' ').ok_or_else(|| corrupt("no length".into()))?;
                    let w = Word::parse_indices(rest, alphabet.rank()).map_err(|e| corrupt(e.to_string()))?;
                    if len.parse::<usize>().ok() != Some(w.len()) {
                        return Err(corrupt("length mismatch".into()));
                    }
                    ConjugacyClass::of(&w).ok_or_else(|| corrupt("trivial class".into()))
                })
                .collect();
        }
        let mut classes: Vec<ConjugacyClass> = Shard::all(shard_count)
            .into_iter()
            .flat_map(|s| enumerate_conjugacy_classes(alphabet, max_len, s))
            .collect();
        sort_classes(&mut classes);
        self.write_atomic(&name, |w| {
            for c in &classes {
                let idx: Vec<String> = c.representative().signed_indices().iter().map(|i| i.to_string()).collect();
                writeln!(w, "{} {}", c.len(), idx.join(" "))?;
            }
            Ok(())
        })?;
        Ok(classes)
    }

    /// Class sample keyed by the content hashes of the representations.
    pub fn class_sample(
        &self,
        reps: &[Representation],
        alphabet: &GeneratorAlphabet,
        max_len: usize,
        shard_count: usize,
        gap_tol: f64,
    ) -> Result<SpectrumSample, CacheError> {
        let key = sample_key(reps, SampleKind::Classes, max_len, gap_tol);
        let name = format!("spectra-{key}.txt");
        let dims: Vec<usize> = reps.iter().map(|r| r.dimension()).collect();
        if let Some(lines) = self.read_lines(&name)? {
            let path = self.dir.join(&name);
            let entries = lines
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    parse_entry(l, alphabet.rank(), reps.len()).map_err(|reason| CacheError::Corrupt {
                        path: path.clone(),
                        line: i + 2,
                        reason,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(SpectrumSample::from_entries(SampleKind::Classes, max_len, dims, entries));
        }
        let sample = SpectrumSample::for_classes(reps, alphabet, max_len, shard_count, gap_tol)?;
        self.write_atomic(&name, |w| {
            for e in sample.entries() {
                writeln!(w, "{}", format_entry(e))?;
            }
            Ok(())
        })?;
        Ok(sample)
    }
}

/// Hex SHA-256 over the representation hashes and the sample parameters.
pub fn sample_key(reps: &[Representation], kind: SampleKind, max_len: usize, gap_tol: f64) -> String {
    let mut h = Sha256::new();
    for r in reps {
        h.update(r.content_hash().as_bytes());
    }
    h.update(format!("{kind:?}|{max_len}|{gap_tol:?}").as_bytes());
    h.finalize().iter().take(16).map(|b| format!("{b:02x}")).collect()
}

fn fmt_floats(x: &[f64]) -> String {
    x.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

/// `indices | λ ; μ ; holonomy ; lox | …` with one block per representation.
pub fn format_entry(e: &SampleEntry) -> String {
    let idx: Vec<String> = e.word.signed_indices().iter().map(|i| i.to_string()).collect();
    let mut s = idx.join(" ");
    for sp in &e.spectra {
        s.push_str(" | ");
        s.push_str(&fmt_floats(sp.lambda.entries()));
        s.push_str(" ; ");
        s.push_str(&fmt_floats(sp.mu.entries()));
        s.push_str(" ; ");
        match &sp.holonomy {
            Some(h) => s.push_str(&h.to_string()),
            None => s.push('.'),
        }
        s.push_str(if sp.loxodromic { " ; 1" } else { " ; 0" });
    }
    s
}

pub fn parse_entry(line: &str, rank: usize, reps: usize) -> Result<SampleEntry, String> {
    let mut parts = line.split(" | ");
    let word = Word::parse_indices(parts.next().ok_or("empty record")?, rank).map_err(|e| e.to_string())?;
    let floats = |t: &str| -> Result<Vec<f64>, String> {
        t.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| e.to_string()))
            .collect()
    };
    let mut spectra = Vec::with_capacity(reps);
    for block in parts {
        let f: Vec<&str> = block.split(" ; ").collect();
        if f.len() != 4 {
            return Err(format!("block `{block}` has {} fields", f.len()));
        }
        let holonomy = match f[2] {
            "." => None,
            t => Some(HolonomySign::parse(t).ok_or_else(|| format!("bad sign pattern `{t}`"))?),
        };
        spectra.push(RepSpectrum {
            lambda: ChamberVector::from_unsorted(floats(f[0])?),
            mu: ChamberVector::from_unsorted(floats(f[1])?),
            holonomy,
            loxodromic: f[3].trim() == "1",
        });
    }
    if spectra.len() != reps {
        return Err(format!("expected {reps} blocks, found {}", spectra.len()));
    }
    Ok(SampleEntry { word, spectra })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn rep() -> Representation {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let b = DMatrix::from_row_slice(2, 2, &[1.25, 0.75, 0.75, 1.25]);
        Representation::new("r", vec![a, b]).unwrap()
    }

    #[test]
    fn sample_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path());
        let alpha = GeneratorAlphabet::standard(2).unwrap();
        let reps = [rep()];
        let first = cache.class_sample(&reps, &alpha, 5, 3, 1e-6).unwrap();
        let second = cache.class_sample(&reps, &alpha, 5, 1, 1e-6).unwrap();
        assert_eq!(first.entries(), second.entries());
        let classes = cache.classes(&alpha, 5, 2).unwrap();
        assert_eq!(classes, cache.classes(&alpha, 5, 1).unwrap());
        assert_eq!(classes.len(), first.len());
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let lock = CacheLock::acquire(dir.path()).unwrap();
        assert!(matches!(CacheLock::acquire(dir.path()), Err(CacheError::Locked(_))));
        drop(lock);
        assert!(CacheLock::acquire(dir.path()).is_ok());
    }
}
