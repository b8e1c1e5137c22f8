use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::mean_of;
use super::{BenchError, PerfSample, SessionResult};
use crate::channel::{AEAD_NAME, PROTECTED_OVERHEAD};
use crate::crypto::ProviderMode;
use crate::transport::{Direction, DohFraming};

/// `# key: value` lines written above the CSV header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvMeta {
    pub entries: Vec<(String, String)>,
}

impl CsvMeta {
    /// Provider, AEAD, framing constants and host description.
    pub fn for_run(provider: ProviderMode, doh: &DohFraming) -> Self {
        let mut m = Self::default();
        m.push("provider", provider);
        m.push("aead", AEAD_NAME);
        m.push("record_overhead_bytes", PROTECTED_OVERHEAD);
        m.push("dot_frame_bytes", 2);
        m.push("doh_request_header_bytes", doh.overhead(Direction::Request));
        m.push("doh_response_header_bytes", doh.overhead(Direction::Response));
        m.push("kb", "1024 bytes");
        m.push("cache", "off");
        m.push(
            "host",
            format!(
                "{} {} vcpus={} mem_mib={:.1}",
                std::env::consts::OS,
                std::env::consts::ARCH,
                super::available_vcpus(),
                super::total_memory_mib()
            ),
        );
        m
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(w, "# {k}: {}", v.replace('\n', " "))?;
        }
        Ok(())
    }

    /// Reads the leading comment block of a results file.
    pub fn read(path: &Path) -> Result<Self, BenchError> {
        let mut m = Self::default();
        for line in BufReader::new(File::open(path)?).lines() {
            let line = line?;
            let Some(rest) = line.strip_prefix('#') else { break };
            if let Some((k, v)) = rest.trim().split_once(':') {
                m.push(k.trim(), v.trim());
            }
        }
        Ok(m)
    }
}

fn write_rows<T: Serialize>(path: &Path, meta: &CsvMeta, rows: &[T]) -> Result<(), BenchError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut file = File::create(path)?;
    meta.write_to(&mut file)?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn reader(path: &Path) -> Result<csv::Reader<File>, BenchError> {
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(File::open(path)?))
}

/// Per-query CSV.
pub fn write_samples(path: &Path, meta: &CsvMeta, samples: &[PerfSample]) -> Result<(), BenchError> {
    write_rows(path, meta, samples)
}

pub fn read_samples(path: &Path) -> Result<Vec<PerfSample>, BenchError> {
    Ok(reader(path)?.deserialize().collect::<Result<_, _>>()?)
}

/// Session CSV: one row per session.
pub fn write_sessions(path: &Path, meta: &CsvMeta, sessions: &[SessionResult]) -> Result<(), BenchError> {
    write_rows(path, meta, sessions)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub rows: usize,
    pub mean: PerfSample,
    /// From the `failures` metadata entry, 0 when absent.
    pub failures: usize,
}

/// Means of a per-query CSV.
pub fn summarize(path: &Path) -> Result<Summary, BenchError> {
    let samples = read_samples(path)?;
    if samples.is_empty() {
        return Err(BenchError::EmptyCsv);
    }
    let failures = CsvMeta::read(path)?.get("failures").and_then(|v| v.parse().ok()).unwrap_or(0);
    Ok(Summary { rows: samples.len(), mean: mean_of(&samples), failures })
}

/// One summary row of a comparison CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub kem: String,
    pub ds: String,
    pub transport: String,
    pub dnssec: String,
    pub dnssec_alg: String,
    pub level: u8,
    pub workers: usize,
    pub queries: usize,
    pub failures: usize,
    pub mean_latency: f64,
    pub mean_bandwidth: f64,
    pub mean_cpu_client: f64,
    pub mean_cpu_server: f64,
    pub mean_mem: f64,
    /// Composed prediction and its relative gap to the measurement, when a
    /// paired DNSSEC-off run exists.
    pub model_latency: Option<f64>,
    pub model_bandwidth: Option<f64>,
    pub gap_latency_pct: Option<f64>,
    pub gap_bandwidth_pct: Option<f64>,
}

/// Writes `rows`, or appends them below an existing file's rows.
pub fn write_comparison(path: &Path, meta: &CsvMeta, rows: &[ComparisonRow], append: bool) -> Result<(), BenchError> {
    let existing = append && path.metadata().map(|m| m.len() > 0).unwrap_or(false);
    if !existing {
        return write_rows(path, meta, rows);
    }
    let file = OpenOptions::new().append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_comparison(path: &Path) -> Result<Vec<ComparisonRow>, BenchError> {
    Ok(reader(path)?.deserialize().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(latency_ms: f64) -> PerfSample {
        PerfSample { t: 1.0, latency_ms, bandwidth_kb: 8.0, cpu_client: 1.0, cpu_server: 0.5, mem: 0.1 }
    }

    #[test]
    fn summarize_means_and_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        let mut meta = CsvMeta::for_run(ProviderMode::Simulated, &DohFraming::default());
        meta.push("failures", 2);
        write_samples(&path, &meta, &[sample(10.0), sample(20.0)]).unwrap();
        let s = summarize(&path).unwrap();
        assert_eq!((s.rows, s.failures), (2, 2));
        assert_eq!(s.mean.latency_ms, 15.0);
        let text = std::fs::read_to_string(&path).unwrap();
        let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(header, "timestamp,latency_ms,bandwidth_kb,cpu_client_pct,cpu_server_pct,mem_pct");
        assert_eq!(CsvMeta::read(&path).unwrap().get("aead"), Some(AEAD_NAME));
    }

    #[test]
    fn single_row_mean_is_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        write_samples(&path, &CsvMeta::default(), &[sample(7.5)]).unwrap();
        assert_eq!(summarize(&path).unwrap().mean, sample(7.5));
    }

    #[test]
    fn empty_csv_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        write_samples(&path, &CsvMeta::default(), &[]).unwrap();
        assert!(matches!(summarize(&path), Err(BenchError::EmptyCsv)));
        std::fs::write(&path, "").unwrap();
        assert!(matches!(summarize(&path), Err(BenchError::EmptyCsv)));
    }

    #[test]
    fn comparison_append_keeps_one_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cmp.csv");
        let row = ComparisonRow {
            kem: "mlkem512".into(),
            ds: "mldsa44".into(),
            transport: "dot".into(),
            dnssec: "off".into(),
            dnssec_alg: String::new(),
            level: 1,
            workers: 1,
            queries: 100,
            failures: 0,
            mean_latency: 9.1,
            mean_bandwidth: 8.07,
            mean_cpu_client: 5.8,
            mean_cpu_server: 0.5,
            mean_mem: 0.165,
            model_latency: None,
            model_bandwidth: None,
            gap_latency_pct: None,
            gap_bandwidth_pct: None,
        };
        write_comparison(&path, &CsvMeta::default(), std::slice::from_ref(&row), true).unwrap();
        write_comparison(&path, &CsvMeta::default(), std::slice::from_ref(&row), true).unwrap();
        let rows = read_comparison(&path).unwrap();
        assert_eq!(rows, vec![row.clone(), row]);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches("kem,ds").count(), 1);
    }

    #[test]
    fn session_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = SessionResult { session_id: 3, latency_ms: 12.0, bandwidth_kb: 800.0, cpu_client: 0.0, cpu_server: 0.0, mem: 0.0, failures: 0, workers: 100 };
        write_sessions(&path, &CsvMeta::default(), &[s]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "session_id,latency_ms,bandwidth_kb\n3,12.0,800.0\n");
    }
}
