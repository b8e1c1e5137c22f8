//! Sweeps of the named results tables, one comparison CSV per table.

use anyhow::Context;
use clap::Args;
use qsdns::bench::{
    run_benchmark, run_session, table, table_names, write_comparison, BenchError, ComparisonRow, CsvMeta, PerfSample,
    TableRow, TableSpec,
};
use qsdns::crypto::AlgorithmSuite;
use qsdns::perf::{compose_profile, gap_pct, SuiteSample};
use qsdns::transport::{DohFraming, TransportKind};

use crate::child::ChildServer;
use crate::config::{Role, RunConfig};
use crate::{child_spec, plan_for, provider_for, CliError, Common};

/// EDNS payload for UDP rows. Loopback carries large datagrams, so signed
/// answers arrive whole instead of truncated.
const LOOPBACK_UDP_PAYLOAD: u16 = 65000;

/// Tables swept when none is named; the largest scaling tables must be
/// asked for explicitly.
const DEFAULT_SKIP: &[&str] = &["sl1-dot-w1000", "sl1-dot-w10000"];

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub common: Common,
    /// Table to sweep; repeatable. Every table except the largest scaling
    /// runs by default.
    #[arg(long = "table")]
    pub tables: Vec<String>,
    /// Only run the first N rows of each table.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Print the table names and exit.
    #[arg(long)]
    pub list: bool,
}

struct Measured {
    mean: PerfSample,
    queries: usize,
    failures: usize,
    first_error: Option<String>,
}

fn mean_sessions(rows: &[qsdns::bench::SessionResult]) -> PerfSample {
    if rows.is_empty() {
        return PerfSample::ZERO;
    }
    let n = rows.len() as f64;
    let avg = |f: fn(&qsdns::bench::SessionResult) -> f64| rows.iter().map(f).sum::<f64>() / n;
    PerfSample {
        t: 0.0,
        latency_ms: avg(|r| r.latency_ms),
        bandwidth_kb: avg(|r| r.bandwidth_kb),
        cpu_client: avg(|r| r.cpu_client),
        cpu_server: avg(|r| r.cpu_server),
        mem: avg(|r| r.mem),
    }
}

fn measure(cfg: &RunConfig) -> anyhow::Result<Measured> {
    let child = ChildServer::spawn(cfg, &child_spec(cfg))?;
    let provider = provider_for(cfg);
    let plan = plan_for(cfg);
    if cfg.workers == 1 {
        let report = run_benchmark(&plan, &child.target, &provider)?;
        return Ok(Measured {
            mean: report.mean(),
            queries: cfg.queries,
            failures: report.failures,
            first_error: report.first_error,
        });
    }
    let mut sessions = Vec::with_capacity(cfg.sessions);
    let (mut failures, mut first_error) = (0, None);
    for id in 0..cfg.sessions {
        match run_session(id, &plan, &child.target, &provider) {
            Ok(r) => sessions.push(r),
            Err(BenchError::PartialFailure { failed, result, .. }) => {
                failures += failed;
                first_error.get_or_insert_with(|| format!("session {id}: {failed} workers failed"));
                sessions.push(*result);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Measured { mean: mean_sessions(&sessions), queries: cfg.workers * cfg.sessions, failures, first_error })
}

fn row_config(base: &RunConfig, spec: &TableSpec, row: &TableRow, dnssec: bool, transport: TransportKind) -> anyhow::Result<RunConfig> {
    let mut cfg = base.clone();
    cfg.role = Role::Bench;
    cfg.suite = AlgorithmSuite::new(row.kem.unwrap_or(base.suite.kem), row.ds)?;
    cfg.dnssec = dnssec;
    cfg.dnssec_alg = if dnssec { row.dnssec_alg } else { None };
    if let Some(a) = cfg.dnssec_alg {
        cfg.suite = cfg.suite.with_dnssec(a)?;
    }
    cfg.transport = transport;
    cfg.workers = if transport == spec.transport { spec.workers } else { 1 };
    if transport == TransportKind::UdpPlain {
        cfg.udp_payload = LOOPBACK_UDP_PAYLOAD;
    }
    Ok(cfg)
}

fn comparison_row(cfg: &RunConfig, row: &TableRow, m: &Measured) -> ComparisonRow {
    ComparisonRow {
        kem: row.kem.map_or("-".into(), |k| k.to_string()),
        ds: cfg.suite.sig.to_string(),
        transport: cfg.transport.to_string(),
        dnssec: if cfg.dnssec { "on" } else { "off" }.into(),
        dnssec_alg: cfg.dnssec_alg.map_or("-".into(), |a| a.to_string()),
        level: cfg.suite.level() as u8,
        workers: cfg.workers,
        queries: m.queries,
        failures: m.failures,
        mean_latency: m.mean.latency_ms,
        mean_bandwidth: m.mean.bandwidth_kb,
        mean_cpu_client: m.mean.cpu_client,
        mean_cpu_server: m.mean.cpu_server,
        mean_mem: m.mean.mem,
        model_latency: None,
        model_bandwidth: None,
        gap_latency_pct: None,
        gap_bandwidth_pct: None,
    }
}

struct Tally {
    failures: usize,
    total: usize,
    first: Option<String>,
}

impl Tally {
    fn add(&mut self, m: &Measured) {
        self.failures += m.failures;
        self.total += m.queries;
        if self.first.is_none() {
            self.first.clone_from(&m.first_error);
        }
    }
}

/// Rows with a DNSSEC algorithm over a secure transport are measured on,
/// off, and as plain DNSSEC over UDP; the last two compose into the model.
fn sweep_row(base: &RunConfig, spec: &TableSpec, row: &TableRow, tally: &mut Tally) -> anyhow::Result<ComparisonRow> {
    let dnssec = row.dnssec_alg.is_some();
    let cfg = row_config(base, spec, row, dnssec, spec.transport)?;
    let on = measure(&cfg)?;
    tally.add(&on);
    let mut out = comparison_row(&cfg, row, &on);
    if dnssec && spec.transport != TransportKind::UdpPlain {
        let off_cfg = row_config(base, spec, row, false, spec.transport)?;
        let off = measure(&off_cfg)?;
        let udp_cfg = row_config(base, spec, row, true, TransportKind::UdpPlain)?;
        let udp = measure(&udp_cfg)?;
        tally.add(&off);
        tally.add(&udp);
        let model = compose_profile(
            true,
            &SuiteSample { suite: udp_cfg.suite, sample: udp.mean },
            &SuiteSample { suite: off_cfg.suite, sample: off.mean },
        )?;
        out.model_latency = Some(model.p_dns.latency_ms);
        out.model_bandwidth = Some(model.p_dns.bandwidth_kb);
        out.gap_latency_pct = gap_pct(model.p_dns.latency_ms, on.mean.latency_ms);
        out.gap_bandwidth_pct = gap_pct(model.p_dns.bandwidth_kb, on.mean.bandwidth_kb);
    }
    Ok(out)
}

pub fn run(args: MatrixArgs) -> Result<(), CliError> {
    if args.list {
        for name in table_names() {
            println!("{name}");
        }
        return Ok(());
    }
    let base = args.common.resolve(Role::Bench)?;
    let names: Vec<String> = if args.tables.is_empty() {
        table_names().iter().filter(|n| !DEFAULT_SKIP.contains(n)).map(|n| n.to_string()).collect()
    } else {
        args.tables.clone()
    };
    let specs = names
        .iter()
        .map(|n| table(n).with_context(|| format!("unknown table `{n}` (see --list)")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    std::fs::create_dir_all(&base.out).with_context(|| format!("creating {}", base.out.display()))?;
    let mut tally = Tally { failures: 0, total: 0, first: None };
    for spec in specs {
        let mut rows = Vec::new();
        for row in spec.rows.iter().take(args.limit.unwrap_or(usize::MAX)) {
            let r = sweep_row(&base, &spec, row, &mut tally)?;
            eprintln!(
                "{}: {} {} dnssec={} {:.2} kB {:.3} ms",
                spec.name, r.kem, r.ds, r.dnssec_alg, r.mean_bandwidth, r.mean_latency
            );
            rows.push(r);
        }
        let mut meta = CsvMeta::for_run(base.provider, &DohFraming::default());
        meta.push("table", spec.name);
        meta.push("queries", base.queries);
        meta.push("sessions", base.sessions);
        meta.push("seed", base.seed.map_or("-".to_string(), |s| s.to_string()));
        let path = base.out.join(format!("comparison_{}.csv", spec.name));
        write_comparison(&path, &meta, &rows, false).map_err(anyhow::Error::new)?;
        println!("{} -> {}", spec.name, path.display());
    }
    if tally.failures > 0 {
        return Err(CliError::Handshakes { failed: tally.failures, total: tally.total, first: tally.first.unwrap_or_default() });
    }
    Ok(())
}
