mod child;
mod config;
mod matrix;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use qsdns::bench::{
    run_benchmark, run_session, write_samples, write_sessions, BenchError, BenchPlan, CsvMeta, ServerSpec, Target,
};
use qsdns::channel::ClientConfig;
use qsdns::crypto::Provider;
use qsdns::dns::{build_query_with, format_record, RecordType};
use qsdns::resolver::{query_once, query_udp, serve, DEFAULT_ZONE};
use qsdns::transport::TransportKind;
use thiserror::Error;

use crate::child::{remote_target, write_ready_file, ChildServer, ChildSpec};
use crate::config::{parse_config, ConfigError, Overrides, Role, RunConfig};

const EXIT_SETUP: u8 = 2;
const EXIT_HANDSHAKES: u8 = 3;

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0:#}")]
    Setup(#[from] anyhow::Error),
    #[error("{failed} of {total} queries failed; first error: {first}")]
    Handshakes { failed: usize, total: usize, first: String },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Handshakes { .. } => EXIT_HANDSHAKES,
            _ => EXIT_SETUP,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qsdns", version, about = "DNS over post-quantum secure channels: resolver, client and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the resolver until killed or until --duration elapses.
    Serve(ServeArgs),
    /// Send one query and print the answer and handshake timings.
    Query(QueryArgs),
    /// Sequential single-query transactions; writes a per-query CSV.
    Bench(BenchArgs),
    /// Sessions of concurrent workers; writes a per-session CSV.
    SessionBench(BenchArgs),
    /// Sweep the configuration grid of one or more results tables.
    Matrix(matrix::MatrixArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long, env = "QSDNS_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

impl Common {
    fn resolve(&self, role: Role) -> Result<RunConfig, ConfigError> {
        parse_config(self.config.as_deref(), &self.overrides, role)
    }
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    bind: Option<std::net::IpAddr>,
    /// 0 picks a free port.
    #[arg(long)]
    dot_port: Option<u16>,
    #[arg(long)]
    doh_port: Option<u16>,
    #[arg(long)]
    udp_port: Option<u16>,
    /// Counter snapshot endpoint.
    #[arg(long)]
    stats_port: Option<u16>,
    /// Zone file; a built-in example.com zone otherwise.
    #[arg(long)]
    zone: Option<PathBuf>,
    /// Written once listening, one `kind address` line per listener.
    #[arg(long)]
    ready_file: Option<PathBuf>,
    /// Where to write the trust anchors clients need.
    #[arg(long)]
    trust_out: Option<PathBuf>,
    /// Stop after this many seconds.
    #[arg(long)]
    duration: Option<u64>,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[command(flatten)]
    common: Common,
    /// Resolver address.
    #[arg(long)]
    server: SocketAddr,
    /// Trust file written by `serve --trust-out`.
    #[arg(long)]
    trust: Option<PathBuf>,
    #[arg(long, default_value = "example.com")]
    name: String,
    #[arg(long = "type", default_value = "A")]
    qtype: String,
    /// Print the handshake transcript.
    #[arg(long)]
    dump: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: Common,
    /// Benchmark an already running resolver instead of spawning one.
    #[arg(long)]
    pub server: Option<SocketAddr>,
    #[arg(long, requires = "server")]
    pub trust: Option<PathBuf>,
    /// Counter endpoint of the remote resolver.
    #[arg(long, requires = "server")]
    pub stats: Option<SocketAddr>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve(a) => cmd_serve(a),
        Command::Query(a) => cmd_query(a),
        Command::Bench(a) => cmd_bench(a),
        Command::SessionBench(a) => cmd_session_bench(a),
        Command::Matrix(a) => matrix::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qsdns: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn provider_for(cfg: &RunConfig) -> Provider {
    Provider::new(cfg.provider, cfg.seed)
}

fn cmd_serve(args: ServeArgs) -> Result<(), CliError> {
    let mut cfg = args.common.resolve(Role::Server)?;
    let s = &mut cfg.server;
    if let Some(b) = args.bind {
        s.bind = b;
    }
    for (port, flag) in [(&mut s.dot_port, args.dot_port), (&mut s.doh_port, args.doh_port), (&mut s.udp_port, args.udp_port)] {
        if flag.is_some() {
            *port = flag;
        }
    }
    if args.stats_port.is_some() {
        s.stats_port = args.stats_port;
    }
    if args.zone.is_some() {
        s.zone = args.zone;
    }
    let zone_text = match &s.zone {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("zone file {}", p.display()))?,
        None => DEFAULT_ZONE.to_string(),
    };
    let spec = ServerSpec {
        kems: s.kems.clone(),
        sig: cfg.suite.sig,
        dnssec_alg: cfg.dnssec_alg,
        validate: s.validate,
        mode: s.mode,
        cache: s.cache,
        zone_text,
        policy: s.policy,
        workers: s.workers,
        rate_limit: s.rate_limit,
        bind: s.bind,
        dot_port: s.dot_port,
        doh_port: s.doh_port,
        udp_port: s.udp_port,
        stats_port: s.stats_port,
        server_name: s.server_name.clone(),
        doh: Default::default(),
    };
    let provider = Arc::new(provider_for(&cfg));
    let (resolver, serve_cfg, trust) = spec.build(&provider).context("building resolver")?;
    let server = serve(Arc::new(resolver), provider, serve_cfg).context("starting listeners")?;
    if let Some(p) = &args.trust_out {
        std::fs::write(p, trust.to_text()).with_context(|| format!("writing {}", p.display()))?;
    }
    let listeners =
        [("dot", server.dot), ("doh", server.doh), ("udp", server.udp), ("stats", server.stats_addr)];
    for (kind, addr) in listeners.iter().filter_map(|(k, a)| a.map(|a| (k, a))) {
        eprintln!("listening {kind} {addr}");
    }
    eprintln!("certificate {} policy {}", cfg.suite.sig, cfg.server.policy);
    if let Some(p) = &args.ready_file {
        write_ready_file(p, &listeners)?;
    }
    match args.duration {
        Some(secs) => std::thread::sleep(Duration::from_secs(secs)),
        None => loop {
            std::thread::park();
        },
    }
    eprint!("{}", server.shutdown());
    Ok(())
}

fn cmd_query(args: QueryArgs) -> Result<(), CliError> {
    let cfg = args.common.resolve(Role::Client)?;
    let qtype = RecordType::from_mnemonic(&args.qtype)
        .ok_or_else(|| anyhow::anyhow!("unknown record type `{}`", args.qtype))?;
    let query = build_query_with(&args.name, qtype, cfg.dnssec, cfg.udp_payload).context("building query")?;
    let timeout = Duration::from_secs(cfg.timeout_secs);
    if cfg.transport == TransportKind::UdpPlain {
        let (resp, n) = query_udp(args.server, &query, timeout).context("udp query")?;
        println!(";; rcode {:?} tc {} bytes {n}", resp.flags.rcode, resp.flags.truncated);
        for rr in &resp.answers {
            println!("{}", format_record(rr));
        }
        return Ok(());
    }
    let target = remote_target(args.server, &cfg, args.trust.as_ref(), None)?;
    let provider = provider_for(&cfg);
    let client = ClientConfig {
        kems: vec![cfg.suite.kem],
        sigs: vec![cfg.suite.sig],
        policy: cfg.policy,
        server_name: target.server_name.clone(),
        trust: target.trust.clone(),
        now: None,
    };
    let out = match query_once(args.server, cfg.transport, &provider, client, &target.doh_framing, &query, timeout) {
        Ok(out) => out,
        Err(e) => return Err(CliError::Handshakes { failed: 1, total: 1, first: e.to_string() }),
    };
    let resp = out.responses.first().context("no response")?;
    println!(";; suite {} over {}", out.suite, cfg.transport);
    println!(";; rcode {:?} ad {} bytes {}", resp.flags.rcode, resp.flags.authenticated_data, out.bytes());
    for rr in resp.answers.iter() {
        println!("{}", format_record(rr));
    }
    let t = &out.timings;
    println!(
        ";; ch {:?} sh {:?} kem {:?} sig {:?} kdf {:?} fin {:?} term {:?} total {:?}",
        t.t_ch, t.t_sh, t.t_kem, t.t_sig, t.t_kdf, t.t_fin, t.t_term, out.latency
    );
    if args.dump {
        print!("{}", out.transcript.dump());
    }
    Ok(())
}

pub fn plan_for(cfg: &RunConfig) -> BenchPlan {
    let mut plan = BenchPlan::new(cfg.suite, cfg.transport);
    plan.dnssec = cfg.dnssec;
    plan.domain = cfg.domain.clone();
    plan.queries = cfg.queries;
    plan.workers = cfg.workers;
    plan.sessions = cfg.sessions;
    plan.policy = cfg.policy;
    plan.udp_payload = cfg.udp_payload;
    plan.timeout = Duration::from_secs(cfg.timeout_secs);
    plan
}

/// The resolver under test: the remote one named on the command line, or a
/// child process. The child handle must outlive the run.
pub fn target_for(args: &BenchArgs, cfg: &RunConfig, spec: &ChildSpec) -> anyhow::Result<(Target, Option<ChildServer>)> {
    match args.server {
        Some(addr) => Ok((remote_target(addr, cfg, args.trust.as_ref(), args.stats)?, None)),
        None => {
            let child = ChildServer::spawn(cfg, spec)?;
            Ok((child.target.clone(), Some(child)))
        }
    }
}

pub fn run_meta(cfg: &RunConfig, target: &Target) -> CsvMeta {
    let mut meta = CsvMeta::for_run(cfg.provider, &target.doh_framing);
    meta.push("kem", cfg.suite.kem);
    meta.push("ds", cfg.suite.sig);
    meta.push("transport", cfg.transport);
    meta.push("dnssec", if cfg.dnssec { "on" } else { "off" });
    meta.push("dnssec_alg", cfg.dnssec_alg.map_or("-", |a| a.name()));
    meta.push("policy", cfg.policy);
    meta.push("seed", cfg.seed.map_or("-".to_string(), |s| s.to_string()));
    meta
}

fn output_path(cfg: &RunConfig, prefix: &str) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let dnssec = match cfg.dnssec_alg {
        Some(a) => format!("dnssec-{a}"),
        None => "nodnssec".into(),
    };
    let name = format!("{prefix}_{}_{}_{}_{dnssec}.csv", cfg.suite.kem, cfg.suite.sig, cfg.transport);
    Ok(cfg.out.join(name))
}

pub fn child_spec(cfg: &RunConfig) -> ChildSpec {
    ChildSpec { sig: cfg.suite.sig, dnssec_alg: cfg.dnssec_alg, workers: cfg.server.workers.max(cfg.workers.min(256)) }
}

fn bench_error(e: BenchError) -> CliError {
    CliError::Setup(anyhow::Error::new(e))
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let cfg = args.common.resolve(Role::Bench)?;
    let (target, _child) = target_for(&args, &cfg, &child_spec(&cfg))?;
    let provider = provider_for(&cfg);
    let report = run_benchmark(&plan_for(&cfg), &target, &provider).map_err(bench_error)?;
    let path = output_path(&cfg, "queries")?;
    let mut meta = run_meta(&cfg, &target);
    meta.push("queries", cfg.queries);
    meta.push("failures", report.failures);
    write_samples(&path, &meta, &report.samples).map_err(bench_error)?;
    let m = report.mean();
    println!(
        "{} {} {}: {} ok, {} failed, mean latency {:.3} ms, mean bandwidth {:.2} kB -> {}",
        cfg.suite.kem,
        cfg.suite.sig,
        cfg.transport,
        report.samples.len(),
        report.failures,
        m.latency_ms,
        m.bandwidth_kb,
        path.display()
    );
    handshake_result(report.failures, cfg.queries, report.first_error)
}

fn handshake_result(failed: usize, total: usize, first: Option<String>) -> Result<(), CliError> {
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Handshakes { failed, total, first: first.unwrap_or_default() })
    }
}

fn cmd_session_bench(args: BenchArgs) -> Result<(), CliError> {
    let cfg = args.common.resolve(Role::SessionBench)?;
    let (target, _child) = target_for(&args, &cfg, &child_spec(&cfg))?;
    let provider = provider_for(&cfg);
    let plan = plan_for(&cfg);
    let mut sessions = Vec::with_capacity(cfg.sessions);
    let (mut failed, mut first) = (0, None);
    for id in 0..cfg.sessions {
        match run_session(id, &plan, &target, &provider) {
            Ok(r) => sessions.push(r),
            Err(BenchError::PartialFailure { failed: f, result, .. }) => {
                failed += f;
                first.get_or_insert_with(|| format!("session {id}: {f} workers failed"));
                sessions.push(*result);
            }
            Err(e) => return Err(bench_error(e)),
        }
    }
    let path = output_path(&cfg, &format!("sessions_w{}", cfg.workers))?;
    let mut meta = run_meta(&cfg, &target);
    meta.push("workers", cfg.workers);
    meta.push("sessions", cfg.sessions);
    meta.push("failures", failed);
    write_sessions(&path, &meta, &sessions).map_err(bench_error)?;
    let n = sessions.len().max(1) as f64;
    println!(
        "{} {} {} W={}: {} sessions, mean latency {:.3} ms, mean bandwidth {:.2} kB -> {}",
        cfg.suite.kem,
        cfg.suite.sig,
        cfg.transport,
        cfg.workers,
        sessions.len(),
        sessions.iter().map(|s| s.latency_ms).sum::<f64>() / n,
        sessions.iter().map(|s| s.bandwidth_kb).sum::<f64>() / n,
        path.display()
    );
    handshake_result(failed, cfg.workers * cfg.sessions, first)
}
