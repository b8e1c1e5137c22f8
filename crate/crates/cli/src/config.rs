//! Run configuration: a TOML file, overridden by flags and `QSDNS_*`
//! environment variables.

use std::net::{IpAddr, Ipv4Addr};
use std::path::{Path, PathBuf};

use clap::Args;
use qsdns::crypto::{AlgorithmId, AlgorithmSuite, CryptoError, Kind, ProviderMode};
use qsdns::dns::DEFAULT_EDNS_PAYLOAD;
use qsdns::policy::{PolicyMode, RateLimitConfig};
use qsdns::resolver::ResolveMode;
use qsdns::transport::TransportKind;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error(transparent)]
    UnknownAlgorithm(#[from] CryptoError),
    #[error("conflicting flags: {0}")]
    ConflictingFlags(String),
    #[error("invalid {key}: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid { key, reason: reason.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Server,
    Client,
    Bench,
    SessionBench,
}

/// Values that may appear on the command line, in the environment or in the
/// top level of the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Key exchange group.
    #[arg(long, env = "QSDNS_KEM")]
    pub kem: Option<String>,
    /// Signature algorithm of the server certificate.
    #[arg(long, env = "QSDNS_DS")]
    pub ds: Option<String>,
    /// Zone signing algorithm.
    #[arg(long, env = "QSDNS_DNSSEC_ALG")]
    pub dnssec_alg: Option<String>,
    /// dot, doh or udp.
    #[arg(long, env = "QSDNS_TRANSPORT")]
    pub transport: Option<String>,
    /// Shorthand for `--transport dot`.
    #[arg(long)]
    pub dot: bool,
    /// Shorthand for `--transport doh`.
    #[arg(long)]
    pub doh: bool,
    /// on or off.
    #[arg(long, env = "QSDNS_DNSSEC", value_parser = parse_on_off)]
    pub dnssec: Option<bool>,
    #[arg(long, env = "QSDNS_POLICY")]
    pub policy: Option<String>,
    #[arg(long, env = "QSDNS_QUERIES")]
    pub queries: Option<usize>,
    #[arg(long, env = "QSDNS_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, env = "QSDNS_SESSIONS")]
    pub sessions: Option<usize>,
    #[arg(long, env = "QSDNS_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, env = "QSDNS_SEED")]
    pub seed: Option<u64>,
    /// real or simulated.
    #[arg(long, env = "QSDNS_PROVIDER")]
    pub provider: Option<String>,
}

pub fn parse_on_off(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        _ => Err(format!("expected on or off, got `{s}`")),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    kem: Option<String>,
    ds: Option<String>,
    dnssec_alg: Option<String>,
    transport: Option<String>,
    dnssec: Option<bool>,
    policy: Option<String>,
    queries: Option<usize>,
    workers: Option<usize>,
    sessions: Option<usize>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    provider: Option<String>,
    domain: Option<String>,
    udp_payload: Option<u16>,
    timeout_secs: Option<u64>,
    #[serde(default)]
    server: ServerFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServerFile {
    bind: Option<IpAddr>,
    kems: Option<Vec<String>>,
    transports: Option<Vec<String>>,
    dot_port: Option<u16>,
    doh_port: Option<u16>,
    udp_port: Option<u16>,
    stats_port: Option<u16>,
    zone: Option<PathBuf>,
    mode: Option<String>,
    validate: Option<bool>,
    cache: Option<bool>,
    policy: Option<String>,
    workers: Option<usize>,
    server_name: Option<String>,
    rate_limit: Option<RateLimitFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RateLimitFile {
    capacity: f64,
    refill_rate: f64,
    #[serde(default)]
    per_tuple: bool,
}

pub const DEFAULT_DOT_PORT: u16 = 8853;
pub const DEFAULT_DOH_PORT: u16 = 8443;
pub const DEFAULT_UDP_PORT: u16 = 5353;

#[derive(Debug, Clone)]
pub struct ServerSettings {
    pub bind: IpAddr,
    pub kems: Vec<AlgorithmId>,
    pub dot_port: Option<u16>,
    pub doh_port: Option<u16>,
    pub udp_port: Option<u16>,
    pub stats_port: Option<u16>,
    pub zone: Option<PathBuf>,
    pub mode: ResolveMode,
    pub validate: bool,
    pub cache: bool,
    pub policy: PolicyMode,
    pub workers: usize,
    pub server_name: String,
    pub rate_limit: Option<RateLimitConfig>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub role: Role,
    pub path: Option<PathBuf>,
    pub suite: AlgorithmSuite,
    pub dnssec_alg: Option<AlgorithmId>,
    pub transport: TransportKind,
    pub dnssec: bool,
    /// Policy this side enforces (server) or declares (client).
    pub policy: PolicyMode,
    pub queries: usize,
    pub workers: usize,
    pub sessions: usize,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub provider: ProviderMode,
    pub domain: String,
    pub udp_payload: u16,
    pub timeout_secs: u64,
    pub server: ServerSettings,
}

fn read_file(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Read { path: path.to_path_buf(), reason: e.to_string() })?;
    toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), reason: e.to_string() })
}

fn parse_with<T>(key: &'static str, value: Option<&str>, default: T) -> Result<T, ConfigError>
where
    T: std::str::FromStr<Err = String>,
{
    value.map_or(Ok(default), |v| v.parse().map_err(|e| invalid(key, e)))
}

fn at_least_one(key: &'static str, v: usize) -> Result<usize, ConfigError> {
    if v == 0 {
        Err(invalid(key, "must be at least 1"))
    } else {
        Ok(v)
    }
}

fn transport_choice(o: &Overrides, file: Option<&str>) -> Result<TransportKind, ConfigError> {
    let shorthand = match (o.dot, o.doh) {
        (true, true) => return Err(ConfigError::ConflictingFlags("--dot and --doh".into())),
        (true, false) => Some(TransportKind::Dot),
        (false, true) => Some(TransportKind::Doh),
        (false, false) => None,
    };
    let explicit = o.transport.as_deref().map(|t| t.parse::<TransportKind>().map_err(|e| invalid("transport", e))).transpose()?;
    match (shorthand, explicit) {
        (Some(a), Some(b)) if a != b => {
            Err(ConfigError::ConflictingFlags(format!("--{} and --transport {b}", if a == TransportKind::Dot { "dot" } else { "doh" })))
        }
        (Some(a), _) | (None, Some(a)) => Ok(a),
        (None, None) => parse_with("transport", file, TransportKind::Dot),
    }
}

/// Resolves the file (when given) and overrides into a validated config.
/// Flags win over the file; algorithm names are checked against the
/// registry, including their kind.
pub fn parse_config(path: Option<&Path>, overrides: &Overrides, role: Role) -> Result<RunConfig, ConfigError> {
    let file = match path {
        Some(p) => read_file(p)?,
        None => FileConfig::default(),
    };
    let o = overrides;
    let pick = |flag: &Option<String>, from_file: &Option<String>| flag.clone().or_else(|| from_file.clone());

    let kem = AlgorithmId::lookup_kind(&pick(&o.kem, &file.kem).unwrap_or_else(|| "mlkem512".into()), Kind::Kem)?;
    let ds = AlgorithmId::lookup_kind(&pick(&o.ds, &file.ds).unwrap_or_else(|| "mldsa44".into()), Kind::Signature)?;
    let dnssec_alg =
        pick(&o.dnssec_alg, &file.dnssec_alg).map(|n| AlgorithmId::lookup_kind(&n, Kind::Signature)).transpose()?;
    // Naming a zone algorithm turns DNSSEC on unless it is switched off
    // explicitly; with DNSSEC off nothing is signed.
    let dnssec = o.dnssec.or(file.dnssec).unwrap_or(dnssec_alg.is_some());
    let dnssec_alg = if dnssec { dnssec_alg.or(Some(ds)) } else { None };
    let mut suite = AlgorithmSuite::new(kem, ds)?;
    if let Some(a) = dnssec_alg {
        suite = suite.with_dnssec(a)?;
    }
    let transport = transport_choice(o, file.transport.as_deref())?;
    let policy = parse_with("policy", pick(&o.policy, &file.policy).as_deref(), PolicyMode::AllowLegacy)?;
    let provider = parse_with("provider", pick(&o.provider, &file.provider).as_deref(), ProviderMode::Simulated)?;
    let workers = at_least_one("workers", o.workers.or(file.workers).unwrap_or(1))?;

    let s = file.server;
    let kems = match s.kems {
        Some(names) => names.iter().map(|n| AlgorithmId::lookup_kind(n, Kind::Kem)).collect::<Result<Vec<_>, _>>()?,
        None => AlgorithmId::all_of(Kind::Kem).collect(),
    };
    let listeners = match s.transports {
        Some(names) => names
            .iter()
            .map(|n| n.parse::<TransportKind>().map_err(|e| invalid("server.transports", e)))
            .collect::<Result<Vec<_>, _>>()?,
        None => vec![TransportKind::Dot, TransportKind::Doh, TransportKind::UdpPlain],
    };
    let port = |kind, configured: Option<u16>, default| listeners.contains(&kind).then(|| configured.unwrap_or(default));
    let server_policy = match (role, &o.policy) {
        (Role::Server, Some(_)) => policy,
        _ => parse_with("server.policy", s.policy.as_deref(), policy)?,
    };
    let signed = dnssec_alg.is_some();
    let server = ServerSettings {
        bind: s.bind.unwrap_or(IpAddr::V4(Ipv4Addr::LOCALHOST)),
        kems,
        dot_port: port(TransportKind::Dot, s.dot_port, DEFAULT_DOT_PORT),
        doh_port: port(TransportKind::Doh, s.doh_port, DEFAULT_DOH_PORT),
        udp_port: port(TransportKind::UdpPlain, s.udp_port, DEFAULT_UDP_PORT),
        stats_port: s.stats_port,
        zone: s.zone,
        mode: s.mode.as_deref().map_or(Ok(ResolveMode::Stub), |m| m.parse().map_err(|e: String| invalid("server.mode", e)))?,
        validate: s.validate.unwrap_or(signed),
        cache: s.cache.unwrap_or(false),
        policy: server_policy,
        workers: at_least_one(
            "server.workers",
            if role == Role::Server { o.workers.or(s.workers).unwrap_or(4) } else { s.workers.unwrap_or(4) },
        )?,
        server_name: s.server_name.unwrap_or_else(|| "dns.example".into()),
        rate_limit: s.rate_limit.map(|r| RateLimitConfig { capacity: r.capacity, refill_rate: r.refill_rate, per_tuple: r.per_tuple }),
    };
    if server.validate && !signed {
        return Err(invalid("server.validate", "validation needs a signed zone (set dnssec_alg)"));
    }

    Ok(RunConfig {
        role,
        path: path.map(Path::to_path_buf),
        suite,
        dnssec_alg,
        transport,
        dnssec,
        policy,
        queries: at_least_one("queries", o.queries.or(file.queries).unwrap_or(100))?,
        workers,
        sessions: at_least_one("sessions", o.sessions.or(file.sessions).unwrap_or(1))?,
        out: o.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("results")),
        seed: o.seed.or(file.seed),
        provider,
        domain: file.domain.unwrap_or_else(|| "example.com".into()),
        udp_payload: file.udp_payload.unwrap_or(DEFAULT_EDNS_PAYLOAD),
        timeout_secs: file.timeout_secs.unwrap_or(60),
        server,
    })
}
