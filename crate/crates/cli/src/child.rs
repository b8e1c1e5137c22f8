//! Loopback benchmarks run the resolver in a second `qsdns serve` process.
//! The child announces its listeners through a ready file and its trust
//! anchors through a trust file.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use qsdns::bench::{StatsSource, Target};
use qsdns::channel::TrustStore;
use qsdns::crypto::AlgorithmId;
use qsdns::transport::DohFraming;

use crate::config::RunConfig;

const READY_TIMEOUT: Duration = Duration::from_secs(60);

/// Listener addresses as written to a ready file, one `kind addr` per line.
pub fn write_ready_file(path: &Path, entries: &[(&str, Option<SocketAddr>)]) -> anyhow::Result<()> {
    let text: String = entries.iter().filter_map(|(k, a)| a.map(|a| format!("{k} {a}\n"))).collect();
    // Write then rename so a reader never sees a partial file.
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_ready_file(path: &Path) -> anyhow::Result<BTreeMap<String, SocketAddr>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (k, a) = l.split_once(' ').with_context(|| format!("bad ready line `{l}`"))?;
            Ok((k.to_string(), a.trim().parse().with_context(|| format!("bad address in `{l}`"))?))
        })
        .collect()
}

pub fn read_trust_file(path: &Path) -> anyhow::Result<TrustStore> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    TrustStore::from_text(&text).with_context(|| format!("parsing {}", path.display()))
}

/// What the child should serve.
#[derive(Debug, Clone)]
pub struct ChildSpec {
    pub sig: AlgorithmId,
    /// Zone signing algorithm; `None` serves an unsigned zone.
    pub dnssec_alg: Option<AlgorithmId>,
    pub workers: usize,
}

/// A `qsdns serve` child, killed on drop.
pub struct ChildServer {
    child: Child,
    pub target: Target,
    _dir: tempfile::TempDir,
}

impl ChildServer {
    pub fn spawn(cfg: &RunConfig, spec: &ChildSpec) -> anyhow::Result<Self> {
        let dir = tempfile::tempdir().context("creating scratch directory")?;
        let ready = dir.path().join("ready");
        let trust = dir.path().join("trust");
        let exe = std::env::current_exe().context("locating own executable")?;
        let mut cmd = Command::new(exe);
        cmd.arg("serve");
        if let Some(p) = &cfg.path {
            cmd.arg("--config").arg(p);
        }
        cmd.args(["--kem", cfg.suite.kem.name(), "--ds", spec.sig.name()])
            .args(["--provider", cfg.provider.as_str(), "--policy", cfg.server.policy.as_str()])
            .args(["--workers", &spec.workers.to_string()])
            .args(["--bind", &cfg.server.bind.to_string()])
            .args(["--dot-port", "0", "--doh-port", "0", "--udp-port", "0", "--stats-port", "0"])
            .arg("--ready-file")
            .arg(&ready)
            .arg("--trust-out")
            .arg(&trust);
        match spec.dnssec_alg {
            Some(a) => cmd.args(["--dnssec", "on", "--dnssec-alg", a.name()]),
            None => cmd.args(["--dnssec", "off"]),
        };
        if let Some(seed) = cfg.seed {
            cmd.args(["--seed", &seed.to_string()]);
        }
        // Flags above win; stop inherited variables from filling the gaps.
        for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("QSDNS_")) {
            cmd.env_remove(k);
        }
        let log = std::fs::File::create(dir.path().join("stderr")).context("creating resolver log")?;
        cmd.stdin(Stdio::null()).stdout(Stdio::null()).stderr(log);
        let child = cmd.spawn().context("spawning resolver process")?;
        let mut server = Self {
            child,
            target: Target {
                dot: None,
                doh: None,
                udp: None,
                trust: TrustStore::new(),
                server_name: cfg.server.server_name.clone(),
                doh_framing: DohFraming::default(),
                stats: StatsSource::None,
            },
            _dir: dir,
        };
        if let Err(e) = server.wait_ready(&ready, &trust) {
            let log = std::fs::read_to_string(server._dir.path().join("stderr")).unwrap_or_default();
            return Err(match log.trim() {
                "" => e,
                log => e.context(log.to_string()),
            });
        }
        Ok(server)
    }

    fn wait_ready(&mut self, ready: &Path, trust: &Path) -> anyhow::Result<()> {
        let started = Instant::now();
        while !ready.exists() {
            if let Some(status) = self.child.try_wait()? {
                bail!("resolver process exited during startup ({status})");
            }
            if started.elapsed() > READY_TIMEOUT {
                bail!("resolver process not ready after {READY_TIMEOUT:?}");
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        let addrs = read_ready_file(ready)?;
        self.target.dot = addrs.get("dot").copied();
        self.target.doh = addrs.get("doh").copied();
        self.target.udp = addrs.get("udp").copied();
        self.target.stats = addrs.get("stats").map_or(StatsSource::None, |a| StatsSource::Remote(*a));
        self.target.trust = read_trust_file(trust)?;
        Ok(())
    }
}

impl Drop for ChildServer {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A resolver started elsewhere.
pub fn remote_target(
    addr: SocketAddr,
    cfg: &RunConfig,
    trust: Option<&PathBuf>,
    stats: Option<SocketAddr>,
) -> anyhow::Result<Target> {
    let trust = match trust {
        Some(p) => read_trust_file(p)?,
        None if cfg.transport == qsdns::transport::TransportKind::UdpPlain => TrustStore::new(),
        None => bail!("--trust is required for {}", cfg.transport),
    };
    let mut target = Target {
        dot: None,
        doh: None,
        udp: None,
        trust,
        server_name: cfg.server.server_name.clone(),
        doh_framing: DohFraming::default(),
        stats: stats.map_or(StatsSource::None, StatsSource::Remote),
    };
    match cfg.transport {
        qsdns::transport::TransportKind::Dot => target.dot = Some(addr),
        qsdns::transport::TransportKind::Doh => target.doh = Some(addr),
        qsdns::transport::TransportKind::UdpPlain => target.udp = Some(addr),
    }
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ready_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ready");
        let a: SocketAddr = "127.0.0.1:4000".parse().unwrap();
        write_ready_file(&path, &[("dot", Some(a)), ("doh", None), ("stats", Some(a))]).unwrap();
        let m = read_ready_file(&path).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m["dot"], a);
        assert!(!path.with_extension("partial").exists());
    }
}
