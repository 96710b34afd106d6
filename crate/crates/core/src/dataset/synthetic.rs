//! Seeded synthetic traffic with planted anomaly regimes.
//!
//! Traffic is generated as consecutive 5-second windows. Each window is either
//! normal (web, DNS, bulk transfer or ICMP session) or carries one anomaly
//! regime:
//!
//! * flood: elevated packet count over the whole window, hence short gaps;
//! * beacon: near-periodic packets of constant size (low spectral entropy);
//! * exfiltration: bursts of near-MTU packets.
//!
//! The `hard` preset narrows the gap between regimes and normal traffic and
//! swaps a fifth of the anomaly labels with normal windows, which makes deep
//! ensembles overfit.

use super::flow::{FlowRecord, Protocol, TcpFlags};
use crate::error::{Error, Result};
use crate::seed::{rng_for, STREAM_GENERATOR};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

pub const GENERATOR_WINDOW_SECONDS: f64 = 5.0;
const WINDOW_MICROS: u64 = 5_000_000;
/// Fraction of anomaly labels swapped with normal windows in the hard preset.
const HARD_LABEL_SWAP: f64 = 0.4;
pub const INTERVALS_CSV_HEADER: &str = "start,end";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Difficulty {
    Easy,
    Hard,
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Difficulty::Easy => "easy",
            Difficulty::Hard => "hard",
        })
    }
}

impl FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Difficulty::Easy),
            "hard" => Ok(Difficulty::Hard),
            other => Err(Error::Config(format!("unknown difficulty `{other}` (easy|hard)"))),
        }
    }
}

/// Relative weights of the anomaly regimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeMix {
    pub flood: f64,
    pub beacon: f64,
    pub exfiltration: f64,
}

impl Default for RegimeMix {
    fn default() -> Self {
        Self {
            flood: 0.6,
            beacon: 0.2,
            exfiltration: 0.2,
        }
    }
}

impl RegimeMix {
    fn weights(&self) -> [f64; 3] {
        [self.flood, self.beacon, self.exfiltration]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    /// Number of 5-second windows to generate.
    pub n_flows: usize,
    pub anomaly_rate: f64,
    pub regime_mix: RegimeMix,
    pub difficulty: Difficulty,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_flows: 1300,
            anomaly_rate: 0.10,
            regime_mix: RegimeMix::default(),
            difficulty: Difficulty::Easy,
            seed: 42,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_flows == 0 {
            return Err(Error::Config("n_flows must be positive".into()));
        }
        if !(self.anomaly_rate > 0.0 && self.anomaly_rate < 1.0) {
            return Err(Error::Config(format!(
                "anomaly_rate must lie in (0, 1), got {}",
                self.anomaly_rate
            )));
        }
        let w = self.regime_mix.weights();
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(format!("regime weights must be non-negative, got {w:?}")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("regime weights must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WindowKind {
    Normal,
    Flood,
    Beacon,
    Exfiltration,
}

/// A labeled-anomalous time span `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalyInterval {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTraffic {
    pub flows: Vec<FlowRecord>,
    /// Label of the window each record belongs to.
    pub labels: Vec<u8>,
    /// One label per generated window.
    pub window_labels: Vec<u8>,
}

impl GeneratedTraffic {
    pub fn records(&self) -> impl Iterator<Item = (&FlowRecord, u8)> {
        self.flows.iter().zip(self.labels.iter().copied())
    }

    /// Labeled-anomalous spans, adjacent windows merged.
    pub fn intervals(&self) -> Vec<AnomalyInterval> {
        let mut out: Vec<AnomalyInterval> = Vec::new();
        for (i, &y) in self.window_labels.iter().enumerate() {
            if y != 1 {
                continue;
            }
            let start = i as f64 * GENERATOR_WINDOW_SECONDS;
            let end = (i + 1) as f64 * GENERATOR_WINDOW_SECONDS;
            match out.last_mut() {
                Some(last) if last.end == start => last.end = end,
                _ => out.push(AnomalyInterval { start, end }),
            }
        }
        out
    }

    pub fn anomalous_window_fraction(&self) -> f64 {
        self.window_labels.iter().filter(|&&y| y == 1).count() as f64 / self.window_labels.len() as f64
    }
}

pub fn write_intervals_csv<W: Write>(mut w: W, intervals: &[AnomalyInterval]) -> std::io::Result<()> {
    writeln!(w, "{INTERVALS_CSV_HEADER}")?;
    for iv in intervals {
        writeln!(w, "{:.6},{:.6}", iv.start, iv.end)?;
    }
    w.flush()
}

pub fn save_intervals_csv(path: &Path, intervals: &[AnomalyInterval]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_intervals_csv(std::io::BufWriter::new(file), intervals).map_err(|e| Error::io(path, e))
}

pub fn load_intervals_csv(path: &Path) -> Result<Vec<AnomalyInterval>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_intervals_csv(std::io::BufReader::new(file), path)
}

pub fn read_intervals_csv<R: BufRead>(reader: R, path: &Path) -> Result<Vec<AnomalyInterval>> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::io(path, e))?
        .ok_or_else(|| Error::format(path, "empty file, expected interval header"))?;
    if header.trim_end() != INTERVALS_CSV_HEADER {
        return Err(Error::format(
            path,
            format!("bad header `{header}`, expected `{INTERVALS_CSV_HEADER}`"),
        ));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.trim_end().split(',');
        let mut field = |name: &str| -> Result<f64> {
            parts
                .next()
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::format(path, format!("line {}, column `{name}`: expected a number", i + 2)))
        };
        let start = field("start")?;
        let end = field("end")?;
        out.push(AnomalyInterval { start, end });
    }
    Ok(out)
}

/// Parameter ranges for one difficulty preset.
struct Preset {
    normal_count: (usize, usize),
    flood_count: (usize, usize),
    beacon_count: (usize, usize),
    exfil_count: (usize, usize),
    data_size_max: u32,
    bulk_size: (u32, u32),
    exfil_size: (u32, u32),
    /// Relative timing jitter of beacon packets.
    beacon_jitter: f64,
    /// Per-packet size noise of beacon packets.
    beacon_size_noise: u32,
    beacon_port: u16,
    /// Probability that a flood packet reuses the window's main source port.
    flood_port_reuse: f64,
}

impl Preset {
    fn for_difficulty(d: Difficulty) -> Self {
        match d {
            Difficulty::Easy => Preset {
                normal_count: (6, 32),
                flood_count: (48, 96),
                beacon_count: (8, 16),
                exfil_count: (12, 28),
                data_size_max: 1400,
                bulk_size: (800, 1400),
                exfil_size: (1450, 1500),
                beacon_jitter: 0.005,
                beacon_size_noise: 0,
                beacon_port: 4444,
                flood_port_reuse: 0.0,
            },
            Difficulty::Hard => Preset {
                normal_count: (6, 36),
                flood_count: (20, 40),
                beacon_count: (8, 20),
                exfil_count: (8, 30),
                data_size_max: 1500,
                bulk_size: (900, 1500),
                exfil_size: (1150, 1500),
                beacon_jitter: 0.15,
                beacon_size_noise: 60,
                beacon_port: 443,
                flood_port_reuse: 0.8,
            },
        }
    }
}

fn ephemeral_port(rng: &mut ChaCha8Rng) -> u16 {
    rng.gen_range(32768..=60999)
}

/// Sorted offsets (microseconds) within a window, uniform over a random sub-span.
fn burst_offsets(rng: &mut ChaCha8Rng, count: usize, span_frac: (f64, f64)) -> Vec<u64> {
    let u = rng.gen_range(span_frac.0..=span_frac.1);
    let span = (WINDOW_MICROS as f64 * u) as u64;
    let start = rng.gen_range(0..=WINDOW_MICROS - span);
    let mut offsets: Vec<u64> = (0..count).map(|_| start + rng.gen_range(0..span.max(1))).collect();
    offsets.sort_unstable();
    offsets
}

#[derive(Clone, Copy)]
enum Session {
    Web,
    Dns,
    Bulk,
    Icmp,
}

fn web_packet(rng: &mut ChaCha8Rng, preset: &Preset) -> (u32, TcpFlags) {
    let size = if rng.gen_bool(0.4) {
        rng.gen_range(40..=120)
    } else {
        rng.gen_range(400..=preset.data_size_max)
    };
    let r: f64 = rng.gen();
    let flags = if r < 0.08 {
        TcpFlags::SYN
    } else if r < 0.12 {
        TcpFlags::FIN | TcpFlags::ACK
    } else if r < 0.14 {
        TcpFlags::RST
    } else if size > 120 {
        TcpFlags::ACK | TcpFlags::PSH
    } else {
        TcpFlags::ACK
    };
    (size, flags)
}

fn normal_window(rng: &mut ChaCha8Rng, preset: &Preset, base: u64, out: &mut Vec<FlowRecord>) {
    let session = match rng.gen_range(0..20) {
        0..=9 => Session::Web,
        10..=14 => Session::Dns,
        15..=18 => Session::Bulk,
        _ => Session::Icmp,
    };
    let count = rng.gen_range(preset.normal_count.0..=preset.normal_count.1);
    let main_src = ephemeral_port(rng);
    let dst = match session {
        Session::Web => *[80u16, 443].choose(rng).expect("non-empty"),
        Session::Dns => 53,
        Session::Bulk => *[22u16, 443, 8080].choose(rng).expect("non-empty"),
        Session::Icmp => 0,
    };
    for off in burst_offsets(rng, count, (0.15, 1.0)) {
        let src_port = if rng.gen_bool(0.8) { main_src } else { ephemeral_port(rng) };
        let (protocol, packet_size, tcp_flags) = match session {
            Session::Web => {
                let (s, f) = web_packet(rng, preset);
                (Protocol::Tcp, s, f)
            }
            Session::Dns => (Protocol::Udp, rng.gen_range(60..=300), TcpFlags::empty()),
            Session::Bulk => (
                Protocol::Tcp,
                rng.gen_range(preset.bulk_size.0..=preset.bulk_size.1),
                TcpFlags::ACK | TcpFlags::PSH,
            ),
            Session::Icmp => (Protocol::Icmp, rng.gen_range(64..=128), TcpFlags::empty()),
        };
        out.push(FlowRecord {
            timestamp: (base + off) as f64 / 1e6,
            src_port,
            dst_port: dst,
            protocol,
            packet_size,
            tcp_flags,
        });
    }
}

fn flood_window(rng: &mut ChaCha8Rng, preset: &Preset, base: u64, out: &mut Vec<FlowRecord>) {
    let count = rng.gen_range(preset.flood_count.0..=preset.flood_count.1);
    // Half the floods are UDP (DNS/NTP style), half TCP web floods.
    let udp = rng.gen_bool(0.5);
    let dst = if udp {
        *[53u16, 123].choose(rng).expect("non-empty")
    } else {
        *[80u16, 443].choose(rng).expect("non-empty")
    };
    let main_src = ephemeral_port(rng);
    for off in burst_offsets(rng, count, (0.85, 1.0)) {
        let (protocol, packet_size, tcp_flags) = if udp {
            (Protocol::Udp, rng.gen_range(60..=512), TcpFlags::empty())
        } else {
            let (s, f) = web_packet(rng, preset);
            (Protocol::Tcp, s, f)
        };
        let src_port = if rng.gen_bool(preset.flood_port_reuse) {
            main_src
        } else {
            ephemeral_port(rng)
        };
        out.push(FlowRecord {
            timestamp: (base + off) as f64 / 1e6,
            src_port,
            dst_port: dst,
            protocol,
            packet_size,
            tcp_flags,
        });
    }
}

fn beacon_window(rng: &mut ChaCha8Rng, preset: &Preset, base: u64, out: &mut Vec<FlowRecord>) {
    let count = rng.gen_range(preset.beacon_count.0..=preset.beacon_count.1);
    let period = WINDOW_MICROS as f64 / count as f64;
    let phase = rng.gen_range(0.0..period * 0.5);
    let src_port = ephemeral_port(rng);
    let size = 128u32;
    for j in 0..count {
        let jitter = rng.gen_range(-preset.beacon_jitter..=preset.beacon_jitter) * period;
        let t = (phase + j as f64 * period + jitter).clamp(0.0, (WINDOW_MICROS - 1) as f64);
        let noise = if preset.beacon_size_noise > 0 {
            rng.gen_range(0..=preset.beacon_size_noise)
        } else {
            0
        };
        out.push(FlowRecord {
            timestamp: (base + t as u64) as f64 / 1e6,
            src_port,
            dst_port: preset.beacon_port,
            protocol: Protocol::Tcp,
            packet_size: size + noise,
            tcp_flags: TcpFlags::ACK | TcpFlags::PSH,
        });
    }
    // Jitter can reorder neighbours when it exceeds half a period.
    let n = out.len();
    out[n - count..].sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
}

fn exfil_window(rng: &mut ChaCha8Rng, preset: &Preset, base: u64, out: &mut Vec<FlowRecord>) {
    let count = rng.gen_range(preset.exfil_count.0..=preset.exfil_count.1);
    let src_port = ephemeral_port(rng);
    for off in burst_offsets(rng, count, (0.15, 0.5)) {
        out.push(FlowRecord {
            timestamp: (base + off) as f64 / 1e6,
            src_port,
            dst_port: 443,
            protocol: Protocol::Tcp,
            packet_size: rng.gen_range(preset.exfil_size.0..=preset.exfil_size.1),
            tcp_flags: TcpFlags::ACK | TcpFlags::PSH,
        });
    }
}

/// Splits `total` into integer parts proportional to `weights` (largest remainder).
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut parts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut remaining = total.saturating_sub(parts.iter().sum());
    for &i in order.iter().cycle().take(weights.len() * 2) {
        if remaining == 0 {
            break;
        }
        if weights[i] > 0.0 {
            parts[i] += 1;
            remaining -= 1;
        }
    }
    parts
}

/// Generates a deterministic flow stream with per-window labels.
pub fn generate_flows(config: &SyntheticConfig) -> Result<GeneratedTraffic> {
    config.validate()?;
    let mut rng = rng_for(config.seed, STREAM_GENERATOR);
    let preset = Preset::for_difficulty(config.difficulty);
    let n = config.n_flows;
    let n_anom = ((n as f64 * config.anomaly_rate).round() as usize).min(n);

    let regime_counts = apportion(n_anom, &config.regime_mix.weights());
    let mut kinds = Vec::with_capacity(n);
    for (kind, &c) in [WindowKind::Flood, WindowKind::Beacon, WindowKind::Exfiltration]
        .iter()
        .zip(&regime_counts)
    {
        kinds.extend(std::iter::repeat_n(*kind, c));
    }
    kinds.resize(n, WindowKind::Normal);
    kinds.shuffle(&mut rng);

    let mut window_labels: Vec<u8> = kinds.iter().map(|k| u8::from(*k != WindowKind::Normal)).collect();
    if config.difficulty == Difficulty::Hard {
        // Swapping pairs keeps the anomalous fraction exact.
        let mut anomalous: Vec<usize> = (0..n).filter(|&i| window_labels[i] == 1).collect();
        let mut normal: Vec<usize> = (0..n).filter(|&i| window_labels[i] == 0).collect();
        anomalous.shuffle(&mut rng);
        normal.shuffle(&mut rng);
        let swaps = ((n_anom as f64 * HARD_LABEL_SWAP).round() as usize).min(normal.len());
        for (&a, &b) in anomalous.iter().zip(&normal).take(swaps) {
            window_labels[a] = 0;
            window_labels[b] = 1;
        }
    }

    let mut flows = Vec::new();
    let mut labels = Vec::new();
    for (w, kind) in kinds.iter().enumerate() {
        let base = w as u64 * WINDOW_MICROS;
        let before = flows.len();
        match kind {
            WindowKind::Normal => normal_window(&mut rng, &preset, base, &mut flows),
            WindowKind::Flood => flood_window(&mut rng, &preset, base, &mut flows),
            WindowKind::Beacon => beacon_window(&mut rng, &preset, base, &mut flows),
            WindowKind::Exfiltration => exfil_window(&mut rng, &preset, base, &mut flows),
        }
        labels.resize(labels.len() + (flows.len() - before), window_labels[w]);
    }
    Ok(GeneratedTraffic {
        flows,
        labels,
        window_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::flow::write_flows_csv;

    fn csv_bytes(t: &GeneratedTraffic) -> Vec<u8> {
        let mut buf = Vec::new();
        write_flows_csv(&mut buf, &t.flows).unwrap();
        buf
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = SyntheticConfig {
            n_flows: 1000,
            ..Default::default()
        };
        let a = generate_flows(&cfg).unwrap();
        let b = generate_flows(&cfg).unwrap();
        assert_eq!(csv_bytes(&a), csv_bytes(&b));
        assert_eq!(a.labels, b.labels);
        let c = generate_flows(&SyntheticConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(csv_bytes(&a), csv_bytes(&c));
    }

    #[test]
    fn anomaly_fraction_near_rate() {
        for difficulty in [Difficulty::Easy, Difficulty::Hard] {
            let t = generate_flows(&SyntheticConfig {
                n_flows: 1000,
                difficulty,
                ..Default::default()
            })
            .unwrap();
            let frac = t.anomalous_window_fraction();
            assert!((0.08..=0.12).contains(&frac), "{frac}");
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad_rate = SyntheticConfig {
            anomaly_rate: 1.5,
            ..Default::default()
        };
        assert!(matches!(generate_flows(&bad_rate), Err(Error::Config(_))));
        let bad_mix = SyntheticConfig {
            regime_mix: RegimeMix {
                flood: 1.2,
                beacon: -0.2,
                exfiltration: 0.0,
            },
            ..Default::default()
        };
        assert!(matches!(generate_flows(&bad_mix), Err(Error::Config(_))));
    }

    #[test]
    fn timestamps_monotone_and_fields_valid() {
        let t = generate_flows(&SyntheticConfig {
            n_flows: 300,
            difficulty: Difficulty::Hard,
            ..Default::default()
        })
        .unwrap();
        assert!(t.flows.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        assert_eq!(t.flows.len(), t.labels.len());
    }

    #[test]
    fn apportion_sums_to_total() {
        assert_eq!(apportion(130, &[0.6, 0.2, 0.2]), vec![78, 26, 26]);
        assert_eq!(apportion(1, &[0.0, 0.5, 0.5]).iter().sum::<usize>(), 1);
        assert_eq!(apportion(5, &[1.0, 0.0, 0.0]), vec![5, 0, 0]);
    }

    #[test]
    fn intervals_round_trip() {
        let t = GeneratedTraffic {
            flows: vec![],
            labels: vec![],
            window_labels: vec![0, 1, 1, 0, 1],
        };
        let iv = t.intervals();
        assert_eq!(
            iv,
            vec![
                AnomalyInterval { start: 5.0, end: 15.0 },
                AnomalyInterval { start: 20.0, end: 25.0 }
            ]
        );
        let mut buf = Vec::new();
        write_intervals_csv(&mut buf, &iv).unwrap();
        assert_eq!(read_intervals_csv(buf.as_slice(), Path::new("m")).unwrap(), iv);
    }
}
