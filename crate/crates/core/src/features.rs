//! Windowed feature extraction from flow-record streams.
//!
//! Records are bucketed into `[t, t + window)` windows on a grid anchored at
//! `floor(first_timestamp / stride) * stride`, and every retained window is
//! summarised by the fixed 19-feature schema below.

use crate::dataset::{AnomalyInterval, FlowRecord, LabeledDataset, TcpFlags};
use crate::error::{Error, Result};
use crate::spectral::{band_energies, haar_dwt, spectral_entropy, DEFAULT_LEVELS};
use ndarray::Array2;
use std::collections::BTreeMap;

pub const N_FEATURES: usize = 19;

const FEATURE_NAMES: [&str; N_FEATURES] = [
    "packet_count_5s",
    "inter_arrival_time",
    "spectral_entropy",
    "frequency_band_energy",
    "packet_size",
    "src_port",
    "dst_port",
    "protocol",
    "byte_count_5s",
    "packet_size_std",
    "packet_size_max",
    "inter_arrival_std",
    "inter_arrival_min",
    "syn_count",
    "ack_count",
    "fin_count",
    "rst_count",
    "band_energy_l2_fraction",
    "band_energy_l3_fraction",
];

/// The canonical ordered feature names.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FeatureSchema;

impl FeatureSchema {
    pub fn names(&self) -> &'static [&'static str] {
        &FEATURE_NAMES
    }

    pub fn len(&self) -> usize {
        N_FEATURES
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::UnknownFeature {
                name: name.to_string(),
                valid: self.to_vec(),
            })
    }

    pub fn to_vec(&self) -> Vec<String> {
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
    }
}

impl std::ops::Index<usize> for FeatureSchema {
    type Output = str;

    fn index(&self, i: usize) -> &str {
        FEATURE_NAMES[i]
    }
}

pub fn schema() -> FeatureSchema {
    FeatureSchema
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    pub window_seconds: f64,
    pub stride_seconds: f64,
    pub min_packets: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_seconds: 5.0,
            stride_seconds: 5.0,
            min_packets: 1,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_seconds > 0.0 && self.window_seconds.is_finite()) {
            return Err(Error::Config(format!("window must be positive, got {}", self.window_seconds)));
        }
        if !(self.stride_seconds > 0.0 && self.stride_seconds.is_finite()) {
            return Err(Error::Config(format!("stride must be positive, got {}", self.stride_seconds)));
        }
        if self.min_packets == 0 {
            return Err(Error::Config("min_packets must be at least 1".into()));
        }
        Ok(())
    }
}

/// Records falling in `[start, end)`.
#[derive(Debug, Clone, Copy)]
pub struct Window<'a> {
    pub start: f64,
    pub end: f64,
    pub records: &'a [FlowRecord],
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowFeatures {
    pub start: f64,
    pub end: f64,
    pub values: [f64; N_FEATURES],
}

impl WindowFeatures {
    pub fn get(&self, name: &str) -> Result<f64> {
        Ok(self.values[schema().index_of(name)?])
    }
}

/// Buckets a time-ordered stream into windows, dropping windows with fewer
/// than `min_packets` records.
pub fn extract_windows<'a>(flows: &'a [FlowRecord], config: &WindowConfig) -> Result<Vec<Window<'a>>> {
    config.validate()?;
    if let Some(i) = flows.windows(2).position(|w| w[1].timestamp < w[0].timestamp) {
        return Err(Error::Data {
            index: i + 1,
            message: format!(
                "timestamp {} precedes previous timestamp {}",
                flows[i + 1].timestamp,
                flows[i].timestamp
            ),
        });
    }
    let (Some(first), Some(last)) = (flows.first(), flows.last()) else {
        return Ok(Vec::new());
    };
    let origin = (first.timestamp / config.stride_seconds).floor() * config.stride_seconds;
    let n_starts = ((last.timestamp - origin) / config.stride_seconds).floor() as usize + 1;
    let mut windows = Vec::new();
    for j in 0..n_starts {
        let start = origin + j as f64 * config.stride_seconds;
        let end = start + config.window_seconds;
        let lo = flows.partition_point(|f| f.timestamp < start);
        let hi = flows.partition_point(|f| f.timestamp < end);
        if hi - lo >= config.min_packets {
            windows.push(Window {
                start,
                end,
                records: &flows[lo..hi],
            });
        }
    }
    Ok(windows)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn population_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Most frequent value; ties go to the smallest.
fn mode<T: Ord + Copy>(values: impl Iterator<Item = T>) -> Option<T> {
    let mut counts = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_insert(0usize) += 1;
    }
    let best = counts.values().copied().max()?;
    counts.into_iter().find(|&(_, c)| c == best).map(|(v, _)| v)
}

/// Packet-size signal fed to the wavelet features. A single packet is
/// duplicated so the transform is defined.
pub fn packet_size_signal(records: &[FlowRecord]) -> Vec<f64> {
    let mut s: Vec<f64> = records.iter().map(|r| f64::from(r.packet_size)).collect();
    if s.len() == 1 {
        s.push(s[0]);
    }
    s
}

pub fn featurize_window(window: &Window<'_>, config: &WindowConfig) -> Result<WindowFeatures> {
    let recs = window.records;
    if recs.is_empty() || recs.len() < config.min_packets {
        return Err(Error::Size(format!(
            "window at {} has {} packets, below min_packets {}",
            window.start,
            recs.len(),
            config.min_packets.max(1)
        )));
    }
    let sizes: Vec<f64> = recs.iter().map(|r| f64::from(r.packet_size)).collect();
    let gaps: Vec<f64> = recs.windows(2).map(|w| w[1].timestamp - w[0].timestamp).collect();
    let flag_count = |flag: TcpFlags| recs.iter().filter(|r| r.tcp_flags.contains(flag)).count() as f64;

    let decomp = haar_dwt(&packet_size_signal(recs), DEFAULT_LEVELS)?;
    let profile = band_energies(&decomp);
    let detail_fraction = |level: usize| {
        if level < decomp.levels() {
            profile.fraction(level)
        } else {
            0.0
        }
    };

    let values = [
        recs.len() as f64,
        mean(&gaps),
        spectral_entropy(&profile),
        detail_fraction(0),
        mean(&sizes),
        f64::from(mode(recs.iter().map(|r| r.src_port)).expect("non-empty")),
        f64::from(mode(recs.iter().map(|r| r.dst_port)).expect("non-empty")),
        f64::from(mode(recs.iter().map(|r| r.protocol.code())).expect("non-empty")),
        sizes.iter().sum(),
        population_std(&sizes),
        sizes.iter().copied().fold(f64::MIN, f64::max),
        population_std(&gaps),
        gaps.iter().copied().reduce(f64::min).unwrap_or(0.0),
        flag_count(TcpFlags::SYN),
        flag_count(TcpFlags::ACK),
        flag_count(TcpFlags::FIN),
        flag_count(TcpFlags::RST),
        detail_fraction(1),
        detail_fraction(2),
    ];
    Ok(WindowFeatures {
        start: window.start,
        end: window.end,
        values,
    })
}

/// 1 when labeled-anomalous intervals cover at least half of the window span.
pub fn window_label(start: f64, end: f64, intervals: &[AnomalyInterval]) -> u8 {
    let covered: f64 = intervals
        .iter()
        .map(|iv| (iv.end.min(end) - iv.start.max(start)).max(0.0))
        .sum();
    u8::from(covered >= 0.5 * (end - start))
}

/// Windows, featurizes and labels a stream into an unassigned dataset.
pub fn featurize_stream(
    flows: &[FlowRecord],
    config: &WindowConfig,
    intervals: &[AnomalyInterval],
) -> Result<LabeledDataset> {
    let windows = extract_windows(flows, config)?;
    let mut values = Vec::with_capacity(windows.len() * N_FEATURES);
    let mut labels = Vec::with_capacity(windows.len());
    for w in &windows {
        values.extend_from_slice(&featurize_window(w, config)?.values);
        labels.push(window_label(w.start, w.end, intervals));
    }
    let x = Array2::from_shape_vec((windows.len(), N_FEATURES), values).expect("fixed width rows");
    LabeledDataset::new(x, labels, schema().to_vec())
}
