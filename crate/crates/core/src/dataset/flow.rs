use crate::error::{Error, Result};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

pub const FLOW_CSV_HEADER: &str = "timestamp,src_port,dst_port,protocol,packet_size,tcp_flags";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Tcp,
    Udp,
    Icmp,
}

impl Protocol {
    /// IANA protocol number, used as the numeric feature code.
    pub fn code(self) -> u8 {
        match self {
            Protocol::Icmp => 1,
            Protocol::Tcp => 6,
            Protocol::Udp => 17,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Tcp => "TCP",
            Protocol::Udp => "UDP",
            Protocol::Icmp => "ICMP",
        })
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "TCP" => Ok(Protocol::Tcp),
            "UDP" => Ok(Protocol::Udp),
            "ICMP" => Ok(Protocol::Icmp),
            other => Err(format!("unknown protocol `{other}`")),
        }
    }
}

/// TCP flag bitset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TcpFlags(u8);

impl TcpFlags {
    pub const SYN: TcpFlags = TcpFlags(1);
    pub const ACK: TcpFlags = TcpFlags(1 << 1);
    pub const FIN: TcpFlags = TcpFlags(1 << 2);
    pub const RST: TcpFlags = TcpFlags(1 << 3);
    pub const PSH: TcpFlags = TcpFlags(1 << 4);

    const NAMES: [(TcpFlags, &'static str); 5] = [
        (Self::SYN, "SYN"),
        (Self::ACK, "ACK"),
        (Self::FIN, "FIN"),
        (Self::RST, "RST"),
        (Self::PSH, "PSH"),
    ];

    pub const fn empty() -> Self {
        TcpFlags(0)
    }

    pub fn contains(self, other: TcpFlags) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl std::ops::BitOr for TcpFlags {
    type Output = TcpFlags;
    fn bitor(self, rhs: TcpFlags) -> TcpFlags {
        TcpFlags(self.0 | rhs.0)
    }
}

impl fmt::Display for TcpFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (flag, name) in Self::NAMES {
            if self.contains(flag) {
                if !first {
                    f.write_str("|")?;
                }
                f.write_str(name)?;
                first = false;
            }
        }
        Ok(())
    }
}

impl FromStr for TcpFlags {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split('|')
            .filter(|p| !p.is_empty())
            .try_fold(TcpFlags::empty(), |acc, part| {
                TcpFlags::NAMES
                    .iter()
                    .find(|(_, n)| *n == part)
                    .map(|(f, _)| acc | *f)
                    .ok_or_else(|| format!("unknown TCP flag `{part}`"))
            })
    }
}

/// One observed packet event.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    /// Seconds since stream start.
    pub timestamp: f64,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: Protocol,
    /// Bytes.
    pub packet_size: u32,
    pub tcp_flags: TcpFlags,
}

impl FlowRecord {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{:.6},{},{},{},{},{}",
            self.timestamp, self.src_port, self.dst_port, self.protocol, self.packet_size, self.tcp_flags
        )
    }
}

pub fn write_flows_csv<W: Write>(mut w: W, flows: &[FlowRecord]) -> std::io::Result<()> {
    writeln!(w, "{FLOW_CSV_HEADER}")?;
    for f in flows {
        writeln!(w, "{}", f.to_csv_line())?;
    }
    w.flush()
}

pub fn save_flows_csv(path: &Path, flows: &[FlowRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_flows_csv(std::io::BufWriter::new(file), flows).map_err(|e| Error::io(path, e))
}

/// Reads a flow CSV, validating the header and every field.
pub fn load_flows_csv(path: &Path) -> Result<Vec<FlowRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_flows_csv(std::io::BufReader::new(file), path)
}

pub fn read_flows_csv<R: BufRead>(reader: R, path: &Path) -> Result<Vec<FlowRecord>> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::io(path, e))?
        .ok_or_else(|| Error::format(path, "empty file, expected flow CSV header"))?;
    if header.trim_end() != FLOW_CSV_HEADER {
        return Err(Error::format(
            path,
            format!("bad header `{header}`, expected `{FLOW_CSV_HEADER}`"),
        ));
    }
    let columns: Vec<&str> = FLOW_CSV_HEADER.split(',').collect();
    let mut flows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = i + 2;
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::format(
                path,
                format!("line {row}: expected {} columns, found {}", columns.len(), fields.len()),
            ));
        }
        let bad = |col: usize, msg: String| {
            Error::format(path, format!("line {row}, column `{}`: {msg}", columns[col]))
        };
        let timestamp: f64 = fields[0].parse().map_err(|e| bad(0, format!("{e}")))?;
        if !timestamp.is_finite() {
            return Err(bad(0, "non-finite timestamp".into()));
        }
        flows.push(FlowRecord {
            timestamp,
            src_port: fields[1].parse().map_err(|e| bad(1, format!("{e}")))?,
            dst_port: fields[2].parse().map_err(|e| bad(2, format!("{e}")))?,
            protocol: fields[3].parse().map_err(|e: String| bad(3, e))?,
            packet_size: fields[4].parse().map_err(|e| bad(4, format!("{e}")))?,
            tcp_flags: fields[5].parse().map_err(|e: String| bad(5, e))?,
        });
    }
    Ok(flows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_render_pipe_separated() {
        assert_eq!((TcpFlags::SYN | TcpFlags::ACK).to_string(), "SYN|ACK");
        assert_eq!(TcpFlags::empty().to_string(), "");
        assert_eq!("PSH|ACK".parse::<TcpFlags>().unwrap(), TcpFlags::ACK | TcpFlags::PSH);
        assert_eq!("".parse::<TcpFlags>().unwrap(), TcpFlags::empty());
        assert!("SYN|URG".parse::<TcpFlags>().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let flows = vec![
            FlowRecord {
                timestamp: 0.25,
                src_port: 40000,
                dst_port: 443,
                protocol: Protocol::Tcp,
                packet_size: 1500,
                tcp_flags: TcpFlags::ACK | TcpFlags::PSH,
            },
            FlowRecord {
                timestamp: 1.0,
                src_port: 53,
                dst_port: 53000,
                protocol: Protocol::Udp,
                packet_size: 90,
                tcp_flags: TcpFlags::empty(),
            },
        ];
        let mut buf = Vec::new();
        write_flows_csv(&mut buf, &flows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(FLOW_CSV_HEADER));
        let back = read_flows_csv(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, flows);
    }

    #[test]
    fn bad_field_names_column() {
        let text = format!("{FLOW_CSV_HEADER}\n0.5,1,2,TCP,abc,SYN\n");
        let err = read_flows_csv(text.as_bytes(), Path::new("f.csv")).unwrap_err();
        assert!(err.to_string().contains("packet_size"), "{err}");
        let err = read_flows_csv("a,b\n".as_bytes(), Path::new("f.csv")).unwrap_err();
        assert!(err.to_string().contains("bad header"));
    }
}
