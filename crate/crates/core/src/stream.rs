//! Per-channel photon detection times and their on-disk formats.
//!
//! QDTS binary layout (all integers little-endian):
//!
//! ```text
//! offset 0   b"QDTS"
//! offset 4   version (u8, currently 1)
//! offset 5   channel count (u8)
//! offset 6   records: channel (u8) + timestamp_ps (u64), sorted by timestamp
//! ```
//!
//! The CSV form is a header row `channel,timestamp_ps` followed by one
//! record per event, also sorted by timestamp.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const QDTS_MAGIC: &[u8; 4] = b"QDTS";
pub const QDTS_VERSION: u8 = 1;
const RECORD_LEN: usize = 9;

/// Sorted detection times of one channel, in integer picoseconds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimestampStream {
    channel: u8,
    /// Acquisition length; every timestamp lies in `[0, duration_ps]`.
    duration_ps: u64,
    timestamps: Vec<u64>,
}

impl TimestampStream {
    /// Validates strict ordering and the duration bound.
    pub fn new(channel: u8, duration_ps: u64, timestamps: Vec<u64>) -> Result<Self> {
        if let Some(w) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Data(format!(
                "channel {channel}: timestamps not strictly increasing at index {}",
                w + 1
            )));
        }
        if let Some(&last) = timestamps.last() {
            if last > duration_ps {
                return Err(Error::Data(format!(
                    "channel {channel}: timestamp {last} ps beyond duration {duration_ps} ps"
                )));
            }
        }
        Ok(Self {
            channel,
            duration_ps,
            timestamps,
        })
    }

    /// Builds a stream from unordered times, sorting and dropping duplicates.
    /// Coincident events on one detector register as a single click.
    pub fn from_unsorted(channel: u8, duration_ps: u64, mut timestamps: Vec<u64>) -> Result<Self> {
        timestamps.sort_unstable();
        timestamps.dedup();
        Self::new(channel, duration_ps, timestamps)
    }

    pub fn empty(channel: u8, duration_ps: u64) -> Self {
        Self {
            channel,
            duration_ps,
            timestamps: Vec::new(),
        }
    }

    pub fn channel(&self) -> u8 {
        self.channel
    }

    pub fn duration_ps(&self) -> u64 {
        self.duration_ps
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ps as f64 / crate::PS_PER_S
    }

    pub fn timestamps(&self) -> &[u64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn into_timestamps(self) -> Vec<u64> {
        self.timestamps
    }

    pub fn with_channel(mut self, channel: u8) -> Self {
        self.channel = channel;
        self
    }

    pub fn with_duration(mut self, duration_ps: u64) -> Result<Self> {
        if self.timestamps.last().is_some_and(|&t| t > duration_ps) {
            return Err(Error::Data("duration shorter than last timestamp".into()));
        }
        self.duration_ps = duration_ps;
        Ok(self)
    }

    /// Sorted union of two streams on the same detector channel.
    pub fn union(&self, other: &TimestampStream) -> TimestampStream {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (a, b) = (&self.timestamps, &other.timestamps);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        TimestampStream {
            channel: self.channel,
            duration_ps: self.duration_ps.max(other.duration_ps),
            timestamps: out,
        }
    }
}

/// Summary of a stream file, kept alongside the event data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamSummary {
    pub channel: u8,
    pub events: usize,
    pub duration_ps: u64,
}

impl From<&TimestampStream> for StreamSummary {
    fn from(s: &TimestampStream) -> Self {
        Self {
            channel: s.channel,
            events: s.len(),
            duration_ps: s.duration_ps,
        }
    }
}

/// Merges channels into `(channel, timestamp)` records sorted by timestamp,
/// ties broken by channel.
fn merged_records(streams: &[&TimestampStream]) -> Vec<(u8, u64)> {
    let mut records: Vec<(u8, u64)> = streams
        .iter()
        .flat_map(|s| s.timestamps.iter().map(move |&t| (s.channel, t)))
        .collect();
    records.sort_unstable_by_key(|&(c, t)| (t, c));
    records
}

fn split_records(records: Vec<(u8, u64)>, duration_ps: Option<u64>) -> Result<Vec<TimestampStream>> {
    let mut channels: Vec<u8> = records.iter().map(|r| r.0).collect();
    channels.sort_unstable();
    channels.dedup();
    let duration = duration_ps.unwrap_or_else(|| records.iter().map(|r| r.1).max().unwrap_or(0));
    channels
        .into_iter()
        .map(|c| {
            let ts = records.iter().filter(|r| r.0 == c).map(|r| r.1).collect();
            TimestampStream::new(c, duration, ts)
        })
        .collect()
}

pub fn write_qdts<W: Write>(mut w: W, streams: &[&TimestampStream]) -> Result<()> {
    let mut channels: Vec<u8> = streams.iter().map(|s| s.channel).collect();
    channels.sort_unstable();
    channels.dedup();
    if channels.len() != streams.len() {
        return Err(Error::Data("duplicate channel ids in QDTS output".into()));
    }
    let count = u8::try_from(channels.len()).map_err(|_| Error::Data("more than 255 channels".into()))?;
    w.write_all(QDTS_MAGIC)?;
    w.write_all(&[QDTS_VERSION, count])?;
    let records = merged_records(streams);
    let mut buf = Vec::with_capacity(records.len() * RECORD_LEN);
    for (c, t) in records {
        buf.push(c);
        buf.extend_from_slice(&t.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// Reads a QDTS file into one stream per channel present in the records.
///
/// The format carries no acquisition length; pass `duration_ps` when known,
/// otherwise the last timestamp is used.
pub fn read_qdts<R: Read>(mut r: R, duration_ps: Option<u64>) -> Result<Vec<TimestampStream>> {
    let mut header = [0u8; 6];
    r.read_exact(&mut header)
        .map_err(|e| Error::Data(format!("QDTS header: {e}")))?;
    if &header[..4] != QDTS_MAGIC {
        return Err(Error::Data("bad QDTS magic".into()));
    }
    if header[4] != QDTS_VERSION {
        return Err(Error::Data(format!("unsupported QDTS version {}", header[4])));
    }
    let declared = header[5] as usize;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() % RECORD_LEN != 0 {
        return Err(Error::Data(format!(
            "truncated QDTS record stream ({} trailing bytes)",
            body.len() % RECORD_LEN
        )));
    }
    let mut records = Vec::with_capacity(body.len() / RECORD_LEN);
    let mut last = 0u64;
    for chunk in body.chunks_exact(RECORD_LEN) {
        let t = u64::from_le_bytes(chunk[1..].try_into().expect("8-byte slice"));
        if t < last {
            return Err(Error::Data("QDTS records not sorted by timestamp".into()));
        }
        last = t;
        records.push((chunk[0], t));
    }
    let streams = split_records(records, duration_ps)?;
    if streams.len() > declared {
        return Err(Error::Data(format!(
            "QDTS header declares {declared} channels but records use {}",
            streams.len()
        )));
    }
    Ok(streams)
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRecord {
    channel: u8,
    timestamp_ps: u64,
}

pub fn write_csv<W: Write>(w: W, streams: &[&TimestampStream]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for (channel, timestamp_ps) in merged_records(streams) {
        wtr.serialize(CsvRecord { channel, timestamp_ps })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R, duration_ps: Option<u64>) -> Result<Vec<TimestampStream>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut records = Vec::new();
    for rec in rdr.deserialize() {
        let rec: CsvRecord = rec?;
        records.push((rec.channel, rec.timestamp_ps));
    }
    split_records(records, duration_ps)
}
