//! Adapter for HighD recordings (`XX_tracks.csv` + `XX_tracksMeta.csv`).
//!
//! Columns read from the tracks file: `frame`, `id`, `x`, `width`,
//! `xVelocity`, `xAcceleration`, `precedingId`. From the meta file: `id`,
//! `drivingDirection`. In HighD `x` is the left edge of the bounding box and
//! `width` is the vehicle length along the road; direction 1 drives towards
//! decreasing `x`, direction 2 towards increasing `x`. Other columns are
//! ignored.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::trajectory::{TrajectoryPair, TrajectorySample};

pub const HIGHD_RATE_HZ: f64 = 25.0;

#[derive(Debug, Clone, Copy)]
struct TrackRow {
    frame: i64,
    x: f64,
    length: f64,
    vx: f64,
    ax: f64,
    preceding: i64,
}

/// Per-follower bookkeeping: every row with a leader is either emitted or
/// counted in one of the drop columns.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowerCounts {
    pub follower_id: i64,
    pub rows_with_leader: usize,
    pub emitted: usize,
    pub dropped_nonpositive_gap: usize,
    pub dropped_missing_leader: usize,
    pub dropped_negative_speed: usize,
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub pairs: Vec<TrajectoryPair>,
    pub followers: Vec<FollowerCounts>,
}

impl IngestReport {
    pub fn total_dropped(&self) -> usize {
        self.followers
            .iter()
            .map(|f| f.dropped_nonpositive_gap + f.dropped_missing_leader + f.dropped_negative_speed)
            .sum()
    }
}

fn column(headers: &csv::StringRecord, name: &str, file: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Data(format!("{}: missing column `{name}`", file.display())))
}

fn parse<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, file: &Path) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("").trim();
    raw.parse().map_err(|_| {
        Error::Data(format!(
            "{}: cannot parse `{raw}` on line {}",
            file.display(),
            rec.position().map(|p| p.line()).unwrap_or(0)
        ))
    })
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn read_directions(meta: &Path) -> Result<BTreeMap<i64, i64>> {
    let mut rdr = open(meta)?;
    let headers = rdr.headers()?.clone();
    let id = column(&headers, "id", meta)?;
    let dir = column(&headers, "drivingDirection", meta)?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.insert(parse::<i64>(&rec, id, meta)?, parse::<f64>(&rec, dir, meta)? as i64);
    }
    Ok(out)
}

fn read_tracks(tracks: &Path) -> Result<BTreeMap<i64, BTreeMap<i64, TrackRow>>> {
    let mut rdr = open(tracks)?;
    let headers = rdr.headers()?.clone();
    let cols = [
        "frame",
        "id",
        "x",
        "width",
        "xVelocity",
        "xAcceleration",
        "precedingId",
    ]
    .map(|c| column(&headers, c, tracks));
    let [frame, id, x, width, vx, ax, prec] = match cols {
        [Ok(a), Ok(b), Ok(c), Ok(d), Ok(e), Ok(f), Ok(g)] => [a, b, c, d, e, f, g],
        other => {
            let err = other.into_iter().find_map(|c| c.err()).expect("one column missing");
            return Err(err);
        }
    };
    let mut out: BTreeMap<i64, BTreeMap<i64, TrackRow>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = TrackRow {
            frame: parse::<f64>(&rec, frame, tracks)? as i64,
            x: parse(&rec, x, tracks)?,
            length: parse(&rec, width, tracks)?,
            vx: parse(&rec, vx, tracks)?,
            ax: parse(&rec, ax, tracks)?,
            preceding: parse::<f64>(&rec, prec, tracks)? as i64,
        };
        out.entry(parse::<f64>(&rec, id, tracks)? as i64)
            .or_default()
            .insert(row.frame, row);
    }
    Ok(out)
}

/// Recording prefix of `XX_tracks.csv`, used in pair ids.
fn recording_id(tracks: &Path) -> String {
    tracks
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.split('_').next())
        .filter(|s| !s.is_empty())
        .unwrap_or("rec")
        .to_string()
}

struct Segment {
    leader: i64,
    last_frame: i64,
    samples: Vec<TrajectorySample>,
}

/// One pair per maximal run of consecutive frames in which a follower keeps
/// the same preceding vehicle. Gaps are bumper to bumper and speeds are
/// sign-normalized to the driving direction.
pub fn ingest_highd(tracks: &Path, meta: &Path) -> Result<IngestReport> {
    let directions = read_directions(meta)?;
    let vehicles = read_tracks(tracks)?;
    let rec = recording_id(tracks);
    let mut report = IngestReport::default();

    for (&fid, rows) in &vehicles {
        let sign = match directions.get(&fid) {
            Some(1) => -1.0,
            Some(2) => 1.0,
            Some(d) => {
                return Err(Error::Data(format!(
                    "{}: vehicle {fid} has driving direction {d}",
                    meta.display()
                )))
            }
            None => {
                return Err(Error::Data(format!(
                    "{}: vehicle {fid} missing from meta file",
                    meta.display()
                )))
            }
        };
        let mut counts = FollowerCounts {
            follower_id: fid,
            ..Default::default()
        };
        let mut current: Option<Segment> = None;
        let flush = |seg: Option<Segment>, report: &mut IngestReport| {
            if let Some(seg) = seg {
                if !seg.samples.is_empty() {
                    let start = (seg.samples[0].time * HIGHD_RATE_HZ).round() as i64;
                    report.pairs.push(TrajectoryPair {
                        pair_id: format!("{rec}-{fid}-{}-{start}", seg.leader),
                        samples: seg.samples,
                        rate_hz: HIGHD_RATE_HZ,
                    });
                }
            }
        };

        for (&frame, row) in rows {
            if row.preceding == 0 {
                flush(current.take(), &mut report);
                continue;
            }
            counts.rows_with_leader += 1;
            let Some(lead) = vehicles.get(&row.preceding).and_then(|l| l.get(&frame)) else {
                counts.dropped_missing_leader += 1;
                flush(current.take(), &mut report);
                continue;
            };
            let gap = if sign > 0.0 {
                lead.x - (row.x + row.length)
            } else {
                row.x - (lead.x + lead.length)
            };
            let sample = TrajectorySample {
                time: frame as f64 / HIGHD_RATE_HZ,
                v_fv: sign * row.vx,
                v_lv: sign * lead.vx,
                gap,
                a_fv: sign * row.ax,
            };
            if !(gap > 0.0) {
                counts.dropped_nonpositive_gap += 1;
                flush(current.take(), &mut report);
                continue;
            }
            if sample.v_fv < 0.0 || sample.v_lv < 0.0 {
                counts.dropped_negative_speed += 1;
                flush(current.take(), &mut report);
                continue;
            }
            counts.emitted += 1;
            match current.as_mut() {
                Some(seg) if seg.leader == row.preceding && seg.last_frame + 1 == frame => {
                    seg.last_frame = frame;
                    seg.samples.push(sample);
                }
                _ => {
                    flush(current.take(), &mut report);
                    current = Some(Segment {
                        leader: row.preceding,
                        last_frame: frame,
                        samples: vec![sample],
                    });
                }
            }
        }
        flush(current.take(), &mut report);
        report.followers.push(counts);
    }
    Ok(report)
}
