//! Text persistence: state snapshots, trajectory manifests and CSV artifacts
//! stamped with the hash of the configuration that produced them.
//!
//! Files are written to a temporary sibling and renamed into place, so an
//! existing file is replaced whole and never edited in place.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConformalState, LogPolarGrid};
use crate::solver::Trajectory;

const SNAPSHOT_TAG: &str = "# logdiff-state";
const HASH_TAG: &str = "# config-hash:";

fn replace_file(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Renders a snapshot: `# logdiff-state t=<time> n=<N>` then `s,U` per node.
/// Numbers use the shortest representation that parses back exactly.
pub fn format_snapshot(state: &ConformalState) -> String {
    let n = state.grid().len();
    let mut out = format!("{SNAPSHOT_TAG} t={:e} n={n}\n", state.time());
    for (s, u) in state.grid().nodes().iter().zip(state.values()) {
        out.push_str(&format!("{s:e},{u:e}\n"));
    }
    out
}

pub fn write_snapshot(path: &Path, state: &ConformalState) -> Result<()> {
    replace_file(path, format_snapshot(state).as_bytes())
}

fn parse_header(line: &str) -> Result<(f64, usize)> {
    let rest = line
        .strip_prefix(SNAPSHOT_TAG)
        .ok_or_else(|| Error::Parse(format!("missing snapshot header, got {line:?}")))?;
    let (mut t, mut n) = (None, None);
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("t", v)) => t = v.parse::<f64>().ok(),
            Some(("n", v)) => n = v.parse::<usize>().ok(),
            _ => return Err(Error::Parse(format!("unexpected header field {field:?}"))),
        }
    }
    match (t, n) {
        (Some(t), Some(n)) => Ok((t, n)),
        _ => Err(Error::Parse(format!("header needs t=<time> n=<N>, got {line:?}"))),
    }
}

pub fn parse_snapshot(text: &str) -> Result<ConformalState> {
    let mut lines = text.lines();
    let (t, n) = parse_header(lines.next().unwrap_or(""))?;
    let mut nodes = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Error::Parse(format!("line {}: expected `s,U`, got {line:?}", i + 2));
        let (s, u) = line.split_once(',').ok_or_else(bad)?;
        nodes.push(s.trim().parse::<f64>().map_err(|_| bad())?);
        values.push(u.trim().parse::<f64>().map_err(|_| bad())?);
    }
    if nodes.len() != n {
        return Err(Error::Parse(format!("header announces {n} nodes, found {}", nodes.len())));
    }
    ConformalState::new(LogPolarGrid::new(nodes)?, values, t)
}

pub fn read_snapshot(path: &Path) -> Result<ConformalState> {
    parse_snapshot(&fs::read_to_string(path)?)
}

/// SHA-256 of `text`, lower-case hex.
pub fn content_hash(text: &str) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// CSV with a `# config-hash: <hash>` comment row followed by a header row.
pub fn csv_string<T: Serialize>(hash: &str, rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let mut out = format!("{HASH_TAG} {hash}\n");
    out.push_str(&String::from_utf8(body).map_err(|e| Error::Parse(e.to_string()))?);
    Ok(out)
}

pub fn write_csv<T: Serialize>(path: &Path, hash: &str, rows: &[T]) -> Result<()> {
    replace_file(path, csv_string(hash, rows)?.as_bytes())
}

/// Reads rows back, skipping the comment row. Returns the hash, if present.
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(Option<String>, Vec<T>)> {
    let file = fs::File::open(path)?;
    let mut first = String::new();
    BufReader::new(&file).read_line(&mut first)?;
    let hash = first.strip_prefix(HASH_TAG).map(|h| h.trim().to_string());
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok((hash, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub time: f64,
    /// Snapshot path relative to the manifest's directory.
    pub path: String,
}

/// Writes one snapshot per sample time as `<stem>_<k>.state` next to the
/// manifest `<dir>/<stem>.csv`, and returns the manifest path.
pub fn write_trajectory(dir: &Path, stem: &str, traj: &Trajectory, hash: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut rows = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let name = format!("{stem}_{k:05}.state");
        write_snapshot(&dir.join(&name), &traj.state(k))?;
        rows.push(ManifestRow {
            time: traj.times()[k],
            path: name,
        });
    }
    let manifest = dir.join(format!("{stem}.csv"));
    write_csv(&manifest, hash, &rows)?;
    Ok(manifest)
}

/// Loads the snapshots listed in a manifest.
pub fn read_trajectory(manifest: &Path) -> Result<Trajectory> {
    let (_, rows): (_, Vec<ManifestRow>) = read_csv(manifest)?;
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let mut states = Vec::with_capacity(rows.len());
    for row in rows {
        let state = read_snapshot(&base.join(&row.path))?;
        if state.time() != row.time {
            return Err(Error::Parse(format!(
                "manifest time {} disagrees with snapshot {} (t = {})",
                row.time,
                row.path,
                state.time()
            )));
        }
        states.push(state);
    }
    Trajectory::from_states(states)
}
