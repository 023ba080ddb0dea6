//! Plain-text channel ensembles.
//!
//! ```text
//! K M N
//! re im re im ...      (K lines per state, 2M numbers each)
//! ...
//! p_1 p_2 ... p_N      (optional; absent means uniform)
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use misobc_core::{ChannelMatrix, ChannelSet, C64};

use crate::error::{Result, SimError};

/// Writes `set`. Floats use the shortest representation that reads back to
/// the same bits.
pub fn write_channels<W: Write>(set: &ChannelSet, mut out: W) -> Result<()> {
    writeln!(out, "{} {} {}", set.users(), set.antennas(), set.len())?;
    for h in set.states() {
        for row in h.rows() {
            let fields: Vec<String> = row.iter().flat_map(|z| [z.re.to_string(), z.im.to_string()]).collect();
            writeln!(out, "{}", fields.join(" "))?;
        }
    }
    if !set.is_uniform() {
        let probs: Vec<String> = set.probabilities().iter().map(f64::to_string).collect();
        writeln!(out, "{}", probs.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

fn numbers(line: &str, number: usize) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| SimError::ChannelFormat {
                line: number,
                reason: format!("not a number: {tok:?}"),
            })
        })
        .collect()
}

/// Reads a channel file. Blank lines and lines starting with `#` are skipped.
pub fn read_channels<R: BufRead>(input: R, seed: u64) -> Result<ChannelSet> {
    let mut lines = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if !trimmed.is_empty() && !trimmed.starts_with('#') {
            lines.push((i + 1, trimmed.to_owned()));
        }
    }
    let mut it = lines.into_iter();
    let (first, header) = it.next().ok_or(SimError::ChannelFormat { line: 0, reason: "empty file".into() })?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| SimError::ChannelFormat { line: first, reason: "header must be `K M N`".into() })?;
    let [k, m, n] = dims[..] else {
        return Err(SimError::ChannelFormat { line: first, reason: "header must be `K M N`".into() });
    };
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        let mut entries = Vec::with_capacity(k * m);
        for _ in 0..k {
            let (number, line) = it.next().ok_or(SimError::ChannelFormat {
                line: first,
                reason: format!("expected {n} states of {k} rows"),
            })?;
            let row = numbers(&line, number)?;
            if row.len() != 2 * m {
                return Err(SimError::ChannelFormat { line: number, reason: format!("expected {} numbers", 2 * m) });
            }
            entries.extend(row.chunks(2).map(|p| C64::new(p[0], p[1])));
        }
        states.push(ChannelMatrix::new(k, m, entries)?);
    }
    let probs = match it.next() {
        None => None,
        Some((number, line)) => {
            let p = numbers(&line, number)?;
            if p.len() != n {
                return Err(SimError::ChannelFormat { line: number, reason: format!("expected {n} probabilities") });
            }
            Some(p)
        }
    };
    if let Some((number, _)) = it.next() {
        return Err(SimError::ChannelFormat { line: number, reason: "trailing data".into() });
    }
    Ok(ChannelSet::new(states, probs, seed)?)
}

pub fn save_channels(set: &ChannelSet, path: &Path) -> Result<()> {
    write_channels(set, BufWriter::new(File::create(path)?))
}

pub fn load_channels(path: &Path, seed: u64) -> Result<ChannelSet> {
    read_channels(BufReader::new(File::open(path)?), seed)
}
