//! Run-length encoding of sensor grids.
//!
//! In-disk cells are numbered in row-major order. Each channel becomes a
//! list of `[start, len]` runs of set cells over that numbering.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{SensorReading, WorldConfig, CHANNELS};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EncodedGrid(pub Vec<Vec<[u32; 2]>>);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("expected {CHANNELS} channels, got {0}")]
    ChannelCount(usize),
    #[error("run [{start}, {len}] exceeds {cells} in-disk cells")]
    RunOutOfRange { start: u32, len: u32, cells: usize },
    #[error("cell {0} set in more than one channel")]
    Overlap(u32),
}

pub fn encode(reading: &SensorReading) -> EncodedGrid {
    let cells: Vec<usize> = reading.disk_cells().collect();
    let channels = (0..CHANNELS)
        .map(|ch| {
            let mut runs: Vec<[u32; 2]> = Vec::new();
            for (k, &cell) in cells.iter().enumerate() {
                if !reading.cell_channel(cell, ch) {
                    continue;
                }
                let k = k as u32;
                match runs.last_mut() {
                    Some(run) if run[0] + run[1] == k => run[1] += 1,
                    _ => runs.push([k, 1]),
                }
            }
            runs
        })
        .collect();
    EncodedGrid(channels)
}

/// Rebuilds the grid. Visible ids are not part of the encoding.
pub fn decode(grid: &EncodedGrid, cfg: &WorldConfig) -> Result<SensorReading, CodecError> {
    if grid.0.len() != CHANNELS {
        return Err(CodecError::ChannelCount(grid.0.len()));
    }
    let mut out = SensorReading::empty(cfg);
    let cells: Vec<usize> = out.disk_cells().collect();
    let mut taken = vec![false; cells.len()];
    for (ch, runs) in grid.0.iter().enumerate() {
        for &[start, len] in runs {
            let end = start as usize + len as usize;
            if end > cells.len() {
                return Err(CodecError::RunOutOfRange {
                    start,
                    len,
                    cells: cells.len(),
                });
            }
            for k in start as usize..end {
                if std::mem::replace(&mut taken[k], true) {
                    return Err(CodecError::Overlap(k as u32));
                }
                out.set_raw(cells[k], ch);
            }
        }
    }
    Ok(out)
}
