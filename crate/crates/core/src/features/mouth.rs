use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Four mouth landmarks of one video frame, in pixels. Missing points are
/// allowed in the file; such frames are skipped by [`mouth_metrics`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkFrame {
    pub frame_index: usize,
    pub mouth_top: Option<[f64; 2]>,
    pub mouth_bottom: Option<[f64; 2]>,
    pub mouth_left: Option<[f64; 2]>,
    pub mouth_right: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<[u32; 2]>,
}

impl LandmarkFrame {
    pub fn new(frame_index: usize, top: [f64; 2], bottom: [f64; 2], left: [f64; 2], right: [f64; 2]) -> Self {
        Self {
            frame_index,
            mouth_top: Some(top),
            mouth_bottom: Some(bottom),
            mouth_left: Some(left),
            mouth_right: Some(right),
            resolution: None,
        }
    }

    fn complete(&self) -> Option<([f64; 2], [f64; 2], [f64; 2], [f64; 2])> {
        let pts = (self.mouth_top?, self.mouth_bottom?, self.mouth_left?, self.mouth_right?);
        let all = [pts.0, pts.1, pts.2, pts.3];
        all.iter().flatten().all(|v| v.is_finite()).then_some(pts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MouthMetrics {
    /// Mean top-to-bottom distance.
    pub aperture: f64,
    /// Mean left-to-right distance.
    pub spreading: f64,
    pub frames_used: usize,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn mouth_metrics(frames: &[LandmarkFrame]) -> Result<MouthMetrics> {
    let (mut ma, mut ms, mut n) = (0.0, 0.0, 0usize);
    for (top, bottom, left, right) in frames.iter().filter_map(LandmarkFrame::complete) {
        ma += dist(top, bottom);
        ms += dist(left, right);
        n += 1;
    }
    if n == 0 {
        return Err(Error::Degenerate("no frame has all four mouth landmarks".into()));
    }
    Ok(MouthMetrics { aperture: ma / n as f64, spreading: ms / n as f64, frames_used: n })
}

/// Reads line-delimited landmark records.
pub fn read_landmarks(path: impl AsRef<Path>) -> Result<Vec<LandmarkFrame>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("landmark record {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

pub fn write_landmarks(path: impl AsRef<Path>, frames: &[LandmarkFrame]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for fr in frames {
        serde_json::to_writer(&mut f, fr)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}
