//! Frame-size traces: CSV ingestion and a synthetic GoP generator.
//!
//! The file format is two comma-separated columns, `frame_index,frame_size_bits`,
//! with an optional header row. Lines starting with `#` are comments; a
//! comment of the form `# fps: 25` (or `# fps = 25`) sets the frame rate,
//! otherwise 30 fps is assumed. Indices run consecutively from 1; a leading
//! row `0,0` is accepted and skipped. Traces published in bytes per frame
//! convert with a factor of 8 (`awk -F, '{print $1","$2*8}'`).

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::Gamma;

use crate::channel::rng_from_seed;
use crate::error::{Error, Result, TraceError};
use crate::model::VideoTrace;

pub const DEFAULT_FPS: f64 = 30.0;

/// Shape of the Gamma law used for synthetic frame sizes; 4 gives a
/// coefficient of variation of one half.
pub const SYNTHETIC_GAMMA_SHAPE: f64 = 4.0;

pub fn load_trace(path: &Path) -> Result<VideoTrace> {
    let text = fs::read_to_string(path)?;
    parse_trace(&text).map_err(|kind| Error::Trace {
        path: path.to_path_buf(),
        kind,
    })
}

fn fps_directive(line: &str) -> Option<Result<f64, TraceError>> {
    let body = line.trim_start().strip_prefix('#')?.trim();
    let rest = body.strip_prefix("fps")?.trim_start();
    let value = rest.strip_prefix(':').or_else(|| rest.strip_prefix('='))?.trim();
    Some(value.parse::<f64>().ok().filter(|v| *v > 0.0 && v.is_finite()).ok_or(
        TraceError::Malformed {
            line: 0,
            reason: format!("bad fps value `{value}`"),
        },
    ))
}

pub fn parse_trace(text: &str) -> Result<VideoTrace, TraceError> {
    let mut fps = DEFAULT_FPS;
    for (i, line) in text.lines().enumerate() {
        if let Some(v) = fps_directive(line) {
            fps = v.map_err(|e| match e {
                TraceError::Malformed { reason, .. } => TraceError::Malformed {
                    line: i as u64 + 1,
                    reason,
                },
                other => other,
            })?;
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut frames = Vec::new();
    let mut expected: Option<u64> = None;
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| TraceError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 2 {
            return Err(TraceError::Malformed {
                line,
                reason: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let index = record[0].parse::<u64>();
        if first && index.is_err() && record[1].parse::<f64>().is_err() {
            first = false;
            continue;
        }
        first = false;
        let index = index.map_err(|_| TraceError::Malformed {
            line,
            reason: format!("frame index `{}` is not a non-negative integer", &record[0]),
        })?;
        let size = record[1].parse::<f64>().map_err(|_| TraceError::Malformed {
            line,
            reason: format!("frame size `{}` is not a number", &record[1]),
        })?;
        if !size.is_finite() {
            return Err(TraceError::Malformed {
                line,
                reason: format!("frame size `{}` is not finite", &record[1]),
            });
        }
        let want = expected.unwrap_or(if index == 0 { 0 } else { 1 });
        if index != want {
            return Err(TraceError::OutOfOrder {
                line,
                expected: want,
                found: index,
            });
        }
        expected = Some(index + 1);
        if index == 0 && size == 0.0 {
            continue;
        }
        if size <= 0.0 {
            return Err(TraceError::NonPositiveSize { line, value: size });
        }
        frames.push(size);
    }
    if frames.is_empty() {
        return Err(TraceError::Empty);
    }
    Ok(VideoTrace::new(frames, fps).expect("frames and fps validated above"))
}

/// Writes a trace in the format [`load_trace`] reads.
pub fn write_trace(trace: &VideoTrace, path: &Path) -> Result<()> {
    let mut out = format!("# fps: {}\nframe_index,frame_size_bits\n", trace.fps());
    for (i, f) in trace.frames().iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, f));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Gamma-distributed frame sizes with one large frame opening every GoP.
///
/// The first frame of each GoP has mean `i_frame_ratio` times the mean of
/// the others, and the overall mean is `mean_bits`.
pub fn gen_synthetic_trace(t: usize, ng: usize, mean_bits: f64, i_frame_ratio: f64, seed: u64) -> Result<VideoTrace> {
    if t == 0 {
        return Err(Error::param("t", "must be at least 1"));
    }
    if ng == 0 {
        return Err(Error::param("ng", "must be at least 1"));
    }
    if !(mean_bits > 0.0 && mean_bits.is_finite()) {
        return Err(Error::param("mean_bits", format!("must be positive, got {mean_bits}")));
    }
    if !(i_frame_ratio >= 1.0 && i_frame_ratio.is_finite()) {
        return Err(Error::param("i_frame_ratio", format!("must be at least 1, got {i_frame_ratio}")));
    }
    let inter_mean = mean_bits * ng as f64 / (i_frame_ratio + ng as f64 - 1.0);
    let k = SYNTHETIC_GAMMA_SHAPE;
    let intra = Gamma::new(k, i_frame_ratio * inter_mean / k).expect("positive shape and scale");
    let inter = Gamma::new(k, inter_mean / k).expect("positive shape and scale");
    let mut rng = rng_from_seed(seed);
    let floor = mean_bits * 1e-9;
    let frames = (0..t)
        .map(|i| {
            let law = if i % ng == 0 { &intra } else { &inter };
            rng.sample(law).max(floor)
        })
        .collect();
    VideoTrace::new(frames, DEFAULT_FPS)
}
