//! Detection log: UTF-8 CSV with header `frame,u,v,w,h,depth,conf,f0..f{D-1}`
//! and an optional trailing `gt` column holding the ground-truth label.
//!
//! Floats are written with six decimals. Rows are sorted by `(frame, u)`.
//! Frames with no rows are empty; the log length is the last frame + 1.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::Detection;
use crate::error::{Error, Result};
use crate::num::Real;

const FIXED_COLUMNS: [&str; 7] = ["frame", "u", "v", "w", "h", "depth", "conf"];

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionLog<T: Real> {
    pub feature_dim: usize,
    pub frames: Vec<Vec<Detection<T>>>,
}

pub fn write_detlog<T: Real, W: Write>(log: &DetectionLog<T>, mut out: W) -> Result<()> {
    let with_gt = log.frames.iter().flatten().any(|d| d.source.is_some());
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..log.feature_dim).map(|i| format!("f{i}")));
    if with_gt {
        header.push("gt".into());
    }
    writeln!(out, "{}", header.join(","))?;

    for (frame, dets) in log.frames.iter().enumerate() {
        let mut rows: Vec<&Detection<T>> = dets.iter().collect();
        rows.sort_by(|a, b| a.u_center.as_f64().total_cmp(&b.u_center.as_f64()));
        for d in rows {
            if d.feature.len() != log.feature_dim {
                return Err(Error::parse(
                    0,
                    format!("feature length {} does not match log dimension {}", d.feature.len(), log.feature_dim),
                ));
            }
            let mut line = format!(
                "{frame},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                d.u_center.as_f64(),
                d.v_center.as_f64(),
                d.width_px.as_f64(),
                d.height_px.as_f64(),
                d.depth.as_f64(),
                d.confidence.as_f64()
            );
            for f in &d.feature {
                line.push_str(&format!(",{:.6}", f.as_f64()));
            }
            if with_gt {
                line.push(',');
                line.push_str(d.source.as_deref().unwrap_or(""));
            }
            writeln!(out, "{line}")?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_detlog_file<T: Real>(log: &DetectionLog<T>, path: impl AsRef<Path>) -> Result<()> {
    write_detlog(log, BufWriter::new(File::create(path)?))
}

pub fn read_detlog<T: Real, R: BufRead>(input: R) -> Result<DetectionLog<T>> {
    let mut lines = input.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(Error::parse(1, "missing header")),
    };
    let columns: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if columns.len() < FIXED_COLUMNS.len() || columns[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(Error::parse(1, format!("expected header to start with {}", FIXED_COLUMNS.join(","))));
    }
    let with_gt = columns.last() == Some(&"gt");
    let feature_cols = &columns[FIXED_COLUMNS.len()..columns.len() - usize::from(with_gt)];
    for (i, name) in feature_cols.iter().enumerate() {
        if *name != format!("f{i}") {
            return Err(Error::parse(1, format!("expected column f{i}, found `{name}`")));
        }
    }
    let feature_dim = feature_cols.len();
    let width = columns.len();

    let mut frames: Vec<Vec<Detection<T>>> = Vec::new();
    for (index, line) in lines.enumerate() {
        let line_no = index + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(Error::parse(line_no, format!("expected {width} fields, found {}", fields.len())));
        }
        let frame: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid frame index `{}`", fields[0])))?;
        if frame + 1 < frames.len() {
            return Err(Error::parse(line_no, format!("frame {frame} appears after frame {}", frames.len() - 1)));
        }
        let num = |col: usize| -> Result<f64> {
            let v: f64 = fields[col].parse().map_err(|_| {
                Error::parse(line_no, format!("invalid number `{}` in column {}", fields[col], columns[col]))
            })?;
            if !v.is_finite() {
                return Err(Error::parse(line_no, format!("non-finite value in column {}", columns[col])));
            }
            Ok(v)
        };
        let (u, v, w, h, depth, conf) = (num(1)?, num(2)?, num(3)?, num(4)?, num(5)?, num(6)?);
        if w <= 0.0 || h <= 0.0 || depth <= 0.0 {
            return Err(Error::parse(line_no, "box size and depth must be positive"));
        }
        let raw = (0..feature_dim)
            .map(|i| num(FIXED_COLUMNS.len() + i))
            .collect::<Result<Vec<f64>>>()?;
        let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if feature_dim > 0 && n == 0.0 {
            return Err(Error::parse(line_no, "appearance feature has zero norm"));
        }
        let source = with_gt
            .then(|| fields[width - 1].to_string())
            .filter(|s| !s.is_empty());
        if frames.len() <= frame {
            frames.resize_with(frame + 1, Vec::new);
        }
        frames[frame].push(Detection {
            u_center: T::lit(u),
            v_center: T::lit(v),
            width_px: T::lit(w),
            height_px: T::lit(h),
            depth: T::lit(depth),
            confidence: T::lit(conf),
            feature: raw.into_iter().map(|x| T::lit(x / n)).collect(),
            source,
        });
    }
    Ok(DetectionLog { feature_dim, frames })
}

pub fn read_detlog_file<T: Real>(path: impl AsRef<Path>) -> Result<DetectionLog<T>> {
    read_detlog(BufReader::new(File::open(path)?))
}
