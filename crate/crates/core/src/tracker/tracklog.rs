//! Track output log: CSV `frame,track_id,u,v,w,h,stage`.

use std::io::Write;

use super::Track;
use crate::error::Result;
use crate::num::Real;

pub fn write_track_header<W: Write>(out: &mut W) -> Result<()> {
    writeln!(out, "frame,track_id,u,v,w,h,stage")?;
    Ok(())
}

/// One row per live track, ascending id.
pub fn write_track_rows<T: Real, W: Write>(out: &mut W, frame: usize, tracks: &[Track<T>]) -> Result<()> {
    let mut sorted: Vec<&Track<T>> = tracks.iter().collect();
    sorted.sort_by_key(|t| t.id);
    for t in sorted {
        let b = t.bbox();
        writeln!(
            out,
            "{frame},{},{:.6},{:.6},{:.6},{:.6},{}",
            t.id,
            b.u.as_f64(),
            b.v.as_f64(),
            b.w.as_f64(),
            b.h.as_f64(),
            t.stage.as_str()
        )?;
    }
    Ok(())
}
