//! Checkpoint files.
//!
//! Layout:
//!
//! ```text
//! prox-evi-checkpoint v1 sizes=<n0>,<n1>,...,<nL> count=<P>\n
//! <P little-endian IEEE-754 f64 values in canonical parameter order>
//! ```
//!
//! The header is a single ASCII line. No trailing bytes follow the payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{param_count, MlpNet};
use crate::error::{EviError, Result};

pub const CHECKPOINT_MAGIC: &str = "prox-evi-checkpoint v1";

pub fn write_checkpoint(net: &MlpNet, path: impl AsRef<Path>) -> Result<()> {
    let sizes = net
        .sizes()
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let mut buf = Vec::with_capacity(64 + 8 * net.param_count());
    writeln!(buf, "{CHECKPOINT_MAGIC} sizes={sizes} count={}", net.param_count())?;
    for p in net.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<MlpNet> {
    let bytes = fs::read(path)?;
    let bad = |m: &str| EviError::Checkpoint(m.to_string());
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing header line"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| bad("header is not ASCII"))?;
    let rest = header
        .strip_prefix(CHECKPOINT_MAGIC)
        .ok_or_else(|| bad("unrecognized header"))?;
    let mut sizes = None;
    let mut count = None;
    for field in rest.split_whitespace() {
        if let Some(v) = field.strip_prefix("sizes=") {
            sizes = Some(
                v.split(',')
                    .map(|s| s.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad("bad layer sizes"))?,
            );
        } else if let Some(v) = field.strip_prefix("count=") {
            count = Some(v.parse::<usize>().map_err(|_| bad("bad parameter count"))?);
        }
    }
    let sizes = sizes.ok_or_else(|| bad("missing sizes"))?;
    let count = count.ok_or_else(|| bad("missing count"))?;
    if count != param_count(&sizes) {
        return Err(bad("count does not match layer sizes"));
    }
    let payload = &bytes[nl + 1..];
    if payload.len() != 8 * count {
        return Err(bad("payload length does not match count"));
    }
    let params = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    MlpNet::from_params(&sizes, params)
}
