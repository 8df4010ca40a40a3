//! Shared framing for the binary container formats: a single-line JSON
//! header, one `\n`, then a little-endian payload.

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) fn split_header<'a, H: DeserializeOwned>(
    bytes: &'a [u8],
    format: &'static str,
) -> Result<(H, &'a [u8])> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| Error::Format {
        format,
        detail: "missing header terminator".into(),
    })?;
    let header: H = serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::Format {
        format,
        detail: format!("bad header: {e}"),
    })?;
    Ok((header, &bytes[nl + 1..]))
}

pub(crate) fn write_framed<H: Serialize>(header: &H, payload: &[Complex64]) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec(header)?;
    out.push(b'\n');
    out.reserve(payload.len() * 16);
    for v in payload {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    Ok(out)
}

pub(crate) fn decode_complex(
    payload: &[u8],
    expected: usize,
    format: &'static str,
) -> Result<Vec<Complex64>> {
    let want = expected * 16;
    if payload.len() != want {
        return Err(Error::Format {
            format,
            detail: format!("payload is {} bytes, expected {want} bytes", payload.len()),
        });
    }
    Ok(payload
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect())
}
