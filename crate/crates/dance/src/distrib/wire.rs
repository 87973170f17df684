//! Frame encoding for the TCP transport.
//!
//! Every frame is `[4-byte big-endian length][1-byte opcode][payload]` where
//! the length covers opcode plus payload and the payload is a run of 8-byte
//! little-endian IEEE-754 doubles. Vector length is implied by frame length.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const OP_BROADCAST_WEIGHTS: u8 = 0x01;
pub const OP_BROADCAST_TWO_VECTORS: u8 = 0x02;
pub const OP_REDUCE_GRADIENT: u8 = 0x11;
pub const OP_REDUCE_TWO_HVP: u8 = 0x12;
pub const OP_RECONFIGURE_WINDOW: u8 = 0x20;

pub fn write_frame<W: Write>(mut out: W, opcode: u8, payload: &[f64]) -> Result<()> {
    let len = 1u32 + 8 * payload.len() as u32;
    out.write_all(&len.to_be_bytes())?;
    out.write_all(&[opcode])?;
    for x in payload {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Read one frame; `Ok(None)` means the peer closed the connection cleanly
/// at a frame boundary.
pub fn read_frame<R: Read>(mut input: R) -> Result<Option<(u8, Vec<f64>)>> {
    let mut len_buf = [0u8; 4];
    match input.read_exact(&mut len_buf) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len_buf) as usize;
    if len < 1 || (len - 1) % 8 != 0 {
        return Err(Error::Transport(format!("malformed frame length {len}")));
    }
    let mut opcode = [0u8; 1];
    input.read_exact(&mut opcode)?;
    let count = (len - 1) / 8;
    let mut payload = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        input.read_exact(&mut buf)?;
        payload.push(f64::from_le_bytes(buf));
    }
    Ok(Some((opcode[0], payload)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip() {
        let mut buf = Vec::new();
        write_frame(&mut buf, OP_BROADCAST_WEIGHTS, &[1.5, -2.25, 0.0]).unwrap();
        assert_eq!(&buf[..4], &(1u32 + 24).to_be_bytes());
        assert_eq!(buf[4], OP_BROADCAST_WEIGHTS);
        let (op, payload) = read_frame(buf.as_slice()).unwrap().unwrap();
        assert_eq!(op, OP_BROADCAST_WEIGHTS);
        assert_eq!(payload, vec![1.5, -2.25, 0.0]);
    }

    #[test]
    fn empty_payload_and_eof() {
        let mut buf = Vec::new();
        write_frame(&mut buf, OP_RECONFIGURE_WINDOW, &[]).unwrap();
        let mut cursor = buf.as_slice();
        let (op, payload) = read_frame(&mut cursor).unwrap().unwrap();
        assert_eq!(op, OP_RECONFIGURE_WINDOW);
        assert!(payload.is_empty());
        assert!(read_frame(&mut cursor).unwrap().is_none());
    }

    #[test]
    fn rejects_bad_length() {
        let mut buf = vec![];
        buf.extend_from_slice(&5u32.to_be_bytes()); // 5 − 1 = 4 is not a multiple of 8
        buf.push(OP_REDUCE_GRADIENT);
        buf.extend_from_slice(&[0u8; 4]);
        assert!(read_frame(buf.as_slice()).is_err());
    }
}
