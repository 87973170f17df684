//! Multi-process transport over TCP, one stream per worker.
//!
//! Message flow mirrors the solve loop: the master broadcasts weights once
//! per direction solve (workers cache them), then broadcasts vector pairs,
//! one round per loop pass. Workers reply with their shard partials; the
//! master sums replies in worker order.

use std::io::BufReader;
use std::net::{TcpStream, ToSocketAddrs};
use std::ops::Range;
use std::sync::Arc;

use nalgebra::DVector;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model;

use super::wire::{
    read_frame, write_frame, OP_BROADCAST_TWO_VECTORS, OP_BROADCAST_WEIGHTS, OP_RECONFIGURE_WINDOW,
    OP_REDUCE_GRADIENT, OP_REDUCE_TWO_HVP,
};

/// Master side: owns one stream per worker.
pub struct TcpMaster {
    streams: Vec<TcpStream>,
    last_weights: Option<DVector<f64>>,
}

impl TcpMaster {
    pub fn connect<A: ToSocketAddrs>(addrs: &[A]) -> Result<Self> {
        let mut streams = Vec::with_capacity(addrs.len());
        for a in addrs {
            let s = TcpStream::connect(a).map_err(|e| Error::Transport(e.to_string()))?;
            s.set_nodelay(true).ok();
            streams.push(s);
        }
        Ok(Self::from_streams(streams))
    }

    /// Adopt already-established connections (used by in-process tests and
    /// the worker-thread example).
    pub fn from_streams(streams: Vec<TcpStream>) -> Self {
        Self {
            streams,
            last_weights: None,
        }
    }

    pub fn worker_count(&self) -> usize {
        self.streams.len()
    }

    /// Send window size and shard range to every worker (also the handshake:
    /// it is the first frame a worker sees after connecting).
    pub fn configure(&mut self, n: usize, shards: &[Range<usize>]) -> Result<()> {
        if shards.len() != self.streams.len() {
            return Err(Error::Transport(format!(
                "{} shards for {} workers",
                shards.len(),
                self.streams.len()
            )));
        }
        for (stream, shard) in self.streams.iter_mut().zip(shards) {
            write_frame(
                &mut *stream,
                OP_RECONFIGURE_WINDOW,
                &[n as f64, shard.start as f64, shard.end as f64],
            )?;
        }
        self.last_weights = None;
        Ok(())
    }

    /// Broadcast weights, collect per-shard gradient partials, sum in worker
    /// order. Returns the loss part only.
    pub fn reduce_grad(&mut self, w: &DVector<f64>) -> Result<DVector<f64>> {
        for stream in &mut self.streams {
            write_frame(&mut *stream, OP_BROADCAST_WEIGHTS, w.as_slice())?;
        }
        self.last_weights = Some(w.clone());
        let mut acc = DVector::zeros(w.len());
        for stream in &mut self.streams {
            let (op, payload) = expect_frame(stream)?;
            if op != OP_REDUCE_GRADIENT || payload.len() != w.len() {
                return Err(Error::Transport(format!(
                    "expected gradient reply, got opcode {op:#04x} with {} doubles",
                    payload.len()
                )));
            }
            for (a, x) in acc.iter_mut().zip(&payload) {
                *a += x;
            }
        }
        Ok(acc)
    }

    /// Broadcast `u` and `v` in one frame; collect both Hessian-vector
    /// partials from each worker. Weights must match the last broadcast.
    pub fn reduce_hvp_pair(
        &mut self,
        w: &DVector<f64>,
        u: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        match &self.last_weights {
            Some(lw) if lw == w => {}
            _ => {
                return Err(Error::Transport(
                    "hessian-vector reduce without a matching weight broadcast".into(),
                ))
            }
        }
        let d = u.len();
        let mut payload = Vec::with_capacity(2 * d);
        payload.extend_from_slice(u.as_slice());
        payload.extend_from_slice(v.as_slice());
        for stream in &mut self.streams {
            write_frame(&mut *stream, OP_BROADCAST_TWO_VECTORS, &payload)?;
        }
        let mut hu = DVector::zeros(d);
        let mut hv = DVector::zeros(d);
        for stream in &mut self.streams {
            let (op, reply) = expect_frame(stream)?;
            if op != OP_REDUCE_TWO_HVP || reply.len() != 2 * d {
                return Err(Error::Transport(format!(
                    "expected paired hvp reply, got opcode {op:#04x} with {} doubles",
                    reply.len()
                )));
            }
            for j in 0..d {
                hu[j] += reply[j];
                hv[j] += reply[d + j];
            }
        }
        Ok((hu, hv))
    }
}

fn expect_frame(stream: &mut TcpStream) -> Result<(u8, Vec<f64>)> {
    read_frame(&mut *stream)?.ok_or_else(|| Error::Transport("worker closed connection".into()))
}

/// Worker loop: serve shard computations over one connection until the
/// master disconnects.
pub fn serve_worker(stream: TcpStream, dataset: Arc<Dataset>) -> Result<()> {
    stream.set_nodelay(true).ok();
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut window_n = 0usize;
    let mut shard: Range<usize> = 0..0;
    let mut weights: Option<DVector<f64>> = None;

    while let Some((op, payload)) = read_frame(&mut reader)? {
        match op {
            OP_RECONFIGURE_WINDOW => {
                if payload.len() != 3 {
                    return Err(Error::Transport("reconfigure expects 3 doubles".into()));
                }
                window_n = payload[0] as usize;
                shard = payload[1] as usize..payload[2] as usize;
                if shard.end > window_n || window_n > dataset.len() {
                    return Err(Error::Transport(format!(
                        "shard {shard:?} outside window 0..{window_n}"
                    )));
                }
            }
            OP_BROADCAST_WEIGHTS => {
                let w = DVector::from_vec(payload);
                let g = model::shard_grad(&dataset, window_n, &w, shard.clone());
                write_frame(&mut writer, OP_REDUCE_GRADIENT, g.as_slice())?;
                weights = Some(w);
            }
            OP_BROADCAST_TWO_VECTORS => {
                let w = weights
                    .as_ref()
                    .ok_or_else(|| Error::Transport("vectors before any weights".into()))?;
                if payload.len() % 2 != 0 {
                    return Err(Error::Transport("odd paired-vector payload".into()));
                }
                let d = payload.len() / 2;
                let u = DVector::from_column_slice(&payload[..d]);
                let v = DVector::from_column_slice(&payload[d..]);
                let (hu, hv) = model::shard_hvp_pair(&dataset, window_n, w, &u, &v, shard.clone());
                let mut reply = Vec::with_capacity(2 * d);
                reply.extend_from_slice(hu.as_slice());
                reply.extend_from_slice(hv.as_slice());
                write_frame(&mut writer, OP_REDUCE_TWO_HVP, &reply)?;
            }
            other => {
                return Err(Error::Transport(format!("unknown opcode {other:#04x}")));
            }
        }
    }
    Ok(())
}
