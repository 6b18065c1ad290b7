//! Generic node kinds usable with any payload type.

use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::graph::{NodeCatalog, NodeDef, NodeKind, PortSpec, Ports};
use super::node::{Node, NodeContext, NodeError, Wake};
use super::{PacketData, Timestamp};

fn parse<T: DeserializeOwned>(params: &serde_json::Value) -> Result<T, String> {
    let v = if params.is_null() {
        serde_json::Value::Object(Default::default())
    } else {
        params.clone()
    };
    serde_json::from_value(v).map_err(|e| e.to_string())
}

fn period_us(rate_hz: f64) -> Result<u64, String> {
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(format!("rate_hz must be positive, got {rate_hz}"));
    }
    Ok((1e6 / rate_hz).round().max(1.0) as u64)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceParams {
    count: u64,
    rate_hz: f64,
    #[serde(default)]
    start_us: u64,
}

/// Emits `count` packets `P::from_index(i)` on `out` at `start + i/rate`.
pub struct SourceKind;

struct Source<P> {
    params: SourceParams,
    period: u64,
    next: u64,
    make: fn(u64) -> P,
}

impl<P: PacketData> NodeKind<P> for SourceKind {
    fn ports(&self, params: &serde_json::Value) -> Result<Ports, String> {
        let p: SourceParams = parse(params)?;
        period_us(p.rate_hz)?;
        Ok(Ports::new(vec![], vec![PortSpec::required("out")]))
    }

    fn build(&self, def: &NodeDef) -> Result<Box<dyn Node<P>>, String> {
        let params: SourceParams = parse(&def.params)?;
        Ok(Box::new(Source {
            period: period_us(params.rate_hz)?,
            params,
            next: 0,
            make: P::from_index,
        }))
    }
}

impl<P: PacketData> Source<P> {
    fn due(&self, i: u64) -> Timestamp {
        Timestamp::from_micros(self.params.start_us + i * self.period)
    }

    fn schedule(&self) -> Wake {
        if self.next >= self.params.count {
            Wake::Done
        } else {
            Wake::At(self.due(self.next))
        }
    }
}

impl<P: PacketData> Node<P> for Source<P> {
    fn start(&mut self, _ctx: &mut NodeContext<'_, P>) -> Result<Wake, NodeError> {
        Ok(self.schedule())
    }

    fn wake(&mut self, ctx: &mut NodeContext<'_, P>) -> Result<Wake, NodeError> {
        while self.next < self.params.count && self.due(self.next) <= ctx.now() {
            ctx.push("out", (self.make)(self.next))?;
            self.next += 1;
        }
        Ok(self.schedule())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BitSourceParams {
    bits: Vec<u8>,
    rate_hz: f64,
    #[serde(default)]
    start_us: u64,
}

/// Emits a fixed bit sequence on the bit-typed port `bits`.
pub struct BitSourceKind;

struct BitSource {
    params: BitSourceParams,
    period: u64,
    next: usize,
}

impl<P: PacketData> NodeKind<P> for BitSourceKind {
    fn ports(&self, params: &serde_json::Value) -> Result<Ports, String> {
        let p: BitSourceParams = parse(params)?;
        period_us(p.rate_hz)?;
        if p.bits.iter().any(|b| *b > 1) {
            return Err("bits must be 0 or 1".into());
        }
        Ok(Ports::new(vec![], vec![PortSpec::required("bits").bits()]))
    }

    fn build(&self, def: &NodeDef) -> Result<Box<dyn Node<P>>, String> {
        let params: BitSourceParams = parse(&def.params)?;
        Ok(Box::new(BitSource {
            period: period_us(params.rate_hz)?,
            params,
            next: 0,
        }))
    }
}

impl BitSource {
    fn due(&self, i: usize) -> Timestamp {
        Timestamp::from_micros(self.params.start_us + i as u64 * self.period)
    }

    fn schedule(&self) -> Wake {
        if self.next >= self.params.bits.len() {
            Wake::Done
        } else {
            Wake::At(self.due(self.next))
        }
    }
}

impl<P: PacketData> Node<P> for BitSource {
    fn start(&mut self, _ctx: &mut NodeContext<'_, P>) -> Result<Wake, NodeError> {
        Ok(self.schedule())
    }

    fn wake(&mut self, ctx: &mut NodeContext<'_, P>) -> Result<Wake, NodeError> {
        while self.next < self.params.bits.len() && self.due(self.next) <= ctx.now() {
            ctx.push("bits", P::from_bit(self.params.bits[self.next] == 1))?;
            self.next += 1;
        }
        Ok(self.schedule())
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SinkParams {
    rate_hz: Option<f64>,
}

/// Consumes `in`. With `rate_hz` it takes one packet per service period,
/// otherwise it drains the port on every wake.
pub struct SinkKind;

struct Sink {
    period: Option<u64>,
    busy_until: Timestamp,
}

impl<P: PacketData> NodeKind<P> for SinkKind {
    fn ports(&self, params: &serde_json::Value) -> Result<Ports, String> {
        let p: SinkParams = parse(params)?;
        p.rate_hz.map(period_us).transpose()?;
        Ok(Ports::new(vec![PortSpec::required("in")], vec![]))
    }

    fn build(&self, def: &NodeDef) -> Result<Box<dyn Node<P>>, String> {
        let p: SinkParams = parse(&def.params)?;
        Ok(Box::new(Sink {
            period: p.rate_hz.map(period_us).transpose()?,
            busy_until: Timestamp::ZERO,
        }))
    }
}

impl<P: PacketData> Node<P> for Sink {
    fn wake(&mut self, ctx: &mut NodeContext<'_, P>) -> Result<Wake, NodeError> {
        let Some(period) = self.period else {
            ctx.pop_all("in")?;
            return Ok(Wake::Input);
        };
        if ctx.now() < self.busy_until {
            return Ok(Wake::At(self.busy_until));
        }
        if ctx.pop("in")?.is_some() {
            self.busy_until = ctx.now() + period;
            return Ok(Wake::At(self.busy_until));
        }
        Ok(Wake::Input)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitterParams {
    outputs: usize,
}

/// Fan-out: forwards every packet on `in` to `out0..out{n-1}`, sharing the payload.
pub struct SplitterKind;

struct Splitter {
    ports: Vec<String>,
}

impl<P: PacketData> NodeKind<P> for SplitterKind {
    fn ports(&self, params: &serde_json::Value) -> Result<Ports, String> {
        let p: SplitterParams = parse(params)?;
        if p.outputs == 0 {
            return Err("outputs must be >= 1".into());
        }
        Ok(Ports::new(
            vec![PortSpec::required("in")],
            (0..p.outputs)
                .map(|i| PortSpec::optional(format!("out{i}")))
                .collect(),
        ))
    }

    fn build(&self, def: &NodeDef) -> Result<Box<dyn Node<P>>, String> {
        let p: SplitterParams = parse(&def.params)?;
        Ok(Box::new(Splitter {
            ports: (0..p.outputs).map(|i| format!("out{i}")).collect(),
        }))
    }
}

impl<P: PacketData> Node<P> for Splitter {
    fn wake(&mut self, ctx: &mut NodeContext<'_, P>) -> Result<Wake, NodeError> {
        while let Some(p) = ctx.pop("in")? {
            let payload: Arc<P> = Arc::clone(p.shared_payload());
            for port in &self.ports {
                ctx.push_shared(port, Arc::clone(&payload))?;
            }
        }
        Ok(Wake::Input)
    }
}

impl<P: PacketData> NodeCatalog<P> {
    /// Catalog with `source`, `bit_source`, `sink` and `splitter`.
    pub fn with_builtins() -> Self {
        let mut c = Self::empty();
        c.register("source", SourceKind)
            .register("bit_source", BitSourceKind)
            .register("sink", SinkKind)
            .register("splitter", SplitterKind);
        c
    }
}
