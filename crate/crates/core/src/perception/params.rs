use std::fmt;

use serde::{Deserialize, Serialize};

use super::PerceptionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    Lin,
    Dnn,
    Softmax,
}

impl LayerKind {
    pub fn is_dense(self) -> bool {
        !matches!(self, LayerKind::Conv)
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayerKind::Conv => "conv",
            LayerKind::Lin => "lin",
            LayerKind::Dnn => "dnn",
            LayerKind::Softmax => "softmax",
        })
    }
}

/// One architecture row. Conv rows need `m`, `r`, `n`, `in_channels`;
/// dense rows need `n` and `in_features`. Strides are informational.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    #[serde(default)]
    pub m: Option<u64>,
    #[serde(default)]
    pub r: Option<u64>,
    pub n: Option<u64>,
    #[serde(default)]
    pub p: Option<u64>,
    #[serde(default)]
    pub q: Option<u64>,
    #[serde(default)]
    pub in_channels: Option<u64>,
    #[serde(default)]
    pub in_features: Option<u64>,
    /// Published count, kept when the formula cannot reproduce it.
    #[serde(default)]
    pub reported: Option<u64>,
}

impl LayerSpec {
    fn blank(name: &str, kind: LayerKind) -> Self {
        Self {
            name: name.into(),
            kind,
            m: None,
            r: None,
            n: None,
            p: None,
            q: None,
            in_channels: None,
            in_features: None,
            reported: None,
        }
    }

    pub fn conv(name: &str, m: u64, r: u64, n: u64, in_channels: u64) -> Self {
        Self {
            m: Some(m),
            r: Some(r),
            n: Some(n),
            in_channels: Some(in_channels),
            ..Self::blank(name, LayerKind::Conv)
        }
    }

    pub fn dense(name: &str, kind: LayerKind, in_features: u64, n: u64) -> Self {
        Self {
            n: Some(n),
            in_features: Some(in_features),
            ..Self::blank(name, kind)
        }
    }

    pub fn with_strides(mut self, p: u64, q: u64) -> Self {
        self.p = Some(p);
        self.q = Some(q);
        self
    }

    pub fn with_reported(mut self, count: u64) -> Self {
        self.reported = Some(count);
        self
    }

    fn field(&self, name: &'static str, v: Option<u64>) -> Result<u64, PerceptionError> {
        match v {
            Some(0) => Err(PerceptionError::LayerField {
                layer: self.name.clone(),
                field: name,
                problem: "must be positive",
            }),
            Some(x) => Ok(x),
            None => Err(PerceptionError::LayerField {
                layer: self.name.clone(),
                field: name,
                problem: "missing",
            }),
        }
    }
}

/// Conv: `m·r·n·in_channels`. Dense: `in_features·n`, no bias.
pub fn layer_param_count(spec: &LayerSpec) -> Result<u64, PerceptionError> {
    if spec.kind.is_dense() {
        Ok(spec.field("in_features", spec.in_features)? * spec.field("n", spec.n)?)
    } else {
        Ok(spec.field("m", spec.m)?
            * spec.field("r", spec.r)?
            * spec.field("n", spec.n)?
            * spec.field("in_channels", spec.in_channels)?)
    }
}

/// Whether some positive integer channel count makes the conv formula hit `reported`.
pub fn conv_derivable(m: u64, r: u64, n: u64, reported: u64) -> Option<u64> {
    let base = m * r * n;
    (base > 0 && reported.is_multiple_of(base) && reported > 0).then(|| reported / base)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamRow {
    pub name: String,
    pub kind: LayerKind,
    /// Formula result, absent when not derivable.
    pub computed: Option<u64>,
    pub reported: Option<u64>,
    /// Count used toward the total.
    pub used: u64,
    pub derivable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamTable {
    pub rows: Vec<ParamRow>,
    pub total: u64,
}

/// Layers whose fields are incomplete fall back to `reported` and are
/// marked not derivable; with neither, the table fails.
pub fn model_param_table(specs: &[LayerSpec]) -> Result<ParamTable, PerceptionError> {
    let mut rows = Vec::with_capacity(specs.len());
    for s in specs {
        let row = match (layer_param_count(s), s.reported) {
            (Ok(c), _) => ParamRow {
                name: s.name.clone(),
                kind: s.kind,
                computed: Some(c),
                reported: s.reported,
                used: c,
                derivable: s.reported.is_none_or(|r| r == c),
            },
            (Err(_), Some(r)) => ParamRow {
                name: s.name.clone(),
                kind: s.kind,
                computed: None,
                reported: Some(r),
                used: r,
                derivable: false,
            },
            (Err(e), None) => return Err(e),
        };
        rows.push(row);
    }
    let total = rows.iter().map(|r| r.used).sum();
    Ok(ParamTable { rows, total })
}

/// The keyword-spotting network: conv, conv, lin, dnn, softmax.
///
/// The second conv row (m=12, r=5, n=64, reported 164.8K) has no integer
/// input channel count matching its reported size, so it carries only
/// the reported count.
pub fn reference_architecture() -> Vec<LayerSpec> {
    let mut conv2 = LayerSpec::blank("conv2", LayerKind::Conv).with_reported(164_800);
    conv2.m = Some(12);
    conv2.r = Some(5);
    conv2.n = Some(64);
    vec![
        LayerSpec::conv("conv1", 24, 10, 64, 1).with_strides(1, 1),
        conv2.with_strides(1, 1),
        LayerSpec::dense("lin", LayerKind::Lin, 2048, 32),
        LayerSpec::dense("dnn", LayerKind::Dnn, 32, 128),
        LayerSpec::dense("softmax", LayerKind::Softmax, 128, 4),
    ]
}

/// `15360 → "15.4K"`, `250304 → "250.3K"`, `512 → "0.5K"`.
pub fn format_k(count: u64) -> String {
    format!("{:.1}K", count as f64 / 1000.0)
}

impl fmt::Display for ParamTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8} {:<8} {:>8} {:>8}  note", "layer", "type", "params", "approx")?;
        for r in &self.rows {
            let note = if r.derivable { "" } else { "not derivable; published value used" };
            let line = format!(
                "{:<8} {:<8} {:>8} {:>8}  {note}",
                r.name,
                r.kind.to_string(),
                r.used,
                format_k(r.used)
            );
            writeln!(f, "{}", line.trim_end())?;
        }
        write!(f, "{:<8} {:<8} {:>8} {:>8}", "total", "", self.total, format_k(self.total))
    }
}
