//! Operation-count proxy for energy and area.
//!
//! Energy is the weighted sum of dynamic operations for one inference;
//! area is the weighted count of units instantiated in one processing
//! engine per layer (`sharing_factor` multiply units around a shared
//! pre-computer bank). Unit costs are illustrative: only orderings between
//! backends are meaningful, not magnitudes.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::asm::{EncodedWeight, WeightLayout};
use crate::error::{Error, Result};
use crate::fixedpoint::QFormat;
use crate::nn::{Backend, NetworkModel};

/// Width of the neuron accumulator in bits.
pub const ACCUMULATOR_BITS: u32 = 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitCost {
    pub energy: f64,
    pub area: f64,
}

impl UnitCost {
    pub const fn same(v: f64) -> Self {
        UnitCost { energy: v, area: v }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostWeights {
    /// Full array multiplier, 8-bit weights.
    pub multiply_8: UnitCost,
    /// Full array multiplier, 12-bit weights. Other widths scale
    /// quadratically from the 8-bit entry.
    pub multiply_12: UnitCost,
    /// Ripple adder cost per 8 bits of width.
    pub adder_per_byte: UnitCost,
    pub shifter: UnitCost,
    /// One 2:1 mux equivalent of the alphabet select.
    pub select: UnitCost,
    pub precompute_adder: UnitCost,
    pub sharing_factor: usize,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            multiply_8: UnitCost::same(35.0),
            multiply_12: UnitCost::same(80.0),
            adder_per_byte: UnitCost::same(1.0),
            shifter: UnitCost::same(0.5),
            select: UnitCost::same(0.25),
            precompute_adder: UnitCost::same(1.0),
            sharing_factor: 4,
        }
    }
}

const KEYS: [&str; 6] = [
    "multiply_8",
    "multiply_12",
    "adder",
    "shifter",
    "select",
    "precompute_adder",
];

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        if self.sharing_factor == 0 {
            return Err(Error::Precondition(
                "sharing_factor must be at least 1".into(),
            ));
        }
        for (k, u) in KEYS.iter().zip(self.units()) {
            if !(u.energy >= 0.0 && u.area >= 0.0 && u.energy.is_finite() && u.area.is_finite()) {
                return Err(Error::Precondition(format!(
                    "cost {k} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }

    fn units(&self) -> [UnitCost; 6] {
        [
            self.multiply_8,
            self.multiply_12,
            self.adder_per_byte,
            self.shifter,
            self.select,
            self.precompute_adder,
        ]
    }

    fn unit_mut(&mut self, key: &str) -> Option<&mut UnitCost> {
        Some(match key {
            "multiply_8" => &mut self.multiply_8,
            "multiply_12" => &mut self.multiply_12,
            "adder" => &mut self.adder_per_byte,
            "shifter" => &mut self.shifter,
            "select" => &mut self.select,
            "precompute_adder" => &mut self.precompute_adder,
            _ => return None,
        })
    }

    pub fn multiply(&self, weight_bits: u32) -> UnitCost {
        match weight_bits {
            8 => self.multiply_8,
            12 => self.multiply_12,
            b => {
                let s = (f64::from(b) / 8.0).powi(2);
                UnitCost {
                    energy: self.multiply_8.energy * s,
                    area: self.multiply_8.area * s,
                }
            }
        }
    }

    pub fn adder(&self, bits: u32) -> UnitCost {
        let s = f64::from(bits) / 8.0;
        UnitCost {
            energy: self.adder_per_byte.energy * s,
            area: self.adder_per_byte.area * s,
        }
    }

    /// Reads `key = energy, area` lines (area defaults to energy when
    /// omitted) and `sharing_factor = n`. `#` starts a comment; keys not
    /// mentioned keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut w = CostWeights::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let n = i + 1;
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(n, format!("expected `key = value`, found {line:?}"))
            })?;
            let key = key.trim();
            let num = |s: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::parse(n, format!("bad number {:?}", s.trim())))
            };
            if key == "sharing_factor" {
                w.sharing_factor = value.trim().parse().map_err(|_| {
                    Error::parse(n, format!("bad sharing factor {:?}", value.trim()))
                })?;
                continue;
            }
            let unit = w
                .unit_mut(key)
                .ok_or_else(|| Error::parse(n, format!("unknown primitive {key:?}")))?;
            *unit = match value.split_once(',') {
                Some((e, a)) => UnitCost {
                    energy: num(e)?,
                    area: num(a)?,
                },
                None => UnitCost::same(num(value)?),
            };
        }
        w.validate()?;
        Ok(w)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

impl fmt::Display for CostWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, u) in KEYS.iter().zip(self.units()) {
            writeln!(f, "{k} = {}, {}", u.energy, u.area)?;
        }
        writeln!(f, "sharing_factor = {}", self.sharing_factor)
    }
}

impl FromStr for CostWeights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Dynamic operations for one inference.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct OpCounts {
    pub multiplies: u64,
    pub precompute_ops: u64,
    pub selects: u64,
    pub shifts: u64,
    /// Adds combining shifted partial products inside one multiply.
    pub combine_adds: u64,
    /// Accumulator adds: one per product plus one for the bias.
    pub accumulate_adds: u64,
}

impl std::ops::AddAssign for OpCounts {
    fn add_assign(&mut self, o: OpCounts) {
        self.multiplies += o.multiplies;
        self.precompute_ops += o.precompute_ops;
        self.selects += o.selects;
        self.shifts += o.shifts;
        self.combine_adds += o.combine_adds;
        self.accumulate_adds += o.accumulate_adds;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerCost {
    pub layer: usize,
    pub backend: Backend,
    pub in_dim: usize,
    pub out_dim: usize,
    pub counts: OpCounts,
    pub energy: f64,
    pub area: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostReport {
    pub weight_bits: u32,
    pub layers: Vec<LayerCost>,
    pub total: OpCounts,
    pub energy: f64,
    pub area: f64,
    /// Energy relative to every layer on the full multiplier.
    pub relative_energy: f64,
    pub relative_area: f64,
}

fn combine_bits(weight_bits: u32) -> u32 {
    QFormat::INPUT.total_bits() + weight_bits
}

fn layer_counts(
    weights: &[i32],
    in_dim: usize,
    out_dim: usize,
    backend: &Backend,
    layout: WeightLayout,
    sharing_factor: usize,
) -> Result<OpCounts> {
    let products = (in_dim * out_dim) as u64;
    let mut c = OpCounts {
        accumulate_adds: products + out_dim as u64,
        ..OpCounts::default()
    };
    let alphabets = match backend {
        Backend::Exact => {
            c.multiplies = products;
            return Ok(c);
        }
        Backend::Man => crate::asm::AlphabetSet::one(),
        Backend::Asm(a) => a.clone(),
    };
    for &w in weights {
        let ops = EncodedWeight::encode(w, layout, &alphabets)?.ops();
        if !matches!(backend, Backend::Man) {
            c.selects += ops.selects as u64;
        }
        c.shifts += ops.shifts as u64;
        c.combine_adds += ops.adds as u64;
    }
    if let Backend::Asm(a) = backend {
        let banks = (in_dim * out_dim.div_ceil(sharing_factor)) as u64;
        c.precompute_ops = (a.len() as u64 - 1) * banks;
    }
    Ok(c)
}

fn energy_of(c: &OpCounts, weight_bits: u32, w: &CostWeights) -> f64 {
    c.multiplies as f64 * w.multiply(weight_bits).energy
        + c.precompute_ops as f64 * w.precompute_adder.energy
        + c.selects as f64 * w.select.energy
        + c.shifts as f64 * w.shifter.energy
        + c.combine_adds as f64 * w.adder(combine_bits(weight_bits)).energy
        + c.accumulate_adds as f64 * w.adder(ACCUMULATOR_BITS).energy
}

/// Units instantiated in one engine: `sharing_factor` multiply slots, each
/// with an accumulator, around at most one bank.
fn engine_area(backend: &Backend, layout: WeightLayout, w: &CostWeights) -> f64 {
    let bits = layout.total_bits();
    let groups = layout.group_count() as f64;
    let sf = w.sharing_factor as f64;
    let acc = w.adder(ACCUMULATOR_BITS).area;
    let combine = (groups - 1.0) * w.adder(combine_bits(bits)).area;
    match backend {
        Backend::Exact => sf * (w.multiply(bits).area + acc),
        Backend::Man => sf * (groups * w.shifter.area + combine + acc),
        Backend::Asm(a) => {
            let n = a.len() as f64;
            // An n-way select is n - 1 two-input muxes.
            let per_group = w.shifter.area + (n - 1.0) * w.select.area;
            (n - 1.0) * w.precompute_adder.area + sf * (groups * per_group + combine + acc)
        }
    }
}

/// Counts, energy and area for `model` with one backend per layer.
/// Fails if a weight is not representable on its layer's backend.
pub fn count_ops(
    model: &NetworkModel,
    backends: &[Backend],
    weights: &CostWeights,
) -> Result<CostReport> {
    model.validate()?;
    weights.validate()?;
    if backends.len() != model.layers.len() {
        return Err(Error::DimensionMismatch {
            expected: model.layers.len(),
            found: backends.len(),
        });
    }
    let layout = model.weight_layout()?;
    let bits = layout.total_bits();
    let mut layers = Vec::with_capacity(backends.len());
    let mut total = OpCounts::default();
    let (mut energy, mut area, mut conv_energy, mut conv_area) = (0.0, 0.0, 0.0, 0.0);
    for (i, (l, b)) in model.layers.iter().zip(backends).enumerate() {
        let counts = layer_counts(
            &l.weights,
            l.in_dim,
            l.out_dim,
            b,
            layout,
            weights.sharing_factor,
        )?;
        let conv = layer_counts(&l.weights, l.in_dim, l.out_dim, &Backend::Exact, layout, 1)?;
        let e = energy_of(&counts, bits, weights);
        let a = engine_area(b, layout, weights);
        energy += e;
        area += a;
        conv_energy += energy_of(&conv, bits, weights);
        conv_area += engine_area(&Backend::Exact, layout, weights);
        total += counts;
        layers.push(LayerCost {
            layer: i,
            backend: b.clone(),
            in_dim: l.in_dim,
            out_dim: l.out_dim,
            counts,
            energy: e,
            area: a,
        });
    }
    Ok(CostReport {
        weight_bits: bits,
        layers,
        total,
        energy,
        area,
        relative_energy: ratio(energy, conv_energy),
        relative_area: ratio(area, conv_area),
    })
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

/// `(energy, area)` of `candidate` relative to `reference`.
pub fn relative_scores(candidate: &CostReport, reference: &CostReport) -> (f64, f64) {
    (
        ratio(candidate.energy, reference.energy),
        ratio(candidate.area, reference.area),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixedCost {
    pub tail_layers: usize,
    /// Tail share of multiply-equivalent operations (`in * out` per layer).
    pub tail_share: f64,
    /// Tail share of proxy energy under the given backends.
    pub tail_energy_share: f64,
}

/// How much of the work sits in the last `tail_layers` layers.
pub fn mixed_cost(
    model: &NetworkModel,
    backends: &[Backend],
    weights: &CostWeights,
    tail_layers: usize,
) -> Result<MixedCost> {
    let report = count_ops(model, backends, weights)?;
    let n = report.layers.len();
    let tail = tail_layers.min(n);
    let products = |l: &LayerCost| (l.in_dim * l.out_dim) as f64;
    let all: f64 = report.layers.iter().map(products).sum();
    let tail_ops: f64 = report.layers[n - tail..].iter().map(products).sum();
    let tail_energy: f64 = report.layers[n - tail..].iter().map(|l| l.energy).sum();
    Ok(MixedCost {
        tail_layers: tail,
        tail_share: tail_ops / all,
        tail_energy_share: ratio(tail_energy, report.energy),
    })
}

impl CostReport {
    /// Per-layer rows followed by a `total` row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "layer",
            "backend",
            "multiplies",
            "precompute_ops",
            "selects",
            "shifts",
            "combine_adds",
            "accumulate_adds",
            "energy",
            "area",
        ])?;
        let row = |name: String, backend: String, c: &OpCounts, e: f64, a: f64| {
            vec![
                name,
                backend,
                c.multiplies.to_string(),
                c.precompute_ops.to_string(),
                c.selects.to_string(),
                c.shifts.to_string(),
                c.combine_adds.to_string(),
                c.accumulate_adds.to_string(),
                format!("{e:.4}"),
                format!("{a:.4}"),
            ]
        };
        for l in &self.layers {
            w.write_record(row(
                l.layer.to_string(),
                l.backend.to_string(),
                &l.counts,
                l.energy,
                l.area,
            ))?;
        }
        w.write_record(row(
            "total".into(),
            self.backend_label(),
            &self.total,
            self.energy,
            self.area,
        ))?;
        w.flush()?;
        Ok(())
    }

    /// The common backend, or `mixed`.
    pub fn backend_label(&self) -> String {
        let mut seen: BTreeMap<String, ()> = BTreeMap::new();
        for l in &self.layers {
            seen.insert(l.backend.to_string(), ());
        }
        match seen.len() {
            1 => seen.into_keys().next().unwrap_or_default(),
            _ => "mixed".into(),
        }
    }
}

/// One row per report: `backend,weight_bits,energy,area,relative_energy,relative_area`.
pub fn write_comparison_csv<W: Write>(reports: &[CostReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "backend",
        "weight_bits",
        "energy",
        "area",
        "relative_energy",
        "relative_area",
    ])?;
    for r in reports {
        w.write_record([
            r.backend_label(),
            r.weight_bits.to_string(),
            format!("{:.4}", r.energy),
            format!("{:.4}", r.area),
            format!("{:.6}", r.relative_energy),
            format!("{:.6}", r.relative_area),
        ])?;
    }
    w.flush()?;
    Ok(())
}
