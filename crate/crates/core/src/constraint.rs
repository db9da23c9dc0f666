//! Projection of weights onto the values an alphabet set can produce.
//!
//! Groups are rounded LSB first. At each level the composite made of the
//! current group and everything below it is rounded to the nearest value
//! reachable from three lower-part choices: the lower result already chosen,
//! all lower groups at zero (the current group rounded up), or all lower
//! groups at their largest supported value (rounded down). Midpoints go to
//! the larger magnitude. An exhaustive nearest-value search is kept
//! alongside as the arbiter.

use std::io::Write;

use crate::asm::{AlphabetSet, WeightLayout};
use crate::error::{Error, Result};

/// Which group-rounding cascade [`constrain_weight`] runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum CascadeMode {
    /// Composite rounding with lower-part reset (default).
    #[default]
    Composite,
    /// Each group rounded on its own value plus incoming carry; lower groups
    /// are never revisited.
    GroupLocal,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConstraintConfig {
    pub layout: WeightLayout,
    pub alphabets: AlphabetSet,
    pub mode: CascadeMode,
}

impl ConstraintConfig {
    pub fn new(weight_bits: u32, alphabets: AlphabetSet) -> Result<Self> {
        Ok(ConstraintConfig {
            layout: WeightLayout::new(weight_bits)?,
            alphabets,
            mode: CascadeMode::Composite,
        })
    }

    pub fn with_mode(mut self, mode: CascadeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn weight_bits(&self) -> u32 {
        self.layout.total_bits()
    }

    pub fn is_supported(&self, raw: i32) -> bool {
        self.layout
            .is_supported(raw.unsigned_abs(), &self.alphabets)
    }

    /// Largest magnitude whose every group is supported.
    pub fn max_supported_magnitude(&self) -> u32 {
        self.layout
            .slots()
            .map(|s| top_supported(&self.alphabets, s.bits) << s.position)
            .sum()
    }
}

fn top_supported(alphabets: &AlphabetSet, group_bits: u32) -> u32 {
    // Bit 0 (value zero) is always set, so the mask is never empty.
    15 - alphabets.supported_mask(group_bits).leading_zeros()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundedGroup {
    pub value: u32,
    /// Set when the nearest value is `2^group_bits`; `value` is then 0.
    pub carry: bool,
}

/// Rounds one group to the nearest supported value using the midpoint of
/// the two neighbouring supported values as threshold; the midpoint itself
/// rounds up. `2^group_bits` counts as a neighbour above the top value.
pub fn round_group(value: u32, alphabets: &AlphabetSet, group_bits: u32) -> RoundedGroup {
    let limit = 1u32 << group_bits;
    assert!(
        value < limit,
        "group value {value} out of {group_bits}-bit range"
    );
    let mask = alphabets.supported_mask(group_bits);
    if mask & (1 << value) != 0 {
        return RoundedGroup {
            value,
            carry: false,
        };
    }
    let below = (0..value).rev().find(|v| mask & (1 << v) != 0).unwrap_or(0);
    let above = (value + 1..limit)
        .find(|v| mask & (1 << v) != 0)
        .unwrap_or(limit);
    // value >= (below + above) / 2, kept in integers.
    if 2 * value >= below + above {
        if above == limit {
            RoundedGroup {
                value: 0,
                carry: true,
            }
        } else {
            RoundedGroup {
                value: above,
                carry: false,
            }
        }
    } else {
        RoundedGroup {
            value: below,
            carry: false,
        }
    }
}

/// Nearest-by-distance pick with ties to the larger candidate.
fn closer(target: u32, a: u32, b: u32) -> u32 {
    let (da, db) = (a.abs_diff(target), b.abs_diff(target));
    if da < db || (da == db && a > b) {
        a
    } else {
        b
    }
}

fn constrain_composite(magnitude: u32, cfg: &ConstraintConfig) -> u32 {
    let mut lower = 0u32;
    let mut lower_max = 0u32;
    for slot in cfg.layout.slots().rev() {
        let width = slot.position + slot.bits;
        let target = magnitude & ((1 << width) - 1);
        let mut best: Option<u32> = None;
        for g in cfg.alphabets.supported_values(slot.bits) {
            for low in [lower, 0, lower_max] {
                let cand = (g << slot.position) | low;
                best = Some(match best {
                    None => cand,
                    Some(b) => closer(target, cand, b),
                });
            }
        }
        lower = best.expect("zero is always supported");
        lower_max |= top_supported(&cfg.alphabets, slot.bits) << slot.position;
    }
    lower
}

fn constrain_group_local(magnitude: u32, cfg: &ConstraintConfig) -> u32 {
    let mut out = 0u32;
    let mut carry = 0u32;
    for slot in cfg.layout.slots().rev() {
        let g = ((magnitude >> slot.position) & ((1 << slot.bits) - 1)) + carry;
        let r = if g == 1 << slot.bits {
            RoundedGroup {
                value: 0,
                carry: true,
            }
        } else {
            round_group(g, &cfg.alphabets, slot.bits)
        };
        out |= r.value << slot.position;
        carry = u32::from(r.carry);
    }
    if carry == 1 {
        cfg.max_supported_magnitude()
    } else {
        out
    }
}

pub fn constrain_magnitude(magnitude: u32, cfg: &ConstraintConfig) -> u32 {
    let magnitude = magnitude.min(cfg.layout.max_magnitude());
    match cfg.mode {
        CascadeMode::Composite => constrain_composite(magnitude, cfg),
        CascadeMode::GroupLocal => constrain_group_local(magnitude, cfg),
    }
}

/// Projects a raw weight so every group is supported; the sign is kept.
pub fn constrain_weight(raw: i32, cfg: &ConstraintConfig) -> i32 {
    let m = constrain_magnitude(raw.unsigned_abs(), cfg) as i32;
    if raw < 0 {
        -m
    } else {
        m
    }
}

/// Literal exhaustive search over every fully supported magnitude; ties go
/// to the larger magnitude.
pub fn nearest_supported_oracle(raw: i32, cfg: &ConstraintConfig) -> i32 {
    let target = raw.unsigned_abs().min(cfg.layout.max_magnitude());
    let mut best: Option<u32> = None;
    for cand in 0..=cfg.layout.max_magnitude() {
        if cfg.layout.is_supported(cand, &cfg.alphabets) {
            best = Some(match best {
                None => cand,
                Some(b) => closer(target, cand, b),
            });
        }
    }
    let m = best.expect("zero is always supported") as i32;
    if raw < 0 {
        -m
    } else {
        m
    }
}

/// Largest distance between consecutive supported magnitudes.
pub fn max_supported_gap(cfg: &ConstraintConfig) -> u32 {
    let supported: Vec<u32> = (0..=cfg.layout.max_magnitude())
        .filter(|&m| cfg.layout.is_supported(m, &cfg.alphabets))
        .collect();
    supported.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
}

/// Precomputed projection for every magnitude of one configuration.
#[derive(Clone, Debug)]
pub struct ConstraintTable {
    config: ConstraintConfig,
    table: Vec<u16>,
}

impl ConstraintTable {
    pub fn new(config: ConstraintConfig) -> Self {
        let table = (0..=config.layout.max_magnitude())
            .map(|m| constrain_magnitude(m, &config) as u16)
            .collect();
        ConstraintTable { config, table }
    }

    pub fn config(&self) -> &ConstraintConfig {
        &self.config
    }

    #[inline]
    pub fn apply(&self, raw: i32) -> i32 {
        let m = raw.unsigned_abs().min(self.table.len() as u32 - 1);
        let c = i32::from(self.table[m as usize]);
        if raw < 0 {
            -c
        } else {
            c
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerDistortion {
    pub layer: usize,
    pub alphabets: AlphabetSet,
    pub count: usize,
    pub modified: usize,
    pub max_abs_err: u32,
    pub sum_abs_err: u64,
}

impl LayerDistortion {
    pub fn mean_abs_err(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum_abs_err as f64 / self.count as f64
        }
    }

    pub fn modified_fraction(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.modified as f64 / self.count as f64
        }
    }

    fn merge(&mut self, other: &LayerDistortion) {
        self.count += other.count;
        self.modified += other.modified;
        self.max_abs_err = self.max_abs_err.max(other.max_abs_err);
        self.sum_abs_err += other.sum_abs_err;
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DistortionReport {
    pub layers: Vec<LayerDistortion>,
}

impl DistortionReport {
    pub fn total(&self) -> (usize, usize, u32, f64) {
        let count: usize = self.layers.iter().map(|l| l.count).sum();
        let modified = self.layers.iter().map(|l| l.modified).sum();
        let max = self.layers.iter().map(|l| l.max_abs_err).max().unwrap_or(0);
        let sum: u64 = self.layers.iter().map(|l| l.sum_abs_err).sum();
        let mean = if count == 0 {
            0.0
        } else {
            sum as f64 / count as f64
        };
        (count, modified, max, mean)
    }

    /// Columns: layer, alphabet_set, modified_count, max_abs_err, mean_abs_err.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "layer",
            "alphabet_set",
            "modified_count",
            "max_abs_err",
            "mean_abs_err",
        ])?;
        for l in &self.layers {
            w.write_record([
                l.layer.to_string(),
                l.alphabets.to_string(),
                l.modified.to_string(),
                l.max_abs_err.to_string(),
                format!("{:.6}", l.mean_abs_err()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Projects a slice of raw weights, returning the result and its distortion.
pub fn constrain_slice(
    layer: usize,
    weights: &[i32],
    table: &ConstraintTable,
) -> (Vec<i32>, LayerDistortion) {
    let mut stats = LayerDistortion {
        layer,
        alphabets: table.config().alphabets.clone(),
        count: 0,
        modified: 0,
        max_abs_err: 0,
        sum_abs_err: 0,
    };
    let out = weights
        .iter()
        .map(|&w| {
            let c = table.apply(w);
            let err = c.abs_diff(w);
            stats.count += 1;
            stats.modified += usize::from(err != 0);
            stats.max_abs_err = stats.max_abs_err.max(err);
            stats.sum_abs_err += u64::from(err);
            c
        })
        .collect();
    (out, stats)
}

/// Applies one configuration per layer; each layer is a list of weight
/// slices (e.g. the weight matrix and the bias vector) reported together.
pub fn constrain_network(
    layers: &[Vec<&[i32]>],
    configs: &[ConstraintConfig],
) -> Result<(Vec<Vec<Vec<i32>>>, DistortionReport)> {
    if layers.len() != configs.len() {
        return Err(Error::DimensionMismatch {
            expected: layers.len(),
            found: configs.len(),
        });
    }
    let mut report = DistortionReport::default();
    let mut out = Vec::with_capacity(layers.len());
    for (i, (parts, cfg)) in layers.iter().zip(configs).enumerate() {
        let table = ConstraintTable::new(cfg.clone());
        let mut layer_out = Vec::with_capacity(parts.len());
        let mut stats: Option<LayerDistortion> = None;
        for part in parts {
            let (projected, s) = constrain_slice(i, part, &table);
            match stats.as_mut() {
                Some(acc) => acc.merge(&s),
                None => stats = Some(s),
            }
            layer_out.push(projected);
        }
        report.layers.push(stats.unwrap_or(LayerDistortion {
            layer: i,
            alphabets: cfg.alphabets.clone(),
            count: 0,
            modified: 0,
            max_abs_err: 0,
            sum_abs_err: 0,
        }));
        out.push(layer_out);
    }
    Ok((out, report))
}
