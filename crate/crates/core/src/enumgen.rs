//! Binary iteration table over subset codes.
//!
//! A non-empty subset with code `N` sits in column `⌊log2 N⌋` (its highest
//! sensor) and row `N - 2^col` (the remaining, lower sensors). A row id is
//! itself a subset code, so once a mask is known to be infeasible every row
//! containing it can be dropped in all columns at once, and a cardinality cap
//! becomes a popcount restriction on rows.
//!
//! [`SubsetGenerator`] walks the table either column by column or grouped by
//! cardinality (the default), skipping supersets of anything registered in its
//! [`PruneRegistry`], including masks registered while iterating.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{SensorSet, MAX_POOL_SIZE};

/// Position of a subset code in the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TableCoord {
    pub col: u32,
    pub row: u128,
}

pub fn encode(n_s: u128) -> Result<TableCoord> {
    if n_s == 0 {
        return Err(Error::Domain("empty set not in table".into()));
    }
    let col = 127 - n_s.leading_zeros();
    Ok(TableCoord {
        col,
        row: n_s - (1u128 << col),
    })
}

pub fn decode(coord: TableCoord) -> Result<u128> {
    if coord.col as usize >= MAX_POOL_SIZE {
        return Err(Error::Domain(format!("column {} exceeds the mask width", coord.col)));
    }
    let bit = 1u128 << coord.col;
    if coord.row >= bit {
        return Err(Error::Domain(format!(
            "row {} does not lie below column {}",
            coord.row, coord.col
        )));
    }
    Ok(bit | coord.row)
}

/// Masks whose supersets must not be emitted. Kept minimal: no registered mask
/// is a subset of another.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PruneRegistry {
    masks: Vec<u128>,
}

impl PruneRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `mask`. Returns false when it is empty or already covered by a
    /// registered subset; registered supersets of `mask` are dropped.
    pub fn register(&mut self, mask: u128) -> bool {
        if mask == 0 || self.covers(mask) {
            return false;
        }
        self.masks.retain(|&m| m & mask != mask);
        self.masks.push(mask);
        true
    }

    /// Whether some registered mask is a subset of `mask`.
    pub fn covers(&self, mask: u128) -> bool {
        self.masks.iter().any(|&m| m & mask == m)
    }

    pub fn masks(&self) -> &[u128] {
        &self.masks
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnumerationOrder {
    /// Increasing popcount; within a popcount, columns then rows ascending.
    #[default]
    CardinalityFirst,
    /// Table reading order: column by column, rows ascending.
    ColumnMajor,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub pool_size: usize,
    pub max_cardinality: Option<usize>,
    pub order: EnumerationOrder,
    /// Bitmask of the columns this generator walks; all columns by default.
    pub columns: u128,
    /// Test the registry against row bits alone before the per-cell test.
    pub row_skipping: bool,
    /// Keep the ids of skipped rows and masks in [`SkipTelemetry`].
    pub record_skips: bool,
}

impl GeneratorConfig {
    pub fn new(pool_size: usize) -> Result<Self> {
        if pool_size == 0 || pool_size > MAX_POOL_SIZE {
            return Err(Error::Input(format!(
                "pool size must lie in [1, {MAX_POOL_SIZE}], got {pool_size}"
            )));
        }
        Ok(GeneratorConfig {
            pool_size,
            max_cardinality: None,
            order: EnumerationOrder::default(),
            columns: SensorSet::full(pool_size).mask(),
            row_skipping: true,
            record_skips: false,
        })
    }

    pub fn with_cap(mut self, cap: usize) -> Result<Self> {
        if cap > self.pool_size {
            return Err(Error::Input(format!(
                "cardinality cap {cap} exceeds the pool size {}",
                self.pool_size
            )));
        }
        self.max_cardinality = Some(cap);
        Ok(self)
    }

    pub fn with_order(mut self, order: EnumerationOrder) -> Self {
        self.order = order;
        self
    }

    pub fn with_columns(mut self, columns: u128) -> Self {
        self.columns = columns & SensorSet::full(self.pool_size).mask();
        self
    }

    fn cap(&self) -> usize {
        self.max_cardinality.unwrap_or(self.pool_size)
    }
}

/// Splits the columns of a `pool_size` table into at most `parts` column
/// masks of roughly equal cell count. Deterministic.
pub fn partition_columns(pool_size: usize, parts: usize) -> Vec<u128> {
    let parts = parts.clamp(1, pool_size.max(1));
    let mut loads = vec![0f64; parts];
    let mut out = vec![0u128; parts];
    // heaviest column first onto the lightest part
    for col in (0..pool_size).rev() {
        let (i, _) = loads
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
            .expect("at least one part");
        loads[i] += (col as f64).exp2();
        out[i] |= 1u128 << col;
    }
    out.retain(|&m| m != 0);
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SkipTelemetry {
    pub emitted: u64,
    /// Cells dropped because a registered mask lies within the row bits.
    pub row_skips: u64,
    /// Cells dropped because a registered mask needs the column bit.
    pub cell_skips: u64,
    /// Distinct rows dropped wholesale (only with `record_skips`).
    pub skipped_rows: BTreeSet<u128>,
    /// Every mask dropped by pruning (only with `record_skips`).
    pub skipped_masks: BTreeSet<u128>,
}

/// Single-consumer cursor over the table.
#[derive(Debug, Clone)]
pub struct SubsetGenerator {
    config: GeneratorConfig,
    registry: PruneRegistry,
    telemetry: SkipTelemetry,
    card: usize,
    col: usize,
    row: Option<u128>,
    done: bool,
}

impl SubsetGenerator {
    pub fn new(config: GeneratorConfig) -> Self {
        Self::with_registry(config, PruneRegistry::new())
    }

    pub fn with_registry(config: GeneratorConfig, registry: PruneRegistry) -> Self {
        let done = config.cap() == 0;
        SubsetGenerator {
            config,
            registry,
            telemetry: SkipTelemetry::default(),
            card: 1,
            col: 0,
            row: None,
            done,
        }
    }

    /// Registers `mask`; its supersets are skipped from now on.
    pub fn prune(&mut self, mask: u128) -> bool {
        self.registry.register(mask)
    }

    pub fn registry(&self) -> &PruneRegistry {
        &self.registry
    }

    pub fn telemetry(&self) -> &SkipTelemetry {
        &self.telemetry
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    fn column_enabled(&self, col: usize) -> bool {
        self.config.columns & (1u128 << col) != 0
    }

    // true when the cell survives pruning
    fn admit(&mut self, col: usize, row: u128) -> bool {
        let mask = row | (1u128 << col);
        if self.config.row_skipping && self.registry.covers(row) {
            self.telemetry.row_skips += 1;
            if self.config.record_skips {
                self.telemetry.skipped_rows.insert(row);
                self.telemetry.skipped_masks.insert(mask);
            }
            return false;
        }
        if self.registry.covers(mask) {
            self.telemetry.cell_skips += 1;
            if self.config.record_skips {
                self.telemetry.skipped_masks.insert(mask);
            }
            return false;
        }
        true
    }

    fn next_cardinality_first(&mut self) -> Option<u128> {
        let p = self.config.pool_size;
        let cap = self.config.cap();
        loop {
            if self.card > cap {
                return None;
            }
            if self.col >= p {
                self.card += 1;
                self.col = self.card - 1;
                self.row = None;
                continue;
            }
            if !self.column_enabled(self.col) {
                self.col += 1;
                self.row = None;
                continue;
            }
            let k = self.card - 1;
            let next = match self.row {
                None => Some(low_bits(k)),
                Some(_) if k == 0 => None,
                Some(r) => next_same_popcount(r),
            };
            let limit = 1u128 << self.col;
            match next {
                Some(r) if r < limit => {
                    self.row = Some(r);
                    if self.admit(self.col, r) {
                        return Some(limit | r);
                    }
                }
                _ => {
                    self.col += 1;
                    self.row = None;
                }
            }
        }
    }

    fn next_column_major(&mut self) -> Option<u128> {
        let p = self.config.pool_size;
        let cap = self.config.cap();
        loop {
            if self.col >= p {
                return None;
            }
            if !self.column_enabled(self.col) {
                self.col += 1;
                self.row = None;
                continue;
            }
            let limit = 1u128 << self.col;
            let next = match self.row {
                None => 0,
                Some(r) => r + 1,
            };
            if next >= limit {
                self.col += 1;
                self.row = None;
                continue;
            }
            self.row = Some(next);
            if next.count_ones() as usize + 1 > cap {
                continue;
            }
            if self.admit(self.col, next) {
                return Some(limit | next);
            }
        }
    }
}

impl Iterator for SubsetGenerator {
    type Item = SensorSet;

    fn next(&mut self) -> Option<SensorSet> {
        if self.done {
            return None;
        }
        let mask = match self.config.order {
            EnumerationOrder::CardinalityFirst => self.next_cardinality_first(),
            EnumerationOrder::ColumnMajor => self.next_column_major(),
        };
        match mask {
            Some(m) => {
                self.telemetry.emitted += 1;
                Some(SensorSet::from_mask(m))
            }
            None => {
                self.done = true;
                None
            }
        }
    }
}

fn low_bits(k: usize) -> u128 {
    if k >= 128 {
        u128::MAX
    } else {
        (1u128 << k) - 1
    }
}

// Gosper's hack: the next larger integer with the same popcount.
fn next_same_popcount(x: u128) -> Option<u128> {
    let c = x & x.wrapping_neg();
    let r = x.checked_add(c)?;
    Some((((r ^ x) >> 2) / c) | r)
}
