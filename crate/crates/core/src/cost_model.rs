//! Gate-count and switching estimates for a single-lane accumulator built
//! from flip-flops and plain logic.
//!
//! Counted: the barrel shifter, the adder/subtractor, the `2^(ne-k)` partial
//! sum registers and the read multiplexer. Reconstruction reuses the adder
//! and is not counted.

use std::fmt::Write as _;

use crate::accumulator::DEFAULT_GUARD_BITS;
use crate::formats::FloatFormat;

/// How the adder/subtractor is costed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdderModel {
    /// `per_bit * W + overhead`, fitted to the published gate table.
    Calibrated { per_bit: u64, overhead: u64 },
    /// Full adder plus XOR conditioning on every output bit.
    Ripple,
}

/// Two-input NAND equivalents per cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    pub gates_enabled_dff: u64,
    pub gates_full_adder: u64,
    pub gates_half_adder: u64,
    pub gates_mux2: u64,
    pub gates_xor: u64,
    /// Gates the bits shifted in at each shifter stage edge.
    pub gates_and2: u64,
    pub adder: AdderModel,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            gates_enabled_dff: 9,
            gates_full_adder: 9,
            gates_half_adder: 5,
            gates_mux2: 3,
            gates_xor: 2,
            gates_and2: 2,
            adder: AdderModel::Calibrated {
                per_bit: 6,
                overhead: 201,
            },
        }
    }
}

/// Datapath widths for mantissa width `nm'` (without hidden bit).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WidthModel {
    pub shifter_out: u64,
    pub register: u64,
    pub adder_out: u64,
    pub mux_out: u64,
}

impl WidthModel {
    pub fn new(nm: u32, k: u32, nv: u32) -> Self {
        let span = 1u64 << k;
        let register = nm as u64 + span + nv as u64 + 1;
        WidthModel {
            shifter_out: nm as u64 + 1 + span,
            register,
            adder_out: register + 1,
            mux_out: register,
        }
    }

    pub fn flip_count(&self) -> u64 {
        self.shifter_out + self.adder_out + self.register + self.mux_out
    }
}

/// Outputs that can toggle in one clock: shifter, adder, one register and the mux.
pub fn flip_count(nm: u32, k: u32, nv: u32) -> u64 {
    WidthModel::new(nm, k, nv).flip_count()
}

/// Gate estimate, or `None` when `k > ne`.
pub fn gate_count(ne: u32, nm: u32, k: u32, nv: u32, p: &CostParams) -> Option<u64> {
    if k > ne {
        return None;
    }
    let w = WidthModel::new(nm, k, nv);
    let regs = 1u64 << (ne - k);
    let registers = regs * w.register * p.gates_enabled_dff;
    let mux = (regs - 1) * w.mux_out * p.gates_mux2;
    let adder = match p.adder {
        AdderModel::Calibrated { per_bit, overhead } => per_bit * w.register + overhead,
        AdderModel::Ripple => w.adder_out * (p.gates_full_adder + p.gates_xor),
    };
    // stage j moves the nm+1 bit mantissa by 2^j: the nm-1 inner bits need a
    // mux, the 2^j bits at each edge only a gate
    let shifter: u64 = (0..k)
        .map(|j| (nm as u64).saturating_sub(1) * p.gates_mux2 + 2 * (1u64 << j) * p.gates_and2)
        .sum();
    Some(registers + mux + adder + shifter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    Gates,
    Flips,
}

impl std::str::FromStr for Table {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gates" => Ok(Table::Gates),
            "flips" => Ok(Table::Flips),
            _ => Err(format!("unknown table {s:?}; use gates or flips")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostRow {
    pub format: String,
    pub ne: u32,
    pub nm: u32,
    pub k: u32,
    pub value: u64,
}

/// Every built-in float format and every `k` in `0..=ne`.
pub fn cost_table(which: Table, nv: u32, params: &CostParams) -> Vec<CostRow> {
    let mut rows = Vec::new();
    for f in FloatFormat::builtins() {
        for k in 0..=f.ne {
            let value = match which {
                Table::Gates => gate_count(f.ne, f.nm, k, nv, params).expect("k <= ne"),
                Table::Flips => flip_count(f.nm, k, nv),
            };
            rows.push(CostRow {
                format: f.name.clone(),
                ne: f.ne,
                nm: f.nm,
                k,
                value,
            });
        }
    }
    rows
}

const PUBLISHED_GATES: [(&str, &[u64]); 6] = [
    ("fp32", &[113_976, 58_753, 31_185, 17_455, 10_655, 7_387, 5_949, 5_599, 6_192]),
    ("bf16", &[64_776, 34_081, 18_753, 11_119, 7_353, 5_563, 4_845, 4_831, 5_505]),
    ("fp16", &[9_489, 5_107, 2_940, 1_891, 1_422, 1_285]),
    ("e5m2", &[6_393, 3_523, 2_100, 1_411, 1_110, 1_045]),
    ("e4m3", &[3_516, 1_993, 1_245, 895, 765]),
    ("e3m4", &[1_983, 1_183, 790, 631]),
];

const PUBLISHED_FLIPS: [(&str, &[u64]); 6] = [
    ("fp32", &[137, 141, 149, 165, 197, 261, 389, 645, 1_157]),
    ("bf16", &[73, 77, 85, 101, 133, 197, 325, 581, 1_093]),
    ("fp16", &[85, 89, 97, 113, 145, 209]),
    ("e5m2", &[53, 57, 65, 81, 113, 177]),
    ("e4m3", &[57, 61, 69, 85, 117]),
    ("e3m4", &[61, 65, 73, 89]),
];

/// Published reference value at `nv = 12`; `None` where the table has a dash.
pub fn published(which: Table, format: &str, k: u32) -> Option<u64> {
    let table = match which {
        Table::Gates => &PUBLISHED_GATES,
        Table::Flips => &PUBLISHED_FLIPS,
    };
    table
        .iter()
        .find(|(name, _)| *name == format)
        .and_then(|(_, row)| row.get(k as usize).copied())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffRow {
    pub row: CostRow,
    pub published: Option<u64>,
}

impl DiffRow {
    pub fn delta(&self) -> Option<i64> {
        self.published.map(|p| self.row.value as i64 - p as i64)
    }

    pub fn relative(&self) -> Option<f64> {
        self.published.map(|p| (self.row.value as f64 - p as f64).abs() / p as f64)
    }
}

/// Model rows next to the published values. Only meaningful at the default
/// guard width; other widths have no reference.
pub fn diff_table(which: Table, nv: u32, params: &CostParams) -> Vec<DiffRow> {
    cost_table(which, nv, params)
        .into_iter()
        .map(|row| {
            let published = (nv == DEFAULT_GUARD_BITS)
                .then(|| published(which, &row.format, row.k))
                .flatten();
            DiffRow { row, published }
        })
        .collect()
}

pub fn render_csv(rows: &[CostRow]) -> String {
    let mut s = String::from("format,ne,nm,k,value\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.format, r.ne, r.nm, r.k, r.value);
    }
    s
}

/// One line per format, one column per `k`, dashes past `ne`.
pub fn render_text(rows: &[CostRow]) -> String {
    let max_k = rows.iter().map(|r| r.k).max().unwrap_or(0);
    let mut s = format!("{:<8}{:>4}{:>4}", "format", "ne", "nm");
    for k in 0..=max_k {
        let _ = write!(s, "{:>9}", format!("k={k}"));
    }
    s.push('\n');
    let mut i = 0;
    while i < rows.len() {
        let r = &rows[i];
        let _ = write!(s, "{:<8}{:>4}{:>4}", r.format, r.ne, r.nm);
        for k in 0..=max_k {
            match rows.get(i).filter(|x| x.format == r.format && x.k == k) {
                Some(x) => {
                    let _ = write!(s, "{:>9}", x.value);
                    i += 1;
                }
                None => s.push_str(&format!("{:>9}", "-")),
            }
        }
        s.push('\n');
    }
    s
}

pub fn render_diff_csv(rows: &[DiffRow]) -> String {
    let mut s = String::from("format,ne,nm,k,value,published,delta,relative\n");
    for d in rows {
        let r = &d.row;
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.format,
            r.ne,
            r.nm,
            r.k,
            r.value,
            opt(d.published.map(|p| p.to_string())),
            opt(d.delta().map(|x| x.to_string())),
            opt(d.relative().map(|x| format!("{x:.4}"))),
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_model() {
        let w = WidthModel::new(7, 3, 12);
        assert_eq!((w.shifter_out, w.register, w.adder_out, w.mux_out), (16, 28, 29, 28));
    }

    #[test]
    fn flip_examples() {
        assert_eq!(flip_count(23, 0, 12), 137);
        assert_eq!(flip_count(2, 5, 12), 177);
        assert_eq!(flip_count(7, 8, 12), 1093);
        assert_eq!(flip_count(4, 0, 12), 61);
    }

    #[test]
    fn flips_closed_form() {
        for nm in 1..30 {
            for k in 0..10 {
                assert_eq!(flip_count(nm, k, 12), 4 * (nm as u64 + (1 << k)) + 41);
                assert_eq!(flip_count(nm, k + 1, 12) - flip_count(nm, k, 12), 4 << k);
            }
        }
    }

    #[test]
    fn every_published_flip_count() {
        let rows = diff_table(Table::Flips, 12, &CostParams::default());
        assert_eq!(rows.iter().filter(|d| d.published.is_some()).count(), 39);
        assert!(rows.iter().all(|d| d.delta() == Some(0)));
    }

    #[test]
    fn gate_examples_within_tolerance() {
        let p = CostParams::default();
        assert_eq!(gate_count(8, 23, 0, 12, &p), Some(113_976));
        assert_eq!(gate_count(8, 7, 7, 12, &p), Some(4_831));
        assert_eq!(gate_count(3, 4, 3, 12, &p), Some(631));
        assert_eq!(gate_count(3, 4, 4, 12, &p), None);
        let rows = diff_table(Table::Gates, 12, &p);
        assert_eq!(rows.len(), 39);
        assert!(rows.iter().all(|d| d.relative().unwrap() < 0.10));
    }

    #[test]
    fn gate_argmins_match() {
        let rows = cost_table(Table::Gates, 12, &CostParams::default());
        for f in FloatFormat::builtins() {
            let row: Vec<&CostRow> = rows.iter().filter(|r| r.format == f.name).collect();
            let model = row.iter().min_by_key(|r| r.value).unwrap().k;
            let published_min = (0..=f.ne).min_by_key(|&k| published(Table::Gates, &f.name, k).unwrap()).unwrap();
            assert_eq!(model, published_min, "{}", f.name);
            // strictly decreasing up to the minimum
            assert!(row.windows(2).take(model as usize).all(|w| w[1].value < w[0].value));
        }
    }

    #[test]
    fn ripple_adder_alternative() {
        let p = CostParams {
            adder: AdderModel::Ripple,
            ..CostParams::default()
        };
        // W = 27: 28 output bits at 11 gates against 6 * 27 + 201
        let calibrated = gate_count(5, 10, 2, 12, &CostParams::default()).unwrap();
        assert_eq!(gate_count(5, 10, 2, 12, &p).unwrap() + 363, calibrated + 308);
    }

    #[test]
    fn rendering() {
        let rows = cost_table(Table::Flips, 12, &CostParams::default());
        let csv = render_csv(&rows);
        assert!(csv.contains("fp32,8,23,0,137\n"));
        assert_eq!(csv.lines().count(), 40);
        let text = render_text(&rows);
        assert_eq!(text.lines().count(), 7);
        assert!(text.lines().last().unwrap().trim_end().ends_with('-'));
        // no reference at other guard widths
        assert!(diff_table(Table::Flips, 16, &CostParams::default()).iter().all(|d| d.published.is_none()));
    }
}
