//! Built-in benchmark tables and preset lookup by name. The Pooling table
//! pins the published top of the ranking and fills the remainder with a
//! deterministic tail; the macro table does the same over 6561 entries with a
//! designated optimum, standing in for the public benchmark file.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::{BenchRecord, TabularBenchmark};
use crate::space::{
    bench_macro_space, enumerate, pooling_arch, pooling_space, SearchSpace,
    DEFAULT_ENUMERATION_CAP,
};

/// Reference accuracies (percent) for the top of the Pooling ranking, by
/// layer-count representation. Ranks 1..=15 in order.
const POOLING_PINS: [([usize; 3], f64); 15] = [
    ([7, 1, 2], 92.01),
    ([6, 2, 2], 91.83),
    ([6, 1, 3], 91.78),
    ([5, 3, 2], 91.55),
    ([7, 2, 1], 91.40),
    ([8, 1, 1], 91.21),
    ([5, 1, 4], 91.05),
    ([5, 2, 3], 90.96),
    ([3, 4, 3], 90.92),
    ([2, 5, 3], 90.89),
    ([3, 5, 2], 90.88),
    ([4, 4, 2], 90.85),
    ([5, 4, 1], 90.78),
    ([4, 5, 1], 90.70),
    ([4, 3, 3], 90.52),
];

const POOLING_FILL_SEED: u64 = 1;

/// The 36-entry Pooling reference table.
pub fn pooling_benchmark() -> TabularBenchmark {
    let space = pooling_space();
    let en = enumerate(&space, DEFAULT_ENUMERATION_CAP).unwrap();
    let mut records: BTreeMap<String, BenchRecord> = BTreeMap::new();
    for (repr, acc) in POOLING_PINS {
        let arch = pooling_arch(repr).expect("pin reprs are valid");
        records.insert(
            arch.to_digits(),
            BenchRecord {
                acc,
                flops: None,
                params: None,
                curve: None,
            },
        );
    }
    let mut rest: Vec<String> = en
        .iter()
        .map(|a| a.to_digits())
        .filter(|d| !records.contains_key(d))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(POOLING_FILL_SEED);
    rest.shuffle(&mut rng);
    for (j, digits) in rest.iter().enumerate() {
        // Strictly decreasing tail below the last pin.
        let frac = (j as f64 + 1.0) / rest.len() as f64;
        let acc = 90.47 - 2.6 * frac.powf(1.2);
        records.insert(
            digits.clone(),
            BenchRecord {
                acc,
                flops: None,
                params: None,
                curve: None,
            },
        );
    }
    TabularBenchmark::from_records("pooling", &space, &records).expect("table covers the space")
}

/// Reference (rank, digit string, accuracy percent) pins for the macro table.
/// Two entries share a printed two-decimal value but differ underneath so the
/// ranking stays strict.
const MACRO_PINS: [(usize, &str, f64); 14] = [
    (1, "22212220", 93.13),
    (19, "22212200", 92.94),
    (21, "12222222", 92.92),
    (34, "22221200", 92.86),
    (56, "21222220", 92.79),
    (61, "22122220", 92.78),
    (71, "21211220", 92.76),
    (80, "22221210", 92.744),
    (85, "22121222", 92.736),
    (98, "22222022", 92.71),
    (209, "22110222", 92.56),
    (227, "22121210", 92.55),
    (347, "22120211", 92.44),
    (406, "12220111", 92.39),
];

const MACRO_FILL_SEED: u64 = 2;

/// Per-architecture parameter count in millions, additive like the FLOPs model.
fn macro_params(space: &SearchSpace, ops: &[u8]) -> f64 {
    let _ = space;
    let layer_scale = [1.0, 1.0, 0.8, 0.8, 0.6, 0.6, 0.5, 0.5];
    let per_op = [0.0, 0.08, 0.2];
    0.3 + ops
        .iter()
        .zip(layer_scale)
        .map(|(&o, s)| per_op[o as usize] * s)
        .sum::<f64>()
}

/// The 6561-entry macro reference table with "22212220" as the optimum.
pub fn bench_macro_benchmark() -> TabularBenchmark {
    let space = bench_macro_space();
    let en = enumerate(&space, DEFAULT_ENUMERATION_CAP).unwrap();
    let n = en.len();

    // Full descending value-by-rank array: pins at their ranks, evenly spaced
    // fillers strictly between consecutive pins, a curved tail after the last.
    let mut values = vec![f64::NAN; n];
    for &(rank, _, acc) in &MACRO_PINS {
        values[rank - 1] = acc;
    }
    for pair in MACRO_PINS.windows(2) {
        let (ra, va) = (pair[0].0, pair[0].2);
        let (rb, vb) = (pair[1].0, pair[1].2);
        let gap = rb - ra - 1;
        for k in 1..=gap {
            values[ra - 1 + k] = va - (va - vb) * k as f64 / (gap + 1) as f64;
        }
    }
    let (last_rank, _, last_val) = MACRO_PINS[MACRO_PINS.len() - 1];
    let tail = n - last_rank;
    for j in 0..tail {
        let frac = (j as f64 + 1.0) / tail as f64;
        values[last_rank + j] = last_val - 12.0 * frac.powf(1.5);
    }

    let pinned: BTreeMap<&str, f64> = MACRO_PINS.iter().map(|&(_, d, v)| (d, v)).collect();
    let pin_ranks: Vec<usize> = MACRO_PINS.iter().map(|&(r, _, _)| r).collect();
    let filler_values: Vec<f64> = values
        .iter()
        .copied()
        .enumerate()
        .filter(|(i, _)| !pin_ranks.contains(&(i + 1)))
        .map(|(_, v)| v)
        .collect();
    debug_assert_eq!(filler_values.len() + pin_ranks.len(), n);

    // Filler values go to architectures by capacity score plus jitter, so
    // accuracy correlates with op strength the way the public table does.
    // Late layers barely matter: the pinned top ranks keep identities there.
    let mut rng = ChaCha8Rng::seed_from_u64(MACRO_FILL_SEED);
    let layer_scale = [1.0, 1.0, 0.8, 0.8, 0.6, 0.6, 0.2, 0.1];
    let op_strength = [0.0, 1.0, 1.6];
    let mut scored: Vec<(f64, String)> = en
        .iter()
        .map(|a| a.to_digits())
        .filter(|d| !pinned.contains_key(d.as_str()))
        .map(|d| {
            let s: f64 = d
                .bytes()
                .zip(layer_scale)
                .map(|(b, w)| op_strength[(b - b'0') as usize] * w)
                .sum();
            (s + 1.2 * rng.gen::<f64>(), d)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("scores are finite")
            .then(a.1.cmp(&b.1))
    });
    let rest: Vec<String> = scored.into_iter().map(|(_, d)| d).collect();

    let mut records: BTreeMap<String, BenchRecord> = BTreeMap::new();
    let mut insert = |digits: &str, acc: f64| {
        let arch = crate::space::Architecture::from_digits(digits).unwrap();
        records.insert(
            digits.to_string(),
            BenchRecord {
                acc,
                flops: Some(space.cost(&arch).unwrap()),
                params: Some(macro_params(&space, &arch.ops)),
                curve: None,
            },
        );
    };
    for &(_, digits, acc) in &MACRO_PINS {
        insert(digits, acc);
    }
    for (digits, &value) in rest.iter().zip(&filler_values) {
        insert(digits, value);
    }
    TabularBenchmark::from_records("bench_macro", &space, &records)
        .expect("table covers the space")
}

/// Space presets addressable by name in configs and on the command line.
pub fn space_by_name(name: &str) -> Option<SearchSpace> {
    match name {
        "pooling" => Some(pooling_space()),
        "bench_macro" => Some(bench_macro_space()),
        _ => None,
    }
}

/// Benchmark presets addressable by name.
pub fn benchmark_by_name(name: &str) -> Option<TabularBenchmark> {
    match name {
        "pooling" => Some(pooling_benchmark()),
        "bench_macro" => Some(bench_macro_benchmark()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Architecture;

    #[test]
    fn pooling_pins_sit_at_their_ranks() {
        let bench = pooling_benchmark();
        assert_eq!(bench.len(), 36);
        for (rank, (repr, acc)) in POOLING_PINS.iter().enumerate() {
            let arch = pooling_arch(*repr).unwrap();
            assert_eq!(bench.rank_of(&arch), Some(rank + 1), "repr {repr:?}");
            let idx = bench.enumeration().index_of(&arch).unwrap();
            assert_eq!(bench.record(idx).acc, *acc);
        }
    }

    #[test]
    fn macro_pins_sit_at_their_ranks() {
        let bench = bench_macro_benchmark();
        assert_eq!(bench.len(), 6561);
        for &(rank, digits, acc) in &MACRO_PINS {
            let arch = Architecture::from_digits(digits).unwrap();
            assert_eq!(bench.rank_of(&arch), Some(rank), "arch {digits}");
            let idx = bench.enumeration().index_of(&arch).unwrap();
            assert_eq!(bench.record(idx).acc, acc);
        }
    }

    #[test]
    fn macro_accuracies_are_distinct() {
        let bench = bench_macro_benchmark();
        let mut accs: Vec<f64> = (0..bench.len()).map(|i| bench.record(i).acc).collect();
        accs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in accs.windows(2) {
            assert!(w[0] < w[1], "duplicate accuracy {}", w[0]);
        }
    }

    #[test]
    fn macro_flops_match_cost_model() {
        let bench = bench_macro_benchmark();
        let space = bench_macro_space();
        for i in (0..bench.len()).step_by(731) {
            let arch = bench.enumeration().arch_at(i);
            assert_eq!(bench.record(i).flops, Some(space.cost(arch).unwrap()));
        }
    }

    #[test]
    fn presets_resolve_by_name() {
        assert!(space_by_name("pooling").is_some());
        assert!(space_by_name("bench_macro").is_some());
        assert!(space_by_name("nope").is_none());
        assert!(benchmark_by_name("pooling").is_some());
        assert!(benchmark_by_name("nope").is_none());
    }
}
