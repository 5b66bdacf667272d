//! Acceptance criteria. Every criterion prints one `PASS` or `FAIL` line;
//! the test fails at the end if any criterion failed.
//!
//! Lines go straight to stderr so they show without `--nocapture`.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nary::dataset::{apply_preprocess, fit_preprocess, generate_labeled, generate_synthetic, DataMatrix};
use nary::distance::{build_lookup_tables, hamming, hamming_words, CodeMetric, CodeRef, RankedList};
use nary::encoders::{refine_ck_indices, train_ckmeans, train_lsq, train_pq, LsqParams};
use nary::eval::{
    auc_recall, embedding_classification, recall_at_r, run_experiment, run_on_split, train_model, DataSource,
    ExperimentConfig, FeatureEncoder, Method, Split, Strategy,
};
use nary::linalg::pseudo_inverse;
use nary::mih::{build_binary_index, build_nary_index, ProbeCosts};
use nary::quantcore::quantization_error;
use nary::{BinaryCode, BinaryCodeSet, Model, NaryCodeSet, NeighborList, UniformQuantizer};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn preprocessed(seed: u64, dim: usize, count: usize, clusters: usize, spread: f64) -> DataMatrix {
    let x = generate_synthetic(seed, dim, count, clusters, spread).unwrap();
    apply_preprocess(&fit_preprocess(&x, true), &x).unwrap()
}

fn sq_frobenius(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// `||X - V^T q(W^T X)||^2 + lambda ||V||^2`, written out entry by entry.
fn lsq_cost(x: &DMatrix<f64>, w: &DMatrix<f64>, v: &DMatrix<f64>, q: &UniformQuantizer, lambda: f64) -> f64 {
    let mut h = w.transpose() * x;
    h.iter_mut().for_each(|e| *e = nearest_level(q, *e));
    sq_frobenius(&(x - v.transpose() * h)) + lambda * sq_frobenius(v)
}

/// Nearest quantizer level, midpoints resolved upward.
fn nearest_level(q: &UniformQuantizer, x: f64) -> f64 {
    let levels = q.levels();
    let mut best = levels[0];
    for &l in levels {
        if (x - l).abs() <= (x - best).abs() {
            best = l;
        }
    }
    best
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for config in 0..20 {
        let d = [8, 32][rng.random_range(0..2)];
        let m = [4, 8][rng.random_range(0..2)];
        let n = [2, 4, 8][rng.random_range(0..3)];
        let lambda = rng.random_range(0.0..2.0);
        let x = preprocessed(1000 + config, d, 400, 6, 0.2);
        let model = train_lsq(
            &x,
            &LsqParams {
                code_len: m,
                arity: n,
                lambda,
                max_iters: 30,
                tol: 0.0,
            },
        )
        .unwrap();
        let h = &model.objective_history;
        for w in h.windows(2) {
            worst = worst.max((w[1] - w[0]) / w[0].abs().max(1e-300));
        }
        let last = *h.last().unwrap();
        let recomputed = lsq_cost(x.values(), &model.mapping, &model.reconstruction, &model.quantizer, lambda);
        let consistent = (recomputed - last).abs() <= 1e-9 * last.abs().max(1.0);
        if !consistent || h.windows(2).any(|w| w[1] > w[0] + 1e-9 * w[0].abs()) {
            bad.push(format!("D={d} m={m} n={n}"));
        }
    }
    outcome(
        bad.is_empty(),
        format!("20 configs, worst relative rise {worst:.3e}, violations {bad:?}"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = f64::NEG_INFINITY;
    for instance in 0..10u64 {
        let d = rng.random_range(4..=10);
        let m = rng.random_range(2..=d);
        let n = [2, 3, 4, 8][rng.random_range(0..4)];
        let x = preprocessed(2000 + instance, d, 120, 4, 0.3);
        let model = train_lsq(
            &x,
            &LsqParams {
                code_len: m,
                arity: n,
                lambda: rng.random_range(0.0..1.0),
                max_iters: 3,
                tol: 0.0,
            },
        )
        .unwrap();
        let q = &model.quantizer;
        let v = &model.reconstruction;
        let v_pinv = v.clone().pseudo_inverse(1e-12).unwrap();
        let target = v_pinv.transpose() * x.values();
        let objective = |w: &DMatrix<f64>| {
            let mut h = w.transpose() * x.values();
            h.iter_mut().for_each(|e| *e = nearest_level(q, *e));
            sq_frobenius(&(&target - h))
        };
        let at_pinv = objective(&pseudo_inverse(v).unwrap());
        let scale = v_pinv.abs().max();
        for p in 0..100 {
            let eps = [1e-3, 1e-2, 1e-1][p % 3] * scale;
            let delta = DMatrix::from_fn(d, m, |_, _| rng.random_range(-eps..eps));
            let reduction = (at_pinv - objective(&(&v_pinv + delta))) / at_pinv.max(1e-300);
            worst = worst.max(reduction);
        }
    }
    outcome(
        worst <= 1e-9,
        format!("1000 perturbations, largest relative reduction {worst:.3e}"),
    )
}

fn criterion_3() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for m_bits in [32, 64] {
        let mut wins = 0;
        let mut pairs = Vec::new();
        for seed in SEEDS {
            let x = preprocessed(seed, 64, 5000, 50, 0.1);
            let cfg = |method| ExperimentConfig {
                method,
                bit_budget: m_bits,
                bits_per_dim: 1,
                seed,
                ..ExperimentConfig::default()
            };
            let err = |model: &Model| quantization_error(&x, &model.reconstruct(&model.encode(&x).unwrap()).unwrap()).unwrap();
            let lsq = err(&train_model(&cfg(Method::LsqBinary), &x).unwrap());
            let itq = err(&train_model(&cfg(Method::Itq), &x).unwrap());
            if lsq <= itq {
                wins += 1;
            }
            pairs.push(format!("{lsq:.1}/{itq:.1}"));
        }
        pass &= wins >= 4;
        lines.push(format!("{m_bits} bits: {wins}/5 [{}]", pairs.join(" ")));
    }
    outcome(pass, format!("LSQ(B)/ITQ error, {}", lines.join("; ")))
}

fn trend_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        data: DataSource::Synthetic {
            dim: 64,
            n_train: 5000,
            n_base: 10_000,
            n_query: 500,
            clusters: 50,
            spread: 0.1,
        },
        bit_budget: 64,
        iters: 30,
        seed,
        ..ExperimentConfig::default()
    }
}

fn trend_auc(split: &Split, base: &ExperimentConfig, method: Method, strategy: Strategy, bpd: usize) -> f64 {
    let cfg = ExperimentConfig {
        method,
        strategy,
        bits_per_dim: bpd,
        ..base.clone()
    };
    run_on_split(&cfg, split).unwrap().auc
}

fn criterion_4_and_5() -> (Outcome, Outcome) {
    let mut de_rows = Vec::new();
    let mut si_rows = Vec::new();
    let (mut w4, mut w5, mut ck4, mut ck5, mut si) = (0, 0, 0, 0, 0);
    for seed in SEEDS {
        let cfg = trend_config(seed);
        let split = Split::prepare(&cfg).unwrap();
        let de = Strategy::DistanceEstimation;
        let binary = trend_auc(&split, &cfg, Method::LsqBinary, de, 1);
        let nary4 = trend_auc(&split, &cfg, Method::LsqNary, de, 4);
        let nary5 = trend_auc(&split, &cfg, Method::LsqNary, de, 5);
        let ckm4 = trend_auc(&split, &cfg, Method::Ckmeans, de, 4);
        let ckm5 = trend_auc(&split, &cfg, Method::Ckmeans, de, 5);
        w4 += (nary4 >= binary) as usize;
        w5 += (nary5 >= binary) as usize;
        ck4 += (nary4 >= ckm4) as usize;
        ck5 += (nary5 >= ckm5) as usize;
        de_rows.push(format!(
            "seed {seed}: bin {binary:.4} n4 {nary4:.4} n5 {nary5:.4} ck4 {ckm4:.4} ck5 {ckm5:.4}"
        ));

        let s = Strategy::SubsetIndexing;
        let bin_si = trend_auc(&split, &cfg, Method::LsqBinary, s, 5);
        let ck_si = trend_auc(&split, &cfg, Method::Ckmeans, s, 5);
        si += (bin_si >= ck_si) as usize;
        si_rows.push(format!("seed {seed}: bin(b=5) {bin_si:.4} ck5 {ck_si:.4}"));
    }
    for row in de_rows.iter().chain(&si_rows) {
        say(format!("    {row}"));
    }
    (
        outcome(
            w4 >= 4 && w5 >= 4 && ck4 >= 4 && ck5 >= 4,
            format!("n-ary >= binary: bpd4 {w4}/5, bpd5 {w5}/5; n-ary >= CK-means: bpd4 {ck4}/5, bpd5 {ck5}/5"),
        ),
        outcome(si >= 4, format!("binary LSQ b=5 >= CK-means bpd5: {si}/5")),
    )
}

fn criterion_6() -> Outcome {
    let x = preprocessed(6, 24, 1500, 20, 0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = 0.0f64;
    for (name, cb) in [
        ("pq", train_pq(&x, 6, 16, 6).unwrap()),
        ("ckmeans", train_ckmeans(&x, 6, 16, 10, 6).unwrap()),
    ] {
        let tables = build_lookup_tables(&cb);
        for _ in 0..1000 {
            let a: Vec<u32> = (0..6).map(|_| rng.random_range(1..=16)).collect();
            let b: Vec<u32> = (0..6).map(|_| rng.random_range(1..=16)).collect();
            let pair = NaryCodeSet::new(6, 16, [a.clone(), b.clone()].concat()).unwrap();
            let recon = cb.reconstruct(&pair).unwrap();
            let direct = (recon.column(0) - recon.column(1)).norm_squared();
            let err = (tables.symmetric_distance(&a, &b).unwrap() - direct).abs();
            worst = worst.max(err);
            if err > 1e-9 {
                return outcome(false, format!("{name}: {a:?} vs {b:?} differs by {err:.3e}"));
            }
        }
    }
    outcome(true, format!("2 x 1000 pairs, worst difference {worst:.3e}"))
}

/// Brute-force MIH: sorts every substitute probe up front, then scores and
/// ranks all candidates.
fn mih_oracle(
    base_keys: &[Vec<u32>],
    query_keys: &[u32],
    costs: &dyn Fn(usize, u32) -> f64,
    buckets: u32,
    distance: &dyn Fn(usize) -> f64,
    k: usize,
) -> (Vec<usize>, Vec<f64>, usize) {
    let mut probes: Vec<(usize, u32)> = query_keys.iter().copied().enumerate().collect();
    let mut alternatives: Vec<(f64, usize, u32)> = Vec::new();
    for (t, &own) in query_keys.iter().enumerate() {
        for v in (0..buckets).filter(|&v| v != own) {
            alternatives.push((costs(t, v) - costs(t, own), t, v));
        }
    }
    alternatives.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let score_of = |probes: &[(usize, u32)], id: usize| probes.iter().filter(|&&(t, v)| base_keys[id][t] == v).count();
    let found = |probes: &[(usize, u32)]| (0..base_keys.len()).filter(|&id| score_of(probes, id) > 0).count();
    let mut expansions = 0;
    let mut next = alternatives.into_iter();
    while found(&probes) < k {
        match next.next() {
            Some((_, t, v)) => {
                probes.push((t, v));
                expansions += 1;
            }
            None => break,
        }
    }
    let mut ranked: Vec<(usize, f64, usize)> = (0..base_keys.len())
        .map(|id| (score_of(&probes, id), distance(id), id))
        .filter(|r| r.0 > 0)
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    ranked.truncate(k);
    (
        ranked.iter().map(|r| r.2).collect(),
        ranked.iter().map(|r| r.0 as f64).collect(),
        expansions,
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let (mut runs, mut deep) = (0, 0);
    for instance in 0..30 {
        let n = rng.random_range(1..=1000);
        let k = rng.random_range(1..=n);

        // n-ary codes with projection costs
        let m = rng.random_range(1..=6);
        let arity = [2, 3, 4, 8, 16][rng.random_range(0..5)];
        let codes: Vec<u32> = (0..m * n).map(|_| rng.random_range(1..=arity as u32)).collect();
        let set = NaryCodeSet::new(m, arity, codes).unwrap();
        let query: Vec<u32> = (0..m).map(|_| rng.random_range(1..=arity as u32)).collect();
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.2..1.2)).collect();
        let q = UniformQuantizer::new(arity).unwrap();
        let index = build_nary_index(&set).unwrap();
        let costs = ProbeCosts::from_projection(&q, &y).unwrap();
        let use_costs = instance % 2 == 0;
        let got = index
            .query(CodeRef::Nary(&query), k, use_costs.then_some(&costs), CodeMetric::CodeEuclidean(&q))
            .unwrap();
        let base_keys: Vec<Vec<u32>> = (0..n).map(|j| set.code(j).iter().map(|c| c - 1).collect()).collect();
        let query_keys: Vec<u32> = query.iter().map(|c| c - 1).collect();
        let level = |i: u32| -1.0 + 2.0 * i as f64 / (arity - 1) as f64;
        let cost = |t: usize, v: u32| {
            if use_costs {
                (level(v) - y[t]).abs()
            } else {
                (v as f64 - query_keys[t] as f64).abs()
            }
        };
        let dist = |j: usize| -> f64 {
            (0..m)
                .map(|i| (level(query_keys[i]) - level(base_keys[j][i])).powi(2))
                .sum()
        };
        let want = mih_oracle(&base_keys, &query_keys, &cost, arity as u32, &dist, k);
        if (got.list.ids.clone(), got.list.scores.clone(), got.expansions) != want {
            return outcome(false, format!("n-ary instance {instance} (n={n}, k={k}, m={m}, arity={arity}) differs"));
        }
        runs += 1;
        deep += (want.2 >= 3) as usize;

        // binary codes, b-bit chunks
        let b = rng.random_range(1..=8);
        let tables = rng.random_range(1..=5);
        let bits = b * tables;
        let bools: Vec<Vec<bool>> = (0..n).map(|_| (0..bits).map(|_| rng.random_bool(0.5)).collect()).collect();
        let set = BinaryCodeSet::from_codes(&bools.iter().map(|c| BinaryCode::from_bools(c)).collect::<Vec<_>>()).unwrap();
        let qbits: Vec<bool> = (0..bits).map(|_| rng.random_bool(0.5)).collect();
        let qcode = BinaryCode::from_bools(&qbits);
        let index = build_binary_index(&set, b).unwrap();
        let got = index.query(CodeRef::Binary(qcode.words()), k, None, CodeMetric::Hamming).unwrap();
        let key = |c: &[bool], t: usize| c[t * b..(t + 1) * b].iter().fold(0u32, |acc, &bit| (acc << 1) | bit as u32);
        let base_keys: Vec<Vec<u32>> = bools.iter().map(|c| (0..tables).map(|t| key(c, t)).collect()).collect();
        let query_keys: Vec<u32> = (0..tables).map(|t| key(&qbits, t)).collect();
        let cost = |t: usize, v: u32| (v ^ query_keys[t]).count_ones() as f64;
        let dist = |j: usize| bools[j].iter().zip(&qbits).filter(|(a, b)| a != b).count() as f64;
        let want = mih_oracle(&base_keys, &query_keys, &cost, 1 << b, &dist, k);
        if (got.list.ids.clone(), got.list.scores.clone(), got.expansions) != want {
            return outcome(false, format!("binary instance {instance} (n={n}, k={k}, b={b}) differs"));
        }
        runs += 1;
        deep += (want.2 >= 3) as usize;
    }
    outcome(deep > 0, format!("{runs} queries identical to the oracle, {deep} with >= 3 expansions"))
}

fn naive_hamming(a: &[bool], b: &[bool]) -> u32 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u32
}

fn bools_of(value: u64, bits: usize) -> Vec<bool> {
    (0..bits).map(|i| value >> i & 1 == 1).collect()
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    // all 2^16 codes against 64 partners (including both extremes), and
    // every difference pattern against zero
    let mut partners: Vec<u64> = (0..62).map(|_| rng.random_range(0..1 << 16)).collect();
    partners.extend([0, 0xFFFF]);
    let zero = bools_of(0, 16);
    for a in 0..1u64 << 16 {
        let ab = bools_of(a, 16);
        let ca = BinaryCode::from_bools(&ab);
        if hamming(&ca, &BinaryCode::from_bools(&zero)).unwrap() != naive_hamming(&ab, &zero) {
            return outcome(false, format!("16-bit {a:#06x} vs 0"));
        }
        for &p in &partners {
            let pb = bools_of(p, 16);
            if hamming_words(ca.words(), &[p], 16) != naive_hamming(&ab, &pb) {
                return outcome(false, format!("16-bit {a:#06x} vs {p:#06x}"));
            }
        }
    }
    for _ in 0..10_000 {
        let a: Vec<bool> = (0..256).map(|_| rng.random_bool(0.5)).collect();
        let b: Vec<bool> = (0..256).map(|_| rng.random_bool(0.5)).collect();
        let got = hamming(&BinaryCode::from_bools(&a), &BinaryCode::from_bools(&b)).unwrap();
        if got != naive_hamming(&a, &b) {
            return outcome(false, "256-bit random pair differs");
        }
    }
    let fig = hamming(
        &BinaryCode::from_bit_str("110000").unwrap(),
        &BinaryCode::from_bit_str("000000").unwrap(),
    )
    .unwrap();
    outcome(fig == 2, format!("16-bit and 256-bit suites agree, hamming(110000, 000000) = {fig}"))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let q2 = UniformQuantizer::new(2).unwrap();
    for _ in 0..10_000 {
        let x: f64 = rng.random_range(-3.0..3.0);
        let sign = if x >= 0.0 { 1.0 } else { -1.0 };
        if q2.quantize(x).unwrap().1 != sign {
            return outcome(false, format!("q_2({x}) is not sign"));
        }
    }
    if q2.quantize(0.0).unwrap().1 != 1.0 {
        return outcome(false, "q_2(0) != 1");
    }
    let q3 = UniformQuantizer::new(3).unwrap();
    if q3.levels() != [-1.0, 0.0, 1.0] {
        return outcome(false, format!("q_3 grid {:?}", q3.levels()));
    }
    for (x, want) in [(-0.5, 0.0), (0.5, 1.0)] {
        if q3.quantize(x).unwrap().1 != want {
            return outcome(false, format!("q_3 midpoint {x}"));
        }
    }
    for n in 2..=32 {
        let q = UniformQuantizer::new(n).unwrap();
        for l in 0..n - 1 {
            let mid = (q.levels()[l] + q.levels()[l + 1]) / 2.0;
            if q.quantize(mid).unwrap().1 != q.levels()[l + 1] {
                return outcome(false, format!("n={n} midpoint {mid} not resolved upward"));
            }
        }
        let mut xs: Vec<f64> = (0..500).map(|_| rng.random_range(-1.5..1.5)).collect();
        xs.sort_by(f64::total_cmp);
        let mut prev = f64::NEG_INFINITY;
        for &x in &xs {
            let (i, v) = q.quantize(x).unwrap();
            if q.quantize(v).unwrap() != (i, v) {
                return outcome(false, format!("n={n} not idempotent at {x}"));
            }
            if v < prev {
                return outcome(false, format!("n={n} not monotone at {x}"));
            }
            if v != nearest_level(&q, x) {
                return outcome(false, format!("n={n} not the nearest level at {x}"));
            }
            prev = v;
        }
    }
    outcome(true, "sign law, ternary grid, midpoints, idempotence and monotonicity for n = 2..32")
}

fn criterion_10() -> Outcome {
    let (mut lsq_wins, mut refine_wins) = (0, 0);
    let mut rows = Vec::new();
    for seed in SEEDS {
        let (x, labels, _) = generate_labeled(seed, 32, 3000, 20, 0.5).unwrap();
        let train = x.columns(0, 2000).unwrap();
        let test = x.columns(2000, 1000).unwrap();
        let pre = fit_preprocess(&train, true);
        let (train, test) = (apply_preprocess(&pre, &train).unwrap(), apply_preprocess(&pre, &test).unwrap());
        let (train_labels, test_labels) = (&labels[..2000], &labels[2000..]);
        let lsq = train_lsq(
            &train,
            &LsqParams {
                code_len: 8,
                arity: 16,
                lambda: 1.0,
                max_iters: 30,
                tol: 1e-6,
            },
        )
        .unwrap();
        let ck = train_ckmeans(&train, 8, 16, 30, seed).unwrap();
        let refined = refine_ck_indices(&ck).unwrap().codebooks;
        let acc = |enc| embedding_classification(&train, train_labels, &test, test_labels, enc).unwrap();
        let a_lsq = acc(FeatureEncoder::Lsq(&lsq));
        let a_ref = acc(FeatureEncoder::CkRefined(&refined));
        let a_raw = acc(FeatureEncoder::CkRaw(&ck));
        lsq_wins += (a_lsq >= a_ref) as usize;
        refine_wins += (a_ref >= a_raw) as usize;
        rows.push(format!("{a_lsq:.3}/{a_ref:.3}/{a_raw:.3}"));
    }
    outcome(
        lsq_wins >= 4 && refine_wins >= 4,
        format!(
            "LSQ >= refined {lsq_wins}/5, refined >= raw {refine_wins}/5 [{}]",
            rows.join(" ")
        ),
    )
}

fn list(ids: Vec<usize>) -> RankedList {
    RankedList {
        scores: vec![0.0; ids.len()],
        ids,
        order: nary::distance::RankOrder::AscendingDistance,
    }
}

fn truth(q: usize, nn: usize) -> NeighborList {
    NeighborList {
        query_id: q,
        ids: vec![nn],
        distances: vec![0.0],
    }
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let grid: Vec<usize> = (0..=10).map(|p| 1 << p).collect();
    let mut failures = Vec::new();

    let perfect: Vec<RankedList> = (0..20).map(|q| list(vec![q, 99])).collect();
    let gt: Vec<NeighborList> = (0..20).map(|q| truth(q, q)).collect();
    if recall_at_r(&perfect, &gt, &grid).unwrap() != vec![1.0; grid.len()] {
        failures.push("perfect top-1");
    }

    let n = 1024;
    let shuffled: Vec<RankedList> = (0..30)
        .map(|_| {
            let mut ids: Vec<usize> = (0..n).collect();
            ids.shuffle(&mut rng);
            list(ids)
        })
        .collect();
    let gt: Vec<NeighborList> = (0..30).map(|q| truth(q, rng.random_range(0..n))).collect();
    let curve = recall_at_r(&shuffled, &gt, &grid).unwrap();
    if *curve.last().unwrap() != 1.0 || curve.windows(2).any(|w| w[0] > w[1]) {
        failures.push("random order at R = N");
    }

    let retrieved: Vec<RankedList> = (0..100)
        .map(|q| {
            let mut ids: Vec<usize> = (1000..1010).collect();
            if q < 50 {
                ids[q % 10] = q;
            }
            list(ids)
        })
        .collect();
    let gt: Vec<NeighborList> = (0..100).map(|q| truth(q, q)).collect();
    if recall_at_r(&retrieved, &gt, &[10]).unwrap() != vec![0.5] {
        failures.push("50 of 100 within top 10");
    }

    let g = [1, 2, 4, 8, 16];
    let y = [0.2, 0.4, 0.5, 0.9, 1.0];
    // independent integration: midpoint rule on a fine grid over log2 R
    let steps = 40_000;
    let numeric: f64 = (0..steps)
        .map(|i| {
            let t = 4.0 * (i as f64 + 0.5) / steps as f64;
            let s = t.floor() as usize;
            y[s] + (y[s + 1] - y[s]) * (t - s as f64)
        })
        .sum::<f64>()
        / steps as f64;
    let auc_ok = (auc_recall(&g, &y).unwrap() - numeric).abs() < 1e-9
        && auc_recall(&g, &[1.0; 5]).unwrap() == 1.0
        && auc_recall(&g, &[0.5; 5]).unwrap() == 0.5
        && auc_recall(&[8], &[0.3]).unwrap() == 0.3;
    if !auc_ok {
        failures.push("auc values");
    }

    let cfg = ExperimentConfig {
        data: DataSource::Synthetic {
            dim: 16,
            n_train: 400,
            n_base: 300,
            n_query: 30,
            clusters: 6,
            spread: 0.2,
        },
        bit_budget: 16,
        bits_per_dim: 2,
        iters: 10,
        k: 300,
        r_grid: vec![1, 4, 16, 64, 300],
        ..ExperimentConfig::default()
    };
    for method in Method::ALL {
        for strategy in [Strategy::DistanceEstimation, Strategy::SubsetIndexing] {
            let out = run_experiment(&ExperimentConfig {
                method,
                strategy,
                ..cfg.clone()
            })
            .unwrap();
            let r = &out.curve.recall;
            if *r.last().unwrap() != 1.0 || r.windows(2).any(|w| w[0] > w[1]) {
                failures.push("exhaustion");
            }
        }
    }
    outcome(failures.is_empty(), format!("counting, AUC and exhaustion checks, failures {failures:?}"))
}

fn criterion_12() -> Outcome {
    let base = ExperimentConfig {
        data: DataSource::Synthetic {
            dim: 32,
            n_train: 1000,
            n_base: 2000,
            n_query: 100,
            clusters: 20,
            spread: 0.1,
        },
        bit_budget: 32,
        iters: 10,
        seed: 12,
        ..ExperimentConfig::default()
    };
    let mut checked = 0;
    for (method, strategy, bpd) in [
        (Method::LsqNary, Strategy::DistanceEstimation, 4),
        (Method::LsqBinary, Strategy::SubsetIndexing, 4),
        (Method::Ckmeans, Strategy::SubsetIndexing, 4),
        (Method::Itq, Strategy::DistanceEstimation, 1),
    ] {
        let cfg = ExperimentConfig {
            method,
            strategy,
            bits_per_dim: bpd,
            ..base.clone()
        };
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let out = run_experiment(&cfg).unwrap();
                (out.report, out.csv)
            })
        };
        let first = run(1);
        for threads in [1, 4] {
            if run(threads) != first {
                return outcome(false, format!("{method} {strategy:?} differs with {threads} threads"));
            }
        }
        checked += 1;
    }
    outcome(true, format!("{checked} configs byte-identical over 3 runs on 1 and 4 threads"))
}

fn say(line: String) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

fn report(results: &mut Vec<(usize, Outcome)>, id: usize, o: Outcome, secs: f64) {
    say(format!(
        "criterion {id:>2}: {} ({secs:.1}s) {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    ));
    results.push((id, o));
}

fn timed(results: &mut Vec<(usize, Outcome)>, id: usize, f: fn() -> Outcome) {
    let start = Instant::now();
    let o = f();
    report(results, id, o, start.elapsed().as_secs_f64());
}

#[test]
fn acceptance_criteria() {
    let mut results = Vec::new();
    timed(&mut results, 1, criterion_1);
    timed(&mut results, 2, criterion_2);
    timed(&mut results, 3, criterion_3);
    let start = Instant::now();
    let (c4, c5) = criterion_4_and_5();
    let secs = start.elapsed().as_secs_f64();
    report(&mut results, 4, c4, secs);
    report(&mut results, 5, c5, 0.0);
    timed(&mut results, 6, criterion_6);
    timed(&mut results, 7, criterion_7);
    timed(&mut results, 8, criterion_8);
    timed(&mut results, 9, criterion_9);
    timed(&mut results, 10, criterion_10);
    timed(&mut results, 11, criterion_11);
    timed(&mut results, 12, criterion_12);

    let failed: Vec<usize> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    say(format!("{} of {} criteria pass", results.len() - failed.len(), results.len()));
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

