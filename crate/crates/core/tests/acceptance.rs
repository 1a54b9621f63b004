//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs without the libtest harness so the lines print as-is.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use findings_ir::corpus::{Corpus, Finding};
use findings_ir::crr::{hierarchical_sim, jaccard, parse_crr_ref, prefilter, CrrRef, CrrTree, PrefilterConfig};
use findings_ir::dense::{cosine_matrix, cosine_matrix_pairwise, EmbeddingSet};
use findings_ir::eval::{
    average_precision_at_k, mc_validate, reciprocal_rank_at_k, simulate_bounds, BoundRow, McConfig, SimSpec, System,
};
use findings_ir::lexical::{build_lexical_index, term_weight, Bm25Params, Variant};
use findings_ir::retriever::{Engine, EngineConfig, RetrieverConfig, Scheme};
use findings_ir::synth::generate_synthetic;
use findings_ir::tokenizer::{build_tokenized_corpus, TokenizedCorpus, TokenizerConfig};

type Outcome = Result<String, String>;
type Criterion<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= tol * scale.max(1e-300) || (a - b).abs() <= 1e-15
}

// ---------------------------------------------------------------- simulation

fn simulation_rows() -> (Vec<BoundRow>, Duration) {
    let start = Instant::now();
    let rows = simulate_bounds(&SimSpec::default(), &McConfig::default()).expect("simulation runs");
    (rows, start.elapsed())
}

fn row(rows: &[BoundRow], system: System, g_tilde: usize) -> &BoundRow {
    rows.iter()
        .find(|r| r.system == system && r.g_tilde == g_tilde)
        .expect("row present")
}

fn simulation_bounds(rows: &[BoundRow], elapsed: Duration) -> Outcome {
    let checks = [
        (5, "MAP", row(rows, System::Omega1, 5).map, 0.95, 0.99),
        (20, "MAP", row(rows, System::Omega1, 20).map, 0.88, 0.92),
        (5, "MRR", row(rows, System::Omega1, 5).mrr, 0.95, 0.99),
        (20, "MRR", row(rows, System::Omega1, 20).mrr, 0.85, 0.89),
    ];
    let mut detail = Vec::new();
    for (g, metric, value, lo, hi) in checks {
        ensure((lo..=hi).contains(&value), || {
            format!("omega1 {metric} at |G~|={g} is {value:.4}, outside [{lo}, {hi}]")
        })?;
        detail.push(format!("{metric}@{g}={value:.4}"));
    }
    ensure(elapsed < Duration::from_secs(300), || {
        format!("took {:.1}s, over 5 minutes", elapsed.as_secs_f64())
    })?;
    Ok(format!("{} in {:.1}s", detail.join(" "), elapsed.as_secs_f64()))
}

fn simulation_ordering(rows: &[BoundRow]) -> Outcome {
    let mut min_margin = f64::INFINITY;
    for g in [5, 10, 15, 20] {
        let pairs = [(System::Omega1, System::Omega2), (System::Omega2, System::Omega3)];
        for (hi, lo) in pairs {
            let (a, b) = (row(rows, hi, g), row(rows, lo, g));
            for (metric, va, sa, vb, sb) in [
                ("MAP", a.map, a.map_se, b.map, b.map_se),
                ("MRR", a.mrr, a.mrr_se, b.mrr, b.mrr_se),
            ] {
                let se = (sa * sa + sb * sb).sqrt();
                let margin = (va - vb) / se;
                ensure(margin > 2.0, || {
                    format!("{} vs {} {metric} at {g}: margin {margin:.2} SE", hi.name(), lo.name())
                })?;
                min_margin = min_margin.min(margin);
            }
        }
    }
    Ok(format!("smallest margin {min_margin:.1} SE"))
}

fn simulation_monotone(rows: &[BoundRow]) -> Outcome {
    let seq: Vec<&BoundRow> = [5, 10, 15, 20].iter().map(|&g| row(rows, System::Omega1, g)).collect();
    for w in seq.windows(2) {
        let (a, b) = (w[0], w[1]);
        let map_tol = 2.0 * (a.map_se.powi(2) + b.map_se.powi(2)).sqrt();
        let mrr_tol = 2.0 * (a.mrr_se.powi(2) + b.mrr_se.powi(2)).sqrt();
        ensure(b.map <= a.map + map_tol, || {
            format!("MAP rises {} -> {}", a.g_tilde, b.g_tilde)
        })?;
        ensure(b.mrr <= a.mrr + mrr_tol, || {
            format!("MRR rises {} -> {}", a.g_tilde, b.g_tilde)
        })?;
    }
    let maps: Vec<String> = seq.iter().map(|r| format!("{:.3}", r.map)).collect();
    Ok(format!("omega1 MAP {}", maps.join(" > ")))
}

// ------------------------------------------------------------------- metrics

fn brute_ap(ranking: &[u32], relevant: &HashSet<u32>, k: usize) -> f64 {
    let top = &ranking[..k.min(ranking.len())];
    let mut total = 0.0;
    for i in 0..top.len() {
        if relevant.contains(&top[i]) {
            let prefix: HashSet<u32> = top[..=i].iter().copied().collect();
            let precision = prefix.intersection(relevant).count() as f64 / (i + 1) as f64;
            total += precision;
        }
    }
    total / relevant.len().min(k) as f64
}

fn brute_rr(ranking: &[u32], relevant: &HashSet<u32>, k: usize) -> f64 {
    for (rank, item) in ranking.iter().take(k).enumerate() {
        if relevant.contains(item) {
            return 1.0 / (rank as f64 + 1.0);
        }
    }
    0.0
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..1000 {
        let n = rng.random_range(1..=10u32);
        let mut ranking: Vec<u32> = (0..n).collect();
        ranking.shuffle(&mut rng);
        let n_rel = rng.random_range(1..=n as usize + 2);
        let relevant: HashSet<u32> = (0..n + 2)
            .collect::<Vec<_>>()
            .choose_multiple(&mut rng, n_rel)
            .copied()
            .collect();
        let k = rng.random_range(1..=12);
        let ap = average_precision_at_k(&ranking, &relevant, k).map_err(|e| e.to_string())?;
        let rr = reciprocal_rank_at_k(&ranking, &relevant, k).map_err(|e| e.to_string())?;
        let (bap, brr) = (brute_ap(&ranking, &relevant, k), brute_rr(&ranking, &relevant, k));
        ensure((ap - bap).abs() <= 1e-12 && (rr - brr).abs() <= 1e-12, || {
            format!("case {case}: ap {ap} vs {bap}, rr {rr} vs {brr}")
        })?;
    }
    Ok("1000 instances".into())
}

// ------------------------------------------------------------------- lexical

fn naive_scores(docs: &[Vec<String>], query: &[String], variant: Variant, p: &Bm25Params) -> Vec<f64> {
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let df = |t: &str| docs.iter().filter(|d| d.iter().any(|x| x == t)).count() as f64;
    let tf = |d: &[String], t: &str| d.iter().filter(|x| *x == t).count() as f64;
    let vocab: BTreeSet<&String> = docs.iter().flatten().collect();
    let known: Vec<&String> = query.iter().filter(|t| vocab.contains(t)).collect();
    docs.iter()
        .map(|d| {
            let dl = d.len() as f64;
            match variant {
                Variant::Tfidf => {
                    let idf = |t: &str| (n / df(t)).ln() + 1.0;
                    let qv: BTreeMap<&str, f64> = known.iter().fold(BTreeMap::new(), |mut m, t| {
                        *m.entry(t.as_str()).or_insert(0.0) += idf(t);
                        m
                    });
                    let dv: BTreeMap<&str, f64> = d.iter().map(|t| (t.as_str(), tf(d, t) * idf(t))).collect();
                    let dotp: f64 = qv.iter().map(|(t, w)| w * dv.get(t).copied().unwrap_or(0.0)).sum();
                    let qn = qv.values().map(|w| w * w).sum::<f64>().sqrt();
                    let dn = dv.values().map(|w| w * w).sum::<f64>().sqrt();
                    if qn == 0.0 || dn == 0.0 {
                        0.0
                    } else {
                        dotp / (qn * dn)
                    }
                }
                _ => known
                    .iter()
                    .map(|t| {
                        let f = tf(d, t);
                        if f == 0.0 {
                            return 0.0;
                        }
                        let idf = ((n - df(t) + 0.5) / (df(t) + 0.5) + 1.0).ln();
                        let len = 1.0 - p.b + p.b * dl / avgdl;
                        let w = match variant {
                            Variant::Bm25 => f * (p.k1 + 1.0) / (f + p.k1 * len),
                            Variant::Bm25Plus => f * (p.k1 + 1.0) / (f + p.k1 * len) + p.delta,
                            _ => {
                                let c = f / len + p.delta;
                                (p.k1 + 1.0) * c / (p.k1 + c)
                            }
                        };
                        idf * w
                    })
                    .sum(),
            }
        })
        .collect()
}

fn random_docs(rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    let n = rng.random_range(1..=50);
    let vocab = rng.random_range(2..=30);
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..=40);
            (0..len).map(|_| format!("w{}", rng.random_range(0..vocab))).collect()
        })
        .collect()
}

fn lexical_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut compared = 0usize;
    for case in 0..200 {
        let docs = random_docs(&mut rng);
        let ids: Vec<String> = (0..docs.len()).map(|i| format!("d{i:02}")).collect();
        let tc = TokenizedCorpus::from_token_lists(ids, docs.clone()).map_err(|e| e.to_string())?;
        let query: Vec<String> = (0..rng.random_range(1..=6))
            .map(|_| format!("w{}", rng.random_range(0..35)))
            .collect();
        for variant in Variant::ALL {
            let params = Bm25Params::for_variant(variant);
            let index = build_lexical_index(&tc, variant, params).map_err(|e| e.to_string())?;
            let fast = index.score_query(&query);
            let slow = naive_scores(&docs, &query, variant, &params);
            for (d, (a, b)) in fast.iter().zip(&slow).enumerate() {
                ensure(rel_close(*a, *b, 1e-9), || {
                    format!("case {case} {} doc {d}: index {a} vs naive {b}", variant.name())
                })?;
                compared += 1;
            }
        }
    }

    // tf = 1 at average length with k1 = 1.6: idf * 2.6 / 2.6
    let p = Bm25Params {
        k1: 1.6,
        b: 0.75,
        delta: 0.0,
    };
    let w = term_weight(Variant::Bm25, 1.0, 7.0, 7.0, &p);
    let (numerator, denominator) = (1.0 * (1.6 + 1.0), 1.0 + 1.6 * 1.0);
    ensure(
        (w - numerator / denominator).abs() < 1e-15 && (w - 1.0).abs() < 1e-15,
        || format!("unit term weight {w}"),
    )?;
    let docs: Vec<Vec<String>> = vec![
        vec!["a".into(), "b".into()],
        vec!["c".into(), "d".into()],
        vec!["e".into(), "f".into()],
        vec!["g".into(), "h".into()],
    ];
    let tc =
        TokenizedCorpus::from_token_lists((0..4).map(|i| i.to_string()).collect(), docs).map_err(|e| e.to_string())?;
    let index = build_lexical_index(&tc, Variant::Bm25, p).map_err(|e| e.to_string())?;
    let score = index.score_query(&["a".to_string()])[0];
    let idf = ((4.0 - 1.0 + 0.5) / (1.0 + 0.5) + 1.0_f64).ln();
    ensure((score - idf).abs() < 1e-12, || format!("score {score} vs idf {idf}"))?;
    Ok(format!(
        "{compared} scores on 200 corpora; unit-tf score equals idf {idf:.6}"
    ))
}

fn short_document_lift() -> Outcome {
    let mut points = 0usize;
    for k1 in [0.5, 1.0, 1.2, 1.6, 2.0, 3.0] {
        for b in [0.25, 0.5, 0.75, 1.0] {
            for ratio in [0.1, 0.25, 0.5, 0.75, 0.9, 0.99] {
                for delta in [0.25, 0.5, 1.0] {
                    let p = Bm25Params { k1, b, delta };
                    for tf in 1..=20 {
                        let tf = f64::from(tf);
                        let base = term_weight(Variant::Bm25, tf, ratio * 100.0, 100.0, &p);
                        let plus = term_weight(Variant::Bm25Plus, tf, ratio * 100.0, 100.0, &p);
                        let l = term_weight(Variant::Bm25L, tf, ratio * 100.0, 100.0, &p);
                        ensure(plus >= base && l >= base, || {
                            format!(
                                "k1={k1} b={b} dl/avgdl={ratio} delta={delta} tf={tf}: bm25 {base} plus {plus} l {l}"
                            )
                        })?;
                        points += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{points} sweep points"))
}

// --------------------------------------------------------------------- dense

fn random_set(rng: &mut ChaCha8Rng, prefix: &str, n: usize, dim: usize) -> EmbeddingSet {
    let ids = (0..n).map(|i| format!("{prefix}{i:03}")).collect();
    let vecs = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    EmbeddingSet::new(dim, ids, vecs).expect("valid set")
}

fn cosine_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let queries = random_set(&mut rng, "q", 100, 16);
        let corpus = random_set(&mut rng, "d", 100, 16);
        let slow = cosine_matrix_pairwise(&queries, &corpus).map_err(|e| e.to_string())?;
        let fast = cosine_matrix(
            &queries.normalize().map_err(|e| e.to_string())?,
            &corpus.normalize().map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        for r in 0..100 {
            for c in 0..100 {
                worst = worst.max((fast.get(r, c) - slow.get(r, c)).abs());
            }
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

// ----------------------------------------------------------------------- CRR

fn refs(list: &[&str]) -> BTreeSet<CrrRef> {
    list.iter().map(|s| parse_crr_ref(s).expect("valid ref")).collect()
}

const REF_POOL: &[&str] = &[
    "92",
    "92(1)",
    "92(3)",
    "92(3)(a)",
    "178",
    "178(1)",
    "178(1)(b)",
    "182",
    "182(1)",
    "182(1)(e)",
    "182(1)(f)",
    "182(2)",
    "36(1)(a)",
    "36(1)(b)",
    "153(5)",
];

fn random_refs(rng: &mut ChaCha8Rng) -> BTreeSet<CrrRef> {
    let n = rng.random_range(0..=4);
    refs(&REF_POOL.choose_multiple(rng, n).copied().collect::<Vec<_>>())
}

fn crr_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tree = CrrTree::from_refs(refs(REF_POOL).iter());
    for _ in 0..500 {
        let (a, b) = (random_refs(&mut rng), random_refs(&mut rng));
        let (jab, jba) = (jaccard(&a, &b), jaccard(&b, &a));
        let hab = hierarchical_sim(&a, &b, &tree).map_err(|e| e.to_string())?;
        let hba = hierarchical_sim(&b, &a, &tree).map_err(|e| e.to_string())?;
        ensure(jab == jba && hab == hba, || format!("asymmetric on {a:?} / {b:?}"))?;
        ensure((0.0..=1.0).contains(&jab) && (0.0..=1.0).contains(&hab), || {
            "out of [0,1]".into()
        })?;
        if !a.is_empty() {
            ensure(jaccard(&a, &a) == 1.0, || "J(A,A) != 1".into())?;
            let haa = hierarchical_sim(&a, &a, &tree).map_err(|e| e.to_string())?;
            ensure(haa == 1.0, || format!("H(A,A) = {haa}"))?;
        }
    }

    // shrinkage under rising thresholds
    let findings: Vec<Finding> = (0..60)
        .map(|i| {
            let mut f = Finding::from_text(format!("F{i:02}"), "text");
            f.crr_refs = random_refs(&mut rng);
            f
        })
        .collect();
    let corpus = Corpus::new(findings).map_err(|e| e.to_string())?;
    let tree = CrrTree::from_corpus(&corpus);
    for q in 0..corpus.len() {
        let query = corpus.get(q);
        let mut previous: Option<BTreeSet<usize>> = None;
        for step in 0..=10 {
            let t = f64::from(step) / 10.0;
            let cfg = PrefilterConfig {
                jaccard_min: t,
                hier_min: t,
                fallback_on_empty: false,
            };
            let kept: BTreeSet<usize> = prefilter(query, &corpus, &tree, &cfg).into_iter().collect();
            if let Some(prev) = &previous {
                ensure(kept.is_subset(prev), || format!("query {q}: set grew at threshold {t}"))?;
            }
            previous = Some(kept);
        }
    }

    // hand-worked membership at thresholds 1/3
    let docs: [&[&str]; 10] = [
        &["182(1)(f)", "92(3)"],
        &["182(1)(f)"],
        &["182(1)(f)", "92(3)", "178(1)"],
        &["182(1)(e)"],
        &["92(3)", "36(1)(a)", "36(1)(b)"],
        &["92(3)", "178(1)(b)"],
        &["182(1)(f)", "182(1)(e)"],
        &[],
        &["92(3)", "92(4)"],
        &["182(2)", "92(3)"],
    ];
    let findings: Vec<Finding> = docs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut f = Finding::from_text(format!("D{i}"), "text");
            f.crr_refs = refs(r);
            f
        })
        .collect();
    let corpus = Corpus::new(findings).map_err(|e| e.to_string())?;
    let tree = CrrTree::from_corpus(&corpus);
    let mut query = Finding::from_text("Q", "text");
    query.crr_refs = refs(&["182(1)(f)", "92(3)"]);
    let cfg = PrefilterConfig {
        fallback_on_empty: false,
        ..PrefilterConfig::default()
    };
    let kept: Vec<&str> = prefilter(&query, &corpus, &tree, &cfg)
        .into_iter()
        .map(|p| corpus.get(p).id.as_str())
        .collect();
    let expected = ["D0", "D1", "D2", "D6", "D8", "D9"];
    ensure(kept == expected, || format!("kept {kept:?}, expected {expected:?}"))?;
    Ok(format!(
        "symmetry/bounds/identity on 500 pairs; monotone on 60 queries; membership {kept:?}"
    ))
}

// ----------------------------------------------------------------- synthetic

fn synthetic_ordering() -> Outcome {
    let synth = generate_synthetic(1000, 0, 50).map_err(|e| e.to_string())?;
    let labels = synth.labels();
    let engine = Engine::build(synth.corpus.clone(), EngineConfig::default()).map_err(|e| e.to_string())?;
    let mc = McConfig {
        m: 100,
        reps: 40,
        k: 100,
        seed: 0,
    };
    let schemes = [
        Scheme::Random,
        Scheme::Tfidf,
        Scheme::Bm25,
        Scheme::Bm25Plus,
        Scheme::Bm25L,
        Scheme::Bm25LPlus,
    ];
    let mut table: Vec<(Scheme, f64, f64)> = Vec::new();
    for scheme in schemes {
        let off = RetrieverConfig::new(scheme, mc.k);
        let on = off.clone().with_prefilter(PrefilterConfig::default());
        let map_off = mc_validate(&engine, &labels, &off, &mc).map_err(|e| e.to_string())?.map;
        let map_on = mc_validate(&engine, &labels, &on, &mc).map_err(|e| e.to_string())?.map;
        table.push((scheme, map_off, map_on));
    }
    let (_, random_off, random_on) = table[0];
    for &(scheme, off, on) in &table {
        ensure(on >= off, || {
            format!("{}: prefilter {on:.4} < plain {off:.4}", scheme.label())
        })?;
        if scheme != Scheme::Random {
            ensure(off > random_off && on > random_on, || {
                format!("{} does not beat Random ({off:.4}/{on:.4})", scheme.label())
            })?;
        }
    }
    let cells: Vec<String> = table
        .iter()
        .map(|(s, off, on)| format!("{} {off:.3}->{on:.3}", s.label()))
        .collect();
    Ok(cells.join(", "))
}

// ----------------------------------------------------------------- tokenizer

const WORKED: &str = "Institutions shall estimate conversion factors by facility grade or pool on the basis of the average realized conversion factors by facility grade (amidst 2024 planning), pursuant article 182(1)(f) of Regulation (EU) No 575/2013.";

fn engineered_corpus() -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let fillers: Vec<String> = [
        "capital",
        "model",
        "validation",
        "institution",
        "exposure",
        "rating",
        "collateral",
        "review",
        "audit",
        "governance",
        "data",
        "quality",
        "margin",
        "default",
        "portfolio",
        "monitoring",
        "threshold",
        "policy",
        "control",
        "report",
        "committee",
        "limit",
        "segment",
        "obligor",
        "calibration",
        "backtesting",
        "override",
        "documentation",
        "management",
        "horizon",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut findings = vec![Finding::from_text("F0000", WORKED)];
    for i in 1..2500 {
        let mut text = String::new();
        if i < 2400 {
            // document-initial and followed by a reference, so never merged
            text.push_str("Pursuant to Article 92(3) ");
        }
        if i % 80 == 0 {
            text.push_str("Article 166(8) conversion factors ");
        }
        if i % 500 == 0 {
            // keeps the example's content words above min_df; every neighbour
            // is a reference token, so none of them can form a phrase
            let sep = " Article 36(1)(a) ";
            let words = [
                "estimate", "facility", "grade", "pool", "basis", "average", "realized", "planning",
            ];
            text.push_str(&words.join(sep));
            text.push_str(" Article 182(1)(f) ");
        }
        let words: Vec<&str> = (0..12)
            .map(|_| fillers.choose(&mut rng).expect("non-empty").as_str())
            .collect();
        text.push_str(&words.join(" "));
        text.push('.');
        findings.push(Finding::from_text(format!("F{i:04}"), text));
    }
    Corpus::new(findings).expect("valid corpus")
}

fn tokenizer_example() -> Outcome {
    let corpus = engineered_corpus();
    let tc = build_tokenized_corpus(&corpus, &TokenizerConfig::full()).map_err(|e| e.to_string())?;
    let doc = &tc.docs[0];
    for want in ["institution", "conversion_factor", "CRR_182_1_f"] {
        ensure(doc.iter().any(|t| t == want), || format!("{want} missing from {doc:?}"))?;
    }
    for banned in ["amidst", "pursuant", "article"] {
        ensure(!doc.iter().any(|t| t == banned), || {
            format!("{banned} present in {doc:?}")
        })?;
    }
    Ok(doc.join(" "))
}

// ----------------------------------------------------------------------- CLI

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_findings-ir")
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(bin()).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn dir_snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let key = path.strip_prefix(dir).expect("under root").display().to_string();
                out.insert(key, std::fs::read(&path).expect("readable file"));
            }
        }
    }
    out
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |s: &str| tmp.path().join(s).display().to_string();
    let mut compared = Vec::new();

    let mut twice = |name: &str, dirs: [&str; 2], make: &dyn Fn(&str) -> Vec<String>| -> Result<(), String> {
        let mut outputs = Vec::new();
        for d in dirs {
            let args = make(d);
            let argv: Vec<&str> = args.iter().map(String::as_str).collect();
            let stdout = run_cli(&argv)?;
            let files = if d.is_empty() {
                BTreeMap::new()
            } else {
                dir_snapshot(Path::new(d))
            };
            outputs.push((stdout, files));
        }
        ensure(outputs[0] == outputs[1], || format!("{name} differs between runs"))?;
        compared.push(name.to_string());
        Ok(())
    };

    let (g1, g2) = (p("gen1"), p("gen2"));
    twice("gen-corpus", [&g1, &g2], &|d| {
        [
            "--seed",
            "9",
            "gen-corpus",
            "--n",
            "200",
            "--clusters",
            "20",
            "--dim",
            "8",
            "--out",
            d,
        ]
        .map(String::from)
        .to_vec()
    })?;
    let corpus = format!("{g1}/corpus.jsonl");
    let emb = format!("{g1}/embeddings.emb1");
    let labels = format!("{g1}/labels.jsonl");
    let (i1, i2) = (p("idx1"), p("idx2"));
    twice("index", [&i1, &i2], &|d| {
        ["index", "--corpus", &corpus, "--embeddings", &emb, "--out", d]
            .map(String::from)
            .to_vec()
    })?;
    twice("query", ["", ""], &|_| {
        ["query", "--index", &i1, "--queries", &corpus, "--k", "5", "--prefilter"]
            .map(String::from)
            .to_vec()
    })?;
    twice("query random", ["", ""], &|_| {
        [
            "--seed",
            "4",
            "query",
            "--index",
            &i1,
            "--text",
            "capital model review",
            "--scheme",
            "random",
        ]
        .map(String::from)
        .to_vec()
    })?;
    let (e1, e2) = (p("eval1"), p("eval2"));
    twice("eval", [&e1, &e2], &|d| {
        [
            "eval",
            "--index",
            &i1,
            "--labels",
            &labels,
            "--reps",
            "10",
            "--prefilter",
            "--out",
            d,
        ]
        .map(String::from)
        .to_vec()
    })?;
    let (s1, s2) = (p("sim1"), p("sim2"));
    twice("simulate", [&s1, &s2], &|d| {
        [
            "simulate",
            "--db-size",
            "500",
            "--mc-runs",
            "8",
            "--reps",
            "50",
            "--out",
            d,
        ]
        .map(String::from)
        .to_vec()
    })?;
    Ok(compared.join(", "))
}

// --------------------------------------------------------------------- main

fn main() {
    let (rows, elapsed) = simulation_rows();
    let criteria: Vec<(&str, Criterion)> = vec![
        (
            "simulation bounds for omega1",
            Box::new(|| simulation_bounds(&rows, elapsed)),
        ),
        (
            "omega1 >= omega2 >= omega3 beyond 2 SE",
            Box::new(|| simulation_ordering(&rows)),
        ),
        ("omega1 non-increasing in |G~|", Box::new(|| simulation_monotone(&rows))),
        ("AP@k / RR@k brute-force oracle", Box::new(metric_oracles)),
        ("inverted index equals naive lexical scoring", Box::new(lexical_oracle)),
        ("BM25+ and BM25L lift short documents", Box::new(short_document_lift)),
        ("cosine matrix equals pairwise cosine", Box::new(cosine_equivalence)),
        ("CRR similarity and prefilter properties", Box::new(crr_properties)),
        ("synthetic corpus scheme ordering", Box::new(synthetic_ordering)),
        ("tokenizer worked example", Box::new(tokenizer_example)),
        ("CLI determinism", Box::new(cli_determinism)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
