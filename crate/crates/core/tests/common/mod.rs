//! Shared fixtures for the integration tests: seeded synthetic corpora and a
//! brute-force Naive Bayes oracle that works in exact rational arithmetic
//! from raw phone strings, without touching the library's count tables.

#![allow(dead_code)]

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phone_intent::{Corpus, Utterance};

pub const BANKING_LABELS: [(&str, usize); 5] = [
    ("send_money", 11),
    ("check_balance", 9),
    ("check_last_transaction", 3),
    ("withdraw_money", 1),
    ("deposit_money", 1),
];

pub const SINGLETON_LABELS: [&str; 2] = ["withdraw_money", "deposit_money"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const INVENTORY: [&str; 38] = [
    "a", "aː", "b", "bʱ", "d", "dʒ", "e", "eː", "f", "ɡ", "h", "i", "iː", "j", "k", "kʰ", "l", "m",
    "n", "ŋ", "o", "oː", "p", "pʰ", "r", "ɾ", "s", "ʃ", "t", "tʰ", "ʈ", "u", "uː", "ʋ", "w", "ə",
    "ɛ", "ɪ",
];

/// 25 utterances with the 11/9/3/1/1 intent distribution. Each class draws
/// most of its phones from its own slice of the inventory.
pub fn banking_shaped_corpus(seed: u64) -> Corpus {
    let mut r = rng(seed);
    let mut us = Vec::new();
    let mut n = 0;
    for (ci, (label, count)) in BANKING_LABELS.iter().enumerate() {
        for _ in 0..*count {
            n += 1;
            let len = r.gen_range(15..40);
            let phones: Vec<&str> = (0..len)
                .map(|_| {
                    if r.gen_bool(0.6) {
                        INVENTORY[ci * 7 + r.gen_range(0..7)]
                    } else {
                        INVENTORY[r.gen_range(0..INVENTORY.len())]
                    }
                })
                .collect();
            let mut u = Utterance::new(format!("utt{n:02}"), *label, &phones.join(" "));
            u.speaker = Some(format!("spk{}", n % 11));
            u.language = Some("hi".into());
            us.push(u);
        }
    }
    Corpus::new(us, true).unwrap()
}

/// `classes` balanced classes whose phone sets are disjoint.
pub fn separable_corpus(seed: u64, classes: usize, per_class: usize) -> Corpus {
    let mut r = rng(seed);
    let mut us = Vec::new();
    for c in 0..classes {
        for i in 0..per_class {
            let len = r.gen_range(40..60);
            let phones: Vec<String> = (0..len)
                .map(|_| format!("c{c}p{}", r.gen_range(0..3)))
                .collect();
            us.push(Utterance::new(
                format!("c{c}u{i:02}"),
                format!("class{c}"),
                &phones.join(" "),
            ));
        }
    }
    Corpus::new(us, true).unwrap()
}

/// The same utterances with their labels randomly permuted.
pub fn shuffle_labels(corpus: &Corpus, seed: u64) -> Corpus {
    let mut labels: Vec<String> = corpus
        .utterances()
        .iter()
        .map(|u| u.intent.clone())
        .collect();
    labels.shuffle(&mut rng(seed));
    let us = corpus
        .utterances()
        .iter()
        .zip(labels)
        .map(|(u, l)| Utterance {
            intent: l,
            ..u.clone()
        })
        .collect();
    Corpus::new(us, true).unwrap()
}

/// Up to 10 utterances, up to 8 phone types, sequences of length 0..=6.
/// At least one utterance has a phone so that some vocabulary exists.
pub fn small_random_corpus(r: &mut ChaCha8Rng) -> Corpus {
    let types = r.gen_range(1..=8);
    let classes = r.gen_range(1..=3);
    let n = r.gen_range(1..=10);
    let mut us: Vec<Utterance> = (0..n)
        .map(|i| {
            let len = r.gen_range(0..=6);
            let phones: Vec<String> = (0..len)
                .map(|_| format!("q{}", r.gen_range(0..types)))
                .collect();
            Utterance::new(
                format!("u{i}"),
                format!("L{}", r.gen_range(0..classes)),
                &phones.join(" "),
            )
        })
        .collect();
    if us.iter().all(|u| u.phones.is_empty()) {
        us[0] = Utterance::new("u0", us[0].intent.clone(), "q0");
    }
    Corpus::new(us, false).unwrap()
}

pub fn random_phones(r: &mut ChaCha8Rng, types: usize, max_len: usize) -> Vec<String> {
    let len = r.gen_range(0..=max_len);
    (0..len)
        .map(|_| format!("q{}", r.gen_range(0..types)))
        .collect()
}

#[derive(Debug, Clone)]
pub enum OracleSmoothing {
    AddOne,
    /// Delta as an exact fraction num/den.
    Absolute(i64, i64),
}

impl OracleSmoothing {
    pub fn delta_f64(&self) -> Option<f64> {
        match self {
            OracleSmoothing::AddOne => None,
            OracleSmoothing::Absolute(n, d) => Some(*n as f64 / *d as f64),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub orders: Vec<usize>,
    pub smoothing: Vec<OracleSmoothing>,
    pub weights: Vec<u32>,
    pub uniform_prior: bool,
}

/// One training example: (label, phones).
pub type Row = (String, Vec<String>);

pub fn rows_of(corpus: &Corpus) -> Vec<Row> {
    corpus
        .utterances()
        .iter()
        .map(|u| {
            (
                u.intent.clone(),
                u.phones.iter().map(|p| p.to_string()).collect(),
            )
        })
        .collect()
}

fn windows(seq: &[String], n: usize) -> Vec<Vec<String>> {
    if seq.len() < n {
        return Vec::new();
    }
    (0..=seq.len() - n)
        .map(|i| seq[i..i + n].to_vec())
        .collect()
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn ln_bigint(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top: BigInt = x >> shift;
    top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn ln_rational(x: &BigRational) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    assert!(x.is_positive());
    ln_bigint(x.numer()) - ln_bigint(x.denom())
}

/// Exact joint likelihood prior(c) * Π_o Π_w P_o(w|c)^weight_o for every
/// label in `labels` (the labels present in `train`, first-appearance order).
pub fn oracle_joint(
    train: &[Row],
    cfg: &OracleConfig,
    test: &[String],
) -> (Vec<String>, Vec<BigRational>) {
    let mut labels: Vec<String> = Vec::new();
    for (l, _) in train {
        if !labels.contains(l) {
            labels.push(l.clone());
        }
    }
    let n_utts = train.len() as i64;
    let mut joint: Vec<BigRational> = labels
        .iter()
        .map(|l| {
            if cfg.uniform_prior {
                rat(1, labels.len() as i64)
            } else {
                rat(train.iter().filter(|(x, _)| x == l).count() as i64, n_utts)
            }
        })
        .collect();

    for ((&n, smoothing), &weight) in cfg.orders.iter().zip(&cfg.smoothing).zip(&cfg.weights) {
        if weight == 0 {
            continue;
        }
        let vocab: BTreeSet<Vec<String>> = train.iter().flat_map(|(_, s)| windows(s, n)).collect();
        let v = vocab.len() as i64;
        if v == 0 {
            continue;
        }
        for (ci, label) in labels.iter().enumerate() {
            // count(w, c) by rescanning every training sequence of class c.
            let counts: Vec<(Vec<String>, i64)> = vocab
                .iter()
                .map(|w| {
                    let c = train
                        .iter()
                        .filter(|(l, _)| l == label)
                        .map(|(_, s)| windows(s, n).iter().filter(|g| *g == w).count() as i64)
                        .sum();
                    (w.clone(), c)
                })
                .collect();
            let total: i64 = counts.iter().map(|(_, c)| c).sum();
            let reserved = match smoothing {
                OracleSmoothing::AddOne => BigRational::zero(),
                OracleSmoothing::Absolute(dn, dd) => {
                    let delta = rat(*dn, *dd);
                    counts
                        .iter()
                        .map(|(_, k)| {
                            let k = BigRational::from_integer(BigInt::from(*k));
                            if k < delta {
                                k
                            } else {
                                delta.clone()
                            }
                        })
                        .fold(BigRational::zero(), |a, b| a + b)
                }
            };
            for g in windows(test, n) {
                let Some(c) = counts.iter().find(|(w, _)| *w == g).map(|(_, c)| *c) else {
                    continue;
                };
                let p = if total == 0 {
                    rat(1, v)
                } else {
                    match smoothing {
                        OracleSmoothing::AddOne => rat(c + 1, total + v),
                        OracleSmoothing::Absolute(dn, dd) => {
                            let delta = rat(*dn, *dd);
                            let cr = BigRational::from_integer(BigInt::from(c));
                            let discounted = if cr > delta {
                                cr - &delta
                            } else {
                                BigRational::zero()
                            };
                            let t = BigRational::from_integer(BigInt::from(total));
                            discounted / &t
                                + &reserved / t / BigRational::from_integer(BigInt::from(v))
                        }
                    }
                };
                for _ in 0..weight {
                    joint[ci] = &joint[ci] * &p;
                }
            }
        }
    }
    (labels, joint)
}

/// Natural-log oracle scores plus the exact argmax (first label on ties).
pub fn oracle_predict(
    train: &[Row],
    cfg: &OracleConfig,
    test: &[String],
) -> (Vec<String>, Vec<f64>, String) {
    let (labels, joint) = oracle_joint(train, cfg, test);
    let mut best = 0;
    for i in 1..joint.len() {
        if joint[i] > joint[best] {
            best = i;
        }
    }
    let logs = joint.iter().map(ln_rational).collect();
    let winner = labels[best].clone();
    (labels, logs, winner)
}

/// Exact training-prior mass on `gold`.
pub fn prior_of(train: &[Row], gold: &str) -> f64 {
    train.iter().filter(|(l, _)| l == gold).count() as f64 / train.len() as f64
}

pub fn one() -> BigRational {
    BigRational::one()
}
