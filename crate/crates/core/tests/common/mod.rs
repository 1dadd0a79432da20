//! Brute-force reference implementations and corpus generators shared by the
//! integration tests. Nothing here calls into the library's algorithms.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn toks(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// BLEU by direct counting: clipped matches found by scanning, add-one on
/// orders above 1, orders without candidate n-grams skipped.
pub fn oracle_bleu(cand: &[String], refr: &[String], max_order: usize, brevity: bool) -> f64 {
    let grams = |xs: &[String], n: usize| -> Vec<Vec<String>> {
        if xs.len() < n {
            return vec![];
        }
        (0..=xs.len() - n).map(|i| xs[i..i + n].to_vec()).collect()
    };
    let mut logs = Vec::new();
    for n in 1..=max_order {
        if cand.len() < n {
            break;
        }
        let c = grams(cand, n);
        let mut r = grams(refr, n);
        let mut matches = 0usize;
        for g in &c {
            if let Some(pos) = r.iter().position(|x| x == g) {
                r.remove(pos);
                matches += 1;
            }
        }
        let p = if n == 1 {
            if matches == 0 {
                return 0.0;
            }
            matches as f64 / c.len() as f64
        } else {
            (matches as f64 + 1.0) / (c.len() as f64 + 1.0)
        };
        logs.push(p.ln());
    }
    let mut s = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
    if brevity {
        s *= (1.0 - refr.len() as f64 / cand.len() as f64).min(0.0).exp();
    }
    s.clamp(0.0, 1.0)
}

/// Alignment as a dense boolean matrix.
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    cells: Vec<bool>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, links: &[(usize, usize)]) -> Self {
        let mut cells = vec![false; rows * cols];
        for &(i, j) in links {
            cells[i * cols + j] = true;
        }
        Matrix { rows, cols, cells }
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.cols + j]
    }

    pub fn row_aligned(&self, i: usize) -> bool {
        (0..self.cols).any(|j| self.get(i, j))
    }
}

/// Consistency by scanning every cell of the matrix.
pub fn oracle_consistent(m: &Matrix, src: (usize, usize), tgt: (usize, usize)) -> bool {
    let mut inside = 0;
    for i in 0..m.rows {
        for j in 0..m.cols {
            if !m.get(i, j) {
                continue;
            }
            let in_s = src.0 <= i && i <= src.1;
            let in_t = tgt.0 <= j && j <= tgt.1;
            if in_s != in_t {
                return false;
            }
            if in_s {
                inside += 1;
            }
        }
    }
    inside > 0
}

/// `(src_start, src_end, tgt_start, tgt_end)` tuples.
pub type RawPair = (usize, usize, usize, usize);

/// Every span pair passing [`oracle_consistent`], sorted by target then source.
/// Without extensions the source span must begin and end on aligned tokens.
pub fn oracle_extract(m: &Matrix, extensions: bool) -> Vec<RawPair> {
    let mut out = Vec::new();
    for ts in 0..m.cols {
        for te in ts..m.cols {
            for ss in 0..m.rows {
                for se in ss..m.rows {
                    if !oracle_consistent(m, (ss, se), (ts, te)) {
                        continue;
                    }
                    if !extensions && !(m.row_aligned(ss) && m.row_aligned(se)) {
                        continue;
                    }
                    out.push((ss, se, ts, te));
                }
            }
        }
    }
    out.sort_by_key(|&(ss, se, ts, te)| (ts, te, ss, se));
    out
}

/// Closure of the tight pairs under source-side widening across unaligned
/// tokens, computed by fixpoint iteration.
pub fn oracle_extension_closure(m: &Matrix, tight: &[RawPair]) -> Vec<RawPair> {
    let mut set: BTreeSet<RawPair> = tight.iter().copied().collect();
    loop {
        let mut grown = Vec::new();
        for &(ss, se, ts, te) in &set {
            if ss > 0 && !m.row_aligned(ss - 1) {
                grown.push((ss - 1, se, ts, te));
            }
            if se + 1 < m.rows && !m.row_aligned(se + 1) {
                grown.push((ss, se + 1, ts, te));
            }
        }
        let before = set.len();
        set.extend(grown);
        if set.len() == before {
            break;
        }
    }
    let mut out: Vec<_> = set.into_iter().collect();
    out.sort_by_key(|&(ss, se, ts, te)| (ts, te, ss, se));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleProjection {
    Phrase { src: (usize, usize), bleu: f64 },
    Fallback { indices: Vec<usize> },
    Empty,
}

/// Scores every pair of `pairs` independently and applies the selection rules
/// (overlap guard, strict-max BLEU with first-wins ties, shortest source with
/// leftmost tie-break, word-alignment fallback).
pub fn oracle_project(
    m: &Matrix,
    t: &[String],
    pairs: &[RawPair],
    phrase: &[String],
    max_order: usize,
) -> OracleProjection {
    let mut best: Option<((usize, usize), f64)> = None;
    for &(_, _, ts, te) in pairs {
        let cand = &t[ts..=te];
        if !cand.iter().any(|w| phrase.contains(w)) {
            continue;
        }
        let score = oracle_bleu(cand, phrase, max_order, true);
        match best {
            Some((_, top)) if score <= top => {}
            _ => best = Some(((ts, te), score)),
        }
    }
    if let Some((tgt, bleu)) = best {
        let mut src: Option<(usize, usize)> = None;
        for &(ss, se, ts, te) in pairs {
            if (ts, te) != tgt {
                continue;
            }
            let better = match src {
                None => true,
                Some((bs, be)) => (se - ss, ss) < (be - bs, bs),
            };
            if better {
                src = Some((ss, se));
            }
        }
        return OracleProjection::Phrase { src: src.unwrap(), bleu };
    }

    let mut used = vec![false; t.len()];
    for w in phrase {
        for j in 0..t.len() {
            if !used[j] && &t[j] == w {
                used[j] = true;
                break;
            }
        }
    }
    let indices: Vec<usize> = (0..m.rows)
        .filter(|&i| (0..m.cols).any(|j| used[j] && m.get(i, j)))
        .collect();
    if indices.is_empty() {
        OracleProjection::Empty
    } else {
        OracleProjection::Fallback { indices }
    }
}

/// A random small sentence pair with an alignment and a query phrase.
#[derive(Debug, Clone)]
pub struct Instance {
    pub s: Vec<String>,
    pub t: Vec<String>,
    pub links: Vec<(usize, usize)>,
    pub phrase: Vec<String>,
}

pub fn random_instance<R: Rng>(rng: &mut R, max_len: usize) -> Instance {
    const SRC: [&str; 5] = ["la", "casa", "de", "el", "rojo"];
    const TGT: [&str; 6] = ["the", "house", "of", "red", "is", "be"];
    let n = rng.gen_range(1..=max_len);
    let m = rng.gen_range(1..=max_len);
    let s: Vec<String> = (0..n).map(|_| SRC.choose(rng).unwrap().to_string()).collect();
    let t: Vec<String> = (0..m).map(|_| TGT[..5].choose(rng).unwrap().to_string()).collect();
    let density = rng.gen_range(0.0..0.6);
    let mut links = Vec::new();
    for i in 0..n {
        for j in 0..m {
            if rng.gen_bool(density) {
                links.push((i, j));
            }
        }
    }
    let phrase = if rng.gen_bool(0.5) {
        let start = rng.gen_range(0..m);
        let end = rng.gen_range(start..m.min(start + 4));
        t[start..=end].to_vec()
    } else {
        let k = rng.gen_range(1..=3);
        (0..k).map(|_| TGT.choose(rng).unwrap().to_string()).collect()
    };
    Instance { s, t, links, phrase }
}

pub struct SyntheticCorpus {
    pub src: PathBuf,
    pub tgt: PathBuf,
    pub align: PathBuf,
    pub triples: PathBuf,
}

/// Writes a deterministic corpus of `n` sentence pairs (10 to 30 source
/// tokens) with mostly monotone alignments, local reorderings, unaligned and
/// many-to-many links, and one or two triples per sentence, some of them
/// normalized so they no longer occur verbatim.
pub fn synthetic_corpus(dir: &Path, n: usize, seed: u64) -> SyntheticCorpus {
    let mut rng = rng(seed);
    let (mut src, mut tgt, mut align, mut triples) = (String::new(), String::new(), String::new(), String::new());
    for k in 0..n {
        let len = rng.gen_range(10..=30);
        let s: Vec<String> = (0..len).map(|_| format!("s{}", rng.gen_range(0..200))).collect();
        let mut t = Vec::new();
        let mut links = Vec::new();
        let mut order: Vec<usize> = (0..len).collect();
        for w in order.chunks_mut(3) {
            if rng.gen_bool(0.2) {
                w.reverse();
            }
        }
        for &i in &order {
            if t.len() + 3 > 30 {
                break;
            }
            if rng.gen_bool(0.08) {
                continue;
            }
            let j = t.len();
            t.push(format!("w{}", rng.gen_range(0..150)));
            links.push((i, j));
            if rng.gen_bool(0.1) {
                t.push(format!("w{}", rng.gen_range(0..150)));
                links.push((i, j + 1));
            }
            if rng.gen_bool(0.05) && i + 1 < len {
                links.push((i + 1, j));
            }
            if rng.gen_bool(0.05) {
                t.push("the".into());
            }
        }
        if t.is_empty() {
            t.push("w0".into());
            links.push((0, 0));
        }
        writeln!(src, "{}", s.join(" ")).unwrap();
        writeln!(tgt, "{}", t.join(" ")).unwrap();
        links.sort_unstable();
        links.dedup();
        let a: Vec<String> = links.iter().map(|(i, j)| format!("{i}-{j}")).collect();
        writeln!(align, "{}", a.join(" ")).unwrap();

        for _ in 0..rng.gen_range(1..=2) {
            let phrase = |rng: &mut ChaCha8Rng| {
                let start = rng.gen_range(0..t.len());
                let end = rng.gen_range(start..t.len().min(start + 4));
                let mut p = t[start..=end].to_vec();
                if rng.gen_bool(0.2) {
                    p[0] = "be".into();
                }
                p.join(" ")
            };
            let (a1, r, a2) = (phrase(&mut rng), phrase(&mut rng), phrase(&mut rng));
            writeln!(
                triples,
                "{{\"sentence_id\":\"{k}\",\"arg1\":\"{a1}\",\"rel\":\"{r}\",\"arg2\":\"{a2}\"}}"
            )
            .unwrap();
        }
    }
    let write = |name: &str, text: &str| {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    SyntheticCorpus {
        src: write("src.txt", &src),
        tgt: write("tgt.txt", &tgt),
        align: write("align.txt", &align),
        triples: write("triples.jsonl", &triples),
    }
}

/// Runs the CLI in-process; returns exit code, stdout and stderr.
pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = relproj::cli::run_with(std::iter::once("relproj").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}
