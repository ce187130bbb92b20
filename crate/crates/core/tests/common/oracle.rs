//! Brute-force interpolated modified Kneser-Ney over raw string lines.
//! Shares no code with the library: counts are taken straight from padded
//! token windows and every probability is the textbook recursion.

use std::collections::{BTreeMap, BTreeSet};

const S: &str = "<s>";
const U: &str = "<unk>";

type Key = Vec<String>;

pub struct OracleLm {
    words: BTreeSet<String>,
    tri: BTreeMap<Key, u64>,
    big: BTreeMap<Key, u64>,
    /// Distinct left extensions of each bigram / unigram.
    left2: BTreeMap<Key, u64>,
    left1: BTreeMap<String, u64>,
    d: [[f64; 3]; 3],
}

fn disc(n: [u64; 4]) -> [f64; 3] {
    let f = |x: u64| x as f64;
    if n[0] == 0 || n[1] == 0 {
        return [0.75; 3];
    }
    let y = f(n[0]) / (f(n[0]) + 2.0 * f(n[1]));
    let d1 = (1.0 - 2.0 * y * f(n[1]) / f(n[0])).clamp(0.0, 1.0);
    let d2 = if n[2] > 0 { (2.0 - 3.0 * y * f(n[2]) / f(n[1])).clamp(0.0, 2.0) } else { 0.75 };
    let d3 = if n[2] > 0 && n[3] > 0 { (3.0 - 4.0 * y * f(n[3]) / f(n[2])).clamp(0.0, 3.0) } else { 0.75 };
    [d1, d2, d3]
}

fn coc<'a>(values: impl Iterator<Item = &'a u64>) -> [u64; 4] {
    let mut n = [0; 4];
    for &v in values {
        if (1..=4).contains(&v) {
            n[v as usize - 1] += 1;
        }
    }
    n
}

fn pick(d: &[f64; 3], c: u64) -> f64 {
    match c {
        0 => 0.0,
        1 => d[0],
        2 => d[1],
        _ => d[2],
    }
}

impl OracleLm {
    pub fn new(lines: &[Vec<String>]) -> Self {
        let mut words: BTreeSet<String> = lines.iter().flatten().cloned().collect();
        words.insert(U.to_owned());
        let mut tri = BTreeMap::new();
        let mut big = BTreeMap::new();
        for line in lines {
            let mut p = vec![S.to_owned(), S.to_owned()];
            p.extend(line.iter().cloned());
            for i in 1..p.len() {
                *big.entry(p[i - 1..=i].to_vec()).or_insert(0) += 1;
                if i >= 2 {
                    *tri.entry(p[i - 2..=i].to_vec()).or_insert(0) += 1;
                }
            }
        }
        let mut left2: BTreeMap<Key, u64> = BTreeMap::new();
        for k in tri.keys() {
            *left2.entry(k[1..].to_vec()).or_insert(0) += 1;
        }
        let mut left1: BTreeMap<String, u64> = BTreeMap::new();
        for k in big.keys() {
            if k[1] != S {
                *left1.entry(k[1].clone()).or_insert(0) += 1;
            }
        }
        let d = [
            disc(coc(left1.values())),
            disc(coc(left2.values())),
            disc(coc(tri.values())),
        ];
        Self { words, tri, big, left2, left1, d }
    }

    /// Every predictable word, `<unk>` included.
    pub fn words(&self) -> Vec<String> {
        self.words.iter().cloned().collect()
    }

    pub fn bigram_count(&self, a: &str, b: &str) -> u64 {
        self.big.get(&vec![a.to_owned(), b.to_owned()]).copied().unwrap_or(0)
    }

    fn known(&self, w: &str) -> String {
        if w == S || self.words.contains(w) { w.to_owned() } else { U.to_owned() }
    }

    fn p1(&self, w: &str) -> f64 {
        let v = self.words.len() as f64;
        let total: u64 = self.left1.values().sum();
        if total == 0 {
            return 1.0 / v;
        }
        let gamma: f64 = self.left1.values().map(|&c| pick(&self.d[0], c)).sum();
        let c = self.left1.get(w).copied().unwrap_or(0);
        ((c as f64 - pick(&self.d[0], c)).max(0.0) + gamma / v) / total as f64
    }

    fn p2(&self, v: &str, w: &str) -> f64 {
        let mut total = 0;
        let mut gamma = 0.0;
        for (k, &c) in &self.left2 {
            if k[0] == v {
                total += c;
                gamma += pick(&self.d[1], c);
            }
        }
        if total == 0 {
            return self.p1(w);
        }
        let c = self.left2.get(&vec![v.to_owned(), w.to_owned()]).copied().unwrap_or(0);
        ((c as f64 - pick(&self.d[1], c)).max(0.0) + gamma * self.p1(w)) / total as f64
    }

    fn p3(&self, u: &str, v: &str, w: &str) -> f64 {
        let mut total = 0;
        let mut gamma = 0.0;
        for (k, &c) in &self.tri {
            if k[0] == u && k[1] == v {
                total += c;
                gamma += pick(&self.d[2], c);
            }
        }
        if total == 0 {
            return self.p2(v, w);
        }
        let c = self.tri.get(&vec![u.to_owned(), v.to_owned(), w.to_owned()]).copied().unwrap_or(0);
        ((c as f64 - pick(&self.d[2], c)).max(0.0) + gamma * self.p2(v, w)) / total as f64
    }

    /// `P(w | context)` using at most the last two context tokens.
    pub fn prob(&self, w: &str, context: &[&str]) -> f64 {
        let w = match self.known(w) {
            s if s == S => U.to_owned(),
            s => s,
        };
        let ctx: Vec<String> = context.iter().map(|c| self.known(c)).collect();
        match ctx.as_slice() {
            [] => self.p1(&w),
            [v] => self.p2(v, &w),
            [.., u, v] => self.p3(u, v, &w),
        }
    }

    pub fn sequence_prob(&self, tokens: &[&str]) -> f64 {
        (0..tokens.len())
            .map(|i| self.prob(tokens[i], &tokens[i.saturating_sub(2)..i]))
            .product()
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}
