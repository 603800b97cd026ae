//! Symbolic sequences: substitution fixed points, factor complexity, special
//! and return words, and bounds on the number of ergodic measures derived
//! from complexity data.
//!
//! Everything is computed on a finite prefix, so factor counts are lower
//! bounds for the complexity of the infinite sequence and asymptotic
//! hypotheses are estimated from the top half of the window.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::criteria::{is_primitive, to_zero_evidence};
use crate::error::{Error, Result};
use crate::matrix::IntMatrix;
use crate::rational::round12;
use crate::verdict::{Direction, Verdict};

pub const UE_WORD_CLAIM: &str = "the subshift is uniquely ergodic";

/// Letter -> nonempty word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubstitutionRule {
    map: BTreeMap<char, Vec<char>>,
}

impl SubstitutionRule {
    pub fn new(map: BTreeMap<char, Vec<char>>) -> Result<SubstitutionRule> {
        if map.is_empty() {
            return Err(Error::Param("substitution has no letters".into()));
        }
        for (a, img) in &map {
            if img.is_empty() {
                return Err(Error::Param(format!("image of {a} is empty")));
            }
            if let Some(b) = img.iter().find(|b| !map.contains_key(b)) {
                return Err(Error::Param(format!("letter {b} in the image of {a} has no image")));
            }
        }
        Ok(SubstitutionRule { map })
    }

    /// Parses "a:ab,b:a".
    pub fn parse(s: &str) -> Result<SubstitutionRule> {
        let mut map = BTreeMap::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (l, r) = part.split_once(':').ok_or_else(|| Error::Param(format!("expected letter:word, got {part:?}")))?;
            let mut l = l.trim().chars();
            let (Some(a), None) = (l.next(), l.next()) else {
                return Err(Error::Param(format!("left side of {part:?} must be one letter")));
            };
            if map.insert(a, r.trim().chars().collect()).is_some() {
                return Err(Error::Param(format!("letter {a} given twice")));
            }
        }
        SubstitutionRule::new(map)
    }

    pub fn alphabet(&self) -> Vec<char> {
        self.map.keys().copied().collect()
    }

    pub fn image(&self, a: char) -> Option<&[char]> {
        self.map.get(&a).map(Vec::as_slice)
    }

    pub fn apply(&self, w: &[char]) -> Vec<char> {
        w.iter().flat_map(|a| self.map[a].iter().copied()).collect()
    }

    /// M[a][b] = number of a's in τ(b).
    pub fn incidence(&self) -> IntMatrix {
        let letters = self.alphabet();
        let mut m = IntMatrix::zeros(letters.len(), letters.len());
        for (j, b) in letters.iter().enumerate() {
            for c in &self.map[b] {
                let i = letters.binary_search(c).unwrap();
                let v = m.get(i, j) + 1;
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn is_primitive(&self) -> bool {
        is_primitive(&self.incidence())
    }

    /// Letters a with τ(a) starting with a and |τⁿ(a)| unbounded.
    pub fn prolongable_letters(&self) -> Vec<char> {
        self.map
            .iter()
            .filter(|(a, img)| img[0] == **a && self.grows(**a))
            .map(|(a, _)| *a)
            .collect()
    }

    fn grows(&self, a: char) -> bool {
        let mut w = vec![a];
        for _ in 0..=self.map.len() {
            if w.len() > 1 {
                return true;
            }
            w = self.apply(&w);
        }
        w.len() > 1
    }
}

impl fmt::Display for SubstitutionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.map.iter().map(|(a, w)| format!("{a}:{}", w.iter().collect::<String>())).collect();
        write!(f, "{}", parts.join(","))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    /// Fixed point of the substitution starting with `seed`.
    Substitution { rule: SubstitutionRule, seed: char },
    /// The given block repeated forever.
    Periodic(String),
    /// A fixed finite word.
    Explicit(String),
}

impl Generator {
    /// Substitution generator on its first prolongable letter.
    pub fn substitution(rule: SubstitutionRule) -> Result<Generator> {
        let seed = *rule
            .prolongable_letters()
            .first()
            .ok_or_else(|| Error::NotProlongable(format!("no letter a of {rule} has τ(a) starting with a and growing")))?;
        Ok(Generator::Substitution { rule, seed })
    }

    pub fn describe(&self) -> String {
        match self {
            Generator::Substitution { rule, seed } => format!("substitution {rule} from {seed}"),
            Generator::Periodic(b) => format!("periodic {b}"),
            Generator::Explicit(_) => "explicit".into(),
        }
    }
}

/// Finite prefix of a sequence, stored as letter indices into a sorted alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct Word {
    pub alphabet: Vec<char>,
    pub symbols: Vec<u32>,
    pub generator: Generator,
}

impl Word {
    fn from_chars(chars: &[char], generator: Generator) -> Result<Word> {
        if chars.is_empty() {
            return Err(Error::Argument("empty word".into()));
        }
        let alphabet: Vec<char> = chars.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let symbols = chars.iter().map(|c| alphabet.binary_search(c).unwrap() as u32).collect();
        Ok(Word { alphabet, symbols, generator })
    }

    /// The word itself, read from text (whitespace ignored).
    pub fn explicit(text: &str) -> Result<Word> {
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        let s: String = chars.iter().collect();
        Word::from_chars(&chars, Generator::Explicit(s))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn text(&self) -> String {
        self.symbols.iter().map(|&s| self.alphabet[s as usize]).collect()
    }

    fn slice_text(&self, s: &[u32]) -> String {
        s.iter().map(|&x| self.alphabet[x as usize]).collect()
    }

    /// Whether the prefix is reproduced by its generator.
    pub fn verify(&self) -> Result<bool> {
        Ok(generate(&self.generator, self.len())?.text() == self.text())
    }
}

/// Prefix of length `length` of the sequence described by `g`.
pub fn generate(g: &Generator, length: usize) -> Result<Word> {
    if length == 0 {
        return Err(Error::Argument("length must be positive".into()));
    }
    let chars: Vec<char> = match g {
        Generator::Substitution { rule, seed } => {
            let img = rule.image(*seed).ok_or_else(|| Error::NotProlongable(format!("{seed} is not a letter of {rule}")))?;
            if img[0] != *seed || !rule.grows(*seed) {
                return Err(Error::NotProlongable(format!("τ({seed}) must start with {seed} and grow under iteration")));
            }
            let mut w = vec![*seed];
            while w.len() < length {
                w = rule.apply(&w);
            }
            w.truncate(length);
            w
        }
        Generator::Periodic(block) => {
            let b: Vec<char> = block.chars().collect();
            if b.is_empty() {
                return Err(Error::Argument("empty period".into()));
            }
            b.iter().cycle().take(length).copied().collect()
        }
        Generator::Explicit(s) => {
            let c: Vec<char> = s.chars().collect();
            if c.len() < length {
                return Err(Error::Window(format!("explicit word has {} letters, {length} requested", c.len())));
            }
            c[..length].to_vec()
        }
    };
    Word::from_chars(&chars, g.clone())
}

const NONE: u32 = u32::MAX;

/// Suffix automaton of a word with a dense transition table.
struct SuffixAutomaton {
    k: usize,
    next: Vec<u32>,
    link: Vec<u32>,
    len: Vec<u32>,
    /// An end position (index of the last letter) of the strings of each state.
    end: Vec<u32>,
}

impl SuffixAutomaton {
    fn build(s: &[u32], k: usize) -> Result<SuffixAutomaton> {
        let cap = 2 * s.len() + 1;
        if cap.saturating_mul(k) > 1 << 29 {
            return Err(Error::Argument("word too long for this alphabet size".into()));
        }
        let mut a = SuffixAutomaton {
            k,
            next: Vec::with_capacity(cap * k),
            link: Vec::with_capacity(cap),
            len: Vec::with_capacity(cap),
            end: Vec::with_capacity(cap),
        };
        a.push(0, NONE, 0);
        let mut last = 0u32;
        for (i, &c) in s.iter().enumerate() {
            let c = c as usize;
            let cur = a.push(a.len[last as usize] + 1, NONE, i as u32);
            let mut p = last;
            while p != NONE && a.go(p, c) == NONE {
                a.set(p, c, cur);
                p = a.link[p as usize];
            }
            if p == NONE {
                a.link[cur as usize] = 0;
            } else {
                let q = a.go(p, c);
                if a.len[p as usize] + 1 == a.len[q as usize] {
                    a.link[cur as usize] = q;
                } else {
                    let clone = a.push(a.len[p as usize] + 1, a.link[q as usize], a.end[q as usize]);
                    for x in 0..k {
                        let t = a.go(q, x);
                        a.set(clone, x, t);
                    }
                    while p != NONE && a.go(p, c) == q {
                        a.set(p, c, clone);
                        p = a.link[p as usize];
                    }
                    a.link[q as usize] = clone;
                    a.link[cur as usize] = clone;
                }
            }
            last = cur;
        }
        Ok(a)
    }

    fn push(&mut self, len: u32, link: u32, end: u32) -> u32 {
        self.next.extend(std::iter::repeat_n(NONE, self.k));
        self.link.push(link);
        self.len.push(len);
        self.end.push(end);
        (self.len.len() - 1) as u32
    }

    fn go(&self, v: u32, c: usize) -> u32 {
        self.next[v as usize * self.k + c]
    }

    fn set(&mut self, v: u32, c: usize, t: u32) {
        self.next[v as usize * self.k + c] = t;
    }

    fn states(&self) -> usize {
        self.len.len()
    }

    fn out_degree(&self, v: u32) -> usize {
        (0..self.k).filter(|&c| self.go(v, c) != NONE).count()
    }

    /// Number of distinct factors of each length 0..=n_max.
    fn counts(&self, n_max: usize) -> Vec<u64> {
        let mut diff = vec![0i64; n_max + 2];
        for v in 1..self.states() {
            let lo = self.len[self.link[v] as usize] as usize + 1;
            let hi = self.len[v] as usize;
            if lo <= n_max {
                diff[lo] += 1;
                diff[hi.min(n_max) + 1] -= 1;
            }
        }
        let mut out = vec![1u64];
        let mut acc = 0i64;
        for d in diff.iter().take(n_max + 1).skip(1) {
            acc += d;
            out.push(acc as u64);
        }
        out
    }

    fn children(&self) -> Vec<u32> {
        let mut c = vec![0u32; self.states()];
        for v in 1..self.states() {
            c[self.link[v] as usize] += 1;
        }
        c
    }

    fn find(&self, w: &[u32]) -> Option<u32> {
        let mut v = 0u32;
        for &c in w {
            v = self.go(v, c as usize);
            if v == NONE {
                return None;
            }
        }
        Some(v)
    }
}

/// Distinct letters preceding / following each factor, from the automaton.
struct FactorIndex<'a> {
    word: &'a Word,
    sam: SuffixAutomaton,
    children: Vec<u32>,
}

impl<'a> FactorIndex<'a> {
    fn new(word: &'a Word) -> Result<FactorIndex<'a>> {
        let sam = SuffixAutomaton::build(&word.symbols, word.alphabet.len())?;
        let children = sam.children();
        Ok(FactorIndex { word, sam, children })
    }

    fn right_special(&self, w: &[u32]) -> bool {
        self.sam.find(w).is_some_and(|v| self.sam.out_degree(v) >= 2)
    }

    fn left_special(&self, w: &[u32]) -> bool {
        self.left_extensions(w) >= 2
    }

    /// Number of distinct letters a with aw a factor.
    fn left_extensions(&self, w: &[u32]) -> usize {
        (0..self.word.alphabet.len() as u32)
            .filter(|&a| {
                let mut aw = Vec::with_capacity(w.len() + 1);
                aw.push(a);
                aw.extend_from_slice(w);
                self.sam.find(&aw).is_some()
            })
            .count()
    }

    fn factor(&self, v: u32, n: usize) -> &'a [u32] {
        let e = self.sam.end[v as usize] as usize;
        &self.word.symbols[e + 1 - n..=e]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComplexityProfile {
    /// p(n) for n = 0..=N (p(0) = 1).
    pub p: Vec<u64>,
    /// p(n + 1) - p(n) for n = 1..N.
    pub differences: Vec<i64>,
    /// log p(n) / n for n = 1..=N.
    pub entropy: Vec<f64>,
    /// Letters available; None for synthetic profiles.
    pub alphabet_size: Option<usize>,
    /// Prefix length the counts come from; None for synthetic profiles.
    pub window: Option<usize>,
    /// Least n >= 1 with p(n) <= n or p(n + 1) = p(n).
    pub periodic_at: Option<usize>,
    pub sturmian: bool,
    /// (K, n0): p(n + 1) - p(n) = K for n0 <= n < N, over at least the top half.
    pub constant_growth: Option<(i64, usize)>,
    /// Max |return word| / |u| over factors u of length <= 8 seen at least 3 times.
    pub linear_recurrence: Option<f64>,
    /// All bispecial factors in the top half of the window are regular.
    pub regular_bispecial: Option<bool>,
}

impl ComplexityProfile {
    /// Profile from given counts p(1..=N), without word-derived data.
    pub fn from_counts(counts: &[u64]) -> Result<ComplexityProfile> {
        if counts.is_empty() {
            return Err(Error::Argument("no counts".into()));
        }
        let mut p = vec![1u64];
        p.extend_from_slice(counts);
        let mut prof = ComplexityProfile {
            differences: vec![],
            entropy: vec![],
            p,
            alphabet_size: None,
            window: None,
            periodic_at: None,
            sturmian: false,
            constant_growth: None,
            linear_recurrence: None,
            regular_bispecial: None,
        };
        prof.derive();
        Ok(prof)
    }

    pub fn with_regular_bispecial(mut self, regular: bool) -> ComplexityProfile {
        self.regular_bispecial = Some(regular);
        self
    }

    fn derive(&mut self) {
        let n = self.n_max();
        self.differences = (1..n).map(|k| self.p[k + 1] as i64 - self.p[k] as i64).collect();
        self.entropy = (1..=n).map(|k| round12((self.p[k] as f64).ln() / k as f64)).collect();
        self.periodic_at = (1..=n).find(|&k| self.p[k] <= k as u64 || (k < n && self.p[k + 1] == self.p[k]));
        self.sturmian = (1..=n).all(|k| self.p[k] == k as u64 + 1);
        self.constant_growth = None;
        if let Some(&last) = self.differences.last() {
            let run = self.differences.iter().rev().take_while(|&&d| d == last).count();
            if run * 2 >= self.differences.len() && self.differences.len() >= 2 {
                self.constant_growth = Some((last, n - run));
            }
        }
    }

    pub fn n_max(&self) -> usize {
        self.p.len() - 1
    }

    /// p(m + n) <= p(m) p(n) for all m + n <= N.
    pub fn is_subadditive(&self) -> bool {
        let n = self.n_max();
        (1..=n).all(|m| (1..=n - m).all(|k| self.p[m + k] <= self.p[m].saturating_mul(self.p[k])))
    }

    pub fn is_monotone(&self) -> bool {
        self.p.windows(2).all(|w| w[0] <= w[1])
    }

    /// Estimates of (liminf, limsup) of p(n)/n from the top half of the window.
    pub fn slope_estimates(&self) -> (f64, f64) {
        let n = self.n_max();
        let lo = (n / 2).max(1);
        let ratios: Vec<f64> = (lo..=n).map(|k| self.p[k] as f64 / k as f64).collect();
        let slope = self.ls_slope(lo, n);
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let r = |x: f64| (x * 1e9).round() / 1e9;
        (r(slope.unwrap_or(min).min(min)), r(slope.unwrap_or(max).max(max)))
    }

    fn ls_slope(&self, lo: usize, hi: usize) -> Option<f64> {
        if hi <= lo {
            return None;
        }
        let pts: Vec<(f64, f64)> = (lo..=hi).map(|k| (k as f64, self.p[k] as f64)).collect();
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        Some(sxy / sxx)
    }
}

/// Exact factor counts of the prefix for n <= N, plus window flags.
pub fn complexity_profile(w: &Word, n_max: usize) -> Result<ComplexityProfile> {
    if n_max == 0 {
        return Err(Error::Window("maximal length must be positive".into()));
    }
    if n_max >= w.len() {
        return Err(Error::Window(format!("factor length {n_max} needs a prefix longer than {}", w.len())));
    }
    let idx = FactorIndex::new(w)?;
    let counts = idx.sam.counts(n_max);
    let mut prof = ComplexityProfile::from_counts(&counts[1..])?;
    prof.alphabet_size = Some(w.alphabet.len());
    prof.window = Some(w.len());
    prof.linear_recurrence = recurrence_estimate(w, n_max.min(8));
    let sf = special_from_index(&idx, n_max);
    let top: Vec<&SpecialLevel> = sf.levels.iter().filter(|l| 2 * l.n > n_max).collect();
    prof.regular_bispecial = Some(top.iter().all(|l| l.irregular.is_empty()));
    Ok(prof)
}

/// Factor counts by brute force (set of substrings); the test oracle.
pub fn brute_force_counts(w: &Word, n_max: usize) -> Vec<u64> {
    (1..=n_max)
        .map(|n| {
            if n > w.len() {
                0
            } else {
                w.symbols.windows(n).collect::<BTreeSet<_>>().len() as u64
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpecialLevel {
    pub n: usize,
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub bispecial: Vec<String>,
    /// Bispecial factors failing the regularity condition.
    pub irregular: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpecialFactors {
    pub window: usize,
    pub levels: Vec<SpecialLevel>,
    /// Every bispecial factor of length >= N/2 is regular.
    pub regular_bispecial: bool,
}

/// Left, right and bispecial factors of each length 1..=N, with regularity.
pub fn special_factors(w: &Word, n_max: usize) -> Result<SpecialFactors> {
    if n_max == 0 || n_max >= w.len() {
        return Err(Error::Window(format!("factor length {n_max} needs a prefix longer than {}", w.len())));
    }
    let idx = FactorIndex::new(w)?;
    Ok(special_from_index(&idx, n_max))
}

fn special_from_index(idx: &FactorIndex, n_max: usize) -> SpecialFactors {
    let sam = &idx.sam;
    let mut levels: Vec<SpecialLevel> = (1..=n_max)
        .map(|n| SpecialLevel { n, left: vec![], right: vec![], bispecial: vec![], irregular: vec![] })
        .collect();
    for v in 1..sam.states() as u32 {
        let hi = sam.len[v as usize] as usize;
        let lo = sam.len[sam.link[v as usize] as usize] as usize + 1;
        let rs = sam.out_degree(v) >= 2;
        // only the longest string of a state can have two left extensions
        let ls_top = idx.children[v as usize] >= 2;
        for n in lo..=hi.min(n_max) {
            let ls = n == hi && ls_top && idx.left_special(idx.factor(v, n));
            if !(ls || rs) {
                continue;
            }
            let f = idx.factor(v, n);
            let s = idx.word.slice_text(f);
            let l = &mut levels[n - 1];
            if ls {
                l.left.push(s.clone());
            }
            if rs {
                l.right.push(s.clone());
            }
            if ls && rs {
                l.bispecial.push(s.clone());
                if !is_regular(idx, f) {
                    l.irregular.push(s);
                }
            }
        }
    }
    for l in &mut levels {
        l.left.sort();
        l.right.sort();
        l.bispecial.sort();
        l.irregular.sort();
    }
    let regular = levels.iter().filter(|l| 2 * l.n >= n_max).all(|l| l.irregular.is_empty());
    SpecialFactors { window: idx.word.len(), levels, regular_bispecial: regular }
}

/// Exactly one left extension aw is right special and exactly one right extension wb is left special.
fn is_regular(idx: &FactorIndex, w: &[u32]) -> bool {
    let k = idx.word.alphabet.len() as u32;
    let mut left_rs = 0;
    let mut right_ls = 0;
    for a in 0..k {
        let mut aw = vec![a];
        aw.extend_from_slice(w);
        if idx.sam.find(&aw).is_some() && idx.right_special(&aw) {
            left_rs += 1;
        }
        let mut wb = w.to_vec();
        wb.push(a);
        if idx.sam.find(&wb).is_some() && idx.left_special(&wb) {
            right_ls += 1;
        }
    }
    left_rs == 1 && right_ls == 1
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReturnWords {
    pub factor: String,
    pub occurrences: usize,
    pub words: Vec<String>,
    /// max |return word| / |u|.
    pub ratio: f64,
}

/// Return words to `u` observed between consecutive occurrences in the prefix.
pub fn return_words(w: &Word, u: &str) -> Result<ReturnWords> {
    let uc: Vec<char> = u.chars().collect();
    if uc.is_empty() {
        return Err(Error::Argument("empty factor".into()));
    }
    let Some(us) = uc.iter().map(|c| w.alphabet.binary_search(c).ok().map(|i| i as u32)).collect::<Option<Vec<u32>>>() else {
        return Err(Error::Rarity(format!("{u} uses letters outside the alphabet")));
    };
    let pos: Vec<usize> = w.symbols.windows(us.len()).enumerate().filter(|(_, x)| *x == us.as_slice()).map(|(i, _)| i).collect();
    if pos.len() < 3 {
        return Err(Error::Rarity(format!("{u} occurs {} times in the prefix, at least 3 needed", pos.len())));
    }
    let words: BTreeSet<String> = pos.windows(2).map(|p| w.slice_text(&w.symbols[p[0]..p[1]])).collect();
    let longest = words.iter().map(|s| s.chars().count()).max().unwrap_or(0);
    Ok(ReturnWords {
        factor: u.into(),
        occurrences: pos.len(),
        words: words.into_iter().collect(),
        ratio: round12(longest as f64 / us.len() as f64),
    })
}

/// K̂ = max over factors u with |u| <= n_max seen at least 3 times of max gap / |u|.
pub fn recurrence_estimate(w: &Word, n_max: usize) -> Option<f64> {
    let mut best: Option<f64> = None;
    for n in 1..=n_max.min(w.len()) {
        let mut seen: HashMap<&[u32], (usize, usize, usize)> = HashMap::new();
        for (i, f) in w.symbols.windows(n).enumerate() {
            let e = seen.entry(f).or_insert((i, 0, 0));
            if e.2 > 0 {
                e.1 = e.1.max(i - e.0);
            }
            e.0 = i;
            e.2 += 1;
        }
        for (_, (_, gap, count)) in seen {
            if count >= 3 {
                let r = gap as f64 / n as f64;
                best = Some(best.map_or(r, |b: f64| b.max(r)));
            }
        }
    }
    best.map(round12)
}

/// ε(n): smallest empirical frequency of a factor of length n, n = 1..=N.
pub fn min_frequencies(w: &Word, n_max: usize) -> Result<Vec<f64>> {
    if n_max == 0 || n_max >= w.len() {
        return Err(Error::Window(format!("factor length {n_max} needs a prefix longer than {}", w.len())));
    }
    Ok((1..=n_max)
        .map(|n| {
            let mut c: HashMap<&[u32], usize> = HashMap::new();
            for f in w.symbols.windows(n) {
                *c.entry(f).or_default() += 1;
            }
            let total = (w.len() + 1 - n) as f64;
            c.values().copied().min().unwrap_or(0) as f64 / total
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundScope {
    /// Bounds the number of ergodic invariant measures.
    Ergodic,
    /// Bounds the number of distinct non-atomic generic measures.
    Generic,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundEntry {
    pub rule: String,
    pub hypothesis: String,
    /// Whether the hypothesis holds, as far as the window shows.
    pub verdict: Verdict,
    pub bound: Option<u64>,
    pub scope: BoundScope,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsReport {
    pub liminf_estimate: f64,
    pub limsup_estimate: f64,
    pub entries: Vec<BoundEntry>,
    pub ue: Verdict,
    /// Smallest ergodic-count bound among entries whose hypothesis the window supports.
    pub ergodic_bound: Option<u64>,
    pub n_eps_trace: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundsOptions {
    /// ε(n) for n = 1..=N, enabling the n ε(n) test.
    pub min_frequencies: Option<Vec<f64>>,
    /// Number of intervals of an interval exchange realizing the subshift.
    pub iet_intervals: Option<u64>,
}

fn hyp(claim: &str, holds: bool, method: &str) -> Verdict {
    if holds {
        Verdict::evidence(claim, Direction::For, method, vec![])
    } else {
        Verdict::inconclusive(claim, "hypothesis not supported by the window").note("method", method)
    }
}

/// Every applicable complexity bound on the number of ergodic measures.
pub fn measure_bounds(prof: &ComplexityProfile, o: &BoundsOptions) -> BoundsReport {
    let (lo, hi) = prof.slope_estimates();
    let floor = |x: f64| x.floor().max(0.0) as u64;
    let est = "least squares and extreme ratios over the top half of the window";
    let mut entries = vec![];

    let ue_hyp = hi < 3.0 || lo < 2.0;
    entries.push(BoundEntry {
        rule: "linear_complexity_ue".into(),
        hypothesis: format!("limsup p(n)/n < 3 or liminf p(n)/n < 2 (estimates {lo}, {hi})"),
        verdict: hyp("limsup p(n)/n < 3 or liminf p(n)/n < 2", ue_hyp, est),
        bound: ue_hyp.then_some(1),
        scope: BoundScope::Ergodic,
    });
    entries.push(BoundEntry {
        rule: "liminf_integer_part".into(),
        hypothesis: format!("liminf p(n)/n = α gives at most [α] (estimate α = {lo})"),
        verdict: hyp("liminf p(n)/n is finite", lo >= 1.0, est),
        bound: (lo >= 1.0).then(|| floor(lo)),
        scope: BoundScope::Ergodic,
    });
    entries.push(BoundEntry {
        rule: "limsup_integer_part".into(),
        hypothesis: format!("limsup p(n)/n = α >= 2 gives at most [α] - 1 (estimate α = {hi})"),
        verdict: hyp("limsup p(n)/n >= 2", hi >= 2.0, est),
        bound: (hi >= 2.0).then(|| floor(hi) - 1),
        scope: BoundScope::Ergodic,
    });
    let k = (floor(hi) + 1).max(3);
    entries.push(BoundEntry {
        rule: "limsup_below_k".into(),
        hypothesis: format!("limsup p(n)/n < K with K = {k} gives at most K - 2"),
        verdict: hyp(&format!("limsup p(n)/n < {k}"), hi < k as f64, est),
        bound: Some(k - 2),
        scope: BoundScope::Ergodic,
    });
    match prof.constant_growth {
        Some((g, n0)) if g >= 4 => entries.push(BoundEntry {
            rule: "constant_growth".into(),
            hypothesis: format!("p(n + 1) - p(n) = K = {g} for n >= {n0}, K >= 4, gives at most K - 2"),
            verdict: hyp("eventually constant growth with K >= 4", true, "constant first differences over the top half"),
            bound: Some(g as u64 - 2),
            scope: BoundScope::Ergodic,
        }),
        _ => entries.push(BoundEntry {
            rule: "constant_growth".into(),
            hypothesis: "eventually constant growth with K >= 4 gives at most K - 2".into(),
            verdict: hyp("eventually constant growth with K >= 4", false, "constant first differences over the top half"),
            bound: None,
            scope: BoundScope::Ergodic,
        }),
    }
    let rb = prof.regular_bispecial == Some(true);
    let growth = prof.constant_growth.map(|(g, _)| g).filter(|g| *g >= 1);
    entries.push(BoundEntry {
        rule: "regular_bispecial".into(),
        hypothesis: match growth {
            Some(g) => format!("regular bispecial condition with growth K = {g} gives at most (K + 1)/2"),
            None => "regular bispecial condition with growth K gives at most (K + 1)/2".into(),
        },
        verdict: hyp(
            "large bispecial factors are regular",
            rb && growth.is_some(),
            "bispecial factors in the top half of the window",
        ),
        bound: growth.filter(|_| rb).map(|g| (g as u64 + 1) / 2),
        scope: BoundScope::Ergodic,
    });
    let gk = floor(lo) + 1;
    entries.push(BoundEntry {
        rule: "generic_measures".into(),
        hypothesis: format!("liminf p(n)/n < K with K = {gk} gives at most K - 1 non-atomic generic measures"),
        verdict: hyp(&format!("liminf p(n)/n < {gk}"), lo < gk as f64, est),
        bound: Some(gk - 1),
        scope: BoundScope::Generic,
    });
    if let Some(d) = o.iet_intervals {
        entries.push(BoundEntry {
            rule: "interval_exchange".into(),
            hypothesis: format!("minimal exchange of {d} intervals gives at most [d/2]"),
            verdict: Verdict::evidence("the subshift codes a minimal interval exchange", Direction::For, "stated by the caller", vec![]),
            bound: Some(d / 2),
            scope: BoundScope::Ergodic,
        });
    }

    let ergodic_bound = entries
        .iter()
        .filter(|e| e.scope == BoundScope::Ergodic && e.verdict.leans_true())
        .filter_map(|e| e.bound)
        .min();
    let n_eps_trace = o
        .min_frequencies
        .as_ref()
        .map(|eps| eps.iter().enumerate().map(|(i, e)| round12((i + 1) as f64 * e)).collect::<Vec<f64>>());
    let ue = match (&n_eps_trace, ue_hyp) {
        (Some(t), _) if to_zero_evidence(UE_WORD_CLAIM, t.clone(), "n ε(n)").direction == Some(Direction::For) => {
            Verdict::evidence(UE_WORD_CLAIM, Direction::Against, "n ε(n) tends to 0", t.clone())
        }
        (_, true) => Verdict::evidence(UE_WORD_CLAIM, Direction::For, "linear complexity below the unique ergodicity thresholds", vec![lo, hi]),
        _ => Verdict::inconclusive(UE_WORD_CLAIM, "complexity too large for the linear tests").with_trace(vec![lo, hi]),
    };
    BoundsReport { liminf_estimate: lo, limsup_estimate: hi, entries, ue: ue.with_depth(prof.n_max()), ergodic_bound, n_eps_trace }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fib(len: usize) -> Word {
        generate(&Generator::substitution(SubstitutionRule::parse("a:ab,b:a").unwrap()).unwrap(), len).unwrap()
    }

    #[test]
    fn generates_fixed_points() {
        assert_eq!(fib(13).text(), "abaababaabaab");
        let tm = Generator::substitution(SubstitutionRule::parse("a:ab,b:ba").unwrap()).unwrap();
        assert_eq!(generate(&tm, 8).unwrap().text(), "abbabaab");
        assert_eq!(generate(&Generator::Periodic("ab".into()), 7).unwrap().text(), "abababa");
        assert!(fib(40).verify().unwrap());
    }

    #[test]
    fn not_prolongable() {
        let r = SubstitutionRule::parse("a:ba,b:ab").unwrap();
        assert!(matches!(Generator::substitution(r), Err(Error::NotProlongable(_))));
        let r = SubstitutionRule::parse("a:a,b:ab").unwrap();
        assert!(r.prolongable_letters().is_empty());
        assert!(SubstitutionRule::parse("a:ab").is_err());
    }

    #[test]
    fn primitivity() {
        assert!(SubstitutionRule::parse("a:ab,b:a").unwrap().is_primitive());
        assert!(!SubstitutionRule::parse("a:aab,b:b").unwrap().is_primitive());
    }

    #[test]
    fn automaton_matches_brute_force() {
        for w in [fib(300), generate(&Generator::Periodic("abc".into()), 50).unwrap(), Word::explicit("abracadabra").unwrap()] {
            let n = 10.min(w.len() - 1);
            let p = complexity_profile(&w, n).unwrap();
            assert_eq!(p.p[1..].to_vec(), brute_force_counts(&w, n));
        }
    }

    #[test]
    fn fibonacci_profile() {
        let p = complexity_profile(&fib(2000), 50).unwrap();
        assert!(p.sturmian);
        assert_eq!(p.periodic_at, None);
        assert_eq!(p.constant_growth.map(|c| c.0), Some(1));
        assert!(p.is_subadditive());
        assert_eq!(p.regular_bispecial, Some(true));
    }

    #[test]
    fn periodic_profile() {
        let w = generate(&Generator::Periodic("ab".into()), 100).unwrap();
        let p = complexity_profile(&w, 10).unwrap();
        assert_eq!(p.p[2], 2);
        assert_eq!(p.periodic_at, Some(1));
        assert!(matches!(complexity_profile(&w, 100), Err(Error::Window(_))));
    }

    #[test]
    fn fibonacci_special_factors() {
        let s = special_factors(&fib(3000), 20).unwrap();
        for l in &s.levels {
            assert_eq!(l.left.len(), 1, "length {}", l.n);
            assert_eq!(l.right.len(), 1, "length {}", l.n);
        }
        let w = generate(&Generator::Periodic("ab".into()), 200).unwrap();
        let s = special_factors(&w, 10).unwrap();
        assert!(s.levels.iter().all(|l| l.left.is_empty() && l.right.is_empty()));
    }

    #[test]
    fn return_words_to_a() {
        let r = return_words(&fib(500), "a").unwrap();
        assert_eq!(r.words, vec!["a".to_string(), "ab".to_string()]);
        let p = generate(&Generator::Periodic("ab".into()), 50).unwrap();
        assert_eq!(return_words(&p, "ab").unwrap().words, vec!["ab".to_string()]);
        assert!(matches!(return_words(&fib(10), "bab"), Err(Error::Rarity(_))));
        assert!(recurrence_estimate(&fib(5000), 8).unwrap() <= 3.0);
    }

    #[test]
    fn fibonacci_bounds() {
        let p = complexity_profile(&fib(2000), 50).unwrap();
        let b = measure_bounds(&p, &BoundsOptions::default());
        assert!(b.ue.leans_true());
        assert_eq!(b.ergodic_bound, Some(1));
        assert_eq!(b.liminf_estimate, 1.0);
    }

    #[test]
    fn synthetic_bounds() {
        let four: Vec<u64> = (1..=60).map(|n| 4 * n + 3).collect();
        let b = measure_bounds(&ComplexityProfile::from_counts(&four).unwrap(), &BoundsOptions::default());
        let e = b.entries.iter().find(|e| e.rule == "constant_growth").unwrap();
        assert_eq!(e.bound, Some(2));
        let three: Vec<u64> = (1..=60).map(|n| 3 * n + 1).collect();
        let prof = ComplexityProfile::from_counts(&three).unwrap().with_regular_bispecial(true);
        let b = measure_bounds(&prof, &BoundsOptions::default());
        let e = b.entries.iter().find(|e| e.rule == "regular_bispecial").unwrap();
        assert_eq!(e.bound, Some(2));
        assert!(e.verdict.leans_true());
    }

    #[test]
    fn iet_bound() {
        let p = ComplexityProfile::from_counts(&(1..=40).map(|n| 5 * n).collect::<Vec<_>>()).unwrap();
        let b = measure_bounds(&p, &BoundsOptions { iet_intervals: Some(5), ..Default::default() });
        assert_eq!(b.entries.last().unwrap().bound, Some(2));
        assert_eq!(b.ergodic_bound, Some(2));
    }
}
