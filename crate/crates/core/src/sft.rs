//! One-sided subshifts of finite type over the alphabet `{1, …, k}`.
//!
//! Points are eventually periodic (a finite prefix followed by a repeating
//! cycle). Every quantity the toolkit computes depends on finitely many
//! coordinates or on a periodic orbit, so this representation is exact.

use std::fmt;

use crate::error::{Error, Result};

/// Alphabet size plus 0/1 transition matrix, validated to have no dead
/// symbols. The mixing exponent is computed once, exactly, using Wielandt's
/// bound `(k-1)^2 + 1` on the exponent of a primitive matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionSystem {
    k: usize,
    t: Vec<Vec<bool>>,
    successors: Vec<Vec<usize>>,
    mixing_exponent: Option<usize>,
}

impl TransitionSystem {
    /// Builds a system from a square 0/1 matrix (row `i` lists the symbols
    /// allowed after symbol `i + 1`).
    pub fn new(matrix: Vec<Vec<u8>>) -> Result<Self> {
        let k = matrix.len();
        if k == 0 {
            return Err(Error::InvalidSystem("alphabet must be nonempty".into()));
        }
        let mut t = vec![vec![false; k]; k];
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidSystem(format!(
                    "row {} has {} entries, expected {k}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, &x) in row.iter().enumerate() {
                t[i][j] = match x {
                    0 => false,
                    1 => true,
                    other => {
                        return Err(Error::InvalidSystem(format!(
                            "entry ({}, {}) is {other}, expected 0 or 1",
                            i + 1,
                            j + 1
                        )))
                    }
                };
            }
        }
        for i in 0..k {
            if !t[i].iter().any(|&b| b) {
                return Err(Error::InvalidSystem(format!("symbol {} has no successor (dead row)", i + 1)));
            }
            if !(0..k).any(|r| t[r][i]) {
                return Err(Error::InvalidSystem(format!(
                    "symbol {} has no predecessor (dead column)",
                    i + 1
                )));
            }
        }
        let successors = t
            .iter()
            .map(|row| (0..k).filter(|&j| row[j]).map(|j| j + 1).collect())
            .collect();
        let mut ts = TransitionSystem { k, t, successors, mixing_exponent: None };
        ts.mixing_exponent = ts.boolean_mixing_search((k - 1) * (k - 1) + 1);
        Ok(ts)
    }

    pub fn full_shift(k: usize) -> Self {
        Self::new(vec![vec![1; k]; k]).expect("full shift is valid")
    }

    /// `[[1, 1], [1, 0]]`: the pair `22` is forbidden.
    pub fn golden_mean() -> Self {
        Self::new(vec![vec![1, 1], vec![1, 0]]).expect("golden mean shift is valid")
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Whether `j` may follow `i` (both 1-based).
    pub fn allowed(&self, i: usize, j: usize) -> bool {
        self.t[i - 1][j - 1]
    }

    pub fn matrix(&self) -> Vec<Vec<u8>> {
        self.t.iter().map(|r| r.iter().map(|&b| b as u8).collect()).collect()
    }

    /// Sorted successors of a 1-based symbol.
    pub fn successors(&self, i: usize) -> &[usize] {
        &self.successors[i - 1]
    }

    /// Smallest `l` with `t^l` entrywise positive, if one exists.
    pub fn mixing_exponent(&self) -> Option<usize> {
        self.mixing_exponent
    }

    pub fn is_mixing(&self) -> bool {
        self.mixing_exponent.is_some()
    }

    /// Smallest `l ≤ l_max` with `t^l` entrywise positive, using boolean
    /// (reachability) products.
    pub fn find_mixing_exponent(&self, l_max: usize) -> Option<usize> {
        match self.mixing_exponent {
            Some(l) if l <= l_max => Some(l),
            Some(_) => None,
            None => None,
        }
    }

    fn boolean_mixing_search(&self, l_max: usize) -> Option<usize> {
        let k = self.k;
        let mut power = self.t.clone();
        for l in 1..=l_max {
            if power.iter().all(|row| row.iter().all(|&b| b)) {
                return Some(l);
            }
            let mut next = vec![vec![false; k]; k];
            for i in 0..k {
                for m in 0..k {
                    if power[i][m] {
                        for j in 0..k {
                            next[i][j] |= self.t[m][j];
                        }
                    }
                }
            }
            power = next;
        }
        None
    }

    pub fn is_admissible(&self, symbols: &[usize]) -> bool {
        symbols.iter().all(|&s| (1..=self.k).contains(&s)) && symbols.windows(2).all(|w| self.allowed(w[0], w[1]))
    }

    /// Validates and wraps a word.
    pub fn word(&self, symbols: Vec<usize>) -> Result<Word> {
        if self.is_admissible(&symbols) {
            Ok(Word(symbols))
        } else {
            Err(Error::Inadmissible(symbols))
        }
    }

    /// Lexicographic cursor over admissible words of length `n`.
    pub fn cursor(&self, n: usize) -> WordCursor<'_> {
        WordCursor::new(self, n, None)
    }

    /// Cursor restricted to words starting with `first`; the `k` restricted
    /// cursors partition the unrestricted one into contiguous lexicographic ranges.
    pub fn cursor_from(&self, n: usize, first: usize) -> WordCursor<'_> {
        WordCursor::new(self, n, Some(first))
    }

    /// Every admissible word of length `n` exactly once, lexicographically.
    pub fn cylinders(&self, n: usize) -> Cylinders<'_> {
        Cylinders { cursor: self.cursor(n) }
    }

    /// Every point of `Fix(σⁿ)` exactly once, as a pure cycle of length `n`
    /// (non-primitive cycles included), lexicographically by cycle.
    pub fn periodic_points(&self, n: usize) -> impl Iterator<Item = SymbolicPoint> + '_ {
        self.cylinders(n)
            .filter(move |w| n > 0 && self.allowed(w.0[n - 1], w.0[0]))
            .map(|w| SymbolicPoint { prefix: Vec::new(), cycle: w.0 })
    }

    /// Σ_{ij} (t^{n-1})_{ij}, the number of admissible `n`-words, or `None`
    /// on `u128` overflow.
    pub fn count_cylinders(&self, n: usize) -> Option<u128> {
        if n == 0 {
            return Some(1);
        }
        let p = self.integer_power(n - 1)?;
        p.iter().flatten().try_fold(0u128, |acc, &x| acc.checked_add(x))
    }

    /// trace(tⁿ) = |Fix(σⁿ)|, or `None` on overflow.
    pub fn count_periodic(&self, n: usize) -> Option<u128> {
        let p = self.integer_power(n)?;
        (0..self.k).try_fold(0u128, |acc, i| acc.checked_add(p[i][i]))
    }

    fn integer_power(&self, n: usize) -> Option<Vec<Vec<u128>>> {
        let k = self.k;
        let mut acc: Vec<Vec<u128>> = (0..k).map(|i| (0..k).map(|j| (i == j) as u128).collect()).collect();
        for _ in 0..n {
            let mut next = vec![vec![0u128; k]; k];
            for i in 0..k {
                for m in 0..k {
                    if acc[i][m] == 0 {
                        continue;
                    }
                    for j in 0..k {
                        if self.t[m][j] {
                            next[i][j] = next[i][j].checked_add(acc[i][m])?;
                        }
                    }
                }
            }
            acc = next;
        }
        Some(acc)
    }

    /// Shortest cycle `s → … → s` returned as its symbol list starting at `s`.
    pub fn shortest_cycle_from(&self, s: usize) -> Option<Vec<usize>> {
        let k = self.k;
        let mut parent = vec![0usize; k + 1];
        let mut seen = vec![false; k + 1];
        let mut queue = std::collections::VecDeque::new();
        for &nx in self.successors(s) {
            if nx == s {
                return Some(vec![s]);
            }
            if !seen[nx] {
                seen[nx] = true;
                parent[nx] = s;
                queue.push_back(nx);
            }
        }
        while let Some(u) = queue.pop_front() {
            for &nx in self.successors(u) {
                if nx == s {
                    let mut path = vec![u];
                    let mut cur = u;
                    while parent[cur] != s {
                        cur = parent[cur];
                        path.push(cur);
                    }
                    path.push(s);
                    path.reverse();
                    return Some(path);
                }
                if !seen[nx] {
                    seen[nx] = true;
                    parent[nx] = u;
                    queue.push_back(nx);
                }
            }
        }
        None
    }

    /// An eventually periodic point whose leading symbols are `word`: the
    /// word's last symbol is continued along its shortest cycle.
    pub fn point_with_prefix(&self, word: &[usize]) -> Result<SymbolicPoint> {
        if word.is_empty() {
            let cycle = self
                .shortest_cycle_from(1)
                .ok_or_else(|| Error::InvalidSystem("symbol 1 lies on no cycle".into()))?;
            return self.point(Vec::new(), cycle);
        }
        if !self.is_admissible(word) {
            return Err(Error::Inadmissible(word.to_vec()));
        }
        let last = *word.last().unwrap();
        let cycle = self
            .shortest_cycle_from(last)
            .ok_or_else(|| Error::InvalidSystem(format!("symbol {last} lies on no cycle")))?;
        self.point(word[..word.len() - 1].to_vec(), cycle)
    }

    /// Validated eventually periodic point `prefix · cycle · cycle · …`.
    pub fn point(&self, prefix: Vec<usize>, cycle: Vec<usize>) -> Result<SymbolicPoint> {
        if cycle.is_empty() {
            return Err(Error::InvalidArgument("cycle must be nonempty".into()));
        }
        let mut chain = prefix.clone();
        chain.extend_from_slice(&cycle);
        chain.push(cycle[0]);
        if !self.is_admissible(&chain) {
            return Err(Error::Inadmissible(chain));
        }
        Ok(SymbolicPoint { prefix, cycle })
    }

    /// `d(ω, κ) = Σ |ω_i − κ_i| / 2^i`, truncated once the tail bound
    /// `(k−1)·2^{−i}` drops below `tol`. Equal points give exactly 0.
    pub fn distance(&self, a: &SymbolicPoint, b: &SymbolicPoint, tol: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let tail_scale = (self.k.max(2) - 1) as f64;
        let mut sum = 0.0;
        let mut weight = 1.0;
        let mut i = 1;
        loop {
            weight *= 0.5;
            sum += (a.symbol_at(i) as f64 - b.symbol_at(i) as f64).abs() * weight;
            if tail_scale * weight < tol || weight == 0.0 {
                break;
            }
            i += 1;
        }
        sum
    }
}

/// Admissible finite word (1-based symbols).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_symbols(&self.0))
    }
}

/// `121` when every symbol is a single digit, `1-12-3` otherwise.
pub fn format_symbols(symbols: &[usize]) -> String {
    if symbols.iter().all(|&s| s < 10) {
        symbols.iter().map(|s| s.to_string()).collect()
    } else {
        symbols.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("-")
    }
}

/// Allocation-free lexicographic walk over admissible words of a fixed length.
///
/// Because no symbol is dead, every admissible prefix extends, so advancing
/// never needs to backtrack through dead ends.
pub struct WordCursor<'a> {
    ts: &'a TransitionSystem,
    word: Vec<usize>,
    first: Option<usize>,
    started: bool,
    done: bool,
}

impl<'a> WordCursor<'a> {
    fn new(ts: &'a TransitionSystem, n: usize, first: Option<usize>) -> Self {
        WordCursor { ts, word: vec![0; n], first, started: false, done: false }
    }

    fn fill_from(&mut self, i: usize) {
        for j in i..self.word.len() {
            self.word[j] = self.ts.successors(self.word[j - 1])[0];
        }
    }

    /// Moves to the next word; `false` once exhausted.
    pub fn advance(&mut self) -> bool {
        if self.done {
            return false;
        }
        let n = self.word.len();
        if !self.started {
            self.started = true;
            if n == 0 {
                // the single empty word
                return true;
            }
            self.word[0] = self.first.unwrap_or(1);
            self.fill_from(1);
            return true;
        }
        for i in (0..n).rev() {
            let cur = self.word[i];
            let next = if i == 0 {
                if self.first.is_some() || cur >= self.ts.k {
                    None
                } else {
                    Some(cur + 1)
                }
            } else {
                self.ts.successors(self.word[i - 1]).iter().copied().find(|&s| s > cur)
            };
            if let Some(s) = next {
                self.word[i] = s;
                self.fill_from(i + 1);
                return true;
            }
        }
        self.done = true;
        false
    }

    pub fn current(&self) -> &[usize] {
        &self.word
    }
}

/// Iterator wrapper around [`WordCursor`] yielding owned words.
pub struct Cylinders<'a> {
    cursor: WordCursor<'a>,
}

impl Iterator for Cylinders<'_> {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        if self.cursor.advance() {
            Some(Word(self.cursor.current().to_vec()))
        } else {
            None
        }
    }
}

/// Calls `f` on every admissible `n`-word in lexicographic order.
pub fn for_each_word(ts: &TransitionSystem, n: usize, mut f: impl FnMut(&[usize])) {
    let mut c = ts.cursor(n);
    while c.advance() {
        f(c.current());
    }
}

/// Eventually periodic point `prefix · cycle^∞`.
#[derive(Debug, Clone, Eq)]
pub struct SymbolicPoint {
    prefix: Vec<usize>,
    cycle: Vec<usize>,
}

impl SymbolicPoint {
    pub fn prefix(&self) -> &[usize] {
        &self.prefix
    }

    pub fn cycle(&self) -> &[usize] {
        &self.cycle
    }

    /// The `i`-th coordinate, 1-based.
    pub fn symbol_at(&self, i: usize) -> usize {
        assert!(i >= 1, "coordinates are 1-based");
        let j = i - 1;
        if j < self.prefix.len() {
            self.prefix[j]
        } else {
            self.cycle[(j - self.prefix.len()) % self.cycle.len()]
        }
    }

    /// Coordinates `1..=n`.
    pub fn leading(&self, n: usize) -> Vec<usize> {
        (1..=n).map(|i| self.symbol_at(i)).collect()
    }

    /// `σω`.
    pub fn shift(&self) -> SymbolicPoint {
        if self.prefix.is_empty() {
            let mut cycle = self.cycle.clone();
            cycle.rotate_left(1);
            SymbolicPoint { prefix: Vec::new(), cycle }
        } else {
            SymbolicPoint { prefix: self.prefix[1..].to_vec(), cycle: self.cycle.clone() }
        }
    }

    /// `σⁿω`.
    pub fn shift_by(&self, n: usize) -> SymbolicPoint {
        if n <= self.prefix.len() {
            return SymbolicPoint { prefix: self.prefix[n..].to_vec(), cycle: self.cycle.clone() };
        }
        let r = (n - self.prefix.len()) % self.cycle.len();
        let mut cycle = self.cycle.clone();
        cycle.rotate_left(r);
        SymbolicPoint { prefix: Vec::new(), cycle }
    }

    /// Unique representation: primitive cycle, prefix as short as possible.
    pub fn canonical(&self) -> SymbolicPoint {
        let len = self.cycle.len();
        let period = (1..=len)
            .find(|&p| len.is_multiple_of(p) && (0..len).all(|i| self.cycle[i] == self.cycle[i % p]))
            .unwrap_or(len);
        let mut cycle = self.cycle[..period].to_vec();
        let mut prefix = self.prefix.clone();
        while let Some(&last) = prefix.last() {
            if last != *cycle.last().unwrap() {
                break;
            }
            prefix.pop();
            cycle.rotate_right(1);
        }
        SymbolicPoint { prefix, cycle }
    }
}

impl PartialEq for SymbolicPoint {
    fn eq(&self, other: &Self) -> bool {
        let a = self.canonical();
        let b = other.canonical();
        a.prefix == b.prefix && a.cycle == b.cycle
    }
}

impl fmt::Display for SymbolicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})^inf", format_symbols(&self.prefix), format_symbols(&self.cycle))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_words(ts: &TransitionSystem, n: usize) -> Vec<Vec<usize>> {
        let k = ts.k();
        let mut out = Vec::new();
        let total = k.pow(n as u32);
        for mut code in 0..total {
            let mut w = vec![0; n];
            for j in (0..n).rev() {
                w[j] = code % k + 1;
                code /= k;
            }
            if ts.is_admissible(&w) {
                out.push(w);
            }
        }
        out
    }

    #[test]
    fn mixing_exponents() {
        assert_eq!(TransitionSystem::full_shift(2).find_mixing_exponent(10), Some(1));
        assert_eq!(TransitionSystem::golden_mean().find_mixing_exponent(10), Some(2));
        assert_eq!(TransitionSystem::golden_mean().find_mixing_exponent(1), None);
        let flip = TransitionSystem::new(vec![vec![0, 1], vec![1, 0]]).unwrap();
        for l in 1..50 {
            assert_eq!(flip.find_mixing_exponent(l), None);
        }
    }

    #[test]
    fn rejects_dead_symbols() {
        assert!(TransitionSystem::new(vec![vec![1, 0], vec![0, 0]]).is_err());
        assert!(TransitionSystem::new(vec![vec![1, 0], vec![1, 0]]).is_err());
        assert!(TransitionSystem::new(vec![vec![1, 2], vec![1, 0]]).is_err());
        assert!(TransitionSystem::new(vec![vec![1], vec![1, 0]]).is_err());
    }

    #[test]
    fn cylinder_counts() {
        assert_eq!(TransitionSystem::full_shift(2).cylinders(3).count(), 8);
        let g = TransitionSystem::golden_mean();
        let words: Vec<String> = g.cylinders(3).map(|w| w.to_string()).collect();
        assert_eq!(words, ["111", "112", "121", "211", "212"]);
        assert_eq!(g.cylinders(8).count(), 55);
        assert_eq!(g.count_cylinders(8), Some(55));
    }

    #[test]
    fn periodic_counts() {
        assert_eq!(TransitionSystem::full_shift(2).periodic_points(3).count(), 8);
        let g = TransitionSystem::golden_mean();
        let counts: Vec<usize> = (1..=4).map(|n| g.periodic_points(n).count()).collect();
        assert_eq!(counts, [1, 3, 4, 7]);
        let fixed: Vec<_> = g.periodic_points(1).collect();
        assert_eq!(fixed.len(), 1);
        assert_eq!(fixed[0].cycle(), &[1]);
    }

    #[test]
    fn enumeration_matches_brute_force() {
        let systems = [
            TransitionSystem::full_shift(3),
            TransitionSystem::golden_mean(),
            TransitionSystem::new(vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 1]]).unwrap(),
            TransitionSystem::new(vec![vec![1, 1, 0, 0], vec![0, 0, 1, 1], vec![1, 0, 0, 1], vec![0, 1, 1, 0]]).unwrap(),
        ];
        for ts in &systems {
            for n in 1..=8 {
                let brute = brute_words(ts, n);
                let words: Vec<Vec<usize>> = ts.cylinders(n).map(|w| w.into_vec()).collect();
                assert_eq!(words, brute);
                assert_eq!(ts.count_cylinders(n), Some(brute.len() as u128));
                let per = brute.iter().filter(|w| ts.allowed(w[n - 1], w[0])).count();
                assert_eq!(ts.periodic_points(n).count(), per);
                assert_eq!(ts.count_periodic(n), Some(per as u128));
            }
        }
    }

    #[test]
    fn restricted_cursors_partition_the_walk() {
        let ts = TransitionSystem::full_shift(3);
        let mut joined = Vec::new();
        for s in 1..=3 {
            let mut c = ts.cursor_from(4, s);
            while c.advance() {
                joined.push(c.current().to_vec());
            }
        }
        let all: Vec<Vec<usize>> = ts.cylinders(4).map(|w| w.into_vec()).collect();
        assert_eq!(joined, all);
    }

    #[test]
    fn periodic_points_are_fixed_by_the_shift_power() {
        let g = TransitionSystem::golden_mean();
        for n in 1..=7 {
            for p in g.periodic_points(n) {
                assert_eq!(p.shift_by(n), p);
                let mut q = p.clone();
                for _ in 0..n {
                    q = q.shift();
                }
                assert_eq!(q, p);
            }
        }
    }

    #[test]
    fn canonical_equality() {
        let ts = TransitionSystem::full_shift(2);
        let a = ts.point(vec![], vec![1, 2]).unwrap();
        let b = ts.point(vec![1, 2, 1], vec![2, 1, 2, 1]).unwrap();
        assert_eq!(a, b);
        let c = ts.point(vec![2], vec![1, 2]).unwrap();
        assert_ne!(a, c);
        assert_eq!(c.shift(), a);
        assert_eq!(c, a.shift());
    }

    #[test]
    fn inadmissible_points_rejected() {
        let g = TransitionSystem::golden_mean();
        assert!(g.point(vec![], vec![2]).is_err());
        assert!(g.point(vec![2], vec![2, 1]).is_err());
        assert!(g.point(vec![1, 2], vec![1]).is_ok());
    }

    #[test]
    fn metric_examples() {
        let ts = TransitionSystem::full_shift(2);
        let ones = ts.point(vec![], vec![1]).unwrap();
        let twos = ts.point(vec![], vec![2]).unwrap();
        let tol = 1e-12;
        assert_eq!(ts.distance(&ones, &ones, tol), 0.0);
        assert!((ts.distance(&ones, &twos, tol) - 1.0).abs() <= tol);
        let head = ts.point(vec![2], vec![1]).unwrap();
        assert!((ts.distance(&ones, &head, tol) - 0.5).abs() <= tol);
    }

    #[test]
    fn prefix_points_extend_words() {
        let g = TransitionSystem::golden_mean();
        let p = g.point_with_prefix(&[1, 2, 1, 2]).unwrap();
        assert_eq!(p.leading(4), vec![1, 2, 1, 2]);
        assert!(g.point_with_prefix(&[2, 2]).is_err());
    }
}
