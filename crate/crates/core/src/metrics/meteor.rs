use std::collections::HashMap;
use std::hash::Hash;

use super::MetricError;

pub const METEOR_ALPHA: f64 = 0.9;
pub const METEOR_BETA: f64 = 3.0;
pub const METEOR_GAMMA: f64 = 0.5;

/// Memo entries explored before falling back to the greedy alignment.
const STATE_BUDGET: usize = 500_000;

/// Exact unigram alignment between a candidate and a reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// (candidate index, reference index), ascending in candidate index.
    pub pairs: Vec<(usize, usize)>,
    pub chunks: usize,
    /// False if the search budget ran out and the greedy alignment was used;
    /// match count is still maximal, chunk count may not be minimal.
    pub optimal: bool,
}

pub fn count_chunks(pairs: &[(usize, usize)]) -> usize {
    if pairs.is_empty() {
        return 0;
    }
    1 + pairs
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

pub fn meteor<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let a = meteor_alignment(candidate, reference);
    let m = a.pairs.len();
    if m == 0 {
        return Ok(0.0);
    }
    let p = m as f64 / candidate.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let fmean = p * r / (METEOR_ALPHA * p + (1.0 - METEOR_ALPHA) * r);
    let penalty = METEOR_GAMMA * (a.chunks as f64 / m as f64).powf(METEOR_BETA);
    Ok(fmean * (1.0 - penalty))
}

/// Alignment with the most exact matches, and among those the fewest chunks.
pub fn meteor_alignment<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> Alignment {
    let mut ids: HashMap<&T, usize> = HashMap::new();
    let c: Vec<usize> = candidate
        .iter()
        .map(|t| {
            let n = ids.len();
            *ids.entry(t).or_insert(n)
        })
        .collect();
    let words = ids.len();
    let r: Vec<Option<usize>> = reference.iter().map(|t| ids.get(t).copied()).collect();

    // only reference positions holding a candidate word need a bit
    let mut bit_of = vec![usize::MAX; r.len()];
    let mut ref_positions: Vec<Vec<usize>> = vec![Vec::new(); words];
    let mut bits = 0;
    for (j, w) in r.iter().enumerate() {
        if let Some(w) = *w {
            bit_of[j] = bits;
            bits += 1;
            ref_positions[w].push(j);
        }
    }
    if bits > 128 {
        return greedy(&c, &r, &ref_positions);
    }

    let mut cand_count = vec![0usize; words];
    for &w in &c {
        cand_count[w] += 1;
    }
    let allowed_skips: Vec<usize> = (0..words)
        .map(|w| cand_count[w] - cand_count[w].min(ref_positions[w].len()))
        .collect();
    let word_mask: Vec<u128> = ref_positions
        .iter()
        .map(|js| js.iter().fold(0u128, |m, &j| m | 1u128 << bit_of[j]))
        .collect();
    // seen_before[i] = occurrences of c[i] in c[..i]
    let mut running = vec![0usize; words];
    let seen_before: Vec<usize> = c
        .iter()
        .map(|&w| {
            running[w] += 1;
            running[w] - 1
        })
        .collect();

    let mut search = Search {
        c: &c,
        r: &r,
        bit_of: &bit_of,
        ref_positions: &ref_positions,
        allowed_skips: &allowed_skips,
        word_mask: &word_mask,
        seen_before: &seen_before,
        memo: HashMap::new(),
        exhausted: false,
    };
    search.best(0, None, 0);
    if search.exhausted {
        return greedy(&c, &r, &ref_positions);
    }

    let mut pairs = Vec::new();
    let (mut prev, mut used) = (None, 0u128);
    for i in 0..c.len() {
        let target = search.best(i, prev, used);
        let mut chosen = None;
        for (j, links, next_prev, next_used) in search.moves(i, prev, used) {
            let rest = search.best(i + 1, next_prev, next_used);
            if rest != i32::MIN && links + rest == target {
                chosen = Some((j, next_prev, next_used));
                break;
            }
        }
        let (j, next_prev, next_used) = chosen.expect("reconstructing a memoized optimum");
        if let Some(j) = j {
            pairs.push((i, j));
        }
        prev = next_prev;
        used = next_used;
    }
    Alignment {
        chunks: count_chunks(&pairs),
        pairs,
        optimal: true,
    }
}

struct Search<'a> {
    c: &'a [usize],
    r: &'a [Option<usize>],
    bit_of: &'a [usize],
    ref_positions: &'a [Vec<usize>],
    allowed_skips: &'a [usize],
    word_mask: &'a [u128],
    seen_before: &'a [usize],
    memo: HashMap<(usize, Option<usize>, u128), i32>,
    exhausted: bool,
}

impl Search<'_> {
    /// Feasible moves at candidate position `i`: (matched reference index,
    /// links gained, next prev, next used mask).
    fn moves(&self, i: usize, prev: Option<usize>, used: u128) -> Vec<(Option<usize>, i32, Option<usize>, u128)> {
        let w = self.c[i];
        let mut out = Vec::new();
        let matched = (used & self.word_mask[w]).count_ones() as usize;
        for &j in &self.ref_positions[w] {
            let bit = 1u128 << self.bit_of[j];
            if used & bit != 0 {
                continue;
            }
            let link = (prev.is_some_and(|p| p + 1 == j)) as i32;
            // remember j only if the next candidate token can extend the run
            let next_prev = (i + 1 < self.c.len() && self.r.get(j + 1) == Some(&Some(self.c[i + 1]))).then_some(j);
            out.push((Some(j), link, next_prev, used | bit));
        }
        let skips = self.seen_before[i] - matched;
        if skips < self.allowed_skips[w] {
            out.push((None, 0, None, used));
        }
        out
    }

    /// Most links achievable from state (`i`, `prev`, `used`), or `i32::MIN`
    /// if infeasible.
    fn best(&mut self, i: usize, prev: Option<usize>, used: u128) -> i32 {
        if i == self.c.len() {
            return 0;
        }
        if self.exhausted {
            return 0;
        }
        if let Some(&v) = self.memo.get(&(i, prev, used)) {
            return v;
        }
        if self.memo.len() >= STATE_BUDGET {
            self.exhausted = true;
            return 0;
        }
        let mut best = i32::MIN;
        for (_, link, next_prev, next_used) in self.moves(i, prev, used) {
            let rest = self.best(i + 1, next_prev, next_used);
            if rest != i32::MIN {
                best = best.max(link + rest);
            }
        }
        self.memo.insert((i, prev, used), best);
        best
    }
}

/// Matches every candidate token that still has an unused reference
/// occurrence, preferring the one that continues the current run, then the
/// leftmost.
fn greedy(c: &[usize], r: &[Option<usize>], ref_positions: &[Vec<usize>]) -> Alignment {
    let mut used = vec![false; r.len()];
    let mut pairs = Vec::new();
    let mut prev: Option<usize> = None;
    for (i, &w) in c.iter().enumerate() {
        let next = prev
            .map(|p| p + 1)
            .filter(|&j| j < r.len() && r[j] == Some(w) && !used[j])
            .or_else(|| ref_positions[w].iter().copied().find(|&j| !used[j]));
        match next {
            Some(j) => {
                used[j] = true;
                pairs.push((i, j));
                prev = Some(j);
            }
            None => prev = None,
        }
    }
    Alignment {
        chunks: count_chunks(&pairs),
        pairs,
        optimal: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    /// Every maximal-size matching, by exhaustive search.
    fn brute_force(c: &[&str], r: &[&str]) -> (usize, usize) {
        fn go(i: usize, c: &[&str], r: &[&str], used: &mut Vec<bool>, pairs: &mut Vec<(usize, usize)>, best: &mut (usize, usize)) {
            if i == c.len() {
                let m = pairs.len();
                let ch = count_chunks(pairs);
                if m > best.0 || (m == best.0 && ch < best.1) {
                    *best = (m, ch);
                }
                return;
            }
            go(i + 1, c, r, used, pairs, best);
            for j in 0..r.len() {
                if !used[j] && c[i] == r[j] {
                    used[j] = true;
                    pairs.push((i, j));
                    go(i + 1, c, r, used, pairs, best);
                    pairs.pop();
                    used[j] = false;
                }
            }
        }
        let mut best = (0, usize::MAX);
        go(0, c, r, &mut vec![false; r.len()], &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn identical_four_tokens() {
        let s = w("a b c d");
        let v = meteor(&s, &s).unwrap();
        assert!((v - (1.0 - 0.5 * 0.25f64.powi(3))).abs() < 1e-12);
        assert!((v - 0.9922).abs() < 1e-4);
    }

    #[test]
    fn swapped_middle() {
        let (c, r) = (w("a b c d"), w("a c b d"));
        let a = meteor_alignment(&c, &r);
        assert_eq!((a.pairs.len(), a.chunks), brute_force(&c, &r));
        assert_eq!((a.pairs.len(), a.chunks), (4, 4));
        let expected = 1.0 - 0.5 * 1.0f64.powi(3);
        assert!((meteor(&c, &r).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn repeated_words_pick_fewest_chunks() {
        // greedy leftmost would split "the cat" off the first "the"
        let (c, r) = (w("the cat sat on the mat"), w("on the mat the cat sat"));
        let a = meteor_alignment(&c, &r);
        assert!(a.optimal);
        assert_eq!((a.pairs.len(), a.chunks), brute_force(&c, &r));
        assert_eq!(a.chunks, 2);
    }

    #[test]
    fn zero_matches_and_empty_reference() {
        assert_eq!(meteor(&w("x y"), &w("a b")).unwrap(), 0.0);
        assert_eq!(meteor(&w(""), &w("a b")).unwrap(), 0.0);
        assert_eq!(meteor(&w("a"), &w("")), Err(MetricError::EmptyReference));
    }

    #[test]
    fn matches_brute_force_on_small_repetitive_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let vocab = ["a", "b", "c"];
        for _ in 0..300 {
            let c: Vec<&str> = (0..rng.gen_range(0..7)).map(|_| vocab[rng.gen_range(0..3)]).collect();
            let r: Vec<&str> = (0..rng.gen_range(1..7)).map(|_| vocab[rng.gen_range(0..3)]).collect();
            let a = meteor_alignment(&c, &r);
            let (m, ch) = brute_force(&c, &r);
            assert_eq!(a.pairs.len(), m, "{c:?} {r:?}");
            if m > 0 {
                assert_eq!(a.chunks, ch, "{c:?} {r:?}");
            }
        }
    }

    #[test]
    fn long_inputs_fall_back_but_keep_all_matches() {
        let c: Vec<String> = (0..400).map(|i| format!("w{}", i % 3)).collect();
        let r: Vec<String> = (0..400).map(|i| format!("w{}", (i + 1) % 3)).collect();
        let a = meteor_alignment(&c, &r);
        // w0 134/133, w1 133/134, w2 133/133
        assert_eq!(a.pairs.len(), 399);
        assert!(!a.optimal);
        let v = meteor(&c, &r).unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
}
