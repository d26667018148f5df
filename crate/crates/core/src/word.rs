//! Reduced words and conjugacy classes in a free group of finite rank.
//!
//! Letters are signed generator indices: `+i` is the `i`-th generator and
//! `-i` its inverse (indices start at 1). Enumeration is depth-first by
//! prefix and can be split into deterministic shards, see [`Shard`].

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WordError {
    #[error("generator index {index} out of range for rank {rank}")]
    IndexOutOfRange { index: i32, rank: usize },
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("invalid shard {index} of {count}")]
    InvalidShard { index: usize, count: usize },
    #[error("cannot parse word `{0}`")]
    Parse(String),
}

/// A signed generator index, never zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Letter(i8);

impl Letter {
    pub fn new(signed_index: i32, rank: usize) -> Result<Self, WordError> {
        let abs = signed_index.unsigned_abs() as usize;
        if signed_index == 0 || abs > rank || abs > i8::MAX as usize {
            return Err(WordError::IndexOutOfRange {
                index: signed_index,
                rank,
            });
        }
        Ok(Letter(signed_index as i8))
    }

    /// Zero-based generator index.
    pub fn generator(self) -> usize {
        self.0.unsigned_abs() as usize - 1
    }

    pub fn is_inverse(self) -> bool {
        self.0 < 0
    }

    pub fn signed(self) -> i32 {
        self.0 as i32
    }

    pub fn inverse(self) -> Self {
        Letter(-self.0)
    }

    /// Position in the total order a < A < b < B < ...
    pub fn order_key(self) -> u8 {
        (self.generator() as u8) * 2 + u8::from(self.is_inverse())
    }

    /// All 2k letters in order.
    pub fn all(rank: usize) -> Vec<Letter> {
        (1..=rank as i8).flat_map(|i| [Letter(i), Letter(-i)]).collect()
    }
}

impl Ord for Letter {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order_key().cmp(&other.order_key())
    }
}

impl PartialOrd for Letter {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Rank and display labels of a free group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorAlphabet {
    labels: Vec<String>,
}

impl GeneratorAlphabet {
    pub fn new(labels: Vec<String>) -> Result<Self, WordError> {
        if labels.is_empty() {
            return Err(WordError::InvalidAlphabet("rank must be at least 1".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() || labels[..i].contains(l) {
                return Err(WordError::InvalidAlphabet(format!(
                    "labels must be distinct and nonempty, got {labels:?}"
                )));
            }
        }
        Ok(Self { labels })
    }

    /// Labels `a, b, c, ...` for the given rank.
    pub fn standard(rank: usize) -> Result<Self, WordError> {
        if rank == 0 || rank > 26 {
            return Err(WordError::InvalidAlphabet(format!("unsupported rank {rank}")));
        }
        Self::new(
            (0..rank)
                .map(|i| char::from(b'a' + i as u8).to_string())
                .collect(),
        )
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn letters(&self) -> Vec<Letter> {
        Letter::all(self.rank())
    }

    /// Renders a word with inverse letters as `label^-1`.
    pub fn display(&self, word: &Word) -> String {
        if word.is_empty() {
            return "e".to_string();
        }
        word.letters()
            .iter()
            .map(|l| {
                let label = &self.labels[l.generator()];
                if l.is_inverse() {
                    format!("{label}^-1")
                } else {
                    label.clone()
                }
            })
            .collect::<Vec<_>>()
            .join("·")
    }
}

/// A freely reduced word.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word {
    letters: Vec<Letter>,
}

impl Word {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a word from letters that are already known to be reduced.
    pub(crate) fn from_reduced(letters: Vec<Letter>) -> Self {
        debug_assert!(is_reduced(&letters));
        Self { letters }
    }

    /// Free reduction of an arbitrary letter sequence.
    pub fn from_letters(letters: impl IntoIterator<Item = Letter>) -> Self {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Self { letters: out }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Self {
            letters: self.letters.iter().rev().map(|l| l.inverse()).collect(),
        }
    }

    /// Reduced product `self · other`.
    pub fn concat(&self, other: &Word) -> Self {
        Self::from_letters(self.letters.iter().chain(other.letters.iter()).copied())
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        match (self.letters.first(), self.letters.last()) {
            (Some(f), Some(l)) => self.letters.len() == 1 || *f != l.inverse(),
            _ => true,
        }
    }

    /// Cyclic rotation moving the first `k` letters to the end.
    pub fn rotate(&self, k: usize) -> Self {
        let mut letters = self.letters.clone();
        if !letters.is_empty() {
            letters.rotate_left(k % self.letters.len());
        }
        Self { letters }
    }

    pub fn signed_indices(&self) -> Vec<i32> {
        self.letters.iter().map(|l| l.signed()).collect()
    }

    /// Lexicographic comparison under the letter order, shorter words first.
    pub fn shortlex_cmp(&self, other: &Word) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.letters.cmp(&other.letters))
    }

    /// Parses whitespace-separated signed indices, e.g. `1 -2 2`.
    pub fn parse_indices(text: &str, rank: usize) -> Result<Self, WordError> {
        let raw = text
            .split_whitespace()
            .map(|t| t.parse::<i32>().map_err(|_| WordError::Parse(text.into())))
            .collect::<Result<Vec<_>, _>>()?;
        reduce(&raw, rank)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "e");
        }
        for l in &self.letters {
            let c = char::from(b'a' + l.generator() as u8);
            if l.is_inverse() {
                write!(f, "{}", c.to_ascii_uppercase())?;
            } else {
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

fn is_reduced(letters: &[Letter]) -> bool {
    letters.windows(2).all(|p| p[0] != p[1].inverse())
}

/// Free reduction of a raw signed-index sequence.
pub fn reduce(raw: &[i32], rank: usize) -> Result<Word, WordError> {
    let letters = raw
        .iter()
        .map(|&i| Letter::new(i, rank))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Word::from_letters(letters))
}

/// Splits `w = conjugator · core · conjugator⁻¹` with `core` cyclically reduced.
pub fn cyclic_reduce(w: &Word) -> (Word, Word) {
    let letters = w.letters();
    let mut lo = 0;
    let mut hi = letters.len();
    while hi - lo >= 2 && letters[lo] == letters[hi - 1].inverse() {
        lo += 1;
        hi -= 1;
    }
    (
        Word::from_reduced(letters[lo..hi].to_vec()),
        Word::from_reduced(letters[..lo].to_vec()),
    )
}

/// A nontrivial conjugacy class, stored by its canonical representative:
/// the lexicographically least cyclic rotation of a cyclically reduced word.
/// Inversion is not quotiented, so `[w]` and `[w⁻¹]` are distinct classes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConjugacyClass {
    representative: Word,
}

impl ConjugacyClass {
    /// Class of an arbitrary word; `None` for the identity.
    pub fn of(w: &Word) -> Option<Self> {
        let (core, _) = cyclic_reduce(w);
        if core.is_empty() {
            return None;
        }
        Some(Self {
            representative: least_rotation(&core),
        })
    }

    pub fn representative(&self) -> &Word {
        &self.representative
    }

    pub fn len(&self) -> usize {
        self.representative.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// True iff the representative is not a proper power.
    pub fn is_primitive(&self) -> bool {
        smallest_period(self.representative.letters()) == self.len()
    }

    pub fn inverse(&self) -> Self {
        Self::of(&self.representative.inverse()).expect("nontrivial class")
    }
}

/// See [`ConjugacyClass::is_primitive`].
pub fn is_primitive(c: &ConjugacyClass) -> bool {
    c.is_primitive()
}

fn smallest_period(letters: &[Letter]) -> usize {
    let n = letters.len();
    (1..=n)
        .filter(|p| n % p == 0)
        .find(|&p| (p..n).all(|i| letters[i] == letters[i - p]))
        .unwrap_or(n)
}

fn least_rotation(w: &Word) -> Word {
    let n = w.len();
    let l = w.letters();
    let best = (0..n)
        .min_by(|&a, &b| {
            (0..n)
                .map(|i| l[(a + i) % n].cmp(&l[(b + i) % n]))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        })
        .unwrap_or(0);
    w.rotate(best)
}

/// True iff `letters` (cyclically reduced, nonempty) is the least of its rotations.
fn is_least_rotation(letters: &[Letter]) -> bool {
    let n = letters.len();
    (1..n).all(|r| {
        for i in 0..n {
            match letters[(r + i) % n].cmp(&letters[i]) {
                Ordering::Less => return false,
                Ordering::Greater => return true,
                Ordering::Equal => {}
            }
        }
        true
    })
}

/// Shard `index` of `count`: owns every word whose first
/// [`Shard::PREFIX_DEPTH`] letters (or whole word, if shorter) hash to
/// `index` modulo `count`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shard {
    pub index: usize,
    pub count: usize,
}

impl Shard {
    pub const PREFIX_DEPTH: usize = 4;

    pub fn new(index: usize, count: usize) -> Result<Self, WordError> {
        if count == 0 || index >= count {
            return Err(WordError::InvalidShard { index, count });
        }
        Ok(Self { index, count })
    }

    pub fn whole() -> Self {
        Self { index: 0, count: 1 }
    }

    pub fn all(count: usize) -> Vec<Shard> {
        (0..count.max(1))
            .map(|index| Shard {
                index,
                count: count.max(1),
            })
            .collect()
    }

    fn owns(&self, prefix: &[Letter]) -> bool {
        self.count == 1 || prefix_hash(prefix) % self.count as u64 == self.index as u64
    }
}

/// FNV-1a over the signed letter bytes, stable across platforms and releases.
fn prefix_hash(prefix: &[Letter]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for l in prefix {
        h ^= l.0 as u8 as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^= prefix.len() as u64;
    h.wrapping_mul(0x0000_0100_0000_01b3)
}

/// Depth-first walk over the reduced words of length `<= max_len` owned by
/// `shard`, threading a per-prefix state (e.g. a running matrix product).
///
/// `step(state, letter)` extends a prefix state by one letter on the right;
/// `visit(letters, state)` is called once per owned word, in depth-first
/// order.
pub fn walk_words<S, F, V>(
    alphabet: &GeneratorAlphabet,
    max_len: usize,
    shard: Shard,
    root: S,
    step: &F,
    visit: &mut V,
) where
    F: Fn(&S, Letter) -> S,
    V: FnMut(&[Letter], &S),
{
    let letters = alphabet.letters();
    let mut path = Vec::with_capacity(max_len);
    walk_rec(&letters, max_len, shard, &root, step, visit, &mut path, false);
}

#[allow(clippy::too_many_arguments)]
fn walk_rec<S, F, V>(
    letters: &[Letter],
    max_len: usize,
    shard: Shard,
    state: &S,
    step: &F,
    visit: &mut V,
    path: &mut Vec<Letter>,
    owned_subtree: bool,
) where
    F: Fn(&S, Letter) -> S,
    V: FnMut(&[Letter], &S),
{
    let depth = path.len();
    let mut owned = owned_subtree;
    if !owned_subtree {
        if depth == Shard::PREFIX_DEPTH {
            if !shard.owns(path) {
                return;
            }
            owned = true;
            visit(path, state);
        } else if shard.owns(path) {
            visit(path, state);
        }
    } else {
        visit(path, state);
    }
    if depth == max_len {
        return;
    }
    for &l in letters {
        if path.last() == Some(&l.inverse()) {
            continue;
        }
        let next = step(state, l);
        path.push(l);
        walk_rec(letters, max_len, shard, &next, step, visit, path, owned);
        path.pop();
    }
}

/// All reduced words of length `<= max_len` owned by `shard`, in depth-first order.
pub fn enumerate_words(alphabet: &GeneratorAlphabet, max_len: usize, shard: Shard) -> Vec<Word> {
    let mut out = Vec::new();
    walk_words(alphabet, max_len, shard, (), &|_, _| (), &mut |w, _| {
        out.push(Word::from_reduced(w.to_vec()))
    });
    out
}

/// Closed-form count of reduced words of length `<= max_len`.
pub fn reduced_word_count(rank: usize, max_len: usize) -> u64 {
    let k = rank as u64;
    let mut total = 1u64;
    let mut layer = 2 * k;
    for _ in 1..=max_len {
        total += layer;
        layer *= 2 * k - 1;
    }
    total
}

/// Each nontrivial conjugacy class with cyclically reduced length in
/// `1..=max_len` exactly once (restricted to `shard`), in depth-first order
/// of canonical representatives.
pub fn enumerate_conjugacy_classes(
    alphabet: &GeneratorAlphabet,
    max_len: usize,
    shard: Shard,
) -> Vec<ConjugacyClass> {
    let mut out = Vec::new();
    walk_words(alphabet, max_len, shard, (), &|_, _| (), &mut |w, _| {
        if w.is_empty() {
            return;
        }
        let cyc = w.len() == 1 || w[0] != w[w.len() - 1].inverse();
        if cyc && is_least_rotation(w) {
            out.push(ConjugacyClass {
                representative: Word::from_reduced(w.to_vec()),
            });
        }
    });
    out
}

/// Canonical merge order for class lists coming from different shards.
pub fn sort_classes(classes: &mut [ConjugacyClass]) {
    classes.sort_by(|a, b| a.representative.shortlex_cmp(&b.representative));
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn w(raw: &[i32]) -> Word {
        reduce(raw, 2).unwrap()
    }

    #[test]
    fn reduce_cancels() {
        assert!(w(&[1, -1]).is_empty());
        assert_eq!(w(&[1, 2, -2, 1]).signed_indices(), vec![1, 1]);
        assert_eq!(w(&[1, 2, -1]).signed_indices(), vec![1, 2, -1]);
        assert_eq!(
            reduce(&[3], 2),
            Err(WordError::IndexOutOfRange { index: 3, rank: 2 })
        );
        assert!(reduce(&[0], 2).is_err());
    }

    #[test]
    fn cyclic_reduction() {
        let (core, conj) = cyclic_reduce(&w(&[1, 2, -1]));
        assert_eq!(core, w(&[2]));
        assert_eq!(conj, w(&[1]));
        let (core, conj) = cyclic_reduce(&w(&[1, 2, 2, -1]));
        assert_eq!(core, w(&[2, 2]));
        assert_eq!(conj, w(&[1]));
        let (core, conj) = cyclic_reduce(&w(&[1, 2]));
        assert_eq!(core, w(&[1, 2]));
        assert!(conj.is_empty());
    }

    #[test]
    fn class_of_rotations_agree() {
        assert_eq!(
            ConjugacyClass::of(&w(&[1, 2])),
            ConjugacyClass::of(&w(&[2, 1]))
        );
        assert_ne!(
            ConjugacyClass::of(&w(&[1, 2])),
            ConjugacyClass::of(&w(&[-2, -1]))
        );
        assert_eq!(ConjugacyClass::of(&Word::empty()), None);
    }

    #[test]
    fn primitivity() {
        let c = |raw: &[i32]| ConjugacyClass::of(&w(raw)).unwrap();
        assert!(!c(&[1, 2, 1, 2]).is_primitive());
        assert!(c(&[1, 2]).is_primitive());
        assert!(c(&[1, 1, 2]).is_primitive());
        assert!(!c(&[1, 1]).is_primitive());
    }

    #[test]
    fn small_counts() {
        let a = GeneratorAlphabet::standard(2).unwrap();
        assert_eq!(enumerate_words(&a, 1, Shard::whole()).len(), 5);
        assert_eq!(enumerate_words(&a, 3, Shard::whole()).len(), 53);
        assert_eq!(reduced_word_count(2, 3), 53);
        assert_eq!(enumerate_conjugacy_classes(&a, 1, Shard::whole()).len(), 4);
    }

    #[test]
    fn shards_partition() {
        let a = GeneratorAlphabet::standard(2).unwrap();
        let all: HashSet<Word> = enumerate_words(&a, 6, Shard::whole()).into_iter().collect();
        let mut union = HashSet::new();
        for s in Shard::all(5) {
            for word in enumerate_words(&a, 6, s) {
                assert!(union.insert(word));
            }
        }
        assert_eq!(all, union);
    }

    #[test]
    fn display_uses_case_for_inverses() {
        assert_eq!(w(&[1, -2]).to_string(), "aB");
        let a = GeneratorAlphabet::standard(2).unwrap();
        assert_eq!(a.display(&w(&[1, -2])), "a·b^-1");
    }
}
