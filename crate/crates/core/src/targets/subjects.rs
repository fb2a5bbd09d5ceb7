//! Built-in benchmark subjects.
//!
//! Each subject is a small native program instrumented with tick counters:
//! ordered pairs, insertion sort, quicksort, red-black tree sort and a
//! chained hash table, plus a popcount target whose posterior is known in
//! closed form. Integer-array subjects decode their genome one byte per
//! element with [`decode_int_array`].

use std::fmt;

use serde::{Deserialize, Serialize};

use super::Target;
use crate::error::{Error, Result, TargetError};

/// Maps `n` genome bytes onto integers in `[lo, hi]` by `lo + byte mod (hi - lo + 1)`.
pub fn decode_int_array(genome: &[u8], n: usize, lo: i64, hi: i64) -> Result<Vec<i64>> {
    if genome.len() != n {
        return Err(Error::contract(format!(
            "expected {n} genome bytes, got {}",
            genome.len()
        )));
    }
    check_range(lo, hi)?;
    let width = hi - lo + 1;
    Ok(genome.iter().map(|&b| lo + i64::from(b) % width).collect())
}

fn check_range(lo: i64, hi: i64) -> Result<()> {
    if lo > hi || hi - lo > 255 {
        return Err(Error::contract(format!(
            "value range [{lo}, {hi}] must satisfy lo <= hi and hi - lo <= 255"
        )));
    }
    Ok(())
}

/// Insertion sort ticking once per outer iteration and once per inner shift.
pub fn insertion_sort_ticks(a: &mut [i64]) -> u64 {
    let mut ticks = 0;
    for i in 1..a.len() {
        ticks += 1;
        let x = a[i];
        let mut j = i;
        while j > 0 && a[j - 1] > x {
            ticks += 1;
            a[j] = a[j - 1];
            j -= 1;
        }
        a[j] = x;
    }
    ticks
}

/// One tick for every index pair `i < j` with `a[i] <= a[j]`.
pub fn ordered_pairs_ticks(a: &[i64]) -> u64 {
    let mut ticks = 0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            if a[i] <= a[j] {
                ticks += 1;
            }
        }
    }
    ticks
}

/// Quicksort with a last-element (Lomuto) pivot, ticking once per
/// partition-loop comparison.
pub fn quicksort_ticks(a: &mut [i64]) -> u64 {
    let mut ticks = 0;
    // explicit stack: sorted inputs recurse n deep
    let mut stack = vec![(0usize, a.len())];
    while let Some((lo, hi)) = stack.pop() {
        if hi - lo < 2 {
            continue;
        }
        let pivot = a[hi - 1];
        let mut store = lo;
        for j in lo..hi - 1 {
            ticks += 1;
            if a[j] <= pivot {
                a.swap(store, j);
                store += 1;
            }
        }
        a.swap(store, hi - 1);
        stack.push((lo, store));
        stack.push((store + 1, hi));
    }
    ticks
}

/// Inserts every value into a red-black tree. Ticks once per key
/// comparison during descent, once per recoloring step where the uncle is
/// red, and once per rotation. Blackening the root is free.
pub fn tree_sort_ticks(a: &[i64]) -> u64 {
    let mut tree = RbTree::default();
    for &v in a {
        tree.insert(v);
    }
    tree.ticks
}

const NIL: usize = usize::MAX;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Color {
    Red,
    Black,
}

struct Node {
    key: i64,
    color: Color,
    left: usize,
    right: usize,
    parent: usize,
}

struct RbTree {
    nodes: Vec<Node>,
    root: usize,
    ticks: u64,
}

impl Default for RbTree {
    fn default() -> Self {
        RbTree {
            nodes: Vec::new(),
            root: NIL,
            ticks: 0,
        }
    }
}

impl RbTree {
    fn is_red(&self, x: usize) -> bool {
        x != NIL && self.nodes[x].color == Color::Red
    }

    fn insert(&mut self, key: i64) {
        let mut parent = NIL;
        let mut x = self.root;
        let mut go_left = false;
        while x != NIL {
            self.ticks += 1;
            parent = x;
            go_left = key < self.nodes[x].key;
            x = if go_left {
                self.nodes[x].left
            } else {
                self.nodes[x].right
            };
        }
        let z = self.nodes.len();
        self.nodes.push(Node {
            key,
            color: Color::Red,
            left: NIL,
            right: NIL,
            parent,
        });
        if parent == NIL {
            self.root = z;
        } else if go_left {
            self.nodes[parent].left = z;
        } else {
            self.nodes[parent].right = z;
        }
        self.fix_insert(z);
    }

    fn fix_insert(&mut self, mut z: usize) {
        while self.is_red(self.nodes[z].parent) {
            let p = self.nodes[z].parent;
            let g = self.nodes[p].parent;
            let p_is_left = self.nodes[g].left == p;
            let uncle = if p_is_left {
                self.nodes[g].right
            } else {
                self.nodes[g].left
            };
            if self.is_red(uncle) {
                self.ticks += 1;
                self.nodes[p].color = Color::Black;
                self.nodes[uncle].color = Color::Black;
                self.nodes[g].color = Color::Red;
                z = g;
                continue;
            }
            if p_is_left {
                if self.nodes[p].right == z {
                    z = p;
                    self.rotate_left(z);
                }
                let p = self.nodes[z].parent;
                let g = self.nodes[p].parent;
                self.nodes[p].color = Color::Black;
                self.nodes[g].color = Color::Red;
                self.rotate_right(g);
            } else {
                if self.nodes[p].left == z {
                    z = p;
                    self.rotate_right(z);
                }
                let p = self.nodes[z].parent;
                let g = self.nodes[p].parent;
                self.nodes[p].color = Color::Black;
                self.nodes[g].color = Color::Red;
                self.rotate_left(g);
            }
        }
        let root = self.root;
        self.nodes[root].color = Color::Black;
    }

    fn rotate_left(&mut self, x: usize) {
        self.ticks += 1;
        let y = self.nodes[x].right;
        let y_left = self.nodes[y].left;
        self.nodes[x].right = y_left;
        if y_left != NIL {
            self.nodes[y_left].parent = x;
        }
        self.replace_child(x, y);
        self.nodes[y].left = x;
        self.nodes[x].parent = y;
    }

    fn rotate_right(&mut self, x: usize) {
        self.ticks += 1;
        let y = self.nodes[x].left;
        let y_right = self.nodes[y].right;
        self.nodes[x].left = y_right;
        if y_right != NIL {
            self.nodes[y_right].parent = x;
        }
        self.replace_child(x, y);
        self.nodes[y].right = x;
        self.nodes[x].parent = y;
    }

    // puts `y` where `x` hangs from its parent
    fn replace_child(&mut self, x: usize, y: usize) {
        let xp = self.nodes[x].parent;
        self.nodes[y].parent = xp;
        if xp == NIL {
            self.root = y;
        } else if self.nodes[xp].left == x {
            self.nodes[xp].left = y;
        } else {
            self.nodes[xp].right = y;
        }
    }

    #[cfg(test)]
    fn in_order(&self) -> Vec<i64> {
        let mut out = Vec::new();
        let mut stack = Vec::new();
        let mut x = self.root;
        while x != NIL || !stack.is_empty() {
            while x != NIL {
                stack.push(x);
                x = self.nodes[x].left;
            }
            let n = stack.pop().unwrap();
            out.push(self.nodes[n].key);
            x = self.nodes[n].right;
        }
        out
    }

    /// Black height if every red-black property holds.
    #[cfg(test)]
    fn check(&self, x: usize) -> Option<usize> {
        if x == NIL {
            return Some(1);
        }
        let n = &self.nodes[x];
        if n.color == Color::Red && (self.is_red(n.left) || self.is_red(n.right)) {
            return None;
        }
        let l = self.check(n.left)?;
        let r = self.check(n.right)?;
        (l == r).then_some(l + usize::from(n.color == Color::Black))
    }
}

/// Chained table with 16 buckets and `hash = sum of key bytes mod 16`.
/// Keys are always appended; inserting ticks once per chain node walked.
pub fn hash_table_ticks(keys: &[u8], key_len: usize) -> u64 {
    const BUCKETS: usize = 16;
    let mut chains: Vec<Vec<&[u8]>> = vec![Vec::new(); BUCKETS];
    let mut ticks = 0;
    for key in keys.chunks_exact(key_len) {
        let bucket = key.iter().map(|&b| b as usize).sum::<usize>() % BUCKETS;
        let chain = &mut chains[bucket];
        ticks += chain.len() as u64;
        chain.push(key);
    }
    ticks
}

/// Adapts a closure into a [`Target`].
pub struct FnTarget<F> {
    name: String,
    genome_len: usize,
    f: F,
}

impl<F> FnTarget<F>
where
    F: Fn(&[u8]) -> Result<f64, TargetError>,
{
    pub fn fallible(name: impl Into<String>, genome_len: usize, f: F) -> Self {
        FnTarget {
            name: name.into(),
            genome_len,
            f,
        }
    }
}

impl FnTarget<()> {
    #[allow(clippy::new_ret_no_self)]
    pub fn new(
        name: impl Into<String>,
        genome_len: usize,
        f: impl Fn(&[u8]) -> f64,
    ) -> FnTarget<impl Fn(&[u8]) -> Result<f64, TargetError>> {
        FnTarget::fallible(name, genome_len, move |g: &[u8]| Ok(f(g)))
    }
}

impl<F> Target for FnTarget<F>
where
    F: Fn(&[u8]) -> Result<f64, TargetError>,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn genome_len(&self) -> usize {
        self.genome_len
    }

    fn evaluate(&self, genome: &[u8]) -> Result<f64, TargetError> {
        (self.f)(genome)
    }
}

/// An integer-array subject: decode, then run the instrumented program.
pub struct IntArrayTarget {
    name: String,
    n: usize,
    lo: i64,
    hi: i64,
    program: fn(&mut [i64]) -> u64,
}

impl IntArrayTarget {
    fn new(name: &str, n: usize, lo: i64, hi: i64, program: fn(&mut [i64]) -> u64) -> Result<Self> {
        check_range(lo, hi)?;
        Ok(IntArrayTarget {
            name: format!("{name}(n={n},lo={lo},hi={hi})"),
            n,
            lo,
            hi,
            program,
        })
    }

    /// Runs the program on already-decoded values.
    pub fn run(&self, values: &[i64]) -> u64 {
        let mut a = values.to_vec();
        (self.program)(&mut a)
    }
}

impl fmt::Debug for IntArrayTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntArrayTarget")
            .field("name", &self.name)
            .finish()
    }
}

impl Target for IntArrayTarget {
    fn name(&self) -> &str {
        &self.name
    }

    fn genome_len(&self) -> usize {
        self.n
    }

    fn evaluate(&self, genome: &[u8]) -> Result<f64, TargetError> {
        let mut a = decode_int_array(genome, self.n, self.lo, self.hi).map_err(|_| {
            TargetError::GenomeLength {
                expected: self.n,
                actual: genome.len(),
            }
        })?;
        Ok((self.program)(&mut a) as f64)
    }
}

pub fn insertion_sort_target(n: usize, lo: i64, hi: i64) -> Result<IntArrayTarget> {
    IntArrayTarget::new("insertion-sort", n, lo, hi, insertion_sort_ticks)
}

pub fn ordered_pairs_target(n: usize, lo: i64, hi: i64) -> Result<IntArrayTarget> {
    if n < 2 {
        return Err(Error::contract("ordered-pairs needs at least 2 elements"));
    }
    IntArrayTarget::new("ordered-pairs", n, lo, hi, |a| ordered_pairs_ticks(a))
}

pub fn quicksort_target(n: usize, lo: i64, hi: i64) -> Result<IntArrayTarget> {
    IntArrayTarget::new("quicksort", n, lo, hi, quicksort_ticks)
}

pub fn tree_sort_target(n: usize, lo: i64, hi: i64) -> Result<IntArrayTarget> {
    IntArrayTarget::new("tree-sort", n, lo, hi, |a| tree_sort_ticks(a))
}

pub struct HashTableTarget {
    name: String,
    n_keys: usize,
    key_len: usize,
}

impl Target for HashTableTarget {
    fn name(&self) -> &str {
        &self.name
    }

    fn genome_len(&self) -> usize {
        self.n_keys * self.key_len
    }

    fn evaluate(&self, genome: &[u8]) -> Result<f64, TargetError> {
        if genome.len() != self.genome_len() {
            return Err(TargetError::GenomeLength {
                expected: self.genome_len(),
                actual: genome.len(),
            });
        }
        Ok(hash_table_ticks(genome, self.key_len) as f64)
    }
}

pub fn hash_table_target(n_keys: usize, key_len: usize) -> Result<HashTableTarget> {
    if key_len == 0 {
        return Err(Error::contract("hash-table keys need at least one byte"));
    }
    Ok(HashTableTarget {
        name: format!("hash-table(keys={n_keys},key_len={key_len})"),
        n_keys,
        key_len,
    })
}

/// Tick = number of set bits. Its posterior `P(g) ∝ e^popcount(g)` factorizes
/// over bits, which makes it the reference target for sampler checks.
pub struct PopcountTarget {
    name: String,
    len: usize,
}

impl Target for PopcountTarget {
    fn name(&self) -> &str {
        &self.name
    }

    fn genome_len(&self) -> usize {
        self.len
    }

    fn evaluate(&self, genome: &[u8]) -> Result<f64, TargetError> {
        Ok(genome.iter().map(|b| b.count_ones()).sum::<u32>() as f64)
    }
}

pub fn popcount_target(len: usize) -> PopcountTarget {
    PopcountTarget {
        name: format!("popcount(bytes={len})"),
        len,
    }
}

/// Serializable description of a built-in subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectSpec {
    pub name: String,
    /// Array length, number of keys (hash-table) or byte count (popcount).
    pub size: usize,
    #[serde(default)]
    pub lo: i64,
    #[serde(default = "default_hi")]
    pub hi: i64,
    #[serde(default = "default_key_len")]
    pub key_len: usize,
}

fn default_hi() -> i64 {
    255
}

fn default_key_len() -> usize {
    4
}

impl SubjectSpec {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        SubjectSpec {
            name: name.into(),
            size,
            lo: 0,
            hi: default_hi(),
            key_len: default_key_len(),
        }
    }

    pub fn with_range(mut self, lo: i64, hi: i64) -> Self {
        self.lo = lo;
        self.hi = hi;
        self
    }

    pub fn with_key_len(mut self, key_len: usize) -> Self {
        self.key_len = key_len;
        self
    }

    pub fn build(&self) -> Result<Box<dyn Target + Send + Sync>> {
        let (n, lo, hi) = (self.size, self.lo, self.hi);
        Ok(match self.name.as_str() {
            "ordered-pairs" => Box::new(ordered_pairs_target(n, lo, hi)?),
            "insertion-sort" => Box::new(insertion_sort_target(n, lo, hi)?),
            "quicksort" => Box::new(quicksort_target(n, lo, hi)?),
            "tree-sort" => Box::new(tree_sort_target(n, lo, hi)?),
            "hash-table" => Box::new(hash_table_target(n, self.key_len)?),
            "popcount" => Box::new(popcount_target(n)),
            other => return Err(Error::UnknownSubject(other.to_string())),
        })
    }
}

/// Names and one-line descriptions of the built-in subjects.
pub fn list_subjects() -> &'static [(&'static str, &'static str)] {
    &[
        ("ordered-pairs", "count index pairs i<j with a[i] <= a[j]"),
        (
            "insertion-sort",
            "insertion sort, ticks per outer and inner iteration",
        ),
        (
            "quicksort",
            "last-pivot quicksort, ticks per partition comparison",
        ),
        (
            "tree-sort",
            "red-black tree insertion, ticks per comparison and fix-up step",
        ),
        (
            "hash-table",
            "16-bucket chained table, ticks per chain node walked on insert",
        ),
        ("popcount", "number of set bits in the genome"),
    ]
}
