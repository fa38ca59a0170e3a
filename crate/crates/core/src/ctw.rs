//! Context Tree Weighting (CTW) mixture probabilities and entropy rates.
//!
//! For a context depth `D` and alphabet size `m` (2 or 4), CTW assigns every
//! sequence the Bayesian mixture probability over all tree sources of depth
//! at most `D`. Each node `s` of the context tree keeps
//!
//! - per-symbol counts `a_s` of the symbols that followed context `s`,
//! - the Krichevsky–Trofimov estimate `P_e(s)` built sequentially from
//!   `(a_x + 1/2) / (sum_s a_s + m/2)`,
//! - the weighted probability
//!   `P_w(s) = P_e(s)` at depth `D`, and
//!   `P_w(s) = 1/2 P_e(s) + 1/2 prod_c P_w(cs)` above it.
//!
//! The root's `P_w` is the mixture probability. With `m = 2` the implied
//! prior on suffix sets is `2^(1 - |S| - N(S))`, where `N(S)` counts the
//! members shorter than `D`.
//!
//! Everything is stored as base-2 logarithms, so sequences of any length can
//! be processed without underflow. Nodes are created on first visit; a pass
//! over `n` symbols touches `n * (D + 1)` nodes and creates at most `n * D + 1`.
//!
//! The sequence is treated as if preceded by `D` copies of symbol 0, so the
//! first symbols have full-length contexts.

use thiserror::Error;

use crate::quantise::SymbolSequence;

pub const DEFAULT_DEPTH: usize = 20;

const NO_CHILD: u32 = 0;

#[derive(Debug, Error, PartialEq)]
pub enum CtwError {
    #[error("alphabet size must be 2 or 4, got {0}")]
    UnsupportedAlphabet(usize),
    #[error("cannot estimate the entropy rate of an empty sequence")]
    EmptySequence,
    #[error("symbol {symbol} at position {position} is outside an alphabet of size {m}")]
    SymbolOutOfRange {
        symbol: u8,
        position: usize,
        m: usize,
    },
    #[error("context tree of depth {depth} needs up to {nodes} nodes, which cannot be allocated")]
    Allocation { depth: usize, nodes: u128 },
}

/// Krichevsky–Trofimov log2 probability of `next` given the counts so far.
///
/// Returns `log2((a_next + 1/2) / (sum a + m/2))` with `m = counts.len()`;
/// the caller increments `counts[next]` afterwards.
#[inline]
pub fn kt_update(counts: &[u32], next: u8) -> f64 {
    let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    let num = f64::from(counts[next as usize]) + 0.5;
    let den = total as f64 + counts.len() as f64 / 2.0;
    (num / den).log2()
}

/// `log2(2^a / 2 + 2^b / 2)` without leaving the log domain.
#[inline]
fn log2_half_sum(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi - 1.0 + (lo - hi).exp2().ln_1p() * std::f64::consts::LOG2_E
}

/// Read-only view of one context-tree node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeView<'a> {
    pub counts: &'a [u32],
    pub log_pe: f64,
    pub log_pw: f64,
}

/// Incrementally built context tree (arena layout, one entry per node).
#[derive(Debug, Clone)]
pub struct ContextTree {
    depth: usize,
    m: usize,
    log_pe: Vec<f64>,
    log_pw: Vec<f64>,
    counts: Vec<u32>,
    children: Vec<u32>,
    /// Past symbols, most recent first.
    context: Vec<u8>,
    path: Vec<u32>,
    processed: usize,
}

impl ContextTree {
    pub fn new(depth: usize, alphabet_size: usize) -> Result<Self, CtwError> {
        Self::with_capacity(depth, alphabet_size, 0)
    }

    /// Creates a tree and reserves room for a pass over `n` symbols.
    pub fn with_capacity(depth: usize, alphabet_size: usize, n: usize) -> Result<Self, CtwError> {
        if alphabet_size != 2 && alphabet_size != 4 {
            return Err(CtwError::UnsupportedAlphabet(alphabet_size));
        }
        let alloc_err = |nodes: u128| CtwError::Allocation { depth, nodes };
        let nodes = max_nodes(n, depth, alphabet_size);
        if nodes >= u128::from(u32::MAX) {
            return Err(alloc_err(nodes));
        }
        let nodes = nodes as usize;
        let mut tree = Self {
            depth,
            m: alphabet_size,
            log_pe: Vec::new(),
            log_pw: Vec::new(),
            counts: Vec::new(),
            children: Vec::new(),
            context: Vec::new(),
            path: Vec::new(),
            processed: 0,
        };
        let m = alphabet_size;
        let reserve = |v: &mut Vec<u32>, k: usize| v.try_reserve_exact(k);
        tree.log_pe
            .try_reserve_exact(nodes)
            .and_then(|_| tree.log_pw.try_reserve_exact(nodes))
            .and_then(|_| reserve(&mut tree.counts, nodes * m))
            .and_then(|_| reserve(&mut tree.children, nodes * m))
            .and_then(|_| tree.context.try_reserve_exact(depth))
            .and_then(|_| tree.path.try_reserve_exact(depth + 1))
            .map_err(|_| alloc_err(nodes as u128))?;
        tree.context.resize(depth, 0);
        tree.path.resize(depth + 1, 0);
        tree.push_node()?;
        Ok(tree)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn alphabet_size(&self) -> usize {
        self.m
    }

    pub fn node_count(&self) -> usize {
        self.log_pe.len()
    }

    /// Number of symbols processed so far.
    pub fn processed(&self) -> usize {
        self.processed
    }

    /// log2 of the mixture probability of everything processed so far.
    pub fn root_log_probability(&self) -> f64 {
        self.log_pw[0]
    }

    fn push_node(&mut self) -> Result<u32, CtwError> {
        let id = self.log_pe.len();
        if id >= u32::MAX as usize {
            return Err(CtwError::Allocation {
                depth: self.depth,
                nodes: id as u128 + 1,
            });
        }
        if self.log_pe.len() == self.log_pe.capacity() {
            let extra = self.log_pe.len().max(64);
            self.log_pe
                .try_reserve(extra)
                .and_then(|_| self.log_pw.try_reserve(extra))
                .and_then(|_| self.counts.try_reserve(extra * self.m))
                .and_then(|_| self.children.try_reserve(extra * self.m))
                .map_err(|_| CtwError::Allocation {
                    depth: self.depth,
                    nodes: (id + extra) as u128,
                })?;
        }
        self.log_pe.push(0.0);
        self.log_pw.push(0.0);
        self.counts.extend(std::iter::repeat_n(0, self.m));
        self.children.extend(std::iter::repeat_n(NO_CHILD, self.m));
        Ok(id as u32)
    }

    /// Feeds one symbol, updating the `D + 1` nodes on its context path.
    pub fn update(&mut self, symbol: u8) -> Result<(), CtwError> {
        let m = self.m;
        if symbol as usize >= m {
            return Err(CtwError::SymbolOutOfRange {
                symbol,
                position: self.processed,
                m,
            });
        }

        let mut node = 0u32;
        self.path[0] = 0;
        for d in 0..self.depth {
            let slot = node as usize * m + self.context[d] as usize;
            let mut child = self.children[slot];
            if child == NO_CHILD {
                child = self.push_node()?;
                self.children[slot] = child;
            }
            node = child;
            self.path[d + 1] = node;
        }

        for d in (0..=self.depth).rev() {
            let id = self.path[d] as usize;
            let counts = &mut self.counts[id * m..(id + 1) * m];
            self.log_pe[id] += kt_update(counts, symbol);
            counts[symbol as usize] += 1;
            self.log_pw[id] = if d == self.depth {
                self.log_pe[id]
            } else {
                let children_log_pw: f64 = self.children[id * m..(id + 1) * m]
                    .iter()
                    .filter(|&&c| c != NO_CHILD)
                    .map(|&c| self.log_pw[c as usize])
                    .sum();
                log2_half_sum(self.log_pe[id], children_log_pw)
            };
        }

        if self.depth > 0 {
            self.context.rotate_right(1);
            self.context[0] = symbol;
        }
        self.processed += 1;
        Ok(())
    }

    /// Looks up the node for `context` (most recent symbol first).
    pub fn node(&self, context: &[u8]) -> Option<NodeView<'_>> {
        if context.len() > self.depth {
            return None;
        }
        let mut id = 0usize;
        for &c in context {
            if c as usize >= self.m {
                return None;
            }
            let child = self.children[id * self.m + c as usize];
            if child == NO_CHILD {
                return None;
            }
            id = child as usize;
        }
        Some(NodeView {
            counts: &self.counts[id * self.m..(id + 1) * self.m],
            log_pe: self.log_pe[id],
            log_pw: self.log_pw[id],
        })
    }

    /// Contexts of every node currently in the tree, in depth-first order.
    pub fn contexts(&self) -> Vec<Vec<u8>> {
        let mut out = Vec::with_capacity(self.node_count());
        let mut stack = vec![(0usize, Vec::new())];
        while let Some((id, ctx)) = stack.pop() {
            for c in (0..self.m).rev() {
                let child = self.children[id * self.m + c];
                if child != NO_CHILD {
                    let mut next = ctx.clone();
                    next.push(c as u8);
                    stack.push((child as usize, next));
                }
            }
            out.push(ctx);
        }
        out
    }
}

/// Upper bound on the nodes a pass over `n` symbols can create.
fn max_nodes(n: usize, depth: usize, m: usize) -> u128 {
    let path_bound = (n as u128).saturating_mul(depth as u128).saturating_add(1);
    // full tree: 1 + m + ... + m^D
    let mut full: u128 = 0;
    let mut level: u128 = 1;
    for _ in 0..=depth {
        full = full.saturating_add(level);
        if full >= path_bound {
            return path_bound;
        }
        level = level.saturating_mul(m as u128);
    }
    full.min(path_bound)
}

/// log2 of the CTW mixture probability of `symbols` over alphabet `m`.
pub fn log2_mixture_probability(symbols: &[u8], m: usize, depth: usize) -> Result<f64, CtwError> {
    let mut tree = ContextTree::with_capacity(depth, m, symbols.len())?;
    for &s in symbols {
        tree.update(s)?;
    }
    Ok(tree.root_log_probability())
}

/// log2 of the CTW mixture probability of a symbol sequence.
pub fn ctw_sequence_probability(seq: &SymbolSequence, depth: usize) -> Result<f64, CtwError> {
    log2_mixture_probability(seq.symbols(), seq.alphabet_size(), depth)
}

/// Entropy rate estimate in bits per symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    pub value: f64,
    pub sequence_length: usize,
    pub depth: usize,
    pub alphabet_size: usize,
}

impl EntropyEstimate {
    /// Largest value the estimator can return for this length and alphabet.
    pub fn upper_bound(n: usize, m: usize) -> f64 {
        let n = n as f64;
        let m = m as f64;
        m.log2() + ((m - 1.0) / 2.0 * n.log2() + m + 1.0) / n
    }
}

/// `-(1/n) log2 P_mix(x_1^n)`; about 1 for random binary data, 2 for random
/// quaternary data and close to 0 for predictable sequences.
pub fn entropy_rate(seq: &SymbolSequence, depth: usize) -> Result<EntropyEstimate, CtwError> {
    entropy_rate_of(seq.symbols(), seq.alphabet_size(), depth)
}

pub fn entropy_rate_of(
    symbols: &[u8],
    m: usize,
    depth: usize,
) -> Result<EntropyEstimate, CtwError> {
    if symbols.is_empty() {
        return Err(CtwError::EmptySequence);
    }
    let log_p = log2_mixture_probability(symbols, m, depth)?;
    Ok(EntropyEstimate {
        value: (-log_p / symbols.len() as f64).max(0.0),
        sequence_length: symbols.len(),
        depth,
        alphabet_size: m,
    })
}
