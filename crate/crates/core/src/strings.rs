//! Alphabets, boundary padding and the primitive string observations.
//!
//! Every predicate in the crate reduces to one of four observations on a
//! symbol sequence: contiguous occurrence, subsequence embedding, overlapping
//! occurrence count, and tier projection. Symbols are interned as [`Sym`]
//! indices; the boundary symbol is always `Sym(0)` so that it sorts first.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BOUNDARY: &str = "#";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StringError {
    #[error("duplicate symbol `{0}` in alphabet")]
    DuplicateSymbol(String),
    #[error("boundary symbol `{0}` cannot be an alphabet symbol")]
    BoundaryInAlphabet(String),
    #[error("alphabet symbols must be non-empty and whitespace-free, got `{0}`")]
    BadSymbol(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("input already contains the boundary symbol")]
    BoundaryInInput,
    #[error("requested {requested} symbols from a string of length {len}")]
    OutOfRange { requested: usize, len: usize },
    #[error("tier symbol `{0}` is not in the alphabet")]
    TierNotInAlphabet(String),
}

/// Interned symbol. `Sym::BOUNDARY` is reserved; alphabet symbols start at 1
/// in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sym(pub u16);

impl Sym {
    pub const BOUNDARY: Sym = Sym(0);

    pub fn is_boundary(self) -> bool {
        self == Sym::BOUNDARY
    }
}

/// Finite ordered symbol inventory plus a reserved boundary token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "AlphabetDoc", into = "AlphabetDoc")]
pub struct Alphabet {
    symbols: Vec<String>,
    boundary: String,
    index: HashMap<String, Sym>,
}

#[derive(Serialize, Deserialize)]
struct AlphabetDoc {
    symbols: Vec<String>,
    #[serde(default = "default_boundary")]
    boundary: String,
}

fn default_boundary() -> String {
    DEFAULT_BOUNDARY.to_string()
}

impl TryFrom<AlphabetDoc> for Alphabet {
    type Error = StringError;

    fn try_from(doc: AlphabetDoc) -> Result<Self, Self::Error> {
        Alphabet::with_boundary(doc.symbols, doc.boundary)
    }
}

impl From<Alphabet> for AlphabetDoc {
    fn from(a: Alphabet) -> Self {
        AlphabetDoc { symbols: a.symbols, boundary: a.boundary }
    }
}

impl Alphabet {
    pub fn new<I, S>(symbols: I) -> Result<Self, StringError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_boundary(symbols, DEFAULT_BOUNDARY)
    }

    pub fn with_boundary<I, S>(symbols: I, boundary: impl Into<String>) -> Result<Self, StringError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let boundary = boundary.into();
        if boundary.is_empty() || boundary.chars().any(char::is_whitespace) {
            return Err(StringError::BadSymbol(boundary));
        }
        let mut index = HashMap::new();
        index.insert(boundary.clone(), Sym::BOUNDARY);
        let mut out = Vec::new();
        for s in symbols {
            let s: String = s.into();
            if s.is_empty() || s.chars().any(char::is_whitespace) {
                return Err(StringError::BadSymbol(s));
            }
            if s == boundary {
                return Err(StringError::BoundaryInAlphabet(s));
            }
            if index.contains_key(&s) {
                return Err(StringError::DuplicateSymbol(s));
            }
            let id = u16::try_from(out.len() + 1).map_err(|_| StringError::BadSymbol(s.clone()))?;
            index.insert(s.clone(), Sym(id));
            out.push(s);
        }
        Ok(Alphabet { symbols: out, boundary, index })
    }

    /// Single-character alphabet from the characters of `chars`.
    pub fn from_chars(chars: &str) -> Result<Self, StringError> {
        Self::new(chars.chars().map(String::from))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol_names(&self) -> &[String] {
        &self.symbols
    }

    pub fn boundary(&self) -> &str {
        &self.boundary
    }

    /// Alphabet symbols in declaration order.
    pub fn syms(&self) -> impl Iterator<Item = Sym> + Clone + '_ {
        (1..=self.symbols.len()).map(|i| Sym(i as u16))
    }

    /// Boundary followed by the alphabet symbols: the extended alphabet in
    /// feature order.
    pub fn extended(&self) -> Vec<Sym> {
        std::iter::once(Sym::BOUNDARY).chain(self.syms()).collect()
    }

    pub fn sym(&self, name: &str) -> Option<Sym> {
        self.index.get(name).copied()
    }

    pub fn name(&self, sym: Sym) -> &str {
        if sym.is_boundary() {
            &self.boundary
        } else {
            &self.symbols[sym.0 as usize - 1]
        }
    }

    pub fn contains(&self, sym: Sym) -> bool {
        (sym.0 as usize) <= self.symbols.len()
    }

    /// True when every token (boundary included) is a single character, in
    /// which case strings are written without separators.
    pub fn is_single_char(&self) -> bool {
        self.boundary.chars().count() == 1 && self.symbols.iter().all(|s| s.chars().count() == 1)
    }

    /// Parses a token string. Single-character alphabets read one token per
    /// character unless the text contains whitespace; otherwise tokens are
    /// whitespace separated. The boundary token is accepted.
    pub fn parse(&self, text: &str) -> Result<Str, StringError> {
        let lookup = |tok: &str| self.sym(tok).ok_or_else(|| StringError::UnknownSymbol(tok.to_string()));
        let syms = if self.is_single_char() && !text.contains(char::is_whitespace) {
            let mut buf = [0u8; 4];
            text.chars().map(|c| lookup(c.encode_utf8(&mut buf))).collect::<Result<Vec<_>, _>>()?
        } else {
            text.split_whitespace().map(lookup).collect::<Result<Vec<_>, _>>()?
        };
        Ok(Str(syms))
    }

    /// Parses a string that must not contain the boundary symbol.
    pub fn parse_word(&self, text: &str) -> Result<Str, StringError> {
        let s = self.parse(text)?;
        if s.has_boundary() {
            return Err(StringError::BoundaryInInput);
        }
        Ok(s)
    }

    pub fn render(&self, syms: &[Sym]) -> String {
        let sep = if self.is_single_char() { "" } else { " " };
        syms.iter().map(|&s| self.name(s)).collect::<Vec<_>>().join(sep)
    }
}

/// A sequence of interned symbols.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Str(pub Vec<Sym>);

impl Str {
    pub fn new(syms: Vec<Sym>) -> Self {
        Str(syms)
    }

    pub fn has_boundary(&self) -> bool {
        self.0.iter().any(|s| s.is_boundary())
    }

    pub fn into_inner(self) -> Vec<Sym> {
        self.0
    }
}

impl Deref for Str {
    type Target = [Sym];

    fn deref(&self) -> &[Sym] {
        &self.0
    }
}

impl AsRef<[Sym]> for Str {
    fn as_ref(&self) -> &[Sym] {
        &self.0
    }
}

impl From<Vec<Sym>> for Str {
    fn from(v: Vec<Sym>) -> Self {
        Str(v)
    }
}

/// Subset of the alphabet retained by tier projection.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tier(BTreeSet<Sym>);

impl Tier {
    pub fn new<I, S>(alphabet: &Alphabet, members: I) -> Result<Self, StringError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        members
            .into_iter()
            .map(|m| {
                let m = m.as_ref();
                match alphabet.sym(m) {
                    Some(s) if !s.is_boundary() => Ok(s),
                    _ => Err(StringError::TierNotInAlphabet(m.to_string())),
                }
            })
            .collect::<Result<BTreeSet<_>, _>>()
            .map(Tier)
    }

    pub fn from_syms(members: impl IntoIterator<Item = Sym>) -> Self {
        Tier(members.into_iter().filter(|s| !s.is_boundary()).collect())
    }

    pub fn contains(&self, sym: Sym) -> bool {
        self.0.contains(&sym)
    }

    pub fn members(&self) -> impl Iterator<Item = Sym> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self, alphabet: &Alphabet) -> Vec<String> {
        self.0.iter().map(|&s| alphabet.name(s).to_string()).collect()
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.0.iter().map(|s| s.0.to_string()).collect();
        write!(f, "{{{}}}", ids.join(","))
    }
}

/// `#^k · x · #^k`.
pub fn pad(x: &[Sym], k: usize) -> Result<Str, StringError> {
    if x.iter().any(|s| s.is_boundary()) {
        return Err(StringError::BoundaryInInput);
    }
    let mut out = Vec::with_capacity(x.len() + 2 * k);
    out.extend(std::iter::repeat_n(Sym::BOUNDARY, k));
    out.extend_from_slice(x);
    out.extend(std::iter::repeat_n(Sym::BOUNDARY, k));
    Ok(Str(out))
}

/// Padding for inputs already known to be boundary-free.
pub(crate) fn pad_unchecked(x: &[Sym], k: usize) -> Vec<Sym> {
    let mut out = Vec::with_capacity(x.len() + 2 * k);
    out.extend(std::iter::repeat_n(Sym::BOUNDARY, k));
    out.extend_from_slice(x);
    out.extend(std::iter::repeat_n(Sym::BOUNDARY, k));
    out
}

/// True iff `g` occurs contiguously in `s`. The empty pattern occurs everywhere.
pub fn contains_substring(s: &[Sym], g: &[Sym]) -> bool {
    g.is_empty() || (g.len() <= s.len() && s.windows(g.len()).any(|w| w == g))
}

/// True iff `h` embeds order-preservingly in `s`.
pub fn contains_subsequence(s: &[Sym], h: &[Sym]) -> bool {
    let mut rest = h.iter().peekable();
    for sym in s {
        match rest.peek() {
            None => break,
            Some(&&want) if want == *sym => {
                rest.next();
            }
            Some(_) => {}
        }
    }
    rest.peek().is_none()
}

/// Number of (possibly overlapping) start positions of `g` in `s`.
/// The empty pattern is counted at each of the `|s| + 1` positions.
pub fn count_occurrences(s: &[Sym], g: &[Sym]) -> usize {
    if g.is_empty() {
        return s.len() + 1;
    }
    if g.len() > s.len() {
        return 0;
    }
    s.windows(g.len()).filter(|w| *w == g).count()
}

/// Erases every symbol outside the tier; boundary symbols are kept.
pub fn project_tier(s: &[Sym], tier: &Tier) -> Str {
    Str(s.iter().copied().filter(|&c| c.is_boundary() || tier.contains(c)).collect())
}

pub fn prefix(s: &[Sym], n: usize) -> Result<Str, StringError> {
    if n > s.len() {
        return Err(StringError::OutOfRange { requested: n, len: s.len() });
    }
    Ok(Str(s[..n].to_vec()))
}

pub fn suffix(s: &[Sym], n: usize) -> Result<Str, StringError> {
    if n > s.len() {
        return Err(StringError::OutOfRange { requested: n, len: s.len() });
    }
    Ok(Str(s[s.len() - n..].to_vec()))
}
