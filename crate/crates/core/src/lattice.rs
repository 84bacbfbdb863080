//! Lattice indices, observed windows and cluster shapes.
//!
//! A [`ClusterShape`] is the finite-support representative of a class of
//! shift-equivalent arrays. Shapes are always stored in canonical form: the
//! first maximum of `|x|` in lexicographic order sits at the origin. Two arrays
//! that differ only by a translation therefore canonicalize to equal values.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

/// A point of `Z^d`. The derived `Ord` is the lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<i64>);

impl MultiIndex {
    pub fn new(coords: Vec<i64>) -> Self {
        assert!(
            !coords.is_empty(),
            "multi-index needs at least one coordinate"
        );
        MultiIndex(coords)
    }

    pub fn origin(dim: usize) -> Self {
        MultiIndex::new(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Chebyshev norm `max_k |i_k|`.
    pub fn cheb(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() == dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim(),
            })
        }
    }

    /// `self + other`; both indices must share a dimension.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self - other`; both indices must share a dimension.
    pub fn sub(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> MultiIndex {
        MultiIndex(self.0.iter().map(|c| -c).collect())
    }
}

impl From<Vec<i64>> for MultiIndex {
    fn from(v: Vec<i64>) -> Self {
        MultiIndex::new(v)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Lexicographic comparison of two indices of the same dimension.
pub fn lex_compare(a: &MultiIndex, b: &MultiIndex) -> Result<Ordering> {
    b.check_dim(a.dim())?;
    Ok(a.0.cmp(&b.0))
}

/// All indices `j` with `|j|_inf <= radius`, in lexicographic order.
pub fn cheb_ball(dim: usize, radius: i64) -> Vec<MultiIndex> {
    let lo = vec![-radius; dim];
    let hi = vec![radius; dim];
    box_points(&lo, &hi)
}

/// All lattice points of the box `lo <= i <= hi` (componentwise), in
/// lexicographic order.
pub fn box_points(lo: &[i64], hi: &[i64]) -> Vec<MultiIndex> {
    debug_assert_eq!(lo.len(), hi.len());
    if lo.iter().zip(hi).any(|(l, h)| l > h) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = lo.to_vec();
    loop {
        out.push(MultiIndex(cur.clone()));
        let mut axis = cur.len();
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if cur[axis] < hi[axis] {
                cur[axis] += 1;
                cur[axis + 1..].copy_from_slice(&lo[axis + 1..]);
                break;
            }
        }
    }
}

/// A dense field observed on `{1..n_1} x ... x {1..n_d}`.
///
/// Values are stored row-major with the last axis fastest, so linear order
/// coincides with the lexicographic order of positions.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeWindow {
    extent: Vec<usize>,
    strides: Vec<usize>,
    values: Vec<f64>,
}

impl LatticeWindow {
    pub fn new(extent: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if extent.is_empty() {
            return Err(Error::InvalidWindow("dimension must be at least 1".into()));
        }
        if extent.contains(&0) {
            return Err(Error::InvalidWindow("every axis needs extent >= 1".into()));
        }
        let len: usize = extent.iter().product();
        if values.len() != len {
            return Err(Error::InvalidWindow(format!(
                "expected {len} values, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidWindow(format!(
                "non-finite value at linear index {pos}"
            )));
        }
        let strides = strides_for(&extent);
        Ok(LatticeWindow {
            extent,
            strides,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.extent.len()
    }

    pub fn extent(&self) -> &[usize] {
        &self.extent
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Whether the 1-based position lies inside the window.
    pub fn contains(&self, pos: &MultiIndex) -> bool {
        pos.dim() == self.dim()
            && pos
                .coords()
                .iter()
                .zip(&self.extent)
                .all(|(&c, &n)| c >= 1 && c <= n as i64)
    }

    /// Linear offset of a 1-based position, if inside the window.
    pub fn linear(&self, pos: &MultiIndex) -> Option<usize> {
        if !self.contains(pos) {
            return None;
        }
        Some(
            pos.coords()
                .iter()
                .zip(&self.strides)
                .map(|(&c, &s)| (c as usize - 1) * s)
                .sum(),
        )
    }

    /// 1-based position of a linear offset.
    pub fn position(&self, mut lin: usize) -> MultiIndex {
        let mut coords = vec![0i64; self.dim()];
        for (axis, &s) in self.strides.iter().enumerate() {
            coords[axis] = (lin / s) as i64 + 1;
            lin %= s;
        }
        MultiIndex(coords)
    }

    pub fn get(&self, pos: &MultiIndex) -> Option<f64> {
        self.linear(pos).map(|l| self.values[l])
    }

    /// Signed linear displacement of a lattice offset (no bounds check).
    pub fn linear_offset(&self, offset: &MultiIndex) -> isize {
        offset
            .coords()
            .iter()
            .zip(&self.strides)
            .map(|(&c, &s)| c as isize * s as isize)
            .sum()
    }

    /// Whether `pos + j` stays inside the window for every `j` with
    /// `lo <= j <= hi` componentwise.
    pub fn box_inside(&self, pos: &MultiIndex, lo: &[i64], hi: &[i64]) -> bool {
        pos.coords()
            .iter()
            .zip(&self.extent)
            .zip(lo.iter().zip(hi))
            .all(|((&c, &n), (&l, &h))| c + l >= 1 && c + h <= n as i64)
    }
}

pub(crate) fn strides_for(extent: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; extent.len()];
    for axis in (0..extent.len().saturating_sub(1)).rev() {
        strides[axis] = strides[axis + 1] * extent[axis + 1];
    }
    strides
}

/// Canonical finite-support representative of a shift-equivalence class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterShape {
    dim: usize,
    support: BTreeMap<MultiIndex, f64>,
    anchor: MultiIndex,
    norm: f64,
}

impl ClusterShape {
    /// Canonicalizes sparse entries. Zero values are dropped from the support.
    pub fn canonicalize<I>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut raw = BTreeMap::new();
        for (idx, v) in entries {
            idx.check_dim(dim)?;
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite value at {idx}")));
            }
            if v == 0.0 {
                continue;
            }
            if raw.insert(idx.clone(), v).is_some() {
                return Err(Error::DuplicateIndex(idx.to_string()));
            }
        }
        Self::from_sorted(dim, raw)
    }

    /// Canonicalizes a dense row-major array placed with its first element at
    /// `offset`. The offset does not affect the result.
    pub fn canonicalize_dense(
        values: &[f64],
        extent: &[usize],
        offset: &MultiIndex,
    ) -> Result<Self> {
        offset.check_dim(extent.len())?;
        let len: usize = extent.iter().product();
        if values.len() != len {
            return Err(Error::InvalidArgument(format!(
                "expected {len} values, got {}",
                values.len()
            )));
        }
        let strides = strides_for(extent);
        let entries = values.iter().enumerate().map(|(lin, &v)| {
            let mut rem = lin;
            let coords = strides
                .iter()
                .zip(offset.coords())
                .map(|(&s, &o)| {
                    let c = (rem / s) as i64;
                    rem %= s;
                    c + o
                })
                .collect();
            (MultiIndex(coords), v)
        });
        Self::canonicalize(extent.len(), entries)
    }

    fn from_sorted(dim: usize, raw: BTreeMap<MultiIndex, f64>) -> Result<Self> {
        let mut best: Option<(&MultiIndex, f64)> = None;
        for (idx, v) in &raw {
            let a = v.abs();
            // strict comparison keeps the lexicographically least maximizer
            if best.is_none_or(|(_, m)| a > m) {
                best = Some((idx, a));
            }
        }
        let (anchor, norm) = match best {
            Some((idx, m)) if m > 0.0 => (idx.clone(), m),
            _ => return Err(Error::DegenerateCluster),
        };
        let support = if anchor.is_origin() {
            raw
        } else {
            raw.into_iter()
                .map(|(idx, v)| (idx.sub(&anchor), v))
                .collect()
        };
        Ok(ClusterShape {
            dim,
            support,
            anchor: MultiIndex::origin(dim),
            norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &BTreeMap<MultiIndex, f64> {
        &self.support
    }

    pub fn anchor(&self) -> &MultiIndex {
        &self.anchor
    }

    /// Uniform norm `max |x_i|`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn value(&self, idx: &MultiIndex) -> f64 {
        self.support.get(idx).copied().unwrap_or(0.0)
    }

    /// Number of entries with `|x_i| > t`.
    pub fn count_above(&self, t: f64) -> usize {
        self.support.values().filter(|v| v.abs() > t).count()
    }

    /// The shape multiplied by a nonzero constant.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::canonicalize(
            self.dim,
            self.support.iter().map(|(i, v)| (i.clone(), v * c)),
        )
    }

    /// Keeps entries with `|x_i| > t`, the truncation that defines the
    /// test-function family; `None` when nothing survives.
    pub fn truncated_below(&self, t: f64) -> Option<Self> {
        let kept: BTreeMap<_, _> = self
            .support
            .iter()
            .filter(|(_, v)| v.abs() > t)
            .map(|(i, v)| (i.clone(), *v))
            .collect();
        Self::from_sorted(self.dim, kept).ok()
    }

    /// Largest Chebyshev spread of the support along any axis.
    pub fn diameter(&self) -> i64 {
        (0..self.dim)
            .map(|axis| {
                let lo = self
                    .support
                    .keys()
                    .map(|i| i.coords()[axis])
                    .min()
                    .unwrap_or(0);
                let hi = self
                    .support
                    .keys()
                    .map(|i| i.coords()[axis])
                    .max()
                    .unwrap_or(0);
                hi - lo
            })
            .max()
            .unwrap_or(0)
    }

    /// Text form: a `d=<d> anchor=origin` header, then one `i1 .. id value`
    /// line per support point in lexicographic order.
    pub fn to_text(&self) -> String {
        let mut out = format!("d={} anchor=origin\n", self.dim);
        for (idx, v) in &self.support {
            for c in idx.coords() {
                out.push_str(&c.to_string());
                out.push(' ');
            }
            out.push_str(&format!("{v}\n"));
        }
        out
    }

    /// Parses [`ClusterShape::to_text`] output. Blank lines and lines starting
    /// with `#` are ignored. The entries must already be canonical.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 0,
            msg: "missing header".into(),
        })?;
        let dim = parse_header(header).map_err(|msg| Error::Parse { line: hline, msg })?;
        let mut raw = BTreeMap::new();
        for (line, l) in lines {
            let fields: Vec<&str> = l.split_whitespace().collect();
            if fields.len() != dim + 1 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} fields, found {}", dim + 1, fields.len()),
                });
            }
            let coords = fields[..dim]
                .iter()
                .map(|f| f.parse::<i64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line,
                    msg: format!("bad index: {e}"),
                })?;
            let v: f64 = fields[dim].parse().map_err(|e| Error::Parse {
                line,
                msg: format!("bad value: {e}"),
            })?;
            if !v.is_finite() || v == 0.0 {
                return Err(Error::Parse {
                    line,
                    msg: "values must be finite and nonzero".into(),
                });
            }
            let idx = MultiIndex(coords);
            if raw.insert(idx.clone(), v).is_some() {
                return Err(Error::DuplicateIndex(idx.to_string()));
            }
        }
        if !raw.contains_key(&MultiIndex::origin(dim)) {
            return Err(Error::NotCanonical("origin is not in the support".into()));
        }
        let shape = Self::from_sorted(dim, raw.clone())?;
        if shape.support != raw {
            return Err(Error::NotCanonical(
                "origin is not the first maximum".into(),
            ));
        }
        Ok(shape)
    }
}

fn parse_header(header: &str) -> std::result::Result<usize, String> {
    let mut dim = None;
    let mut anchored = false;
    for tok in header.split_whitespace() {
        if let Some(d) = tok.strip_prefix("d=") {
            let d: usize = d.parse().map_err(|e| format!("bad dimension: {e}"))?;
            if d == 0 || d > 64 {
                return Err(format!("dimension {d} out of range"));
            }
            dim = Some(d);
        } else if tok == "anchor=origin" {
            anchored = true;
        } else {
            return Err(format!("unexpected header token {tok:?}"));
        }
    }
    if !anchored {
        return Err("header must declare anchor=origin".into());
    }
    dim.ok_or_else(|| "header must declare d=<dim>".into())
}

/// Sup-norm distance between `a` and translates of `b`, minimized over
/// translations `|k|_inf <= radius`.
///
/// Translations under which the supports are disjoint all give
/// `max(|a|, |b|)`; that value is always attainable by a far translation and
/// is included, so the result is an upper bound on the quotient metric and
/// exact once `radius` covers every overlapping translation.
pub fn shift_distance(a: &ClusterShape, b: &ClusterShape, radius: i64) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    let mut best = a.norm.max(b.norm);
    let mut shifts = BTreeSet::new();
    for i in a.support.keys() {
        for j in b.support.keys() {
            let k = j.sub(i);
            if k.cheb() <= radius {
                shifts.insert(k);
            }
        }
    }
    for k in &shifts {
        let mut d: f64 = 0.0;
        for (i, va) in &a.support {
            d = d.max((va - b.value(&i.add(k))).abs());
            if d >= best {
                break;
            }
        }
        if d < best {
            for (j, vb) in &b.support {
                if !a.support.contains_key(&j.sub(k)) {
                    d = d.max(vb.abs());
                }
            }
        }
        best = best.min(d);
    }
    Ok(best)
}
