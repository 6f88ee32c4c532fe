//! Delta-contraction sums for Haar moments.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;

use super::perm::{all_perms, compose, cycle_type, inverse, Perm};
use super::poly::SymbolicRational;
use super::{wg_unitary, MAX_ORDER};
use crate::error::{Error, Result};
use crate::hilbert::CMatrix;

/// An index slot of a matrix element: a concrete value, or a named index
/// summed over the whole space (every occurrence of a name is the same index).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Index {
    Fixed(u64),
    Sum(String),
}

impl Index {
    pub fn sum(name: &str) -> Self {
        Index::Sum(name.to_string())
    }
}

/// One matrix element `M[row, col]` in a moment, where `M` is `U` or `U^dagger`.
/// In the block case `sector` names the charge block both indices live in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WiringFactor {
    pub row: Index,
    pub col: Index,
    pub sector: Option<usize>,
}

impl WiringFactor {
    pub fn new(row: Index, col: Index) -> Self {
        Self { row, col, sector: None }
    }

    pub fn fixed(row: u64, col: u64) -> Self {
        Self::new(Index::Fixed(row), Index::Fixed(col))
    }

    pub fn in_sector(mut self, q: usize) -> Self {
        self.sector = Some(q);
        self
    }
}

/// The moment `E[ prod_k U[u_k] prod_m U^dagger[ud_m] ]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WiringSpec {
    pub u: Vec<WiringFactor>,
    pub ud: Vec<WiringFactor>,
}

impl WiringSpec {
    pub fn new(u: Vec<WiringFactor>, ud: Vec<WiringFactor>) -> Self {
        Self { u, ud }
    }

    pub fn is_balanced(&self) -> bool {
        self.u.len() == self.ud.len()
    }

    /// Monte Carlo integrand for one sampled unitary.
    pub fn integrand(&self, u: &CMatrix, assignment: &HashMap<String, usize>) -> Complex64 {
        let idx = |i: &Index| match i {
            Index::Fixed(v) => *v as usize,
            Index::Sum(n) => assignment[n],
        };
        let mut v = Complex64::new(1.0, 0.0);
        for f in &self.u {
            v *= u[(idx(&f.row), idx(&f.col))];
        }
        for f in &self.ud {
            v *= u[(idx(&f.col), idx(&f.row))].conj();
        }
        v
    }

    /// Names of summed indices, sorted.
    pub fn summed_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .u
            .iter()
            .chain(&self.ud)
            .flat_map(|f| [&f.row, &f.col])
            .filter_map(|i| match i {
                Index::Sum(n) => Some(n.clone()),
                Index::Fixed(_) => None,
            })
            .collect();
        names.sort();
        names.dedup();
        names
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }
}

/// Exact value of the wiring's Haar moment as a rational function of the
/// dimension `L`, by the double permutation sum over Weingarten functions.
/// Fixed index values are assumed to be smaller than `L`.
pub fn haar_moment(w: &WiringSpec) -> Result<SymbolicRational> {
    if !w.is_balanced() {
        return Ok(SymbolicRational::zero());
    }
    let p = w.u.len();
    if p > MAX_ORDER {
        return Err(Error::Unsupported(format!("moment order {p} exceeds {MAX_ORDER}")));
    }
    let mut nodes: BTreeMap<Index, usize> = BTreeMap::new();
    let mut node_of = |i: &Index| {
        let n = nodes.len();
        *nodes.entry(i.clone()).or_insert(n)
    };
    let u_rows: Vec<usize> = w.u.iter().map(|f| node_of(&f.row)).collect();
    let u_cols: Vec<usize> = w.u.iter().map(|f| node_of(&f.col)).collect();
    let ud_rows: Vec<usize> = w.ud.iter().map(|f| node_of(&f.row)).collect();
    let ud_cols: Vec<usize> = w.ud.iter().map(|f| node_of(&f.col)).collect();
    let constant: Vec<Option<u64>> = {
        let mut c = vec![None; nodes.len()];
        for (idx, &n) in &nodes {
            if let Index::Fixed(v) = idx {
                c[n] = Some(*v);
            }
        }
        c
    };

    let perms = all_perms(p);
    let mut tally: BTreeMap<(Vec<usize>, u32), i128> = BTreeMap::new();
    for alpha in &perms {
        let alpha_inv = inverse(alpha);
        for beta in &perms {
            let mut uf = UnionFind::new(constant.len());
            for k in 0..p {
                uf.union(u_rows[k], ud_cols[alpha[k]]);
                uf.union(u_cols[k], ud_rows[beta[k]]);
            }
            let mut comp_const: HashMap<usize, Option<u64>> = HashMap::new();
            let mut vanishes = false;
            for (n, c) in constant.iter().enumerate() {
                let r = uf.find(n);
                let entry = comp_const.entry(r).or_insert(None);
                if let Some(v) = c {
                    match entry {
                        Some(existing) if existing != v => vanishes = true,
                        _ => *entry = Some(*v),
                    }
                }
            }
            if vanishes {
                continue;
            }
            let free = comp_const.values().filter(|c| c.is_none()).count() as u32;
            let ct = cycle_type(&compose(&alpha_inv, beta));
            *tally.entry((ct, free)).or_insert(0) += 1;
        }
    }
    let mut total = SymbolicRational::zero();
    for ((ct, free), count) in tally {
        let term = &(&wg_unitary(&ct)? * &SymbolicRational::symbol_pow(free as usize)) * &SymbolicRational::constant(count);
        total = &total + &term;
    }
    Ok(total)
}

/// Product over charge sectors of per-sector Haar moments. Each factor is a
/// rational function of its own sector dimension `d_q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMoment {
    pub factors: Vec<(usize, SymbolicRational)>,
    pub zero: bool,
}

impl BlockMoment {
    pub fn eval(&self, dims: &[usize]) -> Result<f64> {
        if self.zero {
            return Ok(0.0);
        }
        let mut v = 1.0;
        for (q, r) in &self.factors {
            let d = *dims
                .get(*q)
                .ok_or_else(|| Error::Domain(format!("no dimension supplied for sector {q}")))?;
            v *= r.eval_f64(d as f64)?;
        }
        Ok(v)
    }
}

impl fmt::Display for BlockMoment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.zero {
            return f.write_str("0");
        }
        if self.factors.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<String> = self.factors.iter().map(|(q, r)| format!("[{}]", r.fmt_in(&format!("d{q}")))).collect();
        f.write_str(&parts.join(" * "))
    }
}

/// Moment over the U(1)-symmetric Haar ensemble: blocks are independent, so
/// the integral factorizes into per-sector Haar moments.
pub fn u1_haar_moment(w: &WiringSpec) -> Result<BlockMoment> {
    let zero = BlockMoment { factors: Vec::new(), zero: true };
    let mut by_sector: BTreeMap<usize, WiringSpec> = BTreeMap::new();
    let mut label_sector: HashMap<String, usize> = HashMap::new();
    for (is_dag, f) in w.u.iter().map(|f| (false, f)).chain(w.ud.iter().map(|f| (true, f))) {
        let q = f.sector.ok_or_else(|| Error::Domain("every factor of a block moment needs a sector label".into()))?;
        for idx in [&f.row, &f.col] {
            if let Index::Sum(name) = idx {
                if *label_sector.entry(name.clone()).or_insert(q) != q {
                    // one index cannot lie in two different sectors
                    return Ok(zero);
                }
            }
        }
        let spec = by_sector.entry(q).or_default();
        if is_dag {
            spec.ud.push(f.clone());
        } else {
            spec.u.push(f.clone());
        }
    }
    let mut factors = Vec::new();
    for (q, spec) in by_sector {
        if !spec.is_balanced() {
            return Ok(zero);
        }
        let r = haar_moment(&spec)?;
        if r.is_zero() {
            return Ok(zero);
        }
        factors.push((q, r));
    }
    Ok(BlockMoment { factors, zero: false })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WordItem {
    Op(String),
    U,
    Ud,
}

/// One term of an operator-word moment: `coefficient * open * prod Tr(trace)`.
/// `open` is `None` for a traced word; an empty product stands for the identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorTerm {
    pub coefficient: SymbolicRational,
    pub open: Option<Vec<String>>,
    pub traces: Vec<Vec<String>>,
}

fn canonical_rotation(word: &[String]) -> Vec<String> {
    (0..word.len().max(1))
        .map(|s| word[s..].iter().chain(&word[..s]).cloned().collect::<Vec<_>>())
        .min()
        .unwrap_or_default()
}

impl OperatorTerm {
    fn product(names: &[String], ops: &HashMap<String, CMatrix>, d: usize) -> Result<CMatrix> {
        let mut m = CMatrix::identity(d, d);
        for n in names {
            let o = ops.get(n).ok_or_else(|| Error::Domain(format!("operator '{n}' not supplied")))?;
            if o.nrows() != d || o.ncols() != d {
                return Err(Error::Domain(format!("operator '{n}' is not {d}x{d}")));
            }
            m *= o;
        }
        Ok(m)
    }

    /// Numeric value for concrete operators of dimension `d`. Traced words
    /// yield a `1x1` matrix.
    pub fn evaluate(&self, ops: &HashMap<String, CMatrix>, d: usize) -> Result<CMatrix> {
        let c = self.coefficient.eval_f64(d as f64)?;
        let mut scalar = Complex64::new(c, 0.0);
        for t in &self.traces {
            scalar *= Self::product(t, ops, d)?.trace();
        }
        Ok(match &self.open {
            Some(names) => Self::product(names, ops, d)? * scalar,
            None => CMatrix::from_element(1, 1, scalar),
        })
    }

    pub fn monomial(&self) -> String {
        let mut parts = Vec::new();
        if let Some(open) = &self.open {
            parts.push(if open.is_empty() { "1".to_string() } else { open.join(".") });
        }
        for t in &self.traces {
            parts.push(format!("Tr[{}]", t.join(".")));
        }
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join(" ")
        }
    }
}

/// Sum of evaluated terms.
pub fn evaluate_terms(terms: &[OperatorTerm], ops: &HashMap<String, CMatrix>, d: usize, traced: bool) -> Result<CMatrix> {
    let n = if traced { 1 } else { d };
    let mut acc = CMatrix::zeros(n, n);
    for t in terms {
        acc += t.evaluate(ops, d)?;
    }
    Ok(acc)
}

/// Render terms with the dimension symbol `d`.
pub fn format_terms(terms: &[OperatorTerm]) -> String {
    if terms.is_empty() {
        return "0".to_string();
    }
    terms
        .iter()
        .map(|t| format!("({}) {}", t.coefficient.fmt_in("d"), t.monomial()))
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Haar average of a word such as `X1 U Y1 U^dagger X2 U Y2 U^dagger`, or of
/// its trace, as a sum of operator monomials with rational coefficients.
pub fn operator_moment(word: &[WordItem], traced: bool) -> Result<Vec<OperatorTerm>> {
    // slots O_0 .. O_n between the unitaries
    let mut slots: Vec<Vec<String>> = vec![Vec::new()];
    let mut kinds: Vec<bool> = Vec::new(); // true for U, false for U^dagger
    for item in word {
        match item {
            WordItem::Op(name) => slots.last_mut().unwrap().push(name.clone()),
            WordItem::U => {
                kinds.push(true);
                slots.push(Vec::new());
            }
            WordItem::Ud => {
                kinds.push(false);
                slots.push(Vec::new());
            }
        }
    }
    let n = kinds.len();
    let u_pos: Vec<usize> = (0..n).filter(|&t| kinds[t]).map(|t| t + 1).collect();
    let ud_pos: Vec<usize> = (0..n).filter(|&t| !kinds[t]).map(|t| t + 1).collect();
    if u_pos.len() != ud_pos.len() {
        return Ok(Vec::new());
    }
    let p = u_pos.len();
    if p > MAX_ORDER {
        return Err(Error::Unsupported(format!("moment order {p} exceeds {MAX_ORDER}")));
    }
    let mut u_index = vec![0usize; n + 1];
    let mut ud_index = vec![0usize; n + 1];
    for (k, &t) in u_pos.iter().enumerate() {
        u_index[t] = k;
    }
    for (m, &s) in ud_pos.iter().enumerate() {
        ud_index[s] = m;
    }

    let perms = all_perms(p);
    let mut acc: BTreeMap<(Option<Vec<String>>, Vec<Vec<String>>), SymbolicRational> = BTreeMap::new();
    for alpha in &perms {
        for beta in &perms {
            let beta_inv: Perm = inverse(beta);
            let mut succ: Vec<Option<usize>> = vec![None; n + 1];
            for t in 1..=n {
                succ[t - 1] = Some(if kinds[t - 1] {
                    ud_pos[alpha[u_index[t]]]
                } else {
                    u_pos[beta_inv[ud_index[t]]]
                });
            }
            if traced {
                succ[n] = Some(0);
            }
            let mut seen = vec![false; n + 1];
            let open = if traced {
                None
            } else {
                let mut chain = Vec::new();
                let mut j = 0;
                loop {
                    seen[j] = true;
                    chain.extend(slots[j].iter().cloned());
                    match succ[j] {
                        Some(next) => j = next,
                        None => break,
                    }
                }
                Some(chain)
            };
            let mut traces = Vec::new();
            let mut empty_traces = 0usize;
            for start in 0..=n {
                if seen[start] {
                    continue;
                }
                let mut cyc = Vec::new();
                let mut j = start;
                while !seen[j] {
                    seen[j] = true;
                    cyc.extend(slots[j].iter().cloned());
                    j = succ[j].expect("every slot in a cycle has a successor");
                }
                if cyc.is_empty() {
                    empty_traces += 1;
                } else {
                    traces.push(canonical_rotation(&cyc));
                }
            }
            traces.sort();
            let ct = cycle_type(&compose(&inverse(alpha), beta));
            let coeff = &wg_unitary(&ct)? * &SymbolicRational::symbol_pow(empty_traces);
            let slot = acc.entry((open, traces)).or_insert_with(SymbolicRational::zero);
            *slot = &*slot + &coeff;
        }
    }
    Ok(acc
        .into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|((open, traces), coefficient)| OperatorTerm { coefficient, open, traces })
        .collect())
}

/// Parse a word description. Two forms are accepted:
///
/// * the list form `{1,2,1,2}` (1 = U, 2 = U^dagger), optionally followed by
///   `ops {X1,Y1,X2,Y2}` naming the operator placed before each unitary and by
///   the keyword `trace`; without `ops`, the operator before the i-th `U` is
///   `Xi` and the one before the i-th `U^dagger` is `Yi`;
/// * an explicit word `X1 U Y1 Ud X2 U Y2 Ud`, with `Tr( ... )` for a trace.
pub fn parse_word(text: &str) -> Result<(Vec<WordItem>, bool)> {
    let text = text.trim();
    let lists = braces(text)?;
    if let Some(first) = lists.first() {
        let codes: Vec<u32> = first
            .iter()
            .map(|s| s.parse::<u32>().map_err(|_| Error::Parse(format!("bad unitary code '{s}'"))))
            .collect::<Result<_>>()?;
        let names: Vec<String> = match lists.get(1) {
            Some(ops) if ops.len() == codes.len() => ops.clone(),
            Some(ops) => {
                return Err(Error::Parse(format!("{} operators given for {} unitaries", ops.len(), codes.len())))
            }
            None => {
                let (mut nu, mut nd) = (0, 0);
                codes
                    .iter()
                    .map(|&c| {
                        if c == 1 {
                            nu += 1;
                            format!("X{nu}")
                        } else {
                            nd += 1;
                            format!("Y{nd}")
                        }
                    })
                    .collect()
            }
        };
        let mut word = Vec::new();
        for (c, name) in codes.iter().zip(names) {
            word.push(WordItem::Op(name));
            word.push(match c {
                1 => WordItem::U,
                2 => WordItem::Ud,
                other => return Err(Error::Unsupported(format!("unitary code {other}: only 1 (U) and 2 (U^dagger)"))),
            });
        }
        let traced = text.split(|c: char| !c.is_alphanumeric()).any(|w| w.eq_ignore_ascii_case("trace") || w == "True");
        return Ok((word, traced));
    }
    let (body, traced) = match text.strip_prefix("Tr(").and_then(|s| s.strip_suffix(')')) {
        Some(inner) => (inner, true),
        None => (text, false),
    };
    let word = body
        .split(|c: char| c.is_whitespace() || c == '.' || c == '*')
        .filter(|s| !s.is_empty())
        .map(|tok| match tok {
            "U" => WordItem::U,
            "Ud" | "U†" | "U^dagger" | "Udag" => WordItem::Ud,
            other => WordItem::Op(other.to_string()),
        })
        .collect();
    Ok((word, traced))
}

fn braces(text: &str) -> Result<Vec<Vec<String>>> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find('{') {
        let end = rest[start..].find('}').ok_or_else(|| Error::Parse("unbalanced '{'".into()))? + start;
        out.push(rest[start + 1..end].split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect());
        rest = &rest[end + 1..];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn first_moment_is_delta_over_l() {
        let w = |i, j, k, l| WiringSpec::new(vec![WiringFactor::fixed(i, j)], vec![WiringFactor::fixed(k, l)]);
        // E U_ij (U^dagger)_kl = delta_il delta_jk / L
        assert_eq!(haar_moment(&w(0, 1, 1, 0)).unwrap().to_string(), "1/L");
        assert!(haar_moment(&w(0, 1, 0, 0)).unwrap().is_zero());
        let unbalanced = WiringSpec::new(vec![WiringFactor::fixed(0, 0)], vec![]);
        assert!(haar_moment(&unbalanced).unwrap().is_zero());
    }

    #[test]
    fn trace_moments() {
        // |Tr U|^2 = 1, |Tr U|^4 = 2 for L >= 2
        let a = Index::sum("a");
        let b = Index::sum("b");
        let w2 = WiringSpec::new(vec![WiringFactor::new(a.clone(), a.clone())], vec![WiringFactor::new(b.clone(), b.clone())]);
        assert_eq!(haar_moment(&w2).unwrap(), SymbolicRational::one());
        let (c, e) = (Index::sum("c"), Index::sum("e"));
        let w4 = WiringSpec::new(
            vec![WiringFactor::new(a.clone(), a), WiringFactor::new(b.clone(), b)],
            vec![WiringFactor::new(c.clone(), c), WiringFactor::new(e.clone(), e)],
        );
        assert_eq!(haar_moment(&w4).unwrap(), SymbolicRational::constant(2));
        // row normalization: sum_a |U_a0|^2 = 1
        let a = Index::sum("a");
        let w = WiringSpec::new(
            vec![WiringFactor::new(a.clone(), Index::Fixed(0))],
            vec![WiringFactor::new(Index::Fixed(0), a)],
        );
        assert_eq!(haar_moment(&w).unwrap(), SymbolicRational::one());
    }

    #[test]
    fn block_moments() {
        let f = |i, j, q| WiringFactor::fixed(i, j).in_sector(q);
        let m = u1_haar_moment(&WiringSpec::new(vec![f(0, 1, 2)], vec![f(1, 0, 2)])).unwrap();
        assert_eq!(m.to_string(), "[1/d2]");
        assert_eq!(m.eval(&[1, 3, 3, 1]).unwrap(), 1.0 / 3.0);
        let cross = u1_haar_moment(&WiringSpec::new(vec![f(0, 1, 1)], vec![f(1, 0, 2)])).unwrap();
        assert!(cross.zero);
        let two = u1_haar_moment(&WiringSpec::new(vec![f(0, 0, 1), f(0, 1, 2)], vec![f(0, 0, 1), f(1, 0, 2)])).unwrap();
        assert_eq!(two.eval(&[1, 4, 6]).unwrap(), 1.0 / 24.0);
    }

    #[test]
    fn appendix_word() {
        let (word, traced) = parse_word("p=2 wiring {1,2,1,2}").unwrap();
        assert!(!traced);
        let terms = operator_moment(&word, traced).unwrap();
        let find = |m: &str| terms.iter().find(|t| t.monomial() == m).map(|t| t.coefficient.clone());
        let at3 = |m: &str| find(m).unwrap().eval_exact(3).unwrap();
        assert_eq!(at3("X1.X2 Tr[Y1] Tr[Y2]"), r(1, 8));
        assert_eq!(at3("X1.X2 Tr[Y1.Y2]"), r(-1, 24));
        assert_eq!(at3("X1 Tr[X2] Tr[Y1] Tr[Y2]"), r(-1, 24));
        assert_eq!(at3("X1 Tr[X2] Tr[Y1.Y2]"), r(1, 8));
        assert_eq!(terms.len(), 4);
        let (w2, t2) = parse_word("X1 U Y1 Ud X2 U Y2 Ud").unwrap();
        assert_eq!((w2, t2), (word, false));
    }

    #[test]
    fn traced_two_point() {
        // (1/L) E Tr(A U^dagger B U) = Tr A Tr B / L^2
        let (word, traced) = parse_word("Tr(A Ud B U)").unwrap();
        let terms = operator_moment(&word, traced).unwrap();
        assert_eq!(terms.len(), 1);
        assert_eq!(terms[0].monomial(), "Tr[A] Tr[B]");
        assert_eq!(terms[0].coefficient.to_string(), "1/L");
    }
}
