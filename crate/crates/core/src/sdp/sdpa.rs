//! SDPA sparse format (`.dat-s`).
//!
//! SDPA's primal constraint is `Σ_i F_i x_i − F_0 ⪰ 0`. A block `F₀ + Σ θ_j F_j + sI ⪯ 0`
//! maps to SDPA `F_0 = F₀ + sI` and `F_j = −F_j` with a zero objective. Box bounds are
//! written as one trailing diagonal (LP) block. Names, bounds, strictness and exact
//! constants travel in `*%` comment lines so that re-import reproduces the problem.

use std::collections::BTreeMap;
use std::io::Write;

use super::problem::{Block, SymSparse};
use super::solver::{evaluate_solution, SdpSolution};
use super::{SdpError, SdpProblem, Strictness, VariableGroup};

const META: &str = "*%";

fn bound_token(b: Option<f64>) -> String {
    b.map_or_else(|| "-".to_string(), |v| format!("{v:?}"))
}

/// `(row, col, value)`, 1-based.
type Triplet = (usize, usize, f64);

/// Writes the problem to `sink`.
pub fn write_sdpa<W: Write>(problem: &SdpProblem, sink: &mut W) -> Result<(), SdpError> {
    problem.validate()?;
    let margin = problem.strict_margin();
    let mut out = String::new();
    out.push_str("\"feasibility problem: find x with sum_i F_i x_i - F_0 PSD (zero objective)\n");
    out.push_str(&format!("{META} margin {margin:?}\n"));
    for (j, v) in problem.variables().iter().enumerate() {
        if v.name.chars().any(char::is_whitespace) || v.name.is_empty() {
            return Err(SdpError::MalformedProblem(format!("variable {j} has a name that cannot be exported")));
        }
        out.push_str(&format!("{META} var {} {} {} {}\n", j + 1, v.name, bound_token(v.lower), bound_token(v.upper)));
    }
    for g in problem.groups() {
        let kind = if g.symmetric { "sym" } else { "full" };
        out.push_str(&format!("{META} group {} {} {} {} {}\n", g.name, g.rows, g.cols, kind, g.offset));
    }

    // Shifted constants are exported; where the shift does not round-trip exactly the
    // original value is recorded as an override.
    let mut overrides = Vec::new();
    let mut constants = Vec::new();
    for (b, block) in problem.blocks().iter().enumerate() {
        let kind = match block.strictness() {
            Strictness::Strict => "strict",
            Strictness::NonStrict => "nonstrict",
        };
        out.push_str(&format!("{META} block {} {kind}\n", b + 1));
        let shift = problem.shift(b);
        let mut shifted: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, v) in block.constant().entries() {
            shifted.insert((i, j), v);
        }
        if shift != 0.0 {
            for i in 0..block.size() {
                *shifted.entry((i, i)).or_insert(0.0) += shift;
            }
        }
        for (&(i, j), &v) in &shifted {
            let original = block.constant().entries().iter().find(|e| e.0 == i && e.1 == j).map_or(0.0, |e| e.2);
            let recovered = if i == j { v - shift } else { v };
            if recovered != original {
                overrides.push(format!("{META} f0 {} {} {} {original:?}\n", b + 1, i + 1, j + 1));
            }
        }
        constants.push(shifted);
    }
    let bounded: Vec<(usize, bool, f64)> = problem
        .variables()
        .iter()
        .enumerate()
        .flat_map(|(j, v)| {
            let lower = v.lower.filter(|l| l.is_finite()).map(|l| (j, false, l));
            let upper = v.upper.filter(|u| u.is_finite()).map(|u| (j, true, u));
            lower.into_iter().chain(upper)
        })
        .collect();
    let mut nblock = problem.blocks().len();
    if !bounded.is_empty() {
        nblock += 1;
        out.push_str(&format!("{META} bounds {nblock}\n"));
    }
    for o in overrides {
        out.push_str(&o);
    }

    let m = problem.num_variables();
    out.push_str(&format!("{m} = mDIM\n{nblock} = nBLOCK\n"));
    let mut sizes: Vec<String> = problem.blocks().iter().map(|b| b.size().to_string()).collect();
    if !bounded.is_empty() {
        sizes.push(format!("-{}", bounded.len()));
    }
    out.push_str(&sizes.join(" "));
    out.push('\n');
    out.push_str(&vec!["0"; m].join(" "));
    out.push('\n');

    let mut entries: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
    for (b, shifted) in constants.iter().enumerate() {
        for (&(i, j), &v) in shifted {
            if v != 0.0 {
                entries.push((0, b + 1, i + 1, j + 1, v));
            }
        }
    }
    for (b, block) in problem.blocks().iter().enumerate() {
        for (var, coef) in block.terms() {
            for &(i, j, v) in coef.entries() {
                entries.push((var + 1, b + 1, i + 1, j + 1, -v));
            }
        }
    }
    for (row, &(j, is_upper, value)) in bounded.iter().enumerate() {
        let r = row + 1;
        if is_upper {
            // u − θ ≥ 0.
            entries.push((j + 1, nblock, r, r, -1.0));
            if value != 0.0 {
                entries.push((0, nblock, r, r, -value));
            }
        } else {
            // θ − l ≥ 0.
            entries.push((j + 1, nblock, r, r, 1.0));
            if value != 0.0 {
                entries.push((0, nblock, r, r, value));
            }
        }
    }
    entries.sort_by_key(|e| (e.0, e.1, e.2, e.3));
    for (mat, blk, i, j, v) in entries {
        out.push_str(&format!("{mat} {blk} {i} {j} {v:?}\n"));
    }
    sink.write_all(out.as_bytes())?;
    Ok(())
}

pub fn export_sdpa(problem: &SdpProblem) -> Result<String, SdpError> {
    let mut buf = Vec::new();
    write_sdpa(problem, &mut buf)?;
    Ok(String::from_utf8(buf).expect("exporter writes UTF-8"))
}

#[derive(Debug, Clone)]
struct Token {
    text: String,
    line: usize,
    column: usize,
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> SdpError {
    SdpError::ParseFailure { line, column, message: message.into() }
}

/// Splits on whitespace and the SDPA punctuation `{ } ( ) ,`, keeping 1-based positions.
fn tokenize(line_no: usize, line: &str, tokens: &mut Vec<Token>) {
    let mut start = None;
    for (idx, ch) in line.char_indices().chain(std::iter::once((line.len(), ' '))) {
        let separator = ch.is_whitespace() || matches!(ch, '{' | '}' | '(' | ')' | ',' | '=');
        match (separator, start) {
            (true, Some(s)) => {
                tokens.push(Token { text: line[s..idx].to_string(), line: line_no, column: line[..s].chars().count() + 1 });
                start = None;
            }
            (false, None) => start = Some(idx),
            _ => {}
        }
    }
}

struct Cursor {
    tokens: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Cursor {
    fn next(&mut self, what: &str) -> Result<Token, SdpError> {
        let t = self.tokens.get(self.pos).cloned().ok_or_else(|| {
            parse_error(self.end.0, self.end.1, format!("unexpected end of input, expected {what}"))
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn int(&mut self, what: &str) -> Result<(i64, Token), SdpError> {
        let t = self.next(what)?;
        let v = parse_int(&t).ok_or_else(|| parse_error(t.line, t.column, format!("expected {what}, found {:?}", t.text)))?;
        Ok((v, t))
    }

    fn float(&mut self, what: &str) -> Result<f64, SdpError> {
        let t = self.next(what)?;
        parse_float(&t.text).ok_or_else(|| parse_error(t.line, t.column, format!("expected {what}, found {:?}", t.text)))
    }

    /// Skips a trailing word such as `mDIM` after a header number.
    fn skip_word(&mut self) {
        if self.tokens.get(self.pos).is_some_and(|t| t.text.chars().all(char::is_alphabetic)) {
            self.pos += 1;
        }
    }
}

fn parse_int(t: &Token) -> Option<i64> {
    t.text.parse::<i64>().ok().or_else(|| {
        let f = t.text.parse::<f64>().ok()?;
        (f.fract() == 0.0 && f.abs() < 1e15).then_some(f as i64)
    })
}

fn parse_float(s: &str) -> Option<f64> {
    // Fortran-style exponents appear in some SDPA files.
    s.replace(['d', 'D'], "e").parse::<f64>().ok().filter(|v| v.is_finite())
}

#[derive(Default)]
struct Metadata {
    margin: Option<f64>,
    vars: BTreeMap<usize, (String, Option<f64>, Option<f64>)>,
    groups: Vec<VariableGroup>,
    strictness: BTreeMap<usize, Strictness>,
    bounds_block: Option<usize>,
    overrides: Vec<(usize, usize, usize, f64)>,
}

fn parse_bound(s: &str) -> Option<Option<f64>> {
    if s == "-" {
        Some(None)
    } else {
        s.parse::<f64>().ok().map(Some)
    }
}

fn parse_meta(line_no: usize, body: &str, meta: &mut Metadata) -> Result<(), SdpError> {
    let fields: Vec<&str> = body.split_whitespace().collect();
    let bad = || parse_error(line_no, 1, format!("malformed metadata line {body:?}"));
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
    match fields.as_slice() {
        ["margin", v] => meta.margin = Some(v.parse().map_err(|_| bad())?),
        ["var", idx, name, lo, hi] => {
            let lo = parse_bound(lo).ok_or_else(bad)?;
            let hi = parse_bound(hi).ok_or_else(bad)?;
            meta.vars.insert(num(idx)?, (name.to_string(), lo, hi));
        }
        ["group", name, rows, cols, kind, offset] => meta.groups.push(VariableGroup {
            name: name.to_string(),
            rows: num(rows)?,
            cols: num(cols)?,
            symmetric: match *kind {
                "sym" => true,
                "full" => false,
                _ => return Err(bad()),
            },
            offset: num(offset)?,
        }),
        ["block", b, kind] => {
            let s = match *kind {
                "strict" => Strictness::Strict,
                "nonstrict" => Strictness::NonStrict,
                _ => return Err(bad()),
            };
            meta.strictness.insert(num(b)?, s);
        }
        ["bounds", b] => meta.bounds_block = Some(num(b)?),
        ["f0", b, i, j, v] => meta.overrides.push((num(b)?, num(i)?, num(j)?, v.parse().map_err(|_| bad())?)),
        _ => return Err(bad()),
    }
    Ok(())
}

/// Parses SDPA sparse text. Files without `*%` metadata import as non-strict blocks with
/// zero margin; diagonal blocks become one 1×1 block per diagonal entry.
pub fn import_sdpa(text: &str) -> Result<SdpProblem, SdpError> {
    let mut meta = Metadata::default();
    let mut tokens = Vec::new();
    let mut in_header = true;
    let mut last = (1, 1);
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim_start();
        if in_header && (trimmed.starts_with('"') || trimmed.starts_with('*')) {
            if let Some(body) = trimmed.strip_prefix(META) {
                parse_meta(line_no, body, &mut meta)?;
            }
            continue;
        }
        in_header = false;
        tokenize(line_no, line, &mut tokens);
        last = (line_no, line.chars().count() + 1);
    }
    let mut cur = Cursor { tokens, pos: 0, end: last };

    let (m, t) = cur.int("mDIM")?;
    if m < 0 {
        return Err(parse_error(t.line, t.column, "mDIM must be nonnegative"));
    }
    cur.skip_word();
    let (nblock, t) = cur.int("nBLOCK")?;
    if nblock < 0 {
        return Err(parse_error(t.line, t.column, "nBLOCK must be nonnegative"));
    }
    cur.skip_word();
    let mut sizes = Vec::new();
    for _ in 0..nblock {
        let (s, t) = cur.int("block size")?;
        if s == 0 {
            return Err(parse_error(t.line, t.column, "block size 0"));
        }
        sizes.push(s);
    }
    cur.skip_word();
    let m = m as usize;
    for _ in 0..m {
        cur.float("objective coefficient")?;
    }

    // (mat, blk) -> triplets in SDPA sign convention.
    let mut raw: BTreeMap<(usize, usize), Vec<Triplet>> = BTreeMap::new();
    while cur.pos < cur.tokens.len() {
        let (mat, tm) = cur.int("matrix number")?;
        let (blk, tb) = cur.int("block number")?;
        let (i, ti) = cur.int("row index")?;
        let (j, tj) = cur.int("column index")?;
        let v = cur.float("entry value")?;
        if mat < 0 || mat as usize > m {
            return Err(parse_error(tm.line, tm.column, format!("matrix number {mat} outside 0..={m}")));
        }
        if blk < 1 || blk > nblock {
            return Err(parse_error(tb.line, tb.column, format!("block number {blk} outside 1..={nblock}")));
        }
        let size = sizes[blk as usize - 1].unsigned_abs() as i64;
        if i < 1 || i > size {
            return Err(parse_error(ti.line, ti.column, format!("row {i} outside block of size {size}")));
        }
        if j < 1 || j > size {
            return Err(parse_error(tj.line, tj.column, format!("column {j} outside block of size {size}")));
        }
        if sizes[blk as usize - 1] < 0 && i != j {
            return Err(parse_error(ti.line, ti.column, "off-diagonal entry in a diagonal block"));
        }
        raw.entry((mat as usize, blk as usize)).or_default().push((i as usize - 1, j as usize - 1, v));
    }

    let margin = meta.margin.unwrap_or(0.0);
    let mut problem = SdpProblem::new(margin);
    for j in 0..m {
        let (name, lower, upper) = meta.vars.remove(&(j + 1)).unwrap_or_else(|| (format!("x{}", j + 1), None, None));
        problem.add_variable(name);
        problem.set_bounds(j, lower, upper)?;
    }
    for g in meta.groups {
        problem.push_group(g);
    }

    let take = |raw: &BTreeMap<(usize, usize), Vec<Triplet>>, mat: usize, blk: usize| {
        raw.get(&(mat, blk)).cloned().unwrap_or_default()
    };
    for (b, &size) in sizes.iter().enumerate() {
        let blk = b + 1;
        if meta.bounds_block == Some(blk) {
            continue;
        }
        let strictness = meta.strictness.get(&blk).copied().unwrap_or(Strictness::NonStrict);
        let shift = if strictness == Strictness::Strict { margin } else { 0.0 };
        let to_block = |size: usize, f0: Vec<Triplet>, terms: Vec<(usize, Vec<Triplet>)>| {
            let mut constant: Vec<Triplet> =
                f0.into_iter().map(|(i, j, v)| if i == j { (i, j, v - shift) } else { (i, j, v) }).collect();
            for &(ob, oi, oj, ov) in &meta.overrides {
                if ob == blk {
                    constant.push((oi - 1, oj - 1, ov));
                }
            }
            let constant = SymSparse::from_entries(size, constant)?;
            let mut block_terms = Vec::new();
            for (var, entries) in terms {
                let coef = SymSparse::from_entries(size, entries.into_iter().map(|(i, j, v)| (i, j, -v)))?;
                if !coef.is_empty() {
                    block_terms.push((var, coef));
                }
            }
            Ok::<Block, SdpError>(Block { size, strictness, constant, terms: block_terms })
        };
        if size > 0 {
            let size = size as usize;
            let terms = (1..=m).map(|mat| (mat - 1, take(&raw, mat, blk))).collect();
            problem.push_block(to_block(size, take(&raw, 0, blk), terms)?);
        } else {
            for d in 0..size.unsigned_abs() as usize {
                let pick = |mat: usize| -> Vec<(usize, usize, f64)> {
                    take(&raw, mat, blk).into_iter().filter(|e| e.0 == d).map(|(_, _, v)| (0, 0, v)).collect()
                };
                let terms = (1..=m).map(|mat| (mat - 1, pick(mat))).collect();
                problem.push_block(to_block(1, pick(0), terms)?);
            }
        }
    }

    if let Some(bb) = meta.bounds_block {
        let rows = sizes.get(bb - 1).map_or(0, |s| s.unsigned_abs() as usize);
        for r in 0..rows {
            let constant = take(&raw, 0, bb).into_iter().find(|e| e.0 == r).map_or(0.0, |e| e.2);
            let owner = (1..=m).find_map(|mat| {
                take(&raw, mat, bb).into_iter().find(|e| e.0 == r).map(|e| (mat - 1, e.2))
            });
            let Some((var, coef)) = owner else {
                return Err(parse_error(1, 1, format!("bounds row {} names no variable", r + 1)));
            };
            let v = &mut problem.variables[var];
            if coef > 0.0 {
                v.lower = Some(constant);
            } else {
                v.upper = Some(-constant);
            }
        }
    }
    problem.validate()?;
    Ok(problem)
}

/// Reads a primal vector for `problem` and re-derives the status from local residuals.
///
/// Accepts SDPA output (the `xVec` entry) or a bare list of numbers separated by
/// whitespace or commas. Any status reported by the external solver is ignored.
pub fn import_sdpa_solution(problem: &SdpProblem, text: &str) -> Result<SdpSolution, SdpError> {
    let m = problem.num_variables();
    let mut tokens = Vec::new();
    let mut last = (1, 1);
    let mut started = !text.contains("xVec");
    let mut braces_open = false;
    'lines: for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut slice = line;
        let mut offset = 0;
        if !started {
            match line.find("xVec") {
                Some(p) => {
                    started = true;
                    offset = p + 4;
                    slice = &line[offset..];
                }
                None => continue,
            }
        }
        last = (line_no, line.chars().count() + 1);
        if text.contains("xVec") {
            if let Some(open) = slice.find('{') {
                braces_open = true;
                let _ = open;
            }
            if braces_open {
                if let Some(close) = slice.find('}') {
                    let mut local = Vec::new();
                    tokenize(line_no, &slice[..close], &mut local);
                    shift_columns(&mut local, line, offset);
                    tokens.extend(local);
                    break 'lines;
                }
            }
        }
        let mut local = Vec::new();
        tokenize(line_no, slice, &mut local);
        shift_columns(&mut local, line, offset);
        tokens.extend(local);
    }
    let mut theta = Vec::with_capacity(m);
    for t in &tokens {
        if theta.len() == m {
            return Err(parse_error(t.line, t.column, format!("more than {m} values")));
        }
        let v = parse_float(&t.text)
            .ok_or_else(|| parse_error(t.line, t.column, format!("expected a number, found {:?}", t.text)))?;
        theta.push(v);
    }
    if theta.len() < m {
        return Err(parse_error(last.0, last.1, format!("expected {m} values, found {}", theta.len())));
    }
    Ok(evaluate_solution(problem, theta, 1e-9, 0))
}

fn shift_columns(tokens: &mut [Token], line: &str, byte_offset: usize) {
    let extra = line[..byte_offset].chars().count();
    for t in tokens {
        t.column += extra;
    }
}
