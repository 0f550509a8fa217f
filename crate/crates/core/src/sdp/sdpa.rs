//! SDPA sparse problem files and solution vectors.
//!
//! SDPA states problems as `min c^T y  s.t.  sum_i y_i F_i - F_0 PSD`, so the
//! constant matrix is written negated. Equalities `a^T y = b` are written as
//! the pair `a^T y - b >= 0`, `-a^T y + b >= 0` in a trailing LP block that a
//! leading comment marks, which lets [`parse_sdpa`] restore them exactly.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::{BlockKind, LmiBlock, LmiStandardForm, SdpError, SymSparse};

const EQUALITY_MARKER: &str = "*momentvv equalities";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `form` as an SDPA sparse problem. Entries are ordered by matrix
/// number, then block, row and column.
pub fn export_sdpa(form: &LmiStandardForm) -> String {
    let m = form.eq_rows.len();
    let nblocks = form.blocks.len() + usize::from(m > 0);
    let mut out = String::new();
    if m > 0 {
        let _ = writeln!(out, "{EQUALITY_MARKER} {nblocks} {m}");
    }
    let _ = writeln!(out, "{}", form.num_vars);
    let _ = writeln!(out, "{nblocks}");
    let mut sizes: Vec<String> = form
        .blocks
        .iter()
        .map(|b| match b.kind {
            BlockKind::Dense => b.size.to_string(),
            BlockKind::Diag => format!("-{}", b.size),
        })
        .collect();
    if m > 0 {
        sizes.push(format!("-{}", 2 * m));
    }
    let _ = writeln!(out, "{}", sizes.join(" "));
    let _ = writeln!(out, "{}", form.cost.iter().map(|&c| num(c)).collect::<Vec<_>>().join(" "));

    // matno -> entries (block, i, j, value), 1-based block and indices
    let mut by_mat: BTreeMap<usize, Vec<(usize, usize, usize, f64)>> = BTreeMap::new();
    for (k, b) in form.blocks.iter().enumerate() {
        for &(i, j, v) in &b.constant.entries {
            by_mat.entry(0).or_default().push((k + 1, i + 1, j + 1, -v));
        }
        for (var, f) in &b.coeffs {
            for &(i, j, v) in &f.entries {
                by_mat.entry(var + 1).or_default().push((k + 1, i + 1, j + 1, v));
            }
        }
    }
    let eq_blk = form.blocks.len() + 1;
    for (r, (row, &rhs)) in form.eq_rows.iter().zip(&form.eq_rhs).enumerate() {
        if rhs != 0.0 {
            by_mat.entry(0).or_default().push((eq_blk, 2 * r + 1, 2 * r + 1, rhs));
            by_mat.entry(0).or_default().push((eq_blk, 2 * r + 2, 2 * r + 2, -rhs));
        }
        for &(var, c) in row {
            if c != 0.0 {
                by_mat.entry(var + 1).or_default().push((eq_blk, 2 * r + 1, 2 * r + 1, c));
                by_mat.entry(var + 1).or_default().push((eq_blk, 2 * r + 2, 2 * r + 2, -c));
            }
        }
    }
    for (matno, mut entries) in by_mat {
        entries.sort_by_key(|e| (e.0, e.1, e.2));
        for (blk, i, j, v) in entries {
            let _ = writeln!(out, "{matno} {blk} {i} {j} {}", num(v));
        }
    }
    out
}

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str), SdpError> {
        let t = self.items.get(self.pos).copied().ok_or_else(|| SdpError::Parse {
            line: self.last_line,
            msg: format!("unexpected end of file, expected {what}"),
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn next_usize(&mut self, what: &str) -> Result<usize, SdpError> {
        let (line, t) = self.next(what)?;
        t.parse().map_err(|_| SdpError::Parse {
            line,
            msg: format!("expected {what}, found `{t}`"),
        })
    }

    /// Header lines may carry trailing labels such as `= mDIM`.
    fn skip_line(&mut self) {
        if let Some(&(line, _)) = self.items.get(self.pos.saturating_sub(1)) {
            while self.items.get(self.pos).is_some_and(|t| t.0 == line) {
                self.pos += 1;
            }
        }
    }

    fn next_i64(&mut self, what: &str) -> Result<(usize, i64), SdpError> {
        let (line, t) = self.next(what)?;
        let v = t.parse().map_err(|_| SdpError::Parse {
            line,
            msg: format!("expected {what}, found `{t}`"),
        })?;
        Ok((line, v))
    }

    fn next_f64(&mut self, what: &str) -> Result<f64, SdpError> {
        let (line, t) = self.next(what)?;
        parse_f64(t).ok_or_else(|| SdpError::Parse {
            line,
            msg: format!("expected {what}, found `{t}`"),
        })
    }
}

fn parse_f64(t: &str) -> Option<f64> {
    // Fortran-style exponents appear in some SDPA writers.
    t.replace(['D', 'd'], "e").parse().ok()
}

fn is_separator(c: char) -> bool {
    c.is_whitespace() || matches!(c, ',' | '{' | '}' | '(' | ')')
}

/// Parses an SDPA sparse problem. A leading equality marker written by
/// [`export_sdpa`] turns the marked LP block back into equality rows.
pub fn parse_sdpa(text: &str) -> Result<LmiStandardForm, SdpError> {
    let mut marker: Option<(usize, usize, usize)> = None;
    let mut items = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let trimmed = raw.trim_start();
        if let Some(rest) = trimmed.strip_prefix(EQUALITY_MARKER) {
            let nums: Vec<usize> = rest.split_whitespace().filter_map(|t| t.parse().ok()).collect();
            if nums.len() != 2 {
                return Err(SdpError::Parse {
                    line,
                    msg: "equality marker needs a block number and a row count".into(),
                });
            }
            marker = Some((nums[0], nums[1], line));
            continue;
        }
        if trimmed.starts_with('*') || trimmed.starts_with('"') {
            continue;
        }
        items.extend(raw.split(is_separator).filter(|t| !t.is_empty()).map(|t| (line, t)));
    }
    let mut tk = Tokens {
        items,
        pos: 0,
        last_line,
    };
    let n = tk.next_usize("number of variables")?;
    tk.skip_line();
    let nblocks = tk.next_usize("number of blocks")?;
    tk.skip_line();
    let mut kinds = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        let (line, s) = tk.next_i64("block size")?;
        if s == 0 {
            return Err(SdpError::Parse {
                line,
                msg: "block size must be nonzero".into(),
            });
        }
        let kind = if s < 0 { BlockKind::Diag } else { BlockKind::Dense };
        kinds.push((kind, s.unsigned_abs() as usize));
    }
    let cost = (0..n).map(|_| tk.next_f64("objective coefficient")).collect::<Result<Vec<_>, _>>()?;

    let eq_block = match marker {
        Some((blk, rows, line)) => {
            if blk == 0 || blk > nblocks || kinds[blk - 1] != (BlockKind::Diag, 2 * rows) {
                return Err(SdpError::Parse {
                    line,
                    msg: format!("equality marker does not match block {blk}"),
                });
            }
            Some(blk)
        }
        None => None,
    };
    let mut eq_rows: Vec<BTreeMap<usize, f64>> = match marker {
        Some((_, rows, _)) => vec![BTreeMap::new(); rows],
        None => Vec::new(),
    };
    let mut eq_rhs = vec![0.0; eq_rows.len()];
    let mut constants: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); nblocks];
    let mut coeffs: Vec<BTreeMap<usize, Vec<(usize, usize, f64)>>> = vec![BTreeMap::new(); nblocks];

    while tk.pos < tk.items.len() {
        let (line, _) = tk.items[tk.pos];
        let matno = tk.next_usize("matrix number")?;
        let blk = tk.next_usize("block number")?;
        let i = tk.next_usize("row index")?;
        let j = tk.next_usize("column index")?;
        let v = tk.next_f64("entry value")?;
        let bad = |msg: String| SdpError::Parse { line, msg };
        if matno > n {
            return Err(bad(format!("matrix number {matno} exceeds {n} variables")));
        }
        if blk == 0 || blk > nblocks {
            return Err(bad(format!("block {blk} out of range")));
        }
        let (kind, size) = kinds[blk - 1];
        if i == 0 || j == 0 || i > size || j > size {
            return Err(bad(format!("index ({i}, {j}) outside block {blk} of size {size}")));
        }
        if kind == BlockKind::Diag && i != j {
            return Err(bad(format!("off-diagonal entry in LP block {blk}")));
        }
        let (i, j) = if i <= j { (i - 1, j - 1) } else { (j - 1, i - 1) };
        if Some(blk) == eq_block {
            // Only the first row of each pair is needed; the second is its negation.
            if i % 2 == 0 {
                let r = i / 2;
                if matno == 0 {
                    eq_rhs[r] = v;
                } else {
                    eq_rows[r].insert(matno - 1, v);
                }
            }
            continue;
        }
        if matno == 0 {
            constants[blk - 1].push((i, j, -v));
        } else {
            coeffs[blk - 1].entry(matno - 1).or_default().push((i, j, v));
        }
    }

    let blocks = (0..nblocks)
        .filter(|&k| Some(k + 1) != eq_block)
        .map(|k| {
            let (kind, size) = kinds[k];
            LmiBlock::new(
                kind,
                size,
                SymSparse::new(std::mem::take(&mut constants[k])),
                std::mem::take(&mut coeffs[k])
                    .into_iter()
                    .map(|(v, e)| (v, SymSparse::new(e)))
                    .collect(),
            )
        })
        .collect();
    let mut form = LmiStandardForm {
        num_vars: n,
        cost,
        eq_rows: eq_rows.into_iter().map(|r| r.into_iter().collect()).collect(),
        eq_rhs,
        blocks,
    };
    form.canonicalize();
    form.validate()?;
    Ok(form)
}

/// Reads a solution vector, either from an `xVec = {...}` section of an SDPA
/// result file or from a bare list of numbers.
pub fn import_sdpa_solution(text: &str, dim: usize) -> Result<Vec<f64>, SdpError> {
    let mut values = Vec::new();
    let mut in_xvec = false;
    let mut open = false;
    let mut closed = false;
    let has_xvec = text.contains("xVec");
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let trimmed = raw.trim();
        if trimmed.starts_with('*') || trimmed.starts_with('"') || trimmed.starts_with('#') {
            continue;
        }
        let mut body = trimmed;
        if has_xvec {
            if closed {
                break;
            }
            if !in_xvec {
                match body.find("xVec") {
                    Some(p) => {
                        in_xvec = true;
                        body = body[p + 4..].trim_start().trim_start_matches('=');
                    }
                    None => continue,
                }
            }
        }
        for (pos, ch) in body.char_indices() {
            if ch == '{' {
                open = true;
            }
            if ch == '}' {
                closed = true;
                body = &body[..pos];
                break;
            }
        }
        for tok in body.split(is_separator).filter(|t| !t.is_empty()) {
            let v = parse_f64(tok).ok_or_else(|| SdpError::Parse {
                line,
                msg: format!("expected a number, found `{tok}`"),
            })?;
            values.push(v);
        }
    }
    if open && !closed {
        return Err(SdpError::Parse {
            line: last_line,
            msg: "unterminated vector: missing `}`".into(),
        });
    }
    if has_xvec && !in_xvec {
        return Err(SdpError::Parse {
            line: last_line,
            msg: "no xVec section".into(),
        });
    }
    if values.len() != dim {
        return Err(SdpError::DimensionMismatch {
            expected: dim,
            found: values.len(),
        });
    }
    Ok(values)
}
