//! Line-oriented model files: one model per file plus named cubes,
//! constraints and expressions. `#` starts a comment line, `inf` is the
//! infinity token, all integers are decimal.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rbn_core::asms::{Asms, AsmsCube, AsmsTransition, IoNet, RegOp};
use rbn_core::counting::{Bound, CountingConstraint, Cube};
use rbn_core::expr::NiceExpr;
use rbn_core::model::{Configuration, Rbn, StateId, Transition, TransitionKind};
use rbn_core::protocol::Protocol;

/// A syntax or resolution problem, located by 1-based line and column.
#[derive(Debug)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

fn err<T>(line: usize, col: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        col,
        message: message.into(),
    })
}

#[derive(Debug, Clone)]
pub enum Model {
    Rbn(Rbn),
    Protocol(Protocol),
    Asms(Asms),
    IoNet(IoNet),
}

impl Model {
    pub fn rbn(&self) -> Option<&Rbn> {
        match self {
            Model::Rbn(r) => Some(r),
            Model::Protocol(p) => Some(&p.rbn),
            _ => None,
        }
    }

    pub fn state_names(&self) -> &[String] {
        match self {
            Model::Rbn(r) => r.state_names(),
            Model::Protocol(p) => p.rbn.state_names(),
            Model::Asms(a) => a.state_names(),
            Model::IoNet(n) => n.state_names(),
        }
    }
}

/// A parsed model file: the model plus its named sets.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub name: String,
    pub model: Model,
    pub cubes: BTreeMap<String, Cube>,
    /// Register value per cube, for shared-memory models only.
    pub cube_registers: BTreeMap<String, usize>,
    pub constraints: BTreeMap<String, CountingConstraint>,
    pub exprs: BTreeMap<String, NiceExpr>,
}

impl ModelFile {
    /// A name used as a set of configurations: a cube or a constraint.
    pub fn set(&self, name: &str) -> Option<CountingConstraint> {
        if let Some(c) = self.cubes.get(name) {
            return Some(CountingConstraint::from_cube(c.clone()));
        }
        self.constraints.get(name).cloned()
    }

    /// A name used as an expression: an expression proper, or any set as an
    /// atom.
    pub fn expr(&self, name: &str) -> Option<NiceExpr> {
        if let Some(e) = self.exprs.get(name) {
            return Some(e.clone());
        }
        self.set(name).map(NiceExpr::Atom)
    }

    pub fn asms_cube(&self, name: &str) -> Option<AsmsCube> {
        let cube = self.cubes.get(name)?.clone();
        let register = *self.cube_registers.get(name)?;
        Some(AsmsCube {
            cube,
            register: rbn_core::model::Letter(register),
        })
    }

    /// A configuration given either as `q1=3,q3=1` pairs or as a plain
    /// comma-separated count vector in state order.
    pub fn parse_config(&self, text: &str) -> Result<Configuration, String> {
        let states = self.model.state_names();
        if text.contains('=') {
            let mut counts = vec![0u64; states.len()];
            for part in text.split(',') {
                let part = part.trim();
                if part.is_empty() {
                    continue;
                }
                let (name, n) = part
                    .split_once('=')
                    .ok_or_else(|| format!("expected name=count, got '{}'", part))?;
                let q = states
                    .iter()
                    .position(|s| s == name.trim())
                    .ok_or_else(|| format!("unknown state '{}'", name.trim()))?;
                counts[q] = n
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| format!("bad count '{}'", n.trim()))?;
            }
            Ok(Configuration::new(counts))
        } else {
            let counts: Result<Vec<u64>, _> =
                text.split(',').map(|p| p.trim().parse::<u64>()).collect();
            let counts = counts.map_err(|_| format!("bad count vector '{}'", text))?;
            if counts.len() != states.len() {
                return Err(format!(
                    "expected {} counts, got {}",
                    states.len(),
                    counts.len()
                ));
            }
            Ok(Configuration::new(counts))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Rbn,
    Protocol,
    Asms,
    IoNet,
}

struct Builder {
    kind: Kind,
    name: String,
    states: Vec<String>,
    alphabet: Vec<String>,
    rbn_trans: Vec<Transition>,
    asms_trans: Vec<AsmsTransition>,
    io_trans: Vec<(StateId, StateId, StateId)>,
    inputs: Vec<StateId>,
    output: Vec<Option<u8>>,
    cubes: BTreeMap<String, Cube>,
    cube_registers: BTreeMap<String, usize>,
    constraints: BTreeMap<String, CountingConstraint>,
    exprs: BTreeMap<String, NiceExpr>,
}

impl Builder {
    fn state(&self, name: &str, line: usize, col: usize) -> Result<StateId, ParseError> {
        match self.states.iter().position(|s| s == name) {
            Some(i) => Ok(StateId(i)),
            None => err(line, col, format!("unknown state '{}'", name)),
        }
    }

    fn letter(&self, name: &str, line: usize, col: usize) -> Result<usize, ParseError> {
        match self.alphabet.iter().position(|s| s == name) {
            Some(i) => Ok(i),
            None => err(line, col, format!("unknown letter '{}'", name)),
        }
    }

    fn fresh_name(&self, name: &str, line: usize, col: usize) -> Result<(), ParseError> {
        if self.cubes.contains_key(name)
            || self.constraints.contains_key(name)
            || self.exprs.contains_key(name)
        {
            return err(line, col, format!("duplicate name '{}'", name));
        }
        Ok(())
    }
}

/// Splits a line into whitespace-separated tokens with their 1-based columns.
fn tokens(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut rest = text;
    let mut offset = 0usize;
    while let Some(start) = rest.find(|c: char| !c.is_whitespace()) {
        let after = &rest[start..];
        let len = after
            .find(|c: char| c.is_whitespace())
            .unwrap_or(after.len());
        out.push((offset + start + 1, &after[..len]));
        offset += start + len;
        rest = &after[len..];
    }
    out
}

pub fn parse_model(text: &str) -> Result<ModelFile, ParseError> {
    let mut b: Option<Builder> = None;
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let toks = tokens(line);
        let (col0, word) = toks[0];
        if b.is_none() {
            let kind = match word {
                "rbn" => Kind::Rbn,
                "protocol" => Kind::Protocol,
                "asms" => Kind::Asms,
                "ionet" => Kind::IoNet,
                _ => return err(no, col0, "expected a model header: rbn | protocol | asms | ionet"),
            };
            if toks.len() != 2 {
                return err(no, col0, "header takes exactly one name");
            }
            b = Some(Builder {
                kind,
                name: toks[1].1.to_string(),
                states: Vec::new(),
                alphabet: Vec::new(),
                rbn_trans: Vec::new(),
                asms_trans: Vec::new(),
                io_trans: Vec::new(),
                inputs: Vec::new(),
                output: Vec::new(),
                cubes: BTreeMap::new(),
                cube_registers: BTreeMap::new(),
                constraints: BTreeMap::new(),
                exprs: BTreeMap::new(),
            });
            continue;
        }
        let bu = b.as_mut().unwrap();
        match word {
            "states" => {
                if !bu.states.is_empty() {
                    return err(no, col0, "states declared twice");
                }
                for &(c, t) in &toks[1..] {
                    if bu.states.iter().any(|s| s == t) {
                        return err(no, c, format!("duplicate state '{}'", t));
                    }
                    bu.states.push(t.to_string());
                }
                if bu.states.is_empty() {
                    return err(no, col0, "states line is empty");
                }
                bu.output = vec![None; bu.states.len()];
            }
            "alphabet" => {
                if bu.kind == Kind::IoNet {
                    return err(no, col0, "ionet models take no alphabet");
                }
                if !bu.alphabet.is_empty() {
                    return err(no, col0, "alphabet declared twice");
                }
                for &(c, t) in &toks[1..] {
                    if bu.alphabet.iter().any(|s| s == t) {
                        return err(no, c, format!("duplicate letter '{}'", t));
                    }
                    bu.alphabet.push(t.to_string());
                }
                if bu.alphabet.is_empty() {
                    return err(no, col0, "alphabet line is empty");
                }
            }
            "trans" => parse_trans(bu, no, &toks)?,
            "inputs" => {
                if bu.kind != Kind::Protocol {
                    return err(no, col0, "inputs are only valid in protocol models");
                }
                for &(c, t) in &toks[1..] {
                    let q = bu.state(t, no, c)?;
                    if bu.inputs.contains(&q) {
                        return err(no, c, format!("duplicate input '{}'", t));
                    }
                    bu.inputs.push(q);
                }
            }
            "output" => {
                if bu.kind != Kind::Protocol {
                    return err(no, col0, "outputs are only valid in protocol models");
                }
                for &(c, t) in &toks[1..] {
                    let (name, bit) = match t.split_once('=') {
                        Some(p) => p,
                        None => return err(no, c, "expected state=0 or state=1"),
                    };
                    let q = bu.state(name, no, c)?;
                    let bit = match bit {
                        "0" => 0u8,
                        "1" => 1u8,
                        _ => return err(no, c, "output bit must be 0 or 1"),
                    };
                    if bu.output[q.0].is_some() {
                        return err(no, c, format!("output of '{}' set twice", name));
                    }
                    bu.output[q.0] = Some(bit);
                }
            }
            "cube" => parse_cube(bu, no, line, &toks)?,
            "constraint" => parse_constraint(bu, no, &toks)?,
            "expr" => parse_expr_line(bu, no, line, &toks)?,
            _ => return err(no, col0, format!("unknown directive '{}'", word)),
        }
    }
    let bu = match b {
        Some(bu) => bu,
        None => return err(1, 1, "empty file: expected a model header"),
    };
    if bu.states.is_empty() {
        return err(1, 1, "model declares no states");
    }
    let model = match bu.kind {
        Kind::Rbn | Kind::Protocol => {
            let mut r = Rbn::new(bu.states.clone(), bu.alphabet.clone());
            for t in &bu.rbn_trans {
                r.add_transition(*t)
                    .map_err(|e| ParseError {
                        line: 1,
                        col: 1,
                        message: e.to_string(),
                    })?;
            }
            if bu.kind == Kind::Rbn {
                Model::Rbn(r)
            } else {
                let mut output = Vec::with_capacity(bu.states.len());
                for (q, bit) in bu.output.iter().enumerate() {
                    match bit {
                        Some(v) => output.push(*v),
                        None => {
                            return err(
                                1,
                                1,
                                format!("protocol gives no output for state '{}'", bu.states[q]),
                            )
                        }
                    }
                }
                if bu.inputs.is_empty() {
                    return err(1, 1, "protocol declares no inputs");
                }
                let p = Protocol::new(r, bu.inputs.clone(), output).map_err(|e| ParseError {
                    line: 1,
                    col: 1,
                    message: e.to_string(),
                })?;
                Model::Protocol(p)
            }
        }
        Kind::Asms => {
            let mut a = Asms::new(bu.states.clone(), bu.alphabet.clone());
            for t in &bu.asms_trans {
                a.add_transition(*t).map_err(|e| ParseError {
                    line: 1,
                    col: 1,
                    message: e.to_string(),
                })?;
            }
            Model::Asms(a)
        }
        Kind::IoNet => {
            let mut n = IoNet::new(bu.states.clone());
            for &(p, q, p2) in &bu.io_trans {
                n.add_transition(p, q, p2).map_err(|e| ParseError {
                    line: 1,
                    col: 1,
                    message: e.to_string(),
                })?;
            }
            Model::IoNet(n)
        }
    };
    Ok(ModelFile {
        name: bu.name,
        model,
        cubes: bu.cubes,
        cube_registers: bu.cube_registers,
        constraints: bu.constraints,
        exprs: bu.exprs,
    })
}

fn parse_trans(bu: &mut Builder, no: usize, toks: &[(usize, &str)]) -> Result<(), ParseError> {
    let col0 = toks[0].0;
    match bu.kind {
        Kind::Rbn | Kind::Protocol => {
            // trans q !a q'   |   trans q ?a q'
            if toks.len() != 4 {
                return err(no, col0, "expected: trans <state> !letter|?letter <state>");
            }
            let source = bu.state(toks[1].1, no, toks[1].0)?;
            let (mc, mid) = toks[2];
            let (kind, lname) = if let Some(rest) = mid.strip_prefix('!') {
                (TransitionKind::Broadcast, rest)
            } else if let Some(rest) = mid.strip_prefix('?') {
                (TransitionKind::Receive, rest)
            } else {
                return err(no, mc, "expected !letter or ?letter");
            };
            let letter = bu.letter(lname, no, mc)?;
            let target = bu.state(toks[3].1, no, toks[3].0)?;
            bu.rbn_trans.push(Transition {
                source,
                kind,
                letter: rbn_core::model::Letter(letter),
                target,
            });
        }
        Kind::Asms => {
            // trans p W(x) q   |   trans p R(x) q
            if toks.len() != 4 {
                return err(no, col0, "expected: trans <state> W(x)|R(x) <state>");
            }
            let source = bu.state(toks[1].1, no, toks[1].0)?;
            let (mc, mid) = toks[2];
            let (op, inner) = if let Some(rest) = mid.strip_prefix("W(") {
                (RegOp::Write, rest)
            } else if let Some(rest) = mid.strip_prefix("R(") {
                (RegOp::Read, rest)
            } else {
                return err(no, mc, "expected W(letter) or R(letter)");
            };
            let lname = match inner.strip_suffix(')') {
                Some(l) => l,
                None => return err(no, mc, "missing ')' after register value"),
            };
            let letter = bu.letter(lname, no, mc)?;
            let target = bu.state(toks[3].1, no, toks[3].0)?;
            bu.asms_trans.push(AsmsTransition {
                source,
                op,
                letter: rbn_core::model::Letter(letter),
                target,
            });
        }
        Kind::IoNet => {
            // trans p obs q -> p'
            if toks.len() != 6 || toks[2].1 != "obs" || toks[4].1 != "->" {
                return err(no, col0, "expected: trans <state> obs <state> -> <state>");
            }
            let p = bu.state(toks[1].1, no, toks[1].0)?;
            let q = bu.state(toks[3].1, no, toks[3].0)?;
            let p2 = bu.state(toks[5].1, no, toks[5].0)?;
            bu.io_trans.push((p, q, p2));
        }
    }
    Ok(())
}

/// `cube <name> { q:[lo,hi|inf] ... }`, with `@ <letter>` before the body
/// for shared-memory models. States not mentioned default to [0,0].
fn parse_cube(
    bu: &mut Builder,
    no: usize,
    line: &str,
    toks: &[(usize, &str)],
) -> Result<(), ParseError> {
    let col0 = toks[0].0;
    if bu.states.is_empty() {
        return err(no, col0, "cube before states declaration");
    }
    if toks.len() < 2 {
        return err(no, col0, "cube takes a name");
    }
    let name = toks[1].1.to_string();
    bu.fresh_name(&name, no, toks[1].0)?;
    let mut next = 2;
    if bu.kind == Kind::Asms {
        if toks.len() < 4 || toks[2].1 != "@" {
            return err(no, col0, "shared-memory cubes need '@ <letter>' before the body");
        }
        let reg = bu.letter(toks[3].1, no, toks[3].0)?;
        bu.cube_registers.insert(name.clone(), reg);
        next = 4;
    }
    if next >= toks.len() || toks[next].1 != "{" {
        return err(no, col0, "expected '{' opening the cube body");
    }
    if toks[toks.len() - 1].1 != "}" {
        return err(no, col0, "expected '}' closing the cube body");
    }
    let mut lower = vec![BigUint::from(0u32); bu.states.len()];
    let mut upper = vec![Bound::finite_u64(0); bu.states.len()];
    let mut seen = vec![false; bu.states.len()];
    for &(c, entry) in &toks[next + 1..toks.len() - 1] {
        // q:[lo,hi]
        let (sname, range) = match entry.split_once(':') {
            Some(p) => p,
            None => return err(no, c, format!("expected state:[lo,hi], got '{}'", entry)),
        };
        let q = bu.state(sname, no, c)?;
        if seen[q.0] {
            return err(no, c, format!("state '{}' bounded twice", sname));
        }
        seen[q.0] = true;
        let inner = match range.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            Some(i) => i,
            None => return err(no, c, "bounds must look like [lo,hi] or [lo,inf]"),
        };
        let (lo, hi) = match inner.split_once(',') {
            Some(p) => p,
            None => return err(no, c, "bounds must have two comma-separated entries"),
        };
        lower[q.0] = match lo.parse::<BigUint>() {
            Ok(v) => v,
            Err(_) => return err(no, c, format!("bad lower bound '{}'", lo)),
        };
        upper[q.0] = if hi == "inf" {
            Bound::Infinite
        } else {
            match hi.parse::<BigUint>() {
                Ok(v) => Bound::Finite(v),
                Err(_) => return err(no, c, format!("bad upper bound '{}'", hi)),
            }
        };
    }
    let _ = line;
    bu.cubes.insert(name, Cube::new(lower, upper));
    Ok(())
}

/// `constraint <name> = <cube> | <cube> | ...`
fn parse_constraint(bu: &mut Builder, no: usize, toks: &[(usize, &str)]) -> Result<(), ParseError> {
    let col0 = toks[0].0;
    if toks.len() < 4 || toks[2].1 != "=" {
        return err(no, col0, "expected: constraint <name> = <cube> | <cube> ...");
    }
    let name = toks[1].1.to_string();
    bu.fresh_name(&name, no, toks[1].0)?;
    let mut cubes = Vec::new();
    let mut expect_name = true;
    for &(c, t) in &toks[3..] {
        if expect_name {
            match bu.cubes.get(t) {
                Some(cube) => cubes.push(cube.clone()),
                None => return err(no, c, format!("unknown cube '{}'", t)),
            }
        } else if t != "|" {
            return err(no, c, "cube names must be separated by '|'");
        }
        expect_name = !expect_name;
    }
    if expect_name {
        return err(no, col0, "trailing '|' in constraint");
    }
    bu.constraints
        .insert(name, CountingConstraint::new(bu.states.len(), cubes));
    Ok(())
}

/// `expr <name> = <expression>` with `post*(X)`, `pre*(X)`, `&`, `|`, `!`
/// and parentheses; leaf names are cubes or constraints.
fn parse_expr_line(
    bu: &mut Builder,
    no: usize,
    line: &str,
    toks: &[(usize, &str)],
) -> Result<(), ParseError> {
    let col0 = toks[0].0;
    if toks.len() < 3 || toks[2].1 != "=" {
        return err(no, col0, "expected: expr <name> = <expression>");
    }
    let name = toks[1].1.to_string();
    bu.fresh_name(&name, no, toks[1].0)?;
    let body_col = toks[2].0 + 1;
    let body = &line[toks[2].0..]; // everything after '='
    let ts = expr_tokens(body, no, body_col)?;
    let mut p = ExprParser {
        tokens: ts,
        pos: 0,
        bu,
        line: no,
    };
    let e = p.parse_or()?;
    if p.pos != p.tokens.len() {
        let (c, _) = p.tokens[p.pos];
        return err(no, c, "unexpected trailing input in expression");
    }
    bu.exprs.insert(name, e);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ExprTok<'a> {
    Ident(&'a str),
    PostStar,
    PreStar,
    LParen,
    RParen,
    And,
    Or,
    Not,
}

fn expr_tokens(text: &str, line: usize, col0: usize) -> Result<Vec<(usize, ExprTok<'_>)>, ParseError> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let col = col0 + i;
        if c.is_whitespace() {
            i += 1;
        } else if c == '(' {
            out.push((col, ExprTok::LParen));
            i += 1;
        } else if c == ')' {
            out.push((col, ExprTok::RParen));
            i += 1;
        } else if c == '&' {
            out.push((col, ExprTok::And));
            i += 1;
        } else if c == '|' {
            out.push((col, ExprTok::Or));
            i += 1;
        } else if c == '!' {
            out.push((col, ExprTok::Not));
            i += 1;
        } else if c.is_alphanumeric() || c == '_' {
            let start = i;
            while i < bytes.len() && {
                let ch = bytes[i] as char;
                ch.is_alphanumeric() || ch == '_'
            } {
                i += 1;
            }
            let word = &text[start..i];
            if i < bytes.len() && bytes[i] as char == '*' {
                i += 1;
                match word {
                    "post" => out.push((col, ExprTok::PostStar)),
                    "pre" => out.push((col, ExprTok::PreStar)),
                    _ => return err(line, col, format!("unknown closure operator '{}*'", word)),
                }
            } else {
                out.push((col, ExprTok::Ident(word)));
            }
        } else {
            return err(line, col, format!("unexpected character '{}'", c));
        }
    }
    Ok(out)
}

struct ExprParser<'a, 'b> {
    tokens: Vec<(usize, ExprTok<'a>)>,
    pos: usize,
    bu: &'b Builder,
    line: usize,
}

impl<'a, 'b> ExprParser<'a, 'b> {
    fn peek(&self) -> Option<ExprTok<'a>> {
        self.tokens.get(self.pos).map(|&(_, t)| t)
    }

    fn here(&self) -> usize {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map(|&(c, _)| c)
            .unwrap_or(1)
    }

    fn parse_or(&mut self) -> Result<NiceExpr, ParseError> {
        let mut left = self.parse_and()?;
        while self.peek() == Some(ExprTok::Or) {
            self.pos += 1;
            let right = self.parse_and()?;
            left = NiceExpr::or(left, right);
        }
        Ok(left)
    }

    fn parse_and(&mut self) -> Result<NiceExpr, ParseError> {
        let mut left = self.parse_unary()?;
        while self.peek() == Some(ExprTok::And) {
            self.pos += 1;
            let right = self.parse_unary()?;
            left = NiceExpr::and(left, right);
        }
        Ok(left)
    }

    fn parse_unary(&mut self) -> Result<NiceExpr, ParseError> {
        match self.peek() {
            Some(ExprTok::Not) => {
                self.pos += 1;
                Ok(NiceExpr::not(self.parse_unary()?))
            }
            Some(ExprTok::PostStar) => {
                self.pos += 1;
                Ok(NiceExpr::PostStar(self.parse_set_arg("post*")?))
            }
            Some(ExprTok::PreStar) => {
                self.pos += 1;
                Ok(NiceExpr::PreStar(self.parse_set_arg("pre*")?))
            }
            Some(ExprTok::LParen) => {
                self.pos += 1;
                let e = self.parse_or()?;
                if self.peek() != Some(ExprTok::RParen) {
                    return err(self.line, self.here(), "expected ')'");
                }
                self.pos += 1;
                Ok(e)
            }
            Some(ExprTok::Ident(name)) => {
                let col = self.here();
                self.pos += 1;
                Ok(NiceExpr::Atom(self.named_set(name, col)?))
            }
            _ => err(self.line, self.here(), "expected an expression"),
        }
    }

    /// The parenthesized argument of post*/pre*: the name of a cube or
    /// constraint (the closures apply to sets, not to nested expressions).
    fn parse_set_arg(&mut self, op: &str) -> Result<CountingConstraint, ParseError> {
        if self.peek() != Some(ExprTok::LParen) {
            return err(self.line, self.here(), format!("{} takes a parenthesized set name", op));
        }
        self.pos += 1;
        let name = match self.peek() {
            Some(ExprTok::Ident(n)) => n,
            _ => return err(self.line, self.here(), "expected a cube or constraint name"),
        };
        let col = self.here();
        self.pos += 1;
        if self.peek() != Some(ExprTok::RParen) {
            return err(self.line, self.here(), "expected ')'");
        }
        self.pos += 1;
        self.named_set(name, col)
    }

    fn named_set(&self, name: &str, col: usize) -> Result<CountingConstraint, ParseError> {
        if let Some(c) = self.bu.cubes.get(name) {
            return Ok(CountingConstraint::from_cube(c.clone()));
        }
        if let Some(c) = self.bu.constraints.get(name) {
            return Ok(c.clone());
        }
        err(self.line, col, format!("unknown identifier '{}'", name))
    }
}

fn bound_text(b: &Bound) -> String {
    match b.as_finite() {
        Some(v) => v.to_string(),
        None => "inf".to_string(),
    }
}

fn cube_text(states: &[String], cube: &Cube) -> String {
    let mut parts = Vec::new();
    for q in 0..states.len() {
        let lo = &cube.lower()[q];
        let hi = &cube.upper()[q];
        let trivial = *lo == BigUint::from(0u32) && hi.as_finite() == Some(&BigUint::from(0u32));
        if !trivial {
            parts.push(format!("{}:[{},{}]", states[q], lo, bound_text(hi)));
        }
    }
    parts.join(" ")
}

/// Canonical text form; parsing it back yields an equal model file.
pub fn serialize(m: &ModelFile) -> String {
    let mut out = String::new();
    let states = m.model.state_names().to_vec();
    match &m.model {
        Model::Rbn(r) | Model::Protocol(Protocol { rbn: r, .. }) => {
            let header = if matches!(m.model, Model::Rbn(_)) {
                "rbn"
            } else {
                "protocol"
            };
            out.push_str(&format!("{} {}\n", header, m.name));
            out.push_str(&format!("states {}\n", states.join(" ")));
            out.push_str(&format!("alphabet {}\n", r.letter_names().join(" ")));
            for t in r.transitions() {
                let mark = match t.kind {
                    TransitionKind::Broadcast => "!",
                    TransitionKind::Receive => "?",
                };
                out.push_str(&format!(
                    "trans {} {}{} {}\n",
                    states[t.source.0],
                    mark,
                    r.letter_names()[t.letter.0],
                    states[t.target.0]
                ));
            }
            if let Model::Protocol(p) = &m.model {
                let inputs: Vec<&str> = p.inputs.iter().map(|q| states[q.0].as_str()).collect();
                out.push_str(&format!("inputs {}\n", inputs.join(" ")));
                let outputs: Vec<String> = states
                    .iter()
                    .enumerate()
                    .map(|(q, s)| format!("{}={}", s, p.output[q]))
                    .collect();
                out.push_str(&format!("output {}\n", outputs.join(" ")));
            }
        }
        Model::Asms(a) => {
            out.push_str(&format!("asms {}\n", m.name));
            out.push_str(&format!("states {}\n", states.join(" ")));
            out.push_str(&format!("alphabet {}\n", a.letter_names().join(" ")));
            for t in a.transitions() {
                let op = match t.op {
                    RegOp::Write => "W",
                    RegOp::Read => "R",
                };
                out.push_str(&format!(
                    "trans {} {}({}) {}\n",
                    states[t.source.0],
                    op,
                    a.letter_names()[t.letter.0],
                    states[t.target.0]
                ));
            }
        }
        Model::IoNet(n) => {
            out.push_str(&format!("ionet {}\n", m.name));
            out.push_str(&format!("states {}\n", states.join(" ")));
            for &(p, q, p2) in n.transitions() {
                out.push_str(&format!(
                    "trans {} obs {} -> {}\n",
                    states[p.0], states[q.0], states[p2.0]
                ));
            }
        }
    }
    for (name, cube) in &m.cubes {
        let body = cube_text(&states, cube);
        match m.cube_registers.get(name) {
            Some(&reg) => {
                if let Model::Asms(a) = &m.model {
                    out.push_str(&format!(
                        "cube {} @ {} {{ {} }}\n",
                        name,
                        a.letter_names()[reg],
                        body
                    ));
                }
            }
            None => out.push_str(&format!("cube {} {{ {} }}\n", name, body)),
        }
    }
    // Constraints and expressions are resolved structures; re-emit them as
    // one anonymous cube per disjunct and a structural expression printout.
    for (name, c) in &m.constraints {
        let mut cube_names = Vec::new();
        for (i, cube) in c.cubes().iter().enumerate() {
            let cn = format!("{}_{}", name, i);
            out.push_str(&format!("cube {} {{ {} }}\n", cn, cube_text(&states, cube)));
            cube_names.push(cn);
        }
        out.push_str(&format!("constraint {} = {}\n", name, cube_names.join(" | ")));
    }
    for (name, e) in &m.exprs {
        let mut counter = 0usize;
        let mut aux = String::new();
        let body = expr_text(m, name, e, &states, &mut counter, &mut aux);
        out.push_str(&aux);
        out.push_str(&format!("expr {} = {}\n", name, body));
    }
    out
}

fn expr_text(
    m: &ModelFile,
    prefix: &str,
    e: &NiceExpr,
    states: &[String],
    counter: &mut usize,
    aux: &mut String,
) -> String {
    // Reuse a named set when one denotes the leaf verbatim, so that the
    // canonical form is a fixed point of parse-then-serialize.
    let mut leaf = |c: &CountingConstraint| -> String {
        if c.cubes().len() == 1 {
            if let Some((name, _)) = m.cubes.iter().find(|(_, cube)| *cube == &c.cubes()[0]) {
                return name.clone();
            }
        }
        if let Some((name, _)) = m.constraints.iter().find(|(_, k)| *k == c) {
            return name.clone();
        }
        let mut names = Vec::new();
        for cube in c.cubes() {
            let cn = format!("{}_e{}", prefix, *counter);
            *counter += 1;
            aux.push_str(&format!("cube {} {{ {} }}\n", cn, cube_text(states, cube)));
            names.push(cn);
        }
        if names.len() == 1 {
            names.pop().unwrap()
        } else {
            if names.is_empty() {
                // An empty union has no grammar form of its own; emit one
                // unsatisfiable cube instead.
                let empty = format!("{}_e{}", prefix, *counter);
                *counter += 1;
                aux.push_str(&format!("cube {} {{ {}:[1,0] }}\n", empty, states[0]));
                names.push(empty);
            }
            let cn = format!("{}_e{}", prefix, *counter);
            *counter += 1;
            aux.push_str(&format!("constraint {} = {}\n", cn, names.join(" | ")));
            cn
        }
    };
    match e {
        NiceExpr::Atom(c) => leaf(c),
        NiceExpr::PostStar(c) => format!("post*({})", leaf(c)),
        NiceExpr::PreStar(c) => format!("pre*({})", leaf(c)),
        NiceExpr::And(a, b) => format!(
            "({} & {})",
            expr_text(m, prefix, a, states, counter, aux),
            expr_text(m, prefix, b, states, counter, aux)
        ),
        NiceExpr::Or(a, b) => format!(
            "({} | {})",
            expr_text(m, prefix, a, states, counter, aux),
            expr_text(m, prefix, b, states, counter, aux)
        ),
        NiceExpr::Not(a) => format!("!{}", expr_text(m, prefix, a, states, counter, aux)),
    }
}
