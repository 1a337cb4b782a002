//! Text model and evidence files.
//!
//! ```text
//! # comments run to the end of the line
//! [variables]
//! x = continuous lo=-6 hi=6 points=121
//! r = discrete levels=0,1,2
//! b = binary
//!
//! [functions]
//! fa = gaussian(x, y) mean=0,0 cov=1,0.5,0.5,1
//! gaussian(x, r) mean=0,0 cov=1,0.3,0.3,1 cutpoints.r=-1,0,inf
//! table(r, b) values=0.1,0.2,0.3,0.5,0.6,1
//! table(r) masses=0.2,0.3,0.5
//! copula(x, y) theta=2 x=gaussian:0:1 y=logistic:0:0.5
//! marginal(x) dist=gaussian:0:1
//! sampled(x) values=0,0.5,1
//! constant(r) value=1
//! ```
//!
//! Table values are cumulative, in level order with the last scope variable
//! fastest. Tables are not checked here; `check` reports negative mixed differences.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use crate::error::{CdnError, Result};
use crate::functions::{
    ConstantFunction, DiscreteTable, FunctionRef, GaussAxis, GaussianCdf, GumbelCopula, Marginal, MarginalCdf,
    SampledCdf,
};
use crate::graph::{Assignment, CdnGraph, VariableDomain, VariableId};

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Variables,
    Functions,
}

/// A whitespace-free token and its 1-based column.
#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokens(line: &str, offset: usize) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices().chain(std::iter::once((line.len(), ' '))) {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Token { text: &line[s..i], column: offset + s + 1 });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    out
}

fn strip_comment(line: &str) -> &str {
    line.find('#').map_or(line, |i| &line[..i])
}

struct Params<'a> {
    line: usize,
    map: BTreeMap<&'a str, Token<'a>>,
    anchor: usize,
}

impl<'a> Params<'a> {
    fn parse(line: usize, toks: &[Token<'a>], anchor: usize) -> Result<Self> {
        let mut map = BTreeMap::new();
        for t in toks {
            let Some((k, v)) = t.text.split_once('=') else {
                return Err(CdnError::parse(line, t.column, format!("expected key=value, found `{}`", t.text)));
            };
            if k.is_empty() || v.is_empty() {
                return Err(CdnError::parse(line, t.column, format!("malformed parameter `{}`", t.text)));
            }
            let value = Token { text: v, column: t.column + k.len() + 1 };
            if map.insert(k, value).is_some() {
                return Err(CdnError::parse(line, t.column, format!("parameter `{k}` given twice")));
            }
        }
        Ok(Params { line, map, anchor })
    }

    fn take(&mut self, key: &str) -> Option<Token<'a>> {
        self.map.remove(key)
    }

    fn required(&mut self, key: &str) -> Result<Token<'a>> {
        self.take(key)
            .ok_or_else(|| CdnError::parse(self.line, self.anchor, format!("missing parameter `{key}`")))
    }

    fn numbers(&self, t: Token<'_>) -> Result<Vec<f64>> {
        t.text
            .split(',')
            .map(|s| parse_number(s).ok_or_else(|| CdnError::parse(self.line, t.column, format!("`{s}` is not a number"))))
            .collect()
    }

    fn number(&self, t: Token<'_>) -> Result<f64> {
        let v = self.numbers(t)?;
        if v.len() != 1 {
            return Err(CdnError::parse(self.line, t.column, "expected a single number"));
        }
        Ok(v[0])
    }

    fn finish(self) -> Result<()> {
        match self.map.iter().next() {
            Some((k, t)) => Err(CdnError::parse(self.line, t.column.saturating_sub(k.len() + 1), format!("unknown parameter `{k}`"))),
            None => Ok(()),
        }
    }
}

fn parse_number(s: &str) -> Option<f64> {
    match s {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse::<f64>().ok().filter(|v| v.is_finite()),
    }
}

fn parse_marginal(p: &Params<'_>, t: Token<'_>) -> Result<Marginal> {
    let parts: Vec<&str> = t.text.split(':').collect();
    let err = || CdnError::parse(p.line, t.column, format!("expected gaussian:MEAN:SD or logistic:LOC:SCALE, found `{}`", t.text));
    if parts.len() != 3 {
        return Err(err());
    }
    let (a, b) = (parse_number(parts[1]).ok_or_else(err)?, parse_number(parts[2]).ok_or_else(err)?);
    match parts[0] {
        "gaussian" => Ok(Marginal::Gaussian { mean: a, sd: b }),
        "logistic" => Ok(Marginal::Logistic { location: a, scale: b }),
        _ => Err(err()),
    }
}

/// Parses a model held in memory.
pub fn parse_model(text: &str) -> Result<CdnGraph> {
    let mut graph = CdnGraph::new();
    let mut section = Section::None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw);
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = line.len() - line.trim_start().len();
        if trimmed.starts_with('[') {
            section = match trimmed {
                "[variables]" => Section::Variables,
                "[functions]" => Section::Functions,
                other => return Err(CdnError::parse(line_no, indent + 1, format!("unknown section `{other}`"))),
            };
            continue;
        }
        match section {
            Section::None => return Err(CdnError::parse(line_no, indent + 1, "content before any section")),
            Section::Variables => parse_variable(&mut graph, line, line_no)?,
            Section::Functions => parse_function(&mut graph, line, line_no)?,
        }
    }
    if graph.variable_count() == 0 {
        return Err(CdnError::parse(text.lines().count().max(1), 1, "model declares no variables"));
    }
    Ok(graph)
}

fn parse_variable(graph: &mut CdnGraph, line: &str, line_no: usize) -> Result<()> {
    let Some(eq) = line.find('=') else {
        return Err(CdnError::parse(line_no, 1, "expected `name = kind ...`"));
    };
    let name = line[..eq].trim();
    let name_col = line.find(name).unwrap_or(0) + 1;
    if name.is_empty() || name.contains(char::is_whitespace) {
        return Err(CdnError::parse(line_no, name_col, "variable name must be one word"));
    }
    let toks = tokens(&line[eq + 1..], eq + 1);
    let Some(kind) = toks.first() else {
        return Err(CdnError::parse(line_no, eq + 2, "missing variable kind"));
    };
    let mut p = Params::parse(line_no, &toks[1..], kind.column)?;
    let domain = match kind.text {
        "binary" => VariableDomain::binary(),
        "discrete" => {
            let t = p.required("levels")?;
            let levels = p.numbers(t)?;
            VariableDomain::discrete(levels).map_err(|e| CdnError::parse(line_no, t.column, e.to_string()))?
        }
        "continuous" => {
            let (lo, hi, points) = (p.required("lo")?, p.required("hi")?, p.required("points")?);
            let n = p.number(points)?;
            if n.fract() != 0.0 || n < 2.0 {
                return Err(CdnError::parse(line_no, points.column, "points must be an integer of at least 2"));
            }
            VariableDomain::continuous(p.number(lo)?, p.number(hi)?, n as usize)
                .map_err(|e| CdnError::parse(line_no, lo.column, e.to_string()))?
        }
        other => return Err(CdnError::parse(line_no, kind.column, format!("unknown variable kind `{other}`"))),
    };
    p.finish()?;
    graph
        .add_variable(name, domain)
        .map_err(|e| CdnError::parse(line_no, name_col, e.to_string()))?;
    Ok(())
}

fn parse_function(graph: &mut CdnGraph, line: &str, line_no: usize) -> Result<()> {
    let open = line.find('(').ok_or_else(|| CdnError::parse(line_no, 1, "expected `family(scope)`"))?;
    let close = line[open..]
        .find(')')
        .map(|c| c + open)
        .ok_or_else(|| CdnError::parse(line_no, open + 1, "unclosed scope list"))?;
    let head = &line[..open];
    let (label, family) = match head.split_once('=') {
        Some((l, f)) => (Some(l.trim().to_string()), f.trim()),
        None => (None, head.trim()),
    };
    let family_col = line.find(family).unwrap_or(0) + 1;
    if family.is_empty() || label.as_deref() == Some("") {
        return Err(CdnError::parse(line_no, family_col, "expected `[label =] family(scope)`"));
    }
    let mut scope = Vec::new();
    let mut col = open + 2;
    for part in line[open + 1..close].split(',') {
        let name = part.trim();
        let c = col + part.find(name).unwrap_or(0);
        col += part.len() + 1;
        let id = graph
            .variable_id(name)
            .ok_or_else(|| CdnError::parse(line_no, c, format!("unknown variable `{name}`")))?;
        scope.push(id);
    }
    let toks = tokens(&line[close + 1..], close + 1);
    let mut p = Params::parse(line_no, &toks, family_col)?;
    let function = build_function(graph, family, &scope, &mut p)?;
    p.finish()?;
    graph
        .add_labeled_function(label, &scope, function)
        .map_err(|e| CdnError::parse(line_no, family_col, e.to_string()))?;
    Ok(())
}

fn build_function(graph: &CdnGraph, family: &str, scope: &[VariableId], p: &mut Params<'_>) -> Result<FunctionRef> {
    let line = p.line;
    let at = p.anchor;
    let wrap = |e: CdnError| CdnError::parse(line, at, e.to_string());
    let domains: Vec<&VariableDomain> = scope.iter().map(|v| &graph.variable(*v).expect("resolved").domain).collect();
    let levels_of = |d: &VariableDomain| match d {
        VariableDomain::DiscreteOrdinal { levels } => Some(levels.clone()),
        VariableDomain::ContinuousGrid { .. } => None,
    };
    let f: FunctionRef = match family {
        "gaussian" => {
            let mean = p.required("mean")?;
            let cov = p.required("cov")?;
            let (mean, cov) = (p.numbers(mean)?, p.numbers(cov)?);
            let mut axes = Vec::new();
            for (v, d) in scope.iter().zip(&domains) {
                let name = graph.variable_name(*v);
                let key = format!("cutpoints.{name}");
                let given = p.take(key.as_str());
                match (levels_of(d), given) {
                    (None, None) => axes.push(GaussAxis::Continuous),
                    (None, Some(t)) => {
                        return Err(CdnError::parse(line, t.column, format!("`{name}` is continuous and takes no cutpoints")))
                    }
                    (Some(levels), t) => {
                        let thresholds = match t {
                            Some(t) => p.numbers(t)?,
                            None => levels.clone(),
                        };
                        axes.push(GaussAxis::Thresholded { levels, thresholds });
                    }
                }
            }
            Arc::new(GaussianCdf::with_axes(mean, cov, axes).map_err(wrap)?)
        }
        "table" => {
            let levels: Vec<Vec<f64>> = domains
                .iter()
                .map(|d| levels_of(d).ok_or_else(|| CdnError::parse(line, at, "table scopes must be discrete")))
                .collect::<Result<_>>()?;
            match (p.take("values"), p.take("masses")) {
                (Some(t), None) => Arc::new(DiscreteTable::new_unvalidated(levels, p.numbers(t)?).map_err(wrap)?),
                (None, Some(t)) => Arc::new(DiscreteTable::from_masses(levels, p.numbers(t)?).map_err(wrap)?),
                _ => return Err(CdnError::parse(line, at, "table needs exactly one of `values` or `masses`")),
            }
        }
        "copula" => {
            let theta = p.required("theta")?;
            let (x, y) = (p.required("x")?, p.required("y")?);
            let c = GumbelCopula::new(p.number(theta)?, parse_marginal(p, x)?, parse_marginal(p, y)?).map_err(wrap)?;
            Arc::new(c)
        }
        "marginal" => {
            let t = p.required("dist")?;
            Arc::new(MarginalCdf::new(parse_marginal(p, t)?).map_err(wrap)?)
        }
        "sampled" => {
            let t = p.required("values")?;
            let values = p.numbers(t)?;
            let (lo, hi) = match (p.take("lo"), p.take("hi")) {
                (Some(a), Some(b)) => (p.number(a)?, p.number(b)?),
                (None, None) => (domains[0].lo(), domains[0].hi()),
                _ => return Err(CdnError::parse(line, at, "give both `lo` and `hi` or neither")),
            };
            Arc::new(SampledCdf::new(lo, hi, values).map_err(wrap)?)
        }
        "constant" => {
            let t = p.required("value")?;
            let axes = domains.iter().map(|d| levels_of(d)).collect();
            Arc::new(ConstantFunction::new(p.number(t)?, axes).map_err(wrap)?)
        }
        other => return Err(CdnError::parse(line, at, format!("unknown function family `{other}`"))),
    };
    Ok(f)
}

/// Parses `variable = value` lines against a graph.
pub fn parse_evidence(text: &str, graph: &CdnGraph) -> Result<Assignment> {
    let mut out = Assignment::new();
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(CdnError::parse(i + 1, 1, "expected `variable = value`"));
        };
        let name = line[..eq].trim();
        let col = line.find(name).unwrap_or(0) + 1;
        let id = graph
            .variable_id(name)
            .ok_or_else(|| CdnError::parse(i + 1, col, format!("unknown variable `{name}`")))?;
        let value_text = line[eq + 1..].trim();
        let vcol = eq + 2 + (line[eq + 1..].len() - line[eq + 1..].trim_start().len());
        let value = parse_number(value_text)
            .ok_or_else(|| CdnError::parse(i + 1, vcol, format!("`{value_text}` is not a finite number")))?;
        if !graph.variable(id).expect("resolved").domain.contains(value) {
            return Err(CdnError::parse(i + 1, vcol, format!("{value} is outside the domain of `{name}`")));
        }
        if out.insert(id, value).is_some() {
            return Err(CdnError::parse(i + 1, col, format!("`{name}` observed twice")));
        }
    }
    Ok(out)
}

pub fn read_model(path: &Path) -> Result<CdnGraph> {
    let text = std::fs::read_to_string(path).map_err(|e| CdnError::io(path, e))?;
    parse_model(&text).map_err(|e| e.with_path(path.display().to_string()))
}

pub fn read_evidence(path: &Path, graph: &CdnGraph) -> Result<Assignment> {
    let text = std::fs::read_to_string(path).map_err(|e| CdnError::io(path, e))?;
    parse_evidence(&text, graph).map_err(|e| e.with_path(path.display().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MODEL: &str = "\
# three variables, four functions
[variables]
x = continuous lo=-5 hi=5 points=41
y = continuous lo=-5 hi=5 points=41
z = discrete levels=0,1,2

[functions]
fa = gaussian(x, y) mean=0,0 cov=1,0.5,0.5,1
fb = gaussian(x, y, z) mean=0,0,0 cov=1,0.2,0.1,0.2,1,0.3,0.1,0.3,1 cutpoints.z=-0.5,0.5,inf
fc = gaussian(y, z) mean=0,0 cov=1,0,0,1
table(z) masses=0.2,0.3,0.5
";

    #[test]
    fn parses_a_four_function_model() {
        let g = parse_model(MODEL).unwrap();
        assert_eq!(g.variable_count(), 3);
        assert_eq!(g.function_count(), 4);
        let z = g.variable_id("z").unwrap();
        let f = &g.functions().last().unwrap().function;
        assert!((f.evaluate(&[1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(g.neighbors(z).len(), 3);
    }

    #[test]
    fn errors_point_at_tokens() {
        let bad = MODEL.replace("fc = gaussian(y, z)", "fc = gaussian(y, w)");
        match parse_model(&bad).unwrap_err() {
            CdnError::Parse { line, column, .. } => assert_eq!((line, column), (10, 18)),
            e => panic!("{e}"),
        }
        let bad = MODEL.replace("points=41\ny", "points=4.5\ny");
        assert!(matches!(parse_model(&bad), Err(CdnError::Parse { line: 3, .. })));
        let bad = MODEL.replace("masses", "mass");
        assert!(matches!(parse_model(&bad), Err(CdnError::Parse { line: 11, .. })));
        assert!(matches!(parse_model("x = binary\n"), Err(CdnError::Parse { line: 1, .. })));
    }

    #[test]
    fn evidence_lines() {
        let g = parse_model(MODEL).unwrap();
        let e = parse_evidence("y = 0.5 # observed\nz=2\n", &g).unwrap();
        assert_eq!(e.len(), 2);
        assert!(matches!(parse_evidence("q = 1\n", &g), Err(CdnError::Parse { line: 1, column: 1, .. })));
        assert!(parse_evidence("z = 7\n", &g).is_err());
    }
}
