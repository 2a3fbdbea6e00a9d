use std::collections::{BTreeMap, HashSet};

use super::units::parse_number;
use super::{
    builtin_model_kind, CardValue, CircuitDescription, Directive, ElementCard, ElementKind, ModelCard, ModelKind,
    NetlistError, PulseSpec, SourceSpec, Value,
};

type Result<T> = std::result::Result<T, NetlistError>;

/// Joins `+` continuations and drops comments. Each logical line keeps the
/// number of its first physical line.
fn logical_lines(text: &str) -> Vec<(usize, String)> {
    let mut out: Vec<(usize, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = match raw.find(';') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let trimmed = body.trim();
        if trimmed.is_empty() || trimmed.starts_with('*') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('+') {
            if let Some(last) = out.last_mut() {
                last.1.push(' ');
                last.1.push_str(rest.trim());
                continue;
            }
        }
        out.push((line, trimmed.to_string()));
    }
    out
}

fn tokenize(s: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut brace = false;
    for c in s.chars() {
        match c {
            '{' => {
                brace = true;
                cur.push(c);
            }
            '}' => {
                brace = false;
                cur.push(c);
            }
            c if brace => cur.push(c),
            '(' | ')' | '=' => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
                tokens.push(c.to_string());
            }
            ',' => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

fn parse_value(token: &str, line: usize) -> Result<Value> {
    if let Some(inner) = token.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
        let name = inner.trim().to_ascii_lowercase();
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(NetlistError::BadNumber {
                token: token.to_string(),
                line,
            });
        }
        return Ok(Value::Param(name));
    }
    parse_number(token)
        .map(Value::Num)
        .ok_or_else(|| NetlistError::BadNumber {
            token: token.to_string(),
            line,
        })
}

/// Reads `key = value` pairs, skipping enclosing parentheses.
fn parse_assignments(tokens: &[String], line: usize) -> Result<Vec<(String, Value)>> {
    let toks: Vec<&str> = tokens
        .iter()
        .map(String::as_str)
        .filter(|t| *t != "(" && *t != ")")
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if toks.get(i + 1) != Some(&"=") {
            return Err(NetlistError::Syntax {
                line,
                message: format!("expected key=value near '{}'", toks[i]),
            });
        }
        let Some(value) = toks.get(i + 2) else {
            return Err(NetlistError::MissingValue { line });
        };
        out.push((toks[i].to_ascii_lowercase(), parse_value(value, line)?));
        i += 3;
    }
    Ok(out)
}

/// Function-style arguments: `pulse(0 1 1m)` or `pulse 0 1 1m`.
fn function_args(tokens: &[String], line: usize) -> Result<Vec<&str>> {
    let mut args: Vec<&str> = tokens.iter().map(String::as_str).collect();
    if args.first() == Some(&"(") {
        if args.last() != Some(&")") {
            return Err(NetlistError::Syntax {
                line,
                message: "unbalanced parentheses".into(),
            });
        }
        args = args[1..args.len() - 1].to_vec();
    }
    if args.iter().any(|a| *a == "(" || *a == ")" || *a == "=") {
        return Err(NetlistError::Syntax {
            line,
            message: "unexpected token in source function".into(),
        });
    }
    Ok(args)
}

fn parse_source(tokens: &[String], line: usize) -> Result<SourceSpec> {
    let Some(head) = tokens.first() else {
        return Err(NetlistError::MissingValue { line });
    };
    match head.to_ascii_lowercase().as_str() {
        "dc" => {
            let v = tokens.get(1).ok_or(NetlistError::MissingValue { line })?;
            if tokens.len() > 2 {
                return Err(trailing(line));
            }
            Ok(SourceSpec::Dc(parse_value(v, line)?))
        }
        "pulse" => {
            let args = function_args(&tokens[1..], line)?;
            if args.len() < 6 || args.len() > 7 {
                return Err(NetlistError::Syntax {
                    line,
                    message: format!("pulse takes 6 or 7 arguments, got {}", args.len()),
                });
            }
            let v: Vec<Value> = args.iter().map(|a| parse_value(a, line)).collect::<Result<_>>()?;
            let mut it = v.into_iter();
            let mut next = || it.next().unwrap();
            Ok(SourceSpec::Pulse(PulseSpec {
                v1: next(),
                v2: next(),
                delay: next(),
                rise: next(),
                fall: next(),
                width: next(),
                period: if args.len() == 7 { Some(next()) } else { None },
            }))
        }
        "pwl" => {
            let args = function_args(&tokens[1..], line)?;
            if args.is_empty() || args.len() % 2 != 0 {
                return Err(NetlistError::Syntax {
                    line,
                    message: "pwl needs time/value pairs".into(),
                });
            }
            let points = args
                .chunks(2)
                .map(|p| Ok((parse_value(p[0], line)?, parse_value(p[1], line)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(SourceSpec::Pwl(points))
        }
        _ => {
            if tokens.len() > 1 {
                return Err(trailing(line));
            }
            Ok(SourceSpec::Dc(parse_value(head, line)?))
        }
    }
}

fn trailing(line: usize) -> NetlistError {
    NetlistError::Syntax {
        line,
        message: "unexpected trailing tokens".into(),
    }
}

fn parse_element(tokens: &[String], line: usize) -> Result<ElementCard> {
    let name = &tokens[0];
    let letter = name.chars().next().unwrap();
    let kind = ElementKind::from_letter(letter).ok_or(NetlistError::UnknownDeviceKind { line, letter })?;
    let n = kind.node_count();
    let rest = &tokens[1..];
    // the node list ends at the first structural token
    let plain = rest
        .iter()
        .take_while(|t| !matches!(t.as_str(), "(" | ")" | "="))
        .count();
    if plain < n {
        return Err(NetlistError::MissingNodes { line });
    }
    if rest.len() == n {
        return Err(NetlistError::MissingValue { line });
    }
    let nodes: Vec<String> = rest[..n].iter().map(|s| s.to_ascii_lowercase()).collect();
    let after = &rest[n..];

    let value = match kind {
        ElementKind::Resistor | ElementKind::Capacitor => {
            let Some(v) = after.first() else {
                return Err(NetlistError::MissingValue { line });
            };
            let value = parse_value(v, line)?;
            if let Some((key, _)) = parse_assignments(&after[1..], line)?.into_iter().next() {
                return Err(NetlistError::UnknownParam { name: key, line });
            }
            CardValue::Value(value)
        }
        ElementKind::VoltageSource => CardValue::Source(parse_source(after, line)?),
        ElementKind::Diode | ElementKind::Mosfet | ElementKind::Comparator | ElementKind::Scr => {
            let Some(model) = after.first() else {
                return Err(NetlistError::MissingValue { line });
            };
            if after.len() > 1 {
                return Err(trailing(line));
            }
            CardValue::Model(model.to_ascii_lowercase())
        }
    };
    Ok(ElementCard {
        name: name.clone(),
        kind,
        nodes,
        value,
        line,
    })
}

fn parse_model(tokens: &[String], line: usize) -> Result<ModelCard> {
    if tokens.len() < 3 {
        return Err(NetlistError::Syntax {
            line,
            message: ".model needs a name and a kind".into(),
        });
    }
    let name = tokens[1].to_ascii_lowercase();
    let kind = ModelKind::from_keyword(&tokens[2]).ok_or_else(|| NetlistError::Syntax {
        line,
        message: format!("unknown model kind '{}'", tokens[2]),
    })?;
    let mut params = BTreeMap::new();
    for (key, value) in parse_assignments(&tokens[3..], line)? {
        if !kind.param_names().contains(&key.as_str()) {
            return Err(NetlistError::UnknownParam { name: key, line });
        }
        params.insert(key, value);
    }
    Ok(ModelCard {
        name,
        kind,
        params,
        line,
    })
}

fn parse_directive(tokens: &[String], raw: &str, line: usize, desc: &mut CircuitDescription) -> Result<bool> {
    match tokens[0].to_ascii_lowercase().as_str() {
        ".end" => return Ok(false),
        ".title" => {
            desc.title = raw[tokens[0].len()..].trim().to_string();
        }
        ".model" => {
            let model = parse_model(tokens, line)?;
            if desc.models.contains_key(&model.name) {
                return Err(NetlistError::DuplicateName { name: model.name, line });
            }
            desc.models.insert(model.name.clone(), model);
        }
        ".param" => {
            let assignments = parse_assignments(&tokens[1..], line)?;
            if assignments.is_empty() {
                return Err(NetlistError::MissingValue { line });
            }
            for (name, value) in assignments {
                desc.directives.push(Directive::Param { name, value });
            }
        }
        ".tran" => {
            let args = &tokens[1..];
            if args.len() < 2 || args.len() > 3 {
                return Err(NetlistError::Syntax {
                    line,
                    message: ".tran takes tstep tstop [tmax]".into(),
                });
            }
            desc.directives.push(Directive::Tran {
                tstep: parse_value(&args[0], line)?,
                tstop: parse_value(&args[1], line)?,
                tmax: args.get(2).map(|t| parse_value(t, line)).transpose()?,
            });
        }
        ".temp" => {
            let t = tokens.get(1).ok_or(NetlistError::MissingValue { line })?;
            desc.directives.push(Directive::Temp(parse_value(t, line)?));
        }
        other => {
            return Err(NetlistError::Syntax {
                line,
                message: format!("unknown directive '{other}'"),
            })
        }
    }
    Ok(true)
}

/// Parses netlist text into a validated [`CircuitDescription`].
pub fn parse(text: &str) -> Result<CircuitDescription> {
    let mut desc = CircuitDescription::default();
    let mut seen = HashSet::new();
    for (line, raw) in logical_lines(text) {
        let tokens = tokenize(&raw);
        if tokens.is_empty() {
            continue;
        }
        if tokens[0].starts_with('.') {
            if !parse_directive(&tokens, &raw, line, &mut desc)? {
                break;
            }
            continue;
        }
        let card = parse_element(&tokens, line)?;
        if !seen.insert(card.name.to_ascii_lowercase()) {
            return Err(NetlistError::DuplicateName { name: card.name, line });
        }
        desc.elements.push(card);
    }

    for card in &desc.elements {
        if let (CardValue::Model(name), Some(expected)) = (&card.value, card.kind.model_kind()) {
            let kind = desc
                .models
                .get(name)
                .map(|m| m.kind)
                .or_else(|| builtin_model_kind(name))
                .ok_or_else(|| NetlistError::UnresolvedModel {
                    name: name.clone(),
                    line: card.line,
                })?;
            if kind != expected {
                return Err(NetlistError::WrongModelKind {
                    name: name.clone(),
                    line: card.line,
                    expected: expected.keyword(),
                });
            }
        }
    }
    if !desc.elements.iter().any(|e| e.nodes.iter().any(|n| n == "0")) {
        return Err(NetlistError::NoGround);
    }
    Ok(desc)
}
