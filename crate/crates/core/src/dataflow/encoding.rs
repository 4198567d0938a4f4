//! Text encoding of dataflows.
//!
//! ```text
//! encoding := style ';' section ';' section ';' section ';' section
//! section  := LEVEL ':' [item (',' item)*]      LEVEL in DRAM, GB, NOC, RF (in this order)
//! item     := DIM '=' bound ['*']                '*' marks a parallel loop
//!           | '[' BUFFER '.' TYPE ']'            refresh marker, BUFFER in GB, RF; TYPE in I, O, W
//! ```
//!
//! A marker's position is the number of loops written before it. When
//! printing, GB markers follow the loop that encloses them and RF markers
//! precede the loop they enclose; markers sharing a position are listed in
//! (buffer, type) order, so every dataflow has exactly one encoding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Buffer, DataType, Dataflow, Dim, Level, Loop, Refresh, Style};
use crate::error::Error;

impl fmt::Display for Dataflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.loops.len();
        let mut sections: [Vec<String>; 4] = Default::default();
        let marker = |r: &Refresh| format!("[{}.{}]", r.buffer.tag(), r.data);
        for p in 0..=n {
            // GB markers trail the enclosing loop, RF markers lead the next one.
            let gb_section = if p == 0 { Level::Dram } else { self.loops[p - 1].level };
            let rf_section = if p == n { Level::Rf } else { self.loops[p].level };
            for r in self.refresh.iter().filter(|r| r.position == p) {
                let section = match r.buffer {
                    Buffer::Gb => gb_section,
                    Buffer::Rf => rf_section,
                };
                sections[section as usize].push(marker(r));
            }
            if let Some(l) = self.loops.get(p) {
                sections[l.level as usize].push(format!(
                    "{}={}{}",
                    l.dim,
                    l.bound,
                    if l.parallel { "*" } else { "" }
                ));
            }
        }
        write!(f, "{}", self.style)?;
        for level in Level::ALL {
            write!(f, ";{}:{}", level.tag(), sections[level as usize].join(","))?;
        }
        Ok(())
    }
}

fn err(msg: impl Into<String>) -> Error {
    Error::Encoding(msg.into())
}

impl FromStr for Dataflow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let mut parts = s.trim().split(';');
        let style_tag = parts.next().unwrap_or_default().trim();
        let style = Style::from_tag(style_tag).ok_or_else(|| err(format!("unknown style `{style_tag}`")))?;
        let mut loops = Vec::new();
        let mut refresh = Vec::new();
        for level in Level::ALL {
            let section = parts
                .next()
                .ok_or_else(|| err(format!("missing {} section", level.tag())))?;
            let (tag, body) = section
                .split_once(':')
                .ok_or_else(|| err(format!("section `{section}` lacks ':'")))?;
            if tag.trim() != level.tag() {
                return Err(err(format!("expected section {}, found `{}`", level.tag(), tag.trim())));
            }
            for item in body.split(',').map(str::trim).filter(|i| !i.is_empty()) {
                if let Some(inner) = item.strip_prefix('[') {
                    let inner = inner
                        .strip_suffix(']')
                        .ok_or_else(|| err(format!("unterminated marker `{item}`")))?;
                    let (b, t) = inner
                        .split_once('.')
                        .ok_or_else(|| err(format!("marker `{item}` needs BUFFER.TYPE")))?;
                    let buffer = match b {
                        "GB" => Buffer::Gb,
                        "RF" => Buffer::Rf,
                        _ => return Err(err(format!("unknown buffer `{b}`"))),
                    };
                    let data = match t {
                        "I" => DataType::I,
                        "O" => DataType::O,
                        "W" => DataType::W,
                        _ => return Err(err(format!("unknown data type `{t}`"))),
                    };
                    refresh.push(Refresh {
                        buffer,
                        data,
                        position: loops.len(),
                    });
                    continue;
                }
                let (d, rest) = item
                    .split_once('=')
                    .ok_or_else(|| err(format!("loop `{item}` needs DIM=bound")))?;
                let mut chars = d.chars();
                let dim = match (chars.next(), chars.next()) {
                    (Some(c), None) => Dim::from_letter(c),
                    _ => None,
                }
                .ok_or_else(|| err(format!("unknown dimension `{d}`")))?;
                let (digits, parallel) = match rest.strip_suffix('*') {
                    Some(x) => (x, true),
                    None => (rest, false),
                };
                let bound: u64 = digits
                    .parse()
                    .map_err(|_| err(format!("bad bound `{digits}` in `{item}`")))?;
                if bound == 0 {
                    return Err(err(format!("zero bound in `{item}`")));
                }
                loops.push(Loop {
                    level,
                    dim,
                    bound,
                    parallel,
                });
            }
        }
        if parts.next().is_some() {
            return Err(err("trailing sections after RF"));
        }
        Ok(Dataflow::new(style, loops, refresh))
    }
}

impl Serialize for Dataflow {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Dataflow {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
