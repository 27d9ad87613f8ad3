//! Line-oriented text form of a device program.
//!
//! ```text
//! DPU-PROGRAM v1
//! DPUS 16
//! TASKLETS 11
//! LAYOUT total=.. unit=.. per_dpu=.. per_round=.. rounds=.. leftover=.. header_bytes=.. wram_budget=.. wram_shared=..
//! BUFFER id=.. type=u32 size=4 class=vector scale=1 ext=0 filtered=0 len=0 mram=.. bytes=.. header=- wram=-
//! STAGE index=0 kind=map kernel=add window=0 group=1 lookahead=0 limit=- block=.. in_scale=1 in_filtered=0
//! ARG role=input type=u32 size=4 buffer=0 mram=.. wram=.. wram_out=- count=..
//! POST compact buffer=3
//! END
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::buffers::BufferId;
use crate::patterns::{ArgRole, ElemType, PatternKind};
use crate::planner::{ArgLayout, BufferClass, BufferLayout, LayoutPlan, StageLayout};

use super::{DeviceProgram, PostDirective};

const MAGIC: &str = "DPU-PROGRAM v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn opt(v: Option<usize>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c == '%' || c == '=' || c.is_whitespace() {
            for b in c.to_string().bytes() {
                let _ = write!(out, "%{b:02X}");
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = s.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

pub fn emit_program_text(p: &DeviceProgram) -> String {
    let l = &p.layout;
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "DPUS {}", l.n_dpus);
    let _ = writeln!(s, "TASKLETS {}", l.tasklets);
    let _ = writeln!(
        s,
        "LAYOUT total={} unit={} per_dpu={} per_round={} rounds={} leftover={} header_bytes={} wram_budget={} wram_shared={}",
        l.total,
        l.unit,
        l.per_dpu,
        l.elements_per_round,
        l.nr_rounds,
        l.cpu_leftover,
        l.header_bytes,
        l.wram_budget,
        l.wram_shared
    );
    for b in &l.buffers {
        let _ = writeln!(
            s,
            "BUFFER id={} type={} size={} class={} scale={} ext={} filtered={} len={} mram={} bytes={} header={} wram={}",
            b.id,
            escape(&b.elem.name),
            b.elem.size,
            b.class,
            b.scale,
            b.ext,
            u8::from(b.filtered),
            b.len,
            b.mram,
            b.bytes,
            opt(b.header),
            opt(b.wram)
        );
    }
    for (st, kernel) in l.stages.iter().zip(&p.kernels) {
        let _ = writeln!(
            s,
            "STAGE index={} kind={} kernel={} window={} group={} lookahead={} limit={} block={} in_scale={} in_filtered={}",
            st.index,
            st.kind,
            escape(kernel),
            st.window,
            st.group,
            st.lookahead,
            opt(st.limit),
            st.block,
            st.in_scale,
            u8::from(st.in_filtered)
        );
        for a in &st.args {
            let _ = writeln!(
                s,
                "ARG role={} type={} size={} buffer={} mram={} wram={} wram_out={} count={}",
                a.role,
                escape(&a.elem.name),
                a.elem.size,
                a.buffer,
                a.mram,
                a.wram,
                opt(a.wram_out),
                a.count
            );
        }
    }
    for d in &p.post {
        let _ = match d {
            PostDirective::Compact { buffer } => writeln!(s, "POST compact buffer={buffer}"),
            PostDirective::Combine { buffer } => writeln!(s, "POST combine buffer={buffer}"),
            PostDirective::Truncate { buffer, len } => writeln!(s, "POST truncate buffer={buffer} len={len}"),
        };
    }
    s.push_str("END\n");
    s
}

struct Fields<'a> {
    line: usize,
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    fn new(line: usize, tokens: &[&'a str]) -> Result<Self, ParseError> {
        let mut map = BTreeMap::new();
        for t in tokens {
            let (k, v) = t.split_once('=').ok_or_else(|| err(line, format!("expected key=value, got '{t}'")))?;
            if map.insert(k, v).is_some() {
                return Err(err(line, format!("duplicate key '{k}'")));
            }
        }
        Ok(Self { line, map })
    }

    fn raw(&self, k: &str) -> Result<&'a str, ParseError> {
        self.map
            .get(k)
            .copied()
            .ok_or_else(|| err(self.line, format!("missing '{k}'")))
    }

    fn get<T: FromStr>(&self, k: &str) -> Result<T, ParseError> {
        let v = self.raw(k)?;
        v.parse()
            .map_err(|_| err(self.line, format!("bad value '{v}' for '{k}'")))
    }

    fn opt(&self, k: &str) -> Result<Option<usize>, ParseError> {
        match self.raw(k)? {
            "-" => Ok(None),
            _ => self.get(k).map(Some),
        }
    }

    fn flag(&self, k: &str) -> Result<bool, ParseError> {
        match self.raw(k)? {
            "0" => Ok(false),
            "1" => Ok(true),
            v => Err(err(self.line, format!("bad flag '{v}' for '{k}'"))),
        }
    }

    fn text(&self, k: &str) -> Result<String, ParseError> {
        unescape(self.raw(k)?).ok_or_else(|| err(self.line, format!("bad escape in '{k}'")))
    }

    fn elem(&self) -> Result<ElemType, ParseError> {
        ElemType::new(self.text("type")?, self.get("size")?)
            .ok_or_else(|| err(self.line, "element size must be 1, 2, 4 or 8".into()))
    }

    fn buffer(&self, k: &str) -> Result<BufferId, ParseError> {
        self.get(k).map(BufferId)
    }
}

fn err(line: usize, message: String) -> ParseError {
    ParseError { line, message }
}

pub fn parse_program_text(text: &str) -> Result<DeviceProgram, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, MAGIC)) => {}
        Some((n, l)) => return Err(err(n, format!("expected '{MAGIC}', got '{l}'"))),
        None => return Err(err(0, "empty program".into())),
    }

    let mut n_dpus = None;
    let mut tasklets = None;
    let mut layout: Option<LayoutPlan> = None;
    let mut kernels = Vec::new();
    let mut post = Vec::new();
    let mut ended = false;

    for (n, line) in lines {
        if ended {
            return Err(err(n, "content after END".into()));
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let (head, rest) = tokens.split_first().expect("non-empty line");
        let need_layout = |l: &mut Option<LayoutPlan>| -> Result<(), ParseError> {
            if l.is_none() {
                return Err(err(n, format!("{head} before LAYOUT")));
            }
            Ok(())
        };
        match *head {
            "DPUS" | "TASKLETS" => {
                let v: usize = rest
                    .first()
                    .and_then(|v| v.parse().ok())
                    .filter(|_| rest.len() == 1)
                    .ok_or_else(|| err(n, format!("{head} takes one integer")))?;
                if *head == "DPUS" {
                    n_dpus = Some(v);
                } else {
                    tasklets = Some(v);
                }
            }
            "LAYOUT" => {
                let f = Fields::new(n, rest)?;
                layout = Some(LayoutPlan {
                    n_dpus: n_dpus.ok_or_else(|| err(n, "LAYOUT before DPUS".into()))?,
                    tasklets: tasklets.ok_or_else(|| err(n, "LAYOUT before TASKLETS".into()))?,
                    total: f.get("total")?,
                    unit: f.get("unit")?,
                    per_dpu: f.get("per_dpu")?,
                    elements_per_round: f.get("per_round")?,
                    nr_rounds: f.get("rounds")?,
                    cpu_leftover: f.get("leftover")?,
                    header_bytes: f.get("header_bytes")?,
                    wram_budget: f.get("wram_budget")?,
                    wram_shared: f.get("wram_shared")?,
                    buffers: Vec::new(),
                    stages: Vec::new(),
                });
            }
            "BUFFER" => {
                need_layout(&mut layout)?;
                let f = Fields::new(n, rest)?;
                let b = BufferLayout {
                    id: f.buffer("id")?,
                    elem: f.elem()?,
                    class: f
                        .raw("class")?
                        .parse::<BufferClass>()
                        .map_err(|e| err(n, e))?,
                    scale: f.get("scale")?,
                    ext: f.get("ext")?,
                    filtered: f.flag("filtered")?,
                    len: f.get("len")?,
                    mram: f.get("mram")?,
                    bytes: f.get("bytes")?,
                    header: f.opt("header")?,
                    wram: f.opt("wram")?,
                };
                layout.as_mut().expect("checked").buffers.push(b);
            }
            "STAGE" => {
                need_layout(&mut layout)?;
                let f = Fields::new(n, rest)?;
                let l = layout.as_mut().expect("checked");
                let index: usize = f.get("index")?;
                if index != l.stages.len() {
                    return Err(err(n, format!("stage index {index} out of order")));
                }
                kernels.push(f.text("kernel")?);
                l.stages.push(StageLayout {
                    index,
                    kind: f.raw("kind")?.parse::<PatternKind>().map_err(|e| err(n, e.to_string()))?,
                    window: f.get("window")?,
                    group: f.get("group")?,
                    lookahead: f.get("lookahead")?,
                    limit: f.opt("limit")?,
                    block: f.get("block")?,
                    in_scale: f.get("in_scale")?,
                    in_filtered: f.flag("in_filtered")?,
                    args: Vec::new(),
                });
            }
            "ARG" => {
                need_layout(&mut layout)?;
                let f = Fields::new(n, rest)?;
                let st = layout
                    .as_mut()
                    .expect("checked")
                    .stages
                    .last_mut()
                    .ok_or_else(|| err(n, "ARG before STAGE".into()))?;
                st.args.push(ArgLayout {
                    role: f.raw("role")?.parse::<ArgRole>().map_err(|e| err(n, e.to_string()))?,
                    elem: f.elem()?,
                    buffer: f.buffer("buffer")?,
                    mram: f.get("mram")?,
                    wram: f.get("wram")?,
                    wram_out: f.opt("wram_out")?,
                    count: f.get("count")?,
                });
            }
            "POST" => {
                let (what, kv) = rest
                    .split_first()
                    .ok_or_else(|| err(n, "POST needs a directive".into()))?;
                let f = Fields::new(n, kv)?;
                let buffer = f.buffer("buffer")?;
                post.push(match *what {
                    "compact" => PostDirective::Compact { buffer },
                    "combine" => PostDirective::Combine { buffer },
                    "truncate" => PostDirective::Truncate {
                        buffer,
                        len: f.get("len")?,
                    },
                    other => return Err(err(n, format!("unknown directive '{other}'"))),
                });
            }
            "END" => ended = true,
            other => return Err(err(n, format!("unknown record '{other}'"))),
        }
    }
    if !ended {
        return Err(err(text.lines().count(), "missing END".into()));
    }
    let layout = layout.ok_or_else(|| err(0, "missing LAYOUT".into()))?;
    Ok(DeviceProgram { layout, kernels, post })
}
