//! Brzozowski-derivative matcher with its own parser. Shares no code with
//! the library matcher.

#[derive(Clone, Debug, PartialEq)]
pub enum Re {
    Empty,
    Eps,
    Class(Vec<(u8, u8)>),
    Cat(Box<Re>, Box<Re>),
    Alt(Box<Re>, Box<Re>),
    Rep(Box<Re>),
}

fn cat(a: Re, b: Re) -> Re {
    match (a, b) {
        (Re::Empty, _) | (_, Re::Empty) => Re::Empty,
        (Re::Eps, x) | (x, Re::Eps) => x,
        (a, b) => Re::Cat(Box::new(a), Box::new(b)),
    }
}

fn alt(a: Re, b: Re) -> Re {
    match (a, b) {
        (Re::Empty, x) | (x, Re::Empty) => x,
        (a, b) if a == b => a,
        (a, b) => Re::Alt(Box::new(a), Box::new(b)),
    }
}

fn nullable(r: &Re) -> bool {
    match r {
        Re::Empty | Re::Class(_) => false,
        Re::Eps | Re::Rep(_) => true,
        Re::Cat(a, b) => nullable(a) && nullable(b),
        Re::Alt(a, b) => nullable(a) || nullable(b),
    }
}

fn deriv(r: &Re, c: u8) -> Re {
    match r {
        Re::Empty | Re::Eps => Re::Empty,
        Re::Class(rs) => {
            if rs.iter().any(|&(lo, hi)| lo <= c && c <= hi) {
                Re::Eps
            } else {
                Re::Empty
            }
        }
        Re::Cat(a, b) => {
            let left = cat(deriv(a, c), (**b).clone());
            if nullable(a) {
                alt(left, deriv(b, c))
            } else {
                left
            }
        }
        Re::Alt(a, b) => alt(deriv(a, c), deriv(b, c)),
        Re::Rep(a) => cat(deriv(a, c), r.clone()),
    }
}

pub fn full_match(r: &Re, s: &[u8]) -> bool {
    let mut cur = r.clone();
    for &c in s {
        cur = deriv(&cur, c);
        if cur == Re::Empty {
            return false;
        }
    }
    nullable(&cur)
}

struct P<'a> {
    s: &'a [u8],
    i: usize,
}

impl P<'_> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.i).copied()
    }

    fn alt(&mut self) -> Option<Re> {
        let mut r = self.seq()?;
        while self.peek() == Some(b'|') {
            self.i += 1;
            r = Re::Alt(Box::new(r), Box::new(self.seq()?));
        }
        Some(r)
    }

    fn seq(&mut self) -> Option<Re> {
        let mut r: Option<Re> = None;
        while let Some(c) = self.peek() {
            if c == b'|' || c == b')' {
                break;
            }
            let mut a = self.atom()?;
            while self.peek() == Some(b'*') {
                self.i += 1;
                a = Re::Rep(Box::new(a));
            }
            r = Some(match r {
                None => a,
                Some(p) => Re::Cat(Box::new(p), Box::new(a)),
            });
        }
        r
    }

    fn atom(&mut self) -> Option<Re> {
        let c = self.peek()?;
        self.i += 1;
        match c {
            b'(' => {
                let r = self.alt()?;
                (self.peek() == Some(b')')).then_some(())?;
                self.i += 1;
                Some(r)
            }
            b'\\' => {
                let e = self.peek()?;
                self.i += 1;
                Some(Re::Class(vec![(e, e)]))
            }
            b'[' => {
                let mut items = Vec::new();
                loop {
                    let c = self.peek()?;
                    self.i += 1;
                    if c == b']' {
                        break;
                    }
                    if self.peek() == Some(b'-')
                        && self.s.get(self.i + 1).is_some_and(|&n| n != b']')
                    {
                        let hi = self.s[self.i + 1];
                        self.i += 2;
                        items.push((c, hi));
                    } else {
                        items.push((c, c));
                    }
                }
                (!items.is_empty()).then_some(Re::Class(items))
            }
            b')' | b'*' | b'|' | b']' => None,
            c => Some(Re::Class(vec![(c, c)])),
        }
    }
}

pub fn parse(pattern: &str) -> Option<Re> {
    let mut p = P {
        s: pattern.as_bytes(),
        i: 0,
    };
    let r = p.alt()?;
    (p.i == p.s.len()).then_some(r)
}

/// Every string of length `0..=max_len` over `alphabet`.
pub fn all_subjects(alphabet: &[u8], max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &layer {
            for &c in alphabet {
                let mut t: Vec<u8> = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}
