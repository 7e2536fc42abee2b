//! Content-stream interpreter: tracks text and graphics matrices and emits
//! positioned text fragments.

use std::collections::HashMap;

use super::cmap::FontDecoder;
use super::lexer::{find, is_whitespace, Lexer, Object, Token};

type Matrix = [f64; 6];

const IDENTITY: Matrix = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0];

fn mul(m: &Matrix, n: &Matrix) -> Matrix {
    [
        m[0] * n[0] + m[1] * n[2],
        m[0] * n[1] + m[1] * n[3],
        m[2] * n[0] + m[3] * n[2],
        m[2] * n[1] + m[3] * n[3],
        m[4] * n[0] + m[5] * n[2] + n[4],
        m[4] * n[1] + m[5] * n[3] + n[5],
    ]
}

fn translate(tx: f64, ty: f64) -> Matrix {
    [1.0, 0.0, 0.0, 1.0, tx, ty]
}

#[derive(Debug, Clone)]
struct GState {
    ctm: Matrix,
    font: Option<String>,
    leading: f64,
}

/// Text shown at one position. `y` is the baseline without text rise, so
/// raised affiliation indices stay on their author's line.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub x: f64,
    pub y: f64,
    pub text: String,
}

/// Kerning (thousandths of text space) at or below which a TJ gap reads as
/// a word break.
const TJ_SPACE_THRESHOLD: f64 = -200.0;

pub fn interpret(data: &[u8], fonts: &HashMap<String, FontDecoder>) -> Vec<Fragment> {
    let fallback = FontDecoder::default();
    let mut lx = Lexer::new(data);
    let mut operands: Vec<Object> = Vec::new();
    let mut gs = GState {
        ctm: IDENTITY,
        font: None,
        leading: 0.0,
    };
    let mut stack: Vec<GState> = Vec::new();
    let mut tm = IDENTITY;
    let mut tlm = IDENTITY;
    let mut out: Vec<Fragment> = Vec::new();
    // true while shown text should extend the previous fragment
    let mut continuing = false;

    let num = |ops: &[Object], i: usize| ops.get(i).and_then(Object::as_f64).unwrap_or(0.0);

    while let Some(tok) = lx.next_token() {
        let op = match tok {
            Token::Keyword(k) => k,
            Token::ArrayOpen | Token::DictOpen | Token::Int(_) | Token::Real(_) | Token::Name(_) | Token::Str(_) => {
                // re-lex as a full object
                let obj = match tok {
                    Token::Int(i) => Object::Int(i),
                    Token::Real(r) => Object::Real(r),
                    Token::Name(n) => Object::Name(n),
                    Token::Str(s) => Object::Str(s),
                    Token::ArrayOpen => {
                        lx.pos -= 1;
                        lx.parse_object().unwrap_or(Object::Null)
                    }
                    _ => {
                        lx.pos -= 2;
                        lx.parse_object().unwrap_or(Object::Null)
                    }
                };
                operands.push(obj);
                continue;
            }
            _ => {
                operands.clear();
                continue;
            }
        };

        let decoder = |gs: &GState| gs.font.as_ref().and_then(|f| fonts.get(f)).unwrap_or(&fallback);
        let mut show = |text: String, tm: &Matrix, gs: &GState, continuing: &mut bool| {
            if text.is_empty() {
                return;
            }
            let m = mul(tm, &gs.ctm);
            match out.last_mut() {
                Some(last) if *continuing => last.text.push_str(&text),
                _ => out.push(Fragment {
                    x: m[4],
                    y: m[5],
                    text,
                }),
            }
            *continuing = true;
        };

        match op.as_str() {
            "q" => stack.push(gs.clone()),
            "Q" => {
                if let Some(prev) = stack.pop() {
                    gs = prev;
                }
            }
            "cm" if operands.len() >= 6 => {
                let m = [0, 1, 2, 3, 4, 5].map(|i| num(&operands, i));
                gs.ctm = mul(&m, &gs.ctm);
                continuing = false;
            }
            "BT" => {
                tm = IDENTITY;
                tlm = IDENTITY;
                continuing = false;
            }
            "ET" => continuing = false,
            "Tf" => {
                if let Some(name) = operands.first().and_then(Object::as_name) {
                    gs.font = Some(name.to_string());
                }
            }
            "TL" => gs.leading = num(&operands, 0),
            "Td" => {
                tlm = mul(&translate(num(&operands, 0), num(&operands, 1)), &tlm);
                tm = tlm;
                continuing = false;
            }
            "TD" => {
                gs.leading = -num(&operands, 1);
                tlm = mul(&translate(num(&operands, 0), num(&operands, 1)), &tlm);
                tm = tlm;
                continuing = false;
            }
            "Tm" if operands.len() >= 6 => {
                tlm = [0, 1, 2, 3, 4, 5].map(|i| num(&operands, i));
                tm = tlm;
                continuing = false;
            }
            "T*" => {
                tlm = mul(&translate(0.0, -gs.leading), &tlm);
                tm = tlm;
                continuing = false;
            }
            "Tj" => {
                if let Some(Object::Str(s)) = operands.last() {
                    let text = decoder(&gs).decode(s);
                    show(text, &tm, &gs, &mut continuing);
                }
            }
            "'" | "\"" => {
                tlm = mul(&translate(0.0, -gs.leading), &tlm);
                tm = tlm;
                continuing = false;
                if let Some(Object::Str(s)) = operands.last() {
                    let text = decoder(&gs).decode(s);
                    show(text, &tm, &gs, &mut continuing);
                }
            }
            "TJ" => {
                if let Some(Object::Array(items)) = operands.last() {
                    let mut text = String::new();
                    for item in items {
                        match item {
                            Object::Str(s) => text.push_str(&decoder(&gs).decode(s)),
                            other => {
                                if other.as_f64().is_some_and(|k| k <= TJ_SPACE_THRESHOLD)
                                    && !text.is_empty()
                                    && !text.ends_with(' ')
                                {
                                    text.push(' ');
                                }
                            }
                        }
                    }
                    show(text, &tm, &gs, &mut continuing);
                }
            }
            "BI" => {
                // inline image: skip to EI
                if let Some(id) = find(data, b"ID", lx.pos) {
                    let mut p = id + 2;
                    while let Some(ei) = find(data, b"EI", p) {
                        let before = ei.checked_sub(1).map(|i| data[i]);
                        let after = data.get(ei + 2).copied();
                        if before.is_some_and(is_whitespace) && after.is_none_or(is_whitespace) {
                            lx.pos = ei + 2;
                            break;
                        }
                        p = ei + 2;
                    }
                }
            }
            _ => {}
        }
        operands.clear();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(content: &str) -> Vec<Fragment> {
        interpret(content.as_bytes(), &HashMap::new())
    }

    #[test]
    fn positions_and_text() {
        let f = run("BT /F1 12 Tf 72 700 Td (Hello) Tj 0 -14 Td (World) Tj ET");
        assert_eq!(f.len(), 2);
        assert_eq!((f[0].x, f[0].y, f[0].text.as_str()), (72.0, 700.0, "Hello"));
        assert_eq!((f[1].x, f[1].y, f[1].text.as_str()), (72.0, 686.0, "World"));
    }

    #[test]
    fn consecutive_shows_join() {
        let f = run("BT 10 10 Td (A. Aa) Tj 3 Ts (1,2) Tj ET");
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].text, "A. Aa1,2");
    }

    #[test]
    fn tj_kerning_space() {
        let f = run("BT [(Hel) -20 (lo) -500 (World)] TJ ET");
        assert_eq!(f[0].text, "Hello World");
    }

    #[test]
    fn matrices_compose() {
        let f = run("q 1 0 0 1 0 100 cm BT 1 0 0 1 50 600 Tm (x) Tj ET Q BT 5 5 Td (y) Tj ET");
        assert_eq!((f[0].x, f[0].y), (50.0, 700.0));
        assert_eq!((f[1].x, f[1].y), (5.0, 5.0));
    }

    #[test]
    fn leading_and_quote() {
        let f = run("BT 14 TL 0 700 Td (a) Tj T* (b) Tj (c) ' ET");
        let ys: Vec<f64> = f.iter().map(|x| x.y).collect();
        assert_eq!(ys, vec![700.0, 686.0, 672.0]);
    }
}
