//! The reference machine.
//!
//! A program is a bit string read left to right by a program counter `pc`.
//! The machine has a read-only condition tape `x` with head `h` (starting at
//! 0), a write-only output register `out` and an `xor` flag. Opcodes form a
//! prefix code:
//!
//! | code     | name  | effect                                                    |
//! |----------|-------|-----------------------------------------------------------|
//! | `00` r   | LIT   | append the rest `r` of the program to `out`, halt         |
//! | `01`     | COPY  | append `x[h..]`, set `h = |x|`                            |
//! | `10`     | NCOPY | append the complement of `x[h..]`, set `h = |x|`          |
//! | `1100`   | SKIP  | `h += 1` if `h < |x|`                                      |
//! | `1101`   | TAKE  | if `h < |x|`, append `x[h]` and `h += 1`                   |
//! | `1110` b | EMIT  | append bit `b`                                            |
//! | `11110`  | DUP   | `out = out out`                                           |
//! | `111110` | XOR   | toggle the flag                                           |
//! | `111111` | LOOP  | if `h < |x|`, jump to `pc = 0`                             |
//!
//! Running off the end of the program, or meeting an incomplete opcode, halts.
//! On halt with the flag set, `out[i] ^= x[i]` for `i < min(|out|, |x|)`.
//!
//! Every executed instruction costs one step. If a LOOP jump finds `h` and
//! `|out|` unchanged since the previous jump (or the start), the pass is a
//! no-op and the machine reports divergence at once. Output beyond
//! [`MAX_OUTPUT`] bits is an overflow.
//!
//! Design constants: `c_lit = 2` (`00 y`), `c_copy = 2` (`01`), `c_xor = 8`
//! (`111110 00 m` gives `x ^ m`), `c_stop = 0` (the empty program prints the
//! empty string), `c_ignore = 0` (a shortest program on the empty condition
//! never uses condition opcodes, so it behaves the same under any condition).

use serde::Serialize;

use crate::bits::BitString;

/// Frozen identifier of this machine; bump it on any semantic change.
pub const MACHINE_ID: &str = "mlab-prefix-v1";
pub const MAX_OUTPUT: usize = BitString::MAX_LEN;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MachineConstants {
    pub c_lit: usize,
    pub c_copy: usize,
    pub c_xor: usize,
    pub c_stop: usize,
    pub c_ignore: usize,
}

pub const CONSTANTS: MachineConstants = MachineConstants {
    c_lit: 2,
    c_copy: 2,
    c_xor: 8,
    c_stop: 0,
    c_ignore: 0,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Halted(BitString),
    /// No halt within the step bound, or a detected no-progress loop.
    Diverged,
    Overflow,
}

impl Outcome {
    pub fn output(&self) -> Option<BitString> {
        match self {
            Outcome::Halted(y) => Some(*y),
            _ => None,
        }
    }
}

/// Program texts for the capability templates.
pub mod templates {
    use crate::bits::BitString;

    pub fn literal(y: &BitString) -> BitString {
        BitString::zeros(2).concat(y).expect("literal fits")
    }

    pub fn copy() -> BitString {
        BitString::from_value(0b01, 2).unwrap()
    }

    pub fn complement() -> BitString {
        BitString::from_value(0b10, 2).unwrap()
    }

    pub fn xor_mask(mask: &BitString) -> BitString {
        BitString::from_value(0b11111000, 8)
            .unwrap()
            .concat(mask)
            .expect("xor program fits")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Op {
    Lit,
    Copy,
    NCopy,
    Skip,
    Take,
    Emit(bool),
    Dup,
    Xor,
    Loop,
}

impl Op {
    fn width(self) -> usize {
        match self {
            Op::Lit | Op::Copy | Op::NCopy => 2,
            Op::Skip | Op::Take => 4,
            Op::Emit(_) | Op::Dup => 5,
            Op::Xor | Op::Loop => 6,
        }
    }
}

/// Decodes the opcode at `pc`; `None` when the remaining bits are not a complete opcode.
fn decode(p: &BitString, pc: usize) -> Option<Op> {
    let rem = p.len() - pc;
    let bit = |i: usize| if i < rem { Some(p.bit(pc + i)) } else { None };
    Some(match (bit(0)?, bit(1)?) {
        (false, false) => Op::Lit,
        (false, true) => Op::Copy,
        (true, false) => Op::NCopy,
        (true, true) => match (bit(2)?, bit(3)?) {
            (false, false) => Op::Skip,
            (false, true) => Op::Take,
            (true, false) => Op::Emit(bit(4)?),
            (true, true) => match bit(4)? {
                false => Op::Dup,
                true if bit(5)? => Op::Loop,
                true => Op::Xor,
            },
        },
    })
}

/// Runs `p` on condition `x` for at most `steps` instructions.
pub fn run(p: &BitString, x: &BitString, steps: u64) -> Outcome {
    let xl = x.len();
    let mut pc = 0usize;
    let mut h = 0usize;
    let mut out = BitString::empty();
    let mut xor = false;
    let mut used = 0u64;
    let mut mark = (0usize, 0usize);
    while let Some(op) = decode(p, pc) {
        if used >= steps {
            return Outcome::Diverged;
        }
        used += 1;
        let grown = match op {
            Op::Lit => {
                match out.concat(&p.slice(pc + 2, p.len())) {
                    Ok(v) => out = v,
                    Err(_) => return Outcome::Overflow,
                }
                break;
            }
            Op::Copy | Op::NCopy => {
                let rest = x.slice(h, xl);
                h = xl;
                out.concat(&if op == Op::NCopy { rest.complement() } else { rest })
            }
            Op::Skip => {
                h = (h + 1).min(xl);
                Ok(out)
            }
            Op::Take if h < xl => {
                h += 1;
                out.concat(&x.slice(h - 1, h))
            }
            Op::Take => Ok(out),
            Op::Emit(b) => out.concat(&BitString::from_value(b as u128, 1).unwrap()),
            Op::Dup => out.concat(&out),
            Op::Xor => {
                xor = !xor;
                Ok(out)
            }
            Op::Loop if h < xl => {
                let now = (h, out.len());
                if now == mark {
                    return Outcome::Diverged;
                }
                mark = now;
                pc = 0;
                continue;
            }
            Op::Loop => Ok(out),
        };
        match grown {
            Ok(v) => out = v,
            Err(_) => return Outcome::Overflow,
        }
        pc += op.width();
    }
    if xor {
        let k = out.len().min(xl);
        if k > 0 {
            let head = out.slice(0, k).xor(&x.slice(0, k)).expect("equal lengths");
            out = head.concat(&out.slice(k, out.len())).expect("same length");
        }
    }
    Outcome::Halted(out)
}
