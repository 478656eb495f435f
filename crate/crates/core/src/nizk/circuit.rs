//! Boolean circuits over XOR, AND and NOT, built with constant folding.

use crate::primitives::{hash, Digest32, Encoder};

/// A circuit value: a known constant or a wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bit {
    Zero,
    One,
    Wire(u32),
}

impl Bit {
    pub fn constant(v: bool) -> Bit {
        if v {
            Bit::One
        } else {
            Bit::Zero
        }
    }
}

/// Each gate writes a fresh wire numbered `n_inputs + gate index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Xor(u32, u32),
    And(u32, u32),
    Not(u32),
}

#[derive(Debug, Clone)]
pub struct Builder {
    n_inputs: u32,
    gates: Vec<Gate>,
}

impl Builder {
    pub fn new(n_inputs: u32) -> Self {
        Builder { n_inputs, gates: Vec::new() }
    }

    pub fn input(&self, i: u32) -> Bit {
        assert!(i < self.n_inputs, "input {i} out of range");
        Bit::Wire(i)
    }

    fn push(&mut self, g: Gate) -> Bit {
        let w = self.n_inputs + self.gates.len() as u32;
        self.gates.push(g);
        Bit::Wire(w)
    }

    fn gate_of(&self, w: u32) -> Option<Gate> {
        w.checked_sub(self.n_inputs).map(|i| self.gates[i as usize])
    }

    pub fn not(&mut self, a: Bit) -> Bit {
        match a {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
            Bit::Wire(w) => match self.gate_of(w) {
                Some(Gate::Not(inner)) => Bit::Wire(inner),
                _ => self.push(Gate::Not(w)),
            },
        }
    }

    pub fn xor(&mut self, a: Bit, b: Bit) -> Bit {
        match (a, b) {
            (Bit::Zero, x) | (x, Bit::Zero) => x,
            (Bit::One, x) | (x, Bit::One) => self.not(x),
            (Bit::Wire(x), Bit::Wire(y)) if x == y => Bit::Zero,
            (Bit::Wire(x), Bit::Wire(y)) => self.push(Gate::Xor(x, y)),
        }
    }

    pub fn and(&mut self, a: Bit, b: Bit) -> Bit {
        match (a, b) {
            (Bit::Zero, _) | (_, Bit::Zero) => Bit::Zero,
            (Bit::One, x) | (x, Bit::One) => x,
            (Bit::Wire(x), Bit::Wire(y)) if x == y => a,
            (Bit::Wire(x), Bit::Wire(y)) => self.push(Gate::And(x, y)),
        }
    }

    pub fn or(&mut self, a: Bit, b: Bit) -> Bit {
        let x = self.xor(a, b);
        let y = self.and(a, b);
        self.xor(x, y)
    }

    /// `sel ? a : b`
    pub fn mux(&mut self, sel: Bit, a: Bit, b: Bit) -> Bit {
        let d = self.xor(a, b);
        let t = self.and(sel, d);
        self.xor(b, t)
    }

    pub fn finish(self, outputs: Vec<Bit>) -> Circuit {
        Circuit::new(self.n_inputs, self.gates, outputs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GateCounts {
    pub xor: usize,
    pub and: usize,
    pub not: usize,
}

impl GateCounts {
    pub fn total(&self) -> usize {
        self.xor + self.and + self.not
    }
}

#[derive(Debug, Clone)]
pub struct Circuit {
    n_inputs: u32,
    gates: Vec<Gate>,
    outputs: Vec<Bit>,
    counts: GateCounts,
    digest: Digest32,
}

impl Circuit {
    fn new(n_inputs: u32, gates: Vec<Gate>, outputs: Vec<Bit>) -> Self {
        let mut counts = GateCounts::default();
        let mut enc = Encoder::new().field(b"fidoac/circuit").field(&n_inputs.to_be_bytes());
        let mut body = Vec::with_capacity(gates.len() * 9);
        for g in &gates {
            let (op, a, b) = match *g {
                Gate::Xor(a, b) => {
                    counts.xor += 1;
                    (0u8, a, b)
                }
                Gate::And(a, b) => {
                    counts.and += 1;
                    (1, a, b)
                }
                Gate::Not(a) => {
                    counts.not += 1;
                    (2, a, 0)
                }
            };
            body.push(op);
            body.extend_from_slice(&a.to_be_bytes());
            body.extend_from_slice(&b.to_be_bytes());
        }
        enc.push(&body);
        let mut out = Vec::with_capacity(outputs.len() * 5);
        for o in &outputs {
            match *o {
                Bit::Zero => out.push(0),
                Bit::One => out.push(1),
                Bit::Wire(w) => {
                    out.push(2);
                    out.extend_from_slice(&w.to_be_bytes());
                }
            }
        }
        enc.push(&out);
        let digest = hash(&enc.finish());
        Circuit { n_inputs, gates, outputs, counts, digest }
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs as usize
    }

    pub fn n_wires(&self) -> usize {
        self.n_inputs as usize + self.gates.len()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn outputs(&self) -> &[Bit] {
        &self.outputs
    }

    pub fn counts(&self) -> GateCounts {
        self.counts
    }

    /// Hash of the canonical gate list; identifies the relation.
    pub fn digest(&self) -> Digest32 {
        self.digest
    }

    /// Plain evaluation.
    pub fn eval(&self, inputs: &[bool]) -> Vec<bool> {
        assert_eq!(inputs.len(), self.n_inputs(), "input length");
        let mut w = Vec::with_capacity(self.n_wires());
        w.extend_from_slice(inputs);
        for g in &self.gates {
            let v = match *g {
                Gate::Xor(a, b) => w[a as usize] ^ w[b as usize],
                Gate::And(a, b) => w[a as usize] & w[b as usize],
                Gate::Not(a) => !w[a as usize],
            };
            w.push(v);
        }
        self.outputs
            .iter()
            .map(|o| match *o {
                Bit::Zero => false,
                Bit::One => true,
                Bit::Wire(i) => w[i as usize],
            })
            .collect()
    }
}

/// Bits of `bytes`, most significant bit first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<bool> {
    bytes.iter().flat_map(|b| (0..8).rev().map(move |i| (b >> i) & 1 == 1)).collect()
}

/// Inverse of [`bytes_to_bits`]; the length must be a multiple of eight.
pub fn bits_to_bytes(bits: &[bool]) -> Vec<u8> {
    assert_eq!(bits.len() % 8, 0);
    bits.chunks(8).map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | b as u8)).collect()
}
