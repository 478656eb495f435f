//! SHA-256 (with a configurable round count) and comparators as circuit
//! gadgets. Words are little-endian bit arrays: index 0 is the least
//! significant bit.

use super::circuit::{Bit, Builder};
use crate::primitives::sha256::{IV, K};

pub type Word = [Bit; 32];

pub fn word_const(v: u32) -> Word {
    std::array::from_fn(|i| Bit::constant((v >> i) & 1 == 1))
}

/// Word from 32 bits given most significant first.
pub fn word_from_be_bits(bits: &[Bit]) -> Word {
    assert_eq!(bits.len(), 32);
    std::array::from_fn(|i| bits[31 - i])
}

pub fn word_to_be_bits(w: &Word) -> impl Iterator<Item = Bit> + '_ {
    (0..32).rev().map(move |i| w[i])
}

fn rotr(w: &Word, n: usize) -> Word {
    std::array::from_fn(|i| w[(i + n) % 32])
}

fn shr(w: &Word, n: usize) -> Word {
    std::array::from_fn(|i| if i + n < 32 { w[i + n] } else { Bit::Zero })
}

fn xor_w(b: &mut Builder, x: &Word, y: &Word) -> Word {
    std::array::from_fn(|i| b.xor(x[i], y[i]))
}

fn xor3(b: &mut Builder, x: &Word, y: &Word, z: &Word) -> Word {
    let t = xor_w(b, x, y);
    xor_w(b, &t, z)
}

/// Ripple-carry addition modulo 2^32, one AND per bit.
pub fn add(b: &mut Builder, x: &Word, y: &Word) -> Word {
    let mut carry = Bit::Zero;
    std::array::from_fn(|i| {
        let ac = b.xor(x[i], carry);
        let bc = b.xor(y[i], carry);
        let s = b.xor(ac, y[i]);
        if i < 31 {
            let t = b.and(ac, bc);
            carry = b.xor(t, carry);
        }
        s
    })
}

fn big_sigma0(b: &mut Builder, a: &Word) -> Word {
    xor3(b, &rotr(a, 2), &rotr(a, 13), &rotr(a, 22))
}

fn big_sigma1(b: &mut Builder, e: &Word) -> Word {
    xor3(b, &rotr(e, 6), &rotr(e, 11), &rotr(e, 25))
}

fn small_sigma0(b: &mut Builder, w: &Word) -> Word {
    xor3(b, &rotr(w, 7), &rotr(w, 18), &shr(w, 3))
}

fn small_sigma1(b: &mut Builder, w: &Word) -> Word {
    xor3(b, &rotr(w, 17), &rotr(w, 19), &shr(w, 10))
}

fn ch(b: &mut Builder, e: &Word, f: &Word, g: &Word) -> Word {
    std::array::from_fn(|i| {
        let fg = b.xor(f[i], g[i]);
        let t = b.and(e[i], fg);
        b.xor(g[i], t)
    })
}

fn maj(b: &mut Builder, x: &Word, y: &Word, z: &Word) -> Word {
    std::array::from_fn(|i| {
        let xy = b.xor(x[i], y[i]);
        let xz = b.xor(x[i], z[i]);
        let t = b.and(xy, xz);
        b.xor(x[i], t)
    })
}

/// One compression-function call, stopping after `rounds` rounds.
pub fn compress(b: &mut Builder, state: &[Word; 8], block: &[Word; 16], rounds: usize) -> [Word; 8] {
    let mut w: Vec<Word> = block.to_vec();
    for t in 16..rounds {
        let s0 = small_sigma0(b, &w[t - 15]);
        let s1 = small_sigma1(b, &w[t - 2]);
        let x = add(b, &w[t - 16], &s0);
        let y = add(b, &w[t - 7], &s1);
        w.push(add(b, &x, &y));
    }
    let [mut a, mut bb, mut c, mut d, mut e, mut f, mut g, mut h] = *state;
    for t in 0..rounds {
        let s1 = big_sigma1(b, &e);
        let chv = ch(b, &e, &f, &g);
        let t1 = add(b, &h, &s1);
        let t1 = add(b, &t1, &chv);
        let t1 = add(b, &t1, &word_const(K[t]));
        let t1 = add(b, &t1, &w[t]);
        let s0 = big_sigma0(b, &a);
        let mj = maj(b, &a, &bb, &c);
        let t2 = add(b, &s0, &mj);
        h = g;
        g = f;
        f = e;
        e = add(b, &d, &t1);
        d = c;
        c = bb;
        bb = a;
        a = add(b, &t1, &t2);
    }
    let out = [a, bb, c, d, e, f, g, h];
    std::array::from_fn(|i| add(b, &state[i], &out[i]))
}

/// Hashes a byte-aligned message given as bits (most significant first per
/// byte) and returns the 256 digest bits in the same order.
pub fn sha256(b: &mut Builder, msg: &[Bit], rounds: usize) -> Vec<Bit> {
    assert_eq!(msg.len() % 8, 0, "message must be byte aligned");
    let bit_len = msg.len() as u64;
    let mut bits = msg.to_vec();
    bits.push(Bit::One);
    while bits.len() % 512 != 448 {
        bits.push(Bit::Zero);
    }
    bits.extend((0..64).rev().map(|i| Bit::constant((bit_len >> i) & 1 == 1)));

    let mut state: [Word; 8] = std::array::from_fn(|i| word_const(IV[i]));
    for chunk in bits.chunks(512) {
        let block: [Word; 16] = std::array::from_fn(|j| word_from_be_bits(&chunk[j * 32..j * 32 + 32]));
        state = compress(b, &state, &block, rounds);
    }
    state.iter().flat_map(|w| word_to_be_bits(w).collect::<Vec<_>>()).collect()
}

/// `x <= k` for an unsigned value given most significant bit first.
pub fn le_const(b: &mut Builder, x: &[Bit], k: u64) -> Bit {
    let n = x.len();
    assert!(n <= 64 && (n == 64 || k >> n == 0), "constant wider than operand");
    let mut r = Bit::One;
    for (pos, &xi) in x.iter().rev().enumerate() {
        r = if (k >> pos) & 1 == 1 {
            let nr = b.not(r);
            let t = b.and(xi, nr);
            b.not(t)
        } else {
            let nx = b.not(xi);
            b.and(nx, r)
        };
    }
    r
}

/// AND of all bits (balanced tree).
pub fn and_all(b: &mut Builder, bits: &[Bit]) -> Bit {
    match bits.len() {
        0 => Bit::One,
        1 => bits[0],
        n => {
            let l = and_all(b, &bits[..n / 2]);
            let r = and_all(b, &bits[n / 2..]);
            b.and(l, r)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nizk::circuit::{bits_to_bytes, bytes_to_bits};
    use crate::primitives::sha256::sha256_rounds;
    use proptest::prelude::*;

    fn hash_circuit_eval(data: &[u8], rounds: usize) -> Vec<u8> {
        let mut b = Builder::new(data.len() as u32 * 8);
        let msg: Vec<Bit> = (0..data.len() as u32 * 8).map(|i| b.input(i)).collect();
        let out = sha256(&mut b, &msg, rounds);
        let c = b.finish(out);
        bits_to_bytes(&c.eval(&bytes_to_bits(data)))
    }

    #[test]
    fn gadget_matches_software_hash() {
        for rounds in [1, 8, 16, 17, 64] {
            for len in [0usize, 3, 48, 55, 56, 88] {
                let data: Vec<u8> = (0..len as u8).map(|i| i.wrapping_mul(37) ^ 0x5a).collect();
                assert_eq!(hash_circuit_eval(&data, rounds), sha256_rounds(&data, rounds), "rounds {rounds} len {len}");
            }
        }
    }

    #[test]
    fn add_matches_wrapping_add() {
        let mut b = Builder::new(64);
        let x: Word = std::array::from_fn(|i| b.input(i as u32));
        let y: Word = std::array::from_fn(|i| b.input(32 + i as u32));
        let s = add(&mut b, &x, &y);
        let c = b.finish(s.to_vec());
        assert_eq!(c.counts().and, 31);
        for (p, q) in [(0u32, 0u32), (u32::MAX, 1), (0x8000_0000, 0x8000_0000), (123_456_789, 987_654_321)] {
            let inputs: Vec<bool> =
                (0..32).map(|i| (p >> i) & 1 == 1).chain((0..32).map(|i| (q >> i) & 1 == 1)).collect();
            let out = c.eval(&inputs);
            let v = out.iter().enumerate().fold(0u32, |acc, (i, &bit)| acc | ((bit as u32) << i));
            assert_eq!(v, p.wrapping_add(q));
        }
    }

    proptest! {
        #[test]
        fn le_const_matches_integer_compare(x in 0u64..4096, k in 0u64..4096) {
            let mut b = Builder::new(12);
            let bits: Vec<Bit> = (0..12).map(|i| b.input(i)).collect();
            let o = le_const(&mut b, &bits, k);
            let c = b.finish(vec![o]);
            let inputs: Vec<bool> = (0..12).rev().map(|i| (x >> i) & 1 == 1).collect();
            prop_assert_eq!(c.eval(&inputs)[0], x <= k);
        }
    }
}
