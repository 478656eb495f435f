//! Three-party MPC-in-the-head over a boolean circuit.
//!
//! The witness is XOR-shared among three simulated parties. XOR and NOT
//! gates are local; AND gate `t` is computed by party `i` as
//!
//! ```text
//! z_i = (a_i & b_i) ^ (a_{i+1} & b_i) ^ (a_i & b_{i+1}) ^ R_i[t] ^ R_{i+1}[t]
//! ```
//!
//! where `R_i` is the random tape of party `i` expanded from a 16-byte seed.
//! Parties 0 and 1 also draw their input shares from their tapes; party 2's
//! share is explicit. A view is the list of AND outputs of one party.
//!
//! For challenge `e` the proof opens parties `e` and `e+1`: both seeds,
//! party 2's input share if opened, the AND outputs of party `e+1`, the
//! output shares of `e` and `e+1` and the commitment of party `e+2`. The
//! verifier recomputes party `e`'s view, checks both output shares against
//! the recomputation and derives the third from the public output.
//!
//! Evaluation is bit-sliced: lane `r` of every `u64` holds repetition `r`
//! of the current batch, so 64 repetitions are evaluated together.

use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest as _, Sha256};

use super::circuit::{Bit, Circuit, Gate};
use crate::primitives::encode;

pub const SEED_LEN: usize = 16;
pub type Seed = [u8; SEED_LEN];
pub const LANES: usize = 64;

/// Opening for one repetition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepOpening {
    pub e: u8,
    pub seed_e: Seed,
    pub seed_e1: Seed,
    /// Party 2's input share, present iff party 2 is opened (`e` is 1 or 2).
    pub x2: Option<Vec<u8>>,
    /// AND outputs of party `e+1`, packed most significant bit first.
    pub view_e1: Vec<u8>,
    pub commit_e2: [u8; 32],
    /// Output shares of the two opened parties.
    pub y_e: Vec<u8>,
    pub y_e1: Vec<u8>,
}

/// Per-repetition transcript contribution: output shares and commitments
/// of all three parties, in party order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepTranscript {
    pub y: [Vec<u8>; 3],
    pub c: [[u8; 32]; 3],
}

impl RepTranscript {
    pub fn absorb(&self, h: &mut Sha256) {
        for y in &self.y {
            h.update(y);
        }
        for c in &self.c {
            h.update(c);
        }
    }
}

pub fn packed_len(bits: usize) -> usize {
    bits.div_ceil(8)
}

/// True when the unused low bits of the final byte are zero.
pub fn padding_is_zero(bytes: &[u8], bits: usize) -> bool {
    match (bits % 8, bytes.last()) {
        (0, _) | (_, None) => true,
        (used, Some(last)) => last & (0xff >> used) == 0,
    }
}

fn tape_bytes(seed: &Seed, n_bits: usize) -> Vec<u8> {
    let key: [u8; 32] = Sha256::digest(encode(&[b"fidoac/zk-tape", seed])).into();
    let mut rng = ChaCha20Rng::from_seed(key);
    let mut buf = vec![0u8; packed_len(n_bits)];
    rng.fill_bytes(&mut buf);
    if n_bits % 8 != 0 {
        let last = buf.len() - 1;
        buf[last] &= !(0xff >> (n_bits % 8));
    }
    buf
}

/// In-place transpose of a 64x64 bit matrix: afterwards bit `i` of row `j`
/// is the former bit `j` of row `i`.
fn transpose64(a: &mut [u64; 64]) {
    let mut j = 32usize;
    let mut m: u64 = 0x0000_0000_ffff_ffff;
    while j != 0 {
        let mut k = 0usize;
        while k < 64 {
            let t = ((a[k] >> j) ^ a[k + j]) & m;
            a[k] ^= t << j;
            a[k + j] ^= t;
            k = (k + j + 1) & !j;
        }
        j >>= 1;
        m ^= m << j;
    }
}

/// Bit `k` (stream order) of `row` starting at bit `64 * block`, as the low
/// bit of the result. Missing bytes read as zero.
fn row_block(row: &[u8], block: usize) -> u64 {
    let mut buf = [0u8; 8];
    let start = block * 8;
    if start < row.len() {
        let end = (start + 8).min(row.len());
        buf[..end - start].copy_from_slice(&row[start..end]);
    }
    u64::from_be_bytes(buf).reverse_bits()
}

/// Bit-slices up to 64 packed bit strings: bit `l` of output word `k` is
/// bit `k` of `rows[l]`.
fn to_lanes(rows: &[&[u8]], n_bits: usize) -> Vec<u64> {
    assert!(rows.len() <= LANES);
    let blocks = n_bits.div_ceil(64);
    let mut out = Vec::with_capacity(blocks * 64);
    for b in 0..blocks {
        let mut m = [0u64; 64];
        for (l, row) in rows.iter().enumerate() {
            m[l] = row_block(row, b);
        }
        transpose64(&mut m);
        out.extend_from_slice(&m);
    }
    out.truncate(n_bits);
    out
}

/// Inverse of [`to_lanes`] for the first `n_lanes` lanes.
fn from_lanes(words: &[u64], n_lanes: usize) -> Vec<Vec<u8>> {
    let n_bytes = packed_len(words.len());
    let mut rows: Vec<Vec<u8>> = (0..n_lanes).map(|_| Vec::with_capacity(n_bytes + 8)).collect();
    for chunk in words.chunks(64) {
        let mut m = [0u64; 64];
        m[..chunk.len()].copy_from_slice(chunk);
        transpose64(&mut m);
        for (l, row) in rows.iter_mut().enumerate() {
            row.extend_from_slice(&m[l].reverse_bits().to_be_bytes());
        }
    }
    for row in rows.iter_mut() {
        row.truncate(n_bytes);
    }
    rows
}

pub fn commit(seed: &Seed, x2: Option<&[u8]>, view: &[u8]) -> [u8; 32] {
    Sha256::digest(encode(&[b"fidoac/zk-commit", seed, x2.unwrap_or(&[]), view])).into()
}

/// Input-share and AND-gate tapes of one party, bit-sliced over a batch.
struct Tapes {
    input: Vec<u64>,
    and: Vec<u64>,
    /// Packed input-share bits per lane.
    input_rows: Vec<Vec<u8>>,
}

fn expand_tapes(circuit: &Circuit, seeds: &[Seed]) -> Tapes {
    let n_in = circuit.n_inputs();
    let n_and = circuit.counts().and;
    // Relation circuits have byte-aligned inputs, so the AND tape starts on
    // a byte boundary.
    assert_eq!(n_in % 8, 0);
    let raw: Vec<Vec<u8>> = seeds.iter().map(|s| tape_bytes(s, n_in + n_and)).collect();
    let input_rows: Vec<Vec<u8>> = raw.iter().map(|r| r[..n_in / 8].to_vec()).collect();
    let and_rows: Vec<&[u8]> = raw.iter().map(|r| &r[n_in / 8..]).collect();
    let input_refs: Vec<&[u8]> = input_rows.iter().map(|r| r.as_slice()).collect();
    Tapes { input: to_lanes(&input_refs, n_in), and: to_lanes(&and_rows, n_and), input_rows }
}

fn lane_mask(n: usize) -> u64 {
    if n == LANES {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn outputs_of(circuit: &Circuit, wires: &[u64], party0: u64) -> Vec<u64> {
    circuit
        .outputs()
        .iter()
        .map(|o| match *o {
            Bit::Zero => 0,
            Bit::One => party0,
            Bit::Wire(w) => wires[w as usize],
        })
        .collect()
}

/// Deliberate deviations used by the cheating-prover experiments. Masks
/// select lanes; index is the party.
#[derive(Debug, Clone, Default)]
pub struct Tamper {
    /// Flip the AND output of gate `.0` for the lanes in `.1[party]`.
    pub and_gate: Option<(usize, [u64; 3])>,
    /// Flip output-share bits after evaluation.
    pub outputs: Vec<(usize, [u64; 3])>,
}

/// Prover-side data for one batch of repetitions.
pub struct ProverBatch {
    pub seeds: Vec<[Seed; 3]>,
    pub x2: Vec<Vec<u8>>,
    pub views: Vec<[Vec<u8>; 3]>,
    pub transcripts: Vec<RepTranscript>,
}

/// Runs all three parties on `inputs` for `seeds.len()` (at most 64)
/// repetitions.
pub fn prove_batch(circuit: &Circuit, inputs: &[bool], seeds: Vec<[Seed; 3]>, tamper: &Tamper) -> ProverBatch {
    let n = seeds.len();
    assert!((1..=LANES).contains(&n));
    let all = lane_mask(n);
    let tapes: Vec<Tapes> =
        (0..3).map(|p| expand_tapes(circuit, &seeds.iter().map(|s| s[p]).collect::<Vec<_>>())).collect();

    let n_wires = circuit.n_wires();
    let n_in = circuit.n_inputs();
    let mut w: [Vec<u64>; 3] = std::array::from_fn(|_| Vec::with_capacity(n_wires));
    assert_eq!(inputs.len(), n_in);
    for (j, &bit) in inputs.iter().enumerate() {
        let a = tapes[0].input[j];
        let b = tapes[1].input[j];
        let x = if bit { all } else { 0 };
        w[0].push(a);
        w[1].push(b);
        w[2].push(x ^ a ^ b);
    }

    let n_and = circuit.counts().and;
    let mut views: [Vec<u64>; 3] = std::array::from_fn(|_| Vec::with_capacity(n_and));
    let mut t = 0usize;
    for g in circuit.gates() {
        match *g {
            Gate::Xor(a, b) => {
                for wp in w.iter_mut() {
                    let v = wp[a as usize] ^ wp[b as usize];
                    wp.push(v);
                }
            }
            Gate::Not(a) => {
                let v = !w[0][a as usize];
                w[0].push(v);
                for wp in w.iter_mut().skip(1) {
                    let v = wp[a as usize];
                    wp.push(v);
                }
            }
            Gate::And(a, b) => {
                let (a, b) = (a as usize, b as usize);
                let mut z = [0u64; 3];
                for i in 0..3 {
                    let j = (i + 1) % 3;
                    z[i] = (w[i][a] & w[i][b])
                        ^ (w[j][a] & w[i][b])
                        ^ (w[i][a] & w[j][b])
                        ^ tapes[i].and[t]
                        ^ tapes[j].and[t];
                }
                if let Some((gate, masks)) = tamper.and_gate {
                    if gate == t {
                        for i in 0..3 {
                            z[i] ^= masks[i];
                        }
                    }
                }
                for i in 0..3 {
                    w[i].push(z[i]);
                    views[i].push(z[i]);
                }
                t += 1;
            }
        }
    }

    let mut ys: [Vec<u64>; 3] = std::array::from_fn(|p| outputs_of(circuit, &w[p], if p == 0 { all } else { 0 }));
    for &(bit, masks) in &tamper.outputs {
        for p in 0..3 {
            ys[p][bit] ^= masks[p];
        }
    }

    let x2 = from_lanes(&w[2][..n_in], n);
    let mut lane_views: [std::vec::IntoIter<Vec<u8>>; 3] =
        std::array::from_fn(|p| from_lanes(&views[p], n).into_iter());
    let mut lane_ys: [std::vec::IntoIter<Vec<u8>>; 3] = std::array::from_fn(|p| from_lanes(&ys[p], n).into_iter());
    let mut rep_views = Vec::with_capacity(n);
    let mut transcripts = Vec::with_capacity(n);
    for (lane, seed) in seeds.iter().enumerate() {
        let v: [Vec<u8>; 3] = std::array::from_fn(|p| lane_views[p].next().expect("lane"));
        let c: [[u8; 32]; 3] = std::array::from_fn(|p| commit(&seed[p], (p == 2).then_some(&x2[lane][..]), &v[p]));
        let y: [Vec<u8>; 3] = std::array::from_fn(|p| lane_ys[p].next().expect("lane"));
        transcripts.push(RepTranscript { y, c });
        rep_views.push(v);
    }
    ProverBatch { seeds, x2, views: rep_views, transcripts }
}

/// Result of replaying the two opened parties of one repetition.
pub struct Replayed {
    pub y_e: Vec<u8>,
    pub y_e1: Vec<u8>,
    pub c_e: [u8; 32],
    pub c_e1: [u8; 32],
}

/// Replays the opened parties for up to 64 repetitions. Callers must have
/// validated field lengths and `e < 3`.
pub fn replay_batch(circuit: &Circuit, reps: &[&RepOpening]) -> Vec<Replayed> {
    let n = reps.len();
    assert!((1..=LANES).contains(&n));
    let n_in = circuit.n_inputs();
    let n_and = circuit.counts().and;

    let ta = expand_tapes(circuit, &reps.iter().map(|r| r.seed_e).collect::<Vec<_>>());
    let tb = expand_tapes(circuit, &reps.iter().map(|r| r.seed_e1).collect::<Vec<_>>());

    // Slot A is party e, slot B is party e+1. Party 0 sits in slot A when
    // e = 0 and in slot B when e = 2; party 2 sits in slot A when e = 2 and
    // in slot B when e = 1.
    let mut not_a = 0u64;
    let mut not_b = 0u64;
    let mut rows_a: Vec<&[u8]> = Vec::with_capacity(n);
    let mut rows_b: Vec<&[u8]> = Vec::with_capacity(n);
    for (lane, r) in reps.iter().enumerate() {
        let bit = 1u64 << lane;
        let x2 = r.x2.as_deref();
        let (a, b) = match r.e {
            0 => {
                not_a |= bit;
                (&ta.input_rows[lane][..], &tb.input_rows[lane][..])
            }
            1 => (&ta.input_rows[lane][..], x2.expect("validated x2")),
            _ => {
                not_b |= bit;
                (x2.expect("validated x2"), &tb.input_rows[lane][..])
            }
        };
        rows_a.push(a);
        rows_b.push(b);
    }
    let xa = to_lanes(&rows_a, n_in);
    let xb = to_lanes(&rows_b, n_in);
    let vb = to_lanes(&reps.iter().map(|r| r.view_e1.as_slice()).collect::<Vec<_>>(), n_and);

    let n_wires = circuit.n_wires();
    let mut wa = Vec::with_capacity(n_wires);
    let mut wb = Vec::with_capacity(n_wires);
    wa.extend_from_slice(&xa[..n_in]);
    wb.extend_from_slice(&xb[..n_in]);
    let mut va = Vec::with_capacity(n_and);
    let mut t = 0usize;
    for g in circuit.gates() {
        match *g {
            Gate::Xor(a, b) => {
                let (a, b) = (a as usize, b as usize);
                wa.push(wa[a] ^ wa[b]);
                wb.push(wb[a] ^ wb[b]);
            }
            Gate::Not(a) => {
                wa.push(wa[a as usize] ^ not_a);
                wb.push(wb[a as usize] ^ not_b);
            }
            Gate::And(a, b) => {
                let (a, b) = (a as usize, b as usize);
                let z = (wa[a] & wa[b]) ^ (wb[a] & wa[b]) ^ (wa[a] & wb[b]) ^ ta.and[t] ^ tb.and[t];
                wa.push(z);
                wb.push(vb[t]);
                va.push(z);
                t += 1;
            }
        }
    }

    let ya = from_lanes(&outputs_of(circuit, &wa, not_a), n);
    let yb = from_lanes(&outputs_of(circuit, &wb, not_b), n);
    let views_a = from_lanes(&va, n);
    reps.iter()
        .zip(views_a)
        .zip(ya.into_iter().zip(yb))
        .map(|((r, view_a), (y_e, y_e1))| {
            let x2 = r.x2.as_deref();
            Replayed {
                y_e,
                y_e1,
                c_e: commit(&r.seed_e, if r.e == 2 { x2 } else { None }, &view_a),
                c_e1: commit(&r.seed_e1, if r.e == 1 { x2 } else { None }, &r.view_e1),
            }
        })
        .collect()
}

/// Assembles the full per-repetition transcript from a replay and the
/// public output `y_pub` (packed).
pub fn transcript_from_replay(r: &RepOpening, rep: Replayed, y_pub: &[u8]) -> RepTranscript {
    let e = r.e as usize;
    let y_e2: Vec<u8> = y_pub.iter().zip(&rep.y_e).zip(&rep.y_e1).map(|((p, a), b)| p ^ a ^ b).collect();
    let mut y: [Vec<u8>; 3] = Default::default();
    let mut c = [[0u8; 32]; 3];
    y[e] = rep.y_e;
    y[(e + 1) % 3] = rep.y_e1;
    y[(e + 2) % 3] = y_e2;
    c[e] = rep.c_e;
    c[(e + 1) % 3] = rep.c_e1;
    c[(e + 2) % 3] = r.commit_e2;
    RepTranscript { y, c }
}

/// Fresh seeds for `n` repetitions.
pub fn fresh_seeds<R: RngCore + CryptoRng>(n: usize, rng: &mut R) -> Vec<[Seed; 3]> {
    (0..n)
        .map(|_| {
            let mut s = [[0u8; SEED_LEN]; 3];
            for p in s.iter_mut() {
                rng.fill_bytes(p);
            }
            s
        })
        .collect()
}
