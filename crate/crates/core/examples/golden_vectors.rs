//! Writes the shared `bind_challenge` vectors to `testdata/bind_challenge/`.
//!
//! `cargo run -p fidoac-core --example golden_vectors [out-dir]`

use std::path::PathBuf;

use fidoac::client::ChipAccess;
use fidoac::eid::{Attributes, Date};
use fidoac::fido::bind_challenge;
use fidoac::flow::Deployment;
use fidoac::nizk::Policy;
use fidoac::primitives::HashProfile;
use fidoac::wire::b64_encode;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../testdata/bind_challenge"));
    std::fs::create_dir_all(&out).expect("create output dir");
    let rs_lens = [32usize, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 16, 0, 1, 48, 64, 100, 255, 4096];
    for (i, rs_len) in rs_lens.into_iter().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(1000 + i as u64);
        let dep = Deployment::new(HashProfile::Test, &mut rng);
        let policy = if i % 4 == 3 { Policy::None } else { Policy::age_over(18, Date::parse("20230101").unwrap()) };
        let rp = dep.relying_party("https://rp.example", &policy, 2).unwrap();
        let mut holder = dep.holder(&Attributes::new("DOE JOHN", "800101", "330101", "UTO", "M"), &mut rng).unwrap();
        let mut rs = vec![0u8; rs_len];
        rng.fill_bytes(&mut rs);
        let c = fidoac::fido::ac_challenge("https://rp.example", &rs);
        let mut access = ChipAccess::new(&mut holder.chip, holder.password);
        let (proof, _) = holder.client.obtain_proof(&mut access, &dep.mediator, &c, &rp.crs, &mut rng).unwrap();
        let doc = serde_json::json!({
            "name": format!("vector-{i:02}"),
            "challenge": b64_encode(&rs),
            "attribute_proof": b64_encode(&proof.canonical()),
            "bound_challenge": b64_encode(&bind_challenge(&rs, &proof)),
        });
        let path = out.join(format!("{i:02}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap() + "\n").expect("write vector");
        println!("{}", path.display());
    }
}
