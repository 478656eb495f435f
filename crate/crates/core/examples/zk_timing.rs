use std::time::Instant;

use fidoac::eid::{Attributes, DataGroup1, Date};
use fidoac::nizk::{salted_digest, zk_prove, zk_setup, zk_verify, Policy, Statement, Witness, DEFAULT_SEED};
use fidoac::primitives::HashProfile;
use rand::SeedableRng;

fn main() {
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
    let mut a = Attributes::new("DOE JANE", "900101", "300101", "DEU", "F");
    a.document_number = "C01X00T47".into();
    a.personal_number = "ZE184226B12345".into();
    let dg1 = DataGroup1::encode(&a).unwrap();
    let nonce = [3u8; 16];
    let policy = Policy::age_over(18, Date::parse("20230101").unwrap());
    for (profile, tau) in [(HashProfile::Test, 40), (HashProfile::Default, 137)] {
        let t = Instant::now();
        let crs = zk_setup(&policy, profile, tau, DEFAULT_SEED).unwrap();
        println!("{profile}: setup {:?} gates {:?}", t.elapsed(), crs.circuit().counts());
        let stmt = Statement { m: salted_digest(profile, dg1.as_bytes(), &nonce), policy: policy.clone(), profile };
        let wit = Witness { dg1: dg1.clone(), nonce };
        let t = Instant::now();
        let p = zk_prove(&crs, &stmt, &wit, &mut rng).unwrap();
        println!("  prove {:?} size {}", t.elapsed(), p.size());
        let t = Instant::now();
        assert!(zk_verify(&crs, &stmt, &p));
        println!("  verify {:?}", t.elapsed());
    }
}
