//! Simulated identity document: issuance, the password-keyed access
//! channel, passive authentication and chip-authentication responses.
//!
//! This models the security contract of the chip protocols only. There is
//! no APDU framing and no ASN.1.

mod mrz;

use std::fmt;

use rand::{CryptoRng, Rng, RngCore};
use thiserror::Error;

pub use mrz::{
    check_digit, full_year, parse_yymmdd, Attributes, DataGroup1, Date, BIRTH_DATE_OFFSET, DG1_LEN,
    DOCUMENT_NUMBER_LEN, DOCUMENT_NUMBER_OFFSET, EXPIRY_DATE_OFFSET, PERSONAL_NUMBER_LEN, PERSONAL_NUMBER_OFFSET,
};

use crate::primitives::{
    ae_open, ae_seal, encode, kdf, ke_derive, random_bytes, random_nonce, sign, verify, Ciphertext, Decoder, Digest32,
    HashProfile, KeyPair, PrimitiveError, PublicKey, SecretKey, SessionKey, Signature,
};

/// Plaintext of the terminal's get-challenge command.
pub const GET_CHALLENGE: &[u8] = b"GET_CHALLENGE";
/// Length of the chip's random challenge.
pub const CA_CHALLENGE_LEN: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EidError {
    #[error("invalid attributes: {0}")]
    BadAttributes(String),
    #[error("access denied")]
    AccessDenied,
    #[error("channel closed")]
    ChannelClosed,
    #[error("chip authentication command rejected")]
    CaReject,
    #[error("fixture: {0}")]
    Fixture(String),
}

/// What the chip hands out to any reader with the access password.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ChipPublicData {
    pub dg1_hash: Digest32,
    pub pk_eid: PublicKey,
    pub pi_pa: Signature,
}

impl ChipPublicData {
    /// Message covered by the issuer's signature.
    pub fn signed_message(dg1_hash: &Digest32, pk_eid: &PublicKey) -> Vec<u8> {
        encode(&[b"fidoac/pa", dg1_hash.as_ref(), pk_eid.as_ref()])
    }

    pub fn canonical(&self) -> Vec<u8> {
        encode(&[self.dg1_hash.as_ref(), self.pk_eid.as_ref(), self.pi_pa.as_ref()])
    }

    pub fn from_canonical(bytes: &[u8]) -> Result<Self, PrimitiveError> {
        let mut d = Decoder::new(bytes);
        let out = ChipPublicData {
            dg1_hash: Digest32(d.array()?),
            pk_eid: PublicKey(d.array()?),
            pi_pa: Signature(d.array()?),
        };
        d.finish()?;
        Ok(out)
    }
}

/// Passive authentication: checks the issuer signature over
/// `(dg1_hash, pk_eid)`.
pub fn pa_verify(data: &ChipPublicData, issuer_pk: &PublicKey) -> bool {
    verify(issuer_pk, &ChipPublicData::signed_message(&data.dg1_hash, &data.pk_eid), &data.pi_pa)
}

/// Access password derived from the MRZ information (document number, birth
/// date and expiry date, each followed by its check digit).
pub fn access_password(document_number: &str, birth_date: &str, expiry_date: &str) -> [u8; 32] {
    let mut info = Vec::with_capacity(24);
    for field in [document_number, birth_date, expiry_date] {
        info.extend_from_slice(field.as_bytes());
        info.push(check_digit(field.as_bytes()));
    }
    kdf(&info, b"fidoac/access", b"access-password")
}

/// Terminal side of an open access channel.
#[derive(Clone)]
pub struct ChannelHandle {
    session: u64,
    key: SessionKey,
}

impl ChannelHandle {
    pub fn session_key(&self) -> &SessionKey {
        &self.key
    }
}

impl fmt::Debug for ChannelHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChannelHandle").field("session", &self.session).finish()
    }
}

#[derive(Clone)]
struct OpenSession {
    id: u64,
    key: SessionKey,
}

/// A personalised chip. The chip-authentication secret never leaves this
/// struct through any protocol operation.
#[derive(Clone)]
pub struct ChipState {
    ask: SecretKey,
    attributes: Attributes,
    dg1: DataGroup1,
    public: ChipPublicData,
    access_password: [u8; 32],
    profile: HashProfile,
    session: Option<OpenSession>,
    sessions_opened: u64,
}

impl fmt::Debug for ChipState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChipState")
            .field("pk_eid", &self.public.pk_eid)
            .field("profile", &self.profile)
            .finish_non_exhaustive()
    }
}

const RANDOM_ALPHABET: &[u8; 36] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

fn random_code<R: RngCore>(rng: &mut R, len: usize) -> String {
    (0..len).map(|_| RANDOM_ALPHABET[rng.gen_range(0..RANDOM_ALPHABET.len())] as char).collect()
}

/// Issues a fresh document for `att`.
///
/// Document and personal numbers are resampled uniformly from `[A-Z0-9]` on
/// every call (23 characters, about 118 bits), so two documents for the same
/// person have unrelated DG1 digests. The chip key pair is fresh as well.
pub fn iss_cred<R: RngCore + CryptoRng>(
    att: &Attributes,
    issuer_sk: &SecretKey,
    profile: HashProfile,
    rng: &mut R,
) -> Result<ChipState, EidError> {
    att.validate()?;
    let mut attributes = att.clone();
    attributes.document_number = random_code(rng, DOCUMENT_NUMBER_LEN);
    attributes.personal_number = random_code(rng, PERSONAL_NUMBER_LEN);
    let ask = SecretKey::generate(rng);
    let dg1 = DataGroup1::encode(&attributes)?;
    let dg1_hash = profile.digest(dg1.as_bytes());
    let pk_eid = ask.public_key();
    let pi_pa = sign(issuer_sk, &ChipPublicData::signed_message(&dg1_hash, &pk_eid));
    ChipState::assemble(ask, attributes, ChipPublicDataParts { dg1_hash, pk_eid, pi_pa }, profile)
}

struct ChipPublicDataParts {
    dg1_hash: Digest32,
    pk_eid: PublicKey,
    pi_pa: Signature,
}

impl ChipState {
    fn assemble(
        ask: SecretKey,
        attributes: Attributes,
        parts: ChipPublicDataParts,
        profile: HashProfile,
    ) -> Result<Self, EidError> {
        let dg1 = DataGroup1::encode(&attributes)?;
        let access_password =
            access_password(&attributes.document_number, &attributes.birth_date, &attributes.expiry_date);
        Ok(ChipState {
            ask,
            attributes,
            dg1,
            public: ChipPublicData { dg1_hash: parts.dg1_hash, pk_eid: parts.pk_eid, pi_pa: parts.pi_pa },
            access_password,
            profile,
            session: None,
            sessions_opened: 0,
        })
    }

    /// A copy carrying this chip's data groups and issuer signature but a
    /// fresh chip key, as an attacker who skimmed the chip could build.
    /// Passive authentication still succeeds for the copy; chip
    /// authentication does not.
    pub fn counterfeit<R: RngCore + CryptoRng>(&self, rng: &mut R) -> ChipState {
        let mut copy = self.clone();
        copy.ask = SecretKey::generate(rng);
        copy.session = None;
        copy
    }

    /// The printed data page. Readable without the chip, which is how the
    /// holder obtains the access password.
    pub fn attributes(&self) -> &Attributes {
        &self.attributes
    }

    pub fn profile(&self) -> HashProfile {
        self.profile
    }

    pub fn pk_eid(&self) -> PublicKey {
        self.public.pk_eid
    }

    /// Opens the access channel. Both sides contribute a fresh 16-byte nonce
    /// and the channel key is derived from the password and both nonces.
    pub fn establish_channel<R: RngCore + CryptoRng>(
        &mut self,
        password: &[u8],
        rng: &mut R,
    ) -> Result<ChannelHandle, EidError> {
        if password != self.access_password {
            return Err(EidError::AccessDenied);
        }
        let rnd_ifd: [u8; 16] = random_bytes(rng);
        let rnd_icc: [u8; 16] = random_bytes(rng);
        let key = SessionKey(kdf(password, &encode(&[&rnd_ifd, &rnd_icc]), b"fidoac/channel"));
        self.sessions_opened += 1;
        let id = self.sessions_opened;
        self.session = Some(OpenSession { id, key: key.clone() });
        Ok(ChannelHandle { session: id, key })
    }

    pub fn close_channel(&mut self) {
        self.session = None;
    }

    fn session_for(&self, ch: &ChannelHandle) -> Result<&OpenSession, EidError> {
        match &self.session {
            Some(s) if s.id == ch.session => Ok(s),
            _ => Err(EidError::ChannelClosed),
        }
    }

    /// Reads digest, chip key and issuer signature through the channel.
    pub fn read_public<R: RngCore + CryptoRng>(
        &self,
        ch: &ChannelHandle,
        rng: &mut R,
    ) -> Result<ChipPublicData, EidError> {
        let s = self.session_for(ch)?;
        let ct = ae_seal(&s.key, random_nonce(rng), b"EF.SOD", &self.public.canonical());
        let pt = ae_open(&ch.key, &ct).map_err(|_| EidError::ChannelClosed)?;
        ChipPublicData::from_canonical(&pt).map_err(|_| EidError::ChannelClosed)
    }

    /// Reads the raw DG1 bytes. Only the holder's own client calls this; the
    /// bytes are the proof witness and never go to the mediator.
    pub fn read_dg1<R: RngCore + CryptoRng>(&self, ch: &ChannelHandle, rng: &mut R) -> Result<DataGroup1, EidError> {
        let s = self.session_for(ch)?;
        let ct = ae_seal(&s.key, random_nonce(rng), b"EF.DG1", self.dg1.as_bytes());
        let pt = ae_open(&ch.key, &ct).map_err(|_| EidError::ChannelClosed)?;
        Ok(DataGroup1(pt.try_into().map_err(|_| EidError::ChannelClosed)?))
    }

    /// Chip authentication: answers the terminal's encrypted get-challenge
    /// command with a fresh random challenge. The answer carries the exact
    /// command ciphertext as associated data, so it cannot be replayed
    /// against a different command.
    pub fn ca_respond<R: RngCore + CryptoRng>(
        &self,
        pk_terminal: &PublicKey,
        cmd_cha: &Ciphertext,
        rng: &mut R,
    ) -> Result<Ciphertext, EidError> {
        let key = ke_derive(pk_terminal, &self.ask).map_err(|_| EidError::CaReject)?;
        let cmd = ae_open(&key, cmd_cha).map_err(|_| EidError::CaReject)?;
        if cmd != GET_CHALLENGE {
            return Err(EidError::CaReject);
        }
        let challenge: [u8; CA_CHALLENGE_LEN] = random_bytes(rng);
        Ok(ae_seal(&key, random_nonce(rng), &cmd_cha.canonical(), &challenge))
    }

    /// Serialises the chip as a `key=value` fixture. This is the chip's own
    /// persistent memory and includes its secret key.
    pub fn to_fixture(&self) -> String {
        let a = &self.attributes;
        let mut out = String::from("# fidoac simulated eID\n");
        for (k, v) in [
            ("profile", self.profile.tag().to_owned()),
            ("name", a.name.clone()),
            ("birth_date", a.birth_date.clone()),
            ("expiry_date", a.expiry_date.clone()),
            ("nationality", a.nationality.clone()),
            ("sex", a.sex.clone()),
            ("document_number", a.document_number.clone()),
            ("personal_number", a.personal_number.clone()),
            ("ask", hex::encode(self.ask.to_seed())),
            ("pi_pa", self.public.pi_pa.to_hex()),
        ] {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    pub fn from_fixture(text: &str) -> Result<Self, EidError> {
        let kv = crate::fixtures::parse_kv(text).map_err(EidError::Fixture)?;
        let get = |k: &str| kv.get(k).cloned().ok_or_else(|| EidError::Fixture(format!("missing key `{k}`")));
        let profile = HashProfile::from_tag(&get("profile")?).ok_or_else(|| EidError::Fixture("profile".into()))?;
        let attributes = Attributes {
            name: get("name")?,
            birth_date: get("birth_date")?,
            expiry_date: get("expiry_date")?,
            nationality: get("nationality")?,
            sex: get("sex")?,
            document_number: get("document_number")?,
            personal_number: get("personal_number")?,
        };
        let seed: [u8; 32] = hex::decode(get("ask")?)
            .ok()
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| EidError::Fixture("ask".into()))?;
        let ask = SecretKey::from_seed(seed);
        let pi_pa = Signature::from_hex(&get("pi_pa")?).map_err(|_| EidError::Fixture("pi_pa".into()))?;
        let dg1 = DataGroup1::encode(&attributes)?;
        let parts = ChipPublicDataParts { dg1_hash: profile.digest(dg1.as_bytes()), pk_eid: ask.public_key(), pi_pa };
        ChipState::assemble(ask, attributes, parts, profile)
    }

    #[cfg(test)]
    pub(crate) fn ask_seed(&self) -> [u8; 32] {
        self.ask.to_seed()
    }
}

/// Convenience for the holder: the access password printed on the data page.
pub fn password_for(att: &Attributes) -> [u8; 32] {
    access_password(&att.document_number, &att.birth_date, &att.expiry_date)
}

/// Document issuer (signs DG1 digests).
#[derive(Debug, Clone)]
pub struct Issuer {
    pub keys: KeyPair,
    pub profile: HashProfile,
}

impl Issuer {
    pub fn new<R: RngCore + CryptoRng>(profile: HashProfile, rng: &mut R) -> Self {
        Issuer { keys: KeyPair::generate(rng), profile }
    }

    pub fn issue<R: RngCore + CryptoRng>(&self, att: &Attributes, rng: &mut R) -> Result<ChipState, EidError> {
        iss_cred(att, &self.keys.sk, self.profile, rng)
    }
}

/// Digest of DG1 under `profile`, as covered by passive authentication.
pub fn dg1_digest(profile: HashProfile, dg1: &DataGroup1) -> Digest32 {
    profile.digest(dg1.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::ke_derive;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::collections::HashSet;

    fn setup() -> (ChaCha20Rng, Issuer, Attributes) {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let issuer = Issuer::new(HashProfile::Test, &mut rng);
        let att = Attributes::new("DOE JANE", "900101", "310101", "DEU", "F");
        (rng, issuer, att)
    }

    #[test]
    fn issued_chip_passes_pa() {
        let (mut rng, issuer, att) = setup();
        let chip = issuer.issue(&att, &mut rng).unwrap();
        assert!(pa_verify(&chip.public, &issuer.keys.pk));
        assert_eq!(chip.public.dg1_hash, dg1_digest(HashProfile::Test, &chip.dg1));
    }

    #[test]
    fn reissue_changes_digest_and_keys() {
        let (mut rng, issuer, att) = setup();
        let a = issuer.issue(&att, &mut rng).unwrap();
        let b = issuer.issue(&att, &mut rng).unwrap();
        assert_ne!(a.public.dg1_hash, b.public.dg1_hash);
        assert_ne!(a.public.pk_eid, b.public.pk_eid);
        assert_eq!(a.attributes.birth_date, b.attributes.birth_date);
    }

    #[test]
    fn digest_collisions_absent_over_many_reissues() {
        let (mut rng, issuer, att) = setup();
        let mut seen = HashSet::new();
        for _ in 0..10_000 {
            let chip = issuer.issue(&att, &mut rng).unwrap();
            assert!(seen.insert(chip.public.dg1_hash));
        }
    }

    #[test]
    fn bad_birth_date_rejected() {
        let (mut rng, issuer, mut att) = setup();
        att.birth_date = "991332".into();
        assert!(matches!(issuer.issue(&att, &mut rng), Err(EidError::BadAttributes(_))));
    }

    #[test]
    fn pa_rejects_mutations_and_swaps() {
        let (mut rng, issuer, att) = setup();
        let chip = issuer.issue(&att, &mut rng).unwrap();
        for i in 0..32 {
            let mut d = chip.public.clone();
            d.dg1_hash.0[i] ^= 0x01;
            assert!(!pa_verify(&d, &issuer.keys.pk));
        }
        let chips: Vec<_> = (0..10).map(|_| issuer.issue(&att, &mut rng).unwrap()).collect();
        for (i, a) in chips.iter().enumerate() {
            for (j, b) in chips.iter().enumerate() {
                if i != j {
                    let mut d = a.public.clone();
                    d.pk_eid = b.public.pk_eid;
                    assert!(!pa_verify(&d, &issuer.keys.pk));
                }
            }
        }
    }

    #[test]
    fn channel_access_control() {
        let (mut rng, issuer, att) = setup();
        let mut chip = issuer.issue(&att, &mut rng).unwrap();
        assert_eq!(chip.establish_channel(b"wrong", &mut rng).unwrap_err(), EidError::AccessDenied);
        let pw = password_for(chip.attributes());
        let ch1 = chip.establish_channel(&pw, &mut rng).unwrap();
        let first = chip.read_public(&ch1, &mut rng).unwrap();
        assert_eq!(first, chip.public);
        assert_eq!(chip.read_public(&ch1, &mut rng).unwrap(), first);
        assert_eq!(chip.read_dg1(&ch1, &mut rng).unwrap(), chip.dg1);

        let ch2 = chip.establish_channel(&pw, &mut rng).unwrap();
        assert_ne!(ch1.session_key(), ch2.session_key());
        assert_eq!(chip.read_public(&ch1, &mut rng).unwrap_err(), EidError::ChannelClosed);
        chip.close_channel();
        assert_eq!(chip.read_public(&ch2, &mut rng).unwrap_err(), EidError::ChannelClosed);
    }

    #[test]
    fn ca_response_is_bound_to_command() {
        let (mut rng, issuer, att) = setup();
        let chip = issuer.issue(&att, &mut rng).unwrap();
        let terminal = KeyPair::generate(&mut rng);
        let key = ke_derive(&chip.public.pk_eid, &terminal.sk).unwrap();

        let cmd = ae_seal(&key, random_nonce(&mut rng), b"", GET_CHALLENGE);
        let resp = chip.ca_respond(&terminal.pk, &cmd, &mut rng).unwrap();
        assert_eq!(resp.ad, cmd.canonical());
        assert_eq!(ae_open(&key, &resp).unwrap().len(), CA_CHALLENGE_LEN);

        for byte in 0..cmd.body.len() {
            let mut bad = cmd.clone();
            bad.body[byte] ^= 0x20;
            assert_eq!(chip.ca_respond(&terminal.pk, &bad, &mut rng).unwrap_err(), EidError::CaReject);
        }
        let other = ae_seal(&key, random_nonce(&mut rng), b"", b"READ_BINARY");
        assert_eq!(chip.ca_respond(&terminal.pk, &other, &mut rng).unwrap_err(), EidError::CaReject);

        // A recorded response does not carry the next command as its AD.
        let cmd2 = ae_seal(&key, random_nonce(&mut rng), b"", GET_CHALLENGE);
        assert_ne!(resp.ad, cmd2.canonical());
    }

    #[test]
    fn fixture_roundtrip_preserves_chip() {
        let (mut rng, issuer, att) = setup();
        let chip = issuer.issue(&att, &mut rng).unwrap();
        let loaded = ChipState::from_fixture(&chip.to_fixture()).unwrap();
        assert_eq!(loaded.public, chip.public);
        assert_eq!(loaded.dg1, chip.dg1);
        assert!(pa_verify(&loaded.public, &issuer.keys.pk));
    }

    #[test]
    fn protocol_outputs_never_contain_ask() {
        let (mut rng, issuer, att) = setup();
        let mut chip = issuer.issue(&att, &mut rng).unwrap();
        let seed = chip.ask_seed();
        let terminal = KeyPair::generate(&mut rng);
        let key = ke_derive(&chip.public.pk_eid, &terminal.sk).unwrap();
        let pw = password_for(chip.attributes());
        let ch = chip.establish_channel(&pw, &mut rng).unwrap();
        let mut outputs = vec![chip.read_public(&ch, &mut rng).unwrap().canonical()];
        outputs.push(chip.read_dg1(&ch, &mut rng).unwrap().0.to_vec());
        let cmd = ae_seal(&key, random_nonce(&mut rng), b"", GET_CHALLENGE);
        outputs.push(chip.ca_respond(&terminal.pk, &cmd, &mut rng).unwrap().canonical());
        for out in outputs {
            assert!(!out.windows(32).any(|w| w == seed));
        }
    }
}
