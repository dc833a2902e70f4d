//! Node identities, ECDSA signatures and the manager's authorized-node registry.
//!
//! Keys live on secp256k1. A node's public identifier is the SHA-256 digest of
//! its compressed SEC1 public key; that identifier is what light nodes put in
//! their BLE advertisements and what transactions name as sender.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use k256::ecdsa::signature::{Signer, Verifier};
use k256::ecdsa::{Signature as EcdsaSignature, SigningKey, VerifyingKey};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::encoding::{Decoder, Digest, Encoder};
use crate::hexser::hex_newtype_serde;

const REGISTRY_DOMAIN: &[u8] = b"tbict/registry/v1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdentityError {
    #[error("identity has no signing key")]
    MissingSecretKey,
    #[error("only a manager may publish the authorized registry (caller is {0:?})")]
    NotManager(Role),
    #[error("duplicate authorized key at position {0}")]
    DuplicateKey(usize),
    #[error("invalid public key encoding")]
    InvalidPublicKey,
    #[error("node id does not match the digest of the public key")]
    NodeIdMismatch,
    #[error("registry signature does not verify under the manager key")]
    BadRegistrySignature,
    #[error("malformed registry encoding")]
    MalformedRegistry,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Light,
    Authorized,
    Manager,
}

impl Role {
    /// Managers carry every authorized-node privilege.
    pub fn has_authorized_privileges(self) -> bool {
        matches!(self, Role::Authorized | Role::Manager)
    }
}

/// 32-byte public identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeId(pub [u8; 32]);

hex_newtype_serde!(NodeId, 32);

impl NodeId {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&Digest(self.0), f)
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NodeId({})", hex::encode(&self.0[..6]))
    }
}

/// Compressed SEC1 secp256k1 public key.
#[derive(Clone)]
pub struct PublicKey {
    bytes: [u8; 33],
    key: VerifyingKey,
}

impl PublicKey {
    pub const LEN: usize = 33;

    pub fn from_sec1(bytes: &[u8]) -> Result<Self, IdentityError> {
        let key = VerifyingKey::from_sec1_bytes(bytes).map_err(|_| IdentityError::InvalidPublicKey)?;
        Ok(Self::from_verifying_key(key))
    }

    fn from_verifying_key(key: VerifyingKey) -> Self {
        let point = key.to_encoded_point(true);
        let mut bytes = [0u8; 33];
        bytes.copy_from_slice(point.as_bytes());
        Self { bytes, key }
    }

    pub fn as_bytes(&self) -> &[u8; 33] {
        &self.bytes
    }

    pub fn node_id(&self) -> NodeId {
        NodeId(Digest::of(&self.bytes).0)
    }

    pub fn verify(&self, message: &[u8], signature: &Signature) -> bool {
        let Ok(sig) = EcdsaSignature::from_slice(&signature.0) else {
            return false;
        };
        self.key.verify(message, &sig).is_ok()
    }
}

impl PartialEq for PublicKey {
    fn eq(&self, other: &Self) -> bool {
        self.bytes == other.bytes
    }
}

impl Eq for PublicKey {}

impl PartialOrd for PublicKey {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PublicKey {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.bytes.cmp(&other.bytes)
    }
}

impl core::hash::Hash for PublicKey {
    fn hash<H: core::hash::Hasher>(&self, state: &mut H) {
        self.bytes.hash(state);
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", hex::encode(&self.bytes[..7]))
    }
}

impl Serialize for PublicKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        crate::hexser::serialize(&self.bytes, serializer)
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let bytes = crate::hexser::deserialize_array::<D, 33>(deserializer)?;
        PublicKey::from_sec1(&bytes).map_err(serde::de::Error::custom)
    }
}

/// Fixed-width `r || s` ECDSA signature.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; 64]);

hex_newtype_serde!(Signature, 64);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", hex::encode(&self.0[..6]))
    }
}

pub fn verify(public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    public_key.verify(message, signature)
}

/// A node's key pair and role.
///
/// The signing key is skipped by every serialization; a deserialized identity
/// can verify but not sign.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "IdentityRecord", into = "IdentityRecord")]
pub struct NodeIdentity {
    node_id: NodeId,
    public_key: PublicKey,
    secret: Option<SigningKey>,
    role: Role,
}

#[derive(Serialize, Deserialize)]
struct IdentityRecord {
    node_id: NodeId,
    public_key: PublicKey,
    role: Role,
}

impl TryFrom<IdentityRecord> for NodeIdentity {
    type Error = IdentityError;

    fn try_from(r: IdentityRecord) -> Result<Self, IdentityError> {
        if r.public_key.node_id() != r.node_id {
            return Err(IdentityError::NodeIdMismatch);
        }
        Ok(NodeIdentity { node_id: r.node_id, public_key: r.public_key, secret: None, role: r.role })
    }
}

impl From<NodeIdentity> for IdentityRecord {
    fn from(id: NodeIdentity) -> Self {
        IdentityRecord { node_id: id.node_id, public_key: id.public_key, role: id.role }
    }
}

impl fmt::Debug for NodeIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NodeIdentity")
            .field("node_id", &self.node_id)
            .field("role", &self.role)
            .field("can_sign", &self.secret.is_some())
            .finish()
    }
}

impl NodeIdentity {
    pub fn generate<R: RngCore + CryptoRng>(role: Role, rng: &mut R) -> Self {
        Self::from_signing_key(role, SigningKey::random(rng))
    }

    /// Seed-derived identity for reproducible tests and simulations.
    #[cfg(any(test, feature = "deterministic-keys"))]
    pub fn from_seed(role: Role, seed: u64) -> Self {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        Self::generate(role, &mut rng)
    }

    fn from_signing_key(role: Role, secret: SigningKey) -> Self {
        let public_key = PublicKey::from_verifying_key(*secret.verifying_key());
        NodeIdentity { node_id: public_key.node_id(), public_key, secret: Some(secret), role }
    }

    /// Verification-only identity.
    pub fn from_public(role: Role, public_key: PublicKey) -> Self {
        NodeIdentity { node_id: public_key.node_id(), public_key, secret: None, role }
    }

    pub fn node_id(&self) -> NodeId {
        self.node_id
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.public_key
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn can_sign(&self) -> bool {
        self.secret.is_some()
    }

    pub fn to_public(&self) -> NodeIdentity {
        NodeIdentity::from_public(self.role, self.public_key.clone())
    }

    pub fn sign(&self, message: &[u8]) -> Result<Signature, IdentityError> {
        let secret = self.secret.as_ref().ok_or(IdentityError::MissingSecretKey)?;
        let sig: EcdsaSignature = secret.sign(message);
        let mut out = [0u8; 64];
        out.copy_from_slice(&sig.to_bytes());
        Ok(Signature(out))
    }
}

/// Manager-signed list of authorized node keys.
///
/// Fields are declared in lexicographic order so that derived JSON has
/// sorted keys.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorizedRegistry {
    pub entries: Vec<PublicKey>,
    pub manager_id: NodeId,
    pub signature: Signature,
}

impl AuthorizedRegistry {
    pub fn signing_bytes(manager_id: &NodeId, entries: &[PublicKey]) -> Vec<u8> {
        let mut enc = Encoder::with_capacity(REGISTRY_DOMAIN.len() + 36 + entries.len() * 33);
        enc.put_bytes(REGISTRY_DOMAIN).put_raw(&manager_id.0).put_u32(entries.len() as u32);
        for key in entries {
            enc.put_raw(key.as_bytes());
        }
        enc.finish()
    }

    /// Checks that `manager_key` names this registry's manager and signed it.
    pub fn verify(&self, manager_key: &PublicKey) -> Result<(), IdentityError> {
        if manager_key.node_id() != self.manager_id {
            return Err(IdentityError::NodeIdMismatch);
        }
        if let Some(pos) = first_duplicate(&self.entries) {
            return Err(IdentityError::DuplicateKey(pos));
        }
        let msg = Self::signing_bytes(&self.manager_id, &self.entries);
        if manager_key.verify(&msg, &self.signature) {
            Ok(())
        } else {
            Err(IdentityError::BadRegistrySignature)
        }
    }

    pub fn contains_key(&self, key: &PublicKey) -> bool {
        self.entries.contains(key)
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.entries.iter().any(|k| k.node_id() == *node)
    }

    pub fn authorized_ids(&self) -> BTreeSet<NodeId> {
        self.entries.iter().map(PublicKey::node_id).collect()
    }

    /// Binary form carried in registry transactions.
    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::with_capacity(32 + 4 + self.entries.len() * 33 + 64);
        enc.put_raw(&self.manager_id.0).put_u32(self.entries.len() as u32);
        for key in &self.entries {
            enc.put_raw(key.as_bytes());
        }
        enc.put_raw(&self.signature.0);
        enc.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, IdentityError> {
        let malformed = |_| IdentityError::MalformedRegistry;
        let mut dec = Decoder::new(bytes);
        let manager_id = NodeId(dec.array::<32>().map_err(malformed)?);
        let n = dec.u32().map_err(malformed)? as usize;
        let mut entries = Vec::with_capacity(n.min(bytes.len() / 33));
        for _ in 0..n {
            let raw = dec.array::<33>().map_err(malformed)?;
            entries.push(PublicKey::from_sec1(&raw)?);
        }
        let signature = Signature(dec.array::<64>().map_err(malformed)?);
        dec.finish().map_err(malformed)?;
        Ok(AuthorizedRegistry { entries, manager_id, signature })
    }
}

fn first_duplicate(keys: &[PublicKey]) -> Option<usize> {
    let mut seen = BTreeSet::new();
    keys.iter().position(|k| !seen.insert(k.as_bytes()))
}

/// Signs the list of authorized keys under the manager's secret key.
pub fn publish_registry(
    manager: &NodeIdentity,
    authorized_keys: Vec<PublicKey>,
) -> Result<AuthorizedRegistry, IdentityError> {
    if manager.role() != Role::Manager {
        return Err(IdentityError::NotManager(manager.role()));
    }
    if let Some(pos) = first_duplicate(&authorized_keys) {
        return Err(IdentityError::DuplicateKey(pos));
    }
    let msg = AuthorizedRegistry::signing_bytes(&manager.node_id(), &authorized_keys);
    let signature = manager.sign(&msg)?;
    Ok(AuthorizedRegistry { entries: authorized_keys, manager_id: manager.node_id(), signature })
}
