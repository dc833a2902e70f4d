//! Serde helpers that render fixed-size byte arrays as lowercase hex.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::de::{self, Visitor};
use serde::{Deserializer, Serializer};

pub(crate) fn serialize<S: Serializer>(bytes: &[u8], serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_str(&hex::encode(bytes))
}

pub(crate) fn deserialize_array<'de, D, const N: usize>(deserializer: D) -> Result<[u8; N], D::Error>
where
    D: Deserializer<'de>,
{
    let bytes = deserialize_vec(deserializer)?;
    bytes.try_into().map_err(|v: Vec<u8>| de::Error::invalid_length(v.len(), &"fixed-size hex string"))
}

pub(crate) fn deserialize_vec<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<u8>, D::Error> {
    struct HexVisitor;

    impl<'de> Visitor<'de> for HexVisitor {
        type Value = Vec<u8>;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a lowercase hex string")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Vec<u8>, E> {
            if v.bytes().any(|b| b.is_ascii_uppercase()) {
                return Err(E::custom("hex must be lowercase"));
            }
            hex::decode(v).map_err(E::custom)
        }

        fn visit_string<E: de::Error>(self, v: String) -> Result<Vec<u8>, E> {
            self.visit_str(&v)
        }
    }

    deserializer.deserialize_str(HexVisitor)
}

/// `#[serde(with = "crate::hexser::bytes")]` for `Vec<u8>` fields.
pub(crate) mod bytes {
    use alloc::vec::Vec;
    use serde::{Deserializer, Serializer};

    pub(crate) fn serialize<S: Serializer>(bytes: &[u8], serializer: S) -> Result<S::Ok, S::Error> {
        super::serialize(bytes, serializer)
    }

    pub(crate) fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<u8>, D::Error> {
        super::deserialize_vec(deserializer)
    }
}

/// Implements `Serialize`/`Deserialize` as hex for a newtype over `[u8; N]`.
macro_rules! hex_newtype_serde {
    ($ty:ident, $len:expr) => {
        impl serde::Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                $crate::hexser::serialize(&self.0, serializer)
            }
        }

        impl<'de> serde::Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                $crate::hexser::deserialize_array::<D, $len>(deserializer).map($ty)
            }
        }
    };
}

pub(crate) use hex_newtype_serde;
