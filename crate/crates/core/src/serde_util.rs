use serde::{Deserialize, Deserializer};

/// Distinguishes an absent field (`None`) from an explicit `null` (`Some(None)`).
pub(crate) fn double_option<'de, T, D>(d: D) -> Result<Option<Option<T>>, D::Error>
where
    T: Deserialize<'de>,
    D: Deserializer<'de>,
{
    Option::<T>::deserialize(d).map(Some)
}

fn decode<E: serde::de::Error>(s: &str) -> Result<Vec<u8>, E> {
    use base64::Engine;
    base64::engine::general_purpose::STANDARD.decode(s).map_err(E::custom)
}

/// Optional bytes as a base64 string.
pub(crate) mod base64_opt {
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match bytes {
            Some(b) => s.serialize_str(&base64::engine::general_purpose::STANDARD.encode(b)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        Option::<String>::deserialize(d)?.map(|s| super::decode(&s)).transpose()
    }
}

/// Like [`base64_opt`] but keeps absent apart from `null`.
pub(crate) fn base64_double_opt<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<Vec<u8>>>, D::Error> {
    Ok(Some(Option::<String>::deserialize(d)?.map(|s| decode(&s)).transpose()?))
}
