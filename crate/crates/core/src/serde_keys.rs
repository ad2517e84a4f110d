//! Bucket-keyed maps serialized with string keys. Parsing the keys from
//! strings keeps them readable inside tagged enums, where serde buffers map
//! keys as strings.

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn serialize<V: Serialize, S: Serializer>(
    m: &BTreeMap<u32, V>,
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_map(m.iter().map(|(k, v)| (k.to_string(), v)))
}

pub fn deserialize<'de, V: Deserialize<'de>, D: Deserializer<'de>>(
    d: D,
) -> Result<BTreeMap<u32, V>, D::Error> {
    let raw = BTreeMap::<String, V>::deserialize(d)?;
    raw.into_iter()
        .map(|(k, v)| {
            k.parse()
                .map(|k| (k, v))
                .map_err(|_| D::Error::custom(format!("bucket key `{k}` is not an integer")))
        })
        .collect()
}
