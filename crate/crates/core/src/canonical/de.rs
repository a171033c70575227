use std::collections::btree_map;

use serde::de::{self, DeserializeSeed, IntoDeserializer, Visitor};
use serde::forward_to_deserialize_any;

use super::{CanonicalError, Value};

fn mismatch(expected: &str, got: &Value) -> CanonicalError {
    let kind = match got {
        Value::Map(_) => "map",
        Value::List(_) => "list",
        Value::Text(_) => "text",
        Value::Int(_) => "integer",
        Value::Bool(_) => "bool",
        Value::Bytes(_) => "bytes",
    };
    CanonicalError::Mismatch(format!("expected {expected}, found {kind}"))
}

impl<'de> de::Deserializer<'de> for Value {
    type Error = CanonicalError;

    fn deserialize_any<V: Visitor<'de>>(self, visitor: V) -> Result<V::Value, CanonicalError> {
        match self {
            Value::Map(m) => visitor.visit_map(MapAccess { iter: m.into_iter(), pending: None }),
            Value::List(items) => visitor.visit_seq(SeqAccess { iter: items.into_iter() }),
            Value::Text(s) => visitor.visit_string(s),
            Value::Int(i) => visitor.visit_i64(i),
            Value::Bool(b) => visitor.visit_bool(b),
            Value::Bytes(b) => visitor.visit_byte_buf(b),
        }
    }

    fn deserialize_option<V: Visitor<'de>>(self, visitor: V) -> Result<V::Value, CanonicalError> {
        // Absent values are encoded by omitting the field.
        visitor.visit_some(self)
    }

    fn deserialize_newtype_struct<V: Visitor<'de>>(self, _name: &'static str, visitor: V) -> Result<V::Value, CanonicalError> {
        visitor.visit_newtype_struct(self)
    }

    fn deserialize_unit_struct<V: Visitor<'de>>(self, _name: &'static str, visitor: V) -> Result<V::Value, CanonicalError> {
        match self {
            Value::Map(m) if m.is_empty() => visitor.visit_unit(),
            other => Err(mismatch("empty map", &other)),
        }
    }

    fn deserialize_bytes<V: Visitor<'de>>(self, visitor: V) -> Result<V::Value, CanonicalError> {
        match self {
            Value::Bytes(b) => visitor.visit_byte_buf(b),
            other => Err(mismatch("bytes", &other)),
        }
    }

    fn deserialize_byte_buf<V: Visitor<'de>>(self, visitor: V) -> Result<V::Value, CanonicalError> {
        self.deserialize_bytes(visitor)
    }

    fn deserialize_enum<V: Visitor<'de>>(
        self,
        _name: &'static str,
        _variants: &'static [&'static str],
        visitor: V,
    ) -> Result<V::Value, CanonicalError> {
        match self {
            Value::Text(variant) => visitor.visit_enum(EnumAccess { variant, content: None }),
            Value::Map(m) if m.len() == 1 => {
                let (variant, content) = m.into_iter().next().expect("one entry");
                visitor.visit_enum(EnumAccess { variant, content: Some(content) })
            }
            other => Err(mismatch("enum (text or single-entry map)", &other)),
        }
    }

    forward_to_deserialize_any! {
        bool i8 i16 i32 i64 i128 u8 u16 u32 u64 u128 f32 f64 char str string
        unit seq tuple tuple_struct map struct identifier ignored_any
    }
}

impl<'de> IntoDeserializer<'de, CanonicalError> for Value {
    type Deserializer = Value;
    fn into_deserializer(self) -> Value {
        self
    }
}

struct SeqAccess {
    iter: std::vec::IntoIter<Value>,
}

impl<'de> de::SeqAccess<'de> for SeqAccess {
    type Error = CanonicalError;
    fn next_element_seed<T: DeserializeSeed<'de>>(&mut self, seed: T) -> Result<Option<T::Value>, CanonicalError> {
        self.iter.next().map(|v| seed.deserialize(v)).transpose()
    }
    fn size_hint(&self) -> Option<usize> {
        Some(self.iter.len())
    }
}

struct MapAccess {
    iter: btree_map::IntoIter<String, Value>,
    pending: Option<Value>,
}

impl<'de> de::MapAccess<'de> for MapAccess {
    type Error = CanonicalError;
    fn next_key_seed<K: DeserializeSeed<'de>>(&mut self, seed: K) -> Result<Option<K::Value>, CanonicalError> {
        match self.iter.next() {
            Some((k, v)) => {
                self.pending = Some(v);
                seed.deserialize(Value::Text(k)).map(Some)
            }
            None => Ok(None),
        }
    }
    fn next_value_seed<V: DeserializeSeed<'de>>(&mut self, seed: V) -> Result<V::Value, CanonicalError> {
        let v = self.pending.take().ok_or_else(|| CanonicalError::Mismatch("value without key".into()))?;
        seed.deserialize(v)
    }
}

struct EnumAccess {
    variant: String,
    content: Option<Value>,
}

impl<'de> de::EnumAccess<'de> for EnumAccess {
    type Error = CanonicalError;
    type Variant = VariantAccess;
    fn variant_seed<V: DeserializeSeed<'de>>(self, seed: V) -> Result<(V::Value, VariantAccess), CanonicalError> {
        let tag = seed.deserialize(Value::Text(self.variant))?;
        Ok((tag, VariantAccess { content: self.content }))
    }
}

struct VariantAccess {
    content: Option<Value>,
}

impl<'de> de::VariantAccess<'de> for VariantAccess {
    type Error = CanonicalError;
    fn unit_variant(self) -> Result<(), CanonicalError> {
        match self.content {
            None => Ok(()),
            Some(v) => Err(mismatch("unit variant", &v)),
        }
    }
    fn newtype_variant_seed<T: DeserializeSeed<'de>>(self, seed: T) -> Result<T::Value, CanonicalError> {
        match self.content {
            Some(v) => seed.deserialize(v),
            None => Err(CanonicalError::Mismatch("expected variant content".into())),
        }
    }
    fn tuple_variant<V: Visitor<'de>>(self, _len: usize, visitor: V) -> Result<V::Value, CanonicalError> {
        match self.content {
            Some(v @ Value::List(_)) => de::Deserializer::deserialize_any(v, visitor),
            Some(v) => Err(mismatch("list", &v)),
            None => Err(CanonicalError::Mismatch("expected variant content".into())),
        }
    }
    fn struct_variant<V: Visitor<'de>>(self, _fields: &'static [&'static str], visitor: V) -> Result<V::Value, CanonicalError> {
        match self.content {
            Some(v @ Value::Map(_)) => de::Deserializer::deserialize_any(v, visitor),
            Some(v) => Err(mismatch("map", &v)),
            None => Err(CanonicalError::Mismatch("expected variant content".into())),
        }
    }
}
