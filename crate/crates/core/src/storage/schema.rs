//! Relation schemas, typed values and the fixed-width tuple encoding.
//!
//! Every attribute occupies a fixed number of bytes, so a schema has a
//! single tuple width and a page holds an analytic number of tuples.
//!
//! | type        | width          | layout                                        |
//! |-------------|----------------|-----------------------------------------------|
//! | `Int64`     | 8              | two's complement, little-endian               |
//! | `Utf8(n)`   | 2 + n          | u16 LE byte length, UTF-8 bytes, zero padding |
//!
//! Attributes are laid out back to back in declaration order.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DataType {
    Int64,
    Utf8(u16),
}

impl DataType {
    pub fn width(self) -> usize {
        match self {
            DataType::Int64 => 8,
            DataType::Utf8(max) => 2 + max as usize,
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataType::Int64 => f.write_str("int"),
            DataType::Utf8(max) => write!(f, "str{max}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub ty: DataType,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Attribute>", into = "Vec<Attribute>")]
pub struct Schema {
    attributes: Vec<Attribute>,
}

impl TryFrom<Vec<Attribute>> for Schema {
    type Error = Error;

    fn try_from(attributes: Vec<Attribute>) -> Result<Self> {
        Schema::new(attributes)
    }
}

impl From<Schema> for Vec<Attribute> {
    fn from(schema: Schema) -> Self {
        schema.attributes
    }
}

impl Schema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::schema("a schema needs at least one attribute"));
        }
        for (i, attr) in attributes.iter().enumerate() {
            if attr.name.is_empty() {
                return Err(Error::schema(format!("attribute {i} has an empty name")));
            }
            if attributes[..i].iter().any(|a| a.name == attr.name) {
                return Err(Error::schema(format!("duplicate attribute `{}`", attr.name)));
            }
            if attr.ty == DataType::Utf8(0) {
                return Err(Error::schema(format!("`{}`: str0 holds nothing", attr.name)));
            }
        }
        Ok(Schema { attributes })
    }

    /// Parses the `name:int,name:strN` micro-format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut attributes = Vec::new();
        for part in text.split(',') {
            let part = part.trim();
            let (name, ty) = part
                .split_once(':')
                .ok_or_else(|| Error::schema(format!("`{part}`: expected name:type")))?;
            let ty = match ty.trim() {
                "int" => DataType::Int64,
                other => match other.strip_prefix("str").map(str::parse::<u16>) {
                    Some(Ok(n)) => DataType::Utf8(n),
                    _ => {
                        return Err(Error::schema(format!(
                            "`{other}`: type must be `int` or `strN`"
                        )))
                    }
                },
            };
            attributes.push(Attribute {
                name: name.trim().to_string(),
                ty,
            });
        }
        Schema::new(attributes)
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn arity(&self) -> usize {
        self.attributes.len()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    /// Resolves attribute names to positions, rejecting unknown names.
    pub fn resolve(&self, names: &[impl AsRef<str>]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                self.position(n)
                    .ok_or_else(|| Error::schema(format!("unknown attribute `{n}`")))
            })
            .collect()
    }

    /// Sub-schema made of the given positions, in that order.
    pub fn select(&self, positions: &[usize]) -> Result<Schema> {
        Schema::new(positions.iter().map(|&p| self.attributes[p].clone()).collect())
    }

    pub fn tuple_width(&self) -> usize {
        self.attributes.iter().map(|a| a.ty.width()).sum()
    }

    pub fn check(&self, tuple: &Tuple) -> Result<()> {
        if tuple.arity() != self.arity() {
            return Err(Error::Encoding(format!(
                "tuple has {} values, schema has {} attributes",
                tuple.arity(),
                self.arity()
            )));
        }
        for (value, attr) in tuple.values().iter().zip(&self.attributes) {
            match (value, attr.ty) {
                (Value::Int(_), DataType::Int64) => {}
                (Value::Str(s), DataType::Utf8(max)) => {
                    if s.len() > max as usize {
                        return Err(Error::Encoding(format!(
                            "`{}`: {} bytes exceed str{max}",
                            attr.name,
                            s.len()
                        )));
                    }
                }
                _ => {
                    return Err(Error::Encoding(format!(
                        "`{}`: value {value} is not {}",
                        attr.name, attr.ty
                    )))
                }
            }
        }
        Ok(())
    }

    /// Encodes `tuple` into `out`, which must be exactly `tuple_width()` bytes.
    pub fn encode_into(&self, tuple: &Tuple, out: &mut [u8]) -> Result<()> {
        self.check(tuple)?;
        debug_assert_eq!(out.len(), self.tuple_width());
        let mut at = 0;
        for (value, attr) in tuple.values().iter().zip(&self.attributes) {
            let width = attr.ty.width();
            let slot = &mut out[at..at + width];
            match value {
                Value::Int(v) => slot.copy_from_slice(&v.to_le_bytes()),
                Value::Str(s) => {
                    let bytes = s.as_bytes();
                    slot[..2].copy_from_slice(&(bytes.len() as u16).to_le_bytes());
                    slot[2..2 + bytes.len()].copy_from_slice(bytes);
                    slot[2 + bytes.len()..].fill(0);
                }
            }
            at += width;
        }
        Ok(())
    }

    pub fn encode(&self, tuple: &Tuple) -> Result<Vec<u8>> {
        let mut out = vec![0; self.tuple_width()];
        self.encode_into(tuple, &mut out)?;
        Ok(out)
    }

    pub fn decode(&self, bytes: &[u8]) -> Result<Tuple> {
        if bytes.len() != self.tuple_width() {
            return Err(Error::Encoding(format!(
                "expected {} bytes, got {}",
                self.tuple_width(),
                bytes.len()
            )));
        }
        let mut values = Vec::with_capacity(self.arity());
        let mut at = 0;
        for attr in &self.attributes {
            let width = attr.ty.width();
            let slot = &bytes[at..at + width];
            let value = match attr.ty {
                DataType::Int64 => Value::Int(i64::from_le_bytes(slot.try_into().unwrap())),
                DataType::Utf8(max) => {
                    let len = u16::from_le_bytes([slot[0], slot[1]]) as usize;
                    if len > max as usize {
                        return Err(Error::Encoding(format!(
                            "`{}`: stored length {len} exceeds str{max}",
                            attr.name
                        )));
                    }
                    let s = std::str::from_utf8(&slot[2..2 + len])
                        .map_err(|e| Error::Encoding(format!("`{}`: {e}", attr.name)))?;
                    Value::Str(s.to_string())
                }
            };
            values.push(value);
            at += width;
        }
        Ok(Tuple(values))
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, attr) in self.attributes.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}", attr.name, attr.ty)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    Str(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

/// A record. The derived order is lexicographic over values: integers
/// numerically, strings bytewise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tuple(pub Vec<Value>);

impl Tuple {
    pub fn new(values: Vec<Value>) -> Self {
        Tuple(values)
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn project(&self, positions: &[usize]) -> Tuple {
        Tuple(positions.iter().map(|&p| self.0[p].clone()).collect())
    }

    /// Lexicographic comparison restricted to `positions`.
    pub fn cmp_on(&self, other: &Tuple, positions: &[usize]) -> Ordering {
        for &p in positions {
            match self.0[p].cmp(&other.0[p]) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

#[macro_export]
macro_rules! tuple {
    ($($v:expr),* $(,)?) => {
        $crate::storage::Tuple::new(vec![$($crate::storage::Value::from($v)),*])
    };
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn people() -> Schema {
        Schema::parse("id:int,name:str12").unwrap()
    }

    #[test]
    fn int_zero_encodes_to_eight_zero_bytes() {
        let s = Schema::parse("x:int").unwrap();
        assert_eq!(s.encode(&tuple![0i64]).unwrap(), vec![0u8; 8]);
    }

    #[test]
    fn documented_layout() {
        let bytes = people().encode(&tuple![258i64, "ab"]).unwrap();
        assert_eq!(bytes.len(), 8 + 2 + 12);
        assert_eq!(&bytes[..8], &[2, 1, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[8..10], &[2, 0]);
        assert_eq!(&bytes[10..12], b"ab");
        assert!(bytes[12..].iter().all(|&b| b == 0));
    }

    #[test]
    fn rejects_oversized_and_mistyped_values() {
        let s = people();
        assert!(matches!(
            s.encode(&tuple![1i64, "thirteen byte"]),
            Err(Error::Encoding(_))
        ));
        assert!(s.encode(&tuple!["x", "y"]).is_err());
        assert!(s.encode(&tuple![1i64]).is_err());
    }

    #[test]
    fn schema_string_parsing() {
        let s = Schema::parse("id:int, name:str32").unwrap();
        assert_eq!(s.attributes()[1].ty, DataType::Utf8(32));
        assert_eq!(s.to_string(), "id:int,name:str32");
        assert!(Schema::parse("id:int,id:int").is_err());
        assert!(Schema::parse("id:float").is_err());
        assert!(Schema::parse("id").is_err());
        assert!(Schema::parse("").is_err());
    }

    #[test]
    fn thousand_random_tuples_round_trip() {
        use rand::{Rng, SeedableRng};
        let s = Schema::parse("a:int,b:str9,c:int").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let len = rng.random_range(0..=9);
            let text: String = (0..len).map(|_| rng.random_range('a'..='z')).collect();
            let t = tuple![rng.random::<i64>(), text, rng.random::<i64>()];
            let bytes = s.encode(&t).unwrap();
            assert_eq!(s.decode(&bytes).unwrap(), t);
            assert_eq!(s.encode(&s.decode(&bytes).unwrap()).unwrap(), bytes);
        }
    }

    proptest! {
        #[test]
        fn round_trip(a in any::<i64>(), b in "\\PC{0,6}") {
            let s = Schema::parse("a:int,b:str24").unwrap();
            let t = tuple![a, b];
            prop_assert_eq!(s.decode(&s.encode(&t).unwrap()).unwrap(), t);
        }
    }
}
