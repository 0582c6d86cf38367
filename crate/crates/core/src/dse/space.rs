use alloc::string::String;
use alloc::vec::Vec;

use crate::uarch::{ProcessorConfig, Replacement};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Value {
    Num(usize),
    Policy(Replacement),
}

impl core::fmt::Display for Value {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Value::Num(n) => write!(f, "{n}"),
            Value::Policy(p) => f.write_str(p.name()),
        }
    }
}

/// One tunable field and the values it may take.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    pub name: String,
    pub values: Vec<Value>,
}

impl Field {
    pub fn is_categorical(&self) -> bool {
        matches!(self.values.first(), Some(Value::Policy(_)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpaceError {
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("field `{0}` appears twice")]
    Duplicate(String),
    #[error("field `{0}` has no candidates")]
    Empty(String),
    #[error("field `{field}`: value {value} is not a candidate")]
    Value { field: String, value: String },
    #[error("space too large to index")]
    TooLarge,
}

/// A finite product of field candidate sets over a base configuration.
/// Points are numbered in mixed radix, first field most significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Space {
    pub base: ProcessorConfig,
    pub fields: Vec<Field>,
    size: u64,
}

pub const POLICY_FIELD: &str = "btb_replace";

impl Space {
    pub fn new(base: ProcessorConfig, fields: Vec<Field>) -> Result<Space, SpaceError> {
        let allowed = base.numeric_fields();
        let mut size: u64 = 1;
        for (i, f) in fields.iter().enumerate() {
            if fields[..i].iter().any(|g| g.name == f.name) {
                return Err(SpaceError::Duplicate(f.name.clone()));
            }
            if f.values.is_empty() {
                return Err(SpaceError::Empty(f.name.clone()));
            }
            let bad = |v: &Value| SpaceError::Value { field: f.name.clone(), value: alloc::format!("{v}") };
            if f.name == POLICY_FIELD {
                if let Some(v) = f.values.iter().find(|v| !matches!(v, Value::Policy(_))) {
                    return Err(bad(v));
                }
            } else {
                let Some((_, _, cands)) = allowed.iter().find(|(n, _, _)| *n == f.name) else {
                    return Err(SpaceError::UnknownField(f.name.clone()));
                };
                if let Some(v) = f.values.iter().find(|v| !matches!(v, Value::Num(n) if cands.contains(n))) {
                    return Err(bad(v));
                }
            }
            for (j, v) in f.values.iter().enumerate() {
                if f.values[..j].contains(v) {
                    return Err(bad(v));
                }
            }
            size = size.checked_mul(f.values.len() as u64).ok_or(SpaceError::TooLarge)?;
        }
        Ok(Space { base, fields, size })
    }

    /// Every tunable field with its full candidate set.
    pub fn full(base: ProcessorConfig) -> Space {
        let mut fields = alloc::vec![Field {
            name: POLICY_FIELD.into(),
            values: Replacement::ALL.iter().map(|p| Value::Policy(*p)).collect(),
        }];
        for (name, _, allowed) in base.numeric_fields() {
            fields.push(Field { name: name.into(), values: allowed.iter().map(|v| Value::Num(*v)).collect() });
        }
        Space::new(base, fields).expect("candidate sets are valid")
    }

    /// Builds a numeric field from its full candidate list.
    pub fn numeric(name: &str) -> Option<Field> {
        let all = ProcessorConfig::small().numeric_fields();
        let (_, _, allowed) = all.iter().find(|(n, _, _)| *n == name)?;
        Some(Field { name: name.into(), values: allowed.iter().map(|v| Value::Num(*v)).collect() })
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    /// Per-field value indices of point `index`.
    pub fn choices(&self, mut index: u64) -> Vec<usize> {
        let mut out = alloc::vec![0; self.fields.len()];
        for (slot, f) in out.iter_mut().zip(&self.fields).rev() {
            let n = f.values.len() as u64;
            *slot = (index % n) as usize;
            index /= n;
        }
        out
    }

    pub fn index_of(&self, choices: &[usize]) -> u64 {
        choices.iter().zip(&self.fields).fold(0, |acc, (c, f)| acc * f.values.len() as u64 + *c as u64)
    }

    pub fn config(&self, index: u64) -> ProcessorConfig {
        let mut cfg = self.base.clone();
        for (c, f) in self.choices(index).into_iter().zip(&self.fields) {
            match f.values[c] {
                Value::Num(v) => {
                    cfg.set_numeric(&f.name, v);
                }
                Value::Policy(p) => cfg.btb_replace = p,
            }
        }
        cfg
    }

    /// Surrogate features: numeric fields as their candidate rank scaled to
    /// [0, 1], categorical fields one-hot.
    pub fn features(&self, index: u64) -> Vec<f64> {
        let mut x = Vec::new();
        for (c, f) in self.choices(index).into_iter().zip(&self.fields) {
            let n = f.values.len();
            if f.is_categorical() {
                x.extend((0..n).map(|i| if i == c { 1.0 } else { 0.0 }));
            } else if n > 1 {
                x.push(c as f64 / (n - 1) as f64);
            } else {
                x.push(0.0);
            }
        }
        x
    }
}
