//! Named parameter storage with Adam moment buffers.

use crate::checkpoint::Snapshot;
use crate::element::Element;
use ndarray::ArrayD;
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

pub(crate) struct Param<E: Element> {
    pub name: String,
    pub value: ArrayD<E>,
    pub m: ArrayD<E>,
    pub v: ArrayD<E>,
}

/// Flat registry of named parameters. Registration order is stable and
/// defines serialization order.
pub struct ParamStore<E: Element> {
    pub(crate) params: Vec<Param<E>>,
    index: HashMap<String, usize>,
}

impl<E: Element> Default for ParamStore<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E: Element> ParamStore<E> {
    pub fn new() -> Self {
        ParamStore {
            params: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn register(&mut self, name: impl Into<String>, value: ArrayD<E>) -> ParamId {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "duplicate parameter name: {name}"
        );
        let id = self.params.len();
        self.index.insert(name.clone(), id);
        let m = ArrayD::zeros(value.raw_dim());
        let v = ArrayD::zeros(value.raw_dim());
        self.params.push(Param { name, value, m, v });
        ParamId(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn value(&self, id: ParamId) -> &ArrayD<E> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut ArrayD<E> {
        &mut self.params[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn id_by_name(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.params.len()).map(ParamId)
    }

    /// Bitwise snapshot of all values, for freeze/immutability assertions.
    pub fn clone_values(&self) -> Vec<ArrayD<E>> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn values_equal(&self, other: &[ArrayD<E>]) -> bool {
        self.params.len() == other.len()
            && self
                .params
                .iter()
                .zip(other)
                .all(|(p, o)| p.value == *o)
    }

    /// Copies values (not moments) from another store with identical layout.
    pub fn copy_values_from(&mut self, other: &ParamStore<E>) {
        assert_eq!(self.params.len(), other.params.len());
        for (dst, src) in self.params.iter_mut().zip(&other.params) {
            dst.value.assign(&src.value);
        }
    }

    /// Appends all parameters and Adam moments to a checkpoint snapshot
    /// under `prefix/`.
    pub fn save_into(&self, prefix: &str, snap: &mut Snapshot<E>) {
        for p in &self.params {
            snap.arrays.push((format!("{prefix}/{}", p.name), p.value.clone()));
            snap.arrays.push((format!("{prefix}/{}:m", p.name), p.m.clone()));
            snap.arrays.push((format!("{prefix}/{}:v", p.name), p.v.clone()));
        }
    }

    /// Restores parameters and moments saved by [`ParamStore::save_into`].
    pub fn load_from(&mut self, prefix: &str, snap: &Snapshot<E>) -> Result<(), String> {
        let mut by_name: HashMap<&str, &ArrayD<E>> = HashMap::new();
        for (name, arr) in &snap.arrays {
            by_name.insert(name.as_str(), arr);
        }
        for p in &mut self.params {
            let base = format!("{prefix}/{}", p.name);
            for (suffix, slot) in [("", &mut p.value), (":m", &mut p.m), (":v", &mut p.v)] {
                let key = format!("{base}{suffix}");
                let arr = by_name
                    .get(key.as_str())
                    .ok_or_else(|| format!("checkpoint missing entry {key}"))?;
                if arr.shape() != slot.shape() {
                    return Err(format!(
                        "checkpoint entry {key} has shape {:?}, expected {:?}",
                        arr.shape(),
                        slot.shape()
                    ));
                }
                slot.assign(arr);
            }
        }
        Ok(())
    }
}
