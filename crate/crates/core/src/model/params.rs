use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    /// Buffers (batch-norm running statistics) are stored but not trained.
    pub trainable: bool,
}

/// Ordered collection of named arrays.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>, trainable: bool) -> usize {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.params.push(Param {
            name: name.into(),
            shape,
            data,
            trainable,
        });
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn get(&self, id: usize) -> &[f64] {
        &self.params[id].data
    }

    pub fn get_mut(&mut self, id: usize) -> &mut [f64] {
        &mut self.params[id].data
    }

    pub fn param(&self, id: usize) -> &Param {
        &self.params[id]
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Trainable scalars.
    pub fn count_params(&self) -> usize {
        self.params.iter().filter(|p| p.trainable).map(|p| p.data.len()).sum()
    }

    /// Trainable scalars in parameters whose name passes `filter`.
    pub fn count_matching(&self, filter: impl Fn(&str) -> bool) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable && filter(&p.name))
            .map(|p| p.data.len())
            .sum()
    }

    pub fn zero_grads(&self) -> ParamGrads {
        ParamGrads {
            values: self.params.iter().map(|p| vec![0.0; p.data.len()]).collect(),
        }
    }

    /// Copies every array from `other`; names, order and shapes must agree.
    pub fn copy_from(&mut self, other: &ParamStore) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(Error::ArchitectureMismatch(format!(
                "{} arrays vs {}",
                self.params.len(),
                other.params.len()
            )));
        }
        for (a, b) in self.params.iter().zip(&other.params) {
            if a.name != b.name || a.shape != b.shape || a.trainable != b.trainable {
                return Err(Error::ArchitectureMismatch(format!(
                    "`{}` {:?} vs `{}` {:?}",
                    a.name, a.shape, b.name, b.shape
                )));
            }
        }
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            a.data.copy_from_slice(&b.data);
        }
        Ok(())
    }
}

/// Gradients indexed like the owning [`ParamStore`]; buffer slots stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub values: Vec<Vec<f64>>,
}

impl ParamGrads {
    pub fn get_mut(&mut self, id: usize) -> &mut [f64] {
        &mut self.values[id]
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().flatten().for_each(|v| *v *= s);
    }

    pub fn global_norm(&self) -> f64 {
        self.values.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }
}
