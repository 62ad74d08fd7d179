use super::tape::{Gradients, Tape, Var};
use super::NnError;
use crate::surgery::GradVector;

/// Dense parameter or data array with an optional gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub data: Vec<f64>,
    pub shape: Vec<usize>,
    pub requires_grad: bool,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(data: Vec<f64>, shape: &[usize], requires_grad: bool) -> Result<Self, NnError> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(NnError::ShapeMismatch(format!(
                "{} values for shape {shape:?}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite("tensor"));
        }
        Ok(Self {
            data,
            shape: shape.to_vec(),
            requires_grad,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            data: vec![0.0; shape.iter().product()],
            shape: shape.to_vec(),
            requires_grad: true,
            grad: None,
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

/// Ordered, uniquely named parameters. Registration order is the
/// flattening order and never changes after construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new(entries: Vec<(String, Tensor)>) -> Result<Self, NnError> {
        let mut seen = std::collections::HashSet::new();
        for (name, _) in &entries {
            if !seen.insert(name.as_str()) {
                return Err(NnError::DuplicateName(name.clone()));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn tensor_at(&self, i: usize) -> &Tensor {
        &self.entries[i].1
    }

    pub fn tensor_at_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.entries[i].1
    }

    pub fn numel(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    /// Records every parameter as a leaf; `trainable` controls whether
    /// gradients flow into them.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Result<Vec<Var>, NnError> {
        self.entries
            .iter()
            .map(|(_, t)| tape.leaf(t.data.clone(), &t.shape, trainable && t.requires_grad))
            .collect()
    }

    /// Stores gradients for the bound leaves; unreached parameters get zeros.
    pub fn load_grads(&mut self, grads: &Gradients, vars: &[Var]) -> Result<(), NnError> {
        if vars.len() != self.entries.len() {
            return Err(NnError::LengthMismatch {
                expected: self.entries.len(),
                got: vars.len(),
            });
        }
        for ((_, t), v) in self.entries.iter_mut().zip(vars) {
            t.grad = Some(
                grads
                    .get(*v)
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|| vec![0.0; t.numel()]),
            );
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for (_, t) in &mut self.entries {
            t.grad = None;
        }
    }

    pub fn flat_values(&self) -> Vec<f64> {
        self.entries.iter().flat_map(|(_, t)| t.data.iter().copied()).collect()
    }

    /// Overwrites all parameter values from a flat vector.
    pub fn set_flat_values(&mut self, flat: &[f64]) -> Result<(), NnError> {
        if flat.len() != self.numel() {
            return Err(NnError::LengthMismatch {
                expected: self.numel(),
                got: flat.len(),
            });
        }
        let mut offset = 0;
        for (_, t) in &mut self.entries {
            let n = t.numel();
            t.data.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}

/// Concatenates all parameter gradients in registration order.
pub fn flatten_grads(p: &ParamSet) -> Result<GradVector, NnError> {
    let mut out = Vec::with_capacity(p.numel());
    for (name, t) in p.iter() {
        let g = t.grad.as_ref().ok_or_else(|| NnError::MissingGrad(name.to_string()))?;
        out.extend_from_slice(g);
    }
    GradVector::new(out).map_err(|_| NnError::NonFinite("flatten_grads"))
}

/// Splits a flat gradient back into per-parameter buffers.
pub fn unflatten_grads(p: &mut ParamSet, g: &GradVector) -> Result<(), NnError> {
    if g.len() != p.numel() {
        return Err(NnError::LengthMismatch {
            expected: p.numel(),
            got: g.len(),
        });
    }
    let mut offset = 0;
    for (_, t) in &mut p.entries {
        let n = t.numel();
        t.grad = Some(g.as_slice()[offset..offset + n].to_vec());
        offset += n;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_params() -> ParamSet {
        ParamSet::new(vec![
            ("a".into(), Tensor::new(vec![1.0, 2.0, 3.0, 4.0], &[2, 2], true).unwrap()),
            ("b".into(), Tensor::new(vec![5.0, 6.0, 7.0], &[3], true).unwrap()),
        ])
        .unwrap()
    }

    #[test]
    fn flatten_in_registration_order() {
        let mut p = two_params();
        assert!(matches!(flatten_grads(&p), Err(NnError::MissingGrad(_))));
        p.tensor_at_mut(0).grad = Some(vec![0.1, 0.2, 0.3, 0.4]);
        p.tensor_at_mut(1).grad = Some(vec![0.5, 0.6, 0.7]);
        let g = flatten_grads(&p).unwrap();
        assert_eq!(g.as_slice(), &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
        let mut q = two_params();
        unflatten_grads(&mut q, &g).unwrap();
        assert_eq!(q, p);
    }

    #[test]
    fn zero_grads_flatten_to_zero_vector() {
        let mut p = two_params();
        unflatten_grads(&mut p, &GradVector::zeros(7)).unwrap();
        assert!(flatten_grads(&p).unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicate_names_rejected() {
        let t = Tensor::zeros(&[1]);
        assert!(matches!(
            ParamSet::new(vec![("x".into(), t.clone()), ("x".into(), t)]),
            Err(NnError::DuplicateName(_))
        ));
    }
}
