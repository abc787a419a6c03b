//! Named parameter tensors, shared by the optimizer, checkpoints and the
//! gradient checker. A gradient is stored in a value of the model type itself.

use ndarray::{Array1, Array2};

pub trait Slab {
    fn shape(&self) -> Vec<usize>;
    fn data(&self) -> &[f64];
    fn data_mut(&mut self) -> &mut [f64];
}

impl Slab for Array1<f64> {
    fn shape(&self) -> Vec<usize> {
        vec![self.len()]
    }
    fn data(&self) -> &[f64] {
        self.as_slice().expect("contiguous")
    }
    fn data_mut(&mut self) -> &mut [f64] {
        self.as_slice_mut().expect("contiguous")
    }
}

impl Slab for Array2<f64> {
    fn shape(&self) -> Vec<usize> {
        self.shape().to_vec()
    }
    fn data(&self) -> &[f64] {
        self.as_slice().expect("standard layout")
    }
    fn data_mut(&mut self) -> &mut [f64] {
        self.as_slice_mut().expect("standard layout")
    }
}

pub trait Parameters {
    /// Tensors in a fixed order with unique dotted names.
    fn tensors(&self) -> Vec<(String, &dyn Slab)>;
    fn tensors_mut(&mut self) -> Vec<(String, &mut dyn Slab)>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.data().len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (_, t) in self.tensors() {
            out.extend_from_slice(t.data());
        }
        out
    }

    fn assign_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for (_, t) in self.tensors_mut() {
            let d = t.data_mut();
            d.copy_from_slice(&flat[offset..offset + d.len()]);
            offset += d.len();
        }
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }

    fn fill(&mut self, value: f64) {
        for (_, t) in self.tensors_mut() {
            t.data_mut().fill(value);
        }
    }
}

/// Zero-valued copy with the same layout, used as a gradient buffer.
pub fn zeros_like<P: Parameters + Clone>(p: &P) -> P {
    let mut z = p.clone();
    z.fill(0.0);
    z
}
