//! Dense row-major tensors.
//!
//! Feature maps are `[channels, height, width]`, convolution weights are
//! `[out, in, kh, kw]`, biases `[channels]` and scalars `[1]`.

use lltext_core::{GrayMap, ImageTensor, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {shape:?} does not match data length {}",
            data.len()
        );
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![T::zero(); n],
        }
    }

    pub fn filled(shape: Vec<usize>, v: T) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![v; n],
        }
    }

    pub fn scalar(v: T) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> T {
        assert!(self.is_scalar(), "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    /// Shape interpreted as a `[C, H, W]` feature map.
    pub fn chw(&self) -> (usize, usize, usize) {
        assert_eq!(self.shape.len(), 3, "expected CHW tensor, got {:?}", self.shape);
        (self.shape[0], self.shape[1], self.shape[2])
    }

    #[inline]
    pub fn at3(&self, c: usize, y: usize, x: usize) -> T {
        let (_, h, w) = (self.shape[0], self.shape[1], self.shape[2]);
        debug_assert!(y < h && x < w);
        self.data[(c * h + y) * w + x]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn from_image(img: &ImageTensor<T>) -> Self {
        let (h, w, c) = (img.height(), img.width(), img.channels());
        let mut data = Vec::with_capacity(h * w * c);
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    data.push(img.get(y, x, ch));
                }
            }
        }
        Self {
            shape: vec![c, h, w],
            data,
        }
    }

    pub fn from_gray(map: &GrayMap<T>) -> Self {
        let (h, w) = (map.height(), map.width());
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                data.push(map.get(y, x));
            }
        }
        Self {
            shape: vec![1, h, w],
            data,
        }
    }

    /// Converts a CHW tensor (1 or 3 channels) back to an image, clamping
    /// into [0, 1].
    pub fn to_image(&self) -> ImageTensor<T> {
        let (c, h, w) = self.chw();
        ImageTensor::from_fn(h, w, c, |y, x, ch| {
            self.at3(ch, y, x).clamp(T::zero(), T::one())
        })
        .expect("clamped values are valid")
    }

    /// Converts a 1-channel CHW tensor to a gray map, clamping into [0, 1].
    pub fn to_gray(&self) -> GrayMap<T> {
        let (c, h, w) = self.chw();
        assert_eq!(c, 1, "to_gray on {c}-channel tensor");
        GrayMap::from_fn(h, w, |y, x| self.at3(0, y, x).clamp(T::zero(), T::one()))
            .expect("clamped values are valid")
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.dbl())).collect(),
        }
    }
}
