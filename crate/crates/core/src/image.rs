//! Unit-interval image containers.
//!
//! [`ImageTensor`] is a channel-last H×W×C map of intensities in [0, 1]
//! (1 or 3 channels). [`GrayMap`] is the single-channel variant used for
//! edge maps and text-region heatmaps.

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

/// Channel-last image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> ImageTensor<T> {
    /// Builds an image from raw channel-last data, validating the invariants
    /// (1 or 3 channels, positive dimensions, values in [0, 1]).
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(CoreError::invalid("image dimensions must be >= 1"));
        }
        if channels != 1 && channels != 3 {
            return Err(CoreError::invalid(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(CoreError::shape(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        if data.iter().any(|v| !(*v >= T::zero() && *v <= T::one())) {
            return Err(CoreError::invalid("image values must lie in [0, 1]"));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds an image, clamping out-of-range or non-finite values into [0, 1].
    pub fn new_clamped(height: usize, width: usize, channels: usize, mut data: Vec<T>) -> Result<Self> {
        for v in &mut data {
            if !v.is_finite() || *v < T::zero() {
                *v = T::zero();
            } else if *v > T::one() {
                *v = T::one();
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, T::zero())
    }

    /// Constant image. `value` must be in [0, 1].
    pub fn filled(height: usize, width: usize, channels: usize, value: T) -> Self {
        Self::new(height, width, channels, vec![value; height * width * channels])
            .expect("constant image in range")
    }

    /// Builds an image from a per-pixel function returning channel values.
    pub fn from_fn(height: usize, width: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> T {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: T) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn mean(&self) -> T {
        let n = T::of_usize(self.data.len());
        self.data.iter().copied().sum::<T>() / n
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    /// Crops the rectangle [y0, y0+h) × [x0, x0+w).
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Self> {
        if y0 + h > self.height || x0 + w > self.width || h == 0 || w == 0 {
            return Err(CoreError::invalid(format!(
                "crop {h}x{w}@({y0},{x0}) exceeds image {}x{}",
                self.height, self.width
            )));
        }
        Self::from_fn(h, w, self.channels, |y, x, c| self.get(y0 + y, x0 + x, c))
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.height, self.width, self.channels, |y, x, c| {
            self.get(y, self.width - 1 - x, c)
        })
        .expect("flip preserves invariants")
    }

    pub fn flip_vertical(&self) -> Self {
        Self::from_fn(self.height, self.width, self.channels, |y, x, c| {
            self.get(self.height - 1 - y, x, c)
        })
        .expect("flip preserves invariants")
    }

    /// Transposes the two spatial axes.
    pub fn transpose(&self) -> Self {
        Self::from_fn(self.width, self.height, self.channels, |y, x, c| self.get(x, y, c))
            .expect("transpose preserves invariants")
    }

    /// Bilinear resize to `new_h` × `new_w` (half-pixel-center convention).
    pub fn resize_bilinear(&self, new_h: usize, new_w: usize) -> Result<Self> {
        if new_h == 0 || new_w == 0 {
            return Err(CoreError::invalid("resize target must be >= 1 in each dimension"));
        }
        let sy = self.height as f64 / new_h as f64;
        let sx = self.width as f64 / new_w as f64;
        Self::from_fn(new_h, new_w, self.channels, |y, x, c| {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
            let y0 = fy.floor() as usize;
            let x0 = fx.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let x1 = (x0 + 1).min(self.width - 1);
            let dy = T::of(fy - y0 as f64);
            let dx = T::of(fx - x0 as f64);
            let top = self.get(y0, x0, c) * (T::one() - dx) + self.get(y0, x1, c) * dx;
            let bot = self.get(y1, x0, c) * (T::one() - dx) + self.get(y1, x1, c) * dx;
            top * (T::one() - dy) + bot * dy
        })
    }

    /// Converts the scalar type (values are clamped back into [0, 1] to
    /// absorb rounding at the narrower width).
    pub fn cast<U: Scalar>(&self) -> ImageTensor<U> {
        let data = self.data.iter().map(|v| U::of(v.dbl())).collect();
        ImageTensor::new_clamped(self.height, self.width, self.channels, data)
            .expect("cast preserves shape")
    }
}

/// Single-channel unit-interval map (edge strength or text-region score).
#[derive(Debug, Clone, PartialEq)]
pub struct GrayMap<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

/// Edge-strength map; binary when it is a ground-truth edge map.
pub type EdgeMap<T> = GrayMap<T>;
/// Text-region score map.
pub type RegionHeatmap<T> = GrayMap<T>;

impl<T: Scalar> GrayMap<T> {
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(CoreError::invalid("map dimensions must be >= 1"));
        }
        if data.len() != height * width {
            return Err(CoreError::shape(format!(
                "data length {} does not match {height}x{width}",
                data.len()
            )));
        }
        if data.iter().any(|v| !(*v >= T::zero() && *v <= T::one())) {
            return Err(CoreError::invalid("map values must lie in [0, 1]"));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![T::zero(); height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn mean(&self) -> T {
        self.data.iter().copied().sum::<T>() / T::of_usize(self.data.len())
    }

    pub fn max(&self) -> T {
        self.data.iter().copied().fold(T::zero(), T::max)
    }

    /// Converts to a 1-channel [`ImageTensor`].
    pub fn to_image(&self) -> ImageTensor<T> {
        ImageTensor::new(self.height, self.width, 1, self.data.clone())
            .expect("map invariants match image invariants")
    }
}
