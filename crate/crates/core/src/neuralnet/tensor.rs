use crate::imaging::Image;

use super::NetError;

/// Dense `N x C x H x W` batch, row-major, contiguous planes.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Tensor {
            n,
            c,
            h,
            w,
            data: vec![0.0; n * c * h * w],
        }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self, NetError> {
        if data.len() != n * c * h * w {
            return Err(NetError::Shape(format!(
                "{} values cannot fill a {n}x{c}x{h}x{w} tensor",
                data.len()
            )));
        }
        Ok(Tensor { n, c, h, w, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn plane_len(&self) -> usize {
        self.h * self.w
    }

    pub fn plane(&self, n: usize, c: usize) -> &[f64] {
        let len = self.plane_len();
        let start = (n * self.c + c) * len;
        &self.data[start..start + len]
    }

    pub fn zeros_like(&self) -> Self {
        Tensor::zeros(self.n, self.c, self.h, self.w)
    }

    /// Stacks equally sized RGB images into an `N x 3 x H x W` batch.
    pub fn from_images(images: &[&Image]) -> Result<Self, NetError> {
        let first = images
            .first()
            .ok_or_else(|| NetError::Shape("empty image batch".into()))?;
        let (h, w) = first.dims();
        let mut t = Tensor::zeros(images.len(), 3, h, w);
        let plane = h * w;
        for (n, img) in images.iter().enumerate() {
            if img.dims() != (h, w) {
                return Err(NetError::Shape(format!(
                    "image {n} is {:?}, batch is {:?}",
                    img.dims(),
                    (h, w)
                )));
            }
            for (p, px) in img.data().chunks_exact(3).enumerate() {
                for (c, &v) in px.iter().enumerate() {
                    t.data[(n * 3 + c) * plane + p] = v;
                }
            }
        }
        Ok(t)
    }

    /// Splits a 3-channel batch back into images, without clamping.
    pub fn to_images(&self) -> Result<Vec<Image>, NetError> {
        if self.c != 3 {
            return Err(NetError::Shape(format!("expected 3 channels, got {}", self.c)));
        }
        let plane = self.plane_len();
        Ok((0..self.n)
            .map(|n| {
                let mut data = vec![0.0; plane * 3];
                for p in 0..plane {
                    for c in 0..3 {
                        data[p * 3 + c] = self.data[(n * 3 + c) * plane + p];
                    }
                }
                Image::from_vec(self.h, self.w, data).expect("plane sizes match")
            })
            .collect())
    }
}
