//! In-memory RGB images and binary masks (row-major, f64 channels in [0,1]).

/// RGB image with f64 channels in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub data: Vec<[f64; 3]>,
}

impl Image {
    pub fn new(width: u32, height: u32) -> Image {
        Image {
            width,
            height,
            data: vec![[0.0; 3]; (width * height) as usize],
        }
    }

    pub fn idx(&self, x: u32, y: u32) -> usize {
        (y * self.width + x) as usize
    }

    pub fn get(&self, x: u32, y: u32) -> [f64; 3] {
        self.data[self.idx(x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [f64; 3]) {
        let i = self.idx(x, y);
        self.data[i] = rgb;
    }

    pub fn pixel_count(&self) -> usize {
        self.data.len()
    }
}

/// Single-channel f64 image (soft masks, depth-like maps).
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32) -> GrayImage {
        GrayImage {
            width,
            height,
            data: vec![0.0; (width * height) as usize],
        }
    }

    pub fn idx(&self, x: u32, y: u32) -> usize {
        (y * self.width + x) as usize
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[self.idx(x, y)]
    }

    /// Binarize at `level` (values strictly above become true).
    pub fn threshold(&self, level: f64) -> MaskImage {
        MaskImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v > level).collect(),
        }
    }
}

/// Binary object mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<bool>,
}

impl MaskImage {
    pub fn new(width: u32, height: u32) -> MaskImage {
        MaskImage {
            width,
            height,
            data: vec![false; (width * height) as usize],
        }
    }

    pub fn idx(&self, x: u32, y: u32) -> usize {
        (y * self.width + x) as usize
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[self.idx(x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let i = self.idx(x, y);
        self.data[i] = v;
    }

    pub fn coverage(&self) -> f64 {
        self.data.iter().filter(|&&b| b).count() as f64 / self.data.len() as f64
    }

    /// Intersection-over-union against another mask of the same size.
    /// Two empty masks count as perfectly overlapping.
    pub fn iou(&self, other: &MaskImage) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "mask size mismatch");
        let mut inter = 0usize;
        let mut union = 0usize;
        for (&a, &b) in self.data.iter().zip(&other.data) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}
