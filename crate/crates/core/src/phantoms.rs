//! True sources: the four built-in test shapes and raster masks.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::check_margin;
use crate::grid::{Grid2D, ScalarField2D};

/// Letter-Y raster shipped with the crate: three strokes of half-width 0.1
/// meeting at the origin, rasterized at 160×160 over [−0.8, 0.8]².
pub const BUNDLED_Y_MASK: &str = include_str!("../assets/y_mask.txt");

/// Sub-square of Ω that a raster mask is stretched over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for MaskRegion {
    fn default() -> Self {
        Self { x_min: -0.8, x_max: 0.8, y_min: -0.8, y_max: 0.8 }
    }
}

/// Binary raster; row 0 is the top (largest y).
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<bool>,
    pub region: MaskRegion,
}

impl Mask {
    /// Parses "width height" followed by `height` lines of `width` 0/1 tokens.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse { path: origin.to_string(), line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or_else(|| err(1, "empty mask file".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| err(hl + 1, format!("bad dimension {t:?}"))))
            .collect::<Result<_>>()?;
        let [width, height] = dims[..] else {
            return Err(err(hl + 1, "header must be \"width height\"".into()));
        };
        if width == 0 || height == 0 {
            return Err(err(hl + 1, "mask dimensions must be positive".into()));
        }
        let mut cells = Vec::with_capacity(width * height);
        let mut rows = 0;
        for (ln, line) in lines {
            if rows == height {
                return Err(err(ln + 1, format!("more than {height} rows")));
            }
            let before = cells.len();
            for tok in line.split_whitespace() {
                match tok {
                    "0" => cells.push(false),
                    "1" => cells.push(true),
                    other => return Err(err(ln + 1, format!("non-binary entry {other:?}"))),
                }
            }
            if cells.len() - before != width {
                return Err(err(ln + 1, format!("expected {width} entries, found {}", cells.len() - before)));
            }
            rows += 1;
        }
        if rows != height {
            return Err(err(0, format!("expected {height} rows, found {rows}")));
        }
        Ok(Self { width, height, cells, region: MaskRegion::default() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Value of the pixel containing (x, y); false outside the region.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let r = &self.region;
        if x < r.x_min || x > r.x_max || y < r.y_min || y > r.y_max {
            return false;
        }
        let col = (((x - r.x_min) / (r.x_max - r.x_min)) * self.width as f64).floor() as usize;
        let row = (((r.y_max - y) / (r.y_max - r.y_min)) * self.height as f64).floor() as usize;
        self.cells[row.min(self.height - 1) * self.width + col.min(self.width - 1)]
    }

    /// Fraction of set pixels.
    pub fn fill_fraction(&self) -> f64 {
        self.cells.iter().filter(|&&c| c).count() as f64 / self.cells.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// 2 where max(|x−y|/0.8, |x+y|/0.35) < 1.
    Test1,
    /// 4 where max(|x+y|, |x−y|) < 0.6.
    Test2,
    /// 4 where 0.4² < x² + y² < 0.8².
    Test3,
    Raster(Mask),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub name: String,
    pub amplitude: f64,
    pub shape: Shape,
}

/// Names accepted by [`Phantom::builtin`].
pub const BUILTIN_NAMES: [&str; 4] = ["test1", "test2", "test3", "test4"];

impl Phantom {
    pub fn builtin(name: &str) -> Result<Self> {
        let (amplitude, shape) = match name {
            "test1" => (2.0, Shape::Test1),
            "test2" => (4.0, Shape::Test2),
            "test3" => (4.0, Shape::Test3),
            "test4" => (1.0, Shape::Raster(Mask::parse(BUNDLED_Y_MASK, "bundled y_mask.txt")?)),
            other => {
                return Err(Error::invalid(format!(
                    "unknown phantom {other:?}; built-ins are {}",
                    BUILTIN_NAMES.join(", ")
                )))
            }
        };
        Ok(Self { name: name.to_string(), amplitude, shape })
    }

    pub fn from_mask(name: &str, mask: Mask, amplitude: f64) -> Self {
        Self { name: name.to_string(), amplitude, shape: Shape::Raster(mask) }
    }

    pub fn load_mask(path: &Path, amplitude: f64) -> Result<Self> {
        let mask = Mask::load(path)?;
        Ok(Self::from_mask(&path.display().to_string(), mask, amplitude))
    }

    pub fn description(&self) -> String {
        match &self.shape {
            Shape::Test1 => "rotated rectangle, value 2".into(),
            Shape::Test2 => "rotated square, value 4".into(),
            Shape::Test3 => "annulus 0.4 < r < 0.8, value 4".into(),
            Shape::Raster(m) => format!("{}x{} raster mask, value {}", m.width, m.height, self.amplitude),
        }
    }

    pub fn indicator(&self, x: f64, y: f64) -> bool {
        match &self.shape {
            Shape::Test1 => ((x - y).abs() / 0.8).max((x + y).abs() / 0.35) < 1.0,
            Shape::Test2 => (x + y).abs().max((x - y).abs()) < 0.6,
            Shape::Test3 => {
                let r2 = x * x + y * y;
                0.16 < r2 && r2 < 0.64
            }
            Shape::Raster(m) => m.contains(x, y),
        }
    }

    /// Samples the phantom at the grid nodes; rejects support within the
    /// two-node boundary margin.
    pub fn sample(&self, grid: &Grid2D) -> Result<ScalarField2D> {
        let field = ScalarField2D::from_fn(*grid, |x, y| {
            Complex64::new(if self.indicator(x, y) { self.amplitude } else { 0.0 }, 0.0)
        });
        check_margin(&field).map_err(|e| Error::invalid(format!("phantom {}: {e}", self.name)))?;
        Ok(field)
    }
}
