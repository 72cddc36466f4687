//! 3D scalar grids and their on-disk form: a JSON sidecar describing the
//! geometry next to a raw little-endian payload in C order (Z fastest).

use std::fmt::Debug;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{data_err, Result};

/// Scalar types that can be stored in a volume payload.
pub trait Voxel: Copy + Default + PartialEq + Debug + Send + Sync + 'static {
    const DTYPE: &'static str;
    const BYTES: usize;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Voxel for f32 {
    const DTYPE: &'static str = "f32";
    const BYTES: usize = 4;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(b: &[u8]) -> Self {
        f32::from_le_bytes([b[0], b[1], b[2], b[3]])
    }
}

impl Voxel for i16 {
    const DTYPE: &'static str = "i16";
    const BYTES: usize = 2;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(b: &[u8]) -> Self {
        i16::from_le_bytes([b[0], b[1]])
    }
}

pub const BYTE_ORDER: &str = "C-little-endian";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
    pub dtype: String,
    pub order: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Volume<T> {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    data: Vec<T>,
}

impl<T: Voxel> Volume<T> {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3], data: Vec<T>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(data_err(format!("volume dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(data_err(format!("volume spacing must be positive, got {spacing:?}")));
        }
        let n = dims[0] * dims[1] * dims[2];
        if data.len() != n {
            return Err(data_err(format!("payload holds {} voxels, dims {dims:?} need {n}", data.len())));
        }
        Ok(Self { dims, spacing, origin, data })
    }

    pub fn filled(dims: [usize; 3], spacing: [f64; 3], value: T) -> Result<Self> {
        Self::new(dims, spacing, [0.0; 3], vec![value; dims.iter().product()])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.dims[1] + y) * self.dims[2] + z
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [usize; 3] {
        let z = i % self.dims[2];
        let y = (i / self.dims[2]) % self.dims[1];
        let x = i / (self.dims[1] * self.dims[2]);
        [x, y, z]
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.data[self.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, v: T) {
        let i = self.index(x, y, z);
        self.data[i] = v;
    }

    /// Same dims and spacing.
    pub fn same_grid<U: Voxel>(&self, other: &Volume<U>) -> bool {
        self.dims == other.dims && self.spacing == other.spacing
    }

    pub fn map<U: Voxel>(&self, f: impl Fn(T) -> U) -> Volume<U> {
        Volume {
            dims: self.dims,
            spacing: self.spacing,
            origin: self.origin,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Axial slice `z` as an `X×Y` row-major image.
    pub fn slice_z(&self, z: usize) -> Vec<T> {
        let [nx, ny, _] = self.dims;
        let mut out = Vec::with_capacity(nx * ny);
        for x in 0..nx {
            for y in 0..ny {
                out.push(self.get(x, y, z));
            }
        }
        out
    }

    pub fn set_slice_z(&mut self, z: usize, img: &[T]) {
        let [nx, ny, _] = self.dims;
        assert_eq!(img.len(), nx * ny, "slice size");
        for x in 0..nx {
            for y in 0..ny {
                self.set(x, y, z, img[x * ny + y]);
            }
        }
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            dims: self.dims,
            spacing_mm: self.spacing,
            origin_mm: self.origin,
            dtype: T::DTYPE.to_string(),
            order: BYTE_ORDER.to_string(),
        }
    }

    pub fn payload(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * T::BYTES);
        for &v in &self.data {
            v.write_le(&mut out);
        }
        out
    }

    fn from_parts(sc: &Sidecar, bytes: &[u8]) -> Result<Self> {
        if sc.dtype != T::DTYPE {
            return Err(data_err(format!("expected dtype {}, sidecar says {}", T::DTYPE, sc.dtype)));
        }
        let n: usize = sc.dims.iter().product();
        if bytes.len() != n * T::BYTES {
            return Err(data_err(format!(
                "payload size mismatch: {} bytes for dims {:?} of {} ({} expected)",
                bytes.len(),
                sc.dims,
                sc.dtype,
                n * T::BYTES
            )));
        }
        let data = bytes.chunks_exact(T::BYTES).map(T::read_le).collect();
        Self::new(sc.dims, sc.spacing_mm, sc.origin_mm, data)
    }

    /// Writes `<path>.json` and `<path>.raw` (any extension on `path` is replaced).
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let (meta, raw) = file_pair(path.as_ref());
        if let Some(dir) = raw.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&raw, self.payload())?;
        std::fs::write(&meta, serde_json::to_string_pretty(&self.sidecar())?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let (sc, bytes) = read_pair(path.as_ref())?;
        Self::from_parts(&sc, &bytes)
    }
}

/// Sidecar and payload paths for a volume stored under `path`.
pub fn file_pair(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("json"), path.with_extension("raw"))
}

fn read_pair(path: &Path) -> Result<(Sidecar, Vec<u8>)> {
    let (meta, raw) = file_pair(path);
    let sc: Sidecar = serde_json::from_str(&std::fs::read_to_string(&meta)?)?;
    if sc.order != BYTE_ORDER {
        return Err(data_err(format!("unsupported byte order `{}`", sc.order)));
    }
    Ok((sc, std::fs::read(&raw)?))
}

/// A volume whose scalar type is only known after reading its sidecar.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyVolume {
    F32(Volume<f32>),
    I16(Volume<i16>),
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<AnyVolume> {
    let (sc, bytes) = read_pair(path.as_ref())?;
    match sc.dtype.as_str() {
        "f32" => Ok(AnyVolume::F32(Volume::from_parts(&sc, &bytes)?)),
        "i16" => Ok(AnyVolume::I16(Volume::from_parts(&sc, &bytes)?)),
        other => Err(data_err(format!("unknown dtype `{other}`"))),
    }
}

pub fn write_volume(vol: &AnyVolume, path: impl AsRef<Path>) -> Result<()> {
    match vol {
        AnyVolume::F32(v) => v.write(path),
        AnyVolume::I16(v) => v.write(path),
    }
}
