//! Volumetric images, label maps and NIfTI-1 I/O.
//!
//! Only the single-file uncompressed `.nii` layout is supported. Orientation
//! information (qform/sform) is ignored for analysis: inputs are assumed
//! voxel-aligned, having been co-registered upstream.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};

use crate::error::{Error, Result};

/// What a volume's voxel values mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MapIntent {
    /// Longitudinal relaxation rate, s^-1.
    R1,
    /// Effective transverse relaxation rate, s^-1.
    R2Star,
    /// Magnetic susceptibility, ppb.
    Qsm,
    Raw,
}

/// A 3-D scalar grid. Data is row-major with the x axis fastest.
#[derive(Debug, Clone)]
pub struct Volume {
    pub dims: [usize; 3],
    pub voxel_size: [f64; 3],
    pub data: Vec<f64>,
    pub intent: MapIntent,
}

/// A 3-D integer grid aligned to a [`Volume`]; nonzero codes identify ROIs.
#[derive(Debug, Clone)]
pub struct LabelMap {
    pub dims: [usize; 3],
    pub voxel_size: [f64; 3],
    pub data: Vec<u32>,
    pub label_names: BTreeMap<u32, String>,
}

impl Volume {
    pub fn new(dims: [usize; 3], voxel_size: [f64; 3], data: Vec<f64>, intent: MapIntent) -> Result<Self> {
        check_geometry(dims, voxel_size, data.len())?;
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite voxel value {v}")));
        }
        Ok(Self { dims, voxel_size, data, intent })
    }

    pub fn n_voxels(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn voxel_volume_mm3(&self) -> f64 {
        self.voxel_size[0] * self.voxel_size[1] * self.voxel_size[2]
    }
}

impl LabelMap {
    pub fn new(dims: [usize; 3], voxel_size: [f64; 3], data: Vec<u32>, label_names: BTreeMap<u32, String>) -> Result<Self> {
        check_geometry(dims, voxel_size, data.len())?;
        let mut names = label_names;
        for &code in data.iter().filter(|&&c| c != 0) {
            names.entry(code).or_insert_with(|| format!("label_{code}"));
        }
        Ok(Self { dims, voxel_size, data, label_names: names })
    }

    pub fn count(&self, label: u32) -> usize {
        self.data.iter().filter(|&&c| c == label).count()
    }

    /// Checked against any Volume before extraction.
    pub fn geometry_matches(&self, vol: &Volume) -> bool {
        self.dims == vol.dims
            && self
                .voxel_size
                .iter()
                .zip(vol.voxel_size.iter())
                .all(|(a, b)| (a - b).abs() < 1e-6)
    }
}

fn check_geometry(dims: [usize; 3], voxel_size: [f64; 3], len: usize) -> Result<()> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::Geometry(format!("non-positive dims {dims:?}")));
    }
    if voxel_size.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Geometry(format!("non-positive voxel size {voxel_size:?}")));
    }
    let expect = dims[0] * dims[1] * dims[2];
    if len != expect {
        return Err(Error::Geometry(format!("data length {len} != dims product {expect}")));
    }
    Ok(())
}

/// Dice Sørensen Coefficient of `label` between two masks.
///
/// Two empty sets score 1.0 (agreement on absence).
pub fn dice(a: &LabelMap, b: &LabelMap, label: u32) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::Geometry(format!("dims {:?} vs {:?}", a.dims, b.dims)));
    }
    let mut na = 0usize;
    let mut nb = 0usize;
    let mut both = 0usize;
    for (&x, &y) in a.data.iter().zip(b.data.iter()) {
        let ia = x == label;
        let ib = y == label;
        na += ia as usize;
        nb += ib as usize;
        both += (ia && ib) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (na + nb) as f64)
}

/// Values of `vol` at all voxels where `labels == label`, in row-major order.
pub fn extract_roi_values(vol: &Volume, labels: &LabelMap, label: u32) -> Result<Vec<f64>> {
    if !labels.geometry_matches(vol) {
        return Err(Error::Geometry(format!(
            "label map {:?}/{:?} does not match volume {:?}/{:?}",
            labels.dims, labels.voxel_size, vol.dims, vol.voxel_size
        )));
    }
    let name = labels
        .label_names
        .get(&label)
        .ok_or(Error::UnknownLabel { label, context: "extract_roi_values".into() })?
        .clone();
    let values: Vec<f64> = vol
        .data
        .iter()
        .zip(labels.data.iter())
        .filter(|(_, &c)| c == label)
        .map(|(&v, _)| v)
        .collect();
    if values.is_empty() {
        return Err(Error::EmptyRoi { roi: name });
    }
    Ok(values)
}

// ---------------------------------------------------------------------------
// NIfTI-1

const HDR_SIZE: usize = 348;
const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_INT32: i16 = 8;
const DT_FLOAT32: i16 = 16;
const DT_FLOAT64: i16 = 64;

struct NiftiHeader {
    dim: [i16; 8],
    datatype: i16,
    pixdim: [f32; 8],
    vox_offset: f32,
    scl_slope: f32,
    scl_inter: f32,
}

fn parse_header(buf: &[u8]) -> Result<(NiftiHeader, bool)> {
    if buf.len() < HDR_SIZE {
        return Err(Error::Format("file shorter than the 348-byte header".into()));
    }
    // Byte order inferred from sizeof_hdr.
    let little = match LittleEndian::read_i32(&buf[0..4]) {
        348 => true,
        _ if BigEndian::read_i32(&buf[0..4]) == 348 => false,
        other => {
            return Err(Error::Format(format!("sizeof_hdr {other} != 348; not NIfTI-1")));
        }
    };
    let magic = &buf[344..348];
    if magic != b"n+1\0" {
        return Err(Error::Format(format!("bad magic {magic:?}; only single-file n+1 supported")));
    }
    let rd_i16 = |off: usize| {
        if little {
            LittleEndian::read_i16(&buf[off..off + 2])
        } else {
            BigEndian::read_i16(&buf[off..off + 2])
        }
    };
    let rd_f32 = |off: usize| {
        if little {
            LittleEndian::read_f32(&buf[off..off + 4])
        } else {
            BigEndian::read_f32(&buf[off..off + 4])
        }
    };
    let mut dim = [0i16; 8];
    let mut pixdim = [0f32; 8];
    for i in 0..8 {
        dim[i] = rd_i16(40 + 2 * i);
        pixdim[i] = rd_f32(76 + 4 * i);
    }
    let hdr = NiftiHeader {
        dim,
        datatype: rd_i16(70),
        pixdim,
        vox_offset: rd_f32(108),
        scl_slope: rd_f32(112),
        scl_inter: rd_f32(116),
    };
    Ok((hdr, little))
}

fn decode_values(hdr: &NiftiHeader, raw: &[u8], little: bool, n: usize) -> Result<Vec<f64>> {
    let bytes_per = match hdr.datatype {
        DT_UINT8 => 1,
        DT_INT16 => 2,
        DT_INT32 | DT_FLOAT32 => 4,
        DT_FLOAT64 => 8,
        dt => return Err(Error::Unsupported(format!("NIfTI datatype code {dt}"))),
    };
    if raw.len() < n * bytes_per {
        return Err(Error::Format(format!(
            "data section holds {} bytes, need {}",
            raw.len(),
            n * bytes_per
        )));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let off = i * bytes_per;
        let v = match hdr.datatype {
            DT_UINT8 => raw[off] as f64,
            DT_INT16 => {
                if little {
                    LittleEndian::read_i16(&raw[off..off + 2]) as f64
                } else {
                    BigEndian::read_i16(&raw[off..off + 2]) as f64
                }
            }
            DT_INT32 => {
                if little {
                    LittleEndian::read_i32(&raw[off..off + 4]) as f64
                } else {
                    BigEndian::read_i32(&raw[off..off + 4]) as f64
                }
            }
            DT_FLOAT32 => {
                if little {
                    LittleEndian::read_f32(&raw[off..off + 4]) as f64
                } else {
                    BigEndian::read_f32(&raw[off..off + 4]) as f64
                }
            }
            DT_FLOAT64 => {
                if little {
                    LittleEndian::read_f64(&raw[off..off + 8])
                } else {
                    BigEndian::read_f64(&raw[off..off + 8])
                }
            }
            _ => unreachable!(),
        };
        out.push(v);
    }
    // scl_slope == 0 means "no scaling".
    if hdr.scl_slope != 0.0 && (hdr.scl_slope != 1.0 || hdr.scl_inter != 0.0) {
        let (a, b) = (hdr.scl_slope as f64, hdr.scl_inter as f64);
        for v in &mut out {
            *v = a * *v + b;
        }
    }
    Ok(out)
}

fn read_grid(path: &Path, allow_nonfinite: bool) -> Result<(NiftiHeader, [usize; 3], [f64; 3], Vec<f64>)> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let (hdr, little) = parse_header(&buf)?;
    if !(hdr.dim[0] == 3 || hdr.dim[0] == 4) {
        return Err(Error::Geometry(format!("dim[0] = {}, expected 3 or 4", hdr.dim[0])));
    }
    if hdr.dim[1] <= 0 || hdr.dim[2] <= 0 || hdr.dim[3] <= 0 {
        return Err(Error::Geometry(format!("non-positive spatial dim in {:?}", &hdr.dim[1..4])));
    }
    if hdr.dim[0] == 4 && hdr.dim[4] > 1 {
        return Err(Error::Unsupported(format!("multi-volume file (dim[4] = {})", hdr.dim[4])));
    }
    let dims = [hdr.dim[1] as usize, hdr.dim[2] as usize, hdr.dim[3] as usize];
    let voxel_size = [hdr.pixdim[1] as f64, hdr.pixdim[2] as f64, hdr.pixdim[3] as f64];
    if voxel_size.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Geometry(format!("non-positive pixdim {voxel_size:?}")));
    }
    let offset = hdr.vox_offset.max(HDR_SIZE as f32) as usize;
    if offset > buf.len() {
        return Err(Error::Format(format!("vox_offset {offset} beyond end of file")));
    }
    let n = dims[0] * dims[1] * dims[2];
    let data = decode_values(&hdr, &buf[offset..], little, n)?;
    if !allow_nonfinite {
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite voxel value {v} in {}", path.display())));
        }
    }
    Ok((hdr, dims, voxel_size, data))
}

/// Read a quantitative map or image volume.
pub fn read_nifti_volume(path: &Path, intent: MapIntent, allow_nonfinite: bool) -> Result<Volume> {
    let (_, dims, voxel_size, data) = read_grid(path, allow_nonfinite)?;
    Ok(Volume { dims, voxel_size, data, intent })
}

/// Read an integer-coded label map. Values must be non-negative integers.
pub fn read_nifti_labelmap(path: &Path) -> Result<LabelMap> {
    let (hdr, dims, voxel_size, data) = read_grid(path, false)?;
    if hdr.datatype == DT_FLOAT32 || hdr.datatype == DT_FLOAT64 {
        // Accept float-encoded labels only when they are exact integers.
        if data.iter().any(|&v| v.fract() != 0.0 || v < 0.0) {
            return Err(Error::Data("label map contains non-integer or negative values".into()));
        }
    } else if data.iter().any(|&v| v < 0.0) {
        return Err(Error::Data("label map contains negative codes".into()));
    }
    let codes: Vec<u32> = data.iter().map(|&v| v as u32).collect();
    LabelMap::new(dims, voxel_size, codes, BTreeMap::new())
}

fn write_header(w: &mut impl Write, dims: [usize; 3], voxel_size: [f64; 3], datatype: i16, bitpix: i16) -> Result<()> {
    let mut hdr = [0u8; HDR_SIZE + 4]; // header + 4-byte extension flag
    LittleEndian::write_i32(&mut hdr[0..4], 348);
    hdr[39] = b'r'; // dim_info unused; regular field
    let mut dim = [1i16; 8];
    dim[0] = 3;
    for i in 0..3 {
        dim[i + 1] = dims[i] as i16;
    }
    for i in 0..8 {
        LittleEndian::write_i16(&mut hdr[40 + 2 * i..42 + 2 * i], dim[i]);
    }
    LittleEndian::write_i16(&mut hdr[70..72], datatype);
    LittleEndian::write_i16(&mut hdr[72..74], bitpix);
    let mut pixdim = [1f32; 8];
    for i in 0..3 {
        pixdim[i + 1] = voxel_size[i] as f32;
    }
    for i in 0..8 {
        LittleEndian::write_f32(&mut hdr[76 + 4 * i..80 + 4 * i], pixdim[i]);
    }
    LittleEndian::write_f32(&mut hdr[108..112], (HDR_SIZE + 4) as f32); // vox_offset
    LittleEndian::write_f32(&mut hdr[112..116], 1.0); // scl_slope
    LittleEndian::write_f32(&mut hdr[116..120], 0.0); // scl_inter
    hdr[344..348].copy_from_slice(b"n+1\0");
    w.write_all(&hdr)?;
    Ok(())
}

/// Write a volume as float32 NIfTI-1.
pub fn write_nifti_volume(path: &Path, vol: &Volume) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write_header(&mut f, vol.dims, vol.voxel_size, DT_FLOAT32, 32)?;
    let mut buf = vec![0u8; vol.data.len() * 4];
    for (i, &v) in vol.data.iter().enumerate() {
        LittleEndian::write_f32(&mut buf[4 * i..4 * i + 4], v as f32);
    }
    f.write_all(&buf)?;
    Ok(())
}

/// Write a label map as int32 NIfTI-1.
pub fn write_nifti_labelmap(path: &Path, labels: &LabelMap) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write_header(&mut f, labels.dims, labels.voxel_size, DT_INT32, 32)?;
    let mut buf = vec![0u8; labels.data.len() * 4];
    for (i, &v) in labels.data.iter().enumerate() {
        LittleEndian::write_i32(&mut buf[4 * i..4 * i + 4], v as i32);
    }
    f.write_all(&buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(dims: [usize; 3], codes: Vec<u32>) -> LabelMap {
        LabelMap::new(dims, [1.0; 3], codes, BTreeMap::new()).unwrap()
    }

    #[test]
    fn dice_identity_disjoint_half() {
        let a = mask([2, 2, 1], vec![1, 1, 0, 0]);
        assert_eq!(dice(&a, &a, 1).unwrap(), 1.0);
        let b = mask([2, 2, 1], vec![0, 0, 1, 1]);
        assert_eq!(dice(&a, &b, 1).unwrap(), 0.0);
        // |A|=2, |B|=2, |A∩B|=1
        let c = mask([2, 2, 1], vec![0, 1, 1, 0]);
        assert_eq!(dice(&a, &c, 1).unwrap(), 0.5);
    }

    #[test]
    fn dice_both_empty_is_one() {
        let a = mask([2, 1, 1], vec![0, 0]);
        assert_eq!(dice(&a, &a, 3).unwrap(), 1.0);
    }

    #[test]
    fn dice_dim_mismatch() {
        let a = mask([2, 1, 1], vec![1, 0]);
        let b = mask([1, 2, 1], vec![1, 0]);
        assert!(matches!(dice(&a, &b, 1), Err(Error::Geometry(_))));
    }

    #[test]
    fn extract_gathers_in_row_major_order() {
        let vol = Volume::new([3, 1, 1], [1.0; 3], vec![1.0, 2.0, 3.0], MapIntent::Raw).unwrap();
        let lab = mask([3, 1, 1], vec![5, 5, 5]);
        assert_eq!(extract_roi_values(&vol, &lab, 5).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn extract_unknown_and_empty() {
        let vol = Volume::new([2, 1, 1], [1.0; 3], vec![1.0, 2.0], MapIntent::Raw).unwrap();
        let lab = mask([2, 1, 1], vec![1, 1]);
        assert!(matches!(extract_roi_values(&vol, &lab, 9), Err(Error::UnknownLabel { .. })));
        let mut named = lab.clone();
        named.label_names.insert(3, "sn".into());
        assert!(matches!(extract_roi_values(&vol, &named, 3), Err(Error::EmptyRoi { roi }) if roi == "sn"));
    }

    #[test]
    fn extract_invariant_under_relabeling_other_codes() {
        let vol = Volume::new([4, 1, 1], [1.0; 3], vec![1.0, 2.0, 3.0, 4.0], MapIntent::Raw).unwrap();
        let a = mask([4, 1, 1], vec![1, 2, 1, 2]);
        let b = mask([4, 1, 1], vec![1, 7, 1, 9]);
        assert_eq!(
            extract_roi_values(&vol, &a, 1).unwrap(),
            extract_roi_values(&vol, &b, 1).unwrap()
        );
    }

    #[test]
    fn nifti_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vol.nii");
        let vol = Volume::new(
            [4, 4, 4],
            [0.75, 0.75, 0.75],
            (0..64).map(|i| i as f64 / 7.0).collect(),
            MapIntent::R1,
        )
        .unwrap();
        write_nifti_volume(&p, &vol).unwrap();
        let back = read_nifti_volume(&p, MapIntent::R1, false).unwrap();
        assert_eq!(back.dims, vol.dims);
        for (a, b) in back.voxel_size.iter().zip(vol.voxel_size.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
        for (a, b) in back.data.iter().zip(vol.data.iter()) {
            assert!((a - b).abs() <= (*b as f32).abs() as f64 * 1e-7 + 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn labelmap_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lab.nii");
        let lab = mask([3, 2, 1], vec![0, 1, 2, 2, 1, 0]);
        write_nifti_labelmap(&p, &lab).unwrap();
        let back = read_nifti_labelmap(&p).unwrap();
        assert_eq!(back.data, lab.data);
        assert_eq!(back.dims, lab.dims);
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.nii");
        std::fs::write(&p, vec![0u8; 400]).unwrap();
        assert!(matches!(read_nifti_volume(&p, MapIntent::Raw, false), Err(Error::Format(_))));
    }

    #[test]
    fn scl_scaling_applied() {
        // int16 file with scl_slope=2, scl_inter=1; voxel value 3 loads as 7.
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scaled.nii");
        let mut hdr = [0u8; HDR_SIZE + 4];
        LittleEndian::write_i32(&mut hdr[0..4], 348);
        let dim: [i16; 8] = [3, 1, 1, 1, 1, 1, 1, 1];
        for i in 0..8 {
            LittleEndian::write_i16(&mut hdr[40 + 2 * i..42 + 2 * i], dim[i]);
        }
        LittleEndian::write_i16(&mut hdr[70..72], DT_INT16);
        LittleEndian::write_i16(&mut hdr[72..74], 16);
        for i in 0..8 {
            LittleEndian::write_f32(&mut hdr[76 + 4 * i..80 + 4 * i], 1.0);
        }
        LittleEndian::write_f32(&mut hdr[108..112], 352.0);
        LittleEndian::write_f32(&mut hdr[112..116], 2.0);
        LittleEndian::write_f32(&mut hdr[116..120], 1.0);
        hdr[344..348].copy_from_slice(b"n+1\0");
        let mut bytes = hdr.to_vec();
        let mut val = [0u8; 2];
        LittleEndian::write_i16(&mut val, 3);
        bytes.extend_from_slice(&val);
        std::fs::write(&p, bytes).unwrap();
        let vol = read_nifti_volume(&p, MapIntent::Raw, false).unwrap();
        assert_eq!(vol.data, vec![7.0]);
    }

    #[test]
    fn big_endian_header_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("be.nii");
        let mut hdr = [0u8; HDR_SIZE + 4];
        BigEndian::write_i32(&mut hdr[0..4], 348);
        let dim: [i16; 8] = [3, 2, 1, 1, 1, 1, 1, 1];
        for i in 0..8 {
            BigEndian::write_i16(&mut hdr[40 + 2 * i..42 + 2 * i], dim[i]);
        }
        BigEndian::write_i16(&mut hdr[70..72], DT_FLOAT32);
        BigEndian::write_i16(&mut hdr[72..74], 32);
        for i in 0..8 {
            BigEndian::write_f32(&mut hdr[76 + 4 * i..80 + 4 * i], 0.75);
        }
        BigEndian::write_f32(&mut hdr[108..112], 352.0);
        hdr[344..348].copy_from_slice(b"n+1\0");
        let mut bytes = hdr.to_vec();
        let mut val = [0u8; 8];
        BigEndian::write_f32(&mut val[0..4], 1.5);
        BigEndian::write_f32(&mut val[4..8], -2.5);
        bytes.extend_from_slice(&val);
        std::fs::write(&p, bytes).unwrap();
        let vol = read_nifti_volume(&p, MapIntent::Raw, false).unwrap();
        assert_eq!(vol.data, vec![1.5, -2.5]);
        assert_eq!(vol.dims, [2, 1, 1]);
    }
}
