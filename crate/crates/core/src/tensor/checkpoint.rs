use std::fs;
use std::io::Write;
use std::path::Path;

use super::{ParamStore, Tensor};
use crate::features::{decode_tns, encode_tns, DType, TensorBlob};
use crate::{Error, Result};

/// Writes every parameter and buffer, in name order, as consecutive TNS1
/// records into `blob_path`, and a `name,offset,file` index into `index_path`.
/// Values are stored as `f64` so a reload is bit-exact.
pub fn save_params(store: &ParamStore, blob_path: &Path, index_path: &Path) -> Result<()> {
    let file_name = blob_path
        .file_name()
        .and_then(|f| f.to_str())
        .ok_or_else(|| Error::param(format!("bad blob path {}", blob_path.display())))?
        .to_string();
    let mut blob = Vec::new();
    let mut index = String::new();
    for (name, p) in store.iter() {
        if name.contains(',') || name.contains('\n') {
            return Err(Error::param(format!("parameter name '{name}' not representable in the index")));
        }
        let t = TensorBlob::new(p.value.shape().to_vec(), p.value.data().to_vec())?;
        index.push_str(&format!("{name},{},{file_name}\n", blob.len()));
        blob.extend(encode_tns(&t, DType::F64)?);
    }
    fs::write(blob_path, &blob).map_err(|e| Error::io(blob_path, e))?;
    let mut f = fs::File::create(index_path).map_err(|e| Error::io(index_path, e))?;
    f.write_all(index.as_bytes()).map_err(|e| Error::io(index_path, e))?;
    Ok(())
}

/// Overwrites the values of `store` from a checkpoint. Every entry of the
/// store must be present with a matching shape; the trainable flags are kept.
pub fn load_params(store: &mut ParamStore, index_path: &Path) -> Result<()> {
    let dir = index_path.parent().unwrap_or(Path::new("."));
    let text = fs::read_to_string(index_path).map_err(|e| Error::io(index_path, e))?;
    let mut cache: std::collections::BTreeMap<String, Vec<u8>> = Default::default();
    let mut seen = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        let [name, offset, file] = parts[..] else {
            return Err(Error::format(format!("index line {}: expected name,offset,file", lineno + 1)));
        };
        let offset: usize = offset
            .parse()
            .map_err(|_| Error::format(format!("index line {}: bad offset '{offset}'", lineno + 1)))?;
        if !cache.contains_key(file) {
            let p = dir.join(file);
            cache.insert(file.to_string(), fs::read(&p).map_err(|e| Error::io(&p, e))?);
        }
        let bytes = &cache[file];
        if offset > bytes.len() {
            return Err(Error::format(format!("offset {offset} past end of {file}")));
        }
        let (blob, _) = decode_tns(&bytes[offset..])?;
        if store.get(name).is_none() {
            return Err(Error::config(format!("checkpoint entry '{name}' unknown to the model")));
        }
        store.set_value(name, Tensor::new(&blob.dims, blob.data)?)?;
        seen += 1;
    }
    if seen != store.len() {
        return Err(Error::config(format!(
            "checkpoint has {seen} entries, model expects {}",
            store.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn round_trip_is_exact_and_ordered() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut s = ParamStore::new();
        s.init_conv("b.conv", 3, 3, 2, 4, true, &mut rng).unwrap();
        s.init_bn("a.bn", 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (blob, idx) = (dir.path().join("params.tns"), dir.path().join("params.idx"));
        save_params(&s, &blob, &idx).unwrap();
        let text = fs::read_to_string(&idx).unwrap();
        let names: Vec<&str> = text.lines().map(|l| l.split(',').next().unwrap()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        assert!(text.starts_with("a.bn.beta,0,params.tns\n"));

        let mut t = s.clone();
        for (_, p) in t.iter_mut() {
            p.value.data_mut().iter_mut().for_each(|v| *v = -7.0);
        }
        load_params(&mut t, &idx).unwrap();
        assert_eq!(s, t);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::zeros(&[2]), true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (blob, idx) = (dir.path().join("p.tns"), dir.path().join("p.idx"));
        save_params(&s, &blob, &idx).unwrap();
        let mut t = ParamStore::new();
        t.insert("w", Tensor::zeros(&[3]), true).unwrap();
        assert!(load_params(&mut t, &idx).is_err());
    }
}
