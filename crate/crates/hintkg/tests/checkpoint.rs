use hintkg::checkpoint::{from_bytes, load_checkpoint, load_checkpoint_for, save_checkpoint, to_bytes, FORMAT_VERSION, MAGIC};
use hintkg::Error;
use hintkg_core::config::TrainConfig;
use hintkg_core::model::{HintModel, ModelDims};

const DIMS: ModelDims = ModelDims { users: 7, items: 9, tuples: 11 };

fn model(dim: usize) -> HintModel<f32> {
    let config = TrainConfig {
        dim,
        cos_dim: 8,
        att_dim: 8,
        mlp_hidden: 16,
        user_slots: 3,
        item_slots: 2,
        ..TrainConfig::default()
    };
    let mut m = HintModel::new(config, DIMS).unwrap();
    m.adam.step = 17;
    m
}

#[test]
fn round_trip_is_bit_identical() {
    let m = model(16);
    let back = from_bytes(&to_bytes(&m)).unwrap();
    assert_eq!(back.config, m.config);
    assert_eq!(back.dims, m.dims);
    assert_eq!(back.adam.step, 17);
    let a = m.all_tensors();
    let b = back.all_tensors();
    assert_eq!(a.len(), b.len());
    for ((na, ta), (nb, tb)) in a.iter().zip(&b) {
        assert_eq!(na, nb);
        let bits = |t: &hintkg_core::tensor::Matrix<f32>| t.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(ta), bits(tb), "{na}");
    }
    assert_eq!(to_bytes(&back), to_bytes(&m));
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    let m = model(16);
    save_checkpoint(&m, &path).unwrap();
    assert_eq!(to_bytes(&load_checkpoint(&path).unwrap()), to_bytes(&m));
}

#[test]
fn every_truncation_is_corrupt() {
    let bytes = to_bytes(&model(4));
    assert!(matches!(from_bytes(&bytes[..bytes.len() - 1]), Err(Error::CorruptCheckpoint(_))));
    for cut in [0, 5, 12, 40, bytes.len() / 2] {
        assert!(matches!(from_bytes(&bytes[..cut]), Err(Error::CorruptCheckpoint(_))), "cut at {cut}");
    }
    let mut longer = bytes.clone();
    longer.push(0);
    assert!(matches!(from_bytes(&longer), Err(Error::CorruptCheckpoint(_))));
}

#[test]
fn bad_magic_and_version() {
    let mut bytes = to_bytes(&model(4));
    bytes[0] ^= 0xff;
    assert!(matches!(from_bytes(&bytes), Err(Error::CorruptCheckpoint(_))));
    let mut bytes = to_bytes(&model(4));
    bytes[MAGIC.len()..MAGIC.len() + 4].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
    match from_bytes(&bytes) {
        Err(Error::VersionMismatch { found, expected }) => assert_eq!((found, expected), (FORMAT_VERSION + 1, FORMAT_VERSION)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn dimension_mismatch_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    let m = model(64);
    save_checkpoint(&m, &path).unwrap();
    let wanted = TrainConfig { dim: 32, ..m.config.clone() };
    match load_checkpoint_for(&path, &wanted, Some(DIMS)) {
        Err(Error::ConfigMismatch(msg)) => assert!(msg.contains("dim"), "{msg}"),
        other => panic!("{other:?}"),
    }
    let other_dims = ModelDims { users: 8, ..DIMS };
    assert!(matches!(load_checkpoint_for(&path, &m.config, Some(other_dims)), Err(Error::ConfigMismatch(_))));
    // non-architectural fields may differ
    let relaxed = TrainConfig { max_epochs: 3, learning_rate: 0.1, ..m.config.clone() };
    load_checkpoint_for(&path, &relaxed, Some(DIMS)).unwrap();
}

#[test]
fn tensor_shape_tampering_is_detected() {
    let m = model(4);
    let mut bytes = to_bytes(&m);
    // rows of the first manifest entry sit right after its name
    let config_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let manifest = 16 + config_len + 32 + 4;
    let name_len = u16::from_le_bytes(bytes[manifest..manifest + 2].try_into().unwrap()) as usize;
    let rows_at = manifest + 2 + name_len;
    let rows = u64::from_le_bytes(bytes[rows_at..rows_at + 8].try_into().unwrap());
    bytes[rows_at..rows_at + 8].copy_from_slice(&(rows - 1).to_le_bytes());
    let err = from_bytes(&bytes).unwrap_err();
    assert!(matches!(err, Error::ConfigMismatch(_) | Error::CorruptCheckpoint(_)), "{err}");
}
