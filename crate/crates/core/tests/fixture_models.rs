use std::path::PathBuf;

use asmnn::data::{synth_dataset, SynthKind};
use asmnn::nn::{load_model, model_to_string, save_model};
use asmnn::{AlphabetSet, Backend, Engine, NetworkModel};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn models() -> Vec<(PathBuf, NetworkModel)> {
    ["face_8bit.model", "face_12bit.model"]
        .into_iter()
        .map(|n| {
            let p = fixture(n);
            let m = load_model(&p).unwrap();
            (p, m)
        })
        .collect()
}

#[test]
fn fixtures_round_trip_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (path, model) in models() {
        let copy = dir.path().join("copy.model");
        save_model(&model, &copy).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&copy).unwrap());
        assert_eq!(
            model_to_string(&load_model(&copy).unwrap()),
            model_to_string(&model)
        );
    }
}

#[test]
fn fixture_formats() {
    let m = models();
    assert_eq!(m[0].1.weight_format.total_bits(), 8);
    assert_eq!(m[1].1.weight_format.total_bits(), 12);
    for (_, model) in &m {
        assert_eq!(model.topology(), vec![64, 16, 2]);
    }
}

#[test]
fn constrained_fixture_backends_agree() {
    let inputs = synth_dataset(SynthKind::FaceLike, 1000, 99).unwrap();
    for (_, model) in models() {
        let (man_model, _) = model
            .constrained(&[AlphabetSet::one(), AlphabetSet::one()])
            .unwrap();
        let exact = Engine::exact(&man_model).unwrap();
        let engines = [
            Engine::uniform(&man_model, Backend::Man).unwrap(),
            Engine::uniform(&man_model, Backend::Asm(AlphabetSet::two())).unwrap(),
            Engine::uniform(&man_model, Backend::Asm(AlphabetSet::four())).unwrap(),
        ];
        for (x, _) in inputs.iter() {
            let want = exact.forward(x).unwrap();
            for e in &engines {
                assert_eq!(e.forward(x).unwrap(), want);
            }
        }
        let e = exact.evaluate(&inputs).unwrap();
        for eng in &engines {
            assert_eq!(eng.evaluate(&inputs).unwrap(), e);
        }
    }
}

#[test]
fn reloaded_model_reproduces_accuracy() {
    let test = synth_dataset(SynthKind::FaceLike, 500, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (_, model) in models() {
        let (c, _) = model
            .constrained(&[AlphabetSet::two(), AlphabetSet::four()])
            .unwrap();
        let before = Engine::configured(&c).unwrap().evaluate(&test).unwrap();
        let p = dir.path().join("c.model");
        save_model(&c, &p).unwrap();
        let loaded = load_model(&p).unwrap();
        let after = Engine::configured(&loaded)
            .unwrap()
            .evaluate(&test)
            .unwrap();
        assert_eq!(before, after);
        assert_eq!(before.accuracy(), after.accuracy());
    }
}

#[test]
fn unconstrained_fixture_rejected_by_man() {
    let (_, model) = &models()[0];
    let res = Engine::uniform(model, Backend::Man);
    assert!(res.is_err());
}
