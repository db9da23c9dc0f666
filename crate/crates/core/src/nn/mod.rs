//! Fixed-point feed-forward inference with pluggable multipliers.
//!
//! Activations are unsigned Q0.8. Each neuron accumulates
//! `bias + sum(input * weight)` in a 32-bit saturating register, shifts the
//! sum down to Q4.4 and looks the result up in a 256-entry sigmoid table.

mod engine;
mod format;
mod model;
mod sigmoid;

pub use engine::{argmax, classify, neuron_forward, Backend, Engine, Evaluation, ForwardOutput};
pub use format::{
    load_model, model_from_str, model_to_string, save_model, MODEL_MAGIC, MODEL_VERSION,
};
pub use model::{Activation, Layer, LayerArithmetic, NetworkModel};
pub use sigmoid::{SigmoidTable, PREACT_FRACTION_BITS};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::AlphabetSet;
    use crate::error::Error;
    use crate::fixedpoint::QFormat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(rng: &mut ChaCha8Rng, dims: &[usize], wf: QFormat) -> NetworkModel {
        let layers = dims
            .windows(2)
            .map(|d| {
                let mut l = Layer::zeros(d[0], d[1]);
                let m = wf.max_raw();
                l.weights = (0..d[0] * d[1]).map(|_| rng.gen_range(-m..=m)).collect();
                l.bias = (0..d[1]).map(|_| rng.gen_range(-m..=m)).collect();
                l
            })
            .collect();
        NetworkModel::new(QFormat::INPUT, wf, layers).unwrap()
    }

    #[test]
    fn zero_inputs_give_one_half() {
        let out = neuron_forward(
            &[0, 0, 0],
            &[12, -5, 99],
            0,
            &Backend::Exact,
            QFormat::WEIGHT_8,
            Activation::Sigmoid,
        )
        .unwrap();
        assert_eq!(out, 128);
    }

    #[test]
    fn unit_bias_hits_sigmoid_of_one() {
        // bias 1.0 (Q1.6 raw 64) is exactly 16 in Q4.4.
        let out = neuron_forward(
            &[0],
            &[0],
            64,
            &Backend::Exact,
            QFormat::WEIGHT_8,
            Activation::Sigmoid,
        )
        .unwrap();
        assert_eq!(out, i32::from(SigmoidTable.entries()[128 + 16]));
        let real = 256.0 / (1.0 + (-1.0f64).exp());
        assert!((f64::from(out) - real).abs() <= 1.0);
    }

    #[test]
    fn full_scale_input_times_unit_weight() {
        // 255/256 * 1.0 truncates to 15/16 in Q4.4.
        for (wf, one) in [(QFormat::WEIGHT_8, 64), (QFormat::WEIGHT_12, 1024)] {
            let out = neuron_forward(&[255], &[one], 0, &Backend::Exact, wf, Activation::Sigmoid)
                .unwrap();
            assert_eq!(out, i32::from(SigmoidTable.entries()[128 + 15]));
            let real = 256.0 / (1.0 + (-15.0f64 / 16.0).exp());
            assert!((f64::from(out) - real).abs() <= 1.0);
        }
    }

    #[test]
    fn identity_activation_saturates() {
        let out = neuron_forward(
            &[255, 255],
            &[127, 127],
            0,
            &Backend::Exact,
            QFormat::WEIGHT_8,
            Activation::Identity,
        )
        .unwrap();
        assert_eq!(out, 255);
        let neg = neuron_forward(
            &[255],
            &[-127],
            0,
            &Backend::Exact,
            QFormat::WEIGHT_8,
            Activation::Identity,
        )
        .unwrap();
        assert_eq!(neg, 0);
        let mid = neuron_forward(
            &[128],
            &[64],
            0,
            &Backend::Exact,
            QFormat::WEIGHT_8,
            Activation::Identity,
        )
        .unwrap();
        assert_eq!(mid, 128);
    }

    #[test]
    fn unconstrained_weight_rejected_by_asm_backend() {
        let err = neuron_forward(
            &[7],
            &[105],
            0,
            &Backend::Asm(AlphabetSet::four()),
            QFormat::WEIGHT_8,
            Activation::Sigmoid,
        );
        assert!(matches!(
            err,
            Err(Error::UnsupportedGroupValue { value: 9, .. })
        ));
        let err = neuron_forward(
            &[7],
            &[16],
            3,
            &Backend::Man,
            QFormat::WEIGHT_8,
            Activation::Sigmoid,
        );
        assert!(matches!(
            err,
            Err(Error::UnsupportedGroupValue { value: 3, .. })
        ));
    }

    #[test]
    fn zero_network_forward() {
        let model = NetworkModel::new(
            QFormat::INPUT,
            QFormat::WEIGHT_8,
            vec![Layer::zeros(2, 2), Layer::zeros(2, 2)],
        )
        .unwrap();
        let out = Engine::exact(&model).unwrap().forward(&[17, 200]).unwrap();
        assert_eq!(out.outputs, vec![128, 128]);
        assert_eq!(out.class, 0);
        assert!(matches!(
            Engine::exact(&model).unwrap().forward(&[1]),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[3, 9, 9, 1]), 1);
        assert_eq!(argmax(&[5]), 0);
        assert_eq!(argmax(&[2, 2]), 0);
        assert_eq!(classify(&[127]), 0);
        assert_eq!(classify(&[128]), 1);
    }

    #[test]
    fn model_validation() {
        let mut bad = NetworkModel {
            input_format: QFormat::INPUT,
            weight_format: QFormat::WEIGHT_8,
            layers: vec![Layer::zeros(3, 2), Layer::zeros(3, 1)],
        };
        assert!(bad.validate().is_err());
        bad.layers[1] = Layer::zeros(2, 1);
        assert!(bad.validate().is_ok());
        bad.layers[0].weights[0] = 200;
        assert!(bad.validate().is_err());
        bad.layers[0].weights[0] = 9;
        bad.layers[0].arithmetic = LayerArithmetic::Alphabets(AlphabetSet::four());
        assert!(bad.validate().is_err());
        bad.layers[0].weights[0] = 10;
        assert!(bad.validate().is_ok());
    }

    #[test]
    fn backend_equivalence_on_constrained_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for wf in [QFormat::WEIGHT_8, QFormat::WEIGHT_12] {
            let raw = random_model(&mut rng, &[12, 9, 4], wf);
            for set in [AlphabetSet::one(), AlphabetSet::two(), AlphabetSet::four()] {
                let (model, _) = raw.constrained(&[set.clone(), set.clone()]).unwrap();
                let exact = Engine::exact(&model).unwrap();
                let mut engines = vec![Engine::configured(&model).unwrap()];
                for b in [Backend::Asm(set.clone()), Backend::Asm(AlphabetSet::full())] {
                    engines.push(Engine::uniform(&model, b).unwrap());
                }
                if set == AlphabetSet::one() {
                    engines.push(Engine::uniform(&model, Backend::Man).unwrap());
                    engines
                        .push(Engine::uniform(&model, Backend::Asm(AlphabetSet::one())).unwrap());
                }
                for _ in 0..200 {
                    let x: Vec<u16> = (0..12).map(|_| rng.gen_range(0..=255)).collect();
                    let want = exact.forward(&x).unwrap();
                    for e in &engines {
                        assert_eq!(e.forward(&x).unwrap(), want);
                    }
                }
            }
        }
    }

    #[test]
    fn model_text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let raw = random_model(&mut rng, &[5, 4, 3], QFormat::WEIGHT_12);
        let (mut model, _) = raw
            .constrained(&[AlphabetSet::one(), AlphabetSet::four()])
            .unwrap();
        model.layers[1].activation = Activation::Identity;
        let text = model_to_string(&model);
        let parsed = model_from_str(&text).unwrap();
        assert_eq!(parsed, model);
        assert_eq!(model_to_string(&parsed), text);
        assert!(text.starts_with("asmnn-model 1\ninput_format 8 8 unsigned\nweight_format 12 10 signed\nlayers 2\nlayer 0 5 4 sigmoid 1\nlayer 1 4 3 identity 1-3-5-7\n"));
    }

    #[test]
    fn model_parse_errors_carry_line_numbers() {
        let model =
            NetworkModel::new(QFormat::INPUT, QFormat::WEIGHT_8, vec![Layer::zeros(2, 1)]).unwrap();
        let text = model_to_string(&model);
        let broken = text.replace("0 0\n", "0 x\n");
        assert!(matches!(
            model_from_str(&broken),
            Err(Error::Parse { line: 7, .. })
        ));
        let truncated: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            model_from_str(&truncated),
            Err(Error::Parse { .. })
        ));
        assert!(model_from_str("asmnn-model 2\n").is_err());
        // Constrained layer with an unsupported weight is rejected on load.
        let bad = text
            .replace("layer 0 2 1 sigmoid exact", "layer 0 2 1 sigmoid 1")
            .replace("0 0\n", "3 0\n");
        assert!(model_from_str(&bad).is_err());
    }
}
