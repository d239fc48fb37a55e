use tract_onnx::prelude::*;

use crate::error::{Error, Result};
use crate::features::backend::InferenceBackend;
use crate::features::descriptor::{InputLayout, ModelDescriptor};
use crate::ingest::{InputTensor, CHANNELS, INPUT_SIDE};

type Plan = Arc<TypedRunnableModel>;

/// ONNX graph cut at the descriptor's feature layer, run one image at a time.
pub struct OnnxBackend {
    plan: Plan,
    layout: InputLayout,
    width: usize,
}

fn backend_err(desc: &ModelDescriptor, e: impl std::fmt::Display) -> Error {
    Error::Backend(format!("{}: {e}", desc.name))
}

impl OnnxBackend {
    pub fn load(desc: &ModelDescriptor) -> Result<Self> {
        if !desc.weights_path.is_file() {
            return Err(Error::Config(format!(
                "{}: weights file {} not found",
                desc.name,
                desc.weights_path.display()
            )));
        }
        let shape = match desc.input_layout {
            InputLayout::Nchw => [1, CHANNELS, INPUT_SIDE, INPUT_SIDE],
            InputLayout::Nhwc => [1, INPUT_SIDE, INPUT_SIDE, CHANNELS],
        };
        let model = tract_onnx::onnx()
            .model_for_path(&desc.weights_path)
            .map_err(|e| Error::Config(format!("{}: cannot load {}: {e}", desc.name, desc.weights_path.display())))?
            .with_input_fact(0, f32::fact(shape).into())
            .map_err(|e| backend_err(desc, e))?;
        let model = model
            .with_outputs_by_name([desc.feature_layer.as_str()])
            .map_err(|e| Error::Config(format!("{}: layer {:?} not found: {e}", desc.name, desc.feature_layer)))?;
        let typed = model.into_optimized().map_err(|e| backend_err(desc, e))?;
        let fact = typed.output_fact(0).map_err(|e| backend_err(desc, e))?.clone();
        let dims = fact
            .shape
            .as_concrete()
            .ok_or_else(|| backend_err(desc, "feature layer has a symbolic shape"))?
            .to_vec();
        let width = dims.iter().skip(1).product::<usize>();
        let plan = typed.into_runnable().map_err(|e| backend_err(desc, e))?;
        Ok(OnnxBackend {
            plan,
            layout: desc.input_layout,
            width,
        })
    }

    fn run_one(&self, t: &InputTensor) -> Result<Vec<f32>> {
        let input: Tensor = match self.layout {
            InputLayout::Nchw => Tensor::from_shape(&[1, CHANNELS, INPUT_SIDE, INPUT_SIDE], &t.to_chw()),
            InputLayout::Nhwc => Tensor::from_shape(&[1, INPUT_SIDE, INPUT_SIDE, CHANNELS], t.values()),
        }
        .map_err(|e| Error::Backend(e.to_string()))?;
        let out = self
            .plan
            .run(tvec!(input.into()))
            .map_err(|e| Error::Backend(e.to_string()))?;
        let view = out[0].to_plain_array_view::<f32>().map_err(|e| Error::Backend(e.to_string()))?;
        Ok(view.iter().copied().collect())
    }
}

impl InferenceBackend for OnnxBackend {
    fn output_width(&self) -> usize {
        self.width
    }

    fn run(&self, batch: &[InputTensor]) -> Result<Vec<Vec<f32>>> {
        batch.iter().map(|t| self.run_one(t)).collect()
    }
}
