#!/usr/bin/env python3
"""Export the backbones used by the shipped descriptors to ONNX.

Every graph exposes the tapped layer as an output named ``features``:

  googlenet.onnx        1024  global average pool
  squeezenet.onnx       1000  classifier output, with an extra 2-class head on top
  mobilenetv2.onnx      1280  final pooled bottleneck
  nasnet_a_mobile.onnx  1056  global average pool (NHWC, needs tensorflow + tf2onnx)

With ``--weights imagenet`` the pretrained torchvision / Keras weights are
fetched (network access or a warm cache required). ``--weights random``
exports randomly initialized networks, which only makes sense for checking
shapes and plumbing. Each graph gets a ``<name>.onnx.provenance`` sidecar
holding ``imagenet`` or ``random``.
"""

import argparse
import pathlib
import sys

import torch
import torchvision


class Tap(torch.nn.Module):
    def __init__(self, body, head=None):
        super().__init__()
        self.body = body
        self.head = head

    def forward(self, x):
        f = torch.flatten(self.body(x), 1)
        if self.head is None:
            return f
        return f, self.head(f)


def torch_models(pretrained):
    m = torchvision.models
    weights = (lambda w: w.DEFAULT) if pretrained else (lambda w: None)

    g = m.googlenet(weights=weights(m.GoogLeNet_Weights), aux_logits=False, init_weights=not pretrained)
    g.fc = torch.nn.Identity()
    yield "googlenet", Tap(g)

    s = m.squeezenet1_1(weights=weights(m.SqueezeNet1_1_Weights))
    yield "squeezenet", Tap(s, torch.nn.Linear(1000, 2))

    v = m.mobilenet_v2(weights=weights(m.MobileNet_V2_Weights))
    v.classifier = torch.nn.Identity()
    yield "mobilenetv2", Tap(v)


def mark(path, pretrained):
    pathlib.Path(f"{path}.provenance").write_text("imagenet\n" if pretrained else "random\n")
    print(f"wrote {path}")


def export_torch(name, model, out, pretrained):
    model.eval()
    x = torch.zeros(1, 3, 224, 224)
    names = ["features", "logits"] if model.head is not None else ["features"]
    path = out / f"{name}.onnx"
    torch.onnx.export(model, x, str(path), input_names=["image"], output_names=names, opset_version=13, dynamo=False)
    mark(path, pretrained)


def export_nasnet(out, pretrained):
    try:
        import tensorflow as tf
        import tf2onnx
    except ImportError as e:
        print(f"skipping nasnet_a_mobile: {e}", file=sys.stderr)
        return
    model = tf.keras.applications.NASNetMobile(
        weights="imagenet" if pretrained else None, include_top=False, pooling="avg", input_shape=(224, 224, 3)
    )
    spec = (tf.TensorSpec((None, 224, 224, 3), tf.float32, name="image"),)
    path = out / "nasnet_a_mobile.onnx"
    model_proto, _ = tf2onnx.convert.from_keras(model, input_signature=spec, opset=13)
    # Rename the pooled output so every descriptor taps "features".
    old = model_proto.graph.output[0].name
    for node in model_proto.graph.node:
        node.output[:] = ["features" if o == old else o for o in node.output]
    model_proto.graph.output[0].name = "features"
    path.write_bytes(model_proto.SerializeToString())
    mark(path, pretrained)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("models"))
    ap.add_argument("--weights", choices=["imagenet", "random"], default="imagenet")
    ap.add_argument("--only", nargs="*", help="subset of model names")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(args.seed)
    pretrained = args.weights == "imagenet"
    for name, model in torch_models(pretrained):
        if not args.only or name in args.only:
            export_torch(name, model, args.out, pretrained)
    if not args.only or "nasnet_a_mobile" in args.only:
        export_nasnet(args.out, pretrained)


if __name__ == "__main__":
    main()
