#!/usr/bin/env python3
"""Regenerates the reference architecture files in this directory.

The chains are reconstructed from the standard public definitions of the
networks they name; layer ids are dense over convs and pools.
"""
import json
from pathlib import Path

HERE = Path(__file__).parent


def conv(k, out_ch, quantize=True, stride=1, shortcut=None):
    return {"kind": "conv", "k": k, "stride": stride, "out_channels": out_ch,
            "quantize": quantize, "shortcut_from": shortcut}


def pool(k=2, stride=2):
    return {"kind": "maxpool", "k": k, "stride": stride}


def finalize(name, input_hwc, precision, layers):
    doc = {"name": name,
           "input": {"h": input_hwc[0], "w": input_hwc[1], "c": input_hwc[2]},
           "precision": precision,
           "layers": []}
    for i, layer in enumerate(layers, start=1):
        entry = {"id": i}
        entry.update(layer)
        doc["layers"].append(entry)
    return doc


def sim_yolo_v2():
    layers = [
        conv(3, 32, quantize=False), pool(),
        conv(3, 64), pool(),
        conv(3, 128), conv(1, 64), conv(3, 128), pool(),
        conv(3, 256), conv(1, 128), conv(3, 256), pool(),
        conv(3, 512), conv(1, 256), conv(3, 512), conv(1, 256), conv(3, 512), pool(),
        conv(3, 1024), conv(1, 512), conv(3, 1024),
        conv(1, 125, quantize=False),
    ]
    return finalize("sim-yolo-v2", (416, 416, 3),
                    {"q_a": 8, "q_w": 8, "q_s": 32, "q_full": 32}, layers)


def tiny_yolo_v2(h, w, qbits, qs):
    layers = [
        conv(3, 16, quantize=False), pool(),
        conv(3, 32), pool(),
        conv(3, 64), pool(),
        conv(3, 128), pool(),
        conv(3, 256), pool(),
        conv(3, 512), pool(k=2, stride=1),
        conv(3, 1024),
        conv(3, 1024),
        conv(1, 125, quantize=False),
    ]
    return finalize("tiny-yolo-v2", (h, w, 3),
                    {"q_a": qbits, "q_w": qbits, "q_s": qs, "q_full": 32}, layers)


def resnet152():
    layers = [conv(7, 64, quantize=False, stride=2), pool(k=3, stride=2)]
    stages = [(64, 256, 3, 1), (128, 512, 8, 2), (256, 1024, 36, 2), (512, 2048, 3, 2)]
    for mid, out, blocks, first_stride in stages:
        for b in range(blocks):
            block_input_id = len(layers)  # id of the layer feeding this block
            identity = b > 0  # first block of a stage changes shape (projection)
            layers.append(conv(1, mid))
            layers.append(conv(3, mid, stride=first_stride if b == 0 else 1))
            layers.append(conv(1, out, shortcut=block_input_id if identity else None))
    layers[-1]["quantize"] = False
    return finalize("resnet-152", (224, 224, 3),
                    {"q_a": 16, "q_w": 16, "q_s": 48, "q_full": 32}, layers)


def proposed_ratios():
    # Per-conv high-precision ratios of the published mixed-precision model,
    # keyed by layer id in simyolov2.json.
    by_conv = {2: 0.035, 3: 0.014, 4: 0.093, 5: 0.014, 6: 0.0112, 7: 0.0381,
               8: 0.0112, 9: 0.0154, 10: 0.0808, 11: 0.0154, 12: 0.0808,
               13: 0.0154, 14: 0.0063, 15: 0.0663, 16: 0.0063}
    net = sim_yolo_v2()
    conv_ids = [l["id"] for l in net["layers"] if l["kind"] == "conv"]
    return {str(conv_ids[ci - 1]): p for ci, p in by_conv.items()}


def main():
    (HERE / "simyolov2.json").write_text(json.dumps(sim_yolo_v2(), indent=2) + "\n")
    (HERE / "tinyyolov2.json").write_text(
        json.dumps(tiny_yolo_v2(416, 416, 8, 32), indent=2) + "\n")
    (HERE / "tinyyolov2_hd.json").write_text(
        json.dumps(tiny_yolo_v2(384, 1280, 16, 48), indent=2) + "\n")
    (HERE / "resnet152.json").write_text(json.dumps(resnet152(), indent=2) + "\n")
    (HERE / "simyolov2_proposed_ratios.json").write_text(
        json.dumps(proposed_ratios(), indent=2) + "\n")


if __name__ == "__main__":
    main()
