"""Firmware-style source export of trained models.

Renders a model as one self-contained C file: the trained weights as
constant arrays plus a straight-line estimator function (normalize,
tanh layers, affine output, denormalize). The only dependency is
``<math.h>``; the file compiles unchanged on microcontroller toolchains.

A 100-row conformance table (inputs plus the library's f64 outputs) is
bundled alongside so the compiled code can be checked against the
library: f64 renders agree within 1e-12 m, f32 within 1e-4 m.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .data import Dataset, write_csv
from .mlp import Activation, MlpModel, forward_batch
from .rng import Xoshiro256StarStar

CONFORMANCE_COUNT = 100


def _literal(value: float, precision: str) -> str:
    if precision == "f32":
        # str() of a float32 is its shortest round-trip decimal form
        return str(np.float32(value)) + "f"
    return repr(float(value))


def _array_rows(values: np.ndarray, precision: str, per_line: int = 4) -> list[str]:
    items = [_literal(v, precision) for v in values]
    return [", ".join(items[i:i + per_line]) + ("," if i + per_line < len(items) else "")
            for i in range(0, len(items), per_line)]


def render_c_source(model: MlpModel, precision: str = "f64",
                    symbol_prefix: str = "locnet") -> str:
    """Emit the model as a dependency-free C translation unit."""
    if precision not in ("f32", "f64"):
        raise ValueError("precision must be 'f32' or 'f64'")
    real = "float" if precision == "f32" else "double"
    tanh_fn = "tanhf" if precision == "f32" else "tanh"
    one = "1.0f" if precision == "f32" else "1.0"
    two = "2.0f" if precision == "f32" else "2.0"
    p = symbol_prefix
    sizes = model.layer_sizes

    lines = [
        "/*",
        f" * {p}: feed-forward RSSI position estimator "
        f"({'-'.join(str(s) for s in sizes)}).",
        " * Generated from a trained model file; requires only <math.h>.",
        " * Input: RSSI in dBm, one value per anchor in ascending anchor-id",
        " * order. Output: estimated position in meters.",
        " */",
        "#include <math.h>",
        "",
        f"#define {p.upper()}_INPUTS {sizes[0]}",
        f"#define {p.upper()}_OUTPUTS {sizes[-1]}",
        "",
        f"typedef {real} {p}_real;",
        "",
    ]

    def const_1d(name, values):
        lines.append(f"static const {p}_real {name}[{len(values)}] = {{")
        for row in _array_rows(values, precision):
            lines.append(f"    {row}")
        lines.append("};")
        lines.append("")

    def const_2d(name, matrix):
        rows, cols = matrix.shape
        lines.append(f"static const {p}_real {name}[{rows}][{cols}] = {{")
        for r in range(rows):
            body = "\n".join("        " + row
                             for row in _array_rows(matrix[r], precision))
            lines.append("    {")
            lines.append(body)
            lines.append("    }," if r + 1 < rows else "    }")
        lines.append("};")
        lines.append("")

    const_1d(f"{p}_in_min", model.input_norm[:, 0])
    const_1d(f"{p}_in_max", model.input_norm[:, 1])
    const_1d(f"{p}_out_min", model.output_norm[:, 0])
    const_1d(f"{p}_out_max", model.output_norm[:, 1])
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        const_2d(f"{p}_w{k}", w)
        const_1d(f"{p}_b{k}", b)

    lines += [
        f"void {p}_estimate(const {p}_real rssi_dbm[{p.upper()}_INPUTS],",
        f"{' ' * (len(p) + 14)}{p}_real position_m[{p.upper()}_OUTPUTS])",
        "{",
    ]
    for k, size in enumerate(sizes):
        lines.append(f"    {p}_real a{k}[{size}];")
    lines += [
        "    int i, j;",
        "",
        f"    for (i = 0; i < {sizes[0]}; i++)",
        f"        a0[i] = {two} * (rssi_dbm[i] - {p}_in_min[i])",
        f"            / ({p}_in_max[i] - {p}_in_min[i]) - {one};",
    ]
    for k, act in enumerate(model.activations):
        fan_in, fan_out = sizes[k], sizes[k + 1]
        lines += [
            "",
            f"    for (j = 0; j < {fan_out}; j++) {{",
            f"        {p}_real s = {p}_b{k}[j];",
            f"        for (i = 0; i < {fan_in}; i++)",
            f"            s += a{k}[i] * {p}_w{k}[i][j];",
        ]
        if act is Activation.TANSIG:
            lines.append(f"        a{k + 1}[j] = {tanh_fn}(s);")
        else:
            lines.append(f"        a{k + 1}[j] = s;")
        lines.append("    }")
    last = len(sizes) - 1
    lines += [
        "",
        f"    for (j = 0; j < {sizes[-1]}; j++)",
        f"        position_m[j] = (a{last}[j] + {one}) / {two}",
        f"            * ({p}_out_max[j] - {p}_out_min[j]) + {p}_out_min[j];",
        "}",
        "",
    ]
    return "\n".join(lines)


def conformance_vectors(model: MlpModel,
                        count: int = CONFORMANCE_COUNT) -> Dataset:
    """Inputs spanning the model's normalization ranges, paired with the
    library's f64 forward outputs; drawn deterministically from the
    model seed."""
    gen = Xoshiro256StarStar(model.seed ^ 0xC0F0)
    lo, hi = model.input_norm[:, 0], model.input_norm[:, 1]
    inputs = np.empty((count, model.layer_sizes[0]))
    for r in range(count):
        for c in range(inputs.shape[1]):
            inputs[r, c] = gen.uniform(lo[c], hi[c])
    outputs = forward_batch(model, inputs)
    return Dataset(inputs, outputs, metadata="conformance seed-derived")


def conformance_path(source_path) -> Path:
    path = Path(source_path)
    return path.with_name(path.stem + "_conformance.csv")


def export_model(model: MlpModel, source_path, precision: str = "f64",
                 symbol_prefix: str = "locnet") -> tuple[Path, Path]:
    """Write the C source and its conformance table; returns both paths."""
    source_path = Path(source_path)
    source_path.write_text(render_c_source(model, precision, symbol_prefix),
                           encoding="utf-8")
    table_path = conformance_path(source_path)
    write_csv(conformance_vectors(model), table_path)
    return source_path, table_path
