"""Minimal ONNX protobuf writer.

The package index in this environment does not carry the `onnx` (or
`onnxscript`) Python package, so checkpoints are serialized directly in
protobuf wire format. Only the small subset of the ONNX schema the
fixture models need is implemented: float tensors (raw_data), Conv /
elementwise nodes with ints attributes, and graph inputs/outputs with
optionally symbolic dimensions.

Field numbers follow onnx.proto (stable across releases):
  ModelProto:    ir_version=1, producer_name=2, graph=7, opset_import=8
  OperatorSetId: domain=1, version=2
  GraphProto:    node=1, name=2, initializer=5, input=11, output=12
  NodeProto:     input=1, output=2, name=3, op_type=4, attribute=5
  AttributeProto:name=1, i=3, t=5, ints=8, type=20 (INT=2, TENSOR=4, INTS=7)
  TensorProto:   dims=1, data_type=2, name=8, raw_data=9  (FLOAT=1)
  ValueInfoProto:name=1, type=2
  TypeProto:     tensor_type=1   Tensor: elem_type=1, shape=2
  TensorShape:   dim=1           Dim: dim_value=1, dim_param=2
"""

import struct

import numpy as np

FLOAT = 1

ATTR_INT = 2
ATTR_TENSOR = 4
ATTR_INTS = 7


def _varint(value: int) -> bytes:
    if value < 0:
        raise ValueError("only non-negative varints are needed here")
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _tag(field: int, wire: int) -> bytes:
    return _varint((field << 3) | wire)


def _len_delim(field: int, payload: bytes) -> bytes:
    return _tag(field, 2) + _varint(len(payload)) + payload


def _string(field: int, text: str) -> bytes:
    return _len_delim(field, text.encode("utf-8"))


def _uint(field: int, value: int) -> bytes:
    return _tag(field, 0) + _varint(value)


def tensor(name: str, array) -> bytes:
    """TensorProto with float32 raw_data."""
    array = np.ascontiguousarray(array, dtype=np.float32)
    out = bytearray()
    for dim in array.shape:
        out += _uint(1, int(dim))
    out += _uint(2, FLOAT)
    out += _string(8, name)
    out += _len_delim(9, array.tobytes())
    return bytes(out)


def _shape(dims) -> bytes:
    out = bytearray()
    for dim in dims:
        if isinstance(dim, str):
            entry = _string(2, dim)  # dim_param
        else:
            entry = _uint(1, int(dim))  # dim_value
        out += _len_delim(1, entry)
    return bytes(out)


def value_info(name: str, dims) -> bytes:
    tensor_type = _uint(1, FLOAT) + _len_delim(2, _shape(dims))
    type_proto = _len_delim(1, tensor_type)
    return _string(1, name) + _len_delim(2, type_proto)


def attr_ints(name: str, values) -> bytes:
    out = bytearray(_string(1, name))
    for value in values:
        out += _uint(8, int(value))
    out += _uint(20, ATTR_INTS)
    return bytes(out)


def attr_int(name: str, value: int) -> bytes:
    return _string(1, name) + _uint(3, int(value)) + _uint(20, ATTR_INT)


def node(op_type: str, inputs, outputs, name: str = "", attributes=()) -> bytes:
    out = bytearray()
    for inp in inputs:
        out += _string(1, inp)
    for outp in outputs:
        out += _string(2, outp)
    out += _string(3, name or f"{op_type}_{outputs[0]}")
    out += _string(4, op_type)
    for attribute in attributes:
        out += _len_delim(5, attribute)
    return bytes(out)


def conv(inp, weight, outp, *, strides=(1, 1), pads=(0, 0, 0, 0), kernel) -> bytes:
    return node(
        "Conv",
        [inp, weight],
        [outp],
        attributes=[
            attr_ints("kernel_shape", kernel),
            attr_ints("strides", strides),
            attr_ints("pads", pads),  # [top, left, bottom, right]
        ],
    )


def graph(name, nodes, inputs, outputs, initializers) -> bytes:
    out = bytearray()
    for entry in nodes:
        out += _len_delim(1, entry)
    out += _string(2, name)
    for entry in initializers:
        out += _len_delim(5, entry)
    for entry in inputs:
        out += _len_delim(11, entry)
    for entry in outputs:
        out += _len_delim(12, entry)
    return bytes(out)


def model(graph_bytes, *, opset=17, ir_version=8, producer="matcher-adapter") -> bytes:
    opset_entry = _string(1, "") + _uint(2, opset)
    out = bytearray()
    out += _uint(1, ir_version)
    out += _string(2, producer)
    out += _len_delim(7, graph_bytes)
    out += _len_delim(8, opset_entry)
    return bytes(out)
