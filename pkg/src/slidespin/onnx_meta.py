"""Read ONNX model metadata (graph I/O shapes, opsets) without heavy deps.

ONNX files are protobuf messages; the fields needed to validate an encoder's
declared interface — graph inputs/outputs with tensor element types and
shapes, plus opset versions — sit in a handful of well-known field numbers.
This module walks the wire format directly so validation works even when no
ONNX runtime is installed.  Unknown fields are skipped, as protobuf requires.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

__all__ = ["TensorPort", "OnnxSummary", "read_model_summary", "ELEM_FLOAT32"]

ELEM_FLOAT32 = 1  # TensorProto.DataType.FLOAT

_WIRE_VARINT = 0
_WIRE_I64 = 1
_WIRE_LEN = 2
_WIRE_I32 = 5


@dataclass(frozen=True)
class TensorPort:
    """One declared graph input or output."""

    name: str
    elem_type: int | None  # ONNX TensorProto.DataType, None if undeclared
    dims: tuple[int | str | None, ...]  # int = fixed, str = symbolic, None = unknown


@dataclass(frozen=True)
class OnnxSummary:
    ir_version: int | None
    opset_versions: dict[str, int]  # domain ("" = default) -> version
    inputs: tuple[TensorPort, ...]
    outputs: tuple[TensorPort, ...]


def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise ValueError("truncated varint")
        byte = buf[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 63:
            raise ValueError("varint overflows 64 bits")


def _iter_fields(buf: bytes) -> Iterator[tuple[int, int, int | bytes]]:
    """Yield (field_number, wire_type, value) for each top-level field."""
    pos = 0
    while pos < len(buf):
        key, pos = _read_varint(buf, pos)
        field, wire = key >> 3, key & 7
        if field == 0:
            raise ValueError("field number 0 is invalid")
        if wire == _WIRE_VARINT:
            value, pos = _read_varint(buf, pos)
        elif wire == _WIRE_I64:
            value, pos = buf[pos : pos + 8], pos + 8
        elif wire == _WIRE_LEN:
            length, pos = _read_varint(buf, pos)
            value, pos = buf[pos : pos + length], pos + length
            if len(value) != length:
                raise ValueError("truncated length-delimited field")
        elif wire == _WIRE_I32:
            value, pos = buf[pos : pos + 4], pos + 4
        else:
            raise ValueError(f"unsupported wire type {wire}")
        if isinstance(value, bytes) and wire != _WIRE_LEN and len(value) not in (4, 8):
            raise ValueError("truncated fixed-width field")
        yield field, wire, value


def _expect_len(wire: int, value: int | bytes) -> bytes:
    if wire != _WIRE_LEN or not isinstance(value, bytes):
        raise ValueError("expected a length-delimited field")
    return value


def _parse_dimension(buf: bytes) -> int | str | None:
    dim: int | str | None = None
    for field, wire, value in _iter_fields(buf):
        if field == 1 and wire == _WIRE_VARINT:  # dim_value
            dim = int(value)
        elif field == 2:  # dim_param
            dim = _expect_len(wire, value).decode("utf-8")
    return dim


def _parse_shape(buf: bytes) -> tuple[int | str | None, ...]:
    dims = []
    for field, wire, value in _iter_fields(buf):
        if field == 1:  # dim
            dims.append(_parse_dimension(_expect_len(wire, value)))
    return tuple(dims)


def _parse_tensor_type(buf: bytes) -> tuple[int | None, tuple[int | str | None, ...]]:
    elem_type = None
    dims: tuple[int | str | None, ...] = ()
    for field, wire, value in _iter_fields(buf):
        if field == 1 and wire == _WIRE_VARINT:  # elem_type
            elem_type = int(value)
        elif field == 2:  # shape
            dims = _parse_shape(_expect_len(wire, value))
    return elem_type, dims


def _parse_value_info(buf: bytes) -> TensorPort:
    name = ""
    elem_type: int | None = None
    dims: tuple[int | str | None, ...] = ()
    for field, wire, value in _iter_fields(buf):
        if field == 1:  # name
            name = _expect_len(wire, value).decode("utf-8")
        elif field == 2:  # type
            for tfield, twire, tvalue in _iter_fields(_expect_len(wire, value)):
                if tfield == 1:  # tensor_type
                    elem_type, dims = _parse_tensor_type(_expect_len(twire, tvalue))
    return TensorPort(name=name, elem_type=elem_type, dims=dims)


def _parse_graph(buf: bytes) -> tuple[tuple[TensorPort, ...], tuple[TensorPort, ...]]:
    inputs, outputs = [], []
    for field, wire, value in _iter_fields(buf):
        if field == 11:  # input
            inputs.append(_parse_value_info(_expect_len(wire, value)))
        elif field == 12:  # output
            outputs.append(_parse_value_info(_expect_len(wire, value)))
    return tuple(inputs), tuple(outputs)


def _parse_opset(buf: bytes) -> tuple[str, int]:
    domain, version = "", 0
    for field, wire, value in _iter_fields(buf):
        if field == 1:  # domain
            domain = _expect_len(wire, value).decode("utf-8")
        elif field == 2 and wire == _WIRE_VARINT:  # version
            version = int(value)
    return domain, version


def read_model_summary(path: str | Path) -> OnnxSummary:
    """Parse the interface-relevant parts of an ONNX file.

    Raises ValueError when the bytes are not a structurally valid model.
    """
    buf = Path(path).read_bytes()
    ir_version: int | None = None
    opsets: dict[str, int] = {}
    inputs: tuple[TensorPort, ...] = ()
    outputs: tuple[TensorPort, ...] = ()
    saw_graph = False
    for field, wire, value in _iter_fields(buf):
        if field == 1 and wire == _WIRE_VARINT:  # ir_version
            ir_version = int(value)
        elif field == 7:  # graph
            inputs, outputs = _parse_graph(_expect_len(wire, value))
            saw_graph = True
        elif field == 8:  # opset_import
            domain, version = _parse_opset(_expect_len(wire, value))
            opsets[domain] = max(version, opsets.get(domain, 0))
    if not saw_graph:
        raise ValueError("no graph found in model")
    return OnnxSummary(
        ir_version=ir_version,
        opset_versions=opsets,
        inputs=inputs,
        outputs=outputs,
    )
