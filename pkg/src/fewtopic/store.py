"""Binary model files: a UTF-8 text manifest followed by raw float64 matrices.

Layout::

    FEWTOPIC-<KIND> <version>
    key value            (any number of lines)
    term <text>          (optional vocabulary, in order)
    tensor <name> <rows> <cols>
    ...
    end
    <little-endian float64 payload, row-major, tensors in declared order>
"""

from __future__ import annotations

import numpy as np

from .errors import ParseError

MAGIC = "FEWTOPIC-"
VERSION = 1


def write_container(path, kind: str, meta: dict, arrays: list, vocab=None) -> None:
    lines = [f"{MAGIC}{kind.upper()} {VERSION}"]
    for key, value in meta.items():
        if isinstance(value, bool):
            value = int(value)
        lines.append(f"{key} {value}")
    for term in vocab or []:
        if "\n" in term:
            raise ValueError(f"vocabulary term contains a newline: {term!r}")
        lines.append(f"term {term}")
    for name, arr in arrays:
        lines.append(f"tensor {name} {arr.shape[0]} {arr.shape[1]}")
    lines.append("end")
    header = ("\n".join(lines) + "\n").encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(header)
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_container(path, kind: str):
    """Return ``(meta, arrays, vocab)``; ``arrays`` is a list of (name, ndarray)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    expected = f"{MAGIC}{kind.upper()} "
    meta, vocab, shapes = {}, [], []
    pos = 0
    lineno = 0
    while True:
        end = blob.find(b"\n", pos)
        if end < 0:
            raise ParseError("manifest is not terminated by 'end'", path, lineno + 1)
        lineno += 1
        try:
            line = blob[pos:end].decode("utf-8")
        except UnicodeDecodeError:
            raise ParseError("manifest is not UTF-8", path, lineno) from None
        pos = end + 1
        if lineno == 1:
            if not line.startswith(expected):
                raise ParseError(f"expected a {kind} file (header {expected.strip()!r})", path, 1)
            if line[len(expected):].strip() != str(VERSION):
                raise ParseError(f"unsupported version {line[len(expected):]!r}", path, 1)
            continue
        if line == "end":
            break
        key, _, value = line.partition(" ")
        if key == "term":
            vocab.append(value)
        elif key == "tensor":
            parts = value.split()
            if len(parts) != 3:
                raise ParseError(f"bad tensor line {line!r}", path, lineno)
            try:
                shapes.append((parts[0], (int(parts[1]), int(parts[2]))))
            except ValueError:
                raise ParseError(f"bad tensor shape in {line!r}", path, lineno) from None
        elif key:
            meta[key] = value
    need = sum(r * c for _, (r, c) in shapes) * 8
    if len(blob) - pos != need:
        raise ParseError(f"payload has {len(blob) - pos} bytes, manifest declares {need}", path)
    arrays = []
    for name, (r, c) in shapes:
        n = r * c
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=pos).reshape(r, c).astype(np.float64)
        pos += n * 8
        arrays.append((name, arr))
    return meta, arrays, vocab


def _int(meta, key, path):
    try:
        return int(meta[key])
    except (KeyError, ValueError):
        raise ParseError(f"manifest key {key!r} missing or not an integer", path) from None


def save_priornet(path, net) -> None:
    meta = {
        "J": net.J, "K": net.K, "M": net.M, "hidden": net.hidden,
        "variant": net.variant, "prior_mode": net.prior_mode,
        "use_representation": net.use_representation, "log_features": net.log_features,
        "dropout": repr(float(net.dropout)), "seed": net.seed,
    }
    write_container(path, "priornet", meta, [(k, v.data) for k, v in net.params.items()])


def load_priornet(path):
    from .priornet import PriorNet

    meta, arrays, _ = read_container(path, "priornet")
    try:
        net = PriorNet(
            _int(meta, "J", path), _int(meta, "K", path), M=_int(meta, "M", path),
            hidden=_int(meta, "hidden", path), prior_mode=meta.get("prior_mode", "nn"),
            use_representation=bool(_int(meta, "use_representation", path)),
            log_features=bool(_int(meta, "log_features", path)), seed=_int(meta, "seed", path),
            dropout=float(meta.get("dropout", 0.1)), variant=meta.get("variant"), init=False,
        )
    except ValueError as exc:
        raise ParseError(f"invalid manifest: {exc}", path) from None
    declared = net.declared_shapes()
    if [(n, s) for n, s in declared] != [(n, a.shape) for n, a in arrays]:
        raise ParseError("tensor list does not match the architecture in the manifest", path)
    net.load_state(dict(arrays))
    return net


def save_topicmodel(path, model, vocab=None, meta=None) -> None:
    info = {"N": model.N, "K": model.K, "J": model.J}
    info.update(meta or {})
    write_container(path, "topicmodel", info,
                    [("theta", np.asarray(model.theta.data)), ("phi", np.asarray(model.phi.data))], vocab)


def load_topicmodel(path):
    """Return ``(TopicModel, vocab, meta)``."""
    from .topicmodel import as_model

    meta, arrays, vocab = read_container(path, "topicmodel")
    named = dict(arrays)
    if set(named) != {"theta", "phi"}:
        raise ParseError("topic model file must hold exactly 'theta' and 'phi'", path)
    theta, phi = named["theta"], named["phi"]
    K, J = _int(meta, "K", path), _int(meta, "J", path)
    if phi.shape != (K, J) or theta.shape[1] != K:
        raise ParseError(f"matrix shapes {theta.shape}/{phi.shape} disagree with K={K}, J={J}", path)
    if vocab and len(vocab) != J:
        raise ParseError(f"{len(vocab)} vocabulary terms for J={J}", path)
    return as_model(theta, phi), vocab, meta
