"""Self-describing text serialisation for potential-outcome datasets.

Layout: a fixed header (format tag, seed material, shape, true curves,
correlation), one fingerprint line, then one record line per patient
carrying the latent uniforms and outcome rows.  The fingerprint is the
SHA-256 digest of everything except the fingerprint line itself, so any
change to a stored value is detected on load.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from posim.errors import FingerprintError
from posim.po import _FORMAT_TAG, DoseCurve, PoDataset, canonical_lines

_HEADER_LINES = 8


def serialize_dataset(dataset: PoDataset) -> bytes:
    """Render a dataset as its canonical byte stream."""
    lines = canonical_lines(dataset)
    body = lines[:_HEADER_LINES] + [f"fingerprint: {dataset.fingerprint}"]
    body += lines[_HEADER_LINES:]
    return ("\n".join(body) + "\n").encode("ascii")


def _header_value(lines: list[str], index: int, key: str) -> str:
    if index >= len(lines):
        raise FingerprintError(f"dataset file truncated before '{key}'")
    prefix = key + ": "
    if not lines[index].startswith(prefix):
        raise FingerprintError(f"expected '{key}' on line {index + 1}")
    return lines[index][len(prefix):]


def _parse_curve(text: str, monotone: bool, key: str) -> DoseCurve | None:
    if text == "-":
        return None
    try:
        probs = tuple(float(tok) for tok in text.split())
    except ValueError as exc:
        raise FingerprintError(f"unparseable {key}: {text}") from exc
    try:
        return DoseCurve(probs, monotone=monotone)
    except ValueError as exc:
        raise FingerprintError(str(exc)) from exc


def _parse_bits(token: str, n_doses: int, line_no: int) -> np.ndarray:
    if len(token) != n_doses or set(token) - {"0", "1"}:
        raise FingerprintError(f"bad outcome row on line {line_no}")
    return np.frombuffer(token.encode("ascii"), dtype=np.uint8) - ord("0")


def deserialize_dataset(data: bytes) -> PoDataset:
    """Parse and validate a dataset byte stream.

    Raises:
        FingerprintError: on a malformed file, a shape mismatch,
            out-of-range values, outcome rows that contradict the
            threshold rule, or a fingerprint that does not match the
            stored content.
    """
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise FingerprintError("dataset file is not ASCII text") from exc
    lines = text.splitlines()
    while lines and not lines[-1]:  # tolerate trailing blank lines
        lines.pop()
    if not lines or lines[0] != _FORMAT_TAG:
        raise FingerprintError("unrecognised dataset format tag")

    try:
        master_seed = int(_header_value(lines, 1, "master_seed"))
        trial_index = int(_header_value(lines, 2, "trial_index"))
        n_doses = int(_header_value(lines, 3, "doses"))
        n_patients = int(_header_value(lines, 4, "patients"))
    except ValueError as exc:
        raise FingerprintError(f"bad header field: {exc}") from exc
    tox_curve = _parse_curve(_header_value(lines, 5, "tox_curve"), True, "tox_curve")
    eff_curve = _parse_curve(_header_value(lines, 6, "eff_curve"), False, "eff_curve")
    if tox_curve is None:
        raise FingerprintError("tox_curve is required")
    try:
        rho = float(_header_value(lines, 7, "rho"))
    except ValueError as exc:
        raise FingerprintError("unparseable rho") from exc
    stored_print = _header_value(lines, _HEADER_LINES, "fingerprint")

    records = lines[_HEADER_LINES + 1 :]
    if len(records) != n_patients:
        raise FingerprintError(
            f"expected {n_patients} patient records, found {len(records)}"
        )
    if len(tox_curve) != n_doses:
        raise FingerprintError("tox_curve length does not match the doses header")
    if eff_curve is not None and len(eff_curve) != n_doses:
        raise FingerprintError("eff_curve length does not match the doses header")

    u_tox = np.empty(n_patients, dtype=np.float64)
    u_eff = np.empty(n_patients, dtype=np.float64) if eff_curve is not None else None
    tox_po = np.empty((n_patients, n_doses), dtype=np.uint8)
    eff_po = (
        np.empty((n_patients, n_doses), dtype=np.uint8)
        if eff_curve is not None
        else None
    )
    for i, record in enumerate(records):
        line_no = _HEADER_LINES + 2 + i
        tokens = record.split(" ")
        if len(tokens) != 5:
            raise FingerprintError(f"malformed patient record on line {line_no}")
        if tokens[0] != str(i):
            raise FingerprintError(f"patient index out of order on line {line_no}")
        try:
            u_tox[i] = float(tokens[1])
        except ValueError as exc:
            raise FingerprintError(f"bad uniform on line {line_no}") from exc
        tox_po[i] = _parse_bits(tokens[3], n_doses, line_no)
        if eff_curve is None:
            if tokens[2] != "-" or tokens[4] != "-":
                raise FingerprintError(
                    f"efficacy fields present without an efficacy curve "
                    f"on line {line_no}"
                )
        else:
            try:
                u_eff[i] = float(tokens[2])
            except ValueError as exc:
                raise FingerprintError(f"bad uniform on line {line_no}") from exc
            eff_po[i] = _parse_bits(tokens[4], n_doses, line_no)

    try:
        dataset = PoDataset(
            master_seed=master_seed,
            trial_index=trial_index,
            tox_curve=tox_curve,
            eff_curve=eff_curve,
            rho=rho,
            u_tox=u_tox,
            u_eff=u_eff,
            tox_po=tox_po,
            eff_po=eff_po,
        )
    except ValueError as exc:
        raise FingerprintError(f"invalid dataset content: {exc}") from exc
    if dataset.fingerprint != stored_print:
        raise FingerprintError(
            "fingerprint mismatch: stored "
            f"{stored_print[:12]}.., computed {dataset.fingerprint[:12]}.."
        )
    return dataset


def write_dataset(dataset: PoDataset, path: str | Path) -> Path:
    """Serialise ``dataset`` to ``path`` and return the path."""
    path = Path(path)
    path.write_bytes(serialize_dataset(dataset))
    return path


def read_dataset(path: str | Path) -> PoDataset:
    """Load and validate a dataset file."""
    return deserialize_dataset(Path(path).read_bytes())


__all__ = [
    "serialize_dataset",
    "deserialize_dataset",
    "write_dataset",
    "read_dataset",
]
