"""Matrix Market export of system and preconditioner blocks, plus a run manifest.

Values are written with 17 significant digits so that a write/read cycle
reproduces every double bit-exactly. Symmetric blocks go out in coordinate
real symmetric form, everything else as coordinate real general.
"""

import json
from pathlib import Path

import scipy.io as sio
import scipy.sparse as sp

MM_PRECISION = 17


def write_matrix(path, mat, symmetric: bool = False) -> None:
    path = Path(path)
    mat = sp.coo_matrix(mat)
    try:
        sio.mmwrite(str(path), mat, precision=MM_PRECISION,
                    symmetry="symmetric" if symmetric else "general")
    except OSError as exc:
        raise OSError(f"could not write matrix to {path}: {exc}") from exc


def read_matrix(path) -> sp.csr_matrix:
    path = Path(path)
    try:
        return sp.csr_matrix(sio.mmread(str(path)))
    except OSError as exc:
        raise OSError(f"could not read matrix from {path}: {exc}") from exc


def export_system(system, precon, directory) -> dict:
    """Write the assembled system, each preconditioner block, and a manifest.

    Returns the manifest dictionary (also saved as manifest.json).
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_matrix(directory / "system.mtx", system.matrix, symmetric=True)
    files = {"system": "system.mtx"}
    for name in precon.block_names:
        fname = f"precond_{name}.mtx"
        write_matrix(directory / fname, precon.block_matrix(name), symmetric=True)
        files[f"precond_{name}"] = fname
    spec = system.spec
    offsets = system.offsets()
    manifest = {
        "problem": spec.kind,
        "degree": spec.degree,
        "level": spec.level,
        "alpha": spec.alpha,
        "final_time": spec.final_time,
        "omega": spec.omega,
        "seed": spec.seed,
        "dofs": system.dim,
        "block_names": list(system.block_names),
        "block_dims": list(system.block_dims),
        "block_offsets": [int(o) for o in offsets],
        "files": files,
    }
    with open(directory / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest
