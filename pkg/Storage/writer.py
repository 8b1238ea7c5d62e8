import json
import os
import shutil
import tempfile
import threading
from pathlib import Path
from typing import Any, Optional

from Utilities.errors import ParseError
from Utilities.logger import get_logger
from Utilities.utilities import sha256_bytes

logger = get_logger('storage')

MANIFEST_NAME = 'manifest.json'


class ResultWriter:
    """Single writer for one run directory.

    Files are staged in a sibling temporary directory and the run directory
    appears only at commit(), together with manifest.json listing every file
    and its sha256.
    """

    def __init__(self, out_dir: str | Path, metadata: Optional[dict[str, Any]] = None):
        self.out_dir = Path(out_dir)
        self.metadata = dict(metadata or {})
        self._lock = threading.Lock()
        self._files: dict[str, str] = {}
        self._staging: Optional[Path] = None
        self._committed = False

    def __enter__(self) -> "ResultWriter":
        self.open()
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.commit()
        else:
            self.discard()

    def open(self) -> None:
        """Create the staging directory next to the final location."""
        if self.out_dir.exists() and any(self.out_dir.iterdir()):
            raise ParseError(f"output directory {self.out_dir} already exists and is not empty",
                             {"path": str(self.out_dir)})
        self.out_dir.parent.mkdir(parents=True, exist_ok=True)
        self._staging = Path(tempfile.mkdtemp(prefix=f'.{self.out_dir.name}-', dir=self.out_dir.parent))

    def write_text(self, name: str, text: str) -> Path:
        return self.write_bytes(name, text.encode('utf-8'))

    def write_json(self, name: str, data: Any) -> Path:
        return self.write_text(name, json.dumps(data, indent=2, sort_keys=True) + '\n')

    def write_bytes(self, name: str, payload: bytes) -> Path:
        if self._staging is None or self._committed:
            raise RuntimeError("writer is not open")
        if name == MANIFEST_NAME or Path(name).is_absolute() or '..' in Path(name).parts:
            raise ValueError(f"invalid artifact name {name!r}")
        with self._lock:
            if name in self._files:
                raise ValueError(f"artifact {name!r} written twice")
            path = self._staging / name
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(payload)
            self._files[name] = sha256_bytes(payload)
        logger.debug("artifact staged", extra={"artifact": name, "bytes": len(payload)})
        return self.out_dir / name

    def manifest(self) -> dict:
        return {
            "files": [{"path": name, "sha256": digest} for name, digest in sorted(self._files.items())],
            **self.metadata,
        }

    def commit(self) -> Path:
        """Write the manifest and move the staged directory into place."""
        with self._lock:
            manifest = self.manifest()
            (self._staging / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + '\n',
                                                       encoding='utf-8')
            if self.out_dir.exists():
                self.out_dir.rmdir()
            os.replace(self._staging, self.out_dir)
            self._committed = True
        logger.info("run directory written", extra={"path": str(self.out_dir), "files": len(self._files)})
        return self.out_dir

    def discard(self) -> None:
        if self._staging is not None and self._staging.exists():
            shutil.rmtree(self._staging, ignore_errors=True)
        self._staging = None


def read_manifest(run_dir: str | Path) -> dict:
    path = Path(run_dir) / MANIFEST_NAME
    try:
        return json.loads(path.read_text(encoding='utf-8'))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read manifest {path}: {exc}", {"path": str(path)}) from exc
