"""
Rule-file management.
Load bundled specifications by name, or any rule file by path.
"""
from functools import lru_cache
from pathlib import Path

from tools.constraints import Specification
from tools.spec_parser import load_spec


class SpecLoader:
    """Load rule files from the bundled specs directory or the filesystem."""

    def __init__(self, specs_dir: str = None):
        """
        Initialize spec loader.

        Args:
            specs_dir: Path to the bundled specs (defaults to ../specs)
        """
        if specs_dir is None:
            specs_dir = Path(__file__).parent.parent / "specs"

        self.specs_dir = Path(specs_dir)

    def bundled(self) -> list[str]:
        """Names of the bundled rule files."""
        return sorted(p.stem for p in self.specs_dir.glob("*.spec"))

    def path_of(self, name_or_path: str) -> Path:
        """
        Resolve a bundled name (lm, recmod) or a file path.

        Example:
            >>> SpecLoader().path_of("lm").name
            'lm.spec'
        """
        candidate = Path(name_or_path)
        if candidate.suffix != ".spec" and candidate.parent == Path("."):
            candidate = self.specs_dir / f"{name_or_path}.spec"

        if not candidate.exists():
            raise FileNotFoundError(f"Spec file not found: {candidate}")
        return candidate

    def read(self, name_or_path: str) -> str:
        with open(self.path_of(name_or_path), "r", encoding="utf-8") as f:
            return f.read()

    def load(self, name_or_path: str) -> Specification:
        """
        Load and check a specification.

        Raises:
            FileNotFoundError: if no such bundled spec or file exists
            SpecError: if the rule file is malformed
        """
        path = self.path_of(name_or_path)
        return _load_cached(str(path.resolve()), path.stat().st_mtime_ns)


@lru_cache(maxsize=16)
def _load_cached(path: str, mtime: int) -> Specification:
    with open(path, "r", encoding="utf-8") as f:
        return load_spec(f.read(), Path(path).name)
