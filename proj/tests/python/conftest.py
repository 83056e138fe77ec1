import os
import sys

# Under ctest, import the module from the build tree even when an editable
# install is present: its redirecting finder would otherwise win over sys.path.
_build_dir = os.environ.get("PGNE_PYTHON_DIR")
if _build_dir:
    sys.meta_path[:] = [f for f in sys.meta_path if type(f).__name__ != "ScikitBuildRedirectingFinder"]
    sys.path.insert(0, _build_dir)
    for name in [m for m in sys.modules if m == "pgne" or m.startswith("pgne.")]:
        del sys.modules[name]
    import pgne

    assert os.path.dirname(pgne._core.__file__) == os.path.join(_build_dir, "pgne"), pgne._core.__file__
